//! Experiment configuration (TOML).
//!
//! ```toml
//! version = 1
//! seed = 7
//! output_dir = "out/grid"          # optional
//!
//! [data]
//! test_fraction = 0.2
//! [data.synthetic]                 # the 24-dataset grid by default
//! n = 1000
//! [[data.real]]
//! schema = "datasets/adult.toml"   # relative to this file
//!
//! [[models]]
//! name = "DT"
//! kind = "tree"
//! max_depth = 2
//!
//! [explainers]
//! methods = ["Kshap", "Sshap", "Tshap", "TI", "LIME", "LSurro"]
//! [explainers.params]
//! coalition_samples = 2048
//! [explainers.per_method.LIME]
//! neighborhood_size = 2000
//!
//! [metrics]
//! agreement_k = [1, 2, 5, 10]
//! ```

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use anyhow::{anyhow, bail, Context};
use serde::{Deserialize, Serialize};
use xaibench_core::explainers::{ExplainerConfig, Method};
use xaibench_core::metrics::MetricParams;
use xaibench_core::synthgen::{BoolFunction, GridConfig, GroundTruthMode, SyntheticSpec};
use xaibench_core::trees::{ForestParams, ModelSpec, TreeParams};

pub const CONFIG_VERSION: u32 = 1;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub version: u32,
    pub seed: u64,
    #[serde(default)]
    pub output_dir: Option<PathBuf>,
    pub data: DataConfig,
    pub models: Vec<ModelConfig>,
    pub explainers: ExplainersConfig,
    #[serde(default)]
    pub metrics: MetricsConfig,
    /// Directory relative paths are resolved against.
    #[serde(skip)]
    pub base_dir: PathBuf,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DataConfig {
    pub test_fraction: f64,
    pub stratify: bool,
    pub synthetic: Option<SyntheticConfig>,
    pub real: Vec<RealDatasetConfig>,
}

impl Default for DataConfig {
    fn default() -> Self {
        DataConfig { test_fraction: 0.2, stratify: false, synthetic: None, real: Vec::new() }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SyntheticConfig {
    pub functions: Vec<BoolFunction>,
    pub rhos: Vec<f64>,
    pub epsilons: Vec<f64>,
    pub n: usize,
    pub mu_xor: [f64; 2],
    pub mu_not: [f64; 2],
    pub ground_truth: GroundTruthMode,
    /// Keep only the grid cells with these names (all when empty).
    pub only: Vec<String>,
}

impl Default for SyntheticConfig {
    fn default() -> Self {
        let g = GridConfig::default();
        SyntheticConfig {
            functions: g.functions,
            rhos: g.rhos,
            epsilons: g.epsilons,
            n: g.n,
            mu_xor: g.mu_xor,
            mu_not: g.mu_not,
            ground_truth: GroundTruthMode::default(),
            only: Vec::new(),
        }
    }
}

impl SyntheticConfig {
    pub fn grid(&self, base_seed: u64) -> GridConfig {
        GridConfig {
            functions: self.functions.clone(),
            rhos: self.rhos.clone(),
            epsilons: self.epsilons.clone(),
            n: self.n,
            base_seed,
            mu_xor: self.mu_xor,
            mu_not: self.mu_not,
        }
    }

    pub fn specs(&self, base_seed: u64) -> Vec<SyntheticSpec> {
        self.grid(base_seed)
            .enumerate()
            .into_iter()
            .filter(|s| self.only.is_empty() || self.only.contains(&s.name()))
            .collect()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RealDatasetConfig {
    /// Sidecar schema file.
    pub schema: PathBuf,
    /// Overrides the schema's `name`.
    #[serde(default)]
    pub name: Option<String>,
    /// Overrides the schema's `file`.
    #[serde(default)]
    pub csv: Option<PathBuf>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModelConfig {
    #[serde(default)]
    pub name: Option<String>,
    #[serde(flatten)]
    pub choice: ModelChoice,
}

impl ModelConfig {
    pub fn label(&self) -> String {
        self.name.clone().unwrap_or_else(|| match &self.choice {
            ModelChoice::Tree(_) => "DT".into(),
            ModelChoice::Forest(_) => "RF".into(),
            ModelChoice::GridSearch(l) => match l.family {
                Family::Tree => "DT".into(),
                Family::Forest => "RF".into(),
            },
        })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum ModelChoice {
    Tree(TreeParams),
    Forest(ForestParams),
    GridSearch(Lattice),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Family {
    Tree,
    Forest,
}

/// Hyperparameter lattice searched by k-fold cross-validation.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Lattice {
    pub family: Family,
    pub max_depth: Vec<usize>,
    pub n_trees: Vec<usize>,
    pub min_samples_split: Vec<usize>,
    pub folds: usize,
}

impl Default for Lattice {
    fn default() -> Self {
        Lattice {
            family: Family::Forest,
            max_depth: vec![2, 4, 8, 32],
            n_trees: vec![100, 300],
            min_samples_split: vec![2, 10],
            folds: 10,
        }
    }
}

impl Lattice {
    pub fn expand(&self) -> Vec<ModelSpec> {
        let mut out = Vec::new();
        for &max_depth in &self.max_depth {
            for &min_samples_split in &self.min_samples_split {
                match self.family {
                    Family::Tree => out.push(ModelSpec::Tree(TreeParams {
                        max_depth,
                        min_samples_split,
                        ..Default::default()
                    })),
                    Family::Forest => {
                        for &n_trees in &self.n_trees {
                            out.push(ModelSpec::Forest(ForestParams {
                                n_trees,
                                max_depth,
                                min_samples_split,
                                ..Default::default()
                            }));
                        }
                    }
                }
            }
        }
        out
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BackgroundKind {
    Sample,
    Kmeans,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ExplainersConfig {
    pub methods: Vec<Method>,
    pub background: BackgroundKind,
    pub background_size: usize,
    /// Explain at most this many test instances (the first ones).
    pub max_instances: Option<usize>,
    pub params: ExplainerConfig,
    /// Partial overrides of `params`, keyed by method name.
    pub per_method: BTreeMap<String, toml::Table>,
}

impl Default for ExplainersConfig {
    fn default() -> Self {
        ExplainersConfig {
            methods: Method::ALL.to_vec(),
            background: BackgroundKind::Sample,
            background_size: 100,
            max_instances: None,
            params: ExplainerConfig::default(),
            per_method: BTreeMap::new(),
        }
    }
}

impl ExplainersConfig {
    /// Effective configuration for `method`, seeded from the experiment seed.
    pub fn for_method(&self, method: Method, seed: u64) -> anyhow::Result<ExplainerConfig> {
        let mut table = toml::Table::try_from(&self.params)?;
        for (name, overrides) in &self.per_method {
            if name.parse::<Method>().map_err(|e| anyhow!(e))? == method {
                for (k, v) in overrides {
                    table.insert(k.clone(), v.clone());
                }
            }
        }
        let mut cfg: ExplainerConfig = table.try_into().with_context(|| format!("explainer settings for {method}"))?;
        cfg.seed = seed;
        cfg.validate()?;
        Ok(cfg)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct MetricsConfig {
    /// Metric names kept in the report (all when empty).
    pub include: Vec<String>,
    #[serde(flatten)]
    pub params: MetricParams,
}

impl Default for MetricsConfig {
    fn default() -> Self {
        MetricsConfig { include: Vec::new(), params: MetricParams::default() }
    }
}

pub const ALL_METRICS: [&str; 7] = [
    xaibench_core::metrics::names::CONSISTENCY,
    xaibench_core::metrics::names::GROUND_TRUTH_DISTANCE,
    xaibench_core::metrics::names::STABILITY,
    xaibench_core::metrics::names::FEATURES_FOR_THRESHOLD,
    xaibench_core::metrics::names::DISTANCE_TOP1,
    xaibench_core::metrics::names::ACCURACY_AT_5,
    xaibench_core::metrics::names::EFFICIENCY_GAP,
];

impl ExperimentConfig {
    pub fn from_toml_str(text: &str, base_dir: &Path) -> anyhow::Result<Self> {
        let mut cfg: ExperimentConfig = toml::from_str(text)?;
        cfg.base_dir = base_dir.to_path_buf();
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> anyhow::Result<Self> {
        if !path.is_file() {
            bail!("config not found: {}", path.display());
        }
        let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        let base = path.parent().unwrap_or(Path::new(".")).to_path_buf();
        Self::from_toml_str(&text, &base).with_context(|| format!("invalid config {}", path.display()))
    }

    pub fn validate(&self) -> anyhow::Result<()> {
        if self.version != CONFIG_VERSION {
            bail!("unsupported config version {} (expected {CONFIG_VERSION})", self.version);
        }
        let synthetic = self.data.synthetic.as_ref().map_or(0, |s| s.specs(0).len());
        if synthetic + self.data.real.len() == 0 {
            bail!("no datasets selected");
        }
        if !(self.data.test_fraction > 0.0 && self.data.test_fraction < 1.0) {
            bail!("test_fraction must lie in (0, 1)");
        }
        if self.models.is_empty() {
            bail!("no models configured");
        }
        let mut labels: Vec<String> = self.models.iter().map(ModelConfig::label).collect();
        labels.sort();
        if labels.windows(2).any(|w| w[0] == w[1]) {
            bail!("model names must be unique");
        }
        for m in &self.models {
            if let ModelChoice::GridSearch(l) = &m.choice {
                if l.expand().is_empty() || l.folds < 2 {
                    bail!("grid search for {} needs a non-empty lattice and at least 2 folds", m.label());
                }
            }
        }
        if self.explainers.methods.is_empty() {
            bail!("no explainers configured");
        }
        for (name, _) in &self.explainers.per_method {
            name.parse::<Method>().map_err(|e| anyhow!(e))?;
        }
        for &m in &self.explainers.methods {
            self.explainers.for_method(m, 0)?;
        }
        if self.explainers.background_size == 0 {
            bail!("background_size must be positive");
        }
        if let Some(bad) = self.metrics.include.iter().find(|m| !ALL_METRICS.contains(&m.as_str())) {
            bail!("unknown metric {bad:?}; valid metrics: {}", ALL_METRICS.join(", "));
        }
        let p = &self.metrics.params;
        if !(p.compactness_threshold > 0.0 && p.compactness_threshold <= 1.0) {
            bail!("compactness_threshold must lie in (0, 1]");
        }
        if p.stability_neighbors == 0 {
            bail!("stability_neighbors must be positive");
        }
        Ok(())
    }

    pub fn resolve(&self, path: &Path) -> PathBuf {
        if path.is_absolute() {
            path.to_path_buf()
        } else {
            self.base_dir.join(path)
        }
    }

    /// Restricts the run to the named datasets and methods.
    pub fn restrict(&mut self, datasets: &[String], methods: &[Method]) {
        if !datasets.is_empty() {
            if let Some(s) = &mut self.data.synthetic {
                let names: Vec<String> =
                    s.specs(0).iter().map(SyntheticSpec::name).filter(|n| datasets.contains(n)).collect();
                if names.is_empty() {
                    self.data.synthetic = None;
                } else {
                    s.only = names;
                }
            }
            let base = self.base_dir.clone();
            self.data.real.retain(|r| {
                let name = r.name.clone().or_else(|| {
                    let schema = if r.schema.is_absolute() { r.schema.clone() } else { base.join(&r.schema) };
                    xaibench_core::data::DatasetSchema::load(&schema).ok().and_then(|s| s.name)
                });
                name.is_some_and(|n| datasets.contains(&n))
            });
        }
        if !methods.is_empty() {
            self.explainers.methods.retain(|m| methods.contains(m));
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"
version = 1
seed = 3
[data.synthetic]
[[models]]
kind = "tree"
[explainers]
"#;

    #[test]
    fn minimal_config_uses_defaults() {
        let c = ExperimentConfig::from_toml_str(MINIMAL, Path::new(".")).unwrap();
        assert_eq!(c.data.synthetic.as_ref().unwrap().specs(0).len(), 24);
        assert_eq!(c.models[0].label(), "DT");
        assert_eq!(c.models[0].choice, ModelChoice::Tree(TreeParams::default()));
        assert_eq!(c.explainers.methods.len(), 6);
        assert_eq!(c.metrics.params.stability_neighbors, 10);
    }

    #[test]
    fn rejects_bad_configs() {
        let p = Path::new(".");
        assert!(ExperimentConfig::from_toml_str("version = 1\n[data.synthetic]\n", p).is_err());
        let no_seed = MINIMAL.replace("seed = 3", "");
        assert!(ExperimentConfig::from_toml_str(&no_seed, p).is_err());
        let bad_version = MINIMAL.replace("version = 1", "version = 9");
        assert!(ExperimentConfig::from_toml_str(&bad_version, p).is_err());
        let no_methods = format!("{MINIMAL}methods = []\n");
        assert!(ExperimentConfig::from_toml_str(&no_methods, p).is_err());
        let typo = MINIMAL.replace("seed = 3", "seed = 3\nsed = 4");
        assert!(ExperimentConfig::from_toml_str(&typo, p).is_err());
        let metric = format!("{MINIMAL}[metrics]\ninclude = [\"accuracy\"]\n");
        let err = ExperimentConfig::from_toml_str(&metric, p).unwrap_err().to_string();
        assert!(err.contains("unknown metric"), "{err}");
        assert!(ExperimentConfig::load(Path::new("/nonexistent/x.toml")).unwrap_err().to_string().contains("config not found"));
    }

    #[test]
    fn per_method_overrides_merge() {
        let text = format!("{MINIMAL}[explainers.params]\ncoalition_samples = 64\n[explainers.per_method.lime]\nneighborhood_size = 10\n");
        let c = ExperimentConfig::from_toml_str(&text, Path::new(".")).unwrap();
        let lime = c.explainers.for_method(Method::Lime, 5).unwrap();
        assert_eq!((lime.neighborhood_size, lime.coalition_samples, lime.seed), (10, 64, 5));
        assert_eq!(c.explainers.for_method(Method::Kshap, 5).unwrap().neighborhood_size, 5000);
    }

    #[test]
    fn default_lattice() {
        let l = Lattice::default();
        assert_eq!(l.expand().len(), 16);
        let text = MINIMAL.replace("kind = \"tree\"", "kind = \"grid-search\"\nfamily = \"tree\"\nmax_depth = [2, 3]");
        let c = ExperimentConfig::from_toml_str(&text, Path::new(".")).unwrap();
        let ModelChoice::GridSearch(l) = &c.models[0].choice else { panic!() };
        assert_eq!(l.expand().len(), 4);
        assert_eq!(l.folds, 10);
    }

    #[test]
    fn restriction() {
        let mut c = ExperimentConfig::from_toml_str(MINIMAL, Path::new(".")).unwrap();
        c.restrict(&["not_rho0.90_eps0.00".into()], &[Method::Tshap]);
        assert_eq!(c.data.synthetic.as_ref().unwrap().specs(0).len(), 1);
        assert_eq!(c.explainers.methods, vec![Method::Tshap]);
    }
}
