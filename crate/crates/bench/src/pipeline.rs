//! Stage-by-stage experiment runner with digest-keyed reuse of artifacts.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::time::Instant;

use anyhow::{anyhow, bail, Context, Result};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use xaibench_core::data::{encode, load_csv, split, split_stratified, Dataset, DatasetSchema, EncodingPolicy, FeatureStats, SplitIndices};
use xaibench_core::explainers::{explain_batch, Attribution, Background, ExplainContext, Method};
use xaibench_core::metrics::{evaluate_cell, CellInput, CellOutput, MetricReport};
use xaibench_core::model::accuracy;
use xaibench_core::seed;
use xaibench_core::synthgen::{generate, ground_truth, GridManifest, SyntheticSpec};
use xaibench_core::trees::{fit_model, grid_search, ModelSpec, TrainedModel};

use crate::artifact::{self, digest_of, is_current, restamp, sha256_hex, Stamp};
use crate::config::{BackgroundKind, ExperimentConfig, ModelChoice, ModelConfig};
use crate::report::{emit_report, layout_paths, write_report, Layout, ReportBundle};

pub const FRAMEWORK_VERSION: &str = env!("CARGO_PKG_VERSION");
/// Bumped whenever an artifact format changes, invalidating caches.
const ARTIFACT_FORMAT: u32 = 1;

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Stage {
    Generate,
    Split,
    Train,
    Explain,
    Evaluate,
    Report,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StageRecord {
    pub stage: Stage,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub dataset: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub model: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub method: Option<String>,
    /// Paths relative to the output directory.
    pub artifacts: Vec<PathBuf>,
    pub stage_digest: String,
    pub cached: bool,
    pub seconds: f64,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub notes: Vec<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub framework_version: String,
    pub config_digest: String,
    pub seed: u64,
    pub until: Stage,
    pub stages: Vec<StageRecord>,
}

impl RunManifest {
    pub fn failures(&self) -> impl Iterator<Item = &StageRecord> {
        self.stages.iter().filter(|s| s.error.is_some())
    }

    pub fn is_success(&self) -> bool {
        self.failures().next().is_none()
    }

    pub fn artifacts(&self, stage: Stage) -> Vec<&Path> {
        self.stages
            .iter()
            .filter(|s| s.stage == stage && s.error.is_none())
            .flat_map(|s| s.artifacts.iter().map(PathBuf::as_path))
            .collect()
    }
}

#[derive(Clone, Debug)]
pub struct RunOptions {
    pub out_dir: PathBuf,
    pub until: Stage,
    /// Worker threads; 1 runs everything on one thread.
    pub jobs: usize,
    pub layouts: Vec<Layout>,
}

impl RunOptions {
    pub fn new(out_dir: impl Into<PathBuf>) -> Self {
        RunOptions { out_dir: out_dir.into(), until: Stage::Report, jobs: 1, layouts: Layout::ALL.to_vec() }
    }
}

/// Digest of the configuration, ignoring where outputs go.
pub fn config_digest(cfg: &ExperimentConfig) -> String {
    let mut c = cfg.clone();
    c.output_dir = None;
    digest_of(&(ARTIFACT_FORMAT, &c))
}

fn name_key(name: &str) -> u64 {
    let h = sha256_hex(name.as_bytes());
    u64::from_str_radix(&h[..16], 16).expect("hex")
}

fn file_part(s: &str) -> String {
    s.chars().map(|c| if c.is_ascii_alphanumeric() || c == '.' || c == '-' || c == '_' { c } else { '_' }).collect()
}

enum Source {
    Synthetic { spec: SyntheticSpec, ground_truth: Vec<f64> },
    Real { name: String, schema: DatasetSchema, csv: PathBuf },
}

impl Source {
    fn name(&self) -> String {
        match self {
            Source::Synthetic { spec, .. } => spec.name(),
            Source::Real { name, .. } => name.clone(),
        }
    }

    fn group(&self) -> String {
        match self {
            Source::Synthetic { spec, .. } => spec.function.to_string(),
            Source::Real { name, .. } => name.clone(),
        }
    }
}

fn sources(cfg: &ExperimentConfig) -> Result<Vec<Source>> {
    let mut out = Vec::new();
    if let Some(s) = &cfg.data.synthetic {
        for spec in s.specs(seed::derive(cfg.seed, &[0])) {
            let gt = ground_truth(&spec, s.ground_truth)?;
            out.push(Source::Synthetic { spec, ground_truth: gt.normalized.to_vec() });
        }
    }
    for r in &cfg.data.real {
        let schema_path = cfg.resolve(&r.schema);
        let schema = DatasetSchema::load(&schema_path)?;
        let name = r
            .name
            .clone()
            .or_else(|| schema.name.clone())
            .ok_or_else(|| anyhow!("{}: dataset needs a name", schema_path.display()))?;
        let csv = match (&r.csv, &schema.file) {
            (Some(p), _) => cfg.resolve(p),
            (None, Some(f)) => schema_path.parent().unwrap_or(Path::new(".")).join(f),
            (None, None) => bail!("{}: no data file given", schema_path.display()),
        };
        out.push(Source::Real { name, schema, csv });
    }
    let mut names: Vec<String> = out.iter().map(Source::name).collect();
    names.sort();
    if let Some(w) = names.windows(2).find(|w| w[0] == w[1]) {
        bail!("dataset name {} used twice", w[0]);
    }
    Ok(out)
}

struct Scope<'a> {
    dataset: &'a str,
    model: Option<&'a str>,
    method: Option<&'a str>,
}

struct Runner<'a> {
    cfg: &'a ExperimentConfig,
    opts: &'a RunOptions,
    config_digest: String,
}

#[derive(Default)]
struct DatasetOutcome {
    records: Vec<StageRecord>,
    cells: Vec<(String, CellOutput)>,
    expected_cells: Vec<(String, String, Method)>,
}

impl Runner<'_> {
    fn rel(&self, p: &Path) -> PathBuf {
        p.strip_prefix(&self.opts.out_dir).unwrap_or(p).to_path_buf()
    }

    /// Reuses the stage's artifacts when their stamps match `digest`,
    /// otherwise recomputes them. Either way a record is appended.
    fn stage<X>(
        &self,
        records: &mut Vec<StageRecord>,
        stage: Stage,
        scope: &Scope<'_>,
        artifacts: &[PathBuf],
        digest: &str,
        load: impl FnOnce() -> Result<X>,
        compute: impl FnOnce(&Stamp) -> Result<(X, Vec<String>)>,
    ) -> Result<X> {
        let start = Instant::now();
        let stamp = Stamp::new(&self.config_digest, digest);
        let mut cached = false;
        let mut notes = Vec::new();
        let mut result = None;
        if artifacts.iter().all(|p| is_current(p, digest)) {
            let reused = artifacts.iter().try_for_each(|p| restamp(p, &stamp)).and_then(|_| load());
            match reused {
                Ok(x) => {
                    cached = true;
                    result = Some(Ok(x));
                }
                Err(e) => log::warn!("recomputing {stage:?} for {}: {e:#}", scope.dataset),
            }
        }
        let result = result.unwrap_or_else(|| {
            compute(&stamp).map(|(x, n)| {
                notes = n;
                x
            })
        });
        records.push(StageRecord {
            stage,
            dataset: Some(scope.dataset.to_string()),
            model: scope.model.map(str::to_string),
            method: scope.method.map(str::to_string),
            artifacts: artifacts.iter().map(|p| self.rel(p)).collect(),
            stage_digest: digest.to_string(),
            cached,
            seconds: start.elapsed().as_secs_f64(),
            notes,
            error: result.as_ref().err().map(|e| format!("{stage:?} stage failed: {e:#}")),
        });
        result
    }

    fn run_dataset(&self, source: &Source) -> DatasetOutcome {
        let mut out = DatasetOutcome::default();
        if let Err(e) = self.run_dataset_inner(source, &mut out) {
            log::error!("{}: {e:#}", source.name());
        }
        out
    }

    fn run_dataset_inner(&self, source: &Source, out: &mut DatasetOutcome) -> Result<()> {
        let cfg = self.cfg;
        let name = source.name();
        let key = name_key(&name);
        let dir = &self.opts.out_dir;
        let scope = Scope { dataset: &name, model: None, method: None };

        let data_path = dir.join("datasets").join(format!("{}.csv", file_part(&name)));
        let gen_digest = match source {
            Source::Synthetic { spec, .. } => digest_of(&("generate", ARTIFACT_FORMAT, spec)),
            Source::Real { schema, csv, .. } => {
                let bytes = std::fs::read(csv).map_err(|e| anyhow!("reading {}: {e}", csv.display()));
                let csv_hash = match bytes {
                    Ok(b) => sha256_hex(&b),
                    Err(e) => {
                        return self
                            .stage::<()>(&mut out.records, Stage::Generate, &scope, &[], "", || Err(anyhow!("unreachable")), |_| Err(e))
                    }
                };
                digest_of(&("generate", ARTIFACT_FORMAT, schema, csv_hash, EncodingPolicy::default()))
            }
        };
        let ds: Dataset<f64> = self.stage(
            &mut out.records,
            Stage::Generate,
            &scope,
            std::slice::from_ref(&data_path),
            &gen_digest,
            || artifact::read_dataset(&data_path),
            |stamp| {
                let ds = match source {
                    Source::Synthetic { spec, .. } => generate::<f64>(spec)?,
                    Source::Real { schema, csv, name } => {
                        let raw = load_csv(csv, schema)?;
                        let (ds, _) = encode::<f64>(&raw, &EncodingPolicy::default())?;
                        let provenance = format!("{name}:{}", ds.provenance());
                        ds.with_provenance(provenance)
                    }
                };
                artifact::write_dataset(&data_path, stamp, &ds)?;
                Ok((ds, Vec::new()))
            },
        )?;
        if self.opts.until < Stage::Split {
            return Ok(());
        }

        let split_path = dir.join("datasets").join(format!("{}.split.json", file_part(&name)));
        let split_seed = seed::derive(cfg.seed, &[1, key]);
        let split_digest = digest_of(&("split", &gen_digest, cfg.data.test_fraction, cfg.data.stratify, split_seed));
        let sp: SplitIndices = self.stage(
            &mut out.records,
            Stage::Split,
            &scope,
            std::slice::from_ref(&split_path),
            &split_digest,
            || artifact::read_json(&split_path),
            |stamp| {
                let sp = if cfg.data.stratify {
                    split_stratified(ds.labels(), cfg.data.test_fraction, split_seed)?
                } else {
                    split(ds.len(), cfg.data.test_fraction, split_seed)?
                };
                artifact::write_json(&split_path, stamp, &sp)?;
                Ok((sp, Vec::new()))
            },
        )?;
        if self.opts.until < Stage::Train {
            return Ok(());
        }
        let train = ds.subset(&sp.train);
        let test = ds.subset(&sp.test);

        let mut first_error = None;
        for model_cfg in &cfg.models {
            if let Err(e) = self.run_model(source, &name, &train, &test, model_cfg, &split_digest, out) {
                first_error.get_or_insert(e);
            }
        }
        first_error.map_or(Ok(()), Err)
    }

    #[allow(clippy::too_many_arguments)]
    fn run_model(
        &self,
        source: &Source,
        name: &str,
        train: &Dataset<f64>,
        test: &Dataset<f64>,
        model_cfg: &ModelConfig,
        split_digest: &str,
        out: &mut DatasetOutcome,
    ) -> Result<()> {
        let cfg = self.cfg;
        let dir = &self.opts.out_dir;
        let label = model_cfg.label();
        let (dkey, mkey) = (name_key(name), name_key(&label));
        let scope = Scope { dataset: name, model: Some(&label), method: None };
        let stem = format!("{}__{}", file_part(name), file_part(&label));

        let model_path = dir.join("models").join(format!("{stem}.json"));
        let model_seed = seed::derive(cfg.seed, &[2, dkey, mkey]);
        let train_digest = digest_of(&("train", split_digest, &model_cfg.choice, model_seed));
        let model: TrainedModel<f64> = self.stage(
            &mut out.records,
            Stage::Train,
            &scope,
            std::slice::from_ref(&model_path),
            &train_digest,
            || Ok(TrainedModel::from_json(&std::fs::read_to_string(&model_path)?)?.0),
            |stamp| {
                let mut meta = serde_json::Map::new();
                meta.insert("stamp".into(), serde_json::to_value(stamp)?);
                let spec: ModelSpec = match &model_cfg.choice {
                    ModelChoice::Tree(p) => ModelSpec::Tree(*p),
                    ModelChoice::Forest(p) => ModelSpec::Forest(*p),
                    ModelChoice::GridSearch(lattice) => {
                        let grid = lattice.expand();
                        let r = grid_search(train, &grid, lattice.folds, seed::derive(model_seed, &[0]))?;
                        meta.insert("grid_search".into(), serde_json::to_value(&r)?);
                        r.best
                    }
                };
                let model = fit_model(train, &spec, seed::derive(model_seed, &[1]))?;
                meta.insert("spec".into(), serde_json::to_value(spec)?);
                meta.insert("train_accuracy".into(), accuracy(&model, train).into());
                meta.insert("test_accuracy".into(), accuracy(&model, test).into());
                artifact::write_atomic(&model_path, (model.to_json(meta)? + "\n").as_bytes())?;
                Ok((model, Vec::new()))
            },
        )?;
        if self.opts.until < Stage::Explain {
            return Ok(());
        }

        let ex = &cfg.explainers;
        let bg_seed = seed::derive(cfg.seed, &[3, dkey, mkey]);
        let background = match ex.background {
            BackgroundKind::Sample => Background::sample(train.features(), ex.background_size, bg_seed)?,
            BackgroundKind::Kmeans => Background::kmeans(train.features(), ex.background_size, bg_seed, 100)?,
        };
        let stats = FeatureStats::from_dataset(train);
        let n_explain = ex.max_instances.map_or(test.len(), |k| k.min(test.len()));
        let ids: Vec<usize> = (0..n_explain).collect();
        let points = test.features().select_rows(&ids);
        let explain_seed = seed::derive(cfg.seed, &[4, dkey, mkey]);

        let mut batches: Vec<(Method, Vec<Attribution<f64>>)> = Vec::new();
        let mut explain_digests = Vec::new();
        let mut first_error = None;
        for &method in &ex.methods {
            let method_scope = Scope { dataset: name, model: Some(&label), method: Some(method.name()) };
            let path = dir.join("attributions").join(format!("{stem}__{}.csv", method.name()));
            let mcfg = ex.for_method(method, explain_seed)?;
            let digest =
                digest_of(&("explain", &train_digest, method, &mcfg, ex.background, ex.background_size, n_explain));
            let result = self.stage(
                &mut out.records,
                Stage::Explain,
                &method_scope,
                std::slice::from_ref(&path),
                &digest,
                || artifact::read_attributions(&path),
                |stamp| {
                    let ctx = ExplainContext { background: &background, stats: &stats, training: train.features(), config: &mcfg };
                    let batch = explain_batch(method, &model, &points, &ids, &ctx)?;
                    if batch.attributions.is_empty() && !ids.is_empty() {
                        bail!("every instance failed, first: {}", batch.failures[0].message);
                    }
                    let notes = batch
                        .failures
                        .iter()
                        .map(|f| format!("instance {} not explained: {}", f.instance_id, f.message))
                        .collect();
                    let body = artifact::render_attributions(&batch.attributions, train.feature_names())?;
                    artifact::write_csv_text(&path, stamp, &body)?;
                    Ok((batch.attributions, notes))
                },
            );
            match result {
                Ok(a) => {
                    batches.push((method, a));
                    explain_digests.push(digest);
                    out.expected_cells.push((name.to_string(), label.clone(), method));
                }
                Err(e) => {
                    first_error.get_or_insert(e);
                }
            }
        }
        if self.opts.until < Stage::Evaluate || batches.is_empty() {
            return first_error.map_or(Ok(()), Err);
        }

        let metrics_path = dir.join("metrics").join(format!("{stem}.json"));
        let gt = match source {
            Source::Synthetic { ground_truth, .. } => Some(ground_truth.clone()),
            Source::Real { .. } => None,
        };
        let eval_digest = digest_of(&("evaluate", &explain_digests, &cfg.metrics.params, &gt));
        let cell: CellOutput = self.stage(
            &mut out.records,
            Stage::Evaluate,
            &scope,
            std::slice::from_ref(&metrics_path),
            &eval_digest,
            || artifact::read_json(&metrics_path),
            |stamp| {
                let means = background.means();
                let input = CellInput {
                    dataset: name,
                    model_name: &label,
                    model: &model,
                    feature_names: train.feature_names(),
                    points: &points,
                    instance_ids: &ids,
                    attributions: &batches,
                    means: &means,
                    stats: &stats,
                    ground_truth: gt.as_deref(),
                };
                let cell = evaluate_cell(&input, &cfg.metrics.params)?;
                artifact::write_json(&metrics_path, stamp, &cell)?;
                let notes = cell.notes.clone();
                Ok((cell, notes))
            },
        )?;
        out.cells.push((eval_digest, cell));
        first_error.map_or(Ok(()), Err)
    }

    fn write_grid_manifest(&self, sources: &[Source], records: &mut Vec<StageRecord>) -> Result<()> {
        let specs: Vec<SyntheticSpec> = sources
            .iter()
            .filter_map(|s| match s {
                Source::Synthetic { spec, .. } => Some(*spec),
                Source::Real { .. } => None,
            })
            .collect();
        if specs.is_empty() {
            return Ok(());
        }
        let path = self.opts.out_dir.join("datasets").join("grid_manifest.json");
        let manifest = GridManifest::new(&specs);
        let digest = digest_of(&("grid", ARTIFACT_FORMAT, &manifest));
        let scope = Scope { dataset: "grid", model: None, method: None };
        self.stage(records, Stage::Generate, &scope, std::slice::from_ref(&path), &digest, || Ok(()), |stamp| {
            artifact::write_json(&path, stamp, &manifest)?;
            Ok(((), Vec::new()))
        })
    }

    fn report(
        &self,
        sources: &[Source],
        outcomes: &[DatasetOutcome],
        records: &mut Vec<StageRecord>,
    ) -> Result<()> {
        let mut bundle = ReportBundle::default();
        let mut digests = Vec::new();
        for s in sources {
            bundle.groups.insert(s.name(), s.group());
        }
        for o in outcomes {
            for (digest, cell) in &o.cells {
                digests.push(digest.clone());
                let mut filtered = MetricReport::new();
                for (k, v) in cell.report.iter() {
                    if self.cfg.metrics.include.is_empty() || self.cfg.metrics.include.contains(&k.metric) {
                        filtered.insert(k.clone(), v)?;
                    }
                }
                bundle.report.merge(filtered)?;
                bundle.shares.extend(cell.shares.iter().cloned());
                bundle.pairwise.extend(cell.pairwise.iter().cloned());
            }
        }
        let dir = &self.opts.out_dir;
        let mut paths = vec![dir.join("report.csv"), dir.join("report.json")];
        for l in &self.opts.layouts {
            paths.extend(layout_paths(&bundle, *l, dir));
        }
        let digest = digest_of(&("report", ARTIFACT_FORMAT, &digests, &self.cfg.metrics.include, &self.opts.layouts));
        let scope = Scope { dataset: "all", model: None, method: None };
        let layouts = self.opts.layouts.clone();
        let missing: Vec<String> = outcomes
            .iter()
            .flat_map(|o| o.expected_cells.iter())
            .filter(|(d, m, method)| !bundle.report.iter().any(|(k, _)| &k.dataset == d && &k.model == m && k.method == method.name()))
            .map(|(d, m, method)| format!("{d}/{m}/{method}"))
            .collect();
        self.stage(records, Stage::Report, &scope, &paths, &digest, || Ok(()), |stamp| {
            write_report(&bundle, dir, stamp)?;
            for l in &layouts {
                emit_report(&bundle, *l, dir, stamp)?;
            }
            Ok(((), Vec::new()))
        })?;
        if !missing.is_empty() {
            bail!("report lacks rows for {}", missing.join(", "));
        }
        Ok(())
    }
}

/// Runs the configured pipeline up to `opts.until`. Stage failures are
/// recorded in the returned manifest (also written to `manifest.json`);
/// `Err` is reserved for failures outside any stage.
pub fn run(cfg: &ExperimentConfig, opts: &RunOptions) -> Result<RunManifest> {
    cfg.validate()?;
    if opts.jobs == 0 {
        bail!("--jobs must be at least 1");
    }
    std::fs::create_dir_all(&opts.out_dir).with_context(|| format!("creating {}", opts.out_dir.display()))?;
    let pool = rayon::ThreadPoolBuilder::new().num_threads(opts.jobs).build()?;
    let runner = Runner { cfg, opts, config_digest: config_digest(cfg) };
    let sources = sources(cfg)?;

    let mut records = Vec::new();
    runner.write_grid_manifest(&sources, &mut records).ok();
    let outcomes: Vec<DatasetOutcome> = pool.install(|| sources.par_iter().map(|s| runner.run_dataset(s)).collect());
    for o in &outcomes {
        records.extend(o.records.iter().cloned());
    }
    if opts.until >= Stage::Report {
        if let Err(e) = pool.install(|| runner.report(&sources, &outcomes, &mut records)) {
            if records.last().is_none_or(|r| r.stage != Stage::Report || r.error.is_none()) {
                records.push(StageRecord {
                    stage: Stage::Report,
                    dataset: None,
                    model: None,
                    method: None,
                    artifacts: Vec::new(),
                    stage_digest: String::new(),
                    cached: false,
                    seconds: 0.0,
                    notes: Vec::new(),
                    error: Some(format!("Report stage failed: {e:#}")),
                });
            }
        }
    }
    let manifest = RunManifest {
        framework_version: FRAMEWORK_VERSION.to_string(),
        config_digest: runner.config_digest.clone(),
        seed: cfg.seed,
        until: opts.until,
        stages: records,
    };
    let text = serde_json::to_string_pretty(&manifest)? + "\n";
    artifact::write_atomic(&opts.out_dir.join("manifest.json"), text.as_bytes())?;
    Ok(manifest)
}

/// Per-dataset test accuracy of every trained model, read back from the
/// model artifacts of a finished run.
pub fn model_accuracies(out_dir: &Path, manifest: &RunManifest) -> Result<BTreeMap<(String, String), f64>> {
    let mut acc = BTreeMap::new();
    for r in manifest.stages.iter().filter(|r| r.stage == Stage::Train && r.error.is_none()) {
        let text = std::fs::read_to_string(out_dir.join(&r.artifacts[0]))?;
        let (_, meta) = TrainedModel::<f64>::from_json(&text)?;
        let a = meta.get("test_accuracy").and_then(|v| v.as_f64()).ok_or_else(|| anyhow!("no test accuracy"))?;
        acc.insert((r.dataset.clone().unwrap_or_default(), r.model.clone().unwrap_or_default()), a);
    }
    Ok(acc)
}
