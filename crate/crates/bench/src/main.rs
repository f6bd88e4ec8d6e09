use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand};
use xaibench::pipeline::{run, RunManifest, RunOptions, Stage};
use xaibench::{ExperimentConfig, Layout};
use xaibench_core::explainers::{oracle, Method};

/// Default output root when neither --out nor `output_dir` is given.
const OUT_ENV: &str = "XAIBENCH_OUT";

#[derive(Parser)]
#[command(name = "xaibench", version, about = "Benchmark local attribution methods on tree models")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Write the configured datasets (and the grid manifest).
    Generate(PipelineArgs),
    /// Generate, split and fit the models.
    Train(PipelineArgs),
    /// Everything up to the attribution files.
    Explain(PipelineArgs),
    /// Everything up to the per-cell metric files.
    Evaluate(PipelineArgs),
    /// Emit report files, computing whatever is missing.
    Report {
        #[command(flatten)]
        args: PipelineArgs,
        /// Layouts to emit: table4-9, figure-boxplot, figure-heatmap (all by default).
        #[arg(long = "layout")]
        layouts: Vec<String>,
    },
    /// The full pipeline.
    Run(PipelineArgs),
    /// Compare Tree SHAP and Kernel SHAP with exact Shapley values on random trees.
    ValidateOracle {
        #[arg(long, default_value_t = 200)]
        cases: usize,
        #[arg(long, default_value_t = 8)]
        instances: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 1)]
        jobs: usize,
    },
}

#[derive(Args)]
struct PipelineArgs {
    #[arg(long)]
    config: PathBuf,
    /// Overrides the config seed.
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, default_value_t = 1)]
    jobs: usize,
    /// Restrict to these datasets (repeatable).
    #[arg(long = "dataset")]
    datasets: Vec<String>,
    /// Restrict to these explainers (repeatable).
    #[arg(long = "method")]
    methods: Vec<String>,
}

fn output_dir(args: &PipelineArgs, cfg: &ExperimentConfig) -> PathBuf {
    if let Some(o) = &args.out {
        return o.clone();
    }
    if let Some(o) = &cfg.output_dir {
        return cfg.resolve(o);
    }
    let root = std::env::var_os(OUT_ENV).map_or_else(|| PathBuf::from("xaibench-out"), PathBuf::from);
    let stem = args.config.file_stem().map_or_else(|| "run".into(), |s| s.to_string_lossy().into_owned());
    root.join(stem)
}

fn pipeline(args: &PipelineArgs, until: Stage, layouts: &[String]) -> Result<bool> {
    let mut cfg = ExperimentConfig::load(&args.config)?;
    if let Some(s) = args.seed {
        cfg.seed = s;
    }
    let methods = args.methods.iter().map(|m| m.parse::<Method>()).collect::<Result<Vec<_>, _>>()?;
    cfg.restrict(&args.datasets, &methods);
    cfg.validate().context("nothing left to run after --dataset/--method filtering")?;
    let mut opts = RunOptions::new(output_dir(args, &cfg));
    opts.until = until;
    opts.jobs = args.jobs;
    if !layouts.is_empty() {
        opts.layouts = layouts.iter().map(|l| l.parse::<Layout>()).collect::<Result<_>>()?;
    }
    let manifest = run(&cfg, &opts)?;
    summarize(&manifest, &opts.out_dir);
    Ok(manifest.is_success())
}

fn summarize(m: &RunManifest, out: &Path) {
    let reused = m.stages.iter().filter(|s| s.cached).count();
    println!("{} stages ({reused} reused) in {}", m.stages.len(), out.display());
    for s in &m.stages {
        for n in &s.notes {
            log::warn!("{}: {n}", s.dataset.as_deref().unwrap_or("-"));
        }
    }
    for f in m.failures() {
        let scope: Vec<&str> = [&f.dataset, &f.model, &f.method].into_iter().filter_map(|x| x.as_deref()).collect();
        eprintln!("error: [{}] {}", scope.join("/"), f.error.as_deref().unwrap_or_default());
    }
}

fn validate_oracle(cases: usize, instances: usize, seed: u64, jobs: usize) -> Result<bool> {
    let pool = rayon::ThreadPoolBuilder::new().num_threads(jobs.max(1)).build()?;
    let r = pool.install(|| oracle::sweep(cases, instances, seed))?;
    println!(
        "tree_shap: {} of {} instances outside {:e} (max error {:.3e})",
        r.tree_shap_violations,
        r.instances,
        oracle::TREE_SHAP_TOLERANCE,
        r.max_tree_shap_error
    );
    println!(
        "kernel_shap: {} of {} instances outside {:e} (max error {:.3e})",
        r.kernel_shap_violations,
        r.instances,
        oracle::KERNEL_SHAP_TOLERANCE,
        r.max_kernel_shap_error
    );
    println!("{}", if r.passed() { "PASS" } else { "FAIL" });
    Ok(r.passed())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Generate(a) => pipeline(a, Stage::Generate, &[]),
        Command::Train(a) => pipeline(a, Stage::Train, &[]),
        Command::Explain(a) => pipeline(a, Stage::Explain, &[]),
        Command::Evaluate(a) => pipeline(a, Stage::Evaluate, &[]),
        Command::Report { args, layouts } => pipeline(args, Stage::Report, layouts),
        Command::Run(a) => pipeline(a, Stage::Report, &[]),
        Command::ValidateOracle { cases, instances, seed, jobs } => validate_oracle(*cases, *instances, *seed, *jobs),
    };
    match result {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::FAILURE,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
