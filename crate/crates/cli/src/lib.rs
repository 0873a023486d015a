//! Pipeline frontend: dataset in, masked chunked stream through the solver,
//! selected features out, clustering quality reported.
//!
//! Three commands are exposed both as library functions and through the
//! `i2mufs` binary: `run` (mask, chunkify, stream-solve, select, evaluate,
//! report), `bench` (incremental vs from-scratch speedup CSV) and `synth`
//! (planted-subspace dataset generator).

pub mod report;

use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, ensure, Context};
use i2mufs::dataset::MultiViewDataset;
use i2mufs::reference::{bench_rows_to_csv, run_speedup_benchmark};
use i2mufs::solver::{load_checkpoint, save_checkpoint};
use i2mufs::synth::{generate, SynthSpec};
use i2mufs::{
    ari, chunkify, f_measure, kmeans, load_dataset, mask_incomplete, nmi, rank_features,
    save_dataset, select_features, Hyperparams, KMeansParams, Partition, SolverState, Variant,
};
use ndarray::Array2;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use report::{
    mean_report, mean_report_path, seed_report_path, trace_csv_path, write_json, write_trace_csv,
    FeatureResult, SeedReport, REPORT_SCHEMA,
};

/// Environment variable capping how many seeds run in parallel.
pub const THREADS_ENV: &str = "IMUFS_THREADS";

/// Inclusive seed range parsed from `a..b` (or a single `a`).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SeedRange(pub Vec<u64>);

/// Parses `"3"` to `[3]` and `"1..5"` to `[1, 2, 3, 4, 5]`.
pub fn parse_seed_range(text: &str) -> Result<SeedRange, String> {
    let parse_one = |s: &str| {
        s.trim()
            .parse::<u64>()
            .map_err(|_| format!("invalid seed `{s}`"))
    };
    if let Some((lo, hi)) = text.split_once("..") {
        let lo = parse_one(lo)?;
        let hi = parse_one(hi)?;
        if lo > hi {
            return Err(format!("empty seed range `{text}`"));
        }
        Ok(SeedRange((lo..=hi).collect()))
    } else {
        Ok(SeedRange(vec![parse_one(text)?]))
    }
}

/// Parses the solver variant flag.
pub fn parse_variant(text: &str) -> Result<Variant, String> {
    match text {
        "i2mufs" => Ok(Variant::I2mufs),
        "c-i2mufs" => Ok(Variant::CI2mufs),
        other => Err(format!(
            "unknown variant `{other}` (expected `i2mufs` or `c-i2mufs`)"
        )),
    }
}

/// Hyperparameter flags shared by `run` and `bench`. A repeated flag gives
/// one value per view; a single value broadcasts to every view.
#[derive(Debug, Clone, clap::Args)]
pub struct HyperArgs {
    /// Cluster count / factor rank; defaults to the dataset's label count.
    #[arg(long)]
    pub k_clusters: Option<usize>,

    /// View-weight smoothness exponent; must exceed 1.
    #[arg(long, default_value_t = 3.0)]
    pub lambda: f64,

    /// Consensus trade-off per view.
    #[arg(long)]
    pub beta: Vec<f64>,

    /// Graph-smoothness trade-off per view.
    #[arg(long)]
    pub theta: Vec<f64>,

    /// Row-sparsity strength per view.
    #[arg(long)]
    pub eta: Vec<f64>,

    /// Orthogonality penalty per view.
    #[arg(long)]
    pub xi: Vec<f64>,

    /// Neighbors per node in the chunk similarity graph.
    #[arg(long, default_value_t = 5)]
    pub graph_k: usize,

    /// Inner-iteration cap per chunk.
    #[arg(long, default_value_t = 200)]
    pub max_iters: usize,

    /// Relative objective-change tolerance ending a chunk's inner loop.
    #[arg(long, default_value_t = 1e-5)]
    pub rel_tol: f64,

    /// Solver variant: `i2mufs` adapts view weights and discounts imputed
    /// instances in the reconstruction; `c-i2mufs` keeps uniform weights and
    /// only masks imputed instances out.
    #[arg(long, value_parser = parse_variant, default_value = "i2mufs")]
    pub variant: Variant,
}

impl HyperArgs {
    /// Resolves the cluster count, preferring the flag over dataset labels.
    pub fn resolve_k(&self, ds: &MultiViewDataset) -> anyhow::Result<usize> {
        if let Some(k) = self.k_clusters {
            return Ok(k);
        }
        let Some(labels) = &ds.labels else {
            bail!("--k-clusters is required when the dataset has no labels");
        };
        let mut distinct: Vec<usize> = labels.clone();
        distinct.sort_unstable();
        distinct.dedup();
        Ok(distinct.len())
    }

    /// Builds validated solver hyperparameters for `n_views` views.
    pub fn build(&self, k: usize, n_views: usize) -> anyhow::Result<Hyperparams> {
        let mut hp = Hyperparams::new(k, n_views)
            .with_lambda(self.lambda)
            .with_variant(self.variant)
            .with_graph_k(self.graph_k)
            .with_max_iters(self.max_iters)
            .with_rel_tol(self.rel_tol);
        set_per_view(&mut hp.beta, &self.beta, "--beta", n_views)?;
        set_per_view(&mut hp.theta, &self.theta, "--theta", n_views)?;
        set_per_view(&mut hp.eta, &self.eta, "--eta", n_views)?;
        set_per_view(&mut hp.xi, &self.xi, "--xi", n_views)?;
        hp.validate(n_views)?;
        Ok(hp)
    }
}

fn set_per_view(
    target: &mut [f64],
    given: &[f64],
    flag: &str,
    n_views: usize,
) -> anyhow::Result<()> {
    match given.len() {
        0 => Ok(()),
        1 => {
            target.iter_mut().for_each(|x| *x = given[0]);
            Ok(())
        }
        n if n == n_views => {
            target.copy_from_slice(given);
            Ok(())
        }
        n => bail!("{flag} given {n} times; expected 1 or {n_views} (one per view)"),
    }
}

/// Configuration of the full feature-selection pipeline.
#[derive(Debug, Clone, clap::Args)]
pub struct RunConfig {
    /// Dataset manifest to load.
    #[arg(long)]
    pub manifest: PathBuf,

    /// Fraction of instances made view-incomplete before streaming.
    #[arg(long, default_value_t = 0.0)]
    pub ratio_incomplete: f64,

    /// Number of chunks the stream is cut into.
    #[arg(long, default_value_t = 1)]
    pub chunks: usize,

    /// Fraction of each view's features to keep; repeat for several settings.
    #[arg(long = "ratio-features", default_values_t = [0.5])]
    pub ratio_features: Vec<f64>,

    /// Seeds as `a..b` (inclusive) or a single value; one pipeline per seed.
    #[arg(long, value_parser = parse_seed_range, default_value = "1")]
    pub seeds: SeedRange,

    #[command(flatten)]
    pub hyper: HyperArgs,

    /// Directory receiving reports and traces.
    #[arg(long, default_value = "out")]
    pub out: PathBuf,

    /// Solver checkpoint file, saved after every chunk and resumed from when
    /// present. Requires a single seed.
    #[arg(long)]
    pub checkpoint: Option<PathBuf>,

    /// Stop after this many chunks have been folded in; resume later from
    /// the checkpoint.
    #[arg(long)]
    pub stop_after_chunks: Option<usize>,
}

/// Configuration of the incremental-vs-recompute speedup benchmark.
#[derive(Debug, Clone, clap::Args)]
pub struct BenchConfig {
    /// Dataset manifest to load.
    #[arg(long)]
    pub manifest: PathBuf,

    /// Chunks each inserted portion is split into.
    #[arg(long, default_value_t = 5)]
    pub chunks: usize,

    /// Seed driving shuffling and initialization.
    #[arg(long, default_value_t = 1)]
    pub seed: u64,

    #[command(flatten)]
    pub hyper: HyperArgs,

    /// Directory receiving the speedup CSV.
    #[arg(long, default_value = "out")]
    pub out: PathBuf,
}

/// Configuration of the planted-subspace dataset generator.
#[derive(Debug, Clone, clap::Args)]
pub struct SynthConfig {
    /// Instances to generate.
    #[arg(long, default_value_t = 300)]
    pub n: usize,

    /// Informative feature count per view; repeat for several views.
    #[arg(long = "dims", default_values_t = [20, 20])]
    pub dims: Vec<usize>,

    /// Noise feature count per view; a single value broadcasts.
    #[arg(long = "noise", default_values_t = [10])]
    pub noise: Vec<usize>,

    /// Planted cluster count.
    #[arg(long, default_value_t = 3)]
    pub k: usize,

    /// Generator seed.
    #[arg(long, default_value_t = 1)]
    pub seed: u64,

    /// Directory receiving the dataset files.
    #[arg(long, default_value = "out")]
    pub out: PathBuf,

    /// File-name stem of the dataset files.
    #[arg(long, default_value = "synth")]
    pub stem: String,
}

/// Ground-truth sidecar listing the informative feature rows per view.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PlantedSidecar {
    pub schema: u32,
    pub planted: Vec<Vec<usize>>,
}

/// State carried across checkpointed invocations alongside the solver state:
/// the per-chunk report fragments already produced.
#[derive(Debug, Clone, Serialize, Deserialize)]
struct RunSidecar {
    schema: u32,
    iterations: Vec<usize>,
    alpha_trajectory: Vec<Vec<f64>>,
    traces: Vec<Vec<f64>>,
}

fn sidecar_path(checkpoint: &Path) -> PathBuf {
    let mut name = checkpoint.as_os_str().to_owned();
    name.push(".run.json");
    PathBuf::from(name)
}

/// One seed's in-memory outcome before any file is written.
pub struct SeedRun {
    pub report: SeedReport,
    pub traces: Vec<Vec<f64>>,
}

/// Runs the pipeline for every seed and writes reports plus trace CSVs.
/// Returns the paths written.
pub fn cmd_run(cfg: &RunConfig) -> anyhow::Result<Vec<PathBuf>> {
    ensure!(!cfg.seeds.0.is_empty(), "at least one seed is required");
    ensure!(
        !cfg.ratio_features.is_empty(),
        "at least one --ratio-features value is required"
    );
    if cfg.checkpoint.is_some() {
        ensure!(
            cfg.seeds.0.len() == 1,
            "--checkpoint supports exactly one seed"
        );
    }

    let ds = load_dataset(&cfg.manifest)?;
    let k = cfg.hyper.resolve_k(&ds)?;
    let hp = cfg.hyper.build(k, ds.n_views())?;

    let threads = std::env::var(THREADS_ENV)
        .ok()
        .and_then(|s| s.parse::<usize>().ok())
        .unwrap_or(0);
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .context("building worker pool")?;

    let runs: Vec<anyhow::Result<SeedRun>> = pool.install(|| {
        cfg.seeds
            .0
            .par_iter()
            .map(|&seed| run_seed(&ds, cfg, &hp, k, seed))
            .collect()
    });
    let runs: Vec<SeedRun> = runs.into_iter().collect::<anyhow::Result<_>>()?;

    fs::create_dir_all(&cfg.out)
        .with_context(|| format!("creating output directory {}", cfg.out.display()))?;
    let mut written = Vec::new();
    for run in &runs {
        let path = seed_report_path(&cfg.out, run.report.seed);
        write_json(&path, &run.report)?;
        written.push(path);
        for (t, trace) in run.traces.iter().enumerate() {
            let path = trace_csv_path(&cfg.out, run.report.seed, t + 1);
            write_trace_csv(&path, trace)?;
            written.push(path);
        }
    }
    let reports: Vec<SeedReport> = runs.iter().map(|r| r.report.clone()).collect();
    let path = mean_report_path(&cfg.out);
    write_json(&path, &mean_report(&reports))?;
    written.push(path);
    Ok(written)
}

/// Runs one seed's pipeline: mask, chunkify, stream the solver (optionally
/// resuming from and saving to a checkpoint), rank features, then cluster
/// the selected rows of the complete data against the labels.
pub fn run_seed(
    complete: &MultiViewDataset,
    cfg: &RunConfig,
    hp: &Hyperparams,
    k: usize,
    seed: u64,
) -> anyhow::Result<SeedRun> {
    let masked = if cfg.ratio_incomplete > 0.0 {
        mask_incomplete(complete, cfg.ratio_incomplete, seed)?
    } else {
        complete.clone()
    };
    let chunks = chunkify(&masked, cfg.chunks, seed)?;

    let fresh = || -> anyhow::Result<_> {
        let state = SolverState::init(masked.views.clone(), hp, seed)?;
        Ok((state, Vec::new(), Vec::new(), Vec::new()))
    };
    let (mut state, mut iterations, mut alphas, mut traces) = match &cfg.checkpoint {
        Some(ck) if ck.exists() => {
            let state = load_checkpoint(ck)?;
            ensure!(
                state.init_seed() == seed,
                "checkpoint {} was produced with seed {}, not {seed}",
                ck.display(),
                state.init_seed()
            );
            ensure!(
                state.chunks_seen <= chunks.len(),
                "checkpoint {} has already processed {} chunks of a {}-chunk stream",
                ck.display(),
                state.chunks_seen,
                chunks.len()
            );
            let sidecar: RunSidecar = serde_json::from_slice(
                &fs::read(sidecar_path(ck))
                    .with_context(|| format!("reading {}", sidecar_path(ck).display()))?,
            )?;
            ensure!(
                sidecar.schema == REPORT_SCHEMA && sidecar.iterations.len() == state.chunks_seen,
                "checkpoint sidecar does not match the solver checkpoint"
            );
            (
                state,
                sidecar.iterations,
                sidecar.alpha_trajectory,
                sidecar.traces,
            )
        }
        _ => fresh()?,
    };

    for chunk in chunks.iter().skip(state.chunks_seen) {
        if let Some(stop) = cfg.stop_after_chunks {
            if state.chunks_seen >= stop {
                break;
            }
        }
        let report = state.process_chunk(chunk, hp)?;
        iterations.push(report.iterations);
        alphas.push(report.alpha);
        traces.push(report.objective_trace);
        if let Some(ck) = &cfg.checkpoint {
            save_checkpoint(&state, ck)?;
            let sidecar = RunSidecar {
                schema: REPORT_SCHEMA,
                iterations: iterations.clone(),
                alpha_trajectory: alphas.clone(),
                traces: traces.clone(),
            };
            write_json(&sidecar_path(ck), &sidecar)?;
        }
    }

    let ranking = rank_features(&state);
    let mut results = Vec::new();
    for &ratio in &cfg.ratio_features {
        let selected = select_features(&ranking, ratio)?;
        let quality = evaluate_selection(complete, k, &selected, seed)?;
        let (nmi, ari, f_measure) = match quality {
            Some((n, a, f)) => (Some(n), Some(a), Some(f)),
            None => (None, None, None),
        };
        results.push(FeatureResult {
            feature_ratio: ratio,
            nmi,
            ari,
            f_measure,
            selected_indices: selected,
        });
    }

    Ok(SeedRun {
        report: SeedReport {
            schema: REPORT_SCHEMA,
            variant: hp.variant,
            seed,
            n_chunks: cfg.chunks,
            results,
            iterations,
            alpha_trajectory: alphas,
        },
        traces,
    })
}

/// Clusters the selected feature rows (stacked across views, taken from the
/// complete pre-mask data) and scores the partition against the labels.
/// Returns `None` when the dataset has no labels.
pub fn evaluate_selection(
    complete: &MultiViewDataset,
    k: usize,
    selected: &[Vec<usize>],
    seed: u64,
) -> anyhow::Result<Option<(f64, f64, f64)>> {
    let Some(labels) = &complete.labels else {
        return Ok(None);
    };
    let truth = Partition::from_labels(labels)?;
    let n = complete.n_instances();
    let total: usize = selected.iter().map(|s| s.len()).sum();
    ensure!(total > 0, "feature selection kept no features");

    let mut stacked = Array2::zeros((total, n));
    let mut row = 0;
    for (v, features) in selected.iter().enumerate() {
        for &f in features {
            stacked.row_mut(row).assign(&complete.data[v].row(f));
            row += 1;
        }
    }
    let clustered = kmeans(&stacked, &KMeansParams::new(k).with_seed(seed))?;
    Ok(Some((
        nmi(&clustered.partition, &truth)?,
        ari(&clustered.partition, &truth)?,
        f_measure(&clustered.partition, &truth)?,
    )))
}

/// Runs the speedup benchmark and writes `speedup.csv`. Returns its path.
pub fn cmd_bench(cfg: &BenchConfig) -> anyhow::Result<PathBuf> {
    let ds = load_dataset(&cfg.manifest)?;
    let k = cfg.hyper.resolve_k(&ds)?;
    let hp = cfg.hyper.build(k, ds.n_views())?;
    let rows = run_speedup_benchmark(&ds, &hp, cfg.chunks, cfg.seed)?;
    fs::create_dir_all(&cfg.out)
        .with_context(|| format!("creating output directory {}", cfg.out.display()))?;
    let path = cfg.out.join("speedup.csv");
    fs::write(&path, bench_rows_to_csv(&rows))
        .with_context(|| format!("writing {}", path.display()))?;
    Ok(path)
}

/// Generates a planted-subspace dataset, writes it with its manifest and a
/// planted-indices sidecar. Returns the manifest path.
pub fn cmd_synth(cfg: &SynthConfig) -> anyhow::Result<PathBuf> {
    ensure!(
        !cfg.dims.is_empty(),
        "at least one --dims value is required"
    );
    let noise = match cfg.noise.len() {
        0 => vec![0; cfg.dims.len()],
        1 => vec![cfg.noise[0]; cfg.dims.len()],
        n if n == cfg.dims.len() => cfg.noise.clone(),
        n => bail!(
            "--noise given {n} times; expected 1 or {} (one per view)",
            cfg.dims.len()
        ),
    };
    let out = generate(&SynthSpec {
        n: cfg.n,
        informative: cfg.dims.clone(),
        noise,
        k: cfg.k,
        seed: cfg.seed,
    })?;
    fs::create_dir_all(&cfg.out)
        .with_context(|| format!("creating output directory {}", cfg.out.display()))?;
    let manifest = save_dataset(&out.dataset, &cfg.out, &cfg.stem)?;
    let sidecar = PlantedSidecar {
        schema: REPORT_SCHEMA,
        planted: out.planted,
    };
    write_json(
        &cfg.out.join(format!("{}_planted.json", cfg.stem)),
        &sidecar,
    )?;
    Ok(manifest)
}
