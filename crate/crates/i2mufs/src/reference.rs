//! Batch baselines used to cross-check the incremental solver.
//!
//! The routines here recompute, by direct summation over explicitly stored
//! per-chunk matrices, the quantities the solver maintains incrementally.
//! They are deliberately written against full diagonal matrices rather than
//! the solver's column/row scaling shortcuts, so the two code paths share no
//! arithmetic. A wall-clock benchmark compares the incremental solver with
//! processing every growing prefix from scratch.

use std::time::{Duration, Instant};

use ndarray::{Array1, Array2};

use crate::dataset::{chunkify, MultiViewChunk, MultiViewDataset, ViewSpec};
use crate::error::{Error, Result};
use crate::solver::{Hyperparams, SolverState};

/// Converged per-chunk quantities kept around for batch recomputation.
#[derive(Debug, Clone)]
pub struct TraceChunk {
    /// Imputed data per view.
    pub filled: Vec<Array2<f64>>,
    /// Converged indicator factor per view.
    pub u: Vec<Array2<f64>>,
    /// Squared reconstruction diagonal per view.
    pub recon_w2: Vec<Array1<f64>>,
    /// Feature factor per view at the moment this chunk was folded.
    pub v_snapshot: Vec<Array2<f64>>,
}

/// Everything needed to replay a stream's folds exactly.
#[derive(Debug, Clone, Default)]
pub struct BatchTrace {
    pub chunks: Vec<TraceChunk>,
}

impl BatchTrace {
    pub fn len(&self) -> usize {
        self.chunks.len()
    }

    pub fn is_empty(&self) -> bool {
        self.chunks.is_empty()
    }

    /// Records one processed chunk from the solver's workspace plus the
    /// post-fold feature factors.
    pub fn record(&mut self, ws: &crate::solver::ChunkWorkspace, v_snapshot: Vec<Array2<f64>>) {
        self.chunks.push(TraceChunk {
            filled: ws.filled.data.clone(),
            u: ws.u.clone(),
            recon_w2: ws.recon_w2.clone(),
            v_snapshot,
        });
    }
}

/// Per-view Gram matrices, cross-products and scalar losses summed over a
/// whole stored stream.
pub type AccumulatorSums = (Vec<Array2<f64>>, Vec<Array2<f64>>, Vec<f64>);

/// Direct batch sums of the Gram, cross-product and loss accumulators over
/// all stored chunks, using explicit diagonal matrices throughout.
pub fn batch_accumulators(trace: &BatchTrace) -> Result<AccumulatorSums> {
    let first = trace
        .chunks
        .first()
        .ok_or_else(|| Error::InvalidInput("empty trace".into()))?;
    let n_views = first.u.len();
    let k = first.u[0].ncols();

    let mut r: Vec<Array2<f64>> = (0..n_views).map(|_| Array2::zeros((k, k))).collect();
    let mut q: Vec<Array2<f64>> = (0..n_views)
        .map(|v| Array2::zeros((first.filled[v].nrows(), k)))
        .collect();
    let mut loss = vec![0.0; n_views];

    for chunk in &trace.chunks {
        for v in 0..n_views {
            let w2 = Array2::from_diag(&chunk.recon_w2[v]);
            let u = &chunk.u[v];
            let x = &chunk.filled[v];
            r[v] += &u.t().dot(&w2).dot(u);
            q[v] += &x.dot(&w2).dot(u);
            let e = x - &chunk.v_snapshot[v].dot(&u.t());
            loss[v] += e.dot(&w2).dot(&e.t()).diag().sum();
        }
    }
    Ok((r, q, loss))
}

/// Runs the solver from scratch over every growing prefix of `chunks` and
/// returns the final state plus the total elapsed wall time. This is the
/// naive baseline an incremental method is measured against.
pub fn recompute_from_scratch(
    views: &[ViewSpec],
    chunks: &[MultiViewChunk],
    hp: &Hyperparams,
    seed: u64,
) -> Result<(SolverState, Duration)> {
    if chunks.is_empty() {
        return Err(Error::InvalidInput("no chunks to process".into()));
    }
    let start = Instant::now();
    let mut last: Option<SolverState> = None;
    for prefix in 1..=chunks.len() {
        let mut state = SolverState::init(views.to_vec(), hp, seed)?;
        for chunk in &chunks[..prefix] {
            state.process_chunk(chunk, hp)?;
        }
        last = Some(state);
    }
    Ok((last.expect("at least one prefix"), start.elapsed()))
}

/// Gap between the closed-form view weights and a dense grid search over the
/// two-view simplex: `objective(closed form) - min over grid` for
/// `sum_v alpha_v^lambda * loss_v`. Non-positive up to grid resolution.
pub fn grid_check_alpha(losses: &[f64], lambda: f64, grid_points: usize) -> Result<f64> {
    if losses.len() != 2 {
        return Err(Error::InvalidInput(format!(
            "grid check covers exactly two views, got {}",
            losses.len()
        )));
    }
    if grid_points < 2 {
        return Err(Error::InvalidParam("grid needs at least two points".into()));
    }
    let objective = |a0: f64| a0.powf(lambda) * losses[0] + (1.0 - a0).powf(lambda) * losses[1];

    let closed = crate::solver::updates::alpha_from_losses(losses, lambda, 1e-9);
    let closed_value = objective(closed[0]);

    let mut grid_best = f64::INFINITY;
    for i in 0..grid_points {
        let a0 = i as f64 / (grid_points - 1) as f64;
        let value = objective(a0);
        if value < grid_best {
            grid_best = value;
        }
    }
    Ok(closed_value - grid_best)
}

/// One row of the speedup benchmark output.
#[derive(Debug, Clone)]
pub struct BenchRow {
    pub workload: String,
    pub method: String,
    pub chunks: usize,
    pub elapsed_ms: f64,
    pub inc_s: f64,
}

/// Renders benchmark rows as CSV with a header.
pub fn bench_rows_to_csv(rows: &[BenchRow]) -> String {
    let mut out = String::from("workload,method,chunks,elapsed_ms,IncS\n");
    for row in rows {
        out.push_str(&format!(
            "{},{},{},{},{}\n",
            row.workload, row.method, row.chunks, row.elapsed_ms, row.inc_s
        ));
    }
    out
}

/// Insertion benchmark: half the dataset forms the base chunk; for each
/// insertion ratio, that share of the remaining instances arrives split into
/// `n_chunks` chunks. The incremental method processes the whole stream
/// once (base included); the baseline reprocesses the full prefix from
/// scratch at every arrival. `IncS` is baseline time over incremental time,
/// repeated on both rows of a ratio.
pub fn run_speedup_benchmark(
    ds: &MultiViewDataset,
    hp: &Hyperparams,
    n_chunks: usize,
    seed: u64,
) -> Result<Vec<BenchRow>> {
    ds.validate()?;
    let n = ds.n_instances();
    if n < 4 * n_chunks.max(1) {
        return Err(Error::InvalidInput(format!(
            "{n} instances are too few for an insertion benchmark with {n_chunks} chunks"
        )));
    }

    use rand::seq::SliceRandom;
    use rand::SeedableRng;
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut rand_chacha::ChaCha8Rng::seed_from_u64(seed));
    let half = n / 2;
    let base = ds.subset(&order[..half]);
    let pool = ds.subset(&order[half..]);

    let base_chunk = MultiViewChunk {
        chunk_index: 1,
        data: base.data.clone(),
        mask: base.mask.clone(),
        labels: base.labels.clone(),
    };

    let mut rows = Vec::new();
    for tenths in 1..=5usize {
        let ratio = tenths as f64 / 10.0;
        let added_n = (ratio * pool.n_instances() as f64).floor() as usize;
        if added_n < n_chunks {
            return Err(Error::InvalidInput(format!(
                "insertion ratio {ratio} yields only {added_n} instances for {n_chunks} chunks"
            )));
        }
        let added = pool.subset(&(0..added_n).collect::<Vec<_>>());
        let mut stream = vec![base_chunk.clone()];
        for mut chunk in chunkify(&added, n_chunks, seed ^ tenths as u64)? {
            chunk.chunk_index = stream.len() + 1;
            stream.push(chunk);
        }

        // Incremental: one pass over the entire stream.
        let tick = Instant::now();
        let mut state = SolverState::init(ds.views.clone(), hp, seed)?;
        for chunk in &stream {
            state.process_chunk(chunk, hp)?;
        }
        let t_inc = tick.elapsed();

        // Baseline: full recomputation at every arrival after the base.
        let mut t_naive = Duration::ZERO;
        for arrival in 1..stream.len() {
            let tick = Instant::now();
            let mut state = SolverState::init(ds.views.clone(), hp, seed)?;
            for chunk in &stream[..=arrival] {
                state.process_chunk(chunk, hp)?;
            }
            t_naive += tick.elapsed();
        }

        let inc_s = t_naive.as_secs_f64() / t_inc.as_secs_f64();
        let workload = format!("insert_{}pct", tenths * 10);
        rows.push(BenchRow {
            workload: workload.clone(),
            method: "incremental".into(),
            chunks: stream.len(),
            elapsed_ms: t_inc.as_secs_f64() * 1e3,
            inc_s,
        });
        rows.push(BenchRow {
            workload,
            method: "recompute".into(),
            chunks: stream.len(),
            elapsed_ms: t_naive.as_secs_f64() * 1e3,
            inc_s,
        });
    }
    Ok(rows)
}
