//! Streaming mean imputation and confidence weights for incomplete views.
//!
//! Each view keeps a running sum of observed feature columns and a count of
//! observed instances; these persist across the whole stream. A missing
//! instance is filled with the running mean at the moment it arrives, and its
//! confidence weight is the fraction of the stream observed in that view so
//! far. Observed instances always carry weight 1.

use ndarray::{Array1, Array2};
use serde::{Deserialize, Serialize};

use crate::dataset::MultiViewChunk;
use crate::error::{Error, Result};

/// Per-instance diagonal confidence weights for one view of one chunk.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightMatrix {
    /// Diagonal entries, each in `(0, 1]`.
    pub diag: Array1<f64>,
}

impl WeightMatrix {
    /// Elementwise square of the diagonal, the form every weighted Gram or
    /// Frobenius term actually consumes.
    pub fn squared(&self) -> Array1<f64> {
        &self.diag * &self.diag
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct ViewAccumulator {
    running_sum: Vec<f64>,
    observed_count: usize,
}

/// Cross-chunk imputation state: per-view running sums and counts plus the
/// global number of instances streamed so far.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ImputeState {
    views: Vec<ViewAccumulator>,
    total_seen: usize,
}

impl ImputeState {
    pub fn new(dims: &[usize]) -> Self {
        ImputeState {
            views: dims
                .iter()
                .map(|&d| ViewAccumulator {
                    running_sum: vec![0.0; d],
                    observed_count: 0,
                })
                .collect(),
            total_seen: 0,
        }
    }

    pub fn n_views(&self) -> usize {
        self.views.len()
    }

    /// Instances streamed so far, observed or not.
    pub fn total_seen(&self) -> usize {
        self.total_seen
    }

    /// Observed instances streamed so far in one view.
    pub fn observed_count(&self, view: usize) -> usize {
        self.views[view].observed_count
    }

    /// Forgets everything, as if no chunk had been processed.
    pub fn reset(&mut self) {
        for acc in &mut self.views {
            acc.running_sum.iter_mut().for_each(|x| *x = 0.0);
            acc.observed_count = 0;
        }
        self.total_seen = 0;
    }
}

/// Fills missing columns with the running mean and returns per-view weights.
///
/// Fails with [`Error::ColdStartView`] if a missing instance arrives before
/// any observed one in its view, leaving the state untouched; use
/// [`impute_chunk_with_fallback`] to zero-fill such instances instead.
pub fn impute_chunk(
    state: &mut ImputeState,
    chunk: &MultiViewChunk,
) -> Result<(MultiViewChunk, Vec<WeightMatrix>)> {
    impute_inner(state, chunk, None)
}

/// Like [`impute_chunk`], but a cold-start instance is filled with zeros and
/// given the tiny weight `eps` instead of failing.
pub fn impute_chunk_with_fallback(
    state: &mut ImputeState,
    chunk: &MultiViewChunk,
    eps: f64,
) -> Result<(MultiViewChunk, Vec<WeightMatrix>)> {
    impute_inner(state, chunk, Some(eps))
}

fn impute_inner(
    state: &mut ImputeState,
    chunk: &MultiViewChunk,
    cold_start_eps: Option<f64>,
) -> Result<(MultiViewChunk, Vec<WeightMatrix>)> {
    if chunk.n_views() != state.n_views() {
        return Err(Error::DimensionMismatch(format!(
            "chunk has {} views, imputation state has {}",
            chunk.n_views(),
            state.n_views()
        )));
    }
    let n_t = chunk.n_instances();
    if n_t == 0 {
        return Err(Error::InvalidInput("empty chunk".into()));
    }

    // Work on a copy and commit only on success, so a cold-start error does
    // not leave the accumulators half advanced.
    let mut next = state.clone();
    let mut filled = chunk.clone();
    let mut weights = Vec::with_capacity(chunk.n_views());

    for (v, acc) in next.views.iter_mut().enumerate() {
        let m: &mut Array2<f64> = &mut filled.data[v];
        if m.nrows() != acc.running_sum.len() {
            return Err(Error::DimensionMismatch(format!(
                "view {v}: chunk rows {} vs state dim {}",
                m.nrows(),
                acc.running_sum.len()
            )));
        }
        let mut diag = Array1::zeros(n_t);
        for j in 0..n_t {
            // 1-based position of this instance in the whole stream.
            let pos = state.total_seen + j + 1;
            if chunk.mask[v][j] {
                for (r, s) in acc.running_sum.iter_mut().enumerate() {
                    *s += m[[r, j]];
                }
                acc.observed_count += 1;
                diag[j] = 1.0;
            } else if acc.observed_count > 0 {
                let scale = 1.0 / acc.observed_count as f64;
                for (r, s) in acc.running_sum.iter().enumerate() {
                    m[[r, j]] = s * scale;
                }
                diag[j] = acc.observed_count as f64 / pos as f64;
            } else if let Some(eps) = cold_start_eps {
                m.column_mut(j).fill(0.0);
                diag[j] = eps;
            } else {
                return Err(Error::ColdStartView { view: v });
            }
        }
        weights.push(WeightMatrix { diag });
    }
    next.total_seen += n_t;
    *state = next;
    Ok((filled, weights))
}
