//! Streaming solver: per-chunk alternating optimization with cross-chunk
//! accumulators.
//!
//! For every arriving chunk the solver imputes missing columns, builds a
//! similarity graph, warm-starts a chunk indicator factor, and alternates
//! four updates until the chunk objective stalls: a multiplicative step on
//! each view's feature factor, a multiplicative step on each view's
//! indicator factor, the closed-form consensus indicator, and closed-form
//! view weights. Afterwards the chunk's weighted Gram and cross-product
//! terms are folded into per-view accumulators; the chunk itself is
//! discarded, which is what makes the scheme incremental.

mod checkpoint;
pub mod updates;

pub use checkpoint::{load_checkpoint, save_checkpoint, state_from_bytes, state_to_bytes};

use ndarray::{Array1, Array2};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::dataset::{MultiViewChunk, ViewSpec};
use crate::error::{Error, Result};
use crate::graph::{build_graph, Bandwidth, SimilarityGraph};
use crate::impute::{impute_chunk_with_fallback, ImputeState, WeightMatrix};
use crate::metrics::{kmeans, KMeansParams};
use updates::{
    alpha_from_losses, consensus_residual, consensus_step, graph_trace, l21_norm,
    orthogonality_gap, row_norms, split_signs, u_step, v_step, weighted_cross, weighted_gram,
    weighted_residual,
};

/// Which reconstruction weighting the solver runs with.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Variant {
    /// Confidence-weighted reconstruction with adaptive view weights.
    #[serde(rename = "I2MUFS")]
    I2mufs,
    /// Binary observed/missing weighting, uniform view weights throughout.
    #[serde(rename = "C_I2MUFS")]
    CI2mufs,
}

impl std::fmt::Display for Variant {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Variant::I2mufs => write!(f, "i2mufs"),
            Variant::CI2mufs => write!(f, "c-i2mufs"),
        }
    }
}

/// All solver knobs. The per-view trade-offs are stored as vectors indexed
/// by view; the broadcast setters fill every view with the same value.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Hyperparams {
    /// Number of latent factors / clusters.
    pub k: usize,
    /// Exponent of the view weights; must exceed 1.
    pub lambda: f64,
    /// Consensus trade-off per view.
    pub beta: Vec<f64>,
    /// Graph smoothness trade-off per view.
    pub theta: Vec<f64>,
    /// Row-sparsity trade-off per view.
    pub eta: Vec<f64>,
    /// Orthogonality penalty per view.
    pub xi: Vec<f64>,
    /// Denominator floor, cold-start weight and loss floor.
    pub eps: f64,
    pub max_iters: usize,
    pub rel_tol: f64,
    /// Neighbours per node, capped at chunk size minus one.
    pub graph_k: usize,
    pub variant: Variant,
}

impl Hyperparams {
    pub fn new(k: usize, n_views: usize) -> Self {
        Hyperparams {
            k,
            lambda: 3.0,
            beta: vec![0.1; n_views],
            theta: vec![0.1; n_views],
            eta: vec![0.1; n_views],
            xi: vec![1e3; n_views],
            eps: 1e-9,
            max_iters: 200,
            rel_tol: 1e-5,
            graph_k: 5,
            variant: Variant::I2mufs,
        }
    }

    pub fn with_lambda(mut self, lambda: f64) -> Self {
        self.lambda = lambda;
        self
    }

    pub fn with_beta(mut self, beta: f64) -> Self {
        self.beta.iter_mut().for_each(|x| *x = beta);
        self
    }

    pub fn with_theta(mut self, theta: f64) -> Self {
        self.theta.iter_mut().for_each(|x| *x = theta);
        self
    }

    pub fn with_eta(mut self, eta: f64) -> Self {
        self.eta.iter_mut().for_each(|x| *x = eta);
        self
    }

    pub fn with_xi(mut self, xi: f64) -> Self {
        self.xi.iter_mut().for_each(|x| *x = xi);
        self
    }

    pub fn with_variant(mut self, variant: Variant) -> Self {
        self.variant = variant;
        self
    }

    pub fn with_max_iters(mut self, max_iters: usize) -> Self {
        self.max_iters = max_iters;
        self
    }

    pub fn with_rel_tol(mut self, rel_tol: f64) -> Self {
        self.rel_tol = rel_tol;
        self
    }

    pub fn with_graph_k(mut self, graph_k: usize) -> Self {
        self.graph_k = graph_k;
        self
    }

    pub fn validate(&self, n_views: usize) -> Result<()> {
        if self.k < 2 {
            return Err(Error::InvalidParam(format!(
                "factor count {} must be at least 2",
                self.k
            )));
        }
        if self.lambda.is_nan() || self.lambda <= 1.0 {
            return Err(Error::InvalidParam(format!(
                "weight exponent {} must exceed 1",
                self.lambda
            )));
        }
        if self.lambda < 2.0 {
            log::warn!(
                "weight exponent {} below 2 makes view weights nearly one-hot",
                self.lambda
            );
        }
        for (name, values) in [
            ("beta", &self.beta),
            ("theta", &self.theta),
            ("eta", &self.eta),
            ("xi", &self.xi),
        ] {
            if values.len() != n_views {
                return Err(Error::DimensionMismatch(format!(
                    "{name} has {} entries for {n_views} views",
                    values.len()
                )));
            }
            if values.iter().any(|x| !x.is_finite() || *x < 0.0) {
                return Err(Error::InvalidParam(format!(
                    "{name} entries must be finite and non-negative"
                )));
            }
        }
        if self.xi.iter().any(|&x| x <= 0.0) {
            return Err(Error::InvalidParam(
                "orthogonality penalty must be positive".into(),
            ));
        }
        if self.eps.is_nan() || self.eps <= 0.0 {
            return Err(Error::InvalidParam("eps must be positive".into()));
        }
        if self.max_iters == 0 {
            return Err(Error::InvalidParam("max_iters must be positive".into()));
        }
        if self.rel_tol.is_nan() || self.rel_tol <= 0.0 {
            return Err(Error::InvalidParam("rel_tol must be positive".into()));
        }
        if self.graph_k == 0 {
            return Err(Error::InvalidParam("graph_k must be positive".into()));
        }
        Ok(())
    }
}

/// Everything the solver carries from one chunk to the next.
#[derive(Debug, Clone, PartialEq)]
pub struct SolverState {
    views: Vec<ViewSpec>,
    k: usize,
    init_seed: u64,
    /// Per-view feature factor, `d_v x K`.
    pub v: Vec<Array2<f64>>,
    /// Per-view folded Gram accumulator, `K x K`.
    pub r: Vec<Array2<f64>>,
    /// Per-view folded cross-product accumulator, `d_v x K`.
    pub q: Vec<Array2<f64>>,
    /// Per-view reconstruction loss accumulated at each fold.
    pub loss_acc: Vec<f64>,
    /// Simplex view weights.
    pub alpha: Vec<f64>,
    pub impute: ImputeState,
    pub chunks_seen: usize,
}

/// Transient per-chunk quantities, exposed so tests and reference baselines
/// can inspect the converged factors before they are discarded.
#[derive(Debug, Clone)]
pub struct ChunkWorkspace {
    /// The chunk after imputation; its mask still marks what was observed.
    pub filled: MultiViewChunk,
    /// Per-view indicator factor, `N_t x K`.
    pub u: Vec<Array2<f64>>,
    /// Consensus indicator, `N_t x K`.
    pub ustar: Array2<f64>,
    pub weights: Vec<WeightMatrix>,
    /// Squared diagonal actually used in the reconstruction term (squared
    /// confidence weights, or binary observedness for the binary variant).
    pub recon_w2: Vec<Array1<f64>>,
    pub graphs: Vec<SimilarityGraph>,
    pub objective_trace: Vec<f64>,
}

/// Summary of one processed chunk.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChunkReport {
    /// Chunk objective after each inner iteration.
    pub objective_trace: Vec<f64>,
    /// Inner iterations actually run.
    pub iterations: usize,
    /// View weights at convergence.
    pub alpha: Vec<f64>,
}

impl SolverState {
    /// Fresh state with small positive random feature factors, uniform view
    /// weights and zeroed accumulators.
    pub fn init(views: Vec<ViewSpec>, hp: &Hyperparams, seed: u64) -> Result<Self> {
        if views.is_empty() {
            return Err(Error::InvalidInput("no views".into()));
        }
        hp.validate(views.len())?;
        if let Some(min_dim) = views.iter().map(|v| v.dim).min() {
            if hp.k > min_dim {
                log::warn!(
                    "factor count {} exceeds the smallest view dimension {min_dim}",
                    hp.k
                );
            }
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let v = views
            .iter()
            .map(|spec| {
                Array2::from_shape_fn((spec.dim, hp.k), |_| (1.0 - rng.gen::<f64>()) * 1e-2)
            })
            .collect();
        let n_views = views.len();
        Ok(SolverState {
            k: hp.k,
            init_seed: seed,
            v,
            r: vec![Array2::zeros((hp.k, hp.k)); n_views],
            q: views
                .iter()
                .map(|spec| Array2::zeros((spec.dim, hp.k)))
                .collect(),
            loss_acc: vec![0.0; n_views],
            alpha: vec![1.0 / n_views as f64; n_views],
            impute: ImputeState::new(&views.iter().map(|v| v.dim).collect::<Vec<_>>()),
            chunks_seen: 0,
            views,
        })
    }

    pub fn views(&self) -> &[ViewSpec] {
        &self.views
    }

    pub fn n_views(&self) -> usize {
        self.views.len()
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn init_seed(&self) -> u64 {
        self.init_seed
    }

    /// Processes one chunk and folds its contribution into the accumulators.
    pub fn process_chunk(
        &mut self,
        chunk: &MultiViewChunk,
        hp: &Hyperparams,
    ) -> Result<ChunkReport> {
        self.process_chunk_full(chunk, hp).map(|(report, _)| report)
    }

    /// Like [`SolverState::process_chunk`], also returning the converged
    /// per-chunk factors for inspection.
    pub fn process_chunk_full(
        &mut self,
        chunk: &MultiViewChunk,
        hp: &Hyperparams,
    ) -> Result<(ChunkReport, ChunkWorkspace)> {
        hp.validate(self.n_views())?;
        if hp.k != self.k {
            return Err(Error::InvalidParam(format!(
                "factor count changed from {} to {}",
                self.k, hp.k
            )));
        }
        if chunk.n_views() != self.n_views() {
            return Err(Error::DimensionMismatch(format!(
                "chunk has {} views, solver has {}",
                chunk.n_views(),
                self.n_views()
            )));
        }
        for (spec, m) in self.views.iter().zip(&chunk.data) {
            if m.nrows() != spec.dim {
                return Err(Error::DimensionMismatch(format!(
                    "view {}: chunk rows {} vs dim {}",
                    spec.view_id,
                    m.nrows(),
                    spec.dim
                )));
            }
        }
        let n_t = chunk.n_instances();
        if n_t == 0 {
            return Err(Error::InvalidInput("empty chunk".into()));
        }

        let n_views = self.n_views();
        let chunk_number = self.chunks_seen + 1;
        let (filled, weights) = impute_chunk_with_fallback(&mut self.impute, chunk, hp.eps)?;

        let graphs: Vec<SimilarityGraph> = if n_t == 1 {
            vec![SimilarityGraph::trivial(1); n_views]
        } else {
            filled
                .data
                .iter()
                .map(|x| build_graph(x, hp.graph_k.min(n_t - 1), Bandwidth::Median))
                .collect::<Result<_>>()?
        };

        let cons_w2: Vec<Array1<f64>> = weights.iter().map(|w| w.squared()).collect();
        let recon_w2: Vec<Array1<f64>> = match hp.variant {
            Variant::I2mufs => cons_w2.clone(),
            Variant::CI2mufs => chunk
                .mask
                .iter()
                .map(|mv| mv.iter().map(|&m| if m { 1.0 } else { 0.0 }).collect())
                .collect(),
        };

        let mut u: Vec<Array2<f64>> = filled
            .data
            .iter()
            .enumerate()
            .map(|(v, x)| {
                init_indicator(
                    x,
                    hp.k,
                    mix_seed(self.init_seed, chunk_number as u64, v as u64),
                )
            })
            .collect::<Result<_>>()?;
        let mut ustar = consensus_step(&u, &cons_w2, &hp.beta)?;

        let sign_parts: Vec<(Array2<f64>, Array2<f64>)> = graphs
            .iter()
            .zip(&hp.theta)
            .map(|(g, &theta)| split_signs(&(theta * &g.laplacian)))
            .collect();

        let mut trace: Vec<f64> = Vec::new();
        let mut residuals = vec![0.0; n_views];
        let mut prev_data = f64::INFINITY;
        for iter in 0..hp.max_iters {
            for v in 0..n_views {
                let alpha_pow = match hp.variant {
                    Variant::I2mufs => self.alpha[v].powf(hp.lambda),
                    Variant::CI2mufs => 1.0,
                };
                let r_eff = &self.r[v] + &weighted_gram(&u[v], &recon_w2[v]);
                let q_eff = &self.q[v] + &weighted_cross(&filled.data[v], &recon_w2[v], &u[v]);
                v_step(&mut self.v[v], &r_eff, &q_eff, alpha_pow, hp.eta[v], hp.eps);
                u_step(
                    &mut u[v],
                    &filled.data[v],
                    &self.v[v],
                    &ustar,
                    &recon_w2[v],
                    &cons_w2[v],
                    &sign_parts[v].0,
                    &sign_parts[v].1,
                    alpha_pow,
                    hp.beta[v],
                    hp.xi[v],
                    hp.eps,
                );
            }
            ustar = consensus_step(&u, &cons_w2, &hp.beta)?;

            for v in 0..n_views {
                residuals[v] = weighted_residual(&filled.data[v], &self.v[v], &u[v], &recon_w2[v]);
            }
            if hp.variant == Variant::I2mufs {
                let totals: Vec<f64> = residuals
                    .iter()
                    .zip(&self.loss_acc)
                    .map(|(res, acc)| acc + res)
                    .collect();
                self.alpha = alpha_from_losses(&totals, hp.lambda, hp.eps);
            }

            let (data_terms, penalty) =
                self.chunk_objective_parts(&u, &ustar, &cons_w2, &graphs, hp, &residuals);
            let objective = data_terms + penalty;
            if !objective.is_finite() {
                return Err(Error::NonFinite {
                    context: format!("chunk {chunk_number} objective at iteration {iter}"),
                });
            }
            // The trace records the penalized value every block update
            // descends, so it is non-increasing; the stopping rule watches
            // the model terms alone, which settle long before the slowly
            // draining orthogonality penalty does.
            trace.push(objective);
            if iter >= 1
                && (prev_data - data_terms).abs() <= hp.rel_tol * prev_data.abs().max(hp.eps)
            {
                break;
            }
            prev_data = data_terms;
        }

        // Fold the converged chunk into the accumulators; from here on the
        // chunk's raw data is no longer needed.
        for v in 0..n_views {
            self.r[v] += &weighted_gram(&u[v], &recon_w2[v]);
            self.q[v] += &weighted_cross(&filled.data[v], &recon_w2[v], &u[v]);
            self.loss_acc[v] += residuals[v];
        }
        self.chunks_seen += 1;

        debug_assert!(self.v.iter().all(|m| m.iter().all(|&x| x >= 0.0)));
        debug_assert!((self.alpha.iter().sum::<f64>() - 1.0).abs() < 1e-12);

        let report = ChunkReport {
            objective_trace: trace.clone(),
            iterations: trace.len(),
            alpha: self.alpha.clone(),
        };
        let workspace = ChunkWorkspace {
            filled,
            u,
            ustar,
            weights,
            recon_w2,
            graphs,
            objective_trace: trace,
        };
        Ok((report, workspace))
    }

    /// Current-chunk penalized objective: weighted reconstruction, consensus
    /// gap, graph smoothness, the row-sparsity regularizer and the soft
    /// orthogonality penalty on each indicator. This is the value the block
    /// updates jointly descend, and the value recorded in the objective
    /// trace.
    pub fn chunk_objective(&self, ws: &ChunkWorkspace, hp: &Hyperparams) -> f64 {
        let cons_w2: Vec<Array1<f64>> = ws.weights.iter().map(|w| w.squared()).collect();
        let residuals: Vec<f64> = (0..self.n_views())
            .map(|v| weighted_residual(&ws.filled.data[v], &self.v[v], &ws.u[v], &ws.recon_w2[v]))
            .collect();
        let (data, penalty) =
            self.chunk_objective_parts(&ws.u, &ws.ustar, &cons_w2, &ws.graphs, hp, &residuals);
        data + penalty
    }

    /// Returns `(model terms, orthogonality penalty)` for the current chunk.
    /// The model terms alone drive the convergence test.
    fn chunk_objective_parts(
        &self,
        u: &[Array2<f64>],
        ustar: &Array2<f64>,
        cons_w2: &[Array1<f64>],
        graphs: &[SimilarityGraph],
        hp: &Hyperparams,
        residuals: &[f64],
    ) -> (f64, f64) {
        let mut data = 0.0;
        let mut penalty = 0.0;
        for v in 0..self.n_views() {
            let alpha_pow = match hp.variant {
                Variant::I2mufs => self.alpha[v].powf(hp.lambda),
                Variant::CI2mufs => 1.0,
            };
            data += alpha_pow * residuals[v]
                + hp.beta[v] * consensus_residual(&u[v], ustar, &cons_w2[v])
                + hp.theta[v] * graph_trace(&u[v], &graphs[v].laplacian)
                + hp.eta[v] * l21_norm(&self.v[v]);
            let gap = orthogonality_gap(&u[v]);
            penalty += hp.xi[v] * gap * gap;
        }
        (data, penalty)
    }
}

/// Ranks every view's features by descending feature-factor row norm;
/// ties break toward the lower feature index.
pub fn rank_features(state: &SolverState) -> Vec<Vec<(usize, f64)>> {
    state
        .v
        .iter()
        .map(|v| {
            let norms = row_norms(v);
            let mut ranked: Vec<(usize, f64)> = norms.iter().cloned().enumerate().collect();
            ranked.sort_by(|(ia, sa), (ib, sb)| {
                sb.partial_cmp(sa).expect("finite scores").then(ia.cmp(ib))
            });
            ranked
        })
        .collect()
}

/// Keeps the top `ceil(ratio * d_v)` ranked features of each view.
pub fn select_features(ranking: &[Vec<(usize, f64)>], ratio: f64) -> Result<Vec<Vec<usize>>> {
    if !(ratio > 0.0 && ratio <= 1.0) {
        return Err(Error::InvalidParam(format!(
            "feature ratio {ratio} outside (0, 1]"
        )));
    }
    Ok(ranking
        .iter()
        .map(|view| {
            let keep = ((ratio * view.len() as f64).ceil() as usize).min(view.len());
            view.iter().take(keep).map(|(i, _)| *i).collect()
        })
        .collect())
}

/// Warm-starts a chunk indicator: cluster the imputed columns, one-hot the
/// assignment, add smoothing so every entry is strictly positive, then give
/// each column unit Euclidean norm.
fn init_indicator(x: &Array2<f64>, k: usize, seed: u64) -> Result<Array2<f64>> {
    let n = x.ncols();
    let mut u = Array2::from_elem((n, k), 0.2);
    if n >= k {
        let result = kmeans(x, &KMeansParams::new(k).with_seed(seed).with_restarts(1))?;
        for (j, &c) in result.partition.assignments().iter().enumerate() {
            u[[j, c]] += 1.0;
        }
    } else {
        // Chunk smaller than the factor count: no clustering is defined, so
        // fall back to a seeded positive random start.
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        u.mapv_inplace(|_| 0.2 + rng.gen::<f64>());
    }
    for mut col in u.columns_mut() {
        let norm = col.dot(&col).sqrt();
        col /= norm;
    }
    Ok(u)
}

/// Deterministic per-(chunk, view) seed derivation.
fn mix_seed(base: u64, chunk_number: u64, view: u64) -> u64 {
    fn splitmix64(mut z: u64) -> u64 {
        z = z.wrapping_add(0x9E3779B97F4A7C15);
        z = (z ^ (z >> 30)).wrapping_mul(0xBF58476D1CE4E5B9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94D049BB133111EB);
        z ^ (z >> 31)
    }
    splitmix64(splitmix64(base.wrapping_add(chunk_number)) ^ view)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::MultiViewChunk;
    use approx::assert_abs_diff_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn specs(dims: &[usize]) -> Vec<ViewSpec> {
        dims.iter()
            .enumerate()
            .map(|(v, &dim)| ViewSpec {
                view_id: v,
                dim,
                name: format!("view{v}"),
            })
            .collect()
    }

    fn random_chunk(
        dims: &[usize],
        n: usize,
        seed: u64,
        missing_every: Option<usize>,
    ) -> MultiViewChunk {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut data = Vec::new();
        let mut mask = Vec::new();
        for (v, &d) in dims.iter().enumerate() {
            let mut m = Array2::from_shape_fn((d, n), |_| rng.gen::<f64>());
            let mut mv = vec![true; n];
            if let Some(every) = missing_every {
                for (j, slot) in mv.iter_mut().enumerate() {
                    // Stagger the missing pattern across views so no
                    // instance loses every view.
                    if (j + v) % every == 0 && j > 0 {
                        *slot = false;
                        m.column_mut(j).fill(0.0);
                    }
                }
            }
            data.push(m);
            mask.push(mv);
        }
        MultiViewChunk {
            chunk_index: 1,
            data,
            mask,
            labels: None,
        }
    }

    #[test]
    fn init_rejects_bad_lambda_and_small_k() {
        let views = specs(&[4, 5]);
        let hp = Hyperparams::new(3, 2).with_lambda(1.0);
        assert!(SolverState::init(views.clone(), &hp, 0).is_err());
        let hp = Hyperparams::new(3, 2).with_lambda(0.5);
        assert!(SolverState::init(views.clone(), &hp, 0).is_err());
        let hp = Hyperparams::new(1, 2);
        assert!(SolverState::init(views.clone(), &hp, 0).is_err());
        // Just above 1 is accepted (with a warning).
        let hp = Hyperparams::new(3, 2).with_lambda(1.5);
        assert!(SolverState::init(views, &hp, 0).is_ok());
    }

    #[test]
    fn init_feature_factors_are_small_and_positive() {
        let views = specs(&[6, 3]);
        let hp = Hyperparams::new(2, 2);
        let state = SolverState::init(views, &hp, 42).unwrap();
        for v in &state.v {
            assert!(v.iter().all(|&x| x > 0.0 && x <= 1e-2));
        }
        assert_eq!(state.alpha, vec![0.5, 0.5]);
        assert_eq!(state.chunks_seen, 0);
    }

    #[test]
    fn single_view_alpha_stays_one() {
        let views = specs(&[5]);
        let hp = Hyperparams::new(2, 1).with_max_iters(30);
        let mut state = SolverState::init(views, &hp, 1).unwrap();
        let chunk = random_chunk(&[5], 12, 2, None);
        let report = state.process_chunk(&chunk, &hp).unwrap();
        assert_eq!(report.alpha, vec![1.0]);
        assert_eq!(state.chunks_seen, 1);
    }

    #[test]
    fn objective_trace_is_monotone_on_a_random_chunk() {
        let dims = [7, 5];
        let views = specs(&dims);
        let hp = Hyperparams::new(3, 2);
        let mut state = SolverState::init(views, &hp, 3).unwrap();
        let chunk = random_chunk(&dims, 25, 4, Some(4));
        let report = state.process_chunk(&chunk, &hp).unwrap();
        assert!(report.iterations >= 2);
        for w in report.objective_trace.windows(2) {
            assert!(
                w[1] <= w[0] * (1.0 + 1e-7),
                "objective rose from {} to {}",
                w[0],
                w[1]
            );
        }
    }

    #[test]
    fn fully_observed_chunk_gets_unit_weights() {
        let dims = [4, 4];
        let views = specs(&dims);
        let hp = Hyperparams::new(2, 2).with_max_iters(5);
        let mut state = SolverState::init(views, &hp, 5).unwrap();
        let chunk = random_chunk(&dims, 10, 6, None);
        let (_, ws) = state.process_chunk_full(&chunk, &hp).unwrap();
        for w in &ws.weights {
            assert!(w.diag.iter().all(|&x| x == 1.0));
        }
    }

    #[test]
    fn binary_variant_keeps_uniform_alpha_and_binary_recon_weights() {
        let dims = [4, 3];
        let views = specs(&dims);
        let hp = Hyperparams::new(2, 2)
            .with_variant(Variant::CI2mufs)
            .with_max_iters(10);
        let mut state = SolverState::init(views, &hp, 7).unwrap();
        let chunk = random_chunk(&dims, 12, 8, Some(3));
        let (report, ws) = state.process_chunk_full(&chunk, &hp).unwrap();
        assert_eq!(report.alpha, vec![0.5, 0.5]);
        for (v, w2) in ws.recon_w2.iter().enumerate() {
            for (j, &x) in w2.iter().enumerate() {
                let expected = if chunk.mask[v][j] { 1.0 } else { 0.0 };
                assert_eq!(x, expected);
            }
        }
    }

    #[test]
    fn equally_informative_views_get_similar_weights() {
        let dims = [6, 6];
        let views = specs(&dims);
        let hp = Hyperparams::new(2, 2);
        let mut state = SolverState::init(views, &hp, 11).unwrap();
        // Same distribution in both views.
        let chunk = random_chunk(&dims, 40, 12, None);
        let report = state.process_chunk(&chunk, &hp).unwrap();
        assert!(
            (report.alpha[0] - 0.5).abs() < 0.1,
            "alpha {:?}",
            report.alpha
        );
        let total: f64 = report.alpha.iter().sum();
        assert_abs_diff_eq!(total, 1.0, epsilon = 1e-12);
    }

    #[test]
    fn processing_is_deterministic_per_seed() {
        let dims = [5, 4];
        let views = specs(&dims);
        let hp = Hyperparams::new(2, 2).with_max_iters(20);
        let chunk = random_chunk(&dims, 15, 9, Some(5));
        let mut a = SolverState::init(views.clone(), &hp, 13).unwrap();
        let mut b = SolverState::init(views, &hp, 13).unwrap();
        let ra = a.process_chunk(&chunk, &hp).unwrap();
        let rb = b.process_chunk(&chunk, &hp).unwrap();
        assert_eq!(ra, rb);
        assert_eq!(a, b);
    }

    #[test]
    fn single_instance_chunks_are_processed() {
        let dims = [3, 3];
        let views = specs(&dims);
        let hp = Hyperparams::new(2, 2).with_max_iters(8);
        let mut state = SolverState::init(views, &hp, 15).unwrap();
        let chunk = random_chunk(&dims, 1, 16, None);
        let report = state.process_chunk(&chunk, &hp).unwrap();
        assert!(report.iterations >= 1);
        assert_eq!(state.chunks_seen, 1);
    }

    #[test]
    fn accumulators_grow_across_chunks() {
        let dims = [4, 4];
        let views = specs(&dims);
        let hp = Hyperparams::new(2, 2).with_max_iters(10);
        let mut state = SolverState::init(views, &hp, 17).unwrap();
        state
            .process_chunk(&random_chunk(&dims, 9, 18, None), &hp)
            .unwrap();
        let r_after_one = state.r[0].clone();
        let loss_after_one = state.loss_acc[0];
        state
            .process_chunk(&random_chunk(&dims, 9, 19, None), &hp)
            .unwrap();
        assert!(state.loss_acc[0] >= loss_after_one);
        // Gram accumulators only ever gain mass on the diagonal.
        for i in 0..2 {
            assert!(state.r[0][[i, i]] >= r_after_one[[i, i]]);
        }
        assert_eq!(state.chunks_seen, 2);
        // Symmetry of the Gram accumulator survives folding.
        let gap = (&state.r[0] - &state.r[0].t()).mapv(f64::abs).sum();
        assert!(gap < 1e-10);
    }

    #[test]
    fn rank_features_orders_by_row_norm_with_index_ties() {
        let views = specs(&[3]);
        let hp = Hyperparams::new(2, 1);
        let mut state = SolverState::init(views, &hp, 21).unwrap();
        state.v[0] = ndarray::array![[0.6, 0.8], [0.0, 0.5], [0.8, 0.6]];
        let ranking = rank_features(&state);
        // Rows 0 and 2 tie at norm 1.0; the lower index wins.
        let order: Vec<usize> = ranking[0].iter().map(|(i, _)| *i).collect();
        assert_eq!(order, vec![0, 2, 1]);
        assert_abs_diff_eq!(ranking[0][0].1, 1.0, epsilon = 1e-15);
    }

    #[test]
    fn select_features_takes_ceil_of_ratio() {
        let ranking = vec![
            (0..10)
                .map(|i| (i, 1.0 / (i + 1) as f64))
                .collect::<Vec<_>>(),
            (0..7)
                .map(|i| (i, 1.0 / (i + 1) as f64))
                .collect::<Vec<_>>(),
        ];
        let selected = select_features(&ranking, 0.3).unwrap();
        assert_eq!(selected[0].len(), 3);
        let selected = select_features(&ranking, 0.5).unwrap();
        assert_eq!(selected[1].len(), 4);
        let selected = select_features(&ranking, 1.0).unwrap();
        assert_eq!(selected[0].len(), 10);
        assert!(select_features(&ranking, 0.0).is_err());
        assert!(select_features(&ranking, 1.1).is_err());
    }

    #[test]
    fn mismatched_chunk_shapes_are_rejected() {
        let views = specs(&[4, 4]);
        let hp = Hyperparams::new(2, 2);
        let mut state = SolverState::init(views, &hp, 23).unwrap();
        let chunk = random_chunk(&[4, 5], 6, 24, None);
        assert!(state.process_chunk(&chunk, &hp).is_err());
        let chunk = random_chunk(&[4], 6, 24, None);
        assert!(state.process_chunk(&chunk, &hp).is_err());
    }
}
