//! Shared workload builders for the criterion benchmarks.

use i2mufs::dataset::{MultiViewChunk, ViewSpec};
use i2mufs::synth::{generate, SynthSpec};
use i2mufs::{chunkify, mask_incomplete, Hyperparams};

/// Builds a masked, chunked synthetic stream with two views and three
/// planted clusters.
pub fn chunked_workload(
    n: usize,
    n_chunks: usize,
    seed: u64,
) -> (Vec<ViewSpec>, Vec<MultiViewChunk>) {
    let out = generate(&SynthSpec {
        n,
        informative: vec![15, 12],
        noise: vec![10, 8],
        k: 3,
        seed,
    })
    .expect("workload generation");
    let masked = mask_incomplete(&out.dataset, 0.3, seed).expect("masking");
    let chunks = chunkify(&masked, n_chunks, seed).expect("chunking");
    (masked.views, chunks)
}

/// Hyperparameters running a fixed number of inner iterations, so every
/// benchmark sample does the same amount of work.
pub fn fixed_iteration_hyperparams(iters: usize) -> Hyperparams {
    Hyperparams::new(3, 2)
        .with_max_iters(iters)
        .with_rel_tol(1e-300)
}
