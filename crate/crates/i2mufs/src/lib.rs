//! Incremental unsupervised feature selection for incomplete multi-view
//! data streams.
//!
//! The pipeline: load or synthesize a multi-view dataset, optionally mask a
//! fraction of instances as view-incomplete, cut the stream into chunks, and
//! feed the chunks to the solver. Each chunk is mean-imputed with per-view
//! confidence weights, a similarity graph preserves its local structure, and
//! an alternating multiplicative scheme fits per-view feature factors, chunk
//! indicator factors, a consensus indicator and adaptive view weights.
//! Cross-chunk information survives in compact accumulators, so old chunks
//! never need to be replayed. Features are ranked by the row norms of the
//! per-view feature factors.

pub mod dataset;
pub mod error;
pub mod graph;
pub mod impute;
pub mod metrics;
pub mod reference;
pub mod solver;
pub mod synth;

pub use dataset::{chunkify, load_dataset, mask_incomplete, save_dataset};
pub use dataset::{MultiViewChunk, MultiViewDataset, ViewSpec};
pub use error::{Error, Result};
pub use graph::{build_graph, Bandwidth, SimilarityGraph};
pub use impute::{impute_chunk, impute_chunk_with_fallback, ImputeState, WeightMatrix};
pub use metrics::{ari, f_measure, kmeans, nmi, KMeansParams, KMeansResult, Partition};
pub use solver::{
    rank_features, select_features, ChunkReport, ChunkWorkspace, Hyperparams, SolverState, Variant,
};
