//! Versioned checkpoint blobs for the solver state.
//!
//! Checkpoints are JSON with flat row-major matrix payloads. Numbers are
//! written in shortest round-trip form, so saving and reloading reproduces
//! the state bit for bit and a resumed stream matches an uninterrupted one.

use std::fs;
use std::path::Path;

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::dataset::ViewSpec;
use crate::error::{Error, Result};
use crate::impute::ImputeState;
use crate::solver::SolverState;

const SCHEMA: u32 = 1;

#[derive(Serialize, Deserialize)]
struct MatrixBlob {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl MatrixBlob {
    fn pack(m: &Array2<f64>) -> Self {
        MatrixBlob {
            rows: m.nrows(),
            cols: m.ncols(),
            data: m.iter().cloned().collect(),
        }
    }

    fn unpack(self) -> Result<Array2<f64>> {
        Array2::from_shape_vec((self.rows, self.cols), self.data)
            .map_err(|e| Error::InvalidInput(format!("bad matrix payload: {e}")))
    }
}

#[derive(Serialize, Deserialize)]
struct CheckpointBlob {
    schema: u32,
    views: Vec<ViewSpec>,
    k: usize,
    init_seed: u64,
    chunks_seen: usize,
    alpha: Vec<f64>,
    loss_acc: Vec<f64>,
    v: Vec<MatrixBlob>,
    r: Vec<MatrixBlob>,
    q: Vec<MatrixBlob>,
    impute: ImputeState,
}

/// Serializes the full solver state to a JSON byte blob.
pub fn state_to_bytes(state: &SolverState) -> Result<Vec<u8>> {
    let blob = CheckpointBlob {
        schema: SCHEMA,
        views: state.views().to_vec(),
        k: state.k(),
        init_seed: state.init_seed(),
        chunks_seen: state.chunks_seen,
        alpha: state.alpha.clone(),
        loss_acc: state.loss_acc.clone(),
        v: state.v.iter().map(MatrixBlob::pack).collect(),
        r: state.r.iter().map(MatrixBlob::pack).collect(),
        q: state.q.iter().map(MatrixBlob::pack).collect(),
        impute: state.impute.clone(),
    };
    Ok(serde_json::to_vec(&blob)?)
}

/// Restores a solver state from [`state_to_bytes`] output.
pub fn state_from_bytes(bytes: &[u8]) -> Result<SolverState> {
    let blob: CheckpointBlob = serde_json::from_slice(bytes)?;
    if blob.schema != SCHEMA {
        return Err(Error::CheckpointSchema {
            found: blob.schema,
            expected: SCHEMA,
        });
    }
    let n_views = blob.views.len();
    if blob.v.len() != n_views || blob.r.len() != n_views || blob.q.len() != n_views {
        return Err(Error::InvalidInput(
            "checkpoint matrix counts disagree with view count".into(),
        ));
    }
    let unpack_all = |blobs: Vec<MatrixBlob>| -> Result<Vec<Array2<f64>>> {
        blobs.into_iter().map(MatrixBlob::unpack).collect()
    };
    let state = SolverState {
        views: blob.views,
        k: blob.k,
        init_seed: blob.init_seed,
        v: unpack_all(blob.v)?,
        r: unpack_all(blob.r)?,
        q: unpack_all(blob.q)?,
        loss_acc: blob.loss_acc,
        alpha: blob.alpha,
        impute: blob.impute,
        chunks_seen: blob.chunks_seen,
    };
    for (spec, (v, q)) in state.views.iter().zip(state.v.iter().zip(&state.q)) {
        if v.dim() != (spec.dim, state.k) || q.dim() != (spec.dim, state.k) {
            return Err(Error::DimensionMismatch(format!(
                "checkpoint matrices for view {} do not match its spec",
                spec.view_id
            )));
        }
    }
    Ok(state)
}

/// Writes the state to a checkpoint file.
pub fn save_checkpoint(state: &SolverState, path: &Path) -> Result<()> {
    let bytes = state_to_bytes(state)?;
    fs::write(path, bytes).map_err(|e| Error::io(path.display().to_string(), e))
}

/// Reads a checkpoint file back into a solver state.
pub fn load_checkpoint(path: &Path) -> Result<SolverState> {
    let bytes = fs::read(path).map_err(|e| Error::io(path.display().to_string(), e))?;
    state_from_bytes(&bytes)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::MultiViewChunk;
    use crate::solver::Hyperparams;
    use ndarray::Array2;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn demo_state() -> SolverState {
        let views = vec![
            ViewSpec {
                view_id: 0,
                dim: 4,
                name: "a".into(),
            },
            ViewSpec {
                view_id: 1,
                dim: 3,
                name: "b".into(),
            },
        ];
        let hp = Hyperparams::new(2, 2).with_max_iters(12);
        let mut state = SolverState::init(views, &hp, 99).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let chunk = MultiViewChunk {
            chunk_index: 1,
            data: vec![
                Array2::from_shape_fn((4, 8), |_| rng.gen::<f64>()),
                Array2::from_shape_fn((3, 8), |_| rng.gen::<f64>()),
            ],
            mask: vec![vec![true; 8], {
                let mut m = vec![true; 8];
                m[2] = false;
                m
            }],
            labels: None,
        };
        let mut chunk = chunk;
        chunk.data[1].column_mut(2).fill(0.0);
        state.process_chunk(&chunk, &hp).unwrap();
        state
    }

    #[test]
    fn round_trip_preserves_every_bit() {
        let state = demo_state();
        let bytes = state_to_bytes(&state).unwrap();
        let back = state_from_bytes(&bytes).unwrap();
        assert_eq!(state, back);
        // Serializing again yields identical bytes.
        assert_eq!(bytes, state_to_bytes(&back).unwrap());
    }

    #[test]
    fn file_round_trip() {
        let state = demo_state();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("solver.ckpt");
        save_checkpoint(&state, &path).unwrap();
        let back = load_checkpoint(&path).unwrap();
        assert_eq!(state, back);
    }

    #[test]
    fn unknown_schema_is_rejected() {
        let state = demo_state();
        let mut text = String::from_utf8(state_to_bytes(&state).unwrap()).unwrap();
        text = text.replacen("\"schema\":1", "\"schema\":7", 1);
        let err = state_from_bytes(text.as_bytes()).unwrap_err();
        assert!(matches!(
            err,
            Error::CheckpointSchema {
                found: 7,
                expected: 1
            }
        ));
    }
}
