//! Multi-view dataset container, manifest/CSV round trip, incompleteness
//! masking and stream chunking.
//!
//! A dataset holds one feature-major matrix per view (`d_v` rows, `N`
//! columns, one column per instance) plus a per-view presence mask. Columns
//! of instances missing in a view are zero-filled placeholders; the mask is
//! the source of truth for observedness.

use std::fs;
use std::path::{Path, PathBuf};

use ndarray::Array2;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Static description of one view.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ViewSpec {
    pub view_id: usize,
    pub dim: usize,
    pub name: String,
}

/// A full multi-view dataset with optional ground-truth labels.
#[derive(Debug, Clone, PartialEq)]
pub struct MultiViewDataset {
    pub views: Vec<ViewSpec>,
    /// One `d_v x N` matrix per view; placeholder columns are all zero.
    pub data: Vec<Array2<f64>>,
    /// `mask[v][i]` is true iff instance `i` is observed in view `v`.
    pub mask: Vec<Vec<bool>>,
    pub labels: Option<Vec<usize>>,
}

/// A contiguous batch of instances cut from the (shuffled) stream.
#[derive(Debug, Clone, PartialEq)]
pub struct MultiViewChunk {
    /// 1-based position of this chunk in the stream.
    pub chunk_index: usize,
    pub data: Vec<Array2<f64>>,
    pub mask: Vec<Vec<bool>>,
    pub labels: Option<Vec<usize>>,
}

impl MultiViewDataset {
    pub fn n_views(&self) -> usize {
        self.views.len()
    }

    pub fn n_instances(&self) -> usize {
        self.data.first().map_or(0, |m| m.ncols())
    }

    /// Checks every structural invariant; called after load and after edits.
    pub fn validate(&self) -> Result<()> {
        if self.views.is_empty() {
            return Err(Error::InvalidInput("dataset has no views".into()));
        }
        let n = self.n_instances();
        if n == 0 {
            return Err(Error::InvalidInput("dataset has no instances".into()));
        }
        for (v, spec) in self.views.iter().enumerate() {
            if spec.dim == 0 {
                return Err(Error::InvalidInput(format!("view {v} has zero features")));
            }
            let m = &self.data[v];
            if m.nrows() != spec.dim {
                return Err(Error::DimensionMismatch(format!(
                    "view {v}: matrix has {} rows, spec says {}",
                    m.nrows(),
                    spec.dim
                )));
            }
            if m.ncols() != n {
                return Err(Error::DimensionMismatch(format!(
                    "view {v}: {} columns, expected {n}",
                    m.ncols()
                )));
            }
            if self.mask[v].len() != n {
                return Err(Error::DimensionMismatch(format!(
                    "view {v}: mask length {} does not cover {n} instances",
                    self.mask[v].len()
                )));
            }
            if let Some(bad) = m.iter().find(|x| !x.is_finite() || **x < 0.0) {
                return Err(Error::InvalidInput(format!(
                    "view {v} contains a non-finite or negative entry {bad}"
                )));
            }
        }
        if let Some(labels) = &self.labels {
            if labels.len() != n {
                return Err(Error::DimensionMismatch(format!(
                    "{} labels for {n} instances",
                    labels.len()
                )));
            }
        }
        for i in 0..n {
            if !self.mask.iter().any(|mv| mv[i]) {
                return Err(Error::InvalidInput(format!(
                    "instance {i} is missing in every view"
                )));
            }
        }
        Ok(())
    }

    /// Extracts the given instances (columns) in order into a new dataset.
    pub fn subset(&self, indices: &[usize]) -> MultiViewDataset {
        let data = self
            .data
            .iter()
            .map(|m| select_columns(m, indices))
            .collect();
        let mask = self
            .mask
            .iter()
            .map(|mv| indices.iter().map(|&i| mv[i]).collect())
            .collect();
        let labels = self
            .labels
            .as_ref()
            .map(|l| indices.iter().map(|&i| l[i]).collect());
        MultiViewDataset {
            views: self.views.clone(),
            data,
            mask,
            labels,
        }
    }
}

impl MultiViewChunk {
    pub fn n_views(&self) -> usize {
        self.data.len()
    }

    pub fn n_instances(&self) -> usize {
        self.data.first().map_or(0, |m| m.ncols())
    }
}

fn select_columns(m: &Array2<f64>, indices: &[usize]) -> Array2<f64> {
    let mut out = Array2::zeros((m.nrows(), indices.len()));
    for (k, &i) in indices.iter().enumerate() {
        out.column_mut(k).assign(&m.column(i));
    }
    out
}

// ---------------------------------------------------------------------------
// Manifest + CSV round trip
// ---------------------------------------------------------------------------

#[derive(Debug, Serialize, Deserialize)]
struct ManifestView {
    name: String,
    dim: usize,
    csv_path: String,
}

/// On-disk description of a dataset: per-view CSV paths relative to the
/// manifest file, plus optional mask and label files.
#[derive(Debug, Serialize, Deserialize)]
struct Manifest {
    views: Vec<ManifestView>,
    n_instances: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    mask_csv: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    labels_csv: Option<String>,
}

fn resolve(base: &Path, rel: &str) -> PathBuf {
    let p = Path::new(rel);
    if p.is_absolute() {
        p.to_path_buf()
    } else {
        base.join(p)
    }
}

fn read_to_string(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| Error::io(path.display().to_string(), e))
}

/// Parses a headerless numeric CSV into a `rows x cols` matrix.
fn read_matrix_csv(path: &Path, rows: usize, cols: usize) -> Result<Array2<f64>> {
    let text = read_to_string(path)?;
    let mut out = Array2::zeros((rows, cols));
    let mut row = 0usize;
    for (lineno, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        if row >= rows {
            return Err(Error::Parse {
                path: path.display().to_string(),
                line: lineno + 1,
                message: format!("more than {rows} data rows"),
            });
        }
        let mut col = 0usize;
        for cell in line.split(',') {
            if col >= cols {
                return Err(Error::Parse {
                    path: path.display().to_string(),
                    line: lineno + 1,
                    message: format!("more than {cols} columns"),
                });
            }
            let value: f64 = cell.trim().parse().map_err(|_| Error::Parse {
                path: path.display().to_string(),
                line: lineno + 1,
                message: format!("bad number {cell:?}"),
            })?;
            out[[row, col]] = value;
            col += 1;
        }
        if col != cols {
            return Err(Error::Parse {
                path: path.display().to_string(),
                line: lineno + 1,
                message: format!("{col} columns, expected {cols}"),
            });
        }
        row += 1;
    }
    if row != rows {
        return Err(Error::Parse {
            path: path.display().to_string(),
            line: text.lines().count(),
            message: format!("{row} data rows, expected {rows}"),
        });
    }
    Ok(out)
}

/// Writes a matrix as headerless CSV using the shortest round-trip decimal
/// form, so that reading the file back reproduces every bit.
fn write_matrix_csv(path: &Path, m: &Array2<f64>) -> Result<()> {
    let mut text = String::new();
    for row in m.rows() {
        let mut first = true;
        for x in row {
            if !first {
                text.push(',');
            }
            text.push_str(&format!("{x}"));
            first = false;
        }
        text.push('\n');
    }
    fs::write(path, text).map_err(|e| Error::io(path.display().to_string(), e))
}

/// Loads a dataset from a JSON manifest. Placeholder columns of instances
/// marked missing are forced to zero regardless of the CSV contents.
pub fn load_dataset(manifest_path: &Path) -> Result<MultiViewDataset> {
    let base = manifest_path
        .parent()
        .unwrap_or(Path::new("."))
        .to_path_buf();
    let manifest: Manifest = serde_json::from_str(&read_to_string(manifest_path)?)?;
    if manifest.views.is_empty() {
        return Err(Error::InvalidInput("manifest lists no views".into()));
    }
    let n = manifest.n_instances;
    let n_views = manifest.views.len();

    let mut views = Vec::with_capacity(n_views);
    let mut data = Vec::with_capacity(n_views);
    for (v, mv) in manifest.views.iter().enumerate() {
        views.push(ViewSpec {
            view_id: v,
            dim: mv.dim,
            name: mv.name.clone(),
        });
        data.push(read_matrix_csv(&resolve(&base, &mv.csv_path), mv.dim, n)?);
    }

    let mask = match &manifest.mask_csv {
        Some(rel) => {
            let path = resolve(&base, rel);
            let raw = read_matrix_csv(&path, n_views, n)?;
            let mut mask = vec![vec![true; n]; n_views];
            for v in 0..n_views {
                for i in 0..n {
                    let cell = raw[[v, i]];
                    if cell != 0.0 && cell != 1.0 {
                        return Err(Error::Parse {
                            path: path.display().to_string(),
                            line: v + 1,
                            message: format!("mask cell {cell} is not 0 or 1"),
                        });
                    }
                    mask[v][i] = cell == 1.0;
                }
            }
            mask
        }
        None => vec![vec![true; n]; n_views],
    };

    for (m, mask_v) in data.iter_mut().zip(&mask) {
        for (i, &observed) in mask_v.iter().enumerate() {
            if !observed {
                m.column_mut(i).fill(0.0);
            }
        }
    }

    let labels = match &manifest.labels_csv {
        Some(rel) => {
            let path = resolve(&base, rel);
            let text = read_to_string(&path)?;
            let mut labels = Vec::with_capacity(n);
            for (lineno, line) in text.lines().enumerate() {
                if line.trim().is_empty() {
                    continue;
                }
                let value: usize = line.trim().parse().map_err(|_| Error::Parse {
                    path: path.display().to_string(),
                    line: lineno + 1,
                    message: format!("bad label {line:?}"),
                })?;
                labels.push(value);
            }
            Some(labels)
        }
        None => None,
    };

    let ds = MultiViewDataset {
        views,
        data,
        mask,
        labels,
    };
    ds.validate()?;
    Ok(ds)
}

/// Writes per-view CSVs, the mask, optional labels and a manifest under
/// `dir`, all named after `stem`. Returns the manifest path.
pub fn save_dataset(ds: &MultiViewDataset, dir: &Path, stem: &str) -> Result<PathBuf> {
    ds.validate()?;
    fs::create_dir_all(dir).map_err(|e| Error::io(dir.display().to_string(), e))?;
    let n = ds.n_instances();
    let n_views = ds.n_views();

    let mut manifest_views = Vec::with_capacity(n_views);
    for (v, spec) in ds.views.iter().enumerate() {
        let file = format!("{stem}_view{v}.csv");
        write_matrix_csv(&dir.join(&file), &ds.data[v])?;
        manifest_views.push(ManifestView {
            name: spec.name.clone(),
            dim: spec.dim,
            csv_path: file,
        });
    }

    let mask_file = format!("{stem}_mask.csv");
    let mut mask_matrix = Array2::zeros((n_views, n));
    for v in 0..n_views {
        for i in 0..n {
            mask_matrix[[v, i]] = if ds.mask[v][i] { 1.0 } else { 0.0 };
        }
    }
    write_matrix_csv(&dir.join(&mask_file), &mask_matrix)?;

    let labels_file = ds.labels.as_ref().map(|labels| {
        let file = format!("{stem}_labels.csv");
        let text: String = labels.iter().map(|l| format!("{l}\n")).collect();
        (file, text)
    });
    if let Some((file, text)) = &labels_file {
        fs::write(dir.join(file), text).map_err(|e| Error::io(file.clone(), e))?;
    }

    let manifest = Manifest {
        views: manifest_views,
        n_instances: n,
        mask_csv: Some(mask_file),
        labels_csv: labels_file.map(|(file, _)| file),
    };
    let manifest_path = dir.join(format!("{stem}_manifest.json"));
    let text = serde_json::to_string_pretty(&manifest)?;
    fs::write(&manifest_path, text)
        .map_err(|e| Error::io(manifest_path.display().to_string(), e))?;
    Ok(manifest_path)
}

// ---------------------------------------------------------------------------
// Incompleteness masking and chunking
// ---------------------------------------------------------------------------

/// Marks `floor(ratio * N)` instances as view-incomplete by removing each
/// selected instance from a uniformly chosen nonempty strict subset of its
/// present views. Removed slots are zero-filled; no instance ever loses all
/// of its views.
pub fn mask_incomplete(ds: &MultiViewDataset, ratio: f64, seed: u64) -> Result<MultiViewDataset> {
    if !(0.0..1.0).contains(&ratio) {
        return Err(Error::InvalidParam(format!(
            "incomplete ratio {ratio} outside [0, 1)"
        )));
    }
    ds.validate()?;
    let n = ds.n_instances();
    let target = (ratio * n as f64).floor() as usize;
    let mut out = ds.clone();
    if target == 0 {
        return Ok(out);
    }

    // Only instances present in at least two views can lose one and survive.
    let candidates: Vec<usize> = (0..n)
        .filter(|&i| ds.mask.iter().filter(|mv| mv[i]).count() >= 2)
        .collect();
    if candidates.len() < target {
        return Err(Error::InvalidInput(format!(
            "cannot mask {target} instances: only {} have two or more views",
            candidates.len()
        )));
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut order = candidates;
    order.shuffle(&mut rng);
    for &i in order.iter().take(target) {
        let present: Vec<usize> = (0..ds.n_views()).filter(|&v| out.mask[v][i]).collect();
        // A bit pattern in [1, 2^p - 2] is a uniformly drawn nonempty strict
        // subset of the present views.
        let p = present.len() as u32;
        let pattern = rng.gen_range(1..(1u64 << p) - 1);
        for (bit, &v) in present.iter().enumerate() {
            if pattern >> bit & 1 == 1 {
                out.mask[v][i] = false;
                out.data[v].column_mut(i).fill(0.0);
            }
        }
    }
    out.validate()?;
    Ok(out)
}

/// Shuffles instances with the given seed, then splits them into
/// `n_chunks` contiguous chunks whose sizes differ by at most one.
pub fn chunkify(ds: &MultiViewDataset, n_chunks: usize, seed: u64) -> Result<Vec<MultiViewChunk>> {
    let n = ds.n_instances();
    if n_chunks == 0 || n_chunks > n {
        return Err(Error::InvalidParam(format!(
            "cannot cut {n} instances into {n_chunks} chunks"
        )));
    }
    let mut perm: Vec<usize> = (0..n).collect();
    perm.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));

    let base = n / n_chunks;
    let rem = n % n_chunks;
    let mut chunks = Vec::with_capacity(n_chunks);
    let mut offset = 0usize;
    for c in 0..n_chunks {
        let size = base + usize::from(c < rem);
        let idx = &perm[offset..offset + size];
        let piece = ds.subset(idx);
        chunks.push(MultiViewChunk {
            chunk_index: c + 1,
            data: piece.data,
            mask: piece.mask,
            labels: piece.labels,
        });
        offset += size;
    }
    Ok(chunks)
}
