//! Gaussian k-nearest-neighbour similarity graphs and their Laplacians.
//!
//! Edges are the union of directed k-NN relations (so the result is
//! symmetric), weighted with a Gaussian kernel whose bandwidth is either
//! fixed or the median distance over kept edges. The unnormalized Laplacian
//! `L = D - S` is built once and cached alongside the similarity matrix.

use ndarray::{Array1, Array2};

use crate::error::{Error, Result};

/// Bandwidth selection for the Gaussian kernel.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Bandwidth {
    /// Median Euclidean distance over kept edges. Degenerates to similarity 1
    /// on every kept edge when that median is zero.
    Median,
    /// Fixed positive sigma.
    Fixed(f64),
}

/// Symmetric similarity matrix with degree vector and Laplacian.
#[derive(Debug, Clone, PartialEq)]
pub struct SimilarityGraph {
    pub similarity: Array2<f64>,
    pub degrees: Array1<f64>,
    pub laplacian: Array2<f64>,
}

impl SimilarityGraph {
    /// Graph with no edges, used for chunks too small to have neighbours.
    pub fn trivial(n: usize) -> Self {
        SimilarityGraph {
            similarity: Array2::zeros((n, n)),
            degrees: Array1::zeros(n),
            laplacian: Array2::zeros((n, n)),
        }
    }

    pub fn n_nodes(&self) -> usize {
        self.similarity.nrows()
    }
}

/// Builds the union k-NN Gaussian graph over the columns of `data`.
///
/// Neighbour ties at equal distance are broken by ascending column index, so
/// the construction is deterministic.
pub fn build_graph(data: &Array2<f64>, k: usize, bandwidth: Bandwidth) -> Result<SimilarityGraph> {
    let n = data.ncols();
    if n < 2 {
        return Err(Error::InvalidInput(format!(
            "graph needs at least 2 instances, got {n}"
        )));
    }
    if k == 0 || k > n - 1 {
        return Err(Error::InvalidParam(format!(
            "neighbour count {k} outside [1, {}]",
            n - 1
        )));
    }
    if let Bandwidth::Fixed(sigma) = bandwidth {
        if !sigma.is_finite() || sigma <= 0.0 {
            return Err(Error::InvalidParam(format!(
                "bandwidth {sigma} must be positive"
            )));
        }
    }

    let mut dist2 = Array2::zeros((n, n));
    for i in 0..n {
        for j in (i + 1)..n {
            let diff = &data.column(i) - &data.column(j);
            let d2 = diff.dot(&diff);
            dist2[[i, j]] = d2;
            dist2[[j, i]] = d2;
        }
    }

    // Union of directed k-NN edges, stored per unordered pair.
    let mut edge = vec![false; n * n];
    for i in 0..n {
        let mut order: Vec<usize> = (0..n).filter(|&j| j != i).collect();
        order.sort_by(|&a, &b| {
            dist2[[i, a]]
                .partial_cmp(&dist2[[i, b]])
                .expect("finite distances")
                .then(a.cmp(&b))
        });
        for &j in order.iter().take(k) {
            let (lo, hi) = if i < j { (i, j) } else { (j, i) };
            edge[lo * n + hi] = true;
        }
    }

    let sigma = match bandwidth {
        Bandwidth::Fixed(s) => Some(s),
        Bandwidth::Median => {
            let mut dists: Vec<f64> = (0..n)
                .flat_map(|i| ((i + 1)..n).map(move |j| (i, j)))
                .filter(|&(i, j)| edge[i * n + j])
                .map(|(i, j)| dist2[[i, j]].sqrt())
                .collect();
            dists.sort_by(|a, b| a.partial_cmp(b).expect("finite distances"));
            let m = dists.len();
            let median = if m % 2 == 1 {
                dists[m / 2]
            } else {
                0.5 * (dists[m / 2 - 1] + dists[m / 2])
            };
            (median > 0.0).then_some(median)
        }
    };

    let mut similarity = Array2::zeros((n, n));
    for i in 0..n {
        for j in (i + 1)..n {
            if !edge[i * n + j] {
                continue;
            }
            let s = match sigma {
                // All kept edges have zero length: fall back to similarity 1.
                None => 1.0,
                Some(sigma) => (-dist2[[i, j]] / (2.0 * sigma * sigma)).exp(),
            };
            similarity[[i, j]] = s;
            similarity[[j, i]] = s;
        }
    }

    let degrees: Array1<f64> = similarity.rows().into_iter().map(|row| row.sum()).collect();
    let mut laplacian = -&similarity;
    for i in 0..n {
        laplacian[[i, i]] += degrees[i];
    }

    Ok(SimilarityGraph {
        similarity,
        degrees,
        laplacian,
    })
}
