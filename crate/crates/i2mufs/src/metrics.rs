//! Clustering agreement metrics and the k-means evaluator.
//!
//! All three metrics are pure functions of the contingency table between a
//! clustering result and ground truth. Degenerate inputs follow fixed
//! conventions so that evaluation pipelines never fail on edge cases:
//! mutual information is 0 when either side has a single cluster, and the
//! adjusted Rand index of two identical degenerate partitions is 1.

use ndarray::{Array1, Array2};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

/// A hard partition of `n` items into contiguously numbered clusters; every
/// cluster id below `n_clusters` occurs at least once.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Partition {
    assignments: Vec<usize>,
    n_clusters: usize,
}

impl Partition {
    /// Wraps assignments whose ids are already contiguous from zero.
    pub fn new(assignments: Vec<usize>) -> Result<Self> {
        if assignments.is_empty() {
            return Err(Error::InvalidInput("empty partition".into()));
        }
        let n_clusters = assignments.iter().max().unwrap() + 1;
        let mut seen = vec![false; n_clusters];
        for &a in &assignments {
            seen[a] = true;
        }
        if let Some(gap) = seen.iter().position(|s| !s) {
            return Err(Error::InvalidInput(format!(
                "cluster id {gap} is unused; ids must be contiguous"
            )));
        }
        Ok(Partition {
            assignments,
            n_clusters,
        })
    }

    /// Relabels arbitrary ids compactly in order of first appearance.
    pub fn from_labels(labels: &[usize]) -> Result<Self> {
        if labels.is_empty() {
            return Err(Error::InvalidInput("empty partition".into()));
        }
        let mut map = std::collections::HashMap::new();
        let mut assignments = Vec::with_capacity(labels.len());
        for &l in labels {
            let next = map.len();
            assignments.push(*map.entry(l).or_insert(next));
        }
        Ok(Partition {
            n_clusters: map.len(),
            assignments,
        })
    }

    pub fn len(&self) -> usize {
        self.assignments.len()
    }

    pub fn is_empty(&self) -> bool {
        self.assignments.is_empty()
    }

    pub fn n_clusters(&self) -> usize {
        self.n_clusters
    }

    pub fn assignments(&self) -> &[usize] {
        &self.assignments
    }

    /// True iff both partitions induce the same grouping, ignoring labels.
    pub fn same_grouping(&self, other: &Partition) -> bool {
        if self.len() != other.len() {
            return false;
        }
        let canon = |p: &Partition| Partition::from_labels(p.assignments()).expect("nonempty");
        canon(self).assignments == canon(other).assignments
    }
}

fn check_pair(a: &Partition, b: &Partition) -> Result<()> {
    if a.len() != b.len() {
        return Err(Error::DimensionMismatch(format!(
            "partitions cover {} and {} items",
            a.len(),
            b.len()
        )));
    }
    Ok(())
}

/// Joint cluster counts: `out[i][j]` is how many items sit in cluster `i` of
/// `a` and cluster `j` of `b`.
pub fn contingency(a: &Partition, b: &Partition) -> Result<Vec<Vec<usize>>> {
    check_pair(a, b)?;
    let mut out = vec![vec![0usize; b.n_clusters()]; a.n_clusters()];
    for (&i, &j) in a.assignments().iter().zip(b.assignments()) {
        out[i][j] += 1;
    }
    Ok(out)
}

/// Normalized mutual information in `[0, 1]`; 0 when either partition has a
/// single cluster.
pub fn nmi(a: &Partition, b: &Partition) -> Result<f64> {
    let table = contingency(a, b)?;
    let n = a.len() as f64;
    let row_sums: Vec<f64> = table
        .iter()
        .map(|r| r.iter().sum::<usize>() as f64)
        .collect();
    let col_sums: Vec<f64> = (0..b.n_clusters())
        .map(|j| table.iter().map(|r| r[j]).sum::<usize>() as f64)
        .collect();

    let entropy = |sums: &[f64]| -> f64 {
        sums.iter()
            .filter(|&&s| s > 0.0)
            .map(|&s| -s * (s / n).ln())
            .sum()
    };
    let ha = entropy(&row_sums);
    let hb = entropy(&col_sums);
    if ha == 0.0 || hb == 0.0 {
        return Ok(0.0);
    }

    let mut numer = 0.0;
    for (i, row) in table.iter().enumerate() {
        for (j, &nij) in row.iter().enumerate() {
            if nij > 0 {
                let nij = nij as f64;
                numer += nij * (n * nij / (row_sums[i] * col_sums[j])).ln();
            }
        }
    }
    Ok(numer / (ha * hb).sqrt())
}

fn comb2(x: f64) -> f64 {
    x * (x - 1.0) * 0.5
}

/// Adjusted Rand index. When the expected-index denominator vanishes (both
/// partitions all singletons or both a single cluster) the result is 1 if
/// the groupings agree and 0 otherwise.
pub fn ari(a: &Partition, b: &Partition) -> Result<f64> {
    let table = contingency(a, b)?;
    let n = a.len() as f64;
    let row_sums: Vec<f64> = table
        .iter()
        .map(|r| r.iter().sum::<usize>() as f64)
        .collect();
    let col_sums: Vec<f64> = (0..b.n_clusters())
        .map(|j| table.iter().map(|r| r[j]).sum::<usize>() as f64)
        .collect();

    let sum_ij: f64 = table
        .iter()
        .flat_map(|r| r.iter())
        .map(|&nij| comb2(nij as f64))
        .sum();
    let sum_a: f64 = row_sums.iter().map(|&x| comb2(x)).sum();
    let sum_b: f64 = col_sums.iter().map(|&x| comb2(x)).sum();
    let total = comb2(n);

    let expected = if total > 0.0 {
        sum_a * sum_b / total
    } else {
        0.0
    };
    let max_index = 0.5 * (sum_a + sum_b);
    let denom = max_index - expected;
    if denom == 0.0 {
        return Ok(if a.same_grouping(b) { 1.0 } else { 0.0 });
    }
    Ok((sum_ij - expected) / denom)
}

/// Cluster-averaged F score: each result cluster is matched to the ground
/// truth cluster holding most of its items (lowest index on ties), and the
/// harmonic means of the per-cluster precision and recall are averaged.
pub fn f_measure(result: &Partition, truth: &Partition) -> Result<f64> {
    let table = contingency(result, truth)?;
    let col_sums: Vec<usize> = (0..truth.n_clusters())
        .map(|j| table.iter().map(|r| r[j]).sum())
        .collect();

    let mut total = 0.0;
    for row in &table {
        let size: usize = row.iter().sum();
        let best = row
            .iter()
            .enumerate()
            .max_by(|(ja, ca), (jb, cb)| ca.cmp(cb).then(jb.cmp(ja)))
            .map(|(j, _)| j)
            .expect("nonempty row");
        let hit = row[best] as f64;
        let precision = hit / size as f64;
        let recall = hit / col_sums[best] as f64;
        if precision + recall > 0.0 {
            total += 2.0 * precision * recall / (precision + recall);
        }
    }
    Ok(total / result.n_clusters() as f64)
}

// ---------------------------------------------------------------------------
// k-means
// ---------------------------------------------------------------------------

/// Knobs for the Lloyd iteration; `seed` makes every run reproducible.
#[derive(Debug, Clone)]
pub struct KMeansParams {
    pub k: usize,
    pub max_iters: usize,
    pub restarts: usize,
    pub seed: u64,
}

impl KMeansParams {
    pub fn new(k: usize) -> Self {
        KMeansParams {
            k,
            max_iters: 100,
            restarts: 10,
            seed: 0,
        }
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn with_restarts(mut self, restarts: usize) -> Self {
        self.restarts = restarts;
        self
    }
}

/// Result of the best restart; labels are compacted so no id is empty.
#[derive(Debug, Clone)]
pub struct KMeansResult {
    pub partition: Partition,
    pub sse: f64,
    pub centroids: Array2<f64>,
}

/// Lloyd's algorithm over the columns of `data` with greedy distance-squared
/// seeding, best of `restarts` runs by summed squared error. Assignment ties
/// go to the lowest centroid index, so results are deterministic.
pub fn kmeans(data: &Array2<f64>, params: &KMeansParams) -> Result<KMeansResult> {
    let n = data.ncols();
    let d = data.nrows();
    let k = params.k;
    if k == 0 || d == 0 || n == 0 {
        return Err(Error::InvalidInput("empty k-means problem".into()));
    }
    if n < k {
        return Err(Error::InvalidInput(format!(
            "{n} points cannot form {k} clusters"
        )));
    }
    if params.restarts == 0 {
        return Err(Error::InvalidParam(
            "k-means needs at least one restart".into(),
        ));
    }

    let mut best: Option<(f64, Vec<usize>, Array2<f64>)> = None;
    for restart in 0..params.restarts {
        let mut rng = ChaCha8Rng::seed_from_u64(params.seed.wrapping_add(restart as u64));
        let (sse, assign, centroids) = lloyd_once(data, k, params.max_iters, &mut rng);
        if best.as_ref().map_or(true, |(b, _, _)| sse < *b) {
            best = Some((sse, assign, centroids));
        }
    }
    let (sse, assign, centroids) = best.expect("at least one restart");

    // Drop ids of clusters that ended up empty so the partition is compact.
    let partition = Partition::from_labels(&assign)?;
    Ok(KMeansResult {
        partition,
        sse,
        centroids,
    })
}

fn lloyd_once(
    data: &Array2<f64>,
    k: usize,
    max_iters: usize,
    rng: &mut ChaCha8Rng,
) -> (f64, Vec<usize>, Array2<f64>) {
    let n = data.ncols();
    let d = data.nrows();

    // Distance-squared weighted seeding.
    let mut centroids = Array2::zeros((d, k));
    let first = rng.gen_range(0..n);
    centroids.column_mut(0).assign(&data.column(first));
    let mut nearest: Vec<f64> = (0..n)
        .map(|i| squared_distance(&data.column(i).to_owned(), &centroids.column(0).to_owned()))
        .collect();
    for c in 1..k {
        let total: f64 = nearest.iter().sum();
        let pick = if total > 0.0 {
            let mut r = rng.gen::<f64>() * total;
            let mut chosen = n - 1;
            for (i, &w) in nearest.iter().enumerate() {
                r -= w;
                if r <= 0.0 {
                    chosen = i;
                    break;
                }
            }
            chosen
        } else {
            rng.gen_range(0..n)
        };
        centroids.column_mut(c).assign(&data.column(pick));
        for (i, near) in nearest.iter_mut().enumerate() {
            let d2 = squared_distance(&data.column(i).to_owned(), &data.column(pick).to_owned());
            if d2 < *near {
                *near = d2;
            }
        }
    }

    let mut assign = vec![0usize; n];
    for _ in 0..max_iters {
        let mut changed = false;
        for (i, slot) in assign.iter_mut().enumerate() {
            let mut best_c = 0usize;
            let mut best_d = f64::INFINITY;
            for c in 0..k {
                let d2 =
                    squared_distance(&data.column(i).to_owned(), &centroids.column(c).to_owned());
                if d2 < best_d {
                    best_d = d2;
                    best_c = c;
                }
            }
            if *slot != best_c {
                *slot = best_c;
                changed = true;
            }
        }

        let mut sums = Array2::<f64>::zeros((d, k));
        let mut counts = vec![0usize; k];
        for (i, &c) in assign.iter().enumerate() {
            let mut col = sums.column_mut(c);
            col += &data.column(i);
            counts[c] += 1;
        }
        for (c, &count) in counts.iter().enumerate() {
            // An empty cluster keeps its previous centroid.
            if count > 0 {
                let mut col = centroids.column_mut(c);
                col.assign(&sums.column(c));
                col /= count as f64;
            }
        }
        if !changed {
            break;
        }
    }

    let sse: f64 = (0..n)
        .map(|i| {
            squared_distance(
                &data.column(i).to_owned(),
                &centroids.column(assign[i]).to_owned(),
            )
        })
        .sum();
    (sse, assign, centroids)
}

fn squared_distance(a: &Array1<f64>, b: &Array1<f64>) -> f64 {
    let diff = a - b;
    diff.dot(&diff)
}
