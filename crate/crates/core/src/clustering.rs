//! From coefficients to labels: affinity construction, spectral clustering,
//! and the k-means / adjacency-spectral baselines.

use ndarray::{Array1, Array2, ArrayView2, Axis};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AffinityMatrix {
    pub values: Array2<f64>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ClusterAssignment {
    pub labels: Vec<usize>,
    pub num_clusters: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AffinityConfig {
    /// Fraction of each column's squared mass retained by thresholding.
    pub energy_fraction: f64,
    /// Low-rank smoothing keeps `rank_multiplier * k + 1` singular directions.
    pub rank_multiplier: usize,
    pub smoothing: bool,
    /// Exponent applied to the smoothed affinities.
    pub power: f64,
}

impl Default for AffinityConfig {
    fn default() -> Self {
        AffinityConfig {
            energy_fraction: 1.0,
            rank_multiplier: 4,
            smoothing: true,
            power: 1.0,
        }
    }
}

impl AffinityConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.energy_fraction > 0.0 && self.energy_fraction <= 1.0) {
            return Err(Error::Config(format!(
                "energy_fraction must lie in (0, 1], got {}",
                self.energy_fraction
            )));
        }
        if self.rank_multiplier == 0 {
            return Err(Error::Config("rank_multiplier must be positive".into()));
        }
        if !(self.power > 0.0 && self.power.is_finite()) {
            return Err(Error::Config(format!(
                "affinity power must be positive, got {}",
                self.power
            )));
        }
        Ok(())
    }
}

/// Keeps, in every column, the largest-magnitude entries whose squared sum
/// first reaches `energy_fraction` of the column's squared sum.
pub fn threshold_columns(c: ArrayView2<f64>, energy_fraction: f64) -> Array2<f64> {
    let (n, m) = c.dim();
    let mut out = Array2::<f64>::zeros((n, m));
    let mut order: Vec<usize> = Vec::with_capacity(n);
    for j in 0..m {
        let col = c.column(j);
        order.clear();
        order.extend(0..n);
        order.sort_by(|&a, &b| {
            col[b]
                .abs()
                .partial_cmp(&col[a].abs())
                .unwrap_or(std::cmp::Ordering::Equal)
                .then(a.cmp(&b))
        });
        // total accumulated in the same order so that a fraction of 1 keeps everything
        let total: f64 = order.iter().map(|&i| col[i] * col[i]).sum();
        if total == 0.0 {
            continue;
        }
        let target = energy_fraction * total;
        let mut kept = 0.0;
        for &i in &order {
            out[[i, j]] = col[i];
            kept += col[i] * col[i];
            if kept >= target {
                break;
            }
        }
    }
    out
}

/// Builds a symmetric nonnegative affinity from self-expression coefficients.
///
/// `c` is laid out so that column `j` holds the coefficients used to express
/// node `j`. Steps: zero the diagonal, threshold each column by energy,
/// symmetrize `(|C| + |C|^T) / 2`, and optionally smooth through the leading
/// `rank_multiplier * k + 1` singular directions.
pub fn build_affinity(
    c: ArrayView2<f64>,
    num_clusters: usize,
    config: &AffinityConfig,
) -> Result<AffinityMatrix> {
    config.validate()?;
    let n = c.nrows();
    if c.ncols() != n {
        return Err(Error::Shape(format!(
            "coefficient matrix must be square, got {:?}",
            c.dim()
        )));
    }
    if c.iter().any(|v| !v.is_finite()) {
        return Err(Error::numerical("self-expression coefficients"));
    }
    let mut c = c.to_owned();
    c.diag_mut().fill(0.0);
    if c.iter().all(|&v| v == 0.0) {
        return Err(Error::DegenerateCoefficients);
    }
    let kept = threshold_columns(c.view(), config.energy_fraction).mapv(f64::abs);
    let mut values = (&kept + &kept.t()) * 0.5;
    if config.smoothing {
        values = low_rank_smoothing(values.view(), num_clusters, config)?;
    }
    Ok(AffinityMatrix { values })
}

fn low_rank_smoothing(
    sym: ArrayView2<f64>,
    num_clusters: usize,
    config: &AffinityConfig,
) -> Result<Array2<f64>> {
    let n = sym.nrows();
    let rank = (config.rank_multiplier * num_clusters + 1).min(n);
    let (eigenvalues, eigenvectors) = symmetric_eigen(sym)?;
    // singular directions of a symmetric matrix: eigenvectors by |eigenvalue|
    let mut idx: Vec<usize> = (0..n).collect();
    idx.sort_by(|&a, &b| {
        eigenvalues[b]
            .abs()
            .partial_cmp(&eigenvalues[a].abs())
            .unwrap_or(std::cmp::Ordering::Equal)
            .then(a.cmp(&b))
    });
    let mut basis = Array2::<f64>::zeros((n, rank));
    for (col, &e) in idx.iter().take(rank).enumerate() {
        let scale = eigenvalues[e].abs().sqrt();
        for i in 0..n {
            basis[[i, col]] = eigenvectors[[i, e]] * scale;
        }
    }
    for mut row in basis.rows_mut() {
        let norm = row.dot(&row).sqrt();
        if norm > 0.0 {
            row /= norm;
        }
    }
    let mut smoothed = basis.dot(&basis.t());
    smoothed.mapv_inplace(|v| if v > 0.0 { v.powf(config.power) } else { 0.0 });
    let max = smoothed.iter().copied().fold(0.0, f64::max);
    if max > 0.0 {
        smoothed /= max;
    }
    Ok((&smoothed + &smoothed.t()) * 0.5)
}

/// Full eigendecomposition of a symmetric matrix. Eigenvalues ascend;
/// eigenvectors are the columns of the returned matrix.
pub fn symmetric_eigen(m: ArrayView2<f64>) -> Result<(Array1<f64>, Array2<f64>)> {
    let n = m.nrows();
    let mat = faer::Mat::<f64>::from_fn(n, n, |i, j| m[[i, j]]);
    let evd = mat
        .self_adjoint_eigen(faer::Side::Lower)
        .map_err(|e| Error::Eigen(format!("{e:?}")))?;
    let s = evd.S().column_vector();
    let u = evd.U();
    let values = Array1::from_shape_fn(n, |i| s[i]);
    let vectors = Array2::from_shape_fn((n, n), |(i, j)| u[(i, j)]);
    if values.iter().chain(vectors.iter()).any(|v| !v.is_finite()) {
        return Err(Error::Eigen("non-finite eigenpairs".into()));
    }
    Ok((values, vectors))
}

/// Rows of the `k` leading eigenvectors of `D^-1/2 A D^-1/2` (equivalently the
/// `k` smallest of the symmetric normalized Laplacian), each row scaled to
/// unit length. Zero-degree nodes are given degree 1.
pub fn spectral_embedding(affinity: ArrayView2<f64>, k: usize) -> Result<Array2<f64>> {
    let n = affinity.nrows();
    let inv_sqrt: Array1<f64> = affinity
        .sum_axis(Axis(1))
        .mapv(|d| if d > 0.0 { 1.0 / d.sqrt() } else { 1.0 });
    let normalized = Array2::from_shape_fn((n, n), |(i, j)| {
        inv_sqrt[i] * affinity[[i, j]] * inv_sqrt[j]
    });
    let (_, vectors) = symmetric_eigen(normalized.view())?;
    let mut embedding = Array2::<f64>::zeros((n, k));
    for c in 0..k {
        embedding.column_mut(c).assign(&vectors.column(n - 1 - c));
    }
    for mut row in embedding.rows_mut() {
        let norm = row.dot(&row).sqrt();
        if norm > 0.0 {
            row /= norm;
        }
    }
    Ok(embedding)
}

/// Number of k-means restarts used inside spectral clustering.
pub const SPECTRAL_KMEANS_RESTARTS: usize = 10;

pub fn spectral_clustering(
    affinity: &AffinityMatrix,
    k: usize,
    seed: u64,
) -> Result<ClusterAssignment> {
    let n = affinity.values.nrows();
    if affinity.values.ncols() != n {
        return Err(Error::Shape("affinity must be square".into()));
    }
    if k == 0 || k > n {
        return Err(Error::Config(format!("cannot form {k} clusters from {n} nodes")));
    }
    if affinity.values.iter().any(|v| !v.is_finite() || *v < 0.0) {
        return Err(Error::numerical("affinity matrix"));
    }
    let embedding = spectral_embedding(affinity.values.view(), k)?;
    kmeans(embedding.view(), k, seed, SPECTRAL_KMEANS_RESTARTS)
}

/// Spectral clustering with the raw adjacency as the affinity.
pub fn spectral_baseline(adjacency: &Array2<u8>, k: usize, seed: u64) -> Result<ClusterAssignment> {
    let affinity = AffinityMatrix {
        values: adjacency.mapv(f64::from),
    };
    spectral_clustering(&affinity, k, seed)
}

#[derive(Debug, Clone)]
pub struct KMeansFit {
    pub assignment: ClusterAssignment,
    pub centroids: Array2<f64>,
    pub inertia: f64,
}

const KMEANS_MAX_ITER: usize = 300;

fn sq_dist(a: ndarray::ArrayView1<f64>, b: ndarray::ArrayView1<f64>) -> f64 {
    a.iter().zip(b.iter()).map(|(x, y)| (x - y) * (x - y)).sum()
}

fn plus_plus_seeds(points: ArrayView2<f64>, k: usize, rng: &mut ChaCha8Rng) -> Array2<f64> {
    let n = points.nrows();
    let mut centroids = Array2::<f64>::zeros((k, points.ncols()));
    let first = rng.gen_range(0..n);
    centroids.row_mut(0).assign(&points.row(first));
    let mut nearest: Vec<f64> = (0..n).map(|i| sq_dist(points.row(i), points.row(first))).collect();
    for c in 1..k {
        let total: f64 = nearest.iter().sum();
        let pick = if total > 0.0 {
            let mut target = rng.gen::<f64>() * total;
            let mut chosen = n - 1;
            for (i, &d) in nearest.iter().enumerate() {
                if target < d {
                    chosen = i;
                    break;
                }
                target -= d;
            }
            chosen
        } else {
            rng.gen_range(0..n)
        };
        centroids.row_mut(c).assign(&points.row(pick));
        for (i, d) in nearest.iter_mut().enumerate() {
            *d = d.min(sq_dist(points.row(i), points.row(pick)));
        }
    }
    centroids
}

fn lloyd(points: ArrayView2<f64>, mut centroids: Array2<f64>) -> KMeansFit {
    let (n, m) = points.dim();
    let k = centroids.nrows();
    let mut labels = vec![usize::MAX; n];
    let mut dists = vec![0.0; n];
    for _ in 0..KMEANS_MAX_ITER {
        let mut changed = false;
        for i in 0..n {
            let (best, d) = (0..k)
                .map(|c| (c, sq_dist(points.row(i), centroids.row(c))))
                .fold((0, f64::INFINITY), |acc, x| if x.1 < acc.1 { x } else { acc });
            dists[i] = d;
            if labels[i] != best {
                labels[i] = best;
                changed = true;
            }
        }
        if !changed {
            break;
        }
        let mut sums = Array2::<f64>::zeros((k, m));
        let mut counts = vec![0usize; k];
        for i in 0..n {
            sums.row_mut(labels[i]).scaled_add(1.0, &points.row(i));
            counts[labels[i]] += 1;
        }
        let mut taken: Vec<usize> = Vec::new();
        for c in 0..k {
            if counts[c] > 0 {
                centroids
                    .row_mut(c)
                    .assign(&(&sums.row(c) / counts[c] as f64));
            } else {
                // empty cluster: move it onto the point worst served by its centroid
                let far = (0..n)
                    .filter(|i| !taken.contains(i))
                    .fold(None, |acc: Option<usize>, i| match acc {
                        Some(b) if dists[b] >= dists[i] => Some(b),
                        _ => Some(i),
                    });
                if let Some(far) = far {
                    taken.push(far);
                    centroids.row_mut(c).assign(&points.row(far));
                    dists[far] = 0.0;
                }
            }
        }
    }
    let inertia = (0..n)
        .map(|i| sq_dist(points.row(i), centroids.row(labels[i])))
        .sum();
    KMeansFit {
        assignment: ClusterAssignment {
            labels,
            num_clusters: k,
        },
        centroids,
        inertia,
    }
}

/// Lloyd's algorithm from k-means++ seeds, best of `restarts` runs by
/// within-cluster sum of squares.
pub fn kmeans_fit(points: ArrayView2<f64>, k: usize, seed: u64, restarts: usize) -> Result<KMeansFit> {
    let n = points.nrows();
    if k == 0 || k > n {
        return Err(Error::Config(format!("cannot form {k} clusters from {n} points")));
    }
    if points.iter().any(|v| !v.is_finite()) {
        return Err(Error::numerical("k-means input"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut best: Option<KMeansFit> = None;
    for _ in 0..restarts.max(1) {
        let seeds = plus_plus_seeds(points, k, &mut rng);
        let fit = lloyd(points, seeds);
        if best.as_ref().is_none_or(|b| fit.inertia < b.inertia) {
            best = Some(fit);
        }
    }
    Ok(best.expect("at least one restart"))
}

pub fn kmeans(points: ArrayView2<f64>, k: usize, seed: u64, restarts: usize) -> Result<ClusterAssignment> {
    Ok(kmeans_fit(points, k, seed, restarts)?.assignment)
}
