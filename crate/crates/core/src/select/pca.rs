//! Principal component analysis via power iteration with deflation.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::data::{Dataset, Matrix};
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PcaOptions {
    pub max_iter: usize,
    /// Convergence when `‖Cv − λv‖ ≤ tol · trace(C)`.
    pub tol: f64,
    pub seed: u64,
}

impl Default for PcaOptions {
    fn default() -> Self {
        Self {
            max_iter: 50_000,
            tol: 1e-11,
            seed: 0,
        }
    }
}

/// Fitted projection.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Pca {
    pub feature_names: Vec<String>,
    pub mean: Vec<f64>,
    /// `k` unit vectors of length `d`, by decreasing eigenvalue.
    pub components: Vec<Vec<f64>>,
    /// All `d` eigenvalues of the sample covariance, non-increasing.
    pub eigenvalues: Vec<f64>,
    /// `eigenvalues / trace`, so the full list sums to one.
    pub explained_variance_ratio: Vec<f64>,
    pub total_variance: f64,
}

/// Sample covariance (divides by `n − 1`), row-major `d × d`.
pub(crate) fn covariance(m: &Matrix) -> (Vec<f64>, Vec<f64>) {
    let (n, d) = (m.rows(), m.cols());
    let mut mean = vec![0.0; d];
    for r in 0..n {
        for (acc, v) in mean.iter_mut().zip(m.row(r)) {
            *acc += v;
        }
    }
    for v in &mut mean {
        *v /= n as f64;
    }
    let mut cov = vec![0.0; d * d];
    let mut centered = vec![0.0; d];
    for r in 0..n {
        for (c, (x, mu)) in m.row(r).iter().zip(&mean).enumerate() {
            centered[c] = x - mu;
        }
        for i in 0..d {
            let ci = centered[i];
            for j in i..d {
                cov[i * d + j] += ci * centered[j];
            }
        }
    }
    let denom = (n.max(2) - 1) as f64;
    for i in 0..d {
        for j in i..d {
            let v = cov[i * d + j] / denom;
            cov[i * d + j] = v;
            cov[j * d + i] = v;
        }
    }
    (cov, mean)
}

fn mat_vec(a: &[f64], v: &[f64], out: &mut [f64]) {
    let d = v.len();
    for (i, o) in out.iter_mut().enumerate() {
        *o = a[i * d..(i + 1) * d].iter().zip(v).map(|(x, y)| x * y).sum();
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn normalize(v: &mut [f64]) -> f64 {
    let n = dot(v, v).sqrt();
    if n > 0.0 {
        v.iter_mut().for_each(|x| *x /= n);
    }
    n
}

fn orthogonalize(v: &mut [f64], basis: &[Vec<f64>]) {
    for b in basis {
        let p = dot(v, b);
        v.iter_mut().zip(b).for_each(|(x, y)| *x -= p * y);
    }
}

/// Eigen-decomposes a symmetric PSD matrix by repeated power iteration,
/// deflating each found pair. Returns all `d` pairs.
pub(crate) fn eigen_power(
    cov: &[f64],
    d: usize,
    opts: &PcaOptions,
) -> Result<(Vec<f64>, Vec<Vec<f64>>)> {
    let mut a = cov.to_vec();
    let trace: f64 = (0..d).map(|i| cov[i * d + i]).sum();
    let tol = opts.tol * trace.abs().max(f64::MIN_POSITIVE);
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let mut values = Vec::with_capacity(d);
    let mut vectors: Vec<Vec<f64>> = Vec::with_capacity(d);
    let mut w = vec![0.0; d];

    for comp in 0..d {
        let mut v: Vec<f64> = (0..d).map(|_| rng.random::<f64>() - 0.5).collect();
        orthogonalize(&mut v, &vectors);
        if normalize(&mut v) == 0.0 {
            v = vec![0.0; d];
            v[comp] = 1.0;
        }
        let mut lambda = 0.0;
        let mut residual = f64::INFINITY;
        for _ in 0..opts.max_iter {
            mat_vec(&a, &v, &mut w);
            orthogonalize(&mut w, &vectors);
            lambda = dot(&v, &w);
            residual = w
                .iter()
                .zip(&v)
                .map(|(x, y)| (x - lambda * y).powi(2))
                .sum::<f64>()
                .sqrt();
            if residual <= tol {
                break;
            }
            if normalize(&mut w) == 0.0 {
                // v lies in the null space of the deflated matrix
                lambda = 0.0;
                residual = 0.0;
                break;
            }
            std::mem::swap(&mut v, &mut w);
        }
        if residual > tol {
            return Err(Error::NonConvergence {
                component: comp,
                residual,
            });
        }
        // deterministic sign: largest-magnitude entry positive
        let pivot = v
            .iter()
            .copied()
            .fold(0.0f64, |m, x| if x.abs() > m.abs() { x } else { m });
        if pivot < 0.0 {
            v.iter_mut().for_each(|x| *x = -*x);
        }
        for i in 0..d {
            for j in 0..d {
                a[i * d + j] -= lambda * v[i] * v[j];
            }
        }
        values.push(lambda);
        vectors.push(v);
    }
    // power iteration yields magnitudes in decreasing order up to round-off
    let mut order: Vec<usize> = (0..d).collect();
    order.sort_by(|&i, &j| values[j].total_cmp(&values[i]));
    let values = order.iter().map(|&i| values[i]).collect();
    let vectors = order.iter().map(|&i| vectors[i].clone()).collect();
    Ok((values, vectors))
}

impl Pca {
    pub fn fit(d: &Dataset, k: usize, opts: &PcaOptions) -> Result<Pca> {
        let p = d.n_features();
        if k == 0 || k > p {
            return Err(Error::InvalidArgument(format!(
                "PCA needs 1 <= k <= {p}, got {k}"
            )));
        }
        if d.n_rows() < 2 {
            return Err(Error::InvalidArgument("PCA needs at least two rows".into()));
        }
        let (cov, mean) = covariance(d.matrix());
        let (eigenvalues, vectors) = eigen_power(&cov, p, opts)?;
        let total_variance: f64 = (0..p).map(|i| cov[i * p + i]).sum();
        let explained_variance_ratio = eigenvalues
            .iter()
            .map(|l| if total_variance > 0.0 { l / total_variance } else { 0.0 })
            .collect();
        Ok(Pca {
            feature_names: d.feature_names().to_vec(),
            mean,
            components: vectors.into_iter().take(k).collect(),
            eigenvalues,
            explained_variance_ratio,
            total_variance,
        })
    }

    pub fn k(&self) -> usize {
        self.components.len()
    }

    /// Projects rows of `d` (matched by feature name) onto the components.
    pub fn transform(&self, d: &Dataset) -> Result<Dataset> {
        let sub = d.select_features(&self.feature_names)?;
        let m = sub.matrix();
        let k = self.k();
        let mut out = Matrix::zeros(m.rows(), k);
        let mut centered = vec![0.0; self.mean.len()];
        for r in 0..m.rows() {
            for (c, (x, mu)) in m.row(r).iter().zip(&self.mean).enumerate() {
                centered[c] = x - mu;
            }
            for (j, comp) in self.components.iter().enumerate() {
                out.set(r, j, dot(&centered, comp));
            }
        }
        let names = (1..=k).map(|i| format!("PC{i}")).collect();
        Ok(sub.with_matrix(names, out))
    }
}

/// Fits on `d` and projects `d` onto its top `k` components.
pub fn pca_transform(d: &Dataset, k: usize) -> Result<(Dataset, Pca)> {
    let pca = Pca::fit(d, k, &PcaOptions::default())?;
    Ok((pca.transform(d)?, pca))
}
