//! Multinomial softmax regression trained by full-batch gradient descent.

use serde::{Deserialize, Serialize};

use crate::data::Matrix;
use crate::par;
use crate::{Error, Result};

/// Rows per gradient chunk. Chunk partial sums are reduced in a fixed order,
/// so parallel and sequential training agree bit for bit.
const CHUNK: usize = 512;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LogisticParams {
    pub iterations: usize,
    pub learning_rate: f64,
    pub l2: f64,
}

impl Default for LogisticParams {
    fn default() -> Self {
        Self {
            iterations: 500,
            learning_rate: 0.1,
            l2: 1e-4,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LogisticModel {
    pub n_features: usize,
    pub n_classes: usize,
    /// `n_classes × (n_features + 1)` row-major; the last entry of each row
    /// is the bias.
    pub weights: Vec<f64>,
    pub final_loss: f64,
}

fn softmax_in_place(z: &mut [f64]) {
    let max = z.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut sum = 0.0;
    for v in z.iter_mut() {
        *v = (*v - max).exp();
        sum += *v;
    }
    for v in z.iter_mut() {
        *v /= sum;
    }
}

fn logits(w: &[f64], x: &[f64], n_classes: usize, out: &mut [f64]) {
    let stride = x.len() + 1;
    for (c, o) in out.iter_mut().enumerate().take(n_classes) {
        let row = &w[c * stride..(c + 1) * stride];
        *o = row[..x.len()].iter().zip(x).map(|(a, b)| a * b).sum::<f64>() + row[x.len()];
    }
}

/// Mean cross-entropy plus `l2/2 · ‖W‖²` (biases excluded) and its gradient.
pub fn loss_and_gradient(
    weights: &[f64],
    x: &Matrix,
    y: &[usize],
    n_classes: usize,
    l2: f64,
) -> Result<(f64, Vec<f64>)> {
    loss_and_gradient_with(weights, x, y, n_classes, l2, par::parallel_available())
}

pub fn loss_and_gradient_with(
    weights: &[f64],
    x: &Matrix,
    y: &[usize],
    n_classes: usize,
    l2: f64,
    parallel: bool,
) -> Result<(f64, Vec<f64>)> {
    let (n, d) = (x.rows(), x.cols());
    let stride = d + 1;
    if weights.len() != n_classes * stride {
        return Err(Error::LengthMismatch {
            left: weights.len(),
            right: n_classes * stride,
        });
    }
    if y.len() != n {
        return Err(Error::LengthMismatch { left: y.len(), right: n });
    }
    if n == 0 {
        return Err(Error::InvalidArgument("empty training matrix".into()));
    }
    let n_chunks = n.div_ceil(CHUNK);
    let partials = par::map_range(n_chunks, parallel, |k| {
        let mut grad = vec![0.0; weights.len()];
        let mut loss = 0.0;
        let mut p = vec![0.0; n_classes];
        for r in k * CHUNK..((k + 1) * CHUNK).min(n) {
            let row = x.row(r);
            logits(weights, row, n_classes, &mut p);
            softmax_in_place(&mut p);
            loss -= p[y[r]].max(f64::MIN_POSITIVE).ln();
            for c in 0..n_classes {
                let e = p[c] - if c == y[r] { 1.0 } else { 0.0 };
                let g = &mut grad[c * stride..(c + 1) * stride];
                for (gj, xj) in g[..d].iter_mut().zip(row) {
                    *gj += e * xj;
                }
                g[d] += e;
            }
        }
        (loss, grad)
    });
    let mut loss = 0.0;
    let mut grad = vec![0.0; weights.len()];
    for (l, g) in partials {
        loss += l;
        for (a, b) in grad.iter_mut().zip(g) {
            *a += b;
        }
    }
    let inv = 1.0 / n as f64;
    loss *= inv;
    grad.iter_mut().for_each(|g| *g *= inv);
    for c in 0..n_classes {
        for j in 0..d {
            let w = weights[c * stride + j];
            loss += 0.5 * l2 * w * w;
            grad[c * stride + j] += l2 * w;
        }
    }
    Ok((loss, grad))
}

/// Fits from zero weights, so the result does not depend on any seed.
pub fn train_logistic(
    x: &Matrix,
    y: &[usize],
    n_classes: usize,
    params: &LogisticParams,
) -> Result<LogisticModel> {
    train_logistic_with(x, y, n_classes, params, par::parallel_available())
}

pub fn train_logistic_with(
    x: &Matrix,
    y: &[usize],
    n_classes: usize,
    params: &LogisticParams,
    parallel: bool,
) -> Result<LogisticModel> {
    if n_classes < 2 {
        return Err(Error::InvalidArgument("logistic regression needs at least two classes".into()));
    }
    let mut seen = vec![false; n_classes];
    for &t in y {
        if t >= n_classes {
            return Err(Error::InvalidArgument(format!("label {t} out of range")));
        }
        seen[t] = true;
    }
    if seen.iter().filter(|&&s| s).count() < 2 {
        return Err(Error::InvalidArgument(
            "training labels contain a single class".into(),
        ));
    }
    let mut w = vec![0.0; n_classes * (x.cols() + 1)];
    for _ in 0..params.iterations {
        let (_, g) = loss_and_gradient_with(&w, x, y, n_classes, params.l2, parallel)?;
        for (wi, gi) in w.iter_mut().zip(&g) {
            *wi -= params.learning_rate * gi;
        }
    }
    let (final_loss, _) = loss_and_gradient_with(&w, x, y, n_classes, params.l2, parallel)?;
    Ok(LogisticModel {
        n_features: x.cols(),
        n_classes,
        weights: w,
        final_loss,
    })
}

impl LogisticModel {
    pub fn predict_proba(&self, x: &Matrix) -> Result<Vec<Vec<f64>>> {
        if x.cols() != self.n_features {
            return Err(Error::LengthMismatch {
                left: x.cols(),
                right: self.n_features,
            });
        }
        Ok((0..x.rows())
            .map(|r| {
                let mut p = vec![0.0; self.n_classes];
                logits(&self.weights, x.row(r), self.n_classes, &mut p);
                softmax_in_place(&mut p);
                p
            })
            .collect())
    }
}
