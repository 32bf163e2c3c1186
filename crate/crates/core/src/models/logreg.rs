//! Multinomial (softmax) logistic regression fit by full-batch gradient
//! descent on mean cross-entropy plus an L2 penalty on the weights.

use serde::{Deserialize, Serialize};

use super::LogRegParams;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LogisticRegression {
    pub n_features: usize,
    pub n_classes: usize,
    /// Row-major `n_classes x n_features`.
    pub weights: Vec<f64>,
    pub bias: Vec<f64>,
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

fn logits(params: &[f64], d: usize, k: usize, x: &[f64], out: &mut [f64]) {
    let (w, b) = params.split_at(k * d);
    for c in 0..k {
        let row = &w[c * d..(c + 1) * d];
        out[c] = b[c] + row.iter().zip(x).map(|(a, v)| a * v).sum::<f64>();
    }
}

/// Objective and gradient at `params = [weights (row-major), bias]`:
///
/// `L = -(1/n) sum_i log p(y_i | x_i) + (l2/2) ||W||^2`
///
/// with gradient `(1/n) sum_i (p_i - onehot(y_i)) x_i^T + l2 W` for the
/// weights and `(1/n) sum_i (p_i - onehot(y_i))` for the bias.
pub fn loss_and_gradient(x: &[Vec<f64>], y: &[usize], k: usize, params: &[f64], l2: f64) -> (f64, Vec<f64>) {
    let n = x.len();
    let d = x.first().map_or(0, Vec::len);
    debug_assert_eq!(params.len(), k * d + k);
    let mut grad = vec![0.0; params.len()];
    let mut z = vec![0.0; k];
    let mut loss = 0.0;
    for (xi, &yi) in x.iter().zip(y) {
        logits(params, d, k, xi, &mut z);
        let max = z.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let lse = max + z.iter().map(|v| (v - max).exp()).sum::<f64>().ln();
        loss += lse - z[yi];
        softmax_in_place(&mut z);
        z[yi] -= 1.0;
        for c in 0..k {
            let r = z[c];
            if r == 0.0 {
                continue;
            }
            let row = &mut grad[c * d..(c + 1) * d];
            for (g, v) in row.iter_mut().zip(xi) {
                *g += r * v;
            }
            grad[k * d + c] += r;
        }
    }
    let inv_n = 1.0 / n as f64;
    loss *= inv_n;
    for g in grad.iter_mut() {
        *g *= inv_n;
    }
    let w = &params[..k * d];
    loss += 0.5 * l2 * w.iter().map(|v| v * v).sum::<f64>();
    for (g, v) in grad[..k * d].iter_mut().zip(w) {
        *g += l2 * v;
    }
    (loss, grad)
}

impl LogisticRegression {
    pub fn fit(x: &[Vec<f64>], y: &[usize], k: usize, p: &LogRegParams) -> Self {
        let d = x.first().map_or(0, Vec::len);
        let mut params = vec![0.0; k * d + k];
        for _ in 0..p.iterations {
            let (_, grad) = loss_and_gradient(x, y, k, &params, p.l2);
            for (w, g) in params.iter_mut().zip(&grad) {
                *w -= p.learning_rate * g;
            }
        }
        let bias = params.split_off(k * d);
        LogisticRegression {
            n_features: d,
            n_classes: k,
            weights: params,
            bias,
        }
    }

    pub fn params(&self) -> Vec<f64> {
        self.weights.iter().chain(&self.bias).copied().collect()
    }

    pub fn predict_into(&self, x: &[f64], out: &mut [f64]) {
        let (d, k) = (self.n_features, self.n_classes);
        for ((o, row), b) in out.iter_mut().zip(self.weights.chunks_exact(d)).zip(&self.bias) {
            *o = b + row.iter().zip(x).map(|(a, v)| a * v).sum::<f64>();
        }
        softmax_in_place(&mut out[..k]);
    }

    pub(super) fn is_consistent(&self, d: usize, k: usize) -> bool {
        self.n_features == d
            && self.n_classes == k
            && self.weights.len() == d * k
            && self.bias.len() == k
            && self.weights.iter().chain(&self.bias).all(|v| v.is_finite())
    }
}
