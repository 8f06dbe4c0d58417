//! Full-batch gradient descent on the mean logistic loss.

use serde::{Deserialize, Serialize};

use crate::data::Dataset;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LogisticModel {
    pub mean: Vec<f64>,
    pub scale: Vec<f64>,
    pub weights: Vec<f64>,
    pub bias: f64,
}

impl LogisticModel {
    pub fn score(&self, x: &[f64]) -> f64 {
        let z = self.bias
            + self
                .weights
                .iter()
                .zip(x)
                .zip(self.mean.iter().zip(&self.scale))
                .map(|((w, v), (m, s))| w * (v - m) / s)
                .sum::<f64>();
        sigmoid(z)
    }
}

pub fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

/// `log(1 + e^z)` without overflow.
fn softplus(z: f64) -> f64 {
    if z > 0.0 {
        z + (-z).exp().ln_1p()
    } else {
        z.exp().ln_1p()
    }
}

/// Mean logistic loss and its gradient at `params = [w_0, .., w_{d-1}, b]`
/// for row-major features `x` (`labels.len()` rows of width `d`).
pub fn loss_and_gradient(params: &[f64], x: &[f64], labels: &[u8], d: usize) -> (f64, Vec<f64>) {
    let m = labels.len() as f64;
    let (w, b) = params.split_at(d);
    let mut grad = vec![0.0; d + 1];
    let mut loss = 0.0;
    for (row, &y) in x.chunks_exact(d).zip(labels) {
        let z = b[0] + w.iter().zip(row).map(|(a, v)| a * v).sum::<f64>();
        let y = y as f64;
        loss += softplus(z) - y * z;
        let r = sigmoid(z) - y;
        for (g, v) in grad[..d].iter_mut().zip(row) {
            *g += r * v;
        }
        grad[d] += r;
    }
    for g in &mut grad {
        *g /= m;
    }
    (loss / m, grad)
}

fn loss_only(params: &[f64], x: &[f64], labels: &[u8], d: usize) -> f64 {
    let (w, b) = params.split_at(d);
    let total: f64 = x
        .chunks_exact(d)
        .zip(labels)
        .map(|(row, &y)| {
            let z = b[0] + w.iter().zip(row).map(|(a, v)| a * v).sum::<f64>();
            softplus(z) - y as f64 * z
        })
        .sum();
    total / labels.len() as f64
}

#[derive(Debug, Clone, Copy)]
pub(crate) struct GdParams {
    pub learning_rate: f64,
    pub iterations: usize,
    pub tolerance: f64,
}

/// Standardizes features on `rows`, then runs gradient descent. The step
/// starts at `learning_rate` and is halved until the Armijo condition holds,
/// so a too-large rate cannot make the loss increase.
pub(crate) fn fit(ds: &Dataset, rows: &[usize], params: GdParams) -> LogisticModel {
    let d = ds.n_features();
    let m = rows.len() as f64;

    let mut mean = vec![0.0; d];
    for &i in rows {
        for (acc, v) in mean.iter_mut().zip(ds.row(i).features()) {
            *acc += v;
        }
    }
    mean.iter_mut().for_each(|v| *v /= m);
    let mut scale = vec![0.0; d];
    for &i in rows {
        for ((acc, v), mu) in scale.iter_mut().zip(ds.row(i).features()).zip(&mean) {
            *acc += (v - mu) * (v - mu);
        }
    }
    for s in &mut scale {
        *s = (*s / m).sqrt();
        if !(*s > 1e-12) {
            *s = 1.0;
        }
    }

    let mut x = Vec::with_capacity(rows.len() * d);
    let mut labels = Vec::with_capacity(rows.len());
    for &i in rows {
        let row = ds.row(i);
        x.extend(
            row.features()
                .iter()
                .zip(mean.iter().zip(&scale))
                .map(|(v, (mu, s))| (v - mu) / s),
        );
        labels.push(row.label());
    }

    let mut theta = vec![0.0; d + 1];
    let mut step = params.learning_rate;
    let (mut loss, mut grad) = loss_and_gradient(&theta, &x, &labels, d);
    let mut candidate = vec![0.0; d + 1];
    for _ in 0..params.iterations {
        let gnorm2: f64 = grad.iter().map(|g| g * g).sum();
        if gnorm2.sqrt() < params.tolerance {
            break;
        }
        let mut accepted = false;
        while step > 1e-12 {
            for ((c, t), g) in candidate.iter_mut().zip(&theta).zip(&grad) {
                *c = t - step * g;
            }
            let new_loss = loss_only(&candidate, &x, &labels, d);
            if new_loss <= loss - 1e-4 * step * gnorm2 {
                accepted = true;
                break;
            }
            step *= 0.5;
        }
        if !accepted {
            break;
        }
        std::mem::swap(&mut theta, &mut candidate);
        (loss, grad) = loss_and_gradient(&theta, &x, &labels, d);
        step = (step * 2.0).min(params.learning_rate);
    }

    let bias = theta[d];
    theta.truncate(d);
    LogisticModel {
        mean,
        scale,
        weights: theta,
        bias,
    }
}
