//! RBF-kernel support vector classifier trained by SMO with second-order
//! working-set selection.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrix::{squared_distance, Matrix};

pub const KKT_TOLERANCE: f64 = 1e-3;
const TAU: f64 = 1e-12;
/// Training sets above this size would need a kernel cache.
pub const MAX_TRAINING_ROWS: usize = 8000;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SvmParams {
    pub c: f64,
    /// `None` picks `1 / (d · var)` over all feature values.
    pub gamma: Option<f64>,
}

impl Default for SvmParams {
    fn default() -> Self {
        Self {
            c: 1.0,
            gamma: None,
        }
    }
}

pub fn default_gamma(x: &Matrix) -> f64 {
    let vals = x.as_slice();
    let n = vals.len() as f64;
    let mean = vals.iter().sum::<f64>() / n;
    let var = vals.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
    if var > 0.0 && var.is_finite() {
        1.0 / (x.cols() as f64 * var)
    } else {
        1.0
    }
}

/// One two-class machine: `f(x) = Σ coef_i K(sv_i, x) − rho`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BinarySvm {
    support: Matrix,
    coef: Vec<f64>,
    rho: f64,
    gamma: f64,
}

impl BinarySvm {
    pub fn decision(&self, row: &[f64]) -> f64 {
        let mut s = -self.rho;
        for (i, c) in self.coef.iter().enumerate() {
            s += c * (-self.gamma * squared_distance(self.support.row(i), row)).exp();
        }
        s
    }

    pub fn n_support(&self) -> usize {
        self.coef.len()
    }

    /// `y` holds ±1 labels.
    pub fn train(x: &Matrix, y: &[f64], c: f64, gamma: f64) -> Result<Self> {
        let m = x.rows();
        if m > MAX_TRAINING_ROWS {
            return Err(Error::SizeLimit {
                n: m,
                limit: MAX_TRAINING_ROWS,
            });
        }
        let mut k = vec![0.0; m * m];
        for i in 0..m {
            k[i * m + i] = 1.0;
            for j in 0..i {
                let v = (-gamma * squared_distance(x.row(i), x.row(j))).exp();
                k[i * m + j] = v;
                k[j * m + i] = v;
            }
        }
        let q = |i: usize, j: usize| y[i] * y[j] * k[i * m + j];
        let mut alpha = vec![0.0; m];
        let mut grad = vec![-1.0; m];
        let up = |a: f64, yt: f64| (yt > 0.0 && a < c) || (yt < 0.0 && a > 0.0);
        let low = |a: f64, yt: f64| (yt > 0.0 && a > 0.0) || (yt < 0.0 && a < c);
        let max_iter = (100 * m).max(10_000_000);
        let mut iter = 0;
        loop {
            let mut gmax = f64::NEG_INFINITY;
            let mut i = usize::MAX;
            for t in 0..m {
                if up(alpha[t], y[t]) && -y[t] * grad[t] >= gmax {
                    if -y[t] * grad[t] > gmax {
                        i = t;
                    }
                    gmax = -y[t] * grad[t];
                }
            }
            let mut gmin = f64::INFINITY;
            let mut j = usize::MAX;
            let mut obj_min = f64::INFINITY;
            if i != usize::MAX {
                for t in 0..m {
                    if !low(alpha[t], y[t]) {
                        continue;
                    }
                    let v = -y[t] * grad[t];
                    gmin = gmin.min(v);
                    let b = gmax - v;
                    if b > 0.0 {
                        let mut a = k[i * m + i] + k[t * m + t] - 2.0 * y[i] * y[t] * q(i, t);
                        if a <= 0.0 {
                            a = TAU;
                        }
                        let obj = -(b * b) / a;
                        if obj < obj_min {
                            obj_min = obj;
                            j = t;
                        }
                    }
                }
            }
            if i == usize::MAX || j == usize::MAX || gmax - gmin < KKT_TOLERANCE {
                break;
            }
            iter += 1;
            if iter > max_iter {
                return Err(Error::Numerical("SMO did not converge".into()));
            }
            let (ai_old, aj_old) = (alpha[i], alpha[j]);
            if y[i] != y[j] {
                let mut quad = q(i, i) + q(j, j) + 2.0 * q(i, j);
                if quad <= 0.0 {
                    quad = TAU;
                }
                let delta = (-grad[i] - grad[j]) / quad;
                let diff = alpha[i] - alpha[j];
                alpha[i] += delta;
                alpha[j] += delta;
                if diff > 0.0 {
                    if alpha[j] < 0.0 {
                        alpha[j] = 0.0;
                        alpha[i] = diff;
                    }
                } else if alpha[i] < 0.0 {
                    alpha[i] = 0.0;
                    alpha[j] = -diff;
                }
                if diff > 0.0 {
                    if alpha[i] > c {
                        alpha[i] = c;
                        alpha[j] = c - diff;
                    }
                } else if alpha[j] > c {
                    alpha[j] = c;
                    alpha[i] = c + diff;
                }
            } else {
                let mut quad = q(i, i) + q(j, j) - 2.0 * q(i, j);
                if quad <= 0.0 {
                    quad = TAU;
                }
                let delta = (grad[i] - grad[j]) / quad;
                let sum = alpha[i] + alpha[j];
                alpha[i] -= delta;
                alpha[j] += delta;
                if sum > c {
                    if alpha[i] > c {
                        alpha[i] = c;
                        alpha[j] = sum - c;
                    }
                } else if alpha[j] < 0.0 {
                    alpha[j] = 0.0;
                    alpha[i] = sum;
                }
                if sum > c {
                    if alpha[j] > c {
                        alpha[j] = c;
                        alpha[i] = sum - c;
                    }
                } else if alpha[i] < 0.0 {
                    alpha[i] = 0.0;
                    alpha[j] = sum;
                }
            }
            let (di, dj) = (alpha[i] - ai_old, alpha[j] - aj_old);
            for (t, g) in grad.iter_mut().enumerate() {
                *g += q(t, i) * di + q(t, j) * dj;
            }
        }

        // Offset: average over free vectors, else midpoint of the bounds.
        let (mut ub, mut lb, mut sum, mut n_free) = (f64::INFINITY, f64::NEG_INFINITY, 0.0, 0);
        for t in 0..m {
            let yg = y[t] * grad[t];
            if alpha[t] >= c {
                if y[t] < 0.0 {
                    ub = ub.min(yg);
                } else {
                    lb = lb.max(yg);
                }
            } else if alpha[t] <= 0.0 {
                if y[t] > 0.0 {
                    ub = ub.min(yg);
                } else {
                    lb = lb.max(yg);
                }
            } else {
                n_free += 1;
                sum += yg;
            }
        }
        let rho = if n_free > 0 {
            sum / n_free as f64
        } else {
            0.5 * (ub + lb)
        };

        let sv: Vec<usize> = (0..m).filter(|&t| alpha[t] > 0.0).collect();
        Ok(Self {
            support: x.select_rows(&sv),
            coef: sv.iter().map(|&t| y[t] * alpha[t]).collect(),
            rho,
            gamma,
        })
    }
}

/// Two-class machine, or one-vs-rest machines when more classes occur.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SvmModel {
    classes: Vec<u8>,
    machines: Vec<BinarySvm>,
}

impl SvmModel {
    /// `targets` must contain at least two distinct classes.
    pub fn train(params: &SvmParams, x: &Matrix, targets: &[u8]) -> Result<Self> {
        if !x.all_finite() {
            return Err(Error::NonFinite("SVM training features".into()));
        }
        if params.c <= 0.0 || !params.c.is_finite() {
            return Err(Error::invalid("svm_c", "must be > 0"));
        }
        let gamma = params.gamma.unwrap_or_else(|| default_gamma(x));
        if gamma <= 0.0 || !gamma.is_finite() {
            return Err(Error::invalid("svm_gamma", "must be > 0"));
        }
        let mut classes: Vec<u8> = targets.to_vec();
        classes.sort_unstable();
        classes.dedup();
        if classes.len() < 2 {
            return Err(Error::invalid("targets", "need at least two classes"));
        }
        let positives: Vec<u8> = if classes.len() == 2 {
            vec![classes[1]]
        } else {
            classes.clone()
        };
        let machines = positives
            .iter()
            .map(|&p| {
                let y: Vec<f64> = targets
                    .iter()
                    .map(|&t| if t == p { 1.0 } else { -1.0 })
                    .collect();
                BinarySvm::train(x, &y, params.c, gamma)
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self { classes, machines })
    }

    pub fn predict(&self, row: &[f64]) -> u8 {
        if self.machines.len() == 1 {
            return if self.machines[0].decision(row) >= 0.0 {
                self.classes[1]
            } else {
                self.classes[0]
            };
        }
        let mut best = 0;
        let mut best_v = f64::NEG_INFINITY;
        for (k, mch) in self.machines.iter().enumerate() {
            let v = mch.decision(row);
            if v > best_v {
                best_v = v;
                best = k;
            }
        }
        self.classes[best]
    }

    pub fn machines(&self) -> &[BinarySvm] {
        &self.machines
    }
}
