use serde::{Deserialize, Serialize};

use crate::matrix::Matrix;

/// Segment cost model for penalized segmentation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CostFunction {
    /// Sum of squared deviations from the segment mean.
    #[default]
    L2,
}

/// Kernel used by kernel change-point detection.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Kernel {
    #[default]
    Linear,
}

/// Additive cost of the half-open segment `[start, end)`.
pub trait SegmentCost {
    fn n_samples(&self) -> usize;
    fn cost(&self, start: usize, end: usize) -> f64;
}

fn centered(signal: &Matrix) -> Matrix {
    let means = signal.column_means();
    let mut out = signal.clone();
    for r in 0..out.rows() {
        for (v, m) in out.row_mut(r).iter_mut().zip(&means) {
            *v -= m;
        }
    }
    out
}

/// Per-dimension prefix sums of `x` and `x²`. The signal is centered on its
/// global mean first so the running sums stay small.
pub struct L2Cost {
    n: usize,
    dims: usize,
    s1: Vec<f64>,
    s2: Vec<f64>,
}

impl L2Cost {
    pub fn new(signal: &Matrix) -> Self {
        let x = centered(signal);
        let (n, dims) = (x.rows(), x.cols());
        let mut s1 = vec![0.0; (n + 1) * dims];
        let mut s2 = vec![0.0; (n + 1) * dims];
        for t in 0..n {
            for d in 0..dims {
                let v = x.get(t, d);
                s1[(t + 1) * dims + d] = s1[t * dims + d] + v;
                s2[(t + 1) * dims + d] = s2[t * dims + d] + v * v;
            }
        }
        Self { n, dims, s1, s2 }
    }
}

impl SegmentCost for L2Cost {
    fn n_samples(&self) -> usize {
        self.n
    }

    #[inline]
    fn cost(&self, start: usize, end: usize) -> f64 {
        let len = (end - start) as f64;
        let mut c = 0.0;
        for d in 0..self.dims {
            let a = self.s1[end * self.dims + d] - self.s1[start * self.dims + d];
            let b = self.s2[end * self.dims + d] - self.s2[start * self.dims + d];
            c += b - a * a / len;
        }
        c.max(0.0)
    }
}

/// Kernel segment cost `Σ k(xᵢ,xᵢ) − (1/len) Σᵢⱼ k(xᵢ,xⱼ)`. For the linear
/// kernel the double sum is `‖Σ φ(xᵢ)‖²` with the identity feature map, so it
/// is computed from prefix sums of the Gram diagonal and of the feature vectors.
pub struct KernelCost {
    n: usize,
    dims: usize,
    diag: Vec<f64>,
    feat: Vec<f64>,
}

impl KernelCost {
    pub fn new(signal: &Matrix, kernel: Kernel) -> Self {
        let x = centered(signal);
        let (n, dims) = (x.rows(), x.cols());
        let mut diag = vec![0.0; n + 1];
        let mut feat = vec![0.0; (n + 1) * dims];
        for t in 0..n {
            let row = x.row(t);
            let k_tt = match kernel {
                Kernel::Linear => crate::matrix::dot(row, row),
            };
            diag[t + 1] = diag[t] + k_tt;
            for d in 0..dims {
                feat[(t + 1) * dims + d] = feat[t * dims + d] + row[d];
            }
        }
        Self {
            n,
            dims,
            diag,
            feat,
        }
    }
}

impl SegmentCost for KernelCost {
    fn n_samples(&self) -> usize {
        self.n
    }

    #[inline]
    fn cost(&self, start: usize, end: usize) -> f64 {
        let len = (end - start) as f64;
        let mut gram_sum = 0.0;
        for d in 0..self.dims {
            let s = self.feat[end * self.dims + d] - self.feat[start * self.dims + d];
            gram_sum += s * s;
        }
        (self.diag[end] - self.diag[start] - gram_sum / len).max(0.0)
    }
}
