use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrix::{dot, Matrix};

/// Eigen-decomposition of a symmetric matrix by cyclic Jacobi rotations.
/// Returns eigenvalues in descending order and the matching unit
/// eigenvectors as rows.
pub fn symmetric_eigen(a: &Matrix) -> (Vec<f64>, Matrix) {
    let p = a.rows();
    let mut m = a.clone();
    let mut v = Matrix::zeros(p, p);
    for i in 0..p {
        v.set(i, i, 1.0);
    }
    let scale: f64 = m.as_slice().iter().map(|x| x * x).sum::<f64>().sqrt();
    for _sweep in 0..100 {
        let off: f64 = (0..p)
            .flat_map(|i| (0..p).filter(move |&j| j != i).map(move |j| (i, j)))
            .map(|(i, j)| m.get(i, j).powi(2))
            .sum::<f64>()
            .sqrt();
        if off <= 1e-15 * scale || off == 0.0 {
            break;
        }
        for i in 0..p {
            for j in i + 1..p {
                let aij = m.get(i, j);
                if aij == 0.0 {
                    continue;
                }
                let theta = (m.get(j, j) - m.get(i, i)) / (2.0 * aij);
                let sgn = if theta >= 0.0 { 1.0 } else { -1.0 };
                let t = sgn / (theta.abs() + (theta * theta + 1.0).sqrt());
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..p {
                    let mki = m.get(k, i);
                    let mkj = m.get(k, j);
                    m.set(k, i, c * mki - s * mkj);
                    m.set(k, j, s * mki + c * mkj);
                }
                for k in 0..p {
                    let mik = m.get(i, k);
                    let mjk = m.get(j, k);
                    m.set(i, k, c * mik - s * mjk);
                    m.set(j, k, s * mik + c * mjk);
                }
                for k in 0..p {
                    let vki = v.get(k, i);
                    let vkj = v.get(k, j);
                    v.set(k, i, c * vki - s * vkj);
                    v.set(k, j, s * vki + c * vkj);
                }
            }
        }
    }
    let mut order: Vec<usize> = (0..p).collect();
    order.sort_by(|&x, &y| m.get(y, y).total_cmp(&m.get(x, x)).then(x.cmp(&y)));
    let values = order.iter().map(|&k| m.get(k, k)).collect();
    let mut vectors = Matrix::zeros(p, p);
    for (r, &k) in order.iter().enumerate() {
        for i in 0..p {
            vectors.set(r, i, v.get(i, k));
        }
    }
    (values, vectors)
}

/// Sample covariance (denominator `m − 1`) and column means.
pub fn covariance(rows: &Matrix) -> (Matrix, Vec<f64>) {
    let mean = rows.column_means();
    let p = rows.cols();
    let mut cov = Matrix::zeros(p, p);
    for row in rows.iter_rows() {
        for i in 0..p {
            let di = row[i] - mean[i];
            for j in i..p {
                let v = cov.get(i, j) + di * (row[j] - mean[j]);
                cov.set(i, j, v);
            }
        }
    }
    let denom = (rows.rows().max(2) - 1) as f64;
    for i in 0..p {
        for j in i..p {
            let v = cov.get(i, j) / denom;
            cov.set(i, j, v);
            cov.set(j, i, v);
        }
    }
    (cov, mean)
}

/// Linear projection onto the top-variance directions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Pca {
    pub mean: Vec<f64>,
    /// `d × p`, orthonormal rows in decreasing-variance order.
    pub components: Matrix,
    pub explained_variance: Vec<f64>,
    /// Fewer than `d` directions carry variance; the rest are zero-variance padding.
    pub rank_deficient: bool,
}

impl Pca {
    pub fn fit(rows: &Matrix, target_dim: usize) -> Result<Self> {
        let (m, p) = (rows.rows(), rows.cols());
        if target_dim == 0 {
            return Err(Error::invalid("target_dim", "must be ≥ 1"));
        }
        if p < target_dim {
            return Err(Error::invalid(
                "target_dim",
                format!("{target_dim} exceeds input dimension {p}"),
            ));
        }
        if m < target_dim + 1 {
            return Err(Error::SignalTooShort {
                n: m,
                required: target_dim + 1,
            });
        }
        if !rows.all_finite() {
            return Err(Error::NonFinite("reducer input".into()));
        }
        let (cov, mean) = covariance(rows);
        let (values, vectors) = symmetric_eigen(&cov);
        let top = values[0].max(0.0);
        let tol = 1e-12 * top.max(f64::MIN_POSITIVE) * p as f64;
        let rank = values.iter().filter(|&&v| v > tol).count();
        let mut components = Matrix::zeros(target_dim, p);
        for k in 0..target_dim {
            let row = vectors.row(k);
            // orient so the largest-magnitude coordinate is positive
            let pivot = row
                .iter()
                .enumerate()
                .fold((0, 0.0f64), |(bi, bv), (i, &v)| {
                    if v.abs() > bv.abs() {
                        (i, v)
                    } else {
                        (bi, bv)
                    }
                })
                .1;
            let sign = if pivot < 0.0 { -1.0 } else { 1.0 };
            for (i, &v) in row.iter().enumerate() {
                components.set(k, i, sign * v);
            }
        }
        Ok(Self {
            mean,
            components,
            explained_variance: values[..target_dim].iter().map(|v| v.max(0.0)).collect(),
            rank_deficient: rank < target_dim,
        })
    }

    pub fn input_dim(&self) -> usize {
        self.mean.len()
    }

    pub fn transform_row(&self, row: &[f64]) -> Vec<f64> {
        let centered: Vec<f64> = row.iter().zip(&self.mean).map(|(x, m)| x - m).collect();
        self.components
            .iter_rows()
            .map(|c| dot(c, &centered))
            .collect()
    }

    /// Maps reduced coordinates back to the input space.
    pub fn inverse_row(&self, reduced: &[f64]) -> Vec<f64> {
        let mut out = self.mean.clone();
        for (k, &z) in reduced.iter().enumerate() {
            for (o, c) in out.iter_mut().zip(self.components.row(k)) {
                *o += z * c;
            }
        }
        out
    }

    /// Total squared reconstruction error of `rows`.
    pub fn reconstruction_error(&self, rows: &Matrix) -> f64 {
        rows.iter_rows()
            .map(|r| {
                let back = self.inverse_row(&self.transform_row(r));
                crate::matrix::squared_distance(r, &back)
            })
            .sum()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn jacobi_diagonalizes_known_matrix() {
        let a = Matrix::from_rows(&[[2.0, 1.0], [1.0, 2.0]]).unwrap();
        let (vals, vecs) = symmetric_eigen(&a);
        assert!((vals[0] - 3.0).abs() < 1e-12 && (vals[1] - 1.0).abs() < 1e-12);
        let v0 = vecs.row(0);
        assert!((v0[0].abs() - v0[1].abs()).abs() < 1e-12);
    }

    #[test]
    fn affine_subspace_is_recovered_exactly() {
        // points on a 2-d plane embedded in 4-d plus an offset
        let rows: Vec<Vec<f64>> = (0..30)
            .map(|i| {
                let (s, t) = ((i as f64 * 0.7).sin() * 3.0, (i as f64 * 1.3).cos());
                vec![1.0 + s + t, 2.0 - s, 5.0 + 2.0 * t, -s + 0.5 * t]
            })
            .collect();
        let m = Matrix::from_rows(&rows).unwrap();
        let pca = Pca::fit(&m, 2).unwrap();
        assert!(pca.reconstruction_error(&m) < 1e-8);
        assert!(!pca.rank_deficient);
    }

    #[test]
    fn rank_deficiency_is_flagged() {
        let rows: Vec<[f64; 3]> = (0..10).map(|i| [i as f64, 2.0 * i as f64, 1.0]).collect();
        let pca = Pca::fit(&Matrix::from_rows(&rows).unwrap(), 2).unwrap();
        assert!(pca.rank_deficient);
        assert_eq!(pca.explained_variance[1], 0.0);
    }

    #[test]
    fn precondition_errors() {
        let m = Matrix::from_rows(&[[1.0, 2.0], [3.0, 4.0]]).unwrap();
        assert!(Pca::fit(&m, 2).is_err());
        assert!(Pca::fit(&m, 3).is_err());
    }

    #[test]
    fn sign_convention_largest_coordinate_positive() {
        let rows: Vec<[f64; 2]> = (0..20)
            .map(|i| [-(i as f64), 0.1 * ((i * 3) % 5) as f64])
            .collect();
        let pca = Pca::fit(&Matrix::from_rows(&rows).unwrap(), 2).unwrap();
        for c in pca.components.iter_rows() {
            let big = c
                .iter()
                .cloned()
                .fold(0.0f64, |a, v| if v.abs() > a.abs() { v } else { a });
            assert!(big > 0.0);
        }
    }
}
