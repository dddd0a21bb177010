//! Change scores from the α-relative Pearson divergence between adjacent
//! sample windows, estimated by relative unconstrained least-squares
//! importance fitting.

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrix::{squared_distance, Matrix};

const MAX_CENTERS: usize = 100;
const LAMBDAS: [f64; 5] = [1e-3, 1e-2, 1e-1, 1.0, 10.0];
const CV_FOLDS: usize = 5;

/// Divergence scores at sample positions of a signal.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoreSeries {
    pub positions: Vec<usize>,
    pub scores: Vec<f64>,
    /// Set where both windows were degenerate and the score was forced to 0.
    pub degenerate: Vec<bool>,
    pub n_samples: usize,
}

/// Estimate of `PE_α(P‖Q)` from samples `x ~ P` (numerator) and `y ~ Q`.
/// `None` when all pooled samples coincide and no kernel width exists.
pub fn relative_pearson(x: &Matrix, y: &Matrix, alpha: f64) -> Option<f64> {
    let sigma = bandwidth(x, y)?;
    let nx = x.rows();
    let n_centers = nx.min(MAX_CENTERS);
    let centers: Vec<&[f64]> = (0..n_centers).map(|i| x.row(i * nx / n_centers)).collect();

    let phi_x = design(x, &centers, sigma);
    let phi_y = design(y, &centers, sigma);

    let lambda = select_lambda(&phi_x, &phi_y, alpha);
    let theta = fit(&phi_x, &phi_y, alpha, lambda)?;

    let rx = phi_x.tr_mul(&theta);
    let ry = phi_y.tr_mul(&theta);
    let mean_rx = rx.mean();
    let mean_rx2 = rx.map(|v| v * v).mean();
    let mean_ry2 = ry.map(|v| v * v).mean();
    Some(mean_rx - 0.5 * alpha * mean_rx2 - 0.5 * (1.0 - alpha) * mean_ry2 - 0.5)
}

/// Median pairwise distance of the reference window, falling back to the
/// pooled windows when the reference window is constant.
fn bandwidth(x: &Matrix, y: &Matrix) -> Option<f64> {
    let med = median_pairwise(&[x]);
    if med > 0.0 {
        return Some(med);
    }
    let pooled = median_pairwise(&[x, y]);
    (pooled > 0.0).then_some(pooled)
}

fn median_pairwise(parts: &[&Matrix]) -> f64 {
    let rows: Vec<&[f64]> = parts.iter().flat_map(|m| m.iter_rows()).collect();
    let mut d = Vec::with_capacity(rows.len() * rows.len().saturating_sub(1) / 2);
    for i in 0..rows.len() {
        for j in i + 1..rows.len() {
            d.push(squared_distance(rows[i], rows[j]).sqrt());
        }
    }
    if d.is_empty() {
        return 0.0;
    }
    let mid = d.len() / 2;
    let (_, m, _) = d.select_nth_unstable_by(mid, f64::total_cmp);
    *m
}

/// Gaussian basis evaluations, `centers × samples`.
fn design(samples: &Matrix, centers: &[&[f64]], sigma: f64) -> DMatrix<f64> {
    let denom = 2.0 * sigma * sigma;
    DMatrix::from_fn(centers.len(), samples.rows(), |c, i| {
        (-squared_distance(samples.row(i), centers[c]) / denom).exp()
    })
}

/// Columns in fold `k` (`in_fold`) or outside it, folds assigned round-robin.
fn fold_columns(phi: &DMatrix<f64>, k: usize, folds: usize, in_fold: bool) -> DMatrix<f64> {
    let idx: Vec<usize> = (0..phi.ncols())
        .filter(|i| (i % folds == k) == in_fold)
        .collect();
    phi.select_columns(&idx)
}

fn moments(phi_x: &DMatrix<f64>, phi_y: &DMatrix<f64>, alpha: f64) -> (DMatrix<f64>, DVector<f64>) {
    let nx = phi_x.ncols() as f64;
    let ny = phi_y.ncols() as f64;
    let h_mat =
        phi_x * phi_x.transpose() * (alpha / nx) + phi_y * phi_y.transpose() * ((1.0 - alpha) / ny);
    let h_vec = phi_x.column_mean();
    (h_mat, h_vec)
}

fn solve_regularized(
    h_mat: &DMatrix<f64>,
    h_vec: &DVector<f64>,
    lambda: f64,
) -> Option<DVector<f64>> {
    let b = h_mat.nrows();
    let reg = h_mat + DMatrix::identity(b, b) * lambda;
    match reg.clone().cholesky() {
        Some(ch) => Some(ch.solve(h_vec)),
        None => reg.lu().solve(h_vec),
    }
}

fn fit(
    phi_x: &DMatrix<f64>,
    phi_y: &DMatrix<f64>,
    alpha: f64,
    lambda: f64,
) -> Option<DVector<f64>> {
    let (h_mat, h_vec) = moments(phi_x, phi_y, alpha);
    solve_regularized(&h_mat, &h_vec, lambda)
}

/// K-fold cross-validation of the least-squares objective
/// `½ θᵀĤθ − ĥᵀθ` on held-out samples.
fn select_lambda(phi_x: &DMatrix<f64>, phi_y: &DMatrix<f64>, alpha: f64) -> f64 {
    let folds = CV_FOLDS.min(phi_x.ncols()).min(phi_y.ncols());
    if folds < 2 {
        return LAMBDAS[0];
    }
    let held_out: Vec<_> = (0..folds)
        .map(|k| {
            let test = moments(
                &fold_columns(phi_x, k, folds, true),
                &fold_columns(phi_y, k, folds, true),
                alpha,
            );
            let train = moments(
                &fold_columns(phi_x, k, folds, false),
                &fold_columns(phi_y, k, folds, false),
                alpha,
            );
            (train, test)
        })
        .collect();
    let mut best = (f64::INFINITY, LAMBDAS[0]);
    for &lambda in &LAMBDAS {
        let mut score = 0.0;
        for ((h_tr, h_vec_tr), (h_te, h_vec_te)) in &held_out {
            let Some(theta) = solve_regularized(h_tr, h_vec_tr, lambda) else {
                score = f64::INFINITY;
                break;
            };
            score += 0.5 * theta.dot(&(h_te * &theta)) - h_vec_te.dot(&theta);
        }
        if score < best.0 {
            best = (score, lambda);
        }
    }
    best.1
}

/// Symmetrized divergence `PE(X‖Y) + PE(Y‖X)` between the `window` samples
/// before and after each position, for positions `window, window + step, …`
/// while a full trailing window fits.
pub fn rulsif_scores(
    signal: &Matrix,
    alpha: f64,
    window: usize,
    step: usize,
) -> Result<ScoreSeries> {
    if !(0.0..1.0).contains(&alpha) {
        return Err(Error::invalid("alpha", format!("{alpha} not in [0, 1)")));
    }
    if window < 2 {
        return Err(Error::invalid(
            "rulsif_window",
            "must be at least 2 samples",
        ));
    }
    if step == 0 {
        return Err(Error::invalid("rulsif_step", "must be positive"));
    }
    let n = signal.rows();
    if n < 2 * window {
        return Err(Error::SignalTooShort {
            n,
            required: 2 * window,
        });
    }
    if !signal.all_finite() {
        return Err(Error::NonFinite("signal".into()));
    }
    let positions: Vec<usize> = (window..=n - window).step_by(step).collect();
    let results: Vec<Option<f64>> = positions
        .par_iter()
        .map(|&p| {
            let before = signal.slice_rows(p - window, p);
            let after = signal.slice_rows(p, p + window);
            let forward = relative_pearson(&before, &after, alpha)?;
            let backward = relative_pearson(&after, &before, alpha)?;
            Some(forward + backward)
        })
        .collect();
    Ok(ScoreSeries {
        positions,
        scores: results.iter().map(|r| r.unwrap_or(0.0)).collect(),
        degenerate: results.iter().map(Option::is_none).collect(),
        n_samples: n,
    })
}
