//! Unsupervised detection of micro-activity boundaries.
//!
//! Three detectors share one [`Segmentation`] output: [`pelt`] (exact
//! penalized DP with pruning, L2 cost), [`kernel_cpd`] (same DP over a
//! kernel-induced cost) and [`rulsif_scores`] + [`binarize_scores`]
//! (divergence scores thresholded by 1-d 2-means).

mod cost;
mod dp;
mod rulsif;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrix::Matrix;

pub use cost::{CostFunction, Kernel, KernelCost, L2Cost, SegmentCost};
pub use rulsif::{relative_pearson, rulsif_scores, ScoreSeries};

/// Largest signal accepted by [`brute_force_segment`].
pub const BRUTE_FORCE_LIMIT: usize = 2000;

/// Change indices of a signal; a boundary at `i` splits samples `i − 1` and `i`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Segmentation {
    pub boundaries: Vec<usize>,
    pub n_samples: usize,
}

impl Segmentation {
    pub fn new(
        boundaries: Vec<usize>,
        n_samples: usize,
        min_segment_length: usize,
    ) -> Result<Self> {
        let mut prev = 0;
        for &b in &boundaries {
            if b == 0 || b >= n_samples {
                return Err(Error::OutOfRange(format!(
                    "boundary {b} outside (0, {n_samples})"
                )));
            }
            if b <= prev && prev != 0 {
                return Err(Error::OutOfRange(
                    "boundaries not strictly increasing".into(),
                ));
            }
            if b - prev < min_segment_length {
                return Err(Error::OutOfRange(format!(
                    "segment [{prev}, {b}) shorter than {min_segment_length}"
                )));
            }
            prev = b;
        }
        if !boundaries.is_empty() && n_samples - prev < min_segment_length {
            return Err(Error::OutOfRange(format!(
                "segment [{prev}, {n_samples}) shorter than {min_segment_length}"
            )));
        }
        Ok(Self {
            boundaries,
            n_samples,
        })
    }

    /// A segmentation with no change points.
    pub fn single(n_samples: usize) -> Self {
        Self {
            boundaries: Vec::new(),
            n_samples,
        }
    }

    /// Half-open `[start, end)` sample spans of every segment.
    pub fn segments(&self) -> Vec<(usize, usize)> {
        let mut edges = Vec::with_capacity(self.boundaries.len() + 2);
        edges.push(0);
        edges.extend(&self.boundaries);
        edges.push(self.n_samples);
        edges.windows(2).map(|w| (w[0], w[1])).collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CpdAlgorithm {
    #[default]
    Pelt,
    Kernel,
    Rulsif,
}

impl std::str::FromStr for CpdAlgorithm {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "pelt" => Ok(Self::Pelt),
            "kernel" => Ok(Self::Kernel),
            "rulsif" => Ok(Self::Rulsif),
            other => Err(Error::invalid(
                "cpd_algorithm",
                format!("unknown `{other}`"),
            )),
        }
    }
}

impl std::fmt::Display for CpdAlgorithm {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Self::Pelt => "pelt",
            Self::Kernel => "kernel",
            Self::Rulsif => "rulsif",
        })
    }
}

/// Change-point detector settings. Window, step and minimum segment length
/// are in samples.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CpdConfig {
    pub algorithm: CpdAlgorithm,
    pub penalty: f64,
    pub alpha: f64,
    pub rulsif_window: usize,
    pub rulsif_step: usize,
    pub min_segment_length: usize,
}

impl Default for CpdConfig {
    fn default() -> Self {
        Self {
            algorithm: CpdAlgorithm::Pelt,
            penalty: 100.0,
            alpha: 0.01,
            rulsif_window: 200,
            rulsif_step: 50,
            min_segment_length: 100,
        }
    }
}

impl CpdConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.penalty >= 0.0 && self.penalty.is_finite()) {
            return Err(Error::invalid("penalty", "must be finite and ≥ 0"));
        }
        if !(0.0..1.0).contains(&self.alpha) {
            return Err(Error::invalid("alpha", "must lie in [0, 1)"));
        }
        if self.min_segment_length == 0 {
            return Err(Error::invalid("min_segment_length", "must be ≥ 1"));
        }
        if self.rulsif_window < 2 || self.rulsif_step == 0 {
            return Err(Error::invalid(
                "rulsif_window",
                "window ≥ 2 and step ≥ 1 required",
            ));
        }
        Ok(())
    }
}

fn check_signal(signal: &Matrix, penalty: f64, min_segment_length: usize) -> Result<()> {
    if !(penalty >= 0.0 && penalty.is_finite()) {
        return Err(Error::invalid(
            "penalty",
            format!("{penalty} must be finite and ≥ 0"),
        ));
    }
    if min_segment_length == 0 {
        return Err(Error::invalid("min_segment_length", "must be ≥ 1"));
    }
    let n = signal.rows();
    if n < 2 * min_segment_length || n == 0 {
        return Err(Error::SignalTooShort {
            n,
            required: (2 * min_segment_length).max(1),
        });
    }
    if !signal.all_finite() {
        return Err(Error::NonFinite("signal".into()));
    }
    Ok(())
}

/// Exact penalized segmentation with PELT pruning.
pub fn pelt(
    signal: &Matrix,
    penalty: f64,
    cost: CostFunction,
    min_segment_length: usize,
) -> Result<Segmentation> {
    check_signal(signal, penalty, min_segment_length)?;
    let boundaries = match cost {
        CostFunction::L2 => dp::solve(&L2Cost::new(signal), penalty, min_segment_length, true),
    };
    Ok(Segmentation {
        boundaries,
        n_samples: signal.rows(),
    })
}

/// Unpruned quadratic DP over the same objective as [`pelt`]; the reference
/// the pruned solver is checked against.
pub fn brute_force_segment(
    signal: &Matrix,
    penalty: f64,
    cost: CostFunction,
    min_segment_length: usize,
) -> Result<Segmentation> {
    if signal.rows() > BRUTE_FORCE_LIMIT {
        return Err(Error::SizeLimit {
            n: signal.rows(),
            limit: BRUTE_FORCE_LIMIT,
        });
    }
    check_signal(signal, penalty, min_segment_length)?;
    let boundaries = match cost {
        CostFunction::L2 => dp::solve(&L2Cost::new(signal), penalty, min_segment_length, false),
    };
    Ok(Segmentation {
        boundaries,
        n_samples: signal.rows(),
    })
}

/// Penalized kernel change-point detection solved by the exact DP.
pub fn kernel_cpd(
    signal: &Matrix,
    penalty: f64,
    kernel: Kernel,
    min_segment_length: usize,
) -> Result<Segmentation> {
    check_signal(signal, penalty, min_segment_length)?;
    let boundaries = dp::solve(
        &KernelCost::new(signal, kernel),
        penalty,
        min_segment_length,
        true,
    );
    Ok(Segmentation {
        boundaries,
        n_samples: signal.rows(),
    })
}

/// Splits score values into two clusters by exact 1-d 2-means, takes the
/// higher cluster as change candidates, and merges runs of candidates closer
/// than `min_segment_length` into their highest-scoring member.
pub fn binarize_scores(scores: &ScoreSeries, min_segment_length: usize) -> Result<Segmentation> {
    let n = scores.scores.len();
    if n < 2 {
        return Err(Error::EmptyInput("need at least 2 score points"));
    }
    if scores.positions.len() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            found: scores.positions.len(),
        });
    }
    let min_len = min_segment_length.max(1);
    let Some(threshold) = two_means_threshold(&scores.scores) else {
        return Ok(Segmentation::single(scores.n_samples));
    };

    let candidates: Vec<usize> = (0..n).filter(|&i| scores.scores[i] >= threshold).collect();
    let mut representatives = Vec::new();
    let mut group_best = candidates[0];
    for w in candidates.windows(2) {
        if scores.positions[w[1]] - scores.positions[w[0]] < min_len {
            if scores.scores[w[1]] > scores.scores[group_best] {
                group_best = w[1];
            }
        } else {
            representatives.push(group_best);
            group_best = w[1];
        }
    }
    representatives.push(group_best);

    // keep the strongest representatives that leave every segment ≥ min_len
    representatives.sort_by(|&a, &b| {
        scores.scores[b]
            .total_cmp(&scores.scores[a])
            .then(a.cmp(&b))
    });
    let total = scores.n_samples;
    let mut accepted: Vec<usize> = Vec::new();
    for i in representatives {
        let p = scores.positions[i];
        if p < min_len || p + min_len > total {
            continue;
        }
        if accepted.iter().all(|&q| p.abs_diff(q) >= min_len) {
            accepted.push(p);
        }
    }
    accepted.sort_unstable();
    Segmentation::new(accepted, total, min_len)
}

/// Lower bound of the high cluster of the optimal two-cluster split, or
/// `None` when all values coincide.
fn two_means_threshold(values: &[f64]) -> Option<f64> {
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let n = sorted.len();
    let mut prefix = vec![0.0; n + 1];
    let mut prefix_sq = vec![0.0; n + 1];
    for (i, v) in sorted.iter().enumerate() {
        prefix[i + 1] = prefix[i] + v;
        prefix_sq[i + 1] = prefix_sq[i] + v * v;
    }
    let sse = |a: usize, b: usize| {
        let s = prefix[b] - prefix[a];
        prefix_sq[b] - prefix_sq[a] - s * s / (b - a) as f64
    };
    let mut best: Option<(f64, usize)> = None;
    for i in 1..n {
        if sorted[i - 1] == sorted[i] {
            continue;
        }
        let total = sse(0, i) + sse(i, n);
        if best.is_none_or(|(b, _)| total < b) {
            best = Some((total, i));
        }
    }
    best.map(|(_, i)| sorted[i])
}

/// Absolute difference in the number of change points.
pub fn annotation_error(truth: &Segmentation, estimate: &Segmentation) -> usize {
    truth.boundaries.len().abs_diff(estimate.boundaries.len())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoundaryMae {
    pub seconds: f64,
    /// The estimate had no boundaries; distances were taken to the interval endpoints.
    pub empty_estimate: bool,
}

/// Mean over true boundaries of the distance (in seconds) to the nearest
/// estimated boundary.
pub fn boundary_mae(
    truth: &Segmentation,
    estimate: &Segmentation,
    rate_hz: f64,
) -> Result<BoundaryMae> {
    if truth.boundaries.is_empty() {
        return Err(Error::EmptyInput("truth segmentation has no boundaries"));
    }
    if truth.n_samples != estimate.n_samples {
        return Err(Error::DimensionMismatch {
            expected: truth.n_samples,
            found: estimate.n_samples,
        });
    }
    let empty = estimate.boundaries.is_empty();
    let reference: Vec<usize> = if empty {
        vec![0, estimate.n_samples]
    } else {
        estimate.boundaries.clone()
    };
    let total: usize = truth
        .boundaries
        .iter()
        .map(|&t| reference.iter().map(|&e| t.abs_diff(e)).min().unwrap())
        .sum();
    Ok(BoundaryMae {
        seconds: total as f64 / truth.boundaries.len() as f64 / rate_hz,
        empty_estimate: empty,
    })
}

/// Output of [`detect`]: the segmentation plus raw scores for RuLSIF.
#[derive(Debug, Clone, PartialEq)]
pub struct Detection {
    pub segmentation: Segmentation,
    pub scores: Option<ScoreSeries>,
}

/// Runs the configured detector.
pub fn detect(signal: &Matrix, config: &CpdConfig) -> Result<Detection> {
    config.validate()?;
    let m = config.min_segment_length;
    Ok(match config.algorithm {
        CpdAlgorithm::Pelt => Detection {
            segmentation: pelt(signal, config.penalty, CostFunction::L2, m)?,
            scores: None,
        },
        CpdAlgorithm::Kernel => Detection {
            segmentation: kernel_cpd(signal, config.penalty, Kernel::Linear, m)?,
            scores: None,
        },
        CpdAlgorithm::Rulsif => {
            let scores = rulsif_scores(
                signal,
                config.alpha,
                config.rulsif_window,
                config.rulsif_step,
            )?;
            Detection {
                segmentation: binarize_scores(&scores, m)?,
                scores: Some(scores),
            }
        }
    })
}
