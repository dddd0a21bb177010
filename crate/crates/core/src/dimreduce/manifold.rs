//! Neighbor-graph embedding in the style of UMAP: a fuzzy k-NN graph whose
//! layout is optimized by negative-sampling SGD on the graph cross-entropy.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::pca::Pca;
use crate::error::{Error, Result};
use crate::matrix::{squared_distance, Matrix};

// curve parameters for min_dist = 0.1, spread = 1
const CURVE_A: f64 = 1.576_943_460_405_378;
const CURVE_B: f64 = 0.895_060_878_123_8;
const NEGATIVE_SAMPLES: usize = 5;
const INIT_EXTENT: f64 = 10.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifold {
    anchors: Matrix,
    embedding: Matrix,
    n_neighbors: usize,
}

struct Neighborhood {
    indices: Vec<usize>,
    weights: Vec<f64>,
}

/// k nearest rows of `data` to `query`, skipping index `skip`; ties by index.
fn nearest(data: &Matrix, query: &[f64], k: usize, skip: Option<usize>) -> Vec<(usize, f64)> {
    let mut d: Vec<(usize, f64)> = (0..data.rows())
        .filter(|&j| Some(j) != skip)
        .map(|j| (j, squared_distance(data.row(j), query).sqrt()))
        .collect();
    d.sort_by(|a, b| a.1.total_cmp(&b.1).then(a.0.cmp(&b.0)));
    d.truncate(k);
    d
}

/// Membership strengths `exp(−(dᵢ − ρ)/σ)` with σ chosen so they sum to log₂ k.
fn memberships(dists: &[f64]) -> Vec<f64> {
    let k = dists.len();
    if k == 0 {
        return vec![];
    }
    let rho = dists.iter().copied().find(|&d| d > 0.0).unwrap_or(0.0);
    let target = (k as f64).log2().max(1e-3);
    let total = |sigma: f64| -> f64 {
        dists
            .iter()
            .map(|&d| (-((d - rho).max(0.0)) / sigma).exp())
            .sum()
    };
    let (mut lo, mut hi) = (0.0f64, f64::INFINITY);
    let mut sigma = 1.0;
    for _ in 0..64 {
        let s = total(sigma);
        if (s - target).abs() < 1e-5 {
            break;
        }
        if s > target {
            hi = sigma;
            sigma = (lo + hi) / 2.0;
        } else {
            lo = sigma;
            sigma = if hi.is_finite() {
                (lo + hi) / 2.0
            } else {
                sigma * 2.0
            };
        }
    }
    let mean_d = dists.iter().sum::<f64>() / k as f64;
    sigma = sigma.max(1e-3 * mean_d).max(f64::MIN_POSITIVE);
    dists
        .iter()
        .map(|&d| (-((d - rho).max(0.0)) / sigma).exp())
        .collect()
}

impl Manifold {
    pub fn fit(rows: &Matrix, target_dim: usize, n_neighbors: usize, seed: u64) -> Result<Self> {
        let m = rows.rows();
        if n_neighbors < 2 {
            return Err(Error::invalid("n_neighbors", "must be ≥ 2"));
        }
        if m < target_dim + 1 || m < 2 {
            return Err(Error::SignalTooShort {
                n: m,
                required: (target_dim + 1).max(2),
            });
        }
        if !rows.all_finite() {
            return Err(Error::NonFinite("reducer input".into()));
        }
        let k = n_neighbors.min(m - 1);

        // fuzzy graph, symmetrized by probabilistic union
        let mut graph = vec![std::collections::BTreeMap::<usize, f64>::new(); m];
        for (i, g) in graph.iter_mut().enumerate() {
            let nn = nearest(rows, rows.row(i), k, Some(i));
            let dists: Vec<f64> = nn.iter().map(|x| x.1).collect();
            for ((j, _), w) in nn.iter().zip(memberships(&dists)) {
                g.insert(*j, w);
            }
        }
        let mut edges: Vec<(usize, usize, f64)> = Vec::new();
        for i in 0..m {
            for (&j, &a) in &graph[i] {
                if j < i && graph[j].contains_key(&i) {
                    continue;
                }
                let b = graph[j].get(&i).copied().unwrap_or(0.0);
                let w = a + b - a * b;
                if w > 0.0 {
                    edges.push((i.min(j), i.max(j), w));
                }
            }
        }
        edges.sort_by_key(|e| (e.0, e.1));

        let mut embedding = initial_layout(rows, target_dim)?;
        optimize(&mut embedding, &edges, seed);
        Ok(Self {
            anchors: rows.clone(),
            embedding,
            n_neighbors: k,
        })
    }

    pub fn input_dim(&self) -> usize {
        self.anchors.cols()
    }

    pub fn target_dim(&self) -> usize {
        self.embedding.cols()
    }

    /// Places a row at the membership-weighted mean of its nearest anchors' coordinates.
    pub fn transform_row(&self, row: &[f64]) -> Vec<f64> {
        let nn = nearest(&self.anchors, row, self.n_neighbors, None);
        let hood = Neighborhood {
            weights: memberships(&nn.iter().map(|x| x.1).collect::<Vec<_>>()),
            indices: nn.iter().map(|x| x.0).collect(),
        };
        let total: f64 = hood.weights.iter().sum();
        let mut out = vec![0.0; self.target_dim()];
        for (&j, &w) in hood.indices.iter().zip(&hood.weights) {
            for (o, e) in out.iter_mut().zip(self.embedding.row(j)) {
                *o += w / total * e;
            }
        }
        out
    }

    pub fn embedding(&self) -> &Matrix {
        &self.embedding
    }
}

/// Variance-ordered linear layout rescaled to `[0, INIT_EXTENT]` per axis.
fn initial_layout(rows: &Matrix, target_dim: usize) -> Result<Matrix> {
    let dim = target_dim.min(rows.cols());
    let pca = Pca::fit(rows, dim)?;
    let mut out = Matrix::zeros(rows.rows(), target_dim);
    for (i, r) in rows.iter_rows().enumerate() {
        for (c, v) in pca.transform_row(r).into_iter().enumerate() {
            out.set(i, c, v);
        }
    }
    for c in 0..target_dim {
        let col = out.col_values(c);
        let lo = col.iter().cloned().fold(f64::INFINITY, f64::min);
        let hi = col.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let span = if hi > lo { hi - lo } else { 1.0 };
        for (i, v) in col.iter().enumerate() {
            out.set(i, c, (v - lo) / span * INIT_EXTENT);
        }
    }
    Ok(out)
}

fn optimize(embedding: &mut Matrix, edges: &[(usize, usize, f64)], seed: u64) {
    if edges.is_empty() {
        return;
    }
    let m = embedding.rows();
    let n_epochs = if m <= 10_000 { 200 } else { 100 };
    let max_w = edges.iter().map(|e| e.2).fold(0.0, f64::max);
    let every: Vec<f64> = edges.iter().map(|e| max_w / e.2).collect();
    let mut next = every.clone();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let dim = embedding.cols();
    let clip = |g: f64| g.clamp(-4.0, 4.0);
    for epoch in 0..n_epochs {
        let lr = 1.0 - epoch as f64 / n_epochs as f64;
        for (e, &(i, j, _)) in edges.iter().enumerate() {
            if next[e] > epoch as f64 + 1.0 {
                continue;
            }
            next[e] += every[e];
            for (a, b) in [(i, j), (j, i)] {
                let d2 = squared_distance(embedding.row(a), embedding.row(b));
                if d2 > 0.0 {
                    let coeff = -2.0 * CURVE_A * CURVE_B * d2.powf(CURVE_B - 1.0)
                        / (1.0 + CURVE_A * d2.powf(CURVE_B));
                    for c in 0..dim {
                        let diff = embedding.get(a, c) - embedding.get(b, c);
                        let g = clip(coeff * diff) * lr;
                        embedding.set(a, c, embedding.get(a, c) + g);
                    }
                }
                for _ in 0..NEGATIVE_SAMPLES {
                    let n = rng.random_range(0..m);
                    if n == a {
                        continue;
                    }
                    let d2 = squared_distance(embedding.row(a), embedding.row(n));
                    let coeff = 2.0 * CURVE_B / ((0.001 + d2) * (1.0 + CURVE_A * d2.powf(CURVE_B)));
                    for c in 0..dim {
                        let diff = embedding.get(a, c) - embedding.get(n, c);
                        let g = if coeff > 0.0 { clip(coeff * diff) } else { 4.0 };
                        embedding.set(a, c, embedding.get(a, c) + g * lr);
                    }
                }
            }
        }
    }
}
