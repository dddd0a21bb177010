//! Bagged CART classification trees with √d feature subsampling.

use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::matrix::Matrix;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ForestParams {
    pub n_trees: usize,
    pub max_depth: usize,
    pub seed: u64,
}

impl Default for ForestParams {
    fn default() -> Self {
        Self {
            n_trees: 100,
            max_depth: 34,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
enum Node {
    Leaf(u8),
    Split {
        feature: usize,
        threshold: f64,
        left: u32,
        right: u32,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecisionTree {
    nodes: Vec<Node>,
}

impl DecisionTree {
    pub fn predict(&self, row: &[f64]) -> u8 {
        let mut i = 0usize;
        loop {
            match &self.nodes[i] {
                Node::Leaf(c) => return *c,
                Node::Split {
                    feature,
                    threshold,
                    left,
                    right,
                } => {
                    i = if row[*feature] <= *threshold {
                        *left as usize
                    } else {
                        *right as usize
                    };
                }
            }
        }
    }

    pub fn depth(&self) -> usize {
        fn go(nodes: &[Node], i: usize) -> usize {
            match &nodes[i] {
                Node::Leaf(_) => 0,
                Node::Split { left, right, .. } => {
                    1 + go(nodes, *left as usize).max(go(nodes, *right as usize))
                }
            }
        }
        go(&self.nodes, 0)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RandomForest {
    trees: Vec<DecisionTree>,
    n_classes: usize,
}

/// SplitMix64 finaliser; derives independent stream seeds.
pub(crate) fn mix(a: u64, b: u64) -> u64 {
    let mut z = a ^ b
        .wrapping_add(0x9E37_79B9_7F4A_7C15)
        .wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

fn majority(counts: &[usize]) -> u8 {
    let mut best = 0;
    for (c, &n) in counts.iter().enumerate() {
        if n > counts[best] {
            best = c;
        }
    }
    best as u8
}

fn gini_sum(counts: &[usize], n: usize) -> f64 {
    // n · gini, so weighted impurities add up directly.
    if n == 0 {
        return 0.0;
    }
    let sq: f64 = counts.iter().map(|&c| (c * c) as f64).sum();
    n as f64 - sq / n as f64
}

struct Builder<'a> {
    x: &'a Matrix,
    y: &'a [u8],
    n_classes: usize,
    max_depth: usize,
    mtry: usize,
    tree_seed: u64,
    nodes: Vec<Node>,
}

impl Builder<'_> {
    /// `key` identifies the node by its path from the root (root = 1,
    /// children 2k and 2k+1), so the feature draw at a node does not depend
    /// on how deep the rest of the tree is grown.
    fn build(&mut self, idx: &mut [usize], depth: usize, key: u64) -> u32 {
        let slot = self.nodes.len();
        self.nodes.push(Node::Leaf(0));
        let mut counts = vec![0usize; self.n_classes];
        for &i in idx.iter() {
            counts[self.y[i] as usize] += 1;
        }
        let label = majority(&counts);
        let pure = counts.iter().filter(|&&c| c > 0).count() <= 1;
        if pure || depth >= self.max_depth || idx.len() < 2 {
            self.nodes[slot] = Node::Leaf(label);
            return slot as u32;
        }
        let Some((feature, threshold)) = self.best_split(idx, &counts, key) else {
            self.nodes[slot] = Node::Leaf(label);
            return slot as u32;
        };
        let mut split = 0;
        for k in 0..idx.len() {
            if self.x.get(idx[k], feature) <= threshold {
                idx.swap(k, split);
                split += 1;
            }
        }
        let (l, r) = idx.split_at_mut(split);
        let left = self.build(l, depth + 1, key.wrapping_mul(2));
        let right = self.build(r, depth + 1, key.wrapping_mul(2).wrapping_add(1));
        self.nodes[slot] = Node::Split {
            feature,
            threshold,
            left,
            right,
        };
        slot as u32
    }

    fn best_split(&self, idx: &[usize], counts: &[usize], key: u64) -> Option<(usize, f64)> {
        let d = self.x.cols();
        let mut rng = ChaCha8Rng::seed_from_u64(mix(self.tree_seed, key));
        let order: Vec<usize> = sample(&mut rng, d, d).into_vec();
        let parent = gini_sum(counts, idx.len());
        let mut sorted: Vec<(f64, u8)> = Vec::with_capacity(idx.len());
        let mut best: Option<(f64, usize, f64)> = None;
        // Draw mtry features; keep drawing past mtry only while no valid
        // split has been found (all drawn features constant).
        for (tried, &f) in order.iter().enumerate() {
            if tried >= self.mtry && best.is_some() {
                break;
            }
            sorted.clear();
            sorted.extend(idx.iter().map(|&i| (self.x.get(i, f), self.y[i])));
            sorted.sort_by(|a, b| a.0.total_cmp(&b.0));
            let mut left = vec![0usize; self.n_classes];
            let mut right = counts.to_vec();
            for k in 0..sorted.len() - 1 {
                let c = sorted[k].1 as usize;
                left[c] += 1;
                right[c] -= 1;
                if sorted[k].0 == sorted[k + 1].0 {
                    continue;
                }
                let nl = k + 1;
                let imp = gini_sum(&left, nl) + gini_sum(&right, sorted.len() - nl);
                if best.is_none_or(|(b, _, _)| imp < b - 1e-12) {
                    let thr = 0.5 * (sorted[k].0 + sorted[k + 1].0);
                    best = Some((imp, f, thr));
                }
            }
        }
        best.filter(|(imp, _, _)| *imp <= parent + 1e-12)
            .map(|(_, f, t)| (f, t))
    }
}

impl RandomForest {
    /// Trains on `targets` in `0..n_classes`. Callers handle the
    /// single-class case.
    pub fn train(params: &ForestParams, x: &Matrix, targets: &[u8], n_classes: usize) -> Self {
        let m = x.rows();
        let mtry = ((x.cols() as f64).sqrt().floor() as usize).max(1);
        let trees = (0..params.n_trees)
            .into_par_iter()
            .map(|t| {
                let tree_seed = mix(params.seed, t as u64);
                let mut idx = Self::bootstrap_sample(params.seed, t, m);
                let mut b = Builder {
                    x,
                    y: targets,
                    n_classes,
                    max_depth: params.max_depth,
                    mtry,
                    tree_seed,
                    nodes: Vec::new(),
                };
                b.build(&mut idx, 0, 1);
                DecisionTree { nodes: b.nodes }
            })
            .collect();
        Self { trees, n_classes }
    }

    /// Row indices drawn (with replacement) for tree `tree`.
    pub fn bootstrap_sample(seed: u64, tree: usize, m: usize) -> Vec<usize> {
        let mut rng = ChaCha8Rng::seed_from_u64(mix(seed, tree as u64));
        (0..m).map(|_| rng.random_range(0..m)).collect()
    }

    /// Majority vote; ties go to the smaller class.
    pub fn predict(&self, row: &[f64]) -> u8 {
        let mut votes = vec![0usize; self.n_classes];
        for t in &self.trees {
            votes[t.predict(row) as usize] += 1;
        }
        majority(&votes)
    }

    pub fn trees(&self) -> &[DecisionTree] {
        &self.trees
    }
}
