mod common;

use common::*;
use microact_core::dimreduce::{fit, ReducerKind, ReducerSpec};
use microact_core::zeroshot::{default_gamma, SvmModel, SvmParams};
use microact_core::Matrix;
use rand::Rng;
use rand_distr::{Distribution, Normal};

/// Two noisy rings of radius 1 and 3.
fn circles(seed: u64, per_class: usize) -> (Matrix, Vec<u8>) {
    let mut r = rng(seed);
    let noise = Normal::new(0.0, 0.1).unwrap();
    let mut rows = Vec::new();
    let mut y = Vec::new();
    for (class, radius) in [(0u8, 1.0), (1u8, 3.0)] {
        for _ in 0..per_class {
            let t = r.random_range(0.0..std::f64::consts::TAU);
            let rad = radius + noise.sample(&mut r);
            rows.push(vec![rad * t.cos(), rad * t.sin()]);
            y.push(class);
        }
    }
    (Matrix::from_rows(&rows).unwrap(), y)
}

#[test]
fn rbf_svm_separates_concentric_circles() {
    for seed in 0..5 {
        let (x, y) = circles(seed, 100);
        let gamma = default_gamma(&x);
        let model = SvmModel::train(
            &SvmParams {
                c: 1.0,
                gamma: None,
            },
            &x,
            &y,
        )
        .unwrap();
        let acc = x
            .iter_rows()
            .zip(&y)
            .filter(|(row, &c)| model.predict(row) == c)
            .count() as f64
            / y.len() as f64;
        assert!(acc >= 0.95, "seed {seed}: accuracy {acc}, gamma {gamma}");
    }
}

fn two_clusters(seed: u64, per: usize) -> (Matrix, Vec<usize>) {
    let mut r = rng(seed);
    let noise = Normal::new(0.0, 0.3).unwrap();
    let mut rows = Vec::new();
    let mut labels = Vec::new();
    for c in 0..2 {
        for _ in 0..per {
            let centre = if c == 0 { 0.0 } else { 8.0 };
            rows.push(
                (0..5)
                    .map(|_| centre + noise.sample(&mut r))
                    .collect::<Vec<_>>(),
            );
            labels.push(c);
        }
    }
    (Matrix::from_rows(&rows).unwrap(), labels)
}

fn nearest_other(emb: &Matrix, i: usize) -> usize {
    (0..emb.rows())
        .filter(|&j| j != i)
        .min_by(|&a, &b| {
            let d = |j: usize| {
                emb.row(i)
                    .iter()
                    .zip(emb.row(j))
                    .map(|(x, y)| (x - y).powi(2))
                    .sum::<f64>()
            };
            d(a).total_cmp(&d(b))
        })
        .unwrap()
}

#[test]
fn manifold_keeps_separated_clusters_apart() {
    let (x, labels) = two_clusters(3, 40);
    let spec = ReducerSpec {
        kind: ReducerKind::NeighborManifold,
        target_dim: 2,
        n_neighbors: 10,
        seed: 11,
    };
    let reducer = fit(&spec, &x).unwrap();
    let emb = reducer.transform(&x).unwrap();
    assert!(emb.all_finite());
    let agree = (0..x.rows())
        .filter(|&i| labels[nearest_other(&emb, i)] == labels[i])
        .count();
    assert!(
        agree as f64 >= 0.95 * x.rows() as f64,
        "{agree}/{}",
        x.rows()
    );

    // new points near a cluster land nearer that cluster's embedding
    let centroid = |c: usize| {
        let rows: Vec<&[f64]> = (0..emb.rows())
            .filter(|&i| labels[i] == c)
            .map(|i| emb.row(i))
            .collect();
        [0, 1].map(|k| rows.iter().map(|r| r[k]).sum::<f64>() / rows.len() as f64)
    };
    let (c0, c1) = (centroid(0), centroid(1));
    let probe = reducer.transform_row(&[8.1, 7.9, 8.0, 8.2, 7.8]).unwrap();
    let d = |c: [f64; 2]| (probe[0] - c[0]).powi(2) + (probe[1] - c[1]).powi(2);
    assert!(d(c1) < d(c0));
}

#[test]
fn manifold_fit_is_seed_deterministic() {
    let (x, _) = two_clusters(4, 25);
    let spec = |seed| ReducerSpec {
        kind: ReducerKind::NeighborManifold,
        target_dim: 2,
        n_neighbors: 8,
        seed,
    };
    assert_eq!(fit(&spec(1), &x).unwrap(), fit(&spec(1), &x).unwrap());
}
