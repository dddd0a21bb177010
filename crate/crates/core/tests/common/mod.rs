//! Independent oracles and generators shared by the integration tests.
#![allow(dead_code)]

use microact_core::ingest::{RawSample, RawSensorStream};
use microact_core::zeroshot::{AttributeKind, AttributeSchema, AttributeVector};
use microact_core::Matrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Piecewise-constant 1-d signal with `changes` true change points and
/// unit Gaussian noise; returns the signal and the true boundaries.
pub fn piecewise_signal(seed: u64, n: usize, changes: usize, jump: f64) -> (Matrix, Vec<usize>) {
    let mut r = rng(seed);
    let mut cuts: Vec<usize> = Vec::new();
    while cuts.len() < changes {
        let c = r.random_range(n / 10..n - n / 10);
        if cuts.iter().all(|&x| x.abs_diff(c) > n / 10) {
            cuts.push(c);
        }
    }
    cuts.sort_unstable();
    let normal = Normal::new(0.0, 1.0).unwrap();
    let mut level = 0.0;
    let mut values = Vec::with_capacity(n);
    for i in 0..n {
        if cuts.contains(&i) {
            level += if r.random_bool(0.5) { jump } else { -jump };
        }
        values.push(level + normal.sample(&mut r));
    }
    (Matrix::column(&values), cuts)
}

/// Pooled confusion counts by direct enumeration of every (row, attribute,
/// class) decision.
pub fn brute_force_counts(
    schema: &AttributeSchema,
    pred: &[AttributeVector],
    truth: &[AttributeVector],
) -> (u64, u64, u64) {
    let (mut tp, mut fp, mut fn_) = (0, 0, 0);
    for (p, t) in pred.iter().zip(truth) {
        for (j, a) in schema.attributes().iter().enumerate() {
            let classes: Vec<u8> = match a.kind {
                AttributeKind::Binary => vec![1],
                AttributeKind::Ordinal { levels } => (0..levels).collect(),
            };
            for c in classes {
                match (p.get(j) == c, t.get(j) == c) {
                    (true, true) => tp += 1,
                    (true, false) => fp += 1,
                    (false, true) => fn_ += 1,
                    (false, false) => {}
                }
            }
        }
    }
    (tp, fp, fn_)
}

pub fn f1_from_counts(tp: u64, fp: u64, fn_: u64) -> f64 {
    if tp + fp + fn_ == 0 {
        1.0
    } else {
        2.0 * tp as f64 / (2 * tp + fp + fn_) as f64
    }
}

pub fn random_vector(r: &mut ChaCha8Rng, schema: &AttributeSchema) -> AttributeVector {
    let values = schema
        .attributes()
        .iter()
        .map(|a| r.random_range(0..a.kind.arity()))
        .collect();
    AttributeVector::new(schema, values).unwrap()
}

/// A unit polled at `rate_hz` with up to `jitter_us` of timing jitter.
pub fn polled_stream(
    seed: u64,
    unit: &str,
    rate_hz: f64,
    seconds: f64,
    jitter_us: i64,
) -> RawSensorStream {
    let mut r = rng(seed);
    let period = (1e6 / rate_hz) as i64;
    let mut samples = Vec::new();
    let mut t = r.random_range(0..period);
    while (t as f64) < seconds * 1e6 {
        let s = t as f64 / 1e6;
        samples.push(RawSample {
            timestamp_us: t,
            ax: (3.0 * s).sin() + r.random_range(-0.5..0.5),
            ay: (1.7 * s).cos() + r.random_range(-0.5..0.5),
            az: 9.81 + r.random_range(-0.2..0.2),
        });
        t += period
            + if jitter_us > 0 {
                r.random_range(-jitter_us..=jitter_us)
            } else {
                0
            };
    }
    RawSensorStream::new(unit, samples).unwrap()
}

/// Per-window axis means by a direct scan: `None` for empty windows.
pub fn scalar_window_means(
    stream: &RawSensorStream,
    epoch_us: i64,
    window_us: i64,
    n_rows: usize,
) -> Vec<Option<[f64; 3]>> {
    let mut out = Vec::with_capacity(n_rows);
    for k in 0..n_rows as i64 {
        let lo = epoch_us + k * window_us;
        let hi = lo + window_us;
        let mut acc = [0.0; 3];
        let mut n = 0usize;
        for s in stream.samples() {
            if s.timestamp_us >= lo && s.timestamp_us < hi {
                acc[0] += s.ax;
                acc[1] += s.ay;
                acc[2] += s.az;
                n += 1;
            }
        }
        out.push((n > 0).then(|| acc.map(|a| a / n as f64)));
    }
    out
}

pub fn random_matrix(r: &mut ChaCha8Rng, rows: usize, cols: usize) -> Matrix {
    let normal = Normal::new(0.0, 1.0).unwrap();
    let scales: Vec<f64> = (0..cols).map(|_| r.random_range(0.2..3.0)).collect();
    let data = (0..rows * cols)
        .map(|i| scales[i % cols] * normal.sample(r))
        .collect();
    Matrix::from_vec(rows, cols, data).unwrap()
}

pub fn median(values: &[f64]) -> f64 {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}
