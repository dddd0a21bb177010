//! Seeded inputs for the benchmarks.

use microact_core::Matrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Piecewise-constant 1-d signal with `changes` evenly spaced level shifts
/// and uniform noise.
pub fn step_signal(n: usize, changes: usize, seed: u64) -> Matrix {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let seg = n / (changes + 1);
    let values: Vec<f64> = (0..n)
        .map(|i| 3.0 * (i / seg.max(1)) as f64 + rng.random_range(-1.0..1.0))
        .collect();
    Matrix::column(&values)
}

pub fn random_rows(rows: usize, cols: usize, seed: u64) -> Matrix {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let data = (0..rows * cols)
        .map(|_| rng.random_range(-1.0..1.0))
        .collect();
    Matrix::from_vec(rows, cols, data).expect("sized")
}

/// Two-feature rows labeled by the sign of their product.
pub fn xor_data(rows: usize, seed: u64) -> (Matrix, Vec<u8>) {
    let x = random_rows(rows, 2, seed);
    let y = x.iter_rows().map(|r| u8::from(r[0] * r[1] > 0.0)).collect();
    (x, y)
}
