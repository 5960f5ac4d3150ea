//! Deterministic inputs for the criterion benchmarks in `benches/`.

use ndarray::Array2;

/// A two-tone signal at 16 kHz.
pub fn tone(seconds: f64) -> Vec<f32> {
    let n = (seconds * 16000.0) as usize;
    (0..n)
        .map(|i| {
            let t = i as f32 / 16000.0;
            0.4 * (2.0 * std::f32::consts::PI * 330.0 * t).sin() + 0.1 * (2.0 * std::f32::consts::PI * 1870.0 * t).sin()
        })
        .collect()
}

/// `rows x dim` frames from a fixed quasi-random pattern.
pub fn frames(rows: usize, dim: usize, phase: f32) -> Array2<f32> {
    Array2::from_shape_fn((rows, dim), |(i, j)| ((i * 31 + j * 17) as f32 * 0.37 + phase).sin())
}
