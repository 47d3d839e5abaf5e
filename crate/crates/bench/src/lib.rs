//! Shared fixtures for the benchmarks.

use hemo_core::kernel::{fit_interpolant, InterpolantModel, KernelConfig};

/// Smooth q-output data on `n` equispaced degrees.
pub fn smooth_data(n: usize, q: usize) -> (Vec<f64>, Vec<f64>) {
    let xs: Vec<f64> = (0..n).map(|i| i as f64 / (n - 1).max(1) as f64).collect();
    let values = xs
        .iter()
        .flat_map(|x| (0..q).map(move |k| 80.0 + 40.0 * (6.0 * x + k as f64 * 0.0157).sin() * (1.0 - x * x)))
        .collect();
    (xs, values)
}

/// A dense 400-output model on `n` centres.
pub fn curve_model(n: usize) -> InterpolantModel {
    let (xs, values) = smooth_data(n, 400);
    fit_interpolant(&xs, 1, &values, 400, &KernelConfig::gaussian(3.0, 1e-10)).expect("well-posed fit")
}
