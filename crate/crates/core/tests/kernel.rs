use hemo_core::kernel::{fit_interpolant, kernel_matrix, KernelConfig, KernelFamily};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn rows(points: &[f64], q: usize) -> Vec<f64> {
    points
        .iter()
        .flat_map(|&x| (0..q).map(move |j| (2.0 * x + j as f64).cos() * (1.0 + x) + 0.3 * j as f64))
        .collect()
}

#[test]
fn forty_point_interpolation() {
    let points: Vec<f64> = (0..40).map(|i| i as f64 / 39.0).collect();
    let q = 6;
    let values = rows(&points, q);
    let biggest = values.chunks(q).map(|r| r.iter().map(|v| v * v).sum::<f64>().sqrt()).fold(0.0, f64::max);
    for kc in [
        KernelConfig::gaussian(20.0, 0.0),
        KernelConfig {
            family: KernelFamily::WENDLAND_DEFAULT,
            shape: 8.0,
            regularization: 0.0,
        },
    ] {
        let model = fit_interpolant(&points, 1, &values, q, &kc).unwrap();
        let worst = points
            .iter()
            .enumerate()
            .map(|(i, &x)| {
                let p = model.evaluate_scalar(x);
                values[i * q..(i + 1) * q].iter().zip(&p).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt()
            })
            .fold(0.0, f64::max);
        assert!(worst <= 1e-8 * biggest, "{:?}: {worst:.3e}", kc.family);
    }
}

#[test]
fn derivative_matches_central_differences() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let families = [
        KernelFamily::Gaussian,
        KernelFamily::Wendland { smoothness: 1 },
        KernelFamily::Wendland { smoothness: 2 },
    ];
    for case in 0..100 {
        let n = rng.random_range(3..12);
        let points: Vec<f64> = (0..n).map(|_| rng.random_range(0.0..1.0)).collect();
        let values: Vec<f64> = (0..n * 2).map(|_| rng.random_range(-1.0..1.0)).collect();
        let kc = KernelConfig {
            family: families[case % 3],
            shape: rng.random_range(0.5..4.0),
            regularization: 1e-6,
        };
        let model = fit_interpolant(&points, 1, &values, 2, &kc).unwrap();
        let x = rng.random_range(0.0..1.0);
        let h = 1e-6;
        let d = model.evaluate_derivative(x).unwrap();
        let (up, dn) = (model.evaluate_scalar(x + h), model.evaluate_scalar(x - h));
        for j in 0..2 {
            let fd = (up[j] - dn[j]) / (2.0 * h);
            // cancellation in the difference quotient grows with the coefficients
            let floor = f64::EPSILON * model.coefficients.iter().map(|a| a.abs()).sum::<f64>() / h;
            let tol = 1e-5 * d[j].abs().max(1.0) + floor;
            assert!((d[j] - fd).abs() <= tol, "case {case}: {} vs {fd}", d[j]);
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn regularised_fit_minimises_the_penalised_loss(
        seed in 0u64..10_000,
        n in 4usize..16,
        log_lambda in -6.0f64..-1.0,
        shape in 0.5f64..6.0,
    ) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let points: Vec<f64> = (0..n).map(|_| rng.random_range(0.0..1.0)).collect();
        let b: Vec<f64> = (0..n).map(|_| rng.random_range(-2.0..2.0)).collect();
        let lambda = 10f64.powf(log_lambda);
        let kc = KernelConfig::gaussian(shape, lambda);
        let model = fit_interpolant(&points, 1, &b, 1, &kc).unwrap();
        prop_assume!(model.kernel.regularization == lambda);
        let a = kernel_matrix(&points, 1, &KernelConfig::gaussian(shape, 0.0));
        let loss = |alpha: &[f64]| {
            let mut misfit = 0.0;
            let mut energy = 0.0;
            for i in 0..n {
                let ai: f64 = (0..n).map(|j| a[(i, j)] * alpha[j]).sum();
                misfit += (ai - b[i]).powi(2);
                energy += alpha[i] * ai;
            }
            misfit + lambda * energy
        };
        let alpha = model.coefficients.clone();
        let best = loss(&alpha);
        let scale = alpha.iter().map(|v| v.abs()).fold(0.0, f64::max).max(1e-3);
        for _ in 0..100 {
            let trial: Vec<f64> = alpha.iter().map(|v| v + 1e-3 * scale * rng.random_range(-1.0..1.0)).collect();
            prop_assert!(loss(&trial) >= best - 1e-10, "{} < {}", loss(&trial), best);
        }
    }
}
