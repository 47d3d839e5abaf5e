//! Stenosis degree from a measured curve: minimise
//! J(R) = ‖y − f̂(R)‖² / (2‖y‖²) over [0, 1] with analytic gradients.

use rand::distr::Open01;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kernel::InterpolantModel;

fn check(y: &[f64], model: &InterpolantModel) -> Result<f64> {
    if model.dim != 1 {
        return Err(Error::Dimension(format!("estimation needs a scalar-input model, got dim {}", model.dim)));
    }
    if y.len() != model.outputs {
        return Err(Error::Dimension(format!("measurement has {} values, model {}", y.len(), model.outputs)));
    }
    let norm2: f64 = y.iter().map(|v| v * v).sum();
    if !(norm2 > 0.0) || !norm2.is_finite() {
        return Err(Error::InvalidInput("measurement has zero or non-finite norm".into()));
    }
    Ok(norm2)
}

fn check_degree(r: f64) -> Result<()> {
    if (0.0..=1.0).contains(&r) {
        Ok(())
    } else {
        Err(Error::InvalidInput(format!("stenosis degree must lie in [0, 1], got {r}")))
    }
}

pub fn cost(degree: f64, y: &[f64], model: &InterpolantModel) -> Result<f64> {
    let norm2 = check(y, model)?;
    check_degree(degree)?;
    Ok(cost_unchecked(degree, y, model, norm2))
}

fn cost_unchecked(degree: f64, y: &[f64], model: &InterpolantModel, norm2: f64) -> f64 {
    let f = model.evaluate_scalar(degree);
    y.iter().zip(&f).map(|(a, b)| (a - b) * (a - b)).sum::<f64>() / (2.0 * norm2)
}

/// dJ/dR = −Σ (y_j − f̂_j(R))·f̂_j'(R) / ‖y‖².
pub fn cost_gradient(degree: f64, y: &[f64], model: &InterpolantModel) -> Result<f64> {
    let norm2 = check(y, model)?;
    check_degree(degree)?;
    cost_and_gradient(degree, y, model, norm2).map(|(_, g)| g)
}

fn cost_and_gradient(degree: f64, y: &[f64], model: &InterpolantModel, norm2: f64) -> Result<(f64, f64)> {
    let f = model.evaluate_scalar(degree);
    let df = model.evaluate_derivative(degree)?;
    let mut j = 0.0;
    let mut g = 0.0;
    for ((a, b), d) in y.iter().zip(&f).zip(&df) {
        let r = a - b;
        j += r * r;
        g -= r * d;
    }
    Ok((j / (2.0 * norm2), g / norm2))
}

/// J on `points` equally spaced degrees in [0, 1].
pub fn cost_profile(y: &[f64], model: &InterpolantModel, points: usize) -> Result<Vec<(f64, f64)>> {
    let norm2 = check(y, model)?;
    if points < 2 {
        return Err(Error::InvalidInput(format!("a cost profile needs at least 2 points, got {points}")));
    }
    Ok((0..points)
        .map(|i| {
            let r = if i + 1 == points { 1.0 } else { i as f64 / (points - 1) as f64 };
            (r, cost_unchecked(r, y, model, norm2))
        })
        .collect())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OptimizerSettings {
    pub starts: Vec<f64>,
    /// Sufficient decrease constant.
    pub armijo: f64,
    /// Backtracking factor.
    pub shrink: f64,
    pub max_iterations: usize,
    /// Stop once the projected gradient is this small.
    pub gradient_tol: f64,
    /// Points of a dense scan run alongside the descent; its best point is
    /// used as an extra start.
    pub scan_points: Option<usize>,
}

impl Default for OptimizerSettings {
    fn default() -> Self {
        Self {
            starts: vec![0.05, 0.25, 0.5, 0.75, 0.95],
            armijo: 1e-4,
            shrink: 0.5,
            max_iterations: 200,
            gradient_tol: 1e-10,
            scan_points: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EstimationResult {
    pub estimate: f64,
    pub cost: f64,
    /// Iterations of the start that produced the estimate.
    pub iterations: usize,
    pub converged: bool,
    pub start: f64,
    pub profile: Option<Vec<(f64, f64)>>,
}

#[derive(Debug, Clone, Copy)]
struct LocalResult {
    x: f64,
    cost: f64,
    iterations: usize,
    converged: bool,
    start: f64,
}

const FIRST_MOVE: f64 = 1e-2;

fn project(x: f64) -> f64 {
    x.clamp(0.0, 1.0)
}

/// Projected gradient descent with backtracking; the trial step comes from
/// the secant of the gradient when that is positive. Each move is at most
/// twice the previous accepted one, starting from `FIRST_MOVE`, so a narrow
/// valley is not stepped over.
fn descend(start: f64, y: &[f64], model: &InterpolantModel, norm2: f64, s: &OptimizerSettings) -> Result<LocalResult> {
    let mut x = project(start);
    let (mut j, mut g) = cost_and_gradient(x, y, model, norm2)?;
    let mut step: f64 = if g != 0.0 { FIRST_MOVE / g.abs() } else { 1.0 };
    let mut reach = FIRST_MOVE;
    for it in 0..s.max_iterations {
        if (x - project(x - g)).abs() <= s.gradient_tol || g.abs() <= s.gradient_tol {
            return Ok(LocalResult { x, cost: j, iterations: it, converged: true, start });
        }
        let mut t = if g != 0.0 { step.min(reach / g.abs()) } else { step };
        let mut accepted = None;
        for _ in 0..60 {
            let xn = project(x - t * g);
            if xn == x {
                break;
            }
            let jn = cost_unchecked(xn, y, model, norm2);
            if jn <= j + s.armijo * g * (xn - x) {
                accepted = Some(xn);
                break;
            }
            t *= s.shrink;
        }
        let Some(xn) = accepted else {
            // no representable decrease left: stationary to roundoff
            let converged = (x - project(x - g)).abs() <= s.gradient_tol.sqrt();
            return Ok(LocalResult { x, cost: j, iterations: it, converged, start });
        };
        let (jn, gn) = cost_and_gradient(xn, y, model, norm2)?;
        let dg = gn - g;
        let dx = xn - x;
        step = if dg * dx > 0.0 { dx / dg } else { (t / s.shrink).min(1e12) };
        reach = 2.0 * dx.abs();
        x = xn;
        j = jn;
        g = gn;
    }
    let converged = (x - project(x - g)).abs() <= s.gradient_tol || g.abs() <= s.gradient_tol;
    Ok(LocalResult { x, cost: j, iterations: s.max_iterations, converged, start })
}

/// Multi-start bounded minimisation of J over [0, 1].
pub fn estimate(y: &[f64], model: &InterpolantModel, settings: &OptimizerSettings) -> Result<EstimationResult> {
    let norm2 = check(y, model)?;
    if settings.starts.is_empty() && settings.scan_points.is_none() {
        return Err(Error::InvalidInput("the optimiser needs at least one start".into()));
    }
    let profile = settings.scan_points.map(|n| cost_profile(y, model, n)).transpose()?;
    let mut starts = settings.starts.clone();
    if let Some(p) = &profile {
        let best = p.iter().fold((0.0, f64::INFINITY), |b, &(r, j)| if j < b.1 { (r, j) } else { b });
        starts.push(best.0);
    }
    let results: Vec<LocalResult> = starts
        .par_iter()
        .map(|&x0| descend(x0, y, model, norm2, settings))
        .collect::<Result<_>>()?;
    let pick = |only_converged: bool| {
        results
            .iter()
            .filter(|r| r.converged || !only_converged)
            .fold(None::<&LocalResult>, |b, r| match b {
                Some(b) if b.cost <= r.cost => Some(b),
                _ => Some(r),
            })
            .copied()
    };
    let best_any = pick(false).expect("at least one start");
    let best = match pick(true) {
        Some(c) if c.cost <= best_any.cost => c,
        _ => best_any,
    };
    Ok(EstimationResult {
        estimate: best.x,
        cost: best.cost,
        iterations: best.iterations,
        converged: results.iter().any(|r| r.converged),
        start: best.start,
        profile,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Measurement {
    pub values: Vec<f64>,
    pub noise_level: f64,
    pub seed: u64,
    /// Noise draw v ∈ (0, 1)^q.
    pub noise: Vec<f64>,
}

/// y = f + σ·v with v uniform in (0, 1), drawn from a seeded generator.
pub fn synthetic_measurement(curve: &[f64], noise_level: f64, seed: u64) -> Result<Measurement> {
    if !(noise_level >= 0.0 && noise_level.is_finite()) {
        return Err(Error::InvalidInput(format!("noise level must be >= 0, got {noise_level}")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let noise: Vec<f64> = (0..curve.len()).map(|_| rng.sample(Open01)).collect();
    let values = curve.iter().zip(&noise).map(|(f, v)| f + noise_level * v).collect();
    Ok(Measurement {
        values,
        noise_level,
        seed,
        noise,
    })
}
