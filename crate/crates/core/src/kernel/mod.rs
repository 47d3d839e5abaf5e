//! Strictly positive definite kernels and regularised kernel interpolation
//! with vector-valued outputs sharing one set of centres.

mod io;

use nalgebra::{Cholesky, DMatrix, Dyn, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use io::{read_model, write_model, MODEL_FORMAT_VERSION};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum KernelFamily {
    /// exp(−ε²‖x − y‖²)
    Gaussian,
    /// Compactly supported Wendland function for one input dimension with
    /// smoothness 0, 1 or 2 (C⁰, C², C⁴); support radius 1/ε.
    Wendland { smoothness: u8 },
}

impl KernelFamily {
    /// The C² Wendland function.
    pub const WENDLAND_DEFAULT: Self = KernelFamily::Wendland { smoothness: 1 };
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KernelConfig {
    pub family: KernelFamily,
    /// ε, 1/input units
    pub shape: f64,
    /// λ ≥ 0
    pub regularization: f64,
}

impl KernelConfig {
    pub fn gaussian(shape: f64, regularization: f64) -> Self {
        Self {
            family: KernelFamily::Gaussian,
            shape,
            regularization,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.shape > 0.0 && self.shape.is_finite()) {
            return Err(Error::InvalidInput(format!("kernel shape must be > 0, got {}", self.shape)));
        }
        if !(self.regularization >= 0.0 && self.regularization.is_finite()) {
            return Err(Error::InvalidInput(format!(
                "regularisation must be >= 0, got {}",
                self.regularization
            )));
        }
        if let KernelFamily::Wendland { smoothness } = self.family {
            if smoothness > 2 {
                return Err(Error::InvalidInput(format!(
                    "Wendland smoothness must be 0, 1 or 2, got {smoothness}"
                )));
            }
        }
        Ok(())
    }

    /// Checks that the family is positive definite in `dim` input dimensions.
    pub fn check_dimension(&self, dim: usize) -> Result<()> {
        if dim == 0 {
            return Err(Error::Dimension("input dimension must be >= 1".into()));
        }
        if matches!(self.family, KernelFamily::Wendland { .. }) && dim != 1 {
            return Err(Error::Dimension(format!(
                "the bundled Wendland functions are positive definite for one input only, got {dim}"
            )));
        }
        Ok(())
    }

    /// Radial profile φ(r) with r = ε‖x − y‖.
    #[inline]
    pub fn profile(&self, r: f64) -> f64 {
        match self.family {
            KernelFamily::Gaussian => (-r * r).exp(),
            KernelFamily::Wendland { smoothness } => {
                if r >= 1.0 {
                    return 0.0;
                }
                let s = 1.0 - r;
                match smoothness {
                    0 => s,
                    1 => s * s * s * (3.0 * r + 1.0),
                    _ => {
                        let s2 = s * s;
                        s2 * s2 * s * ((8.0 * r + 5.0) * r + 1.0)
                    }
                }
            }
        }
    }

    /// dφ/dr. Errors where the profile has a kink.
    pub fn profile_slope(&self, r: f64) -> Result<f64> {
        Ok(match self.family {
            KernelFamily::Gaussian => -2.0 * r * (-r * r).exp(),
            KernelFamily::Wendland { smoothness } => {
                if r >= 1.0 {
                    if smoothness == 0 && r == 1.0 {
                        return Err(Error::NotDifferentiable("C⁰ Wendland at the support boundary".into()));
                    }
                    return Ok(0.0);
                }
                let s = 1.0 - r;
                match smoothness {
                    0 => {
                        if r == 0.0 {
                            return Err(Error::NotDifferentiable("C⁰ Wendland at a centre".into()));
                        }
                        -1.0
                    }
                    1 => -12.0 * r * s * s,
                    _ => {
                        let s2 = s * s;
                        -14.0 * r * (4.0 * r + 1.0) * s2 * s2
                    }
                }
            }
        })
    }

    #[inline]
    pub fn eval(&self, x: &[f64], y: &[f64]) -> f64 {
        self.profile(self.shape * distance(x, y))
    }

    /// ∂K(x, y)/∂x for scalar inputs.
    pub fn eval_derivative(&self, x: f64, y: f64) -> Result<f64> {
        let d = x - y;
        match self.family {
            KernelFamily::Gaussian => {
                let e2 = self.shape * self.shape;
                Ok(-2.0 * e2 * d * (-e2 * d * d).exp())
            }
            KernelFamily::Wendland { .. } => {
                let r = self.shape * d.abs();
                let slope = self.profile_slope(r)?;
                Ok(slope * self.shape * d.signum() * if d == 0.0 { 0.0 } else { 1.0 })
            }
        }
    }
}

#[inline]
fn distance(x: &[f64], y: &[f64]) -> f64 {
    if x.len() == 1 {
        return (x[0] - y[0]).abs();
    }
    x.iter().zip(y).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt()
}

/// Kernel matrix [K(x_i, x_j)] of `points` (n × dim, row-major).
pub fn kernel_matrix(points: &[f64], dim: usize, kc: &KernelConfig) -> DMatrix<f64> {
    let n = points.len() / dim;
    let mut m = DMatrix::zeros(n, n);
    for i in 0..n {
        let xi = &points[i * dim..(i + 1) * dim];
        m[(i, i)] = kc.eval(xi, xi);
        for j in 0..i {
            let v = kc.eval(xi, &points[j * dim..(j + 1) * dim]);
            m[(i, j)] = v;
            m[(j, i)] = v;
        }
    }
    m
}

/// Cholesky factorisation that also rejects numerically singular matrices:
/// every pivot must exceed n·eps·max_diag.
pub fn factorize(matrix: DMatrix<f64>) -> Result<Cholesky<f64, Dyn>> {
    let n = matrix.nrows();
    let max_diag = (0..n).map(|i| matrix[(i, i)]).fold(0.0f64, f64::max);
    let threshold = n as f64 * f64::EPSILON * max_diag;
    let condition = |m: &DMatrix<f64>| {
        let ev = SymmetricEigen::new(m.clone()).eigenvalues;
        let max = ev.iter().fold(0.0f64, |a, v| a.max(v.abs()));
        let min = ev.iter().fold(f64::INFINITY, |a, v| a.min(*v));
        if min > 0.0 {
            max / min
        } else {
            f64::INFINITY
        }
    };
    match Cholesky::new(matrix.clone()) {
        Some(ch) => {
            let l = ch.l_dirty();
            if (0..n).all(|i| l[(i, i)] * l[(i, i)] > threshold) {
                Ok(ch)
            } else {
                Err(Error::Indefinite {
                    condition: condition(&matrix),
                })
            }
        }
        None => Err(Error::Indefinite {
            condition: condition(&matrix),
        }),
    }
}

/// f̂(x) = Σ_j α_j K(x, x_j) with α an n × q coefficient matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct InterpolantModel {
    pub kernel: KernelConfig,
    pub dim: usize,
    /// n × dim, row-major.
    pub centers: Vec<f64>,
    /// n × q, row-major.
    pub coefficients: Vec<f64>,
    pub outputs: usize,
}

impl InterpolantModel {
    /// Model with no centres; evaluates to zero.
    pub fn empty(kernel: KernelConfig, dim: usize, outputs: usize) -> Self {
        Self {
            kernel,
            dim,
            centers: Vec::new(),
            coefficients: Vec::new(),
            outputs,
        }
    }

    pub fn center_count(&self) -> usize {
        if self.dim == 0 {
            0
        } else {
            self.centers.len() / self.dim
        }
    }

    pub fn center(&self, j: usize) -> &[f64] {
        &self.centers[j * self.dim..(j + 1) * self.dim]
    }

    pub fn check_consistent(&self) -> Result<()> {
        let n = self.center_count();
        if self.centers.len() != n * self.dim || self.coefficients.len() != n * self.outputs {
            return Err(Error::Dimension(format!(
                "{} centre values and {} coefficients do not fit dim {} and q {}",
                self.centers.len(),
                self.coefficients.len(),
                self.dim,
                self.outputs
            )));
        }
        Ok(())
    }

    /// Adds f̂(x) to `out` (length q) after zeroing it.
    pub fn evaluate_into(&self, x: &[f64], out: &mut [f64]) {
        out.iter_mut().for_each(|v| *v = 0.0);
        let q = self.outputs;
        for j in 0..self.center_count() {
            let k = self.kernel.eval(x, self.center(j));
            if k == 0.0 {
                continue;
            }
            let row = &self.coefficients[j * q..(j + 1) * q];
            for (o, a) in out.iter_mut().zip(row) {
                *o += k * a;
            }
        }
    }

    pub fn evaluate(&self, x: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.outputs];
        self.evaluate_into(x, &mut out);
        out
    }

    /// Convenience for scalar inputs.
    pub fn evaluate_scalar(&self, x: f64) -> Vec<f64> {
        self.evaluate(&[x])
    }

    /// d f̂/dx for scalar inputs.
    pub fn evaluate_derivative(&self, x: f64) -> Result<Vec<f64>> {
        if self.dim != 1 {
            return Err(Error::Dimension(format!(
                "derivative is defined for scalar inputs, model has dim {}",
                self.dim
            )));
        }
        let q = self.outputs;
        let mut out = vec![0.0; q];
        for j in 0..self.center_count() {
            let dk = self.kernel.eval_derivative(x, self.centers[j])?;
            if dk == 0.0 {
                continue;
            }
            for (o, a) in out.iter_mut().zip(&self.coefficients[j * q..(j + 1) * q]) {
                *o += dk * a;
            }
        }
        Ok(out)
    }
}

/// Dense regularised fit: solves (A + λI)α = F for all q columns with one
/// factorisation. If the matrix is numerically singular, λ is raised once to
/// max(λ, 1e-12·trace/n); the value actually used is stored in the model.
pub fn fit_interpolant(points: &[f64], dim: usize, values: &[f64], outputs: usize, kc: &KernelConfig) -> Result<InterpolantModel> {
    kc.validate()?;
    kc.check_dimension(dim)?;
    if points.len() % dim != 0 {
        return Err(Error::Dimension(format!("{} coordinates do not split into points of dim {dim}", points.len())));
    }
    let n = points.len() / dim;
    if values.len() != n * outputs {
        return Err(Error::Dimension(format!(
            "{n} points need {} values for q = {outputs}, got {}",
            n * outputs,
            values.len()
        )));
    }
    if n == 0 {
        return Ok(InterpolantModel::empty(*kc, dim, outputs));
    }
    let gram = kernel_matrix(points, dim, kc);
    let trace = gram.trace();
    let regularised = |lambda: f64| {
        let mut m = gram.clone();
        for i in 0..n {
            m[(i, i)] += lambda;
        }
        m
    };
    let mut used = *kc;
    let chol = match factorize(regularised(kc.regularization)) {
        Ok(c) => c,
        Err(_) => {
            used.regularization = kc.regularization.max(1e-12 * trace / n as f64);
            factorize(regularised(used.regularization))?
        }
    };
    let rhs = DMatrix::from_row_slice(n, outputs, values);
    let alpha = chol.solve(&rhs);
    let mut coefficients = Vec::with_capacity(n * outputs);
    for i in 0..n {
        for k in 0..outputs {
            coefficients.push(alpha[(i, k)]);
        }
    }
    Ok(InterpolantModel {
        kernel: used,
        dim,
        centers: points.to_vec(),
        coefficients,
        outputs,
    })
}
