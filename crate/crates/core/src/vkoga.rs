//! f-greedy sparse kernel interpolation with a Newton basis, and k-fold
//! cross-validation over the shape and regularisation grids.

use nalgebra::{DMatrix, DVector};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kernel::{kernel_matrix, InterpolantModel, KernelConfig, KernelFamily};

pub const REPORT_SCHEMA: &str = "hemo-training-report/1";

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StopRule {
    /// Stop once every candidate has P below this.
    pub power_tol: f64,
    /// Stop once every candidate residual norm is below this fraction of
    /// the largest initial one.
    pub residual_tol: f64,
    /// At most this many centres; `None` means the data size.
    pub max_centers: Option<usize>,
}

impl Default for StopRule {
    fn default() -> Self {
        Self {
            power_tol: 5e-8,
            residual_tol: 1e-12,
            max_centers: None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StopReason {
    PowerTolerance,
    ResidualTolerance,
    MaxCenters,
    /// Every point was selected.
    Exhausted,
    /// The next pivot was not positive.
    Breakdown,
}

/// One greedy step, logged before the selection is applied.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GreedyIteration {
    pub selected: usize,
    /// max over unselected points of ‖r(x)‖₂
    pub max_residual: f64,
    /// max over unselected points of P(x)
    pub max_power: f64,
}

/// Incremental f-greedy state on a precomputed kernel matrix. Only the rows
/// and columns listed in `rows` take part, so cross-validation folds can
/// share one matrix.
#[derive(Debug, Clone)]
pub struct GreedyState<'a> {
    gram: &'a DMatrix<f64>,
    rows: Vec<usize>,
    regularization: f64,
    outputs: usize,
    /// Newton basis values, one column of length `rows.len()` per centre.
    basis: Vec<Vec<f64>>,
    /// Newton coefficients, one q-vector per centre.
    newton: Vec<Vec<f64>>,
    /// r(x_i), row-major rows.len() × q.
    residual: Vec<f64>,
    /// ‖r(x_i)‖₂², kept in step with `residual`.
    norms2: Vec<f64>,
    /// P(x_i)², unclipped.
    power2: Vec<f64>,
    selected: Vec<usize>,
    is_selected: Vec<bool>,
    initial_max_residual: f64,
}

impl<'a> GreedyState<'a> {
    /// `values` is rows.len() × q, row-major, in `rows` order.
    pub fn new(gram: &'a DMatrix<f64>, rows: Vec<usize>, values: &[f64], outputs: usize, regularization: f64) -> Result<Self> {
        let n = rows.len();
        if n == 0 {
            return Err(Error::InvalidInput("greedy fit needs at least one point".into()));
        }
        if values.len() != n * outputs {
            return Err(Error::Dimension(format!(
                "{n} points need {} values, got {}",
                n * outputs,
                values.len()
            )));
        }
        if !(regularization >= 0.0) {
            return Err(Error::InvalidInput(format!("regularisation must be >= 0, got {regularization}")));
        }
        let power2 = rows.iter().map(|&r| gram[(r, r)]).collect();
        let mut s = Self {
            gram,
            rows,
            regularization,
            outputs,
            basis: Vec::new(),
            newton: Vec::new(),
            norms2: values.chunks(outputs.max(1)).map(|r| r.iter().map(|v| v * v).sum()).collect(),
            residual: values.to_vec(),
            power2,
            selected: Vec::new(),
            is_selected: vec![false; n],
            initial_max_residual: 0.0,
        };
        s.initial_max_residual = s.residual_norms().into_iter().fold(0.0, f64::max);
        Ok(s)
    }

    pub fn selected(&self) -> &[usize] {
        &self.selected
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    /// ‖r(x_i)‖₂ for every point (selected ones included).
    pub fn residual_norms(&self) -> Vec<f64> {
        self.norms2.iter().map(|v| v.sqrt()).collect()
    }

    /// P(x_i) for every point, clipped at 0.
    pub fn power(&self) -> Vec<f64> {
        self.power2.iter().map(|p| p.max(0.0).sqrt()).collect()
    }

    /// Largest residual norm and power value over unselected points, and the
    /// argmax of the residual (ties to the lowest index).
    fn candidates(&self) -> Option<(usize, f64, f64)> {
        let mut best: Option<(usize, f64)> = None;
        let mut max_power = 0.0f64;
        for (i, &r2) in self.norms2.iter().enumerate() {
            let r = r2.sqrt();
            if self.is_selected[i] {
                continue;
            }
            max_power = max_power.max(self.power2[i].max(0.0).sqrt());
            if best.is_none_or(|(_, b)| r > b) {
                best = Some((i, r));
            }
        }
        best.map(|(i, r)| (i, r, max_power))
    }

    /// Runs until a stop criterion holds, returning the log and the reason.
    pub fn run(&mut self, stop: &StopRule) -> (Vec<GreedyIteration>, StopReason) {
        let cap = stop.max_centers.unwrap_or(usize::MAX).min(self.len());
        let mut log = Vec::new();
        loop {
            let Some((idx, max_residual, max_power)) = self.candidates() else {
                return (log, StopReason::Exhausted);
            };
            if max_residual <= stop.residual_tol * self.initial_max_residual || max_residual == 0.0 {
                return (log, StopReason::ResidualTolerance);
            }
            if max_power < stop.power_tol {
                return (log, StopReason::PowerTolerance);
            }
            if self.selected.len() >= cap {
                return (log, StopReason::MaxCenters);
            }
            if !self.add(idx) {
                return (log, StopReason::Breakdown);
            }
            log.push(GreedyIteration {
                selected: idx,
                max_residual,
                max_power,
            });
        }
    }

    /// Adds local point `idx` as the next centre. Returns false on a
    /// non-positive pivot, leaving the state unchanged.
    pub fn add(&mut self, idx: usize) -> bool {
        let n = self.len();
        let g = self.rows[idx];
        let pivot2 = self.power2[idx] + self.regularization;
        if !(pivot2 > f64::EPSILON * self.gram[(g, g)]) || self.is_selected[idx] {
            return false;
        }
        let pivot = pivot2.sqrt();
        let mut v: Vec<f64> = (0..n).map(|i| self.gram[(self.rows[i], g)]).collect();
        v[idx] += self.regularization;
        for b in &self.basis {
            let bn = b[idx];
            for (vi, bi) in v.iter_mut().zip(b) {
                *vi -= bi * bn;
            }
        }
        for vi in &mut v {
            *vi /= pivot;
        }
        let q = self.outputs;
        let coeff: Vec<f64> = self.residual[idx * q..(idx + 1) * q].iter().map(|r| r / pivot).collect();
        for (i, vi) in v.iter().enumerate() {
            let mut n2 = 0.0;
            for (r, c) in self.residual[i * q..(i + 1) * q].iter_mut().zip(&coeff) {
                *r -= vi * c;
                n2 += *r * *r;
            }
            self.norms2[i] = n2;
            self.power2[i] -= vi * vi;
        }
        self.basis.push(v);
        self.newton.push(coeff);
        self.selected.push(idx);
        self.is_selected[idx] = true;
        true
    }

    /// Lower triangular L with L[i][j] = v_j(x_{s_i}); (A + λI) = L·Lᵀ on the
    /// selected points.
    fn triangle(&self) -> DMatrix<f64> {
        let n = self.selected.len();
        DMatrix::from_fn(n, n, |i, j| if j <= i { self.basis[j][self.selected[i]] } else { 0.0 })
    }

    /// Expansion coefficients α = L⁻ᵀc (n × q).
    pub fn coefficients(&self) -> DMatrix<f64> {
        let n = self.selected.len();
        let q = self.outputs;
        if n == 0 {
            return DMatrix::zeros(0, q);
        }
        let c = DMatrix::from_fn(n, q, |i, k| self.newton[i][k]);
        self.triangle()
            .transpose()
            .solve_upper_triangular(&c)
            .expect("Newton pivots are positive")
    }

    /// P(x) at an arbitrary point, given the kernel row k(x) against the
    /// selected centres (in selection order) and K(x, x).
    pub fn power_from_row(&self, k_row: &[f64], k_xx: f64) -> f64 {
        if self.selected.is_empty() {
            return k_xx.max(0.0).sqrt();
        }
        let v = self
            .triangle()
            .solve_lower_triangular(&DVector::from_column_slice(k_row))
            .expect("Newton pivots are positive");
        (k_xx - v.norm_squared()).max(0.0).sqrt()
    }

    /// Builds the sparse model; `points` holds the coordinates of every row
    /// of the kernel matrix (dim × total, row-major).
    pub fn model(&self, kernel: KernelConfig, points: &[f64], dim: usize) -> InterpolantModel {
        let alpha = self.coefficients();
        let mut centers = Vec::with_capacity(self.selected.len() * dim);
        let mut coefficients = Vec::with_capacity(self.selected.len() * self.outputs);
        for (j, &s) in self.selected.iter().enumerate() {
            let g = self.rows[s];
            centers.extend_from_slice(&points[g * dim..(g + 1) * dim]);
            coefficients.extend((0..self.outputs).map(|k| alpha[(j, k)]));
        }
        InterpolantModel {
            kernel,
            dim,
            centers,
            coefficients,
            outputs: self.outputs,
        }
    }

    /// Model predictions at other rows of the kernel matrix, row-major.
    pub fn predict_rows(&self, rows: &[usize]) -> Vec<f64> {
        let alpha = self.coefficients();
        let q = self.outputs;
        let mut out = vec![0.0; rows.len() * q];
        for (h, &r) in rows.iter().enumerate() {
            let o = &mut out[h * q..(h + 1) * q];
            for (j, &s) in self.selected.iter().enumerate() {
                let k = self.gram[(r, self.rows[s])];
                if k == 0.0 {
                    continue;
                }
                for (ok, a) in o.iter_mut().zip(alpha.row(j).iter()) {
                    *ok += k * a;
                }
            }
        }
        out
    }
}

#[derive(Debug, Clone)]
pub struct GreedyFit {
    pub model: InterpolantModel,
    /// Selected point indices in selection order.
    pub selected: Vec<usize>,
    pub log: Vec<GreedyIteration>,
    pub stop: StopReason,
}

/// Greedy sparse fit of `values` (N × q) at `points` (N × dim).
pub fn vkoga_fit(points: &[f64], dim: usize, values: &[f64], outputs: usize, kc: &KernelConfig, stop: &StopRule) -> Result<GreedyFit> {
    kc.validate()?;
    kc.check_dimension(dim)?;
    if points.is_empty() {
        return Err(Error::InvalidInput("greedy fit needs at least one point".into()));
    }
    if points.len() % dim != 0 {
        return Err(Error::Dimension(format!("{} coordinates do not split into points of dim {dim}", points.len())));
    }
    let n = points.len() / dim;
    let gram = kernel_matrix(points, dim, kc);
    let mut state = GreedyState::new(&gram, (0..n).collect(), values, outputs, kc.regularization)?;
    let (log, stop) = state.run(stop);
    Ok(GreedyFit {
        model: state.model(*kc, points, dim),
        selected: state.selected().to_vec(),
        log,
        stop,
    })
}

/// `count` log-spaced values from `lo` to `hi`, both included.
pub fn log_grid(lo: f64, hi: f64, count: usize) -> Vec<f64> {
    if count == 1 {
        return vec![lo];
    }
    let (a, b) = (lo.log10(), hi.log10());
    (0..count)
        .map(|i| {
            if i + 1 == count {
                hi
            } else {
                10f64.powf(a + (b - a) * i as f64 / (count - 1) as f64)
            }
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CvSpec {
    pub folds: usize,
    pub family: KernelFamily,
    pub shapes: Vec<f64>,
    pub regularizations: Vec<f64>,
    pub seed: u64,
    /// Centre cap during the grid search.
    pub cv_max_centers: usize,
    pub stop: StopRule,
}

impl CvSpec {
    /// 20 shapes in [1e-2, 50], 15 regularisations in [1e-16, 1e-2],
    /// min(10, N) folds.
    pub fn standard(n: usize, seed: u64) -> Self {
        Self {
            folds: n.min(10),
            family: KernelFamily::Gaussian,
            shapes: log_grid(1e-2, 50.0, 20),
            regularizations: log_grid(1e-16, 1e-2, 15),
            seed,
            cv_max_centers: 200,
            stop: StopRule::default(),
        }
    }

    pub fn validate(&self, n: usize) -> Result<()> {
        if self.folds < 2 {
            return Err(Error::InvalidInput(format!("need at least 2 folds, got {}", self.folds)));
        }
        if n < self.folds {
            return Err(Error::InvalidInput(format!("{n} points cannot fill {} folds", self.folds)));
        }
        if self.shapes.is_empty() || self.regularizations.is_empty() {
            return Err(Error::InvalidInput("cross-validation grids must be nonempty".into()));
        }
        for &e in &self.shapes {
            KernelConfig {
                family: self.family,
                shape: e,
                regularization: 0.0,
            }
            .validate()?;
        }
        for &l in &self.regularizations {
            KernelConfig::gaussian(1.0, l).validate()?;
        }
        Ok(())
    }
}

/// Seeded shuffle split into `k` folds of near-equal size.
pub fn fold_assignment(n: usize, k: usize, seed: u64) -> Vec<Vec<usize>> {
    let mut idx: Vec<usize> = (0..n).collect();
    idx.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let mut folds = vec![Vec::new(); k];
    for (pos, i) in idx.into_iter().enumerate() {
        folds[pos % k].push(i);
    }
    for f in &mut folds {
        f.sort_unstable();
    }
    folds
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CvCell {
    pub shape: f64,
    pub regularization: f64,
    /// Mean over folds of the largest held-out ‖f − f̂‖₂.
    pub score: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TrainingReport {
    pub schema: String,
    pub seed: u64,
    pub folds: usize,
    pub points: usize,
    pub outputs: usize,
    pub family: KernelFamily,
    pub shape: f64,
    pub regularization: f64,
    pub centers: usize,
    pub stop: StopReason,
    pub iterations: Vec<GreedyIteration>,
    pub grid: Vec<CvCell>,
}

#[derive(Debug, Clone)]
pub struct CvResult {
    pub model: InterpolantModel,
    pub fit: GreedyFit,
    pub report: TrainingReport,
}

/// Scores every (ε, λ) pair by k-fold cross-validation, picks the lowest
/// score (first in grid order on ties) and retrains on all points.
pub fn cross_validate(points: &[f64], dim: usize, values: &[f64], outputs: usize, spec: &CvSpec) -> Result<CvResult> {
    if dim == 0 || points.len() % dim != 0 {
        return Err(Error::Dimension(format!("{} coordinates do not split into points of dim {dim}", points.len())));
    }
    let n = points.len() / dim;
    spec.validate(n)?;
    if values.len() != n * outputs {
        return Err(Error::Dimension(format!("{n} points need {} values, got {}", n * outputs, values.len())));
    }
    let folds = fold_assignment(n, spec.folds, spec.seed);
    if folds.iter().any(Vec::is_empty) {
        return Err(Error::InvalidInput("a cross-validation fold is empty".into()));
    }
    let cv_stop = StopRule {
        max_centers: Some(spec.cv_max_centers),
        ..spec.stop
    };

    let rows: Vec<Vec<CvCell>> = spec
        .shapes
        .par_iter()
        .map(|&shape| -> Result<Vec<CvCell>> {
            let kc = KernelConfig {
                family: spec.family,
                shape,
                regularization: 0.0,
            };
            kc.check_dimension(dim)?;
            let gram = kernel_matrix(points, dim, &kc);
            spec.regularizations
                .iter()
                .map(|&lambda| {
                    let mut total = 0.0;
                    for held in &folds {
                        let train: Vec<usize> = (0..n).filter(|i| held.binary_search(i).is_err()).collect();
                        let vals: Vec<f64> = train
                            .iter()
                            .flat_map(|&i| values[i * outputs..(i + 1) * outputs].iter().copied())
                            .collect();
                        let mut state = GreedyState::new(&gram, train, &vals, outputs, lambda)?;
                        state.run(&cv_stop);
                        let pred = state.predict_rows(held);
                        let worst = held
                            .iter()
                            .enumerate()
                            .map(|(h, &i)| {
                                let f = &values[i * outputs..(i + 1) * outputs];
                                let p = &pred[h * outputs..(h + 1) * outputs];
                                f.iter().zip(p).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt()
                            })
                            .fold(0.0f64, |a, e| if e.is_nan() || a.is_nan() { f64::NAN } else { a.max(e) });
                        total += worst;
                    }
                    Ok(CvCell {
                        shape,
                        regularization: lambda,
                        score: total / folds.len() as f64,
                    })
                })
                .collect()
        })
        .collect::<Result<_>>()?;
    let grid: Vec<CvCell> = rows.into_iter().flatten().collect();
    let best = grid
        .iter()
        .filter(|c| c.score.is_finite())
        .fold(None::<&CvCell>, |b, c| match b {
            Some(b) if b.score <= c.score => Some(b),
            _ => Some(c),
        })
        .ok_or_else(|| Error::Numerical("every cross-validation cell produced a non-finite score".into()))?
        .clone();

    let kc = KernelConfig {
        family: spec.family,
        shape: best.shape,
        regularization: best.regularization,
    };
    let fit = vkoga_fit(points, dim, values, outputs, &kc, &spec.stop)?;
    let report = TrainingReport {
        schema: REPORT_SCHEMA.into(),
        seed: spec.seed,
        folds: spec.folds,
        points: n,
        outputs,
        family: spec.family,
        shape: best.shape,
        regularization: best.regularization,
        centers: fit.selected.len(),
        stop: fit.stop,
        iterations: fit.log.clone(),
        grid,
    };
    Ok(CvResult {
        model: fit.model.clone(),
        fit,
        report,
    })
}
