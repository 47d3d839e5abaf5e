//! Zero-dimensional models attached to vessel ends. Each one turns the
//! outgoing characteristics of the adjacent vessels into the missing
//! ingoing ones.

mod bifurcation;
mod heart;
mod stenosis;
mod windkessel;

pub use bifurcation::{bifurcation_solve, junction_residuals, BifurcationSolution, JunctionResiduals};
pub use heart::{elastance, heart_step, HeartParams, HeartPhase, HeartState, HeartStep};
pub use stenosis::{stenosis_step, StenosisCoefficients, StenosisStep, EXPANSION_COEFF, INERTIA_COEFF};
pub use windkessel::{windkessel_solve, WindkesselParams, WindkesselState};

use crate::solver::{CharacteristicPair, VesselModel};

/// Residual tolerance of the scalar boundary solves, in characteristic units (cm/s).
pub const SCALAR_TOLERANCE: f64 = 1e-10;

/// Root of an increasing function on a sign-changing bracket by Newton's
/// method with bisection fallback. `f` returns (value, derivative).
/// On failure the last iterate and its residual are returned.
pub(crate) fn safeguarded_newton(
    mut f: impl FnMut(f64) -> (f64, f64),
    mut lo: f64,
    mut hi: f64,
    start: f64,
    tol: f64,
) -> std::result::Result<f64, (f64, f64)> {
    let mut x = if start > lo && start < hi { start } else { 0.5 * (lo + hi) };
    let mut best = (x, f64::INFINITY);
    for _ in 0..200 {
        let (fx, dfx) = f(x);
        if !fx.is_finite() {
            return Err((x, fx));
        }
        if fx.abs() < best.1.abs() {
            best = (x, fx);
        }
        if fx.abs() <= tol {
            return Ok(x);
        }
        if fx < 0.0 {
            lo = x;
        } else {
            hi = x;
        }
        if hi - lo <= 4.0 * f64::EPSILON * x.abs().max(f64::MIN_POSITIVE) {
            // bracket collapsed to adjacent floats: residual is at roundoff level
            return Ok(best.0);
        }
        let newton = x - fx / dfx;
        x = if dfx > 0.0 && newton > lo && newton < hi {
            newton
        } else {
            0.5 * (lo + hi)
        };
    }
    Err(best)
}

/// Which characteristic leaves the vessel at the end being coupled.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OutgoingSide {
    /// Inlet end: W1 is outgoing, W2 must be supplied.
    Inlet,
    /// Outlet end: W2 is outgoing, W1 must be supplied.
    Outlet,
}

/// Area at a vessel end carrying flow `flow`, given the outgoing
/// characteristic there. Returns `None` when no subcritical state exists.
///
/// With m = Q at the inlet and m = −Q at the outlet, the area solves
/// g(A) = 4(c(A) − c0) − m/A − W_out = 0, and g' = (c + m/A)/A is positive on
/// the subcritical branch.
pub(crate) fn area_for_flow(
    model: &VesselModel,
    side: OutgoingSide,
    w_out: f64,
    flow: f64,
    guess: f64,
) -> Option<f64> {
    let m = match side {
        OutgoingSide::Inlet => flow,
        OutgoingSide::Outlet => -flow,
    };
    let a0 = model.rest_area;
    let c_of = |a: f64| model.c0 * (a / a0).sqrt().sqrt();
    let g = |a: f64| {
        let c = c_of(a);
        (4.0 * (c - model.c0) - m / a - w_out, (c + m / a) / a)
    };
    let lo = if m >= 0.0 {
        let mut lo = a0.min(guess.max(f64::MIN_POSITIVE));
        while g(lo).0 >= 0.0 {
            lo *= 0.5;
            if lo < 1e-12 * a0 {
                return None;
            }
        }
        lo
    } else {
        // area at which |v| = c; the subcritical root lies above it
        let crit = (-m * a0.sqrt().sqrt() / model.c0).powf(0.8);
        if g(crit).0 >= 0.0 {
            return None;
        }
        crit
    };
    let mut hi = guess.max(a0).max(lo * 2.0);
    while g(hi).0 <= 0.0 {
        hi *= 2.0;
        if hi > 1e6 * a0 {
            return None;
        }
    }
    safeguarded_newton(g, lo, hi, guess, SCALAR_TOLERANCE).ok()
}

/// Full boundary pair at a vessel end once the area there is known.
pub(crate) fn boundary_pair(side: OutgoingSide, w_out: f64, area: f64, flow: f64) -> CharacteristicPair {
    let v = flow / area;
    match side {
        OutgoingSide::Inlet => CharacteristicPair::new(w_out, w_out + 2.0 * v),
        OutgoingSide::Outlet => CharacteristicPair::new(w_out - 2.0 * v, w_out),
    }
}
