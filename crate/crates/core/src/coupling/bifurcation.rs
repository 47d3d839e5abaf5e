//! Bifurcation of one parent into two children: conservation of mass and
//! continuity of total pressure, solved by Newton's method in the three
//! ingoing characteristics.

use crate::error::{Error, Result};
use crate::solver::{CharacteristicPair, VesselModel};

const MAX_ITER: usize = 50;
/// Newton step tolerance in characteristic units (cm/s).
const STEP_TOL: f64 = 1e-10;
/// Relative residual tolerance on mass and total pressure.
const RESIDUAL_TOL: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BifurcationSolution {
    /// Boundary pair at the parent outlet.
    pub parent: CharacteristicPair,
    /// Boundary pairs at the child inlets.
    pub children: [CharacteristicPair; 2],
    /// (W1 parent, W2 child 0, W2 child 1), reusable as the next start.
    pub unknowns: [f64; 3],
    pub iterations: usize,
}

/// Relative coupling residuals of a junction state.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct JunctionResiduals {
    /// |Q_p − Q_c0 − Q_c1| / max(1, |Q_p|)
    pub mass: f64,
    /// max_c |p_t,p − p_t,c| / max(|p_t,p|, 1 dyn/cm²)
    pub total_pressure: f64,
}

struct Eval {
    flow: f64,
    total_pressure: f64,
    /// Magnitude of the terms summed into the total pressure.
    pressure_scale: f64,
    dq: (f64, f64),
    dpt: (f64, f64),
}

/// Flow, total pressure and their derivatives with respect to (W1, W2).
fn eval(m: &VesselModel, w: CharacteristicPair) -> Option<Eval> {
    let base = m.area_base(w);
    if !(base > 0.0) {
        return None;
    }
    let a = m.rest_area * (base * base) * (base * base);
    let c = m.c0 * base;
    let v = w.velocity();
    let da = a / (2.0 * c);
    let dp = m.stiffness * base / (4.0 * m.c0);
    Some(Eval {
        flow: a * v,
        total_pressure: 0.5 * m.density * v * v + m.stiffness * (base * base - 1.0),
        pressure_scale: 0.5 * m.density * v * v + m.stiffness * (base * base + 1.0),
        dq: (v * da - 0.5 * a, v * da + 0.5 * a),
        dpt: (-0.5 * m.density * v + dp, 0.5 * m.density * v + dp),
    })
}

pub fn junction_residuals(
    models: [&VesselModel; 3],
    parent: CharacteristicPair,
    children: [CharacteristicPair; 2],
) -> JunctionResiduals {
    let pt = |m: &VesselModel, w: CharacteristicPair| m.total_pressure_of(w);
    let q = |m: &VesselModel, w: CharacteristicPair| m.area_of(w) * w.velocity();
    let qp = q(models[0], parent);
    let ptp = pt(models[0], parent);
    let mass = (qp - q(models[1], children[0]) - q(models[2], children[1])).abs() / qp.abs().max(1.0);
    let total_pressure = (ptp - pt(models[1], children[0]))
        .abs()
        .max((ptp - pt(models[2], children[1])).abs())
        / ptp.abs().max(1.0);
    JunctionResiduals {
        mass,
        total_pressure,
    }
}

fn solve3(j: [[f64; 3]; 3], r: [f64; 3]) -> Option<[f64; 3]> {
    let det = |m: [[f64; 3]; 3]| {
        m[0][0] * (m[1][1] * m[2][2] - m[1][2] * m[2][1])
            - m[0][1] * (m[1][0] * m[2][2] - m[1][2] * m[2][0])
            + m[0][2] * (m[1][0] * m[2][1] - m[1][1] * m[2][0])
    };
    let d = det(j);
    if !(d.abs() > 0.0) || !d.is_finite() {
        return None;
    }
    let mut x = [0.0; 3];
    for (col, xc) in x.iter_mut().enumerate() {
        let mut m = j;
        for row in 0..3 {
            m[row][col] = r[row];
        }
        *xc = det(m) / d;
    }
    Some(x)
}

/// Solves for the ingoing characteristics at a bifurcation.
///
/// `models` are (parent, child 0, child 1); `outgoing` is (W2 parent,
/// W1 child 0, W1 child 1) extrapolated at the new time; `start` is the
/// initial guess for (W1 parent, W2 child 0, W2 child 1).
pub fn bifurcation_solve(
    models: [&VesselModel; 3],
    outgoing: [f64; 3],
    start: [f64; 3],
    junction: usize,
    time: f64,
) -> Result<BifurcationSolution> {
    let pairs = |x: [f64; 3]| {
        (
            CharacteristicPair::new(x[0], outgoing[0]),
            [
                CharacteristicPair::new(outgoing[1], x[1]),
                CharacteristicPair::new(outgoing[2], x[2]),
            ],
        )
    };
    let mut x = start;
    let mut last = f64::INFINITY;
    for it in 0..=MAX_ITER {
        let (p, [c0, c1]) = pairs(x);
        let (Some(ep), Some(e0), Some(e1)) = (eval(models[0], p), eval(models[1], c0), eval(models[2], c1))
        else {
            return Err(Error::NonConvergence {
                what: format!("junction {junction} (collapsed iterate)"),
                time,
                residual: last,
            });
        };
        let f = [
            ep.flow - e0.flow - e1.flow,
            ep.total_pressure - e0.total_pressure,
            ep.total_pressure - e1.total_pressure,
        ];
        let mass = f[0].abs() / ep.flow.abs().max(1.0);
        let press = f[1].abs().max(f[2].abs()) / ep.total_pressure.abs().max(1.0);
        last = mass.max(press);
        if it == MAX_ITER {
            break;
        }
        // parent contributes through W1, children through W2
        let jac = [
            [ep.dq.0, -e0.dq.1, -e1.dq.1],
            [ep.dpt.0, -e0.dpt.1, 0.0],
            [ep.dpt.0, 0.0, -e1.dpt.1],
        ];
        let Some(dx) = solve3(jac, f) else {
            break;
        };
        for k in 0..3 {
            x[k] -= dx[k];
        }
        let step = dx.iter().fold(0.0f64, |a, d| a.max(d.abs()));
        // near zero pressure the residual cannot drop below the roundoff of its terms
        let floor = 64.0 * f64::EPSILON * ep.pressure_scale.max(e0.pressure_scale).max(e1.pressure_scale);
        let press_ok = press <= RESIDUAL_TOL || f[1].abs().max(f[2].abs()) <= floor;
        if step <= STEP_TOL && mass <= RESIDUAL_TOL && press_ok {
            let (parent, children) = pairs(x);
            return Ok(BifurcationSolution {
                parent,
                children,
                unknowns: x,
                iterations: it + 1,
            });
        }
    }
    Err(Error::NonConvergence {
        what: format!("junction {junction}"),
        time,
        residual: last,
    })
}
