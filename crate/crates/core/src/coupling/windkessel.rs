//! Three-element Windkessel outlet.
//!
//! The ODE p + R2·C·p' = p_v + (R1 + R2)·Q + R1·R2·C·Q' is carried in its
//! circuit form: p = p_c + R1·Q with C·p_c' = Q − (p_c − p_v)/R2.

use serde::{Deserialize, Serialize};

use super::{boundary_pair, safeguarded_newton, OutgoingSide, SCALAR_TOLERANCE};
use crate::error::{Error, Result};
use crate::network::{FluidProperties, VesselSegment};
use crate::solver::{CharacteristicPair, VesselModel};

/// Resistances in dyn·s/cm⁵, compliance in cm⁵/dyn, pressure in dyn/cm².
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WindkesselParams {
    pub r1: f64,
    pub r2: f64,
    pub compliance: f64,
    pub venous_pressure: f64,
}

impl WindkesselParams {
    /// Z = ρ·c(A0)/A0 of the attached vessel.
    pub fn characteristic_impedance(seg: &VesselSegment, fluid: &FluidProperties) -> f64 {
        let c0 = (seg.stiffness / (2.0 * fluid.density)).sqrt();
        fluid.density * c0 / seg.rest_area
    }

    pub fn validate(&self, segment: u32) -> Result<()> {
        for (name, v) in [("r1", self.r1), ("r2", self.r2), ("compliance", self.compliance)] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::Validation(format!(
                    "terminal on segment {segment}: {name} must be > 0, got {v}"
                )));
            }
        }
        if !self.venous_pressure.is_finite() {
            return Err(Error::Validation(format!(
                "terminal on segment {segment}: venous pressure must be finite"
            )));
        }
        Ok(())
    }

    pub fn total_resistance(&self) -> f64 {
        self.r1 + self.r2
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WindkesselState {
    /// Pressure across the compliance, dyn/cm².
    pub capacitor_pressure: f64,
}

impl WindkesselState {
    pub fn initial(wp: &WindkesselParams) -> Self {
        Self {
            capacitor_pressure: wp.venous_pressure,
        }
    }
}

/// Advances the capacitor pressure with explicit Euler using the outlet flow
/// at t, then finds the outlet area A at t + Δt such that
/// p(A) − R1·Q(A) = p_c, where Q(A) = A·(W2 − 4(c(A) − c0)) follows from the
/// outgoing W2. Returns the new state and the outlet boundary pair.
pub fn windkessel_solve(
    outgoing_w2: f64,
    state: &WindkesselState,
    outlet_flow: f64,
    dt: f64,
    wp: &WindkesselParams,
    model: &VesselModel,
    area_guess: f64,
    time: f64,
) -> Result<(WindkesselState, CharacteristicPair)> {
    let pc = state.capacitor_pressure
        + dt / wp.compliance
            * (outlet_flow - (state.capacitor_pressure - wp.venous_pressure) / wp.r2);
    let a0 = model.rest_area;
    // residual in pressure units, scaled to characteristic units via the
    // rest impedance so the tolerance has the same meaning as elsewhere
    let scale = 1.0 / (model.density * model.c0);
    let g = |a: f64| {
        let c = model.c0 * (a / a0).sqrt().sqrt();
        let v = outgoing_w2 - 4.0 * (c - model.c0);
        let val = model.pressure(a) - wp.r1 * a * v - pc;
        let slope = model.pressure_slope(a) + wp.r1 * (c - v);
        (val * scale, slope * scale)
    };
    let fail = |residual: f64| Error::NonConvergence {
        what: format!("terminal on vessel {}", model.id),
        time,
        residual,
    };
    let mut lo = a0.min(area_guess);
    while g(lo).0 >= 0.0 {
        lo *= 0.5;
        if lo < 1e-12 * a0 {
            return Err(fail(g(lo).0));
        }
    }
    let mut hi = a0.max(area_guess);
    while g(hi).0 <= 0.0 {
        hi *= 2.0;
        if hi > 1e6 * a0 {
            return Err(fail(g(hi).0));
        }
    }
    let area = safeguarded_newton(g, lo, hi, area_guess, SCALAR_TOLERANCE).map_err(|(_, r)| fail(r))?;
    let c = model.c0 * (area / a0).sqrt().sqrt();
    let flow = area * (outgoing_w2 - 4.0 * (c - model.c0));
    Ok((
        WindkesselState {
            capacitor_pressure: pc,
        },
        boundary_pair(OutgoingSide::Outlet, outgoing_w2, area, flow),
    ))
}
