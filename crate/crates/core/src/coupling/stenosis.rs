//! Lumped stenosis between the outlet of a proximal vessel and the inlet of
//! a distal one.
//!
//! The flow through the narrowing obeys
//! I·Q' = Δp − a·Q − b·Q|Q|, with inertance I = K_u ρ l_s / A0,
//! viscous loss a = K_v η l_s / (A0 D_s) and expansion loss
//! b = K_t ρ (A0/A_s − 1)² / (2 A0²).

use serde::{Deserialize, Serialize};

use super::{area_for_flow, boundary_pair, safeguarded_newton, OutgoingSide, SCALAR_TOLERANCE};
use crate::error::{Error, Result};
use crate::network::{FluidProperties, StenosisPlacement};
use crate::solver::{CharacteristicPair, VesselModel};

/// K_t
pub const EXPANSION_COEFF: f64 = 1.52;
/// K_u
pub const INERTIA_COEFF: f64 = 1.2;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StenosisCoefficients {
    /// A_s = (1 − R_s)·A0s, cm²
    pub area: f64,
    /// D_s = 2√(A_s/π), cm
    pub diameter: f64,
    /// K_v (dimensionless); infinite at full occlusion
    pub viscous_coeff: f64,
    /// I, g/cm⁴
    pub inertance: f64,
    /// a, dyn·s/cm⁵
    pub viscous: f64,
    /// b, g/cm⁷
    pub expansion: f64,
}

impl StenosisCoefficients {
    pub fn new(placement: &StenosisPlacement, fluid: &FluidProperties) -> Self {
        let a0 = placement.rest_area;
        let ls = placement.length;
        let area = (1.0 - placement.degree) * a0;
        let diameter = 2.0 * (area / std::f64::consts::PI).sqrt();
        let ratio = a0 / area;
        let viscous_coeff = 32.0 * (0.83 * ls + 1.64 * diameter) * ratio * ratio / diameter;
        Self {
            area,
            diameter,
            viscous_coeff,
            inertance: INERTIA_COEFF * fluid.density * ls / a0,
            viscous: viscous_coeff * fluid.viscosity * ls / (a0 * diameter),
            expansion: EXPANSION_COEFF * fluid.density / (2.0 * a0 * a0) * (ratio - 1.0).powi(2),
        }
    }

    pub fn is_occluded(&self) -> bool {
        !(self.area > 0.0)
    }

    /// Flow at which the steady pressure drop `dp` is balanced by the losses:
    /// the positive root of b·Q² + a·Q = dp for dp ≥ 0 (odd in dp).
    pub fn steady_flow(&self, dp: f64) -> f64 {
        if self.is_occluded() {
            return 0.0;
        }
        let (a, b) = (self.viscous, self.expansion);
        let d = dp.abs();
        let q = if b == 0.0 {
            d / a
        } else {
            // rationalised root, no cancellation for small b
            2.0 * d / (a + (a * a + 4.0 * b * d).sqrt())
        };
        q.copysign(dp)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StenosisStep {
    pub flow: f64,
    /// Boundary pair at the proximal outlet.
    pub proximal: CharacteristicPair,
    /// Boundary pair at the distal inlet.
    pub distal: CharacteristicPair,
}

/// Advances Q_s to t + Δt and returns the boundary pairs on both sides.
///
/// The step is backward Euler in Q_s with the pressure drop
/// p_prox(l) − p_dist(0) evaluated at the new time through the outgoing
/// characteristics, so the one-dimensional equation is monotone in Q_s.
pub fn stenosis_step(
    flow: f64,
    outgoing_w2_prox: f64,
    outgoing_w1_dist: f64,
    dt: f64,
    coeffs: &StenosisCoefficients,
    models: [&VesselModel; 2],
    area_guess: [f64; 2],
    time: f64,
) -> Result<StenosisStep> {
    let [mp, md] = models;
    if coeffs.is_occluded() {
        return Ok(StenosisStep {
            flow: 0.0,
            proximal: CharacteristicPair::new(outgoing_w2_prox, outgoing_w2_prox),
            distal: CharacteristicPair::new(outgoing_w1_dist, outgoing_w1_dist),
        });
    }
    let scale = 1.0 / (mp.density * mp.c0);
    let areas = |q: f64| -> Option<(f64, f64)> {
        let ap = area_for_flow(mp, OutgoingSide::Outlet, outgoing_w2_prox, q, area_guess[0])?;
        let ad = area_for_flow(md, OutgoingSide::Inlet, outgoing_w1_dist, q, area_guess[1])?;
        Some((ap, ad))
    };
    let residual = |q: f64| -> (f64, f64) {
        let Some((ap, ad)) = areas(q) else {
            // no subcritical state: too much flow drains the proximal end
            // (q > 0) or floods the distal end (q < 0)
            return (1e30f64.copysign(q), 1.0);
        };
        let (vp, vd) = (q / ap, q / ad);
        let (cp, cd) = (mp.wave_speed(ap).unwrap_or(f64::NAN), md.wave_speed(ad).unwrap_or(f64::NAN));
        let dp = mp.pressure(ap) - md.pressure(ad);
        let f = coeffs.inertance / dt * (q - flow) + coeffs.viscous * q + coeffs.expansion * q * q.abs() - dp;
        let df = coeffs.inertance / dt
            + coeffs.viscous
            + 2.0 * coeffs.expansion * q.abs()
            + mp.pressure_slope(ap) / (cp - vp)
            + md.pressure_slope(ad) / (cd + vd);
        (f * scale, df * scale)
    };
    let fail = |r: f64| Error::NonConvergence {
        what: format!("stenosis (degree {})", 1.0 - coeffs.area / mp.rest_area),
        time,
        residual: r,
    };
    let mut h = flow.abs().max(1.0);
    let mut hi = flow;
    while residual(hi).0 <= 0.0 {
        hi = flow + h;
        h *= 2.0;
        if h > 1e9 {
            return Err(fail(residual(hi).0));
        }
    }
    let mut h = flow.abs().max(1.0);
    let mut lo = flow;
    while residual(lo).0 >= 0.0 {
        lo = flow - h;
        h *= 2.0;
        if h > 1e9 {
            return Err(fail(residual(lo).0));
        }
    }
    let q = safeguarded_newton(residual, lo, hi, flow, SCALAR_TOLERANCE).map_err(|(_, r)| fail(r))?;
    let (ap, ad) = areas(q).ok_or_else(|| fail(f64::NAN))?;
    if !q.is_finite() {
        return Err(fail(f64::NAN));
    }
    Ok(StenosisStep {
        flow: q,
        proximal: boundary_pair(OutgoingSide::Outlet, outgoing_w2_prox, ap, q),
        distal: boundary_pair(OutgoingSide::Inlet, outgoing_w1_dist, ad, q),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::network::VesselSegment;
    use proptest::prelude::*;

    fn setup(degree: f64) -> (StenosisCoefficients, [VesselModel; 2]) {
        let fluid = FluidProperties::default();
        let placement = StenosisPlacement {
            proximal: 2,
            distal: 4,
            length: 1.0,
            rest_area: 1.2,
            degree,
        };
        let mk = |id, l| VesselModel::new(&VesselSegment::new(id, "leg", l, 1.2, 1.19e6, 0.25).unwrap(), &fluid);
        (StenosisCoefficients::new(&placement, &fluid), [mk(2, 10.0), mk(4, 21.2)])
    }

    #[test]
    fn occlusion_stops_flow() {
        let (c, [mp, md]) = setup(1.0);
        assert!(c.is_occluded());
        let s = stenosis_step(12.0, 40.0, -10.0, 2.5e-3, &c, [&mp, &md], [1.2; 2], 0.0).unwrap();
        assert_eq!(s.flow, 0.0);
        assert_eq!(s.proximal.w1, 40.0);
        assert_eq!(s.distal.w2, -10.0);
    }

    #[test]
    fn rest_is_fixed_point() {
        let (c, [mp, md]) = setup(0.5);
        let s = stenosis_step(0.0, 0.0, 0.0, 2.5e-3, &c, [&mp, &md], [1.2; 2], 0.0).unwrap();
        assert_eq!(s.flow, 0.0);
    }

    // Holding the boundary pressures fixed and stepping long enough must
    // settle on the positive root of a·Q + b·Q² = Δp.
    #[test]
    fn steady_flow_matches_quadratic_root() {
        let (c, _) = setup(0.6);
        let dp = 2.0e3;
        let (a, b) = (c.viscous, c.expansion);
        let oracle = (-a + (a * a + 4.0 * b * dp).sqrt()) / (2.0 * b);
        assert!((c.steady_flow(dp) - oracle).abs() < 1e-12 * oracle);
        assert!((c.steady_flow(-dp) + oracle).abs() < 1e-12 * oracle);
        let mut q = 0.0;
        let dt = 1e-3;
        for _ in 0..20000 {
            q = (q + dt / c.inertance * (dp - a * q - b * q * q.abs())).max(0.0);
        }
        assert!((q - oracle).abs() < 1e-8 * oracle);
    }

    #[test]
    fn coupled_step_balances_losses() {
        let (c, [mp, md]) = setup(0.7);
        let dt = 2.5e-3;
        let (wp, wd) = (30.0, -5.0);
        let s = stenosis_step(10.0, wp, wd, dt, &c, [&mp, &md], [1.2; 2], 0.0).unwrap();
        let (ap, qp) = mp.from_characteristics(s.proximal).unwrap();
        let (ad, qd) = md.from_characteristics(s.distal).unwrap();
        assert!((qp - s.flow).abs() < 1e-8 * s.flow.abs().max(1.0));
        assert!((qd - s.flow).abs() < 1e-8 * s.flow.abs().max(1.0));
        let q = s.flow;
        let lhs = c.inertance / dt * (q - 10.0);
        let rhs = mp.pressure(ap) - md.pressure(ad) - c.viscous * q - c.expansion * q * q.abs();
        assert!((lhs - rhs).abs() < 1e-6 * rhs.abs().max(1.0), "{lhs} {rhs}");
    }

    proptest! {
        #[test]
        fn viscous_coefficient_formula(ls in 0.2f64..3.0, a0 in 0.3f64..5.0, degree in 0.0f64..0.98) {
            let fluid = FluidProperties::default();
            let p = StenosisPlacement { proximal: 1, distal: 2, length: ls, rest_area: a0, degree };
            let c = StenosisCoefficients::new(&p, &fluid);
            prop_assert_eq!(c.area, (1.0 - degree) * a0);
            let ds = 2.0 * (c.area / std::f64::consts::PI).sqrt();
            let kv = 32.0 * (0.83 * ls + 1.64 * ds) * (a0 / c.area).powi(2) / ds;
            prop_assert!((c.viscous_coeff - kv).abs() <= 4.0 * f64::EPSILON * kv);
        }
    }
}
