//! Pointwise relations between the primary variables (A, Q) and the
//! characteristic variables (W1, W2) of one vessel.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::network::{FluidProperties, VesselSegment};

/// Flow is flagged as supercritical once |v| reaches this fraction of v_c.
pub const SUPERCRITICAL_RATIO: f64 = 0.99;

/// Backward (`w1`) and forward (`w2`) travelling characteristic variables, cm/s.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct CharacteristicPair {
    pub w1: f64,
    pub w2: f64,
}

impl CharacteristicPair {
    pub const REST: Self = Self { w1: 0.0, w2: 0.0 };

    #[inline]
    pub fn new(w1: f64, w2: f64) -> Self {
        Self { w1, w2 }
    }

    /// Fluid velocity v = (W2 − W1)/2.
    #[inline]
    pub fn velocity(&self) -> f64 {
        0.5 * (self.w2 - self.w1)
    }

    #[inline]
    pub fn lerp(a: Self, b: Self, theta: f64) -> Self {
        Self {
            w1: a.w1 + theta * (b.w1 - a.w1),
            w2: a.w2 + theta * (b.w2 - a.w2),
        }
    }
}

/// Per-vessel constants needed by the characteristic relations.
///
/// Because G0 and A0 are constant along a vessel, the wave speed is linear
/// in W1 + W2: v_c = c0 + (W1 + W2)/8 with c0 = √(G0/2ρ). Everything in the
/// inner loop works from that identity.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VesselModel {
    pub id: u32,
    pub rest_area: f64,
    pub stiffness: f64,
    pub density: f64,
    /// K_r, cm²/s
    pub friction: f64,
    /// √(G0/2ρ), cm/s
    pub c0: f64,
    pub length: f64,
    pub cells: usize,
    pub dz: f64,
}

impl VesselModel {
    pub fn new(seg: &VesselSegment, fluid: &FluidProperties) -> Self {
        Self {
            id: seg.id,
            rest_area: seg.rest_area,
            stiffness: seg.stiffness,
            density: fluid.density,
            friction: fluid.friction(),
            c0: (seg.stiffness / (2.0 * fluid.density)).sqrt(),
            length: seg.length,
            cells: seg.cells,
            dz: seg.dz(),
        }
    }

    /// v_c(A) = √(G0/(2ρ)·√(A/A0)).
    pub fn wave_speed(&self, area: f64) -> Result<f64> {
        if !(area > 0.0) {
            return Err(Error::Domain(format!("vessel {}: area must be > 0, got {area}", self.id)));
        }
        Ok(self.c0 * (area / self.rest_area).sqrt().sqrt())
    }

    /// (λ1, λ2) = (v − v_c, v + v_c).
    pub fn eigenvalues(&self, area: f64, flow: f64) -> Result<(f64, f64)> {
        let c = self.wave_speed(area)?;
        let v = flow / area;
        if v.abs() >= SUPERCRITICAL_RATIO * c {
            return Err(Error::Supercritical {
                segment: self.id,
                node: 0,
                time: f64::NAN,
                ratio: v.abs() / c,
            });
        }
        Ok((v - c, v + c))
    }

    pub fn to_characteristics(&self, area: f64, flow: f64) -> Result<CharacteristicPair> {
        let c = self.wave_speed(area)?;
        let v = flow / area;
        let k = 4.0 * (c - self.c0);
        Ok(CharacteristicPair { w1: -v + k, w2: v + k })
    }

    pub fn from_characteristics(&self, w: CharacteristicPair) -> Result<(f64, f64)> {
        let base = self.area_base(w);
        if !(base > 0.0) {
            return Err(Error::Domain(format!(
                "vessel {}: characteristics ({}, {}) collapse the vessel",
                self.id, w.w1, w.w2
            )));
        }
        let area = self.rest_area * (base * base) * (base * base);
        Ok((area, area * w.velocity()))
    }

    /// (A/A0)^{1/4} = 1 + (W1 + W2)/(8 c0).
    #[inline]
    pub fn area_base(&self, w: CharacteristicPair) -> f64 {
        1.0 + (w.w1 + w.w2) / (8.0 * self.c0)
    }

    #[inline]
    pub fn speed_of(&self, w: CharacteristicPair) -> f64 {
        self.c0 + 0.125 * (w.w1 + w.w2)
    }

    #[inline]
    pub fn area_of(&self, w: CharacteristicPair) -> f64 {
        let b = self.area_base(w);
        self.rest_area * (b * b) * (b * b)
    }

    /// Rate of change of (W1, W2) along the characteristics caused by wall
    /// friction: L·S = (K_r Q/A², −K_r Q/A²).
    #[inline]
    pub fn source_term(&self, w: CharacteristicPair) -> CharacteristicPair {
        if self.friction == 0.0 {
            return CharacteristicPair::REST;
        }
        let s = self.friction * w.velocity() / self.area_of(w);
        CharacteristicPair { w1: s, w2: -s }
    }

    /// p = G0 (√(A/A0) − 1), unchecked.
    #[inline]
    pub fn pressure(&self, area: f64) -> f64 {
        self.stiffness * ((area / self.rest_area).sqrt() - 1.0)
    }

    /// A = A0 (p/G0 + 1)², unchecked.
    #[inline]
    pub fn area_from_pressure_unchecked(&self, pressure: f64) -> f64 {
        let b = pressure / self.stiffness + 1.0;
        self.rest_area * b * b
    }

    /// dp/dA.
    #[inline]
    pub fn pressure_slope(&self, area: f64) -> f64 {
        0.5 * self.stiffness / (area * self.rest_area).sqrt()
    }

    /// p from characteristics: G0((A/A0)^{1/2} − 1) = G0(base² − 1).
    #[inline]
    pub fn pressure_of(&self, w: CharacteristicPair) -> f64 {
        let b = self.area_base(w);
        self.stiffness * (b * b - 1.0)
    }

    /// Total pressure ρ v²/2 + p.
    #[inline]
    pub fn total_pressure_of(&self, w: CharacteristicPair) -> f64 {
        let v = w.velocity();
        0.5 * self.density * v * v + self.pressure_of(w)
    }

    /// Characteristic impedance ρ c0 / A0.
    pub fn impedance(&self) -> f64 {
        self.density * self.c0 / self.rest_area
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn model(g0: f64, a0: f64, rho: f64) -> VesselModel {
        let seg = VesselSegment::new(1, "v", 10.0, a0, g0, 0.1).unwrap();
        VesselModel::new(&seg, &FluidProperties::new(rho, 0.04).unwrap())
    }

    #[test]
    fn wave_speed_values() {
        let m = model(5.0e5, 2.0, 1.05);
        let c0 = (5.0e5f64 / 2.1).sqrt();
        assert_eq!(m.wave_speed(2.0).unwrap(), c0);
        assert!((m.wave_speed(32.0).unwrap() - 2.0 * c0).abs() < 1e-12 * c0);
        let unit = model(2.0 * 1.05, 1.0, 1.05);
        assert_eq!(unit.wave_speed(1.0).unwrap(), 1.0);
        assert!(m.wave_speed(0.0).is_err());
    }

    #[test]
    fn eigenvalue_identities() {
        let m = model(5.0e5, 2.0, 1.05);
        let c = m.wave_speed(2.0).unwrap();
        assert_eq!(m.eigenvalues(2.0, 0.0).unwrap(), (-c, c));
        let (l1, l2) = m.eigenvalues(2.5, 300.0).unwrap();
        let c = m.wave_speed(2.5).unwrap();
        assert!(((l2 - l1) - 2.0 * c).abs() < 1e-10);
        assert!(matches!(m.eigenvalues(1.0, 1.0e4), Err(Error::Supercritical { .. })));
    }

    #[test]
    fn rest_state_maps_to_zero() {
        let m = model(5.0e5, 2.0, 1.05);
        assert_eq!(m.to_characteristics(2.0, 0.0).unwrap(), CharacteristicPair::REST);
        assert_eq!(m.from_characteristics(CharacteristicPair::REST).unwrap(), (2.0, 0.0));
    }

    #[test]
    fn quartic_base_two() {
        // W1 = W2 = 4·c0 puts the quartic base at 2
        let m = model(5.0e5, 2.0, 1.05);
        let w = 4.0 * m.c0;
        let (a, q) = m.from_characteristics(CharacteristicPair::new(w, w)).unwrap();
        assert!((a - 32.0).abs() < 1e-12 * 32.0);
        assert_eq!(q, 0.0);
        let collapsed = CharacteristicPair::new(-4.0 * m.c0, -4.0 * m.c0);
        assert!(m.from_characteristics(collapsed).is_err());
    }

    #[test]
    fn linear_combinations() {
        let m = model(5.0e5, 2.0, 1.05);
        let (a, q) = (2.7, 150.0);
        let w = m.to_characteristics(a, q).unwrap();
        let v = q / a;
        assert!(((w.w2 - w.w1) - 2.0 * v).abs() < 1e-12 * v.abs());
        let dc = m.wave_speed(a).unwrap() - m.c0;
        assert!(((w.w2 + w.w1) - 8.0 * dc).abs() < 1e-10);
    }

    #[test]
    fn source_vanishes() {
        let m = model(5.0e5, 2.0, 1.05);
        let w = m.to_characteristics(2.2, 0.0).unwrap();
        assert_eq!(m.source_term(w), CharacteristicPair::new(0.0, 0.0));
        let seg = VesselSegment::new(1, "v", 10.0, 2.0, 5.0e5, 0.1).unwrap();
        let inviscid = VesselModel::new(&seg, &FluidProperties::new(1.05, 0.0).unwrap());
        let w = inviscid.to_characteristics(2.2, 40.0).unwrap();
        assert_eq!(inviscid.source_term(w), CharacteristicPair::REST);
    }

    // One explicit step of dW/dt = L·S must match a fine RK4 integration of
    // dU/dt = S mapped back to characteristics, to first order in Δt.
    #[test]
    fn source_matches_frozen_field_ode() {
        let m = model(5.0e5, 2.0, 1.05);
        let (a, q) = (2.3, 120.0);
        let w0 = m.to_characteristics(a, q).unwrap();
        let rhs = |q: f64| -m.friction * q / a; // A is unchanged by S
        for dt in [1e-3, 1e-4] {
            let mut qq = q;
            let steps = 1000;
            let h = dt / steps as f64;
            for _ in 0..steps {
                let k1 = rhs(qq);
                let k2 = rhs(qq + 0.5 * h * k1);
                let k3 = rhs(qq + 0.5 * h * k2);
                let k4 = rhs(qq + h * k3);
                qq += h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
            }
            let exact = m.to_characteristics(a, qq).unwrap();
            let s = m.source_term(w0);
            let euler = CharacteristicPair::new(w0.w1 + dt * s.w1, w0.w2 + dt * s.w2);
            let err = (euler.w1 - exact.w1).abs().max((euler.w2 - exact.w2).abs());
            let change = (exact.w1 - w0.w1).abs();
            assert!(err < 1e-2 * change, "dt {dt}: err {err} vs change {change}");
        }
    }

    proptest! {
        #[test]
        fn characteristic_round_trip(frac in 0.3f64..4.0, mach in -0.9f64..0.9,
                                     g0 in 1e5f64..5e6, a0 in 0.1f64..6.0) {
            let m = model(g0, a0, 1.06);
            let a = frac * a0;
            let q = mach * m.wave_speed(a).unwrap() * a;
            let (a2, q2) = m.from_characteristics(m.to_characteristics(a, q).unwrap()).unwrap();
            prop_assert!((a2 - a).abs() <= 1e-12 * a);
            prop_assert!((q2 - q).abs() <= 1e-12 * q.abs().max(a * m.c0 * 1e-2));
        }

        #[test]
        fn eigenvalue_signs(frac in 0.2f64..8.0, mach in -0.98f64..0.98) {
            let m = model(8e5, 1.3, 1.06);
            let a = frac * 1.3;
            let q = mach * m.wave_speed(a).unwrap() * a;
            let (l1, l2) = m.eigenvalues(a, q).unwrap();
            prop_assert!(l1 < 0.0 && l2 > 0.0);
        }
    }
}
