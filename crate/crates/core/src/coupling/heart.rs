//! Time-varying elastance model of the left ventricle with a Bernoulli
//! valve law, driving the inlet of the root vessel.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use super::{area_for_flow, boundary_pair, OutgoingSide};
use crate::error::{Error, Result};
use crate::solver::{CharacteristicPair, VesselModel};
use crate::units::dyn_to_mmhg;

/// Ventricle parameters. Pressures are in mmHg, volumes in cm³.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct HeartParams {
    /// V0, cm³
    pub dead_volume: f64,
    /// V_max, cm³
    pub max_volume: f64,
    /// T, s
    pub period: f64,
    /// T_vcp, s
    pub contraction_time: f64,
    /// T_vrp, s
    pub relaxation_time: f64,
    /// mmHg/cm³
    pub max_elastance: f64,
    /// mmHg/cm³
    pub min_elastance: f64,
    /// R, mmHg·s/cm³
    pub resistance: f64,
    /// B, mmHg·s²/cm⁶
    pub separation: f64,
    /// L, mmHg·s²/cm³
    pub inductance: f64,
    /// Wall viscoelasticity S = gain·P_LV, s/cm³
    pub viscoelastic_gain: f64,
}

impl Default for HeartParams {
    fn default() -> Self {
        Self {
            dead_volume: 10.0,
            max_volume: 130.0,
            period: 1.0,
            contraction_time: 0.30,
            relaxation_time: 0.15,
            max_elastance: 2.75,
            min_elastance: 0.08,
            resistance: 3.0e-3,
            separation: 2.5e-5,
            inductance: 5.0e-4,
            viscoelastic_gain: 5.0e-4,
        }
    }
}

impl HeartParams {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("max_volume", self.max_volume),
            ("period", self.period),
            ("contraction_time", self.contraction_time),
            ("relaxation_time", self.relaxation_time),
            ("max_elastance", self.max_elastance),
            ("min_elastance", self.min_elastance),
            ("inductance", self.inductance),
        ];
        for (name, v) in positive {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::Validation(format!("heart {name} must be > 0, got {v}")));
            }
        }
        let nonneg = [
            ("dead_volume", self.dead_volume),
            ("resistance", self.resistance),
            ("separation", self.separation),
            ("viscoelastic_gain", self.viscoelastic_gain),
        ];
        for (name, v) in nonneg {
            if !(v >= 0.0 && v.is_finite()) {
                return Err(Error::Validation(format!("heart {name} must be >= 0, got {v}")));
            }
        }
        if self.contraction_time + self.relaxation_time > self.period {
            return Err(Error::Validation(
                "heart contraction_time + relaxation_time exceeds the period".into(),
            ));
        }
        if self.max_volume <= self.dead_volume {
            return Err(Error::Validation("heart max_volume must exceed dead_volume".into()));
        }
        Ok(())
    }

    /// P_LV = E(V − V0) + S·dV/dt with S = gain·P_LV and dV/dt = −Q, so the
    /// wall viscosity lowers the pressure while the ventricle ejects.
    pub fn ventricle_pressure(&self, t: f64, volume: f64, flow: f64) -> f64 {
        let denom = 1.0 + self.viscoelastic_gain * flow;
        elastance(t, self) * (volume - self.dead_volume) / denom
    }
}

/// E(t) = E_max·e(t) + E_min, periodic in T. The activation e rises as a
/// half cosine over the contraction, falls back to zero over the
/// relaxation, and stays zero for the rest of the beat.
pub fn elastance(t: f64, hp: &HeartParams) -> f64 {
    let tau = t.rem_euclid(hp.period);
    let (tc, tr) = (hp.contraction_time, hp.relaxation_time);
    let activation = if tau <= tc {
        0.5 * (1.0 - (PI * tau / tc).cos())
    } else if tau <= tc + tr {
        0.5 * (1.0 + (PI * (tau - tc) / tr).cos())
    } else {
        0.0
    };
    hp.max_elastance * activation + hp.min_elastance
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum HeartPhase {
    Systole,
    Diastole,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HeartState {
    /// cm³
    pub volume: f64,
    /// Flow through the aortic valve, cm³/s
    pub flow: f64,
    /// mmHg
    pub pressure: f64,
    pub phase: HeartPhase,
}

impl HeartState {
    /// Start of a beat: full ventricle, closed valve.
    pub fn initial(hp: &HeartParams) -> Self {
        Self {
            volume: hp.max_volume,
            flow: 0.0,
            pressure: hp.ventricle_pressure(0.0, hp.max_volume, 0.0),
            phase: HeartPhase::Diastole,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HeartStep {
    pub state: HeartState,
    /// Boundary pair at the root inlet at t + Δt.
    pub inlet: CharacteristicPair,
    /// Area at the root inlet at t + Δt.
    pub area: f64,
}

/// Advances the ventricle from t to t + Δt with explicit Euler and returns
/// the ingoing W2 that imposes the new valve flow at the root inlet.
///
/// `root_pressure` is the inlet pressure at t in dyn/cm², `outgoing_w1` the
/// extrapolated W1 at the inlet at t + Δt.
pub fn heart_step(
    hs: &HeartState,
    root_pressure: f64,
    outgoing_w1: f64,
    t: f64,
    dt: f64,
    hp: &HeartParams,
    model: &VesselModel,
    area_guess: f64,
) -> Result<HeartStep> {
    let p_lv = hp.ventricle_pressure(t, hs.volume, hs.flow);
    let drop = p_lv - dyn_to_mmhg(root_pressure);
    let mut next = *hs;
    if drop > 0.0 {
        let q = hs.flow;
        let dq = (drop - hp.resistance * q - hp.separation * q * q.abs()) / hp.inductance;
        next.flow = q + dt * dq;
        next.volume = hs.volume - dt * q;
        next.phase = HeartPhase::Systole;
        if next.flow < 0.0 {
            next.flow = 0.0;
            next.phase = HeartPhase::Diastole;
        }
    } else {
        next.volume = hs.volume - dt * hs.flow;
        next.flow = 0.0;
        next.phase = HeartPhase::Diastole;
    }
    let t1 = t + dt;
    let beats = (t1 / hp.period).round();
    if beats >= 1.0 && (t1 - beats * hp.period).abs() <= 1e-9 * hp.period {
        next.volume = hp.max_volume;
    }
    next.pressure = hp.ventricle_pressure(t1, next.volume, next.flow);
    if !(next.flow.is_finite() && next.volume.is_finite() && next.pressure.is_finite()) {
        return Err(Error::Numerical(format!("ventricle state is not finite at t = {t1} s")));
    }

    let area = area_for_flow(model, OutgoingSide::Inlet, outgoing_w1, next.flow, area_guess)
        .ok_or_else(|| Error::NonConvergence {
            what: format!("inlet flow imposition on vessel {}", model.id),
            time: t1,
            residual: f64::NAN,
        })?;
    Ok(HeartStep {
        state: next,
        inlet: boundary_pair(OutgoingSide::Inlet, outgoing_w1, area, next.flow),
        area,
    })
}
