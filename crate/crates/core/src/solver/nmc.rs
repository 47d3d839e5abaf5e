//! Numerical method of characteristics for a single vessel.
//!
//! Each node's two characteristic curves are linearised at (z_k, t_{n+1})
//! and traced back to t_n. Feet inside the vessel are interpolated linearly
//! in space; feet outside it are replaced by the crossing time t* on the
//! boundary and a linear interpolation in time between the old and new
//! boundary values. The friction source is then integrated with one
//! explicit Euler step along the characteristic.

use serde::{Deserialize, Serialize};

use super::characteristics::{CharacteristicPair, VesselModel, SUPERCRITICAL_RATIO};
use crate::error::{Error, Result};

/// State of one vessel at the current time.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SegmentState {
    pub w1: Vec<f64>,
    pub w2: Vec<f64>,
    pub area: Vec<f64>,
    pub flow: Vec<f64>,
}

impl SegmentState {
    /// A = A0, Q = 0 everywhere.
    pub fn at_rest(model: &VesselModel) -> Self {
        let n = model.cells + 1;
        Self {
            w1: vec![0.0; n],
            w2: vec![0.0; n],
            area: vec![model.rest_area; n],
            flow: vec![0.0; n],
        }
    }

    pub fn from_primary(model: &VesselModel, area: &[f64], flow: &[f64]) -> Result<Self> {
        if area.len() != model.cells + 1 || flow.len() != area.len() {
            return Err(Error::Dimension(format!(
                "vessel {} expects {} nodes, got {} areas and {} flows",
                model.id,
                model.cells + 1,
                area.len(),
                flow.len()
            )));
        }
        let mut s = Self::at_rest(model);
        for k in 0..area.len() {
            let w = model.to_characteristics(area[k], flow[k])?;
            s.w1[k] = w.w1;
            s.w2[k] = w.w2;
            s.area[k] = area[k];
            s.flow[k] = flow[k];
        }
        Ok(s)
    }

    pub fn len(&self) -> usize {
        self.w1.len()
    }

    pub fn is_empty(&self) -> bool {
        self.w1.is_empty()
    }

    #[inline]
    pub fn pair(&self, k: usize) -> CharacteristicPair {
        CharacteristicPair::new(self.w1[k], self.w2[k])
    }

    pub fn inlet(&self) -> CharacteristicPair {
        self.pair(0)
    }

    pub fn outlet(&self) -> CharacteristicPair {
        self.pair(self.len() - 1)
    }

    /// Trapezoidal ∫A dz.
    pub fn volume(&self, dz: f64) -> f64 {
        let n = self.area.len();
        let inner: f64 = self.area[1..n - 1].iter().sum();
        dz * (inner + 0.5 * (self.area[0] + self.area[n - 1]))
    }
}

/// Ingoing characteristics at t_{n+1}: W2 at the inlet, W1 at the outlet.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct BoundaryValues {
    pub inlet_w2: f64,
    pub outlet_w1: f64,
}

#[derive(Clone, Copy)]
enum Side {
    Inlet,
    Outlet,
}

/// Steps one vessel; borrows the vessel constants.
#[derive(Debug, Clone, Copy)]
pub struct SegmentSolver<'a> {
    pub model: &'a VesselModel,
}

impl<'a> SegmentSolver<'a> {
    pub fn new(model: &'a VesselModel) -> Self {
        Self { model }
    }

    #[inline]
    fn position(&self, k: usize) -> f64 {
        if k == self.model.cells {
            self.model.length
        } else {
            k as f64 * self.model.dz
        }
    }

    /// (W1, W2) at z ∈ [0, l] at t_n, piecewise-linear between nodes.
    #[inline]
    fn interpolate(&self, state: &SegmentState, z: f64) -> CharacteristicPair {
        let s = (z / self.model.dz).clamp(0.0, self.model.cells as f64);
        let i = (s as usize).min(self.model.cells - 1);
        let theta = s - i as f64;
        CharacteristicPair::lerp(state.pair(i), state.pair(i + 1), theta)
    }

    /// State used to evaluate the characteristic speed at a tentative foot;
    /// feet outside the vessel use the nearest boundary node.
    #[inline]
    fn pair_near(&self, state: &SegmentState, z: f64) -> CharacteristicPair {
        if z <= 0.0 {
            state.inlet()
        } else if z >= self.model.length {
            state.outlet()
        } else {
            self.interpolate(state, z)
        }
    }

    #[inline]
    fn speed(&self, w: CharacteristicPair, family: usize) -> f64 {
        let c = self.model.speed_of(w);
        let v = w.velocity();
        if family == 1 {
            v - c
        } else {
            v + c
        }
    }

    /// Foot of characteristic `family` (1 or 2) through node k at t_{n+1}:
    /// g = z_k − Δt·λ, with λ first taken at the node and then re-evaluated
    /// once at the resulting foot.
    #[inline]
    fn foot(&self, state: &SegmentState, k: usize, dt: f64, family: usize) -> f64 {
        let z = self.position(k);
        let g0 = z - dt * self.speed(state.pair(k), family);
        z - dt * self.speed(self.pair_near(state, g0), family)
    }

    /// (g1, g2) for node k; feet may lie outside [0, l].
    pub fn trace_feet(&self, state: &SegmentState, k: usize, dt: f64) -> (f64, f64) {
        (self.foot(state, k, dt, 1), self.foot(state, k, dt, 2))
    }

    /// Value of characteristic `family` at (z_k, t_{n+1}). `bounds` carries
    /// the old and new boundary pairs, needed when the foot leaves the vessel.
    #[inline]
    fn extrapolate(
        &self,
        state: &SegmentState,
        k: usize,
        dt: f64,
        family: usize,
        bounds: Option<&Bounds>,
    ) -> Result<f64> {
        let z = self.position(k);
        let g = self.foot(state, k, dt, family);
        let (w, span) = if (0.0..=self.model.length).contains(&g) {
            (self.interpolate(state, g), dt)
        } else {
            let Some(b) = bounds else {
                return Err(Error::Numerical(format!(
                    "vessel {} is too short for Δt = {dt}: an outgoing characteristic crosses \
                     the whole vessel in one step",
                    self.model.id
                )));
            };
            let (side, edge) = if g < 0.0 {
                (Side::Inlet, 0.0)
            } else {
                (Side::Outlet, self.model.length)
            };
            // fraction of the step at which the linearised curve crosses the
            // boundary: (t* − t_n)/Δt
            let theta = if z == edge { 1.0 } else { (edge - g) / (z - g) };
            let w = match side {
                Side::Inlet => CharacteristicPair::lerp(b.inlet_old, b.inlet_new, theta),
                Side::Outlet => CharacteristicPair::lerp(b.outlet_old, b.outlet_new, theta),
            };
            (w, (1.0 - theta) * dt)
        };
        let s = self.model.source_term(w);
        Ok(if family == 1 {
            w.w1 + span * s.w1
        } else {
            w.w2 + span * s.w2
        })
    }

    /// Outgoing characteristics at t_{n+1}: W1 at the inlet and W2 at the
    /// outlet. These are what the boundary couplings consume.
    pub fn outgoing(&self, state: &SegmentState, dt: f64) -> Result<(f64, f64)> {
        let w1 = self.extrapolate(state, 0, dt, 1, None)?;
        let w2 = self.extrapolate(state, self.model.cells, dt, 2, None)?;
        Ok((w1, w2))
    }

    /// Advances `old` (at time `t`) by `dt` into `new`, given the ingoing
    /// boundary characteristics at t + dt.
    pub fn step_into(
        &self,
        old: &SegmentState,
        dt: f64,
        t: f64,
        boundary: BoundaryValues,
        new: &mut SegmentState,
    ) -> Result<()> {
        let n = self.model.cells;
        let (out_w1, out_w2) = self.outgoing(old, dt)?;
        let bounds = Bounds {
            inlet_old: old.inlet(),
            inlet_new: CharacteristicPair::new(out_w1, boundary.inlet_w2),
            outlet_old: old.outlet(),
            outlet_new: CharacteristicPair::new(boundary.outlet_w1, out_w2),
        };
        if new.len() != old.len() {
            *new = old.clone();
        }
        new.w1[0] = bounds.inlet_new.w1;
        new.w2[0] = bounds.inlet_new.w2;
        new.w1[n] = bounds.outlet_new.w1;
        new.w2[n] = bounds.outlet_new.w2;
        for k in 1..n {
            new.w1[k] = self.extrapolate(old, k, dt, 1, Some(&bounds))?;
            new.w2[k] = self.extrapolate(old, k, dt, 2, Some(&bounds))?;
        }
        self.recover_primary(new, t + dt)
    }

    /// Convenience wrapper around [`Self::step_into`].
    pub fn nmc_step(
        &self,
        old: &SegmentState,
        dt: f64,
        t: f64,
        boundary: BoundaryValues,
    ) -> Result<SegmentState> {
        let mut new = old.clone();
        self.step_into(old, dt, t, boundary, &mut new)?;
        Ok(new)
    }

    /// Recomputes (A, Q) from (W1, W2) and checks positivity and subcritical flow.
    pub fn recover_primary(&self, state: &mut SegmentState, time: f64) -> Result<()> {
        let m = self.model;
        for k in 0..state.len() {
            let w = state.pair(k);
            let base = m.area_base(w);
            if !(base > 0.0) {
                return Err(Error::Collapsed {
                    segment: m.id,
                    node: k,
                    time,
                });
            }
            let v = w.velocity();
            let c = m.c0 * base;
            if !(v.abs() < SUPERCRITICAL_RATIO * c) {
                return Err(Error::Supercritical {
                    segment: m.id,
                    node: k,
                    time,
                    ratio: v.abs() / c,
                });
            }
            let a = m.rest_area * (base * base) * (base * base);
            state.area[k] = a;
            state.flow[k] = a * v;
        }
        Ok(())
    }
}

struct Bounds {
    inlet_old: CharacteristicPair,
    inlet_new: CharacteristicPair,
    outlet_old: CharacteristicPair,
    outlet_new: CharacteristicPair,
}
