//! Time stepping of a whole network: every vessel is advanced by the method
//! of characteristics after the couplings have supplied its ingoing
//! boundary characteristics for the new time level.

use serde::{Deserialize, Serialize};

use crate::coupling::{
    bifurcation_solve, heart_step, junction_residuals, stenosis_step, windkessel_solve, HeartState,
    JunctionResiduals, StenosisCoefficients, WindkesselState,
};
use crate::error::{Error, Result};
use crate::network::{EndCoupling, Network};
use crate::solver::{BoundaryValues, SegmentSolver, SegmentState, VesselModel};

/// Default time step: one heart beat of 1 s gives 400 steps.
pub const DEFAULT_DT: f64 = 2.5e-3;

/// Complete dynamic state of a run; serialisable so a warm-up can be cached.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimState {
    /// Steps taken since t = 0; the time is `step·Δt`.
    pub step: u64,
    pub segments: Vec<SegmentState>,
    pub heart: HeartState,
    pub windkessels: Vec<WindkesselState>,
    /// Last Newton solution per junction.
    pub junctions: Vec<[f64; 3]>,
    /// Flow through the stenosis, cm³/s.
    pub stenosis_flow: f64,
}

/// Largest coupling residuals seen since the last reset.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Diagnostics {
    pub junction: JunctionResiduals,
    pub steps: u64,
}

/// Pressure (dyn/cm²) and flow (cm³/s) at one grid node.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NodeSample {
    pub pressure: f64,
    pub flow: f64,
}

#[derive(Debug, Clone)]
pub struct Simulation {
    network: Network,
    models: Vec<VesselModel>,
    dt: f64,
    stenosis: Option<StenosisCoefficients>,
    state: SimState,
    scratch: Vec<SegmentState>,
    outgoing: Vec<(f64, f64)>,
    boundary: Vec<BoundaryValues>,
    diagnostics: Diagnostics,
}

impl Simulation {
    /// Starts from rest: A = A0, Q = 0 in every vessel.
    pub fn new(network: &Network, dt: f64) -> Result<Self> {
        let models: Vec<VesselModel> =
            network.segments.iter().map(|s| VesselModel::new(s, &network.fluid)).collect();
        let state = SimState {
            step: 0,
            segments: models.iter().map(SegmentState::at_rest).collect(),
            heart: HeartState::initial(&network.inlet.heart),
            windkessels: network.terminals.iter().map(|t| WindkesselState::initial(&t.windkessel)).collect(),
            junctions: vec![[0.0; 3]; network.junctions.len()],
            stenosis_flow: 0.0,
        };
        Self::from_state(network, dt, state)
    }

    /// Resumes from a stored state of the same network.
    pub fn from_state(network: &Network, dt: f64, state: SimState) -> Result<Self> {
        if !(dt > 0.0 && dt.is_finite()) {
            return Err(Error::InvalidInput(format!("time step must be > 0, got {dt}")));
        }
        let models: Vec<VesselModel> =
            network.segments.iter().map(|s| VesselModel::new(s, &network.fluid)).collect();
        let consistent = state.segments.len() == models.len()
            && state.segments.iter().zip(&models).all(|(s, m)| s.len() == m.cells + 1)
            && state.windkessels.len() == network.terminals.len()
            && state.junctions.len() == network.junctions.len();
        if !consistent {
            return Err(Error::Dimension("stored state does not match the network".into()));
        }
        let stenosis = network.stenosis.map(|p| StenosisCoefficients::new(&p, &network.fluid));
        let n = models.len();
        Ok(Self {
            network: network.clone(),
            scratch: state.segments.clone(),
            models,
            dt,
            stenosis,
            state,
            outgoing: vec![(0.0, 0.0); n],
            boundary: vec![BoundaryValues::default(); n],
            diagnostics: Diagnostics::default(),
        })
    }

    pub fn network(&self) -> &Network {
        &self.network
    }

    pub fn models(&self) -> &[VesselModel] {
        &self.models
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn time(&self) -> f64 {
        self.state.step as f64 * self.dt
    }

    pub fn state(&self) -> &SimState {
        &self.state
    }

    pub fn into_state(self) -> SimState {
        self.state
    }

    pub fn diagnostics(&self) -> Diagnostics {
        self.diagnostics
    }

    pub fn reset_diagnostics(&mut self) {
        self.diagnostics = Diagnostics::default();
    }

    /// Changes R_s from the next step on.
    pub fn set_stenosis_degree(&mut self, degree: f64) -> Result<()> {
        self.network = self.network.with_stenosis_degree(degree)?;
        self.stenosis = self.network.stenosis.map(|p| StenosisCoefficients::new(&p, &self.network.fluid));
        Ok(())
    }

    pub fn segment_state(&self, id: u32) -> Option<&SegmentState> {
        self.network.segment_index(id).map(|i| &self.state.segments[i])
    }

    pub fn sample(&self, segment_index: usize, node: usize) -> NodeSample {
        let s = &self.state.segments[segment_index];
        NodeSample {
            pressure: self.models[segment_index].pressure(s.area[node]),
            flow: s.flow[node],
        }
    }

    /// Values at every monitor, in monitor order.
    pub fn monitor_samples(&self) -> Vec<NodeSample> {
        self.network
            .monitors
            .iter()
            .map(|m| self.sample(self.network.segment_index(m.segment).unwrap(), m.node))
            .collect()
    }

    /// Advances the whole network by one time step.
    pub fn step(&mut self) -> Result<()> {
        let dt = self.dt;
        let t = self.time();
        let t1 = (self.state.step + 1) as f64 * dt;

        for (i, m) in self.models.iter().enumerate() {
            self.outgoing[i] = SegmentSolver::new(m).outgoing(&self.state.segments[i], dt)?;
            self.boundary[i] = BoundaryValues::default();
        }

        let net = &self.network;
        let inlet = net.segment_index(net.inlet.segment).unwrap();
        {
            let seg = &self.state.segments[inlet];
            let m = &self.models[inlet];
            let hs = heart_step(
                &self.state.heart,
                m.pressure(seg.area[0]),
                self.outgoing[inlet].0,
                t,
                dt,
                &net.inlet.heart,
                m,
                seg.area[0],
            )?;
            self.state.heart = hs.state;
            self.boundary[inlet].inlet_w2 = hs.inlet.w2;
        }

        for (j, junction) in net.junctions.iter().enumerate() {
            let p = net.segment_index(junction.parent).unwrap();
            let c0 = net.segment_index(junction.children[0]).unwrap();
            let c1 = net.segment_index(junction.children[1]).unwrap();
            let models = [&self.models[p], &self.models[c0], &self.models[c1]];
            let out = [self.outgoing[p].1, self.outgoing[c0].0, self.outgoing[c1].0];
            let sol = bifurcation_solve(models, out, self.state.junctions[j], j, t1)?;
            self.state.junctions[j] = sol.unknowns;
            self.boundary[p].outlet_w1 = sol.parent.w1;
            self.boundary[c0].inlet_w2 = sol.children[0].w2;
            self.boundary[c1].inlet_w2 = sol.children[1].w2;
            let r = junction_residuals(models, sol.parent, sol.children);
            let d = &mut self.diagnostics.junction;
            d.mass = d.mass.max(r.mass);
            d.total_pressure = d.total_pressure.max(r.total_pressure);
        }

        for (k, terminal) in net.terminals.iter().enumerate() {
            let i = net.segment_index(terminal.segment).unwrap();
            let seg = &self.state.segments[i];
            let last = seg.len() - 1;
            let (wk, pair) = windkessel_solve(
                self.outgoing[i].1,
                &self.state.windkessels[k],
                seg.flow[last],
                dt,
                &terminal.windkessel,
                &self.models[i],
                seg.area[last],
                t1,
            )?;
            self.state.windkessels[k] = wk;
            self.boundary[i].outlet_w1 = pair.w1;
        }

        if let (Some(place), Some(coeffs)) = (&net.stenosis, &self.stenosis) {
            let p = net.segment_index(place.proximal).unwrap();
            let d = net.segment_index(place.distal).unwrap();
            let guess = [*self.state.segments[p].area.last().unwrap(), self.state.segments[d].area[0]];
            let st = stenosis_step(
                self.state.stenosis_flow,
                self.outgoing[p].1,
                self.outgoing[d].0,
                dt,
                coeffs,
                [&self.models[p], &self.models[d]],
                guess,
                t1,
            )?;
            self.state.stenosis_flow = st.flow;
            self.boundary[p].outlet_w1 = st.proximal.w1;
            self.boundary[d].inlet_w2 = st.distal.w2;
        }

        for (i, m) in self.models.iter().enumerate() {
            SegmentSolver::new(m).step_into(
                &self.state.segments[i],
                dt,
                t,
                self.boundary[i],
                &mut self.scratch[i],
            )?;
        }
        std::mem::swap(&mut self.state.segments, &mut self.scratch);
        self.state.step += 1;
        self.diagnostics.steps += 1;
        Ok(())
    }

    /// Steps until the time reaches `t_end` (rounded to a whole step),
    /// calling `observe` after every step.
    pub fn advance_to(&mut self, t_end: f64, mut observe: impl FnMut(&Self)) -> Result<()> {
        let target = steps_until(t_end, self.dt)?;
        while self.state.step < target {
            self.step()?;
            observe(self);
        }
        Ok(())
    }

    /// End couplings of each vessel, in segment order.
    pub fn ends(&self) -> &[(EndCoupling, EndCoupling)] {
        &self.network.ends
    }
}

/// Number of steps of size `dt` that reach `t` exactly.
pub fn steps_until(t: f64, dt: f64) -> Result<u64> {
    let n = (t / dt).round();
    if !(n >= 0.0) || (n * dt - t).abs() > 1e-9 * t.abs().max(dt) {
        return Err(Error::InvalidInput(format!("time {t} s is not a multiple of the step {dt} s")));
    }
    Ok(n as u64)
}
