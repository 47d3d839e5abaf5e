//! Arterial network data model: vessel segments, their couplings and the
//! points where curves are recorded.

mod config;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::coupling::{HeartParams, WindkesselParams};
use crate::error::{Error, Result};

pub use config::{load_network, load_network_file, NETWORK_SCHEMA_VERSION};

/// Blood properties. The wall friction coefficient is always derived from
/// viscosity and density, never stored.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FluidProperties {
    /// g/cm³
    pub density: f64,
    /// poise
    pub viscosity: f64,
}

impl FluidProperties {
    /// Poisson ratio of the vessel wall (incompressible tissue).
    pub const POISSON_RATIO: f64 = 0.5;

    pub fn new(density: f64, viscosity: f64) -> Result<Self> {
        if !(density > 0.0) || !density.is_finite() {
            return Err(Error::Validation(format!("density must be > 0, got {density}")));
        }
        if !(viscosity >= 0.0) || !viscosity.is_finite() {
            return Err(Error::Validation(format!("viscosity must be >= 0, got {viscosity}")));
        }
        Ok(Self { density, viscosity })
    }

    /// K_r = 22 π η / ρ, in cm²/s.
    #[inline]
    pub fn friction(&self) -> f64 {
        22.0 * std::f64::consts::PI * self.viscosity / self.density
    }
}

impl Default for FluidProperties {
    fn default() -> Self {
        Self {
            density: 1.06,
            viscosity: 0.045,
        }
    }
}

/// One 1-D vessel with constant rest area and wall stiffness, and its grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VesselSegment {
    pub id: u32,
    pub name: String,
    /// cm
    pub length: f64,
    /// A0, cm²
    pub rest_area: f64,
    /// G0, dyn/cm²
    pub stiffness: f64,
    /// Number of grid cells; nodes are `0..=cells`.
    pub cells: usize,
}

impl VesselSegment {
    /// Builds a segment whose spacing is the largest value not exceeding
    /// `target_dz` that divides the length exactly.
    pub fn new(
        id: u32,
        name: impl Into<String>,
        length: f64,
        rest_area: f64,
        stiffness: f64,
        target_dz: f64,
    ) -> Result<Self> {
        let positive = |v: f64, what: &str| -> Result<()> {
            if v > 0.0 && v.is_finite() {
                Ok(())
            } else {
                Err(Error::Validation(format!("segment {id}: {what} must be > 0, got {v}")))
            }
        };
        positive(length, "length")?;
        positive(rest_area, "rest_area")?;
        positive(stiffness, "stiffness G0")?;
        positive(target_dz, "target_dz")?;
        let cells = grid_cells(length, target_dz);
        Ok(Self {
            id,
            name: name.into(),
            length,
            rest_area,
            stiffness,
            cells,
        })
    }

    #[inline]
    pub fn dz(&self) -> f64 {
        self.length / self.cells as f64
    }

    #[inline]
    pub fn node_count(&self) -> usize {
        self.cells + 1
    }

    /// z_k = k·Δz; the last node sits exactly at the vessel length.
    #[inline]
    pub fn node_position(&self, k: usize) -> f64 {
        if k == self.cells {
            self.length
        } else {
            k as f64 * self.dz()
        }
    }

    pub fn mid_node(&self) -> usize {
        self.cells / 2
    }

    /// β such that G0 = β·√A0.
    pub fn beta(&self) -> f64 {
        self.stiffness / self.rest_area.sqrt()
    }

    /// p = G0 (√(A/A0) − 1).
    pub fn pressure_from_area(&self, area: f64) -> Result<f64> {
        if !(area > 0.0) {
            return Err(Error::Domain(format!(
                "segment {}: area must be > 0, got {area}",
                self.id
            )));
        }
        Ok(self.stiffness * ((area / self.rest_area).sqrt() - 1.0))
    }

    /// A = A0 (p/G0 + 1)², the inverse of [`Self::pressure_from_area`].
    pub fn area_from_pressure(&self, pressure: f64) -> Result<f64> {
        let base = pressure / self.stiffness + 1.0;
        if !(base > 0.0) {
            return Err(Error::Domain(format!(
                "segment {}: pressure {pressure} collapses the vessel (G0 = {})",
                self.id, self.stiffness
            )));
        }
        Ok(self.rest_area * base * base)
    }
}

/// Number of cells for a requested spacing; the spacing is only ever shrunk.
pub fn grid_cells(length: f64, target_dz: f64) -> usize {
    let ratio = length / target_dz;
    // absorb representation error such as 10 / 0.1 = 100.00000000000001
    let cells = (ratio * (1.0 - 1e-12)).ceil();
    (cells as usize).max(1)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Junction {
    pub parent: u32,
    pub children: [u32; 2],
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Terminal {
    pub segment: u32,
    pub windkessel: WindkesselParams,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Inlet {
    pub segment: u32,
    pub heart: HeartParams,
}

/// A stenosis lumped between the outlet of `proximal` and the inlet of `distal`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StenosisPlacement {
    pub proximal: u32,
    pub distal: u32,
    /// l_s, cm
    pub length: f64,
    /// A0s, cm²
    pub rest_area: f64,
    /// R_s in [0, 1]
    pub degree: f64,
}

impl StenosisPlacement {
    pub fn with_degree(mut self, degree: f64) -> Result<Self> {
        check_degree(degree)?;
        self.degree = degree;
        Ok(self)
    }
}

pub(crate) fn check_degree(degree: f64) -> Result<()> {
    if (0.0..=1.0).contains(&degree) {
        Ok(())
    } else {
        Err(Error::InvalidInput(format!("stenosis degree must lie in [0, 1], got {degree}")))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Monitor {
    pub label: String,
    pub segment: u32,
    pub node: usize,
}

/// What a segment end is attached to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum EndCoupling {
    Inlet,
    /// Outlet of the parent vessel of junction `.0`.
    JunctionParent(usize),
    /// Inlet of child `.1` (0 or 1) of junction `.0`.
    JunctionChild(usize, usize),
    /// Outlet attached to terminal `.0`.
    Terminal(usize),
    StenosisProximal,
    StenosisDistal,
}

/// Validated, immutable network description.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Network {
    pub name: String,
    pub fluid: FluidProperties,
    pub segments: Vec<VesselSegment>,
    pub junctions: Vec<Junction>,
    pub terminals: Vec<Terminal>,
    pub inlet: Inlet,
    pub stenosis: Option<StenosisPlacement>,
    pub monitors: Vec<Monitor>,
    /// (inlet end, outlet end) coupling of each segment, same order as `segments`.
    pub ends: Vec<(EndCoupling, EndCoupling)>,
}

impl Network {
    /// Validates the topology and derives the end couplings.
    pub fn new(
        name: impl Into<String>,
        fluid: FluidProperties,
        segments: Vec<VesselSegment>,
        junctions: Vec<Junction>,
        terminals: Vec<Terminal>,
        inlet: Inlet,
        stenosis: Option<StenosisPlacement>,
        monitors: Vec<Monitor>,
    ) -> Result<Self> {
        let mut net = Self {
            name: name.into(),
            fluid,
            segments,
            junctions,
            terminals,
            inlet,
            stenosis,
            monitors,
            ends: Vec::new(),
        };
        net.ends = net.validate()?;
        Ok(net)
    }

    pub fn segment_index(&self, id: u32) -> Option<usize> {
        self.segments.iter().position(|s| s.id == id)
    }

    pub fn segment(&self, id: u32) -> Option<&VesselSegment> {
        self.segments.iter().find(|s| s.id == id)
    }

    /// Same topology with a different stenosis degree.
    pub fn with_stenosis_degree(&self, degree: f64) -> Result<Self> {
        let mut net = self.clone();
        match net.stenosis.as_mut() {
            Some(s) => {
                check_degree(degree)?;
                s.degree = degree;
                Ok(net)
            }
            None => Err(Error::InvalidInput("network has no stenosis placement".into())),
        }
    }

    /// SHA-256 of the canonical serialisation.
    pub fn content_hash(&self) -> String {
        let text = self.canonical_json();
        hex::encode(Sha256::digest(text.as_bytes()))
    }

    pub fn canonical_json(&self) -> String {
        serde_json::to_string(self).expect("network serialises")
    }

    fn validate(&self) -> Result<Vec<(EndCoupling, EndCoupling)>> {
        let err = |m: String| Err(Error::Validation(m));
        if self.segments.is_empty() {
            return err("network has no segments".into());
        }
        for (i, s) in self.segments.iter().enumerate() {
            if self.segments[..i].iter().any(|o| o.id == s.id) {
                return err(format!("duplicate segment id {}", s.id));
            }
            if !(s.length > 0.0 && s.rest_area > 0.0 && s.stiffness > 0.0 && s.cells >= 1) {
                return err(format!("segment {}: l, A0, G0 and Δz must be positive", s.id));
            }
        }
        let index = |id: u32, ctx: &str| -> Result<usize> {
            self.segment_index(id).ok_or_else(|| {
                Error::Validation(format!("{ctx} references missing segment id {id}"))
            })
        };

        let n = self.segments.len();
        let mut left: Vec<Option<EndCoupling>> = vec![None; n];
        let mut right: Vec<Option<EndCoupling>> = vec![None; n];
        let assign = |slot: &mut Option<EndCoupling>, id: u32, side: &str, c: EndCoupling| {
            if let Some(prev) = slot {
                Err(Error::Validation(format!(
                    "segment {id} {side} end is attached twice ({prev:?} and {c:?})"
                )))
            } else {
                *slot = Some(c);
                Ok(())
            }
        };

        let inlet_idx = index(self.inlet.segment, "inlet")?;
        self.inlet.heart.validate()?;
        assign(&mut left[inlet_idx], self.inlet.segment, "inlet", EndCoupling::Inlet)?;

        for (j, junction) in self.junctions.iter().enumerate() {
            let ctx = format!("junction {j}");
            let p = index(junction.parent, &ctx)?;
            assign(&mut right[p], junction.parent, "outlet", EndCoupling::JunctionParent(j))?;
            if junction.children[0] == junction.children[1] {
                return err(format!("{ctx}: both children are segment {}", junction.children[0]));
            }
            for (c, &child) in junction.children.iter().enumerate() {
                let ci = index(child, &ctx)?;
                assign(&mut left[ci], child, "inlet", EndCoupling::JunctionChild(j, c))?;
            }
        }

        for (t, terminal) in self.terminals.iter().enumerate() {
            let ti = index(terminal.segment, &format!("terminal {t}"))?;
            terminal.windkessel.validate(terminal.segment)?;
            assign(&mut right[ti], terminal.segment, "outlet", EndCoupling::Terminal(t))?;
        }

        if let Some(st) = &self.stenosis {
            let p = index(st.proximal, "stenosis")?;
            let d = index(st.distal, "stenosis")?;
            if p == d {
                return err("stenosis proximal and distal segments must differ".into());
            }
            check_degree(st.degree).map_err(|e| Error::Validation(e.to_string()))?;
            if !(st.length > 0.0 && st.rest_area > 0.0) {
                return err("stenosis length and rest area must be > 0".into());
            }
            let (sp, sd) = (&self.segments[p], &self.segments[d]);
            let same = |a: f64, b: f64| (a - b).abs() <= 1e-12 * a.abs().max(b.abs());
            if !same(sp.rest_area, sd.rest_area) || !same(sp.stiffness, sd.stiffness) {
                return err(format!(
                    "stenosis segments {} and {} must share rest area and stiffness",
                    sp.id, sd.id
                ));
            }
            assign(&mut right[p], st.proximal, "outlet", EndCoupling::StenosisProximal)?;
            assign(&mut left[d], st.distal, "inlet", EndCoupling::StenosisDistal)?;
        }

        let mut ends = Vec::with_capacity(n);
        for (i, s) in self.segments.iter().enumerate() {
            match (left[i], right[i]) {
                (Some(l), Some(r)) => ends.push((l, r)),
                (None, _) => return err(format!("segment {} has no parent connection", s.id)),
                (_, None) => return err(format!("segment {} outlet is not attached", s.id)),
            }
        }

        // every segment reachable from the inlet makes the graph a rooted tree,
        // since each non-inlet segment already has exactly one parent
        let mut seen = vec![false; n];
        let mut stack = vec![inlet_idx];
        while let Some(i) = stack.pop() {
            if std::mem::replace(&mut seen[i], true) {
                return err(format!("cycle through segment {}", self.segments[i].id));
            }
            match ends[i].1 {
                EndCoupling::JunctionParent(j) => {
                    for c in self.junctions[j].children {
                        stack.push(self.segment_index(c).unwrap());
                    }
                }
                EndCoupling::StenosisProximal => {
                    stack.push(self.segment_index(self.stenosis.unwrap().distal).unwrap());
                }
                _ => {}
            }
        }
        if let Some(i) = seen.iter().position(|s| !s) {
            return err(format!("segment {} is not reachable from the inlet", self.segments[i].id));
        }

        for m in &self.monitors {
            let seg = &self.segments[index(m.segment, &format!("monitor '{}'", m.label))?];
            if m.node > seg.cells {
                return err(format!(
                    "monitor '{}': node {} outside segment {} (last node {})",
                    m.label, m.node, seg.id, seg.cells
                ));
            }
        }
        for (i, m) in self.monitors.iter().enumerate() {
            if self.monitors[..i].iter().any(|o| o.label == m.label) {
                return err(format!("duplicate monitor label '{}'", m.label));
            }
        }
        Ok(ends)
    }
}
