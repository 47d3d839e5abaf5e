use std::path::Path;

use serde::Deserialize;

use super::{
    FluidProperties, Inlet, Junction, Monitor, Network, StenosisPlacement, Terminal,
    VesselSegment,
};
use crate::coupling::{HeartParams, WindkesselParams};
use crate::error::{Error, Result};

pub const NETWORK_SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawNetwork {
    schema_version: u32,
    #[serde(default)]
    name: Option<String>,
    #[serde(default)]
    fluid: RawFluid,
    grid: RawGrid,
    segments: Vec<RawSegment>,
    #[serde(default)]
    junctions: Vec<RawJunction>,
    #[serde(default)]
    terminals: Vec<RawTerminal>,
    inlet: RawInlet,
    #[serde(default)]
    stenosis: Option<RawStenosis>,
    #[serde(default)]
    monitors: Vec<RawMonitor>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawFluid {
    #[serde(default = "default_density")]
    density: f64,
    #[serde(default = "default_viscosity")]
    viscosity: f64,
}

impl Default for RawFluid {
    fn default() -> Self {
        Self {
            density: default_density(),
            viscosity: default_viscosity(),
        }
    }
}

fn default_density() -> f64 {
    FluidProperties::default().density
}

fn default_viscosity() -> f64 {
    FluidProperties::default().viscosity
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawGrid {
    target_dz: f64,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawSegment {
    id: u32,
    #[serde(default)]
    name: Option<String>,
    length: f64,
    rest_area: f64,
    #[serde(default)]
    g0: Option<f64>,
    #[serde(default)]
    beta: Option<f64>,
    #[serde(default)]
    target_dz: Option<f64>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawJunction {
    parent: u32,
    children: [u32; 2],
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawTerminal {
    segment: u32,
    #[serde(default)]
    r2: Option<f64>,
    #[serde(default)]
    r_total: Option<f64>,
    compliance: f64,
    #[serde(default)]
    venous_pressure: f64,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawInlet {
    segment: u32,
    #[serde(default)]
    heart: Option<HeartParams>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawStenosis {
    proximal: u32,
    distal: u32,
    length: f64,
    #[serde(default)]
    rest_area: Option<f64>,
    #[serde(default)]
    degree: f64,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawMonitor {
    #[serde(default)]
    label: Option<String>,
    segment: u32,
    #[serde(default)]
    node: Option<usize>,
    #[serde(default)]
    at: Option<String>,
}

/// Parses and validates a network description (TOML).
pub fn load_network(text: &str) -> Result<Network> {
    let raw: RawNetwork = toml::from_str(text).map_err(|e| Error::Parse(e.to_string()))?;
    if raw.schema_version != NETWORK_SCHEMA_VERSION {
        return Err(Error::Validation(format!(
            "unsupported schema_version {} (expected {NETWORK_SCHEMA_VERSION})",
            raw.schema_version
        )));
    }
    let fluid = FluidProperties::new(raw.fluid.density, raw.fluid.viscosity)?;

    let mut segments = Vec::with_capacity(raw.segments.len());
    for s in &raw.segments {
        let g0 = match (s.g0, s.beta) {
            (Some(g0), None) => g0,
            (None, Some(beta)) => beta * s.rest_area.sqrt(),
            _ => {
                return Err(Error::Validation(format!(
                    "segment {}: exactly one of g0 or beta is required",
                    s.id
                )))
            }
        };
        let name = s.name.clone().unwrap_or_else(|| format!("vessel{}", s.id));
        let dz = s.target_dz.unwrap_or(raw.grid.target_dz);
        segments.push(VesselSegment::new(s.id, name, s.length, s.rest_area, g0, dz)?);
    }
    let find = |id: u32, ctx: &str| -> Result<&VesselSegment> {
        segments.iter().find(|s| s.id == id).ok_or_else(|| {
            Error::Validation(format!("{ctx} references missing segment id {id}"))
        })
    };

    let junctions = raw
        .junctions
        .iter()
        .map(|j| Junction {
            parent: j.parent,
            children: j.children,
        })
        .collect();

    let mut terminals = Vec::with_capacity(raw.terminals.len());
    for t in &raw.terminals {
        let seg = find(t.segment, "terminal")?;
        let r1 = WindkesselParams::characteristic_impedance(seg, &fluid);
        let r2 = match (t.r2, t.r_total) {
            (Some(r2), None) => r2,
            (None, Some(total)) => total - r1,
            _ => {
                return Err(Error::Validation(format!(
                    "terminal on segment {}: exactly one of r2 or r_total is required",
                    t.segment
                )))
            }
        };
        terminals.push(Terminal {
            segment: t.segment,
            windkessel: WindkesselParams {
                r1,
                r2,
                compliance: t.compliance,
                venous_pressure: t.venous_pressure,
            },
        });
    }

    let inlet = Inlet {
        segment: raw.inlet.segment,
        heart: raw.inlet.heart.unwrap_or_default(),
    };

    let stenosis = match &raw.stenosis {
        Some(s) => {
            let prox = find(s.proximal, "stenosis")?;
            Some(StenosisPlacement {
                proximal: s.proximal,
                distal: s.distal,
                length: s.length,
                rest_area: s.rest_area.unwrap_or(prox.rest_area),
                degree: s.degree,
            })
        }
        None => None,
    };

    let mut monitors = Vec::with_capacity(raw.monitors.len());
    for m in &raw.monitors {
        let seg = find(m.segment, "monitor")?;
        let node = match (m.node, m.at.as_deref()) {
            (Some(k), None) => k,
            (None, Some("inlet")) => 0,
            (None, Some("mid")) | (None, None) => seg.mid_node(),
            (None, Some("outlet")) => seg.cells,
            (None, Some(other)) => {
                return Err(Error::Validation(format!(
                    "monitor on segment {}: unknown position '{other}' (inlet|mid|outlet)",
                    m.segment
                )))
            }
            (Some(_), Some(_)) => {
                return Err(Error::Validation(format!(
                    "monitor on segment {}: give either node or at, not both",
                    m.segment
                )))
            }
        };
        let label = m.label.clone().unwrap_or_else(|| seg.name.clone());
        monitors.push(Monitor {
            label,
            segment: m.segment,
            node,
        });
    }

    Network::new(
        raw.name.unwrap_or_else(|| "network".into()),
        fluid,
        segments,
        junctions,
        terminals,
        inlet,
        stenosis,
        monitors,
    )
}

pub fn load_network_file(path: impl AsRef<Path>) -> Result<Network> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| match e.kind() {
        std::io::ErrorKind::NotFound => Error::MissingArtifact(path.to_path_buf()),
        _ => Error::Io(e),
    })?;
    load_network(&text).map_err(|e| match e {
        Error::Parse(m) => Error::Parse(format!("{}: {m}", path.display())),
        other => other,
    })
}
