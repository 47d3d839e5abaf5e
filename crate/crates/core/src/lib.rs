//! One-dimensional blood flow in arterial networks, kernel surrogates of the
//! stenosis-degree-to-curve map, and estimation of the stenosis degree from
//! measured curves.

pub mod coupling;
pub mod desk;
pub mod error;
pub mod estimation;
pub mod kernel;
pub mod network;
pub mod pipeline;
pub mod simulation;
pub mod solver;
pub mod units;
pub mod vkoga;

pub use error::{Error, ErrorKind, Result};
pub use network::{FluidProperties, Monitor, Network, StenosisPlacement, VesselSegment};
pub use simulation::{SimState, Simulation, DEFAULT_DT};
pub use solver::{CharacteristicPair, SegmentState, VesselModel};
