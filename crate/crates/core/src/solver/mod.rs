//! Single-vessel solver: characteristic variables and the numerical method
//! of characteristics.

mod characteristics;
mod nmc;

pub use characteristics::{CharacteristicPair, VesselModel, SUPERCRITICAL_RATIO};
pub use nmc::{BoundaryValues, SegmentSolver, SegmentState};
