//! The bundled desk-scale network.

use crate::error::Result;
use crate::network::{load_network, Network};

/// TOML source of the bundled network.
pub const DESK_NETWORK: &str = include_str!(concat!(env!("CARGO_MANIFEST_DIR"), "/../../networks/desk.toml"));

pub fn desk_network() -> Result<Network> {
    load_network(DESK_NETWORK)
}
