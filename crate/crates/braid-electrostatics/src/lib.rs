//! Screened electrostatic interaction of two helically charged rods twisted
//! into a braid, with optional low-dielectric cores.

pub mod braid_geometry;
pub mod charge_model;
pub mod energy_dielectric;
pub mod energy_nocore;
pub mod error;
pub mod oracle;
pub mod params;
pub mod scan_cli;
pub mod special_functions;
pub mod surface_response;
pub mod sum;

pub use error::{Error, Result};
