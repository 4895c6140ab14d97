//! Agent-based hybrid artificial-cell / bacterial reservoir and its linear
//! readout pipeline.

pub mod bacteria;
pub mod config;
pub mod error;
pub mod experiment;
pub mod fields;
pub mod geom;
pub mod plot;
pub mod readout;
pub mod reservoir;
pub mod signals;
pub mod tables;
pub mod transducer;

pub use error::{Error, Result};
