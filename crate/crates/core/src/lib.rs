//! Simulation and analysis of a two-level atom coupled to a damped
//! pseudomode, with photon counting on the pseudomode's output channel.
//!
//! The crate covers closed-form and integrated amplitudes
//! ([`dynamics`]), waiting-time Monte Carlo trajectories and binned flux
//! estimates ([`mcwf`]), the trace-distance measure and Markovian
//! boundary ([`measure`]), flux spectroscopy and spectral classification
//! ([`spectrum`]) and grid sweeps with figure datasets ([`sweep`]).

pub mod dynamics;
pub mod error;
pub mod io;
pub mod mcwf;
pub mod measure;
pub mod params;
pub mod spectrum;
pub mod sweep;

pub use error::{Error, Result};
pub use params::{ModelParams, TimeGrid};

/// Version string recorded in manifests.
pub const ENGINE_VERSION: &str = concat!("nmflux ", env!("CARGO_PKG_VERSION"));
