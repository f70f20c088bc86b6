//! Exact simulation of error and disturbance when a spin-1/2 is measured
//! through its Faraday coupling to a two-mode polarized light meter.

pub mod cli;
pub mod edr;
pub mod faraday;
pub mod linalg;
pub mod meter;
pub mod psa;
pub mod relations;
pub mod tolerances;
