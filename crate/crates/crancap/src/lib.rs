//! Capacity bounds and fronthaul planning for Gaussian cloud radio access
//! networks.
//!
//! The crate computes inner (network compress-forward / distributed
//! decode-forward) and outer (cutset) sum-rate bounds for uplink and downlink
//! C-RAN instances, the total fronthaul `C*` at which the inner scheme
//! reaches its unconstrained sum-rate, per-link fronthaul allocations
//! realizing that rate, finite-gap audits between the bounds, and the
//! rich-scattering / stochastic-geometry scaling experiments built on top of
//! them. Antenna counts generalize every quantity to the MIMO setting;
//! single-antenna nodes recover the scalar formulas.
//!
//! Start with the runnable programs under `examples/`; each one exercises a
//! major capability end to end. The `crancap` binary exposes the same
//! operations behind a config-file driven command line.

pub mod channels;
pub mod cli;
pub mod downlink;
pub mod error;
pub mod experiments;
pub mod net;
pub mod numkernel;
pub mod polymatroid;
pub mod rng;
pub mod uplink;

pub use error::{CranError, Result};
pub use net::{CovarianceSet, Direction, NetworkInstance, SumRateReport};
pub use numkernel::{PsdMatrix, RealMatrix};
pub use polymatroid::{BaseVector, SetFn, Subset};
