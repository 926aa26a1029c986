//! Long-range integer height chains in one dimension.
//!
//! The models live on a finite window of sites with a constant boundary
//! height outside. Pair couplings decay as a power of the distance and the
//! interaction penalizes height differences through |d|^p with p in [1,2]
//! (p = 2 is the discrete Gaussian chain, p = 1 the solid-on-solid chain).
//!
//! The crate provides four layers on top of the coupling kernel:
//!
//! * [`model`]: relative energies against the boundary, step transforms and
//!   their exact Radon-Nikodym log derivatives,
//! * [`exact`]: full enumeration of the truncated finite-volume measure,
//!   used as the ground-truth oracle for everything else,
//! * [`sampler`]: a seeded Metropolis chain plus a dense transition-matrix
//!   build of the same dynamics for stationarity checks,
//! * [`analysis`]: autocorrelation-aware error bars, moment and variance
//!   profiles, log-log exponent fits, and the entropy ledger comparing the
//!   exact relative entropy with its cross-sum upper bound.
//!
//! [`config`] and [`tasks`] wrap the above in a reproducible batch harness
//! (flat key = value configs, content-addressed run ids, CSV artifacts and
//! an append-only JSONL registry) that the `dgchain` binary exposes.

mod accum;

pub mod analysis;
pub mod config;
pub mod exact;
pub mod kernel;
pub mod model;
pub mod sampler;
pub mod tasks;
