//! User-level differentially private answering of scalar and vector
//! select-join-aggregate (SJA) queries.
//!
//! The building blocks are: an aggregation-unit data model (join tuples with
//! per-tuple contributor sets), Poisson subsampling of units, truncation
//! optimizers (a packing LP for scalar queries, a convex QCQP for vector
//! queries), privacy-amplification arithmetic for pure and Rényi DP, and the
//! end-to-end mechanisms built from them (DP-S4S, R2T, a PMSJA-style vector
//! baseline, S&E, and smooth-sensitivity release under RDP).
//!
//! The crate is a research artifact: the RNG is a seeded counter-based PRNG,
//! not a cryptographic one, and every mechanism has a noise-disabled mode for
//! deterministic testing that is explicitly non-private.

pub mod accounting;
pub mod error;
pub mod harness;
pub mod mechanisms;
pub mod numerics;
pub mod rng;
pub mod solvers;
pub mod table;
pub mod workloads;

pub use error::{Error, Result};
pub use rng::{NoiseMode, RngStream};
pub use table::{AggregationUnit, AggregationUnitTable, UserId, VectorWorkload};
