//! End-to-end DP mechanisms: fixed-threshold sample-and-truncate, the
//! doubling-ladder scalar mechanisms for pure and Rényi DP (with R2T as the
//! q = 1 special case), the vector mechanism with SVT threshold selection and
//! smooth-sensitivity release (PMSJA-style at q = 1), sample-and-explore, and
//! the smooth-sensitivity primitives they build on.

pub mod scalar;
pub mod smooth;
pub mod sne;
pub mod vector;

pub use scalar::{
    dps4s_scalar_pure, dps4s_scalar_rdp, r2t, sample_truncate_pure, sample_truncate_rdp,
};
pub use smooth::{rdp_ss, ss_gamma, ss_mechanism, RdpSsRelease, SsRelease, SsVariant};
pub use sne::{sne_scalar, sne_vector};
pub use vector::{dps4s_vector, pmsja_baseline, svt_threshold_base, VectorEstimate};

use serde::Serialize;

/// Privacy actually consumed by a run, after amplification.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(tag = "kind")]
pub enum SpentBudget {
    Pure { epsilon: f64 },
    Approx { epsilon: f64, delta: f64 },
    Renyi { alpha: f64, rho: f64 },
}

/// Per-iteration ledger of a doubling-ladder run, in execution order
/// (descending tau). `allocated` is the target budget of each iteration and
/// `amplified` the charge actually deducted; their sum never exceeds the
/// requested budget.
#[derive(Debug, Clone, Serialize)]
pub struct LadderDiagnostics {
    pub taus: Vec<f64>,
    pub allocated: Vec<f64>,
    pub amplified: Vec<f64>,
}

/// Result of a scalar mechanism, de-normalized by the table's weight scale.
#[derive(Debug, Clone, Serialize)]
pub struct ScalarEstimate {
    pub value: f64,
    pub spent: SpentBudget,
    /// Set when the run used the non-private noise-disabled test mode.
    pub noise_disabled: bool,
    /// Horvitz-Thompson sample aggregate f(S)/q (de-normalized), recorded for
    /// error decomposition only; never part of a private release.
    pub sample_aggregate: f64,
    pub diagnostics: Option<LadderDiagnostics>,
}
