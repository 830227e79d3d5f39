//! Scalar mechanisms: fixed-threshold sample-and-truncate under pure and
//! Rényi DP, and the doubling-ladder mechanisms that select the threshold
//! privately. R2T is the ladder at q = 1, where amplification charges exactly
//! the allocation and the budget split degenerates to the classic equal one.

use crate::accounting::{amplify_pure_fast, amplify_rdp, choose_alpha_scalar};
use crate::error::{Error, Result};
use crate::mechanisms::{LadderDiagnostics, ScalarEstimate, SpentBudget};
use crate::numerics::{sample_gaussian, sample_laplace};
use crate::rng::{NoiseMode, RngStream};
use crate::solvers::solve_truncation_lp;
use crate::table::AggregationUnitTable;

fn check_common(q: f64, epsilon_like: f64) -> Result<()> {
    if !(q > 0.0 && q <= 1.0) {
        return Err(Error::QOutOfRange(q));
    }
    if !(epsilon_like > 0.0) {
        return Err(Error::InvalidParams(format!(
            "privacy parameter {epsilon_like} must be positive"
        )));
    }
    Ok(())
}

fn check_beta(beta: f64) -> Result<()> {
    if !(0.0 < beta && beta < 1.0) {
        return Err(Error::InvalidParams(format!(
            "beta {beta} must lie in (0, 1)"
        )));
    }
    Ok(())
}

/// Sample-and-truncate at a fixed threshold with Laplace noise. Reports the
/// amplified pure-DP guarantee as the spent budget.
pub fn sample_truncate_pure(
    table: &AggregationUnitTable,
    tau: f64,
    q: f64,
    epsilon: f64,
    noise: NoiseMode,
    rng: &mut RngStream,
) -> Result<ScalarEstimate> {
    check_common(q, epsilon)?;
    if !(tau > 0.0) {
        return Err(Error::InvalidParams(format!("tau {tau} must be positive")));
    }
    let sample = table.poisson_sample(q, rng)?;
    let truncated = solve_truncation_lp(&sample, tau)?.objective;
    let noisy = truncated + sample_laplace(tau / epsilon, noise, rng)?;
    let amplified = amplify_pure_fast(epsilon, tau, table.tuple_bound, q)?;
    Ok(ScalarEstimate {
        value: noisy / q * table.weight_scale,
        spent: SpentBudget::Pure { epsilon: amplified },
        noise_disabled: noise.is_disabled(),
        sample_aggregate: sample.aggregate() / q * table.weight_scale,
        diagnostics: None,
    })
}

/// Number of ladder steps: thresholds are the powers of two up to Delta.
pub fn ladder_length(tuple_bound: u64) -> u32 {
    (tuple_bound as f64).log2().floor() as u32 + 1
}

/// Doubling-ladder scalar mechanism under pure DP with adaptive budget
/// allocation: iterations run from the largest threshold down, each taking
/// remaining/i of the budget and charging only its amplified cost.
pub fn dps4s_scalar_pure(
    table: &AggregationUnitTable,
    q: f64,
    epsilon: f64,
    beta: f64,
    noise: NoiseMode,
    rng: &mut RngStream,
) -> Result<ScalarEstimate> {
    check_common(q, epsilon)?;
    check_beta(beta)?;
    let sample = table.poisson_sample(q, rng)?;
    let levels = ladder_length(table.tuple_bound);
    let offset_factor = (3.0 * levels as f64 / beta).ln();

    let mut remaining = epsilon;
    let mut best = f64::NEG_INFINITY;
    let mut diag = LadderDiagnostics {
        taus: Vec::with_capacity(levels as usize),
        allocated: Vec::with_capacity(levels as usize),
        amplified: Vec::with_capacity(levels as usize),
    };
    for i in (1..=levels).rev() {
        let tau = 2f64.powi(i as i32 - 1);
        let eps_i = remaining / i as f64;
        let truncated = solve_truncation_lp(&sample, tau)?.objective;
        let noisy = truncated + sample_laplace(tau / eps_i, noise, rng)?;
        let under = noisy - tau / eps_i * offset_factor;
        best = best.max(under);
        let charged = amplify_pure_fast(eps_i, tau, table.tuple_bound, q)?;
        remaining -= charged;
        diag.taus.push(tau);
        diag.allocated.push(eps_i);
        diag.amplified.push(charged);
    }
    Ok(ScalarEstimate {
        value: best / q * table.weight_scale,
        spent: SpentBudget::Pure {
            epsilon: epsilon - remaining,
        },
        noise_disabled: noise.is_disabled(),
        sample_aggregate: sample.aggregate() / q * table.weight_scale,
        diagnostics: Some(diag),
    })
}

/// The unsampled doubling-ladder baseline: the q = 1 instantiation, where
/// every amplified charge equals its allocation and the split is eps/L.
pub fn r2t(
    table: &AggregationUnitTable,
    epsilon: f64,
    beta: f64,
    noise: NoiseMode,
    rng: &mut RngStream,
) -> Result<ScalarEstimate> {
    dps4s_scalar_pure(table, 1.0, epsilon, beta, noise, rng)
}

/// Sample-and-truncate at a fixed threshold with Gaussian noise calibrated
/// for (alpha, rho)-RDP; reports the amplified Rényi guarantee.
pub fn sample_truncate_rdp(
    table: &AggregationUnitTable,
    tau: f64,
    q: f64,
    alpha: f64,
    rho: f64,
    noise: NoiseMode,
    rng: &mut RngStream,
) -> Result<ScalarEstimate> {
    check_common(q, rho)?;
    if !(alpha > 1.0) {
        return Err(Error::InvalidParams(format!("alpha {alpha} must exceed 1")));
    }
    if !(tau > 0.0) {
        return Err(Error::InvalidParams(format!("tau {tau} must be positive")));
    }
    let sample = table.poisson_sample(q, rng)?;
    let truncated = solve_truncation_lp(&sample, tau)?.objective;
    let sigma = tau * (alpha / (2.0 * rho)).sqrt();
    let noisy = truncated + sample_gaussian(sigma, noise, rng)?;
    let amplified = amplify_rdp(alpha, rho, tau, table.tuple_bound, q)?;
    Ok(ScalarEstimate {
        value: noisy / q * table.weight_scale,
        spent: SpentBudget::Renyi {
            alpha,
            rho: amplified,
        },
        noise_disabled: noise.is_disabled(),
        sample_aggregate: sample.aggregate() / q * table.weight_scale,
        diagnostics: None,
    })
}

/// Doubling-ladder scalar mechanism for approximate DP: Gaussian noise under
/// RDP at an order optimized for (epsilon, delta), with the Gaussian-tail
/// analog of the Laplace underestimate offset.
pub fn dps4s_scalar_rdp(
    table: &AggregationUnitTable,
    q: f64,
    epsilon: f64,
    delta: f64,
    beta: f64,
    noise: NoiseMode,
    rng: &mut RngStream,
) -> Result<ScalarEstimate> {
    check_common(q, epsilon)?;
    check_beta(beta)?;
    let (alpha, rho) = choose_alpha_scalar(epsilon, delta)?;
    let sample = table.poisson_sample(q, rng)?;
    let levels = ladder_length(table.tuple_bound);
    let offset_factor = (2.0 * (3.0 * levels as f64 / beta).ln()).sqrt();

    let mut remaining = rho;
    let mut best = f64::NEG_INFINITY;
    let mut diag = LadderDiagnostics {
        taus: Vec::with_capacity(levels as usize),
        allocated: Vec::with_capacity(levels as usize),
        amplified: Vec::with_capacity(levels as usize),
    };
    for i in (1..=levels).rev() {
        let tau = 2f64.powi(i as i32 - 1);
        let rho_i = remaining / i as f64;
        let sigma = tau * (alpha / (2.0 * rho_i)).sqrt();
        let truncated = solve_truncation_lp(&sample, tau)?.objective;
        let noisy = truncated + sample_gaussian(sigma, noise, rng)?;
        let under = noisy - sigma * offset_factor;
        best = best.max(under);
        let charged = amplify_rdp(alpha, rho_i, tau, table.tuple_bound, q)?;
        remaining -= charged;
        diag.taus.push(tau);
        diag.allocated.push(rho_i);
        diag.amplified.push(charged);
    }
    Ok(ScalarEstimate {
        value: best / q * table.weight_scale,
        spent: SpentBudget::Renyi {
            alpha,
            rho: rho - remaining,
        },
        noise_disabled: noise.is_disabled(),
        sample_aggregate: sample.aggregate() / q * table.weight_scale,
        diagnostics: Some(diag),
    })
}
