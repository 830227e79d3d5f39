//! Smooth-sensitivity release primitives: the Rényi-DP smooth-sensitivity
//! mechanism and the classic Cauchy/Laplace/Gaussian variants it is compared
//! against.

use crate::accounting::{calibrate_smooth, smooth_bound_g};
use crate::error::{Error, Result};
use crate::numerics::{sample_gaussian, sample_gaussian_vec, sample_laplace, standard_cauchy};
use crate::rng::{NoiseMode, RngStream};

/// Output of the RDP smooth-sensitivity mechanism, including the calibration
/// actually used (sigma is a deterministic function of (B, alpha, rho, d)).
#[derive(Debug, Clone)]
pub struct RdpSsRelease {
    pub values: Vec<f64>,
    pub gamma: f64,
    pub smooth_sensitivity: f64,
    pub sigma: f64,
}

/// Adds Gaussian noise scaled to the gamma-smooth sensitivity derived from a
/// local-sensitivity bound `b_value` with unit global sensitivity (the
/// caller's responsibility). Satisfies (alpha, rho)-RDP.
pub fn rdp_ss(
    values: &[f64],
    b_value: f64,
    alpha: f64,
    rho: f64,
    noise: NoiseMode,
    rng: &mut RngStream,
) -> Result<RdpSsRelease> {
    let calibration = calibrate_smooth(alpha, rho, values.len().max(1))?;
    let g = smooth_bound_g(b_value, calibration.gamma)?;
    let sigma = g * calibration.eta;
    let out = if values.is_empty() {
        Vec::new()
    } else {
        let noise_vec = sample_gaussian_vec(sigma, values.len(), noise, rng)?;
        values.iter().zip(noise_vec).map(|(v, z)| v + z).collect()
    };
    Ok(RdpSsRelease {
        values: out,
        gamma: calibration.gamma,
        smooth_sensitivity: g,
        sigma,
    })
}

/// Noise family of the classic smooth-sensitivity mechanism.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SsVariant {
    Cauchy,
    Laplace,
    Gaussian,
}

impl SsVariant {
    pub fn name(self) -> &'static str {
        match self {
            SsVariant::Cauchy => "cauchy",
            SsVariant::Laplace => "laplace",
            SsVariant::Gaussian => "gaussian",
        }
    }
}

/// Smoothness exponent required by the classic mechanism for a d-dimensional
/// release: eps/(6d) for Cauchy (pure DP), eps/(4(d + ln(2/delta))) for the
/// Laplace and Gaussian variants.
pub fn ss_gamma(epsilon: f64, delta: f64, d: usize, variant: SsVariant) -> Result<f64> {
    if !(epsilon > 0.0) || d < 1 {
        return Err(Error::InvalidParams(
            "epsilon must be positive and d >= 1".into(),
        ));
    }
    match variant {
        SsVariant::Cauchy => {
            if delta != 0.0 {
                return Err(Error::InvalidParams(
                    "the Cauchy variant is the pure-DP path; delta must be 0".into(),
                ));
            }
            Ok(epsilon / (6.0 * d as f64))
        }
        SsVariant::Laplace | SsVariant::Gaussian => {
            if !(0.0 < delta && delta < 1.0) {
                return Err(Error::InvalidParams(format!(
                    "delta {delta} must lie in (0, 1)"
                )));
            }
            Ok(epsilon / (4.0 * (d as f64 + (2.0 / delta).ln())))
        }
    }
}

/// Noise multiplier eta of the classic mechanism.
pub fn ss_eta(epsilon: f64, delta: f64, variant: SsVariant) -> Result<f64> {
    if !(epsilon > 0.0) {
        return Err(Error::InvalidParams("epsilon must be positive".into()));
    }
    match variant {
        SsVariant::Cauchy => {
            if delta != 0.0 {
                return Err(Error::InvalidParams(
                    "the Cauchy variant is the pure-DP path; delta must be 0".into(),
                ));
            }
            Ok(6.0 / epsilon)
        }
        SsVariant::Laplace => {
            check_delta(delta)?;
            Ok(2.0 / epsilon)
        }
        SsVariant::Gaussian => {
            check_delta(delta)?;
            Ok(5.0 * (2.0 * (2.0 / delta).ln()).sqrt() / epsilon)
        }
    }
}

fn check_delta(delta: f64) -> Result<()> {
    if !(0.0 < delta && delta < 1.0) {
        return Err(Error::InvalidParams(format!(
            "delta {delta} must lie in (0, 1)"
        )));
    }
    Ok(())
}

#[derive(Debug, Clone)]
pub struct SsRelease {
    pub values: Vec<f64>,
    pub eta: f64,
}

/// values + eta * ss_value * Z, with Z per variant. `ss_value` must be the
/// gamma-smooth sensitivity at the variant's own gamma (see `ss_gamma`).
pub fn ss_mechanism(
    values: &[f64],
    ss_value: f64,
    epsilon: f64,
    delta: f64,
    variant: SsVariant,
    noise: NoiseMode,
    rng: &mut RngStream,
) -> Result<SsRelease> {
    if !(ss_value >= 0.0) {
        return Err(Error::InvalidParams(format!(
            "smooth sensitivity {ss_value} must be >= 0"
        )));
    }
    let eta = ss_eta(epsilon, delta, variant)?;
    let scale = eta * ss_value;
    let out = values
        .iter()
        .map(|&v| -> Result<f64> {
            if noise.is_disabled() || scale == 0.0 {
                return Ok(v);
            }
            let z = match variant {
                SsVariant::Cauchy => standard_cauchy(rng),
                SsVariant::Laplace => sample_laplace(1.0, noise, rng)?,
                SsVariant::Gaussian => sample_gaussian(1.0, noise, rng)?,
            };
            Ok(v + scale * z)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(SsRelease { values: out, eta })
}
