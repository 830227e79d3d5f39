//! The vector mechanism: component-wise Poisson sampling, SVT selection of
//! the truncation threshold over the power-of-two ladder, and release of the
//! truncated vector through the RDP smooth-sensitivity mechanism at an
//! optimized Rényi order. The PMSJA-style baseline is the q = 1 case.

use serde::Serialize;

use crate::accounting::{amplify_vector, find_alpha};
use crate::error::{Error, Result};
use crate::mechanisms::smooth::rdp_ss;
use crate::mechanisms::SpentBudget;
use crate::numerics::sample_laplace;
use crate::rng::{NoiseMode, RngStream};
use crate::solvers::solve_truncation_qcqp;
use crate::table::VectorWorkload;

/// Result of a vector mechanism, de-normalized by the workload weight scale.
#[derive(Debug, Clone, Serialize)]
pub struct VectorEstimate {
    pub values: Vec<f64>,
    /// Power-of-two threshold the SVT loop accepted.
    pub chosen_tau: f64,
    /// Truncated-user count at that threshold.
    pub e_at_tau: f64,
    /// RDP smooth-sensitivity noise scale on the F/(2 tau) scale; the noise
    /// actually added to F is 2 tau sigma per coordinate.
    pub sigma: f64,
    pub alpha: f64,
    pub rho: f64,
    /// Amplified (epsilon', delta) guarantee.
    pub spent: SpentBudget,
    pub noise_disabled: bool,
    /// Per-component Horvitz-Thompson sample aggregates, for error
    /// decomposition only.
    pub sample_aggregate: Vec<f64>,
}

/// Deterministic part of the SVT threshold: (6/eps1) ln(6/beta).
pub fn svt_threshold_base(epsilon1: f64, beta: f64) -> f64 {
    6.0 / epsilon1 * (6.0 / beta).ln()
}

/// Vector mechanism under (epsilon, delta)-DP with sampling rate q.
pub fn dps4s_vector(
    workload: &VectorWorkload,
    q: f64,
    epsilon: f64,
    delta: f64,
    beta: f64,
    noise: NoiseMode,
    rng: &mut RngStream,
) -> Result<VectorEstimate> {
    if !(q > 0.0 && q <= 1.0) {
        return Err(Error::QOutOfRange(q));
    }
    if !(epsilon > 0.0) {
        return Err(Error::InvalidParams(format!(
            "epsilon {epsilon} must be positive"
        )));
    }
    if !(0.0 < delta && delta < 1.0) {
        return Err(Error::InvalidParams(format!(
            "delta {delta} must lie in (0, 1)"
        )));
    }
    if !(0.0 < beta && beta < 1.0) {
        return Err(Error::InvalidParams(format!(
            "beta {beta} must lie in (0, 1)"
        )));
    }
    let d = workload.dimension();
    let scale = workload.weight_scale();

    // Stage 1: sample every component at rate q.
    let sample = workload.poisson_sample(q, rng)?;

    // Stage 2: SVT over the power-of-two ladder.
    let epsilon1 = epsilon / 5.0;
    let epsilon2 = 4.0 * epsilon / 5.0;
    let threshold =
        svt_threshold_base(epsilon1, beta) + sample_laplace(2.0 / epsilon1, noise, rng)?;
    // The untruncated solution is feasible once tau reaches the largest
    // per-user norm, so E drops to zero there; the cap adds four extra
    // doublings of slack before declaring the noise pathological.
    let max_norm = sample.max_contribution_norm();
    let mut cap = 1.0f64;
    while cap <= 2.0 * max_norm {
        cap *= 2.0;
    }
    cap *= 16.0;

    let mut tau = 1.0f64;
    let (chosen_tau, solution) = loop {
        let solution = solve_truncation_qcqp(&sample, tau)?;
        let test = solution.e + sample_laplace(4.0 / epsilon1, noise, rng)?;
        if test <= threshold {
            break (tau, solution);
        }
        tau *= 2.0;
        if tau > cap {
            return Err(Error::SvtCapExceeded { cap });
        }
    };

    // Stage 3: release the truncated vector with RDP smooth sensitivity on
    // the F/(2 tau) scale, where the local-sensitivity bound E + 1 has unit
    // global sensitivity.
    let (alpha, rho) = find_alpha(epsilon2, delta, d)?;
    let b_value = solution.e + 1.0;
    let scaled: Vec<f64> = solution
        .truncated
        .iter()
        .map(|f| f / (2.0 * chosen_tau))
        .collect();
    let release = rdp_ss(&scaled, b_value, alpha, rho, noise, rng)?;
    let values: Vec<f64> = release
        .values
        .iter()
        .map(|v| 2.0 * chosen_tau * v / q * scale)
        .collect();

    let amplified = amplify_vector(epsilon, delta, alpha, q, workload.tuple_bound())?;
    Ok(VectorEstimate {
        values,
        chosen_tau,
        e_at_tau: solution.e,
        sigma: release.sigma,
        alpha,
        rho,
        spent: SpentBudget::Approx {
            epsilon: amplified,
            delta,
        },
        noise_disabled: noise.is_disabled(),
        sample_aggregate: sample
            .aggregates()
            .iter()
            .map(|f| f / q * scale)
            .collect(),
    })
}

/// The unsampled vector baseline: q = 1, where the amplified guarantee
/// collapses back to (epsilon, delta).
pub fn pmsja_baseline(
    workload: &VectorWorkload,
    epsilon: f64,
    delta: f64,
    beta: f64,
    noise: NoiseMode,
    rng: &mut RngStream,
) -> Result<VectorEstimate> {
    dps4s_vector(workload, 1.0, epsilon, delta, beta, noise, rng)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mechanisms::SpentBudget;
    use crate::table::{AggregationUnit, AggregationUnitTable};

    fn workload(units_per_component: Vec<Vec<(f64, Vec<u64>)>>, m: u64, l: usize) -> VectorWorkload {
        let components = units_per_component
            .into_iter()
            .enumerate()
            .map(|(f, units)| {
                let units = units
                    .into_iter()
                    .enumerate()
                    .map(|(id, (weight, contributors))| AggregationUnit {
                        id,
                        weight,
                        contributors,
                        group_index: Some(f),
                    })
                    .collect();
                AggregationUnitTable::new(units, m, 64, l, 1.0).unwrap()
            })
            .collect();
        VectorWorkload::new(components).unwrap()
    }

    #[test]
    fn svt_threshold_arithmetic() {
        // eps = 4 gives eps1 = 0.8; with beta = 0.1 the base is 7.5 ln 60.
        let got = svt_threshold_base(0.8, 0.1);
        assert!((got - 7.5 * 60f64.ln()).abs() < 1e-12);
        assert!((got - 30.7076).abs() < 1e-4);
    }

    #[test]
    fn deterministic_walkthrough_q1() {
        // Three users each with a single unit of weight 1 in one component:
        // every per-user norm is 1, so tau = 1 already leaves E = 0 <= theta
        // and the noise-disabled output is the untruncated query.
        let w = workload(
            vec![vec![(1.0, vec![0]), (1.0, vec![1]), (1.0, vec![2])]],
            3,
            1,
        );
        let mut rng = RngStream::new(1, 0);
        let est = dps4s_vector(&w, 1.0, 4.0, 1e-7, 0.1, NoiseMode::Disabled, &mut rng).unwrap();
        assert_eq!(est.chosen_tau, 1.0);
        assert_eq!(est.e_at_tau, 0.0);
        assert_eq!(est.values.len(), 1);
        assert!((est.values[0] - 3.0).abs() < 1e-9);
        assert!(!est.values[0].is_nan());
        let SpentBudget::Approx { epsilon, delta } = est.spent else {
            panic!("expected approx budget");
        };
        assert!((epsilon - 4.0).abs() < 1e-9, "q=1 keeps the budget whole");
        assert_eq!(delta, 1e-7);
    }

    #[test]
    fn truncating_walkthrough_picks_first_adequate_tau() {
        // One heavy user with six weight-1 units: at tau = 1, E = 5/6 which
        // already sits below the noiseless threshold, so tau = 1 is chosen
        // and the truncated value is tau.
        let units: Vec<(f64, Vec<u64>)> = (0..6).map(|_| (1.0, vec![0])).collect();
        let w = workload(vec![units], 1, 1);
        let mut rng = RngStream::new(2, 0);
        let est = dps4s_vector(&w, 1.0, 4.0, 1e-7, 0.1, NoiseMode::Disabled, &mut rng).unwrap();
        assert_eq!(est.chosen_tau, 1.0);
        assert!((est.e_at_tau - 5.0 / 6.0).abs() < 1e-3);
        assert!((est.values[0] - 1.0).abs() < 2e-3);
    }

    #[test]
    fn zero_weight_workload_returns_zero_vector() {
        let w = workload(
            vec![vec![(0.0, vec![0])], vec![(0.0, vec![1])]],
            2,
            1,
        );
        let mut rng = RngStream::new(3, 0);
        let est = dps4s_vector(&w, 1.0, 4.0, 1e-7, 0.1, NoiseMode::Disabled, &mut rng).unwrap();
        assert_eq!(est.values, vec![0.0, 0.0]);
        assert_eq!(est.values.len(), 2);
    }

    #[test]
    fn pmsja_is_the_q1_vector_mechanism() {
        let w = workload(
            vec![
                vec![(1.0, vec![0, 1]), (0.5, vec![1, 2])],
                vec![(0.8, vec![0, 2])],
            ],
            3,
            2,
        );
        let mut a = RngStream::new(11, 4);
        let mut b = RngStream::new(11, 4);
        let via_baseline = pmsja_baseline(&w, 4.0, 1e-7, 0.1, NoiseMode::Enabled, &mut a).unwrap();
        let via_q1 = dps4s_vector(&w, 1.0, 4.0, 1e-7, 0.1, NoiseMode::Enabled, &mut b).unwrap();
        for (x, y) in via_baseline.values.iter().zip(&via_q1.values) {
            assert_eq!(x.to_bits(), y.to_bits());
        }
        assert_eq!(via_baseline.chosen_tau, via_q1.chosen_tau);
    }

    #[test]
    fn dimension_is_preserved_and_tau_is_a_power_of_two() {
        let w = workload(
            vec![
                vec![(1.0, vec![0]), (1.0, vec![0])],
                vec![(1.0, vec![0]), (1.0, vec![0])],
                vec![(1.0, vec![1])],
            ],
            2,
            1,
        );
        for trial in 0..5 {
            let mut rng = RngStream::new(21, trial);
            let est =
                dps4s_vector(&w, 0.8, 4.0, 1e-7, 0.1, NoiseMode::Enabled, &mut rng).unwrap();
            assert_eq!(est.values.len(), 3);
            assert!(est.chosen_tau >= 1.0);
            assert_eq!(est.chosen_tau.log2().fract(), 0.0);
        }
    }

    #[test]
    fn amplified_budget_shrinks_with_q() {
        // Delta = 1 keeps q' = q, so the amplification is visible at
        // moderate sampling rates.
        let units = vec![AggregationUnit {
            id: 0,
            weight: 1.0,
            contributors: vec![0],
            group_index: Some(0),
        }];
        let table = AggregationUnitTable::new(units, 1, 1, 1, 1.0).unwrap();
        let w = VectorWorkload::new(vec![table]).unwrap();
        let mut spent = Vec::new();
        for q in [0.25, 0.5, 1.0] {
            let mut rng = RngStream::new(31, 0);
            let est = dps4s_vector(&w, q, 4.0, 1e-7, 0.1, NoiseMode::Disabled, &mut rng).unwrap();
            let SpentBudget::Approx { epsilon, .. } = est.spent else {
                panic!("expected approx");
            };
            spent.push(epsilon);
            assert!(epsilon <= 4.0 + 1e-9);
        }
        assert!(spent[0] < spent[1] && spent[1] < spent[2]);
    }
}
