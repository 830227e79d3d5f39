//! Sample-and-explore: k users are drawn jointly without replacement, the
//! explored instance keeps the units whose first contributing user was drawn,
//! a full-budget inner mechanism runs on it, and the result scales back by
//! m/k. The reported guarantee comes from the joint-sampling amplification
//! with collaborator bound C.

use crate::accounting::se_amplify;
use crate::error::{Error, Result};
use crate::mechanisms::scalar::{dps4s_scalar_rdp, r2t};
use crate::mechanisms::vector::{pmsja_baseline, VectorEstimate};
use crate::mechanisms::{ScalarEstimate, SpentBudget};
use crate::rng::{NoiseMode, RngStream};
use crate::table::{AggregationUnitTable, VectorWorkload};

/// k distinct users drawn uniformly via partial Fisher-Yates.
fn sample_users(m: u64, k: u64, rng: &mut RngStream) -> Vec<bool> {
    let mut pool: Vec<u64> = (0..m).collect();
    let mut picked = vec![false; m as usize];
    for i in 0..k {
        let j = i + rng.below(m - i);
        pool.swap(i as usize, j as usize);
        picked[pool[i as usize] as usize] = true;
    }
    picked
}

fn explore(table: &AggregationUnitTable, picked: &[bool]) -> AggregationUnitTable {
    AggregationUnitTable {
        units: table
            .units
            .iter()
            .filter(|u| picked[u.contributors[0] as usize])
            .cloned()
            .collect(),
        ..table.clone()
    }
}

fn check_k(k: u64, m: u64) -> Result<()> {
    if k < 1 || k > m {
        return Err(Error::InvalidParams(format!(
            "k = {k} must lie in [1, m = {m}]"
        )));
    }
    Ok(())
}

/// Scalar sample-and-explore. delta = 0 runs the pure-DP ladder inside;
/// delta > 0 the Gaussian one. The inner mechanism gets the full (eps, delta).
pub fn sne_scalar(
    table: &AggregationUnitTable,
    k: u64,
    epsilon: f64,
    delta: f64,
    collaborator_bound: u64,
    beta: f64,
    noise: NoiseMode,
    rng: &mut RngStream,
) -> Result<ScalarEstimate> {
    let m = table.user_universe_size;
    check_k(k, m)?;
    let picked = sample_users(m, k, rng);
    let explored = explore(table, &picked);
    let inner = if delta == 0.0 {
        r2t(&explored, epsilon, beta, noise, rng)?
    } else {
        dps4s_scalar_rdp(&explored, 1.0, epsilon, delta, beta, noise, rng)?
    };
    let scale_back = m as f64 / k as f64;
    let (eps_out, delta_out) = se_amplify(epsilon, delta, k, m, collaborator_bound)?;
    let spent = if delta_out == 0.0 {
        SpentBudget::Pure { epsilon: eps_out }
    } else {
        SpentBudget::Approx {
            epsilon: eps_out,
            delta: delta_out,
        }
    };
    Ok(ScalarEstimate {
        value: inner.value * scale_back,
        spent,
        noise_disabled: noise.is_disabled(),
        sample_aggregate: explored.query_value() * scale_back,
        diagnostics: inner.diagnostics,
    })
}

/// Vector sample-and-explore: one joint user draw builds the explored
/// instance of every component, the unsampled vector baseline runs on it with
/// the full budget, and the output scales back by m/k.
pub fn sne_vector(
    workload: &VectorWorkload,
    k: u64,
    epsilon: f64,
    delta: f64,
    collaborator_bound: u64,
    beta: f64,
    noise: NoiseMode,
    rng: &mut RngStream,
) -> Result<VectorEstimate> {
    let m = workload.user_universe_size();
    check_k(k, m)?;
    let picked = sample_users(m, k, rng);
    let explored = VectorWorkload {
        components: workload
            .components
            .iter()
            .map(|c| explore(c, &picked))
            .collect(),
    };
    let inner = pmsja_baseline(&explored, epsilon, delta, beta, noise, rng)?;
    let scale_back = m as f64 / k as f64;
    let (eps_out, delta_out) = se_amplify(epsilon, delta, k, m, collaborator_bound)?;
    Ok(VectorEstimate {
        values: inner.values.iter().map(|v| v * scale_back).collect(),
        spent: SpentBudget::Approx {
            epsilon: eps_out,
            delta: delta_out,
        },
        sample_aggregate: inner
            .sample_aggregate
            .iter()
            .map(|v| v * scale_back)
            .collect(),
        ..inner
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::table::counting_table;
    use crate::table::fixtures::triangle_table;

    #[test]
    fn full_sampling_equals_the_inner_baseline() {
        let t = triangle_table();
        let mut a = RngStream::new(8, 0);
        let via_sne =
            sne_scalar(&t, 7, 1.0, 0.0, 3, 0.1, NoiseMode::Disabled, &mut a).unwrap();
        let mut b = RngStream::new(8, 0);
        let via_r2t = r2t(&t, 1.0, 0.1, NoiseMode::Disabled, &mut b).unwrap();
        assert_eq!(via_sne.value, via_r2t.value);
    }

    #[test]
    fn reported_budget_matches_the_amplification_formula() {
        let t = triangle_table();
        let mut rng = RngStream::new(9, 0);
        let est = sne_scalar(&t, 2, 1.0, 0.0, 3, 0.1, NoiseMode::Disabled, &mut rng).unwrap();
        let (want, _) = se_amplify(1.0, 0.0, 2, 7, 3).unwrap();
        let SpentBudget::Pure { epsilon } = est.spent else {
            panic!("expected a pure budget at delta = 0");
        };
        assert_eq!(epsilon, want);
        // k = 1 is the single-user amplification: 1 - P = C/m.
        let mut rng = RngStream::new(9, 1);
        let single = sne_scalar(&t, 1, 1.0, 0.0, 3, 0.1, NoiseMode::Disabled, &mut rng).unwrap();
        let SpentBudget::Pure { epsilon } = single.spent else {
            panic!("expected pure");
        };
        assert!((epsilon - (1.0 + 3.0 / 7.0 * 1.0f64.exp_m1()).ln()).abs() < 1e-12);
    }

    #[test]
    fn explored_units_follow_first_contributors() {
        // Units keyed by first contributor 0 or 1; sampling k = 1 keeps only
        // one side, whichever user came up.
        let t = counting_table(vec![vec![0, 2], vec![1, 2], vec![0, 3]], 4, 2, 2).unwrap();
        for trial in 0..10 {
            let mut rng = RngStream::new(10, trial);
            let picked = sample_users(4, 1, &mut rng);
            let explored = explore(&t, &picked);
            for unit in &explored.units {
                assert!(picked[unit.contributors[0] as usize]);
            }
        }
    }

    #[test]
    fn vector_variant_preserves_dimension_and_budget() {
        let c0 = counting_table(vec![vec![0, 1], vec![1, 2]], 3, 4, 2).unwrap();
        let c1 = counting_table(vec![vec![2, 0]], 3, 4, 2).unwrap();
        let w = VectorWorkload::new(vec![c0, c1]).unwrap();
        let mut rng = RngStream::new(11, 0);
        let est = sne_vector(&w, 2, 4.0, 1e-7, 2, 0.1, NoiseMode::Disabled, &mut rng).unwrap();
        assert_eq!(est.values.len(), 2);
        let (want_eps, want_delta) = se_amplify(4.0, 1e-7, 2, 3, 2).unwrap();
        let SpentBudget::Approx { epsilon, delta } = est.spent else {
            panic!("expected approx");
        };
        assert_eq!(epsilon, want_eps);
        assert_eq!(delta, want_delta);
        // k = m with noise disabled reproduces the unsampled baseline.
        let mut a = RngStream::new(11, 1);
        let full = sne_vector(&w, 3, 4.0, 1e-7, 2, 0.1, NoiseMode::Disabled, &mut a).unwrap();
        let mut b = RngStream::new(11, 1);
        let base = pmsja_baseline(&w, 4.0, 1e-7, 0.1, NoiseMode::Disabled, &mut b).unwrap();
        for (x, y) in full.values.iter().zip(&base.values) {
            assert!((x - y).abs() < 1e-12);
        }
    }

    /// The skewed construction where only m/l users ever appear first: the
    /// explored instance takes a user's units all-or-nothing, inflating the
    /// sampling variance by about l compared with unit-level sampling.
    #[test]
    fn sampling_variance_penalty_on_the_skewed_construction() {
        let l = 4usize;
        let n = 240u64;
        let m = n; // the variance ratio is l * n / m
        let pool = (m as usize) / l;
        let mut lists = Vec::new();
        for unit in 0..n {
            let first = (unit as usize % pool) as u64;
            let mut contributors = vec![first];
            let mut next = pool as u64 + (unit * (l as u64 - 1)) % (m - pool as u64);
            while contributors.len() < l {
                contributors.push(pool as u64 + (next - pool as u64) % (m - pool as u64));
                next += 1;
            }
            lists.push(contributors);
        }
        let t = counting_table(lists, m, 16, l).unwrap();
        let q = 0.1;
        let k = (q * m as f64).floor() as u64;
        let trials = 5000;
        let mut sne_sum = 0.0;
        let mut sne_sq = 0.0;
        let mut s4s_sum = 0.0;
        let mut s4s_sq = 0.0;
        for trial in 0..trials {
            let mut rng = RngStream::new(77, trial);
            let picked = sample_users(m, k, &mut rng);
            let sne_est = explore(&t, &picked).aggregate() * m as f64 / k as f64;
            sne_sum += sne_est;
            sne_sq += sne_est * sne_est;
            let s4s_est = t.poisson_sample(q, &mut rng).unwrap().aggregate() / q;
            s4s_sum += s4s_est;
            s4s_sq += s4s_est * s4s_est;
        }
        let sne_var = sne_sq / trials as f64 - (sne_sum / trials as f64).powi(2);
        let s4s_var = s4s_sq / trials as f64 - (s4s_sum / trials as f64).powi(2);
        assert!(
            sne_var >= (l as f64 / 2.0) * s4s_var,
            "variance ratio {} below l/2",
            sne_var / s4s_var
        );
    }
}
