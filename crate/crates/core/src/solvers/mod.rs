//! Truncation optimizers: the per-user packing LP for scalar queries and the
//! joint QCQP for vector workloads, plus independent small-instance oracles.

pub mod lp;
pub mod qcqp;
pub mod reference;

pub use qcqp::{solve_truncation_qcqp, QcqpSolution};

use crate::error::{Error, Result};
use crate::solvers::lp::{solve_bounded_lp, BoundedLp};
use crate::table::AggregationUnitTable;

/// Optimal fractional truncation of a table at threshold tau.
#[derive(Debug, Clone)]
pub struct TruncationSolution {
    /// Fractional contribution per unit, aligned with `table.units`;
    /// 0 <= x_t <= w_t and every user's total stays at or below tau.
    pub x: Vec<f64>,
    /// Truncated query value: sum of x (normalized weights).
    pub objective: f64,
}

/// Maximizes the retained weight subject to a per-user cap of tau:
///
///   max sum x_t   s.t.  sum_{t: u in t} x_t <= tau per user,  0 <= x_t <= w_t
///
/// Single-contributor tables short-circuit to the per-user closed form
/// sum_u min(tau, sum w); thresholds at or above every user's total skip the
/// solve entirely.
pub fn solve_truncation_lp(table: &AggregationUnitTable, tau: f64) -> Result<TruncationSolution> {
    if !(tau >= 0.0) {
        return Err(Error::InvalidParams(format!(
            "tau {tau} must be non-negative"
        )));
    }
    let n = table.units.len();
    if n == 0 || tau == 0.0 {
        return Ok(TruncationSolution {
            x: vec![0.0; n],
            objective: 0.0,
        });
    }

    // Per-user weighted totals; rows are needed only where the cap can bind.
    let mut totals: std::collections::HashMap<u64, f64> = std::collections::HashMap::new();
    for unit in &table.units {
        for &u in &unit.contributors {
            *totals.entry(u).or_insert(0.0) += unit.weight;
        }
    }
    if totals.values().all(|&s| s <= tau) {
        let x: Vec<f64> = table.units.iter().map(|u| u.weight).collect();
        let objective = x.iter().sum();
        return Ok(TruncationSolution { x, objective });
    }

    if table.units.iter().all(|u| u.contributors.len() == 1) {
        // No overlap between users: fill each user's budget greedily.
        let mut remaining: std::collections::HashMap<u64, f64> =
            totals.keys().map(|&u| (u, tau)).collect();
        let mut x = vec![0.0; n];
        for (i, unit) in table.units.iter().enumerate() {
            let r = remaining.get_mut(&unit.contributors[0]).unwrap();
            let take = unit.weight.min(*r);
            x[i] = take;
            *r -= take;
        }
        let objective = x.iter().sum();
        return Ok(TruncationSolution { x, objective });
    }

    // General case: bounded-variable simplex over positively weighted units
    // and binding-capable users.
    let var_units: Vec<usize> = (0..n).filter(|&i| table.units[i].weight > 0.0).collect();
    let var_index: std::collections::HashMap<usize, usize> = var_units
        .iter()
        .enumerate()
        .map(|(v, &i)| (i, v))
        .collect();
    let mut binding_users: Vec<u64> = totals
        .iter()
        .filter(|&(_, &s)| s > tau)
        .map(|(&u, _)| u)
        .collect();
    binding_users.sort_unstable();
    let mut rows: Vec<Vec<(usize, f64)>> = vec![Vec::new(); binding_users.len()];
    let user_row: std::collections::HashMap<u64, usize> = binding_users
        .iter()
        .enumerate()
        .map(|(r, &u)| (u, r))
        .collect();
    for &i in &var_units {
        for contributor in &table.units[i].contributors {
            if let Some(&r) = user_row.get(contributor) {
                rows[r].push((var_index[&i], 1.0));
            }
        }
    }
    let lp = BoundedLp {
        objective: vec![1.0; var_units.len()],
        rows,
        rhs: vec![tau; binding_users.len()],
        upper: var_units.iter().map(|&i| table.units[i].weight).collect(),
    };
    let sol = solve_bounded_lp(&lp)?;
    let mut x = vec![0.0; n];
    for (v, &i) in var_units.iter().enumerate() {
        x[i] = sol.x[v].clamp(0.0, table.units[i].weight);
    }
    let objective = x.iter().sum();
    Ok(TruncationSolution { x, objective })
}

#[cfg(test)]
mod tests {
    use super::reference::lp_oracle;
    use super::*;
    use crate::rng::RngStream;
    use crate::table::counting_table;
    use crate::table::fixtures::triangle_table;
    use crate::table::{AggregationUnit, UserId, VectorWorkload};

    #[test]
    fn triangle_instance_objectives() {
        let t = triangle_table();
        assert!((solve_truncation_lp(&t, 2.0).unwrap().objective - 4.0).abs() < 1e-6);
        assert!((solve_truncation_lp(&t, 1.0).unwrap().objective - 2.0).abs() < 1e-6);
        for tau in [3.0, 4.0, 100.0] {
            assert!((solve_truncation_lp(&t, tau).unwrap().objective - 5.0).abs() < 1e-9);
        }
        assert_eq!(solve_truncation_lp(&t, 0.0).unwrap().objective, 0.0);
    }

    #[test]
    fn solution_is_feasible() {
        let t = triangle_table();
        for tau in [0.5, 1.0, 1.5, 2.0, 2.5] {
            let sol = solve_truncation_lp(&t, tau).unwrap();
            for (x, unit) in sol.x.iter().zip(&t.units) {
                assert!(*x >= -1e-9 && *x <= unit.weight + 1e-9);
            }
            for user in 0..t.user_universe_size {
                let total: f64 = sol
                    .x
                    .iter()
                    .zip(&t.units)
                    .filter(|(_, u)| u.contributors.contains(&user))
                    .map(|(x, _)| x)
                    .sum();
                assert!(total <= tau + 1e-6, "user {user}: {total} > {tau}");
            }
            let sum: f64 = sol.x.iter().sum();
            assert!((sum - sol.objective).abs() < 1e-9);
        }
    }

    #[test]
    fn single_contributor_closed_form() {
        // Users 0 and 1 own 3 and 1 units of weight 1; tau = 2 keeps 2 + 1.
        let t = counting_table(vec![vec![0], vec![0], vec![0], vec![1]], 2, 4, 1).unwrap();
        let sol = solve_truncation_lp(&t, 2.0).unwrap();
        assert!((sol.objective - 3.0).abs() < 1e-12);
    }

    fn random_table(rng: &mut RngStream) -> crate::table::AggregationUnitTable {
        let m = 1 + rng.below(8);
        let n = 1 + rng.below(12) as usize;
        let mut units = Vec::new();
        for id in 0..n {
            let l = 1 + rng.below(3.min(m)) as usize;
            let mut contributors: Vec<UserId> = Vec::new();
            while contributors.len() < l {
                let u = rng.below(m);
                if !contributors.contains(&u) {
                    contributors.push(u);
                }
            }
            units.push(AggregationUnit {
                id,
                weight: rng.uniform(),
                contributors,
                group_index: None,
            });
        }
        crate::table::AggregationUnitTable::new(units, m, n as u64, 3, 1.0).unwrap()
    }

    #[test]
    fn random_instances_match_oracle() {
        let mut rng = RngStream::new(20260810, 2);
        for case in 0..50 {
            let t = random_table(&mut rng);
            let tau = 3.0 * rng.uniform();
            let got = solve_truncation_lp(&t, tau).unwrap().objective;
            let want = lp_oracle(&t, tau).unwrap();
            assert!(
                (got - want).abs() <= 1e-6,
                "case {case}: {got} vs oracle {want} at tau={tau}"
            );
        }
    }

    #[test]
    fn objective_monotone_in_tau() {
        let mut rng = RngStream::new(6, 0);
        let t = random_table(&mut rng);
        let mut prev = -1.0;
        for i in 0..12 {
            let tau = i as f64 * 0.4;
            let obj = solve_truncation_lp(&t, tau).unwrap().objective;
            assert!(obj >= prev - 1e-9);
            prev = obj;
        }
    }

    /// Proof-step sensitivity: adding any one user's sampled units moves the
    /// optimum by at most min(tau, |S_u|).
    #[test]
    fn neighbor_sensitivity_bound() {
        let mut rng = RngStream::new(20260810, 3);
        for case in 0..200 {
            let t = random_table(&mut rng);
            let tau = 0.1 + 2.9 * rng.uniform();
            // Pick a witness user and give them extra units (weights in [0,1]).
            let witness = rng.below(t.user_universe_size);
            let extra = rng.below(4) as usize;
            let mut grown = t.units.clone();
            for e in 0..extra {
                grown.push(AggregationUnit {
                    id: t.units.len() + e,
                    weight: rng.uniform(),
                    contributors: vec![witness],
                    group_index: None,
                });
            }
            let grown = crate::table::AggregationUnitTable::new(
                grown,
                t.user_universe_size,
                (t.units.len() + extra) as u64,
                3,
                1.0,
            )
            .unwrap();
            let base = solve_truncation_lp(&t, tau).unwrap().objective;
            let more = solve_truncation_lp(&grown, tau).unwrap().objective;
            let bound = tau.min(extra as f64);
            assert!(
                (more - base).abs() <= bound + 1e-6,
                "case {case}: |{more} - {base}| > min({tau}, {extra})"
            );
            assert!(more >= base - 1e-9, "adding units cannot shrink the optimum");
        }
    }

    fn random_workload(rng: &mut RngStream, max_users: u64) -> VectorWorkload {
        let m = 1 + rng.below(max_users);
        let d = 1 + rng.below(2) as usize;
        let mut components = Vec::new();
        for f in 0..d {
            let n = rng.below(3) as usize;
            let mut units = Vec::new();
            for id in 0..n {
                let l = 1 + rng.below(2.min(m)) as usize;
                let mut contributors: Vec<UserId> = Vec::new();
                while contributors.len() < l {
                    let u = rng.below(m);
                    if !contributors.contains(&u) {
                        contributors.push(u);
                    }
                }
                units.push(AggregationUnit {
                    id,
                    weight: rng.uniform(),
                    contributors,
                    group_index: Some(f),
                });
            }
            components.push(
                crate::table::AggregationUnitTable::new(units, m, 16, 2, 1.0).unwrap(),
            );
        }
        VectorWorkload::new(components).unwrap()
    }

    #[test]
    fn qcqp_matches_grid_oracle_on_small_instances() {
        let mut rng = RngStream::new(20260810, 4);
        let mut checked = 0;
        while checked < 25 {
            let w = random_workload(&mut rng, 3);
            let total_units: usize = w.components.iter().map(|c| c.units.len()).sum();
            if total_units == 0 || total_units > 4 {
                continue;
            }
            let tau = 0.2 + 1.8 * rng.uniform();
            let got = solve_truncation_qcqp(&w, tau).unwrap().objective;
            let want = super::reference::qcqp_oracle(&w, tau).unwrap();
            assert!(
                (got - want).abs() <= 1e-2,
                "case {checked}: {got} vs oracle {want} at tau={tau}"
            );
            checked += 1;
        }
    }

    #[test]
    fn qcqp_e_sensitivity_under_user_removal() {
        let mut rng = RngStream::new(20260810, 5);
        for case in 0..50 {
            let w = random_workload(&mut rng, 5);
            let tau = 0.2 + 1.8 * rng.uniform();
            let user = rng.below(w.user_universe_size());
            let e_base = solve_truncation_qcqp(&w, tau).unwrap().e;
            let e_removed = solve_truncation_qcqp(&w.remove_user(user).unwrap(), tau)
                .unwrap()
                .e;
            assert!(
                (e_base - e_removed).abs() <= 1.0 + 1e-3,
                "case {case}: |{e_base} - {e_removed}| > 1"
            );
        }
    }

    #[test]
    fn qcqp_truncated_query_bound_under_user_removal() {
        let mut rng = RngStream::new(20260810, 6);
        for case in 0..50 {
            let w = random_workload(&mut rng, 5);
            let tau = 0.2 + 1.8 * rng.uniform();
            let user = rng.below(w.user_universe_size());
            let base = solve_truncation_qcqp(&w, tau).unwrap();
            let removed = solve_truncation_qcqp(&w.remove_user(user).unwrap(), tau).unwrap();
            let dist = truncated_distance(&w, &base, &removed, user);
            let bound = 2.0 * tau * (base.e + 1.0) + 1e-3;
            assert!(
                dist <= bound,
                "case {case}: ||F - F'|| = {dist} > {bound} (E={})",
                base.e
            );
        }
    }

    /// L2 distance between truncated queries of a workload and its
    /// user-removal neighbor; surviving units are realigned by position.
    fn truncated_distance(
        w: &VectorWorkload,
        base: &QcqpSolution,
        removed: &QcqpSolution,
        user: UserId,
    ) -> f64 {
        let mut sq = 0.0;
        for (f, component) in w.components.iter().enumerate() {
            let mut f_base = 0.0;
            let mut f_removed = 0.0;
            let mut kept = 0usize;
            for (pos, unit) in component.units.iter().enumerate() {
                f_base += unit.weight * base.z[f][pos];
                if !unit.contributors.contains(&user) {
                    f_removed += unit.weight * removed.z[f][kept];
                    kept += 1;
                }
            }
            sq += (f_base - f_removed).powi(2);
        }
        sq.sqrt()
    }
}
