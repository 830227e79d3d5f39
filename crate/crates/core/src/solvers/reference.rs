//! Independent small-instance reference solvers.
//!
//! These exist to cross-check the production optimizers and are written
//! deliberately differently: the LP oracle is a dense textbook tableau
//! simplex with Bland's rule (bounds as explicit rows, nothing implicit), and
//! the QCQP oracle is plain grid search with local refinement. Both refuse
//! instances beyond desk size.

use crate::error::{Error, Result};
use crate::table::{AggregationUnitTable, VectorWorkload};

/// LP optimum of the truncation program via a dense standard-form tableau
/// simplex. Limits: at most 12 units and 8 users.
pub fn lp_oracle(table: &AggregationUnitTable, tau: f64) -> Result<f64> {
    let n = table.units.len();
    let users: Vec<u64> = {
        let mut ids: Vec<u64> = table
            .units
            .iter()
            .flat_map(|u| u.contributors.iter().copied())
            .collect();
        ids.sort_unstable();
        ids.dedup();
        ids
    };
    if n > 12 || users.len() > 8 {
        return Err(Error::InstanceTooLarge(format!(
            "{n} units / {} users exceeds the 12x8 oracle limit",
            users.len()
        )));
    }
    if !(tau >= 0.0) {
        return Err(Error::InvalidParams("tau must be >= 0".into()));
    }
    if n == 0 {
        return Ok(0.0);
    }
    let m = users.len();
    // Rows: one capacity row per user (sum x <= tau), one bound row per unit
    // (x <= w). Minimize -sum x.
    let rows = m + n;
    let cols = n + rows + 1; // structurals + slacks + rhs
    let mut t = vec![vec![0.0f64; cols]; rows + 1];
    for (r, &user) in users.iter().enumerate() {
        for (j, unit) in table.units.iter().enumerate() {
            if unit.contributors.contains(&user) {
                t[r][j] = 1.0;
            }
        }
        t[r][n + r] = 1.0;
        t[r][cols - 1] = tau;
    }
    for (j, unit) in table.units.iter().enumerate() {
        let r = m + j;
        t[r][j] = 1.0;
        t[r][n + r] = 1.0;
        t[r][cols - 1] = unit.weight;
    }
    for j in 0..n {
        t[rows][j] = -1.0;
    }
    let mut basis: Vec<usize> = (n..n + rows).collect();

    for _ in 0..10_000 {
        // Bland: smallest-index column with a negative objective coefficient.
        let Some(pivot_col) = (0..cols - 1).find(|&j| t[rows][j] < -1e-9) else {
            // Minimizing -sum x leaves +optimum in the objective-row rhs.
            return Ok(t[rows][cols - 1]);
        };
        // Ratio test; ties broken by the smallest basis variable.
        let mut pivot_row: Option<usize> = None;
        let mut best = f64::INFINITY;
        for r in 0..rows {
            if t[r][pivot_col] > 1e-11 {
                let ratio = t[r][cols - 1] / t[r][pivot_col];
                if ratio < best - 1e-12
                    || (ratio < best + 1e-12
                        && pivot_row.map_or(false, |pr| basis[pr] > basis[r]))
                {
                    best = ratio;
                    pivot_row = Some(r);
                }
            }
        }
        let Some(pr) = pivot_row else {
            return Err(Error::SolverFailure {
                iterations: 0,
                detail: "oracle LP unbounded".into(),
            });
        };
        let pivot = t[pr][pivot_col];
        for j in 0..cols {
            t[pr][j] /= pivot;
        }
        for r in 0..=rows {
            if r != pr {
                let factor = t[r][pivot_col];
                if factor != 0.0 {
                    for j in 0..cols {
                        t[r][j] -= factor * t[pr][j];
                    }
                }
            }
        }
        basis[pr] = pivot_col;
    }
    Err(Error::SolverFailure {
        iterations: 10_000,
        detail: "oracle LP iteration limit".into(),
    })
}

/// QCQP optimum via dense grid search over y (feasibility of a y is checked
/// against the coupling-forced z) refined locally. Limits: at most 3
/// contributing users, 4 units, 2 components. Accuracy about 1e-2.
pub fn qcqp_oracle(workload: &VectorWorkload, tau: f64) -> Result<f64> {
    let d = workload.dimension();
    let total_units: usize = workload.components.iter().map(|c| c.units.len()).sum();
    let mut users: Vec<u64> = workload
        .components
        .iter()
        .flat_map(|c| c.units.iter().flat_map(|u| u.contributors.iter().copied()))
        .collect();
    users.sort_unstable();
    users.dedup();
    if users.len() > 3 || total_units > 4 || d > 2 {
        return Err(Error::InstanceTooLarge(format!(
            "{} users / {total_units} units / d={d} exceeds the 3x4x2 oracle limit",
            users.len()
        )));
    }
    if !(tau >= 0.0) {
        return Err(Error::InvalidParams("tau must be >= 0".into()));
    }
    let m = workload.user_universe_size() as f64;
    let na = users.len();
    if na == 0 {
        return Ok(m);
    }

    let feasible = |y: &[f64]| -> bool {
        for &user in &users {
            let mut norm_sq = 0.0;
            for component in &workload.components {
                let mut s = 0.0;
                for unit in &component.units {
                    if unit.contributors.contains(&user) {
                        let slack: f64 = unit
                            .contributors
                            .iter()
                            .map(|c| 1.0 - y[users.iter().position(|u| u == c).unwrap()])
                            .sum();
                        let z = (1.0 - slack).clamp(0.0, 1.0);
                        s += unit.weight * z;
                    }
                }
                norm_sq += s * s;
            }
            if norm_sq > tau * tau + 1e-12 {
                return false;
            }
        }
        true
    };

    let search = |center: &[f64], radius: f64, steps: usize| -> (Vec<f64>, f64) {
        let mut best_y = vec![0.0; na];
        let mut best = -1.0;
        let axis: Vec<Vec<f64>> = center
            .iter()
            .map(|&c| {
                (0..=steps)
                    .map(|i| {
                        ((c - radius) + 2.0 * radius * i as f64 / steps as f64).clamp(0.0, 1.0)
                    })
                    .collect()
            })
            .collect();
        let mut idx = vec![0usize; na];
        loop {
            let y: Vec<f64> = (0..na).map(|k| axis[k][idx[k]]).collect();
            if feasible(&y) {
                let obj: f64 = y.iter().sum();
                if obj > best {
                    best = obj;
                    best_y = y;
                }
            }
            // Odometer increment over the grid.
            let mut k = 0;
            loop {
                idx[k] += 1;
                if idx[k] <= steps {
                    break;
                }
                idx[k] = 0;
                k += 1;
                if k == na {
                    return (best_y, best);
                }
            }
        }
    };

    let coarse_steps = 200usize;
    let (mut y, mut best) = search(&vec![0.5; na], 0.5, coarse_steps);
    if best < 0.0 {
        // Even y = 0 infeasible cannot happen (z clamps to 0), so this is a
        // numerical corner only.
        return Err(Error::SolverNonConvergence { gap: f64::NAN });
    }
    for radius in [1.0 / coarse_steps as f64, 1.0 / (10.0 * coarse_steps as f64)] {
        let (ry, rbest) = search(&y, radius, 20);
        if rbest > best {
            best = rbest;
            y = ry;
        }
    }
    // Users outside the instance are untruncated for free.
    Ok(m - na as f64 + best)
}
