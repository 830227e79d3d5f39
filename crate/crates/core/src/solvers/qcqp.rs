//! Log-barrier interior-point solver for the joint truncation program of
//! vector workloads.
//!
//! The program maximizes the number of untruncated users subject to a
//! Euclidean-norm cap on every user's aggregated contribution:
//!
//!   max  sum_u y_u
//!   s.t. sum_f (sum_{t in T_f, u in t} w_{f,t} z_{f,t})^2 <= tau^2   per user
//!        sum_{u in t} (y_u - 1) <= z_{f,t} - 1                       per unit
//!        y, z in [0, 1]
//!
//! The objective is linear and every constraint convex, so a damped-Newton
//! path-following barrier converges to the global optimum; a plain
//! gradient-descent step on the same barrier is kept as a fallback for the
//! rare Newton breakdown. Variables exist only for users that actually
//! contribute somewhere; everyone else is untruncated for free.

use std::collections::HashMap;

use crate::error::{Error, Result};
use crate::solvers::lp::{solve_bounded_lp, BoundedLp};
use crate::table::{UserId, VectorWorkload};

/// Output of the joint truncation program.
#[derive(Debug, Clone)]
pub struct QcqpSolution {
    /// Optimal y per user that contributes to at least one unit; absent users
    /// are untruncated (y = 1).
    pub y: HashMap<UserId, f64>,
    /// Per component, per unit: the canonical z, the largest value the
    /// coupling constraints force given y, clipped to [0, 1]. Ties in the
    /// optimal face make z solver-dependent; this choice is deterministic.
    pub z: Vec<Vec<f64>>,
    /// Truncated query per component: sum of w * z (normalized weights).
    pub truncated: Vec<f64>,
    /// Number of (fractionally) truncated users, E = sum (1 - y).
    pub e: f64,
    /// sum of y over the whole user universe (= m - E).
    pub objective: f64,
}

struct Instance {
    /// Active users in ascending id order.
    users: Vec<UserId>,
    /// Per unit (flat index): active-user indices of its contributors.
    unit_contributors: Vec<Vec<usize>>,
    /// Per unit: weight and component.
    unit_weight: Vec<f64>,
    /// Per active user: flat unit indices grouped by component.
    user_units: Vec<Vec<Vec<usize>>>,
    /// Component and position of each flat unit.
    unit_slot: Vec<(usize, usize)>,
    dimension: usize,
    universe: u64,
}

fn build_instance(workload: &VectorWorkload) -> Instance {
    let d = workload.dimension();
    let mut user_set: Vec<UserId> = workload
        .components
        .iter()
        .flat_map(|c| c.units.iter().flat_map(|u| u.contributors.iter().copied()))
        .collect();
    user_set.sort_unstable();
    user_set.dedup();
    let index_of: HashMap<UserId, usize> =
        user_set.iter().enumerate().map(|(i, &u)| (u, i)).collect();

    let mut unit_contributors = Vec::new();
    let mut unit_weight = Vec::new();
    let mut unit_slot = Vec::new();
    let mut user_units = vec![vec![Vec::new(); d]; user_set.len()];
    for (f, component) in workload.components.iter().enumerate() {
        for (pos, unit) in component.units.iter().enumerate() {
            let flat = unit_weight.len();
            unit_weight.push(unit.weight);
            unit_slot.push((f, pos));
            let contributors: Vec<usize> =
                unit.contributors.iter().map(|u| index_of[u]).collect();
            for &ui in &contributors {
                user_units[ui][f].push(flat);
            }
            unit_contributors.push(contributors);
        }
    }
    Instance {
        users: user_set,
        unit_contributors,
        unit_weight,
        user_units,
        unit_slot,
        dimension: d,
        universe: workload.user_universe_size(),
    }
}

/// Canonical z given y: the coupling lower bound clipped into the box. The
/// per-user norms are monotone in z, so feasibility of y is exactly
/// feasibility of this z.
fn coupling_z(inst: &Instance, y: &[f64]) -> Vec<f64> {
    inst.unit_contributors
        .iter()
        .map(|contributors| {
            let slack: f64 = contributors.iter().map(|&u| 1.0 - y[u]).sum();
            (1.0 - slack).clamp(0.0, 1.0)
        })
        .collect()
}

fn finish(inst: &Instance, y_active: Vec<f64>) -> QcqpSolution {
    let z_flat = coupling_z(inst, &y_active);
    let mut z: Vec<Vec<f64>> = vec![Vec::new(); inst.dimension];
    let mut counts = vec![0usize; inst.dimension];
    for &(f, _) in &inst.unit_slot {
        counts[f] += 1;
    }
    for (f, c) in counts.iter().enumerate() {
        z[f] = vec![0.0; *c];
    }
    let mut truncated = vec![0.0; inst.dimension];
    for (flat, &(f, pos)) in inst.unit_slot.iter().enumerate() {
        z[f][pos] = z_flat[flat];
        truncated[f] += inst.unit_weight[flat] * z_flat[flat];
    }
    let e: f64 = y_active.iter().map(|&v| 1.0 - v).sum();
    let y = inst
        .users
        .iter()
        .copied()
        .zip(y_active.iter().copied())
        .collect();
    QcqpSolution {
        y,
        z,
        truncated,
        e,
        objective: inst.universe as f64 - e,
    }
}

/// Solves the joint truncation program at threshold tau.
pub fn solve_truncation_qcqp(workload: &VectorWorkload, tau: f64) -> Result<QcqpSolution> {
    if !(tau >= 0.0) {
        return Err(Error::InvalidParams(format!(
            "tau {tau} must be non-negative"
        )));
    }
    let inst = build_instance(workload);
    let na = inst.users.len();
    if na == 0 {
        return Ok(finish(&inst, Vec::new()));
    }

    // Untruncated solution feasible: y = z = 1 exactly.
    let max_norm = workload.max_contribution_norm();
    if tau >= max_norm {
        return Ok(finish(&inst, vec![1.0; na]));
    }
    if tau == 0.0 {
        return Ok(finish(&inst, solve_zero_tau(&inst)?));
    }

    let y = barrier_solve(&inst, tau)?;
    Ok(finish(&inst, y))
}

/// tau = 0 degenerates to an LP: every positively weighted unit forces its
/// z to zero, so the coupling needs sum_{u in t} y_u <= l_t - 1.
fn solve_zero_tau(inst: &Instance) -> Result<Vec<f64>> {
    let na = inst.users.len();
    let mut rows = Vec::new();
    let mut rhs = Vec::new();
    for (flat, contributors) in inst.unit_contributors.iter().enumerate() {
        if inst.unit_weight[flat] > 0.0 {
            rows.push(contributors.iter().map(|&u| (u, 1.0)).collect());
            rhs.push(contributors.len() as f64 - 1.0);
        }
    }
    let lp = BoundedLp {
        objective: vec![1.0; na],
        rows,
        rhs,
        upper: vec![1.0; na],
    };
    Ok(solve_bounded_lp(&lp)?.x)
}

const GAP_TOL: f64 = 1e-9;
const NEWTON_TOL: f64 = 1e-11;

fn barrier_solve(inst: &Instance, tau: f64) -> Result<Vec<f64>> {
    let na = inst.users.len();
    let nz = inst.unit_weight.len();
    let nv = na + nz;

    // Strictly feasible start: uniform z = kappa keeps every norm under
    // tau/2, uniform y = kappa/2 keeps every coupling slack at least kappa/2.
    let max_norm_sq = (0..na)
        .map(|u| {
            (0..inst.dimension)
                .map(|f| {
                    inst.user_units[u][f]
                        .iter()
                        .map(|&j| inst.unit_weight[j])
                        .sum::<f64>()
                        .powi(2)
                })
                .sum::<f64>()
        })
        .fold(0.0f64, f64::max);
    let kappa = if max_norm_sq > 0.0 {
        (0.5 * tau / max_norm_sq.sqrt()).min(0.9)
    } else {
        0.9
    };
    let mut v = vec![kappa / 2.0; nv];
    for z in v[na..].iter_mut() {
        *z = kappa;
    }

    let ncon = (2 * nv + nz + na) as f64;
    let mut t = 1.0;
    let target = GAP_TOL * (na as f64).max(1.0);
    let mut outer = 0;
    while ncon / t > target {
        center(inst, tau, t, &mut v)?;
        t *= 10.0;
        outer += 1;
        if outer > 40 {
            return Err(Error::SolverNonConvergence { gap: ncon / t });
        }
    }
    center(inst, tau, t, &mut v)?;
    Ok(v[..na].iter().map(|&y| y.clamp(0.0, 1.0)).collect())
}

struct BarrierEval {
    value: f64,
    grad: Vec<f64>,
    hess: Vec<f64>, // dense nv x nv, row-major; only filled when requested
}

fn eval_barrier(
    inst: &Instance,
    tau: f64,
    t: f64,
    v: &[f64],
    with_hess: bool,
) -> Option<BarrierEval> {
    let na = inst.users.len();
    let nz = inst.unit_weight.len();
    let nv = na + nz;
    let mut value = -t * v[..na].iter().sum::<f64>();
    let mut grad = vec![0.0; nv];
    for g in grad[..na].iter_mut() {
        *g = -t;
    }
    let mut hess = vec![0.0; if with_hess { nv * nv } else { 0 }];
    let add_h = |h: &mut Vec<f64>, i: usize, j: usize, val: f64| {
        h[i * nv + j] += val;
    };

    // Box terms.
    for i in 0..nv {
        let x = v[i];
        if x <= 0.0 || x >= 1.0 {
            return None;
        }
        value -= x.ln() + (1.0 - x).ln();
        grad[i] += -1.0 / x + 1.0 / (1.0 - x);
        if with_hess {
            add_h(&mut hess, i, i, 1.0 / (x * x) + 1.0 / ((1.0 - x) * (1.0 - x)));
        }
    }

    // Coupling terms: c = z - sum y + (l - 1) > 0.
    for (flat, contributors) in inst.unit_contributors.iter().enumerate() {
        let zi = na + flat;
        let c = v[zi] - contributors.iter().map(|&u| v[u]).sum::<f64>()
            + contributors.len() as f64
            - 1.0;
        if c <= 0.0 {
            return None;
        }
        value -= c.ln();
        let inv = 1.0 / c;
        grad[zi] -= inv;
        for &u in contributors {
            grad[u] += inv;
        }
        if with_hess {
            // Rank-one (grad c)(grad c)^T / c^2 over the small support.
            let mut support = Vec::with_capacity(contributors.len() + 1);
            support.push((zi, 1.0));
            for &u in contributors {
                support.push((u, -1.0));
            }
            let inv2 = inv * inv;
            for &(i, si) in &support {
                for &(j, sj) in &support {
                    add_h(&mut hess, i, j, si * sj * inv2);
                }
            }
        }
    }

    // Per-user norm terms: Q = tau^2 - sum_f s_f^2 > 0.
    let tau_sq = tau * tau;
    for u in 0..na {
        let mut sums = vec![0.0; inst.dimension];
        for (f, units) in inst.user_units[u].iter().enumerate() {
            for &j in units {
                sums[f] += inst.unit_weight[j] * v[na + j];
            }
        }
        let q = tau_sq - sums.iter().map(|s| s * s).sum::<f64>();
        if q <= 0.0 {
            return None;
        }
        value -= q.ln();
        let inv = 1.0 / q;
        // grad(-ln Q) = -grad Q / Q, grad Q = -2 sum_f s_f a_f.
        for (f, units) in inst.user_units[u].iter().enumerate() {
            let factor = 2.0 * sums[f] * inv;
            for &j in units {
                grad[na + j] += factor * inst.unit_weight[j];
            }
        }
        if with_hess {
            // (grad Q)(grad Q)^T / Q^2 + 2 sum_f a_f a_f^T / Q.
            let mut gq: Vec<(usize, f64)> = Vec::new();
            for (f, units) in inst.user_units[u].iter().enumerate() {
                for &j in units {
                    gq.push((na + j, -2.0 * sums[f] * inst.unit_weight[j]));
                }
            }
            let inv2 = inv * inv;
            for &(i, gi) in &gq {
                for &(j, gj) in &gq {
                    add_h(&mut hess, i, j, gi * gj * inv2);
                }
            }
            for units in &inst.user_units[u] {
                for &j in units {
                    for &k in units {
                        add_h(
                            &mut hess,
                            na + j,
                            na + k,
                            2.0 * inst.unit_weight[j] * inst.unit_weight[k] * inv,
                        );
                    }
                }
            }
        }
    }

    Some(BarrierEval { value, grad, hess })
}

fn center(inst: &Instance, tau: f64, t: f64, v: &mut Vec<f64>) -> Result<()> {
    let nv = v.len();
    for _ in 0..80 {
        let eval = eval_barrier(inst, tau, t, v, true)
            .ok_or(Error::SolverNonConvergence { gap: f64::NAN })?;
        let mut h = eval.hess;
        let mut dir = eval.grad.clone();
        for d in dir.iter_mut() {
            *d = -*d;
        }
        let step = if cholesky_solve_in_place(&mut h, &mut dir, nv) {
            dir
        } else {
            // Newton breakdown: fall back to a plain gradient step on the
            // same barrier.
            eval.grad.iter().map(|g| -g).collect()
        };
        let decrement: f64 = step
            .iter()
            .zip(&eval.grad)
            .map(|(s, g)| -s * g)
            .sum::<f64>();
        if decrement <= 2.0 * NEWTON_TOL {
            return Ok(());
        }
        // Backtracking line search keeping strict feasibility.
        let mut alpha = 1.0;
        let mut accepted = false;
        for _ in 0..70 {
            let trial: Vec<f64> = v
                .iter()
                .zip(&step)
                .map(|(x, s)| x + alpha * s)
                .collect();
            if let Some(te) = eval_barrier(inst, tau, t, &trial, false) {
                if te.value <= eval.value - 0.01 * alpha * decrement {
                    *v = trial;
                    accepted = true;
                    break;
                }
            }
            alpha *= 0.5;
        }
        if !accepted {
            // No progress possible at this centering accuracy.
            return Ok(());
        }
    }
    Ok(())
}

/// Dense Cholesky solve of H x = rhs in place; returns false if H is not
/// numerically positive definite even after a small ridge.
fn cholesky_solve_in_place(h: &mut [f64], rhs: &mut [f64], n: usize) -> bool {
    let mut ridge = 0.0;
    for attempt in 0..3 {
        if attempt > 0 {
            let trace: f64 = (0..n).map(|i| h[i * n + i]).sum();
            ridge = (trace / n as f64) * 1e-12 * 10f64.powi(attempt as i32 * 3) + 1e-12;
        }
        let mut l = h.to_vec();
        for i in 0..n {
            l[i * n + i] += ridge;
        }
        if cholesky_factor(&mut l, n) {
            // Solve L y = rhs, then L^T x = y.
            let mut x = rhs.to_vec();
            for i in 0..n {
                let mut acc = x[i];
                for k in 0..i {
                    acc -= l[i * n + k] * x[k];
                }
                x[i] = acc / l[i * n + i];
            }
            for i in (0..n).rev() {
                let mut acc = x[i];
                for k in i + 1..n {
                    acc -= l[k * n + i] * x[k];
                }
                x[i] = acc / l[i * n + i];
            }
            rhs.copy_from_slice(&x);
            return true;
        }
    }
    false
}

fn cholesky_factor(a: &mut [f64], n: usize) -> bool {
    for j in 0..n {
        let mut diag = a[j * n + j];
        for k in 0..j {
            diag -= a[j * n + k] * a[j * n + k];
        }
        if diag <= 0.0 || !diag.is_finite() {
            return false;
        }
        let diag = diag.sqrt();
        a[j * n + j] = diag;
        for i in j + 1..n {
            let mut v = a[i * n + j];
            for k in 0..j {
                v -= a[i * n + k] * a[j * n + k];
            }
            a[i * n + j] = v / diag;
        }
    }
    true
}
