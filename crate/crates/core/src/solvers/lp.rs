//! Primal simplex for packing LPs with box-bounded variables.
//!
//! Solves  max c.x  subject to  A x <= b,  0 <= x <= u  with b >= 0, which is
//! exactly the shape of the truncation program (one capacity row per user,
//! one box per unit). Upper bounds are handled implicitly (nonbasic variables
//! may sit at either bound and bound flips avoid pivots), with slacks giving
//! the trivial starting basis. Dantzig pricing with a permanent switch to
//! Bland's rule if the iteration count suggests cycling.

use crate::error::{Error, Result};

#[derive(Debug, Clone)]
pub struct BoundedLp {
    pub objective: Vec<f64>,
    /// Sparse rows: (variable index, coefficient).
    pub rows: Vec<Vec<(usize, f64)>>,
    /// Right-hand sides, all non-negative.
    pub rhs: Vec<f64>,
    /// Per-variable upper bounds.
    pub upper: Vec<f64>,
}

#[derive(Debug, Clone)]
pub struct LpSolution {
    pub x: Vec<f64>,
    pub objective: f64,
    pub iterations: usize,
}

#[derive(Clone, Copy, PartialEq)]
enum VarState {
    Basic(usize),
    AtLower,
    AtUpper,
}

const COST_TOL: f64 = 1e-9;
const PIVOT_TOL: f64 = 1e-10;

pub fn solve_bounded_lp(lp: &BoundedLp) -> Result<LpSolution> {
    let n = lp.objective.len();
    let m = lp.rows.len();
    debug_assert_eq!(lp.rhs.len(), m);
    debug_assert_eq!(lp.upper.len(), n);
    debug_assert!(lp.rhs.iter().all(|&b| b >= 0.0));

    if m == 0 {
        // Only box constraints: every variable goes to whichever bound pays.
        let x: Vec<f64> = lp
            .objective
            .iter()
            .zip(&lp.upper)
            .map(|(&c, &u)| if c > 0.0 { u } else { 0.0 })
            .collect();
        let objective = x.iter().zip(&lp.objective).map(|(a, b)| a * b).sum();
        return Ok(LpSolution {
            x,
            objective,
            iterations: 0,
        });
    }

    // Sparse columns over structural variables; slack j has implicit column e_{j-n}.
    let total = n + m;
    let mut cols: Vec<Vec<(usize, f64)>> = vec![Vec::new(); n];
    for (i, row) in lp.rows.iter().enumerate() {
        for &(j, coef) in row {
            cols[j].push((i, coef));
        }
    }
    let upper = |j: usize| if j < n { lp.upper[j] } else { f64::INFINITY };
    let cost = |j: usize| if j < n { lp.objective[j] } else { 0.0 };

    let mut state: Vec<VarState> = vec![VarState::AtLower; total];
    let mut basis: Vec<usize> = (n..total).collect();
    for (row, &var) in basis.iter().enumerate() {
        state[var] = VarState::Basic(row);
    }
    let mut binv: Vec<Vec<f64>> = (0..m)
        .map(|i| {
            let mut row = vec![0.0; m];
            row[i] = 1.0;
            row
        })
        .collect();
    let mut x_basic: Vec<f64> = lp.rhs.clone();

    let max_iter = 10_000 + 50 * total;
    let bland_after = 2 * total + 200;
    let mut y = vec![0.0; m];
    let mut w = vec![0.0; m];

    for iter in 0..max_iter {
        // Simplex multipliers y = c_B B^{-1}.
        for i in 0..m {
            let mut acc = 0.0;
            for (r, &var) in basis.iter().enumerate() {
                let c = cost(var);
                if c != 0.0 {
                    acc += c * binv[r][i];
                }
            }
            y[i] = acc;
        }

        // Price nonbasic columns.
        let reduced = |j: usize| -> f64 {
            let mut d = cost(j);
            if j < n {
                for &(i, coef) in &cols[j] {
                    d -= y[i] * coef;
                }
            } else {
                d -= y[j - n];
            }
            d
        };
        let bland = iter > bland_after;
        let mut entering: Option<(usize, f64, bool)> = None; // (var, |d|, from_lower)
        for j in 0..total {
            let (violates, from_lower, score) = match state[j] {
                VarState::Basic(_) => continue,
                VarState::AtLower => {
                    let d = reduced(j);
                    (d > COST_TOL, true, d)
                }
                VarState::AtUpper => {
                    let d = reduced(j);
                    (d < -COST_TOL, false, -d)
                }
            };
            if violates {
                if bland {
                    entering = Some((j, score, from_lower));
                    break;
                }
                if entering.map_or(true, |(_, best, _)| score > best) {
                    entering = Some((j, score, from_lower));
                }
            }
        }
        let Some((j_in, _, from_lower)) = entering else {
            return Ok(extract(lp, n, m, &basis, &state, &binv, iter));
        };

        // Direction w = B^{-1} A_j; the entering variable moves by t >= 0
        // away from its bound, and basic values change by -s w t.
        for wi in w.iter_mut() {
            *wi = 0.0;
        }
        if j_in < n {
            for &(r, coef) in &cols[j_in] {
                for i in 0..m {
                    w[i] += binv[i][r] * coef;
                }
            }
        } else {
            let r = j_in - n;
            for i in 0..m {
                w[i] = binv[i][r];
            }
        }
        let s = if from_lower { 1.0 } else { -1.0 };

        // Ratio test: first limit wins; ties prefer the smallest basis var.
        let mut t_star = upper(j_in); // bound flip distance
        let mut leaving: Option<(usize, bool)> = None; // (row, leaves_to_upper)
        for i in 0..m {
            let g = s * w[i];
            let var = basis[i];
            if g > PIVOT_TOL {
                let t = x_basic[i].max(0.0) / g;
                if t < t_star - 1e-12
                    || (t < t_star + 1e-12
                        && leaving.map_or(false, |(r, _)| basis[r] > var))
                {
                    t_star = t;
                    leaving = Some((i, false));
                }
            } else if g < -PIVOT_TOL {
                let ub = upper(var);
                if ub.is_finite() {
                    let t = (ub - x_basic[i]).max(0.0) / -g;
                    if t < t_star - 1e-12
                        || (t < t_star + 1e-12
                            && leaving.map_or(false, |(r, _)| basis[r] > var))
                    {
                        t_star = t;
                        leaving = Some((i, true));
                    }
                }
            }
        }
        if !t_star.is_finite() {
            return Err(Error::SolverFailure {
                iterations: iter,
                detail: "unbounded direction in a packing LP".into(),
            });
        }

        match leaving {
            None => {
                // Bound flip: entering runs all the way to its other bound.
                for i in 0..m {
                    x_basic[i] -= s * w[i] * t_star;
                }
                state[j_in] = if from_lower {
                    VarState::AtUpper
                } else {
                    VarState::AtLower
                };
            }
            Some((r, to_upper)) => {
                for i in 0..m {
                    x_basic[i] -= s * w[i] * t_star;
                }
                let j_out = basis[r];
                state[j_out] = if to_upper {
                    VarState::AtUpper
                } else {
                    VarState::AtLower
                };
                x_basic[r] = if from_lower {
                    t_star
                } else {
                    upper(j_in) - t_star
                };
                basis[r] = j_in;
                state[j_in] = VarState::Basic(r);
                // Eta update of B^{-1}.
                let pivot = w[r];
                if pivot.abs() < PIVOT_TOL {
                    return Err(Error::SolverFailure {
                        iterations: iter,
                        detail: format!("degenerate pivot {pivot}"),
                    });
                }
                let inv = 1.0 / pivot;
                for k in 0..m {
                    binv[r][k] *= inv;
                }
                for i in 0..m {
                    if i != r {
                        let factor = w[i];
                        if factor != 0.0 {
                            for k in 0..m {
                                binv[i][k] -= factor * binv[r][k];
                            }
                        }
                    }
                }
            }
        }
    }
    Err(Error::SolverFailure {
        iterations: max_iter,
        detail: "iteration limit reached".into(),
    })
}

/// Recomputes basic values from scratch (drops accumulated pivot error) and
/// assembles the solution vector.
fn extract(
    lp: &BoundedLp,
    n: usize,
    m: usize,
    basis: &[usize],
    state: &[VarState],
    binv: &[Vec<f64>],
    iterations: usize,
) -> LpSolution {
    let mut rhs_eff = lp.rhs.to_vec();
    let mut x = vec![0.0; n];
    for j in 0..n {
        if state[j] == VarState::AtUpper {
            x[j] = lp.upper[j];
            for (i, row) in lp.rows.iter().enumerate() {
                for &(col, coef) in row {
                    if col == j {
                        rhs_eff[i] -= coef * lp.upper[j];
                    }
                }
            }
        }
    }
    for (r, &var) in basis.iter().enumerate() {
        if var < n {
            let mut value = 0.0;
            for i in 0..m {
                value += binv[r][i] * rhs_eff[i];
            }
            x[var] = value.clamp(0.0, lp.upper[var]);
        }
    }
    let objective = x.iter().zip(&lp.objective).map(|(a, b)| a * b).sum();
    LpSolution {
        x,
        objective,
        iterations,
    }
}
