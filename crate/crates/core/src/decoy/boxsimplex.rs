//! Bounded-variable dual simplex over row-activity variables.
//!
//! Every constraint `a · x REL b` is rewritten as `a · x − z = 0` with
//! the activity z boxed to [b, b] tightened or relaxed per the relation,
//! so the right-hand side of every equality is an exact zero and the
//! starting basis (all activities) is the identity. That start is dual
//! feasible outright: structural variables sit at the bound matching the
//! sign of their cost. The dual simplex then walks primal infeasibilities
//! out of the activity boxes.
//!
//! The basis stays as small as the number of rows (a few dozen here), so
//! every iteration affords a fresh factorization of the basis matrix;
//! nothing is incrementally updated and roundoff has nowhere to pile up.
//! That, plus implicit variable bounds instead of explicit bound rows, is
//! what keeps this stable where a dense primal tableau loses the polytope.

#[derive(Debug, Clone, Copy, PartialEq)]
pub(crate) struct VarBox {
    pub lo: f64,
    pub hi: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) enum BoxStatus {
    Optimal,
    Infeasible,
}

pub(crate) struct BoxOutcome {
    pub status: BoxStatus,
    /// Values of the structural variables; meaningful only when optimal.
    pub x: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Position {
    Basic(usize),
    AtLower,
    AtUpper,
}

const PRIMAL_TOL: f64 = 1e-11;
const PIVOT_TOL: f64 = 1e-12;
const MAX_ITERATIONS: usize = 50_000;

/// Minimize `cost · x` over structural variables with boxes `var_bounds`,
/// subject to `rows[i].0 · x` lying in the activity box `rows[i].1`.
/// Boxes may be half-infinite on the activity side.
pub(crate) fn minimize_boxed(
    cost: &[f64],
    rows: &[(Vec<f64>, VarBox)],
    var_bounds: &[VarBox],
) -> BoxOutcome {
    let n = cost.len();
    let m = rows.len();
    let total = n + m;

    // Full column j of [A | -I].
    let column = |j: usize, i: usize| -> f64 {
        if j < n {
            rows[i].0[j]
        } else if j - n == i {
            -1.0
        } else {
            0.0
        }
    };
    let full_cost = |j: usize| -> f64 { if j < n { cost[j] } else { 0.0 } };
    let bounds = |j: usize| -> VarBox {
        if j < n {
            var_bounds[j]
        } else {
            rows[j - n].1
        }
    };

    // Activities start basic; structurals start at the cost-favoring bound.
    let mut position: Vec<Position> = (0..total)
        .map(|j| {
            if j >= n {
                Position::Basic(j - n)
            } else if cost[j] < 0.0 {
                Position::AtUpper
            } else {
                Position::AtLower
            }
        })
        .collect();
    let mut basis: Vec<usize> = (0..m).map(|i| n + i).collect();

    let nonbasic_value = |j: usize, position: &[Position]| -> f64 {
        match position[j] {
            Position::AtLower => bounds(j).lo,
            Position::AtUpper => bounds(j).hi,
            Position::Basic(_) => unreachable!("basic variable has no bound value"),
        }
    };

    let mut x_basic = vec![0.0; m];
    for _ in 0..MAX_ITERATIONS {
        // Fresh basis matrix and basic values: B x_B = -N x_N.
        let b_matrix: Vec<Vec<f64>> = (0..m)
            .map(|i| basis.iter().map(|&j| column(j, i)).collect())
            .collect();
        let mut rhs = vec![0.0; m];
        for j in 0..total {
            if !matches!(position[j], Position::Basic(_)) {
                let v = nonbasic_value(j, &position);
                if v != 0.0 {
                    for (i, r) in rhs.iter_mut().enumerate() {
                        *r -= column(j, i) * v;
                    }
                }
            }
        }
        let Some(solved) = solve_refined(&b_matrix, &rhs) else {
            return BoxOutcome {
                status: BoxStatus::Infeasible,
                x: Vec::new(),
            };
        };
        x_basic.copy_from_slice(&solved);

        // Most-violated basic variable leaves.
        let mut leaving: Option<(usize, f64, bool)> = None; // (row, violation, below)
        for (i, &bj) in basis.iter().enumerate() {
            let vbox = bounds(bj);
            let v = x_basic[i];
            let scale = 1.0 + v.abs().max(vbox.lo.abs().min(vbox.hi.abs()));
            if v < vbox.lo - PRIMAL_TOL * scale {
                let viol = vbox.lo - v;
                if leaving.map_or(true, |(_, w, _)| viol > w) {
                    leaving = Some((i, viol, true));
                }
            } else if v > vbox.hi + PRIMAL_TOL * scale {
                let viol = v - vbox.hi;
                if leaving.map_or(true, |(_, w, _)| viol > w) {
                    leaving = Some((i, viol, false));
                }
            }
        }
        let Some((leave_row, _, below)) = leaving else {
            // Primal feasible. The ratio test keeps dual feasibility up
            // to skipped micro-pivots, so sweep the reduced costs once
            // and bound-flip any stragglers; a flip leaves the basis (and
            // hence every reduced cost) unchanged, so this terminates.
            let c_basic: Vec<f64> = basis.iter().map(|&j| full_cost(j)).collect();
            let bt_matrix: Vec<Vec<f64>> = (0..m)
                .map(|i| (0..m).map(|k| b_matrix[k][i]).collect())
                .collect();
            let Some(pi) = solve_refined(&bt_matrix, &c_basic) else {
                return BoxOutcome {
                    status: BoxStatus::Infeasible,
                    x: Vec::new(),
                };
            };
            let mut flipped = false;
            for j in 0..total {
                let reduced: f64 =
                    full_cost(j) - (0..m).map(|i| pi[i] * column(j, i)).sum::<f64>();
                let tol = 1e-12 * (1.0 + reduced.abs());
                match position[j] {
                    Position::AtLower if reduced < -tol => {
                        if bounds(j).hi.is_finite() {
                            position[j] = Position::AtUpper;
                            flipped = true;
                        }
                    }
                    Position::AtUpper if reduced > tol => {
                        if bounds(j).lo.is_finite() {
                            position[j] = Position::AtLower;
                            flipped = true;
                        }
                    }
                    _ => {}
                }
            }
            if flipped {
                continue;
            }
            let mut x = vec![0.0; n];
            for j in 0..n {
                x[j] = match position[j] {
                    Position::Basic(i) => x_basic[i],
                    Position::AtLower => bounds(j).lo,
                    Position::AtUpper => bounds(j).hi,
                };
            }
            return BoxOutcome {
                status: BoxStatus::Optimal,
                x,
            };
        };

        // Dual multipliers and the leaving row of B^-1 A.
        let c_basic: Vec<f64> = basis.iter().map(|&j| full_cost(j)).collect();
        let bt_matrix: Vec<Vec<f64>> = (0..m)
            .map(|i| (0..m).map(|k| b_matrix[k][i]).collect())
            .collect();
        let Some(pi) = solve_refined(&bt_matrix, &c_basic) else {
            return BoxOutcome {
                status: BoxStatus::Infeasible,
                x: Vec::new(),
            };
        };
        let mut unit = vec![0.0; m];
        unit[leave_row] = 1.0;
        let Some(rho_mult) = solve_refined(&bt_matrix, &unit) else {
            return BoxOutcome {
                status: BoxStatus::Infeasible,
                x: Vec::new(),
            };
        };

        // Entering variable: dual ratio test among candidates that move
        // the leaving basic toward its violated bound.
        let mut entering: Option<(usize, f64)> = None;
        for j in 0..total {
            let movable_up = matches!(position[j], Position::AtLower);
            let movable_down = matches!(position[j], Position::AtUpper);
            if !movable_up && !movable_down {
                continue;
            }
            let rho_j: f64 = (0..m).map(|i| rho_mult[i] * column(j, i)).sum();
            if rho_j.abs() <= PIVOT_TOL {
                continue;
            }
            // Raising x_j from its lower bound changes x_B(leave_row) by
            // -rho_j per unit; lowering from the upper bound by +rho_j.
            let helps = if below {
                (movable_up && rho_j < 0.0) || (movable_down && rho_j > 0.0)
            } else {
                (movable_up && rho_j > 0.0) || (movable_down && rho_j < 0.0)
            };
            if !helps {
                continue;
            }
            let reduced: f64 = full_cost(j) - (0..m).map(|i| pi[i] * column(j, i)).sum::<f64>();
            let ratio = reduced.abs() / rho_j.abs();
            let better = match entering {
                None => true,
                Some((best_j, best_ratio)) => {
                    ratio < best_ratio * (1.0 - 1e-12)
                        || ((ratio - best_ratio).abs() <= 1e-12 * best_ratio.max(1e-300)
                            && j < best_j)
                }
            };
            if better {
                entering = Some((j, ratio));
            }
        }
        let Some((enter_col, _)) = entering else {
            // No direction can repair the violated row.
            return BoxOutcome {
                status: BoxStatus::Infeasible,
                x: Vec::new(),
            };
        };

        // Swap: the leaving variable rests on its violated bound.
        let leave_var = basis[leave_row];
        position[leave_var] = if below {
            Position::AtLower
        } else {
            Position::AtUpper
        };
        position[enter_col] = Position::Basic(leave_row);
        basis[leave_row] = enter_col;
    }

    // Iteration cap: treat as a numerical failure.
    BoxOutcome {
        status: BoxStatus::Infeasible,
        x: Vec::new(),
    }
}

/// Partial-pivot solve with one residual-correction pass.
fn solve_refined(matrix: &[Vec<f64>], rhs: &[f64]) -> Option<Vec<f64>> {
    let mut x = gaussian_solve(matrix, rhs)?;
    let m = rhs.len();
    let mut residual = vec![0.0; m];
    for i in 0..m {
        let ax: f64 = matrix[i].iter().zip(&x).map(|(a, v)| a * v).sum();
        residual[i] = rhs[i] - ax;
    }
    if let Some(delta) = gaussian_solve(matrix, &residual) {
        for (xi, d) in x.iter_mut().zip(&delta) {
            *xi += d;
        }
    }
    x.iter().all(|v| v.is_finite()).then_some(x)
}

fn gaussian_solve(matrix: &[Vec<f64>], rhs: &[f64]) -> Option<Vec<f64>> {
    let m = rhs.len();
    let mut a = vec![vec![0.0; m + 1]; m];
    for i in 0..m {
        a[i][..m].copy_from_slice(&matrix[i]);
        a[i][m] = rhs[i];
    }
    for col in 0..m {
        let pivot = (col..m).max_by(|&i, &j| {
            a[i][col]
                .abs()
                .partial_cmp(&a[j][col].abs())
                .expect("finite entries")
        })?;
        if a[pivot][col].abs() < 1e-14 {
            return None;
        }
        a.swap(col, pivot);
        let inv = 1.0 / a[col][col];
        for j in col..=m {
            a[col][j] *= inv;
        }
        for i in 0..m {
            if i != col && a[i][col] != 0.0 {
                let f = a[i][col];
                for j in col..=m {
                    a[i][j] -= f * a[col][j];
                }
            }
        }
    }
    Some((0..m).map(|i| a[i][m]).collect())
}
