//! Passive decoy-state analysis.
//!
//! Every herald class is a free decoy source: its photon-number
//! distribution differs, yet all classes share one set of channel yields
//! Y_{m,k} and error products Y_{m,k} e_{m,k}. Two linear programs over
//! those shared unknowns, constrained by the observed gain of each of the
//! 16 classes, certify a lower bound on the single-photon gain of a
//! target class and an upper bound on its single-photon error rate.

mod boxsimplex;

use crate::channel::ClassStats;
use crate::source::{FockGrid, HeraldClass, SignalDistribution};
use boxsimplex::{minimize_boxed, BoxStatus, VarBox};
use std::io::{self, Write};
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum DecoyError {
    #[error("linear program is malformed: {0}")]
    Malformed(String),
    #[error("distributions disagree on truncation order: {0} vs {1}")]
    TruncationMismatch(usize, usize),
    #[error("expected the 16 herald classes in index order")]
    ClassOrder,
    #[error("optimum failed certification: residual {residual:.3e} on constraint {index}")]
    Certification { index: usize, residual: f64 },
}

/// Optimization sense.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Sense {
    Minimize,
    Maximize,
}

/// Constraint relation.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Rel {
    Le,
    Ge,
}

/// One linear constraint `coeffs · x REL bound`.
#[derive(Debug, Clone, PartialEq)]
pub struct Constraint {
    pub coeffs: Vec<f64>,
    pub rel: Rel,
    pub bound: f64,
}

/// A small dense linear program over box-bounded variables.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearProgram {
    pub objective: Vec<f64>,
    pub sense: Sense,
    pub constraints: Vec<Constraint>,
    /// Per-variable [lo, hi] with 0 <= lo <= hi <= 1; the decision
    /// variables are probabilities or probability products.
    pub variable_bounds: Vec<(f64, f64)>,
    pub names: Vec<String>,
}

impl LinearProgram {
    fn validate(&self) -> Result<(), DecoyError> {
        let n = self.objective.len();
        if self.variable_bounds.len() != n || self.names.len() != n {
            return Err(DecoyError::Malformed(format!(
                "objective has {n} coefficients but {} bounds and {} names",
                self.variable_bounds.len(),
                self.names.len()
            )));
        }
        for (j, &(lo, hi)) in self.variable_bounds.iter().enumerate() {
            if !(0.0 <= lo && lo <= hi && hi <= 1.0) {
                return Err(DecoyError::Malformed(format!(
                    "variable {} has bounds [{lo}, {hi}] outside [0, 1]",
                    self.names[j]
                )));
            }
        }
        for (i, c) in self.constraints.iter().enumerate() {
            if c.coeffs.len() != n {
                return Err(DecoyError::Malformed(format!(
                    "constraint {i} has {} coefficients, expected {n}",
                    c.coeffs.len()
                )));
            }
        }
        Ok(())
    }

    /// Plain-text dump, one line per constraint plus objective and bounds.
    pub fn write_text(&self, w: &mut impl Write) -> io::Result<()> {
        let sense = match self.sense {
            Sense::Minimize => "minimize",
            Sense::Maximize => "maximize",
        };
        writeln!(w, "{sense} {}", self.render_row(&self.objective))?;
        for c in &self.constraints {
            let rel = match c.rel {
                Rel::Le => "<=",
                Rel::Ge => ">=",
            };
            writeln!(w, "{} {rel} {:e}", self.render_row(&c.coeffs), c.bound)?;
        }
        for (j, &(lo, hi)) in self.variable_bounds.iter().enumerate() {
            writeln!(w, "{:e} <= {} <= {:e}", lo, self.names[j], hi)?;
        }
        Ok(())
    }

    fn render_row(&self, coeffs: &[f64]) -> String {
        let terms: Vec<String> = coeffs
            .iter()
            .zip(&self.names)
            .filter(|(c, _)| **c != 0.0)
            .map(|(c, name)| format!("{c:e}*{name}"))
            .collect();
        if terms.is_empty() {
            "0".to_string()
        } else {
            terms.join(" + ")
        }
    }
}

/// Solver verdict.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SolveStatus {
    Optimal,
    Infeasible,
    Unbounded,
}

/// A certified optimum.
#[derive(Debug, Clone, PartialEq)]
pub struct Solution {
    pub status: SolveStatus,
    pub value: f64,
    pub x: Vec<f64>,
}

enum MergedKind {
    Le,
    Ge,
    /// Equality `coeffs . x + sigma = bound` with sigma in [0, width].
    Band { width: f64 },
}

struct MergedRow {
    coeffs: Vec<f64>,
    kind: MergedKind,
    bound: f64,
}

struct MergedSystem {
    rows: Vec<MergedRow>,
}

/// Find <= / >= pairs sharing one coefficient vector (bitwise) and turn
/// each into a band row. Everything else passes through untouched, in
/// the original order, so the result is deterministic.
fn merge_band_pairs(constraints: &[Constraint]) -> MergedSystem {
    use std::collections::HashMap;
    let key = |coeffs: &[f64]| -> Vec<u64> { coeffs.iter().map(|a| a.to_bits()).collect() };

    let mut groups: HashMap<Vec<u64>, Vec<usize>> = HashMap::new();
    for (i, c) in constraints.iter().enumerate() {
        groups.entry(key(&c.coeffs)).or_default().push(i);
    }

    // partner[i] = j marks a mergeable (Le i, Ge j) pair.
    let mut partner = vec![usize::MAX; constraints.len()];
    let mut skip = vec![false; constraints.len()];
    for indices in groups.values() {
        if indices.len() != 2 {
            continue;
        }
        let (a, b) = (indices[0], indices[1]);
        let (le, ge) = match (constraints[a].rel, constraints[b].rel) {
            (Rel::Le, Rel::Ge) => (a, b),
            (Rel::Ge, Rel::Le) => (b, a),
            _ => continue,
        };
        let width = constraints[le].bound - constraints[ge].bound;
        if width >= 0.0 {
            partner[le] = ge;
            skip[ge] = true;
        }
    }

    let mut rows = Vec::with_capacity(constraints.len());
    for (i, c) in constraints.iter().enumerate() {
        if skip[i] {
            continue;
        }
        if partner[i] != usize::MAX {
            let width = c.bound - constraints[partner[i]].bound;
            rows.push(MergedRow {
                coeffs: c.coeffs.clone(),
                kind: MergedKind::Band { width },
                bound: c.bound,
            });
        } else {
            rows.push(MergedRow {
                coeffs: c.coeffs.clone(),
                kind: match c.rel {
                    Rel::Le => MergedKind::Le,
                    Rel::Ge => MergedKind::Ge,
                },
                bound: c.bound,
            });
        }
    }
    MergedSystem { rows }
}

/// Solve a box-bounded linear program with the bounded-variable dual
/// simplex.
///
/// Each constraint is turned into a boxed row-activity variable, with
/// matched <= / >= pairs over one coefficient vector becoming a single
/// two-sided band. Columns are equilibrated first; photon-number
/// distributions give the (m, k) column a natural scale of
/// lambda^(m+k), which would otherwise leave the ratio tests hopelessly
/// lopsided. The optimum is recomputed from the unscaled data and its
/// primal feasibility residual is certified to 1e-9.
pub fn solve(lp: &LinearProgram) -> Result<Solution, DecoyError> {
    lp.validate()?;
    let n = lp.objective.len();

    let merged = merge_band_pairs(&lp.constraints);

    let mut col_scale = vec![0.0f64; n];
    for c in &lp.constraints {
        for (s, a) in col_scale.iter_mut().zip(&c.coeffs) {
            *s = s.max(a.abs());
        }
    }
    for s in col_scale.iter_mut() {
        if *s == 0.0 {
            *s = 1.0;
        }
    }

    let mut rows: Vec<(Vec<f64>, VarBox)> = Vec::with_capacity(merged.rows.len());
    for row in &merged.rows {
        // A row with no live coefficients is a pure feasibility check.
        if row.coeffs.iter().all(|a| *a == 0.0) {
            let feasible = match row.kind {
                MergedKind::Le => row.bound >= 0.0,
                MergedKind::Ge => row.bound <= 0.0,
                MergedKind::Band { width } => row.bound >= 0.0 && row.bound <= width.max(0.0),
            };
            if !feasible {
                return Ok(Solution {
                    status: SolveStatus::Infeasible,
                    value: f64::NAN,
                    x: Vec::new(),
                });
            }
            continue;
        }
        let mut coeffs: Vec<f64> = row
            .coeffs
            .iter()
            .zip(&col_scale)
            .map(|(a, s)| a / s)
            .collect();
        let scale = coeffs.iter().fold(0.0f64, |acc, a| acc.max(a.abs()));
        for a in coeffs.iter_mut() {
            *a /= scale;
        }
        let bound = row.bound / scale;
        let activity = match row.kind {
            MergedKind::Le => VarBox {
                lo: f64::NEG_INFINITY,
                hi: bound,
            },
            MergedKind::Ge => VarBox {
                lo: bound,
                hi: f64::INFINITY,
            },
            MergedKind::Band { width } => VarBox {
                lo: bound - width / scale,
                hi: bound,
            },
        };
        rows.push((coeffs, activity));
    }

    // Structural boxes in scaled units u' = col_scale * u.
    let var_boxes: Vec<VarBox> = lp
        .variable_bounds
        .iter()
        .zip(&col_scale)
        .map(|(&(lo, hi), &s)| VarBox {
            lo: s * lo,
            hi: s * hi,
        })
        .collect();
    let cost: Vec<f64> = match lp.sense {
        Sense::Minimize => lp.objective.iter().zip(&col_scale).map(|(c, s)| c / s).collect(),
        Sense::Maximize => lp.objective.iter().zip(&col_scale).map(|(c, s)| -c / s).collect(),
    };

    let outcome = minimize_boxed(&cost, &rows, &var_boxes);
    if outcome.status == BoxStatus::Infeasible {
        return Ok(Solution {
            status: SolveStatus::Infeasible,
            value: f64::NAN,
            x: Vec::new(),
        });
    }

    // Undo the scaling, clamping roundoff into the box.
    let x: Vec<f64> = outcome
        .x
        .iter()
        .zip(&col_scale)
        .zip(lp.variable_bounds.iter())
        .map(|((&u, &s), &(lo, hi))| (u / s).clamp(lo, hi))
        .collect();

    for (index, c) in lp.constraints.iter().enumerate() {
        let lhs: f64 = c.coeffs.iter().zip(&x).map(|(a, v)| a * v).sum();
        let residual = match c.rel {
            Rel::Le => lhs - c.bound,
            Rel::Ge => c.bound - lhs,
        };
        if residual > 1e-9 * c.bound.abs().max(1.0) {
            return Err(DecoyError::Certification { index, residual });
        }
    }

    let value = lp.objective.iter().zip(&x).map(|(c, v)| c * v).sum();
    Ok(Solution {
        status: SolveStatus::Optimal,
        value,
        x,
    })
}

fn check_inputs(
    dists: &[SignalDistribution],
    stats: &[ClassStats],
) -> Result<FockGrid, DecoyError> {
    if dists.len() != 16 || stats.len() != 16 {
        return Err(DecoyError::ClassOrder);
    }
    let n_cut = dists[0].n_cut();
    for (d, class) in dists.iter().zip(HeraldClass::all()) {
        if d.class() != class {
            return Err(DecoyError::ClassOrder);
        }
        if d.n_cut() != n_cut {
            return Err(DecoyError::TruncationMismatch(n_cut, d.n_cut()));
        }
    }
    Ok(FockGrid::new(n_cut))
}

fn constraint_rows(
    dists: &[SignalDistribution],
    bounds: impl Fn(usize) -> f64,
) -> Vec<Constraint> {
    let mut constraints = Vec::with_capacity(32);
    for (i, dist) in dists.iter().enumerate() {
        let coeffs = dist.entries().to_vec();
        let observed = bounds(i);
        // The class's truncated mass caps what the dropped sectors can
        // contribute, so the observation brackets the truncated sum.
        let slack = dist.tail();
        constraints.push(Constraint {
            coeffs: coeffs.clone(),
            rel: Rel::Le,
            bound: observed,
        });
        constraints.push(Constraint {
            coeffs,
            rel: Rel::Ge,
            bound: observed - slack,
        });
    }
    constraints
}

fn grid_names(grid: &FockGrid, prefix: &str) -> Vec<String> {
    grid.iter().map(|(m, k)| format!("{prefix}_{m}_{k}")).collect()
}

fn two_term_objective(grid: &FockGrid, target: &SignalDistribution) -> Vec<f64> {
    let mut objective = vec![0.0; grid.len()];
    objective[grid.index(1, 0)] = target.prob(1, 0);
    objective[grid.index(0, 1)] = target.prob(0, 1);
    objective
}

/// Linear program whose minimum bounds the target class's single-photon
/// gain from below. Variables are the yields Y_{m,k}; each class
/// contributes a two-sided gain constraint.
pub fn build_yield_lp(
    dists: &[SignalDistribution],
    stats: &[ClassStats],
    target_class: HeraldClass,
) -> Result<LinearProgram, DecoyError> {
    let grid = check_inputs(dists, stats)?;
    Ok(LinearProgram {
        objective: two_term_objective(&grid, &dists[target_class.index()]),
        sense: Sense::Minimize,
        constraints: constraint_rows(dists, |i| stats[i].gain),
        variable_bounds: vec![(0.0, 1.0); grid.len()],
        names: grid_names(&grid, "Y"),
    })
}

/// Linear program whose maximum bounds the target class's single-photon
/// error product from above. Variables are the products
/// W_{m,k} = Y_{m,k} e_{m,k}, constrained by the observed Q_x E_x.
pub fn build_error_lp(
    dists: &[SignalDistribution],
    stats: &[ClassStats],
    target_class: HeraldClass,
) -> Result<LinearProgram, DecoyError> {
    let grid = check_inputs(dists, stats)?;
    Ok(LinearProgram {
        objective: two_term_objective(&grid, &dists[target_class.index()]),
        sense: Sense::Maximize,
        constraints: constraint_rows(dists, |i| stats[i].error_gain()),
        variable_bounds: vec![(0.0, 1.0); grid.len()],
        names: grid_names(&grid, "W"),
    })
}

/// Certified decoy-state bounds for one target class.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DecoyBounds {
    /// Lower bound on P_x(1,0) Y_{1,0} + P_x(0,1) Y_{0,1}.
    pub p1y1_lower: f64,
    /// Upper bound on P_x(1,0) Y_{1,0} e_{1,0} + P_x(0,1) Y_{0,1} e_{0,1}.
    pub e1y1p1_upper: f64,
    /// Upper bound on the single-photon error rate, the ratio of the two
    /// optima (0 when the gain bound vanishes, capped at 1).
    pub e1_upper: f64,
    pub status: SolveStatus,
}

/// Run both decoy programs for a target class.
pub fn single_photon_bounds(
    dists: &[SignalDistribution],
    stats: &[ClassStats],
    target_class: HeraldClass,
) -> Result<DecoyBounds, DecoyError> {
    let yield_solution = solve(&build_yield_lp(dists, stats, target_class)?)?;
    let error_solution = solve(&build_error_lp(dists, stats, target_class)?)?;

    // Box-bounded variables rule unboundedness out by construction.
    debug_assert_ne!(yield_solution.status, SolveStatus::Unbounded);
    debug_assert_ne!(error_solution.status, SolveStatus::Unbounded);

    let status = match (yield_solution.status, error_solution.status) {
        (SolveStatus::Optimal, SolveStatus::Optimal) => SolveStatus::Optimal,
        (SolveStatus::Unbounded, _) | (_, SolveStatus::Unbounded) => SolveStatus::Unbounded,
        _ => SolveStatus::Infeasible,
    };
    if status != SolveStatus::Optimal {
        return Ok(DecoyBounds {
            p1y1_lower: 0.0,
            e1y1p1_upper: 0.0,
            e1_upper: 0.0,
            status,
        });
    }

    let p1y1_lower = yield_solution.value.max(0.0);
    let e1y1p1_upper = error_solution.value.max(0.0);
    let e1_upper = if p1y1_lower > 0.0 {
        (e1y1p1_upper / p1y1_lower).min(1.0)
    } else {
        0.0
    };
    Ok(DecoyBounds {
        p1y1_lower,
        e1y1p1_upper,
        e1_upper,
        status,
    })
}
