//! Dense two-phase primal simplex.
//!
//! Problems are stated as
//!
//! ```text
//! maximize    c . x
//! subject to  E x  = e
//!             G x <= g
//!             l <= x <= u,   l >= 0
//! ```
//!
//! Lower bounds are shifted out, finite upper bounds become extra `<=` rows
//! and fixed variables are substituted. Phase 1 minimises the sum of
//! artificials; phase 2 optimises the real objective over the feasible basis.
//! Both phases share one tableau so that row duals can be read off the
//! reduced costs of each row's initial identity column.

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LpError {
    #[error("LP dimension mismatch: {0}")]
    Dimension(String),

    #[error("invalid variable bounds for x{index}: [{lower}, {upper}]")]
    Bounds {
        index: usize,
        lower: f64,
        upper: f64,
    },

    #[error("simplex stalled after {iterations} pivots")]
    Stalled { iterations: usize },
}

/// One linear row `coefficients . x (= or <=) rhs`.
#[derive(Debug, Clone, PartialEq)]
pub struct LpRow {
    pub coefficients: Vec<f64>,
    pub rhs: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LpProblem {
    /// Maximised.
    pub objective: Vec<f64>,
    pub equalities: Vec<LpRow>,
    /// `row . x <= rhs`.
    pub inequalities: Vec<LpRow>,
    /// Per-variable `[lower, upper]`; `lower >= 0`, `upper` may be infinite.
    pub bounds: Vec<(f64, f64)>,
}

impl LpProblem {
    /// `n` variables in `[0, inf)`, zero objective and no rows.
    pub fn new(n: usize) -> Self {
        Self {
            objective: vec![0.0; n],
            equalities: Vec::new(),
            inequalities: Vec::new(),
            bounds: vec![(0.0, f64::INFINITY); n],
        }
    }

    pub fn num_vars(&self) -> usize {
        self.objective.len()
    }

    pub fn add_equality(&mut self, coefficients: Vec<f64>, rhs: f64) {
        self.equalities.push(LpRow { coefficients, rhs });
    }

    pub fn add_inequality(&mut self, coefficients: Vec<f64>, rhs: f64) {
        self.inequalities.push(LpRow { coefficients, rhs });
    }

    fn validate(&self) -> Result<(), LpError> {
        let n = self.num_vars();
        if self.bounds.len() != n {
            return Err(LpError::Dimension(format!(
                "{} bounds for {n} variables",
                self.bounds.len()
            )));
        }
        for (kind, rows) in [
            ("equality", &self.equalities),
            ("inequality", &self.inequalities),
        ] {
            for (i, row) in rows.iter().enumerate() {
                if row.coefficients.len() != n {
                    return Err(LpError::Dimension(format!(
                        "{kind} row {i} has {} coefficients for {n} variables",
                        row.coefficients.len()
                    )));
                }
                if !row.rhs.is_finite() || row.coefficients.iter().any(|x| !x.is_finite()) {
                    return Err(LpError::Dimension(format!(
                        "{kind} row {i} has non-finite entries"
                    )));
                }
            }
        }
        if self.objective.iter().any(|x| !x.is_finite()) {
            return Err(LpError::Dimension(
                "objective has non-finite entries".into(),
            ));
        }
        for (index, &(lower, upper)) in self.bounds.iter().enumerate() {
            if !(lower >= 0.0) || !lower.is_finite() || !(upper >= lower) {
                return Err(LpError::Bounds {
                    index,
                    lower,
                    upper,
                });
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LpStatus {
    Optimal,
    Infeasible,
    Unbounded,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LpSolution {
    pub status: LpStatus,
    /// Primal values; meaningful only when `Optimal`.
    pub values: Vec<f64>,
    pub objective_value: f64,
    /// Duals of the equality rows (free sign).
    pub equality_duals: Vec<f64>,
    /// Duals of the inequality rows (nonnegative at a maximum).
    pub inequality_duals: Vec<f64>,
    pub iterations: usize,
}

impl LpSolution {
    fn non_optimal(status: LpStatus, n: usize, iterations: usize) -> Self {
        Self {
            status,
            values: vec![0.0; n],
            objective_value: f64::NAN,
            equality_duals: Vec::new(),
            inequality_duals: Vec::new(),
            iterations,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PivotRule {
    /// Lowest-index entering variable, lowest-index leaving variable on ties.
    Bland,
    /// Largest reduced cost, switching to Bland's rule for good once a run of
    /// degenerate pivots is seen.
    DantzigThenBland,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SimplexOptions {
    pub pivot_rule: PivotRule,
    /// Pivot budget over both phases; `None` picks `100 * (rows + cols) + 1000`.
    pub max_iterations: Option<usize>,
    /// Entries at or below this magnitude are never pivoted on.
    pub pivot_tol: f64,
    /// Reduced costs must exceed this to enter.
    pub optimality_tol: f64,
}

impl Default for SimplexOptions {
    fn default() -> Self {
        Self {
            pivot_rule: PivotRule::Bland,
            max_iterations: None,
            pivot_tol: 1e-12,
            optimality_tol: 1e-10,
        }
    }
}

/// Solves with [`SimplexOptions::default`] (Bland's rule).
pub fn solve_lp(problem: &LpProblem) -> Result<LpSolution, LpError> {
    solve_lp_with(problem, &SimplexOptions::default())
}

#[derive(Clone, Copy, PartialEq, Eq)]
enum RowOrigin {
    Equality(usize),
    Inequality(usize),
    UpperBound,
}

struct Tableau {
    rows: usize,
    width: usize,
    /// `rows` constraint rows, then the phase-2 and phase-1 reduced-cost rows.
    data: Vec<f64>,
    basis: Vec<usize>,
    first_artificial: usize,
    rhs_col: usize,
}

impl Tableau {
    #[inline]
    fn at(&self, r: usize, c: usize) -> f64 {
        self.data[r * self.width + c]
    }

    fn phase2_row(&self) -> usize {
        self.rows
    }

    fn phase1_row(&self) -> usize {
        self.rows + 1
    }

    fn pivot(&mut self, pr: usize, pc: usize, update_phase1: bool, nz: &mut Vec<usize>) {
        let w = self.width;
        let inv = 1.0 / self.at(pr, pc);
        nz.clear();
        {
            let row = &mut self.data[pr * w..(pr + 1) * w];
            for (c, x) in row.iter_mut().enumerate() {
                if *x != 0.0 {
                    *x *= inv;
                    nz.push(c);
                }
            }
            row[pc] = 1.0;
        }
        let last = if update_phase1 {
            self.rows + 2
        } else {
            self.rows + 1
        };
        let (before, rest) = self.data.split_at_mut(pr * w);
        let (pivot_row, after) = rest.split_at_mut(w);
        let apply = |row: &mut [f64]| {
            let f = row[pc];
            if f != 0.0 {
                for &c in nz.iter() {
                    row[c] -= f * pivot_row[c];
                }
                row[pc] = 0.0;
            }
        };
        for row in before.chunks_mut(w) {
            apply(row);
        }
        for (i, row) in after.chunks_mut(w).enumerate() {
            if pr + 1 + i < last {
                apply(row);
            }
        }
        self.basis[pr] = pc;
    }
}

/// Solves `problem` with explicit options.
pub fn solve_lp_with(problem: &LpProblem, opts: &SimplexOptions) -> Result<LpSolution, LpError> {
    problem.validate()?;
    let n = problem.num_vars();

    // Column map: kept variables are shifted by their lower bound.
    let mut kept = Vec::new();
    let mut shift = vec![0.0; n];
    for (j, &(lower, upper)) in problem.bounds.iter().enumerate() {
        shift[j] = lower;
        if upper > lower {
            kept.push(j);
        }
    }
    let nk = kept.len();

    struct Row {
        coeffs: Vec<f64>,
        rhs: f64,
        le: bool,
        origin: RowOrigin,
    }
    let shifted = |row: &LpRow| {
        row.rhs
            - row
                .coefficients
                .iter()
                .zip(&shift)
                .map(|(a, l)| a * l)
                .sum::<f64>()
    };
    let mut rows: Vec<Row> = Vec::new();
    for (i, r) in problem.equalities.iter().enumerate() {
        rows.push(Row {
            coeffs: kept.iter().map(|&j| r.coefficients[j]).collect(),
            rhs: shifted(r),
            le: false,
            origin: RowOrigin::Equality(i),
        });
    }
    for (i, r) in problem.inequalities.iter().enumerate() {
        rows.push(Row {
            coeffs: kept.iter().map(|&j| r.coefficients[j]).collect(),
            rhs: shifted(r),
            le: true,
            origin: RowOrigin::Inequality(i),
        });
    }
    for (k, &j) in kept.iter().enumerate() {
        let (lower, upper) = problem.bounds[j];
        if upper.is_finite() {
            let mut coeffs = vec![0.0; nk];
            coeffs[k] = 1.0;
            rows.push(Row {
                coeffs,
                rhs: upper - lower,
                le: true,
                origin: RowOrigin::UpperBound,
            });
        }
    }

    let m = rows.len();
    let n_slack = rows.iter().filter(|r| r.le).count();
    let needs_art: Vec<bool> = rows.iter().map(|r| !r.le || r.rhs < 0.0).collect();
    let n_art = needs_art.iter().filter(|x| **x).count();
    let first_slack = nk;
    let first_artificial = nk + n_slack;
    let rhs_col = first_artificial + n_art;
    let width = rhs_col + 1;

    let mut t = Tableau {
        rows: m,
        width,
        data: vec![0.0; (m + 2) * width],
        basis: vec![0; m],
        first_artificial,
        rhs_col,
    };
    let mut id_col = vec![0usize; m];
    let mut sign = vec![1.0; m];
    let (mut slack_at, mut art_at) = (first_slack, first_artificial);
    for (i, row) in rows.iter().enumerate() {
        let negate = row.rhs < 0.0;
        let sgn = if negate { -1.0 } else { 1.0 };
        sign[i] = sgn;
        let base = i * width;
        for (k, &a) in row.coeffs.iter().enumerate() {
            t.data[base + k] = sgn * a;
        }
        t.data[base + rhs_col] = sgn * row.rhs;
        if row.le {
            t.data[base + slack_at] = sgn;
            if !negate {
                id_col[i] = slack_at;
            }
            slack_at += 1;
        }
        if needs_art[i] {
            t.data[base + art_at] = 1.0;
            id_col[i] = art_at;
            art_at += 1;
        }
        t.basis[i] = id_col[i];
    }
    // Phase-2 reduced costs start at c (initial basis has zero cost).
    let (p2, p1) = (t.phase2_row(), t.phase1_row());
    for (k, &j) in kept.iter().enumerate() {
        t.data[p2 * width + k] = problem.objective[j];
    }
    // Phase-1 objective: maximise -sum(artificials).
    for i in 0..m {
        if needs_art[i] {
            for c in (0..first_artificial).chain([rhs_col]) {
                let x = t.at(i, c);
                t.data[p1 * width + c] += x;
            }
        }
    }

    let budget = opts.max_iterations.unwrap_or(100 * (m + width) + 1000);
    let mut iterations = 0;
    let mut nz = Vec::with_capacity(width);
    let max_rhs = rows.iter().fold(1.0f64, |acc, r| acc.max(r.rhs.abs()));

    if n_art > 0 {
        match run_phase(&mut t, true, opts, budget, &mut iterations, &mut nz)? {
            PhaseEnd::Optimal => {}
            PhaseEnd::Unbounded => unreachable!("phase 1 objective is bounded above by zero"),
        }
        let infeasibility: f64 = (0..m)
            .filter(|&i| t.basis[i] >= first_artificial)
            .map(|i| t.at(i, rhs_col))
            .sum();
        if infeasibility > 1e-9 * max_rhs {
            return Ok(LpSolution::non_optimal(LpStatus::Infeasible, n, iterations));
        }
        // Drive zero-level artificials out of the basis where possible.
        for i in 0..m {
            if t.basis[i] < first_artificial {
                continue;
            }
            let col = (0..first_artificial).find(|&c| t.at(i, c).abs() > 1e-9);
            if let Some(c) = col {
                t.data[i * width + rhs_col] = 0.0;
                t.pivot(i, c, false, &mut nz);
                iterations += 1;
            }
        }
    }

    if let PhaseEnd::Unbounded = run_phase(&mut t, false, opts, budget, &mut iterations, &mut nz)? {
        return Ok(LpSolution::non_optimal(LpStatus::Unbounded, n, iterations));
    }

    let mut values = shift.clone();
    for i in 0..m {
        let b = t.basis[i];
        if b < nk {
            values[kept[b]] += t.at(i, rhs_col).max(0.0);
        }
    }
    let objective_value = problem
        .objective
        .iter()
        .zip(&values)
        .map(|(c, x)| c * x)
        .sum();
    let mut equality_duals = vec![0.0; problem.equalities.len()];
    let mut inequality_duals = vec![0.0; problem.inequalities.len()];
    for (i, row) in rows.iter().enumerate() {
        let y = -sign[i] * t.at(t.phase2_row(), id_col[i]);
        match row.origin {
            RowOrigin::Equality(k) => equality_duals[k] = y,
            RowOrigin::Inequality(k) => inequality_duals[k] = y,
            RowOrigin::UpperBound => {}
        }
    }
    Ok(LpSolution {
        status: LpStatus::Optimal,
        values,
        objective_value,
        equality_duals,
        inequality_duals,
        iterations,
    })
}

enum PhaseEnd {
    Optimal,
    Unbounded,
}

fn run_phase(
    t: &mut Tableau,
    phase1: bool,
    opts: &SimplexOptions,
    budget: usize,
    iterations: &mut usize,
    nz: &mut Vec<usize>,
) -> Result<PhaseEnd, LpError> {
    let obj_row = if phase1 {
        t.phase1_row()
    } else {
        t.phase2_row()
    };
    let mut bland = opts.pivot_rule == PivotRule::Bland;
    let mut degenerate_run = 0usize;
    loop {
        if *iterations >= budget {
            return Err(LpError::Stalled {
                iterations: *iterations,
            });
        }
        let costs = &t.data[obj_row * t.width..obj_row * t.width + t.first_artificial];
        let entering = if bland {
            costs.iter().position(|&d| d > opts.optimality_tol)
        } else {
            let mut best: Option<(usize, f64)> = None;
            for (c, &d) in costs.iter().enumerate() {
                if d > opts.optimality_tol && best.map_or(true, |(_, bd)| d > bd) {
                    best = Some((c, d));
                }
            }
            best.map(|(c, _)| c)
        };
        let Some(pc) = entering else {
            return Ok(PhaseEnd::Optimal);
        };
        let mut leave: Option<(usize, f64)> = None;
        for r in 0..t.rows {
            let a = t.at(r, pc);
            if a > opts.pivot_tol {
                let ratio = t.at(r, t.rhs_col).max(0.0) / a;
                leave = match leave {
                    None => Some((r, ratio)),
                    Some((br, bratio)) => {
                        if ratio < bratio - 1e-12 * (1.0 + bratio.abs())
                            || (ratio <= bratio + 1e-12 * (1.0 + bratio.abs())
                                && t.basis[r] < t.basis[br])
                        {
                            Some((r, ratio))
                        } else {
                            Some((br, bratio))
                        }
                    }
                };
            }
        }
        let Some((pr, ratio)) = leave else {
            return Ok(PhaseEnd::Unbounded);
        };
        if ratio <= 1e-14 {
            degenerate_run += 1;
            if degenerate_run > 50 {
                bland = true;
            }
        } else {
            degenerate_run = 0;
        }
        t.pivot(pr, pc, phase1, nz);
        *iterations += 1;
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn lp2() -> LpProblem {
        let mut lp = LpProblem::new(2);
        lp.objective = vec![1.0, 1.0];
        lp.add_inequality(vec![1.0, 2.0], 4.0);
        lp.add_inequality(vec![3.0, 1.0], 6.0);
        lp
    }

    #[test]
    fn bounded_single_variable() {
        let mut lp = LpProblem::new(1);
        lp.objective = vec![1.0];
        lp.add_inequality(vec![1.0], 1.0);
        let sol = solve_lp(&lp).unwrap();
        assert_eq!(sol.status, LpStatus::Optimal);
        assert!((sol.values[0] - 1.0).abs() < 1e-12);
        assert!((sol.inequality_duals[0] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn negative_rhs_is_infeasible() {
        let mut lp = LpProblem::new(1);
        lp.objective = vec![1.0];
        lp.add_inequality(vec![1.0], -1.0);
        assert_eq!(solve_lp(&lp).unwrap().status, LpStatus::Infeasible);
    }

    #[test]
    fn unbounded_detected() {
        let mut lp = LpProblem::new(2);
        lp.objective = vec![1.0, 0.0];
        lp.add_inequality(vec![-1.0, 1.0], 1.0);
        assert_eq!(solve_lp(&lp).unwrap().status, LpStatus::Unbounded);
    }

    #[test]
    fn two_dimensional_vertex() {
        for rule in [PivotRule::Bland, PivotRule::DantzigThenBland] {
            let opts = SimplexOptions {
                pivot_rule: rule,
                ..Default::default()
            };
            let sol = solve_lp_with(&lp2(), &opts).unwrap();
            assert_eq!(sol.status, LpStatus::Optimal);
            assert!((sol.values[0] - 1.6).abs() < 1e-12);
            assert!((sol.values[1] - 1.2).abs() < 1e-12);
            assert!((sol.objective_value - 2.8).abs() < 1e-12);
            // duals: y1 + 3 y2 = 1, 2 y1 + y2 = 1 -> y = (0.4, 0.2)
            assert!((sol.inequality_duals[0] - 0.4).abs() < 1e-12);
            assert!((sol.inequality_duals[1] - 0.2).abs() < 1e-12);
        }
    }

    #[test]
    fn bounds_and_equalities() {
        // max x0 + 2 x1 + x2, x0 + x1 + x2 = 3, x1 in [0.5, 1], x2 fixed at 0.25, x0 >= 1
        let mut lp = LpProblem::new(3);
        lp.objective = vec![1.0, 2.0, 1.0];
        lp.add_equality(vec![1.0, 1.0, 1.0], 3.0);
        lp.bounds = vec![(1.0, f64::INFINITY), (0.5, 1.0), (0.25, 0.25)];
        let sol = solve_lp(&lp).unwrap();
        assert_eq!(sol.status, LpStatus::Optimal);
        assert!((sol.values[1] - 1.0).abs() < 1e-12);
        assert!((sol.values[2] - 0.25).abs() < 1e-12);
        assert!((sol.values[0] - 1.75).abs() < 1e-12);
        assert!((sol.objective_value - 4.0).abs() < 1e-12);
        assert!((sol.equality_duals[0] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn redundant_equalities() {
        let mut lp = LpProblem::new(2);
        lp.objective = vec![1.0, 0.0];
        lp.add_equality(vec![1.0, 1.0], 1.0);
        lp.add_equality(vec![2.0, 2.0], 2.0);
        let sol = solve_lp(&lp).unwrap();
        assert_eq!(sol.status, LpStatus::Optimal);
        assert!((sol.objective_value - 1.0).abs() < 1e-12);
    }

    #[test]
    fn dimension_errors() {
        let mut lp = LpProblem::new(2);
        lp.add_equality(vec![1.0], 1.0);
        assert!(matches!(solve_lp(&lp), Err(LpError::Dimension(_))));
        let mut lp = LpProblem::new(1);
        lp.bounds[0] = (-1.0, 1.0);
        assert!(matches!(solve_lp(&lp), Err(LpError::Bounds { .. })));
    }

    #[test]
    fn iteration_budget_reports_stall() {
        let opts = SimplexOptions {
            max_iterations: Some(1),
            ..Default::default()
        };
        assert!(matches!(
            solve_lp_with(&lp2(), &opts),
            Err(LpError::Stalled { .. })
        ));
    }
}
