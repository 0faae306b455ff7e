//! Two-phase tableau simplex over exact rationals with Bland's rule.

use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};

use crate::planners::{LpProblem, LpStatus};

use super::{OracleError, EXACT_LP_LIMIT};

#[derive(Debug, Clone, PartialEq)]
pub struct RationalRow {
    pub coefficients: Vec<BigRational>,
    pub rhs: BigRational,
}

/// `maximize c.x` s.t. `E x = e`, `G x <= g`, `l <= x <= u` with `l >= 0`
/// (`u = None` for no upper bound).
#[derive(Debug, Clone, PartialEq)]
pub struct RationalLp {
    pub objective: Vec<BigRational>,
    pub equalities: Vec<RationalRow>,
    pub inequalities: Vec<RationalRow>,
    pub bounds: Vec<(BigRational, Option<BigRational>)>,
}

fn exact(x: f64) -> BigRational {
    BigRational::from_float(x).expect("finite LP coefficient")
}

impl RationalLp {
    pub fn new(n: usize) -> Self {
        Self {
            objective: vec![BigRational::zero(); n],
            equalities: Vec::new(),
            inequalities: Vec::new(),
            bounds: vec![(BigRational::zero(), None); n],
        }
    }

    pub fn num_vars(&self) -> usize {
        self.objective.len()
    }

    /// The exact binary values of a floating-point LP.
    pub fn from_f64(lp: &LpProblem) -> Self {
        let rows = |rows: &[crate::planners::LpRow]| {
            rows.iter()
                .map(|r| RationalRow {
                    coefficients: r.coefficients.iter().map(|&x| exact(x)).collect(),
                    rhs: exact(r.rhs),
                })
                .collect()
        };
        Self {
            objective: lp.objective.iter().map(|&x| exact(x)).collect(),
            equalities: rows(&lp.equalities),
            inequalities: rows(&lp.inequalities),
            bounds: lp
                .bounds
                .iter()
                .map(|&(l, u)| (exact(l), if u.is_finite() { Some(exact(u)) } else { None }))
                .collect(),
        }
    }

    fn validate(&self) -> Result<(), OracleError> {
        let n = self.num_vars();
        let rows = self.equalities.len() + self.inequalities.len();
        if n > EXACT_LP_LIMIT || rows > EXACT_LP_LIMIT {
            return Err(OracleError::TooLarge {
                what: "exact LP variables/rows".into(),
                size: n.max(rows) as f64,
                limit: EXACT_LP_LIMIT as f64,
            });
        }
        if self.bounds.len() != n {
            return Err(OracleError::Shape(format!(
                "{} bounds for {n} variables",
                self.bounds.len()
            )));
        }
        for row in self.equalities.iter().chain(&self.inequalities) {
            if row.coefficients.len() != n {
                return Err(OracleError::Shape(format!(
                    "row with {} coefficients for {n} variables",
                    row.coefficients.len()
                )));
            }
        }
        for (i, (l, u)) in self.bounds.iter().enumerate() {
            if l.is_negative() || u.as_ref().is_some_and(|u| u < l) {
                return Err(OracleError::Shape(format!("invalid bounds on x{i}")));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExactLpSolution {
    pub status: LpStatus,
    /// Optimal value; `None` unless `Optimal`.
    pub objective: Option<BigRational>,
    pub values: Vec<BigRational>,
}

impl ExactLpSolution {
    pub fn objective_f64(&self) -> Option<f64> {
        self.objective.as_ref().and_then(|q| q.to_f64())
    }
}

struct Tableau {
    /// `rows x (cols + 1)`, last column is the right-hand side.
    a: Vec<Vec<BigRational>>,
    basis: Vec<usize>,
    cols: usize,
}

impl Tableau {
    fn pivot(&mut self, r: usize, c: usize) {
        let inv = self.a[r][c].recip();
        for x in self.a[r].iter_mut() {
            *x *= &inv;
        }
        let pivot_row = self.a[r].clone();
        for (i, row) in self.a.iter_mut().enumerate() {
            if i == r || row[c].is_zero() {
                continue;
            }
            let factor = row[c].clone();
            for (x, p) in row.iter_mut().zip(&pivot_row) {
                if !p.is_zero() {
                    *x -= &factor * p;
                }
            }
        }
        self.basis[r] = c;
    }

    /// Maximises `cost . x` over columns `allowed`; `false` when unbounded.
    fn optimise(&mut self, cost: &[BigRational], allowed: usize) -> bool {
        loop {
            // reduced cost d_j = c_j - c_B B^-1 A_j
            let entering = (0..allowed).find(|&j| {
                if self.basis.contains(&j) {
                    return false;
                }
                let mut d = cost[j].clone();
                for (row, &b) in self.a.iter().zip(&self.basis) {
                    if !row[j].is_zero() {
                        d -= &cost[b] * &row[j];
                    }
                }
                d.is_positive()
            });
            let Some(c) = entering else { return true };
            let mut best: Option<(usize, BigRational)> = None;
            for (i, row) in self.a.iter().enumerate() {
                if row[c].is_positive() {
                    let ratio = &row[self.cols] / &row[c];
                    let better = match &best {
                        None => true,
                        Some((bi, br)) => {
                            ratio < *br || (ratio == *br && self.basis[i] < self.basis[*bi])
                        }
                    };
                    if better {
                        best = Some((i, ratio));
                    }
                }
            }
            match best {
                Some((r, _)) => self.pivot(r, c),
                None => return false,
            }
        }
    }
}

/// Exact optimum of `lp` (at most 60 variables and 60 rows).
pub fn solve_lp_exact(lp: &RationalLp) -> Result<ExactLpSolution, OracleError> {
    lp.validate()?;
    let n = lp.num_vars();
    let zero = BigRational::zero;
    // x = l + y, y >= 0; finite upper bounds become rows y <= u - l
    let mut eq_rows: Vec<(Vec<BigRational>, BigRational)> = Vec::new();
    let mut le_rows: Vec<(Vec<BigRational>, BigRational)> = Vec::new();
    let shift = |row: &RationalRow| {
        let mut rhs = row.rhs.clone();
        for (c, (l, _)) in row.coefficients.iter().zip(&lp.bounds) {
            rhs -= c * l;
        }
        (row.coefficients.clone(), rhs)
    };
    eq_rows.extend(lp.equalities.iter().map(shift));
    le_rows.extend(lp.inequalities.iter().map(shift));
    for (j, (l, u)) in lp.bounds.iter().enumerate() {
        if let Some(u) = u {
            let mut row = vec![zero(); n];
            row[j] = BigRational::one();
            le_rows.push((row, u - l));
        }
    }

    let m = eq_rows.len() + le_rows.len();
    let slacks = le_rows.len();
    let cols = n + slacks + m;
    let mut a = Vec::with_capacity(m);
    for (i, (coef, rhs)) in eq_rows.iter().chain(&le_rows).enumerate() {
        let mut row = vec![zero(); cols + 1];
        row[..n].clone_from_slice(coef);
        if i >= eq_rows.len() {
            row[n + i - eq_rows.len()] = BigRational::one();
        }
        row[cols] = rhs.clone();
        if rhs.is_negative() {
            for x in row.iter_mut() {
                *x = -x.clone();
            }
        }
        row[n + slacks + i] = BigRational::one();
        a.push(row);
    }
    let mut t = Tableau {
        a,
        basis: (0..m).map(|i| n + slacks + i).collect(),
        cols,
    };

    let mut phase1 = vec![zero(); cols];
    for c in phase1.iter_mut().skip(n + slacks) {
        *c = -BigRational::one();
    }
    t.optimise(&phase1, cols);
    let infeasibility: BigRational =
        t.a.iter()
            .zip(&t.basis)
            .filter(|(_, &b)| b >= n + slacks)
            .map(|(row, _)| row[cols].clone())
            .sum();
    if infeasibility.is_positive() {
        return Ok(ExactLpSolution {
            status: LpStatus::Infeasible,
            objective: None,
            values: vec![zero(); n],
        });
    }
    // drive zero-level artificials out; rows that cannot pivot are redundant
    let mut r = 0;
    while r < t.basis.len() {
        if t.basis[r] >= n + slacks {
            match (0..n + slacks).find(|&j| !t.a[r][j].is_zero()) {
                Some(j) => t.pivot(r, j),
                None => {
                    t.a.remove(r);
                    t.basis.remove(r);
                    continue;
                }
            }
        }
        r += 1;
    }

    let mut phase2 = vec![zero(); cols];
    phase2[..n].clone_from_slice(&lp.objective);
    if !t.optimise(&phase2, n + slacks) {
        return Ok(ExactLpSolution {
            status: LpStatus::Unbounded,
            objective: None,
            values: vec![zero(); n],
        });
    }
    let mut values: Vec<BigRational> = lp.bounds.iter().map(|(l, _)| l.clone()).collect();
    for (row, &b) in t.a.iter().zip(&t.basis) {
        if b < n {
            values[b] += &row[cols];
        }
    }
    let objective = values.iter().zip(&lp.objective).map(|(x, c)| x * c).sum();
    Ok(ExactLpSolution {
        status: LpStatus::Optimal,
        objective: Some(objective),
        values,
    })
}

#[cfg(test)]
/// `p / q` as an exact rational.
pub(crate) fn ratio(p: i64, q: i64) -> BigRational {
    BigRational::new(num_bigint::BigInt::from(p), num_bigint::BigInt::from(q))
}
