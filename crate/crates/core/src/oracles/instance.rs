//! Exact cMDP instances and their text format.
//!
//! ```text
//! # comment
//! states 2
//! actions 2
//! horizon 2
//! initial 0
//! budget 1/2            (one value per resource, may be empty)
//! p 0 1 : 1/2 1/2       (state, action : next-state distribution)
//! r 0 1 : 3/10          (state, action : reward)
//! c 0 0 1 : 0.25        (resource, state, action : consumption)
//! ```
//!
//! Every `(state, action)` needs a `p` line; missing `r` and `c` entries
//! are zero. Numbers are integers, decimals or fractions `a/b`.

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};

use crate::cmdp::{Cmdp, ObjectiveTable, TransitionTable};
use crate::estimation::BonusEnhancedModel;

use super::rational_lp::{solve_lp_exact, ExactLpSolution, RationalLp, RationalRow};
use super::OracleError;

/// Parses `a`, `a/b` or a decimal such as `-0.125` exactly.
pub fn parse_rational(text: &str) -> Option<BigRational> {
    let text = text.trim();
    if let Some((num, den)) = text.split_once('/') {
        let num: BigInt = num.trim().parse().ok()?;
        let den: BigInt = den.trim().parse().ok()?;
        if den.is_zero() {
            return None;
        }
        return Some(BigRational::new(num, den));
    }
    let (negative, body) = match text.strip_prefix('-') {
        Some(rest) => (true, rest),
        None => (false, text),
    };
    let (int_part, frac_part) = body.split_once('.').unwrap_or((body, ""));
    if int_part.is_empty() && frac_part.is_empty() {
        return None;
    }
    if !int_part
        .chars()
        .chain(frac_part.chars())
        .all(|c| c.is_ascii_digit())
    {
        return None;
    }
    let digits: BigInt = format!("{int_part}{frac_part}").parse().ok()?;
    let scale = num_traits::pow(BigInt::from(10), frac_part.len());
    let value = BigRational::new(digits, scale);
    Some(if negative { -value } else { value })
}

/// A cMDP with exact rational tables. Tables are not restricted to `[0, 1]`
/// so optimistic models fit as well.
#[derive(Debug, Clone, PartialEq)]
pub struct CmdpInstance {
    pub states: usize,
    pub actions: usize,
    pub horizon: usize,
    pub initial: usize,
    pub budgets: Vec<BigRational>,
    /// `[s][a][s']`.
    pub p: Vec<BigRational>,
    /// `[s][a]`.
    pub r: Vec<BigRational>,
    /// `[i][s][a]`.
    pub c: Vec<Vec<BigRational>>,
}

fn exact(x: f64) -> BigRational {
    BigRational::from_float(x).expect("finite table entry")
}

fn to_f64(q: &BigRational) -> f64 {
    q.to_f64().unwrap_or(f64::NAN)
}

impl CmdpInstance {
    fn from_tables(
        p: &TransitionTable,
        r: &ObjectiveTable,
        c: &[ObjectiveTable],
        budgets: &[f64],
        initial: usize,
        horizon: usize,
    ) -> Self {
        Self {
            states: p.num_states(),
            actions: p.num_actions(),
            horizon,
            initial,
            budgets: budgets.iter().map(|&b| exact(b)).collect(),
            p: p.as_slice().iter().map(|&x| exact(x)).collect(),
            r: r.as_slice().iter().map(|&x| exact(x)).collect(),
            c: c.iter()
                .map(|t| t.as_slice().iter().map(|&x| exact(x)).collect())
                .collect(),
        }
    }

    /// The exact binary values of a floating-point cMDP.
    pub fn from_cmdp(cmdp: &Cmdp) -> Self {
        Self::from_tables(
            cmdp.transitions(),
            cmdp.rewards(),
            cmdp.consumption(),
            cmdp.budgets(),
            cmdp.initial_state(),
            cmdp.horizon(),
        )
    }

    /// The planning problem `(p, r_plus, c_minus, xi)` of an optimistic model.
    pub fn from_model(
        model: &BonusEnhancedModel,
        xi: &[f64],
        initial: usize,
        horizon: usize,
    ) -> Self {
        Self::from_tables(
            &model.p,
            &model.r_plus,
            &model.c_minus,
            xi,
            initial,
            horizon,
        )
    }

    pub fn parse(text: &str) -> Result<Self, OracleError> {
        let err = |line: usize, reason: String| OracleError::Instance { line, reason };
        let mut header: [Option<usize>; 4] = [None; 4];
        let mut budgets: Option<Vec<BigRational>> = None;
        let mut entries: Vec<(usize, char, Vec<usize>, Vec<BigRational>)> = Vec::new();
        for (idx, raw) in text.lines().enumerate() {
            let line_no = idx + 1;
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (head, tail) = match line.split_once(':') {
                Some((h, t)) => (h, Some(t)),
                None => (line, None),
            };
            let mut words = head.split_whitespace();
            let key = words.next().unwrap_or_default();
            let rest: Vec<&str> = words.collect();
            let numbers = |items: &[&str]| -> Result<Vec<BigRational>, OracleError> {
                items
                    .iter()
                    .map(|w| {
                        parse_rational(w).ok_or_else(|| err(line_no, format!("bad number {w:?}")))
                    })
                    .collect()
            };
            match key {
                "states" | "actions" | "horizon" | "initial" => {
                    let slot = ["states", "actions", "horizon", "initial"]
                        .iter()
                        .position(|k| *k == key)
                        .unwrap();
                    let value = rest
                        .first()
                        .and_then(|w| w.parse().ok())
                        .filter(|_| rest.len() == 1)
                        .ok_or_else(|| err(line_no, format!("{key} needs one integer")))?;
                    header[slot] = Some(value);
                }
                "budget" => budgets = Some(numbers(&rest)?),
                "p" | "r" | "c" => {
                    let tail = tail.ok_or_else(|| err(line_no, "missing `:`".into()))?;
                    let index: Vec<usize> = rest
                        .iter()
                        .map(|w| {
                            w.parse()
                                .map_err(|_| err(line_no, format!("bad index {w:?}")))
                        })
                        .collect::<Result<_, _>>()?;
                    let values = numbers(&tail.split_whitespace().collect::<Vec<_>>())?;
                    entries.push((line_no, key.chars().next().unwrap(), index, values));
                }
                other => return Err(err(line_no, format!("unknown key {other:?}"))),
            }
        }
        let names = ["states", "actions", "horizon", "initial"];
        let mut vals = [0usize; 4];
        for (k, (v, name)) in header.iter().zip(names).enumerate() {
            vals[k] = v.ok_or_else(|| err(0, format!("missing `{name}`")))?;
        }
        let [ns, na, horizon, initial] = vals;
        if ns == 0 || na == 0 || horizon == 0 || initial >= ns {
            return Err(err(
                0,
                "sizes must be positive and the initial state in range".into(),
            ));
        }
        let budgets = budgets.unwrap_or_default();
        let d = budgets.len();
        let zero = BigRational::zero;
        let mut p: Vec<Option<Vec<BigRational>>> = vec![None; ns * na];
        let mut r = vec![zero(); ns * na];
        let mut c = vec![vec![zero(); ns * na]; d];
        for (line, kind, index, values) in entries {
            let expect = if kind == 'c' { 3 } else { 2 };
            if index.len() != expect {
                return Err(err(line, format!("`{kind}` needs {expect} indices")));
            }
            let (s, a) = (index[expect - 2], index[expect - 1]);
            if s >= ns || a >= na || (kind == 'c' && index[0] >= d) {
                return Err(err(line, "index out of range".into()));
            }
            match kind {
                'p' => {
                    if values.len() != ns {
                        return Err(err(line, format!("distribution needs {ns} entries")));
                    }
                    if values.iter().any(|x| x.is_negative())
                        || values.iter().cloned().sum::<BigRational>() != BigRational::one()
                    {
                        return Err(err(
                            line,
                            "distribution must be nonnegative and sum to 1".into(),
                        ));
                    }
                    p[s * na + a] = Some(values);
                }
                _ => {
                    if values.len() != 1 {
                        return Err(err(line, "expected one value".into()));
                    }
                    let target = if kind == 'r' {
                        &mut r
                    } else {
                        &mut c[index[0]]
                    };
                    target[s * na + a] = values[0].clone();
                }
            }
        }
        let mut flat = Vec::with_capacity(ns * na * ns);
        for (pair, row) in p.into_iter().enumerate() {
            let row =
                row.ok_or_else(|| err(0, format!("missing `p {} {}` line", pair / na, pair % na)))?;
            flat.extend(row);
        }
        Ok(Self {
            states: ns,
            actions: na,
            horizon,
            initial,
            budgets,
            p: flat,
            r,
            c,
        })
    }

    pub fn load(path: &std::path::Path) -> Result<Self, OracleError> {
        let text = std::fs::read_to_string(path).map_err(|source| OracleError::Io {
            path: path.display().to_string(),
            source,
        })?;
        Self::parse(&text)
    }

    /// Floating-point cMDP (rounded to nearest).
    pub fn to_cmdp(&self) -> Result<Cmdp, OracleError> {
        let (ns, na) = (self.states, self.actions);
        let table = |v: &[BigRational]| ObjectiveTable::new(ns, na, v.iter().map(to_f64).collect());
        Ok(Cmdp::new(
            self.horizon,
            self.initial,
            TransitionTable::new(ns, na, self.p.iter().map(to_f64).collect())?,
            table(&self.r)?,
            self.c.iter().map(|t| table(t)).collect::<Result<_, _>>()?,
            self.budgets.iter().map(to_f64).collect(),
        )?)
    }

    /// Occupancy LP with one stage-1 row per state (`sum_a rho = [s = s0]`),
    /// flow rows for stages `2..=H` and one budget row per resource.
    pub fn occupancy_lp(&self) -> RationalLp {
        let (ns, na, horizon) = (self.states, self.actions, self.horizon);
        let n = horizon * ns * na;
        let var = |h: usize, s: usize, a: usize| (h * ns + s) * na + a;
        let mut lp = RationalLp::new(n);
        for h in 0..horizon {
            for s in 0..ns {
                for a in 0..na {
                    lp.objective[var(h, s, a)] = self.r[s * na + a].clone();
                }
            }
        }
        for s in 0..ns {
            let mut row = vec![BigRational::zero(); n];
            for a in 0..na {
                row[var(0, s, a)] = BigRational::one();
            }
            let rhs = if s == self.initial {
                BigRational::one()
            } else {
                BigRational::zero()
            };
            lp.equalities.push(RationalRow {
                coefficients: row,
                rhs,
            });
        }
        for h in 1..horizon {
            for t in 0..ns {
                let mut row = vec![BigRational::zero(); n];
                for a in 0..na {
                    row[var(h, t, a)] = BigRational::one();
                }
                for s in 0..ns {
                    for a in 0..na {
                        let q = &self.p[(s * na + a) * ns + t];
                        if !q.is_zero() {
                            row[var(h - 1, s, a)] -= q;
                        }
                    }
                }
                lp.equalities.push(RationalRow {
                    coefficients: row,
                    rhs: BigRational::zero(),
                });
            }
        }
        for (table, budget) in self.c.iter().zip(&self.budgets) {
            let mut row = vec![BigRational::zero(); n];
            for h in 0..horizon {
                for s in 0..ns {
                    for a in 0..na {
                        row[var(h, s, a)] = table[s * na + a].clone();
                    }
                }
            }
            lp.inequalities.push(RationalRow {
                coefficients: row,
                rhs: budget.clone(),
            });
        }
        lp
    }

    /// Exact constrained optimum.
    pub fn lp_optimum(&self) -> Result<ExactLpSolution, OracleError> {
        solve_lp_exact(&self.occupancy_lp())
    }
}
