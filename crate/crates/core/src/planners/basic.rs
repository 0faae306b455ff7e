//! The occupancy-measure LP planner.
//!
//! Small instances are solved as one LP over all `rho(s,a,h)`. Larger ones
//! use column generation: the restricted master mixes deterministic policies
//! (the vertices of the occupancy polytope) under the budget rows, and new
//! columns are priced by value iteration on `r - sum_i mu_i c_i`. Both paths
//! reach the same optimum; the extracted Markov policy is the same object
//! either way (`policy_from_occupancy` of the optimal occupancy).

use crate::cmdp::{
    occupancy_from_policy, policy_from_occupancy, ObjectiveTable, OccupancyMeasure, Policy,
};
use crate::estimation::BonusEnhancedModel;

use super::simplex::{solve_lp, LpProblem, LpStatus};
use super::value_iteration::value_iteration;
use super::{check_budgets, PlannedPolicy, PlannerError, PlannerSolution, PlannerStatus};

/// Above this many occupancy variables `Auto` switches to column generation.
const DIRECT_MAX_VARS: usize = 800;
const MAX_COLUMNS: usize = 5000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum LpMethod {
    #[default]
    Auto,
    Direct,
    ColumnGeneration,
}

/// Builds the occupancy LP: variables `rho(s,a,h)` in `[h][s][a]` order,
/// objective `sum rho r_plus`, budget rows `sum rho c_minus_i <= xi_i`,
/// stage-1 normalisation, flow conservation for stages `2..=H`, and
/// `rho(s,.,1) = 0` for `s != s0` via fixed bounds.
pub fn occupancy_lp(
    model: &BonusEnhancedModel,
    xi: &[f64],
    s0: usize,
    horizon: usize,
) -> Result<LpProblem, PlannerError> {
    check_budgets(model, xi)?;
    let (ns, na) = (model.num_states(), model.num_actions());
    if s0 >= ns {
        return Err(PlannerError::Config(format!(
            "initial state {s0} out of range"
        )));
    }
    if horizon == 0 {
        return Err(PlannerError::Config("horizon must be positive".into()));
    }
    let n = horizon * ns * na;
    let idx = |s: usize, a: usize, h: usize| ((h - 1) * ns + s) * na + a;
    let mut lp = LpProblem::new(n);
    for h in 1..=horizon {
        for s in 0..ns {
            for a in 0..na {
                lp.objective[idx(s, a, h)] = model.r_plus.get(s, a);
            }
        }
    }
    for s in (0..ns).filter(|&s| s != s0) {
        for a in 0..na {
            lp.bounds[idx(s, a, 1)] = (0.0, 0.0);
        }
    }
    let mut first = vec![0.0; n];
    for a in 0..na {
        first[idx(s0, a, 1)] = 1.0;
    }
    lp.add_equality(first, 1.0);
    for h in 1..horizon {
        for next in 0..ns {
            let mut row = vec![0.0; n];
            for a in 0..na {
                row[idx(next, a, h + 1)] = 1.0;
            }
            for s in 0..ns {
                for a in 0..na {
                    row[idx(s, a, h)] -= model.p.prob(s, a, next);
                }
            }
            lp.add_equality(row, 0.0);
        }
    }
    for (c, &budget) in model.c_minus.iter().zip(xi) {
        let mut row = vec![0.0; n];
        for h in 1..=horizon {
            for s in 0..ns {
                for a in 0..na {
                    row[idx(s, a, h)] = c.get(s, a);
                }
            }
        }
        lp.add_inequality(row, budget);
    }
    Ok(lp)
}

/// Maximises model reward subject to `E[sum_h c_minus_i] <= xi_i` over
/// occupancy measures, using [`LpMethod::Auto`].
pub fn basic_conplanner(
    model: &BonusEnhancedModel,
    xi: &[f64],
    s0: usize,
    horizon: usize,
) -> Result<PlannerSolution, PlannerError> {
    basic_conplanner_with(model, xi, s0, horizon, LpMethod::Auto)
}

pub fn basic_conplanner_with(
    model: &BonusEnhancedModel,
    xi: &[f64],
    s0: usize,
    horizon: usize,
    method: LpMethod,
) -> Result<PlannerSolution, PlannerError> {
    check_budgets(model, xi)?;
    let n = horizon * model.num_states() * model.num_actions();
    let direct = match method {
        LpMethod::Direct => true,
        LpMethod::ColumnGeneration => false,
        LpMethod::Auto => n <= DIRECT_MAX_VARS,
    };
    let rho = if direct {
        solve_direct(model, xi, s0, horizon)?
    } else {
        column_generation(model, xi, s0, horizon)?
    };
    let policy = policy_from_occupancy(&rho)?;
    let occupancy = occupancy_from_policy(&model.p, &policy, s0, horizon)?;
    PlannerSolution::from_occupancy(
        model,
        PlannedPolicy::Markov(policy),
        occupancy,
        PlannerStatus::Optimal,
    )
}

fn solve_direct(
    model: &BonusEnhancedModel,
    xi: &[f64],
    s0: usize,
    horizon: usize,
) -> Result<OccupancyMeasure, PlannerError> {
    let lp = occupancy_lp(model, xi, s0, horizon)?;
    let sol = solve_lp(&lp)?;
    match sol.status {
        LpStatus::Optimal => {}
        LpStatus::Infeasible => return Err(PlannerError::Infeasible),
        LpStatus::Unbounded => {
            return Err(PlannerError::Config(
                "occupancy LP reported unbounded".into(),
            ))
        }
    }
    let values = sol.values.into_iter().map(|x| x.max(0.0)).collect();
    Ok(OccupancyMeasure::from_raw(
        horizon,
        model.num_states(),
        model.num_actions(),
        values,
    )?)
}

struct Column {
    policy: Policy,
    occupancy: OccupancyMeasure,
    reward: f64,
    consumption: Vec<f64>,
}

fn make_column(
    model: &BonusEnhancedModel,
    policy: Policy,
    s0: usize,
    horizon: usize,
) -> Result<Column, PlannerError> {
    let occupancy = occupancy_from_policy(&model.p, &policy, s0, horizon)?;
    let reward = crate::cmdp::expected_total(&occupancy, &model.r_plus)?;
    let consumption = model
        .c_minus
        .iter()
        .map(|c| crate::cmdp::expected_total(&occupancy, c))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(Column {
        policy,
        occupancy,
        reward,
        consumption,
    })
}

/// `w r_plus - sum_i mu_i c_minus_i`.
fn priced_table(model: &BonusEnhancedModel, reward_weight: f64, mu: &[f64]) -> ObjectiveTable {
    let mut table = ObjectiveTable::zeros(model.num_states(), model.num_actions())
        .add_scaled(&model.r_plus, reward_weight);
    for (c, &m) in model.c_minus.iter().zip(mu) {
        if m != 0.0 {
            table = table.add_scaled(c, -m);
        }
    }
    table
}

fn column_generation(
    model: &BonusEnhancedModel,
    xi: &[f64],
    s0: usize,
    horizon: usize,
) -> Result<OccupancyMeasure, PlannerError> {
    let d = xi.len();
    let mut columns: Vec<Column> = Vec::new();
    let push = |columns: &mut Vec<Column>, policy: Policy| -> Result<bool, PlannerError> {
        if columns.iter().any(|c| c.policy == policy) {
            return Ok(false);
        }
        columns.push(make_column(model, policy, s0, horizon)?);
        Ok(true)
    };
    let (_, best) = value_iteration(&model.p, &model.r_plus, horizon)?;
    push(&mut columns, best)?;
    for c in &model.c_minus {
        let negated =
            ObjectiveTable::zeros(model.num_states(), model.num_actions()).add_scaled(c, -1.0);
        let (_, frugal) = value_iteration(&model.p, &negated, horizon)?;
        push(&mut columns, frugal)?;
    }

    let scale = 1.0
        + horizon as f64
            * model
                .r_plus
                .as_slice()
                .iter()
                .chain(model.c_minus.iter().flat_map(|c| c.as_slice()))
                .fold(0.0f64, |acc, x| acc.max(x.abs()));
    let tol = 1e-10 * scale;
    let mut phase1 = !columns
        .iter()
        .any(|c| c.consumption.iter().zip(xi).all(|(v, b)| *v <= *b));

    loop {
        if columns.len() > MAX_COLUMNS {
            return Err(PlannerError::Config(format!(
                "column generation exceeded {MAX_COLUMNS} columns"
            )));
        }
        let nc = columns.len();
        let mut lp = LpProblem::new(nc + d);
        for (j, col) in columns.iter().enumerate() {
            lp.objective[j] = if phase1 { 0.0 } else { col.reward };
        }
        for i in 0..d {
            lp.objective[nc + i] = if phase1 { -1.0 } else { 0.0 };
            if !phase1 {
                lp.bounds[nc + i] = (0.0, 0.0);
            }
            let mut row: Vec<f64> = columns.iter().map(|c| c.consumption[i]).collect();
            row.extend((0..d).map(|k| if k == i { -1.0 } else { 0.0 }));
            lp.add_inequality(row, xi[i]);
        }
        let mut convex = vec![1.0; nc];
        convex.extend(std::iter::repeat(0.0).take(d));
        lp.add_equality(convex, 1.0);

        let sol = solve_lp(&lp)?;
        match sol.status {
            LpStatus::Optimal => {}
            LpStatus::Infeasible => return Err(PlannerError::Infeasible),
            LpStatus::Unbounded => {
                return Err(PlannerError::Config(
                    "restricted master reported unbounded".into(),
                ))
            }
        }
        let mu = &sol.inequality_duals;
        let sigma = sol.equality_duals[0];
        let priced = priced_table(model, if phase1 { 0.0 } else { 1.0 }, mu);
        let (values, candidate) = value_iteration(&model.p, &priced, horizon)?;
        let reduced = values.v(s0, 1) - sigma;
        let added = reduced > tol && push(&mut columns, candidate)?;
        if added {
            continue;
        }
        if phase1 {
            if -sol.objective_value > 1e-9 * scale {
                return Err(PlannerError::Infeasible);
            }
            phase1 = false;
            continue;
        }
        let parts: Vec<(f64, &OccupancyMeasure)> = columns
            .iter()
            .zip(&sol.values)
            .filter(|(_, w)| **w > 0.0)
            .map(|(c, w)| (*w, &c.occupancy))
            .collect();
        let total: f64 = parts.iter().map(|(w, _)| w).sum();
        let parts: Vec<(f64, &OccupancyMeasure)> =
            parts.into_iter().map(|(w, o)| (w / total, o)).collect();
        return Ok(OccupancyMeasure::mix(&parts)?);
    }
}
