//! Constrained planners over occupancy measures.

mod basic;
mod bounds;
mod convex;
mod knapsack;
mod lagrangian;
pub mod simplex;
mod value_iteration;

pub use basic::{basic_conplanner, basic_conplanner_with, occupancy_lp, LpMethod};
pub use bounds::{agg_reg_bound, epsilon_for_knapsack};
pub use convex::{convex_conplanner, ConvexBudget, ConvexSpec};
pub use knapsack::{knapsack_conplanner, null_policy, EpsilonMode, KnapsackConfig};
pub use lagrangian::{lagr_conplanner, LagrConfig};
pub use simplex::{
    solve_lp, solve_lp_with, LpError, LpProblem, LpRow, LpSolution, LpStatus, PivotRule,
    SimplexOptions,
};
pub use value_iteration::value_iteration;

use thiserror::Error;

use crate::cmdp::{expected_total, CmdpError, MixturePolicy, OccupancyMeasure, Policy};
use crate::estimation::BonusEnhancedModel;

#[derive(Debug, Error)]
pub enum PlannerError {
    #[error("planning problem is infeasible under the model")]
    Infeasible,

    #[error("invalid planner configuration: {0}")]
    Config(String),

    #[error(transparent)]
    Lp(#[from] LpError),

    #[error(transparent)]
    Model(#[from] CmdpError),
}

/// What a planner hands back for execution.
#[derive(Debug, Clone, PartialEq)]
pub enum PlannedPolicy {
    Markov(Policy),
    /// Executed by sampling one component per episode.
    Mixture(MixturePolicy),
}

impl PlannedPolicy {
    /// Component to execute for an episode given a uniform draw `u`.
    pub fn pick(&self, u: f64) -> &Policy {
        match self {
            PlannedPolicy::Markov(p) => p,
            PlannedPolicy::Mixture(m) => m.sample_component(u),
        }
    }

    /// `(weight, policy)` pairs; a Markov policy is a single unit-weight entry.
    pub fn components(&self) -> Vec<(f64, &Policy)> {
        match self {
            PlannedPolicy::Markov(p) => vec![(1.0, p)],
            PlannedPolicy::Mixture(m) => m.components().iter().map(|(w, p)| (*w, p)).collect(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PlannerStatus {
    Optimal,
    /// Approximate planner output (Lagrangian iterates, Frank-Wolfe).
    Approximate,
    /// The model problem was infeasible and a safe default was substituted.
    Fallback,
}

impl PlannerStatus {
    pub fn as_str(&self) -> &'static str {
        match self {
            PlannerStatus::Optimal => "optimal",
            PlannerStatus::Approximate => "approximate",
            PlannerStatus::Fallback => "fallback",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PlannerSolution {
    pub policy: PlannedPolicy,
    /// Occupancy under the planning model's kernel.
    pub occupancy: OccupancyMeasure,
    /// `expected_total(occupancy, r_plus)`.
    pub predicted_reward: f64,
    /// `expected_total(occupancy, c_minus[i])`.
    pub predicted_consumption: Vec<f64>,
    pub status: PlannerStatus,
}

impl PlannerSolution {
    pub(crate) fn from_occupancy(
        model: &BonusEnhancedModel,
        policy: PlannedPolicy,
        occupancy: OccupancyMeasure,
        status: PlannerStatus,
    ) -> Result<Self, PlannerError> {
        let predicted_reward = expected_total(&occupancy, &model.r_plus)?;
        let predicted_consumption = model
            .c_minus
            .iter()
            .map(|c| expected_total(&occupancy, c))
            .collect::<Result<Vec<_>, _>>()?;
        Ok(Self {
            policy,
            occupancy,
            predicted_reward,
            predicted_consumption,
            status,
        })
    }
}

pub(crate) fn check_budgets(model: &BonusEnhancedModel, xi: &[f64]) -> Result<(), PlannerError> {
    if xi.len() != model.num_resources() {
        return Err(PlannerError::Config(format!(
            "{} budgets for {} resources",
            xi.len(),
            model.num_resources()
        )));
    }
    if xi.iter().any(|x| !x.is_finite()) {
        return Err(PlannerError::Config("budgets must be finite".into()));
    }
    Ok(())
}
