//! Hard-budget planning with per-episode tightened budgets.

use crate::cmdp::{occupancy_from_policy, Policy};
use crate::estimation::BonusEnhancedModel;

use super::basic::basic_conplanner;
use super::bounds::epsilon_for_knapsack;
use super::{PlannedPolicy, PlannerError, PlannerSolution, PlannerStatus};

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum EpsilonMode {
    /// `eps = AggReg / min_i B_i`, AggReg supplied by the caller.
    Auto,
    Fixed(f64),
}

#[derive(Debug, Clone, PartialEq)]
pub struct KnapsackConfig {
    /// Total budget per resource over all episodes.
    pub budgets: Vec<f64>,
    pub total_episodes: u64,
    pub epsilon: EpsilonMode,
    /// Constant of the aggregate-regret bound used in `Auto` mode.
    pub bound_constant: f64,
}

impl KnapsackConfig {
    pub fn new(
        budgets: Vec<f64>,
        total_episodes: u64,
        epsilon: EpsilonMode,
    ) -> Result<Self, PlannerError> {
        let cfg = Self {
            budgets,
            total_episodes,
            epsilon,
            bound_constant: 1.0,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<(), PlannerError> {
        if self.total_episodes == 0 {
            return Err(PlannerError::Config(
                "knapsack run needs at least one episode".into(),
            ));
        }
        if self.budgets.iter().any(|b| !(*b >= 0.0) || !b.is_finite()) {
            return Err(PlannerError::Config(
                "knapsack budgets must be finite and nonnegative".into(),
            ));
        }
        if let EpsilonMode::Fixed(e) = self.epsilon {
            if !(0.0..=1.0).contains(&e) {
                return Err(PlannerError::Config(format!(
                    "epsilon must lie in [0, 1], got {e}"
                )));
            }
        }
        if !(self.bound_constant > 0.0) {
            return Err(PlannerError::Config(
                "bound constant must be positive".into(),
            ));
        }
        Ok(())
    }

    /// Fixed epsilon as given, or `epsilon_for_knapsack(aggreg, B)` in `Auto` mode.
    pub fn resolve_epsilon(&self, aggreg: f64) -> Result<f64, PlannerError> {
        match self.epsilon {
            EpsilonMode::Fixed(e) => Ok(e),
            EpsilonMode::Auto => epsilon_for_knapsack(aggreg, &self.budgets),
        }
    }

    /// Per-episode budgets `(1 - eps) B_i / K`.
    pub fn tightened_budgets(&self, epsilon: f64) -> Vec<f64> {
        self.budgets
            .iter()
            .map(|b| (1.0 - epsilon) * b / self.total_episodes as f64)
            .collect()
    }
}

/// The policy that plays `null_action` at every stage and state.
pub fn null_policy(horizon: usize, states: usize, actions: usize, null_action: usize) -> Policy {
    Policy::deterministic(horizon, states, actions, |_, _| null_action)
}

/// The LP planner on tightened budgets. An infeasible model problem yields
/// the all-null policy with status [`PlannerStatus::Fallback`].
pub fn knapsack_conplanner(
    model: &BonusEnhancedModel,
    cfg: &KnapsackConfig,
    epsilon: f64,
    null_action: usize,
    s0: usize,
    horizon: usize,
) -> Result<PlannerSolution, PlannerError> {
    cfg.validate()?;
    if !(0.0..=1.0).contains(&epsilon) {
        return Err(PlannerError::Config(format!(
            "epsilon must lie in [0, 1], got {epsilon}"
        )));
    }
    if null_action >= model.num_actions() {
        return Err(PlannerError::Config(format!(
            "null action {null_action} out of range"
        )));
    }
    let xi = cfg.tightened_budgets(epsilon);
    match basic_conplanner(model, &xi, s0, horizon) {
        Err(PlannerError::Infeasible) => {
            let policy = null_policy(
                horizon,
                model.num_states(),
                model.num_actions(),
                null_action,
            );
            let occupancy = occupancy_from_policy(&model.p, &policy, s0, horizon)?;
            PlannerSolution::from_occupancy(
                model,
                PlannedPolicy::Markov(policy),
                occupancy,
                PlannerStatus::Fallback,
            )
        }
        other => other,
    }
}
