//! Primal-dual planner: best response by value iteration against projected
//! gradient steps on nonpositive multipliers.

use crate::cmdp::{
    expected_total, occupancy_from_policy, MixturePolicy, ObjectiveTable, OccupancyMeasure,
};
use crate::estimation::BonusEnhancedModel;

use super::value_iteration::value_iteration;
use super::{check_budgets, PlannedPolicy, PlannerError, PlannerSolution, PlannerStatus};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LagrConfig {
    pub eta: f64,
    pub iterations: usize,
}

impl Default for LagrConfig {
    fn default() -> Self {
        Self {
            eta: 0.2,
            iterations: 10,
        }
    }
}

impl LagrConfig {
    pub fn new(eta: f64, iterations: usize) -> Result<Self, PlannerError> {
        let cfg = Self { eta, iterations };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<(), PlannerError> {
        if !(self.eta > 0.0) || !self.eta.is_finite() {
            return Err(PlannerError::Config(format!(
                "learning rate must be positive, got {}",
                self.eta
            )));
        }
        if self.iterations == 0 {
            return Err(PlannerError::Config(
                "at least one iteration is required".into(),
            ));
        }
        Ok(())
    }
}

/// Runs `cfg.iterations` rounds of
///
/// ```text
/// r_lambda = r_plus + sum_i lambda_i (c_minus_i - xi_i / H)
/// pi_t     = value_iteration(p, r_lambda)
/// lambda_i = min(0, lambda_i - eta (E[sum_h c_minus_i] - xi_i))
/// ```
///
/// and returns the uniform mixture of the `pi_t` together with its averaged
/// occupancy under the model kernel.
pub fn lagr_conplanner(
    model: &BonusEnhancedModel,
    xi: &[f64],
    s0: usize,
    horizon: usize,
    cfg: &LagrConfig,
) -> Result<PlannerSolution, PlannerError> {
    cfg.validate()?;
    check_budgets(model, xi)?;
    let mut lambda = vec![0.0; xi.len()];
    let mut policies = Vec::with_capacity(cfg.iterations);
    let mut occupancies: Vec<OccupancyMeasure> = Vec::with_capacity(cfg.iterations);
    for _ in 0..cfg.iterations {
        let mut pseudo: ObjectiveTable = model.r_plus.clone();
        for ((c, &l), &x) in model.c_minus.iter().zip(&lambda).zip(xi) {
            if l != 0.0 {
                pseudo = pseudo.add_scaled(c, l).shifted(-l * x / horizon as f64);
            }
        }
        let (_, policy) = value_iteration(&model.p, &pseudo, horizon)?;
        let occupancy = occupancy_from_policy(&model.p, &policy, s0, horizon)?;
        for ((l, c), &x) in lambda.iter_mut().zip(&model.c_minus).zip(xi) {
            let used = expected_total(&occupancy, c)?;
            *l = (*l - cfg.eta * (used - x)).min(0.0);
        }
        policies.push(policy);
        occupancies.push(occupancy);
    }
    let w = 1.0 / occupancies.len() as f64;
    let parts: Vec<(f64, &OccupancyMeasure)> = occupancies.iter().map(|o| (w, o)).collect();
    let occupancy = OccupancyMeasure::mix(&parts)?;
    let mixture = MixturePolicy::uniform(policies)?;
    PlannerSolution::from_occupancy(
        model,
        PlannedPolicy::Mixture(mixture),
        occupancy,
        PlannerStatus::Approximate,
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cmdp::TransitionTable;
    use crate::planners::basic_conplanner;

    fn model() -> BonusEnhancedModel {
        let p = TransitionTable::new(2, 2, vec![0.5, 0.5, 0.2, 0.8, 0.9, 0.1, 0.3, 0.7]).unwrap();
        let r = ObjectiveTable::new(2, 2, vec![0.1, 0.9, 0.2, 0.8]).unwrap();
        let c = ObjectiveTable::new(2, 2, vec![0.0, 1.0, 0.1, 0.9]).unwrap();
        BonusEnhancedModel::exact(p, r, vec![c])
    }

    #[test]
    fn unconstrained_single_iteration_is_greedy() {
        let m = model();
        let unconstrained = BonusEnhancedModel::exact(m.p.clone(), m.r_plus.clone(), vec![]);
        let sol =
            lagr_conplanner(&unconstrained, &[], 0, 3, &LagrConfig::new(0.2, 1).unwrap()).unwrap();
        let (v, _) = value_iteration(&m.p, &m.r_plus, 3).unwrap();
        assert!((sol.predicted_reward - v.v(0, 1)).abs() < 1e-12);
    }

    #[test]
    fn slack_budget_keeps_multiplier_at_zero() {
        let m = model();
        let sol = lagr_conplanner(&m, &[3.0], 0, 3, &LagrConfig::new(0.2, 5).unwrap()).unwrap();
        // every iterate is the unconstrained greedy policy, so the mixture collapses
        assert!(matches!(&sol.policy, PlannedPolicy::Mixture(mx) if mx.components().len() == 1));
    }

    #[test]
    fn binding_budget_approaches_lp() {
        let m = model();
        let lp = basic_conplanner(&m, &[0.8], 0, 3).unwrap();
        let sol = lagr_conplanner(&m, &[0.8], 0, 3, &LagrConfig::new(0.2, 500).unwrap()).unwrap();
        assert!((sol.predicted_reward - lp.predicted_reward).abs() <= 0.03);
        assert!(sol.predicted_consumption[0] - 0.8 <= 0.03);
    }

    #[test]
    fn rejects_bad_config() {
        assert!(LagrConfig::new(0.0, 3).is_err());
        assert!(LagrConfig::new(0.1, 0).is_err());
    }
}
