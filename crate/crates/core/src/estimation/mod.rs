//! Online sufficient statistics, the plug-in empirical model and the clipped
//! exploration bonus.
//!
//! The bonus for a pair visited `N` times before episode `k` is
//!
//! ```text
//! b_k(s,a) = min{ 2H, H * sqrt( 2 ln(8 S A H (d+1) k^2 / delta) / max{1, N} ) }
//! ```
//!
//! and the bonus-enhanced model adds it to the empirical reward and subtracts
//! it from every empirical consumption, without clipping either side.

mod snapshot;

pub use snapshot::SnapshotError;

use crate::cmdp::{evaluate_policy, Cmdp, CmdpError, ObjectiveTable, Policy, TransitionTable};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EstimationError {
    #[error("index out of range: {0}")]
    Index(String),

    #[error("observed {what} = {value} outside [0, 1]")]
    ObservationRange { what: String, value: f64 },

    #[error("invalid bonus configuration: {0}")]
    Config(String),

    #[error(transparent)]
    Model(#[from] CmdpError),
}

// ── Counts ──────────────────────────────────────────────────────────────

/// Visit counts and observation sums per `(s, a)`.
#[derive(Debug, Clone, PartialEq)]
pub struct Counts {
    states: usize,
    actions: usize,
    resources: usize,
    visits: Vec<u64>,
    transitions: Vec<u64>,
    reward_sum: Vec<f64>,
    consumption_sum: Vec<f64>,
    episodes_seen: u64,
}

impl Counts {
    pub fn new(states: usize, actions: usize, resources: usize) -> Self {
        Self {
            states,
            actions,
            resources,
            visits: vec![0; states * actions],
            transitions: vec![0; states * actions * states],
            reward_sum: vec![0.0; states * actions],
            consumption_sum: vec![0.0; states * actions * resources],
            episodes_seen: 0,
        }
    }

    pub fn num_states(&self) -> usize {
        self.states
    }

    pub fn num_actions(&self) -> usize {
        self.actions
    }

    pub fn num_resources(&self) -> usize {
        self.resources
    }

    /// Raw visit count, before the `max{1, N}` guard.
    pub fn visits(&self, s: usize, a: usize) -> u64 {
        self.visits[s * self.actions + a]
    }

    pub fn transition_count(&self, s: usize, a: usize, next: usize) -> u64 {
        self.transitions[(s * self.actions + a) * self.states + next]
    }

    pub fn reward_sum(&self, s: usize, a: usize) -> f64 {
        self.reward_sum[s * self.actions + a]
    }

    pub fn consumption_sum(&self, s: usize, a: usize, i: usize) -> f64 {
        self.consumption_sum[(s * self.actions + a) * self.resources + i]
    }

    pub fn episodes_seen(&self) -> u64 {
        self.episodes_seen
    }

    pub fn total_visits(&self) -> u64 {
        self.visits.iter().sum()
    }

    /// Adds one observed transition.
    pub fn record_step(
        &mut self,
        s: usize,
        a: usize,
        reward: f64,
        consumption: &[f64],
        next: usize,
    ) -> Result<(), EstimationError> {
        if s >= self.states || next >= self.states || a >= self.actions {
            return Err(EstimationError::Index(format!(
                "(s={s}, a={a}, s'={next}) for S={}, A={}",
                self.states, self.actions
            )));
        }
        if consumption.len() != self.resources {
            return Err(EstimationError::Index(format!(
                "{} consumption values for d = {}",
                consumption.len(),
                self.resources
            )));
        }
        if !(0.0..=1.0).contains(&reward) {
            return Err(EstimationError::ObservationRange {
                what: "reward".into(),
                value: reward,
            });
        }
        if let Some((i, c)) = consumption
            .iter()
            .enumerate()
            .find(|(_, c)| !(0.0..=1.0).contains(*c))
        {
            return Err(EstimationError::ObservationRange {
                what: format!("consumption[{i}]"),
                value: *c,
            });
        }
        let pair = s * self.actions + a;
        self.visits[pair] += 1;
        self.transitions[pair * self.states + next] += 1;
        self.reward_sum[pair] += reward;
        for (i, c) in consumption.iter().enumerate() {
            self.consumption_sum[pair * self.resources + i] += c;
        }
        Ok(())
    }

    /// Marks the end of an episode.
    pub fn finish_episode(&mut self) {
        self.episodes_seen += 1;
    }
}

// ── Empirical model ─────────────────────────────────────────────────────

/// Plug-in estimates `p_hat`, `r_hat`, `c_hat`.
#[derive(Debug, Clone, PartialEq)]
pub struct EmpiricalModel {
    pub p_hat: TransitionTable,
    pub r_hat: ObjectiveTable,
    pub c_hat: Vec<ObjectiveTable>,
}

/// Empirical averages of the counts. Pairs never visited get `r_hat = 0`,
/// `c_hat = 0` and a uniform next-state distribution so that `p_hat` stays a
/// Markov kernel.
pub fn empirical_model(counts: &Counts) -> EmpiricalModel {
    let (ns, na, nd) = (counts.states, counts.actions, counts.resources);
    let mut probs = Vec::with_capacity(ns * na * ns);
    for s in 0..ns {
        for a in 0..na {
            let n = counts.visits(s, a);
            if n == 0 {
                probs.extend(std::iter::repeat(1.0 / ns as f64).take(ns));
            } else {
                let nf = n as f64;
                probs.extend((0..ns).map(|next| counts.transition_count(s, a, next) as f64 / nf));
            }
        }
    }
    let guard = |s: usize, a: usize| counts.visits(s, a).max(1) as f64;
    let r_hat = ObjectiveTable::from_fn(ns, na, |s, a| counts.reward_sum(s, a) / guard(s, a));
    let c_hat = (0..nd)
        .map(|i| {
            ObjectiveTable::from_fn(ns, na, |s, a| counts.consumption_sum(s, a, i) / guard(s, a))
        })
        .collect();
    let p_hat =
        TransitionTable::new_unchecked(ns, na, probs).expect("shape is consistent by construction");
    EmpiricalModel {
        p_hat,
        r_hat,
        c_hat,
    }
}

// ── Bonus ───────────────────────────────────────────────────────────────

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BonusConfig {
    pub delta: f64,
    pub states: usize,
    pub actions: usize,
    pub horizon: usize,
    pub resources: usize,
}

impl BonusConfig {
    pub fn new(
        delta: f64,
        states: usize,
        actions: usize,
        horizon: usize,
        resources: usize,
    ) -> Result<Self, EstimationError> {
        if !(delta > 0.0 && delta < 1.0) {
            return Err(EstimationError::Config(format!(
                "delta must lie in (0, 1), got {delta}"
            )));
        }
        if states == 0 || actions == 0 || horizon == 0 {
            return Err(EstimationError::Config(
                "S, A and H must be positive".into(),
            ));
        }
        Ok(Self {
            delta,
            states,
            actions,
            horizon,
            resources,
        })
    }

    /// Bonus for a pair with raw visit count `visits` at episode `k >= 1`.
    pub fn bonus(&self, visits: u64, k: u64) -> f64 {
        let h = self.horizon as f64;
        let kf = k as f64;
        let log_arg = 8.0
            * self.states as f64
            * self.actions as f64
            * h
            * (self.resources as f64 + 1.0)
            * kf
            * kf
            / self.delta;
        let n = visits.max(1) as f64;
        (h * (2.0 * log_arg.ln() / n).sqrt()).min(2.0 * h)
    }
}

/// Exploration bonus per `(s, a)`, every entry in `[0, 2H]`.
#[derive(Debug, Clone, PartialEq)]
pub struct BonusTable(ObjectiveTable);

impl BonusTable {
    pub fn zeros(states: usize, actions: usize) -> Self {
        Self(ObjectiveTable::zeros(states, actions))
    }

    pub fn from_table(table: ObjectiveTable) -> Self {
        Self(table)
    }

    pub fn table(&self) -> &ObjectiveTable {
        &self.0
    }

    pub fn get(&self, s: usize, a: usize) -> f64 {
        self.0.get(s, a)
    }
}

/// Bonus table for episode `k` (1-based) from counts gathered before it.
pub fn compute_bonus(
    counts: &Counts,
    k: u64,
    cfg: &BonusConfig,
) -> Result<BonusTable, EstimationError> {
    if k == 0 {
        return Err(EstimationError::Config(
            "episode index k must be at least 1".into(),
        ));
    }
    if cfg.states != counts.states
        || cfg.actions != counts.actions
        || cfg.resources != counts.resources
    {
        return Err(EstimationError::Config(
            "bonus configuration does not match the counts' shape".into(),
        ));
    }
    Ok(BonusTable(ObjectiveTable::from_fn(
        counts.states,
        counts.actions,
        |s, a| cfg.bonus(counts.visits(s, a), k),
    )))
}

/// Optimistic model `(p_hat, r_hat + b, c_hat - b)`.
#[derive(Debug, Clone, PartialEq)]
pub struct BonusEnhancedModel {
    pub p: TransitionTable,
    pub r_plus: ObjectiveTable,
    pub c_minus: Vec<ObjectiveTable>,
    pub bonus: BonusTable,
}

impl BonusEnhancedModel {
    /// Zero-bonus model straight from known tables (used for planning on the
    /// true cMDP).
    pub fn exact(p: TransitionTable, r: ObjectiveTable, c: Vec<ObjectiveTable>) -> Self {
        let bonus = BonusTable::zeros(p.num_states(), p.num_actions());
        Self {
            p,
            r_plus: r,
            c_minus: c,
            bonus,
        }
    }

    pub fn from_cmdp(cmdp: &Cmdp) -> Self {
        Self::exact(
            cmdp.transitions().clone(),
            cmdp.rewards().clone(),
            cmdp.consumption().to_vec(),
        )
    }

    pub fn num_states(&self) -> usize {
        self.p.num_states()
    }

    pub fn num_actions(&self) -> usize {
        self.p.num_actions()
    }

    pub fn num_resources(&self) -> usize {
        self.c_minus.len()
    }

    /// `r_hat`, recovered as `r_plus - b`.
    pub fn r_hat(&self) -> ObjectiveTable {
        self.r_plus.add_scaled(self.bonus.table(), -1.0)
    }

    /// `c_hat_i`, recovered as `c_minus_i + b`.
    pub fn c_hat(&self, i: usize) -> ObjectiveTable {
        self.c_minus[i].add_scaled(self.bonus.table(), 1.0)
    }
}

pub fn bonus_enhanced_model(
    emp: &EmpiricalModel,
    b: &BonusTable,
) -> Result<BonusEnhancedModel, EstimationError> {
    let (ns, na) = (emp.p_hat.num_states(), emp.p_hat.num_actions());
    if b.0.num_states() != ns || b.0.num_actions() != na {
        return Err(EstimationError::Model(CmdpError::Dimension(
            "bonus table and empirical model differ in shape".into(),
        )));
    }
    Ok(BonusEnhancedModel {
        p: emp.p_hat.clone(),
        r_plus: emp.r_hat.add_scaled(&b.0, 1.0),
        c_minus: emp.c_hat.iter().map(|c| c.add_scaled(&b.0, -1.0)).collect(),
        bonus: b.clone(),
    })
}

/// Largest excess of `|(m_hat - m*)(s,a) + sum_s' (p_hat - p*)(s'|s,a) V_m*(s', h+1)|`
/// over `b(s,a)`, across all `(s, a, h)` and all objectives `m` in `{r, c_i}`,
/// where `V_m*` is the value of `policy` on the true cMDP. The bonus is
/// valid for this comparator exactly when the result is `<= 0`.
pub fn validity_excess(
    emp: &EmpiricalModel,
    bonus: &BonusTable,
    truth: &Cmdp,
    policy: &Policy,
) -> Result<f64, EstimationError> {
    let (ns, na, horizon) = (truth.num_states(), truth.num_actions(), truth.horizon());
    if emp.p_hat.num_states() != ns
        || emp.p_hat.num_actions() != na
        || emp.c_hat.len() != truth.num_resources()
    {
        return Err(EstimationError::Model(CmdpError::Dimension(
            "empirical model and truth differ in shape".into(),
        )));
    }
    let pairs = std::iter::once((&emp.r_hat, truth.rewards()))
        .chain(emp.c_hat.iter().zip(truth.consumption()));
    let mut worst = f64::NEG_INFINITY;
    for (m_hat, m_star) in pairs {
        let values = evaluate_policy(truth.transitions(), m_star, policy, horizon)?;
        for h in 1..=horizon {
            let next = values.v_layer(h + 1);
            for s in 0..ns {
                for a in 0..na {
                    let drift: f64 = emp
                        .p_hat
                        .row(s, a)
                        .iter()
                        .zip(truth.transitions().row(s, a))
                        .zip(next)
                        .map(|((ph, ps), v)| (ph - ps) * v)
                        .sum();
                    let gap = (m_hat.get(s, a) - m_star.get(s, a) + drift).abs();
                    worst = worst.max(gap - bonus.get(s, a));
                }
            }
        }
    }
    Ok(worst)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn first_step_counts() {
        let mut c = Counts::new(2, 2, 1);
        c.record_step(0, 1, 0.5, &[0.25], 1).unwrap();
        assert_eq!(c.visits(0, 1), 1);
        assert_eq!(c.transition_count(0, 1, 1), 1);
        c.record_step(0, 1, 0.5, &[0.25], 1).unwrap();
        assert_eq!(c.reward_sum(0, 1), 1.0);
        assert_eq!(c.consumption_sum(0, 1, 0), 0.5);
    }

    #[test]
    fn out_of_range_observations_rejected() {
        let mut c = Counts::new(2, 2, 1);
        assert!(matches!(
            c.record_step(0, 0, 1.2, &[0.0], 0),
            Err(EstimationError::ObservationRange { .. })
        ));
        assert!(c.record_step(0, 0, 0.2, &[-0.1], 0).is_err());
        assert!(c.record_step(0, 2, 0.2, &[0.1], 0).is_err());
        assert!(c.record_step(0, 0, 0.2, &[], 0).is_err());
        assert_eq!(c.total_visits(), 0);
    }

    #[test]
    fn empirical_ratios_and_defaults() {
        let mut c = Counts::new(3, 1, 0);
        for next in [1, 1, 1, 2] {
            c.record_step(0, 0, 1.0, &[], next).unwrap();
        }
        let emp = empirical_model(&c);
        assert_eq!(emp.p_hat.row(0, 0), &[0.0, 0.75, 0.25]);
        assert_eq!(emp.r_hat.get(0, 0), 1.0);
        assert_eq!(emp.p_hat.row(1, 0), &[1.0 / 3.0; 3]);
        assert_eq!(emp.r_hat.get(1, 0), 0.0);
        emp.p_hat.validate().unwrap();
    }

    #[test]
    fn bonus_enhancement_is_unclipped() {
        let c = Counts::new(2, 2, 1);
        let emp = empirical_model(&c);
        let cfg = BonusConfig::new(0.1, 2, 2, 3, 1).unwrap();
        let b = compute_bonus(&c, 1, &cfg).unwrap();
        assert_eq!(b.get(0, 0), 6.0);
        let m = bonus_enhanced_model(&emp, &b).unwrap();
        assert_eq!(m.r_plus.get(1, 1), 6.0);
        assert_eq!(m.c_minus[0].get(1, 1), -6.0);
        assert_eq!(m.r_hat(), emp.r_hat);
        assert_eq!(m.c_hat(0), emp.c_hat[0]);
    }

    #[test]
    fn zero_bonus_reproduces_empirical_model() {
        let mut c = Counts::new(2, 2, 1);
        c.record_step(1, 0, 0.3, &[0.6], 0).unwrap();
        let emp = empirical_model(&c);
        let m = bonus_enhanced_model(&emp, &BonusTable::zeros(2, 2)).unwrap();
        assert_eq!(m.r_plus, emp.r_hat);
        assert_eq!(m.c_minus, emp.c_hat);
        assert_eq!(m.p, emp.p_hat);
    }

    #[test]
    fn bonus_rejects_bad_inputs() {
        assert!(BonusConfig::new(0.0, 1, 1, 1, 0).is_err());
        assert!(BonusConfig::new(1.0, 1, 1, 1, 0).is_err());
        let cfg = BonusConfig::new(0.5, 1, 1, 1, 0).unwrap();
        assert!(compute_bonus(&Counts::new(1, 1, 0), 0, &cfg).is_err());
    }

    #[test]
    fn exact_estimates_have_no_excess() {
        let p = TransitionTable::new(2, 1, vec![0.5, 0.5, 0.1, 0.9]).unwrap();
        let r = ObjectiveTable::new(2, 1, vec![0.3, 0.6]).unwrap();
        let c = ObjectiveTable::new(2, 1, vec![0.2, 0.0]).unwrap();
        let truth = Cmdp::new(3, 0, p.clone(), r.clone(), vec![c.clone()], vec![1.0]).unwrap();
        let emp = EmpiricalModel {
            p_hat: p,
            r_hat: r,
            c_hat: vec![c],
        };
        let pi = Policy::uniform(3, 2, 1);
        assert_eq!(
            validity_excess(&emp, &BonusTable::zeros(2, 1), &truth, &pi).unwrap(),
            0.0
        );

        let shifted = EmpiricalModel {
            r_hat: emp.r_hat.shifted(0.25),
            ..emp.clone()
        };
        let b = BonusTable::from_table(ObjectiveTable::constant(2, 1, 0.2));
        assert!((validity_excess(&shifted, &b, &truth, &pi).unwrap() - 0.05).abs() < 1e-12);
    }
}
