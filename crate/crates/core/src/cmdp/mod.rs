//! Tabular constrained MDPs.
//!
//! A [`Cmdp`] bundles a transition kernel, a reward table and `d` consumption
//! tables together with per-episode budgets. Policies are time dependent and
//! stochastic; stages are numbered `1..=H` and value tables carry an explicit
//! all-zero terminal layer at stage `H + 1`.
//!
//! Everything here is an immutable value once built. The dynamic-programming
//! routines live in [`dp`], occupancy-measure conversions in [`occupancy`].

pub mod dp;
pub mod occupancy;

pub use dp::{bellman_error_table, evaluate_policy, BellmanTable, ValueTables};
pub use occupancy::{
    expected_total, occupancy_from_policy, policy_from_occupancy, OccupancyMeasure,
};

use thiserror::Error;

/// Tolerance for "sums to one" checks on stored distributions.
pub const DISTRIBUTION_TOL: f64 = 1e-12;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum CmdpError {
    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("invalid distribution at {location}: {reason}")]
    Distribution { location: String, reason: String },

    #[error("value out of range at {location}: {value}")]
    OutOfRange { location: String, value: f64 },

    #[error("invalid model: {0}")]
    Invalid(String),
}

fn check_distribution(row: &[f64], location: impl FnOnce() -> String) -> Result<(), CmdpError> {
    let mut sum = 0.0;
    for &p in row {
        if !(p >= 0.0) || !p.is_finite() {
            return Err(CmdpError::Distribution {
                location: location(),
                reason: format!("entry {p} is negative or not finite"),
            });
        }
        sum += p;
    }
    if (sum - 1.0).abs() > DISTRIBUTION_TOL {
        return Err(CmdpError::Distribution {
            location: location(),
            reason: format!("sums to {sum}"),
        });
    }
    Ok(())
}

// ── Tables ──────────────────────────────────────────────────────────────

/// Transition kernel `p(s' | s, a)` stored densely as `[s][a][s']`.
#[derive(Debug, Clone, PartialEq)]
pub struct TransitionTable {
    states: usize,
    actions: usize,
    probs: Vec<f64>,
}

impl TransitionTable {
    /// Builds a kernel and checks that every row is a probability distribution.
    pub fn new(states: usize, actions: usize, probs: Vec<f64>) -> Result<Self, CmdpError> {
        let table = Self::new_unchecked(states, actions, probs)?;
        table.validate()?;
        Ok(table)
    }

    /// Builds a kernel checking only the shape. Rows are not validated.
    pub fn new_unchecked(
        states: usize,
        actions: usize,
        probs: Vec<f64>,
    ) -> Result<Self, CmdpError> {
        if states == 0 || actions == 0 {
            return Err(CmdpError::Dimension(
                "need at least one state and one action".into(),
            ));
        }
        if probs.len() != states * actions * states {
            return Err(CmdpError::Dimension(format!(
                "transition table has {} entries, expected {}",
                probs.len(),
                states * actions * states
            )));
        }
        Ok(Self {
            states,
            actions,
            probs,
        })
    }

    /// Uniform kernel over all states for every pair.
    pub fn uniform(states: usize, actions: usize) -> Self {
        let p = 1.0 / states as f64;
        Self {
            states,
            actions,
            probs: vec![p; states * actions * states],
        }
    }

    pub fn validate(&self) -> Result<(), CmdpError> {
        for s in 0..self.states {
            for a in 0..self.actions {
                check_distribution(self.row(s, a), || format!("p(.|s={s}, a={a})"))?;
            }
        }
        Ok(())
    }

    pub fn num_states(&self) -> usize {
        self.states
    }

    pub fn num_actions(&self) -> usize {
        self.actions
    }

    #[inline]
    pub fn row(&self, s: usize, a: usize) -> &[f64] {
        let start = (s * self.actions + a) * self.states;
        &self.probs[start..start + self.states]
    }

    #[inline]
    pub fn row_mut(&mut self, s: usize, a: usize) -> &mut [f64] {
        let start = (s * self.actions + a) * self.states;
        &mut self.probs[start..start + self.states]
    }

    #[inline]
    pub fn prob(&self, s: usize, a: usize, next: usize) -> f64 {
        self.probs[(s * self.actions + a) * self.states + next]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.probs
    }
}

/// A real-valued table over `(state, action)`: a reward, one resource's
/// consumption, or any derived objective (bonus-enhanced, pseudo-reward).
#[derive(Debug, Clone, PartialEq)]
pub struct ObjectiveTable {
    states: usize,
    actions: usize,
    values: Vec<f64>,
}

impl ObjectiveTable {
    pub fn new(states: usize, actions: usize, values: Vec<f64>) -> Result<Self, CmdpError> {
        if values.len() != states * actions {
            return Err(CmdpError::Dimension(format!(
                "objective table has {} entries, expected {}",
                values.len(),
                states * actions
            )));
        }
        if let Some(v) = values.iter().find(|v| !v.is_finite()) {
            return Err(CmdpError::OutOfRange {
                location: "objective table".into(),
                value: *v,
            });
        }
        Ok(Self {
            states,
            actions,
            values,
        })
    }

    pub fn constant(states: usize, actions: usize, value: f64) -> Self {
        Self {
            states,
            actions,
            values: vec![value; states * actions],
        }
    }

    pub fn zeros(states: usize, actions: usize) -> Self {
        Self::constant(states, actions, 0.0)
    }

    pub fn from_fn(states: usize, actions: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut values = Vec::with_capacity(states * actions);
        for s in 0..states {
            for a in 0..actions {
                values.push(f(s, a));
            }
        }
        Self {
            states,
            actions,
            values,
        }
    }

    pub fn num_states(&self) -> usize {
        self.states
    }

    pub fn num_actions(&self) -> usize {
        self.actions
    }

    #[inline]
    pub fn get(&self, s: usize, a: usize) -> f64 {
        self.values[s * self.actions + a]
    }

    #[inline]
    pub fn set(&mut self, s: usize, a: usize, value: f64) {
        self.values[s * self.actions + a] = value;
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.values
    }

    /// Entrywise `self + scale * other`.
    pub fn add_scaled(&self, other: &ObjectiveTable, scale: f64) -> ObjectiveTable {
        debug_assert_eq!(self.values.len(), other.values.len());
        let values = self
            .values
            .iter()
            .zip(&other.values)
            .map(|(x, y)| x + scale * y)
            .collect();
        ObjectiveTable {
            states: self.states,
            actions: self.actions,
            values,
        }
    }

    /// Entrywise `self + c`.
    pub fn shifted(&self, c: f64) -> ObjectiveTable {
        let values = self.values.iter().map(|x| x + c).collect();
        ObjectiveTable {
            states: self.states,
            actions: self.actions,
            values,
        }
    }

    pub(crate) fn check_in_unit_interval(&self, name: &str) -> Result<(), CmdpError> {
        for s in 0..self.states {
            for a in 0..self.actions {
                let v = self.get(s, a);
                if !(0.0..=1.0).contains(&v) {
                    return Err(CmdpError::OutOfRange {
                        location: format!("{name}(s={s}, a={a})"),
                        value: v,
                    });
                }
            }
        }
        Ok(())
    }

    fn check_shape(&self, states: usize, actions: usize, name: &str) -> Result<(), CmdpError> {
        if self.states != states || self.actions != actions {
            return Err(CmdpError::Dimension(format!(
                "{name} is {}x{}, expected {states}x{actions}",
                self.states, self.actions
            )));
        }
        Ok(())
    }
}

/// Which objective of a cMDP a quantity refers to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ObjectiveSelector {
    Reward,
    Resource(usize),
}

// ── Cmdp ────────────────────────────────────────────────────────────────

/// A finite-horizon tabular constrained MDP with a fixed initial state.
#[derive(Debug, Clone, PartialEq)]
pub struct Cmdp {
    horizon: usize,
    initial_state: usize,
    transitions: TransitionTable,
    rewards: ObjectiveTable,
    consumption: Vec<ObjectiveTable>,
    budgets: Vec<f64>,
}

impl Cmdp {
    /// Builds a cMDP, checking every invariant: kernel rows are
    /// distributions, rewards and consumptions lie in `[0, 1]`, budgets are
    /// nonnegative and the initial state is in range.
    pub fn new(
        horizon: usize,
        initial_state: usize,
        transitions: TransitionTable,
        rewards: ObjectiveTable,
        consumption: Vec<ObjectiveTable>,
        budgets: Vec<f64>,
    ) -> Result<Self, CmdpError> {
        let states = transitions.num_states();
        let actions = transitions.num_actions();
        if horizon == 0 {
            return Err(CmdpError::Invalid("horizon must be positive".into()));
        }
        if initial_state >= states {
            return Err(CmdpError::Invalid(format!(
                "initial state {initial_state} out of range for {states} states"
            )));
        }
        if consumption.len() != budgets.len() {
            return Err(CmdpError::Dimension(format!(
                "{} consumption tables but {} budgets",
                consumption.len(),
                budgets.len()
            )));
        }
        transitions.validate()?;
        rewards.check_shape(states, actions, "rewards")?;
        rewards.check_in_unit_interval("r")?;
        for (i, c) in consumption.iter().enumerate() {
            c.check_shape(states, actions, "consumption")?;
            c.check_in_unit_interval(&format!("c_{i}"))?;
        }
        if let Some((i, b)) = budgets
            .iter()
            .enumerate()
            .find(|(_, b)| !(**b >= 0.0) || !b.is_finite())
        {
            return Err(CmdpError::OutOfRange {
                location: format!("budget {i}"),
                value: *b,
            });
        }
        Ok(Self {
            horizon,
            initial_state,
            transitions,
            rewards,
            consumption,
            budgets,
        })
    }

    pub fn num_states(&self) -> usize {
        self.transitions.num_states()
    }

    pub fn num_actions(&self) -> usize {
        self.transitions.num_actions()
    }

    pub fn num_resources(&self) -> usize {
        self.consumption.len()
    }

    pub fn horizon(&self) -> usize {
        self.horizon
    }

    pub fn initial_state(&self) -> usize {
        self.initial_state
    }

    pub fn transitions(&self) -> &TransitionTable {
        &self.transitions
    }

    pub fn rewards(&self) -> &ObjectiveTable {
        &self.rewards
    }

    pub fn consumption(&self) -> &[ObjectiveTable] {
        &self.consumption
    }

    pub fn budgets(&self) -> &[f64] {
        &self.budgets
    }

    pub fn objective(&self, which: ObjectiveSelector) -> Result<&ObjectiveTable, CmdpError> {
        match which {
            ObjectiveSelector::Reward => Ok(&self.rewards),
            ObjectiveSelector::Resource(i) => self.consumption.get(i).ok_or_else(|| {
                CmdpError::Dimension(format!(
                    "resource {i} out of range for d = {}",
                    self.num_resources()
                ))
            }),
        }
    }

    /// Same dynamics and objectives with different budgets.
    pub fn with_budgets(&self, budgets: Vec<f64>) -> Result<Self, CmdpError> {
        Self::new(
            self.horizon,
            self.initial_state,
            self.transitions.clone(),
            self.rewards.clone(),
            self.consumption.clone(),
            budgets,
        )
    }

    /// Adds a null action (last action index) and an absorbing sink (last
    /// state index). The null action moves any state to the sink with zero
    /// reward and consumption; every action in the sink stays there.
    pub fn with_null_action(&self) -> Result<Self, CmdpError> {
        self.with_null_action_except(&[])
    }

    /// Like [`Cmdp::with_null_action`], but in each state of `absorbing` the
    /// null action behaves like action 0 instead of leaving for the sink, so
    /// an absorbed episode cannot be cut short.
    pub fn with_null_action_except(&self, absorbing: &[usize]) -> Result<Self, CmdpError> {
        let s_old = self.num_states();
        let a_old = self.num_actions();
        if let Some(&s) = absorbing.iter().find(|&&s| s >= s_old) {
            return Err(CmdpError::Invalid(format!(
                "absorbing state {s} out of range"
            )));
        }
        let (s_new, a_new) = (s_old + 1, a_old + 1);
        let sink = s_old;
        let source = |s: usize, a: usize| -> Option<(usize, usize)> {
            if s == sink {
                None
            } else if a < a_old {
                Some((s, a))
            } else if absorbing.contains(&s) {
                Some((s, 0))
            } else {
                None
            }
        };
        let mut probs = vec![0.0; s_new * a_new * s_new];
        for s in 0..s_new {
            for a in 0..a_new {
                let base = (s * a_new + a) * s_new;
                match source(s, a) {
                    Some((s_src, a_src)) => probs[base..base + s_old]
                        .copy_from_slice(self.transitions.row(s_src, a_src)),
                    None => probs[base + sink] = 1.0,
                }
            }
        }
        let extend = |t: &ObjectiveTable| {
            ObjectiveTable::from_fn(s_new, a_new, |s, a| {
                source(s, a).map_or(0.0, |(ss, aa)| t.get(ss, aa))
            })
        };
        Self::new(
            self.horizon,
            self.initial_state,
            TransitionTable::new(s_new, a_new, probs)?,
            extend(&self.rewards),
            self.consumption.iter().map(extend).collect(),
            self.budgets.clone(),
        )
    }
}

// ── Policies ────────────────────────────────────────────────────────────

/// Time-dependent stochastic policy `pi_h(a | s)` for `h = 1..=H`.
#[derive(Debug, Clone, PartialEq)]
pub struct Policy {
    horizon: usize,
    states: usize,
    actions: usize,
    probs: Vec<f64>,
}

impl Policy {
    /// Builds a policy from a dense `[h][s][a]` table (stage-major, `h` 0-based
    /// in storage) and validates every distribution.
    pub fn new(
        horizon: usize,
        states: usize,
        actions: usize,
        probs: Vec<f64>,
    ) -> Result<Self, CmdpError> {
        if horizon == 0 || states == 0 || actions == 0 {
            return Err(CmdpError::Dimension(
                "policy needs positive H, S and A".into(),
            ));
        }
        if probs.len() != horizon * states * actions {
            return Err(CmdpError::Dimension(format!(
                "policy has {} entries, expected {}",
                probs.len(),
                horizon * states * actions
            )));
        }
        let policy = Self {
            horizon,
            states,
            actions,
            probs,
        };
        for h in 1..=horizon {
            for s in 0..states {
                check_distribution(policy.distribution(h, s), || format!("pi_{h}(.|s={s})"))?;
            }
        }
        Ok(policy)
    }

    pub fn uniform(horizon: usize, states: usize, actions: usize) -> Self {
        let p = 1.0 / actions as f64;
        Self {
            horizon,
            states,
            actions,
            probs: vec![p; horizon * states * actions],
        }
    }

    /// Deterministic policy from `choice(h, s)` with `h` in `1..=H`.
    pub fn deterministic(
        horizon: usize,
        states: usize,
        actions: usize,
        mut choice: impl FnMut(usize, usize) -> usize,
    ) -> Self {
        let mut probs = vec![0.0; horizon * states * actions];
        for h in 1..=horizon {
            for s in 0..states {
                let a = choice(h, s);
                assert!(a < actions, "action {a} out of range");
                probs[((h - 1) * states + s) * actions + a] = 1.0;
            }
        }
        Self {
            horizon,
            states,
            actions,
            probs,
        }
    }

    pub fn horizon(&self) -> usize {
        self.horizon
    }

    pub fn num_states(&self) -> usize {
        self.states
    }

    pub fn num_actions(&self) -> usize {
        self.actions
    }

    /// Action distribution at stage `h` (1-based) in state `s`.
    #[inline]
    pub fn distribution(&self, h: usize, s: usize) -> &[f64] {
        let start = ((h - 1) * self.states + s) * self.actions;
        &self.probs[start..start + self.actions]
    }

    #[inline]
    pub fn prob(&self, h: usize, s: usize, a: usize) -> f64 {
        self.probs[((h - 1) * self.states + s) * self.actions + a]
    }

    /// `Some(a)` when stage `h`, state `s` puts all its mass on `a`.
    pub fn deterministic_action(&self, h: usize, s: usize) -> Option<usize> {
        let d = self.distribution(h, s);
        d.iter().position(|&p| p == 1.0)
    }

    /// Draws an action with a single uniform sample by inverse CDF.
    pub fn sample_action(&self, h: usize, s: usize, u: f64) -> usize {
        sample_index(self.distribution(h, s), u)
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.probs
    }

    pub(crate) fn check_shape(
        &self,
        horizon: usize,
        states: usize,
        actions: usize,
    ) -> Result<(), CmdpError> {
        if self.horizon != horizon || self.states != states || self.actions != actions {
            return Err(CmdpError::Dimension(format!(
                "policy is (H={}, S={}, A={}), expected (H={horizon}, S={states}, A={actions})",
                self.horizon, self.states, self.actions
            )));
        }
        Ok(())
    }
}

/// Inverse-CDF draw over a distribution. Falls back to the last positive
/// entry when rounding leaves `u` above the accumulated mass.
pub(crate) fn sample_index(dist: &[f64], u: f64) -> usize {
    let mut acc = 0.0;
    let mut last_positive = 0;
    for (i, &p) in dist.iter().enumerate() {
        if p > 0.0 {
            acc += p;
            last_positive = i;
            if u < acc {
                return i;
            }
        }
    }
    last_positive
}

/// Finite mixture of policies; one component is drawn per episode.
#[derive(Debug, Clone, PartialEq)]
pub struct MixturePolicy {
    components: Vec<(f64, Policy)>,
}

impl MixturePolicy {
    pub fn new(components: Vec<(f64, Policy)>) -> Result<Self, CmdpError> {
        if components.is_empty() {
            return Err(CmdpError::Invalid(
                "mixture needs at least one component".into(),
            ));
        }
        let first = &components[0].1;
        for (w, p) in &components {
            if !(*w >= 0.0) {
                return Err(CmdpError::OutOfRange {
                    location: "mixture weight".into(),
                    value: *w,
                });
            }
            p.check_shape(first.horizon, first.states, first.actions)?;
        }
        let total: f64 = components.iter().map(|(w, _)| w).sum();
        if (total - 1.0).abs() > DISTRIBUTION_TOL {
            return Err(CmdpError::Distribution {
                location: "mixture weights".into(),
                reason: format!("sum to {total}"),
            });
        }
        Ok(Self { components })
    }

    /// Uniform mixture; identical components are merged with summed weight.
    pub fn uniform(policies: Vec<Policy>) -> Result<Self, CmdpError> {
        let n = policies.len();
        if n == 0 {
            return Err(CmdpError::Invalid(
                "mixture needs at least one component".into(),
            ));
        }
        let mut merged: Vec<(usize, Policy)> = Vec::new();
        for p in policies {
            match merged.iter_mut().find(|(_, q)| *q == p) {
                Some((count, _)) => *count += 1,
                None => merged.push((1, p)),
            }
        }
        let components = merged
            .into_iter()
            .map(|(c, p)| (c as f64 / n as f64, p))
            .collect();
        Self::new(components)
    }

    pub fn components(&self) -> &[(f64, Policy)] {
        &self.components
    }

    pub fn sample_component(&self, u: f64) -> &Policy {
        let weights: Vec<f64> = self.components.iter().map(|(w, _)| *w).collect();
        &self.components[sample_index(&weights, u)].1
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn two_state() -> Cmdp {
        let p = TransitionTable::new(2, 2, vec![0.5, 0.5, 1.0, 0.0, 0.0, 1.0, 0.25, 0.75]).unwrap();
        let r = ObjectiveTable::new(2, 2, vec![0.1, 0.2, 0.3, 0.4]).unwrap();
        let c = ObjectiveTable::new(2, 2, vec![0.0, 1.0, 0.5, 0.5]).unwrap();
        Cmdp::new(3, 0, p, r, vec![c], vec![1.0]).unwrap()
    }

    #[test]
    fn rejects_bad_rows_and_ranges() {
        assert!(TransitionTable::new(2, 1, vec![0.5, 0.4, 1.0, 0.0]).is_err());
        assert!(TransitionTable::new(2, 1, vec![1.5, -0.5, 1.0, 0.0]).is_err());
        let p = TransitionTable::uniform(2, 1);
        let r = ObjectiveTable::new(2, 1, vec![0.0, 1.5]).unwrap();
        assert!(Cmdp::new(1, 0, p.clone(), r, vec![], vec![]).is_err());
        let r = ObjectiveTable::zeros(2, 1);
        assert!(Cmdp::new(1, 2, p.clone(), r.clone(), vec![], vec![]).is_err());
        assert!(Cmdp::new(1, 0, p, r, vec![], vec![1.0]).is_err());
    }

    #[test]
    fn null_action_extension() {
        let m = two_state().with_null_action().unwrap();
        assert_eq!(m.num_states(), 3);
        assert_eq!(m.num_actions(), 3);
        for s in 0..3 {
            assert_eq!(m.transitions().prob(s, 2, 2), 1.0);
            assert_eq!(m.rewards().get(s, 2), 0.0);
            assert_eq!(m.consumption()[0].get(s, 2), 0.0);
        }
        assert_eq!(m.transitions().row(1, 1), &[0.25, 0.75, 0.0]);
    }

    #[test]
    fn mixture_merges_duplicates() {
        let a = Policy::deterministic(2, 2, 2, |_, _| 0);
        let b = Policy::deterministic(2, 2, 2, |_, _| 1);
        let m = MixturePolicy::uniform(vec![a.clone(), b, a]).unwrap();
        assert_eq!(m.components().len(), 2);
        assert!((m.components()[0].0 - 2.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn inverse_cdf_sampling() {
        assert_eq!(sample_index(&[0.0, 1.0, 0.0], 0.999), 1);
        assert_eq!(sample_index(&[0.75, 0.25], 0.74), 0);
        assert_eq!(sample_index(&[0.75, 0.25], 0.76), 1);
        assert_eq!(sample_index(&[0.5, 0.5, 0.0], 1.0), 1);
    }
}
