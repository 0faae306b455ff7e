//! Finite-horizon policy evaluation and Bellman errors.

use super::{CmdpError, ObjectiveTable, Policy, TransitionTable};

/// `Q(s, a, h)` for `h = 1..=H` and `V(s, h)` for `h = 1..=H+1`, with the
/// terminal layer `V(., H+1)` identically zero.
#[derive(Debug, Clone, PartialEq)]
pub struct ValueTables {
    horizon: usize,
    states: usize,
    actions: usize,
    q: Vec<f64>,
    v: Vec<f64>,
}

impl ValueTables {
    pub(crate) fn zeros(horizon: usize, states: usize, actions: usize) -> Self {
        Self {
            horizon,
            states,
            actions,
            q: vec![0.0; horizon * states * actions],
            v: vec![0.0; (horizon + 1) * states],
        }
    }

    pub fn horizon(&self) -> usize {
        self.horizon
    }

    #[inline]
    pub fn q(&self, s: usize, a: usize, h: usize) -> f64 {
        self.q[((h - 1) * self.states + s) * self.actions + a]
    }

    #[inline]
    pub fn v(&self, s: usize, h: usize) -> f64 {
        self.v[(h - 1) * self.states + s]
    }

    #[inline]
    pub(crate) fn set_q(&mut self, s: usize, a: usize, h: usize, value: f64) {
        self.q[((h - 1) * self.states + s) * self.actions + a] = value;
    }

    #[inline]
    pub(crate) fn set_v(&mut self, s: usize, h: usize, value: f64) {
        self.v[(h - 1) * self.states + s] = value;
    }

    /// Value layer `V(., h)` as a slice.
    pub fn v_layer(&self, h: usize) -> &[f64] {
        &self.v[(h - 1) * self.states..h * self.states]
    }
}

pub(crate) fn check_tables(p: &TransitionTable, m: &ObjectiveTable) -> Result<(), CmdpError> {
    if p.num_states() != m.num_states() || p.num_actions() != m.num_actions() {
        return Err(CmdpError::Dimension(format!(
            "transitions are {}x{}, objective is {}x{}",
            p.num_states(),
            p.num_actions(),
            m.num_states(),
            m.num_actions()
        )));
    }
    Ok(())
}

#[inline]
pub(crate) fn expect_next(row: &[f64], next_v: &[f64]) -> f64 {
    row.iter().zip(next_v).map(|(p, v)| p * v).sum()
}

/// Backward recursion `Q(s,a,h) = m(s,a) + sum_s' p(s'|s,a) V(s',h+1)`,
/// `V(s,h) = E_{a ~ pi_h(s)} Q(s,a,h)`, `V(., H+1) = 0`.
///
/// `m` may hold any finite values (bonus-enhanced objectives leave `[0, 1]`).
pub fn evaluate_policy(
    p: &TransitionTable,
    m: &ObjectiveTable,
    policy: &Policy,
    horizon: usize,
) -> Result<ValueTables, CmdpError> {
    check_tables(p, m)?;
    let (ns, na) = (p.num_states(), p.num_actions());
    policy.check_shape(horizon, ns, na)?;
    let mut out = ValueTables::zeros(horizon, ns, na);
    for h in (1..=horizon).rev() {
        for s in 0..ns {
            let dist = policy.distribution(h, s);
            let mut v = 0.0;
            for a in 0..na {
                let q = m.get(s, a) + expect_next(p.row(s, a), out.v_layer(h + 1));
                out.set_q(s, a, h, q);
                v += dist[a] * q;
            }
            out.set_v(s, h, v);
        }
    }
    Ok(out)
}

/// Per-stage Bellman errors `Bell(s, a, h)`, stored `[h][s][a]`.
#[derive(Debug, Clone, PartialEq)]
pub struct BellmanTable {
    horizon: usize,
    states: usize,
    actions: usize,
    values: Vec<f64>,
}

impl BellmanTable {
    #[inline]
    pub fn get(&self, s: usize, a: usize, h: usize) -> f64 {
        self.values[((h - 1) * self.states + s) * self.actions + a]
    }

    pub fn horizon(&self) -> usize {
        self.horizon
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |acc, x| acc.max(x.abs()))
    }
}

/// `Bell(s,a,h) = Q_m^{pi,p}(s,a,h) - (m*(s,a) + sum_s' p*(s'|s,a) V_m^{pi,p}(s',h+1))`
/// where `Q`, `V` are evaluated on the model pair `(model_p, model_m)`.
pub fn bellman_error_table(
    model_p: &TransitionTable,
    model_m: &ObjectiveTable,
    true_p: &TransitionTable,
    true_m: &ObjectiveTable,
    policy: &Policy,
    horizon: usize,
) -> Result<BellmanTable, CmdpError> {
    check_tables(model_p, model_m)?;
    check_tables(true_p, true_m)?;
    check_tables(model_p, true_m)?;
    if model_p.num_states() != true_p.num_states() {
        return Err(CmdpError::Dimension(
            "model and true kernels differ in state count".into(),
        ));
    }
    let vals = evaluate_policy(model_p, model_m, policy, horizon)?;
    let (ns, na) = (model_p.num_states(), model_p.num_actions());
    let mut values = Vec::with_capacity(horizon * ns * na);
    for h in 1..=horizon {
        let next = vals.v_layer(h + 1);
        for s in 0..ns {
            for a in 0..na {
                let backup = true_m.get(s, a) + expect_next(true_p.row(s, a), next);
                values.push(vals.q(s, a, h) - backup);
            }
        }
    }
    Ok(BellmanTable {
        horizon,
        states: ns,
        actions: na,
        values,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn chain() -> (TransitionTable, ObjectiveTable) {
        let p = TransitionTable::new(2, 2, vec![0.3, 0.7, 1.0, 0.0, 0.6, 0.4, 0.0, 1.0]).unwrap();
        let m = ObjectiveTable::new(2, 2, vec![0.2, 0.9, 0.5, 0.1]).unwrap();
        (p, m)
    }

    #[test]
    fn single_state_self_loop() {
        let p = TransitionTable::new(1, 1, vec![1.0]).unwrap();
        let m = ObjectiveTable::constant(1, 1, 1.0);
        let v = evaluate_policy(&p, &m, &Policy::uniform(2, 1, 1), 2).unwrap();
        assert_eq!(v.v(0, 1), 2.0);
        assert_eq!(v.v(0, 3), 0.0);
    }

    #[test]
    fn zero_objective_gives_zero_values() {
        let (p, _) = chain();
        let v = evaluate_policy(
            &p,
            &ObjectiveTable::zeros(2, 2),
            &Policy::uniform(4, 2, 2),
            4,
        )
        .unwrap();
        for h in 1..=4 {
            for s in 0..2 {
                assert_eq!(v.v(s, h), 0.0);
                assert_eq!(v.q(s, 1, h), 0.0);
            }
        }
    }

    #[test]
    fn shape_mismatch_is_structural_error() {
        let (p, _) = chain();
        let m = ObjectiveTable::zeros(3, 2);
        assert!(matches!(
            evaluate_policy(&p, &m, &Policy::uniform(2, 2, 2), 2),
            Err(CmdpError::Dimension(_))
        ));
        let (_, m) = chain();
        assert!(evaluate_policy(&p, &m, &Policy::uniform(3, 2, 2), 2).is_err());
    }

    #[test]
    fn bellman_error_vanishes_on_truth() {
        let (p, m) = chain();
        let b = bellman_error_table(&p, &m, &p, &m, &Policy::uniform(3, 2, 2), 3).unwrap();
        assert_eq!(b.max_abs(), 0.0);
    }

    #[test]
    fn bellman_error_of_constant_shift() {
        let (p, m) = chain();
        let kappa = 0.37;
        let shifted = m.shifted(kappa);
        let b = bellman_error_table(&p, &shifted, &p, &m, &Policy::uniform(3, 2, 2), 3).unwrap();
        for h in 1..=3 {
            for s in 0..2 {
                for a in 0..2 {
                    assert!((b.get(s, a, h) - kappa).abs() < 1e-14);
                }
            }
        }
    }
}
