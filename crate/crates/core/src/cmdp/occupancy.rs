//! Occupancy measures `rho(s, a, h)`: the probability of being at `(s, a)` at
//! stage `h` when a policy runs from the initial state.

use super::dp::check_tables;
use super::{CmdpError, ObjectiveTable, Policy, TransitionTable};

/// Stage-indexed state-action distribution, stored `[h][s][a]`.
#[derive(Debug, Clone, PartialEq)]
pub struct OccupancyMeasure {
    horizon: usize,
    states: usize,
    actions: usize,
    rho: Vec<f64>,
}

impl OccupancyMeasure {
    /// Wraps a raw `[h][s][a]` table. Only the shape is checked; see
    /// [`OccupancyMeasure::check_invariants`] for the flow conditions.
    pub fn from_raw(
        horizon: usize,
        states: usize,
        actions: usize,
        rho: Vec<f64>,
    ) -> Result<Self, CmdpError> {
        if rho.len() != horizon * states * actions {
            return Err(CmdpError::Dimension(format!(
                "occupancy has {} entries, expected {}",
                rho.len(),
                horizon * states * actions
            )));
        }
        Ok(Self {
            horizon,
            states,
            actions,
            rho,
        })
    }

    pub(crate) fn zeros(horizon: usize, states: usize, actions: usize) -> Self {
        Self {
            horizon,
            states,
            actions,
            rho: vec![0.0; horizon * states * actions],
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

    #[inline]
    pub fn get(&self, s: usize, a: usize, h: usize) -> f64 {
        self.rho[((h - 1) * self.states + s) * self.actions + a]
    }

    #[inline]
    pub(crate) fn add(&mut self, s: usize, a: usize, h: usize, x: f64) {
        self.rho[((h - 1) * self.states + s) * self.actions + a] += x;
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.rho
    }

    /// State marginal `sum_a rho(s, a, h)`.
    pub fn state_mass(&self, s: usize, h: usize) -> f64 {
        let start = ((h - 1) * self.states + s) * self.actions;
        self.rho[start..start + self.actions].iter().sum()
    }

    /// Convex combination `sum_j w_j rho_j`.
    pub fn mix(parts: &[(f64, &OccupancyMeasure)]) -> Result<Self, CmdpError> {
        let first = parts
            .first()
            .ok_or_else(|| CmdpError::Invalid("cannot mix an empty list of occupancies".into()))?
            .1;
        let mut out = Self::zeros(first.horizon, first.states, first.actions);
        for (w, part) in parts {
            if part.rho.len() != out.rho.len() {
                return Err(CmdpError::Dimension("occupancies differ in shape".into()));
            }
            for (o, x) in out.rho.iter_mut().zip(&part.rho) {
                *o += w * x;
            }
        }
        Ok(out)
    }

    /// Checks range, per-stage normalisation, flow conservation under `p`
    /// and the initial-state restriction, all within `tol`.
    pub fn check_invariants(
        &self,
        p: &TransitionTable,
        s0: usize,
        tol: f64,
    ) -> Result<(), CmdpError> {
        if p.num_states() != self.states || p.num_actions() != self.actions {
            return Err(CmdpError::Dimension(
                "occupancy and kernel differ in shape".into(),
            ));
        }
        let bad = |what: String| Err(CmdpError::Invalid(what));
        for (idx, &x) in self.rho.iter().enumerate() {
            if x < -tol || x > 1.0 + tol {
                return bad(format!("rho entry {idx} = {x} outside [0,1]"));
            }
        }
        for h in 1..=self.horizon {
            let total: f64 = (0..self.states).map(|s| self.state_mass(s, h)).sum();
            if (total - 1.0).abs() > tol {
                return bad(format!("stage {h} mass is {total}"));
            }
        }
        for s in 0..self.states {
            if s != s0 && self.state_mass(s, 1).abs() > tol {
                return bad(format!("stage-1 mass on non-initial state {s}"));
            }
        }
        for h in 1..self.horizon {
            for next in 0..self.states {
                let inflow: f64 = (0..self.states)
                    .flat_map(|s| (0..self.actions).map(move |a| (s, a)))
                    .map(|(s, a)| self.get(s, a, h) * p.prob(s, a, next))
                    .sum();
                let here = self.state_mass(next, h + 1);
                if (inflow - here).abs() > tol {
                    return bad(format!(
                        "flow violated at s'={next}, h={}: {here} vs {inflow}",
                        h + 1
                    ));
                }
            }
        }
        Ok(())
    }
}

/// Forward recursion: `rho(s,a,1) = 1{s = s0} pi_1(a|s)` and
/// `rho(s',a',h+1) = pi_{h+1}(a'|s') sum_{s,a} rho(s,a,h) p(s'|s,a)`.
pub fn occupancy_from_policy(
    p: &TransitionTable,
    policy: &Policy,
    s0: usize,
    horizon: usize,
) -> Result<OccupancyMeasure, CmdpError> {
    let (ns, na) = (p.num_states(), p.num_actions());
    policy.check_shape(horizon, ns, na)?;
    if s0 >= ns {
        return Err(CmdpError::Invalid(format!(
            "initial state {s0} out of range"
        )));
    }
    let mut out = OccupancyMeasure::zeros(horizon, ns, na);
    let mut state_dist = vec![0.0; ns];
    state_dist[s0] = 1.0;
    let mut next_dist = vec![0.0; ns];
    for h in 1..=horizon {
        next_dist.iter_mut().for_each(|x| *x = 0.0);
        for s in 0..ns {
            let mass = state_dist[s];
            if mass == 0.0 {
                continue;
            }
            let dist = policy.distribution(h, s);
            for a in 0..na {
                let x = mass * dist[a];
                if x == 0.0 {
                    continue;
                }
                out.add(s, a, h, x);
                for (nd, pr) in next_dist.iter_mut().zip(p.row(s, a)) {
                    *nd += x * pr;
                }
            }
        }
        std::mem::swap(&mut state_dist, &mut next_dist);
    }
    Ok(out)
}

/// `pi_h(a|s) = rho(s,a,h) / sum_a rho(s,a,h)`, uniform where the state has
/// no mass at stage `h`.
pub fn policy_from_occupancy(rho: &OccupancyMeasure) -> Result<Policy, CmdpError> {
    let (hz, ns, na) = (rho.horizon, rho.states, rho.actions);
    let mut probs = Vec::with_capacity(hz * ns * na);
    for h in 1..=hz {
        for s in 0..ns {
            let row: Vec<f64> = (0..na).map(|a| rho.get(s, a, h)).collect();
            if let Some(x) = row.iter().find(|x| !(**x >= 0.0)) {
                return Err(CmdpError::OutOfRange {
                    location: format!("rho(s={s}, h={h})"),
                    value: *x,
                });
            }
            let total: f64 = row.iter().sum();
            if total > 0.0 {
                probs.extend(row.iter().map(|x| x / total));
            } else {
                probs.extend(std::iter::repeat(1.0 / na as f64).take(na));
            }
        }
    }
    // Row division can leave sums a few ulps from one; renormalising keeps the
    // validated constructor happy without changing the policy.
    for chunk in probs.chunks_mut(na) {
        let t: f64 = chunk.iter().sum();
        chunk.iter_mut().for_each(|x| *x /= t);
    }
    Policy::new(hz, ns, na, probs)
}

/// `sum_{s,a,h} rho(s,a,h) m(s,a)`.
pub fn expected_total(rho: &OccupancyMeasure, m: &ObjectiveTable) -> Result<f64, CmdpError> {
    if m.num_states() != rho.states || m.num_actions() != rho.actions {
        return Err(CmdpError::Dimension(
            "objective and occupancy differ in shape".into(),
        ));
    }
    let per_pair = m.as_slice();
    Ok(rho
        .rho
        .chunks(per_pair.len())
        .map(|stage| stage.iter().zip(per_pair).map(|(x, y)| x * y).sum::<f64>())
        .sum())
}

/// Convenience: `expected_total` of the occupancy of `policy` under `p`.
pub fn policy_total(
    p: &TransitionTable,
    m: &ObjectiveTable,
    policy: &Policy,
    s0: usize,
    horizon: usize,
) -> Result<f64, CmdpError> {
    check_tables(p, m)?;
    expected_total(&occupancy_from_policy(p, policy, s0, horizon)?, m)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_state_occupancy_is_policy() {
        let p = TransitionTable::new(1, 2, vec![1.0, 1.0]).unwrap();
        let pi = Policy::new(2, 1, 2, vec![0.3, 0.7, 0.9, 0.1]).unwrap();
        let rho = occupancy_from_policy(&p, &pi, 0, 2).unwrap();
        assert_eq!(rho.get(0, 0, 1), 0.3);
        assert_eq!(rho.get(0, 1, 2), 0.1);
    }

    #[test]
    fn deterministic_chain_is_indicator() {
        // action 0 stays, action 1 moves to the other state
        let p = TransitionTable::new(2, 2, vec![1.0, 0.0, 0.0, 1.0, 0.0, 1.0, 1.0, 0.0]).unwrap();
        let pi = Policy::deterministic(3, 2, 2, |h, _| if h == 1 { 1 } else { 0 });
        let rho = occupancy_from_policy(&p, &pi, 0, 3).unwrap();
        assert_eq!(rho.get(0, 1, 1), 1.0);
        assert_eq!(rho.get(1, 0, 2), 1.0);
        assert_eq!(rho.get(1, 0, 3), 1.0);
        let total: f64 = rho.as_slice().iter().sum();
        assert_eq!(total, 3.0);
        rho.check_invariants(&p, 0, 1e-12).unwrap();
    }

    #[test]
    fn zero_mass_falls_back_to_uniform() {
        let p = TransitionTable::new(2, 2, vec![1.0, 0.0, 1.0, 0.0, 0.0, 1.0, 0.0, 1.0]).unwrap();
        let pi = Policy::deterministic(2, 2, 2, |_, _| 1);
        let rho = occupancy_from_policy(&p, &pi, 0, 2).unwrap();
        let back = policy_from_occupancy(&rho).unwrap();
        assert_eq!(back.distribution(1, 1), &[0.5, 0.5]);
        assert_eq!(back.distribution(2, 0), &[0.0, 1.0]);
    }

    #[test]
    fn negative_entries_rejected() {
        let rho = OccupancyMeasure::from_raw(1, 1, 2, vec![1.5, -0.5]).unwrap();
        assert!(policy_from_occupancy(&rho).is_err());
    }

    #[test]
    fn expected_total_constant_objectives() {
        let p = TransitionTable::uniform(3, 2);
        let rho = occupancy_from_policy(&p, &Policy::uniform(4, 3, 2), 1, 4).unwrap();
        assert_eq!(
            expected_total(&rho, &ObjectiveTable::zeros(3, 2)).unwrap(),
            0.0
        );
        let ones = expected_total(&rho, &ObjectiveTable::constant(3, 2, 1.0)).unwrap();
        assert!((ones - 4.0).abs() < 1e-12);
    }
}
