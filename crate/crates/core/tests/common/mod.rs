#![allow(dead_code)]

use conrl::cmdp::occupancy::policy_total;
use conrl::cmdp::{Cmdp, ObjectiveTable, Policy, TransitionTable};
use conrl::environments::build_random_cmdp;
use conrl::planners::value_iteration;
use rand::Rng;

pub fn random_policy<R: Rng>(rng: &mut R, horizon: usize, states: usize, actions: usize) -> Policy {
    let mut probs = Vec::with_capacity(horizon * states * actions);
    for _ in 0..horizon * states {
        let w: Vec<f64> = (0..actions).map(|_| rng.gen_range(0.0..1.0f64)).collect();
        let total: f64 = w.iter().sum();
        probs.extend(w.iter().map(|x| x / total));
    }
    Policy::new(horizon, states, actions, probs).unwrap()
}

pub fn random_kernel<R: Rng>(rng: &mut R, states: usize, actions: usize) -> TransitionTable {
    let mut probs = Vec::with_capacity(states * actions * states);
    for _ in 0..states * actions {
        let w: Vec<f64> = (0..states).map(|_| rng.gen_range(0.01..1.0f64)).collect();
        let total: f64 = w.iter().sum();
        probs.extend(w.iter().map(|x| x / total));
    }
    TransitionTable::new(states, actions, probs).unwrap()
}

pub fn random_table<R: Rng>(
    rng: &mut R,
    states: usize,
    actions: usize,
    lo: f64,
    hi: f64,
) -> ObjectiveTable {
    ObjectiveTable::from_fn(states, actions, |_, _| rng.gen_range(lo..hi))
}

/// Random cMDP whose single budget lies halfway between the least
/// achievable consumption and the consumption of the unconstrained optimum,
/// so the constraint binds whenever the two differ.
pub fn binding_instance(seed: u64, states: usize, actions: usize, horizon: usize) -> Cmdp {
    let base = build_random_cmdp(seed, states, actions, horizon, 1, states).unwrap();
    let p = base.transitions();
    let c = &base.consumption()[0];
    let (_, greedy) = value_iteration(p, base.rewards(), horizon).unwrap();
    let c_greedy = policy_total(p, c, &greedy, 0, horizon).unwrap();
    let neg_c = ObjectiveTable::zeros(states, actions).add_scaled(c, -1.0);
    let (_, frugal) = value_iteration(p, &neg_c, horizon).unwrap();
    let c_min = policy_total(p, c, &frugal, 0, horizon).unwrap();
    base.with_budgets(vec![0.5 * (c_min + c_greedy)]).unwrap()
}
