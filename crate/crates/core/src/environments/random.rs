//! Seeded random cMDPs for tests and benchmarks.

use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::cmdp::occupancy::policy_total;
use crate::cmdp::{Cmdp, ObjectiveTable, Policy, TransitionTable};

use super::EnvError;

/// A random cMDP with initial state 0. Each transition row puts normalised
/// weights from `(0.05, 1]` on a uniformly chosen support of `sparsity`
/// states; rewards and consumptions are uniform on `[0, 1]`. Budget `i` is
/// the uniform policy's expected consumption scaled by a factor drawn from
/// `[1, 1.5)` (capped at `H`), so the uniform policy is always feasible.
pub fn build_random_cmdp(
    seed: u64,
    states: usize,
    actions: usize,
    horizon: usize,
    resources: usize,
    sparsity: usize,
) -> Result<Cmdp, EnvError> {
    if states == 0 || actions == 0 || horizon == 0 {
        return Err(EnvError::Config("sizes must be positive".into()));
    }
    if sparsity == 0 || sparsity > states {
        return Err(EnvError::Config(format!(
            "support size {sparsity} must lie in 1..={states}"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut probs = vec![0.0; states * actions * states];
    for row in probs.chunks_mut(states) {
        let support = sample(&mut rng, states, sparsity);
        let weights: Vec<f64> = (0..sparsity).map(|_| rng.gen_range(0.05..=1.0)).collect();
        let total: f64 = weights.iter().sum();
        for (next, w) in support.iter().zip(weights) {
            row[next] = w / total;
        }
    }
    let p = TransitionTable::new(states, actions, probs)?;
    let r = ObjectiveTable::from_fn(states, actions, |_, _| rng.gen::<f64>());
    let c: Vec<ObjectiveTable> = (0..resources)
        .map(|_| ObjectiveTable::from_fn(states, actions, |_, _| rng.gen::<f64>()))
        .collect();
    let uniform = Policy::uniform(horizon, states, actions);
    let mut budgets = Vec::with_capacity(resources);
    for table in &c {
        let used = policy_total(&p, table, &uniform, 0, horizon)?;
        budgets.push((used * (1.0 + 0.5 * rng.gen::<f64>())).min(horizon as f64));
    }
    Ok(Cmdp::new(horizon, 0, p, r, c, budgets)?)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn deterministic_in_seed() {
        let a = build_random_cmdp(5, 4, 3, 3, 2, 2).unwrap();
        let b = build_random_cmdp(5, 4, 3, 3, 2, 2).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, build_random_cmdp(6, 4, 3, 3, 2, 2).unwrap());
    }

    #[test]
    fn dense_rows_when_sparsity_is_full() {
        let m = build_random_cmdp(1, 3, 2, 2, 0, 3).unwrap();
        assert!(m.transitions().as_slice().iter().all(|&p| p > 0.0));
    }

    #[test]
    fn uniform_policy_is_feasible() {
        for seed in 0..20 {
            let m = build_random_cmdp(seed, 3, 2, 4, 2, 2).unwrap();
            let uniform = Policy::uniform(4, 3, 2);
            for (c, b) in m.consumption().iter().zip(m.budgets()) {
                assert!(policy_total(m.transitions(), c, &uniform, 0, 4).unwrap() <= *b + 1e-12);
            }
        }
    }
}
