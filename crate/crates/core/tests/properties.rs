mod common;

use conrl::cmdp::{
    bellman_error_table, evaluate_policy, expected_total, occupancy_from_policy,
    policy_from_occupancy, ObjectiveTable,
};
use conrl::environments::{
    build_mars_rover, build_random_cmdp, EnvConfig, GridMap, MapKind, MarsLayout, DEFAULT_MARS_MAP,
};
use conrl::estimation::{
    bonus_enhanced_model, compute_bonus, empirical_model, BonusConfig, BonusEnhancedModel, Counts,
};
use conrl::harness::{run_experiment, EnvKind, ExperimentConfig, PlannerKind};
use conrl::planners::{
    basic_conplanner, knapsack_conplanner, EpsilonMode, KnapsackConfig, LpStatus, PlannerStatus,
};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use common::{random_kernel, random_policy, random_table};

fn sizes() -> impl Strategy<Value = (usize, usize, usize, u64)> {
    (1usize..=4, 1usize..=3, 1usize..=6, any::<u64>())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn occupancy_invariants_and_round_trip((ns, na, horizon, seed) in sizes()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let p = random_kernel(&mut rng, ns, na);
        let pi = random_policy(&mut rng, horizon, ns, na);
        let s0 = rng.gen_range(0..ns);
        let rho = occupancy_from_policy(&p, &pi, s0, horizon).unwrap();
        rho.check_invariants(&p, s0, 1e-10).unwrap();
        let back = policy_from_occupancy(&rho).unwrap();
        for h in 1..=horizon {
            for s in 0..ns {
                if rho.state_mass(s, h) > 1e-9 {
                    for a in 0..na {
                        prop_assert!((back.prob(h, s, a) - pi.prob(h, s, a)).abs() < 1e-9);
                    }
                }
            }
        }
    }

    #[test]
    fn values_stay_in_range((ns, na, horizon, seed) in sizes()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let p = random_kernel(&mut rng, ns, na);
        let m = random_table(&mut rng, ns, na, 0.0, 1.0);
        let pi = random_policy(&mut rng, horizon, ns, na);
        let v = evaluate_policy(&p, &m, &pi, horizon).unwrap();
        let top = horizon as f64 + 1e-12;
        for h in 1..=horizon {
            for s in 0..ns {
                prop_assert!((-1e-12..=top).contains(&v.v(s, h)));
                let mean: f64 = (0..na).map(|a| pi.prob(h, s, a) * v.q(s, a, h)).sum();
                prop_assert!((mean - v.v(s, h)).abs() < 1e-12);
                for a in 0..na {
                    prop_assert!((-1e-12..=top).contains(&v.q(s, a, h)));
                }
            }
        }
        prop_assert!(v.v_layer(horizon + 1).iter().all(|&x| x == 0.0));
    }

    #[test]
    fn simulation_lemma((ns, na, horizon, seed) in sizes()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (true_p, model_p) = (random_kernel(&mut rng, ns, na), random_kernel(&mut rng, ns, na));
        let true_m = random_table(&mut rng, ns, na, 0.0, 1.0);
        let model_m = random_table(&mut rng, ns, na, -1.0, 3.0);
        let pi = random_policy(&mut rng, horizon, ns, na);
        let lhs = evaluate_policy(&model_p, &model_m, &pi, horizon).unwrap().v(0, 1)
            - evaluate_policy(&true_p, &true_m, &pi, horizon).unwrap().v(0, 1);
        let bell = bellman_error_table(&model_p, &model_m, &true_p, &true_m, &pi, horizon).unwrap();
        let rho = occupancy_from_policy(&true_p, &pi, 0, horizon).unwrap();
        let mut rhs = 0.0;
        for h in 1..=horizon {
            for s in 0..ns {
                for a in 0..na {
                    rhs += rho.get(s, a, h) * bell.get(s, a, h);
                }
            }
        }
        prop_assert!((lhs - rhs).abs() <= 1e-9);
    }

    #[test]
    fn bonus_range_and_monotonicity(
        delta in 0.001f64..0.999,
        (ns, na, horizon) in (1usize..10, 1usize..5, 1usize..40),
        k in 1u64..100_000,
        n in 0u64..10_000,
    ) {
        let cfg = BonusConfig::new(delta, ns, na, horizon, 1).unwrap();
        let (b, b_next) = (cfg.bonus(n, k), cfg.bonus(n + 1, k));
        prop_assert!(b >= 0.0 && b <= 2.0 * horizon as f64);
        prop_assert!(b_next <= b);
    }

    #[test]
    fn counts_and_enhanced_model((ns, na, horizon, seed) in sizes()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut counts = Counts::new(ns, na, 2);
        for _ in 0..rng.gen_range(0..60) {
            let (s, a, next) = (rng.gen_range(0..ns), rng.gen_range(0..na), rng.gen_range(0..ns));
            let obs = [rng.gen_range(0.0..=1.0), rng.gen_range(0.0..=1.0)];
            counts.record_step(s, a, rng.gen_range(0.0..=1.0), &obs, next).unwrap();
        }
        counts.finish_episode();
        for s in 0..ns {
            for a in 0..na {
                let n = counts.visits(s, a);
                prop_assert_eq!((0..ns).map(|t| counts.transition_count(s, a, t)).sum::<u64>(), n);
                prop_assert!(counts.reward_sum(s, a) <= n as f64);
                prop_assert!(counts.consumption_sum(s, a, 1) <= n as f64);
            }
        }
        let emp = empirical_model(&counts);
        emp.p_hat.validate().unwrap();
        let cfg = BonusConfig::new(0.1, ns, na, horizon, 2).unwrap();
        let bonus = compute_bonus(&counts, 2, &cfg).unwrap();
        let model = bonus_enhanced_model(&emp, &bonus).unwrap();
        for s in 0..ns {
            for a in 0..na {
                let b = bonus.get(s, a);
                prop_assert!((0.0..=1.0).contains(&emp.r_hat.get(s, a)));
                prop_assert!((model.r_plus.get(s, a) - emp.r_hat.get(s, a) - b).abs() < 1e-12);
                prop_assert!((emp.c_hat[0].get(s, a) - model.c_minus[0].get(s, a) - b).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn optimal_plans_respect_flow_and_budgets(seed in any::<u64>(), (ns, na, horizon, nd) in (1usize..=3, 1usize..=3, 1usize..=3, 0usize..=2)) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let model = BonusEnhancedModel::exact(
            random_kernel(&mut rng, ns, na),
            random_table(&mut rng, ns, na, 0.0, 1.0),
            (0..nd).map(|_| random_table(&mut rng, ns, na, 0.0, 1.0)).collect(),
        );
        let xi: Vec<f64> = (0..nd).map(|_| rng.gen_range(0.0..horizon as f64)).collect();
        if let Ok(sol) = basic_conplanner(&model, &xi, 0, horizon) {
            prop_assert_eq!(sol.status, PlannerStatus::Optimal);
            sol.occupancy.check_invariants(&model.p, 0, 1e-8).unwrap();
            for (i, x) in xi.iter().enumerate() {
                let used = expected_total(&sol.occupancy, &model.c_minus[i]).unwrap();
                prop_assert!(used <= x + 1e-8);
                prop_assert!((used - sol.predicted_consumption[i]).abs() <= 1e-8);
            }
            prop_assert!((expected_total(&sol.occupancy, &model.r_plus).unwrap() - sol.predicted_reward).abs() <= 1e-8);
        }
    }

    #[test]
    fn knapsack_objective_non_increasing_in_epsilon(seed in 0u64..1000, e1 in 0.0f64..1.0, e2 in 0.0f64..1.0) {
        let truth = build_random_cmdp(seed, 3, 2, 3, 1, 3).unwrap().with_null_action().unwrap();
        let model = BonusEnhancedModel::from_cmdp(&truth);
        let cfg = KnapsackConfig::new(vec![50.0], 100, EpsilonMode::Fixed(0.0)).unwrap();
        let (lo, hi) = if e1 <= e2 { (e1, e2) } else { (e2, e1) };
        let plan = |eps| knapsack_conplanner(&model, &cfg, eps, 2, 0, 3).unwrap().predicted_reward;
        prop_assert!(plan(hi) <= plan(lo) + 1e-9);
    }

    #[test]
    fn random_cmdps_are_valid(seed in any::<u64>(), (ns, na, horizon, nd) in (1usize..=6, 1usize..=4, 1usize..=6, 0usize..=3)) {
        let m = build_random_cmdp(seed, ns, na, horizon, nd, ns).unwrap();
        for s in 0..ns {
            for a in 0..na {
                prop_assert!((m.transitions().row(s, a).iter().sum::<f64>() - 1.0).abs() <= 1e-12);
            }
        }
        prop_assert!(m.budgets().iter().all(|&b| b <= horizon as f64));
    }

    #[test]
    fn mars_slip_mixes_intended_moves(slip in 0.0f64..=1.0) {
        let map = GridMap::parse(DEFAULT_MARS_MAP, MapKind::MarsRover).unwrap();
        let exact = build_mars_rover(&map, &EnvConfig { slip: 0.0, ..Default::default() }).unwrap();
        let slippy = build_mars_rover(&map, &EnvConfig { slip, ..Default::default() }).unwrap();
        let (ns, na) = (exact.num_states(), exact.num_actions());
        for s in 0..ns {
            for a in 0..na {
                for t in 0..ns {
                    let mixed: f64 = (0..na).map(|b| exact.transitions().prob(s, b, t)).sum::<f64>() * slip / na as f64;
                    let expected = (1.0 - slip) * exact.transitions().prob(s, a, t) + mixed;
                    prop_assert!((slippy.transitions().prob(s, a, t) - expected).abs() <= 1e-12);
                }
            }
        }
    }
}

#[test]
fn mars_absorbing_cells_self_loop() {
    let map = GridMap::parse(DEFAULT_MARS_MAP, MapKind::MarsRover).unwrap();
    let layout = MarsLayout::new(&map).unwrap();
    let m = build_mars_rover(&map, &EnvConfig::default()).unwrap();
    let absorbing: Vec<usize> = (0..m.num_states())
        .filter(|&s| layout.is_absorbing(s))
        .collect();
    assert!(!absorbing.is_empty());
    for s in absorbing {
        for a in 0..m.num_actions() {
            assert_eq!(m.transitions().prob(s, a, s), 1.0);
        }
    }
}

#[test]
fn cons_reg_recomputes_from_logs() {
    let cfg = ExperimentConfig {
        env: EnvKind::Random,
        random_resources: 2,
        horizon: 4,
        episodes: 30,
        planner: PlannerKind::Lp,
        ..Default::default()
    };
    let out = run_experiment(&cfg).unwrap();
    let xi = &out.report.xi;
    let mut sums = vec![0.0; xi.len()];
    for (k, log) in out.logs.iter().enumerate() {
        for (acc, c) in sums.iter_mut().zip(&log.exp_consumption) {
            *acc += c;
        }
        let n = (k + 1) as f64;
        let expected = sums
            .iter()
            .zip(xi)
            .map(|(s, x)| s / n - x)
            .fold(f64::NEG_INFINITY, f64::max);
        assert!((out.report.cons_reg[k] - expected).abs() < 1e-12);
        for r in
            std::iter::once(log.realized_reward).chain(log.realized_consumption.iter().copied())
        {
            assert!((0.0..=4.0).contains(&r));
        }
    }
}

#[test]
fn exact_lp_status_matches_on_infeasible_budget() {
    let truth = build_random_cmdp(5, 2, 2, 2, 1, 2).unwrap();
    let model = BonusEnhancedModel::exact(
        truth.transitions().clone(),
        truth.rewards().clone(),
        vec![ObjectiveTable::constant(2, 2, 1.0)],
    );
    // every policy consumes exactly H = 2
    let lp = conrl::planners::occupancy_lp(&model, &[1.5], 0, 2).unwrap();
    assert_eq!(
        conrl::planners::solve_lp(&lp).unwrap().status,
        LpStatus::Infeasible
    );
    let exact = conrl::oracles::solve_lp_exact(&conrl::oracles::RationalLp::from_f64(&lp)).unwrap();
    assert_eq!(exact.status, LpStatus::Infeasible);
}
