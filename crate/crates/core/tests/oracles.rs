use conrl::environments::{build_mars_rover, EnvConfig, GridMap, MapKind, DEFAULT_MARS_MAP};
use conrl::estimation::BonusEnhancedModel;
use conrl::harness::solve_true_benchmark;
use conrl::oracles::{enumerate_policies, exact_trajectory_expectation, CmdpInstance};
use conrl::planners::{basic_conplanner, LpStatus, PlannedPolicy};

const MARS_4X4: &str = include_str!("../maps/mars_4x4.map");
const TWO_STATE: &str = include_str!("../examples/data/two_state.cmdp");

#[test]
fn two_state_instance_optimum() {
    let inst = CmdpInstance::parse(TWO_STATE).unwrap();
    let exact = inst.lp_optimum().unwrap();
    assert_eq!(exact.status, LpStatus::Optimal);
    assert_eq!(exact.objective.unwrap().to_string(), "2/3");
    let cmdp = inst.to_cmdp().unwrap();
    let planned = solve_true_benchmark(&cmdp).unwrap();
    assert!((planned.predicted_reward - 2.0 / 3.0).abs() < 1e-9);
}

#[test]
fn small_mars_lp_matches_exact_oracle() {
    let map = GridMap::parse(MARS_4X4, MapKind::MarsRover).unwrap();
    for horizon in 1..=3 {
        let cmdp = build_mars_rover(
            &map,
            &EnvConfig {
                horizon,
                ..Default::default()
            },
        )
        .unwrap();
        let model = BonusEnhancedModel::from_cmdp(&cmdp);
        let float =
            basic_conplanner(&model, cmdp.budgets(), cmdp.initial_state(), horizon).unwrap();
        let exact = CmdpInstance::from_cmdp(&cmdp).lp_optimum().unwrap();
        assert!(
            (float.predicted_reward - exact.objective_f64().unwrap()).abs() < 1e-9,
            "H = {horizon}"
        );
    }
}

#[test]
fn small_mars_benchmark_beats_feasible_deterministic_policies() {
    let map = GridMap::parse(MARS_4X4, MapKind::MarsRover).unwrap();
    let cmdp = build_mars_rover(
        &map,
        &EnvConfig {
            horizon: 2,
            ..Default::default()
        },
    )
    .unwrap();
    let bench = solve_true_benchmark(&cmdp).unwrap();
    let xi = cmdp.budgets()[0];
    let best_feasible = enumerate_policies(&cmdp, 2)
        .unwrap()
        .into_iter()
        .filter(|e| e.consumption[0] <= xi + 1e-12)
        .map(|e| e.reward)
        .fold(f64::NEG_INFINITY, f64::max);
    // randomisation can only help under a budget
    assert!(bench.predicted_reward >= best_feasible - 1e-12);
    let PlannedPolicy::Markov(pi) = &bench.policy else {
        panic!("LP benchmark is Markov")
    };
    let brute = exact_trajectory_expectation(&cmdp, pi, cmdp.rewards()).unwrap();
    assert!((brute - bench.predicted_reward).abs() < 1e-9);
}

#[test]
fn default_mars_benchmark_value() {
    // regression pin: LP optimum of the default map at H = 30, slip 0.1, xi = 0.2
    let map = GridMap::parse(DEFAULT_MARS_MAP, MapKind::MarsRover).unwrap();
    let cmdp = build_mars_rover(&map, &EnvConfig::default()).unwrap();
    let bench = solve_true_benchmark(&cmdp).unwrap();
    assert!(
        (bench.predicted_reward - 0.9837700097305602).abs() < 1e-9,
        "{}",
        bench.predicted_reward
    );
    assert!(bench.predicted_consumption[0] <= 0.2 + 1e-9);
}
