//! Plans on the default Mars rover map with the exact LP, then runs the
//! online learner for a few hundred episodes.

use conrl::environments::{build_mars_rover, EnvConfig, GridMap, MapKind, DEFAULT_MARS_MAP};
use conrl::harness::{run_experiment, solve_true_benchmark, ExperimentConfig, PlannerKind};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let map = GridMap::parse(DEFAULT_MARS_MAP, MapKind::MarsRover)?;
    let truth = build_mars_rover(&map, &EnvConfig::default())?;
    let bench = solve_true_benchmark(&truth)?;
    println!(
        "benchmark: reward {:.5}, consumption {:.5} (budget {})",
        bench.predicted_reward,
        bench.predicted_consumption[0],
        truth.budgets()[0]
    );

    let cfg = ExperimentConfig {
        planner: PlannerKind::Lp,
        episodes: 300,
        seed: 7,
        ..Default::default()
    };
    let out = run_experiment(&cfg)?;
    for k in [1usize, 10, 100, 300] {
        println!(
            "k = {k:>3}: RewReg {:.4}, ConsReg {:.4}",
            out.report.rew_reg[k - 1],
            out.report.cons_reg[k - 1]
        );
    }
    Ok(())
}
