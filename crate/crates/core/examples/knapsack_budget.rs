//! Hard total budget: the learner plans against tightened per-episode
//! budgets and switches to the null action once the budget could be
//! exceeded.

use conrl::harness::{run_experiment, AggRegMode, EnvKind, ExperimentConfig, PlannerKind};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let cfg = ExperimentConfig {
        env: EnvKind::Random,
        horizon: 4,
        episodes: 400,
        planner: PlannerKind::Knapsack,
        budget: vec![300.0],
        aggreg_mode: AggRegMode::Empirical,
        seed: 2,
        ..Default::default()
    };
    let out = run_experiment(&cfg)?;
    let k = out.report.knapsack.as_ref().expect("knapsack summary");
    println!("AggReg {:?}, epsilon {:.4}", k.aggreg, k.epsilon);
    println!(
        "consumed {:.2} of {}",
        out.report.cum_consumption.last().unwrap()[0],
        k.budgets[0]
    );
    println!(
        "guard engaged from episode {:?}, violated: {}",
        k.guard_from, k.violated
    );
    Ok(())
}
