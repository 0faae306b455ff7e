//! Tracks the confidence bonus against the actual estimation error of the
//! learner on a small random instance.

use conrl::environments::build_random_cmdp;
use conrl::estimation::validity_excess;
use conrl::harness::{run_conrl_observed, solve_true_benchmark, ExperimentConfig};
use conrl::planners::PlannedPolicy;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let truth = build_random_cmdp(4, 3, 2, 3, 1, 3)?;
    let PlannedPolicy::Markov(pi_star) = solve_true_benchmark(&truth)?.policy else {
        unreachable!("the LP benchmark is a Markov policy")
    };
    let cfg = ExperimentConfig {
        episodes: 400,
        delta: 0.1,
        ..Default::default()
    };
    let mut worst = f64::NEG_INFINITY;
    run_conrl_observed(&truth, &cfg, 0, |view| {
        let excess =
            validity_excess(view.empirical, view.bonus, &truth, &pi_star).expect("shapes match");
        worst = worst.max(excess);
        if view.k.is_power_of_two() {
            println!(
                "k = {:>3}: min bonus {:.3}, excess {excess:.3}",
                view.k,
                view.bonus
                    .table()
                    .as_slice()
                    .iter()
                    .cloned()
                    .fold(f64::INFINITY, f64::min)
            );
        }
    })?;
    println!("largest excess over all episodes {worst:.3} (valid when <= 0)");
    Ok(())
}
