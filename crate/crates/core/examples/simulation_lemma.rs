//! Value difference between a model and the truth equals the occupancy-weighted
//! sum of Bellman errors under the true dynamics.

use conrl::cmdp::{bellman_error_table, evaluate_policy, occupancy_from_policy, Policy};
use conrl::environments::build_random_cmdp;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let truth = build_random_cmdp(1, 4, 2, 5, 0, 3)?;
    let model = build_random_cmdp(2, 4, 2, 5, 0, 2)?;
    let pi = Policy::uniform(5, 4, 2);
    let lhs = evaluate_policy(model.transitions(), model.rewards(), &pi, 5)?.v(0, 1)
        - evaluate_policy(truth.transitions(), truth.rewards(), &pi, 5)?.v(0, 1);
    let bell = bellman_error_table(
        model.transitions(),
        model.rewards(),
        truth.transitions(),
        truth.rewards(),
        &pi,
        5,
    )?;
    let rho = occupancy_from_policy(truth.transitions(), &pi, 0, 5)?;
    let mut rhs = 0.0;
    for h in 1..=5 {
        for s in 0..4 {
            for a in 0..2 {
                rhs += rho.get(s, a, h) * bell.get(s, a, h);
            }
        }
    }
    println!("value gap {lhs:.12}");
    println!("Bellman sum {rhs:.12}");
    println!("difference {:.2e}", (lhs - rhs).abs());
    Ok(())
}
