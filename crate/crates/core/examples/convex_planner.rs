//! Concave reward objective: a capped reward `min(t, T)` with a linear
//! budget, against the linear program.

use conrl::environments::build_random_cmdp;
use conrl::estimation::BonusEnhancedModel;
use conrl::planners::{basic_conplanner, convex_conplanner, ConvexBudget, ConvexSpec};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let truth = build_random_cmdp(11, 4, 3, 4, 1, 3)?;
    let model = BonusEnhancedModel::from_cmdp(&truth);
    let xi = truth.budgets().to_vec();
    let lp = basic_conplanner(&model, &xi, 0, 4)?;
    let linear = convex_conplanner(
        &model,
        &ConvexSpec::linear(xi.clone()),
        0,
        4,
        &ConvexBudget::default(),
    )?;
    println!(
        "LP {:.6}, linear convex {:.6}",
        lp.predicted_reward, linear.predicted_reward
    );

    let cap = 0.5 * lp.predicted_reward;
    let capped = convex_conplanner(
        &model,
        &ConvexSpec::capped(cap, xi.clone()),
        0,
        4,
        &ConvexBudget::default(),
    )?;
    println!(
        "cap {cap:.4}: reward {:.4}, consumption {:.4} (budget {:.4})",
        capped.predicted_reward, capped.predicted_consumption[0], xi[0]
    );
    Ok(())
}
