//! Compares the primal-dual planner with the LP on a random instance as the
//! number of multiplier updates grows.

use conrl::environments::build_random_cmdp;
use conrl::estimation::BonusEnhancedModel;
use conrl::planners::{basic_conplanner, lagr_conplanner, LagrConfig};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let truth = build_random_cmdp(3, 4, 3, 5, 1, 3)?;
    // a tighter budget than the generator's default, so the constraint binds
    let xi = [0.6 * truth.budgets()[0]];
    let model = BonusEnhancedModel::from_cmdp(&truth);
    let lp = basic_conplanner(&model, &xi, 0, 5)?;
    println!(
        "LP: reward {:.5}, consumption {:.5}, budget {:.5}",
        lp.predicted_reward, lp.predicted_consumption[0], xi[0]
    );
    for n in [10, 100, 500, 2000] {
        let sol = lagr_conplanner(&model, &xi, 0, 5, &LagrConfig::new(0.2, n)?)?;
        println!(
            "N = {n:>4}: reward {:.5}, consumption {:.5}",
            sol.predicted_reward, sol.predicted_consumption[0]
        );
    }
    Ok(())
}
