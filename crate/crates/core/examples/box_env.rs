//! Box pushing world: the side-effect resource counts steps with the box
//! against a wall or in a corner.

use conrl::environments::{build_box, EnvConfig, GridMap, MapKind, DEFAULT_BOX_MAP};
use conrl::estimation::BonusEnhancedModel;
use conrl::planners::{basic_conplanner, value_iteration};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let map = GridMap::parse(DEFAULT_BOX_MAP, MapKind::Box)?;
    let cfg = EnvConfig {
        horizon: 12,
        ..Default::default()
    };
    let truth = build_box(&map, &cfg)?;
    println!(
        "{} states, {} actions",
        truth.num_states(),
        truth.num_actions()
    );
    let (free, _) = value_iteration(truth.transitions(), truth.rewards(), cfg.horizon)?;
    println!(
        "unconstrained reward {:.4}",
        free.v(truth.initial_state(), 1)
    );
    let model = BonusEnhancedModel::from_cmdp(&truth);
    for xi in [0.0, 0.5, 2.0] {
        match basic_conplanner(&model, &[xi], truth.initial_state(), cfg.horizon) {
            Ok(sol) => println!("budget {xi}: reward {:.4}", sol.predicted_reward),
            Err(e) => println!("budget {xi}: {e}"),
        }
    }
    Ok(())
}
