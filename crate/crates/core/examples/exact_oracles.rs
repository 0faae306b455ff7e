//! Exact rational LP and exhaustive enumeration on an instance file
//! (defaults to the bundled two-state instance).

use std::path::PathBuf;

use conrl::oracles::{enumerate_policies, CmdpInstance};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let path = std::env::args()
        .nth(1)
        .map(PathBuf::from)
        .unwrap_or_else(|| {
            PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("examples/data/two_state.cmdp")
        });
    let inst = CmdpInstance::load(&path)?;
    let sol = inst.lp_optimum()?;
    println!("status {:?}", sol.status);
    if let Some(q) = &sol.objective {
        println!(
            "exact optimum {q} ({})",
            sol.objective_f64().unwrap_or(f64::NAN)
        );
    }
    let cmdp = inst.to_cmdp()?;
    let budget = cmdp.budgets().to_vec();
    for e in enumerate_policies(&cmdp, cmdp.horizon())? {
        let feasible = e.consumption.iter().zip(&budget).all(|(c, b)| c <= b);
        println!(
            "reward {:.4} consumption {:?} feasible {feasible}",
            e.reward, e.consumption
        );
    }
    Ok(())
}
