//! Finite-horizon value iteration.

use crate::cmdp::dp::{check_tables, expect_next};
use crate::cmdp::{CmdpError, ObjectiveTable, Policy, TransitionTable, ValueTables};

/// Backward induction `Q(s,a,h) = r(s,a) + sum_s' p(s'|s,a) max_a' Q(s',a',h+1)`.
///
/// The returned policy is greedy and deterministic; among maximisers the
/// lowest action index wins.
pub fn value_iteration(
    p: &TransitionTable,
    r: &ObjectiveTable,
    horizon: usize,
) -> Result<(ValueTables, Policy), CmdpError> {
    check_tables(p, r)?;
    let (ns, na) = (p.num_states(), p.num_actions());
    let mut values = ValueTables::zeros(horizon, ns, na);
    let mut greedy = vec![0usize; horizon * ns];
    for h in (1..=horizon).rev() {
        for s in 0..ns {
            let mut best = f64::NEG_INFINITY;
            let mut best_a = 0;
            for a in 0..na {
                let q = r.get(s, a) + expect_next(p.row(s, a), values.v_layer(h + 1));
                values.set_q(s, a, h, q);
                if q > best {
                    best = q;
                    best_a = a;
                }
            }
            values.set_v(s, h, best);
            greedy[(h - 1) * ns + s] = best_a;
        }
    }
    let policy = Policy::deterministic(horizon, ns, na, |h, s| greedy[(h - 1) * ns + s]);
    Ok((values, policy))
}
