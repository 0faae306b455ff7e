//! Brute-force and exact-arithmetic reference computations for tiny
//! instances. Each entry point refuses inputs above a fixed size.

mod instance;
mod rational_lp;

use thiserror::Error;

use crate::cmdp::{Cmdp, CmdpError, ObjectiveTable, Policy};

pub use instance::{parse_rational, CmdpInstance};
pub use rational_lp::{solve_lp_exact, ExactLpSolution, RationalLp, RationalRow};

/// Largest number of policies or paths an oracle will enumerate.
pub const ENUMERATION_LIMIT: f64 = 1e6;
/// Largest variable and row count accepted by [`solve_lp_exact`].
pub const EXACT_LP_LIMIT: usize = 60;

#[derive(Debug, Error)]
pub enum OracleError {
    #[error("{what} = {size} exceeds the oracle limit {limit}")]
    TooLarge { what: String, size: f64, limit: f64 },

    #[error("instance line {line}: {reason}")]
    Instance { line: usize, reason: String },

    #[error("exact LP shape: {0}")]
    Shape(String),

    #[error("cannot read {path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },

    #[error(transparent)]
    Model(#[from] CmdpError),
}

fn guard(what: &str, base: usize, exponent: usize) -> Result<(), OracleError> {
    let size = (base as f64).powi(exponent as i32);
    if size > ENUMERATION_LIMIT {
        return Err(OracleError::TooLarge {
            what: what.into(),
            size,
            limit: ENUMERATION_LIMIT,
        });
    }
    Ok(())
}

/// A deterministic policy with its expected totals on the cMDP.
#[derive(Debug, Clone, PartialEq)]
pub struct EnumeratedPolicy {
    pub policy: Policy,
    pub reward: f64,
    pub consumption: Vec<f64>,
}

/// State distribution pushed forward stage by stage under a deterministic
/// choice table `choice[(h - 1) * S + s]`.
fn deterministic_totals(cmdp: &Cmdp, choice: &[usize], horizon: usize) -> (f64, Vec<f64>) {
    let ns = cmdp.num_states();
    let mut dist = vec![0.0; ns];
    dist[cmdp.initial_state()] = 1.0;
    let mut reward = 0.0;
    let mut consumption = vec![0.0; cmdp.num_resources()];
    for h in 0..horizon {
        let mut next = vec![0.0; ns];
        for s in 0..ns {
            if dist[s] == 0.0 {
                continue;
            }
            let a = choice[h * ns + s];
            reward += dist[s] * cmdp.rewards().get(s, a);
            for (acc, c) in consumption.iter_mut().zip(cmdp.consumption()) {
                *acc += dist[s] * c.get(s, a);
            }
            for (t, p) in cmdp.transitions().row(s, a).iter().enumerate() {
                next[t] += dist[s] * p;
            }
        }
        dist = next;
    }
    (reward, consumption)
}

/// Every deterministic time-dependent policy over stages `1..=horizon`
/// with its expected reward and consumption totals. Requires
/// `A^(S*horizon) <= 10^6`.
pub fn enumerate_policies(
    cmdp: &Cmdp,
    horizon: usize,
) -> Result<Vec<EnumeratedPolicy>, OracleError> {
    let (ns, na) = (cmdp.num_states(), cmdp.num_actions());
    guard("A^(S*H)", na, ns * horizon)?;
    let slots = ns * horizon;
    let mut choice = vec![0usize; slots];
    let mut out = Vec::new();
    loop {
        let (reward, consumption) = deterministic_totals(cmdp, &choice, horizon);
        let policy = Policy::deterministic(horizon, ns, na, |h, s| choice[(h - 1) * ns + s]);
        out.push(EnumeratedPolicy {
            policy,
            reward,
            consumption,
        });
        // odometer increment
        let mut pos = 0;
        while pos < slots {
            choice[pos] += 1;
            if choice[pos] < na {
                break;
            }
            choice[pos] = 0;
            pos += 1;
        }
        if pos == slots {
            return Ok(out);
        }
    }
}

/// `E[sum_{h=1}^H m(s_h, a_h)]` by summing over every action and next-state
/// sequence. Requires `(S*A)^H <= 10^6`.
pub fn exact_trajectory_expectation(
    cmdp: &Cmdp,
    policy: &Policy,
    objective: &ObjectiveTable,
) -> Result<f64, OracleError> {
    let (ns, na, horizon) = (cmdp.num_states(), cmdp.num_actions(), cmdp.horizon());
    guard("(S*A)^H", ns * na, horizon)?;
    if policy.horizon() != horizon || policy.num_states() != ns || policy.num_actions() != na {
        return Err(CmdpError::Dimension("policy shape does not match the cMDP".into()).into());
    }
    if objective.num_states() != ns || objective.num_actions() != na {
        return Err(CmdpError::Dimension("objective shape does not match the cMDP".into()).into());
    }

    fn walk(
        cmdp: &Cmdp,
        policy: &Policy,
        m: &ObjectiveTable,
        h: usize,
        s: usize,
        weight: f64,
    ) -> f64 {
        let mut total = 0.0;
        for a in 0..cmdp.num_actions() {
            let w = weight * policy.prob(h, s, a);
            if w == 0.0 {
                continue;
            }
            total += w * m.get(s, a);
            if h < cmdp.horizon() {
                for (next, p) in cmdp.transitions().row(s, a).iter().enumerate() {
                    if *p > 0.0 {
                        total += walk(cmdp, policy, m, h + 1, next, w * p);
                    }
                }
            }
        }
        total
    }

    Ok(walk(cmdp, policy, objective, 1, cmdp.initial_state(), 1.0))
}
