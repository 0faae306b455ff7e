//! Constrained episodic reinforcement learning in tabular cMDPs.
//!
//! Optimistic model estimation ([`estimation`]), planning over occupancy
//! measures ([`planners`]), benchmark environments ([`environments`]), the
//! online learning loop with exact regret accounting ([`harness`]) and
//! brute-force reference implementations ([`oracles`]).

pub mod cli;
pub mod cmdp;
pub mod environments;
pub mod estimation;
pub mod harness;
pub mod oracles;
pub mod planners;
