//! Benchmark cMDPs: grid worlds built from text maps, a seeded random
//! generator, and the one-step sampler used to run episodes.

mod boxworld;
mod grid;
mod mars;
mod random;

pub use boxworld::{build_box, BoxLayout};
pub use grid::{GridMap, MapKind, DEFAULT_BOX_MAP, DEFAULT_MARS_MAP};
pub use mars::{build_mars_rover, MarsLayout};
pub use random::build_random_cmdp;

use rand::Rng;
use thiserror::Error;

use crate::cmdp::{sample_index, Cmdp, CmdpError};

#[derive(Debug, Error)]
pub enum EnvError {
    #[error("map line {line}, column {column}: {reason}")]
    Map {
        line: usize,
        column: usize,
        reason: String,
    },

    #[error("map: {0}")]
    MapShape(String),

    #[error("invalid environment configuration: {0}")]
    Config(String),

    #[error("cannot read map {path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },

    #[error(transparent)]
    Model(#[from] CmdpError),
}

#[derive(Debug, Clone, PartialEq)]
pub struct EnvConfig {
    /// Probability that the intended move is replaced by a uniformly random one.
    pub slip: f64,
    pub horizon: usize,
    /// Adds the null action and absorbing sink used by knapsack runs.
    pub include_null_action: bool,
    /// Per-episode budget of the single resource.
    pub budget: f64,
}

impl Default for EnvConfig {
    fn default() -> Self {
        Self {
            slip: 0.1,
            horizon: 30,
            include_null_action: false,
            budget: 0.2,
        }
    }
}

impl EnvConfig {
    pub fn validate(&self) -> Result<(), EnvError> {
        if !(0.0..=1.0).contains(&self.slip) {
            return Err(EnvError::Config(format!(
                "slip must lie in [0, 1], got {}",
                self.slip
            )));
        }
        if self.horizon == 0 {
            return Err(EnvError::Config("horizon must be positive".into()));
        }
        if !(self.budget >= 0.0) || !self.budget.is_finite() {
            return Err(EnvError::Config(format!(
                "budget must be finite and nonnegative, got {}",
                self.budget
            )));
        }
        Ok(())
    }
}

/// Grid moves in action order.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Move {
    Up,
    Down,
    Left,
    Right,
}

impl Move {
    pub const ALL: [Move; 4] = [Move::Up, Move::Down, Move::Left, Move::Right];

    pub fn delta(self) -> (isize, isize) {
        match self {
            Move::Up => (-1, 0),
            Move::Down => (1, 0),
            Move::Left => (0, -1),
            Move::Right => (0, 1),
        }
    }
}

/// Mixture weight of each move when `intended` is chosen: `1 - slip` on the
/// intended move plus `slip / 4` on every move.
pub(crate) fn slip_weights(intended: usize, slip: f64) -> [f64; 4] {
    let mut w = [slip / 4.0; 4];
    w[intended] += 1.0 - slip;
    w
}

#[derive(Debug, Clone, PartialEq)]
pub struct SampledStep {
    pub reward: f64,
    pub consumption: Vec<f64>,
    pub next_state: usize,
}

/// One transition of `cmdp` from `(s, a)`: the next state by inverse CDF on
/// a single uniform draw, reward and consumption as their (deterministic)
/// means.
pub fn sample_step<R: Rng + ?Sized>(
    cmdp: &Cmdp,
    s: usize,
    a: usize,
    rng: &mut R,
) -> Result<SampledStep, EnvError> {
    if s >= cmdp.num_states() || a >= cmdp.num_actions() {
        return Err(EnvError::Config(format!("pair ({s}, {a}) out of range")));
    }
    let u: f64 = rng.gen();
    Ok(SampledStep {
        reward: cmdp.rewards().get(s, a),
        consumption: cmdp.consumption().iter().map(|c| c.get(s, a)).collect(),
        next_state: sample_index(cmdp.transitions().row(s, a), u),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cmdp::{ObjectiveTable, TransitionTable};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn sampler_frequencies_and_means() {
        let p = TransitionTable::new(2, 1, vec![0.75, 0.25, 0.0, 1.0]).unwrap();
        let r = ObjectiveTable::new(2, 1, vec![0.3, 0.6]).unwrap();
        let cmdp = Cmdp::new(2, 0, p, r, vec![], vec![]).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let n = 100_000;
        let mut zero = 0;
        for _ in 0..n {
            let step = sample_step(&cmdp, 0, 0, &mut rng).unwrap();
            assert_eq!(step.reward, 0.3);
            if step.next_state == 0 {
                zero += 1;
            }
        }
        let freq = zero as f64 / n as f64;
        assert!((freq - 0.75).abs() < 0.01, "{freq}");
        for _ in 0..100 {
            assert_eq!(sample_step(&cmdp, 1, 0, &mut rng).unwrap().next_state, 1);
        }
    }

    #[test]
    fn slip_weights_sum_to_one() {
        for a in 0..4 {
            let w = slip_weights(a, 0.1);
            assert!((w.iter().sum::<f64>() - 1.0).abs() < 1e-15);
            assert!((w[a] - 0.925).abs() < 1e-15);
        }
    }

    #[test]
    fn config_validation() {
        assert!(EnvConfig {
            slip: 1.5,
            ..Default::default()
        }
        .validate()
        .is_err());
        assert!(EnvConfig {
            horizon: 0,
            ..Default::default()
        }
        .validate()
        .is_err());
        assert!(EnvConfig::default().validate().is_ok());
    }
}
