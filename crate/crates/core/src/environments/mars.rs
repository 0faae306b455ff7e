//! Mars rover: reach the goal without driving into rocks.
//!
//! States are the open cells in row-major order. Goal and rock cells are
//! absorbing. Rewards and consumptions are the expected values of the
//! event-based signals, which keeps them functions of `(s, a)`:
//!
//! * `r(s, a) = P(next cell is the goal | s, a)` off the goal, `1/H` on it;
//! * `c(s, a) = P(next cell is a rock | s, a)` off rocks, `1/H` on them.

use std::collections::HashMap;

use crate::cmdp::{Cmdp, ObjectiveTable, TransitionTable};

use super::grid::{GridMap, MapKind};
use super::{slip_weights, EnvConfig, EnvError, Move};

/// State indexing of a Mars rover map.
#[derive(Debug, Clone, PartialEq)]
pub struct MarsLayout {
    pub cells: Vec<(usize, usize)>,
    pub start: usize,
    pub goal: usize,
    pub rocks: Vec<usize>,
    index: HashMap<(usize, usize), usize>,
}

impl MarsLayout {
    pub fn new(map: &GridMap) -> Result<Self, EnvError> {
        if map.kind() != MapKind::MarsRover {
            return Err(EnvError::Config("not a Mars rover map".into()));
        }
        let cells = map.open_cells();
        let index: HashMap<_, _> = cells.iter().enumerate().map(|(i, &c)| (c, i)).collect();
        let rocks = cells
            .iter()
            .enumerate()
            .filter(|(_, &(r, c))| map.at(r, c) == 'R')
            .map(|(i, _)| i)
            .collect();
        Ok(Self {
            start: index[&map.start()],
            goal: index[&map.goal()],
            rocks,
            index,
            cells,
        })
    }

    pub fn state_of(&self, cell: (usize, usize)) -> Option<usize> {
        self.index.get(&cell).copied()
    }

    pub fn is_absorbing(&self, s: usize) -> bool {
        s == self.goal || self.rocks.contains(&s)
    }
}

/// Builds the Mars rover cMDP (`d = 1`). With `include_null_action` the
/// last action leads to an absorbing zero-signal sink (the last state),
/// except at goal and rock cells where it behaves like any other action.
pub fn build_mars_rover(map: &GridMap, cfg: &EnvConfig) -> Result<Cmdp, EnvError> {
    cfg.validate()?;
    let layout = MarsLayout::new(map)?;
    let ns = layout.cells.len();
    let na = Move::ALL.len();
    let inv_h = 1.0 / cfg.horizon as f64;
    let mut probs = vec![0.0; ns * na * ns];
    let mut reward = ObjectiveTable::zeros(ns, na);
    let mut consumption = ObjectiveTable::zeros(ns, na);
    for (s, &cell) in layout.cells.iter().enumerate() {
        for a in 0..na {
            let row = &mut probs[(s * na + a) * ns..(s * na + a + 1) * ns];
            if layout.is_absorbing(s) {
                row[s] = 1.0;
                if s == layout.goal {
                    reward.set(s, a, inv_h);
                } else {
                    consumption.set(s, a, inv_h);
                }
                continue;
            }
            for (m, w) in Move::ALL.iter().zip(slip_weights(a, cfg.slip)) {
                let target = map.step(cell, m.delta());
                let next = if map.is_wall(target.0, target.1) {
                    s
                } else {
                    layout.state_of(target).expect("open cell")
                };
                row[next] += w;
            }
            reward.set(s, a, row[layout.goal]);
            consumption.set(
                s,
                a,
                layout.rocks.iter().map(|&k| row[k]).sum::<f64>().min(1.0),
            );
        }
    }
    let cmdp = Cmdp::new(
        cfg.horizon,
        layout.start,
        TransitionTable::new(ns, na, probs)?,
        reward,
        vec![consumption],
        vec![cfg.budget],
    )?;
    if cfg.include_null_action {
        let mut absorbing = layout.rocks.clone();
        absorbing.push(layout.goal);
        Ok(cmdp.with_null_action_except(&absorbing)?)
    } else {
        Ok(cmdp)
    }
}
