//! Box pushing: walk to the goal without leaving the box in a corner.
//!
//! A state is an `(agent cell, box cell)` pair; only pairs reachable from
//! the start configuration are kept, ordered by `(agent, box)` cell index.
//! Moving into the box pushes it one cell further when that cell is open,
//! otherwise nothing moves. The agent is absorbed at the goal. Rewards
//! follow the Mars rover convention (expected arrival indicator, then `1/H`
//! per absorbed step); consumption is `1/H` at every step whose state has
//! the box on a corner cell.

use std::collections::{BTreeSet, HashMap, VecDeque};

use crate::cmdp::{Cmdp, ObjectiveTable, TransitionTable};

use super::grid::{GridMap, MapKind};
use super::{slip_weights, EnvConfig, EnvError, Move};

type Cell = (usize, usize);

#[derive(Debug, Clone, PartialEq)]
pub struct BoxLayout {
    /// `(agent, box)` per state.
    pub states: Vec<(Cell, Cell)>,
    pub start: usize,
    index: HashMap<(Cell, Cell), usize>,
}

impl BoxLayout {
    pub fn state_of(&self, agent: Cell, boxed: Cell) -> Option<usize> {
        self.index.get(&(agent, boxed)).copied()
    }
}

fn push(map: &GridMap, goal: Cell, (agent, boxed): (Cell, Cell), m: Move) -> (Cell, Cell) {
    if agent == goal {
        return (agent, boxed);
    }
    let target = map.step(agent, m.delta());
    if map.is_wall(target.0, target.1) {
        return (agent, boxed);
    }
    if target != boxed {
        return (target, boxed);
    }
    let beyond = map.step(boxed, m.delta());
    if map.is_wall(beyond.0, beyond.1) {
        (agent, boxed)
    } else {
        (target, beyond)
    }
}

impl BoxLayout {
    pub fn new(map: &GridMap) -> Result<Self, EnvError> {
        if map.kind() != MapKind::Box {
            return Err(EnvError::Config("not a Box map".into()));
        }
        let goal = map.goal();
        let origin = (
            map.start(),
            map.box_start().expect("validated at parse time"),
        );
        let mut seen = BTreeSet::from([origin]);
        let mut queue = VecDeque::from([origin]);
        while let Some(state) = queue.pop_front() {
            for m in Move::ALL {
                let next = push(map, goal, state, m);
                if seen.insert(next) {
                    queue.push_back(next);
                }
            }
        }
        let states: Vec<_> = seen.into_iter().collect();
        let index: HashMap<_, _> = states.iter().enumerate().map(|(i, &st)| (st, i)).collect();
        Ok(Self {
            start: index[&origin],
            states,
            index,
        })
    }
}

/// Builds the Box cMDP (`d = 1`). The null action, when enabled, leads to
/// the sink except from states where the agent already sits on the goal.
pub fn build_box(map: &GridMap, cfg: &EnvConfig) -> Result<Cmdp, EnvError> {
    cfg.validate()?;
    let layout = BoxLayout::new(map)?;
    let goal = map.goal();
    let ns = layout.states.len();
    let na = Move::ALL.len();
    let inv_h = 1.0 / cfg.horizon as f64;
    let mut probs = vec![0.0; ns * na * ns];
    let mut reward = ObjectiveTable::zeros(ns, na);
    let mut consumption = ObjectiveTable::zeros(ns, na);
    let mut absorbing = Vec::new();
    for (s, &state) in layout.states.iter().enumerate() {
        let (agent, boxed) = state;
        if agent == goal {
            absorbing.push(s);
        }
        for a in 0..na {
            let row = &mut probs[(s * na + a) * ns..(s * na + a + 1) * ns];
            for (m, w) in Move::ALL.iter().zip(slip_weights(a, cfg.slip)) {
                let next = push(map, goal, state, *m);
                row[layout.state_of(next.0, next.1).expect("closed under moves")] += w;
            }
            let r = if agent == goal {
                inv_h
            } else {
                layout
                    .states
                    .iter()
                    .zip(row.iter())
                    .filter(|((ag, _), _)| *ag == goal)
                    .map(|(_, p)| p)
                    .sum::<f64>()
                    .min(1.0)
            };
            reward.set(s, a, r);
            if map.is_corner(boxed.0, boxed.1) {
                consumption.set(s, a, inv_h);
            }
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
        Ok(cmdp.with_null_action_except(&absorbing)?)
    } else {
        Ok(cmdp)
    }
}
