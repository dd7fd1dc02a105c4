//! Episode dynamics and the per-action observation used by the desk agent.

use serde::{Deserialize, Serialize};

use super::grid::{bfs_distances, DistanceMap, MazeGrid, Pos, GRID_SIZE};
use crate::domain::{encode_features, Object, N_FEATURES};
use crate::error::{Error, Result};

pub const HORIZON: usize = 200;
pub const GOAL_REWARD: f64 = 1.0;
pub const STEP_PENALTY: f64 = -0.1;

/// Observation features per action: object features for objects the action
/// moves closer to, then for objects it moves away from.
pub const OBSERVATION_DIM: usize = 2 * N_FEATURES;

pub type Observation = [[f64; OBSERVATION_DIM]; 4];

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Action {
    Up,
    Down,
    Left,
    Right,
}

impl Action {
    pub const ALL: [Action; 4] = [Action::Up, Action::Down, Action::Left, Action::Right];

    /// Target cell, or `None` when the move would leave the grid.
    pub fn apply(self, p: Pos) -> Option<Pos> {
        let (r, c) = (p.row, p.col);
        match self {
            Action::Up => r.checked_sub(1).map(|r| Pos::new(r, c)),
            Action::Down => (r + 1 < GRID_SIZE).then(|| Pos::new(r + 1, c)),
            Action::Left => c.checked_sub(1).map(|c| Pos::new(r, c)),
            Action::Right => (c + 1 < GRID_SIZE).then(|| Pos::new(r, c + 1)),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Outcome {
    Pending,
    /// The agent stepped onto this object.
    Reached(Object),
    /// The horizon ran out first.
    Timeout,
}

#[derive(Clone, Debug)]
pub struct EpisodeState {
    pub grid: MazeGrid,
    pub agent: Pos,
    pub step_count: usize,
    pub outcome: Outcome,
    /// Shortest-path distances to each object, aligned with `grid.objects`.
    distances: Vec<DistanceMap>,
}

impl EpisodeState {
    pub fn new(grid: MazeGrid) -> Self {
        let distances = grid.objects.iter().map(|o| bfs_distances(&grid.walls, o.pos)).collect();
        EpisodeState {
            agent: grid.agent,
            grid,
            step_count: 0,
            outcome: Outcome::Pending,
            distances,
        }
    }

    pub fn is_terminated(&self) -> bool {
        self.outcome != Outcome::Pending
    }

    /// Cell the agent occupies after `action` (blocked moves stay put).
    pub fn target(&self, action: Action) -> Pos {
        match action.apply(self.agent) {
            Some(t) if self.grid.is_vacant(t) => t,
            _ => self.agent,
        }
    }

    /// Apply one action and return its reward.
    pub fn step(&mut self, action: Action) -> Result<f64> {
        if self.is_terminated() {
            return Err(Error::EpisodeTerminated);
        }
        self.agent = self.target(action);
        self.step_count += 1;
        if let Some(obj) = self.grid.object_at(self.agent) {
            self.outcome = Outcome::Reached(obj);
            return Ok(if self.grid.rewarded == Some(obj) {
                GOAL_REWARD
            } else {
                STEP_PENALTY
            });
        }
        if self.step_count >= HORIZON {
            self.outcome = Outcome::Timeout;
        }
        Ok(STEP_PENALTY)
    }

    /// Per-action features: each object's two-hot vector in the "closer"
    /// block if the action strictly shortens the path to it, in the "farther"
    /// block if it strictly lengthens it.
    pub fn observe(&self) -> Observation {
        let mut obs = [[0.0; OBSERVATION_DIM]; 4];
        for (placed, dist) in self.grid.objects.iter().zip(&self.distances) {
            let phi = encode_features(Some(placed.object));
            let here = dist[self.agent.row][self.agent.col];
            for (k, &a) in Action::ALL.iter().enumerate() {
                let t = self.target(a);
                let offset = match (here, dist[t.row][t.col]) {
                    (Some(h), Some(n)) if n < h => 0,
                    (Some(h), Some(n)) if n > h => N_FEATURES,
                    _ => continue,
                };
                for (i, v) in phi.0.iter().enumerate() {
                    obs[k][offset + i] += v;
                }
            }
        }
        obs
    }
}
