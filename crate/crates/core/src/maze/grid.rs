//! Procedurally generated 8×8 mazes with fully connected vacant cells.

use std::collections::VecDeque;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::domain::Object;
use crate::error::{Error, Result};

pub const GRID_SIZE: usize = 8;

pub type Walls = [[bool; GRID_SIZE]; GRID_SIZE];

/// Shortest-path distances over vacant cells; `None` for walls and
/// unreachable cells.
pub type DistanceMap = [[Option<u32>; GRID_SIZE]; GRID_SIZE];

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Pos {
    pub row: usize,
    pub col: usize,
}

impl Pos {
    pub const fn new(row: usize, col: usize) -> Self {
        Pos { row, col }
    }

    /// 4-neighbours inside the grid.
    pub fn neighbours(self) -> impl Iterator<Item = Pos> {
        let (r, c) = (self.row as isize, self.col as isize);
        [(-1, 0), (1, 0), (0, -1), (0, 1)]
            .into_iter()
            .map(move |(dr, dc)| (r + dr, c + dc))
            .filter(|&(r, c)| (0..GRID_SIZE as isize).contains(&r) && (0..GRID_SIZE as isize).contains(&c))
            .map(|(r, c)| Pos::new(r as usize, c as usize))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MazeConfig {
    /// Independent probability that a cell is a wall.
    pub wall_probability: f64,
    /// Wall maps drawn before giving up on a connected layout.
    pub max_attempts: usize,
}

impl Default for MazeConfig {
    fn default() -> Self {
        MazeConfig {
            wall_probability: 0.2,
            max_attempts: 10_000,
        }
    }
}

impl MazeConfig {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..1.0).contains(&self.wall_probability) {
            return Err(Error::Invalid(format!(
                "wall probability must lie in [0, 1), got {}",
                self.wall_probability
            )));
        }
        if self.max_attempts == 0 {
            return Err(Error::Invalid("max_attempts must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct PlacedObject {
    pub object: Object,
    pub pos: Pos,
}

/// A maze layout with the agent and one or two objects on distinct vacant
/// cells. `rewarded` names the object whose collection pays +1, if any.
#[derive(Clone, Debug, PartialEq)]
pub struct MazeGrid {
    pub walls: Walls,
    pub agent: Pos,
    pub objects: Vec<PlacedObject>,
    pub rewarded: Option<Object>,
}

impl MazeGrid {
    pub fn is_vacant(&self, p: Pos) -> bool {
        !self.walls[p.row][p.col]
    }

    pub fn object_at(&self, p: Pos) -> Option<Object> {
        self.objects.iter().find(|o| o.pos == p).map(|o| o.object)
    }
}

pub fn vacant_cells(walls: &Walls) -> Vec<Pos> {
    (0..GRID_SIZE)
        .flat_map(|r| (0..GRID_SIZE).map(move |c| Pos::new(r, c)))
        .filter(|p| !walls[p.row][p.col])
        .collect()
}

/// Breadth-first distances from `from` over vacant cells.
pub fn bfs_distances(walls: &Walls, from: Pos) -> DistanceMap {
    let mut dist: DistanceMap = [[None; GRID_SIZE]; GRID_SIZE];
    if walls[from.row][from.col] {
        return dist;
    }
    dist[from.row][from.col] = Some(0);
    let mut queue = VecDeque::from([from]);
    while let Some(p) = queue.pop_front() {
        let d = dist[p.row][p.col].expect("queued cells have distances");
        for n in p.neighbours() {
            if !walls[n.row][n.col] && dist[n.row][n.col].is_none() {
                dist[n.row][n.col] = Some(d + 1);
                queue.push_back(n);
            }
        }
    }
    dist
}

/// Whether every vacant cell is reachable from every other.
pub fn is_connected(walls: &Walls) -> bool {
    let vacant = vacant_cells(walls);
    let Some(&start) = vacant.first() else {
        return false;
    };
    let dist = bfs_distances(walls, start);
    vacant.iter().all(|p| dist[p.row][p.col].is_some())
}

/// Draw a connected maze from `rng` and place the objects and the agent.
pub fn generate_maze_with(
    rng: &mut impl Rng,
    objects: &[Object],
    rewarded: Option<Object>,
    config: &MazeConfig,
) -> Result<MazeGrid> {
    config.validate()?;
    if objects.is_empty() || objects.len() > 2 {
        return Err(Error::Invalid(format!("a maze holds 1 or 2 objects, got {}", objects.len())));
    }
    if objects.len() == 2 && objects[0] == objects[1] {
        return Err(Error::Invalid(format!("maze objects must differ, got {} twice", objects[0])));
    }
    if let Some(g) = rewarded {
        if !objects.contains(&g) {
            return Err(Error::Invalid(format!("rewarded object {g} is not in the maze")));
        }
    }
    for _ in 0..config.max_attempts {
        let mut walls = [[false; GRID_SIZE]; GRID_SIZE];
        for row in walls.iter_mut() {
            for cell in row.iter_mut() {
                *cell = rng.gen_bool(config.wall_probability);
            }
        }
        let vacant = vacant_cells(&walls);
        if vacant.len() < objects.len() + 1 || !is_connected(&walls) {
            continue;
        }
        let cells: Vec<Pos> = vacant.choose_multiple(rng, objects.len() + 1).copied().collect();
        return Ok(MazeGrid {
            walls,
            agent: cells[0],
            objects: objects
                .iter()
                .zip(&cells[1..])
                .map(|(&object, &pos)| PlacedObject { object, pos })
                .collect(),
            rewarded,
        });
    }
    Err(Error::MazeRejection {
        attempts: config.max_attempts,
    })
}

/// Deterministic maze for a seed.
pub fn generate_maze(seed: u64, objects: &[Object], rewarded: Option<Object>, config: &MazeConfig) -> Result<MazeGrid> {
    generate_maze_with(&mut ChaCha8Rng::seed_from_u64(seed), objects, rewarded, config)
}
