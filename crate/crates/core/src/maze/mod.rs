//! Desk-scale testbed: 8×8 mazes, a linear policy-gradient agent and the
//! rollout harness that turns trained agents into preference records.

mod agent;
mod episode;
mod grid;
mod rollout;

pub use agent::{mean_return, train_desk_agent, DeskConfig, DeskPolicy, DeskTraining};
pub use episode::{
    Action, EpisodeState, Observation, Outcome, GOAL_REWARD, HORIZON, OBSERVATION_DIM, STEP_PENALTY,
};
pub use grid::{
    bfs_distances, generate_maze, generate_maze_with, is_connected, vacant_cells, DistanceMap, MazeConfig,
    MazeGrid, PlacedObject, Pos, Walls, GRID_SIZE,
};
pub use rollout::{
    evaluate_preferences, generate_agents, generate_dataset, DataGenConfig, GeneratedAgent,
    DEFAULT_EPISODES_PER_PAIR,
};
