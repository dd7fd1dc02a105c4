//! Behavioural preference tallies and end-to-end dataset generation.

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::agent::{train_desk_agent, DeskConfig, DeskPolicy, DeskTraining};
use super::episode::{EpisodeState, Outcome};
use super::grid::{generate_maze_with, MazeConfig};
use crate::domain::{enumerate_eval_pairs, Dataset, Object, PreferenceRecord, TrainingPipeline, N_OBJECTS};
use crate::error::{Error, Result};

pub const DEFAULT_EPISODES_PER_PAIR: u32 = 100;

/// RNG for one evaluation episode. The stream depends only on the unordered
/// pair and the episode index, so both orders of a pair replay the same mazes.
fn episode_rng(seed: u64, a: Object, b: Object, episode: u32) -> ChaCha8Rng {
    let (lo, hi) = if a < b { (a, b) } else { (b, a) };
    let pair = (lo.index() * N_OBJECTS + hi.index()) as u64;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream((pair << 32) | episode as u64);
    rng
}

/// Tally which object the policy reaches first in two-object mazes.
/// Neither object is rewarded.
pub fn evaluate_preferences(
    policy: &DeskPolicy,
    pipeline_id: &str,
    pairs: &[(Object, Object)],
    episodes_per_pair: u32,
    seed: u64,
    maze: &MazeConfig,
) -> Result<Vec<PreferenceRecord>> {
    if !policy.is_finite() {
        return Err(Error::Invalid("policy weights are not finite".into()));
    }
    if episodes_per_pair == 0 {
        return Err(Error::Invalid("episodes_per_pair must be positive".into()));
    }
    pairs
        .par_iter()
        .map(|&(a, b)| {
            let (lo, hi) = if a < b { (a, b) } else { (b, a) };
            let mut counts = [0u32; 3];
            for e in 0..episodes_per_pair {
                let mut rng = episode_rng(seed, a, b, e);
                let grid = generate_maze_with(&mut rng, &[lo, hi], None, maze)?;
                let mut state = EpisodeState::new(grid);
                policy.rollout(&mut state, &mut rng);
                match state.outcome {
                    Outcome::Reached(o) if o == a => counts[0] += 1,
                    Outcome::Reached(_) => counts[1] += 1,
                    _ => counts[2] += 1,
                }
            }
            PreferenceRecord::new(pipeline_id, a, b, counts, episodes_per_pair)
        })
        .collect()
}

/// Settings for training agents on a roster of pipelines and recording
/// their preferences.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DataGenConfig {
    pub agent: DeskConfig,
    pub episodes_per_pair: u32,
}

impl Default for DataGenConfig {
    fn default() -> Self {
        DataGenConfig {
            agent: DeskConfig::default(),
            episodes_per_pair: DEFAULT_EPISODES_PER_PAIR,
        }
    }
}

/// A trained agent and its preference records.
#[derive(Clone, Debug)]
pub struct GeneratedAgent {
    pub pipeline: TrainingPipeline,
    pub training: DeskTraining,
    pub records: Vec<PreferenceRecord>,
}

/// Train one desk agent per pipeline and evaluate it on all 276 pairs.
/// Per-pipeline seeds are drawn from `seed` in roster order.
pub fn generate_agents(pipelines: &[TrainingPipeline], config: &DataGenConfig, seed: u64) -> Result<Vec<GeneratedAgent>> {
    let mut master = ChaCha8Rng::seed_from_u64(seed);
    let seeds: Vec<(u64, u64)> = pipelines.iter().map(|_| (master.next_u64(), master.next_u64())).collect();
    let pairs = enumerate_eval_pairs();
    pipelines
        .par_iter()
        .zip(seeds)
        .map(|(p, (train_seed, eval_seed))| {
            let training = train_desk_agent(p, DeskPolicy::default(), &config.agent, train_seed)?;
            let records = evaluate_preferences(
                &training.policy,
                p.id(),
                &pairs,
                config.episodes_per_pair,
                eval_seed,
                &config.agent.maze,
            )?;
            Ok(GeneratedAgent {
                pipeline: p.clone(),
                training,
                records,
            })
        })
        .collect()
}

/// As [`generate_agents`], collected into a dataset.
pub fn generate_dataset(pipelines: &[TrainingPipeline], config: &DataGenConfig, seed: u64) -> Result<Dataset> {
    let agents = generate_agents(pipelines, config, seed)?;
    let records = agents.iter().flat_map(|a| a.records.iter().cloned()).collect();
    Dataset::new(agents.into_iter().map(|a| a.pipeline), records)
}
