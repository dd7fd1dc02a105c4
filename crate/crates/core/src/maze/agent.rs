//! Linear softmax policy over the four actions, trained by REINFORCE with a
//! moving-average baseline, one pipeline stage after another.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::episode::{Action, EpisodeState, Observation, OBSERVATION_DIM};
use super::grid::{generate_maze_with, MazeConfig};
use crate::domain::{Object, TrainingPipeline};
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DeskConfig {
    pub learning_rate: f64,
    pub episodes_per_stage: usize,
    pub baseline_decay: f64,
    /// Return discount used in the policy-gradient estimate.
    pub discount: f64,
    pub maze: MazeConfig,
}

impl Default for DeskConfig {
    fn default() -> Self {
        DeskConfig {
            learning_rate: 0.05,
            episodes_per_stage: 2000,
            baseline_decay: 0.99,
            discount: 0.95,
            maze: MazeConfig::default(),
        }
    }
}

impl DeskConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.learning_rate >= 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::Invalid("desk learning rate must be finite and non-negative".into()));
        }
        if !(0.0..=1.0).contains(&self.baseline_decay) || !(0.0..=1.0).contains(&self.discount) {
            return Err(Error::Invalid("baseline decay and discount must lie in [0, 1]".into()));
        }
        self.maze.validate()
    }
}

/// Shared weights scoring each action's observation features.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DeskPolicy {
    pub weights: Vec<f64>,
}

impl Default for DeskPolicy {
    fn default() -> Self {
        DeskPolicy {
            weights: vec![0.0; OBSERVATION_DIM],
        }
    }
}

impl DeskPolicy {
    pub fn is_finite(&self) -> bool {
        self.weights.iter().all(|w| w.is_finite())
    }

    pub fn action_probabilities(&self, obs: &Observation) -> [f64; 4] {
        let scores = obs.map(|x| x.iter().zip(&self.weights).map(|(a, b)| a * b).sum::<f64>());
        let m = scores.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let e = scores.map(|s| (s - m).exp());
        let z: f64 = e.iter().sum();
        e.map(|x| x / z)
    }

    pub fn sample(&self, obs: &Observation, rng: &mut impl Rng) -> usize {
        let probs = self.action_probabilities(obs);
        let u: f64 = rng.gen();
        let mut acc = 0.0;
        for (k, p) in probs.iter().enumerate() {
            acc += p;
            if u < acc {
                return k;
            }
        }
        3
    }

    /// Play one episode to termination and return its undiscounted return.
    pub fn rollout(&self, state: &mut EpisodeState, rng: &mut impl Rng) -> f64 {
        let mut ret = 0.0;
        while !state.is_terminated() {
            let k = self.sample(&state.observe(), rng);
            ret += state.step(Action::ALL[k]).expect("episode is live");
        }
        ret
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DeskTraining {
    pub policy: DeskPolicy,
    /// Undiscounted return of every training episode, stages concatenated.
    pub episode_returns: Vec<f64>,
}

/// Train on each stage of the pipeline in turn, carrying weights across
/// stages. Every episode uses a fresh maze holding the stage's goal (and
/// distractor); only the goal is rewarded.
pub fn train_desk_agent(
    pipeline: &TrainingPipeline,
    initial: DeskPolicy,
    config: &DeskConfig,
    seed: u64,
) -> Result<DeskTraining> {
    config.validate()?;
    if initial.weights.len() != OBSERVATION_DIM {
        return Err(Error::Invalid(format!(
            "desk policy needs {OBSERVATION_DIM} weights, got {}",
            initial.weights.len()
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut policy = initial;
    let mut baseline = 0.0;
    let mut returns = Vec::with_capacity(config.episodes_per_stage * pipeline.stages().len());
    for (stage_index, stage) in pipeline.stages().iter().enumerate() {
        let mut objects: Vec<Object> = vec![stage.goal];
        objects.extend(stage.distractor);
        for episode in 0..config.episodes_per_stage {
            let grid = generate_maze_with(&mut rng, &objects, Some(stage.goal), &config.maze)?;
            let mut state = EpisodeState::new(grid);
            let mut steps: Vec<(Observation, usize, f64)> = Vec::new();
            while !state.is_terminated() {
                let obs = state.observe();
                let k = policy.sample(&obs, &mut rng);
                let r = state.step(Action::ALL[k]).expect("episode is live");
                steps.push((obs, k, r));
            }
            returns.push(steps.iter().map(|s| s.2).sum());

            // discounted returns-to-go
            let mut g = 0.0;
            let mut to_go = vec![0.0; steps.len()];
            for t in (0..steps.len()).rev() {
                g = steps[t].2 + config.discount * g;
                to_go[t] = g;
            }
            let mut grad = [0.0; OBSERVATION_DIM];
            for ((obs, k, _), &gt) in steps.iter().zip(&to_go) {
                let probs = policy.action_probabilities(obs);
                let adv = gt - baseline;
                for i in 0..OBSERVATION_DIM {
                    let mean: f64 = (0..4).map(|a| probs[a] * obs[a][i]).sum();
                    grad[i] += adv * (obs[*k][i] - mean);
                }
            }
            let scale = config.learning_rate / steps.len() as f64;
            for (w, g) in policy.weights.iter_mut().zip(grad) {
                *w += scale * g;
            }
            baseline = config.baseline_decay * baseline + (1.0 - config.baseline_decay) * to_go[0];
            if !policy.is_finite() {
                return Err(Error::NonFinitePolicy {
                    stage: stage_index,
                    episode,
                });
            }
        }
    }
    Ok(DeskTraining {
        policy,
        episode_returns: returns,
    })
}

/// Mean return over fresh single-object mazes rewarding `goal`.
pub fn mean_return(policy: &DeskPolicy, goal: Object, episodes: usize, seed: u64, maze: &MazeConfig) -> Result<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut total = 0.0;
    for _ in 0..episodes {
        let grid = generate_maze_with(&mut rng, &[goal], Some(goal), maze)?;
        total += policy.rollout(&mut EpisodeState::new(grid), &mut rng);
    }
    Ok(total / episodes.max(1) as f64)
}
