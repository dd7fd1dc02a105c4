//! Gradient-ascent simulation of the latent weights through a pipeline.

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use super::hyper::LpgHyperparameters;
use super::objective::{Local, StageDirections};
use crate::domain::TrainingPipeline;
use crate::error::{Error, Result};

pub const DEFAULT_INTEGRATION_STEPS: usize = 100;

/// Latent weight vector `w`.
#[derive(Clone, Debug, PartialEq)]
pub struct LatentWeights(pub DVector<f64>);

impl LatentWeights {
    pub fn as_vector(&self) -> &DVector<f64> {
        &self.0
    }
}

/// Inner-loop settings. The step size defaults to 1.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimulationSettings {
    pub n_integration_steps: usize,
    pub step_size: f64,
}

impl Default for SimulationSettings {
    fn default() -> Self {
        SimulationSettings {
            n_integration_steps: DEFAULT_INTEGRATION_STEPS,
            step_size: 1.0,
        }
    }
}

/// How a pipeline's stages are turned into ascent phases.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Schedule {
    /// One phase per stage, in order.
    Sequential,
    /// Only the last stage.
    FinalStageOnly,
    /// A single phase ascending the mean of all stage objectives.
    Joint,
}

/// A block of ascent steps on a weighted sum of stage objectives.
#[derive(Clone, Debug)]
pub(crate) struct Phase {
    pub terms: Vec<(f64, StageDirections)>,
}

pub(crate) fn build_phases(
    hp: &LpgHyperparameters,
    pipeline: &TrainingPipeline,
    schedule: Schedule,
) -> Vec<Phase> {
    let dirs = |s| StageDirections::new(hp, s);
    match schedule {
        Schedule::Sequential => pipeline
            .stages()
            .iter()
            .map(|s| Phase {
                terms: vec![(1.0, dirs(s))],
            })
            .collect(),
        Schedule::FinalStageOnly => vec![Phase {
            terms: vec![(1.0, dirs(pipeline.final_stage()))],
        }],
        Schedule::Joint => {
            let weight = 1.0 / pipeline.stages().len() as f64;
            vec![Phase {
                terms: pipeline.stages().iter().map(|s| (weight, dirs(s))).collect(),
            }]
        }
    }
}

/// Sum of the phase's weighted stage gradients at `w`.
pub(crate) fn phase_gradient(phase: &Phase, w: &DVector<f64>, tau: f64) -> DVector<f64> {
    let mut g = DVector::zeros(w.len());
    for (weight, dirs) in &phase.terms {
        let (vg, vd) = dirs.values(w);
        let (alpha, beta) = Local::new(vg, vd, tau).coefficients();
        g.axpy(weight * alpha, &dirs.goal_dir, 1.0);
        if let Some(ud) = &dirs.distractor_dir {
            g.axpy(weight * beta, ud, 1.0);
        }
    }
    g
}

/// Run the phases from `w0 · 1`. When `trajectory` is given, the weights
/// before every step are appended to it, phase by phase.
pub(crate) fn run_phases(
    hp: &LpgHyperparameters,
    phases: &[Phase],
    settings: &SimulationSettings,
    mut trajectory: Option<&mut Vec<DVector<f64>>>,
) -> Result<DVector<f64>> {
    let tau = hp.tau();
    let mut w = hp.initial_latent();
    for (stage, phase) in phases.iter().enumerate() {
        for step in 0..settings.n_integration_steps {
            if let Some(t) = trajectory.as_deref_mut() {
                t.push(w.clone());
            }
            let g = phase_gradient(phase, &w, tau);
            w.axpy(settings.step_size, &g, 1.0);
            if !w.iter().all(|x| x.is_finite()) {
                return Err(Error::NonFiniteLatent { stage, step });
            }
        }
    }
    Ok(w)
}

/// Simulate the pipeline's stages in order with unit-step gradient ascent.
pub fn simulate_pipeline(
    hp: &LpgHyperparameters,
    pipeline: &TrainingPipeline,
    settings: &SimulationSettings,
) -> Result<LatentWeights> {
    simulate_schedule(hp, pipeline, Schedule::Sequential, settings)
}

pub fn simulate_schedule(
    hp: &LpgHyperparameters,
    pipeline: &TrainingPipeline,
    schedule: Schedule,
    settings: &SimulationSettings,
) -> Result<LatentWeights> {
    let phases = build_phases(hp, pipeline, schedule);
    run_phases(hp, &phases, settings, None).map(LatentWeights)
}
