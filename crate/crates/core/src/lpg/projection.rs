//! Closed-form equilibria: each no-distractor stage drives the weights along
//! `Sᵀφ_g` until they reach the hyperplane `φ_g·Sw = 1/τ`.

use nalgebra::{DMatrix, DVector};

use super::hyper::LpgHyperparameters;
use super::simulate::LatentWeights;
use crate::domain::{Object, TrainingPipeline};
use crate::error::{Error, Result};

/// Project `w_start` onto the goal's equilibrium hyperplane along `Sᵀφ_g`.
pub fn equilibrium_projection(
    hp: &LpgHyperparameters,
    w_start: &DVector<f64>,
    goal: Object,
) -> Result<LatentWeights> {
    let phi = hp.embed(Some(goal));
    let dir = hp.saliency().transpose() * &phi;
    let norm_sq = dir.norm_squared();
    if norm_sq == 0.0 {
        return Err(Error::DegenerateGoal(goal.to_string()));
    }
    let gap = hp.tau().recip() - dir.dot(w_start);
    Ok(LatentWeights(w_start + dir * (gap / norm_sq)))
}

/// Weights after each stage when every stage is replaced by its equilibrium
/// projection, starting from `w0 · 1`. Distractors are ignored.
pub fn project_pipeline(
    hp: &LpgHyperparameters,
    pipeline: &TrainingPipeline,
) -> Result<Vec<LatentWeights>> {
    let mut w = hp.initial_latent();
    let mut trace = Vec::with_capacity(pipeline.stages().len());
    for stage in pipeline.stages() {
        w = equilibrium_projection(hp, &w, stage.goal)?.0;
        trace.push(LatentWeights(w.clone()));
    }
    Ok(trace)
}

/// The object similarity metric `SSᵀ`.
pub fn similarity_metric(hp: &LpgHyperparameters) -> DMatrix<f64> {
    hp.saliency() * hp.saliency().transpose()
}

/// Value of `probe` after training on `goal` to equilibrium from `w = 0`:
/// `τ⁻¹ φ'·SSᵀφ_g / ‖Sᵀφ_g‖²`.
pub fn induced_value(hp: &LpgHyperparameters, probe: Object, goal: Object) -> Result<f64> {
    let phi_g = hp.embed(Some(goal));
    let phi_p = hp.embed(Some(probe));
    let dir = hp.saliency().transpose() * &phi_g;
    let norm_sq = dir.norm_squared();
    if norm_sq == 0.0 {
        return Err(Error::DegenerateGoal(goal.to_string()));
    }
    let sst = similarity_metric(hp);
    Ok(phi_p.dot(&(sst * phi_g)) / (hp.tau() * norm_sq))
}
