//! Modelling loss: mean KL divergence from empirical to predicted outcome
//! distributions, one term per (pipeline, evaluation pair) record.

use std::collections::BTreeMap;

use rayon::prelude::*;

use super::variant::{simulate_variant, ModelVariant};
use crate::domain::{ChoiceDistribution, Dataset, PreferenceRecord};
use crate::error::{Error, Result};
use crate::eval::kl_divergence;
use crate::lpg::{predict_preferences, LatentWeights, LpgHyperparameters, SimulationSettings};

/// Final latent weights for every pipeline in the dataset.
pub fn simulate_dataset(
    hp: &LpgHyperparameters,
    variant: ModelVariant,
    dataset: &Dataset,
    settings: &SimulationSettings,
) -> Result<BTreeMap<String, LatentWeights>> {
    let pipelines: Vec<_> = dataset.pipelines().values().collect();
    let weights = pipelines
        .par_iter()
        .map(|p| simulate_variant(hp, p, variant, settings))
        .collect::<Result<Vec<_>>>()?;
    Ok(pipelines
        .into_iter()
        .map(|p| p.id().to_string())
        .zip(weights)
        .collect())
}

/// Predicted distributions aligned with `dataset.records()`.
pub fn predict_dataset(
    hp: &LpgHyperparameters,
    variant: ModelVariant,
    dataset: &Dataset,
    settings: &SimulationSettings,
) -> Result<Vec<ChoiceDistribution>> {
    let w = simulate_dataset(hp, variant, dataset, settings)?;
    Ok(dataset
        .records()
        .iter()
        .map(|r| predict_preferences(hp, &w[r.pipeline_id()].0, r.object_a(), r.object_b()))
        .collect())
}

pub fn record_kl(record: &PreferenceRecord, prediction: &ChoiceDistribution) -> f64 {
    kl_divergence(&record.distribution().as_array(), &prediction.as_array())
}

/// KL divergence of each record, in record order.
pub fn per_example_losses(
    hp: &LpgHyperparameters,
    variant: ModelVariant,
    dataset: &Dataset,
    settings: &SimulationSettings,
) -> Result<Vec<f64>> {
    let preds = predict_dataset(hp, variant, dataset, settings)?;
    Ok(dataset
        .records()
        .iter()
        .zip(&preds)
        .map(|(r, p)| record_kl(r, p))
        .collect())
}

/// Mean KL over the dataset's records.
pub fn modelling_loss(
    hp: &LpgHyperparameters,
    variant: ModelVariant,
    dataset: &Dataset,
    settings: &SimulationSettings,
) -> Result<f64> {
    if dataset.is_empty() {
        return Err(Error::Invalid("modelling loss of an empty dataset".into()));
    }
    let l = per_example_losses(hp, variant, dataset, settings)?;
    Ok(l.iter().sum::<f64>() / l.len() as f64)
}

/// Loss of predicting `(1/3, 1/3, 1/3)` for every record.
pub fn baseline_uniform(dataset: &Dataset) -> Result<f64> {
    if dataset.is_empty() {
        return Err(Error::Invalid("uniform baseline of an empty dataset".into()));
    }
    let u = ChoiceDistribution::UNIFORM;
    let total: f64 = dataset.records().iter().map(|r| record_kl(r, &u)).sum();
    Ok(total / dataset.records().len() as f64)
}
