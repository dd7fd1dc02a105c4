//! Agreement between fitted Elo scores and model-implied object values.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::domain::{Dataset, Object};
use crate::elo::EloTable;
use crate::error::{Error, Result};
use crate::fit::{simulate_dataset, ModelVariant};
use crate::lpg::{goal_value, LpgHyperparameters, SimulationSettings};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CorrelationPoint {
    pub pipeline_id: String,
    pub object: Object,
    pub elo: f64,
    pub model_value: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CorrelationReport {
    pub spearman_rho: f64,
    pub r_squared: f64,
    pub normalised: bool,
    pub points: Vec<CorrelationPoint>,
}

/// Pair each agent's Elo scores with the model's values `φ·Sw` for the same
/// objects and correlate them.
pub fn elo_vs_model(
    dataset: &Dataset,
    elo_tables: &BTreeMap<String, EloTable>,
    hp: &LpgHyperparameters,
    variant: ModelVariant,
    settings: &SimulationSettings,
    normalised: bool,
) -> Result<CorrelationReport> {
    let ids: Vec<&String> = dataset.pipelines().keys().collect();
    if ids.len() != elo_tables.len() || ids.iter().any(|id| !elo_tables.contains_key(*id)) {
        return Err(Error::Invalid(
            "Elo tables and dataset must cover the same agents".into(),
        ));
    }
    let weights = simulate_dataset(hp, variant, dataset, settings)?;
    let mut points = Vec::new();
    for id in ids {
        let w = &weights[id].0;
        for (&object, &elo) in &elo_tables[id].scores {
            points.push(CorrelationPoint {
                pipeline_id: id.clone(),
                object,
                elo,
                model_value: goal_value(hp, w, Some(object)),
            });
        }
    }
    correlate_points(points, normalised)
}

/// Correlation statistics of a point table, optionally after subtracting
/// each agent's mean from both coordinates.
pub fn correlate_points(mut points: Vec<CorrelationPoint>, normalised: bool) -> Result<CorrelationReport> {
    if points.len() < 2 {
        return Err(Error::Invalid("need at least two points to correlate".into()));
    }
    if normalised {
        let mut sums: BTreeMap<String, (f64, f64, usize)> = BTreeMap::new();
        for p in &points {
            let e = sums.entry(p.pipeline_id.clone()).or_default();
            e.0 += p.elo;
            e.1 += p.model_value;
            e.2 += 1;
        }
        for p in &mut points {
            let (se, sm, n) = sums[&p.pipeline_id];
            p.elo -= se / n as f64;
            p.model_value -= sm / n as f64;
        }
    }
    let x: Vec<f64> = points.iter().map(|p| p.model_value).collect();
    let y: Vec<f64> = points.iter().map(|p| p.elo).collect();
    let r = pearson(&x, &y);
    Ok(CorrelationReport {
        spearman_rho: pearson(&ranks(&x), &ranks(&y)),
        r_squared: r * r,
        normalised,
        points,
    })
}

pub fn pearson(x: &[f64], y: &[f64]) -> f64 {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (a, b) in x.iter().zip(y) {
        sxy += (a - mx) * (b - my);
        sxx += (a - mx) * (a - mx);
        syy += (b - my) * (b - my);
    }
    sxy / (sxx * syy).sqrt()
}

/// Ranks starting at 1, ties sharing their average rank.
pub fn ranks(x: &[f64]) -> Vec<f64> {
    let mut idx: Vec<usize> = (0..x.len()).collect();
    idx.sort_by(|&a, &b| x[a].total_cmp(&x[b]));
    let mut out = vec![0.0; x.len()];
    let mut i = 0;
    while i < idx.len() {
        let mut j = i;
        while j + 1 < idx.len() && x[idx[j + 1]] == x[idx[i]] {
            j += 1;
        }
        let avg = (i + j) as f64 / 2.0 + 1.0;
        for &k in &idx[i..=j] {
            out[k] = avg;
        }
        i = j + 1;
    }
    out
}
