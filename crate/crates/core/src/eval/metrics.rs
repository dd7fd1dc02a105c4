//! Distribution-level fit metrics between predicted and observed outcomes.

use serde::{Deserialize, Serialize};

use crate::domain::ChoiceDistribution;
use crate::error::{Error, Result};

/// Minimum observed two-way rate gap for a pair to count towards
/// directional accuracy.
pub const DIRECTIONAL_THRESHOLD: f64 = 0.10;

// absorbs rounding in gaps computed from counts, e.g. 0.55 - 0.45
const THRESHOLD_SLACK: f64 = 1e-12;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MetricsMode {
    /// Goal a, goal b and the null outcome.
    ThreeWay,
    /// Goals only, renormalised after dropping the null outcome.
    TwoWay,
}

impl MetricsMode {
    pub fn name(self) -> &'static str {
        match self {
            MetricsMode::ThreeWay => "three_way",
            MetricsMode::TwoWay => "two_way",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub kl: f64,
    pub tv: f64,
    pub brier: f64,
    pub directional_accuracy: f64,
    /// Pairs whose observed two-way gap reaches the threshold.
    pub n_directional: usize,
    /// Records scored.
    pub n: usize,
    /// Records dropped because the observation had no goal mass (two-way only).
    pub n_skipped: usize,
    pub mode: MetricsMode,
}

/// `Σ q ln(q/p)` with `0 ln 0 = 0`.
pub fn kl_divergence(q: &[f64], p: &[f64]) -> f64 {
    q.iter()
        .zip(p)
        .filter(|(&qk, _)| qk > 0.0)
        .map(|(&qk, &pk)| qk * (qk / pk).ln())
        .sum()
}

pub fn total_variation(q: &[f64], p: &[f64]) -> f64 {
    0.5 * q.iter().zip(p).map(|(a, b)| (a - b).abs()).sum::<f64>()
}

/// Mean squared error over the outcomes.
pub fn brier_score(q: &[f64], p: &[f64]) -> f64 {
    q.iter().zip(p).map(|(a, b)| (a - b) * (a - b)).sum::<f64>() / q.len() as f64
}

/// `(a, b)` share of a distribution, or `None` when it has no goal mass.
pub fn two_way(d: &ChoiceDistribution) -> Option<[f64; 2]> {
    let m = d.p_a + d.p_b;
    (m > 0.0).then(|| [d.p_a / m, d.p_b / m])
}

/// Score predictions against aligned observations.
pub fn compute_metrics(
    predictions: &[ChoiceDistribution],
    observations: &[ChoiceDistribution],
    mode: MetricsMode,
) -> Result<MetricsReport> {
    if predictions.len() != observations.len() {
        return Err(Error::Invalid(format!(
            "{} predictions for {} observations",
            predictions.len(),
            observations.len()
        )));
    }
    let (mut kl, mut tv, mut brier) = (0.0, 0.0, 0.0);
    let (mut n, mut n_skipped, mut n_dir, mut correct) = (0usize, 0usize, 0usize, 0usize);
    for (p, q) in predictions.iter().zip(observations) {
        let q2 = two_way(q);
        match mode {
            MetricsMode::ThreeWay => {
                let (pa, qa) = (p.as_array(), q.as_array());
                kl += kl_divergence(&qa, &pa);
                tv += total_variation(&qa, &pa);
                brier += brier_score(&qa, &pa);
            }
            MetricsMode::TwoWay => {
                let (Some(q2), Some(p2)) = (q2, two_way(p)) else {
                    n_skipped += 1;
                    continue;
                };
                kl += kl_divergence(&q2, &p2);
                tv += total_variation(&q2, &p2);
                brier += brier_score(&q2, &p2);
            }
        }
        n += 1;
        if let Some([qa, qb]) = q2 {
            let observed = qa - qb;
            if observed.abs() >= DIRECTIONAL_THRESHOLD - THRESHOLD_SLACK {
                n_dir += 1;
                let predicted = p.p_a - p.p_b;
                if predicted != 0.0 && predicted.signum() == observed.signum() {
                    correct += 1;
                }
            }
        }
    }
    if n == 0 {
        return Err(Error::Invalid("no records left to score".into()));
    }
    let nf = n as f64;
    Ok(MetricsReport {
        kl: kl / nf,
        tv: tv / nf,
        brier: brier / nf,
        directional_accuracy: if n_dir == 0 { 0.0 } else { correct as f64 / n_dir as f64 },
        n_directional: n_dir,
        n,
        n_skipped,
        mode,
    })
}
