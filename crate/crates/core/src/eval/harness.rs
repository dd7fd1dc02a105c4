//! Cross-validation over pipelines and train/eval transfer plans.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use super::metrics::{compute_metrics, MetricsMode, MetricsReport};
use crate::domain::{Dataset, TrainingPipeline};
use crate::elo::fold_assignment;
use crate::error::{Error, Result};
use crate::fit::{baseline_uniform, fit_hyperparameters, modelling_loss, predict_dataset, FitConfig, FitResult, ModelVariant};

/// Predicate over pipelines, serialised in external-tag form, e.g.
/// `{"stage_count": 1}`, `{"has_distractor": false}` or
/// `{"and": [{"min_stages": 2}, {"not": {"ids": ["p3"]}}]}`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PipelineFilter {
    All,
    StageCount(usize),
    MinStages(usize),
    MaxStages(usize),
    HasDistractor(bool),
    Ids(Vec<String>),
    /// Pipelines in fold `index` of a seeded `k`-way split of all pipeline ids.
    Fold { k: usize, index: usize, seed: u64 },
    And(Vec<PipelineFilter>),
    Or(Vec<PipelineFilter>),
    Not(Box<PipelineFilter>),
}

impl PipelineFilter {
    /// Ids of the dataset's pipelines accepted by the filter.
    pub fn select(&self, dataset: &Dataset) -> Result<BTreeSet<String>> {
        let all: Vec<&TrainingPipeline> = dataset.pipelines().values().collect();
        let ids = |f: &dyn Fn(&TrainingPipeline) -> bool| -> BTreeSet<String> {
            all.iter().filter(|p| f(p)).map(|p| p.id().to_string()).collect()
        };
        Ok(match self {
            PipelineFilter::All => ids(&|_| true),
            PipelineFilter::StageCount(n) => ids(&|p| p.stages().len() == *n),
            PipelineFilter::MinStages(n) => ids(&|p| p.stages().len() >= *n),
            PipelineFilter::MaxStages(n) => ids(&|p| p.stages().len() <= *n),
            PipelineFilter::HasDistractor(b) => ids(&|p| p.has_distractor() == *b),
            PipelineFilter::Ids(list) => ids(&|p| list.iter().any(|i| i == p.id())),
            PipelineFilter::Fold { k, index, seed } => {
                if *k < 2 || index >= k {
                    return Err(Error::Invalid(format!("fold {index} of {k} is not a valid holdout fold")));
                }
                let folds = fold_assignment(all.len(), *k, *seed);
                all.iter()
                    .zip(folds)
                    .filter(|(_, f)| f == index)
                    .map(|(p, _)| p.id().to_string())
                    .collect()
            }
            PipelineFilter::And(fs) => {
                let mut acc = ids(&|_| true);
                for f in fs {
                    let s = f.select(dataset)?;
                    acc.retain(|id| s.contains(id));
                }
                acc
            }
            PipelineFilter::Or(fs) => {
                let mut acc = BTreeSet::new();
                for f in fs {
                    acc.extend(f.select(dataset)?);
                }
                acc
            }
            PipelineFilter::Not(f) => {
                let s = f.select(dataset)?;
                ids(&|p| !s.contains(p.id()))
            }
        })
    }
}

/// Which pipelines to fit on and which to evaluate on.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EvaluationPlan {
    pub train: PipelineFilter,
    pub eval: PipelineFilter,
    /// Folds for an additional cross-validation run over the train set.
    #[serde(default)]
    pub k: Option<usize>,
    #[serde(default)]
    pub seed: Option<u64>,
    /// Require the two selections to be disjoint.
    #[serde(default = "default_true")]
    pub holdout: bool,
}

fn default_true() -> bool {
    true
}

impl EvaluationPlan {
    /// Fit on single-stage pipelines, evaluate on two-stage ones.
    pub fn single_to_two_stage() -> Self {
        EvaluationPlan {
            train: PipelineFilter::StageCount(1),
            eval: PipelineFilter::StageCount(2),
            k: None,
            seed: None,
            holdout: true,
        }
    }

    /// Fit on pipelines without distractors, evaluate on those with one.
    pub fn no_distractor_to_distractor() -> Self {
        EvaluationPlan {
            train: PipelineFilter::HasDistractor(false),
            eval: PipelineFilter::HasDistractor(true),
            k: None,
            seed: None,
            holdout: true,
        }
    }

    /// Train and eval datasets, checked for emptiness and disjointness.
    pub fn split(&self, dataset: &Dataset) -> Result<(Dataset, Dataset)> {
        let train = self.train.select(dataset)?;
        let eval = self.eval.select(dataset)?;
        let train_ds = dataset.filter_pipelines(|p| train.contains(p.id()));
        let eval_ds = dataset.filter_pipelines(|p| eval.contains(p.id()));
        if train_ds.is_empty() {
            return Err(Error::EmptyFilter {
                filter: format!("train {}", serde_json::to_string(&self.train)?),
            });
        }
        if eval_ds.is_empty() {
            return Err(Error::EmptyFilter {
                filter: format!("eval {}", serde_json::to_string(&self.eval)?),
            });
        }
        if self.holdout {
            if let Some(id) = train.intersection(&eval).next() {
                return Err(Error::Invalid(format!(
                    "train and eval filters overlap (pipeline `{id}`)"
                )));
            }
        }
        Ok((train_ds, eval_ds))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TransferReport {
    pub variant: ModelVariant,
    pub train_loss: f64,
    pub eval_loss: f64,
    pub eval_baseline_uniform: f64,
    pub three_way: MetricsReport,
    pub two_way: MetricsReport,
    pub n_train_pipelines: usize,
    pub n_eval_pipelines: usize,
    pub fit: FitResult,
}

/// Fit on the plan's train selection and score the eval selection.
pub fn transfer_eval(
    dataset: &Dataset,
    plan: &EvaluationPlan,
    variant: ModelVariant,
    config: &FitConfig,
) -> Result<TransferReport> {
    let (train, eval) = plan.split(dataset)?;
    let fit = fit_hyperparameters(&train, variant, config)?;
    let settings = config.simulation();
    let preds = predict_dataset(&fit.hyperparameters, variant, &eval, &settings)?;
    let obs: Vec<_> = eval.records().iter().map(|r| r.distribution()).collect();
    Ok(TransferReport {
        variant,
        train_loss: fit.train_loss,
        eval_loss: modelling_loss(&fit.hyperparameters, variant, &eval, &settings)?,
        eval_baseline_uniform: baseline_uniform(&eval)?,
        three_way: compute_metrics(&preds, &obs, MetricsMode::ThreeWay)?,
        two_way: compute_metrics(&preds, &obs, MetricsMode::TwoWay)?,
        n_train_pipelines: train.pipelines().len(),
        n_eval_pipelines: eval.pipelines().len(),
        fit,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CrossValidationReport {
    pub variant: ModelVariant,
    pub k: usize,
    /// Held-out loss of each fold.
    pub fold_losses: Vec<f64>,
    pub mean_loss: f64,
    /// Standard error over folds (`n = k`).
    pub standard_error: f64,
    /// Fold label of each pipeline, in id order.
    pub assignment: Vec<(String, usize)>,
}

/// K-fold cross-validation over pipelines (not records), folds drawn from
/// `config.rng_seed`.
pub fn kfold_cv(dataset: &Dataset, variant: ModelVariant, k: usize, config: &FitConfig) -> Result<CrossValidationReport> {
    if k < 2 {
        return Err(Error::Invalid(format!("cross-validation needs at least 2 folds, got {k}")));
    }
    let ids: Vec<String> = dataset.pipelines().keys().cloned().collect();
    if ids.len() < k {
        return Err(Error::Invalid(format!("{} pipelines cannot fill {k} folds", ids.len())));
    }
    let folds = fold_assignment(ids.len(), k, config.rng_seed);
    let settings = config.simulation();
    let mut fold_losses = Vec::with_capacity(k);
    for fold in 0..k {
        let held: BTreeSet<&str> = ids
            .iter()
            .zip(&folds)
            .filter(|(_, &f)| f == fold)
            .map(|(id, _)| id.as_str())
            .collect();
        let train = dataset.filter_pipelines(|p| !held.contains(p.id()));
        let test = dataset.filter_pipelines(|p| held.contains(p.id()));
        if train.is_empty() || test.is_empty() {
            return Err(Error::Invalid(format!("fold {fold} has no records on one side of the split")));
        }
        let fit = fit_hyperparameters(&train, variant, config)?;
        fold_losses.push(modelling_loss(&fit.hyperparameters, variant, &test, &settings)?);
    }
    let (mean, se) = mean_and_standard_error(&fold_losses);
    Ok(CrossValidationReport {
        variant,
        k,
        fold_losses,
        mean_loss: mean,
        standard_error: se,
        assignment: ids.into_iter().zip(folds).collect(),
    })
}

/// Sample mean and `s / √n`.
pub fn mean_and_standard_error(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    if xs.len() < 2 {
        return (mean, 0.0);
    }
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}
