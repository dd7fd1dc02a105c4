use std::time::Instant;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::adam::Adam;
use super::adjoint::{adjoint_gradient, finite_difference_gradient, GradientMode, FINITE_DIFFERENCE_STEP};
use super::loss::per_example_losses;
use super::variant::ModelVariant;
use crate::domain::Dataset;
use crate::error::{Error, Result};
use crate::lpg::{LpgHyperparameters, SimulationSettings, DEFAULT_INTEGRATION_STEPS, DEFAULT_LATENT_DIM};

/// Outer-loop optimiser settings.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FitConfig {
    pub learning_rate: f64,
    pub batch_size: usize,
    pub epochs: usize,
    pub adam_beta1: f64,
    pub adam_beta2: f64,
    pub adam_epsilon: f64,
    pub n_integration_steps: usize,
    /// Inner ascent step size.
    pub step_size: f64,
    pub gradient_mode: GradientMode,
    pub rng_seed: u64,
    /// Latent dimension for the full-structure variants.
    pub latent_dim: usize,
}

impl Default for FitConfig {
    fn default() -> Self {
        FitConfig {
            learning_rate: 0.03,
            batch_size: 64,
            epochs: 1,
            adam_beta1: 0.9,
            adam_beta2: 0.999,
            adam_epsilon: 1e-8,
            n_integration_steps: DEFAULT_INTEGRATION_STEPS,
            step_size: 1.0,
            gradient_mode: GradientMode::Adjoint,
            rng_seed: 0,
            latent_dim: DEFAULT_LATENT_DIM,
        }
    }
}

impl FitConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::Invalid(format!("fit config: {m}")));
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return bad("learning_rate must be positive");
        }
        if self.batch_size == 0 {
            return bad("batch_size must be positive");
        }
        if !(self.adam_beta1 > 0.0 && self.adam_beta1 < 1.0 && self.adam_beta2 > 0.0 && self.adam_beta2 < 1.0) {
            return bad("adam betas must lie in (0, 1)");
        }
        if self.adam_epsilon.is_nan() || self.adam_epsilon <= 0.0 {
            return bad("adam_epsilon must be positive");
        }
        if self.n_integration_steps == 0 {
            return bad("n_integration_steps must be positive");
        }
        if !(self.step_size > 0.0 && self.step_size.is_finite()) {
            return bad("step_size must be positive");
        }
        if self.latent_dim == 0 {
            return bad("latent_dim must be positive");
        }
        Ok(())
    }

    pub fn simulation(&self) -> SimulationSettings {
        SimulationSettings {
            n_integration_steps: self.n_integration_steps,
            step_size: self.step_size,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FitDiagnostics {
    /// Mean loss of each mini-batch before its update.
    pub batch_losses: Vec<f64>,
    pub gradient_norms: Vec<f64>,
    pub n_updates: usize,
    pub wall_time_seconds: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FitResult {
    pub variant: ModelVariant,
    pub hyperparameters: LpgHyperparameters,
    /// Mean of `per_example_losses`.
    pub train_loss: f64,
    pub per_example_losses: Vec<f64>,
    pub diagnostics: FitDiagnostics,
}

/// Fit the variant's hyperparameters by Adam on mini-batches of records.
pub fn fit_hyperparameters(dataset: &Dataset, variant: ModelVariant, config: &FitConfig) -> Result<FitResult> {
    config.validate()?;
    fit_from(dataset, variant, config, variant.initial_hyperparameters(config.latent_dim))
}

/// As [`fit_hyperparameters`] but starting from the given hyperparameters.
pub fn fit_from(
    dataset: &Dataset,
    variant: ModelVariant,
    config: &FitConfig,
    init: LpgHyperparameters,
) -> Result<FitResult> {
    config.validate()?;
    if dataset.is_empty() {
        return Err(Error::Invalid("cannot fit an empty dataset".into()));
    }
    if init.structure() != variant.structure() {
        return Err(Error::Invalid(format!(
            "initial {} hyperparameters do not match the {variant} variant",
            init.structure()
        )));
    }
    let start = Instant::now();
    let settings = config.simulation();
    let mut hp = init;
    let mut params = hp.to_params();
    let mut adam = Adam::new(
        params.len(),
        config.learning_rate,
        config.adam_beta1,
        config.adam_beta2,
        config.adam_epsilon,
    );
    let mut rng = ChaCha8Rng::seed_from_u64(config.rng_seed);
    let mut order: Vec<usize> = (0..dataset.records().len()).collect();
    let mut diagnostics = FitDiagnostics {
        batch_losses: Vec::new(),
        gradient_norms: Vec::new(),
        n_updates: 0,
        wall_time_seconds: 0.0,
    };
    for epoch in 0..config.epochs {
        order.shuffle(&mut rng);
        for (batch, idx) in order.chunks(config.batch_size).enumerate() {
            let g = match config.gradient_mode {
                GradientMode::Adjoint => adjoint_gradient(&hp, variant, dataset, idx, &settings),
                GradientMode::FiniteDifference => {
                    finite_difference_gradient(&hp, variant, dataset, idx, &settings, FINITE_DIFFERENCE_STEP)
                }
            };
            let g = match g {
                Ok(g) => g,
                Err(Error::NonFiniteLatent { .. }) => {
                    return Err(Error::NonFiniteFit {
                        epoch,
                        batch,
                        loss: f64::NAN,
                        grad_norm: f64::NAN,
                    })
                }
                Err(e) => return Err(e),
            };
            let norm = g.norm();
            if !g.loss.is_finite() || !norm.is_finite() {
                return Err(Error::NonFiniteFit {
                    epoch,
                    batch,
                    loss: g.loss,
                    grad_norm: norm,
                });
            }
            diagnostics.batch_losses.push(g.loss);
            diagnostics.gradient_norms.push(norm);
            adam.step(&mut params, &g.gradient);
            hp = hp.with_params(&params);
            diagnostics.n_updates += 1;
        }
    }
    let per_example_losses = per_example_losses(&hp, variant, dataset, &settings)?;
    let train_loss = per_example_losses.iter().sum::<f64>() / per_example_losses.len() as f64;
    diagnostics.wall_time_seconds = start.elapsed().as_secs_f64();
    Ok(FitResult {
        variant,
        hyperparameters: hp,
        train_loss,
        per_example_losses,
        diagnostics,
    })
}
