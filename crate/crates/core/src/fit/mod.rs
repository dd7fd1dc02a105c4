//! Outer-loop fitting of the model hyperparameters, the model variants, the
//! uniform baseline and the per-agent lower bounds.

mod adam;
mod adjoint;
mod bounds;
mod fitting;
mod loss;
mod sweep;
mod variant;

pub use adjoint::{hyper_gradient, GradientMode, HyperGradient, FINITE_DIFFERENCE_STEP};
pub use bounds::{lower_bound_per_feature, lower_bound_per_goal};
pub use fitting::{fit_from, fit_hyperparameters, FitConfig, FitDiagnostics, FitResult};
pub use loss::{
    baseline_uniform, modelling_loss, per_example_losses, predict_dataset, record_kl, simulate_dataset,
};
pub use sweep::{latent_dim_sweep, write_sweep_csv};
pub use variant::{simulate_variant, ModelVariant};
