//! Latent policy gradients: a low-dimensional latent vector `w` is pushed by
//! gradient ascent on an entropy-regularised objective over preference
//! functions, one training stage at a time. The saliency matrix `S`, the
//! temperature `τ` and the initial value `w0` are the model's hyperparameters.

mod hyper;
mod objective;
mod projection;
pub mod reference;
mod simulate;

pub use hyper::{expand_quadratic, LpgHyperparameters, Structure, DEFAULT_LATENT_DIM, QUADRATIC_FEATURES};
pub use objective::{
    binary_entropy, goal_value, predict_preferences, sigmoid, softmax3, softplus, stage_objective,
    StageObjectiveValue,
};
pub use projection::{equilibrium_projection, induced_value, project_pipeline, similarity_metric};
pub use simulate::{
    simulate_pipeline, simulate_schedule, LatentWeights, Schedule, SimulationSettings,
    DEFAULT_INTEGRATION_STEPS,
};

pub(crate) use objective::Local;
pub(crate) use simulate::{build_phases, run_phases};
