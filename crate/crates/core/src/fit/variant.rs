use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::domain::TrainingPipeline;
use crate::error::{Error, Result};
use crate::lpg::{simulate_schedule, LatentWeights, LpgHyperparameters, Schedule, SimulationSettings, Structure};

/// The model family being fitted.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ModelVariant {
    /// Upper-triangular saliency, stages simulated in order.
    Full,
    /// Diagonal saliency.
    Diagonal,
    /// Diagonal saliency over the pairwise-interaction feature basis.
    Quadratic,
    /// Only the final stage is simulated.
    Memoryless,
    /// All stage objectives averaged and ascended together.
    Simultaneous,
}

impl ModelVariant {
    pub const ALL: [ModelVariant; 5] = [
        ModelVariant::Full,
        ModelVariant::Diagonal,
        ModelVariant::Quadratic,
        ModelVariant::Memoryless,
        ModelVariant::Simultaneous,
    ];

    pub fn structure(self) -> Structure {
        match self {
            ModelVariant::Diagonal => Structure::Diagonal,
            ModelVariant::Quadratic => Structure::Quadratic,
            ModelVariant::Full | ModelVariant::Memoryless | ModelVariant::Simultaneous => Structure::Full,
        }
    }

    pub fn schedule(self) -> Schedule {
        match self {
            ModelVariant::Memoryless => Schedule::FinalStageOnly,
            ModelVariant::Simultaneous => Schedule::Joint,
            _ => Schedule::Sequential,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            ModelVariant::Full => "full",
            ModelVariant::Diagonal => "diagonal",
            ModelVariant::Quadratic => "quadratic",
            ModelVariant::Memoryless => "memoryless",
            ModelVariant::Simultaneous => "simultaneous",
        }
    }

    /// Whether predicted values are linear in the base features.
    pub fn is_feature_linear(self) -> bool {
        self != ModelVariant::Quadratic
    }

    /// Initial hyperparameters: identity saliency, `τ = 1`, `w0 = 0`.
    pub fn initial_hyperparameters(self, latent_dim: usize) -> LpgHyperparameters {
        LpgHyperparameters::initial(self.structure(), latent_dim)
    }
}

impl fmt::Display for ModelVariant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ModelVariant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        ModelVariant::ALL
            .into_iter()
            .find(|v| v.name() == s)
            .ok_or_else(|| Error::Invalid(format!("unknown model variant `{s}`")))
    }
}

/// Final latent weights of a pipeline under the variant's schedule.
pub fn simulate_variant(
    hp: &LpgHyperparameters,
    pipeline: &TrainingPipeline,
    variant: ModelVariant,
    settings: &SimulationSettings,
) -> Result<LatentWeights> {
    if hp.structure() != variant.structure() {
        return Err(Error::Invalid(format!(
            "{} hyperparameters cannot drive the {variant} variant",
            hp.structure()
        )));
    }
    simulate_schedule(hp, pipeline, variant.schedule(), settings)
}
