//! Self-tests run by the `check` command: analytic gradients against finite
//! differences, simulation against closed-form projections, the equilibrium
//! identity and the reference similarity diagonal.

use std::time::Instant;

use nalgebra::{DMatrix, DVector};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::domain::{enumerate_objects, Dataset, Object, PreferenceRecord, TrainingPipeline, TrainingStage, N_FEATURES};
use crate::error::Result;
use crate::fit::{hyper_gradient, GradientMode, ModelVariant};
use crate::lpg::reference::{REFERENCE_SALIENCY, REFERENCE_SIMILARITY_DIAGONAL, REFERENCE_TAU, REFERENCE_W0};
use crate::lpg::{
    project_pipeline, reference, sigmoid, similarity_metric, simulate_pipeline, stage_objective, LpgHyperparameters,
    SimulationSettings, Structure,
};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CheckConfig {
    /// Random draws for the stage-gradient check.
    pub gradient_draws: usize,
    /// Random pipelines for the projection check.
    pub projection_pipelines: usize,
    /// Records in the outer-gradient dataset.
    pub outer_records: usize,
}

impl Default for CheckConfig {
    fn default() -> Self {
        CheckConfig {
            gradient_draws: 100,
            projection_pipelines: 100,
            outer_records: 5,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CheckOutcome {
    pub name: String,
    pub passed: bool,
    pub max_error: f64,
    pub tolerance: f64,
    pub cases: usize,
    pub seconds: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CheckReport {
    pub checks: Vec<CheckOutcome>,
}

impl CheckReport {
    pub fn all_passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }
}

/// Tolerances of the individual checks.
pub const STAGE_GRADIENT_TOLERANCE: f64 = 1e-5;
pub const PROJECTION_TOLERANCE: f64 = 1e-3;
pub const EQUILIBRIUM_TOLERANCE: f64 = 1e-3;
pub const SIMILARITY_TOLERANCE: f64 = 0.01;
pub const OUTER_GRADIENT_TOLERANCE: f64 = 1e-3;

/// `‖a − b‖ / ‖b‖`, with the denominator floored at `1e-8`.
pub fn relative_error(a: &[f64], b: &[f64]) -> f64 {
    let diff: f64 = a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt();
    let norm: f64 = b.iter().map(|y| y * y).sum::<f64>().sqrt();
    diff / norm.max(1e-8)
}

/// Hyperparameters near the reference fit: each saliency entry scaled by
/// U(0.9, 1.1), `τ ∈ [0.6, 0.8]`, `w0 ∈ [-0.5, 0]`. Unit-step ascent is
/// stable at this scale.
pub fn fitted_scale_draw(rng: &mut impl Rng) -> LpgHyperparameters {
    let s = DMatrix::from_fn(N_FEATURES, N_FEATURES, |i, j| REFERENCE_SALIENCY[i][j] * rng.gen_range(0.9..1.1));
    let tau: f64 = rng.gen_range(0.6..0.8);
    LpgHyperparameters::new(Structure::Full, s, tau.ln(), rng.gen_range(-0.5..0.0)).expect("pattern preserved")
}

fn random_object(rng: &mut impl Rng) -> Object {
    *enumerate_objects().choose(rng).expect("24 objects")
}

fn random_distinct_pair(rng: &mut impl Rng) -> (Object, Object) {
    let objs = enumerate_objects();
    let mut pick = objs.choose_multiple(rng, 2);
    (*pick.next().expect("two"), *pick.next().expect("two"))
}

fn timed(name: &str, tolerance: f64, f: impl FnOnce() -> Result<(f64, usize)>) -> Result<CheckOutcome> {
    let start = Instant::now();
    let (max_error, cases) = f()?;
    Ok(CheckOutcome {
        name: name.to_string(),
        passed: max_error < tolerance,
        max_error,
        tolerance,
        cases,
        seconds: start.elapsed().as_secs_f64(),
    })
}

/// Worst relative error of the analytic latent gradient of random stage
/// objectives (with and without distractors) against central differences.
pub fn check_stage_gradient(draws: usize, seed: u64) -> Result<CheckOutcome> {
    timed("stage_gradient", STAGE_GRADIENT_TOLERANCE, || {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut worst: f64 = 0.0;
        let h = 1e-5;
        for k in 0..draws {
            let hp = fitted_scale_draw(&mut rng);
            let w = DVector::from_fn(N_FEATURES, |_, _| rng.gen_range(-1.0..1.0));
            let stage = if k % 2 == 0 {
                TrainingStage::goal_only(random_object(&mut rng))
            } else {
                let (g, d) = random_distinct_pair(&mut rng);
                TrainingStage::new(g, Some(d))?
            };
            let analytic = stage_objective(&hp, &w, &stage).grad_w;
            let numeric: Vec<f64> = (0..w.len())
                .map(|i| {
                    let (mut up, mut dn) = (w.clone(), w.clone());
                    up[i] += h;
                    dn[i] -= h;
                    (stage_objective(&hp, &up, &stage).j - stage_objective(&hp, &dn, &stage).j) / (2.0 * h)
                })
                .collect();
            worst = worst.max(relative_error(analytic.as_slice(), &numeric));
        }
        Ok((worst, draws))
    })
}

/// Worst per-component gap between simulated weights and the iterated
/// closed-form projection on random one- and two-stage pipelines.
pub fn check_projection(pipelines: usize, seed: u64) -> Result<CheckOutcome> {
    timed("projection", PROJECTION_TOLERANCE, || {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let settings = SimulationSettings::default();
        let mut worst: f64 = 0.0;
        for k in 0..pipelines {
            let hp = fitted_scale_draw(&mut rng);
            let stages = if k % 2 == 0 {
                vec![TrainingStage::goal_only(random_object(&mut rng))]
            } else {
                let (a, b) = random_distinct_pair(&mut rng);
                vec![TrainingStage::goal_only(a), TrainingStage::goal_only(b)]
            };
            let p = TrainingPipeline::new(format!("p{k}"), stages)?;
            let sim = simulate_pipeline(&hp, &p, &settings)?;
            let proj = project_pipeline(&hp, &p)?;
            let last = &proj.last().expect("non-empty").0;
            worst = worst.max((&sim.0 - last).amax());
        }
        Ok((worst, pipelines))
    })
}

/// Goal probability after single-stage simulation with identity saliency,
/// unit temperature and zero initial weights, against `σ(1)`.
pub fn check_equilibrium() -> Result<CheckOutcome> {
    timed("equilibrium", EQUILIBRIUM_TOLERANCE, || {
        let hp = LpgHyperparameters::initial(Structure::Full, N_FEATURES);
        let mut worst: f64 = 0.0;
        let objs = enumerate_objects();
        for &g in &objs {
            let p = TrainingPipeline::new("eq", vec![TrainingStage::goal_only(g)])?;
            let w = simulate_pipeline(&hp, &p, &SimulationSettings::default())?;
            let pi = stage_objective(&hp, &w.0, &p.stages()[0]).pi_goal;
            worst = worst.max((pi - sigmoid(1.0)).abs());
        }
        Ok((worst, objs.len()))
    })
}

/// Diagonal of `SSᵀ` from the reference saliency against the frozen reference values.
pub fn check_similarity_diagonal() -> Result<CheckOutcome> {
    timed("similarity_diagonal", SIMILARITY_TOLERANCE, || {
        let m = similarity_metric(&reference::reference_hyperparameters());
        let worst = (0..N_FEATURES)
            .map(|i| (m[(i, i)] - REFERENCE_SIMILARITY_DIAGONAL[i]).abs())
            .fold(0.0, f64::max);
        Ok((worst, N_FEATURES))
    })
}

/// Small random dataset for the outer-gradient check: `n_records` records
/// over two pipelines, one with a distractor.
pub fn outer_gradient_dataset(n_records: usize, seed: u64) -> Result<Dataset> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (g1, d1) = random_distinct_pair(&mut rng);
    let g2 = random_object(&mut rng);
    let p1 = TrainingPipeline::new("single", vec![TrainingStage::new(g1, Some(d1))?])?;
    let p2 = TrainingPipeline::new("two", vec![TrainingStage::goal_only(g1), TrainingStage::goal_only(g2)])?;
    let records = (0..n_records)
        .map(|k| {
            let (a, b) = random_distinct_pair(&mut rng);
            let ca = rng.gen_range(0..=100u32);
            let cb = rng.gen_range(0..=100 - ca);
            let id = if k % 2 == 0 { "single" } else { "two" };
            PreferenceRecord::new(id, a, b, [ca, cb, 100 - ca - cb], 100)
        })
        .collect::<Result<Vec<_>>>()?;
    Dataset::new([p1, p2], records)
}

/// Adjoint hyperparameter gradients of the full variant against finite
/// differences at default settings, around the reference fit.
pub fn check_outer_gradient(n_records: usize, seed: u64) -> Result<CheckOutcome> {
    timed("outer_gradient", OUTER_GRADIENT_TOLERANCE, || {
        let d = outer_gradient_dataset(n_records, seed)?;
        let hp = LpgHyperparameters::from_square_table(&REFERENCE_SALIENCY, REFERENCE_TAU, REFERENCE_W0)?;
        let s = SimulationSettings::default();
        let a = hyper_gradient(&hp, ModelVariant::Full, &d, &s, GradientMode::Adjoint)?;
        let f = hyper_gradient(&hp, ModelVariant::Full, &d, &s, GradientMode::FiniteDifference)?;
        Ok((relative_error(&a.gradient, &f.gradient), n_records))
    })
}

pub fn run_checks(config: &CheckConfig, seed: u64) -> Result<CheckReport> {
    Ok(CheckReport {
        checks: vec![
            check_stage_gradient(config.gradient_draws, seed)?,
            check_projection(config.projection_pipelines, seed)?,
            check_equilibrium()?,
            check_similarity_diagonal()?,
            check_outer_gradient(config.outer_records, seed)?,
        ],
    })
}
