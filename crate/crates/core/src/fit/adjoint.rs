//! Hyperparameter gradients of the modelling loss.
//!
//! The adjoint pass replays the recorded inner-ascent trajectory backwards.
//! One ascent step is `w' = w + η Σ_t c_t (α_t u_g + β_t u_d)` with
//! `u = Sᵀφ`, where `α, β` depend on `v_g = u_g·w`, `v_d = u_d·w` and `τ`.
//! Given `λ = ∂L/∂w'`, each term contributes
//!
//! ```text
//! v̄_g = η c (∂α/∂v_g · u_g·λ + ∂β/∂v_g · u_d·λ)      (v̄_d likewise)
//! λ  ← λ + v̄_g u_g + v̄_d u_d
//! ū_g += η c α λ + v̄_g w,   ū_d += η c β λ + v̄_d w
//! τ̄  += η c (∂α/∂τ · u_g·λ + ∂β/∂τ · u_d·λ)
//! ```
//!
//! and the direction adjoints land on the saliency as `S̄ += φ ⊗ ū`.

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;

use super::loss::record_kl;
use super::variant::ModelVariant;
use crate::domain::{Dataset, PreferenceRecord, TrainingPipeline};
use crate::error::{Error, Result};
use crate::lpg::{build_phases, predict_preferences, run_phases, Local, LpgHyperparameters, SimulationSettings};

/// Loss and its gradient in the `[free S..., log τ, w0]` parameter layout.
#[derive(Clone, Debug, PartialEq)]
pub struct HyperGradient {
    pub loss: f64,
    pub gradient: Vec<f64>,
}

impl HyperGradient {
    pub fn norm(&self) -> f64 {
        self.gradient.iter().map(|g| g * g).sum::<f64>().sqrt()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GradientMode {
    /// Reverse accumulation through the unrolled inner loop.
    Adjoint,
    /// Central finite differences on the loss.
    FiniteDifference,
}

/// Step used by the finite-difference mode.
pub const FINITE_DIFFERENCE_STEP: f64 = 1e-4;

struct Accumulator {
    saliency: DMatrix<f64>,
    tau: f64,
    w0: f64,
}

/// Sum of record losses of one pipeline and the accumulated adjoints,
/// each record weighted by `scale`.
fn pipeline_adjoint(
    hp: &LpgHyperparameters,
    variant: ModelVariant,
    pipeline: &TrainingPipeline,
    records: &[&PreferenceRecord],
    scale: f64,
    settings: &SimulationSettings,
) -> Result<(f64, Accumulator)> {
    let tau = hp.tau();
    let s = hp.saliency();
    let phases = build_phases(hp, pipeline, variant.schedule());
    let mut trajectory = Vec::new();
    let w = run_phases(hp, &phases, settings, Some(&mut trajectory))?;

    let mut acc = Accumulator {
        saliency: DMatrix::zeros(s.nrows(), s.ncols()),
        tau: 0.0,
        w0: 0.0,
    };
    // output layer
    let mut lambda = DVector::zeros(w.len());
    let mut loss = 0.0;
    for r in records {
        let p = predict_preferences(hp, &w, r.object_a(), r.object_b());
        loss += scale * record_kl(r, &p);
        let q = r.distribution();
        for (obj, bar_v) in [
            (r.object_a(), scale * (p.p_a - q.p_a)),
            (r.object_b(), scale * (p.p_b - q.p_b)),
        ] {
            let phi = hp.embed(Some(obj));
            lambda += s.tr_mul(&phi) * bar_v;
            // ∂v/∂S = φ wᵀ
            acc.saliency.ger(bar_v, &phi, &w, 1.0);
        }
    }

    // inner loop, newest step first
    let eta = settings.step_size;
    let n_steps = settings.n_integration_steps;
    for (k, phase) in phases.iter().enumerate().rev() {
        let mut bar_dirs: Vec<(DVector<f64>, Option<DVector<f64>>)> = phase
            .terms
            .iter()
            .map(|(_, d)| (DVector::zeros(w.len()), d.distractor_dir.as_ref().map(|_| DVector::zeros(w.len()))))
            .collect();
        for step in (0..n_steps).rev() {
            let wk = &trajectory[k * n_steps + step];
            let mut next = lambda.clone();
            for ((weight, dirs), (bar_ug, bar_ud)) in phase.terms.iter().zip(bar_dirs.iter_mut()) {
                let c = eta * weight;
                let (vg, vd) = dirs.values(wk);
                let local = Local::new(vg, vd, tau);
                let (alpha, beta) = local.coefficients();
                let pd = local.partials(tau);
                let a = dirs.goal_dir.dot(&lambda);
                let b = dirs.distractor_dir.as_ref().map_or(0.0, |u| u.dot(&lambda));
                let bar_vg = c * (pd.alpha_g * a + pd.beta_g * b);
                acc.tau += c * (pd.alpha_tau * a + pd.beta_tau * b);
                next.axpy(bar_vg, &dirs.goal_dir, 1.0);
                bar_ug.axpy(c * alpha, &lambda, 1.0);
                bar_ug.axpy(bar_vg, wk, 1.0);
                if let (Some(ud), Some(bar_ud)) = (&dirs.distractor_dir, bar_ud.as_mut()) {
                    let bar_vd = c * (pd.alpha_d * a + pd.beta_d * b);
                    next.axpy(bar_vd, ud, 1.0);
                    bar_ud.axpy(c * beta, &lambda, 1.0);
                    bar_ud.axpy(bar_vd, wk, 1.0);
                }
            }
            lambda = next;
        }
        for ((_, dirs), (bar_ug, bar_ud)) in phase.terms.iter().zip(&bar_dirs) {
            acc.saliency.ger(1.0, &dirs.goal_features, bar_ug, 1.0);
            if let (Some(phi_d), Some(bar_ud)) = (&dirs.distractor_features, bar_ud) {
                acc.saliency.ger(1.0, phi_d, bar_ud, 1.0);
            }
        }
    }
    acc.w0 = lambda.sum();
    Ok((loss, acc))
}

fn group_by_pipeline<'a>(dataset: &'a Dataset, indices: &[usize]) -> Vec<(&'a TrainingPipeline, Vec<&'a PreferenceRecord>)> {
    let mut groups: std::collections::BTreeMap<&str, Vec<&PreferenceRecord>> = Default::default();
    for &i in indices {
        let r = &dataset.records()[i];
        groups.entry(r.pipeline_id()).or_default().push(r);
    }
    groups
        .into_iter()
        .map(|(id, rs)| (dataset.pipeline(id).expect("dataset validated"), rs))
        .collect()
}

/// Adjoint gradient of the mean loss over the records at `indices`.
pub(crate) fn adjoint_gradient(
    hp: &LpgHyperparameters,
    variant: ModelVariant,
    dataset: &Dataset,
    indices: &[usize],
    settings: &SimulationSettings,
) -> Result<HyperGradient> {
    if indices.is_empty() {
        return Err(Error::Invalid("gradient of an empty batch".into()));
    }
    let scale = 1.0 / indices.len() as f64;
    let groups = group_by_pipeline(dataset, indices);
    let parts = groups
        .par_iter()
        .map(|(p, rs)| pipeline_adjoint(hp, variant, p, rs, scale, settings))
        .collect::<Result<Vec<_>>>()?;
    // fixed reduction order
    let s = hp.saliency();
    let mut total = Accumulator {
        saliency: DMatrix::zeros(s.nrows(), s.ncols()),
        tau: 0.0,
        w0: 0.0,
    };
    let mut loss = 0.0;
    for (l, a) in parts {
        loss += l;
        total.saliency += a.saliency;
        total.tau += a.tau;
        total.w0 += a.w0;
    }
    let mut gradient: Vec<f64> = hp.free_entries().into_iter().map(|ij| total.saliency[ij]).collect();
    gradient.push(total.tau * hp.tau());
    gradient.push(total.w0);
    Ok(HyperGradient { loss, gradient })
}

fn batch_loss(
    hp: &LpgHyperparameters,
    variant: ModelVariant,
    dataset: &Dataset,
    indices: &[usize],
    settings: &SimulationSettings,
) -> Result<f64> {
    let groups = group_by_pipeline(dataset, indices);
    let sums = groups
        .par_iter()
        .map(|(p, rs)| {
            let w = super::variant::simulate_variant(hp, p, variant, settings)?;
            Ok(rs
                .iter()
                .map(|r| record_kl(r, &predict_preferences(hp, &w.0, r.object_a(), r.object_b())))
                .sum::<f64>())
        })
        .collect::<Result<Vec<f64>>>()?;
    Ok(sums.iter().sum::<f64>() / indices.len() as f64)
}

/// Central-difference gradient of the mean loss over the records at `indices`.
pub(crate) fn finite_difference_gradient(
    hp: &LpgHyperparameters,
    variant: ModelVariant,
    dataset: &Dataset,
    indices: &[usize],
    settings: &SimulationSettings,
    step: f64,
) -> Result<HyperGradient> {
    if indices.is_empty() {
        return Err(Error::Invalid("gradient of an empty batch".into()));
    }
    let params = hp.to_params();
    let mut gradient = Vec::with_capacity(params.len());
    for k in 0..params.len() {
        let mut plus = params.clone();
        plus[k] += step;
        let mut minus = params.clone();
        minus[k] -= step;
        let fp = batch_loss(&hp.with_params(&plus), variant, dataset, indices, settings)?;
        let fm = batch_loss(&hp.with_params(&minus), variant, dataset, indices, settings)?;
        gradient.push((fp - fm) / (2.0 * step));
    }
    let loss = batch_loss(hp, variant, dataset, indices, settings)?;
    Ok(HyperGradient { loss, gradient })
}

/// Gradient of the modelling loss over the whole dataset.
pub fn hyper_gradient(
    hp: &LpgHyperparameters,
    variant: ModelVariant,
    dataset: &Dataset,
    settings: &SimulationSettings,
    mode: GradientMode,
) -> Result<HyperGradient> {
    let all: Vec<usize> = (0..dataset.records().len()).collect();
    match mode {
        GradientMode::Adjoint => adjoint_gradient(hp, variant, dataset, &all, settings),
        GradientMode::FiniteDifference => {
            finite_difference_gradient(hp, variant, dataset, &all, settings, FINITE_DIFFERENCE_STEP)
        }
    }
}
