//! Preference parametrisation and the entropy-regularised stage objective.
//!
//! Values are linear in the features and the latent weights, `v = φ·Sw`. A
//! stage with goal `g` and optional distractor `d` is scored by
//! `J = π_G + τ h(π_G)`, where `π_G` is the goal's softmax probability
//! against the distractor (if any) and the null outcome, and `h` is the
//! binary entropy.

use nalgebra::DVector;

use super::hyper::LpgHyperparameters;
use crate::domain::{ChoiceDistribution, Object, TrainingStage};

const LOG_CLAMP: f64 = 1e-12;

pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// `ln(1 + e^x)` without overflow.
pub fn softplus(x: f64) -> f64 {
    if x > 0.0 {
        x + (-x).exp().ln_1p()
    } else {
        x.exp().ln_1p()
    }
}

/// Softmax over `[va, vb, 0]`.
pub fn softmax3(va: f64, vb: f64) -> [f64; 3] {
    let m = va.max(vb).max(0.0);
    let (ea, eb, en) = ((va - m).exp(), (vb - m).exp(), (-m).exp());
    let z = ea + eb + en;
    [ea / z, eb / z, en / z]
}

/// Binary entropy in nats, with `p` clamped only inside the logarithms.
pub fn binary_entropy(p: f64) -> f64 {
    let lp = p.clamp(LOG_CLAMP, 1.0 - LOG_CLAMP);
    -p * lp.ln() - (1.0 - p) * (1.0 - lp).ln()
}

/// `φ·Sw` for an object (zero for the null outcome).
pub fn goal_value(hp: &LpgHyperparameters, w: &DVector<f64>, object: Option<Object>) -> f64 {
    let phi = hp.embed(object);
    phi.dot(&(hp.saliency() * w))
}

/// Predicted three-way outcome distribution on an evaluation pair.
pub fn predict_preferences(
    hp: &LpgHyperparameters,
    w: &DVector<f64>,
    a: Object,
    b: Object,
) -> ChoiceDistribution {
    let sw = hp.saliency() * w;
    let va = hp.embed(Some(a)).dot(&sw);
    let vb = hp.embed(Some(b)).dot(&sw);
    let [p_a, p_b, p_none] = softmax3(va, vb);
    ChoiceDistribution { p_a, p_b, p_none }
}

/// Objective value, goal probability and latent gradient for one stage.
#[derive(Clone, Debug, PartialEq)]
pub struct StageObjectiveValue {
    pub j: f64,
    pub pi_goal: f64,
    pub grad_w: DVector<f64>,
}

/// Feature embeddings and latent directions `Sᵀφ` of one stage's objects.
#[derive(Clone, Debug)]
pub(crate) struct StageDirections {
    pub goal_features: DVector<f64>,
    pub distractor_features: Option<DVector<f64>>,
    pub goal_dir: DVector<f64>,
    pub distractor_dir: Option<DVector<f64>>,
}

impl StageDirections {
    pub fn new(hp: &LpgHyperparameters, stage: &TrainingStage) -> Self {
        let st = hp.saliency().transpose();
        let goal_features = hp.embed(Some(stage.goal));
        let goal_dir = &st * &goal_features;
        let distractor_features = stage.distractor.map(|d| hp.embed(Some(d)));
        let distractor_dir = distractor_features.as_ref().map(|f| &st * f);
        StageDirections {
            goal_features,
            distractor_features,
            goal_dir,
            distractor_dir,
        }
    }

    pub fn values(&self, w: &DVector<f64>) -> (f64, Option<f64>) {
        (
            self.goal_dir.dot(w),
            self.distractor_dir.as_ref().map(|u| u.dot(w)),
        )
    }
}

/// Softmax quantities at one point of a stage objective.
#[derive(Clone, Copy, Debug)]
pub(crate) struct Local {
    /// goal probability
    pub p: f64,
    /// distractor probability (0 when absent)
    pub q: f64,
    /// `1 - p`, computed without cancellation
    pub not_p: f64,
    /// `ln((1 - p) / p)`
    pub log_ratio: f64,
    /// `∂J/∂p = 1 + τ ln((1 - p) / p)`
    pub dj_dp: f64,
}

impl Local {
    pub fn new(vg: f64, vd: Option<f64>, tau: f64) -> Self {
        let (p, q, not_p, log_ratio) = match vd {
            None => (sigmoid(vg), 0.0, sigmoid(-vg), -vg),
            Some(vd) => {
                let m = vg.max(vd).max(0.0);
                let (eg, ed, en) = ((vg - m).exp(), (vd - m).exp(), (-m).exp());
                let z = eg + ed + en;
                (eg / z, ed / z, (ed + en) / z, softplus(vd) - vg)
            }
        };
        Local {
            p,
            q,
            not_p,
            log_ratio,
            dj_dp: 1.0 + tau * log_ratio,
        }
    }

    pub fn objective(&self, tau: f64) -> f64 {
        self.p + tau * binary_entropy(self.p)
    }

    /// Gradient coefficients: `∇_w J = α Sᵀφ_g + β Sᵀφ_d`.
    pub fn coefficients(&self) -> (f64, f64) {
        let alpha = self.dj_dp * self.p * self.not_p;
        let beta = -self.dj_dp * self.p * self.q;
        (alpha, beta)
    }

    /// Partial derivatives of `(α, β)` with respect to `v_g`, `v_d` and `τ`.
    pub fn partials(&self, tau: f64) -> Partials {
        let (p, q, np, a) = (self.p, self.q, self.not_p, self.dj_dp);
        let c = -tau + a * (1.0 - 2.0 * p);
        let pq = p * q;
        // q / (1 - p) = σ(v_d), which is 0 when there is no distractor
        let sig_d = if q > 0.0 { q / np } else { 0.0 };
        Partials {
            alpha_g: c * p * np,
            alpha_d: -c * pq,
            beta_g: tau * pq - a * pq * (1.0 - 2.0 * p),
            beta_d: -tau * pq * sig_d - a * pq * (1.0 - 2.0 * q),
            alpha_tau: self.log_ratio * p * np,
            beta_tau: -self.log_ratio * pq,
        }
    }
}

#[derive(Clone, Copy, Debug)]
pub(crate) struct Partials {
    pub alpha_g: f64,
    pub alpha_d: f64,
    pub beta_g: f64,
    pub beta_d: f64,
    pub alpha_tau: f64,
    pub beta_tau: f64,
}

pub(crate) fn objective_at(
    dirs: &StageDirections,
    w: &DVector<f64>,
    tau: f64,
) -> StageObjectiveValue {
    let (vg, vd) = dirs.values(w);
    let local = Local::new(vg, vd, tau);
    let (alpha, beta) = local.coefficients();
    let mut grad = &dirs.goal_dir * alpha;
    if let Some(ud) = &dirs.distractor_dir {
        grad.axpy(beta, ud, 1.0);
    }
    StageObjectiveValue {
        j: local.objective(tau),
        pi_goal: local.p,
        grad_w: grad,
    }
}

/// Evaluate the stage objective and its analytic latent gradient at `w`.
pub fn stage_objective(
    hp: &LpgHyperparameters,
    w: &DVector<f64>,
    stage: &TrainingStage,
) -> StageObjectiveValue {
    objective_at(&StageDirections::new(hp, stage), w, hp.tau())
}
