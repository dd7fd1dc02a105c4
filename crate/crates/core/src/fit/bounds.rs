//! Per-agent reference floors: every agent gets its own free values, either
//! one per object or one per feature, fitted to convergence.

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;

use super::loss::record_kl;
use crate::domain::{encode_features, Dataset, Object, PreferenceRecord, N_FEATURES, N_OBJECTS};
use crate::error::{Error, Result};
use crate::lpg::softmax3;
use crate::newton::{minimise, NewtonSettings};

const BOUND_TOLERANCE: f64 = 1e-8;
const BOUND_MAX_ITERATIONS: usize = 50_000;
/// Keeps values finite when an agent never (or always) picks an object.
const BOUND_RIDGE: f64 = 1e-9;

/// Mean KL when each agent has a free value for each of the 24 objects.
pub fn lower_bound_per_goal(dataset: &Dataset) -> Result<f64> {
    lower_bound(dataset, N_OBJECTS, |o| {
        let mut x = vec![0.0; N_OBJECTS];
        x[o.index()] = 1.0;
        x
    })
}

/// Mean KL when each agent has a free value per feature and object values
/// are sums of their features' values.
pub fn lower_bound_per_feature(dataset: &Dataset) -> Result<f64> {
    lower_bound(dataset, N_FEATURES, |o| encode_features(Some(o)).0.to_vec())
}

fn lower_bound(dataset: &Dataset, dim: usize, design: impl Fn(Object) -> Vec<f64> + Sync) -> Result<f64> {
    if dataset.is_empty() {
        return Err(Error::Invalid("lower bound of an empty dataset".into()));
    }
    let rows: Vec<DVector<f64>> = (0..N_OBJECTS)
        .map(|i| DVector::from_vec(design(Object::from_index(i).expect("index in range"))))
        .collect();
    let groups: Vec<Vec<&PreferenceRecord>> = dataset
        .by_pipeline()
        .into_iter()
        .map(|(_, rs)| rs)
        .filter(|rs| !rs.is_empty())
        .collect();
    let sums = groups
        .par_iter()
        .map(|rs| fit_agent(rs, &rows, dim))
        .collect::<Result<Vec<f64>>>()?;
    Ok(sums.iter().sum::<f64>() / dataset.records().len() as f64)
}

/// Sum of the agent's record losses at its optimum.
fn fit_agent(records: &[&PreferenceRecord], rows: &[DVector<f64>], dim: usize) -> Result<f64> {
    let n = records.len() as f64;
    let obs: Vec<([f64; 3], usize, usize)> = records
        .iter()
        .map(|r| (r.distribution().as_array(), r.object_a().index(), r.object_b().index()))
        .collect();
    let predict = |theta: &DVector<f64>, a: usize, b: usize| softmax3(rows[a].dot(theta), rows[b].dot(theta));
    let value = |theta: &DVector<f64>| {
        let mut f = 0.5 * BOUND_RIDGE * theta.norm_squared();
        for (q, a, b) in &obs {
            let p = predict(theta, *a, *b);
            f += crate::eval::kl_divergence(q, &p) / n;
        }
        f
    };
    let derivatives = |theta: &DVector<f64>| {
        let mut g = theta * BOUND_RIDGE;
        let mut h = DMatrix::identity(dim, dim) * BOUND_RIDGE;
        for (q, a, b) in &obs {
            let p = predict(theta, *a, *b);
            let (xa, xb) = (&rows[*a], &rows[*b]);
            g.axpy((p[0] - q[0]) / n, xa, 1.0);
            g.axpy((p[1] - q[1]) / n, xb, 1.0);
            h.ger(p[0] * (1.0 - p[0]) / n, xa, xa, 1.0);
            h.ger(p[1] * (1.0 - p[1]) / n, xb, xb, 1.0);
            h.ger(-p[0] * p[1] / n, xa, xb, 1.0);
            h.ger(-p[0] * p[1] / n, xb, xa, 1.0);
        }
        (value(theta), g, h)
    };
    let settings = NewtonSettings {
        tolerance: BOUND_TOLERANCE,
        max_iterations: BOUND_MAX_ITERATIONS,
        what: "lower-bound fit",
    };
    let theta = minimise(DVector::zeros(dim), settings, value, derivatives)?;
    Ok(records
        .iter()
        .map(|r| {
            let p = predict(&theta, r.object_a().index(), r.object_b().index());
            record_kl(r, &crate::domain::ChoiceDistribution { p_a: p[0], p_b: p[1], p_none: p[2] })
        })
        .sum())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::{enumerate_eval_pairs, TrainingPipeline, TrainingStage};

    fn one_record(counts: [u32; 3]) -> Dataset {
        let objs = crate::domain::enumerate_objects();
        let p = TrainingPipeline::new("p", vec![TrainingStage::goal_only(objs[3])]).unwrap();
        let r = PreferenceRecord::new("p", objs[3], objs[7], counts, counts.iter().sum()).unwrap();
        Dataset::new([p], vec![r]).unwrap()
    }

    #[test]
    fn interior_record_is_matched_exactly() {
        let d = one_record([50, 30, 20]);
        assert!(lower_bound_per_goal(&d).unwrap() < 1e-6);
        assert!(lower_bound_per_feature(&d).unwrap() < 1e-6);
    }

    #[test]
    fn boundary_record_converges() {
        let d = one_record([100, 0, 0]);
        assert!(lower_bound_per_goal(&d).unwrap() < 1e-6);
    }

    #[test]
    fn per_goal_is_below_per_feature() {
        // noisy deterministic counts over many pairs
        let p = TrainingPipeline::new("p", vec![TrainingStage::goal_only(crate::domain::enumerate_objects()[0])])
            .unwrap();
        let records = enumerate_eval_pairs()
            .into_iter()
            .enumerate()
            .take(80)
            .map(|(k, (a, b))| {
                let ca = (k * 37 % 61) as u32;
                let cb = (k * 11 % 29) as u32;
                PreferenceRecord::new("p", a, b, [ca, cb, 100 - ca - cb], 100).unwrap()
            })
            .collect();
        let d = Dataset::new([p], records).unwrap();
        let g = lower_bound_per_goal(&d).unwrap();
        let f = lower_bound_per_feature(&d).unwrap();
        assert!(g <= f + 1e-9, "{g} > {f}");
        assert!(f < crate::fit::baseline_uniform(&d).unwrap());
    }
}
