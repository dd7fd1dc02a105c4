//! Elo scores for goal objects and the no-goal outcome.
//!
//! Each three-way observation is split into three pairwise comparisons by
//! masking one outcome and renormalising the other two. Scores are the
//! weighted Bradley-Terry maximum-likelihood estimate under the Elo link
//! `P(A ≻ B) = 1 / (1 + 10^{-(V_A - V_B)/400})`, shifted so that the no-goal
//! outcome scores 0.

use std::collections::BTreeMap;
use std::fmt;
use std::io::Write;

use nalgebra::{DMatrix, DVector};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::domain::{ChoiceDistribution, Colour, Feature, Object, PreferenceRecord, Shape, N_OBJECTS};
use crate::eval::{compute_metrics, MetricsMode, MetricsReport};
use crate::error::{Error, Result};
use crate::lpg::sigmoid;
use crate::newton::{minimise, NewtonSettings};

/// Elo points per natural-logit unit.
pub const ELO_SCALE: f64 = 400.0 / std::f64::consts::LN_10;

/// Ridge strength on scores measured in natural-logit units. Keeps scores
/// finite when a competitor never loses.
pub const ELO_RIDGE: f64 = 1e-8;

const ELO_TOLERANCE: f64 = 1e-6;
const ELO_MAX_ITERATIONS: usize = 100_000;

/// A goal object or the no-goal outcome.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Competitor {
    Object(Object),
    NoGoal,
}

impl Competitor {
    fn slot(self) -> usize {
        match self {
            Competitor::Object(o) => o.index(),
            Competitor::NoGoal => N_OBJECTS,
        }
    }
}

impl fmt::Display for Competitor {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Competitor::Object(o) => write!(f, "{o}"),
            Competitor::NoGoal => f.write_str("no goal"),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PairwiseComparison {
    pub competitor_a: Competitor,
    pub competitor_b: Competitor,
    pub win_rate_a: f64,
    /// Combined probability mass of the two unmasked outcomes.
    pub weight: f64,
}

impl PairwiseComparison {
    fn from_masses(a: Competitor, b: Competitor, ma: f64, mb: f64) -> Self {
        let weight = ma + mb;
        PairwiseComparison {
            competitor_a: a,
            competitor_b: b,
            win_rate_a: if weight > 0.0 { ma / weight } else { 0.5 },
            weight,
        }
    }
}

/// `(a vs b)`, `(a vs no goal)`, `(b vs no goal)`.
pub fn to_pairwise(record: &PreferenceRecord) -> [PairwiseComparison; 3] {
    distribution_to_pairwise(record.object_a(), record.object_b(), &record.distribution())
}

pub fn distribution_to_pairwise(a: Object, b: Object, d: &ChoiceDistribution) -> [PairwiseComparison; 3] {
    let (ca, cb) = (Competitor::Object(a), Competitor::Object(b));
    [
        PairwiseComparison::from_masses(ca, cb, d.p_a, d.p_b),
        PairwiseComparison::from_masses(ca, Competitor::NoGoal, d.p_a, d.p_none),
        PairwiseComparison::from_masses(cb, Competitor::NoGoal, d.p_b, d.p_none),
    ]
}

/// Anchored Elo scores.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EloTable {
    pub scores: BTreeMap<Object, f64>,
    /// Always 0 for fitted tables.
    pub no_goal_score: f64,
}

impl EloTable {
    pub fn score(&self, c: Competitor) -> Result<f64> {
        match c {
            Competitor::NoGoal => Ok(self.no_goal_score),
            Competitor::Object(o) => self
                .scores
                .get(&o)
                .copied()
                .ok_or_else(|| Error::UnknownCompetitor(o.to_string())),
        }
    }

    /// Subtract the no-goal score from everything.
    pub fn anchored(&self) -> EloTable {
        EloTable {
            scores: self.scores.iter().map(|(&o, &s)| (o, s - self.no_goal_score)).collect(),
            no_goal_score: 0.0,
        }
    }

    /// Boltzmann three-way prediction over `(a, b, no goal)` implied by the
    /// scores. Its two-way marginal is [`elo_predict`].
    pub fn predict_distribution(&self, a: Object, b: Object) -> Result<ChoiceDistribution> {
        let va = (self.score(Competitor::Object(a))? - self.no_goal_score) / ELO_SCALE;
        let vb = (self.score(Competitor::Object(b))? - self.no_goal_score) / ELO_SCALE;
        let [p_a, p_b, p_none] = crate::lpg::softmax3(va, vb);
        Ok(ChoiceDistribution { p_a, p_b, p_none })
    }

    /// CSV with columns `object_colour, object_shape, score` and a final
    /// no-goal row with empty colour and shape `none`.
    pub fn write_csv(&self, out: impl Write) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["object_colour", "object_shape", "score"])?;
        for (o, s) in &self.scores {
            w.write_record([o.colour.name(), o.shape.name(), &s.to_string()])?;
        }
        w.write_record(["", "none", &self.no_goal_score.to_string()])?;
        w.flush().map_err(|e| Error::io("<csv>", e))?;
        Ok(())
    }
}

/// Probability that `a` beats `b`.
pub fn elo_predict(table: &EloTable, a: Competitor, b: Competitor) -> Result<f64> {
    let gap = table.score(a)? - table.score(b)?;
    Ok(1.0 / (1.0 + 10f64.powf(-gap / 400.0)))
}

/// Weighted Bradley-Terry fit. Every competitor that appears in a comparison
/// gets a score; the no-goal outcome is always included and anchored at 0.
pub fn fit_elo(comparisons: &[PairwiseComparison]) -> Result<EloTable> {
    let total: f64 = comparisons.iter().map(|c| c.weight).sum();
    if total.is_nan() || total <= 0.0 || !total.is_finite() {
        return Err(Error::Invalid("no positive-weight comparison to fit".into()));
    }
    for c in comparisons {
        if !(0.0..=1.0).contains(&c.win_rate_a) || c.weight.is_nan() || c.weight < 0.0 || !c.weight.is_finite() {
            return Err(Error::Invalid(format!(
                "bad comparison {} vs {}: win rate {}, weight {}",
                c.competitor_a, c.competitor_b, c.win_rate_a, c.weight
            )));
        }
    }
    // dense slots for the competitors present
    let mut present = BTreeMap::new();
    present.insert(Competitor::NoGoal.slot(), ());
    for c in comparisons {
        present.insert(c.competitor_a.slot(), ());
        present.insert(c.competitor_b.slot(), ());
    }
    let slots: Vec<usize> = present.into_keys().collect();
    let index_of = |c: Competitor| slots.binary_search(&c.slot()).expect("slot registered");
    let terms: Vec<(usize, usize, f64, f64)> = comparisons
        .iter()
        .filter(|c| c.weight > 0.0)
        .map(|c| (index_of(c.competitor_a), index_of(c.competitor_b), c.win_rate_a, c.weight / total))
        .collect();
    let n = slots.len();

    let value = |x: &DVector<f64>| {
        let mut f = 0.5 * ELO_RIDGE * x.norm_squared();
        for &(i, j, y, w) in &terms {
            let z = x[i] - x[j];
            f += w * (y * crate::lpg::softplus(-z) + (1.0 - y) * crate::lpg::softplus(z));
        }
        f
    };
    let derivatives = |x: &DVector<f64>| {
        let mut g = x * ELO_RIDGE;
        let mut h = DMatrix::identity(n, n) * ELO_RIDGE;
        for &(i, j, y, w) in &terms {
            let s = sigmoid(x[i] - x[j]);
            let gi = w * (s - y);
            g[i] += gi;
            g[j] -= gi;
            let hij = w * s * (1.0 - s);
            h[(i, i)] += hij;
            h[(j, j)] += hij;
            h[(i, j)] -= hij;
            h[(j, i)] -= hij;
        }
        (value(x), g, h)
    };
    let settings = NewtonSettings {
        tolerance: ELO_TOLERANCE / ELO_SCALE,
        max_iterations: ELO_MAX_ITERATIONS,
        what: "Elo fit",
    };
    let x = minimise(DVector::zeros(n), settings, value, derivatives)?;

    let anchor = x[index_of(Competitor::NoGoal)];
    let scores = slots
        .iter()
        .zip(x.iter())
        .filter_map(|(&slot, &v)| Object::from_index(slot).map(|o| (o, (v - anchor) * ELO_SCALE)))
        .collect();
    Ok(EloTable {
        scores,
        no_goal_score: 0.0,
    })
}

/// Fit an agent's table from its preference records.
pub fn fit_elo_records<'a>(records: impl IntoIterator<Item = &'a PreferenceRecord>) -> Result<EloTable> {
    let comps: Vec<_> = records.into_iter().flat_map(to_pairwise).collect();
    fit_elo(&comps)
}

/// Mean score over the objects in the table that carry `feature`, or NaN
/// when the table holds none of them.
pub fn marginalised_elo(table: &EloTable, feature: Feature) -> f64 {
    let vals: Vec<f64> = table
        .scores
        .iter()
        .filter(|(o, _)| o.has(feature))
        .map(|(_, &s)| s)
        .collect();
    if vals.is_empty() {
        f64::NAN
    } else {
        vals.iter().sum::<f64>() / vals.len() as f64
    }
}

/// Marginalised scores for every feature as a 10-row CSV (`feature, score`).
pub fn write_marginalised_csv(table: &EloTable, out: impl Write) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["feature", "score"])?;
    for f in Feature::all() {
        w.write_record([f.name(), &marginalised_elo(table, f).to_string()])?;
    }
    w.flush().map_err(|e| Error::io("<csv>", e))?;
    Ok(())
}

/// K-fold coherence check on one agent's records: fit on K−1 folds, predict
/// the held-out records from the fitted scores, and score all held-out
/// predictions together.
pub fn elo_holdout_validation(
    records: &[PreferenceRecord],
    k: usize,
    seed: u64,
    mode: MetricsMode,
) -> Result<MetricsReport> {
    if k < 2 {
        return Err(Error::Invalid(format!("holdout needs at least 2 folds, got {k}")));
    }
    if records.len() < k {
        return Err(Error::Invalid(format!(
            "{} records cannot fill {k} folds",
            records.len()
        )));
    }
    let folds = fold_assignment(records.len(), k, seed);
    let mut predictions = Vec::with_capacity(records.len());
    let mut observations = Vec::with_capacity(records.len());
    for fold in 0..k {
        let train = records
            .iter()
            .zip(&folds)
            .filter(|(_, &f)| f != fold)
            .map(|(r, _)| r);
        let table = fit_elo_records(train)?;
        for (r, _) in records.iter().zip(&folds).filter(|(_, &f)| f == fold) {
            // objects never seen in training sit at the no-goal level
            let value = |o: Object| table.scores.get(&o).map_or(0.0, |s| s / ELO_SCALE);
            let [p_a, p_b, p_none] = crate::lpg::softmax3(value(r.object_a()), value(r.object_b()));
            predictions.push(ChoiceDistribution { p_a, p_b, p_none });
            observations.push(r.distribution());
        }
    }
    compute_metrics(&predictions, &observations, mode)
}

/// Seeded fold labels: a shuffled index list dealt round-robin.
pub fn fold_assignment(n: usize, k: usize, seed: u64) -> Vec<usize> {
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let mut folds = vec![0; n];
    for (pos, &i) in order.iter().enumerate() {
        folds[i] = pos % k;
    }
    folds
}

/// Every object with its colour and shape, handy for building tables by hand.
pub fn table_from_fn(mut score: impl FnMut(Object) -> f64) -> EloTable {
    let scores = Colour::ALL
        .iter()
        .flat_map(|&c| Shape::ALL.iter().map(move |&s| Object::new(c, s)))
        .map(|o| (o, score(o)))
        .collect();
    EloTable {
        scores,
        no_goal_score: 0.0,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::enumerate_objects;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    const RED_CROSS: Object = Object::new(Colour::Red, Shape::Cross);
    const BLUE_RING: Object = Object::new(Colour::Blue, Shape::Ring);

    fn cmp(a: Competitor, b: Competitor, y: f64, w: f64) -> PairwiseComparison {
        PairwiseComparison {
            competitor_a: a,
            competitor_b: b,
            win_rate_a: y,
            weight: w,
        }
    }

    #[test]
    fn masking_arithmetic() {
        let d = ChoiceDistribution::new(0.73, 0.27, 0.0).unwrap();
        let [ab, an, bn] = distribution_to_pairwise(RED_CROSS, BLUE_RING, &d);
        assert_abs_diff_eq!(ab.win_rate_a, 0.73, epsilon = 1e-15);
        assert_abs_diff_eq!(ab.weight, 1.0, epsilon = 1e-15);
        assert_eq!(an.competitor_b, Competitor::NoGoal);
        assert_abs_diff_eq!(an.win_rate_a, 1.0);
        assert_abs_diff_eq!(bn.weight, 0.27);
        let d = ChoiceDistribution::new(0.5, 0.5, 0.0).unwrap();
        let [_, an, _] = distribution_to_pairwise(RED_CROSS, BLUE_RING, &d);
        assert_eq!((an.win_rate_a, an.weight), (1.0, 0.5));
        let d = ChoiceDistribution::new(0.0, 0.0, 1.0).unwrap();
        assert_eq!(distribution_to_pairwise(RED_CROSS, BLUE_RING, &d)[0].weight, 0.0);
    }

    #[test]
    fn predictions_from_gaps() {
        let mut t = table_from_fn(|_| 0.0);
        let a = Competitor::Object(RED_CROSS);
        let b = Competitor::Object(BLUE_RING);
        assert_abs_diff_eq!(elo_predict(&t, a, b).unwrap(), 0.5);
        t.scores.insert(RED_CROSS, 400.0);
        assert_abs_diff_eq!(elo_predict(&t, a, b).unwrap(), 10.0 / 11.0, epsilon = 1e-15);
        assert_abs_diff_eq!(elo_predict(&t, b, a).unwrap(), 1.0 / 11.0, epsilon = 1e-15);
        t.scores.remove(&BLUE_RING);
        assert!(matches!(elo_predict(&t, a, b), Err(Error::UnknownCompetitor(_))));
    }

    #[test]
    fn symmetric_data_gives_equal_scores() {
        let a = Competitor::Object(RED_CROSS);
        let b = Competitor::Object(BLUE_RING);
        let t = fit_elo(&[
            cmp(a, b, 0.5, 1.0),
            cmp(a, Competitor::NoGoal, 0.7, 1.0),
            cmp(b, Competitor::NoGoal, 0.7, 1.0),
        ])
        .unwrap();
        assert_abs_diff_eq!(t.scores[&RED_CROSS], t.scores[&BLUE_RING], epsilon = 1e-6);
        assert_eq!(t.no_goal_score, 0.0);
    }

    #[test]
    fn single_comparison_inverts_the_link() {
        let a = Competitor::Object(RED_CROSS);
        let t = fit_elo(&[cmp(a, Competitor::NoGoal, 10.0 / 11.0, 1.0)]).unwrap();
        // the ridge shrinks the gap by a relative 1e-8 at most
        assert_abs_diff_eq!(t.scores[&RED_CROSS], 400.0, epsilon = 1e-3);
    }

    #[test]
    fn undefeated_competitor_stays_finite() {
        let a = Competitor::Object(RED_CROSS);
        let t = fit_elo(&[cmp(a, Competitor::NoGoal, 1.0, 1.0)]).unwrap();
        let s = t.scores[&RED_CROSS];
        assert!(s.is_finite() && s > 2000.0, "{s}");
    }

    #[test]
    fn rejects_weightless_input() {
        let a = Competitor::Object(RED_CROSS);
        assert!(fit_elo(&[cmp(a, Competitor::NoGoal, 1.0, 0.0)]).is_err());
        assert!(fit_elo(&[]).is_err());
    }

    #[test]
    fn marginals() {
        let t = table_from_fn(|_| 7.0);
        for f in Feature::all() {
            assert_abs_diff_eq!(marginalised_elo(&t, f), 7.0);
        }
        let t = table_from_fn(|o| if o.shape == Shape::Cross { 100.0 } else { 0.0 });
        assert_abs_diff_eq!(marginalised_elo(&t, Feature::Shape(Shape::Cross)), 100.0);
        // colour marginals are means over 6 objects each
        let t = table_from_fn(|o| (o.index() * o.index()) as f64);
        let global: f64 = t.scores.values().sum::<f64>() / 24.0;
        let colour_mean: f64 = Colour::ALL
            .iter()
            .map(|&c| marginalised_elo(&t, Feature::Colour(c)))
            .sum::<f64>()
            / 4.0;
        assert_abs_diff_eq!(colour_mean, global, epsilon = 1e-9);
    }

    #[test]
    fn csv_has_no_goal_row() {
        let mut buf = Vec::new();
        table_from_fn(|_| 1.0).write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(text.lines().count(), 26);
        assert!(text.lines().last().unwrap().starts_with(",none,"));
        let mut buf = Vec::new();
        write_marginalised_csv(&table_from_fn(|_| 1.0), &mut buf).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap().lines().count(), 11);
    }

    #[test]
    fn fold_assignment_is_a_balanced_partition() {
        let f = fold_assignment(10, 4, 3);
        let mut counts = [0; 4];
        for &k in &f {
            counts[k] += 1;
        }
        assert_eq!(counts.iter().sum::<usize>(), 10);
        assert!(counts.iter().all(|&c| c == 2 || c == 3));
        assert_eq!(f, fold_assignment(10, 4, 3));
    }

    #[test]
    fn holdout_guards() {
        let r = PreferenceRecord::new("p", RED_CROSS, BLUE_RING, [5, 3, 2], 10).unwrap();
        assert!(elo_holdout_validation(std::slice::from_ref(&r), 4, 0, MetricsMode::TwoWay).is_err());
        assert!(elo_holdout_validation(&[r.clone(), r], 1, 0, MetricsMode::TwoWay).is_err());
    }

    fn random_comparisons() -> impl Strategy<Value = Vec<PairwiseComparison>> {
        let objects = enumerate_objects();
        prop::collection::vec((0usize..25, 0usize..25, 0.05f64..0.95, 0.1f64..1.0), 3..30).prop_map(
            move |v| {
                v.into_iter()
                    .filter(|(i, j, _, _)| i != j)
                    .map(|(i, j, y, w)| {
                        let c = |k: usize| {
                            if k == 24 {
                                Competitor::NoGoal
                            } else {
                                Competitor::Object(objects[k])
                            }
                        };
                        cmp(c(i), c(j), y, w)
                    })
                    .collect()
            },
        )
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        #[test]
        fn duplication_leaves_fit_unchanged(comps in random_comparisons()) {
            prop_assume!(!comps.is_empty());
            let t1 = fit_elo(&comps).unwrap();
            let doubled: Vec<_> = comps.iter().chain(comps.iter()).copied().collect();
            let t2 = fit_elo(&doubled).unwrap();
            for (o, s) in &t1.scores {
                prop_assert!((s - t2.scores[o]).abs() < 1e-4);
            }
        }

        #[test]
        fn predictions_are_logit_additive(a in -900.0f64..900.0, b in -900.0f64..900.0, c in -900.0f64..900.0) {
            let objs = enumerate_objects();
            let mut t = table_from_fn(|_| 0.0);
            t.scores.insert(objs[0], a);
            t.scores.insert(objs[1], b);
            t.scores.insert(objs[2], c);
            let logit10 = |p: f64| 400.0 * (p / (1.0 - p)).log10();
            let (oa, ob, oc) = (Competitor::Object(objs[0]), Competitor::Object(objs[1]), Competitor::Object(objs[2]));
            let lhs = logit10(elo_predict(&t, oa, oc).unwrap());
            let rhs = logit10(elo_predict(&t, oa, ob).unwrap()) + logit10(elo_predict(&t, ob, oc).unwrap());
            prop_assert!((lhs - rhs).abs() < 1e-6 * (1.0 + lhs.abs()));
        }

        #[test]
        fn anchoring_and_shift_invariance(comps in random_comparisons(), shift in -500.0f64..500.0) {
            prop_assume!(!comps.is_empty());
            let t = fit_elo(&comps).unwrap();
            prop_assert_eq!(t.no_goal_score, 0.0);
            for (&o, &v) in &t.scores {
                let p = elo_predict(&t, Competitor::Object(o), Competitor::NoGoal).unwrap();
                prop_assert!((p - 1.0 / (1.0 + 10f64.powf(-v / 400.0))).abs() < 1e-15);
            }
            let shifted = EloTable {
                scores: t.scores.iter().map(|(&o, &s)| (o, s + shift)).collect(),
                no_goal_score: shift,
            };
            let back = shifted.anchored();
            for (o, s) in &t.scores {
                prop_assert!((s - back.scores[o]).abs() < 1e-9);
            }
        }
    }
}
