//! Objects, feature encodings, training pipelines and preference observations.
//!
//! Every object in the maze world has exactly one colour and one shape. The
//! ten colour and shape features are laid out in a fixed canonical order,
//! which is also the row order of every fitted saliency matrix:
//!
//! ```text
//! black blue green red | circle cross diamond hollow-diamond plus ring
//! ```

mod io;

pub use io::{load_dataset, load_roster, read_dataset, roster_to_json, save_dataset, write_dataset};

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const N_COLOURS: usize = 4;
pub const N_SHAPES: usize = 6;
pub const N_FEATURES: usize = N_COLOURS + N_SHAPES;
pub const N_OBJECTS: usize = N_COLOURS * N_SHAPES;

/// Feature names in canonical index order.
pub const FEATURE_NAMES: [&str; N_FEATURES] = [
    "black",
    "blue",
    "green",
    "red",
    "circle",
    "cross",
    "diamond",
    "hollow-diamond",
    "plus",
    "ring",
];

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Colour {
    Black,
    Blue,
    Green,
    Red,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Shape {
    Circle,
    Cross,
    Diamond,
    HollowDiamond,
    Plus,
    Ring,
}

impl Colour {
    pub const ALL: [Colour; N_COLOURS] = [Colour::Black, Colour::Blue, Colour::Green, Colour::Red];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn name(self) -> &'static str {
        FEATURE_NAMES[self.index()]
    }

    pub fn from_name(name: &str) -> Option<Colour> {
        Colour::ALL.into_iter().find(|c| c.name() == name)
    }
}

impl Shape {
    pub const ALL: [Shape; N_SHAPES] = [
        Shape::Circle,
        Shape::Cross,
        Shape::Diamond,
        Shape::HollowDiamond,
        Shape::Plus,
        Shape::Ring,
    ];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn name(self) -> &'static str {
        FEATURE_NAMES[N_COLOURS + self.index()]
    }

    pub fn from_name(name: &str) -> Option<Shape> {
        Shape::ALL.into_iter().find(|s| s.name() == name)
    }
}

/// One of the ten colour or shape features.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Feature {
    Colour(Colour),
    Shape(Shape),
}

impl Feature {
    /// All features in canonical order.
    pub fn all() -> impl Iterator<Item = Feature> {
        Colour::ALL
            .into_iter()
            .map(Feature::Colour)
            .chain(Shape::ALL.into_iter().map(Feature::Shape))
    }

    pub fn index(self) -> usize {
        match self {
            Feature::Colour(c) => c.index(),
            Feature::Shape(s) => N_COLOURS + s.index(),
        }
    }

    pub fn from_index(index: usize) -> Option<Feature> {
        Feature::all().nth(index)
    }

    pub fn name(self) -> &'static str {
        FEATURE_NAMES[self.index()]
    }

    pub fn from_name(name: &str) -> Option<Feature> {
        Feature::all().find(|f| f.name() == name)
    }
}

impl fmt::Display for Feature {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// A coloured, shaped object. Ordering is the canonical colour-major order.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Object {
    pub colour: Colour,
    pub shape: Shape,
}

impl Object {
    pub const fn new(colour: Colour, shape: Shape) -> Self {
        Object { colour, shape }
    }

    /// Position in [`enumerate_objects`].
    pub fn index(self) -> usize {
        self.colour.index() * N_SHAPES + self.shape.index()
    }

    pub fn from_index(index: usize) -> Option<Object> {
        (index < N_OBJECTS).then(|| {
            Object::new(
                Colour::ALL[index / N_SHAPES],
                Shape::ALL[index % N_SHAPES],
            )
        })
    }

    pub fn has(self, feature: Feature) -> bool {
        match feature {
            Feature::Colour(c) => self.colour == c,
            Feature::Shape(s) => self.shape == s,
        }
    }

    /// Whether the object only uses colours and shapes available to training goals.
    pub fn is_training_goal(self) -> bool {
        self.colour != Colour::Green
            && !matches!(self.shape, Shape::Circle | Shape::HollowDiamond)
    }
}

impl fmt::Display for Object {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} {}", self.colour.name(), self.shape.name())
    }
}

/// Two-hot encoding of an object over the canonical features.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FeatureVector(pub [f64; N_FEATURES]);

impl FeatureVector {
    pub fn zeros() -> Self {
        FeatureVector([0.0; N_FEATURES])
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn dot(&self, other: &FeatureVector) -> f64 {
        self.0.iter().zip(other.0.iter()).map(|(a, b)| a * b).sum()
    }
}

/// Encode an object, or the null outcome when `None`.
pub fn encode_features(object: Option<Object>) -> FeatureVector {
    let mut v = FeatureVector::zeros();
    if let Some(o) = object {
        v.0[Feature::Colour(o.colour).index()] = 1.0;
        v.0[Feature::Shape(o.shape).index()] = 1.0;
    }
    v
}

/// All 24 objects in canonical order.
pub fn enumerate_objects() -> Vec<Object> {
    (0..N_OBJECTS).filter_map(Object::from_index).collect()
}

/// All unordered pairs of distinct objects, each with the lower canonical
/// index first. Lexicographic by (first, second).
pub fn enumerate_eval_pairs() -> Vec<(Object, Object)> {
    let objects = enumerate_objects();
    let mut pairs = Vec::with_capacity(N_OBJECTS * (N_OBJECTS - 1) / 2);
    for (i, &a) in objects.iter().enumerate() {
        for &b in &objects[i + 1..] {
            pairs.push((a, b));
        }
    }
    pairs
}

/// Default roster for data generation: one single-stage pipeline per
/// training goal, and one two-stage pipeline per goal followed by the next
/// training goal in canonical order.
pub fn standard_roster() -> Vec<TrainingPipeline> {
    let goals: Vec<Object> = enumerate_objects().into_iter().filter(|o| o.is_training_goal()).collect();
    let slug = |o: Object| format!("{}-{}", o.colour.name(), o.shape.name());
    let mut out = Vec::with_capacity(2 * goals.len());
    for &g in &goals {
        out.push(TrainingPipeline::new(format!("single-{}", slug(g)), vec![TrainingStage::goal_only(g)]).expect("non-empty"));
    }
    for (i, &g) in goals.iter().enumerate() {
        let next = goals[(i + 1) % goals.len()];
        let stages = vec![TrainingStage::goal_only(g), TrainingStage::goal_only(next)];
        out.push(TrainingPipeline::new(format!("two-{}-then-{}", slug(g), slug(next)), stages).expect("non-empty"));
    }
    out
}

/// One stage of training: a rewarded goal and optionally a visual distractor.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct TrainingStage {
    pub goal: Object,
    pub distractor: Option<Object>,
}

impl TrainingStage {
    pub fn new(goal: Object, distractor: Option<Object>) -> Result<Self> {
        if distractor == Some(goal) {
            return Err(Error::Invalid(format!(
                "distractor must differ from goal ({goal})"
            )));
        }
        Ok(TrainingStage { goal, distractor })
    }

    pub fn goal_only(goal: Object) -> Self {
        TrainingStage {
            goal,
            distractor: None,
        }
    }
}

/// An ordered sequence of training stages.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct TrainingPipeline {
    id: String,
    stages: Vec<TrainingStage>,
}

impl TrainingPipeline {
    pub fn new(id: impl Into<String>, stages: Vec<TrainingStage>) -> Result<Self> {
        let id = id.into();
        if stages.is_empty() {
            return Err(Error::Invalid(format!("pipeline `{id}` has no stages")));
        }
        for s in &stages {
            TrainingStage::new(s.goal, s.distractor)?;
        }
        Ok(TrainingPipeline { id, stages })
    }

    pub fn id(&self) -> &str {
        &self.id
    }

    pub fn stages(&self) -> &[TrainingStage] {
        &self.stages
    }

    pub fn final_stage(&self) -> &TrainingStage {
        self.stages.last().expect("pipelines are non-empty")
    }

    pub fn has_distractor(&self) -> bool {
        self.stages.iter().any(|s| s.distractor.is_some())
    }

    /// Objects appearing anywhere in the pipeline, as goal or distractor.
    pub fn seen_objects(&self) -> BTreeSet<Object> {
        self.stages
            .iter()
            .flat_map(|s| std::iter::once(s.goal).chain(s.distractor))
            .collect()
    }
}

/// Distribution over the three outcomes of an evaluation episode.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ChoiceDistribution {
    pub p_a: f64,
    pub p_b: f64,
    pub p_none: f64,
}

impl ChoiceDistribution {
    pub const UNIFORM: ChoiceDistribution = ChoiceDistribution {
        p_a: 1.0 / 3.0,
        p_b: 1.0 / 3.0,
        p_none: 1.0 / 3.0,
    };

    pub fn new(p_a: f64, p_b: f64, p_none: f64) -> Result<Self> {
        let d = ChoiceDistribution { p_a, p_b, p_none };
        let ok = d.as_array().iter().all(|p| p.is_finite() && *p >= 0.0)
            && (p_a + p_b + p_none - 1.0).abs() <= 1e-9;
        if ok {
            Ok(d)
        } else {
            Err(Error::Invalid(format!(
                "not a probability distribution: ({p_a}, {p_b}, {p_none})"
            )))
        }
    }

    pub fn as_array(&self) -> [f64; 3] {
        [self.p_a, self.p_b, self.p_none]
    }

    /// Exchange the roles of the two objects.
    pub fn swapped(self) -> Self {
        ChoiceDistribution {
            p_a: self.p_b,
            p_b: self.p_a,
            p_none: self.p_none,
        }
    }
}

/// Outcome tallies for one pipeline's agent on one evaluation pair.
///
/// Pairs are canonicalised on construction so that `object_a` precedes
/// `object_b`; counts are swapped along with the objects.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct PreferenceRecord {
    pipeline_id: String,
    object_a: Object,
    object_b: Object,
    count_a: u32,
    count_b: u32,
    count_none: u32,
    episodes: u32,
}

impl PreferenceRecord {
    pub fn new(
        pipeline_id: impl Into<String>,
        a: Object,
        b: Object,
        counts: [u32; 3],
        episodes: u32,
    ) -> Result<Self> {
        if a == b {
            return Err(Error::Invalid(format!("evaluation pair repeats {a}")));
        }
        if episodes == 0 {
            return Err(Error::EmptyRecord);
        }
        let total: u64 = counts.iter().map(|&c| c as u64).sum();
        if total != episodes as u64 {
            return Err(Error::Invalid(format!(
                "counts sum to {total} but episodes = {episodes}"
            )));
        }
        let [mut ca, mut cb, cn] = counts;
        let (mut oa, mut ob) = (a, b);
        if ob < oa {
            std::mem::swap(&mut oa, &mut ob);
            std::mem::swap(&mut ca, &mut cb);
        }
        Ok(PreferenceRecord {
            pipeline_id: pipeline_id.into(),
            object_a: oa,
            object_b: ob,
            count_a: ca,
            count_b: cb,
            count_none: cn,
            episodes,
        })
    }

    pub fn pipeline_id(&self) -> &str {
        &self.pipeline_id
    }

    pub fn object_a(&self) -> Object {
        self.object_a
    }

    pub fn object_b(&self) -> Object {
        self.object_b
    }

    pub fn counts(&self) -> [u32; 3] {
        [self.count_a, self.count_b, self.count_none]
    }

    pub fn episodes(&self) -> u32 {
        self.episodes
    }

    /// How often `object` was reached first, if it belongs to this pair.
    pub fn count_for(&self, object: Object) -> Option<u32> {
        if object == self.object_a {
            Some(self.count_a)
        } else if object == self.object_b {
            Some(self.count_b)
        } else {
            None
        }
    }

    pub fn distribution(&self) -> ChoiceDistribution {
        let n = self.episodes as f64;
        ChoiceDistribution {
            p_a: self.count_a as f64 / n,
            p_b: self.count_b as f64 / n,
            p_none: self.count_none as f64 / n,
        }
    }
}

/// Empirical outcome frequencies of a record.
pub fn record_to_distribution(record: &PreferenceRecord) -> Result<ChoiceDistribution> {
    if record.episodes == 0 {
        return Err(Error::EmptyRecord);
    }
    Ok(record.distribution())
}

/// Pipelines plus the preference records observed for their agents.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Dataset {
    pipelines: BTreeMap<String, TrainingPipeline>,
    records: Vec<PreferenceRecord>,
}

impl Dataset {
    pub fn new(
        pipelines: impl IntoIterator<Item = TrainingPipeline>,
        records: Vec<PreferenceRecord>,
    ) -> Result<Self> {
        let mut map = BTreeMap::new();
        for p in pipelines {
            let id = p.id().to_string();
            if map.insert(id.clone(), p).is_some() {
                return Err(Error::Invalid(format!("duplicate pipeline id `{id}`")));
            }
        }
        let mut seen = BTreeSet::new();
        for (index, r) in records.iter().enumerate() {
            if !map.contains_key(r.pipeline_id()) {
                return Err(Error::DatasetRecord {
                    index,
                    message: format!("unknown pipeline id `{}`", r.pipeline_id()),
                });
            }
            if !seen.insert((r.pipeline_id(), r.object_a(), r.object_b())) {
                return Err(Error::DatasetRecord {
                    index,
                    message: format!(
                        "duplicate pair ({}, {}) for pipeline `{}`",
                        r.object_a(),
                        r.object_b(),
                        r.pipeline_id()
                    ),
                });
            }
        }
        Ok(Dataset {
            pipelines: map,
            records,
        })
    }

    pub fn pipelines(&self) -> &BTreeMap<String, TrainingPipeline> {
        &self.pipelines
    }

    pub fn pipeline(&self, id: &str) -> Option<&TrainingPipeline> {
        self.pipelines.get(id)
    }

    pub fn records(&self) -> &[PreferenceRecord] {
        &self.records
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn records_for<'a>(&'a self, id: &'a str) -> impl Iterator<Item = &'a PreferenceRecord> {
        self.records.iter().filter(move |r| r.pipeline_id() == id)
    }

    /// Sub-dataset restricted to the pipelines accepted by `keep`.
    pub fn filter_pipelines(&self, mut keep: impl FnMut(&TrainingPipeline) -> bool) -> Dataset {
        let pipelines: BTreeMap<_, _> = self
            .pipelines
            .iter()
            .filter(|(_, p)| keep(p))
            .map(|(k, p)| (k.clone(), p.clone()))
            .collect();
        let records = self
            .records
            .iter()
            .filter(|r| pipelines.contains_key(r.pipeline_id()))
            .cloned()
            .collect();
        Dataset { pipelines, records }
    }

    /// Pipelines paired with their records, in id order.
    pub fn by_pipeline(&self) -> Vec<(&TrainingPipeline, Vec<&PreferenceRecord>)> {
        let mut groups: BTreeMap<&str, Vec<&PreferenceRecord>> = BTreeMap::new();
        for r in &self.records {
            groups.entry(r.pipeline_id()).or_default().push(r);
        }
        self.pipelines
            .iter()
            .map(|(id, p)| (p, groups.remove(id.as_str()).unwrap_or_default()))
            .collect()
    }
}
