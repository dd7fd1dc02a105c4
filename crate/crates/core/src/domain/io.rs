//! JSON Lines persistence for datasets.
//!
//! The first line is a header `{"pipelines": {id: [stage, ...]}}`; each
//! following line is one record:
//!
//! ```text
//! {"pipeline_id":"p","a":{"colour":"red","shape":"cross"},"b":{...},"counts":[a,b,none],"episodes":100}
//! ```

use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{Dataset, Object, PreferenceRecord, TrainingPipeline, TrainingStage};
use crate::error::{Error, Result};

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct Header {
    pipelines: BTreeMap<String, Vec<StageLine>>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct StageLine {
    goal: Object,
    #[serde(default)]
    distractor: Option<Object>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RecordLine {
    pipeline_id: String,
    a: Object,
    b: Object,
    counts: [u32; 3],
    episodes: u32,
}

fn header_for<'a>(pipelines: impl IntoIterator<Item = &'a TrainingPipeline>) -> Header {
    Header {
        pipelines: pipelines
            .into_iter()
            .map(|p| {
                let stages = p
                    .stages()
                    .iter()
                    .map(|s| StageLine {
                        goal: s.goal,
                        distractor: s.distractor,
                    })
                    .collect();
                (p.id().to_string(), stages)
            })
            .collect(),
    }
}

fn pipelines_from(header: Header) -> Result<Vec<TrainingPipeline>> {
    header
        .pipelines
        .into_iter()
        .map(|(id, stages)| {
            let stages = stages
                .into_iter()
                .map(|s| TrainingStage::new(s.goal, s.distractor))
                .collect::<Result<Vec<_>>>()?;
            TrainingPipeline::new(id, stages)
        })
        .collect()
}

pub fn write_dataset(dataset: &Dataset, mut out: impl Write) -> Result<()> {
    let header = header_for(dataset.pipelines().values());
    serde_json::to_writer(&mut out, &header)?;
    writeln!(out).map_err(|e| Error::io("<dataset>", e))?;
    for r in dataset.records() {
        let line = RecordLine {
            pipeline_id: r.pipeline_id().to_string(),
            a: r.object_a(),
            b: r.object_b(),
            counts: r.counts(),
            episodes: r.episodes(),
        };
        serde_json::to_writer(&mut out, &line)?;
        writeln!(out).map_err(|e| Error::io("<dataset>", e))?;
    }
    Ok(())
}

pub fn read_dataset(input: impl Read) -> Result<Dataset> {
    let mut lines = BufReader::new(input).lines();
    let header_line = lines
        .next()
        .ok_or_else(|| Error::Invalid("empty dataset file (missing header)".into()))?
        .map_err(|e| Error::io("<dataset>", e))?;
    let header: Header = serde_json::from_str(&header_line)
        .map_err(|e| Error::Invalid(format!("malformed dataset header: {e}")))?;

    let pipelines = pipelines_from(header)?;

    let mut records = Vec::new();
    for line in lines {
        let line = line.map_err(|e| Error::io("<dataset>", e))?;
        if line.trim().is_empty() {
            continue;
        }
        let index = records.len();
        let parsed: RecordLine = serde_json::from_str(&line).map_err(|e| Error::DatasetRecord {
            index,
            message: format!("malformed record: {e}"),
        })?;
        let record = PreferenceRecord::new(
            parsed.pipeline_id,
            parsed.a,
            parsed.b,
            parsed.counts,
            parsed.episodes,
        )
        .map_err(|e| Error::DatasetRecord {
            index,
            message: e.to_string(),
        })?;
        records.push(record);
    }
    Dataset::new(pipelines, records)
}

pub fn save_dataset(dataset: &Dataset, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    write_dataset(dataset, &mut w)?;
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn load_dataset(path: impl AsRef<Path>) -> Result<Dataset> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    read_dataset(file)
}

/// Load a pipeline roster: a JSON document shaped like the dataset header,
/// `{"pipelines": {"id": [{"goal": ..., "distractor": ...}, ...]}}`.
pub fn load_roster(path: impl AsRef<Path>) -> Result<Vec<TrainingPipeline>> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let header: Header =
        serde_json::from_str(&text).map_err(|e| Error::Invalid(format!("malformed roster {}: {e}", path.display())))?;
    pipelines_from(header)
}

pub fn roster_to_json(pipelines: &[TrainingPipeline]) -> Result<String> {
    Ok(serde_json::to_string_pretty(&header_for(pipelines))?)
}
