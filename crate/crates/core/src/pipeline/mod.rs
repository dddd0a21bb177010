//! End-to-end training and decomposition over recordings.

mod config;
mod persist;
mod report;
mod synth;

use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::changepoint::{detect, CpdConfig, Segmentation};
use crate::dimreduce::{self, fit_label_wise, FittedReducer, ReducerSpec};
use crate::embedding::{nearest_verbs, VerbCorpus};
use crate::error::{Error, Result};
use crate::ingest::{
    chunk_mean, magnitude, segregate, window_features, LabeledInterval, MagnitudeSeries, Recording,
};
use crate::matrix::Matrix;
use crate::zeroshot::{
    predict_attributes, train_zeroshot, AttributeSchema, AttributeVector, ZeroShotModel,
};

pub use config::{Mode, PipelineConfig, Profile, CONFIG_KEYS};
pub use persist::{
    load_model, load_model_for, model_from_bytes, model_to_bytes, save_model, FORMAT_VERSION, MAGIC,
};
pub use report::*;
pub use synth::{synth_generate, MacroScript, MicroActivity, ScriptStep, SynthSpec, UnitRegime};

/// Label-to-attribute assignments for atomic training intervals.
pub type LabelAttributes = BTreeMap<String, AttributeVector>;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainingReport {
    pub windows_per_label: BTreeMap<String, usize>,
    pub constant_attributes: Vec<String>,
    /// Atomic labels without an attribute assignment; skipped.
    pub unmapped_labels: Vec<String>,
    /// Labels whose own reducer could not be fitted (paper-faithful mode).
    pub fallback_labels: Vec<String>,
    pub rank_deficient: bool,
    pub n_rows: usize,
}

impl TrainingReport {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes") + "\n"
    }
}

/// Feature rows of a magnitude slice; a slice shorter than one window
/// yields its mean as a single row.
fn slice_features(mag: &MagnitudeSeries, config: &PipelineConfig) -> Result<Vec<Vec<f64>>> {
    let rows = window_features(mag, config.feature_window(), config.partial_window)?;
    if rows.is_empty() {
        return Ok(vec![chunk_mean(&mag.data, 0, mag.n_samples())]);
    }
    Ok(rows.into_iter().map(|r| r.values).collect())
}

/// Trains one classifier per attribute on windows of the atomic intervals.
pub fn train_pipeline(
    recordings: &[Recording],
    config: &PipelineConfig,
    labels: &LabelAttributes,
) -> Result<(ZeroShotModel, TrainingReport)> {
    config.validate()?;
    let schema = config.load_schema()?;
    for v in labels.values() {
        AttributeVector::new(&schema, v.values().to_vec())?;
    }
    let mut groups: BTreeMap<String, Vec<Vec<f64>>> = BTreeMap::new();
    let mut unmapped = std::collections::BTreeSet::new();
    for rec in recordings {
        let mag = magnitude(&rec.stream);
        let (atomic, _) = segregate(rec, config.threshold_s);
        for iv in atomic {
            if !labels.contains_key(&iv.label) {
                unmapped.insert(iv.label.clone());
                continue;
            }
            let (a, b) = rec.row_range(&iv);
            if b <= a {
                continue;
            }
            let rows = slice_features(&mag.slice(a, b), config)?;
            groups.entry(iv.label.clone()).or_default().extend(rows);
        }
    }
    let n_rows: usize = groups.values().map(Vec::len).sum();
    if n_rows == 0 {
        return Err(Error::NoAtomicActivities {
            threshold_s: config.threshold_s,
        });
    }
    let windows_per_label = groups.iter().map(|(k, v)| (k.clone(), v.len())).collect();
    let matrices = groups
        .iter()
        .map(|(k, v)| Ok((k.clone(), Matrix::from_rows(v)?)))
        .collect::<Result<BTreeMap<_, _>>>()?;
    let spec = config.reducer_spec();

    let (features, row_labels, reducer, label_reducers, fallback) = match config.mode {
        Mode::Consistent => {
            let all = Matrix::vstack(&matrices.values().collect::<Vec<_>>())?;
            let reducer = dimreduce::fit(&spec, &all)?;
            let features = reducer.transform(&all)?;
            let row_labels: Vec<String> = matrices
                .iter()
                .flat_map(|(k, m)| std::iter::repeat_n(k.clone(), m.rows()))
                .collect();
            (features, row_labels, reducer, BTreeMap::new(), Vec::new())
        }
        Mode::PaperFaithful => {
            let lw = fit_label_wise(&spec, &matrices)?;
            (
                lw.pooled,
                lw.row_labels,
                lw.global,
                lw.reducers,
                lw.fallback,
            )
        }
    };
    let targets: Vec<AttributeVector> = row_labels.iter().map(|l| labels[l].clone()).collect();
    let mut model = train_zeroshot(
        &schema,
        &features,
        &targets,
        &config.classifier_spec(),
        reducer,
    )?;
    model.label_reducers = label_reducers;
    model.config = config.to_pairs().into_iter().collect();
    let report = TrainingReport {
        windows_per_label,
        constant_attributes: model
            .constant_attributes()
            .into_iter()
            .map(|j| schema.attributes()[j].name.clone())
            .collect(),
        unmapped_labels: unmapped.into_iter().collect(),
        fallback_labels: fallback,
        rank_deficient: model.reducer.rank_deficient(),
        n_rows,
    };
    Ok((model, report))
}

/// Per-attribute majority over window predictions; ties go to the smaller value.
pub fn majority_vote(
    schema: &AttributeSchema,
    votes: &[AttributeVector],
) -> Result<AttributeVector> {
    let first = votes.first().ok_or(Error::EmptyInput("votes"))?;
    let values = (0..first.len())
        .map(|j| {
            let mut counts: BTreeMap<u8, usize> = BTreeMap::new();
            for v in votes {
                *counts.entry(v.get(j)).or_default() += 1;
            }
            let mut best = (0u8, 0usize);
            for (value, c) in counts {
                if c > best.1 {
                    best = (value, c);
                }
            }
            best.0
        })
        .collect();
    AttributeVector::new(schema, values)
}

/// Segmentation of an interval's signal, or `None` when it is too short.
fn segment_signal(signal: &Matrix, cpd: &CpdConfig) -> Result<Option<Segmentation>> {
    match detect(signal, cpd) {
        Ok(d) => Ok(Some(d.segmentation)),
        Err(Error::SignalTooShort { .. }) => Ok(None),
        Err(e) => Err(e),
    }
}

/// Reducer for an interval in paper-faithful mode: fitted on the interval's
/// own windows, or the training reducer when they are too few.
fn interval_reducer(
    model: &ZeroShotModel,
    config: &PipelineConfig,
    rows: &Matrix,
) -> (FittedReducer, bool) {
    let spec = ReducerSpec {
        n_neighbors: config.predict_neighbors,
        ..config.reducer_spec()
    };
    if rows.rows() >= spec.min_rows() && rows.cols() == model.reducer.input_dim {
        if let Ok(r) = dimreduce::fit(&spec, rows) {
            return (r, false);
        }
    }
    (model.reducer.clone(), true)
}

/// Splits one interval into micro-activities and predicts their attributes.
pub fn decompose(
    model: &ZeroShotModel,
    recording: &Recording,
    interval: &LabeledInterval,
    config: &PipelineConfig,
    corpus: Option<&VerbCorpus>,
) -> Result<MicroActivityReport> {
    if let Some(c) = corpus {
        if c.schema().hash() != model.schema.hash() {
            return Err(Error::SchemaMismatch {
                expected: model.schema.hash(),
                found: c.schema().hash(),
            });
        }
    }
    let (a, b) = recording.row_range(interval);
    if b <= a {
        return Err(Error::OutOfRange(format!(
            "interval `{}` covers no samples",
            interval.label
        )));
    }
    let mag = magnitude(&recording.stream).slice(a, b);
    let found = segment_signal(&mag.data, &config.cpd)?;
    let short_interval = found.is_none();
    let segmentation = found.unwrap_or_else(|| Segmentation::single(b - a));

    let spans = segmentation.segments();
    let per_segment = spans
        .iter()
        .map(|&(s, e)| slice_features(&mag.slice(s, e), config))
        .collect::<Result<Vec<_>>>()?;

    let (reducer, reducer_fallback) = match config.mode {
        Mode::Consistent => (model.reducer.clone(), false),
        Mode::PaperFaithful => {
            let all: Vec<Vec<f64>> = per_segment.iter().flatten().cloned().collect();
            interval_reducer(model, config, &Matrix::from_rows(&all)?)
        }
    };

    let mut segments = Vec::with_capacity(spans.len());
    for (k, (&(s, e), rows)) in spans.iter().zip(&per_segment).enumerate() {
        let votes = rows
            .iter()
            .map(|r| predict_attributes(model, &reducer.transform_row(r)?))
            .collect::<Result<Vec<_>>>()?;
        let attributes = majority_vote(&model.schema, &votes)?;
        let verb_matches = match corpus {
            Some(c) => nearest_verbs(c, &attributes, config.top_k, config.distance)?,
            None => Vec::new(),
        };
        let start_s = if k == 0 {
            interval.start_s
        } else {
            recording.stream.time_of_row(a + s)
        };
        let end_s = if k + 1 == spans.len() {
            interval.end_s
        } else {
            recording.stream.time_of_row(a + e)
        };
        segments.push(SegmentReport {
            start_s,
            end_s,
            n_windows: rows.len(),
            attributes,
            verb_matches,
        });
    }
    Ok(MicroActivityReport {
        subject: recording.subject_id.clone(),
        macro_label: interval.label.clone(),
        interval: interval.clone(),
        segments,
        short_interval,
        reducer_fallback,
    })
}

/// Decomposes every interval at least `threshold_s` long, in recording order.
pub fn decompose_all(
    model: &ZeroShotModel,
    recordings: &[Recording],
    config: &PipelineConfig,
    corpus: Option<&VerbCorpus>,
) -> Result<Vec<MicroActivityReport>> {
    let jobs: Vec<(&Recording, LabeledInterval)> = recordings
        .iter()
        .flat_map(|r| {
            segregate(r, config.threshold_s)
                .1
                .into_iter()
                .map(move |iv| (r, iv))
        })
        .collect();
    jobs.par_iter()
        .map(|(r, iv)| decompose(model, r, iv, config, corpus))
        .collect()
}

/// Change-point accuracy of the configured detector against known
/// boundaries, one row per truth interval of the recording's subject lasting
/// at least `min_duration_s`. Row ids index `truth`.
pub fn evaluate_cpd(
    recording: &Recording,
    truth: &[IntervalTruth],
    cpd: &CpdConfig,
    min_duration_s: f64,
) -> Result<Vec<CpdRow>> {
    cpd.validate()?;
    let mag = magnitude(&recording.stream);
    truth
        .par_iter()
        .enumerate()
        .filter(|(_, t)| {
            t.subject == recording.subject_id && t.interval.duration_s() >= min_duration_s
        })
        .map(|(i, t)| {
            let (a, b) = recording.row_range(&t.interval);
            let est: Vec<f64> = match segment_signal(&mag.data.slice_rows(a, b), cpd)? {
                Some(seg) => seg
                    .boundaries
                    .iter()
                    .map(|&k| recording.stream.time_of_row(a + k))
                    .collect(),
                None => Vec::new(),
            };
            let tb = t.boundaries_s();
            Ok(CpdRow {
                subject: t.subject.clone(),
                interval_id: i,
                algorithm: cpd.algorithm.to_string(),
                ae: tb.len().abs_diff(est.len()),
                mae_s: boundary_mae_s(&tb, &est, t.interval.start_s, t.interval.end_s).map(|m| m.0),
            })
        })
        .collect()
}
