//! Decomposition reports, ground truth, metrics and their file formats.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::embedding::{parse_attribute_string, VerbMatch};
use crate::error::{Error, Result};
use crate::ingest::LabeledInterval;
use crate::zeroshot::{confusion, AttributeSchema, AttributeVector, Confusion};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SegmentReport {
    pub start_s: f64,
    pub end_s: f64,
    /// Feature rows that voted on the attributes.
    pub n_windows: usize,
    pub attributes: AttributeVector,
    pub verb_matches: Vec<VerbMatch>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MicroActivityReport {
    pub subject: String,
    pub macro_label: String,
    pub interval: LabeledInterval,
    pub segments: Vec<SegmentReport>,
    /// The interval was too short to segment and is reported whole.
    pub short_interval: bool,
    /// Paper-faithful mode fell back to the global reducer.
    pub reducer_fallback: bool,
}

impl MicroActivityReport {
    /// Interior boundary times.
    pub fn boundaries_s(&self) -> Vec<f64> {
        self.segments.iter().skip(1).map(|s| s.start_s).collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TruthSegment {
    pub start_s: f64,
    pub end_s: f64,
    pub label: String,
    pub attributes: AttributeVector,
}

/// Ground-truth micro segmentation of one labeled interval.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IntervalTruth {
    pub subject: String,
    pub interval: LabeledInterval,
    pub segments: Vec<TruthSegment>,
}

impl IntervalTruth {
    pub fn boundaries_s(&self) -> Vec<f64> {
        self.segments.iter().skip(1).map(|s| s.start_s).collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IntervalMetrics {
    pub subject: String,
    pub macro_label: String,
    pub start_s: f64,
    pub end_s: f64,
    pub n_true_boundaries: usize,
    pub n_pred_boundaries: usize,
    pub ae: usize,
    /// `None` when the truth has no interior boundary.
    pub mae_s: Option<f64>,
    /// MAE was measured against the interval endpoints.
    pub empty_estimate: bool,
    pub micro_f1: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunMetrics {
    pub intervals: Vec<IntervalMetrics>,
    /// Pooled over every segment decision of the run.
    pub micro_f1: f64,
    pub median_micro_f1: f64,
    pub median_ae: f64,
    pub median_mae_s: Option<f64>,
}

pub fn median(values: &[f64]) -> Option<f64> {
    if values.is_empty() {
        return None;
    }
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len();
    Some(if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    })
}

/// Mean distance from each true boundary to the nearest estimated one;
/// with no estimate, to the nearer interval endpoint.
pub fn boundary_mae_s(
    truth: &[f64],
    estimate: &[f64],
    start_s: f64,
    end_s: f64,
) -> Option<(f64, bool)> {
    if truth.is_empty() {
        return None;
    }
    let empty = estimate.is_empty();
    let reference: Vec<f64> = if empty {
        vec![start_s, end_s]
    } else {
        estimate.to_vec()
    };
    let total: f64 = truth
        .iter()
        .map(|t| {
            reference
                .iter()
                .map(|e| (t - e).abs())
                .fold(f64::INFINITY, f64::min)
        })
        .sum();
    Some((total / truth.len() as f64, empty))
}

fn overlap(a: (f64, f64), b: (f64, f64)) -> f64 {
    (a.1.min(b.1) - a.0.max(b.0)).max(0.0)
}

const TIME_EPS: f64 = 1e-6;

/// Aligns each predicted segment with the truth segment it overlaps most
/// (earliest on ties) and scores attributes, boundary counts and offsets.
pub fn evaluate_run(
    schema: &AttributeSchema,
    reports: &[MicroActivityReport],
    truth: &[IntervalTruth],
) -> Result<RunMetrics> {
    if reports.is_empty() {
        return Err(Error::EmptyInput("no reports"));
    }
    let mut pooled = Confusion::default();
    let mut rows = Vec::with_capacity(reports.len());
    for r in reports {
        let t = truth
            .iter()
            .find(|t| {
                t.subject == r.subject
                    && (t.interval.start_s - r.interval.start_s).abs() < TIME_EPS
                    && (t.interval.end_s - r.interval.end_s).abs() < TIME_EPS
            })
            .ok_or_else(|| {
                Error::IntervalMismatch(format!(
                    "no truth for {} `{}` [{}, {}]",
                    r.subject, r.macro_label, r.interval.start_s, r.interval.end_s
                ))
            })?;
        if t.segments.is_empty() {
            return Err(Error::IntervalMismatch(format!(
                "truth for `{}` has no segments",
                r.macro_label
            )));
        }
        let mut pred = Vec::with_capacity(r.segments.len());
        let mut gold = Vec::with_capacity(r.segments.len());
        for s in &r.segments {
            let mut best = (f64::NEG_INFINITY, 0);
            for (k, ts) in t.segments.iter().enumerate() {
                let o = overlap((s.start_s, s.end_s), (ts.start_s, ts.end_s));
                if o > best.0 {
                    best = (o, k);
                }
            }
            pred.push(s.attributes.clone());
            gold.push(t.segments[best.1].attributes.clone());
        }
        let c = confusion(schema, &pred, &gold)?;
        pooled.tp += c.tp;
        pooled.fp += c.fp;
        pooled.fn_ += c.fn_;
        let (tb, pb) = (t.boundaries_s(), r.boundaries_s());
        let mae = boundary_mae_s(&tb, &pb, r.interval.start_s, r.interval.end_s);
        rows.push(IntervalMetrics {
            subject: r.subject.clone(),
            macro_label: r.macro_label.clone(),
            start_s: r.interval.start_s,
            end_s: r.interval.end_s,
            n_true_boundaries: tb.len(),
            n_pred_boundaries: pb.len(),
            ae: tb.len().abs_diff(pb.len()),
            mae_s: mae.map(|m| m.0),
            empty_estimate: mae.is_some_and(|m| m.1),
            micro_f1: c.f1(),
        });
    }
    let f1s: Vec<f64> = rows.iter().map(|r| r.micro_f1).collect();
    let aes: Vec<f64> = rows.iter().map(|r| r.ae as f64).collect();
    let maes: Vec<f64> = rows.iter().filter_map(|r| r.mae_s).collect();
    Ok(RunMetrics {
        micro_f1: pooled.f1(),
        median_micro_f1: median(&f1s).expect("non-empty"),
        median_ae: median(&aes).expect("non-empty"),
        median_mae_s: median(&maes),
        intervals: rows,
    })
}

/// Converts reports into truth records (for self-evaluation and tests).
pub fn reports_as_truth(reports: &[MicroActivityReport]) -> Vec<IntervalTruth> {
    reports
        .iter()
        .map(|r| IntervalTruth {
            subject: r.subject.clone(),
            interval: r.interval.clone(),
            segments: r
                .segments
                .iter()
                .map(|s| TruthSegment {
                    start_s: s.start_s,
                    end_s: s.end_s,
                    label: s
                        .verb_matches
                        .first()
                        .map_or_else(String::new, |m| m.verb.clone()),
                    attributes: s.attributes.clone(),
                })
                .collect(),
        })
        .collect()
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    std::fs::write(path, text).map_err(|e| Error::io("write", path, e))
}

fn read_text(path: &Path) -> Result<String> {
    std::fs::read_to_string(path).map_err(|e| Error::io("read", path, e))
}

fn csv_writer() -> csv::Writer<Vec<u8>> {
    csv::WriterBuilder::new().from_writer(Vec::new())
}

fn finish(w: csv::Writer<Vec<u8>>) -> String {
    String::from_utf8(w.into_inner().expect("in-memory writer")).expect("utf-8")
}

fn f(v: f64) -> String {
    format!("{v:.3}")
}

/// One row per segment: `subject,macro_label,seg_start_s,seg_end_s,attr_csv,top_verbs`.
pub fn report_csv(reports: &[MicroActivityReport]) -> String {
    let mut w = csv_writer();
    w.write_record([
        "subject",
        "macro_label",
        "seg_start_s",
        "seg_end_s",
        "attr_csv",
        "top_verbs",
    ])
    .expect("in-memory");
    for r in reports {
        for s in &r.segments {
            let verbs = s
                .verb_matches
                .iter()
                .map(|m| format!("{} ({})", m.verb, m.template))
                .collect::<Vec<_>>()
                .join("; ");
            w.write_record([
                r.subject.as_str(),
                r.macro_label.as_str(),
                &f(s.start_s),
                &f(s.end_s),
                &s.attributes.to_csv(),
                &verbs,
            ])
            .expect("in-memory");
        }
    }
    finish(w)
}

pub fn report_json(reports: &[MicroActivityReport]) -> Result<String> {
    serde_json::to_string_pretty(reports).map_err(|e| Error::Numerical(e.to_string()))
}

pub fn parse_report_json(text: &str, origin: &Path) -> Result<Vec<MicroActivityReport>> {
    serde_json::from_str(text).map_err(|e| Error::Parse {
        path: origin.to_path_buf(),
        line: e.line(),
        message: e.to_string(),
    })
}

pub fn load_report_json(path: impl AsRef<Path>) -> Result<Vec<MicroActivityReport>> {
    let path = path.as_ref();
    parse_report_json(&read_text(path)?, path)
}

pub fn write_report_csv(reports: &[MicroActivityReport], path: impl AsRef<Path>) -> Result<()> {
    write_text(path.as_ref(), &report_csv(reports))
}

pub fn write_report_json(reports: &[MicroActivityReport], path: impl AsRef<Path>) -> Result<()> {
    write_text(path.as_ref(), &(report_json(reports)? + "\n"))
}

/// Per-interval rows followed by a `*,median` aggregate row.
pub fn metrics_csv(metrics: &RunMetrics) -> String {
    let mut w = csv_writer();
    w.write_record([
        "subject",
        "macro_label",
        "start_s",
        "end_s",
        "n_true_boundaries",
        "n_pred_boundaries",
        "AE",
        "MAE_s",
        "micro_f1",
    ])
    .expect("in-memory");
    let opt = |v: Option<f64>| v.map_or_else(String::new, f);
    for m in &metrics.intervals {
        w.write_record([
            m.subject.clone(),
            m.macro_label.clone(),
            f(m.start_s),
            f(m.end_s),
            m.n_true_boundaries.to_string(),
            m.n_pred_boundaries.to_string(),
            m.ae.to_string(),
            opt(m.mae_s),
            format!("{:.4}", m.micro_f1),
        ])
        .expect("in-memory");
    }
    w.write_record([
        "*".to_string(),
        "median".to_string(),
        String::new(),
        String::new(),
        String::new(),
        String::new(),
        format!("{}", metrics.median_ae),
        opt(metrics.median_mae_s),
        format!("{:.4}", metrics.median_micro_f1),
    ])
    .expect("in-memory");
    finish(w)
}

pub fn write_metrics_csv(metrics: &RunMetrics, path: impl AsRef<Path>) -> Result<()> {
    write_text(path.as_ref(), &metrics_csv(metrics))
}

/// `subject,interval_id,macro_label,interval_start_s,interval_end_s,seg_start_s,seg_end_s,label,attr_csv`.
pub fn truth_csv(truth: &[IntervalTruth]) -> String {
    let mut w = csv_writer();
    w.write_record([
        "subject",
        "interval_id",
        "macro_label",
        "interval_start_s",
        "interval_end_s",
        "seg_start_s",
        "seg_end_s",
        "label",
        "attr_csv",
    ])
    .expect("in-memory");
    for (i, t) in truth.iter().enumerate() {
        for s in &t.segments {
            w.write_record([
                t.subject.clone(),
                i.to_string(),
                t.interval.label.clone(),
                t.interval.start_s.to_string(),
                t.interval.end_s.to_string(),
                s.start_s.to_string(),
                s.end_s.to_string(),
                s.label.clone(),
                s.attributes.to_csv(),
            ])
            .expect("in-memory");
        }
    }
    finish(w)
}

pub fn write_truth_csv(truth: &[IntervalTruth], path: impl AsRef<Path>) -> Result<()> {
    write_text(path.as_ref(), &truth_csv(truth))
}

pub fn parse_truth_csv(
    text: &str,
    schema: &AttributeSchema,
    origin: &Path,
) -> Result<Vec<IntervalTruth>> {
    let err = |line: usize, message: String| Error::Parse {
        path: origin.to_path_buf(),
        line,
        message,
    };
    let mut reader = csv::ReaderBuilder::new().from_reader(text.as_bytes());
    let mut out: Vec<IntervalTruth> = Vec::new();
    let mut ids: BTreeMap<(String, String), usize> = BTreeMap::new();
    for (i, rec) in reader.records().enumerate() {
        let line = i + 2;
        let rec = rec.map_err(|e| err(line, e.to_string()))?;
        if rec.len() != 9 {
            return Err(err(line, format!("expected 9 fields, found {}", rec.len())));
        }
        let num = |k: usize| -> Result<f64> {
            rec[k]
                .parse()
                .map_err(|_| err(line, format!("not a number: `{}`", &rec[k])))
        };
        let key = (rec[0].to_string(), rec[1].to_string());
        let idx = match ids.get(&key) {
            Some(&k) => k,
            None => {
                let interval = LabeledInterval::new(&rec[2], num(3)?, num(4)?)
                    .map_err(|e| err(line, e.to_string()))?;
                out.push(IntervalTruth {
                    subject: rec[0].to_string(),
                    interval,
                    segments: Vec::new(),
                });
                ids.insert(key, out.len() - 1);
                out.len() - 1
            }
        };
        let attributes =
            parse_attribute_string(schema, &rec[8]).map_err(|e| err(line, e.to_string()))?;
        out[idx].segments.push(TruthSegment {
            start_s: num(5)?,
            end_s: num(6)?,
            label: rec[7].to_string(),
            attributes,
        });
    }
    Ok(out)
}

pub fn load_truth_csv(
    path: impl AsRef<Path>,
    schema: &AttributeSchema,
) -> Result<Vec<IntervalTruth>> {
    let path = path.as_ref();
    parse_truth_csv(&read_text(path)?, schema, path)
}

/// `label,<attribute names>` records mapping atomic labels to vectors.
pub fn label_attributes_csv(
    schema: &AttributeSchema,
    map: &BTreeMap<String, AttributeVector>,
) -> String {
    let mut s = String::from("label");
    for a in schema.attributes() {
        s.push(',');
        s.push_str(&a.name);
    }
    s.push('\n');
    for (label, v) in map {
        let mut w = csv_writer();
        w.write_record([label.as_str()]).expect("in-memory");
        let quoted = finish(w);
        let _ = writeln!(s, "{},{}", quoted.trim_end(), v.to_csv());
    }
    s
}

pub fn write_label_attributes(
    schema: &AttributeSchema,
    map: &BTreeMap<String, AttributeVector>,
    path: impl AsRef<Path>,
) -> Result<()> {
    write_text(path.as_ref(), &label_attributes_csv(schema, map))
}

pub fn parse_label_attributes(
    text: &str,
    schema: &AttributeSchema,
    origin: &Path,
) -> Result<BTreeMap<String, AttributeVector>> {
    let err = |line: usize, message: String| Error::Parse {
        path: origin.to_path_buf(),
        line,
        message,
    };
    let mut reader = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());
    let header = reader.headers().map_err(|e| err(1, e.to_string()))?.clone();
    let names: Vec<&str> = header.iter().skip(1).collect();
    let expected: Vec<&str> = schema
        .attributes()
        .iter()
        .map(|a| a.name.as_str())
        .collect();
    if header.get(0) != Some("label") || names != expected {
        return Err(err(
            1,
            "header must be `label,` followed by the schema's attribute names".into(),
        ));
    }
    let mut map = BTreeMap::new();
    for (i, rec) in reader.records().enumerate() {
        let line = i + 2;
        let rec = rec.map_err(|e| err(line, e.to_string()))?;
        let vals = rec
            .iter()
            .skip(1)
            .map(|v| {
                v.parse::<i64>()
                    .map_err(|_| err(line, format!("not an integer: `{v}`")))
            })
            .collect::<Result<Vec<_>>>()?;
        let v = AttributeVector::from_i64(schema, &vals).map_err(|e| err(line, e.to_string()))?;
        if map.insert(rec[0].to_string(), v).is_some() {
            return Err(err(line, format!("duplicate label `{}`", &rec[0])));
        }
    }
    Ok(map)
}

pub fn load_label_attributes(
    path: impl AsRef<Path>,
    schema: &AttributeSchema,
) -> Result<BTreeMap<String, AttributeVector>> {
    let path = path.as_ref();
    parse_label_attributes(&read_text(path)?, schema, path)
}

/// One row of a change-point evaluation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CpdRow {
    pub subject: String,
    pub interval_id: usize,
    pub algorithm: String,
    pub ae: usize,
    pub mae_s: Option<f64>,
}

/// `subject,interval_id,algorithm,AE,MAE_s`.
pub fn cpd_csv(rows: &[CpdRow]) -> String {
    let mut w = csv_writer();
    w.write_record(["subject", "interval_id", "algorithm", "AE", "MAE_s"])
        .expect("in-memory");
    for r in rows {
        w.write_record([
            r.subject.clone(),
            r.interval_id.to_string(),
            r.algorithm.clone(),
            r.ae.to_string(),
            r.mae_s.map_or_else(String::new, f),
        ])
        .expect("in-memory");
    }
    finish(w)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn v(schema: &AttributeSchema, bits: &[u8]) -> AttributeVector {
        let mut vals = vec![0u8; schema.len()];
        vals[..bits.len()].copy_from_slice(bits);
        AttributeVector::new(schema, vals).unwrap()
    }

    fn report(schema: &AttributeSchema, cuts: &[f64]) -> MicroActivityReport {
        let mut edges = vec![0.0];
        edges.extend_from_slice(cuts);
        edges.push(20.0);
        MicroActivityReport {
            subject: "s".into(),
            macro_label: "m".into(),
            interval: LabeledInterval::new("m", 0.0, 20.0).unwrap(),
            segments: edges
                .windows(2)
                .enumerate()
                .map(|(i, w)| SegmentReport {
                    start_s: w[0],
                    end_s: w[1],
                    n_windows: 1,
                    attributes: v(schema, &[(i % 2) as u8, 1]),
                    verb_matches: vec![],
                })
                .collect(),
            short_interval: false,
            reducer_fallback: false,
        }
    }

    #[test]
    fn self_evaluation_is_perfect() {
        let s = AttributeSchema::lara();
        let reps = vec![report(&s, &[8.0, 13.0])];
        let m = evaluate_run(&s, &reps, &reports_as_truth(&reps)).unwrap();
        assert_eq!(m.micro_f1, 1.0);
        assert_eq!(m.intervals[0].ae, 0);
        assert_eq!(m.intervals[0].mae_s, Some(0.0));
    }

    #[test]
    fn spurious_boundary_costs_one_ae() {
        let s = AttributeSchema::lara();
        let truth = reports_as_truth(&[report(&s, &[8.0])]);
        let m = evaluate_run(&s, &[report(&s, &[8.0, 12.0])], &truth).unwrap();
        assert_eq!(m.intervals[0].ae, 1);
        assert_eq!(m.intervals[0].mae_s, Some(0.0));
    }

    #[test]
    fn missing_truth_is_an_interval_mismatch() {
        let s = AttributeSchema::lara();
        let mut t = reports_as_truth(&[report(&s, &[8.0])]);
        t[0].interval = LabeledInterval::new("m", 1.0, 20.0).unwrap();
        assert!(matches!(
            evaluate_run(&s, &[report(&s, &[8.0])], &t),
            Err(Error::IntervalMismatch(_))
        ));
    }

    #[test]
    fn truth_and_label_files_round_trip() {
        let s = AttributeSchema::verb();
        let truth = reports_as_truth(&[report(&s, &[5.5])]);
        let back = parse_truth_csv(&truth_csv(&truth), &s, Path::new("t")).unwrap();
        assert_eq!(back, truth);
        let mut map = BTreeMap::new();
        map.insert("stir, slowly".to_string(), v(&s, &[1, 0, 1, 3]));
        let text = label_attributes_csv(&s, &map);
        assert_eq!(
            parse_label_attributes(&text, &s, Path::new("l")).unwrap(),
            map
        );
    }

    #[test]
    fn mae_without_estimate_uses_endpoints() {
        assert_eq!(boundary_mae_s(&[4.0], &[], 0.0, 20.0), Some((4.0, true)));
        assert_eq!(boundary_mae_s(&[], &[3.0], 0.0, 20.0), None);
        assert_eq!(median(&[3.0, 1.0, 2.0, 10.0]), Some(2.5));
    }
}
