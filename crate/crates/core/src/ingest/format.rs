//! On-disk recording layouts.
//!
//! * `Generic`: `manifest.json`, one `<unit>.csv` per unit
//!   (`timestamp_us,ax,ay,az`) and `labels.csv` (`label,start_s,end_s`).
//! * `Kitchen`: `manifest.json`, whitespace-separated `imu/<unit>.txt`
//!   (`timestamp_us ax ay az`, `#` comments) polled asynchronously, and
//!   `labels.txt` with `start_s end_s label words...` per line.
//! * `Lara`: `manifest.json`, a synchronous wide `data.csv`
//!   (`time_s,<unit>_x,<unit>_y,<unit>_z,...`) and a per-sample
//!   `labels.csv` (`class,<attribute>...`); intervals are runs of equal class.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::Duration;

use serde::{Deserialize, Serialize};

use super::{resample_sync, LabeledInterval, RawSample, RawSensorStream, Recording, SyncedStream};
use crate::error::{Error, Result};
use crate::matrix::Matrix;
use crate::zeroshot::{AttributeSchema, AttributeVector};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RecordingFormat {
    Generic,
    Kitchen,
    Lara,
}

impl std::str::FromStr for RecordingFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "generic" => Ok(Self::Generic),
            "kitchen" => Ok(Self::Kitchen),
            "lara" => Ok(Self::Lara),
            other => Err(Error::invalid(
                "format",
                format!("unknown recording format `{other}`"),
            )),
        }
    }
}

/// `manifest.json` contents.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub subject_id: String,
    pub units: Vec<String>,
    pub native_rate_hz: f64,
    /// Overrides the caller's resampling window when present.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub resample_window_ms: Option<f64>,
}

/// Window used when neither the manifest nor the caller sets one.
pub const DEFAULT_RESAMPLE_WINDOW: Duration = Duration::from_millis(10);

fn resample_window(manifest: &Manifest, fallback: Duration) -> Result<Duration> {
    match manifest.resample_window_ms {
        None => Ok(fallback),
        Some(ms) if ms > 0.0 && ms.is_finite() => {
            Ok(Duration::from_micros((ms * 1000.0).round() as u64))
        }
        Some(_) => Err(Error::invalid("resample_window_ms", "must be positive")),
    }
}

fn read_to_string(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| Error::io("read", path, e))
}

fn parse_err(path: &Path, line: usize, message: impl Into<String>) -> Error {
    Error::Parse {
        path: path.to_path_buf(),
        line,
        message: message.into(),
    }
}

fn parse_f64(path: &Path, line: usize, field: &str, name: &str) -> Result<f64> {
    let v: f64 = field
        .trim()
        .parse()
        .map_err(|_| parse_err(path, line, format!("`{name}`: cannot parse `{field}`")))?;
    if !v.is_finite() {
        return Err(parse_err(path, line, format!("`{name}` is not finite")));
    }
    Ok(v)
}

fn parse_i64(path: &Path, line: usize, field: &str, name: &str) -> Result<i64> {
    field
        .trim()
        .parse()
        .map_err(|_| parse_err(path, line, format!("`{name}`: cannot parse `{field}`")))
}

fn csv_reader(path: &Path, expected: &[&str]) -> Result<csv::Reader<fs::File>> {
    let file = fs::File::open(path).map_err(|e| Error::io("read", path, e))?;
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .from_reader(file);
    let header = rdr
        .headers()
        .map_err(|e| parse_err(path, 1, e.to_string()))?
        .clone();
    if !expected.is_empty() && !header.iter().eq(expected.iter().copied()) {
        return Err(parse_err(
            path,
            1,
            format!("expected header `{}`", expected.join(",")),
        ));
    }
    Ok(rdr)
}

fn records(
    rdr: &mut csv::Reader<fs::File>,
    path: &Path,
) -> Result<Vec<(usize, csv::StringRecord)>> {
    let mut out = Vec::new();
    for (i, rec) in rdr.records().enumerate() {
        let rec = rec.map_err(|e| {
            let line = e.position().map_or(i + 2, |p| p.line() as usize);
            parse_err(path, line, e.to_string())
        })?;
        let line = rec.position().map_or(i + 2, |p| p.line() as usize);
        out.push((line, rec));
    }
    Ok(out)
}

/// Loads and validates a recording directory.
pub fn load_recording(dir: impl AsRef<Path>, format: RecordingFormat) -> Result<Recording> {
    load_recording_with(dir, format, DEFAULT_RESAMPLE_WINDOW)
}

/// As [`load_recording`], resampling asynchronous layouts with `window`
/// unless the manifest names its own.
pub fn load_recording_with(
    dir: impl AsRef<Path>,
    format: RecordingFormat,
    window: Duration,
) -> Result<Recording> {
    let dir = dir.as_ref();
    let manifest_path = dir.join("manifest.json");
    let manifest: Manifest = serde_json::from_str(&read_to_string(&manifest_path)?)
        .map_err(|e| parse_err(&manifest_path, e.line(), e.to_string()))?;
    if manifest.units.is_empty() {
        return Err(parse_err(&manifest_path, 1, "manifest names no units"));
    }
    match format {
        RecordingFormat::Generic => {
            load_generic(dir, &manifest, resample_window(&manifest, window)?)
        }
        RecordingFormat::Kitchen => {
            load_kitchen(dir, &manifest, resample_window(&manifest, window)?)
        }
        RecordingFormat::Lara => load_lara(dir, &manifest),
    }
}

fn load_generic(dir: &Path, manifest: &Manifest, window: Duration) -> Result<Recording> {
    let mut streams = Vec::with_capacity(manifest.units.len());
    for unit in &manifest.units {
        let path = dir.join(format!("{unit}.csv"));
        let mut rdr = csv_reader(&path, &["timestamp_us", "ax", "ay", "az"])?;
        let mut samples = Vec::new();
        for (line, rec) in records(&mut rdr, &path)? {
            if rec.len() != 4 {
                return Err(parse_err(
                    &path,
                    line,
                    format!("expected 4 fields, found {}", rec.len()),
                ));
            }
            samples.push(RawSample {
                timestamp_us: parse_i64(&path, line, &rec[0], "timestamp_us")?,
                ax: parse_f64(&path, line, &rec[1], "ax")?,
                ay: parse_f64(&path, line, &rec[2], "ay")?,
                az: parse_f64(&path, line, &rec[3], "az")?,
            });
        }
        streams.push(raw_stream(&path, unit, samples)?);
    }
    let stream = resample_sync(&streams, window)?;

    let path = dir.join("labels.csv");
    let mut rdr = csv_reader(&path, &["label", "start_s", "end_s"])?;
    let mut intervals = Vec::new();
    for (line, rec) in records(&mut rdr, &path)? {
        if rec.len() != 3 {
            return Err(parse_err(
                &path,
                line,
                format!("expected 3 fields, found {}", rec.len()),
            ));
        }
        let start = parse_f64(&path, line, &rec[1], "start_s")?;
        let end = parse_f64(&path, line, &rec[2], "end_s")?;
        intervals.push(
            LabeledInterval::new(&rec[0], start, end)
                .map_err(|e| parse_err(&path, line, e.to_string()))?,
        );
    }
    Recording::new(stream, intervals, &manifest.subject_id)
}

fn raw_stream(path: &Path, unit: &str, samples: Vec<RawSample>) -> Result<RawSensorStream> {
    RawSensorStream::new(unit, samples).map_err(|e| match e {
        Error::NonMonotonicTimestamps { index, .. } => {
            parse_err(path, index + 2, "timestamps not strictly increasing")
        }
        other => other,
    })
}

fn load_kitchen(dir: &Path, manifest: &Manifest, window: Duration) -> Result<Recording> {
    let mut streams = Vec::with_capacity(manifest.units.len());
    for unit in &manifest.units {
        let path = dir.join("imu").join(format!("{unit}.txt"));
        let text = read_to_string(&path)?;
        let mut samples = Vec::new();
        for (i, raw) in text.lines().enumerate() {
            let line = i + 1;
            let content = raw.split('#').next().unwrap_or("").trim();
            if content.is_empty() {
                continue;
            }
            let fields: Vec<&str> = content.split_whitespace().collect();
            if fields.len() != 4 {
                return Err(parse_err(
                    &path,
                    line,
                    format!("expected 4 fields, found {}", fields.len()),
                ));
            }
            samples.push(RawSample {
                timestamp_us: parse_i64(&path, line, fields[0], "timestamp_us")?,
                ax: parse_f64(&path, line, fields[1], "ax")?,
                ay: parse_f64(&path, line, fields[2], "ay")?,
                az: parse_f64(&path, line, fields[3], "az")?,
            });
        }
        // line numbers in errors count comment lines too
        streams.push(RawSensorStream::new(unit, samples)?);
    }
    let stream = resample_sync(&streams, window)?;

    let path = dir.join("labels.txt");
    let text = read_to_string(&path)?;
    let mut intervals = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        let content = raw.split('#').next().unwrap_or("").trim();
        if content.is_empty() {
            continue;
        }
        let mut parts = content.splitn(3, char::is_whitespace);
        let (Some(s), Some(e), Some(label)) = (parts.next(), parts.next(), parts.next()) else {
            return Err(parse_err(&path, line, "expected `start_s end_s label`"));
        };
        let start = parse_f64(&path, line, s, "start_s")?;
        let end = parse_f64(&path, line, e, "end_s")?;
        intervals.push(
            LabeledInterval::new(label.trim(), start, end)
                .map_err(|e| parse_err(&path, line, e.to_string()))?,
        );
    }
    Recording::new(stream, intervals, &manifest.subject_id)
}

fn lara_header(units: &[String]) -> Vec<String> {
    let mut h = vec!["time_s".to_string()];
    for u in units {
        for axis in ["x", "y", "z"] {
            h.push(format!("{u}_{axis}"));
        }
    }
    h
}

fn load_lara(dir: &Path, manifest: &Manifest) -> Result<Recording> {
    let (stream, times) = load_lara_data(dir, manifest)?;
    let path = dir.join("labels.csv");
    let mut rdr = csv_reader(&path, &[])?;
    let header = rdr
        .headers()
        .map_err(|e| parse_err(&path, 1, e.to_string()))?
        .clone();
    if header.get(0) != Some("class") {
        return Err(parse_err(&path, 1, "first column must be `class`"));
    }
    let rows = records(&mut rdr, &path)?;
    if rows.len() != times.len() {
        return Err(parse_err(
            &path,
            rows.len() + 1,
            format!("{} label rows for {} data rows", rows.len(), times.len()),
        ));
    }
    let period = 1.0 / stream.rate_hz;
    let mut intervals = Vec::new();
    let mut run_start = 0;
    for i in 1..=rows.len() {
        if i == rows.len() || rows[i].1[0] != rows[run_start].1[0] {
            let label = &rows[run_start].1[0];
            intervals.push(
                LabeledInterval::new(label, times[run_start], times[i - 1] + period)
                    .map_err(|e| parse_err(&path, rows[run_start].0, e.to_string()))?,
            );
            run_start = i;
        }
    }
    Recording::new(stream, intervals, &manifest.subject_id)
}

fn load_lara_data(dir: &Path, manifest: &Manifest) -> Result<(SyncedStream, Vec<f64>)> {
    let path = dir.join("data.csv");
    let header = lara_header(&manifest.units);
    let header_refs: Vec<&str> = header.iter().map(String::as_str).collect();
    let mut rdr = csv_reader(&path, &header_refs)?;
    let mut times = Vec::new();
    let mut values = Vec::new();
    for (line, rec) in records(&mut rdr, &path)? {
        if rec.len() != header.len() {
            return Err(parse_err(
                &path,
                line,
                format!("expected {} fields, found {}", header.len(), rec.len()),
            ));
        }
        let t = parse_f64(&path, line, &rec[0], "time_s")?;
        if let Some(&prev) = times.last() {
            if t <= prev {
                return Err(parse_err(&path, line, "time_s not strictly increasing"));
            }
        }
        times.push(t);
        for (field, name) in rec.iter().zip(&header).skip(1) {
            values.push(parse_f64(&path, line, field, name)?);
        }
    }
    if times.is_empty() {
        return Err(Error::EmptyInput("LARa data file has no rows"));
    }
    let rate = manifest.native_rate_hz;
    let period = 1.0 / rate;
    for (i, w) in times.windows(2).enumerate() {
        if ((w[1] - w[0]) - period).abs() > 0.25 * period {
            return Err(parse_err(
                &path,
                i + 3,
                format!("sample spacing deviates from {rate} Hz"),
            ));
        }
    }
    let data = Matrix::from_vec(times.len(), header.len() - 1, values)?;
    let epoch_us = (times[0] * 1e6).round() as i64;
    let stream = SyncedStream::new(rate, manifest.units.clone(), data, epoch_us)?;
    Ok((stream, times))
}

/// A run of consecutive samples sharing one attribute vector.
#[derive(Debug, Clone, PartialEq)]
pub struct AttributeRun {
    pub start_s: f64,
    pub end_s: f64,
    pub vector: AttributeVector,
}

/// Per-sample semantic attributes of a LARa-style directory collapsed into runs.
/// The `labels.csv` attribute columns must match `schema` in name and order.
pub fn lara_attribute_segments(
    dir: impl AsRef<Path>,
    schema: &AttributeSchema,
) -> Result<Vec<AttributeRun>> {
    let dir = dir.as_ref();
    let manifest_path = dir.join("manifest.json");
    let manifest: Manifest = serde_json::from_str(&read_to_string(&manifest_path)?)
        .map_err(|e| parse_err(&manifest_path, e.line(), e.to_string()))?;
    let (stream, times) = load_lara_data(dir, &manifest)?;
    let path = dir.join("labels.csv");
    let mut expected = vec!["class"];
    expected.extend(schema.attributes().iter().map(|a| a.name.as_str()));
    let mut rdr = csv_reader(&path, &expected)?;
    let rows = records(&mut rdr, &path)?;
    if rows.len() != times.len() {
        return Err(parse_err(
            &path,
            rows.len() + 1,
            "label rows do not match data rows",
        ));
    }
    let period = 1.0 / stream.rate_hz;
    let mut vectors = Vec::with_capacity(rows.len());
    for (line, rec) in &rows {
        let vals: Vec<i64> = rec
            .iter()
            .skip(1)
            .map(|f| parse_i64(&path, *line, f, "attribute"))
            .collect::<Result<_>>()?;
        vectors.push(
            AttributeVector::from_i64(schema, &vals)
                .map_err(|e| parse_err(&path, *line, e.to_string()))?,
        );
    }
    let mut runs = Vec::new();
    let mut start = 0;
    for i in 1..=vectors.len() {
        if i == vectors.len() || vectors[i] != vectors[start] {
            runs.push(AttributeRun {
                start_s: times[start],
                end_s: times[i - 1] + period,
                vector: vectors[start].clone(),
            });
            start = i;
        }
    }
    Ok(runs)
}

fn create_file(path: &Path) -> Result<std::io::BufWriter<fs::File>> {
    let f = fs::File::create(path).map_err(|e| Error::io("write", path, e))?;
    Ok(std::io::BufWriter::new(f))
}

fn write_err(path: &Path) -> impl Fn(std::io::Error) -> Error + '_ {
    move |e| Error::io("write", path, e)
}

/// Writes the synchronized matrix as `t_s,<unit>_x,<unit>_y,<unit>_z,...`.
pub fn write_synced_csv(stream: &SyncedStream, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let mut w = create_file(path)?;
    let err = write_err(path);
    writeln!(
        w,
        "{}",
        lara_header(&stream.units)
            .join(",")
            .replacen("time_s", "t_s", 1)
    )
    .map_err(&err)?;
    for (r, row) in stream.data.iter_rows().enumerate() {
        write!(w, "{}", stream.time_of_row(r)).map_err(&err)?;
        for v in row {
            write!(w, ",{v}").map_err(&err)?;
        }
        writeln!(w).map_err(&err)?;
    }
    w.flush().map_err(&err)
}

pub fn write_labels_csv(intervals: &[LabeledInterval], path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let mut w = create_file(path)?;
    let err = write_err(path);
    writeln!(w, "label,start_s,end_s").map_err(&err)?;
    for iv in intervals {
        writeln!(w, "{},{},{}", csv_field(&iv.label), iv.start_s, iv.end_s).map_err(&err)?;
    }
    w.flush().map_err(&err)
}

pub(crate) fn csv_field(s: &str) -> String {
    if s.contains([',', '"', '\n']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

/// Writes a recording in the `Generic` layout, one raw sample per synced row.
/// Reloading with a window equal to the sample period reproduces the stream.
pub fn write_raw_recording(recording: &Recording, dir: impl AsRef<Path>) -> Result<PathBuf> {
    let dir = dir.as_ref();
    fs::create_dir_all(dir).map_err(|e| Error::io("write", dir, e))?;
    let stream = &recording.stream;
    let period_us = 1e6 / stream.rate_hz;
    let manifest = Manifest {
        subject_id: recording.subject_id.clone(),
        units: stream.units.clone(),
        native_rate_hz: stream.rate_hz,
        resample_window_ms: Some(period_us / 1000.0),
    };
    let manifest_path = dir.join("manifest.json");
    let text = serde_json::to_string_pretty(&manifest).expect("manifest serializes");
    fs::write(&manifest_path, text + "\n").map_err(|e| Error::io("write", &manifest_path, e))?;
    for (u, unit) in stream.units.iter().enumerate() {
        let path = dir.join(format!("{unit}.csv"));
        let mut w = create_file(&path)?;
        let err = write_err(&path);
        writeln!(w, "timestamp_us,ax,ay,az").map_err(&err)?;
        for (r, row) in stream.data.iter_rows().enumerate() {
            let ts = stream.epoch_us + (r as f64 * period_us).round() as i64;
            writeln!(
                w,
                "{ts},{},{},{}",
                row[3 * u],
                row[3 * u + 1],
                row[3 * u + 2]
            )
            .map_err(&err)?;
        }
        w.flush().map_err(&err)?;
    }
    write_labels_csv(&recording.intervals, dir.join("labels.csv"))?;
    Ok(dir.to_path_buf())
}
