//! Loading, synchronizing and featurizing multi-unit inertial recordings.

mod format;

use std::time::Duration;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrix::Matrix;

pub use format::{
    lara_attribute_segments, load_recording, load_recording_with, write_labels_csv,
    write_raw_recording, write_synced_csv, Manifest, RecordingFormat, DEFAULT_RESAMPLE_WINDOW,
};

/// One tri-axial accelerometer reading.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RawSample {
    /// Microseconds since the recording epoch.
    pub timestamp_us: i64,
    pub ax: f64,
    pub ay: f64,
    pub az: f64,
}

/// Asynchronously polled samples of a single sensor unit.
#[derive(Debug, Clone, PartialEq)]
pub struct RawSensorStream {
    unit_id: String,
    samples: Vec<RawSample>,
}

impl RawSensorStream {
    /// Validates that timestamps strictly increase and values are finite.
    /// An empty sample list is accepted here and rejected by [`resample_sync`]
    /// so the error can name the unit in context.
    pub fn new(unit_id: impl Into<String>, samples: Vec<RawSample>) -> Result<Self> {
        let unit_id = unit_id.into();
        for (i, s) in samples.iter().enumerate() {
            if !(s.ax.is_finite() && s.ay.is_finite() && s.az.is_finite()) {
                return Err(Error::NonFinite(format!("unit `{unit_id}` sample {i}")));
            }
            if i > 0 && s.timestamp_us <= samples[i - 1].timestamp_us {
                return Err(Error::NonMonotonicTimestamps { unit_id, index: i });
            }
        }
        Ok(Self { unit_id, samples })
    }

    pub fn unit_id(&self) -> &str {
        &self.unit_id
    }

    pub fn samples(&self) -> &[RawSample] {
        &self.samples
    }
}

/// Uniform-rate matrix of all units: one row per timestep, columns
/// `(x, y, z)` per unit in `units` order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SyncedStream {
    pub rate_hz: f64,
    pub units: Vec<String>,
    pub data: Matrix,
    /// Time of row 0, microseconds since the recording epoch.
    pub epoch_us: i64,
}

impl SyncedStream {
    pub fn new(rate_hz: f64, units: Vec<String>, data: Matrix, epoch_us: i64) -> Result<Self> {
        if !(rate_hz > 0.0 && rate_hz.is_finite()) {
            return Err(Error::invalid(
                "rate_hz",
                format!("{rate_hz} is not positive"),
            ));
        }
        if data.cols() != 3 * units.len() {
            return Err(Error::DimensionMismatch {
                expected: 3 * units.len(),
                found: data.cols(),
            });
        }
        if !data.all_finite() {
            return Err(Error::NonFinite("synced stream".into()));
        }
        Ok(Self {
            rate_hz,
            units,
            data,
            epoch_us,
        })
    }

    pub fn n_samples(&self) -> usize {
        self.data.rows()
    }

    pub fn start_s(&self) -> f64 {
        self.epoch_us as f64 * 1e-6
    }

    pub fn end_s(&self) -> f64 {
        self.start_s() + self.n_samples() as f64 / self.rate_hz
    }

    pub fn time_of_row(&self, row: usize) -> f64 {
        self.start_s() + row as f64 / self.rate_hz
    }
}

/// A coarse macro-activity label over `[start_s, end_s)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabeledInterval {
    pub label: String,
    pub start_s: f64,
    pub end_s: f64,
}

impl LabeledInterval {
    pub fn new(label: impl Into<String>, start_s: f64, end_s: f64) -> Result<Self> {
        let label = label.into();
        if !(start_s.is_finite() && end_s.is_finite()) || start_s >= end_s {
            return Err(Error::OutOfRange(format!(
                "interval `{label}` [{start_s}, {end_s}) is empty or reversed"
            )));
        }
        Ok(Self {
            label,
            start_s,
            end_s,
        })
    }

    pub fn duration_s(&self) -> f64 {
        self.end_s - self.start_s
    }
}

/// A synchronized stream with its validated interval labels.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Recording {
    pub stream: SyncedStream,
    pub intervals: Vec<LabeledInterval>,
    pub subject_id: String,
}

impl Recording {
    /// Sorts intervals by start time and rejects overlaps or intervals
    /// outside the stream's time extent (one sample period of slack).
    pub fn new(
        stream: SyncedStream,
        mut intervals: Vec<LabeledInterval>,
        subject_id: impl Into<String>,
    ) -> Result<Self> {
        intervals.sort_by(|a, b| a.start_s.total_cmp(&b.start_s));
        let slack = 1.0 / stream.rate_hz;
        let eps = 1e-9;
        for iv in &intervals {
            if iv.start_s >= iv.end_s {
                return Err(Error::OutOfRange(format!(
                    "interval `{}` is empty",
                    iv.label
                )));
            }
            if iv.start_s < stream.start_s() - slack || iv.end_s > stream.end_s() + slack {
                return Err(Error::OutOfRange(format!(
                    "interval `{}` [{}, {}) outside stream extent [{}, {})",
                    iv.label,
                    iv.start_s,
                    iv.end_s,
                    stream.start_s(),
                    stream.end_s()
                )));
            }
        }
        for pair in intervals.windows(2) {
            if pair[1].start_s < pair[0].end_s - eps {
                return Err(Error::OverlappingIntervals {
                    first: format!("{}@{}", pair[0].label, pair[0].start_s),
                    second: format!("{}@{}", pair[1].label, pair[1].start_s),
                });
            }
        }
        Ok(Self {
            stream,
            intervals,
            subject_id: subject_id.into(),
        })
    }

    /// Row range `[start, end)` of the synced stream covered by `interval`.
    pub fn row_range(&self, interval: &LabeledInterval) -> (usize, usize) {
        let n = self.stream.n_samples();
        let to_row = |t: f64| {
            let r = ((t - self.stream.start_s()) * self.stream.rate_hz).round();
            r.clamp(0.0, n as f64) as usize
        };
        (to_row(interval.start_s), to_row(interval.end_s))
    }
}

/// Per-unit magnitude series, one column per unit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MagnitudeSeries {
    pub rate_hz: f64,
    pub units: Vec<String>,
    pub data: Matrix,
    /// Time of row 0 in seconds.
    pub start_s: f64,
}

impl MagnitudeSeries {
    pub fn n_samples(&self) -> usize {
        self.data.rows()
    }

    pub fn slice(&self, start: usize, end: usize) -> Self {
        Self {
            rate_hz: self.rate_hz,
            units: self.units.clone(),
            data: self.data.slice_rows(start, end),
            start_s: self.start_s + start as f64 / self.rate_hz,
        }
    }
}

/// Window-averaged per-unit magnitudes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureRow {
    pub window_start_s: f64,
    pub values: Vec<f64>,
}

/// Policy for a trailing window shorter than the configured length.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum PartialWindow {
    #[default]
    Drop,
    KeepAsMean,
}

/// Averages every unit's samples into fixed windows on a shared time base.
///
/// Row `k` holds the per-axis means of samples with timestamps in
/// `[epoch + k·window, epoch + (k+1)·window)` where `epoch` is the earliest
/// timestamp rounded down to a window multiple. Windows without samples
/// for a unit are linearly interpolated between the nearest non-empty
/// windows; leading and trailing gaps copy the nearest value.
#[allow(clippy::needless_range_loop)]
pub fn resample_sync(streams: &[RawSensorStream], window: Duration) -> Result<SyncedStream> {
    if streams.is_empty() {
        return Err(Error::EmptyInput("no sensor streams"));
    }
    let w = window.as_micros() as i64;
    if w <= 0 {
        return Err(Error::invalid("window", "must be positive"));
    }
    for s in streams {
        if s.samples.is_empty() {
            return Err(Error::EmptyStream {
                unit_id: s.unit_id.clone(),
            });
        }
    }
    let first = streams
        .iter()
        .map(|s| s.samples[0].timestamp_us)
        .min()
        .unwrap();
    let last = streams
        .iter()
        .map(|s| s.samples.last().unwrap().timestamp_us)
        .max()
        .unwrap();
    let epoch = first.div_euclid(w) * w;
    let n_rows = ((last - epoch) / w + 1) as usize;

    let n_units = streams.len();
    let mut data = Matrix::zeros(n_rows, 3 * n_units);
    let mut sums = vec![[0.0f64; 3]; n_rows];
    let mut counts = vec![0usize; n_rows];
    for (u, s) in streams.iter().enumerate() {
        sums.iter_mut().for_each(|v| *v = [0.0; 3]);
        counts.iter_mut().for_each(|c| *c = 0);
        for smp in &s.samples {
            let k = ((smp.timestamp_us - epoch) / w) as usize;
            sums[k][0] += smp.ax;
            sums[k][1] += smp.ay;
            sums[k][2] += smp.az;
            counts[k] += 1;
        }
        let filled: Vec<usize> = (0..n_rows).filter(|&k| counts[k] > 0).collect();
        for axis in 0..3 {
            let mean = |k: usize| sums[k][axis] / counts[k] as f64;
            for k in 0..n_rows {
                let v = if counts[k] > 0 {
                    mean(k)
                } else {
                    // index of first filled window after k
                    let pos = filled.partition_point(|&f| f < k);
                    match (pos.checked_sub(1).map(|p| filled[p]), filled.get(pos)) {
                        (Some(a), Some(&b)) => {
                            let t = (k - a) as f64 / (b - a) as f64;
                            mean(a) + t * (mean(b) - mean(a))
                        }
                        (Some(a), None) => mean(a),
                        (None, Some(&b)) => mean(b),
                        (None, None) => unreachable!("stream has samples"),
                    }
                };
                data.set(k, 3 * u + axis, v);
            }
        }
    }
    let units = streams.iter().map(|s| s.unit_id.clone()).collect();
    SyncedStream::new(1e6 / w as f64, units, data, epoch)
}

/// Euclidean norm of each unit's `(x, y, z)` triple at every timestep.
pub fn magnitude(stream: &SyncedStream) -> MagnitudeSeries {
    let n_units = stream.units.len();
    let mut data = Matrix::zeros(stream.n_samples(), n_units);
    for (r, row) in stream.data.iter_rows().enumerate() {
        for u in 0..n_units {
            let (x, y, z) = (row[3 * u], row[3 * u + 1], row[3 * u + 2]);
            data.set(r, u, (x * x + y * y + z * z).sqrt());
        }
    }
    MagnitudeSeries {
        rate_hz: stream.rate_hz,
        units: stream.units.clone(),
        data,
        start_s: stream.start_s(),
    }
}

/// Number of samples spanned by `window` at `rate_hz`, rejecting windows
/// shorter than one sample period.
pub fn window_samples(window: Duration, rate_hz: f64) -> Result<usize> {
    let exact = window.as_secs_f64() * rate_hz;
    if exact < 1.0 - 1e-9 {
        return Err(Error::invalid(
            "feature_window",
            format!(
                "{:?} is shorter than one sample period at {rate_hz} Hz",
                window
            ),
        ));
    }
    Ok(exact.round().max(1.0) as usize)
}

/// Means of each unit's magnitude over consecutive non-overlapping windows.
pub fn window_features(
    magnitudes: &MagnitudeSeries,
    window: Duration,
    partial: PartialWindow,
) -> Result<Vec<FeatureRow>> {
    if magnitudes.n_samples() == 0 {
        return Err(Error::EmptyInput("magnitude series"));
    }
    let ws = window_samples(window, magnitudes.rate_hz)?;
    let n = magnitudes.n_samples();
    let mut out = Vec::with_capacity(n / ws + 1);
    let mut start = 0;
    while start < n {
        let end = (start + ws).min(n);
        if end - start < ws && partial == PartialWindow::Drop {
            break;
        }
        out.push(FeatureRow {
            window_start_s: magnitudes.start_s + start as f64 / magnitudes.rate_hz,
            values: chunk_mean(&magnitudes.data, start, end),
        });
        start = end;
    }
    Ok(out)
}

pub(crate) fn chunk_mean(data: &Matrix, start: usize, end: usize) -> Vec<f64> {
    let mut acc = vec![0.0; data.cols()];
    for r in start..end {
        for (a, v) in acc.iter_mut().zip(data.row(r)) {
            *a += v;
        }
    }
    let len = (end - start) as f64;
    acc.iter_mut().for_each(|a| *a /= len);
    acc
}

/// Splits a recording's intervals into atomic (duration < T) and
/// decomposable (duration ≥ T) sets, preserving order.
pub fn segregate(
    recording: &Recording,
    threshold_s: f64,
) -> (Vec<LabeledInterval>, Vec<LabeledInterval>) {
    recording
        .intervals
        .iter()
        .cloned()
        .partition(|iv| iv.duration_s() < threshold_s)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn stream(unit: &str, ts: &[i64], v: f64) -> RawSensorStream {
        RawSensorStream::new(
            unit,
            ts.iter()
                .map(|&t| RawSample {
                    timestamp_us: t,
                    ax: v,
                    ay: v,
                    az: v,
                })
                .collect(),
        )
        .unwrap()
    }

    #[test]
    fn constant_stream_resamples_to_constant() {
        let ts: Vec<i64> = (0..250).map(|k| k * 8000).collect();
        let s = resample_sync(&[stream("a", &ts, 1.0)], Duration::from_millis(10)).unwrap();
        assert!(s.data.as_slice().iter().all(|&v| v == 1.0));
    }

    #[test]
    fn rate_125_to_100() {
        let ts: Vec<i64> = (0..1250).map(|k| k * 8000).collect();
        let s = resample_sync(&[stream("a", &ts, 0.5)], Duration::from_millis(10)).unwrap();
        assert_eq!(s.rate_hz, 100.0);
        assert_eq!(s.n_samples(), 1000);
    }

    #[test]
    fn empty_unit_is_named() {
        let a = stream("wrist", &[0, 10], 1.0);
        let b = RawSensorStream::new("ankle", vec![]).unwrap();
        let err = resample_sync(&[a, b], Duration::from_millis(10)).unwrap_err();
        assert!(err.to_string().contains("ankle"));
        assert!(matches!(
            resample_sync(&[], Duration::from_millis(10)),
            Err(Error::EmptyInput(_))
        ));
    }

    #[test]
    fn gaps_are_interpolated() {
        // samples at windows 0 and 4 only; windows 1..3 interpolate
        let mut samples = vec![];
        for (t, v) in [(0, 0.0), (40_000, 4.0), (45_000, 4.0)] {
            samples.push(RawSample {
                timestamp_us: t,
                ax: v,
                ay: -v,
                az: 2.0 * v,
            });
        }
        let s = resample_sync(
            &[RawSensorStream::new("u", samples).unwrap()],
            Duration::from_millis(10),
        )
        .unwrap();
        let xs = s.data.col_values(0);
        assert_eq!(xs, vec![0.0, 1.0, 2.0, 3.0, 4.0]);
        assert_eq!(s.data.get(2, 2), 4.0);
    }

    #[test]
    fn leading_gap_copies_nearest() {
        let a = stream("a", &[0, 30_000], 2.0);
        let b = stream("b", &[20_000, 30_000], 7.0);
        let s = resample_sync(&[a, b], Duration::from_millis(10)).unwrap();
        assert_eq!(s.data.col_values(3), vec![7.0; 4]);
        assert_eq!(s.data.col_values(0), vec![2.0; 4]);
    }

    #[test]
    fn non_monotonic_rejected() {
        let samples = vec![
            RawSample {
                timestamp_us: 5,
                ax: 0.0,
                ay: 0.0,
                az: 0.0,
            },
            RawSample {
                timestamp_us: 5,
                ax: 0.0,
                ay: 0.0,
                az: 0.0,
            },
        ];
        assert!(RawSensorStream::new("u", samples).is_err());
    }

    #[test]
    fn magnitude_examples() {
        let data = Matrix::from_rows(&[[0.0, 0.0, 0.0], [3.0, 4.0, 0.0]]).unwrap();
        let s = SyncedStream::new(100.0, vec!["u".into()], data, 0).unwrap();
        assert_eq!(magnitude(&s).data.col_values(0), vec![0.0, 5.0]);
    }

    fn mags(n: usize, rate: f64, f: impl Fn(usize) -> f64) -> MagnitudeSeries {
        MagnitudeSeries {
            rate_hz: rate,
            units: vec!["u".into()],
            data: Matrix::column(&(0..n).map(f).collect::<Vec<_>>()),
            start_s: 0.0,
        }
    }

    #[test]
    fn window_counts_and_partial_policy() {
        let m = mags(250, 100.0, |_| 3.0);
        let w = Duration::from_secs(1);
        let rows = window_features(&m, w, PartialWindow::Drop).unwrap();
        assert_eq!(rows.len(), 2);
        assert!(rows.iter().all(|r| r.values == vec![3.0]));
        assert_eq!(rows[1].window_start_s, 1.0);
        let rows = window_features(&m, w, PartialWindow::KeepAsMean).unwrap();
        assert_eq!(rows.len(), 3);
    }

    #[test]
    fn window_shorter_than_period_rejected() {
        let m = mags(10, 100.0, |_| 1.0);
        assert!(window_features(&m, Duration::from_millis(5), PartialWindow::Drop).is_err());
    }

    #[test]
    fn segregate_by_threshold() {
        let data = Matrix::zeros(3000, 3);
        let s = SyncedStream::new(100.0, vec!["u".into()], data, 0).unwrap();
        let ivs = vec![
            LabeledInterval::new("a", 0.0, 4.0).unwrap(),
            LabeledInterval::new("b", 4.0, 13.0).unwrap(),
            LabeledInterval::new("c", 13.0, 25.0).unwrap(),
        ];
        let rec = Recording::new(s, ivs, "s1").unwrap();
        let (train, dec) = segregate(&rec, 10.0);
        assert_eq!(
            train.iter().map(|i| i.label.as_str()).collect::<Vec<_>>(),
            ["a", "b"]
        );
        assert_eq!(dec.len(), 1);
        assert_eq!(dec[0].label, "c");
        let (train, dec) = segregate(&rec, 100.0);
        assert_eq!(train.len(), 3);
        assert!(dec.is_empty());
    }

    #[test]
    fn recording_rejects_overlap_and_out_of_range() {
        let s = SyncedStream::new(100.0, vec!["u".into()], Matrix::zeros(1000, 3), 0).unwrap();
        let overlapping = vec![
            LabeledInterval::new("a", 0.0, 5.0).unwrap(),
            LabeledInterval::new("b", 4.0, 6.0).unwrap(),
        ];
        assert!(matches!(
            Recording::new(s.clone(), overlapping, "x"),
            Err(Error::OverlappingIntervals { .. })
        ));
        let outside = vec![LabeledInterval::new("a", 5.0, 12.0).unwrap()];
        assert!(matches!(
            Recording::new(s, outside, "x"),
            Err(Error::OutOfRange(_))
        ));
    }
}
