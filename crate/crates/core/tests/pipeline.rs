mod common;

use std::fs;
use std::path::Path;

use microact_core::embedding::VerbCorpus;
use microact_core::ingest::{
    load_recording, write_raw_recording, LabeledInterval, Recording, RecordingFormat,
};
use microact_core::pipeline::{
    decompose, decompose_all, evaluate_run, load_model, load_model_for, model_from_bytes,
    model_to_bytes, reports_as_truth, save_model, synth_generate, train_pipeline, Mode,
    PipelineConfig, SynthSpec, MAGIC,
};
use microact_core::zeroshot::AttributeSchema;
use microact_core::Error;

fn fast_config() -> PipelineConfig {
    let mut c = PipelineConfig::default();
    c.set("rf_trees", "20").unwrap();
    c
}

fn trained(
    seed: u64,
    cfg: &PipelineConfig,
) -> (
    Recording,
    Vec<microact_core::pipeline::IntervalTruth>,
    microact_core::zeroshot::ZeroShotModel,
) {
    let spec = SynthSpec::demo(seed);
    let (rec, truth) = synth_generate(&spec).unwrap();
    let (model, report) =
        train_pipeline(std::slice::from_ref(&rec), cfg, &spec.label_attributes()).unwrap();
    assert_eq!(report.windows_per_label.len(), spec.library.len());
    assert!(report.unmapped_labels.is_empty());
    (rec, truth, model)
}

#[test]
fn segments_tile_every_interval() {
    let cfg = fast_config();
    let (rec, _, model) = trained(1, &cfg);
    let reports = decompose_all(
        &model,
        std::slice::from_ref(&rec),
        &cfg,
        Some(&VerbCorpus::demo_kitchen()),
    )
    .unwrap();
    assert_eq!(reports.len(), 50);
    for r in &reports {
        assert_eq!(r.segments.first().unwrap().start_s, r.interval.start_s);
        assert_eq!(r.segments.last().unwrap().end_s, r.interval.end_s);
        assert!(r.segments.windows(2).all(|w| w[0].end_s == w[1].start_s));
        assert!(r
            .segments
            .iter()
            .all(|s| s.start_s < s.end_s && s.n_windows >= 1));
        assert!(r.segments.iter().all(|s| s.verb_matches.len() == cfg.top_k));
    }
}

#[test]
fn short_interval_is_one_flagged_segment() {
    let cfg = fast_config();
    let (rec, _, model) = trained(2, &cfg);
    let short = LabeledInterval::new("short", 1.0, 2.5).unwrap();
    let r = decompose(&model, &rec, &short, &cfg, None).unwrap();
    assert!(r.short_interval);
    assert_eq!(r.segments.len(), 1);
    assert_eq!((r.segments[0].start_s, r.segments[0].end_s), (1.0, 2.5));
}

#[test]
fn paper_faithful_mode_runs_and_keeps_label_reducers() {
    let mut cfg = fast_config();
    cfg.set("mode", "paper_faithful").unwrap();
    assert_eq!(cfg.mode, Mode::PaperFaithful);
    let (rec, truth, model) = trained(3, &cfg);
    assert_eq!(model.label_reducers.len(), 6);
    let reports = decompose_all(&model, std::slice::from_ref(&rec), &cfg, None).unwrap();
    let m = evaluate_run(&model.schema, &reports, &truth).unwrap();
    assert!((0.0..=1.0).contains(&m.micro_f1));
    assert_eq!(
        model.config.get("mode").map(String::as_str),
        Some("paper_faithful")
    );
}

#[test]
fn self_truth_scores_perfectly() {
    let cfg = fast_config();
    let (rec, _, model) = trained(4, &cfg);
    let reports = decompose_all(&model, std::slice::from_ref(&rec), &cfg, None).unwrap();
    let m = evaluate_run(&model.schema, &reports, &reports_as_truth(&reports)).unwrap();
    assert_eq!(m.micro_f1, 1.0);
    assert!(m.intervals.iter().all(|i| i.ae == 0));
}

#[test]
fn no_atomic_intervals_is_an_error() {
    let mut cfg = fast_config();
    cfg.set("threshold_s", "1").unwrap();
    let spec = SynthSpec::demo(0);
    let (rec, _) = synth_generate(&spec).unwrap();
    let err = train_pipeline(&[rec], &cfg, &spec.label_attributes()).unwrap_err();
    assert!(matches!(err, Error::NoAtomicActivities { .. }));
}

#[test]
fn unmapped_labels_are_reported() {
    let cfg = fast_config();
    let spec = SynthSpec::demo(0);
    let (rec, _) = synth_generate(&spec).unwrap();
    let mut labels = spec.label_attributes();
    labels.remove("walk");
    let (_, report) = train_pipeline(&[rec], &cfg, &labels).unwrap();
    assert_eq!(report.unmapped_labels, vec!["walk".to_string()]);
}

#[test]
fn model_file_errors() {
    let cfg = fast_config();
    let (_, _, model) = trained(5, &cfg);
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("m.amdc");
    save_model(&model, &path).unwrap();
    assert!(!dir.path().join("m.amdc.tmp").exists());
    assert_eq!(load_model(&path).unwrap(), model);
    assert_eq!(&fs::read(&path).unwrap()[..4], MAGIC);

    let mismatch = load_model_for(&path, &AttributeSchema::lara()).unwrap_err();
    assert!(matches!(mismatch, Error::SchemaMismatch { .. }));
    assert!(load_model_for(&path, &AttributeSchema::verb()).is_ok());

    let bytes = model_to_bytes(&model).unwrap();
    assert!(matches!(
        model_from_bytes(&bytes[..bytes.len() - 5]),
        Err(Error::ChecksumMismatch)
    ));
    let mut wrong_magic = bytes.clone();
    wrong_magic[0] = b'X';
    assert!(matches!(
        model_from_bytes(&wrong_magic),
        Err(Error::ModelFormat(_))
    ));
    let mut future = bytes.clone();
    future[4] = 9;
    let n = future.len();
    let digest = {
        use sha2::{Digest, Sha256};
        Sha256::digest(&future[..n - 32])
    };
    future[n - 32..].copy_from_slice(&digest);
    assert!(matches!(
        model_from_bytes(&future),
        Err(Error::VersionMismatch { found: 9, .. })
    ));
}

#[test]
fn written_recording_reloads_identically() {
    let spec = SynthSpec::demo(6);
    let (rec, _) = synth_generate(&spec).unwrap();
    let dir = tempfile::tempdir().unwrap();
    write_raw_recording(&rec, dir.path()).unwrap();
    let back = load_recording(dir.path(), RecordingFormat::Generic).unwrap();
    assert_eq!(back.intervals, rec.intervals);
    assert_eq!(back.stream.n_samples(), rec.stream.n_samples());
    let worst = back
        .stream
        .data
        .as_slice()
        .iter()
        .zip(rec.stream.data.as_slice())
        .map(|(a, b)| (a - b).abs())
        .fold(0.0, f64::max);
    assert!(worst < 1e-9, "{worst}");
}

fn fixture(name: &str) -> std::path::PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("tests/fixtures")
        .join(name)
}

fn copy_dir(src: &Path, dst: &Path) {
    fs::create_dir_all(dst).unwrap();
    for e in fs::read_dir(src).unwrap() {
        let p = e.unwrap().path();
        let target = dst.join(p.file_name().unwrap());
        if p.is_dir() {
            copy_dir(&p, &target);
        } else {
            fs::copy(&p, &target).unwrap();
        }
    }
}

#[test]
fn kitchen_fixture_labels_keep_multiword_names() {
    let rec = load_recording(fixture("kitchen_excerpt"), RecordingFormat::Kitchen).unwrap();
    let labels: Vec<&str> = rec.intervals.iter().map(|i| i.label.as_str()).collect();
    assert_eq!(labels, ["take baking pan", "crack egg", "put pan on stove"]);
    assert_eq!(rec.stream.rate_hz, 100.0);
}

#[test]
fn adapter_errors_name_file_and_line() {
    let dir = tempfile::tempdir().unwrap();
    copy_dir(&fixture("kitchen_excerpt"), dir.path());
    let imu = dir.path().join("imu/left_wrist.txt");
    let mut text = fs::read_to_string(&imu).unwrap();
    text.push_str("100 0.1 0.2 0.3\n");
    fs::write(&imu, text).unwrap();
    let err = load_recording(dir.path(), RecordingFormat::Kitchen).unwrap_err();
    assert!(err.to_string().contains("left_wrist"), "{err}");

    let dir = tempfile::tempdir().unwrap();
    copy_dir(&fixture("lara_excerpt"), dir.path());
    let data = dir.path().join("data.csv");
    let text = fs::read_to_string(&data)
        .unwrap()
        .replacen("0.01,", "0.01,abc", 1);
    fs::write(&data, text).unwrap();
    match load_recording(dir.path(), RecordingFormat::Lara).unwrap_err() {
        Error::Parse { line, .. } => assert_eq!(line, 3),
        other => panic!("{other}"),
    }
}
