use std::fs;
use std::path::Path;
use std::process::{Command, Output};

const EXAMPLE: &str = "1,0,1,3,3,1,2,1,0,0,0,0,0,0,0,0,0,0,0,1,0,0,0,0,1,0,0,0,0,0";

fn microact(args: &[&str], dir: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_microact"))
        .args(args)
        .current_dir(dir)
        .output()
        .expect("binary runs")
}

fn ok(args: &[&str], dir: &Path) -> String {
    let out = microact(args, dir);
    assert!(
        out.status.success(),
        "{args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

fn fail(args: &[&str], dir: &Path) -> (i32, String) {
    let out = microact(args, dir);
    (
        out.status.code().unwrap(),
        String::from_utf8(out.stderr).unwrap(),
    )
}

fn tree(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut files = Vec::new();
    for entry in fs::read_dir(dir).unwrap() {
        let p = entry.unwrap().path();
        if p.is_dir() {
            files.extend(tree(&p));
        } else {
            files.push((
                p.strip_prefix(dir).unwrap().display().to_string(),
                fs::read(&p).unwrap(),
            ));
        }
    }
    files.sort();
    files
}

#[test]
fn synth_is_byte_identical() {
    let tmp = tempfile::tempdir().unwrap();
    ok(
        &["synth", "--spec", "demo", "--seed", "7", "--out", "a"],
        tmp.path(),
    );
    ok(
        &["synth", "--spec", "demo", "--seed", "7", "--out", "b"],
        tmp.path(),
    );
    ok(
        &["synth", "--spec", "demo", "--seed", "8", "--out", "c"],
        tmp.path(),
    );
    let a = tree(&tmp.path().join("a"));
    assert_eq!(a.len(), 3 + 7);
    assert_eq!(a, tree(&tmp.path().join("b")));
    assert_ne!(a, tree(&tmp.path().join("c")));
}

#[test]
fn spec_file_round_trips_through_synth() {
    let tmp = tempfile::tempdir().unwrap();
    ok(&["synth", "--seed", "3", "--out", "a"], tmp.path());
    ok(
        &["synth", "--spec", "a/spec.json", "--out", "b"],
        tmp.path(),
    );
    assert_eq!(tree(&tmp.path().join("a")), tree(&tmp.path().join("b")));
}

fn pipeline_run(dir: &Path, extra: &[&str]) -> (String, Vec<u8>, String) {
    let mut train = vec![
        "train",
        "--input",
        "s/recording",
        "--labels",
        "s/label_attributes.csv",
        "--model",
        "m.amdc",
    ];
    train.extend_from_slice(extra);
    let report = ok(&train, dir);
    let mut dec = vec![
        "decompose",
        "--input",
        "s/recording",
        "--model",
        "m.amdc",
        "--json",
        "r.json",
        "--csv",
        "r.csv",
    ];
    dec.extend_from_slice(extra);
    ok(&dec, dir);
    let csv = fs::read_to_string(dir.join("r.csv")).unwrap();
    let model = fs::read(dir.join("m.amdc")).unwrap();
    assert!(report.contains("\"n_rows\""));
    (csv, model, fs::read_to_string(dir.join("r.json")).unwrap())
}

#[test]
fn train_decompose_evaluate() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path();
    ok(&["synth", "--seed", "7", "--out", "s"], dir);
    let first = pipeline_run(dir, &[]);
    let second = pipeline_run(dir, &["--threads", "1"]);
    assert_eq!(first, second);
    assert_eq!(&first.1[..4], b"AMDC");

    let header = first.0.lines().next().unwrap();
    assert_eq!(
        header,
        "subject,macro_label,seg_start_s,seg_end_s,attr_csv,top_verbs"
    );

    let metrics = ok(
        &["eval-f1", "--report", "r.json", "--truth", "s/truth.csv"],
        dir,
    );
    let last = metrics.lines().last().unwrap();
    let f1: f64 = last.rsplit(',').next().unwrap().parse().unwrap();
    assert!(f1 > 0.75, "{last}");
}

fn median(mut v: Vec<f64>) -> f64 {
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

#[test]
fn eval_cpd_median_mae_below_one_second() {
    let tmp = tempfile::tempdir().unwrap();
    ok(&["synth", "--seed", "11", "--out", "s"], tmp.path());
    let csv = ok(
        &[
            "eval-cpd",
            "--input",
            "s/recording",
            "--truth",
            "s/truth.csv",
            "--algo",
            "pelt",
        ],
        tmp.path(),
    );
    let mut lines = csv.lines();
    assert_eq!(lines.next(), Some("subject,interval_id,algorithm,AE,MAE_s"));
    let maes: Vec<f64> = lines
        .map(|l| l.rsplit(',').next().unwrap().parse().unwrap())
        .collect();
    assert_eq!(maes.len(), 50);
    assert!(median(maes) < 1.0);
}

#[test]
fn query_contains_expected_fragments() {
    let tmp = tempfile::tempdir().unwrap();
    let out = ok(
        &[
            "query",
            "--attrs",
            EXAMPLE,
            "--context",
            "preparing a drink",
        ],
        tmp.path(),
    );
    assert!(out.contains("requires medium motion"));
    assert!(out.contains("requires time in order of seconds"));
    assert!(out.contains("which is done while preparing a drink"));
    assert_eq!(
        out,
        ok(
            &[
                "query",
                "--attrs",
                EXAMPLE,
                "--context",
                "preparing a drink"
            ],
            tmp.path()
        )
    );

    let verbs = ok(&["query", "--attrs", EXAMPLE, "--verbs", "2"], tmp.path());
    assert_eq!(
        verbs.lines().nth(1).unwrap().split('\t').nth(1),
        Some("pour")
    );
}

#[test]
fn error_classes_have_distinct_prefixes_and_codes() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path();

    let (code, err) = fail(&["query", "--nope"], dir);
    assert_eq!(code, 1);
    assert!(err.starts_with("usage error:"), "{err}");

    let (code, err) = fail(
        &["eval-f1", "--report", "missing.json", "--truth", "t.csv"],
        dir,
    );
    assert_eq!(code, 1);
    assert!(err.starts_with("missing file:"), "{err}");

    fs::write(dir.join("bad.cfg"), "penalty\n").unwrap();
    let (code, err) = fail(&["--config", "bad.cfg", "query", "--attrs", EXAMPLE], dir);
    assert_eq!(code, 1);
    assert!(err.starts_with("config error:"), "{err}");

    let (code, err) = fail(
        &["--set", "no_such_key=1", "query", "--attrs", EXAMPLE],
        dir,
    );
    assert_eq!(code, 1);
    assert!(err.starts_with("config error:"), "{err}");

    let (code, err) = fail(&["query", "--attrs", "1,2"], dir);
    assert_eq!(code, 1);
    assert!(err.starts_with("invalid input:"), "{err}");
}

#[test]
fn help_lists_consumed_keys() {
    let tmp = tempfile::tempdir().unwrap();
    let cases: &[(&str, &[&str])] = &[
        ("resample", &["resample_window_ms"]),
        (
            "train",
            &[
                "threshold_s",
                "reducer",
                "rf_trees",
                "svm_gamma",
                "mode",
                "seed",
                "train_neighbors",
            ],
        ),
        (
            "decompose",
            &[
                "cpd_algorithm",
                "penalty",
                "top_k",
                "distance",
                "predict_neighbors",
                "mode",
            ],
        ),
        (
            "eval-cpd",
            &[
                "cpd_algorithm",
                "penalty",
                "alpha",
                "rulsif_window",
                "rulsif_step",
                "min_segment_length",
            ],
        ),
        ("eval-f1", &["schema"]),
        ("query", &["schema", "distance"]),
    ];
    for (cmd, keys) in cases {
        let help = ok(&[cmd, "--help"], tmp.path());
        for k in *keys {
            assert!(help.contains(k), "`{cmd} --help` lacks {k}");
        }
    }
}
