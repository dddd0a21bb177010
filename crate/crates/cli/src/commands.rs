use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use microact_core::changepoint::CpdAlgorithm;
use microact_core::embedding::{
    nearest_verbs, parse_attribute_string, post_query, render_query, PhraseMap, VerbCorpus,
};
use microact_core::ingest::{
    load_recording_with, write_labels_csv, write_raw_recording, write_synced_csv, Recording,
    RecordingFormat,
};
use microact_core::pipeline::{
    self, decompose_all, evaluate_cpd, evaluate_run, load_label_attributes, load_model,
    load_report_json, load_truth_csv, metrics_csv, report_csv, report_json, save_model,
    synth_generate, train_pipeline, PipelineConfig, SynthSpec, CONFIG_KEYS,
};
use microact_core::zeroshot::AttributeSchema;
use microact_core::Error;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Config(Error),
    #[error("{0}")]
    Core(#[from] Error),
    #[error("{0}")]
    Usage(String),
}

impl CliError {
    pub const USAGE_PREFIX: &'static str = "usage error";

    pub fn prefix(&self) -> &'static str {
        match self {
            CliError::Usage(_) => Self::USAGE_PREFIX,
            CliError::Config(_) => "config error",
            CliError::Core(Error::Io { source, .. })
                if source.kind() == std::io::ErrorKind::NotFound =>
            {
                "missing file"
            }
            CliError::Core(e) if e.is_validation() => "invalid input",
            CliError::Core(_) => "runtime error",
        }
    }

    /// 1 for validation problems, 2 for runtime failures.
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Usage(_) | CliError::Config(_) => 1,
            CliError::Core(e) if e.is_validation() => 1,
            CliError::Core(_) => 2,
        }
    }
}

type Result<T> = std::result::Result<T, CliError>;

/// Decomposes labeled inertial-sensor recordings into micro-activities.
#[derive(Debug, Parser)]
#[command(name = "microact", version)]
pub struct Cli {
    /// Flat key=value configuration file.
    #[arg(long, global = true, value_name = "FILE")]
    config: Option<PathBuf>,
    /// Override one configuration key (repeatable, applied in order).
    #[arg(long = "set", global = true, value_name = "KEY=VALUE")]
    set: Vec<String>,
    /// Worker threads (defaults to all cores).
    #[arg(long, global = true, value_name = "N")]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Synchronize a recording directory and write the resampled matrix.
    Resample(ResampleArgs),
    /// Generate a seeded synthetic benchmark.
    Synth(SynthArgs),
    /// Train the per-attribute model on atomic intervals.
    Train(TrainArgs),
    /// Segment long intervals and predict micro-activity attributes.
    Decompose(DecomposeArgs),
    /// Score a change-point detector on intervals of at least `threshold_s`.
    EvalCpd(EvalCpdArgs),
    /// Score a decomposition report against ground truth.
    EvalF1(EvalF1Args),
    /// Render an attribute vector as a natural-language query.
    Query(QueryArgs),
}

#[derive(Debug, Args)]
struct InputArgs {
    /// Recording directory (repeatable).
    #[arg(long = "input", required = true, value_name = "DIR")]
    inputs: Vec<PathBuf>,
    /// Directory layout: generic, kitchen or lara.
    #[arg(long, default_value = "generic")]
    format: String,
}

#[derive(Debug, Args)]
struct ResampleArgs {
    #[arg(long, value_name = "DIR")]
    input: PathBuf,
    #[arg(long, default_value = "generic")]
    format: String,
    /// Synchronized CSV output.
    #[arg(long, value_name = "FILE")]
    out: PathBuf,
    /// Also write the interval labels as CSV.
    #[arg(long, value_name = "FILE")]
    labels: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct SynthArgs {
    /// `demo` or a JSON spec file.
    #[arg(long, default_value = "demo")]
    spec: String,
    #[arg(long)]
    seed: Option<u64>,
    /// Noise multiplier (1 is the default profile, 0 is noiseless).
    #[arg(long)]
    noise: Option<f64>,
    #[arg(long, value_name = "DIR")]
    out: PathBuf,
}

#[derive(Debug, Args)]
struct TrainArgs {
    #[command(flatten)]
    input: InputArgs,
    /// CSV mapping atomic labels to attribute vectors.
    #[arg(long, value_name = "FILE")]
    labels: PathBuf,
    /// Model file to write.
    #[arg(long, value_name = "FILE")]
    model: PathBuf,
    /// Training report (JSON); printed to stdout when absent.
    #[arg(long, value_name = "FILE")]
    report: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct DecomposeArgs {
    #[command(flatten)]
    input: InputArgs,
    #[arg(long, value_name = "FILE")]
    model: PathBuf,
    /// Report CSV; printed to stdout when neither output is given.
    #[arg(long, value_name = "FILE")]
    csv: Option<PathBuf>,
    /// Report JSON.
    #[arg(long, value_name = "FILE")]
    json: Option<PathBuf>,
    /// Verb corpus CSV (defaults to the bundled corpus for the schema).
    #[arg(long, value_name = "FILE")]
    corpus: Option<PathBuf>,
    /// Skip nearest-verb lookup.
    #[arg(long)]
    no_verbs: bool,
}

#[derive(Debug, Args)]
struct EvalCpdArgs {
    #[command(flatten)]
    input: InputArgs,
    /// Ground-truth segmentation CSV.
    #[arg(long, value_name = "FILE")]
    truth: PathBuf,
    /// Detector; overrides `cpd_algorithm`.
    #[arg(long)]
    algo: Option<String>,
    #[arg(long, value_name = "FILE")]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct EvalF1Args {
    /// Decomposition report JSON.
    #[arg(long, value_name = "FILE")]
    report: PathBuf,
    #[arg(long, value_name = "FILE")]
    truth: PathBuf,
    /// Metrics CSV; printed to stdout when absent.
    #[arg(long, value_name = "FILE")]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct QueryArgs {
    /// Comma-separated attribute values.
    #[arg(long)]
    attrs: String,
    /// Macro-activity context phrase.
    #[arg(long, default_value = "")]
    context: String,
    /// Schema name or file; overrides `schema`.
    #[arg(long)]
    schema: Option<String>,
    /// Phrase map CSV (defaults to the built-in map for the schema).
    #[arg(long, value_name = "FILE")]
    phrases: Option<PathBuf>,
    /// Also list this many nearest verbs.
    #[arg(long, value_name = "K")]
    verbs: Option<usize>,
    #[arg(long, value_name = "FILE")]
    corpus: Option<PathBuf>,
    /// POST the query to this endpoint and print the response.
    #[arg(long, value_name = "URL")]
    post: Option<String>,
}

const ALL: &[&str] = &[];
const RESAMPLE_KEYS: &[&str] = &["resample_window_ms"];
const CPD_KEYS: &[&str] = &[
    "profile",
    "schema",
    "resample_window_ms",
    "threshold_s",
    "cpd_algorithm",
    "penalty",
    "alpha",
    "rulsif_window",
    "rulsif_step",
    "min_segment_length",
];
const F1_KEYS: &[&str] = &["profile", "schema"];
const QUERY_KEYS: &[&str] = &["profile", "schema", "distance"];

fn keys_help(keys: &[&str]) -> String {
    let mut s = String::from("Configuration keys (--config / --set):\n");
    for (k, d) in CONFIG_KEYS {
        if keys.is_empty() || keys.contains(k) {
            s.push_str(&format!("  {k:<20} {d}\n"));
        }
    }
    s
}

/// The clap command with per-subcommand key listings attached.
pub fn command() -> clap::Command {
    use clap::CommandFactory;
    Cli::command()
        .after_help(keys_help(ALL))
        .mut_subcommand("resample", |c| c.after_help(keys_help(RESAMPLE_KEYS)))
        .mut_subcommand("synth", |c| c.after_help("Consumes no configuration keys."))
        .mut_subcommand("train", |c| c.after_help(keys_help(ALL)))
        .mut_subcommand("decompose", |c| {
            c.after_help(keys_help(ALL) + "Unset keys come from the model's saved configuration.\n")
        })
        .mut_subcommand("eval-cpd", |c| c.after_help(keys_help(CPD_KEYS)))
        .mut_subcommand("eval-f1", |c| c.after_help(keys_help(F1_KEYS)))
        .mut_subcommand("query", |c| c.after_help(keys_help(QUERY_KEYS)))
}

fn overrides(cli: &Cli) -> Result<Vec<(String, String)>> {
    cli.set
        .iter()
        .map(|s| match s.split_once('=') {
            Some((k, v)) if !k.trim().is_empty() => {
                Ok((k.trim().to_string(), v.trim().to_string()))
            }
            _ => Err(CliError::Usage(format!(
                "--set expects KEY=VALUE, got `{s}`"
            ))),
        })
        .collect()
}

fn config(cli: &Cli, base: &[(String, String)]) -> Result<PipelineConfig> {
    PipelineConfig::load_over(base, cli.config.as_deref(), &overrides(cli)?)
        .map_err(CliError::Config)
}

fn format(name: &str) -> Result<RecordingFormat> {
    name.parse()
        .map_err(|_| CliError::Usage(format!("unknown --format `{name}`")))
}

fn load_inputs(input: &InputArgs, cfg: &PipelineConfig) -> Result<Vec<Recording>> {
    let fmt = format(&input.format)?;
    input
        .inputs
        .iter()
        .map(|d| Ok(load_recording_with(d, fmt, cfg.resample_window())?))
        .collect()
}

fn write_file(path: &Path, text: &str) -> Result<()> {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(parent).map_err(|e| Error::Io {
            op: "write",
            path: parent.to_path_buf(),
            source: e,
        })?;
    }
    fs::write(path, text).map_err(|e| {
        CliError::Core(Error::Io {
            op: "write",
            path: path.to_path_buf(),
            source: e,
        })
    })
}

fn stdout(text: &str) -> Result<()> {
    let mut out = std::io::stdout().lock();
    out.write_all(text.as_bytes())
        .and_then(|_| out.flush())
        .map_err(|e| {
            CliError::Core(Error::Io {
                op: "write",
                path: PathBuf::from("<stdout>"),
                source: e,
            })
        })
}

fn emit(path: Option<&Path>, text: &str) -> Result<()> {
    match path {
        Some(p) => write_file(p, text),
        None => stdout(text),
    }
}

pub fn run(cli: Cli) -> Result<()> {
    if let Some(n) = cli.threads {
        if n == 0 {
            return Err(CliError::Usage("--threads must be at least 1".into()));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| CliError::Usage(e.to_string()))?;
    }
    match &cli.command {
        Command::Resample(a) => resample(&cli, a),
        Command::Synth(a) => synth(a),
        Command::Train(a) => train(&cli, a),
        Command::Decompose(a) => decompose(&cli, a),
        Command::EvalCpd(a) => eval_cpd(&cli, a),
        Command::EvalF1(a) => eval_f1(&cli, a),
        Command::Query(a) => query(&cli, a),
    }
}

fn resample(cli: &Cli, a: &ResampleArgs) -> Result<()> {
    let cfg = config(cli, &[])?;
    let rec = load_recording_with(&a.input, format(&a.format)?, cfg.resample_window())?;
    write_synced_csv(&rec.stream, &a.out)?;
    if let Some(p) = &a.labels {
        write_labels_csv(&rec.intervals, p)?;
    }
    eprintln!(
        "resampled {} units to {} rows at {} Hz",
        rec.stream.units.len(),
        rec.stream.n_samples(),
        rec.stream.rate_hz
    );
    Ok(())
}

fn synth(a: &SynthArgs) -> Result<()> {
    let mut spec = match a.spec.as_str() {
        "demo" => SynthSpec::demo(a.seed.unwrap_or(0)),
        path => {
            let mut s = SynthSpec::load(path)?;
            if let Some(seed) = a.seed {
                s.seed = seed;
            }
            s
        }
    };
    if let Some(n) = a.noise {
        spec.noise_sigma = n;
    }
    let (rec, truth) = synth_generate(&spec)?;
    write_raw_recording(&rec, a.out.join("recording"))?;
    pipeline::write_truth_csv(&truth, a.out.join("truth.csv"))?;
    pipeline::write_label_attributes(
        &spec.schema,
        &spec.label_attributes(),
        a.out.join("label_attributes.csv"),
    )?;
    write_file(&a.out.join("spec.json"), &spec.to_json())?;
    eprintln!(
        "wrote {} intervals to {}",
        rec.intervals.len(),
        a.out.display()
    );
    Ok(())
}

fn train(cli: &Cli, a: &TrainArgs) -> Result<()> {
    let cfg = config(cli, &[])?;
    let schema = cfg.load_schema()?;
    let labels = load_label_attributes(&a.labels, &schema)?;
    let recs = load_inputs(&a.input, &cfg)?;
    let (model, report) = train_pipeline(&recs, &cfg, &labels)?;
    save_model(&model, &a.model)?;
    if !report.unmapped_labels.is_empty() {
        eprintln!(
            "skipped unmapped labels: {}",
            report.unmapped_labels.join(", ")
        );
    }
    eprintln!(
        "trained on {} windows; model written to {}",
        report.n_rows,
        a.model.display()
    );
    emit(a.report.as_deref(), &report.to_json())
}

fn decompose(cli: &Cli, a: &DecomposeArgs) -> Result<()> {
    let model = load_model(&a.model)?;
    let base: Vec<(String, String)> = model.config.clone().into_iter().collect();
    let cfg = config(cli, &base)?;
    if cfg.load_schema()?.hash() != model.schema.hash() {
        return Err(CliError::Config(Error::SchemaMismatch {
            expected: model.schema.hash(),
            found: cfg.load_schema()?.hash(),
        }));
    }
    let corpus = match (&a.corpus, a.no_verbs) {
        (_, true) => None,
        (Some(p), false) => Some(VerbCorpus::load(p, &model.schema)?),
        (None, false) => VerbCorpus::demo_for(&model.schema),
    };
    let recs = load_inputs(&a.input, &cfg)?;
    let reports = decompose_all(&model, &recs, &cfg, corpus.as_ref())?;
    if let Some(p) = &a.json {
        write_file(p, &(report_json(&reports)? + "\n"))?;
    }
    if a.csv.is_some() || a.json.is_none() {
        emit(a.csv.as_deref(), &report_csv(&reports))?;
    }
    eprintln!("decomposed {} intervals", reports.len());
    Ok(())
}

fn eval_cpd(cli: &Cli, a: &EvalCpdArgs) -> Result<()> {
    let mut overrides = Vec::new();
    if let Some(algo) = &a.algo {
        algo.parse::<CpdAlgorithm>()
            .map_err(|_| CliError::Usage(format!("unknown --algo `{algo}`")))?;
        overrides.push(("cpd_algorithm".to_string(), algo.clone()));
    }
    let mut cfg = config(cli, &[])?;
    for (k, v) in &overrides {
        cfg.set(k, v).map_err(CliError::Config)?;
    }
    let schema = cfg.load_schema()?;
    let truth = load_truth_csv(&a.truth, &schema)?;
    let recs = load_inputs(&a.input, &cfg)?;
    let mut rows = Vec::new();
    for r in &recs {
        rows.extend(evaluate_cpd(r, &truth, &cfg.cpd, cfg.threshold_s)?);
    }
    if rows.is_empty() {
        return Err(
            Error::IntervalMismatch("no truth intervals match the input subjects".into()).into(),
        );
    }
    emit(a.out.as_deref(), &pipeline::cpd_csv(&rows))
}

fn eval_f1(cli: &Cli, a: &EvalF1Args) -> Result<()> {
    let cfg = config(cli, &[])?;
    let schema = cfg.load_schema()?;
    let reports = load_report_json(&a.report)?;
    let truth = load_truth_csv(&a.truth, &schema)?;
    let metrics = evaluate_run(&schema, &reports, &truth)?;
    eprintln!(
        "pooled micro-F1 {:.4}, median micro-F1 {:.4}",
        metrics.micro_f1, metrics.median_micro_f1
    );
    emit(a.out.as_deref(), &metrics_csv(&metrics))
}

fn query(cli: &Cli, a: &QueryArgs) -> Result<()> {
    let mut cfg = config(cli, &[])?;
    if let Some(s) = &a.schema {
        cfg.schema = s.clone();
    }
    let schema: AttributeSchema = cfg.load_schema()?;
    let vector = parse_attribute_string(&schema, &a.attrs)?;
    let phrases = match &a.phrases {
        Some(p) => PhraseMap::load(p, &schema)?,
        None => PhraseMap::default_for(&schema),
    };
    let text = render_query(&vector, &a.context, &phrases)?;
    let mut out = format!("{text}\n");
    if let Some(k) = a.verbs {
        let corpus = match &a.corpus {
            Some(p) => VerbCorpus::load(p, &schema)?,
            None => VerbCorpus::demo_for(&schema).ok_or_else(|| {
                CliError::Usage("no bundled corpus for this schema; pass --corpus".into())
            })?,
        };
        for m in nearest_verbs(&corpus, &vector, k, cfg.distance)? {
            out.push_str(&format!(
                "{}\t{}\t{}\t{:.4}\n",
                m.rank, m.verb, m.template, m.distance
            ));
        }
    }
    if let Some(url) = &a.post {
        let reply = post_query(url, &text, true)?;
        out.push_str(&reply);
        if !reply.ends_with('\n') {
            out.push('\n');
        }
    }
    stdout(&out)
}
