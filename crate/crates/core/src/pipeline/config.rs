//! Flat `key=value` pipeline configuration with named profiles.

use std::collections::BTreeMap;
use std::path::Path;
use std::str::FromStr;
use std::time::Duration;

use serde::{Deserialize, Serialize};

use crate::changepoint::{CpdAlgorithm, CpdConfig};
use crate::dimreduce::{ReducerKind, ReducerSpec};
use crate::embedding::Distance;
use crate::error::{Error, Result};
use crate::ingest::PartialWindow;
use crate::zeroshot::{AttributeSchema, ClassifierSpec, ForestParams, SvmParams};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Profile {
    Kitchen,
    Lara,
    Custom,
}

impl FromStr for Profile {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "kitchen" => Ok(Profile::Kitchen),
            "lara" => Ok(Profile::Lara),
            "custom" => Ok(Profile::Custom),
            _ => Err(Error::Config {
                key: "profile".into(),
                message: format!("unknown profile `{s}` (kitchen, lara, custom)"),
            }),
        }
    }
}

impl std::fmt::Display for Profile {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Profile::Kitchen => "kitchen",
            Profile::Lara => "lara",
            Profile::Custom => "custom",
        })
    }
}

/// How reduced features are made comparable between training and prediction.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    /// One reducer fitted on all training windows, applied everywhere.
    #[default]
    Consistent,
    /// Per-label reducers in training, a fresh fit per interval at prediction.
    PaperFaithful,
}

impl FromStr for Mode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "consistent" => Ok(Mode::Consistent),
            "paper_faithful" | "paper-faithful" => Ok(Mode::PaperFaithful),
            _ => Err(Error::Config {
                key: "mode".into(),
                message: format!("unknown mode `{s}` (consistent, paper_faithful)"),
            }),
        }
    }
}

impl std::fmt::Display for Mode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Mode::Consistent => "consistent",
            Mode::PaperFaithful => "paper_faithful",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PipelineConfig {
    pub profile: Profile,
    /// `built-in name` (verb, lara) or schema file path.
    pub schema: String,
    pub threshold_s: f64,
    pub resample_window_ms: f64,
    pub feature_window_s: f64,
    pub partial_window: PartialWindow,
    pub reducer: ReducerSpec,
    /// Neighbor count for per-interval fits in paper-faithful mode.
    pub predict_neighbors: usize,
    pub classifier: ClassifierSpec,
    pub cpd: CpdConfig,
    pub top_k: usize,
    pub distance: Distance,
    pub mode: Mode,
    pub seed: u64,
}

/// Every accepted key with a one-line description.
pub const CONFIG_KEYS: &[(&str, &str)] = &[
    (
        "profile",
        "base preset: kitchen, lara or custom (applied before other keys)",
    ),
    (
        "schema",
        "attribute schema: verb, lara, or a schema file path",
    ),
    (
        "threshold_s",
        "intervals shorter than this (seconds) are atomic training data",
    ),
    (
        "resample_window_ms",
        "moving-window length for sensor synchronisation",
    ),
    (
        "feature_window_s",
        "window length of magnitude-mean features",
    ),
    (
        "partial_window",
        "trailing short feature window: drop or keep",
    ),
    (
        "reducer",
        "variance_linear (pca) or neighbor_manifold (umap)",
    ),
    ("target_dim", "reduced feature dimension d"),
    (
        "train_neighbors",
        "manifold neighbor count when fitting on training data",
    ),
    (
        "predict_neighbors",
        "manifold neighbor count for per-interval fits (paper_faithful)",
    ),
    ("classifier", "random_forest or svm_rbf"),
    ("rf_trees", "random forest: number of trees"),
    ("rf_max_depth", "random forest: maximum tree depth"),
    ("svm_c", "SVM: box constraint C"),
    (
        "svm_gamma",
        "SVM: RBF width, or auto for 1/(d * feature variance)",
    ),
    ("cpd_algorithm", "pelt, kernel or rulsif"),
    ("penalty", "change-point penalty per boundary"),
    ("alpha", "RuLSIF relative-divergence mixing weight"),
    ("rulsif_window", "RuLSIF window length in samples"),
    ("rulsif_step", "RuLSIF score stride in samples"),
    ("min_segment_length", "shortest segment in samples"),
    ("top_k", "verbs listed per segment"),
    ("distance", "verb matching metric: euclidean or cosine"),
    ("mode", "consistent or paper_faithful"),
    ("seed", "seed for classifiers and manifold fits"),
];

fn bad(key: &str, message: impl Into<String>) -> Error {
    Error::Config {
        key: key.to_string(),
        message: message.into(),
    }
}

fn num<T: FromStr>(key: &str, v: &str) -> Result<T> {
    v.parse()
        .map_err(|_| bad(key, format!("cannot parse `{v}` as a number")))
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self::profile(Profile::Kitchen)
    }
}

impl PipelineConfig {
    pub fn profile(profile: Profile) -> Self {
        let mut c = Self {
            profile,
            schema: "verb".into(),
            threshold_s: 10.0,
            resample_window_ms: 10.0,
            feature_window_s: 1.0,
            partial_window: PartialWindow::Drop,
            reducer: ReducerSpec::default(),
            predict_neighbors: 2,
            classifier: ClassifierSpec::RandomForest(ForestParams::default()),
            cpd: CpdConfig::default(),
            top_k: 5,
            distance: Distance::Euclidean,
            mode: Mode::Consistent,
            seed: 0,
        };
        if profile == Profile::Lara {
            c.schema = "lara".into();
            c.threshold_s = 15.0;
            c.cpd.penalty = 50.0;
            c.classifier = ClassifierSpec::SvmRbf(SvmParams::default());
        }
        c
    }

    pub fn feature_window(&self) -> Duration {
        Duration::from_secs_f64(self.feature_window_s)
    }

    pub fn resample_window(&self) -> Duration {
        Duration::from_secs_f64(self.resample_window_ms / 1000.0)
    }

    pub fn load_schema(&self) -> Result<AttributeSchema> {
        AttributeSchema::resolve(&self.schema)
    }

    /// Seeds derived for the reducer and the classifiers.
    pub fn reducer_spec(&self) -> ReducerSpec {
        ReducerSpec {
            seed: self.seed,
            ..self.reducer.clone()
        }
    }

    pub fn classifier_spec(&self) -> ClassifierSpec {
        match self.classifier {
            ClassifierSpec::RandomForest(p) => ClassifierSpec::RandomForest(ForestParams {
                seed: self.seed,
                ..p
            }),
            s => s,
        }
    }

    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let v = value.trim();
        match key {
            "profile" => {
                let p: Profile = v.parse()?;
                *self = Self::profile(p);
            }
            "schema" => {
                if v.is_empty() {
                    return Err(bad(key, "empty"));
                }
                self.schema = v.to_string();
            }
            "threshold_s" => self.threshold_s = num(key, v)?,
            "resample_window_ms" => self.resample_window_ms = num(key, v)?,
            "feature_window_s" => self.feature_window_s = num(key, v)?,
            "partial_window" => {
                self.partial_window = match v {
                    "drop" => PartialWindow::Drop,
                    "keep" => PartialWindow::KeepAsMean,
                    _ => return Err(bad(key, "expected drop or keep")),
                }
            }
            "reducer" => {
                self.reducer.kind = v
                    .parse::<ReducerKind>()
                    .map_err(|e| bad(key, e.to_string()))?
            }
            "target_dim" => self.reducer.target_dim = num(key, v)?,
            "train_neighbors" => self.reducer.n_neighbors = num(key, v)?,
            "predict_neighbors" => self.predict_neighbors = num(key, v)?,
            "classifier" => {
                self.classifier = match (v, self.classifier) {
                    ("random_forest", ClassifierSpec::RandomForest(p)) => {
                        ClassifierSpec::RandomForest(p)
                    }
                    ("random_forest", _) => ClassifierSpec::RandomForest(ForestParams::default()),
                    ("svm_rbf", ClassifierSpec::SvmRbf(p)) => ClassifierSpec::SvmRbf(p),
                    ("svm_rbf", _) => ClassifierSpec::SvmRbf(SvmParams::default()),
                    _ => return Err(bad(key, "expected random_forest or svm_rbf")),
                }
            }
            "rf_trees" | "rf_max_depth" => {
                let ClassifierSpec::RandomForest(p) = &mut self.classifier else {
                    return Err(bad(key, "only valid with classifier=random_forest"));
                };
                if key == "rf_trees" {
                    p.n_trees = num(key, v)?;
                } else {
                    p.max_depth = num(key, v)?;
                }
            }
            "svm_c" | "svm_gamma" => {
                let ClassifierSpec::SvmRbf(p) = &mut self.classifier else {
                    return Err(bad(key, "only valid with classifier=svm_rbf"));
                };
                if key == "svm_c" {
                    p.c = num(key, v)?;
                } else {
                    p.gamma = if v == "auto" {
                        None
                    } else {
                        Some(num(key, v)?)
                    };
                }
            }
            "cpd_algorithm" => {
                self.cpd.algorithm = v
                    .parse::<CpdAlgorithm>()
                    .map_err(|e| bad(key, e.to_string()))?
            }
            "penalty" => self.cpd.penalty = num(key, v)?,
            "alpha" => self.cpd.alpha = num(key, v)?,
            "rulsif_window" => self.cpd.rulsif_window = num(key, v)?,
            "rulsif_step" => self.cpd.rulsif_step = num(key, v)?,
            "min_segment_length" => self.cpd.min_segment_length = num(key, v)?,
            "top_k" => self.top_k = num(key, v)?,
            "distance" => self.distance = v.parse().map_err(|e: Error| bad(key, e.to_string()))?,
            "mode" => self.mode = v.parse()?,
            "seed" => self.seed = num(key, v)?,
            _ => return Err(bad(key, "unknown configuration key")),
        }
        Ok(())
    }

    /// Starts from the `profile` entry (kitchen if absent) and applies the
    /// remaining entries in order.
    pub fn from_pairs(pairs: &[(String, String)]) -> Result<Self> {
        let mut c = Self::default();
        if let Some((_, p)) = pairs.iter().rev().find(|(k, _)| k == "profile") {
            c.set("profile", p)?;
        }
        for (k, v) in pairs.iter().filter(|(k, _)| k != "profile") {
            c.set(k, v)?;
        }
        c.validate()?;
        Ok(c)
    }

    /// Parses `key=value` lines; `#` starts a comment line.
    pub fn parse_pairs(text: &str, origin: &Path) -> Result<Vec<(String, String)>> {
        let mut pairs = Vec::new();
        for (i, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let Some((k, v)) = line.split_once('=') else {
                return Err(Error::Parse {
                    path: origin.to_path_buf(),
                    line: i + 1,
                    message: "expected key=value".into(),
                });
            };
            pairs.push((k.trim().to_string(), v.trim().to_string()));
        }
        Ok(pairs)
    }

    /// Config file plus overrides (applied last, in order).
    pub fn load(path: Option<&Path>, overrides: &[(String, String)]) -> Result<Self> {
        Self::load_over(&[], path, overrides)
    }

    /// Layers `base`, the config file and `overrides`, in that order.
    /// Within a layer `profile` applies first; a layer naming a profile
    /// discards the layers before it.
    pub fn load_over(
        base: &[(String, String)],
        path: Option<&Path>,
        overrides: &[(String, String)],
    ) -> Result<Self> {
        let file = match path {
            Some(p) => {
                let text = std::fs::read_to_string(p).map_err(|e| Error::io("read", p, e))?;
                Self::parse_pairs(&text, p)?
            }
            None => Vec::new(),
        };
        let layers = [base, file.as_slice(), overrides];
        let first = layers
            .iter()
            .rposition(|l| l.iter().any(|(k, _)| k == "profile"))
            .unwrap_or(0);
        let mut profile = None;
        let mut rest = Vec::new();
        for layer in &layers[first..] {
            for (k, v) in layer.iter() {
                if k == "profile" {
                    profile = Some((k.clone(), v.clone()));
                } else {
                    rest.push((k.clone(), v.clone()));
                }
            }
        }
        let pairs: Vec<_> = profile.into_iter().chain(rest).collect();
        Self::from_pairs(&pairs)
    }

    pub fn validate(&self) -> Result<()> {
        let pos = |key: &str, v: f64| {
            if v > 0.0 && v.is_finite() {
                Ok(())
            } else {
                Err(bad(key, "must be a positive number"))
            }
        };
        pos("threshold_s", self.threshold_s)?;
        pos("resample_window_ms", self.resample_window_ms)?;
        pos("feature_window_s", self.feature_window_s)?;
        if self.top_k == 0 {
            return Err(bad("top_k", "must be >= 1"));
        }
        if self.predict_neighbors < 2 {
            return Err(bad("predict_neighbors", "must be >= 2"));
        }
        self.reducer.validate()?;
        self.classifier.validate()?;
        self.cpd.validate()?;
        Ok(())
    }

    /// Complete `key=value` listing, in `CONFIG_KEYS` order.
    pub fn to_pairs(&self) -> Vec<(String, String)> {
        let mut m: BTreeMap<&str, String> = BTreeMap::new();
        m.insert("profile", self.profile.to_string());
        m.insert("schema", self.schema.clone());
        m.insert("threshold_s", self.threshold_s.to_string());
        m.insert("resample_window_ms", self.resample_window_ms.to_string());
        m.insert("feature_window_s", self.feature_window_s.to_string());
        m.insert(
            "partial_window",
            match self.partial_window {
                PartialWindow::Drop => "drop",
                PartialWindow::KeepAsMean => "keep",
            }
            .into(),
        );
        m.insert(
            "reducer",
            match self.reducer.kind {
                ReducerKind::VarianceLinear => "variance_linear",
                ReducerKind::NeighborManifold => "neighbor_manifold",
            }
            .into(),
        );
        m.insert("target_dim", self.reducer.target_dim.to_string());
        m.insert("train_neighbors", self.reducer.n_neighbors.to_string());
        m.insert("predict_neighbors", self.predict_neighbors.to_string());
        match self.classifier {
            ClassifierSpec::RandomForest(p) => {
                m.insert("classifier", "random_forest".into());
                m.insert("rf_trees", p.n_trees.to_string());
                m.insert("rf_max_depth", p.max_depth.to_string());
            }
            ClassifierSpec::SvmRbf(p) => {
                m.insert("classifier", "svm_rbf".into());
                m.insert("svm_c", p.c.to_string());
                m.insert(
                    "svm_gamma",
                    p.gamma
                        .map_or_else(|| "auto".to_string(), |g| g.to_string()),
                );
            }
        }
        m.insert("cpd_algorithm", self.cpd.algorithm.to_string());
        m.insert("penalty", self.cpd.penalty.to_string());
        m.insert("alpha", self.cpd.alpha.to_string());
        m.insert("rulsif_window", self.cpd.rulsif_window.to_string());
        m.insert("rulsif_step", self.cpd.rulsif_step.to_string());
        m.insert(
            "min_segment_length",
            self.cpd.min_segment_length.to_string(),
        );
        m.insert("top_k", self.top_k.to_string());
        m.insert("distance", self.distance.to_string());
        m.insert("mode", self.mode.to_string());
        m.insert("seed", self.seed.to_string());
        CONFIG_KEYS
            .iter()
            .filter_map(|(k, _)| m.remove(k).map(|v| (k.to_string(), v)))
            .collect()
    }

    pub fn to_text(&self) -> String {
        self.to_pairs()
            .into_iter()
            .map(|(k, v)| format!("{k}={v}\n"))
            .collect()
    }
}
