//! Verb corpora, nearest-verb lookup and query rendering.

mod phrase;
mod post;

use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

pub use phrase::{render_query, PhraseMap};
pub use post::post_query;

use crate::error::{Error, Result};
use crate::zeroshot::{AttributeSchema, AttributeVector};

const DEMO_VERBS: &str = include_str!("../../data/demo_verbs.csv");
const DEMO_LARA: &str = include_str!("../../data/demo_lara.csv");

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct VerbEntry {
    pub verb: String,
    pub template: String,
    pub vector: AttributeVector,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerbCorpus {
    schema: AttributeSchema,
    entries: Vec<VerbEntry>,
}

impl VerbCorpus {
    pub fn new(schema: AttributeSchema, entries: Vec<VerbEntry>) -> Result<Self> {
        let mut seen = BTreeSet::new();
        for e in &entries {
            if !e.vector.is_valid_for(&schema) {
                AttributeVector::new(&schema, e.vector.values().to_vec())?;
            }
            if !seen.insert((e.verb.as_str(), e.template.as_str())) {
                return Err(Error::Schema(format!(
                    "duplicate corpus entry `{}` / `{}`",
                    e.verb, e.template
                )));
            }
        }
        Ok(Self { schema, entries })
    }

    /// Parses `verb,template,v1..vN` records under a header whose attribute
    /// names must equal the schema's, in order.
    pub fn parse(text: &str, schema: &AttributeSchema, origin: &Path) -> Result<Self> {
        let err = |line: usize, message: String| Error::Parse {
            path: origin.to_path_buf(),
            line,
            message,
        };
        let mut reader = csv::ReaderBuilder::new()
            .has_headers(true)
            .trim(csv::Trim::All)
            .from_reader(text.as_bytes());
        let header = reader.headers().map_err(|e| err(1, e.to_string()))?.clone();
        let names: Vec<&str> = header.iter().skip(2).collect();
        let expected: Vec<&str> = schema
            .attributes()
            .iter()
            .map(|a| a.name.as_str())
            .collect();
        if header.get(0) != Some("verb") || header.get(1) != Some("template") || names != expected {
            return Err(err(
                1,
                "header must be `verb,template,` followed by the schema's attribute names".into(),
            ));
        }
        let mut entries = Vec::new();
        for (i, rec) in reader.records().enumerate() {
            let line = i + 2;
            let rec = rec.map_err(|e| err(line, e.to_string()))?;
            let values = rec
                .iter()
                .skip(2)
                .map(|v| {
                    v.parse::<i64>()
                        .map_err(|_| err(line, format!("not an integer: `{v}`")))
                })
                .collect::<Result<Vec<_>>>()?;
            let vector =
                AttributeVector::from_i64(schema, &values).map_err(|e| err(line, e.to_string()))?;
            entries.push(VerbEntry {
                verb: rec[0].to_string(),
                template: rec[1].to_string(),
                vector,
            });
        }
        Self::new(schema.clone(), entries).map_err(|e| err(1, e.to_string()))
    }

    pub fn load(path: impl AsRef<Path>, schema: &AttributeSchema) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io("read", path, e))?;
        Self::parse(&text, schema, path)
    }

    /// Hand-filled demonstration corpus of kitchen verbs (verb schema).
    pub fn demo_kitchen() -> Self {
        Self::parse(
            DEMO_VERBS,
            &AttributeSchema::verb(),
            Path::new("demo_verbs.csv"),
        )
        .expect("bundled corpus is valid")
    }

    /// Demonstration corpus of warehouse activities (LARa schema).
    pub fn demo_lara() -> Self {
        Self::parse(
            DEMO_LARA,
            &AttributeSchema::lara(),
            Path::new("demo_lara.csv"),
        )
        .expect("bundled corpus is valid")
    }

    /// The bundled corpus for a built-in schema, if any.
    pub fn demo_for(schema: &AttributeSchema) -> Option<Self> {
        let h = schema.hash();
        if h == AttributeSchema::verb().hash() {
            Some(Self::demo_kitchen())
        } else if h == AttributeSchema::lara().hash() {
            Some(Self::demo_lara())
        } else {
            None
        }
    }

    pub fn schema(&self) -> &AttributeSchema {
        &self.schema
    }

    pub fn entries(&self) -> &[VerbEntry] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Distance {
    #[default]
    Euclidean,
    /// `1 − cos`; zero vectors are at distance 0 from each other and 1
    /// from anything else.
    Cosine,
}

impl FromStr for Distance {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "euclidean" => Ok(Distance::Euclidean),
            "cosine" => Ok(Distance::Cosine),
            _ => Err(Error::invalid("distance", format!("unknown metric `{s}`"))),
        }
    }
}

impl std::fmt::Display for Distance {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Distance::Euclidean => "euclidean",
            Distance::Cosine => "cosine",
        })
    }
}

impl Distance {
    pub fn between(self, a: &AttributeVector, b: &AttributeVector) -> f64 {
        let pairs = a
            .values()
            .iter()
            .zip(b.values())
            .map(|(&x, &y)| (x as f64, y as f64));
        match self {
            Distance::Euclidean => pairs.map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt(),
            Distance::Cosine => {
                let (mut dot, mut na, mut nb) = (0.0, 0.0, 0.0);
                for (x, y) in pairs {
                    dot += x * y;
                    na += x * x;
                    nb += y * y;
                }
                match (na == 0.0, nb == 0.0) {
                    (true, true) => 0.0,
                    (true, false) | (false, true) => 1.0,
                    _ => (1.0 - dot / (na.sqrt() * nb.sqrt())).max(0.0),
                }
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerbMatch {
    pub verb: String,
    pub template: String,
    pub distance: f64,
    pub rank: usize,
}

/// The `k` corpus entries closest to `query`; ties by verb, then template.
pub fn nearest_verbs(
    corpus: &VerbCorpus,
    query: &AttributeVector,
    k: usize,
    metric: Distance,
) -> Result<Vec<VerbMatch>> {
    if corpus.is_empty() {
        return Err(Error::EmptyInput("verb corpus"));
    }
    if k == 0 {
        return Err(Error::invalid("top_k", "must be >= 1"));
    }
    if !query.is_valid_for(corpus.schema()) {
        AttributeVector::new(corpus.schema(), query.values().to_vec())?;
    }
    let mut scored: Vec<(f64, &VerbEntry)> = corpus
        .entries()
        .iter()
        .map(|e| (metric.between(query, &e.vector), e))
        .collect();
    scored.sort_by(|a, b| {
        a.0.total_cmp(&b.0)
            .then_with(|| a.1.verb.cmp(&b.1.verb))
            .then_with(|| a.1.template.cmp(&b.1.template))
    });
    Ok(scored
        .into_iter()
        .take(k)
        .enumerate()
        .map(|(i, (distance, e))| VerbMatch {
            verb: e.verb.clone(),
            template: e.template.clone(),
            distance,
            rank: i + 1,
        })
        .collect())
}

/// How often each `(verb, template)` appears in the top `k` over `queries`,
/// most frequent first. Entries never retrieved are listed with 0.
pub fn hub_scores(
    corpus: &VerbCorpus,
    queries: &[AttributeVector],
    k: usize,
    metric: Distance,
) -> Result<Vec<(String, String, usize)>> {
    let mut counts: BTreeMap<(String, String), usize> = corpus
        .entries()
        .iter()
        .map(|e| ((e.verb.clone(), e.template.clone()), 0))
        .collect();
    for q in queries {
        for m in nearest_verbs(corpus, q, k, metric)? {
            *counts.entry((m.verb, m.template)).or_default() += 1;
        }
    }
    let mut out: Vec<_> = counts.into_iter().map(|((v, t), c)| (v, t, c)).collect();
    out.sort_by(|a, b| b.2.cmp(&a.2).then_with(|| (&a.0, &a.1).cmp(&(&b.0, &b.1))));
    Ok(out)
}

/// Parses the comma-separated integer form, e.g. `1,0,1,3,3,1,2,1,...`.
pub fn parse_attribute_string(schema: &AttributeSchema, text: &str) -> Result<AttributeVector> {
    let values = text
        .split(',')
        .map(|t| {
            let t = t.trim();
            t.parse::<i64>()
                .map_err(|_| Error::invalid("attributes", format!("not an integer: `{t}`")))
        })
        .collect::<Result<Vec<_>>>()?;
    AttributeVector::from_i64(schema, &values)
}
