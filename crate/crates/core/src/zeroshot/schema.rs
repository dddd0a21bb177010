//! Semantic attribute layouts and validated attribute vectors.

use std::collections::BTreeSet;
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum AttributeKind {
    Binary,
    Ordinal { levels: u8 },
}

impl AttributeKind {
    /// Number of admissible values.
    pub fn arity(self) -> u8 {
        match self {
            AttributeKind::Binary => 2,
            AttributeKind::Ordinal { levels } => levels,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Attribute {
    pub name: String,
    pub kind: AttributeKind,
    pub group: String,
}

/// Ordered attribute layout `l₁ … l_N`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AttributeSchema {
    attributes: Vec<Attribute>,
}

fn binary(name: &str, group: &str) -> Attribute {
    Attribute {
        name: name.into(),
        kind: AttributeKind::Binary,
        group: group.into(),
    }
}

fn ordinal(name: &str, levels: u8, group: &str) -> Attribute {
    Attribute {
        name: name.into(),
        kind: AttributeKind::Ordinal { levels },
        group: group.into(),
    }
}

/// Effect-on-arguments attributes of the verb layout, in order.
pub(crate) const VERB_EFFECTS: [&str; 18] = [
    "effect_moves_subject",
    "effect_moves_object_somewhere",
    "effect_moves_object",
    "effect_contacts_object",
    "effect_holds_object",
    "effect_opens",
    "effect_closes",
    "effect_changes_world",
    "effect_attaches",
    "effect_detaches",
    "effect_creates",
    "effect_destroys",
    "effect_changes_object_state",
    "effect_changes_temperature",
    "effect_changes_shape",
    "effect_changes_quantity",
    "effect_changes_subject_state",
    "effect_consumes",
];

pub(crate) const LARA_ATTRIBUTES: [(&str, &str); 18] = [
    ("gait_cycle", "legs"),
    ("step", "legs"),
    ("standing_still", "legs"),
    ("upwards", "upper_body"),
    ("centred", "upper_body"),
    ("downwards", "upper_body"),
    ("no_intentional_motion", "upper_body"),
    ("torso_rotation", "upper_body"),
    ("right", "handedness"),
    ("left", "handedness"),
    ("no_arms", "handedness"),
    ("bulky_unit", "item_pose"),
    ("handy_unit", "item_pose"),
    ("utility_aux", "item_pose"),
    ("cart", "item_pose"),
    ("computer", "item_pose"),
    ("no_item", "item_pose"),
    ("none", "none"),
];

impl AttributeSchema {
    pub fn new(attributes: Vec<Attribute>) -> Result<Self> {
        if attributes.is_empty() {
            return Err(Error::Schema("schema has no attributes".into()));
        }
        let mut seen = BTreeSet::new();
        for a in &attributes {
            if a.name.is_empty() || a.name.contains([',', '\n']) {
                return Err(Error::Schema(format!(
                    "invalid attribute name `{}`",
                    a.name
                )));
            }
            if !seen.insert(a.name.as_str()) {
                return Err(Error::Schema(format!("duplicate attribute `{}`", a.name)));
            }
            if a.kind.arity() < 2 {
                return Err(Error::Schema(format!(
                    "attribute `{}` needs at least 2 levels",
                    a.name
                )));
            }
        }
        Ok(Self { attributes })
    }

    /// 30-dimensional verb-attribute layout: transitivity (3 binary),
    /// aspect, motion, time, social (ordinal), body parts (5 binary) and
    /// effects on arguments (18 binary).
    pub fn verb() -> Self {
        let mut a = vec![
            binary("transitivity_intransitive", "transitivity"),
            binary("transitivity_someone", "transitivity"),
            binary("transitivity_something", "transitivity"),
            ordinal("aspect", 5, "aspect"),
            ordinal("motion", 5, "motion"),
            ordinal("time", 5, "time"),
            ordinal("social", 3, "social"),
            binary("body_arms", "body_parts"),
            binary("body_head", "body_parts"),
            binary("body_legs", "body_parts"),
            binary("body_torso", "body_parts"),
            binary("body_other", "body_parts"),
        ];
        a.extend(VERB_EFFECTS.iter().map(|n| binary(n, "effect")));
        Self::new(a).expect("built-in schema is valid")
    }

    /// The 18 binary motion attributes of the warehouse (LARa) annotation.
    pub fn lara() -> Self {
        Self::new(LARA_ATTRIBUTES.iter().map(|(n, g)| binary(n, g)).collect())
            .expect("built-in schema is valid")
    }

    /// Resolves `verb`, `lara`, or a schema file path.
    pub fn resolve(name_or_path: &str) -> Result<Self> {
        match name_or_path {
            "verb" => Ok(Self::verb()),
            "lara" => Ok(Self::lara()),
            path => Self::load(path),
        }
    }

    pub fn attributes(&self) -> &[Attribute] {
        &self.attributes
    }

    pub fn len(&self) -> usize {
        self.attributes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.attributes.is_empty()
    }

    pub fn index_of(&self, name: &str) -> Option<usize> {
        self.attributes.iter().position(|a| a.name == name)
    }

    pub fn is_all_binary(&self) -> bool {
        self.attributes
            .iter()
            .all(|a| a.kind == AttributeKind::Binary)
    }

    /// Canonical `name,kind,levels,group` text; the schema file format.
    pub fn to_csv_string(&self) -> String {
        let mut s = String::from("name,kind,levels,group\n");
        for a in &self.attributes {
            let (kind, levels) = match a.kind {
                AttributeKind::Binary => ("binary", 2),
                AttributeKind::Ordinal { levels } => ("ordinal", levels),
            };
            s += &format!("{},{kind},{levels},{}\n", a.name, a.group);
        }
        s
    }

    pub fn parse_csv(text: &str, origin: &Path) -> Result<Self> {
        let err = |line: usize, message: String| Error::Parse {
            path: origin.to_path_buf(),
            line,
            message,
        };
        let mut lines = text.lines().enumerate();
        match lines.next() {
            Some((_, h)) if h.trim() == "name,kind,levels,group" => {}
            _ => return Err(err(1, "expected header `name,kind,levels,group`".into())),
        }
        let mut attrs = Vec::new();
        for (i, line) in lines {
            if line.trim().is_empty() {
                continue;
            }
            let f: Vec<&str> = line.split(',').map(str::trim).collect();
            if f.len() != 4 {
                return Err(err(i + 1, format!("expected 4 fields, found {}", f.len())));
            }
            let levels: u8 = if f[2].is_empty() {
                2
            } else {
                f[2].parse()
                    .map_err(|_| err(i + 1, format!("bad level count `{}`", f[2])))?
            };
            let kind = match f[1] {
                "binary" if levels == 2 => AttributeKind::Binary,
                "binary" => return Err(err(i + 1, "binary attributes have 2 levels".into())),
                "ordinal" => AttributeKind::Ordinal { levels },
                other => return Err(err(i + 1, format!("unknown kind `{other}`"))),
            };
            attrs.push(Attribute {
                name: f[0].to_string(),
                kind,
                group: f[3].to_string(),
            });
        }
        Self::new(attrs).map_err(|e| err(1, e.to_string()))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io("read", path, e))?;
        Self::parse_csv(&text, path)
    }

    /// First 8 bytes (big-endian) of the SHA-256 of the canonical text.
    pub fn hash(&self) -> u64 {
        let digest = Sha256::digest(self.to_csv_string().as_bytes());
        u64::from_be_bytes(digest[..8].try_into().expect("8 bytes"))
    }
}

/// Attribute values `{l₁ … l_N}` valid under a schema.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct AttributeVector {
    values: Vec<u8>,
}

impl AttributeVector {
    pub fn new(schema: &AttributeSchema, values: Vec<u8>) -> Result<Self> {
        if values.len() != schema.len() {
            return Err(Error::AttributeCount {
                expected: schema.len(),
                found: values.len(),
            });
        }
        for (v, a) in values.iter().zip(schema.attributes()) {
            if *v >= a.kind.arity() {
                return Err(Error::AttributeValue {
                    attribute: a.name.clone(),
                    value: *v as i64,
                    arity: a.kind.arity(),
                });
            }
        }
        Ok(Self { values })
    }

    pub fn from_i64(schema: &AttributeSchema, values: &[i64]) -> Result<Self> {
        if values.len() != schema.len() {
            return Err(Error::AttributeCount {
                expected: schema.len(),
                found: values.len(),
            });
        }
        let mut out = Vec::with_capacity(values.len());
        for (&v, a) in values.iter().zip(schema.attributes()) {
            if v < 0 || v >= a.kind.arity() as i64 {
                return Err(Error::AttributeValue {
                    attribute: a.name.clone(),
                    value: v,
                    arity: a.kind.arity(),
                });
            }
            out.push(v as u8);
        }
        Ok(Self { values: out })
    }

    pub fn values(&self) -> &[u8] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn get(&self, i: usize) -> u8 {
        self.values[i]
    }

    /// Comma-separated integer form, e.g. `1,0,1,3`.
    pub fn to_csv(&self) -> String {
        self.values
            .iter()
            .map(u8::to_string)
            .collect::<Vec<_>>()
            .join(",")
    }

    /// True when every value is within its attribute's arity.
    pub fn is_valid_for(&self, schema: &AttributeSchema) -> bool {
        self.values.len() == schema.len()
            && self
                .values
                .iter()
                .zip(schema.attributes())
                .all(|(v, a)| *v < a.kind.arity())
    }
}
