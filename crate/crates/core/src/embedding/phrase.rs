//! Attribute-value phrases and natural-language query rendering.

use std::collections::BTreeSet;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::zeroshot::{AttributeKind, AttributeSchema, AttributeVector};

/// A fragment for every `(attribute, value)` of a schema, plus the query
/// preamble and the clause introducing the macro context.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PhraseMap {
    schema: AttributeSchema,
    preamble: String,
    context_clause: String,
    /// `fragments[j][v]`.
    fragments: Vec<Vec<String>>,
}

fn pair(yes: &str, no: &str) -> Vec<String> {
    vec![no.to_string(), yes.to_string()]
}

fn verb_fragments() -> Vec<Vec<String>> {
    let mut f = vec![
        pair("is intransitive", "is not intransitive"),
        pair(
            "can be used in the form of someone",
            "cannot be used in the form of someone",
        ),
        pair(
            "can be used in the form of something",
            "cannot be used in the form of something",
        ),
        [
            "shows a state",
            "shows an activity",
            "shows accomplishment",
            "shows achievement",
            "shows no specific aspect",
        ]
        .map(String::from)
        .to_vec(),
        [
            "requires no motion",
            "requires very low motion",
            "requires low motion",
            "requires medium motion",
            "requires high motion",
        ]
        .map(String::from)
        .to_vec(),
        [
            "is instantaneous",
            "requires time in order of seconds",
            "requires time in order of minutes",
            "requires time in order of hours",
            "requires time in order of days",
        ]
        .map(String::from)
        .to_vec(),
        [
            "is performed socially",
            "is performed either alone or socially",
            "is performed in solitary",
        ]
        .map(String::from)
        .to_vec(),
        pair(
            "requires arms to be used for the action",
            "does not require the arms",
        ),
        pair("requires the head", "does not require the head"),
        pair("requires the legs", "does not require the legs"),
        pair("requires the torso", "does not require the torso"),
        pair(
            "requires other body parts",
            "does not require other body parts",
        ),
    ];
    let effects = [
        ("moves the subject somewhere", "does not move the subject"),
        (
            "moves the object somewhere",
            "does not move the object somewhere",
        ),
        ("moves the object", "does not move the object"),
        (
            "makes contact with the object",
            "makes no contact with the object",
        ),
        ("holds the object", "does not hold the object"),
        ("opens something", "does not open anything"),
        ("closes something", "does not close anything"),
        (
            "changes the external world",
            "does not change the external world",
        ),
        ("attaches things together", "does not attach things"),
        ("separates things", "does not separate things"),
        ("creates something", "does not create anything"),
        ("destroys something", "does not destroy anything"),
        (
            "changes the state of the object",
            "does not change the state of the object",
        ),
        (
            "changes the temperature of the object",
            "does not change the temperature of the object",
        ),
        (
            "changes the shape of the object",
            "does not change the shape of the object",
        ),
        (
            "changes the quantity of the object",
            "does not change the quantity of the object",
        ),
        (
            "changes the state of the subject",
            "does not change the state of the subject",
        ),
        ("consumes the object", "does not consume the object"),
    ];
    f.extend(effects.iter().map(|(y, n)| pair(y, n)));
    f
}

fn lara_fragments() -> Vec<Vec<String>> {
    [
        ("involves a gait cycle", "involves no gait cycle"),
        ("involves a step", "involves no step"),
        ("involves standing still", "does not involve standing still"),
        ("moves the hands upwards", "does not move the hands upwards"),
        ("keeps the hands centred", "does not keep the hands centred"),
        (
            "moves the hands downwards",
            "does not move the hands downwards",
        ),
        (
            "involves no intentional motion of the upper body",
            "involves intentional motion of the upper body",
        ),
        ("rotates the torso", "does not rotate the torso"),
        ("uses the right hand", "does not use the right hand"),
        ("uses the left hand", "does not use the left hand"),
        ("uses no arms", "uses the arms"),
        ("handles a bulky unit", "does not handle a bulky unit"),
        ("handles a handy unit", "does not handle a handy unit"),
        (
            "uses utility auxiliaries",
            "does not use utility auxiliaries",
        ),
        ("uses a cart", "does not use a cart"),
        ("uses a computer", "does not use a computer"),
        ("handles no item", "handles an item"),
        ("is an irrelevant activity", "is a relevant activity"),
    ]
    .iter()
    .map(|(y, n)| pair(y, n))
    .collect()
}

impl PhraseMap {
    pub fn new(
        schema: AttributeSchema,
        preamble: String,
        context_clause: String,
        fragments: Vec<Vec<String>>,
    ) -> Result<Self> {
        if fragments.len() != schema.len() {
            return Err(Error::AttributeCount {
                expected: schema.len(),
                found: fragments.len(),
            });
        }
        for (a, f) in schema.attributes().iter().zip(&fragments) {
            if f.len() != a.kind.arity() as usize {
                return Err(Error::Schema(format!(
                    "attribute `{}` needs {} fragments, found {}",
                    a.name,
                    a.kind.arity(),
                    f.len()
                )));
            }
            if let Some(bad) = f.iter().find(|s| s.trim().is_empty() || s.contains(", ")) {
                return Err(Error::Schema(format!(
                    "attribute `{}`: fragment `{bad}` is empty or contains `, `",
                    a.name
                )));
            }
            let distinct: BTreeSet<&String> = f.iter().collect();
            if distinct.len() != f.len() {
                return Err(Error::Schema(format!(
                    "attribute `{}` has repeated fragments",
                    a.name
                )));
            }
        }
        Ok(Self {
            schema,
            preamble,
            context_clause,
            fragments,
        })
    }

    /// Shipped phrasing for the built-in schemas; other schemas get
    /// generic `has <name>` / `<name> is level v` fragments.
    pub fn default_for(schema: &AttributeSchema) -> Self {
        let h = schema.hash();
        let (preamble, fragments) = if h == AttributeSchema::verb().hash() {
            ("tell me a kitchen activity", verb_fragments())
        } else if h == AttributeSchema::lara().hash() {
            ("tell me a warehouse activity", lara_fragments())
        } else {
            let f = schema
                .attributes()
                .iter()
                .map(|a| match a.kind {
                    AttributeKind::Binary => pair(
                        &format!("has {}", a.name),
                        &format!("does not have {}", a.name),
                    ),
                    AttributeKind::Ordinal { levels } => (0..levels)
                        .map(|v| format!("{} is level {v}", a.name))
                        .collect(),
                })
                .collect();
            ("tell me an activity", f)
        };
        Self::new(
            schema.clone(),
            preamble.into(),
            "which is done while".into(),
            fragments,
        )
        .expect("default fragments are valid")
    }

    /// Reads `attribute,value,fragment` records over the defaults for
    /// `schema`. `@preamble,,text` and `@context,,text` set the fixed parts.
    pub fn parse(text: &str, schema: &AttributeSchema, origin: &Path) -> Result<Self> {
        let err = |line: usize, message: String| Error::Parse {
            path: origin.to_path_buf(),
            line,
            message,
        };
        let mut map = Self::default_for(schema);
        let mut reader = csv::ReaderBuilder::new()
            .has_headers(true)
            .trim(csv::Trim::All)
            .from_reader(text.as_bytes());
        let header = reader.headers().map_err(|e| err(1, e.to_string()))?;
        if header.iter().collect::<Vec<_>>() != ["attribute", "value", "fragment"] {
            return Err(err(1, "expected header `attribute,value,fragment`".into()));
        }
        for (i, rec) in reader.records().enumerate() {
            let line = i + 2;
            let rec = rec.map_err(|e| err(line, e.to_string()))?;
            if rec.len() != 3 {
                return Err(err(line, format!("expected 3 fields, found {}", rec.len())));
            }
            let fragment = rec[2].to_string();
            match &rec[0] {
                "@preamble" => map.preamble = fragment,
                "@context" => map.context_clause = fragment,
                name => {
                    let j = schema
                        .index_of(name)
                        .ok_or_else(|| err(line, format!("unknown attribute `{name}`")))?;
                    let v: usize = rec[1]
                        .parse()
                        .map_err(|_| err(line, format!("bad value `{}`", &rec[1])))?;
                    if v >= map.fragments[j].len() {
                        return Err(err(line, format!("value {v} out of range for `{name}`")));
                    }
                    map.fragments[j][v] = fragment;
                }
            }
        }
        Self::new(map.schema, map.preamble, map.context_clause, map.fragments)
            .map_err(|e| err(1, e.to_string()))
    }

    pub fn load(path: impl AsRef<Path>, schema: &AttributeSchema) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io("read", path, e))?;
        Self::parse(&text, schema, path)
    }

    pub fn schema(&self) -> &AttributeSchema {
        &self.schema
    }

    pub fn fragment(&self, attribute: usize, value: u8) -> &str {
        &self.fragments[attribute][value as usize]
    }
}

/// `<preamble> [<context clause> <context>] that <f₁>, <f₂>, …, <f_N>.`
pub fn render_query(
    vector: &AttributeVector,
    macro_context: &str,
    phrases: &PhraseMap,
) -> Result<String> {
    if !vector.is_valid_for(phrases.schema()) {
        AttributeVector::new(phrases.schema(), vector.values().to_vec())?;
    }
    let mut out = phrases.preamble.clone();
    let ctx = macro_context.trim();
    if !ctx.is_empty() {
        out.push(' ');
        out.push_str(&phrases.context_clause);
        out.push(' ');
        out.push_str(ctx);
    }
    out.push_str(" that ");
    let parts: Vec<&str> = vector
        .values()
        .iter()
        .enumerate()
        .map(|(j, &v)| phrases.fragment(j, v))
        .collect();
    out.push_str(&parts.join(", "));
    out.push('.');
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::embedding::parse_attribute_string;

    #[test]
    fn defaults_are_total() {
        for s in [AttributeSchema::verb(), AttributeSchema::lara()] {
            let p = PhraseMap::default_for(&s);
            for (j, a) in s.attributes().iter().enumerate() {
                for v in 0..a.kind.arity() {
                    assert!(!p.fragment(j, v).is_empty());
                }
            }
        }
    }

    #[test]
    fn renders_context_and_fragments() {
        let s = AttributeSchema::verb();
        let v = parse_attribute_string(
            &s,
            "1,0,1,3,3,1,2,1,0,0,0,0,0,0,0,0,0,0,0,1,0,0,0,0,1,0,0,0,0,0",
        )
        .unwrap();
        let q = render_query(&v, "stirring a bowl", &PhraseMap::default_for(&s)).unwrap();
        assert!(q.starts_with(
            "tell me a kitchen activity which is done while stirring a bowl that is intransitive, "
        ));
        assert!(q.contains("shows achievement, requires medium motion, requires time in order of seconds, is performed in solitary"));
        assert!(q.contains("changes the external world"));
        assert!(q.ends_with('.'));
    }

    #[test]
    fn file_overrides_apply() {
        let s = AttributeSchema::lara();
        let text = "attribute,value,fragment\n@preamble,,name a task\ncart,1,pushes a trolley\n";
        let p = PhraseMap::parse(text, &s, Path::new("p")).unwrap();
        let mut vals = vec![0u8; 18];
        vals[14] = 1;
        let q = render_query(&AttributeVector::new(&s, vals).unwrap(), "", &p).unwrap();
        assert!(q.starts_with("name a task that "));
        assert!(q.contains("pushes a trolley"));
        let bad = "attribute,value,fragment\ncart,2,x\n";
        assert!(PhraseMap::parse(bad, &s, Path::new("p")).is_err());
        let dup = "attribute,value,fragment\ncart,1,uses a cart\ncart,0,uses a cart\n";
        assert!(PhraseMap::parse(dup, &s, Path::new("p")).is_err());
    }
}
