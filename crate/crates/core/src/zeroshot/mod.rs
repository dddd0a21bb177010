//! Per-attribute classifiers composing the zero-shot model.

mod forest;
mod schema;
mod svm;

use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

pub use forest::{DecisionTree, ForestParams, RandomForest};
pub use schema::{Attribute, AttributeKind, AttributeSchema, AttributeVector};
pub use svm::{default_gamma, BinarySvm, SvmModel, SvmParams, KKT_TOLERANCE};

pub(crate) use forest::mix;

use crate::dimreduce::FittedReducer;
use crate::error::{Error, Result};
use crate::matrix::Matrix;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ClassifierSpec {
    RandomForest(ForestParams),
    SvmRbf(SvmParams),
}

impl ClassifierSpec {
    pub fn validate(&self) -> Result<()> {
        match self {
            ClassifierSpec::RandomForest(p) => {
                if p.n_trees == 0 {
                    return Err(Error::invalid("rf_trees", "must be >= 1"));
                }
                if p.max_depth == 0 {
                    return Err(Error::invalid("rf_max_depth", "must be >= 1"));
                }
            }
            ClassifierSpec::SvmRbf(p) => {
                if !(p.c > 0.0 && p.c.is_finite()) {
                    return Err(Error::invalid("svm_c", "must be > 0"));
                }
                if let Some(g) = p.gamma {
                    if !(g > 0.0 && g.is_finite()) {
                        return Err(Error::invalid("svm_gamma", "must be > 0"));
                    }
                }
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Classifier {
    /// Only one value was seen in training.
    Constant(u8),
    Forest(RandomForest),
    Svm(SvmModel),
}

impl Classifier {
    pub fn predict(&self, row: &[f64]) -> u8 {
        match self {
            Classifier::Constant(c) => *c,
            Classifier::Forest(f) => f.predict(row),
            Classifier::Svm(s) => s.predict(row),
        }
    }

    pub fn is_constant(&self) -> bool {
        matches!(self, Classifier::Constant(_))
    }
}

fn check_training(x: &Matrix, targets: &[u8]) -> Result<Option<u8>> {
    if x.rows() == 0 {
        return Err(Error::EmptyInput("training features"));
    }
    if targets.len() != x.rows() {
        return Err(Error::DimensionMismatch {
            expected: x.rows(),
            found: targets.len(),
        });
    }
    if !x.all_finite() {
        return Err(Error::NonFinite("training features".into()));
    }
    let first = targets[0];
    Ok(targets.iter().all(|&t| t == first).then_some(first))
}

pub fn rf_train(params: &ForestParams, x: &Matrix, targets: &[u8]) -> Result<Classifier> {
    ClassifierSpec::RandomForest(*params).validate()?;
    if let Some(c) = check_training(x, targets)? {
        return Ok(Classifier::Constant(c));
    }
    let n_classes = *targets.iter().max().expect("non-empty") as usize + 1;
    Ok(Classifier::Forest(RandomForest::train(
        params, x, targets, n_classes,
    )))
}

pub fn svm_train(params: &SvmParams, x: &Matrix, targets: &[u8]) -> Result<Classifier> {
    ClassifierSpec::SvmRbf(*params).validate()?;
    if let Some(c) = check_training(x, targets)? {
        return Ok(Classifier::Constant(c));
    }
    Ok(Classifier::Svm(SvmModel::train(params, x, targets)?))
}

/// The trained model: reducer plus one classifier per attribute.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ZeroShotModel {
    pub schema: AttributeSchema,
    pub classifiers: Vec<Classifier>,
    pub reducer: FittedReducer,
    /// Per-label reducers kept in paper-faithful mode; empty otherwise.
    pub label_reducers: BTreeMap<String, FittedReducer>,
    pub config: BTreeMap<String, String>,
}

impl ZeroShotModel {
    /// Indices of attributes that were constant in training.
    pub fn constant_attributes(&self) -> Vec<usize> {
        (0..self.classifiers.len())
            .filter(|&j| self.classifiers[j].is_constant())
            .collect()
    }

    pub fn feature_dim(&self) -> usize {
        self.reducer.target_dim()
    }
}

/// Fits classifier j on `(features, attributes[·][j])`, attributes in
/// parallel. Each attribute's seed is derived from the spec seed and `j`.
pub fn train_zeroshot(
    schema: &AttributeSchema,
    features: &Matrix,
    attributes: &[AttributeVector],
    spec: &ClassifierSpec,
    reducer: FittedReducer,
) -> Result<ZeroShotModel> {
    spec.validate()?;
    if features.rows() == 0 {
        return Err(Error::EmptyInput("training features"));
    }
    if attributes.len() != features.rows() {
        return Err(Error::DimensionMismatch {
            expected: features.rows(),
            found: attributes.len(),
        });
    }
    if features.cols() != reducer.target_dim() {
        return Err(Error::DimensionMismatch {
            expected: reducer.target_dim(),
            found: features.cols(),
        });
    }
    if let Some(bad) = attributes.iter().find(|a| !a.is_valid_for(schema)) {
        AttributeVector::new(schema, bad.values().to_vec())?;
    }
    let classifiers = (0..schema.len())
        .into_par_iter()
        .map(|j| {
            let column: Vec<u8> = attributes.iter().map(|a| a.get(j)).collect();
            match spec {
                ClassifierSpec::RandomForest(p) => {
                    let p = ForestParams {
                        seed: mix(p.seed, j as u64),
                        ..*p
                    };
                    rf_train(&p, features, &column)
                }
                ClassifierSpec::SvmRbf(p) => svm_train(p, features, &column),
            }
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(ZeroShotModel {
        schema: schema.clone(),
        classifiers,
        reducer,
        label_reducers: BTreeMap::new(),
        config: BTreeMap::new(),
    })
}

/// Queries every attribute classifier on a reduced feature row.
pub fn predict_attributes(model: &ZeroShotModel, row: &[f64]) -> Result<AttributeVector> {
    let d = model.feature_dim();
    if row.len() != d {
        return Err(Error::DimensionMismatch {
            expected: d,
            found: row.len(),
        });
    }
    if row.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("feature row".into()));
    }
    let values = model.classifiers.iter().map(|c| c.predict(row)).collect();
    AttributeVector::new(&model.schema, values)
}

/// Pooled one-vs-rest confusion counts over all attribute decisions.
/// Binary attributes count the positive class (value 1) only; ordinal
/// attributes count every level.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct Confusion {
    pub tp: u64,
    pub fp: u64,
    pub fn_: u64,
}

impl Confusion {
    /// F1 = 2TP / (2TP + FP + FN); 1.0 when there is nothing to find.
    pub fn f1(&self) -> f64 {
        let den = 2 * self.tp + self.fp + self.fn_;
        if den == 0 {
            1.0
        } else {
            (2 * self.tp) as f64 / den as f64
        }
    }
}

pub fn confusion(
    schema: &AttributeSchema,
    predicted: &[AttributeVector],
    truth: &[AttributeVector],
) -> Result<Confusion> {
    if predicted.is_empty() {
        return Err(Error::EmptyInput("attribute vectors"));
    }
    if predicted.len() != truth.len() {
        return Err(Error::DimensionMismatch {
            expected: truth.len(),
            found: predicted.len(),
        });
    }
    let mut c = Confusion::default();
    for (p, t) in predicted.iter().zip(truth) {
        for v in [p, t] {
            if !v.is_valid_for(schema) {
                AttributeVector::new(schema, v.values().to_vec())?;
            }
        }
        for (j, a) in schema.attributes().iter().enumerate() {
            let (pv, tv) = (p.get(j), t.get(j));
            match a.kind {
                AttributeKind::Binary => match (pv, tv) {
                    (1, 1) => c.tp += 1,
                    (1, 0) => c.fp += 1,
                    (0, 1) => c.fn_ += 1,
                    _ => {}
                },
                AttributeKind::Ordinal { .. } => {
                    if pv == tv {
                        c.tp += 1;
                    } else {
                        c.fp += 1;
                        c.fn_ += 1;
                    }
                }
            }
        }
    }
    Ok(c)
}

pub fn micro_f1(
    schema: &AttributeSchema,
    predicted: &[AttributeVector],
    truth: &[AttributeVector],
) -> Result<f64> {
    Ok(confusion(schema, predicted, truth)?.f1())
}
