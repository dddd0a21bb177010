//! Reduction of windowed per-unit magnitude features to `d` dimensions.

mod manifold;
mod pca;

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrix::Matrix;

pub use manifold::Manifold;
pub use pca::{covariance, symmetric_eigen, Pca};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ReducerKind {
    /// Principal components of the covariance.
    #[default]
    VarianceLinear,
    /// Fuzzy neighbor-graph embedding.
    NeighborManifold,
}

impl std::str::FromStr for ReducerKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "pca" | "variance_linear" => Ok(Self::VarianceLinear),
            "manifold" | "neighbor_manifold" | "umap" => Ok(Self::NeighborManifold),
            other => Err(Error::invalid("reducer", format!("unknown `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReducerSpec {
    pub kind: ReducerKind,
    pub target_dim: usize,
    /// Neighbor count of the manifold reducer; ignored by PCA.
    pub n_neighbors: usize,
    pub seed: u64,
}

impl Default for ReducerSpec {
    fn default() -> Self {
        Self {
            kind: ReducerKind::VarianceLinear,
            target_dim: 2,
            n_neighbors: 15,
            seed: 0,
        }
    }
}

impl ReducerSpec {
    pub fn validate(&self) -> Result<()> {
        if self.target_dim == 0 {
            return Err(Error::invalid("target_dim", "must be ≥ 1"));
        }
        if self.n_neighbors < 2 {
            return Err(Error::invalid("n_neighbors", "must be ≥ 2"));
        }
        Ok(())
    }

    /// Fewest rows a fit accepts.
    pub fn min_rows(&self) -> usize {
        self.target_dim + 1
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum ReducerState {
    Pca(Pca),
    Manifold(Manifold),
}

/// An immutable fitted reducer.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FittedReducer {
    pub spec: ReducerSpec,
    pub state: ReducerState,
    pub input_dim: usize,
}

/// Fits a reducer on `rows` (`m × p`, `m ≥ d + 1`, `p ≥ d`).
pub fn fit(spec: &ReducerSpec, rows: &Matrix) -> Result<FittedReducer> {
    spec.validate()?;
    if rows.cols() < spec.target_dim {
        return Err(Error::invalid(
            "target_dim",
            format!(
                "{} exceeds input dimension {}",
                spec.target_dim,
                rows.cols()
            ),
        ));
    }
    let state = match spec.kind {
        ReducerKind::VarianceLinear => ReducerState::Pca(Pca::fit(rows, spec.target_dim)?),
        ReducerKind::NeighborManifold => ReducerState::Manifold(Manifold::fit(
            rows,
            spec.target_dim,
            spec.n_neighbors,
            spec.seed,
        )?),
    };
    Ok(FittedReducer {
        spec: spec.clone(),
        state,
        input_dim: rows.cols(),
    })
}

impl FittedReducer {
    pub fn target_dim(&self) -> usize {
        self.spec.target_dim
    }

    /// True when a PCA fit found fewer than `d` directions with variance.
    pub fn rank_deficient(&self) -> bool {
        matches!(&self.state, ReducerState::Pca(p) if p.rank_deficient)
    }

    pub fn transform_row(&self, row: &[f64]) -> Result<Vec<f64>> {
        if row.len() != self.input_dim {
            return Err(Error::DimensionMismatch {
                expected: self.input_dim,
                found: row.len(),
            });
        }
        Ok(match &self.state {
            ReducerState::Pca(p) => p.transform_row(row),
            ReducerState::Manifold(m) => m.transform_row(row),
        })
    }

    pub fn transform(&self, rows: &Matrix) -> Result<Matrix> {
        if rows.cols() != self.input_dim {
            return Err(Error::DimensionMismatch {
                expected: self.input_dim,
                found: rows.cols(),
            });
        }
        let mut out = Matrix::zeros(rows.rows(), self.target_dim());
        for (i, r) in rows.iter_rows().enumerate() {
            out.row_mut(i).copy_from_slice(&self.transform_row(r)?);
        }
        Ok(out)
    }
}

/// Reducers fitted per label plus the features each label's own reducer produces.
#[derive(Debug, Clone, PartialEq)]
pub struct LabelWiseFit {
    pub reducers: BTreeMap<String, FittedReducer>,
    /// Fitted on every row; used for labels too small for their own fit.
    pub global: FittedReducer,
    pub pooled: Matrix,
    /// Source label of each pooled row.
    pub row_labels: Vec<String>,
    /// Labels that fell back to the global reducer.
    pub fallback: Vec<String>,
}

/// Fits one reducer per label group and transforms each group with its own
/// reducer. Groups with fewer than `d + 1` rows use a reducer fitted on all rows.
pub fn fit_label_wise(
    spec: &ReducerSpec,
    groups: &BTreeMap<String, Matrix>,
) -> Result<LabelWiseFit> {
    if groups.is_empty() {
        return Err(Error::EmptyInput("no label groups"));
    }
    let parts: Vec<&Matrix> = groups.values().collect();
    let all = Matrix::vstack(&parts)?;
    let global = fit(spec, &all)?;

    let mut reducers = BTreeMap::new();
    let mut fallback = Vec::new();
    let mut pooled_parts = Vec::with_capacity(groups.len());
    let mut row_labels = Vec::with_capacity(all.rows());
    for (label, rows) in groups {
        let reducer = if rows.rows() >= spec.min_rows() {
            fit(spec, rows)?
        } else {
            fallback.push(label.clone());
            global.clone()
        };
        pooled_parts.push(reducer.transform(rows)?);
        row_labels.extend(std::iter::repeat_n(label.clone(), rows.rows()));
        reducers.insert(label.clone(), reducer);
    }
    let pooled = Matrix::vstack(&pooled_parts.iter().collect::<Vec<_>>())?;
    Ok(LabelWiseFit {
        reducers,
        global,
        pooled,
        row_labels,
        fallback,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn wave(n: usize, f: impl Fn(f64) -> Vec<f64>) -> Matrix {
        let rows: Vec<Vec<f64>> = (0..n).map(|i| f(i as f64)).collect();
        Matrix::from_rows(&rows).unwrap()
    }

    #[test]
    fn single_label_matches_plain_fit() {
        let spec = ReducerSpec::default();
        let rows = wave(20, |t| vec![t.sin(), (0.3 * t).cos(), 0.1 * t]);
        let mut groups = BTreeMap::new();
        groups.insert("a".to_string(), rows.clone());
        let lw = fit_label_wise(&spec, &groups).unwrap();
        let plain = fit(&spec, &rows).unwrap();
        assert_eq!(lw.pooled, plain.transform(&rows).unwrap());
        assert!(lw.fallback.is_empty());
    }

    #[test]
    fn small_group_falls_back() {
        let spec = ReducerSpec::default();
        let mut groups = BTreeMap::new();
        groups.insert("a".to_string(), wave(10, |t| vec![t, t.sin(), 1.0]));
        groups.insert("b".to_string(), wave(8, |t| vec![t.cos(), t, 0.5 * t]));
        groups.insert("c".to_string(), wave(2, |t| vec![t, 2.0, 3.0]));
        let lw = fit_label_wise(&spec, &groups).unwrap();
        assert_eq!(lw.fallback, vec!["c".to_string()]);
        assert_eq!(lw.reducers["c"], lw.global);
        assert_eq!(lw.pooled.rows(), 20);
    }

    #[test]
    fn label_wise_beats_global_on_disjoint_subspaces() {
        let spec = ReducerSpec::default();
        let a = wave(30, |t| {
            vec![(0.7 * t).sin() * 3.0, (1.1 * t).cos() * 2.0, 0.0, 0.0]
        });
        let b = wave(30, |t| {
            vec![0.0, 0.0, (0.5 * t).sin() * 2.5, (1.7 * t).cos() * 1.5]
        });
        let mut groups = BTreeMap::new();
        groups.insert("a".to_string(), a.clone());
        groups.insert("b".to_string(), b.clone());
        let lw = fit_label_wise(&spec, &groups).unwrap();
        let err = |r: &FittedReducer, m: &Matrix| match &r.state {
            ReducerState::Pca(p) => p.reconstruction_error(m),
            _ => unreachable!(),
        };
        for (label, m) in [("a", &a), ("b", &b)] {
            let own = err(&lw.reducers[label], m);
            let global = err(&lw.global, m);
            assert!(own <= global, "{label}: {own} > {global}");
        }
    }

    #[test]
    fn transform_dimension_mismatch() {
        let r = fit(&ReducerSpec::default(), &wave(5, |t| vec![t, t * t, 1.0])).unwrap();
        assert!(matches!(
            r.transform_row(&[1.0, 2.0]),
            Err(Error::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn empty_groups_rejected() {
        assert!(fit_label_wise(&ReducerSpec::default(), &BTreeMap::new()).is_err());
    }
}
