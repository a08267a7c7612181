//! Weighted regression learners.
//!
//! Six estimators share one interface: a mean baseline, linear least squares,
//! a single decision tree, a random forest, gradient boosting, and
//! regularized boosting. All tree-based models are grown by the engine in
//! [`tree`], parameterized by per-row gradient/hessian pairs; the classic
//! variance-reduction criterion and the regularized second-order criterion
//! are the same computation with different inputs.
//!
//! Fitting is deterministic given the feature matrix, targets, weights, and
//! seed. Models serialize to a versioned JSON document and predict
//! bit-identically after a round trip.

pub mod defaults;
pub mod ensemble;
pub mod linear;
pub mod search;
pub mod select;
pub mod tree;

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ENGINE_VERSION;

use tree::TreeModel;

/// Dense row-major matrix of feature values.
#[derive(Debug, Clone, PartialEq)]
pub struct Matrix {
    data: Vec<f64>,
    rows: usize,
    cols: usize,
}

impl Matrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Matrix {
            data: vec![0.0; rows * cols],
            rows,
            cols,
        }
    }

    pub fn from_flat(data: Vec<f64>, rows: usize, cols: usize) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::data(format!(
                "matrix shape {rows}x{cols} does not match {} values",
                data.len()
            )));
        }
        Ok(Matrix { data, rows, cols })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let n = rows.len();
        let d = rows.first().map_or(0, Vec::len);
        let mut data = Vec::with_capacity(n * d);
        for r in rows {
            if r.len() != d {
                return Err(Error::data("ragged rows in matrix construction"));
            }
            data.extend_from_slice(r);
        }
        Ok(Matrix { data, rows: n, cols: d })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    #[inline]
    pub fn get(&self, r: usize, c: usize) -> f64 {
        debug_assert!(r < self.rows && c < self.cols);
        self.data[r * self.cols + c]
    }

    pub fn set(&mut self, r: usize, c: usize, v: f64) {
        self.data[r * self.cols + c] = v;
    }

    #[inline]
    pub fn row(&self, r: usize) -> &[f64] {
        &self.data[r * self.cols..(r + 1) * self.cols]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EstimatorKind {
    BaselineMean,
    Linear,
    DecisionTree,
    RandomForest,
    GradientBoosting,
    RegularizedBoosting,
}

impl EstimatorKind {
    pub const ALL: [EstimatorKind; 6] = [
        EstimatorKind::BaselineMean,
        EstimatorKind::Linear,
        EstimatorKind::DecisionTree,
        EstimatorKind::RandomForest,
        EstimatorKind::GradientBoosting,
        EstimatorKind::RegularizedBoosting,
    ];

    pub fn name(self) -> &'static str {
        match self {
            EstimatorKind::BaselineMean => "baseline_mean",
            EstimatorKind::Linear => "linear",
            EstimatorKind::DecisionTree => "decision_tree",
            EstimatorKind::RandomForest => "random_forest",
            EstimatorKind::GradientBoosting => "gradient_boosting",
            EstimatorKind::RegularizedBoosting => "regularized_boosting",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        Self::ALL
            .iter()
            .copied()
            .find(|k| k.name() == s)
            .ok_or_else(|| Error::config(format!("unknown estimator kind: {s}")))
    }
}

/// Hyperparameter assignment. All values are numeric; integer-valued
/// parameters are rounded at the point of use.
pub type HyperParams = BTreeMap<String, f64>;

/// An estimator kind plus hyperparameter overrides. Parameters not present
/// fall back to the versioned defaults in [`defaults`].
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EstimatorSpec {
    pub kind: EstimatorKind,
    #[serde(default)]
    pub params: HyperParams,
}

impl EstimatorSpec {
    pub fn new(kind: EstimatorKind) -> Self {
        EstimatorSpec {
            kind,
            params: HyperParams::new(),
        }
    }

    pub fn with_param(mut self, name: &str, value: f64) -> Self {
        self.params.insert(name.to_string(), value);
        self
    }

    /// Effective value of `name`: the override if present, else the default.
    pub fn param(&self, name: &str) -> Result<f64> {
        if let Some(v) = self.params.get(name) {
            return Ok(*v);
        }
        defaults::default_params(self.kind)
            .get(name)
            .copied()
            .ok_or_else(|| {
                Error::config(format!(
                    "estimator {} has no parameter {name}",
                    self.kind.name()
                ))
            })
    }

    pub fn param_usize(&self, name: &str) -> Result<usize> {
        let v = self.param(name)?;
        if !v.is_finite() || v < 0.0 {
            return Err(Error::config(format!("parameter {name} must be non-negative")));
        }
        Ok(v.round() as usize)
    }

    fn validate(&self) -> Result<()> {
        let allowed = defaults::allowed_params(self.kind);
        for key in self.params.keys() {
            if !allowed.contains(&key.as_str()) {
                return Err(Error::config(format!(
                    "unknown parameter {key} for estimator {}",
                    self.kind.name()
                )));
            }
        }
        for (key, v) in &self.params {
            if !v.is_finite() {
                return Err(Error::config(format!("parameter {key} is not finite")));
            }
        }
        Ok(())
    }
}

/// A trained model together with the feature arity it was fit on.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Fitted {
    pub n_features: usize,
    pub model: FittedModel,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "model", rename_all = "snake_case")]
pub enum FittedModel {
    BaselineMean {
        value: f64,
    },
    Linear {
        intercept: f64,
        coefficients: Vec<f64>,
    },
    DecisionTree {
        tree: TreeModel,
    },
    RandomForest {
        trees: Vec<TreeModel>,
    },
    GradientBoosting {
        base: f64,
        learning_rate: f64,
        trees: Vec<TreeModel>,
    },
    RegularizedBoosting {
        base: f64,
        learning_rate: f64,
        trees: Vec<TreeModel>,
    },
}

impl Fitted {
    pub fn kind(&self) -> EstimatorKind {
        match self.model {
            FittedModel::BaselineMean { .. } => EstimatorKind::BaselineMean,
            FittedModel::Linear { .. } => EstimatorKind::Linear,
            FittedModel::DecisionTree { .. } => EstimatorKind::DecisionTree,
            FittedModel::RandomForest { .. } => EstimatorKind::RandomForest,
            FittedModel::GradientBoosting { .. } => EstimatorKind::GradientBoosting,
            FittedModel::RegularizedBoosting { .. } => EstimatorKind::RegularizedBoosting,
        }
    }

    pub fn predict(&self, x: &Matrix) -> Result<Vec<f64>> {
        if x.cols() != self.n_features {
            return Err(Error::data(format!(
                "model was fit on {} features, got {}",
                self.n_features,
                x.cols()
            )));
        }
        let n = x.rows();
        Ok(match &self.model {
            FittedModel::BaselineMean { value } => vec![*value; n],
            FittedModel::Linear {
                intercept,
                coefficients,
            } => (0..n)
                .map(|r| {
                    let row = x.row(r);
                    intercept
                        + coefficients
                            .iter()
                            .zip(row)
                            .map(|(c, v)| c * v)
                            .sum::<f64>()
                })
                .collect(),
            FittedModel::DecisionTree { tree } => {
                (0..n).map(|r| tree.predict_row(x.row(r))).collect()
            }
            FittedModel::RandomForest { trees } => (0..n)
                .map(|r| {
                    let row = x.row(r);
                    trees.iter().map(|t| t.predict_row(row)).sum::<f64>() / trees.len() as f64
                })
                .collect(),
            FittedModel::GradientBoosting {
                base,
                learning_rate,
                trees,
            }
            | FittedModel::RegularizedBoosting {
                base,
                learning_rate,
                trees,
            } => (0..n)
                .map(|r| {
                    let row = x.row(r);
                    base + learning_rate
                        * trees.iter().map(|t| t.predict_row(row)).sum::<f64>()
                })
                .collect(),
        })
    }
}

/// Versioned on-disk form of a fitted model.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ModelFile {
    pub format_version: u32,
    pub engine_version: String,
    pub n_features: usize,
    pub model: FittedModel,
}

pub const MODEL_FORMAT_VERSION: u32 = 1;

impl ModelFile {
    pub fn from_fitted(fitted: &Fitted) -> Self {
        ModelFile {
            format_version: MODEL_FORMAT_VERSION,
            engine_version: ENGINE_VERSION.to_string(),
            n_features: fitted.n_features,
            model: fitted.model.clone(),
        }
    }

    pub fn into_fitted(self) -> Result<Fitted> {
        if self.format_version != MODEL_FORMAT_VERSION {
            return Err(Error::data(format!(
                "unsupported model format version {}",
                self.format_version
            )));
        }
        Ok(Fitted {
            n_features: self.n_features,
            model: self.model,
        })
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        Ok(serde_json::from_str(s)?)
    }
}

fn validate_inputs(
    x: &Matrix,
    y: &[f64],
    weights: Option<&[f64]>,
) -> Result<Vec<f64>> {
    if x.rows() != y.len() {
        return Err(Error::data(format!(
            "feature matrix has {} rows but {} targets",
            x.rows(),
            y.len()
        )));
    }
    if y.is_empty() {
        return Err(Error::data("cannot fit on zero rows"));
    }
    if x.data.iter().any(|v| !v.is_finite()) {
        return Err(Error::data("feature matrix contains non-finite values"));
    }
    if y.iter().any(|v| !v.is_finite()) {
        return Err(Error::data("targets contain non-finite values"));
    }
    let w = match weights {
        Some(w) => {
            if w.len() != y.len() {
                return Err(Error::data("weight vector length mismatch"));
            }
            if w.iter().any(|v| !v.is_finite() || *v < 0.0) {
                return Err(Error::data("weights must be finite and non-negative"));
            }
            w.to_vec()
        }
        None => vec![1.0; y.len()],
    };
    if w.iter().sum::<f64>() <= 0.0 {
        return Err(Error::data("total weight must be positive"));
    }
    Ok(w)
}

/// Weighted mean of `y`, summed in row order.
pub fn weighted_mean(y: &[f64], w: &[f64]) -> f64 {
    let mut num = 0.0;
    let mut den = 0.0;
    for (yi, wi) in y.iter().zip(w) {
        num += wi * yi;
        den += wi;
    }
    num / den
}

/// Fit `spec` on the given matrix, targets, and optional row weights.
/// `seed` drives all randomness (bootstraps, feature subsampling); estimators
/// without randomness ignore it. Deterministic: identical inputs and seed
/// give an identical model.
pub fn fit(
    spec: &EstimatorSpec,
    x: &Matrix,
    y: &[f64],
    weights: Option<&[f64]>,
    seed: u64,
) -> Result<Fitted> {
    spec.validate()?;
    let w = validate_inputs(x, y, weights)?;
    let model = match spec.kind {
        EstimatorKind::BaselineMean => FittedModel::BaselineMean {
            value: weighted_mean(y, &w),
        },
        EstimatorKind::Linear => linear::fit_linear(x, y, &w)?,
        EstimatorKind::DecisionTree => ensemble::fit_decision_tree(spec, x, y, &w)?,
        EstimatorKind::RandomForest => ensemble::fit_random_forest(spec, x, y, &w, seed)?,
        EstimatorKind::GradientBoosting => ensemble::fit_gradient_boosting(spec, x, y, &w, seed)?,
        EstimatorKind::RegularizedBoosting => {
            ensemble::fit_regularized_boosting(spec, x, y, &w, seed)?
        }
    };
    Ok(Fitted {
        n_features: x.cols(),
        model,
    })
}
