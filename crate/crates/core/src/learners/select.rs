//! Feature selection: univariate correlation ranking, recursive elimination
//! with a linear model, boosting split-gain thresholding, and greedy
//! sequential forward selection under station-grouped cross-validation.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::eval::folds::group_kfold;
use crate::eval::metrics::mae;
use crate::pipeline::FeatureTable;
use crate::util::{derive_seed, hash_str};

use super::{ensemble, fit, EstimatorKind, EstimatorSpec, FittedModel, Matrix};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SelectionMethod {
    /// Keep the k columns with the largest absolute Pearson correlation with
    /// the target.
    UnivariateKBest,
    /// Repeatedly refit a linear model on standardized columns and drop the
    /// one with the smallest absolute coefficient until k remain.
    RfeLinear,
    /// Keep every column whose total split gain across a regularized
    /// boosting fit is at least the median of all column gains; k is unused.
    FromModelBoosting,
    /// Greedily add the column that most improves station-grouped CV MAE of
    /// an internal linear model, until k are chosen or nothing improves.
    SequentialForward,
}

impl SelectionMethod {
    pub const ALL: [SelectionMethod; 4] = [
        SelectionMethod::UnivariateKBest,
        SelectionMethod::RfeLinear,
        SelectionMethod::FromModelBoosting,
        SelectionMethod::SequentialForward,
    ];

    pub fn name(self) -> &'static str {
        match self {
            SelectionMethod::UnivariateKBest => "univariate_k_best",
            SelectionMethod::RfeLinear => "rfe_linear",
            SelectionMethod::FromModelBoosting => "from_model_boosting",
            SelectionMethod::SequentialForward => "sequential_forward",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|m| m.name() == s)
            .ok_or_else(|| Error::config(format!("unknown selection method: {s}")))
    }
}

/// Default selection method per estimator; `None` means the estimator runs
/// on all columns unless a config overrides it.
pub fn default_method(kind: EstimatorKind) -> Option<SelectionMethod> {
    match kind {
        EstimatorKind::BaselineMean => None,
        EstimatorKind::GradientBoosting => Some(SelectionMethod::SequentialForward),
        EstimatorKind::Linear
        | EstimatorKind::DecisionTree
        | EstimatorKind::RandomForest
        | EstimatorKind::RegularizedBoosting => Some(SelectionMethod::RfeLinear),
    }
}

/// Select a column subset of `table`. Returns ascending column indices.
/// `k` bounds the subset size for every method except `FromModelBoosting`,
/// which derives its own gain threshold. Deterministic given `seed`.
pub fn select_features(
    method: SelectionMethod,
    table: &FeatureTable,
    k: usize,
    seed: u64,
) -> Result<Vec<usize>> {
    let d = table.n_cols();
    if table.n_rows() == 0 {
        return Err(Error::data("cannot select features on an empty table"));
    }
    if !table.is_complete() {
        return Err(Error::data(
            "feature selection requires a complete table; run preprocessing first",
        ));
    }
    if constant(&table.target) {
        return Err(Error::data(
            "target is constant; no feature ranking is defined",
        ));
    }
    if method != SelectionMethod::FromModelBoosting {
        if k == 0 {
            return Err(Error::config("selection size k must be at least 1"));
        }
        if k > d {
            return Err(Error::config(format!(
                "selection size k={k} exceeds the {d} available columns"
            )));
        }
    }
    match method {
        SelectionMethod::UnivariateKBest => univariate_k_best(table, k),
        SelectionMethod::RfeLinear => rfe_linear(table, k),
        SelectionMethod::FromModelBoosting => from_model_boosting(table, seed),
        SelectionMethod::SequentialForward => sequential_forward(table, k, seed),
    }
}

fn constant(v: &[f64]) -> bool {
    v.iter().all(|x| *x == v[0])
}

fn column(table: &FeatureTable, j: usize) -> Vec<f64> {
    table.values.iter().map(|row| row[j]).collect()
}

/// |Pearson r| with the convention that a zero-variance side scores 0.
fn pearson_abs(a: &[f64], b: &[f64]) -> f64 {
    let n = a.len() as f64;
    let ma = a.iter().sum::<f64>() / n;
    let mb = b.iter().sum::<f64>() / n;
    let mut cov = 0.0;
    let mut va = 0.0;
    let mut vb = 0.0;
    for (x, y) in a.iter().zip(b) {
        cov += (x - ma) * (y - mb);
        va += (x - ma).powi(2);
        vb += (y - mb).powi(2);
    }
    if va == 0.0 || vb == 0.0 {
        0.0
    } else {
        (cov / (va * vb).sqrt()).abs()
    }
}

fn univariate_k_best(table: &FeatureTable, k: usize) -> Result<Vec<usize>> {
    let mut scored: Vec<(usize, f64)> = (0..table.n_cols())
        .map(|j| (j, pearson_abs(&column(table, j), &table.target)))
        .collect();
    // Highest score first; equal scores resolve to the earlier column.
    scored.sort_by(|a, b| b.1.partial_cmp(&a.1).unwrap().then(a.0.cmp(&b.0)));
    let mut keep: Vec<usize> = scored[..k].iter().map(|(j, _)| *j).collect();
    keep.sort_unstable();
    Ok(keep)
}

/// Columns z-scored in place; a constant column becomes all zeros and is
/// eliminated first since its coefficient must be 0.
fn standardized_matrix(table: &FeatureTable, cols: &[usize]) -> Result<Matrix> {
    let n = table.n_rows();
    let mut m = Matrix::zeros(n, cols.len());
    for (cj, &j) in cols.iter().enumerate() {
        let v = column(table, j);
        let mean = v.iter().sum::<f64>() / n as f64;
        let var = v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n as f64;
        let sd = var.sqrt();
        for (r, x) in v.iter().enumerate() {
            m.set(r, cj, if sd > 0.0 { (x - mean) / sd } else { 0.0 });
        }
    }
    Ok(m)
}

fn rfe_linear(table: &FeatureTable, k: usize) -> Result<Vec<usize>> {
    let spec = EstimatorSpec::new(EstimatorKind::Linear);
    let mut current: Vec<usize> = (0..table.n_cols()).collect();
    while current.len() > k {
        let x = standardized_matrix(table, &current)?;
        let fitted = fit(&spec, &x, &table.target, None, 0)?;
        let coefs = match &fitted.model {
            FittedModel::Linear { coefficients, .. } => coefficients.clone(),
            _ => unreachable!("linear spec fits a linear model"),
        };
        // Smallest |coefficient| goes; among ties the later column goes, so
        // earlier columns are preferred exactly as in the correlation rule.
        let mut drop = 0;
        for (i, c) in coefs.iter().enumerate() {
            if c.abs() <= coefs[drop].abs() {
                drop = i;
            }
        }
        current.remove(drop);
    }
    Ok(current)
}

fn from_model_boosting(table: &FeatureTable, seed: u64) -> Result<Vec<usize>> {
    let spec = EstimatorSpec::new(EstimatorKind::RegularizedBoosting);
    let x = table.matrix()?;
    let w = vec![1.0; table.n_rows()];
    let (_, gains) = ensemble::regularized_boosting_split_gains(
        &spec,
        &x,
        &table.target,
        &w,
        derive_seed(seed, &[hash_str("from_model_boosting")]),
    )?;
    let mut sorted = gains.clone();
    sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let median = if sorted.len() % 2 == 1 {
        sorted[sorted.len() / 2]
    } else {
        0.5 * (sorted[sorted.len() / 2 - 1] + sorted[sorted.len() / 2])
    };
    Ok((0..gains.len()).filter(|&j| gains[j] >= median).collect())
}

/// Mean station-grouped CV MAE of a linear model on the given columns.
fn grouped_cv_mae(table: &FeatureTable, cols: &[usize], seed: u64) -> Result<f64> {
    let n_stations = table.stations().len();
    if n_stations < 2 {
        return Err(Error::data(
            "sequential selection needs at least 2 stations for grouped CV",
        ));
    }
    let k_folds = n_stations.min(5);
    let plan = group_kfold(table, k_folds, seed)?;
    let spec = EstimatorSpec::new(EstimatorKind::Linear);
    let sub = table.select_columns(cols)?;
    let mut total = 0.0;
    for fold in &plan.folds {
        let train = sub.select_rows(&fold.train_rows)?;
        let fitted = fit(&spec, &train.matrix()?, &train.target, None, 0)?;
        let test = sub.select_rows(&fold.test_rows)?;
        let pred = fitted.predict(&test.matrix()?)?;
        total += mae(&test.target, &pred)?;
    }
    Ok(total / plan.folds.len() as f64)
}

fn sequential_forward(table: &FeatureTable, k: usize, seed: u64) -> Result<Vec<usize>> {
    let fold_seed = derive_seed(seed, &[hash_str("sequential_forward")]);
    let mut chosen: Vec<usize> = Vec::new();
    let mut best_mae = f64::INFINITY;
    while chosen.len() < k {
        let mut best: Option<(usize, f64)> = None;
        for c in 0..table.n_cols() {
            if chosen.contains(&c) {
                continue;
            }
            let mut cand = chosen.clone();
            cand.push(c);
            cand.sort_unstable();
            let score = grouped_cv_mae(table, &cand, fold_seed)?;
            if best.map_or(true, |(_, s)| score < s) {
                best = Some((c, score));
            }
        }
        match best {
            Some((c, score)) if score < best_mae => {
                chosen.push(c);
                best_mae = score;
            }
            // No candidate improves on the current subset: stop early.
            _ => break,
        }
    }
    chosen.sort_unstable();
    Ok(chosen)
}
