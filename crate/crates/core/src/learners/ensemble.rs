//! Tree-based estimators built on the shared grower: single tree, random
//! forest, gradient boosting, and regularized boosting.

use rand::distributions::{Distribution, WeightedIndex};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::util::rng_from;

use super::tree::{grow_tree, GrowParams, Presorted};
use super::{EstimatorSpec, FittedModel, Matrix};

const TAG_TREE: u64 = 0x7472_6565; // "tree"

fn all_rows(n: usize) -> Vec<u32> {
    (0..n as u32).collect()
}

fn all_features(d: usize) -> Vec<usize> {
    (0..d).collect()
}

fn check_positive(name: &str, v: f64) -> Result<f64> {
    if !(v > 0.0) {
        return Err(Error::config(format!("parameter {name} must be positive")));
    }
    Ok(v)
}

fn check_fraction(name: &str, v: f64) -> Result<f64> {
    if !(v > 0.0 && v <= 1.0) {
        return Err(Error::config(format!("parameter {name} must be in (0, 1]")));
    }
    Ok(v)
}

fn check_non_negative(name: &str, v: f64) -> Result<f64> {
    if !(v >= 0.0) {
        return Err(Error::config(format!("parameter {name} must be non-negative")));
    }
    Ok(v)
}

struct TreeControls {
    max_depth: usize,
    min_samples_split: usize,
    min_samples_leaf: usize,
}

fn tree_controls(spec: &EstimatorSpec) -> Result<TreeControls> {
    let max_depth = spec.param_usize("max_depth")?;
    let min_samples_split = spec.param_usize("min_samples_split")?.max(2);
    let min_samples_leaf = spec.param_usize("min_samples_leaf")?.max(1);
    if max_depth == 0 {
        return Err(Error::config("max_depth must be at least 1"));
    }
    Ok(TreeControls {
        max_depth,
        min_samples_split,
        min_samples_leaf,
    })
}

pub fn fit_decision_tree(
    spec: &EstimatorSpec,
    x: &Matrix,
    y: &[f64],
    w: &[f64],
) -> Result<FittedModel> {
    let c = tree_controls(spec)?;
    let params = GrowParams {
        max_depth: c.max_depth,
        min_samples_split: c.min_samples_split,
        min_samples_leaf: c.min_samples_leaf,
        min_child_weight: 0.0,
        lambda: 0.0,
        gamma: 0.0,
        features_per_split: None,
    };
    let pre = Presorted::new(x);
    let g: Vec<f64> = y.iter().zip(w).map(|(yi, wi)| -wi * yi).collect();
    let mut rng = rng_from(0, &[TAG_TREE]);
    let tree = grow_tree(
        x,
        &pre,
        &all_rows(x.rows()),
        &g,
        w,
        &all_features(x.cols()),
        &params,
        &mut rng,
        None,
    );
    Ok(FittedModel::DecisionTree { tree })
}

/// Draw a weight-proportional bootstrap of size n and return per-row
/// multiplicities.
fn bootstrap_counts(w: &[f64], rng: &mut ChaCha8Rng) -> Result<Vec<f64>> {
    let dist = WeightedIndex::new(w.iter().copied())
        .map_err(|e| Error::data(format!("bootstrap weights: {e}")))?;
    let mut counts = vec![0.0; w.len()];
    for _ in 0..w.len() {
        counts[dist.sample(rng)] += 1.0;
    }
    Ok(counts)
}

pub fn fit_random_forest(
    spec: &EstimatorSpec,
    x: &Matrix,
    y: &[f64],
    w: &[f64],
    seed: u64,
) -> Result<FittedModel> {
    let c = tree_controls(spec)?;
    let n_trees = spec.param_usize("n_trees")?.max(1);
    let frac = check_fraction("max_features_frac", spec.param("max_features_frac")?)?;
    let bootstrap = spec.param("bootstrap")? != 0.0;
    let mtry = ((frac * x.cols() as f64).round() as usize).clamp(1, x.cols());
    let params = GrowParams {
        max_depth: c.max_depth,
        min_samples_split: c.min_samples_split,
        min_samples_leaf: c.min_samples_leaf,
        min_child_weight: 0.0,
        lambda: 0.0,
        gamma: 0.0,
        features_per_split: Some(mtry),
    };
    let pre = Presorted::new(x);
    let features = all_features(x.cols());
    let mut trees = Vec::with_capacity(n_trees);
    for t in 0..n_trees {
        let mut rng = rng_from(seed, &[TAG_TREE, t as u64]);
        let (rows, g, h): (Vec<u32>, Vec<f64>, Vec<f64>) = if bootstrap {
            let counts = bootstrap_counts(w, &mut rng)?;
            let rows = (0..x.rows() as u32)
                .filter(|r| counts[*r as usize] > 0.0)
                .collect();
            let g = y.iter().zip(&counts).map(|(yi, c)| -c * yi).collect();
            (rows, g, counts)
        } else {
            let g = y.iter().zip(w).map(|(yi, wi)| -wi * yi).collect();
            (all_rows(x.rows()), g, w.to_vec())
        };
        trees.push(grow_tree(x, &pre, &rows, &g, &h, &features, &params, &mut rng, None));
    }
    Ok(FittedModel::RandomForest { trees })
}

/// Sample `amount` distinct indices from 0..n in ascending order.
fn sample_sorted(n: usize, amount: usize, rng: &mut ChaCha8Rng) -> Vec<usize> {
    let mut v = rand::seq::index::sample(rng, n, amount.clamp(1, n)).into_vec();
    v.sort_unstable();
    v
}

fn boosting_rows(n: usize, subsample: f64, rng: &mut ChaCha8Rng) -> Vec<u32> {
    if subsample >= 1.0 {
        all_rows(n)
    } else {
        let m = ((subsample * n as f64).floor() as usize).max(1);
        sample_sorted(n, m, rng).into_iter().map(|i| i as u32).collect()
    }
}

pub fn fit_gradient_boosting(
    spec: &EstimatorSpec,
    x: &Matrix,
    y: &[f64],
    w: &[f64],
    seed: u64,
) -> Result<FittedModel> {
    let c = tree_controls(spec)?;
    let n_trees = spec.param_usize("n_trees")?.max(1);
    let lr = check_positive("learning_rate", spec.param("learning_rate")?)?;
    let subsample = check_fraction("subsample", spec.param("subsample")?)?;
    let params = GrowParams {
        max_depth: c.max_depth,
        min_samples_split: c.min_samples_split,
        min_samples_leaf: c.min_samples_leaf,
        min_child_weight: 0.0,
        lambda: 0.0,
        gamma: 0.0,
        features_per_split: None,
    };
    let pre = Presorted::new(x);
    let features = all_features(x.cols());
    let base = super::weighted_mean(y, w);
    let mut pred = vec![base; y.len()];
    let mut trees = Vec::with_capacity(n_trees);
    for t in 0..n_trees {
        let mut rng = rng_from(seed, &[TAG_TREE, t as u64]);
        let rows = boosting_rows(x.rows(), subsample, &mut rng);
        // Each tree fits the current residuals; leaves hold weighted mean
        // residuals because g = -w·(y - pred), h = w.
        let g: Vec<f64> = (0..y.len()).map(|i| -w[i] * (y[i] - pred[i])).collect();
        let tree = grow_tree(x, &pre, &rows, &g, w, &features, &params, &mut rng, None);
        for i in 0..y.len() {
            pred[i] += lr * tree.predict_row(x.row(i));
        }
        trees.push(tree);
    }
    Ok(FittedModel::GradientBoosting {
        base,
        learning_rate: lr,
        trees,
    })
}

pub fn fit_regularized_boosting(
    spec: &EstimatorSpec,
    x: &Matrix,
    y: &[f64],
    w: &[f64],
    seed: u64,
) -> Result<FittedModel> {
    fit_regularized_boosting_impl(spec, x, y, w, seed, None)
}

/// Fit regularized boosting and also return the total split gain each column
/// accumulated across all trees, the importance signal behind model-based
/// feature selection.
pub fn regularized_boosting_split_gains(
    spec: &EstimatorSpec,
    x: &Matrix,
    y: &[f64],
    w: &[f64],
    seed: u64,
) -> Result<(FittedModel, Vec<f64>)> {
    let mut gains = vec![0.0; x.cols()];
    let model = fit_regularized_boosting_impl(spec, x, y, w, seed, Some(&mut gains))?;
    Ok((model, gains))
}

fn fit_regularized_boosting_impl(
    spec: &EstimatorSpec,
    x: &Matrix,
    y: &[f64],
    w: &[f64],
    seed: u64,
    mut gain_sink: Option<&mut Vec<f64>>,
) -> Result<FittedModel> {
    let n_trees = spec.param_usize("n_trees")?.max(1);
    let lr = check_positive("learning_rate", spec.param("learning_rate")?)?;
    let max_depth = spec.param_usize("max_depth")?.max(1);
    let lambda = check_non_negative("lambda", spec.param("lambda")?)?;
    let gamma = check_non_negative("gamma", spec.param("gamma")?)?;
    let min_child_weight = check_non_negative("min_child_weight", spec.param("min_child_weight")?)?;
    let colsample = check_fraction("colsample_bytree", spec.param("colsample_bytree")?)?;
    let subsample = check_fraction("subsample", spec.param("subsample")?)?;
    let params = GrowParams {
        max_depth,
        min_samples_split: 2,
        min_samples_leaf: 1,
        min_child_weight,
        lambda,
        gamma,
        features_per_split: None,
    };
    let pre = Presorted::new(x);
    let d = x.cols();
    let base = super::weighted_mean(y, w);
    let mut pred = vec![base; y.len()];
    let mut trees = Vec::with_capacity(n_trees);
    for t in 0..n_trees {
        let mut rng = rng_from(seed, &[TAG_TREE, t as u64]);
        let rows = boosting_rows(x.rows(), subsample, &mut rng);
        let features = if colsample >= 1.0 {
            all_features(d)
        } else {
            let m = ((colsample * d as f64).round() as usize).clamp(1, d);
            sample_sorted(d, m, &mut rng)
        };
        // Squared loss: gradient w·(pred − y), hessian w.
        let g: Vec<f64> = (0..y.len()).map(|i| w[i] * (pred[i] - y[i])).collect();
        let tree = grow_tree(
            x,
            &pre,
            &rows,
            &g,
            w,
            &features,
            &params,
            &mut rng,
            gain_sink.as_deref_mut(),
        );
        for i in 0..y.len() {
            pred[i] += lr * tree.predict_row(x.row(i));
        }
        trees.push(tree);
    }
    Ok(FittedModel::RegularizedBoosting {
        base,
        learning_rate: lr,
        trees,
    })
}
