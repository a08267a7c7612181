//! Grouped permutation feature importance: how much a model's test error
//! grows when an entire feature family is shuffled out from under it.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::eval::folds::stratified_group_kfold;
use crate::eval::metrics::Metric;
use crate::learners::{fit, EstimatorSpec, Matrix};
use crate::pipeline::{FeatureGroup, FeatureTable};
use crate::util::{derive_seed, par_map, rng_from};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroupGain {
    pub group: FeatureGroup,
    pub n_columns: usize,
    /// Mean error increase under permutation, in the metric's units, over
    /// all folds (and permutations within each fold).
    pub mean_gain: f64,
    /// 1.96 · sd / √n over the per-fold mean gains.
    pub ci95_half_width: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroupImportance {
    pub estimator: String,
    pub metric: Metric,
    pub n_folds: usize,
    pub n_permutations: usize,
    /// One entry per feature group present in the table, in group order.
    /// Gains are comparable within this model only, never across models.
    pub groups: Vec<GroupGain>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GpiOptions {
    pub n_permutations: usize,
    /// The stratified k-fold split is repeated this many times with
    /// different fold assignments; gains average over every fold of every
    /// repeat.
    pub n_repeats: usize,
    pub k_folds: usize,
    pub seed: u64,
    /// Restrict the report to these groups; requesting a group with no
    /// columns in the table is an error. `None` scores every group present.
    pub groups: Option<Vec<FeatureGroup>>,
}

impl Default for GpiOptions {
    fn default() -> Self {
        GpiOptions {
            n_permutations: 100,
            n_repeats: 2,
            k_folds: 5,
            seed: 0,
            groups: None,
        }
    }
}

/// Replace the rows of `cols` with the same rows in `perm` order, leaving
/// every other column untouched.
fn permute_group_rows(base: &Matrix, cols: &[usize], perm: &[usize]) -> Matrix {
    let mut out = base.clone();
    for (r, &src) in perm.iter().enumerate() {
        for &c in cols {
            out.set(r, c, base.get(src, c));
        }
    }
    out
}

fn clamp_counts(mut pred: Vec<f64>) -> Vec<f64> {
    for p in &mut pred {
        *p = p.max(0.0);
    }
    pred
}

/// Permutation importance of every feature group present in `table`, under
/// repeated station-stratified k-fold CV. Per fold: fit on the training
/// rows, measure baseline test error, then for each replicate draw one row
/// permutation and apply it jointly to all columns of each group in turn;
/// the group's gain is mean(permuted error) − baseline. Deterministic given
/// the seed, whatever the parallel schedule.
pub fn grouped_permutation_importance(
    table: &FeatureTable,
    spec: &EstimatorSpec,
    metric: Metric,
    opts: &GpiOptions,
) -> Result<GroupImportance> {
    if !table.is_complete() {
        return Err(Error::data(
            "importance needs a complete table; run preprocessing first",
        ));
    }
    if opts.n_permutations == 0 {
        return Err(Error::config("n_permutations must be at least 1"));
    }
    let groups: Vec<(FeatureGroup, Vec<usize>)> = match &opts.groups {
        Some(wanted) => wanted
            .iter()
            .map(|&g| {
                let cols = table.group_columns(g);
                if cols.is_empty() {
                    return Err(Error::config(format!(
                        "group {} has no columns in this table",
                        g.name()
                    )));
                }
                Ok((g, cols))
            })
            .collect::<Result<_>>()?,
        None => FeatureGroup::ALL
            .into_iter()
            .map(|g| (g, table.group_columns(g)))
            .filter(|(_, cols)| !cols.is_empty())
            .collect(),
    };
    if groups.is_empty() {
        return Err(Error::data("table has no feature columns to permute"));
    }

    // One work item per (repeat, fold); each yields the per-group mean gain
    // over its permutation replicates.
    let mut items: Vec<(usize, crate::eval::folds::Fold)> = Vec::new();
    for rep in 0..opts.n_repeats.max(1) {
        let plan = stratified_group_kfold(
            table,
            opts.k_folds,
            derive_seed(opts.seed, &[0x666f6c64, rep as u64]),
        )?;
        for fold in plan.folds {
            items.push((rep, fold));
        }
    }

    let fold_gains: Vec<Result<Vec<f64>>> = par_map(items.len(), |ix| {
        let (rep, fold) = &items[ix];
        let train = table.select_rows(&fold.train_rows)?;
        let test = table.select_rows(&fold.test_rows)?;
        let x_test = test.matrix()?;
        let model = fit(
            spec,
            &train.matrix()?,
            &train.target,
            None,
            derive_seed(opts.seed, &[0x666974, *rep as u64, ix as u64]),
        )?;
        let baseline = metric.compute(
            &test.target,
            &clamp_counts(model.predict(&x_test)?),
        )?;
        let n_test = test.n_rows();
        let mut sums = vec![0.0; groups.len()];
        for p in 0..opts.n_permutations {
            let mut perm: Vec<usize> = (0..n_test).collect();
            use rand::seq::SliceRandom;
            perm.shuffle(&mut rng_from(
                opts.seed,
                &[0x7065726d, *rep as u64, ix as u64, p as u64],
            ));
            for (gi, (_, cols)) in groups.iter().enumerate() {
                let permuted = permute_group_rows(&x_test, cols, &perm);
                let err = metric.compute(
                    &test.target,
                    &clamp_counts(model.predict(&permuted)?),
                )?;
                sums[gi] += err - baseline;
            }
        }
        Ok(sums.iter().map(|s| s / opts.n_permutations as f64).collect())
    });
    let fold_gains = fold_gains.into_iter().collect::<Result<Vec<Vec<f64>>>>()?;

    let n_folds = fold_gains.len();
    let out = groups
        .iter()
        .enumerate()
        .map(|(gi, (group, cols))| {
            let per_fold: Vec<f64> = fold_gains.iter().map(|f| f[gi]).collect();
            let mean = per_fold.iter().sum::<f64>() / n_folds as f64;
            let half = if n_folds > 1 {
                let var = per_fold.iter().map(|g| (g - mean).powi(2)).sum::<f64>()
                    / (n_folds - 1) as f64;
                1.96 * (var / n_folds as f64).sqrt()
            } else {
                0.0
            };
            GroupGain {
                group: *group,
                n_columns: cols.len(),
                mean_gain: mean,
                ci95_half_width: half,
            }
        })
        .collect();
    Ok(GroupImportance {
        estimator: spec.kind.name().to_string(),
        metric,
        n_folds,
        n_permutations: opts.n_permutations,
        groups: out,
    })
}

/// Plot-ready CSV: one line per group with mean gain and CI bounds.
pub fn write_importance_csv(imp: &GroupImportance, path: &Path) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["group", "n_columns", "mean_gain", "ci_low", "ci_high"])?;
    for g in &imp.groups {
        w.write_record([
            g.group.name(),
            &g.n_columns.to_string(),
            &g.mean_gain.to_string(),
            &(g.mean_gain - g.ci95_half_width).to_string(),
            &(g.mean_gain + g.ci95_half_width).to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}
