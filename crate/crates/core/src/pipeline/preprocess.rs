//! Combined-data preprocessing: drop near-duplicate columns, drop constants,
//! and fill the remaining missing cells with cross-station means. Fitting and
//! applying are separate so evaluation folds can fit on training rows only.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::pipeline::table::FeatureTable;

/// Absolute Pearson correlation above which the later column is dropped.
pub const CORRELATION_LIMIT: f64 = 0.99;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorrelatedDrop {
    pub kept: String,
    pub dropped: String,
    pub r: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Imputation {
    pub column: String,
    pub station_id: String,
    pub value: f64,
    pub cells: usize,
}

/// Everything preprocessing did, in order: correlation drops, constant drops,
/// imputations.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct TransformLog {
    pub dropped_correlated: Vec<CorrelatedDrop>,
    pub dropped_constant: Vec<String>,
    pub imputed: Vec<Imputation>,
}

impl TransformLog {
    pub fn is_empty(&self) -> bool {
        self.dropped_correlated.is_empty()
            && self.dropped_constant.is_empty()
            && self.imputed.is_empty()
    }
}

/// Per-column sums backing the leave-own-station-out imputation means.
#[derive(Debug, Clone)]
struct ImputeStats {
    global_sum: f64,
    global_n: usize,
    per_station: BTreeMap<String, (f64, usize)>,
}

impl ImputeStats {
    /// The imputation value for a cell of `station`: the mean over all other
    /// stations' present values. A station absent from the fit (a held-out
    /// one) gets the plain global mean; if no other station has any value the
    /// global mean is the only defensible fallback.
    fn value_for(&self, station: &str) -> f64 {
        let (s, n) = self.per_station.get(station).copied().unwrap_or((0.0, 0));
        let (rest_sum, rest_n) = (self.global_sum - s, self.global_n - n);
        if rest_n > 0 {
            rest_sum / rest_n as f64
        } else {
            self.global_sum / self.global_n as f64
        }
    }
}

/// Preprocessing decisions fitted on one table.
#[derive(Debug, Clone)]
pub struct FittedPreprocess {
    /// Full column-name list of the table the fit saw, for apply-time checks.
    fitted_columns: Vec<String>,
    /// Indices (into the fitted column list) of the surviving columns.
    keep: Vec<usize>,
    dropped_correlated: Vec<CorrelatedDrop>,
    dropped_constant: Vec<String>,
    /// Aligned with `keep`.
    stats: Vec<ImputeStats>,
}

/// Pearson correlation over rows where both columns are present. `None` when
/// fewer than two such rows exist or either column is constant on them.
fn pairwise_correlation(table: &FeatureTable, a: usize, b: usize) -> Option<f64> {
    let mut n = 0.0;
    let (mut sx, mut sy, mut sxx, mut syy, mut sxy) = (0.0, 0.0, 0.0, 0.0, 0.0);
    for row in &table.values {
        let (x, y) = (row[a], row[b]);
        if x.is_finite() && y.is_finite() {
            n += 1.0;
            sx += x;
            sy += y;
            sxx += x * x;
            syy += y * y;
            sxy += x * y;
        }
    }
    if n < 2.0 {
        return None;
    }
    let vx = sxx - sx * sx / n;
    let vy = syy - sy * sy / n;
    if vx <= 0.0 || vy <= 0.0 {
        return None;
    }
    Some((sxy - sx * sy / n) / (vx * vy).sqrt())
}

/// Decide drops and fit imputation means on `table` (rule order: correlated
/// pairs, constants, imputation statistics).
pub fn fit_preprocess(table: &FeatureTable) -> Result<FittedPreprocess> {
    let n_cols = table.n_cols();
    let mut kept = vec![true; n_cols];
    let mut dropped_correlated = Vec::new();
    for i in 0..n_cols {
        if !kept[i] {
            continue;
        }
        for j in (i + 1)..n_cols {
            if !kept[j] {
                continue;
            }
            if let Some(r) = pairwise_correlation(table, i, j) {
                if r.abs() > CORRELATION_LIMIT {
                    kept[j] = false;
                    dropped_correlated.push(CorrelatedDrop {
                        kept: table.columns[i].name.clone(),
                        dropped: table.columns[j].name.clone(),
                        r,
                    });
                }
            }
        }
    }

    let mut dropped_constant = Vec::new();
    for c in 0..n_cols {
        if !kept[c] {
            continue;
        }
        let mut present = table.values.iter().map(|row| row[c]).filter(|v| v.is_finite());
        let constant = match present.next() {
            None => true, // a column with no values at all carries nothing
            Some(first) => present.all(|v| v == first),
        };
        if constant {
            kept[c] = false;
            dropped_constant.push(table.columns[c].name.clone());
        }
    }

    let keep: Vec<usize> = (0..n_cols).filter(|&c| kept[c]).collect();
    let stats = keep
        .iter()
        .map(|&c| {
            let mut s = ImputeStats {
                global_sum: 0.0,
                global_n: 0,
                per_station: BTreeMap::new(),
            };
            for (r, row) in table.values.iter().enumerate() {
                let v = row[c];
                if v.is_finite() {
                    s.global_sum += v;
                    s.global_n += 1;
                    let e = s
                        .per_station
                        .entry(table.rows[r].station_id.clone())
                        .or_insert((0.0, 0));
                    e.0 += v;
                    e.1 += 1;
                }
            }
            s
        })
        .collect();

    Ok(FittedPreprocess {
        fitted_columns: table.columns.iter().map(|c| c.name.clone()).collect(),
        keep,
        dropped_correlated,
        dropped_constant,
        stats,
    })
}

impl FittedPreprocess {
    pub fn dropped_correlated(&self) -> &[CorrelatedDrop] {
        &self.dropped_correlated
    }

    pub fn dropped_constant(&self) -> &[String] {
        &self.dropped_constant
    }

    pub fn kept_columns(&self) -> Vec<&str> {
        self.keep.iter().map(|&c| self.fitted_columns[c].as_str()).collect()
    }

    /// The value a missing cell of `column` (post-drop name) would receive
    /// for `station`.
    pub fn imputation_value(&self, column: &str, station: &str) -> Option<f64> {
        let at = self
            .keep
            .iter()
            .position(|&c| self.fitted_columns[c] == column)?;
        Some(self.stats[at].value_for(station))
    }

    /// Drop the fitted columns from `table` and fill its missing cells with
    /// the fitted means. The table must have the same columns the fit saw.
    pub fn apply(&self, table: &FeatureTable) -> Result<(FeatureTable, Vec<Imputation>)> {
        let names: Vec<String> = table.columns.iter().map(|c| c.name.clone()).collect();
        if names != self.fitted_columns {
            return Err(Error::data(
                "table columns differ from the ones preprocessing was fitted on",
            ));
        }
        let mut out = table.select_columns(&self.keep)?;
        let mut counts: BTreeMap<(usize, String), usize> = BTreeMap::new();
        for (r, row) in out.values.iter_mut().enumerate() {
            let station = out.rows[r].station_id.as_str();
            for (k, v) in row.iter_mut().enumerate() {
                if !v.is_finite() {
                    *v = self.stats[k].value_for(station);
                    *counts.entry((k, station.to_string())).or_default() += 1;
                }
            }
        }
        let imputed = counts
            .into_iter()
            .map(|((k, station_id), cells)| Imputation {
                column: out.columns[k].name.clone(),
                station_id: station_id.clone(),
                value: self.stats[k].value_for(&station_id),
                cells,
            })
            .collect();
        Ok((out, imputed))
    }
}

/// Fit on `table` and apply to it, returning the complete table and the log.
pub fn preprocess(table: &FeatureTable) -> Result<(FeatureTable, TransformLog)> {
    let fitted = fit_preprocess(table)?;
    let (out, imputed) = fitted.apply(table)?;
    debug_assert!(out.is_complete() || out.n_rows() == 0);
    Ok((
        out,
        TransformLog {
            dropped_correlated: fitted.dropped_correlated,
            dropped_constant: fitted.dropped_constant,
            imputed,
        },
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::counts::{CountWindow, StationKind};
    use crate::pipeline::table::{ColumnDef, FeatureGroup, RowKey};
    use chrono::NaiveDate;
    use proptest::prelude::*;

    fn table_from(columns: &[&str], rows: &[(&str, Vec<f64>)]) -> FeatureTable {
        let defs = columns
            .iter()
            .map(|n| ColumnDef { name: n.to_string(), group: FeatureGroup::Weather })
            .collect();
        let mut t = FeatureTable::new(CountWindow::FullDay, defs).unwrap();
        let base = NaiveDate::from_ymd_opt(2020, 1, 1).unwrap();
        let mut day: BTreeMap<String, i64> = BTreeMap::new();
        for (station, values) in rows {
            let offset = day.entry(station.to_string()).or_insert(0);
            t.push_row(
                RowKey {
                    station_id: station.to_string(),
                    date: base + chrono::Duration::days(*offset),
                },
                StationKind::LongTerm,
                values.clone(),
                1.0,
            )
            .unwrap();
            *offset += 1;
        }
        t
    }

    #[test]
    fn duplicated_column_loses_its_later_copy() {
        let t = table_from(
            &["a", "b", "c"],
            &[
                ("s1", vec![1.0, 1.0, 5.0]),
                ("s1", vec![2.0, 2.0, 9.0]),
                ("s2", vec![3.0, 3.0, 2.0]),
                ("s2", vec![4.0, 4.0, 7.0]),
            ],
        );
        let (out, log) = preprocess(&t).unwrap();
        let names: Vec<&str> = out.columns.iter().map(|c| c.name.as_str()).collect();
        assert_eq!(names, vec!["a", "c"]);
        assert_eq!(log.dropped_correlated.len(), 1);
        assert_eq!(log.dropped_correlated[0].kept, "a");
        assert_eq!(log.dropped_correlated[0].dropped, "b");
        assert!((log.dropped_correlated[0].r - 1.0).abs() < 1e-12);
        assert!(log.dropped_constant.is_empty());
    }

    #[test]
    fn imperfect_correlation_is_kept() {
        // x ascends, y follows it with alternating kicks: r well below 0.99.
        let xs = [1.0, 2.0, 3.0, 4.0, 5.0, 6.0, 7.0, 8.0];
        let t = table_from(
            &["x", "y"],
            &xs.iter()
                .enumerate()
                .map(|(i, &x)| {
                    let y = x + if i % 2 == 0 { 2.0 } else { -2.0 };
                    ("s1", vec![x, y])
                })
                .collect::<Vec<_>>(),
        );
        let (out, log) = preprocess(&t).unwrap();
        assert_eq!(out.n_cols(), 2);
        assert!(log.dropped_correlated.is_empty());
    }

    #[test]
    fn constant_and_empty_columns_are_dropped() {
        let t = table_from(
            &["zero", "varies", "void"],
            &[
                ("s1", vec![0.0, 1.0, f64::NAN]),
                ("s1", vec![0.0, 2.0, f64::NAN]),
                ("s2", vec![0.0, 5.0, f64::NAN]),
            ],
        );
        let (out, log) = preprocess(&t).unwrap();
        let names: Vec<&str> = out.columns.iter().map(|c| c.name.as_str()).collect();
        assert_eq!(names, vec!["varies"]);
        assert_eq!(log.dropped_constant, vec!["zero".to_string(), "void".to_string()]);
    }

    #[test]
    fn missing_cells_take_the_mean_of_the_other_stations() {
        let t = table_from(
            &["f", "anchor"],
            &[
                ("a", vec![f64::NAN, 0.0]),
                ("a", vec![f64::NAN, 1.0]),
                ("b", vec![2.0, 2.0]),
                ("b", vec![4.0, 0.5]),
                ("c", vec![9.0, 3.0]),
            ],
        );
        let (out, log) = preprocess(&t).unwrap();
        let f = out.column_index("f").unwrap();
        // Station a gets mean(2, 4, 9) = 5, never its own cells.
        assert_eq!(out.values[0][f], 5.0);
        assert_eq!(out.values[1][f], 5.0);
        assert_eq!(out.values[2][f], 2.0);
        assert_eq!(log.imputed.len(), 1);
        assert_eq!(log.imputed[0].column, "f");
        assert_eq!(log.imputed[0].station_id, "a");
        assert_eq!(log.imputed[0].value, 5.0);
        assert_eq!(log.imputed[0].cells, 2);
    }

    #[test]
    fn own_station_rows_never_feed_the_imputation_mean() {
        // Station b has one missing cell and two present ones; the fill must
        // average a and c only.
        let t = table_from(
            &["f", "anchor"],
            &[
                ("a", vec![10.0, 0.0]),
                ("b", vec![f64::NAN, 1.0]),
                ("b", vec![100.0, 2.0]),
                ("b", vec![200.0, 3.0]),
                ("c", vec![20.0, 4.0]),
            ],
        );
        let (out, _) = preprocess(&t).unwrap();
        let f = out.column_index("f").unwrap();
        assert_eq!(out.values[1][f], 15.0);
    }

    #[test]
    fn fit_on_training_rows_governs_the_held_out_station() {
        let full = table_from(
            &["f", "anchor"],
            &[
                ("train1", vec![2.0, 0.0]),
                ("train1", vec![4.0, 1.0]),
                ("train2", vec![6.0, 2.0]),
                ("test", vec![f64::NAN, 3.0]),
                ("test", vec![50.0, 4.0]),
            ],
        );
        let train = full.select_rows(&[0, 1, 2]).unwrap();
        let test = full.select_rows(&[3, 4]).unwrap();
        let fitted = fit_preprocess(&train).unwrap();
        let (out, imputed) = fitted.apply(&test).unwrap();
        let f = out.column_index("f").unwrap();
        // The held-out station takes the global training mean (2+4+6)/3 = 4,
        // untouched by its own 50.
        assert_eq!(out.values[0][f], 4.0);
        assert_eq!(out.values[1][f], 50.0);
        assert_eq!(imputed.len(), 1);
        assert_eq!(fitted.imputation_value("f", "test"), Some(4.0));
        assert_eq!(fitted.imputation_value("f", "train1"), Some(6.0));
    }

    #[test]
    fn apply_rejects_a_table_with_different_columns() {
        let t = table_from(&["a", "b"], &[("s", vec![1.0, 2.0]), ("s", vec![2.0, 1.0])]);
        let other = table_from(&["a", "z"], &[("s", vec![1.0, 2.0])]);
        let fitted = fit_preprocess(&t).unwrap();
        assert!(fitted.apply(&other).is_err());
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]
        /// The output is complete and a second pass changes nothing.
        #[test]
        fn output_is_complete_and_preprocess_is_idempotent(seed in 0u64..500) {
            use rand::Rng;
            let mut rng = crate::util::rng_from(seed, &[0x70726570]);
            let n_cols = rng.gen_range(2usize..6);
            let columns: Vec<String> = (0..n_cols).map(|c| format!("c{c}")).collect();
            let col_refs: Vec<&str> = columns.iter().map(String::as_str).collect();
            let duplicate = n_cols >= 2 && rng.gen_bool(0.4);
            let constant = rng.gen_bool(0.4);
            let stations = ["s1", "s2", "s3"];
            let rows: Vec<(&str, Vec<f64>)> = (0..rng.gen_range(6usize..18))
                .map(|_| {
                    let station = stations[rng.gen_range(0..3)];
                    let mut vals: Vec<f64> = (0..n_cols).map(|_| rng.gen_range(-5.0..5.0)).collect();
                    if duplicate {
                        vals[1] = vals[0];
                    }
                    if constant {
                        vals[n_cols - 1] = 7.0;
                    }
                    for v in vals.iter_mut() {
                        if rng.gen_bool(0.15) {
                            *v = f64::NAN;
                        }
                    }
                    (station, vals)
                })
                .collect();
            let t = table_from(&col_refs, &rows);
            let (once, _) = preprocess(&t).unwrap();
            prop_assert!(once.is_complete());
            let (twice, second_log) = preprocess(&once).unwrap();
            prop_assert!(second_log.is_empty());
            prop_assert_eq!(once, twice);
        }
    }
}
