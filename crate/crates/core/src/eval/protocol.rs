//! Extrapolation protocols: leave-one-station-out over long-term stations,
//! and the short-term hold-out test. Both fit preprocessing (and, when
//! configured, feature selection and hyperparameter tuning) on training rows
//! only, so nothing about a held-out station leaks into the model.

use std::collections::BTreeMap;
use std::path::Path;

use chrono::Datelike;
use serde::{Deserialize, Serialize};

use crate::counts::{CountWindow, StationKind};
use crate::error::{Error, Result};
use crate::eval::folds::{group_kfold, logo_folds, Fold};
use crate::eval::metrics::{mae, smape};
use crate::learners::search::{random_search, TrialLog};
use crate::learners::select::{select_features, SelectionMethod};
use crate::learners::{defaults, fit, EstimatorSpec, HyperParams};
use crate::pipeline::preprocess::{fit_preprocess, TransformLog};
use crate::pipeline::FeatureTable;
use crate::util::{derive_seed, hash_str, par_map};

/// What one report score means: per-day errors, or errors of annual averages.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scale {
    Daily,
    Aadb,
}

impl Scale {
    pub fn name(self) -> &'static str {
        match self {
            Scale::Daily => "daily",
            Scale::Aadb => "aadb",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "daily" => Ok(Scale::Daily),
            "aadb" => Ok(Scale::Aadb),
            other => Err(Error::config(format!("unknown scale: {other}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StationScore {
    pub station_id: String,
    pub n_test_rows: usize,
    pub mae: f64,
    pub smape: f64,
}

/// What one fold did, for audit and leakage checks.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FoldRecord {
    pub test_station: String,
    pub n_train_rows: usize,
    pub transform_log: TransformLog,
    pub selected_columns: Option<Vec<String>>,
    pub params: HyperParams,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvaluationReport {
    pub protocol: String,
    pub estimator: String,
    pub window: CountWindow,
    pub scale: Scale,
    pub stations: Vec<StationScore>,
    /// Unweighted means over stations: each location weighs equally no
    /// matter how many test rows it has.
    pub aggregate_mae: f64,
    pub aggregate_smape: f64,
    /// Stations left out of the aggregate (not enough rows for the scale).
    pub excluded: Vec<String>,
    pub folds: Vec<FoldRecord>,
}

/// Feature selection applied inside each fold.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SelectionSettings {
    pub method: SelectionMethod,
    pub k: usize,
}

/// Nested hyperparameter search applied inside each fold.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TuneSettings {
    pub n_trials: usize,
    pub cv_folds: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EvalOptions {
    pub selection: Option<SelectionSettings>,
    pub tuning: Option<TuneSettings>,
    pub seed: u64,
    /// A station-year needs at least this many daily rows to enter the
    /// annual-average comparison.
    pub min_aadb_rows: usize,
}

impl Default for EvalOptions {
    fn default() -> Self {
        EvalOptions {
            selection: None,
            tuning: None,
            seed: 0,
            min_aadb_rows: 30,
        }
    }
}

/// Pick hyperparameters for `spec` by random search, scoring each candidate
/// with station-grouped k-fold MAE on `train`. Estimators without a search
/// space come back unchanged.
pub fn tune_spec(
    train: &FeatureTable,
    spec: &EstimatorSpec,
    settings: TuneSettings,
    seed: u64,
) -> Result<(EstimatorSpec, TrialLog)> {
    let space = defaults::default_search_space(spec.kind);
    let empty_log = TrialLog { trials: Vec::new(), best_index: 0 };
    if space.is_empty() || settings.n_trials == 0 {
        return Ok((spec.clone(), empty_log));
    }
    let n_stations = train.stations().len();
    let k = settings.cv_folds.min(n_stations);
    if k < 2 {
        log::warn!("tuning skipped: only {n_stations} training stations");
        return Ok((spec.clone(), empty_log));
    }
    let plan = group_kfold(train, k, derive_seed(seed, &[hash_str("tune_folds")]))?;
    let splits: Vec<(FeatureTable, FeatureTable)> = plan
        .folds
        .iter()
        .map(|f| Ok((train.select_rows(&f.train_rows)?, train.select_rows(&f.test_rows)?)))
        .collect::<Result<_>>()?;
    let (best, log) = random_search(
        &space,
        settings.n_trials,
        derive_seed(seed, &[hash_str("tune")]),
        |trial, params| {
            let mut candidate = spec.clone();
            candidate.params.extend(params.clone());
            let mut errs = Vec::with_capacity(splits.len());
            for (fi, (tr, te)) in splits.iter().enumerate() {
                let model = fit(
                    &candidate,
                    &tr.matrix()?,
                    &tr.target,
                    None,
                    derive_seed(seed, &[trial as u64, fi as u64]),
                )?;
                let pred = clamp_counts(model.predict(&te.matrix()?)?);
                errs.push(mae(&te.target, &pred)?);
            }
            Ok(errs.iter().sum::<f64>() / errs.len() as f64)
        },
    )?;
    let mut tuned = spec.clone();
    tuned.params.extend(best);
    Ok((tuned, log))
}

/// Predicted bicycle volumes cannot be negative.
fn clamp_counts(mut pred: Vec<f64>) -> Vec<f64> {
    for p in &mut pred {
        *p = p.max(0.0);
    }
    pred
}

/// Output of one evaluated fold: held-out truth and predictions aligned with
/// the test rows of the original table.
struct FoldOutcome {
    station: String,
    rows: Vec<usize>,
    truth: Vec<f64>,
    pred: Vec<f64>,
    record: FoldRecord,
}

fn run_fold(
    table: &FeatureTable,
    fold: &Fold,
    spec: &EstimatorSpec,
    opts: &EvalOptions,
) -> Result<FoldOutcome> {
    let station = fold
        .test_station
        .clone()
        .unwrap_or_else(|| "short_term".to_string());
    let fold_seed = derive_seed(opts.seed, &[hash_str(&station)]);
    let train = table.select_rows(&fold.train_rows)?;
    let test = table.select_rows(&fold.test_rows)?;

    let fitted_pre = fit_preprocess(&train)?;
    let (train_p, imputed_train) = fitted_pre.apply(&train)?;
    let (test_p, imputed_test) = fitted_pre.apply(&test)?;
    let mut transform_log = TransformLog {
        dropped_correlated: fitted_pre.dropped_correlated().to_vec(),
        dropped_constant: fitted_pre.dropped_constant().to_vec(),
        imputed: imputed_train,
    };
    transform_log.imputed.extend(imputed_test);

    let (train_s, test_s, selected_columns) = match opts.selection {
        Some(s) => {
            let k = s.k.min(train_p.n_cols());
            let keep = select_features(s.method, &train_p, k, fold_seed)?;
            let names = keep.iter().map(|&c| train_p.columns[c].name.clone()).collect();
            (
                train_p.select_columns(&keep)?,
                test_p.select_columns(&keep)?,
                Some(names),
            )
        }
        None => (train_p, test_p, None),
    };

    let used_spec = match opts.tuning {
        Some(t) => tune_spec(&train_s, spec, t, fold_seed)?.0,
        None => spec.clone(),
    };

    let model = fit(&used_spec, &train_s.matrix()?, &train_s.target, None, fold_seed)?;
    let pred = clamp_counts(model.predict(&test_s.matrix()?)?);
    Ok(FoldOutcome {
        station,
        rows: fold.test_rows.clone(),
        truth: test_s.target.clone(),
        pred,
        record: FoldRecord {
            test_station: fold.test_station.clone().unwrap_or_default(),
            n_train_rows: fold.train_rows.len(),
            transform_log,
            selected_columns,
            params: used_spec.params,
        },
    })
}

/// Collapse per-day truth/prediction pairs into one pair of annual averages
/// per calendar year, dropping years with fewer than `min_rows` days. `rows`
/// are indices into `table` aligned with `truth` and `pred`.
pub(crate) fn annual_average_pairs(
    table: &FeatureTable,
    station: &str,
    rows: &[usize],
    truth: &[f64],
    pred: &[f64],
    min_rows: usize,
) -> (Vec<f64>, Vec<f64>) {
    let mut by_year: BTreeMap<i32, (Vec<f64>, Vec<f64>)> = BTreeMap::new();
    for (i, &row) in rows.iter().enumerate() {
        let year = table.rows[row].date.year();
        let e = by_year.entry(year).or_default();
        e.0.push(truth[i]);
        e.1.push(pred[i]);
    }
    let mut annual_truth = Vec::new();
    let mut annual_pred = Vec::new();
    for (year, (t, p)) in &by_year {
        if t.len() >= min_rows {
            annual_truth.push(t.iter().sum::<f64>() / t.len() as f64);
            annual_pred.push(p.iter().sum::<f64>() / p.len() as f64);
        } else {
            log::warn!(
                "station {station} year {year}: {} rows < {min_rows}, skipping annual average",
                t.len()
            );
        }
    }
    (annual_truth, annual_pred)
}

/// Score one station's fold outcome at the requested scale. `None` when the
/// station has no qualifying observations at that scale.
fn score_station(
    table: &FeatureTable,
    out: &FoldOutcome,
    scale: Scale,
    min_aadb_rows: usize,
) -> Result<Option<StationScore>> {
    match scale {
        Scale::Daily => Ok(Some(StationScore {
            station_id: out.station.clone(),
            n_test_rows: out.truth.len(),
            mae: mae(&out.truth, &out.pred)?,
            smape: smape(&out.truth, &out.pred)?,
        })),
        Scale::Aadb => {
            let (annual_truth, annual_pred) = annual_average_pairs(
                table,
                &out.station,
                &out.rows,
                &out.truth,
                &out.pred,
                min_aadb_rows,
            );
            if annual_truth.is_empty() {
                return Ok(None);
            }
            Ok(Some(StationScore {
                station_id: out.station.clone(),
                n_test_rows: annual_truth.len(),
                mae: mae(&annual_truth, &annual_pred)?,
                smape: smape(&annual_truth, &annual_pred)?,
            }))
        }
    }
}

fn finish_report(
    table: &FeatureTable,
    protocol: &str,
    spec: &EstimatorSpec,
    scale: Scale,
    opts: &EvalOptions,
    outcomes: Vec<FoldOutcome>,
) -> Result<EvaluationReport> {
    let mut stations = Vec::new();
    let mut excluded = Vec::new();
    let mut folds = Vec::new();
    for out in &outcomes {
        match score_station(table, out, scale, opts.min_aadb_rows)? {
            Some(score) => stations.push(score),
            None => {
                log::warn!("station {} excluded from the {} report", out.station, scale.name());
                excluded.push(out.station.clone());
            }
        }
    }
    for out in outcomes {
        folds.push(out.record);
    }
    if stations.is_empty() {
        return Err(Error::data(format!(
            "no station has enough observations for the {} scale",
            scale.name()
        )));
    }
    let n = stations.len() as f64;
    let aggregate_mae = stations.iter().map(|s| s.mae).sum::<f64>() / n;
    let aggregate_smape = stations.iter().map(|s| s.smape).sum::<f64>() / n;
    Ok(EvaluationReport {
        protocol: protocol.to_string(),
        estimator: spec.kind.name().to_string(),
        window: table.window,
        scale,
        stations,
        aggregate_mae,
        aggregate_smape,
        excluded,
        folds,
    })
}

/// Leave-one-station-out extrapolation over the long-term stations: each is
/// predicted by a model that never saw it, then scored at `scale`.
pub fn logo_evaluate(
    table: &FeatureTable,
    spec: &EstimatorSpec,
    scale: Scale,
    opts: &EvalOptions,
) -> Result<EvaluationReport> {
    let plan = logo_folds(table)?;
    let outcomes: Vec<Result<FoldOutcome>> =
        par_map(plan.folds.len(), |fi| run_fold(table, &plan.folds[fi], spec, opts));
    let outcomes = outcomes.into_iter().collect::<Result<Vec<_>>>()?;
    finish_report(table, "logo", spec, scale, opts, outcomes)
}

/// Fit once on every long-term row and score each short-term station as its
/// own test set. The table must carry daytime counts, which is what
/// short-term counters record.
pub fn shortterm_evaluate(
    table: &FeatureTable,
    spec: &EstimatorSpec,
    opts: &EvalOptions,
) -> Result<EvaluationReport> {
    if table.window != CountWindow::Daytime {
        return Err(Error::config(
            "short-term evaluation needs a table built over the daytime window",
        ));
    }
    let by_station = table.station_rows();
    let mut train_rows = Vec::new();
    let mut short_stations = Vec::new();
    for (station, rows) in &by_station {
        match table.station_kinds[station] {
            StationKind::LongTerm => train_rows.extend_from_slice(rows),
            StationKind::ShortTerm => short_stations.push(station.clone()),
        }
    }
    if short_stations.is_empty() {
        return Err(Error::data("no short-term stations to evaluate"));
    }
    if train_rows.is_empty() {
        return Err(Error::data("no long-term rows to train on"));
    }
    train_rows.sort_unstable();

    // One fold per short-term station, all sharing the same training rows;
    // the model is identical across folds because the seed depends only on
    // the training side.
    let shared_seed_station = "short_term_train".to_string();
    let outcomes: Vec<Result<FoldOutcome>> = par_map(short_stations.len(), |si| {
        let fold = Fold {
            test_station: Some(short_stations[si].clone()),
            train_rows: train_rows.clone(),
            test_rows: by_station[&short_stations[si]].clone(),
        };
        let mut out = run_fold(
            table,
            &Fold {
                test_station: Some(shared_seed_station.clone()),
                ..fold.clone()
            },
            spec,
            opts,
        )?;
        out.station = short_stations[si].clone();
        out.record.test_station = short_stations[si].clone();
        Ok(out)
    });
    let outcomes = outcomes.into_iter().collect::<Result<Vec<_>>>()?;
    finish_report(table, "short_term", spec, Scale::Daily, opts, outcomes)
}

/// Per-station CSV: one line per station with its errors and a flag marking
/// stations whose SMAPE sits more than one standard deviation from the mean.
pub fn write_station_csv(report: &EvaluationReport, path: &Path) -> Result<()> {
    let n = report.stations.len() as f64;
    let mean = report.stations.iter().map(|s| s.smape).sum::<f64>() / n;
    let sd = if report.stations.len() > 1 {
        (report.stations.iter().map(|s| (s.smape - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
    } else {
        0.0
    };
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["station_id", "n_test_rows", "mae", "smape", "beyond_one_sd"])?;
    for s in &report.stations {
        let flagged = (s.smape - mean).abs() > sd && report.stations.len() > 1;
        w.write_record([
            s.station_id.as_str(),
            &s.n_test_rows.to_string(),
            &s.mae.to_string(),
            &s.smape.to_string(),
            if flagged { "1" } else { "0" },
        ])?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::learners::EstimatorKind;
    use crate::pipeline::{ColumnDef, FeatureGroup, RowKey};
    use chrono::NaiveDate;

    /// A table whose single feature equals the target, so a linear model can
    /// predict perfectly; targets vary by station and day.
    fn oracle_table(stations: &[(&str, StationKind, usize)], window: CountWindow) -> FeatureTable {
        let mut t = FeatureTable::new(
            window,
            vec![
                ColumnDef { name: "signal".into(), group: FeatureGroup::Crowdsourced },
                ColumnDef { name: "noise".into(), group: FeatureGroup::Weather },
            ],
        )
        .unwrap();
        for (si, (id, kind, n)) in stations.iter().enumerate() {
            for d in 0..*n {
                let y = 100.0 + 40.0 * si as f64 + (d % 9) as f64 * 3.0;
                t.push_row(
                    RowKey {
                        station_id: id.to_string(),
                        date: NaiveDate::from_ymd_opt(2019, 1, 1).unwrap()
                            + chrono::Duration::days(d as i64),
                    },
                    *kind,
                    vec![y, ((si + 7 * d) % 5) as f64],
                    y,
                )
                .unwrap();
            }
        }
        t
    }

    fn long3() -> FeatureTable {
        oracle_table(
            &[
                ("a", StationKind::LongTerm, 40),
                ("b", StationKind::LongTerm, 40),
                ("c", StationKind::LongTerm, 40),
            ],
            CountWindow::FullDay,
        )
    }

    #[test]
    fn perfect_predictor_scores_zero_everywhere() {
        let t = long3();
        let spec = EstimatorSpec::new(EstimatorKind::Linear);
        let report =
            logo_evaluate(&t, &spec, Scale::Daily, &EvalOptions::default()).unwrap();
        assert_eq!(report.stations.len(), 3);
        assert!(report.aggregate_mae < 1e-6, "mae {}", report.aggregate_mae);
        assert!(report.aggregate_smape < 1e-6);
        let tested: Vec<&str> =
            report.stations.iter().map(|s| s.station_id.as_str()).collect();
        assert_eq!(tested, vec!["a", "b", "c"]);
    }

    #[test]
    fn baseline_mean_matches_the_closed_form() {
        let t = long3();
        let spec = EstimatorSpec::new(EstimatorKind::BaselineMean);
        let report =
            logo_evaluate(&t, &spec, Scale::Daily, &EvalOptions::default()).unwrap();
        let by_station = t.station_rows();
        for score in &report.stations {
            let others: Vec<f64> = t
                .rows
                .iter()
                .enumerate()
                .filter(|(_, r)| {
                    r.station_id != score.station_id
                        && t.station_kinds[&r.station_id] == StationKind::LongTerm
                })
                .map(|(i, _)| t.target[i])
                .collect();
            let m = others.iter().sum::<f64>() / others.len() as f64;
            let own: Vec<f64> =
                by_station[&score.station_id].iter().map(|&r| t.target[r]).collect();
            let expect = own.iter().map(|y| (y - m).abs()).sum::<f64>() / own.len() as f64;
            assert!((score.mae - expect).abs() < 1e-12, "{}", score.station_id);
        }
        let agg = report.stations.iter().map(|s| s.mae).sum::<f64>()
            / report.stations.len() as f64;
        assert_eq!(report.aggregate_mae, agg);
    }

    #[test]
    fn aadb_of_a_perfect_constant_predictor_is_exactly_zero() {
        // Constant target: the baseline predicts it exactly, so annual
        // averages agree to the bit.
        let mut t = FeatureTable::new(
            CountWindow::FullDay,
            vec![ColumnDef { name: "f".into(), group: FeatureGroup::Time }],
        )
        .unwrap();
        for id in ["a", "b"] {
            for d in 0..35 {
                t.push_row(
                    RowKey {
                        station_id: id.to_string(),
                        date: NaiveDate::from_ymd_opt(2020, 1, 1).unwrap()
                            + chrono::Duration::days(d),
                    },
                    StationKind::LongTerm,
                    vec![d as f64],
                    250.0,
                )
                .unwrap();
            }
        }
        let spec = EstimatorSpec::new(EstimatorKind::BaselineMean);
        let report = logo_evaluate(&t, &spec, Scale::Aadb, &EvalOptions::default()).unwrap();
        assert_eq!(report.aggregate_mae, 0.0);
        assert_eq!(report.aggregate_smape, 0.0);
        assert_eq!(report.stations[0].n_test_rows, 1);
    }

    #[test]
    fn aadb_drops_station_years_with_too_few_rows() {
        let t = oracle_table(
            &[
                ("a", StationKind::LongTerm, 40),
                ("b", StationKind::LongTerm, 40),
                ("tiny", StationKind::LongTerm, 5),
            ],
            CountWindow::FullDay,
        );
        let spec = EstimatorSpec::new(EstimatorKind::Linear);
        let report = logo_evaluate(&t, &spec, Scale::Aadb, &EvalOptions::default()).unwrap();
        assert_eq!(report.stations.len(), 2);
        assert_eq!(report.excluded, vec!["tiny".to_string()]);
        // Daily scale keeps it.
        let daily = logo_evaluate(&t, &spec, Scale::Daily, &EvalOptions::default()).unwrap();
        assert_eq!(daily.stations.len(), 3);
        assert!(daily.excluded.is_empty());
    }

    #[test]
    fn duplicating_a_station_test_rows_leaves_its_score_alone() {
        let t = long3();
        let spec = EstimatorSpec::new(EstimatorKind::BaselineMean);
        let before = logo_evaluate(&t, &spec, Scale::Daily, &EvalOptions::default()).unwrap();

        let mut doubled = t.clone();
        for (i, key) in t.rows.iter().enumerate() {
            if key.station_id == "b" {
                doubled
                    .push_row(key.clone(), StationKind::LongTerm, t.values[i].clone(), t.target[i])
                    .unwrap();
            }
        }
        let after = logo_evaluate(&doubled, &spec, Scale::Daily, &EvalOptions::default()).unwrap();
        let score = |r: &EvaluationReport| {
            r.stations.iter().find(|s| s.station_id == "b").unwrap().clone()
        };
        // Identical up to summation order: the mean over the doubled row set
        // is the mean over the original rows.
        assert!((score(&before).mae - score(&after).mae).abs() < 1e-12);
        assert!((score(&before).smape - score(&after).smape).abs() < 1e-12);
        // The aggregate is a station mean, never a row mean.
        for r in [&before, &after] {
            let agg =
                r.stations.iter().map(|s| s.mae).sum::<f64>() / r.stations.len() as f64;
            assert_eq!(r.aggregate_mae, agg);
        }
    }

    #[test]
    fn folds_never_leak_and_logs_are_reproducible() {
        let mut t = long3();
        // Punch some holes so imputation has work to do.
        let idx = t.column_index("noise").unwrap();
        for r in [3usize, 17, 41, 80] {
            t.values[r][idx] = f64::NAN;
        }
        let spec = EstimatorSpec::new(EstimatorKind::Linear);
        let opts = EvalOptions::default();
        let report = logo_evaluate(&t, &spec, Scale::Daily, &opts).unwrap();
        let plan = logo_folds(&t).unwrap();
        for (fold, record) in plan.folds.iter().zip(&report.folds) {
            let station = fold.test_station.as_deref().unwrap();
            assert_eq!(record.test_station, station);
            for &r in &fold.train_rows {
                assert_ne!(t.rows[r].station_id, station);
            }
            // Refit preprocessing on the training rows alone and compare.
            let train = t.select_rows(&fold.train_rows).unwrap();
            let again = fit_preprocess(&train).unwrap();
            assert_eq!(
                again.dropped_correlated(),
                record.transform_log.dropped_correlated.as_slice()
            );
            assert_eq!(
                again.dropped_constant(),
                record.transform_log.dropped_constant.as_slice()
            );
            for imp in &record.transform_log.imputed {
                assert_eq!(
                    again.imputation_value(&imp.column, &imp.station_id),
                    Some(imp.value),
                    "imputation for {}:{}",
                    imp.column,
                    imp.station_id
                );
            }
        }
    }

    #[test]
    fn short_term_stations_score_against_a_long_term_fit() {
        let t = oracle_table(
            &[
                ("a", StationKind::LongTerm, 30),
                ("b", StationKind::LongTerm, 30),
                ("s1", StationKind::ShortTerm, 12),
                ("s2", StationKind::ShortTerm, 9),
            ],
            CountWindow::Daytime,
        );
        let spec = EstimatorSpec::new(EstimatorKind::BaselineMean);
        let report = shortterm_evaluate(&t, &spec, &EvalOptions::default()).unwrap();
        assert_eq!(report.protocol, "short_term");
        let tested: Vec<&str> =
            report.stations.iter().map(|s| s.station_id.as_str()).collect();
        assert_eq!(tested, vec!["s1", "s2"]);
        // The model is the mean of all long-term rows.
        let long_rows: Vec<f64> = t
            .rows
            .iter()
            .enumerate()
            .filter(|(_, r)| t.station_kinds[&r.station_id] == StationKind::LongTerm)
            .map(|(i, _)| t.target[i])
            .collect();
        let m = long_rows.iter().sum::<f64>() / long_rows.len() as f64;
        let own: Vec<f64> = t
            .rows
            .iter()
            .enumerate()
            .filter(|(_, r)| r.station_id == "s1")
            .map(|(i, _)| t.target[i])
            .collect();
        let expect = own.iter().map(|y| (y - m).abs()).sum::<f64>() / own.len() as f64;
        assert!((report.stations[0].mae - expect).abs() < 1e-12);
    }

    #[test]
    fn short_term_protocol_guards_its_preconditions() {
        let full_day = oracle_table(
            &[("a", StationKind::LongTerm, 10), ("s", StationKind::ShortTerm, 5)],
            CountWindow::FullDay,
        );
        let spec = EstimatorSpec::new(EstimatorKind::BaselineMean);
        assert!(shortterm_evaluate(&full_day, &spec, &EvalOptions::default()).is_err());
        let no_short = oracle_table(
            &[("a", StationKind::LongTerm, 10), ("b", StationKind::LongTerm, 10)],
            CountWindow::Daytime,
        );
        assert!(shortterm_evaluate(&no_short, &spec, &EvalOptions::default()).is_err());
    }

    #[test]
    fn station_csv_flags_outliers_beyond_one_sd() {
        let report = EvaluationReport {
            protocol: "logo".into(),
            estimator: "baseline_mean".into(),
            window: CountWindow::FullDay,
            scale: Scale::Daily,
            stations: vec![
                StationScore { station_id: "a".into(), n_test_rows: 5, mae: 1.0, smape: 10.0 },
                StationScore { station_id: "b".into(), n_test_rows: 5, mae: 1.0, smape: 12.0 },
                StationScore { station_id: "c".into(), n_test_rows: 5, mae: 1.0, smape: 11.0 },
                StationScore { station_id: "d".into(), n_test_rows: 5, mae: 9.0, smape: 60.0 },
            ],
            aggregate_mae: 3.0,
            aggregate_smape: 23.25,
            excluded: vec![],
            folds: vec![],
        };
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("stations.csv");
        write_station_csv(&report, &path).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines.len(), 5);
        assert!(lines[4].starts_with("d,") && lines[4].ends_with(",1"));
        assert!(lines[1].ends_with(",0"));
    }

    #[test]
    fn selection_and_tuning_run_inside_the_fold() {
        let t = oracle_table(
            &[
                ("a", StationKind::LongTerm, 25),
                ("b", StationKind::LongTerm, 25),
                ("c", StationKind::LongTerm, 25),
                ("d", StationKind::LongTerm, 25),
            ],
            CountWindow::FullDay,
        );
        let spec = EstimatorSpec::new(EstimatorKind::DecisionTree);
        let opts = EvalOptions {
            selection: Some(SelectionSettings {
                method: SelectionMethod::UnivariateKBest,
                k: 1,
            }),
            tuning: Some(TuneSettings { n_trials: 3, cv_folds: 2 }),
            seed: 9,
            ..EvalOptions::default()
        };
        let report = logo_evaluate(&t, &spec, Scale::Daily, &opts).unwrap();
        for fold in &report.folds {
            assert_eq!(
                fold.selected_columns.as_deref(),
                Some(&["signal".to_string()][..])
            );
            assert!(!fold.params.is_empty(), "tuning should pin parameters");
        }
        // The signal column alone supports a decent tree fit.
        assert!(report.aggregate_smape < 60.0);
    }
}
