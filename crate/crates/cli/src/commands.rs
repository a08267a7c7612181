//! One function per subcommand: read inputs, run the engine, write stamped
//! artifacts into the command's output directory.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use chrono::NaiveDate;
use serde_json::json;

use velo_core::analysis::{
    grouped_permutation_importance, simulate_sampling, ten_day_headline, write_curve_csv,
    write_importance_csv, GpiOptions, SamplingOptions, Scenario, Strategy,
};
use velo_core::counts::{CountWindow, HourlyCount, Station, StationKind};
use velo_core::eval::{
    logo_evaluate, shortterm_evaluate, tune_spec, write_station_csv, EvalOptions,
    EvaluationReport, Metric,
};
use velo_core::geo::segment_midpoint;
use velo_core::ingest::bundle::{BundleConfig, SourceBundle};
use velo_core::ingest::{
    generate_synthetic_city, load_bundle, reconstruct_trips, route_trips, save_bundle, save_trips,
    StreetGraph, Trip,
};
use velo_core::learners::select::select_features;
use velo_core::learners::{fit, EstimatorSpec, Fitted, ModelFile};
use velo_core::pipeline::{
    assemble_with, clean_routed, fit_preprocess, load_table, preprocess, save_table,
    CleaningRules, FeatureGroup, FeatureTable, FittedPreprocess, RemovalReport, TransformLog,
};
use velo_core::{Error, Result};

use crate::config::{resolve_bundle, RunConfig};
use crate::output::{prepare_output_dir, write_json, Meta};
use crate::schema;

fn require_seed(seed: Option<u64>, step: &str) -> Result<u64> {
    seed.ok_or_else(|| {
        Error::config(format!(
            "no seed for this step: pass --seed or set [seeds].{step} in the config"
        ))
    })
}

/// Resolve, check, and load the bundle, applying the config's study periods
/// over the ones stored in the bundle metadata when given.
fn load_bundle_for(cfg: &RunConfig) -> Result<SourceBundle> {
    let source = resolve_bundle(&cfg.paths)?;
    let override_config = match cfg.study_periods()? {
        None => None,
        Some(periods) => {
            let meta_path = source.dir.join("bundle_meta.json");
            let text = fs::read_to_string(&meta_path)
                .map_err(|e| Error::data(format!("{}: {e}", meta_path.display())))?;
            let mut meta: BundleConfig = serde_json::from_str(&text)?;
            meta.study_periods = periods;
            Some(meta)
        }
    };
    load_bundle(&source.dir, override_config)
}

/// Bike-share trips ready for feature building: taken from the bundle (or
/// reconstructed from availability snapshots when absent), routed on the
/// street graph for route geometry, then cleaned.
fn prepare_trips(
    bundle: &SourceBundle,
    rules: &CleaningRules,
) -> Result<(Vec<Trip>, RemovalReport)> {
    let base = if bundle.trips.is_empty() && !bundle.snapshots.is_empty() {
        reconstruct_trips(&bundle.snapshots)?
    } else {
        bundle.trips.clone()
    };
    let graph = StreetGraph::new(bundle.street_graph.clone());
    let outcome = route_trips(&graph, base);
    clean_routed(outcome, rules)
}

fn load_table_dir(dir: &Path) -> Result<FeatureTable> {
    let csv = dir.join("table.csv");
    let manifest = dir.join("table.manifest.json");
    for p in [&csv, &manifest] {
        if !p.is_file() {
            return Err(Error::config(format!(
                "table file {} does not exist; run `velo features` first or set [paths].table_dir",
                p.display()
            )));
        }
    }
    load_table(&csv, &manifest)
}

fn eval_options(cfg: &RunConfig, seed: u64) -> Result<EvalOptions> {
    Ok(EvalOptions {
        selection: cfg.selection_settings()?,
        tuning: cfg.tune_settings(),
        seed,
        min_aadb_rows: cfg.evaluation.min_aadb_rows,
    })
}

pub fn synth(cfg: &RunConfig, hash: &str) -> Result<()> {
    let seed = require_seed(cfg.seeds.synth, "synth")?;
    let sc = cfg.synth_config()?;
    let (bundle, truth) = generate_synthetic_city(seed, &sc)?;
    let out = &cfg.paths.bundle_dir;
    let meta = Meta::new(hash);
    prepare_output_dir(out, &meta, "synth")?;
    save_bundle(&bundle, out)?;
    write_json(&out.join("synth_truth.json"), &json!({ "meta": meta, "truth": truth }))?;
    println!(
        "wrote synthetic bundle to {} ({} stations, {} days, {} trips)",
        out.display(),
        bundle.stations.len(),
        sc.n_days,
        bundle.trips.len()
    );
    Ok(())
}

pub fn clean(cfg: &RunConfig, hash: &str) -> Result<()> {
    let bundle = load_bundle_for(cfg)?;
    if bundle.trips.is_empty() && bundle.snapshots.is_empty() {
        return Err(Error::data(
            "bundle has neither trips.csv nor snapshots.ndjson; nothing to clean",
        ));
    }
    let rules = cfg.cleaning_rules()?;
    let (trips, report) = prepare_trips(&bundle, &rules)?;
    let out = cfg.paths.output_dir.join("clean");
    let meta = Meta::new(hash);
    prepare_output_dir(&out, &meta, "clean")?;
    save_trips(&trips, &out.join("trips.csv"))?;
    write_json(&out.join("removal_report.json"), &json!({ "meta": meta, "report": report }))?;
    println!(
        "kept {} of {} trips; artifacts in {}",
        report.remaining,
        report.input,
        out.display()
    );
    Ok(())
}

pub fn features(cfg: &RunConfig, hash: &str) -> Result<()> {
    let bundle = load_bundle_for(cfg)?;
    let rules = cfg.cleaning_rules()?;
    let window = cfg.window()?;
    let (trips, report) = prepare_trips(&bundle, &rules)?;
    let table = assemble_with(&bundle, &trips, window, &cfg.radii())?;
    let out = cfg.table_dir()?;
    let meta = Meta::new(hash);
    prepare_output_dir(&out, &meta, "features")?;
    save_table(&table, &out.join("table.csv"), &out.join("table.manifest.json"))?;
    write_json(&out.join("removal_report.json"), &json!({ "meta": meta, "report": report }))?;
    println!(
        "assembled {} rows x {} columns ({}) into {}",
        table.n_rows(),
        table.n_cols(),
        window.name(),
        out.display()
    );
    Ok(())
}

/// The training pipeline shared by `train` and `predict-map`: preprocess
/// fitted on the training rows, optional column selection, optional
/// hyperparameter search, then the final fit. Mirrors the in-fold pipeline
/// of the evaluation protocols.
struct TrainedPipeline {
    fitted: Fitted,
    spec: EstimatorSpec,
    pre: FittedPreprocess,
    selected: Option<Vec<usize>>,
    selected_names: Option<Vec<String>>,
    columns: Vec<String>,
    transform_log: TransformLog,
    n_train_rows: usize,
}

fn train_pipeline(
    cfg: &RunConfig,
    table: &FeatureTable,
    train_rows: &[usize],
    seed: u64,
) -> Result<TrainedPipeline> {
    let spec = cfg.estimator_spec()?;
    let train = table.select_rows(train_rows)?;
    let pre = fit_preprocess(&train)?;
    let (train_p, imputed) = pre.apply(&train)?;
    let transform_log = TransformLog {
        dropped_correlated: pre.dropped_correlated().to_vec(),
        dropped_constant: pre.dropped_constant().to_vec(),
        imputed,
    };
    let (train_s, selected, selected_names) = match cfg.selection_settings()? {
        Some(s) => {
            let k = s.k.min(train_p.n_cols());
            let keep = select_features(s.method, &train_p, k, seed)?;
            let names: Vec<String> =
                keep.iter().map(|&c| train_p.columns[c].name.clone()).collect();
            (train_p.select_columns(&keep)?, Some(keep), Some(names))
        }
        None => (train_p, None, None),
    };
    let used_spec = match cfg.tune_settings() {
        Some(t) => tune_spec(&train_s, &spec, t, seed)?.0,
        None => spec,
    };
    let fitted = fit(&used_spec, &train_s.matrix()?, &train_s.target, None, seed)?;
    Ok(TrainedPipeline {
        fitted,
        spec: used_spec,
        pre,
        selected,
        selected_names,
        columns: train_s.columns.iter().map(|c| c.name.clone()).collect(),
        transform_log,
        n_train_rows: train_rows.len(),
    })
}

fn long_term_rows(table: &FeatureTable) -> Result<Vec<usize>> {
    let rows: Vec<usize> = (0..table.n_rows())
        .filter(|&r| {
            table.station_kinds[&table.rows[r].station_id] == StationKind::LongTerm
        })
        .collect();
    if rows.is_empty() {
        return Err(Error::data("table has no long-term station rows to train on"));
    }
    Ok(rows)
}

pub fn train(cfg: &RunConfig, hash: &str) -> Result<()> {
    let table = load_table_dir(&cfg.table_dir()?)?;
    let seed = require_seed(cfg.seeds.train, "train")?;
    let rows = long_term_rows(&table)?;
    let trained = train_pipeline(cfg, &table, &rows, seed)?;
    let model = ModelFile::from_fitted(&trained.fitted);
    let out = cfg.paths.output_dir.join("train");
    let meta = Meta::new(hash);
    prepare_output_dir(&out, &meta, "train")?;
    write_json(
        &out.join("model.json"),
        &json!({
            "meta": meta,
            "estimator": trained.spec.kind.name(),
            "params": trained.spec.params,
            "window": table.window,
            "n_train_rows": trained.n_train_rows,
            "columns": trained.columns,
            "selected_columns": trained.selected_names,
            "transform_log": trained.transform_log,
            "model": model,
        }),
    )?;
    println!(
        "fitted {} on {} rows ({} columns); model in {}",
        trained.spec.kind.name(),
        trained.n_train_rows,
        trained.columns.len(),
        out.display()
    );
    Ok(())
}

fn write_report(
    report: &EvaluationReport,
    out: &Path,
    meta: &Meta,
    command: &str,
) -> Result<()> {
    prepare_output_dir(out, meta, command)?;
    write_json(&out.join("report.json"), &json!({ "meta": meta, "report": report }))?;
    write_station_csv(report, &out.join("stations.csv"))?;
    println!(
        "{} with {}: aggregate MAE {:.3}, SMAPE {:.3} over {} stations ({} excluded); report in {}",
        report.protocol,
        report.estimator,
        report.aggregate_mae,
        report.aggregate_smape,
        report.stations.len(),
        report.excluded.len(),
        out.display()
    );
    Ok(())
}

pub fn eval_logo(cfg: &RunConfig, hash: &str) -> Result<()> {
    let table = load_table_dir(&cfg.table_dir()?)?;
    let seed = require_seed(cfg.seeds.eval, "eval")?;
    let opts = eval_options(cfg, seed)?;
    let report = logo_evaluate(&table, &cfg.estimator_spec()?, cfg.scale()?, &opts)?;
    let out = cfg.paths.output_dir.join("eval-logo");
    write_report(&report, &out, &Meta::new(hash), "eval-logo")
}

pub fn eval_short(cfg: &RunConfig, hash: &str) -> Result<()> {
    let table = load_table_dir(&cfg.table_dir()?)?;
    let seed = require_seed(cfg.seeds.eval, "eval")?;
    let opts = eval_options(cfg, seed)?;
    let report = shortterm_evaluate(&table, &cfg.estimator_spec()?, &opts)?;
    let out = cfg.paths.output_dir.join("eval-short");
    write_report(&report, &out, &Meta::new(hash), "eval-short")
}

pub fn importance(cfg: &RunConfig, hash: &str) -> Result<()> {
    let table = load_table_dir(&cfg.table_dir()?)?;
    let seed = require_seed(cfg.seeds.importance, "importance")?;
    let (complete, _) = preprocess(&table)?;
    let groups = if cfg.importance.groups.is_empty() {
        None
    } else {
        Some(
            cfg.importance
                .groups
                .iter()
                .map(|s| FeatureGroup::parse(s))
                .collect::<Result<Vec<_>>>()?,
        )
    };
    let opts = GpiOptions {
        n_permutations: cfg.importance.n_permutations,
        n_repeats: cfg.importance.n_repeats,
        k_folds: cfg.importance.k_folds,
        seed,
        groups,
    };
    let metric = Metric::parse(&cfg.importance.metric)?;
    let imp = grouped_permutation_importance(&complete, &cfg.estimator_spec()?, metric, &opts)?;
    let out = cfg.paths.output_dir.join("importance");
    let meta = Meta::new(hash);
    prepare_output_dir(&out, &meta, "importance")?;
    write_json(&out.join("importance.json"), &json!({ "meta": meta, "importance": imp }))?;
    write_importance_csv(&imp, &out.join("importance.csv"))?;
    let top = imp
        .groups
        .first()
        .map(|g| format!("{} ({:+.3})", g.group.name(), g.mean_gain))
        .unwrap_or_default();
    println!(
        "importance of {} groups with {}; top: {}; artifacts in {}",
        imp.groups.len(),
        imp.estimator,
        top,
        out.display()
    );
    Ok(())
}

pub fn simulate(cfg: &RunConfig, hash: &str, headline: bool) -> Result<()> {
    let table = load_table_dir(&cfg.table_dir()?)?;
    let seed = require_seed(cfg.seeds.sampling, "sampling")?;
    let strategy = Strategy::parse(&cfg.sampling.strategy)?;
    let scenario = Scenario::parse(&cfg.sampling.scenario)?;
    let opts = SamplingOptions {
        max_days: cfg.sampling.max_days,
        reps: cfg.sampling.reps,
        weight_share: cfg.sampling.weight_share,
        seed,
        metric: Metric::parse(&cfg.sampling.metric)?,
        min_rows: (cfg.sampling.min_rows > 0).then_some(cfg.sampling.min_rows),
        days: (!cfg.sampling.days.is_empty()).then(|| cfg.sampling.days.clone()),
    };
    let spec = cfg.estimator_spec()?;
    let curve = simulate_sampling(&table, &spec, strategy, scenario, &opts)?;
    let out = cfg.paths.output_dir.join("simulate");
    let meta = Meta::new(hash);
    prepare_output_dir(&out, &meta, "simulate")?;
    write_json(&out.join("curve.json"), &json!({ "meta": meta, "curve": curve }))?;
    write_curve_csv(&curve, &out.join("curve.csv"))?;
    if headline {
        let (daily, aadb) = ten_day_headline(&table, &spec, seed)?;
        write_json(&out.join("headline_daily.json"), &json!({ "meta": meta, "report": daily }))?;
        write_json(&out.join("headline_aadb.json"), &json!({ "meta": meta, "report": aadb }))?;
    }
    let last = curve.points.last();
    println!(
        "{}/{} curve over {} stations, {} reps{}; artifacts in {}",
        curve.strategy.name(),
        curve.scenario.name(),
        curve.n_stations,
        curve.reps,
        last.map(|p| format!("; {} days -> {:.3}", p.days, p.mean)).unwrap_or_default(),
        out.display()
    );
    Ok(())
}

/// Pseudo-station id for a street segment while predicting the map. The
/// prefix keeps the ids disjoint from real stations.
const SEGMENT_STATION_PREFIX: &str = "__segment__";

pub fn predict_map(cfg: &RunConfig, hash: &str, date: NaiveDate) -> Result<()> {
    let bundle = load_bundle_for(cfg)?;
    if !bundle.config.contains(date) {
        return Err(Error::config(format!(
            "date {date} is outside the bundle's study periods"
        )));
    }
    if bundle.street_graph.is_empty() {
        return Err(Error::data("street graph has no segments to predict for"));
    }
    let seed = require_seed(cfg.seeds.predict, "predict")?;
    let rules = cfg.cleaning_rules()?;
    let (trips, _) = prepare_trips(&bundle, &rules)?;

    // One pseudo-station per segment midpoint, carrying a zero count for
    // every hour of `date`, gives the assembled table exactly one feature
    // row per segment built by the same code path as the training rows.
    let mut augmented = bundle.clone();
    for edge in &bundle.street_graph {
        let id = format!("{SEGMENT_STATION_PREFIX}{}", edge.segment.id);
        augmented.stations.push(Station {
            id: id.clone(),
            location: segment_midpoint(&edge.segment),
            kind: StationKind::ShortTerm,
            installed_year: None,
        });
        for h in 0..24 {
            augmented.counts.push(HourlyCount {
                station_id: id.clone(),
                ts: date.and_hms_opt(h, 0, 0).unwrap(),
                count: 0,
            });
        }
    }
    let table = assemble_with(&augmented, &trips, CountWindow::FullDay, &cfg.radii())?;

    let mut train_rows = Vec::new();
    let mut segment_row: BTreeMap<&str, usize> = BTreeMap::new();
    for (i, key) in table.rows.iter().enumerate() {
        if let Some(seg) = key.station_id.strip_prefix(SEGMENT_STATION_PREFIX) {
            segment_row.insert(seg, i);
        } else if table.station_kinds[&key.station_id] == StationKind::LongTerm {
            train_rows.push(i);
        }
    }
    if train_rows.is_empty() {
        return Err(Error::data("bundle has no long-term station-days to train on"));
    }
    let trained = train_pipeline(cfg, &table, &train_rows, seed)?;

    let mut seg_rows = Vec::with_capacity(bundle.street_graph.len());
    for edge in &bundle.street_graph {
        let row = segment_row.get(edge.segment.id.as_str()).ok_or_else(|| {
            Error::runtime(format!(
                "no feature row was built for segment {}",
                edge.segment.id
            ))
        })?;
        seg_rows.push(*row);
    }
    let seg_table = table.select_rows(&seg_rows)?;
    let (seg_p, _) = trained.pre.apply(&seg_table)?;
    let seg_s = match &trained.selected {
        Some(keep) => seg_p.select_columns(keep)?,
        None => seg_p,
    };
    let volumes: Vec<f64> = trained
        .fitted
        .predict(&seg_s.matrix()?)?
        .into_iter()
        .map(|v| v.max(0.0))
        .collect();

    let features: Vec<serde_json::Value> = bundle
        .street_graph
        .iter()
        .zip(&volumes)
        .map(|(edge, volume)| {
            let coords: Vec<[f64; 2]> =
                edge.segment.polyline.iter().map(|p| [p.lon, p.lat]).collect();
            json!({
                "type": "Feature",
                "geometry": { "type": "LineString", "coordinates": coords },
                "properties": {
                    "id": edge.segment.id,
                    "volume": volume,
                    "date": date.to_string(),
                },
            })
        })
        .collect();
    let map = json!({
        "type": "FeatureCollection",
        "metadata": {
            "engine_version": velo_core::ENGINE_VERSION,
            "config_hash": hash,
            "date": date.to_string(),
            "estimator": trained.spec.kind.name(),
        },
        "features": features,
    });

    let out = cfg.paths.output_dir.join("predict-map");
    let meta = Meta::new(hash);
    prepare_output_dir(&out, &meta, "predict-map")?;
    write_json(&out.join("map.geojson"), &map)?;
    println!(
        "predicted {} for {} segments on {}; map in {}",
        trained.spec.kind.name(),
        volumes.len(),
        date,
        out.display()
    );
    Ok(())
}

pub fn print_schema(source: &str) -> Result<()> {
    match schema::contract(source) {
        Some(text) => {
            println!("{text}");
            Ok(())
        }
        None => Err(Error::config(format!(
            "unknown source {source:?}; valid names: {}",
            schema::SOURCES.join(", ")
        ))),
    }
}
