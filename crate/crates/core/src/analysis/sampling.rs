//! Short-term counting campaign simulation: pretend a long-term station had
//! only been counted for a handful of days, refit, and measure how well its
//! remaining days are predicted as the pretend campaign grows longer.

use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;

use chrono::NaiveDate;
use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::counts::StationKind;
use crate::error::{Error, Result};
use crate::eval::metrics::{mae, smape, Metric};
use crate::eval::protocol::{annual_average_pairs, EvaluationReport, Scale, StationScore};
use crate::learners::{fit, EstimatorSpec};
use crate::pipeline::preprocess::fit_preprocess;
use crate::pipeline::FeatureTable;
use crate::util::{derive_seed, hash_str, par_map, rng_from};

/// How the pretend campaign spreads its days over the calendar.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Strategy {
    /// Each counted day is drawn independently.
    OneDay,
    /// Days arrive in blocks of three consecutive calendar days.
    ThreeDay,
    /// Days arrive in blocks of seven consecutive calendar days.
    SevenDay,
}

impl Strategy {
    pub const ALL: [Strategy; 3] = [Strategy::OneDay, Strategy::ThreeDay, Strategy::SevenDay];

    pub fn block_len(self) -> usize {
        match self {
            Strategy::OneDay => 1,
            Strategy::ThreeDay => 3,
            Strategy::SevenDay => 7,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Strategy::OneDay => "one_day",
            Strategy::ThreeDay => "three_day",
            Strategy::SevenDay => "seven_day",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        Self::ALL
            .iter()
            .copied()
            .find(|v| v.name() == s)
            .ok_or_else(|| Error::config(format!("unknown sampling strategy: {s}")))
    }
}

/// What the counted days are used for.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scenario {
    /// The counted days join the city-wide training set with extra weight.
    FullCity,
    /// A model is fit on the counted days of this location alone.
    LocationSpecific,
    /// No model: predict the mean of the counted days.
    SampleMeanBaseline,
}

impl Scenario {
    pub const ALL: [Scenario; 3] = [
        Scenario::FullCity,
        Scenario::LocationSpecific,
        Scenario::SampleMeanBaseline,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Scenario::FullCity => "full_city",
            Scenario::LocationSpecific => "location_specific",
            Scenario::SampleMeanBaseline => "sample_mean",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        Self::ALL
            .iter()
            .copied()
            .find(|v| v.name() == s)
            .ok_or_else(|| Error::config(format!("unknown sampling scenario: {s}")))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SamplingOptions {
    /// Longest campaign simulated.
    pub max_days: usize,
    /// Replicates per station; each redraws the campaign days.
    pub reps: usize,
    /// Share of the total training weight mass handed to the sampled rows
    /// in the full-city scenario.
    pub weight_share: f64,
    pub seed: u64,
    pub metric: Metric,
    /// Minimum observed days a station needs to take part; defaults to
    /// `max_days + 30` so the longest campaign still leaves a test month.
    pub min_rows: Option<usize>,
    /// Campaign lengths to evaluate; defaults to every length from 1 to
    /// `max_days`. Zero may be requested explicitly under the full-city
    /// scenario, where it reproduces the leave-one-station-out fold.
    pub days: Option<Vec<usize>>,
}

impl Default for SamplingOptions {
    fn default() -> Self {
        SamplingOptions {
            max_days: 28,
            reps: 10,
            weight_share: 0.25,
            seed: 0,
            metric: Metric::Smape,
            min_rows: None,
            days: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CurvePoint {
    pub days: usize,
    /// Error averaged over stations, then over replicates.
    pub mean: f64,
    /// 1.96 · sd / √reps over the per-replicate station means.
    pub ci95_half_width: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SamplingCurve {
    pub strategy: Strategy,
    pub scenario: Scenario,
    pub estimator: String,
    pub metric: Metric,
    pub n_stations: usize,
    pub reps: usize,
    /// Stations that qualified by row count but could not host the block
    /// layout (their calendar is too fragmented).
    pub skipped: Vec<String>,
    pub points: Vec<CurvePoint>,
}

/// Pre-draw the whole ordered campaign for one station and replicate, so a
/// shorter campaign's days are always a prefix of a longer one's. One-day
/// strategies shuffle the available dates; block strategies draw
/// non-overlapping runs of consecutive calendar days, each run accepted only
/// if every one of its dates was observed. `None` when a block cannot be
/// placed within 1000 attempts.
fn draw_sequence(
    dates: &[NaiveDate],
    strategy: Strategy,
    max_days: usize,
    rng: &mut impl Rng,
) -> Option<Vec<NaiveDate>> {
    let block = strategy.block_len();
    if block == 1 {
        let mut seq = dates.to_vec();
        seq.shuffle(rng);
        seq.truncate(max_days);
        return Some(seq);
    }
    let available: BTreeSet<NaiveDate> = dates.iter().copied().collect();
    let n_blocks = max_days.div_ceil(block);
    let mut used: BTreeSet<NaiveDate> = BTreeSet::new();
    let mut seq = Vec::with_capacity(n_blocks * block);
    for _ in 0..n_blocks {
        let mut placed = false;
        for _attempt in 0..1000 {
            let start = dates[rng.gen_range(0..dates.len())];
            let run: Vec<NaiveDate> = (0..block)
                .map(|i| start + chrono::Duration::days(i as i64))
                .collect();
            if run.iter().all(|d| available.contains(d) && !used.contains(d)) {
                used.extend(run.iter().copied());
                seq.extend(run);
                placed = true;
                break;
            }
        }
        if !placed {
            return None;
        }
    }
    seq.truncate(max_days);
    Some(seq)
}

/// Per-row training weights giving the sampled rows exactly `share` of the
/// total mass: each sampled row weighs share·n_other and each other row
/// (1−share)·n_sampled, so the sides total share·nₛ·nₒ and (1−share)·nₛ·nₒ.
pub(crate) fn fullcity_weights(n_sampled: usize, n_other: usize, share: f64) -> (f64, f64) {
    (share * n_other as f64, (1.0 - share) * n_sampled as f64)
}

/// Fit on `train_rows` (optionally weighted) and return clamped predictions
/// for `test_rows`, with preprocessing fitted on the training rows alone.
/// This is the same sequence of operations a leave-one-station-out fold
/// performs, so an unweighted call reproduces that fold bit for bit.
fn fit_predict(
    table: &FeatureTable,
    train_rows: &[usize],
    test_rows: &[usize],
    weights: Option<&[f64]>,
    spec: &EstimatorSpec,
    seed: u64,
) -> Result<Vec<f64>> {
    let train = table.select_rows(train_rows)?;
    let test = table.select_rows(test_rows)?;
    let pre = fit_preprocess(&train)?;
    let (train_p, _) = pre.apply(&train)?;
    let (test_p, _) = pre.apply(&test)?;
    let model = fit(spec, &train_p.matrix()?, &train_p.target, weights, seed)?;
    let mut pred = model.predict(&test_p.matrix()?)?;
    for p in &mut pred {
        *p = p.max(0.0);
    }
    Ok(pred)
}

/// One participating station with its replicate campaign draws.
struct Participant {
    station: String,
    /// All of the station's rows, in row order.
    rows: Vec<usize>,
    /// Every other long-term station's rows, sorted ascending — the same
    /// training set a leave-one-station-out fold would use.
    other_rows: Vec<usize>,
    /// Per replicate: the campaign's row indices in draw order.
    sequences: Vec<Vec<usize>>,
}

fn effective_days(scenario: Scenario, opts: &SamplingOptions) -> Result<Vec<usize>> {
    let mut days = match &opts.days {
        Some(d) => {
            let mut d = d.clone();
            d.sort_unstable();
            d.dedup();
            if let Some(&too_big) = d.iter().find(|&&x| x > opts.max_days) {
                return Err(Error::config(format!(
                    "requested campaign length {too_big} exceeds max_days {}",
                    opts.max_days
                )));
            }
            d
        }
        None => (1..=opts.max_days).collect(),
    };
    // Zero counted days only makes sense when the rest of the city can stand
    // in for the missing campaign.
    days.retain(|&d| d > 0 || scenario == Scenario::FullCity);
    if days.is_empty() {
        return Err(Error::config("no evaluable campaign lengths"));
    }
    Ok(days)
}

fn gather_participants(
    table: &FeatureTable,
    strategy: Strategy,
    opts: &SamplingOptions,
    min_rows: usize,
) -> Result<(Vec<Participant>, Vec<String>)> {
    let by_station = table.station_rows();
    let long_rows: BTreeMap<&String, &Vec<usize>> = by_station
        .iter()
        .filter(|(s, _)| table.station_kinds[s.as_str()] == StationKind::LongTerm)
        .collect();
    let mut participants = Vec::new();
    let mut skipped = Vec::new();
    for (station, rows) in &long_rows {
        if rows.len() < min_rows {
            continue;
        }
        let mut date_row: BTreeMap<NaiveDate, usize> = BTreeMap::new();
        for &r in rows.iter() {
            if date_row.insert(table.rows[r].date, r).is_some() {
                return Err(Error::data(format!(
                    "station {station} has duplicate rows for {}",
                    table.rows[r].date
                )));
            }
        }
        let dates: Vec<NaiveDate> = date_row.keys().copied().collect();
        let mut sequences = Vec::with_capacity(opts.reps);
        let mut feasible = true;
        for rep in 0..opts.reps {
            let mut rng = rng_from(opts.seed, &[hash_str(station), rep as u64]);
            match draw_sequence(&dates, strategy, opts.max_days, &mut rng) {
                Some(seq) => sequences.push(seq.iter().map(|d| date_row[d]).collect()),
                None => {
                    feasible = false;
                    break;
                }
            }
        }
        if !feasible {
            log::warn!(
                "station {station}: could not place {} blocks of {} days, skipping",
                opts.max_days.div_ceil(strategy.block_len()),
                strategy.block_len()
            );
            skipped.push((*station).clone());
            continue;
        }
        let mut other_rows = Vec::new();
        for (other, orows) in &long_rows {
            if other != station {
                other_rows.extend_from_slice(orows);
            }
        }
        other_rows.sort_unstable();
        participants.push(Participant {
            station: (*station).clone(),
            rows: (*rows).clone(),
            other_rows,
            sequences,
        });
    }
    if participants.is_empty() {
        return Err(Error::data(format!(
            "no long-term station has {min_rows} observed days and room for the block layout"
        )));
    }
    Ok((participants, skipped))
}

/// Predictions for one station under one replicate's campaign of `d` days.
fn campaign_predictions(
    table: &FeatureTable,
    p: &Participant,
    rep: usize,
    d: usize,
    scenario: Scenario,
    spec: &EstimatorSpec,
    opts: &SamplingOptions,
) -> Result<(Vec<usize>, Vec<f64>)> {
    if d == 0 {
        // No campaign: exactly the leave-one-station-out fold, so reuse its
        // seed derivation to stay bit-compatible.
        let seed = derive_seed(opts.seed, &[hash_str(&p.station)]);
        let pred = fit_predict(table, &p.other_rows, &p.rows, None, spec, seed)?;
        return Ok((p.rows.clone(), pred));
    }
    let sampled: BTreeSet<usize> = p.sequences[rep][..d].iter().copied().collect();
    let sampled_rows: Vec<usize> = sampled.iter().copied().collect();
    let test_rows: Vec<usize> =
        p.rows.iter().copied().filter(|r| !sampled.contains(r)).collect();
    let seed = derive_seed(opts.seed, &[hash_str(&p.station), rep as u64, d as u64]);
    let pred = match scenario {
        Scenario::FullCity => {
            let mut train_rows = p.other_rows.clone();
            train_rows.extend_from_slice(&sampled_rows);
            let (w_sampled, w_other) =
                fullcity_weights(sampled_rows.len(), p.other_rows.len(), opts.weight_share);
            let mut weights = vec![w_other; p.other_rows.len()];
            weights.extend(std::iter::repeat(w_sampled).take(sampled_rows.len()));
            fit_predict(table, &train_rows, &test_rows, Some(&weights), spec, seed)?
        }
        Scenario::LocationSpecific => {
            fit_predict(table, &sampled_rows, &test_rows, None, spec, seed)?
        }
        Scenario::SampleMeanBaseline => {
            let m = sampled_rows.iter().map(|&r| table.target[r]).sum::<f64>()
                / sampled_rows.len() as f64;
            vec![m.max(0.0); test_rows.len()]
        }
    };
    Ok((test_rows, pred))
}

/// Simulate short-term campaigns at every requested length and report the
/// error curve. Stations take part when they have at least
/// `min_rows` observed days (so even the longest campaign leaves a test
/// set); each is re-predicted `reps` times with freshly drawn campaign days.
/// Deterministic given the seed, whatever the parallel schedule.
pub fn simulate_sampling(
    table: &FeatureTable,
    spec: &EstimatorSpec,
    strategy: Strategy,
    scenario: Scenario,
    opts: &SamplingOptions,
) -> Result<SamplingCurve> {
    if opts.reps == 0 {
        return Err(Error::config("sampling needs at least one replicate"));
    }
    if opts.max_days == 0 {
        return Err(Error::config("max_days must be at least 1"));
    }
    if !(opts.weight_share > 0.0 && opts.weight_share < 1.0) {
        return Err(Error::config("weight_share must lie strictly between 0 and 1"));
    }
    let min_rows = opts.min_rows.unwrap_or(opts.max_days + 30);
    if min_rows <= opts.max_days {
        return Err(Error::config(
            "min_rows must exceed max_days so every campaign leaves test days",
        ));
    }
    let days = effective_days(scenario, opts)?;
    let (participants, skipped) = gather_participants(table, strategy, opts, min_rows)?;

    // A zero-day campaign ignores the replicate entirely, so compute that
    // point once per station instead of once per (station, replicate).
    let include_zero = days.contains(&0);
    let days_pos: Vec<usize> = days.iter().copied().filter(|&d| d > 0).collect();

    let zero_scores: Vec<f64> = if include_zero {
        let res: Vec<Result<f64>> = par_map(participants.len(), |pi| {
            let p = &participants[pi];
            let (rows, pred) = campaign_predictions(table, p, 0, 0, scenario, spec, opts)?;
            let truth: Vec<f64> = rows.iter().map(|&r| table.target[r]).collect();
            opts.metric.compute(&truth, &pred)
        });
        res.into_iter().collect::<Result<_>>()?
    } else {
        Vec::new()
    };

    let jobs: Vec<(usize, usize)> = (0..participants.len())
        .flat_map(|pi| (0..opts.reps).map(move |rep| (pi, rep)))
        .collect();
    let scores: Vec<Result<Vec<f64>>> = par_map(jobs.len(), |j| {
        let (pi, rep) = jobs[j];
        let p = &participants[pi];
        let mut out = Vec::with_capacity(days_pos.len());
        for &d in &days_pos {
            let (rows, pred) = campaign_predictions(table, p, rep, d, scenario, spec, opts)?;
            let truth: Vec<f64> = rows.iter().map(|&r| table.target[r]).collect();
            out.push(opts.metric.compute(&truth, &pred)?);
        }
        Ok(out)
    });
    let scores = scores.into_iter().collect::<Result<Vec<Vec<f64>>>>()?;

    let n = participants.len() as f64;
    let mut points = Vec::with_capacity(days.len());
    for &d in &days {
        if d == 0 {
            points.push(CurvePoint {
                days: 0,
                mean: zero_scores.iter().sum::<f64>() / n,
                ci95_half_width: 0.0,
            });
            continue;
        }
        let di = days_pos.iter().position(|&x| x == d).unwrap();
        let per_rep: Vec<f64> = (0..opts.reps)
            .map(|rep| {
                let total: f64 = (0..participants.len())
                    .map(|pi| scores[pi * opts.reps + rep][di])
                    .sum();
                total / n
            })
            .collect();
        let mean = per_rep.iter().sum::<f64>() / opts.reps as f64;
        let ci = if opts.reps > 1 {
            let var = per_rep.iter().map(|v| (v - mean).powi(2)).sum::<f64>()
                / (opts.reps - 1) as f64;
            1.96 * (var / opts.reps as f64).sqrt()
        } else {
            0.0
        };
        points.push(CurvePoint { days: d, mean, ci95_half_width: ci });
    }

    Ok(SamplingCurve {
        strategy,
        scenario,
        estimator: spec.kind.name().to_string(),
        metric: opts.metric,
        n_stations: participants.len(),
        reps: opts.reps,
        skipped,
        points,
    })
}

/// Headline accuracy after a ten-day campaign of isolated days under the
/// full-city scenario: every eligible station is re-predicted with ten of
/// its days folded into training, scores averaged over ten replicate draws.
/// Returns (daily-scale report, annual-average report), both with protocol
/// `ten_day_fullcity`.
pub fn ten_day_headline(
    table: &FeatureTable,
    spec: &EstimatorSpec,
    seed: u64,
) -> Result<(EvaluationReport, EvaluationReport)> {
    const CAMPAIGN_DAYS: usize = 10;
    const MIN_AADB_ROWS: usize = 30;
    let opts = SamplingOptions {
        max_days: CAMPAIGN_DAYS,
        seed,
        ..SamplingOptions::default()
    };
    let min_rows = opts.max_days + 30;
    let (participants, skipped) =
        gather_participants(table, Strategy::OneDay, &opts, min_rows)?;

    struct RepScore {
        daily_mae: f64,
        daily_smape: f64,
        aadb: Option<(f64, f64, usize)>,
    }
    let jobs: Vec<(usize, usize)> = (0..participants.len())
        .flat_map(|pi| (0..opts.reps).map(move |rep| (pi, rep)))
        .collect();
    let rep_scores: Vec<Result<RepScore>> = par_map(jobs.len(), |j| {
        let (pi, rep) = jobs[j];
        let p = &participants[pi];
        let (rows, pred) = campaign_predictions(
            table,
            p,
            rep,
            CAMPAIGN_DAYS,
            Scenario::FullCity,
            spec,
            &opts,
        )?;
        let truth: Vec<f64> = rows.iter().map(|&r| table.target[r]).collect();
        let (at, ap) =
            annual_average_pairs(table, &p.station, &rows, &truth, &pred, MIN_AADB_ROWS);
        Ok(RepScore {
            daily_mae: mae(&truth, &pred)?,
            daily_smape: smape(&truth, &pred)?,
            aadb: if at.is_empty() {
                None
            } else {
                Some((mae(&at, &ap)?, smape(&at, &ap)?, at.len()))
            },
        })
    });
    let rep_scores = rep_scores.into_iter().collect::<Result<Vec<RepScore>>>()?;

    let mut daily_stations = Vec::new();
    let mut aadb_stations = Vec::new();
    let mut aadb_excluded = skipped.clone();
    for (pi, p) in participants.iter().enumerate() {
        let mine = &rep_scores[pi * opts.reps..(pi + 1) * opts.reps];
        let n = mine.len() as f64;
        daily_stations.push(StationScore {
            station_id: p.station.clone(),
            n_test_rows: p.rows.len() - CAMPAIGN_DAYS,
            mae: mine.iter().map(|s| s.daily_mae).sum::<f64>() / n,
            smape: mine.iter().map(|s| s.daily_smape).sum::<f64>() / n,
        });
        let scored: Vec<&(f64, f64, usize)> =
            mine.iter().filter_map(|s| s.aadb.as_ref()).collect();
        if scored.is_empty() {
            log::warn!("station {}: no year with {MIN_AADB_ROWS} test days", p.station);
            aadb_excluded.push(p.station.clone());
        } else {
            let m = scored.len() as f64;
            aadb_stations.push(StationScore {
                station_id: p.station.clone(),
                n_test_rows: scored[0].2,
                mae: scored.iter().map(|s| s.0).sum::<f64>() / m,
                smape: scored.iter().map(|s| s.1).sum::<f64>() / m,
            });
        }
    }
    if aadb_stations.is_empty() {
        return Err(Error::data("no station qualifies for the annual-average report"));
    }

    let report = |stations: Vec<StationScore>, scale: Scale, excluded: Vec<String>| {
        let n = stations.len() as f64;
        EvaluationReport {
            protocol: "ten_day_fullcity".to_string(),
            estimator: spec.kind.name().to_string(),
            window: table.window,
            scale,
            aggregate_mae: stations.iter().map(|s| s.mae).sum::<f64>() / n,
            aggregate_smape: stations.iter().map(|s| s.smape).sum::<f64>() / n,
            stations,
            excluded,
            folds: Vec::new(),
        }
    };
    Ok((
        report(daily_stations, Scale::Daily, skipped),
        report(aadb_stations, Scale::Aadb, aadb_excluded),
    ))
}

/// Plot-ready CSV: one line per campaign length with mean and CI bounds.
pub fn write_curve_csv(curve: &SamplingCurve, path: &Path) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["days", "mean", "ci_low", "ci_high"])?;
    for p in &curve.points {
        w.write_record([
            &p.days.to_string(),
            &p.mean.to_string(),
            &(p.mean - p.ci95_half_width).to_string(),
            &(p.mean + p.ci95_half_width).to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::counts::CountWindow;
    use crate::eval::{logo_evaluate, EvalOptions};
    use crate::learners::EstimatorKind;
    use crate::pipeline::{ColumnDef, FeatureGroup, RowKey};

    fn day(n: i64) -> NaiveDate {
        NaiveDate::from_ymd_opt(2021, 1, 1).unwrap() + chrono::Duration::days(n)
    }

    /// Stations with the feature equal to the target, every `step`-th day.
    fn build(stations: &[(&str, usize, i64)], target: impl Fn(&str, usize) -> f64) -> FeatureTable {
        let mut t = FeatureTable::new(
            CountWindow::FullDay,
            vec![
                ColumnDef { name: "strava_v".into(), group: FeatureGroup::Crowdsourced },
                ColumnDef { name: "time_d".into(), group: FeatureGroup::Time },
            ],
        )
        .unwrap();
        for (id, n, step) in stations {
            for i in 0..*n {
                let y = target(id, i);
                t.push_row(
                    RowKey { station_id: id.to_string(), date: day(*step * i as i64) },
                    StationKind::LongTerm,
                    vec![y, (i % 7) as f64],
                    y,
                )
                .unwrap();
            }
        }
        t
    }

    #[test]
    fn one_day_draws_are_unique_in_range_and_rep_sensitive() {
        let dates: Vec<NaiveDate> = (0..40).map(day).collect();
        let mut rng = rng_from(5, &[hash_str("a"), 0]);
        let seq = draw_sequence(&dates, Strategy::OneDay, 28, &mut rng).unwrap();
        assert_eq!(seq.len(), 28);
        let set: BTreeSet<_> = seq.iter().collect();
        assert_eq!(set.len(), 28, "no repeated days");
        assert!(seq.iter().all(|d| dates.contains(d)));
        let mut rng2 = rng_from(5, &[hash_str("a"), 1]);
        let seq2 = draw_sequence(&dates, Strategy::OneDay, 28, &mut rng2).unwrap();
        assert_ne!(seq, seq2, "replicates redraw the campaign");
        // Within one replicate, each campaign extends the previous one.
        for d in 1..seq.len() {
            let shorter: BTreeSet<_> = seq[..d].iter().collect();
            let longer: BTreeSet<_> = seq[..=d].iter().collect();
            assert!(shorter.is_subset(&longer));
        }
    }

    #[test]
    fn block_draws_are_consecutive_runs_without_overlap() {
        let dates: Vec<NaiveDate> = (0..60).map(day).collect();
        let mut rng = rng_from(7, &[hash_str("b"), 0]);
        let seq = draw_sequence(&dates, Strategy::ThreeDay, 28, &mut rng).unwrap();
        assert_eq!(seq.len(), 28);
        let set: BTreeSet<_> = seq.iter().collect();
        assert_eq!(set.len(), 28);
        // Every complete block is a run of consecutive calendar days.
        for b in 0..28 / 3 {
            let block = &seq[b * 3..b * 3 + 3];
            assert_eq!(block[1], block[0] + chrono::Duration::days(1));
            assert_eq!(block[2], block[1] + chrono::Duration::days(1));
        }
    }

    #[test]
    fn fragmented_calendars_are_skipped_for_block_strategies() {
        // "gappy" observes every other day, so no three consecutive dates
        // exist; "dense" observes a solid run.
        let t = build(
            &[("dense", 40, 1), ("gappy", 30, 2)],
            |_, i| 50.0 + i as f64,
        );
        let opts = SamplingOptions {
            max_days: 3,
            reps: 2,
            min_rows: Some(10),
            days: Some(vec![3]),
            metric: Metric::Mae,
            ..SamplingOptions::default()
        };
        let spec = EstimatorSpec::new(EstimatorKind::BaselineMean);
        let curve = simulate_sampling(
            &t,
            &spec,
            Strategy::ThreeDay,
            Scenario::SampleMeanBaseline,
            &opts,
        )
        .unwrap();
        assert_eq!(curve.skipped, vec!["gappy".to_string()]);
        assert_eq!(curve.n_stations, 1);
    }

    #[test]
    fn sample_mean_baseline_is_exact_on_constant_targets() {
        let t = build(&[("a", 45, 1), ("b", 45, 1)], |id, _| {
            if id == "a" { 100.0 } else { 40.0 }
        });
        let opts = SamplingOptions {
            max_days: 7,
            reps: 3,
            min_rows: Some(40),
            metric: Metric::Mae,
            ..SamplingOptions::default()
        };
        let spec = EstimatorSpec::new(EstimatorKind::BaselineMean);
        let curve = simulate_sampling(
            &t,
            &spec,
            Strategy::OneDay,
            Scenario::SampleMeanBaseline,
            &opts,
        )
        .unwrap();
        // The sampled mean of a constant series is that constant.
        assert_eq!(curve.points.len(), 7);
        for p in &curve.points {
            assert_eq!(p.mean, 0.0, "at {} days", p.days);
            assert_eq!(p.ci95_half_width, 0.0);
        }
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("curve.csv");
        write_curve_csv(&curve, &path).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        assert_eq!(text.lines().count(), 8);
        assert!(text.starts_with("days,mean,ci_low,ci_high"));
    }

    #[test]
    fn fullcity_weight_mass_splits_exactly_at_the_share() {
        for (n_s, n_o) in [(1usize, 7usize), (10, 400), (28, 1000), (3, 97)] {
            let (ws, wo) = fullcity_weights(n_s, n_o, 0.25);
            let sampled_mass = ws * n_s as f64;
            let other_mass = wo * n_o as f64;
            let total = (n_s * n_o) as f64;
            assert_eq!(sampled_mass + other_mass, total);
            assert_eq!(sampled_mass, 0.25 * total);
        }
    }

    #[test]
    fn zero_days_reproduces_the_leave_one_out_fold() {
        let t = build(&[("a", 40, 1), ("b", 40, 1), ("c", 40, 1)], |id, i| {
            40.0 * (id.as_bytes()[0] - b'a') as f64 + 100.0 + (i % 9) as f64 * 3.0
        });
        let spec = EstimatorSpec::new(EstimatorKind::BaselineMean);
        let opts = SamplingOptions {
            max_days: 5,
            reps: 2,
            min_rows: Some(40),
            days: Some(vec![0]),
            ..SamplingOptions::default()
        };
        let curve =
            simulate_sampling(&t, &spec, Strategy::OneDay, Scenario::FullCity, &opts)
                .unwrap();
        let logo = logo_evaluate(&t, &spec, Scale::Daily, &EvalOptions::default()).unwrap();
        assert_eq!(curve.points.len(), 1);
        assert_eq!(curve.points[0].days, 0);
        assert_eq!(curve.points[0].mean, logo.aggregate_smape);
    }

    #[test]
    fn location_specific_single_day_predicts_that_day() {
        let t = build(&[("a", 10, 1)], |_, i| 10.0 * (i + 1) as f64);
        let spec = EstimatorSpec::new(EstimatorKind::BaselineMean);
        let opts = SamplingOptions {
            max_days: 1,
            reps: 1,
            seed: 3,
            min_rows: Some(5),
            days: Some(vec![1]),
            metric: Metric::Mae,
            ..SamplingOptions::default()
        };
        let curve = simulate_sampling(
            &t,
            &spec,
            Strategy::OneDay,
            Scenario::LocationSpecific,
            &opts,
        )
        .unwrap();
        // Replay the draw to learn which day was counted: the mean of one
        // training row is exactly that day's target.
        let dates: Vec<NaiveDate> = (0..10).map(day).collect();
        let mut rng = rng_from(3, &[hash_str("a"), 0]);
        let drawn = draw_sequence(&dates, Strategy::OneDay, 1, &mut rng).unwrap()[0];
        let sampled_y = 10.0 * ((drawn - day(0)).num_days() + 1) as f64;
        let expected = (0..10)
            .map(|i| 10.0 * (i + 1) as f64)
            .filter(|&y| y != sampled_y)
            .map(|y| (y - sampled_y).abs())
            .sum::<f64>()
            / 9.0;
        assert_eq!(curve.points[0].mean, expected);
    }

    #[test]
    fn sample_mean_error_matches_a_direct_replay_of_the_draw() {
        let t = build(&[("a", 10, 1)], |_, i| [30.0, 80.0, 44.0, 91.0, 12.0, 66.0, 25.0, 73.0, 58.0, 39.0][i]);
        let opts = SamplingOptions {
            max_days: 3,
            reps: 1,
            seed: 21,
            min_rows: Some(10),
            days: Some(vec![3]),
            metric: Metric::Mae,
            ..SamplingOptions::default()
        };
        let spec = EstimatorSpec::new(EstimatorKind::BaselineMean);
        let curve = simulate_sampling(
            &t,
            &spec,
            Strategy::OneDay,
            Scenario::SampleMeanBaseline,
            &opts,
        )
        .unwrap();
        let dates: Vec<NaiveDate> = (0..10).map(day).collect();
        let mut rng = rng_from(21, &[hash_str("a"), 0]);
        let drawn = draw_sequence(&dates, Strategy::OneDay, 3, &mut rng).unwrap();
        let idx = |d: NaiveDate| (d - day(0)).num_days() as usize;
        let sampled: BTreeSet<usize> = drawn.iter().map(|&d| idx(d)).collect();
        let ys = [30.0, 80.0, 44.0, 91.0, 12.0, 66.0, 25.0, 73.0, 58.0, 39.0];
        let m: f64 = sampled.iter().map(|&i| ys[i]).sum::<f64>() / 3.0;
        let rest: Vec<f64> = (0..10).filter(|i| !sampled.contains(i)).map(|i| ys[i]).collect();
        let expected = rest.iter().map(|y| (y - m).abs()).sum::<f64>() / rest.len() as f64;
        assert_eq!(curve.points[0].mean, expected);
    }

    #[test]
    fn curves_are_deterministic_and_seed_sensitive() {
        let t = build(&[("a", 45, 1), ("b", 45, 1)], |id, i| {
            60.0 + (id.as_bytes()[0] as usize * 13 + i * 7) as f64 % 40.0
        });
        let spec = EstimatorSpec::new(EstimatorKind::BaselineMean);
        let opts = SamplingOptions {
            max_days: 4,
            reps: 3,
            seed: 11,
            min_rows: Some(40),
            metric: Metric::Mae,
            ..SamplingOptions::default()
        };
        let run = |o: &SamplingOptions| {
            simulate_sampling(&t, &spec, Strategy::OneDay, Scenario::SampleMeanBaseline, o)
                .unwrap()
        };
        assert_eq!(run(&opts), run(&opts));
        let other = run(&SamplingOptions { seed: 12, ..opts.clone() });
        assert_ne!(run(&opts), other);
    }

    #[test]
    fn ten_day_headline_reports_both_scales() {
        // Constant target: the weighted city mean predicts it exactly, so
        // both scales come out at zero error, and the annual report collapses
        // each station to one test year.
        let t = build(&[("a", 45, 1), ("b", 45, 1), ("c", 45, 1)], |_, _| 250.0);
        let spec = EstimatorSpec::new(EstimatorKind::BaselineMean);
        let (daily, annual) = ten_day_headline(&t, &spec, 5).unwrap();
        for r in [&daily, &annual] {
            assert_eq!(r.protocol, "ten_day_fullcity");
            assert_eq!(r.stations.len(), 3);
            assert!(r.folds.is_empty());
            assert_eq!(r.aggregate_mae, 0.0);
            assert_eq!(r.aggregate_smape, 0.0);
        }
        assert_eq!(daily.scale, Scale::Daily);
        assert_eq!(annual.scale, Scale::Aadb);
        assert_eq!(daily.stations[0].n_test_rows, 35);
        assert_eq!(annual.stations[0].n_test_rows, 1);
    }
}
