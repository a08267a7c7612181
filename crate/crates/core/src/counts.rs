//! Counting stations, hourly-to-daily aggregation, and directional pairing.

use std::collections::{BTreeMap, BTreeSet};

use chrono::{NaiveDate, NaiveDateTime, Timelike};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geo::GeoPoint;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StationKind {
    LongTerm,
    ShortTerm,
}

impl StationKind {
    pub fn name(self) -> &'static str {
        match self {
            StationKind::LongTerm => "long_term",
            StationKind::ShortTerm => "short_term",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "long_term" => Ok(StationKind::LongTerm),
            "short_term" => Ok(StationKind::ShortTerm),
            other => Err(Error::data(format!("unknown station kind {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Station {
    pub id: String,
    pub location: GeoPoint,
    pub kind: StationKind,
    /// Year the counter went into operation, when known.
    pub installed_year: Option<i32>,
}

/// Daily aggregation window. `FullDay` covers hours 0–23, `Daytime` hours
/// 7–18 inclusive; short-duration counters only record the daytime window.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CountWindow {
    FullDay,
    Daytime,
}

impl CountWindow {
    pub fn hours(self) -> std::ops::RangeInclusive<u32> {
        match self {
            CountWindow::FullDay => 0..=23,
            CountWindow::Daytime => 7..=18,
        }
    }

    pub fn n_hours(self) -> usize {
        match self {
            CountWindow::FullDay => 24,
            CountWindow::Daytime => 12,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            CountWindow::FullDay => "full_day",
            CountWindow::Daytime => "daytime",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "full_day" => Ok(CountWindow::FullDay),
            "daytime" => Ok(CountWindow::Daytime),
            other => Err(Error::config(format!("unknown count window {other:?}"))),
        }
    }
}

/// One station-hour of observed bicycle traffic.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HourlyCount {
    pub station_id: String,
    pub ts: NaiveDateTime,
    pub count: u64,
}

/// One station-day total of bicycles over a [`CountWindow`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CountObservation {
    pub station_id: String,
    pub date: NaiveDate,
    pub window: CountWindow,
    pub count: u64,
}

fn check_no_duplicate_hours(rows: &[HourlyCount]) -> Result<()> {
    let mut seen: BTreeSet<(&str, NaiveDateTime)> = BTreeSet::new();
    for r in rows {
        if !seen.insert((r.station_id.as_str(), r.ts)) {
            return Err(Error::data(format!(
                "duplicate hourly count for station {} at {}",
                r.station_id, r.ts
            )));
        }
    }
    Ok(())
}

/// Validate a set of daily observations: (station, date, window) must be
/// unique, and where a station-date carries both windows the daytime total
/// cannot exceed the full-day total.
pub fn check_observations(rows: &[CountObservation]) -> Result<()> {
    let mut seen: BTreeMap<(&str, NaiveDate, CountWindow), u64> = BTreeMap::new();
    for r in rows {
        let key = (r.station_id.as_str(), r.date, r.window);
        if seen.insert(key, r.count).is_some() {
            return Err(Error::data(format!(
                "duplicate daily count for station {} on {} ({})",
                r.station_id,
                r.date,
                r.window.name()
            )));
        }
    }
    for ((station, date, window), count) in &seen {
        if *window == CountWindow::Daytime {
            if let Some(full) = seen.get(&(station, *date, CountWindow::FullDay)) {
                if count > full {
                    return Err(Error::data(format!(
                        "station {station} on {date}: daytime count {count} exceeds full-day count {full}"
                    )));
                }
            }
        }
    }
    Ok(())
}

/// Aggregate hourly counts into daily totals over `window`. A station-day is
/// emitted only when every hour of the window is present; hours outside the
/// window are ignored. Timestamps must fall on whole hours, and duplicate
/// (station, timestamp) rows are a data error.
pub fn aggregate_daily(rows: &[HourlyCount], window: CountWindow) -> Result<Vec<CountObservation>> {
    for r in rows {
        let t = r.ts.time();
        if t.minute() != 0 || t.second() != 0 || t.nanosecond() != 0 {
            return Err(Error::data(format!(
                "hourly count for station {} at {} is not on a whole hour",
                r.station_id, r.ts
            )));
        }
    }
    check_no_duplicate_hours(rows)?;
    let hours = window.hours();
    let mut days: BTreeMap<(&str, NaiveDate), BTreeMap<u32, u64>> = BTreeMap::new();
    for r in rows {
        let h = r.ts.time().hour();
        if !hours.contains(&h) {
            continue;
        }
        days.entry((r.station_id.as_str(), r.ts.date()))
            .or_default()
            .insert(h, r.count);
    }
    let mut out = Vec::new();
    for ((station, date), by_hour) in days {
        if by_hour.len() == window.n_hours() {
            out.push(CountObservation {
                station_id: station.to_string(),
                date,
                window,
                count: by_hour.values().sum(),
            });
        }
    }
    Ok(out)
}

/// Merge counters that measure opposite sides of the same street into one
/// logical station. `groups` maps the combined station id to the member
/// counter ids; a (date, window) row is emitted only when every member
/// reported it, as the sum over members — a partial sum is not a valid total.
/// Stations that belong to no group pass through unchanged.
///
/// Errors: duplicate input rows, a counter claimed by two groups, a combined
/// id colliding with an ungrouped station, and members whose sets of observed
/// windows differ.
pub fn combine_directional_counters(
    observations: &[CountObservation],
    groups: &BTreeMap<String, Vec<String>>,
) -> Result<Vec<CountObservation>> {
    check_observations(observations)?;
    let mut member_of: BTreeMap<&str, &str> = BTreeMap::new();
    for (combined, members) in groups {
        if members.is_empty() {
            return Err(Error::config(format!(
                "directional group {combined} has no members"
            )));
        }
        for m in members {
            if member_of.insert(m.as_str(), combined.as_str()).is_some() {
                return Err(Error::config(format!(
                    "counter {m} appears in more than one directional group"
                )));
            }
        }
    }

    let mut values: BTreeMap<(&str, NaiveDate, CountWindow), u64> = BTreeMap::new();
    let mut windows_seen: BTreeMap<&str, BTreeSet<CountWindow>> = BTreeMap::new();
    let mut out = Vec::new();
    for r in observations {
        if member_of.contains_key(r.station_id.as_str()) {
            values.insert((r.station_id.as_str(), r.date, r.window), r.count);
            windows_seen
                .entry(r.station_id.as_str())
                .or_default()
                .insert(r.window);
        } else {
            if groups.contains_key(&r.station_id) {
                return Err(Error::config(format!(
                    "combined station id {} collides with an existing counter",
                    r.station_id
                )));
            }
            out.push(r.clone());
        }
    }

    for (combined, members) in groups {
        let observed: Vec<&BTreeSet<CountWindow>> = members
            .iter()
            .filter_map(|m| windows_seen.get(m.as_str()))
            .collect();
        if let Some(first) = observed.first() {
            if observed.iter().any(|w| w != first) {
                return Err(Error::config(format!(
                    "directional group {combined} mixes members with different count windows"
                )));
            }
        }
        let mut keys: Vec<(NaiveDate, CountWindow)> = values
            .iter()
            .filter(|((id, _, _), _)| *id == members[0].as_str())
            .map(|((_, date, window), _)| (*date, *window))
            .collect();
        keys.sort_unstable();
        'key: for (date, window) in keys {
            let mut sum = 0;
            for m in members {
                match values.get(&(m.as_str(), date, window)) {
                    Some(v) => sum += v,
                    None => continue 'key,
                }
            }
            out.push(CountObservation {
                station_id: combined.clone(),
                date,
                window,
                count: sum,
            });
        }
    }
    out.sort_by(|a, b| {
        (a.station_id.as_str(), a.date, a.window).cmp(&(b.station_id.as_str(), b.date, b.window))
    });
    Ok(out)
}
