//! The assembled input data for one city: every source the feature pipeline
//! draws from, plus the study-period and geometry configuration.

use std::collections::{BTreeMap, BTreeSet, HashMap, HashSet};

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};

use crate::counts::{check_observations, CountObservation, HourlyCount, Station};
use crate::error::{Error, Result};
use crate::geo::{GeoPoint, HexCell, HexGrid};
use crate::ingest::routing::StreetEdge;
use crate::ingest::snapshots::{AvailabilitySnapshot, Trip};

/// City-wide weather for one day; the same row applies to every station.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WeatherDaily {
    pub date: NaiveDate,
    pub values: BTreeMap<String, f64>,
}

/// An administrative planning area: polygon, land use in km² per category,
/// and socioeconomic indicators per survey year.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlanningArea {
    pub id: String,
    pub polygon: Vec<GeoPoint>,
    pub land_use_km2: BTreeMap<String, f64>,
    pub socio: BTreeMap<i32, BTreeMap<String, f64>>,
}

/// A typed point of interest.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Poi {
    pub kind: String,
    pub location: GeoPoint,
}

/// One detector's daily motorized-traffic reading: volumes and speeds per
/// vehicle class, keyed by value name.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MotorizedObservation {
    pub detector_id: String,
    pub location: GeoPoint,
    pub date: NaiveDate,
    pub values: BTreeMap<String, f64>,
}

/// Holiday flags for one date; dates without an entry are plain days.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Holiday {
    pub date: NaiveDate,
    pub school: bool,
    pub public: bool,
}

/// Crowdsourced riding metrics for one street segment on one date.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StravaSegmentDay {
    pub segment_id: String,
    pub date: NaiveDate,
    pub values: BTreeMap<String, f64>,
}

/// Crowdsourced riding metrics for one hexagon cell on one date.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StravaHexDay {
    pub cell: HexCell,
    pub date: NaiveDate,
    pub values: BTreeMap<String, f64>,
}

/// Inclusive date ranges the data must fall into, the hexagon grid layout,
/// and the city-center reference point.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BundleConfig {
    pub study_periods: Vec<(NaiveDate, NaiveDate)>,
    pub hex_grid: HexGrid,
    pub city_center: GeoPoint,
}

impl BundleConfig {
    pub fn contains(&self, date: NaiveDate) -> bool {
        self.study_periods.iter().any(|&(a, b)| a <= date && date <= b)
    }
}

/// Everything one city run consumes. Trips may be present directly, or be
/// reconstructed from availability snapshots; both collections may also be
/// empty for runs that skip bike-sharing features.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SourceBundle {
    pub config: BundleConfig,
    pub stations: Vec<Station>,
    pub counts: Vec<HourlyCount>,
    pub weather: Vec<WeatherDaily>,
    pub planning_areas: Vec<PlanningArea>,
    pub points_of_interest: Vec<Poi>,
    pub motorized_observations: Vec<MotorizedObservation>,
    pub holidays: Vec<Holiday>,
    pub strava_segments: Vec<StravaSegmentDay>,
    pub strava_hexagons: Vec<StravaHexDay>,
    pub street_graph: Vec<StreetEdge>,
    pub snapshots: Vec<AvailabilitySnapshot>,
    pub trips: Vec<Trip>,
}

impl SourceBundle {
    /// Check every cross-source invariant: unique and resolvable keys,
    /// consistent value schemas, and all dates inside the study periods.
    pub fn validate(&self) -> Result<()> {
        let station_ids: HashSet<&str> = self.stations.iter().map(|s| s.id.as_str()).collect();
        if station_ids.len() != self.stations.len() {
            return Err(Error::data("duplicate station ids"));
        }
        for c in &self.counts {
            if !station_ids.contains(c.station_id.as_str()) {
                return Err(Error::data(format!(
                    "hourly count references unknown station {}",
                    c.station_id
                )));
            }
            if !self.config.contains(c.ts.date()) {
                return Err(Error::data(format!(
                    "hourly count for {} at {} falls outside the study periods",
                    c.station_id, c.ts
                )));
            }
        }
        check_value_schema("weather", self.weather.iter().map(|w| (&w.values, w.date)))?;
        check_unique_dates("weather", self.weather.iter().map(|w| w.date))?;
        for w in &self.weather {
            self.check_date("weather row", w.date)?;
        }
        let area_ids: HashSet<&str> =
            self.planning_areas.iter().map(|a| a.id.as_str()).collect();
        if area_ids.len() != self.planning_areas.len() {
            return Err(Error::data("duplicate planning-area ids"));
        }
        for a in &self.planning_areas {
            if a.polygon.len() < 3 {
                return Err(Error::data(format!(
                    "planning area {} has a degenerate polygon",
                    a.id
                )));
            }
        }
        let mut detector_location: HashMap<&str, GeoPoint> = HashMap::new();
        let mut motor_keys: HashSet<(&str, NaiveDate)> = HashSet::new();
        for m in &self.motorized_observations {
            self.check_date("motorized observation", m.date)?;
            if !motor_keys.insert((m.detector_id.as_str(), m.date)) {
                return Err(Error::data(format!(
                    "duplicate motorized observation for detector {} on {}",
                    m.detector_id, m.date
                )));
            }
            match detector_location.get(m.detector_id.as_str()) {
                None => {
                    detector_location.insert(m.detector_id.as_str(), m.location);
                }
                Some(loc) if *loc == m.location => {}
                Some(_) => {
                    return Err(Error::data(format!(
                        "detector {} reports from two different locations",
                        m.detector_id
                    )))
                }
            }
        }
        check_value_schema(
            "motorized",
            self.motorized_observations.iter().map(|m| (&m.values, m.date)),
        )?;
        check_unique_dates("holidays", self.holidays.iter().map(|h| h.date))?;
        let segment_ids: HashSet<&str> =
            self.street_graph.iter().map(|e| e.segment.id.as_str()).collect();
        if segment_ids.len() != self.street_graph.len() {
            return Err(Error::data("duplicate street segment ids"));
        }
        let mut strava_seg_keys: HashSet<(&str, NaiveDate)> = HashSet::new();
        for s in &self.strava_segments {
            if !segment_ids.contains(s.segment_id.as_str()) {
                return Err(Error::data(format!(
                    "crowdsourced segment row references unknown street segment {}",
                    s.segment_id
                )));
            }
            self.check_date("crowdsourced segment row", s.date)?;
            if !strava_seg_keys.insert((s.segment_id.as_str(), s.date)) {
                return Err(Error::data(format!(
                    "duplicate crowdsourced segment row for {} on {}",
                    s.segment_id, s.date
                )));
            }
        }
        check_value_schema(
            "crowdsourced segments",
            self.strava_segments.iter().map(|s| (&s.values, s.date)),
        )?;
        let mut strava_hex_keys: HashSet<(HexCell, NaiveDate)> = HashSet::new();
        for h in &self.strava_hexagons {
            self.check_date("crowdsourced hexagon row", h.date)?;
            if !strava_hex_keys.insert((h.cell, h.date)) {
                return Err(Error::data(format!(
                    "duplicate crowdsourced hexagon row for ({}, {}) on {}",
                    h.cell.q, h.cell.r, h.date
                )));
            }
        }
        check_value_schema(
            "crowdsourced hexagons",
            self.strava_hexagons.iter().map(|h| (&h.values, h.date)),
        )?;
        for t in &self.trips {
            self.check_date("trip", t.start.date())?;
        }
        for s in &self.snapshots {
            self.check_date("snapshot", s.ts_date())?;
        }
        Ok(())
    }

    fn check_date(&self, what: &str, date: NaiveDate) -> Result<()> {
        if self.config.contains(date) {
            Ok(())
        } else {
            Err(Error::data(format!(
                "{what} dated {date} falls outside the study periods"
            )))
        }
    }

    /// Daily count observations for a window, aggregated from the hourly data
    /// and checked for uniqueness and window consistency.
    pub fn daily_counts(&self, window: crate::counts::CountWindow) -> Result<Vec<CountObservation>> {
        let obs = crate::counts::aggregate_daily(&self.counts, window)?;
        check_observations(&obs)?;
        Ok(obs)
    }

    /// The socioeconomic survey years present across planning areas.
    pub fn socio_years(&self) -> Vec<i32> {
        let years: BTreeSet<i32> = self
            .planning_areas
            .iter()
            .flat_map(|a| a.socio.keys().copied())
            .collect();
        years.into_iter().collect()
    }
}

impl AvailabilitySnapshot {
    fn ts_date(&self) -> NaiveDate {
        self.timestamp.date()
    }
}

fn check_value_schema<'a>(
    what: &str,
    rows: impl Iterator<Item = (&'a BTreeMap<String, f64>, NaiveDate)>,
) -> Result<()> {
    let mut schema: Option<Vec<&str>> = None;
    for (values, date) in rows {
        let keys: Vec<&str> = values.keys().map(|k| k.as_str()).collect();
        match &schema {
            None => schema = Some(keys),
            Some(s) if *s == keys => {}
            Some(_) => {
                return Err(Error::data(format!(
                    "{what} row for {date} has a different value schema than the first row"
                )))
            }
        }
    }
    Ok(())
}

fn check_unique_dates(what: &str, dates: impl Iterator<Item = NaiveDate>) -> Result<()> {
    let mut seen = HashSet::new();
    for d in dates {
        if !seen.insert(d) {
            return Err(Error::data(format!("{what} has two rows for {d}")));
        }
    }
    Ok(())
}

/// Which socioeconomic survey year a study year reads from: 2019 uses 2019,
/// 2022 uses 2020, anything else the latest survey at or before it.
pub fn map_socio_year(study_year: i32, available_years: &[i32]) -> Result<i32> {
    let target = match study_year {
        2019 => Some(2019),
        2022 => Some(2020),
        y => available_years.iter().copied().filter(|&a| a <= y).max(),
    };
    match target {
        Some(t) if available_years.contains(&t) => Ok(t),
        Some(t) => Err(Error::config(format!(
            "study year {study_year} needs socioeconomic data for {t}, which is not available"
        ))),
        None => Err(Error::config(format!(
            "no socioeconomic survey year available at or before {study_year}"
        ))),
    }
}
