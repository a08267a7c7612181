//! Joins every feature family into one station-day table: one row per
//! station-date with a valid daily count, all columns tagged with their
//! feature group.

use std::collections::{BTreeMap, HashMap};

use chrono::{Datelike, NaiveDate};

use crate::counts::CountWindow;
use crate::error::{Error, Result};
use crate::geo::{GeoPoint, HexGrid, StreetSegment};
use crate::ingest::bundle::SourceBundle;
use crate::ingest::snapshots::Trip;
use crate::pipeline::features::{
    bikeshare_features, motorized_features, segment_radius_sets, static_features,
    strava_hex_features, strava_segment_features, time_holiday_features, Radius,
    BIKESHARE_RADII, STRAVA_RADII,
};
use crate::pipeline::table::{ColumnDef, FeatureGroup, FeatureTable, RowKey};
use crate::util::par_map;

/// Maps a feature name to its group by prefix.
fn group_for(name: &str) -> Result<FeatureGroup> {
    let group = match name.split('_').next().unwrap_or_default() {
        "strava" => FeatureGroup::Crowdsourced,
        "infra" => FeatureGroup::Infrastructure,
        "weather" => FeatureGroup::Weather,
        "socio" => FeatureGroup::Socioeconomic,
        "bs" => FeatureGroup::BikeSharing,
        "holiday" => FeatureGroup::Holiday,
        "moto" => FeatureGroup::Motorized,
        "time" => FeatureGroup::Time,
        _ => return Err(Error::runtime(format!("feature {name} has no group prefix"))),
    };
    Ok(group)
}

/// Trips grouped by the day they start; a trip crossing midnight belongs to
/// the day of its departure.
pub(crate) fn trips_by_start_date(trips: &[Trip]) -> BTreeMap<NaiveDate, Vec<Trip>> {
    let mut map: BTreeMap<NaiveDate, Vec<Trip>> = BTreeMap::new();
    for t in trips {
        map.entry(t.start.date()).or_default().push(t.clone());
    }
    map
}

/// Value keys of one source, taken from its first row (schema consistency
/// across rows is enforced by bundle validation).
fn value_keys<'a, I: IntoIterator<Item = &'a BTreeMap<String, f64>>>(rows: I) -> Vec<String> {
    rows.into_iter()
        .next()
        .map(|m| m.keys().cloned().collect())
        .unwrap_or_default()
}

/// Disc radii (meters) for the station-centric proximity features. The
/// city-wide aggregate is always computed on top of the listed discs, so the
/// lists hold finite radii only.
#[derive(Debug, Clone, PartialEq)]
pub struct RadiiConfig {
    pub strava_m: Vec<f64>,
    pub bikeshare_m: Vec<f64>,
}

impl Default for RadiiConfig {
    fn default() -> Self {
        let meters = |radii: &[Radius]| {
            radii
                .iter()
                .filter_map(|r| match r {
                    Radius::Meters(m) => Some(*m),
                    Radius::City => None,
                })
                .collect()
        };
        RadiiConfig {
            strava_m: meters(&STRAVA_RADII),
            bikeshare_m: meters(&BIKESHARE_RADII),
        }
    }
}

impl RadiiConfig {
    fn validate(&self) -> Result<()> {
        for (name, list) in [("strava", &self.strava_m), ("bike-share", &self.bikeshare_m)] {
            for pair in list.windows(2) {
                if pair[1] <= pair[0] {
                    return Err(Error::config(format!(
                        "{name} radii must be strictly increasing: {:?}",
                        list
                    )));
                }
            }
            if list.iter().any(|&m| !(m > 0.0) || !m.is_finite()) {
                return Err(Error::config(format!(
                    "{name} radii must be positive and finite: {:?}",
                    list
                )));
            }
        }
        Ok(())
    }

    fn discs(meters: &[f64]) -> Vec<Radius> {
        meters.iter().map(|&m| Radius::Meters(m)).chain([Radius::City]).collect()
    }
}

/// Build the full station-day feature table for `window` from a validated
/// bundle and the cleaned, routed bike-share trips, using the default radii.
pub fn assemble(
    bundle: &SourceBundle,
    cleaned_trips: &[Trip],
    window: CountWindow,
) -> Result<FeatureTable> {
    assemble_with(bundle, cleaned_trips, window, &RadiiConfig::default())
}

/// [`assemble`] with configurable proximity radii. Radii shape the column
/// set, so two tables are comparable only when built with the same lists.
pub fn assemble_with(
    bundle: &SourceBundle,
    cleaned_trips: &[Trip],
    window: CountWindow,
    radii: &RadiiConfig,
) -> Result<FeatureTable> {
    radii.validate()?;
    let strava_radii = RadiiConfig::discs(&radii.strava_m);
    let bikeshare_radii = RadiiConfig::discs(&radii.bikeshare_m);
    bundle.validate()?;
    let mut obs = bundle.daily_counts(window)?;
    obs.sort_by(|a, b| (&a.station_id, a.date).cmp(&(&b.station_id, b.date)));

    let stations: BTreeMap<&str, &crate::counts::Station> =
        bundle.stations.iter().map(|s| (s.id.as_str(), s)).collect();
    let grid: &HexGrid = &bundle.config.hex_grid;

    // Per-date indexes shared by all stations.
    let weather: BTreeMap<NaiveDate, &BTreeMap<String, f64>> =
        bundle.weather.iter().map(|w| (w.date, &w.values)).collect();
    let weather_keys = value_keys(bundle.weather.iter().map(|w| &w.values));

    let geometries: Vec<&StreetSegment> =
        bundle.street_graph.iter().map(|e| &e.segment).collect();
    let seg_index: HashMap<&str, usize> = geometries
        .iter()
        .enumerate()
        .map(|(i, s)| (s.id.as_str(), i))
        .collect();
    let mut seg_values: HashMap<NaiveDate, Vec<Option<&BTreeMap<String, f64>>>> = HashMap::new();
    for row in &bundle.strava_segments {
        seg_values
            .entry(row.date)
            .or_insert_with(|| vec![None; geometries.len()])
            [seg_index[row.segment_id.as_str()]] = Some(&row.values);
    }
    let no_segments: Vec<Option<&BTreeMap<String, f64>>> = vec![None; geometries.len()];
    let strava_keys = value_keys(bundle.strava_segments.iter().map(|r| &r.values));

    let mut hex_values: HashMap<NaiveDate, BTreeMap<crate::geo::HexCell, &BTreeMap<String, f64>>> =
        HashMap::new();
    for row in &bundle.strava_hexagons {
        hex_values.entry(row.date).or_default().insert(row.cell, &row.values);
    }

    let mut moto: HashMap<NaiveDate, Vec<(GeoPoint, &BTreeMap<String, f64>)>> = HashMap::new();
    for row in &bundle.motorized_observations {
        moto.entry(row.date).or_default().push((row.location, &row.values));
    }
    let moto_keys = value_keys(bundle.motorized_observations.iter().map(|r| &r.values));

    let holidays: BTreeMap<NaiveDate, (bool, bool)> =
        bundle.holidays.iter().map(|h| (h.date, (h.school, h.public))).collect();

    let trips = trips_by_start_date(cleaned_trips);
    let no_trips: Vec<Trip> = Vec::new();

    // Rows grouped by station so geometry work happens once per station.
    let mut per_station: BTreeMap<&str, Vec<&crate::counts::CountObservation>> = BTreeMap::new();
    for o in &obs {
        per_station.entry(o.station_id.as_str()).or_default().push(o);
    }
    let station_ids: Vec<&str> = per_station.keys().copied().collect();

    type RowOut = (RowKey, crate::counts::StationKind, Vec<(String, f64)>, f64);
    let chunks: Vec<Result<Vec<RowOut>>> = par_map(station_ids.len(), |si| {
        let sid = station_ids[si];
        let station = stations[sid];
        let loc = station.location;
        let sets = segment_radius_sets(&geometries, loc, &strava_radii);
        let own_cell = grid.cell_of(loc);
        let neighbor_cells = HexGrid::neighbors(own_cell);
        let mut static_by_year: BTreeMap<i32, Vec<(String, f64)>> = BTreeMap::new();

        let mut rows = Vec::new();
        for o in &per_station[sid] {
            let date = o.date;
            let mut feats = bikeshare_features(
                trips.get(&date).unwrap_or(&no_trips),
                loc,
                &bikeshare_radii,
            )?;
            feats.extend(strava_segment_features(
                &sets,
                seg_values.get(&date).unwrap_or(&no_segments),
                &strava_keys,
            ));
            let day_hexes = hex_values.get(&date);
            let containing = day_hexes.and_then(|m| m.get(&own_cell).copied());
            let neighbors: Vec<&BTreeMap<String, f64>> = day_hexes
                .map(|m| {
                    neighbor_cells.iter().filter_map(|c| m.get(c).copied()).collect()
                })
                .unwrap_or_default();
            feats.extend(strava_hex_features(containing, &neighbors, &strava_keys));
            for key in &weather_keys {
                let value = weather.get(&date).map_or(f64::NAN, |w| w[key]);
                feats.push((format!("weather_{key}"), value));
            }
            feats.extend(motorized_features(
                moto.get(&date).map_or(&[][..], Vec::as_slice),
                loc,
                &moto_keys,
            ));
            let statics = match static_by_year.entry(date.year()) {
                std::collections::btree_map::Entry::Occupied(e) => e.into_mut(),
                std::collections::btree_map::Entry::Vacant(e) => e.insert(static_features(
                    loc,
                    &bundle.points_of_interest,
                    &bundle.street_graph,
                    &bundle.planning_areas,
                    bundle.config.city_center,
                    date.year(),
                )?),
            };
            feats.extend(statics.iter().cloned());
            feats.extend(time_holiday_features(date, &holidays));
            rows.push((
                RowKey { station_id: sid.to_string(), date },
                station.kind,
                feats,
                o.count as f64,
            ));
        }
        Ok(rows)
    });

    let mut columns: Option<Vec<ColumnDef>> = None;
    let mut table: Option<FeatureTable> = None;
    for chunk in chunks {
        for (key, kind, feats, target) in chunk? {
            if columns.is_none() {
                let defs = feats
                    .iter()
                    .map(|(name, _)| {
                        Ok(ColumnDef { name: name.clone(), group: group_for(name)? })
                    })
                    .collect::<Result<Vec<_>>>()?;
                table = Some(FeatureTable::new(window, defs.clone())?);
                columns = Some(defs);
            }
            let defs = columns.as_ref().unwrap();
            if feats.len() != defs.len()
                || feats.iter().zip(defs).any(|((name, _), def)| *name != def.name)
            {
                return Err(Error::runtime(format!(
                    "feature name sequence for {}:{} differs from the first row",
                    key.station_id, key.date
                )));
            }
            let values = feats.into_iter().map(|(_, v)| v).collect();
            table.as_mut().unwrap().push_row(key, kind, values, target)?;
        }
    }
    let table = table
        .ok_or_else(|| Error::data("no station-days with a valid count; nothing to assemble"))?;
    table.check_unique_rows()?;
    Ok(table)
}
