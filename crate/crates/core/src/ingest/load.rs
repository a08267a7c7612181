//! Bundle persistence: header-first CSV tables, GeoJSON for geometry,
//! newline-delimited JSON for availability snapshots.
//!
//! A bundle directory holds `bundle_meta.json` (study periods, hexagon grid,
//! city center), one CSV per tabular source, `street_graph.geojson`,
//! `planning_areas.geojson`, and optionally `snapshots.ndjson` and
//! `trips.csv` — a bundle carries snapshots or trips, so either file may be
//! absent. Trip route geometry is a derived artifact and is not persisted;
//! saved trips keep only their endpoints, times, and (when routed) distance
//! and speed.

use std::collections::BTreeMap;
use std::fs;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use chrono::{NaiveDate, NaiveDateTime, Timelike};
use serde::{Deserialize, Serialize};
use serde_json::json;

use crate::counts::{HourlyCount, Station, StationKind};
use crate::error::{Error, Result};
use crate::geo::{GeoPoint, HexCell, StreetSegment};
use crate::ingest::bundle::{
    BundleConfig, Holiday, MotorizedObservation, PlanningArea, Poi, SourceBundle, StravaHexDay,
    StravaSegmentDay, WeatherDaily,
};
use crate::ingest::routing::StreetEdge;
use crate::ingest::snapshots::{AvailabilitySnapshot, Trip};

const DATE_FMT: &str = "%Y-%m-%d";
const TS_FMT: &str = "%Y-%m-%dT%H:%M:%S";

fn ctx(file: &str, line: u64, msg: impl std::fmt::Display) -> Error {
    Error::data(format!("{file}:{line}: {msg}"))
}

fn parse_date(file: &str, line: u64, s: &str) -> Result<NaiveDate> {
    NaiveDate::parse_from_str(s, DATE_FMT).map_err(|e| ctx(file, line, format!("bad date {s:?}: {e}")))
}

fn parse_ts(file: &str, line: u64, s: &str) -> Result<NaiveDateTime> {
    NaiveDateTime::parse_from_str(s, TS_FMT)
        .map_err(|e| ctx(file, line, format!("bad timestamp {s:?}: {e}")))
}

fn parse_f64(file: &str, line: u64, s: &str) -> Result<f64> {
    s.parse::<f64>().map_err(|e| ctx(file, line, format!("bad number {s:?}: {e}")))
}

/// A CSV reader that checks the header and reports errors as file:line.
struct Table {
    file: String,
    headers: Vec<String>,
    rows: Vec<(u64, Vec<String>)>,
}

impl Table {
    fn open(dir: &Path, name: &str) -> Result<Self> {
        let path = dir.join(name);
        let mut rdr = csv::ReaderBuilder::new()
            .has_headers(true)
            .from_path(&path)
            .map_err(|e| Error::data(format!("{name}: {e}")))?;
        let headers: Vec<String> =
            rdr.headers().map_err(|e| Error::data(format!("{name}: {e}")))?.iter().map(String::from).collect();
        let mut rows = Vec::new();
        for rec in rdr.records() {
            let rec = rec.map_err(|e| Error::data(format!("{name}: {e}")))?;
            let line = rec.position().map_or(0, |p| p.line());
            rows.push((line, rec.iter().map(String::from).collect()));
        }
        Ok(Table { file: name.to_string(), headers, rows })
    }

    fn expect_prefix(&self, cols: &[&str]) -> Result<()> {
        if self.headers.len() < cols.len()
            || !self.headers.iter().zip(cols).all(|(h, c)| h == c)
        {
            return Err(Error::data(format!(
                "{}: header must start with {:?}, found {:?}",
                self.file, cols, self.headers
            )));
        }
        Ok(())
    }

    fn expect_exact(&self, cols: &[&str]) -> Result<()> {
        if self.headers != cols {
            return Err(Error::data(format!(
                "{}: header must be {:?}, found {:?}",
                self.file, cols, self.headers
            )));
        }
        Ok(())
    }
}

fn write_csv(dir: &Path, name: &str, header: &[String], rows: &[Vec<String>]) -> Result<()> {
    let mut w = csv::Writer::from_path(dir.join(name))?;
    w.write_record(header)?;
    for row in rows {
        w.write_record(row)?;
    }
    w.flush()?;
    Ok(())
}

fn fmt_f64(v: f64) -> String {
    format!("{v}")
}

// --- GeoJSON plumbing ------------------------------------------------------

#[derive(Serialize, Deserialize)]
struct FeatureCollection {
    #[serde(rename = "type")]
    kind: String,
    features: Vec<Feature>,
}

#[derive(Serialize, Deserialize)]
struct Feature {
    #[serde(rename = "type")]
    kind: String,
    geometry: Geometry,
    properties: serde_json::Value,
}

#[derive(Serialize, Deserialize)]
struct Geometry {
    #[serde(rename = "type")]
    kind: String,
    coordinates: serde_json::Value,
}

fn line_coords(points: &[GeoPoint]) -> serde_json::Value {
    json!(points.iter().map(|p| [p.lon, p.lat]).collect::<Vec<_>>())
}

fn parse_positions(file: &str, v: &serde_json::Value) -> Result<Vec<GeoPoint>> {
    let arr = v.as_array().ok_or_else(|| Error::data(format!("{file}: coordinates must be an array")))?;
    arr.iter()
        .map(|pos| {
            let pair = pos.as_array().filter(|a| a.len() >= 2).ok_or_else(|| {
                Error::data(format!("{file}: each position must be [lon, lat]"))
            })?;
            Ok(GeoPoint {
                lon: pair[0].as_f64().ok_or_else(|| Error::data(format!("{file}: bad longitude")))?,
                lat: pair[1].as_f64().ok_or_else(|| Error::data(format!("{file}: bad latitude")))?,
            })
        })
        .collect()
}

fn read_feature_collection(dir: &Path, name: &str) -> Result<FeatureCollection> {
    let text = fs::read_to_string(dir.join(name)).map_err(|e| Error::data(format!("{name}: {e}")))?;
    let fc: FeatureCollection =
        serde_json::from_str(&text).map_err(|e| Error::data(format!("{name}: {e}")))?;
    if fc.kind != "FeatureCollection" {
        return Err(Error::data(format!("{name}: not a FeatureCollection")));
    }
    Ok(fc)
}

// --- Save ------------------------------------------------------------------

/// Write a bundle into `dir`, creating it if needed.
pub fn save_bundle(bundle: &SourceBundle, dir: &Path) -> Result<()> {
    fs::create_dir_all(dir)?;
    let meta = serde_json::to_string_pretty(&bundle.config)?;
    fs::write(dir.join("bundle_meta.json"), meta)?;

    write_csv(
        dir,
        "stations.csv",
        &["station_id", "lat", "lon", "kind", "installed_year"].map(String::from),
        &bundle
            .stations
            .iter()
            .map(|s| {
                vec![
                    s.id.clone(),
                    fmt_f64(s.location.lat),
                    fmt_f64(s.location.lon),
                    s.kind.name().to_string(),
                    s.installed_year.map(|y| y.to_string()).unwrap_or_default(),
                ]
            })
            .collect::<Vec<_>>(),
    )?;

    write_csv(
        dir,
        "counts.csv",
        &["station_id", "ts", "count"].map(String::from),
        &bundle
            .counts
            .iter()
            .map(|c| vec![c.station_id.clone(), c.ts.format(TS_FMT).to_string(), c.count.to_string()])
            .collect::<Vec<_>>(),
    )?;

    let weather_keys: Vec<String> =
        bundle.weather.first().map(|w| w.values.keys().cloned().collect()).unwrap_or_default();
    let mut header = vec!["date".to_string()];
    header.extend(weather_keys.iter().cloned());
    write_csv(
        dir,
        "weather.csv",
        &header,
        &bundle
            .weather
            .iter()
            .map(|w| {
                let mut row = vec![w.date.format(DATE_FMT).to_string()];
                row.extend(weather_keys.iter().map(|k| fmt_f64(w.values[k])));
                row
            })
            .collect::<Vec<_>>(),
    )?;

    write_csv(
        dir,
        "points_of_interest.csv",
        &["kind", "lat", "lon"].map(String::from),
        &bundle
            .points_of_interest
            .iter()
            .map(|p| vec![p.kind.clone(), fmt_f64(p.location.lat), fmt_f64(p.location.lon)])
            .collect::<Vec<_>>(),
    )?;

    let motor_keys: Vec<String> = bundle
        .motorized_observations
        .first()
        .map(|m| m.values.keys().cloned().collect())
        .unwrap_or_default();
    let mut header = vec!["detector_id".to_string(), "lat".into(), "lon".into(), "date".into()];
    header.extend(motor_keys.iter().cloned());
    write_csv(
        dir,
        "motorized.csv",
        &header,
        &bundle
            .motorized_observations
            .iter()
            .map(|m| {
                let mut row = vec![
                    m.detector_id.clone(),
                    fmt_f64(m.location.lat),
                    fmt_f64(m.location.lon),
                    m.date.format(DATE_FMT).to_string(),
                ];
                row.extend(motor_keys.iter().map(|k| fmt_f64(m.values[k])));
                row
            })
            .collect::<Vec<_>>(),
    )?;

    write_csv(
        dir,
        "holidays.csv",
        &["date", "school", "public"].map(String::from),
        &bundle
            .holidays
            .iter()
            .map(|h| {
                vec![
                    h.date.format(DATE_FMT).to_string(),
                    (h.school as u8).to_string(),
                    (h.public as u8).to_string(),
                ]
            })
            .collect::<Vec<_>>(),
    )?;

    let seg_keys: Vec<String> =
        bundle.strava_segments.first().map(|s| s.values.keys().cloned().collect()).unwrap_or_default();
    let mut header = vec!["segment_id".to_string(), "date".into()];
    header.extend(seg_keys.iter().cloned());
    write_csv(
        dir,
        "strava_segments.csv",
        &header,
        &bundle
            .strava_segments
            .iter()
            .map(|s| {
                let mut row = vec![s.segment_id.clone(), s.date.format(DATE_FMT).to_string()];
                row.extend(seg_keys.iter().map(|k| fmt_f64(s.values[k])));
                row
            })
            .collect::<Vec<_>>(),
    )?;

    let hex_keys: Vec<String> =
        bundle.strava_hexagons.first().map(|h| h.values.keys().cloned().collect()).unwrap_or_default();
    let mut header = vec!["q".to_string(), "r".into(), "date".into()];
    header.extend(hex_keys.iter().cloned());
    write_csv(
        dir,
        "strava_hexagons.csv",
        &header,
        &bundle
            .strava_hexagons
            .iter()
            .map(|h| {
                let mut row = vec![
                    h.cell.q.to_string(),
                    h.cell.r.to_string(),
                    h.date.format(DATE_FMT).to_string(),
                ];
                row.extend(hex_keys.iter().map(|k| fmt_f64(h.values[k])));
                row
            })
            .collect::<Vec<_>>(),
    )?;

    let features: Vec<Feature> = bundle
        .street_graph
        .iter()
        .map(|e| Feature {
            kind: "Feature".to_string(),
            geometry: Geometry {
                kind: "LineString".to_string(),
                coordinates: line_coords(&e.segment.polyline),
            },
            properties: json!({
                "id": e.segment.id,
                "bicycle": e.bicycle,
                "maxspeed": e.maxspeed,
            }),
        })
        .collect();
    let fc = FeatureCollection { kind: "FeatureCollection".to_string(), features };
    fs::write(dir.join("street_graph.geojson"), serde_json::to_string(&fc)?)?;

    let features: Vec<Feature> = bundle
        .planning_areas
        .iter()
        .map(|a| {
            let mut ring = a.polygon.clone();
            if ring.first() != ring.last() {
                ring.push(ring[0]);
            }
            Ok(Feature {
                kind: "Feature".to_string(),
                geometry: Geometry {
                    kind: "Polygon".to_string(),
                    coordinates: json!([line_coords(&ring)]),
                },
                properties: json!({
                    "id": a.id,
                    "land_use_km2": a.land_use_km2,
                    "socio": a.socio,
                }),
            })
        })
        .collect::<Result<_>>()?;
    let fc = FeatureCollection { kind: "FeatureCollection".to_string(), features };
    fs::write(dir.join("planning_areas.geojson"), serde_json::to_string(&fc)?)?;

    if !bundle.snapshots.is_empty() {
        let mut out = fs::File::create(dir.join("snapshots.ndjson"))?;
        for s in &bundle.snapshots {
            let bikes: Vec<_> = s
                .bikes
                .iter()
                .map(|(id, p)| json!({"id": id, "lat": p.lat, "lon": p.lon}))
                .collect();
            let line = json!({"ts": s.timestamp.format(TS_FMT).to_string(), "bikes": bikes});
            writeln!(out, "{line}")?;
        }
    }

    if !bundle.trips.is_empty() {
        save_trips(&bundle.trips, &dir.join("trips.csv"))?;
    }
    Ok(())
}

/// Write trips to a standalone CSV in the same format `trips.csv` uses inside
/// a bundle directory. Route geometry is a derived artifact and is not saved.
pub fn save_trips(trips: &[Trip], path: &Path) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record([
        "bike_id",
        "origin_lat",
        "origin_lon",
        "destination_lat",
        "destination_lon",
        "start",
        "end",
        "routed_distance_m",
        "mean_speed_kmh",
    ])?;
    for t in trips {
        w.write_record(&[
            t.bike_id.clone(),
            fmt_f64(t.origin.lat),
            fmt_f64(t.origin.lon),
            fmt_f64(t.destination.lat),
            fmt_f64(t.destination.lon),
            t.start.format(TS_FMT).to_string(),
            t.end.format(TS_FMT).to_string(),
            t.routed_distance.map(fmt_f64).unwrap_or_default(),
            t.mean_speed.map(fmt_f64).unwrap_or_default(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

// --- Load ------------------------------------------------------------------

/// Read a bundle from `dir` and validate it. The study periods, hexagon
/// grid, and city center come from `bundle_meta.json` unless `override_config`
/// supplies them.
pub fn load_bundle(dir: &Path, override_config: Option<BundleConfig>) -> Result<SourceBundle> {
    let config = match override_config {
        Some(c) => c,
        None => {
            let text = fs::read_to_string(dir.join("bundle_meta.json"))
                .map_err(|e| Error::data(format!("bundle_meta.json: {e}")))?;
            serde_json::from_str(&text).map_err(|e| Error::data(format!("bundle_meta.json: {e}")))?
        }
    };

    let t = Table::open(dir, "stations.csv")?;
    t.expect_exact(&["station_id", "lat", "lon", "kind", "installed_year"])?;
    let mut stations = Vec::new();
    for (line, row) in &t.rows {
        stations.push(Station {
            id: row[0].clone(),
            location: GeoPoint {
                lat: parse_f64(&t.file, *line, &row[1])?,
                lon: parse_f64(&t.file, *line, &row[2])?,
            },
            kind: StationKind::parse(&row[3]).map_err(|e| ctx(&t.file, *line, e))?,
            installed_year: if row[4].is_empty() {
                None
            } else {
                Some(row[4].parse().map_err(|e| ctx(&t.file, *line, format!("bad year: {e}")))?)
            },
        });
    }

    let t = Table::open(dir, "counts.csv")?;
    t.expect_exact(&["station_id", "ts", "count"])?;
    let mut counts = Vec::new();
    for (line, row) in &t.rows {
        let raw: i64 =
            row[2].parse().map_err(|e| ctx(&t.file, *line, format!("bad count: {e}")))?;
        if raw < 0 {
            return Err(ctx(&t.file, *line, format!("negative count {raw}")));
        }
        counts.push(HourlyCount {
            station_id: row[0].clone(),
            ts: parse_ts(&t.file, *line, &row[1])?,
            count: raw as u64,
        });
    }

    let t = Table::open(dir, "weather.csv")?;
    t.expect_prefix(&["date"])?;
    let keys: Vec<String> = t.headers[1..].to_vec();
    let mut weather = Vec::new();
    for (line, row) in &t.rows {
        let mut values = BTreeMap::new();
        for (k, cell) in keys.iter().zip(&row[1..]) {
            values.insert(k.clone(), parse_f64(&t.file, *line, cell)?);
        }
        weather.push(WeatherDaily { date: parse_date(&t.file, *line, &row[0])?, values });
    }

    let t = Table::open(dir, "points_of_interest.csv")?;
    t.expect_exact(&["kind", "lat", "lon"])?;
    let mut points_of_interest = Vec::new();
    for (line, row) in &t.rows {
        points_of_interest.push(Poi {
            kind: row[0].clone(),
            location: GeoPoint {
                lat: parse_f64(&t.file, *line, &row[1])?,
                lon: parse_f64(&t.file, *line, &row[2])?,
            },
        });
    }

    let t = Table::open(dir, "motorized.csv")?;
    t.expect_prefix(&["detector_id", "lat", "lon", "date"])?;
    let keys: Vec<String> = t.headers[4..].to_vec();
    let mut motorized_observations = Vec::new();
    for (line, row) in &t.rows {
        let mut values = BTreeMap::new();
        for (k, cell) in keys.iter().zip(&row[4..]) {
            values.insert(k.clone(), parse_f64(&t.file, *line, cell)?);
        }
        motorized_observations.push(MotorizedObservation {
            detector_id: row[0].clone(),
            location: GeoPoint {
                lat: parse_f64(&t.file, *line, &row[1])?,
                lon: parse_f64(&t.file, *line, &row[2])?,
            },
            date: parse_date(&t.file, *line, &row[3])?,
            values,
        });
    }

    let t = Table::open(dir, "holidays.csv")?;
    t.expect_exact(&["date", "school", "public"])?;
    let mut holidays = Vec::new();
    for (line, row) in &t.rows {
        let flag = |s: &str| match s {
            "0" => Ok(false),
            "1" => Ok(true),
            other => Err(ctx(&t.file, *line, format!("bad flag {other:?}, expected 0 or 1"))),
        };
        holidays.push(Holiday {
            date: parse_date(&t.file, *line, &row[0])?,
            school: flag(&row[1])?,
            public: flag(&row[2])?,
        });
    }

    let t = Table::open(dir, "strava_segments.csv")?;
    t.expect_prefix(&["segment_id", "date"])?;
    let keys: Vec<String> = t.headers[2..].to_vec();
    let mut strava_segments = Vec::new();
    for (line, row) in &t.rows {
        let mut values = BTreeMap::new();
        for (k, cell) in keys.iter().zip(&row[2..]) {
            values.insert(k.clone(), parse_f64(&t.file, *line, cell)?);
        }
        strava_segments.push(StravaSegmentDay {
            segment_id: row[0].clone(),
            date: parse_date(&t.file, *line, &row[1])?,
            values,
        });
    }

    let t = Table::open(dir, "strava_hexagons.csv")?;
    t.expect_prefix(&["q", "r", "date"])?;
    let keys: Vec<String> = t.headers[3..].to_vec();
    let mut strava_hexagons = Vec::new();
    for (line, row) in &t.rows {
        let mut values = BTreeMap::new();
        for (k, cell) in keys.iter().zip(&row[3..]) {
            values.insert(k.clone(), parse_f64(&t.file, *line, cell)?);
        }
        strava_hexagons.push(StravaHexDay {
            cell: HexCell {
                q: row[0].parse().map_err(|e| ctx(&t.file, *line, format!("bad q: {e}")))?,
                r: row[1].parse().map_err(|e| ctx(&t.file, *line, format!("bad r: {e}")))?,
            },
            date: parse_date(&t.file, *line, &row[2])?,
            values,
        });
    }

    let fc = read_feature_collection(dir, "street_graph.geojson")?;
    let mut street_graph = Vec::new();
    for f in fc.features {
        if f.geometry.kind != "LineString" {
            return Err(Error::data(format!(
                "street_graph.geojson: expected LineString, found {}",
                f.geometry.kind
            )));
        }
        let pts = parse_positions("street_graph.geojson", &f.geometry.coordinates)?;
        let id = f.properties["id"]
            .as_str()
            .ok_or_else(|| Error::data("street_graph.geojson: feature without id"))?
            .to_string();
        let bicycle = f.properties["bicycle"]
            .as_bool()
            .ok_or_else(|| Error::data(format!("street_graph.geojson: segment {id} lacks bicycle flag")))?;
        let maxspeed = match &f.properties["maxspeed"] {
            serde_json::Value::Null => None,
            v => Some(v.as_f64().ok_or_else(|| {
                Error::data(format!("street_graph.geojson: segment {id} has non-numeric maxspeed"))
            })?),
        };
        street_graph.push(StreetEdge { segment: StreetSegment::new(id, pts)?, bicycle, maxspeed });
    }

    let fc = read_feature_collection(dir, "planning_areas.geojson")?;
    let mut planning_areas = Vec::new();
    for f in fc.features {
        if f.geometry.kind != "Polygon" {
            return Err(Error::data(format!(
                "planning_areas.geojson: expected Polygon, found {}",
                f.geometry.kind
            )));
        }
        let rings = f.geometry.coordinates.as_array().ok_or_else(|| {
            Error::data("planning_areas.geojson: polygon coordinates must be an array of rings")
        })?;
        let outer = rings
            .first()
            .ok_or_else(|| Error::data("planning_areas.geojson: polygon without a ring"))?;
        let mut polygon = parse_positions("planning_areas.geojson", outer)?;
        if polygon.len() >= 2 && polygon.first() == polygon.last() {
            polygon.pop();
        }
        let id = f.properties["id"]
            .as_str()
            .ok_or_else(|| Error::data("planning_areas.geojson: feature without id"))?
            .to_string();
        let land_use_km2: BTreeMap<String, f64> =
            serde_json::from_value(f.properties["land_use_km2"].clone())
                .map_err(|e| Error::data(format!("planning_areas.geojson: area {id}: {e}")))?;
        let socio: BTreeMap<i32, BTreeMap<String, f64>> =
            serde_json::from_value(f.properties["socio"].clone())
                .map_err(|e| Error::data(format!("planning_areas.geojson: area {id}: {e}")))?;
        planning_areas.push(PlanningArea { id, polygon, land_use_km2, socio });
    }

    let snapshots = load_snapshots(dir)?;
    let trips = load_trips(dir)?;

    let bundle = SourceBundle {
        config,
        stations,
        counts,
        weather,
        planning_areas,
        points_of_interest,
        motorized_observations,
        holidays,
        strava_segments,
        strava_hexagons,
        street_graph,
        snapshots,
        trips,
    };
    bundle.validate()?;
    Ok(bundle)
}

fn load_snapshots(dir: &Path) -> Result<Vec<AvailabilitySnapshot>> {
    let path = dir.join("snapshots.ndjson");
    if !path.exists() {
        return Ok(Vec::new());
    }
    #[derive(Deserialize)]
    struct BikeLine {
        id: String,
        lat: f64,
        lon: f64,
    }
    #[derive(Deserialize)]
    struct SnapLine {
        ts: String,
        bikes: Vec<BikeLine>,
    }
    let reader = BufReader::new(fs::File::open(&path)?);
    let mut snapshots = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let n = i as u64 + 1;
        let parsed: SnapLine = serde_json::from_str(&line)
            .map_err(|e| ctx("snapshots.ndjson", n, e))?;
        let timestamp = parse_ts("snapshots.ndjson", n, &parsed.ts)?;
        if timestamp.second() != 0 || timestamp.nanosecond() != 0 {
            return Err(ctx("snapshots.ndjson", n, "snapshot timestamps have minute resolution"));
        }
        snapshots.push(AvailabilitySnapshot {
            timestamp,
            bikes: parsed
                .bikes
                .into_iter()
                .map(|b| (b.id, GeoPoint { lat: b.lat, lon: b.lon }))
                .collect(),
        });
    }
    Ok(snapshots)
}

fn load_trips(dir: &Path) -> Result<Vec<Trip>> {
    if !dir.join("trips.csv").exists() {
        return Ok(Vec::new());
    }
    let t = Table::open(dir, "trips.csv")?;
    t.expect_exact(&[
        "bike_id",
        "origin_lat",
        "origin_lon",
        "destination_lat",
        "destination_lon",
        "start",
        "end",
        "routed_distance_m",
        "mean_speed_kmh",
    ])?;
    let mut trips = Vec::new();
    for (line, row) in &t.rows {
        let mut trip = Trip::new(
            row[0].clone(),
            GeoPoint {
                lat: parse_f64(&t.file, *line, &row[1])?,
                lon: parse_f64(&t.file, *line, &row[2])?,
            },
            GeoPoint {
                lat: parse_f64(&t.file, *line, &row[3])?,
                lon: parse_f64(&t.file, *line, &row[4])?,
            },
            parse_ts(&t.file, *line, &row[5])?,
            parse_ts(&t.file, *line, &row[6])?,
        )
        .map_err(|e| ctx(&t.file, *line, e))?;
        if !row[7].is_empty() {
            trip.routed_distance = Some(parse_f64(&t.file, *line, &row[7])?);
        }
        if !row[8].is_empty() {
            trip.mean_speed = Some(parse_f64(&t.file, *line, &row[8])?);
        }
        trips.push(trip);
    }
    Ok(trips)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ingest::synth::{generate_synthetic_city, SynthConfig};

    #[test]
    fn bundle_round_trips_through_save_and_load() {
        let cfg = SynthConfig {
            n_long: 4,
            n_short: 1,
            n_days: 6,
            extent_km: 3.0,
            ..SynthConfig::default()
        };
        let (bundle, _) = generate_synthetic_city(3, &cfg).unwrap();
        let dir = tempfile::tempdir().unwrap();
        save_bundle(&bundle, dir.path()).unwrap();
        let loaded = load_bundle(dir.path(), None).unwrap();
        assert_eq!(
            serde_json::to_string(&bundle).unwrap(),
            serde_json::to_string(&loaded).unwrap()
        );
        // Saving the loaded bundle reproduces the files byte for byte.
        let dir2 = tempfile::tempdir().unwrap();
        save_bundle(&loaded, dir2.path()).unwrap();
        for name in ["counts.csv", "weather.csv", "strava_segments.csv", "street_graph.geojson"] {
            let a = fs::read(dir.path().join(name)).unwrap();
            let b = fs::read(dir2.path().join(name)).unwrap();
            assert_eq!(a, b, "{name} differs");
        }
    }

    #[test]
    fn snapshots_round_trip_through_ndjson() {
        let cfg = SynthConfig { n_long: 3, n_short: 0, n_days: 2, extent_km: 2.0, ..SynthConfig::default() };
        let (mut bundle, _) = generate_synthetic_city(5, &cfg).unwrap();
        bundle.trips.clear();
        let day = bundle.config.study_periods[0].0;
        let p = GeoPoint { lat: 52.5, lon: 13.4 };
        bundle.snapshots = vec![
            AvailabilitySnapshot {
                timestamp: day.and_hms_opt(9, 0, 0).unwrap(),
                bikes: vec![("b1".to_string(), p)],
            },
            AvailabilitySnapshot { timestamp: day.and_hms_opt(9, 1, 0).unwrap(), bikes: vec![] },
            AvailabilitySnapshot {
                timestamp: day.and_hms_opt(9, 2, 0).unwrap(),
                bikes: vec![("b1".to_string(), GeoPoint { lat: 52.51, lon: 13.41 })],
            },
        ];
        let dir = tempfile::tempdir().unwrap();
        save_bundle(&bundle, dir.path()).unwrap();
        let loaded = load_bundle(dir.path(), None).unwrap();
        assert_eq!(loaded.snapshots.len(), 3);
        assert_eq!(
            serde_json::to_string(&bundle.snapshots).unwrap(),
            serde_json::to_string(&loaded.snapshots).unwrap()
        );
        assert!(loaded.trips.is_empty());
    }

    #[test]
    fn empty_counts_file_with_header_loads_as_zero_observations() {
        let cfg = SynthConfig { n_long: 3, n_short: 0, n_days: 0, extent_km: 2.0, ..SynthConfig::default() };
        let (bundle, _) = generate_synthetic_city(1, &cfg).unwrap();
        let dir = tempfile::tempdir().unwrap();
        save_bundle(&bundle, dir.path()).unwrap();
        let loaded = load_bundle(dir.path(), None).unwrap();
        assert!(loaded.counts.is_empty());
        assert_eq!(loaded.stations.len(), 3);
    }

    #[test]
    fn negative_count_is_rejected_naming_the_line() {
        let cfg = SynthConfig { n_long: 3, n_short: 0, n_days: 2, extent_km: 2.0, ..SynthConfig::default() };
        let (bundle, _) = generate_synthetic_city(2, &cfg).unwrap();
        let dir = tempfile::tempdir().unwrap();
        save_bundle(&bundle, dir.path()).unwrap();
        let path = dir.path().join("counts.csv");
        let mut text = fs::read_to_string(&path).unwrap();
        // Corrupt the first data row's count.
        let second_line_start = text.find('\n').unwrap() + 1;
        let cell_start = text[second_line_start..].rfind(',').map(|_| {
            let line_end = text[second_line_start..].find('\n').unwrap() + second_line_start;
            text[..line_end].rfind(',').unwrap() + 1
        });
        let cell_start = cell_start.unwrap();
        let line_end = text[cell_start..].find('\n').unwrap() + cell_start;
        text.replace_range(cell_start..line_end, "-4");
        fs::write(&path, text).unwrap();
        let err = load_bundle(dir.path(), None).unwrap_err().to_string();
        assert!(err.contains("counts.csv:2"), "{err}");
        assert!(err.contains("negative count"), "{err}");
    }

    #[test]
    fn date_outside_study_periods_is_rejected_on_load() {
        let cfg = SynthConfig { n_long: 3, n_short: 0, n_days: 2, extent_km: 2.0, ..SynthConfig::default() };
        let (bundle, _) = generate_synthetic_city(4, &cfg).unwrap();
        let dir = tempfile::tempdir().unwrap();
        save_bundle(&bundle, dir.path()).unwrap();
        let mut cfg2 = bundle.config.clone();
        cfg2.study_periods = vec![(
            NaiveDate::from_ymd_opt(2022, 4, 1).unwrap(),
            NaiveDate::from_ymd_opt(2022, 4, 1).unwrap(),
        )];
        let err = load_bundle(dir.path(), Some(cfg2)).unwrap_err().to_string();
        assert!(err.contains("study period"), "{err}");
    }

    #[test]
    fn unknown_station_in_counts_is_an_unresolved_foreign_key() {
        let cfg = SynthConfig { n_long: 3, n_short: 0, n_days: 2, extent_km: 2.0, ..SynthConfig::default() };
        let (bundle, _) = generate_synthetic_city(6, &cfg).unwrap();
        let dir = tempfile::tempdir().unwrap();
        save_bundle(&bundle, dir.path()).unwrap();
        let path = dir.path().join("counts.csv");
        let text = fs::read_to_string(&path).unwrap().replacen("lt00", "ghost", 1);
        fs::write(&path, text).unwrap();
        let err = load_bundle(dir.path(), None).unwrap_err().to_string();
        assert!(err.contains("ghost"), "{err}");
    }
}
