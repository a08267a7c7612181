//! A deterministic synthetic city: street grid, stations, weather, trips,
//! crowdsourced riding metrics, and counts drawn from a known generative
//! model whose parameters are returned for oracle checks.

use std::collections::{BTreeMap, BTreeSet};

use chrono::{Datelike, Duration, NaiveDate};
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::counts::{HourlyCount, Station, StationKind};
use crate::error::{Error, Result};
use crate::geo::{haversine_m, segment_midpoint, GeoPoint, HexGrid, StreetSegment, EARTH_RADIUS_M};
use crate::ingest::bundle::{
    BundleConfig, Holiday, MotorizedObservation, PlanningArea, Poi, SourceBundle, StravaHexDay,
    StravaSegmentDay, WeatherDaily,
};
use crate::ingest::routing::StreetEdge;
use crate::ingest::snapshots::Trip;
use crate::util::rng_from;

/// Knobs for the synthetic city.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SynthConfig {
    /// Long-term counting stations; at least 3.
    pub n_long: usize,
    /// Short-term counting stations.
    pub n_short: usize,
    /// Consecutive days of data starting at `start`.
    pub n_days: usize,
    /// Side length of the square city in km.
    pub extent_km: f64,
    /// Scale on the irreducible per-observation noise; 0 makes counts equal
    /// the rounded generative mean.
    pub noise: f64,
    /// Bike-share rentals per day, before weekend damping.
    pub trips_per_day: usize,
    pub start: NaiveDate,
}

impl Default for SynthConfig {
    fn default() -> Self {
        SynthConfig {
            n_long: 8,
            n_short: 3,
            n_days: 60,
            extent_km: 6.0,
            noise: 1.0,
            trips_per_day: 120,
            start: NaiveDate::from_ymd_opt(2022, 4, 1).unwrap(),
        }
    }
}

/// The generative model behind the synthetic counts. The daily mean for a
/// station is `base · exp(station_effect) · day_factor^beta_city ·
/// weather_term`, and observed counts add log-normal noise with
/// `sigma_noise` before rounding.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SynthTruth {
    pub base: f64,
    pub beta_city: f64,
    pub sigma_noise: f64,
    pub station_effect: BTreeMap<String, f64>,
    pub day_factor: BTreeMap<NaiveDate, f64>,
    pub weather_term: BTreeMap<NaiveDate, f64>,
}

impl SynthTruth {
    /// The exact generative mean for one station-date, if both exist.
    pub fn mean(&self, station_id: &str, date: NaiveDate) -> Option<f64> {
        let u = self.station_effect.get(station_id)?;
        let day = self.day_factor.get(&date)?;
        let w = self.weather_term.get(&date)?;
        Some(self.base * u.exp() * day.powf(self.beta_city) * w)
    }
}

/// Standard normal via Box–Muller.
fn normal(rng: &mut ChaCha8Rng) -> f64 {
    let u1: f64 = rng.gen::<f64>().max(f64::MIN_POSITIVE);
    let u2: f64 = rng.gen();
    (-2.0 * u1.ln()).sqrt() * (2.0 * std::f64::consts::PI * u2).cos()
}

/// Round a non-negative quantity to the nearest multiple of five.
fn round5(x: f64) -> f64 {
    (x.max(0.0) / 5.0).round() * 5.0
}

/// Split a daily total over 24 hours by largest remainder, so the hourly
/// rows always sum back to the daily count exactly.
fn apportion_hours(total: u64, profile: &[f64; 24]) -> [u64; 24] {
    let sum: f64 = profile.iter().sum();
    let mut out = [0u64; 24];
    if total == 0 {
        return out;
    }
    let mut fracs: Vec<(f64, usize)> = Vec::with_capacity(24);
    let mut assigned = 0u64;
    for h in 0..24 {
        let exact = total as f64 * profile[h] / sum;
        out[h] = exact.floor() as u64;
        assigned += out[h];
        fracs.push((exact - exact.floor(), h));
    }
    fracs.sort_by(|a, b| b.0.partial_cmp(&a.0).unwrap().then(a.1.cmp(&b.1)));
    for &(_, h) in fracs.iter().take((total - assigned) as usize) {
        out[h] += 1;
    }
    out
}

const HOUR_PROFILE: [f64; 24] = [
    1.0, 1.0, 1.0, 1.0, 2.0, 4.0, 8.0, 14.0, 16.0, 12.0, 9.0, 8.0, 8.0, 8.0, 9.0, 10.0, 12.0,
    15.0, 14.0, 10.0, 7.0, 5.0, 3.0, 2.0,
];

const CITY_CENTER: GeoPoint = GeoPoint { lat: 52.5, lon: 13.4 };

fn offset_point(base: GeoPoint, north_m: f64, east_m: f64) -> GeoPoint {
    let dlat = north_m / EARTH_RADIUS_M * 180.0 / std::f64::consts::PI;
    let dlon = east_m / (EARTH_RADIUS_M * base.lat.to_radians().cos()) * 180.0
        / std::f64::consts::PI;
    GeoPoint { lat: base.lat + dlat, lon: base.lon + dlon }
}

fn public_holiday(date: NaiveDate) -> bool {
    matches!(
        (date.month(), date.day()),
        (1, 1) | (3, 8) | (5, 1) | (10, 3) | (12, 25) | (12, 26)
    )
}

fn school_holiday(date: NaiveDate) -> bool {
    let y = date.year();
    let ranges = [
        ((2, 1), (2, 5)),
        ((4, 11), (4, 23)),
        ((6, 23), (8, 5)),
        ((10, 24), (10, 31)),
        ((12, 22), (12, 31)),
    ];
    ranges.iter().any(|&((ma, da), (mb, db))| {
        let a = NaiveDate::from_ymd_opt(y, ma, da).unwrap();
        let b = NaiveDate::from_ymd_opt(y, mb, db).unwrap();
        a <= date && date <= b
    })
}

/// Generate a complete, internally consistent city. The same seed and config
/// always produce the identical bundle and truth.
pub fn generate_synthetic_city(seed: u64, config: &SynthConfig) -> Result<(SourceBundle, SynthTruth)> {
    if config.n_long < 3 {
        return Err(Error::config("synthetic city needs at least 3 long-term stations"));
    }
    let extent_m = config.extent_km * 1000.0;
    let half = extent_m / 2.0;

    // Street grid: nodes every 500 m, horizontal and vertical edges.
    let spacing = 500.0;
    let per_side = (extent_m / spacing).round() as i64 + 1;
    let node_at = |i: i64, j: i64| {
        offset_point(CITY_CENTER, -half + i as f64 * spacing, -half + j as f64 * spacing)
    };
    let mut rng = rng_from(seed, &[0x67726964]); // grid
    let mut street_graph = Vec::new();
    for i in 0..per_side {
        for j in 0..per_side {
            let a = node_at(i, j);
            if j + 1 < per_side {
                street_graph.push(StreetEdge {
                    segment: StreetSegment::new(format!("e{i}_{j}_h"), vec![a, node_at(i, j + 1)])?,
                    bicycle: rng.gen_bool(0.9),
                    maxspeed: if rng.gen_bool(0.95) {
                        Some(*[30.0, 50.0].get(rng.gen_range(0..2)).unwrap())
                    } else {
                        None
                    },
                });
            }
            if i + 1 < per_side {
                street_graph.push(StreetEdge {
                    segment: StreetSegment::new(format!("e{i}_{j}_v"), vec![a, node_at(i + 1, j)])?,
                    bicycle: rng.gen_bool(0.9),
                    maxspeed: if rng.gen_bool(0.95) {
                        Some(*[30.0, 50.0].get(rng.gen_range(0..2)).unwrap())
                    } else {
                        None
                    },
                });
            }
        }
    }

    // Stations on distinct grid nodes.
    let mut rng = rng_from(seed, &[0x73746174]); // stations
    let n_stations = config.n_long + config.n_short;
    let mut node_ids: Vec<(i64, i64)> =
        (0..per_side).flat_map(|i| (0..per_side).map(move |j| (i, j))).collect();
    for k in (1..node_ids.len()).rev() {
        node_ids.swap(k, rng.gen_range(0..=k));
    }
    if node_ids.len() < n_stations {
        return Err(Error::config("extent too small for the requested station count"));
    }
    let mut stations = Vec::new();
    for (k, &(i, j)) in node_ids.iter().take(n_stations).enumerate() {
        let kind = if k < config.n_long { StationKind::LongTerm } else { StationKind::ShortTerm };
        let id = match kind {
            StationKind::LongTerm => format!("lt{:02}", k),
            StationKind::ShortTerm => format!("st{:02}", k - config.n_long),
        };
        stations.push(Station {
            id,
            location: node_at(i, j),
            kind,
            installed_year: Some(2013 + (k as i32 % 8)),
        });
    }

    // Points of interest, scattered uniformly.
    let mut rng = rng_from(seed, &[0x706f69]); // poi
    let area_km2 = config.extent_km * config.extent_km;
    let mut points_of_interest = Vec::new();
    for (kind, density) in
        [("shop", 9.0), ("education", 1.6), ("hotel", 1.1), ("hospital", 0.35)]
    {
        let n = (density * area_km2).round() as usize;
        for _ in 0..n {
            let north = rng.gen::<f64>() * extent_m - half;
            let east = rng.gen::<f64>() * extent_m - half;
            points_of_interest
                .push(Poi { kind: kind.to_string(), location: offset_point(CITY_CENTER, north, east) });
        }
    }

    // Station effects: half explained by shop density, half idiosyncratic.
    let mut rng = rng_from(seed, &[0x75656666]); // ueff
    let shop_counts: Vec<f64> = stations
        .iter()
        .map(|s| {
            points_of_interest
                .iter()
                .filter(|p| p.kind == "shop" && haversine_m(p.location, s.location) <= 1000.0)
                .count() as f64
        })
        .collect();
    let mean_shops = shop_counts.iter().sum::<f64>() / shop_counts.len().max(1) as f64;
    let sd_shops = (shop_counts.iter().map(|c| (c - mean_shops).powi(2)).sum::<f64>()
        / shop_counts.len().max(1) as f64)
        .sqrt();
    let mut station_effect = BTreeMap::new();
    for (s, c) in stations.iter().zip(&shop_counts) {
        let score = if sd_shops > 1e-9 { (c - mean_shops) / sd_shops } else { 0.0 };
        station_effect.insert(s.id.clone(), 0.5 * score + 0.35 * normal(&mut rng));
    }

    // Days, city-wide factor, weather.
    let dates: Vec<NaiveDate> = (0..config.n_days)
        .map(|k| config.start + Duration::days(k as i64))
        .collect();
    let mut rng = rng_from(seed, &[0x64617973]); // days
    let mut day_factor = BTreeMap::new();
    for &d in &dates {
        let doy = d.ordinal() as f64;
        let weekend = matches!(d.weekday().num_days_from_monday(), 5 | 6);
        let season = 0.4 * (2.0 * std::f64::consts::PI * (doy - 105.0) / 365.0).sin();
        let level = (season - if weekend { 0.25 } else { 0.0 } + 0.1 * normal(&mut rng)).exp();
        day_factor.insert(d, level);
    }
    let mut rng = rng_from(seed, &[0x77656174]); // weather
    let mut weather = Vec::new();
    let mut weather_term = BTreeMap::new();
    for &d in &dates {
        let doy = d.ordinal() as f64;
        let season = (2.0 * std::f64::consts::PI * (doy - 105.0) / 365.0).sin();
        let temp_mean = 12.0 + 9.0 * season + 2.2 * normal(&mut rng);
        let temp_max = temp_mean + 4.0 + 1.5 * normal(&mut rng).abs();
        let temp_min = temp_mean - 4.0 - 1.5 * normal(&mut rng).abs();
        let precipitation = if rng.gen_bool(0.35) {
            (0.8 + 0.7 * normal(&mut rng)).exp()
        } else {
            0.0
        };
        let snow = if temp_min < 0.0 { 2.0 * normal(&mut rng).abs() } else { 0.0 };
        let sunshine =
            (10.0 + 4.0 * season - 0.8 * precipitation + normal(&mut rng)).clamp(0.0, 16.0);
        let wind = 8.0 + 3.0 * normal(&mut rng).abs();
        let gust = wind + 6.0 + 4.0 * normal(&mut rng).abs();
        let humidity = (70.0 - (temp_mean - 12.0) + 6.0 * normal(&mut rng)).clamp(30.0, 100.0);
        let pressure = 1013.0 + 6.0 * normal(&mut rng);
        let dew_point = temp_mean - (100.0 - humidity) / 5.0;
        let values: BTreeMap<String, f64> = [
            ("air_pressure_hpa", pressure),
            ("dew_point_c", dew_point),
            ("humidity_pct", humidity),
            ("precipitation_mm", precipitation),
            ("snow_depth_cm", snow),
            ("sunshine_h", sunshine),
            ("temp_max_c", temp_max),
            ("temp_mean_c", temp_mean),
            ("temp_min_c", temp_min),
            ("wind_gust_kmh", gust),
            ("wind_speed_kmh", wind),
        ]
        .into_iter()
        .map(|(k, v)| (k.to_string(), v))
        .collect();
        weather.push(WeatherDaily { date: d, values });
        let temp_norm = (temp_mean - 12.0) / 9.0;
        let rain_norm = precipitation.min(15.0) / 5.0;
        weather_term.insert(d, (0.15 * temp_norm - 0.12 * rain_norm).exp());
    }

    // Counts from the generative model, apportioned into hourly rows.
    let truth = SynthTruth {
        base: 1400.0,
        beta_city: 0.9,
        sigma_noise: 0.08 * config.noise,
        station_effect,
        day_factor,
        weather_term,
    };
    let mut rng = rng_from(seed, &[0x636e7473]); // counts
    let mut counts = Vec::new();
    for s in &stations {
        for &d in &dates {
            let mu = truth.mean(&s.id, d).unwrap();
            let eps = if truth.sigma_noise > 0.0 { truth.sigma_noise * normal(&mut rng) } else { 0.0 };
            let daily = (mu * eps.exp()).round().max(0.0) as u64;
            for (h, c) in apportion_hours(daily, &HOUR_PROFILE).into_iter().enumerate() {
                counts.push(HourlyCount {
                    station_id: s.id.clone(),
                    ts: d.and_hms_opt(h as u32, 0, 0).unwrap(),
                    count: c,
                });
            }
        }
    }

    // Crowdsourced metrics: a smooth field of the station effects sampled at
    // segment midpoints and hexagon centers, times the shared day terms.
    let field = |p: GeoPoint| {
        let mut num = 0.0;
        let mut den = 1e-12;
        for s in &stations {
            let d = haversine_m(p, s.location);
            let w = (-d * d / (2.0 * 1200.0 * 1200.0)).exp();
            num += w * truth.station_effect[&s.id];
            den += w;
        }
        num / den
    };
    let strava_keys = [
        "speed_mean_kmh",
        "trips_commute",
        "trips_ebike",
        "trips_evening",
        "trips_leisure",
        "trips_morning",
        "trips_total",
    ];
    let mut rng = rng_from(seed, &[0x73747276]); // strava
    let seg_fields: Vec<f64> =
        street_graph.iter().map(|e| field(segment_midpoint(&e.segment))).collect();
    let mut strava_segments = Vec::new();
    for &d in &dates {
        let shared = truth.day_factor[&d].powf(truth.beta_city) * truth.weather_term[&d];
        for (e, f) in street_graph.iter().zip(&seg_fields) {
            let intensity = 40.0 * f.exp() * shared * (0.10 * config.noise * normal(&mut rng)).exp();
            let speed = 17.0 + 2.0 * normal(&mut rng) * 0.3;
            let values: BTreeMap<String, f64> = strava_keys
                .iter()
                .map(|&k| {
                    let v = match k {
                        "speed_mean_kmh" => speed,
                        "trips_total" => round5(intensity),
                        "trips_commute" => round5(0.5 * intensity),
                        "trips_leisure" => round5(0.35 * intensity),
                        "trips_morning" => round5(0.25 * intensity),
                        "trips_evening" => round5(0.3 * intensity),
                        _ => round5(0.15 * intensity),
                    };
                    (k.to_string(), v)
                })
                .collect();
            strava_segments.push(StravaSegmentDay {
                segment_id: e.segment.id.clone(),
                date: d,
                values,
            });
        }
    }
    let hex_grid = HexGrid::new(CITY_CENTER, 0.66)?;
    let mut cells = BTreeSet::new();
    for i in 0..per_side {
        for j in 0..per_side {
            let c = hex_grid.cell_of(node_at(i, j));
            cells.insert(c);
            for n in HexGrid::neighbors(c) {
                cells.insert(n);
            }
        }
    }
    let cell_fields: Vec<(crate::geo::HexCell, f64)> =
        cells.iter().map(|&c| (c, field(hex_grid.center(c)))).collect();
    let mut strava_hexagons = Vec::new();
    for &d in &dates {
        let shared = truth.day_factor[&d].powf(truth.beta_city) * truth.weather_term[&d];
        for &(c, f) in &cell_fields {
            let intensity =
                160.0 * f.exp() * shared * (0.10 * config.noise * normal(&mut rng)).exp();
            let speed = 17.0 + 2.0 * normal(&mut rng) * 0.3;
            let values: BTreeMap<String, f64> = strava_keys
                .iter()
                .map(|&k| {
                    let v = match k {
                        "speed_mean_kmh" => speed,
                        "trips_total" => round5(intensity),
                        "trips_commute" => round5(0.5 * intensity),
                        "trips_leisure" => round5(0.35 * intensity),
                        "trips_morning" => round5(0.25 * intensity),
                        "trips_evening" => round5(0.3 * intensity),
                        _ => round5(0.15 * intensity),
                    };
                    (k.to_string(), v)
                })
                .collect();
            strava_hexagons.push(StravaHexDay { cell: c, date: d, values });
        }
    }

    // Motorized detectors on a sparse subgrid; mostly uninformative traffic.
    let mut rng = rng_from(seed, &[0x6d6f746f]); // moto
    let mut motorized_observations = Vec::new();
    let det_step = 4;
    let mut det_nodes = Vec::new();
    for i in (0..per_side).step_by(det_step) {
        for j in (0..per_side).step_by(det_step) {
            det_nodes.push((i, j));
        }
    }
    for &d in &dates {
        let weekend = matches!(d.weekday().num_days_from_monday(), 5 | 6);
        for (k, &(i, j)) in det_nodes.iter().enumerate() {
            let vol = 16000.0
                * (if weekend { 0.85 } else { 1.0 })
                * (0.12 * normal(&mut rng) * config.noise.max(0.2)).exp();
            let speed = 42.0 + 3.0 * normal(&mut rng);
            let values: BTreeMap<String, f64> = [
                ("speed_cars_kmh", speed + 1.0),
                ("speed_lorries_kmh", speed - 5.0),
                ("speed_total_kmh", speed),
                ("volume_cars", 0.85 * vol),
                ("volume_lorries", 0.06 * vol),
                ("volume_total", vol),
            ]
            .into_iter()
            .map(|(k, v)| (k.to_string(), v))
            .collect();
            motorized_observations.push(MotorizedObservation {
                detector_id: format!("det{:02}", k),
                location: node_at(i, j),
                date: d,
                values,
            });
        }
    }

    // Holidays present in the window.
    let holidays: Vec<Holiday> = dates
        .iter()
        .filter_map(|&d| {
            let school = school_holiday(d);
            let public = public_holiday(d);
            (school || public).then_some(Holiday { date: d, school, public })
        })
        .collect();

    // Planning areas: four quadrants with land use and two socio years.
    let mut rng = rng_from(seed, &[0x61726561]); // area
    let land_keys = [
        "cemeteries",
        "farming",
        "forests",
        "horticulture",
        "industry",
        "parks",
        "private_gardens",
        "residential",
        "traffic_areas",
        "waterways",
    ];
    let mut planning_areas = Vec::new();
    for qi in 0..2 {
        for qj in 0..2 {
            let n0 = -half + qi as f64 * half;
            let e0 = -half + qj as f64 * half;
            let polygon = vec![
                offset_point(CITY_CENTER, n0, e0),
                offset_point(CITY_CENTER, n0, e0 + half),
                offset_point(CITY_CENTER, n0 + half, e0 + half),
                offset_point(CITY_CENTER, n0 + half, e0),
            ];
            let quad_area = crate::geo::polygon_area_km2(&polygon)?;
            let weights: Vec<f64> =
                land_keys.iter().map(|_| (1.0 + 0.6 * normal(&mut rng)).max(0.05)).collect();
            let wsum: f64 = weights.iter().sum();
            let land_use_km2: BTreeMap<String, f64> = land_keys
                .iter()
                .zip(&weights)
                .map(|(k, w)| (k.to_string(), 0.92 * quad_area * w / wsum))
                .collect();
            let pois_inside = points_of_interest
                .iter()
                .filter(|p| crate::geo::point_in_polygon(p.location, &polygon))
                .count() as f64;
            let density = 2500.0 * (0.25 * normal(&mut rng)).exp() * (1.0 + pois_inside / 400.0);
            let base_socio: BTreeMap<String, f64> = [
                ("birth_rate", (9.5 + normal(&mut rng)).max(4.0)),
                ("inhabitants", density * quad_area),
                ("mean_age", 42.0 + 3.0 * normal(&mut rng)),
                ("population_density", density),
                ("share_foreigners", (14.0 + 5.0 * normal(&mut rng)).clamp(2.0, 40.0)),
                ("share_migration", (28.0 + 8.0 * normal(&mut rng)).clamp(5.0, 60.0)),
                ("share_tenure_over_5y", (55.0 + 8.0 * normal(&mut rng)).clamp(20.0, 90.0)),
                ("share_unemployed", (7.5 + 2.5 * normal(&mut rng)).clamp(1.0, 20.0)),
            ]
            .into_iter()
            .map(|(k, v)| (k.to_string(), v))
            .collect();
            let drifted: BTreeMap<String, f64> = base_socio
                .iter()
                .map(|(k, v)| (k.clone(), v * (1.0 + 0.02 * normal(&mut rng))))
                .collect();
            let mut socio = BTreeMap::new();
            socio.insert(2019, base_socio);
            socio.insert(2020, drifted);
            planning_areas.push(PlanningArea {
                id: format!("area{qi}{qj}"),
                polygon,
                land_use_km2,
                socio,
            });
        }
    }

    // Bike-share trips, clustered around busy stations.
    let mut rng = rng_from(seed, &[0x74726970]); // trip
    let mut trips = Vec::new();
    let weights: Vec<f64> =
        stations.iter().map(|s| truth.station_effect[&s.id].exp()).collect();
    let wsum: f64 = weights.iter().sum();
    let draw_point = |rng: &mut ChaCha8Rng| {
        if rng.gen_bool(0.75) && wsum > 0.0 {
            let mut pick = rng.gen::<f64>() * wsum;
            let mut idx = 0;
            for (i, w) in weights.iter().enumerate() {
                pick -= w;
                if pick <= 0.0 {
                    idx = i;
                    break;
                }
            }
            let s = &stations[idx];
            offset_point(s.location, 300.0 * normal(rng), 300.0 * normal(rng))
        } else {
            offset_point(
                CITY_CENTER,
                rng.gen::<f64>() * extent_m - half,
                rng.gen::<f64>() * extent_m - half,
            )
        }
    };
    let mut trip_no = 0usize;
    for &d in &dates {
        let weekend = matches!(d.weekday().num_days_from_monday(), 5 | 6);
        let n_t = (config.trips_per_day as f64 * if weekend { 0.85 } else { 1.0 }).round() as usize;
        for _ in 0..n_t {
            let origin = draw_point(&mut rng);
            let mut destination = draw_point(&mut rng);
            for _ in 0..10 {
                if haversine_m(origin, destination) >= 150.0 {
                    break;
                }
                destination = draw_point(&mut rng);
            }
            let start_minute = rng.gen_range(5 * 60..22 * 60);
            let start = d.and_hms_opt(start_minute / 60, start_minute % 60, 0).unwrap();
            let speed_kmh = 9.0 + 11.0 * rng.gen::<f64>();
            let est_m = 1.35 * haversine_m(origin, destination);
            let minutes = ((est_m * 3.6 / speed_kmh / 60.0).round() as i64).clamp(2, 600);
            let end = start + Duration::minutes(minutes);
            trips.push(Trip::new(
                format!("bike{:03}", trip_no % 400),
                origin,
                destination,
                start,
                end,
            )?);
            trip_no += 1;
        }
    }
    trips.sort_by(|a, b| {
        (a.start, a.end, a.bike_id.as_str()).cmp(&(b.start, b.end, b.bike_id.as_str()))
    });

    let study_periods = if config.n_days == 0 {
        Vec::new()
    } else {
        vec![(config.start, config.start + Duration::days(config.n_days as i64 - 1))]
    };
    let bundle = SourceBundle {
        config: BundleConfig { study_periods, hex_grid, city_center: CITY_CENTER },
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
        snapshots: Vec::new(),
        trips,
    };
    Ok((bundle, truth))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::counts::CountWindow;

    fn small() -> SynthConfig {
        SynthConfig { n_long: 5, n_short: 2, n_days: 30, extent_km: 4.0, ..SynthConfig::default() }
    }

    #[test]
    fn same_seed_and_config_reproduce_the_bundle_exactly() {
        let (b1, t1) = generate_synthetic_city(42, &small()).unwrap();
        let (b2, t2) = generate_synthetic_city(42, &small()).unwrap();
        assert_eq!(serde_json::to_string(&b1).unwrap(), serde_json::to_string(&b2).unwrap());
        assert_eq!(serde_json::to_string(&t1).unwrap(), serde_json::to_string(&t2).unwrap());
        let (b3, _) = generate_synthetic_city(43, &small()).unwrap();
        assert_ne!(serde_json::to_string(&b1).unwrap(), serde_json::to_string(&b3).unwrap());
    }

    #[test]
    fn bundle_validates_and_has_the_requested_shape() {
        let cfg = small();
        let (bundle, truth) = generate_synthetic_city(7, &cfg).unwrap();
        bundle.validate().unwrap();
        assert_eq!(bundle.stations.len(), cfg.n_long + cfg.n_short);
        let n_long = bundle
            .stations
            .iter()
            .filter(|s| s.kind == crate::counts::StationKind::LongTerm)
            .count();
        assert_eq!(n_long, cfg.n_long);
        assert_eq!(bundle.weather.len(), cfg.n_days);
        assert_eq!(bundle.counts.len(), (cfg.n_long + cfg.n_short) * cfg.n_days * 24);
        assert_eq!(truth.station_effect.len(), cfg.n_long + cfg.n_short);
        assert!(!bundle.trips.is_empty());
        assert!(!bundle.strava_segments.is_empty());
        assert!(!bundle.planning_areas.is_empty());
        // Daily aggregation over the full day reproduces per-day totals.
        let daily = bundle.daily_counts(CountWindow::FullDay).unwrap();
        assert_eq!(daily.len(), (cfg.n_long + cfg.n_short) * cfg.n_days);
    }

    #[test]
    fn zero_days_still_yields_valid_static_tables() {
        let cfg = SynthConfig { n_days: 0, ..small() };
        let (bundle, _) = generate_synthetic_city(9, &cfg).unwrap();
        bundle.validate().unwrap();
        assert!(bundle.counts.is_empty());
        assert!(bundle.weather.is_empty());
        assert!(bundle.strava_segments.is_empty());
        assert!(bundle.trips.is_empty());
        assert!(!bundle.stations.is_empty());
        assert!(!bundle.street_graph.is_empty());
        assert!(!bundle.points_of_interest.is_empty());
    }

    #[test]
    fn zero_noise_counts_equal_the_rounded_generative_mean() {
        let cfg = SynthConfig { noise: 0.0, n_days: 12, ..small() };
        let (bundle, truth) = generate_synthetic_city(11, &cfg).unwrap();
        let daily = bundle.daily_counts(CountWindow::FullDay).unwrap();
        assert!(!daily.is_empty());
        for obs in daily {
            let mu = truth.mean(&obs.station_id, obs.date).unwrap();
            assert_eq!(obs.count, mu.round() as u64, "station {} on {}", obs.station_id, obs.date);
        }
    }

    #[test]
    fn crowdsourced_counts_are_multiples_of_five() {
        let (bundle, _) = generate_synthetic_city(5, &small()).unwrap();
        for row in bundle.strava_segments.iter().take(500) {
            for (k, v) in &row.values {
                if k.starts_with("trips_") {
                    assert_eq!(v % 5.0, 0.0, "{k}={v}");
                }
            }
        }
    }

    #[test]
    fn too_few_long_term_stations_is_a_config_error() {
        let cfg = SynthConfig { n_long: 2, ..small() };
        assert!(generate_synthetic_city(1, &cfg).is_err());
    }

    #[test]
    fn hourly_apportionment_conserves_the_daily_total() {
        for total in [0u64, 1, 7, 23, 24, 100, 999, 12345] {
            let hours = apportion_hours(total, &HOUR_PROFILE);
            assert_eq!(hours.iter().sum::<u64>(), total);
        }
    }
}
