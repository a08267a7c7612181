//! Per-family feature builders: bike-share activity, crowdsourced riding
//! metrics, motorized traffic, static infrastructure and socioeconomics, and
//! calendar features. Missing measurements become NaN cells, to be imputed by
//! preprocessing rather than silently zeroed.

use std::collections::BTreeMap;

use chrono::{Datelike, NaiveDate};

use crate::error::{Error, Result};
use crate::geo::{
    distance_to_ring_m, geometry_within_radius, haversine_m, point_in_polygon, GeoPoint,
    StreetSegment,
};
use crate::ingest::bundle::{PlanningArea, Poi};
use crate::ingest::bundle::map_socio_year;
use crate::ingest::snapshots::Trip;

/// A disc around the station, or the whole city.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Radius {
    Meters(f64),
    City,
}

impl Radius {
    pub fn label(self) -> String {
        match self {
            Radius::Meters(m) => format!("{}m", m as u64),
            Radius::City => "city".to_string(),
        }
    }
}

/// Bike-share radii used throughout.
pub const BIKESHARE_RADII: [Radius; 6] = [
    Radius::Meters(250.0),
    Radius::Meters(500.0),
    Radius::Meters(1000.0),
    Radius::Meters(2000.0),
    Radius::Meters(5000.0),
    Radius::City,
];

/// Crowdsourced-segment radii.
pub const STRAVA_RADII: [Radius; 5] = [
    Radius::Meters(500.0),
    Radius::Meters(1000.0),
    Radius::Meters(2000.0),
    Radius::Meters(5000.0),
    Radius::City,
];

/// Point-of-interest radii.
pub const POI_RADII: [f64; 4] = [500.0, 1000.0, 2000.0, 5000.0];

/// Motorized-traffic radius in meters.
pub const MOTORIZED_RADIUS_M: f64 = 6000.0;

/// Counts of bike-share trips passing through, originating in, and returning
/// to each radius around the station, over the trips of one day (trips belong
/// to the day they start). Every trip must be routed, since "passing" is
/// defined by the route geometry.
pub fn bikeshare_features(
    day_trips: &[Trip],
    station: GeoPoint,
    radii: &[Radius],
) -> Result<Vec<(String, f64)>> {
    struct TripDists {
        route_min: f64,
        origin: f64,
        destination: f64,
    }
    let dists: Vec<TripDists> = day_trips
        .iter()
        .map(|t| {
            let route = t.route.as_ref().ok_or_else(|| {
                Error::data(format!(
                    "trip of bike {} starting {} has no route; bike-share features need routed trips",
                    t.bike_id, t.start
                ))
            })?;
            let route_min = crate::geo::densify(route, 25.0)
                .iter()
                .map(|p| haversine_m(*p, station))
                .fold(f64::INFINITY, f64::min);
            Ok(TripDists {
                route_min,
                origin: haversine_m(t.origin, station),
                destination: haversine_m(t.destination, station),
            })
        })
        .collect::<Result<_>>()?;
    let mut out = Vec::new();
    for &r in radii {
        let (passing, originated, returned) = match r {
            Radius::City => (day_trips.len(), day_trips.len(), day_trips.len()),
            Radius::Meters(m) => (
                dists.iter().filter(|d| d.route_min <= m).count(),
                dists.iter().filter(|d| d.origin <= m).count(),
                dists.iter().filter(|d| d.destination <= m).count(),
            ),
        };
        let label = r.label();
        out.push((format!("bs_passing_{label}"), passing as f64));
        out.push((format!("bs_originated_{label}"), originated as f64));
        out.push((format!("bs_returned_{label}"), returned as f64));
    }
    Ok(out)
}

/// For each radius, the indices of the segments lying at least partially
/// within it. Geometry does not change day to day, so these sets are computed
/// once per station and reused across dates.
#[derive(Debug, Clone)]
pub struct SegmentRadiusSets {
    pub per_radius: Vec<(Radius, Vec<usize>)>,
}

pub fn segment_radius_sets(
    geometries: &[&StreetSegment],
    station: GeoPoint,
    radii: &[Radius],
) -> SegmentRadiusSets {
    let per_radius = radii
        .iter()
        .map(|&r| {
            let indices = geometries
                .iter()
                .enumerate()
                .filter(|(_, seg)| match r {
                    Radius::City => true,
                    Radius::Meters(m) => geometry_within_radius(&seg.polyline, station, m),
                })
                .map(|(i, _)| i)
                .collect();
            (r, indices)
        })
        .collect();
    SegmentRadiusSets { per_radius }
}

/// Unweighted means of each crowdsourced metric over the segments of each
/// radius set, using only segments with data for the day (`day_values` aligns
/// with the geometry slice the sets were built from). A radius with no
/// reporting segment yields NaN cells.
pub fn strava_segment_features(
    sets: &SegmentRadiusSets,
    day_values: &[Option<&BTreeMap<String, f64>>],
    keys: &[String],
) -> Vec<(String, f64)> {
    let mut out = Vec::new();
    for (r, indices) in &sets.per_radius {
        let reporting: Vec<&BTreeMap<String, f64>> =
            indices.iter().filter_map(|&i| day_values[i]).collect();
        let label = r.label();
        for key in keys {
            let value = if reporting.is_empty() {
                f64::NAN
            } else {
                reporting.iter().map(|v| v[key]).sum::<f64>() / reporting.len() as f64
            };
            out.push((format!("strava_{key}_{label}"), value));
        }
    }
    out
}

/// The containing hexagon's metrics and the mean over its six neighbors.
/// Neighbor cells without data contribute nothing to the mean; with no data
/// anywhere the cells are NaN.
pub fn strava_hex_features(
    containing: Option<&BTreeMap<String, f64>>,
    neighbors: &[&BTreeMap<String, f64>],
    keys: &[String],
) -> Vec<(String, f64)> {
    let mut out = Vec::new();
    for key in keys {
        out.push((
            format!("strava_{key}_hex"),
            containing.map_or(f64::NAN, |v| v[key]),
        ));
    }
    for key in keys {
        let value = if neighbors.is_empty() {
            f64::NAN
        } else {
            neighbors.iter().map(|v| v[key]).sum::<f64>() / neighbors.len() as f64
        };
        out.push((format!("strava_{key}_hex_neighbors"), value));
    }
    out
}

/// Mean of each motorized metric over detectors within 6 km, and city-wide.
/// No reporting detector in range yields NaN cells for the radius.
pub fn motorized_features(
    day_obs: &[(GeoPoint, &BTreeMap<String, f64>)],
    station: GeoPoint,
    keys: &[String],
) -> Vec<(String, f64)> {
    let near: Vec<&BTreeMap<String, f64>> = day_obs
        .iter()
        .filter(|(loc, _)| haversine_m(*loc, station) <= MOTORIZED_RADIUS_M)
        .map(|(_, v)| *v)
        .collect();
    let mut out = Vec::new();
    for key in keys {
        let value = if near.is_empty() {
            f64::NAN
        } else {
            near.iter().map(|v| v[key]).sum::<f64>() / near.len() as f64
        };
        out.push((format!("moto_{key}_6km"), value));
    }
    for key in keys {
        let value = if day_obs.is_empty() {
            f64::NAN
        } else {
            day_obs.iter().map(|(_, v)| v[key]).sum::<f64>() / day_obs.len() as f64
        };
        out.push((format!("moto_{key}_city"), value));
    }
    out
}

/// The planning area containing the point, or the nearest one when the point
/// falls inside none (or the list when areas overlap ambiguously).
pub fn containing_area<'a>(areas: &'a [PlanningArea], p: GeoPoint) -> Result<&'a PlanningArea> {
    if areas.is_empty() {
        return Err(Error::data("no planning areas available"));
    }
    let inside: Vec<&PlanningArea> =
        areas.iter().filter(|a| point_in_polygon(p, &a.polygon)).collect();
    if inside.len() == 1 {
        return Ok(inside[0]);
    }
    let candidates: Vec<&PlanningArea> =
        if inside.is_empty() { areas.iter().collect() } else { inside };
    Ok(candidates
        .into_iter()
        .map(|a| (distance_to_ring_m(p, &a.polygon), a))
        .min_by(|(d1, a1), (d2, a2)| d1.total_cmp(d2).then_with(|| a1.id.cmp(&a2.id)))
        .unwrap()
        .1)
}

/// Location, nearby points of interest, the street the station sits on,
/// land-use shares, and the socioeconomic indicators of the containing
/// planning area for the survey year mapped from `year`.
pub fn static_features(
    station: GeoPoint,
    pois: &[Poi],
    street_graph: &[crate::ingest::routing::StreetEdge],
    areas: &[PlanningArea],
    city_center: GeoPoint,
    year: i32,
) -> Result<Vec<(String, f64)>> {
    let mut out = vec![
        ("infra_lat".to_string(), station.lat),
        ("infra_lon".to_string(), station.lon),
        (
            "infra_dist_center_m".to_string(),
            haversine_m(station, city_center),
        ),
    ];

    let mut kinds: Vec<&str> = pois.iter().map(|p| p.kind.as_str()).collect();
    kinds.sort_unstable();
    kinds.dedup();
    for kind in kinds {
        for &r in &POI_RADII {
            let count = pois
                .iter()
                .filter(|p| p.kind == kind && haversine_m(p.location, station) <= r)
                .count();
            out.push((format!("infra_poi_{kind}_{}m", r as u64), count as f64));
        }
    }

    // The street the station sits on: nearest segment by geometry.
    let nearest = street_graph
        .iter()
        .map(|e| {
            let d = crate::geo::densify(&e.segment.polyline, 25.0)
                .iter()
                .map(|p| haversine_m(*p, station))
                .fold(f64::INFINITY, f64::min);
            (d, e)
        })
        .min_by(|(d1, e1), (d2, e2)| d1.total_cmp(d2).then_with(|| e1.segment.id.cmp(&e2.segment.id)));
    match nearest {
        Some((_, e)) => {
            out.push(("infra_lane_bicycle".to_string(), e.bicycle as u8 as f64));
            out.push(("infra_maxspeed_kmh".to_string(), e.maxspeed.unwrap_or(f64::NAN)));
        }
        None => {
            out.push(("infra_lane_bicycle".to_string(), f64::NAN));
            out.push(("infra_maxspeed_kmh".to_string(), f64::NAN));
        }
    }

    let area = containing_area(areas, station)?;
    let area_km2 = crate::geo::polygon_area_km2(&area.polygon)?;
    for (cat, km2) in &area.land_use_km2 {
        out.push((format!("infra_landuse_{cat}_pct"), km2 / area_km2 * 100.0));
    }

    let years: Vec<i32> = area.socio.keys().copied().collect();
    let survey = map_socio_year(year, &years)?;
    for (indicator, value) in &area.socio[&survey] {
        out.push((format!("socio_{indicator}"), *value));
    }
    Ok(out)
}

/// Calendar features and the holiday flags for one date.
pub fn time_holiday_features(
    date: NaiveDate,
    holidays: &BTreeMap<NaiveDate, (bool, bool)>,
) -> Vec<(String, f64)> {
    let weekday = date.weekday().num_days_from_monday();
    let (school, public) = holidays.get(&date).copied().unwrap_or((false, false));
    vec![
        ("time_month".to_string(), date.month() as f64),
        ("time_day_of_month".to_string(), date.day() as f64),
        ("time_weekday".to_string(), weekday as f64),
        ("time_weekend".to_string(), matches!(weekday, 5 | 6) as u8 as f64),
        ("time_year".to_string(), date.year() as f64),
        ("holiday_school".to_string(), school as u8 as f64),
        ("holiday_public".to_string(), public as u8 as f64),
    ]
}

#[cfg(test)]
mod tests {
    use super::*;
    use chrono::NaiveDate;
    use proptest::prelude::*;

    fn pt(lat: f64, lon: f64) -> GeoPoint {
        GeoPoint { lat, lon }
    }

    /// Offset in meters from a base point, for readable scene building.
    fn at(base: GeoPoint, north_m: f64, east_m: f64) -> GeoPoint {
        let r = crate::geo::EARTH_RADIUS_M;
        GeoPoint {
            lat: base.lat + north_m / r * 180.0 / std::f64::consts::PI,
            lon: base.lon
                + east_m / (r * base.lat.to_radians().cos()) * 180.0 / std::f64::consts::PI,
        }
    }

    fn routed_trip(origin: GeoPoint, destination: GeoPoint, route: Vec<GeoPoint>) -> Trip {
        let day = NaiveDate::from_ymd_opt(2022, 6, 1).unwrap();
        let mut t = Trip::new(
            "b".to_string(),
            origin,
            destination,
            day.and_hms_opt(9, 0, 0).unwrap(),
            day.and_hms_opt(9, 30, 0).unwrap(),
        )
        .unwrap();
        t.routed_distance = Some(crate::geo::polyline_length_m(&route));
        t.mean_speed = Some(10.0);
        t.route = Some(route);
        t
    }

    #[test]
    fn two_crossing_trips_one_ending_inside_match_the_scene() {
        let station = pt(52.5, 13.4);
        // Trip 1 crosses the 500 m disc west-to-east, endpoints far outside.
        let t1 = routed_trip(
            at(station, 0.0, -3000.0),
            at(station, 0.0, 3000.0),
            vec![at(station, 0.0, -3000.0), at(station, 0.0, 3000.0)],
        );
        // Trip 2 starts far away, crosses, and ends 200 m from the station.
        let t2 = routed_trip(
            at(station, -2000.0, 0.0),
            at(station, 200.0, 0.0),
            vec![at(station, -2000.0, 0.0), at(station, 200.0, 0.0)],
        );
        let feats: BTreeMap<String, f64> = bikeshare_features(
            &[t1, t2],
            station,
            &[Radius::Meters(500.0), Radius::City],
        )
        .unwrap()
        .into_iter()
        .collect();
        assert_eq!(feats["bs_passing_city"], 2.0);
        assert_eq!(feats["bs_originated_city"], 2.0);
        assert_eq!(feats["bs_returned_city"], 2.0);
        assert_eq!(feats["bs_passing_500m"], 2.0);
        assert_eq!(feats["bs_originated_500m"], 0.0);
        assert_eq!(feats["bs_returned_500m"], 1.0);
    }

    #[test]
    fn no_trips_yield_all_zeros() {
        let feats = bikeshare_features(&[], pt(52.5, 13.4), &BIKESHARE_RADII).unwrap();
        assert_eq!(feats.len(), 18);
        assert!(feats.iter().all(|(_, v)| *v == 0.0));
    }

    #[test]
    fn unrouted_trip_is_rejected() {
        let day = NaiveDate::from_ymd_opt(2022, 6, 1).unwrap();
        let t = Trip::new(
            "b".to_string(),
            pt(52.5, 13.4),
            pt(52.51, 13.41),
            day.and_hms_opt(9, 0, 0).unwrap(),
            day.and_hms_opt(9, 30, 0).unwrap(),
        )
        .unwrap();
        assert!(bikeshare_features(&[t], pt(52.5, 13.4), &BIKESHARE_RADII).is_err());
    }

    proptest! {
        /// Count features grow with the radius and the city tops everything.
        #[test]
        fn radius_monotonicity(seed in 0u64..200, n in 0usize..25) {
            use rand::Rng;
            let mut rng = crate::util::rng_from(seed, &[0x6d6f6e6f]);
            let station = pt(52.5, 13.4);
            let trips: Vec<Trip> = (0..n)
                .map(|_| {
                    let o = at(station, rng.gen::<f64>() * 8000.0 - 4000.0, rng.gen::<f64>() * 8000.0 - 4000.0);
                    let d = at(station, rng.gen::<f64>() * 8000.0 - 4000.0, rng.gen::<f64>() * 8000.0 - 4000.0);
                    routed_trip(o, d, vec![o, d])
                })
                .collect();
            let feats: BTreeMap<String, f64> =
                bikeshare_features(&trips, station, &BIKESHARE_RADII).unwrap().into_iter().collect();
            let radii = ["250m", "500m", "1000m", "2000m", "5000m", "city"];
            for kind in ["passing", "originated", "returned"] {
                for pair in radii.windows(2) {
                    let smaller = feats[&format!("bs_{kind}_{}", pair[0])];
                    let larger = feats[&format!("bs_{kind}_{}", pair[1])];
                    prop_assert!(smaller <= larger, "{} {:?}", kind, pair);
                }
            }
        }
    }

    fn seg(id: &str, a: GeoPoint, b: GeoPoint) -> StreetSegment {
        StreetSegment::new(id.to_string(), vec![a, b]).unwrap()
    }

    fn vals(trips: f64) -> BTreeMap<String, f64> {
        [("trips_total".to_string(), trips)].into_iter().collect()
    }

    #[test]
    fn segment_means_use_only_reporting_segments_in_radius() {
        let station = pt(52.5, 13.4);
        let keys = vec!["trips_total".to_string()];
        let near1 = seg("a", at(station, 100.0, 0.0), at(station, 100.0, 400.0));
        let near2 = seg("b", at(station, -200.0, 0.0), at(station, -200.0, 400.0));
        let near3 = seg("c", at(station, 300.0, 0.0), at(station, 300.0, 400.0));
        let far = seg("d", at(station, 9000.0, 0.0), at(station, 9000.0, 400.0));
        let geometries = vec![&near1, &near2, &near3, &far];
        let sets = segment_radius_sets(&geometries, station, &STRAVA_RADII);
        let v = [vals(5.0), vals(10.0), vals(15.0), vals(1000.0)];
        let day: Vec<Option<&BTreeMap<String, f64>>> =
            vec![Some(&v[0]), Some(&v[1]), Some(&v[2]), Some(&v[3])];
        let feats: BTreeMap<String, f64> =
            strava_segment_features(&sets, &day, &keys).into_iter().collect();
        assert_eq!(feats["strava_trips_total_500m"], 10.0);
        assert_eq!(feats["strava_trips_total_city"], 257.5);

        // A lone reporting segment defines the mean; none at all gives NaN.
        let lone: Vec<Option<&BTreeMap<String, f64>>> = vec![Some(&v[0]), None, None, None];
        let feats: BTreeMap<String, f64> =
            strava_segment_features(&sets, &lone, &keys).into_iter().collect();
        assert_eq!(feats["strava_trips_total_500m"], 5.0);
        let none: Vec<Option<&BTreeMap<String, f64>>> = vec![None; 4];
        let feats: BTreeMap<String, f64> =
            strava_segment_features(&sets, &none, &keys).into_iter().collect();
        assert!(feats["strava_trips_total_500m"].is_nan());
        assert!(feats["strava_trips_total_city"].is_nan());
    }

    #[test]
    fn hex_neighbor_mean_skips_missing_cells() {
        let keys = vec!["trips_total".to_string()];
        let own = vals(20.0);
        let same = vals(8.0);
        let six: Vec<&BTreeMap<String, f64>> = vec![&same; 6];
        let feats: BTreeMap<String, f64> =
            strava_hex_features(Some(&own), &six, &keys).into_iter().collect();
        assert_eq!(feats["strava_trips_total_hex"], 20.0);
        assert_eq!(feats["strava_trips_total_hex_neighbors"], 8.0);

        let a = vals(6.0);
        let b = vals(12.0);
        let feats: BTreeMap<String, f64> =
            strava_hex_features(None, &[&a, &b], &keys).into_iter().collect();
        assert!(feats["strava_trips_total_hex"].is_nan());
        assert_eq!(feats["strava_trips_total_hex_neighbors"], 9.0);

        let feats: BTreeMap<String, f64> =
            strava_hex_features(None, &[], &keys).into_iter().collect();
        assert!(feats["strava_trips_total_hex_neighbors"].is_nan());
    }

    #[test]
    fn motorized_means_hand_checked() {
        let station = pt(52.5, 13.4);
        let keys = vec!["volume_total".to_string()];
        let v1 = [("volume_total".to_string(), 1000.0)].into_iter().collect();
        let v2 = [("volume_total".to_string(), 3000.0)].into_iter().collect();
        let v3 = [("volume_total".to_string(), 9000.0)].into_iter().collect();
        let obs: Vec<(GeoPoint, &BTreeMap<String, f64>)> = vec![
            (at(station, 1000.0, 0.0), &v1),
            (at(station, -2000.0, 0.0), &v2),
            (at(station, 20_000.0, 0.0), &v3),
        ];
        let feats: BTreeMap<String, f64> =
            motorized_features(&obs, station, &keys).into_iter().collect();
        assert_eq!(feats["moto_volume_total_6km"], 2000.0);
        assert_eq!(feats["moto_volume_total_city"], 13_000.0 / 3.0);

        // A station with no detector in range gets a missing cell.
        let lonely = at(station, 100_000.0, 0.0);
        let feats: BTreeMap<String, f64> =
            motorized_features(&obs, lonely, &keys).into_iter().collect();
        assert!(feats["moto_volume_total_6km"].is_nan());
        assert!(!feats["moto_volume_total_city"].is_nan());
    }

    fn rect_area(id: &str, center: GeoPoint, w_m: f64, h_m: f64) -> PlanningArea {
        let polygon = vec![
            at(center, -h_m / 2.0, -w_m / 2.0),
            at(center, -h_m / 2.0, w_m / 2.0),
            at(center, h_m / 2.0, w_m / 2.0),
            at(center, h_m / 2.0, -w_m / 2.0),
        ];
        PlanningArea {
            id: id.to_string(),
            polygon,
            land_use_km2: [("parks".to_string(), 0.5)].into_iter().collect(),
            socio: [(
                2019,
                [("population_density".to_string(), 3000.0)].into_iter().collect(),
            )]
            .into_iter()
            .collect(),
        }
    }

    #[test]
    fn land_use_share_and_socio_come_from_the_containing_area() {
        let center = pt(52.5, 13.4);
        // 2 km x 1 km = 2 km² area with 0.5 km² of parks -> 25 %.
        let area = rect_area("a0", center, 2000.0, 1000.0);
        let far = rect_area("a1", at(center, 50_000.0, 0.0), 2000.0, 1000.0);
        let feats: BTreeMap<String, f64> = static_features(
            center,
            &[],
            &[],
            &[far, area],
            center,
            2019,
        )
        .unwrap()
        .into_iter()
        .collect();
        assert!((feats["infra_landuse_parks_pct"] - 25.0).abs() < 0.2);
        assert_eq!(feats["socio_population_density"], 3000.0);
        assert_eq!(feats["infra_dist_center_m"], 0.0);
        assert!(feats["infra_lane_bicycle"].is_nan());
    }

    #[test]
    fn station_outside_every_area_falls_back_to_the_nearest() {
        let center = pt(52.5, 13.4);
        let near = rect_area("near", at(center, 2000.0, 0.0), 1000.0, 1000.0);
        let far = rect_area("far", at(center, 30_000.0, 0.0), 1000.0, 1000.0);
        let areas = [far, near];
        let got = containing_area(&areas, center).unwrap();
        assert_eq!(got.id, "near");
    }

    #[test]
    fn poi_counts_per_kind_and_radius() {
        let station = pt(52.5, 13.4);
        let pois = vec![
            Poi { kind: "shop".to_string(), location: at(station, 300.0, 0.0) },
            Poi { kind: "shop".to_string(), location: at(station, 900.0, 0.0) },
            Poi { kind: "hotel".to_string(), location: at(station, 4000.0, 0.0) },
        ];
        let area = rect_area("a", station, 20_000.0, 20_000.0);
        let feats: BTreeMap<String, f64> =
            static_features(station, &pois, &[], &[area], station, 2019)
                .unwrap()
                .into_iter()
                .collect();
        assert_eq!(feats["infra_poi_shop_500m"], 1.0);
        assert_eq!(feats["infra_poi_shop_1000m"], 2.0);
        assert_eq!(feats["infra_poi_hotel_2000m"], 0.0);
        assert_eq!(feats["infra_poi_hotel_5000m"], 1.0);
    }

    #[test]
    fn calendar_features_cycle_and_flags_fire() {
        let holidays: BTreeMap<NaiveDate, (bool, bool)> = [
            (NaiveDate::from_ymd_opt(2022, 1, 1).unwrap(), (false, true)),
            (NaiveDate::from_ymd_opt(2022, 7, 15).unwrap(), (true, false)),
        ]
        .into_iter()
        .collect();
        // 2022-01-01 was a Saturday.
        let f: BTreeMap<String, f64> =
            time_holiday_features(NaiveDate::from_ymd_opt(2022, 1, 1).unwrap(), &holidays)
                .into_iter()
                .collect();
        assert_eq!(f["time_weekday"], 5.0);
        assert_eq!(f["time_weekend"], 1.0);
        assert_eq!(f["holiday_public"], 1.0);
        assert_eq!(f["holiday_school"], 0.0);
        assert_eq!(f["time_year"], 2022.0);
        assert_eq!(f["time_month"], 1.0);
        assert_eq!(f["time_day_of_month"], 1.0);

        // Weekday index cycles with period 7 over consecutive dates.
        let start = NaiveDate::from_ymd_opt(2022, 4, 1).unwrap();
        for k in 0..30 {
            let d = start + chrono::Duration::days(k);
            let f: BTreeMap<String, f64> =
                time_holiday_features(d, &holidays).into_iter().collect();
            let expect = (4 + k) % 7; // 2022-04-01 was a Friday, index 4
            assert_eq!(f["time_weekday"], expect as f64, "{d}");
        }
    }
}
