//! Bike-share availability snapshots and trip reconstruction.

use std::collections::BTreeMap;
use std::collections::HashSet;

use chrono::NaiveDateTime;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geo::GeoPoint;
use crate::util::par_map;

/// One poll of a bike-share availability feed: which bikes were parked where
/// at that moment.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AvailabilitySnapshot {
    pub timestamp: NaiveDateTime,
    pub bikes: Vec<(String, GeoPoint)>,
}

/// A single rental, reconstructed from a bike vanishing in one place and
/// reappearing in another. Routing fills in `route`, `routed_distance`, and
/// `mean_speed` later.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Trip {
    pub bike_id: String,
    pub origin: GeoPoint,
    pub destination: GeoPoint,
    pub start: NaiveDateTime,
    pub end: NaiveDateTime,
    pub route: Option<Vec<GeoPoint>>,
    pub routed_distance: Option<f64>,
    /// Seconds between `start` and `end`.
    pub duration: f64,
    /// km/h over the routed distance, once routed.
    pub mean_speed: Option<f64>,
}

impl Trip {
    pub fn new(
        bike_id: String,
        origin: GeoPoint,
        destination: GeoPoint,
        start: NaiveDateTime,
        end: NaiveDateTime,
    ) -> Result<Self> {
        if end <= start {
            return Err(Error::data(format!(
                "trip for bike {bike_id} ends at {end} which is not after its start {start}"
            )));
        }
        let duration = (end - start).num_seconds() as f64;
        Ok(Trip {
            bike_id,
            origin,
            destination,
            start,
            end,
            route: None,
            routed_distance: None,
            duration,
            mean_speed: None,
        })
    }
}

/// Turn an availability stream into trips: for each bike, every maximal run
/// of absence with the bike observed on both sides becomes one trip from the
/// last place it stood to the first place it reappeared. Absence that touches
/// the start or end of the stream is not a trip — there is no way to tell a
/// rental from the bike simply not being deployed yet (or ever again).
pub fn reconstruct_trips(snapshots: &[AvailabilitySnapshot]) -> Result<Vec<Trip>> {
    for pair in snapshots.windows(2) {
        if pair[1].timestamp <= pair[0].timestamp {
            return Err(Error::data(format!(
                "snapshots out of order: {} is not after {}",
                pair[1].timestamp, pair[0].timestamp
            )));
        }
    }
    // Sightings per bike: (snapshot index, timestamp, location).
    let mut sightings: BTreeMap<&str, Vec<(usize, NaiveDateTime, GeoPoint)>> = BTreeMap::new();
    let mut seen_in_snapshot = HashSet::new();
    for (i, snap) in snapshots.iter().enumerate() {
        seen_in_snapshot.clear();
        for (bike_id, point) in &snap.bikes {
            if !seen_in_snapshot.insert(bike_id.as_str()) {
                return Err(Error::data(format!(
                    "bike {bike_id} appears twice in the snapshot at {}",
                    snap.timestamp
                )));
            }
            sightings
                .entry(bike_id.as_str())
                .or_default()
                .push((i, snap.timestamp, *point));
        }
    }
    let bikes: Vec<_> = sightings.into_iter().collect();
    let per_bike = par_map(bikes.len(), |b| {
        let (bike_id, seen) = &bikes[b];
        let mut trips = Vec::new();
        for pair in seen.windows(2) {
            let (i0, t0, a) = pair[0];
            let (i1, t1, bpt) = pair[1];
            if i1 > i0 + 1 {
                trips.push(Trip::new(bike_id.to_string(), a, bpt, t0, t1));
            }
        }
        trips
    });
    let mut trips = Vec::new();
    for bike_trips in per_bike {
        for trip in bike_trips {
            trips.push(trip?);
        }
    }
    trips.sort_by(|a, b| {
        (a.start, a.end, a.bike_id.as_str()).cmp(&(b.start, b.end, b.bike_id.as_str()))
    });
    Ok(trips)
}

#[cfg(test)]
mod tests {
    use super::*;
    use chrono::NaiveDate;
    use rand::Rng;

    fn ts(h: u32, m: u32) -> NaiveDateTime {
        NaiveDate::from_ymd_opt(2022, 6, 1)
            .unwrap()
            .and_hms_opt(h, m, 0)
            .unwrap()
    }

    fn pt(lat: f64, lon: f64) -> GeoPoint {
        GeoPoint { lat, lon }
    }

    fn snap(t: NaiveDateTime, bikes: &[(&str, GeoPoint)]) -> AvailabilitySnapshot {
        AvailabilitySnapshot {
            timestamp: t,
            bikes: bikes.iter().map(|(id, p)| (id.to_string(), *p)).collect(),
        }
    }

    #[test]
    fn bike_present_throughout_yields_no_trip() {
        let a = pt(52.5, 13.4);
        let snaps: Vec<_> = (0..5).map(|m| snap(ts(9, m), &[("b1", a)])).collect();
        assert!(reconstruct_trips(&snaps).unwrap().is_empty());
    }

    #[test]
    fn single_gap_yields_one_trip_with_endpoints_and_times() {
        let a = pt(52.50, 13.40);
        let b = pt(52.51, 13.42);
        let mut snaps = vec![snap(ts(9, 0), &[("b1", a)])];
        for m in 1..15 {
            snaps.push(snap(ts(9, m), &[]));
        }
        snaps.push(snap(ts(9, 15), &[("b1", b)]));
        let trips = reconstruct_trips(&snaps).unwrap();
        assert_eq!(trips.len(), 1);
        let t = &trips[0];
        assert_eq!(t.bike_id, "b1");
        assert_eq!(t.origin, a);
        assert_eq!(t.destination, b);
        assert_eq!(t.start, ts(9, 0));
        assert_eq!(t.end, ts(9, 15));
        assert_eq!(t.duration, 15.0 * 60.0);
        assert!(t.route.is_none() && t.mean_speed.is_none());
    }

    #[test]
    fn two_disjoint_gaps_yield_two_trips_in_order() {
        let a = pt(52.50, 13.40);
        let b = pt(52.51, 13.42);
        let c = pt(52.52, 13.44);
        let snaps = vec![
            snap(ts(9, 0), &[("b1", a)]),
            snap(ts(9, 1), &[]),
            snap(ts(9, 2), &[("b1", b)]),
            snap(ts(9, 3), &[("b1", b)]),
            snap(ts(9, 4), &[]),
            snap(ts(9, 5), &[("b1", c)]),
        ];
        let trips = reconstruct_trips(&snaps).unwrap();
        assert_eq!(trips.len(), 2);
        assert_eq!((trips[0].origin, trips[0].destination), (a, b));
        assert_eq!((trips[1].origin, trips[1].destination), (b, c));
        assert!(trips[0].end <= trips[1].start);
    }

    #[test]
    fn absence_at_stream_edges_is_not_a_trip() {
        let a = pt(52.5, 13.4);
        // Absent at the start, present in the middle, absent at the end.
        let snaps = vec![
            snap(ts(9, 0), &[]),
            snap(ts(9, 1), &[("b1", a)]),
            snap(ts(9, 2), &[("b1", a)]),
            snap(ts(9, 3), &[]),
        ];
        assert!(reconstruct_trips(&snaps).unwrap().is_empty());
    }

    #[test]
    fn out_of_order_snapshots_are_rejected() {
        let a = pt(52.5, 13.4);
        let snaps = vec![snap(ts(9, 5), &[("b1", a)]), snap(ts(9, 5), &[("b1", a)])];
        let err = reconstruct_trips(&snaps).unwrap_err();
        assert!(err.to_string().contains("out of order"), "{err}");
    }

    #[test]
    fn duplicate_bike_in_one_snapshot_is_rejected() {
        let a = pt(52.5, 13.4);
        let snaps = vec![snap(ts(9, 0), &[("b1", a), ("b1", a)])];
        let err = reconstruct_trips(&snaps).unwrap_err();
        assert!(err.to_string().contains("twice"), "{err}");
    }

    /// Independent oracle: count maximal absence runs flanked by presence on
    /// both sides, straight off the presence bitmap.
    fn gap_count(present: &[Vec<bool>]) -> usize {
        let mut gaps = 0;
        for row in present {
            let seen: Vec<usize> = (0..row.len()).filter(|&i| row[i]).collect();
            gaps += seen.windows(2).filter(|w| w[1] > w[0] + 1).count();
        }
        gaps
    }

    #[test]
    fn trip_count_matches_gap_oracle_on_random_streams() {
        let mut rng = crate::util::rng_from(99, &[0x747269]);
        for _ in 0..300 {
            let n_bikes = rng.gen_range(1..6);
            let n_snaps = rng.gen_range(2..12);
            let present: Vec<Vec<bool>> = (0..n_bikes)
                .map(|_| (0..n_snaps).map(|_| rng.gen_bool(0.6)).collect())
                .collect();
            let snaps: Vec<_> = (0..n_snaps)
                .map(|i| {
                    let bikes: Vec<_> = (0..n_bikes)
                        .filter(|&b| present[b][i])
                        .map(|b| {
                            (
                                format!("b{b}"),
                                pt(52.5 + b as f64 * 0.01, 13.4 + i as f64 * 0.01),
                            )
                        })
                        .collect();
                    AvailabilitySnapshot {
                        timestamp: ts(9, 0) + chrono::Duration::minutes(i as i64),
                        bikes,
                    }
                })
                .collect();
            let trips = reconstruct_trips(&snaps).unwrap();
            assert_eq!(trips.len(), gap_count(&present));
        }
    }
}
