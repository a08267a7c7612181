//! Trip cleaning: plausibility bounds on distance, duration, and speed.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ingest::routing::RoutingOutcome;
use crate::ingest::snapshots::Trip;

/// Plausibility bounds for a routed trip. A trip outside any bound is
/// discarded, attributed to the first bound it violates.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CleaningRules {
    /// Meters.
    pub min_distance: f64,
    /// Meters.
    pub max_distance: f64,
    /// Seconds.
    pub min_duration: f64,
    /// Seconds.
    pub max_duration: f64,
    /// km/h.
    pub min_speed: f64,
    /// km/h.
    pub max_speed: f64,
}

impl Default for CleaningRules {
    fn default() -> Self {
        CleaningRules {
            min_distance: 100.0,
            max_distance: 45_000.0,
            min_duration: 120.0,
            max_duration: 36_000.0,
            min_speed: 2.0,
            max_speed: 40.0,
        }
    }
}

impl CleaningRules {
    pub fn validate(&self) -> Result<()> {
        let pairs = [
            ("distance", self.min_distance, self.max_distance),
            ("duration", self.min_duration, self.max_duration),
            ("speed", self.min_speed, self.max_speed),
        ];
        for (what, lo, hi) in pairs {
            if !(lo > 0.0 && hi > 0.0) {
                return Err(Error::config(format!("{what} bounds must be positive")));
            }
            if lo >= hi {
                return Err(Error::config(format!(
                    "min_{what} {lo} must be below max_{what} {hi}"
                )));
            }
        }
        Ok(())
    }

    /// The first rule the trip violates, in declaration order, if any.
    fn first_violation(&self, distance_m: f64, duration_s: f64, speed_kmh: f64) -> Option<&'static str> {
        if distance_m < self.min_distance {
            Some("min_distance")
        } else if distance_m > self.max_distance {
            Some("max_distance")
        } else if duration_s < self.min_duration {
            Some("min_duration")
        } else if duration_s > self.max_duration {
            Some("max_duration")
        } else if speed_kmh < self.min_speed {
            Some("min_speed")
        } else if speed_kmh > self.max_speed {
            Some("max_speed")
        } else {
            None
        }
    }
}

pub const RULE_NAMES: [&str; 6] = [
    "min_distance",
    "max_distance",
    "min_duration",
    "max_duration",
    "min_speed",
    "max_speed",
];

/// One removal reason with its count and share of the original total.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RemovalBucket {
    pub rule: String,
    pub removed: usize,
    pub pct_of_total: f64,
}

/// What cleaning removed and why, in rule order. Percentages are always
/// relative to the original trip total.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RemovalReport {
    pub input: usize,
    pub remaining: usize,
    pub buckets: Vec<RemovalBucket>,
}

impl RemovalReport {
    pub fn removed_total(&self) -> usize {
        self.buckets.iter().map(|b| b.removed).sum()
    }
}

/// Apply the rules to routed trips. Every trip must carry `routed_distance`
/// and `mean_speed`; survivors satisfy all six bounds.
pub fn clean_trips(trips: Vec<Trip>, rules: &CleaningRules) -> Result<(Vec<Trip>, RemovalReport)> {
    rules.validate()?;
    let input = trips.len();
    let mut counts = [0usize; 6];
    let mut kept = Vec::with_capacity(trips.len());
    for t in trips {
        let (Some(d), Some(v)) = (t.routed_distance, t.mean_speed) else {
            return Err(Error::data(format!(
                "trip of bike {} starting {} is not routed; route trips before cleaning",
                t.bike_id, t.start
            )));
        };
        match rules.first_violation(d, t.duration, v) {
            None => kept.push(t),
            Some(rule) => {
                let idx = RULE_NAMES.iter().position(|&r| r == rule).unwrap();
                counts[idx] += 1;
            }
        }
    }
    let pct = |n: usize| if input == 0 { 0.0 } else { n as f64 / input as f64 * 100.0 };
    let buckets = RULE_NAMES
        .iter()
        .zip(counts)
        .map(|(&rule, removed)| RemovalBucket {
            rule: rule.to_string(),
            removed,
            pct_of_total: pct(removed),
        })
        .collect();
    let report = RemovalReport { input, remaining: kept.len(), buckets };
    Ok((kept, report))
}

/// Clean a routing outcome: unroutable trips land in their own leading
/// bucket, then the six rules run over the routed ones. Percentages are
/// relative to the combined total.
pub fn clean_routed(outcome: RoutingOutcome, rules: &CleaningRules) -> Result<(Vec<Trip>, RemovalReport)> {
    let input = outcome.routed.len() + outcome.unroutable.len();
    let n_unroutable = outcome.unroutable.len();
    let (kept, inner) = clean_trips(outcome.routed, rules)?;
    let pct = |n: usize| if input == 0 { 0.0 } else { n as f64 / input as f64 * 100.0 };
    let mut buckets = vec![RemovalBucket {
        rule: "unroutable".to_string(),
        removed: n_unroutable,
        pct_of_total: pct(n_unroutable),
    }];
    buckets.extend(inner.buckets.into_iter().map(|b| RemovalBucket {
        pct_of_total: pct(b.removed),
        ..b
    }));
    Ok((kept, RemovalReport { input, remaining: inner.remaining, buckets }))
}
