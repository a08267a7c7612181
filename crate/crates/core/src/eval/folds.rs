//! Fold plans for grouped cross-validation.

use rand::seq::SliceRandom;

use crate::counts::StationKind;
use crate::error::{Error, Result};
use crate::pipeline::FeatureTable;
use crate::util::{hash_str, rng_from};

/// One train/test split over table rows. For leave-one-group-out folds the
/// held-out station is recorded.
#[derive(Debug, Clone, PartialEq)]
pub struct Fold {
    pub test_station: Option<String>,
    pub train_rows: Vec<usize>,
    pub test_rows: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FoldPlan {
    pub protocol: String,
    pub folds: Vec<Fold>,
}

/// Leave-one-group-out over the long-term stations of `table`: each such
/// station is held out exactly once, with every other long-term station's
/// rows as training data. Folds are ordered by station id. Short-term rows
/// take part in neither side.
pub fn logo_folds(table: &FeatureTable) -> Result<FoldPlan> {
    let mut stations: Vec<String> = table
        .stations()
        .into_iter()
        .filter(|s| table.station_kinds[s] == StationKind::LongTerm)
        .collect();
    stations.sort();
    if stations.len() < 2 {
        return Err(Error::data(format!(
            "leave-one-group-out needs at least 2 long-term stations, found {}",
            stations.len()
        )));
    }
    let by_station = table.station_rows();
    let mut folds = Vec::with_capacity(stations.len());
    for held_out in &stations {
        let test_rows = by_station[held_out].clone();
        let mut train_rows = Vec::new();
        for s in &stations {
            if s != held_out {
                train_rows.extend_from_slice(&by_station[s]);
            }
        }
        train_rows.sort_unstable();
        folds.push(Fold {
            test_station: Some(held_out.clone()),
            train_rows,
            test_rows,
        });
    }
    Ok(FoldPlan {
        protocol: "logo".to_string(),
        folds,
    })
}

/// Partition all rows into `k` folds, spreading each station's rows as
/// evenly as possible across folds (the stratification variable is the
/// station id). Deterministic given `seed`. When a station has fewer than
/// `k` rows a warning is logged and the split is best-effort.
pub fn stratified_group_kfold(table: &FeatureTable, k: usize, seed: u64) -> Result<FoldPlan> {
    if k < 2 {
        return Err(Error::config("stratified k-fold needs k >= 2"));
    }
    if table.n_rows() == 0 {
        return Err(Error::data("cannot fold an empty table"));
    }
    let by_station = table.station_rows();
    let mut bins: Vec<Vec<usize>> = vec![Vec::new(); k];
    for (si, (station, rows)) in by_station.iter().enumerate() {
        if rows.len() < k {
            log::warn!(
                "station {station} has {} rows, fewer than {k} folds; splitting best-effort",
                rows.len()
            );
        }
        let mut shuffled = rows.clone();
        let mut rng = rng_from(seed, &[hash_str(station)]);
        shuffled.shuffle(&mut rng);
        // Offset the dealing start per station so small stations do not all
        // pile into fold 0.
        for (j, row) in shuffled.into_iter().enumerate() {
            bins[(j + si) % k].push(row);
        }
    }
    let all: Vec<usize> = (0..table.n_rows()).collect();
    let folds = bins
        .into_iter()
        .map(|mut test_rows| {
            test_rows.sort_unstable();
            let train_rows: Vec<usize> = all
                .iter()
                .copied()
                .filter(|r| test_rows.binary_search(r).is_err())
                .collect();
            Fold {
                test_station: None,
                train_rows,
                test_rows,
            }
        })
        .collect();
    Ok(FoldPlan {
        protocol: format!("stratified_{k}fold"),
        folds,
    })
}

/// Partition the stations themselves into `k` groups and hold out one group
/// of whole stations per fold, so no station ever straddles train and test.
/// This is the fold shape used to score hyperparameter trials and sequential
/// feature selection. Deterministic given `seed`.
pub fn group_kfold(table: &FeatureTable, k: usize, seed: u64) -> Result<FoldPlan> {
    if k < 2 {
        return Err(Error::config("group k-fold needs k >= 2"));
    }
    let mut stations = table.stations();
    stations.sort();
    if stations.len() < k {
        return Err(Error::data(format!(
            "group k-fold with k={k} needs at least {k} stations, found {}",
            stations.len()
        )));
    }
    let mut rng = rng_from(seed, &[hash_str("group_kfold")]);
    stations.shuffle(&mut rng);
    let by_station = table.station_rows();
    let mut folds: Vec<Fold> = (0..k)
        .map(|_| Fold {
            test_station: None,
            train_rows: Vec::new(),
            test_rows: Vec::new(),
        })
        .collect();
    for (i, station) in stations.iter().enumerate() {
        folds[i % k].test_rows.extend_from_slice(&by_station[station]);
    }
    let all: Vec<usize> = (0..table.n_rows()).collect();
    for f in &mut folds {
        f.test_rows.sort_unstable();
        f.train_rows = all
            .iter()
            .copied()
            .filter(|r| f.test_rows.binary_search(r).is_err())
            .collect();
    }
    Ok(FoldPlan {
        protocol: format!("group_{k}fold"),
        folds,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::counts::CountWindow;
    use crate::pipeline::{ColumnDef, FeatureGroup, RowKey};
    use chrono::NaiveDate;
    use std::collections::BTreeSet;

    fn table(stations: &[(&str, StationKind, usize)]) -> FeatureTable {
        let mut t = FeatureTable::new(
            CountWindow::FullDay,
            vec![ColumnDef { name: "f".into(), group: FeatureGroup::Time }],
        )
        .unwrap();
        for (id, kind, n) in stations {
            for d in 0..*n {
                t.push_row(
                    RowKey {
                        station_id: id.to_string(),
                        date: NaiveDate::from_ymd_opt(2019, 1, 1).unwrap()
                            + chrono::Duration::days(d as i64),
                    },
                    *kind,
                    vec![d as f64],
                    10.0,
                )
                .unwrap();
            }
        }
        t
    }

    #[test]
    fn logo_holds_out_each_long_term_station_once() {
        let t = table(&[
            ("a", StationKind::LongTerm, 3),
            ("b", StationKind::LongTerm, 4),
            ("c", StationKind::LongTerm, 2),
            ("s", StationKind::ShortTerm, 5),
        ]);
        let plan = logo_folds(&t).unwrap();
        assert_eq!(plan.folds.len(), 3);
        let mut tested = BTreeSet::new();
        for f in &plan.folds {
            let station = f.test_station.clone().unwrap();
            assert!(tested.insert(station.clone()));
            for &r in &f.test_rows {
                assert_eq!(t.rows[r].station_id, station);
            }
            for &r in &f.train_rows {
                assert_ne!(t.rows[r].station_id, station);
                assert_ne!(t.rows[r].station_id, "s");
            }
            let train: BTreeSet<_> = f.train_rows.iter().collect();
            assert!(f.test_rows.iter().all(|r| !train.contains(r)));
        }
        assert_eq!(tested.len(), 3);
    }

    #[test]
    fn logo_requires_two_long_term_stations() {
        let t = table(&[("a", StationKind::LongTerm, 3), ("s", StationKind::ShortTerm, 3)]);
        assert!(logo_folds(&t).is_err());
    }

    #[test]
    fn stratified_folds_partition_rows_and_balance_stations() {
        let t = table(&[
            ("a", StationKind::LongTerm, 10),
            ("b", StationKind::LongTerm, 7),
            ("c", StationKind::LongTerm, 4),
        ]);
        let plan = stratified_group_kfold(&t, 3, 5).unwrap();
        assert_eq!(plan.folds.len(), 3);
        let mut seen = vec![0u8; t.n_rows()];
        for f in &plan.folds {
            for &r in &f.test_rows {
                seen[r] += 1;
            }
            // Per-station counts in this fold differ by <= 1 from an even
            // spread of that station's rows.
            for (station, rows) in t.station_rows() {
                let here = f
                    .test_rows
                    .iter()
                    .filter(|&&r| t.rows[r].station_id == station)
                    .count();
                let lo = rows.len() / 3;
                let hi = lo + usize::from(rows.len() % 3 != 0);
                assert!(
                    here == lo || here == hi,
                    "station {station}: {here} rows in fold, expected {lo} or {hi}"
                );
            }
        }
        assert!(seen.iter().all(|&c| c == 1), "every row in exactly one fold");
    }

    #[test]
    fn stratified_folds_are_deterministic_in_seed() {
        let t = table(&[("a", StationKind::LongTerm, 9), ("b", StationKind::LongTerm, 9)]);
        let p1 = stratified_group_kfold(&t, 3, 7).unwrap();
        let p2 = stratified_group_kfold(&t, 3, 7).unwrap();
        let p3 = stratified_group_kfold(&t, 3, 8).unwrap();
        assert_eq!(p1, p2);
        assert_ne!(p1, p3);
    }

    #[test]
    fn two_folds_on_four_rows_split_evenly() {
        let t = table(&[("a", StationKind::LongTerm, 4)]);
        let plan = stratified_group_kfold(&t, 2, 1).unwrap();
        assert_eq!(plan.folds[0].test_rows.len(), 2);
        assert_eq!(plan.folds[1].test_rows.len(), 2);
    }

    #[test]
    fn group_kfold_never_splits_a_station() {
        let t = table(&[
            ("a", StationKind::LongTerm, 5),
            ("b", StationKind::LongTerm, 6),
            ("c", StationKind::LongTerm, 7),
            ("d", StationKind::LongTerm, 8),
            ("e", StationKind::LongTerm, 9),
        ]);
        let plan = group_kfold(&t, 2, 3).unwrap();
        let mut covered = BTreeSet::new();
        for f in &plan.folds {
            let test_stations: BTreeSet<_> =
                f.test_rows.iter().map(|&r| t.rows[r].station_id.clone()).collect();
            let train_stations: BTreeSet<_> =
                f.train_rows.iter().map(|&r| t.rows[r].station_id.clone()).collect();
            assert!(test_stations.is_disjoint(&train_stations));
            // A held-out station contributes every one of its rows.
            for s in &test_stations {
                let n = f.test_rows.iter().filter(|&&r| t.rows[r].station_id == *s).count();
                assert_eq!(n, t.station_rows()[s].len());
            }
            covered.extend(test_stations);
        }
        assert_eq!(covered.len(), 5);
        assert!(group_kfold(&t, 6, 0).is_err());
    }
}
