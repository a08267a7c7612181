//! The station-day feature table that all estimators and protocols consume.

use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};

use crate::counts::{CountWindow, StationKind};
use crate::error::{Error, Result};
use crate::learners::Matrix;

/// Feature families. Each column belongs to exactly one group; the groups
/// drive grouped permutation importance.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FeatureGroup {
    Crowdsourced,
    Infrastructure,
    Weather,
    Socioeconomic,
    BikeSharing,
    Holiday,
    Motorized,
    Time,
}

impl FeatureGroup {
    pub const ALL: [FeatureGroup; 8] = [
        FeatureGroup::Crowdsourced,
        FeatureGroup::Infrastructure,
        FeatureGroup::Weather,
        FeatureGroup::Socioeconomic,
        FeatureGroup::BikeSharing,
        FeatureGroup::Holiday,
        FeatureGroup::Motorized,
        FeatureGroup::Time,
    ];

    pub fn name(self) -> &'static str {
        match self {
            FeatureGroup::Crowdsourced => "crowdsourced",
            FeatureGroup::Infrastructure => "infrastructure",
            FeatureGroup::Weather => "weather",
            FeatureGroup::Socioeconomic => "socioeconomic",
            FeatureGroup::BikeSharing => "bike_sharing",
            FeatureGroup::Holiday => "holiday",
            FeatureGroup::Motorized => "motorized",
            FeatureGroup::Time => "time",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        Self::ALL
            .iter()
            .copied()
            .find(|g| g.name() == s)
            .ok_or_else(|| Error::config(format!("unknown feature group: {s}")))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ColumnDef {
    pub name: String,
    pub group: FeatureGroup,
}

/// Identity of one table row: a station-day.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct RowKey {
    pub station_id: String,
    pub date: NaiveDate,
}

/// A dense station-day table. Cell values are `f64`, with `NaN` encoding a
/// missing cell until preprocessing fills or drops it.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureTable {
    pub window: CountWindow,
    pub columns: Vec<ColumnDef>,
    pub rows: Vec<RowKey>,
    /// Row-major cell values; `values[r]` aligns with `columns`.
    pub values: Vec<Vec<f64>>,
    /// Daily bicycle count per row.
    pub target: Vec<f64>,
    /// Kind of every station appearing in `rows`.
    pub station_kinds: BTreeMap<String, StationKind>,
}

impl FeatureTable {
    pub fn new(window: CountWindow, columns: Vec<ColumnDef>) -> Result<Self> {
        let mut names = BTreeSet::new();
        for c in &columns {
            if c.name == "station_id" || c.name == "date" || c.name == "target" {
                return Err(Error::config(format!("column name {} is reserved", c.name)));
            }
            if !names.insert(c.name.as_str()) {
                return Err(Error::config(format!("duplicate column name {}", c.name)));
            }
        }
        Ok(FeatureTable {
            window,
            columns,
            rows: Vec::new(),
            values: Vec::new(),
            target: Vec::new(),
            station_kinds: BTreeMap::new(),
        })
    }

    pub fn push_row(&mut self, key: RowKey, kind: StationKind, values: Vec<f64>, target: f64) -> Result<()> {
        if values.len() != self.columns.len() {
            return Err(Error::data(format!(
                "row {}:{} has {} values for {} columns",
                key.station_id,
                key.date,
                values.len(),
                self.columns.len()
            )));
        }
        if !target.is_finite() {
            return Err(Error::data(format!(
                "row {}:{} has a non-finite target",
                key.station_id, key.date
            )));
        }
        if let Some(prev) = self.station_kinds.insert(key.station_id.clone(), kind) {
            if prev != kind {
                return Err(Error::data(format!(
                    "station {} appears with two different kinds",
                    key.station_id
                )));
            }
        }
        self.rows.push(key);
        self.values.push(values);
        self.target.push(target);
        Ok(())
    }

    pub fn n_rows(&self) -> usize {
        self.rows.len()
    }

    pub fn n_cols(&self) -> usize {
        self.columns.len()
    }

    pub fn column_index(&self, name: &str) -> Option<usize> {
        self.columns.iter().position(|c| c.name == name)
    }

    /// Indices of the columns tagged with `group`.
    pub fn group_columns(&self, group: FeatureGroup) -> Vec<usize> {
        (0..self.columns.len())
            .filter(|&c| self.columns[c].group == group)
            .collect()
    }

    /// Distinct station ids in first-appearance order.
    pub fn stations(&self) -> Vec<String> {
        let mut seen = BTreeSet::new();
        let mut out = Vec::new();
        for r in &self.rows {
            if seen.insert(r.station_id.as_str()) {
                out.push(r.station_id.clone());
            }
        }
        out
    }

    /// Row indices per station, in row order.
    pub fn station_rows(&self) -> BTreeMap<String, Vec<usize>> {
        let mut map: BTreeMap<String, Vec<usize>> = BTreeMap::new();
        for (i, r) in self.rows.iter().enumerate() {
            map.entry(r.station_id.clone()).or_default().push(i);
        }
        map
    }

    /// The feature matrix for the learner layer.
    pub fn matrix(&self) -> Result<Matrix> {
        Matrix::from_rows(&self.values)
    }

    /// A table with only the given columns, in the given order.
    pub fn select_columns(&self, keep: &[usize]) -> Result<FeatureTable> {
        for &c in keep {
            if c >= self.columns.len() {
                return Err(Error::data(format!("column index {c} out of range")));
            }
        }
        let columns = keep.iter().map(|&c| self.columns[c].clone()).collect();
        let values = self
            .values
            .iter()
            .map(|row| keep.iter().map(|&c| row[c]).collect())
            .collect();
        Ok(FeatureTable {
            window: self.window,
            columns,
            rows: self.rows.clone(),
            values,
            target: self.target.clone(),
            station_kinds: self.station_kinds.clone(),
        })
    }

    /// A table with only the given rows, in the given order.
    pub fn select_rows(&self, keep: &[usize]) -> Result<FeatureTable> {
        for &r in keep {
            if r >= self.rows.len() {
                return Err(Error::data(format!("row index {r} out of range")));
            }
        }
        let rows: Vec<RowKey> = keep.iter().map(|&r| self.rows[r].clone()).collect();
        let values = keep.iter().map(|&r| self.values[r].clone()).collect();
        let target = keep.iter().map(|&r| self.target[r]).collect();
        let mut station_kinds = BTreeMap::new();
        for r in &rows {
            station_kinds.insert(
                r.station_id.clone(),
                self.station_kinds[r.station_id.as_str()],
            );
        }
        Ok(FeatureTable {
            window: self.window,
            columns: self.columns.clone(),
            rows,
            values,
            target,
            station_kinds,
        })
    }

    /// Verify there are no duplicate (station, date) rows.
    pub fn check_unique_rows(&self) -> Result<()> {
        let mut seen = BTreeSet::new();
        for r in &self.rows {
            if !seen.insert((r.station_id.as_str(), r.date)) {
                return Err(Error::runtime(format!(
                    "duplicate table row for station {} on {}",
                    r.station_id, r.date
                )));
            }
        }
        Ok(())
    }

    /// True if no cell is missing.
    pub fn is_complete(&self) -> bool {
        self.values.iter().all(|row| row.iter().all(|v| v.is_finite()))
    }
}

pub const TABLE_FORMAT_VERSION: u32 = 1;

/// Sidecar manifest describing a persisted table.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TableManifest {
    pub format_version: u32,
    pub window: CountWindow,
    pub columns: Vec<ColumnDef>,
    pub station_kinds: BTreeMap<String, StationKind>,
    pub n_rows: usize,
}

/// Write the table as CSV plus a JSON manifest mapping columns to groups.
/// Missing cells become empty fields. Values print in shortest round-trip
/// form, so a load returns bit-identical numbers.
pub fn save_table(table: &FeatureTable, csv_path: &Path, manifest_path: &Path) -> Result<()> {
    let manifest = TableManifest {
        format_version: TABLE_FORMAT_VERSION,
        window: table.window,
        columns: table.columns.clone(),
        station_kinds: table.station_kinds.clone(),
        n_rows: table.n_rows(),
    };
    std::fs::write(manifest_path, serde_json::to_string_pretty(&manifest)?)?;

    let mut w = csv::Writer::from_path(csv_path)?;
    let mut header = vec!["station_id".to_string(), "date".to_string()];
    header.extend(table.columns.iter().map(|c| c.name.clone()));
    header.push("target".to_string());
    w.write_record(&header)?;
    for (i, key) in table.rows.iter().enumerate() {
        let mut rec = vec![key.station_id.clone(), key.date.to_string()];
        for v in &table.values[i] {
            rec.push(if v.is_finite() { v.to_string() } else { String::new() });
        }
        rec.push(table.target[i].to_string());
        w.write_record(&rec)?;
    }
    w.flush()?;
    Ok(())
}

pub fn load_table(csv_path: &Path, manifest_path: &Path) -> Result<FeatureTable> {
    let manifest: TableManifest =
        serde_json::from_str(&std::fs::read_to_string(manifest_path)?)?;
    if manifest.format_version != TABLE_FORMAT_VERSION {
        return Err(Error::data(format!(
            "unsupported table format version {}",
            manifest.format_version
        )));
    }
    let mut table = FeatureTable::new(manifest.window, manifest.columns)?;
    let mut rdr = csv::Reader::from_path(csv_path)?;
    {
        let header = rdr.headers()?;
        let mut expect = vec!["station_id".to_string(), "date".to_string()];
        expect.extend(table.columns.iter().map(|c| c.name.clone()));
        expect.push("target".to_string());
        let got: Vec<String> = header.iter().map(str::to_string).collect();
        if got != expect {
            return Err(Error::data(format!(
                "table csv header mismatch: expected {expect:?}, got {got:?}"
            )));
        }
    }
    let n_cols = table.columns.len();
    for (line, rec) in rdr.records().enumerate() {
        let rec = rec?;
        let station_id = rec
            .get(0)
            .ok_or_else(|| Error::data(format!("row {}: missing station id", line + 2)))?
            .to_string();
        let date: NaiveDate = rec
            .get(1)
            .unwrap_or_default()
            .parse()
            .map_err(|e| Error::data(format!("row {}: bad date: {e}", line + 2)))?;
        let mut values = Vec::with_capacity(n_cols);
        for c in 0..n_cols {
            let cell = rec.get(2 + c).unwrap_or_default();
            if cell.is_empty() {
                values.push(f64::NAN);
            } else {
                values.push(cell.parse().map_err(|e| {
                    Error::data(format!(
                        "row {}: column {}: bad number: {e}",
                        line + 2,
                        table.columns[c].name
                    ))
                })?);
            }
        }
        let target: f64 = rec
            .get(2 + n_cols)
            .unwrap_or_default()
            .parse()
            .map_err(|e| Error::data(format!("row {}: bad target: {e}", line + 2)))?;
        let kind = manifest
            .station_kinds
            .get(&station_id)
            .copied()
            .ok_or_else(|| {
                Error::data(format!("row {}: station {station_id} not in manifest", line + 2))
            })?;
        table.push_row(RowKey { station_id, date }, kind, values, target)?;
    }
    Ok(table)
}

#[cfg(test)]
mod tests {
    use super::*;
    use tempfile::tempdir;

    fn toy_table() -> FeatureTable {
        let mut t = FeatureTable::new(
            CountWindow::FullDay,
            vec![
                ColumnDef { name: "temp".into(), group: FeatureGroup::Weather },
                ColumnDef { name: "month".into(), group: FeatureGroup::Time },
            ],
        )
        .unwrap();
        for (i, station) in ["a", "b"].iter().enumerate() {
            for d in 1..=3u32 {
                t.push_row(
                    RowKey {
                        station_id: station.to_string(),
                        date: NaiveDate::from_ymd_opt(2019, 5, d).unwrap(),
                    },
                    StationKind::LongTerm,
                    vec![10.0 + d as f64 + i as f64 / 7.0, 5.0],
                    100.0 * (i + 1) as f64 + d as f64,
                )
                .unwrap();
            }
        }
        t
    }

    #[test]
    fn rejects_reserved_and_duplicate_column_names() {
        let dup = vec![
            ColumnDef { name: "x".into(), group: FeatureGroup::Weather },
            ColumnDef { name: "x".into(), group: FeatureGroup::Time },
        ];
        assert!(FeatureTable::new(CountWindow::FullDay, dup).is_err());
        let reserved = vec![ColumnDef { name: "date".into(), group: FeatureGroup::Time }];
        assert!(FeatureTable::new(CountWindow::FullDay, reserved).is_err());
    }

    #[test]
    fn selections_preserve_alignment() {
        let t = toy_table();
        let cols = t.select_columns(&[1]).unwrap();
        assert_eq!(cols.columns[0].name, "month");
        assert_eq!(cols.values[0], vec![5.0]);
        assert_eq!(cols.target, t.target);
        let rows = t.select_rows(&[4, 1]).unwrap();
        assert_eq!(rows.rows[0].station_id, "b");
        assert_eq!(rows.rows[1].station_id, "a");
        assert_eq!(rows.target[0], t.target[4]);
        assert_eq!(rows.stations(), vec!["b".to_string(), "a".to_string()]);
    }

    #[test]
    fn csv_roundtrip_is_exact_including_missing_cells() {
        let mut t = toy_table();
        t.values[2][0] = f64::NAN;
        t.values[5][1] = 1.0 / 3.0;
        let dir = tempdir().unwrap();
        let csv = dir.path().join("t.csv");
        let man = dir.path().join("t.manifest.json");
        save_table(&t, &csv, &man).unwrap();
        let back = load_table(&csv, &man).unwrap();
        assert_eq!(back.rows, t.rows);
        assert_eq!(back.columns, t.columns);
        assert_eq!(back.target, t.target);
        assert!(back.values[2][0].is_nan());
        assert_eq!(back.values[5][1].to_bits(), t.values[5][1].to_bits());
        assert_eq!(back.station_kinds, t.station_kinds);
    }

    #[test]
    fn duplicate_rows_are_detected() {
        let mut t = toy_table();
        t.push_row(
            RowKey {
                station_id: "a".into(),
                date: NaiveDate::from_ymd_opt(2019, 5, 1).unwrap(),
            },
            StationKind::LongTerm,
            vec![0.0, 0.0],
            1.0,
        )
        .unwrap();
        assert!(t.check_unique_rows().is_err());
        assert!(toy_table().check_unique_rows().is_ok());
    }
}
