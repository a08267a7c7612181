//! Run configuration: one TOML file with nested sections, flag overrides
//! applied on top, and a content hash stamped into every artifact.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use velo_core::counts::CountWindow;
use velo_core::eval::{Scale, SelectionSettings, TuneSettings};
use velo_core::ingest::SynthConfig;
use velo_core::learners::select::SelectionMethod;
use velo_core::learners::{EstimatorKind, EstimatorSpec};
use velo_core::pipeline::{CleaningRules, RadiiConfig};
use velo_core::{Error, Result};

/// Everything a run can configure. Every field has a default matching the
/// published study values, so an absent file or section means "defaults".
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub paths: Paths,
    pub study: Study,
    pub cleaning: Cleaning,
    pub features: Features,
    pub estimator: Estimator,
    pub selection: Option<Selection>,
    pub tuning: Option<Tuning>,
    pub evaluation: Evaluation,
    pub importance: Importance,
    pub sampling: Sampling,
    pub synth: Synth,
    pub seeds: Seeds,
}

/// Input and output locations. Per-source overrides replace the file of the
/// same role inside `bundle_dir`; unset means the canonical file in the
/// bundle directory.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Paths {
    pub bundle_dir: PathBuf,
    pub output_dir: PathBuf,
    /// Directory holding `table.csv` + `table.manifest.json`; unset means
    /// `<output_dir>/features`.
    pub table_dir: Option<PathBuf>,
    pub stations: Option<PathBuf>,
    pub counts: Option<PathBuf>,
    pub weather: Option<PathBuf>,
    pub points_of_interest: Option<PathBuf>,
    pub motorized: Option<PathBuf>,
    pub holidays: Option<PathBuf>,
    pub strava_segments: Option<PathBuf>,
    pub strava_hexagons: Option<PathBuf>,
    pub street_graph: Option<PathBuf>,
    pub planning_areas: Option<PathBuf>,
    pub snapshots: Option<PathBuf>,
    pub trips: Option<PathBuf>,
}

impl Default for Paths {
    fn default() -> Self {
        Paths {
            bundle_dir: PathBuf::from("bundle"),
            output_dir: PathBuf::from("out"),
            table_dir: None,
            stations: None,
            counts: None,
            weather: None,
            points_of_interest: None,
            motorized: None,
            holidays: None,
            strava_segments: None,
            strava_hexagons: None,
            street_graph: None,
            planning_areas: None,
            snapshots: None,
            trips: None,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Study {
    /// Inclusive date ranges as `[["2019-01-01", "2019-12-31"], ...]`.
    /// Empty means "use the periods stored in the bundle metadata".
    pub periods: Vec<(String, String)>,
    /// Daily aggregation window: `full_day` or `daytime`.
    pub window: String,
}

impl Default for Study {
    fn default() -> Self {
        Study { periods: Vec::new(), window: CountWindow::FullDay.name().to_string() }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Cleaning {
    pub min_distance_m: f64,
    pub max_distance_m: f64,
    pub min_duration_s: f64,
    pub max_duration_s: f64,
    pub min_speed_kmh: f64,
    pub max_speed_kmh: f64,
}

impl Default for Cleaning {
    fn default() -> Self {
        let r = CleaningRules::default();
        Cleaning {
            min_distance_m: r.min_distance,
            max_distance_m: r.max_distance,
            min_duration_s: r.min_duration,
            max_duration_s: r.max_duration,
            min_speed_kmh: r.min_speed,
            max_speed_kmh: r.max_speed,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Features {
    /// Disc radii in meters for crowdsourced segment aggregates; the
    /// city-wide aggregate always comes on top.
    pub strava_radii_m: Vec<f64>,
    /// Disc radii in meters for bike-share trip aggregates.
    pub bikeshare_radii_m: Vec<f64>,
}

impl Default for Features {
    fn default() -> Self {
        let r = RadiiConfig::default();
        Features { strava_radii_m: r.strava_m, bikeshare_radii_m: r.bikeshare_m }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Estimator {
    pub kind: String,
    /// Explicit hyperparameters by name; unset ones use the estimator's
    /// defaults, and the `[tuning]` section searches the default space
    /// instead.
    pub params: BTreeMap<String, f64>,
}

impl Default for Estimator {
    fn default() -> Self {
        Estimator {
            kind: EstimatorKind::RegularizedBoosting.name().to_string(),
            params: BTreeMap::new(),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Selection {
    pub method: String,
    pub k: usize,
}

impl Default for Selection {
    fn default() -> Self {
        Selection { method: SelectionMethod::RfeLinear.name().to_string(), k: 20 }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Tuning {
    pub n_trials: usize,
    pub cv_folds: usize,
}

impl Default for Tuning {
    fn default() -> Self {
        Tuning { n_trials: 20, cv_folds: 5 }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Evaluation {
    /// `daily` or `aadb`.
    pub scale: String,
    /// Minimum daily rows for a station-year to enter an annual average.
    pub min_aadb_rows: usize,
}

impl Default for Evaluation {
    fn default() -> Self {
        Evaluation { scale: Scale::Daily.name().to_string(), min_aadb_rows: 30 }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Importance {
    /// `mae` or `smape`.
    pub metric: String,
    pub n_permutations: usize,
    pub n_repeats: usize,
    pub k_folds: usize,
    /// Feature groups to score; empty means every group present in the table.
    pub groups: Vec<String>,
}

impl Default for Importance {
    fn default() -> Self {
        Importance {
            metric: "mae".to_string(),
            n_permutations: 100,
            n_repeats: 2,
            k_folds: 5,
            groups: Vec::new(),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Sampling {
    /// `one_day`, `three_day`, or `seven_day`.
    pub strategy: String,
    /// `full_city`, `location_specific`, or `sample_mean`.
    pub scenario: String,
    pub max_days: usize,
    pub reps: usize,
    /// Training-mass share of the sampled station under `full_city`.
    pub weight_share: f64,
    /// `mae` or `smape`.
    pub metric: String,
    /// Campaign lengths to simulate; empty means `1..=max_days`.
    pub days: Vec<usize>,
    /// Minimum observed days a station needs to participate; 0 means the
    /// built-in default of `max_days + 30`.
    pub min_rows: usize,
}

impl Default for Sampling {
    fn default() -> Self {
        Sampling {
            strategy: "one_day".to_string(),
            scenario: "full_city".to_string(),
            max_days: 28,
            reps: 10,
            weight_share: 0.25,
            metric: "smape".to_string(),
            days: Vec::new(),
            min_rows: 0,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Synth {
    pub n_long: usize,
    pub n_short: usize,
    pub n_days: usize,
    pub extent_km: f64,
    pub noise: f64,
    pub trips_per_day: usize,
    pub start: String,
}

impl Default for Synth {
    fn default() -> Self {
        let c = SynthConfig::default();
        Synth {
            n_long: c.n_long,
            n_short: c.n_short,
            n_days: c.n_days,
            extent_km: c.extent_km,
            noise: c.noise,
            trips_per_day: c.trips_per_day,
            start: c.start.to_string(),
        }
    }
}

/// Seeds per stochastic step. There are no default seeds: a stochastic
/// subcommand refuses to run unless its seed comes from here or `--seed`.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Seeds {
    pub synth: Option<u64>,
    pub train: Option<u64>,
    pub eval: Option<u64>,
    pub importance: Option<u64>,
    pub sampling: Option<u64>,
    pub predict: Option<u64>,
}

impl RunConfig {
    /// Read a config file, or the full defaults when `path` is `None`.
    pub fn load(path: Option<&Path>) -> Result<RunConfig> {
        let Some(path) = path else {
            return Ok(RunConfig::default());
        };
        let text = fs::read_to_string(path).map_err(|e| {
            Error::config(format!("cannot read config {}: {e}", path.display()))
        })?;
        toml::from_str(&text)
            .map_err(|e| Error::config(format!("{}: {e}", path.display())))
    }

    /// Hex digest of the effective configuration (after flag overrides),
    /// stamped into every artifact this run writes.
    pub fn hash(&self) -> Result<String> {
        let canonical = serde_json::to_string(self)?;
        let digest = Sha256::digest(canonical.as_bytes());
        let mut hex = String::with_capacity(16);
        for byte in &digest[..8] {
            hex.push_str(&format!("{byte:02x}"));
        }
        Ok(hex)
    }

    pub fn window(&self) -> Result<CountWindow> {
        CountWindow::parse(&self.study.window)
    }

    pub fn scale(&self) -> Result<Scale> {
        Scale::parse(&self.evaluation.scale)
    }

    pub fn estimator_spec(&self) -> Result<EstimatorSpec> {
        let kind = EstimatorKind::parse(&self.estimator.kind)?;
        let mut spec = EstimatorSpec::new(kind);
        for (name, value) in &self.estimator.params {
            spec = spec.with_param(name, *value);
        }
        Ok(spec)
    }

    pub fn selection_settings(&self) -> Result<Option<SelectionSettings>> {
        match &self.selection {
            None => Ok(None),
            Some(s) => {
                if s.k == 0 {
                    return Err(Error::config("selection.k must be at least 1"));
                }
                Ok(Some(SelectionSettings { method: SelectionMethod::parse(&s.method)?, k: s.k }))
            }
        }
    }

    pub fn tune_settings(&self) -> Option<TuneSettings> {
        self.tuning
            .as_ref()
            .map(|t| TuneSettings { n_trials: t.n_trials, cv_folds: t.cv_folds })
    }

    pub fn radii(&self) -> RadiiConfig {
        RadiiConfig {
            strava_m: self.features.strava_radii_m.clone(),
            bikeshare_m: self.features.bikeshare_radii_m.clone(),
        }
    }

    pub fn cleaning_rules(&self) -> Result<CleaningRules> {
        let rules = CleaningRules {
            min_distance: self.cleaning.min_distance_m,
            max_distance: self.cleaning.max_distance_m,
            min_duration: self.cleaning.min_duration_s,
            max_duration: self.cleaning.max_duration_s,
            min_speed: self.cleaning.min_speed_kmh,
            max_speed: self.cleaning.max_speed_kmh,
        };
        rules.validate()?;
        Ok(rules)
    }

    pub fn synth_config(&self) -> Result<SynthConfig> {
        let start = NaiveDate::parse_from_str(&self.synth.start, "%Y-%m-%d").map_err(|e| {
            Error::config(format!("synth.start {:?}: {e}", self.synth.start))
        })?;
        Ok(SynthConfig {
            n_long: self.synth.n_long,
            n_short: self.synth.n_short,
            n_days: self.synth.n_days,
            extent_km: self.synth.extent_km,
            noise: self.synth.noise,
            trips_per_day: self.synth.trips_per_day,
            start,
        })
    }

    /// Study periods as dates, when the config overrides the bundle's.
    pub fn study_periods(&self) -> Result<Option<Vec<(NaiveDate, NaiveDate)>>> {
        if self.study.periods.is_empty() {
            return Ok(None);
        }
        let mut out = Vec::new();
        for (a, b) in &self.study.periods {
            let parse = |s: &str| {
                NaiveDate::parse_from_str(s, "%Y-%m-%d")
                    .map_err(|e| Error::config(format!("study period date {s:?}: {e}")))
            };
            let (start, end) = (parse(a)?, parse(b)?);
            if end < start {
                return Err(Error::config(format!("study period {a}..{b} ends before it starts")));
            }
            out.push((start, end));
        }
        Ok(Some(out))
    }

    /// Directory holding `table.csv` and `table.manifest.json`.
    pub fn table_dir(&self) -> PathBuf {
        self.paths
            .table_dir
            .clone()
            .unwrap_or_else(|| self.paths.output_dir.join("features"))
    }
}

/// The canonical file name of each bundle source, in loading order.
pub const SOURCE_FILES: [(&str, bool); 12] = [
    ("stations.csv", true),
    ("counts.csv", true),
    ("weather.csv", true),
    ("points_of_interest.csv", true),
    ("motorized.csv", true),
    ("holidays.csv", true),
    ("strava_segments.csv", true),
    ("strava_hexagons.csv", true),
    ("street_graph.geojson", true),
    ("planning_areas.geojson", true),
    ("snapshots.ndjson", false),
    ("trips.csv", false),
];

fn override_for<'a>(paths: &'a Paths, file: &str) -> &'a Option<PathBuf> {
    match file {
        "stations.csv" => &paths.stations,
        "counts.csv" => &paths.counts,
        "weather.csv" => &paths.weather,
        "points_of_interest.csv" => &paths.points_of_interest,
        "motorized.csv" => &paths.motorized,
        "holidays.csv" => &paths.holidays,
        "strava_segments.csv" => &paths.strava_segments,
        "strava_hexagons.csv" => &paths.strava_hexagons,
        "street_graph.geojson" => &paths.street_graph,
        "planning_areas.geojson" => &paths.planning_areas,
        "snapshots.ndjson" => &paths.snapshots,
        "trips.csv" => &paths.trips,
        other => unreachable!("unknown source file {other}"),
    }
}

/// A loadable bundle directory. When per-source overrides are in play the
/// sources are staged under their canonical names in a temporary directory
/// that lives as long as this value.
pub struct BundleSource {
    pub dir: PathBuf,
    _staging: Option<tempfile::TempDir>,
}

/// Check that every referenced source exists and hand back the directory to
/// load, staging per-source overrides if there are any.
pub fn resolve_bundle(paths: &Paths) -> Result<BundleSource> {
    let overridden = SOURCE_FILES
        .iter()
        .any(|(file, _)| override_for(paths, file).is_some());

    let meta = paths.bundle_dir.join("bundle_meta.json");
    if !meta.is_file() {
        return Err(Error::config(format!(
            "bundle metadata {} does not exist",
            meta.display()
        )));
    }
    for (file, required) in SOURCE_FILES {
        let path = match override_for(paths, file) {
            Some(p) => p.clone(),
            None => paths.bundle_dir.join(file),
        };
        let explicit = override_for(paths, file).is_some();
        if (required || explicit) && !path.is_file() {
            if required {
                return Err(Error::config(format!(
                    "source file {} does not exist",
                    path.display()
                )));
            }
            return Err(Error::config(format!(
                "configured source file {} does not exist",
                path.display()
            )));
        }
    }

    if !overridden {
        return Ok(BundleSource { dir: paths.bundle_dir.clone(), _staging: None });
    }

    let staging = tempfile::TempDir::new()?;
    fs::copy(&meta, staging.path().join("bundle_meta.json"))?;
    for (file, _) in SOURCE_FILES {
        let source = match override_for(paths, file) {
            Some(p) => p.clone(),
            None => paths.bundle_dir.join(file),
        };
        if source.is_file() {
            fs::copy(&source, staging.path().join(file))?;
        }
    }
    let dir = staging.path().to_path_buf();
    Ok(BundleSource { dir, _staging: Some(staging) })
}
