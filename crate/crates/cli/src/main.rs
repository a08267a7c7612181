//! `velo` — extrapolate street-level bicycle volumes from sparse counting
//! stations. Subcommands cover the whole pipeline: synthetic data, trip
//! cleaning, feature assembly, model fitting, evaluation protocols, feature
//! importance, sampling simulation, and the city-wide prediction map.

mod commands;
mod config;
mod output;
mod schema;

use std::path::PathBuf;

use chrono::NaiveDate;
use clap::{Args, Parser, Subcommand};

use velo_core::util::set_workers;
use velo_core::{Error, Result};

use config::RunConfig;
use output::diagnostic;

#[derive(Parser)]
#[command(
    name = "velo",
    version,
    about = "Street-level bicycle volume extrapolation from sparse counting stations"
)]
struct Cli {
    /// Run configuration file (TOML); flags override its values.
    #[arg(long, global = true, value_name = "FILE")]
    config: Option<PathBuf>,

    /// Worker threads for station- and fold-parallel steps (default 1).
    /// Results are identical for every worker count.
    #[arg(long, global = true, value_name = "N")]
    workers: Option<usize>,

    /// Bundle directory; overrides [paths].bundle_dir.
    #[arg(long, global = true, value_name = "DIR")]
    bundle_dir: Option<PathBuf>,

    /// Feature-table directory; overrides [paths].table_dir.
    #[arg(long, global = true, value_name = "DIR")]
    table_dir: Option<PathBuf>,

    /// Artifact directory; overrides [paths].output_dir.
    #[arg(long, global = true, value_name = "DIR")]
    output_dir: Option<PathBuf>,

    /// Daily aggregation window (full_day or daytime); overrides
    /// [study].window.
    #[arg(long, global = true, value_name = "WINDOW")]
    window: Option<String>,

    /// Estimator kind; overrides [estimator].kind.
    #[arg(long, global = true, value_name = "KIND")]
    estimator: Option<String>,

    /// Seed for the invoked step; overrides its [seeds] entry.
    #[arg(long, global = true, value_name = "SEED")]
    seed: Option<u64>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Write a synthetic city bundle into the bundle directory.
    Synth(SynthArgs),
    /// Reconstruct, route, and clean bike-share trips; write the kept trips
    /// and the removal report.
    Clean,
    /// Assemble the station-day feature table from the bundle.
    Features,
    /// Fit the configured estimator on every long-term station-day and save
    /// the model as JSON.
    Train,
    /// Leave-one-station-out evaluation over the long-term stations.
    EvalLogo(EvalLogoArgs),
    /// Train on the long-term stations, score each short-term station.
    EvalShort,
    /// Grouped permutation importance of the feature families.
    Importance(ImportanceArgs),
    /// Sampling simulation: extrapolation error as a function of campaign
    /// length.
    Simulate(SimulateArgs),
    /// Predict one day's bicycle volume for every street segment (GeoJSON).
    PredictMap(PredictMapArgs),
    /// Print the exact file contract of one input source.
    Schema(SchemaArgs),
}

#[derive(Args)]
struct SynthArgs {
    /// Long-term counting stations.
    #[arg(long, value_name = "N")]
    n_long: Option<usize>,
    /// Short-term counting stations.
    #[arg(long, value_name = "N")]
    n_short: Option<usize>,
    /// Days of data.
    #[arg(long, value_name = "N")]
    n_days: Option<usize>,
    /// City extent in km.
    #[arg(long, value_name = "KM")]
    extent_km: Option<f64>,
    /// Observation noise level.
    #[arg(long, value_name = "SIGMA")]
    noise: Option<f64>,
    /// Bike-share trips per day.
    #[arg(long, value_name = "N")]
    trips_per_day: Option<usize>,
}

#[derive(Args)]
struct EvalLogoArgs {
    /// Score scale: daily or aadb.
    #[arg(long, value_name = "SCALE")]
    scale: Option<String>,
}

#[derive(Args)]
struct ImportanceArgs {
    /// Error metric: mae or smape.
    #[arg(long, value_name = "METRIC")]
    metric: Option<String>,
    /// Permutations per fold.
    #[arg(long, value_name = "N")]
    permutations: Option<usize>,
}

#[derive(Args)]
struct SimulateArgs {
    /// Sampling strategy: one_day, three_day, or seven_day.
    #[arg(long, value_name = "STRATEGY")]
    strategy: Option<String>,
    /// Training scenario: full_city, location_specific, or sample_mean.
    #[arg(long, value_name = "SCENARIO")]
    scenario: Option<String>,
    /// Longest campaign to simulate.
    #[arg(long, value_name = "DAYS")]
    max_days: Option<usize>,
    /// Campaign replications per station.
    #[arg(long, value_name = "N")]
    reps: Option<usize>,
    /// Also write the ten-day full-city headline reports (daily and annual
    /// average).
    #[arg(long)]
    headline: bool,
}

#[derive(Args)]
struct PredictMapArgs {
    /// Date to predict, YYYY-MM-DD.
    #[arg(long, value_name = "DATE")]
    date: String,
}

#[derive(Args)]
struct SchemaArgs {
    /// Source name, e.g. stations or street_graph.
    #[arg(long, value_name = "NAME")]
    source: String,
}

fn apply_overrides(cfg: &mut RunConfig, cli: &Cli) {
    if let Some(d) = &cli.bundle_dir {
        cfg.paths.bundle_dir = d.clone();
    }
    if let Some(d) = &cli.table_dir {
        cfg.paths.table_dir = Some(d.clone());
    }
    if let Some(d) = &cli.output_dir {
        cfg.paths.output_dir = d.clone();
    }
    if let Some(w) = &cli.window {
        cfg.study.window = w.clone();
    }
    if let Some(k) = &cli.estimator {
        cfg.estimator.kind = k.clone();
    }
    match &cli.command {
        Command::Synth(a) => {
            if let Some(v) = a.n_long {
                cfg.synth.n_long = v;
            }
            if let Some(v) = a.n_short {
                cfg.synth.n_short = v;
            }
            if let Some(v) = a.n_days {
                cfg.synth.n_days = v;
            }
            if let Some(v) = a.extent_km {
                cfg.synth.extent_km = v;
            }
            if let Some(v) = a.noise {
                cfg.synth.noise = v;
            }
            if let Some(v) = a.trips_per_day {
                cfg.synth.trips_per_day = v;
            }
            if let Some(s) = cli.seed {
                cfg.seeds.synth = Some(s);
            }
        }
        Command::Train => {
            if let Some(s) = cli.seed {
                cfg.seeds.train = Some(s);
            }
        }
        Command::EvalLogo(a) => {
            if let Some(scale) = &a.scale {
                cfg.evaluation.scale = scale.clone();
            }
            if let Some(s) = cli.seed {
                cfg.seeds.eval = Some(s);
            }
        }
        Command::EvalShort => {
            if let Some(s) = cli.seed {
                cfg.seeds.eval = Some(s);
            }
        }
        Command::Importance(a) => {
            if let Some(m) = &a.metric {
                cfg.importance.metric = m.clone();
            }
            if let Some(n) = a.permutations {
                cfg.importance.n_permutations = n;
            }
            if let Some(s) = cli.seed {
                cfg.seeds.importance = Some(s);
            }
        }
        Command::Simulate(a) => {
            if let Some(v) = &a.strategy {
                cfg.sampling.strategy = v.clone();
            }
            if let Some(v) = &a.scenario {
                cfg.sampling.scenario = v.clone();
            }
            if let Some(v) = a.max_days {
                cfg.sampling.max_days = v;
            }
            if let Some(v) = a.reps {
                cfg.sampling.reps = v;
            }
            if let Some(s) = cli.seed {
                cfg.seeds.sampling = Some(s);
            }
        }
        Command::PredictMap(_) => {
            if let Some(s) = cli.seed {
                cfg.seeds.predict = Some(s);
            }
        }
        Command::Clean | Command::Features | Command::Schema(_) => {}
    }
}

fn run() -> Result<()> {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) {
                print!("{e}");
                return Ok(());
            }
            return Err(Error::config(e.to_string()));
        }
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    if let Some(n) = cli.workers {
        if n == 0 {
            return Err(Error::config("--workers must be at least 1"));
        }
        set_workers(n);
    }
    let mut cfg = RunConfig::load(cli.config.as_deref())?;
    apply_overrides(&mut cfg, &cli);
    let hash = cfg.hash()?;
    match &cli.command {
        Command::Synth(_) => commands::synth(&cfg, &hash),
        Command::Clean => commands::clean(&cfg, &hash),
        Command::Features => commands::features(&cfg, &hash),
        Command::Train => commands::train(&cfg, &hash),
        Command::EvalLogo(_) => commands::eval_logo(&cfg, &hash),
        Command::EvalShort => commands::eval_short(&cfg, &hash),
        Command::Importance(_) => commands::importance(&cfg, &hash),
        Command::Simulate(a) => commands::simulate(&cfg, &hash, a.headline),
        Command::PredictMap(a) => {
            let date = NaiveDate::parse_from_str(&a.date, "%Y-%m-%d")
                .map_err(|e| Error::config(format!("--date {:?}: {e}", a.date)))?;
            commands::predict_map(&cfg, &hash, date)
        }
        Command::Schema(a) => commands::print_schema(&a.source),
    }
}

fn main() {
    let code = match run() {
        Ok(()) => 0,
        Err(e) => {
            let (code, line) = diagnostic(&e);
            eprintln!("{line}");
            code
        }
    };
    std::process::exit(code);
}
