mod commands;
mod config;
mod error;

use clap::{Parser, Subcommand};
use commands::{AnalyzeArgs, ExportArgs, Format, GridArgs, IngestArgs, PathSet, RegressArgs};
use config::{FileConfig, Overrides, Settings};
use error::CliResult;
use std::path::PathBuf;
use std::process::ExitCode;

/// Measures how much longer walking routes are than straight lines, and how
/// that gap relates to house prices.
#[derive(Parser)]
#[command(name = "walkgap", version)]
struct Cli {
    /// TOML config file; command-line flags and environment variables win.
    #[arg(long, env = "WALKGAP_CONFIG", global = true)]
    config: Option<PathBuf>,
    /// More log output (-v info, -vv debug). RUST_LOG also works.
    #[arg(short, long, action = clap::ArgAction::Count, global = true)]
    verbose: u8,
    #[command(flatten)]
    overrides: Overrides,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Normalise raw address, amenity and listing files.
    Ingest {
        /// Address points (KML).
        #[arg(long)]
        kml: Option<PathBuf>,
        /// Business register extract (CSV).
        #[arg(long)]
        nace: Option<PathBuf>,
        /// Property listings (CSV).
        #[arg(long)]
        daft: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Generate destination points over a box or boundary polygon.
    Grid {
        /// min_lat,max_lat,min_lon,max_lon
        #[arg(long, allow_hyphen_values = true)]
        bbox: Option<String>,
        /// GeoJSON Polygon; points outside are dropped.
        #[arg(long)]
        boundary: Option<PathBuf>,
        #[arg(long)]
        lat_step: f64,
        #[arg(long)]
        lon_step: f64,
        /// Offset each point by up to this fraction of a step.
        #[arg(long)]
        jitter: Option<f64>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Route origin/destination pairs and rank the worst detours.
    Analyze {
        /// Amenity CSV (as written by `ingest`).
        #[arg(long)]
        origins: PathBuf,
        #[arg(long)]
        grid: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Score houses and fit the price model.
    Regress {
        /// House CSV (as written by `ingest`).
        #[arg(long)]
        houses: PathBuf,
        #[arg(long)]
        amenities: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Skip weight estimation; the WLS fit then equals OLS.
        #[arg(long)]
        unit_weights: bool,
    },
    /// Write visualisation files from an `analyze` output directory.
    Export {
        #[arg(long)]
        analysis: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, value_enum, value_delimiter = ',', default_values_t = [Format::Viz, Format::Geojson])]
        format: Vec<Format>,
        #[arg(long, value_enum, default_value_t = PathSet::TopK)]
        paths: PathSet,
    },
}

fn settings(cli: &Cli) -> CliResult<Settings> {
    let file = match &cli.config {
        Some(p) => FileConfig::load(p)?,
        None => FileConfig::default(),
    };
    Settings::resolve(&cli.overrides, &file)
}

fn run(cli: Cli) -> CliResult<()> {
    match cli.command {
        Command::Ingest {
            ref kml,
            ref nace,
            ref daft,
            ref out,
        } => commands::ingest(&IngestArgs {
            kml: kml.clone(),
            nace: nace.clone(),
            daft: daft.clone(),
            out: out.clone(),
        }),
        Command::Grid {
            ref bbox,
            ref boundary,
            lat_step,
            lon_step,
            jitter,
            seed,
            ref out,
        } => commands::grid(&GridArgs {
            bbox: bbox.clone(),
            boundary: boundary.clone(),
            lat_step,
            lon_step,
            jitter,
            seed,
            out: out.clone(),
        }),
        Command::Analyze {
            ref origins,
            ref grid,
            ref out,
        } => {
            let s = settings(&cli)?;
            commands::analyze(
                &AnalyzeArgs {
                    origins: origins.clone(),
                    grid: grid.clone(),
                    out: out.clone(),
                },
                &s,
            )
        }
        Command::Regress {
            ref houses,
            ref amenities,
            ref out,
            unit_weights,
        } => {
            let s = settings(&cli)?;
            commands::regress(
                &RegressArgs {
                    houses: houses.clone(),
                    amenities: amenities.clone(),
                    out: out.clone(),
                    unit_weights,
                },
                &s,
            )
        }
        Command::Export {
            ref analysis,
            ref out,
            ref format,
            paths,
        } => {
            let s = settings(&cli)?;
            commands::export(
                &ExportArgs {
                    analysis: analysis.clone(),
                    out: out.clone(),
                    formats: format.clone(),
                    paths,
                },
                &s,
            )
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level))
        .format_timestamp(None)
        .init();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {:#}", e.error);
            ExitCode::from(e.code)
        }
    }
}
