use crate::error::{CliError, CliResult};
use clap::ValueEnum;
use serde::{Deserialize, Serialize};
use std::path::{Path, PathBuf};
use walkgap::analysis::{Aggregation, AnalysisParams};
use walkgap::export::CircleParams;
use walkgap::geo::{vertex_count, GeoPoint};
use walkgap::routing::HttpConfig;

pub const DEFAULT_API_KEY_ENV: &str = "WALKGAP_API_KEY";
pub const DEFAULT_CACHE_DIR: &str = ".walkgap-cache";
/// Conventional Dublin reference point (O'Connell Bridge area).
pub const DEFAULT_CITY_CENTRE: (f64, f64) = (53.3472, -6.2592);
pub const DEFAULT_PARALLELISM: usize = 4;

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BackendKind {
    Http,
    Synthetic,
}

#[derive(Debug, Clone, Copy, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LatLon {
    pub lat: f64,
    pub lon: f64,
}

/// Keys accepted in the TOML config file. Relative paths are resolved
/// against the file's directory.
#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FileConfig {
    pub backend: Option<BackendKind>,
    pub graph: Option<PathBuf>,
    pub cache_dir: Option<PathBuf>,
    pub api_base_url: Option<String>,
    pub api_key_env: Option<String>,
    pub requests_per_second: Option<f64>,
    pub city_centre: Option<LatLon>,
    pub annulus_min_km: Option<f64>,
    pub annulus_max_km: Option<f64>,
    pub top_k: Option<usize>,
    pub walkability_radius_km: Option<f64>,
    pub circle_scale: Option<f64>,
    pub circle_step_deg: Option<f64>,
    pub parallelism: Option<usize>,
    pub aggregation: Option<String>,
}

impl FileConfig {
    pub fn load(path: &Path) -> CliResult<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::config(format!("cannot read config {}: {e}", path.display())))?;
        let mut cfg: FileConfig =
            toml::from_str(&text).map_err(|e| CliError::config(format!("invalid config {}: {e}", path.display())))?;
        let base = path.parent().unwrap_or(Path::new(""));
        for p in [&mut cfg.graph, &mut cfg.cache_dir].into_iter().flatten() {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        }
        Ok(cfg)
    }
}

/// Values given on the command line (or through their environment
/// variables); each overrides the config file.
#[derive(Debug, Default, Clone, clap::Args)]
pub struct Overrides {
    #[arg(long, value_enum, env = "WALKGAP_BACKEND", global = true)]
    pub backend: Option<BackendKind>,
    /// Street graph JSON for the synthetic backend.
    #[arg(long, env = "WALKGAP_GRAPH", global = true)]
    pub graph: Option<PathBuf>,
    #[arg(long, env = "WALKGAP_CACHE_DIR", global = true)]
    pub cache_dir: Option<PathBuf>,
    #[arg(long, env = "WALKGAP_API_BASE_URL", global = true)]
    pub api_base_url: Option<String>,
    /// Name of the environment variable holding the API key.
    #[arg(long, env = "WALKGAP_API_KEY_ENV", global = true)]
    pub api_key_env: Option<String>,
    #[arg(long, env = "WALKGAP_REQUESTS_PER_SECOND", global = true)]
    pub requests_per_second: Option<f64>,
    /// "lat,lon"
    #[arg(long, env = "WALKGAP_CITY_CENTRE", global = true)]
    pub city_centre: Option<String>,
    #[arg(long, env = "WALKGAP_ANNULUS_MIN_KM", global = true)]
    pub annulus_min_km: Option<f64>,
    #[arg(long, env = "WALKGAP_ANNULUS_MAX_KM", global = true)]
    pub annulus_max_km: Option<f64>,
    #[arg(long, env = "WALKGAP_TOP_K", global = true)]
    pub top_k: Option<usize>,
    #[arg(long, env = "WALKGAP_WALKABILITY_RADIUS_KM", global = true)]
    pub walkability_radius_km: Option<f64>,
    #[arg(long, env = "WALKGAP_CIRCLE_SCALE", global = true)]
    pub circle_scale: Option<f64>,
    #[arg(long, env = "WALKGAP_CIRCLE_STEP_DEG", global = true)]
    pub circle_step_deg: Option<f64>,
    #[arg(long, env = "WALKGAP_PARALLELISM", global = true)]
    pub parallelism: Option<usize>,
    /// mean, max or importance-weighted
    #[arg(long, env = "WALKGAP_AGGREGATION", global = true)]
    pub aggregation: Option<String>,
}

/// Fully resolved settings: flag > environment > config file > default.
#[derive(Debug, Clone)]
pub struct Settings {
    pub backend: BackendKind,
    pub graph: Option<PathBuf>,
    pub cache_dir: PathBuf,
    pub api_base_url: String,
    pub api_key_env: String,
    pub requests_per_second: Option<f64>,
    pub city_centre: GeoPoint,
    pub analysis: AnalysisParams,
    pub circles: CircleParams,
    pub parallelism: usize,
    pub aggregation: Aggregation,
}

fn parse_lat_lon(s: &str) -> CliResult<GeoPoint> {
    let (lat, lon) = s
        .split_once(',')
        .ok_or_else(|| CliError::config(format!("city centre `{s}` must be \"lat,lon\"")))?;
    let parse = |v: &str| {
        v.trim()
            .parse::<f64>()
            .map_err(|_| CliError::config(format!("city centre `{s}` is not numeric")))
    };
    GeoPoint::new(parse(lat)?, parse(lon)?).map_err(|e| CliError::config(format!("city centre: {e}")))
}

impl Settings {
    pub fn resolve(cli: &Overrides, file: &FileConfig) -> CliResult<Self> {
        let defaults = AnalysisParams::default();
        let circle_defaults = CircleParams::default();
        let city_centre = match (&cli.city_centre, file.city_centre) {
            (Some(s), _) => parse_lat_lon(s)?,
            (None, Some(c)) => {
                GeoPoint::new(c.lat, c.lon).map_err(|e| CliError::config(format!("city_centre: {e}")))?
            }
            (None, None) => GeoPoint::new(DEFAULT_CITY_CENTRE.0, DEFAULT_CITY_CENTRE.1).expect("valid default"),
        };
        let aggregation = cli
            .aggregation
            .clone()
            .or_else(|| file.aggregation.clone())
            .map(|s| s.parse::<Aggregation>().map_err(CliError::config))
            .transpose()?
            .unwrap_or_default();
        let settings = Self {
            backend: cli.backend.or(file.backend).unwrap_or(BackendKind::Http),
            graph: cli.graph.clone().or_else(|| file.graph.clone()),
            cache_dir: cli
                .cache_dir
                .clone()
                .or_else(|| file.cache_dir.clone())
                .unwrap_or_else(|| PathBuf::from(DEFAULT_CACHE_DIR)),
            api_base_url: cli
                .api_base_url
                .clone()
                .or_else(|| file.api_base_url.clone())
                .unwrap_or_else(|| HttpConfig::DEFAULT_BASE_URL.to_string()),
            api_key_env: cli
                .api_key_env
                .clone()
                .or_else(|| file.api_key_env.clone())
                .unwrap_or_else(|| DEFAULT_API_KEY_ENV.to_string()),
            requests_per_second: cli.requests_per_second.or(file.requests_per_second).or(Some(10.0)),
            city_centre,
            analysis: AnalysisParams {
                annulus_min_km: cli
                    .annulus_min_km
                    .or(file.annulus_min_km)
                    .unwrap_or(defaults.annulus_min_km),
                annulus_max_km: cli
                    .annulus_max_km
                    .or(file.annulus_max_km)
                    .unwrap_or(defaults.annulus_max_km),
                top_k: cli.top_k.or(file.top_k).unwrap_or(defaults.top_k),
                walkability_radius_km: cli
                    .walkability_radius_km
                    .or(file.walkability_radius_km)
                    .unwrap_or(defaults.walkability_radius_km),
            },
            circles: CircleParams {
                scale: cli.circle_scale.or(file.circle_scale).unwrap_or(circle_defaults.scale),
                step_deg: cli
                    .circle_step_deg
                    .or(file.circle_step_deg)
                    .unwrap_or(circle_defaults.step_deg),
            },
            parallelism: cli.parallelism.or(file.parallelism).unwrap_or(DEFAULT_PARALLELISM),
            aggregation,
        };
        settings.validate()?;
        Ok(settings)
    }

    fn validate(&self) -> CliResult<()> {
        self.analysis.validate().map_err(CliError::config)?;
        if self.parallelism == 0 {
            return Err(CliError::config("parallelism must be at least 1"));
        }
        if !(self.circles.scale.is_finite() && self.circles.scale > 0.0) {
            return Err(CliError::config(format!(
                "circle scale must be positive, got {}",
                self.circles.scale
            )));
        }
        vertex_count(self.circles.step_deg).map_err(CliError::config)?;
        if let Some(q) = self.requests_per_second {
            if !(q.is_finite() && q > 0.0) {
                return Err(CliError::config(format!(
                    "requests_per_second must be positive, got {q}"
                )));
            }
        }
        Ok(())
    }
}
