use crate::config::{BackendKind, Settings};
use crate::error::{CliError, CliResult, WithCode, INPUT, STATS};
use serde::Serialize;
use std::collections::BTreeMap;
use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use walkgap::analysis::{
    compute_discrepancies, pair_candidates, read_routed_csv, top_k_per_origin, unwalkability_score,
    write_candidates_csv, write_routed_csv, write_unrouted_csv, AnalysisError, RoutedPair,
};
use walkgap::export::{
    build_circles, write_addresses_csv, write_amenities_csv, write_geojson, write_grid_csv, write_houses_csv,
    write_viz_csv,
};
use walkgap::geo::{bounding_box, haversine_distance, BoundingBox, EarthModel};
use walkgap::grid::{clip_to_polygon, generate_grid, generate_jittered_grid, parse_boundary_geojson, GridSpec};
use walkgap::ingest::{
    parse_daft_csv, parse_grid_csv, parse_kml_addresses, parse_nace_csv, AmenityOrigin, CategoryMap, DaftColumns,
    Dropped, HouseRecord, NaceColumns, Parsed,
};
use walkgap::routing::{HttpBackend, HttpConfig, RoutingBackend, StreetGraph, SyntheticBackend};
use walkgap::stats::{run_regression, ModelSpec, Observation, WeightMode};

pub const ORIGINS_FILE: &str = "origins.csv";
pub const GRID_FILE: &str = "grid.csv";
pub const CANDIDATES_FILE: &str = "candidates.csv";
pub const ROUTED_FILE: &str = "routed.csv";
pub const UNROUTED_FILE: &str = "unrouted.csv";
pub const REJECTED_FILE: &str = "rejected.csv";
pub const TOP_K_FILE: &str = "top_k.csv";
pub const SUMMARY_FILE: &str = "summary.json";
pub const VIZ_FILE: &str = "viz.csv";
pub const GEOJSON_FILE: &str = "footpaths.geojson";

fn read_input(path: &Path) -> CliResult<Vec<u8>> {
    fs::read(path).code(INPUT, format!("cannot read input file {}", path.display()))
}

/// Writes through a temporary file and renames, so an interrupted run never
/// leaves a truncated artifact behind.
fn write_atomic<T>(path: &Path, body: impl FnOnce(&mut BufWriter<File>) -> anyhow::Result<T>) -> CliResult<T> {
    let tmp = path.with_extension("partial");
    let mut w =
        BufWriter::new(File::create(&tmp).map_err(|e| anyhow::anyhow!("cannot create {}: {e}", tmp.display()))?);
    let out = body(&mut w)?;
    w.flush()?;
    drop(w);
    fs::rename(&tmp, path)?;
    Ok(out)
}

fn write_json(path: &Path, value: &impl Serialize) -> CliResult<()> {
    write_atomic(path, |w| {
        serde_json::to_writer_pretty(&mut *w, value)?;
        w.write_all(b"\n")?;
        Ok(())
    })
}

fn create_dir(dir: &Path) -> CliResult<()> {
    fs::create_dir_all(dir).map_err(|e| anyhow::anyhow!("cannot create {}: {e}", dir.display()).into())
}

fn parse_file<T, E>(path: &Path, parse: impl FnOnce(&[u8]) -> Result<Parsed<T>, E>) -> CliResult<Parsed<T>>
where
    E: Into<anyhow::Error>,
{
    let bytes = read_input(path)?;
    let parsed = parse(&bytes).code(INPUT, path.display())?;
    for d in &parsed.dropped {
        log::warn!("{}:{}: dropped: {}", path.display(), d.line, d.reason);
    }
    Ok(parsed)
}

pub fn load_amenities(path: &Path) -> CliResult<Vec<AmenityOrigin>> {
    Ok(parse_file(path, |b| {
        parse_nace_csv(b, &NaceColumns::default(), &CategoryMap::default())
    })?
    .records)
}

fn build_backend(settings: &Settings) -> CliResult<Box<dyn RoutingBackend>> {
    match settings.backend {
        BackendKind::Synthetic => {
            let path = settings.graph.as_ref().ok_or_else(|| {
                CliError::config("the synthetic backend needs --graph (or `graph` in the config file)")
            })?;
            let graph = StreetGraph::from_json(&read_input(path)?).code(INPUT, path.display())?;
            Ok(Box::new(SyntheticBackend::new(graph)))
        }
        BackendKind::Http => {
            let key = std::env::var(&settings.api_key_env).unwrap_or_default();
            if key.trim().is_empty() {
                return Err(CliError::config(format!(
                    "the http backend needs an API key in ${}",
                    settings.api_key_env
                )));
            }
            let mut config = HttpConfig::new(settings.api_base_url.clone(), key);
            config.cache_dir = Some(settings.cache_dir.clone());
            config.requests_per_second = settings.requests_per_second;
            Ok(Box::new(HttpBackend::new(config).map_err(|e| {
                CliError::config(format!("cannot use cache dir {}: {e}", settings.cache_dir.display()))
            })?))
        }
    }
}

#[derive(Serialize)]
struct DatasetReport {
    input: String,
    output: String,
    parsed: usize,
    dropped: usize,
    drops: Vec<Dropped>,
}

impl DatasetReport {
    fn new<T>(input: &Path, output: &str, parsed: &Parsed<T>) -> Self {
        Self {
            input: input.display().to_string(),
            output: output.into(),
            parsed: parsed.records.len(),
            dropped: parsed.dropped.len(),
            drops: parsed.dropped.clone(),
        }
    }
}

pub struct IngestArgs {
    pub kml: Option<PathBuf>,
    pub nace: Option<PathBuf>,
    pub daft: Option<PathBuf>,
    pub out: PathBuf,
}

pub fn ingest(args: &IngestArgs) -> CliResult<()> {
    if args.kml.is_none() && args.nace.is_none() && args.daft.is_none() {
        return Err(CliError::input(
            "nothing to ingest: pass at least one of --kml, --nace, --daft",
        ));
    }
    create_dir(&args.out)?;
    let mut report = BTreeMap::new();
    if let Some(path) = &args.kml {
        let parsed = parse_file(path, |b| parse_kml_addresses(b))?;
        write_atomic(&args.out.join("addresses.csv"), |w| {
            Ok(write_addresses_csv(w, &parsed.records)?)
        })?;
        report.insert("kml", DatasetReport::new(path, "addresses.csv", &parsed));
    }
    if let Some(path) = &args.nace {
        let parsed = parse_file(path, |b| {
            parse_nace_csv(b, &NaceColumns::default(), &CategoryMap::default())
        })?;
        write_atomic(&args.out.join("amenities.csv"), |w| {
            Ok(write_amenities_csv(w, &parsed.records)?)
        })?;
        report.insert("nace", DatasetReport::new(path, "amenities.csv", &parsed));
    }
    if let Some(path) = &args.daft {
        let parsed = parse_file(path, |b| parse_daft_csv(b, &DaftColumns::default()))?;
        write_atomic(&args.out.join("houses.csv"), |w| {
            Ok(write_houses_csv(w, &parsed.records)?)
        })?;
        report.insert("daft", DatasetReport::new(path, "houses.csv", &parsed));
    }
    for (name, r) in &report {
        println!("{name}: parsed {}, dropped {}", r.parsed, r.dropped);
    }
    write_json(&args.out.join("ingest_report.json"), &report)
}

pub struct GridArgs {
    pub bbox: Option<String>,
    pub boundary: Option<PathBuf>,
    pub lat_step: f64,
    pub lon_step: f64,
    pub jitter: Option<f64>,
    pub seed: u64,
    pub out: PathBuf,
}

fn parse_bbox(s: &str) -> CliResult<BoundingBox> {
    let v: Vec<f64> = s
        .split(',')
        .map(|t| t.trim().parse::<f64>())
        .collect::<Result<_, _>>()
        .map_err(|_| CliError::input(format!("--bbox `{s}` must be min_lat,max_lat,min_lon,max_lon")))?;
    if v.len() != 4 {
        return Err(CliError::input(format!("--bbox `{s}` must have four numbers")));
    }
    BoundingBox::new(v[0], v[1], v[2], v[3]).code(INPUT, "--bbox")
}

pub fn grid(args: &GridArgs) -> CliResult<()> {
    let boundary = args
        .boundary
        .as_ref()
        .map(|p| parse_boundary_geojson(&read_input(p)?).code(INPUT, p.display()))
        .transpose()?;
    let bbox = match (&args.bbox, &boundary) {
        (Some(s), _) => parse_bbox(s)?,
        (None, Some(ring)) => bounding_box(ring).code(INPUT, "boundary")?,
        (None, None) => return Err(CliError::input("pass --bbox or --boundary")),
    };
    let spec = GridSpec::new(bbox, args.lat_step, args.lon_step).code(INPUT, "grid steps")?;
    let mut points = match args.jitter {
        Some(f) => generate_jittered_grid(&spec, f, args.seed),
        None => generate_grid(&spec),
    };
    if let Some(ring) = &boundary {
        points = clip_to_polygon(&points, ring).code(INPUT, "boundary")?;
    }
    if let Some(dir) = args.out.parent().filter(|d| !d.as_os_str().is_empty()) {
        create_dir(dir)?;
    }
    write_atomic(&args.out, |w| Ok(write_grid_csv(w, &points)?))?;
    println!("{} grid points -> {}", points.len(), args.out.display());
    Ok(())
}

pub struct AnalyzeArgs {
    pub origins: PathBuf,
    pub grid: PathBuf,
    pub out: PathBuf,
}

#[derive(Serialize)]
struct AnalyzeSummary {
    backend: BackendKind,
    origins: usize,
    destinations: usize,
    candidate_pairs: usize,
    routed_pairs: usize,
    unrouted_pairs: usize,
    rejected_pairs: usize,
    top_k: usize,
    top_k_rows: usize,
    max_discrepancy_km: Option<f64>,
}

fn analysis_error(e: AnalysisError) -> CliError {
    match e {
        AnalysisError::InvalidParams(_) => CliError::config(e),
        other => CliError::new(crate::error::RUNTIME, other),
    }
}

pub fn analyze(args: &AnalyzeArgs, settings: &Settings) -> CliResult<()> {
    let origins = load_amenities(&args.origins)?;
    let grid = parse_file(&args.grid, |b| parse_grid_csv(b))?.records;
    let backend = build_backend(settings)?;
    create_dir(&args.out)?;

    if grid.is_empty() {
        log::warn!("grid {} is empty; writing empty outputs", args.grid.display());
    }
    let pairs = pair_candidates(&origins, &grid, &settings.analysis);
    log::info!(
        "{} candidate pairs from {} origins x {} destinations",
        pairs.len(),
        origins.len(),
        grid.len()
    );
    write_atomic(&args.out.join(ORIGINS_FILE), |w| Ok(write_amenities_csv(w, &origins)?))?;
    write_atomic(&args.out.join(GRID_FILE), |w| Ok(write_grid_csv(w, &grid)?))?;
    write_atomic(&args.out.join(CANDIDATES_FILE), |w| {
        Ok(write_candidates_csv(w, &pairs)?)
    })?;

    let report = compute_discrepancies(&pairs, backend.as_ref(), settings.parallelism).map_err(analysis_error)?;
    let top = top_k_per_origin(&report.routed, settings.analysis.top_k);
    write_atomic(&args.out.join(ROUTED_FILE), |w| {
        Ok(write_routed_csv(w, &report.routed)?)
    })?;
    write_atomic(&args.out.join(UNROUTED_FILE), |w| {
        Ok(write_unrouted_csv(w, &report.unrouted)?)
    })?;
    write_atomic(&args.out.join(REJECTED_FILE), |w| {
        Ok(write_unrouted_csv(w, &report.rejected)?)
    })?;
    write_atomic(&args.out.join(TOP_K_FILE), |w| Ok(write_routed_csv(w, &top)?))?;
    if !report.rejected.is_empty() {
        log::warn!(
            "{} routes undercut the great circle and were rejected",
            report.rejected.len()
        );
    }

    let summary = AnalyzeSummary {
        backend: settings.backend,
        origins: origins.len(),
        destinations: grid.len(),
        candidate_pairs: pairs.len(),
        routed_pairs: report.routed.len(),
        unrouted_pairs: report.unrouted.len(),
        rejected_pairs: report.rejected.len(),
        top_k: settings.analysis.top_k,
        top_k_rows: top.len(),
        max_discrepancy_km: report.max_discrepancy_km(),
    };
    write_json(&args.out.join(SUMMARY_FILE), &summary)?;
    println!(
        "{} candidate pairs, {} routed, {} unrouted, {} rejected; max discrepancy {}",
        summary.candidate_pairs,
        summary.routed_pairs,
        summary.unrouted_pairs,
        summary.rejected_pairs,
        summary
            .max_discrepancy_km
            .map_or("n/a".to_string(), |d| format!("{d:.3} km"))
    );
    Ok(())
}

pub struct RegressArgs {
    pub houses: PathBuf,
    pub amenities: PathBuf,
    pub out: PathBuf,
    pub unit_weights: bool,
}

#[derive(Serialize)]
struct DroppedHouse {
    address: String,
    reason: String,
}

#[derive(Serialize)]
struct RegressOutput {
    houses_total: usize,
    houses_used: usize,
    city_centre: [f64; 2],
    aggregation: String,
    dropped: Vec<DroppedHouse>,
    report: walkgap::stats::RegressionReport,
}

/// Unwalkability of every house, computed on `parallelism` threads; results
/// keep input order.
fn score_houses(
    houses: &[HouseRecord],
    amenities: &[AmenityOrigin],
    backend: &dyn RoutingBackend,
    settings: &Settings,
) -> CliResult<Vec<Result<f64, String>>> {
    let chunk = houses.len().div_ceil(settings.parallelism).max(1);
    let results: Vec<Result<Vec<Result<f64, String>>, AnalysisError>> = std::thread::scope(|s| {
        let handles: Vec<_> = houses
            .chunks(chunk)
            .map(|part| {
                s.spawn(move || {
                    part.iter()
                        .map(|h| {
                            match unwalkability_score(
                                &h.point,
                                amenities,
                                backend,
                                &settings.analysis,
                                settings.aggregation,
                            ) {
                                Ok(v) => Ok(Ok(v)),
                                Err(AnalysisError::NoCoverage(why)) => Ok(Err(why)),
                                Err(e) => Err(e),
                            }
                        })
                        .collect()
                })
            })
            .collect();
        handles
            .into_iter()
            .map(|h| h.join().expect("scoring thread panicked"))
            .collect()
    });
    let mut out = Vec::with_capacity(houses.len());
    for r in results {
        out.extend(r.map_err(analysis_error)?);
    }
    Ok(out)
}

pub fn regress(args: &RegressArgs, settings: &Settings) -> CliResult<()> {
    let houses = parse_file(&args.houses, |b| parse_daft_csv(b, &DaftColumns::default()))?.records;
    let amenities = load_amenities(&args.amenities)?;
    let backend = build_backend(settings)?;
    create_dir(&args.out)?;

    let earth = EarthModel::default();
    let scores = score_houses(&houses, &amenities, backend.as_ref(), settings)?;
    let mut observations = Vec::new();
    let mut dropped = Vec::new();
    let mut scored = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(Vec::new());
    scored.write_record([
        "Latitude",
        "Longitude",
        "Address",
        "Type",
        "Price",
        "dist_centre_km",
        "unwalkability_km",
    ])?;
    for (h, score) in houses.iter().zip(scores) {
        match score {
            Ok(u) => {
                let dist = haversine_distance(&h.point, &settings.city_centre, &earth);
                scored.write_record([
                    h.point.lat().to_string(),
                    h.point.lon().to_string(),
                    h.address.clone(),
                    h.dwelling_type.name().to_string(),
                    h.price_eur.to_string(),
                    dist.to_string(),
                    u.to_string(),
                ])?;
                observations.push(Observation {
                    price_eur: h.price_eur,
                    dwelling_type: h.dwelling_type,
                    dist_centre_km: dist,
                    unwalkability_km: u,
                });
            }
            Err(reason) => dropped.push(DroppedHouse {
                address: h.address.clone(),
                reason,
            }),
        }
    }
    let scored = scored.into_inner().map_err(|e| anyhow::anyhow!("{e}"))?;
    write_atomic(&args.out.join("houses_scored.csv"), |w| Ok(w.write_all(&scored)?))?;
    if !dropped.is_empty() {
        log::warn!(
            "{} houses have no routable amenity within range and were dropped",
            dropped.len()
        );
    }

    let mode = if args.unit_weights {
        WeightMode::Unit
    } else {
        WeightMode::Estimated
    };
    let report = run_regression(&observations, &ModelSpec::default(), mode).code(STATS, "regression")?;
    let table = format!(
        "{}\nhouses: {} total, {} used, {} dropped (no coverage)\n",
        report.to_table(),
        houses.len(),
        observations.len(),
        dropped.len()
    );
    let output = RegressOutput {
        houses_total: houses.len(),
        houses_used: observations.len(),
        city_centre: [settings.city_centre.lat(), settings.city_centre.lon()],
        aggregation: settings.aggregation.to_string(),
        dropped,
        report,
    };
    write_json(&args.out.join("regression.json"), &output)?;
    write_atomic(&args.out.join("regression.txt"), |w| Ok(w.write_all(table.as_bytes())?))?;
    print!("{table}");
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum Format {
    Viz,
    Geojson,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum PathSet {
    /// The worst pairs per origin.
    TopK,
    /// Every routed pair.
    All,
}

pub struct ExportArgs {
    pub analysis: PathBuf,
    pub out: PathBuf,
    pub formats: Vec<Format>,
    pub paths: PathSet,
}

fn require_file(dir: &Path, name: &str) -> CliResult<PathBuf> {
    let path = dir.join(name);
    if path.is_file() {
        Ok(path)
    } else {
        Err(CliError::input(format!(
            "missing upstream file {} (run `walkgap analyze` first)",
            path.display()
        )))
    }
}

pub fn export(args: &ExportArgs, settings: &Settings) -> CliResult<()> {
    let origins_path = require_file(&args.analysis, ORIGINS_FILE)?;
    let grid_path = require_file(&args.analysis, GRID_FILE)?;
    let paths_path = require_file(
        &args.analysis,
        match args.paths {
            PathSet::TopK => TOP_K_FILE,
            PathSet::All => ROUTED_FILE,
        },
    )?;
    let origins = load_amenities(&origins_path)?;
    let grid = parse_file(&grid_path, |b| parse_grid_csv(b))?.records;
    let routed: Vec<RoutedPair> =
        read_routed_csv(read_input(&paths_path)?.as_slice()).code(INPUT, paths_path.display())?;
    create_dir(&args.out)?;

    let mut formats = args.formats.clone();
    formats.dedup();
    let mut written = Vec::new();
    for f in formats {
        match f {
            Format::Viz => {
                let path = args.out.join(VIZ_FILE);
                let rows = write_atomic(&path, |w| {
                    Ok(write_viz_csv(w, &origins, &grid, &routed, &settings.circles)?)
                })
                .map_err(|e| CliError::new(INPUT, e.error))?;
                println!("{} ({rows} rows)", path.display());
                written.push(path);
            }
            Format::Geojson => {
                let path = args.out.join(GEOJSON_FILE);
                let circles = build_circles(&origins, &routed, &settings.circles).code(INPUT, paths_path.display())?;
                let n = write_atomic(&path, |w| Ok(write_geojson(w, &routed, &origins, &circles)?))
                    .map_err(|e| CliError::new(INPUT, e.error))?;
                println!("{} ({n} features)", path.display());
                written.push(path);
            }
        }
    }
    Ok(())
}
