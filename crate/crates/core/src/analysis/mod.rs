//! Walkability pipeline: annulus pairing, footpath vs. great-circle
//! discrepancies, worst pairs per origin, and per-point unwalkability scores.

mod io;

pub use io::{
    decode_waypoints, encode_waypoints, read_routed_csv, write_candidates_csv, write_routed_csv, write_unrouted_csv,
};

use crate::geo::{haversine_distance, EarthModel, GeoPoint};
use crate::grid::GridDestination;
use crate::ingest::AmenityOrigin;
use crate::routing::{RouteError, RouteRequest, RoutingBackend, Waypoint};
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::sync::atomic::{AtomicBool, AtomicUsize, Ordering};
use std::sync::Mutex;
use thiserror::Error;

/// Routes may undercut the great circle by at most this much (km).
pub const DISCREPANCY_TOLERANCE_KM: f64 = 1e-6;

#[derive(Debug, Error)]
pub enum AnalysisError {
    #[error("invalid analysis parameters: {0}")]
    InvalidParams(String),
    #[error(transparent)]
    Routing(#[from] RouteError),
    #[error("no coverage: {0}")]
    NoCoverage(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AnalysisParams {
    pub annulus_min_km: f64,
    pub annulus_max_km: f64,
    pub top_k: usize,
    pub walkability_radius_km: f64,
}

impl Default for AnalysisParams {
    fn default() -> Self {
        Self {
            annulus_min_km: 1.5,
            annulus_max_km: 2.0,
            top_k: 5,
            walkability_radius_km: 2.0,
        }
    }
}

impl AnalysisParams {
    pub fn validate(&self) -> Result<(), AnalysisError> {
        let ok = self.annulus_min_km.is_finite()
            && self.annulus_max_km.is_finite()
            && self.annulus_min_km >= 0.0
            && self.annulus_min_km < self.annulus_max_km
            && self.top_k >= 1
            && self.walkability_radius_km.is_finite()
            && self.walkability_radius_km > 0.0;
        if ok {
            Ok(())
        } else {
            Err(AnalysisError::InvalidParams(format!("{self:?}")))
        }
    }
}

/// An origin/destination pair whose straight-line distance falls inside the
/// annulus `(annulus_min_km, annulus_max_km]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CandidatePair {
    /// Index into the origin list.
    pub origin_id: usize,
    pub origin_name: String,
    pub origin: GeoPoint,
    pub dest_id: usize,
    pub destination: GeoPoint,
    pub euclidean_km: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RoutedPair {
    pub pair: CandidatePair,
    pub footpath_km: f64,
    pub discrepancy_km: f64,
    pub waypoints: Vec<Waypoint>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UnroutedPair {
    pub pair: CandidatePair,
    pub reason: String,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct DiscrepancyReport {
    pub routed: Vec<RoutedPair>,
    /// Pairs the backend could not connect.
    pub unrouted: Vec<UnroutedPair>,
    /// Pairs whose route undercut the great circle by more than the tolerance.
    pub rejected: Vec<UnroutedPair>,
}

impl DiscrepancyReport {
    pub fn max_discrepancy_km(&self) -> Option<f64> {
        self.routed.iter().map(|r| r.discrepancy_km).reduce(f64::max)
    }
}

/// All (origin, destination) pairs in the annulus, ordered by origin index
/// then destination id.
pub fn pair_candidates(
    origins: &[AmenityOrigin],
    dests: &[GridDestination],
    params: &AnalysisParams,
) -> Vec<CandidatePair> {
    let earth = EarthModel::default();
    let mut sorted: Vec<&GridDestination> = dests.iter().collect();
    sorted.sort_by_key(|d| d.id);
    let mut out = Vec::new();
    for (origin_id, o) in origins.iter().enumerate() {
        for d in &sorted {
            let km = haversine_distance(&o.point, &d.point, &earth);
            if km > params.annulus_min_km && km <= params.annulus_max_km {
                out.push(CandidatePair {
                    origin_id,
                    origin_name: o.name.clone(),
                    origin: o.point,
                    dest_id: d.id,
                    destination: d.point,
                    euclidean_km: km,
                });
            }
        }
    }
    out
}

/// Routes every pair through `backend` using up to `parallelism` threads.
///
/// No-route answers are collected, not raised; any other routing failure
/// aborts the run. Output order follows `(origin_id, dest_id)` regardless of
/// completion order.
pub fn compute_discrepancies<B: RoutingBackend + ?Sized>(
    pairs: &[CandidatePair],
    backend: &B,
    parallelism: usize,
) -> Result<DiscrepancyReport, AnalysisError> {
    let workers = parallelism.max(1).min(pairs.len().max(1));
    let next = AtomicUsize::new(0);
    let abort = AtomicBool::new(false);
    let results: Mutex<Vec<(usize, Result<crate::routing::Route, RouteError>)>> =
        Mutex::new(Vec::with_capacity(pairs.len()));

    std::thread::scope(|s| {
        for _ in 0..workers {
            s.spawn(|| loop {
                if abort.load(Ordering::SeqCst) {
                    break;
                }
                let i = next.fetch_add(1, Ordering::SeqCst);
                let Some(pair) = pairs.get(i) else { break };
                let res = backend.route(&RouteRequest::new(pair.origin, pair.destination));
                if matches!(&res, Err(e) if !matches!(e, RouteError::NoRoute(_))) {
                    abort.store(true, Ordering::SeqCst);
                }
                results.lock().unwrap().push((i, res));
            });
        }
    });

    let mut results = results.into_inner().unwrap();
    results.sort_by_key(|(i, _)| *i);
    let mut report = DiscrepancyReport::default();
    for (i, res) in results {
        let pair = pairs[i].clone();
        match res {
            Ok(route) => {
                let discrepancy_km = route.total_km - pair.euclidean_km;
                if discrepancy_km < -DISCREPANCY_TOLERANCE_KM {
                    report.rejected.push(UnroutedPair {
                        reason: format!(
                            "backend inconsistency: footpath {:.6} km shorter than great circle {:.6} km",
                            route.total_km, pair.euclidean_km
                        ),
                        pair,
                    });
                } else {
                    report.routed.push(RoutedPair {
                        pair,
                        footpath_km: route.total_km,
                        discrepancy_km,
                        waypoints: route.waypoints,
                    });
                }
            }
            Err(RouteError::NoRoute(reason)) => report.unrouted.push(UnroutedPair { pair, reason }),
            Err(e) => return Err(e.into()),
        }
    }
    report.routed.sort_by_key(|r| (r.pair.origin_id, r.pair.dest_id));
    report.unrouted.sort_by_key(|r| (r.pair.origin_id, r.pair.dest_id));
    report.rejected.sort_by_key(|r| (r.pair.origin_id, r.pair.dest_id));
    Ok(report)
}

/// The `k` largest-discrepancy pairs for each origin. Output is ordered by
/// origin, then descending discrepancy, ties to the smaller destination id.
pub fn top_k_per_origin(routed: &[RoutedPair], k: usize) -> Vec<RoutedPair> {
    let mut by_origin: BTreeMap<usize, Vec<&RoutedPair>> = BTreeMap::new();
    for r in routed {
        by_origin.entry(r.pair.origin_id).or_default().push(r);
    }
    by_origin
        .into_values()
        .flat_map(|mut group| {
            group.sort_by(|a, b| {
                b.discrepancy_km
                    .total_cmp(&a.discrepancy_km)
                    .then(a.pair.dest_id.cmp(&b.pair.dest_id))
            });
            group.into_iter().take(k).cloned()
        })
        .collect()
}

/// How per-amenity discrepancies combine into one score.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Aggregation {
    #[default]
    Mean,
    Max,
    /// Mean weighted by each amenity's importance weight.
    ImportanceWeighted,
}

impl std::str::FromStr for Aggregation {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "mean" => Ok(Aggregation::Mean),
            "max" => Ok(Aggregation::Max),
            "importance-weighted" | "weighted" => Ok(Aggregation::ImportanceWeighted),
            other => Err(format!(
                "unknown aggregation `{other}` (mean, max, importance-weighted)"
            )),
        }
    }
}

impl std::fmt::Display for Aggregation {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Aggregation::Mean => "mean",
            Aggregation::Max => "max",
            Aggregation::ImportanceWeighted => "importance-weighted",
        })
    }
}

/// Unwalkability of an arbitrary point, in km: footpath minus great-circle
/// distance to every amenity within `walkability_radius_km`, aggregated.
///
/// Amenities the backend cannot reach are skipped. Fails with
/// [`AnalysisError::NoCoverage`] when nothing in range could be routed.
pub fn unwalkability_score<B: RoutingBackend + ?Sized>(
    point: &GeoPoint,
    origins: &[AmenityOrigin],
    backend: &B,
    params: &AnalysisParams,
    aggregation: Aggregation,
) -> Result<f64, AnalysisError> {
    let earth = EarthModel::default();
    let in_range: Vec<(&AmenityOrigin, f64)> = origins
        .iter()
        .map(|o| (o, haversine_distance(point, &o.point, &earth)))
        .filter(|(_, km)| *km <= params.walkability_radius_km)
        .collect();
    if in_range.is_empty() {
        return Err(AnalysisError::NoCoverage(format!(
            "no amenity within {} km",
            params.walkability_radius_km
        )));
    }

    let mut samples = Vec::with_capacity(in_range.len());
    for (o, euclid) in in_range {
        match backend.route(&RouteRequest::new(*point, o.point)) {
            Ok(route) => samples.push(((route.total_km - euclid).max(0.0), o.importance_weight())),
            Err(RouteError::NoRoute(_)) => continue,
            Err(e) => return Err(e.into()),
        }
    }
    if samples.is_empty() {
        return Err(AnalysisError::NoCoverage(
            "no amenity in range is reachable on the network".into(),
        ));
    }
    let n = samples.len() as f64;
    Ok(match aggregation {
        Aggregation::Mean => samples.iter().map(|(d, _)| d).sum::<f64>() / n,
        Aggregation::Max => samples.iter().map(|(d, _)| *d).fold(0.0, f64::max),
        Aggregation::ImportanceWeighted => {
            let wsum: f64 = samples.iter().map(|(_, w)| w).sum();
            samples.iter().map(|(d, w)| d * w).sum::<f64>() / wsum
        }
    })
}

#[cfg(test)]
mod tests;
