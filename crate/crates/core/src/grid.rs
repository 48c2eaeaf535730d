//! Regular destination grid over the study area.

use crate::geo::{BoundingBox, GeoError, GeoPoint};
use rand::{Rng, SeedableRng};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridDestination {
    pub id: usize,
    pub point: GeoPoint,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub bbox: BoundingBox,
    lat_step: f64,
    lon_step: f64,
}

impl GridSpec {
    pub fn new(bbox: BoundingBox, lat_step: f64, lon_step: f64) -> Result<Self, GeoError> {
        for (name, step) in [("latitude", lat_step), ("longitude", lon_step)] {
            if !step.is_finite() || step <= 0.0 {
                return Err(GeoError::InvalidInput(format!(
                    "{name} step must be positive and finite, got {step}"
                )));
            }
        }
        Ok(Self {
            bbox,
            lat_step,
            lon_step,
        })
    }

    pub fn lat_step(&self) -> f64 {
        self.lat_step
    }

    pub fn lon_step(&self) -> f64 {
        self.lon_step
    }

    /// Number of latitude rows and longitude columns.
    pub fn shape(&self) -> (usize, usize) {
        (
            arange_len(self.bbox.min_lat, self.bbox.max_lat, self.lat_step),
            arange_len(self.bbox.min_lon, self.bbox.max_lon, self.lon_step),
        )
    }
}

/// Same count as `np.arange(min, max, step)`, except a zero-width range
/// still yields its single value.
fn arange_len(min: f64, max: f64, step: f64) -> usize {
    (((max - min) / step).ceil() as usize).max(1)
}

/// Points at `(min_lat + i*lat_step, min_lon + j*lon_step)`, latitude outer,
/// with ids 0.. in generation order.
pub fn generate_grid(spec: &GridSpec) -> Vec<GridDestination> {
    let (rows, cols) = spec.shape();
    let b = spec.bbox;
    (0..rows)
        .flat_map(|i| (0..cols).map(move |j| (i, j)))
        .enumerate()
        .filter_map(|(id, (i, j))| {
            let lat = b.min_lat + i as f64 * spec.lat_step;
            let lon = b.min_lon + j as f64 * spec.lon_step;
            GeoPoint::new(lat, lon).ok().map(|point| GridDestination { id, point })
        })
        .collect()
}

/// Regular grid with each point displaced uniformly by up to
/// `fraction * step` in each axis. Deterministic for a given seed.
pub fn generate_jittered_grid(spec: &GridSpec, fraction: f64, seed: u64) -> Vec<GridDestination> {
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    let fraction = fraction.clamp(0.0, 0.5);
    generate_grid(spec)
        .into_iter()
        .filter_map(|g| {
            let dlat = rng.random_range(-1.0..=1.0) * fraction * spec.lat_step;
            let dlon = rng.random_range(-1.0..=1.0) * fraction * spec.lon_step;
            GeoPoint::new(g.point.lat() + dlat, g.point.lon() + dlon)
                .ok()
                .map(|point| GridDestination { id: g.id, point })
        })
        .collect()
}

/// Keeps grid points inside or on `boundary` (an open or closed ring in
/// lat/lon space), using even-odd ray casting.
pub fn clip_to_polygon(grid: &[GridDestination], boundary: &[GeoPoint]) -> Result<Vec<GridDestination>, GeoError> {
    let ring = open_ring(boundary);
    if ring.len() < 3 {
        return Err(GeoError::InvalidInput(format!(
            "boundary ring needs at least 3 distinct vertices, got {}",
            ring.len()
        )));
    }
    Ok(grid.iter().filter(|g| point_in_ring(&g.point, ring)).copied().collect())
}

fn open_ring(boundary: &[GeoPoint]) -> &[GeoPoint] {
    match boundary {
        [first, .., last] if boundary.len() > 1 && first == last => &boundary[..boundary.len() - 1],
        _ => boundary,
    }
}

fn point_in_ring(p: &GeoPoint, ring: &[GeoPoint]) -> bool {
    let (y, x) = (p.lat(), p.lon());
    let n = ring.len();
    let mut inside = false;
    for i in 0..n {
        let a = ring[i];
        let b = ring[(i + 1) % n];
        if on_segment(p, &a, &b) {
            return true;
        }
        let (ya, xa, yb, xb) = (a.lat(), a.lon(), b.lat(), b.lon());
        if (ya > y) != (yb > y) {
            let x_cross = xa + (y - ya) * (xb - xa) / (yb - ya);
            if x < x_cross {
                inside = !inside;
            }
        }
    }
    inside
}

fn on_segment(p: &GeoPoint, a: &GeoPoint, b: &GeoPoint) -> bool {
    let cross = (b.lon() - a.lon()) * (p.lat() - a.lat()) - (b.lat() - a.lat()) * (p.lon() - a.lon());
    let scale = (b.lon() - a.lon()).abs().max((b.lat() - a.lat()).abs()).max(1e-300);
    cross.abs() <= 1e-12 * scale
        && p.lon() >= a.lon().min(b.lon())
        && p.lon() <= a.lon().max(b.lon())
        && p.lat() >= a.lat().min(b.lat())
        && p.lat() <= a.lat().max(b.lat())
}

/// Reads the outer ring of the first Polygon in a GeoJSON document
/// (bare geometry, Feature or FeatureCollection). Positions are `[lon, lat]`;
/// a closing vertex equal to the first is removed.
pub fn parse_boundary_geojson(input: &[u8]) -> Result<Vec<GeoPoint>, GeoError> {
    let doc: serde_json::Value = serde_json::from_slice(input)
        .map_err(|e| GeoError::InvalidInput(format!("boundary is not valid JSON: {e}")))?;
    let coords =
        find_polygon(&doc).ok_or_else(|| GeoError::InvalidInput("no Polygon geometry in boundary file".into()))?;
    let ring = coords
        .as_array()
        .and_then(|rings| rings.first())
        .and_then(|r| r.as_array())
        .ok_or_else(|| GeoError::InvalidInput("Polygon has no rings".into()))?;
    let mut points = ring
        .iter()
        .map(|pos| {
            let pair = pos.as_array().filter(|a| a.len() >= 2);
            let num = |i: usize| pair.and_then(|a| a[i].as_f64());
            match (num(0), num(1)) {
                (Some(lon), Some(lat)) => GeoPoint::new(lat, lon),
                _ => Err(GeoError::InvalidInput(format!("bad position {pos}"))),
            }
        })
        .collect::<Result<Vec<_>, _>>()?;
    if points.len() > 1 && points.first() == points.last() {
        points.pop();
    }
    if points.len() < 3 {
        return Err(GeoError::InvalidInput(format!(
            "boundary ring needs at least 3 distinct vertices, got {}",
            points.len()
        )));
    }
    Ok(points)
}

fn find_polygon(v: &serde_json::Value) -> Option<&serde_json::Value> {
    match v.get("type")?.as_str()? {
        "Polygon" => v.get("coordinates"),
        "Feature" => find_polygon(v.get("geometry")?),
        "FeatureCollection" => v.get("features")?.as_array()?.iter().find_map(find_polygon),
        _ => None,
    }
}
