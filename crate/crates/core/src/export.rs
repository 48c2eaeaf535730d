//! Output writers: normalized intermediate CSVs, the long-format
//! visualisation CSV, and GeoJSON.

use crate::analysis::RoutedPair;
use crate::format::{coord, fixed, km};
use crate::geo::{circle_polygon, EarthModel, GeoError, GeoPoint};
use crate::grid::GridDestination;
use crate::ingest::{AddressPoint, AmenityOrigin, HouseRecord};
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use std::io::{self, Write};
use thiserror::Error;

pub const VIZ_HEADER: &str = "PointID,Latitude,Longitude,weight,label,path_order,travel_length_km";

#[derive(Debug, Error)]
pub enum ExportError {
    #[error(transparent)]
    Io(#[from] io::Error),
    #[error(transparent)]
    Geo(#[from] GeoError),
    #[error("invalid export input: {0}")]
    InvalidInput(String),
}

impl From<csv::Error> for ExportError {
    fn from(e: csv::Error) -> Self {
        match e.into_kind() {
            csv::ErrorKind::Io(e) => ExportError::Io(e),
            other => ExportError::Io(io::Error::other(format!("{other:?}"))),
        }
    }
}

fn csv_writer<W: Write>(sink: W) -> csv::Writer<W> {
    csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(sink)
}

/// Shortest decimal that parses back to the same `f64`.
fn exact(v: f64) -> String {
    format!("{v}")
}

/// `id,latitude,longitude`; read back by `parse_address_csv`.
pub fn write_addresses_csv<W: Write>(sink: W, points: &[AddressPoint]) -> Result<usize, ExportError> {
    let mut w = csv_writer(sink);
    w.write_record(["id", "latitude", "longitude"])?;
    for p in points {
        w.write_record([p.id.as_str(), &exact(p.point.lat()), &exact(p.point.lon())])?;
    }
    w.flush()?;
    Ok(points.len())
}

/// Grid destinations in the address layout with integer ids; read back by
/// `parse_grid_csv`.
pub fn write_grid_csv<W: Write>(sink: W, grid: &[GridDestination]) -> Result<usize, ExportError> {
    let mut w = csv_writer(sink);
    w.write_record(["id", "latitude", "longitude"])?;
    for d in grid {
        w.write_record([d.id.to_string(), exact(d.point.lat()), exact(d.point.lon())])?;
    }
    w.flush()?;
    Ok(grid.len())
}

/// Amenities with the category name in place of the section code; read back
/// by `parse_nace_csv` with the default column aliases.
pub fn write_amenities_csv<W: Write>(sink: W, amenities: &[AmenityOrigin]) -> Result<usize, ExportError> {
    let mut w = csv_writer(sink);
    w.write_record([
        "Name",
        "Category",
        "Latitude",
        "Longitude",
        "Commercial-Delivery-Points",
    ])?;
    for a in amenities {
        w.write_record([
            a.name.clone(),
            a.category.name().to_string(),
            exact(a.point.lat()),
            exact(a.point.lon()),
            a.delivery_points().to_string(),
        ])?;
    }
    w.flush()?;
    Ok(amenities.len())
}

/// Read back by `parse_daft_csv` with the default column aliases.
pub fn write_houses_csv<W: Write>(sink: W, houses: &[HouseRecord]) -> Result<usize, ExportError> {
    let mut w = csv_writer(sink);
    w.write_record(["Latitude", "Longitude", "Address", "Type", "Price"])?;
    for h in houses {
        w.write_record([
            exact(h.point.lat()),
            exact(h.point.lon()),
            h.address.clone(),
            h.dwelling_type.name().to_string(),
            exact(h.price_eur),
        ])?;
    }
    w.flush()?;
    Ok(houses.len())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CircleParams {
    /// Drawn radius in km per km of discrepancy.
    pub scale: f64,
    pub step_deg: f64,
}

impl Default for CircleParams {
    fn default() -> Self {
        Self {
            scale: 0.1,
            step_deg: 15.0,
        }
    }
}

/// A geodesic circle around an origin; `vertices` is an open ring.
#[derive(Debug, Clone, PartialEq)]
pub struct Circle {
    pub origin_id: usize,
    pub center: GeoPoint,
    pub radius_km: f64,
    pub vertices: Vec<GeoPoint>,
}

/// One circle per origin, radius `scale` times the origin's largest routed
/// discrepancy (zero when it has no routed pairs).
pub fn build_circles(
    origins: &[AmenityOrigin],
    routed: &[RoutedPair],
    params: &CircleParams,
) -> Result<Vec<Circle>, ExportError> {
    if !(params.scale.is_finite() && params.scale >= 0.0) {
        return Err(ExportError::InvalidInput(format!("circle scale {}", params.scale)));
    }
    check_origin_ids(origins, routed)?;
    let earth = EarthModel::default();
    let mut largest = vec![0.0f64; origins.len()];
    for r in routed {
        largest[r.pair.origin_id] = largest[r.pair.origin_id].max(r.discrepancy_km);
    }
    origins
        .iter()
        .zip(largest)
        .enumerate()
        .map(|(origin_id, (o, d))| {
            let radius_km = params.scale * d;
            Ok(Circle {
                origin_id,
                center: o.point,
                radius_km,
                vertices: circle_polygon(&o.point, radius_km, params.step_deg, &earth)?,
            })
        })
        .collect()
}

fn check_origin_ids(origins: &[AmenityOrigin], routed: &[RoutedPair]) -> Result<(), ExportError> {
    match routed.iter().find(|r| r.pair.origin_id >= origins.len()) {
        Some(r) => Err(ExportError::InvalidInput(format!(
            "routed pair references origin {} but only {} origins were given",
            r.pair.origin_id,
            origins.len()
        ))),
        None => Ok(()),
    }
}

/// Long-format CSV for Tableau-style viewers.
///
/// Row order: for each origin its `point` row followed by its `Circle`
/// rows; then every `random grid` row; then the waypoints of each routed
/// path in input order. Returns the number of data rows.
pub fn write_viz_csv<W: Write>(
    sink: W,
    origins: &[AmenityOrigin],
    grid: &[GridDestination],
    routed: &[RoutedPair],
    params: &CircleParams,
) -> Result<usize, ExportError> {
    let circles = build_circles(origins, routed, params)?;
    let mut w = csv_writer(sink);
    w.write_record(VIZ_HEADER.split(','))?;
    let mut rows = 0;
    let mut row =
        |w: &mut csv::Writer<W>, id: &str, p: &GeoPoint, weight: f64, label: &str, order: Option<usize>, len: f64| {
            rows += 1;
            w.write_record([
                id,
                &coord(p.lat()),
                &coord(p.lon()),
                &fixed(weight, 3),
                label,
                &order.map(|o| o.to_string()).unwrap_or_default(),
                &km(len),
            ])
        };
    for (o, c) in origins.iter().zip(&circles) {
        let id = format!("origin-{}", c.origin_id);
        let weight = o.importance_weight();
        row(&mut w, &id, &o.point, weight, "point", None, 0.0)?;
        for (k, v) in c.vertices.iter().enumerate() {
            row(&mut w, &id, v, weight, "Circle", Some(k), 0.0)?;
        }
    }
    for d in grid {
        row(
            &mut w,
            &format!("grid-{}", d.id),
            &d.point,
            1.0,
            "random grid",
            None,
            0.0,
        )?;
    }
    for r in routed {
        let id = format!("path-{}-{}", r.pair.origin_id, r.pair.dest_id);
        let weight = origins[r.pair.origin_id].importance_weight();
        for (k, wp) in r.waypoints.iter().enumerate() {
            row(&mut w, &id, &wp.point, weight, "point", Some(k), r.footpath_km)?;
        }
    }
    w.flush()?;
    Ok(rows)
}

fn position(p: &GeoPoint) -> Value {
    json!([p.lon(), p.lat()])
}

/// RFC 7946 FeatureCollection: a LineString per routed path, a Point per
/// origin and a closed Polygon per circle. Coordinates are written at full
/// precision in lon,lat order. Returns the feature count.
pub fn write_geojson<W: Write>(
    mut sink: W,
    routed: &[RoutedPair],
    origins: &[AmenityOrigin],
    circles: &[Circle],
) -> Result<usize, ExportError> {
    check_origin_ids(origins, routed)?;
    let mut features = Vec::with_capacity(routed.len() + origins.len() + circles.len());
    for r in routed {
        let mut line: Vec<Value> = r.waypoints.iter().map(|w| position(&w.point)).collect();
        if line.len() < 2 {
            line = vec![position(&r.pair.origin), position(&r.pair.destination)];
        }
        features.push(json!({
            "type": "Feature",
            "geometry": {"type": "LineString", "coordinates": line},
            "properties": {
                "kind": "footpath",
                "origin_id": r.pair.origin_id,
                "origin_name": r.pair.origin_name,
                "dest_id": r.pair.dest_id,
                "euclidean_km": r.pair.euclidean_km,
                "footpath_km": r.footpath_km,
                "discrepancy_km": r.discrepancy_km,
            },
        }));
    }
    for (i, o) in origins.iter().enumerate() {
        features.push(json!({
            "type": "Feature",
            "geometry": {"type": "Point", "coordinates": position(&o.point)},
            "properties": {
                "kind": "origin",
                "origin_id": i,
                "name": o.name,
                "category": o.category.name(),
                "importance": o.importance_weight(),
            },
        }));
    }
    for c in circles {
        if c.vertices.len() < 3 {
            return Err(ExportError::InvalidInput(format!(
                "circle around origin {} has {} vertices; a polygon needs at least 3",
                c.origin_id,
                c.vertices.len()
            )));
        }
        let mut ring: Vec<Value> = c.vertices.iter().map(position).collect();
        if let Some(first) = ring.first().cloned() {
            ring.push(first);
        }
        features.push(json!({
            "type": "Feature",
            "geometry": {"type": "Polygon", "coordinates": [ring]},
            "properties": {
                "kind": "circle",
                "origin_id": c.origin_id,
                "radius_km": c.radius_km,
            },
        }));
    }
    let count = features.len();
    let doc = json!({"type": "FeatureCollection", "features": features});
    serde_json::to_writer(&mut sink, &doc).map_err(io::Error::from)?;
    sink.write_all(b"\n")?;
    sink.flush()?;
    Ok(count)
}
