//! Spherical great-circle geometry.
//!
//! Everything here is a pure function over plain values. Angles cross the API
//! in decimal degrees; the trigonometry runs in radians.

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Mean Earth radius used throughout, in kilometres.
pub const EARTH_RADIUS_KM: f64 = 6371.0;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GeoError {
    #[error("invalid coordinate ({lat}, {lon})")]
    InvalidCoordinate { lat: f64, lon: f64 },
    #[error("invalid input: {0}")]
    InvalidInput(String),
}

/// A WGS84 coordinate in decimal degrees.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GeoPoint {
    lat: f64,
    lon: f64,
}

impl GeoPoint {
    pub fn new(lat: f64, lon: f64) -> Result<Self, GeoError> {
        if Self::is_valid(lat, lon) {
            Ok(Self { lat, lon })
        } else {
            Err(GeoError::InvalidCoordinate { lat, lon })
        }
    }

    pub fn is_valid(lat: f64, lon: f64) -> bool {
        lat.is_finite() && lon.is_finite() && (-90.0..=90.0).contains(&lat) && (-180.0..=180.0).contains(&lon)
    }

    pub fn lat(&self) -> f64 {
        self.lat
    }

    pub fn lon(&self) -> f64 {
        self.lon
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EarthModel {
    radius_km: f64,
}

impl EarthModel {
    pub fn new(radius_km: f64) -> Result<Self, GeoError> {
        if radius_km.is_finite() && radius_km > 0.0 {
            Ok(Self { radius_km })
        } else {
            Err(GeoError::InvalidInput(format!(
                "earth radius must be positive, got {radius_km}"
            )))
        }
    }

    pub fn radius_km(&self) -> f64 {
        self.radius_km
    }
}

impl Default for EarthModel {
    fn default() -> Self {
        Self {
            radius_km: EARTH_RADIUS_KM,
        }
    }
}

/// Axis-aligned box in latitude/longitude space.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoundingBox {
    pub min_lat: f64,
    pub max_lat: f64,
    pub min_lon: f64,
    pub max_lon: f64,
}

impl BoundingBox {
    pub fn new(min_lat: f64, max_lat: f64, min_lon: f64, max_lon: f64) -> Result<Self, GeoError> {
        let all_finite = [min_lat, max_lat, min_lon, max_lon].iter().all(|v| v.is_finite());
        if !all_finite || min_lat > max_lat || min_lon > max_lon {
            return Err(GeoError::InvalidInput(format!(
                "bounding box requires min <= max, got lat [{min_lat}, {max_lat}] lon [{min_lon}, {max_lon}]"
            )));
        }
        Ok(Self {
            min_lat,
            max_lat,
            min_lon,
            max_lon,
        })
    }

    pub fn contains(&self, p: &GeoPoint) -> bool {
        (self.min_lat..=self.max_lat).contains(&p.lat) && (self.min_lon..=self.max_lon).contains(&p.lon)
    }
}

/// Great-circle distance in kilometres using the haversine formula.
pub fn haversine_distance(a: &GeoPoint, b: &GeoPoint, earth: &EarthModel) -> f64 {
    let phi1 = a.lat.to_radians();
    let phi2 = b.lat.to_radians();
    let dphi = phi2 - phi1;
    let dlambda = (b.lon - a.lon).to_radians();
    let h = (dphi / 2.0).sin().powi(2) + phi1.cos() * phi2.cos() * (dlambda / 2.0).sin().powi(2);
    2.0 * earth.radius_km * h.clamp(0.0, 1.0).sqrt().asin()
}

/// Same as [`haversine_distance`] but for raw coordinates, rejecting anything
/// that is not a valid [`GeoPoint`].
pub fn haversine_checked(lat1: f64, lon1: f64, lat2: f64, lon2: f64, earth: &EarthModel) -> Result<f64, GeoError> {
    let a = GeoPoint::new(lat1, lon1)?;
    let b = GeoPoint::new(lat2, lon2)?;
    Ok(haversine_distance(&a, &b, earth))
}

/// Point reached by travelling `distance_km` along the great circle leaving
/// `origin` at `bearing_deg` (clockwise from true north).
pub fn destination_point(
    origin: &GeoPoint,
    bearing_deg: f64,
    distance_km: f64,
    earth: &EarthModel,
) -> Result<GeoPoint, GeoError> {
    if !distance_km.is_finite() || distance_km < 0.0 {
        return Err(GeoError::InvalidInput(format!(
            "distance must be a nonnegative finite number, got {distance_km}"
        )));
    }
    if !bearing_deg.is_finite() {
        return Err(GeoError::InvalidInput(format!(
            "bearing must be finite, got {bearing_deg}"
        )));
    }
    if distance_km == 0.0 {
        return Ok(*origin);
    }
    let theta = bearing_deg.rem_euclid(360.0).to_radians();
    let delta = distance_km / earth.radius_km;
    let lat1 = origin.lat.to_radians();
    let lon1 = origin.lon.to_radians();

    let sin_lat2 = (lat1.sin() * delta.cos() + lat1.cos() * delta.sin() * theta.cos()).clamp(-1.0, 1.0);
    let lat2 = sin_lat2.asin();
    let lon2 = lon1 + (theta.sin() * delta.sin() * lat1.cos()).atan2(delta.cos() - lat1.sin() * sin_lat2);

    GeoPoint::new(lat2.to_degrees(), normalize_lon(lon2.to_degrees()))
}

fn normalize_lon(lon: f64) -> f64 {
    let wrapped = (lon + 180.0).rem_euclid(360.0) - 180.0;
    // rem_euclid maps +180 to -180; keep the sign the caller would expect
    if wrapped == -180.0 && lon > 0.0 {
        180.0
    } else {
        wrapped
    }
}

/// Vertices of a geodesic circle at bearings 0, step, ..., 360 - step.
///
/// The ring is open: the first vertex is not repeated at the end.
pub fn circle_polygon(
    center: &GeoPoint,
    radius_km: f64,
    step_deg: f64,
    earth: &EarthModel,
) -> Result<Vec<GeoPoint>, GeoError> {
    let count = vertex_count(step_deg)?;
    (0..count)
        .map(|i| destination_point(center, i as f64 * step_deg, radius_km, earth))
        .collect()
}

/// Number of vertices `circle_polygon` produces for `step_deg`, or an error
/// when the step does not divide 360 evenly.
pub fn vertex_count(step_deg: f64) -> Result<usize, GeoError> {
    if !step_deg.is_finite() || step_deg <= 0.0 || step_deg > 360.0 {
        return Err(GeoError::InvalidInput(format!(
            "circle step must be in (0, 360], got {step_deg}"
        )));
    }
    let ratio = 360.0 / step_deg;
    let count = ratio.round();
    if (ratio - count).abs() > 1e-9 * ratio.max(1.0) {
        return Err(GeoError::InvalidInput(format!(
            "circle step {step_deg} does not divide 360"
        )));
    }
    Ok(count as usize)
}

/// Tight latitude/longitude box around `points`.
pub fn bounding_box(points: &[GeoPoint]) -> Result<BoundingBox, GeoError> {
    let first = points
        .first()
        .ok_or_else(|| GeoError::InvalidInput("bounding box of an empty point set".into()))?;
    let init = BoundingBox {
        min_lat: first.lat,
        max_lat: first.lat,
        min_lon: first.lon,
        max_lon: first.lon,
    };
    Ok(points.iter().skip(1).fold(init, |b, p| BoundingBox {
        min_lat: b.min_lat.min(p.lat),
        max_lat: b.max_lat.max(p.lat),
        min_lon: b.min_lon.min(p.lon),
        max_lon: b.max_lon.max(p.lon),
    }))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use std::f64::consts::PI;

    fn p(lat: f64, lon: f64) -> GeoPoint {
        GeoPoint::new(lat, lon).unwrap()
    }

    const R: f64 = EARTH_RADIUS_KM;

    #[test]
    fn identical_points_are_zero_apart() {
        let e = EarthModel::default();
        assert_eq!(haversine_distance(&p(53.35, -6.26), &p(53.35, -6.26), &e), 0.0);
    }

    #[test]
    fn half_circumference_along_equator() {
        let d = haversine_distance(&p(0.0, 0.0), &p(0.0, 180.0), &EarthModel::default());
        assert!((d - PI * R).abs() < 1e-6, "{d}");
        assert!((d - 20015.0865).abs() < 1e-3);
    }

    #[test]
    fn one_degree_of_meridian() {
        let d = haversine_distance(&p(0.0, 0.0), &p(1.0, 0.0), &EarthModel::default());
        assert!((d - PI * R / 180.0).abs() < 1e-9, "{d}");
        assert!((d - 111.1949).abs() < 1e-4);
    }

    #[test]
    fn non_finite_coordinates_rejected() {
        let e = EarthModel::default();
        assert!(haversine_checked(f64::NAN, 0.0, 0.0, 0.0, &e).is_err());
        assert!(haversine_checked(0.0, 0.0, 0.0, f64::INFINITY, &e).is_err());
        assert!(GeoPoint::new(91.0, 0.0).is_err());
        assert!(GeoPoint::new(0.0, -180.5).is_err());
        assert!(EarthModel::new(0.0).is_err());
    }

    #[test]
    fn zero_distance_projection_is_identity() {
        let o = p(10.0, 20.0);
        let d = destination_point(&o, 37.0, 0.0, &EarthModel::default()).unwrap();
        assert_eq!(d, o);
    }

    #[test]
    fn projection_along_meridian_and_equator() {
        let e = EarthModel::default();
        let arc = PI * R / 180.0;
        let north = destination_point(&p(0.0, 0.0), 0.0, arc, &e).unwrap();
        assert!((north.lat() - 1.0).abs() < 1e-9 && north.lon().abs() < 1e-9);
        let east = destination_point(&p(0.0, 0.0), 90.0, arc, &e).unwrap();
        assert!(east.lat().abs() < 1e-9 && (east.lon() - 1.0).abs() < 1e-9);
        // the rounded value quoted for a one-degree arc lands within 1e-6 deg
        let north = destination_point(&p(0.0, 0.0), 0.0, 111.1949, &e).unwrap();
        assert!((north.lat() - 1.0).abs() < 1e-6);
    }

    #[test]
    fn projection_rejects_negative_distance() {
        assert!(destination_point(&p(0.0, 0.0), 0.0, -1.0, &EarthModel::default()).is_err());
    }

    #[test]
    fn projection_wraps_antimeridian() {
        let e = EarthModel::default();
        let q = destination_point(&p(0.0, 179.5), 90.0, 111.0, &e).unwrap();
        assert!(q.lon() < -179.0, "{q:?}");
    }

    #[test]
    fn circle_has_24_vertices_at_radius() {
        let e = EarthModel::default();
        let c = p(53.3, -6.3);
        let ring = circle_polygon(&c, 1.0, 15.0, &e).unwrap();
        assert_eq!(ring.len(), 24);
        for v in &ring {
            assert!((haversine_distance(&c, v, &e) - 1.0).abs() < 1e-6);
        }
    }

    #[test]
    fn degenerate_circle_repeats_center() {
        let c = p(53.3, -6.3);
        let ring = circle_polygon(&c, 0.0, 90.0, &EarthModel::default()).unwrap();
        assert_eq!(ring, vec![c; 4]);
    }

    #[test]
    fn three_vertex_circle_is_equilateral() {
        let e = EarthModel::default();
        let ring = circle_polygon(&p(53.3, -6.3), 2.0, 120.0, &e).unwrap();
        assert_eq!(ring.len(), 3);
        let d01 = haversine_distance(&ring[0], &ring[1], &e);
        let d12 = haversine_distance(&ring[1], &ring[2], &e);
        let d20 = haversine_distance(&ring[2], &ring[0], &e);
        assert!((d01 - d12).abs() < 1e-6 && (d12 - d20).abs() < 1e-6);
    }

    #[test]
    fn circle_step_must_divide_360() {
        let e = EarthModel::default();
        let c = p(0.0, 0.0);
        assert!(circle_polygon(&c, 1.0, 0.0, &e).is_err());
        assert!(circle_polygon(&c, 1.0, -15.0, &e).is_err());
        assert!(circle_polygon(&c, 1.0, 7.0, &e).is_err());
        assert_eq!(circle_polygon(&c, 1.0, 0.5, &e).unwrap().len(), 720);
    }

    #[test]
    fn bounding_box_cases() {
        assert_eq!(
            bounding_box(&[p(1.0, 2.0)]).unwrap(),
            BoundingBox::new(1.0, 1.0, 2.0, 2.0).unwrap()
        );
        assert_eq!(
            bounding_box(&[p(0.0, 0.0), p(2.0, 4.0), p(1.0, 1.0)]).unwrap(),
            BoundingBox::new(0.0, 2.0, 0.0, 4.0).unwrap()
        );
        assert!(bounding_box(&[]).is_err());
    }

    #[test]
    fn bounding_box_contains_random_points() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
        let pts: Vec<_> = (0..1000)
            .map(|_| p(rng.random_range(-90.0..=90.0), rng.random_range(-180.0..=180.0)))
            .collect();
        let b = bounding_box(&pts).unwrap();
        assert!(pts.iter().all(|q| b.contains(q)));
        assert!(pts.iter().any(|q| q.lat() == b.min_lat));
        assert!(pts.iter().any(|q| q.lat() == b.max_lat));
        assert!(pts.iter().any(|q| q.lon() == b.min_lon));
        assert!(pts.iter().any(|q| q.lon() == b.max_lon));
    }

    fn point() -> impl Strategy<Value = GeoPoint> {
        (-90.0f64..=90.0, -180.0f64..=180.0).prop_map(|(la, lo)| p(la, lo))
    }

    proptest! {
        #[test]
        fn symmetric_and_bounded(a in point(), b in point()) {
            let e = EarthModel::default();
            let ab = haversine_distance(&a, &b, &e);
            prop_assert_eq!(ab, haversine_distance(&b, &a, &e));
            prop_assert!((0.0..=PI * R).contains(&ab));
        }

        #[test]
        fn triangle_inequality(a in point(), b in point(), c in point()) {
            let e = EarthModel::default();
            let ac = haversine_distance(&a, &c, &e);
            prop_assert!(ac <= haversine_distance(&a, &b, &e) + haversine_distance(&b, &c, &e) + 1e-9);
        }

        #[test]
        fn forward_inverse_round_trip(
            la in -89.0f64..=89.0, lo in -180.0f64..=180.0,
            bearing in -720.0f64..720.0, d in 1e-3f64..=100.0,
        ) {
            let e = EarthModel::default();
            let o = p(la, lo);
            let q = destination_point(&o, bearing, d, &e).unwrap();
            prop_assert!((haversine_distance(&o, &q, &e) - d).abs() < 1e-6);
        }
    }
}
