//! Pedestrian routing backends.
//!
//! Two implementations share the [`RoutingBackend`] trait: an offline
//! street-graph router ([`SyntheticBackend`]) and a directions-API client
//! ([`HttpBackend`]) with an on-disk response cache and a rate limiter.

mod directions;
mod graph;
mod http;

pub use directions::parse_directions_json;
pub use graph::{shortest_path, GraphError, StreetGraph, SyntheticBackend};
pub use http::{
    Clock, HttpBackend, HttpConfig, ManualClock, RateLimiter, ResponseCache, SystemClock, Transport, TransportError,
    UreqTransport,
};

use crate::geo::GeoPoint;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum RouteError {
    #[error("no route: {0}")]
    NoRoute(String),
    #[error("transport error: {0}")]
    Transport(String),
    #[error("directions API returned status {status}{}", message.as_deref().map(|m| format!(": {m}")).unwrap_or_default())]
    ApiStatus { status: String, message: Option<String> },
    #[error("malformed directions response: {0}")]
    Decode(String),
    #[error("response cache: {0}")]
    Cache(#[from] std::io::Error),
}

/// A walking, metric-unit routing request.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RouteRequest {
    pub origin: GeoPoint,
    pub destination: GeoPoint,
}

impl RouteRequest {
    pub const MODE: &'static str = "walking";
    pub const UNITS: &'static str = "metric";

    pub fn new(origin: GeoPoint, destination: GeoPoint) -> Self {
        Self { origin, destination }
    }

    /// Endpoints rounded to 6 decimals plus the travel mode.
    pub fn cache_key(&self) -> String {
        format!(
            "{:.6},{:.6}|{:.6},{:.6}|{}",
            self.origin.lat(),
            self.origin.lon(),
            self.destination.lat(),
            self.destination.lon(),
            Self::MODE
        )
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Waypoint {
    pub label: u32,
    pub point: GeoPoint,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Route {
    pub total_km: f64,
    pub waypoints: Vec<Waypoint>,
}

impl Route {
    /// Labels the points 0, 1, ... in order.
    pub fn from_points(total_km: f64, points: impl IntoIterator<Item = GeoPoint>) -> Self {
        Self {
            total_km,
            waypoints: points
                .into_iter()
                .enumerate()
                .map(|(i, point)| Waypoint { label: i as u32, point })
                .collect(),
        }
    }
}

pub trait RoutingBackend: Send + Sync {
    fn route(&self, request: &RouteRequest) -> Result<Route, RouteError>;
}

impl<B: RoutingBackend + ?Sized> RoutingBackend for &B {
    fn route(&self, request: &RouteRequest) -> Result<Route, RouteError> {
        (**self).route(request)
    }
}

impl<B: RoutingBackend + ?Sized> RoutingBackend for Box<B> {
    fn route(&self, request: &RouteRequest) -> Result<Route, RouteError> {
        (**self).route(request)
    }
}

impl<B: RoutingBackend + ?Sized> RoutingBackend for std::sync::Arc<B> {
    fn route(&self, request: &RouteRequest) -> Result<Route, RouteError> {
        (**self).route(request)
    }
}
