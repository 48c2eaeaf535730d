use super::{Route, RouteError};
use crate::geo::GeoPoint;
use serde_json::Value;

/// Decodes a directions-API JSON body.
///
/// The route length is `routes[0].legs[0].distance.value` (metres) in km.
/// Waypoints are the leg's `start_location` followed by every step's
/// `end_location`. `ZERO_RESULTS` maps to [`RouteError::NoRoute`]; any other
/// non-`OK` status to [`RouteError::ApiStatus`].
pub fn parse_directions_json(body: &[u8]) -> Result<Route, RouteError> {
    let doc: Value = serde_json::from_slice(body).map_err(|e| RouteError::Decode(format!("invalid JSON: {e}")))?;
    let status = doc
        .get("status")
        .and_then(Value::as_str)
        .ok_or_else(|| missing("status"))?;
    match status {
        "OK" => {}
        "ZERO_RESULTS" => return Err(RouteError::NoRoute("directions API returned ZERO_RESULTS".into())),
        other => {
            return Err(RouteError::ApiStatus {
                status: other.to_string(),
                message: doc.get("error_message").and_then(Value::as_str).map(str::to_string),
            })
        }
    }

    let leg = doc
        .get("routes")
        .and_then(|r| r.get(0))
        .ok_or_else(|| missing("routes[0]"))?
        .get("legs")
        .and_then(|l| l.get(0))
        .ok_or_else(|| missing("routes[0].legs[0]"))?;
    let meters = leg
        .get("distance")
        .and_then(|d| d.get("value"))
        .and_then(Value::as_f64)
        .ok_or_else(|| missing("routes[0].legs[0].distance.value"))?;
    if !meters.is_finite() || meters < 0.0 {
        return Err(RouteError::Decode(format!("negative or non-finite distance {meters}")));
    }
    let start = location(leg.get("start_location"), "routes[0].legs[0].start_location")?;
    let steps = leg
        .get("steps")
        .and_then(Value::as_array)
        .ok_or_else(|| missing("routes[0].legs[0].steps"))?;
    let mut points = Vec::with_capacity(steps.len() + 1);
    points.push(start);
    for (i, step) in steps.iter().enumerate() {
        points.push(location(
            step.get("end_location"),
            &format!("routes[0].legs[0].steps[{i}].end_location"),
        )?);
    }
    Ok(Route::from_points(meters / 1000.0, points))
}

fn location(v: Option<&Value>, path: &str) -> Result<GeoPoint, RouteError> {
    let v = v.ok_or_else(|| missing(path))?;
    let lat = v
        .get("lat")
        .and_then(Value::as_f64)
        .ok_or_else(|| missing(&format!("{path}.lat")))?;
    let lng = v
        .get("lng")
        .and_then(Value::as_f64)
        .ok_or_else(|| missing(&format!("{path}.lng")))?;
    GeoPoint::new(lat, lng).map_err(|e| RouteError::Decode(format!("{path}: {e}")))
}

fn missing(field: &str) -> RouteError {
    RouteError::Decode(format!("missing field `{field}`"))
}
