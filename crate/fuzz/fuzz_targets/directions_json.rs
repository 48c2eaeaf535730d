#![no_main]
use libfuzzer_sys::fuzz_target;
use walkgap::routing::parse_directions_json;

fuzz_target!(|data: &[u8]| {
    if let Ok(route) = parse_directions_json(data) {
        assert!(route.total_km.is_finite() && route.total_km >= 0.0);
        assert!(!route.waypoints.is_empty());
    }
});
