#![no_main]
use libfuzzer_sys::fuzz_target;
use walkgap::geo::bounding_box;
use walkgap::grid::parse_boundary_geojson;

fuzz_target!(|data: &[u8]| {
    if let Ok(ring) = parse_boundary_geojson(data) {
        let _ = bounding_box(&ring);
    }
});
