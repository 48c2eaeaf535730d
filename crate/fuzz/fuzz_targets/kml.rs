#![no_main]
use libfuzzer_sys::fuzz_target;
use walkgap::ingest::parse_kml_addresses;

fuzz_target!(|data: &[u8]| {
    if let Ok(parsed) = parse_kml_addresses(data) {
        for r in &parsed.records {
            assert!(r.point.lat().abs() <= 90.0 && r.point.lon().abs() <= 180.0);
        }
    }
});
