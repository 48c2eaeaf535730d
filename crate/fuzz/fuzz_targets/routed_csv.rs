#![no_main]
use libfuzzer_sys::fuzz_target;
use walkgap::analysis::{decode_waypoints, read_routed_csv};

fuzz_target!(|data: &[u8]| {
    let _ = read_routed_csv(data);
    if let Ok(s) = std::str::from_utf8(data) {
        let _ = decode_waypoints(s);
    }
});
