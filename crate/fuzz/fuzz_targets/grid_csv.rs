#![no_main]
use libfuzzer_sys::fuzz_target;
use walkgap::ingest::{parse_address_csv, parse_grid_csv};

fuzz_target!(|data: &[u8]| {
    let _ = parse_grid_csv(data);
    let _ = parse_address_csv(data);
});
