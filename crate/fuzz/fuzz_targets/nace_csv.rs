#![no_main]
use libfuzzer_sys::fuzz_target;
use walkgap::ingest::{parse_nace_csv, CategoryMap, NaceColumns};

fuzz_target!(|data: &[u8]| {
    if let Ok(parsed) = parse_nace_csv(data, &NaceColumns::default(), &CategoryMap::default()) {
        assert!(parsed.records.iter().all(|o| o.importance_weight() >= 1.0));
    }
});
