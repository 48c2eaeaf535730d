#![no_main]
use libfuzzer_sys::fuzz_target;
use walkgap::ingest::{parse_daft_csv, DaftColumns};

fuzz_target!(|data: &[u8]| {
    if let Ok(parsed) = parse_daft_csv(data, &DaftColumns::default()) {
        assert!(parsed
            .records
            .iter()
            .all(|h| h.price_eur.is_finite() && h.price_eur > 0.0));
    }
});
