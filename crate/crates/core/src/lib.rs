pub mod analysis;
pub mod export;
pub mod format;
pub mod geo;
pub mod grid;
pub mod ingest;
pub mod routing;
pub mod stats;
