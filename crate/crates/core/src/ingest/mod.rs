//! Parsers for the three source datasets: KML address points, NACE amenity
//! CSV and the house-price CSV.
//!
//! Every parser returns a [`Parsed`] carrying the valid records together with
//! the rows it dropped, so `records.len() + dropped.len()` always equals the
//! number of candidate input rows.

mod columns;
mod daft;
mod kml;
mod nace;
mod normalized;

pub use columns::ColumnAliases;
pub use daft::{parse_daft_csv, parse_price, DaftColumns};
pub use kml::parse_kml_addresses;
pub use nace::{parse_nace_csv, CategoryMap, NaceColumns};
pub use normalized::{parse_address_csv, parse_grid_csv};

use crate::geo::GeoPoint;
use serde::{Deserialize, Serialize};
use std::fmt;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum IngestError {
    #[error("malformed XML at line {line}, column {column}: {message}")]
    Xml { line: u64, column: u64, message: String },
    #[error("schema error: {0}")]
    Schema(String),
    #[error("CSV error at line {line}: {message}")]
    Csv { line: u64, message: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// A row that was skipped during parsing.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dropped {
    pub line: u64,
    pub reason: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Parsed<T> {
    pub records: Vec<T>,
    pub dropped: Vec<Dropped>,
}

impl<T> Parsed<T> {
    pub fn total(&self) -> usize {
        self.records.len() + self.dropped.len()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AddressPoint {
    pub id: String,
    pub point: GeoPoint,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Category {
    PrimarySchool,
    SecondarySchool,
    University,
    Religious,
    Medical,
    Retail,
    SportsClub,
    Garda,
}

impl Category {
    pub const ALL: [Category; 8] = [
        Category::PrimarySchool,
        Category::SecondarySchool,
        Category::University,
        Category::Religious,
        Category::Medical,
        Category::Retail,
        Category::SportsClub,
        Category::Garda,
    ];

    /// NACE section code this category is drawn from.
    pub fn nace_code(self) -> &'static str {
        match self {
            Category::PrimarySchool => "P85.20",
            Category::SecondarySchool => "P85.30",
            Category::University => "P85.42",
            Category::Religious => "S94.91",
            Category::Medical => "Q86.90",
            Category::Retail => "G47.11",
            Category::SportsClub => "QR93.12",
            Category::Garda => "O84.23",
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Category::PrimarySchool => "PrimarySchool",
            Category::SecondarySchool => "SecondarySchool",
            Category::University => "University",
            Category::Religious => "Religious",
            Category::Medical => "Medical",
            Category::Retail => "Retail",
            Category::SportsClub => "SportsClub",
            Category::Garda => "Garda",
        }
    }
}

impl fmt::Display for Category {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// An amenity used as a routing origin.
///
/// The importance weight is the count of commercial delivery points taken
/// verbatim; it is never below 1.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AmenityOrigin {
    pub name: String,
    pub category: Category,
    pub point: GeoPoint,
    delivery_points: u32,
}

impl AmenityOrigin {
    /// `delivery_points` of 0 is raised to the observed minimum of 1.
    pub fn new(name: impl Into<String>, category: Category, point: GeoPoint, delivery_points: u32) -> Self {
        Self {
            name: name.into(),
            category,
            point,
            delivery_points: delivery_points.max(1),
        }
    }

    pub fn delivery_points(&self) -> u32 {
        self.delivery_points
    }

    pub fn importance_weight(&self) -> f64 {
        f64::from(self.delivery_points)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum DwellingType {
    New,
    SecondHand,
}

impl DwellingType {
    /// Binary encoding used in the regression: New = 1, SecondHand = 0.
    pub fn indicator(self) -> f64 {
        match self {
            DwellingType::New => 1.0,
            DwellingType::SecondHand => 0.0,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            DwellingType::New => "New",
            DwellingType::SecondHand => "SecondHand",
        }
    }

    /// Accepts the short names, 1/0, and the long property-register wording
    /// ("New Dwelling house /Apartment", "Second-Hand Dwelling house /Apartment").
    pub fn parse(s: &str) -> Option<Self> {
        let t = s.trim().to_ascii_lowercase();
        match t.as_str() {
            "1" => return Some(DwellingType::New),
            "0" => return Some(DwellingType::SecondHand),
            _ => {}
        }
        let squashed: String = t.chars().filter(|c| c.is_ascii_alphanumeric()).collect();
        if squashed.starts_with("secondhand") || squashed == "used" {
            Some(DwellingType::SecondHand)
        } else if squashed.starts_with("new") {
            Some(DwellingType::New)
        } else {
            None
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HouseRecord {
    pub point: GeoPoint,
    pub address: String,
    pub dwelling_type: DwellingType,
    pub price_eur: f64,
}

pub(crate) fn strip_bom(input: &[u8]) -> &[u8] {
    input.strip_prefix(b"\xEF\xBB\xBF").unwrap_or(input)
}
