use super::columns::{ColumnAliases, CsvTable};
use super::{AmenityOrigin, Category, Dropped, IngestError, Parsed};
use crate::geo::GeoPoint;
use std::collections::HashMap;
use std::io::Read;

/// Section code → amenity category.
#[derive(Debug, Clone, PartialEq)]
pub struct CategoryMap {
    codes: HashMap<String, Category>,
}

impl CategoryMap {
    pub fn empty() -> Self {
        Self { codes: HashMap::new() }
    }

    pub fn insert(&mut self, code: &str, category: Category) {
        self.codes.insert(normalize_code(code), category);
    }

    /// Looks a code up, also accepting a category name such as `University`.
    pub fn get(&self, code: &str) -> Option<Category> {
        self.codes.get(&normalize_code(code)).copied().or_else(|| {
            Category::ALL
                .into_iter()
                .find(|c| c.name().eq_ignore_ascii_case(code.trim()))
        })
    }
}

impl Default for CategoryMap {
    fn default() -> Self {
        let mut map = Self::empty();
        for c in Category::ALL {
            map.insert(c.nace_code(), c);
        }
        map
    }
}

fn normalize_code(code: &str) -> String {
    code.chars()
        .filter(|c| c.is_ascii_alphanumeric())
        .map(|c| c.to_ascii_uppercase())
        .collect()
}

#[derive(Debug, Clone)]
pub struct NaceColumns {
    pub name: ColumnAliases,
    pub latitude: ColumnAliases,
    pub longitude: ColumnAliases,
    pub delivery_points: ColumnAliases,
    pub section: ColumnAliases,
}

impl Default for NaceColumns {
    fn default() -> Self {
        Self {
            name: ColumnAliases::new("Name", &["Name", "Property Name", "Building Name"]),
            latitude: ColumnAliases::new("Latitude", &["Latitude", "Lat", "Y"]),
            longitude: ColumnAliases::new("Longitude", &["Longitude", "Lon", "Lng", "Long", "X"]),
            delivery_points: ColumnAliases::new(
                "Commercial-Delivery-Points",
                &["Commercial-Delivery-Points", "Delivery Points", "delivery_points"],
            ),
            section: ColumnAliases::new(
                "Section",
                &["Section", "Section Code", "NACE", "NACE Code", "Code", "Category"],
            ),
        }
    }
}

/// Parses amenity origins from a NACE-coded CSV.
///
/// Blank or non-numeric delivery counts become 1. Rows with invalid
/// coordinates or an unmapped section code are dropped.
pub fn parse_nace_csv<R: Read>(
    input: R,
    columns: &NaceColumns,
    categories: &CategoryMap,
) -> Result<Parsed<AmenityOrigin>, IngestError> {
    let mut table = CsvTable::open(input)?;
    let name_ix = columns.name.require(&table.headers)?;
    let lat_ix = columns.latitude.require(&table.headers)?;
    let lon_ix = columns.longitude.require(&table.headers)?;
    let dp_ix = columns.delivery_points.require(&table.headers)?;
    let sec_ix = columns.section.require(&table.headers)?;

    let mut out = Parsed {
        records: Vec::new(),
        dropped: Vec::new(),
    };
    for row in table.rows() {
        let row = row?;
        let line = row.line;
        let drop = |reason: String| Dropped { line, reason };
        let Some(fields) = row.fields else {
            out.dropped.push(drop("row is not valid UTF-8".into()));
            continue;
        };
        let get = |ix: usize| fields.get(ix).map(String::as_str).unwrap_or("");

        let point = match parse_point(get(lat_ix), get(lon_ix)) {
            Ok(p) => p,
            Err(reason) => {
                out.dropped.push(drop(reason));
                continue;
            }
        };
        let Some(category) = categories.get(get(sec_ix)) else {
            out.dropped
                .push(drop(format!("unmapped section code `{}`", get(sec_ix))));
            continue;
        };
        out.records.push(AmenityOrigin::new(
            get(name_ix),
            category,
            point,
            parse_delivery_points(get(dp_ix)),
        ));
    }
    Ok(out)
}

pub(crate) fn parse_point(lat: &str, lon: &str) -> Result<GeoPoint, String> {
    let lat: f64 = lat.parse().map_err(|_| format!("non-numeric latitude `{lat}`"))?;
    let lon: f64 = lon.parse().map_err(|_| format!("non-numeric longitude `{lon}`"))?;
    GeoPoint::new(lat, lon).map_err(|e| e.to_string())
}

fn parse_delivery_points(s: &str) -> u32 {
    match s.parse::<f64>() {
        Ok(v) if v.is_finite() && v >= 1.0 => v.round().min(f64::from(u32::MAX)) as u32,
        _ => 1,
    }
}
