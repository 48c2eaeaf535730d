use super::columns::{ColumnAliases, CsvTable};
use super::nace::parse_point;
use super::{Dropped, DwellingType, HouseRecord, IngestError, Parsed};
use std::io::Read;

#[derive(Debug, Clone)]
pub struct DaftColumns {
    pub latitude: ColumnAliases,
    pub longitude: ColumnAliases,
    pub address: ColumnAliases,
    pub dwelling_type: ColumnAliases,
    pub price: ColumnAliases,
}

impl Default for DaftColumns {
    fn default() -> Self {
        Self {
            latitude: ColumnAliases::new("Latitude", &["Latitude", "Lat"]),
            longitude: ColumnAliases::new("Longitude", &["Longitude", "Lon", "Lng", "Long"]),
            address: ColumnAliases::new("Address", &["Address"]),
            dwelling_type: ColumnAliases::new("Type", &["Type", "Dwelling Type", "Description of Property", "Usage"]),
            price: ColumnAliases::new("Price", &["Price", "Price (€)", "Price EUR", "price_eur"]),
        }
    }
}

/// Parses house-price rows. Prices may carry a euro sign and thousands
/// separators; rows with an unknown dwelling type or a bad price are dropped.
pub fn parse_daft_csv<R: Read>(input: R, columns: &DaftColumns) -> Result<Parsed<HouseRecord>, IngestError> {
    let mut table = CsvTable::open(input)?;
    let lat_ix = columns.latitude.require(&table.headers)?;
    let lon_ix = columns.longitude.require(&table.headers)?;
    let addr_ix = columns.address.require(&table.headers)?;
    let type_ix = columns.dwelling_type.require(&table.headers)?;
    let price_ix = columns.price.require(&table.headers)?;

    let mut out = Parsed {
        records: Vec::new(),
        dropped: Vec::new(),
    };
    for row in table.rows() {
        let row = row?;
        let line = row.line;
        let Some(fields) = row.fields else {
            out.dropped.push(Dropped {
                line,
                reason: "row is not valid UTF-8".into(),
            });
            continue;
        };
        let get = |ix: usize| fields.get(ix).map(String::as_str).unwrap_or("");
        let parsed = parse_point(get(lat_ix), get(lon_ix)).and_then(|point| {
            let dwelling_type =
                DwellingType::parse(get(type_ix)).ok_or_else(|| format!("unknown dwelling type `{}`", get(type_ix)))?;
            let price_eur = parse_price(get(price_ix)).ok_or_else(|| format!("invalid price `{}`", get(price_ix)))?;
            Ok(HouseRecord {
                point,
                address: get(addr_ix).to_string(),
                dwelling_type,
                price_eur,
            })
        });
        match parsed {
            Ok(r) => out.records.push(r),
            Err(reason) => out.dropped.push(Dropped { line, reason }),
        }
    }
    Ok(out)
}

/// `"€350,000.00"` → `350000.0`. Returns `None` unless the result is a
/// positive finite number.
pub fn parse_price(s: &str) -> Option<f64> {
    let mut t = s.trim();
    for prefix in ["EUR", "eur"] {
        t = t.strip_prefix(prefix).unwrap_or(t);
    }
    let cleaned: String = t
        .chars()
        .filter(|c| !matches!(c, '€' | ',' | '\u{a0}' | '\u{202f}') && !c.is_whitespace())
        .collect();
    match cleaned.parse::<f64>() {
        Ok(v) if v.is_finite() && v > 0.0 => Some(v),
        _ => None,
    }
}
