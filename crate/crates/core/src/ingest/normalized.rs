use super::columns::{ColumnAliases, CsvTable};
use super::nace::parse_point;
use super::{AddressPoint, Dropped, IngestError, Parsed};
use crate::geo::GeoPoint;
use crate::grid::GridDestination;
use std::io::Read;

fn parse_id_points<R: Read, T>(
    input: R,
    mut build: impl FnMut(&str, GeoPoint) -> Result<T, String>,
) -> Result<Parsed<T>, IngestError> {
    let mut table = CsvTable::open(input)?;
    let id_ix = ColumnAliases::new("id", &["id"]).require(&table.headers)?;
    let lat_ix = ColumnAliases::new("latitude", &["latitude", "lat"]).require(&table.headers)?;
    let lon_ix = ColumnAliases::new("longitude", &["longitude", "lon"]).require(&table.headers)?;
    let mut out = Parsed {
        records: Vec::new(),
        dropped: Vec::new(),
    };
    for row in table.rows() {
        let row = row?;
        let line = row.line;
        let result = row
            .fields
            .ok_or_else(|| "row is not valid UTF-8".to_string())
            .and_then(|f| {
                let get = |ix: usize| f.get(ix).map(String::as_str).unwrap_or("");
                build(get(id_ix), parse_point(get(lat_ix), get(lon_ix))?)
            });
        match result {
            Ok(r) => out.records.push(r),
            Err(reason) => out.dropped.push(Dropped { line, reason }),
        }
    }
    Ok(out)
}

/// Reads the normalized address CSV (`id,latitude,longitude`) written by
/// [`crate::export::write_addresses_csv`].
pub fn parse_address_csv<R: Read>(input: R) -> Result<Parsed<AddressPoint>, IngestError> {
    parse_id_points(input, |id, point| {
        Ok(AddressPoint {
            id: id.to_string(),
            point,
        })
    })
}

/// Reads grid destinations written by [`crate::export::write_grid_csv`].
/// Ids must be non-negative integers.
pub fn parse_grid_csv<R: Read>(input: R) -> Result<Parsed<GridDestination>, IngestError> {
    parse_id_points(input, |id, point| {
        let id = id
            .trim()
            .parse::<usize>()
            .map_err(|_| format!("grid id `{id}` is not a non-negative integer"))?;
        Ok(GridDestination { id, point })
    })
}
