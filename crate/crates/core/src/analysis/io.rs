use super::{CandidatePair, RoutedPair, UnroutedPair};
use crate::format::{coord, km};
use crate::geo::GeoPoint;
use crate::ingest::IngestError;
use crate::routing::Waypoint;
use std::io::{Read, Write};

const CANDIDATE_HEADER: [&str; 8] = [
    "origin_id",
    "origin_name",
    "origin_lat",
    "origin_lon",
    "dest_id",
    "dest_lat",
    "dest_lon",
    "euclidean_km",
];

fn writer<W: Write>(sink: W) -> csv::Writer<W> {
    csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(sink)
}

fn pair_fields(p: &CandidatePair) -> Vec<String> {
    vec![
        p.origin_id.to_string(),
        p.origin_name.clone(),
        coord(p.origin.lat()),
        coord(p.origin.lon()),
        p.dest_id.to_string(),
        coord(p.destination.lat()),
        coord(p.destination.lon()),
        km(p.euclidean_km),
    ]
}

pub fn write_candidates_csv<W: Write>(sink: W, pairs: &[CandidatePair]) -> std::io::Result<usize> {
    let mut w = writer(sink);
    w.write_record(CANDIDATE_HEADER)?;
    for p in pairs {
        w.write_record(pair_fields(p))?;
    }
    w.flush()?;
    Ok(pairs.len())
}

/// Candidate columns plus `footpath_km,discrepancy_km,steps`, where `steps`
/// encodes the waypoints as `label:lat:lon` joined by `;`.
pub fn write_routed_csv<W: Write>(sink: W, routed: &[RoutedPair]) -> std::io::Result<usize> {
    let mut w = writer(sink);
    let mut header: Vec<&str> = CANDIDATE_HEADER.to_vec();
    header.extend(["footpath_km", "discrepancy_km", "steps"]);
    w.write_record(&header)?;
    for r in routed {
        let mut row = pair_fields(&r.pair);
        row.push(km(r.footpath_km));
        row.push(km(r.discrepancy_km));
        row.push(encode_waypoints(&r.waypoints));
        w.write_record(row)?;
    }
    w.flush()?;
    Ok(routed.len())
}

pub fn write_unrouted_csv<W: Write>(sink: W, unrouted: &[UnroutedPair]) -> std::io::Result<usize> {
    let mut w = writer(sink);
    w.write_record(["origin_id", "origin_name", "dest_id", "reason"])?;
    for u in unrouted {
        w.write_record([
            u.pair.origin_id.to_string(),
            u.pair.origin_name.clone(),
            u.pair.dest_id.to_string(),
            u.reason.clone(),
        ])?;
    }
    w.flush()?;
    Ok(unrouted.len())
}

pub fn encode_waypoints(waypoints: &[Waypoint]) -> String {
    waypoints
        .iter()
        .map(|w| format!("{}:{}:{}", w.label, coord(w.point.lat()), coord(w.point.lon())))
        .collect::<Vec<_>>()
        .join(";")
}

pub fn decode_waypoints(s: &str) -> Result<Vec<Waypoint>, String> {
    if s.trim().is_empty() {
        return Ok(Vec::new());
    }
    s.split(';')
        .map(|part| {
            let mut it = part.split(':');
            let (Some(label), Some(lat), Some(lon), None) = (it.next(), it.next(), it.next(), it.next()) else {
                return Err(format!("bad waypoint `{part}`"));
            };
            let label = label
                .trim()
                .parse()
                .map_err(|_| format!("bad waypoint label `{label}`"))?;
            let lat: f64 = lat.trim().parse().map_err(|_| format!("bad latitude `{lat}`"))?;
            let lon: f64 = lon.trim().parse().map_err(|_| format!("bad longitude `{lon}`"))?;
            let point = GeoPoint::new(lat, lon).map_err(|e| e.to_string())?;
            Ok(Waypoint { label, point })
        })
        .collect()
}

/// Reads a file produced by [`write_routed_csv`].
pub fn read_routed_csv<R: Read>(input: R) -> Result<Vec<RoutedPair>, IngestError> {
    let mut reader = csv::ReaderBuilder::new().from_reader(input);
    let headers = reader
        .headers()
        .map_err(|e| IngestError::Schema(e.to_string()))?
        .clone();
    let col = |name: &str| {
        headers
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| IngestError::Schema(format!("missing required column `{name}`")))
    };
    let ix: Vec<usize> = CANDIDATE_HEADER
        .iter()
        .chain(["footpath_km", "discrepancy_km", "steps"].iter())
        .map(|n| col(n))
        .collect::<Result<_, _>>()?;

    let mut out = Vec::new();
    for rec in reader.records() {
        let rec = rec.map_err(|e| IngestError::Csv {
            line: e.position().map(|p| p.line()).unwrap_or(0),
            message: e.to_string(),
        })?;
        let line = rec.position().map(|p| p.line()).unwrap_or(0);
        let bad = |m: String| IngestError::Csv { line, message: m };
        let f = |i: usize| rec.get(ix[i]).unwrap_or("");
        let num = |i: usize| -> Result<f64, IngestError> {
            f(i).parse::<f64>().map_err(|_| bad(format!("bad number `{}`", f(i))))
        };
        let int = |i: usize| -> Result<usize, IngestError> {
            f(i).parse::<usize>().map_err(|_| bad(format!("bad id `{}`", f(i))))
        };
        let point = |a: usize, b: usize| -> Result<GeoPoint, IngestError> {
            GeoPoint::new(num(a)?, num(b)?).map_err(|e| bad(e.to_string()))
        };
        out.push(RoutedPair {
            pair: CandidatePair {
                origin_id: int(0)?,
                origin_name: f(1).to_string(),
                origin: point(2, 3)?,
                dest_id: int(4)?,
                destination: point(5, 6)?,
                euclidean_km: num(7)?,
            },
            footpath_km: num(8)?,
            discrepancy_km: num(9)?,
            waypoints: decode_waypoints(f(10)).map_err(bad)?,
        });
    }
    Ok(out)
}
