use super::{strip_bom, AddressPoint, Dropped, IngestError, Parsed};
use crate::geo::GeoPoint;
use quick_xml::events::Event;
use quick_xml::Reader;
use std::io::Read;

#[derive(Default)]
struct PlacemarkState {
    id: Option<String>,
    name: Option<String>,
    coordinates: Option<String>,
    line: u64,
}

/// Extracts one [`AddressPoint`] per `Placemark` that carries a
/// `coordinates` element. Only the first `lon,lat[,alt]` tuple is used.
///
/// Placemarks whose coordinates are unparseable or out of range are dropped
/// and reported; placemarks with no coordinates at all are ignored.
pub fn parse_kml_addresses<R: Read>(mut input: R) -> Result<Parsed<AddressPoint>, IngestError> {
    let mut buf = Vec::new();
    input.read_to_end(&mut buf)?;
    let body = strip_bom(&buf);

    let mut reader = Reader::from_reader(body);
    reader.config_mut().check_end_names = true;

    let mut out = Parsed {
        records: Vec::new(),
        dropped: Vec::new(),
    };
    let mut stack: Vec<Vec<u8>> = Vec::new();
    let mut seen_root = false;
    let mut current: Option<PlacemarkState> = None;
    let mut placemark_index = 0usize;

    loop {
        let event = reader.read_event().map_err(|e| {
            let (line, column) = line_col(body, reader.error_position());
            IngestError::Xml {
                line,
                column,
                message: e.to_string(),
            }
        })?;
        let pos = reader.buffer_position();
        match event {
            Event::Start(e) => {
                if stack.is_empty() {
                    if seen_root {
                        return Err(xml_err(body, pos, "multiple root elements"));
                    }
                    seen_root = true;
                }
                let local = e.local_name().as_ref().to_vec();
                if local == b"Placemark" && current.is_none() {
                    let id = e
                        .try_get_attribute("id")
                        .ok()
                        .flatten()
                        .and_then(|a| a.unescape_value().ok().map(|v| v.into_owned()));
                    current = Some(PlacemarkState {
                        id,
                        line: line_col(body, pos).0,
                        ..Default::default()
                    });
                }
                stack.push(local);
            }
            Event::Empty(_) => {
                if stack.is_empty() {
                    if seen_root {
                        return Err(xml_err(body, pos, "multiple root elements"));
                    }
                    seen_root = true;
                }
            }
            Event::End(_) => {
                let local = stack.pop().unwrap_or_default();
                if local == b"Placemark" && !stack.iter().any(|s| s == b"Placemark") {
                    if let Some(pm) = current.take() {
                        placemark_index += 1;
                        finish_placemark(pm, placemark_index, &mut out);
                    }
                }
            }
            Event::Text(t) => {
                let text = t.decode().map_err(|e| xml_err(body, pos, &e.to_string()))?;
                if stack.is_empty() {
                    if !text.trim().is_empty() {
                        return Err(xml_err(body, pos, "text outside the root element"));
                    }
                    continue;
                }
                append_text(&stack, current.as_mut(), &text);
            }
            Event::CData(c) => {
                let text = c.decode().map_err(|e| xml_err(body, pos, &e.to_string()))?;
                append_text(&stack, current.as_mut(), &text);
            }
            Event::GeneralRef(r) => {
                let text = match r.resolve_char_ref() {
                    Ok(Some(ch)) => ch.to_string(),
                    _ => match r.as_ref() {
                        b"amp" => "&".into(),
                        b"lt" => "<".into(),
                        b"gt" => ">".into(),
                        b"quot" => "\"".into(),
                        b"apos" => "'".into(),
                        other => format!("&{};", String::from_utf8_lossy(other)),
                    },
                };
                append_text(&stack, current.as_mut(), &text);
            }
            Event::Eof => break,
            _ => {}
        }
    }

    if !stack.is_empty() {
        return Err(xml_err(body, body.len() as u64, "unexpected end of document"));
    }
    if !seen_root {
        return Err(xml_err(body, 0, "document has no root element"));
    }
    if out.records.is_empty() {
        log::warn!("KML input produced no valid placemarks");
    }
    Ok(out)
}

fn append_text(stack: &[Vec<u8>], current: Option<&mut PlacemarkState>, text: &str) {
    let Some(pm) = current else { return };
    let Some(top) = stack.last() else { return };
    // direct <name> child of the Placemark only
    if top == b"name" && stack.len() >= 2 && stack[stack.len() - 2] == b"Placemark" {
        pm.name.get_or_insert_with(String::new).push_str(text);
    } else if top == b"coordinates" {
        pm.coordinates.get_or_insert_with(String::new).push_str(text);
    }
}

fn finish_placemark(pm: PlacemarkState, index: usize, out: &mut Parsed<AddressPoint>) {
    let Some(coords) = pm.coordinates else { return };
    let id = pm
        .id
        .or_else(|| pm.name.map(|n| n.trim().to_string()).filter(|n| !n.is_empty()))
        .unwrap_or_else(|| format!("placemark-{index}"));
    match parse_first_tuple(&coords) {
        Ok(point) => out.records.push(AddressPoint { id, point }),
        Err(reason) => out.dropped.push(Dropped {
            line: pm.line,
            reason: format!("placemark `{id}`: {reason}"),
        }),
    }
}

/// `lon,lat[,alt]`; tuples are whitespace separated.
fn parse_first_tuple(coords: &str) -> Result<GeoPoint, String> {
    let tuple = coords
        .split_whitespace()
        .next()
        .ok_or_else(|| "empty coordinates".to_string())?;
    let mut parts = tuple.split(',');
    let lon = parse_num(parts.next())?;
    let lat = parse_num(parts.next())?;
    if let Some(alt) = parts.next() {
        parse_num(Some(alt))?;
    }
    if parts.next().is_some() {
        return Err(format!("too many components in `{tuple}`"));
    }
    GeoPoint::new(lat, lon).map_err(|e| e.to_string())
}

fn parse_num(s: Option<&str>) -> Result<f64, String> {
    let s = s.ok_or_else(|| "missing coordinate component".to_string())?;
    s.trim()
        .parse::<f64>()
        .map_err(|_| format!("non-numeric coordinate `{s}`"))
}

fn xml_err(body: &[u8], pos: u64, message: &str) -> IngestError {
    let (line, column) = line_col(body, pos);
    IngestError::Xml {
        line,
        column,
        message: message.to_string(),
    }
}

fn line_col(body: &[u8], pos: u64) -> (u64, u64) {
    let end = (pos as usize).min(body.len());
    let before = &body[..end];
    let line = before.iter().filter(|&&b| b == b'\n').count() as u64 + 1;
    let col_start = before.iter().rposition(|&b| b == b'\n').map_or(0, |i| i + 1);
    (line, (end - col_start) as u64 + 1)
}
