//! Fixed-point number formatting shared by every text output.

/// Coordinates: 6 decimal places.
pub fn coord(v: f64) -> String {
    fixed(v, 6)
}

/// Distances in km: 3 decimal places.
pub fn km(v: f64) -> String {
    fixed(v, 3)
}

pub fn fixed(v: f64, places: usize) -> String {
    let s = format!("{v:.places$}");
    // a tiny negative value would otherwise print as "-0.000"
    if s.starts_with('-') && s[1..].bytes().all(|b| b == b'0' || b == b'.') {
        s[1..].to_string()
    } else {
        s
    }
}
