//! Independent oracles and fixtures shared by the acceptance suite.

use std::io::{BufRead, BufReader, Write};
use std::net::TcpListener;
use std::path::PathBuf;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Arc;

pub fn fixture(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("fixtures/demo")
        .join(name)
}

/// Great-circle distance from the chord between unit vectors, a formulation
/// independent of the haversine terms.
pub fn chord_distance_km(lat1: f64, lon1: f64, lat2: f64, lon2: f64, radius: f64) -> f64 {
    let v = |lat: f64, lon: f64| {
        let (p, l) = (lat.to_radians(), lon.to_radians());
        [p.cos() * l.cos(), p.cos() * l.sin(), p.sin()]
    };
    let (a, b) = (v(lat1, lon1), v(lat2, lon2));
    let cross = [
        a[1] * b[2] - a[2] * b[1],
        a[2] * b[0] - a[0] * b[2],
        a[0] * b[1] - a[1] * b[0],
    ];
    let sin = (cross[0].powi(2) + cross[1].powi(2) + cross[2].powi(2)).sqrt();
    let cos = a[0] * b[0] + a[1] * b[1] + a[2] * b[2];
    radius * sin.atan2(cos)
}

/// Single-source shortest distances by edge relaxation; `f64::INFINITY`
/// marks unreachable nodes.
pub fn bellman_ford(n: usize, edges: &[(usize, usize, f64)], source: usize) -> Vec<f64> {
    let mut dist = vec![f64::INFINITY; n];
    dist[source] = 0.0;
    for _ in 1..n.max(2) {
        let mut changed = false;
        for &(a, b, w) in edges {
            if dist[a] + w < dist[b] {
                dist[b] = dist[a] + w;
                changed = true;
            }
            if dist[b] + w < dist[a] {
                dist[a] = dist[b] + w;
                changed = true;
            }
        }
        if !changed {
            break;
        }
    }
    dist
}

/// Solves the weighted normal equations XᵀWXβ = XᵀWy by Gauss-Jordan
/// elimination with partial pivoting.
pub fn normal_equations(rows: &[Vec<f64>], y: &[f64], w: &[f64]) -> Vec<f64> {
    let p = rows[0].len();
    let mut a = vec![vec![0.0; p + 1]; p];
    for ((row, &yi), &wi) in rows.iter().zip(y).zip(w) {
        for i in 0..p {
            for j in 0..p {
                a[i][j] += wi * row[i] * row[j];
            }
            a[i][p] += wi * row[i] * yi;
        }
    }
    for col in 0..p {
        let pivot = (col..p)
            .max_by(|&r, &s| a[r][col].abs().total_cmp(&a[s][col].abs()))
            .unwrap();
        a.swap(col, pivot);
        let d = a[col][col];
        for v in &mut a[col] {
            *v /= d;
        }
        for r in 0..p {
            if r != col {
                let f = a[r][col];
                let src = a[col].clone();
                for (v, s) in a[r].iter_mut().zip(src) {
                    *v -= f * s;
                }
            }
        }
    }
    a.into_iter().map(|r| r[p]).collect()
}

/// One-sample Kolmogorov-Smirnov test against Uniform(0, 1); returns the
/// statistic and its asymptotic p value (Stephens' small-sample correction).
pub fn ks_uniform(samples: &[f64]) -> (f64, f64) {
    let mut s = samples.to_vec();
    s.sort_by(f64::total_cmp);
    let n = s.len() as f64;
    let d = s
        .iter()
        .enumerate()
        .map(|(i, &x)| ((i as f64 + 1.0) / n - x).max(x - i as f64 / n))
        .fold(0.0, f64::max);
    let lambda = (n.sqrt() + 0.12 + 0.11 / n.sqrt()) * d;
    let mut p = 0.0;
    for k in 1..=100 {
        let k = k as f64;
        p += 2.0 * (-1f64).powf(k - 1.0) * (-2.0 * k * k * lambda * lambda).exp();
    }
    (d, p.clamp(0.0, 1.0))
}

pub enum Reply {
    Body(String),
    Status(u16),
    /// Close the connection without answering.
    Hangup,
}

/// Local HTTP server that answers each GET through `handler(call_index,
/// request_target)`. Returns the base URL and the request counter.
pub fn stub_server<F>(handler: F) -> (String, Arc<AtomicUsize>)
where
    F: Fn(usize, &str) -> Reply + Send + 'static,
{
    let listener = TcpListener::bind("127.0.0.1:0").unwrap();
    let url = format!("http://{}/maps/api/directions/json", listener.local_addr().unwrap());
    let hits = Arc::new(AtomicUsize::new(0));
    let counter = hits.clone();
    std::thread::spawn(move || {
        for stream in listener.incoming() {
            let Ok(mut stream) = stream else { continue };
            let mut reader = BufReader::new(stream.try_clone().unwrap());
            let mut request_line = String::new();
            if reader.read_line(&mut request_line).is_err() {
                continue;
            }
            loop {
                let mut line = String::new();
                if reader.read_line(&mut line).unwrap_or(0) == 0 || line == "\r\n" {
                    break;
                }
            }
            let call = counter.fetch_add(1, Ordering::SeqCst);
            let target = request_line.split_whitespace().nth(1).unwrap_or("").to_string();
            let _ = match handler(call, &target) {
                Reply::Body(body) => write!(
                    stream,
                    "HTTP/1.1 200 OK\r\nContent-Type: application/json\r\nContent-Length: {}\r\nConnection: close\r\n\r\n{}",
                    body.len(),
                    body
                ),
                Reply::Status(code) => write!(
                    stream,
                    "HTTP/1.1 {code} Error\r\nContent-Length: 0\r\nConnection: close\r\n\r\n"
                ),
                Reply::Hangup => Ok(()),
            };
        }
    });
    (url, hits)
}

pub fn directions_body(status: &str, metres: f64) -> String {
    if status != "OK" {
        return serde_json::json!({"status": status, "routes": []}).to_string();
    }
    serde_json::json!({
        "status": "OK",
        "routes": [{"legs": [{
            "distance": {"value": metres},
            "start_location": {"lat": 53.34, "lng": -6.26},
            "steps": [
                {"end_location": {"lat": 53.345, "lng": -6.26}},
                {"end_location": {"lat": 53.35, "lng": -6.25}}
            ]
        }]}]
    })
    .to_string()
}
