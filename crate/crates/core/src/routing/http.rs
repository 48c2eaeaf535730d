use super::{parse_directions_json, Route, RouteError, RouteRequest, RoutingBackend};
use sha2::{Digest, Sha256};
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::{Arc, Mutex};
use std::time::{Duration, Instant};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum TransportError {
    #[error("connection failed: {0}")]
    Connect(String),
    #[error("HTTP status {0}")]
    Status(u16),
}

/// Performs one HTTP GET and returns the body of a 2xx response.
pub trait Transport: Send + Sync {
    fn get(&self, url: &str) -> Result<Vec<u8>, TransportError>;
}

pub struct UreqTransport {
    agent: ureq::Agent,
}

impl UreqTransport {
    pub fn new(timeout: Duration) -> Self {
        let agent: ureq::Agent = ureq::Agent::config_builder()
            .timeout_global(Some(timeout))
            .http_status_as_error(false)
            .build()
            .into();
        Self { agent }
    }
}

impl Default for UreqTransport {
    fn default() -> Self {
        Self::new(Duration::from_secs(30))
    }
}

impl Transport for UreqTransport {
    fn get(&self, url: &str) -> Result<Vec<u8>, TransportError> {
        let mut resp = self
            .agent
            .get(url)
            .call()
            .map_err(|e| TransportError::Connect(e.to_string()))?;
        let status = resp.status().as_u16();
        if !(200..300).contains(&status) {
            return Err(TransportError::Status(status));
        }
        resp.body_mut()
            .read_to_vec()
            .map_err(|e| TransportError::Connect(e.to_string()))
    }
}

pub trait Clock: Send + Sync {
    /// Time elapsed since an arbitrary fixed start.
    fn now(&self) -> Duration;
    fn sleep(&self, d: Duration);
}

pub struct SystemClock {
    start: Instant,
}

impl Default for SystemClock {
    fn default() -> Self {
        Self { start: Instant::now() }
    }
}

impl Clock for SystemClock {
    fn now(&self) -> Duration {
        self.start.elapsed()
    }

    fn sleep(&self, d: Duration) {
        std::thread::sleep(d)
    }
}

/// Simulated clock: `sleep` advances time instantly.
#[derive(Default)]
pub struct ManualClock {
    now: Mutex<Duration>,
    slept: Mutex<Vec<Duration>>,
}

impl ManualClock {
    pub fn advance(&self, d: Duration) {
        *self.now.lock().unwrap() += d;
    }

    /// Every duration passed to `sleep`, in call order.
    pub fn sleeps(&self) -> Vec<Duration> {
        self.slept.lock().unwrap().clone()
    }
}

impl Clock for ManualClock {
    fn now(&self) -> Duration {
        *self.now.lock().unwrap()
    }

    fn sleep(&self, d: Duration) {
        self.slept.lock().unwrap().push(d);
        self.advance(d);
    }
}

/// Spaces request starts at least `1/q` seconds apart.
pub struct RateLimiter {
    interval: Duration,
    next_slot: Mutex<Option<Duration>>,
    clock: Arc<dyn Clock>,
}

impl RateLimiter {
    pub fn new(requests_per_second: f64, clock: Arc<dyn Clock>) -> Self {
        let interval = if requests_per_second.is_finite() && requests_per_second > 0.0 {
            Duration::from_secs_f64(1.0 / requests_per_second)
        } else {
            Duration::ZERO
        };
        Self {
            interval,
            next_slot: Mutex::new(None),
            clock,
        }
    }

    /// Blocks until the caller may start a request.
    pub fn acquire(&self) {
        let mut next = self.next_slot.lock().unwrap();
        let now = self.clock.now();
        let start = match *next {
            Some(slot) if slot > now => {
                self.clock.sleep(slot - now);
                slot
            }
            _ => now,
        };
        *next = Some(start + self.interval);
    }
}

/// Raw response bodies stored as `<dir>/<sha256(key)>.json`.
pub struct ResponseCache {
    dir: PathBuf,
    write_lock: Mutex<()>,
}

impl ResponseCache {
    pub fn new(dir: impl Into<PathBuf>) -> std::io::Result<Self> {
        let dir = dir.into();
        fs::create_dir_all(&dir)?;
        Ok(Self {
            dir,
            write_lock: Mutex::new(()),
        })
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    pub fn path_for(&self, key: &str) -> PathBuf {
        let digest = Sha256::digest(key.as_bytes());
        self.dir.join(format!("{}.json", hex::encode(digest)))
    }

    pub fn get(&self, key: &str) -> std::io::Result<Option<Vec<u8>>> {
        match fs::read(self.path_for(key)) {
            Ok(body) => Ok(Some(body)),
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => Ok(None),
            Err(e) => Err(e),
        }
    }

    pub fn put(&self, key: &str, body: &[u8]) -> std::io::Result<()> {
        let _guard = self.write_lock.lock().unwrap();
        let path = self.path_for(key);
        let tmp = path.with_extension("json.tmp");
        {
            let mut f = fs::File::create(&tmp)?;
            f.write_all(body)?;
            f.sync_all()?;
        }
        fs::rename(tmp, path)
    }
}

#[derive(Debug, Clone)]
pub struct HttpConfig {
    pub base_url: String,
    pub api_key: String,
    pub cache_dir: Option<PathBuf>,
    /// `None` disables rate limiting.
    pub requests_per_second: Option<f64>,
    /// Total attempts per request, including the first.
    pub max_attempts: u32,
    /// Delay before the second attempt; doubles for each further attempt.
    pub backoff: Duration,
}

impl HttpConfig {
    pub const DEFAULT_BASE_URL: &'static str = "https://maps.googleapis.com/maps/api/directions/json";

    pub fn new(base_url: impl Into<String>, api_key: impl Into<String>) -> Self {
        Self {
            base_url: base_url.into(),
            api_key: api_key.into(),
            cache_dir: None,
            requests_per_second: Some(10.0),
            max_attempts: 3,
            backoff: Duration::from_millis(500),
        }
    }
}

/// Directions-API backend with a response cache, a rate limiter, and retry
/// with exponential backoff on transport failures.
///
/// API status errors are deterministic and never retried. Bodies with status
/// `OK` or `ZERO_RESULTS` are cached; anything else is fetched again next time.
pub struct HttpBackend {
    config: HttpConfig,
    transport: Box<dyn Transport>,
    clock: Arc<dyn Clock>,
    limiter: Option<RateLimiter>,
    cache: Option<ResponseCache>,
    upstream_calls: AtomicUsize,
    cache_hits: AtomicUsize,
}

impl HttpBackend {
    pub fn new(config: HttpConfig) -> std::io::Result<Self> {
        Self::with_parts(
            config,
            Box::new(UreqTransport::default()),
            Arc::new(SystemClock::default()),
        )
    }

    pub fn with_parts(
        config: HttpConfig,
        transport: Box<dyn Transport>,
        clock: Arc<dyn Clock>,
    ) -> std::io::Result<Self> {
        let cache = config.cache_dir.as_ref().map(ResponseCache::new).transpose()?;
        let limiter = config.requests_per_second.map(|q| RateLimiter::new(q, clock.clone()));
        Ok(Self {
            config,
            transport,
            clock,
            limiter,
            cache,
            upstream_calls: AtomicUsize::new(0),
            cache_hits: AtomicUsize::new(0),
        })
    }

    /// Number of HTTP requests actually sent, retries included.
    pub fn upstream_calls(&self) -> usize {
        self.upstream_calls.load(Ordering::SeqCst)
    }

    pub fn cache_hits(&self) -> usize {
        self.cache_hits.load(Ordering::SeqCst)
    }

    pub fn request_url(&self, request: &RouteRequest) -> String {
        let origin = format!("{:.6},{:.6}", request.origin.lat(), request.origin.lon());
        let destination = format!("{:.6},{:.6}", request.destination.lat(), request.destination.lon());
        let params = [
            ("origin", origin.as_str()),
            ("destination", destination.as_str()),
            ("mode", RouteRequest::MODE),
            ("units", RouteRequest::UNITS),
            ("key", self.config.api_key.as_str()),
        ];
        match url::Url::parse_with_params(&self.config.base_url, params) {
            Ok(u) => u.to_string(),
            // not a parseable absolute URL; let the transport report it
            Err(_) => self.config.base_url.clone(),
        }
    }

    fn fetch(&self, url: &str, key: &str) -> Result<Vec<u8>, RouteError> {
        let attempts = self.config.max_attempts.max(1);
        let mut last = None;
        for attempt in 0..attempts {
            if attempt > 0 {
                self.clock.sleep(self.config.backoff * 2u32.saturating_pow(attempt - 1));
            }
            if let Some(limiter) = &self.limiter {
                limiter.acquire();
            }
            self.upstream_calls.fetch_add(1, Ordering::SeqCst);
            log::info!("fetch {key} (attempt {})", attempt + 1);
            match self.transport.get(url) {
                Ok(body) => return Ok(body),
                Err(e) => {
                    log::warn!("request for {key} failed: {e}");
                    last = Some(e);
                }
            }
        }
        Err(RouteError::Transport(format!(
            "{} after {attempts} attempts",
            last.expect("at least one attempt")
        )))
    }
}

impl RoutingBackend for HttpBackend {
    fn route(&self, request: &RouteRequest) -> Result<Route, RouteError> {
        let key = request.cache_key();
        if let Some(cache) = &self.cache {
            if let Some(body) = cache.get(&key)? {
                self.cache_hits.fetch_add(1, Ordering::SeqCst);
                return parse_directions_json(&body);
            }
        }
        let body = self.fetch(&self.request_url(request), &key)?;
        let parsed = parse_directions_json(&body);
        if let Some(cache) = &self.cache {
            if matches!(parsed, Ok(_) | Err(RouteError::NoRoute(_))) {
                cache.put(&key, &body)?;
            }
        }
        parsed
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geo::GeoPoint;

    struct Scripted {
        responses: Mutex<Vec<Result<Vec<u8>, TransportError>>>,
        urls: Mutex<Vec<String>>,
    }

    impl Scripted {
        fn new(mut responses: Vec<Result<Vec<u8>, TransportError>>) -> Self {
            responses.reverse();
            Self {
                responses: Mutex::new(responses),
                urls: Mutex::new(Vec::new()),
            }
        }
    }

    impl Transport for Arc<Scripted> {
        fn get(&self, url: &str) -> Result<Vec<u8>, TransportError> {
            self.urls.lock().unwrap().push(url.to_string());
            self.responses
                .lock()
                .unwrap()
                .pop()
                .unwrap_or(Err(TransportError::Connect("script exhausted".into())))
        }
    }

    const OK_BODY: &[u8] = br#"{"status":"OK","routes":[{"legs":[{"distance":{"value":2500},
        "start_location":{"lat":53.34,"lng":-6.26},
        "steps":[{"end_location":{"lat":53.35,"lng":-6.25}}]}]}]}"#;

    fn request() -> RouteRequest {
        RouteRequest::new(
            GeoPoint::new(53.34, -6.26).unwrap(),
            GeoPoint::new(53.35, -6.25).unwrap(),
        )
    }

    fn backend(script: Arc<Scripted>, clock: Arc<ManualClock>, cache: Option<PathBuf>) -> HttpBackend {
        let mut cfg = HttpConfig::new("http://127.0.0.1:9/directions/json", "SECRET");
        cfg.cache_dir = cache;
        cfg.requests_per_second = None;
        HttpBackend::with_parts(cfg, Box::new(script), clock).unwrap()
    }

    #[test]
    fn url_carries_fixed_parameters() {
        let b = backend(Arc::new(Scripted::new(vec![])), Arc::new(ManualClock::default()), None);
        let url = b.request_url(&request());
        assert!(url.starts_with("http://127.0.0.1:9/directions/json?"));
        for part in [
            "origin=53.340000%2C-6.260000",
            "destination=53.350000%2C-6.250000",
            "mode=walking",
            "units=metric",
            "key=SECRET",
        ] {
            assert!(url.contains(part), "{url} lacks {part}");
        }
    }

    #[test]
    fn retries_transport_errors_with_backoff() {
        let script = Arc::new(Scripted::new(vec![
            Err(TransportError::Connect("reset".into())),
            Err(TransportError::Status(503)),
            Ok(OK_BODY.to_vec()),
        ]));
        let clock = Arc::new(ManualClock::default());
        let b = backend(script.clone(), clock.clone(), None);
        let r = b.route(&request()).unwrap();
        assert_eq!(r.total_km, 2.5);
        assert_eq!(b.upstream_calls(), 3);
        assert_eq!(
            clock.sleeps(),
            vec![Duration::from_millis(500), Duration::from_millis(1000)]
        );
    }

    #[test]
    fn gives_up_after_three_attempts() {
        let script = Arc::new(Scripted::new(vec![
            Err(TransportError::Status(500)),
            Err(TransportError::Status(500)),
            Err(TransportError::Status(500)),
            Ok(OK_BODY.to_vec()),
        ]));
        let b = backend(script, Arc::new(ManualClock::default()), None);
        assert!(matches!(b.route(&request()), Err(RouteError::Transport(_))));
        assert_eq!(b.upstream_calls(), 3);
    }

    #[test]
    fn api_status_is_not_retried() {
        let script = Arc::new(Scripted::new(vec![
            Ok(br#"{"status":"OVER_QUERY_LIMIT","routes":[]}"#.to_vec()),
            Ok(OK_BODY.to_vec()),
        ]));
        let b = backend(script, Arc::new(ManualClock::default()), None);
        assert!(matches!(b.route(&request()), Err(RouteError::ApiStatus { .. })));
        assert_eq!(b.upstream_calls(), 1);
    }

    #[test]
    fn cache_serves_repeat_requests() {
        let dir = tempfile::tempdir().unwrap();
        let script = Arc::new(Scripted::new(vec![Ok(OK_BODY.to_vec())]));
        let b = backend(script, Arc::new(ManualClock::default()), Some(dir.path().to_path_buf()));
        let first = b.route(&request()).unwrap();
        let second = b.route(&request()).unwrap();
        assert_eq!(first, second);
        assert_eq!(b.upstream_calls(), 1);
        assert_eq!(b.cache_hits(), 1);
        let cached = fs::read(ResponseCache::new(dir.path()).unwrap().path_for(&request().cache_key())).unwrap();
        assert_eq!(cached, OK_BODY);
    }

    #[test]
    fn errors_other_than_zero_results_are_not_cached() {
        let dir = tempfile::tempdir().unwrap();
        let script = Arc::new(Scripted::new(vec![
            Ok(br#"{"status":"UNKNOWN_ERROR"}"#.to_vec()),
            Ok(br#"{"status":"ZERO_RESULTS","routes":[]}"#.to_vec()),
        ]));
        let b = backend(script, Arc::new(ManualClock::default()), Some(dir.path().to_path_buf()));
        assert!(matches!(b.route(&request()), Err(RouteError::ApiStatus { .. })));
        assert!(matches!(b.route(&request()), Err(RouteError::NoRoute(_))));
        assert!(matches!(b.route(&request()), Err(RouteError::NoRoute(_))));
        assert_eq!(b.upstream_calls(), 2);
    }

    #[test]
    fn rate_limiter_spaces_requests() {
        let clock = Arc::new(ManualClock::default());
        let limiter = RateLimiter::new(4.0, clock.clone());
        for _ in 0..9 {
            limiter.acquire();
        }
        assert!(clock.now() >= Duration::from_secs_f64(8.0 / 4.0) - Duration::from_nanos(10));
        assert!(clock.now() <= Duration::from_secs_f64(2.0) + Duration::from_millis(1));
    }

    #[test]
    fn rate_limiter_does_not_wait_when_idle() {
        let clock = Arc::new(ManualClock::default());
        let limiter = RateLimiter::new(1.0, clock.clone());
        limiter.acquire();
        clock.advance(Duration::from_secs(5));
        limiter.acquire();
        assert!(clock.sleeps().is_empty());
    }

    #[test]
    fn cache_key_rounds_to_six_decimals() {
        let a = RouteRequest::new(
            GeoPoint::new(53.3400001, -6.26).unwrap(),
            GeoPoint::new(53.35, -6.25).unwrap(),
        );
        assert_eq!(a.cache_key(), request().cache_key());
        assert_eq!(request().cache_key(), "53.340000,-6.260000|53.350000,-6.250000|walking");
    }
}
