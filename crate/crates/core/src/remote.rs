//! Blocking JSON client for the restoration/embedding service.
//!
//! Wire protocol (HTTP/1.1, JSON, images as base64 PNG):
//!
//! * `POST /v1/restore` `{request_id, image, factors: [b1, b2], prompt?}` ->
//!   `{request_id, image, model, latency_ms}`
//! * `POST /v1/embed` `{image}` -> `{embedding, dimension, provider}`
//! * `GET /healthz` -> 200 when ready
//!
//! Unknown response fields are ignored.

use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::{Arc, Condvar, Mutex};
use std::time::Duration;

use base64::engine::general_purpose::STANDARD as B64;
use base64::Engine;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::image::Image;

/// Overrides the configured restoration endpoint when set.
pub const ENDPOINT_ENV: &str = "LIGHTCOM_RESTORE_ENDPOINT";
pub const DEFAULT_MAX_IN_FLIGHT: usize = 4;
pub const DEFAULT_TIMEOUT_MS: u64 = 30_000;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ServiceConfig {
    /// Base URL, e.g. `http://127.0.0.1:8080`.
    pub endpoint: String,
    #[serde(default = "default_timeout")]
    pub timeout_ms: u64,
    #[serde(default = "default_in_flight")]
    pub max_in_flight: usize,
}

fn default_timeout() -> u64 {
    DEFAULT_TIMEOUT_MS
}

fn default_in_flight() -> usize {
    DEFAULT_MAX_IN_FLIGHT
}

impl ServiceConfig {
    pub fn new(endpoint: impl Into<String>) -> Self {
        Self {
            endpoint: endpoint.into(),
            timeout_ms: DEFAULT_TIMEOUT_MS,
            max_in_flight: DEFAULT_MAX_IN_FLIGHT,
        }
    }

    /// Replaces the endpoint with `$LIGHTCOM_RESTORE_ENDPOINT` if set.
    pub fn with_env_override(mut self) -> Self {
        if let Ok(e) = std::env::var(ENDPOINT_ENV) {
            if !e.trim().is_empty() {
                self.endpoint = e.trim().to_string();
            }
        }
        self
    }
}

#[derive(Debug, Clone, Serialize)]
struct RestoreRequest<'a> {
    request_id: String,
    image: String,
    factors: [usize; 2],
    #[serde(skip_serializing_if = "Option::is_none")]
    prompt: Option<&'a str>,
}

#[derive(Debug, Clone, Deserialize)]
struct RestoreResponse {
    #[serde(default)]
    request_id: Option<String>,
    image: String,
    #[serde(default)]
    model: String,
    #[serde(default)]
    latency_ms: f64,
}

#[derive(Debug, Clone, Serialize)]
struct EmbedRequest {
    image: String,
}

#[derive(Debug, Clone, Deserialize)]
struct EmbedResponse {
    embedding: Vec<f64>,
    dimension: usize,
    #[serde(default)]
    provider: String,
}

/// Restored image plus service metadata.
#[derive(Debug, Clone)]
pub struct Restored {
    pub image: Image,
    pub model: String,
    pub latency_ms: f64,
}

#[derive(Debug, Clone)]
pub struct Embedded {
    pub embedding: Vec<f64>,
    pub provider: String,
}

/// Counting semaphore bounding concurrent requests.
#[derive(Debug)]
struct Gate {
    free: Mutex<usize>,
    cv: Condvar,
}

struct Permit<'a>(&'a Gate);

impl Gate {
    fn acquire(&self) -> Permit<'_> {
        let mut free = self.free.lock().unwrap_or_else(|e| e.into_inner());
        while *free == 0 {
            free = self.cv.wait(free).unwrap_or_else(|e| e.into_inner());
        }
        *free -= 1;
        Permit(self)
    }
}

impl Drop for Permit<'_> {
    fn drop(&mut self) {
        *self.0.free.lock().unwrap_or_else(|e| e.into_inner()) += 1;
        self.0.cv.notify_one();
    }
}

/// Cheap to clone; clones share the in-flight limit.
#[derive(Debug, Clone)]
pub struct ServiceClient {
    config: ServiceConfig,
    agent: ureq::Agent,
    gate: Arc<Gate>,
    counter: Arc<AtomicU64>,
}

impl ServiceClient {
    pub fn new(config: ServiceConfig) -> Result<Self> {
        if config.max_in_flight == 0 {
            return Err(Error::config("max_in_flight", "must be at least 1"));
        }
        if !config.endpoint.starts_with("http://") && !config.endpoint.starts_with("https://") {
            return Err(Error::config(
                "endpoint",
                format!("not an http URL: {}", config.endpoint),
            ));
        }
        let agent_config = ureq::Agent::config_builder()
            .timeout_global(Some(Duration::from_millis(config.timeout_ms)))
            .http_status_as_error(false)
            .build();
        Ok(Self {
            agent: ureq::Agent::new_with_config(agent_config),
            gate: Arc::new(Gate {
                free: Mutex::new(config.max_in_flight),
                cv: Condvar::new(),
            }),
            counter: Arc::new(AtomicU64::new(0)),
            config,
        })
    }

    pub fn config(&self) -> &ServiceConfig {
        &self.config
    }

    fn url(&self, path: &str) -> String {
        format!("{}{}", self.config.endpoint.trim_end_matches('/'), path)
    }

    pub fn health(&self) -> Result<()> {
        let _permit = self.gate.acquire();
        let resp = self.agent.get(&self.url("/healthz")).call().map_err(transport_error)?;
        check_status(resp).map(|_| ())
    }

    /// Sends `image` for upscaling by `factors` and checks the returned size.
    pub fn restore(&self, image: &Image, factors: (usize, usize), prompt: Option<&str>) -> Result<Restored> {
        let request_id = format!("req-{}", self.counter.fetch_add(1, Ordering::Relaxed));
        let body = RestoreRequest {
            request_id: request_id.clone(),
            image: B64.encode(image.to_png_bytes()?),
            factors: [factors.0, factors.1],
            prompt,
        };
        let parsed: RestoreResponse = self.post("/v1/restore", &body)?;
        if let Some(id) = &parsed.request_id {
            if *id != request_id {
                return Err(Error::BadResponse(format!(
                    "request id {id} does not match {request_id}"
                )));
            }
        }
        let restored = decode_image(&parsed.image)?;
        let (w, h) = (image.width() * factors.0, image.height() * factors.1);
        if restored.width() != w || restored.height() != h {
            return Err(Error::BadResponse(format!(
                "expected {w}x{h}, service returned {}x{}",
                restored.width(),
                restored.height()
            )));
        }
        Ok(Restored {
            image: restored,
            model: parsed.model,
            latency_ms: parsed.latency_ms,
        })
    }

    pub fn embed(&self, image: &Image) -> Result<Embedded> {
        let body = EmbedRequest {
            image: B64.encode(image.to_png_bytes()?),
        };
        let parsed: EmbedResponse = self.post("/v1/embed", &body)?;
        if parsed.embedding.len() != parsed.dimension {
            return Err(Error::BadResponse(format!(
                "embedding has {} values, declared {}",
                parsed.embedding.len(),
                parsed.dimension
            )));
        }
        if parsed.embedding.iter().any(|v| !v.is_finite()) {
            return Err(Error::BadResponse("non-finite embedding value".into()));
        }
        Ok(Embedded {
            embedding: parsed.embedding,
            provider: parsed.provider,
        })
    }

    fn post<T: for<'de> Deserialize<'de>>(&self, path: &str, body: &impl Serialize) -> Result<T> {
        let _permit = self.gate.acquire();
        let resp = self
            .agent
            .post(&self.url(path))
            .send_json(body)
            .map_err(transport_error)?;
        let mut resp = check_status(resp)?;
        resp.body_mut().read_json::<T>().map_err(|e| match e {
            ureq::Error::Timeout(_) => Error::Timeout(e.to_string()),
            other => Error::BadResponse(other.to_string()),
        })
    }
}

fn check_status(mut resp: ureq::http::Response<ureq::Body>) -> Result<ureq::http::Response<ureq::Body>> {
    let status = resp.status().as_u16();
    if (200..300).contains(&status) {
        return Ok(resp);
    }
    let text = resp.body_mut().read_to_string().unwrap_or_default();
    let text: String = text.chars().take(200).collect();
    if status == 503 {
        Err(Error::ServiceUnavailable(format!("503: {text}")))
    } else {
        Err(Error::BadResponse(format!("status {status}: {text}")))
    }
}

fn transport_error(e: ureq::Error) -> Error {
    match e {
        ureq::Error::Timeout(_) => Error::Timeout(e.to_string()),
        ureq::Error::Io(ref io) if io.kind() == std::io::ErrorKind::TimedOut => Error::Timeout(e.to_string()),
        ureq::Error::Io(_)
        | ureq::Error::ConnectionFailed
        | ureq::Error::HostNotFound
        | ureq::Error::TlsRequired
        | ureq::Error::BadUri(_) => Error::ServiceUnavailable(e.to_string()),
        other => Error::BadResponse(other.to_string()),
    }
}

fn decode_image(payload: &str) -> Result<Image> {
    let bytes = B64
        .decode(payload.trim())
        .map_err(|e| Error::BadResponse(format!("image payload is not base64: {e}")))?;
    Image::from_encoded_bytes(&bytes).map_err(|e| Error::BadResponse(format!("image payload: {e}")))
}

#[cfg(test)]
pub(crate) mod mock {
    //! Minimal single-purpose HTTP/1.1 server for client tests.

    use std::io::{BufRead, BufReader, Read, Write};
    use std::net::{TcpListener, TcpStream};
    use std::sync::atomic::{AtomicUsize, Ordering};
    use std::sync::Arc;
    use std::thread;

    pub struct Request {
        pub method: String,
        pub path: String,
        pub body: String,
    }

    pub struct Reply {
        pub status: u16,
        pub body: String,
        pub delay_ms: u64,
    }

    impl Reply {
        pub fn json(body: impl Into<String>) -> Self {
            Self {
                status: 200,
                body: body.into(),
                delay_ms: 0,
            }
        }
    }

    /// Serves until the process exits; returns the base URL and a counter
    /// of peak concurrent connections.
    pub fn serve<F>(handler: F) -> (String, Arc<AtomicUsize>)
    where
        F: Fn(&Request) -> Reply + Send + Sync + 'static,
    {
        let listener = TcpListener::bind("127.0.0.1:0").unwrap();
        let url = format!("http://{}", listener.local_addr().unwrap());
        let handler = Arc::new(handler);
        let live = Arc::new(AtomicUsize::new(0));
        let peak = Arc::new(AtomicUsize::new(0));
        let peak_out = peak.clone();
        thread::spawn(move || {
            for stream in listener.incoming().flatten() {
                let (handler, live, peak) = (handler.clone(), live.clone(), peak.clone());
                thread::spawn(move || {
                    let now = live.fetch_add(1, Ordering::SeqCst) + 1;
                    peak.fetch_max(now, Ordering::SeqCst);
                    let _ = handle(stream, &*handler);
                    live.fetch_sub(1, Ordering::SeqCst);
                });
            }
        });
        (url, peak_out)
    }

    fn handle(stream: TcpStream, handler: &dyn Fn(&Request) -> Reply) -> std::io::Result<()> {
        let mut reader = BufReader::new(stream.try_clone()?);
        let mut line = String::new();
        reader.read_line(&mut line)?;
        let mut parts = line.split_whitespace();
        let method = parts.next().unwrap_or_default().to_string();
        let path = parts.next().unwrap_or_default().to_string();
        let mut len = 0usize;
        loop {
            let mut h = String::new();
            reader.read_line(&mut h)?;
            if h.trim().is_empty() {
                break;
            }
            if let Some((k, v)) = h.split_once(':') {
                if k.eq_ignore_ascii_case("content-length") {
                    len = v.trim().parse().unwrap_or(0);
                }
            }
        }
        let mut body = vec![0u8; len];
        reader.read_exact(&mut body)?;
        let req = Request {
            method,
            path,
            body: String::from_utf8_lossy(&body).into_owned(),
        };
        let reply = handler(&req);
        if reply.delay_ms > 0 {
            thread::sleep(std::time::Duration::from_millis(reply.delay_ms));
        }
        let mut out = stream;
        write!(
            out,
            "HTTP/1.1 {} X\r\nContent-Type: application/json\r\nContent-Length: {}\r\nConnection: close\r\n\r\n{}",
            reply.status,
            reply.body.len(),
            reply.body
        )?;
        out.flush()
    }
}
