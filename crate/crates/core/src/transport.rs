//! Blocking HTTP transport abstraction shared by the PubMed fetcher and the
//! generator client.
//!
//! Two implementations ship: [`HttpTransport`] talks to the network, and
//! [`FixtureTransport`] replays recorded request/response pairs from a
//! directory of JSON files so every test runs offline. Any
//! `Fn(&HttpRequest) -> Result<HttpResponse, TransportError>` closure is
//! also a transport, which keeps ad-hoc mocks one line long.

use std::fs;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;
use std::time::Duration;

use serde::{Deserialize, Serialize};
use serde_json::Value;
use thiserror::Error;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum Method {
    Get,
    Post,
}

#[derive(Debug, Clone, PartialEq)]
pub struct HttpRequest {
    pub method: Method,
    pub url: String,
    /// Header values may carry credentials and are never persisted.
    pub headers: Vec<(String, String)>,
    pub body: Option<String>,
    pub timeout: Option<Duration>,
}

impl HttpRequest {
    pub fn get(url: impl Into<String>) -> Self {
        HttpRequest {
            method: Method::Get,
            url: url.into(),
            headers: Vec::new(),
            body: None,
            timeout: None,
        }
    }

    pub fn post_json(url: impl Into<String>, body: String) -> Self {
        HttpRequest {
            method: Method::Post,
            url: url.into(),
            headers: vec![("Content-Type".into(), "application/json".into())],
            body: Some(body),
            timeout: None,
        }
    }

    pub fn header(mut self, name: impl Into<String>, value: impl Into<String>) -> Self {
        self.headers.push((name.into(), value.into()));
        self
    }

    pub fn with_timeout(mut self, timeout: Duration) -> Self {
        self.timeout = Some(timeout);
        self
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct HttpResponse {
    pub status: u16,
    pub body: String,
}

impl HttpResponse {
    pub fn ok(body: impl Into<String>) -> Self {
        HttpResponse {
            status: 200,
            body: body.into(),
        }
    }

    pub fn is_success(&self) -> bool {
        (200..300).contains(&self.status)
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum TransportError {
    #[error("request timed out")]
    Timeout,
    #[error("connection failed: {0}")]
    Connection(String),
    #[error("no recorded response for {method:?} {url}")]
    NoRecordedResponse { method: Method, url: String },
    #[error("fixture error: {0}")]
    Fixture(String),
}

pub trait Transport: Send + Sync {
    fn send(&self, request: &HttpRequest) -> Result<HttpResponse, TransportError>;
}

impl<F> Transport for F
where
    F: Fn(&HttpRequest) -> Result<HttpResponse, TransportError> + Send + Sync,
{
    fn send(&self, request: &HttpRequest) -> Result<HttpResponse, TransportError> {
        self(request)
    }
}

/// Live transport backed by `ureq`.
pub struct HttpTransport {
    agent: ureq::Agent,
}

impl HttpTransport {
    pub fn new() -> Self {
        let config = ureq::Agent::config_builder()
            .http_status_as_error(false)
            .build();
        HttpTransport {
            agent: config.into(),
        }
    }
}

impl Default for HttpTransport {
    fn default() -> Self {
        Self::new()
    }
}

fn map_ureq_error(err: ureq::Error) -> TransportError {
    match err {
        ureq::Error::Timeout(_) => TransportError::Timeout,
        other => TransportError::Connection(other.to_string()),
    }
}

impl Transport for HttpTransport {
    fn send(&self, request: &HttpRequest) -> Result<HttpResponse, TransportError> {
        let response = match request.method {
            Method::Get => {
                let mut req = self.agent.get(&request.url);
                for (k, v) in &request.headers {
                    req = req.header(k.as_str(), v.as_str());
                }
                if let Some(t) = request.timeout {
                    req = req.config().timeout_global(Some(t)).build();
                }
                req.call()
            }
            Method::Post => {
                let mut req = self.agent.post(&request.url);
                for (k, v) in &request.headers {
                    req = req.header(k.as_str(), v.as_str());
                }
                if let Some(t) = request.timeout {
                    req = req.config().timeout_global(Some(t)).build();
                }
                req.send(request.body.as_deref().unwrap_or(""))
            }
        };
        let mut response = response.map_err(map_ureq_error)?;
        let status = response.status().as_u16();
        let body = response
            .body_mut()
            .read_to_string()
            .map_err(map_ureq_error)?;
        Ok(HttpResponse { status, body })
    }
}

/// One recorded exchange. Request bodies that parse as JSON are stored and
/// compared as JSON values; headers are never recorded.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Cassette {
    pub request: RecordedRequest,
    pub response: RecordedResponse,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RecordedRequest {
    pub method: Method,
    pub url: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub body: Option<Value>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RecordedResponse {
    #[serde(default = "default_status")]
    pub status: u16,
    /// A JSON string is replayed verbatim; any other JSON value is
    /// re-serialized compactly.
    #[serde(default)]
    pub body: Value,
    /// `"timeout"` or `"connection"` replays a transport failure instead.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

fn default_status() -> u16 {
    200
}

fn body_value(body: Option<&str>) -> Option<Value> {
    body.map(|b| serde_json::from_str(b).unwrap_or_else(|_| Value::String(b.to_string())))
}

impl RecordedRequest {
    fn from_request(request: &HttpRequest) -> Self {
        RecordedRequest {
            method: request.method,
            url: request.url.clone(),
            body: body_value(request.body.as_deref()),
        }
    }

    fn matches(&self, request: &HttpRequest) -> bool {
        self.method == request.method
            && self.url == request.url
            && self.body == body_value(request.body.as_deref())
    }
}

impl RecordedResponse {
    fn replay(&self) -> Result<HttpResponse, TransportError> {
        match self.error.as_deref() {
            Some("timeout") => return Err(TransportError::Timeout),
            Some(other) => return Err(TransportError::Connection(other.to_string())),
            None => {}
        }
        let body = match &self.body {
            Value::String(s) => s.clone(),
            Value::Null => String::new(),
            v => v.to_string(),
        };
        Ok(HttpResponse {
            status: self.status,
            body,
        })
    }
}

/// Replays cassettes from a directory. Files are loaded in file-name order;
/// each request consumes the first unused cassette whose request matches,
/// so a repeated identical request walks through successive recordings.
pub struct FixtureTransport {
    cassettes: Vec<Cassette>,
    used: Mutex<Vec<bool>>,
}

impl FixtureTransport {
    pub fn from_dir(dir: impl AsRef<Path>) -> Result<Self, TransportError> {
        let dir = dir.as_ref();
        let mut paths: Vec<PathBuf> = fs::read_dir(dir)
            .map_err(|e| TransportError::Fixture(format!("{}: {e}", dir.display())))?
            .filter_map(|entry| entry.ok().map(|e| e.path()))
            .filter(|p| p.extension().is_some_and(|ext| ext == "json"))
            .collect();
        paths.sort();
        let mut cassettes = Vec::with_capacity(paths.len());
        for path in paths {
            let text = fs::read_to_string(&path)
                .map_err(|e| TransportError::Fixture(format!("{}: {e}", path.display())))?;
            let cassette: Cassette = serde_json::from_str(&text)
                .map_err(|e| TransportError::Fixture(format!("{}: {e}", path.display())))?;
            cassettes.push(cassette);
        }
        Ok(Self::from_cassettes(cassettes))
    }

    pub fn from_cassettes(cassettes: Vec<Cassette>) -> Self {
        let used = Mutex::new(vec![false; cassettes.len()]);
        FixtureTransport { cassettes, used }
    }

    pub fn remaining(&self) -> usize {
        self.used.lock().unwrap().iter().filter(|u| !**u).count()
    }
}

impl Transport for FixtureTransport {
    fn send(&self, request: &HttpRequest) -> Result<HttpResponse, TransportError> {
        let mut used = self.used.lock().unwrap();
        let hit = self
            .cassettes
            .iter()
            .enumerate()
            .find(|(i, c)| !used[*i] && c.request.matches(request));
        match hit {
            Some((i, cassette)) => {
                used[i] = true;
                cassette.response.replay()
            }
            None => Err(TransportError::NoRecordedResponse {
                method: request.method,
                url: request.url.clone(),
            }),
        }
    }
}

/// Forwards to an inner transport and writes every exchange as a cassette
/// (`0001.json`, `0002.json`, ...) that [`FixtureTransport`] can replay.
pub struct RecordingTransport<T> {
    inner: T,
    dir: PathBuf,
    counter: AtomicUsize,
}

impl<T: Transport> RecordingTransport<T> {
    pub fn new(inner: T, dir: impl Into<PathBuf>) -> std::io::Result<Self> {
        let dir = dir.into();
        fs::create_dir_all(&dir)?;
        Ok(RecordingTransport {
            inner,
            dir,
            counter: AtomicUsize::new(0),
        })
    }
}

impl<T: Transport> Transport for RecordingTransport<T> {
    fn send(&self, request: &HttpRequest) -> Result<HttpResponse, TransportError> {
        let result = self.inner.send(request);
        let response = match &result {
            Ok(r) => RecordedResponse {
                status: r.status,
                body: Value::String(r.body.clone()),
                error: None,
            },
            Err(TransportError::Timeout) => RecordedResponse {
                status: 0,
                body: Value::Null,
                error: Some("timeout".into()),
            },
            Err(e) => RecordedResponse {
                status: 0,
                body: Value::Null,
                error: Some(e.to_string()),
            },
        };
        let cassette = Cassette {
            request: RecordedRequest::from_request(request),
            response,
        };
        let n = self.counter.fetch_add(1, Ordering::SeqCst) + 1;
        let path = self.dir.join(format!("{n:04}.json"));
        let text = serde_json::to_string_pretty(&cassette)
            .map_err(|e| TransportError::Fixture(e.to_string()))?;
        fs::write(&path, text)
            .map_err(|e| TransportError::Fixture(format!("{}: {e}", path.display())))?;
        result
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use serde_json::json;

    fn cassette(url: &str, body: Option<Value>, response: Value) -> Cassette {
        Cassette {
            request: RecordedRequest {
                method: if body.is_some() { Method::Post } else { Method::Get },
                url: url.into(),
                body,
            },
            response: RecordedResponse {
                status: 200,
                body: response,
                error: None,
            },
        }
    }

    #[test]
    fn fixture_replays_repeated_requests_in_order() {
        let t = FixtureTransport::from_cassettes(vec![
            cassette("http://x/a", Some(json!({"k": 1})), json!("first")),
            cassette("http://x/a", Some(json!({"k": 1})), json!("second")),
        ]);
        let req = HttpRequest::post_json("http://x/a", r#"{ "k" : 1 }"#.into());
        assert_eq!(t.send(&req).unwrap().body, "first");
        assert_eq!(t.send(&req).unwrap().body, "second");
        assert!(matches!(
            t.send(&req),
            Err(TransportError::NoRecordedResponse { .. })
        ));
    }

    #[test]
    fn fixture_ignores_headers_and_reserializes_json_bodies() {
        let t = FixtureTransport::from_cassettes(vec![cassette(
            "http://x/q",
            None,
            json!([{"PMID": "1"}]),
        )]);
        let req = HttpRequest::get("http://x/q").header("Authorization", "Bearer secret");
        assert_eq!(t.send(&req).unwrap().body, r#"[{"PMID":"1"}]"#);
    }

    #[test]
    fn recorded_timeout_is_replayed_as_error() {
        let mut c = cassette("http://x/t", None, Value::Null);
        c.response.error = Some("timeout".into());
        let t = FixtureTransport::from_cassettes(vec![c]);
        assert_eq!(
            t.send(&HttpRequest::get("http://x/t")),
            Err(TransportError::Timeout)
        );
    }

    #[test]
    fn recording_round_trips_through_fixture_without_headers() {
        let dir = tempfile::tempdir().unwrap();
        let inner = |req: &HttpRequest| Ok(HttpResponse::ok(format!("echo {}", req.url)));
        let rec = RecordingTransport::new(inner, dir.path()).unwrap();
        let req = HttpRequest::get("http://x/r").header("Authorization", "Bearer sk-hidden");
        rec.send(&req).unwrap();
        let saved = fs::read_to_string(dir.path().join("0001.json")).unwrap();
        assert!(!saved.contains("sk-hidden"));
        let replay = FixtureTransport::from_dir(dir.path()).unwrap();
        assert_eq!(replay.send(&req).unwrap().body, "echo http://x/r");
    }
}
