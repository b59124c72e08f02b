//! HTTP transport abstraction. Every network-facing client goes through
//! `Transport`, so tests can substitute a recording stub and offline runs can
//! be proven to perform zero network operations.

use std::collections::VecDeque;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;
use std::time::Duration;

use serde_json::Value;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum TransportError {
    #[error("HTTP {status} from {url}")]
    Status { status: u16, url: String },
    #[error("transport failure: {0}")]
    Failure(String),
    #[error("no scripted response available for {0}")]
    Exhausted(String),
}

pub trait Transport: Send + Sync {
    fn post_json(
        &self,
        url: &str,
        headers: &[(String, String)],
        body: &Value,
    ) -> Result<Value, TransportError>;

    fn get_json(&self, url: &str, headers: &[(String, String)]) -> Result<Value, TransportError>;
}

/// Real HTTP transport over a blocking client.
pub struct HttpTransport {
    client: reqwest::blocking::Client,
}

impl HttpTransport {
    pub fn new(timeout: Duration) -> Self {
        let client = reqwest::blocking::Client::builder()
            .timeout(timeout)
            .build()
            .expect("client construction cannot fail with static options");
        Self { client }
    }
}

impl Default for HttpTransport {
    fn default() -> Self {
        Self::new(Duration::from_secs(60))
    }
}

impl Transport for HttpTransport {
    fn post_json(
        &self,
        url: &str,
        headers: &[(String, String)],
        body: &Value,
    ) -> Result<Value, TransportError> {
        let mut req = self.client.post(url).json(body);
        for (k, v) in headers {
            req = req.header(k, v);
        }
        let resp = req.send().map_err(|e| TransportError::Failure(e.to_string()))?;
        let status = resp.status();
        if !status.is_success() {
            return Err(TransportError::Status { status: status.as_u16(), url: url.to_string() });
        }
        resp.json().map_err(|e| TransportError::Failure(e.to_string()))
    }

    fn get_json(&self, url: &str, headers: &[(String, String)]) -> Result<Value, TransportError> {
        let mut req = self.client.get(url);
        for (k, v) in headers {
            req = req.header(k, v);
        }
        let resp = req.send().map_err(|e| TransportError::Failure(e.to_string()))?;
        let status = resp.status();
        if !status.is_success() {
            return Err(TransportError::Status { status: status.as_u16(), url: url.to_string() });
        }
        resp.json().map_err(|e| TransportError::Failure(e.to_string()))
    }
}

/// Test transport: counts every call and replays queued responses. With an
/// empty queue each call fails, so wiring it into an offline engine proves the
/// run never touches the network (the counter stays at zero).
#[derive(Default)]
pub struct RecordingTransport {
    calls: AtomicUsize,
    requests: Mutex<Vec<String>>,
    bodies: Mutex<Vec<Value>>,
    responses: Mutex<VecDeque<Value>>,
}

impl RecordingTransport {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn with_responses(responses: Vec<Value>) -> Self {
        Self {
            calls: AtomicUsize::new(0),
            requests: Mutex::new(Vec::new()),
            bodies: Mutex::new(Vec::new()),
            responses: Mutex::new(responses.into()),
        }
    }

    pub fn push_response(&self, response: Value) {
        self.responses.lock().unwrap().push_back(response);
    }

    pub fn call_count(&self) -> usize {
        self.calls.load(Ordering::SeqCst)
    }

    pub fn requested_urls(&self) -> Vec<String> {
        self.requests.lock().unwrap().clone()
    }

    pub fn requested_bodies(&self) -> Vec<Value> {
        self.bodies.lock().unwrap().clone()
    }

    fn record(&self, url: &str, body: Option<&Value>) -> Result<Value, TransportError> {
        self.calls.fetch_add(1, Ordering::SeqCst);
        self.requests.lock().unwrap().push(url.to_string());
        if let Some(body) = body {
            self.bodies.lock().unwrap().push(body.clone());
        }
        self.responses
            .lock()
            .unwrap()
            .pop_front()
            .ok_or_else(|| TransportError::Exhausted(url.to_string()))
    }
}

impl Transport for RecordingTransport {
    fn post_json(
        &self,
        url: &str,
        _headers: &[(String, String)],
        body: &Value,
    ) -> Result<Value, TransportError> {
        self.record(url, Some(body))
    }

    fn get_json(&self, url: &str, _headers: &[(String, String)]) -> Result<Value, TransportError> {
        self.record(url, None)
    }
}
