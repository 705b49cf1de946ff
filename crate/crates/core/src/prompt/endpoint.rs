//! Client for a generic text-completion endpoint.
//!
//! Wire format: POST `{model, prompt, max_tokens, temperature}`, reply
//! `{choices: [{text}]}`, bearer auth from `COMPLETION_API_KEY`, URL from
//! `COMPLETION_API_URL`.

use std::collections::BTreeMap;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;
use std::time::Duration;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const URL_VAR: &str = "COMPLETION_API_URL";
pub const KEY_VAR: &str = "COMPLETION_API_KEY";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CompletionRequest {
    pub model: String,
    pub prompt: String,
    pub max_tokens: usize,
    pub temperature: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Choice {
    pub text: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CompletionResponse {
    pub choices: Vec<Choice>,
}

impl CompletionResponse {
    pub fn first_text(&self) -> Result<&str> {
        self.choices
            .first()
            .map(|c| c.text.as_str())
            .ok_or_else(|| Error::Endpoint("response has no choices".into()))
    }
}

pub trait CompletionEndpoint: Sync {
    fn complete(&self, request: &CompletionRequest) -> Result<CompletionResponse>;
}

pub struct HttpEndpoint {
    url: String,
    api_key: Option<String>,
    client: reqwest::blocking::Client,
}

impl HttpEndpoint {
    pub fn new(url: impl Into<String>, api_key: Option<String>, timeout: Duration) -> Result<Self> {
        let client = reqwest::blocking::Client::builder()
            .timeout(timeout)
            .build()
            .map_err(|e| Error::Endpoint(e.to_string()))?;
        Ok(Self {
            url: url.into(),
            api_key,
            client,
        })
    }

    pub fn from_env(timeout: Duration) -> Result<Self> {
        let url =
            std::env::var(URL_VAR).map_err(|_| Error::Config(format!("{URL_VAR} is not set")))?;
        Self::new(url, std::env::var(KEY_VAR).ok(), timeout)
    }
}

impl CompletionEndpoint for HttpEndpoint {
    fn complete(&self, request: &CompletionRequest) -> Result<CompletionResponse> {
        let mut builder = self.client.post(&self.url).json(request);
        if let Some(key) = &self.api_key {
            builder = builder.bearer_auth(key);
        }
        let response = builder.send().map_err(|e| Error::Endpoint(e.to_string()))?;
        let status = response.status();
        if !status.is_success() {
            return Err(Error::Endpoint(format!("HTTP {status}")));
        }
        response
            .json::<CompletionResponse>()
            .map_err(|e| Error::Endpoint(format!("bad response body: {e}")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BatchOptions {
    pub max_in_flight: usize,
    /// Extra attempts after the first failure.
    pub retries: usize,
}

impl Default for BatchOptions {
    fn default() -> Self {
        Self {
            max_in_flight: 4,
            retries: 2,
        }
    }
}

fn with_retries(
    endpoint: &dyn CompletionEndpoint,
    request: &CompletionRequest,
    retries: usize,
) -> Result<String> {
    let mut last = None;
    for attempt in 0..=retries {
        match endpoint
            .complete(request)
            .and_then(|r| r.first_text().map(str::to_string))
        {
            Ok(text) => return Ok(text),
            Err(e) => {
                log::warn!("completion attempt {} failed: {e}", attempt + 1);
                last = Some(e);
            }
        }
    }
    Err(last.expect("at least one attempt"))
}

/// Sends every request, at most `max_in_flight` at a time, and returns the
/// first choice text of each reply keyed by request id.
pub fn run_batch(
    endpoint: &dyn CompletionEndpoint,
    requests: &[(String, CompletionRequest)],
    opts: BatchOptions,
) -> BTreeMap<String, Result<String>> {
    let next = AtomicUsize::new(0);
    let results = Mutex::new(BTreeMap::new());
    let workers = opts.max_in_flight.max(1).min(requests.len().max(1));
    std::thread::scope(|scope| {
        for _ in 0..workers {
            scope.spawn(|| loop {
                let i = next.fetch_add(1, Ordering::SeqCst);
                let Some((id, request)) = requests.get(i) else {
                    break;
                };
                let outcome = with_retries(endpoint, request, opts.retries);
                results
                    .lock()
                    .expect("results lock")
                    .insert(id.clone(), outcome);
            });
        }
    });
    results.into_inner().expect("results lock")
}
