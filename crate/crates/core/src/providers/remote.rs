use std::time::{Duration, Instant};

use parking_lot::{Condvar, Mutex};
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use super::{
    Embedder, EmbeddingVector, GenerationRequest, GenerationResponse, Generator, ProviderError,
};

/// Connection settings shared by the remote embedding and generation
/// clients.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct HttpSettings {
    pub endpoint_url: String,
    pub model_name: String,
    /// Name of the environment variable holding the bearer token.
    pub auth_token_env_var: Option<String>,
    pub timeout_ms: u64,
    pub max_retries: u32,
    pub initial_backoff_ms: u64,
    pub backoff_factor: u32,
    pub max_in_flight: usize,
}

impl Default for HttpSettings {
    fn default() -> Self {
        Self {
            endpoint_url: String::new(),
            model_name: String::new(),
            auth_token_env_var: None,
            timeout_ms: 30_000,
            max_retries: 2,
            initial_backoff_ms: 1_000,
            backoff_factor: 4,
            max_in_flight: 4,
        }
    }
}

impl HttpSettings {
    pub fn new(endpoint_url: impl Into<String>, model_name: impl Into<String>) -> Self {
        Self {
            endpoint_url: endpoint_url.into(),
            model_name: model_name.into(),
            ..Self::default()
        }
    }

    fn backoff(&self, attempt: u32) -> Duration {
        let factor = u64::from(self.backoff_factor.max(1)).saturating_pow(attempt);
        Duration::from_millis(self.initial_backoff_ms.saturating_mul(factor))
    }
}

/// Counting semaphore bounding in-flight requests.
#[derive(Debug)]
struct InFlight {
    cap: usize,
    used: Mutex<usize>,
    freed: Condvar,
}

struct Permit<'a>(&'a InFlight);

impl InFlight {
    fn new(cap: usize) -> Self {
        Self {
            cap: cap.max(1),
            used: Mutex::new(0),
            freed: Condvar::new(),
        }
    }

    fn acquire(&self) -> Permit<'_> {
        let mut used = self.used.lock();
        while *used >= self.cap {
            self.freed.wait(&mut used);
        }
        *used += 1;
        Permit(self)
    }
}

impl Drop for Permit<'_> {
    fn drop(&mut self) {
        *self.0.used.lock() -= 1;
        self.0.freed.notify_one();
    }
}

#[derive(Debug)]
struct HttpClient {
    settings: HttpSettings,
    in_flight: InFlight,
}

enum Attempt {
    Done(Value),
    Transient(String, Option<Duration>),
    Fatal(ProviderError),
}

impl HttpClient {
    fn new(settings: HttpSettings) -> Self {
        let in_flight = InFlight::new(settings.max_in_flight);
        Self {
            settings,
            in_flight,
        }
    }

    fn post(&self, body: &Value) -> Result<Value, ProviderError> {
        let _permit = self.in_flight.acquire();
        let start = Instant::now();
        // The blocking client owns a private runtime, so it is built per call
        // on the calling thread rather than stored.
        let client = reqwest::blocking::Client::builder()
            .timeout(Duration::from_millis(self.settings.timeout_ms))
            .build()
            .map_err(|e| ProviderError::InvalidConfig(e.to_string()))?;
        let token = self
            .settings
            .auth_token_env_var
            .as_deref()
            .and_then(|var| std::env::var(var).ok());

        let mut last = String::new();
        let mut retry_after = None;
        for attempt in 0..=self.settings.max_retries {
            if attempt > 0 {
                std::thread::sleep(self.settings.backoff(attempt - 1));
            }
            match self.attempt(&client, body, token.as_deref()) {
                Attempt::Done(v) => return Ok(v),
                Attempt::Fatal(e) => return Err(e),
                Attempt::Transient(msg, hint) => {
                    tracing::debug!(attempt, %msg, "remote provider call failed");
                    last = msg;
                    retry_after = hint;
                }
            }
        }
        Err(ProviderError::RemoteUnavailable {
            message: last,
            retry_after,
            elapsed: start.elapsed(),
        })
    }

    fn attempt(
        &self,
        client: &reqwest::blocking::Client,
        body: &Value,
        token: Option<&str>,
    ) -> Attempt {
        let mut req = client.post(&self.settings.endpoint_url).json(body);
        if let Some(t) = token {
            req = req.bearer_auth(t);
        }
        let resp = match req.send() {
            Ok(r) => r,
            Err(e) => return Attempt::Transient(e.to_string(), None),
        };
        let status = resp.status();
        let hint = resp
            .headers()
            .get(reqwest::header::RETRY_AFTER)
            .and_then(|v| v.to_str().ok())
            .and_then(|s| s.trim().parse::<u64>().ok())
            .map(Duration::from_secs);
        if status.is_server_error() || status.as_u16() == 429 {
            return Attempt::Transient(format!("HTTP {status}"), hint);
        }
        if status.is_client_error() {
            let body = resp.text().unwrap_or_default();
            return Attempt::Fatal(ProviderError::RemoteRejected {
                status: status.as_u16(),
                body,
            });
        }
        match resp.json::<Value>() {
            Ok(v) => Attempt::Done(v),
            Err(e) => Attempt::Transient(format!("unreadable response body: {e}"), None),
        }
    }
}

/// Embedding client for hosted `{"model", "input": [...]}` endpoints.
#[derive(Debug)]
pub struct RemoteEmbedder {
    id: String,
    dimension: usize,
    client: HttpClient,
}

impl RemoteEmbedder {
    pub fn new(settings: HttpSettings, dimension: usize) -> Self {
        Self {
            id: format!("remote:{}", settings.model_name),
            dimension,
            client: HttpClient::new(settings),
        }
    }

    fn decode(&self, body: &Value, expected: usize) -> Result<Vec<EmbeddingVector>, ProviderError> {
        let malformed = |what: &str| ProviderError::MalformedResponse(what.to_string());
        let data = body["data"].as_array().ok_or_else(|| malformed("missing `data` array"))?;
        let mut out: Vec<Option<EmbeddingVector>> = vec![None; expected];
        for (pos, item) in data.iter().enumerate() {
            let index = item["index"].as_u64().map_or(pos, |i| i as usize);
            let values = item["embedding"]
                .as_array()
                .ok_or_else(|| malformed("missing `embedding` array"))?
                .iter()
                .map(|v| v.as_f64().ok_or_else(|| malformed("non-numeric embedding value")))
                .collect::<Result<Vec<f64>, _>>()?;
            if values.len() != self.dimension {
                return Err(ProviderError::DimensionMismatch {
                    expected: self.dimension,
                    actual: values.len(),
                });
            }
            let slot = out.get_mut(index).ok_or_else(|| malformed("embedding index out of range"))?;
            *slot = Some(EmbeddingVector::normalized(values).ok_or_else(|| malformed("zero embedding"))?);
        }
        out.into_iter()
            .map(|v| v.ok_or_else(|| malformed("response is missing an input")))
            .collect()
    }
}

impl Embedder for RemoteEmbedder {
    fn id(&self) -> &str {
        &self.id
    }

    fn dimension(&self) -> usize {
        self.dimension
    }

    fn embed(&self, text: &str) -> Result<EmbeddingVector, ProviderError> {
        let mut v = self.embed_batch(&[text]).map_err(ProviderError::unwrap_batch)?;
        Ok(v.remove(0))
    }

    fn embed_batch(&self, texts: &[&str]) -> Result<Vec<EmbeddingVector>, ProviderError> {
        if texts.is_empty() {
            return Ok(Vec::new());
        }
        if let Some(index) = texts.iter().position(|t| t.trim().is_empty()) {
            return Err(ProviderError::AtIndex {
                index,
                source: Box::new(ProviderError::EmptyInput),
            });
        }
        let body = json!({ "model": self.client.settings.model_name, "input": texts });
        let resp = self.client.post(&body)?;
        self.decode(&resp, texts.len())
    }
}

/// Chat-completion client for hosted `{"model", "messages", "temperature"}`
/// endpoints.
#[derive(Debug)]
pub struct RemoteGenerator {
    id: String,
    client: HttpClient,
}

impl RemoteGenerator {
    pub fn new(settings: HttpSettings) -> Self {
        Self {
            id: format!("remote:{}", settings.model_name),
            client: HttpClient::new(settings),
        }
    }

    pub fn with_id(mut self, id: impl Into<String>) -> Self {
        self.id = id.into();
        self
    }
}

impl Generator for RemoteGenerator {
    fn id(&self) -> &str {
        &self.id
    }

    fn generate(&self, req: &GenerationRequest) -> Result<GenerationResponse, ProviderError> {
        if req.prompt.trim().is_empty() {
            return Err(ProviderError::EmptyInput);
        }
        let start = Instant::now();
        let body = json!({
            "model": self.client.settings.model_name,
            "messages": [{ "role": "user", "content": req.prompt }],
            "temperature": req.temperature,
        });
        let resp = self.client.post(&body)?;
        let text = resp["choices"][0]["message"]["content"]
            .as_str()
            .ok_or_else(|| {
                ProviderError::MalformedResponse("missing `choices[0].message.content`".into())
            })?;
        Ok(GenerationResponse::new(
            text,
            req.max_output_chars,
            self.id.clone(),
            start.elapsed(),
        ))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn backoff_schedule_is_one_then_four_seconds() {
        let s = HttpSettings::default();
        assert_eq!(s.backoff(0), Duration::from_secs(1));
        assert_eq!(s.backoff(1), Duration::from_secs(4));
        assert_eq!(s.timeout_ms, 30_000);
        assert_eq!(s.max_retries, 2);
        assert_eq!(s.max_in_flight, 4);
    }

    #[test]
    fn semaphore_bounds_concurrency() {
        use std::sync::atomic::{AtomicUsize, Ordering};
        use std::sync::Arc;
        let sem = Arc::new(InFlight::new(2));
        let live = Arc::new(AtomicUsize::new(0));
        let peak = Arc::new(AtomicUsize::new(0));
        let handles: Vec<_> = (0..8)
            .map(|_| {
                let (sem, live, peak) = (sem.clone(), live.clone(), peak.clone());
                std::thread::spawn(move || {
                    let _p = sem.acquire();
                    let now = live.fetch_add(1, Ordering::SeqCst) + 1;
                    peak.fetch_max(now, Ordering::SeqCst);
                    std::thread::sleep(Duration::from_millis(10));
                    live.fetch_sub(1, Ordering::SeqCst);
                })
            })
            .collect();
        handles.into_iter().for_each(|h| h.join().unwrap());
        assert!(peak.load(Ordering::SeqCst) <= 2);
    }

    #[test]
    fn decode_checks_dimension_and_order() {
        let e = RemoteEmbedder::new(HttpSettings::new("http://unused", "m"), 2);
        let body = json!({"data": [
            {"embedding": [0.0, 2.0], "index": 1},
            {"embedding": [3.0, 4.0], "index": 0}
        ]});
        let v = e.decode(&body, 2).unwrap();
        assert_eq!(v[0].as_slice(), &[0.6, 0.8]);
        assert_eq!(v[1].as_slice(), &[0.0, 1.0]);
        let bad = json!({"data": [{"embedding": [1.0, 2.0, 3.0], "index": 0}]});
        assert!(matches!(
            e.decode(&bad, 1),
            Err(ProviderError::DimensionMismatch { expected: 2, actual: 3 })
        ));
    }
}
