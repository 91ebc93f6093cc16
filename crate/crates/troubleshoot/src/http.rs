//! JSON-over-HTTP clients for remote embedding and generation services.

use std::sync::{Condvar, Mutex};
use std::thread;
use std::time::Duration;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use troubleshoot_core::{BackendError, ChatMessage, Embedder, EmbeddingVector, GenerationRequest, Generator};
use ureq::Agent;

/// Counting semaphore bounding in-flight requests per client.
#[derive(Debug)]
struct Limiter {
    free: Mutex<usize>,
    cv: Condvar,
}

struct Permit<'a>(&'a Limiter);

impl Limiter {
    fn new(n: usize) -> Self {
        Limiter {
            free: Mutex::new(n.max(1)),
            cv: Condvar::new(),
        }
    }

    fn acquire(&self) -> Permit<'_> {
        let mut free = self.free.lock().expect("limiter lock");
        while *free == 0 {
            free = self.cv.wait(free).expect("limiter lock");
        }
        *free -= 1;
        Permit(self)
    }
}

impl Drop for Permit<'_> {
    fn drop(&mut self) {
        *self.0.free.lock().expect("limiter lock") += 1;
        self.0.cv.notify_one();
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ClientOptions {
    #[serde(default = "default_timeout_ms")]
    pub timeout_ms: u64,
    #[serde(default = "default_retries")]
    pub retries: u32,
    #[serde(default = "default_backoff_ms")]
    pub backoff_ms: u64,
    #[serde(default = "default_concurrency")]
    pub max_concurrency: usize,
}

fn default_timeout_ms() -> u64 {
    60_000
}
fn default_retries() -> u32 {
    2
}
fn default_backoff_ms() -> u64 {
    200
}
fn default_concurrency() -> usize {
    8
}

impl Default for ClientOptions {
    fn default() -> Self {
        ClientOptions {
            timeout_ms: default_timeout_ms(),
            retries: default_retries(),
            backoff_ms: default_backoff_ms(),
            max_concurrency: default_concurrency(),
        }
    }
}

#[derive(Debug)]
struct Client {
    base: String,
    agent: Agent,
    opts: ClientOptions,
    limiter: Limiter,
}

#[derive(Deserialize)]
struct ErrorBody {
    error: String,
}

impl Client {
    fn new(base_url: &str, opts: ClientOptions) -> Self {
        let agent: Agent = Agent::config_builder()
            .timeout_global(Some(Duration::from_millis(opts.timeout_ms)))
            .http_status_as_error(false)
            .build()
            .into();
        Client {
            base: base_url.trim_end_matches('/').to_string(),
            agent,
            limiter: Limiter::new(opts.max_concurrency),
            opts,
        }
    }

    fn once<B: Serialize, R: DeserializeOwned>(&self, path: &str, body: Option<&B>) -> Result<R, BackendError> {
        let url = format!("{}{}", self.base, path);
        let _permit = self.limiter.acquire();
        let sent = match body {
            Some(b) => self.agent.post(&url).send_json(b),
            None => self.agent.get(&url).call(),
        };
        let mut resp = sent.map_err(|e| BackendError::Transport(format!("{url}: {e}")))?;
        let status = resp.status().as_u16();
        let text = resp
            .body_mut()
            .read_to_string()
            .map_err(|e| BackendError::Transport(format!("{url}: {e}")))?;
        match status {
            200..=299 => serde_json::from_str(&text)
                .map_err(|e| BackendError::Contract(format!("{url}: malformed response: {e}"))),
            429 | 500..=599 => Err(BackendError::Transport(format!("{url}: HTTP {status}"))),
            _ => {
                let msg = serde_json::from_str::<ErrorBody>(&text)
                    .map(|b| b.error)
                    .unwrap_or(text);
                Err(BackendError::Refused(format!("HTTP {status}: {msg}")))
            }
        }
    }

    /// Retries transport failures with exponential backoff.
    fn call<B: Serialize, R: DeserializeOwned>(&self, path: &str, body: Option<&B>) -> Result<R, BackendError> {
        let mut attempt = 0;
        loop {
            match self.once(path, body) {
                Err(e) if e.is_retryable() && attempt < self.opts.retries => {
                    thread::sleep(Duration::from_millis(self.opts.backoff_ms << attempt));
                    attempt += 1;
                }
                other => return other,
            }
        }
    }
}

#[derive(Deserialize)]
struct InfoResponse {
    dimension: usize,
}

#[derive(Serialize)]
struct EmbedRequest<'a> {
    model: &'a str,
    texts: &'a [&'a str],
}

#[derive(Deserialize)]
struct EmbedResponse {
    embeddings: Vec<Vec<f32>>,
}

/// `POST /embed` client; the dimension comes from config or `GET /info`.
#[derive(Debug)]
pub struct HttpEmbedder {
    id: String,
    model: String,
    dimension: usize,
    client: Client,
}

impl HttpEmbedder {
    pub fn connect(
        base_url: &str,
        model: &str,
        dimension: Option<usize>,
        opts: ClientOptions,
    ) -> Result<Self, BackendError> {
        let client = Client::new(base_url, opts);
        let dimension = match dimension {
            Some(d) => d,
            None => client.call::<(), InfoResponse>("/info", None)?.dimension,
        };
        if dimension == 0 {
            return Err(BackendError::Contract("remote declared dimension 0".into()));
        }
        Ok(HttpEmbedder {
            id: format!("http:{}:{model}", client.base),
            model: model.to_string(),
            dimension,
            client,
        })
    }
}

impl Embedder for HttpEmbedder {
    fn id(&self) -> &str {
        &self.id
    }

    fn dimension(&self) -> usize {
        self.dimension
    }

    fn embed(&self, texts: &[&str]) -> Result<Vec<EmbeddingVector>, BackendError> {
        if texts.is_empty() {
            return Ok(Vec::new());
        }
        let resp: EmbedResponse = self.client.call(
            "/embed",
            Some(&EmbedRequest {
                model: &self.model,
                texts,
            }),
        )?;
        if resp.embeddings.len() != texts.len() {
            return Err(BackendError::Contract(format!(
                "sent {} texts, received {} embeddings",
                texts.len(),
                resp.embeddings.len()
            )));
        }
        resp.embeddings
            .into_iter()
            .map(|v| {
                if v.len() != self.dimension {
                    return Err(BackendError::Contract(format!(
                        "embedding has dimension {}, expected {}",
                        v.len(),
                        self.dimension
                    )));
                }
                EmbeddingVector::new(v)
            })
            .collect()
    }
}

#[derive(Serialize)]
struct GenerateBody<'a> {
    model: &'a str,
    adapter: Option<&'static str>,
    messages: &'a [ChatMessage],
    temperature: f64,
    top_p: f64,
    top_k: u32,
    max_tokens: u32,
    seed: Option<u64>,
}

#[derive(Deserialize)]
struct GenerateResponse {
    text: String,
}

/// `POST /generate` client.
#[derive(Debug)]
pub struct HttpGenerator {
    model: String,
    prefill: bool,
    client: Client,
}

impl HttpGenerator {
    pub fn new(base_url: &str, model: &str, prefill: bool, opts: ClientOptions) -> Self {
        HttpGenerator {
            model: model.to_string(),
            prefill,
            client: Client::new(base_url, opts),
        }
    }
}

impl Generator for HttpGenerator {
    fn generate(&self, request: &GenerationRequest) -> Result<String, BackendError> {
        request.validate()?;
        let p = &request.params;
        let body = GenerateBody {
            model: &self.model,
            adapter: request.adapter.map(|a| a.as_str()),
            messages: &request.messages,
            temperature: p.temperature,
            top_p: p.top_p,
            top_k: p.top_k,
            max_tokens: p.max_tokens,
            seed: p.seed,
        };
        let resp: GenerateResponse = self.client.call("/generate", Some(&body))?;
        Ok(resp.text)
    }

    fn supports_prefill(&self) -> bool {
        self.prefill
    }
}

/// Health of one configured backend.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BackendHealth {
    pub name: String,
    pub ok: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

/// Single GET without retries; any HTTP answer (even an error status) means reachable.
pub fn probe_url(url: &str, timeout: Duration) -> Result<(), String> {
    let agent: Agent = Agent::config_builder()
        .timeout_global(Some(timeout))
        .http_status_as_error(false)
        .build()
        .into();
    agent.get(url).call().map(|_| ()).map_err(|e| format!("{url}: {e}"))
}
