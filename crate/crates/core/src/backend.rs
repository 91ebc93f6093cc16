//! Embedding and generation backend interfaces.

use alloc::string::String;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

/// Dimension of the default rankers.
pub const DEFAULT_DIMENSION: usize = 768;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct EmbeddingVector(Vec<f32>);

impl EmbeddingVector {
    pub fn new(values: Vec<f32>) -> Result<Self, BackendError> {
        if values.iter().any(|v| !v.is_finite()) {
            return Err(BackendError::Contract("embedding contains non-finite values".into()));
        }
        Ok(EmbeddingVector(values))
    }

    pub fn zeros(dimension: usize) -> Self {
        EmbeddingVector(alloc::vec![0.0; dimension])
    }

    pub fn values(&self) -> &[f32] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn norm(&self) -> f64 {
        libm::sqrt(self.0.iter().map(|v| f64::from(*v) * f64::from(*v)).sum())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum BackendError {
    /// Network-level failure; the call may be retried.
    #[error("transport error: {0}")]
    Transport(String),
    /// The remote broke the wire contract (wrong dimension, malformed body).
    #[error("contract violation: {0}")]
    Contract(String),
    /// The remote answered with an explicit refusal.
    #[error("remote refused request: {0}")]
    Refused(String),
    #[error("precondition failed: {0}")]
    Precondition(String),
}

impl BackendError {
    pub fn is_retryable(&self) -> bool {
        matches!(self, BackendError::Transport(_))
    }
}

pub trait Embedder: Send + Sync {
    /// Stable identifier, used as the cache namespace.
    fn id(&self) -> &str;

    fn dimension(&self) -> usize;

    /// One vector per input text, same order.
    fn embed(&self, texts: &[&str]) -> Result<Vec<EmbeddingVector>, BackendError>;

    fn embed_one(&self, text: &str) -> Result<EmbeddingVector, BackendError> {
        let mut v = self.embed(&[text])?;
        match v.pop() {
            Some(e) if v.is_empty() => Ok(e),
            _ => Err(BackendError::Contract("expected exactly one embedding".into())),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Role {
    System,
    User,
    Assistant,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChatMessage {
    pub role: Role,
    pub content: String,
}

impl ChatMessage {
    pub fn system(content: impl Into<String>) -> Self {
        ChatMessage {
            role: Role::System,
            content: content.into(),
        }
    }

    pub fn user(content: impl Into<String>) -> Self {
        ChatMessage {
            role: Role::User,
            content: content.into(),
        }
    }

    pub fn assistant(content: impl Into<String>) -> Self {
        ChatMessage {
            role: Role::Assistant,
            content: content.into(),
        }
    }
}

/// Task head selected on the generation service.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Adapter {
    Routing,
    FaultAnalysis,
}

impl Adapter {
    pub fn as_str(self) -> &'static str {
        match self {
            Adapter::Routing => "routing",
            Adapter::FaultAnalysis => "fault_analysis",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GenerationParams {
    pub temperature: f64,
    pub top_p: f64,
    pub top_k: u32,
    pub max_tokens: u32,
    pub seed: Option<u64>,
}

impl Default for GenerationParams {
    fn default() -> Self {
        GenerationParams {
            temperature: 0.0,
            top_p: 0.95,
            top_k: 50,
            max_tokens: 1024,
            seed: None,
        }
    }
}

impl GenerationParams {
    pub fn with_temperature(mut self, temperature: f64) -> Self {
        self.temperature = temperature;
        self
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = Some(seed);
        self
    }

    pub fn validate(&self) -> Result<(), BackendError> {
        if !(self.temperature >= 0.0 && self.temperature.is_finite()) {
            return Err(BackendError::Precondition("temperature must be >= 0".into()));
        }
        if !(self.top_p > 0.0 && self.top_p <= 1.0) {
            return Err(BackendError::Precondition("top_p must be in (0, 1]".into()));
        }
        if self.top_k == 0 {
            return Err(BackendError::Precondition("top_k must be >= 1".into()));
        }
        if self.max_tokens == 0 {
            return Err(BackendError::Precondition("max_tokens must be >= 1".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GenerationRequest {
    /// `None` runs the base model.
    pub adapter: Option<Adapter>,
    pub messages: Vec<ChatMessage>,
    pub params: GenerationParams,
}

impl GenerationRequest {
    pub fn new(
        adapter: Option<Adapter>,
        messages: Vec<ChatMessage>,
        params: GenerationParams,
    ) -> Result<Self, BackendError> {
        let req = GenerationRequest {
            adapter,
            messages,
            params,
        };
        req.validate()?;
        Ok(req)
    }

    pub fn validate(&self) -> Result<(), BackendError> {
        match self.messages.first() {
            None => return Err(BackendError::Precondition("messages are empty".into())),
            Some(m) if m.role != Role::System => {
                return Err(BackendError::Precondition("first message must be the system prompt".into()))
            }
            _ => {}
        }
        self.params.validate()
    }

    /// Content of the last user message, if any.
    pub fn last_user(&self) -> Option<&str> {
        self.messages
            .iter()
            .rev()
            .find(|m| m.role == Role::User)
            .map(|m| m.content.as_str())
    }
}

pub trait Generator: Send + Sync {
    /// Returns the assistant text. When the final message is an assistant
    /// turn, the backend continues it and returns only the continuation.
    fn generate(&self, request: &GenerationRequest) -> Result<String, BackendError>;

    /// Whether the backend can continue a partial assistant message.
    fn supports_prefill(&self) -> bool {
        true
    }
}

impl<T: Embedder + ?Sized> Embedder for alloc::sync::Arc<T> {
    fn id(&self) -> &str {
        (**self).id()
    }
    fn dimension(&self) -> usize {
        (**self).dimension()
    }
    fn embed(&self, texts: &[&str]) -> Result<Vec<EmbeddingVector>, BackendError> {
        (**self).embed(texts)
    }
}

impl<T: Generator + ?Sized> Generator for alloc::sync::Arc<T> {
    fn generate(&self, request: &GenerationRequest) -> Result<String, BackendError> {
        (**self).generate(request)
    }
    fn supports_prefill(&self) -> bool {
        (**self).supports_prefill()
    }
}
