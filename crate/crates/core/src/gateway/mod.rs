//! Uniform completion interface over the scripted model and an HTTP
//! chat-completions client.

mod http;
mod scripted;
mod view;

use std::sync::Mutex;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::elicitation::{PromptKind, PromptText};
use crate::trajectory::CostLedger;

pub use http::{HttpConfig, HttpGateway};
pub use scripted::{PlannerSpec, ResponseSpec, Rule, ScriptedModel, ScriptedModelSpec, PREVIOUS_ACTION};
pub use view::PromptView;

pub const GREEDY_TEMPERATURE: f64 = 0.0;
pub const SAMPLING_TEMPERATURE: f64 = 0.7;
pub const DEFAULT_MAX_OUTPUT: usize = 4096;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CompletionRequest {
    pub prompt: PromptText,
    pub temperature: f64,
    pub seed: u64,
    /// 1-based; sample `k` of a batch is keyed by `(seed, k)`.
    pub sample_index: u32,
    /// Character budget for the completion.
    pub max_output: usize,
}

impl CompletionRequest {
    pub fn new(prompt: PromptText, temperature: f64, seed: u64) -> Self {
        Self {
            prompt,
            temperature,
            seed,
            sample_index: 1,
            max_output: DEFAULT_MAX_OUTPUT,
        }
    }

    pub fn with_sample_index(&self, k: u32) -> Self {
        Self {
            sample_index: k,
            ..self.clone()
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum GatewayError {
    #[error("transport failure after {attempts} attempt(s): {message}")]
    Transport { attempts: u32, message: String },
    #[error("no scripted rule matched a {kind:?} prompt at step {step:?} (observation: {observation:?})")]
    NoRuleMatched {
        kind: PromptKind,
        step: Option<usize>,
        observation: String,
    },
    #[error("invalid request: {0}")]
    InvalidRequest(String),
    #[error("malformed response: {0}")]
    BadResponse(String),
    #[error("scripted model spec: {0}")]
    Spec(String),
    #[error("gateway configuration: {0}")]
    Config(String),
}

pub trait Gateway: Send + Sync {
    fn complete(&self, request: &CompletionRequest) -> Result<String, GatewayError>;

    /// Exactly `n` completions, element `k - 1` being the completion at
    /// sample index `k`. Samples may run concurrently; order is by index.
    fn sample_n(&self, request: &CompletionRequest, n: usize) -> Result<Vec<String>, GatewayError> {
        if n == 0 {
            return Err(GatewayError::InvalidRequest("sample_n needs n >= 1".into()));
        }
        (1..=n as u32)
            .into_par_iter()
            .map(|k| self.complete(&request.with_sample_index(k)))
            .collect()
    }

    /// Fail-fast reachability check run before any episode starts.
    fn preflight(&self) -> Result<(), GatewayError> {
        Ok(())
    }
}

impl<G: Gateway + ?Sized> Gateway for &G {
    fn complete(&self, request: &CompletionRequest) -> Result<String, GatewayError> {
        (**self).complete(request)
    }

    fn preflight(&self) -> Result<(), GatewayError> {
        (**self).preflight()
    }
}

impl<G: Gateway + ?Sized> Gateway for Box<G> {
    fn complete(&self, request: &CompletionRequest) -> Result<String, GatewayError> {
        (**self).complete(request)
    }

    fn preflight(&self) -> Result<(), GatewayError> {
        (**self).preflight()
    }
}

/// Per-episode wrapper that charges every logical call to a ledger.
pub struct Metered<'a> {
    inner: &'a dyn Gateway,
    ledger: Mutex<CostLedger>,
}

impl<'a> Metered<'a> {
    pub fn new(inner: &'a dyn Gateway) -> Self {
        Self {
            inner,
            ledger: Mutex::new(CostLedger::default()),
        }
    }

    pub fn ledger(&self) -> CostLedger {
        *self.ledger.lock().unwrap_or_else(|p| p.into_inner())
    }
}

impl Gateway for Metered<'_> {
    fn complete(&self, request: &CompletionRequest) -> Result<String, GatewayError> {
        let out = self.inner.complete(request);
        let mut l = self.ledger.lock().unwrap_or_else(|p| p.into_inner());
        l.model_calls += 1;
        l.prompt_characters += request.prompt.text.chars().count() as u64;
        if let Ok(text) = &out {
            l.completion_characters += text.chars().count() as u64;
        }
        out
    }

    fn preflight(&self) -> Result<(), GatewayError> {
        self.inner.preflight()
    }
}
