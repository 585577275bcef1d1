//! Multi-turn chat interface over model backends.
//!
//! Every backend implements [`ChatBackend`]. Concrete strategies:
//!
//! * [`HttpBackend`] speaks the chat-completions JSON protocol to an inference server.
//! * [`ReplayBackend`] answers from a [`FixtureStore`] keyed by a content hash of the exchange.
//! * [`ScriptedBackend`] answers from hand-authored matching rules; used to author fixtures.
//! * [`RecordingBackend`] wraps another backend and writes every reply into a fixture store.
//!
//! [`BackendRegistry`] maps strategy names to factories so callers pick a
//! backend from configuration.

mod http;
mod registry;
mod replay;
mod script;

pub use http::{HttpBackend, CONSTRAINT_FIELD};
pub use registry::{BackendConfig, BackendFactory, BackendRegistry};
pub use replay::{record_fixture, FixtureEntry, FixtureKey, FixtureStore, RecordingBackend, ReplayBackend};
pub use script::{ScriptBook, ScriptRule, ScriptedBackend};

use std::fmt;
use std::io::Cursor;
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::constraints::GenerationConstraint;

/// Shared handle to any backend.
pub type ModelBackend = Arc<dyn ChatBackend>;

#[derive(Debug, Error)]
pub enum ClientError {
    #[error("transport error: {0}")]
    Transport(String),
    #[error("reply violates the generation constraint: {reply:?}")]
    ConstraintViolation { reply: String },
    #[error("no fixture recorded for key {key}")]
    FixtureMiss { key: String },
    #[error("fixture {key} already exists with different replies")]
    DuplicateKey { key: String },
    #[error("no script rule matches the exchange (last user turn: {0:?})")]
    ScriptMiss(String),
    #[error("invalid exchange: {0}")]
    InvalidExchange(String),
    #[error("expected {expected} samples, backend produced {got}")]
    SampleCount { expected: u32, got: usize },
    #[error("image could not be decoded: {0}")]
    Image(String),
    #[error("fixture store I/O: {0}")]
    Io(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Role {
    System,
    User,
    Assistant,
}

impl Role {
    pub fn as_str(self) -> &'static str {
        match self {
            Role::System => "system",
            Role::User => "user",
            Role::Assistant => "assistant",
        }
    }
}

/// An image attached to a user turn, already resized to the model input size.
#[derive(Clone)]
pub struct ImageAttachment {
    label: Option<String>,
    pixels: Arc<image::RgbaImage>,
    content_hash: String,
}

impl ImageAttachment {
    /// Side length every attachment is resized to.
    pub const SIZE: u32 = 448;

    /// Decodes and resizes `bytes`. `label` is a human-readable tag (usually
    /// the file name); it is never part of a fixture key.
    pub fn from_encoded(bytes: &[u8], label: Option<String>) -> Result<Self, ClientError> {
        let decoded = image::load_from_memory(bytes).map_err(|e| ClientError::Image(e.to_string()))?;
        let resized = decoded
            .resize_exact(Self::SIZE, Self::SIZE, image::imageops::FilterType::Triangle)
            .to_rgba8();
        let mut hasher = Sha256::new();
        hasher.update(format!("rgba8:{}x{}:", resized.width(), resized.height()).as_bytes());
        hasher.update(resized.as_raw());
        Ok(Self {
            label,
            pixels: Arc::new(resized),
            content_hash: hex::encode(hasher.finalize()),
        })
    }

    /// SHA-256 over the resized pixel buffer.
    pub fn content_hash(&self) -> &str {
        &self.content_hash
    }

    pub fn label(&self) -> Option<&str> {
        self.label.as_deref()
    }

    pub fn to_png(&self) -> Vec<u8> {
        let mut out = Cursor::new(Vec::new());
        self.pixels
            .write_to(&mut out, image::ImageFormat::Png)
            .expect("encoding an in-memory RGBA buffer cannot fail");
        out.into_inner()
    }

    pub fn data_url(&self) -> String {
        use base64::Engine;
        format!(
            "data:image/png;base64,{}",
            base64::engine::general_purpose::STANDARD.encode(self.to_png())
        )
    }
}

impl fmt::Debug for ImageAttachment {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("ImageAttachment")
            .field("label", &self.label)
            .field("content_hash", &self.content_hash)
            .finish()
    }
}

impl PartialEq for ImageAttachment {
    fn eq(&self, other: &Self) -> bool {
        self.content_hash == other.content_hash
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Turn {
    pub role: Role,
    pub content: String,
    pub image: Option<ImageAttachment>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SamplingOptions {
    pub temperature: f64,
    pub top_k: Option<u32>,
    pub n_samples: u32,
    pub constraint: Option<GenerationConstraint>,
}

impl Default for SamplingOptions {
    fn default() -> Self {
        Self {
            temperature: 0.0,
            top_k: None,
            n_samples: 1,
            constraint: None,
        }
    }
}

impl SamplingOptions {
    pub fn with_temperature(temperature: f64) -> Self {
        Self {
            temperature,
            ..Self::default()
        }
    }

    pub fn constrained(constraint: GenerationConstraint, temperature: f64) -> Self {
        Self {
            temperature,
            constraint: Some(constraint),
            ..Self::default()
        }
    }

    pub fn top_k(k: u32, temperature: f64) -> Self {
        Self {
            temperature,
            top_k: Some(k),
            n_samples: k,
            constraint: None,
        }
    }
}

/// A conversation transcript plus sampling options.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct ChatExchange {
    pub turns: Vec<Turn>,
    pub options: SamplingOptions,
}

impl ChatExchange {
    pub fn new(options: SamplingOptions) -> Self {
        Self {
            turns: Vec::new(),
            options,
        }
    }

    pub fn system(mut self, content: impl Into<String>) -> Self {
        self.push(Role::System, content.into(), None);
        self
    }

    pub fn user(mut self, content: impl Into<String>) -> Self {
        self.push(Role::User, content.into(), None);
        self
    }

    pub fn user_with_image(mut self, content: impl Into<String>, image: ImageAttachment) -> Self {
        self.push(Role::User, content.into(), Some(image));
        self
    }

    pub fn assistant(mut self, content: impl Into<String>) -> Self {
        self.push(Role::Assistant, content.into(), None);
        self
    }

    pub fn push(&mut self, role: Role, content: String, image: Option<ImageAttachment>) {
        self.turns.push(Turn { role, content, image });
    }

    /// Same turns, different options.
    pub fn with_options(&self, options: SamplingOptions) -> Self {
        Self {
            turns: self.turns.clone(),
            options,
        }
    }

    pub fn last_user_content(&self) -> &str {
        self.turns
            .iter()
            .rev()
            .find(|t| t.role == Role::User)
            .map_or("", |t| t.content.as_str())
    }

    pub fn validate(&self) -> Result<(), ClientError> {
        let invalid = |m: String| Err(ClientError::InvalidExchange(m));
        let opts = &self.options;
        if !(opts.temperature >= 0.0 && opts.temperature.is_finite()) {
            return invalid(format!("temperature {} must be finite and non-negative", opts.temperature));
        }
        if opts.n_samples == 0 {
            return invalid("n_samples must be positive".into());
        }
        if opts.top_k == Some(0) {
            return invalid("top_k must be positive".into());
        }
        if opts.constraint.is_some() && opts.n_samples != 1 {
            return invalid("a constrained exchange must request exactly one sample".into());
        }
        let body = match self.turns.first() {
            Some(t) if t.role == Role::System => &self.turns[1..],
            _ => &self.turns[..],
        };
        if body.is_empty() {
            return invalid("exchange has no user turn".into());
        }
        for (i, turn) in body.iter().enumerate() {
            let expected = if i % 2 == 0 { Role::User } else { Role::Assistant };
            if turn.role != expected {
                return invalid(format!(
                    "turn {} has role {}, expected {}",
                    i,
                    turn.role.as_str(),
                    expected.as_str()
                ));
            }
            if turn.image.is_some() && turn.role != Role::User {
                return invalid("images may only be attached to user turns".into());
            }
        }
        if body.last().map(|t| t.role) != Some(Role::User) {
            return invalid("exchange must end with a user turn".into());
        }
        Ok(())
    }

    /// Serializable form with images replaced by their content hash.
    pub fn canonical(&self) -> CanonicalExchange {
        CanonicalExchange {
            turns: self
                .turns
                .iter()
                .map(|t| CanonicalTurn {
                    role: t.role,
                    content: t.content.clone(),
                    image: t.image.as_ref().map(|i| i.content_hash().to_string()),
                })
                .collect(),
            options: CanonicalOptions {
                temperature: self.options.temperature,
                top_k: self.options.top_k,
                n_samples: self.options.n_samples,
                constraint: self.options.constraint.as_ref().map(|c| c.rendered_pattern().to_string()),
            },
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CanonicalTurn {
    pub role: Role,
    pub content: String,
    pub image: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CanonicalOptions {
    pub temperature: f64,
    pub top_k: Option<u32>,
    pub n_samples: u32,
    pub constraint: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CanonicalExchange {
    pub turns: Vec<CanonicalTurn>,
    pub options: CanonicalOptions,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BackendKind {
    Http,
    Replay,
    Script,
    Recording,
}

pub trait ChatBackend: Send + Sync {
    fn kind(&self) -> BackendKind;

    fn model_id(&self) -> &str;

    /// Returns exactly `exchange.options.n_samples` assistant replies.
    fn complete(&self, exchange: &ChatExchange) -> Result<Vec<String>, ClientError>;

    /// Per-label scores for the next reply, when the backend exposes them.
    /// `Ok(None)` means the caller must fall back to sampling.
    fn score_labels(&self, _exchange: &ChatExchange, _labels: &[&str]) -> Result<Option<Vec<f64>>, ClientError> {
        Ok(None)
    }
}

/// Checks a reply list against the exchange's sample count and constraint.
pub(crate) fn check_replies(exchange: &ChatExchange, replies: &[String]) -> Result<(), ClientError> {
    if replies.len() != exchange.options.n_samples as usize {
        return Err(ClientError::SampleCount {
            expected: exchange.options.n_samples,
            got: replies.len(),
        });
    }
    if let Some(constraint) = &exchange.options.constraint {
        if let Some(bad) = replies.iter().find(|r| !constraint.matches(r)) {
            return Err(ClientError::ConstraintViolation { reply: bad.clone() });
        }
    }
    Ok(())
}
