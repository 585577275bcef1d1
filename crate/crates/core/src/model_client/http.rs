//! Chat-completions HTTP client.
//!
//! Request body:
//!
//! ```json
//! {
//!   "model": "<model id>",
//!   "messages": [
//!     {"role": "system", "content": "..."},
//!     {"role": "user", "content": [
//!        {"type": "image_url", "image_url": {"url": "data:image/png;base64,..."}},
//!        {"type": "text", "text": "..."}]},
//!     {"role": "assistant", "content": "..."}
//!   ],
//!   "temperature": 0.2,
//!   "n": 1,
//!   "top_k": 3,          // only when set and the server supports it
//!   "regex": "^\\{...\\}$" // only when the exchange carries a constraint
//! }
//! ```
//!
//! The reply texts are read from `choices[*].message.content`, ordered by `index`.

use std::time::Duration;

use serde_json::{json, Value};

use super::{check_replies, BackendKind, ChatBackend, ChatExchange, ClientError};

/// Request field carrying the regular-expression constraint. This is the
/// extension name SGLang's OpenAI-compatible server reads.
pub const CONSTRAINT_FIELD: &str = "regex";

pub struct HttpBackend {
    endpoint: String,
    model: String,
    api_key: Option<String>,
    supports_top_k: bool,
    timeout: Duration,
}

impl HttpBackend {
    pub fn new(endpoint: impl Into<String>, model: impl Into<String>) -> Self {
        Self {
            endpoint: endpoint.into(),
            model: model.into(),
            api_key: None,
            supports_top_k: true,
            timeout: Duration::from_secs(120),
        }
    }

    pub fn with_api_key(mut self, key: Option<String>) -> Self {
        self.api_key = key.filter(|k| !k.is_empty());
        self
    }

    /// Servers without a `top_k` parameter get plain temperature sampling of
    /// `n` completions; callers deduplicate.
    pub fn with_top_k_support(mut self, supported: bool) -> Self {
        self.supports_top_k = supported;
        self
    }

    pub fn with_timeout(mut self, timeout: Duration) -> Self {
        self.timeout = timeout;
        self
    }

    pub fn request_body(&self, exchange: &ChatExchange) -> Value {
        let messages: Vec<Value> = exchange
            .turns
            .iter()
            .map(|turn| match &turn.image {
                Some(img) => json!({
                    "role": turn.role.as_str(),
                    "content": [
                        {"type": "image_url", "image_url": {"url": img.data_url()}},
                        {"type": "text", "text": turn.content},
                    ],
                }),
                None => json!({"role": turn.role.as_str(), "content": turn.content}),
            })
            .collect();
        let opts = &exchange.options;
        let mut body = json!({
            "model": self.model,
            "messages": messages,
            "temperature": opts.temperature,
            "n": opts.n_samples,
        });
        if let (Some(k), true) = (opts.top_k, self.supports_top_k) {
            body["top_k"] = json!(k);
        }
        if let Some(c) = &opts.constraint {
            body[CONSTRAINT_FIELD] = json!(c.rendered_pattern());
        }
        body
    }

    fn client(&self) -> Result<reqwest::blocking::Client, ClientError> {
        reqwest::blocking::Client::builder()
            .timeout(self.timeout)
            .build()
            .map_err(|e| ClientError::Transport(e.to_string()))
    }

    fn post_once(&self, body: &str) -> Result<String, PostError> {
        let client = self.client().map_err(PostError::Fatal)?;
        let mut req = client
            .post(&self.endpoint)
            .header("content-type", "application/json")
            .body(body.to_string());
        if let Some(key) = &self.api_key {
            req = req.bearer_auth(key);
        }
        let resp = req.send().map_err(|e| {
            let err = ClientError::Transport(e.to_string());
            if e.is_timeout() || e.is_connect() {
                PostError::Retryable(err)
            } else {
                PostError::Fatal(err)
            }
        })?;
        let status = resp.status();
        let text = resp.text().map_err(|e| PostError::Fatal(ClientError::Transport(e.to_string())))?;
        if !status.is_success() {
            return Err(PostError::Fatal(ClientError::Transport(format!(
                "HTTP {status}: {}",
                text.chars().take(300).collect::<String>()
            ))));
        }
        Ok(text)
    }

    /// One request with a single fresh-connection retry on timeouts.
    fn post(&self, body: &str) -> Result<String, ClientError> {
        match self.post_once(body) {
            Ok(t) => Ok(t),
            Err(PostError::Retryable(_)) => self.post_once(body).map_err(PostError::into_inner),
            Err(PostError::Fatal(e)) => Err(e),
        }
    }
}

enum PostError {
    Retryable(ClientError),
    Fatal(ClientError),
}

impl PostError {
    fn into_inner(self) -> ClientError {
        match self {
            PostError::Retryable(e) | PostError::Fatal(e) => e,
        }
    }
}

pub(crate) fn parse_response(text: &str) -> Result<Vec<String>, ClientError> {
    let value: Value =
        serde_json::from_str(text).map_err(|e| ClientError::Transport(format!("malformed response: {e}")))?;
    let choices = value["choices"]
        .as_array()
        .ok_or_else(|| ClientError::Transport("response has no `choices` array".into()))?;
    let mut indexed: Vec<(u64, String)> = choices
        .iter()
        .enumerate()
        .map(|(pos, c)| {
            let content = c["message"]["content"]
                .as_str()
                .ok_or_else(|| ClientError::Transport("choice without message.content".into()))?;
            Ok((c["index"].as_u64().unwrap_or(pos as u64), content.to_string()))
        })
        .collect::<Result<_, ClientError>>()?;
    indexed.sort_by_key(|(i, _)| *i);
    Ok(indexed.into_iter().map(|(_, c)| c).collect())
}

impl ChatBackend for HttpBackend {
    fn kind(&self) -> BackendKind {
        BackendKind::Http
    }

    fn model_id(&self) -> &str {
        &self.model
    }

    fn complete(&self, exchange: &ChatExchange) -> Result<Vec<String>, ClientError> {
        exchange.validate()?;
        let body = self.request_body(exchange).to_string();
        let replies = parse_response(&self.post(&body)?)?;
        match check_replies(exchange, &replies) {
            Err(ClientError::ConstraintViolation { .. }) => {
                let retry = parse_response(&self.post(&body)?)?;
                check_replies(exchange, &retry)?;
                Ok(retry)
            }
            Err(e) => Err(e),
            Ok(()) => Ok(replies),
        }
    }
}
