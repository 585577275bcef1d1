use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{check_replies, BackendKind, ChatBackend, ChatExchange, ClientError};

/// One answer rule. A rule matches when every populated condition holds;
/// the first matching rule in file order wins.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScriptRule {
    /// Restrict to one model id.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub model: Option<String>,
    /// Label of an image attached anywhere in the conversation.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub image: Option<String>,
    /// Substrings that must all appear in the last user turn.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub contains: Vec<String>,
    /// Substrings that must all appear somewhere in the conversation.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub history_contains: Vec<String>,
    /// Replies; a single reply is repeated when more samples are requested.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub replies: Vec<String>,
    /// Label scores returned by `score_labels`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub scores: Option<BTreeMap<String, f64>>,
}

impl ScriptRule {
    fn matches(&self, model: &str, exchange: &ChatExchange) -> bool {
        if self.model.as_deref().is_some_and(|m| m != model) {
            return false;
        }
        if let Some(label) = &self.image {
            let found = exchange
                .turns
                .iter()
                .filter_map(|t| t.image.as_ref())
                .any(|img| img.label() == Some(label.as_str()));
            if !found {
                return false;
            }
        }
        let last = exchange.last_user_content();
        if !self.contains.iter().all(|s| last.contains(s.as_str())) {
            return false;
        }
        self.history_contains
            .iter()
            .all(|s| exchange.turns.iter().any(|t| t.content.contains(s.as_str())))
    }
}

/// Ordered rule list, loaded from JSON `{"rules": [...]}`.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ScriptBook {
    pub rules: Vec<ScriptRule>,
}

impl ScriptBook {
    pub fn load(path: impl AsRef<Path>) -> Result<Self, ClientError> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| ClientError::Io(format!("{}: {e}", path.display())))?;
        serde_json::from_str(&text).map_err(|e| ClientError::Io(format!("{}: {e}", path.display())))
    }

    pub fn push(&mut self, rule: ScriptRule) -> &mut Self {
        self.rules.push(rule);
        self
    }
}

/// Rule-driven backend for authoring fixtures and oracle runs.
pub struct ScriptedBackend {
    model: String,
    book: ScriptBook,
}

impl ScriptedBackend {
    pub fn new(model: impl Into<String>, book: ScriptBook) -> Self {
        Self {
            model: model.into(),
            book,
        }
    }
}

impl ChatBackend for ScriptedBackend {
    fn kind(&self) -> BackendKind {
        BackendKind::Script
    }

    fn model_id(&self) -> &str {
        &self.model
    }

    fn complete(&self, exchange: &ChatExchange) -> Result<Vec<String>, ClientError> {
        exchange.validate()?;
        let rule = self
            .book
            .rules
            .iter()
            .find(|r| !r.replies.is_empty() && r.matches(&self.model, exchange))
            .ok_or_else(|| ClientError::ScriptMiss(exchange.last_user_content().chars().take(160).collect()))?;
        let n = exchange.options.n_samples as usize;
        let replies = match rule.replies.len() {
            1 => vec![rule.replies[0].clone(); n],
            len if len >= n => rule.replies[..n].to_vec(),
            len => return Err(ClientError::SampleCount { expected: n as u32, got: len }),
        };
        check_replies(exchange, &replies)?;
        Ok(replies)
    }

    fn score_labels(&self, exchange: &ChatExchange, labels: &[&str]) -> Result<Option<Vec<f64>>, ClientError> {
        let Some(scores) = self
            .book
            .rules
            .iter()
            .filter(|r| r.matches(&self.model, exchange))
            .find_map(|r| r.scores.as_ref())
        else {
            return Ok(None);
        };
        Ok(Some(labels.iter().map(|l| scores.get(*l).copied().unwrap_or(0.0)).collect()))
    }
}
