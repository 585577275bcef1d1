use std::collections::HashMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::sync::{Mutex, RwLock};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::{check_replies, BackendKind, CanonicalExchange, ChatBackend, ChatExchange, ClientError, ModelBackend};

/// Hex SHA-256 of the canonical (model, purpose, exchange) triple.
pub type FixtureKey = String;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Purpose {
    Complete,
    Score { labels: Vec<String> },
}

#[derive(Serialize)]
struct KeyMaterial<'a> {
    model: &'a str,
    purpose: &'a Purpose,
    exchange: &'a CanonicalExchange,
}

fn fixture_key(model: &str, purpose: &Purpose, exchange: &CanonicalExchange) -> FixtureKey {
    let material = serde_json::to_vec(&KeyMaterial { model, purpose, exchange }).expect("key material serializes");
    hex::encode(Sha256::digest(&material))
}

/// One stored fixture file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FixtureEntry {
    pub key: FixtureKey,
    pub model: String,
    pub purpose: Purpose,
    pub exchange: CanonicalExchange,
    #[serde(default)]
    pub replies: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub scores: Option<Vec<f64>>,
}

/// Fixture store: one JSON file per key under a directory, mirrored in memory.
/// Reads are concurrent; writes are serialized.
#[derive(Debug, Default)]
pub struct FixtureStore {
    dir: Option<PathBuf>,
    entries: RwLock<HashMap<FixtureKey, FixtureEntry>>,
    write_lock: Mutex<()>,
}

impl FixtureStore {
    pub fn in_memory() -> Self {
        Self::default()
    }

    /// Opens (creating if needed) a fixtures directory and loads every `*.json` in it.
    pub fn open(dir: impl AsRef<Path>) -> Result<Self, ClientError> {
        let dir = dir.as_ref().to_path_buf();
        fs::create_dir_all(&dir).map_err(|e| ClientError::Io(format!("{}: {e}", dir.display())))?;
        let mut entries = HashMap::new();
        let listing = fs::read_dir(&dir).map_err(|e| ClientError::Io(format!("{}: {e}", dir.display())))?;
        for item in listing {
            let path = item.map_err(|e| ClientError::Io(e.to_string()))?.path();
            if path.extension().and_then(|e| e.to_str()) != Some("json") {
                continue;
            }
            let text = fs::read_to_string(&path).map_err(|e| ClientError::Io(format!("{}: {e}", path.display())))?;
            let entry: FixtureEntry =
                serde_json::from_str(&text).map_err(|e| ClientError::Io(format!("{}: {e}", path.display())))?;
            entries.insert(entry.key.clone(), entry);
        }
        Ok(Self {
            dir: Some(dir),
            entries: RwLock::new(entries),
            write_lock: Mutex::new(()),
        })
    }

    pub fn len(&self) -> usize {
        self.entries.read().unwrap().len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn get(&self, key: &str) -> Option<FixtureEntry> {
        self.entries.read().unwrap().get(key).cloned()
    }

    pub fn key_for(model: &str, exchange: &ChatExchange) -> FixtureKey {
        fixture_key(model, &Purpose::Complete, &exchange.canonical())
    }

    pub fn score_key_for(model: &str, exchange: &ChatExchange, labels: &[&str]) -> FixtureKey {
        let purpose = Purpose::Score {
            labels: labels.iter().map(|s| s.to_string()).collect(),
        };
        fixture_key(model, &purpose, &exchange.canonical())
    }

    /// Stores `replies` for `exchange`. Re-recording identical replies is a no-op.
    pub fn record(&self, model: &str, exchange: &ChatExchange, replies: &[String]) -> Result<FixtureKey, ClientError> {
        exchange.validate()?;
        if replies.len() != exchange.options.n_samples as usize {
            return Err(ClientError::SampleCount {
                expected: exchange.options.n_samples,
                got: replies.len(),
            });
        }
        let canonical = exchange.canonical();
        let purpose = Purpose::Complete;
        let key = fixture_key(model, &purpose, &canonical);
        self.put(FixtureEntry {
            key: key.clone(),
            model: model.to_string(),
            purpose,
            exchange: canonical,
            replies: replies.to_vec(),
            scores: None,
        })?;
        Ok(key)
    }

    pub fn record_scores(
        &self,
        model: &str,
        exchange: &ChatExchange,
        labels: &[&str],
        scores: &[f64],
    ) -> Result<FixtureKey, ClientError> {
        if labels.len() != scores.len() {
            return Err(ClientError::InvalidExchange(format!(
                "{} labels but {} scores",
                labels.len(),
                scores.len()
            )));
        }
        let canonical = exchange.canonical();
        let purpose = Purpose::Score {
            labels: labels.iter().map(|s| s.to_string()).collect(),
        };
        let key = fixture_key(model, &purpose, &canonical);
        self.put(FixtureEntry {
            key: key.clone(),
            model: model.to_string(),
            purpose,
            exchange: canonical,
            replies: Vec::new(),
            scores: Some(scores.to_vec()),
        })?;
        Ok(key)
    }

    fn put(&self, entry: FixtureEntry) -> Result<(), ClientError> {
        let _guard = self.write_lock.lock().unwrap();
        if let Some(existing) = self.entries.read().unwrap().get(&entry.key) {
            if existing.replies == entry.replies && existing.scores == entry.scores {
                return Ok(());
            }
            return Err(ClientError::DuplicateKey { key: entry.key });
        }
        if let Some(dir) = &self.dir {
            let path = dir.join(format!("{}.json", entry.key));
            let tmp = dir.join(format!(".{}.tmp", entry.key));
            let text = serde_json::to_string_pretty(&entry).expect("fixture entries serialize");
            fs::write(&tmp, text + "\n").map_err(|e| ClientError::Io(format!("{}: {e}", tmp.display())))?;
            fs::rename(&tmp, &path).map_err(|e| ClientError::Io(format!("{}: {e}", path.display())))?;
        }
        self.entries.write().unwrap().insert(entry.key.clone(), entry);
        Ok(())
    }
}

/// Stores `replies` for `exchange` under `model`; see [`FixtureStore::record`].
pub fn record_fixture(
    store: &FixtureStore,
    model: &str,
    exchange: &ChatExchange,
    replies: &[String],
) -> Result<FixtureKey, ClientError> {
    store.record(model, exchange, replies)
}

/// Deterministic backend answering from a fixture store.
pub struct ReplayBackend {
    model: String,
    store: std::sync::Arc<FixtureStore>,
}

impl ReplayBackend {
    pub fn new(model: impl Into<String>, store: std::sync::Arc<FixtureStore>) -> Self {
        Self {
            model: model.into(),
            store,
        }
    }
}

impl ChatBackend for ReplayBackend {
    fn kind(&self) -> BackendKind {
        BackendKind::Replay
    }

    fn model_id(&self) -> &str {
        &self.model
    }

    fn complete(&self, exchange: &ChatExchange) -> Result<Vec<String>, ClientError> {
        exchange.validate()?;
        let key = FixtureStore::key_for(&self.model, exchange);
        let entry = self.store.get(&key).ok_or(ClientError::FixtureMiss { key })?;
        check_replies(exchange, &entry.replies)?;
        Ok(entry.replies)
    }

    fn score_labels(&self, exchange: &ChatExchange, labels: &[&str]) -> Result<Option<Vec<f64>>, ClientError> {
        let key = FixtureStore::score_key_for(&self.model, exchange, labels);
        Ok(self.store.get(&key).and_then(|e| e.scores))
    }
}

/// Wraps a backend and records every successful reply into a store, keyed
/// under the inner backend's model id.
pub struct RecordingBackend {
    inner: ModelBackend,
    store: std::sync::Arc<FixtureStore>,
}

impl RecordingBackend {
    pub fn new(inner: ModelBackend, store: std::sync::Arc<FixtureStore>) -> Self {
        Self { inner, store }
    }
}

impl ChatBackend for RecordingBackend {
    fn kind(&self) -> BackendKind {
        BackendKind::Recording
    }

    fn model_id(&self) -> &str {
        self.inner.model_id()
    }

    fn complete(&self, exchange: &ChatExchange) -> Result<Vec<String>, ClientError> {
        match self.inner.complete(exchange) {
            Ok(replies) => {
                self.store.record(self.inner.model_id(), exchange, &replies)?;
                Ok(replies)
            }
            Err(ClientError::ConstraintViolation { reply }) => {
                // Keep the violating reply so replay reproduces the same failure.
                self.store.record(self.inner.model_id(), exchange, std::slice::from_ref(&reply))?;
                Err(ClientError::ConstraintViolation { reply })
            }
            Err(e) => Err(e),
        }
    }

    fn score_labels(&self, exchange: &ChatExchange, labels: &[&str]) -> Result<Option<Vec<f64>>, ClientError> {
        let scores = self.inner.score_labels(exchange, labels)?;
        if let Some(s) = &scores {
            self.store.record_scores(self.inner.model_id(), exchange, labels, s)?;
        }
        Ok(scores)
    }
}
