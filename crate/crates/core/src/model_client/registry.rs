use std::collections::{BTreeMap, HashMap};
use std::path::{Path, PathBuf};
use std::sync::{Arc, Mutex};

use serde::{Deserialize, Serialize};

use super::{ClientError, FixtureStore, HttpBackend, ModelBackend, RecordingBackend, ReplayBackend, ScriptBook, ScriptedBackend};

/// Configuration for one backend role.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BackendConfig {
    /// Registered strategy name: `http`, `replay` or `script` by default.
    pub kind: String,
    pub model: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub endpoint: Option<String>,
    /// Environment variable holding the bearer token.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub api_key_env: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub supports_top_k: Option<bool>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fixtures: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub script: Option<PathBuf>,
    /// Record every reply into this fixtures directory.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub record_into: Option<PathBuf>,
}

pub type BackendFactory = Box<dyn Fn(&BackendConfig, &BackendRegistry) -> Result<ModelBackend, ClientError> + Send + Sync>;

/// Named backend factories. Fixture stores opened through the registry are
/// shared, so the VLM and LLM roles can read and record into one directory.
pub struct BackendRegistry {
    factories: BTreeMap<String, BackendFactory>,
    stores: Mutex<HashMap<PathBuf, Arc<FixtureStore>>>,
}

impl Default for BackendRegistry {
    fn default() -> Self {
        Self::with_defaults()
    }
}

impl BackendRegistry {
    pub fn empty() -> Self {
        Self {
            factories: BTreeMap::new(),
            stores: Mutex::new(HashMap::new()),
        }
    }

    pub fn with_defaults() -> Self {
        let mut reg = Self::empty();
        reg.register("http", |cfg, _| {
            let endpoint = cfg
                .endpoint
                .clone()
                .ok_or_else(|| ClientError::InvalidExchange("http backend requires an endpoint".into()))?;
            let key = cfg.api_key_env.as_deref().and_then(|var| std::env::var(var).ok());
            Ok(Arc::new(
                HttpBackend::new(endpoint, cfg.model.clone())
                    .with_api_key(key)
                    .with_top_k_support(cfg.supports_top_k.unwrap_or(true)),
            ))
        });
        reg.register("replay", |cfg, reg| {
            let dir = cfg
                .fixtures
                .as_deref()
                .ok_or_else(|| ClientError::InvalidExchange("replay backend requires a fixtures directory".into()))?;
            Ok(Arc::new(ReplayBackend::new(cfg.model.clone(), reg.store(dir)?)))
        });
        reg.register("script", |cfg, _| {
            let path = cfg
                .script
                .as_deref()
                .ok_or_else(|| ClientError::InvalidExchange("script backend requires a script file".into()))?;
            Ok(Arc::new(ScriptedBackend::new(cfg.model.clone(), ScriptBook::load(path)?)))
        });
        reg
    }

    pub fn register<F>(&mut self, name: &str, factory: F)
    where
        F: Fn(&BackendConfig, &BackendRegistry) -> Result<ModelBackend, ClientError> + Send + Sync + 'static,
    {
        self.factories.insert(name.to_string(), Box::new(factory));
    }

    pub fn names(&self) -> Vec<&str> {
        self.factories.keys().map(String::as_str).collect()
    }

    /// Opens a fixture store, reusing an already-open one for the same directory.
    pub fn store(&self, dir: &Path) -> Result<Arc<FixtureStore>, ClientError> {
        let mut stores = self.stores.lock().unwrap();
        if let Some(s) = stores.get(dir) {
            return Ok(s.clone());
        }
        let store = Arc::new(FixtureStore::open(dir)?);
        stores.insert(dir.to_path_buf(), store.clone());
        Ok(store)
    }

    pub fn build(&self, cfg: &BackendConfig) -> Result<ModelBackend, ClientError> {
        let factory = self.factories.get(&cfg.kind).ok_or_else(|| {
            ClientError::InvalidExchange(format!(
                "unknown backend kind {:?}; known: {}",
                cfg.kind,
                self.names().join(", ")
            ))
        })?;
        let backend = factory(cfg, self)?;
        match &cfg.record_into {
            Some(dir) => Ok(Arc::new(RecordingBackend::new(backend, self.store(dir)?))),
            None => Ok(backend),
        }
    }
}
