//! Config-file loading and backend resolution. Flags always override the file.

use std::path::{Path, PathBuf};

use clap::Args;
use imgkg_core::model_client::{BackendConfig, BackendRegistry, ModelBackend};
use imgkg_core::pipeline::{Backends, EnrollmentConfig};
use serde::Deserialize;

use crate::Failure;

/// Environment variable read for the bearer token when none is configured.
pub const DEFAULT_API_KEY_ENV: &str = "IMGKG_API_KEY";

#[derive(Debug, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CliConfig {
    pub schema: Option<PathBuf>,
    pub inventory: Option<PathBuf>,
    pub records_dir: Option<PathBuf>,
    pub jobs: Option<usize>,
    pub vlm: Option<BackendConfig>,
    pub llm: Option<BackendConfig>,
    pub enrollment: Option<EnrollmentConfig>,
}

impl CliConfig {
    pub fn load(path: Option<&Path>) -> Result<Self, Failure> {
        let Some(path) = path else {
            return Ok(Self::default());
        };
        let text = std::fs::read_to_string(path).map_err(|e| Failure::Usage(format!("{}: {e}", path.display())))?;
        toml::from_str(&text).map_err(|e| Failure::Usage(format!("{}: {e}", path.display())))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Role {
    Vlm,
    Llm,
}

impl Role {
    fn name(self) -> &'static str {
        match self {
            Role::Vlm => "vlm",
            Role::Llm => "llm",
        }
    }
}

/// Where model replies come from.
#[derive(Debug, Clone, Default, Args)]
pub struct BackendArgs {
    /// Replay model replies from this fixtures directory (or, with --record, record into it).
    #[arg(long, value_name = "DIR")]
    pub fixtures: Option<PathBuf>,
    /// Answer from a JSON rule book instead of a model server.
    #[arg(long, value_name = "FILE")]
    pub script: Option<PathBuf>,
    /// Record every reply from the live backend into --fixtures.
    #[arg(long, requires = "fixtures")]
    pub record: bool,
    /// Chat-completions endpoint of the vision-language model.
    #[arg(long, value_name = "URL")]
    pub vlm_endpoint: Option<String>,
    /// Chat-completions endpoint of the language model.
    #[arg(long, value_name = "URL")]
    pub llm_endpoint: Option<String>,
    #[arg(long, value_name = "ID")]
    pub vlm_model: Option<String>,
    #[arg(long, value_name = "ID")]
    pub llm_model: Option<String>,
    /// Name of the environment variable holding the API token.
    #[arg(long, value_name = "VAR")]
    pub api_key_env: Option<String>,
}

impl BackendArgs {
    fn endpoint(&self, role: Role) -> Option<&String> {
        match role {
            Role::Vlm => self.vlm_endpoint.as_ref(),
            Role::Llm => self.llm_endpoint.as_ref(),
        }
    }

    fn model(&self, role: Role) -> Option<&String> {
        match role {
            Role::Vlm => self.vlm_model.as_ref(),
            Role::Llm => self.llm_model.as_ref(),
        }
    }

    /// Final backend configuration for one role.
    pub fn resolve(&self, role: Role, file: Option<&BackendConfig>) -> Result<BackendConfig, Failure> {
        let usage = |m: String| Err(Failure::Usage(format!("{} backend: {m}", role.name())));
        let mut cfg = file.cloned().unwrap_or_default();
        if let Some(model) = self.model(role) {
            cfg.model = model.clone();
        }
        if cfg.model.is_empty() {
            cfg.model = role.name().to_string();
        }
        let endpoint = self.endpoint(role);
        if endpoint.is_some() && self.script.is_some() {
            return usage("choose either an endpoint or --script".into());
        }
        let live_from_flags = if let Some(url) = endpoint {
            Some(("http", Some(url.clone()), None))
        } else {
            self.script.as_ref().map(|s| ("script", None, Some(s.clone())))
        };
        let live = live_from_flags.is_some();
        if let Some((kind, url, script)) = live_from_flags {
            cfg.kind = kind.to_string();
            cfg.endpoint = url;
            cfg.script = script;
            cfg.fixtures = None;
        }
        match (&self.fixtures, self.record) {
            (Some(dir), true) => {
                if cfg.kind != "http" && cfg.kind != "script" {
                    return usage("--record needs an endpoint or --script to record from".into());
                }
                cfg.record_into = Some(dir.clone());
            }
            (Some(dir), false) => {
                if live {
                    return usage("--fixtures replays recorded replies; add --record to record from a live backend".into());
                }
                cfg = BackendConfig {
                    kind: "replay".into(),
                    model: cfg.model,
                    fixtures: Some(dir.clone()),
                    ..Default::default()
                };
            }
            (None, _) => {}
        }
        if cfg.kind == "http" && cfg.api_key_env.is_none() {
            cfg.api_key_env = self.api_key_env.clone().or_else(|| Some(DEFAULT_API_KEY_ENV.to_string()));
        }
        let source_ok = match cfg.kind.as_str() {
            "http" => cfg.endpoint.is_some() && cfg.fixtures.is_none(),
            "replay" => cfg.fixtures.is_some() && cfg.endpoint.is_none(),
            "script" => cfg.script.is_some(),
            "" => return usage("not configured; pass an endpoint, --fixtures or --script".into()),
            _ => true,
        };
        if !source_ok {
            return usage(format!("kind {:?} needs exactly one source (endpoint or fixtures directory)", cfg.kind));
        }
        Ok(cfg)
    }
}

pub fn build(registry: &BackendRegistry, cfg: &BackendConfig) -> Result<ModelBackend, Failure> {
    registry.build(cfg).map_err(|e| Failure::Usage(format!("cannot build {} backend: {e}", cfg.kind)))
}

pub fn backends(args: &BackendArgs, file: &CliConfig) -> Result<Backends, Failure> {
    let registry = BackendRegistry::with_defaults();
    let vlm = args.resolve(Role::Vlm, file.vlm.as_ref())?;
    let llm = args.resolve(Role::Llm, file.llm.as_ref())?;
    Ok(Backends {
        vlm: build(&registry, &vlm)?,
        llm: build(&registry, &llm)?,
    })
}
