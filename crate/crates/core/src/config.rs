//! `explainer.toml`: default artifact paths and the optional model endpoint.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::query::llm::LlmConfig;

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExplainerConfig {
    pub db: Option<PathBuf>,
    /// Sidecar `schema.json`.
    pub schema: Option<PathBuf>,
    /// `predicates.json`.
    pub predicates: Option<PathBuf>,
    pub llm: Option<LlmConfig>,
}

impl ExplainerConfig {
    pub fn parse(text: &str) -> Result<Self> {
        Ok(toml::from_str(text)?)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        if !path.exists() {
            return Err(Error::NotFound(path.to_path_buf()));
        }
        let mut cfg = Self::parse(&std::fs::read_to_string(path)?)?;
        // Relative paths are resolved against the config file's directory.
        if let Some(dir) = path.parent() {
            for p in [&mut cfg.db, &mut cfg.schema, &mut cfg.predicates].into_iter().flatten() {
                if p.is_relative() {
                    *p = dir.join(&*p);
                }
            }
        }
        Ok(cfg)
    }

    /// Endpoint settings with environment overrides applied.
    pub fn llm(&self) -> LlmConfig {
        self.llm.clone().unwrap_or_default().with_env_overrides()
    }
}
