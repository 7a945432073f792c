use std::fs;
use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::Duration;

use serde::Deserialize;

use super::CliError;
use crate::backend::{
    ChatProvider, EmbeddingProvider, HashEmbedder, HttpChatProvider, HttpEmbedder, HttpSettings,
    ScriptedProvider, API_KEY_ENV, DEFAULT_DIMENSION,
};
use crate::exec::InflightLimit;
use crate::experts::{shipped_pool_dir, ExpertPool, PairEmbedding};
use crate::prompts::PromptSet;
use crate::simulate::{GenerationConfig, DEFAULT_STOP_CONDITIONS, DEFAULT_TURN_COUNT};
use crate::structured::DEFAULT_MAX_REPAIRS;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BackendKind {
    Http,
    Scripted,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EmbeddingKind {
    Remote,
    Deterministic,
}

fn default_api_key_env() -> String {
    API_KEY_ENV.to_string()
}
fn default_embedding() -> EmbeddingKind {
    EmbeddingKind::Deterministic
}
fn default_dimension() -> usize {
    DEFAULT_DIMENSION
}
fn default_cap() -> usize {
    4
}
fn default_language() -> String {
    crate::model::DEFAULT_LANGUAGE.to_string()
}
fn default_repairs() -> u32 {
    DEFAULT_MAX_REPAIRS
}
fn default_timeout() -> u64 {
    120
}
fn default_turns() -> usize {
    DEFAULT_TURN_COUNT
}
fn default_true() -> bool {
    true
}

/// Run configuration (TOML). Relative paths resolve against the config
/// file's directory. The API key is read from the environment variable
/// named by `api_key_env`, never from the file.
#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub backend: BackendKind,
    pub base_url: Option<String>,
    pub model_name: Option<String>,
    #[serde(default = "default_api_key_env")]
    pub api_key_env: String,
    pub fixtures_dir: Option<PathBuf>,
    #[serde(default = "default_embedding")]
    pub embedding: EmbeddingKind,
    pub embedding_model: Option<String>,
    #[serde(default = "default_dimension")]
    pub embedding_dimension: usize,
    #[serde(default = "default_cap")]
    pub concurrency_cap: usize,
    #[serde(default = "default_language")]
    pub language: String,
    pub prompt_template_dir: Option<PathBuf>,
    pub pool_dir: Option<PathBuf>,
    #[serde(default)]
    pub pair_embedding: PairEmbedding,
    pub temperature: Option<f64>,
    #[serde(default = "default_repairs")]
    pub max_repairs: u32,
    #[serde(default = "default_timeout")]
    pub timeout_secs: u64,
    #[serde(default = "default_turns")]
    pub turn_count: usize,
    #[serde(default = "default_true")]
    pub narrate: bool,
    pub stop_conditions: Option<String>,
}

impl RunConfig {
    pub fn from_toml(text: &str, base_dir: &Path) -> Result<Self, CliError> {
        let mut cfg: Self = toml::from_str(text).map_err(|e| CliError::Config(e.to_string()))?;
        for p in [
            &mut cfg.fixtures_dir,
            &mut cfg.prompt_template_dir,
            &mut cfg.pool_dir,
        ]
        .into_iter()
        .flatten()
        {
            if p.is_relative() {
                *p = base_dir.join(&*p);
            }
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
        Self::from_toml(&text, path.parent().unwrap_or(Path::new(".")))
    }

    pub fn validate(&self) -> Result<(), CliError> {
        let bad = |m: &str| Err(CliError::Config(m.to_string()));
        match self.backend {
            BackendKind::Http if self.base_url.is_none() || self.model_name.is_none() => {
                return bad("backend = \"http\" requires base_url and model_name")
            }
            BackendKind::Scripted if self.fixtures_dir.is_none() => {
                return bad("backend = \"scripted\" requires fixtures_dir")
            }
            _ => {}
        }
        if self.embedding == EmbeddingKind::Remote
            && (self.base_url.is_none() || self.embedding_model.is_none())
        {
            return bad("embedding = \"remote\" requires base_url and embedding_model");
        }
        if self.concurrency_cap < 1 {
            return bad("concurrency_cap must be at least 1");
        }
        if self.embedding_dimension < 1 {
            return bad("embedding_dimension must be positive");
        }
        if self.temperature.is_some_and(|t| t.is_nan() || t < 0.0) {
            return bad("temperature must be non-negative");
        }
        if self.turn_count < 2 {
            return bad("turn_count must be at least 2");
        }
        Ok(())
    }

    pub fn generation(&self) -> GenerationConfig {
        GenerationConfig {
            turn_count: self.turn_count,
            starter: None,
            seed_topic: None,
            stop_conditions: self
                .stop_conditions
                .clone()
                .unwrap_or_else(|| DEFAULT_STOP_CONDITIONS.to_string()),
            narrate: self.narrate,
        }
    }

    fn http_settings(&self, model: &str) -> Result<HttpSettings, CliError> {
        let base = self.base_url.as_deref().expect("validated");
        let mut s = HttpSettings::from_env(base, model, &self.api_key_env)
            .map_err(|e| CliError::Config(e.to_string()))?;
        s.timeout = Duration::from_secs(self.timeout_secs);
        Ok(s)
    }
}

/// Providers, templates and pool built from a [`RunConfig`].
pub struct Runtime {
    pub config: RunConfig,
    pub chat: Box<dyn ChatProvider>,
    pub embedder: Box<dyn EmbeddingProvider>,
    pub prompts: PromptSet,
}

impl Runtime {
    pub fn new(config: RunConfig) -> Result<Self, CliError> {
        let limit = Arc::new(InflightLimit::new(config.concurrency_cap));
        let chat: Box<dyn ChatProvider> = match config.backend {
            BackendKind::Scripted => {
                let dir = config.fixtures_dir.as_deref().expect("validated");
                Box::new(
                    ScriptedProvider::from_dir(dir).map_err(|e| CliError::Config(e.to_string()))?,
                )
            }
            BackendKind::Http => {
                let model = config.model_name.clone().expect("validated");
                Box::new(HttpChatProvider::new(
                    config.http_settings(&model)?,
                    limit.clone(),
                ))
            }
        };
        let embedder: Box<dyn EmbeddingProvider> = match config.embedding {
            EmbeddingKind::Deterministic => Box::new(HashEmbedder::new(config.embedding_dimension)),
            EmbeddingKind::Remote => {
                let model = config.embedding_model.clone().expect("validated");
                Box::new(HttpEmbedder::new(
                    config.http_settings(&model)?,
                    config.embedding_dimension,
                    limit,
                ))
            }
        };
        let prompts = match &config.prompt_template_dir {
            Some(dir) => PromptSet::load(dir),
            None => PromptSet::builtin(&config.language),
        }
        .map_err(|e| CliError::Config(e.to_string()))?;
        Ok(Self {
            config,
            chat,
            embedder,
            prompts,
        })
    }

    pub fn pool(&self) -> Result<ExpertPool, CliError> {
        let dir = self
            .config
            .pool_dir
            .clone()
            .unwrap_or_else(shipped_pool_dir);
        let pool = if self.config.pool_dir.is_some() {
            ExpertPool::load_any(&dir)
        } else {
            ExpertPool::load(&dir)
        };
        pool.map_err(|e| CliError::Config(e.to_string()))
    }

    pub fn agent_context(&self) -> crate::structured::AgentContext<'_> {
        crate::structured::AgentContext::new(self.chat.as_ref(), &self.prompts)
            .with_max_repairs(self.config.max_repairs)
            .with_temperature(self.config.temperature)
            .with_concurrency(self.config.concurrency_cap)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn scripted_minimal_and_relative_paths() {
        let cfg = RunConfig::from_toml(
            "backend = \"scripted\"\nfixtures_dir = \"fx\"\n",
            Path::new("/base"),
        )
        .unwrap();
        assert_eq!(cfg.fixtures_dir.as_deref(), Some(Path::new("/base/fx")));
        assert_eq!(
            (cfg.concurrency_cap, cfg.max_repairs, cfg.turn_count),
            (4, 2, 10)
        );
        assert_eq!(cfg.pair_embedding, PairEmbedding::Concat);
    }

    #[test]
    fn mode_required_fields() {
        for bad in [
            "backend = \"http\"\n",
            "backend = \"scripted\"\n",
            "backend = \"scripted\"\nfixtures_dir = \"f\"\nconcurrency_cap = 0\n",
            "backend = \"scripted\"\nfixtures_dir = \"f\"\nembedding = \"remote\"\n",
            "backend = \"scripted\"\nfixtures_dir = \"f\"\napi_key = \"secret\"\n",
            "backend = \"grpc\"\n",
        ] {
            assert!(
                matches!(
                    RunConfig::from_toml(bad, Path::new(".")),
                    Err(CliError::Config(_))
                ),
                "{bad}"
            );
        }
    }
}
