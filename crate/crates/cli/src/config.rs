//! Config file plus flag overrides, and provider construction from specs.
//!
//! ```toml
//! seed = 3407
//! workers = 4
//! format = "table"
//! embedder = "http"            # or "fallback", "fallback:512", a provider file
//! chat = "http"                # or "mock:<policy>", a provider file
//!
//! [embedding_provider]
//! endpoint = "http://localhost:8080/v1/embeddings"
//! model_name = "bge-large-en"
//! dim = 1024
//! api_key_env = "EMBED_API_KEY"
//!
//! [chat_provider]
//! endpoint = "http://localhost:8081/v1/chat/completions"
//! model_name = "llama-3.2-3b-frames"
//!
//! [prompt]
//! mode = "zero_shot"
//! token_budget = 2048
//!
//! [signature_rules]
//! class_properties = ["P31"]
//! ```

use std::path::{Path, PathBuf};

use framescout::datasetops::GroupedExample;
use framescout::embedding::{
    Embedder, EmbeddingProviderConfig, FallbackEmbedder, HttpEmbedder, DEFAULT_FALLBACK_DIM, DEFAULT_SEED,
};
use framescout::identifier::{
    ChatProvider, ChatProviderConfig, HttpChatProvider, MockChatProvider, MockPolicy, PromptConfig, DEFAULT_WORKERS,
};
use framescout::lcq2f::SignatureRules;
use serde::de::DeserializeOwned;
use serde::Deserialize;

use crate::error::{CliError, CliResult};
use crate::output::Format;

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConfigFile {
    pub seed: Option<u64>,
    pub workers: Option<usize>,
    pub format: Option<Format>,
    pub embedder: Option<String>,
    pub chat: Option<String>,
    pub embedding_provider: Option<EmbeddingProviderConfig>,
    pub chat_provider: Option<ChatProviderConfig>,
    pub prompt: Option<PromptConfig>,
    pub signature_rules: Option<SignatureRules>,
}

fn read_toml<T: DeserializeOwned>(path: &Path) -> CliResult<T> {
    let text = std::fs::read_to_string(path).map_err(|e| framescout::Error::io(path, e))?;
    toml::from_str(&text).map_err(|e| CliError::Config {
        path: path.to_path_buf(),
        message: e.to_string(),
    })
}

/// Flag values; `None` falls back to the config file, then to defaults.
#[derive(Debug, Default, Clone)]
pub struct Overrides {
    pub config: Option<PathBuf>,
    pub seed: Option<u64>,
    pub workers: Option<usize>,
    pub format: Option<Format>,
    pub embedder: Option<String>,
}

#[derive(Debug)]
pub struct Settings {
    pub config_sha256: Option<String>,
    pub seed: u64,
    pub workers: usize,
    pub format: Format,
    pub embedder: String,
    pub chat: Option<String>,
    pub embedding_provider: Option<EmbeddingProviderConfig>,
    pub chat_provider: Option<ChatProviderConfig>,
    pub prompt: PromptConfig,
    pub signature_rules: SignatureRules,
}

impl Settings {
    pub fn resolve(flags: &Overrides) -> CliResult<Self> {
        let (file, config_sha256) = match &flags.config {
            Some(path) => (read_toml::<ConfigFile>(path)?, Some(framescout::jsonl::file_sha256(path)?)),
            None => (ConfigFile::default(), None),
        };
        let workers = flags.workers.or(file.workers).unwrap_or(DEFAULT_WORKERS);
        if workers == 0 {
            return Err(CliError::Usage("--workers must be at least 1".into()));
        }
        Ok(Self {
            config_sha256,
            seed: flags.seed.or(file.seed).unwrap_or(DEFAULT_SEED),
            workers,
            format: flags.format.or(file.format).unwrap_or_default(),
            embedder: flags
                .embedder
                .clone()
                .or(file.embedder)
                .unwrap_or_else(|| "fallback".into()),
            chat: file.chat,
            embedding_provider: file.embedding_provider,
            chat_provider: file.chat_provider,
            prompt: file.prompt.unwrap_or_default(),
            signature_rules: file.signature_rules.unwrap_or_default(),
        })
    }

    /// `fallback`, `fallback:<dim>`, `http` (the config's provider table) or a
    /// provider file.
    pub fn embedder(&self) -> CliResult<Box<dyn Embedder>> {
        let choice = self.embedder.as_str();
        if let Some(rest) = choice.strip_prefix("fallback") {
            let dim = match rest.strip_prefix(':') {
                Some(d) => d
                    .parse()
                    .map_err(|_| CliError::Usage(format!("bad fallback dimension in {choice:?}")))?,
                None if rest.is_empty() => DEFAULT_FALLBACK_DIM,
                None => return Err(CliError::Usage(format!("unknown embedder {choice:?}"))),
            };
            return Ok(Box::new(FallbackEmbedder::new(dim, self.seed)?));
        }
        let config = if choice == "http" {
            self.embedding_provider
                .clone()
                .ok_or_else(|| CliError::Usage("embedder \"http\" needs an [embedding_provider] table".into()))?
        } else {
            read_toml(Path::new(choice))?
        };
        Ok(Box::new(HttpEmbedder::new(config)?))
    }

    /// `mock:<policy>`, `http` (the config's provider table) or a provider file.
    /// Gold-based mocks answer from `gold`.
    pub fn chat(&self, flag: Option<&str>, gold: &[GroupedExample]) -> CliResult<Box<dyn ChatProvider>> {
        let choice = flag
            .or(self.chat.as_deref())
            .ok_or_else(|| CliError::Usage("no chat provider: pass --chat or set `chat` in the config".into()))?;
        if let Some(policy) = choice.strip_prefix("mock:") {
            let policy: MockPolicy = policy.parse()?;
            if policy.needs_gold() && gold.is_empty() {
                return Err(CliError::Usage(format!(
                    "mock:{} needs gold frames; pass --dataset",
                    policy.as_str()
                )));
            }
            return Ok(Box::new(MockChatProvider::with_gold(policy, gold)));
        }
        let config = if choice == "http" {
            self.chat_provider
                .clone()
                .ok_or_else(|| CliError::Usage("chat \"http\" needs a [chat_provider] table".into()))?
        } else {
            read_toml(Path::new(choice))?
        };
        Ok(Box::new(HttpChatProvider::new(config)?))
    }
}
