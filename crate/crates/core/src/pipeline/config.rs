use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::PipelineError;
use crate::heuristics::{default_rules, load_rules, FilterRule, HeuristicId, Selector, DEFAULT_ABOUT_TOKENS};
use crate::ingest::{IngestConfig, UrlNormalizer};
use crate::llm::{ClientConfig, PromptVariant};
use crate::tokens::{Prices, TokenCounter};

/// Which embedding provider scores BERTScore during `evaluate`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EmbeddingKind {
    /// Seeded per-token vectors; offline and deterministic.
    Hash,
    /// `POST {base_url}/embeddings`.
    Http,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EmbeddingConfig {
    pub provider: EmbeddingKind,
    pub dimension: usize,
    pub client: ClientConfig,
}

impl Default for EmbeddingConfig {
    fn default() -> Self {
        EmbeddingConfig {
            provider: EmbeddingKind::Hash,
            dimension: 64,
            client: ClientConfig { model_name: "bert-base-cased".into(), ..ClientConfig::default() },
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    pub input_dir: PathBuf,
    pub output_dir: PathBuf,
    pub heuristic: HeuristicId,
    pub prompt_variant: PromptVariant,
    pub client: ClientConfig,
    pub tokenizer_path: Option<PathBuf>,
    pub prices: Prices,
    pub filter_rules_path: Option<PathBuf>,
    pub worker_count: usize,
    /// Pages with fewer body characters are rejected at ingest.
    pub min_chars: usize,
    /// Query parameters dropped during URL normalization, on top of
    /// `utm_*`, `fbclid` and `gclid`.
    pub tracking_params: Vec<String>,
    pub about_tokens: Vec<String>,
    /// Selected content is cut to this many tokens before prompting.
    pub max_content_tokens: usize,
    /// Human reference titles/abstracts for `evaluate`.
    pub reference_path: Option<PathBuf>,
    pub embeddings: EmbeddingConfig,
    /// How many top-ranked combinations `evaluate` shortlists; 0 keeps all
    /// combinations tied at the best score.
    pub shortlist: usize,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig {
            input_dir: PathBuf::from("warcs"),
            output_dir: PathBuf::from("out"),
            heuristic: HeuristicId::ShortestUrl,
            prompt_variant: PromptVariant::Rules,
            client: ClientConfig::default(),
            tokenizer_path: None,
            prices: Prices::default(),
            filter_rules_path: None,
            worker_count: std::thread::available_parallelism().map_or(1, |n| n.get()),
            min_chars: 30,
            tracking_params: Vec::new(),
            about_tokens: DEFAULT_ABOUT_TOKENS.iter().map(|t| t.to_string()).collect(),
            max_content_tokens: 8_000,
            reference_path: None,
            embeddings: EmbeddingConfig::default(),
            shortlist: 0,
        }
    }
}

impl PipelineConfig {
    /// Reads a TOML file; relative paths inside it resolve against the file's
    /// directory.
    pub fn load(path: &Path) -> Result<Self, PipelineError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| PipelineError::Config(format!("{}: {e}", path.display())))?;
        let mut cfg: PipelineConfig =
            toml::from_str(&text).map_err(|e| PipelineError::Config(format!("{}: {e}", path.display())))?;
        if let Some(base) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
            cfg.resolve_relative_to(base);
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn resolve_relative_to(&mut self, base: &Path) {
        let fix = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        fix(&mut self.input_dir);
        fix(&mut self.output_dir);
        for p in [&mut self.tokenizer_path, &mut self.filter_rules_path, &mut self.reference_path].into_iter().flatten() {
            fix(p);
        }
    }

    pub fn validate(&self) -> Result<(), PipelineError> {
        if self.worker_count == 0 {
            return Err(PipelineError::Config("worker_count must be at least 1".into()));
        }
        if self.max_content_tokens == 0 {
            return Err(PipelineError::Config("max_content_tokens must be at least 1".into()));
        }
        if self.prices.price_per_million_input.is_negative() || self.prices.price_per_million_output.is_negative() {
            return Err(PipelineError::Config("prices must be nonnegative".into()));
        }
        for (key, path) in [("tokenizer_path", &self.tokenizer_path), ("filter_rules_path", &self.filter_rules_path)] {
            if let Some(p) = path {
                if !p.is_file() {
                    return Err(PipelineError::Config(format!("{key} {} is not a readable file", p.display())));
                }
            }
        }
        self.client.validate()?;
        Ok(())
    }

    pub fn ingest_config(&self) -> IngestConfig {
        IngestConfig { min_chars: self.min_chars, normalizer: UrlNormalizer::with_tracking_params(&self.tracking_params) }
    }

    pub fn filter_rules(&self) -> Result<Vec<FilterRule>, PipelineError> {
        Ok(match &self.filter_rules_path {
            Some(p) => load_rules(p)?,
            None => default_rules(),
        })
    }

    pub fn selector(&self) -> Result<Selector, PipelineError> {
        Ok(Selector::new(self.about_tokens.clone(), self.filter_rules()?))
    }

    pub fn token_counter(&self) -> Result<TokenCounter, PipelineError> {
        Ok(TokenCounter::from_optional_path(self.tokenizer_path.as_deref())?)
    }

    /// Hex SHA-256 of the canonical JSON form of the config.
    pub fn digest(&self) -> String {
        let json = serde_json::to_vec(self).expect("config serializes");
        Sha256::digest(&json).iter().map(|b| format!("{b:02x}")).collect()
    }
}
