//! Run configuration, read from TOML or JSON (chosen by file extension).

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::codebleu::CodeBleuParams;
use crate::embedding::{EmbedderBackend, FileEmbedder, HashEmbedder, MaskPolicy};
use crate::error::{Error, Result};
use crate::lexical::{BleuParams, ChrfParams};
use crate::metastats::MetaParams;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CrystalParams {
    /// Size of the trivial n-gram set.
    pub k: usize,
}

impl Default for CrystalParams {
    fn default() -> Self {
        CrystalParams { k: 50 }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum BackendConfig {
    /// No embedding backend; embedding metrics cannot be selected.
    #[default]
    None,
    Hash {
        #[serde(default = "default_dim")]
        dim: usize,
        #[serde(default)]
        seed: u64,
        #[serde(default)]
        signed: bool,
    },
    File {
        dir: PathBuf,
    },
    Remote {
        url: String,
        #[serde(default = "default_pool")]
        pool: usize,
        #[serde(default = "default_timeout")]
        timeout_secs: u64,
    },
}

fn default_dim() -> usize {
    64
}

fn default_pool() -> usize {
    4
}

fn default_timeout() -> u64 {
    60
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EmbeddingConfig {
    pub backend: BackendConfig,
    /// Mask policy for the `cbs_*` metrics. `bertscore_f1` always keeps every token.
    pub mask: MaskPolicy,
    /// Embed the NL intent as a masked-out prefix of both snippets.
    pub context: bool,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    /// Metric ids to compute; empty selects every metric whose requirements are met.
    pub metrics: Vec<String>,
    pub bleu: BleuParams,
    pub crystal: CrystalParams,
    pub chrf: ChrfParams,
    pub codebleu: CodeBleuParams,
    pub embedding: EmbeddingConfig,
    pub meta: MetaParams,
    /// Worker threads for scoring; 0 uses all cores.
    pub jobs: usize,
    /// Recorded for provenance only.
    pub seed: u64,
    /// Replace a candidate containing a fenced code block by the block's contents.
    pub strip_fences: bool,
}

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        let parsed = match path.extension().and_then(|e| e.to_str()) {
            Some("toml") => Self::from_toml(&text),
            Some("json") => Self::from_json(&text),
            _ => {
                return Err(Error::Config(format!(
                    "{}: config must be .toml or .json",
                    path.display()
                )))
            }
        };
        parsed.map_err(|e| Error::Config(format!("{}: {e}", path.display())))
    }

    pub fn validate(&self) -> Result<()> {
        self.bleu.validate()?;
        self.codebleu.validate()?;
        self.meta.validate()?;
        if self.chrf.max_n == 0 || !(self.chrf.beta > 0.0) {
            return Err(Error::Config("chrf requires max_n >= 1 and beta > 0".into()));
        }
        Ok(())
    }
}

/// Instantiate the configured embedding backend, if any.
pub fn build_backend(config: &EmbeddingConfig) -> Result<Option<Box<dyn EmbedderBackend>>> {
    Ok(match &config.backend {
        BackendConfig::None => None,
        BackendConfig::Hash { dim, seed, signed } => {
            if *dim == 0 {
                return Err(Error::Config("embedding.backend.dim must be >= 1".into()));
            }
            Some(Box::new(HashEmbedder {
                dim: *dim,
                seed: *seed,
                signed: *signed,
                policy: config.mask,
            }))
        }
        BackendConfig::File { dir } => Some(Box::new(FileEmbedder::new(dir))),
        #[cfg(feature = "remote")]
        BackendConfig::Remote { url, pool, timeout_secs } => Some(Box::new(
            crate::embedding::RemoteEmbedder::new(
                url.clone(),
                *pool,
                std::time::Duration::from_secs(*timeout_secs),
            ),
        )),
        #[cfg(not(feature = "remote"))]
        BackendConfig::Remote { .. } => {
            return Err(Error::Config("this build has no remote embedding support".into()))
        }
    })
}
