//! On-disk cache of raw judge responses.
//!
//! One JSON file per judgment, named by a content hash of everything that
//! determines the remote call: judge model, realization, anchor system,
//! exact prompt bytes, and decoding options. Only the raw output and
//! log-probabilities are stored — scores are re-parsed on every run, so a
//! parser fix applies retroactively without re-querying.

use std::io::Write as _;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::model::JudgeSpec;

#[derive(Debug, Error)]
pub enum CacheError {
    #[error("could not create cache directory `{path}`: {source}")]
    CreateDir {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("could not read cache file `{path}`: {source}")]
    Read {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("could not write cache file `{path}`: {source}")]
    Write {
        path: PathBuf,
        source: std::io::Error,
    },
}

/// Decoding parameters sent with every request; part of the cache key.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecodingOptions {
    pub temperature: f64,
    pub max_tokens: u32,
    /// How many top log-probabilities to request for the first generated
    /// token; set only for the token-probability realization.
    pub top_logprobs: Option<u32>,
}

impl Default for DecodingOptions {
    fn default() -> Self {
        Self {
            temperature: 0.0,
            max_tokens: 512,
            top_logprobs: None,
        }
    }
}

/// What the cache stores per judgment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CacheEntry {
    pub raw_output: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub top_logprobs: Option<Vec<(String, f64)>>,
}

/// Content hash identifying one judgment request. Every field is length-
/// prefixed before hashing so no two field sequences can collide by
/// concatenation.
pub fn cache_key(judge: &JudgeSpec, prompt: &str, decoding: &DecodingOptions) -> String {
    let mut hasher = Sha256::new();
    let mut field = |bytes: &[u8]| {
        hasher.update((bytes.len() as u64).to_le_bytes());
        hasher.update(bytes);
    };
    field(judge.model.as_str().as_bytes());
    field(judge.realization.tag().as_bytes());
    field(
        judge
            .realization
            .anchor_system()
            .map(|s| s.as_str())
            .unwrap_or("")
            .as_bytes(),
    );
    field(prompt.as_bytes());
    field(&decoding.temperature.to_le_bytes());
    field(&decoding.max_tokens.to_le_bytes());
    match decoding.top_logprobs {
        Some(k) => field(&k.to_le_bytes()),
        None => field(b""),
    }
    hex::encode(hasher.finalize())
}

/// File-per-entry cache rooted at one directory.
#[derive(Debug, Clone)]
pub struct JudgmentCache {
    dir: PathBuf,
}

impl JudgmentCache {
    /// Open (creating if needed) a cache directory.
    pub fn open(dir: &Path) -> Result<Self, CacheError> {
        std::fs::create_dir_all(dir).map_err(|source| CacheError::CreateDir {
            path: dir.to_path_buf(),
            source,
        })?;
        Ok(Self {
            dir: dir.to_path_buf(),
        })
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    fn path_for(&self, key: &str) -> PathBuf {
        self.dir.join(format!("{key}.json"))
    }

    /// Look up an entry. A corrupt file (interrupted write from a crashed
    /// run) reads as a miss and will be overwritten by the next store.
    pub fn read(&self, key: &str) -> Result<Option<CacheEntry>, CacheError> {
        let path = self.path_for(key);
        let bytes = match std::fs::read(&path) {
            Ok(bytes) => bytes,
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => return Ok(None),
            Err(source) => return Err(CacheError::Read { path, source }),
        };
        Ok(serde_json::from_slice(&bytes).ok())
    }

    /// Store an entry atomically: write to a temp file in the same
    /// directory, then rename over the final path.
    pub fn write(&self, key: &str, entry: &CacheEntry) -> Result<(), CacheError> {
        let path = self.path_for(key);
        let wrap = |source: std::io::Error| CacheError::Write {
            path: path.clone(),
            source,
        };
        let mut tmp = tempfile::NamedTempFile::new_in(&self.dir).map_err(wrap)?;
        let bytes = serde_json::to_vec(entry).expect("cache entries serialize");
        tmp.write_all(&bytes).map_err(wrap)?;
        tmp.persist(&path).map_err(|e| wrap(e.error))?;
        Ok(())
    }
}
