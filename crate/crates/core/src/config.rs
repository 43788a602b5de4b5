//! Run configuration: one TOML document describing data paths, the judge
//! roster with endpoint bindings, and analysis settings.
//!
//! Secrets never live in the file — a judge entry names the environment
//! variable holding its API key, and the key is read from the process
//! environment at call time.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::time::Duration;

use serde::Deserialize;
use thiserror::Error;

use crate::aggregate::AggregationMethod;
use crate::behavior::WeightScheme;
use crate::bt::BtConfig;
use crate::ids::{JudgeModelId, SystemId};
use crate::judge::cache::DecodingOptions;
use crate::judge::client::RetryPolicy;
use crate::model::{JudgeSpec, ModelError, Realization};

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("could not read config file `{path}`: {source}")]
    Read {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("could not parse config file `{path}`: {source}")]
    Parse {
        path: PathBuf,
        #[source]
        source: Box<toml::de::Error>,
    },
    #[error("judge entry {index}: {source}")]
    BadJudge {
        index: usize,
        #[source]
        source: ModelError,
    },
    #[error("judge entry {index} ({model}): {problem}")]
    JudgeProblem {
        index: usize,
        model: String,
        problem: String,
    },
    #[error("unknown aggregation method `{0}` (expected mean, median, winrate, or bt)")]
    UnknownAggregation(String),
    #[error("unknown weight scheme `{0}` (expected distance_from_half or uniform)")]
    UnknownWeightScheme(String),
    #[error("aggregation list is empty")]
    NoAggregations,
    #[error("invalid id in config: {0}")]
    BadId(String),
}

/// Where the pipeline reads and writes. Relative paths are resolved against
/// the config file's directory.
#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PathsConfig {
    /// Line-delimited response records.
    pub responses: PathBuf,
    /// Line-delimited human battle records.
    pub battles: PathBuf,
    /// Directory of per-judge judgment files (collect writes, analyses read).
    pub judgments_dir: PathBuf,
    /// Raw-response cache directory.
    pub cache_dir: PathBuf,
    /// Where reports and tables go.
    pub output_dir: PathBuf,
}

/// One judge roster entry: which model, scored how, reached where.
#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct JudgeEntry {
    pub model: String,
    /// One of: numeric, likert, token_probs, anchor, reward.
    pub realization: String,
    /// Required iff `realization = "anchor"`.
    #[serde(default)]
    pub anchor_system: Option<String>,
    /// Full chat-completions URL. Required for collection except for reward
    /// judges, whose scores arrive as precomputed judgment files.
    #[serde(default)]
    pub endpoint: Option<String>,
    /// Name of the environment variable holding the API key. The key itself
    /// must not appear in this file.
    #[serde(default)]
    pub api_key_env: Option<String>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BootstrapSettings {
    pub n_resamples: usize,
    pub confidence: f64,
}

impl Default for BootstrapSettings {
    fn default() -> Self {
        Self {
            n_resamples: 1000,
            confidence: 0.95,
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GoldSettings {
    /// Keep only battles carrying all of these tags (empty = keep all).
    #[serde(default)]
    pub tag_filter: Vec<String>,
    /// Minimum non-tied battles for a pair to enter the gold win-rate table.
    pub min_nontied: usize,
}

impl Default for GoldSettings {
    fn default() -> Self {
        Self {
            tag_filter: Vec::new(),
            min_nontied: 30,
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RetrySettings {
    pub max_attempts: u32,
    pub base_delay_ms: u64,
    pub max_delay_ms: u64,
    pub timeout_secs: u64,
}

impl Default for RetrySettings {
    fn default() -> Self {
        let policy = RetryPolicy::default();
        Self {
            max_attempts: policy.max_attempts,
            base_delay_ms: policy.base_delay_ms,
            max_delay_ms: policy.max_delay_ms,
            timeout_secs: 120,
        }
    }
}

impl RetrySettings {
    pub fn policy(&self) -> RetryPolicy {
        RetryPolicy {
            max_attempts: self.max_attempts,
            base_delay_ms: self.base_delay_ms,
            max_delay_ms: self.max_delay_ms,
        }
    }

    pub fn timeout(&self) -> Duration {
        Duration::from_secs(self.timeout_secs)
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DecodingSettings {
    pub temperature: f64,
    pub max_tokens: u32,
}

impl Default for DecodingSettings {
    fn default() -> Self {
        let d = DecodingOptions::default();
        Self {
            temperature: d.temperature,
            max_tokens: d.max_tokens,
        }
    }
}

impl DecodingSettings {
    pub fn options(&self) -> DecodingOptions {
        DecodingOptions {
            temperature: self.temperature,
            max_tokens: self.max_tokens,
            top_logprobs: None,
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct BtSettings {
    pub max_iterations: usize,
    pub tolerance: f64,
    /// "half_win_each" or "exclude".
    pub tie_policy: crate::bt::TiePolicy,
}

impl Default for BtSettings {
    fn default() -> Self {
        let c = BtConfig::default();
        Self {
            max_iterations: c.max_iterations,
            tolerance: c.tolerance,
            tie_policy: c.tie_policy,
        }
    }
}

impl BtSettings {
    pub fn config(&self) -> BtConfig {
        BtConfig {
            max_iterations: self.max_iterations,
            tolerance: self.tolerance,
            tie_policy: self.tie_policy,
        }
    }
}

/// Synthetic-world settings for the `synth` command.
#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SynthSettings {
    pub n_systems: usize,
    pub n_instructions: usize,
    /// Gap between the strongest and weakest true strength.
    pub strength_spread: f64,
    /// Human battles sampled per unordered system pair.
    pub battles_per_pair: usize,
    /// Synthetic judges to score the world with. Empty = a default trio
    /// (faithful, decisive, noisy).
    pub judges: Vec<SynthJudgeEntry>,
}

impl Default for SynthSettings {
    fn default() -> Self {
        Self {
            n_systems: 8,
            n_instructions: 200,
            strength_spread: 2.0,
            battles_per_pair: 50,
            judges: Vec::new(),
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SynthJudgeEntry {
    pub model: String,
    /// Decisiveness the judge should exhibit (1.0 = faithful to gold).
    #[serde(default = "default_alpha")]
    pub true_alpha: f64,
    /// Standard deviation of extra per-cell score noise.
    #[serde(default)]
    pub noise_std: f64,
    /// Per-system win-probability shift, system id -> shift.
    #[serde(default)]
    pub bias: BTreeMap<String, f64>,
    /// Overrides the seed derived from the run seed and roster position.
    #[serde(default)]
    pub seed: Option<u64>,
}

fn default_alpha() -> f64 {
    1.0
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    #[serde(default)]
    seed: u64,
    #[serde(default = "default_jobs")]
    jobs: usize,
    paths: PathsConfig,
    #[serde(default)]
    judges: Vec<JudgeEntry>,
    /// Aggregation method names: mean, median, winrate, bt.
    #[serde(default = "default_aggregations")]
    aggregations: Vec<String>,
    #[serde(default)]
    bootstrap: BootstrapSettings,
    #[serde(default)]
    gold: GoldSettings,
    #[serde(default)]
    retry: RetrySettings,
    #[serde(default)]
    decoding: DecodingSettings,
    #[serde(default)]
    bt: BtSettings,
    /// "distance_from_half" (default) or "uniform".
    #[serde(default = "default_weight_scheme")]
    weight_scheme: String,
    /// Judge model -> the ranked system built on that model, for self-bias.
    #[serde(default)]
    self_link: BTreeMap<String, String>,
    #[serde(default)]
    synth: SynthSettings,
}

fn default_jobs() -> usize {
    4
}

fn default_aggregations() -> Vec<String> {
    ["mean", "median", "winrate", "bt"]
        .iter()
        .map(|s| (*s).to_owned())
        .collect()
}

fn default_weight_scheme() -> String {
    "distance_from_half".to_owned()
}

/// A fully validated run configuration with resolved paths and typed judges.
#[derive(Debug, Clone)]
pub struct RunConfig {
    pub seed: u64,
    pub jobs: usize,
    pub paths: PathsConfig,
    pub judges: Vec<ConfiguredJudge>,
    pub aggregations: Vec<AggregationMethod>,
    pub bootstrap: BootstrapSettings,
    pub gold: GoldSettings,
    pub retry: RetrySettings,
    pub decoding: DecodingSettings,
    pub bt: BtConfig,
    pub weight_scheme: WeightScheme,
    pub self_link: BTreeMap<JudgeModelId, SystemId>,
    pub synth: SynthSettings,
}

/// A roster entry after validation: the typed judge plus its endpoint.
#[derive(Debug, Clone)]
pub struct ConfiguredJudge {
    pub spec: JudgeSpec,
    pub endpoint: Option<String>,
    pub api_key_env: Option<String>,
}

impl RunConfig {
    /// Load and validate a TOML config file. Relative paths inside it are
    /// resolved against the file's own directory.
    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Read {
            path: path.to_path_buf(),
            source,
        })?;
        let raw: RawConfig = toml::from_str(&text).map_err(|source| ConfigError::Parse {
            path: path.to_path_buf(),
            source: Box::new(source),
        })?;
        let base = path.parent().unwrap_or_else(|| Path::new("."));
        Self::from_raw(raw, base)
    }

    /// A default configuration rooted at `dir`, for commands that can run
    /// without a config file (notably `synth`).
    pub fn default_in(dir: &Path) -> Self {
        let raw = RawConfig {
            seed: 0,
            jobs: default_jobs(),
            paths: PathsConfig {
                responses: PathBuf::from("responses.jsonl"),
                battles: PathBuf::from("battles.jsonl"),
                judgments_dir: PathBuf::from("judgments"),
                cache_dir: PathBuf::from("cache"),
                output_dir: PathBuf::from("out"),
            },
            judges: Vec::new(),
            aggregations: default_aggregations(),
            bootstrap: BootstrapSettings::default(),
            gold: GoldSettings::default(),
            retry: RetrySettings::default(),
            decoding: DecodingSettings::default(),
            bt: BtSettings::default(),
            weight_scheme: default_weight_scheme(),
            self_link: BTreeMap::new(),
            synth: SynthSettings::default(),
        };
        Self::from_raw(raw, dir).expect("the built-in default config is valid")
    }

    fn from_raw(raw: RawConfig, base: &Path) -> Result<Self, ConfigError> {
        let paths = PathsConfig {
            responses: resolve(base, raw.paths.responses),
            battles: resolve(base, raw.paths.battles),
            judgments_dir: resolve(base, raw.paths.judgments_dir),
            cache_dir: resolve(base, raw.paths.cache_dir),
            output_dir: resolve(base, raw.paths.output_dir),
        };

        let mut judges = Vec::with_capacity(raw.judges.len());
        for (index, entry) in raw.judges.into_iter().enumerate() {
            let model = JudgeModelId::new(&entry.model)
                .map_err(|e| ConfigError::BadId(e.to_string()))?;
            let anchor = entry
                .anchor_system
                .as_deref()
                .map(SystemId::new)
                .transpose()
                .map_err(|e| ConfigError::BadId(e.to_string()))?;
            let realization = Realization::from_parts(&entry.realization, anchor)
                .map_err(|source| ConfigError::BadJudge { index, source })?;
            if matches!(realization, Realization::Reward) && entry.endpoint.is_some() {
                return Err(ConfigError::JudgeProblem {
                    index,
                    model: entry.model.clone(),
                    problem: "reward judges are loaded from judgment files and take no endpoint"
                        .to_owned(),
                });
            }
            judges.push(ConfiguredJudge {
                spec: JudgeSpec::new(model, realization),
                endpoint: entry.endpoint,
                api_key_env: entry.api_key_env,
            });
        }

        if raw.aggregations.is_empty() {
            return Err(ConfigError::NoAggregations);
        }
        let bt = raw.bt.config();
        let aggregations = raw
            .aggregations
            .iter()
            .map(|name| {
                AggregationMethod::from_name(name, bt)
                    .ok_or_else(|| ConfigError::UnknownAggregation(name.clone()))
            })
            .collect::<Result<Vec<_>, _>>()?;

        let weight_scheme = match raw.weight_scheme.as_str() {
            "distance_from_half" => WeightScheme::DistanceFromHalf,
            "uniform" => WeightScheme::Uniform,
            other => return Err(ConfigError::UnknownWeightScheme(other.to_owned())),
        };

        let mut self_link = BTreeMap::new();
        for (model, system) in raw.self_link {
            let model = JudgeModelId::new(&model).map_err(|e| ConfigError::BadId(e.to_string()))?;
            let system = SystemId::new(&system).map_err(|e| ConfigError::BadId(e.to_string()))?;
            self_link.insert(model, system);
        }

        Ok(Self {
            seed: raw.seed,
            jobs: raw.jobs.max(1),
            paths,
            judges,
            aggregations,
            bootstrap: raw.bootstrap,
            gold: raw.gold,
            retry: raw.retry,
            decoding: raw.decoding,
            bt,
            weight_scheme,
            self_link,
            synth: raw.synth,
        })
    }
}

fn resolve(base: &Path, path: PathBuf) -> PathBuf {
    if path.is_absolute() {
        path
    } else {
        base.join(path)
    }
}
