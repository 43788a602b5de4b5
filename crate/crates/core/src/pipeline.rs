//! End-to-end pipeline stages behind the CLI: collect judgments, rank
//! judges against the gold reference, characterize judge behavior, report,
//! and generate synthetic fixtures.
//!
//! Stages are independently runnable and communicate only through files, so
//! expensive judgment collection stays decoupled from free re-analysis.
//! Every output is deterministic for fixed inputs and seeds: tables are
//! sorted, floats use shortest round-trip formatting, and nothing embeds a
//! timestamp.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use thiserror::Error;

use crate::aggregate::{aggregate, AggregationMethod};
use crate::behavior::{
    beta_cdf, fit_decisiveness, self_bias, system_bias, BetaFit, BiasReport, SelfBiasRow,
};
use crate::config::{RunConfig, SynthJudgeEntry};
use crate::data::{self, DataError, JudgmentRecord, ResponseRecord};
use crate::gold::{default_elo_display, GoldError, GoldReference};
use crate::ids::SystemId;
use crate::judge::cache::{CacheError, JudgmentCache};
use crate::judge::client::HttpChatClient;
use crate::judge::collect::{collect_judgments, CollectOptions, CollectOutcome, JudgeError};
use crate::matrix::{MatrixError, ScoreMatrix};
use crate::metrics::{
    bootstrap_tau_ci, judge_winrates, kendall_tau, score_distribution, winrate_accuracy,
    winrate_mse, Histogram, MetricsError,
};
use crate::model::{AggregationLabel, JudgeSpec, ModelError, Realization};
use crate::synth::{generate_judge_scores, generate_world, SynthError, SyntheticJudgeSpec, WorldConfig};

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error(transparent)]
    Data(#[from] DataError),
    #[error(transparent)]
    Gold(#[from] GoldError),
    #[error(transparent)]
    Matrix(#[from] MatrixError),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Synth(#[from] SynthError),
    #[error(transparent)]
    Cache(#[from] CacheError),
    #[error("metrics failure: {0}")]
    Metrics(#[from] MetricsError),
    #[error("no judgment files (*.jsonl) found in `{0}`")]
    NoJudgments(PathBuf),
    #[error("judge roster is empty; add [[judges]] entries to the config")]
    EmptyRoster,
    #[error("two roster entries resolve to the same judgment file `{0}`")]
    DuplicateJudge(String),
    #[error("could not access `{path}`: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("could not write csv `{path}`: {source}")]
    Csv {
        path: PathBuf,
        #[source]
        source: csv::Error,
    },
    #[error("{0}")]
    Invalid(String),
}

// ---------------------------------------------------------------------------
// Shared helpers
// ---------------------------------------------------------------------------

/// Filesystem-safe stem identifying one judge's outputs.
pub fn judge_file_stem(judge: &JudgeSpec) -> String {
    let mut stem = format!(
        "{}__{}",
        sanitize_component(judge.model.as_str()),
        judge.realization.tag()
    );
    if let Some(anchor) = judge.realization.anchor_system() {
        stem.push_str("__anchor-");
        stem.push_str(&sanitize_component(anchor.as_str()));
    }
    stem
}

fn sanitize_component(s: &str) -> String {
    s.chars()
        .map(|c| {
            if c.is_ascii_alphanumeric() || matches!(c, '.' | '_' | '-') {
                c
            } else {
                '-'
            }
        })
        .collect()
}

fn io_err(path: &Path) -> impl Fn(std::io::Error) -> PipelineError + '_ {
    move |source| PipelineError::Io {
        path: path.to_path_buf(),
        source,
    }
}

fn write_csv(path: &Path, header: &[&str], rows: &[Vec<String>]) -> Result<(), PipelineError> {
    let csv_err = |source| PipelineError::Csv {
        path: path.to_path_buf(),
        source,
    };
    let mut writer = csv::Writer::from_path(path).map_err(csv_err)?;
    writer.write_record(header).map_err(csv_err)?;
    for row in rows {
        writer.write_record(row).map_err(csv_err)?;
    }
    writer.flush().map_err(io_err(path))?;
    Ok(())
}

fn fmt_f64(v: f64) -> String {
    v.to_string()
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map(fmt_f64).unwrap_or_default()
}

/// Load every judgment file in `dir` (sorted by name) and build one score
/// matrix per judge, grouping records across files.
fn load_judgment_matrices(dir: &Path) -> Result<Vec<ScoreMatrix>, PipelineError> {
    let mut files: Vec<PathBuf> = fs::read_dir(dir)
        .map_err(io_err(dir))?
        .collect::<Result<Vec<_>, _>>()
        .map_err(io_err(dir))?
        .into_iter()
        .map(|entry| entry.path())
        .filter(|path| path.extension().is_some_and(|e| e == "jsonl"))
        .collect();
    files.sort();
    if files.is_empty() {
        return Err(PipelineError::NoJudgments(dir.to_path_buf()));
    }
    let mut by_judge: BTreeMap<JudgeSpec, Vec<JudgmentRecord>> = BTreeMap::new();
    for file in &files {
        for record in data::load_judgments(file)? {
            let spec = record.judge_spec()?;
            by_judge.entry(spec).or_default().push(record);
        }
    }
    by_judge
        .into_values()
        .map(|records| ScoreMatrix::from_judgments(&records).map_err(PipelineError::from))
        .collect()
}

fn weight_scheme_name(scheme: crate::behavior::WeightScheme) -> &'static str {
    match scheme {
        crate::behavior::WeightScheme::DistanceFromHalf => "distance_from_half",
        crate::behavior::WeightScheme::Uniform => "uniform",
    }
}

// ---------------------------------------------------------------------------
// collect
// ---------------------------------------------------------------------------

/// What happened to one roster entry during collection.
#[derive(Debug)]
pub enum JudgeCollectStatus {
    /// Judged; judgments written to the contained path.
    Collected {
        path: PathBuf,
        n_records: usize,
        n_scored: usize,
        n_cache_hits: usize,
        n_remote_calls: usize,
        n_parse_failures: usize,
        failures: Vec<String>,
    },
    /// Not attempted, by design (e.g. reward judges are precomputed).
    Skipped(String),
    /// Attempted and failed; other judges continue.
    Failed(String),
}

#[derive(Debug)]
pub struct CollectRunReport {
    pub judges: Vec<(JudgeSpec, JudgeCollectStatus)>,
}

impl CollectRunReport {
    pub fn n_failed(&self) -> usize {
        self.judges
            .iter()
            .filter(|(_, s)| matches!(s, JudgeCollectStatus::Failed(_)))
            .count()
    }
}

/// Judge the whole corpus with every remote-backed roster entry, writing one
/// judgment file per judge. Per-judge failures never abort the run.
pub fn run_collect(config: &RunConfig) -> Result<CollectRunReport, PipelineError> {
    if config.judges.is_empty() {
        return Err(PipelineError::EmptyRoster);
    }
    let mut stems: BTreeSet<String> = BTreeSet::new();
    for judge in &config.judges {
        if !stems.insert(judge_file_stem(&judge.spec)) {
            return Err(PipelineError::DuplicateJudge(judge_file_stem(&judge.spec)));
        }
    }

    let corpus = data::load_responses(&config.paths.responses)?;
    fs::create_dir_all(&config.paths.judgments_dir).map_err(io_err(&config.paths.judgments_dir))?;
    let cache = JudgmentCache::open(&config.paths.cache_dir)?;
    let options = CollectOptions {
        jobs: config.jobs,
        retry: config.retry.policy(),
        decoding: config.decoding.options(),
    };

    let mut results = Vec::with_capacity(config.judges.len());
    for judge in &config.judges {
        let status = if matches!(judge.spec.realization, Realization::Reward) {
            JudgeCollectStatus::Skipped(
                "reward judges are precomputed; place their judgment files in the judgments \
                 directory"
                    .to_owned(),
            )
        } else {
            match collect_one(judge, &corpus, &cache, &options, config) {
                Ok(status) => status,
                Err(e) => JudgeCollectStatus::Failed(e.to_string()),
            }
        };
        results.push((judge.spec.clone(), status));
    }
    Ok(CollectRunReport { judges: results })
}

fn collect_one(
    judge: &crate::config::ConfiguredJudge,
    corpus: &data::Corpus,
    cache: &JudgmentCache,
    options: &CollectOptions,
    config: &RunConfig,
) -> Result<JudgeCollectStatus, PipelineError> {
    let Some(endpoint) = &judge.endpoint else {
        return Ok(JudgeCollectStatus::Failed(
            "no endpoint configured for this judge".to_owned(),
        ));
    };
    let client = match HttpChatClient::new(
        endpoint,
        judge.api_key_env.as_deref().unwrap_or(""),
        config.retry.timeout(),
    ) {
        Ok(client) => client,
        Err(e) => return Ok(JudgeCollectStatus::Failed(e.to_string())),
    };
    let outcome: CollectOutcome =
        match collect_judgments(corpus, &judge.spec, &client, cache, options) {
            Ok(outcome) => outcome,
            Err(e @ (JudgeError::Fatal(_) | JudgeError::RewardNotCollectable)) => {
                return Ok(JudgeCollectStatus::Failed(e.to_string()))
            }
            Err(JudgeError::Cache(e)) => return Err(PipelineError::Cache(e)),
        };

    let path = config
        .paths
        .judgments_dir
        .join(format!("{}.jsonl", judge_file_stem(&judge.spec)));
    data::write_judgments(&path, &outcome.records)?;
    let n_scored = outcome
        .records
        .iter()
        .filter(|r| r.score.is_some())
        .count();
    Ok(JudgeCollectStatus::Collected {
        path,
        n_records: outcome.records.len(),
        n_scored,
        n_cache_hits: outcome.n_cache_hits,
        n_remote_calls: outcome.n_remote_calls,
        n_parse_failures: outcome.n_parse_failures,
        failures: outcome
            .failures
            .iter()
            .map(|f| {
                format!(
                    "{} / {}: {}",
                    f.instruction_id.as_str(),
                    f.system_id.as_str(),
                    f.reason
                )
            })
            .collect(),
    })
}

// ---------------------------------------------------------------------------
// rank
// ---------------------------------------------------------------------------

#[derive(Debug)]
pub struct RankOutcome {
    pub leaderboard: PathBuf,
    pub n_ranked_rows: usize,
    pub n_omitted_rows: usize,
    /// Judges that could not be ranked at all, with the reason.
    pub failed_judges: Vec<(JudgeSpec, String)>,
}

struct LeaderboardRow {
    judge: JudgeSpec,
    aggregation: AggregationLabel,
    n_overlap: usize,
    tau: Option<f64>,
    ci: Option<(f64, f64)>,
    acc: Option<f64>,
    n_pairs_acc: Option<usize>,
    mse: Option<f64>,
    reason: String,
}

/// Build the gold reference, score every judge × aggregation against it,
/// and write the leaderboard plus gold and per-judge tables.
pub fn run_rank(config: &RunConfig) -> Result<RankOutcome, PipelineError> {
    let battles = data::load_battles(&config.paths.battles, &config.gold.tag_filter)?;
    let gold = GoldReference::build(&battles, None, config.gold.min_nontied, &config.bt)?;
    let matrices = load_judgment_matrices(&config.paths.judgments_dir)?;
    let out = &config.paths.output_dir;
    fs::create_dir_all(out).map_err(io_err(out))?;
    let rankings_dir = out.join("rankings");
    fs::create_dir_all(&rankings_dir).map_err(io_err(&rankings_dir))?;

    write_gold_tables(out, &gold)?;
    write_overlap(out, &gold, &matrices)?;
    write_distributions(out, &matrices)?;

    let gold_systems: BTreeSet<SystemId> = gold.ranking.scores().keys().cloned().collect();
    let mut rows: Vec<LeaderboardRow> = Vec::new();
    let mut failed_judges = Vec::new();

    for matrix in &matrices {
        let judge = matrix.judge().clone();
        let judge_systems: BTreeSet<SystemId> = matrix.systems().iter().cloned().collect();
        let overlap: BTreeSet<SystemId> =
            judge_systems.intersection(&gold_systems).cloned().collect();
        if overlap.len() < 2 {
            let reason = format!(
                "insufficient overlap with the gold reference: {} shared systems (judge covers [{}], gold covers {} systems)",
                overlap.len(),
                matrix
                    .systems()
                    .iter()
                    .map(|s| s.as_str())
                    .collect::<Vec<_>>()
                    .join(", "),
                gold_systems.len(),
            );
            for method in &config.aggregations {
                rows.push(LeaderboardRow {
                    judge: judge.clone(),
                    aggregation: method.label(),
                    n_overlap: overlap.len(),
                    tau: None,
                    ci: None,
                    acc: None,
                    n_pairs_acc: None,
                    mse: None,
                    reason: reason.clone(),
                });
            }
            failed_judges.push((judge, reason));
            continue;
        }

        // Win-rate metrics are aggregation-independent: compute once.
        let eligible: BTreeSet<(SystemId, SystemId)> = gold
            .eligible_pairs
            .iter()
            .filter(|(a, b)| judge_systems.contains(a) && judge_systems.contains(b))
            .cloned()
            .collect();
        let (acc, n_pairs_acc, mse) = if eligible.is_empty() {
            (None, None, None)
        } else {
            let judge_table = judge_winrates(matrix, &eligible)?;
            let acc = match winrate_accuracy(&judge_table, &gold.winrates) {
                Ok(a) => Some(a),
                Err(MetricsError::NoDecidedPairs { .. } | MetricsError::EmptyIntersection) => None,
                Err(e) => return Err(e.into()),
            };
            let mse = match winrate_mse(&judge_table, &gold.winrates) {
                Ok(m) => Some(m),
                Err(MetricsError::EmptyIntersection) => None,
                Err(e) => return Err(e.into()),
            };
            (
                acc.as_ref().map(|a| a.accuracy),
                acc.as_ref().map(|a| a.n_pairs),
                mse,
            )
        };

        for method in &config.aggregations {
            let row = rank_one(
                matrix, &judge, method, &gold, &overlap, config, &rankings_dir,
            )?;
            rows.push(LeaderboardRow {
                acc,
                n_pairs_acc,
                mse,
                ..row
            });
        }
    }

    // Ranked rows first, tau descending; omitted rows last. Ties and
    // omissions order by (model, realization, aggregation) for stable output.
    rows.sort_by(|a, b| {
        match (&a.tau, &b.tau) {
            (Some(x), Some(y)) => y.total_cmp(x),
            (Some(_), None) => std::cmp::Ordering::Less,
            (None, Some(_)) => std::cmp::Ordering::Greater,
            (None, None) => std::cmp::Ordering::Equal,
        }
        .then_with(|| a.judge.cmp(&b.judge))
        .then_with(|| a.aggregation.as_str().cmp(b.aggregation.as_str()))
    });

    let leaderboard = out.join("leaderboard.csv");
    let csv_rows: Vec<Vec<String>> = rows
        .iter()
        .map(|r| {
            vec![
                r.judge.model.to_string(),
                r.judge.realization.tag().to_owned(),
                r.aggregation.as_str().to_owned(),
                r.n_overlap.to_string(),
                fmt_opt(r.tau),
                fmt_opt(r.ci.map(|c| c.0)),
                fmt_opt(r.ci.map(|c| c.1)),
                fmt_opt(r.acc),
                r.n_pairs_acc.map(|n| n.to_string()).unwrap_or_default(),
                fmt_opt(r.mse),
                r.reason.clone(),
            ]
        })
        .collect();
    write_csv(
        &leaderboard,
        &[
            "judge_model",
            "realization",
            "aggregation",
            "n_overlap",
            "tau",
            "ci_low",
            "ci_high",
            "acc_wr",
            "n_pairs_acc",
            "mse_wr",
            "reason",
        ],
        &csv_rows,
    )?;

    Ok(RankOutcome {
        leaderboard,
        n_ranked_rows: rows.iter().filter(|r| r.tau.is_some()).count(),
        n_omitted_rows: rows.iter().filter(|r| r.tau.is_none()).count(),
        failed_judges,
    })
}

/// One leaderboard row: aggregate, write the per-judge ranking, check the
/// median-degeneracy rule, then tau + bootstrap CI. Win-rate metric fields
/// are filled by the caller.
fn rank_one(
    matrix: &ScoreMatrix,
    judge: &JudgeSpec,
    method: &AggregationMethod,
    gold: &GoldReference,
    overlap: &BTreeSet<SystemId>,
    config: &RunConfig,
    rankings_dir: &Path,
) -> Result<LeaderboardRow, PipelineError> {
    let omitted = |reason: String| LeaderboardRow {
        judge: judge.clone(),
        aggregation: method.label(),
        n_overlap: overlap.len(),
        tau: None,
        ci: None,
        acc: None,
        n_pairs_acc: None,
        mse: None,
        reason,
    };

    let ranking = match aggregate(matrix, method) {
        Ok(r) => r,
        Err(e) => return Ok(omitted(e.to_string())),
    };

    let path = rankings_dir.join(format!(
        "{}__{}.csv",
        judge_file_stem(judge),
        method.label().as_str()
    ));
    let file = fs::File::create(&path).map_err(io_err(&path))?;
    ranking.write_csv(file).map_err(|e| PipelineError::Csv {
        path: path.clone(),
        source: e,
    })?;

    if method.label() == AggregationLabel::Median {
        if let Some(reason) = median_degeneracy(&ranking, overlap) {
            return Ok(omitted(reason));
        }
    }

    let tau = match kendall_tau(&ranking, &gold.ranking) {
        Ok(t) => t,
        Err(e @ (MetricsError::TauUndefined { .. } | MetricsError::InsufficientOverlap { .. })) => {
            return Ok(omitted(e.to_string()))
        }
        Err(e) => return Err(e.into()),
    };
    let ci = match bootstrap_tau_ci(
        matrix,
        method,
        &gold.ranking,
        config.bootstrap.n_resamples,
        config.bootstrap.confidence,
        config.seed,
    ) {
        Ok(ci) => Some((ci.low, ci.high)),
        Err(MetricsError::AllResamplesUndefined { .. }) => None,
        Err(e) => return Err(e.into()),
    };

    Ok(LeaderboardRow {
        judge: judge.clone(),
        aggregation: method.label(),
        n_overlap: overlap.len(),
        tau: Some(tau),
        ci,
        acc: None,
        n_pairs_acc: None,
        mse: None,
        reason: String::new(),
    })
}

/// Median "fails to separate the systems" when one score value swallows
/// more than half of the gold-overlapping systems; such rows are omitted
/// from the leaderboard with this reason.
fn median_degeneracy(ranking: &crate::model::RankingVector, overlap: &BTreeSet<SystemId>) -> Option<String> {
    let shared: Vec<f64> = ranking
        .scores()
        .iter()
        .filter(|(s, _)| overlap.contains(*s))
        .map(|(_, &v)| v)
        .collect();
    let n = shared.len();
    if n < 2 {
        return None;
    }
    let mut counts: BTreeMap<u64, usize> = BTreeMap::new();
    for v in &shared {
        *counts.entry(v.to_bits()).or_default() += 1;
    }
    let largest = counts.values().copied().max().unwrap_or(0);
    (2 * largest > n).then(|| {
        format!("median fails to separate the systems: {largest} of {n} overlapping systems share one aggregate score")
    })
}

fn write_gold_tables(out: &Path, gold: &GoldReference) -> Result<(), PipelineError> {
    let ranking_rows: Vec<Vec<String>> = gold
        .ranking
        .ranked_rows()
        .iter()
        .map(|row| {
            vec![
                row.system.to_string(),
                fmt_f64(row.score),
                fmt_f64(default_elo_display(row.score)),
                row.rank.to_string(),
                row.tied_group.to_string(),
            ]
        })
        .collect();
    write_csv(
        &out.join("gold_ranking.csv"),
        &["system_id", "log_strength", "elo", "rank", "tied_group_id"],
        &ranking_rows,
    )?;

    let path = out.join("gold_winrates.csv");
    let file = fs::File::create(&path).map_err(io_err(&path))?;
    gold.winrates
        .write_gold_csv(file)
        .map_err(|e| PipelineError::Csv {
            path: path.clone(),
            source: e,
        })?;

    let skipped_rows: Vec<Vec<String>> = gold
        .winrates
        .skipped_pairs()
        .map(|((a, b), reason)| vec![a.to_string(), b.to_string(), reason.to_string()])
        .collect();
    write_csv(
        &out.join("gold_skipped_pairs.csv"),
        &["system_a", "system_b", "reason"],
        &skipped_rows,
    )
}

/// Surface the judge/gold system overlap: one row per system in either
/// side's universe.
fn write_overlap(
    out: &Path,
    gold: &GoldReference,
    matrices: &[ScoreMatrix],
) -> Result<(), PipelineError> {
    let gold_systems: BTreeSet<SystemId> = gold.ranking.scores().keys().cloned().collect();
    let mut coverage: BTreeMap<SystemId, usize> = BTreeMap::new();
    for matrix in matrices {
        for system in matrix.systems() {
            *coverage.entry(system.clone()).or_default() += 1;
        }
    }
    let universe: BTreeSet<SystemId> = gold_systems
        .iter()
        .cloned()
        .chain(coverage.keys().cloned())
        .collect();
    let rows: Vec<Vec<String>> = universe
        .iter()
        .map(|system| {
            let in_gold = gold_systems.contains(system);
            let n_judges = coverage.get(system).copied().unwrap_or(0);
            vec![
                system.to_string(),
                in_gold.to_string(),
                n_judges.to_string(),
                (in_gold && n_judges > 0).to_string(),
            ]
        })
        .collect();
    write_csv(
        &out.join("overlap.csv"),
        &["system_id", "in_gold", "n_judges_covering", "in_overlap"],
        &rows,
    )
}

/// Score-distribution summaries and histograms, plot-ready.
fn write_distributions(out: &Path, matrices: &[ScoreMatrix]) -> Result<(), PipelineError> {
    let mut summary_rows = Vec::new();
    let mut histogram_rows = Vec::new();
    for matrix in matrices {
        let summary = match score_distribution(matrix) {
            Ok(s) => s,
            Err(MetricsError::EmptyMatrix) => continue,
            Err(e) => return Err(e.into()),
        };
        let judge = matrix.judge();
        summary_rows.push(vec![
            judge.model.to_string(),
            judge.realization.tag().to_owned(),
            matrix.n_scored().to_string(),
            summary.support_size.to_string(),
            fmt_f64(summary.tie_rate),
            summary.n_pairs.to_string(),
            fmt_f64(summary.min),
            fmt_f64(summary.max),
            fmt_f64(summary.mean),
            fmt_f64(summary.std),
        ]);
        match &summary.histogram {
            Histogram::Discrete { values, counts } => {
                for (value, count) in values.iter().zip(counts) {
                    histogram_rows.push(vec![
                        judge.model.to_string(),
                        judge.realization.tag().to_owned(),
                        "value".to_owned(),
                        fmt_f64(*value),
                        fmt_f64(*value),
                        count.to_string(),
                    ]);
                }
            }
            Histogram::Uniform { edges, counts } => {
                for (i, count) in counts.iter().enumerate() {
                    histogram_rows.push(vec![
                        judge.model.to_string(),
                        judge.realization.tag().to_owned(),
                        "bin".to_owned(),
                        fmt_f64(edges[i]),
                        fmt_f64(edges[i + 1]),
                        count.to_string(),
                    ]);
                }
            }
        }
    }
    write_csv(
        &out.join("score_summary.csv"),
        &[
            "judge_model",
            "realization",
            "n_scored",
            "support_size",
            "tie_rate",
            "n_pairs",
            "min",
            "max",
            "mean",
            "std",
        ],
        &summary_rows,
    )?;
    write_csv(
        &out.join("histograms.csv"),
        &["judge_model", "realization", "kind", "low", "high", "count"],
        &histogram_rows,
    )
}

// ---------------------------------------------------------------------------
// behavior
// ---------------------------------------------------------------------------

#[derive(Debug)]
pub struct BehaviorOutcome {
    pub n_characterized: usize,
    pub skipped: Vec<(JudgeSpec, String)>,
    pub outputs: Vec<PathBuf>,
}

/// Characterize every judge: decisiveness fit, per-system bias, and (when
/// an identity map is configured) self-bias. Judges without usable pair
/// data are skipped with a reason, never aborting the stage.
pub fn run_behavior(config: &RunConfig) -> Result<BehaviorOutcome, PipelineError> {
    let battles = data::load_battles(&config.paths.battles, &config.gold.tag_filter)?;
    let gold = GoldReference::build(&battles, None, config.gold.min_nontied, &config.bt)?;
    let matrices = load_judgment_matrices(&config.paths.judgments_dir)?;
    let out = &config.paths.output_dir;
    fs::create_dir_all(out).map_err(io_err(out))?;

    let mut behavior_rows: Vec<Vec<String>> = Vec::new();
    let mut bias_rows: Vec<Vec<String>> = Vec::new();
    let mut pair_rows: Vec<Vec<String>> = Vec::new();
    let mut skipped: Vec<(JudgeSpec, String)> = Vec::new();
    let mut reports: Vec<BiasReport> = Vec::new();

    for matrix in &matrices {
        let judge = matrix.judge().clone();
        let judge_systems: BTreeSet<SystemId> = matrix.systems().iter().cloned().collect();
        let eligible: BTreeSet<(SystemId, SystemId)> = gold
            .eligible_pairs
            .iter()
            .filter(|(a, b)| judge_systems.contains(a) && judge_systems.contains(b))
            .cloned()
            .collect();
        if eligible.is_empty() {
            skipped.push((
                judge,
                "no gold-eligible system pairs are covered by this judge".to_owned(),
            ));
            continue;
        }
        let judge_table = judge_winrates(matrix, &eligible)?;

        let fit: Option<BetaFit> = match fit_decisiveness(&judge_table, &gold.winrates, config.weight_scheme) {
            Ok(fit) => Some(fit),
            Err(e) => {
                skipped.push((judge.clone(), format!("decisiveness fit skipped: {e}")));
                None
            }
        };
        let report: BiasReport = match system_bias(&judge_table, &gold.winrates, fit.as_ref()) {
            Ok(report) => report,
            Err(e) => {
                skipped.push((judge.clone(), format!("bias analysis skipped: {e}")));
                continue;
            }
        };

        if let Some(fit) = &fit {
            behavior_rows.push(vec![
                judge.model.to_string(),
                judge.realization.tag().to_owned(),
                fmt_f64(fit.alpha),
                fmt_f64(fit.objective_value),
                fit.n_pairs.to_string(),
                fmt_opt(report.bias_sigma),
                report.systems.len().to_string(),
                report.excluded.len().to_string(),
            ]);
        }
        for (system, bias) in &report.systems {
            bias_rows.push(vec![
                judge.model.to_string(),
                judge.realization.tag().to_owned(),
                system.to_string(),
                fmt_f64(bias.raw_bias),
                fmt_opt(bias.corrected_bias),
                bias.n_opponents.to_string(),
            ]);
        }
        for (pair, entry) in judge_table.pairs() {
            let (a, b) = pair;
            let gold_wr = gold
                .winrates
                .get(a, b)
                .expect("eligible pairs come from the gold table");
            let predicted = fit
                .as_ref()
                .map(|f| beta_cdf(gold_wr, f.alpha).expect("win-rate is in [0, 1]"));
            pair_rows.push(vec![
                judge.model.to_string(),
                judge.realization.tag().to_owned(),
                a.to_string(),
                b.to_string(),
                fmt_f64(entry.winrate_first),
                fmt_f64(gold_wr),
                fmt_opt(predicted),
                entry.n_comparisons.to_string(),
            ]);
        }
        reports.push(report);
    }

    let mut outputs = Vec::new();
    let behavior_path = out.join("behavior.csv");
    write_csv(
        &behavior_path,
        &[
            "judge_model",
            "realization",
            "alpha",
            "objective",
            "n_pairs",
            "bias_sigma",
            "n_systems",
            "n_excluded_systems",
        ],
        &behavior_rows,
    )?;
    outputs.push(behavior_path);

    let bias_path = out.join("bias.csv");
    write_csv(
        &bias_path,
        &[
            "judge_model",
            "realization",
            "system_id",
            "raw_bias",
            "corrected_bias",
            "n_opponents",
        ],
        &bias_rows,
    )?;
    outputs.push(bias_path);

    let pairs_path = out.join("pairs.csv");
    write_csv(
        &pairs_path,
        &[
            "judge_model",
            "realization",
            "system_a",
            "system_b",
            "judge_wr",
            "gold_wr",
            "predicted_wr",
            "n_comparisons",
        ],
        &pair_rows,
    )?;
    outputs.push(pairs_path);

    let skipped_path = out.join("behavior_skipped.csv");
    let skipped_rows: Vec<Vec<String>> = skipped
        .iter()
        .map(|(judge, reason)| {
            vec![
                judge.model.to_string(),
                judge.realization.tag().to_owned(),
                reason.clone(),
            ]
        })
        .collect();
    write_csv(
        &skipped_path,
        &["judge_model", "realization", "reason"],
        &skipped_rows,
    )?;
    outputs.push(skipped_path);

    if !config.self_link.is_empty() {
        let rows: Vec<SelfBiasRow> = self_bias(&reports, &config.self_link);
        let csv_rows: Vec<Vec<String>> = rows
            .iter()
            .map(|row| {
                vec![
                    row.judge.model.to_string(),
                    row.judge.realization.tag().to_owned(),
                    row.linked_system.to_string(),
                    fmt_f64(row.self_bias),
                    row.n_opponents.to_string(),
                    fmt_opt(row.p_value),
                    fmt_opt(row.p_value_corrected),
                ]
            })
            .collect();
        let self_bias_path = out.join("self_bias.csv");
        write_csv(
            &self_bias_path,
            &[
                "judge_model",
                "realization",
                "linked_system",
                "self_bias",
                "n_opponents",
                "p_value",
                "p_value_bonferroni",
            ],
            &csv_rows,
        )?;
        outputs.push(self_bias_path);
    }

    Ok(BehaviorOutcome {
        n_characterized: behavior_rows.len(),
        skipped,
        outputs,
    })
}

// ---------------------------------------------------------------------------
// report
// ---------------------------------------------------------------------------

#[derive(Debug)]
pub struct ReportOutcome {
    pub report: PathBuf,
    /// Stage outputs that were missing, named in the report's gaps section.
    pub gaps: Vec<String>,
    pub plot_files: Vec<PathBuf>,
}

struct CsvTable {
    headers: Vec<String>,
    rows: Vec<Vec<String>>,
}

impl CsvTable {
    fn col(&self, name: &str) -> Option<usize> {
        self.headers.iter().position(|h| h == name)
    }

    fn field<'a>(&self, row: &'a [String], name: &str) -> &'a str {
        self.col(name).map(|i| row[i].as_str()).unwrap_or("")
    }
}

fn read_csv_table(path: &Path) -> Result<Option<CsvTable>, PipelineError> {
    if !path.exists() {
        return Ok(None);
    }
    let csv_err = |source| PipelineError::Csv {
        path: path.to_path_buf(),
        source,
    };
    let mut reader = csv::Reader::from_path(path).map_err(csv_err)?;
    let headers = reader
        .headers()
        .map_err(csv_err)?
        .iter()
        .map(str::to_owned)
        .collect();
    let mut rows = Vec::new();
    for record in reader.records() {
        rows.push(record.map_err(csv_err)?.iter().map(str::to_owned).collect());
    }
    Ok(Some(CsvTable { headers, rows }))
}

fn md_escape(cell: &str) -> String {
    cell.replace('|', "\\|")
}

fn md_table(out: &mut String, headers: &[String], rows: &[Vec<String>]) {
    let header_line: Vec<String> = headers.iter().map(|h| md_escape(h)).collect();
    writeln!(out, "| {} |", header_line.join(" | ")).unwrap();
    writeln!(out, "|{}|", vec![" --- "; headers.len()].join("|")).unwrap();
    for row in rows {
        let cells: Vec<String> = row.iter().map(|c| md_escape(c)).collect();
        writeln!(out, "| {} |", cells.join(" | ")).unwrap();
    }
}

/// Assemble `report.md` plus plot-ready CSVs from whatever stage outputs
/// exist in the output directory; missing stages become explicit gaps.
pub fn run_report(config: &RunConfig) -> Result<ReportOutcome, PipelineError> {
    let out = &config.paths.output_dir;
    fs::create_dir_all(out).map_err(io_err(out))?;

    let gold_ranking = read_csv_table(&out.join("gold_ranking.csv"))?;
    let leaderboard = read_csv_table(&out.join("leaderboard.csv"))?;
    let behavior = read_csv_table(&out.join("behavior.csv"))?;
    let behavior_skipped = read_csv_table(&out.join("behavior_skipped.csv"))?;
    let bias = read_csv_table(&out.join("bias.csv"))?;
    let pairs = read_csv_table(&out.join("pairs.csv"))?;
    let self_bias_table = read_csv_table(&out.join("self_bias.csv"))?;

    let mut gaps: Vec<String> = Vec::new();
    let mut plot_files: Vec<PathBuf> = Vec::new();
    let mut md = String::new();

    writeln!(md, "# Judge ranking evaluation report\n").unwrap();

    // Gold reference.
    writeln!(md, "## Gold reference\n").unwrap();
    match &gold_ranking {
        Some(table) => {
            writeln!(
                md,
                "{} systems ranked from human battles. Top of the table:\n",
                table.rows.len()
            )
            .unwrap();
            let top: Vec<Vec<String>> = table.rows.iter().take(10).cloned().collect();
            md_table(&mut md, &table.headers, &top);
            writeln!(md).unwrap();
        }
        None => {
            writeln!(md, "Not computed — run the `rank` command first.\n").unwrap();
            gaps.push("gold_ranking.csv (produced by `rank`)".to_owned());
        }
    }

    // Leaderboard.
    writeln!(md, "## Leaderboard\n").unwrap();
    match &leaderboard {
        Some(table) => {
            writeln!(
                md,
                "One row per judge × aggregation, sorted by tau against the gold ranking \
                 (omitted rows carry their reason):\n"
            )
            .unwrap();
            md_table(&mut md, &table.headers, &table.rows);
            writeln!(md).unwrap();
        }
        None => {
            writeln!(md, "Not computed — run the `rank` command first.\n").unwrap();
            gaps.push("leaderboard.csv (produced by `rank`)".to_owned());
        }
    }

    // Behavior.
    writeln!(md, "## Judge behavior: decisiveness and bias\n").unwrap();
    match &behavior {
        Some(table) => {
            writeln!(
                md,
                "Fitted decisiveness (alpha > 1 amplifies gaps, alpha < 1 flattens them) and \
                 bias propensity (spread of corrected per-system bias):\n"
            )
            .unwrap();
            md_table(&mut md, &table.headers, &table.rows);
            writeln!(md).unwrap();
            if let Some(skipped) = &behavior_skipped {
                if !skipped.rows.is_empty() {
                    writeln!(md, "Skipped judges:\n").unwrap();
                    for row in &skipped.rows {
                        writeln!(
                            md,
                            "- {} ({}): {}",
                            md_escape(skipped.field(row, "judge_model")),
                            md_escape(skipped.field(row, "realization")),
                            md_escape(skipped.field(row, "reason")),
                        )
                        .unwrap();
                    }
                    writeln!(md).unwrap();
                }
            }
        }
        None => {
            writeln!(md, "Not computed — run the `behavior` command first.\n").unwrap();
            gaps.push("behavior.csv (produced by `behavior`)".to_owned());
        }
    }

    // Self-bias.
    writeln!(md, "## Self-bias\n").unwrap();
    match &self_bias_table {
        Some(table) if !table.rows.is_empty() => {
            md_table(&mut md, &table.headers, &table.rows);
            writeln!(md).unwrap();
        }
        Some(_) => {
            writeln!(md, "No self-bias rows (no linked judge had usable bias data).\n").unwrap();
        }
        None => {
            writeln!(
                md,
                "Not computed — configure `[self_link]` and run the `behavior` command.\n"
            )
            .unwrap();
        }
    }

    // Plot data.
    if let Some(pairs) = &pairs {
        let path = out.join("scatter.csv");
        write_csv(
            &path,
            &[
                "judge_model",
                "realization",
                "system_a",
                "system_b",
                "gold_wr",
                "judge_wr",
                "predicted_wr",
            ],
            &pairs
                .rows
                .iter()
                .map(|row| {
                    vec![
                        pairs.field(row, "judge_model").to_owned(),
                        pairs.field(row, "realization").to_owned(),
                        pairs.field(row, "system_a").to_owned(),
                        pairs.field(row, "system_b").to_owned(),
                        pairs.field(row, "gold_wr").to_owned(),
                        pairs.field(row, "judge_wr").to_owned(),
                        pairs.field(row, "predicted_wr").to_owned(),
                    ]
                })
                .collect::<Vec<_>>(),
        )?;
        plot_files.push(path);
    } else {
        gaps.push("pairs.csv (produced by `behavior`; source for scatter.csv)".to_owned());
    }

    if let Some(behavior) = &behavior {
        let mut curve_rows: Vec<Vec<String>> = Vec::new();
        for row in &behavior.rows {
            let alpha_text = behavior.field(row, "alpha");
            let Ok(alpha) = alpha_text.parse::<f64>() else {
                continue;
            };
            for i in 0..=100u32 {
                let x = f64::from(i) / 100.0;
                let y = beta_cdf(x, alpha).expect("grid point is in domain");
                curve_rows.push(vec![
                    behavior.field(row, "judge_model").to_owned(),
                    behavior.field(row, "realization").to_owned(),
                    fmt_f64(x),
                    fmt_f64(y),
                ]);
            }
        }
        let path = out.join("curve_overlays.csv");
        write_csv(
            &path,
            &["judge_model", "realization", "gold_wr", "predicted_wr"],
            &curve_rows,
        )?;
        plot_files.push(path);
    }

    if let Some(bias) = &bias {
        let rows: Vec<Vec<String>> = bias
            .rows
            .iter()
            .filter(|row| !bias.field(row, "corrected_bias").is_empty())
            .map(|row| {
                vec![
                    bias.field(row, "judge_model").to_owned(),
                    bias.field(row, "realization").to_owned(),
                    bias.field(row, "system_id").to_owned(),
                    bias.field(row, "corrected_bias").to_owned(),
                ]
            })
            .collect();
        let path = out.join("bias_heatmap.csv");
        write_csv(
            &path,
            &["judge_model", "realization", "system_id", "corrected_bias"],
            &rows,
        )?;
        plot_files.push(path);
    } else {
        gaps.push("bias.csv (produced by `behavior`; source for bias_heatmap.csv)".to_owned());
    }

    writeln!(md, "## Plot data\n").unwrap();
    if plot_files.is_empty() {
        writeln!(md, "None written — no stage outputs were available.\n").unwrap();
    } else {
        for path in &plot_files {
            let name = path.file_name().unwrap_or_default().to_string_lossy();
            writeln!(md, "- `{name}`").unwrap();
        }
        writeln!(md).unwrap();
    }

    writeln!(md, "## Gaps\n").unwrap();
    if gaps.is_empty() {
        writeln!(md, "None — all pipeline stages contributed.").unwrap();
    } else {
        for gap in &gaps {
            writeln!(md, "- missing: {gap}").unwrap();
        }
    }

    let report = out.join("report.md");
    fs::write(&report, md).map_err(io_err(&report))?;
    Ok(ReportOutcome {
        report,
        gaps,
        plot_files,
    })
}

// ---------------------------------------------------------------------------
// synth
// ---------------------------------------------------------------------------

#[derive(Debug)]
pub struct SynthOutcome {
    pub dir: PathBuf,
    pub config_path: PathBuf,
    pub n_systems: usize,
    pub n_instructions: usize,
    pub n_battles: usize,
    /// (judge model, clipped pair targets) per generated judge.
    pub judges: Vec<(String, usize)>,
}

fn default_synth_judges() -> Vec<SynthJudgeEntry> {
    let entry = |model: &str, true_alpha: f64, noise_std: f64| SynthJudgeEntry {
        model: model.to_owned(),
        true_alpha,
        noise_std,
        bias: BTreeMap::new(),
        seed: None,
    };
    vec![
        entry("synth-faithful", 1.0, 0.3),
        entry("synth-decisive", 4.0, 0.3),
        entry("synth-noisy", 1.0, 1.5),
    ]
}

/// Generate a self-contained synthetic fixture directory: responses,
/// battles, per-judge judgments, the true strength table, and a ready
/// config pointing at all of it.
pub fn run_synth(config: &RunConfig, dir: &Path) -> Result<SynthOutcome, PipelineError> {
    fs::create_dir_all(dir).map_err(io_err(dir))?;
    let judgments_dir = dir.join("judgments");
    fs::create_dir_all(&judgments_dir).map_err(io_err(&judgments_dir))?;
    fs::create_dir_all(dir.join("cache")).map_err(io_err(&dir.join("cache")))?;

    let world_config = WorldConfig {
        n_systems: config.synth.n_systems,
        n_instructions: config.synth.n_instructions,
        strength_spread: config.synth.strength_spread,
        battles_per_pair: config.synth.battles_per_pair,
        seed: config.seed,
    };
    let world = generate_world(&world_config)?;

    // Placeholder response texts make the fixture consumable by every
    // command, including collect against a mock endpoint.
    let mut records = Vec::with_capacity(world.instructions.len() * world.systems.len());
    for (k, instruction) in world.instructions.iter().enumerate() {
        for system in &world.systems {
            records.push(ResponseRecord {
                instruction_id: instruction.clone(),
                instruction_text: format!("Synthetic instruction {k}"),
                system_id: system.clone(),
                response_text: format!("Synthetic response from {system} to {instruction}"),
            });
        }
    }
    let corpus = data::Corpus::from_records(records).map_err(PipelineError::Invalid)?;
    data::write_responses(dir.join("responses.jsonl"), &corpus)?;
    data::write_battles(dir.join("battles.jsonl"), &world.battles)?;

    let entries = if config.synth.judges.is_empty() {
        default_synth_judges()
    } else {
        config.synth.judges.clone()
    };
    let mut judge_stats = Vec::with_capacity(entries.len());
    for (index, entry) in entries.iter().enumerate() {
        let mut bias = BTreeMap::new();
        for (system, shift) in &entry.bias {
            let system = SystemId::new(system).map_err(|e| PipelineError::Invalid(e.to_string()))?;
            bias.insert(system, *shift);
        }
        let spec = SyntheticJudgeSpec {
            model: crate::ids::JudgeModelId::new(&entry.model)
                .map_err(|e| PipelineError::Invalid(e.to_string()))?,
            true_alpha: entry.true_alpha,
            bias,
            noise_std: entry.noise_std,
            seed: entry
                .seed
                .unwrap_or_else(|| config.seed.wrapping_add(1000 + 7919 * index as u64)),
        };
        let (matrix, stats) = generate_judge_scores(&world, &spec)?;
        let path = judgments_dir.join(format!("{}.jsonl", judge_file_stem(matrix.judge())));
        data::write_judgments(&path, &matrix.to_judgment_records())?;
        judge_stats.push((entry.model.clone(), stats.n_clipped_targets));
    }

    let strength_rows: Vec<Vec<String>> = world
        .systems
        .iter()
        .enumerate()
        .map(|(i, system)| {
            vec![
                system.to_string(),
                fmt_f64(world.strengths[system]),
                (i + 1).to_string(),
            ]
        })
        .collect();
    write_csv(
        &dir.join("true_strengths.csv"),
        &["system_id", "true_strength", "rank"],
        &strength_rows,
    )?;

    let config_path = dir.join("config.toml");
    fs::write(&config_path, generated_config_toml(config, &entries)).map_err(io_err(&config_path))?;
    // A fixture whose config does not load is a bug; fail here, not later.
    RunConfig::load(&config_path).map_err(|e| PipelineError::Invalid(e.to_string()))?;

    Ok(SynthOutcome {
        dir: dir.to_path_buf(),
        config_path,
        n_systems: world.systems.len(),
        n_instructions: world.instructions.len(),
        n_battles: world.battles.len(),
        judges: judge_stats,
    })
}

fn generated_config_toml(config: &RunConfig, entries: &[SynthJudgeEntry]) -> String {
    let aggregation_names: Vec<String> = config
        .aggregations
        .iter()
        .map(|m| format!("\"{}\"", m.label().as_str()))
        .collect();
    let mut text = format!(
        "# Generated by the synth command; paths are relative to this file.\n\
         seed = {seed}\n\
         jobs = {jobs}\n\
         aggregations = [{aggregations}]\n\
         weight_scheme = \"{weight_scheme}\"\n\n\
         [paths]\n\
         responses = \"responses.jsonl\"\n\
         battles = \"battles.jsonl\"\n\
         judgments_dir = \"judgments\"\n\
         cache_dir = \"cache\"\n\
         output_dir = \"out\"\n\n\
         [bootstrap]\n\
         n_resamples = {n_resamples}\n\
         confidence = {confidence}\n\n\
         [gold]\n\
         min_nontied = 1\n",
        seed = config.seed,
        jobs = config.jobs,
        aggregations = aggregation_names.join(", "),
        weight_scheme = weight_scheme_name(config.weight_scheme),
        n_resamples = config.bootstrap.n_resamples,
        confidence = config.bootstrap.confidence,
    );
    for entry in entries {
        let _ = write!(
            text,
            "\n[[judges]]\nmodel = \"{}\"\nrealization = \"reward\"\n",
            entry.model
        );
    }
    text
}
