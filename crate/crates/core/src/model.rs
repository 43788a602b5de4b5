//! Core domain types: judge specifications, battle records, and rankings.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::ids::{EmptyIdError, JudgeModelId, SystemId};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ModelError {
    #[error(transparent)]
    EmptyId(#[from] EmptyIdError),
    #[error("battle must involve two distinct systems, got `{0}` on both sides")]
    SelfBattle(SystemId),
    #[error("unknown realization `{0}` (expected numeric, likert, token_probs, anchor, or reward)")]
    UnknownRealization(String),
    #[error("realization `anchor` requires an anchor_system")]
    MissingAnchorSystem,
    #[error("realization `{0}` must not carry an anchor_system")]
    UnexpectedAnchorSystem(String),
    #[error("score {score} is invalid for realization `{realization}`: {reason}")]
    ScoreOutOfRange {
        realization: String,
        score: f64,
        reason: String,
    },
    #[error("ranking must cover at least one system")]
    EmptyRanking,
    #[error("ranking score for system `{0}` is not finite")]
    NonFiniteScore(SystemId),
    #[error("confidence interval [{low}, {high}] does not bracket tau {tau}")]
    CiDoesNotBracketTau { low: f64, high: f64, tau: f64 },
}

/// How a judge's raw output is turned into a per-response score.
///
/// The variant fixes the prompt template, the parser, and the valid score
/// range:
///
/// * `Numeric`: a 0-100 rating, parsed from the first number in the output.
/// * `Likert`: one of five labels (Very Bad .. Very Good) mapped to 1..=5.
/// * `TokenProbs`: probability mass of "yes" among the first generated
///   token's top log-probabilities, in [0, 1].
/// * `Anchor`: a pairwise verdict against a fixed anchor system's response,
///   mapped to {-2, -1, 0, 1, 2}.
/// * `Reward`: a precomputed scalar score (e.g. from a reward model); any
///   finite value is accepted and no prompt is rendered.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Realization {
    Numeric,
    Likert,
    TokenProbs,
    Anchor { anchor_system: SystemId },
    Reward,
}

impl Realization {
    /// The tag used in serialized records: one of `numeric`, `likert`,
    /// `token_probs`, `anchor`, `reward`.
    pub fn tag(&self) -> &'static str {
        match self {
            Realization::Numeric => "numeric",
            Realization::Likert => "likert",
            Realization::TokenProbs => "token_probs",
            Realization::Anchor { .. } => "anchor",
            Realization::Reward => "reward",
        }
    }

    /// Rebuild a realization from its serialized form.
    pub fn from_parts(tag: &str, anchor_system: Option<SystemId>) -> Result<Self, ModelError> {
        let realization = match (tag, anchor_system) {
            ("numeric", None) => Realization::Numeric,
            ("likert", None) => Realization::Likert,
            ("token_probs", None) => Realization::TokenProbs,
            ("anchor", Some(anchor_system)) => Realization::Anchor { anchor_system },
            ("reward", None) => Realization::Reward,
            ("anchor", None) => return Err(ModelError::MissingAnchorSystem),
            (other, Some(_)) if matches!(other, "numeric" | "likert" | "token_probs" | "reward") => {
                return Err(ModelError::UnexpectedAnchorSystem(other.to_owned()))
            }
            (other, _) => return Err(ModelError::UnknownRealization(other.to_owned())),
        };
        Ok(realization)
    }

    pub fn anchor_system(&self) -> Option<&SystemId> {
        match self {
            Realization::Anchor { anchor_system } => Some(anchor_system),
            _ => None,
        }
    }

    /// Whether collection must request top log-probabilities of the first
    /// generated token. True only for `TokenProbs`.
    pub fn wants_logprobs(&self) -> bool {
        matches!(self, Realization::TokenProbs)
    }

    /// Whether the score support is a small discrete set (drives exact-value
    /// histogram binning).
    pub fn is_discrete(&self) -> bool {
        matches!(self, Realization::Likert | Realization::Anchor { .. })
    }

    /// Validate a parsed score against this realization's range.
    pub fn validate_score(&self, score: f64) -> Result<(), ModelError> {
        let fail = |reason: &str| {
            Err(ModelError::ScoreOutOfRange {
                realization: self.tag().to_owned(),
                score,
                reason: reason.to_owned(),
            })
        };
        if !score.is_finite() {
            return fail("score must be finite");
        }
        match self {
            Realization::Numeric => {
                if !(0.0..=100.0).contains(&score) {
                    return fail("expected a value in [0, 100]");
                }
            }
            Realization::Likert => {
                if score.fract() != 0.0 || !(1.0..=5.0).contains(&score) {
                    return fail("expected an integer in {1, 2, 3, 4, 5}");
                }
            }
            Realization::TokenProbs => {
                if !(0.0..=1.0).contains(&score) {
                    return fail("expected a value in [0, 1]");
                }
            }
            Realization::Anchor { .. } => {
                if score.fract() != 0.0 || !(-2.0..=2.0).contains(&score) {
                    return fail("expected an integer in {-2, -1, 0, 1, 2}");
                }
            }
            Realization::Reward => {}
        }
        Ok(())
    }
}

/// A judge: a judge model plus the realization it is queried under.
///
/// The paper-style leaderboard treats every (model, realization) pair as its
/// own judge, so this struct is the key for matrices, fits, and reports.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct JudgeSpec {
    pub model: JudgeModelId,
    pub realization: Realization,
}

impl JudgeSpec {
    pub fn new(model: JudgeModelId, realization: Realization) -> Self {
        Self { model, realization }
    }

    /// Filesystem-safe identifier: `model__realization[__anchor]` with any
    /// non `[A-Za-z0-9._-]` byte replaced by `-`.
    pub fn slug(&self) -> String {
        fn sanitize(s: &str) -> String {
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
        let mut slug = format!("{}__{}", sanitize(self.model.as_str()), self.realization.tag());
        if let Some(anchor) = self.realization.anchor_system() {
            slug.push_str("__");
            slug.push_str(&sanitize(anchor.as_str()));
        }
        slug
    }
}

impl std::fmt::Display for JudgeSpec {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self.realization.anchor_system() {
            Some(anchor) => write!(f, "{} [{} vs {}]", self.model, self.realization.tag(), anchor),
            None => write!(f, "{} [{}]", self.model, self.realization.tag()),
        }
    }
}

/// Outcome of one human battle between two systems.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Outcome {
    AWins,
    BWins,
    Tie,
}

/// One pairwise human comparison. `system_a` and `system_b` are always
/// distinct (checked at construction).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BattleRecord {
    pub system_a: SystemId,
    pub system_b: SystemId,
    pub outcome: Outcome,
}

impl BattleRecord {
    pub fn new(system_a: SystemId, system_b: SystemId, outcome: Outcome) -> Result<Self, ModelError> {
        if system_a == system_b {
            return Err(ModelError::SelfBattle(system_a));
        }
        Ok(Self {
            system_a,
            system_b,
            outcome,
        })
    }
}

/// What produced a ranking: a judge or the gold (human battle) side.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum RankingSource {
    Judge(JudgeSpec),
    Gold,
}

/// Which aggregation produced a ranking's scores.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum AggregationLabel {
    Mean,
    Median,
    WinRate,
    BradleyTerry,
    GoldBradleyTerry,
}

impl AggregationLabel {
    pub fn as_str(&self) -> &'static str {
        match self {
            AggregationLabel::Mean => "mean",
            AggregationLabel::Median => "median",
            AggregationLabel::WinRate => "winrate",
            AggregationLabel::BradleyTerry => "bt",
            AggregationLabel::GoldBradleyTerry => "gold_bt",
        }
    }
}

impl std::fmt::Display for AggregationLabel {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

/// One row of [`RankingVector::ranked_rows`]: competition rank (tied systems
/// share the smallest rank of their group) plus a 1-based tie-group index.
#[derive(Debug, Clone, PartialEq)]
pub struct RankedRow {
    pub system: SystemId,
    pub score: f64,
    pub rank: usize,
    pub tied_group: usize,
}

/// Per-system aggregate scores from one source, ordered descending for
/// reporting. Exact score ties are preserved, never arbitrarily broken.
#[derive(Debug, Clone, PartialEq)]
pub struct RankingVector {
    source: RankingSource,
    aggregation: AggregationLabel,
    scores: BTreeMap<SystemId, f64>,
}

impl RankingVector {
    pub fn new(
        source: RankingSource,
        aggregation: AggregationLabel,
        scores: BTreeMap<SystemId, f64>,
    ) -> Result<Self, ModelError> {
        if scores.is_empty() {
            return Err(ModelError::EmptyRanking);
        }
        for (system, score) in &scores {
            if !score.is_finite() {
                return Err(ModelError::NonFiniteScore(system.clone()));
            }
        }
        Ok(Self {
            source,
            aggregation,
            scores,
        })
    }

    pub fn source(&self) -> &RankingSource {
        &self.source
    }

    pub fn aggregation(&self) -> AggregationLabel {
        self.aggregation
    }

    pub fn scores(&self) -> &BTreeMap<SystemId, f64> {
        &self.scores
    }

    pub fn len(&self) -> usize {
        self.scores.len()
    }

    pub fn is_empty(&self) -> bool {
        self.scores.is_empty()
    }

    pub fn score(&self, system: &SystemId) -> Option<f64> {
        self.scores.get(system).copied()
    }

    /// Rows sorted by score descending (ties broken by system id for a
    /// stable listing). Systems with exactly equal scores share a rank and a
    /// tie group.
    pub fn ranked_rows(&self) -> Vec<RankedRow> {
        let mut ordered: Vec<(&SystemId, f64)> =
            self.scores.iter().map(|(s, &v)| (s, v)).collect();
        ordered.sort_by(|a, b| b.1.total_cmp(&a.1).then_with(|| a.0.cmp(b.0)));

        let mut rows = Vec::with_capacity(ordered.len());
        let mut group = 0usize;
        let mut group_rank = 1usize;
        let mut prev_score: Option<f64> = None;
        for (position, (system, score)) in ordered.into_iter().enumerate() {
            if prev_score != Some(score) {
                group += 1;
                group_rank = position + 1;
                prev_score = Some(score);
            }
            rows.push(RankedRow {
                system: system.clone(),
                score,
                rank: group_rank,
                tied_group: group,
            });
        }
        rows
    }

    /// Serialize as CSV with columns `system_id,score,rank,tied_group_id`.
    pub fn write_csv<W: std::io::Write>(&self, writer: W) -> csv::Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(["system_id", "score", "rank", "tied_group_id"])?;
        for row in self.ranked_rows() {
            w.write_record([
                row.system.as_str(),
                &row.score.to_string(),
                &row.rank.to_string(),
                &row.tied_group.to_string(),
            ])?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Headline characterization of one judge: ranking quality (tau with CI),
/// decisiveness (fitted alpha), and bias propensity (sigma of corrected
/// per-system bias). `alpha`/`bias_sigma` are `None` when the beta fit was
/// degenerate.
#[derive(Debug, Clone, PartialEq)]
pub struct JudgeProfile {
    pub judge: JudgeSpec,
    pub tau: f64,
    pub tau_ci: (f64, f64),
    pub alpha: Option<f64>,
    pub bias_sigma: Option<f64>,
}

impl JudgeProfile {
    pub fn new(
        judge: JudgeSpec,
        tau: f64,
        tau_ci: (f64, f64),
        alpha: Option<f64>,
        bias_sigma: Option<f64>,
    ) -> Result<Self, ModelError> {
        let (low, high) = tau_ci;
        if !(low <= tau && tau <= high) {
            return Err(ModelError::CiDoesNotBracketTau { low, high, tau });
        }
        Ok(Self {
            judge,
            tau,
            tau_ci,
            alpha,
            bias_sigma,
        })
    }
}
