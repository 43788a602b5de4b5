//! Parsers from raw judge output to scores.
//!
//! Every parser is total: any input maps to either a score or a structured
//! failure, never a panic and never a silently substituted default.

use std::sync::OnceLock;

use regex::Regex;
use thiserror::Error;

use crate::model::Realization;

/// Why a raw output produced no score.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum ParseFailure {
    #[error("no number found in the output")]
    NoNumber,
    #[error("first number {value} is outside [0, 100]")]
    NumberOutOfRange { value: f64 },
    #[error("no rating label found (expected one of Very Bad/Bad/Mediocre/Good/Very Good)")]
    NoLikertLabel,
    #[error("no verdict token found (expected [[A>>B]], [[A>B]], [[A=B]], [[B>A]] or [[B>>A]])")]
    NoVerdict,
    #[error("the top-logprobs list is empty")]
    EmptyTopLogprobs,
    #[error("no token matched yes or no")]
    NoYesNoTokens,
    #[error("token-probability scoring needs top log-probabilities, none were returned")]
    LogprobsMissing,
    #[error("reward scores are ingested from files, not parsed from model output")]
    RewardNotParsed,
}

fn number_regex() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    // ASCII digits only: `\d` would also match Unicode digits that
    // `f64::from_str` rejects.
    RE.get_or_init(|| Regex::new(r"-?[0-9]+(?:\.[0-9]+)?").expect("static regex compiles"))
}

/// First-number rule: the first integer or decimal token is the score;
/// values outside [0, 100] fail rather than clamp.
pub fn parse_numeric(raw: &str) -> Result<f64, ParseFailure> {
    let m = number_regex().find(raw).ok_or(ParseFailure::NoNumber)?;
    let value: f64 = m
        .as_str()
        .parse()
        .expect("regex match is a valid float literal");
    if (0.0..=100.0).contains(&value) {
        Ok(value)
    } else {
        Err(ParseFailure::NumberOutOfRange { value })
    }
}

/// Rating labels, longest first so "very bad" can never match as "bad".
const LIKERT_LABELS: [(&str, f64); 5] = [
    ("very good", 5.0),
    ("very bad", 1.0),
    ("mediocre", 3.0),
    ("good", 4.0),
    ("bad", 2.0),
];

/// Label rule: the first `[[...]]` whose content is exactly a rating label
/// wins; with no bracketed label, the earliest bare label occurrence wins
/// (longest label at equal positions). Case-insensitive.
pub fn parse_likert(raw: &str) -> Result<f64, ParseFailure> {
    static BRACKETED: OnceLock<Regex> = OnceLock::new();
    let bracketed =
        BRACKETED.get_or_init(|| Regex::new(r"\[\[([^\[\]]*)\]\]").expect("static regex compiles"));
    for capture in bracketed.captures_iter(raw) {
        let content = capture[1].trim().to_lowercase();
        if let Some((_, score)) = LIKERT_LABELS.iter().find(|(label, _)| *label == content) {
            return Ok(*score);
        }
    }

    let haystack = raw.to_lowercase();
    LIKERT_LABELS
        .iter()
        .filter_map(|(label, score)| haystack.find(label).map(|pos| (pos, label.len(), *score)))
        .min_by(|a, b| a.0.cmp(&b.0).then(b.1.cmp(&a.1)))
        .map(|(_, _, score)| score)
        .ok_or(ParseFailure::NoLikertLabel)
}

const ANCHOR_VERDICTS: [(&str, f64); 6] = [
    ("[[A>>B]]", 2.0),
    ("[[A>B]]", 1.0),
    ("[[A=B]]", 0.0),
    // Mirrored tie spelling, accepted so that swapping the A/B labels in any
    // verdict always yields the negated score.
    ("[[B=A]]", 0.0),
    ("[[B>A]]", -1.0),
    ("[[B>>A]]", -2.0),
];

/// Last-verdict rule: the rightmost of the five exact (case-sensitive)
/// verdict tokens wins, mirroring the "final verdict" convention.
pub fn parse_anchor(raw: &str) -> Result<f64, ParseFailure> {
    ANCHOR_VERDICTS
        .iter()
        .filter_map(|(token, score)| raw.rfind(token).map(|pos| (pos, *score)))
        .max_by_key(|(pos, _)| *pos)
        .map(|(_, score)| score)
        .ok_or(ParseFailure::NoVerdict)
}

/// Probability-mass rule: tokens are matched to yes/no case-insensitively
/// after stripping leading whitespace; the score is
/// Σp(yes) / (Σp(yes) + Σp(no)).
pub fn parse_token_probs(top_logprobs: &[(String, f64)]) -> Result<f64, ParseFailure> {
    if top_logprobs.is_empty() {
        return Err(ParseFailure::EmptyTopLogprobs);
    }
    let mut p_yes = 0.0;
    let mut p_no = 0.0;
    for (token, logprob) in top_logprobs {
        let normalized = token.trim_start().to_lowercase();
        if normalized == "yes" {
            p_yes += logprob.exp();
        } else if normalized == "no" {
            p_no += logprob.exp();
        }
    }
    if p_yes + p_no == 0.0 {
        return Err(ParseFailure::NoYesNoTokens);
    }
    Ok(p_yes / (p_yes + p_no))
}

/// Dispatch to the realization's parser. TokenProbs consumes the
/// log-probabilities and ignores the text; the others consume the text.
pub fn parse_score(
    realization: &Realization,
    raw: &str,
    top_logprobs: Option<&[(String, f64)]>,
) -> Result<f64, ParseFailure> {
    match realization {
        Realization::Numeric => parse_numeric(raw),
        Realization::Likert => parse_likert(raw),
        Realization::Anchor { .. } => parse_anchor(raw),
        Realization::TokenProbs => {
            parse_token_probs(top_logprobs.ok_or(ParseFailure::LogprobsMissing)?)
        }
        Realization::Reward => Err(ParseFailure::RewardNotParsed),
    }
}
