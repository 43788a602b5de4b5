//! Aggregating a score matrix into one ranking score per system.
//!
//! Four methods, all consuming the same `ScoreMatrix`:
//!
//! * `Mean` — average score over the instructions a system was scored on.
//! * `Median` — median with the midpoint convention for even counts.
//! * `WinRate` — per instruction, the fraction of co-scored rivals beaten
//!   strictly, averaged over instructions.
//! * `BradleyTerry` — scores compared per instruction become pairwise
//!   battles, fed through the shared Bradley-Terry fitter.
//!
//! Missing-cell policy: a comparison is only made where both cells are
//! present; an instruction missing a system's score simply does not count
//! for that system. Ties count as non-wins for `WinRate` but stay in the
//! denominator; only a *missing* rival drops the pair from the denominator.

use thiserror::Error;

use crate::bt::{fit_bradley_terry, BtConfig, BtError, PairCounts};
use crate::ids::SystemId;
use crate::matrix::ScoreMatrix;
use crate::model::{
    AggregationLabel, BattleRecord, ModelError, Outcome, RankingSource, RankingVector,
};

#[derive(Debug, Error)]
pub enum AggregateError {
    #[error("matrix has no systems")]
    NoSystems,
    #[error("system `{0}` has no scored instructions")]
    SystemWithoutScores(SystemId),
    #[error("system `{0}` shares no scored instruction with any other system")]
    SystemWithoutComparisons(SystemId),
    #[error(transparent)]
    Bt(#[from] BtError),
    #[error(transparent)]
    Model(#[from] ModelError),
}

/// An aggregation method with its configuration.
#[derive(Debug, Clone, PartialEq)]
pub enum AggregationMethod {
    Mean,
    Median,
    WinRate,
    BradleyTerry(BtConfig),
}

impl AggregationMethod {
    pub fn label(&self) -> AggregationLabel {
        match self {
            AggregationMethod::Mean => AggregationLabel::Mean,
            AggregationMethod::Median => AggregationLabel::Median,
            AggregationMethod::WinRate => AggregationLabel::WinRate,
            AggregationMethod::BradleyTerry(_) => AggregationLabel::BradleyTerry,
        }
    }

    /// Parse a config-file name: `mean`, `median`, `winrate`, or `bt` (the
    /// latter taking the given Bradley-Terry configuration).
    pub fn from_name(name: &str, bt: BtConfig) -> Option<Self> {
        match name {
            "mean" => Some(AggregationMethod::Mean),
            "median" => Some(AggregationMethod::Median),
            "winrate" => Some(AggregationMethod::WinRate),
            "bt" => Some(AggregationMethod::BradleyTerry(bt)),
            _ => None,
        }
    }
}

/// Aggregate with the given method.
pub fn aggregate(
    matrix: &ScoreMatrix,
    method: &AggregationMethod,
) -> Result<RankingVector, AggregateError> {
    match method {
        AggregationMethod::Mean => aggregate_mean(matrix),
        AggregationMethod::Median => aggregate_median(matrix),
        AggregationMethod::WinRate => aggregate_winrate(matrix),
        AggregationMethod::BradleyTerry(cfg) => aggregate_bt(matrix, cfg),
    }
}

fn ranking(
    matrix: &ScoreMatrix,
    label: AggregationLabel,
    scores: impl IntoIterator<Item = (SystemId, f64)>,
) -> Result<RankingVector, AggregateError> {
    Ok(RankingVector::new(
        RankingSource::Judge(matrix.judge().clone()),
        label,
        scores.into_iter().collect(),
    )?)
}

fn scored_column(matrix: &ScoreMatrix, li: usize) -> Vec<f64> {
    (0..matrix.n_instructions())
        .filter_map(|ki| matrix.cell(ki, li))
        .collect()
}

/// Mean score per system over its scored instructions.
pub fn aggregate_mean(matrix: &ScoreMatrix) -> Result<RankingVector, AggregateError> {
    if matrix.n_systems() == 0 {
        return Err(AggregateError::NoSystems);
    }
    let mut scores = Vec::with_capacity(matrix.n_systems());
    for (li, system) in matrix.systems().iter().enumerate() {
        let column = scored_column(matrix, li);
        if column.is_empty() {
            return Err(AggregateError::SystemWithoutScores(system.clone()));
        }
        let mean = column.iter().sum::<f64>() / column.len() as f64;
        scores.push((system.clone(), mean));
    }
    ranking(matrix, AggregationLabel::Mean, scores)
}

/// Median score per system (midpoint of the two central values for even
/// counts).
pub fn aggregate_median(matrix: &ScoreMatrix) -> Result<RankingVector, AggregateError> {
    if matrix.n_systems() == 0 {
        return Err(AggregateError::NoSystems);
    }
    let mut scores = Vec::with_capacity(matrix.n_systems());
    for (li, system) in matrix.systems().iter().enumerate() {
        let mut column = scored_column(matrix, li);
        if column.is_empty() {
            return Err(AggregateError::SystemWithoutScores(system.clone()));
        }
        column.sort_by(f64::total_cmp);
        let n = column.len();
        let median = if n % 2 == 1 {
            column[n / 2]
        } else {
            (column[n / 2 - 1] + column[n / 2]) / 2.0
        };
        scores.push((system.clone(), median));
    }
    ranking(matrix, AggregationLabel::Median, scores)
}

/// Win-rate aggregation: for each instruction where the system is scored,
/// the fraction of co-scored rivals with a strictly smaller score; averaged
/// over those instructions.
pub fn aggregate_winrate(matrix: &ScoreMatrix) -> Result<RankingVector, AggregateError> {
    if matrix.n_systems() == 0 {
        return Err(AggregateError::NoSystems);
    }
    // A completely unscored system is the more precise diagnosis than "no
    // co-scored rivals", so check for it across the roster first.
    for (li, system) in matrix.systems().iter().enumerate() {
        if (0..matrix.n_instructions()).all(|ki| matrix.cell(ki, li).is_none()) {
            return Err(AggregateError::SystemWithoutScores(system.clone()));
        }
    }
    let l = matrix.n_systems();
    let mut scores = Vec::with_capacity(l);
    for (li, system) in matrix.systems().iter().enumerate() {
        let mut fractions = Vec::new();
        let mut any_score = false;
        for ki in 0..matrix.n_instructions() {
            let Some(own) = matrix.cell(ki, li) else {
                continue;
            };
            any_score = true;
            let mut rivals = 0usize;
            let mut beaten = 0usize;
            for lj in 0..l {
                if lj == li {
                    continue;
                }
                if let Some(other) = matrix.cell(ki, lj) {
                    rivals += 1;
                    if own > other {
                        beaten += 1;
                    }
                }
            }
            if rivals > 0 {
                fractions.push(beaten as f64 / rivals as f64);
            }
        }
        if !any_score {
            return Err(AggregateError::SystemWithoutScores(system.clone()));
        }
        if fractions.is_empty() {
            return Err(AggregateError::SystemWithoutComparisons(system.clone()));
        }
        let value = fractions.iter().sum::<f64>() / fractions.len() as f64;
        scores.push((system.clone(), value));
    }
    ranking(matrix, AggregationLabel::WinRate, scores)
}

/// Per-instruction pairwise comparisons as battles (both cells present;
/// equal scores become ties), in deterministic instruction-major order.
pub fn matrix_to_battles(matrix: &ScoreMatrix) -> Vec<BattleRecord> {
    let l = matrix.n_systems();
    let mut battles = Vec::new();
    for ki in 0..matrix.n_instructions() {
        for li in 0..l {
            let Some(a) = matrix.cell(ki, li) else {
                continue;
            };
            for lj in (li + 1)..l {
                let Some(b) = matrix.cell(ki, lj) else {
                    continue;
                };
                let outcome = if a > b {
                    Outcome::AWins
                } else if a < b {
                    Outcome::BWins
                } else {
                    Outcome::Tie
                };
                battles.push(
                    BattleRecord::new(
                        matrix.systems()[li].clone(),
                        matrix.systems()[lj].clone(),
                        outcome,
                    )
                    .expect("matrix columns are distinct systems"),
                );
            }
        }
    }
    battles
}

/// Bradley-Terry aggregation over per-instruction score comparisons.
pub fn aggregate_bt(
    matrix: &ScoreMatrix,
    config: &BtConfig,
) -> Result<RankingVector, AggregateError> {
    if matrix.n_systems() == 0 {
        return Err(AggregateError::NoSystems);
    }
    for (li, system) in matrix.systems().iter().enumerate() {
        if (0..matrix.n_instructions()).all(|ki| matrix.cell(ki, li).is_none()) {
            return Err(AggregateError::SystemWithoutScores(system.clone()));
        }
    }
    let battles = matrix_to_battles(matrix);
    let mut counts = PairCounts::new(matrix.systems().iter().cloned());
    for battle in &battles {
        counts.add_outcome(
            &battle.system_a,
            &battle.system_b,
            battle.outcome,
            config.tie_policy,
        );
    }
    let strengths = fit_bradley_terry(&counts, config)?;
    ranking(
        matrix,
        AggregationLabel::BradleyTerry,
        strengths.into_iter(),
    )
}
