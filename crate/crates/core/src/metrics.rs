//! Ranking agreement and win-rate fidelity metrics.
//!
//! * `kendall_tau` — tie-corrected Kendall tau-b between two rankings,
//!   computed over their common systems with an O(n log n) inversion count.
//! * `bootstrap_tau_ci` — percentile confidence interval for tau under
//!   resampling of instructions (rows) with replacement.
//! * `judge_winrates` — pairwise win-rates induced by a score matrix, ties
//!   excluded.
//! * `winrate_accuracy` / `winrate_mse` — agreement with a gold table on
//!   who wins, and squared-error distance, over shared pairs.
//! * `score_distribution` — histogram/support/tie-rate summary of the raw
//!   scores a judge emits.

use std::collections::BTreeSet;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::aggregate::{aggregate, AggregateError, AggregationMethod};
use crate::ids::SystemId;
use crate::matrix::{MatrixError, ScoreMatrix};
use crate::model::{JudgeSpec, RankingVector};
use crate::winrate::{PairSkipReason, WinRateSource, WinRateTable};

#[derive(Debug, Error)]
pub enum MetricsError {
    #[error("rankings share only {n_common} system(s); tau needs at least 2")]
    InsufficientOverlap { n_common: usize },
    #[error("tau is undefined: every score in the {side} ranking is tied")]
    TauUndefined { side: &'static str },
    #[error("bootstrap needs at least {minimum} resamples, got {requested}")]
    TooFewResamples { requested: usize, minimum: usize },
    #[error("all {n_undefined} bootstrap resamples produced an undefined tau")]
    AllResamplesUndefined { n_undefined: usize },
    #[error("confidence must lie strictly between 0 and 1, got {0}")]
    BadConfidence(f64),
    #[error("pair references system `{0}` which the matrix does not score")]
    UnknownSystemInPair(SystemId),
    #[error("the two win-rate tables share no pairs")]
    EmptyIntersection,
    #[error("all {n_excluded} shared pairs have an exact 0.5 win-rate on one side; accuracy is undefined")]
    NoDecidedPairs { n_excluded: usize },
    #[error("matrix has no scored cells")]
    EmptyMatrix,
    #[error(transparent)]
    Aggregate(#[from] AggregateError),
    #[error(transparent)]
    Matrix(#[from] MatrixError),
}

// ---------------------------------------------------------------------------
// Kendall tau-b
// ---------------------------------------------------------------------------

/// Pair bookkeeping behind tau-b, exposed so the numerator/denominator can
/// be inspected in tests.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TauCounts {
    /// Concordant minus discordant pairs.
    pub c_minus_d: i128,
    /// Total pairs n(n-1)/2.
    pub n0: u128,
    /// Pairs tied in the first sequence.
    pub n1: u128,
    /// Pairs tied in the second sequence.
    pub n2: u128,
}

impl TauCounts {
    /// tau-b = (C - D) / sqrt((n0 - n1)(n0 - n2)).
    pub fn tau(&self) -> Result<f64, MetricsError> {
        if self.n0 == self.n1 {
            return Err(MetricsError::TauUndefined { side: "first" });
        }
        if self.n0 == self.n2 {
            return Err(MetricsError::TauUndefined { side: "second" });
        }
        let num = self.c_minus_d as f64;
        let den = ((self.n0 - self.n1) as f64) * ((self.n0 - self.n2) as f64);
        Ok(num / den.sqrt())
    }
}

fn tied_pairs(sorted: &[f64]) -> u128 {
    let mut total = 0u128;
    let mut run = 1u128;
    for w in sorted.windows(2) {
        if w[0] == w[1] {
            run += 1;
        } else {
            total += run * (run - 1) / 2;
            run = 1;
        }
    }
    total + run * (run - 1) / 2
}

/// Count inversions (strict descents) in `values` by merge sort.
fn count_inversions(values: &mut [f64], scratch: &mut Vec<f64>) -> u128 {
    let n = values.len();
    if n < 2 {
        return 0;
    }
    let mid = n / 2;
    let (left, right) = values.split_at_mut(mid);
    let mut inversions = count_inversions(left, scratch) + count_inversions(right, scratch);

    scratch.clear();
    let (mut i, mut j) = (0usize, 0usize);
    while i < left.len() && j < right.len() {
        // Stable merge: equal values go left-first and count no inversion.
        if left[i] <= right[j] {
            scratch.push(left[i]);
            i += 1;
        } else {
            inversions += (left.len() - i) as u128;
            scratch.push(right[j]);
            j += 1;
        }
    }
    scratch.extend_from_slice(&left[i..]);
    scratch.extend_from_slice(&right[j..]);
    values.copy_from_slice(scratch);
    inversions
}

/// Tau-b pair counts for paired score sequences, via sort + merge-sort
/// inversion counting (Knight's method).
pub fn tau_counts(xs: &[f64], ys: &[f64]) -> TauCounts {
    assert_eq!(xs.len(), ys.len(), "paired sequences must match in length");
    let n = xs.len();
    let n0 = (n as u128) * (n as u128 - 1) / 2;

    let mut paired: Vec<(f64, f64)> = xs.iter().copied().zip(ys.iter().copied()).collect();
    paired.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.total_cmp(&b.1)));

    // Ties in x, and joint ties, from runs of the sorted pairing.
    let mut n1 = 0u128;
    let mut n3 = 0u128;
    let mut x_run = 1u128;
    let mut xy_run = 1u128;
    for w in paired.windows(2) {
        if w[0].0 == w[1].0 {
            x_run += 1;
            if w[0].1 == w[1].1 {
                xy_run += 1;
            } else {
                n3 += xy_run * (xy_run - 1) / 2;
                xy_run = 1;
            }
        } else {
            n1 += x_run * (x_run - 1) / 2;
            n3 += xy_run * (xy_run - 1) / 2;
            x_run = 1;
            xy_run = 1;
        }
    }
    n1 += x_run * (x_run - 1) / 2;
    n3 += xy_run * (xy_run - 1) / 2;

    let mut sorted_y: Vec<f64> = ys.to_vec();
    sorted_y.sort_by(f64::total_cmp);
    let n2 = tied_pairs(&sorted_y);

    let mut merge_y: Vec<f64> = paired.iter().map(|p| p.1).collect();
    let mut scratch = Vec::with_capacity(merge_y.len());
    let discordant = count_inversions(&mut merge_y, &mut scratch);

    // Non-tied pairs split into concordant and discordant:
    // C + D = n0 - n1 - n2 + n3, hence C - D = that minus 2D.
    // (Summed before subtracting: n1 + n2 - n3 <= n0 by inclusion-exclusion,
    // but n0 - n1 - n2 alone can underflow when everything is tied.)
    let c_plus_d = n0 + n3 - n1 - n2;
    let c_minus_d = c_plus_d as i128 - 2 * discordant as i128;

    TauCounts {
        c_minus_d,
        n0,
        n1,
        n2,
    }
}

/// Kendall tau-b between paired score sequences.
pub fn kendall_tau_scores(xs: &[f64], ys: &[f64]) -> Result<f64, MetricsError> {
    if xs.len() < 2 {
        return Err(MetricsError::InsufficientOverlap { n_common: xs.len() });
    }
    tau_counts(xs, ys).tau()
}

/// Kendall tau-b between two rankings over their common systems.
pub fn kendall_tau(a: &RankingVector, b: &RankingVector) -> Result<f64, MetricsError> {
    let mut xs = Vec::new();
    let mut ys = Vec::new();
    for (system, &score_a) in a.scores() {
        if let Some(score_b) = b.score(system) {
            xs.push(score_a);
            ys.push(score_b);
        }
    }
    kendall_tau_scores(&xs, &ys)
}

// ---------------------------------------------------------------------------
// Bootstrap CI
// ---------------------------------------------------------------------------

/// A percentile bootstrap interval for tau, with resample bookkeeping.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BootstrapCi {
    pub low: f64,
    pub high: f64,
    pub confidence: f64,
    pub n_resamples: usize,
    /// Resamples whose tau (or aggregation) was undefined, excluded from
    /// the percentiles.
    pub n_undefined: usize,
}

/// Empirical quantile with linear interpolation between order statistics.
fn quantile(sorted: &[f64], q: f64) -> f64 {
    debug_assert!(!sorted.is_empty());
    if sorted.len() == 1 {
        return sorted[0];
    }
    let h = (sorted.len() - 1) as f64 * q;
    let lo = h.floor() as usize;
    let hi = h.ceil() as usize;
    if lo == hi {
        sorted[lo]
    } else {
        sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
    }
}

/// Percentile bootstrap CI for the tau between `matrix` aggregated by
/// `method` and the `gold` ranking. Instructions (rows) are the resampling
/// unit. Deterministic under `seed`; resample r draws from an independent
/// stream r of a ChaCha8 generator.
pub fn bootstrap_tau_ci(
    matrix: &ScoreMatrix,
    method: &AggregationMethod,
    gold: &RankingVector,
    n_resamples: usize,
    confidence: f64,
    seed: u64,
) -> Result<BootstrapCi, MetricsError> {
    const MIN_RESAMPLES: usize = 100;
    if n_resamples < MIN_RESAMPLES {
        return Err(MetricsError::TooFewResamples {
            requested: n_resamples,
            minimum: MIN_RESAMPLES,
        });
    }
    if !(confidence > 0.0 && confidence < 1.0) {
        return Err(MetricsError::BadConfidence(confidence));
    }
    let k = matrix.n_instructions();
    if k == 0 {
        return Err(MetricsError::EmptyMatrix);
    }

    let mut taus = Vec::with_capacity(n_resamples);
    let mut n_undefined = 0usize;
    for r in 0..n_resamples {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(r as u64);
        let rows: Vec<usize> = (0..k).map(|_| rng.gen_range(0..k)).collect();
        let resampled = matrix.resample_instructions(&rows)?;
        let tau = aggregate(&resampled, method)
            .map_err(MetricsError::from)
            .and_then(|ranking| kendall_tau(&ranking, gold));
        match tau {
            Ok(t) => taus.push(t),
            Err(_) => n_undefined += 1,
        }
    }
    if taus.is_empty() {
        return Err(MetricsError::AllResamplesUndefined { n_undefined });
    }
    taus.sort_by(f64::total_cmp);
    let tail = (1.0 - confidence) / 2.0;
    Ok(BootstrapCi {
        low: quantile(&taus, tail),
        high: quantile(&taus, 1.0 - tail),
        confidence,
        n_resamples,
        n_undefined,
    })
}

// ---------------------------------------------------------------------------
// Judge win-rates and table-vs-table metrics
// ---------------------------------------------------------------------------

/// Win-rates induced by a score matrix over the requested unordered pairs:
/// per pair, the fraction of instructions where both responses are scored
/// and the scores differ, won by the higher score. Pairs with no non-tied
/// instance are recorded as skipped.
pub fn judge_winrates(
    matrix: &ScoreMatrix,
    pairs: &BTreeSet<(SystemId, SystemId)>,
) -> Result<WinRateTable, MetricsError> {
    let mut table = WinRateTable::new(WinRateSource::Judge(matrix.judge().clone()));
    let index = |s: &SystemId| -> Result<usize, MetricsError> {
        matrix
            .systems()
            .iter()
            .position(|t| t == s)
            .ok_or_else(|| MetricsError::UnknownSystemInPair(s.clone()))
    };
    for (a, b) in pairs {
        let (a, b) = if a <= b { (a, b) } else { (b, a) };
        let (ia, ib) = (index(a)?, index(b)?);
        let mut wins_a = 0u64;
        let mut wins_b = 0u64;
        let mut ties = 0usize;
        for ki in 0..matrix.n_instructions() {
            let (Some(sa), Some(sb)) = (matrix.cell(ki, ia), matrix.cell(ki, ib)) else {
                continue;
            };
            if sa > sb {
                wins_a += 1;
            } else if sb > sa {
                wins_b += 1;
            } else {
                ties += 1;
            }
        }
        if wins_a + wins_b == 0 {
            table.mark_skipped(a.clone(), b.clone(), PairSkipReason::NoNonTiedComparisons);
        } else {
            table
                .insert_counts(a.clone(), b.clone(), wins_a as f64, wins_b as f64, ties)
                .expect("pair orientation and counts are valid by construction");
        }
    }
    Ok(table)
}

/// All unordered pairs of a matrix's systems.
pub fn all_pairs(matrix: &ScoreMatrix) -> BTreeSet<(SystemId, SystemId)> {
    let systems = matrix.systems();
    let mut pairs = BTreeSet::new();
    for (i, a) in systems.iter().enumerate() {
        for b in &systems[i + 1..] {
            pairs.insert(if a <= b {
                (a.clone(), b.clone())
            } else {
                (b.clone(), a.clone())
            });
        }
    }
    pairs
}

/// Win-rate accuracy against a gold table, with exact-0.5 pairs excluded.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WinRateAccuracy {
    pub accuracy: f64,
    /// Pairs that entered the accuracy denominator.
    pub n_pairs: usize,
    /// Shared pairs excluded because one side sat exactly at 0.5.
    pub n_excluded_half: usize,
}

/// Fraction of shared pairs where judge and gold agree on the winning side
/// (win-rate above 0.5). A pair with an exact 0.5 on either side has no
/// winner to agree on; such pairs leave the denominator and are counted.
pub fn winrate_accuracy(
    judge: &WinRateTable,
    gold: &WinRateTable,
) -> Result<WinRateAccuracy, MetricsError> {
    let shared = judge.shared_pairs(gold);
    if shared.is_empty() {
        return Err(MetricsError::EmptyIntersection);
    }
    let mut agree = 0usize;
    let mut decided = 0usize;
    let mut excluded = 0usize;
    for (_, wp, wg) in &shared {
        if *wp == 0.5 || *wg == 0.5 {
            excluded += 1;
            continue;
        }
        decided += 1;
        if (*wp > 0.5) == (*wg > 0.5) {
            agree += 1;
        }
    }
    if decided == 0 {
        return Err(MetricsError::NoDecidedPairs {
            n_excluded: excluded,
        });
    }
    Ok(WinRateAccuracy {
        accuracy: agree as f64 / decided as f64,
        n_pairs: decided,
        n_excluded_half: excluded,
    })
}

/// Mean squared error between the tables over shared pairs, each unordered
/// pair counted once (mirrored orientations square to the same error).
pub fn winrate_mse(judge: &WinRateTable, gold: &WinRateTable) -> Result<f64, MetricsError> {
    let shared = judge.shared_pairs(gold);
    if shared.is_empty() {
        return Err(MetricsError::EmptyIntersection);
    }
    let sum: f64 = shared.iter().map(|(_, wp, wg)| (wg - wp) * (wg - wp)).sum();
    Ok(sum / shared.len() as f64)
}

// ---------------------------------------------------------------------------
// Score distributions
// ---------------------------------------------------------------------------

/// Histogram shape: exact bins for discrete scales, uniform bins otherwise.
#[derive(Debug, Clone, PartialEq)]
pub enum Histogram {
    /// One bin per distinct value (ascending), for discrete scales.
    Discrete { values: Vec<f64>, counts: Vec<u64> },
    /// `edges.len() == counts.len() + 1`; bin i is [edges[i], edges[i+1]),
    /// the last bin closed on the right.
    Uniform { edges: Vec<f64>, counts: Vec<u64> },
}

impl Histogram {
    pub fn counts(&self) -> &[u64] {
        match self {
            Histogram::Discrete { counts, .. } => counts,
            Histogram::Uniform { counts, .. } => counts,
        }
    }

    pub fn total(&self) -> u64 {
        self.counts().iter().sum()
    }
}

/// Summary of the raw score distribution a judge produced.
#[derive(Debug, Clone, PartialEq)]
pub struct DistributionSummary {
    pub judge: JudgeSpec,
    pub histogram: Histogram,
    /// Number of distinct score values observed.
    pub support_size: usize,
    /// Fraction of per-instruction system pairs (both scored) with equal
    /// scores; 0 when no pair is comparable.
    pub tie_rate: f64,
    /// Comparable per-instruction pairs behind `tie_rate`.
    pub n_pairs: usize,
    pub min: f64,
    pub max: f64,
    pub mean: f64,
    /// Population standard deviation.
    pub std: f64,
}

const UNIFORM_BINS: usize = 50;

/// Summarize the scores in a matrix: histogram (exact-value bins for
/// discrete realizations, 50 uniform bins otherwise), support size,
/// per-instruction tie rate, and moments.
pub fn score_distribution(matrix: &ScoreMatrix) -> Result<DistributionSummary, MetricsError> {
    let mut values: Vec<f64> = Vec::with_capacity(matrix.n_scored());
    for ki in 0..matrix.n_instructions() {
        for li in 0..matrix.n_systems() {
            if let Some(v) = matrix.cell(ki, li) {
                values.push(v);
            }
        }
    }
    if values.is_empty() {
        return Err(MetricsError::EmptyMatrix);
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
    let mut sorted = values.clone();
    sorted.sort_by(f64::total_cmp);
    let (min, max) = (sorted[0], sorted[sorted.len() - 1]);

    let mut distinct: Vec<f64> = Vec::new();
    let mut distinct_counts: Vec<u64> = Vec::new();
    for &v in &sorted {
        match distinct.last() {
            Some(&last) if last == v => *distinct_counts.last_mut().unwrap() += 1,
            _ => {
                distinct.push(v);
                distinct_counts.push(1);
            }
        }
    }
    let support_size = distinct.len();

    let histogram = if matrix.judge().realization.is_discrete() {
        Histogram::Discrete {
            values: distinct,
            counts: distinct_counts,
        }
    } else if min == max {
        Histogram::Uniform {
            edges: vec![min, max],
            counts: vec![sorted.len() as u64],
        }
    } else {
        let width = (max - min) / UNIFORM_BINS as f64;
        let edges: Vec<f64> = (0..=UNIFORM_BINS)
            .map(|i| min + width * i as f64)
            .collect();
        let mut counts = vec![0u64; UNIFORM_BINS];
        for &v in &sorted {
            let mut bin = ((v - min) / width) as usize;
            if bin >= UNIFORM_BINS {
                bin = UNIFORM_BINS - 1; // max value closes the last bin
            }
            counts[bin] += 1;
        }
        Histogram::Uniform { edges, counts }
    };

    let mut ties = 0usize;
    let mut pairs = 0usize;
    for ki in 0..matrix.n_instructions() {
        let row = matrix.row(ki);
        for i in 0..row.len() {
            let Some(a) = row[i] else { continue };
            for b in row[i + 1..].iter().flatten() {
                pairs += 1;
                if a == *b {
                    ties += 1;
                }
            }
        }
    }
    let tie_rate = if pairs == 0 {
        0.0
    } else {
        ties as f64 / pairs as f64
    };

    Ok(DistributionSummary {
        judge: matrix.judge().clone(),
        histogram,
        support_size,
        tie_rate,
        n_pairs: pairs,
        min,
        max,
        mean,
        std: var.sqrt(),
    })
}
