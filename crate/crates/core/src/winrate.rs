//! Pairwise win-rate tables over unordered system pairs.
//!
//! Each unordered pair stores a single oriented value — the win rate of the
//! lexicographically first system — so the complement identity
//! `WR(a, b) = 1 - WR(b, a)` holds exactly by construction: the reversed
//! orientation is always *derived*, never stored separately.

use std::collections::BTreeMap;
use std::collections::BTreeSet;

use thiserror::Error;

use crate::ids::SystemId;
use crate::model::JudgeSpec;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum WinRateError {
    #[error("win rate {0} is outside [0, 1]")]
    OutOfRange(f64),
    #[error("a win-rate pair needs two distinct systems, got `{0}` twice")]
    SamePair(SystemId),
    #[error("pair ({0}, {1}) inserted twice")]
    DuplicatePair(SystemId, SystemId),
    #[error("win counts ({wins_first} + {wins_second}) do not match any non-tied comparisons")]
    NoComparisons { wins_first: f64, wins_second: f64 },
}

/// Who produced a win-rate table.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum WinRateSource {
    Judge(JudgeSpec),
    Gold,
}

/// One pair's value: the win rate of the first-named system, the number of
/// non-tied comparisons behind it, and how many ties were excluded.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WinRateEntry {
    pub winrate_first: f64,
    pub n_comparisons: usize,
    pub n_ties_excluded: usize,
}

/// Why a pair carries no entry.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum PairSkipReason {
    /// Every comparison between the pair was a tie (or nothing co-occurred).
    NoNonTiedComparisons,
    /// Fewer non-tied comparisons than the eligibility threshold.
    BelowThreshold { n_nontied: usize, min_required: usize },
}

impl std::fmt::Display for PairSkipReason {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            PairSkipReason::NoNonTiedComparisons => f.write_str("no non-tied comparisons"),
            PairSkipReason::BelowThreshold {
                n_nontied,
                min_required,
            } => write!(f, "{n_nontied} non-tied comparisons < threshold {min_required}"),
        }
    }
}

/// Win rates over unordered system pairs, keyed by (smaller, larger) id.
#[derive(Debug, Clone, PartialEq)]
pub struct WinRateTable {
    source: WinRateSource,
    entries: BTreeMap<(SystemId, SystemId), WinRateEntry>,
    skipped: BTreeMap<(SystemId, SystemId), PairSkipReason>,
}

impl WinRateTable {
    pub fn new(source: WinRateSource) -> Self {
        Self {
            source,
            entries: BTreeMap::new(),
            skipped: BTreeMap::new(),
        }
    }

    pub fn source(&self) -> &WinRateSource {
        &self.source
    }

    /// Insert a pair from win counts (the lossless route: both orientations
    /// derive from the same integers, so no complement rounding happens).
    pub fn insert_counts(
        &mut self,
        a: SystemId,
        b: SystemId,
        wins_a: f64,
        wins_b: f64,
        n_ties_excluded: usize,
    ) -> Result<(), WinRateError> {
        let n_nontied = wins_a + wins_b;
        if n_nontied <= 0.0 {
            return Err(WinRateError::NoComparisons {
                wins_first: wins_a,
                wins_second: wins_b,
            });
        }
        let (first, second, wins_first) = if a <= b { (a, b, wins_a) } else { (b, a, wins_b) };
        self.insert_value(
            first,
            second,
            wins_first / n_nontied,
            n_nontied.round() as usize,
            n_ties_excluded,
        )
    }

    /// Insert a pair by value. `winrate` is the win rate of `a` over `b`
    /// (any orientation; it is normalized on storage).
    pub fn insert_value(
        &mut self,
        a: SystemId,
        b: SystemId,
        winrate: f64,
        n_comparisons: usize,
        n_ties_excluded: usize,
    ) -> Result<(), WinRateError> {
        if a == b {
            return Err(WinRateError::SamePair(a));
        }
        if !(0.0..=1.0).contains(&winrate) || winrate.is_nan() {
            return Err(WinRateError::OutOfRange(winrate));
        }
        let (key, winrate_first) = if a <= b {
            ((a, b), winrate)
        } else {
            ((b, a), 1.0 - winrate)
        };
        if self.entries.contains_key(&key) {
            return Err(WinRateError::DuplicatePair(key.0, key.1));
        }
        self.entries.insert(
            key,
            WinRateEntry {
                winrate_first,
                n_comparisons,
                n_ties_excluded,
            },
        );
        Ok(())
    }

    pub fn mark_skipped(&mut self, a: SystemId, b: SystemId, reason: PairSkipReason) {
        let key = if a <= b { (a, b) } else { (b, a) };
        self.skipped.insert(key, reason);
    }

    /// Oriented win rate of `a` over `b`, if the pair has an entry. The
    /// reversed orientation is derived as `1 - stored`, which is what makes
    /// the complement identity exact.
    pub fn get(&self, a: &SystemId, b: &SystemId) -> Option<f64> {
        if a <= b {
            self.entries
                .get(&(a.clone(), b.clone()))
                .map(|e| e.winrate_first)
        } else {
            self.entries
                .get(&(b.clone(), a.clone()))
                .map(|e| 1.0 - e.winrate_first)
        }
    }

    /// Entry (counts included) for the unordered pair.
    pub fn entry(&self, a: &SystemId, b: &SystemId) -> Option<&WinRateEntry> {
        let key = if a <= b {
            (a.clone(), b.clone())
        } else {
            (b.clone(), a.clone())
        };
        self.entries.get(&key)
    }

    /// Unordered pairs with entries, in deterministic key order.
    pub fn pairs(&self) -> impl Iterator<Item = (&(SystemId, SystemId), &WinRateEntry)> {
        self.entries.iter()
    }

    /// Pairs that were considered but skipped, with reasons.
    pub fn skipped_pairs(&self) -> impl Iterator<Item = (&(SystemId, SystemId), &PairSkipReason)> {
        self.skipped.iter()
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// All systems appearing in at least one entry.
    pub fn systems(&self) -> BTreeSet<SystemId> {
        self.entries
            .keys()
            .flat_map(|(a, b)| [a.clone(), b.clone()])
            .collect()
    }

    /// Pairs present in both tables, as (pair, self_winrate, other_winrate)
    /// with both values oriented first-over-second.
    pub fn shared_pairs<'a>(
        &'a self,
        other: &'a WinRateTable,
    ) -> Vec<(&'a (SystemId, SystemId), f64, f64)> {
        self.entries
            .iter()
            .filter_map(|(key, entry)| {
                other
                    .entries
                    .get(key)
                    .map(|o| (key, entry.winrate_first, o.winrate_first))
            })
            .collect()
    }

    /// Both orientations of every entry as (gold-orientation-free) directed
    /// values: `(a, b, WR(a, b))` and `(b, a, WR(b, a))`.
    pub fn oriented(&self) -> impl Iterator<Item = (&SystemId, &SystemId, f64)> {
        self.entries.iter().flat_map(|((a, b), e)| {
            [
                (a, b, e.winrate_first),
                (b, a, 1.0 - e.winrate_first),
            ]
        })
    }

    /// CSV with columns `system_a,system_b,winrate,n,n_ties_excluded`.
    pub fn write_csv<W: std::io::Write>(&self, writer: W) -> csv::Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(["system_a", "system_b", "winrate", "n", "n_ties_excluded"])?;
        for ((a, b), entry) in &self.entries {
            w.write_record([
                a.as_str(),
                b.as_str(),
                &entry.winrate_first.to_string(),
                &entry.n_comparisons.to_string(),
                &entry.n_ties_excluded.to_string(),
            ])?;
        }
        w.flush()?;
        Ok(())
    }

    /// CSV in the gold schema: `system_a,system_b,winrate,n_nontied`.
    pub fn write_gold_csv<W: std::io::Write>(&self, writer: W) -> csv::Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(["system_a", "system_b", "winrate", "n_nontied"])?;
        for ((a, b), entry) in &self.entries {
            w.write_record([
                a.as_str(),
                b.as_str(),
                &entry.winrate_first.to_string(),
                &entry.n_comparisons.to_string(),
            ])?;
        }
        w.flush()?;
        Ok(())
    }
}
