//! Gold reference: the human-derived system ranking and pairwise win-rates
//! that judge-induced rankings are measured against.
//!
//! Both artifacts come from the same battle list. The ranking is a
//! Bradley-Terry fit over outcomes (ties counted as half a win each); the
//! win-rate table keeps only pairs with enough non-tied battles to be
//! meaningful (default threshold: 10).

use std::collections::BTreeSet;

use thiserror::Error;

use crate::bt::{fit_bradley_terry, BtConfig, BtError, PairCounts};
use crate::ids::SystemId;
use crate::model::{
    AggregationLabel, BattleRecord, ModelError, Outcome, RankingSource, RankingVector,
};
use crate::winrate::{PairSkipReason, WinRateSource, WinRateTable};

#[derive(Debug, Error)]
pub enum GoldError {
    #[error("no battles left after filtering")]
    NoBattles,
    #[error(transparent)]
    Bt(#[from] BtError),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    WinRate(#[from] crate::winrate::WinRateError),
}

/// The gold reference bundle: ranking, win-rate table, and the pairs that
/// met the eligibility threshold.
#[derive(Debug, Clone)]
pub struct GoldReference {
    pub ranking: RankingVector,
    pub winrates: WinRateTable,
    pub eligible_pairs: BTreeSet<(SystemId, SystemId)>,
}

impl GoldReference {
    pub fn build(
        battles: &[BattleRecord],
        system_filter: Option<&BTreeSet<SystemId>>,
        min_nontied: usize,
        bt_config: &BtConfig,
    ) -> Result<Self, GoldError> {
        let ranking = build_gold_ranking(battles, system_filter, bt_config)?;
        let winrates = build_gold_winrates(battles, system_filter, min_nontied)?;
        let eligible_pairs = winrates.pairs().map(|(pair, _)| pair.clone()).collect();
        Ok(Self {
            ranking,
            winrates,
            eligible_pairs,
        })
    }
}

fn battle_in_filter(battle: &BattleRecord, filter: Option<&BTreeSet<SystemId>>) -> bool {
    match filter {
        Some(keep) => keep.contains(&battle.system_a) && keep.contains(&battle.system_b),
        None => true,
    }
}

/// Bradley-Terry ranking over battle outcomes. Ties are half a win for each
/// side; log-strengths are centered to sum zero. Battles touching a system
/// outside `system_filter` are dropped first.
pub fn build_gold_ranking(
    battles: &[BattleRecord],
    system_filter: Option<&BTreeSet<SystemId>>,
    bt_config: &BtConfig,
) -> Result<RankingVector, GoldError> {
    let kept: Vec<&BattleRecord> = battles
        .iter()
        .filter(|b| battle_in_filter(b, system_filter))
        .collect();
    if kept.is_empty() {
        return Err(GoldError::NoBattles);
    }
    let mut counts = PairCounts::new(
        kept.iter()
            .flat_map(|b| [b.system_a.clone(), b.system_b.clone()]),
    );
    for battle in &kept {
        counts.add_outcome(
            &battle.system_a,
            &battle.system_b,
            battle.outcome,
            bt_config.tie_policy,
        );
    }
    let strengths = fit_bradley_terry(&counts, bt_config)?;
    Ok(RankingVector::new(
        RankingSource::Gold,
        AggregationLabel::GoldBradleyTerry,
        strengths,
    )?)
}

/// Gold pairwise win-rates: wins over non-tied battles, per unordered pair,
/// kept only where the pair has at least `min_nontied` non-tied battles.
/// Ineligible pairs are recorded with their skip reason instead.
pub fn build_gold_winrates(
    battles: &[BattleRecord],
    system_filter: Option<&BTreeSet<SystemId>>,
    min_nontied: usize,
) -> Result<WinRateTable, GoldError> {
    use std::collections::BTreeMap;

    // (wins for smaller id, wins for larger id, ties)
    let mut tallies: BTreeMap<(SystemId, SystemId), (u64, u64, u64)> = BTreeMap::new();
    for battle in battles {
        if !battle_in_filter(battle, system_filter) {
            continue;
        }
        let flipped = battle.system_a > battle.system_b;
        let key = if flipped {
            (battle.system_b.clone(), battle.system_a.clone())
        } else {
            (battle.system_a.clone(), battle.system_b.clone())
        };
        let tally = tallies.entry(key).or_insert((0, 0, 0));
        match (battle.outcome, flipped) {
            (Outcome::Tie, _) => tally.2 += 1,
            (Outcome::AWins, false) | (Outcome::BWins, true) => tally.0 += 1,
            (Outcome::BWins, false) | (Outcome::AWins, true) => tally.1 += 1,
        }
    }

    let mut table = WinRateTable::new(WinRateSource::Gold);
    for ((a, b), (wins_a, wins_b, ties)) in tallies {
        let n_nontied = (wins_a + wins_b) as usize;
        if n_nontied == 0 {
            table.mark_skipped(a, b, PairSkipReason::NoNonTiedComparisons);
        } else if n_nontied < min_nontied {
            table.mark_skipped(
                a,
                b,
                PairSkipReason::BelowThreshold {
                    n_nontied,
                    min_required: min_nontied,
                },
            );
        } else {
            table.insert_counts(a, b, wins_a as f64, wins_b as f64, ties as usize)?;
        }
    }
    Ok(table)
}

/// Affine rescaling of a BT log-strength for display alongside Elo-style
/// leaderboards. Display only: every metric in this crate consumes raw
/// log-strengths, which carry the same ordering.
pub fn elo_display(log_strength: f64, scale: f64, offset: f64) -> f64 {
    offset + scale * log_strength
}

/// Conventional display constants: 400 / ln 10 per log-strength unit,
/// centered at 1000.
pub fn default_elo_display(log_strength: f64) -> f64 {
    elo_display(log_strength, 400.0 / std::f64::consts::LN_10, 1000.0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn sys(s: &str) -> SystemId {
        SystemId::new(s).unwrap()
    }

    fn battle(a: &str, b: &str, outcome: Outcome) -> BattleRecord {
        BattleRecord::new(sys(a), sys(b), outcome).unwrap()
    }

    fn repeated(a: &str, b: &str, outcome: Outcome, n: usize) -> Vec<BattleRecord> {
        (0..n).map(|_| battle(a, b, outcome)).collect()
    }

    #[test]
    fn two_system_ranking_gap_is_ln3() {
        let mut battles = repeated("A", "B", Outcome::AWins, 3);
        battles.extend(repeated("A", "B", Outcome::BWins, 1));
        let r = build_gold_ranking(&battles, None, &BtConfig::default()).unwrap();
        let gap = r.score(&sys("A")).unwrap() - r.score(&sys("B")).unwrap();
        assert_abs_diff_eq!(gap, 3.0f64.ln(), epsilon = 1e-6);
        assert_abs_diff_eq!(
            r.score(&sys("A")).unwrap() + r.score(&sys("B")).unwrap(),
            0.0,
            epsilon = 1e-12
        );
    }

    #[test]
    fn all_ties_rank_zero() {
        let battles = repeated("A", "B", Outcome::Tie, 5);
        let r = build_gold_ranking(&battles, None, &BtConfig::default()).unwrap();
        assert_abs_diff_eq!(r.score(&sys("A")).unwrap(), 0.0, epsilon = 1e-9);
        assert_abs_diff_eq!(r.score(&sys("B")).unwrap(), 0.0, epsilon = 1e-9);
    }

    #[test]
    fn ranking_invariant_to_battle_order() {
        let mut battles = Vec::new();
        battles.extend(repeated("A", "B", Outcome::AWins, 4));
        battles.extend(repeated("B", "C", Outcome::AWins, 3));
        battles.extend(repeated("C", "A", Outcome::AWins, 2));
        battles.extend(repeated("A", "C", Outcome::Tie, 2));
        let forward = build_gold_ranking(&battles, None, &BtConfig::default()).unwrap();
        battles.reverse();
        let backward = build_gold_ranking(&battles, None, &BtConfig::default()).unwrap();
        for s in ["A", "B", "C"] {
            assert_abs_diff_eq!(
                forward.score(&sys(s)).unwrap(),
                backward.score(&sys(s)).unwrap(),
                epsilon = 1e-12
            );
        }
    }

    #[test]
    fn filter_drops_battles_touching_outside_systems() {
        let mut battles = repeated("A", "B", Outcome::AWins, 3);
        battles.extend(repeated("A", "B", Outcome::BWins, 1));
        // Battles against X would change the fit if kept.
        battles.extend(repeated("A", "X", Outcome::BWins, 50));
        let keep: BTreeSet<SystemId> = [sys("A"), sys("B")].into();
        let r = build_gold_ranking(&battles, Some(&keep), &BtConfig::default()).unwrap();
        assert_eq!(r.len(), 2);
        let gap = r.score(&sys("A")).unwrap() - r.score(&sys("B")).unwrap();
        assert_abs_diff_eq!(gap, 3.0f64.ln(), epsilon = 1e-6);
    }

    #[test]
    fn winrates_nine_of_twelve() {
        let mut battles = repeated("A", "B", Outcome::AWins, 9);
        battles.extend(repeated("A", "B", Outcome::BWins, 3));
        battles.extend(repeated("A", "B", Outcome::Tie, 4));
        let t = build_gold_winrates(&battles, None, 10).unwrap();
        assert_eq!(t.get(&sys("A"), &sys("B")), Some(0.75));
        assert_eq!(t.get(&sys("B"), &sys("A")), Some(0.25));
        let entry = t.entry(&sys("A"), &sys("B")).unwrap();
        assert_eq!(entry.n_comparisons, 12);
        assert_eq!(entry.n_ties_excluded, 4);
    }

    #[test]
    fn nine_nontied_battles_fall_below_default_threshold() {
        let mut battles = repeated("A", "B", Outcome::AWins, 6);
        battles.extend(repeated("A", "B", Outcome::BWins, 3));
        let t = build_gold_winrates(&battles, None, 10).unwrap();
        assert!(t.is_empty());
        let skips: Vec<_> = t.skipped_pairs().collect();
        assert_eq!(skips.len(), 1);
        assert_eq!(
            skips[0].1,
            &PairSkipReason::BelowThreshold {
                n_nontied: 9,
                min_required: 10
            }
        );
    }

    #[test]
    fn threshold_monotonicity() {
        let mut battles = Vec::new();
        battles.extend(repeated("A", "B", Outcome::AWins, 12));
        battles.extend(repeated("B", "C", Outcome::AWins, 10));
        battles.extend(repeated("A", "C", Outcome::AWins, 7));
        let loose = build_gold_winrates(&battles, None, 5).unwrap();
        let strict = build_gold_winrates(&battles, None, 10).unwrap();
        assert_eq!(loose.len(), 3);
        assert_eq!(strict.len(), 2);
        for (pair, _) in strict.pairs() {
            assert!(loose.get(&pair.0, &pair.1).is_some());
        }
    }

    #[test]
    fn all_tied_pair_is_skipped_with_reason() {
        let battles = repeated("A", "B", Outcome::Tie, 20);
        let t = build_gold_winrates(&battles, None, 10).unwrap();
        assert!(t.is_empty());
        assert_eq!(
            t.skipped_pairs().next().unwrap().1,
            &PairSkipReason::NoNonTiedComparisons
        );
    }

    #[test]
    fn bundle_exposes_eligible_pairs() {
        let mut battles = repeated("A", "B", Outcome::AWins, 12);
        battles.extend(repeated("B", "C", Outcome::AWins, 12));
        battles.extend(repeated("A", "C", Outcome::AWins, 3));
        let gold = GoldReference::build(&battles, None, 10, &BtConfig::default()).unwrap();
        assert_eq!(gold.eligible_pairs.len(), 2);
        assert!(gold
            .eligible_pairs
            .contains(&(sys("A"), sys("B"))));
        assert!(!gold.eligible_pairs.contains(&(sys("A"), sys("C"))));
        assert_eq!(gold.ranking.len(), 3);
    }

    #[test]
    fn elo_display_is_affine_and_order_preserving() {
        let lo = default_elo_display(-0.5);
        let mid = default_elo_display(0.0);
        let hi = default_elo_display(0.5);
        assert_abs_diff_eq!(mid, 1000.0);
        assert!(lo < mid && mid < hi);
        assert_abs_diff_eq!(hi - mid, 0.5 * 400.0 / std::f64::consts::LN_10, epsilon = 1e-9);
    }
}
