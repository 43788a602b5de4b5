//! Judge behavior characterization: decisiveness and per-system bias.
//!
//! Decisiveness models the judge's pairwise win-rates as a beta CDF of the
//! gold win-rates, `WR^p ≈ F_α(WR^g)` with both shape parameters equal to
//! α. α > 1 amplifies gaps between systems (over-decisive), α < 1 shrinks
//! them toward 0.5 (indecisive), α = 1 is the identity.
//!
//! Bias compares a judge's win-rates for one system against the gold
//! win-rates over the same opponents (raw bias B), and against the fitted
//! curve's prediction (corrected bias B′), which separates "likes system X"
//! from "is decisive about everything".

use std::collections::{BTreeMap, BTreeSet};

use thiserror::Error;

pub use crate::betainc::beta_cdf;
use crate::betainc::{student_t_sf, NumericsError};
use crate::ids::{JudgeModelId, SystemId};
use crate::model::JudgeSpec;
use crate::winrate::{WinRateSource, WinRateTable};

/// α is searched within this range.
pub const ALPHA_MIN: f64 = 0.1;
pub const ALPHA_MAX: f64 = 10_000.0;

#[derive(Debug, Error)]
pub enum BehaviorError {
    #[error("decisiveness fit needs at least 2 shared pairs, got {n_shared}")]
    TooFewPairs { n_shared: usize },
    #[error(
        "decisiveness fit is degenerate: every judge win-rate is exactly 0.5, \
         so the distance-from-half weights vanish"
    )]
    DegenerateFit,
    #[error("the table is a gold table; behavior analysis needs a judge table")]
    GoldAsJudge,
    #[error("bias needs at least one shared pair")]
    NoSharedPairs,
    #[error(transparent)]
    Numerics(#[from] NumericsError),
}

// ---------------------------------------------------------------------------
// Decisiveness fit
// ---------------------------------------------------------------------------

/// Weighting of absolute errors in the decisiveness objective.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum WeightScheme {
    /// γ(WR^p) = |WR^p − 0.5|: errors at extreme win-rates count more.
    #[default]
    DistanceFromHalf,
    /// γ = 1, for sensitivity analysis.
    Uniform,
}

impl WeightScheme {
    fn weight(self, wp: f64) -> f64 {
        match self {
            WeightScheme::DistanceFromHalf => (wp - 0.5).abs(),
            WeightScheme::Uniform => 1.0,
        }
    }
}

/// Result of the beta-CDF decisiveness fit.
#[derive(Debug, Clone, PartialEq)]
pub struct BetaFit {
    pub judge: JudgeSpec,
    /// Fitted shape parameter, in [0.1, 10000].
    pub alpha: f64,
    /// Weighted sum of absolute errors at the optimum.
    pub objective_value: f64,
    /// Shared unordered pairs behind the fit (each contributes both
    /// orientations as data points).
    pub n_pairs: usize,
    pub weights: WeightScheme,
}

impl BetaFit {
    /// Samples of the fitted curve on a uniform grid over [0, 1], for
    /// plotting: (gold win-rate, predicted win-rate).
    pub fn curve_samples(&self, n: usize) -> Vec<(f64, f64)> {
        (0..=n)
            .map(|i| {
                let x = i as f64 / n as f64;
                (x, beta_cdf(x, self.alpha).expect("grid point is in domain"))
            })
            .collect()
    }
}

/// The (gold, judge) win-rate data points entering fit and bias: both
/// orientations of every shared pair.
fn oriented_points(judge: &WinRateTable, gold: &WinRateTable) -> Vec<(f64, f64)> {
    let mut points = Vec::new();
    for (_, wp, wg) in judge.shared_pairs(gold) {
        points.push((wg, wp));
        points.push((1.0 - wg, 1.0 - wp));
    }
    points
}

fn objective(points: &[(f64, f64)], weights: WeightScheme, alpha: f64) -> f64 {
    points
        .iter()
        .map(|&(wg, wp)| {
            let predicted = beta_cdf(wg, alpha).expect("win-rates are in [0, 1]");
            weights.weight(wp) * (wp - predicted).abs()
        })
        .sum()
}

/// Fit α by minimizing the weighted sum of absolute errors
/// Σ γ(WR^p)·|WR^p − F_α(WR^g)| over both orientations of every shared
/// pair. Deterministic: coarse scan over ln α, golden-section to a bracket
/// of 1e-4 in log-space, one parabolic refinement.
pub fn fit_decisiveness(
    judge: &WinRateTable,
    gold: &WinRateTable,
    weights: WeightScheme,
) -> Result<BetaFit, BehaviorError> {
    let WinRateSource::Judge(spec) = judge.source() else {
        return Err(BehaviorError::GoldAsJudge);
    };
    let n_shared = judge.shared_pairs(gold).len();
    if n_shared < 2 {
        return Err(BehaviorError::TooFewPairs { n_shared });
    }
    let points = oriented_points(judge, gold);
    if points
        .iter()
        .all(|&(_, wp)| weights.weight(wp) == 0.0)
    {
        return Err(BehaviorError::DegenerateFit);
    }

    let f = |t: f64| objective(&points, weights, t.exp());
    let (lo, hi) = (ALPHA_MIN.ln(), ALPHA_MAX.ln());

    // Coarse scan to bracket the basin.
    const SCAN_POINTS: usize = 61;
    let step = (hi - lo) / (SCAN_POINTS - 1) as f64;
    let mut best_i = 0;
    let mut best_f = f64::INFINITY;
    for i in 0..SCAN_POINTS {
        let v = f(lo + step * i as f64);
        if v < best_f {
            best_f = v;
            best_i = i;
        }
    }
    let mut a = lo + step * best_i.saturating_sub(1) as f64;
    let mut b = (lo + step * (best_i + 1) as f64).min(hi);

    // Golden-section to a 1e-4 bracket in log-space.
    let inv_phi = (5.0_f64.sqrt() - 1.0) / 2.0;
    let mut c = b - inv_phi * (b - a);
    let mut d = a + inv_phi * (b - a);
    let mut fc = f(c);
    let mut fd = f(d);
    while b - a > 1e-4 {
        if fc < fd {
            b = d;
            d = c;
            fd = fc;
            c = b - inv_phi * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + inv_phi * (b - a);
            fd = f(d);
        }
    }

    // One parabolic refinement through the bracket ends and midpoint.
    let mid = (a + b) / 2.0;
    let (fa, fm, fb) = (f(a), f(mid), f(b));
    let mut best_t = mid;
    let mut best_val = fm;
    for (t, v) in [(a, fa), (b, fb)] {
        if v < best_val {
            best_val = v;
            best_t = t;
        }
    }
    let denom = (a - mid) * (fm - fb) - (mid - b) * (fa - fm);
    if denom.abs() > 0.0 {
        let vertex = mid
            + 0.5 * ((a - mid).powi(2) * (fm - fb) + (mid - b).powi(2) * (fa - fm)) / denom;
        if vertex.is_finite() && vertex > lo && vertex < hi {
            let fv = f(vertex);
            if fv < best_val {
                best_val = fv;
                best_t = vertex;
            }
        }
    }

    Ok(BetaFit {
        judge: spec.clone(),
        alpha: best_t.exp().clamp(ALPHA_MIN, ALPHA_MAX),
        objective_value: best_val,
        n_pairs: n_shared,
        weights,
    })
}

// ---------------------------------------------------------------------------
// Bias
// ---------------------------------------------------------------------------

/// Bias of one system under one judge.
#[derive(Debug, Clone, PartialEq)]
pub struct SystemBias {
    /// B: mean over opponents of WR^p − WR^g.
    pub raw_bias: f64,
    /// B′: mean over opponents of WR^p − F_α(WR^g); present when a fit was
    /// supplied.
    pub corrected_bias: Option<f64>,
    pub n_opponents: usize,
}

/// Per-system bias for one judge, plus the spread of corrected bias.
#[derive(Debug, Clone, PartialEq)]
pub struct BiasReport {
    pub judge: JudgeSpec,
    pub systems: BTreeMap<SystemId, SystemBias>,
    /// Population standard deviation of B′ over systems (bias propensity);
    /// present when a fit was supplied.
    pub bias_sigma: Option<f64>,
    /// Judge-table systems with zero shared opponents, excluded from the
    /// maps.
    pub excluded: Vec<SystemId>,
    /// Per-system corrected per-opponent terms (WR^p − predicted), keyed
    /// like `systems`; the paired samples behind self-bias testing. Empty
    /// when no fit was supplied.
    pub corrected_terms: BTreeMap<SystemId, Vec<f64>>,
}

/// Compute raw and corrected bias per system from shared pairs. Every
/// shared pair (a,b) contributes the oriented term WR(a over b) − gold to
/// a's opponent list and the mirrored term to b's.
pub fn system_bias(
    judge: &WinRateTable,
    gold: &WinRateTable,
    fit: Option<&BetaFit>,
) -> Result<BiasReport, BehaviorError> {
    let WinRateSource::Judge(spec) = judge.source() else {
        return Err(BehaviorError::GoldAsJudge);
    };
    let shared = judge.shared_pairs(gold);
    if shared.is_empty() {
        return Err(BehaviorError::NoSharedPairs);
    }

    let mut raw_terms: BTreeMap<SystemId, Vec<f64>> = BTreeMap::new();
    let mut corrected: BTreeMap<SystemId, Vec<f64>> = BTreeMap::new();
    for (pair, wp, wg) in &shared {
        let (a, b) = (&pair.0, &pair.1);
        raw_terms.entry(a.clone()).or_default().push(wp - wg);
        raw_terms.entry(b.clone()).or_default().push(wg - wp);
        if let Some(fit) = fit {
            let predicted = beta_cdf(*wg, fit.alpha)?;
            corrected.entry(a.clone()).or_default().push(wp - predicted);
            // The mirrored orientation: (1−wp) − F(1−wg) = −(wp − F(wg)),
            // exact because the fitted curve is point-symmetric.
            corrected
                .entry(b.clone())
                .or_default()
                .push(predicted - wp);
        }
    }

    let mut systems = BTreeMap::new();
    for (system, terms) in &raw_terms {
        let n = terms.len();
        let raw = terms.iter().sum::<f64>() / n as f64;
        let corr = corrected
            .get(system)
            .map(|ts| ts.iter().sum::<f64>() / ts.len() as f64);
        systems.insert(
            system.clone(),
            SystemBias {
                raw_bias: raw,
                corrected_bias: corr,
                n_opponents: n,
            },
        );
    }

    let bias_sigma = if fit.is_some() {
        let values: Vec<f64> = systems
            .values()
            .filter_map(|b| b.corrected_bias)
            .collect();
        let n = values.len() as f64;
        let mean = values.iter().sum::<f64>() / n;
        Some(
            (values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n).sqrt(),
        )
    } else {
        None
    };

    let covered: BTreeSet<&SystemId> = systems.keys().collect();
    let excluded: Vec<SystemId> = judge
        .systems()
        .into_iter()
        .filter(|s| !covered.contains(s))
        .collect();

    Ok(BiasReport {
        judge: spec.clone(),
        systems,
        bias_sigma,
        excluded,
        corrected_terms: corrected,
    })
}

// ---------------------------------------------------------------------------
// Self-bias
// ---------------------------------------------------------------------------

/// One judge's bias toward the system built on the same underlying model.
#[derive(Debug, Clone, PartialEq)]
pub struct SelfBiasRow {
    pub judge: JudgeSpec,
    pub linked_system: SystemId,
    /// Corrected bias B′ of the linked system.
    pub self_bias: f64,
    pub n_opponents: usize,
    /// One-sided paired t-test p-value (mean per-opponent corrected term
    /// > 0), computed only when self_bias is positive and ≥2 opponents
    /// exist.
    pub p_value: Option<f64>,
    /// p-value after Bonferroni correction across the positive cases
    /// tested in this call.
    pub p_value_corrected: Option<f64>,
}

/// Extract self-bias per judge: the corrected bias of the system linked to
/// the judge's model. Positive values get a one-sided paired t-test over
/// that system's per-opponent corrected terms, Bonferroni-corrected across
/// the positive cases. Judges without a link, or whose linked system has
/// no bias entry, are omitted. Reports computed without a fit carry no
/// corrected terms and are omitted likewise.
pub fn self_bias(
    reports: &[BiasReport],
    identity_map: &BTreeMap<JudgeModelId, SystemId>,
) -> Vec<SelfBiasRow> {
    let mut rows: Vec<SelfBiasRow> = Vec::new();
    for report in reports {
        let Some(linked) = identity_map.get(&report.judge.model) else {
            continue;
        };
        let Some(bias) = report.systems.get(linked) else {
            continue;
        };
        let Some(self_bias_value) = bias.corrected_bias else {
            continue;
        };
        let terms = report
            .corrected_terms
            .get(linked)
            .map(Vec::as_slice)
            .unwrap_or(&[]);
        let p_value = if self_bias_value > 0.0 && terms.len() >= 2 {
            Some(paired_t_pvalue_one_sided(terms))
        } else {
            None
        };
        rows.push(SelfBiasRow {
            judge: report.judge.clone(),
            linked_system: linked.clone(),
            self_bias: self_bias_value,
            n_opponents: bias.n_opponents,
            p_value,
            p_value_corrected: None,
        });
    }

    let n_tested = rows.iter().filter(|r| r.p_value.is_some()).count();
    for row in &mut rows {
        row.p_value_corrected = row
            .p_value
            .map(|p| (p * n_tested as f64).min(1.0));
    }
    rows
}

/// One-sided p-value for H1: mean(terms) > 0, via a paired t statistic.
fn paired_t_pvalue_one_sided(terms: &[f64]) -> f64 {
    let n = terms.len() as f64;
    let mean = terms.iter().sum::<f64>() / n;
    let var = terms.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1.0);
    if var == 0.0 {
        return if mean > 0.0 { 0.0 } else { 1.0 };
    }
    let t = mean / (var / n).sqrt();
    student_t_sf(t, n - 1.0).expect("dof >= 1 by the caller's length check")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ids::JudgeModelId;
    use crate::model::Realization;
    use approx::assert_abs_diff_eq;

    fn sys(s: &str) -> SystemId {
        SystemId::new(s).unwrap()
    }

    fn judge_spec() -> JudgeSpec {
        JudgeSpec::new(JudgeModelId::new("m").unwrap(), Realization::Reward)
    }

    /// Complete tables over `strengths.len()` systems with gold win-rates
    /// from strength differences and judge win-rates on the α* curve with
    /// per-system additive bias.
    fn curve_tables(
        strengths: &[f64],
        alpha_star: f64,
        bias: &[f64],
    ) -> (WinRateTable, WinRateTable) {
        let sigmoid = |x: f64| 1.0 / (1.0 + (-x).exp());
        let mut gold = WinRateTable::new(WinRateSource::Gold);
        let mut judge = WinRateTable::new(WinRateSource::Judge(judge_spec()));
        for i in 0..strengths.len() {
            for j in (i + 1)..strengths.len() {
                let (a, b) = (sys(&format!("s{i:02}")), sys(&format!("s{j:02}")));
                let wg = sigmoid(strengths[i] - strengths[j]);
                let wp = (beta_cdf(wg, alpha_star).unwrap() + bias[i] - bias[j])
                    .clamp(0.0, 1.0);
                gold.insert_value(a.clone(), b.clone(), wg, 100, 0).unwrap();
                judge.insert_value(a, b, wp, 100, 0).unwrap();
            }
        }
        (gold, judge)
    }

    fn spread(n: usize) -> Vec<f64> {
        (0..n)
            .map(|i| 2.0 * (0.5 - i as f64 / (n - 1) as f64))
            .collect()
    }

    #[test]
    fn identical_tables_fit_alpha_one() {
        let strengths = spread(6);
        let (gold, judge) = curve_tables(&strengths, 1.0, &vec![0.0; 6]);
        let fit = fit_decisiveness(&judge, &gold, WeightScheme::default()).unwrap();
        assert_abs_diff_eq!(fit.alpha, 1.0, epsilon = 1e-3);
        assert!(fit.objective_value < 1e-9);
        assert_eq!(fit.n_pairs, 15);
    }

    #[test]
    fn recovers_decisive_alpha_four() {
        let strengths = spread(6);
        let (gold, judge) = curve_tables(&strengths, 4.0, &vec![0.0; 6]);
        let fit = fit_decisiveness(&judge, &gold, WeightScheme::default()).unwrap();
        assert!(
            (3.8..=4.2).contains(&fit.alpha),
            "alpha = {}",
            fit.alpha
        );
    }

    #[test]
    fn indecisive_judge_fits_below_one() {
        let strengths = spread(6);
        let (gold, judge) = curve_tables(&strengths, 0.6, &vec![0.0; 6]);
        let fit = fit_decisiveness(&judge, &gold, WeightScheme::default()).unwrap();
        assert!(fit.alpha < 1.0, "alpha = {}", fit.alpha);
    }

    #[test]
    fn recovery_across_alpha_grid_within_five_percent() {
        let strengths = spread(8);
        for alpha_star in [0.5, 1.0, 2.0, 5.0, 10.0] {
            let (gold, judge) = curve_tables(&strengths, alpha_star, &vec![0.0; 8]);
            for weights in [WeightScheme::DistanceFromHalf, WeightScheme::Uniform] {
                let fit = fit_decisiveness(&judge, &gold, weights).unwrap();
                let rel = (fit.alpha - alpha_star).abs() / alpha_star;
                assert!(
                    rel <= 0.05,
                    "alpha* = {alpha_star}, fitted {} ({weights:?})",
                    fit.alpha
                );
            }
        }
    }

    #[test]
    fn fit_invariant_to_duplicating_points() {
        let strengths = spread(5);
        let (gold, judge) = curve_tables(&strengths, 2.0, &vec![0.0; 5]);
        // Duplicate every pair under fresh system names.
        let mut gold2 = WinRateTable::new(WinRateSource::Gold);
        let mut judge2 = WinRateTable::new(WinRateSource::Judge(judge_spec()));
        for (pair, entry) in gold.pairs() {
            for prefix in ["", "copy-"] {
                gold2
                    .insert_value(
                        sys(&format!("{prefix}{}", pair.0.as_str())),
                        sys(&format!("{prefix}{}", pair.1.as_str())),
                        entry.winrate_first,
                        entry.n_comparisons,
                        0,
                    )
                    .unwrap();
            }
        }
        for (pair, entry) in judge.pairs() {
            for prefix in ["", "copy-"] {
                judge2
                    .insert_value(
                        sys(&format!("{prefix}{}", pair.0.as_str())),
                        sys(&format!("{prefix}{}", pair.1.as_str())),
                        entry.winrate_first,
                        entry.n_comparisons,
                        0,
                    )
                    .unwrap();
            }
        }
        let single = fit_decisiveness(&judge, &gold, WeightScheme::default()).unwrap();
        let doubled = fit_decisiveness(&judge2, &gold2, WeightScheme::default()).unwrap();
        assert_abs_diff_eq!(single.alpha, doubled.alpha, epsilon = 1e-2);
        assert_abs_diff_eq!(
            doubled.objective_value,
            2.0 * single.objective_value,
            epsilon = 1e-9
        );
    }

    #[test]
    fn all_half_winrates_refuse_to_fit() {
        let mut gold = WinRateTable::new(WinRateSource::Gold);
        let mut judge = WinRateTable::new(WinRateSource::Judge(judge_spec()));
        for (a, b) in [("a", "b"), ("a", "c"), ("b", "c")] {
            gold.insert_value(sys(a), sys(b), 0.7, 10, 0).unwrap();
            judge.insert_value(sys(a), sys(b), 0.5, 10, 0).unwrap();
        }
        assert!(matches!(
            fit_decisiveness(&judge, &gold, WeightScheme::DistanceFromHalf),
            Err(BehaviorError::DegenerateFit)
        ));
        // Uniform weights have no such degeneracy.
        assert!(fit_decisiveness(&judge, &gold, WeightScheme::Uniform).is_ok());
    }

    #[test]
    fn too_few_pairs_is_an_error() {
        let mut gold = WinRateTable::new(WinRateSource::Gold);
        let mut judge = WinRateTable::new(WinRateSource::Judge(judge_spec()));
        gold.insert_value(sys("a"), sys("b"), 0.7, 10, 0).unwrap();
        judge.insert_value(sys("a"), sys("b"), 0.8, 10, 0).unwrap();
        assert!(matches!(
            fit_decisiveness(&judge, &gold, WeightScheme::default()),
            Err(BehaviorError::TooFewPairs { n_shared: 1 })
        ));
    }

    #[test]
    fn equal_tables_have_zero_raw_bias() {
        let strengths = spread(5);
        let (gold, judge) = curve_tables(&strengths, 1.0, &vec![0.0; 5]);
        let report = system_bias(&judge, &gold, None).unwrap();
        for bias in report.systems.values() {
            assert_abs_diff_eq!(bias.raw_bias, 0.0, epsilon = 1e-12);
            assert_eq!(bias.corrected_bias, None);
            assert_eq!(bias.n_opponents, 4);
        }
        assert_eq!(report.bias_sigma, None);
        assert!(report.excluded.is_empty());
    }

    #[test]
    fn constant_shift_shows_up_as_raw_bias() {
        // Star around "hub": every hub-oriented win-rate 0.1 above gold.
        let mut gold = WinRateTable::new(WinRateSource::Gold);
        let mut judge = WinRateTable::new(WinRateSource::Judge(judge_spec()));
        for (i, wg) in [0.55, 0.6, 0.45, 0.5].iter().enumerate() {
            let rival = sys(&format!("rival{i}"));
            gold.insert_value(sys("hub"), rival.clone(), *wg, 10, 0).unwrap();
            judge
                .insert_value(sys("hub"), rival, wg + 0.1, 10, 0)
                .unwrap();
        }
        let report = system_bias(&judge, &gold, None).unwrap();
        assert_abs_diff_eq!(
            report.systems[&sys("hub")].raw_bias,
            0.1,
            epsilon = 1e-12
        );
        for i in 0..4 {
            assert_abs_diff_eq!(
                report.systems[&sys(&format!("rival{i}"))].raw_bias,
                -0.1,
                epsilon = 1e-12
            );
        }
    }

    #[test]
    fn correction_removes_decisiveness_from_bias() {
        let strengths = spread(6);
        let (gold, judge) = curve_tables(&strengths, 4.0, &vec![0.0; 6]);
        let fit = fit_decisiveness(&judge, &gold, WeightScheme::default()).unwrap();
        let report = system_bias(&judge, &gold, Some(&fit)).unwrap();
        let max_raw = report
            .systems
            .values()
            .map(|b| b.raw_bias.abs())
            .fold(0.0, f64::max);
        let max_corr = report
            .systems
            .values()
            .map(|b| b.corrected_bias.unwrap().abs())
            .fold(0.0, f64::max);
        assert!(max_raw > 0.05, "raw bias should be inflated: {max_raw}");
        assert!(max_corr < 0.02, "corrected bias should vanish: {max_corr}");
        assert!(report.bias_sigma.unwrap() < 0.02);
    }

    #[test]
    fn weighted_raw_bias_sums_to_zero_on_complete_tables() {
        let strengths = spread(7);
        let mut bias = vec![0.0; 7];
        bias[2] = 0.05;
        bias[5] = -0.03;
        let (gold, judge) = curve_tables(&strengths, 2.0, &bias);
        let report = system_bias(&judge, &gold, None).unwrap();
        let weighted_sum: f64 = report
            .systems
            .values()
            .map(|b| b.raw_bias * b.n_opponents as f64)
            .sum();
        assert_abs_diff_eq!(weighted_sum, 0.0, epsilon = 1e-12);
    }

    #[test]
    fn self_bias_tests_only_positive_cases() {
        let strengths = spread(8);
        let mut bias = vec![0.0; 8];
        bias[1] = 0.08; // s01 favored
        bias[2] = -0.06; // s02 disfavored
        let (gold, judge) = curve_tables(&strengths, 1.0, &bias);
        let fit = fit_decisiveness(&judge, &gold, WeightScheme::default()).unwrap();
        let report = system_bias(&judge, &gold, Some(&fit)).unwrap();

        let favored_link: BTreeMap<JudgeModelId, SystemId> =
            [(JudgeModelId::new("m").unwrap(), sys("s01"))].into();
        let rows = self_bias(&[report.clone()], &favored_link);
        assert_eq!(rows.len(), 1);
        assert!(rows[0].self_bias > 0.05);
        let p = rows[0].p_value.expect("positive self-bias gets a test");
        assert!(p < 0.01, "p = {p}");
        assert_eq!(rows[0].p_value_corrected, Some(p)); // one test -> no change

        let disfavored_link: BTreeMap<JudgeModelId, SystemId> =
            [(JudgeModelId::new("m").unwrap(), sys("s02"))].into();
        let rows = self_bias(&[report], &disfavored_link);
        assert!(rows[0].self_bias < 0.0);
        assert_eq!(rows[0].p_value, None);
        assert_eq!(rows[0].p_value_corrected, None);
    }

    #[test]
    fn unlinked_judges_are_omitted() {
        let strengths = spread(4);
        let (gold, judge) = curve_tables(&strengths, 1.0, &vec![0.0; 4]);
        let report = system_bias(&judge, &gold, None).unwrap();
        let rows = self_bias(&[report], &BTreeMap::new());
        assert!(rows.is_empty());
    }

    #[test]
    fn bonferroni_scales_by_number_of_positive_tests() {
        let strengths = spread(6);
        let mut bias_a = vec![0.0; 6];
        bias_a[0] = 0.04;
        let (gold, judge_a) = curve_tables(&strengths, 1.0, &bias_a);
        let fit_a = fit_decisiveness(&judge_a, &gold, WeightScheme::default()).unwrap();
        let report_a = system_bias(&judge_a, &gold, Some(&fit_a)).unwrap();

        // A second judge favoring a different system; give it a distinct
        // model id so the identity map can link both.
        let mut bias_b = vec![0.0; 6];
        bias_b[3] = 0.04;
        let (_, judge_b_raw) = curve_tables(&strengths, 1.0, &bias_b);
        let spec_b = JudgeSpec::new(JudgeModelId::new("m2").unwrap(), Realization::Reward);
        let mut judge_b = WinRateTable::new(WinRateSource::Judge(spec_b));
        for (pair, entry) in judge_b_raw.pairs() {
            judge_b
                .insert_value(
                    pair.0.clone(),
                    pair.1.clone(),
                    entry.winrate_first,
                    entry.n_comparisons,
                    0,
                )
                .unwrap();
        }
        let fit_b = fit_decisiveness(&judge_b, &gold, WeightScheme::default()).unwrap();
        let report_b = system_bias(&judge_b, &gold, Some(&fit_b)).unwrap();

        let links: BTreeMap<JudgeModelId, SystemId> = [
            (JudgeModelId::new("m").unwrap(), sys("s00")),
            (JudgeModelId::new("m2").unwrap(), sys("s03")),
        ]
        .into();
        let rows = self_bias(&[report_a, report_b], &links);
        assert_eq!(rows.len(), 2);
        for row in &rows {
            let p = row.p_value.unwrap();
            let corrected = row.p_value_corrected.unwrap();
            assert_abs_diff_eq!(corrected, (2.0 * p).min(1.0), epsilon = 1e-15);
        }
    }

    #[test]
    fn gold_table_in_judge_position_is_rejected() {
        let strengths = spread(4);
        let (gold, _) = curve_tables(&strengths, 1.0, &vec![0.0; 4]);
        assert!(matches!(
            fit_decisiveness(&gold, &gold, WeightScheme::default()),
            Err(BehaviorError::GoldAsJudge)
        ));
        assert!(matches!(
            system_bias(&gold, &gold, None),
            Err(BehaviorError::GoldAsJudge)
        ));
    }
}
