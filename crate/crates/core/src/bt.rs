//! Bradley-Terry strength fitting from pairwise win counts.
//!
//! The fitter runs minorization-maximization updates on the strength scale
//! (`p_i' = W_i / sum_j n_ij / (p_i + p_j)`), which converges monotonically
//! to the maximum-likelihood strengths for a connected comparison graph.
//! Outputs are natural-log strengths normalized to sum to zero.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::ids::SystemId;
use crate::model::{BattleRecord, Outcome};

/// How tied comparisons enter the win counts.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum TiePolicy {
    /// A tie credits half a win to each side (the default, matching how the
    /// gold ranking treats tied human battles).
    #[default]
    HalfWinEach,
    /// Ties are dropped entirely.
    Exclude,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BtConfig {
    pub max_iterations: usize,
    pub tolerance: f64,
    pub tie_policy: TiePolicy,
}

impl Default for BtConfig {
    fn default() -> Self {
        Self {
            max_iterations: 10_000,
            tolerance: 1e-9,
            tie_policy: TiePolicy::HalfWinEach,
        }
    }
}

/// Pseudo-count added per faced opponent, in both directions, for a system
/// with no wins or no losses — just enough to keep its MLE finite without
/// perturbing anyone else's order.
const REGULARIZATION_EPSILON: f64 = 1e-6;

#[derive(Debug, Error)]
pub enum BtError {
    #[error("Bradley-Terry needs at least two systems, got {0}")]
    NotEnoughSystems(usize),
    #[error("comparison graph is disconnected; components: {}",
        .components
            .iter()
            .map(|c| format!("[{}]", c.iter().map(SystemId::as_str).collect::<Vec<_>>().join(", ")))
            .collect::<Vec<_>>()
            .join(" "))]
    Disconnected { components: Vec<Vec<SystemId>> },
    #[error(
        "MM iteration did not converge after {iterations} iterations (last residual {residual:e})"
    )]
    NotConverged { iterations: usize, residual: f64 },
    #[error("no comparisons remain after applying the tie policy")]
    NoComparisons,
}

/// Pairwise win counts over a fixed system roster. `wins[i][j]` is the
/// (possibly fractional, under `HalfWinEach`) number of wins of `i` over
/// `j`; the diagonal is unused.
#[derive(Debug, Clone)]
pub struct PairCounts {
    systems: Vec<SystemId>,
    index: BTreeMap<SystemId, usize>,
    wins: Vec<f64>,
}

impl PairCounts {
    pub fn new(systems: impl IntoIterator<Item = SystemId>) -> Self {
        let mut unique: Vec<SystemId> = systems.into_iter().collect();
        unique.sort();
        unique.dedup();
        let index = unique
            .iter()
            .cloned()
            .enumerate()
            .map(|(i, s)| (s, i))
            .collect();
        let n = unique.len();
        Self {
            systems: unique,
            index,
            wins: vec![0.0; n * n],
        }
    }

    /// Count every battle according to the tie policy. The roster is the
    /// set of systems appearing in the battles.
    pub fn from_battles(battles: &[BattleRecord], tie_policy: TiePolicy) -> Self {
        let mut counts = Self::new(
            battles
                .iter()
                .flat_map(|b| [b.system_a.clone(), b.system_b.clone()]),
        );
        for battle in battles {
            counts.add_outcome(&battle.system_a, &battle.system_b, battle.outcome, tie_policy);
        }
        counts
    }

    pub fn systems(&self) -> &[SystemId] {
        &self.systems
    }

    pub fn n_systems(&self) -> usize {
        self.systems.len()
    }

    /// Add one comparison outcome. Unknown systems are ignored silently —
    /// callers construct the roster from the same battle list.
    pub fn add_outcome(&mut self, a: &SystemId, b: &SystemId, outcome: Outcome, policy: TiePolicy) {
        let (Some(&i), Some(&j)) = (self.index.get(a), self.index.get(b)) else {
            return;
        };
        match (outcome, policy) {
            (Outcome::AWins, _) => self.wins[i * self.systems.len() + j] += 1.0,
            (Outcome::BWins, _) => self.wins[j * self.systems.len() + i] += 1.0,
            (Outcome::Tie, TiePolicy::HalfWinEach) => {
                self.wins[i * self.systems.len() + j] += 0.5;
                self.wins[j * self.systems.len() + i] += 0.5;
            }
            (Outcome::Tie, TiePolicy::Exclude) => {}
        }
    }

    pub fn wins(&self, i: usize, j: usize) -> f64 {
        self.wins[i * self.systems.len() + j]
    }

    fn total(&self) -> f64 {
        self.wins.iter().sum()
    }

    /// Connected components of the comparison graph (edge where any
    /// comparison weight exists between two systems).
    fn components(&self) -> Vec<Vec<SystemId>> {
        let n = self.systems.len();
        let mut component = vec![usize::MAX; n];
        let mut n_components = 0;
        for start in 0..n {
            if component[start] != usize::MAX {
                continue;
            }
            let mut stack = vec![start];
            component[start] = n_components;
            while let Some(i) = stack.pop() {
                for j in 0..n {
                    if component[j] == usize::MAX
                        && (self.wins(i, j) > 0.0 || self.wins(j, i) > 0.0)
                    {
                        component[j] = n_components;
                        stack.push(j);
                    }
                }
            }
            n_components += 1;
        }
        let mut groups = vec![Vec::new(); n_components];
        for (i, &c) in component.iter().enumerate() {
            groups[c].push(self.systems[i].clone());
        }
        groups
    }
}

/// Fit Bradley-Terry log-strengths (normalized to sum to zero) from pairwise
/// win counts.
///
/// Errors are explicit: a disconnected comparison graph lists its
/// components, and non-convergence reports the residual rather than
/// returning a half-converged fit.
pub fn fit_bradley_terry(
    counts: &PairCounts,
    config: &BtConfig,
) -> Result<BTreeMap<SystemId, f64>, BtError> {
    let n = counts.n_systems();
    if n < 2 {
        return Err(BtError::NotEnoughSystems(n));
    }
    if counts.total() == 0.0 {
        return Err(BtError::NoComparisons);
    }
    let components = counts.components();
    if components.len() > 1 {
        return Err(BtError::Disconnected { components });
    }

    // Regularize systems with no wins or no losses (flags computed on the
    // raw counts, applied in one pass so one fix cannot trigger another).
    let mut wins = counts.wins.clone();
    let needs_epsilon: Vec<bool> = (0..n)
        .map(|i| {
            let total_wins: f64 = (0..n).map(|j| counts.wins(i, j)).sum();
            let total_losses: f64 = (0..n).map(|j| counts.wins(j, i)).sum();
            total_wins == 0.0 || total_losses == 0.0
        })
        .collect();
    for i in 0..n {
        if !needs_epsilon[i] {
            continue;
        }
        for j in 0..n {
            if j != i && (counts.wins(i, j) > 0.0 || counts.wins(j, i) > 0.0) {
                wins[i * n + j] += REGULARIZATION_EPSILON;
                wins[j * n + i] += REGULARIZATION_EPSILON;
            }
        }
    }

    let total_wins: Vec<f64> = (0..n)
        .map(|i| (0..n).map(|j| wins[i * n + j]).sum())
        .collect();
    let comparisons: Vec<f64> = (0..n)
        .flat_map(|i| (0..n).map(move |j| (i, j)))
        .map(|(i, j)| wins[i * n + j] + wins[j * n + i])
        .collect();

    // One MM update in log-strength space, returning logs normalized to
    // mean zero. Monotone in likelihood, but its linear convergence rate
    // degrades badly near the extreme optima the epsilon regularization
    // creates, so the main loop accelerates it with Aitken extrapolation.
    let mm_step = |logs: &[f64]| -> Vec<f64> {
        let strengths: Vec<f64> = logs.iter().map(|l| l.exp()).collect();
        let mut next = vec![0.0f64; n];
        for i in 0..n {
            let mut denom = 0.0;
            for j in 0..n {
                if j != i && comparisons[i * n + j] > 0.0 {
                    denom += comparisons[i * n + j] / (strengths[i] + strengths[j]);
                }
            }
            next[i] = (total_wins[i] / denom).ln();
        }
        let mean = next.iter().sum::<f64>() / n as f64;
        for l in &mut next {
            *l -= mean;
        }
        next
    };
    let log_likelihood = |logs: &[f64]| -> f64 {
        let mut ll = 0.0;
        for i in 0..n {
            for j in 0..n {
                if j != i && wins[i * n + j] > 0.0 {
                    // ln p_i/(p_i+p_j) = -softplus(l_j - l_i), evaluated
                    // stably for large gaps.
                    let gap = logs[j] - logs[i];
                    let softplus = gap.max(0.0) + (-gap.abs()).exp().ln_1p();
                    ll -= wins[i * n + j] * softplus;
                }
            }
        }
        ll
    };
    let max_abs_diff = |a: &[f64], b: &[f64]| {
        a.iter()
            .zip(b)
            .map(|(x, y)| (x - y).abs())
            .fold(0.0, f64::max)
    };

    let mut logs = vec![0.0f64; n];
    let mut residual = f64::INFINITY;
    let mut iterations = 0usize;
    while iterations < config.max_iterations {
        let step1 = mm_step(&logs);
        iterations += 1;
        residual = max_abs_diff(&logs, &step1);
        if residual < config.tolerance {
            logs = step1;
            let mut out = BTreeMap::new();
            for (system, log) in counts.systems.iter().zip(logs) {
                out.insert(system.clone(), log);
            }
            return Ok(out);
        }
        if iterations >= config.max_iterations {
            break;
        }
        let step2 = mm_step(&step1);
        iterations += 1;

        // Per-coordinate Aitken delta-squared extrapolation toward the fixed
        // point, kept only when it does not hurt the likelihood (plain MM is
        // monotone; the safeguard preserves that).
        let mut accelerated = step2.clone();
        let mut extrapolated = false;
        for i in 0..n {
            let d1 = step1[i] - logs[i];
            let d2 = step2[i] - step1[i];
            let denom = d2 - d1;
            if denom.abs() > 1e-14 * (d1.abs() + d2.abs()).max(1e-300) {
                let candidate = logs[i] - d1 * d1 / denom;
                if candidate.is_finite() {
                    accelerated[i] = candidate;
                    extrapolated = true;
                }
            }
        }
        logs = if extrapolated {
            let mean = accelerated.iter().sum::<f64>() / n as f64;
            for l in &mut accelerated {
                *l -= mean;
            }
            if log_likelihood(&accelerated) >= log_likelihood(&step2) {
                accelerated
            } else {
                step2
            }
        } else {
            step2
        };
    }
    Err(BtError::NotConverged {
        iterations: config.max_iterations,
        residual,
    })
}
