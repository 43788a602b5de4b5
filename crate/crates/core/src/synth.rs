//! Synthetic worlds with known ground truth, for validating every analytic
//! module end to end.
//!
//! A world has evenly spaced true strengths, battles sampled from the
//! Bradley-Terry model p(a beats b) = sigmoid(strength gap), and the exact
//! analytic win-rate table those strengths imply. A synthetic judge then
//! scores every (instruction, system) cell so that its induced pairwise
//! win probabilities track `beta_cdf(gold win-rate, true_alpha)` shifted by
//! injected per-system bias — the generative twin of what the behavior
//! module estimates.
//!
//! Scores are latent qualities: per-system level + per-cell Gumbel draw
//! (so score differences are logistic, giving sigmoid win probabilities)
//! + optional normal noise. The per-system levels are the least-squares
//! fit of the logit win-probability targets, which is exact when the
//! targets are additive (true_alpha = 1, no bias) and a close
//! approximation otherwise.

use std::collections::BTreeMap;

use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use thiserror::Error;

use crate::betainc::beta_cdf;
use crate::ids::{InstructionId, JudgeModelId, SystemId};
use crate::matrix::ScoreMatrix;
use crate::model::{BattleRecord, JudgeSpec, Outcome, Realization};
use crate::winrate::{WinRateSource, WinRateTable};

#[derive(Debug, Error)]
pub enum SynthError {
    #[error("a world needs at least 2 systems, got {0}")]
    TooFewSystems(usize),
    #[error("a world needs at least 1 instruction")]
    NoInstructions,
    #[error("battles_per_pair must be at least 1")]
    NoBattles,
    #[error("strength_spread must be finite and non-negative, got {0}")]
    BadSpread(f64),
    #[error("true_alpha must be finite and positive, got {0}")]
    BadAlpha(f64),
    #[error("noise_std must be finite and non-negative, got {0}")]
    BadNoise(f64),
    #[error("bias for `{system}` must be finite, got {value}")]
    BadBias { system: SystemId, value: f64 },
    #[error("bias names system `{0}` which the world does not contain")]
    UnknownBiasSystem(SystemId),
}

/// World-shape parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct WorldConfig {
    pub n_systems: usize,
    pub n_instructions: usize,
    /// Gap between the strongest and weakest true strength.
    pub strength_spread: f64,
    /// Human battles sampled per unordered system pair.
    pub battles_per_pair: usize,
    pub seed: u64,
}

impl Default for WorldConfig {
    fn default() -> Self {
        Self {
            n_systems: 8,
            n_instructions: 100,
            strength_spread: 2.0,
            battles_per_pair: 50,
            seed: 0,
        }
    }
}

/// A generated world: strengths (descending), sampled battles, and the
/// analytic gold win-rates the strengths imply.
#[derive(Debug, Clone)]
pub struct SyntheticWorld {
    /// Systems strongest-first; ids sort in the same order.
    pub systems: Vec<SystemId>,
    pub instructions: Vec<InstructionId>,
    pub strengths: BTreeMap<SystemId, f64>,
    pub battles: Vec<BattleRecord>,
    /// Analytic WR(a,b) = sigmoid(strength_a − strength_b).
    pub gold_winrates: WinRateTable,
}

fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

fn id_width(n: usize) -> usize {
    std::cmp::max(2, n.saturating_sub(1).to_string().len())
}

/// Sample a world: evenly spaced strengths over `strength_spread`, battles
/// from the BT model (no ties), analytic gold win-rates. Bit-for-bit
/// deterministic under `seed`.
pub fn generate_world(config: &WorldConfig) -> Result<SyntheticWorld, SynthError> {
    if config.n_systems < 2 {
        return Err(SynthError::TooFewSystems(config.n_systems));
    }
    if config.n_instructions == 0 {
        return Err(SynthError::NoInstructions);
    }
    if config.battles_per_pair == 0 {
        return Err(SynthError::NoBattles);
    }
    if !(config.strength_spread.is_finite() && config.strength_spread >= 0.0) {
        return Err(SynthError::BadSpread(config.strength_spread));
    }

    let l = config.n_systems;
    let width = id_width(l);
    let systems: Vec<SystemId> = (0..l)
        .map(|i| SystemId::new(format!("sys-{i:0width$}")).unwrap())
        .collect();
    let strengths: BTreeMap<SystemId, f64> = systems
        .iter()
        .enumerate()
        .map(|(i, s)| {
            let centered = 0.5 - i as f64 / (l - 1) as f64;
            (s.clone(), config.strength_spread * centered)
        })
        .collect();
    let instructions: Vec<InstructionId> = (0..config.n_instructions)
        .map(|k| InstructionId::new(format!("inst-{k:06}")).unwrap())
        .collect();

    let mut gold = WinRateTable::new(WinRateSource::Gold);
    let mut battles = Vec::with_capacity(l * (l - 1) / 2 * config.battles_per_pair);
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    for i in 0..l {
        for j in (i + 1)..l {
            let (a, b) = (&systems[i], &systems[j]);
            let p = sigmoid(strengths[a] - strengths[b]);
            gold.insert_value(a.clone(), b.clone(), p, config.battles_per_pair, 0)
                .expect("sigmoid output is a valid win-rate");
            for _ in 0..config.battles_per_pair {
                let outcome = if rng.gen::<f64>() < p {
                    Outcome::AWins
                } else {
                    Outcome::BWins
                };
                battles.push(
                    BattleRecord::new(a.clone(), b.clone(), outcome)
                        .expect("pair systems are distinct"),
                );
            }
        }
    }

    Ok(SyntheticWorld {
        systems,
        instructions,
        strengths,
        battles,
        gold_winrates: gold,
    })
}

/// Ground-truth behavior of a synthetic judge.
#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticJudgeSpec {
    pub model: JudgeModelId,
    /// Decisiveness the judge should exhibit (α of the beta-CDF curve).
    pub true_alpha: f64,
    /// Additive win-probability shift injected in favor of each system.
    pub bias: BTreeMap<SystemId, f64>,
    /// Standard deviation of extra per-cell normal noise.
    pub noise_std: f64,
    pub seed: u64,
}

impl SyntheticJudgeSpec {
    pub fn unbiased(model: &str, true_alpha: f64, noise_std: f64, seed: u64) -> Self {
        Self {
            model: JudgeModelId::new(model).unwrap(),
            true_alpha,
            bias: BTreeMap::new(),
            noise_std,
            seed,
        }
    }

    /// The JudgeSpec under which the generated matrix is filed: the judge's
    /// model id with the continuous reward realization.
    pub fn judge_spec(&self) -> JudgeSpec {
        JudgeSpec::new(self.model.clone(), Realization::Reward)
    }

    fn validate(&self, world: &SyntheticWorld) -> Result<(), SynthError> {
        if !(self.true_alpha.is_finite() && self.true_alpha > 0.0) {
            return Err(SynthError::BadAlpha(self.true_alpha));
        }
        if !(self.noise_std.is_finite() && self.noise_std >= 0.0) {
            return Err(SynthError::BadNoise(self.noise_std));
        }
        for (system, value) in &self.bias {
            if !value.is_finite() {
                return Err(SynthError::BadBias {
                    system: system.clone(),
                    value: *value,
                });
            }
            if !world.strengths.contains_key(system) {
                return Err(SynthError::UnknownBiasSystem(system.clone()));
            }
        }
        Ok(())
    }
}

/// Bookkeeping from score generation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct GenerationStats {
    /// Pair targets that left (0,1) after the bias shift and were clipped;
    /// nonzero values mean the injected bias is not fully realizable.
    pub n_clipped_targets: usize,
}

/// Standard Gumbel draw via inverse CDF; the offset keeps the uniform
/// strictly inside (0,1).
fn gumbel(rng: &mut ChaCha8Rng) -> f64 {
    let u = ((rng.next_u64() >> 11) as f64 + 0.5) / (1u64 << 53) as f64;
    -(-u.ln()).ln()
}

fn logit(p: f64) -> f64 {
    (p / (1.0 - p)).ln()
}

/// Score every (instruction, system) cell. The induced win probability of
/// system i over j is sigmoid(level_i − level_j) where the levels solve the
/// least-squares match to logit(clipped target) with
/// target = beta_cdf(WR^g(i,j), true_alpha) + bias_i − bias_j.
pub fn generate_judge_scores(
    world: &SyntheticWorld,
    judge: &SyntheticJudgeSpec,
) -> Result<(ScoreMatrix, GenerationStats), SynthError> {
    judge.validate(world)?;

    let l = world.systems.len();
    let mut stats = GenerationStats::default();

    // Pairwise logit targets, antisymmetric by construction.
    const CLIP: f64 = 1e-6;
    let bias_of =
        |s: &SystemId| -> f64 { judge.bias.get(s).copied().unwrap_or(0.0) };
    let mut z = vec![0.0f64; l * l];
    for i in 0..l {
        for j in (i + 1)..l {
            let (a, b) = (&world.systems[i], &world.systems[j]);
            let wg = world
                .gold_winrates
                .get(a, b)
                .expect("world tables are complete");
            let curve = beta_cdf(wg, judge.true_alpha)
                .expect("gold win-rates and alpha are in domain");
            let shifted = curve + bias_of(a) - bias_of(b);
            let target = shifted.clamp(CLIP, 1.0 - CLIP);
            if target != shifted {
                stats.n_clipped_targets += 1;
            }
            let value = logit(target);
            z[i * l + j] = value;
            z[j * l + i] = -value;
        }
    }

    // Least-squares additive levels: row means of the logit targets.
    let levels: Vec<f64> = (0..l)
        .map(|i| (0..l).map(|j| z[i * l + j]).sum::<f64>() / l as f64)
        .collect();

    let mut matrix = ScoreMatrix::new(
        judge.judge_spec(),
        world.instructions.clone(),
        world.systems.clone(),
    )
    .expect("world axes are unique");
    let mut rng = ChaCha8Rng::seed_from_u64(judge.seed);
    for instruction in &world.instructions {
        for (li, system) in world.systems.iter().enumerate() {
            let mut q = levels[li] + gumbel(&mut rng);
            if judge.noise_std > 0.0 {
                let n: f64 = rng.sample(StandardNormal);
                q += judge.noise_std * n;
            }
            matrix
                .set(instruction, system, q)
                .expect("reward realization accepts any finite score");
        }
    }
    Ok((matrix, stats))
}
