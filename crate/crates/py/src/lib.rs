//! Python bindings for the rankjudge toolkit: raw-output parsers, prompt
//! rendering, the beta decisiveness curve, Kendall tau, score matrices with
//! aggregation and bootstrap, gold-reference construction, decisiveness and
//! bias fitting, and synthetic data generation.
//!
//! Build produces `librankjudge_py.so`; import it as `rankjudge_py` (see
//! `python/smoke_test.py` at the repository root).

use std::collections::BTreeMap;

use pyo3::exceptions::PyValueError;
use pyo3::prelude::*;

use rankjudge::aggregate::{aggregate, AggregationMethod};
use rankjudge::behavior::{
    beta_cdf as beta_cdf_impl, fit_decisiveness, system_bias, BetaFit, WeightScheme,
};
use rankjudge::bt::BtConfig;
use rankjudge::gold::GoldReference;
use rankjudge::ids::{InstructionId, JudgeModelId, SystemId};
use rankjudge::judge::parse;
use rankjudge::judge::prompts;
use rankjudge::matrix::ScoreMatrix as CoreMatrix;
use rankjudge::metrics::{
    bootstrap_tau_ci, judge_winrates, kendall_tau as tau_rankings, kendall_tau_scores,
};
use rankjudge::model::{
    AggregationLabel, BattleRecord, JudgeSpec, Outcome, RankingSource, RankingVector, Realization,
};
use rankjudge::synth::{generate_judge_scores, generate_world, SyntheticJudgeSpec, WorldConfig};
use rankjudge::winrate::{WinRateSource, WinRateTable};

fn value_err(e: impl std::fmt::Display) -> PyErr {
    PyValueError::new_err(e.to_string())
}

fn realization_from(tag: &str) -> PyResult<Realization> {
    // The anchor template needs an anchor id only for bookkeeping; a fixed
    // placeholder keeps the Python surface simple.
    let anchor = (tag == "anchor").then(|| SystemId::new("anchor").expect("valid id"));
    Realization::from_parts(tag, anchor).map_err(value_err)
}

fn system_id(s: &str) -> PyResult<SystemId> {
    SystemId::new(s).map_err(value_err)
}

fn judge_spec(model: &str) -> PyResult<JudgeSpec> {
    Ok(JudgeSpec::new(
        JudgeModelId::new(model).map_err(value_err)?,
        Realization::Reward,
    ))
}

fn table_from_dict(
    source: WinRateSource,
    winrates: BTreeMap<(String, String), f64>,
) -> PyResult<WinRateTable> {
    let mut table = WinRateTable::new(source);
    for ((a, b), wr) in winrates {
        table
            .insert_value(system_id(&a)?, system_id(&b)?, wr, 1, 0)
            .map_err(value_err)?;
    }
    Ok(table)
}

fn ranking_from_dict(scores: BTreeMap<String, f64>) -> PyResult<RankingVector> {
    let typed: BTreeMap<SystemId, f64> = scores
        .into_iter()
        .map(|(s, v)| Ok((system_id(&s)?, v)))
        .collect::<PyResult<_>>()?;
    RankingVector::new(
        RankingSource::Gold,
        AggregationLabel::GoldBradleyTerry,
        typed,
    )
    .map_err(value_err)
}

fn method_from(name: &str) -> PyResult<AggregationMethod> {
    AggregationMethod::from_name(name, BtConfig::default()).ok_or_else(|| {
        PyValueError::new_err(format!(
            "unknown aggregation `{name}` (expected mean, median, winrate, or bt)"
        ))
    })
}

// ---------------------------------------------------------------------------
// Parsers and prompts
// ---------------------------------------------------------------------------

/// First number in [0, 100] wins; anything else raises ValueError.
#[pyfunction]
fn parse_numeric(raw: &str) -> PyResult<f64> {
    parse::parse_numeric(raw).map_err(value_err)
}

/// Five-label scale mapped to 1..5; bracketed labels beat bare ones.
#[pyfunction]
fn parse_likert(raw: &str) -> PyResult<f64> {
    parse::parse_likert(raw).map_err(value_err)
}

/// Last of the five comparison verdicts wins, mapped to -2..2.
#[pyfunction]
fn parse_anchor(raw: &str) -> PyResult<f64> {
    parse::parse_anchor(raw).map_err(value_err)
}

/// `top_logprobs`: (token, log-probability) pairs for the first generated
/// token. Returns p(yes) / (p(yes) + p(no)).
#[pyfunction]
fn parse_token_probs(top_logprobs: Vec<(String, f64)>) -> PyResult<f64> {
    parse::parse_token_probs(&top_logprobs).map_err(value_err)
}

/// Render the judging prompt for one (instruction, response) pair.
/// `realization` is one of numeric, likert, token_probs, anchor; anchor
/// requires `anchor_text`.
#[pyfunction]
#[pyo3(signature = (realization, instruction, response, anchor_text=None))]
fn render_prompt(
    realization: &str,
    instruction: &str,
    response: &str,
    anchor_text: Option<&str>,
) -> PyResult<String> {
    let realization = realization_from(realization)?;
    prompts::render_prompt(&realization, instruction, response, anchor_text).map_err(value_err)
}

// ---------------------------------------------------------------------------
// Numerics
// ---------------------------------------------------------------------------

/// Regularized incomplete beta CDF with symmetric shape (alpha, alpha);
/// the decisiveness curve. `x` in [0, 1], `alpha` > 0.
#[pyfunction]
fn beta_cdf(x: f64, alpha: f64) -> PyResult<f64> {
    beta_cdf_impl(x, alpha).map_err(value_err)
}

/// Tie-corrected Kendall tau-b between two equal-length score vectors.
#[pyfunction]
fn kendall_tau(xs: Vec<f64>, ys: Vec<f64>) -> PyResult<f64> {
    if xs.len() != ys.len() {
        return Err(PyValueError::new_err(format!(
            "length mismatch: {} vs {}",
            xs.len(),
            ys.len()
        )));
    }
    kendall_tau_scores(&xs, &ys).map_err(value_err)
}

// ---------------------------------------------------------------------------
// Score matrix
// ---------------------------------------------------------------------------

/// One judge's scores over instructions × systems, with aggregation into
/// system rankings and bootstrap confidence intervals.
#[pyclass]
struct ScoreMatrix {
    inner: CoreMatrix,
}

#[pymethods]
impl ScoreMatrix {
    /// `realization`: numeric, likert, token_probs, anchor, or reward
    /// (scores are validated against it).
    #[new]
    #[pyo3(signature = (judge_model, realization, instructions, systems))]
    fn new(
        judge_model: &str,
        realization: &str,
        instructions: Vec<String>,
        systems: Vec<String>,
    ) -> PyResult<Self> {
        let realization = realization_from(realization)?;
        let judge = JudgeSpec::new(JudgeModelId::new(judge_model).map_err(value_err)?, realization);
        let instructions = instructions
            .iter()
            .map(|i| InstructionId::new(i).map_err(value_err))
            .collect::<PyResult<Vec<_>>>()?;
        let systems = systems
            .iter()
            .map(|s| system_id(s))
            .collect::<PyResult<Vec<_>>>()?;
        Ok(Self {
            inner: CoreMatrix::new(judge, instructions, systems).map_err(value_err)?,
        })
    }

    fn set(&mut self, instruction: &str, system: &str, score: f64) -> PyResult<()> {
        self.inner
            .set(
                &InstructionId::new(instruction).map_err(value_err)?,
                &system_id(system)?,
                score,
            )
            .map_err(value_err)
    }

    fn get(&self, instruction: &str, system: &str) -> PyResult<Option<f64>> {
        self.inner
            .get(
                &InstructionId::new(instruction).map_err(value_err)?,
                &system_id(system)?,
            )
            .map_err(value_err)
    }

    fn n_scored(&self) -> usize {
        self.inner.n_scored()
    }

    fn systems(&self) -> Vec<String> {
        self.inner.systems().iter().map(|s| s.to_string()).collect()
    }

    fn instructions(&self) -> Vec<String> {
        self.inner
            .instructions()
            .iter()
            .map(|i| i.to_string())
            .collect()
    }

    /// Aggregate into one score per system; `method` is mean, median,
    /// winrate, or bt.
    fn aggregate(&self, method: &str) -> PyResult<BTreeMap<String, f64>> {
        let ranking = aggregate(&self.inner, &method_from(method)?).map_err(value_err)?;
        Ok(ranking
            .scores()
            .iter()
            .map(|(s, &v)| (s.to_string(), v))
            .collect())
    }

    /// Win rates over the given unordered system pairs:
    /// {(a, b): (winrate_of_a_over_b, n_non_tied_comparisons)}.
    fn winrates(
        &self,
        pairs: Vec<(String, String)>,
    ) -> PyResult<BTreeMap<(String, String), (f64, usize)>> {
        let typed = pairs
            .iter()
            .map(|(a, b)| Ok((system_id(a)?, system_id(b)?)))
            .collect::<PyResult<_>>()?;
        let table = judge_winrates(&self.inner, &typed).map_err(value_err)?;
        Ok(table
            .pairs()
            .map(|((a, b), entry)| {
                (
                    (a.to_string(), b.to_string()),
                    (entry.winrate_first, entry.n_comparisons),
                )
            })
            .collect())
    }

    /// Kendall tau-b between this matrix aggregated with `method` and a
    /// {system: score} reference, over their shared systems.
    fn tau_against(&self, reference: BTreeMap<String, f64>, method: &str) -> PyResult<f64> {
        let ranking = aggregate(&self.inner, &method_from(method)?).map_err(value_err)?;
        tau_rankings(&ranking, &ranking_from_dict(reference)?).map_err(value_err)
    }

    /// Percentile bootstrap CI for tau against a {system: score} reference,
    /// resampling instructions. Returns (low, high).
    #[pyo3(signature = (reference, method, n_resamples=1000, confidence=0.95, seed=0))]
    fn bootstrap_tau(
        &self,
        reference: BTreeMap<String, f64>,
        method: &str,
        n_resamples: usize,
        confidence: f64,
        seed: u64,
    ) -> PyResult<(f64, f64)> {
        let ci = bootstrap_tau_ci(
            &self.inner,
            &method_from(method)?,
            &ranking_from_dict(reference)?,
            n_resamples,
            confidence,
            seed,
        )
        .map_err(value_err)?;
        Ok((ci.low, ci.high))
    }
}

// ---------------------------------------------------------------------------
// Gold reference, decisiveness, bias
// ---------------------------------------------------------------------------

/// Build the gold reference from battles `(system_a, system_b, outcome)`
/// with outcome in {"a_wins", "b_wins", "tie"}. Returns
/// ({system: log_strength}, {(a, b): winrate_of_a_over_b}) keeping pairs
/// with at least `min_nontied` non-tied battles.
#[pyfunction]
#[pyo3(signature = (battles, min_nontied=1))]
fn gold_from_battles(
    battles: Vec<(String, String, String)>,
    min_nontied: usize,
) -> PyResult<(BTreeMap<String, f64>, BTreeMap<(String, String), f64>)> {
    let battles = battles
        .into_iter()
        .map(|(a, b, outcome)| {
            let outcome = match outcome.as_str() {
                "a_wins" => Outcome::AWins,
                "b_wins" => Outcome::BWins,
                "tie" => Outcome::Tie,
                other => {
                    return Err(PyValueError::new_err(format!(
                        "unknown outcome `{other}` (expected a_wins, b_wins, or tie)"
                    )))
                }
            };
            BattleRecord::new(system_id(&a)?, system_id(&b)?, outcome).map_err(value_err)
        })
        .collect::<PyResult<Vec<_>>>()?;
    let gold =
        GoldReference::build(&battles, None, min_nontied, &BtConfig::default()).map_err(value_err)?;
    let strengths = gold
        .ranking
        .scores()
        .iter()
        .map(|(s, &v)| (s.to_string(), v))
        .collect();
    let winrates = gold
        .winrates
        .pairs()
        .map(|((a, b), entry)| ((a.to_string(), b.to_string()), entry.winrate_first))
        .collect();
    Ok((strengths, winrates))
}

/// Fit the decisiveness curve: judge win-rates as a beta CDF of gold
/// win-rates. Both arguments map unordered pairs (a, b) to the win rate of
/// a over b. Returns (alpha, objective_value, n_pairs).
#[pyfunction]
#[pyo3(signature = (judge_wr, gold_wr, judge_model="judge", weights="distance_from_half"))]
fn fit_alpha(
    judge_wr: BTreeMap<(String, String), f64>,
    gold_wr: BTreeMap<(String, String), f64>,
    judge_model: &str,
    weights: &str,
) -> PyResult<(f64, f64, usize)> {
    let weights = match weights {
        "distance_from_half" => WeightScheme::DistanceFromHalf,
        "uniform" => WeightScheme::Uniform,
        other => {
            return Err(PyValueError::new_err(format!(
                "unknown weight scheme `{other}`"
            )))
        }
    };
    let judge = table_from_dict(WinRateSource::Judge(judge_spec(judge_model)?), judge_wr)?;
    let gold = table_from_dict(WinRateSource::Gold, gold_wr)?;
    let fit = fit_decisiveness(&judge, &gold, weights).map_err(value_err)?;
    Ok((fit.alpha, fit.objective_value, fit.n_pairs))
}

/// Per-system bias of a judge's win-rates against gold:
/// {system: (raw_bias, corrected_bias_or_None, n_opponents)}. Pass the
/// fitted `alpha` to get curve-corrected bias.
#[pyfunction]
#[pyo3(signature = (judge_wr, gold_wr, judge_model="judge", alpha=None))]
fn bias_by_system(
    judge_wr: BTreeMap<(String, String), f64>,
    gold_wr: BTreeMap<(String, String), f64>,
    judge_model: &str,
    alpha: Option<f64>,
) -> PyResult<BTreeMap<String, (f64, Option<f64>, usize)>> {
    let spec = judge_spec(judge_model)?;
    let judge = table_from_dict(WinRateSource::Judge(spec.clone()), judge_wr)?;
    let gold = table_from_dict(WinRateSource::Gold, gold_wr)?;
    let fit = alpha.map(|alpha| BetaFit {
        judge: spec,
        alpha,
        objective_value: 0.0,
        n_pairs: 0,
        weights: WeightScheme::DistanceFromHalf,
    });
    let report = system_bias(&judge, &gold, fit.as_ref()).map_err(value_err)?;
    Ok(report
        .systems
        .iter()
        .map(|(s, b)| (s.to_string(), (b.raw_bias, b.corrected_bias, b.n_opponents)))
        .collect())
}

// ---------------------------------------------------------------------------
// Synthetic data
// ---------------------------------------------------------------------------

/// Generate a synthetic judge's score matrix over a synthetic world with
/// known true strengths. Returns (ScoreMatrix, {system: true_strength}).
#[pyfunction]
#[pyo3(signature = (n_systems=8, n_instructions=200, strength_spread=2.0, battles_per_pair=50, seed=0, judge_model="synth", true_alpha=1.0, noise_std=0.5))]
#[allow(clippy::too_many_arguments)]
fn synth_matrix(
    n_systems: usize,
    n_instructions: usize,
    strength_spread: f64,
    battles_per_pair: usize,
    seed: u64,
    judge_model: &str,
    true_alpha: f64,
    noise_std: f64,
) -> PyResult<(ScoreMatrix, BTreeMap<String, f64>)> {
    let world = generate_world(&WorldConfig {
        n_systems,
        n_instructions,
        strength_spread,
        battles_per_pair,
        seed,
    })
    .map_err(value_err)?;
    let spec = SyntheticJudgeSpec::unbiased(judge_model, true_alpha, noise_std, seed ^ 0x5eed);
    let (matrix, _stats) = generate_judge_scores(&world, &spec).map_err(value_err)?;
    let strengths = world
        .strengths
        .iter()
        .map(|(s, &v)| (s.to_string(), v))
        .collect();
    Ok((ScoreMatrix { inner: matrix }, strengths))
}

#[pymodule]
fn rankjudge_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_function(wrap_pyfunction!(parse_numeric, m)?)?;
    m.add_function(wrap_pyfunction!(parse_likert, m)?)?;
    m.add_function(wrap_pyfunction!(parse_anchor, m)?)?;
    m.add_function(wrap_pyfunction!(parse_token_probs, m)?)?;
    m.add_function(wrap_pyfunction!(render_prompt, m)?)?;
    m.add_function(wrap_pyfunction!(beta_cdf, m)?)?;
    m.add_function(wrap_pyfunction!(kendall_tau, m)?)?;
    m.add_function(wrap_pyfunction!(gold_from_battles, m)?)?;
    m.add_function(wrap_pyfunction!(fit_alpha, m)?)?;
    m.add_function(wrap_pyfunction!(bias_by_system, m)?)?;
    m.add_function(wrap_pyfunction!(synth_matrix, m)?)?;
    m.add_class::<ScoreMatrix>()?;
    Ok(())
}
