//! Orchestrates one judge over one corpus: render, cache-check, fetch with
//! a bounded worker pool, parse, and assemble records in deterministic
//! instruction-major order.
//!
//! Failure discipline: auth/config errors poison the run and fail fast
//! (nothing useful can follow); everything else — timeouts after retries,
//! malformed responses, unparseable output — degrades to a record with a
//! missing score and a reported reason, never aborting the batch.

use std::sync::atomic::{AtomicBool, AtomicUsize, Ordering};
use std::sync::Mutex;

use thiserror::Error;

use super::cache::{cache_key, CacheEntry, CacheError, DecodingOptions, JudgmentCache};
use super::client::{call_with_retries, ChatApi, ChatError, ChatRequest, RetryPolicy};
use super::parse::parse_score;
use super::prompts::render_prompt;
use crate::data::{Corpus, JudgmentRecord};
use crate::ids::{InstructionId, SystemId};
use crate::model::{JudgeSpec, Realization};

/// Top log-probabilities requested for the token-probability realization.
pub const DEFAULT_TOP_LOGPROBS: u32 = 20;

#[derive(Debug, Error)]
pub enum JudgeError {
    #[error("reward scores are produced offline; load them from judgment files instead")]
    RewardNotCollectable,
    #[error("fatal endpoint error, aborting this judge: {0}")]
    Fatal(ChatError),
    #[error(transparent)]
    Cache(#[from] CacheError),
}

/// Knobs for a collection run.
#[derive(Debug, Clone)]
pub struct CollectOptions {
    /// Maximum concurrent remote calls.
    pub jobs: usize,
    pub retry: RetryPolicy,
    pub decoding: DecodingOptions,
}

impl Default for CollectOptions {
    fn default() -> Self {
        Self {
            jobs: 4,
            retry: RetryPolicy::default(),
            decoding: DecodingOptions::default(),
        }
    }
}

/// A judgment cell that ended without a score, and why.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ItemFailure {
    pub instruction_id: InstructionId,
    pub system_id: SystemId,
    pub reason: String,
}

/// Everything a collection run produced.
#[derive(Debug)]
pub struct CollectOutcome {
    /// One record per judged (instruction, system) response, instruction-
    /// major; unscored cells carry a missing score.
    pub records: Vec<JudgmentRecord>,
    pub n_cache_hits: usize,
    /// Unique remote requests attempted this run (after cache + in-run
    /// request dedup).
    pub n_remote_calls: usize,
    pub n_parse_failures: usize,
    /// All cells with a missing score, with reasons (transport, prompt, or
    /// parse).
    pub failures: Vec<ItemFailure>,
}

enum CellState {
    /// index into the unique fetch list
    NeedsFetch(usize),
    Cached(CacheEntry),
    PromptFailed(String),
}

struct Cell {
    instruction: InstructionId,
    system: SystemId,
    state: CellState,
}

/// Judge every response in the corpus with one judge. Cache hits skip the
/// remote call; identical requests within the run are fetched once.
pub fn collect_judgments(
    corpus: &Corpus,
    judge: &JudgeSpec,
    api: &dyn ChatApi,
    cache: &JudgmentCache,
    options: &CollectOptions,
) -> Result<CollectOutcome, JudgeError> {
    if matches!(judge.realization, Realization::Reward) {
        return Err(JudgeError::RewardNotCollectable);
    }
    let decoding = DecodingOptions {
        top_logprobs: judge
            .realization
            .wants_logprobs()
            .then_some(DEFAULT_TOP_LOGPROBS),
        ..options.decoding.clone()
    };

    // Pass 1: render prompts, consult the cache, and dedup remote work.
    let mut cells: Vec<Cell> = Vec::with_capacity(corpus.len());
    let mut fetch_keys: Vec<String> = Vec::new();
    let mut fetch_requests: Vec<ChatRequest> = Vec::new();
    let mut key_to_fetch: std::collections::HashMap<String, usize> =
        std::collections::HashMap::new();
    let mut n_cache_hits = 0usize;

    for instruction in corpus.instructions() {
        let instruction_text = corpus
            .instruction_text(instruction)
            .expect("corpus lists only instructions it has text for");
        let anchor_text = judge
            .realization
            .anchor_system()
            .map(|anchor| (anchor, corpus.response(instruction, anchor)));
        for system in corpus.systems() {
            let Some(response_text) = corpus.response(instruction, system) else {
                continue;
            };
            let state = match &anchor_text {
                Some((anchor, None)) => CellState::PromptFailed(format!(
                    "anchor system `{anchor}` has no response for this instruction"
                )),
                other => {
                    let anchor = other.as_ref().and_then(|(_, text)| *text);
                    match render_prompt(&judge.realization, instruction_text, response_text, anchor)
                    {
                        Err(e) => CellState::PromptFailed(e.to_string()),
                        Ok(prompt) => {
                            let key = cache_key(judge, &prompt, &decoding);
                            match cache.read(&key)? {
                                Some(entry) => {
                                    n_cache_hits += 1;
                                    CellState::Cached(entry)
                                }
                                None => {
                                    let idx =
                                        *key_to_fetch.entry(key.clone()).or_insert_with(|| {
                                            fetch_keys.push(key);
                                            fetch_requests.push(ChatRequest {
                                                model: judge.model.clone(),
                                                prompt,
                                                decoding: decoding.clone(),
                                            });
                                            fetch_keys.len() - 1
                                        });
                                    CellState::NeedsFetch(idx)
                                }
                            }
                        }
                    }
                }
            };
            cells.push(Cell {
                instruction: instruction.clone(),
                system: system.clone(),
                state,
            });
        }
    }

    // Pass 2: fetch unique requests with a bounded worker pool.
    let n_remote_calls = fetch_requests.len();
    let results: Vec<Option<Result<CacheEntry, ChatError>>> =
        run_pool(api, cache, &fetch_keys, &fetch_requests, options)?;

    // A fatal error anywhere aborts the judge (deterministically: first by
    // fetch index).
    for result in results.iter().flatten() {
        if let Err(e) = result {
            if e.is_fatal_for_run() {
                return Err(JudgeError::Fatal(e.clone()));
            }
        }
    }

    // Pass 3: parse and assemble in corpus order.
    let mut records = Vec::with_capacity(cells.len());
    let mut failures = Vec::new();
    let mut n_parse_failures = 0usize;
    for cell in cells {
        let (raw_output, top_logprobs, transport_reason) = match cell.state {
            CellState::Cached(entry) => (entry.raw_output, entry.top_logprobs, None),
            CellState::NeedsFetch(idx) => match &results[idx] {
                Some(Ok(entry)) => (entry.raw_output.clone(), entry.top_logprobs.clone(), None),
                Some(Err(e)) => (String::new(), None, Some(e.to_string())),
                None => (
                    String::new(),
                    None,
                    Some("not attempted: the run stopped early".to_owned()),
                ),
            },
            CellState::PromptFailed(reason) => (String::new(), None, Some(reason)),
        };
        let score = match transport_reason {
            Some(reason) => {
                failures.push(ItemFailure {
                    instruction_id: cell.instruction.clone(),
                    system_id: cell.system.clone(),
                    reason,
                });
                None
            }
            None => match parse_score(&judge.realization, &raw_output, top_logprobs.as_deref()) {
                Ok(score) => Some(score),
                Err(parse_failure) => {
                    n_parse_failures += 1;
                    failures.push(ItemFailure {
                        instruction_id: cell.instruction.clone(),
                        system_id: cell.system.clone(),
                        reason: parse_failure.to_string(),
                    });
                    None
                }
            },
        };
        records.push(JudgmentRecord::from_parts(
            judge,
            cell.instruction,
            cell.system,
            raw_output,
            score,
        ));
    }

    Ok(CollectOutcome {
        records,
        n_cache_hits,
        n_remote_calls,
        n_parse_failures,
        failures,
    })
}

/// Fan unique requests over at most `options.jobs` threads. Each success is
/// written to the cache before being reported. A fatal error flips a stop
/// flag so the pool drains quickly; remaining slots stay `None`.
fn run_pool(
    api: &dyn ChatApi,
    cache: &JudgmentCache,
    keys: &[String],
    requests: &[ChatRequest],
    options: &CollectOptions,
) -> Result<Vec<Option<Result<CacheEntry, ChatError>>>, JudgeError> {
    let n = requests.len();
    let results: Mutex<Vec<Option<Result<CacheEntry, ChatError>>>> = Mutex::new(vec![None; n]);
    let cache_failure: Mutex<Option<CacheError>> = Mutex::new(None);
    let next = AtomicUsize::new(0);
    let stop = AtomicBool::new(false);
    let workers = options.jobs.clamp(1, n.max(1));

    std::thread::scope(|scope| {
        for _ in 0..workers {
            scope.spawn(|| loop {
                if stop.load(Ordering::SeqCst) {
                    return;
                }
                let i = next.fetch_add(1, Ordering::SeqCst);
                if i >= n {
                    return;
                }
                let outcome = call_with_retries(api, &requests[i], &options.retry);
                let result = match outcome {
                    Ok(response) => {
                        let entry = CacheEntry {
                            raw_output: response.raw_text,
                            top_logprobs: response.top_logprobs,
                        };
                        match cache.write(&keys[i], &entry) {
                            Ok(()) => Ok(entry),
                            Err(e) => {
                                *cache_failure.lock().unwrap() = Some(e);
                                stop.store(true, Ordering::SeqCst);
                                return;
                            }
                        }
                    }
                    Err(e) => {
                        if e.is_fatal_for_run() {
                            stop.store(true, Ordering::SeqCst);
                        }
                        Err(e)
                    }
                };
                results.lock().unwrap()[i] = Some(result);
            });
        }
    });

    if let Some(e) = cache_failure.into_inner().unwrap() {
        return Err(JudgeError::Cache(e));
    }
    Ok(results.into_inner().unwrap())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::ResponseRecord;
    use crate::ids::JudgeModelId;
    use crate::judge::client::ChatResponse;
    use std::collections::HashMap;
    use std::sync::atomic::AtomicUsize;

    fn corpus_2x2() -> Corpus {
        let mut records = Vec::new();
        for (i, i_text) in [("i1", "ask one"), ("i2", "ask two")] {
            for (s, r) in [("sys-a", "answer a"), ("sys-b", "answer b")] {
                records.push(ResponseRecord {
                    instruction_id: InstructionId::new(i).unwrap(),
                    instruction_text: i_text.to_owned(),
                    system_id: SystemId::new(s).unwrap(),
                    response_text: format!("{r} for {i}"),
                });
            }
        }
        Corpus::from_records(records).unwrap()
    }

    fn numeric_judge() -> JudgeSpec {
        JudgeSpec::new(JudgeModelId::new("m").unwrap(), Realization::Numeric)
    }

    fn fast_options() -> CollectOptions {
        CollectOptions {
            jobs: 2,
            retry: RetryPolicy {
                max_attempts: 2,
                base_delay_ms: 0,
                max_delay_ms: 0,
            },
            decoding: DecodingOptions::default(),
        }
    }

    /// Replies "85" to everything, counting calls; optionally fails chosen
    /// prompts with a fixed error.
    struct CountingApi {
        calls: AtomicUsize,
        fail_containing: Option<(String, ChatError)>,
    }

    impl CountingApi {
        fn ok() -> Self {
            Self {
                calls: AtomicUsize::new(0),
                fail_containing: None,
            }
        }

        fn failing(needle: &str, error: ChatError) -> Self {
            Self {
                calls: AtomicUsize::new(0),
                fail_containing: Some((needle.to_owned(), error)),
            }
        }

        fn calls(&self) -> usize {
            self.calls.load(Ordering::SeqCst)
        }
    }

    impl ChatApi for CountingApi {
        fn complete(&self, request: &ChatRequest) -> Result<ChatResponse, ChatError> {
            self.calls.fetch_add(1, Ordering::SeqCst);
            if let Some((needle, error)) = &self.fail_containing {
                if request.prompt.contains(needle) {
                    return Err(error.clone());
                }
            }
            Ok(ChatResponse {
                raw_text: "85".to_owned(),
                top_logprobs: None,
            })
        }
    }

    #[test]
    fn empty_cache_judges_every_cell() {
        let dir = tempfile::tempdir().unwrap();
        let cache = JudgmentCache::open(dir.path()).unwrap();
        let api = CountingApi::ok();
        let outcome =
            collect_judgments(&corpus_2x2(), &numeric_judge(), &api, &cache, &fast_options())
                .unwrap();
        assert_eq!(outcome.records.len(), 4);
        assert_eq!(outcome.n_remote_calls, 4);
        assert_eq!(outcome.n_cache_hits, 0);
        assert_eq!(api.calls(), 4);
        assert!(outcome.failures.is_empty());
        assert!(outcome.records.iter().all(|r| r.score == Some(85.0)));
        // Instruction-major order.
        let order: Vec<(&str, &str)> = outcome
            .records
            .iter()
            .map(|r| (r.instruction_id.as_str(), r.system_id.as_str()))
            .collect();
        assert_eq!(
            order,
            vec![
                ("i1", "sys-a"),
                ("i1", "sys-b"),
                ("i2", "sys-a"),
                ("i2", "sys-b")
            ]
        );
    }

    #[test]
    fn warm_cache_makes_no_remote_calls() {
        let dir = tempfile::tempdir().unwrap();
        let cache = JudgmentCache::open(dir.path()).unwrap();
        let corpus = corpus_2x2();
        let judge = numeric_judge();
        let first = CountingApi::ok();
        collect_judgments(&corpus, &judge, &first, &cache, &fast_options()).unwrap();

        let second = CountingApi::ok();
        let outcome =
            collect_judgments(&corpus, &judge, &second, &cache, &fast_options()).unwrap();
        assert_eq!(second.calls(), 0);
        assert_eq!(outcome.n_remote_calls, 0);
        assert_eq!(outcome.n_cache_hits, 4);
        assert_eq!(outcome.records.len(), 4);
    }

    #[test]
    fn transient_failure_after_retries_degrades_to_missing_score() {
        let dir = tempfile::tempdir().unwrap();
        let cache = JudgmentCache::open(dir.path()).unwrap();
        let api = CountingApi::failing("answer b for i2", ChatError::Timeout("slow".into()));
        let outcome =
            collect_judgments(&corpus_2x2(), &numeric_judge(), &api, &cache, &fast_options())
                .unwrap();
        assert_eq!(outcome.records.len(), 4);
        let scored = outcome.records.iter().filter(|r| r.score.is_some()).count();
        assert_eq!(scored, 3);
        assert_eq!(outcome.failures.len(), 1);
        assert_eq!(outcome.failures[0].system_id.as_str(), "sys-b");
        assert_eq!(outcome.failures[0].instruction_id.as_str(), "i2");
        assert!(outcome.failures[0].reason.contains("timed out"));
        // 3 successes + 2 attempts for the failing cell.
        assert_eq!(api.calls(), 5);
    }

    #[test]
    fn auth_errors_abort_the_judge() {
        let dir = tempfile::tempdir().unwrap();
        let cache = JudgmentCache::open(dir.path()).unwrap();
        let api = CountingApi::failing("answer", ChatError::Auth { status: 401 });
        let err =
            collect_judgments(&corpus_2x2(), &numeric_judge(), &api, &cache, &fast_options())
                .unwrap_err();
        assert!(matches!(err, JudgeError::Fatal(ChatError::Auth { .. })));
    }

    #[test]
    fn parse_failures_are_counted_and_reported() {
        struct Unparseable;
        impl ChatApi for Unparseable {
            fn complete(&self, _r: &ChatRequest) -> Result<ChatResponse, ChatError> {
                Ok(ChatResponse {
                    raw_text: "no score here".to_owned(),
                    top_logprobs: None,
                })
            }
        }
        let dir = tempfile::tempdir().unwrap();
        let cache = JudgmentCache::open(dir.path()).unwrap();
        let outcome = collect_judgments(
            &corpus_2x2(),
            &numeric_judge(),
            &Unparseable,
            &cache,
            &fast_options(),
        )
        .unwrap();
        assert_eq!(outcome.n_parse_failures, 4);
        assert!(outcome.records.iter().all(|r| r.score.is_none()));
        assert!(outcome
            .records
            .iter()
            .all(|r| r.raw_output == "no score here"));
        assert_eq!(outcome.failures.len(), 4);
    }

    #[test]
    fn identical_responses_share_one_remote_call() {
        // Both systems answer identically -> same prompt -> same cache key.
        let records = vec![
            ResponseRecord {
                instruction_id: InstructionId::new("i1").unwrap(),
                instruction_text: "ask".to_owned(),
                system_id: SystemId::new("sys-a").unwrap(),
                response_text: "same words".to_owned(),
            },
            ResponseRecord {
                instruction_id: InstructionId::new("i1").unwrap(),
                instruction_text: "ask".to_owned(),
                system_id: SystemId::new("sys-b").unwrap(),
                response_text: "same words".to_owned(),
            },
        ];
        let corpus = Corpus::from_records(records).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let cache = JudgmentCache::open(dir.path()).unwrap();
        let api = CountingApi::ok();
        let outcome =
            collect_judgments(&corpus, &numeric_judge(), &api, &cache, &fast_options()).unwrap();
        assert_eq!(api.calls(), 1);
        assert_eq!(outcome.n_remote_calls, 1);
        assert_eq!(outcome.records.len(), 2);
        assert!(outcome.records.iter().all(|r| r.score == Some(85.0)));
    }

    #[test]
    fn anchor_judging_renders_against_the_anchor_response() {
        struct PromptRecorder(Mutex<Vec<String>>);
        impl ChatApi for PromptRecorder {
            fn complete(&self, r: &ChatRequest) -> Result<ChatResponse, ChatError> {
                self.0.lock().unwrap().push(r.prompt.clone());
                Ok(ChatResponse {
                    raw_text: "[[A>B]]".to_owned(),
                    top_logprobs: None,
                })
            }
        }
        let judge = JudgeSpec::new(
            JudgeModelId::new("m").unwrap(),
            Realization::Anchor {
                anchor_system: SystemId::new("sys-b").unwrap(),
            },
        );
        let dir = tempfile::tempdir().unwrap();
        let cache = JudgmentCache::open(dir.path()).unwrap();
        let api = PromptRecorder(Mutex::new(Vec::new()));
        let outcome =
            collect_judgments(&corpus_2x2(), &judge, &api, &cache, &fast_options()).unwrap();
        assert_eq!(outcome.records.len(), 4);
        assert!(outcome.records.iter().all(|r| r.score == Some(1.0)));
        let prompts = api.0.lock().unwrap();
        assert!(prompts
            .iter()
            .all(|p| p.contains("<|The Start of Assistant B's Answer|>\nanswer b")));
    }

    #[test]
    fn missing_anchor_response_fails_those_cells_only() {
        // sys-b has no response for i2, so anchor prompts on i2 cannot render.
        let mut records = corpus_2x2().to_records();
        records.retain(|r| !(r.instruction_id.as_str() == "i2" && r.system_id.as_str() == "sys-b"));
        let corpus = Corpus::from_records(records).unwrap();
        let judge = JudgeSpec::new(
            JudgeModelId::new("m").unwrap(),
            Realization::Anchor {
                anchor_system: SystemId::new("sys-b").unwrap(),
            },
        );
        struct AlwaysTie;
        impl ChatApi for AlwaysTie {
            fn complete(&self, _r: &ChatRequest) -> Result<ChatResponse, ChatError> {
                Ok(ChatResponse {
                    raw_text: "[[A=B]]".to_owned(),
                    top_logprobs: None,
                })
            }
        }
        let dir = tempfile::tempdir().unwrap();
        let cache = JudgmentCache::open(dir.path()).unwrap();
        let outcome =
            collect_judgments(&corpus, &judge, &AlwaysTie, &cache, &fast_options()).unwrap();
        // i1: both cells judged; i2: only sys-a has a response, and it fails
        // for want of the anchor text.
        assert_eq!(outcome.records.len(), 3);
        assert_eq!(outcome.failures.len(), 1);
        assert!(outcome.failures[0].reason.contains("anchor system"));
        assert_eq!(outcome.failures[0].instruction_id.as_str(), "i2");
    }

    #[test]
    fn token_probs_judges_request_and_use_logprobs() {
        struct YesApi;
        impl ChatApi for YesApi {
            fn complete(&self, r: &ChatRequest) -> Result<ChatResponse, ChatError> {
                assert_eq!(r.decoding.top_logprobs, Some(DEFAULT_TOP_LOGPROBS));
                Ok(ChatResponse {
                    raw_text: "Yes".to_owned(),
                    top_logprobs: Some(vec![
                        ("Yes".to_owned(), 0.75f64.ln()),
                        (" no".to_owned(), 0.25f64.ln()),
                    ]),
                })
            }
        }
        let judge = JudgeSpec::new(JudgeModelId::new("m").unwrap(), Realization::TokenProbs);
        let dir = tempfile::tempdir().unwrap();
        let cache = JudgmentCache::open(dir.path()).unwrap();
        let outcome =
            collect_judgments(&corpus_2x2(), &judge, &YesApi, &cache, &fast_options()).unwrap();
        for record in &outcome.records {
            approx::assert_abs_diff_eq!(record.score.unwrap(), 0.75, epsilon = 1e-12);
        }
    }

    #[test]
    fn reward_judges_cannot_be_collected() {
        let judge = JudgeSpec::new(JudgeModelId::new("m").unwrap(), Realization::Reward);
        let dir = tempfile::tempdir().unwrap();
        let cache = JudgmentCache::open(dir.path()).unwrap();
        let api = CountingApi::ok();
        assert!(matches!(
            collect_judgments(&corpus_2x2(), &judge, &api, &cache, &fast_options()),
            Err(JudgeError::RewardNotCollectable)
        ));
    }

    #[test]
    fn scores_are_reparsed_from_cache_each_run() {
        // Seed the cache under the exact key collect will compute, with raw
        // output that parses to 42; the API then never gets called.
        let corpus = corpus_2x2();
        let judge = numeric_judge();
        let dir = tempfile::tempdir().unwrap();
        let cache = JudgmentCache::open(dir.path()).unwrap();
        let api = CountingApi::ok();
        let first = collect_judgments(&corpus, &judge, &api, &cache, &fast_options()).unwrap();
        assert_eq!(first.records[0].score, Some(85.0));

        // Tamper with every cache file to prove parsing is live.
        let mut edited = 0;
        for entry in std::fs::read_dir(dir.path()).unwrap() {
            let path = entry.unwrap().path();
            let mut value: HashMap<String, serde_json::Value> =
                serde_json::from_slice(&std::fs::read(&path).unwrap()).unwrap();
            value.insert("raw_output".to_owned(), serde_json::json!("42"));
            std::fs::write(&path, serde_json::to_vec(&value).unwrap()).unwrap();
            edited += 1;
        }
        assert_eq!(edited, 4);
        let again = CountingApi::ok();
        let outcome = collect_judgments(&corpus, &judge, &again, &cache, &fast_options()).unwrap();
        assert_eq!(again.calls(), 0);
        assert!(outcome.records.iter().all(|r| r.score == Some(42.0)));
    }
}
