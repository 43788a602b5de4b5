//! Turning a corpus of responses into judgment scores: prompt rendering,
//! endpoint access with retries, an on-disk response cache, output parsing,
//! and the collection orchestrator that ties them together.

pub mod cache;
pub mod client;
pub mod collect;
pub mod parse;
pub mod prompts;

pub use cache::{cache_key, CacheEntry, CacheError, DecodingOptions, JudgmentCache};
pub use client::{
    call_with_retries, ChatApi, ChatError, ChatRequest, ChatResponse, HttpChatClient, RetryPolicy,
};
pub use collect::{
    collect_judgments, CollectOptions, CollectOutcome, ItemFailure, JudgeError,
    DEFAULT_TOP_LOGPROBS,
};
pub use parse::{parse_score, ParseFailure};
pub use prompts::{render_prompt, PromptError};
