//! Chat-completions client: one user message in, raw text (and optional
//! first-token top log-probabilities) out.
//!
//! Transport errors are split into transient (timeouts, rate limits, 5xx —
//! retried with exponential backoff) and fatal (auth, unknown model/route,
//! missing log-probs support — fail the whole run fast). Malformed
//! responses and other 4xx are per-item failures: not retried, never
//! aborting the batch.

use std::time::Duration;

use serde_json::{json, Value};
use thiserror::Error;

use super::cache::DecodingOptions;
use crate::ids::JudgeModelId;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ChatError {
    #[error("request timed out: {0}")]
    Timeout(String),
    #[error("rate limited (HTTP 429)")]
    RateLimited,
    #[error("server error (HTTP {status}): {detail}")]
    ServerError { status: u16, detail: String },
    #[error("could not reach the endpoint: {0}")]
    Network(String),
    #[error("authentication rejected (HTTP {status}); check the API key environment variable")]
    Auth { status: u16 },
    #[error("endpoint or model not found (HTTP 404): {detail}")]
    NotFound { detail: String },
    #[error("request rejected (HTTP {status}): {detail}")]
    BadRequest { status: u16, detail: String },
    #[error("response was not in the expected shape: {0}")]
    MalformedResponse(String),
    #[error(
        "the endpoint returned no top log-probabilities; the token-probability \
         realization requires an endpoint with logprobs support"
    )]
    LogprobsUnavailable,
}

impl ChatError {
    /// Worth retrying: the same request may succeed later.
    pub fn is_transient(&self) -> bool {
        matches!(
            self,
            ChatError::Timeout(_)
                | ChatError::RateLimited
                | ChatError::ServerError { .. }
                | ChatError::Network(_)
        )
    }

    /// Poisoned run: no other request to this endpoint can succeed either.
    pub fn is_fatal_for_run(&self) -> bool {
        matches!(
            self,
            ChatError::Auth { .. } | ChatError::NotFound { .. } | ChatError::LogprobsUnavailable
        )
    }
}

/// One judgment request to the remote endpoint.
#[derive(Debug, Clone, PartialEq)]
pub struct ChatRequest {
    pub model: JudgeModelId,
    pub prompt: String,
    pub decoding: DecodingOptions,
}

/// The raw material a judgment is parsed from.
#[derive(Debug, Clone, PartialEq)]
pub struct ChatResponse {
    pub raw_text: String,
    /// Top log-probabilities of the first generated token, present iff
    /// requested and supported.
    pub top_logprobs: Option<Vec<(String, f64)>>,
}

/// Anything that can answer a chat request: the HTTP client in production,
/// fakes in tests.
pub trait ChatApi: Send + Sync {
    fn complete(&self, request: &ChatRequest) -> Result<ChatResponse, ChatError>;
}

/// Deterministic exponential backoff: max_attempts tries, delay doubling
/// from base_delay_ms up to max_delay_ms. No jitter, so runs are
/// reproducible.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RetryPolicy {
    pub max_attempts: u32,
    pub base_delay_ms: u64,
    pub max_delay_ms: u64,
}

impl Default for RetryPolicy {
    fn default() -> Self {
        Self {
            max_attempts: 3,
            base_delay_ms: 500,
            max_delay_ms: 8_000,
        }
    }
}

impl RetryPolicy {
    /// Delay before retry number `retry` (1-based).
    fn delay(&self, retry: u32) -> Duration {
        let factor = 1u64 << (retry - 1).min(16);
        Duration::from_millis((self.base_delay_ms * factor).min(self.max_delay_ms))
    }
}

/// Call with retries on transient errors only; fatal and per-item errors
/// propagate immediately.
pub fn call_with_retries(
    api: &dyn ChatApi,
    request: &ChatRequest,
    policy: &RetryPolicy,
) -> Result<ChatResponse, ChatError> {
    let attempts = policy.max_attempts.max(1);
    let mut last_error = None;
    for attempt in 1..=attempts {
        match api.complete(request) {
            Ok(response) => return Ok(response),
            Err(e) if e.is_transient() && attempt < attempts => {
                std::thread::sleep(policy.delay(attempt));
                last_error = Some(e);
            }
            Err(e) => return Err(e),
        }
    }
    Err(last_error.expect("loop always records an error before falling through"))
}

/// Blocking HTTP client for a chat-completions-compatible endpoint.
///
/// `url` is the full completions URL (e.g. `https://host/v1/chat/completions`).
/// The API key is read from the environment — never from configuration
/// files — and sent as a bearer token when present.
pub struct HttpChatClient {
    url: String,
    api_key: Option<String>,
    http: reqwest::blocking::Client,
}

impl HttpChatClient {
    pub fn new(url: &str, api_key_env: &str, timeout: Duration) -> Result<Self, ChatError> {
        let http = reqwest::blocking::Client::builder()
            .timeout(timeout)
            .build()
            .map_err(|e| ChatError::Network(e.to_string()))?;
        Ok(Self {
            url: url.to_owned(),
            api_key: std::env::var(api_key_env).ok().filter(|k| !k.is_empty()),
            http,
        })
    }

    fn request_body(request: &ChatRequest) -> Value {
        let mut body = json!({
            "model": request.model.as_str(),
            "messages": [{"role": "user", "content": request.prompt}],
            "temperature": request.decoding.temperature,
            "max_tokens": request.decoding.max_tokens,
        });
        if let Some(k) = request.decoding.top_logprobs {
            body["logprobs"] = json!(true);
            body["top_logprobs"] = json!(k);
        }
        body
    }

    fn parse_body(request: &ChatRequest, body: &str) -> Result<ChatResponse, ChatError> {
        let value: Value = serde_json::from_str(body)
            .map_err(|e| ChatError::MalformedResponse(format!("invalid JSON: {e}")))?;
        let choice = value
            .get("choices")
            .and_then(|c| c.get(0))
            .ok_or_else(|| ChatError::MalformedResponse("no choices[0]".to_owned()))?;
        let raw_text = choice
            .pointer("/message/content")
            .and_then(Value::as_str)
            .ok_or_else(|| ChatError::MalformedResponse("no message content".to_owned()))?
            .to_owned();

        let top_logprobs = if request.decoding.top_logprobs.is_some() {
            let entries = choice
                .pointer("/logprobs/content/0/top_logprobs")
                .and_then(Value::as_array)
                .ok_or(ChatError::LogprobsUnavailable)?;
            let mut pairs = Vec::with_capacity(entries.len());
            for entry in entries {
                let token = entry.get("token").and_then(Value::as_str).ok_or_else(|| {
                    ChatError::MalformedResponse("logprob entry without token".to_owned())
                })?;
                let logprob = entry.get("logprob").and_then(Value::as_f64).ok_or_else(|| {
                    ChatError::MalformedResponse("logprob entry without value".to_owned())
                })?;
                pairs.push((token.to_owned(), logprob));
            }
            if pairs.is_empty() {
                return Err(ChatError::LogprobsUnavailable);
            }
            Some(pairs)
        } else {
            None
        };

        Ok(ChatResponse {
            raw_text,
            top_logprobs,
        })
    }
}

impl ChatApi for HttpChatClient {
    fn complete(&self, request: &ChatRequest) -> Result<ChatResponse, ChatError> {
        let mut builder = self.http.post(&self.url).json(&Self::request_body(request));
        if let Some(key) = &self.api_key {
            builder = builder.bearer_auth(key);
        }
        let response = builder.send().map_err(|e| {
            if e.is_timeout() {
                ChatError::Timeout(e.to_string())
            } else {
                ChatError::Network(e.to_string())
            }
        })?;

        let status = response.status().as_u16();
        let body = response
            .text()
            .map_err(|e| ChatError::Network(e.to_string()))?;
        let detail = || {
            let mut d = body.trim().to_owned();
            const LIMIT: usize = 300;
            if d.len() > LIMIT {
                let mut end = LIMIT;
                while !d.is_char_boundary(end) {
                    end -= 1;
                }
                d.truncate(end);
                d.push('…');
            }
            d
        };
        match status {
            200..=299 => Self::parse_body(request, &body),
            401 | 403 => Err(ChatError::Auth { status }),
            404 => Err(ChatError::NotFound { detail: detail() }),
            429 => Err(ChatError::RateLimited),
            500..=599 => Err(ChatError::ServerError {
                status,
                detail: detail(),
            }),
            other => Err(ChatError::BadRequest {
                status: other,
                detail: detail(),
            }),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::sync::atomic::{AtomicU32, Ordering};

    struct ScriptedApi {
        calls: AtomicU32,
        script: Vec<Result<ChatResponse, ChatError>>,
    }

    impl ScriptedApi {
        fn new(script: Vec<Result<ChatResponse, ChatError>>) -> Self {
            Self {
                calls: AtomicU32::new(0),
                script,
            }
        }

        fn calls(&self) -> u32 {
            self.calls.load(Ordering::SeqCst)
        }
    }

    impl ChatApi for ScriptedApi {
        fn complete(&self, _request: &ChatRequest) -> Result<ChatResponse, ChatError> {
            let i = self.calls.fetch_add(1, Ordering::SeqCst) as usize;
            self.script[i.min(self.script.len() - 1)].clone()
        }
    }

    fn request() -> ChatRequest {
        ChatRequest {
            model: JudgeModelId::new("m").unwrap(),
            prompt: "p".to_owned(),
            decoding: DecodingOptions::default(),
        }
    }

    fn ok(text: &str) -> Result<ChatResponse, ChatError> {
        Ok(ChatResponse {
            raw_text: text.to_owned(),
            top_logprobs: None,
        })
    }

    fn fast() -> RetryPolicy {
        RetryPolicy {
            max_attempts: 3,
            base_delay_ms: 0,
            max_delay_ms: 0,
        }
    }

    #[test]
    fn transient_errors_are_retried_to_success() {
        let api = ScriptedApi::new(vec![
            Err(ChatError::Timeout("t".into())),
            Err(ChatError::RateLimited),
            ok("fine"),
        ]);
        let got = call_with_retries(&api, &request(), &fast()).unwrap();
        assert_eq!(got.raw_text, "fine");
        assert_eq!(api.calls(), 3);
    }

    #[test]
    fn transient_errors_exhaust_attempts() {
        let api = ScriptedApi::new(vec![Err(ChatError::ServerError {
            status: 500,
            detail: "boom".into(),
        })]);
        let err = call_with_retries(&api, &request(), &fast()).unwrap_err();
        assert!(err.is_transient());
        assert_eq!(api.calls(), 3);
    }

    #[test]
    fn fatal_errors_bypass_retries() {
        let api = ScriptedApi::new(vec![Err(ChatError::Auth { status: 401 }), ok("never")]);
        let err = call_with_retries(&api, &request(), &fast()).unwrap_err();
        assert!(err.is_fatal_for_run());
        assert_eq!(api.calls(), 1);
    }

    #[test]
    fn per_item_errors_are_not_retried() {
        let api = ScriptedApi::new(vec![
            Err(ChatError::MalformedResponse("junk".into())),
            ok("never"),
        ]);
        let err = call_with_retries(&api, &request(), &fast()).unwrap_err();
        assert!(!err.is_transient() && !err.is_fatal_for_run());
        assert_eq!(api.calls(), 1);
    }

    #[test]
    fn backoff_doubles_and_caps() {
        let policy = RetryPolicy {
            max_attempts: 6,
            base_delay_ms: 100,
            max_delay_ms: 450,
        };
        let delays: Vec<u64> = (1..=4).map(|r| policy.delay(r).as_millis() as u64).collect();
        assert_eq!(delays, vec![100, 200, 400, 450]);
    }

    #[test]
    fn classification_covers_the_taxonomy() {
        assert!(ChatError::Timeout("x".into()).is_transient());
        assert!(ChatError::Network("x".into()).is_transient());
        assert!(!ChatError::Auth { status: 403 }.is_transient());
        assert!(ChatError::LogprobsUnavailable.is_fatal_for_run());
        let bad = ChatError::BadRequest {
            status: 400,
            detail: String::new(),
        };
        assert!(!bad.is_transient() && !bad.is_fatal_for_run());
    }

    #[test]
    fn parse_body_extracts_text_and_logprobs() {
        let mut req = request();
        let body = r#"{
            "choices": [{
                "message": {"content": "85"},
                "logprobs": {"content": [{
                    "top_logprobs": [
                        {"token": "Yes", "logprob": -0.2},
                        {"token": " no", "logprob": -2.0}
                    ]
                }]}
            }]
        }"#;
        let plain = HttpChatClient::parse_body(&req, body).unwrap();
        assert_eq!(plain.raw_text, "85");
        assert_eq!(plain.top_logprobs, None);

        req.decoding.top_logprobs = Some(2);
        let with = HttpChatClient::parse_body(&req, body).unwrap();
        assert_eq!(
            with.top_logprobs,
            Some(vec![("Yes".to_owned(), -0.2), (" no".to_owned(), -2.0)])
        );
    }

    #[test]
    fn missing_logprobs_when_requested_is_fatal() {
        let mut req = request();
        req.decoding.top_logprobs = Some(5);
        let body = r#"{"choices": [{"message": {"content": "yes"}}]}"#;
        assert_eq!(
            HttpChatClient::parse_body(&req, body),
            Err(ChatError::LogprobsUnavailable)
        );
    }

    #[test]
    fn malformed_bodies_are_per_item() {
        let body = r#"{"unexpected": true}"#;
        let err = HttpChatClient::parse_body(&request(), body).unwrap_err();
        assert!(matches!(err, ChatError::MalformedResponse(_)));
    }

    #[test]
    fn logprob_request_body_sets_flags() {
        let mut req = request();
        req.decoding.top_logprobs = Some(20);
        let body = HttpChatClient::request_body(&req);
        assert_eq!(body["logprobs"], json!(true));
        assert_eq!(body["top_logprobs"], json!(20));
        assert_eq!(body["temperature"], json!(0.0));

        let plain = HttpChatClient::request_body(&request());
        assert!(plain.get("logprobs").is_none());
    }
}
