//! Remote chat-completion providers with retry, a concurrency cap and a
//! token-bucket rate limiter.

use std::sync::{Arc, Condvar, Mutex, OnceLock};
use std::time::{Duration, Instant};

use rand::Rng;
use serde::{Deserialize, Serialize};
use tracing::{debug, warn};

use super::prompt::Prompt;
use super::tokens::{HeuristicTokenizer, Tokenizer};
use super::{Completion, Credentials, GatewayError, LlmProvider, ProviderSpec, UsageRecord};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChatMessage {
    pub role: String,
    pub content: String,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ChatRequest {
    pub endpoint: String,
    pub model: String,
    pub messages: Vec<ChatMessage>,
}

impl ChatRequest {
    pub fn from_prompt(spec: &ProviderSpec, prompt: &Prompt) -> Self {
        let mut messages = vec![ChatMessage { role: "system".into(), content: prompt.system_text.clone() }];
        for (input, output) in &prompt.few_shot_examples {
            messages.push(ChatMessage { role: "user".into(), content: input.clone() });
            messages.push(ChatMessage { role: "assistant".into(), content: output.clone() });
        }
        messages.push(ChatMessage { role: "user".into(), content: prompt.user_text.clone() });
        Self { endpoint: spec.endpoint.clone(), model: spec.model_id().to_string(), messages }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ChatResponse {
    pub text: String,
    pub input_tokens: Option<u64>,
    pub output_tokens: Option<u64>,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum TransportError {
    #[error("connection failed: {0}")]
    Connect(String),
    #[error("http status {status}: {body}")]
    Status { status: u16, body: String },
    #[error("malformed response: {0}")]
    Malformed(String),
}

/// Sends one chat request. Implemented over HTTP for real providers and by
/// scripted fakes in tests.
pub trait Transport: Send + Sync {
    fn send(&self, request: &ChatRequest, api_key: Option<&str>) -> Result<ChatResponse, TransportError>;
}

/// OpenAI-compatible `chat/completions` over blocking HTTP.
///
/// The client is built on first use: a blocking client cannot be created
/// from inside an async runtime, and gateways are often built there.
pub struct HttpTransport {
    timeout: Duration,
    client: OnceLock<Result<reqwest::blocking::Client, String>>,
}

impl HttpTransport {
    pub fn new(timeout: Duration) -> Result<Self, GatewayError> {
        Ok(Self { timeout, client: OnceLock::new() })
    }

    fn client(&self) -> Result<&reqwest::blocking::Client, TransportError> {
        self.client
            .get_or_init(|| {
                reqwest::blocking::Client::builder()
                    .timeout(self.timeout)
                    .build()
                    .map_err(|e| format!("cannot build http client: {e}"))
            })
            .as_ref()
            .map_err(|e| TransportError::Connect(e.clone()))
    }
}

#[derive(Serialize)]
struct WireRequest<'a> {
    model: &'a str,
    messages: &'a [ChatMessage],
    temperature: f32,
}

#[derive(Deserialize)]
struct WireResponse {
    choices: Vec<WireChoice>,
    #[serde(default)]
    usage: Option<WireUsage>,
}

#[derive(Deserialize)]
struct WireChoice {
    message: ChatMessage,
}

#[derive(Deserialize)]
struct WireUsage {
    prompt_tokens: Option<u64>,
    completion_tokens: Option<u64>,
}

impl Transport for HttpTransport {
    fn send(&self, request: &ChatRequest, api_key: Option<&str>) -> Result<ChatResponse, TransportError> {
        let mut builder = self.client()?.post(&request.endpoint).json(&WireRequest {
            model: &request.model,
            messages: &request.messages,
            temperature: 0.0,
        });
        if let Some(key) = api_key {
            builder = builder.bearer_auth(key);
        }
        let response = builder.send().map_err(|e| TransportError::Connect(e.to_string()))?;
        let status = response.status();
        let body = response.text().map_err(|e| TransportError::Connect(e.to_string()))?;
        if !status.is_success() {
            return Err(TransportError::Status { status: status.as_u16(), body });
        }
        let wire: WireResponse = serde_json::from_str(&body).map_err(|e| TransportError::Malformed(e.to_string()))?;
        let choice = wire.choices.into_iter().next().ok_or_else(|| TransportError::Malformed("no choices".into()))?;
        Ok(ChatResponse {
            text: choice.message.content,
            input_tokens: wire.usage.as_ref().and_then(|u| u.prompt_tokens),
            output_tokens: wire.usage.as_ref().and_then(|u| u.completion_tokens),
        })
    }
}

/// Attempts are total tries, so `max_attempts = 3` allows two retries.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RetryPolicy {
    pub max_attempts: u32,
    pub base_delay: Duration,
    /// Delays are scaled by a random factor in `[1 - jitter, 1 + jitter)`.
    pub jitter: f64,
}

impl Default for RetryPolicy {
    fn default() -> Self {
        Self { max_attempts: 3, base_delay: Duration::from_millis(500), jitter: 0.5 }
    }
}

impl RetryPolicy {
    pub fn delay_for(&self, attempt: u32) -> Duration {
        let exp = self.base_delay.saturating_mul(1u32 << (attempt.saturating_sub(1)).min(16));
        if self.jitter <= 0.0 {
            return exp;
        }
        let factor = rand::rng().random_range((1.0 - self.jitter)..(1.0 + self.jitter));
        exp.mul_f64(factor.max(0.0))
    }
}

/// Counting semaphore bounding in-flight requests.
#[derive(Debug)]
pub struct ConcurrencyLimit {
    permits: Mutex<usize>,
    freed: Condvar,
}

pub struct Permit<'a> {
    limit: &'a ConcurrencyLimit,
}

impl ConcurrencyLimit {
    pub fn new(permits: usize) -> Self {
        Self { permits: Mutex::new(permits.max(1)), freed: Condvar::new() }
    }

    pub fn acquire(&self) -> Permit<'_> {
        let mut free = self.permits.lock().unwrap_or_else(|e| e.into_inner());
        while *free == 0 {
            free = self.freed.wait(free).unwrap_or_else(|e| e.into_inner());
        }
        *free -= 1;
        Permit { limit: self }
    }
}

impl Drop for Permit<'_> {
    fn drop(&mut self) {
        *self.limit.permits.lock().unwrap_or_else(|e| e.into_inner()) += 1;
        self.limit.freed.notify_one();
    }
}

/// Token bucket refilled at `rate` tokens per second.
#[derive(Debug)]
pub struct TokenBucket {
    rate: f64,
    capacity: f64,
    state: Mutex<(f64, Instant)>,
}

impl TokenBucket {
    pub fn new(rate_per_sec: f64) -> Self {
        let capacity = rate_per_sec.max(1.0);
        Self { rate: rate_per_sec, capacity, state: Mutex::new((capacity, Instant::now())) }
    }

    /// Takes one token, returning how long the caller must wait first.
    pub fn reserve(&self) -> Duration {
        let mut state = self.state.lock().unwrap_or_else(|e| e.into_inner());
        let now = Instant::now();
        let elapsed = now.saturating_duration_since(state.1).as_secs_f64();
        state.0 = (state.0 + elapsed * self.rate).min(self.capacity);
        state.1 = now;
        state.0 -= 1.0;
        if state.0 >= 0.0 {
            Duration::ZERO
        } else {
            Duration::from_secs_f64(-state.0 / self.rate)
        }
    }
}

type Sleeper = Arc<dyn Fn(Duration) + Send + Sync>;

pub struct RemoteProvider {
    spec: ProviderSpec,
    transport: Arc<dyn Transport>,
    retry: RetryPolicy,
    limit: ConcurrencyLimit,
    bucket: Option<TokenBucket>,
    sleep: Sleeper,
    tokenizer: Arc<dyn Tokenizer>,
}

impl RemoteProvider {
    pub fn new(spec: ProviderSpec, transport: Arc<dyn Transport>) -> Self {
        let limit = ConcurrencyLimit::new(spec.max_in_flight);
        let bucket = spec.requests_per_second.filter(|r| *r > 0.0).map(TokenBucket::new);
        Self {
            spec,
            transport,
            retry: RetryPolicy::default(),
            limit,
            bucket,
            sleep: Arc::new(std::thread::sleep),
            tokenizer: Arc::new(HeuristicTokenizer),
        }
    }

    pub fn with_retry(mut self, retry: RetryPolicy) -> Self {
        self.retry = retry;
        self
    }

    pub fn with_sleeper(mut self, sleep: impl Fn(Duration) + Send + Sync + 'static) -> Self {
        self.sleep = Arc::new(sleep);
        self
    }

    fn api_key(&self, credentials: &Credentials) -> Result<Option<String>, GatewayError> {
        if let Some(key) = credentials.get(&self.spec.name) {
            return Ok(Some(key.to_string()));
        }
        match &self.spec.auth {
            None => Ok(None),
            Some(var) => std::env::var(var).map(Some).map_err(|_| {
                GatewayError::AuthFailure(format!("no API key for `{}` (set {var} or send one per request)", self.spec.name))
            }),
        }
    }
}

enum Retryable {
    RateLimited,
    Transport(String),
}

impl LlmProvider for RemoteProvider {
    fn complete(&self, prompt: &Prompt, credentials: &Credentials) -> Result<Completion, GatewayError> {
        let key = self.api_key(credentials)?;
        let request = ChatRequest::from_prompt(&self.spec, prompt);
        let _permit = self.limit.acquire();
        let mut last = Retryable::Transport("no attempt made".into());
        let attempts = self.retry.max_attempts.max(1);
        for attempt in 1..=attempts {
            if let Some(bucket) = &self.bucket {
                let wait = bucket.reserve();
                if !wait.is_zero() {
                    (self.sleep)(wait);
                }
            }
            match self.transport.send(&request, key.as_deref()) {
                Ok(resp) => {
                    debug!(provider = %self.spec.name, attempt, "completion received");
                    let input_tokens =
                        resp.input_tokens.unwrap_or_else(|| self.tokenizer.count(&prompt.full_text()));
                    let output_tokens = resp.output_tokens.unwrap_or_else(|| self.tokenizer.count(&resp.text));
                    return Ok(Completion {
                        text: resp.text,
                        usage: UsageRecord {
                            phase: prompt.role,
                            input_tokens,
                            output_tokens,
                            provider: self.spec.name.clone(),
                        },
                        attempts: attempt,
                    });
                }
                Err(TransportError::Status { status: 401 | 403, body }) => {
                    return Err(GatewayError::AuthFailure(format!("{}: {body}", self.spec.name)));
                }
                Err(TransportError::Malformed(msg)) => {
                    return Err(GatewayError::MalformedProviderResponse(msg));
                }
                Err(TransportError::Status { status: 429, .. }) => last = Retryable::RateLimited,
                Err(TransportError::Status { status, body }) if status == 408 || status >= 500 => {
                    last = Retryable::Transport(format!("http {status}: {body}"));
                }
                Err(TransportError::Status { status, body }) => {
                    return Err(GatewayError::Provider(format!("http {status}: {body}")));
                }
                Err(TransportError::Connect(msg)) => last = Retryable::Transport(msg),
            }
            if attempt < attempts {
                let delay = self.retry.delay_for(attempt);
                warn!(provider = %self.spec.name, attempt, ?delay, "transient provider failure, retrying");
                (self.sleep)(delay);
            }
        }
        Err(match last {
            Retryable::RateLimited => GatewayError::RateLimited { attempts },
            Retryable::Transport(message) => GatewayError::Transport { attempts, message },
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gateway::Role;
    use std::sync::atomic::{AtomicU32, Ordering};

    struct Scripted {
        script: Mutex<Vec<Result<ChatResponse, TransportError>>>,
        calls: AtomicU32,
        seen_key: Mutex<Option<String>>,
    }

    impl Scripted {
        fn new(mut script: Vec<Result<ChatResponse, TransportError>>) -> Arc<Self> {
            script.reverse();
            Arc::new(Self { script: Mutex::new(script), calls: AtomicU32::new(0), seen_key: Mutex::new(None) })
        }
    }

    impl Transport for Scripted {
        fn send(&self, _req: &ChatRequest, key: Option<&str>) -> Result<ChatResponse, TransportError> {
            self.calls.fetch_add(1, Ordering::SeqCst);
            *self.seen_key.lock().unwrap() = key.map(str::to_string);
            self.script.lock().unwrap().pop().expect("script exhausted")
        }
    }

    fn ok(text: &str) -> Result<ChatResponse, TransportError> {
        Ok(ChatResponse { text: text.into(), input_tokens: Some(10), output_tokens: None })
    }

    fn provider(t: Arc<Scripted>) -> RemoteProvider {
        let spec = ProviderSpec::remote("gpt-4o", "http://127.0.0.1:9/v1/chat/completions", 8192);
        RemoteProvider::new(spec, t).with_sleeper(|_| {})
    }

    fn prompt() -> Prompt {
        Prompt { role: Role::Annotator, system_text: "s".into(), user_text: "u".into(), few_shot_examples: vec![] }
    }

    #[test]
    fn retries_transient_failures() {
        let t = Scripted::new(vec![
            Err(TransportError::Connect("reset".into())),
            Err(TransportError::Status { status: 503, body: String::new() }),
            ok("done"),
        ]);
        let c = provider(t.clone()).complete(&prompt(), &Credentials::default()).unwrap();
        assert_eq!(c.text, "done");
        assert_eq!(c.attempts, 3);
        assert_eq!(c.usage.input_tokens, 10);
        assert_eq!(c.usage.output_tokens, 1);
        assert_eq!(c.usage.phase, Role::Annotator);
    }

    #[test]
    fn rate_limit_exhaustion() {
        let t = Scripted::new(vec![
            Err(TransportError::Status { status: 429, body: String::new() }),
            Err(TransportError::Status { status: 429, body: String::new() }),
            Err(TransportError::Status { status: 429, body: String::new() }),
        ]);
        let err = provider(t.clone()).complete(&prompt(), &Credentials::default()).unwrap_err();
        assert!(matches!(err, GatewayError::RateLimited { attempts: 3 }));
        assert_eq!(t.calls.load(Ordering::SeqCst), 3);
    }

    #[test]
    fn auth_and_malformed_are_not_retried() {
        let t = Scripted::new(vec![Err(TransportError::Status { status: 401, body: "bad key".into() })]);
        assert!(matches!(provider(t.clone()).complete(&prompt(), &Credentials::default()), Err(GatewayError::AuthFailure(_))));
        assert_eq!(t.calls.load(Ordering::SeqCst), 1);

        let t = Scripted::new(vec![Err(TransportError::Malformed("x".into()))]);
        assert!(matches!(
            provider(t).complete(&prompt(), &Credentials::default()),
            Err(GatewayError::MalformedProviderResponse(_))
        ));
    }

    #[test]
    fn session_key_is_forwarded() {
        let t = Scripted::new(vec![ok("x")]);
        let mut creds = Credentials::default();
        creds.insert("gpt-4o", "sk-test");
        provider(t.clone()).complete(&prompt(), &creds).unwrap();
        assert_eq!(t.seen_key.lock().unwrap().as_deref(), Some("sk-test"));
    }

    #[test]
    fn missing_env_key_is_auth_failure() {
        let t = Scripted::new(vec![]);
        let mut spec = ProviderSpec::remote("gpt-4o", "http://127.0.0.1:9", 8192);
        spec.auth = Some("TRANSLAW_TEST_KEY_THAT_IS_NOT_SET".into());
        let p = RemoteProvider::new(spec, t.clone());
        assert!(matches!(p.complete(&prompt(), &Credentials::default()), Err(GatewayError::AuthFailure(_))));
        assert_eq!(t.calls.load(Ordering::SeqCst), 0);
    }

    #[test]
    fn backoff_grows_exponentially() {
        let r = RetryPolicy { max_attempts: 3, base_delay: Duration::from_millis(500), jitter: 0.0 };
        assert_eq!(r.delay_for(1), Duration::from_millis(500));
        assert_eq!(r.delay_for(2), Duration::from_millis(1000));
        let jittered = RetryPolicy::default().delay_for(2);
        assert!(jittered >= Duration::from_millis(500) && jittered < Duration::from_millis(1500));
    }

    #[test]
    fn token_bucket_throttles() {
        let b = TokenBucket::new(2.0);
        assert_eq!(b.reserve(), Duration::ZERO);
        assert_eq!(b.reserve(), Duration::ZERO);
        assert!(b.reserve() > Duration::from_millis(400));
    }

    #[test]
    fn concurrency_limit_bounds_in_flight() {
        let limit = Arc::new(ConcurrencyLimit::new(2));
        let active = Arc::new(AtomicU32::new(0));
        let peak = Arc::new(AtomicU32::new(0));
        std::thread::scope(|s| {
            for _ in 0..6 {
                let (limit, active, peak) = (limit.clone(), active.clone(), peak.clone());
                s.spawn(move || {
                    let _p = limit.acquire();
                    let now = active.fetch_add(1, Ordering::SeqCst) + 1;
                    peak.fetch_max(now, Ordering::SeqCst);
                    std::thread::sleep(Duration::from_millis(5));
                    active.fetch_sub(1, Ordering::SeqCst);
                });
            }
        });
        assert!(peak.load(Ordering::SeqCst) <= 2);
    }
}
