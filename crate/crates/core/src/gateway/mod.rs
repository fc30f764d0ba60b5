//! Uniform access to LLM providers: registry, role prompts, token
//! estimation, completion with retry, and cost accounting.

pub mod cost;
pub mod mock;
pub mod prompt;
pub mod remote;
pub mod tokens;

use std::collections::{BTreeMap, HashMap};
use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::sync::Arc;
use std::time::Duration;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use cost::{accrue_cost, cost_comparisons, render_cost_report, round_cents, ComparisonInputs, CostComparison, CostReport};
pub use mock::{fingerprint, MockFixture, MockProvider, MockResponse};
pub use prompt::{render_prompt, AnnotatorInputs, Prompt, ProofreaderInputs, RoleInputs, TranslatorInputs};
pub use remote::{HttpTransport, RemoteProvider, RetryPolicy, Transport};
pub use tokens::{estimate_tokens, HeuristicTokenizer, TokenScheme, Tokenizer};

pub const BUILTIN_ENDPOINT: &str = "builtin";
pub const MOCK_PROVIDER: &str = "mock";
pub const DEFAULT_MAX_IN_FLIGHT: usize = 4;

#[derive(Debug, Error)]
pub enum GatewayError {
    #[error("missing prompt input `{0}`")]
    MissingInput(&'static str),
    #[error("unknown provider `{0}`")]
    UnknownProvider(String),
    #[error("authentication failed: {0}")]
    AuthFailure(String),
    #[error("rate limited after {attempts} attempts")]
    RateLimited { attempts: u32 },
    #[error("transport failure after {attempts} attempts: {message}")]
    Transport { attempts: u32, message: String },
    #[error("prompt needs about {estimated} tokens but `{provider}` accepts {limit}")]
    ContextOverflow { provider: String, estimated: u64, limit: u64 },
    #[error("malformed provider response: {0}")]
    MalformedProviderResponse(String),
    #[error("provider error: {0}")]
    Provider(String),
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error("configuration error: {0}")]
    Config(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Role {
    Translator,
    Annotator,
    Proofreader,
}

impl Role {
    pub const ALL: [Role; 3] = [Role::Translator, Role::Annotator, Role::Proofreader];

    pub fn as_str(self) -> &'static str {
        match self {
            Role::Translator => "translator",
            Role::Annotator => "annotator",
            Role::Proofreader => "proofreader",
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            Role::Translator => "Translator",
            Role::Annotator => "Annotator",
            Role::Proofreader => "Proofreader",
        }
    }
}

impl fmt::Display for Role {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Role {
    type Err = GatewayError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Role::ALL
            .into_iter()
            .find(|r| r.as_str().eq_ignore_ascii_case(s.trim()))
            .ok_or_else(|| GatewayError::InvalidInput(format!("unknown role `{s}`")))
    }
}

/// Token usage of one completion.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct UsageRecord {
    pub phase: Role,
    pub input_tokens: u64,
    pub output_tokens: u64,
    pub provider: String,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Completion {
    pub text: String,
    pub usage: UsageRecord,
    pub attempts: u32,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProviderSpec {
    pub name: String,
    /// `builtin` for the mock provider, otherwise a chat-completions URL.
    pub endpoint: String,
    /// Name of the environment variable holding the API key.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub auth: Option<String>,
    /// Model id sent upstream; defaults to `name`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub model: Option<String>,
    pub max_context_tokens: u64,
    #[serde(default)]
    pub price_per_1k_input: f64,
    #[serde(default)]
    pub price_per_1k_output: f64,
    /// Fixture file for builtin providers.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fixture: Option<PathBuf>,
    #[serde(default = "default_in_flight")]
    pub max_in_flight: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub requests_per_second: Option<f64>,
}

fn default_in_flight() -> usize {
    DEFAULT_MAX_IN_FLIGHT
}

impl ProviderSpec {
    pub fn builtin(name: impl Into<String>) -> Self {
        Self {
            name: name.into(),
            endpoint: BUILTIN_ENDPOINT.into(),
            auth: None,
            model: None,
            max_context_tokens: 128_000,
            price_per_1k_input: 0.0,
            price_per_1k_output: 0.0,
            fixture: None,
            max_in_flight: DEFAULT_MAX_IN_FLIGHT,
            requests_per_second: None,
        }
    }

    pub fn remote(name: impl Into<String>, endpoint: impl Into<String>, max_context_tokens: u64) -> Self {
        Self { endpoint: endpoint.into(), max_context_tokens, ..Self::builtin(name) }
    }

    /// A builtin provider with the given prices, handy for cost tests.
    pub fn priced(name: impl Into<String>, input: f64, output: f64) -> Self {
        Self { price_per_1k_input: input, price_per_1k_output: output, ..Self::builtin(name) }
    }

    pub fn is_builtin(&self) -> bool {
        self.endpoint == BUILTIN_ENDPOINT
    }

    pub fn model_id(&self) -> &str {
        self.model.as_deref().unwrap_or(&self.name)
    }

    fn validate(&self) -> Result<(), GatewayError> {
        if self.name.trim().is_empty() {
            return Err(GatewayError::Config("provider with empty name".into()));
        }
        if !(self.price_per_1k_input >= 0.0 && self.price_per_1k_output >= 0.0) {
            return Err(GatewayError::Config(format!("provider `{}` has a negative price", self.name)));
        }
        if self.max_context_tokens == 0 {
            return Err(GatewayError::Config(format!("provider `{}` has max_context_tokens = 0", self.name)));
        }
        Ok(())
    }
}

/// Public view of a provider, without credential references.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ProviderSummary {
    pub name: String,
    pub builtin: bool,
    pub max_context_tokens: u64,
    pub price_per_1k_input: f64,
    pub price_per_1k_output: f64,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct ProviderRegistry {
    providers: Vec<ProviderSpec>,
}

const OPENAI_ENDPOINT: &str = "https://api.openai.com/v1/chat/completions";
const LOCAL_ENDPOINT: &str = "http://127.0.0.1:8000/v1/chat/completions";

impl ProviderRegistry {
    pub fn new(providers: Vec<ProviderSpec>) -> Result<Self, GatewayError> {
        let mut seen = std::collections::HashSet::new();
        for p in &providers {
            p.validate()?;
            if !seen.insert(p.name.as_str()) {
                return Err(GatewayError::Config(format!("duplicate provider `{}`", p.name)));
            }
        }
        Ok(Self { providers })
    }

    /// The mock provider plus the models used in the original experiments,
    /// with their context lengths. Prices start at zero and are meant to be
    /// supplied by the deployment.
    pub fn seeded() -> Self {
        let mut providers = vec![ProviderSpec::builtin(MOCK_PROVIDER)];
        let hosted = [("gpt-4o", 8192), ("gpt-4-turbo", 8192), ("gpt-3.5-turbo", 4096)];
        for (name, ctx) in hosted {
            let mut spec = ProviderSpec::remote(name, OPENAI_ENDPOINT, ctx);
            spec.auth = Some("OPENAI_API_KEY".into());
            providers.push(spec);
        }
        let open_weights = [
            ("qwen-7b-chat", 8192),
            ("qwen-14b-chat", 8192),
            ("deepseek-v3", 32_768),
            ("deepseek-r1", 8192),
            ("chatglm-6b", 2048),
            ("chatglm2-6b", 8192),
            ("chatglm3-6b", 8192),
            ("baichuan-7b-base", 4096),
            ("baichuan-13b-base", 4096),
            ("baichuan-13b-chat", 4096),
            ("chatlaw-13b", 2048),
            ("chatlaw-33b", 2048),
        ];
        for (name, ctx) in open_weights {
            providers.push(ProviderSpec::remote(name, LOCAL_ENDPOINT, ctx));
        }
        Self { providers }
    }

    pub fn from_toml_str(s: &str) -> Result<Self, GatewayError> {
        let parsed: ProviderRegistry = toml::from_str(s).map_err(|e| GatewayError::Config(e.to_string()))?;
        Self::new(parsed.providers)
    }

    pub fn from_json_str(s: &str) -> Result<Self, GatewayError> {
        let parsed: ProviderRegistry = serde_json::from_str(s).map_err(|e| GatewayError::Config(e.to_string()))?;
        Self::new(parsed.providers)
    }

    /// Loads a `.toml` or `.json` registry file. Relative fixture paths are
    /// resolved against the file's directory.
    pub fn load(path: &Path) -> Result<Self, GatewayError> {
        let content = std::fs::read_to_string(path)
            .map_err(|e| GatewayError::Config(format!("cannot read {}: {e}", path.display())))?;
        let mut reg = match path.extension().and_then(|e| e.to_str()) {
            Some(ext) if ext.eq_ignore_ascii_case("json") => Self::from_json_str(&content)?,
            _ => Self::from_toml_str(&content)?,
        };
        if let Some(dir) = path.parent() {
            for p in &mut reg.providers {
                if let Some(f) = p.fixture.as_mut().filter(|f| f.is_relative()) {
                    *f = dir.join(&*f);
                }
            }
        }
        Ok(reg)
    }

    pub fn get(&self, name: &str) -> Option<&ProviderSpec> {
        self.providers.iter().find(|p| p.name == name)
    }

    pub fn contains(&self, name: &str) -> bool {
        self.get(name).is_some()
    }

    pub fn providers(&self) -> &[ProviderSpec] {
        &self.providers
    }

    pub fn summaries(&self) -> Vec<ProviderSummary> {
        self.providers
            .iter()
            .map(|p| ProviderSummary {
                name: p.name.clone(),
                builtin: p.is_builtin(),
                max_context_tokens: p.max_context_tokens,
                price_per_1k_input: p.price_per_1k_input,
                price_per_1k_output: p.price_per_1k_output,
            })
            .collect()
    }
}

/// Per-session API keys by provider name. Never serialized; `Debug` hides
/// the values.
#[derive(Clone, Default)]
pub struct Credentials {
    keys: HashMap<String, String>,
}

impl fmt::Debug for Credentials {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Credentials").field("providers", &self.keys.keys().collect::<Vec<_>>()).finish()
    }
}

impl Credentials {
    pub fn insert(&mut self, provider: impl Into<String>, secret: impl Into<String>) {
        self.keys.insert(provider.into(), secret.into());
    }

    pub fn get(&self, provider: &str) -> Option<&str> {
        self.keys.get(provider).map(String::as_str)
    }

    /// Parses a `name=secret` header value.
    pub fn insert_header(&mut self, value: &str) -> Result<(), GatewayError> {
        let (name, secret) = value
            .split_once('=')
            .filter(|(n, s)| !n.trim().is_empty() && !s.trim().is_empty())
            .ok_or_else(|| GatewayError::InvalidInput("expected `<provider>=<secret>`".into()))?;
        self.insert(name.trim(), secret.trim());
        Ok(())
    }

    /// Adds `other`'s keys, overriding existing ones.
    pub fn merge(&mut self, other: Credentials) {
        self.keys.extend(other.keys);
    }

    pub fn is_empty(&self) -> bool {
        self.keys.is_empty()
    }
}

/// A provider handle. Implementations must be safe for concurrent calls.
pub trait LlmProvider: Send + Sync {
    fn complete(&self, prompt: &Prompt, credentials: &Credentials) -> Result<Completion, GatewayError>;
}

/// Routes prompts to providers by name after a context-size check.
pub struct Gateway {
    registry: ProviderRegistry,
    providers: BTreeMap<String, Arc<dyn LlmProvider>>,
    tokenizer: Arc<dyn Tokenizer>,
}

impl fmt::Debug for Gateway {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Gateway").field("providers", &self.providers.keys().collect::<Vec<_>>()).finish()
    }
}

impl Gateway {
    /// Builds provider handles for every registry entry: builtin entries
    /// become mock providers, URL entries remote HTTP providers.
    pub fn new(registry: ProviderRegistry) -> Result<Self, GatewayError> {
        let transport: Arc<dyn Transport> = Arc::new(HttpTransport::new(Duration::from_secs(120))?);
        let mut providers: BTreeMap<String, Arc<dyn LlmProvider>> = BTreeMap::new();
        for spec in registry.providers() {
            let handle: Arc<dyn LlmProvider> = if spec.is_builtin() {
                let fixture = match &spec.fixture {
                    Some(path) => mock::load_fixture(path)?,
                    None => MockFixture::new(),
                };
                Arc::new(MockProvider::new(spec.name.clone(), fixture))
            } else {
                Arc::new(RemoteProvider::new(spec.clone(), transport.clone()))
            };
            providers.insert(spec.name.clone(), handle);
        }
        Ok(Self { registry, providers, tokenizer: Arc::new(HeuristicTokenizer) })
    }

    /// Replaces the handle for a registered provider.
    pub fn with_provider(mut self, name: &str, provider: Arc<dyn LlmProvider>) -> Result<Self, GatewayError> {
        if !self.registry.contains(name) {
            return Err(GatewayError::UnknownProvider(name.to_string()));
        }
        self.providers.insert(name.to_string(), provider);
        Ok(self)
    }

    pub fn with_tokenizer(mut self, tokenizer: Arc<dyn Tokenizer>) -> Self {
        self.tokenizer = tokenizer;
        self
    }

    pub fn registry(&self) -> &ProviderRegistry {
        &self.registry
    }

    pub fn estimate(&self, text: &str) -> u64 {
        self.tokenizer.count(text)
    }

    pub fn complete(&self, provider: &str, prompt: &Prompt, credentials: &Credentials) -> Result<Completion, GatewayError> {
        let spec = self.registry.get(provider).ok_or_else(|| GatewayError::UnknownProvider(provider.to_string()))?;
        let estimated = self.tokenizer.count(&prompt.full_text());
        if estimated > spec.max_context_tokens {
            return Err(GatewayError::ContextOverflow {
                provider: provider.to_string(),
                estimated,
                limit: spec.max_context_tokens,
            });
        }
        let handle = self.providers.get(provider).ok_or_else(|| GatewayError::UnknownProvider(provider.to_string()))?;
        handle.complete(prompt, credentials)
    }
}
