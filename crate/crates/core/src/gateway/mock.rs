//! Offline provider answering from a fixture file.
//!
//! Fixtures map a fingerprint of (role, user text) to a scripted response.
//! Prompts without a fixture entry get a deterministic fallback:
//!
//! * Translator: the focal paragraph prefixed with `【譯】`
//! * Annotator: `NONE` (a clean translation)
//! * Proofreader: the draft with every annotated suggestion applied

use std::collections::BTreeMap;
use std::path::Path;
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::prompt::{section, Prompt, SECTION_ANNOTATIONS, SECTION_DRAFT, SECTION_FOCAL};
use super::tokens::{HeuristicTokenizer, Tokenizer};
use super::{Completion, Credentials, GatewayError, LlmProvider, Role, UsageRecord};
use crate::annotate::parse_records;
use crate::taxonomy::Taxonomy;

pub const MOCK_TRANSLATION_PREFIX: &str = "【譯】";

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MockResponse {
    pub text: String,
    pub input_tokens: u64,
    pub output_tokens: u64,
}

/// Fingerprint → scripted response.
pub type MockFixture = BTreeMap<String, MockResponse>;

/// Hex SHA-256 of `"<role>\n<user_text>"`, truncated to 16 characters.
pub fn fingerprint(role: Role, user_text: &str) -> String {
    let digest = Sha256::digest(format!("{}\n{}", role.as_str(), user_text).as_bytes());
    hex::encode(digest)[..16].to_string()
}

pub fn load_fixture(path: &Path) -> Result<MockFixture, GatewayError> {
    let content = std::fs::read_to_string(path)
        .map_err(|e| GatewayError::Config(format!("cannot read mock fixture {}: {e}", path.display())))?;
    serde_json::from_str(&content)
        .map_err(|e| GatewayError::Config(format!("invalid mock fixture {}: {e}", path.display())))
}

pub struct MockProvider {
    name: String,
    fixture: MockFixture,
    tokenizer: Arc<dyn Tokenizer>,
}

impl MockProvider {
    pub fn new(name: impl Into<String>, fixture: MockFixture) -> Self {
        Self { name: name.into(), fixture, tokenizer: Arc::new(HeuristicTokenizer) }
    }

    fn fallback(&self, prompt: &Prompt) -> String {
        match prompt.role {
            Role::Translator => {
                let focal = section(&prompt.user_text, SECTION_FOCAL).unwrap_or("");
                format!("{MOCK_TRANSLATION_PREFIX}{focal}")
            }
            Role::Annotator => "NONE".to_string(),
            Role::Proofreader => {
                let draft = section(&prompt.user_text, SECTION_DRAFT).unwrap_or("");
                let records = section(&prompt.user_text, SECTION_ANNOTATIONS).unwrap_or("");
                apply_suggestions(draft, records)
            }
        }
    }
}

/// Replaces each annotated span that carries a suggestion, right to left,
/// skipping spans that overlap an already replaced one.
fn apply_suggestions(draft: &str, records: &str) -> String {
    let Ok(annotations) = parse_records(records, draft, Taxonomy::builtin()) else {
        return draft.to_string();
    };
    let mut edits: Vec<(usize, usize, String)> = annotations
        .iter()
        .filter_map(|a| {
            let start = a.locate(draft)?;
            Some((start, start + a.span_text.len(), a.suggestion.clone()?))
        })
        .collect();
    edits.sort_by_key(|e| std::cmp::Reverse(e.0));
    let mut out = draft.to_string();
    let mut floor = usize::MAX;
    for (start, end, replacement) in edits {
        if end > floor {
            continue;
        }
        out.replace_range(start..end, &replacement);
        floor = start;
    }
    out
}

impl LlmProvider for MockProvider {
    fn complete(&self, prompt: &Prompt, _credentials: &Credentials) -> Result<Completion, GatewayError> {
        let key = fingerprint(prompt.role, &prompt.user_text);
        let (text, input_tokens, output_tokens) = match self.fixture.get(&key) {
            Some(r) => (r.text.clone(), r.input_tokens, r.output_tokens),
            None => {
                let text = self.fallback(prompt);
                let input = self.tokenizer.count(&prompt.full_text());
                let output = self.tokenizer.count(&text);
                (text, input, output)
            }
        };
        Ok(Completion {
            text,
            usage: UsageRecord { phase: prompt.role, input_tokens, output_tokens, provider: self.name.clone() },
            attempts: 1,
        })
    }
}
