//! Paragraph-level documents and language tags.

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::CoreError;

/// Tags accepted by [`LanguageRegistry::default`].
pub const DEFAULT_LANGUAGES: &[&str] = &["en", "zh-Hant", "zh-Hans", "zh"];

/// A language identifier such as `en` or `zh-Hant`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct LanguageTag(String);

impl LanguageTag {
    pub fn as_str(&self) -> &str {
        &self.0
    }

    pub fn english() -> Self {
        Self("en".into())
    }

    pub fn traditional_chinese() -> Self {
        Self("zh-Hant".into())
    }
}

impl fmt::Display for LanguageTag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

/// The set of language tags a deployment accepts.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LanguageRegistry {
    tags: Vec<String>,
}

impl Default for LanguageRegistry {
    fn default() -> Self {
        Self::new(DEFAULT_LANGUAGES.iter().map(|s| s.to_string()))
    }
}

impl LanguageRegistry {
    pub fn new(tags: impl IntoIterator<Item = String>) -> Self {
        Self { tags: tags.into_iter().collect() }
    }

    /// Resolves `code` case-insensitively to its registered spelling.
    pub fn parse(&self, code: &str) -> Result<LanguageTag, CoreError> {
        let code = code.trim();
        self.tags
            .iter()
            .find(|t| t.eq_ignore_ascii_case(code))
            .map(|t| LanguageTag(t.clone()))
            .ok_or_else(|| CoreError::UnsupportedLanguage(code.to_string()))
    }
}

/// Translation direction; defaults to English into Traditional Chinese.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Direction {
    pub source: LanguageTag,
    pub target: LanguageTag,
}

impl Default for Direction {
    fn default() -> Self {
        Self { source: LanguageTag::english(), target: LanguageTag::traditional_chinese() }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ParagraphPair {
    pub index: usize,
    pub source_text: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub target_text: Option<String>,
    pub source_lang: LanguageTag,
    pub target_lang: LanguageTag,
}

/// An ordered list of paragraph pairs with indices `0..n`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AlignedDocument {
    doc_id: String,
    pairs: Vec<ParagraphPair>,
    #[serde(default)]
    metadata: BTreeMap<String, String>,
}

impl AlignedDocument {
    /// Builds a document, checking that indices are `0..n` in order and
    /// every source paragraph is non-empty.
    pub fn new(doc_id: impl Into<String>, pairs: Vec<ParagraphPair>) -> Result<Self, CoreError> {
        for (expected, pair) in pairs.iter().enumerate() {
            if pair.index != expected {
                return Err(CoreError::InvalidDocument(format!(
                    "paragraph at position {expected} has index {}",
                    pair.index
                )));
            }
            if pair.source_text.trim().is_empty() {
                return Err(CoreError::InvalidDocument(format!("paragraph {expected} has empty source text")));
            }
        }
        Ok(Self { doc_id: doc_id.into(), pairs, metadata: BTreeMap::new() })
    }

    pub fn with_doc_id(mut self, doc_id: impl Into<String>) -> Self {
        self.doc_id = doc_id.into();
        self
    }

    pub fn with_metadata(mut self, key: impl Into<String>, value: impl Into<String>) -> Self {
        self.metadata.insert(key.into(), value.into());
        self
    }

    pub fn doc_id(&self) -> &str {
        &self.doc_id
    }

    pub fn pairs(&self) -> &[ParagraphPair] {
        &self.pairs
    }

    pub fn metadata(&self) -> &BTreeMap<String, String> {
        &self.metadata
    }

    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }

    pub(crate) fn set_target(&mut self, index: usize, text: Option<String>) {
        if let Some(pair) = self.pairs.get_mut(index) {
            pair.target_text = text;
        }
    }
}

/// Splits `raw_text` into paragraphs at blank lines and wraps them in a document.
///
/// A line holding only whitespace counts as blank. Each paragraph is trimmed
/// and empty segments are dropped.
pub fn segment_paragraphs(raw_text: &str, direction: &Direction) -> Result<AlignedDocument, CoreError> {
    let paragraphs = split_paragraphs(raw_text);
    if paragraphs.is_empty() {
        return Err(CoreError::EmptyDocument);
    }
    let pairs = paragraphs
        .into_iter()
        .enumerate()
        .map(|(index, source_text)| ParagraphPair {
            index,
            source_text,
            target_text: None,
            source_lang: direction.source.clone(),
            target_lang: direction.target.clone(),
        })
        .collect();
    AlignedDocument::new("doc", pairs)
}

/// Blank-line paragraph splitter shared by documents and corpus ingestion.
pub fn split_paragraphs(raw_text: &str) -> Vec<String> {
    let mut out = Vec::new();
    let mut current: Vec<&str> = Vec::new();
    for line in raw_text.lines() {
        if line.trim().is_empty() {
            flush(&mut current, &mut out);
        } else {
            current.push(line);
        }
    }
    flush(&mut current, &mut out);
    out
}

fn flush(current: &mut Vec<&str>, out: &mut Vec<String>) {
    if current.is_empty() {
        return;
    }
    let joined = current.join("\n");
    let trimmed = joined.trim();
    if !trimmed.is_empty() {
        out.push(trimmed.to_string());
    }
    current.clear();
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn sources(doc: &AlignedDocument) -> Vec<(usize, &str)> {
        doc.pairs().iter().map(|p| (p.index, p.source_text.as_str())).collect()
    }

    #[test]
    fn splits_on_blank_lines() {
        let dir = Direction::default();
        assert_eq!(sources(&segment_paragraphs("A\n\nB", &dir).unwrap()), vec![(0, "A"), (1, "B")]);
        assert_eq!(sources(&segment_paragraphs("A", &dir).unwrap()), vec![(0, "A")]);
        assert_eq!(segment_paragraphs("\n\n", &dir), Err(CoreError::EmptyDocument));
    }

    #[test]
    fn whitespace_lines_and_crlf() {
        let dir = Direction::default();
        let doc = segment_paragraphs("  first line\r\nsecond line \r\n \t \r\n\r\n\r\nnext\r\n", &dir).unwrap();
        assert_eq!(sources(&doc), vec![(0, "first line\nsecond line"), (1, "next")]);
        assert_eq!(doc.pairs()[0].target_lang.as_str(), "zh-Hant");
    }

    #[test]
    fn document_rejects_gaps() {
        let dir = Direction::default();
        let mut pairs = segment_paragraphs("a\n\nb", &dir).unwrap().pairs().to_vec();
        pairs[1].index = 2;
        assert!(AlignedDocument::new("d", pairs).is_err());
    }

    #[test]
    fn registry_lookup() {
        let reg = LanguageRegistry::default();
        assert_eq!(reg.parse("zh-hant").unwrap().as_str(), "zh-Hant");
        assert_eq!(reg.parse("EN").unwrap(), LanguageTag::english());
        assert!(reg.parse("xx").is_err());
        assert!(reg.parse("").is_err());
    }

    proptest! {
        #[test]
        fn indices_are_contiguous(text in "[ab \n]{0,60}") {
            if let Ok(doc) = segment_paragraphs(&text, &Direction::default()) {
                for (i, p) in doc.pairs().iter().enumerate() {
                    prop_assert_eq!(p.index, i);
                    prop_assert!(!p.source_text.is_empty());
                    prop_assert_eq!(p.source_text.trim(), p.source_text.as_str());
                }
            } else {
                prop_assert!(text.trim().is_empty());
            }
        }
    }
}
