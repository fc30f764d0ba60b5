//! Error annotations exchanged between annotators and the proofreader.
//!
//! Two textual forms are supported:
//!
//! * the machine record format, one annotation per line:
//!   `ERR: "<span>"@<occurrence> | <CODE> | <suggestion> | <rationale>`
//! * inline tags in marked-up text, `⟦span⟧[CODE]`, plus bare `[CODE]` tags
//!   in lenient mode.
//!
//! Spans are anchored by their verbatim text and a 1-based occurrence index
//! (occurrences may overlap), never by character offsets.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::taxonomy::{ProofreadCode, Taxonomy};

pub const RECORD_PREFIX: &str = "ERR:";
const OPEN: char = '⟦';
const CLOSE: char = '⟧';
const SENTENCE_FINAL: &[char] = &['。', '．', '.', '!', '?', '！', '？'];
const MAX_TAG_LEN: usize = 24;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum AnnotateError {
    #[error("{}span \"{span}\" (occurrence {occurrence}) not found in translation", line_prefix(*.line))]
    SpanNotFound { line: Option<usize>, span: String, occurrence: usize },
    #[error("{}unknown proofread code `{code}`", line_prefix(*.line))]
    UnknownCode { line: Option<usize>, code: String },
    #[error("line {line}: malformed record: {reason}")]
    MalformedRecord { line: usize, reason: String },
    #[error("unbalanced span delimiter at character {offset}")]
    UnbalancedDelimiter { offset: usize },
    #[error("annotation list is empty; a clean translation produces no triplet")]
    NoErrors,
    #[error("invalid annotation: {0}")]
    Invalid(String),
}

fn line_prefix(line: Option<usize>) -> String {
    line.map(|l| format!("line {l}: ")).unwrap_or_default()
}

impl AnnotateError {
    pub fn line(&self) -> Option<usize> {
        match self {
            AnnotateError::SpanNotFound { line, .. } | AnnotateError::UnknownCode { line, .. } => *line,
            AnnotateError::MalformedRecord { line, .. } => Some(*line),
            _ => None,
        }
    }
}

/// One marked error in a translation.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(into = "AnnotationRecord", try_from = "AnnotationRecord")]
pub struct Annotation {
    pub span_text: String,
    pub occurrence: usize,
    pub code: ProofreadCode,
    pub suggestion: Option<String>,
    pub rationale: Option<String>,
}

impl Annotation {
    /// Builds an annotation. Suggestion and rationale are trimmed and empty
    /// values become `None`; the span is kept verbatim.
    pub fn new(
        span_text: impl Into<String>,
        occurrence: usize,
        code: ProofreadCode,
        suggestion: Option<String>,
        rationale: Option<String>,
    ) -> Result<Self, AnnotateError> {
        let span_text = span_text.into();
        if span_text.is_empty() {
            return Err(AnnotateError::Invalid("span_text is empty".into()));
        }
        if occurrence == 0 {
            return Err(AnnotateError::Invalid("occurrence must be at least 1".into()));
        }
        Ok(Self {
            span_text,
            occurrence,
            code,
            suggestion: normalize_note(suggestion),
            rationale: normalize_note(rationale),
        })
    }

    /// Byte offset of this span within `translation`, if present.
    pub fn locate(&self, translation: &str) -> Option<usize> {
        nth_occurrence(translation, &self.span_text, self.occurrence)
    }

    pub fn to_record_line(&self) -> String {
        format!(
            "{RECORD_PREFIX} \"{}\"@{} | {} | {} | {}",
            escape_span(&self.span_text),
            self.occurrence,
            self.code.code,
            escape_field(self.suggestion.as_deref().unwrap_or("")),
            escape_field(self.rationale.as_deref().unwrap_or("")),
        )
    }
}

fn normalize_note(note: Option<String>) -> Option<String> {
    note.map(|s| s.trim().to_string()).filter(|s| !s.is_empty())
}

/// JSON wire shape of an [`Annotation`].
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AnnotationRecord {
    pub span: String,
    #[serde(default = "one")]
    pub occurrence: usize,
    pub code: String,
    #[serde(default)]
    pub suggestion: Option<String>,
    #[serde(default)]
    pub rationale: Option<String>,
}

fn one() -> usize {
    1
}

impl From<Annotation> for AnnotationRecord {
    fn from(a: Annotation) -> Self {
        Self {
            span: a.span_text,
            occurrence: a.occurrence,
            code: a.code.code,
            suggestion: a.suggestion,
            rationale: a.rationale,
        }
    }
}

impl AnnotationRecord {
    pub fn into_annotation(self, taxonomy: &Taxonomy) -> Result<Annotation, AnnotateError> {
        let code = taxonomy
            .validate_code(&self.code)
            .map_err(|_| AnnotateError::UnknownCode { line: None, code: self.code.clone() })?
            .clone();
        Annotation::new(self.span, self.occurrence, code, self.suggestion, self.rationale)
    }
}

impl TryFrom<AnnotationRecord> for Annotation {
    type Error = AnnotateError;

    fn try_from(record: AnnotationRecord) -> Result<Self, Self::Error> {
        record.into_annotation(Taxonomy::builtin())
    }
}

/// A source paragraph, a candidate translation and the errors marked in it.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ErrTriplet {
    pub src: String,
    #[serde(rename = "ref")]
    pub reference: String,
    pub err: Vec<Annotation>,
}

/// Byte offset of the `n`-th (1-based, overlapping) occurrence of `needle`.
pub fn nth_occurrence(haystack: &str, needle: &str, n: usize) -> Option<usize> {
    if needle.is_empty() || n == 0 {
        return None;
    }
    let mut seen = 0;
    let mut from = 0;
    while let Some(pos) = haystack[from..].find(needle) {
        let abs = from + pos;
        seen += 1;
        if seen == n {
            return Some(abs);
        }
        from = abs + haystack[abs..].chars().next().map_or(1, char::len_utf8);
    }
    None
}

/// Occurrence index of the match of `needle` that starts at byte `start`.
pub fn occurrence_at(haystack: &str, needle: &str, start: usize) -> usize {
    let mut count = 0;
    let mut from = 0;
    while let Some(pos) = haystack[from..].find(needle) {
        let abs = from + pos;
        if abs > start {
            break;
        }
        count += 1;
        from = abs + haystack[abs..].chars().next().map_or(1, char::len_utf8);
    }
    count
}

/// Parses annotator output in the `ERR:` record format.
///
/// Lines that do not start with `ERR:` are ignored. Every parsed span must
/// occur in `translation` at least `occurrence` times.
pub fn parse_records(
    annotator_output: &str,
    translation: &str,
    taxonomy: &Taxonomy,
) -> Result<Vec<Annotation>, AnnotateError> {
    let mut out = Vec::new();
    for (i, raw_line) in annotator_output.lines().enumerate() {
        let line_no = i + 1;
        let Some(body) = raw_line.trim_start().strip_prefix(RECORD_PREFIX) else {
            continue;
        };
        let fields = split_record(body).map_err(|reason| AnnotateError::MalformedRecord { line: line_no, reason })?;
        let code = taxonomy
            .validate_code(&fields.code)
            .map_err(|_| AnnotateError::UnknownCode { line: Some(line_no), code: fields.code.clone() })?
            .clone();
        let annotation = Annotation::new(fields.span, fields.occurrence, code, fields.suggestion, fields.rationale)
            .map_err(|e| AnnotateError::MalformedRecord { line: line_no, reason: e.to_string() })?;
        if annotation.locate(translation).is_none() {
            return Err(AnnotateError::SpanNotFound {
                line: Some(line_no),
                span: annotation.span_text,
                occurrence: annotation.occurrence,
            });
        }
        out.push(annotation);
    }
    Ok(out)
}

/// Canonical record lines for `annotations`, one per line, in input order.
pub fn serialize_annotations(annotations: &[Annotation]) -> String {
    annotations.iter().map(Annotation::to_record_line).collect::<Vec<_>>().join("\n")
}

pub fn to_triplet(src: &str, translation: &str, annotations: Vec<Annotation>) -> Result<ErrTriplet, AnnotateError> {
    if annotations.is_empty() {
        return Err(AnnotateError::NoErrors);
    }
    if let Some(missing) = annotations.iter().find(|a| a.locate(translation).is_none()) {
        return Err(AnnotateError::SpanNotFound {
            line: None,
            span: missing.span_text.clone(),
            occurrence: missing.occurrence,
        });
    }
    Ok(ErrTriplet { src: src.to_string(), reference: translation.to_string(), err: annotations })
}

struct RecordFields {
    span: String,
    occurrence: usize,
    code: String,
    suggestion: Option<String>,
    rationale: Option<String>,
}

fn split_record(body: &str) -> Result<RecordFields, String> {
    let rest = body.trim_start();
    let mut chars = rest.char_indices();
    if !matches!(chars.next(), Some((_, '"'))) {
        return Err("span must be enclosed in double quotes".into());
    }
    let mut span = String::new();
    let mut close = None;
    while let Some((i, c)) = chars.next() {
        match c {
            '\\' => match chars.next() {
                Some((_, e)) => push_unescaped(&mut span, e),
                None => return Err("dangling escape in span".into()),
            },
            '"' => {
                close = Some(i + 1);
                break;
            }
            _ => span.push(c),
        }
    }
    let close = close.ok_or_else(|| "unbalanced quotes around span".to_string())?;
    let mut rest = &rest[close..];

    let mut occurrence = 1;
    if let Some(after_at) = rest.strip_prefix('@') {
        let digits: String = after_at.chars().take_while(char::is_ascii_digit).collect();
        occurrence = digits.parse().map_err(|_| "expected occurrence number after `@`".to_string())?;
        if occurrence == 0 {
            return Err("occurrence must be at least 1".into());
        }
        rest = &after_at[digits.len()..];
    }

    let rest = rest.trim_start();
    let Some(rest) = rest.strip_prefix('|') else {
        return Err(if rest.is_empty() { "missing code field".into() } else { "expected `|` after span".into() });
    };
    let fields = split_escaped(rest);
    if fields.len() > 3 {
        return Err(format!("expected at most 4 fields, found {}", fields.len() + 1));
    }
    let mut fields = fields.into_iter();
    let code = fields.next().unwrap_or_default();
    if code.is_empty() {
        return Err("missing code field".into());
    }
    Ok(RecordFields { span, occurrence, code, suggestion: fields.next(), rationale: fields.next() })
}

/// Splits on unescaped `|`, trims each raw field and then unescapes it.
fn split_escaped(s: &str) -> Vec<String> {
    let mut raw_fields = Vec::new();
    let mut current = String::new();
    let mut chars = s.chars();
    while let Some(c) = chars.next() {
        match c {
            '\\' => {
                current.push('\\');
                if let Some(e) = chars.next() {
                    current.push(e);
                }
            }
            '|' => raw_fields.push(std::mem::take(&mut current)),
            _ => current.push(c),
        }
    }
    raw_fields.push(current);
    raw_fields.iter().map(|f| unescape(f.trim())).collect()
}

fn unescape(s: &str) -> String {
    let mut out = String::with_capacity(s.len());
    let mut chars = s.chars();
    while let Some(c) = chars.next() {
        if c == '\\' {
            match chars.next() {
                Some(e) => push_unescaped(&mut out, e),
                None => out.push('\\'),
            }
        } else {
            out.push(c);
        }
    }
    out
}

fn push_unescaped(out: &mut String, escaped: char) {
    match escaped {
        'n' => out.push('\n'),
        'r' => out.push('\r'),
        't' => out.push('\t'),
        '\\' | '"' | '|' => out.push(escaped),
        other => {
            out.push('\\');
            out.push(other);
        }
    }
}

fn escape_common(c: char, out: &mut String) -> bool {
    match c {
        '\\' => out.push_str("\\\\"),
        '\n' => out.push_str("\\n"),
        '\r' => out.push_str("\\r"),
        '\t' => out.push_str("\\t"),
        _ => return false,
    }
    true
}

fn escape_span(s: &str) -> String {
    let mut out = String::with_capacity(s.len());
    for c in s.chars() {
        if !escape_common(c, &mut out) {
            if c == '"' {
                out.push_str("\\\"");
            } else {
                out.push(c);
            }
        }
    }
    out
}

fn escape_field(s: &str) -> String {
    let mut out = String::with_capacity(s.len());
    for c in s.chars() {
        if !escape_common(c, &mut out) {
            if c == '|' {
                out.push_str("\\|");
            } else {
                out.push(c);
            }
        }
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum TagMode {
    /// Only `⟦span⟧[CODE]` is recognized; stray delimiters are errors.
    #[default]
    Strict,
    /// Bare `[CODE]` tags also attach to the text run before them.
    Lenient,
}

/// Text with inline markup removed, plus the annotations it carried.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct InlineExtraction {
    pub clean_text: String,
    pub annotations: Vec<Annotation>,
}

/// Extracts inline error tags from marked-up text.
///
/// Tag contents may name several codes separated by `/` (`[CW/NC]`); each
/// becomes its own annotation over the same span. Bracketed tokens that are
/// not all valid codes stay in the clean text untouched.
pub fn extract_inline_tags(
    marked_text: &str,
    mode: TagMode,
    taxonomy: &Taxonomy,
) -> Result<InlineExtraction, AnnotateError> {
    let chars: Vec<char> = marked_text.chars().collect();
    let mut clean = String::with_capacity(marked_text.len());
    // (byte start, byte end, codes) over `clean`
    let mut tagged: Vec<(usize, usize, Vec<ProofreadCode>)> = Vec::new();
    let mut open_at: Option<(usize, usize)> = None;
    let mut last_tag_end = 0usize;
    let mut i = 0;

    while i < chars.len() {
        let c = chars[i];
        match c {
            OPEN => {
                if open_at.is_some() {
                    if mode == TagMode::Strict {
                        return Err(AnnotateError::UnbalancedDelimiter { offset: i });
                    }
                } else {
                    open_at = Some((clean.len(), i));
                }
                i += 1;
            }
            CLOSE => {
                let Some((start, _)) = open_at.take() else {
                    if mode == TagMode::Strict {
                        return Err(AnnotateError::UnbalancedDelimiter { offset: i });
                    }
                    i += 1;
                    continue;
                };
                i += 1;
                if let Some((codes, consumed)) = read_tag(&chars[i..], taxonomy) {
                    i += consumed;
                    if start < clean.len() {
                        tagged.push((start, clean.len(), codes));
                    }
                    last_tag_end = clean.len();
                }
            }
            '[' if mode == TagMode::Lenient => match read_tag(&chars[i..], taxonomy) {
                Some((codes, consumed)) => {
                    if let Some((start, end)) = lenient_run(&clean, last_tag_end) {
                        tagged.push((start, end, codes));
                    } else if let Some(prev) = tagged.last_mut().filter(|t| t.1 == trim_end_len(&clean)) {
                        prev.2.extend(codes);
                    } else {
                        // nothing to attach to; keep the tag as text
                        clean.extend(&chars[i..i + consumed]);
                    }
                    i += consumed;
                    last_tag_end = clean.len();
                }
                None => {
                    clean.push(c);
                    i += 1;
                }
            },
            _ => {
                clean.push(c);
                i += 1;
            }
        }
    }
    if let Some((_, offset)) = open_at {
        if mode == TagMode::Strict {
            return Err(AnnotateError::UnbalancedDelimiter { offset });
        }
    }

    let mut annotations = Vec::new();
    for (start, end, codes) in tagged {
        let span = &clean[start..end];
        let occurrence = occurrence_at(&clean, span, start);
        for code in codes {
            annotations.push(Annotation::new(span, occurrence, code, None, None)?);
        }
    }
    Ok(InlineExtraction { clean_text: clean, annotations })
}

/// Parses `[A/B]` at the start of `chars` when every part is a known code.
fn read_tag(chars: &[char], taxonomy: &Taxonomy) -> Option<(Vec<ProofreadCode>, usize)> {
    if chars.first() != Some(&'[') {
        return None;
    }
    let close = chars.iter().take(MAX_TAG_LEN).position(|&c| c == ']')?;
    let inner: String = chars[1..close].iter().collect();
    if inner.trim().is_empty() {
        return None;
    }
    let codes = inner
        .split('/')
        .map(|part| taxonomy.validate_code(part.trim()).ok().cloned())
        .collect::<Option<Vec<_>>>()?;
    Some((codes, close + 1))
}

fn trim_end_len(s: &str) -> usize {
    s.trim_end().len()
}

/// The run a bare tag attaches to: from the later of the previous tag and
/// the last sentence-final mark before the run, up to the end of `clean`,
/// trimmed. A mark directly before the tag belongs to the run.
fn lenient_run(clean: &str, last_tag_end: usize) -> Option<(usize, usize)> {
    let end = trim_end_len(clean);
    if end <= last_tag_end {
        return None;
    }
    let body = &clean[last_tag_end..end];
    let last_char_start = body.char_indices().last().map_or(0, |(i, _)| i);
    let sentence_start = body[..last_char_start]
        .char_indices()
        .rfind(|(_, c)| SENTENCE_FINAL.contains(c))
        .map_or(0, |(i, c)| i + c.len_utf8());
    let run = &body[sentence_start..];
    let lead = run.len() - run.trim_start().len();
    let start = last_tag_end + sentence_start + lead;
    (start < end).then_some((start, end))
}
