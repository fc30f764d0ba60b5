use thiserror::Error;

/// Errors raised by the shared domain model and the taxonomy.
#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum CoreError {
    #[error("unknown proofread code `{0}`")]
    UnknownCode(String),
    #[error("unknown error category `{0}`")]
    UnknownCategory(String),
    #[error("invalid code mnemonic `{0}` (expected 2-4 letters)")]
    InvalidCodeMnemonic(String),
    #[error("duplicate code `{0}` in taxonomy")]
    DuplicateCode(String),
    #[error("taxonomy csv line {line}: {reason}")]
    TaxonomyCsv { line: u64, reason: String },
    #[error("document has no non-blank content")]
    EmptyDocument,
    #[error("unsupported language tag `{0}`")]
    UnsupportedLanguage(String),
    #[error("invalid document: {0}")]
    InvalidDocument(String),
}
