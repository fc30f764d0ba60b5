//! Core of the TransLaw legal translation service: a Translator, an
//! Annotator and a Proofreader run over paragraph-aligned documents with
//! translation and proofreading memories, a proofread-code taxonomy and
//! glossary checks.

pub mod annotate;
pub mod clock;
pub mod corpus;
pub mod document;
pub mod error;
pub mod eval;
pub mod gateway;
pub mod glossary;
pub mod memory;
pub mod pipeline;
pub mod taxonomy;
pub mod text;

pub use annotate::{parse_records, serialize_annotations, AnnotateError, Annotation, ErrTriplet};
pub use document::{segment_paragraphs, AlignedDocument, Direction, LanguageTag, ParagraphPair};
pub use error::CoreError;
pub use gateway::{Credentials, Gateway, GatewayError, ProviderRegistry, Role};
pub use glossary::Glossary;
pub use memory::Memory;
pub use pipeline::{Job, JobConfig, JobState, Pipeline, PipelineError};
pub use taxonomy::{Category, ProofreadCode, Taxonomy};

/// Dimension scores in double precision.
pub type Scores = eval::DimensionScores<f64>;
/// Score weights in double precision.
pub type Weights = eval::WeightVector<f64>;
/// Aggregated scores in double precision.
pub type Aggregate = eval::AggregateReport<f64>;
