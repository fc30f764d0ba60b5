use std::collections::BTreeMap;
use std::fmt;

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};

use crate::annotate::Annotation;
use crate::document::{AlignedDocument, Direction};
use crate::gateway::{Role, UsageRecord};
use crate::memory::{PnsConfig, DEFAULT_PM_TOP_K};

use super::PipelineError;

pub const DEFAULT_ROUNDS: u32 = 1;
pub const DEFAULT_MAX_ROUNDS: u32 = 5;
pub const DEFAULT_FEW_SHOT_K: usize = 2;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GuardBounds {
    pub low: f64,
    pub high: f64,
}

impl Default for GuardBounds {
    fn default() -> Self {
        Self { low: 0.5, high: 2.0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct JobConfig {
    pub role_bindings: BTreeMap<Role, String>,
    pub direction: Direction,
    pub glossary_ref: Option<String>,
    pub pns: PnsConfig,
    pub pm_top_k: usize,
    pub rounds: u32,
    pub human_annotation: bool,
    pub few_shot: bool,
    pub few_shot_k: usize,
    pub divergence_bounds: GuardBounds,
}

impl Default for JobConfig {
    fn default() -> Self {
        Self {
            role_bindings: BTreeMap::new(),
            direction: Direction::default(),
            glossary_ref: None,
            pns: PnsConfig::default(),
            pm_top_k: DEFAULT_PM_TOP_K,
            rounds: DEFAULT_ROUNDS,
            human_annotation: false,
            few_shot: false,
            few_shot_k: DEFAULT_FEW_SHOT_K,
            divergence_bounds: GuardBounds::default(),
        }
    }
}

impl JobConfig {
    /// Binds every role to the same provider.
    pub fn uniform(provider: &str) -> Self {
        Self { role_bindings: Role::ALL.iter().map(|r| (*r, provider.to_string())).collect(), ..Self::default() }
    }

    pub fn provider_for(&self, role: Role) -> Option<&str> {
        self.role_bindings.get(&role).map(String::as_str)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum JobState {
    Pending,
    Translating,
    Annotating,
    AwaitingHumanAnnotation,
    Proofreading,
    Complete,
    Failed,
}

impl JobState {
    pub fn is_terminal(self) -> bool {
        matches!(self, JobState::Complete | JobState::Failed)
    }

    /// Whether `self -> next` is an edge of the job state graph.
    pub fn can_transition(self, next: JobState) -> bool {
        use JobState::*;
        match (self, next) {
            (Complete | Failed, _) => false,
            (_, Failed) => true,
            (Pending, Translating)
            | (Translating, Annotating)
            | (Annotating, AwaitingHumanAnnotation | Proofreading)
            | (AwaitingHumanAnnotation, Proofreading)
            | (Proofreading, Annotating | Complete) => true,
            _ => false,
        }
    }
}

impl fmt::Display for JobState {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Debug::fmt(self, f)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum JobWarning {
    Divergence { paragraph_index: usize, round: u32, draft_len: usize, revised_len: usize, ratio: f64 },
    AnnotationParse { paragraph_index: usize, round: u32, message: String },
    Glossary { paragraph_index: usize, source_term: String, expected: Vec<String> },
}

/// Warns when the revision length drifts outside `bounds` relative to the
/// original draft, measured in characters.
pub fn divergence_guard(
    original_draft: &str,
    revised: &str,
    bounds: GuardBounds,
    paragraph_index: usize,
    round: u32,
) -> Option<JobWarning> {
    let draft_len = original_draft.chars().count();
    if draft_len == 0 {
        return None;
    }
    let revised_len = revised.chars().count();
    let ratio = revised_len as f64 / draft_len as f64;
    (ratio < bounds.low || ratio > bounds.high).then_some(JobWarning::Divergence {
        paragraph_index,
        round,
        draft_len,
        revised_len,
        ratio,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RoundRecord {
    pub round: u32,
    pub annotations: Vec<Annotation>,
    pub revision: Option<String>,
    pub warnings: Vec<JobWarning>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParagraphRecord {
    pub index: usize,
    pub source: String,
    pub draft: Option<String>,
    pub rounds: Vec<RoundRecord>,
    #[serde(rename = "final")]
    pub final_text: Option<String>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub warnings: Vec<JobWarning>,
}

impl ParagraphRecord {
    /// Latest revision, or the draft when no round revised the paragraph.
    pub fn current_text(&self) -> Option<&str> {
        self.rounds.iter().rev().find_map(|r| r.revision.as_deref()).or(self.draft.as_deref())
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct Job {
    pub job_id: String,
    pub config: JobConfig,
    pub doc: AlignedDocument,
    pub state: JobState,
    pub history: Vec<JobState>,
    pub current_round: u32,
    pub paragraphs: Vec<ParagraphRecord>,
    pub usage: Vec<UsageRecord>,
    pub failure: Option<String>,
    pub created_at: DateTime<Utc>,
    /// PM length when the current round started; retrieval in the round
    /// only sees records below it.
    #[serde(skip)]
    pub(crate) pm_floor: usize,
}

impl Job {
    pub(crate) fn new(job_id: String, config: JobConfig, doc: AlignedDocument, created_at: DateTime<Utc>) -> Self {
        let paragraphs = doc
            .pairs()
            .iter()
            .map(|p| ParagraphRecord {
                index: p.index,
                source: p.source_text.clone(),
                draft: None,
                rounds: Vec::new(),
                final_text: None,
                warnings: Vec::new(),
            })
            .collect();
        Self {
            job_id,
            config,
            doc,
            state: JobState::Pending,
            history: vec![JobState::Pending],
            current_round: 0,
            paragraphs,
            usage: Vec::new(),
            failure: None,
            created_at,
            pm_floor: 0,
        }
    }

    pub(crate) fn transition(&mut self, next: JobState) -> Result<(), PipelineError> {
        if !self.state.can_transition(next) {
            return Err(PipelineError::IllegalTransition { from: self.state, to: next });
        }
        self.state = next;
        self.history.push(next);
        Ok(())
    }

    pub(crate) fn fail(&mut self, cause: impl Into<String>) {
        if !self.state.is_terminal() {
            self.state = JobState::Failed;
            self.history.push(JobState::Failed);
        }
        self.failure = Some(cause.into());
    }

    pub(crate) fn expect_state(&self, expected: JobState, action: &'static str) -> Result<(), PipelineError> {
        if self.state != expected {
            return Err(PipelineError::WrongState { action, actual: self.state });
        }
        Ok(())
    }

    /// All warnings in paragraph order, round warnings first.
    pub fn warnings(&self) -> Vec<&JobWarning> {
        self.paragraphs
            .iter()
            .flat_map(|p| p.rounds.iter().flat_map(|r| r.warnings.iter()).chain(p.warnings.iter()))
            .collect()
    }

    /// Final texts in paragraph order, present once the job is complete.
    pub fn final_texts(&self) -> Option<Vec<&str>> {
        self.paragraphs.iter().map(|p| p.final_text.as_deref()).collect()
    }

    pub fn paragraph_count(&self) -> usize {
        self.paragraphs.len()
    }
}
