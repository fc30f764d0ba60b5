//! Job orchestration: Phase 1 drafts paragraphs in order with neighbour
//! context, Phase 2 annotates them, Phase 3 revises the annotated ones.
//! Phases 2 and 3 repeat for the configured number of rounds; a human can
//! stand in for the annotator.

mod export;
mod job;

use std::collections::BTreeMap;
use std::fmt;
use std::sync::{Arc, Mutex, MutexGuard};

use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;
use tracing::{debug, info, warn};

use crate::annotate::{parse_records, to_triplet, AnnotateError, Annotation, ErrTriplet, RECORD_PREFIX};
use crate::clock::{Clock, SystemClock};
use crate::document::{AlignedDocument, Direction, LanguageRegistry};
use crate::gateway::prompt::{AnnotatorInputs, ProofreaderInputs, RoleInputs, TranslatorInputs};
use crate::gateway::{render_prompt, Credentials, Gateway, GatewayError, Role, UsageRecord};
use crate::glossary::{check_consistency, Glossary};
use crate::memory::{
    pns_context, retrieve_similar, Memory, MemoryError, PmRecord, TmRecord, TmStage, DEFAULT_MAX_PNS_RADIUS,
};
use crate::taxonomy::Taxonomy;

pub use export::{export_json, export_txt, JobResult};
pub use job::{
    divergence_guard, GuardBounds, Job, JobConfig, JobState, JobWarning, ParagraphRecord, RoundRecord,
    DEFAULT_FEW_SHOT_K, DEFAULT_MAX_ROUNDS, DEFAULT_ROUNDS,
};

pub const DEFAULT_WORKERS: usize = 4;

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct FieldError {
    pub field: String,
    pub message: String,
}

impl FieldError {
    fn new(field: impl Into<String>, message: impl Into<String>) -> Self {
        Self { field: field.into(), message: message.into() }
    }
}

impl fmt::Display for FieldError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.field, self.message)
    }
}

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error("invalid job config: {}", join_fields(.0))]
    InvalidConfig(Vec<FieldError>),
    #[error("document has no paragraphs")]
    EmptyDocument,
    #[error("cannot {action} while the job is {actual}")]
    WrongState { action: &'static str, actual: JobState },
    #[error("illegal state transition {from} -> {to}")]
    IllegalTransition { from: JobState, to: JobState },
    #[error("paragraph {index} out of range (document has {len})")]
    ParagraphOutOfRange { index: usize, len: usize },
    #[error(transparent)]
    Annotation(#[from] AnnotateError),
    #[error(transparent)]
    Memory(#[from] MemoryError),
    #[error(transparent)]
    Gateway(#[from] GatewayError),
    #[error("cannot encode result: {0}")]
    Encode(#[from] serde_json::Error),
    #[error("pipeline setup failed: {0}")]
    Setup(String),
}

fn join_fields(errors: &[FieldError]) -> String {
    errors.iter().map(ToString::to_string).collect::<Vec<_>>().join("; ")
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PipelineLimits {
    pub max_rounds: u32,
    pub max_pns_radius: usize,
    /// Worker threads for the per-paragraph fan-out of Phases 2 and 3.
    pub workers: usize,
}

impl Default for PipelineLimits {
    fn default() -> Self {
        Self { max_rounds: DEFAULT_MAX_ROUNDS, max_pns_radius: DEFAULT_MAX_PNS_RADIUS, workers: DEFAULT_WORKERS }
    }
}

/// Services shared by every job: provider gateway, memory stores, named
/// glossaries, the code taxonomy and a clock.
pub struct Pipeline {
    gateway: Arc<Gateway>,
    memory: Arc<Mutex<Memory>>,
    glossaries: BTreeMap<String, Arc<Glossary>>,
    taxonomy: Arc<Taxonomy>,
    languages: LanguageRegistry,
    clock: Arc<dyn Clock>,
    limits: PipelineLimits,
    pool: rayon::ThreadPool,
}

impl fmt::Debug for Pipeline {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Pipeline")
            .field("gateway", &self.gateway)
            .field("glossaries", &self.glossaries.keys().collect::<Vec<_>>())
            .field("limits", &self.limits)
            .finish()
    }
}

struct AnnotatorOutcome {
    annotations: Vec<Annotation>,
    usage: Vec<UsageRecord>,
    parse_error: Option<String>,
}

fn build_pool(workers: usize) -> Result<rayon::ThreadPool, PipelineError> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(workers.max(1))
        .thread_name(|i| format!("translaw-worker-{i}"))
        .build()
        .map_err(|e| PipelineError::Setup(e.to_string()))
}

/// Annotator replies are `ERR:` lines or `NONE`; anything else is a format
/// error worth a re-prompt.
fn parse_annotator_output(output: &str, draft: &str, taxonomy: &Taxonomy) -> Result<Vec<Annotation>, AnnotateError> {
    let has_records = output.lines().any(|l| l.trim_start().starts_with(RECORD_PREFIX));
    if !has_records {
        let trimmed = output.trim();
        if trimmed.is_empty() || trimmed.eq_ignore_ascii_case("NONE") {
            return Ok(Vec::new());
        }
        return Err(AnnotateError::Invalid("reply contains neither ERR: records nor NONE".into()));
    }
    parse_records(output, draft, taxonomy)
}

impl Pipeline {
    pub fn new(gateway: Arc<Gateway>, memory: Arc<Mutex<Memory>>) -> Result<Self, PipelineError> {
        let limits = PipelineLimits::default();
        Ok(Self {
            gateway,
            memory,
            glossaries: BTreeMap::new(),
            taxonomy: Arc::new(Taxonomy::builtin().clone()),
            languages: LanguageRegistry::default(),
            clock: Arc::new(SystemClock),
            limits,
            pool: build_pool(limits.workers)?,
        })
    }

    pub fn with_glossary(mut self, name: impl Into<String>, glossary: Glossary) -> Self {
        self.glossaries.insert(name.into(), Arc::new(glossary));
        self
    }

    pub fn with_clock(mut self, clock: Arc<dyn Clock>) -> Self {
        self.clock = clock;
        self
    }

    pub fn with_taxonomy(mut self, taxonomy: Arc<Taxonomy>) -> Self {
        self.taxonomy = taxonomy;
        self
    }

    pub fn with_languages(mut self, languages: LanguageRegistry) -> Self {
        self.languages = languages;
        self
    }

    pub fn with_limits(mut self, limits: PipelineLimits) -> Result<Self, PipelineError> {
        if limits.workers != self.limits.workers {
            self.pool = build_pool(limits.workers)?;
        }
        self.limits = limits;
        Ok(self)
    }

    pub fn gateway(&self) -> &Gateway {
        &self.gateway
    }

    pub fn taxonomy(&self) -> &Taxonomy {
        &self.taxonomy
    }

    pub fn glossary(&self, name: &str) -> Option<&Glossary> {
        self.glossaries.get(name).map(AsRef::as_ref)
    }

    pub fn glossary_names(&self) -> impl Iterator<Item = &str> {
        self.glossaries.keys().map(String::as_str)
    }

    pub fn limits(&self) -> PipelineLimits {
        self.limits
    }

    pub fn now(&self) -> chrono::DateTime<chrono::Utc> {
        self.clock.now()
    }

    fn memory(&self) -> MutexGuard<'_, Memory> {
        self.memory.lock().unwrap_or_else(|poisoned| poisoned.into_inner())
    }

    /// Record counts of the TM and PM stores.
    pub fn memory_counts(&self) -> (usize, usize) {
        let m = self.memory();
        (m.tm.len(), m.pm.len())
    }

    pub fn validate_config(&self, cfg: &JobConfig) -> Result<(), PipelineError> {
        let mut errors = Vec::new();
        let registry = self.gateway.registry();
        for role in Role::ALL {
            match cfg.role_bindings.get(&role) {
                None => errors.push(FieldError::new(format!("role_bindings.{role}"), "role is not bound")),
                Some(p) if !registry.contains(p) => {
                    errors.push(FieldError::new(format!("role_bindings.{role}"), format!("unknown provider `{p}`")))
                }
                Some(_) => {}
            }
        }
        if cfg.rounds == 0 || cfg.rounds > self.limits.max_rounds {
            errors.push(FieldError::new("rounds", format!("must be between 1 and {}", self.limits.max_rounds)));
        }
        if let Err(e) = cfg.pns.validate(self.limits.max_pns_radius) {
            errors.push(FieldError::new("pns.radius", e.to_string()));
        }
        self.check_direction(&cfg.direction, &mut errors);
        if let Some(name) = &cfg.glossary_ref {
            if !self.glossaries.contains_key(name) {
                errors.push(FieldError::new("glossary_ref", format!("unknown glossary `{name}`")));
            }
        }
        if cfg.few_shot && cfg.few_shot_k == 0 {
            errors.push(FieldError::new("few_shot_k", "must be at least 1 when few_shot is on"));
        }
        let b = cfg.divergence_bounds;
        if !(b.low.is_finite() && b.high.is_finite() && b.low > 0.0 && b.low <= b.high) {
            errors.push(FieldError::new("divergence_bounds", "need 0 < low <= high"));
        }
        if errors.is_empty() {
            Ok(())
        } else {
            Err(PipelineError::InvalidConfig(errors))
        }
    }

    fn check_direction(&self, direction: &Direction, errors: &mut Vec<FieldError>) {
        let source = self.languages.parse(direction.source.as_str());
        let target = self.languages.parse(direction.target.as_str());
        if let Err(e) = &source {
            errors.push(FieldError::new("direction.source", e.to_string()));
        }
        if let Err(e) = &target {
            errors.push(FieldError::new("direction.target", e.to_string()));
        }
        if let (Ok(s), Ok(t)) = (source, target) {
            if s == t {
                errors.push(FieldError::new("direction.target", "must differ from the source language"));
            }
        }
    }

    /// Validates the config and document and returns a `Pending` job.
    pub fn create_job(&self, job_id: impl Into<String>, config: JobConfig, doc: AlignedDocument) -> Result<Job, PipelineError> {
        if doc.is_empty() {
            return Err(PipelineError::EmptyDocument);
        }
        self.validate_config(&config)?;
        Ok(Job::new(job_id.into(), config, doc, self.clock.now()))
    }

    /// Creates a job and drives it until it completes, fails, or waits for
    /// human annotations.
    pub fn run_job(
        &self,
        job_id: impl Into<String>,
        config: JobConfig,
        doc: AlignedDocument,
        credentials: &Credentials,
    ) -> Result<Job, PipelineError> {
        let mut job = self.create_job(job_id, config, doc)?;
        self.advance(&mut job, credentials, &mut |_| {})?;
        Ok(job)
    }

    /// Drives `job` forward until it is terminal or waiting for a human.
    /// `observe` sees the job after every step. Provider and storage
    /// failures end in `Failed` with the cause recorded, not in `Err`.
    pub fn advance(
        &self,
        job: &mut Job,
        credentials: &Credentials,
        observe: &mut dyn FnMut(&Job),
    ) -> Result<(), PipelineError> {
        loop {
            let step = match job.state {
                JobState::Complete | JobState::Failed | JobState::AwaitingHumanAnnotation => return Ok(()),
                JobState::Pending => job.transition(JobState::Translating),
                JobState::Translating => {
                    self.translate(job, credentials, observe).and_then(|()| self.begin_round(job))
                }
                JobState::Annotating if job.config.human_annotation => job.transition(JobState::AwaitingHumanAnnotation),
                JobState::Annotating => self
                    .annotate(job, credentials)
                    .and_then(|()| self.store_triplets(job))
                    .and_then(|()| job.transition(JobState::Proofreading)),
                JobState::Proofreading => self.proofread(job, credentials).and_then(|()| {
                    if job.current_round < job.config.rounds {
                        self.begin_round(job)
                    } else {
                        self.complete(job)
                    }
                }),
            };
            if let Err(e) = step {
                warn!(job = %job.job_id, state = %job.state, error = %e, "job failed");
                job.fail(e.to_string());
            }
            debug!(job = %job.job_id, state = %job.state, round = job.current_round, "job advanced");
            observe(job);
        }
    }

    /// Stores a human annotator's `ERR:` records for one paragraph of the
    /// current round, replacing any earlier submission. Returns the number
    /// of annotations parsed; an empty submission marks the paragraph clean.
    pub fn submit_human_annotations(&self, job: &mut Job, paragraph_index: usize, records: &str) -> Result<usize, PipelineError> {
        job.expect_state(JobState::AwaitingHumanAnnotation, "submit annotations")?;
        let len = job.paragraphs.len();
        let paragraph = job
            .paragraphs
            .get_mut(paragraph_index)
            .ok_or(PipelineError::ParagraphOutOfRange { index: paragraph_index, len })?;
        let current = paragraph.current_text().unwrap_or_default();
        let annotations = parse_records(records, current, &self.taxonomy)?;
        let count = annotations.len();
        if let Some(round) = paragraph.rounds.last_mut() {
            round.annotations = annotations;
        }
        Ok(count)
    }

    /// Closes the human annotation step: stores the round's triplets and
    /// moves the job to `Proofreading`. Call [`Pipeline::advance`] next.
    pub fn finish_human_round(&self, job: &mut Job) -> Result<(), PipelineError> {
        job.expect_state(JobState::AwaitingHumanAnnotation, "finish the annotation round")?;
        self.store_triplets(job)?;
        job.transition(JobState::Proofreading)
    }

    fn provider(job: &Job, role: Role) -> Result<&str, PipelineError> {
        job.config
            .provider_for(role)
            .ok_or_else(|| PipelineError::InvalidConfig(vec![FieldError::new(format!("role_bindings.{role}"), "role is not bound")]))
    }

    fn translate(&self, job: &mut Job, credentials: &Credentials, observe: &mut dyn FnMut(&Job)) -> Result<(), PipelineError> {
        let provider = Self::provider(job, Role::Translator)?.to_string();
        let glossary = job.config.glossary_ref.as_ref().and_then(|g| self.glossaries.get(g)).cloned();
        let tm = job.config.few_shot.then(|| self.memory().tm.snapshot());
        let mut working = job.doc.clone();
        for i in 0..working.len() {
            working.set_target(i, None);
        }
        info!(job = %job.job_id, paragraphs = working.len(), "translating");
        for i in 0..working.len() {
            let context = pns_context(&working, i, job.config.pns)?;
            let source = working.pairs()[i].source_text.clone();
            let matches = glossary.as_ref().map(|g| g.match_terms(&source)).unwrap_or_default();
            let few_shot = tm
                .as_ref()
                .map(|records| {
                    retrieve_similar(records, &source, job.config.few_shot_k)
                        .into_iter()
                        .map(|s| (s.item.record.src.clone(), s.item.record.tgt.clone()))
                        .collect()
                })
                .unwrap_or_default();
            let prompt = render_prompt(&RoleInputs::Translator(TranslatorInputs {
                source: &source,
                context: &context,
                glossary: &matches,
                direction: &job.config.direction,
                few_shot,
            }))?;
            let completion = self.gateway.complete(&provider, &prompt, credentials)?;
            let draft = completion.text.trim().to_string();
            if draft.is_empty() {
                return Err(GatewayError::MalformedProviderResponse(format!("empty translation for paragraph {i}")).into());
            }
            job.usage.push(completion.usage);
            working.set_target(i, Some(draft.clone()));
            job.paragraphs[i].draft = Some(draft.clone());
            let record = TmRecord {
                src: source,
                tgt: draft,
                doc_id: job.doc.doc_id().to_string(),
                paragraph_index: i,
                stage: TmStage::Draft,
                created_at: self.clock.now(),
            };
            self.memory().tm.append(record)?;
            observe(job);
        }
        Ok(())
    }

    fn begin_round(&self, job: &mut Job) -> Result<(), PipelineError> {
        job.current_round += 1;
        job.pm_floor = self.memory().pm.len();
        let round = job.current_round;
        for p in &mut job.paragraphs {
            p.rounds.push(RoundRecord { round, annotations: Vec::new(), revision: None, warnings: Vec::new() });
        }
        job.transition(JobState::Annotating)
    }

    fn annotate_one(
        &self,
        provider: &str,
        source: &str,
        draft: &str,
        direction: &Direction,
        credentials: &Credentials,
    ) -> Result<AnnotatorOutcome, GatewayError> {
        let mut usage = Vec::new();
        let mut feedback: Option<String> = None;
        loop {
            let prompt = render_prompt(&RoleInputs::Annotator(AnnotatorInputs {
                source,
                draft,
                taxonomy: &self.taxonomy,
                direction,
                feedback: feedback.as_deref(),
            }))?;
            let completion = self.gateway.complete(provider, &prompt, credentials)?;
            usage.push(completion.usage);
            match parse_annotator_output(&completion.text, draft, &self.taxonomy) {
                Ok(annotations) => return Ok(AnnotatorOutcome { annotations, usage, parse_error: None }),
                Err(e) if feedback.is_none() => feedback = Some(e.to_string()),
                Err(e) => return Ok(AnnotatorOutcome { annotations: Vec::new(), usage, parse_error: Some(e.to_string()) }),
            }
        }
    }

    fn annotate(&self, job: &mut Job, credentials: &Credentials) -> Result<(), PipelineError> {
        let provider = Self::provider(job, Role::Annotator)?;
        let round = job.current_round;
        let items: Vec<(&str, &str)> =
            job.paragraphs.iter().map(|p| (p.source.as_str(), p.current_text().unwrap_or_default())).collect();
        let direction = &job.config.direction;
        let outcomes: Vec<Result<AnnotatorOutcome, GatewayError>> = self.pool.install(|| {
            items
                .par_iter()
                .map(|(source, draft)| self.annotate_one(provider, source, draft, direction, credentials))
                .collect()
        });
        let outcomes = outcomes.into_iter().collect::<Result<Vec<_>, _>>()?;
        for (i, outcome) in outcomes.into_iter().enumerate() {
            job.usage.extend(outcome.usage);
            let record = job.paragraphs[i].rounds.last_mut().expect("round started");
            record.annotations = outcome.annotations;
            if let Some(message) = outcome.parse_error {
                warn!(job = %job.job_id, paragraph = i, %message, "annotator output unusable, passing paragraph through");
                record.warnings.push(JobWarning::AnnotationParse { paragraph_index: i, round, message });
            }
        }
        Ok(())
    }

    /// One PM record per annotation of the current round, in paragraph order.
    fn store_triplets(&self, job: &Job) -> Result<(), PipelineError> {
        let round = job.current_round;
        let mut memory = self.memory();
        for p in &job.paragraphs {
            let Some(record) = p.rounds.last() else { continue };
            let translation = p.current_text().unwrap_or_default();
            for annotation in &record.annotations {
                let triplet = to_triplet(&p.source, translation, vec![annotation.clone()])?;
                memory.pm.append(PmRecord {
                    triplet,
                    doc_id: job.doc.doc_id().to_string(),
                    paragraph_index: p.index,
                    round,
                    created_at: self.clock.now(),
                })?;
            }
        }
        Ok(())
    }

    fn proofread(&self, job: &mut Job, credentials: &Credentials) -> Result<(), PipelineError> {
        let provider = Self::provider(job, Role::Proofreader)?;
        let round = job.current_round;
        let snapshot = self.memory().pm.snapshot();
        let visible = &snapshot[..job.pm_floor.min(snapshot.len())];
        let top_k = job.config.pm_top_k;
        let direction = &job.config.direction;
        let items: Vec<(usize, &str, &str, &[Annotation])> = job
            .paragraphs
            .iter()
            .filter_map(|p| {
                let annotations = &p.rounds.last()?.annotations;
                (!annotations.is_empty()).then(|| (p.index, p.source.as_str(), p.current_text().unwrap_or_default(), annotations.as_slice()))
            })
            .collect();
        let revisions: Vec<Result<(usize, String, UsageRecord), PipelineError>> = self.pool.install(|| {
            items
                .par_iter()
                .map(|&(index, source, draft, annotations)| {
                    let precedents: Vec<ErrTriplet> =
                        retrieve_similar(visible, source, top_k).into_iter().map(|s| s.item.record.triplet.clone()).collect();
                    let prompt = render_prompt(&RoleInputs::Proofreader(ProofreaderInputs {
                        source,
                        draft,
                        annotations,
                        precedents: &precedents,
                        taxonomy: &self.taxonomy,
                        direction,
                    }))?;
                    let completion = self.gateway.complete(provider, &prompt, credentials)?;
                    let revision = completion.text.trim().to_string();
                    if revision.is_empty() {
                        return Err(GatewayError::MalformedProviderResponse(format!("empty revision for paragraph {index}")).into());
                    }
                    Ok((index, revision, completion.usage))
                })
                .collect()
        });
        let revisions = revisions.into_iter().collect::<Result<Vec<_>, _>>()?;
        let bounds = job.config.divergence_bounds;
        for (index, revision, usage) in revisions {
            job.usage.push(usage);
            let paragraph = &mut job.paragraphs[index];
            let draft = paragraph.draft.clone().unwrap_or_default();
            let record = paragraph.rounds.last_mut().expect("round started");
            if let Some(w) = divergence_guard(&draft, &revision, bounds, index, round) {
                warn!(job = %job.job_id, paragraph = index, round, "revision length diverges from the draft");
                record.warnings.push(w);
            }
            record.revision = Some(revision);
        }
        Ok(())
    }

    fn complete(&self, job: &mut Job) -> Result<(), PipelineError> {
        let glossary = job.config.glossary_ref.as_ref().and_then(|g| self.glossaries.get(g)).cloned();
        let doc_id = job.doc.doc_id().to_string();
        for p in &mut job.paragraphs {
            let final_text = p.current_text().unwrap_or_default().to_string();
            if p.draft.as_deref() != Some(final_text.as_str()) {
                self.memory().tm.append(TmRecord {
                    src: p.source.clone(),
                    tgt: final_text.clone(),
                    doc_id: doc_id.clone(),
                    paragraph_index: p.index,
                    stage: TmStage::Final,
                    created_at: self.clock.now(),
                })?;
            }
            if let Some(g) = &glossary {
                let matches = g.match_terms(&p.source);
                for v in check_consistency(&final_text, &matches) {
                    let expected = matches
                        .iter()
                        .find(|m| m.entry.source_term == v.entry.source_term)
                        .map(|m| m.targets.clone())
                        .unwrap_or_else(|| vec![v.entry.target_term.clone()]);
                    p.warnings.push(JobWarning::Glossary { paragraph_index: p.index, source_term: v.entry.source_term, expected });
                }
            }
            p.final_text = Some(final_text);
        }
        info!(job = %job.job_id, "job complete");
        job.transition(JobState::Complete)
    }
}
