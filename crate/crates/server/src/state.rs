use std::collections::BTreeMap;
use std::path::PathBuf;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::{Arc, Mutex, MutexGuard, RwLock, TryLockError};

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};
use tracing::{info, warn};
use translaw_core::corpus::ingest_path;
use translaw_core::gateway::{accrue_cost, CostReport, ProviderRegistry, UsageRecord};
use translaw_core::glossary::Glossary;
use translaw_core::memory::Memory;
use translaw_core::pipeline::{JobWarning, ParagraphRecord, PipelineLimits};
use translaw_core::{segment_paragraphs, Credentials, Gateway, Job, JobConfig, JobState, Pipeline};

use crate::{ApiError, ServerConfig, ServerError};

/// Short status of a job.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JobSummary {
    pub job_id: String,
    pub state: JobState,
    pub created_at: DateTime<Utc>,
    pub paragraph_count: usize,
    pub current_round: u32,
    pub warning_count: usize,
}

impl From<&Job> for JobSummary {
    fn from(job: &Job) -> Self {
        Self {
            job_id: job.job_id.clone(),
            state: job.state,
            created_at: job.created_at,
            paragraph_count: job.paragraph_count(),
            current_round: job.current_round,
            warning_count: job.warnings().len(),
        }
    }
}

/// Everything a client needs to render a job.
#[derive(Debug, Serialize)]
pub struct JobView<'a> {
    #[serde(flatten)]
    pub summary: JobSummary,
    pub config: &'a JobConfig,
    pub history: &'a [JobState],
    pub paragraphs: &'a [ParagraphRecord],
    pub usage: &'a [UsageRecord],
    pub warnings: Vec<&'a JobWarning>,
    pub cost: Option<CostReport>,
    pub failure: Option<&'a str>,
}

impl<'a> JobView<'a> {
    pub fn new(job: &'a Job, registry: &ProviderRegistry) -> Self {
        Self {
            summary: JobSummary::from(job),
            config: &job.config,
            history: &job.history,
            paragraphs: &job.paragraphs,
            usage: &job.usage,
            warnings: job.warnings(),
            cost: accrue_cost(&job.usage, registry).ok(),
            failure: job.failure.as_deref(),
        }
    }
}

/// Reference to one document of a corpus under the configured corpus dir.
#[derive(Debug, Clone, Deserialize)]
pub struct CorpusRef {
    pub name: String,
    pub doc_id: String,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CreateJob {
    #[serde(default)]
    pub config: JobConfig,
    pub text: Option<String>,
    pub doc_id: Option<String>,
    pub corpus: Option<CorpusRef>,
}

/// One job: the latest published snapshot, a writer lock that serializes
/// mutations, and the session's API keys (kept out of the job record).
pub struct JobSlot {
    snapshot: RwLock<Arc<Job>>,
    writer: Mutex<()>,
    credentials: Mutex<Credentials>,
}

fn lock<T>(m: &Mutex<T>) -> MutexGuard<'_, T> {
    m.lock().unwrap_or_else(|p| p.into_inner())
}

impl JobSlot {
    fn new(job: Job, credentials: Credentials) -> Self {
        Self { snapshot: RwLock::new(Arc::new(job)), writer: Mutex::new(()), credentials: Mutex::new(credentials) }
    }

    pub fn view(&self) -> Arc<Job> {
        self.snapshot.read().unwrap_or_else(|p| p.into_inner()).clone()
    }

    fn publish(&self, job: &Job) {
        *self.snapshot.write().unwrap_or_else(|p| p.into_inner()) = Arc::new(job.clone());
    }

    fn merge_credentials(&self, extra: Credentials) {
        lock(&self.credentials).merge(extra);
    }

    /// Runs `f` on a private copy of the job under the writer lock and
    /// publishes the result. Fails with 409 while a runner holds the lock.
    fn mutate<R>(&self, f: impl FnOnce(&mut Job) -> Result<R, ApiError>) -> Result<R, ApiError> {
        let _guard = match self.writer.try_lock() {
            Ok(g) => g,
            Err(TryLockError::Poisoned(p)) => p.into_inner(),
            Err(TryLockError::WouldBlock) => return Err(ApiError::conflict("job is running")),
        };
        let mut job = (*self.view()).clone();
        let out = f(&mut job);
        self.publish(&job);
        out
    }
}

struct Inner {
    pipeline: Arc<Pipeline>,
    jobs: RwLock<BTreeMap<String, Arc<JobSlot>>>,
    next_id: AtomicU64,
    auto_start: bool,
    corpus_dir: Option<PathBuf>,
}

#[derive(Clone)]
pub struct AppState {
    inner: Arc<Inner>,
}

#[derive(Debug, Clone, Default)]
pub struct AppOptions {
    pub auto_start: bool,
    pub corpus_dir: Option<PathBuf>,
}

impl AppState {
    pub fn new(pipeline: Pipeline, options: AppOptions) -> Self {
        Self {
            inner: Arc::new(Inner {
                pipeline: Arc::new(pipeline),
                jobs: RwLock::new(BTreeMap::new()),
                next_id: AtomicU64::new(1),
                auto_start: options.auto_start,
                corpus_dir: options.corpus_dir,
            }),
        }
    }

    /// Builds the gateway, memory, glossaries and pipeline described by
    /// `config`.
    pub fn from_config(config: &ServerConfig) -> Result<Self, ServerError> {
        let registry = match &config.providers {
            Some(path) => ProviderRegistry::load(path)?,
            None => ProviderRegistry::seeded(),
        };
        let memory = match &config.data_dir {
            Some(dir) => {
                std::fs::create_dir_all(dir)?;
                Memory::open(dir)?
            }
            None => Memory::in_memory(),
        };
        let mut pipeline = Pipeline::new(Arc::new(Gateway::new(registry)?), Arc::new(Mutex::new(memory)))?
            .with_limits(PipelineLimits {
                max_rounds: config.max_rounds,
                max_pns_radius: config.max_pns_radius,
                workers: config.workers,
            })?;
        for (name, path) in &config.glossaries {
            pipeline = pipeline.with_glossary(name.clone(), Glossary::load_path(path)?);
        }
        Ok(Self::new(pipeline, AppOptions { auto_start: config.auto_start, corpus_dir: config.corpus_dir.clone() }))
    }

    pub fn pipeline(&self) -> &Pipeline {
        &self.inner.pipeline
    }

    pub fn slot(&self, id: &str) -> Result<Arc<JobSlot>, ApiError> {
        self.inner
            .jobs
            .read()
            .unwrap_or_else(|p| p.into_inner())
            .get(id)
            .cloned()
            .ok_or_else(|| ApiError::not_found(format!("no job `{id}`")))
    }

    pub fn summaries(&self) -> Vec<JobSummary> {
        let jobs = self.inner.jobs.read().unwrap_or_else(|p| p.into_inner());
        jobs.values().map(|s| JobSummary::from(&*s.view())).collect()
    }

    pub fn create_job(&self, request: CreateJob, credentials: Credentials) -> Result<JobSummary, ApiError> {
        let doc = match (request.text, request.corpus) {
            (Some(text), None) => {
                let doc = segment_paragraphs(&text, &request.config.direction)?;
                match request.doc_id {
                    Some(id) => doc.with_doc_id(id),
                    None => doc,
                }
            }
            (None, Some(corpus)) => self.corpus_document(&corpus, &request.config)?,
            _ => return Err(ApiError::bad_request("provide exactly one of `text` or `corpus`")),
        };
        let id = format!("job-{}", self.inner.next_id.fetch_add(1, Ordering::SeqCst));
        let job = self.inner.pipeline.create_job(id.clone(), request.config, doc)?;
        let summary = JobSummary::from(&job);
        let slot = Arc::new(JobSlot::new(job, credentials));
        self.inner.jobs.write().unwrap_or_else(|p| p.into_inner()).insert(id.clone(), slot.clone());
        info!(job = %id, paragraphs = summary.paragraph_count, "job created");
        if self.inner.auto_start {
            self.spawn_runner(slot);
        }
        Ok(summary)
    }

    fn corpus_document(&self, corpus: &CorpusRef, config: &JobConfig) -> Result<translaw_core::AlignedDocument, ApiError> {
        let dir = self.inner.corpus_dir.as_ref().ok_or_else(|| ApiError::bad_request("no corpus directory configured"))?;
        if corpus.name.contains(['/', '\\']) || corpus.name.starts_with('.') {
            return Err(ApiError::bad_request("corpus name must be a plain file name"));
        }
        let loaded = ingest_path(&dir.join(&corpus.name), &config.direction)
            .map_err(|e| ApiError::bad_request(format!("corpus `{}`: {e}", corpus.name)))?;
        let doc = loaded
            .document(&corpus.doc_id)
            .ok_or_else(|| ApiError::bad_request(format!("corpus `{}` has no document `{}`", corpus.name, corpus.doc_id)))?;
        Ok(doc.clone())
    }

    /// Starts a `Pending` job created with auto-start off.
    pub fn start(&self, id: &str, credentials: Credentials) -> Result<JobSummary, ApiError> {
        let slot = self.slot(id)?;
        let job = slot.view();
        if job.state != JobState::Pending {
            return Err(ApiError::conflict(format!("job is {}, not Pending", job.state)));
        }
        slot.merge_credentials(credentials);
        self.spawn_runner(slot.clone());
        Ok(JobSummary::from(&*job))
    }

    /// Stores human annotations for one paragraph and, when the round is
    /// marked complete, resumes the job.
    pub fn submit_annotations(
        &self,
        id: &str,
        paragraph_index: Option<usize>,
        records: &str,
        round_complete: bool,
        credentials: Credentials,
    ) -> Result<(usize, JobSummary), ApiError> {
        let slot = self.slot(id)?;
        let pipeline = &self.inner.pipeline;
        let accepted = slot.mutate(|job| {
            if job.state != JobState::AwaitingHumanAnnotation {
                return Err(ApiError::conflict(format!("job is {}, not waiting for annotations", job.state)));
            }
            let accepted = match paragraph_index {
                Some(i) => pipeline.submit_human_annotations(job, i, records)?,
                None if records.trim().is_empty() => 0,
                None => return Err(ApiError::bad_request("records need a paragraph_index")),
            };
            if round_complete {
                pipeline.finish_human_round(job)?;
            }
            Ok(accepted)
        })?;
        if round_complete {
            slot.merge_credentials(credentials);
            self.spawn_runner(slot.clone());
        }
        Ok((accepted, JobSummary::from(&*slot.view())))
    }

    fn spawn_runner(&self, slot: Arc<JobSlot>) {
        let pipeline = self.inner.pipeline.clone();
        tokio::task::spawn_blocking(move || {
            let _guard = lock(&slot.writer);
            let mut job = (*slot.view()).clone();
            let credentials = lock(&slot.credentials).clone();
            if let Err(e) = pipeline.advance(&mut job, &credentials, &mut |j| slot.publish(j)) {
                warn!(job = %job.job_id, error = %e, "runner stopped");
            }
            slot.publish(&job);
        });
    }
}
