use serde::Serialize;

use crate::document::Direction;
use crate::gateway::{accrue_cost, CostReport, ProviderRegistry, UsageRecord};

use super::{Job, JobState, ParagraphRecord, PipelineError};

/// Downloadable result of a completed job.
#[derive(Debug, Serialize)]
pub struct JobResult<'a> {
    pub job_id: &'a str,
    pub doc_id: &'a str,
    pub direction: &'a Direction,
    pub rounds: u32,
    pub paragraphs: &'a [ParagraphRecord],
    pub usage: &'a [UsageRecord],
    pub cost: CostReport,
}

impl<'a> JobResult<'a> {
    pub fn new(job: &'a Job, registry: &ProviderRegistry) -> Result<Self, PipelineError> {
        job.expect_state(JobState::Complete, "export the result")?;
        Ok(Self {
            job_id: &job.job_id,
            doc_id: job.doc.doc_id(),
            direction: &job.config.direction,
            rounds: job.current_round,
            paragraphs: &job.paragraphs,
            usage: &job.usage,
            cost: accrue_cost(&job.usage, registry)?,
        })
    }
}

pub fn export_json(job: &Job, registry: &ProviderRegistry) -> Result<String, PipelineError> {
    let result = JobResult::new(job, registry)?;
    Ok(serde_json::to_string_pretty(&result)?)
}

/// Final paragraphs in order, separated by one blank line.
pub fn export_txt(job: &Job) -> Result<String, PipelineError> {
    job.expect_state(JobState::Complete, "export the result")?;
    let texts = job.paragraphs.iter().map(|p| p.final_text.as_deref().unwrap_or_default()).collect::<Vec<_>>();
    Ok(texts.join("\n\n"))
}
