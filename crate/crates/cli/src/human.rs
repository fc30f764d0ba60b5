//! Line-oriented annotation loop for `translate --human`.

use std::io::{BufRead, Write};

use translaw_core::{Job, Pipeline, PipelineError};

use crate::{runtime, CliError};

/// Reads `ERR:` lines up to a blank line or end of input.
fn read_block(input: &mut impl BufRead) -> Result<String, CliError> {
    let mut lines = Vec::new();
    loop {
        let mut line = String::new();
        if input.read_line(&mut line).map_err(runtime)? == 0 {
            break;
        }
        let line = line.trim_end_matches(['\n', '\r']);
        if line.trim().is_empty() {
            break;
        }
        lines.push(line.to_string());
    }
    Ok(lines.join("\n"))
}

/// Prompts for every paragraph of the waiting round, then closes it. An
/// empty block marks the paragraph clean; rejected records are asked for
/// again.
pub fn annotate_round(
    pipeline: &Pipeline,
    job: &mut Job,
    input: &mut impl BufRead,
    out: &mut impl Write,
) -> Result<(), CliError> {
    let total = job.paragraph_count();
    for index in 0..total {
        loop {
            let p = &job.paragraphs[index];
            writeln!(
                out,
                "\nround {} paragraph {}/{}\nsource:  {}\ncurrent: {}\nERR: lines, blank line when done:",
                job.current_round,
                index + 1,
                total,
                p.source,
                p.current_text().unwrap_or_default()
            )
            .map_err(runtime)?;
            let records = read_block(input)?;
            if records.is_empty() {
                break;
            }
            match pipeline.submit_human_annotations(job, index, &records) {
                Ok(n) => {
                    writeln!(out, "accepted {n}").map_err(runtime)?;
                    break;
                }
                Err(PipelineError::Annotation(e)) => writeln!(out, "rejected: {e}").map_err(runtime)?,
                Err(e) => return Err(runtime(e)),
            }
        }
    }
    pipeline.finish_human_round(job).map_err(runtime)
}
