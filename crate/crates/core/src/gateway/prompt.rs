//! Role prompts for the translator, annotator and proofreader agents.
//!
//! User text is assembled from `## `-headed sections in a fixed order so
//! that rendering is deterministic and the mock provider can read it back.

use serde::{Deserialize, Serialize};

use super::{GatewayError, Role};
use crate::annotate::{serialize_annotations, Annotation, ErrTriplet};
use crate::document::{Direction, LanguageTag, ParagraphPair};
use crate::glossary::TermMatch;
use crate::taxonomy::Taxonomy;

pub const SECTION_GLOSSARY: &str = "## Glossary";
pub const SECTION_CONTEXT: &str = "## Context";
pub const SECTION_FOCAL: &str = "## Paragraph to translate";
pub const SECTION_SOURCE: &str = "## Source paragraph";
pub const SECTION_DRAFT: &str = "## Draft translation";
pub const SECTION_ANNOTATIONS: &str = "## Error annotations";
pub const SECTION_PRECEDENTS: &str = "## Precedent corrections";
pub const SECTION_FEEDBACK: &str = "## Format problem";

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Prompt {
    pub role: Role,
    pub system_text: String,
    pub user_text: String,
    /// (input, output) example pairs; empty for zero-shot prompts.
    #[serde(default)]
    pub few_shot_examples: Vec<(String, String)>,
}

impl Prompt {
    /// All text the model receives, for token estimation.
    pub fn full_text(&self) -> String {
        let mut s = format!("{}\n{}", self.system_text, self.user_text);
        for (i, o) in &self.few_shot_examples {
            s.push('\n');
            s.push_str(i);
            s.push('\n');
            s.push_str(o);
        }
        s
    }
}

#[derive(Debug, Clone)]
pub struct TranslatorInputs<'a> {
    pub source: &'a str,
    pub context: &'a [ParagraphPair],
    pub glossary: &'a [TermMatch],
    pub direction: &'a Direction,
    pub few_shot: Vec<(String, String)>,
}

#[derive(Debug, Clone)]
pub struct AnnotatorInputs<'a> {
    pub source: &'a str,
    pub draft: &'a str,
    pub taxonomy: &'a Taxonomy,
    pub direction: &'a Direction,
    /// Parser error from a previous attempt, for the one re-prompt.
    pub feedback: Option<&'a str>,
}

#[derive(Debug, Clone)]
pub struct ProofreaderInputs<'a> {
    pub source: &'a str,
    pub draft: &'a str,
    pub annotations: &'a [Annotation],
    pub precedents: &'a [ErrTriplet],
    pub taxonomy: &'a Taxonomy,
    pub direction: &'a Direction,
}

#[derive(Debug, Clone)]
pub enum RoleInputs<'a> {
    Translator(TranslatorInputs<'a>),
    Annotator(AnnotatorInputs<'a>),
    Proofreader(ProofreaderInputs<'a>),
}

pub fn language_name(tag: &LanguageTag) -> &str {
    match tag.as_str() {
        "en" => "English",
        "zh-Hant" => "Traditional Chinese",
        "zh-Hans" => "Simplified Chinese",
        "zh" => "Chinese",
        other => other,
    }
}

fn require(value: &str, field: &'static str) -> Result<(), GatewayError> {
    if value.trim().is_empty() {
        Err(GatewayError::MissingInput(field))
    } else {
        Ok(())
    }
}

const RECORD_GRAMMAR: &str = "\
Report each error on its own line in exactly this form:
ERR: \"<span>\"@<occurrence> | <CODE> | <suggestion> | <rationale>
- <span> is copied verbatim from the draft translation; escape \" as \\\" inside it.
- @<occurrence> says which occurrence of the span is meant (1 = first); it may be omitted for the first.
- <CODE> is one of the proofread codes listed below.
- <suggestion> is the replacement text; <rationale> is a short reason. Either may be left empty.
If the translation has no errors, reply with NONE.";

pub fn render_prompt(inputs: &RoleInputs<'_>) -> Result<Prompt, GatewayError> {
    match inputs {
        RoleInputs::Translator(t) => render_translator(t),
        RoleInputs::Annotator(a) => render_annotator(a),
        RoleInputs::Proofreader(p) => render_proofreader(p),
    }
}

fn render_translator(t: &TranslatorInputs<'_>) -> Result<Prompt, GatewayError> {
    require(t.source, "source")?;
    let src = language_name(&t.direction.source);
    let tgt = language_name(&t.direction.target);
    let system_text = format!(
        "You are the Translator in a three-stage legal translation workflow for court judgments. \
Translate the paragraph from {src} into {tgt}. Preserve its legal meaning and the formal register of a judgment, \
translate completely, and keep legal terminology consistent with the glossary and with the surrounding paragraphs. \
Reply with the translated paragraph only."
    );

    let mut user = String::new();
    let mut seen = std::collections::HashSet::new();
    let glossary_lines: Vec<String> = t
        .glossary
        .iter()
        .filter(|m| seen.insert(m.entry.source_term.to_lowercase()))
        .map(|m| format!("{}: {}", m.entry.source_term, m.targets.join(" / ")))
        .collect();
    if !glossary_lines.is_empty() {
        user.push_str(SECTION_GLOSSARY);
        user.push('\n');
        for line in glossary_lines {
            user.push_str(&line);
            user.push('\n');
        }
        user.push('\n');
    }
    if !t.context.is_empty() {
        user.push_str(SECTION_CONTEXT);
        user.push('\n');
        for pair in t.context {
            user.push_str(&format!("[Paragraph {} source]\n{}\n", pair.index + 1, pair.source_text));
            if let Some(target) = pair.target_text.as_deref().filter(|s| !s.is_empty()) {
                user.push_str(&format!("[Paragraph {} translation]\n{}\n", pair.index + 1, target));
            }
        }
        user.push('\n');
    }
    user.push_str(SECTION_FOCAL);
    user.push('\n');
    user.push_str(t.source);
    user.push('\n');

    Ok(Prompt { role: Role::Translator, system_text, user_text: user, few_shot_examples: t.few_shot.clone() })
}

fn render_annotator(a: &AnnotatorInputs<'_>) -> Result<Prompt, GatewayError> {
    require(a.source, "source")?;
    require(a.draft, "draft")?;
    let system_text = format!(
        "You are the Annotator in a three-stage legal translation workflow. Compare the {tgt} draft with the {src} \
source and mark every error you find in the draft using the proofread codes: accuracy errors, grammatical errors, \
and usage and style errors. Give a concrete suggestion for each error so the Proofreader can correct it.\n\n\
{RECORD_GRAMMAR}\n\nProofread codes:\n{codes}",
        src = language_name(&a.direction.source),
        tgt = language_name(&a.direction.target),
        codes = a.taxonomy.digest(),
    );
    let mut user = format!("{SECTION_SOURCE}\n{}\n\n{SECTION_DRAFT}\n{}\n", a.source, a.draft);
    if let Some(feedback) = a.feedback {
        user.push_str(&format!(
            "\n{SECTION_FEEDBACK}\nYour previous reply could not be used: {feedback}\nReply again using only ERR: lines, or NONE.\n"
        ));
    }
    Ok(Prompt { role: Role::Annotator, system_text, user_text: user, few_shot_examples: Vec::new() })
}

fn render_proofreader(p: &ProofreaderInputs<'_>) -> Result<Prompt, GatewayError> {
    require(p.source, "source")?;
    require(p.draft, "draft")?;
    if p.annotations.is_empty() {
        return Err(GatewayError::MissingInput("annotations"));
    }
    let system_text = format!(
        "You are the Proofreader in a three-stage legal translation workflow. Revise the {tgt} draft so that every \
annotated error is corrected, guided by the suggestions and by any precedent corrections, then review the whole \
paragraph against the {src} source. Do not add content that is not in the source. Reply with the full revised \
paragraph only.\n\nProofread codes:\n{codes}",
        src = language_name(&p.direction.source),
        tgt = language_name(&p.direction.target),
        codes = p.taxonomy.digest(),
    );
    let mut user = format!(
        "{SECTION_SOURCE}\n{}\n\n{SECTION_DRAFT}\n{}\n\n{SECTION_ANNOTATIONS}\n{}\n",
        p.source,
        p.draft,
        serialize_annotations(p.annotations)
    );
    if !p.precedents.is_empty() {
        user.push('\n');
        user.push_str(SECTION_PRECEDENTS);
        user.push('\n');
        for (i, t) in p.precedents.iter().enumerate() {
            user.push_str(&format!(
                "[Precedent {}]\nSource: {}\nTranslation: {}\nErrors:\n{}\n",
                i + 1,
                t.src,
                t.reference,
                serialize_annotations(&t.err)
            ));
        }
    }
    Ok(Prompt { role: Role::Proofreader, system_text, user_text: user, few_shot_examples: Vec::new() })
}

/// Body of the section headed `heading` in rendered user text.
pub fn section<'a>(user_text: &'a str, heading: &str) -> Option<&'a str> {
    let marker = format!("{heading}\n");
    let start = if user_text.starts_with(&marker) {
        marker.len()
    } else {
        user_text.find(&format!("\n{marker}"))? + 1 + marker.len()
    };
    let body = &user_text[start..];
    let end = body.find("\n## ").map_or(body.len(), |i| i + 1);
    Some(body[..end].trim_end_matches('\n'))
}
