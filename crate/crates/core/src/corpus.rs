//! Paragraph-aligned bilingual corpora: ingestion from parallel text files
//! or JSON lines, statistics, JSONL export and test-set selection.

use std::collections::{BTreeMap, HashSet};
use std::ops::Add;
use std::path::{Path, PathBuf};

use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::document::{split_paragraphs, AlignedDocument, Direction, ParagraphPair};
use crate::error::CoreError;
use crate::gateway::{estimate_tokens, TokenScheme};

#[derive(Debug, Error)]
pub enum CorpusError {
    #[error("document `{doc_id}`: {source_count} source paragraphs but {target_count} target paragraphs")]
    AlignmentMismatch { doc_id: String, source_count: usize, target_count: usize },
    #[error("line {line}: {reason}")]
    Parse { line: usize, reason: String },
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("selector cannot be satisfied: {0}")]
    SelectorUnsatisfiable(String),
    #[error(transparent)]
    Document(#[from] CoreError),
}

/// A named set of fully bilingual documents.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct AlignedCorpus {
    pub name: String,
    documents: Vec<AlignedDocument>,
}

impl AlignedCorpus {
    /// Every pair must carry a non-empty target text.
    pub fn new(name: impl Into<String>, documents: Vec<AlignedDocument>) -> Result<Self, CorpusError> {
        for doc in &documents {
            if let Some(p) = doc.pairs().iter().find(|p| p.target_text.as_deref().is_none_or(|t| t.trim().is_empty())) {
                return Err(CoreError::InvalidDocument(format!(
                    "document `{}` paragraph {} has no target text",
                    doc.doc_id(),
                    p.index
                ))
                .into());
            }
        }
        Ok(Self { name: name.into(), documents })
    }

    pub fn documents(&self) -> &[AlignedDocument] {
        &self.documents
    }

    pub fn pair_count(&self) -> usize {
        self.documents.iter().map(AlignedDocument::len).sum()
    }

    pub fn document(&self, doc_id: &str) -> Option<&AlignedDocument> {
        self.documents.iter().find(|d| d.doc_id() == doc_id)
    }
}

fn pair(index: usize, src: String, tgt: String, direction: &Direction) -> ParagraphPair {
    ParagraphPair {
        index,
        source_text: src,
        target_text: Some(tgt),
        source_lang: direction.source.clone(),
        target_lang: direction.target.clone(),
    }
}

/// Builds one document from a source text and its translation, both split
/// at blank lines.
pub fn align_texts(doc_id: &str, source: &str, target: &str, direction: &Direction) -> Result<AlignedDocument, CorpusError> {
    let src = split_paragraphs(source);
    let tgt = split_paragraphs(target);
    if src.len() != tgt.len() {
        return Err(CorpusError::AlignmentMismatch {
            doc_id: doc_id.to_string(),
            source_count: src.len(),
            target_count: tgt.len(),
        });
    }
    let pairs = src.into_iter().zip(tgt).enumerate().map(|(i, (s, t))| pair(i, s, t, direction)).collect();
    Ok(AlignedDocument::new(doc_id, pairs)?)
}

fn read(path: &Path) -> Result<String, CorpusError> {
    std::fs::read_to_string(path).map_err(|source| CorpusError::Io { path: path.to_path_buf(), source })
}

/// Ingests `(source file, target file)` pairs; each document is named after
/// the source file stem.
pub fn ingest_parallel_files(
    name: &str,
    files: &[(PathBuf, PathBuf)],
    direction: &Direction,
) -> Result<AlignedCorpus, CorpusError> {
    let docs = files
        .iter()
        .map(|(src, tgt)| {
            let doc_id = src.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
            align_texts(&doc_id, &read(src)?, &read(tgt)?, direction)
        })
        .collect::<Result<_, _>>()?;
    AlignedCorpus::new(name, docs)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CorpusLine {
    pub doc_id: String,
    pub index: usize,
    pub src: String,
    pub tgt: String,
}

/// Parses `{doc_id, index, src, tgt}` lines. Documents keep the order of
/// their first line; paragraphs are ordered by index, which must run
/// `0..n` without gaps or duplicates.
pub fn ingest_jsonl(name: &str, content: &str, direction: &Direction) -> Result<AlignedCorpus, CorpusError> {
    let mut order: Vec<String> = Vec::new();
    let mut grouped: BTreeMap<String, BTreeMap<usize, (String, String)>> = BTreeMap::new();
    for (i, raw) in content.lines().enumerate() {
        let line = i + 1;
        if raw.trim().is_empty() {
            continue;
        }
        let rec: CorpusLine =
            serde_json::from_str(raw).map_err(|e| CorpusError::Parse { line, reason: e.to_string() })?;
        if !grouped.contains_key(&rec.doc_id) {
            order.push(rec.doc_id.clone());
        }
        let doc = grouped.entry(rec.doc_id.clone()).or_default();
        if doc.insert(rec.index, (rec.src, rec.tgt)).is_some() {
            return Err(CorpusError::Parse {
                line,
                reason: format!("duplicate paragraph (doc_id `{}`, index {})", rec.doc_id, rec.index),
            });
        }
    }
    let docs = order
        .into_iter()
        .map(|doc_id| {
            let paragraphs = grouped.remove(&doc_id).unwrap_or_default();
            let pairs = paragraphs
                .into_iter()
                .enumerate()
                .map(|(expected, (index, (src, tgt)))| {
                    if index != expected {
                        return Err(CorpusError::Parse {
                            line: 0,
                            reason: format!("document `{doc_id}` is missing paragraph {expected}"),
                        });
                    }
                    Ok(pair(index, src, tgt, direction))
                })
                .collect::<Result<Vec<_>, _>>()?;
            Ok(AlignedDocument::new(doc_id, pairs)?)
        })
        .collect::<Result<_, CorpusError>>()?;
    AlignedCorpus::new(name, docs)
}

/// Reads a `.jsonl` file, or a directory of `<doc>.<source-lang>` /
/// `<doc>.<target-lang>` file pairs (e.g. `case1.en` and `case1.zh-Hant`).
pub fn ingest_path(path: &Path, direction: &Direction) -> Result<AlignedCorpus, CorpusError> {
    let name = path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
    if !path.is_dir() {
        return ingest_jsonl(&name, &read(path)?, direction);
    }
    let io = |source| CorpusError::Io { path: path.to_path_buf(), source };
    let mut sources: Vec<PathBuf> = std::fs::read_dir(path)
        .map_err(io)?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|e| e == direction.source.as_str()))
        .collect();
    sources.sort();
    let files = sources
        .into_iter()
        .map(|src| {
            let tgt = src.with_extension(direction.target.as_str());
            if !tgt.exists() {
                return Err(CorpusError::Io {
                    path: tgt,
                    source: std::io::Error::new(std::io::ErrorKind::NotFound, "target file missing"),
                });
            }
            Ok((src, tgt))
        })
        .collect::<Result<Vec<_>, _>>()?;
    ingest_parallel_files(&name, &files, direction)
}

pub fn export_jsonl(corpus: &AlignedCorpus) -> String {
    let mut out = String::new();
    for doc in corpus.documents() {
        for p in doc.pairs() {
            let line = CorpusLine {
                doc_id: doc.doc_id().to_string(),
                index: p.index,
                src: p.source_text.clone(),
                tgt: p.target_text.clone().unwrap_or_default(),
            };
            out.push_str(&serde_json::to_string(&line).expect("plain strings serialize"));
            out.push('\n');
        }
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct CorpusStats {
    pub document_count: usize,
    pub pair_count: usize,
    pub source_chars: usize,
    pub target_chars: usize,
    pub estimated_source_tokens: u64,
}

impl Add for CorpusStats {
    type Output = CorpusStats;

    fn add(self, o: CorpusStats) -> CorpusStats {
        CorpusStats {
            document_count: self.document_count + o.document_count,
            pair_count: self.pair_count + o.pair_count,
            source_chars: self.source_chars + o.source_chars,
            target_chars: self.target_chars + o.target_chars,
            estimated_source_tokens: self.estimated_source_tokens + o.estimated_source_tokens,
        }
    }
}

/// Character counts cover paragraph text only, not separators.
pub fn stats(corpus: &AlignedCorpus, scheme: TokenScheme) -> CorpusStats {
    corpus
        .documents()
        .iter()
        .map(|doc| {
            doc.pairs().iter().fold(CorpusStats { document_count: 1, ..CorpusStats::default() }, |acc, p| CorpusStats {
                pair_count: acc.pair_count + 1,
                source_chars: acc.source_chars + p.source_text.chars().count(),
                target_chars: acc.target_chars + p.target_text.as_deref().map_or(0, |t| t.chars().count()),
                estimated_source_tokens: acc.estimated_source_tokens + estimate_tokens(&p.source_text, scheme),
                ..acc
            })
        })
        .fold(CorpusStats::default(), Add::add)
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Selector {
    Document(String),
    /// A sample of this many pairs drawn across the corpus.
    Pairs(usize),
}

/// Carves a test set. Sampling is deterministic for a given seed and keeps
/// document and paragraph order; sampled documents are re-indexed from 0
/// and list the original indices under the `source_indices` metadata key.
pub fn take_test_set(corpus: &AlignedCorpus, selector: &Selector, seed: Option<u64>) -> Result<AlignedCorpus, CorpusError> {
    match selector {
        Selector::Document(id) => {
            let doc = corpus
                .document(id)
                .ok_or_else(|| CorpusError::SelectorUnsatisfiable(format!("no document `{id}`")))?;
            AlignedCorpus::new(format!("{}:{id}", corpus.name), vec![doc.clone()])
        }
        Selector::Pairs(n) => {
            let total = corpus.pair_count();
            if *n == 0 || *n > total {
                return Err(CorpusError::SelectorUnsatisfiable(format!("{n} pairs requested, corpus has {total}")));
            }
            let mut rng = match seed {
                Some(s) => ChaCha8Rng::seed_from_u64(s),
                None => ChaCha8Rng::from_os_rng(),
            };
            let chosen: HashSet<usize> = sample(&mut rng, total, *n).into_iter().collect();
            let mut docs = Vec::new();
            let mut position = 0;
            for doc in corpus.documents() {
                let picked: Vec<&ParagraphPair> = doc
                    .pairs()
                    .iter()
                    .filter(|_| {
                        position += 1;
                        chosen.contains(&(position - 1))
                    })
                    .collect();
                if picked.is_empty() {
                    continue;
                }
                let indices = picked.iter().map(|p| p.index.to_string()).collect::<Vec<_>>().join(",");
                let pairs = picked
                    .into_iter()
                    .enumerate()
                    .map(|(i, p)| ParagraphPair { index: i, ..p.clone() })
                    .collect();
                docs.push(AlignedDocument::new(doc.doc_id(), pairs)?.with_metadata("source_indices", indices));
            }
            AlignedCorpus::new(format!("{}:sample{n}", corpus.name), docs)
        }
    }
}
