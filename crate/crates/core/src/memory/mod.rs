//! Translation memory (TM) and proofreading memory (PM): persistence,
//! character-bigram similarity, top-k retrieval and physical-neighbour
//! context windows.

mod store;

use std::collections::HashSet;
use std::path::Path;

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::annotate::ErrTriplet;
use crate::document::{AlignedDocument, ParagraphPair};
use crate::text::fold_whitespace_lower;

pub use store::{JsonlStore, Stored, SCHEMA_VERSION};

pub const TM_FILE: &str = "tm.jsonl";
pub const PM_FILE: &str = "pm.jsonl";
pub const DEFAULT_PNS_RADIUS: usize = 2;
pub const DEFAULT_MAX_PNS_RADIUS: usize = 5;
pub const DEFAULT_PM_TOP_K: usize = 3;

#[derive(Debug, Error)]
pub enum MemoryError {
    #[error("store is full ({capacity} records)")]
    StorageFull { capacity: usize },
    #[error("i/o failure on {path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error("{path} line {line}: {reason}")]
    Corrupt { path: String, line: usize, reason: String },
    #[error("cannot encode record: {0}")]
    Encode(String),
    #[error("paragraph index {index} out of range for document of {len} paragraphs")]
    IndexOutOfRange { index: usize, len: usize },
    #[error("neighbour radius {radius} exceeds maximum {max}")]
    RadiusTooLarge { radius: usize, max: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TmStage {
    Draft,
    Final,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TmRecord {
    pub src: String,
    pub tgt: String,
    pub doc_id: String,
    pub paragraph_index: usize,
    pub stage: TmStage,
    pub created_at: DateTime<Utc>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PmRecord {
    pub triplet: ErrTriplet,
    pub doc_id: String,
    pub paragraph_index: usize,
    pub round: u32,
    pub created_at: DateTime<Utc>,
}

/// Records that can be ranked by similarity of their source text.
pub trait SimilarityKey {
    fn key_text(&self) -> &str;
    fn created_at(&self) -> DateTime<Utc>;
}

impl SimilarityKey for TmRecord {
    fn key_text(&self) -> &str {
        &self.src
    }
    fn created_at(&self) -> DateTime<Utc> {
        self.created_at
    }
}

impl SimilarityKey for PmRecord {
    fn key_text(&self) -> &str {
        &self.triplet.src
    }
    fn created_at(&self) -> DateTime<Utc> {
        self.created_at
    }
}

/// The TM and PM stores of one data directory.
#[derive(Debug)]
pub struct Memory {
    pub tm: JsonlStore<TmRecord>,
    pub pm: JsonlStore<PmRecord>,
}

impl Memory {
    pub fn in_memory() -> Self {
        Self { tm: JsonlStore::in_memory(), pm: JsonlStore::in_memory() }
    }

    /// Opens `tm.jsonl` and `pm.jsonl` under `data_dir`, creating them if needed.
    pub fn open(data_dir: impl AsRef<Path>) -> Result<Self, MemoryError> {
        let dir = data_dir.as_ref();
        Ok(Self { tm: JsonlStore::open(dir.join(TM_FILE))?, pm: JsonlStore::open(dir.join(PM_FILE))? })
    }
}

fn bigrams(text: &str) -> HashSet<(char, char)> {
    let folded: Vec<char> = fold_whitespace_lower(text).chars().collect();
    folded.windows(2).map(|w| (w[0], w[1])).collect()
}

fn dice(a: &HashSet<(char, char)>, b: &HashSet<(char, char)>) -> f64 {
    match (a.is_empty(), b.is_empty()) {
        (true, true) => 1.0,
        (true, false) | (false, true) => 0.0,
        _ => {
            let shared = a.intersection(b).count();
            2.0 * shared as f64 / (a.len() + b.len()) as f64
        }
    }
}

/// Dice coefficient over character-bigram sets of the lowercased,
/// whitespace-collapsed inputs.
pub fn bigram_dice(a: &str, b: &str) -> f64 {
    dice(&bigrams(a), &bigrams(b))
}

/// A retrieved record and its similarity to the query.
#[derive(Debug, Clone, PartialEq)]
pub struct Scored<'a, R> {
    pub score: f64,
    pub item: &'a Stored<R>,
}

/// Up to `top_k` records most similar to `query`, best first. Ties go to
/// the older record, then to the earlier insertion.
pub fn retrieve_similar<'a, R: SimilarityKey>(
    records: &'a [Stored<R>],
    query: &str,
    top_k: usize,
) -> Vec<Scored<'a, R>> {
    if top_k == 0 {
        return Vec::new();
    }
    let query = bigrams(query);
    let mut scored: Vec<Scored<'a, R>> = records
        .iter()
        .map(|item| Scored { score: dice(&query, &bigrams(item.record.key_text())), item })
        .collect();
    scored.sort_by(|x, y| {
        y.score
            .total_cmp(&x.score)
            .then_with(|| x.item.record.created_at().cmp(&y.item.record.created_at()))
            .then_with(|| x.item.id.cmp(&y.item.id))
    });
    scored.truncate(top_k);
    scored
}

/// Physical-neighbour window: `radius` paragraphs on each side.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct PnsConfig {
    pub radius: usize,
}

impl Default for PnsConfig {
    fn default() -> Self {
        Self { radius: DEFAULT_PNS_RADIUS }
    }
}

impl PnsConfig {
    pub fn new(radius: usize) -> Result<Self, MemoryError> {
        let cfg = Self { radius };
        cfg.validate(DEFAULT_MAX_PNS_RADIUS)?;
        Ok(cfg)
    }

    pub fn validate(&self, max: usize) -> Result<(), MemoryError> {
        if self.radius > max {
            return Err(MemoryError::RadiusTooLarge { radius: self.radius, max });
        }
        Ok(())
    }
}

/// Neighbours of paragraph `index`, ascending and excluding `index`.
/// Preceding neighbours keep whatever target text they carry; following
/// neighbours are returned source-only.
pub fn pns_context(doc: &AlignedDocument, index: usize, cfg: PnsConfig) -> Result<Vec<ParagraphPair>, MemoryError> {
    let len = doc.len();
    if index >= len {
        return Err(MemoryError::IndexOutOfRange { index, len });
    }
    let lo = index.saturating_sub(cfg.radius);
    let hi = (index + cfg.radius).min(len - 1);
    Ok((lo..=hi)
        .filter(|&i| i != index)
        .map(|i| {
            let mut pair = doc.pairs()[i].clone();
            if i > index {
                pair.target_text = None;
            }
            pair
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::document::{segment_paragraphs, Direction};
    use chrono::TimeZone;
    use proptest::prelude::*;

    #[test]
    fn dice_examples() {
        assert_eq!(bigram_dice("abcd", "abcd"), 1.0);
        assert_eq!(bigram_dice("night", "nacht"), 0.25);
        assert_eq!(bigram_dice("ab", "cd"), 0.0);
        assert_eq!(bigram_dice("", "a"), 1.0);
        assert_eq!(bigram_dice("", "ab"), 0.0);
        assert_eq!(bigram_dice("Night  ", "NIGHT"), 1.0);
    }

    fn ten_paragraphs() -> AlignedDocument {
        let text: Vec<String> = (0..10).map(|i| format!("p{i}")).collect();
        segment_paragraphs(&text.join("\n\n"), &Direction::default()).unwrap()
    }

    fn indices(pairs: &[ParagraphPair]) -> Vec<usize> {
        pairs.iter().map(|p| p.index).collect()
    }

    #[test]
    fn pns_windows() {
        let doc = ten_paragraphs();
        let cfg = PnsConfig::new(2).unwrap();
        assert_eq!(indices(&pns_context(&doc, 5, cfg).unwrap()), [3, 4, 6, 7]);
        assert_eq!(indices(&pns_context(&doc, 0, cfg).unwrap()), [1, 2]);
        assert_eq!(indices(&pns_context(&doc, 9, cfg).unwrap()), [7, 8]);
        assert!(pns_context(&doc, 0, PnsConfig { radius: 0 }).unwrap().is_empty());
        assert!(matches!(pns_context(&doc, 10, cfg), Err(MemoryError::IndexOutOfRange { index: 10, len: 10 })));
        assert!(PnsConfig::new(6).is_err());
    }

    #[test]
    fn pns_hides_following_targets() {
        let mut doc = ten_paragraphs();
        for i in 0..10 {
            doc.set_target(i, Some(format!("t{i}")));
        }
        let ctx = pns_context(&doc, 5, PnsConfig::default()).unwrap();
        let targets: Vec<_> = ctx.iter().map(|p| p.target_text.as_deref()).collect();
        assert_eq!(targets, [Some("t3"), Some("t4"), None, None]);
    }

    fn tm(src: &str, secs: i64) -> TmRecord {
        TmRecord {
            src: src.into(),
            tgt: String::new(),
            doc_id: "d".into(),
            paragraph_index: 0,
            stage: TmStage::Draft,
            created_at: Utc.timestamp_opt(secs, 0).unwrap(),
        }
    }

    #[test]
    fn retrieval_ranks_and_breaks_ties() {
        let mut s = JsonlStore::in_memory();
        assert!(retrieve_similar(&s.snapshot(), "x", 3).is_empty());
        s.append(tm("the court", 5)).unwrap();
        s.append(tm("the appeal", 3)).unwrap();
        s.append(tm("the appeal", 3)).unwrap();
        s.append(tm("the appeal", 1)).unwrap();
        let snap = s.snapshot();
        let got = retrieve_similar(&snap, "the appeal", 3);
        let ids: Vec<_> = got.iter().map(|r| r.item.id).collect();
        assert_eq!(ids, [4, 2, 3]);
        assert_eq!(got[0].score, 1.0);
    }

    proptest! {
        #[test]
        fn dice_is_symmetric_and_bounded(a in "[a-c ]{0,8}", b in "[a-c ]{0,8}") {
            let ab = bigram_dice(&a, &b);
            prop_assert_eq!(ab, bigram_dice(&b, &a));
            prop_assert!((0.0..=1.0).contains(&ab));
            prop_assert_eq!(ab == 1.0, bigrams(&a) == bigrams(&b));
        }

        #[test]
        fn pns_bounds(len in 1usize..15, idx in 0usize..15, k in 0usize..6) {
            let text: Vec<String> = (0..len).map(|i| format!("p{i}")).collect();
            let doc = segment_paragraphs(&text.join("\n\n"), &Direction::default()).unwrap();
            match pns_context(&doc, idx, PnsConfig { radius: k }) {
                Ok(ctx) => {
                    prop_assert!(idx < len);
                    prop_assert!(ctx.len() <= 2 * k);
                    prop_assert!(ctx.iter().all(|p| p.index != idx && p.index < len));
                    prop_assert!(ctx.windows(2).all(|w| w[0].index < w[1].index));
                }
                Err(_) => prop_assert!(idx >= len),
            }
        }

        #[test]
        fn retrieval_is_ranked_and_complete(
            records in prop::collection::vec(("[ab ]{0,6}", 0i64..3), 0..30),
            query in "[ab ]{0,6}",
            k in 0usize..8,
        ) {
            let mut s = JsonlStore::in_memory();
            for (src, secs) in &records {
                s.append(tm(src, *secs)).unwrap();
            }
            let snap = s.snapshot();
            let got = retrieve_similar(&snap, &query, k);
            prop_assert_eq!(got.len(), k.min(records.len()));
            prop_assert!(got.windows(2).all(|w| w[0].score >= w[1].score));
            let cutoff = got.last().map_or(f64::INFINITY, |g| g.score);
            let ids: Vec<u64> = got.iter().map(|g| g.item.id).collect();
            for item in snap.iter().filter(|r| !ids.contains(&r.id)) {
                prop_assert!(bigram_dice(&query, &item.record.src) <= cutoff);
            }
        }
    }
}
