//! Terminology glossaries: loading, source-side term matching and a
//! post-hoc consistency check on translations.

use std::collections::{BTreeMap, HashMap, HashSet};
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::text::is_cjk;

#[derive(Debug, Error)]
pub enum GlossaryError {
    #[error("glossary line {line}: {reason}")]
    Parse { line: u64, reason: String },
    #[error("cannot read glossary {path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error("unsupported glossary format `{0}` (expected tsv or csv)")]
    UnknownFormat(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GlossaryFormat {
    Tsv,
    Csv,
}

impl GlossaryFormat {
    fn delimiter(self) -> u8 {
        match self {
            GlossaryFormat::Tsv => b'\t',
            GlossaryFormat::Csv => b',',
        }
    }

    /// Guesses the format from a file extension, defaulting to TSV.
    pub fn from_path(path: &Path) -> Self {
        match path.extension().and_then(|e| e.to_str()) {
            Some(ext) if ext.eq_ignore_ascii_case("csv") => GlossaryFormat::Csv,
            _ => GlossaryFormat::Tsv,
        }
    }
}

impl std::str::FromStr for GlossaryFormat {
    type Err = GlossaryError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "tsv" => Ok(GlossaryFormat::Tsv),
            "csv" => Ok(GlossaryFormat::Csv),
            _ => Err(GlossaryError::UnknownFormat(s.to_string())),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct GlossaryEntry {
    pub source_term: String,
    pub target_term: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub domain_label: Option<String>,
}

/// A match of a glossary source term inside a paragraph, with character
/// offsets `start..end` into the original text.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct TermMatch {
    pub entry: GlossaryEntry,
    pub start: usize,
    pub end: usize,
    /// Every accepted rendering for this source term.
    pub targets: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Violation {
    pub entry: GlossaryEntry,
    pub reason: String,
}

#[derive(Debug, Default)]
struct TrieNode {
    children: HashMap<char, TrieNode>,
    /// Normalized term ending here.
    terminal: Option<String>,
}

/// Immutable glossary snapshot with a character trie for longest-match lookup.
#[derive(Debug, Default)]
pub struct Glossary {
    entries: Vec<GlossaryEntry>,
    by_source: BTreeMap<String, Vec<usize>>,
    trie: TrieNode,
}

impl Glossary {
    pub fn new(entries: impl IntoIterator<Item = GlossaryEntry>) -> Self {
        let mut glossary = Glossary::default();
        let mut seen = HashSet::new();
        for entry in entries {
            let key = (entry.source_term.clone(), entry.target_term.clone());
            if !seen.insert(key) {
                continue;
            }
            let normalized: Vec<char> = normalize(&entry.source_term).into_iter().map(|(c, _)| c).collect();
            if normalized.is_empty() {
                continue;
            }
            let folded: String = normalized.iter().collect();
            let mut node = &mut glossary.trie;
            for c in &normalized {
                node = node.children.entry(*c).or_default();
            }
            node.terminal = Some(folded.clone());
            glossary.by_source.entry(folded).or_default().push(glossary.entries.len());
            glossary.entries.push(entry);
        }
        glossary
    }

    /// Loads TSV or CSV with columns `source, target[, domain]`. A first row
    /// whose first cell is `source` is treated as a header.
    pub fn load(content: &str, format: GlossaryFormat) -> Result<Self, GlossaryError> {
        let mut rdr = csv::ReaderBuilder::new()
            .has_headers(false)
            .flexible(true)
            .delimiter(format.delimiter())
            .quoting(format == GlossaryFormat::Csv)
            .from_reader(content.as_bytes());
        let mut entries = Vec::new();
        for (i, row) in rdr.records().enumerate() {
            let row = row.map_err(|e| GlossaryError::Parse {
                line: e.position().map_or(0, |p| p.line()),
                reason: e.to_string(),
            })?;
            let line = row.position().map_or(i as u64 + 1, |p| p.line());
            if row.iter().all(|c| c.trim().is_empty()) {
                continue;
            }
            if i == 0 && row.get(0).is_some_and(|c| c.trim().eq_ignore_ascii_case("source")) {
                continue;
            }
            if row.len() < 2 || row.len() > 3 {
                return Err(GlossaryError::Parse {
                    line,
                    reason: format!("expected 2 or 3 columns, found {}", row.len()),
                });
            }
            let source_term = row[0].trim().to_string();
            let target_term = row[1].trim().to_string();
            if source_term.is_empty() || target_term.is_empty() {
                return Err(GlossaryError::Parse { line, reason: "empty source or target term".into() });
            }
            let domain_label = row.get(2).map(str::trim).filter(|d| !d.is_empty()).map(str::to_string);
            entries.push(GlossaryEntry { source_term, target_term, domain_label });
        }
        Ok(Self::new(entries))
    }

    pub fn load_path(path: &Path) -> Result<Self, GlossaryError> {
        let content = std::fs::read_to_string(path)
            .map_err(|source| GlossaryError::Io { path: path.display().to_string(), source })?;
        Self::load(&content, GlossaryFormat::from_path(path))
    }

    pub fn entries(&self) -> &[GlossaryEntry] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Greedy left-to-right longest match over case-folded,
    /// whitespace-collapsed text. Matched regions are consumed.
    pub fn match_terms(&self, source_text: &str) -> Vec<TermMatch> {
        if self.entries.is_empty() {
            return Vec::new();
        }
        let original: Vec<char> = source_text.chars().collect();
        let norm = normalize(source_text);
        let mut matches = Vec::new();
        let mut i = 0;
        while i < norm.len() {
            let mut node = &self.trie;
            let mut best: Option<(usize, &str)> = None;
            for (j, (c, _)) in norm.iter().enumerate().skip(i) {
                match node.children.get(c) {
                    Some(next) => node = next,
                    None => break,
                }
                if let Some(term) = &node.terminal {
                    if on_boundary(&original, norm[i].1, norm[j].1) {
                        best = Some((j, term));
                    }
                }
            }
            match best {
                Some((j, term)) => {
                    let ids = &self.by_source[term];
                    let entry = self.entries[ids[0]].clone();
                    let targets = ids.iter().map(|&k| self.entries[k].target_term.clone()).collect();
                    let start = norm[i].1;
                    let end = norm[j].1 + 1;
                    matches.push(TermMatch { entry, start, end, targets });
                    i = j + 1;
                }
                None => i += 1,
            }
        }
        matches
    }
}

/// Reports matched entries none of whose renderings appear in `translation`.
/// Each source term is reported at most once.
pub fn check_consistency(translation: &str, matches: &[TermMatch]) -> Vec<Violation> {
    let mut reported = HashSet::new();
    let mut out = Vec::new();
    for m in matches {
        if m.targets.iter().any(|t| translation.contains(t.as_str())) {
            continue;
        }
        if reported.insert(m.entry.source_term.to_lowercase()) {
            out.push(Violation {
                entry: m.entry.clone(),
                reason: format!("`{}` is not rendered as {}", m.entry.source_term, m.targets.join(" / ")),
            });
        }
    }
    out
}

/// Case-folds and collapses whitespace runs to one space, remembering for
/// each output character the index of the original character it came from.
fn normalize(text: &str) -> Vec<(char, usize)> {
    let mut out = Vec::new();
    let mut pending_space: Option<usize> = None;
    for (idx, c) in text.chars().enumerate() {
        if c.is_whitespace() {
            pending_space.get_or_insert(idx);
            continue;
        }
        if let Some(sp) = pending_space.take() {
            if !out.is_empty() {
                out.push((' ', sp));
            }
        }
        for lc in c.to_lowercase() {
            out.push((lc, idx));
        }
    }
    out
}

/// A match may not split a word: when an edge character is alphanumeric and
/// non-CJK, its outer neighbour must not be.
fn on_boundary(original: &[char], start: usize, last: usize) -> bool {
    let wordish = |c: char| c.is_alphanumeric() && !is_cjk(c);
    let left_ok = start == 0 || !(wordish(original[start]) && wordish(original[start - 1]));
    let right_ok = last + 1 >= original.len() || !(wordish(original[last]) && wordish(original[last + 1]));
    left_ok && right_ok
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn entry(s: &str, t: &str) -> GlossaryEntry {
        GlossaryEntry { source_term: s.into(), target_term: t.into(), domain_label: None }
    }

    fn cfa() -> Glossary {
        Glossary::new([entry("Court of Final Appeal", "終審法院"), entry("appeal", "上訴")])
    }

    #[test]
    fn load_tsv_and_dedup() {
        let g = Glossary::load("Court of Final Appeal\t終審法院", GlossaryFormat::Tsv).unwrap();
        assert_eq!(g.len(), 1);
        let g = Glossary::load("a\tb\na\tb\n", GlossaryFormat::Tsv).unwrap();
        assert_eq!(g.len(), 1);
        let g = Glossary::load("source\ttarget\ndomain\na\tb\tcriminal\na\tc\n", GlossaryFormat::Tsv);
        assert!(matches!(g, Err(GlossaryError::Parse { line: 2, .. })));
    }

    #[test]
    fn load_header_csv_and_conflicts() {
        let g = Glossary::load("source,target,domain\nbail,保釋,criminal\nbail,擔保,\n", GlossaryFormat::Csv).unwrap();
        assert_eq!(g.len(), 2);
        assert_eq!(g.entries()[0].domain_label.as_deref(), Some("criminal"));
        assert_eq!(g.entries()[1].domain_label, None);
    }

    #[test]
    fn one_column_row_reports_its_line() {
        let err = Glossary::load("a\tb\nlonely\n", GlossaryFormat::Tsv).unwrap_err();
        assert!(matches!(err, GlossaryError::Parse { line: 2, .. }), "{err}");
    }

    #[test]
    fn longest_match_wins() {
        let m = cfa().match_terms("the Court of Final Appeal ruled");
        assert_eq!(m.len(), 1);
        assert_eq!(m[0].entry.source_term, "Court of Final Appeal");
        assert_eq!((m[0].start, m[0].end), (4, 25));
    }

    #[test]
    fn empty_glossary_matches_nothing() {
        assert!(Glossary::default().match_terms("anything").is_empty());
    }

    #[test]
    fn repeated_term_matches_twice() {
        let g = Glossary::new([entry("appeal", "上訴")]);
        let m = g.match_terms("appeal appeal");
        let spans: Vec<_> = m.iter().map(|m| (m.start, m.end)).collect();
        assert_eq!(spans, [(0, 6), (7, 13)]);
    }

    #[test]
    fn case_and_whitespace_insensitive() {
        let m = cfa().match_terms("THE court  of\nfinal APPEAL");
        assert_eq!(m.len(), 1);
        assert_eq!((m[0].start, m[0].end), (4, 26));
    }

    #[test]
    fn no_match_inside_words() {
        let g = Glossary::new([entry("appeal", "上訴")]);
        assert!(g.match_terms("appealing").is_empty());
        assert_eq!(g.match_terms("(appeal).").len(), 1);
    }

    #[test]
    fn cjk_terms_match_without_boundaries() {
        let g = Glossary::new([entry("終審法院", "Court of Final Appeal")]);
        let m = g.match_terms("香港終審法院裁定");
        assert_eq!((m[0].start, m[0].end), (2, 6));
    }

    #[test]
    fn consistency_checks() {
        let g = cfa();
        let m = g.match_terms("the Court of Final Appeal ruled");
        assert!(check_consistency("終審法院裁定", &m).is_empty());
        let v = check_consistency("法院裁定", &m);
        assert_eq!(v.len(), 1);
        assert_eq!(v[0].entry.source_term, "Court of Final Appeal");
        assert!(check_consistency("anything", &[]).is_empty());
    }

    #[test]
    fn any_synonym_satisfies_consistency() {
        let g = Glossary::new([entry("bail", "保釋"), entry("bail", "擔保")]);
        let m = g.match_terms("bail granted");
        assert_eq!(m[0].targets, ["保釋", "擔保"]);
        assert!(check_consistency("准予擔保", &m).is_empty());
    }

    fn vocabulary() -> Glossary {
        Glossary::new([
            entry("ab", "甲"),
            entry("ab c", "甲丙"),
            entry("b", "乙"),
            entry("c a", "丙甲"),
            entry("法院", "court"),
        ])
    }

    fn folded(s: &str) -> String {
        s.split_whitespace().collect::<Vec<_>>().join(" ").to_lowercase()
    }

    proptest! {
        #[test]
        fn matches_are_sorted_disjoint_and_faithful(text in "[abcAB 法院.]{0,30}", translation in "[甲乙丙]{0,6}") {
            let chars: Vec<char> = text.chars().collect();
            let matches = vocabulary().match_terms(&text);
            for w in matches.windows(2) {
                prop_assert!(w[0].end <= w[1].start);
            }
            for m in &matches {
                prop_assert!(m.start < m.end && m.end <= chars.len());
                let found: String = chars[m.start..m.end].iter().collect();
                prop_assert_eq!(folded(&found), folded(&m.entry.source_term));
            }
            for v in check_consistency(&translation, &matches) {
                prop_assert!(matches.iter().any(|m| m.entry == v.entry));
            }
        }

        #[test]
        fn longer_term_wins_at_the_same_start(
            pre in "[ .,]{0,3}",
            short in "[a-z]{1,4}",
            tail in "[a-z]{1,4}",
            post in "[ .,]{0,3}",
        ) {
            let long = format!("{short} {tail}");
            let g = Glossary::new([entry(&short, "短"), entry(&long, "長")]);
            let text = format!("{pre}{long}{post}");
            let matches = g.match_terms(&text);
            prop_assert_eq!(matches.len(), 1);
            prop_assert_eq!(&matches[0].entry.source_term, &long);
            prop_assert_eq!(matches[0].start, pre.chars().count());
        }
    }
}
