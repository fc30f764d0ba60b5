//! Proofread codes: the three-category error taxonomy used by annotators.
//!
//! The built-in set has 31 codes. Deployments can load an extended set from
//! a CSV file with the header `code,category,description`.

use std::collections::HashMap;
use std::fmt;
use std::io::Read;
use std::str::FromStr;
use std::sync::LazyLock;

use serde::{Deserialize, Serialize};

use crate::error::CoreError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Category {
    Accuracy,
    Grammar,
    UsageAndStyle,
}

impl Category {
    pub const ALL: [Category; 3] = [Category::Accuracy, Category::Grammar, Category::UsageAndStyle];

    pub fn label(self) -> &'static str {
        match self {
            Category::Accuracy => "Accuracy",
            Category::Grammar => "Grammar",
            Category::UsageAndStyle => "Usage and style",
        }
    }
}

impl fmt::Display for Category {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

impl FromStr for Category {
    type Err = CoreError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let folded: String = s
            .chars()
            .filter(|c| c.is_alphanumeric())
            .flat_map(char::to_lowercase)
            .collect();
        match folded.as_str() {
            "accuracy" => Ok(Category::Accuracy),
            "grammar" => Ok(Category::Grammar),
            "usageandstyle" | "usagestyle" | "style" => Ok(Category::UsageAndStyle),
            _ => Err(CoreError::UnknownCategory(s.to_string())),
        }
    }
}

/// One entry of the taxonomy, e.g. `CW` (Accuracy, "Choice of word. ...").
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ProofreadCode {
    pub code: String,
    pub category: Category,
    pub description: String,
}

impl fmt::Display for ProofreadCode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.code)
    }
}

const BUILTIN: &[(&str, Category, &str)] = &[
    ("CW", Category::Accuracy, "Choice of word. The word or expression is not a good choice."),
    ("IF", Category::Accuracy, "Information structure not preserved."),
    (
        "MC",
        Category::Accuracy,
        "Meaning has been changed because of inappropriate restructuring, e.g., changing the passive to active or vice versa.",
    ),
    (
        "MT",
        Category::Accuracy,
        "Mistranslation due to inadequate comprehension or misinterpretation of the source text.",
    ),
    ("NA", Category::Accuracy, "The translation conveys a different meaning from that of the source text."),
    ("NC", Category::Accuracy, "Meaning not clear, e.g., because of ambiguity, vagueness or syntactic problems."),
    ("OM", Category::Accuracy, "Omission. Part of the original has been left untranslated."),
    ("OT", Category::Accuracy, "Over-translation. Too much has been read into the source text."),
    ("TL", Category::Accuracy, "Too literal, affecting comprehensibility."),
    ("UT", Category::Accuracy, "Under-translation. Meaning is not adequately captured in translation."),
    ("Art", Category::Grammar, "Article."),
    ("Det", Category::Grammar, "Determiner."),
    ("MD", Category::Grammar, "Modality."),
    ("NB", Category::Grammar, "Number."),
    ("PN", Category::Grammar, "Punctuation."),
    ("Prep", Category::Grammar, "Wrong preposition."),
    ("PS", Category::Grammar, "Part of speech."),
    ("SP", Category::Grammar, "Spelling or wrong character."),
    ("ST", Category::Grammar, "The sentence or part of the sentence is ill-formed or ambiguous."),
    ("SV", Category::Grammar, "Subject verb agreement."),
    ("TN", Category::Grammar, "Tense problem."),
    ("WO", Category::Grammar, "Word order."),
    ("CL", Category::UsageAndStyle, "Collocation problem."),
    ("CN", Category::UsageAndStyle, "The word or expression has connotation not appropriate in the context."),
    ("CO", Category::UsageAndStyle, "Connective problem, e.g., inappropriate connectives."),
    ("IC", Category::UsageAndStyle, "Inconsistent use of a word; or incoherence between clauses or sentences."),
    ("ID", Category::UsageAndStyle, "Idiomaticity, i.e., unidiomatic expression."),
    ("RF", Category::UsageAndStyle, "Reference problem, e.g., ambiguous use of a pronoun."),
    ("RN", Category::UsageAndStyle, "Redundancy: the word or expression should be deleted."),
    (
        "SL",
        Category::UsageAndStyle,
        "Stylistic problems, e.g., the word or expression is not of an appropriate style.",
    ),
    ("TS", Category::UsageAndStyle, "Transition problems: sentences not well connected; bad language flow."),
];

static BUILTIN_TAXONOMY: LazyLock<Taxonomy> = LazyLock::new(|| {
    Taxonomy::from_entries(BUILTIN.iter().map(|&(code, category, description)| ProofreadCode {
        code: code.to_string(),
        category,
        description: description.to_string(),
    }))
    .expect("built-in taxonomy is well formed")
});

/// An ordered set of proofread codes with case-insensitive lookup.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Taxonomy {
    codes: Vec<ProofreadCode>,
    by_folded: HashMap<String, usize>,
}

impl Taxonomy {
    /// The default 31-code set.
    pub fn builtin() -> &'static Taxonomy {
        &BUILTIN_TAXONOMY
    }

    pub fn from_entries(entries: impl IntoIterator<Item = ProofreadCode>) -> Result<Self, CoreError> {
        let mut codes = Vec::new();
        let mut by_folded = HashMap::new();
        for entry in entries {
            let code = entry.code.trim();
            let valid_len = (2..=4).contains(&code.chars().count());
            if !valid_len || !code.chars().all(|c| c.is_ascii_alphabetic()) {
                return Err(CoreError::InvalidCodeMnemonic(entry.code.clone()));
            }
            let folded = code.to_ascii_uppercase();
            if by_folded.insert(folded, codes.len()).is_some() {
                return Err(CoreError::DuplicateCode(code.to_string()));
            }
            codes.push(ProofreadCode { code: code.to_string(), ..entry });
        }
        Ok(Self { codes, by_folded })
    }

    /// Reads a taxonomy from CSV with header `code,category,description`.
    pub fn from_csv_reader<R: Read>(reader: R) -> Result<Self, CoreError> {
        let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
        let headers = rdr.headers().map_err(|e| CoreError::TaxonomyCsv { line: 1, reason: e.to_string() })?;
        let expected = ["code", "category", "description"];
        if headers.len() != 3 || headers.iter().zip(expected).any(|(h, e)| !h.eq_ignore_ascii_case(e)) {
            return Err(CoreError::TaxonomyCsv {
                line: 1,
                reason: "expected header `code,category,description`".into(),
            });
        }
        let mut entries = Vec::new();
        for row in rdr.records() {
            let row = row.map_err(|e| CoreError::TaxonomyCsv {
                line: e.position().map_or(0, |p| p.line()),
                reason: e.to_string(),
            })?;
            let line = row.position().map_or(0, |p| p.line());
            let category = row[1]
                .parse::<Category>()
                .map_err(|e| CoreError::TaxonomyCsv { line, reason: e.to_string() })?;
            entries.push(ProofreadCode {
                code: row[0].to_string(),
                category,
                description: row[2].to_string(),
            });
        }
        Self::from_entries(entries)
    }

    pub fn from_csv_str(content: &str) -> Result<Self, CoreError> {
        Self::from_csv_reader(content.as_bytes())
    }

    /// Looks up a mnemonic. Matching ignores case; the returned entry keeps
    /// its canonical spelling (`prep` resolves to `Prep`).
    pub fn validate_code(&self, raw: &str) -> Result<&ProofreadCode, CoreError> {
        let trimmed = raw.trim();
        if trimmed.is_empty() {
            return Err(CoreError::UnknownCode(raw.to_string()));
        }
        self.by_folded
            .get(&trimmed.to_ascii_uppercase())
            .map(|&i| &self.codes[i])
            .ok_or_else(|| CoreError::UnknownCode(raw.to_string()))
    }

    pub fn contains(&self, raw: &str) -> bool {
        self.validate_code(raw).is_ok()
    }

    /// Codes of one category, in table order.
    pub fn codes_by_category(&self, category: Category) -> Vec<&ProofreadCode> {
        self.codes.iter().filter(|c| c.category == category).collect()
    }

    pub fn codes(&self) -> &[ProofreadCode] {
        &self.codes
    }

    pub fn len(&self) -> usize {
        self.codes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.codes.is_empty()
    }

    /// Multi-line listing used in annotator and proofreader prompts.
    pub fn digest(&self) -> String {
        let mut out = String::new();
        for category in Category::ALL {
            let codes = self.codes_by_category(category);
            if codes.is_empty() {
                continue;
            }
            out.push_str(category.label());
            out.push_str(":\n");
            for code in codes {
                out.push_str(&format!("- {}: {}\n", code.code, code.description));
            }
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn builtin_cardinalities() {
        let t = Taxonomy::builtin();
        assert_eq!(t.len(), 31);
        assert_eq!(t.codes_by_category(Category::Accuracy).len(), 10);
        assert_eq!(t.codes_by_category(Category::Grammar).len(), 12);
        assert_eq!(t.codes_by_category(Category::UsageAndStyle).len(), 9);
    }

    #[test]
    fn validate_known_codes() {
        let t = Taxonomy::builtin();
        let cw = t.validate_code("CW").unwrap();
        assert_eq!(cw.category, Category::Accuracy);
        assert_eq!(cw.description, "Choice of word. The word or expression is not a good choice.");
        let wo = t.validate_code("WO").unwrap();
        assert_eq!((wo.category, wo.description.as_str()), (Category::Grammar, "Word order."));
        assert!(matches!(t.validate_code("XQ"), Err(CoreError::UnknownCode(c)) if c == "XQ"));
        assert!(t.validate_code("").is_err());
    }

    #[test]
    fn mixed_case_codes_resolve_to_canonical_spelling() {
        let t = Taxonomy::builtin();
        assert_eq!(t.validate_code("PREP").unwrap().code, "Prep");
        assert_eq!(t.validate_code("art").unwrap().code, "Art");
        assert_eq!(t.validate_code("det").unwrap().code, "Det");
        assert_eq!(t.validate_code("cw").unwrap().code, "CW");
    }

    #[test]
    fn category_order_follows_table() {
        let t = Taxonomy::builtin();
        let acc = t.codes_by_category(Category::Accuracy);
        assert_eq!(acc.first().unwrap().code, "CW");
        assert_eq!(acc.last().unwrap().code, "UT");
        assert!(t.codes_by_category(Category::UsageAndStyle).iter().any(|c| c.code == "SL"));
    }

    #[test]
    fn round_trip_every_code() {
        let t = Taxonomy::builtin();
        for c in t.codes() {
            assert_eq!(t.validate_code(&c.code).unwrap(), c);
        }
    }

    #[test]
    fn csv_extension() {
        let csv = "code,category,description\nCW,Accuracy,Choice of word.\nLEG,Usage and style,\"Legal register, formal\"\n";
        let t = Taxonomy::from_csv_str(csv).unwrap();
        assert_eq!(t.len(), 2);
        assert_eq!(t.validate_code("leg").unwrap().description, "Legal register, formal");
        assert_eq!(t.validate_code("LEG").unwrap().category, Category::UsageAndStyle);
    }

    #[test]
    fn csv_errors() {
        assert!(matches!(
            Taxonomy::from_csv_str("a,b,c\nCW,Accuracy,x\n"),
            Err(CoreError::TaxonomyCsv { line: 1, .. })
        ));
        assert!(matches!(
            Taxonomy::from_csv_str("code,category,description\nCW,Bogus,x\n"),
            Err(CoreError::TaxonomyCsv { line: 2, .. })
        ));
        assert!(matches!(
            Taxonomy::from_csv_str("code,category,description\nCW,Accuracy,x\ncw,Grammar,y\n"),
            Err(CoreError::DuplicateCode(_))
        ));
    }

    #[test]
    fn digest_lists_every_mnemonic() {
        let digest = Taxonomy::builtin().digest();
        for c in Taxonomy::builtin().codes() {
            assert!(digest.contains(&format!("- {}:", c.code)));
        }
    }

    proptest! {
        #[test]
        fn any_casing_resolves_to_the_canonical_entry(idx in 0usize..31, mask in any::<u8>()) {
            let tax = Taxonomy::builtin();
            let canonical = &tax.codes()[idx];
            let mixed: String = canonical
                .code
                .chars()
                .enumerate()
                .map(|(i, c)| if mask & (1 << (i % 8)) != 0 { c.to_ascii_lowercase() } else { c.to_ascii_uppercase() })
                .collect();
            prop_assert_eq!(tax.validate_code(&mixed).unwrap(), canonical);
        }

        #[test]
        fn strings_outside_the_table_are_rejected(raw in "[A-Za-z]{1,5}") {
            let tax = Taxonomy::builtin();
            let known = tax.codes().iter().any(|c| c.code.eq_ignore_ascii_case(&raw));
            prop_assert_eq!(tax.validate_code(&raw).is_ok(), known);
        }
    }
}
