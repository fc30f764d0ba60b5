use crate::text::is_cjk;

/// Pluggable token counter, for deployments with an exact tokenizer.
pub trait Tokenizer: Send + Sync {
    fn count(&self, text: &str) -> u64;
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub enum TokenScheme {
    /// One token per CJK character plus one per four other characters.
    #[default]
    Heuristic,
}

#[derive(Debug, Clone, Copy, Default)]
pub struct HeuristicTokenizer;

impl Tokenizer for HeuristicTokenizer {
    fn count(&self, text: &str) -> u64 {
        let (cjk, other) = text.chars().fold((0u64, 0u64), |(cjk, other), c| {
            if is_cjk(c) {
                (cjk + 1, other)
            } else {
                (cjk, other + 1)
            }
        });
        cjk + other.div_ceil(4)
    }
}

pub fn estimate_tokens(text: &str, scheme: TokenScheme) -> u64 {
    match scheme {
        TokenScheme::Heuristic => HeuristicTokenizer.count(text),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn heuristic_examples() {
        assert_eq!(estimate_tokens("", TokenScheme::Heuristic), 0);
        assert_eq!(estimate_tokens("abcdefgh", TokenScheme::Heuristic), 2);
        assert_eq!(estimate_tokens("終審院abcd", TokenScheme::Heuristic), 4);
        assert_eq!(estimate_tokens("a", TokenScheme::Heuristic), 1);
    }

    proptest! {
        #[test]
        fn monotone_under_append(a in "\\PC{0,40}", b in "\\PC{0,40}") {
            let base = estimate_tokens(&a, TokenScheme::Heuristic);
            let longer = estimate_tokens(&format!("{a}{b}"), TokenScheme::Heuristic);
            prop_assert!(longer >= base);
            if !a.is_empty() {
                prop_assert!(base >= 1);
            }
        }
    }
}
