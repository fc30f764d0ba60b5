//! Weighted human-evaluation scoring (accuracy, coherence, style), score
//! aggregation and relative improvements, plus an automated-scorer client.
//!
//! Scores are generic over the float type; `f64` aliases live at the crate
//! root.

mod report;
mod scorer;

use num_traits::Float;
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use report::{
    parse_scores_csv, render_leaderboard, render_report, render_weighted, report_to_csv, system_reports, Improvement, LeaderboardEntry,
    ScoreRow, ShotMode, SystemReport,
};
pub use scorer::{score_external, FixedScorer, HttpScorer, Scorer, ScoreRequest, ScoreResponse};

pub const SCORE_MAX: f64 = 10.0;
const WEIGHT_SUM_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EvalError {
    #[error("weights must be non-negative and sum to 1 (got {alpha}, {beta}, {gamma})")]
    InvalidWeights { alpha: f64, beta: f64, gamma: f64 },
    #[error("score {dimension}={value} is outside [0, 10]")]
    ScoreOutOfRange { dimension: char, value: f64 },
    #[error("baseline must be positive")]
    ZeroBaseline,
    #[error("no scores to aggregate")]
    EmptyInput,
    #[error("unknown preset `{0}`")]
    UnknownPreset(String),
    #[error("score file line {line}: {reason}")]
    Csv { line: u64, reason: String },
    #[error("unknown system `{0}`")]
    UnknownSystem(String),
    #[error("scorer unavailable: {0}")]
    ScorerUnavailable(String),
    #[error("malformed score: {0}")]
    MalformedScore(String),
}

fn to_f64<T: Float>(v: T) -> f64 {
    v.to_f64().unwrap_or(f64::NAN)
}

fn lit<T: Float>(v: f64) -> T {
    T::from(v).expect("float literal representable")
}

/// Per-dimension scores on the 0–10 scale.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawScores<T>", bound(deserialize = "T: Float + Deserialize<'de>"))]
pub struct DimensionScores<T> {
    #[serde(rename = "A")]
    a: T,
    #[serde(rename = "C")]
    c: T,
    #[serde(rename = "S")]
    s: T,
}

#[derive(Deserialize)]
struct RawScores<T> {
    #[serde(rename = "A")]
    a: T,
    #[serde(rename = "C")]
    c: T,
    #[serde(rename = "S")]
    s: T,
}

impl<T: Float> TryFrom<RawScores<T>> for DimensionScores<T> {
    type Error = EvalError;

    fn try_from(raw: RawScores<T>) -> Result<Self, Self::Error> {
        Self::new(raw.a, raw.c, raw.s)
    }
}

impl<T: Float> DimensionScores<T> {
    pub fn new(a: T, c: T, s: T) -> Result<Self, EvalError> {
        let max = lit::<T>(SCORE_MAX);
        for (dimension, value) in [('A', a), ('C', c), ('S', s)] {
            if !(value >= T::zero() && value <= max) {
                return Err(EvalError::ScoreOutOfRange { dimension, value: to_f64(value) });
            }
        }
        Ok(Self { a, c, s })
    }

    pub fn accuracy(&self) -> T {
        self.a
    }

    pub fn coherence(&self) -> T {
        self.c
    }

    pub fn style(&self) -> T {
        self.s
    }
}

/// Weights for accuracy, coherence and style.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct WeightVector<T> {
    alpha: T,
    beta: T,
    gamma: T,
}

impl<T: Float> WeightVector<T> {
    pub fn new(alpha: T, beta: T, gamma: T) -> Result<Self, EvalError> {
        let sum = alpha + beta + gamma;
        let tolerance = lit::<T>(WEIGHT_SUM_TOLERANCE).max(T::epsilon() * lit(4.0));
        let non_negative = alpha >= T::zero() && beta >= T::zero() && gamma >= T::zero();
        let drift = (sum - T::one()).abs();
        if !non_negative || drift.is_nan() || drift > tolerance {
            return Err(EvalError::InvalidWeights { alpha: to_f64(alpha), beta: to_f64(beta), gamma: to_f64(gamma) });
        }
        Ok(Self { alpha, beta, gamma })
    }

    pub fn preset(preset: AcsPreset) -> Self {
        let (a, b, g) = preset.weights();
        Self { alpha: lit(a), beta: lit(b), gamma: lit(g) }
    }

    pub fn alpha(&self) -> T {
        self.alpha
    }

    pub fn beta(&self) -> T {
        self.beta
    }

    pub fn gamma(&self) -> T {
        self.gamma
    }
}

impl<T: Float> Default for WeightVector<T> {
    fn default() -> Self {
        Self::preset(AcsPreset::default())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Default, Serialize, Deserialize)]
pub enum AcsPreset {
    #[serde(rename = "ACS1")]
    Acs1,
    #[default]
    #[serde(rename = "ACS2")]
    Acs2,
    #[serde(rename = "ACS3")]
    Acs3,
}

impl AcsPreset {
    pub const ALL: [AcsPreset; 3] = [AcsPreset::Acs1, AcsPreset::Acs2, AcsPreset::Acs3];

    pub fn weights(self) -> (f64, f64, f64) {
        match self {
            AcsPreset::Acs1 => (0.7, 0.2, 0.1),
            AcsPreset::Acs2 => (0.6, 0.3, 0.1),
            AcsPreset::Acs3 => (0.5, 0.3, 0.2),
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            AcsPreset::Acs1 => "ACS1",
            AcsPreset::Acs2 => "ACS2",
            AcsPreset::Acs3 => "ACS3",
        }
    }
}

impl std::str::FromStr for AcsPreset {
    type Err = EvalError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let folded: String = s.chars().filter(|c| !c.is_whitespace() && *c != '_').collect();
        AcsPreset::ALL
            .into_iter()
            .find(|p| p.label().eq_ignore_ascii_case(&folded))
            .ok_or_else(|| EvalError::UnknownPreset(s.to_string()))
    }
}

/// `alpha*A + beta*C + gamma*S`, unrounded.
pub fn acs<T: Float>(scores: &DimensionScores<T>, w: &WeightVector<T>) -> T {
    w.alpha * scores.a + w.beta * scores.c + w.gamma * scores.s
}

/// Percentage change of `candidate` over `baseline`.
pub fn relative_improvement<T: Float>(candidate: T, baseline: T) -> Result<T, EvalError> {
    if baseline.is_nan() || baseline <= T::zero() {
        return Err(EvalError::ZeroBaseline);
    }
    Ok(lit::<T>(100.0) * (candidate - baseline) / baseline)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct AggregateReport<T> {
    pub segments: usize,
    pub mean: DimensionScores<T>,
    pub acs: T,
}

/// Means per dimension and the weighted score of those means.
pub fn aggregate<T: Float>(per_segment: &[DimensionScores<T>], w: &WeightVector<T>) -> Result<AggregateReport<T>, EvalError> {
    if per_segment.is_empty() {
        return Err(EvalError::EmptyInput);
    }
    let n = T::from(per_segment.len()).ok_or(EvalError::EmptyInput)?;
    let sum = per_segment.iter().fold((T::zero(), T::zero(), T::zero()), |(a, c, s), x| (a + x.a, c + x.c, s + x.s));
    let mean = DimensionScores { a: sum.0 / n, c: sum.1 / n, s: sum.2 / n };
    Ok(AggregateReport { segments: per_segment.len(), mean, acs: acs(&mean, w) })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn s(a: f64, c: f64, s: f64) -> DimensionScores<f64> {
        DimensionScores::new(a, c, s).unwrap()
    }

    #[test]
    fn weighted_examples() {
        let gpt = s(8.91, 9.05, 9.82);
        let v = acs(&gpt, &WeightVector::preset(AcsPreset::Acs2));
        assert!((v - 9.043).abs() < 1e-12);
        let flat = s(7.5, 7.5, 7.5);
        for p in AcsPreset::ALL {
            assert!((acs(&flat, &WeightVector::preset(p)) - 7.5).abs() < 1e-12);
        }
        assert_eq!(acs(&gpt, &WeightVector::new(1.0, 0.0, 0.0).unwrap()), 8.91);
        assert_eq!(WeightVector::<f64>::default(), WeightVector::preset(AcsPreset::Acs2));
    }

    #[test]
    fn rejects_bad_inputs() {
        assert!(matches!(WeightVector::new(0.5, 0.5, 0.5), Err(EvalError::InvalidWeights { .. })));
        assert!(WeightVector::new(1.2, -0.1, -0.1).is_err());
        assert!(WeightVector::new(f64::NAN, 0.5, 0.5).is_err());
        assert!(matches!(DimensionScores::new(10.5, 1.0, 1.0), Err(EvalError::ScoreOutOfRange { dimension: 'A', .. })));
        assert!(DimensionScores::new(1.0, -0.1, 1.0).is_err());
        assert!(relative_improvement(1.0, 0.0).is_err());
        assert!(aggregate::<f64>(&[], &WeightVector::default()).is_err());
    }

    #[test]
    fn single_precision_presets_validate() {
        for p in AcsPreset::ALL {
            let (a, b, g) = p.weights();
            assert!(WeightVector::<f32>::new(a as f32, b as f32, g as f32).is_ok());
        }
        let v = acs(&DimensionScores::<f32>::new(8.0, 9.0, 10.0).unwrap(), &WeightVector::preset(AcsPreset::Acs1));
        assert!((v - 8.4).abs() < 1e-5);
    }

    #[test]
    fn improvements() {
        let fmt = |c: f64, b: f64| format!("{:+.2}", relative_improvement(c, b).unwrap());
        assert_eq!(fmt(9.32, 8.91), "+4.60");
        assert_eq!(fmt(9.33, 9.05), "+3.09");
        assert_eq!(fmt(9.92, 9.82), "+1.02");
        assert_eq!(fmt(9.0, 9.0), "+0.00");
    }

    #[test]
    fn aggregate_examples() {
        let one = s(8.0, 7.0, 6.0);
        let r = aggregate(&[one], &WeightVector::default()).unwrap();
        assert_eq!(r.mean, one);
        let r = aggregate(&[s(6.0, 6.0, 6.0), s(8.0, 8.0, 8.0)], &WeightVector::default()).unwrap();
        assert_eq!(r.mean, s(7.0, 7.0, 7.0));
        assert!((r.acs - 7.0).abs() < 1e-12);
    }

    #[test]
    fn deserialization_validates() {
        let ok: DimensionScores<f64> = serde_json::from_str(r#"{"A":9,"C":8,"S":7}"#).unwrap();
        assert_eq!(ok.accuracy(), 9.0);
        assert!(serde_json::from_str::<DimensionScores<f64>>(r#"{"A":11,"C":8,"S":7}"#).is_err());
        assert_eq!("acs 3".parse::<AcsPreset>().unwrap(), AcsPreset::Acs3);
    }

    fn score() -> impl Strategy<Value = f64> {
        0.0..=10.0f64
    }

    fn weights() -> impl Strategy<Value = WeightVector<f64>> {
        (0.01..1.0f64, 0.01..1.0f64, 0.01..1.0f64).prop_map(|(a, b, g)| {
            let t = a + b + g;
            let (a, b) = (a / t, b / t);
            WeightVector::new(a, b, 1.0 - a - b).unwrap()
        })
    }

    proptest! {
        #[test]
        fn bounded_by_extremes(a in score(), c in score(), s_ in score(), w in weights()) {
            let v = acs(&s(a, c, s_), &w);
            prop_assert!(v >= a.min(c).min(s_) - 1e-9 && v <= a.max(c).max(s_) + 1e-9);
        }

        #[test]
        fn strictly_monotone(a in 0.0..9.0f64, c in 0.0..9.0f64, s_ in 0.0..9.0f64, bump in 0.01..1.0f64, dim in 0usize..3, w in weights()) {
            let base = acs(&s(a, c, s_), &w);
            let raised = match dim {
                0 => s(a + bump, c, s_),
                1 => s(a, c + bump, s_),
                _ => s(a, c, s_ + bump),
            };
            prop_assert!(acs(&raised, &w) > base);
        }

        #[test]
        fn dominance_preserves_ranking(a in 0.0..9.0f64, c in 0.0..9.0f64, s_ in 0.0..9.0f64, d in (0.01..1.0f64, 0.01..1.0f64, 0.01..1.0f64), w in weights()) {
            let y = s(a, c, s_);
            let x = s(a + d.0, c + d.1, s_ + d.2);
            prop_assert!(acs(&x, &w) > acs(&y, &w));
        }

        #[test]
        fn mean_of_scores_equals_score_of_means(rows in prop::collection::vec((score(), score(), score()), 1..=10), w in weights()) {
            let segs: Vec<_> = rows.iter().map(|&(a, c, s_)| s(a, c, s_)).collect();
            let report = aggregate(&segs, &w).unwrap();
            let mean_acs = segs.iter().map(|x| acs(x, &w)).sum::<f64>() / segs.len() as f64;
            prop_assert!((report.acs - mean_acs).abs() < 1e-9);
        }
    }
}
