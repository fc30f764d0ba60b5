//! Per-phase API cost accounting and comparisons against human rates.

use std::collections::BTreeMap;
use std::fmt::Write;

use serde::{Deserialize, Serialize};

use super::{GatewayError, ProviderRegistry, Role, UsageRecord};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CostReport {
    /// Unrounded cost per role; every role is present.
    pub per_phase: BTreeMap<Role, f64>,
    /// Sum of the phases, rounded half-up to cents.
    pub total: f64,
}

/// Rounds to two decimals, halves away from zero. A tiny epsilon absorbs
/// binary representation error such as `0.345 -> 0.34499999`.
pub fn round_cents(value: f64) -> f64 {
    let scaled = value * 100.0;
    let eps = 1e-9 * scaled.abs().max(1.0);
    (scaled.abs() + 0.5 + eps).floor().copysign(value) / 100.0
}

pub fn accrue_cost(usages: &[UsageRecord], registry: &ProviderRegistry) -> Result<CostReport, GatewayError> {
    let mut per_phase: BTreeMap<Role, f64> = Role::ALL.iter().map(|&r| (r, 0.0)).collect();
    for usage in usages {
        let spec = registry.get(&usage.provider).ok_or_else(|| GatewayError::UnknownProvider(usage.provider.clone()))?;
        let cost = usage.input_tokens as f64 / 1000.0 * spec.price_per_1k_input
            + usage.output_tokens as f64 / 1000.0 * spec.price_per_1k_output;
        *per_phase.entry(usage.phase).or_default() += cost;
    }
    let total = round_cents(per_phase.values().sum());
    Ok(CostReport { per_phase, total })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CostComparison {
    pub human_quote: f64,
    /// How many times cheaper the pipeline is than the human quote.
    pub ratio_vs_human: f64,
    /// Percentage saved relative to the baseline system.
    pub pct_vs_baseline: f64,
}

pub fn cost_comparisons(
    total: f64,
    word_count: u64,
    human_rate: f64,
    baseline_total: f64,
) -> Result<CostComparison, GatewayError> {
    for (name, v) in [("total", total), ("word_count", word_count as f64), ("human_rate", human_rate), ("baseline_total", baseline_total)] {
        if !(v > 0.0 && v.is_finite()) {
            return Err(GatewayError::InvalidInput(format!("{name} must be positive")));
        }
    }
    let human_quote = word_count as f64 * human_rate;
    Ok(CostComparison {
        human_quote,
        ratio_vs_human: human_quote / total,
        pct_vs_baseline: 100.0 * (baseline_total - total) / baseline_total,
    })
}

/// Options for the human and baseline comparison lines of a cost report.
#[derive(Debug, Clone, Copy, Default)]
pub struct ComparisonInputs {
    pub words: Option<u64>,
    pub human_rate: Option<f64>,
    pub baseline: Option<f64>,
}

/// Plain-text rendering used by the command-line `cost` command.
pub fn render_cost_report(report: &CostReport, cmp: ComparisonInputs) -> Result<String, GatewayError> {
    let mut out = String::new();
    for (role, cost) in &report.per_phase {
        let _ = writeln!(out, "{:<12} US${:.2}", role.label(), round_cents(*cost));
    }
    let _ = writeln!(out, "{:<12} US${:.2}", "Total", report.total);
    if let (Some(words), Some(rate)) = (cmp.words, cmp.human_rate) {
        let c = cost_comparisons(report.total, words, rate, cmp.baseline.unwrap_or(report.total))?;
        let _ = writeln!(out, "Human quote  US${:.2} ({words} words at US${rate}/word)", round_cents(c.human_quote));
        let _ = writeln!(out, "Ratio        {:.0}x cheaper than human translation", c.ratio_vs_human.round());
    }
    if let Some(baseline) = cmp.baseline {
        if baseline.is_nan() || baseline <= 0.0 {
            return Err(GatewayError::InvalidInput("baseline_total must be positive".into()));
        }
        let pct = 100.0 * (baseline - report.total) / baseline;
        let _ = writeln!(out, "Baseline     US${baseline:.2}, {pct:.2}% cheaper");
    }
    Ok(out)
}
