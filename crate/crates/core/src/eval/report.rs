use std::collections::BTreeMap;
use std::fmt::Write;
use std::io::Read;

use serde::{Deserialize, Serialize};

use super::{acs, aggregate, relative_improvement, AcsPreset, DimensionScores, EvalError, WeightVector};

/// One row of a `segment_id,system,A,C,S` score file.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScoreRow {
    pub segment_id: String,
    pub system: String,
    #[serde(flatten)]
    pub scores: DimensionScores<f64>,
}

#[derive(Deserialize)]
struct RawRow {
    segment_id: String,
    system: String,
    #[serde(rename = "A")]
    a: f64,
    #[serde(rename = "C")]
    c: f64,
    #[serde(rename = "S")]
    s: f64,
}

pub fn parse_scores_csv<R: Read>(reader: R) -> Result<Vec<ScoreRow>, EvalError> {
    let mut csv = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    let mut rows = Vec::new();
    for record in csv.deserialize::<RawRow>() {
        let raw = record.map_err(|e| EvalError::Csv {
            line: e.position().map_or(0, |p| p.line()),
            reason: e.to_string(),
        })?;
        let line = rows.len() as u64 + 2;
        let scores =
            DimensionScores::new(raw.a, raw.c, raw.s).map_err(|e| EvalError::Csv { line, reason: e.to_string() })?;
        rows.push(ScoreRow { segment_id: raw.segment_id, system: raw.system, scores });
    }
    Ok(rows)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Improvement {
    pub a: f64,
    pub c: f64,
    pub s: f64,
    pub acs: BTreeMap<AcsPreset, f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SystemReport {
    pub system: String,
    pub segments: usize,
    pub mean: DimensionScores<f64>,
    pub acs: BTreeMap<AcsPreset, f64>,
    /// Percent change over the baseline system; absent for the baseline.
    pub improvement: Option<Improvement>,
}

fn all_presets(scores: &DimensionScores<f64>) -> BTreeMap<AcsPreset, f64> {
    AcsPreset::ALL.iter().map(|&p| (p, acs(scores, &WeightVector::preset(p)))).collect()
}

/// Per-system means and preset scores, in order of first appearance.
pub fn system_reports(rows: &[ScoreRow], baseline: Option<&str>) -> Result<Vec<SystemReport>, EvalError> {
    let mut order: Vec<&str> = Vec::new();
    let mut grouped: BTreeMap<&str, Vec<DimensionScores<f64>>> = BTreeMap::new();
    for row in rows {
        if !grouped.contains_key(row.system.as_str()) {
            order.push(&row.system);
        }
        grouped.entry(&row.system).or_default().push(row.scores);
    }
    let mut reports: Vec<SystemReport> = order
        .iter()
        .map(|system| {
            let agg = aggregate(&grouped[system], &WeightVector::default())?;
            Ok(SystemReport {
                system: system.to_string(),
                segments: agg.segments,
                mean: agg.mean,
                acs: all_presets(&agg.mean),
                improvement: None,
            })
        })
        .collect::<Result<_, EvalError>>()?;
    if let Some(base_name) = baseline {
        let base = reports
            .iter()
            .find(|r| r.system == base_name)
            .cloned()
            .ok_or_else(|| EvalError::UnknownSystem(base_name.to_string()))?;
        for report in reports.iter_mut().filter(|r| r.system != base_name) {
            let m = &report.mean;
            report.improvement = Some(Improvement {
                a: relative_improvement(m.accuracy(), base.mean.accuracy())?,
                c: relative_improvement(m.coherence(), base.mean.coherence())?,
                s: relative_improvement(m.style(), base.mean.style())?,
                acs: AcsPreset::ALL
                    .iter()
                    .map(|p| Ok((*p, relative_improvement(report.acs[p], base.acs[p])?)))
                    .collect::<Result<_, EvalError>>()?,
            });
        }
    }
    Ok(reports)
}

fn cell(value: f64, improvement: Option<f64>) -> String {
    match improvement {
        Some(pct) => format!("{value:.2} ({pct:+.2}%)"),
        None => format!("{value:.2}"),
    }
}

/// Fixed-width table: system, A, C, S and the three preset scores, with
/// improvements in parentheses.
pub fn render_report(reports: &[SystemReport]) -> String {
    let name_width = reports.iter().map(|r| r.system.chars().count()).max().unwrap_or(0).max(6) + 2;
    let mut out = String::new();
    let _ = write!(out, "{:<name_width$}", "System");
    for h in ["A", "C", "S", "ACS1", "ACS2", "ACS3"] {
        let _ = write!(out, "{h:<17}");
    }
    out = out.trim_end().to_string();
    out.push('\n');
    for r in reports {
        let imp = r.improvement.as_ref();
        let mut line = format!("{:<name_width$}", r.system);
        let cells = [
            cell(r.mean.accuracy(), imp.map(|i| i.a)),
            cell(r.mean.coherence(), imp.map(|i| i.c)),
            cell(r.mean.style(), imp.map(|i| i.s)),
        ];
        for c in cells {
            let _ = write!(line, "{c:<17}");
        }
        for p in AcsPreset::ALL {
            let _ = write!(line, "{:<17}", cell(r.acs[&p], imp.map(|i| i.acs[&p])));
        }
        out.push_str(line.trim_end());
        out.push('\n');
    }
    out
}

/// Per-system means and the ACS under `weights`, one system per line in
/// order of first appearance.
pub fn render_weighted(rows: &[ScoreRow], weights: &WeightVector<f64>) -> Result<String, EvalError> {
    if rows.is_empty() {
        return Err(EvalError::EmptyInput);
    }
    let mut order: Vec<&str> = Vec::new();
    let mut grouped: BTreeMap<&str, Vec<DimensionScores<f64>>> = BTreeMap::new();
    for row in rows {
        if !grouped.contains_key(row.system.as_str()) {
            order.push(&row.system);
        }
        grouped.entry(&row.system).or_default().push(row.scores);
    }
    let name_width = order.iter().map(|s| s.chars().count()).max().unwrap_or(0).max(6) + 2;
    let mut out = format!(
        "# weights {}/{}/{}\n{:<name_width$}{:<8}{:<8}{:<8}{:<8}ACS\n",
        weights.alpha(),
        weights.beta(),
        weights.gamma(),
        "System",
        "N",
        "A",
        "C",
        "S"
    );
    for system in order {
        let agg = aggregate(&grouped[system], weights)?;
        let m = agg.mean;
        let _ = writeln!(
            out,
            "{system:<name_width$}{:<8}{:<8.2}{:<8.2}{:<8.2}{:.2}",
            agg.segments,
            m.accuracy(),
            m.coherence(),
            m.style(),
            agg.acs
        );
    }
    Ok(out)
}

pub fn report_to_csv(reports: &[SystemReport]) -> Result<String, EvalError> {
    let mut w = csv::Writer::from_writer(Vec::new());
    let csv_err = |e: csv::Error| EvalError::Csv { line: 0, reason: e.to_string() };
    let mut header = vec!["system".to_string(), "segments".into(), "A".into(), "C".into(), "S".into()];
    header.extend(AcsPreset::ALL.iter().map(|p| p.label().to_string()));
    header.extend(["A_pct", "C_pct", "S_pct"].map(String::from));
    header.extend(AcsPreset::ALL.iter().map(|p| format!("{}_pct", p.label())));
    w.write_record(&header).map_err(csv_err)?;
    for r in reports {
        let mut rec = vec![r.system.clone(), r.segments.to_string()];
        rec.extend([r.mean.accuracy(), r.mean.coherence(), r.mean.style()].map(|v| v.to_string()));
        rec.extend(AcsPreset::ALL.iter().map(|p| r.acs[p].to_string()));
        match &r.improvement {
            Some(i) => {
                rec.extend([i.a, i.c, i.s].map(|v| v.to_string()));
                rec.extend(AcsPreset::ALL.iter().map(|p| i.acs[p].to_string()));
            }
            None => rec.extend(std::iter::repeat_n(String::new(), 6)),
        }
        w.write_record(&rec).map_err(csv_err)?;
    }
    let bytes = w.into_inner().map_err(|e| EvalError::Csv { line: 0, reason: e.to_string() })?;
    Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ShotMode {
    Zero,
    Few,
}

/// One externally measured quality number for a model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LeaderboardEntry {
    pub model: String,
    pub mode: ShotMode,
    pub metric: String,
    pub value: f64,
}

/// Model × (shot mode, metric) table, ranked by the mean of each model's
/// values. Missing cells print as `-`.
pub fn render_leaderboard(entries: &[LeaderboardEntry]) -> String {
    let mut columns: Vec<(ShotMode, &str)> = Vec::new();
    let mut models: Vec<&str> = Vec::new();
    let mut cells: BTreeMap<(&str, ShotMode, &str), f64> = BTreeMap::new();
    for e in entries {
        if !columns.contains(&(e.mode, &e.metric)) {
            columns.push((e.mode, &e.metric));
        }
        if !models.contains(&e.model.as_str()) {
            models.push(&e.model);
        }
        cells.insert((&e.model, e.mode, &e.metric), e.value);
    }
    columns.sort_by_key(|(mode, _)| *mode);
    let mean = |m: &str| {
        let vals: Vec<f64> = cells.iter().filter(|((model, _, _), _)| *model == m).map(|(_, v)| *v).collect();
        vals.iter().sum::<f64>() / vals.len().max(1) as f64
    };
    let mut ranked: Vec<(&str, f64)> = models.iter().map(|m| (*m, mean(m))).collect();
    ranked.sort_by(|a, b| b.1.total_cmp(&a.1));

    let width = models.iter().map(|m| m.chars().count()).max().unwrap_or(0).max(5) + 2;
    let mut out = format!("{:<width$}", "Model");
    for (mode, metric) in &columns {
        let _ = write!(out, "{:<22}", format!("{metric} ({})", if *mode == ShotMode::Zero { "zero" } else { "few" }));
    }
    out.push_str("Rank\n");
    for (rank, (model, _)) in ranked.iter().enumerate() {
        let _ = write!(out, "{model:<width$}");
        for (mode, metric) in &columns {
            let v = cells.get(&(*model, *mode, *metric)).map_or("-".to_string(), |v| format!("{v:.4}"));
            let _ = write!(out, "{v:<22}");
        }
        let _ = writeln!(out, "{}", rank + 1);
    }
    out
}
