//! Rendering of audit reports and conditional histograms.

use std::fmt::Write as _;
use std::io::Write;

use serde::Serialize;

use crate::audit::{AuditReport, SCHEMA_VERSION};
use crate::confound::{fit_cr, transform_cr};
use crate::data::{format_number, Dataset};
use crate::error::{Error, Result};

/// Parses a report and rejects unknown schema versions.
pub fn parse_report(json: &str) -> Result<AuditReport> {
    let value: serde_json::Value = serde_json::from_str(json)?;
    match value.get("schema_version").and_then(|v| v.as_u64()) {
        Some(SCHEMA_VERSION) => Ok(serde_json::from_value(value)?),
        Some(v) => Err(Error::SchemaVersion(v)),
        None => Err(Error::InvalidInput("report has no schema_version".into())),
    }
}

pub fn to_json(report: &AuditReport) -> Result<String> {
    let mut s = serde_json::to_string_pretty(report)?;
    s.push('\n');
    Ok(s)
}

fn fmt4(v: f64) -> String {
    format!("{v:.4}")
}

/// Markdown summary: one score row per (variant, model) cell, then the
/// ROPE comparisons and the verdict.
pub fn render_markdown(r: &AuditReport) -> String {
    let mut out = String::new();
    let metric = if r.target_kind == crate::data::TargetKind::Classification { "AUCROC" } else { "R²" };
    let _ = writeln!(out, "# Confound-leakage audit\n");
    let _ = writeln!(out, "- dataset: `{}`, rows: {}, features: {}", r.dataset_fingerprint, r.n_rows, r.n_features);
    let _ = writeln!(out, "- target: `{}` ({:?})", r.target, r.target_kind);
    let _ = writeln!(out, "- confound source: {}", r.confound_source);
    let _ = writeln!(
        out,
        "- scheme: {} × {}-fold, seed {}",
        r.config.scheme.repeats, r.config.scheme.folds, r.seed
    );
    let verdict = r.verdict.map_or("inconclusive", |v| v.as_str());
    let _ = writeln!(out, "- verdict: **{verdict}**\n");

    match &r.chance.summary {
        Some(s) => {
            let _ = writeln!(out, "- chance reference (dummy, raw_x): {} ± {}\n", fmt4(s.mean), fmt4(s.sd));
        }
        None => {
            let reason = r.chance.invalid_reason.as_deref().unwrap_or("no valid fold score");
            let _ = writeln!(out, "- chance reference (dummy, raw_x): invalid, {reason}\n");
        }
    }

    let _ = writeln!(out, "## Scores ({metric})\n");
    let _ = writeln!(out, "| variant | model | mean | sd | folds | note |");
    let _ = writeln!(out, "|---|---|---|---|---|---|");
    for c in &r.cells {
        let (mean, sd, n) = match &c.summary {
            Some(s) => (fmt4(s.mean), fmt4(s.sd), s.scores.len().to_string()),
            None => ("-".into(), "-".into(), "0".into()),
        };
        let note = c.invalid_reason.as_deref().unwrap_or("");
        let _ = writeln!(out, "| {} | {} | {mean} | {sd} | {n} | {note} |", c.variant, c.model);
    }

    let _ = writeln!(out, "\n## Comparisons\n");
    let _ = writeln!(out, "| model | a | b | mean diff | p(a<b) | p(rope) | p(a>b) | decision |");
    let _ = writeln!(out, "|---|---|---|---|---|---|---|---|");
    for c in &r.comparisons {
        match &c.result {
            Some(x) => {
                let _ = writeln!(
                    out,
                    "| {} | {} | {} | {} | {} | {} | {} | {} |",
                    c.model,
                    c.a,
                    c.b,
                    fmt4(x.mean_difference),
                    fmt4(x.p_left),
                    fmt4(x.p_rope),
                    fmt4(x.p_right),
                    x.decision.as_str()
                );
            }
            None => {
                let err = c.error.as_deref().unwrap_or("not evaluated");
                let _ = writeln!(out, "| {} | {} | {} | - | - | - | - | {err} |", c.model, c.a, c.b);
            }
        }
    }

    if !r.associations.is_empty() {
        let _ = writeln!(out, "\n## Confound associations\n");
        let _ = writeln!(out, "| confound | measure | target | feature min | q1 | median | q3 | max | undefined |");
        let _ = writeln!(out, "|---|---|---|---|---|---|---|---|---|");
        for a in &r.associations {
            let t = a.with_target.map_or("undefined".into(), fmt4);
            let q = match &a.with_features {
                Some(q) => [q.min, q.q1, q.median, q.q3, q.max].map(fmt4).join(" | "),
                None => ["-"; 5].join(" | "),
            };
            let _ = writeln!(out, "| {} | {} | {t} | {q} | {} |", a.confound, a.measure, a.undefined_features);
        }
    }

    let _ = writeln!(out, "\n## Verdict: {verdict}\n");
    for reason in &r.verdict_reasons {
        let _ = writeln!(out, "- {reason}");
    }
    out
}

/// Long-format fold scores: `repeat,fold,variant,model,score`. Failed
/// folds have an empty score.
pub fn write_fold_scores<W: Write>(r: &AuditReport, w: W) -> Result<()> {
    let mut csv = csv::Writer::from_writer(w);
    csv.write_record(["repeat", "fold", "variant", "model", "score"])?;
    for c in std::iter::once(&r.chance).chain(&r.cells) {
        for f in &c.folds {
            csv.write_record([
                f.repeat.to_string(),
                f.fold.to_string(),
                c.variant.to_string(),
                c.model.clone(),
                f.score.map(format_number).unwrap_or_default(),
            ])?;
        }
    }
    csv.flush()?;
    Ok(())
}

pub const DEFAULT_BINS: usize = 30;

/// Counts of one variable in equal-width bins, per group.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct GroupedHistogram {
    pub edges: Vec<f64>,
    pub groups: Vec<f64>,
    /// `counts[g][b]`
    pub counts: Vec<Vec<usize>>,
}

impl GroupedHistogram {
    /// Bins span `[min, max]` of `values`; the last bin is closed.
    pub fn new(values: &[f64], groups: &[f64], bins: usize) -> Result<Self> {
        if values.len() != groups.len() {
            return Err(Error::DimensionMismatch(format!("{} values vs {} groups", values.len(), groups.len())));
        }
        if values.is_empty() || bins == 0 {
            return Err(Error::InvalidInput("histogram needs values and at least one bin".into()));
        }
        let lo = values.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let width = if hi > lo { (hi - lo) / bins as f64 } else { 1.0 };
        let edges: Vec<f64> = (0..=bins).map(|b| lo + b as f64 * width).collect();
        let mut levels: Vec<f64> = groups.to_vec();
        levels.sort_by(f64::total_cmp);
        levels.dedup();
        let mut counts = vec![vec![0usize; bins]; levels.len()];
        for (&v, g) in values.iter().zip(groups) {
            let b = (((v - lo) / width) as usize).min(bins - 1);
            let gi = levels.iter().position(|l| l == g).expect("level present");
            counts[gi][b] += 1;
        }
        Ok(Self {
            edges,
            groups: levels,
            counts,
        })
    }

    /// Overlap coefficient of the first two groups' normalised histograms:
    /// `Σ_b min(p₀(b), p₁(b))`, 1 for identical and 0 for disjoint
    /// distributions.
    pub fn overlap(&self) -> Result<f64> {
        if self.counts.len() != 2 {
            return Err(Error::InvalidInput(format!(
                "overlap needs exactly two groups, found {}",
                self.counts.len()
            )));
        }
        let n0 = self.counts[0].iter().sum::<usize>() as f64;
        let n1 = self.counts[1].iter().sum::<usize>() as f64;
        Ok(self.counts[0]
            .iter()
            .zip(&self.counts[1])
            .map(|(&a, &b)| (a as f64 / n0).min(b as f64 / n1))
            .sum())
    }
}

/// A feature's distribution conditional on a binary confound, before and
/// after confound regression on the full dataset.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ConditionalHistograms {
    pub feature: String,
    pub confound: String,
    pub before: GroupedHistogram,
    pub after: GroupedHistogram,
}

pub fn conditional_histograms(d: &Dataset, feature: &str, confound: &str, bins: usize) -> Result<ConditionalHistograms> {
    let fj = d
        .feature_columns
        .iter()
        .position(|c| c.name == feature)
        .ok_or_else(|| Error::MissingColumn(feature.to_string()))?;
    let cj = d
        .confound_columns
        .iter()
        .position(|c| c.name == confound)
        .ok_or_else(|| Error::MissingColumn(confound.to_string()))?;
    let groups = d.confounds.column(cj).to_vec();
    let mut levels = groups.clone();
    levels.sort_by(f64::total_cmp);
    levels.dedup();
    if levels.len() != 2 {
        return Err(Error::InvalidInput(format!(
            "confound `{confound}` must be binary, found {} levels",
            levels.len()
        )));
    }
    let x = d.features.column(fj).to_owned().insert_axis(ndarray::Axis(1));
    let c = d.confounds.column(cj).to_owned().insert_axis(ndarray::Axis(1));
    let model = fit_cr(&x, &c)?;
    let (x_cr, _) = transform_cr(&model, &x, &c)?;
    Ok(ConditionalHistograms {
        feature: feature.to_string(),
        confound: confound.to_string(),
        before: GroupedHistogram::new(&x.column(0).to_vec(), &groups, bins)?,
        after: GroupedHistogram::new(&x_cr.column(0).to_vec(), &groups, bins)?,
    })
}

/// `stage,group,bin,lower,upper,count` rows for both stages.
pub fn write_histograms<W: Write>(h: &ConditionalHistograms, w: W) -> Result<()> {
    let mut csv = csv::Writer::from_writer(w);
    csv.write_record(["stage", "group", "bin", "lower", "upper", "count"])?;
    for (stage, hist) in [("before_cr", &h.before), ("after_cr", &h.after)] {
        for (g, level) in hist.groups.iter().enumerate() {
            for (b, &count) in hist.counts[g].iter().enumerate() {
                csv.write_record([
                    stage.to_string(),
                    format_number(*level),
                    b.to_string(),
                    format_number(hist.edges[b]),
                    format_number(hist.edges[b + 1]),
                    count.to_string(),
                ])?;
            }
        }
    }
    csv.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bins_sum_to_group_sizes() {
        let v: Vec<f64> = (0..97).map(|i| (i as f64 * 0.37).sin()).collect();
        let g: Vec<f64> = (0..97).map(|i| (i % 3 == 0) as u8 as f64).collect();
        let h = GroupedHistogram::new(&v, &g, DEFAULT_BINS).unwrap();
        let ones = g.iter().filter(|&&x| x == 1.0).count();
        assert_eq!(h.counts[1].iter().sum::<usize>(), ones);
        assert_eq!(h.counts[0].iter().sum::<usize>(), 97 - ones);
        assert_eq!(h.edges.len(), DEFAULT_BINS + 1);
    }

    #[test]
    fn overlap_extremes() {
        let h = GroupedHistogram::new(&[0.0, 1.0, 0.0, 1.0], &[0.0, 0.0, 1.0, 1.0], 2).unwrap();
        assert!((h.overlap().unwrap() - 1.0).abs() < 1e-12);
        let h = GroupedHistogram::new(&[0.0, 0.1, 5.0, 5.1], &[0.0, 0.0, 1.0, 1.0], 4).unwrap();
        assert_eq!(h.overlap().unwrap(), 0.0);
    }

    #[test]
    fn unknown_schema_is_rejected() {
        assert!(matches!(parse_report(r#"{"schema_version": 2}"#), Err(Error::SchemaVersion(2))));
    }
}
