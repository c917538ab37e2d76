//! The leakage audit: the five feature variants, paired comparisons and
//! the verdict.

use std::fmt;

use log::info;
use ndarray::Array2;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::cv::{
    self, CrOutput, CrVariant, CvScheme, Decision, FoldOutcome, PipelineSpec, RopeConfig, RopeResult, ShuffleMode,
    SwapMode,
};
use crate::data::{one_hot_encode, ColumnInfo, ColumnKind, Dataset, TargetKind};
use crate::error::{Error, Result};
use crate::metrics::{self, pearson, ScoreSummary};
use crate::models::{ModelKind, ModelSpec};
use crate::rng::{self, stream};

pub const SCHEMA_VERSION: u64 = 1;

/// Replaces the confounds with the coded target itself.
pub fn make_taco(d: &Dataset) -> Dataset {
    let n = d.n_rows();
    let column = Array2::from_shape_vec((n, 1), d.target.to_vec()).expect("shape");
    let kind = match d.target_kind {
        TargetKind::Classification => ColumnKind::Binary,
        TargetKind::Regression => ColumnKind::Continuous,
    };
    d.with_confounds(column, vec![ColumnInfo::new(d.target_name.clone(), kind)])
}

/// Draws a continuous confound whose Pearson correlation with `target`
/// lies within `tolerance` of `r`: `c = r·z + sqrt(1 − r²)·ε` with `z` the
/// standardised target. Each attempt uses a fresh derived stream.
pub fn simulate_confound(target: &[f64], r: f64, seed: u64, tolerance: f64, max_retries: usize) -> Result<Vec<f64>> {
    if !(-1.0..=1.0).contains(&r) {
        return Err(Error::InvalidInput(format!("simulated correlation must lie in [-1, 1], got {r}")));
    }
    let n = target.len();
    let m = metrics::mean(target);
    let sd = (target.iter().map(|v| (v - m).powi(2)).sum::<f64>() / n as f64).sqrt();
    if !(sd > 0.0) {
        return Err(Error::UndefinedMetric("target has zero variance".into()));
    }
    let noise_scale = (1.0 - r * r).max(0.0).sqrt();
    let mut achieved = f64::NAN;
    for attempt in 0..max_retries.max(1) {
        let mut g = rng::derived_rng(seed, &[stream::CONFOUND, attempt as u64]);
        let c: Vec<f64> = target
            .iter()
            .map(|&t| {
                let e: f64 = rand_distr::Distribution::sample(&rand_distr::StandardNormal, &mut g);
                r * (t - m) / sd + noise_scale * e
            })
            .collect();
        achieved = pearson(&c, target)?;
        if (achieved - r).abs() <= tolerance {
            return Ok(c);
        }
    }
    Err(Error::ConfoundSimulation {
        requested: r,
        achieved,
        retries: max_retries,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "type")]
pub enum ConfoundSource {
    /// The dataset's own confound columns.
    User,
    /// The target as its own confound.
    Taco,
    /// One continuous confound simulated at correlation `r` with the target.
    Simulated { r: f64 },
}

impl fmt::Display for ConfoundSource {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ConfoundSource::User => f.write_str("user"),
            ConfoundSource::Taco => f.write_str("taco"),
            ConfoundSource::Simulated { r } => write!(f, "simulated(r={r})"),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AuditVariant {
    RawX,
    XCr,
    ShuffledX,
    ShuffledXCr,
    XHatOnly,
}

impl AuditVariant {
    pub const ALL: [AuditVariant; 5] = [
        AuditVariant::RawX,
        AuditVariant::XCr,
        AuditVariant::ShuffledX,
        AuditVariant::ShuffledXCr,
        AuditVariant::XHatOnly,
    ];

    pub fn as_str(&self) -> &'static str {
        match self {
            AuditVariant::RawX => "raw_x",
            AuditVariant::XCr => "x_cr",
            AuditVariant::ShuffledX => "shuffled_x",
            AuditVariant::ShuffledXCr => "shuffled_x_cr",
            AuditVariant::XHatOnly => "x_hat_only",
        }
    }

    pub fn uses_cr(&self) -> bool {
        !matches!(self, AuditVariant::RawX | AuditVariant::ShuffledX)
    }

    /// Pipeline for this variant; `cr` is the confound-regression flavour
    /// implied by the confound source.
    pub fn pipeline(&self, model: ModelSpec, cr: CrVariant, shuffle: ShuffleMode) -> PipelineSpec {
        let p = PipelineSpec::new(model);
        match self {
            AuditVariant::RawX => p,
            AuditVariant::XCr => p.with_cr(cr),
            AuditVariant::ShuffledX => p.with_shuffle(shuffle),
            AuditVariant::ShuffledXCr => p.with_cr(cr).with_shuffle(shuffle),
            AuditVariant::XHatOnly => p.with_cr(cr).with_output(CrOutput::Fitted),
        }
    }
}

impl fmt::Display for AuditVariant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for AuditVariant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        AuditVariant::ALL
            .into_iter()
            .find(|v| v.as_str() == s.trim())
            .ok_or_else(|| Error::InvalidInput(format!("unknown variant `{s}`")))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AuditConfig {
    pub confound_source: ConfoundSource,
    pub models: Vec<ModelSpec>,
    pub scheme: CvScheme,
    pub variants: Vec<AuditVariant>,
    pub rope: RopeConfig,
    /// Shuffle once for all repeats instead of per repeat.
    pub single_shuffle: bool,
    pub standardize: bool,
    pub encode: bool,
    pub swap: SwapMode,
    pub simulated_tolerance: f64,
    pub simulated_max_retries: usize,
}

impl Default for AuditConfig {
    fn default() -> Self {
        Self {
            confound_source: ConfoundSource::User,
            models: vec![
                ModelSpec::new(ModelKind::Linear),
                ModelSpec::tree(None),
                ModelSpec::forest(100),
            ],
            scheme: CvScheme::default(),
            variants: AuditVariant::ALL.to_vec(),
            rope: RopeConfig::default(),
            single_shuffle: false,
            standardize: true,
            encode: true,
            swap: SwapMode::Off,
            simulated_tolerance: 0.02,
            simulated_max_retries: 100,
        }
    }
}

impl AuditConfig {
    pub fn validate(&self) -> Result<()> {
        if self.models.is_empty() {
            return Err(Error::InvalidInput("no models configured".into()));
        }
        if self.variants.is_empty() {
            return Err(Error::InvalidInput("no variants configured".into()));
        }
        for m in &self.models {
            m.validate()?;
        }
        let mut labels: Vec<String> = self.models.iter().map(ModelSpec::label).collect();
        labels.sort();
        if labels.windows(2).any(|w| w[0] == w[1]) {
            return Err(Error::InvalidInput("model labels must be unique".into()));
        }
        if !(self.rope.halfwidth >= 0.0) || !(0.5..1.0).contains(&self.rope.decision_threshold) {
            return Err(Error::InvalidInput("ROPE needs halfwidth >= 0 and 0.5 <= threshold < 1".into()));
        }
        Ok(())
    }
}

/// One (variant, model) evaluation.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AuditCell {
    pub variant: AuditVariant,
    pub model: String,
    pub summary: Option<ScoreSummary>,
    pub folds: Vec<FoldOutcome>,
    /// Set when the cell could not be evaluated at all or produced no
    /// valid fold score.
    pub invalid_reason: Option<String>,
}

impl AuditCell {
    fn paired_with(&self, other: &AuditCell) -> (Vec<f64>, Vec<f64>) {
        let mut a = Vec::new();
        let mut b = Vec::new();
        for fa in &self.folds {
            let fb = other.folds.iter().find(|f| f.repeat == fa.repeat && f.fold == fa.fold);
            if let (Some(x), Some(Some(y))) = (fa.score, fb.map(|f| f.score)) {
                a.push(x);
                b.push(y);
            }
        }
        (a, b)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ComparisonKind {
    /// `x_cr` against `raw_x`, same model.
    CrVersusRaw,
    /// `x_hat_only` against `raw_x`, same model.
    FittedVersusRaw,
    /// `shuffled_x_cr` against the dummy model on `raw_x`.
    ShuffledCrVersusChance,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Comparison {
    pub kind: ComparisonKind,
    pub model: String,
    /// `variant/model` of the first operand.
    pub a: String,
    pub b: String,
    pub result: Option<RopeResult>,
    pub error: Option<String>,
}

/// The three comparisons behind the verdict for one model.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct ModelEvidence {
    pub model: String,
    pub cr_vs_raw: Option<Decision>,
    pub shuffled_cr_vs_chance: Option<Decision>,
    pub fitted_vs_raw: Option<Decision>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    NoEvidence,
    LeakageSuspected,
    LeakageStrong,
}

impl Verdict {
    pub fn as_str(&self) -> &'static str {
        match self {
            Verdict::NoEvidence => "no_evidence",
            Verdict::LeakageSuspected => "leakage_suspected",
            Verdict::LeakageStrong => "leakage_strong",
        }
    }
}

impl fmt::Display for Verdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Overall verdict and the reasons behind it.
///
/// A model is suspect when `x_cr` is meaningfully higher than `raw_x`; the
/// suspicion becomes strong when, for that model, `shuffled_x_cr` also beats
/// chance or `x_hat_only` beats `raw_x`. The overall verdict is the worst
/// per-model verdict. Models without a `x_cr` vs `raw_x` decision are
/// skipped; if none has one the audit is inconclusive.
pub fn verdict(evidence: &[ModelEvidence]) -> Result<(Verdict, Vec<String>)> {
    let mut overall = None;
    let mut reasons = Vec::new();
    for e in evidence {
        let Some(primary) = e.cr_vs_raw else { continue };
        let mut v = Verdict::NoEvidence;
        if primary == Decision::MeaningfullyHigher {
            v = Verdict::LeakageSuspected;
            reasons.push(format!("{}: x_cr meaningfully higher than raw_x", e.model));
            if e.shuffled_cr_vs_chance == Some(Decision::MeaningfullyHigher) {
                v = Verdict::LeakageStrong;
                reasons.push(format!("{}: shuffled_x_cr meaningfully above chance", e.model));
            }
            if e.fitted_vs_raw == Some(Decision::MeaningfullyHigher) {
                v = Verdict::LeakageStrong;
                reasons.push(format!("{}: x_hat_only meaningfully higher than raw_x", e.model));
            }
        }
        overall = Some(overall.map_or(v, |o: Verdict| o.max(v)));
    }
    match overall {
        None => Err(Error::Inconclusive(
            "no model has a valid x_cr versus raw_x comparison".into(),
        )),
        Some(Verdict::NoEvidence) => Ok((
            Verdict::NoEvidence,
            vec!["no model scored meaningfully higher on x_cr than on raw_x".into()],
        )),
        Some(v) => Ok((v, reasons)),
    }
}

/// Quartile summary of feature-confound associations.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Quartiles {
    pub min: f64,
    pub q1: f64,
    pub median: f64,
    pub q3: f64,
    pub max: f64,
}

impl Quartiles {
    /// Linear interpolation between order statistics.
    pub fn of(values: &[f64]) -> Option<Self> {
        if values.is_empty() {
            return None;
        }
        let mut v = values.to_vec();
        v.sort_by(f64::total_cmp);
        let q = |p: f64| {
            let h = p * (v.len() - 1) as f64;
            let lo = h.floor() as usize;
            let hi = h.ceil() as usize;
            v[lo] + (h - lo as f64) * (v[hi] - v[lo])
        };
        Some(Self {
            min: v[0],
            q1: q(0.25),
            median: q(0.5),
            q3: q(0.75),
            max: v[v.len() - 1],
        })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConfoundAssociation {
    pub confound: String,
    /// `pearson` or `point_biserial` (Pearson with a 0/1 side).
    pub measure: String,
    pub with_target: Option<f64>,
    pub with_features: Option<Quartiles>,
    /// Features whose association is undefined (constant columns).
    pub undefined_features: usize,
}

/// Association of every (encoded) confound with the target and with each
/// feature.
pub fn association_table(d: &Dataset) -> Vec<ConfoundAssociation> {
    let y = d.target.to_vec();
    let target_binary = d.is_classification();
    (0..d.n_confounds())
        .map(|j| {
            let c = d.confounds.column(j).to_vec();
            let binary = d.confound_columns[j].kind == ColumnKind::Binary || target_binary;
            let mut values = Vec::new();
            let mut undefined = 0;
            for k in 0..d.n_features() {
                match pearson(&c, &d.features.column(k).to_vec()) {
                    Ok(r) => values.push(r),
                    Err(_) => undefined += 1,
                }
            }
            ConfoundAssociation {
                confound: d.confound_columns[j].name.clone(),
                measure: if binary { "point_biserial" } else { "pearson" }.into(),
                with_target: pearson(&c, &y).ok(),
                with_features: Quartiles::of(&values),
                undefined_features: undefined,
            }
        })
        .collect()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AuditReport {
    pub schema_version: u64,
    pub dataset_fingerprint: String,
    pub n_rows: usize,
    pub n_features: usize,
    pub target: String,
    pub target_kind: TargetKind,
    pub confound_source: String,
    pub seed: u64,
    pub config: AuditConfig,
    pub associations: Vec<ConfoundAssociation>,
    /// Dummy model on `raw_x`, the chance reference.
    pub chance: AuditCell,
    pub cells: Vec<AuditCell>,
    pub comparisons: Vec<Comparison>,
    pub evidence: Vec<ModelEvidence>,
    pub verdict: Option<Verdict>,
    pub verdict_reasons: Vec<String>,
}

impl AuditReport {
    pub fn cell(&self, variant: AuditVariant, model: &str) -> Option<&AuditCell> {
        self.cells.iter().find(|c| c.variant == variant && c.model == model)
    }
}

pub const CHANCE_LABEL: &str = "chance";

/// Dataset the audit actually runs on: confounds resolved from the source.
pub fn resolve_confounds(d: &Dataset, cfg: &AuditConfig) -> Result<Dataset> {
    match &cfg.confound_source {
        ConfoundSource::User => {
            if d.n_confounds() == 0 && cfg.variants.iter().any(AuditVariant::uses_cr) {
                return Err(Error::InvalidInput(
                    "the dataset has no confound columns; use target-as-confound or a simulated confound".into(),
                ));
            }
            Ok(d.clone())
        }
        ConfoundSource::Taco => Ok(make_taco(d)),
        ConfoundSource::Simulated { r } => {
            let c = simulate_confound(
                d.target.as_slice().expect("contiguous target"),
                *r,
                rng::derive(cfg.scheme.seed, &[stream::CONFOUND]),
                cfg.simulated_tolerance,
                cfg.simulated_max_retries,
            )?;
            let n = d.n_rows();
            Ok(d.with_confounds(
                Array2::from_shape_vec((n, 1), c).expect("shape"),
                vec![ColumnInfo::continuous("simulated_confound")],
            ))
        }
    }
}

/// Runs every configured (variant, model) cell plus the dummy chance cell,
/// compares them and derives the verdict. Cells that fail are kept with an
/// `invalid_reason`; only configuration and data errors abort.
pub fn run_audit(d: &Dataset, cfg: &AuditConfig) -> Result<AuditReport> {
    cfg.validate()?;
    cfg.scheme.validate(d.n_rows())?;
    let data = resolve_confounds(d, cfg)?;
    // Target-as-confound is already materialised, so every source regresses
    // the dataset's confound columns from here on.
    let cr = CrVariant::Confounds;
    let shuffle = if cfg.single_shuffle { ShuffleMode::Once } else { ShuffleMode::PerRepeat };

    let mut variants = cfg.variants.clone();
    variants.sort();
    variants.dedup();

    // The chance reference comes first; it is reported apart from the
    // requested cells.
    let mut chance = ModelSpec::new(ModelKind::Dummy);
    chance.name = Some(CHANCE_LABEL.into());
    let mut jobs: Vec<(AuditVariant, ModelSpec)> = vec![(AuditVariant::RawX, chance)];
    for m in &cfg.models {
        for &v in &variants {
            jobs.push((v, m.clone()));
        }
    }

    info!("auditing {} cells on {} rows", jobs.len(), data.n_rows());
    let mut cells: Vec<AuditCell> = jobs
        .par_iter()
        .map(|(variant, model)| {
            let mut p = variant.pipeline(model.clone(), cr, shuffle);
            p.standardize = cfg.standardize;
            p.encode = cfg.encode;
            p.swap = cfg.swap;
            let label = model.label();
            match cv::run_cv(&data, &p, &cfg.scheme) {
                Ok(res) => {
                    let summary = res.summary();
                    let invalid_reason = if summary.is_none() {
                        Some(
                            res.outcomes
                                .iter()
                                .find_map(|o| o.error.clone())
                                .unwrap_or_else(|| "no valid fold score".into()),
                        )
                    } else {
                        None
                    };
                    AuditCell {
                        variant: *variant,
                        model: label,
                        summary,
                        folds: res.outcomes,
                        invalid_reason,
                    }
                }
                Err(e) => AuditCell {
                    variant: *variant,
                    model: label,
                    summary: None,
                    folds: Vec::new(),
                    invalid_reason: Some(e.to_string()),
                },
            }
        })
        .collect();

    let chance = cells.remove(0);
    let find = |v: AuditVariant, m: &str| cells.iter().find(|c| c.variant == v && c.model == m);
    let compare = |kind: ComparisonKind, model: &str, a: Option<&AuditCell>, b: Option<&AuditCell>| {
        let (a, b) = (a?, b?);
        let label = |c: &AuditCell| format!("{}/{}", c.variant, c.model);
        let outcome = if a.invalid_reason.is_some() || b.invalid_reason.is_some() {
            Err(Error::InvalidInput("operand cell is invalid".into()))
        } else {
            let (sa, sb) = a.paired_with(b);
            cv::rope_compare_with(&sa, &sb, &cfg.rope, cfg.scheme.folds)
        };
        Some(Comparison {
            kind,
            model: model.to_string(),
            a: label(a),
            b: label(b),
            result: outcome.as_ref().ok().cloned(),
            error: outcome.err().map(|e| e.to_string()),
        })
    };

    let mut comparisons = Vec::new();
    let mut evidence = Vec::new();
    for m in cfg.models.iter().filter(|m| m.kind != ModelKind::Dummy) {
        let label = m.label();
        let raw = find(AuditVariant::RawX, &label);
        let items = [
            compare(ComparisonKind::CrVersusRaw, &label, find(AuditVariant::XCr, &label), raw),
            compare(
                ComparisonKind::ShuffledCrVersusChance,
                &label,
                find(AuditVariant::ShuffledXCr, &label),
                Some(&chance),
            ),
            compare(ComparisonKind::FittedVersusRaw, &label, find(AuditVariant::XHatOnly, &label), raw),
        ];
        let decision = |i: usize| items[i].as_ref().and_then(|c| c.result.as_ref()).map(|r| r.decision);
        evidence.push(ModelEvidence {
            model: label.clone(),
            cr_vs_raw: decision(0),
            shuffled_cr_vs_chance: decision(1),
            fitted_vs_raw: decision(2),
        });
        comparisons.extend(items.into_iter().flatten());
    }

    let (verdict, verdict_reasons) = match verdict(&evidence) {
        Ok((v, r)) => (Some(v), r),
        Err(e) => (None, vec![e.to_string()]),
    };
    let encoded = if cfg.encode { one_hot_encode(&data) } else { data.clone() };
    Ok(AuditReport {
        schema_version: SCHEMA_VERSION,
        dataset_fingerprint: d.fingerprint(),
        n_rows: d.n_rows(),
        n_features: d.n_features(),
        target: d.target_name.clone(),
        target_kind: d.target_kind,
        confound_source: cfg.confound_source.to_string(),
        seed: cfg.scheme.seed,
        config: cfg.clone(),
        associations: association_table(&encoded),
        chance,
        cells,
        comparisons,
        evidence,
        verdict,
        verdict_reasons,
    })
}
