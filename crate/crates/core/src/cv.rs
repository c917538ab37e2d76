//! CV-consistent pipeline evaluation.
//!
//! Within every fold, each data-dependent step (standardizer, confound
//! model, predictive model) is fitted on the training rows only and then
//! applied to both parts. Nothing computed from test rows reaches a fit.
//! Under target-as-confound removal the test rows are transformed with
//! their own target as confound, exactly like any other confound.

use std::collections::BTreeMap;

use log::warn;
use ndarray::Array2;
use rand::seq::SliceRandom;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, StudentsT};

use crate::audit::make_taco;
use crate::confound::{fit_cr_named, transform_cr, ConfoundModel};
use crate::data::{self, apply_standardizer, fit_standardizer, one_hot_encode, Dataset, Standardizer, TargetKind};
use crate::error::{Error, Result};
use crate::metrics::{self, ScoreSummary};
use crate::models::{self, FittedModel, ModelKind, ModelSpec};
use crate::rng::{self, stream};
use crate::simgen::swap_two_values;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CrVariant {
    None,
    /// Regress out the dataset's confound columns.
    Confounds,
    /// Regress out the target itself.
    Taco,
}

/// Which confound-regression output feeds the model.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CrOutput {
    Residuals,
    Fitted,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ShuffleMode {
    Off,
    /// Fresh column permutations for every repeat.
    PerRepeat,
    /// One set of permutations shared by all repeats.
    Once,
}

/// Within-fold exchange of two distinct feature values between rows of
/// different classes (see [`swap_two_values`]).
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SwapMode {
    Off,
    Train,
    TrainAndTest,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PipelineSpec {
    pub standardize: bool,
    pub encode: bool,
    pub cr: CrVariant,
    pub cr_output: CrOutput,
    pub shuffle: ShuffleMode,
    pub swap: SwapMode,
    pub model: ModelSpec,
}

impl PipelineSpec {
    pub fn new(model: ModelSpec) -> Self {
        Self {
            standardize: true,
            encode: true,
            cr: CrVariant::None,
            cr_output: CrOutput::Residuals,
            shuffle: ShuffleMode::Off,
            swap: SwapMode::Off,
            model,
        }
    }

    pub fn with_cr(mut self, cr: CrVariant) -> Self {
        self.cr = cr;
        self
    }

    pub fn with_output(mut self, out: CrOutput) -> Self {
        self.cr_output = out;
        self
    }

    pub fn with_shuffle(mut self, s: ShuffleMode) -> Self {
        self.shuffle = s;
        self
    }

    pub fn with_swap(mut self, s: SwapMode) -> Self {
        self.swap = s;
        self
    }

    pub fn with_standardize(mut self, on: bool) -> Self {
        self.standardize = on;
        self
    }
}

/// One hyperparameter axis of an inner grid search.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GridAxis {
    /// One of `max_depth`, `min_samples_leaf`, `n_trees`, `ridge_lambda`,
    /// `hidden_units`, `learning_rate`, `epochs`.
    pub param: String,
    pub values: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct InnerSearch {
    pub grid: Vec<GridAxis>,
    pub inner_folds: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CvScheme {
    pub repeats: usize,
    pub folds: usize,
    pub stratified: bool,
    pub seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub inner_search: Option<InnerSearch>,
}

impl Default for CvScheme {
    fn default() -> Self {
        Self {
            repeats: 10,
            folds: 5,
            stratified: true,
            seed: 0,
            inner_search: None,
        }
    }
}

impl CvScheme {
    pub fn new(repeats: usize, folds: usize, seed: u64) -> Self {
        Self {
            repeats,
            folds,
            seed,
            ..Self::default()
        }
    }

    pub fn validate(&self, n: usize) -> Result<()> {
        if self.folds < 2 {
            return Err(Error::InvalidInput("at least 2 folds are required".into()));
        }
        if self.repeats < 1 {
            return Err(Error::InvalidInput("at least 1 repeat is required".into()));
        }
        if self.folds > n {
            return Err(Error::InvalidInput(format!("{} folds for {n} rows", self.folds)));
        }
        if let Some(s) = &self.inner_search {
            if s.inner_folds < 2 {
                return Err(Error::InvalidInput("inner search needs at least 2 folds".into()));
            }
            for axis in &s.grid {
                apply_grid_value(&mut ModelSpec::default(), &axis.param, 1.0)?;
            }
        }
        Ok(())
    }
}

/// Fold index per row for one repeat. With `keys`, rows of each key are
/// shuffled and dealt round-robin, continuing the deal across keys, so
/// every fold gets floor or ceil of its proportional share of every key.
pub fn fold_assignment(n: usize, keys: Option<&[u64]>, folds: usize, seed: u64, repeat: usize) -> Vec<usize> {
    let mut r = rng::derived_rng(seed, &[stream::FOLDS, repeat as u64]);
    let mut assignment = vec![0; n];
    let groups: Vec<Vec<usize>> = match keys {
        None => vec![(0..n).collect()],
        Some(keys) => {
            let mut g: BTreeMap<u64, Vec<usize>> = BTreeMap::new();
            for (i, &k) in keys.iter().enumerate() {
                g.entry(k).or_default().push(i);
            }
            g.into_values().collect()
        }
    };
    let mut dealt = 0usize;
    for mut rows in groups {
        rows.shuffle(&mut r);
        for i in rows {
            assignment[i] = dealt % folds;
            dealt += 1;
        }
    }
    assignment
}

/// Dataset as the harness sees it before any fold-level step: encoded and,
/// for target-as-confound, with the confounds replaced.
pub fn prepare(d: &Dataset, p: &PipelineSpec) -> Result<Dataset> {
    let mut out = if p.encode { one_hot_encode(d) } else { d.clone() };
    match p.cr {
        CrVariant::Taco => out = make_taco(&out),
        CrVariant::Confounds if out.n_confounds() == 0 => {
            return Err(Error::InvalidInput("confound regression needs at least one confound column".into()))
        }
        _ => {}
    }
    if p.swap != SwapMode::Off && !out.is_classification() {
        return Err(Error::InvalidInput("the swap perturbation needs a classification target".into()));
    }
    Ok(out)
}

/// Every fitted step of one pipeline run.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FittedPipeline {
    pub spec: PipelineSpec,
    pub standardizer: Option<Standardizer>,
    pub confound_model: Option<ConfoundModel>,
    pub model: FittedModel,
}

impl FittedPipeline {
    /// Model input for already-prepared rows.
    fn features_for(&self, d: &Dataset) -> Result<Array2<f64>> {
        let d = match &self.standardizer {
            Some(s) => apply_standardizer(s, d),
            None => d.clone(),
        };
        match &self.confound_model {
            None => Ok(d.features),
            Some(m) => {
                let (x_cr, x_hat) = transform_cr(m, &d.features, &d.confounds)?;
                Ok(match self.spec.cr_output {
                    CrOutput::Residuals => x_cr,
                    CrOutput::Fitted => x_hat,
                })
            }
        }
    }

    /// Model input for raw rows (encoding and confound replacement applied
    /// here).
    pub fn transform(&self, d: &Dataset) -> Result<Array2<f64>> {
        let spec = PipelineSpec {
            swap: SwapMode::Off,
            ..self.spec.clone()
        };
        self.features_for(&prepare(d, &spec)?)
    }

    /// Scores the fitted pipeline on new raw rows.
    pub fn score(&self, d: &Dataset) -> Result<f64> {
        let x = self.transform(d)?;
        let s = self.model.predict_scores(&x)?;
        score(d.target_kind, d.target.as_slice().unwrap(), s.as_slice().unwrap())
    }
}

pub fn score(task: TargetKind, y: &[f64], scores: &[f64]) -> Result<f64> {
    match task {
        TargetKind::Classification => metrics::aucroc(y, scores),
        TargetKind::Regression => metrics::r2(y, scores),
    }
}

/// Column means of the standardized continuous features on the training
/// and test rows of a fold.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct StandardizationProbe {
    pub train_means: Vec<f64>,
    pub test_means: Vec<f64>,
}

struct FoldFit {
    score: f64,
    pipeline: FittedPipeline,
    probe: Option<StandardizationProbe>,
}

fn apply_swap(d: &mut Dataset, seed: u64, part: u64) -> Result<()> {
    let labels = d.target.to_vec();
    let rows: Vec<usize> = (0..d.n_rows()).collect();
    for j in 0..d.n_features() {
        let mut col = d.features.column(j).to_vec();
        swap_two_values(&mut col, &rows, Some(&labels), rng::derive(seed, &[stream::SWAP, part, j as u64]))?;
        d.features.column_mut(j).assign(&ndarray::Array1::from(col));
    }
    Ok(())
}

fn column_means(m: &Array2<f64>, cols: &[usize]) -> Vec<f64> {
    cols.iter().map(|&j| m.column(j).mean().unwrap_or(0.0)).collect()
}

/// Fits the pipeline on `train` rows of a prepared dataset and scores it on
/// `test` rows.
fn fit_and_score(
    prepared: &Dataset,
    train: &[usize],
    test: &[usize],
    p: &PipelineSpec,
    model: &ModelSpec,
    seed: u64,
) -> Result<FoldFit> {
    let mut train_d = prepared.select_rows(train);
    let mut test_d = prepared.select_rows(test);
    if p.swap != SwapMode::Off {
        apply_swap(&mut train_d, seed, 0)?;
        if p.swap == SwapMode::TrainAndTest {
            apply_swap(&mut test_d, seed, 1)?;
        }
    }
    let mut probe = None;
    let standardizer = if p.standardize {
        let all: Vec<usize> = (0..train_d.n_rows()).collect();
        let s = fit_standardizer(&train_d, &all)?;
        train_d = apply_standardizer(&s, &train_d);
        test_d = apply_standardizer(&s, &test_d);
        let cols: Vec<usize> = s.features.iter().map(|c| c.column).collect();
        probe = Some(StandardizationProbe {
            train_means: column_means(&train_d.features, &cols),
            test_means: column_means(&test_d.features, &cols),
        });
        Some(s)
    } else {
        None
    };
    let (x_train, x_test, confound_model) = match p.cr {
        CrVariant::None => (train_d.features.clone(), test_d.features.clone(), None),
        CrVariant::Confounds | CrVariant::Taco => {
            let names: Vec<String> = train_d.confound_columns.iter().map(|c| c.name.clone()).collect();
            let m = fit_cr_named(&train_d.features, &train_d.confounds, &names)?;
            let (tr_cr, tr_hat) = transform_cr(&m, &train_d.features, &train_d.confounds)?;
            let (te_cr, te_hat) = transform_cr(&m, &test_d.features, &test_d.confounds)?;
            match p.cr_output {
                CrOutput::Residuals => (tr_cr, te_cr, Some(m)),
                CrOutput::Fitted => (tr_hat, te_hat, Some(m)),
            }
        }
    };
    let mut spec = model.clone();
    spec.seed = seed;
    let fitted = models::fit(&spec, train_d.target_kind, &x_train, train_d.target.as_slice().unwrap())?;
    let s = fitted.predict_scores(&x_test)?;
    let value = score(test_d.target_kind, test_d.target.as_slice().unwrap(), s.as_slice().unwrap())?;
    Ok(FoldFit {
        score: value,
        pipeline: FittedPipeline {
            spec: PipelineSpec {
                model: spec,
                ..p.clone()
            },
            standardizer,
            confound_model,
            model: fitted,
        },
        probe,
    })
}

fn apply_grid_value(spec: &mut ModelSpec, param: &str, v: f64) -> Result<()> {
    match param {
        "max_depth" => spec.max_depth = Some(v as usize),
        "min_samples_leaf" => spec.min_samples_leaf = v as usize,
        "n_trees" => spec.n_trees = v as usize,
        "ridge_lambda" => spec.ridge_lambda = v,
        "hidden_units" => spec.hidden_units = v as usize,
        "learning_rate" => spec.learning_rate = v,
        "epochs" => spec.epochs = v as usize,
        other => return Err(Error::InvalidInput(format!("unknown grid parameter `{other}`"))),
    }
    Ok(())
}

fn grid_candidates(base: &ModelSpec, grid: &[GridAxis]) -> Result<Vec<ModelSpec>> {
    let mut out = vec![base.clone()];
    for axis in grid {
        let mut next = Vec::with_capacity(out.len() * axis.values.len());
        for spec in &out {
            for &v in &axis.values {
                let mut s = spec.clone();
                apply_grid_value(&mut s, &axis.param, v)?;
                next.push(s);
            }
        }
        out = next;
    }
    Ok(out)
}

/// Picks the grid candidate with the best mean inner-CV score (first on
/// ties) using only the outer training rows.
fn inner_select(prepared: &Dataset, train: &[usize], p: &PipelineSpec, search: &InnerSearch, seed: u64) -> Result<ModelSpec> {
    let candidates = grid_candidates(&p.model, &search.grid)?;
    if candidates.len() == 1 {
        return Ok(candidates.into_iter().next().unwrap());
    }
    let sub = prepared.select_rows(train);
    let keys = sub.stratification_keys();
    let folds = fold_assignment(sub.n_rows(), keys.as_deref(), search.inner_folds, rng::derive(seed, &[stream::INNER]), 0);
    let mut best: Option<(f64, ModelSpec)> = None;
    for cand in candidates {
        let mut scores = Vec::new();
        for k in 0..search.inner_folds {
            let tr: Vec<usize> = (0..sub.n_rows()).filter(|&i| folds[i] != k).collect();
            let te: Vec<usize> = (0..sub.n_rows()).filter(|&i| folds[i] == k).collect();
            if let Ok(f) = fit_and_score(&sub, &tr, &te, p, &cand, rng::derive(seed, &[stream::INNER, k as u64])) {
                scores.push(f.score);
            }
        }
        if scores.is_empty() {
            continue;
        }
        let m = metrics::mean(&scores);
        if best.as_ref().map_or(true, |(b, _)| m > *b) {
            best = Some((m, cand));
        }
    }
    best.map(|(_, s)| s)
        .ok_or_else(|| Error::UndefinedMetric("no inner-search candidate could be scored".into()))
}

/// Result of one (repeat, fold) cell.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FoldOutcome {
    pub repeat: usize,
    pub fold: usize,
    pub score: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
    pub n_train: usize,
    pub n_test: usize,
    /// Node count of the fitted tree (tree models only).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tree_nodes: Option<usize>,
    #[serde(skip)]
    pub probe: Option<StandardizationProbe>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CvResult {
    pub outcomes: Vec<FoldOutcome>,
}

impl CvResult {
    /// Scores of folds that could be evaluated, in (repeat, fold) order.
    pub fn valid_scores(&self) -> Vec<f64> {
        self.outcomes.iter().filter_map(|o| o.score).collect()
    }

    pub fn summary(&self) -> Option<ScoreSummary> {
        ScoreSummary::from_scores(self.valid_scores())
    }

    pub fn mean(&self) -> f64 {
        self.summary().map_or(f64::NAN, |s| s.mean)
    }
}

/// Repeated k-fold evaluation of a pipeline.
///
/// Fold partitions are seeded by `(scheme.seed, repeat)`, model seeds by
/// `(scheme.seed, repeat, fold, model.seed)`. Folds run in parallel;
/// outcomes are ordered by (repeat, fold).
pub fn run_cv(d: &Dataset, p: &PipelineSpec, s: &CvScheme) -> Result<CvResult> {
    s.validate(d.n_rows())?;
    p.model.validate()?;
    let prepared = prepare(d, p)?;
    let keys = if s.stratified { prepared.stratification_keys() } else { None };

    let shuffled: Vec<Dataset> = match p.shuffle {
        ShuffleMode::Off => Vec::new(),
        ShuffleMode::Once => vec![data::shuffle_features(&prepared, rng::derive(s.seed, &[stream::SHUFFLE]))],
        ShuffleMode::PerRepeat => (0..s.repeats)
            .map(|r| data::shuffle_features(&prepared, rng::derive(s.seed, &[stream::SHUFFLE, r as u64])))
            .collect(),
    };
    let source = |r: usize| -> &Dataset {
        match p.shuffle {
            ShuffleMode::Off => &prepared,
            ShuffleMode::Once => &shuffled[0],
            ShuffleMode::PerRepeat => &shuffled[r],
        }
    };

    let assignments: Vec<Vec<usize>> = (0..s.repeats)
        .map(|r| fold_assignment(prepared.n_rows(), keys.as_deref(), s.folds, s.seed, r))
        .collect();
    let jobs: Vec<(usize, usize)> = (0..s.repeats).flat_map(|r| (0..s.folds).map(move |k| (r, k))).collect();

    let outcomes: Vec<FoldOutcome> = jobs
        .par_iter()
        .map(|&(r, k)| {
            let a = &assignments[r];
            let train: Vec<usize> = (0..a.len()).filter(|&i| a[i] != k).collect();
            let test: Vec<usize> = (0..a.len()).filter(|&i| a[i] == k).collect();
            let seed = rng::derive(s.seed, &[stream::MODEL, r as u64, k as u64, p.model.seed]);
            let data = source(r);
            let result = match &s.inner_search {
                Some(search) => inner_select(data, &train, p, search, seed)
                    .and_then(|spec| fit_and_score(data, &train, &test, p, &spec, seed)),
                None => fit_and_score(data, &train, &test, p, &p.model, seed),
            };
            match result {
                Ok(f) => FoldOutcome {
                    repeat: r,
                    fold: k,
                    score: Some(f.score),
                    error: None,
                    n_train: train.len(),
                    n_test: test.len(),
                    tree_nodes: f.pipeline.model.as_tree().map(|t| t.nodes.len()),
                    probe: f.probe,
                },
                Err(e) => {
                    warn!("repeat {r} fold {k} skipped: {e}");
                    FoldOutcome {
                        repeat: r,
                        fold: k,
                        score: None,
                        error: Some(e.to_string()),
                        n_train: train.len(),
                        n_test: test.len(),
                        tree_nodes: None,
                        probe: None,
                    }
                }
            }
        })
        .collect();
    Ok(CvResult { outcomes })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HoldoutResult {
    pub score: f64,
    pub train_rows: Vec<usize>,
    pub test_rows: Vec<usize>,
    pub fitted: FittedPipeline,
}

/// Single train/test split analogue of [`run_cv`]. Classification targets
/// are split stratified.
pub fn run_holdout(d: &Dataset, p: &PipelineSpec, test_fraction: f64, seed: u64) -> Result<HoldoutResult> {
    p.model.validate()?;
    let prepared = prepare(d, p)?;
    let keys = prepared.stratification_keys();
    let (train, test) = data::split_indices(prepared.n_rows(), keys.as_deref(), test_fraction, seed)?;
    let source = match p.shuffle {
        ShuffleMode::Off => prepared,
        _ => data::shuffle_features(&prepared, rng::derive(seed, &[stream::SHUFFLE])),
    };
    let model_seed = rng::derive(seed, &[stream::MODEL, p.model.seed]);
    let fit = fit_and_score(&source, &train, &test, p, &p.model, model_seed)?;
    Ok(HoldoutResult {
        score: fit.score,
        train_rows: train,
        test_rows: test,
        fitted: fit.pipeline,
    })
}

// ---------------------------------------------------------------------------
// Bayesian correlated t-test with a region of practical equivalence
// ---------------------------------------------------------------------------

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Decision {
    MeaningfullyHigher,
    MeaningfullyLower,
    PracticallyEquivalent,
    Undecided,
}

impl Decision {
    pub fn as_str(&self) -> &'static str {
        match self {
            Decision::MeaningfullyHigher => "meaningfully_higher",
            Decision::MeaningfullyLower => "meaningfully_lower",
            Decision::PracticallyEquivalent => "practically_equivalent",
            Decision::Undecided => "undecided",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RopeConfig {
    pub halfwidth: f64,
    /// Correlation heuristic ρ; `None` means `1 / folds` of the scheme.
    pub test_fraction: Option<f64>,
    pub decision_threshold: f64,
}

impl Default for RopeConfig {
    fn default() -> Self {
        Self {
            halfwidth: 0.01,
            test_fraction: None,
            decision_threshold: 0.95,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RopeResult {
    /// Posterior mass of `a − b < −halfwidth`.
    pub p_left: f64,
    pub p_rope: f64,
    /// Posterior mass of `a − b > halfwidth`.
    pub p_right: f64,
    pub rope_halfwidth: f64,
    pub mean_difference: f64,
    pub n: usize,
    pub decision: Decision,
}

/// Compares paired fold scores `a` and `b`.
///
/// The posterior of the mean difference is a Student-t with `n − 1`
/// degrees of freedom, location `mean(d)` and scale
/// `sqrt((1/n + ρ/(1−ρ)) · var(d))`, `ρ = test_fraction`. With zero
/// variance all mass sits at `mean(d)`.
pub fn rope_compare(a: &[f64], b: &[f64], halfwidth: f64, test_fraction: f64, decision_threshold: f64) -> Result<RopeResult> {
    if a.len() != b.len() {
        return Err(Error::DimensionMismatch(format!("{} vs {} paired scores", a.len(), b.len())));
    }
    let n = a.len();
    if n < 2 {
        return Err(Error::InvalidInput("ROPE comparison needs at least 2 pairs".into()));
    }
    if !(test_fraction > 0.0 && test_fraction < 1.0) || !(halfwidth >= 0.0) {
        return Err(Error::InvalidInput("ROPE needs 0 < test_fraction < 1 and halfwidth >= 0".into()));
    }
    let d: Vec<f64> = a.iter().zip(b).map(|(x, y)| x - y).collect();
    if d.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("paired scores".into()));
    }
    let mean = metrics::mean(&d);
    let var = d.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
    let r = halfwidth;
    let (p_left, p_right) = if var == 0.0 {
        (
            if mean < -r { 1.0 } else { 0.0 },
            if mean > r { 1.0 } else { 0.0 },
        )
    } else {
        let rho = test_fraction;
        let scale = ((1.0 / n as f64 + rho / (1.0 - rho)) * var).sqrt();
        let t = StudentsT::new(0.0, 1.0, (n - 1) as f64).expect("valid Student-t");
        // Written so that negating `d` exchanges the two expressions exactly.
        (t.cdf((-r - mean) / scale), t.cdf((mean - r) / scale))
    };
    let p_rope = (1.0 - (p_left + p_right)).max(0.0);
    let decision = if p_right > decision_threshold {
        Decision::MeaningfullyHigher
    } else if p_left > decision_threshold {
        Decision::MeaningfullyLower
    } else if p_rope > decision_threshold {
        Decision::PracticallyEquivalent
    } else {
        Decision::Undecided
    };
    Ok(RopeResult {
        p_left,
        p_rope,
        p_right,
        rope_halfwidth: halfwidth,
        mean_difference: mean,
        n,
        decision,
    })
}

/// Applies [`rope_compare`] with a config; `folds` resolves the default ρ.
pub fn rope_compare_with(a: &[f64], b: &[f64], cfg: &RopeConfig, folds: usize) -> Result<RopeResult> {
    let rho = cfg.test_fraction.unwrap_or(1.0 / folds as f64);
    rope_compare(a, b, cfg.halfwidth, rho, cfg.decision_threshold)
}

/// Convenience: a dummy model of the same task.
pub fn dummy_pipeline() -> PipelineSpec {
    PipelineSpec::new(ModelSpec::new(ModelKind::Dummy))
}
