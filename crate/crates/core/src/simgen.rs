//! Seeded generators for the confound-leakage mechanisms.
//!
//! Every generator is a pure function of its [`SimSpec`]: the same spec
//! produces bit-identical datasets.

use std::fmt;
use std::str::FromStr;

use ndarray::{Array1, Array2};
use rand::seq::SliceRandom;
use rand::Rng as _;
use rand_distr::{ChiSquared, Distribution, Normal, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::data::{ColumnInfo, Dataset, TargetKind};
use crate::error::{Error, Result};
use crate::rng::{self, stream, Rng};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SimKind {
    WalkthroughRegression,
    OpposingExtremes,
    SkewedFeatures,
    BinaryBalanced,
    RoundedFeature,
}

impl SimKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            SimKind::WalkthroughRegression => "walkthrough_regression",
            SimKind::OpposingExtremes => "opposing_extremes",
            SimKind::SkewedFeatures => "skewed_features",
            SimKind::BinaryBalanced => "binary_balanced",
            SimKind::RoundedFeature => "rounded_feature",
        }
    }
}

impl fmt::Display for SimKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for SimKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Ok(match s.trim().to_ascii_lowercase().replace('-', "_").as_str() {
            "walkthrough_regression" | "walkthrough" => SimKind::WalkthroughRegression,
            "opposing_extremes" | "extremes" => SimKind::OpposingExtremes,
            "skewed_features" | "skewed" => SimKind::SkewedFeatures,
            "binary_balanced" | "swap" | "balanced" => SimKind::BinaryBalanced,
            "rounded_feature" | "rounded" => SimKind::RoundedFeature,
            other => return Err(Error::InvalidInput(format!("unknown simulation kind `{other}`"))),
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FeatureDist {
    Normal,
    Chi2Df3,
}

impl FromStr for FeatureDist {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "normal" => Ok(FeatureDist::Normal),
            "chi2" | "chi2_df3" | "chi2df3" => Ok(FeatureDist::Chi2Df3),
            other => Err(Error::InvalidInput(format!("unknown distribution `{other}`"))),
        }
    }
}

/// Generator description. Parameters that a kind does not use are ignored
/// but still echoed, so a sidecar round-trips to the identical spec.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SimSpec {
    pub kind: SimKind,
    pub n: usize,
    pub seed: u64,
    /// Feature count (skewed_features).
    pub p: usize,
    pub dist: FeatureDist,
    /// walkthrough_regression: centre of the confound = 0 feature
    /// distribution, `Normal(control_center, 1)`.
    pub control_center: f64,
    /// walkthrough_regression: the confound = 1 feature is an even mixture
    /// of `Normal(±mixture_center, mixture_sd)`.
    pub mixture_center: f64,
    pub mixture_sd: f64,
    /// walkthrough_regression: sd of the target noise added to the confound.
    pub target_noise_sd: f64,
    pub extreme_fraction: f64,
    pub extreme_center: f64,
    pub extreme_sd: f64,
    /// opposing_extremes: also emit an independent extreme-free test set.
    pub exclude_extremes_test: bool,
    /// rounded_feature: decimals kept by half-to-even rounding.
    pub decimals: u32,
}

impl Default for SimSpec {
    fn default() -> Self {
        Self {
            kind: SimKind::BinaryBalanced,
            n: 1000,
            seed: 0,
            p: 1,
            dist: FeatureDist::Normal,
            control_center: WALKTHROUGH_CONTROL_CENTER,
            mixture_center: 3.0,
            mixture_sd: 0.5,
            target_noise_sd: 0.5,
            extreme_fraction: 0.05,
            extreme_center: 4.0,
            extreme_sd: 0.2,
            exclude_extremes_test: false,
            decimals: 1,
        }
    }
}

/// Default centre of the confound = 0 feature distribution in the
/// walk-through regression. It sits on the upper mixture component of the
/// confound = 1 group, so the raw feature separates the groups only
/// partially while group-mean removal pulls the confound = 0 group in
/// between the two confound = 1 modes.
pub const WALKTHROUGH_CONTROL_CENTER: f64 = 3.0;

impl SimSpec {
    pub fn new(kind: SimKind, n: usize, seed: u64) -> Self {
        Self {
            kind,
            n,
            seed,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidInput(m));
        if self.n < 20 {
            return bad(format!("simulations need n >= 20, got {}", self.n));
        }
        match self.kind {
            SimKind::SkewedFeatures if !(1..=100).contains(&self.p) => {
                bad(format!("skewed_features needs 1 <= p <= 100, got {}", self.p))
            }
            SimKind::BinaryBalanced if self.n % 4 != 0 => {
                bad(format!("binary_balanced needs n divisible by 4, got {}", self.n))
            }
            SimKind::OpposingExtremes if !(self.extreme_fraction > 0.0 && self.extreme_fraction < 0.5) => {
                bad(format!("extreme_fraction must lie in (0, 0.5), got {}", self.extreme_fraction))
            }
            SimKind::OpposingExtremes if !(self.extreme_sd > 0.0) => bad("extreme_sd must be positive".into()),
            SimKind::WalkthroughRegression if !(self.mixture_sd > 0.0 && self.target_noise_sd > 0.0) => {
                bad("mixture_sd and target_noise_sd must be positive".into())
            }
            SimKind::RoundedFeature if self.decimals > 15 => bad("decimals must be <= 15".into()),
            _ => Ok(()),
        }
    }
}

/// Generator output: named datasets plus optional per-row flags.
#[derive(Clone, Debug, PartialEq)]
pub struct SimOutput {
    pub datasets: Vec<(String, Dataset)>,
    /// opposing_extremes: rows drawn from an extreme cluster.
    pub extreme_rows: Option<Vec<bool>>,
}

impl SimOutput {
    pub fn main(&self) -> &Dataset {
        &self.datasets[0].1
    }

    pub fn get(&self, name: &str) -> Option<&Dataset> {
        self.datasets.iter().find(|(n, _)| n == name).map(|(_, d)| d)
    }
}

pub fn generate(spec: &SimSpec) -> Result<SimOutput> {
    spec.validate()?;
    Ok(match spec.kind {
        SimKind::WalkthroughRegression => SimOutput {
            datasets: vec![("data".into(), gen_walkthrough_regression(spec)?)],
            extreme_rows: None,
        },
        SimKind::OpposingExtremes => {
            let out = gen_opposing_extremes(spec)?;
            let mut datasets = vec![("data".into(), out.data)];
            if let Some(t) = out.extreme_free_test {
                datasets.push(("extreme_free_test".into(), t));
            }
            SimOutput {
                datasets,
                extreme_rows: Some(out.extreme),
            }
        }
        SimKind::SkewedFeatures => SimOutput {
            datasets: vec![("data".into(), gen_skewed_features(spec.n, spec.p, spec.dist, spec.seed)?)],
            extreme_rows: None,
        },
        SimKind::BinaryBalanced => SimOutput {
            datasets: vec![("data".into(), gen_binary_balanced(spec.n, spec.seed)?)],
            extreme_rows: None,
        },
        SimKind::RoundedFeature => {
            let (raw, rounded) = gen_rounded_feature(spec.n, spec.seed, spec.decimals)?;
            SimOutput {
                datasets: vec![("raw".into(), raw), ("rounded".into(), rounded)],
                extreme_rows: None,
            }
        }
    })
}

fn sim_rng(seed: u64, kind: SimKind) -> Rng {
    rng::derived_rng(seed, &[stream::SIM, kind as u64])
}

fn normal(r: &mut Rng, mean: f64, sd: f64) -> f64 {
    let z: f64 = StandardNormal.sample(r);
    mean + sd * z
}

fn no_confounds(n: usize) -> (Array2<f64>, Vec<ColumnInfo>) {
    (Array2::zeros((n, 0)), Vec::new())
}

/// Binary confound `c ~ Bernoulli(0.5)`, target `c + Normal(0, noise_sd)`,
/// and one feature whose distribution depends on `c`:
/// `Normal(control_center, 1)` for `c = 0`, an even mixture of
/// `Normal(±mixture_center, mixture_sd)` for `c = 1`.
pub fn gen_walkthrough_regression(spec: &SimSpec) -> Result<Dataset> {
    let n = spec.n;
    let mut r = sim_rng(spec.seed, SimKind::WalkthroughRegression);
    let mut x = Array2::zeros((n, 1));
    let mut c = Array2::zeros((n, 1));
    let mut y = Array1::zeros(n);
    for i in 0..n {
        let ci = if r.gen_bool(0.5) { 1.0 } else { 0.0 };
        let xi = if ci == 0.0 {
            normal(&mut r, spec.control_center, 1.0)
        } else {
            let sign = if r.gen_bool(0.5) { 1.0 } else { -1.0 };
            normal(&mut r, sign * spec.mixture_center, spec.mixture_sd)
        };
        c[[i, 0]] = ci;
        x[[i, 0]] = xi;
        y[i] = ci + normal(&mut r, 0.0, spec.target_noise_sd);
    }
    Dataset::new(
        x,
        vec![ColumnInfo::continuous("x")],
        y,
        "y",
        TargetKind::Regression,
        c,
        vec![ColumnInfo::binary("c")],
    )
}

#[derive(Clone, Debug, PartialEq)]
pub struct OpposingExtremes {
    pub data: Dataset,
    pub extreme: Vec<bool>,
    pub extreme_free_test: Option<Dataset>,
}

fn balanced_labels(n: usize, r: &mut Rng) -> Vec<f64> {
    let mut y: Vec<f64> = (0..n).map(|i| if i < n / 2 { 0.0 } else { 1.0 }).collect();
    y.shuffle(r);
    y
}

/// Balanced binary target; the feature is standard normal for both classes
/// except that `extreme_fraction` of each class is redrawn around
/// `−extreme_center` (class 0) or `+extreme_center` (class 1).
pub fn gen_opposing_extremes(spec: &SimSpec) -> Result<OpposingExtremes> {
    spec.validate()?;
    let n = spec.n;
    let mut r = sim_rng(spec.seed, SimKind::OpposingExtremes);
    let y = balanced_labels(n, &mut r);
    let mut x: Vec<f64> = (0..n).map(|_| normal(&mut r, 0.0, 1.0)).collect();
    let mut extreme = vec![false; n];
    for class in [0.0, 1.0] {
        let mut rows: Vec<usize> = (0..n).filter(|&i| y[i] == class).collect();
        let k = (spec.extreme_fraction * rows.len() as f64).round() as usize;
        rows.shuffle(&mut r);
        let center = if class == 0.0 { -spec.extreme_center } else { spec.extreme_center };
        for &i in &rows[..k] {
            x[i] = normal(&mut r, center, spec.extreme_sd);
            extreme[i] = true;
        }
    }
    let data = classification_dataset(x, y)?;
    let extreme_free_test = if spec.exclude_extremes_test {
        let m = ((n as f64) * 0.3).round().max(4.0) as usize;
        let yt = balanced_labels(m, &mut r);
        let xt: Vec<f64> = (0..m).map(|_| normal(&mut r, 0.0, 1.0)).collect();
        Some(classification_dataset(xt, yt)?)
    } else {
        None
    };
    Ok(OpposingExtremes {
        data,
        extreme,
        extreme_free_test,
    })
}

fn classification_dataset(x: Vec<f64>, y: Vec<f64>) -> Result<Dataset> {
    let n = y.len();
    let (c, cc) = no_confounds(n);
    Dataset::new(
        Array2::from_shape_vec((n, 1), x).expect("shape"),
        vec![ColumnInfo::continuous("x")],
        Array1::from(y),
        "y",
        TargetKind::Classification,
        c,
        cc,
    )
}

/// `p` i.i.d. features from `dist` and an independent standard normal
/// target.
pub fn gen_skewed_features(n: usize, p: usize, dist: FeatureDist, seed: u64) -> Result<Dataset> {
    if !(1..=100).contains(&p) {
        return Err(Error::InvalidInput(format!("skewed_features needs 1 <= p <= 100, got {p}")));
    }
    let mut r = sim_rng(seed, SimKind::SkewedFeatures);
    let chi2 = ChiSquared::new(3.0).expect("valid df");
    let mut x = Array2::zeros((n, p));
    for i in 0..n {
        for j in 0..p {
            x[[i, j]] = match dist {
                FeatureDist::Normal => normal(&mut r, 0.0, 1.0),
                FeatureDist::Chi2Df3 => chi2.sample(&mut r),
            };
        }
    }
    let y: Array1<f64> = (0..n).map(|_| normal(&mut r, 0.0, 1.0)).collect();
    let (c, cc) = no_confounds(n);
    Dataset::new(
        x,
        (0..p).map(|j| ColumnInfo::continuous(format!("x{j}"))).collect(),
        y,
        "y",
        TargetKind::Regression,
        c,
        cc,
    )
}

/// Binary feature exactly balanced within each class: each of the four
/// (feature, class) cells holds `n/4` rows. The cell index `2·class +
/// feature` is attached as fold strata so every fold keeps the balance.
pub fn gen_binary_balanced(n: usize, seed: u64) -> Result<Dataset> {
    if n % 4 != 0 || n < 4 {
        return Err(Error::InvalidInput(format!("binary_balanced needs n divisible by 4, got {n}")));
    }
    let mut r = sim_rng(seed, SimKind::BinaryBalanced);
    let mut cells: Vec<u32> = (0..n).map(|i| (i / (n / 4)) as u32).collect();
    cells.shuffle(&mut r);
    let x: Vec<f64> = cells.iter().map(|&c| (c & 1) as f64).collect();
    let y: Vec<f64> = cells.iter().map(|&c| (c >> 1) as f64).collect();
    let (c, cc) = no_confounds(n);
    Dataset::new(
        Array2::from_shape_vec((n, 1), x).expect("shape"),
        vec![ColumnInfo::binary("x")],
        Array1::from(y),
        "y",
        TargetKind::Classification,
        c,
        cc,
    )?
    .with_strata(cells)
}

/// Exchanges the values of two rows within `rows` that hold different
/// values (and, with `groups`, belong to different groups). The pair is
/// drawn uniformly from all qualifying pairs. The column's multiset of
/// values is unchanged.
pub fn swap_two_values(column: &mut [f64], rows: &[usize], groups: Option<&[f64]>, seed: u64) -> Result<()> {
    let valid = |a: usize, b: usize| {
        column[a] != column[b] && groups.map_or(true, |g| g[a] != g[b])
    };
    let mut r = rng::rng(seed);
    let m = rows.len();
    if m >= 2 {
        for _ in 0..10_000 {
            let a = rows[r.gen_range(0..m)];
            let b = rows[r.gen_range(0..m)];
            if valid(a, b) {
                column.swap(a, b);
                return Ok(());
            }
        }
        // Qualifying pairs are rare: enumerate them.
        let mut pairs = Vec::new();
        for (k, &a) in rows.iter().enumerate() {
            for &b in &rows[k + 1..] {
                if valid(a, b) {
                    pairs.push((a, b));
                }
            }
        }
        if let Some(&(a, b)) = pairs.choose(&mut r) {
            column.swap(a, b);
            return Ok(());
        }
    }
    Err(Error::InvalidInput("no two distinct values in scope to swap".into()))
}

/// Half-to-even rounding to `decimals` places.
pub fn round_half_even(v: f64, decimals: u32) -> f64 {
    let f = 10f64.powi(decimals as i32);
    (v * f).round_ties_even() / f
}

/// Standard normal feature and independent standard normal target; the
/// second dataset holds the same feature rounded to `decimals` places.
pub fn gen_rounded_feature(n: usize, seed: u64, decimals: u32) -> Result<(Dataset, Dataset)> {
    if n < 20 {
        return Err(Error::InvalidInput(format!("simulations need n >= 20, got {n}")));
    }
    let mut r = sim_rng(seed, SimKind::RoundedFeature);
    let dist = Normal::new(0.0, 1.0).expect("valid normal");
    let x: Vec<f64> = (0..n).map(|_| dist.sample(&mut r)).collect();
    let y: Array1<f64> = (0..n).map(|_| dist.sample(&mut r)).collect();
    let rounded: Vec<f64> = x.iter().map(|&v| round_half_even(v, decimals)).collect();
    let make = |x: Vec<f64>| -> Result<Dataset> {
        let (c, cc) = no_confounds(n);
        Dataset::new(
            Array2::from_shape_vec((n, 1), x).expect("shape"),
            vec![ColumnInfo::continuous("x")],
            y.clone(),
            "y",
            TargetKind::Regression,
            c,
            cc,
        )
    };
    Ok((make(x)?, make(rounded)?))
}
