//! Model zoo: dummy baselines, linear/logistic regression, CART trees,
//! random forests and a one-hidden-layer MLP.

pub mod forest;
pub mod linear;
pub mod mlp;
pub mod tree;

use std::fmt;
use std::str::FromStr;

use ndarray::{Array1, Array2};
use serde::{Deserialize, Serialize};

use crate::data::TargetKind;
use crate::error::{Error, Result};
use crate::rng::{self, stream};

pub use linear::LinearModel;
pub use mlp::Mlp;
pub use tree::{Node, Tree};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelKind {
    Dummy,
    /// Least squares for regression targets, logistic regression for
    /// classification targets.
    Linear,
    Logistic,
    Tree,
    Forest,
    Mlp,
}

impl ModelKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            ModelKind::Dummy => "dummy",
            ModelKind::Linear => "linear",
            ModelKind::Logistic => "logistic",
            ModelKind::Tree => "tree",
            ModelKind::Forest => "forest",
            ModelKind::Mlp => "mlp",
        }
    }
}

impl fmt::Display for ModelKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ModelKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Ok(match s.trim().to_ascii_lowercase().as_str() {
            "dummy" => ModelKind::Dummy,
            "linear" | "lr" => ModelKind::Linear,
            "logistic" => ModelKind::Logistic,
            "tree" | "dt" => ModelKind::Tree,
            "forest" | "rf" => ModelKind::Forest,
            "mlp" => ModelKind::Mlp,
            other => return Err(Error::InvalidInput(format!("unknown model kind `{other}`"))),
        })
    }
}

/// Number of candidate features per forest split.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MtryRule {
    /// `sqrt(p)` for classification, `p/3` for regression.
    Auto,
    All,
    Sqrt,
    Third,
    Fixed(usize),
}

impl MtryRule {
    pub fn resolve(&self, p: usize, task: TargetKind) -> usize {
        let m = match self {
            MtryRule::Auto => match task {
                TargetKind::Classification => (p as f64).sqrt().floor() as usize,
                TargetKind::Regression => p / 3,
            },
            MtryRule::All => p,
            MtryRule::Sqrt => (p as f64).sqrt().floor() as usize,
            MtryRule::Third => p / 3,
            MtryRule::Fixed(m) => *m,
        };
        m.clamp(1, p.max(1))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ModelSpec {
    pub kind: ModelKind,
    /// Report label; defaults to the kind name.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub name: Option<String>,
    pub max_depth: Option<usize>,
    pub min_samples_leaf: usize,
    pub n_trees: usize,
    pub mtry: MtryRule,
    pub bootstrap: bool,
    pub ridge_lambda: f64,
    pub max_iter: usize,
    pub tol: f64,
    pub hidden_units: usize,
    pub epochs: usize,
    pub learning_rate: f64,
    pub batch_size: usize,
    pub momentum: f64,
    pub l2: f64,
    pub seed: u64,
}

impl Default for ModelSpec {
    fn default() -> Self {
        Self {
            kind: ModelKind::Dummy,
            name: None,
            max_depth: None,
            min_samples_leaf: 1,
            n_trees: 100,
            mtry: MtryRule::Auto,
            bootstrap: true,
            ridge_lambda: 1e-8,
            max_iter: 1000,
            tol: 1e-6,
            hidden_units: 100,
            epochs: 200,
            learning_rate: 0.01,
            batch_size: 32,
            momentum: 0.9,
            l2: 1e-4,
            seed: 0,
        }
    }
}

impl ModelSpec {
    pub fn new(kind: ModelKind) -> Self {
        Self {
            kind,
            ..Self::default()
        }
    }

    pub fn tree(max_depth: Option<usize>) -> Self {
        Self {
            max_depth,
            ..Self::new(ModelKind::Tree)
        }
    }

    pub fn forest(n_trees: usize) -> Self {
        Self {
            n_trees,
            ..Self::new(ModelKind::Forest)
        }
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn label(&self) -> String {
        self.name.clone().unwrap_or_else(|| self.kind.to_string())
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |what: &str| Err(Error::InvalidInput(format!("model `{}`: {what}", self.label())));
        if self.min_samples_leaf == 0 {
            return bad("min_samples_leaf must be positive");
        }
        if self.max_depth == Some(0) {
            return bad("max_depth must be positive");
        }
        if self.kind == ModelKind::Forest && self.n_trees == 0 {
            return bad("n_trees must be positive");
        }
        if self.ridge_lambda < 0.0 || !self.ridge_lambda.is_finite() {
            return bad("ridge_lambda must be non-negative");
        }
        if self.kind == ModelKind::Mlp
            && (self.hidden_units == 0 || self.batch_size == 0 || !(self.learning_rate > 0.0))
        {
            return bad("mlp needs positive hidden_units, batch_size and learning_rate");
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum ModelState {
    Dummy { value: f64 },
    Linear(LinearModel),
    Logistic(LinearModel),
    Tree(Tree),
    Forest { trees: Vec<Tree> },
    Mlp(Mlp),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FittedModel {
    pub task: TargetKind,
    pub n_features: usize,
    pub n_train: usize,
    pub state: ModelState,
}

pub(crate) fn columns_of(x: &Array2<f64>) -> Vec<Vec<f64>> {
    x.columns().into_iter().map(|c| c.to_vec()).collect()
}

fn tree_params(spec: &ModelSpec, task: TargetKind, mtry: Option<usize>) -> tree::TreeParams {
    tree::TreeParams {
        task,
        max_depth: spec.max_depth,
        min_samples_leaf: spec.min_samples_leaf,
        mtry,
    }
}

/// Fits a model. Classification targets must be coded 0/1.
pub fn fit(spec: &ModelSpec, task: TargetKind, x: &Array2<f64>, y: &[f64]) -> Result<FittedModel> {
    spec.validate()?;
    let (n, p) = x.dim();
    if n != y.len() {
        return Err(Error::DimensionMismatch(format!("{n} rows vs {} targets", y.len())));
    }
    if n < 2 {
        return Err(Error::InvalidInput("fitting needs at least 2 rows".into()));
    }
    if x.iter().chain(y).any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("model input".into()));
    }
    if task == TargetKind::Classification && y.iter().any(|&v| v != 0.0 && v != 1.0) {
        return Err(Error::InvalidTarget("classification labels must be 0/1".into()));
    }
    let state = match (spec.kind, task) {
        (ModelKind::Dummy, _) => ModelState::Dummy {
            value: y.iter().sum::<f64>() / n as f64,
        },
        (ModelKind::Linear, TargetKind::Regression) => ModelState::Linear(linear::fit_linear(x, y, spec.ridge_lambda)),
        (ModelKind::Linear | ModelKind::Logistic, TargetKind::Classification) => ModelState::Logistic(
            linear::fit_logistic(x, y, spec.ridge_lambda, spec.max_iter, spec.tol)?.model,
        ),
        (ModelKind::Logistic, TargetKind::Regression) => {
            return Err(Error::InvalidTarget("logistic regression needs a classification target".into()))
        }
        (ModelKind::Tree, _) => {
            let cols = columns_of(x);
            ModelState::Tree(tree::fit_tree(&cols, y, (0..n).collect(), &tree_params(spec, task, None), None))
        }
        (ModelKind::Forest, _) => {
            let cols = columns_of(x);
            let m = spec.mtry.resolve(p, task);
            let params = tree_params(spec, task, Some(m));
            ModelState::Forest {
                trees: forest::fit_forest(&cols, y, &params, spec.n_trees, spec.bootstrap, spec.seed),
            }
        }
        (ModelKind::Mlp, _) => {
            let params = mlp::MlpParams {
                hidden_units: spec.hidden_units,
                epochs: spec.epochs,
                learning_rate: spec.learning_rate,
                batch_size: spec.batch_size,
                momentum: spec.momentum,
                l2: spec.l2,
            };
            let mut r = rng::derived_rng(spec.seed, &[stream::MODEL]);
            ModelState::Mlp(mlp::fit_mlp(task, x, y, &params, &mut r))
        }
    };
    Ok(FittedModel {
        task,
        n_features: p,
        n_train: n,
        state,
    })
}

impl FittedModel {
    /// Positive-class scores in [0, 1] for classification, predictions for
    /// regression.
    pub fn predict_scores(&self, x: &Array2<f64>) -> Result<Array1<f64>> {
        if x.ncols() != self.n_features {
            return Err(Error::DimensionMismatch(format!(
                "model trained on {} features, got {}",
                self.n_features,
                x.ncols()
            )));
        }
        let rows = || x.rows().into_iter().map(|r| r.to_vec());
        Ok(match &self.state {
            ModelState::Dummy { value } => Array1::from_elem(x.nrows(), *value),
            ModelState::Linear(m) => m.decision(x),
            ModelState::Logistic(m) => linear::logistic_scores(m, x),
            ModelState::Tree(t) => rows().map(|r| t.predict_row(&r)).collect(),
            ModelState::Forest { trees } => rows().map(|r| forest::predict_forest(trees, &r)).collect(),
            ModelState::Mlp(net) => net.predict(x),
        })
    }

    pub fn kind(&self) -> ModelKind {
        match self.state {
            ModelState::Dummy { .. } => ModelKind::Dummy,
            ModelState::Linear(_) => ModelKind::Linear,
            ModelState::Logistic(_) => ModelKind::Logistic,
            ModelState::Tree(_) => ModelKind::Tree,
            ModelState::Forest { .. } => ModelKind::Forest,
            ModelState::Mlp(_) => ModelKind::Mlp,
        }
    }

    pub fn as_tree(&self) -> Option<&Tree> {
        match &self.state {
            ModelState::Tree(t) => Some(t),
            _ => None,
        }
    }
}

/// One node of a tree dump.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NodeSummary {
    pub index: usize,
    pub depth: usize,
    pub parent: Option<usize>,
    pub left: Option<usize>,
    pub right: Option<usize>,
    pub feature: Option<usize>,
    pub threshold: Option<f64>,
    pub samples: usize,
    pub value: f64,
}

/// Preorder node list of a fitted tree.
pub fn tree_structure(m: &FittedModel) -> Result<Vec<NodeSummary>> {
    let tree = m.as_tree().ok_or_else(|| Error::WrongModelKind {
        expected: "tree".into(),
        found: m.kind().to_string(),
    })?;
    Ok(tree
        .nodes
        .iter()
        .enumerate()
        .map(|(i, n)| NodeSummary {
            index: i,
            depth: n.depth,
            parent: n.parent,
            left: n.left,
            right: n.right,
            feature: n.feature,
            threshold: n.feature.map(|_| n.threshold),
            samples: n.samples,
            value: n.value,
        })
        .collect())
}

/// Indented text rendering of [`tree_structure`], one node per line.
pub fn render_tree(nodes: &[NodeSummary], feature_names: &[&str]) -> String {
    let mut out = String::new();
    for n in nodes {
        let indent = "  ".repeat(n.depth);
        match (n.feature, n.threshold) {
            (Some(f), Some(t)) => {
                let name = feature_names.get(f).copied().unwrap_or("?");
                out.push_str(&format!("{indent}[{}] {name} <= {t:.17e} (n={})\n", n.index, n.samples));
            }
            _ => out.push_str(&format!("{indent}[{}] leaf value={:.6} (n={})\n", n.index, n.value, n.samples)),
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    #[test]
    fn dummy_regressor_predicts_mean() {
        let x = array![[1.0], [2.0], [3.0]];
        let m = fit(&ModelSpec::new(ModelKind::Dummy), TargetKind::Regression, &x, &[1.0, 2.0, 6.0]).unwrap();
        assert_eq!(m.predict_scores(&array![[100.0], [-4.0]]).unwrap().to_vec(), vec![3.0, 3.0]);
    }

    #[test]
    fn dummy_classifier_predicts_prevalence() {
        let x = array![[1.0], [2.0], [3.0], [4.0]];
        let m = fit(&ModelSpec::new(ModelKind::Dummy), TargetKind::Classification, &x, &[1.0, 0.0, 0.0, 0.0]).unwrap();
        assert_eq!(m.predict_scores(&x).unwrap()[0], 0.25);
    }

    #[test]
    fn tree_structure_node_counts() {
        let x = array![[1.0], [2.0], [3.0], [4.0]];
        let leaf = fit(&ModelSpec::tree(None), TargetKind::Classification, &x, &[1.0, 1.0, 1.0, 0.0][..]).unwrap();
        assert_eq!(tree_structure(&leaf).unwrap().len(), 3);
        let single = fit(&ModelSpec::tree(None), TargetKind::Regression, &x, &[2.0; 4]).unwrap();
        assert_eq!(tree_structure(&single).unwrap().len(), 1);
        let dummy = fit(&ModelSpec::new(ModelKind::Dummy), TargetKind::Regression, &x, &[1.0, 2.0, 3.0, 4.0]).unwrap();
        assert!(matches!(tree_structure(&dummy), Err(Error::WrongModelKind { .. })));
    }

    #[test]
    fn forest_of_identical_trees_equals_tree() {
        let x = array![[1.0, 0.3], [2.0, 0.1], [3.0, 0.7], [4.0, 0.2], [5.0, 0.9], [6.0, 0.5]];
        let y = [0.0, 1.0, 0.0, 1.0, 1.0, 0.0];
        let tree = fit(&ModelSpec::tree(None), TargetKind::Classification, &x, &y).unwrap();
        let spec = ModelSpec {
            n_trees: 3,
            bootstrap: false,
            mtry: MtryRule::All,
            ..ModelSpec::new(ModelKind::Forest)
        };
        let forest = fit(&spec, TargetKind::Classification, &x, &y).unwrap();
        assert_eq!(forest.predict_scores(&x).unwrap(), tree.predict_scores(&x).unwrap());
        let ModelState::Forest { trees } = &forest.state else { panic!() };
        assert_eq!(&trees[0], tree.as_tree().unwrap());
    }

    #[test]
    fn rejects_bad_inputs() {
        let x = array![[1.0], [f64::NAN]];
        assert!(matches!(
            fit(&ModelSpec::tree(None), TargetKind::Regression, &x, &[1.0, 2.0]),
            Err(Error::NonFinite(_))
        ));
        let x = array![[1.0], [2.0]];
        assert!(fit(&ModelSpec::new(ModelKind::Logistic), TargetKind::Classification, &x, &[1.0, 1.0]).is_err());
        let m = fit(&ModelSpec::tree(None), TargetKind::Regression, &x, &[1.0, 2.0]).unwrap();
        assert!(matches!(m.predict_scores(&array![[1.0, 2.0]]), Err(Error::DimensionMismatch(_))));
    }

    #[test]
    fn mtry_rules() {
        assert_eq!(MtryRule::Auto.resolve(100, TargetKind::Classification), 10);
        assert_eq!(MtryRule::Auto.resolve(100, TargetKind::Regression), 33);
        assert_eq!(MtryRule::Auto.resolve(1, TargetKind::Regression), 1);
        assert_eq!(MtryRule::Fixed(500).resolve(10, TargetKind::Regression), 10);
    }
}
