//! Random forest, gradient-boosted trees and a linear SVM, each for binary
//! classification (targets 0 = low, 1 = high) and regression.

pub mod boosted;
pub mod forest;
pub mod svm;
pub mod tree;

use std::fmt;
use std::path::Path;
use std::str::FromStr;

use ndarray::{Array2, ArrayView2};
use serde::{Deserialize, Serialize};

use crate::container;
use crate::error::{Error, Result};
use crate::features::{apply_normaliser, fit_normaliser, Normaliser};
use crate::ingest::BinaryLabel;

pub use boosted::Boosted;
pub use forest::Forest;
pub use svm::LinearSvm;
pub use tree::Tree;

const KIND: [u8; 4] = *b"MODL";
const EXPECTED: &str = "model";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Family {
    Forest,
    Boosted,
    Svm,
}

impl Family {
    pub const ALL: [Family; 3] = [Family::Forest, Family::Boosted, Family::Svm];

    pub fn name(self) -> &'static str {
        match self {
            Family::Forest => "forest",
            Family::Boosted => "boosted",
            Family::Svm => "svm",
        }
    }
}

impl fmt::Display for Family {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Family {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Family::ALL
            .into_iter()
            .find(|f| f.name() == s)
            .ok_or_else(|| Error::Config(format!("unknown model family '{s}' (forest, boosted, svm)")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Task {
    Classify,
    Regress,
}

impl Task {
    pub fn name(self) -> &'static str {
        match self {
            Task::Classify => "classify",
            Task::Regress => "regress",
        }
    }
}

impl fmt::Display for Task {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Task {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "classify" => Ok(Task::Classify),
            "regress" => Ok(Task::Regress),
            _ => Err(Error::Config(format!("unknown task '{s}' (classify, regress)"))),
        }
    }
}

/// Learner family, task and hyperparameters. Fields a family does not use
/// are ignored.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelSpec {
    pub family: Family,
    pub task: Task,
    /// Trees in a forest, stages in boosting.
    pub trees: usize,
    /// `None` grows trees until leaves are pure.
    pub max_depth: Option<usize>,
    pub min_samples_leaf: usize,
    /// Features tried per split; default sqrt(d) (classify) or d/3 (regress)
    /// for forests and all features for boosting.
    pub max_features: Option<usize>,
    pub bootstrap: bool,
    pub learning_rate: f64,
    pub subsample: f64,
    pub lambda: f64,
    pub epochs: usize,
    /// Width of the insensitive zone for SVM regression.
    pub epsilon: f64,
    pub seed: u64,
}

/// Per-family default hyperparameters, as loaded from configuration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Hyperparameters {
    pub forest_trees: usize,
    pub forest_max_depth: usize,
    pub boosted_stages: usize,
    pub boosted_learning_rate: f64,
    pub boosted_max_depth: usize,
    pub boosted_subsample: f64,
    pub svm_lambda: f64,
    pub svm_epochs: usize,
    pub svm_epsilon: f64,
}

impl Default for Hyperparameters {
    fn default() -> Self {
        Hyperparameters {
            forest_trees: 200,
            forest_max_depth: 8,
            boosted_stages: 300,
            boosted_learning_rate: 0.05,
            boosted_max_depth: 3,
            boosted_subsample: 0.8,
            svm_lambda: 1e-3,
            svm_epochs: 50,
            svm_epsilon: 0.5,
        }
    }
}

impl Hyperparameters {
    pub fn spec(&self, family: Family, task: Task, seed: u64) -> ModelSpec {
        let (trees, max_depth) = match family {
            Family::Boosted => (self.boosted_stages, self.boosted_max_depth),
            _ => (self.forest_trees, self.forest_max_depth),
        };
        ModelSpec {
            family,
            task,
            trees,
            max_depth: Some(max_depth),
            min_samples_leaf: 1,
            max_features: None,
            bootstrap: true,
            learning_rate: self.boosted_learning_rate,
            subsample: self.boosted_subsample,
            lambda: self.svm_lambda,
            epochs: self.svm_epochs,
            epsilon: self.svm_epsilon,
            seed,
        }
    }
}

impl ModelSpec {
    /// Default hyperparameters for `family`.
    pub fn new(family: Family, task: Task, seed: u64) -> Self {
        Hyperparameters::default().spec(family, task, seed)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        if self.family != Family::Svm {
            if !(1..=10_000).contains(&self.trees) {
                return bad(format!("trees must be in 1..=10000, got {}", self.trees));
            }
            if self.max_depth.is_some_and(|d| d > 64) {
                return bad("max_depth must be at most 64".into());
            }
            if self.min_samples_leaf == 0 {
                return bad("min_samples_leaf must be at least 1".into());
            }
            if self.max_features == Some(0) {
                return bad("max_features must be at least 1".into());
            }
        }
        if self.family == Family::Boosted {
            if !(self.learning_rate > 0.0 && self.learning_rate <= 1.0) {
                return bad(format!("learning_rate must be in (0, 1], got {}", self.learning_rate));
            }
            if !(self.subsample > 0.0 && self.subsample <= 1.0) {
                return bad(format!("subsample must be in (0, 1], got {}", self.subsample));
            }
        }
        if self.family == Family::Svm {
            if !(self.lambda > 0.0 && self.lambda.is_finite()) {
                return bad(format!("lambda must be positive, got {}", self.lambda));
            }
            if !(1..=100_000).contains(&self.epochs) {
                return bad(format!("epochs must be in 1..=100000, got {}", self.epochs));
            }
            if !(self.epsilon >= 0.0 && self.epsilon.is_finite()) {
                return bad(format!("epsilon must be non-negative, got {}", self.epsilon));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Params {
    Forest(Forest),
    Boosted(Boosted),
    Svm(LinearSvm),
}

/// A fitted learner. When a normaliser is attached, `predict` takes raw
/// features and normalises them first.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainedModel {
    spec: ModelSpec,
    feature_count: usize,
    normaliser: Option<Normaliser>,
    normaliser_fingerprint: Option<u64>,
    params: Params,
}

fn check_inputs(spec: &ModelSpec, x: ArrayView2<f64>, y: &[f64]) -> Result<()> {
    spec.validate()?;
    if x.nrows() != y.len() {
        return Err(Error::Shape(format!("{} rows but {} targets", x.nrows(), y.len())));
    }
    if x.nrows() < 2 {
        return Err(Error::Training(format!("need at least 2 rows, got {}", x.nrows())));
    }
    if x.ncols() == 0 {
        return Err(Error::Training("no feature columns".into()));
    }
    if x.iter().chain(y).any(|v| !v.is_finite()) {
        return Err(Error::Training("non-finite feature or target".into()));
    }
    if let Some(m) = spec.max_features {
        if m > x.ncols() {
            return Err(Error::Config(format!(
                "max_features {m} exceeds feature count {}",
                x.ncols()
            )));
        }
    }
    if spec.task == Task::Classify {
        if y.iter().any(|&v| v != 0.0 && v != 1.0) {
            return Err(Error::Training("classification targets must be 0 or 1".into()));
        }
        let high = y.iter().filter(|&&v| v == 1.0).count();
        if high == 0 || high == y.len() {
            return Err(Error::Training(
                "classification needs both classes in the training rows".into(),
            ));
        }
    }
    Ok(())
}

/// Fits `spec` on rows `x` with targets `y` (0/1 for classification).
pub fn train(spec: &ModelSpec, x: ArrayView2<f64>, y: &[f64]) -> Result<TrainedModel> {
    check_inputs(spec, x, y)?;
    let x = x.as_standard_layout();
    let params = match spec.family {
        Family::Forest => Params::Forest(forest::fit(spec, x.view(), y)),
        Family::Boosted => Params::Boosted(boosted::fit(spec, x.view(), y)),
        Family::Svm => Params::Svm(svm::fit(spec, x.view(), y)),
    };
    Ok(TrainedModel {
        spec: spec.clone(),
        feature_count: x.ncols(),
        normaliser: None,
        normaliser_fingerprint: None,
        params,
    })
}

/// Fits a normaliser on `x`, trains on the normalised rows and attaches it.
pub fn train_normalised(spec: &ModelSpec, x: ArrayView2<f64>, y: &[f64]) -> Result<TrainedModel> {
    check_inputs(spec, x, y)?;
    let normaliser = fit_normaliser(x)?;
    let z = apply_normaliser(&normaliser, x)?;
    let mut model = train(spec, z.view(), y)?;
    model.normaliser_fingerprint = Some(normaliser.fingerprint());
    model.normaliser = Some(normaliser);
    Ok(model)
}

pub fn labels_to_targets(labels: &[BinaryLabel]) -> Vec<f64> {
    labels.iter().map(|l| l.as_target()).collect()
}

pub fn target_to_label(v: f64) -> BinaryLabel {
    if v > 0.5 {
        BinaryLabel::High
    } else {
        BinaryLabel::Low
    }
}

impl TrainedModel {
    pub fn spec(&self) -> &ModelSpec {
        &self.spec
    }

    pub fn family(&self) -> Family {
        self.spec.family
    }

    pub fn task(&self) -> Task {
        self.spec.task
    }

    pub fn feature_count(&self) -> usize {
        self.feature_count
    }

    pub fn normaliser(&self) -> Option<&Normaliser> {
        self.normaliser.as_ref()
    }

    pub fn normaliser_fingerprint(&self) -> Option<u64> {
        self.normaliser_fingerprint
    }

    pub fn params(&self) -> &Params {
        &self.params
    }

    /// Hard 0/1 labels for classification, reals for regression.
    pub fn predict(&self, rows: ArrayView2<f64>) -> Result<Vec<f64>> {
        if rows.ncols() != self.feature_count {
            return Err(Error::Shape(format!(
                "model expects {} features, got {}",
                self.feature_count,
                rows.ncols()
            )));
        }
        let rows: Array2<f64> = match &self.normaliser {
            Some(n) => apply_normaliser(n, rows)?,
            None => rows.to_owned(),
        };
        let task = self.spec.task;
        Ok(rows
            .rows()
            .into_iter()
            .map(|r| {
                let r = r.as_slice().expect("owned rows are contiguous");
                match &self.params {
                    Params::Forest(m) => m.predict_row(task, r),
                    Params::Boosted(m) => m.predict_row(task, r),
                    Params::Svm(m) => m.predict_row(task, r),
                }
            })
            .collect())
    }

    pub fn predict_labels(&self, rows: ArrayView2<f64>) -> Result<Vec<BinaryLabel>> {
        if self.spec.task != Task::Classify {
            return Err(Error::Contract("predict_labels on a regression model".into()));
        }
        Ok(self.predict(rows)?.into_iter().map(target_to_label).collect())
    }

    pub fn to_bytes(&self) -> Result<Vec<u8>> {
        let header = serde_json::to_string(self)?;
        Ok(container::encode(KIND, &header, &[]))
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let contents = container::decode(bytes, KIND, EXPECTED)?;
        let model: TrainedModel = serde_json::from_str(&contents.header)?;
        model.spec.validate()?;
        Ok(model)
    }
}

pub fn save_model(model: &TrainedModel, path: &Path) -> Result<()> {
    std::fs::write(path, model.to_bytes()?).map_err(|e| Error::io(path, e))
}

pub fn load_model(path: &Path) -> Result<TrainedModel> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    TrainedModel::from_bytes(&bytes)
}
