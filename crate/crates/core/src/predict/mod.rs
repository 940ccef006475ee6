//! Next-location prediction over the time-oriented matrix.
//!
//! Every model maps a window of location ids (`0` = absent) to a
//! distribution over the `L + 1` classes. [`PredictorModel`] wraps the
//! recurrent network and the classical baselines behind one contract.

mod baselines;
mod eval;
mod flow;
mod rnn;
mod windows;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::ingest::LocationId;

pub use baselines::{train_baseline, BaselineHyper, BaselineKind, BaselineModel};
pub use eval::{
    curves_to_csv, evaluate_holdout, evaluate_holdout_fitted, evaluate_over_time, fit_model, fit_models, predict_column, CurvePoint, EvalConfig,
    EvaluationReport, HoldoutReport, HoldoutScore, ModelReport,
};
pub use flow::{build_flow_map, FlowEdge, FlowMap};
pub use rnn::{rnn_gradient_check, train_rnn, RnnConfig, RnnModel, RnnTrace};
pub use windows::{make_windows, make_windows_in, WindowSpec, WindowedSet};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PredictError {
    #[error("window of {width} bins needs at least {} bins, matrix has {n_bins}", width + 1)]
    WindowTooLong { width: usize, n_bins: usize },
    #[error("training set is empty")]
    EmptySet,
    #[error("model `{0}` has not been fitted")]
    UnfittedModel(ModelKind),
    #[error("window contains id {id} outside 0..{n_classes}")]
    InvalidWindow { id: LocationId, n_classes: usize },
    #[error("probe of {minutes} min needs {needed} bins of history before bin {target_bin}")]
    InsufficientHistory {
        minutes: u32,
        needed: usize,
        target_bin: usize,
    },
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
}

/// Every model the crate can fit.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelKind {
    Rnn,
    Uniform,
    MostFrequent,
    Knn,
    NaiveBayes,
    DecisionTree,
    RandomForest,
    LinearSvm,
    Adaboost,
}

impl ModelKind {
    pub const ALL: [ModelKind; 9] = [
        ModelKind::Rnn,
        ModelKind::Uniform,
        ModelKind::MostFrequent,
        ModelKind::Knn,
        ModelKind::NaiveBayes,
        ModelKind::DecisionTree,
        ModelKind::RandomForest,
        ModelKind::LinearSvm,
        ModelKind::Adaboost,
    ];

    pub fn name(self) -> &'static str {
        match self {
            ModelKind::Rnn => "rnn",
            ModelKind::Uniform => "uniform",
            ModelKind::MostFrequent => "most_frequent",
            ModelKind::Knn => "knn",
            ModelKind::NaiveBayes => "naive_bayes",
            ModelKind::DecisionTree => "decision_tree",
            ModelKind::RandomForest => "random_forest",
            ModelKind::LinearSvm => "linear_svm",
            ModelKind::Adaboost => "adaboost",
        }
    }

    pub fn baseline(self) -> Option<BaselineKind> {
        Some(match self {
            ModelKind::Rnn => return None,
            ModelKind::Uniform => BaselineKind::Uniform,
            ModelKind::MostFrequent => BaselineKind::MostFrequent,
            ModelKind::Knn => BaselineKind::Knn,
            ModelKind::NaiveBayes => BaselineKind::NaiveBayes,
            ModelKind::DecisionTree => BaselineKind::DecisionTree,
            ModelKind::RandomForest => BaselineKind::RandomForest,
            ModelKind::LinearSvm => BaselineKind::LinearSvm,
            ModelKind::Adaboost => BaselineKind::Adaboost,
        })
    }
}

impl std::fmt::Display for ModelKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for ModelKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        ModelKind::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| format!("unknown model `{s}`"))
    }
}

/// Common prediction contract.
pub trait Predictor {
    fn n_classes(&self) -> usize;

    /// Class distribution for `window`. `object` is the row the window came
    /// from, when known; only per-object models use it.
    fn distribution(&self, window: &[LocationId], object: Option<usize>) -> Vec<f64>;

    /// Predicted class and its distribution. Defaults to the argmax with ties
    /// resolved towards the smallest class id.
    fn predict(&self, window: &[LocationId], object: Option<usize>) -> (LocationId, Vec<f64>) {
        let dist = self.distribution(window, object);
        (argmax(&dist) as LocationId, dist)
    }
}

/// Index of the largest value; the first one wins ties.
pub(crate) fn argmax(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in values.iter().enumerate() {
        if v > values[best] {
            best = i;
        }
    }
    best
}

/// Point-mass distribution on `class`.
pub(crate) fn one_hot(n_classes: usize, class: usize) -> Vec<f64> {
    let mut v = vec![0.0; n_classes];
    v[class] = 1.0;
    v
}

/// A fitted (or not yet fitted) model of any kind.
#[derive(Debug, Clone)]
pub enum PredictorModel {
    Unfitted(ModelKind),
    Rnn(RnnModel),
    Baseline(BaselineModel),
}

impl PredictorModel {
    pub fn kind(&self) -> ModelKind {
        match self {
            PredictorModel::Unfitted(k) => *k,
            PredictorModel::Rnn(_) => ModelKind::Rnn,
            PredictorModel::Baseline(b) => b.kind().model_kind(),
        }
    }

    fn fitted(&self) -> Result<&dyn Predictor, PredictError> {
        match self {
            PredictorModel::Unfitted(k) => Err(PredictError::UnfittedModel(*k)),
            PredictorModel::Rnn(m) => Ok(m),
            PredictorModel::Baseline(m) => Ok(m),
        }
    }
}

/// Predicts the location following `window`.
pub fn predict_next(model: &PredictorModel, window: &[LocationId]) -> Result<(LocationId, Vec<f64>), PredictError> {
    predict_next_for(model, window, None)
}

/// As [`predict_next`], with the source object supplied for per-object models.
pub fn predict_next_for(
    model: &PredictorModel,
    window: &[LocationId],
    object: Option<usize>,
) -> Result<(LocationId, Vec<f64>), PredictError> {
    let m = model.fitted()?;
    let n_classes = m.n_classes();
    if let Some(&id) = window.iter().find(|&&id| id as usize >= n_classes) {
        return Err(PredictError::InvalidWindow { id, n_classes });
    }
    Ok(m.predict(window, object))
}
