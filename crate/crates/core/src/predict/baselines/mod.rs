//! Classical next-location baselines.
//!
//! Trees, boosting and the linear SVM see a window as a one-hot vector
//! (`position × class`); KNN compares raw id windows by Hamming distance.

mod adaboost;
mod tree;

use std::collections::HashMap;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{argmax, one_hot, ModelKind, PredictError, Predictor, WindowedSet};
use crate::ingest::LocationId;

pub use adaboost::AdaBoost;
pub use tree::{DecisionTree, RandomForest, TreeParams};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BaselineKind {
    Uniform,
    MostFrequent,
    Knn,
    NaiveBayes,
    DecisionTree,
    RandomForest,
    LinearSvm,
    Adaboost,
}

impl BaselineKind {
    pub fn model_kind(self) -> ModelKind {
        match self {
            BaselineKind::Uniform => ModelKind::Uniform,
            BaselineKind::MostFrequent => ModelKind::MostFrequent,
            BaselineKind::Knn => ModelKind::Knn,
            BaselineKind::NaiveBayes => ModelKind::NaiveBayes,
            BaselineKind::DecisionTree => ModelKind::DecisionTree,
            BaselineKind::RandomForest => ModelKind::RandomForest,
            BaselineKind::LinearSvm => ModelKind::LinearSvm,
            BaselineKind::Adaboost => ModelKind::Adaboost,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BaselineHyper {
    pub knn_k: usize,
    pub tree_max_depth: usize,
    pub tree_min_leaf: usize,
    pub forest_trees: usize,
    pub svm_epochs: usize,
    pub svm_lambda: f64,
    pub svm_lr: f64,
    pub adaboost_rounds: usize,
}

impl Default for BaselineHyper {
    fn default() -> Self {
        Self {
            knn_k: 5,
            tree_max_depth: 12,
            tree_min_leaf: 2,
            forest_trees: 50,
            svm_epochs: 5,
            svm_lambda: 1e-4,
            svm_lr: 0.01,
            adaboost_rounds: 100,
        }
    }
}

/// A fitted baseline.
#[derive(Debug, Clone, PartialEq)]
pub enum BaselineModel {
    Uniform(Uniform),
    MostFrequent(MostFrequent),
    Knn(Knn),
    NaiveBayes(NaiveBayes),
    DecisionTree(DecisionTree),
    RandomForest(RandomForest),
    LinearSvm(LinearSvm),
    Adaboost(AdaBoost),
}

impl BaselineModel {
    pub fn kind(&self) -> BaselineKind {
        match self {
            BaselineModel::Uniform(_) => BaselineKind::Uniform,
            BaselineModel::MostFrequent(_) => BaselineKind::MostFrequent,
            BaselineModel::Knn(_) => BaselineKind::Knn,
            BaselineModel::NaiveBayes(_) => BaselineKind::NaiveBayes,
            BaselineModel::DecisionTree(_) => BaselineKind::DecisionTree,
            BaselineModel::RandomForest(_) => BaselineKind::RandomForest,
            BaselineModel::LinearSvm(_) => BaselineKind::LinearSvm,
            BaselineModel::Adaboost(_) => BaselineKind::Adaboost,
        }
    }

    fn inner(&self) -> &dyn Predictor {
        match self {
            BaselineModel::Uniform(m) => m,
            BaselineModel::MostFrequent(m) => m,
            BaselineModel::Knn(m) => m,
            BaselineModel::NaiveBayes(m) => m,
            BaselineModel::DecisionTree(m) => m,
            BaselineModel::RandomForest(m) => m,
            BaselineModel::LinearSvm(m) => m,
            BaselineModel::Adaboost(m) => m,
        }
    }
}

impl Predictor for BaselineModel {
    fn n_classes(&self) -> usize {
        self.inner().n_classes()
    }

    fn distribution(&self, window: &[LocationId], object: Option<usize>) -> Vec<f64> {
        self.inner().distribution(window, object)
    }

    fn predict(&self, window: &[LocationId], object: Option<usize>) -> (LocationId, Vec<f64>) {
        self.inner().predict(window, object)
    }
}

pub fn train_baseline(
    kind: BaselineKind,
    ws: &WindowedSet,
    hyper: &BaselineHyper,
    seed: u64,
) -> Result<BaselineModel, PredictError> {
    if ws.is_empty() && kind != BaselineKind::Uniform {
        return Err(PredictError::EmptySet);
    }
    let c = ws.n_classes;
    Ok(match kind {
        BaselineKind::Uniform => BaselineModel::Uniform(Uniform { n_classes: c, seed }),
        BaselineKind::MostFrequent => BaselineModel::MostFrequent(MostFrequent::fit(ws)),
        BaselineKind::Knn => {
            if hyper.knn_k == 0 {
                return Err(PredictError::InvalidParameter("knn_k must be positive".into()));
            }
            BaselineModel::Knn(Knn {
                n_classes: c,
                k: hyper.knn_k,
                inputs: ws.inputs.clone(),
                labels: ws.labels.clone(),
            })
        }
        BaselineKind::NaiveBayes => BaselineModel::NaiveBayes(NaiveBayes::fit(ws)),
        BaselineKind::DecisionTree => BaselineModel::DecisionTree(DecisionTree::fit(
            ws,
            &TreeParams {
                max_depth: hyper.tree_max_depth,
                min_leaf: hyper.tree_min_leaf,
                max_features: None,
            },
            seed,
        )),
        BaselineKind::RandomForest => {
            BaselineModel::RandomForest(RandomForest::fit(ws, hyper.forest_trees, hyper, seed))
        }
        BaselineKind::LinearSvm => BaselineModel::LinearSvm(LinearSvm::fit(ws, hyper, seed)),
        BaselineKind::Adaboost => BaselineModel::Adaboost(AdaBoost::fit(ws, hyper.adaboost_rounds)),
    })
}

/// Index of `(position, id)` in the one-hot encoding of a window.
pub(crate) fn feature_index(pos: usize, id: LocationId, n_classes: usize) -> usize {
    pos * n_classes + id as usize
}

/// Mode of `values`; ties go to the smallest id.
fn mode(values: impl IntoIterator<Item = LocationId>, n_classes: usize) -> Option<LocationId> {
    let mut counts = vec![0usize; n_classes];
    let mut any = false;
    for v in values {
        counts[v as usize] += 1;
        any = true;
    }
    any.then(|| {
        let mut best = 0;
        for (i, &c) in counts.iter().enumerate() {
            if c > counts[best] {
                best = i;
            }
        }
        best as LocationId
    })
}

fn splitmix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9e37_79b9_7f4a_7c15);
    x = (x ^ (x >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    x ^ (x >> 31)
}

/// Random guessing. The guess is a pure hash of the seed, the object and the
/// window, so repeated queries agree.
#[derive(Debug, Clone, PartialEq)]
pub struct Uniform {
    n_classes: usize,
    seed: u64,
}

impl Predictor for Uniform {
    fn n_classes(&self) -> usize {
        self.n_classes
    }

    fn distribution(&self, _window: &[LocationId], _object: Option<usize>) -> Vec<f64> {
        vec![1.0 / self.n_classes as f64; self.n_classes]
    }

    fn predict(&self, window: &[LocationId], object: Option<usize>) -> (LocationId, Vec<f64>) {
        let mut h = splitmix64(self.seed);
        h = splitmix64(h ^ object.map_or(u64::MAX, |o| o as u64));
        for &id in window {
            h = splitmix64(h ^ id as u64);
        }
        ((h % self.n_classes as u64) as LocationId, self.distribution(window, object))
    }
}

/// Per-object modal label seen in training, with the global modal label as
/// fallback. Without an object, the window's own modal id is returned.
#[derive(Debug, Clone, PartialEq)]
pub struct MostFrequent {
    n_classes: usize,
    per_object: HashMap<usize, LocationId>,
    global: LocationId,
}

impl MostFrequent {
    fn fit(ws: &WindowedSet) -> Self {
        let c = ws.n_classes;
        let mut by_object: HashMap<usize, Vec<usize>> = HashMap::new();
        for (&o, &y) in ws.objects.iter().zip(&ws.labels) {
            by_object.entry(o).or_insert_with(|| vec![0; c])[y as usize] += 1;
        }
        let per_object = by_object
            .into_iter()
            .map(|(o, counts)| {
                let f: Vec<f64> = counts.iter().map(|&n| n as f64).collect();
                (o, argmax(&f) as LocationId)
            })
            .collect();
        Self {
            n_classes: c,
            per_object,
            global: mode(ws.labels.iter().copied(), c).unwrap_or(0),
        }
    }
}

impl Predictor for MostFrequent {
    fn n_classes(&self) -> usize {
        self.n_classes
    }

    fn distribution(&self, window: &[LocationId], object: Option<usize>) -> Vec<f64> {
        let class = match object {
            Some(o) => self.per_object.get(&o).copied().unwrap_or(self.global),
            None => mode(window.iter().copied(), self.n_classes).unwrap_or(self.global),
        };
        one_hot(self.n_classes, class as usize)
    }
}

/// k-nearest neighbours under Hamming distance, majority vote.
#[derive(Debug, Clone, PartialEq)]
pub struct Knn {
    n_classes: usize,
    k: usize,
    inputs: Vec<Vec<LocationId>>,
    labels: Vec<LocationId>,
}

fn hamming(a: &[LocationId], b: &[LocationId]) -> usize {
    let common = a.iter().zip(b).filter(|(x, y)| x != y).count();
    common + a.len().abs_diff(b.len())
}

impl Predictor for Knn {
    fn n_classes(&self) -> usize {
        self.n_classes
    }

    fn distribution(&self, window: &[LocationId], _object: Option<usize>) -> Vec<f64> {
        let mut keyed: Vec<(usize, usize)> = self
            .inputs
            .iter()
            .enumerate()
            .map(|(i, x)| (hamming(x, window), i))
            .collect();
        let k = self.k.min(keyed.len());
        if k < keyed.len() {
            keyed.select_nth_unstable(k - 1);
        }
        let mut votes = vec![0.0; self.n_classes];
        for &(_, i) in &keyed[..k] {
            votes[self.labels[i] as usize] += 1.0 / k as f64;
        }
        votes
    }
}

/// Categorical naive Bayes over window positions, add-one smoothing.
#[derive(Debug, Clone, PartialEq)]
pub struct NaiveBayes {
    n_classes: usize,
    width: usize,
    log_prior: Vec<f64>,
    /// `[class][position][id]` log-likelihoods.
    log_lik: Vec<f64>,
}

impl NaiveBayes {
    fn fit(ws: &WindowedSet) -> Self {
        let c = ws.n_classes;
        let w = ws.width();
        let mut class_n = vec![0usize; c];
        let mut counts = vec![0usize; c * w * c];
        for (x, &y) in ws.inputs.iter().zip(&ws.labels) {
            class_n[y as usize] += 1;
            for (p, &v) in x.iter().enumerate() {
                counts[(y as usize * w + p) * c + v as usize] += 1;
            }
        }
        let m = ws.len() as f64;
        let log_prior = class_n
            .iter()
            .map(|&n| ((n as f64 + 1.0) / (m + c as f64)).ln())
            .collect();
        let mut log_lik = vec![0.0; c * w * c];
        for y in 0..c {
            let denom = class_n[y] as f64 + c as f64;
            for p in 0..w {
                for v in 0..c {
                    let k = (y * w + p) * c + v;
                    log_lik[k] = ((counts[k] as f64 + 1.0) / denom).ln();
                }
            }
        }
        Self {
            n_classes: c,
            width: w,
            log_prior,
            log_lik,
        }
    }
}

impl Predictor for NaiveBayes {
    fn n_classes(&self) -> usize {
        self.n_classes
    }

    fn distribution(&self, window: &[LocationId], _object: Option<usize>) -> Vec<f64> {
        let (c, w) = (self.n_classes, self.width);
        let mut scores: Vec<f64> = (0..c)
            .map(|y| {
                self.log_prior[y]
                    + window
                        .iter()
                        .take(w)
                        .enumerate()
                        .map(|(p, &v)| self.log_lik[(y * w + p) * c + v as usize])
                        .sum::<f64>()
            })
            .collect();
        let max = scores.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let mut sum = 0.0;
        for s in scores.iter_mut() {
            *s = (*s - max).exp();
            sum += *s;
        }
        scores.iter_mut().for_each(|s| *s /= sum);
        scores
    }
}

/// One-vs-rest linear SVM trained by stochastic subgradient descent on the
/// L2-regularized hinge loss.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearSvm {
    n_classes: usize,
    width: usize,
    /// `[class][feature]`, one-hot features.
    weights: Vec<f64>,
    bias: Vec<f64>,
}

impl LinearSvm {
    fn fit(ws: &WindowedSet, hyper: &BaselineHyper, seed: u64) -> Self {
        let c = ws.n_classes;
        let w = ws.width();
        let dim = w * c;
        let mut weights = vec![0.0; c * dim];
        let mut bias = vec![0.0; c];
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut order: Vec<usize> = (0..ws.len()).collect();
        let shrink = 1.0 - hyper.svm_lr * hyper.svm_lambda;
        for _ in 0..hyper.svm_epochs {
            order.shuffle(&mut rng);
            for &i in &order {
                let x = &ws.inputs[i];
                for k in 0..c {
                    let row = &mut weights[k * dim..(k + 1) * dim];
                    let y = if ws.labels[i] as usize == k { 1.0 } else { -1.0 };
                    let score = bias[k]
                        + x.iter()
                            .enumerate()
                            .map(|(p, &v)| row[feature_index(p, v, c)])
                            .sum::<f64>();
                    row.iter_mut().for_each(|v| *v *= shrink);
                    if y * score < 1.0 {
                        for (p, &v) in x.iter().enumerate() {
                            row[feature_index(p, v, c)] += hyper.svm_lr * y;
                        }
                        bias[k] += hyper.svm_lr * y;
                    }
                }
            }
        }
        Self {
            n_classes: c,
            width: w,
            weights,
            bias,
        }
    }

    fn scores(&self, window: &[LocationId]) -> Vec<f64> {
        let c = self.n_classes;
        let dim = self.width * c;
        (0..c)
            .map(|k| {
                let row = &self.weights[k * dim..(k + 1) * dim];
                self.bias[k]
                    + window
                        .iter()
                        .take(self.width)
                        .enumerate()
                        .map(|(p, &v)| row[feature_index(p, v, c)])
                        .sum::<f64>()
            })
            .collect()
    }
}

impl Predictor for LinearSvm {
    fn n_classes(&self) -> usize {
        self.n_classes
    }

    fn distribution(&self, window: &[LocationId], _object: Option<usize>) -> Vec<f64> {
        one_hot(self.n_classes, argmax(&self.scores(window)))
    }
}
