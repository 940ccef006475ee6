//! Accuracy-through-time evaluation.
//!
//! For each probe length `m` (minutes) every model is refitted on windows
//! drawn only from the `m` minutes before the target bin, then asked to
//! predict the target bin for every object from the `W` bins preceding it.

use serde::{Deserialize, Serialize};

use super::{
    make_windows_in, predict_next_for, train_baseline, train_rnn, BaselineHyper, ModelKind, PredictError,
    PredictorModel, RnnConfig, WindowSpec,
};
use crate::ingest::LocationId;
use crate::matrices::TimeOrientedMatrix;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EvalConfig {
    pub window: WindowSpec,
    pub rnn: RnnConfig,
    pub baseline: BaselineHyper,
    /// Seed for the seeded baselines.
    pub seed: u64,
}

impl Default for EvalConfig {
    fn default() -> Self {
        Self {
            window: WindowSpec::default(),
            rnn: RnnConfig::default(),
            baseline: BaselineHyper::default(),
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CurvePoint {
    pub minutes: u32,
    pub accuracy: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelReport {
    pub model: ModelKind,
    /// Accuracy at the longest probe.
    pub overall_accuracy: f64,
    pub curve: Vec<CurvePoint>,
    /// `[truth][predicted]` counts at the longest probe.
    pub confusion: Vec<Vec<u32>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvaluationReport {
    pub target_bin: usize,
    pub target_time: i64,
    pub n_objects: usize,
    pub n_classes: usize,
    pub window: usize,
    pub probe_minutes: Vec<u32>,
    pub models: Vec<ModelReport>,
}

impl EvaluationReport {
    pub fn model(&self, kind: ModelKind) -> Option<&ModelReport> {
        self.models.iter().find(|m| m.model == kind)
    }
}

/// Fits one model of `kind` on `ws`.
pub fn fit_model(kind: ModelKind, ws: &super::WindowedSet, cfg: &EvalConfig) -> Result<PredictorModel, PredictError> {
    match kind.baseline() {
        None => Ok(PredictorModel::Rnn(train_rnn(ws, &cfg.rnn)?.0)),
        Some(b) => Ok(PredictorModel::Baseline(train_baseline(b, ws, &cfg.baseline, cfg.seed)?)),
    }
}

/// Predicted location of every object at `target_bin` from the preceding
/// `width` bins.
pub fn predict_column(
    model: &PredictorModel,
    tom: &TimeOrientedMatrix,
    target_bin: usize,
    width: usize,
) -> Result<Vec<LocationId>, PredictError> {
    if target_bin < width || target_bin >= tom.n_bins() {
        return Err(PredictError::InvalidParameter(format!(
            "target bin {target_bin} needs {width} bins of history inside 0..{}",
            tom.n_bins()
        )));
    }
    (0..tom.n_objects())
        .map(|i| Ok(predict_next_for(model, &tom.row(i)[target_bin - width..target_bin], Some(i))?.0))
        .collect()
}

fn probe_bins(minutes: u32, bin_seconds: i64) -> usize {
    (minutes as i64 * 60 / bin_seconds) as usize
}

pub fn evaluate_over_time(
    models: &[ModelKind],
    tom: &TimeOrientedMatrix,
    n_locations: usize,
    target_bin: usize,
    probe_minutes: &[u32],
    cfg: &EvalConfig,
) -> Result<EvaluationReport, PredictError> {
    let width = cfg.window.width;
    if probe_minutes.is_empty() {
        return Err(PredictError::InvalidParameter("no probe lengths given".into()));
    }
    if target_bin >= tom.n_bins() {
        return Err(PredictError::InvalidParameter(format!(
            "target bin {target_bin} outside 0..{}",
            tom.n_bins()
        )));
    }
    let mut sets = Vec::with_capacity(probe_minutes.len());
    for &m in probe_minutes {
        let h = probe_bins(m, tom.binning.bin_seconds);
        if h < width + 1 || h > target_bin {
            return Err(PredictError::InsufficientHistory {
                minutes: m,
                needed: h.max(width + 1),
                target_bin,
            });
        }
        sets.push(make_windows_in(tom, n_locations, cfg.window, target_bin - h..target_bin)?);
    }
    let longest = probe_minutes
        .iter()
        .enumerate()
        .max_by_key(|(i, &m)| (m, std::cmp::Reverse(*i)))
        .map(|(i, _)| i)
        .expect("non-empty probes");
    let truth = tom.cells.column(target_bin);
    let n_classes = n_locations + 1;

    let run = |kind: ModelKind| -> Result<ModelReport, PredictError> {
        let mut curve = Vec::with_capacity(sets.len());
        let mut confusion = vec![vec![0u32; n_classes]; n_classes];
        for (p, ws) in sets.iter().enumerate() {
            let model = fit_model(kind, ws, cfg)?;
            let predicted = predict_column(&model, tom, target_bin, width)?;
            let hits = predicted.iter().zip(&truth).filter(|(a, b)| a == b).count();
            if p == longest {
                for (&y, &yhat) in truth.iter().zip(&predicted) {
                    confusion[y as usize][yhat as usize] += 1;
                }
            }
            curve.push(CurvePoint {
                minutes: probe_minutes[p],
                accuracy: hits as f64 / truth.len().max(1) as f64,
            });
        }
        Ok(ModelReport {
            model: kind,
            overall_accuracy: curve[longest].accuracy,
            curve,
            confusion,
        })
    };

    // one thread per model; fits are independent and individually seeded
    let reports: Vec<Result<ModelReport, PredictError>> = std::thread::scope(|s| {
        let handles: Vec<_> = models.iter().map(|&k| s.spawn(move || run(k))).collect();
        handles
            .into_iter()
            .map(|h| h.join().expect("model thread panicked"))
            .collect()
    });
    Ok(EvaluationReport {
        target_bin,
        target_time: tom.binning.bin_start(target_bin),
        n_objects: tom.n_objects(),
        n_classes,
        window: width,
        probe_minutes: probe_minutes.to_vec(),
        models: reports.into_iter().collect::<Result<_, _>>()?,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HoldoutScore {
    pub model: ModelKind,
    pub accuracy: f64,
    pub correct: usize,
    /// `[truth][predicted]` counts.
    pub confusion: Vec<Vec<u32>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HoldoutReport {
    pub split_bin: usize,
    pub n_train: usize,
    pub n_test: usize,
    pub n_classes: usize,
    pub window: usize,
    pub models: Vec<HoldoutScore>,
}

impl HoldoutReport {
    pub fn model(&self, kind: ModelKind) -> Option<&HoldoutScore> {
        self.models.iter().find(|m| m.model == kind)
    }
}

/// Fits each kind on its own thread; results keep the order of `kinds`.
pub fn fit_models(
    kinds: &[ModelKind],
    ws: &super::WindowedSet,
    cfg: &EvalConfig,
) -> Result<Vec<PredictorModel>, PredictError> {
    std::thread::scope(|s| {
        let handles: Vec<_> = kinds.iter().map(|&k| s.spawn(move || fit_model(k, ws, cfg))).collect();
        handles
            .into_iter()
            .map(|h| h.join().expect("model thread panicked"))
            .collect()
    })
}

/// Temporal hold-out: train on windows whose label bin precedes `split_bin`,
/// score every window whose label bin is at or after it.
pub fn evaluate_holdout(
    kinds: &[ModelKind],
    tom: &TimeOrientedMatrix,
    n_locations: usize,
    split_bin: usize,
    cfg: &EvalConfig,
) -> Result<HoldoutReport, PredictError> {
    Ok(evaluate_holdout_fitted(kinds, tom, n_locations, split_bin, cfg)?.0)
}

/// [`evaluate_holdout`] that also hands back the fitted models, in `kinds` order.
pub fn evaluate_holdout_fitted(
    kinds: &[ModelKind],
    tom: &TimeOrientedMatrix,
    n_locations: usize,
    split_bin: usize,
    cfg: &EvalConfig,
) -> Result<(HoldoutReport, Vec<PredictorModel>), PredictError> {
    let width = cfg.window.width;
    if split_bin < width + 1 || split_bin >= tom.n_bins() {
        return Err(PredictError::InvalidParameter(format!(
            "split bin {split_bin} must leave {} training bins and at least one test bin in 0..{}",
            width + 1,
            tom.n_bins()
        )));
    }
    let train = make_windows_in(tom, n_locations, cfg.window, 0..split_bin)?;
    let test = make_windows_in(tom, n_locations, cfg.window, split_bin - width..tom.n_bins())?;
    if test.is_empty() {
        return Err(PredictError::EmptySet);
    }
    let fitted = fit_models(kinds, &train, cfg)?;
    let n_classes = n_locations + 1;
    let mut models = Vec::with_capacity(kinds.len());
    for (&kind, model) in kinds.iter().zip(&fitted) {
        let mut confusion = vec![vec![0u32; n_classes]; n_classes];
        let mut correct = 0;
        for k in 0..test.len() {
            let (yhat, _) = predict_next_for(model, &test.inputs[k], Some(test.objects[k]))?;
            let y = test.labels[k];
            confusion[y as usize][yhat as usize] += 1;
            correct += usize::from(y == yhat);
        }
        models.push(HoldoutScore {
            model: kind,
            accuracy: correct as f64 / test.len() as f64,
            correct,
            confusion,
        });
    }
    let report = HoldoutReport {
        split_bin,
        n_train: train.len(),
        n_test: test.len(),
        n_classes,
        window: width,
        models,
    };
    Ok((report, fitted))
}

/// `model,minutes,accuracy` rows for every curve point.
pub fn curves_to_csv(report: &EvaluationReport) -> String {
    let mut out = String::from("model,minutes,accuracy\n");
    for m in &report.models {
        for p in &m.curve {
            out.push_str(&format!("{},{},{}\n", m.model, p.minutes, p.accuracy));
        }
    }
    out
}
