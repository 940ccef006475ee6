//! Elman recurrent network trained with backpropagation through time.
//!
//! `h_t = tanh(W_xh[:, x_t] + W_hh h_{t-1} + b_h)`, `h_0 = 0`, and the class
//! distribution after the last step is `softmax(W_hy h_T + b_y)`. Inputs are
//! one-hot location ids, so the input projection is a column lookup.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{PredictError, Predictor, WindowedSet};
use crate::ingest::LocationId;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RnnConfig {
    pub hidden: usize,
    pub epochs: usize,
    pub lr: f64,
    /// Gradient L2-norm ceiling per update.
    pub clip: f64,
    pub seed: u64,
}

impl Default for RnnConfig {
    fn default() -> Self {
        Self {
            hidden: 16,
            epochs: 10,
            lr: 0.02,
            clip: 5.0,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RnnModel {
    n_classes: usize,
    hidden: usize,
    /// `[W_xh (H×C) | W_hh (H×H) | b_h (H) | W_hy (C×H) | b_y (C)]`, row-major.
    params: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RnnTrace {
    /// Mean loss over the set before any update.
    pub initial_loss: f64,
    /// Mean per-example loss accumulated during each epoch.
    pub epoch_loss: Vec<f64>,
}

struct Layout {
    xh: usize,
    hh: usize,
    bh: usize,
    hy: usize,
    by: usize,
    len: usize,
}

impl RnnModel {
    /// Parameters drawn from uniform(-0.1, 0.1).
    pub fn new(n_classes: usize, hidden: usize, seed: u64) -> Self {
        let mut m = Self {
            n_classes,
            hidden,
            params: Vec::new(),
        };
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        m.params = (0..m.layout().len).map(|_| rng.random_range(-0.1..0.1)).collect();
        m
    }

    pub fn hidden(&self) -> usize {
        self.hidden
    }

    pub fn params(&self) -> &[f64] {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut [f64] {
        &mut self.params
    }

    fn layout(&self) -> Layout {
        let (h, c) = (self.hidden, self.n_classes);
        let xh = 0;
        let hh = xh + h * c;
        let bh = hh + h * h;
        let hy = bh + h;
        let by = hy + c * h;
        Layout {
            xh,
            hh,
            bh,
            hy,
            by,
            len: by + c,
        }
    }

    /// Hidden states `h_0..=h_T` (flattened, `(T+1)·H`) and output probabilities.
    fn forward(&self, seq: &[LocationId]) -> (Vec<f64>, Vec<f64>) {
        let (h, c) = (self.hidden, self.n_classes);
        let lay = self.layout();
        let p = &self.params;
        let mut hs = vec![0.0; (seq.len() + 1) * h];
        for (t, &x) in seq.iter().enumerate() {
            let (prev, cur) = hs.split_at_mut((t + 1) * h);
            let prev = &prev[t * h..];
            let cur = &mut cur[..h];
            for j in 0..h {
                let mut z = p[lay.xh + j * c + x as usize] + p[lay.bh + j];
                let whh = &p[lay.hh + j * h..lay.hh + (j + 1) * h];
                z += whh.iter().zip(prev).map(|(w, v)| w * v).sum::<f64>();
                cur[j] = z.tanh();
            }
        }
        let last = &hs[seq.len() * h..];
        let mut logits: Vec<f64> = (0..c)
            .map(|k| {
                let why = &p[lay.hy + k * h..lay.hy + (k + 1) * h];
                p[lay.by + k] + why.iter().zip(last).map(|(w, v)| w * v).sum::<f64>()
            })
            .collect();
        softmax_in_place(&mut logits);
        (hs, logits)
    }

    pub fn probabilities(&self, seq: &[LocationId]) -> Vec<f64> {
        self.forward(seq).1
    }

    /// Cross-entropy loss of predicting `label` after `seq`.
    pub fn loss(&self, seq: &[LocationId], label: LocationId) -> f64 {
        -self.forward(seq).1[label as usize].max(f64::MIN_POSITIVE).ln()
    }

    /// Loss and its gradient with respect to every parameter.
    pub fn loss_and_grad(&self, seq: &[LocationId], label: LocationId) -> (f64, Vec<f64>) {
        let (h, c) = (self.hidden, self.n_classes);
        let lay = self.layout();
        let p = &self.params;
        let (hs, probs) = self.forward(seq);
        let loss = -probs[label as usize].max(f64::MIN_POSITIVE).ln();
        let mut g = vec![0.0; lay.len];

        let mut dy = probs;
        dy[label as usize] -= 1.0;
        let t_last = seq.len();
        let h_last = &hs[t_last * h..(t_last + 1) * h];
        let mut dh = vec![0.0; h];
        for k in 0..c {
            g[lay.by + k] = dy[k];
            for j in 0..h {
                g[lay.hy + k * h + j] = dy[k] * h_last[j];
                dh[j] += p[lay.hy + k * h + j] * dy[k];
            }
        }
        let mut dz = vec![0.0; h];
        for t in (1..=t_last).rev() {
            let ht = &hs[t * h..(t + 1) * h];
            let hprev = &hs[(t - 1) * h..t * h];
            let x = seq[t - 1] as usize;
            for j in 0..h {
                dz[j] = dh[j] * (1.0 - ht[j] * ht[j]);
                g[lay.bh + j] += dz[j];
                g[lay.xh + j * c + x] += dz[j];
                for i in 0..h {
                    g[lay.hh + j * h + i] += dz[j] * hprev[i];
                }
            }
            for (i, d) in dh.iter_mut().enumerate() {
                *d = (0..h).map(|j| p[lay.hh + j * h + i] * dz[j]).sum();
            }
        }
        (loss, g)
    }

    fn sgd_step(&mut self, grad: &mut [f64], lr: f64, clip: f64) {
        let norm = grad.iter().map(|g| g * g).sum::<f64>().sqrt();
        let scale = if norm > clip { clip / norm } else { 1.0 };
        for (w, g) in self.params.iter_mut().zip(grad.iter()) {
            *w -= lr * scale * g;
        }
    }
}

fn softmax_in_place(v: &mut [f64]) {
    let max = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut sum = 0.0;
    for x in v.iter_mut() {
        *x = (*x - max).exp();
        sum += *x;
    }
    for x in v.iter_mut() {
        *x /= sum;
    }
}

impl Predictor for RnnModel {
    fn n_classes(&self) -> usize {
        self.n_classes
    }

    fn distribution(&self, window: &[LocationId], _object: Option<usize>) -> Vec<f64> {
        self.probabilities(window)
    }
}

/// Per-example SGD with gradient clipping; the visiting order is reshuffled
/// every epoch from `cfg.seed`.
pub fn train_rnn(ws: &WindowedSet, cfg: &RnnConfig) -> Result<(RnnModel, RnnTrace), PredictError> {
    if ws.is_empty() {
        return Err(PredictError::EmptySet);
    }
    if cfg.hidden == 0 || !(cfg.lr >= 0.0) || !(cfg.clip > 0.0) {
        return Err(PredictError::InvalidParameter("rnn needs hidden > 0, lr >= 0, clip > 0".into()));
    }
    let mut model = RnnModel::new(ws.n_classes, cfg.hidden, cfg.seed);
    let initial_loss = mean_loss(&model, ws);
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed ^ 0x9e37_79b9_7f4a_7c15);
    let mut order: Vec<usize> = (0..ws.len()).collect();
    let mut epoch_loss = Vec::with_capacity(cfg.epochs);
    for _ in 0..cfg.epochs {
        order.shuffle(&mut rng);
        let mut total = 0.0;
        for &i in &order {
            let (loss, mut grad) = model.loss_and_grad(&ws.inputs[i], ws.labels[i]);
            total += loss;
            if cfg.lr > 0.0 {
                model.sgd_step(&mut grad, cfg.lr, cfg.clip);
            }
        }
        let mean = total / ws.len() as f64;
        assert!(mean.is_finite(), "rnn loss diverged");
        epoch_loss.push(mean);
    }
    Ok((
        model,
        RnnTrace {
            initial_loss,
            epoch_loss,
        },
    ))
}

fn mean_loss(model: &RnnModel, ws: &WindowedSet) -> f64 {
    ws.inputs
        .iter()
        .zip(&ws.labels)
        .map(|(x, &y)| model.loss(x, y))
        .sum::<f64>()
        / ws.len() as f64
}

/// Largest relative error between analytic BPTT gradients and central finite
/// differences, over `n_params` (at least 20) parameters picked with `seed`.
///
/// Relative error is `|ga - gn| / max(|ga|, |gn|, 1e-8)`.
pub fn rnn_gradient_check(
    model: &RnnModel,
    example: (&[LocationId], LocationId),
    epsilon: f64,
    n_params: usize,
    seed: u64,
) -> f64 {
    assert!((1e-6..=1e-3).contains(&epsilon), "epsilon must lie in [1e-6, 1e-3]");
    let (seq, label) = example;
    let (_, analytic) = model.loss_and_grad(seq, label);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut probe = model.clone();
    let mut worst: f64 = 0.0;
    for _ in 0..n_params.max(20) {
        let k = rng.random_range(0..model.params.len());
        let orig = probe.params[k];
        probe.params[k] = orig + epsilon;
        let up = probe.loss(seq, label);
        probe.params[k] = orig - epsilon;
        let down = probe.loss(seq, label);
        probe.params[k] = orig;
        let numeric = (up - down) / (2.0 * epsilon);
        let ga = analytic[k];
        let err = (ga - numeric).abs() / ga.abs().max(numeric.abs()).max(1e-8);
        worst = worst.max(err);
    }
    worst
}

#[cfg(test)]
mod tests {
    use super::*;

    fn set(inputs: Vec<Vec<LocationId>>, labels: Vec<LocationId>, n_classes: usize) -> WindowedSet {
        let n = labels.len();
        WindowedSet::new(inputs, labels, (0..n).collect(), n_classes).unwrap()
    }

    #[test]
    fn probabilities_are_distributions() {
        let m = RnnModel::new(6, 5, 3);
        for w in [vec![0], vec![1, 2, 3], vec![5, 5, 5, 5, 5, 5, 5, 5]] {
            let p = m.probabilities(&w);
            assert!(p.iter().all(|&v| v >= 0.0));
            assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-6);
        }
    }

    #[test]
    fn zero_learning_rate_leaves_parameters() {
        let ws = set(vec![vec![1, 2], vec![2, 1]], vec![1, 2], 3);
        let cfg = RnnConfig {
            lr: 0.0,
            epochs: 3,
            ..Default::default()
        };
        let (m, _) = train_rnn(&ws, &cfg).unwrap();
        assert_eq!(m, RnnModel::new(3, cfg.hidden, cfg.seed));
    }

    #[test]
    fn memorizes_single_example() {
        let ws = set(vec![vec![1, 1, 1]], vec![1], 4);
        let cfg = RnnConfig {
            hidden: 8,
            epochs: 200,
            ..Default::default()
        };
        let (m, trace) = train_rnn(&ws, &cfg).unwrap();
        assert_eq!(m.predict(&[1, 1, 1], None).0, 1);
        assert!(trace.epoch_loss.last().unwrap() < &trace.initial_loss);
    }

    #[test]
    fn empty_set_rejected() {
        let ws = set(vec![], vec![], 3);
        assert_eq!(train_rnn(&ws, &RnnConfig::default()).unwrap_err(), PredictError::EmptySet);
    }

    #[test]
    fn gradients_match_finite_differences() {
        for seed in 0..3 {
            let m = RnnModel::new(7, 6, seed);
            let seq = [3, 0, 6, 6, 1];
            for eps in [1e-4, 1e-5] {
                let err = rnn_gradient_check(&m, (&seq, 2), eps, 40, seed);
                assert!(err < 1e-3, "seed {seed} eps {eps}: {err}");
            }
        }
    }

    #[test]
    fn untouched_input_columns_have_zero_gradient() {
        let m = RnnModel::new(5, 4, 1);
        let (_, g) = m.loss_and_grad(&[1, 2], 3);
        // column 4 of W_xh is never looked up
        for j in 0..4 {
            assert_eq!(g[j * 5 + 4], 0.0);
        }
    }

    #[test]
    fn clipping_bounds_the_step() {
        let mut m = RnnModel::new(3, 2, 0);
        let before = m.params.clone();
        let mut grad = vec![100.0; before.len()];
        m.sgd_step(&mut grad, 1.0, 5.0);
        let step: f64 = m
            .params
            .iter()
            .zip(&before)
            .map(|(a, b)| (a - b).powi(2))
            .sum::<f64>()
            .sqrt();
        assert!((step - 5.0).abs() < 1e-9);
    }
}
