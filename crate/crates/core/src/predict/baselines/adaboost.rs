//! Multi-class AdaBoost (SAMME) over depth-1 stumps.

use super::feature_index;
use crate::ingest::LocationId;
use crate::predict::{Predictor, WindowedSet};

#[derive(Debug, Clone, Copy, PartialEq)]
struct Stump {
    pos: usize,
    id: LocationId,
    eq_class: usize,
    ne_class: usize,
}

impl Stump {
    fn classify(&self, window: &[LocationId]) -> usize {
        if window.get(self.pos) == Some(&self.id) {
            self.eq_class
        } else {
            self.ne_class
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AdaBoost {
    n_classes: usize,
    stumps: Vec<(Stump, f64)>,
}

fn argmax_slice(v: &[f64]) -> usize {
    crate::predict::argmax(v)
}

impl AdaBoost {
    pub fn fit(ws: &WindowedSet, rounds: usize) -> Self {
        let c = ws.n_classes;
        let w = ws.width();
        let m = ws.len();
        let mut weights = vec![1.0 / m as f64; m];
        let class_term = ((c.max(2) - 1) as f64).ln();
        let mut stumps = Vec::new();
        let mut table = vec![0.0; w * c * c];
        for _ in 0..rounds.max(1) {
            table.iter_mut().for_each(|v| *v = 0.0);
            let mut totals = vec![0.0; c];
            for (i, x) in ws.inputs.iter().enumerate() {
                let y = ws.labels[i] as usize;
                totals[y] += weights[i];
                for (p, &v) in x.iter().enumerate() {
                    table[feature_index(p, v, c) * c + y] += weights[i];
                }
            }
            let mass: f64 = totals.iter().sum();
            let mut best: Option<(f64, Stump)> = None;
            let mut right = vec![0.0; c];
            for f in 0..w * c {
                let left = &table[f * c..(f + 1) * c];
                for k in 0..c {
                    right[k] = totals[k] - left[k];
                }
                let (eq_class, ne_class) = (argmax_slice(left), argmax_slice(&right));
                let err = (mass - left[eq_class] - right[ne_class]) / mass;
                if best.is_none_or(|(e, _)| err < e - 1e-12) {
                    best = Some((
                        err,
                        Stump {
                            pos: f / c,
                            id: (f % c) as LocationId,
                            eq_class,
                            ne_class,
                        },
                    ));
                }
            }
            let Some((err, stump)) = best else { break };
            let err = err.max(0.0);
            if err >= 1.0 - 1.0 / c as f64 {
                if stumps.is_empty() {
                    // nothing beats chance; keep one stump as a majority rule
                    stumps.push((stump, 1.0));
                }
                break;
            }
            let alpha = ((1.0 - err) / err.max(1e-10)).ln() + class_term;
            stumps.push((stump, alpha));
            if err <= 1e-10 {
                break;
            }
            let mut norm = 0.0;
            for (i, x) in ws.inputs.iter().enumerate() {
                if stump.classify(x) != ws.labels[i] as usize {
                    weights[i] *= alpha.exp();
                }
                norm += weights[i];
            }
            weights.iter_mut().for_each(|v| *v /= norm);
        }
        Self { n_classes: c, stumps }
    }

    pub fn rounds(&self) -> usize {
        self.stumps.len()
    }
}

impl Predictor for AdaBoost {
    fn n_classes(&self) -> usize {
        self.n_classes
    }

    fn distribution(&self, window: &[LocationId], _object: Option<usize>) -> Vec<f64> {
        let mut scores = vec![0.0; self.n_classes];
        for (s, alpha) in &self.stumps {
            scores[s.classify(window)] += alpha;
        }
        let total: f64 = scores.iter().sum();
        if total > 0.0 {
            scores.iter_mut().for_each(|v| *v /= total);
        } else {
            scores.iter_mut().for_each(|v| *v = 1.0 / self.n_classes as f64);
        }
        scores
    }
}
