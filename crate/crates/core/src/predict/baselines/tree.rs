//! CART classification trees on one-hot window features, and bagged forests.
//!
//! A split tests `window[pos] == id`. Impurity is Gini.

use rand::seq::index::sample;
use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::BaselineHyper;
use crate::ingest::LocationId;
use crate::predict::{argmax, Predictor, WindowedSet};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TreeParams {
    pub max_depth: usize,
    pub min_leaf: usize,
    /// Features drawn per node; `None` considers all of them.
    pub max_features: Option<usize>,
}

#[derive(Debug, Clone, PartialEq)]
enum Node {
    Leaf(Vec<f64>),
    Split {
        pos: usize,
        id: LocationId,
        eq: usize,
        ne: usize,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub struct DecisionTree {
    n_classes: usize,
    nodes: Vec<Node>,
}

fn gini(counts: &[usize], n: usize) -> f64 {
    if n == 0 {
        return 0.0;
    }
    let n = n as f64;
    1.0 - counts.iter().map(|&c| (c as f64 / n).powi(2)).sum::<f64>()
}

struct Builder<'a> {
    ws: &'a WindowedSet,
    params: TreeParams,
    width: usize,
    nodes: Vec<Node>,
    rng: ChaCha8Rng,
}

impl Builder<'_> {
    fn grow(&mut self, samples: Vec<usize>, depth: usize) -> usize {
        let c = self.ws.n_classes;
        let mut counts = vec![0usize; c];
        for &i in &samples {
            counts[self.ws.labels[i] as usize] += 1;
        }
        let n = samples.len();
        let pure = counts.iter().filter(|&&k| k > 0).count() <= 1;
        let split = if depth >= self.params.max_depth || n < 2 * self.params.min_leaf.max(1) || pure {
            None
        } else {
            self.best_split(&samples, &counts)
        };
        let slot = self.nodes.len();
        match split {
            None => {
                let dist = counts.iter().map(|&k| k as f64 / n.max(1) as f64).collect();
                self.nodes.push(Node::Leaf(dist));
            }
            Some((pos, id)) => {
                self.nodes.push(Node::Leaf(Vec::new()));
                let (eq_s, ne_s): (Vec<usize>, Vec<usize>) = samples
                    .into_iter()
                    .partition(|&i| self.ws.inputs[i].get(pos) == Some(&id));
                let eq = self.grow(eq_s, depth + 1);
                let ne = self.grow(ne_s, depth + 1);
                self.nodes[slot] = Node::Split { pos, id, eq, ne };
            }
        }
        slot
    }

    fn best_split(&mut self, samples: &[usize], counts: &[usize]) -> Option<(usize, LocationId)> {
        let c = self.ws.n_classes;
        let n_features = self.width * c;
        let mut candidates: Vec<usize> = match self.params.max_features {
            Some(m) if m < n_features => sample(&mut self.rng, n_features, m).into_vec(),
            _ => (0..n_features).collect(),
        };
        candidates.sort_unstable();

        // per-position [id][class] counts, only for positions in play
        let mut tables: Vec<Option<Vec<usize>>> = vec![None; self.width];
        for &f in &candidates {
            let pos = f / c;
            if tables[pos].is_none() {
                let mut t = vec![0usize; c * c];
                for &i in samples {
                    if let Some(&v) = self.ws.inputs[i].get(pos) {
                        t[v as usize * c + self.ws.labels[i] as usize] += 1;
                    }
                }
                tables[pos] = Some(t);
            }
        }

        let n = samples.len();
        let parent = gini(counts, n);
        let mut best: Option<(f64, usize)> = None;
        let mut right = vec![0usize; c];
        for &f in &candidates {
            let (pos, id) = (f / c, f % c);
            let table = tables[pos].as_ref().expect("table built");
            let left = &table[id * c..(id + 1) * c];
            let nl: usize = left.iter().sum();
            let nr = n - nl;
            if nl < self.params.min_leaf || nr < self.params.min_leaf {
                continue;
            }
            for k in 0..c {
                right[k] = counts[k] - left[k];
            }
            let weighted = (nl as f64 * gini(left, nl) + nr as f64 * gini(&right, nr)) / n as f64;
            let gain = parent - weighted;
            if gain > 1e-12 && best.is_none_or(|(g, _)| gain > g + 1e-12) {
                best = Some((gain, f));
            }
        }
        best.map(|(_, f)| (f / c, (f % c) as LocationId))
    }
}

impl DecisionTree {
    pub fn fit(ws: &WindowedSet, params: &TreeParams, seed: u64) -> Self {
        Self::fit_on(ws, (0..ws.len()).collect(), params, seed)
    }

    fn fit_on(ws: &WindowedSet, samples: Vec<usize>, params: &TreeParams, seed: u64) -> Self {
        let mut b = Builder {
            ws,
            params: *params,
            width: ws.width(),
            nodes: Vec::new(),
            rng: ChaCha8Rng::seed_from_u64(seed),
        };
        b.grow(samples, 0);
        Self {
            n_classes: ws.n_classes,
            nodes: b.nodes,
        }
    }

    pub fn depth(&self) -> usize {
        fn walk(nodes: &[Node], at: usize) -> usize {
            match &nodes[at] {
                Node::Leaf(_) => 0,
                Node::Split { eq, ne, .. } => 1 + walk(nodes, *eq).max(walk(nodes, *ne)),
            }
        }
        walk(&self.nodes, 0)
    }

    fn leaf(&self, window: &[LocationId]) -> &[f64] {
        let mut at = 0;
        loop {
            match &self.nodes[at] {
                Node::Leaf(dist) => return dist,
                Node::Split { pos, id, eq, ne } => {
                    at = if window.get(*pos) == Some(id) { *eq } else { *ne };
                }
            }
        }
    }
}

impl Predictor for DecisionTree {
    fn n_classes(&self) -> usize {
        self.n_classes
    }

    fn distribution(&self, window: &[LocationId], _object: Option<usize>) -> Vec<f64> {
        self.leaf(window).to_vec()
    }
}

/// Bootstrap-aggregated trees with per-node `sqrt(features)` subsampling;
/// prediction is the majority vote of the trees.
#[derive(Debug, Clone, PartialEq)]
pub struct RandomForest {
    n_classes: usize,
    trees: Vec<DecisionTree>,
}

impl RandomForest {
    pub fn fit(ws: &WindowedSet, n_trees: usize, hyper: &BaselineHyper, seed: u64) -> Self {
        let n_features = ws.width() * ws.n_classes;
        let params = TreeParams {
            max_depth: hyper.tree_max_depth,
            min_leaf: hyper.tree_min_leaf,
            max_features: Some(((n_features as f64).sqrt().ceil() as usize).max(1)),
        };
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let trees = (0..n_trees.max(1))
            .map(|_| {
                let boot: Vec<usize> = (0..ws.len()).map(|_| rng.random_range(0..ws.len())).collect();
                DecisionTree::fit_on(ws, boot, &params, rng.next_u64())
            })
            .collect();
        Self {
            n_classes: ws.n_classes,
            trees,
        }
    }
}

impl Predictor for RandomForest {
    fn n_classes(&self) -> usize {
        self.n_classes
    }

    fn distribution(&self, window: &[LocationId], _object: Option<usize>) -> Vec<f64> {
        let mut votes = vec![0.0; self.n_classes];
        let share = 1.0 / self.trees.len() as f64;
        for t in &self.trees {
            votes[argmax(t.leaf(window))] += share;
        }
        votes
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn set(inputs: Vec<Vec<LocationId>>, labels: Vec<LocationId>, c: usize) -> WindowedSet {
        let n = labels.len();
        WindowedSet::new(inputs, labels, (0..n).collect(), c).unwrap()
    }

    #[test]
    fn depth_and_leaf_limits_hold() {
        // label = first id; needs one split per class
        let inputs: Vec<Vec<LocationId>> = (0..60).map(|i| vec![(i % 6) as LocationId, (i % 4) as LocationId]).collect();
        let labels = inputs.iter().map(|x| x[0]).collect();
        let ws = set(inputs, labels, 6);
        let shallow = DecisionTree::fit(&ws, &TreeParams { max_depth: 2, min_leaf: 2, max_features: None }, 0);
        assert!(shallow.depth() <= 2);
        let full = DecisionTree::fit(&ws, &TreeParams { max_depth: 12, min_leaf: 2, max_features: None }, 0);
        for (x, &y) in ws.inputs.iter().zip(&ws.labels) {
            assert_eq!(full.predict(x, None).0, y);
        }
        // min_leaf larger than any class block forbids every split
        let stump = DecisionTree::fit(&ws, &TreeParams { max_depth: 12, min_leaf: 31, max_features: None }, 0);
        assert_eq!(stump.depth(), 0);
    }

    #[test]
    fn gini_values() {
        assert_eq!(gini(&[4, 0], 4), 0.0);
        assert!((gini(&[2, 2], 4) - 0.5).abs() < 1e-12);
    }
}
