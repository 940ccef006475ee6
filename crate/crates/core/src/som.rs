//! Self-organizing map over per-object visiting profiles.
//!
//! Nodes sit on a rectangular lattice with 4-neighbour connectivity. Training
//! is online: every sample pulls every node towards itself, weighted by a
//! Gaussian of the lattice distance to the sample's best matching unit. The
//! learning rate and the neighbourhood radius decay exponentially per epoch.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::grid::Grid;
use crate::matrices::{TimeSpentMatrix, VisitFrequencyMatrix};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SomError {
    #[error("no feature rows to train on")]
    EmptyFeatures,
    #[error("grid {rows}x{cols} is too small (need at least 4 nodes)")]
    GridTooSmall { rows: usize, cols: usize },
    #[error("feature dimension mismatch: grid has {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("invalid training schedule: {0}")]
    InvalidSchedule(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum Normalization {
    #[default]
    Zscore,
    Minmax,
    None,
}

impl std::str::FromStr for Normalization {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "zscore" => Ok(Self::Zscore),
            "minmax" => Ok(Self::Minmax),
            "none" => Ok(Self::None),
            other => Err(format!("unknown normalization `{other}`")),
        }
    }
}

/// Concatenates frequency and time-spent rows (`N × 2L`) and normalizes each
/// column. Constant columns map to 0 under `zscore` and `minmax`.
pub fn build_features(
    freq: &VisitFrequencyMatrix,
    spent: &TimeSpentMatrix,
    normalize: Normalization,
) -> Grid<f64> {
    let (n, l) = freq.counts.shape();
    assert_eq!(spent.seconds.shape(), (n, l), "matrix shapes differ");
    let mut out = Grid::filled(n, 2 * l, 0.0);
    for i in 0..n {
        let row = out.row_mut(i);
        for (j, &c) in freq.counts.row(i).iter().enumerate() {
            row[j] = c as f64;
        }
        row[l..].copy_from_slice(spent.seconds.row(i));
    }
    if n == 0 {
        return out;
    }
    for j in 0..2 * l {
        let col = out.column(j);
        let mapped: Vec<f64> = match normalize {
            Normalization::None => continue,
            Normalization::Zscore => {
                let mean = col.iter().sum::<f64>() / n as f64;
                let var = col.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n as f64;
                let sd = var.sqrt();
                if sd <= f64::EPSILON * mean.abs().max(1.0) {
                    vec![0.0; n]
                } else {
                    col.iter().map(|v| (v - mean) / sd).collect()
                }
            }
            Normalization::Minmax => {
                let lo = col.iter().copied().fold(f64::INFINITY, f64::min);
                let hi = col.iter().copied().fold(f64::NEG_INFINITY, f64::max);
                if hi - lo <= 0.0 {
                    vec![0.0; n]
                } else {
                    col.iter().map(|v| (v - lo) / (hi - lo)).collect()
                }
            }
        };
        for (i, v) in mapped.into_iter().enumerate() {
            out[(i, j)] = v;
        }
    }
    out
}

/// Side length heuristic: `ceil(sqrt(5 * sqrt(N)))`, at least 2.
pub fn default_grid_side(n: usize) -> usize {
    ((5.0 * (n as f64).sqrt()).sqrt().ceil() as usize).max(2)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SomGrid {
    rows: usize,
    cols: usize,
    dim: usize,
    weights: Vec<f64>,
}

impl SomGrid {
    pub fn from_weights(rows: usize, cols: usize, dim: usize, weights: Vec<f64>) -> Self {
        assert!(rows >= 1 && cols >= 1, "grid needs at least one node");
        assert_eq!(weights.len(), rows * cols * dim, "weight length mismatch");
        assert!(weights.iter().all(|w| w.is_finite()), "non-finite weight");
        Self {
            rows,
            cols,
            dim,
            weights,
        }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn n_nodes(&self) -> usize {
        self.rows * self.cols
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn node(&self, r: usize, c: usize) -> &[f64] {
        let k = (r * self.cols + c) * self.dim;
        &self.weights[k..k + self.dim]
    }

    fn node_mut(&mut self, idx: usize) -> &mut [f64] {
        let k = idx * self.dim;
        &mut self.weights[k..k + self.dim]
    }
}

fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

fn dist(a: &[f64], b: &[f64]) -> f64 {
    sq_dist(a, b).sqrt()
}

/// Seeds every node with a feature row drawn uniformly with replacement.
pub fn init_grid(rows: usize, cols: usize, features: &Grid<f64>, seed: u64) -> Result<SomGrid, SomError> {
    if rows * cols < 4 {
        return Err(SomError::GridTooSmall { rows, cols });
    }
    if features.rows() == 0 {
        return Err(SomError::EmptyFeatures);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut weights = Vec::with_capacity(rows * cols * features.cols());
    for _ in 0..rows * cols {
        let pick = rng.random_range(0..features.rows());
        weights.extend_from_slice(features.row(pick));
    }
    Ok(SomGrid::from_weights(rows, cols, features.cols(), weights))
}

/// Node nearest to `x` in Euclidean distance; ties go to the smallest
/// row-major index.
pub fn best_matching_unit(grid: &SomGrid, x: &[f64]) -> (usize, usize) {
    debug_assert_eq!(x.len(), grid.dim);
    let mut best = 0;
    let mut best_d = f64::INFINITY;
    for idx in 0..grid.n_nodes() {
        let d = sq_dist(&grid.weights[idx * grid.dim..(idx + 1) * grid.dim], x);
        if d < best_d {
            best_d = d;
            best = idx;
        }
    }
    (best / grid.cols, best % grid.cols)
}

/// Gaussian neighbourhood kernel `exp(-d² / 2σ²)`.
pub fn neighborhood_weight(lattice_dist: f64, sigma: f64) -> f64 {
    (-(lattice_dist * lattice_dist) / (2.0 * sigma * sigma)).exp()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrainSchedule {
    pub epochs: usize,
    pub lr0: f64,
    pub lr1: f64,
    pub sigma0: f64,
    pub sigma1: f64,
    pub seed: u64,
}

impl Default for TrainSchedule {
    fn default() -> Self {
        Self {
            epochs: 50,
            lr0: 0.5,
            lr1: 0.02,
            sigma0: 3.0,
            sigma1: 0.25,
            seed: 0,
        }
    }
}

impl TrainSchedule {
    /// Default schedule with the initial radius set to half the longer grid side.
    pub fn for_grid(rows: usize, cols: usize, seed: u64) -> Self {
        let base = Self::default();
        Self {
            sigma0: (rows.max(cols) as f64 / 2.0).max(base.sigma1),
            seed,
            ..base
        }
    }

    pub fn validate(&self) -> Result<(), SomError> {
        let bad = |m: &str| Err(SomError::InvalidSchedule(m.to_string()));
        if self.epochs == 0 {
            return bad("epochs must be positive");
        }
        // lr0 = lr1 = 0 is accepted as a frozen schedule
        if !(0.0 <= self.lr1 && self.lr1 <= self.lr0 && self.lr0 <= 1.0) {
            return bad("need 0 <= lr1 <= lr0 <= 1");
        }
        if !(self.sigma1 > 0.0 && self.sigma0 >= self.sigma1) {
            return bad("need sigma0 >= sigma1 > 0");
        }
        Ok(())
    }

    /// Learning rate and radius for epoch `e`.
    pub fn at_epoch(&self, e: usize) -> (f64, f64) {
        let frac = if self.epochs > 1 {
            e as f64 / (self.epochs - 1) as f64
        } else {
            0.0
        };
        (decay(self.lr0, self.lr1, frac), decay(self.sigma0, self.sigma1, frac))
    }
}

fn decay(start: f64, end: f64, frac: f64) -> f64 {
    if start == 0.0 {
        0.0
    } else {
        start * (end / start).powf(frac)
    }
}

/// Mean distance from each row to its best matching unit.
pub fn quantization_error(grid: &SomGrid, features: &Grid<f64>) -> f64 {
    if features.rows() == 0 {
        return 0.0;
    }
    let total: f64 = (0..features.rows())
        .map(|i| {
            let x = features.row(i);
            let (r, c) = best_matching_unit(grid, x);
            dist(grid.node(r, c), x)
        })
        .sum();
    total / features.rows() as f64
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainOutcome {
    pub grid: SomGrid,
    /// Quantization error of the grid as passed in.
    pub initial_qe: f64,
    /// Quantization error after each epoch.
    pub qe_trace: Vec<f64>,
}

pub fn train(mut grid: SomGrid, features: &Grid<f64>, schedule: &TrainSchedule) -> Result<TrainOutcome, SomError> {
    schedule.validate()?;
    if features.cols() != grid.dim {
        return Err(SomError::DimensionMismatch {
            expected: grid.dim,
            got: features.cols(),
        });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(schedule.seed);
    let mut order: Vec<usize> = (0..features.rows()).collect();
    let initial_qe = quantization_error(&grid, features);
    let mut qe_trace = Vec::with_capacity(schedule.epochs);
    for e in 0..schedule.epochs {
        let (lr, sigma) = schedule.at_epoch(e);
        order.shuffle(&mut rng);
        for &i in &order {
            let x = features.row(i);
            let (br, bc) = best_matching_unit(&grid, x);
            for idx in 0..grid.n_nodes() {
                let (r, c) = (idx / grid.cols, idx % grid.cols);
                let dr = r as f64 - br as f64;
                let dc = c as f64 - bc as f64;
                let step = lr * neighborhood_weight((dr * dr + dc * dc).sqrt(), sigma);
                for (w, xv) in grid.node_mut(idx).iter_mut().zip(x) {
                    *w += step * (xv - *w);
                }
            }
        }
        qe_trace.push(quantization_error(&grid, features));
    }
    Ok(TrainOutcome {
        grid,
        initial_qe,
        qe_trace,
    })
}

/// Mean weight distance from each node to its existing lattice neighbours.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UMatrix {
    pub values: Grid<f64>,
}

impl UMatrix {
    pub fn mean_std(&self) -> (f64, f64) {
        let v = self.values.as_slice();
        let n = v.len() as f64;
        let mean = v.iter().sum::<f64>() / n;
        let var = v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n;
        (mean, var.sqrt())
    }
}

pub fn compute_umatrix(grid: &SomGrid) -> UMatrix {
    let (rows, cols) = (grid.rows, grid.cols);
    let mut values = Grid::filled(rows, cols, 0.0);
    for r in 0..rows {
        for c in 0..cols {
            let mut sum = 0.0;
            let mut count = 0;
            let mut visit = |nr: usize, nc: usize| {
                sum += dist(grid.node(r, c), grid.node(nr, nc));
                count += 1;
            };
            if r > 0 {
                visit(r - 1, c);
            }
            if r + 1 < rows {
                visit(r + 1, c);
            }
            if c > 0 {
                visit(r, c - 1);
            }
            if c + 1 < cols {
                visit(r, c + 1);
            }
            if count > 0 {
                values[(r, c)] = sum / count as f64;
            }
        }
    }
    UMatrix { values }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClusterAssignment {
    /// BMU `(row, col)` per object.
    pub bmus: Vec<(usize, usize)>,
    /// Number of objects per node.
    pub hits: Grid<usize>,
}

pub fn assign_and_aggregate(grid: &SomGrid, features: &Grid<f64>) -> ClusterAssignment {
    let mut hits = Grid::filled(grid.rows, grid.cols, 0usize);
    let bmus: Vec<_> = (0..features.rows())
        .map(|i| {
            let bmu = best_matching_unit(grid, features.row(i));
            hits[bmu] += 1;
            bmu
        })
        .collect();
    ClusterAssignment { bmus, hits }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OutstandingObject {
    pub object: usize,
    pub bmu: (usize, usize),
    pub u_value: f64,
}

pub const DEFAULT_OUTLIER_K: f64 = 2.0;

/// Flags objects whose BMU has a U-value above `mean + k·std` of the whole
/// U-matrix. Sorted by descending U-value, then object index.
pub fn detect_outstanding(umatrix: &UMatrix, assignment: &ClusterAssignment, k: f64) -> Vec<OutstandingObject> {
    assert!(k > 0.0, "k must be positive");
    let (mean, sd) = umatrix.mean_std();
    let threshold = mean + k * sd;
    let mut flagged: Vec<_> = assignment
        .bmus
        .iter()
        .enumerate()
        .filter_map(|(object, &bmu)| {
            let u_value = umatrix.values[bmu];
            (u_value > threshold).then_some(OutstandingObject { object, bmu, u_value })
        })
        .collect();
    flagged.sort_by(|a, b| b.u_value.total_cmp(&a.u_value).then(a.object.cmp(&b.object)));
    flagged
}

/// Serialized form of a trained map.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SomModel {
    pub rows: usize,
    pub cols: usize,
    pub dim: usize,
    pub weights: Vec<f64>,
    pub schedule: TrainSchedule,
    pub seed: u64,
}

impl SomModel {
    pub fn new(grid: &SomGrid, schedule: TrainSchedule, init_seed: u64) -> Self {
        Self {
            rows: grid.rows,
            cols: grid.cols,
            dim: grid.dim,
            weights: grid.weights.clone(),
            schedule,
            seed: init_seed,
        }
    }

    pub fn grid(&self) -> SomGrid {
        SomGrid::from_weights(self.rows, self.cols, self.dim, self.weights.clone())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::{prop_assert, prop_assert_eq, proptest};

    fn random_grid(rows: usize, cols: usize, dim: usize, seed: u64) -> SomGrid {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let w = (0..rows * cols * dim).map(|_| rng.random_range(-1.0..1.0)).collect();
        SomGrid::from_weights(rows, cols, dim, w)
    }

    fn freq_spent(rows: Vec<Vec<u32>>, spent: Vec<Vec<f64>>) -> (VisitFrequencyMatrix, TimeSpentMatrix) {
        let l = rows[0].len();
        (
            VisitFrequencyMatrix {
                counts: Grid::from_rows(rows, l),
            },
            TimeSpentMatrix {
                seconds: Grid::from_rows(spent, l),
            },
        )
    }

    #[test]
    fn features_normalization() {
        let (f, s) = freq_spent(vec![vec![3, 1]], vec![vec![10.0, 0.0]]);
        let z = build_features(&f, &s, Normalization::Zscore);
        assert!(z.as_slice().iter().all(|&v| v == 0.0));
        let raw = build_features(&f, &s, Normalization::None);
        assert_eq!(raw.row(0), &[3.0, 1.0, 10.0, 0.0]);
        let (f, s) = freq_spent(
            vec![vec![0], vec![5], vec![10]],
            vec![vec![7.0], vec![7.0], vec![7.0]],
        );
        let mm = build_features(&f, &s, Normalization::Minmax);
        assert_eq!(mm.column(0), vec![0.0, 0.5, 1.0]);
        assert_eq!(mm.column(1), vec![0.0, 0.0, 0.0]);
    }

    #[test]
    fn init_is_deterministic_and_single_row_gives_flat_map() {
        let feats = Grid::from_rows(vec![vec![1.0, 2.0], vec![3.0, 4.0], vec![5.0, 6.0]], 2);
        assert_eq!(init_grid(3, 3, &feats, 9).unwrap(), init_grid(3, 3, &feats, 9).unwrap());
        let one = Grid::from_rows(vec![vec![0.5, -0.5]], 2);
        let g = init_grid(2, 3, &one, 1).unwrap();
        assert!((0..2).all(|r| (0..3).all(|c| g.node(r, c) == [0.5, -0.5])));
        assert!(compute_umatrix(&g).values.as_slice().iter().all(|&u| u == 0.0));
        assert_eq!(init_grid(1, 3, &one, 1), Err(SomError::GridTooSmall { rows: 1, cols: 3 }));
        assert_eq!(init_grid(2, 2, &Grid::filled(0, 2, 0.0), 1), Err(SomError::EmptyFeatures));
    }

    #[test]
    fn different_seeds_usually_differ() {
        let feats = Grid::from_rows((0..10).map(|i| vec![i as f64]).collect(), 1);
        // resample oracle: with 16 nodes and 10 rows, two independent draws
        // coincide with probability (1/10)^16, so any fixed seed pair differs
        let mut differ = 0;
        for s in 0..20u64 {
            if init_grid(4, 4, &feats, s).unwrap() != init_grid(4, 4, &feats, s + 1000).unwrap() {
                differ += 1;
            }
        }
        assert_eq!(differ, 20);
    }

    #[test]
    fn bmu_rules() {
        let g = random_grid(3, 4, 3, 5);
        assert_eq!(best_matching_unit(&g, &g.node(1, 2).to_vec()), (1, 2));
        let flat = SomGrid::from_weights(2, 2, 1, vec![1.0, -1.0, 1.0, -1.0]);
        assert_eq!(best_matching_unit(&flat, &[0.0]), (0, 0));
    }

    #[test]
    fn kernel_values() {
        assert_eq!(neighborhood_weight(0.0, 1.3), 1.0);
        assert!((neighborhood_weight(2.0, 2.0) - (-0.5f64).exp()).abs() < 1e-15);
        assert!((neighborhood_weight(1.0, 1.0) - 0.6065306597).abs() < 1e-9);
        assert!(neighborhood_weight(50.0, 1.0) < 1e-300);
    }

    #[test]
    fn zero_learning_rate_freezes_grid() {
        let feats = Grid::from_rows(vec![vec![1.0, 0.0], vec![0.0, 1.0]], 2);
        let g = random_grid(2, 2, 2, 3);
        let sched = TrainSchedule {
            epochs: 5,
            lr0: 0.0,
            lr1: 0.0,
            ..Default::default()
        };
        assert_eq!(train(g.clone(), &feats, &sched).unwrap().grid, g);
    }

    #[test]
    fn single_node_full_pull() {
        let g = SomGrid::from_weights(1, 1, 2, vec![0.0, 0.0]);
        let feats = Grid::from_rows(vec![vec![3.0, -2.0]], 2);
        let sched = TrainSchedule {
            epochs: 1,
            lr0: 1.0,
            lr1: 1.0,
            sigma0: 1.0,
            sigma1: 1.0,
            seed: 0,
        };
        let out = train(g, &feats, &sched).unwrap();
        assert_eq!(out.grid.node(0, 0), &[3.0, -2.0]);
        assert_eq!(out.initial_qe, (13.0f64).sqrt());
        assert_eq!(out.qe_trace, vec![0.0]);
    }

    #[test]
    fn schedule_validation() {
        let ok = TrainSchedule::default();
        assert!(ok.validate().is_ok());
        assert!(TrainSchedule { lr1: 0.9, lr0: 0.5, ..ok }.validate().is_err());
        assert!(TrainSchedule { sigma1: 0.0, ..ok }.validate().is_err());
        assert!(TrainSchedule { epochs: 0, ..ok }.validate().is_err());
        let (lr, sigma) = ok.at_epoch(ok.epochs - 1);
        assert!((lr - ok.lr1).abs() < 1e-12 && (sigma - ok.sigma1).abs() < 1e-12);
        assert_eq!(ok.at_epoch(0), (ok.lr0, ok.sigma0));
    }

    #[test]
    fn umatrix_small_cases() {
        let d = 2.5;
        let g = SomGrid::from_weights(1, 2, 2, vec![0.0, 0.0, d * 0.6, d * 0.8]);
        let u = compute_umatrix(&g);
        assert!((u.values[(0, 0)] - d).abs() < 1e-12);
        assert!((u.values[(0, 1)] - d).abs() < 1e-12);
        let single = SomGrid::from_weights(1, 1, 1, vec![4.0]);
        assert_eq!(compute_umatrix(&single).values.as_slice(), &[0.0]);
    }

    #[test]
    fn aggregation_counts() {
        let g = random_grid(2, 2, 2, 1);
        let none = assign_and_aggregate(&g, &Grid::filled(0, 2, 0.0));
        assert!(none.hits.as_slice().iter().all(|&h| h == 0));
        let one = assign_and_aggregate(&g, &Grid::from_rows(vec![vec![0.1, 0.2]], 2));
        assert_eq!(one.hits.as_slice().iter().sum::<usize>(), 1);
        assert_eq!(one.hits[one.bmus[0]], 1);
    }

    #[test]
    fn outstanding_detection() {
        let flat = UMatrix {
            values: Grid::filled(3, 3, 0.7),
        };
        let a = ClusterAssignment {
            bmus: vec![(0, 0), (1, 1), (2, 2)],
            hits: Grid::filled(3, 3, 0),
        };
        assert!(detect_outstanding(&flat, &a, 2.0).is_empty());

        // one spike: with 24 zero nodes and one node at v, z = sqrt(24) ≈ 4.9
        let mut vals = Grid::filled(5, 5, 0.0);
        vals[(4, 4)] = 10.0;
        let u = UMatrix { values: vals };
        let a = ClusterAssignment {
            bmus: vec![(0, 0), (4, 4), (2, 2)],
            hits: Grid::filled(5, 5, 0),
        };
        let flags = detect_outstanding(&u, &a, 2.0);
        assert_eq!(flags.len(), 1);
        assert_eq!(flags[0].object, 1);
        assert_eq!(flags[0].bmu, (4, 4));
    }

    #[test]
    fn serialized_model_round_trip() {
        let g = random_grid(2, 3, 2, 4);
        let m = SomModel::new(&g, TrainSchedule::default(), 11);
        let back: SomModel = serde_json::from_str(&serde_json::to_string(&m).unwrap()).unwrap();
        assert_eq!(back.grid(), g);
    }

    #[test]
    fn grid_side_heuristic() {
        assert_eq!(default_grid_side(204), 9);
        assert_eq!(default_grid_side(1), 3);
        assert_eq!(default_grid_side(0), 2);
    }

    proptest! {
        #[test]
        fn kernel_bounds(d1 in 0.0f64..20.0, d2 in 0.0f64..20.0, sigma in 0.5f64..10.0) {
            let (a, b) = (neighborhood_weight(d1, sigma), neighborhood_weight(d2, sigma));
            prop_assert!(a > 0.0 && a <= 1.0);
            if d1 <= d2 { prop_assert!(a >= b); }
            prop_assert_eq!(a == 1.0, d1 == 0.0 || d1 * d1 / (2.0 * sigma * sigma) < f64::EPSILON / 2.0);
        }

        #[test]
        fn training_is_deterministic_and_improves(seed in 0u64..200) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            // four loose clusters in 3-D, well over ten samples per node
            let centers: Vec<Vec<f64>> = (0..4).map(|_| (0..3).map(|_| rng.random_range(-4.0..4.0)).collect()).collect();
            let rows: Vec<Vec<f64>> = (0..200)
                .map(|i| centers[i % 4].iter().map(|c| c + rng.random_range(-1.0..1.0)).collect())
                .collect();
            let feats = Grid::from_rows(rows, 3);
            let sched = TrainSchedule::for_grid(4, 4, seed);
            let g = init_grid(4, 4, &feats, seed).unwrap();
            let a = train(g.clone(), &feats, &sched).unwrap();
            let b = train(g, &feats, &sched).unwrap();
            prop_assert_eq!(&a, &b);
            prop_assert!(*a.qe_trace.last().unwrap() <= a.initial_qe, "{} {:?}", a.initial_qe, a.qe_trace);
        }

        #[test]
        fn permutation_keeps_hits_and_bmus(seed in 0u64..200, shift in 1usize..20) {
            let g = random_grid(3, 3, 2, seed);
            let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0xabc);
            let rows: Vec<Vec<f64>> = (0..20).map(|_| vec![rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)]).collect();
            let mut permuted = rows.clone();
            permuted.rotate_left(shift);
            let a = assign_and_aggregate(&g, &Grid::from_rows(rows, 2));
            let b = assign_and_aggregate(&g, &Grid::from_rows(permuted, 2));
            prop_assert_eq!(&a.hits, &b.hits);
            prop_assert_eq!(a.hits.as_slice().iter().sum::<usize>(), 20);
            let mut rotated = a.bmus.clone();
            rotated.rotate_left(shift);
            prop_assert_eq!(rotated, b.bmus);
        }
    }
}
