use serde::{Deserialize, Serialize};

use super::PredictError;
use crate::grid::Grid;
use crate::ingest::LocationId;
use crate::matrices::TimeOrientedMatrix;

/// Directed location-to-location transition counts between two bins.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FlowMap {
    pub label: String,
    pub n_locations: usize,
    /// `L × L`, indexed by `(from - 1, to - 1)`.
    pub weights: Grid<u32>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct FlowEdge {
    pub from: LocationId,
    pub to: LocationId,
    pub weight: u32,
}

impl FlowMap {
    /// Counts `(from[i], to[i])` pairs; pairs touching "absent" are skipped.
    pub fn from_columns(label: &str, from: &[LocationId], to: &[LocationId], n_locations: usize) -> Self {
        assert_eq!(from.len(), to.len(), "column lengths differ");
        let mut weights = Grid::filled(n_locations, n_locations, 0u32);
        for (&a, &b) in from.iter().zip(to) {
            if a != 0 && b != 0 {
                weights[(a as usize - 1, b as usize - 1)] += 1;
            }
        }
        Self {
            label: label.to_string(),
            n_locations,
            weights,
        }
    }

    pub fn weight(&self, from: LocationId, to: LocationId) -> u32 {
        self.weights[(from as usize - 1, to as usize - 1)]
    }

    pub fn total_weight(&self) -> u64 {
        self.weights.as_slice().iter().map(|&w| w as u64).sum()
    }

    pub fn max_weight(&self) -> u32 {
        self.weights.as_slice().iter().copied().max().unwrap_or(0)
    }

    /// Non-zero edges by descending weight, then `(from, to)`.
    pub fn edges(&self) -> Vec<FlowEdge> {
        let l = self.n_locations;
        let mut edges: Vec<FlowEdge> = (0..l * l)
            .filter_map(|k| {
                let weight = self.weights.as_slice()[k];
                (weight > 0).then(|| FlowEdge {
                    from: (k / l + 1) as LocationId,
                    to: (k % l + 1) as LocationId,
                    weight,
                })
            })
            .collect();
        edges.sort_by(|a, b| b.weight.cmp(&a.weight).then((a.from, a.to).cmp(&(b.from, b.to))));
        edges
    }

    pub fn top_edges(&self, k: usize) -> Vec<FlowEdge> {
        let mut e = self.edges();
        e.truncate(k);
        e
    }
}

/// Observed flow from bin `bin_t` to bin `bin_t + 1`.
pub fn build_flow_map(tom: &TimeOrientedMatrix, bin_t: usize, n_locations: usize) -> Result<FlowMap, PredictError> {
    if bin_t + 1 >= tom.n_bins() {
        return Err(PredictError::InvalidParameter(format!(
            "flow needs bins {bin_t} and {}, matrix has {}",
            bin_t + 1,
            tom.n_bins()
        )));
    }
    Ok(FlowMap::from_columns(
        &format!("actual {bin_t}->{}", bin_t + 1),
        &tom.cells.column(bin_t),
        &tom.cells.column(bin_t + 1),
        n_locations,
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::matrices::TimeBinning;
    use proptest::prelude::*;

    fn tom(rows: Vec<Vec<LocationId>>) -> TimeOrientedMatrix {
        let t = rows[0].len();
        TimeOrientedMatrix {
            cells: Grid::from_rows(rows, t),
            binning: TimeBinning::new(0, 3600, t).unwrap(),
        }
    }

    #[test]
    fn stationary_population_is_one_self_edge() {
        let f = build_flow_map(&tom(vec![vec![3, 3]; 7]), 0, 4).unwrap();
        assert_eq!(f.edges(), vec![FlowEdge { from: 3, to: 3, weight: 7 }]);
    }

    #[test]
    fn absent_objects_ignored() {
        let f = build_flow_map(&tom(vec![vec![0, 0], vec![1, 0], vec![0, 2], vec![1, 2]]), 0, 2).unwrap();
        assert_eq!(f.total_weight(), 1);
        assert_eq!(f.weight(1, 2), 1);
        assert!(build_flow_map(&tom(vec![vec![1, 2]]), 1, 2).is_err());
    }

    #[test]
    fn top_edges_order() {
        let from = [1, 1, 1, 2, 2, 3];
        let to = [2, 2, 2, 3, 3, 1];
        let f = FlowMap::from_columns("x", &from, &to, 3);
        let top: Vec<_> = f.top_edges(2).iter().map(|e| (e.from, e.to, e.weight)).collect();
        assert_eq!(top, vec![(1, 2, 3), (2, 3, 2)]);
    }

    proptest! {
        #[test]
        fn total_equals_objects_present_in_both(rows in prop::collection::vec((0u32..5, 0u32..5), 0..60)) {
            let from: Vec<_> = rows.iter().map(|r| r.0).collect();
            let to: Vec<_> = rows.iter().map(|r| r.1).collect();
            let f = FlowMap::from_columns("p", &from, &to, 4);
            let both = rows.iter().filter(|r| r.0 != 0 && r.1 != 0).count() as u64;
            prop_assert_eq!(f.total_weight(), both);
            prop_assert!(f.total_weight() <= rows.len() as u64);
        }
    }
}
