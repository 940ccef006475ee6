use std::ops::Range;

use serde::{Deserialize, Serialize};

use super::PredictError;
use crate::ingest::LocationId;
use crate::matrices::{SupervisedSplit, TimeOrientedMatrix};

/// Fixed-width training examples cut from time-oriented rows.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WindowedSet {
    pub inputs: Vec<Vec<LocationId>>,
    pub labels: Vec<LocationId>,
    /// Source row of each example.
    pub objects: Vec<usize>,
    /// `L + 1`; class 0 is "absent".
    pub n_classes: usize,
}

impl WindowedSet {
    pub fn new(
        inputs: Vec<Vec<LocationId>>,
        labels: Vec<LocationId>,
        objects: Vec<usize>,
        n_classes: usize,
    ) -> Result<Self, PredictError> {
        if inputs.len() != labels.len() || inputs.len() != objects.len() {
            return Err(PredictError::InvalidParameter("inputs, labels and objects differ in length".into()));
        }
        let check = |id: LocationId| {
            if id as usize >= n_classes {
                Err(PredictError::InvalidWindow { id, n_classes })
            } else {
                Ok(())
            }
        };
        for w in &inputs {
            if w.is_empty() {
                return Err(PredictError::InvalidParameter("empty input window".into()));
            }
            w.iter().try_for_each(|&id| check(id))?;
        }
        labels.iter().try_for_each(|&id| check(id))?;
        Ok(Self {
            inputs,
            labels,
            objects,
            n_classes,
        })
    }

    /// Full-prefix examples: one per object, history `[0, target_bin)`.
    pub fn from_split(split: &SupervisedSplit, n_classes: usize) -> Result<Self, PredictError> {
        let n = split.labels.len();
        let inputs = (0..n).map(|i| split.features.row_vec(i)).collect();
        Self::new(inputs, split.labels.clone(), (0..n).collect(), n_classes)
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    /// Longest input window.
    pub fn width(&self) -> usize {
        self.inputs.iter().map(Vec::len).max().unwrap_or(0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct WindowSpec {
    pub width: usize,
    pub stride: usize,
    pub drop_all_absent: bool,
}

impl Default for WindowSpec {
    fn default() -> Self {
        Self {
            width: 8,
            stride: 1,
            drop_all_absent: true,
        }
    }
}

/// Slides a window over every row of the matrix: input = bins `[s, s+W)`,
/// label = bin `s+W`, for `s = 0, stride, 2·stride, …`.
pub fn make_windows(tom: &TimeOrientedMatrix, n_locations: usize, spec: WindowSpec) -> Result<WindowedSet, PredictError> {
    make_windows_in(tom, n_locations, spec, 0..tom.n_bins())
}

/// As [`make_windows`], restricted to windows lying entirely inside `bins`.
/// Window starts are counted from `bins.start`.
pub fn make_windows_in(
    tom: &TimeOrientedMatrix,
    n_locations: usize,
    spec: WindowSpec,
    bins: Range<usize>,
) -> Result<WindowedSet, PredictError> {
    if spec.width == 0 || spec.stride == 0 {
        return Err(PredictError::InvalidParameter("window width and stride must be positive".into()));
    }
    let bins = bins.start..bins.end.min(tom.n_bins());
    if spec.width + 1 > bins.len() {
        return Err(PredictError::WindowTooLong {
            width: spec.width,
            n_bins: bins.len(),
        });
    }
    let mut inputs = Vec::new();
    let mut labels = Vec::new();
    let mut objects = Vec::new();
    for i in 0..tom.n_objects() {
        let row = &tom.row(i)[bins.clone()];
        let mut s = 0;
        while s + spec.width < row.len() {
            let input = &row[s..s + spec.width];
            let label = row[s + spec.width];
            if !(spec.drop_all_absent && label == 0 && input.iter().all(|&v| v == 0)) {
                inputs.push(input.to_vec());
                labels.push(label);
                objects.push(i);
            }
            s += spec.stride;
        }
    }
    WindowedSet::new(inputs, labels, objects, n_locations + 1)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::Grid;
    use crate::matrices::TimeBinning;

    fn tom(rows: Vec<Vec<LocationId>>) -> TimeOrientedMatrix {
        let t = rows[0].len();
        TimeOrientedMatrix {
            cells: Grid::from_rows(rows, t),
            binning: TimeBinning::new(0, 3600, t).unwrap(),
        }
    }

    /// Enumeration oracle: every start position, no stride logic.
    fn enumerate(row: &[LocationId], w: usize, stride: usize) -> Vec<(Vec<LocationId>, LocationId)> {
        (0..row.len())
            .filter(|s| s % stride == 0 && s + w < row.len())
            .map(|s| (row[s..s + w].to_vec(), row[s + w]))
            .collect()
    }

    #[test]
    fn single_window() {
        let spec = WindowSpec {
            width: 3,
            stride: 1,
            drop_all_absent: false,
        };
        let ws = make_windows(&tom(vec![vec![2, 2, 3, 5]]), 5, spec).unwrap();
        assert_eq!(ws.inputs, vec![vec![2, 2, 3]]);
        assert_eq!(ws.labels, vec![5]);
        assert_eq!(ws.n_classes, 6);
    }

    #[test]
    fn matches_enumeration() {
        let row: Vec<LocationId> = vec![1, 0, 2, 2, 3, 0, 0, 4, 1, 1, 2];
        for w in 1..5 {
            for stride in 1..4 {
                let spec = WindowSpec {
                    width: w,
                    stride,
                    drop_all_absent: false,
                };
                let ws = make_windows(&tom(vec![row.clone()]), 4, spec).unwrap();
                let got: Vec<_> = ws.inputs.into_iter().zip(ws.labels).collect();
                assert_eq!(got, enumerate(&row, w, stride));
            }
        }
    }

    #[test]
    fn window_as_long_as_matrix_fails() {
        let spec = WindowSpec {
            width: 4,
            ..Default::default()
        };
        assert_eq!(
            make_windows(&tom(vec![vec![1, 2, 3, 4]]), 4, spec),
            Err(PredictError::WindowTooLong { width: 4, n_bins: 4 })
        );
    }

    #[test]
    fn absent_rows_dropped() {
        let spec = WindowSpec {
            width: 2,
            stride: 1,
            drop_all_absent: true,
        };
        let ws = make_windows(&tom(vec![vec![0; 6]]), 3, spec).unwrap();
        assert!(ws.is_empty());
    }

    #[test]
    fn restricted_range() {
        let spec = WindowSpec {
            width: 2,
            stride: 1,
            drop_all_absent: false,
        };
        let ws = make_windows_in(&tom(vec![vec![1, 2, 3, 4, 5, 6]]), 6, spec, 2..5).unwrap();
        assert_eq!(ws.inputs, vec![vec![3, 4]]);
        assert_eq!(ws.labels, vec![5]);
    }
}
