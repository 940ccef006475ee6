//! Dynamic data structures derived from a dataset: stay intervals and the
//! visiting-frequency, time-spent, sequence and time-oriented matrices.
//!
//! Matrix columns for locations are indexed by `location_id - 1`; use the
//! `get` accessors to address cells by location id. In the time-oriented
//! matrix cell value `0` means the object was not observed in that bin.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::grid::Grid;
use crate::ingest::{Dataset, LocationId};

/// Default stay session timeout, seconds.
pub const DEFAULT_SESSION_TIMEOUT: i64 = 120 * 60;
/// Default time-oriented bin width, seconds.
pub const DEFAULT_BIN_SECONDS: i64 = 60 * 60;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MatrixError {
    #[error("target bin {bin} out of range 1..{n_bins}")]
    BinOutOfRange { bin: usize, n_bins: usize },
    #[error("invalid binning: {0}")]
    InvalidBinning(String),
    #[error("invalid window: end {end} must exceed start {start}")]
    InvalidWindow { start: i64, end: i64 },
}

/// Half-open time interval `[start, end)` in epoch seconds.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct TimeWindow {
    pub start: i64,
    pub end: i64,
}

impl TimeWindow {
    pub fn new(start: i64, end: i64) -> Result<Self, MatrixError> {
        if end <= start {
            return Err(MatrixError::InvalidWindow { start, end });
        }
        Ok(Self { start, end })
    }

    pub fn duration(&self) -> i64 {
        self.end - self.start
    }

    pub fn contains(&self, t: i64) -> bool {
        self.start <= t && t < self.end
    }

    /// Length of the overlap between `[a, b)` and this window.
    pub fn overlap(&self, a: i64, b: i64) -> i64 {
        (b.min(self.end) - a.max(self.start)).max(0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct TimeBinning {
    pub start: i64,
    pub bin_seconds: i64,
    pub n_bins: usize,
}

impl TimeBinning {
    pub fn new(start: i64, bin_seconds: i64, n_bins: usize) -> Result<Self, MatrixError> {
        if bin_seconds < 1 {
            return Err(MatrixError::InvalidBinning(format!(
                "bin_seconds must be >= 1, got {bin_seconds}"
            )));
        }
        if n_bins == 0 {
            return Err(MatrixError::InvalidBinning("n_bins must be >= 1".into()));
        }
        Ok(Self {
            start,
            bin_seconds,
            n_bins,
        })
    }

    /// Binning aligned to a multiple of `bin_seconds` that covers every record.
    pub fn covering(d: &Dataset, bin_seconds: i64) -> Result<Self, MatrixError> {
        let (first, last) = d
            .time_span()
            .ok_or_else(|| MatrixError::InvalidBinning("dataset has no records".into()))?;
        if bin_seconds < 1 {
            return Err(MatrixError::InvalidBinning(format!(
                "bin_seconds must be >= 1, got {bin_seconds}"
            )));
        }
        let start = first.div_euclid(bin_seconds) * bin_seconds;
        let n_bins = ((last - start) / bin_seconds + 1) as usize;
        Self::new(start, bin_seconds, n_bins)
    }

    /// Bin index of `t`, or `None` outside the binned range.
    pub fn bin_of(&self, t: i64) -> Option<usize> {
        let idx = (t - self.start).div_euclid(self.bin_seconds);
        (0..self.n_bins as i64).contains(&idx).then_some(idx as usize)
    }

    pub fn bin_start(&self, bin: usize) -> i64 {
        self.start + bin as i64 * self.bin_seconds
    }

    pub fn end(&self) -> i64 {
        self.bin_start(self.n_bins)
    }

    pub fn window(&self) -> TimeWindow {
        TimeWindow {
            start: self.start,
            end: self.end(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct StayInterval {
    pub object: usize,
    pub location_id: LocationId,
    pub t_start: i64,
    pub t_end: i64,
}

impl StayInterval {
    pub fn duration(&self) -> i64 {
        self.t_end - self.t_start
    }
}

/// Turns point check-ins into stays.
///
/// Each record opens a stay that ends at the object's next record or after
/// `session_timeout` seconds, whichever comes first. When `horizon` is given,
/// no stay extends past it. Output is ordered by object, then start time.
pub fn derive_stays(d: &Dataset, session_timeout: i64, horizon: Option<i64>) -> Vec<StayInterval> {
    assert!(session_timeout > 0, "session timeout must be positive");
    let owners = d.record_objects();
    let mut per_object: Vec<Vec<usize>> = vec![Vec::new(); d.n_objects()];
    for (k, &o) in owners.iter().enumerate() {
        per_object[o].push(k);
    }
    let mut stays = Vec::with_capacity(d.records.len());
    for (object, idxs) in per_object.iter().enumerate() {
        for (pos, &k) in idxs.iter().enumerate() {
            let r = &d.records[k];
            let mut end = r.timestamp + session_timeout;
            if let Some(&next) = idxs.get(pos + 1) {
                end = end.min(d.records[next].timestamp);
            }
            if let Some(h) = horizon {
                end = end.min(h.max(r.timestamp));
            }
            stays.push(StayInterval {
                object,
                location_id: r.location_id,
                t_start: r.timestamp,
                t_end: end,
            });
        }
    }
    stays
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VisitFrequencyMatrix {
    pub counts: Grid<u32>,
}

impl VisitFrequencyMatrix {
    pub fn get(&self, object: usize, location: LocationId) -> u32 {
        self.counts[(object, location as usize - 1)]
    }
}

/// Counts records per `(object, location)` with `window.start <= t < window.end`.
pub fn build_frequency_matrix(d: &Dataset, window: TimeWindow) -> VisitFrequencyMatrix {
    let mut counts = Grid::filled(d.n_objects(), d.n_locations(), 0u32);
    for (r, o) in d.records.iter().zip(d.record_objects()) {
        if window.contains(r.timestamp) {
            counts[(o, r.location_id as usize - 1)] += 1;
        }
    }
    VisitFrequencyMatrix { counts }
}

/// Seconds spent per `(object, location)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TimeSpentMatrix {
    pub seconds: Grid<f64>,
}

impl TimeSpentMatrix {
    pub fn get(&self, object: usize, location: LocationId) -> f64 {
        self.seconds[(object, location as usize - 1)]
    }
}

pub fn build_timespent_matrix(
    stays: &[StayInterval],
    window: TimeWindow,
    n_objects: usize,
    n_locations: usize,
) -> TimeSpentMatrix {
    let mut seconds = Grid::filled(n_objects, n_locations, 0.0f64);
    for s in stays {
        let ov = window.overlap(s.t_start, s.t_end);
        if ov > 0 {
            seconds[(s.object, s.location_id as usize - 1)] += ov as f64;
        }
    }
    TimeSpentMatrix { seconds }
}

/// Per-object visited locations in time order, adjacent repeats collapsed.
/// Indexed by object.
pub fn build_sequence_vectors(d: &Dataset) -> Vec<Vec<LocationId>> {
    let mut seqs: Vec<Vec<LocationId>> = vec![Vec::new(); d.n_objects()];
    for (r, o) in d.records.iter().zip(d.record_objects()) {
        let seq = &mut seqs[o];
        if seq.last() != Some(&r.location_id) {
            seq.push(r.location_id);
        }
    }
    seqs
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TimeOrientedMatrix {
    /// Objects × bins; `0` = absent.
    pub cells: Grid<LocationId>,
    pub binning: TimeBinning,
}

impl TimeOrientedMatrix {
    pub fn n_objects(&self) -> usize {
        self.cells.rows()
    }

    pub fn n_bins(&self) -> usize {
        self.cells.cols()
    }

    pub fn row(&self, object: usize) -> &[LocationId] {
        self.cells.row(object)
    }

    pub fn max_location(&self) -> LocationId {
        self.cells.as_slice().iter().copied().max().unwrap_or(0)
    }
}

/// Fills each `(object, bin)` cell with the location of the stay that
/// overlaps the bin longest (ties: earliest stay start), or 0.
pub fn build_time_oriented_matrix(
    stays: &[StayInterval],
    binning: TimeBinning,
    n_objects: usize,
) -> TimeOrientedMatrix {
    let mut cells = Grid::filled(n_objects, binning.n_bins, 0 as LocationId);
    // best (overlap, start) seen so far per cell
    let mut best = Grid::filled(n_objects, binning.n_bins, (0i64, i64::MAX));
    for s in stays {
        if s.t_end <= s.t_start {
            continue;
        }
        let Some(first) = binning.bin_of(s.t_start.max(binning.start)) else {
            continue;
        };
        for bin in first..binning.n_bins {
            let b0 = binning.bin_start(bin);
            if b0 >= s.t_end {
                break;
            }
            let ov = s.t_end.min(b0 + binning.bin_seconds) - s.t_start.max(b0);
            if ov <= 0 {
                continue;
            }
            let cur = best[(s.object, bin)];
            if ov > cur.0 || (ov == cur.0 && s.t_start < cur.1) {
                best[(s.object, bin)] = (ov, s.t_start);
                cells[(s.object, bin)] = s.location_id;
            }
        }
    }
    TimeOrientedMatrix { cells, binning }
}

/// Supervised pairs from one time-oriented column split.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SupervisedSplit {
    /// `N × target_bin` history ids.
    pub features: Grid<LocationId>,
    /// Location id at `target_bin` per object.
    pub labels: Vec<LocationId>,
}

/// Columns `[0, target_bin)` become features, column `target_bin` the label.
pub fn decompose_supervised(
    tom: &TimeOrientedMatrix,
    target_bin: usize,
) -> Result<SupervisedSplit, MatrixError> {
    let t = tom.n_bins();
    if target_bin < 1 || target_bin >= t {
        return Err(MatrixError::BinOutOfRange {
            bin: target_bin,
            n_bins: t,
        });
    }
    let rows: Vec<Vec<LocationId>> = (0..tom.n_objects())
        .map(|i| tom.row(i)[..target_bin].to_vec())
        .collect();
    Ok(SupervisedSplit {
        features: Grid::from_rows(rows, target_bin),
        labels: tom.cells.column(target_bin),
    })
}

/// JSON envelope shared by all matrix outputs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MatrixEnvelope<T> {
    pub kind: String,
    pub shape: (usize, usize),
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub binning: Option<TimeBinning>,
    pub row_labels: Vec<String>,
    pub col_labels: Vec<String>,
    pub data: Vec<Vec<T>>,
}

impl<T: Clone + ToString> MatrixEnvelope<T> {
    pub fn new(
        kind: &str,
        grid: &Grid<T>,
        binning: Option<TimeBinning>,
        row_labels: Vec<String>,
        col_labels: Vec<String>,
    ) -> Self {
        Self {
            kind: kind.to_string(),
            shape: grid.shape(),
            binning,
            row_labels,
            col_labels,
            data: (0..grid.rows()).map(|r| grid.row_vec(r)).collect(),
        }
    }

    /// Row-per-object CSV with a label header.
    pub fn to_csv(&self) -> String {
        let mut wtr = csv::Writer::from_writer(Vec::new());
        let header: Vec<&str> = std::iter::once("object")
            .chain(self.col_labels.iter().map(String::as_str))
            .collect();
        wtr.write_record(&header).expect("in-memory write");
        for (label, row) in self.row_labels.iter().zip(&self.data) {
            let fields: Vec<String> = std::iter::once(label.clone())
                .chain(row.iter().map(ToString::to_string))
                .collect();
            wtr.write_record(&fields).expect("in-memory write");
        }
        String::from_utf8(wtr.into_inner().expect("flush")).expect("utf8")
    }
}

/// Sequence vectors as a two-column CSV: `object,sequence` with ids joined by `;`.
pub fn sequences_to_csv(seqs: &[Vec<LocationId>], object_labels: &[String]) -> String {
    let mut wtr = csv::Writer::from_writer(Vec::new());
    wtr.write_record(["object", "sequence"]).expect("in-memory write");
    for (label, seq) in object_labels.iter().zip(seqs) {
        let joined = seq
            .iter()
            .map(ToString::to_string)
            .collect::<Vec<_>>()
            .join(";");
        wtr.write_record([label.as_str(), &joined]).expect("in-memory write");
    }
    String::from_utf8(wtr.into_inner().expect("flush")).expect("utf8")
}
