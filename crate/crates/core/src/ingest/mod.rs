//! Record ingestion: check-in records, the location registry and datasets.

mod parse;
mod tree;

use std::collections::{BTreeMap, HashMap};
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use parse::{parse_records, parse_timestamp, to_canonical_csv, RecordFormat};
pub use tree::{LocationId, LocationNode, LocationSpec, LocationTree};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum IngestError {
    #[error("malformed line {0}: wrong column count")]
    MalformedLine(usize),
    #[error("bad timestamp on line {0}")]
    BadTimestamp(usize),
    #[error("unknown location `{0}`")]
    UnknownLocation(String),
    #[error("duplicate location name `{0}`")]
    DuplicateName(String),
    #[error("unknown parent location `{0}`")]
    UnknownParent(String),
    #[error("location hierarchy contains a cycle through `{0}`")]
    CycleDetected(String),
    #[error("input is not valid UTF-8 CSV: {0}")]
    Csv(String),
}

/// One timestamped observation of an object at a location.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CheckInRecord {
    /// Seconds since the Unix epoch, UTC.
    pub timestamp: i64,
    pub object_id: String,
    pub object_type: Option<String>,
    pub location_id: LocationId,
    pub raw_location: String,
    /// Format-specific side fields that downstream stages ignore
    /// (mobile `position` and `IP`).
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub attributes: BTreeMap<String, String>,
}

impl CheckInRecord {
    pub fn new(timestamp: i64, object_id: &str, location_id: LocationId, raw_location: &str) -> Self {
        Self {
            timestamp,
            object_id: object_id.to_string(),
            object_type: None,
            location_id,
            raw_location: raw_location.to_string(),
            attributes: BTreeMap::new(),
        }
    }
}

/// Dense object registry: `object_id → 0..N-1`.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ObjectRegistry {
    ids: Vec<String>,
    index: HashMap<String, usize>,
}

impl ObjectRegistry {
    pub fn register(&mut self, id: &str) -> usize {
        if let Some(&i) = self.index.get(id) {
            return i;
        }
        self.ids.push(id.to_string());
        self.index.insert(id.to_string(), self.ids.len() - 1);
        self.ids.len() - 1
    }

    pub fn index_of(&self, id: &str) -> Option<usize> {
        self.index.get(id).copied()
    }

    pub fn id(&self, index: usize) -> &str {
        &self.ids[index]
    }

    pub fn ids(&self) -> &[String] {
        &self.ids
    }

    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub records: Vec<CheckInRecord>,
    pub locations: LocationTree,
    pub objects: ObjectRegistry,
}

impl Dataset {
    /// Sorts records by `(timestamp, object_id)` (stable) and registers
    /// objects in order of first appearance.
    pub fn new(mut records: Vec<CheckInRecord>, locations: LocationTree) -> Self {
        records.sort_by(|a, b| {
            a.timestamp
                .cmp(&b.timestamp)
                .then_with(|| a.object_id.cmp(&b.object_id))
        });
        let mut objects = ObjectRegistry::default();
        for r in &records {
            objects.register(&r.object_id);
        }
        Self {
            records,
            locations,
            objects,
        }
    }

    pub fn n_objects(&self) -> usize {
        self.objects.len()
    }

    pub fn n_locations(&self) -> usize {
        self.locations.len()
    }

    /// Object index of every record, aligned with `records`.
    pub fn record_objects(&self) -> Vec<usize> {
        self.records
            .iter()
            .map(|r| {
                self.objects
                    .index_of(&r.object_id)
                    .expect("dataset registers every record's object")
            })
            .collect()
    }

    /// Earliest and latest record timestamps, if any.
    pub fn time_span(&self) -> Option<(i64, i64)> {
        Some((self.records.first()?.timestamp, self.records.last()?.timestamp))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(tag = "rule", rename_all = "snake_case")]
pub enum Violation {
    NegativeTimestamp { index: usize },
    ReservedLocation { index: usize },
    UnknownLocation { index: usize },
    NotSorted { index: usize },
    UnregisteredObject { index: usize },
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::NegativeTimestamp { index } => write!(f, "NegativeTimestamp@{index}"),
            Violation::ReservedLocation { index } => write!(f, "ReservedLocation@{index}"),
            Violation::UnknownLocation { index } => write!(f, "UnknownLocation@{index}"),
            Violation::NotSorted { index } => write!(f, "NotSorted@{index}"),
            Violation::UnregisteredObject { index } => write!(f, "UnregisteredObject@{index}"),
        }
    }
}

/// Lists every record-level invariant violation. Empty means the dataset is
/// well formed.
pub fn validate_dataset(d: &Dataset) -> Vec<Violation> {
    let mut out = Vec::new();
    for (index, r) in d.records.iter().enumerate() {
        if r.timestamp < 0 {
            out.push(Violation::NegativeTimestamp { index });
        }
        if r.location_id == 0 {
            out.push(Violation::ReservedLocation { index });
        } else if !d.locations.contains(r.location_id) {
            out.push(Violation::UnknownLocation { index });
        }
        if index > 0 {
            let prev = &d.records[index - 1];
            if (prev.timestamp, &prev.object_id) > (r.timestamp, &r.object_id) {
                out.push(Violation::NotSorted { index });
            }
        }
        if d.objects.index_of(&r.object_id).is_none() {
            out.push(Violation::UnregisteredObject { index });
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tree(n: usize) -> LocationTree {
        let spec: Vec<_> = (1..=n)
            .map(|i| LocationSpec::root(&format!("l{i}"), "loc"))
            .collect();
        LocationTree::build(&spec).unwrap()
    }

    #[test]
    fn sorted_dataset_has_no_violations() {
        let d = Dataset::new(
            vec![
                CheckInRecord::new(30, "b", 1, "l1"),
                CheckInRecord::new(10, "a", 2, "l2"),
                CheckInRecord::new(20, "a", 3, "l3"),
            ],
            tree(3),
        );
        assert!(validate_dataset(&d).is_empty());
        assert_eq!(d.objects.ids(), &["a".to_string(), "b".to_string()]);
    }

    #[test]
    fn unknown_location_flagged() {
        let mut d = Dataset::new(vec![CheckInRecord::new(0, "a", 1, "l1")], tree(5));
        d.records[0].location_id = 99;
        assert_eq!(validate_dataset(&d), vec![Violation::UnknownLocation { index: 0 }]);
        assert_eq!(validate_dataset(&d)[0].to_string(), "UnknownLocation@0");
    }

    #[test]
    fn out_of_order_flagged() {
        let mut d = Dataset::new(
            vec![
                CheckInRecord::new(10, "a", 1, "l1"),
                CheckInRecord::new(20, "a", 1, "l1"),
            ],
            tree(1),
        );
        d.records.swap(0, 1);
        assert_eq!(validate_dataset(&d), vec![Violation::NotSorted { index: 1 }]);
    }

    #[test]
    fn reserved_and_negative_flagged() {
        let mut d = Dataset::new(vec![CheckInRecord::new(5, "a", 1, "l1")], tree(1));
        d.records[0].timestamp = -1;
        d.records[0].location_id = 0;
        assert_eq!(
            validate_dataset(&d),
            vec![
                Violation::NegativeTimestamp { index: 0 },
                Violation::ReservedLocation { index: 0 }
            ]
        );
    }
}
