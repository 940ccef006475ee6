//! CSV readers for the supported record layouts and the canonical writer.

use std::collections::BTreeMap;
use std::io::Read;
use std::str::FromStr;

use chrono::{DateTime, NaiveDateTime};
use serde::{Deserialize, Serialize};

use super::{CheckInRecord, Dataset, IngestError, LocationTree};

/// Input layouts. Column order is fixed per layout and a header row is
/// always expected.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RecordFormat {
    /// `timestamp,object_id,object_type,location`
    Canonical,
    /// `userId,TimeStamp,Station,position,IP`
    Mobile,
    /// `Timestamp,car-id,car-type,gate-name`
    Vast,
}

impl RecordFormat {
    fn columns(self) -> usize {
        match self {
            RecordFormat::Canonical | RecordFormat::Vast => 4,
            RecordFormat::Mobile => 5,
        }
    }

    fn discovery_category(self, name: &str) -> String {
        match self {
            RecordFormat::Canonical => "location".to_string(),
            RecordFormat::Mobile => "station".to_string(),
            RecordFormat::Vast => {
                let stem = name.trim_end_matches(|c: char| c.is_ascii_digit());
                if stem.is_empty() { name } else { stem }.to_string()
            }
        }
    }
}

impl FromStr for RecordFormat {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "canonical" => Ok(RecordFormat::Canonical),
            "mobile" => Ok(RecordFormat::Mobile),
            "vast" => Ok(RecordFormat::Vast),
            other => Err(format!("unknown record format `{other}`")),
        }
    }
}

const NAIVE_FORMATS: &[&str] = &[
    "%Y-%m-%d %H:%M:%S%.f",
    "%Y-%m-%dT%H:%M:%S%.f",
    "%Y-%m-%d %H:%M",
    "%Y-%m-%dT%H:%M",
];

/// Parses integer/decimal epoch seconds or an ISO-8601 date-time (naive
/// values are taken as UTC). Sub-second precision is truncated; instants
/// before the epoch are rejected.
pub fn parse_timestamp(s: &str) -> Option<i64> {
    let s = s.trim();
    if s.is_empty() {
        return None;
    }
    let secs = if let Ok(v) = s.parse::<i64>() {
        v
    } else if s.bytes().all(|b| b.is_ascii_digit() || b == b'.') {
        let v: f64 = s.parse().ok()?;
        if !v.is_finite() {
            return None;
        }
        v.trunc() as i64
    } else if let Ok(dt) = DateTime::parse_from_rfc3339(s) {
        dt.timestamp()
    } else {
        NAIVE_FORMATS
            .iter()
            .find_map(|f| NaiveDateTime::parse_from_str(s, f).ok())?
            .and_utc()
            .timestamp()
    };
    (secs >= 0).then_some(secs)
}

struct RawRow {
    timestamp: i64,
    object_id: String,
    object_type: Option<String>,
    location: String,
    attributes: BTreeMap<String, String>,
}

/// Parses a headered CSV stream into a sorted [`Dataset`].
///
/// With `locations = None` unknown names are registered on the fly, in the
/// order they first occur after sorting. With a fixed tree every name must
/// already exist.
pub fn parse_records<R: Read>(
    format: RecordFormat,
    reader: R,
    locations: Option<&LocationTree>,
) -> Result<Dataset, IngestError> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(reader);
    let mut rows = Vec::new();
    let mut record = csv::StringRecord::new();
    loop {
        match rdr.read_record(&mut record) {
            Ok(false) => break,
            Ok(true) => {}
            Err(e) => return Err(IngestError::Csv(e.to_string())),
        }
        let line = record.position().map(|p| p.line() as usize).unwrap_or(0);
        if record.len() != format.columns() {
            return Err(IngestError::MalformedLine(line));
        }
        rows.push(read_row(format, &record, line)?);
    }

    rows.sort_by(|a, b| {
        a.timestamp
            .cmp(&b.timestamp)
            .then_with(|| a.object_id.cmp(&b.object_id))
    });

    let mut tree = locations.cloned().unwrap_or_default();
    let mut records = Vec::with_capacity(rows.len());
    for row in rows {
        let location_id = match locations {
            Some(fixed) => fixed
                .id_of(&row.location)
                .ok_or_else(|| IngestError::UnknownLocation(row.location.clone()))?,
            None => tree.register(&row.location, &format.discovery_category(&row.location)),
        };
        records.push(CheckInRecord {
            timestamp: row.timestamp,
            object_id: row.object_id,
            object_type: row.object_type,
            location_id,
            raw_location: row.location,
            attributes: row.attributes,
        });
    }
    Ok(Dataset::new(records, tree))
}

fn read_row(format: RecordFormat, rec: &csv::StringRecord, line: usize) -> Result<RawRow, IngestError> {
    let ts = |s: &str| parse_timestamp(s).ok_or(IngestError::BadTimestamp(line));
    let non_empty = |s: &str| (!s.is_empty()).then(|| s.to_string());
    let row = match format {
        RecordFormat::Canonical => RawRow {
            timestamp: ts(&rec[0])?,
            object_id: rec[1].to_string(),
            object_type: non_empty(&rec[2]),
            location: rec[3].to_string(),
            attributes: BTreeMap::new(),
        },
        RecordFormat::Mobile => RawRow {
            timestamp: ts(&rec[1])?,
            object_id: rec[0].to_string(),
            object_type: None,
            location: rec[2].to_string(),
            attributes: BTreeMap::from([
                ("position".to_string(), rec[3].to_string()),
                ("ip".to_string(), rec[4].to_string()),
            ]),
        },
        RecordFormat::Vast => RawRow {
            timestamp: ts(&rec[0])?,
            object_id: rec[1].to_string(),
            object_type: non_empty(&rec[2]),
            location: rec[3].to_string(),
            attributes: BTreeMap::new(),
        },
    };
    if row.object_id.is_empty() || row.location.is_empty() {
        return Err(IngestError::MalformedLine(line));
    }
    Ok(row)
}

/// Serializes records as canonical CSV with integer-second timestamps.
pub fn to_canonical_csv(d: &Dataset) -> String {
    let mut wtr = csv::Writer::from_writer(Vec::new());
    wtr.write_record(["timestamp", "object_id", "object_type", "location"])
        .expect("in-memory write");
    for r in &d.records {
        wtr.write_record([
            r.timestamp.to_string().as_str(),
            &r.object_id,
            r.object_type.as_deref().unwrap_or(""),
            &r.raw_location,
        ])
        .expect("in-memory write");
    }
    String::from_utf8(wtr.into_inner().expect("flush")).expect("utf8")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ingest::{validate_dataset, LocationSpec};
    use proptest::prelude::*;

    #[test]
    fn vast_line() {
        let text = "Timestamp,car-id,car-type,gate-name\n2015-05-01 00:43:28,20154301124328-262,4,entrance3\n";
        let d = parse_records(RecordFormat::Vast, text.as_bytes(), None).unwrap();
        assert_eq!(d.records.len(), 1);
        let r = &d.records[0];
        assert_eq!(r.object_id, "20154301124328-262");
        assert_eq!(r.object_type.as_deref(), Some("4"));
        assert_eq!(r.raw_location, "entrance3");
        assert_eq!(r.timestamp, 1_430_441_008);
        assert_eq!(d.locations.get(r.location_id).unwrap().category, "entrance");
    }

    #[test]
    fn empty_body() {
        let d = parse_records(RecordFormat::Canonical, "timestamp,object_id,object_type,location\n".as_bytes(), None)
            .unwrap();
        assert!(d.records.is_empty());
        assert_eq!(d.n_objects(), 0);
    }

    #[test]
    fn unsorted_lines_are_sorted() {
        let text = "timestamp,object_id,object_type,location\n100,u1,,a\n50,u1,,b\n";
        let d = parse_records(RecordFormat::Canonical, text.as_bytes(), None).unwrap();
        let times: Vec<_> = d.records.iter().map(|r| r.timestamp).collect();
        assert_eq!(times, vec![50, 100]);
        // discovery ids follow sorted order
        assert_eq!(d.locations.id_of("b"), Some(1));
        assert!(validate_dataset(&d).is_empty());
    }

    #[test]
    fn mobile_keeps_side_fields() {
        let text = "userId,TimeStamp,Station,position,IP\nu7,2015-05-14T17:02:00,S12,\"31.2,121.4\",10.0.0.1\n";
        let d = parse_records(RecordFormat::Mobile, text.as_bytes(), None).unwrap();
        let r = &d.records[0];
        assert_eq!(r.object_id, "u7");
        assert_eq!(r.raw_location, "S12");
        assert_eq!(r.attributes["ip"], "10.0.0.1");
        assert_eq!(r.attributes["position"], "31.2,121.4");
    }

    #[test]
    fn errors_carry_line_numbers() {
        let bad_cols = "timestamp,object_id,object_type,location\n1,a,,x\n2,a,x\n";
        assert_eq!(
            parse_records(RecordFormat::Canonical, bad_cols.as_bytes(), None),
            Err(IngestError::MalformedLine(3))
        );
        let bad_time = "timestamp,object_id,object_type,location\nyesterday,a,,x\n";
        assert_eq!(
            parse_records(RecordFormat::Canonical, bad_time.as_bytes(), None),
            Err(IngestError::BadTimestamp(2))
        );
        let tree = LocationTree::build(&[LocationSpec::root("x", "gate")]).unwrap();
        let unknown = "timestamp,object_id,object_type,location\n1,a,,y\n";
        assert_eq!(
            parse_records(RecordFormat::Canonical, unknown.as_bytes(), Some(&tree)),
            Err(IngestError::UnknownLocation("y".into()))
        );
    }

    #[test]
    fn timestamp_forms() {
        assert_eq!(parse_timestamp("0"), Some(0));
        assert_eq!(parse_timestamp("12.9"), Some(12));
        assert_eq!(parse_timestamp("1970-01-01 00:01:00"), Some(60));
        assert_eq!(parse_timestamp("1970-01-01T00:01:00.75"), Some(60));
        assert_eq!(parse_timestamp("1970-01-01T01:00:00+01:00"), Some(0));
        assert_eq!(parse_timestamp("-5"), None);
        assert_eq!(parse_timestamp("1969-12-31 23:59:59"), None);
        assert_eq!(parse_timestamp(""), None);
    }

    fn canonical_rows() -> impl Strategy<Value = Vec<(i64, u8, Option<u8>, u8)>> {
        prop::collection::vec((0i64..5000, 0u8..6, prop::option::of(0u8..3), 0u8..8), 0..40)
    }

    proptest! {
        #[test]
        fn canonical_round_trip(rows in canonical_rows()) {
            let mut text = String::from("timestamp,object_id,object_type,location\n");
            for (t, o, ty, l) in &rows {
                let ty = ty.map(|v| format!("type{v}")).unwrap_or_default();
                text.push_str(&format!("{t},obj{o},{ty},loc{l}\n"));
            }
            let d = parse_records(RecordFormat::Canonical, text.as_bytes(), None).unwrap();
            prop_assert_eq!(d.records.len(), rows.len());
            prop_assert!(validate_dataset(&d).is_empty());
            let again = parse_records(RecordFormat::Canonical, to_canonical_csv(&d).as_bytes(), None).unwrap();
            prop_assert_eq!(&again, &d);
            let fixed = parse_records(RecordFormat::Canonical, to_canonical_csv(&d).as_bytes(), Some(&d.locations)).unwrap();
            prop_assert_eq!(&fixed, &d);
        }

        #[test]
        fn record_count_preserved_for_all_formats(n in 0usize..30, seed in 0u64..1000) {
            let mut vast = String::from("Timestamp,car-id,car-type,gate-name\n");
            let mut mobile = String::from("userId,TimeStamp,Station,position,IP\n");
            for i in 0..n {
                let t = 1_430_438_400 + ((i as u64 * 7919 + seed) % 86_400) as i64;
                let dt = chrono::DateTime::from_timestamp(t, 0).unwrap().format("%Y-%m-%d %H:%M:%S");
                vast.push_str(&format!("{dt},car{},{},gate{}\n", i % 4, i % 3, i % 5));
                mobile.push_str(&format!("u{},{t},S{},pos,10.0.0.{}\n", i % 4, i % 5, i % 200));
            }
            prop_assert_eq!(parse_records(RecordFormat::Vast, vast.as_bytes(), None).unwrap().records.len(), n);
            prop_assert_eq!(parse_records(RecordFormat::Mobile, mobile.as_bytes(), None).unwrap().records.len(), n);
        }
    }
}
