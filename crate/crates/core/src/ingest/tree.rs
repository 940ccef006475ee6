//! Hierarchical stay-point registry.
//!
//! Every location gets a dense id `1..=L` in declaration order; id 0 is
//! reserved for "absent" throughout the crate. A location may name a parent,
//! which makes it a sub-stay-point of that parent.

use std::collections::HashMap;
use std::io::Read;

use serde::{Deserialize, Serialize};

use super::IngestError;

/// Dense location identifier. `0` never names a location.
pub type LocationId = u32;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LocationNode {
    pub id: LocationId,
    pub name: String,
    pub category: String,
    pub parent: Option<LocationId>,
    pub coords: Option<(f64, f64)>,
}

/// One row of a tree description, before ids are assigned.
#[derive(Debug, Clone, PartialEq)]
pub struct LocationSpec {
    pub name: String,
    pub category: String,
    pub parent: Option<String>,
    pub coords: Option<(f64, f64)>,
}

impl LocationSpec {
    pub fn root(name: &str, category: &str) -> Self {
        Self {
            name: name.to_string(),
            category: category.to_string(),
            parent: None,
            coords: None,
        }
    }

    pub fn child(name: &str, category: &str, parent: &str) -> Self {
        Self {
            parent: Some(parent.to_string()),
            ..Self::root(name, category)
        }
    }

    pub fn at(mut self, x: f64, y: f64) -> Self {
        self.coords = Some((x, y));
        self
    }
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(from = "Vec<LocationNode>", into = "Vec<LocationNode>")]
pub struct LocationTree {
    nodes: Vec<LocationNode>,
    by_name: HashMap<String, LocationId>,
}

impl PartialEq for LocationTree {
    fn eq(&self, other: &Self) -> bool {
        self.nodes == other.nodes
    }
}

impl From<Vec<LocationNode>> for LocationTree {
    fn from(nodes: Vec<LocationNode>) -> Self {
        let by_name = nodes.iter().map(|n| (n.name.clone(), n.id)).collect();
        Self { nodes, by_name }
    }
}

impl From<LocationTree> for Vec<LocationNode> {
    fn from(t: LocationTree) -> Self {
        t.nodes
    }
}

impl LocationTree {
    pub fn new() -> Self {
        Self::default()
    }

    /// Assigns dense ids in spec order and resolves parent links.
    ///
    /// Parents may be declared after their children; the parent graph is then
    /// checked for cycles.
    pub fn build(spec: &[LocationSpec]) -> Result<Self, IngestError> {
        let mut by_name = HashMap::with_capacity(spec.len());
        for (i, s) in spec.iter().enumerate() {
            if by_name.insert(s.name.clone(), (i + 1) as LocationId).is_some() {
                return Err(IngestError::DuplicateName(s.name.clone()));
            }
        }
        let mut nodes = Vec::with_capacity(spec.len());
        for (i, s) in spec.iter().enumerate() {
            let parent = match &s.parent {
                None => None,
                Some(p) => Some(
                    *by_name
                        .get(p)
                        .ok_or_else(|| IngestError::UnknownParent(p.clone()))?,
                ),
            };
            nodes.push(LocationNode {
                id: (i + 1) as LocationId,
                name: s.name.clone(),
                category: s.category.clone(),
                parent,
                coords: s.coords,
            });
        }
        let tree = Self { nodes, by_name };
        for node in &tree.nodes {
            tree.ancestors(node.id)?;
        }
        Ok(tree)
    }

    /// Reads a `name,category,parent,x,y` CSV (empty parent marks a root,
    /// empty x/y means no coordinates).
    pub fn from_csv<R: Read>(reader: R) -> Result<Self, IngestError> {
        let mut rdr = csv::ReaderBuilder::new()
            .flexible(true)
            .trim(csv::Trim::All)
            .from_reader(reader);
        let mut spec = Vec::new();
        for (i, row) in rdr.records().enumerate() {
            let line = i + 2;
            let row = row.map_err(|_| IngestError::MalformedLine(line))?;
            if row.len() != 5 {
                return Err(IngestError::MalformedLine(line));
            }
            let parent = (!row[2].is_empty()).then(|| row[2].to_string());
            let coords = match (row[3].is_empty(), row[4].is_empty()) {
                (true, true) => None,
                (false, false) => {
                    let x = row[3].parse().map_err(|_| IngestError::MalformedLine(line))?;
                    let y = row[4].parse().map_err(|_| IngestError::MalformedLine(line))?;
                    Some((x, y))
                }
                _ => return Err(IngestError::MalformedLine(line)),
            };
            spec.push(LocationSpec {
                name: row[0].to_string(),
                category: row[1].to_string(),
                parent,
                coords,
            });
        }
        Self::build(&spec)
    }

    pub fn to_csv(&self) -> String {
        let mut wtr = csv::Writer::from_writer(Vec::new());
        wtr.write_record(["name", "category", "parent", "x", "y"])
            .expect("in-memory write");
        for n in &self.nodes {
            let parent = n
                .parent
                .map(|p| self.nodes[p as usize - 1].name.clone())
                .unwrap_or_default();
            let (x, y) = n
                .coords
                .map(|(x, y)| (x.to_string(), y.to_string()))
                .unwrap_or_default();
            wtr.write_record([n.name.as_str(), &n.category, &parent, &x, &y])
                .expect("in-memory write");
        }
        String::from_utf8(wtr.into_inner().expect("flush")).expect("utf8")
    }

    /// Number of locations `L`.
    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn nodes(&self) -> &[LocationNode] {
        &self.nodes
    }

    pub fn get(&self, id: LocationId) -> Option<&LocationNode> {
        if id == 0 {
            return None;
        }
        self.nodes.get(id as usize - 1)
    }

    pub fn id_of(&self, name: &str) -> Option<LocationId> {
        self.by_name.get(name).copied()
    }

    pub fn contains(&self, id: LocationId) -> bool {
        id >= 1 && (id as usize) <= self.nodes.len()
    }

    /// Appends a root location and returns its id (discovery mode).
    pub fn register(&mut self, name: &str, category: &str) -> LocationId {
        if let Some(id) = self.id_of(name) {
            return id;
        }
        let id = (self.nodes.len() + 1) as LocationId;
        self.nodes.push(LocationNode {
            id,
            name: name.to_string(),
            category: category.to_string(),
            parent: None,
            coords: None,
        });
        self.by_name.insert(name.to_string(), id);
        id
    }

    /// Parent chain from `id` (exclusive) up to its root.
    pub fn ancestors(&self, id: LocationId) -> Result<Vec<LocationId>, IngestError> {
        let mut chain = Vec::new();
        let mut cur = self.get(id).and_then(|n| n.parent);
        while let Some(p) = cur {
            if p == id || chain.contains(&p) || chain.len() > self.nodes.len() {
                let name = self.get(id).map(|n| n.name.clone()).unwrap_or_default();
                return Err(IngestError::CycleDetected(name));
            }
            chain.push(p);
            cur = self.get(p).and_then(|n| n.parent);
        }
        Ok(chain)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn two_node_tree() {
        let t = LocationTree::build(&[
            LocationSpec::root("park", "area"),
            LocationSpec::child("gate1", "gate", "park"),
        ])
        .unwrap();
        assert_eq!(t.id_of("park"), Some(1));
        assert_eq!(t.id_of("gate1"), Some(2));
        assert_eq!(t.get(2).unwrap().parent, Some(1));
    }

    #[test]
    fn empty_spec_gives_empty_tree() {
        let t = LocationTree::build(&[]).unwrap();
        assert_eq!(t.len(), 0);
        assert!(t.is_empty());
    }

    #[test]
    fn three_levels_reach_a_root_within_two_hops() {
        let spec = vec![
            LocationSpec::root("preserve", "area"),
            LocationSpec::child("north", "zone", "preserve"),
            LocationSpec::child("south", "zone", "preserve"),
            LocationSpec::child("gate1", "gate", "north"),
            LocationSpec::child("gate2", "gate", "north"),
            LocationSpec::child("camp1", "camping", "south"),
            LocationSpec::child("camp2", "camping", "south"),
        ];
        let t = LocationTree::build(&spec).unwrap();
        for leaf in ["gate1", "gate2", "camp1", "camp2"] {
            // walk parents by hand, independent of `ancestors`
            let mut id = t.id_of(leaf).unwrap();
            let mut hops = 0;
            while let Some(p) = t.get(id).unwrap().parent {
                id = p;
                hops += 1;
            }
            assert!(hops <= 2);
            assert!(t.get(id).unwrap().parent.is_none());
            assert_eq!(t.ancestors(t.id_of(leaf).unwrap()).unwrap().len(), hops);
        }
    }

    #[test]
    fn duplicate_and_unknown_parent_rejected() {
        let dup = LocationTree::build(&[
            LocationSpec::root("a", "x"),
            LocationSpec::root("a", "x"),
        ]);
        assert!(matches!(dup, Err(IngestError::DuplicateName(n)) if n == "a"));
        let orphan = LocationTree::build(&[LocationSpec::child("a", "x", "nowhere")]);
        assert!(matches!(orphan, Err(IngestError::UnknownParent(n)) if n == "nowhere"));
    }

    #[test]
    fn cycles_rejected() {
        let selfloop = LocationTree::build(&[LocationSpec::child("a", "x", "a")]);
        assert!(matches!(selfloop, Err(IngestError::CycleDetected(_))));
        let pair = LocationTree::build(&[
            LocationSpec::child("a", "x", "b"),
            LocationSpec::child("b", "x", "a"),
        ]);
        assert!(matches!(pair, Err(IngestError::CycleDetected(_))));
    }

    #[test]
    fn ids_are_deterministic_and_csv_round_trips() {
        let spec = vec![
            LocationSpec::root("park", "area").at(0.0, 0.0),
            LocationSpec::child("gate1", "gate", "park").at(1.5, -2.0),
            LocationSpec::root("camp", "camping"),
        ];
        let a = LocationTree::build(&spec).unwrap();
        let b = LocationTree::build(&spec).unwrap();
        assert_eq!(a, b);
        let back = LocationTree::from_csv(a.to_csv().as_bytes()).unwrap();
        assert_eq!(a.nodes(), back.nodes());
    }
}
