//! Seeded synthetic populations with ground truth.
//!
//! Three kinds of movers share one location set:
//! - regular objects walk an order-1 Markov chain over `0..=L` (0 = absent),
//!   one step per bin, checking in at the start of every present bin;
//! - outstanding objects camp at a private favourite location for long
//!   blocks on most days and check in several times per bin;
//! - route objects (carved out of the regular budget) stay away all day
//!   except for an origin visit right before the evening bin and a
//!   destination visit in it.
//!
//! Time-oriented matrices built with [`SynthConfig::binning`] and a session
//! timeout of one bin reproduce the generated states exactly.

use std::fmt::Write as _;
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::grid::Grid;
use crate::ingest::{CheckInRecord, Dataset, LocationId, LocationSpec, LocationTree};
use crate::matrices::{build_time_oriented_matrix, derive_stays, TimeBinning, TimeOrientedMatrix};

const DAY: i64 = 86_400;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SynthError {
    #[error("invalid synth config: {0}")]
    InvalidConfig(String),
    #[error("config line {line}: {msg}")]
    Parse { line: usize, msg: String },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OutstandingProfile {
    /// Camping block length relative to the mean regular dwell.
    pub dwell_multiplier: f64,
    /// Check-ins per present bin.
    pub frequency_multiplier: f64,
    /// Days (from the first) on which the profile applies; other days are regular.
    pub active_days: usize,
}

impl Default for OutstandingProfile {
    fn default() -> Self {
        Self {
            dwell_multiplier: 6.0,
            frequency_multiplier: 3.0,
            active_days: 9,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PlantedRoute {
    pub origin: LocationId,
    pub destination: LocationId,
    /// Fraction of the regular budget following this route.
    pub share: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthConfig {
    pub n_regular: usize,
    pub n_outstanding: usize,
    pub n_locations: usize,
    pub days: usize,
    pub bin_seconds: i64,
    /// Unix time of the first bin; should sit on a day boundary.
    pub start: i64,
    /// `(L+1) × (L+1)` row-stochastic, state 0 = absent.
    pub markov: Grid<f64>,
    pub outstanding: OutstandingProfile,
    pub routes: Vec<PlantedRoute>,
    /// Bin of the day in which route objects reach their destination.
    pub evening_bin: usize,
    /// Bins spent at the origin right before `evening_bin`.
    pub route_lead_bins: usize,
    pub seed: u64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        Self {
            n_regular: 196,
            n_outstanding: 4,
            n_locations: 12,
            days: 10,
            bin_seconds: 3600,
            start: 1_430_438_400,
            markov: structured_markov(12, 0.5, 0.3),
            outstanding: OutstandingProfile::default(),
            routes: vec![
                PlantedRoute { origin: 1, destination: 7, share: 0.1 },
                PlantedRoute { origin: 3, destination: 10, share: 0.1 },
                PlantedRoute { origin: 5, destination: 12, share: 0.1 },
                PlantedRoute { origin: 8, destination: 2, share: 0.1 },
            ],
            evening_bin: 19,
            route_lead_bins: 2,
            seed: 0,
        }
    }
}

/// Chain over `0..=L`: a present object stays with `self_p`, moves to the
/// next location (cyclically over `1..=L`) with `next_p` and leaves with
/// the rest; an absent object stays away with `self_p` and otherwise
/// returns to a uniformly chosen location.
pub fn structured_markov(n_locations: usize, self_p: f64, next_p: f64) -> Grid<f64> {
    let l = n_locations;
    let mut m = Grid::filled(l + 1, l + 1, 0.0);
    if l == 0 {
        m[(0, 0)] = 1.0;
        return m;
    }
    m[(0, 0)] = self_p;
    for t in 1..=l {
        m[(0, t)] = (1.0 - self_p) / l as f64;
    }
    for s in 1..=l {
        let next = s % l + 1;
        m[(s, s)] += self_p;
        m[(s, next)] += next_p;
        m[(s, 0)] = 1.0 - self_p - next_p;
    }
    m
}

impl SynthConfig {
    pub fn bins_per_day(&self) -> usize {
        (DAY / self.bin_seconds) as usize
    }

    pub fn n_bins(&self) -> usize {
        self.days * self.bins_per_day()
    }

    pub fn binning(&self) -> TimeBinning {
        TimeBinning::new(self.start, self.bin_seconds, self.n_bins()).expect("validated config")
    }

    /// Number of objects on each planted route.
    pub fn route_sizes(&self) -> Vec<usize> {
        self.routes
            .iter()
            .map(|r| (r.share * self.n_regular as f64).round() as usize)
            .collect()
    }

    pub fn validate(&self) -> Result<(), SynthError> {
        let bad = |m: String| Err(SynthError::InvalidConfig(m));
        if self.n_locations == 0 {
            return bad("n_locations must be positive".into());
        }
        if self.bin_seconds <= 0 || DAY % self.bin_seconds != 0 {
            return bad(format!("bin_seconds {} must divide a day", self.bin_seconds));
        }
        if self.start < 0 {
            return bad("start must be non-negative".into());
        }
        let c = self.n_locations + 1;
        if self.markov.shape() != (c, c) {
            return bad(format!(
                "markov is {:?}, expected {c}x{c} for {} locations",
                self.markov.shape(),
                self.n_locations
            ));
        }
        for s in 0..c {
            let row = self.markov.row(s);
            if row.iter().any(|p| !p.is_finite() || *p < 0.0) {
                return bad(format!("markov row {s} has a negative or non-finite entry"));
            }
            let sum: f64 = row.iter().sum();
            if (sum - 1.0).abs() > 1e-9 {
                return bad(format!("markov row {s} sums to {sum}"));
            }
        }
        let p = &self.outstanding;
        if !(p.dwell_multiplier > 0.0 && p.frequency_multiplier > 0.0) {
            return bad("outstanding multipliers must be positive".into());
        }
        if self.n_outstanding > 0 && p.active_days > self.days {
            return bad(format!("active_days {} exceeds days {}", p.active_days, self.days));
        }
        let total_share: f64 = self.routes.iter().map(|r| r.share).sum();
        if self.routes.iter().any(|r| r.share < 0.0) || total_share > 1.0 + 1e-9 {
            return bad(format!("route shares must be non-negative and sum to at most 1 (got {total_share})"));
        }
        for r in &self.routes {
            for id in [r.origin, r.destination] {
                if id == 0 || id as usize > self.n_locations {
                    return bad(format!("route endpoint {id} outside 1..={}", self.n_locations));
                }
            }
        }
        if !self.routes.is_empty() {
            if self.evening_bin >= self.bins_per_day() {
                return bad(format!("evening_bin {} outside the day", self.evening_bin));
            }
            if self.route_lead_bins == 0 || self.route_lead_bins > self.evening_bin {
                return bad("route_lead_bins must be in 1..=evening_bin".into());
            }
        }
        if self.route_sizes().iter().sum::<usize>() > self.n_regular {
            return bad("routes need more objects than n_regular".into());
        }
        Ok(())
    }

    /// Flat `key = value` text; `#` starts a comment.
    pub fn to_config_string(&self) -> String {
        let mut s = String::new();
        let c = self.markov.cols();
        let markov: Vec<String> = (0..c)
            .map(|r| self.markov.row(r).iter().map(f64::to_string).collect::<Vec<_>>().join(","))
            .collect();
        let routes: Vec<String> = self
            .routes
            .iter()
            .map(|r| format!("{}>{}:{}", r.origin, r.destination, r.share))
            .collect();
        let _ = writeln!(s, "n_regular = {}", self.n_regular);
        let _ = writeln!(s, "n_outstanding = {}", self.n_outstanding);
        let _ = writeln!(s, "n_locations = {}", self.n_locations);
        let _ = writeln!(s, "days = {}", self.days);
        let _ = writeln!(s, "bin_seconds = {}", self.bin_seconds);
        let _ = writeln!(s, "start = {}", self.start);
        let _ = writeln!(s, "seed = {}", self.seed);
        let _ = writeln!(s, "markov = {}", markov.join(";"));
        let _ = writeln!(s, "dwell_multiplier = {}", self.outstanding.dwell_multiplier);
        let _ = writeln!(s, "frequency_multiplier = {}", self.outstanding.frequency_multiplier);
        let _ = writeln!(s, "active_days = {}", self.outstanding.active_days);
        let _ = writeln!(s, "routes = {}", routes.join(";"));
        let _ = writeln!(s, "evening_bin = {}", self.evening_bin);
        let _ = writeln!(s, "route_lead_bins = {}", self.route_lead_bins);
        s
    }
}

fn parse_value<T: FromStr>(line: usize, key: &str, v: &str) -> Result<T, SynthError> {
    v.parse().map_err(|_| SynthError::Parse {
        line,
        msg: format!("bad value `{v}` for `{key}`"),
    })
}

fn parse_routes(line: usize, v: &str) -> Result<Vec<PlantedRoute>, SynthError> {
    let err = || SynthError::Parse {
        line,
        msg: format!("bad route list `{v}` (want origin>dest:share;...)"),
    };
    v.split(';')
        .map(str::trim)
        .filter(|p| !p.is_empty())
        .map(|p| {
            let (od, share) = p.split_once(':').ok_or_else(err)?;
            let (o, d) = od.split_once('>').ok_or_else(err)?;
            Ok(PlantedRoute {
                origin: o.trim().parse().map_err(|_| err())?,
                destination: d.trim().parse().map_err(|_| err())?,
                share: share.trim().parse().map_err(|_| err())?,
            })
        })
        .collect()
}

impl FromStr for SynthConfig {
    type Err = SynthError;

    /// Missing keys keep their defaults. Without an explicit `markov`, the
    /// chain is `structured_markov(n_locations, self_p, next_p)`.
    fn from_str(text: &str) -> Result<Self, SynthError> {
        let mut cfg = SynthConfig::default();
        let mut markov_rows: Option<(usize, Vec<Vec<f64>>)> = None;
        let (mut self_p, mut next_p) = (0.5, 0.3);
        for (i, raw) in text.lines().enumerate() {
            let line = i + 1;
            let content = raw.split('#').next().unwrap_or("").trim();
            if content.is_empty() {
                continue;
            }
            let (key, value) = content.split_once('=').ok_or(SynthError::Parse {
                line,
                msg: "expected `key = value`".into(),
            })?;
            let (key, v) = (key.trim(), value.trim());
            match key {
                "n_regular" => cfg.n_regular = parse_value(line, key, v)?,
                "n_outstanding" => cfg.n_outstanding = parse_value(line, key, v)?,
                "n_locations" => cfg.n_locations = parse_value(line, key, v)?,
                "days" => cfg.days = parse_value(line, key, v)?,
                "bin_seconds" => cfg.bin_seconds = parse_value(line, key, v)?,
                "start" => cfg.start = parse_value(line, key, v)?,
                "seed" => cfg.seed = parse_value(line, key, v)?,
                "self_p" => self_p = parse_value(line, key, v)?,
                "next_p" => next_p = parse_value(line, key, v)?,
                "markov" => {
                    let rows = v
                        .split(';')
                        .map(|r| r.split(',').map(|x| parse_value(line, key, x.trim())).collect())
                        .collect::<Result<Vec<Vec<f64>>, _>>()?;
                    markov_rows = Some((line, rows));
                }
                "dwell_multiplier" => cfg.outstanding.dwell_multiplier = parse_value(line, key, v)?,
                "frequency_multiplier" => cfg.outstanding.frequency_multiplier = parse_value(line, key, v)?,
                "active_days" => cfg.outstanding.active_days = parse_value(line, key, v)?,
                "routes" => cfg.routes = parse_routes(line, v)?,
                "evening_bin" => cfg.evening_bin = parse_value(line, key, v)?,
                "route_lead_bins" => cfg.route_lead_bins = parse_value(line, key, v)?,
                _ => {
                    return Err(SynthError::Parse {
                        line,
                        msg: format!("unknown key `{key}`"),
                    })
                }
            }
        }
        cfg.markov = match markov_rows {
            Some((line, rows)) => {
                let c = rows.len();
                if rows.iter().any(|r| r.len() != c) {
                    return Err(SynthError::Parse {
                        line,
                        msg: "markov must be square".into(),
                    });
                }
                Grid::from_rows(rows, c)
            }
            None => structured_markov(cfg.n_locations, self_p, next_p),
        };
        cfg.validate()?;
        Ok(cfg)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ObjectClass {
    Regular,
    Outstanding,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ObjectTruth {
    pub id: String,
    pub class: ObjectClass,
    /// Index into [`GroundTruth::routes`].
    pub route: Option<usize>,
    pub favourite: Option<LocationId>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroundTruth {
    /// In dataset object order.
    pub objects: Vec<ObjectTruth>,
    pub routes: Vec<PlantedRoute>,
    pub markov: Grid<f64>,
}

impl GroundTruth {
    pub fn outstanding(&self) -> Vec<usize> {
        self.indices(|o| o.class == ObjectClass::Outstanding)
    }

    /// Regular objects not assigned to a route.
    pub fn markov_walkers(&self) -> Vec<usize> {
        self.indices(|o| o.class == ObjectClass::Regular && o.route.is_none())
    }

    pub fn route_edges(&self) -> Vec<(LocationId, LocationId)> {
        self.routes.iter().map(|r| (r.origin, r.destination)).collect()
    }

    fn indices(&self, f: impl Fn(&ObjectTruth) -> bool) -> Vec<usize> {
        self.objects
            .iter()
            .enumerate()
            .filter(|(_, o)| f(o))
            .map(|(i, _)| i)
            .collect()
    }
}

fn sample_row(rng: &mut ChaCha8Rng, row: &[f64]) -> usize {
    let u: f64 = rng.random();
    let mut acc = 0.0;
    for (t, &p) in row.iter().enumerate() {
        acc += p;
        if u < acc {
            return t;
        }
    }
    // rounding slack: last state with mass
    row.iter().rposition(|&p| p > 0.0).unwrap_or(0)
}

fn location_tree(n: usize) -> LocationTree {
    let side = (n as f64).sqrt().ceil() as usize;
    let specs: Vec<LocationSpec> = (0..n)
        .map(|i| {
            let (r, c) = (i / side, i % side);
            // stagger odd rows so the layout is not a perfect lattice
            let x = 100.0 * c as f64 + if r % 2 == 1 { 50.0 } else { 0.0 };
            LocationSpec::root(&format!("st{:02}", i + 1), "station").at(x, 100.0 * r as f64)
        })
        .collect();
    LocationTree::build(&specs).expect("generated names are unique")
}

struct Emitter<'a> {
    cfg: &'a SynthConfig,
    tree: &'a LocationTree,
    records: Vec<CheckInRecord>,
}

impl Emitter<'_> {
    fn emit(&mut self, id: &str, bin: usize, loc: LocationId, per_bin: usize) {
        let b0 = self.cfg.start + bin as i64 * self.cfg.bin_seconds;
        let name = &self.tree.get(loc).expect("valid location").name;
        for k in 0..per_bin {
            let t = b0 + k as i64 * self.cfg.bin_seconds / per_bin as i64;
            self.records.push(CheckInRecord::new(t, id, loc, name));
        }
    }
}

fn mean_regular_dwell(markov: &Grid<f64>, horizon: usize) -> f64 {
    let c = markov.rows();
    let dwell: f64 = (1..c)
        .map(|s| {
            let stay = markov[(s, s)];
            if stay >= 1.0 {
                horizon as f64
            } else {
                1.0 / (1.0 - stay)
            }
        })
        .sum();
    if c > 1 {
        dwell / (c - 1) as f64
    } else {
        1.0
    }
}

/// Generates a dataset and its ground truth. Seed-deterministic.
pub fn generate(cfg: &SynthConfig) -> Result<(Dataset, GroundTruth), SynthError> {
    cfg.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let tree = location_tree(cfg.n_locations);
    let per_day = cfg.bins_per_day();
    let n_bins = cfg.n_bins();
    let total = cfg.n_regular + cfg.n_outstanding;
    let width = total.max(1).to_string().len().max(4);

    // route membership for the first regular objects, in route order
    let mut route_of = vec![None; cfg.n_regular];
    let mut next = 0;
    for (r, &n) in cfg.route_sizes().iter().enumerate() {
        for slot in &mut route_of[next..next + n] {
            *slot = Some(r);
        }
        next += n;
    }

    let mut favourites: Vec<LocationId> = (1..=cfg.n_locations as LocationId).collect();
    favourites.shuffle(&mut rng);

    let block = (cfg.outstanding.dwell_multiplier * mean_regular_dwell(&cfg.markov, n_bins))
        .round()
        .max(1.0) as usize;
    let per_bin = cfg.outstanding.frequency_multiplier.round().max(1.0) as usize;

    let mut em = Emitter {
        cfg,
        tree: &tree,
        records: Vec::new(),
    };
    let mut truth = Vec::with_capacity(total);
    for k in 0..total {
        let id = format!("obj{:0width$}", k + 1);
        let (class, route, favourite) = if k < cfg.n_regular {
            (ObjectClass::Regular, route_of[k], None)
        } else {
            let f = favourites[(k - cfg.n_regular) % favourites.len()];
            (ObjectClass::Outstanding, None, Some(f))
        };
        if let Some(r) = route {
            let route = cfg.routes[r];
            for day in 0..cfg.days {
                let e = day * per_day + cfg.evening_bin;
                for b in e - cfg.route_lead_bins..e {
                    em.emit(&id, b, route.origin, 1);
                }
                em.emit(&id, e, route.destination, 1);
            }
        } else {
            let active_until = match favourite {
                Some(_) => cfg.outstanding.active_days * per_day,
                None => 0,
            };
            let mut state = 0usize;
            for b in 0..n_bins {
                if b < active_until {
                    // camp for `block` bins, then one bin away
                    let f = favourite.expect("outstanding");
                    if b % (block + 1) < block {
                        em.emit(&id, b, f, per_bin);
                        state = f as usize;
                    } else {
                        state = 0;
                    }
                    continue;
                }
                state = sample_row(&mut rng, cfg.markov.row(state));
                if state != 0 {
                    em.emit(&id, b, state as LocationId, 1);
                }
            }
        }
        truth.push(ObjectTruth {
            id,
            class,
            route,
            favourite,
        });
    }

    let d = Dataset::new(em.records, tree);
    // reorder to dataset order; objects that never checked in are dropped
    let objects = d
        .objects
        .ids()
        .iter()
        .map(|id| truth.iter().find(|t| &t.id == id).expect("generated id").clone())
        .collect();
    Ok((
        d,
        GroundTruth {
            objects,
            routes: cfg.routes.clone(),
            markov: cfg.markov.clone(),
        },
    ))
}

/// Time-oriented matrix aligned with the generator's bins.
pub fn time_oriented_matrix(d: &Dataset, cfg: &SynthConfig) -> TimeOrientedMatrix {
    let binning = cfg.binning();
    let stays = derive_stays(d, cfg.bin_seconds, Some(binning.end()));
    build_time_oriented_matrix(&stays, binning, d.n_objects())
}

/// Expected accuracy of predicting `argmax_t P(s, t)` from the current
/// state `s`, with `pi` the distribution of current states.
pub fn bayes_optimal_accuracy(markov: &Grid<f64>, pi: &[f64]) -> f64 {
    assert_eq!(pi.len(), markov.rows(), "pi length must match markov");
    let mass: f64 = pi.iter().sum();
    if mass <= 0.0 {
        return 0.0;
    }
    (0..markov.rows())
        .map(|s| pi[s] * markov.row(s).iter().copied().fold(0.0, f64::max))
        .sum::<f64>()
        / mass
}

/// Empirical distribution of `states` over `0..n_classes`.
pub fn state_distribution(states: &[LocationId], n_classes: usize) -> Vec<f64> {
    let mut pi = vec![0.0; n_classes];
    for &s in states {
        pi[s as usize] += 1.0;
    }
    let n = states.len().max(1) as f64;
    pi.iter_mut().for_each(|p| *p /= n);
    pi
}

/// Isotropic Gaussian blobs: `n_per` points around each centre.
/// Returns the points and each point's blob index.
pub fn gaussian_blobs(centres: &[Vec<f64>], n_per: usize, std: f64, seed: u64) -> (Grid<f64>, Vec<usize>) {
    let dim = centres.first().map_or(0, Vec::len);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let noise = Normal::new(0.0, std).expect("finite std");
    let mut data = Vec::with_capacity(centres.len() * n_per * dim);
    let mut labels = Vec::with_capacity(centres.len() * n_per);
    for (b, c) in centres.iter().enumerate() {
        assert_eq!(c.len(), dim, "centres differ in dimension");
        for _ in 0..n_per {
            data.extend(c.iter().map(|&m| m + noise.sample(&mut rng)));
            labels.push(b);
        }
    }
    (Grid::from_vec(labels.len(), dim, data), labels)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ingest::{to_canonical_csv, validate_dataset};

    fn small() -> SynthConfig {
        SynthConfig {
            n_regular: 20,
            n_outstanding: 2,
            days: 3,
            routes: vec![PlantedRoute { origin: 2, destination: 5, share: 0.25 }],
            outstanding: OutstandingProfile {
                active_days: 2,
                ..Default::default()
            },
            ..Default::default()
        }
    }

    #[test]
    fn single_outstanding_object() {
        let cfg = SynthConfig {
            n_regular: 0,
            n_outstanding: 1,
            routes: vec![],
            ..Default::default()
        };
        let (d, gt) = generate(&cfg).unwrap();
        assert_eq!(d.n_objects(), 1);
        assert_eq!(gt.objects.len(), 1);
        assert_eq!(gt.objects[0].class, ObjectClass::Outstanding);
    }

    #[test]
    fn deterministic_and_valid() {
        let cfg = small();
        let (a, ga) = generate(&cfg).unwrap();
        let (b, gb) = generate(&cfg).unwrap();
        assert_eq!(to_canonical_csv(&a), to_canonical_csv(&b));
        assert_eq!(ga, gb);
        assert!(validate_dataset(&a).is_empty());
        assert_eq!(ga.objects.len(), a.n_objects());
        for (o, t) in a.objects.ids().iter().zip(&ga.objects) {
            assert_eq!(o, &t.id);
        }
        let other = generate(&SynthConfig { seed: 1, ..cfg }).unwrap().0;
        assert_ne!(to_canonical_csv(&a), to_canonical_csv(&other));
    }

    #[test]
    fn route_objects_follow_their_route() {
        let cfg = small();
        let (d, gt) = generate(&cfg).unwrap();
        let tom = time_oriented_matrix(&d, &cfg);
        let members: Vec<usize> = (0..gt.objects.len()).filter(|&i| gt.objects[i].route.is_some()).collect();
        assert_eq!(members.len(), 5);
        for &i in &members {
            for day in 0..cfg.days {
                let e = day * 24 + cfg.evening_bin;
                let row = tom.row(i);
                assert_eq!(&row[e - 2..=e], &[2, 2, 5]);
                assert_eq!(row[e - 3], 0);
                assert_eq!(row[e + 1], 0);
            }
        }
    }

    #[test]
    fn identity_chain_is_absorbing() {
        let c = 4;
        let mut eye = Grid::filled(c, c, 0.0);
        for i in 0..c {
            eye[(i, i)] = 1.0;
        }
        // from absent, jump once to a location and stay
        let mut m = eye.clone();
        m[(0, 0)] = 0.0;
        m[(0, 2)] = 1.0;
        let cfg = SynthConfig {
            n_regular: 5,
            n_outstanding: 0,
            n_locations: 3,
            days: 2,
            markov: m,
            routes: vec![],
            ..Default::default()
        };
        let (d, _) = generate(&cfg).unwrap();
        let tom = time_oriented_matrix(&d, &cfg);
        for i in 0..tom.n_objects() {
            assert!(tom.row(i).iter().all(|&v| v == 2));
        }
    }

    #[test]
    fn markov_walk_converges() {
        let cfg = SynthConfig {
            n_regular: 150,
            n_outstanding: 0,
            routes: vec![],
            seed: 3,
            ..Default::default()
        };
        let (d, gt) = generate(&cfg).unwrap();
        let tom = time_oriented_matrix(&d, &cfg);
        let c = cfg.n_locations + 1;
        let mut counts = Grid::filled(c, c, 0u32);
        let mut total = 0;
        for i in gt.markov_walkers() {
            for w in tom.row(i).windows(2) {
                counts[(w[0] as usize, w[1] as usize)] += 1;
                total += 1;
            }
        }
        assert!(total >= 10_000);
        for s in 0..c {
            let n: u32 = counts.row(s).iter().sum();
            let tv: f64 = (0..c)
                .map(|t| (counts[(s, t)] as f64 / n as f64 - cfg.markov[(s, t)]).abs())
                .sum::<f64>()
                / 2.0;
            assert!(tv < 0.05, "row {s}: tv {tv} over {n} transitions");
        }
    }

    #[test]
    fn outstanding_objects_dominate_their_favourite() {
        let cfg = small();
        let (d, gt) = generate(&cfg).unwrap();
        let counts = crate::matrices::build_frequency_matrix(&d, cfg.binning().window());
        for i in gt.outstanding() {
            let f = gt.objects[i].favourite.unwrap();
            let max_regular = gt.markov_walkers().iter().map(|&j| counts.get(j, f)).max().unwrap();
            assert!(counts.get(i, f) > 3 * max_regular);
        }
    }

    #[test]
    fn config_round_trip() {
        let cfg = small();
        let back: SynthConfig = cfg.to_config_string().parse().unwrap();
        assert_eq!(back, cfg);
        let minimal: SynthConfig = "n_locations = 3\nself_p = 0.7 # comment\nnext_p = 0.1\nroutes =\n".parse().unwrap();
        assert_eq!(minimal.markov.shape(), (4, 4));
        assert!((minimal.markov[(1, 2)] - 0.1).abs() < 1e-12);
        assert!((minimal.markov[(1, 0)] - 0.2).abs() < 1e-12);
        assert!(matches!("bogus = 1".parse::<SynthConfig>(), Err(SynthError::Parse { line: 1, .. })));
        assert!(matches!(
            "routes = 1>2:0.7;3>4:0.7".parse::<SynthConfig>(),
            Err(SynthError::InvalidConfig(_))
        ));
    }

    #[test]
    fn structured_rows_are_stochastic() {
        for l in [1, 2, 5, 12] {
            let m = structured_markov(l, 0.5, 0.3);
            for s in 0..=l {
                assert!((m.row(s).iter().sum::<f64>() - 1.0).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn bayes_accuracy_oracles() {
        let c = 5;
        let mut eye = Grid::filled(c, c, 0.0);
        for i in 0..c {
            eye[(i, i)] = 1.0;
        }
        let pi = vec![0.2; c];
        assert!((bayes_optimal_accuracy(&eye, &pi) - 1.0).abs() < 1e-12);
        assert!((bayes_optimal_accuracy(&Grid::filled(c, c, 0.2), &pi) - 0.2).abs() < 1e-12);
        let m = Grid::from_rows(vec![vec![0.6, 0.3, 0.1], vec![0.2, 0.2, 0.6], vec![0.5, 0.25, 0.25]], 3);
        let expect = (0.6 + 0.6 + 0.5) / 3.0;
        assert!((bayes_optimal_accuracy(&m, &[1.0 / 3.0; 3]) - expect).abs() < 1e-12);
    }

    #[test]
    fn blobs_have_requested_shape() {
        let centres = vec![vec![0.0, 0.0], vec![5.0, 5.0]];
        let (x, y) = gaussian_blobs(&centres, 30, 0.5, 1);
        assert_eq!(x.shape(), (60, 2));
        assert_eq!(y.iter().filter(|&&b| b == 1).count(), 30);
        let mean0: f64 = (0..30).map(|i| x[(i, 0)]).sum::<f64>() / 30.0;
        assert!(mean0.abs() < 0.5);
        assert_eq!(gaussian_blobs(&centres, 30, 0.5, 1).0, x);
    }
}
