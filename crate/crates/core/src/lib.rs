//! Movement-pattern analytics over time-spatial check-in data.
//!
//! The pipeline runs in four stages:
//!
//! 1. [`ingest`] parses raw check-in files (canonical, mobile-operator and
//!    park-sensor layouts) into a sorted [`ingest::Dataset`] plus a
//!    hierarchical [`ingest::LocationTree`].
//! 2. [`matrices`] derives stay intervals and builds the visiting-frequency,
//!    time-spent, sequence and time-oriented matrices.
//! 3. [`som`] clusters movers on their frequency/time-spent profiles and flags
//!    outstanding ones from the U-matrix; [`predict`] forecasts the next
//!    occupied location with a recurrent network and classical baselines.
//! 4. [`viz`] renders the results as standalone SVG documents.
//!
//! [`synth`] generates seeded synthetic populations with known ground truth.

pub mod grid;
pub mod ingest;
pub mod matrices;
pub mod predict;
pub mod som;
pub mod synth;
pub mod viz;

pub use grid::Grid;
