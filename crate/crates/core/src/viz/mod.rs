//! Static SVG renderings: U-matrix, check-in heat map, flow map, time cube.
//!
//! Every renderer is a pure function of its inputs; numbers are printed with
//! fixed precision so identical inputs give byte-identical documents.

mod color;
mod cube;
mod flowmap;
mod heat;
mod svg;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use color::{ColorRamp, Rgb, CATEGORICAL};
pub use cube::{render_timecube, Trajectory};
pub use flowmap::{layout_positions, render_flowmap};
pub use heat::{render_heatmap, render_umatrix, HeatSource};

pub const MIN_SIDE: u32 = 64;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum VizError {
    #[error("canvas {width}x{height} is smaller than {MIN_SIDE}x{MIN_SIDE}")]
    TooSmall { width: u32, height: u32 },
    #[error("margin {0} leaves no drawing area")]
    MarginTooLarge(u32),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RenderSpec {
    width: u32,
    height: u32,
    ramp: ColorRamp,
    margin: u32,
    legend: bool,
}

impl Default for RenderSpec {
    fn default() -> Self {
        Self {
            width: 640,
            height: 480,
            ramp: ColorRamp::Sequential,
            margin: 40,
            legend: true,
        }
    }
}

impl RenderSpec {
    pub fn new(width: u32, height: u32) -> Result<Self, VizError> {
        if width < MIN_SIDE || height < MIN_SIDE {
            return Err(VizError::TooSmall { width, height });
        }
        let margin = Self::default().margin.min(width / 8).min(height / 8);
        Ok(Self {
            width,
            height,
            margin,
            ..Self::default()
        })
    }

    pub fn with_ramp(mut self, ramp: ColorRamp) -> Self {
        self.ramp = ramp;
        self
    }

    pub fn with_legend(mut self, legend: bool) -> Self {
        self.legend = legend;
        self
    }

    pub fn with_margin(mut self, margin: u32) -> Result<Self, VizError> {
        if 2 * margin + 16 > self.width.min(self.height) {
            return Err(VizError::MarginTooLarge(margin));
        }
        self.margin = margin;
        Ok(self)
    }

    pub fn width(&self) -> u32 {
        self.width
    }

    pub fn height(&self) -> u32 {
        self.height
    }

    pub fn ramp(&self) -> ColorRamp {
        self.ramp
    }

    pub fn margin(&self) -> u32 {
        self.margin
    }

    pub fn legend(&self) -> bool {
        self.legend
    }

    /// Drawing area `(x, y, w, h)` left after margins and the legend strip.
    fn plot_area(&self) -> (f64, f64, f64, f64) {
        let m = self.margin as f64;
        let legend = if self.legend { (self.width as f64 * 0.12).min(70.0) } else { 0.0 };
        (
            m,
            m,
            (self.width as f64 - 2.0 * m - legend).max(8.0),
            (self.height as f64 - 2.0 * m).max(8.0),
        )
    }
}

/// Min-max scaling to `[0, 1]`; a constant input maps to 0.
pub(crate) fn normalize(values: &[f64]) -> Vec<f64> {
    let lo = values.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let span = hi - lo;
    values
        .iter()
        .map(|&v| if span > 0.0 && span.is_finite() { (v - lo) / span } else { 0.0 })
        .collect()
}

#[cfg(test)]
pub(crate) mod testutil {
    /// Parses `doc` and checks the root is `<svg>`.
    pub fn parse(doc: &str) -> roxmltree::Document<'_> {
        let d = roxmltree::Document::parse(doc).expect("well-formed XML");
        assert_eq!(d.root_element().tag_name().name(), "svg");
        d
    }

    pub fn by_class<'a, 'i>(d: &'a roxmltree::Document<'i>, class: &str) -> Vec<roxmltree::Node<'a, 'i>> {
        d.descendants()
            .filter(|n| n.attribute("class").is_some_and(|c| c.split(' ').any(|c| c == class)))
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn spec_bounds() {
        assert!(RenderSpec::new(63, 100).is_err());
        assert!(RenderSpec::new(64, 64).is_ok());
        assert!(RenderSpec::new(64, 64).unwrap().with_margin(30).is_err());
    }

    #[test]
    fn normalize_constant_is_zero() {
        assert_eq!(normalize(&[3.0, 3.0]), vec![0.0, 0.0]);
        assert_eq!(normalize(&[0.0, 5.0, 10.0]), vec![0.0, 0.5, 1.0]);
    }
}
