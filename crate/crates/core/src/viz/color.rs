use std::fmt;

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Rgb(pub u8, pub u8, pub u8);

impl fmt::Display for Rgb {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "#{:02x}{:02x}{:02x}", self.0, self.1, self.2)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ColorRamp {
    /// Dark purple through teal to yellow.
    #[default]
    Sequential,
    /// Blue through near-white to red.
    Diverging,
}

// anchors sampled from the usual perceptual sequential map
const SEQUENTIAL: [Rgb; 5] = [
    Rgb(0x44, 0x01, 0x54),
    Rgb(0x3b, 0x52, 0x8b),
    Rgb(0x21, 0x91, 0x8c),
    Rgb(0x5e, 0xc9, 0x62),
    Rgb(0xfd, 0xe7, 0x25),
];

const DIVERGING: [Rgb; 3] = [Rgb(0x3b, 0x4c, 0xc0), Rgb(0xf2, 0xf0, 0xee), Rgb(0xb4, 0x04, 0x26)];

/// Ten well-separated colours for per-object series.
pub const CATEGORICAL: [Rgb; 10] = [
    Rgb(0x1f, 0x77, 0xb4),
    Rgb(0xff, 0x7f, 0x0e),
    Rgb(0x2c, 0xa0, 0x2c),
    Rgb(0xd6, 0x27, 0x28),
    Rgb(0x94, 0x67, 0xbd),
    Rgb(0x8c, 0x56, 0x4b),
    Rgb(0xe3, 0x77, 0xc2),
    Rgb(0x7f, 0x7f, 0x7f),
    Rgb(0xbc, 0xbd, 0x22),
    Rgb(0x17, 0xbe, 0xcf),
];

impl ColorRamp {
    /// Ramp position for a normalized value: clamped to `[0, 1]`, NaN → 0.
    pub fn position(t: f64) -> f64 {
        if t.is_nan() {
            0.0
        } else {
            t.clamp(0.0, 1.0)
        }
    }

    pub fn color(self, t: f64) -> Rgb {
        let anchors: &[Rgb] = match self {
            ColorRamp::Sequential => &SEQUENTIAL,
            ColorRamp::Diverging => &DIVERGING,
        };
        let x = Self::position(t) * (anchors.len() - 1) as f64;
        let i = (x.floor() as usize).min(anchors.len() - 2);
        let f = x - i as f64;
        let (a, b) = (anchors[i], anchors[i + 1]);
        let mix = |p: u8, q: u8| (p as f64 + (q as f64 - p as f64) * f).round() as u8;
        Rgb(mix(a.0, b.0), mix(a.1, b.1), mix(a.2, b.2))
    }

    pub fn min_color(self) -> Rgb {
        self.color(0.0)
    }

    pub fn max_color(self) -> Rgb {
        self.color(1.0)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn endpoints_and_hex() {
        assert_eq!(ColorRamp::Sequential.min_color().to_string(), "#440154");
        assert_eq!(ColorRamp::Sequential.max_color().to_string(), "#fde725");
        assert_eq!(ColorRamp::Diverging.color(-3.0), ColorRamp::Diverging.min_color());
    }

    proptest! {
        #[test]
        fn position_is_monotone(a in -2.0f64..3.0, b in -2.0f64..3.0) {
            let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
            prop_assert!(ColorRamp::position(lo) <= ColorRamp::position(hi));
        }
    }
}
