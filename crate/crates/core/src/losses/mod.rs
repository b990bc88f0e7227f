//! Scalar objectives on flows and rasters, each with an analytic gradient.

mod nipr;
mod pixel;
mod smoothness;
mod ssim;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::flow::{extent_ratio, mask_extents, Axis, Mask, RatioConvention};

pub use nipr::{integrity_violation, nipr_loss, nipr_preserve, preserve_kink_gap, preserve_penalty};
pub use pixel::{bce_loss, consistency_loss, l1_loss, BCE_EPSILON};
pub use smoothness::{so_kink_gap, so_loss, tv_kink_gap, tv_loss};
pub use ssim::{ssim, SSIM_WINDOW};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Reduction {
    /// Sum divided by the number of contributing terms (0 when there are none).
    #[default]
    Mean,
    Sum,
}

impl Reduction {
    pub(crate) fn scale(self, count: usize) -> f64 {
        match self {
            Reduction::Sum => 1.0,
            Reduction::Mean if count == 0 => 0.0,
            Reduction::Mean => 1.0 / count as f64,
        }
    }
}

impl std::str::FromStr for Reduction {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "mean" => Ok(Reduction::Mean),
            "sum" => Ok(Reduction::Sum),
            other => Err(Error::Config(format!("unknown reduction `{other}`"))),
        }
    }
}

impl std::fmt::Display for Reduction {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Reduction::Mean => "mean",
            Reduction::Sum => "sum",
        })
    }
}

/// A loss value, its gradient w.r.t. the differentiated input and named sub-terms.
#[derive(Debug, Clone, PartialEq)]
pub struct LossValue {
    pub value: f64,
    pub gradient: Vec<f64>,
    pub terms: Vec<(&'static str, f64)>,
}

impl LossValue {
    pub(crate) fn new(value: f64, gradient: Vec<f64>) -> Self {
        LossValue {
            value,
            gradient,
            terms: Vec::new(),
        }
    }

    pub fn term(&self, name: &str) -> Option<f64> {
        self.terms.iter().find(|(n, _)| *n == name).map(|(_, v)| *v)
    }
}

/// Unit step to one of the four grid neighbors.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct NeighborOffset {
    pub axis: Axis,
    /// `-1` or `+1`.
    pub sign: i8,
}

impl NeighborOffset {
    pub const ALL: [NeighborOffset; 4] = [
        NeighborOffset { axis: Axis::Horizontal, sign: -1 },
        NeighborOffset { axis: Axis::Horizontal, sign: 1 },
        NeighborOffset { axis: Axis::Vertical, sign: -1 },
        NeighborOffset { axis: Axis::Vertical, sign: 1 },
    ];

    /// Neighbor of `(y, x)` if it lies inside an `h x w` grid.
    pub fn apply(&self, y: usize, x: usize, h: usize, w: usize) -> Option<(usize, usize)> {
        let (ny, nx) = match self.axis {
            Axis::Vertical => (y as isize + self.sign as isize, x as isize),
            Axis::Horizontal => (y as isize, x as isize + self.sign as isize),
        };
        (ny >= 0 && nx >= 0 && (ny as usize) < h && (nx as usize) < w).then_some((ny as usize, nx as usize))
    }

    /// Flow component index (0 = dx, 1 = dy) that moves along this axis.
    pub fn component(&self) -> usize {
        match self.axis {
            Axis::Horizontal => 0,
            Axis::Vertical => 1,
        }
    }
}

/// Target inter-neighbor distances per axis.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RatioPair {
    pub vertical: f64,
    pub horizontal: f64,
    pub convention: RatioConvention,
}

impl RatioPair {
    pub fn new(vertical: f64, horizontal: f64, convention: RatioConvention) -> Result<Self> {
        for (name, v) in [("vertical", vertical), ("horizontal", horizontal)] {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::OutOfRange(format!("{name} ratio {v} must be finite and positive")));
            }
        }
        Ok(RatioPair {
            vertical,
            horizontal,
            convention,
        })
    }

    pub fn identity() -> Self {
        RatioPair {
            vertical: 1.0,
            horizontal: 1.0,
            convention: RatioConvention::Sampling,
        }
    }

    /// Ratios between the extents of `source` and `target` thresholded at 0.5.
    pub fn from_masks(source: &Mask, target: &Mask, convention: RatioConvention) -> Result<Self> {
        let s = mask_extents(source, 0.5)?;
        let t = mask_extents(target, 0.5)?;
        RatioPair::new(
            extent_ratio(s, t, Axis::Vertical, convention),
            extent_ratio(s, t, Axis::Horizontal, convention),
            convention,
        )
    }

    pub fn along(&self, axis: Axis) -> f64 {
        match axis {
            Axis::Vertical => self.vertical,
            Axis::Horizontal => self.horizontal,
        }
    }
}

#[inline]
pub(crate) fn sign(v: f64) -> f64 {
    if v > 0.0 {
        1.0
    } else if v < 0.0 {
        -1.0
    } else {
        0.0
    }
}
