use serde::{Deserialize, Serialize};

use super::raster::{Extents, Mask};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Axis {
    Vertical,
    Horizontal,
}

/// How the per-axis ratio between source and target extents is expressed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RatioConvention {
    /// `h / h'`: source step between adjacent output samples of a backward flow.
    #[default]
    Sampling,
    /// `h' / h`: target size over source size.
    TargetOverSource,
}

impl std::str::FromStr for RatioConvention {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "sampling" => Ok(RatioConvention::Sampling),
            "target_over_source" => Ok(RatioConvention::TargetOverSource),
            other => Err(Error::Config(format!("unknown ratio convention `{other}`"))),
        }
    }
}

impl std::fmt::Display for RatioConvention {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            RatioConvention::Sampling => "sampling",
            RatioConvention::TargetOverSource => "target_over_source",
        })
    }
}

/// Tight inclusive bounding box of `{p : mask(p) > threshold}`.
pub fn mask_extents(mask: &Mask, threshold: f64) -> Result<Extents> {
    let mut rows = (usize::MAX, 0usize);
    let mut cols = (usize::MAX, 0usize);
    let mut any = false;
    for y in 0..mask.height() {
        for x in 0..mask.width() {
            if mask.get(y, x) > threshold {
                any = true;
                rows = (rows.0.min(y), rows.1.max(y));
                cols = (cols.0.min(x), cols.1.max(x));
            }
        }
    }
    if !any {
        return Err(Error::EmptyMask);
    }
    Ok(Extents {
        h: rows.1 - rows.0 + 1,
        w: cols.1 - cols.0 + 1,
    })
}

pub fn extent_ratio(source: Extents, target: Extents, axis: Axis, convention: RatioConvention) -> f64 {
    let (s, t) = match axis {
        Axis::Vertical => (source.h as f64, target.h as f64),
        Axis::Horizontal => (source.w as f64, target.w as f64),
    };
    match convention {
        RatioConvention::TargetOverSource => t / s,
        RatioConvention::Sampling => s / t,
    }
}
