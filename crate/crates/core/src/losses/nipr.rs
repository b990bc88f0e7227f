//! Neighborhood integrity preservation.
//!
//! Every pixel `p` is compared with each in-grid 4-neighbor `u`. With
//! `φ(p) = p + f(p)` the sampled source position, `D = |φ(p)_a - φ(u)_a|` is
//! the distance along the neighbor's axis `a`. The penalty is
//!
//! ```text
//!   D       if D > r
//!   r - D   if D < r
//!   0       if D = r
//! ```
//!
//! so both squeezing (`D` too small) and stretching (`D` too large) are
//! penalized, and a stretched pair pays its whole distance rather than the
//! excess over `r`.

use super::smoothness::so_loss;
use super::{sign, LossValue, NeighborOffset, RatioPair, Reduction};
use crate::error::{Error, Result};
use crate::flow::{FlowField, Mask};

/// Per-pair penalty for distance `d` against target `r`.
#[inline]
pub fn preserve_penalty(d: f64, r: f64) -> f64 {
    if d > r {
        d
    } else if d < r {
        r - d
    } else {
        0.0
    }
}

#[inline]
fn penalty_slope(d: f64, r: f64) -> f64 {
    if d > r {
        1.0
    } else if d < r {
        -1.0
    } else {
        0.0
    }
}

fn in_region(region: Option<&Mask>, y: usize, x: usize) -> bool {
    region.is_none_or(|m| m.get(y, x) > 0.5)
}

fn check_region(flow: &FlowField, region: Option<&Mask>) -> Result<()> {
    match region {
        Some(m) if m.dims() != flow.dims() => Err(Error::shape("region vs flow", m.dims(), flow.dims())),
        _ => Ok(()),
    }
}

/// Signed separation `φ(p)_a - φ(u)_a` along the offset's axis.
#[inline]
fn separation(f: &[f64], w: usize, (py, px): (usize, usize), (uy, ux): (usize, usize), off: NeighborOffset) -> f64 {
    let k = off.component();
    let (pc, uc) = if k == 0 { (px, ux) } else { (py, uy) };
    (pc as f64 + f[2 * (py * w + px) + k]) - (uc as f64 + f[2 * (uy * w + ux) + k])
}

/// Integrity preservation term; `region` restricts the anchor pixels `p`.
pub fn nipr_preserve(flow: &FlowField, r: &RatioPair, region: Option<&Mask>, reduction: Reduction) -> Result<LossValue> {
    check_region(flow, region)?;
    let (h, w) = (flow.height(), flow.width());
    let f = flow.as_slice();
    let mut raw = vec![0.0; f.len()];
    let mut sum = 0.0;
    let mut count = 0usize;
    for y in 0..h {
        for x in 0..w {
            if !in_region(region, y, x) {
                continue;
            }
            for off in NeighborOffset::ALL {
                let Some(u) = off.apply(y, x, h, w) else { continue };
                let s = separation(f, w, (y, x), u, off);
                let d = s.abs();
                let target = r.along(off.axis);
                sum += preserve_penalty(d, target);
                count += 1;
                let g = penalty_slope(d, target) * sign(s);
                let k = off.component();
                raw[2 * (y * w + x) + k] += g;
                raw[2 * (u.0 * w + u.1) + k] -= g;
            }
        }
    }
    let scale = reduction.scale(count);
    Ok(LossValue::new(sum * scale, raw.into_iter().map(|g| g * scale).collect()))
}

/// Second-order smoothness plus integrity preservation.
///
/// Each part is reduced over its own terms; `terms` carries `"so"` and `"preserve"`.
pub fn nipr_loss(flow: &FlowField, r: &RatioPair, region: Option<&Mask>, reduction: Reduction) -> Result<LossValue> {
    let so = so_loss(flow, reduction);
    let keep = nipr_preserve(flow, r, region, reduction)?;
    let gradient = so.gradient.iter().zip(&keep.gradient).map(|(a, b)| a + b).collect();
    Ok(LossValue {
        value: so.value + keep.value,
        gradient,
        terms: vec![("so", so.value), ("preserve", keep.value)],
    })
}

/// Mean preservation penalty over the neighbor terms anchored inside `region`.
pub fn integrity_violation(flow: &FlowField, r: &RatioPair, region: &Mask) -> Result<f64> {
    if region.count_above(0.5) == 0 {
        return Err(Error::EmptyMask);
    }
    Ok(nipr_preserve(flow, r, Some(region), Reduction::Mean)?.value)
}

/// Smallest distance to a kink (`D = r` or `D = 0`) among the preservation
/// terms that read flow entry `index`.
pub fn preserve_kink_gap(flow: &FlowField, r: &RatioPair, region: Option<&Mask>, index: usize) -> f64 {
    let (h, w) = (flow.height(), flow.width());
    let f = flow.as_slice();
    let k = index % 2;
    let (py, px) = ((index / 2) / w, (index / 2) % w);
    let mut gap = f64::INFINITY;
    for off in NeighborOffset::ALL.into_iter().filter(|o| o.component() == k) {
        let Some(u) = off.apply(py, px, h, w) else { continue };
        // The pair (p, u) appears anchored at p and, mirrored, anchored at u.
        for (a, b) in [((py, px), u), (u, (py, px))] {
            if !in_region(region, a.0, a.1) {
                continue;
            }
            let mirrored = NeighborOffset { axis: off.axis, sign: if a == (py, px) { off.sign } else { -off.sign } };
            let s = separation(f, w, a, b, mirrored);
            gap = gap.min((s.abs() - r.along(off.axis)).abs()).min(s.abs());
        }
    }
    gap
}
