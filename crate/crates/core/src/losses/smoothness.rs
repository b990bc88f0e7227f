//! Second-order smoothness and total variation on flow fields.

use super::{sign, LossValue, Reduction};
use crate::flow::FlowField;

/// Second differences `f(p - π) + f(p + π) - 2 f(p)` on both axes.
///
/// One term per (pixel, axis) whose two neighbors are in the grid; each term
/// sums the absolute second difference of both flow components.
pub fn so_loss(flow: &FlowField, reduction: Reduction) -> LossValue {
    let (h, w) = (flow.height(), flow.width());
    let f = flow.as_slice();
    let idx = |y: usize, x: usize, k: usize| 2 * (y * w + x) + k;
    let mut raw = vec![0.0; f.len()];
    let mut sum = 0.0;
    let mut count = 0usize;
    for y in 0..h {
        for x in 0..w {
            let mut pairs = [None, None];
            if x >= 1 && x + 1 < w {
                pairs[0] = Some(((y, x - 1), (y, x + 1)));
            }
            if y >= 1 && y + 1 < h {
                pairs[1] = Some(((y - 1, x), (y + 1, x)));
            }
            for ((ay, ax), (by, bx)) in pairs.into_iter().flatten() {
                count += 1;
                for k in 0..2 {
                    let e = f[idx(ay, ax, k)] + f[idx(by, bx, k)] - 2.0 * f[idx(y, x, k)];
                    sum += e.abs();
                    let s = sign(e);
                    raw[idx(ay, ax, k)] += s;
                    raw[idx(by, bx, k)] += s;
                    raw[idx(y, x, k)] -= 2.0 * s;
                }
            }
        }
    }
    let scale = reduction.scale(count);
    LossValue::new(sum * scale, raw.into_iter().map(|g| g * scale).collect())
}

/// Forward differences to the right and lower neighbor, both components.
pub fn tv_loss(flow: &FlowField, reduction: Reduction) -> LossValue {
    let (h, w) = (flow.height(), flow.width());
    let f = flow.as_slice();
    let idx = |y: usize, x: usize, k: usize| 2 * (y * w + x) + k;
    let mut raw = vec![0.0; f.len()];
    let mut sum = 0.0;
    let mut count = 0usize;
    for y in 0..h {
        for x in 0..w {
            let right = (x + 1 < w).then(|| (y, x + 1));
            let down = (y + 1 < h).then(|| (y + 1, x));
            for (ny, nx) in [right, down].into_iter().flatten() {
                count += 1;
                for k in 0..2 {
                    let d = f[idx(ny, nx, k)] - f[idx(y, x, k)];
                    sum += d.abs();
                    let s = sign(d);
                    raw[idx(ny, nx, k)] += s;
                    raw[idx(y, x, k)] -= s;
                }
            }
        }
    }
    let scale = reduction.scale(count);
    LossValue::new(sum * scale, raw.into_iter().map(|g| g * scale).collect())
}

/// Smallest `|second difference|` among the terms that read flow entry `index`.
pub fn so_kink_gap(flow: &FlowField, index: usize) -> f64 {
    let (h, w) = (flow.height() as isize, flow.width() as isize);
    let f = flow.as_slice();
    let k = index % 2;
    let p = (index / 2) as isize;
    let (py, px) = (p / w, p % w);
    let at = |y: isize, x: isize| f[2 * (y * w + x) as usize + k];
    let inside = |y: isize, x: isize| y >= 0 && x >= 0 && y < h && x < w;
    let mut gap = f64::INFINITY;
    for (dy, dx) in [(0, 1), (1, 0)] {
        for c in -1..=1 {
            let (cy, cx) = (py + c * dy, px + c * dx);
            let (ay, ax, by, bx) = (cy - dy, cx - dx, cy + dy, cx + dx);
            if inside(cy, cx) && inside(ay, ax) && inside(by, bx) {
                gap = gap.min((at(ay, ax) + at(by, bx) - 2.0 * at(cy, cx)).abs());
            }
        }
    }
    gap
}

/// Smallest `|forward difference|` among the terms that read flow entry `index`.
pub fn tv_kink_gap(flow: &FlowField, index: usize) -> f64 {
    let (h, w) = (flow.height() as isize, flow.width() as isize);
    let f = flow.as_slice();
    let k = index % 2;
    let p = (index / 2) as isize;
    let (py, px) = (p / w, p % w);
    let at = |y: isize, x: isize| f[2 * (y * w + x) as usize + k];
    let mut gap = f64::INFINITY;
    for (dy, dx) in [(0, 1), (1, 0), (0, -1), (-1, 0)] {
        let (ny, nx) = (py + dy, px + dx);
        if ny >= 0 && nx >= 0 && ny < h && nx < w {
            gap = gap.min((at(ny, nx) - at(py, px)).abs());
        }
    }
    gap
}
