//! Backward bilinear grid sampling with zero padding, and its adjoint.

use rayon::prelude::*;

use super::raster::{Dims, FlowField, Image, Mask, Raster};
use crate::error::{Error, Result};

/// Bilinear stencil for one sample position.
#[derive(Debug, Clone, Copy)]
pub(crate) struct Tap {
    x0: isize,
    y0: isize,
    fx: f64,
    fy: f64,
}

impl Tap {
    pub(crate) fn at(sx: f64, sy: f64) -> Self {
        let x0 = sx.floor();
        let y0 = sy.floor();
        Tap {
            x0: x0 as isize,
            y0: y0 as isize,
            fx: sx - x0,
            fy: sy - y0,
        }
    }

    /// Corner values `(v00, v10, v01, v11)`, zero outside the grid.
    #[inline]
    fn corners(&self, plane: &[f64], dims: Dims) -> [f64; 4] {
        [
            fetch(plane, dims, self.x0, self.y0),
            fetch(plane, dims, self.x0 + 1, self.y0),
            fetch(plane, dims, self.x0, self.y0 + 1),
            fetch(plane, dims, self.x0 + 1, self.y0 + 1),
        ]
    }

    #[inline]
    fn weights(&self) -> [f64; 4] {
        let (fx, fy) = (self.fx, self.fy);
        [
            (1.0 - fx) * (1.0 - fy),
            fx * (1.0 - fy),
            (1.0 - fx) * fy,
            fx * fy,
        ]
    }

    #[inline]
    fn sample(&self, plane: &[f64], dims: Dims) -> f64 {
        let v = self.corners(plane, dims);
        let w = self.weights();
        let mut acc = 0.0;
        for k in 0..4 {
            if w[k] != 0.0 {
                acc += w[k] * v[k];
            }
        }
        acc
    }

    /// Partial derivatives of the sample w.r.t. the sample position.
    ///
    /// On a grid line the interpolant has a kink; there the slope across the
    /// line is the mean of the two one-sided slopes.
    #[inline]
    fn slope(&self, plane: &[f64], dims: Dims) -> (f64, f64) {
        let v = |dx: isize, dy: isize| fetch(plane, dims, self.x0 + dx, self.y0 + dy);
        let (fx, fy) = (self.fx, self.fy);
        let ds_x = if fx == 0.0 {
            0.5 * ((1.0 - fy) * (v(1, 0) - v(-1, 0)) + fy * (v(1, 1) - v(-1, 1)))
        } else {
            (1.0 - fy) * (v(1, 0) - v(0, 0)) + fy * (v(1, 1) - v(0, 1))
        };
        let ds_y = if fy == 0.0 {
            0.5 * ((1.0 - fx) * (v(0, 1) - v(0, -1)) + fx * (v(1, 1) - v(1, -1)))
        } else {
            (1.0 - fx) * (v(0, 1) - v(0, 0)) + fx * (v(1, 1) - v(1, 0))
        };
        (ds_x, ds_y)
    }
}

#[inline]
fn fetch(plane: &[f64], dims: Dims, x: isize, y: isize) -> f64 {
    if x >= 0 && y >= 0 && (x as usize) < dims.width && (y as usize) < dims.height {
        plane[y as usize * dims.width + x as usize]
    } else {
        0.0
    }
}

/// Source-domain sample position `p + f(p)` of output pixel `(y, x)`.
#[inline]
pub fn sample_position(flow: &FlowField, y: usize, x: usize) -> (f64, f64) {
    let (dx, dy) = flow.get(y, x);
    (x as f64 + dx, y as f64 + dy)
}

fn check_dims(source: Dims, flow: &FlowField) -> Result<()> {
    if source != flow.dims() {
        return Err(Error::shape("raster vs flow", source, flow.dims()));
    }
    Ok(())
}

fn warp_planes(data: &[f64], channels: usize, dims: Dims, flow: &FlowField) -> Vec<f64> {
    let n = dims.len();
    let mut out = vec![0.0; channels * n];
    if n == 0 {
        return out;
    }
    out.par_chunks_mut(dims.width)
        .enumerate()
        .for_each(|(row, dst)| {
            let c = row / dims.height;
            let y = row % dims.height;
            let plane = &data[c * n..(c + 1) * n];
            for (x, v) in dst.iter_mut().enumerate() {
                let (sx, sy) = sample_position(flow, y, x);
                *v = Tap::at(sx, sy).sample(plane, dims);
            }
        });
    out
}

/// Samples `image` at `p + flow(p)` for every output pixel.
pub fn warp(image: &Image, flow: &FlowField) -> Result<Image> {
    check_dims(image.dims(), flow)?;
    let out = warp_planes(image.values(), image.channels(), image.dims(), flow);
    Ok(Image::from_clamped(image.channels(), image.dims(), out))
}

pub fn warp_mask(mask: &Mask, flow: &FlowField) -> Result<Mask> {
    check_dims(mask.dims(), flow)?;
    let out = warp_planes(mask.values(), 1, mask.dims(), flow);
    Ok(Mask::from_clamped(mask.dims(), out))
}

/// Gradients of a downstream scalar through [`warp`].
#[derive(Debug, Clone)]
pub struct WarpAdjoint {
    /// Same layout as [`FlowField`]: interleaved `(d/dx, d/dy)`.
    pub flow: Vec<f64>,
    /// Same layout as the source raster.
    pub source: Vec<f64>,
}

/// Pulls the output cotangent back onto the flow only.
pub fn warp_flow_adjoint<R: Raster>(source: &R, flow: &FlowField, cotangent: &[f64]) -> Result<Vec<f64>> {
    let dims = source.dims();
    check_dims(dims, flow)?;
    let channels = source.channels();
    let n = dims.len();
    if cotangent.len() != channels * n {
        return Err(Error::shape("warp cotangent length", cotangent.len(), channels * n));
    }
    let data = source.values();
    let mut grad = vec![0.0; 2 * n];
    if n == 0 {
        return Ok(grad);
    }
    grad.par_chunks_mut(2 * dims.width)
        .enumerate()
        .for_each(|(y, row)| {
            for x in 0..dims.width {
                let (sx, sy) = sample_position(flow, y, x);
                let tap = Tap::at(sx, sy);
                let (mut gx, mut gy) = (0.0, 0.0);
                for c in 0..channels {
                    let g = cotangent[c * n + y * dims.width + x];
                    if g == 0.0 {
                        continue;
                    }
                    let (sx_c, sy_c) = tap.slope(&data[c * n..(c + 1) * n], dims);
                    gx += g * sx_c;
                    gy += g * sy_c;
                }
                row[2 * x] = gx;
                row[2 * x + 1] = gy;
            }
        });
    Ok(grad)
}

/// Pulls the output cotangent back onto both the flow and the source values.
pub fn warp_adjoint<R: Raster>(source: &R, flow: &FlowField, cotangent: &[f64]) -> Result<WarpAdjoint> {
    let flow_grad = warp_flow_adjoint(source, flow, cotangent)?;
    let dims = source.dims();
    let n = dims.len();
    let mut src_grad = vec![0.0; source.channels() * n];
    if n > 0 {
        // Scatter is per channel; each plane is accumulated in a fixed pixel order.
        src_grad
            .par_chunks_mut(n)
            .enumerate()
            .for_each(|(c, plane)| {
                for y in 0..dims.height {
                    for x in 0..dims.width {
                        let g = cotangent[c * n + y * dims.width + x];
                        if g == 0.0 {
                            continue;
                        }
                        let (sx, sy) = sample_position(flow, y, x);
                        let tap = Tap::at(sx, sy);
                        let w = tap.weights();
                        let offsets = [(0, 0), (1, 0), (0, 1), (1, 1)];
                        for (k, (ox, oy)) in offsets.iter().enumerate() {
                            let (cx, cy) = (tap.x0 + ox, tap.y0 + oy);
                            if cx >= 0 && cy >= 0 && (cx as usize) < dims.width && (cy as usize) < dims.height {
                                plane[cy as usize * dims.width + cx as usize] += g * w[k];
                            }
                        }
                    }
                }
            });
    }
    Ok(WarpAdjoint {
        flow: flow_grad,
        source: src_grad,
    })
}
