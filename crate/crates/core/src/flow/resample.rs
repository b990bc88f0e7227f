//! Resolution changes between pyramid levels.

use super::raster::{Dims, FlowField, Image, Mask, Raster};
use crate::error::{Error, Result};

/// Doubles the flow resolution.
///
/// Output position `o` reads the input at `(o + 0.5) / 2 - 0.5` (half-pixel
/// centers, clamped to the edge) and the sampled displacement is doubled so
/// it stays in output-pixel units.
pub fn upsample_flow(flow: &FlowField) -> FlowField {
    let (h, w) = (flow.height(), flow.width());
    let (oh, ow) = (2 * h, 2 * w);
    let src = flow.as_slice();
    let coord = |o: usize, n: usize| -> (usize, usize, f64) {
        let c = ((o as f64 + 0.5) / 2.0 - 0.5).clamp(0.0, (n - 1) as f64);
        let i0 = c.floor() as usize;
        let i1 = (i0 + 1).min(n - 1);
        (i0, i1, c - i0 as f64)
    };
    let mut data = Vec::with_capacity(2 * oh * ow);
    for oy in 0..oh {
        let (y0, y1, fy) = coord(oy, h);
        for ox in 0..ow {
            let (x0, x1, fx) = coord(ox, w);
            for k in 0..2 {
                let at = |y: usize, x: usize| src[2 * (y * w + x) + k];
                let top = (1.0 - fx) * at(y0, x0) + fx * at(y0, x1);
                let bottom = (1.0 - fx) * at(y1, x0) + fx * at(y1, x1);
                data.push(2.0 * ((1.0 - fy) * top + fy * bottom));
            }
        }
    }
    FlowField::new(oh, ow, data).expect("bilinear blend of finite values is finite")
}

/// Additive refinement `coarse_up + delta`.
pub fn compose_refine(coarse_up: &FlowField, delta: &FlowField) -> Result<FlowField> {
    if coarse_up.dims() != delta.dims() {
        return Err(Error::shape("refinement", coarse_up.dims(), delta.dims()));
    }
    let data = coarse_up
        .as_slice()
        .iter()
        .zip(delta.as_slice())
        .map(|(a, b)| a + b)
        .collect();
    FlowField::new(coarse_up.height(), coarse_up.width(), data)
}

fn reduce_blocks(
    data: &[f64],
    channels: usize,
    dims: Dims,
    factor: usize,
    reduce: impl Fn(&[f64]) -> f64,
) -> Result<(Dims, Vec<f64>)> {
    if factor == 0 || dims.height % factor != 0 || dims.width % factor != 0 {
        return Err(Error::DimensionMismatch(format!(
            "{}x{} is not divisible by {factor}",
            dims.height, dims.width
        )));
    }
    let out = Dims::new(dims.height / factor, dims.width / factor);
    let n = dims.len();
    let mut block = Vec::with_capacity(factor * factor);
    let mut res = Vec::with_capacity(channels * out.len());
    for c in 0..channels {
        let plane = &data[c * n..(c + 1) * n];
        for y in 0..out.height {
            for x in 0..out.width {
                block.clear();
                for yy in y * factor..(y + 1) * factor {
                    block.extend_from_slice(&plane[yy * dims.width + x * factor..yy * dims.width + (x + 1) * factor]);
                }
                res.push(reduce(&block));
            }
        }
    }
    Ok((out, res))
}

fn mean(block: &[f64]) -> f64 {
    block.iter().sum::<f64>() / block.len() as f64
}

/// Area (box-filter) downsampling by an integer factor.
pub fn downsample_image(image: &Image, factor: usize) -> Result<Image> {
    let (dims, data) = reduce_blocks(image.values(), image.channels(), image.dims(), factor, mean)?;
    Ok(Image::from_clamped(image.channels(), dims, data))
}

pub fn downsample_mask(mask: &Mask, factor: usize) -> Result<Mask> {
    let (dims, data) = reduce_blocks(mask.values(), 1, mask.dims(), factor, mean)?;
    Ok(Mask::from_clamped(dims, data))
}

/// Downsampling that keeps the largest value of every block, so a coarse
/// pixel is covered wherever any of its fine pixels is.
pub fn downsample_mask_max(mask: &Mask, factor: usize) -> Result<Mask> {
    let (dims, data) = reduce_blocks(mask.values(), 1, mask.dims(), factor, |b| {
        b.iter().copied().fold(0.0, f64::max)
    })?;
    Ok(Mask::from_clamped(dims, data))
}
