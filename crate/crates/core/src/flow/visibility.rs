//! Occlusion masking of warped rasters.

use super::raster::{Image, Mask, Raster};
use crate::error::{Error, Result};

/// `warped * (1 - vis)` per channel.
pub fn apply_visibility(warped: &Image, vis: &Mask) -> Result<Image> {
    warped.multiply_mask(&vis.complement())
}

/// Adjoint of [`apply_visibility`].
///
/// Returns `(d/dwarped, d/dvis)`. The first factor is `cotangent * (1 - vis)`,
/// so it is exactly zero wherever `vis == 1`.
pub fn apply_visibility_adjoint(warped: &Image, vis: &Mask, cotangent: &[f64]) -> Result<(Vec<f64>, Vec<f64>)> {
    if warped.dims() != vis.dims() {
        return Err(Error::shape("image vs visibility", warped.dims(), vis.dims()));
    }
    let n = vis.dims().len();
    if cotangent.len() != warped.channels() * n {
        return Err(Error::shape("visibility cotangent", cotangent.len(), warped.channels() * n));
    }
    let v = vis.values();
    let w = warped.values();
    let d_warped = cotangent
        .iter()
        .enumerate()
        .map(|(i, g)| g * (1.0 - v[i % n]))
        .collect();
    let mut d_vis = vec![0.0; n];
    for c in 0..warped.channels() {
        for i in 0..n {
            d_vis[i] -= cotangent[c * n + i] * w[c * n + i];
        }
    }
    Ok((d_warped, d_vis))
}

/// Union of predicted and hair/bottom occluders, as the elementwise maximum.
pub fn combine_visibility(m_pred: &Mask, m_hb: &Mask) -> Result<Mask> {
    if m_pred.dims() != m_hb.dims() {
        return Err(Error::shape("visibility masks", m_pred.dims(), m_hb.dims()));
    }
    let data = m_pred
        .values()
        .iter()
        .zip(m_hb.values())
        .map(|(a, b)| a.max(*b))
        .collect();
    Mask::new(m_pred.height(), m_pred.width(), data)
}

/// Routes a cotangent on the combined mask back to `m_pred`.
///
/// Gradient flows to `m_pred` where it attains the maximum (ties included).
pub fn combine_visibility_adjoint(m_pred: &Mask, m_hb: &Mask, cotangent: &[f64]) -> Vec<f64> {
    m_pred
        .values()
        .iter()
        .zip(m_hb.values())
        .zip(cotangent)
        .map(|((p, h), g)| if p >= h { *g } else { 0.0 })
        .collect()
}
