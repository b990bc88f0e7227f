use super::{sign, LossValue, Reduction};
use crate::error::{Error, Result};
use crate::flow::{Mask, Raster};

/// Clamp applied to predictions before taking logarithms.
pub const BCE_EPSILON: f64 = 1e-7;

/// `|a - b|` reduced over every element; gradient is w.r.t. `a`.
pub fn l1_loss<R: Raster>(a: &R, b: &R, reduction: Reduction) -> Result<LossValue> {
    if a.dims() != b.dims() || a.channels() != b.channels() {
        return Err(Error::shape(
            "l1 operands",
            (a.channels(), a.dims()),
            (b.channels(), b.dims()),
        ));
    }
    let (av, bv) = (a.values(), b.values());
    let scale = reduction.scale(av.len());
    let mut sum = 0.0;
    let gradient = av
        .iter()
        .zip(bv)
        .map(|(x, y)| {
            let d = x - y;
            sum += d.abs();
            sign(d) * scale
        })
        .collect();
    Ok(LossValue::new(sum * scale, gradient))
}

/// Mean binary cross entropy of `pred` against `target`; gradient w.r.t. `pred`.
///
/// Targets are normally binary but soft targets in `[0, 1]` are accepted.
pub fn bce_loss(pred: &Mask, target: &Mask) -> Result<LossValue> {
    if pred.dims() != target.dims() {
        return Err(Error::shape("bce operands", pred.dims(), target.dims()));
    }
    let n = pred.values().len();
    let scale = Reduction::Mean.scale(n);
    let mut sum = 0.0;
    let gradient = pred
        .values()
        .iter()
        .zip(target.values())
        .map(|(&p, &t)| {
            let pc = p.clamp(BCE_EPSILON, 1.0 - BCE_EPSILON);
            sum += -(t * pc.ln() + (1.0 - t) * (1.0 - pc).ln());
            if p < BCE_EPSILON || p > 1.0 - BCE_EPSILON {
                0.0
            } else {
                (-t / pc + (1.0 - t) / (1.0 - pc)) * scale
            }
        })
        .collect();
    Ok(LossValue::new(sum * scale, gradient))
}

/// Mean absolute difference between a mask warped by the local flow and the
/// same mask warped by the global flow. Gradient is w.r.t. `mask_local`.
pub fn consistency_loss(mask_local: &Mask, mask_global: &Mask) -> Result<LossValue> {
    l1_loss(mask_local, mask_global, Reduction::Mean)
}
