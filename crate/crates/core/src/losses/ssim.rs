//! Mean structural similarity with an 11x11 Gaussian window (σ = 1.5),
//! `K1 = 0.01`, `K2 = 0.03` and unit dynamic range, evaluated at every
//! position where the window fits and averaged over channels.

use crate::error::{Error, Result};
use crate::flow::Image;

pub const SSIM_WINDOW: usize = 11;
const SIGMA: f64 = 1.5;
const C1: f64 = 0.01 * 0.01;
const C2: f64 = 0.03 * 0.03;

fn gaussian_kernel() -> [f64; SSIM_WINDOW] {
    let mut k = [0.0; SSIM_WINDOW];
    let half = (SSIM_WINDOW / 2) as f64;
    for (i, v) in k.iter_mut().enumerate() {
        let d = i as f64 - half;
        *v = (-(d * d) / (2.0 * SIGMA * SIGMA)).exp();
    }
    let total: f64 = k.iter().sum();
    k.iter_mut().for_each(|v| *v /= total);
    k
}

/// Separable "valid" filtering: output is `(h - 10) x (w - 10)`.
fn filter_valid(plane: &[f64], h: usize, w: usize, k: &[f64; SSIM_WINDOW]) -> Vec<f64> {
    let (oh, ow) = (h - SSIM_WINDOW + 1, w - SSIM_WINDOW + 1);
    let mut rows = vec![0.0; h * ow];
    for y in 0..h {
        for x in 0..ow {
            rows[y * ow + x] = (0..SSIM_WINDOW).map(|i| k[i] * plane[y * w + x + i]).sum();
        }
    }
    let mut out = vec![0.0; oh * ow];
    for y in 0..oh {
        for x in 0..ow {
            out[y * ow + x] = (0..SSIM_WINDOW).map(|i| k[i] * rows[(y + i) * ow + x]).sum();
        }
    }
    out
}

pub fn ssim(a: &Image, b: &Image) -> Result<f64> {
    if a.dims() != b.dims() || a.channels() != b.channels() {
        return Err(Error::shape(
            "ssim operands",
            (a.channels(), a.dims()),
            (b.channels(), b.dims()),
        ));
    }
    let (h, w) = (a.height(), a.width());
    if h < SSIM_WINDOW || w < SSIM_WINDOW {
        return Err(Error::WindowTooLarge {
            height: h,
            width: w,
            window: SSIM_WINDOW,
        });
    }
    let k = gaussian_kernel();
    let mut total = 0.0;
    for c in 0..a.channels() {
        let (pa, pb) = (a.plane(c), b.plane(c));
        let sq = |p: &[f64], q: &[f64]| p.iter().zip(q).map(|(x, y)| x * y).collect::<Vec<_>>();
        let mu_a = filter_valid(pa, h, w, &k);
        let mu_b = filter_valid(pb, h, w, &k);
        let aa = filter_valid(&sq(pa, pa), h, w, &k);
        let bb = filter_valid(&sq(pb, pb), h, w, &k);
        let ab = filter_valid(&sq(pa, pb), h, w, &k);
        let mut acc = 0.0;
        for i in 0..mu_a.len() {
            let (ma, mb) = (mu_a[i], mu_b[i]);
            let va = aa[i] - ma * ma;
            let vb = bb[i] - mb * mb;
            let cov = ab[i] - ma * mb;
            acc += ((2.0 * ma * mb + C1) * (2.0 * cov + C2)) / ((ma * ma + mb * mb + C1) * (va + vb + C2));
        }
        total += acc / mu_a.len() as f64;
    }
    Ok(total / a.channels() as f64)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identical_images_score_one() {
        let img = Image::from_fn(3, 16, 13, |c, y, x| (((c + y * x) % 5) as f64) / 4.0).unwrap();
        assert!((ssim(&img, &img).unwrap() - 1.0).abs() < 1e-12);
        let c = Image::filled(1, 12, 12, 0.37).unwrap();
        assert!((ssim(&c, &c).unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn black_vs_white() {
        let z = Image::zeros(1, 12, 14);
        let o = Image::filled(1, 12, 14, 1.0).unwrap();
        let expected = 1e-4 / 1.0001;
        assert!((ssim(&z, &o).unwrap() - expected).abs() < 1e-12);
    }

    #[test]
    fn small_images_are_rejected() {
        let z = Image::zeros(1, 10, 20);
        assert!(matches!(ssim(&z, &z), Err(Error::WindowTooLarge { .. })));
    }
}
