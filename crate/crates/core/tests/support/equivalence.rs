//! Runs every loss against the naive enumerations on seeded random flows.

#![allow(dead_code)]

use flowweld::flow::{warp, warp_mask, RatioConvention};
use flowweld::losses::{
    bce_loss, consistency_loss, integrity_violation, l1_loss, nipr_loss, nipr_preserve, so_loss, tv_loss, RatioPair,
    Reduction,
};
use flowweld::{FlowField, Image, Mask, Raster};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::naive;

#[derive(Debug, Default)]
pub struct Summary {
    pub cases: usize,
    pub comparisons: usize,
    pub max_error: f64,
    /// Operation and case of the largest error.
    pub worst: String,
}

impl Summary {
    fn record(&mut self, op: &str, case: usize, ours: f64, reference: f64) {
        let e = (ours - reference).abs();
        self.comparisons += 1;
        if e > self.max_error || self.worst.is_empty() || e.is_nan() {
            self.max_error = if e.is_nan() { f64::INFINITY } else { e.max(self.max_error) };
            self.worst = format!("{op} case {case}");
        }
    }
}

fn grid(h: usize, w: usize, v: &[f64]) -> Vec<Vec<f64>> {
    (0..h).map(|y| v[y * w..(y + 1) * w].to_vec()).collect()
}

/// Draws a flow: continuous, integer-valued (lands exactly on kinks) or zero.
fn random_flow(rng: &mut ChaCha8Rng, h: usize, w: usize, case: usize) -> Vec<f64> {
    (0..2 * h * w)
        .map(|_| match case % 4 {
            0 | 1 => rng.gen_range(-2.5..2.5),
            2 => rng.gen_range(-2i32..=2) as f64,
            _ => 0.0,
        })
        .collect()
}

pub fn run(cases: usize, seed: u64) -> Summary {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut s = Summary::default();
    for case in 0..cases {
        let (h, w) = (rng.gen_range(1..=8), rng.gen_range(1..=8));
        let data = random_flow(&mut rng, h, w, case);
        let flow = FlowField::new(h, w, data.clone()).unwrap();
        let f = naive::field(h, w, &data);
        let (rv, rh) = if case % 5 == 0 {
            (1.0, 1.0)
        } else {
            (rng.gen_range(0.25..3.0), rng.gen_range(0.25..3.0))
        };
        let r = RatioPair::new(rv, rh, RatioConvention::Sampling).unwrap();
        let region_v: Vec<f64> = (0..h * w).map(|_| if rng.gen_bool(0.6) { 1.0 } else { 0.0 }).collect();
        let region = Mask::new(h, w, region_v.clone()).unwrap();
        let region_g = grid(h, w, &region_v);

        let so = so_loss(&flow, Reduction::Sum).value;
        s.record("so", case, so, naive::so_sum(&f));
        s.record("tv", case, tv_loss(&flow, Reduction::Sum).value, naive::tv_sum(&f));
        let (keep, _) = naive::preserve_sum(&f, rv, rh, None);
        s.record("nipr_preserve", case, nipr_preserve(&flow, &r, None, Reduction::Sum).unwrap().value, keep);
        let (keep_r, n_r) = naive::preserve_sum(&f, rv, rh, Some(&region_g));
        s.record(
            "nipr_preserve(region)",
            case,
            nipr_preserve(&flow, &r, Some(&region), Reduction::Sum).unwrap().value,
            keep_r,
        );
        s.record(
            "nipr",
            case,
            nipr_loss(&flow, &r, None, Reduction::Sum).unwrap().value,
            naive::so_sum(&f) + keep,
        );
        if region.count_above(0.5) > 0 {
            let ours = integrity_violation(&flow, &r, &region).unwrap();
            let reference = if n_r == 0 { 0.0 } else { keep_r / n_r as f64 };
            s.record("integrity_violation", case, ours, reference);
        }

        let a: Vec<f64> = (0..h * w).map(|_| rng.gen_range(0.0..1.0)).collect();
        let b: Vec<f64> = (0..h * w).map(|_| rng.gen_range(0.0..1.0)).collect();
        let (ma, mb) = (Mask::new(h, w, a.clone()).unwrap(), Mask::new(h, w, b.clone()).unwrap());
        s.record("l1", case, l1_loss(&ma, &mb, Reduction::Sum).unwrap().value, naive::l1_sum(&a, &b));
        let t: Vec<f64> = b.iter().map(|v| v.round()).collect();
        s.record(
            "bce",
            case,
            bce_loss(&ma, &Mask::new(h, w, t.clone()).unwrap()).unwrap().value,
            naive::bce_mean(&a, &t),
        );

        let ours = warp(&Image::new(1, h, w, a.clone()).unwrap(), &flow).unwrap();
        let reference: Vec<f64> = naive::warp_plane(&grid(h, w, &a), &f).concat();
        s.record("warp", case, naive::l1_sum(ours.values(), &reference), 0.0);

        let other = naive::field(h, w, &random_flow(&mut rng, h, w, case + 1));
        let other_flow = FlowField::new(h, w, other.iter().flatten().flat_map(|&(dx, dy)| [dx, dy]).collect()).unwrap();
        let local = warp_mask(&ma, &flow).unwrap();
        let global = warp_mask(&ma, &other_flow).unwrap();
        let ref_local = naive::warp_plane(&grid(h, w, &a), &f).concat();
        let ref_global = naive::warp_plane(&grid(h, w, &a), &other).concat();
        s.record(
            "consistency",
            case,
            consistency_loss(&local, &global).unwrap().value,
            naive::l1_sum(&ref_local, &ref_global) / (h * w) as f64,
        );
        s.cases += 1;
    }
    s
}
