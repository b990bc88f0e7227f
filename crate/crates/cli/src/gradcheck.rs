//! Gradient certification of every operation with an analytic adjoint.

use flowweld::autodiff::{grad_check, FnScalar, GradCheckConfig, GradCheckReport};
use flowweld::flow::{
    apply_visibility, apply_visibility_adjoint, warp, warp_adjoint, warp_flow_adjoint, warp_mask, RatioConvention,
};
use flowweld::losses::{
    bce_loss, consistency_loss, l1_loss, nipr_loss, nipr_preserve, preserve_kink_gap, so_kink_gap, so_loss,
    tv_kink_gap, tv_loss, RatioPair, Reduction,
};
use flowweld::{FlowField, Image, Mask, Raster, Result};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

pub const OPERATIONS: [&str; 9] = [
    "warp",
    "apply_visibility",
    "l1",
    "bce",
    "so",
    "nipr_preserve",
    "nipr",
    "consistency",
    "tv",
];

/// Side of the square rasters the checks run on.
const SIDE: usize = 12;
const KINK_GAP: f64 = 1e-2;

#[derive(Debug, Clone, Serialize)]
pub struct OpResult {
    pub op: &'static str,
    pub report: GradCheckReport,
    /// Enough points survived exclusion and every one was within tolerance.
    pub passed: bool,
}

fn uniform(rng: &mut ChaCha8Rng, n: usize, lo: f64, hi: f64) -> Vec<f64> {
    (0..n).map(|_| rng.gen_range(lo..hi)).collect()
}

fn flow_of(x: &[f64]) -> FlowField {
    FlowField::new(SIDE, SIDE, x.to_vec()).expect("finite probe")
}

fn image_of(channels: usize, x: &[f64]) -> Image {
    Image::new(channels, SIDE, SIDE, x.to_vec()).expect("probe stays in range")
}

fn mask_of(x: &[f64]) -> Mask {
    Mask::new(SIDE, SIDE, x.to_vec()).expect("probe stays in range")
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Distance of flow coordinate `i`'s sample position to the nearest grid line.
fn grid_gap(flow: &[f64], i: usize) -> f64 {
    let pixel = i / 2;
    let pos = if i % 2 == 0 { pixel % SIDE } else { pixel / SIDE } as f64;
    let s = pos + flow[i];
    (s - s.round()).abs()
}

fn run<V, G, E>(value: V, gradient: G, point: &[f64], config: &GradCheckConfig, fault: bool, exclude: E) -> Result<GradCheckReport>
where
    V: Fn(&[f64]) -> f64 + Sync,
    G: Fn(&[f64]) -> Vec<f64> + Sync,
    E: Fn(&[f64], usize) -> Option<&'static str>,
{
    let scale = if fault { 2.0 } else { 1.0 };
    let f = FnScalar::new(value, move |x: &[f64]| {
        let mut g = gradient(x);
        for v in &mut g {
            *v *= scale;
        }
        g
    });
    grad_check(&f, point, config, exclude)
}

/// Checks one operation on seeded random inputs. With `fault`, the
/// analytic gradient is doubled before comparison.
pub fn check_operation(op: &str, config: &GradCheckConfig, fault: bool) -> Result<GradCheckReport> {
    let salt = OPERATIONS.iter().position(|o| *o == op).unwrap_or(OPERATIONS.len()) as u64;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed.wrapping_mul(0x9E37_79B9).wrapping_add(salt));
    let n = SIDE * SIDE;
    match op {
        "warp" => {
            let flow = uniform(&mut rng, 2 * n, -1.5, 1.5);
            let image = uniform(&mut rng, 3 * n, 0.05, 0.95);
            let weights = uniform(&mut rng, 3 * n, -1.0, 1.0);
            let point: Vec<f64> = flow.iter().chain(&image).copied().collect();
            let split = 2 * n;
            run(
                |x| dot(warp(&image_of(3, &x[split..]), &flow_of(&x[..split])).unwrap().values(), &weights),
                |x| {
                    let adj = warp_adjoint(&image_of(3, &x[split..]), &flow_of(&x[..split]), &weights).unwrap();
                    adj.flow.into_iter().chain(adj.source).collect()
                },
                &point,
                config,
                fault,
                |x, i| (i < split && grid_gap(x, i) < KINK_GAP).then_some("bilinear cell boundary"),
            )
        }
        "apply_visibility" => {
            let warped = uniform(&mut rng, 3 * n, 0.05, 0.95);
            let vis = uniform(&mut rng, n, 0.05, 0.95);
            let weights = uniform(&mut rng, 3 * n, -1.0, 1.0);
            let point: Vec<f64> = warped.iter().chain(&vis).copied().collect();
            let split = 3 * n;
            run(
                |x| dot(apply_visibility(&image_of(3, &x[..split]), &mask_of(&x[split..])).unwrap().values(), &weights),
                |x| {
                    let (dw, dv) = apply_visibility_adjoint(&image_of(3, &x[..split]), &mask_of(&x[split..]), &weights).unwrap();
                    dw.into_iter().chain(dv).collect()
                },
                &point,
                config,
                fault,
                |_, _| None,
            )
        }
        "l1" => {
            let a = uniform(&mut rng, 3 * n, 0.05, 0.95);
            let b = image_of(3, &uniform(&mut rng, 3 * n, 0.05, 0.95));
            let bv = b.values().to_vec();
            run(
                |x| l1_loss(&image_of(3, x), &b, Reduction::Mean).unwrap().value,
                |x| l1_loss(&image_of(3, x), &b, Reduction::Mean).unwrap().gradient,
                &a,
                config,
                fault,
                |x, i| ((x[i] - bv[i]).abs() < KINK_GAP).then_some("l1 kink"),
            )
        }
        "bce" => {
            let pred = uniform(&mut rng, n, 0.05, 0.95);
            let target = mask_of(&(0..n).map(|_| if rng.gen_bool(0.5) { 1.0 } else { 0.0 }).collect::<Vec<_>>());
            run(
                |x| bce_loss(&mask_of(x), &target).unwrap().value,
                |x| bce_loss(&mask_of(x), &target).unwrap().gradient,
                &pred,
                config,
                fault,
                |_, _| None,
            )
        }
        "so" | "tv" | "nipr_preserve" | "nipr" => {
            let flow = uniform(&mut rng, 2 * n, -1.5, 1.5);
            let r = RatioPair::new(rng.gen_range(0.5..2.0), rng.gen_range(0.5..2.0), RatioConvention::Sampling)?;
            let op: &'static str = OPERATIONS.iter().find(|o| **o == op).expect("listed");
            let eval = move |x: &[f64]| {
                let f = flow_of(x);
                match op {
                    "so" => so_loss(&f, Reduction::Mean),
                    "tv" => tv_loss(&f, Reduction::Mean),
                    "nipr_preserve" => nipr_preserve(&f, &r, None, Reduction::Mean).unwrap(),
                    _ => nipr_loss(&f, &r, None, Reduction::Mean).unwrap(),
                }
            };
            run(
                |x| eval(x).value,
                |x| eval(x).gradient,
                &flow,
                config,
                fault,
                move |x, i| {
                    let f = flow_of(x);
                    if eval(x).gradient[i] == 0.0 {
                        return Some("signs cancel to an exactly flat slope");
                    }
                    let so = || so_kink_gap(&f, i) < KINK_GAP;
                    let preserve = || preserve_kink_gap(&f, &r, None, i) < KINK_GAP;
                    match op {
                        "so" => so().then_some("second-difference kink"),
                        "tv" => (tv_kink_gap(&f, i) < KINK_GAP).then_some("tv kink"),
                        "nipr_preserve" => preserve().then_some("preserve kink"),
                        _ if so() => Some("second-difference kink"),
                        _ => preserve().then_some("preserve kink"),
                    }
                },
            )
        }
        "consistency" => {
            let local = uniform(&mut rng, 2 * n, -1.5, 1.5);
            let global = flow_of(&uniform(&mut rng, 2 * n, -1.5, 1.5));
            let mask = mask_of(&uniform(&mut rng, n, 0.0, 1.0));
            let reference = warp_mask(&mask, &global)?;
            let warped = warp_mask(&mask, &flow_of(&local))?;
            run(
                |x| consistency_loss(&warp_mask(&mask, &flow_of(x)).unwrap(), &reference).unwrap().value,
                |x| {
                    let f = flow_of(x);
                    let lv = consistency_loss(&warp_mask(&mask, &f).unwrap(), &reference).unwrap();
                    warp_flow_adjoint(&mask, &f, &lv.gradient).unwrap()
                },
                &local,
                config,
                fault,
                |x, i| {
                    if grid_gap(x, i) < KINK_GAP {
                        Some("bilinear cell boundary")
                    } else if (warped.values()[i / 2] - reference.values()[i / 2]).abs() < KINK_GAP {
                        Some("l1 kink")
                    } else {
                        None
                    }
                },
            )
        }
        other => Err(flowweld::Error::Config(format!(
            "unknown operation `{other}`; expected one of {}",
            OPERATIONS.join(", ")
        ))),
    }
}

/// Runs every operation; `fault` names the one whose adjoint is doubled.
pub fn check_all(config: &GradCheckConfig, fault: Option<&str>) -> Result<Vec<OpResult>> {
    OPERATIONS
        .iter()
        .map(|&op| {
            let report = check_operation(op, config, fault == Some(op))?;
            let passed = report.passed() && report.points_checked >= config.samples;
            Ok(OpResult { op, report, passed })
        })
        .collect()
}

/// Reads `samples`, `h`, `tol` and `seed` from flat `key = value` text.
pub fn parse_config(text: &str) -> Result<GradCheckConfig> {
    let mut cfg = GradCheckConfig::default();
    for (n, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let bad = |msg: String| flowweld::Error::Config(format!("line {}: {msg}", n + 1));
        let (k, v) = line.split_once('=').ok_or_else(|| bad("expected `key = value`".into()))?;
        let (k, v) = (k.trim(), v.trim());
        let num = |e: &dyn std::fmt::Display| bad(format!("`{k}`: {e}"));
        match k {
            "samples" => cfg.samples = v.parse().map_err(|e| num(&e))?,
            "h" => cfg.h = v.parse().map_err(|e| num(&e))?,
            "tol" => cfg.tol = v.parse().map_err(|e| num(&e))?,
            "seed" => cfg.seed = v.parse().map_err(|e| num(&e))?,
            other => return Err(bad(format!("unknown key `{other}`"))),
        }
    }
    Ok(cfg)
}
