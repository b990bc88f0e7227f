use flowweld::autodiff::{fd_gradient, grad_check, FnScalar, GradCheckConfig};
use flowweld::flow::warp_mask;
use flowweld::optim::{evaluate_global, evaluate_local, Level, LossVariant, PyramidConfig, VisibilityMode};
use flowweld::synth::{default_hand_band, make_hand_occlusion_scenario, make_tuckin_scenario, Garment};
use flowweld::{FlowField, Mask};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const H: f64 = 1e-5;

/// Flags coordinates where the two one-sided slopes disagree, i.e. a kink
/// lies within `h` of the point.
fn one_sided_kink(value: &dyn Fn(&[f64]) -> f64, x: &[f64], i: usize) -> bool {
    let mut p = x.to_vec();
    let f0 = value(&p);
    p[i] = x[i] + H;
    let right = (value(&p) - f0) / H;
    p[i] = x[i] - H;
    let left = (f0 - value(&p)) / H;
    (right - left).abs() > 1e-4 * (1.0 + right.abs().max(left.abs()))
}

fn random_flow(rng: &mut ChaCha8Rng, h: usize, w: usize) -> FlowField {
    FlowField::new(h, w, (0..2 * h * w).map(|_| rng.gen_range(-1.5..1.5)).collect()).unwrap()
}

#[test]
fn local_objective_gradient_matches_differences() {
    let g = Garment::centered(64, 48).unwrap();
    let scenes = [
        make_tuckin_scenario(&g, 0.25).unwrap(),
        make_hand_occlusion_scenario(&g, default_hand_band(&g)).unwrap(),
    ];
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    for scene in &scenes {
        for variant in [LossVariant::Nipr, LossVariant::So, LossVariant::Tv] {
            let cfg = PyramidConfig {
                loss_variant: variant,
                ..PyramidConfig::default()
            };
            let level = Level::build(scene, 4, &cfg).unwrap();
            let d = level.dims();
            let global = warp_mask(&level.source_mask, &random_flow(&mut rng, d.height, d.width)).unwrap();
            let predicted = Mask::from_fn(d.height, d.width, |_, _| rng.gen_range(0.05..0.95)).unwrap();
            let start = random_flow(&mut rng, d.height, d.width);
            let flow_of = |x: &[f64]| FlowField::new(d.height, d.width, x.to_vec()).unwrap();
            let eval = |x: &[f64]| evaluate_local(&level, &flow_of(x), &predicted, Some(&global), &cfg).unwrap();
            let value = |x: &[f64]| eval(x).terms.total;
            let f = FnScalar::new(value, |x: &[f64]| eval(x).flow_grad);
            let check = GradCheckConfig { samples: 60, ..Default::default() };
            let flat = eval(start.as_slice()).flow_grad;
            let report = grad_check(&f, start.as_slice(), &check, |x, i| {
                if flat[i] == 0.0 {
                    return Some("exactly flat");
                }
                one_sided_kink(&value, x, i).then_some("one-sided slopes differ")
            })
            .unwrap();
            assert!(report.points_checked >= 30, "{variant}: only {} points", report.points_checked);
            assert!(report.passed(), "{variant}: {report:?}");
        }
    }
}

#[test]
fn fit_mode_visibility_gradient_matches_differences() {
    let g = Garment::centered(64, 48).unwrap();
    let scene = make_hand_occlusion_scenario(&g, default_hand_band(&g)).unwrap();
    let cfg = PyramidConfig {
        visibility: VisibilityMode::Fit,
        ..PyramidConfig::default()
    };
    let level = Level::build(&scene, 4, &cfg).unwrap();
    let d = level.dims();
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let flow = random_flow(&mut rng, d.height, d.width);
    let global = warp_mask(&level.source_mask, &flow).unwrap();
    let start: Vec<f64> = (0..d.len()).map(|_| rng.gen_range(0.05..0.95)).collect();
    let mask_of = |x: &[f64]| Mask::new(d.height, d.width, x.to_vec()).unwrap();
    let eval = |x: &[f64]| evaluate_local(&level, &flow, &mask_of(x), Some(&global), &cfg).unwrap();
    let value = |x: &[f64]| eval(x).terms.total;
    let f = FnScalar::new(value, |x: &[f64]| eval(x).visibility_grad);
    let report = grad_check(&f, &start, &GradCheckConfig::default(), |x, i| {
        one_sided_kink(&value, x, i).then_some("one-sided slopes differ")
    })
    .unwrap();
    assert!(report.points_checked >= 50, "only {}", report.points_checked);
    assert!(report.passed(), "{report:?}");
    assert!(eval(&start).terms.bce > 0.0);
}

#[test]
fn global_objective_gradient_matches_differences() {
    let scene = make_tuckin_scenario(&Garment::centered(64, 48).unwrap(), 0.25).unwrap();
    let cfg = PyramidConfig::default();
    let level = Level::build(&scene, 2, &cfg).unwrap();
    let d = level.dims();
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let start = random_flow(&mut rng, d.height, d.width);
    let flow_of = |x: &[f64]| FlowField::new(d.height, d.width, x.to_vec()).unwrap();
    let value = |x: &[f64]| evaluate_global(&level, &flow_of(x), &cfg).unwrap().0.total;
    let f = FnScalar::new(value, |x: &[f64]| evaluate_global(&level, &flow_of(x), &cfg).unwrap().1);
    let flat = evaluate_global(&level, &start, &cfg).unwrap().1;
    let report = grad_check(&f, start.as_slice(), &GradCheckConfig::default(), |x, i| {
        if flat[i] == 0.0 {
            return Some("exactly flat");
        }
        one_sided_kink(&value, x, i).then_some("one-sided slopes differ")
    })
    .unwrap();
    assert!(report.points_checked >= 50);
    assert!(report.passed(), "{report:?}");
}

#[test]
fn doubled_adjoint_is_caught() {
    let f = FnScalar::new(|x: &[f64]| x.iter().map(|v| v.sin()).sum(), |x: &[f64]| {
        x.iter().map(|v| 2.0 * v.cos()).collect()
    });
    let x: Vec<f64> = (0..20).map(|i| i as f64 * 0.1).collect();
    let r = grad_check(&f, &x, &GradCheckConfig { samples: 10, ..Default::default() }, |_, _| None).unwrap();
    assert!(!r.passed());
    assert!((r.max_rel_error - 0.5).abs() < 1e-6);
    assert!((fd_gradient(&f, &x, 3, H).unwrap() - 0.3f64.cos()).abs() < 1e-9);
}
