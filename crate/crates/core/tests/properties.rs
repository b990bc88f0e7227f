use flowweld::flow::{
    apply_visibility, apply_visibility_adjoint, upsample_flow, warp, warp_adjoint, warp_mask, RatioConvention,
};
use flowweld::formats::{quantize, read_flo, read_pnm, write_flo, write_pnm};
use flowweld::losses::{consistency_loss, nipr_loss, nipr_preserve, so_loss, ssim, tv_loss, RatioPair, Reduction};
use flowweld::{FlowField, Image, Mask, Raster};
use proptest::prelude::*;

fn dims() -> impl Strategy<Value = (usize, usize)> {
    (1usize..=9, 1usize..=9)
}

fn flow_strategy() -> impl Strategy<Value = FlowField> {
    dims().prop_flat_map(|(h, w)| {
        prop::collection::vec(-3.0f64..3.0, 2 * h * w).prop_map(move |d| FlowField::new(h, w, d).unwrap())
    })
}

fn image_strategy(channels: usize) -> impl Strategy<Value = Image> {
    dims().prop_flat_map(move |(h, w)| {
        prop::collection::vec(0.0f64..=1.0, channels * h * w)
            .prop_map(move |d| Image::new(channels, h, w, d).unwrap())
    })
}

fn transpose(f: &FlowField) -> FlowField {
    FlowField::from_fn(f.width(), f.height(), |y, x| {
        let (dx, dy) = f.get(x, y);
        (dy, dx)
    })
    .unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn zero_flow_warp_is_bit_identical(img in image_strategy(3)) {
        let out = warp(&img, &FlowField::zeros(img.height(), img.width())).unwrap();
        prop_assert_eq!(out, img);
    }

    #[test]
    fn full_occlusion_is_exactly_zero(img in image_strategy(3), seed in any::<u64>()) {
        let (h, w) = (img.height(), img.width());
        let flow = FlowField::from_fn(h, w, |y, x| {
            let t = (seed.wrapping_add((y * w + x) as u64) % 997) as f64 / 997.0;
            (t - 0.5, 0.5 - t)
        }).unwrap();
        let ones = Mask::ones(h, w);
        let warped = warp(&img, &flow).unwrap();
        let out = apply_visibility(&warped, &ones).unwrap();
        prop_assert!(out.values().iter().all(|v| *v == 0.0));
        let cot = vec![1.0; out.values().len()];
        let (d_warped, _) = apply_visibility_adjoint(&warped, &ones, &cot).unwrap();
        let adj = warp_adjoint(&img, &flow, &d_warped).unwrap();
        prop_assert!(adj.flow.iter().all(|g| *g == 0.0));
    }

    #[test]
    fn second_difference_vanishes_on_affine_flows(
        (h, w) in dims(),
        a in prop::array::uniform4(-2.0f64..2.0),
        b in prop::array::uniform2(-3.0f64..3.0),
    ) {
        let flow = FlowField::from_fn(h, w, |y, x| {
            let (y, x) = (y as f64, x as f64);
            (a[0] * x + a[1] * y + b[0], a[2] * x + a[3] * y + b[1])
        }).unwrap();
        prop_assert!(so_loss(&flow, Reduction::Sum).value < 1e-9);
    }

    #[test]
    fn nipr_is_so_plus_preserve(flow in flow_strategy(), rv in 0.2f64..3.0, rh in 0.2f64..3.0) {
        let r = RatioPair::new(rv, rh, RatioConvention::Sampling).unwrap();
        for red in [Reduction::Sum, Reduction::Mean] {
            let total = nipr_loss(&flow, &r, None, red).unwrap();
            let so = so_loss(&flow, red).value;
            let keep = nipr_preserve(&flow, &r, None, red).unwrap().value;
            prop_assert_eq!(total.value, so + keep);
            prop_assert_eq!(total.term("so"), Some(so));
            prop_assert_eq!(total.term("preserve"), Some(keep));
        }
    }

    #[test]
    fn losses_are_transpose_invariant(flow in flow_strategy(), rv in 0.2f64..3.0, rh in 0.2f64..3.0) {
        let t = transpose(&flow);
        let r = RatioPair::new(rv, rh, RatioConvention::Sampling).unwrap();
        let rt = RatioPair::new(rh, rv, RatioConvention::Sampling).unwrap();
        let close = |a: f64, b: f64| (a - b).abs() <= 1e-12 * (1.0 + a.abs());
        prop_assert!(close(so_loss(&flow, Reduction::Sum).value, so_loss(&t, Reduction::Sum).value));
        prop_assert!(close(tv_loss(&flow, Reduction::Sum).value, tv_loss(&t, Reduction::Sum).value));
        let a = nipr_preserve(&flow, &r, None, Reduction::Sum).unwrap().value;
        let b = nipr_preserve(&t, &rt, None, Reduction::Sum).unwrap().value;
        prop_assert!(close(a, b), "{} vs {}", a, b);
    }

    #[test]
    fn smoothness_terms_are_non_negative(flow in flow_strategy()) {
        prop_assert!(so_loss(&flow, Reduction::Mean).value >= 0.0);
        prop_assert!(tv_loss(&flow, Reduction::Mean).value >= 0.0);
    }

    #[test]
    fn zero_preserve_iff_every_spacing_matches(
        (h, w) in (2usize..=7, 2usize..=7),
        ky in 2u32..20,
        kx in 2u32..20,
    ) {
        // Dyadic spacings keep the mapped positions exact, so every D equals r bit for bit.
        let (sy, sx) = (ky as f64 / 8.0, kx as f64 / 8.0);
        let flow = FlowField::from_fn(h, w, |y, x| (x as f64 * (sx - 1.0), y as f64 * (sy - 1.0))).unwrap();
        let exact = RatioPair::new(sy, sx, RatioConvention::Sampling).unwrap();
        prop_assert!(nipr_preserve(&flow, &exact, None, Reduction::Sum).unwrap().value < 1e-9);
        let off = RatioPair::new(sy + 0.1, sx, RatioConvention::Sampling).unwrap();
        prop_assert!(nipr_preserve(&flow, &off, None, Reduction::Sum).unwrap().value > 0.05);
    }

    #[test]
    fn same_flow_is_consistent(flow in flow_strategy(), seed in 0u64..1000) {
        let (h, w) = (flow.height(), flow.width());
        let mask = Mask::from_fn(h, w, |y, x| ((y * 7 + x * 3) as u64 + seed) as f64 % 5.0 / 4.0).unwrap();
        let m = warp_mask(&mask, &flow).unwrap();
        prop_assert_eq!(consistency_loss(&m, &m.clone()).unwrap().value, 0.0);
    }

    #[test]
    fn upsampling_doubles_constant_flows((h, w) in dims(), dx in -3.0f64..3.0, dy in -3.0f64..3.0) {
        let up = upsample_flow(&FlowField::constant(h, w, dx, dy).unwrap());
        prop_assert_eq!((up.height(), up.width()), (2 * h, 2 * w));
        for y in 0..2 * h {
            for x in 0..2 * w {
                let (ux, uy) = up.get(y, x);
                prop_assert!((ux - 2.0 * dx).abs() < 1e-12 && (uy - 2.0 * dy).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn pnm_round_trip_is_idempotent(img in image_strategy(3), gray in image_strategy(1)) {
        for im in [img, gray] {
            let mut bytes = Vec::new();
            write_pnm(&mut bytes, &im).unwrap();
            let back = read_pnm(&mut bytes.as_slice()).unwrap();
            for (a, b) in im.values().iter().zip(back.values()) {
                prop_assert_eq!(*b, quantize(*a) as f64 / 255.0);
            }
            let mut again = Vec::new();
            write_pnm(&mut again, &back).unwrap();
            prop_assert_eq!(&again, &bytes);
            prop_assert_eq!(read_pnm(&mut again.as_slice()).unwrap(), back);
        }
    }

    #[test]
    fn flo_round_trip_is_exact_on_f32_values(flow in flow_strategy()) {
        let f32_flow = FlowField::new(
            flow.height(),
            flow.width(),
            flow.as_slice().iter().map(|v| *v as f32 as f64).collect(),
        ).unwrap();
        let mut bytes = Vec::new();
        write_flo(&mut bytes, &f32_flow).unwrap();
        prop_assert_eq!(bytes.len(), 12 + 8 * flow.height() * flow.width());
        prop_assert_eq!(read_flo(&mut bytes.as_slice()).unwrap(), f32_flow);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn ssim_of_identical_images_is_one(data in prop::collection::vec(0.0f64..=1.0, 3 * 12 * 14)) {
        let img = Image::new(3, 12, 14, data).unwrap();
        prop_assert!((ssim(&img, &img).unwrap() - 1.0).abs() < 1e-12);
    }
}
