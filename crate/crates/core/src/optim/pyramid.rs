//! Coarse-to-fine optimization of the global (mask-only) and local
//! (texture-aware) flows.

use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use super::adam::OptimizerState;
use super::config::{FlowUnits, LossVariant, PyramidConfig, RegionMode, VisibilityMode};
use crate::error::{Error, Result};
use crate::flow::{
    apply_visibility, apply_visibility_adjoint, combine_visibility, combine_visibility_adjoint, downsample_image,
    downsample_mask, downsample_mask_max, upsample_flow, warp, warp_flow_adjoint, warp_mask, Dims, FlowField, Image, Mask, Raster,
};
use crate::losses::{
    bce_loss, consistency_loss, integrity_violation, l1_loss, nipr_loss, so_loss, ssim, tv_loss, LossValue, RatioPair,
    Reduction,
};
use crate::synth::Scene;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Stage {
    Global,
    Local,
}

impl std::fmt::Display for Stage {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Stage::Global => "global",
            Stage::Local => "local",
        })
    }
}

/// Values of the objective's terms at one flow. Terms a stage does not use are 0.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize)]
pub struct LossTerms {
    pub garment_l1: f64,
    pub mask_l1: f64,
    pub bce: f64,
    pub consistency: f64,
    pub regularizer: f64,
    pub total: f64,
}

impl LossTerms {
    pub const NAMES: [&'static str; 6] = ["garment_l1", "mask_l1", "bce", "consistency", "regularizer", "total"];

    pub fn values(&self) -> [f64; 6] {
        [
            self.garment_l1,
            self.mask_l1,
            self.bce,
            self.consistency,
            self.regularizer,
            self.total,
        ]
    }

    /// Weighted sum of the terms under `alpha`, the local objective.
    pub fn weighted(&self, alpha: &[f64; 6]) -> f64 {
        alpha[0] * self.garment_l1
            + alpha[2] * self.mask_l1
            + alpha[3] * self.bce
            + alpha[4] * self.consistency
            + alpha[5] * self.regularizer
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct IterationRecord {
    pub stage: Stage,
    pub scale: usize,
    pub iteration: usize,
    pub terms: LossTerms,
}

/// Terms at the final full-resolution flow plus evaluation metrics.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LossReport {
    pub terms: LossTerms,
    /// Mean preservation penalty over the target garment support; `None`
    /// when a mask is empty.
    pub integrity_violation: Option<f64>,
    /// Output against the target garment; `None` when the raster is smaller
    /// than the SSIM window.
    pub ssim: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct StageResult {
    pub stage: Stage,
    /// Optimized flow of every level, coarsest first.
    pub per_scale_flows: Vec<FlowField>,
    /// Flow each level started from: zero at the coarsest level, the
    /// upsampled previous result elsewhere.
    pub initial_flows: Vec<FlowField>,
    pub flow: FlowField,
    /// Combined occluder mask `M^vis` at full resolution.
    pub visibility: Mask,
    /// Predicted body-part visibility `M'` at full resolution.
    pub predicted_visibility: Mask,
    pub series: Vec<IterationRecord>,
    pub report: LossReport,
    pub warnings: Vec<String>,
    pub elapsed: Duration,
}

/// One pyramid level of a scene.
#[derive(Debug, Clone)]
pub struct Level {
    pub factor: usize,
    pub source: Image,
    pub source_mask: Mask,
    pub target: Image,
    pub target_mask: Mask,
    /// Mask target of the local mask term: target mask minus occluders.
    pub visible_target: Mask,
    /// Body-part visibility target `M'`.
    pub visibility: Mask,
    pub hair_bottom: Mask,
    /// Target garment including occluded parts.
    pub support: Mask,
    /// `None` when a downsampled mask has no pixel above 0.5.
    pub ratio: Option<RatioPair>,
}

impl Level {
    /// Garment rasters and the target support are area-downsampled;
    /// occluders are max-pooled so partly covered coarse pixels count as
    /// covered, and the targets are blanked there.
    pub fn build(scene: &Scene, factor: usize, config: &PyramidConfig) -> Result<Level> {
        let ds = |m: &Mask| downsample_mask(m, factor);
        let source_mask = ds(&scene.source_mask)?;
        let support = ds(&scene.target_support())?;
        let ratio = RatioPair::from_masks(&source_mask, &support, config.ratio_convention).ok();
        let visibility = downsample_mask_max(&scene.visibility, factor)?;
        let hair_bottom = downsample_mask_max(&scene.hair_bottom, factor)?;
        let keep = combine_visibility(&visibility, &hair_bottom)?.complement();
        Ok(Level {
            factor,
            source: downsample_image(&scene.source, factor)?,
            source_mask,
            target: downsample_image(&scene.target, factor)?.multiply_mask(&keep)?,
            target_mask: ds(&scene.target_mask)?,
            visible_target: ds(&scene.target_mask)?.multiply(&keep)?,
            visibility,
            hair_bottom,
            support,
            ratio,
        })
    }

    pub fn dims(&self) -> Dims {
        self.source_mask.dims()
    }

    fn preserve_region(&self, config: &PyramidConfig) -> Option<Mask> {
        match config.region {
            RegionMode::Full => None,
            RegionMode::Garment => Some(self.support.binarize(0.5)),
        }
    }
}

/// Objective value, flow gradient and visibility gradient at one level.
#[derive(Debug, Clone)]
pub struct LocalEval {
    pub terms: LossTerms,
    pub flow_grad: Vec<f64>,
    /// Flow gradient of the weighted garment term alone.
    pub garment_flow_grad: Vec<f64>,
    /// Gradient w.r.t. the predicted visibility `M'`.
    pub visibility_grad: Vec<f64>,
    pub output: Image,
    pub combined_visibility: Mask,
}

fn regularizer(level: &Level, flow: &FlowField, config: &PyramidConfig) -> Result<Option<LossValue>> {
    let reduction = config.reduction;
    Ok(match config.loss_variant {
        LossVariant::Nipr => match &level.ratio {
            Some(r) => Some(nipr_loss(flow, r, level.preserve_region(config).as_ref(), reduction)?),
            None => Some(so_loss(flow, reduction)),
        },
        LossVariant::So => Some(so_loss(flow, reduction)),
        LossVariant::Tv => Some(tv_loss(flow, reduction)),
        LossVariant::None => None,
    })
}

fn axpy(acc: &mut [f64], a: f64, x: &[f64]) {
    if a == 0.0 {
        return;
    }
    for (y, v) in acc.iter_mut().zip(x) {
        *y += a * v;
    }
}

/// Evaluates the local objective.
///
/// `predicted` is `M'`; `global_mask` is the source mask warped by the global
/// flow at this level.
pub fn evaluate_local(
    level: &Level,
    flow: &FlowField,
    predicted: &Mask,
    global_mask: Option<&Mask>,
    config: &PyramidConfig,
) -> Result<LocalEval> {
    let alpha = &config.alpha;
    let dims = level.dims();
    let n = dims.len();
    let vis = if config.occlusion {
        combine_visibility(predicted, &level.hair_bottom)?
    } else {
        Mask::zeros(dims.height, dims.width)
    };
    let keep = vis.complement();

    let warped = warp(&level.source, flow)?;
    let output = apply_visibility(&warped, &vis)?;
    let garment = l1_loss(&output, &level.target, Reduction::Mean)?;
    let (d_warped, d_vis_garment) = apply_visibility_adjoint(&warped, &vis, &garment.gradient)?;
    let mut garment_flow_grad = warp_flow_adjoint(&level.source, flow, &d_warped)?;
    for g in &mut garment_flow_grad {
        *g *= alpha[0];
    }
    let mut flow_grad = garment_flow_grad.clone();
    let mut d_vis: Vec<f64> = d_vis_garment.iter().map(|g| alpha[0] * g).collect();

    let warped_mask = warp_mask(&level.source_mask, flow)?;
    let shown = warped_mask.multiply(&keep)?;
    let mask = l1_loss(&shown, &level.visible_target, Reduction::Mean)?;
    let mut d_warped_mask: Vec<f64> = mask
        .gradient
        .iter()
        .zip(keep.values())
        .map(|(g, k)| alpha[2] * g * k)
        .collect();
    for (i, g) in mask.gradient.iter().enumerate() {
        d_vis[i] -= alpha[2] * g * warped_mask.values()[i];
    }

    let mut bce = 0.0;
    let mut d_pred = vec![0.0; n];
    if config.visibility == VisibilityMode::Fit {
        let lv = bce_loss(predicted, &level.visibility)?;
        bce = lv.value;
        axpy(&mut d_pred, alpha[3], &lv.gradient);
    }

    let mut consistency = 0.0;
    if let Some(gm) = global_mask {
        let lv = consistency_loss(&warped_mask, gm)?;
        consistency = lv.value;
        axpy(&mut d_warped_mask, alpha[4], &lv.gradient);
    }
    let mask_flow_grad = warp_flow_adjoint(&level.source_mask, flow, &d_warped_mask)?;
    axpy(&mut flow_grad, 1.0, &mask_flow_grad);

    let mut reg = 0.0;
    if let Some(lv) = regularizer(level, flow, config)? {
        reg = lv.value;
        axpy(&mut flow_grad, alpha[5], &lv.gradient);
    }

    if config.occlusion {
        let routed = combine_visibility_adjoint(predicted, &level.hair_bottom, &d_vis);
        axpy(&mut d_pred, 1.0, &routed);
    }

    let mut terms = LossTerms {
        garment_l1: garment.value,
        mask_l1: mask.value,
        bce,
        consistency,
        regularizer: reg,
        total: 0.0,
    };
    terms.total = terms.weighted(alpha);
    Ok(LocalEval {
        terms,
        flow_grad,
        garment_flow_grad,
        visibility_grad: d_pred,
        output,
        combined_visibility: vis,
    })
}

/// Global objective: mask L1 against the target mask plus weighted SO.
pub fn evaluate_global(level: &Level, flow: &FlowField, config: &PyramidConfig) -> Result<(LossTerms, Vec<f64>)> {
    let warped_mask = warp_mask(&level.source_mask, flow)?;
    let mask = l1_loss(&warped_mask, &level.target_mask, Reduction::Mean)?;
    let mut grad = warp_flow_adjoint(&level.source_mask, flow, &mask.gradient)?;
    let so = so_loss(flow, Reduction::Mean);
    axpy(&mut grad, config.global_smoothness, &so.gradient);
    let terms = LossTerms {
        mask_l1: mask.value,
        regularizer: so.value,
        total: mask.value + config.global_smoothness * so.value,
        ..Default::default()
    };
    Ok((terms, grad))
}

/// What an observer sees after each objective evaluation, before the step.
pub struct IterationView<'a> {
    pub stage: Stage,
    pub scale: usize,
    pub iteration: usize,
    pub flow: &'a FlowField,
    pub terms: &'a LossTerms,
    /// Weighted garment-term flow gradient; empty in the global stage.
    pub garment_flow_grad: &'a [f64],
    pub output: Option<&'a Image>,
    pub combined_visibility: Option<&'a Mask>,
}

/// Per-axis size of one flow parameter unit in pixels.
fn units(dims: Dims, config: &PyramidConfig) -> (f64, f64) {
    match config.flow_units {
        FlowUnits::Normalized => (dims.width as f64 / 2.0, dims.height as f64 / 2.0),
        FlowUnits::Pixels => (1.0, 1.0),
    }
}

/// `base + unit * theta`, componentwise.
fn assemble(base: &FlowField, theta: &[f64], unit: (f64, f64)) -> Result<FlowField> {
    let data = base
        .as_slice()
        .iter()
        .zip(theta)
        .enumerate()
        .map(|(i, (b, t))| b + if i % 2 == 0 { unit.0 } else { unit.1 } * t)
        .collect();
    FlowField::new(base.height(), base.width(), data)
}

fn chain_units(grad: &mut [f64], unit: (f64, f64)) {
    for (i, g) in grad.iter_mut().enumerate() {
        *g *= if i % 2 == 0 { unit.0 } else { unit.1 };
    }
}

fn check_scene(scene: &Scene, config: &PyramidConfig) -> Result<()> {
    config.validate()?;
    scene.validate()?;
    let dims = scene.dims();
    if dims != Dims::new(config.height, config.width) {
        return Err(Error::shape(
            "scene vs configured resolution",
            dims,
            Dims::new(config.height, config.width),
        ));
    }
    if scene.source_mask.count_above(0.5) == 0 || scene.target_mask.count_above(0.5) == 0 {
        return Err(Error::EmptyMask);
    }
    Ok(())
}

fn build_levels(scene: &Scene, config: &PyramidConfig, warnings: &mut Vec<String>) -> Result<Vec<Level>> {
    (0..config.scales)
        .map(|i| {
            let level = Level::build(scene, config.factor(i), config)?;
            if level.ratio.is_none() && config.loss_variant == LossVariant::Nipr {
                warnings.push(format!(
                    "scale {i} (1/{}): downsampled mask is empty, preservation term skipped",
                    level.factor
                ));
            }
            Ok(level)
        })
        .collect()
}

fn final_metrics(scene: &Scene, flow: &FlowField, output: &Image, config: &PyramidConfig) -> Result<(Option<f64>, Option<f64>)> {
    let support = scene.target_support().binarize(0.5);
    let violation = match RatioPair::from_masks(&scene.source_mask, &support, config.ratio_convention) {
        Ok(r) => Some(integrity_violation(flow, &r, &support)?),
        Err(Error::EmptyMask) => None,
        Err(e) => return Err(e),
    };
    let s = match ssim(output, &scene.target) {
        Ok(v) => Some(v),
        Err(Error::WindowTooLarge { .. }) => None,
        Err(e) => return Err(e),
    };
    Ok((violation, s))
}

/// Mask-only stage; never reads garment texture.
pub fn optimize_global(scene: &Scene, config: &PyramidConfig) -> Result<StageResult> {
    optimize_global_with(scene, config, |_| {})
}

pub fn optimize_global_with(
    scene: &Scene,
    config: &PyramidConfig,
    mut observe: impl FnMut(&IterationView<'_>),
) -> Result<StageResult> {
    check_scene(scene, config)?;
    let start = Instant::now();
    let mut warnings = Vec::new();
    let levels = build_levels(scene, config, &mut warnings)?;
    let mut series = Vec::with_capacity(config.scales * config.iterations);
    let mut per_scale = Vec::with_capacity(config.scales);
    let mut initial = Vec::with_capacity(config.scales);
    let mut counter = 0;

    for (scale, level) in levels.iter().enumerate() {
        let dims = level.dims();
        let base = match per_scale.last() {
            Some(prev) => upsample_flow(prev),
            None => FlowField::zeros(dims.height, dims.width),
        };
        let unit = units(dims, config);
        let mut theta = vec![0.0; 2 * dims.len()];
        let mut adam = OptimizerState::new(theta.len(), config.adam);
        for _ in 0..config.iterations {
            let flow = assemble(&base, &theta, unit)?;
            let (terms, mut grad) = evaluate_global(level, &flow, config)?;
            observe(&IterationView {
                stage: Stage::Global,
                scale,
                iteration: counter,
                flow: &flow,
                terms: &terms,
                garment_flow_grad: &[],
                output: None,
                combined_visibility: None,
            });
            series.push(IterationRecord {
                stage: Stage::Global,
                scale,
                iteration: counter,
                terms,
            });
            counter += 1;
            chain_units(&mut grad, unit);
            adam.step(&mut theta, &grad)?;
        }
        per_scale.push(assemble(&base, &theta, unit)?);
        initial.push(base);
    }

    let flow = per_scale.last().expect("at least one scale").clone();
    let finest = levels.last().expect("at least one scale");
    let (terms, _) = evaluate_global(finest, &flow, config)?;
    let output = warp(&scene.source, &flow)?;
    let (integrity_violation, ssim) = final_metrics(scene, &flow, &output, config)?;
    let dims = scene.dims();
    Ok(StageResult {
        stage: Stage::Global,
        per_scale_flows: per_scale,
        initial_flows: initial,
        flow,
        visibility: Mask::zeros(dims.height, dims.width),
        predicted_visibility: Mask::zeros(dims.height, dims.width),
        series,
        report: LossReport {
            terms,
            integrity_violation,
            ssim,
        },
        warnings,
        elapsed: start.elapsed(),
    })
}

fn sigmoid(z: f64) -> f64 {
    1.0 / (1.0 + (-z).exp())
}

fn logits_to_mask(dims: Dims, logits: &[f64]) -> Mask {
    Mask::from_clamped(dims, logits.iter().map(|z| sigmoid(*z)).collect())
}

/// Nearest-neighbour doubling of a logit field.
fn upsample_logits(dims: Dims, logits: &[f64]) -> Vec<f64> {
    let (h, w) = (2 * dims.height, 2 * dims.width);
    let mut out = Vec::with_capacity(h * w);
    for y in 0..h {
        for x in 0..w {
            out.push(logits[(y / 2) * dims.width + x / 2]);
        }
    }
    out
}

/// Texture-aware stage.
pub fn optimize_local(scene: &Scene, global: Option<&StageResult>, config: &PyramidConfig) -> Result<StageResult> {
    optimize_local_with(scene, global, config, |_| {})
}

pub fn optimize_local_with(
    scene: &Scene,
    global: Option<&StageResult>,
    config: &PyramidConfig,
    mut observe: impl FnMut(&IterationView<'_>),
) -> Result<StageResult> {
    check_scene(scene, config)?;
    if config.alpha[4] > 0.0 && global.is_none() {
        return Err(Error::MissingGlobal);
    }
    if let Some(g) = global {
        if g.per_scale_flows.len() != config.scales {
            return Err(Error::Config(format!(
                "global result has {} scales, config has {}",
                g.per_scale_flows.len(),
                config.scales
            )));
        }
    }
    let start = Instant::now();
    let mut warnings = Vec::new();
    let levels = build_levels(scene, config, &mut warnings)?;
    let fit = config.visibility == VisibilityMode::Fit;
    let mut vis_adam_params = config.adam;
    vis_adam_params.learning_rate = config.visibility_learning_rate;

    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let coarse = levels[0].dims();
    let mut logits: Vec<f64> = if fit {
        (0..coarse.len()).map(|_| rng.gen_range(-0.01..0.01)).collect()
    } else {
        Vec::new()
    };

    let mut series = Vec::with_capacity(config.scales * config.iterations);
    let mut per_scale: Vec<FlowField> = Vec::with_capacity(config.scales);
    let mut initial = Vec::with_capacity(config.scales);
    let mut counter = 0;

    for (scale, level) in levels.iter().enumerate() {
        let dims = level.dims();
        let base = match per_scale.last() {
            Some(prev) => upsample_flow(prev),
            None => FlowField::zeros(dims.height, dims.width),
        };
        if fit && scale > 0 {
            logits = upsample_logits(levels[scale - 1].dims(), &logits);
        }
        let global_mask = match global {
            Some(g) => Some(warp_mask(&level.source_mask, &g.per_scale_flows[scale])?),
            None => None,
        };
        let unit = units(dims, config);
        let mut theta = vec![0.0; 2 * dims.len()];
        let mut adam = OptimizerState::new(theta.len(), config.adam);
        let mut vis_adam = OptimizerState::new(logits.len(), vis_adam_params);
        for _ in 0..config.iterations {
            let flow = assemble(&base, &theta, unit)?;
            let predicted = if fit {
                logits_to_mask(dims, &logits)
            } else {
                level.visibility.clone()
            };
            let eval = evaluate_local(level, &flow, &predicted, global_mask.as_ref(), config)?;
            observe(&IterationView {
                stage: Stage::Local,
                scale,
                iteration: counter,
                flow: &flow,
                terms: &eval.terms,
                garment_flow_grad: &eval.garment_flow_grad,
                output: Some(&eval.output),
                combined_visibility: Some(&eval.combined_visibility),
            });
            series.push(IterationRecord {
                stage: Stage::Local,
                scale,
                iteration: counter,
                terms: eval.terms,
            });
            counter += 1;
            let mut grad = eval.flow_grad;
            chain_units(&mut grad, unit);
            adam.step(&mut theta, &grad)?;
            if fit {
                let d_logits: Vec<f64> = eval
                    .visibility_grad
                    .iter()
                    .zip(predicted.values())
                    .map(|(g, s)| g * s * (1.0 - s))
                    .collect();
                vis_adam.step(&mut logits, &d_logits)?;
            }
        }
        per_scale.push(assemble(&base, &theta, unit)?);
        initial.push(base);
    }

    let flow = per_scale.last().expect("at least one scale").clone();
    let finest = levels.last().expect("at least one scale");
    let dims = scene.dims();
    let predicted = if fit {
        logits_to_mask(dims, &logits)
    } else {
        scene.visibility.clone()
    };
    let global_mask = match global {
        Some(g) => Some(warp_mask(&scene.source_mask, &g.flow)?),
        None => None,
    };
    let eval = evaluate_local(finest, &flow, &predicted, global_mask.as_ref(), config)?;
    let (integrity_violation, ssim) = final_metrics(scene, &flow, &eval.output, config)?;
    Ok(StageResult {
        stage: Stage::Local,
        per_scale_flows: per_scale,
        initial_flows: initial,
        flow,
        visibility: eval.combined_visibility,
        predicted_visibility: predicted,
        series,
        report: LossReport {
            terms: eval.terms,
            integrity_violation,
            ssim,
        },
        warnings,
        elapsed: start.elapsed(),
    })
}
