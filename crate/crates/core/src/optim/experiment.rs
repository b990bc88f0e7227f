use super::config::PyramidConfig;
use super::pyramid::{optimize_global, optimize_local, LossReport, StageResult};
use crate::error::Result;
use crate::flow::{apply_visibility, warp, Image};
use crate::synth::Scene;

/// Both stages of one run and the final warped garment.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentReport {
    pub config: PyramidConfig,
    pub global: Option<StageResult>,
    pub local: StageResult,
    /// `apply_visibility(warp(source, local flow), M^vis)` at full resolution.
    pub output: Image,
}

impl ExperimentReport {
    pub fn report(&self) -> &LossReport {
        &self.local.report
    }
}

/// Runs the global stage when enabled, then the local stage.
pub fn run_experiment(scene: &Scene, config: &PyramidConfig) -> Result<ExperimentReport> {
    config.validate()?;
    let global = if config.global_stage {
        Some(optimize_global(scene, config)?)
    } else {
        None
    };
    let local = optimize_local(scene, global.as_ref(), config)?;
    let output = apply_visibility(&warp(&scene.source, &local.flow)?, &local.visibility)?;
    Ok(ExperimentReport {
        config: config.clone(),
        global,
        local,
        output,
    })
}
