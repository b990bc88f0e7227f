//! Direct coarse-to-fine flow optimization.

mod adam;
mod config;
mod experiment;
mod pyramid;

pub use adam::{AdamParams, OptimizerState};
pub use config::{FlowUnits, LossVariant, PyramidConfig, RegionMode, VisibilityMode, DEFAULT_ALPHA};
pub use experiment::{run_experiment, ExperimentReport};
pub use pyramid::{
    evaluate_global, evaluate_local, optimize_global, optimize_global_with, optimize_local, optimize_local_with,
    IterationRecord, IterationView, Level, LocalEval, LossReport, LossTerms, Stage, StageResult,
};
