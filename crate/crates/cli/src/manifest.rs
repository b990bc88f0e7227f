//! JSON manifests and CSV loss tables.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use flowweld::optim::{IterationRecord, LossReport, LossTerms, PyramidConfig};
use flowweld::synth::Provenance;
use serde::Serialize;
use serde_json::{json, Value};

use crate::error::CliError;

pub const TOOL: &str = "flowweld";
pub const VERSION: &str = env!("CARGO_PKG_VERSION");

/// Every config field under its config-file key, with typed values.
pub fn config_echo(c: &PyramidConfig) -> BTreeMap<&'static str, Value> {
    BTreeMap::from([
        ("scales", json!(c.scales)),
        ("height", json!(c.height)),
        ("width", json!(c.width)),
        ("iterations", json!(c.iterations)),
        ("alpha", json!(c.alpha)),
        ("learning_rate", json!(c.adam.learning_rate)),
        ("beta1", json!(c.adam.beta1)),
        ("beta2", json!(c.adam.beta2)),
        ("epsilon", json!(c.adam.epsilon)),
        ("ratio_convention", json!(c.ratio_convention.to_string())),
        ("region", json!(c.region.to_string())),
        ("reduction", json!(c.reduction.to_string())),
        ("loss_variant", json!(c.loss_variant.to_string())),
        ("visibility", json!(c.visibility.to_string())),
        ("seed", json!(c.seed)),
        ("global_stage", json!(c.global_stage)),
        ("occlusion", json!(c.occlusion)),
        ("global_smoothness", json!(c.global_smoothness)),
        ("flow_units", json!(c.flow_units.to_string())),
        ("visibility_learning_rate", json!(c.visibility_learning_rate)),
        ("upsample_factor", json!(2)),
    ])
}

#[derive(Debug, Serialize)]
pub struct Metrics {
    pub local: LossReport,
    pub global: Option<LossReport>,
}

#[derive(Debug, Serialize)]
pub struct RunManifest {
    pub tool: &'static str,
    pub version: &'static str,
    pub command: String,
    pub seed: u64,
    pub config: BTreeMap<&'static str, Value>,
    pub provenance: Provenance,
    pub outputs: Vec<String>,
    pub metrics: Option<Metrics>,
    pub warnings: Vec<String>,
}

impl RunManifest {
    pub fn new(command: &str, config: &PyramidConfig, provenance: Provenance) -> Self {
        RunManifest {
            tool: TOOL,
            version: VERSION,
            command: command.to_string(),
            seed: config.seed,
            config: config_echo(config),
            provenance,
            outputs: Vec::new(),
            metrics: None,
            warnings: Vec::new(),
        }
    }
}

pub fn write_json(path: &Path, value: &impl Serialize) -> Result<(), CliError> {
    let text = serde_json::to_string_pretty(value).expect("manifest serializes");
    fs::write(path, text + "\n").map_err(|e| CliError::file(path, e))
}

/// One row per iteration: stage, scale, iteration, every term, total.
pub fn write_series(path: &Path, series: &[&IterationRecord]) -> Result<(), CliError> {
    let io = |e: csv::Error| CliError::file(path, std::io::Error::other(e));
    let mut w = csv::Writer::from_path(path).map_err(io)?;
    let mut header = vec!["stage", "scale", "iteration"];
    header.extend(LossTerms::NAMES);
    w.write_record(&header).map_err(io)?;
    for r in series {
        let mut row = vec![r.stage.to_string(), r.scale.to_string(), r.iteration.to_string()];
        row.extend(r.terms.values().iter().map(|v| v.to_string()));
        w.write_record(&row).map_err(io)?;
    }
    w.flush().map_err(|e| CliError::file(path, e))
}
