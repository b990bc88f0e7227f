use std::fs;
use std::path::Path;

use flowweld::flow::{apply_visibility, warp};
use flowweld::formats::{load_flow, load_image, load_mask, save_flow, save_image};
use flowweld::optim::{run_experiment, ExperimentReport, LossReport, LossVariant, PyramidConfig};
use flowweld::synth::{
    default_hand_band, make_hand_occlusion_scenario, make_identity_scenario, make_scale_scenario,
    make_striped_garment, make_tuckin_scenario, Garment, Pattern, Rect, Scene,
};
use flowweld::{Image, Mask};
use serde::Serialize;
use serde_json::Value;

use crate::cli::{Command, GradcheckArgs, RunArgs, SynthArgs, WarpArgs};
use crate::error::CliError;
use crate::gradcheck::{self, OPERATIONS};
use crate::manifest::{config_echo, write_json, write_series, Metrics, RunManifest, TOOL, VERSION};
use crate::scene_io::{create_dir, read_scene, write_image, write_mask, write_scene};

pub const SCENARIOS: [&str; 4] = ["scale", "tuckin", "hand", "identity"];

pub fn execute(command: Command) -> Result<(), CliError> {
    match command {
        Command::Synth(a) => synth(&a),
        Command::Warp(a) => warp_cmd(&a),
        Command::Optimize(a) => optimize(&a),
        Command::Compare(a) => compare(&a),
        Command::Gradcheck(a) => gradcheck_cmd(&a),
    }
}

fn build_scene(a: &SynthArgs) -> Result<Scene, CliError> {
    let name = a
        .name
        .as_deref()
        .or(a.scenario.as_deref())
        .ok_or_else(|| CliError::Usage(format!("missing scenario; expected one of {}", SCENARIOS.join(", "))))?;
    if !SCENARIOS.contains(&name) {
        return Err(CliError::Usage(format!(
            "unknown scenario `{name}`; expected one of {}",
            SCENARIOS.join(", ")
        )));
    }
    let pattern: Pattern = a.pattern.parse()?;
    let (h, w) = (a.height, a.width);
    let base: Garment = make_striped_garment(h, w, Rect::new(h / 4, w / 4, h / 2, w / 2), a.period, pattern, 3)?;
    let mut scene = match name {
        "scale" => make_scale_scenario(&base, a.sy, a.sx)?,
        "tuckin" => make_tuckin_scenario(&base, a.crop)?,
        "hand" => {
            let d = default_hand_band(&base);
            let band = Rect::new(
                a.band_top.unwrap_or(d.top),
                a.band_left.unwrap_or(d.left),
                a.band_height.unwrap_or(d.height),
                a.band_width.unwrap_or(d.width),
            );
            make_hand_occlusion_scenario(&base, band)?
        }
        _ => make_identity_scenario(&base)?,
    };
    scene.provenance.seed = a.seed;
    Ok(scene)
}

fn synth(a: &SynthArgs) -> Result<(), CliError> {
    let scene = build_scene(a)?;
    let files = write_scene(&a.out, &scene)?;
    println!("wrote {} files to {}", files.len(), a.out.display());
    for f in files {
        println!("  {f}");
    }
    Ok(())
}

fn warp_cmd(a: &WarpArgs) -> Result<(), CliError> {
    let image = load_image(&a.image).map_err(|e| CliError::file(&a.image, e))?;
    let flow = load_flow(&a.flow).map_err(|e| CliError::file(&a.flow, e))?;
    let vis = match &a.vis {
        Some(p) => load_mask(p).map_err(|e| CliError::file(p, e))?,
        None => Mask::zeros(image.height(), image.width()),
    };
    let out = apply_visibility(&warp(&image, &flow)?, &vis)?;
    save_image(&a.out, &out).map_err(|e| CliError::file(&a.out, e))?;
    println!("wrote {}", a.out.display());
    Ok(())
}

/// Defaults, overridden by the config file, then by `--seed`. Height and
/// width follow the scene unless the file sets them.
fn load_config(path: Option<&Path>, seed: Option<u64>, scene: &Scene) -> Result<PyramidConfig, CliError> {
    let (mut cfg, explicit) = match path {
        Some(p) => {
            let text = fs::read_to_string(p).map_err(|e| CliError::file(p, e))?;
            PyramidConfig::parse_explicit(&text).map_err(|e| CliError::file(p, e))?
        }
        None => (PyramidConfig::default(), Default::default()),
    };
    let dims = scene.dims();
    if !explicit.contains("height") {
        cfg.height = dims.height;
    }
    if !explicit.contains("width") {
        cfg.width = dims.width;
    }
    if let Some(s) = seed {
        cfg.seed = s;
    }
    cfg.validate()?;
    if (cfg.height, cfg.width) != (dims.height, dims.width) {
        return Err(flowweld::Error::DimensionMismatch(format!(
            "config is {}x{}, scene is {}x{}",
            cfg.height, cfg.width, dims.height, dims.width
        ))
        .into());
    }
    Ok(cfg)
}

fn save_flow_file(dir: &Path, name: &str, flow: &flowweld::FlowField, outputs: &mut Vec<String>) -> Result<(), CliError> {
    let path = dir.join(name);
    save_flow(&path, flow).map_err(|e| CliError::file(&path, e))?;
    outputs.push(name.to_string());
    Ok(())
}

/// Writes every artifact of one run into `dir` and returns its manifest.
fn write_run(dir: &Path, command: &str, scene: &Scene, run: &ExperimentReport) -> Result<RunManifest, CliError> {
    create_dir(dir)?;
    let mut m = RunManifest::new(command, &run.config, scene.provenance.clone());
    let outs = &mut m.outputs;
    save_flow_file(dir, "flow.flo", &run.local.flow, outs)?;
    for (i, f) in run.local.per_scale_flows.iter().enumerate() {
        save_flow_file(dir, &format!("flow_scale{i}.flo"), f, outs)?;
    }
    if let Some(g) = &run.global {
        save_flow_file(dir, "global_flow.flo", &g.flow, outs)?;
    }
    outs.push(write_image(dir, "warped", &run.output)?);
    outs.push(write_mask(dir, "visibility", &run.local.visibility)?);
    outs.push(write_mask(dir, "predicted_visibility", &run.local.predicted_visibility)?);

    let series: Vec<_> = run
        .global
        .iter()
        .flat_map(|g| g.series.iter())
        .chain(run.local.series.iter())
        .collect();
    write_series(&dir.join("losses.csv"), &series)?;
    outs.push("losses.csv".into());
    let cfg_path = dir.join("config.txt");
    fs::write(&cfg_path, run.config.render()).map_err(|e| CliError::file(&cfg_path, e))?;
    outs.push("config.txt".into());
    outs.push("manifest.json".into());

    m.metrics = Some(Metrics {
        local: run.local.report.clone(),
        global: run.global.as_ref().map(|g| g.report.clone()),
    });
    m.warnings = run
        .global
        .iter()
        .flat_map(|g| g.warnings.iter())
        .chain(&run.local.warnings)
        .cloned()
        .collect();
    write_json(&dir.join("manifest.json"), &m)?;
    Ok(m)
}

fn print_report(label: &str, r: &LossReport) {
    let t = &r.terms;
    print!(
        "{label}: total {:.6e} garment_l1 {:.6e} mask_l1 {:.6e} consistency {:.6e} regularizer {:.6e}",
        t.total, t.garment_l1, t.mask_l1, t.consistency, t.regularizer
    );
    if let Some(v) = r.integrity_violation {
        print!(" violation {v:.6}");
    }
    if let Some(s) = r.ssim {
        print!(" ssim {s:.6}");
    }
    println!();
}

fn optimize(a: &RunArgs) -> Result<(), CliError> {
    let scene = read_scene(&a.scene)?;
    let cfg = load_config(a.config.as_deref(), a.seed, &scene)?;
    let run = run_experiment(&scene, &cfg)?;
    let m = write_run(&a.out, "optimize", &scene, &run)?;
    for w in &m.warnings {
        eprintln!("warning: {w}");
    }
    if let Some(g) = &run.global {
        print_report("global", &g.report);
    }
    print_report("local", &run.local.report);
    println!("wrote {} files to {}", m.outputs.len(), a.out.display());
    Ok(())
}

#[derive(Debug, Serialize)]
struct ArmReport {
    loss_variant: String,
    terms: flowweld::optim::LossTerms,
    integrity_violation: Option<f64>,
    mask_l1: f64,
    ssim: Option<f64>,
    global: Option<LossReport>,
}

impl ArmReport {
    fn new(run: &ExperimentReport) -> Self {
        let r = &run.local.report;
        ArmReport {
            loss_variant: run.config.loss_variant.to_string(),
            terms: r.terms,
            integrity_violation: r.integrity_violation,
            mask_l1: r.terms.mask_l1,
            ssim: r.ssim,
            global: run.global.as_ref().map(|g| g.report.clone()),
        }
    }
}

#[derive(Debug, Serialize)]
struct CompareReport {
    tool: &'static str,
    version: &'static str,
    command: &'static str,
    seed: u64,
    config: std::collections::BTreeMap<&'static str, Value>,
    provenance: flowweld::synth::Provenance,
    violation_so: Option<f64>,
    violation_nipr: Option<f64>,
    mask_l1_so: f64,
    mask_l1_nipr: f64,
    ssim_so: Option<f64>,
    ssim_nipr: Option<f64>,
    so: ArmReport,
    nipr: ArmReport,
    outputs: Vec<String>,
    warnings: Vec<String>,
}

/// The two images next to each other, left then right.
fn side_by_side(left: &Image, right: &Image) -> Result<Image, CliError> {
    let w = left.width();
    Ok(Image::from_fn(left.channels(), left.height(), 2 * w, |c, y, x| {
        if x < w {
            left.get(c, y, x)
        } else {
            right.get(c, y, x - w)
        }
    })?)
}

fn compare(a: &RunArgs) -> Result<(), CliError> {
    let scene = read_scene(&a.scene)?;
    let cfg = load_config(a.config.as_deref(), a.seed, &scene)?;
    let arm = |variant| {
        let mut c = cfg.clone();
        c.loss_variant = variant;
        run_experiment(&scene, &c)
    };
    let (so, nipr) = rayon::join(|| arm(LossVariant::So), || arm(LossVariant::Nipr));
    let (so, nipr) = (so?, nipr?);
    create_dir(&a.out)?;
    let so_m = write_run(&a.out.join("so"), "compare", &scene, &so)?;
    let nipr_m = write_run(&a.out.join("nipr"), "compare", &scene, &nipr)?;
    let mut outputs: Vec<String> = so_m.outputs.iter().map(|f| format!("so/{f}")).collect();
    outputs.extend(nipr_m.outputs.iter().map(|f| format!("nipr/{f}")));
    outputs.push(write_image(&a.out, "side_by_side", &side_by_side(&so.output, &nipr.output)?)?);
    outputs.push("report.json".into());

    let warnings = so_m
        .warnings
        .iter()
        .map(|w| format!("so: {w}"))
        .chain(nipr_m.warnings.iter().map(|w| format!("nipr: {w}")))
        .collect();
    let (so_arm, nipr_arm) = (ArmReport::new(&so), ArmReport::new(&nipr));
    let report = CompareReport {
        tool: TOOL,
        version: VERSION,
        command: "compare",
        seed: cfg.seed,
        config: config_echo(&cfg),
        provenance: scene.provenance.clone(),
        violation_so: so_arm.integrity_violation,
        violation_nipr: nipr_arm.integrity_violation,
        mask_l1_so: so_arm.mask_l1,
        mask_l1_nipr: nipr_arm.mask_l1,
        ssim_so: so_arm.ssim,
        ssim_nipr: nipr_arm.ssim,
        so: so_arm,
        nipr: nipr_arm,
        outputs,
        warnings,
    };
    write_json(&a.out.join("report.json"), &report)?;
    print_report("so", &so.local.report);
    print_report("nipr", &nipr.local.report);
    println!("wrote {}", a.out.join("report.json").display());
    Ok(())
}

fn gradcheck_cmd(a: &GradcheckArgs) -> Result<(), CliError> {
    let mut cfg = match &a.config {
        Some(p) => {
            let text = fs::read_to_string(p).map_err(|e| CliError::file(p, e))?;
            gradcheck::parse_config(&text).map_err(|e| CliError::file(p, e))?
        }
        None => Default::default(),
    };
    if let Some(s) = a.seed {
        cfg.seed = s;
    }
    if let Some(n) = a.samples {
        cfg.samples = n;
    }
    if let Some(op) = &a.inject_fault {
        if !OPERATIONS.contains(&op.as_str()) {
            return Err(CliError::Usage(format!(
                "unknown operation `{op}`; expected one of {}",
                OPERATIONS.join(", ")
            )));
        }
    }
    let results = gradcheck::check_all(&cfg, a.inject_fault.as_deref())?;
    println!("{:<17} {:>13} {:>8} {:>9}  status", "operation", "max_rel_error", "checked", "excluded");
    for r in &results {
        println!(
            "{:<17} {:>13.3e} {:>8} {:>9}  {}",
            r.op,
            r.report.max_rel_error,
            r.report.points_checked,
            r.report.excluded,
            if r.passed { "ok" } else { "FAIL" }
        );
    }
    if let Some(p) = &a.out {
        write_json(p, &results)?;
    }
    let failed: Vec<String> = results
        .iter()
        .filter(|r| !r.passed)
        .map(|r| match r.report.failures.first() {
            Some(f) => format!(
                "{} at coordinate {} (analytic {:.6e}, numeric {:.6e}, rel error {:.3e})",
                r.op, f.index, f.analytic, f.numeric, f.rel_error
            ),
            None => format!("{} checked only {} of {} points", r.op, r.report.points_checked, cfg.samples),
        })
        .collect();
    if failed.is_empty() {
        Ok(())
    } else {
        Err(CliError::Verification(failed.join("; ")))
    }
}
