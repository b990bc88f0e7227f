//! Scene directories: one raster per file plus a `scene.json` manifest
//! holding the tool version, dimensions, provenance and file listing.

use std::fs;
use std::path::Path;

use flowweld::formats::{load_flow, load_image, load_mask, save_flow, save_image, save_mask};
use flowweld::synth::{Provenance, Scene};
use flowweld::{Image, Mask};
use serde::{Deserialize, Serialize};

use crate::error::CliError;

pub const SCENE_HEADER: &str = "scene.json";
pub const GT_FLOW: &str = "gt_flow.flo";

const MASKS: [&str; 4] = ["source_mask", "target_mask", "visibility", "hair_bottom"];

#[derive(Debug, Serialize, Deserialize)]
struct SceneHeader {
    #[serde(default)]
    tool: String,
    #[serde(default)]
    version: String,
    height: usize,
    width: usize,
    provenance: Provenance,
    files: Vec<String>,
}

/// `.ppm` for three channels, `.pgm` otherwise.
pub fn image_file(stem: &str, image: &Image) -> String {
    let ext = if image.channels() == 3 { "ppm" } else { "pgm" };
    format!("{stem}.{ext}")
}

pub fn write_image(dir: &Path, stem: &str, image: &Image) -> Result<String, CliError> {
    let name = image_file(stem, image);
    let path = dir.join(&name);
    save_image(&path, image).map_err(|e| CliError::file(&path, e))?;
    Ok(name)
}

pub fn write_mask(dir: &Path, stem: &str, mask: &Mask) -> Result<String, CliError> {
    let name = format!("{stem}.pgm");
    let path = dir.join(&name);
    save_mask(&path, mask).map_err(|e| CliError::file(&path, e))?;
    Ok(name)
}

pub fn create_dir(dir: &Path) -> Result<(), CliError> {
    fs::create_dir_all(dir).map_err(|e| CliError::file(dir, e))
}

/// Writes every raster of `scene` and returns the file names, header last.
pub fn write_scene(dir: &Path, scene: &Scene) -> Result<Vec<String>, CliError> {
    create_dir(dir)?;
    let mut files = vec![
        write_image(dir, "source", &scene.source)?,
        write_image(dir, "target", &scene.target)?,
    ];
    let masks = [
        &scene.source_mask,
        &scene.target_mask,
        &scene.visibility,
        &scene.hair_bottom,
    ];
    for (stem, mask) in MASKS.iter().zip(masks) {
        files.push(write_mask(dir, stem, mask)?);
    }
    if let Some(flow) = &scene.gt_flow {
        let path = dir.join(GT_FLOW);
        save_flow(&path, flow).map_err(|e| CliError::file(&path, e))?;
        files.push(GT_FLOW.to_string());
    }
    let dims = scene.dims();
    let header = SceneHeader {
        tool: crate::manifest::TOOL.to_string(),
        version: crate::manifest::VERSION.to_string(),
        height: dims.height,
        width: dims.width,
        provenance: scene.provenance.clone(),
        files: files.clone(),
    };
    let path = dir.join(SCENE_HEADER);
    let text = serde_json::to_string_pretty(&header).expect("header serializes");
    fs::write(&path, text + "\n").map_err(|e| CliError::file(&path, e))?;
    files.push(SCENE_HEADER.to_string());
    Ok(files)
}

fn read_image(dir: &Path, stem: &str) -> Result<Image, CliError> {
    let ppm = dir.join(format!("{stem}.ppm"));
    let pgm = dir.join(format!("{stem}.pgm"));
    let path = if !ppm.exists() && pgm.exists() { pgm } else { ppm };
    load_image(&path).map_err(|e| CliError::file(&path, e))
}

fn read_mask(dir: &Path, stem: &str) -> Result<Mask, CliError> {
    let path = dir.join(format!("{stem}.pgm"));
    load_mask(&path).map_err(|e| CliError::file(&path, e))
}

/// Loads a scene written by [`write_scene`]. The header is required; the
/// ground-truth flow is optional.
pub fn read_scene(dir: &Path) -> Result<Scene, CliError> {
    let path = dir.join(SCENE_HEADER);
    let text = fs::read_to_string(&path).map_err(|e| CliError::file(&path, e))?;
    let header: SceneHeader = serde_json::from_str(&text).map_err(|e| {
        CliError::file(
            &path,
            flowweld::Error::Format {
                kind: "scene header",
                msg: e.to_string(),
            },
        )
    })?;
    let gt_path = dir.join(GT_FLOW);
    let gt_flow = if gt_path.exists() {
        Some(load_flow(&gt_path).map_err(|e| CliError::file(&gt_path, e))?)
    } else {
        None
    };
    let scene = Scene {
        source: read_image(dir, "source")?,
        target: read_image(dir, "target")?,
        source_mask: read_mask(dir, "source_mask")?,
        target_mask: read_mask(dir, "target_mask")?,
        visibility: read_mask(dir, "visibility")?,
        hair_bottom: read_mask(dir, "hair_bottom")?,
        gt_flow,
        provenance: header.provenance,
    };
    scene.validate()?;
    let dims = scene.dims();
    if (dims.height, dims.width) != (header.height, header.width) {
        return Err(CliError::file(
            &path,
            flowweld::Error::DimensionMismatch(format!(
                "header says {}x{}, rasters are {}x{}",
                header.height, header.width, dims.height, dims.width
            )),
        ));
    }
    Ok(scene)
}
