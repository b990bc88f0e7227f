use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use flowweld::formats::{load_image, save_flow, save_image, save_mask};
use flowweld::{FlowField, Image, Mask, Raster};
use serde_json::Value;
use tempfile::TempDir;

fn flowweld(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_flowweld"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exited normally")
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn json(path: &Path) -> Value {
    serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap()
}

fn synth(dir: &Path, args: &[&str]) {
    let mut all = vec!["synth"];
    all.extend(args);
    all.extend(["--out", p(dir)]);
    let o = flowweld(&all);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
}

#[test]
fn synth_scale_writes_every_raster() {
    let tmp = TempDir::new().unwrap();
    let dir = tmp.path().join("scene");
    synth(&dir, &["scale", "--sy", "0.5", "--sx", "1.0"]);
    let mut names: Vec<String> = fs::read_dir(&dir)
        .unwrap()
        .map(|e| e.unwrap().file_name().into_string().unwrap())
        .collect();
    names.sort();
    assert_eq!(
        names,
        [
            "gt_flow.flo",
            "hair_bottom.pgm",
            "scene.json",
            "source.ppm",
            "source_mask.pgm",
            "target.ppm",
            "target_mask.pgm",
            "visibility.pgm"
        ]
    );
    let header = json(&dir.join("scene.json"));
    assert_eq!(header["provenance"]["scenario"], "scale");
    assert_eq!(header["provenance"]["params"]["sy"], 0.5);
    assert_eq!(header["tool"], "flowweld");
}

#[test]
fn emitted_rasters_survive_a_second_round_trip() {
    let tmp = TempDir::new().unwrap();
    let dir = tmp.path().join("scene");
    synth(&dir, &["hand", "--pattern", "checker"]);
    for entry in fs::read_dir(&dir).unwrap() {
        let path = entry.unwrap().path();
        let ext = path.extension().unwrap().to_str().unwrap();
        if ext != "ppm" && ext != "pgm" {
            continue;
        }
        let img = load_image(&path).unwrap();
        let again = tmp.path().join(format!("again.{ext}"));
        save_image(&again, &img).unwrap();
        assert_eq!(fs::read(&path).unwrap(), fs::read(&again).unwrap(), "{}", path.display());
    }
}

#[test]
fn synth_is_reproducible() {
    let tmp = TempDir::new().unwrap();
    let (a, b) = (tmp.path().join("a"), tmp.path().join("b"));
    synth(&a, &["--scenario", "tuckin", "--crop", "0.25"]);
    synth(&b, &["--scenario", "tuckin", "--crop", "0.25"]);
    for name in ["source.ppm", "target.ppm", "hair_bottom.pgm", "scene.json"] {
        assert_eq!(fs::read(a.join(name)).unwrap(), fs::read(b.join(name)).unwrap());
    }
}

#[test]
fn unknown_scenario_is_a_usage_error() {
    let tmp = TempDir::new().unwrap();
    let o = flowweld(&["synth", "twist", "--out", p(tmp.path())]);
    assert_eq!(code(&o), 2);
    assert!(stderr(&o).contains("unknown scenario `twist`"));
    assert_eq!(code(&flowweld(&["synth", "scale", "--sy", "9", "--out", p(tmp.path())])), 2);
    assert_eq!(code(&flowweld(&["frobnicate"])), 2);
}

fn gradient_image(h: usize, w: usize) -> Image {
    Image::from_fn(3, h, w, |c, y, x| ((c * 31 + y * 7 + x * 3) % 256) as f64 / 255.0).unwrap()
}

#[test]
fn warp_by_zero_flow_keeps_pixels() {
    let tmp = TempDir::new().unwrap();
    let (img, flo, out) = (tmp.path().join("in.ppm"), tmp.path().join("zero.flo"), tmp.path().join("out.ppm"));
    save_image(&img, &gradient_image(10, 7)).unwrap();
    save_flow(&flo, &FlowField::zeros(10, 7)).unwrap();
    let o = flowweld(&["warp", p(&img), p(&flo), "--out", p(&out)]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    assert_eq!(fs::read(&img).unwrap(), fs::read(&out).unwrap());
}

#[test]
fn warp_under_full_visibility_is_black() {
    let tmp = TempDir::new().unwrap();
    let (img, flo, vis, out) = (
        tmp.path().join("in.ppm"),
        tmp.path().join("f.flo"),
        tmp.path().join("vis.pgm"),
        tmp.path().join("out.ppm"),
    );
    save_image(&img, &gradient_image(10, 7)).unwrap();
    save_flow(&flo, &FlowField::constant(10, 7, 0.5, -1.25).unwrap()).unwrap();
    save_mask(&vis, &Mask::ones(10, 7)).unwrap();
    let o = flowweld(&["warp", p(&img), p(&flo), "--vis", p(&vis), "--out", p(&out)]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    assert!(load_image(&out).unwrap().values().iter().all(|v| *v == 0.0));
}

#[test]
fn warp_reports_contract_and_io_errors() {
    let tmp = TempDir::new().unwrap();
    let (img, flo, out) = (tmp.path().join("in.ppm"), tmp.path().join("f.flo"), tmp.path().join("out.ppm"));
    save_image(&img, &gradient_image(10, 7)).unwrap();
    save_flow(&flo, &FlowField::zeros(7, 10)).unwrap();
    assert_eq!(code(&flowweld(&["warp", p(&img), p(&flo), "--out", p(&out)])), 2);
    let missing = tmp.path().join("nope.flo");
    let o = flowweld(&["warp", p(&img), p(&missing), "--out", p(&out)]);
    assert_eq!(code(&o), 3);
    assert!(stderr(&o).contains("nope.flo"));
    fs::write(&flo, b"not a flow").unwrap();
    assert_eq!(code(&flowweld(&["warp", p(&img), p(&flo), "--out", p(&out)])), 3);
}

fn small_config(dir: &Path, extra: &str) -> std::path::PathBuf {
    let path = dir.join("run.cfg");
    fs::write(&path, format!("# small desk run\nscales = 3\niterations = 120\n{extra}")).unwrap();
    path
}

#[test]
fn optimize_identity_converges_and_reruns_identically() {
    let tmp = TempDir::new().unwrap();
    let scene = tmp.path().join("id");
    synth(&scene, &["identity"]);
    let cfg = small_config(tmp.path(), "");
    let (a, b) = (tmp.path().join("a"), tmp.path().join("b"));
    for out in [&a, &b] {
        let o = flowweld(&["optimize", p(&scene), "--config", p(&cfg), "--out", p(out)]);
        assert_eq!(code(&o), 0, "{}", stderr(&o));
    }
    let m = json(&a.join("manifest.json"));
    assert!(m["metrics"]["local"]["terms"]["garment_l1"].as_f64().unwrap() < 1e-3);
    assert_eq!(m["config"]["scales"], 3);
    assert_eq!(m["provenance"]["scenario"], "identity");
    for name in m["outputs"].as_array().unwrap() {
        assert!(a.join(name.as_str().unwrap()).exists(), "{name}");
    }
    for name in ["losses.csv", "manifest.json", "flow.flo", "warped.ppm"] {
        assert_eq!(fs::read(a.join(name)).unwrap(), fs::read(b.join(name)).unwrap(), "{name}");
    }
    let csv = fs::read_to_string(a.join("losses.csv")).unwrap();
    let mut lines = csv.lines();
    assert_eq!(
        lines.next().unwrap(),
        "stage,scale,iteration,garment_l1,mask_l1,bce,consistency,regularizer,total"
    );
    assert_eq!(lines.count(), 2 * 3 * 120);
}

#[test]
fn optimize_names_a_missing_mask() {
    let tmp = TempDir::new().unwrap();
    let scene = tmp.path().join("id");
    synth(&scene, &["identity"]);
    fs::remove_file(scene.join("target_mask.pgm")).unwrap();
    let o = flowweld(&["optimize", p(&scene), "--out", p(&tmp.path().join("o"))]);
    assert_eq!(code(&o), 3);
    assert!(stderr(&o).contains("target_mask.pgm"));
}

#[test]
fn optimize_rejects_bad_configs() {
    let tmp = TempDir::new().unwrap();
    let scene = tmp.path().join("id");
    synth(&scene, &["identity"]);
    let out = tmp.path().join("o");
    for extra in ["bogus = 1\n", "height = 32\n", "scales = 9\n", "alpha = 1, 2\n"] {
        let cfg = small_config(tmp.path(), extra);
        let o = flowweld(&["optimize", p(&scene), "--config", p(&cfg), "--out", p(&out)]);
        assert_eq!(code(&o), 2, "{extra}: {}", stderr(&o));
    }
    let o = flowweld(&["optimize", p(&scene), "--config", p(&tmp.path().join("absent.cfg")), "--out", p(&out)]);
    assert_eq!(code(&o), 3);
}

#[test]
fn compare_on_identity_reports_both_arms() {
    let tmp = TempDir::new().unwrap();
    let scene = tmp.path().join("id");
    synth(&scene, &["identity"]);
    let cfg = small_config(tmp.path(), "");
    let out = tmp.path().join("cmp");
    let o = flowweld(&["compare", p(&scene), "--config", p(&cfg), "--out", p(&out)]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let r = json(&out.join("report.json"));
    assert!(r["violation_so"].as_f64().unwrap() < 1e-3);
    assert!(r["violation_nipr"].as_f64().unwrap() < 1e-3);
    for arm in ["so", "nipr"] {
        assert_eq!(r[arm]["loss_variant"], arm);
        for term in ["garment_l1", "mask_l1", "bce", "consistency", "regularizer", "total"] {
            assert!(r[arm]["terms"][term].is_number(), "{arm}.{term}");
        }
        assert!(out.join(arm).join("manifest.json").exists());
    }
    for key in ["mask_l1_so", "mask_l1_nipr", "ssim_so", "ssim_nipr"] {
        assert!(r[key].is_number(), "{key}");
    }
    let side = load_image(out.join("side_by_side.ppm")).unwrap();
    assert_eq!((side.height(), side.width()), (64, 96));
}

#[test]
fn gradcheck_passes_and_catches_a_fault() {
    let o = flowweld(&["gradcheck"]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let text = String::from_utf8_lossy(&o.stdout);
    for op in ["warp", "apply_visibility", "l1", "bce", "so", "nipr_preserve", "nipr", "consistency", "tv"] {
        assert!(text.lines().any(|l| l.starts_with(op) && l.ends_with("ok")), "{op} in\n{text}");
    }
    let o = flowweld(&["gradcheck", "--inject-fault", "tv"]);
    assert_eq!(code(&o), 1);
    assert!(stderr(&o).contains("tv at coordinate"));
    assert!(!stderr(&o).contains("warp at"));
    assert_eq!(code(&flowweld(&["gradcheck", "--inject-fault", "sqrt"])), 2);
}

#[test]
fn gradcheck_seed_moves_points_but_not_the_verdict() {
    let tmp = TempDir::new().unwrap();
    let mut worst = Vec::new();
    for seed in ["0", "5"] {
        let out = tmp.path().join(format!("gc{seed}.json"));
        let o = flowweld(&["gradcheck", "--seed", seed, "--out", p(&out)]);
        assert_eq!(code(&o), 0, "{}", stderr(&o));
        let r = json(&out);
        worst.push(r[0]["report"]["worst_index"].clone());
        assert!(r.as_array().unwrap().iter().all(|op| op["passed"] == true));
    }
    assert_ne!(worst[0], worst[1]);
}

#[test]
fn gradcheck_reads_its_config() {
    let tmp = TempDir::new().unwrap();
    let cfg = tmp.path().join("gc.cfg");
    fs::write(&cfg, "samples = 120\nh = 1e-5\ntol = 1e-5\nseed = 3\n").unwrap();
    let out = tmp.path().join("gc.json");
    let o = flowweld(&["gradcheck", "--config", p(&cfg), "--out", p(&out)]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    assert!(json(&out)
        .as_array()
        .unwrap()
        .iter()
        .all(|op| op["report"]["points_checked"] == 120));
    fs::write(&cfg, "samples = many\n").unwrap();
    assert_eq!(code(&flowweld(&["gradcheck", "--config", p(&cfg)])), 2);
}

#[test]
fn thread_count_must_be_positive() {
    let o = Command::new(env!("CARGO_BIN_EXE_flowweld"))
        .args(["gradcheck", "--samples", "5"])
        .env("FLOWWELD_THREADS", "zero")
        .output()
        .unwrap();
    assert_eq!(code(&o), 2);
}
