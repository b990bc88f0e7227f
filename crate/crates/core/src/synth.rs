//! Synthetic garment scenes with exact targets.
//!
//! Every scene is a pure function of its scenario name and parameters, so
//! the same inputs reproduce it bit for bit.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::flow::{warp, warp_mask, Dims, FlowField, Image, Mask};

/// Inclusive-exclusive pixel rectangle.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Rect {
    pub top: usize,
    pub left: usize,
    pub height: usize,
    pub width: usize,
}

impl Rect {
    pub fn new(top: usize, left: usize, height: usize, width: usize) -> Self {
        Rect { top, left, height, width }
    }

    pub fn contains(&self, y: usize, x: usize) -> bool {
        y >= self.top && y < self.top + self.height && x >= self.left && x < self.left + self.width
    }

    pub fn intersects(&self, other: &Rect) -> bool {
        self.top < other.top + other.height
            && other.top < self.top + self.height
            && self.left < other.left + other.width
            && other.left < self.left + self.width
    }

    fn fits(&self, dims: Dims) -> bool {
        self.height > 0 && self.width > 0 && self.top + self.height <= dims.height && self.left + self.width <= dims.width
    }

    fn indicator(&self, dims: Dims) -> Mask {
        Mask::from_fn(dims.height, dims.width, |y, x| if self.contains(y, x) { 1.0 } else { 0.0 })
            .expect("indicator values are 0 or 1")
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Pattern {
    /// Bands that run along rows.
    Horizontal,
    /// Bands that run along columns.
    Vertical,
    Checker,
}

impl std::str::FromStr for Pattern {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "horizontal" => Ok(Pattern::Horizontal),
            "vertical" => Ok(Pattern::Vertical),
            "checker" => Ok(Pattern::Checker),
            other => Err(Error::Config(format!("unknown pattern `{other}`"))),
        }
    }
}

/// A flat garment: texture, its silhouette and the rectangle it occupies.
#[derive(Debug, Clone, PartialEq)]
pub struct Garment {
    pub image: Image,
    pub mask: Mask,
    pub rect: Rect,
    pub period: usize,
    pub pattern: Pattern,
}

impl Garment {
    /// Three-channel horizontal stripes of period 4 in the central half of the raster.
    pub fn centered(height: usize, width: usize) -> Result<Garment> {
        let rect = Rect::new(height / 4, width / 4, height / 2, width / 2);
        make_striped_garment(height, width, rect, 4, Pattern::Horizontal, 3)
    }

    pub fn dims(&self) -> Dims {
        self.mask.dims()
    }
}

/// Binary stripes (or checks) of `period` pixels inside `rect`, zero outside.
pub fn make_striped_garment(
    height: usize,
    width: usize,
    rect: Rect,
    period: usize,
    pattern: Pattern,
    channels: usize,
) -> Result<Garment> {
    if period < 2 {
        return Err(Error::InvalidRect(format!("stripe period {period} must be at least 2")));
    }
    let dims = Dims::new(height, width);
    if !rect.fits(dims) {
        return Err(Error::InvalidRect(format!("{rect:?} does not fit in {height}x{width}")));
    }
    let on = |i: usize| i % period < period / 2;
    let image = Image::from_fn(channels, height, width, |_, y, x| {
        if !rect.contains(y, x) {
            return 0.0;
        }
        let (ry, rx) = (y - rect.top, x - rect.left);
        let lit = match pattern {
            Pattern::Horizontal => on(ry),
            Pattern::Vertical => on(rx),
            Pattern::Checker => on(ry) ^ on(rx),
        };
        if lit {
            1.0
        } else {
            0.0
        }
    })?;
    Ok(Garment {
        image,
        mask: rect.indicator(dims),
        rect,
        period,
        pattern,
    })
}

/// Where a scene came from; enough to rebuild it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub scenario: String,
    pub params: BTreeMap<String, f64>,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Scene {
    pub source: Image,
    pub source_mask: Mask,
    pub target: Image,
    pub target_mask: Mask,
    /// Body-part occluders the visibility predictor should reproduce.
    pub visibility: Mask,
    /// Hair and bottom-garment occluders.
    pub hair_bottom: Mask,
    pub gt_flow: Option<FlowField>,
    pub provenance: Provenance,
}

impl Scene {
    pub fn dims(&self) -> Dims {
        self.source_mask.dims()
    }

    /// Every occluder, body parts plus hair and bottom garment.
    pub fn occluders(&self) -> Mask {
        crate::flow::combine_visibility(&self.visibility, &self.hair_bottom).expect("scene rasters share dims")
    }

    /// Where the warped garment lies, including parts hidden by hair or a
    /// bottom garment. Its extents define the target size of the garment.
    pub fn target_support(&self) -> Mask {
        crate::flow::combine_visibility(&self.target_mask, &self.hair_bottom).expect("scene rasters share dims")
    }

    /// Target mask with every occluded pixel removed.
    pub fn visible_target_mask(&self) -> Mask {
        self.target_mask
            .multiply(&self.occluders().complement())
            .expect("scene rasters share dims")
    }

    pub fn validate(&self) -> Result<()> {
        let dims = self.dims();
        let all: [(&str, Dims); 6] = [
            ("source", self.source.dims()),
            ("target", self.target.dims()),
            ("target mask", self.target_mask.dims()),
            ("visibility", self.visibility.dims()),
            ("hair/bottom", self.hair_bottom.dims()),
            ("source mask", self.source_mask.dims()),
        ];
        for (name, d) in all {
            if d != dims {
                return Err(Error::shape(name, d, dims));
            }
        }
        if self.source.channels() != self.target.channels() {
            return Err(Error::shape("garment channels", self.source.channels(), self.target.channels()));
        }
        if let Some(f) = &self.gt_flow {
            if f.dims() != dims {
                return Err(Error::shape("ground-truth flow", f.dims(), dims));
            }
        }
        Ok(())
    }
}

fn params(pairs: &[(&str, f64)]) -> BTreeMap<String, f64> {
    pairs.iter().map(|(k, v)| (k.to_string(), *v)).collect()
}

fn base_params(base: &Garment) -> Vec<(&'static str, f64)> {
    vec![
        ("height", base.dims().height as f64),
        ("width", base.dims().width as f64),
        ("rect_top", base.rect.top as f64),
        ("rect_left", base.rect.left as f64),
        ("rect_height", base.rect.height as f64),
        ("rect_width", base.rect.width as f64),
        ("period", base.period as f64),
    ]
}

/// Backward flow that scales the garment by `(sy, sx)` about its center.
pub fn scaling_flow(dims: Dims, rect: &Rect, sy: f64, sx: f64) -> Result<FlowField> {
    let cy = rect.top as f64 + (rect.height as f64 - 1.0) / 2.0;
    let cx = rect.left as f64 + (rect.width as f64 - 1.0) / 2.0;
    let (ky, kx) = (1.0 / sy - 1.0, 1.0 / sx - 1.0);
    FlowField::from_fn(dims.height, dims.width, |y, x| {
        ((x as f64 - cx) * kx, (y as f64 - cy) * ky)
    })
}

/// Target is the base garment scaled by `(sy, sx)` about its center.
pub fn make_scale_scenario(base: &Garment, sy: f64, sx: f64) -> Result<Scene> {
    for (name, s) in [("sy", sy), ("sx", sx)] {
        if !(0.25..=4.0).contains(&s) {
            return Err(Error::OutOfRange(format!("{name} = {s} outside [0.25, 4]")));
        }
    }
    let dims = base.dims();
    let r = &base.rect;
    let cy = r.top as f64 + (r.height as f64 - 1.0) / 2.0;
    let cx = r.left as f64 + (r.width as f64 - 1.0) / 2.0;
    let (half_h, half_w) = (sy * r.height as f64 / 2.0, sx * r.width as f64 / 2.0);
    if cy - half_h < -0.5
        || cy + half_h > dims.height as f64 - 0.5
        || cx - half_w < -0.5
        || cx + half_w > dims.width as f64 - 0.5
    {
        return Err(Error::OutOfRaster(format!(
            "scaling {r:?} by ({sy}, {sx}) exceeds {}x{}",
            dims.height, dims.width
        )));
    }
    let gt = scaling_flow(dims, r, sy, sx)?;
    let target = warp(&base.image, &gt)?;
    let target_mask = warp_mask(&base.mask, &gt)?.binarize(0.5);
    if target_mask.count_above(0.5) == 0 {
        return Err(Error::OutOfRaster("scaled garment vanished".into()));
    }
    let mut p = base_params(base);
    p.extend([("sy", sy), ("sx", sx)]);
    Ok(Scene {
        source: base.image.clone(),
        source_mask: base.mask.clone(),
        target,
        target_mask,
        visibility: Mask::zeros(dims.height, dims.width),
        hair_bottom: Mask::zeros(dims.height, dims.width),
        gt_flow: Some(gt),
        provenance: Provenance {
            scenario: "scale".into(),
            params: params(&p),
            seed: 0,
        },
    })
}

/// The bottom `crop_fraction` of the garment is tucked under a bottom garment.
pub fn make_tuckin_scenario(base: &Garment, crop_fraction: f64) -> Result<Scene> {
    if !(crop_fraction > 0.0 && crop_fraction < 0.5) {
        return Err(Error::InvalidFraction(crop_fraction));
    }
    let dims = base.dims();
    let r = base.rect;
    let crop = (crop_fraction * r.height as f64).round() as usize;
    let band = Rect::new(r.top + r.height - crop, r.left, crop, r.width);
    let hair_bottom = if crop > 0 { band.indicator(dims) } else { Mask::zeros(dims.height, dims.width) };
    let keep = hair_bottom.complement();
    let target_mask = base.mask.multiply(&keep)?;
    let target = base.image.multiply_mask(&keep)?;
    let mut p = base_params(base);
    p.push(("crop_fraction", crop_fraction));
    Ok(Scene {
        source: base.image.clone(),
        source_mask: base.mask.clone(),
        target,
        target_mask,
        visibility: Mask::zeros(dims.height, dims.width),
        hair_bottom,
        gt_flow: None,
        provenance: Provenance {
            scenario: "tuckin".into(),
            params: params(&p),
            seed: 0,
        },
    })
}

/// A hand (or arm) band occludes part of the garment.
pub fn make_hand_occlusion_scenario(base: &Garment, band: Rect) -> Result<Scene> {
    let dims = base.dims();
    if !band.fits(dims) {
        return Err(Error::InvalidRect(format!("band {band:?} does not fit in the raster")));
    }
    if !band.intersects(&base.rect) {
        return Err(Error::DisjointBand);
    }
    let vis = band.indicator(dims);
    let target = base.image.multiply_mask(&vis.complement())?;
    let mut p = base_params(base);
    p.extend([
        ("band_top", band.top as f64),
        ("band_left", band.left as f64),
        ("band_height", band.height as f64),
        ("band_width", band.width as f64),
    ]);
    Ok(Scene {
        source: base.image.clone(),
        source_mask: base.mask.clone(),
        target,
        target_mask: base.mask.clone(),
        visibility: vis,
        hair_bottom: Mask::zeros(dims.height, dims.width),
        gt_flow: None,
        provenance: Provenance {
            scenario: "hand".into(),
            params: params(&p),
            seed: 0,
        },
    })
}

/// Identity scene: target equals source, nothing occluded.
pub fn make_identity_scenario(base: &Garment) -> Result<Scene> {
    let mut scene = make_scale_scenario(base, 1.0, 1.0)?;
    scene.provenance.scenario = "identity".into();
    scene.provenance.params.retain(|k, _| k != "sy" && k != "sx");
    Ok(scene)
}

/// Default occluder band for [`make_hand_occlusion_scenario`]: a horizontal
/// strip across the middle of the garment, wider than the garment.
pub fn default_hand_band(base: &Garment) -> Rect {
    let r = base.rect;
    let dims = base.dims();
    let height = (r.height / 4).max(1);
    let left = r.left.saturating_sub(r.width / 4);
    let right = (r.left + r.width + r.width / 4).min(dims.width);
    Rect::new(r.top + r.height / 2 - height / 2, left, height, right - left)
}

/// Pixels whose `(2 margin + 1)^2` neighborhood lies entirely inside `mask`.
pub fn interior(mask: &Mask, margin: usize) -> Mask {
    let (h, w) = (mask.height(), mask.width());
    Mask::from_fn(h, w, |y, x| {
        let inside = (y.saturating_sub(margin)..=(y + margin).min(h - 1))
            .all(|yy| (x.saturating_sub(margin)..=(x + margin).min(w - 1)).all(|xx| mask.get(yy, xx) > 0.5));
        let away_from_edge = y >= margin && x >= margin && y + margin < h && x + margin < w;
        if inside && away_from_edge {
            1.0
        } else {
            0.0
        }
    })
    .expect("binary")
}
