use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use super::adam::AdamParams;
use crate::error::{Error, Result};
use crate::flow::RatioConvention;
use crate::losses::Reduction;

/// Regularizer applied to the local flow.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LossVariant {
    Nipr,
    So,
    Tv,
    None,
}

/// Where the visibility mask of body-part occluders comes from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum VisibilityMode {
    /// Taken from the scene.
    Oracle,
    /// Optimized jointly with the flow, supervised by cross entropy.
    Fit,
}

/// Which anchor pixels the preservation term sums over.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RegionMode {
    Full,
    Garment,
}

/// Units of the optimized flow parameters.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FlowUnits {
    /// One unit spans half the grid along its axis, as in `[-1, 1]` grid coordinates.
    Normalized,
    Pixels,
}

macro_rules! keyword_enum {
    ($ty:ident { $($name:literal => $variant:ident),+ $(,)? }) => {
        impl std::str::FromStr for $ty {
            type Err = Error;
            fn from_str(s: &str) -> Result<Self> {
                match s {
                    $($name => Ok($ty::$variant),)+
                    other => Err(Error::Config(format!(
                        "unknown {} `{other}`", stringify!($ty)
                    ))),
                }
            }
        }
        impl std::fmt::Display for $ty {
            fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
                f.write_str(match self { $($ty::$variant => $name,)+ })
            }
        }
    };
}

keyword_enum!(LossVariant { "nipr" => Nipr, "so" => So, "tv" => Tv, "none" => None });
keyword_enum!(VisibilityMode { "oracle" => Oracle, "fit" => Fit });
keyword_enum!(RegionMode { "full" => Full, "garment" => Garment });
keyword_enum!(FlowUnits { "normalized" => Normalized, "pixels" => Pixels });

/// Default loss weights `α1..α6`: garment L1, perceptual, mask L1, visibility
/// cross entropy, consistency, regularizer.
pub const DEFAULT_ALPHA: [f64; 6] = [1.0, 0.2, 2.0, 2.0, 1.0, 1.0];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PyramidConfig {
    /// Number of pyramid levels.
    pub scales: usize,
    pub height: usize,
    pub width: usize,
    /// Adam iterations at every level.
    pub iterations: usize,
    /// `α1..α6`. The perceptual slot `α2` is kept but never evaluated.
    pub alpha: [f64; 6],
    pub adam: AdamParams,
    pub ratio_convention: RatioConvention,
    pub region: RegionMode,
    pub reduction: Reduction,
    pub loss_variant: LossVariant,
    pub visibility: VisibilityMode,
    pub seed: u64,
    /// Run the mask-only global stage.
    pub global_stage: bool,
    /// Mask out occluders in the local stage.
    pub occlusion: bool,
    /// Weight of the second-order term in the global stage.
    pub global_smoothness: f64,
    pub flow_units: FlowUnits,
    /// Adam step size for visibility logits in fit mode.
    pub visibility_learning_rate: f64,
}

impl Default for PyramidConfig {
    fn default() -> Self {
        PyramidConfig {
            scales: 5,
            height: 64,
            width: 48,
            iterations: 500,
            alpha: DEFAULT_ALPHA,
            adam: AdamParams::default(),
            ratio_convention: RatioConvention::Sampling,
            region: RegionMode::Full,
            reduction: Reduction::Mean,
            loss_variant: LossVariant::Nipr,
            visibility: VisibilityMode::Oracle,
            seed: 0,
            global_stage: true,
            occlusion: true,
            global_smoothness: 0.25,
            flow_units: FlowUnits::Normalized,
            visibility_learning_rate: 0.05,
        }
    }
}

fn parse_num<T: std::str::FromStr>(key: &str, v: &str) -> Result<T> {
    v.parse()
        .map_err(|_| Error::Config(format!("`{key}`: cannot parse `{v}`")))
}

fn parse_bool(key: &str, v: &str) -> Result<bool> {
    match v {
        "true" => Ok(true),
        "false" => Ok(false),
        _ => Err(Error::Config(format!("`{key}`: expected true or false, got `{v}`"))),
    }
}

impl PyramidConfig {
    pub fn validate(&self) -> Result<()> {
        if self.scales == 0 {
            return Err(Error::Config("scales must be at least 1".into()));
        }
        let div = 1usize
            .checked_shl(self.scales as u32 - 1)
            .filter(|d| *d > 0 && self.scales <= 32)
            .ok_or_else(|| Error::Config(format!("{} scales is too many", self.scales)))?;
        if self.height == 0 || self.width == 0 || self.height % div != 0 || self.width % div != 0 {
            return Err(Error::Config(format!(
                "resolution {}x{} is not divisible by 2^{} = {div}",
                self.height,
                self.width,
                self.scales - 1
            )));
        }
        if self.alpha.iter().any(|a| !a.is_finite() || *a < 0.0) {
            return Err(Error::Config(format!("loss weights must be non-negative: {:?}", self.alpha)));
        }
        let positive = [
            ("learning_rate", self.adam.learning_rate),
            ("epsilon", self.adam.epsilon),
            ("visibility_learning_rate", self.visibility_learning_rate),
        ];
        for (k, v) in positive {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::Config(format!("{k} must be positive, got {v}")));
            }
        }
        for (k, v) in [("beta1", self.adam.beta1), ("beta2", self.adam.beta2)] {
            if !(0.0..1.0).contains(&v) {
                return Err(Error::Config(format!("{k} must lie in [0, 1), got {v}")));
            }
        }
        if !(self.global_smoothness.is_finite() && self.global_smoothness >= 0.0) {
            return Err(Error::Config("global_smoothness must be non-negative".into()));
        }
        Ok(())
    }

    /// Downsampling factor of level `i`, coarsest first.
    pub fn factor(&self, level: usize) -> usize {
        1 << (self.scales - 1 - level)
    }

    /// Flat `key = value` pairs, one per field, in a fixed order.
    pub fn to_pairs(&self) -> Vec<(&'static str, String)> {
        let alpha = self.alpha.iter().map(|a| a.to_string()).collect::<Vec<_>>().join(", ");
        vec![
            ("scales", self.scales.to_string()),
            ("height", self.height.to_string()),
            ("width", self.width.to_string()),
            ("iterations", self.iterations.to_string()),
            ("alpha", alpha),
            ("learning_rate", self.adam.learning_rate.to_string()),
            ("beta1", self.adam.beta1.to_string()),
            ("beta2", self.adam.beta2.to_string()),
            ("epsilon", self.adam.epsilon.to_string()),
            ("ratio_convention", self.ratio_convention.to_string()),
            ("region", self.region.to_string()),
            ("reduction", self.reduction.to_string()),
            ("loss_variant", self.loss_variant.to_string()),
            ("visibility", self.visibility.to_string()),
            ("seed", self.seed.to_string()),
            ("global_stage", self.global_stage.to_string()),
            ("occlusion", self.occlusion.to_string()),
            ("global_smoothness", self.global_smoothness.to_string()),
            ("flow_units", self.flow_units.to_string()),
            ("visibility_learning_rate", self.visibility_learning_rate.to_string()),
        ]
    }

    /// Overrides one field from its textual value.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let v = value.trim();
        match key {
            "scales" => self.scales = parse_num(key, v)?,
            "height" => self.height = parse_num(key, v)?,
            "width" => self.width = parse_num(key, v)?,
            "iterations" => self.iterations = parse_num(key, v)?,
            "alpha" => {
                let parts = v
                    .split(',')
                    .map(|p| parse_num::<f64>(key, p.trim()))
                    .collect::<Result<Vec<_>>>()?;
                self.alpha = parts
                    .try_into()
                    .map_err(|p: Vec<f64>| Error::Config(format!("`alpha` needs 6 weights, got {}", p.len())))?;
            }
            "learning_rate" => self.adam.learning_rate = parse_num(key, v)?,
            "beta1" => self.adam.beta1 = parse_num(key, v)?,
            "beta2" => self.adam.beta2 = parse_num(key, v)?,
            "epsilon" => self.adam.epsilon = parse_num(key, v)?,
            "ratio_convention" => self.ratio_convention = v.parse()?,
            "region" => self.region = v.parse()?,
            "reduction" => self.reduction = v.parse()?,
            "loss_variant" => self.loss_variant = v.parse()?,
            "visibility" => self.visibility = v.parse()?,
            "seed" => self.seed = parse_num(key, v)?,
            "global_stage" => self.global_stage = parse_bool(key, v)?,
            "occlusion" => self.occlusion = parse_bool(key, v)?,
            "global_smoothness" => self.global_smoothness = parse_num(key, v)?,
            "flow_units" => self.flow_units = v.parse()?,
            "visibility_learning_rate" => self.visibility_learning_rate = parse_num(key, v)?,
            other => return Err(Error::Config(format!("unknown key `{other}`"))),
        }
        Ok(())
    }

    /// Parses `key = value` lines on top of the defaults. Blank lines and
    /// lines starting with `#` are skipped; unknown or repeated keys are errors.
    pub fn parse(text: &str) -> Result<Self> {
        let (cfg, _) = PyramidConfig::parse_explicit(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Like [`PyramidConfig::parse`] but also returns the keys the text set,
    /// and leaves validation to the caller.
    pub fn parse_explicit(text: &str) -> Result<(Self, BTreeSet<String>)> {
        let mut cfg = PyramidConfig::default();
        let mut seen = BTreeSet::new();
        for (n, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| Error::Config(format!("line {}: expected `key = value`", n + 1)))?;
            let k = k.trim();
            if !seen.insert(k.to_string()) {
                return Err(Error::Config(format!("line {}: duplicate key `{k}`", n + 1)));
            }
            cfg.set(k, v)
                .map_err(|e| Error::Config(format!("line {}: {e}", n + 1)))?;
        }
        Ok((cfg, seen))
    }

    pub fn render(&self) -> String {
        self.to_pairs()
            .into_iter()
            .map(|(k, v)| format!("{k} = {v}\n"))
            .collect()
    }
}
