//! Dense-flow garment warping.
//!
//! Backward bilinear warping of garment rasters, occlusion masking, a family
//! of flow regularizers including neighborhood integrity preservation, a
//! finite-difference gradient checker, coarse-to-fine Adam optimization of
//! global and local flows, and synthetic scenes with exact ground truth.

pub mod autodiff;
pub mod error;
pub mod flow;
pub mod formats;
pub mod losses;
pub mod optim;
pub mod synth;

pub use error::{Error, Result};
pub use flow::{Dims, Extents, FlowField, Image, Mask, Raster};
