//! Rasters, flow fields and the operators that move pixels around.

mod extents;
mod raster;
mod resample;
mod visibility;
mod warp;

pub use extents::{extent_ratio, mask_extents, Axis, RatioConvention};
pub use raster::{Dims, Extents, FlowField, Image, Mask, Raster};
pub use resample::{compose_refine, downsample_image, downsample_mask, downsample_mask_max, upsample_flow};
pub use visibility::{apply_visibility, apply_visibility_adjoint, combine_visibility, combine_visibility_adjoint};
pub use warp::{sample_position, warp, warp_adjoint, warp_flow_adjoint, warp_mask, WarpAdjoint};
