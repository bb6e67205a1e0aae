//! Tile-based forward Gaussian splatting.
//!
//! [`render_frame`] runs the six pipeline stages on texture memory and
//! reports per-stage access counts; [`render_reference`] is a plain scalar
//! renderer over the same projection used to check it.
//!
//! ```
//! use texsplat_core::gs::{render_frame, render_reference, Camera, Gaussian3D, PipelineConfig};
//!
//! let cam = Camera::axis_aligned([0.0, 0.0, 0.0], 40.0, 32, 32);
//! let scene = [
//!     Gaussian3D::isotropic([0.0, 0.0, 4.0], 0.05, 0.8, [1.0, 0.2, 0.2]),
//!     Gaussian3D::isotropic([0.1, 0.1, 5.0], 0.08, 0.6, [0.2, 0.2, 1.0]),
//! ];
//! let out = render_frame(&scene, &cam, &PipelineConfig::default()).unwrap();
//! let oracle = render_reference(&scene, &cam, [0.0; 3]).unwrap();
//! assert!(out.image.max_abs_diff(&oracle) <= 1e-5);
//! assert_eq!(out.stages.len(), 6);
//! ```

pub mod keys;
pub mod pack;
pub mod pipeline;
pub mod project;
mod reference;
pub mod sh;
pub mod stages;
mod types;

/// Tile edge in pixels.
pub const TILE: u32 = 16;

pub use keys::{extract_tile, normalize_key, DepthBounds};
pub use pipeline::{ablation_ladder, render_frame, render_frame_with, Diagnostics, FrameOutput, Hooks, PipelineConfig, StageMetrics, STAGE_NAMES};
pub use project::{project_gaussian, CullReason};
pub use reference::render_reference;
pub use stages::{duplicate_with_tiles, identify_ranges, prefix_scan};
pub use types::{Camera, FrameBuffer, Gaussian3D, ProjectedGaussian, TileRange, GAUSSIAN_SCALARS, SH_COEFFS};

#[cfg(test)]
mod tests;
