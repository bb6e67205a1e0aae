use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use crate::math::{is_psd3, mat4_inverse, Mat4, Vec3};
use crate::{Error, Result};

/// Scalars per input Gaussian: mean 3, opacity 1, covariance 6, SH 48.
pub const GAUSSIAN_SCALARS: usize = 58;
pub const SH_COEFFS: usize = 16;
pub const PSD_TOLERANCE: f64 = 1e-6;

/// One 3D Gaussian with activated parameters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Gaussian3D {
    pub mean: Vec3,
    /// In `[0, 1]`.
    pub opacity: f32,
    /// Upper triangle `(xx, xy, xz, yy, yz, zz)`.
    pub cov3d: [f32; 6],
    /// `sh[coef * 3 + channel]`, 16 coefficients of degree <= 3.
    pub sh: [f32; 48],
}

impl Gaussian3D {
    /// Isotropic Gaussian with a flat colour.
    pub fn isotropic(mean: Vec3, variance: f32, opacity: f32, rgb: [f32; 3]) -> Self {
        let mut sh = [0.0; 48];
        for c in 0..3 {
            sh[c] = (rgb[c] - 0.5) / super::sh::SH_C0;
        }
        Gaussian3D {
            mean,
            opacity,
            cov3d: [variance, 0.0, 0.0, variance, 0.0, variance],
            sh,
        }
    }

    /// All 58 scalars in packing order.
    pub fn scalars(&self) -> [f32; GAUSSIAN_SCALARS] {
        let mut out = [0.0; GAUSSIAN_SCALARS];
        out[..3].copy_from_slice(&self.mean);
        out[3] = self.opacity;
        out[4..10].copy_from_slice(&self.cov3d);
        out[10..].copy_from_slice(&self.sh);
        out
    }

    pub fn from_scalars(s: &[f32; GAUSSIAN_SCALARS]) -> Self {
        let mut g = Gaussian3D {
            mean: [s[0], s[1], s[2]],
            opacity: s[3],
            cov3d: [0.0; 6],
            sh: [0.0; 48],
        };
        g.cov3d.copy_from_slice(&s[4..10]);
        g.sh.copy_from_slice(&s[10..]);
        g
    }

    pub fn validate(&self, index: usize) -> Result<()> {
        let bad = |reason: &str| Error::InvalidGaussian {
            index,
            reason: reason.into(),
        };
        if !self.scalars().iter().all(|v| v.is_finite()) {
            return Err(bad("non-finite parameter"));
        }
        if !(0.0..=1.0).contains(&self.opacity) {
            return Err(bad("opacity outside [0, 1]"));
        }
        if !is_psd3(&self.cov3d, PSD_TOLERANCE) {
            return Err(bad("covariance is not positive semi-definite"));
        }
        Ok(())
    }
}

/// Pinhole camera.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Camera {
    /// Row-major world-to-camera transform; the camera looks down `+z`.
    pub view: Mat4,
    pub fx: f32,
    pub fy: f32,
    pub width: u32,
    pub height: u32,
    pub near: f32,
    pub far: f32,
}

impl Camera {
    /// Camera at `eye` looking along `+z` with no rotation.
    pub fn axis_aligned(eye: Vec3, focal: f32, width: u32, height: u32) -> Self {
        Camera {
            view: [
                [1.0, 0.0, 0.0, -eye[0]],
                [0.0, 1.0, 0.0, -eye[1]],
                [0.0, 0.0, 1.0, -eye[2]],
                [0.0, 0.0, 0.0, 1.0],
            ],
            fx: focal,
            fy: focal,
            width,
            height,
            near: 0.01,
            far: 1000.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidCamera(m.into()));
        if !(self.fx > 0.0 && self.fy > 0.0 && self.fx.is_finite() && self.fy.is_finite()) {
            return bad("focal lengths must be positive");
        }
        if self.width == 0 || self.height == 0 {
            return bad("image size must be non-zero");
        }
        if !(self.near.is_finite() && self.far.is_finite() && self.near < self.far) {
            return Err(Error::InvalidCamera(format!(
                "near {} must be below far {}",
                self.near, self.far
            )));
        }
        if !self.view.iter().flatten().all(|v| v.is_finite()) || mat4_inverse(&self.view).is_none() {
            return bad("world-to-camera matrix is not invertible");
        }
        Ok(())
    }

    /// Camera centre in world space.
    pub fn position(&self) -> Result<Vec3> {
        let inv = mat4_inverse(&self.view).ok_or_else(|| Error::InvalidCamera("singular view".into()))?;
        Ok([inv[0][3], inv[1][3], inv[2][3]])
    }

    pub fn tan_fov(&self) -> (f32, f32) {
        (self.width as f32 / (2.0 * self.fx), self.height as f32 / (2.0 * self.fy))
    }

    pub fn tiles(&self) -> (u32, u32) {
        (self.width.div_ceil(super::TILE), self.height.div_ceil(super::TILE))
    }
}

/// Screen-space result of preprocessing one Gaussian.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct ProjectedGaussian {
    pub xy: [f32; 2],
    pub depth: f32,
    pub radius: f32,
    /// Inverse 2D covariance `(a, b, c)` and opacity.
    pub conic_opacity: [f32; 4],
    pub rgb: [f32; 3],
    pub tiles_touched: u32,
    /// Touched tiles, half-open: `[min.0, max.0) x [min.1, max.1)`.
    pub tile_min: (u32, u32),
    pub tile_max: (u32, u32),
}

impl ProjectedGaussian {
    pub fn visible(&self) -> bool {
        self.tiles_touched > 0
    }
}

/// Half-open span of one tile in the sorted pair list.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TileRange {
    pub tile: u32,
    pub start: u32,
    pub end: u32,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FrameBuffer {
    pub width: u32,
    pub height: u32,
    /// Row-major RGB.
    pub data: Vec<f32>,
}

impl FrameBuffer {
    pub fn filled(width: u32, height: u32, rgb: [f32; 3]) -> Self {
        let mut data = vec![0.0; 3 * width as usize * height as usize];
        for px in data.chunks_exact_mut(3) {
            px.copy_from_slice(&rgb);
        }
        FrameBuffer { width, height, data }
    }

    pub fn get(&self, x: u32, y: u32) -> [f32; 3] {
        let i = 3 * (y as usize * self.width as usize + x as usize);
        [self.data[i], self.data[i + 1], self.data[i + 2]]
    }

    pub fn set(&mut self, x: u32, y: u32, rgb: [f32; 3]) {
        let i = 3 * (y as usize * self.width as usize + x as usize);
        self.data[i..i + 3].copy_from_slice(&rgb);
    }

    /// Largest per-channel absolute difference; infinite on shape mismatch.
    pub fn max_abs_diff(&self, other: &FrameBuffer) -> f32 {
        if self.width != other.width || self.height != other.height {
            return f32::INFINITY;
        }
        self.data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f32::max)
    }
}
