//! EWA projection of 3D Gaussians to screen-space footprints.

use libm::{ceilf, floorf, sqrtf};

use crate::math::{mat3_mul, mat3_transpose, rotation_part, sym3_from_upper, transform_point, Mat3, Vec3};

use super::sh::eval_sh;
use super::types::{Camera, Gaussian3D, ProjectedGaussian};
use super::TILE;

/// Diagonal low-pass added to every 2D covariance.
pub const LOW_PASS: f32 = 0.3;
/// Guard band as a multiple of the frustum half-extent.
pub const GUARD_BAND: f32 = 1.3;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CullReason {
    /// Depth `<= near` (including behind the camera) or beyond `far`.
    Depth,
    /// Centre outside the guard band.
    GuardBand,
    /// 2D covariance determinant `<= 0` after the low-pass.
    Singular,
    /// Footprint covers no pixel of the image.
    Offscreen,
}

/// Camera-space centre and pixel position.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Center {
    pub cam: Vec3,
    pub xy: [f32; 2],
}

pub fn project_center(mean: &Vec3, cam: &Camera) -> Result<Center, CullReason> {
    let t = transform_point(&cam.view, mean);
    let z = t[2];
    if !(z > cam.near) || z > cam.far {
        return Err(CullReason::Depth);
    }
    let (tan_x, tan_y) = cam.tan_fov();
    let (u, v) = (t[0] / z, t[1] / z);
    if u.abs() > GUARD_BAND * tan_x || v.abs() > GUARD_BAND * tan_y {
        return Err(CullReason::GuardBand);
    }
    let xy = [
        cam.fx * u + (cam.width as f32 - 1.0) * 0.5,
        cam.fy * v + (cam.height as f32 - 1.0) * 0.5,
    ];
    Ok(Center { cam: t, xy })
}

/// Screen footprint: conic `(a, b, c)` and radius in pixels.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Footprint {
    pub cov2d: [f32; 3],
    pub conic: [f32; 3],
    pub radius: f32,
}

pub fn footprint(center: &Center, cov3d: &[f32; 6], cam: &Camera) -> Result<Footprint, CullReason> {
    let [x, y, z] = center.cam;
    let j: Mat3 = [
        [cam.fx / z, 0.0, -cam.fx * x / (z * z)],
        [0.0, cam.fy / z, -cam.fy * y / (z * z)],
        [0.0, 0.0, 0.0],
    ];
    let t = mat3_mul(&j, &rotation_part(&cam.view));
    let sigma = sym3_from_upper(cov3d);
    let cov = mat3_mul(&mat3_mul(&t, &sigma), &mat3_transpose(&t));
    let a = cov[0][0] + LOW_PASS;
    let b = cov[0][1];
    let c = cov[1][1] + LOW_PASS;
    let det = a * c - b * b;
    if !(det > 0.0) {
        return Err(CullReason::Singular);
    }
    let inv = 1.0 / det;
    let mid = 0.5 * (a + c);
    let lambda = mid + sqrtf((mid * mid - det).max(0.0));
    Ok(Footprint {
        cov2d: [a, b, c],
        conic: [c * inv, -b * inv, a * inv],
        radius: ceilf(3.0 * sqrtf(lambda)),
    })
}

/// Tiles whose pixels intersect `[x - r, x + r] x [y - r, y + r]`, as a
/// half-open tile rectangle, or `None` when no image pixel is covered.
pub fn tile_rect(xy: [f32; 2], radius: f32, cam: &Camera) -> Option<((u32, u32), (u32, u32))> {
    let span = |c: f32, extent: u32| -> Option<(u32, u32)> {
        let lo = ceilf(c - radius).max(0.0);
        let hi = floorf(c + radius).min(extent as f32 - 1.0);
        if !(lo <= hi) {
            return None;
        }
        Some((lo as u32 / TILE, hi as u32 / TILE + 1))
    };
    let (x0, x1) = span(xy[0], cam.width)?;
    let (y0, y1) = span(xy[1], cam.height)?;
    Some(((x0, y0), (x1, y1)))
}

pub fn view_dir(mean: &Vec3, eye: &Vec3) -> Vec3 {
    let d = [mean[0] - eye[0], mean[1] - eye[1], mean[2] - eye[2]];
    let len = sqrtf(d[0] * d[0] + d[1] * d[1] + d[2] * d[2]);
    if len > 0.0 {
        [d[0] / len, d[1] / len, d[2] / len]
    } else {
        [0.0, 0.0, 1.0]
    }
}

/// Full per-Gaussian preprocessing, shared by the pipeline kernel and the
/// reference renderer.
pub fn project_gaussian(g: &Gaussian3D, cam: &Camera, eye: &Vec3) -> Result<ProjectedGaussian, CullReason> {
    let center = project_center(&g.mean, cam)?;
    let fp = footprint(&center, &g.cov3d, cam)?;
    let (tile_min, tile_max) = tile_rect(center.xy, fp.radius, cam).ok_or(CullReason::Offscreen)?;
    Ok(ProjectedGaussian {
        xy: center.xy,
        depth: center.cam[2],
        radius: fp.radius,
        conic_opacity: [fp.conic[0], fp.conic[1], fp.conic[2], g.opacity],
        rgb: eval_sh(&g.sh, view_dir(&g.mean, eye)),
        tiles_touched: (tile_max.0 - tile_min.0) * (tile_max.1 - tile_min.1),
        tile_min,
        tile_max,
    })
}
