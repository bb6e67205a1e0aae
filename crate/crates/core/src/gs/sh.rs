//! Real spherical harmonics up to degree 3.

use crate::math::Vec3;

pub const SH_C0: f32 = 0.282_094_8;
pub const SH_C1: f32 = 0.488_602_52;
pub const SH_C2: [f32; 5] = [1.092_548_4, -1.092_548_4, 0.315_391_57, -1.092_548_4, 0.546_274_2];
pub const SH_C3: [f32; 7] = [
    -0.590_043_6,
    2.890_611_4,
    -0.457_045_8,
    0.373_176_33,
    -0.457_045_8,
    1.445_305_7,
    -0.590_043_6,
];

/// Colour along unit direction `dir`, offset by 0.5 and clamped to `[0, 1]`.
pub fn eval_sh(sh: &[f32; 48], dir: Vec3) -> [f32; 3] {
    let [x, y, z] = dir;
    let (xx, yy, zz) = (x * x, y * y, z * z);
    let (xy, yz, xz) = (x * y, y * z, x * z);
    let basis = [
        SH_C0,
        -SH_C1 * y,
        SH_C1 * z,
        -SH_C1 * x,
        SH_C2[0] * xy,
        SH_C2[1] * yz,
        SH_C2[2] * (2.0 * zz - xx - yy),
        SH_C2[3] * xz,
        SH_C2[4] * (xx - yy),
        SH_C3[0] * y * (3.0 * xx - yy),
        SH_C3[1] * xy * z,
        SH_C3[2] * y * (4.0 * zz - xx - yy),
        SH_C3[3] * z * (2.0 * zz - 3.0 * xx - 3.0 * yy),
        SH_C3[4] * x * (4.0 * zz - xx - yy),
        SH_C3[5] * z * (xx - yy),
        SH_C3[6] * x * (xx - 3.0 * yy),
    ];
    let mut rgb = [0.0f32; 3];
    for (c, out) in rgb.iter_mut().enumerate() {
        let mut acc = 0.0;
        for (k, b) in basis.iter().enumerate() {
            acc += b * sh[3 * k + c];
        }
        *out = (acc + 0.5).clamp(0.0, 1.0);
    }
    rgb
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn dc_only_is_view_independent() {
        let mut sh = [0.0; 48];
        sh[0] = 1.0;
        sh[1] = -0.5;
        sh[2] = 0.2;
        let a = eval_sh(&sh, [0.0, 0.0, 1.0]);
        let b = eval_sh(&sh, [0.6, 0.0, 0.8]);
        assert_eq!(a, b);
        assert!((a[0] - (SH_C0 + 0.5)).abs() < 1e-6);
        assert_eq!(a[1], 0.5 - 0.5 * SH_C0);
    }

    #[test]
    fn clamped() {
        let mut sh = [0.0; 48];
        sh[0] = 100.0;
        sh[1] = -100.0;
        assert_eq!(eval_sh(&sh, [0.0, 0.0, 1.0]), [1.0, 0.0, 0.5]);
    }

    #[test]
    fn degree_one_flips_with_direction() {
        let mut sh = [0.0; 48];
        // Coefficient 2 multiplies +z.
        sh[6] = 0.4;
        let up = eval_sh(&sh, [0.0, 0.0, 1.0]);
        let down = eval_sh(&sh, [0.0, 0.0, -1.0]);
        assert!((up[0] - 0.5 - SH_C1 * 0.4).abs() < 1e-6);
        assert!((down[0] - 0.5 + SH_C1 * 0.4).abs() < 1e-6);
    }
}
