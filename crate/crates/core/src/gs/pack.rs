//! Parameter textures for the splatting kernels.
//!
//! Packed inputs use three groups sharing one near-square index grid of
//! `W1 x H1` Gaussians: group 1 holds `(mean, opacity)` in one texel, group 2
//! the covariance in two row-adjacent texels and group 3 the 48 SH values in
//! twelve texels. Unpacked inputs spend one single-lane texture per scalar.
//! Outputs follow the same idea: `(x, y, depth, radius)`, `conic_opacity`
//! and `rgb` as three packed texels or eleven scalar textures.

use alloc::vec::Vec;

use crate::texture::{choose_dimensions, LaneFormat, Texel, Texture2D, TextureLimits, Tracer};
use crate::{Error, Result};

use super::types::{Gaussian3D, ProjectedGaussian, GAUSSIAN_SCALARS};

/// Placement of a Gaussian's twelve SH texels.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ShLayout {
    /// 3 wide, 4 tall block at `(3 * (g mod W1), 4 * (g div W1))`.
    #[default]
    Block3x4,
    /// 12 texels in one row at `(12 * (g mod W1), g div W1)`.
    Strip12x1,
}

impl ShLayout {
    fn extent(self) -> (u32, u32) {
        match self {
            ShLayout::Block3x4 => (3, 4),
            ShLayout::Strip12x1 => (12, 1),
        }
    }

    /// Texel `k` (0..12) of Gaussian cell `(gx, gy)`.
    #[inline]
    pub fn texel(self, gx: u32, gy: u32, k: u32) -> (u32, u32) {
        match self {
            ShLayout::Block3x4 => (3 * gx + k % 3, 4 * gy + k / 3),
            ShLayout::Strip12x1 => (12 * gx + k, gy),
        }
    }
}

/// Near-square grid that indexes Gaussians in every group.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct IndexGrid {
    pub count: usize,
    pub width: u32,
    pub height: u32,
}

impl IndexGrid {
    pub fn new(count: usize) -> Self {
        let (width, height) = choose_dimensions(count as u64);
        IndexGrid { count, width, height }
    }

    #[inline]
    pub fn cell(&self, g: u32) -> (u32, u32) {
        (g % self.width, g / self.width)
    }
}

fn capacity_check(grid: IndexGrid, scale: (u32, u32), limits: TextureLimits) -> Result<()> {
    let fits = |w: u32, h: u32| w as u64 * scale.0 as u64 <= limits.max_side as u64 && h as u64 * scale.1 as u64 <= limits.max_side as u64;
    if fits(grid.width, grid.height) {
        return Ok(());
    }
    let mut max = 1usize;
    while {
        let (w, h) = choose_dimensions(2 * max as u64);
        fits(w, h)
    } {
        max *= 2;
    }
    Err(Error::Capacity { count: grid.count, max })
}

/// Input parameter textures.
#[derive(Debug, Clone)]
pub enum InputTextures {
    Packed {
        grid: IndexGrid,
        sh_layout: ShLayout,
        group1: Texture2D,
        group2: Texture2D,
        group3: Texture2D,
    },
    /// One texture per scalar, value in lane 0.
    Scalar { grid: IndexGrid, planes: Vec<Texture2D> },
}

pub fn pack_inputs(gaussians: &[Gaussian3D], sh_layout: ShLayout, limits: TextureLimits) -> Result<InputTextures> {
    if gaussians.is_empty() {
        return Err(Error::Precondition("packing needs at least one Gaussian".into()));
    }
    let grid = IndexGrid::new(gaussians.len());
    let (sx, sy) = sh_layout.extent();
    capacity_check(grid, (sx.max(2), sy), limits)?;
    let (w, h) = (grid.width, grid.height);
    let mut group1 = Texture2D::new(w, h, LaneFormat::Float, limits)?;
    let mut group2 = Texture2D::new(2 * w, h, LaneFormat::Float, limits)?;
    let mut group3 = Texture2D::new(sx * w, sy * h, LaneFormat::Float, limits)?;
    for (g, gs) in gaussians.iter().enumerate() {
        let (gx, gy) = grid.cell(g as u32);
        let [m0, m1, m2] = gs.mean;
        group1.write_texel(gx, gy, Texel::from_f32([m0, m1, m2, gs.opacity]))?;
        let c = gs.cov3d;
        group2.write_texel(2 * gx, gy, Texel::from_f32([c[0], c[1], c[2], c[3]]))?;
        group2.write_texel(2 * gx + 1, gy, Texel::from_f32([c[4], c[5], 0.0, 0.0]))?;
        for k in 0..12u32 {
            let (x, y) = sh_layout.texel(gx, gy, k);
            let i = 4 * k as usize;
            group3.write_texel(x, y, Texel::from_f32([gs.sh[i], gs.sh[i + 1], gs.sh[i + 2], gs.sh[i + 3]]))?;
        }
    }
    Ok(InputTextures::Packed {
        grid,
        sh_layout,
        group1,
        group2,
        group3,
    })
}

pub fn scalar_inputs(gaussians: &[Gaussian3D], limits: TextureLimits) -> Result<InputTextures> {
    if gaussians.is_empty() {
        return Err(Error::Precondition("packing needs at least one Gaussian".into()));
    }
    let grid = IndexGrid::new(gaussians.len());
    capacity_check(grid, (1, 1), limits)?;
    let mut planes = Vec::with_capacity(GAUSSIAN_SCALARS);
    for _ in 0..GAUSSIAN_SCALARS {
        planes.push(Texture2D::new(grid.width, grid.height, LaneFormat::Float, limits)?);
    }
    for (g, gs) in gaussians.iter().enumerate() {
        let (gx, gy) = grid.cell(g as u32);
        for (plane, v) in planes.iter_mut().zip(gs.scalars()) {
            plane.write_texel(gx, gy, Texel::from_f32([v, 0.0, 0.0, 0.0]))?;
        }
    }
    Ok(InputTextures::Scalar { grid, planes })
}

impl InputTextures {
    pub fn grid(&self) -> IndexGrid {
        match self {
            InputTextures::Packed { grid, .. } | InputTextures::Scalar { grid, .. } => *grid,
        }
    }

    fn scalar(tr: &mut Tracer<'_>, planes: &[Texture2D], i: usize, x: u32, y: u32, wi: u32) -> Result<f32> {
        Ok(tr.read(&planes[i], x, y, wi)?.f32(0))
    }

    /// Mean, plus opacity when it comes for free with the same fetch.
    pub fn read_mean(&self, tr: &mut Tracer<'_>, g: u32, wi: u32) -> Result<([f32; 3], Option<f32>)> {
        let (x, y) = self.grid().cell(g);
        match self {
            InputTextures::Packed { group1, .. } => {
                let t = tr.read(group1, x, y, wi)?;
                Ok(([t.f32(0), t.f32(1), t.f32(2)], Some(t.f32(3))))
            }
            InputTextures::Scalar { planes, .. } => {
                let mut m = [0.0; 3];
                for (i, v) in m.iter_mut().enumerate() {
                    *v = Self::scalar(tr, planes, i, x, y, wi)?;
                }
                Ok((m, None))
            }
        }
    }

    pub fn read_opacity(&self, tr: &mut Tracer<'_>, g: u32, wi: u32) -> Result<f32> {
        let (x, y) = self.grid().cell(g);
        match self {
            InputTextures::Packed { group1, .. } => Ok(tr.read(group1, x, y, wi)?.f32(3)),
            InputTextures::Scalar { planes, .. } => Self::scalar(tr, planes, 3, x, y, wi),
        }
    }

    pub fn read_cov(&self, tr: &mut Tracer<'_>, g: u32, wi: u32) -> Result<[f32; 6]> {
        let (x, y) = self.grid().cell(g);
        match self {
            InputTextures::Packed { group2, .. } => {
                let a = tr.read(group2, 2 * x, y, wi)?;
                let b = tr.read(group2, 2 * x + 1, y, wi)?;
                Ok([a.f32(0), a.f32(1), a.f32(2), a.f32(3), b.f32(0), b.f32(1)])
            }
            InputTextures::Scalar { planes, .. } => {
                let mut c = [0.0; 6];
                for (i, v) in c.iter_mut().enumerate() {
                    *v = Self::scalar(tr, planes, 4 + i, x, y, wi)?;
                }
                Ok(c)
            }
        }
    }

    pub fn read_sh(&self, tr: &mut Tracer<'_>, g: u32, wi: u32) -> Result<[f32; 48]> {
        let (x, y) = self.grid().cell(g);
        let mut sh = [0.0; 48];
        match self {
            InputTextures::Packed { group3, sh_layout, .. } => {
                for k in 0..12u32 {
                    let (tx, ty) = sh_layout.texel(x, y, k);
                    let t = tr.read(group3, tx, ty, wi)?;
                    sh[4 * k as usize..4 * k as usize + 4].copy_from_slice(&t.to_f32());
                }
            }
            InputTextures::Scalar { planes, .. } => {
                for (i, v) in sh.iter_mut().enumerate() {
                    *v = Self::scalar(tr, planes, 10 + i, x, y, wi)?;
                }
            }
        }
        Ok(sh)
    }

    /// Host-side inverse of packing.
    pub fn unpack(&self, g: u32) -> Result<Gaussian3D> {
        if g as usize >= self.grid().count {
            return Err(Error::CorruptIndex {
                index: g as usize,
                count: self.grid().count,
            });
        }
        let mut tr = Tracer::untraced();
        let (mean, op) = self.read_mean(&mut tr, g, 0)?;
        let opacity = match op {
            Some(o) => o,
            None => self.read_opacity(&mut tr, g, 0)?,
        };
        Ok(Gaussian3D {
            mean,
            opacity,
            cov3d: self.read_cov(&mut tr, g, 0)?,
            sh: self.read_sh(&mut tr, g, 0)?,
        })
    }
}

/// Preprocess outputs consumed by duplication and rendering.
#[derive(Debug, Clone)]
pub struct OutputTextures {
    pub grid: IndexGrid,
    pub packed: bool,
    /// Packed: `[xy_depth_radius, conic_opacity, rgb]`; scalar: 11 planes
    /// `x, y, depth, radius, a, b, c, opacity, r, g, b`.
    pub textures: Vec<Texture2D>,
}

/// Scalars the renderer needs per Gaussian.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RenderParams {
    pub xy: [f32; 2],
    pub conic_opacity: [f32; 4],
    pub rgb: [f32; 3],
}

impl OutputTextures {
    pub fn new(grid: IndexGrid, packed: bool, limits: TextureLimits) -> Result<Self> {
        let count = if packed { 3 } else { 11 };
        let mut textures = Vec::with_capacity(count);
        for _ in 0..count {
            textures.push(Texture2D::new(grid.width, grid.height, LaneFormat::Float, limits)?);
        }
        Ok(OutputTextures { grid, packed, textures })
    }

    pub fn write(&mut self, tr: &mut Tracer<'_>, g: u32, wi: u32, p: &ProjectedGaussian) -> Result<()> {
        let (x, y) = self.grid.cell(g);
        let [a, b, c, o] = p.conic_opacity;
        if self.packed {
            let texels = [
                [p.xy[0], p.xy[1], p.depth, p.radius],
                [a, b, c, o],
                [p.rgb[0], p.rgb[1], p.rgb[2], 0.0],
            ];
            for (tex, v) in self.textures.iter_mut().zip(texels) {
                tr.write(tex, x, y, wi, Texel::from_f32(v))?;
            }
        } else {
            let scalars = [p.xy[0], p.xy[1], p.depth, p.radius, a, b, c, o, p.rgb[0], p.rgb[1], p.rgb[2]];
            for (tex, v) in self.textures.iter_mut().zip(scalars) {
                tr.write(tex, x, y, wi, Texel::from_f32([v, 0.0, 0.0, 0.0]))?;
            }
        }
        Ok(())
    }

    fn scalars(&self, tr: &mut Tracer<'_>, range: core::ops::Range<usize>, g: u32, wi: u32, out: &mut [f32]) -> Result<()> {
        let (x, y) = self.grid.cell(g);
        for (o, i) in out.iter_mut().zip(range) {
            *o = tr.read(&self.textures[i], x, y, wi)?.f32(0);
        }
        Ok(())
    }

    /// `(x, y, depth, radius)`.
    pub fn read_geometry(&self, tr: &mut Tracer<'_>, g: u32, wi: u32) -> Result<[f32; 4]> {
        let (x, y) = self.grid.cell(g);
        if self.packed {
            return Ok(tr.read(&self.textures[0], x, y, wi)?.to_f32());
        }
        let mut v = [0.0; 4];
        self.scalars(tr, 0..4, g, wi, &mut v)?;
        Ok(v)
    }

    pub fn read_render(&self, tr: &mut Tracer<'_>, g: u32, wi: u32) -> Result<RenderParams> {
        let (x, y) = self.grid.cell(g);
        if self.packed {
            let a = tr.read(&self.textures[0], x, y, wi)?;
            let b = tr.read(&self.textures[1], x, y, wi)?;
            let c = tr.read(&self.textures[2], x, y, wi)?;
            return Ok(RenderParams {
                xy: [a.f32(0), a.f32(1)],
                conic_opacity: b.to_f32(),
                rgb: [c.f32(0), c.f32(1), c.f32(2)],
            });
        }
        let mut xy = [0.0; 2];
        let mut co = [0.0; 4];
        let mut rgb = [0.0; 3];
        self.scalars(tr, 0..2, g, wi, &mut xy)?;
        self.scalars(tr, 4..8, g, wi, &mut co)?;
        self.scalars(tr, 8..11, g, wi, &mut rgb)?;
        Ok(RenderParams {
            xy,
            conic_opacity: co,
            rgb,
        })
    }

    /// Host-side readback of everything written for `g`.
    pub fn unpack(&self, g: u32) -> Result<([f32; 4], RenderParams)> {
        let mut tr = Tracer::untraced();
        Ok((self.read_geometry(&mut tr, g, 0)?, self.read_render(&mut tr, g, 0)?))
    }
}
