//! Physical placement of bitonic-network indices in the sort texture.
//!
//! Every texel carries two key-value pairs, and logical index `l` always sits
//! in slot `l & 1` of texel `t = l >> 1`, so step-1 partners share a texel.
//! Work items own a vertical texel pair: rows `2r` and `2r + 1` at one column.
//! Numbering those pairs row-major gives a pair position `p` with `x = p mod W`
//! and `y = 2 * (p / W) + parity`.
//!
//! For step `j >= 2` the texel partner distance is `2^(j-2)`. The layout for
//! that step stores bit `j - 2` of `t` as the row parity and the remaining
//! bits, in order, as `p`. Partners then differ only in row parity: they are
//! vertical neighbours in one column. Going from step `j + 1` to step `j`
//! exchanges the parity bit with bit `j - 2` of `p`; on the texture this is
//! exactly slicing even and odd rows apart, cutting both into segments of
//! `2^(j-2)` texels, swapping odd segments of the first group with the
//! preceding even segments of the second, and reshaping.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use crate::texture::choose_dimensions;
use crate::{Error, Result};

use super::network::bitonic_partner;

/// Shape of a sort texture for a padded power-of-two element count.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SortGeometry {
    pub n_logical: u32,
    /// `log2(n_logical)`; the number of network stages.
    pub stages: u32,
    pub width: u32,
    pub height: u32,
    w_bits: u32,
}

impl SortGeometry {
    /// Geometry for `n_logical` elements (a power of two, at least 4).
    pub fn new(n_logical: u32) -> Result<Self> {
        if n_logical < 4 || !n_logical.is_power_of_two() {
            return Err(Error::Precondition(format!(
                "sort size {n_logical} must be a power of two >= 4"
            )));
        }
        let (mut width, mut height) = choose_dimensions(n_logical as u64 / 2);
        if height == 1 {
            // Two texels: work items need a row pair.
            width /= 2;
            height = 2;
        }
        Ok(SortGeometry {
            n_logical,
            stages: n_logical.trailing_zeros(),
            width,
            height,
            w_bits: width.trailing_zeros(),
        })
    }

    pub fn texels(&self) -> u32 {
        self.n_logical / 2
    }

    /// Grid of work items for compare passes: one per vertical texel pair.
    pub fn pair_rows(&self) -> u32 {
        self.height / 2
    }

    #[inline]
    fn pair_coord(&self, p: u32, parity: u32) -> (u32, u32) {
        (p & (self.width - 1), ((p >> self.w_bits) << 1) | parity)
    }

    #[inline]
    fn pair_index(&self, x: u32, y: u32) -> (u32, u32) {
        (((y >> 1) << self.w_bits) | x, y & 1)
    }

    /// Texel position of logical texel `t` in the layout for step `step >= 2`.
    #[inline]
    pub fn step_position(&self, step: u32, t: u32) -> (u32, u32) {
        let c = step - 2;
        let parity = (t >> c) & 1;
        let low = t & ((1 << c) - 1);
        let high = t >> (c + 1);
        self.pair_coord((high << c) | low, parity)
    }

    /// Logical texel stored at `(x, y)` in the layout for step `step >= 2`.
    #[inline]
    pub fn step_texel(&self, step: u32, x: u32, y: u32) -> u32 {
        let c = step - 2;
        let (p, parity) = self.pair_index(x, y);
        let low = p & ((1 << c) - 1);
        let high = p >> c;
        (high << (c + 1)) | (parity << c) | low
    }
}

/// Physical slot of one key-value pair.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Slot {
    pub x: u32,
    pub y: u32,
    pub slot: u32,
}

/// Which logical index occupies each physical slot.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PlacementMap {
    width: u32,
    height: u32,
    /// Indexed by `2 * (y * width + x) + slot`.
    logical: Vec<u32>,
}

/// Outcome of a partner-adjacency check.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct AdjacencyReport {
    pub pairs_checked: u64,
    pub violations: u64,
    pub first_violation: Option<u32>,
}

impl PlacementMap {
    pub fn new(width: u32, height: u32) -> Self {
        PlacementMap {
            width,
            height,
            logical: vec![u32::MAX; 2 * width as usize * height as usize],
        }
    }

    /// Placement produced by the layout for `step` (`step >= 2`).
    pub fn for_step(geom: &SortGeometry, step: u32) -> Self {
        let mut m = PlacementMap::new(geom.width, geom.height);
        for t in 0..geom.texels() {
            let (x, y) = geom.step_position(step, t);
            m.set(x, y, 0, 2 * t);
            m.set(x, y, 1, 2 * t + 1);
        }
        m
    }

    pub fn width(&self) -> u32 {
        self.width
    }

    pub fn height(&self) -> u32 {
        self.height
    }

    #[inline]
    pub fn get(&self, x: u32, y: u32, slot: u32) -> u32 {
        self.logical[2 * (y as usize * self.width as usize + x as usize) + slot as usize]
    }

    #[inline]
    pub fn set(&mut self, x: u32, y: u32, slot: u32, logical: u32) {
        self.logical[2 * (y as usize * self.width as usize + x as usize) + slot as usize] = logical;
    }

    pub fn len(&self) -> usize {
        self.logical.len()
    }

    pub fn is_empty(&self) -> bool {
        self.logical.is_empty()
    }

    /// Inverse map (logical index to slot), or the first logical index that is
    /// missing, duplicated or out of range.
    pub fn positions(&self) -> core::result::Result<Vec<Slot>, u32> {
        let n = self.logical.len();
        let mut pos = vec![
            Slot {
                x: u32::MAX,
                y: u32::MAX,
                slot: 0
            };
            n
        ];
        for (i, &l) in self.logical.iter().enumerate() {
            if l as usize >= n {
                return Err(l);
            }
            if pos[l as usize].x != u32::MAX {
                return Err(l);
            }
            let texel = (i / 2) as u32;
            pos[l as usize] = Slot {
                x: texel % self.width,
                y: texel / self.width,
                slot: (i % 2) as u32,
            };
        }
        Ok(pos)
    }

    pub fn is_bijection(&self) -> bool {
        self.positions().is_ok()
    }

    /// Checks that every partner at `step` is an immediate vertical neighbour
    /// in the same column and slot (`step >= 2`) or in the same texel
    /// (`step == 1`).
    pub fn check_adjacency(&self, step: u32) -> Result<AdjacencyReport> {
        let pos = self.positions().map_err(|l| Error::LayoutViolation {
            pass: 0,
            logical: l,
            detail: "placement is not a bijection".into(),
        })?;
        let mut report = AdjacencyReport::default();
        for l in 0..pos.len() as u32 {
            let p = bitonic_partner(l, step);
            if p < l {
                continue;
            }
            report.pairs_checked += 1;
            let (a, b) = (pos[l as usize], pos[p as usize]);
            let ok = if step == 1 {
                a.x == b.x && a.y == b.y && a.slot != b.slot
            } else {
                a.x == b.x && a.slot == b.slot && a.y.abs_diff(b.y) == 1 && a.y.min(b.y) % 2 == 0
            };
            if !ok {
                report.violations += 1;
                report.first_violation.get_or_insert(l);
            }
        }
        Ok(report)
    }
}

/// Placement the kernels expect before step `step` of stage `stage`.
///
/// Step 1 is always executed together with step 2, so it shares step 2's
/// placement. The placement does not depend on the stage.
pub fn layout_for_step(stage: u32, step: u32, n_logical: u32) -> Result<PlacementMap> {
    let geom = SortGeometry::new(n_logical)?;
    if stage < 2 || stage > geom.stages || step < 1 || step > stage {
        return Err(Error::Schedule { stage, step });
    }
    Ok(PlacementMap::for_step(&geom, step.max(2)))
}
