//! Block-wise storage of a sorted sequence.
//!
//! The texture is cut into `edge x edge` texel blocks (clamped to the texture
//! size). Consecutive runs of `2 * edge * edge` pairs fill one block each,
//! blocks are visited row-major over the block grid and texels row-major
//! inside a block, two pairs per texel.

use alloc::format;
use alloc::vec::Vec;

use crate::texture::{LaneFormat, Texel, Texture2D, TextureLimits};
use crate::{Error, Result};

use super::KvPair;

pub const SORTED_BLOCK_EDGE: u32 = 32;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BlockGrid {
    width: u32,
    height: u32,
    block_w: u32,
    block_h: u32,
}

impl BlockGrid {
    pub fn new(width: u32, height: u32, edge: u32) -> Result<Self> {
        if width == 0 || height == 0 || edge == 0 {
            return Err(Error::InvalidDimension { width, height });
        }
        let block_w = edge.min(width);
        let block_h = edge.min(height);
        if !width.is_multiple_of(block_w) || !height.is_multiple_of(block_h) {
            return Err(Error::InputMismatch(format!(
                "{width}x{height} texture is not a whole number of {edge}x{edge} blocks"
            )));
        }
        Ok(BlockGrid {
            width,
            height,
            block_w,
            block_h,
        })
    }

    /// Position of the texel holding pairs `2t` and `2t + 1`.
    #[inline]
    pub fn position(&self, t: u32) -> (u32, u32) {
        let per_block = self.block_w * self.block_h;
        let block = t / per_block;
        let inner = t % per_block;
        let blocks_x = self.width / self.block_w;
        (
            (block % blocks_x) * self.block_w + inner % self.block_w,
            (block / blocks_x) * self.block_h + inner / self.block_w,
        )
    }

    /// Inverse of [`BlockGrid::position`].
    #[inline]
    pub fn texel(&self, x: u32, y: u32) -> u32 {
        let blocks_x = self.width / self.block_w;
        let block = (y / self.block_h) * blocks_x + x / self.block_w;
        block * self.block_w * self.block_h + (y % self.block_h) * self.block_w + x % self.block_w
    }

    pub fn texels(&self) -> u32 {
        self.width * self.height
    }
}

pub(crate) fn pack_pairs(a: KvPair, b: KvPair) -> Texel {
    Texel::from_bits([a.key.to_bits(), a.value, b.key.to_bits(), b.value])
}

pub(crate) fn unpack_pairs(t: Texel) -> [KvPair; 2] {
    [
        KvPair {
            key: f32::from_bits(t.lanes[0]),
            value: t.lanes[1],
        },
        KvPair {
            key: f32::from_bits(t.lanes[2]),
            value: t.lanes[3],
        },
    ]
}

/// Writes `seq` (exactly two pairs per texel) into a block-wise texture.
pub fn blockwise_store(seq: &[KvPair], width: u32, height: u32, edge: u32) -> Result<Texture2D> {
    let grid = BlockGrid::new(width, height, edge)?;
    if seq.len() != 2 * grid.texels() as usize {
        return Err(Error::InputMismatch(format!(
            "{} pairs do not fill a {width}x{height} texture",
            seq.len()
        )));
    }
    let mut tex = Texture2D::new(width, height, LaneFormat::KeyValue, TextureLimits::default())?;
    for (t, pair) in seq.chunks_exact(2).enumerate() {
        let (x, y) = grid.position(t as u32);
        tex.write_texel(x, y, pack_pairs(pair[0], pair[1]))?;
    }
    Ok(tex)
}

/// Reads a block-wise texture back into linear order.
pub fn blockwise_load(tex: &Texture2D, edge: u32) -> Result<Vec<KvPair>> {
    let grid = BlockGrid::new(tex.width(), tex.height(), edge)?;
    let mut out = Vec::with_capacity(2 * grid.texels() as usize);
    for t in 0..grid.texels() {
        let (x, y) = grid.position(t);
        out.extend(unpack_pairs(tex.read_texel(x, y)?));
    }
    Ok(out)
}
