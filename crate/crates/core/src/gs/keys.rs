//! Packing `(tile, depth)` into a single `f32` sort key.
//!
//! `key = tile * 1024 + clamp((d - lo) / (hi - lo), 0, 1) * 1023`. Tiles stay
//! exactly separated for every `tile < 2^20`; depth resolution inside a tile
//! is the float spacing at `tile * 1024`, which is finer than 1/1024 of the
//! depth range only for `tile < 2^13`.

use libm::floorf;

use crate::{Error, Result};

pub const TILE_BITS: u32 = 20;
pub const DEPTH_SCALE: f32 = 1024.0;
pub const MAX_TILES: u32 = 1 << TILE_BITS;
/// Relative padding applied to the per-frame depth range.
pub const DEPTH_MARGIN: f32 = 0.01;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DepthBounds {
    pub lo: f32,
    pub hi: f32,
}

impl DepthBounds {
    /// Per-frame bounds: min/max of `depths` widened by 1% of the span on
    /// each side. A flat or empty set gets a unit span.
    pub fn from_depths<I: IntoIterator<Item = f32>>(depths: I) -> Self {
        let (mut lo, mut hi) = (f32::INFINITY, f32::NEG_INFINITY);
        for d in depths {
            lo = lo.min(d);
            hi = hi.max(d);
        }
        if lo > hi {
            return DepthBounds { lo: 0.0, hi: 1.0 };
        }
        let span = (hi - lo).max(1e-3 * lo.abs().max(hi.abs()).max(1.0));
        DepthBounds {
            lo: lo - DEPTH_MARGIN * span,
            hi: hi + DEPTH_MARGIN * span,
        }
    }
}

/// Sort key for `(tile, depth)`.
pub fn normalize_key(tile: u32, depth: f32, bounds: DepthBounds) -> Result<f32> {
    if tile >= MAX_TILES {
        return Err(Error::KeyOverflow(tile));
    }
    let span = bounds.hi as f64 - bounds.lo as f64;
    let frac = if span > 0.0 {
        ((depth as f64 - bounds.lo as f64) / span).clamp(0.0, 1.0)
    } else {
        0.0
    };
    let exact = tile as f64 * DEPTH_SCALE as f64 + frac * (DEPTH_SCALE as f64 - 1.0);
    let mut key = exact as f32;
    // Never round up into the next tile.
    let ceiling = ((tile + 1) as f64 * DEPTH_SCALE as f64) as f32;
    if key >= ceiling {
        key = key.next_down();
    }
    Ok(key)
}

/// Tile component of a key.
pub fn extract_tile(key: f32) -> Result<u32> {
    if !(key >= 0.0) || !key.is_finite() {
        return Err(Error::InvalidKey(key));
    }
    Ok(floorf(key / DEPTH_SCALE) as u32)
}
