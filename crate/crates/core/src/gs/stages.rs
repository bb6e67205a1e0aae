//! Host-level forms of the scan, duplication and range stages.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use crate::{Error, Result};

use super::keys::{extract_tile, normalize_key, DepthBounds};
use super::types::{ProjectedGaussian, TileRange};

/// Exclusive prefix sum and total.
pub fn prefix_scan(counts: &[u32]) -> Result<(Vec<u32>, u32)> {
    let mut offsets = Vec::with_capacity(counts.len());
    let mut acc = 0u32;
    for &c in counts {
        offsets.push(acc);
        acc = acc.checked_add(c).ok_or(Error::Capacity {
            count: usize::MAX,
            max: u32::MAX as usize,
        })?;
    }
    Ok((offsets, acc))
}

/// Emits one `(key, gaussian index)` pair per touched tile, at the
/// Gaussian's scanned offset, tiles in row-major order.
pub fn duplicate_with_tiles(
    projected: &[ProjectedGaussian],
    offsets: &[u32],
    total: u32,
    tiles_x: u32,
    bounds: DepthBounds,
) -> Result<(Vec<f32>, Vec<u32>)> {
    if offsets.len() != projected.len() {
        return Err(Error::Consistency(format!(
            "{} offsets for {} Gaussians",
            offsets.len(),
            projected.len()
        )));
    }
    let mut keys = vec![0.0f32; total as usize];
    let mut values = vec![0u32; total as usize];
    for (g, p) in projected.iter().enumerate() {
        if !p.visible() {
            continue;
        }
        let mut k = offsets[g] as usize;
        let start = k;
        for ty in p.tile_min.1..p.tile_max.1 {
            for tx in p.tile_min.0..p.tile_max.0 {
                if k >= keys.len() {
                    return Err(Error::Consistency(format!("Gaussian {g} overruns the pair buffer")));
                }
                keys[k] = normalize_key(ty * tiles_x + tx, p.depth, bounds)?;
                values[k] = g as u32;
                k += 1;
            }
        }
        if (k - start) as u32 != p.tiles_touched {
            return Err(Error::Consistency(format!(
                "Gaussian {g} overlaps {} tiles but reported {}",
                k - start,
                p.tiles_touched
            )));
        }
    }
    Ok((keys, values))
}

/// Half-open span of each present tile in ascending `keys`.
pub fn identify_ranges(keys: &[f32], check_sorted: bool) -> Result<Vec<TileRange>> {
    let mut ranges: Vec<TileRange> = Vec::new();
    let mut prev_key = f32::NEG_INFINITY;
    for (i, &k) in keys.iter().enumerate() {
        if check_sorted && k < prev_key {
            return Err(Error::Precondition(format!("keys not ascending at position {i}")));
        }
        prev_key = k;
        let tile = extract_tile(k)?;
        match ranges.last_mut() {
            Some(r) if r.tile == tile => r.end = i as u32 + 1,
            _ => ranges.push(TileRange {
                tile,
                start: i as u32,
                end: i as u32 + 1,
            }),
        }
    }
    Ok(ranges)
}
