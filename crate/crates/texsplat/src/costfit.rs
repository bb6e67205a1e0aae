//! Recovering the cache block size from latency measurements.
//!
//! Each sample is a pointer-chase walk over a 1024x1024 texture. Every hop
//! moves a positive distance along one axis, so the walk never comes back to
//! a block it left and its miss count is determined by its block crossings.
//! The latency of a walk is taken from [`simulate`] under a configuration the
//! fit does not see, and [`fit_latency_model`] regresses it on the
//! cross-block histogram.

use rand::Rng;
use texsplat_core::cache::{cross_block_histogram, fit_latency_model, simulate, CacheConfig, LatencyModel, StrideHistogram, BLOCK_SIZES};
use texsplat_core::texture::{AccessEvent, AccessKind, TextureId};

use crate::synth;

pub const TEXTURE_EDGE: u32 = 1024;
/// Cycles for a read served by the cache.
pub const HIT_CYCLES: f64 = 4.0;
/// Cycles for a read that fetches a block.
pub const MISS_CYCLES: f64 = 100.0;
const MAX_STRIDES: [u32; 7] = [1, 2, 3, 5, 8, 13, 21];
/// Hops per walk; fixed so every walk has the same number of reads.
pub const HOPS: u32 = (TEXTURE_EDGE - 1) / 21;

/// One pointer-chase walk of a single work item.
pub fn pointer_chase(rng: &mut impl Rng) -> Vec<AccessEvent> {
    let max_h = MAX_STRIDES[rng.gen_range(0..MAX_STRIDES.len())];
    let max_v = MAX_STRIDES[rng.gen_range(0..MAX_STRIDES.len())];
    let p_h: f64 = rng.gen_range(0.05..0.95);
    let steps: Vec<(u32, u32)> = (0..HOPS)
        .map(|_| {
            if rng.gen_bool(p_h) {
                (rng.gen_range(1..=max_h), 0)
            } else {
                (0, rng.gen_range(1..=max_v))
            }
        })
        .collect();
    let span_x: u32 = steps.iter().map(|s| s.0).sum();
    let span_y: u32 = steps.iter().map(|s| s.1).sum();
    let (mut x, mut y) = (rng.gen_range(0..TEXTURE_EDGE - span_x), rng.gen_range(0..TEXTURE_EDGE - span_y));
    let ev = |x, y| AccessEvent {
        pass_id: 0,
        work_item: 0,
        texture: TextureId(0),
        x,
        y,
        kind: AccessKind::Read,
    };
    let mut trace = Vec::with_capacity(steps.len() + 1);
    trace.push(ev(x, y));
    for (dx, dy) in steps {
        x += dx;
        y += dy;
        trace.push(ev(x, y));
    }
    trace
}

/// Mean cycles per read of `trace` under `hidden`.
pub fn oracle_latency(trace: &[AccessEvent], hidden: CacheConfig) -> texsplat_core::Result<f64> {
    let stats = simulate(trace, (TEXTURE_EDGE, TEXTURE_EDGE), hidden)?;
    Ok((stats.hits as f64 * HIT_CYCLES + stats.misses as f64 * MISS_CYCLES) / stats.reads.max(1) as f64)
}

/// Histogram and oracle latency for `count` seeded walks.
pub fn samples(count: usize, seed: u64, hidden: CacheConfig) -> texsplat_core::Result<Vec<(StrideHistogram, f64)>> {
    let mut rng = synth::rng(seed);
    (0..count)
        .map(|_| {
            let trace = pointer_chase(&mut rng);
            Ok((cross_block_histogram(&trace, &BLOCK_SIZES), oracle_latency(&trace, hidden)?))
        })
        .collect()
}

pub fn fit(count: usize, seed: u64, hidden: CacheConfig) -> texsplat_core::Result<LatencyModel> {
    fit_latency_model(&samples(count, seed, hidden)?)
}
