//! GPUTeraSort-style baseline: one pair per texel, no re-layout.
//!
//! Index `t` lives at column `t >> log2(H)`, row `t & (H - 1)`. Every network
//! step is one pass in which each output texel reads itself and its partner
//! and keeps the minimum or maximum, followed by a copy of the render target
//! back into the source texture. Partners at large distances land in other
//! columns, which is what the cache model penalises.

use alloc::vec::Vec;

use crate::cache::CacheBank;
use crate::dispatch::Grid;
use crate::texture::{choose_dimensions, LaneFormat, Texel, Texture2D, Tracer};
use crate::{Error, Result};

use super::network::{bitonic_direction, bitonic_partner, Direction};
use super::{strip_padding, trivial, validate, KvPair, SortConfig, SortMetrics, SortOutput, PAD};

/// Sorts with the baseline network; metrics follow the same conventions as
/// [`super::sort`]. Element accesses count two reads, one write and the two
/// accesses of the copy-back for every pair at every step.
pub fn terasort_baseline(pairs: &[KvPair], cfg: &SortConfig) -> Result<SortOutput> {
    validate(pairs, cfg)?;
    let n = pairs.len();
    if n <= 1 {
        return Ok(trivial(pairs));
    }
    let n_logical = n.next_power_of_two();
    if n_logical > u32::MAX as usize / 2 {
        return Err(Error::Capacity {
            count: n,
            max: u32::MAX as usize / 4,
        });
    }
    let (w, h) = choose_dimensions(n_logical as u64);
    let hb = h.trailing_zeros();
    let pos = |t: u32| (t >> hb, t & (h - 1));
    let mut src = Texture2D::new(w, h, LaneFormat::KeyValue, cfg.limits)?;
    for t in 0..n_logical as u32 {
        let p = pairs.get(t as usize).copied().unwrap_or(PAD);
        let (x, y) = pos(t);
        src.write_texel(x, y, Texel::from_bits([p.key.to_bits(), p.value, 0, 0]))?;
    }
    let mut dst = src.like();

    let mut bank = CacheBank::new(&cfg.caches);
    let mut tracer = if bank.is_empty() {
        Tracer::untraced()
    } else {
        Tracer::with_sink(&mut bank)
    };
    let stages = n_logical.trailing_zeros();
    let grid = Grid::new(w, h);
    let mut steps = 0usize;
    for stage in 1..=stages {
        for step in (1..=stage).rev() {
            steps += 1;
            tracer.begin_pass();
            let tr = &mut tracer;
            let src_ref = &src;
            let dst_ref = &mut dst;
            grid.for_each(cfg.order, |wi, x, y| {
                let t = (x << hb) | y;
                let p = bitonic_partner(t, step);
                let own = tr.read(src_ref, x, y, wi)?;
                let (px, py) = pos(p);
                let other = tr.read(src_ref, px, py, wi)?;
                let (ok, pk) = (own.f32(0), other.f32(0));
                let ascending = bitonic_direction(t.min(p), stage) == Direction::Ascending;
                let want_min = ascending == (t < p);
                let take = if want_min { pk < ok } else { pk > ok };
                tr.write(dst_ref, x, y, wi, if take { other } else { own })
            })?;
            // Copy-back of the render target; a straight copy that bypasses
            // the texture cache.
            src.copy_from(&dst);
            tracer.count_buffer(n_logical as u64, n_logical as u64);
        }
    }
    let reads = tracer.reads();
    let writes = tracer.writes();

    let all: Vec<KvPair> = (0..n_logical as u32)
        .map(|t| {
            let (x, y) = pos(t);
            let tex = src.get_linear((y * w + x) as usize);
            KvPair::new(tex.f32(0), tex.lanes[1])
        })
        .collect();
    Ok(SortOutput {
        pairs: strip_padding(all, n)?,
        texture: Some(src),
        metrics: SortMetrics {
            n,
            n_logical,
            stages,
            passes: steps,
            element_accesses: reads + writes,
            texel_reads: reads,
            texel_writes: writes,
            caches: bank.finish(),
        },
        passes: Vec::new(),
    })
}
