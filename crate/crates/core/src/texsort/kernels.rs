//! The three kernel kinds of the texture sort.
//!
//! Each kernel reads its input texture through the [`Tracer`], compares pairs
//! according to the bitonic network and writes every texel straight to the
//! position the *next* pass expects, so no separate data-movement pass exists.

use alloc::format;

use crate::dispatch::{DispatchOrder, Grid};
use crate::texture::{Texel, Texture2D, Tracer};
use crate::{Error, Result};

use super::blockwise::{pack_pairs, unpack_pairs, BlockGrid};
use super::layout::{PlacementMap, SortGeometry};
use super::network::{bitonic_direction, Direction};
use super::KvPair;

/// Where a pass writes its output texels.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OutputLayout {
    /// Layout expected by network step `j >= 2`.
    Step(u32),
    /// Final block-wise layout, two pairs per texel.
    Blockwise(BlockGrid),
    /// Final row-major layout, one pair per texel `(key, value, 0, 0)`.
    SinglePair { width: u32 },
}

/// Kernel execution context.
pub struct KernelCtx<'t, 'a> {
    pub tracer: &'t mut Tracer<'a>,
    pub order: DispatchOrder,
}

/// Debug shadow: the logical index tags travelling with the data.
pub struct Shadow<'m> {
    pub input: &'m PlacementMap,
    pub output: Option<&'m mut PlacementMap>,
}

#[inline]
fn compare_exchange(a: &mut KvPair, b: &mut KvPair, dir: Direction) {
    let swap = match dir {
        Direction::Ascending => a.key > b.key,
        Direction::Descending => a.key < b.key,
    };
    if swap {
        core::mem::swap(a, b);
    }
}

fn check_tags(shadow: &Option<Shadow<'_>>, pass: u32, x: u32, y: u32, t: u32) -> Result<()> {
    if let Some(s) = shadow {
        for slot in 0..2 {
            let found = s.input.get(x, y, slot);
            if found != 2 * t + slot {
                return Err(Error::LayoutViolation {
                    pass,
                    logical: found,
                    detail: format!("found at ({x}, {y}, slot {slot}) where {} was expected", 2 * t + slot),
                });
            }
        }
    }
    Ok(())
}

/// Writes logical texel `t` (pairs `2t`, `2t + 1`) to its output position.
#[inline]
#[allow(clippy::too_many_arguments)]
fn emit(
    ctx: &mut KernelCtx<'_, '_>,
    geom: &SortGeometry,
    out: &mut Texture2D,
    layout: OutputLayout,
    shadow: &mut Option<Shadow<'_>>,
    work_item: u32,
    t: u32,
    pairs: [KvPair; 2],
) -> Result<()> {
    match layout {
        OutputLayout::Step(step) => {
            let (x, y) = geom.step_position(step, t);
            ctx.tracer.write(out, x, y, work_item, pack_pairs(pairs[0], pairs[1]))?;
            if let Some(Shadow { output: Some(m), .. }) = shadow {
                m.set(x, y, 0, 2 * t);
                m.set(x, y, 1, 2 * t + 1);
            }
        }
        OutputLayout::Blockwise(grid) => {
            let (x, y) = grid.position(t);
            ctx.tracer.write(out, x, y, work_item, pack_pairs(pairs[0], pairs[1]))?;
            if let Some(Shadow { output: Some(m), .. }) = shadow {
                m.set(x, y, 0, 2 * t);
                m.set(x, y, 1, 2 * t + 1);
            }
        }
        OutputLayout::SinglePair { width } => {
            for (k, p) in pairs.iter().enumerate() {
                let l = 2 * t + k as u32;
                let texel = Texel::from_bits([p.key.to_bits(), p.value, 0, 0]);
                ctx.tracer.write(out, l % width, l / width, work_item, texel)?;
            }
        }
    }
    Ok(())
}

/// Reads four keys and four values per work item from the row-major input
/// textures, applies stage 1 and writes pair texels in the step-2 layout.
pub fn preprocess_kernel(
    ctx: &mut KernelCtx<'_, '_>,
    geom: &SortGeometry,
    keys: &Texture2D,
    values: &Texture2D,
    out: &mut Texture2D,
    mut shadow: Option<&mut PlacementMap>,
) -> Result<()> {
    let quads = geom.n_logical / 4;
    if keys.width() != values.width() || keys.height() != values.height() {
        return Err(Error::InputMismatch(format!(
            "keys {}x{} vs values {}x{}",
            keys.width(),
            keys.height(),
            values.width(),
            values.height()
        )));
    }
    if (keys.texel_count() as u64) < quads as u64 {
        return Err(Error::InputMismatch(format!(
            "{} key texels for {} elements",
            keys.texel_count(),
            geom.n_logical
        )));
    }
    check_output(geom, out)?;
    ctx.tracer.begin_pass();
    let kw = keys.width();
    let grid = Grid::new(kw, quads.div_ceil(kw));
    grid.for_each(ctx.order, |wi, x, y| {
        let q = y * kw + x;
        if q >= quads {
            return Ok(());
        }
        let k = ctx.tracer.read(keys, x, y, wi)?;
        let v = ctx.tracer.read(values, x, y, wi)?;
        let mut e: [KvPair; 4] = core::array::from_fn(|i| KvPair {
            key: k.f32(i),
            value: v.lanes[i],
        });
        let base = 4 * q;
        let (lo, hi) = e.split_at_mut(2);
        {
            let (a, b) = lo.split_at_mut(1);
            compare_exchange(&mut a[0], &mut b[0], bitonic_direction(base, 1));
        }
        {
            let (a, b) = hi.split_at_mut(1);
            compare_exchange(&mut a[0], &mut b[0], bitonic_direction(base + 2, 1));
        }
        for half in 0..2u32 {
            let t = 2 * q + half;
            let (ox, oy) = geom.step_position(2, t);
            let h = half as usize * 2;
            ctx.tracer.write(out, ox, oy, wi, pack_pairs(e[h], e[h + 1]))?;
            if let Some(m) = shadow.as_deref_mut() {
                m.set(ox, oy, 0, 2 * t);
                m.set(ox, oy, 1, 2 * t + 1);
            }
        }
        Ok(())
    })
}

fn check_output(geom: &SortGeometry, out: &Texture2D) -> Result<()> {
    if out.width() != geom.width || out.height() != geom.height {
        return Err(Error::InputMismatch(format!(
            "output texture {}x{} does not match sort geometry {}x{}",
            out.width(),
            out.height(),
            geom.width,
            geom.height
        )));
    }
    Ok(())
}

fn check_input(geom: &SortGeometry, input: &Texture2D) -> Result<()> {
    check_output(geom, input)
}

/// One compare-exchange step `step >= 3` of stage `stage`.
///
/// Work item `(x, r)` reads texels `(x, 2r)` and `(x, 2r + 1)`, which hold the
/// two partner texels of the step, and writes both to their positions in the
/// layout of step `step - 1`.
pub fn compare_swap_pass(
    ctx: &mut KernelCtx<'_, '_>,
    geom: &SortGeometry,
    input: &Texture2D,
    out: &mut Texture2D,
    stage: u32,
    step: u32,
    mut shadow: Option<Shadow<'_>>,
) -> Result<()> {
    if step < 3 || step > stage || stage > geom.stages {
        return Err(Error::Schedule { stage, step });
    }
    check_input(geom, input)?;
    check_output(geom, out)?;
    let pass = ctx.tracer.begin_pass();
    let partner_bit = 1u32 << (step - 2);
    let grid = Grid::new(geom.width, geom.pair_rows());
    grid.for_each(ctx.order, |wi, x, r| {
        let (y0, y1) = (2 * r, 2 * r + 1);
        let upper = ctx.tracer.read(input, x, y0, wi)?;
        let lower = ctx.tracer.read(input, x, y1, wi)?;
        let t_up = geom.step_texel(step, x, y0);
        let t_lo = t_up | partner_bit;
        check_tags(&shadow, pass, x, y0, t_up)?;
        check_tags(&shadow, pass, x, y1, t_lo)?;
        let mut a = unpack_pairs(upper);
        let mut b = unpack_pairs(lower);
        let dir = bitonic_direction(2 * t_up, stage);
        for s in 0..2 {
            compare_exchange(&mut a[s], &mut b[s], dir);
        }
        emit(ctx, geom, out, OutputLayout::Step(step - 1), &mut shadow, wi, t_up, a)?;
        emit(ctx, geom, out, OutputLayout::Step(step - 1), &mut shadow, wi, t_lo, b)?;
        Ok(())
    })
}

/// Steps 2 and 1 of stage `stage` in a single pass.
///
/// Work item `(x, r)` holds four consecutive network indices: the vertical
/// exchange covers step 2 and the exchange inside each texel covers step 1.
/// Output goes to `layout` (step `stage + 1`, or a final layout after the
/// last stage).
pub fn compare_swap_fused(
    ctx: &mut KernelCtx<'_, '_>,
    geom: &SortGeometry,
    input: &Texture2D,
    out: &mut Texture2D,
    stage: u32,
    layout: OutputLayout,
    mut shadow: Option<Shadow<'_>>,
) -> Result<()> {
    if stage < 2 || stage > geom.stages {
        return Err(Error::Schedule { stage, step: 2 });
    }
    check_input(geom, input)?;
    match layout {
        OutputLayout::Step(next) if next != stage + 1 || stage == geom.stages => {
            return Err(Error::Schedule { stage: stage + 1, step: next });
        }
        OutputLayout::Step(_) | OutputLayout::Blockwise(_) => check_output(geom, out)?,
        OutputLayout::SinglePair { width } => {
            if width != out.width() || out.texel_count() < geom.n_logical as usize {
                return Err(Error::InputMismatch("single-pair output texture too small".into()));
            }
        }
    }
    let pass = ctx.tracer.begin_pass();
    let grid = Grid::new(geom.width, geom.pair_rows());
    grid.for_each(ctx.order, |wi, x, r| {
        let (y0, y1) = (2 * r, 2 * r + 1);
        let upper = ctx.tracer.read(input, x, y0, wi)?;
        let lower = ctx.tracer.read(input, x, y1, wi)?;
        let t_up = geom.step_texel(2, x, y0);
        let t_lo = t_up | 1;
        check_tags(&shadow, pass, x, y0, t_up)?;
        check_tags(&shadow, pass, x, y1, t_lo)?;
        let mut a = unpack_pairs(upper);
        let mut b = unpack_pairs(lower);
        let dir = bitonic_direction(2 * t_up, stage);
        // step 2: vertical partners
        for s in 0..2 {
            compare_exchange(&mut a[s], &mut b[s], dir);
        }
        // step 1: inside each texel
        for pair in [&mut a, &mut b] {
            let (p, q) = pair.split_at_mut(1);
            compare_exchange(&mut p[0], &mut q[0], dir);
        }
        emit(ctx, geom, out, layout, &mut shadow, wi, t_up, a)?;
        emit(ctx, geom, out, layout, &mut shadow, wi, t_lo, b)?;
        Ok(())
    })
}
