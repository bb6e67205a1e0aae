//! One frame of the splatting pipeline on simulated texture memory.
//!
//! Six stages run in order: `preprocess`, `scan`, `duplicate_with_tiles`,
//! `sorting`, `identify_range` and `render`. Each stage gets its own tracer,
//! so texel counts and cache statistics are reported per stage.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use libm::expf;

use crate::cache::{CacheBank, CacheConfig, CacheStats};
use crate::dispatch::{DispatchOrder, Grid};
use crate::texsort::{self, BlockGrid, FinalLayout, KvPair, SortConfig, SortMetrics, DEFAULT_MAX_PAIRS, PAD, SORTED_BLOCK_EDGE};
use crate::texture::{AccessSink, LaneFormat, OffsetSink, Tee, Texel, Texture2D, TextureLimits, Tracer};
use crate::{Error, Result};

use super::keys::{extract_tile, normalize_key, DepthBounds, MAX_TILES};
use super::pack::{pack_inputs, scalar_inputs, InputTextures, OutputTextures, RenderParams, ShLayout};
use super::project::{footprint, project_center, tile_rect, view_dir, CullReason};
use super::sh::eval_sh;
use super::types::{Camera, FrameBuffer, Gaussian3D, ProjectedGaussian, TileRange};
use super::TILE;

pub const STAGE_NAMES: [&str; 6] = [
    "preprocess",
    "scan",
    "duplicate_with_tiles",
    "sorting",
    "identify_range",
    "render",
];

/// Opacity ceiling per splat.
pub const ALPHA_MAX: f32 = 0.99;
/// Splats below this alpha are skipped.
pub const ALPHA_MIN: f32 = 1.0 / 255.0;
/// A pixel stops blending once its transmittance drops below this.
pub const T_MIN: f32 = 1e-4;

#[derive(Debug, Clone, PartialEq)]
pub struct PipelineConfig {
    /// Block-wise sorted pairs and block SH layout (`dl`).
    pub layout: bool,
    /// Grouped parameter textures (`vp`).
    pub packing: bool,
    /// Four pixels per render work item sharing fetches (`ec`).
    pub fusion: bool,
    pub background: [f32; 3],
    pub caches: Vec<CacheConfig>,
    /// Verify sort order and layouts while running.
    pub debug: bool,
    pub limits: TextureLimits,
    pub max_pairs: usize,
    pub order: DispatchOrder,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig {
            layout: true,
            packing: true,
            fusion: true,
            background: [0.0; 3],
            caches: Vec::new(),
            debug: false,
            limits: TextureLimits::default(),
            max_pairs: DEFAULT_MAX_PAIRS,
            order: DispatchOrder::Tiled,
        }
    }
}

/// The cumulative ablation ladder: full, then layout, packing and fusion
/// switched off one after another.
pub fn ablation_ladder(base: &PipelineConfig) -> [(&'static str, PipelineConfig); 4] {
    let full = PipelineConfig {
        layout: true,
        packing: true,
        fusion: true,
        ..base.clone()
    };
    let no_dl = PipelineConfig {
        layout: false,
        ..full.clone()
    };
    let no_vp = PipelineConfig {
        packing: false,
        ..no_dl.clone()
    };
    let no_ec = PipelineConfig {
        fusion: false,
        ..no_vp.clone()
    };
    [("full", full), ("-dl", no_dl), ("-dl-vp", no_vp), ("-dl-vp-ec", no_ec)]
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct StageMetrics {
    pub name: &'static str,
    pub passes: u32,
    pub texel_reads: u64,
    pub texel_writes: u64,
    pub caches: Vec<(CacheConfig, CacheStats)>,
    /// Wall time from the caller's clock, zero without one.
    pub elapsed_ns: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct Diagnostics {
    pub gaussians: usize,
    pub visible: usize,
    pub culled_depth: usize,
    pub culled_guard_band: usize,
    pub culled_singular: usize,
    pub culled_offscreen: usize,
    pub pairs: usize,
}

impl Diagnostics {
    fn cull(&mut self, r: CullReason) {
        match r {
            CullReason::Depth => self.culled_depth += 1,
            CullReason::GuardBand => self.culled_guard_band += 1,
            CullReason::Singular => self.culled_singular += 1,
            CullReason::Offscreen => self.culled_offscreen += 1,
        }
    }
}

#[derive(Debug, Clone)]
pub struct FrameOutput {
    pub image: FrameBuffer,
    pub stages: Vec<StageMetrics>,
    pub diagnostics: Diagnostics,
    pub projected: Vec<ProjectedGaussian>,
    pub offsets: Vec<u32>,
    /// Duplicated pairs before sorting.
    pub keys: Vec<f32>,
    pub values: Vec<u32>,
    pub sorted: Vec<KvPair>,
    pub ranges: Vec<TileRange>,
    pub depth_bounds: DepthBounds,
    pub sort_metrics: SortMetrics,
}

impl FrameOutput {
    pub fn stage(&self, name: &str) -> Option<&StageMetrics> {
        self.stages.iter().find(|s| s.name == name)
    }
}

/// Optional observers of a frame.
#[derive(Default)]
pub struct Hooks<'a> {
    /// Monotonic nanosecond clock used for stage timings.
    pub clock: Option<&'a mut dyn FnMut() -> u64>,
    /// Receives every traced access; pass ids are numbered across stages.
    pub trace: Option<&'a mut dyn AccessSink>,
}

struct Stages<'h, 'a> {
    hooks: &'h mut Hooks<'a>,
    caches: Vec<CacheConfig>,
    pass_base: u32,
    done: Vec<StageMetrics>,
}

impl Stages<'_, '_> {
    fn now(&mut self) -> u64 {
        self.hooks.clock.as_mut().map_or(0, |c| c())
    }

    fn run<T>(&mut self, name: &'static str, f: impl FnOnce(&mut Tracer<'_>) -> Result<T>) -> Result<T> {
        let t0 = self.now();
        let mut bank = CacheBank::new(&self.caches);
        let base = self.pass_base;
        let (out, passes, reads, writes) = {
            let mut offset = self.hooks.trace.as_deref_mut().map(|inner| OffsetSink { inner, base });
            let offset_present = offset.is_some();
            let mut tee;
            let tracer = match (bank.is_empty(), offset.as_mut()) {
                (true, None) => Tracer::untraced(),
                (true, Some(o)) => Tracer::with_sink(o),
                (false, None) => Tracer::with_sink(&mut bank),
                (false, Some(o)) => {
                    tee = Tee {
                        first: &mut bank,
                        second: o,
                    };
                    Tracer::with_sink(&mut tee)
                }
            };
            // The cache ignores writes; an external trace gets both kinds.
            let mut tracer = tracer.trace_writes(offset_present);
            let out = f(&mut tracer)?;
            (out, tracer.passes(), tracer.reads(), tracer.writes())
        };
        self.pass_base += passes;
        let elapsed_ns = self.now().saturating_sub(t0);
        self.done.push(StageMetrics {
            name,
            passes,
            texel_reads: reads,
            texel_writes: writes,
            caches: bank.finish(),
            elapsed_ns,
        });
        Ok(out)
    }
}

/// Renders one frame with default hooks.
pub fn render_frame(gaussians: &[Gaussian3D], camera: &Camera, cfg: &PipelineConfig) -> Result<FrameOutput> {
    render_frame_with(gaussians, camera, cfg, &mut Hooks::default())
}

pub fn render_frame_with(
    gaussians: &[Gaussian3D],
    camera: &Camera,
    cfg: &PipelineConfig,
    hooks: &mut Hooks<'_>,
) -> Result<FrameOutput> {
    camera.validate()?;
    for (i, g) in gaussians.iter().enumerate() {
        g.validate(i)?;
    }
    let (tiles_x, tiles_y) = camera.tiles();
    if tiles_x as u64 * tiles_y as u64 > MAX_TILES as u64 {
        return Err(Error::KeyOverflow(tiles_x * tiles_y));
    }
    let eye = camera.position()?;
    let mut st = Stages {
        hooks,
        caches: cfg.caches.clone(),
        pass_base: 0,
        done: Vec::new(),
    };

    // preprocess
    let pre = st.run(STAGE_NAMES[0], |tr| preprocess_stage(tr, gaussians, camera, &eye, cfg))?;
    let Preprocessed {
        outputs,
        projected,
        diagnostics: mut diag,
        bounds,
    } = pre;
    let tiles_touched: Vec<u32> = projected.iter().map(|p| p.tiles_touched).collect();

    // scan
    let (offsets, total) = st.run(STAGE_NAMES[1], |tr| {
        tr.begin_pass();
        tr.count_buffer(tiles_touched.len() as u64, tiles_touched.len() as u64);
        super::stages::prefix_scan(&tiles_touched)
    })?;
    diag.pairs = total as usize;

    // duplicate_with_tiles
    let (keys, values) = st.run(STAGE_NAMES[2], |tr| match &outputs {
        Some(out) => duplicate_stage(tr, out, &tiles_touched, &offsets, total, camera, bounds, cfg.order),
        None => Ok((Vec::new(), Vec::new())),
    })?;

    // sorting
    let sort_cfg = SortConfig {
        max_pairs: cfg.max_pairs,
        limits: cfg.limits,
        caches: cfg.caches.clone(),
        debug: cfg.debug,
        record_placements: false,
        final_layout: if cfg.layout {
            FinalLayout::Blockwise
        } else {
            FinalLayout::SinglePair
        },
        order: cfg.order,
    };
    let pairs: Vec<KvPair> = keys.iter().zip(&values).map(|(&k, &v)| KvPair::new(k, v)).collect();
    let t0 = st.now();
    let sorted_out = {
        let base = st.pass_base;
        let mut offset = st.hooks.trace.as_deref_mut().map(|inner| OffsetSink { inner, base });
        texsort::sort_with_sink(&pairs, &sort_cfg, offset.as_mut().map(|o| o as &mut dyn AccessSink))?
    };
    let sort_passes = if sorted_out.texture.is_some() {
        sorted_out.metrics.passes as u32 + 1
    } else {
        0
    };
    st.pass_base += sort_passes;
    let elapsed_ns = st.now().saturating_sub(t0);
    st.done.push(StageMetrics {
        name: STAGE_NAMES[3],
        passes: sort_passes,
        texel_reads: sorted_out.metrics.texel_reads,
        texel_writes: sorted_out.metrics.texel_writes,
        caches: sorted_out.metrics.caches.clone(),
        elapsed_ns,
    });
    let kv = SortedKv::new(&sorted_out, sort_cfg.final_layout)?;

    // identify_range
    let n_tiles = (tiles_x * tiles_y) as usize;
    let tile_ranges = st.run(STAGE_NAMES[4], |tr| identify_stage(tr, &kv, n_tiles, cfg.debug, cfg.order))?;

    // render
    let image = st.run(STAGE_NAMES[5], |tr| match &outputs {
        Some(out) => render_stage(tr, &kv, &tile_ranges, out, camera, cfg),
        None => Ok(FrameBuffer::filled(camera.width, camera.height, cfg.background)),
    })?;

    let ranges = tile_ranges
        .iter()
        .enumerate()
        .filter(|(_, r)| r.1 > r.0)
        .map(|(t, r)| TileRange {
            tile: t as u32,
            start: r.0,
            end: r.1,
        })
        .collect();
    let stages = core::mem::take(&mut st.done);
    Ok(FrameOutput {
        image,
        stages,
        diagnostics: diag,
        projected,
        offsets,
        keys,
        values,
        sorted: sorted_out.pairs.clone(),
        ranges,
        depth_bounds: bounds,
        sort_metrics: sorted_out.metrics,
    })
}

struct Preprocessed {
    outputs: Option<OutputTextures>,
    projected: Vec<ProjectedGaussian>,
    diagnostics: Diagnostics,
    bounds: DepthBounds,
}

fn preprocess_stage(
    tr: &mut Tracer<'_>,
    gaussians: &[Gaussian3D],
    cam: &Camera,
    eye: &[f32; 3],
    cfg: &PipelineConfig,
) -> Result<Preprocessed> {
    let mut diagnostics = Diagnostics {
        gaussians: gaussians.len(),
        ..Diagnostics::default()
    };
    if gaussians.is_empty() {
        return Ok(Preprocessed {
            outputs: None,
            projected: Vec::new(),
            diagnostics,
            bounds: DepthBounds::from_depths([]),
        });
    }
    let inputs = if cfg.packing {
        let sh = if cfg.layout {
            ShLayout::Block3x4
        } else {
            ShLayout::Strip12x1
        };
        pack_inputs(gaussians, sh, cfg.limits)?
    } else {
        scalar_inputs(gaussians, cfg.limits)?
    };
    let grid = inputs.grid();
    let mut outputs = OutputTextures::new(grid, cfg.packing, cfg.limits)?;
    let mut projected = vec![ProjectedGaussian::default(); gaussians.len()];
    let (mut lo, mut hi) = (f32::INFINITY, f32::NEG_INFINITY);
    tr.begin_pass();
    Grid::new(grid.width, grid.height).for_each(cfg.order, |wi, x, y| {
        let g = y * grid.width + x;
        if g as usize >= grid.count {
            return Ok(());
        }
        // tiles_touched is always written, zero for culled Gaussians.
        tr.count_buffer(0, 1);
        match preprocess_one(tr, &inputs, g, wi, cam, eye) {
            Ok(p) => {
                outputs.write(tr, g, wi, &p)?;
                lo = lo.min(p.depth);
                hi = hi.max(p.depth);
                diagnostics.visible += 1;
                projected[g as usize] = p;
            }
            Err(Cull::Reason(r)) => diagnostics.cull(r),
            Err(Cull::Fail(e)) => return Err(e),
        }
        Ok(())
    })?;
    let bounds = if lo <= hi {
        DepthBounds::from_depths([lo, hi])
    } else {
        DepthBounds::from_depths([])
    };
    Ok(Preprocessed {
        outputs: Some(outputs),
        projected,
        diagnostics,
        bounds,
    })
}

enum Cull {
    Reason(CullReason),
    Fail(Error),
}

impl From<Error> for Cull {
    fn from(e: Error) -> Self {
        Cull::Fail(e)
    }
}

impl From<CullReason> for Cull {
    fn from(r: CullReason) -> Self {
        Cull::Reason(r)
    }
}

fn preprocess_one(
    tr: &mut Tracer<'_>,
    inputs: &InputTextures,
    g: u32,
    wi: u32,
    cam: &Camera,
    eye: &[f32; 3],
) -> core::result::Result<ProjectedGaussian, Cull> {
    let (mean, opacity) = inputs.read_mean(tr, g, wi)?;
    let center = project_center(&mean, cam)?;
    let cov = inputs.read_cov(tr, g, wi)?;
    let fp = footprint(&center, &cov, cam)?;
    let (tile_min, tile_max) = tile_rect(center.xy, fp.radius, cam).ok_or(CullReason::Offscreen)?;
    let opacity = match opacity {
        Some(o) => o,
        None => inputs.read_opacity(tr, g, wi)?,
    };
    let sh = inputs.read_sh(tr, g, wi)?;
    Ok(ProjectedGaussian {
        xy: center.xy,
        depth: center.cam[2],
        radius: fp.radius,
        conic_opacity: [fp.conic[0], fp.conic[1], fp.conic[2], opacity],
        rgb: eval_sh(&sh, view_dir(&mean, eye)),
        tiles_touched: (tile_max.0 - tile_min.0) * (tile_max.1 - tile_min.1),
        tile_min,
        tile_max,
    })
}

#[allow(clippy::too_many_arguments)]
fn duplicate_stage(
    tr: &mut Tracer<'_>,
    out: &OutputTextures,
    tiles_touched: &[u32],
    offsets: &[u32],
    total: u32,
    cam: &Camera,
    bounds: DepthBounds,
    order: DispatchOrder,
) -> Result<(Vec<f32>, Vec<u32>)> {
    let mut keys = vec![0.0f32; total as usize];
    let mut values = vec![0u32; total as usize];
    let (tiles_x, _) = cam.tiles();
    let grid = out.grid;
    tr.begin_pass();
    Grid::new(grid.width, grid.height).for_each(order, |wi, x, y| {
        let g = y * grid.width + x;
        if g as usize >= grid.count {
            return Ok(());
        }
        tr.count_buffer(1, 0);
        let touched = tiles_touched[g as usize];
        if touched == 0 {
            return Ok(());
        }
        tr.count_buffer(1, 0);
        let [px, py, depth, radius] = out.read_geometry(tr, g, wi)?;
        let ((x0, y0), (x1, y1)) = tile_rect([px, py], radius, cam)
            .ok_or_else(|| Error::Consistency(format!("visible Gaussian {g} has no tiles")))?;
        let start = offsets[g as usize] as usize;
        let mut k = start;
        for ty in y0..y1 {
            for tx in x0..x1 {
                if k >= keys.len() {
                    return Err(Error::Consistency(format!("Gaussian {g} overruns the pair buffer")));
                }
                keys[k] = normalize_key(ty * tiles_x + tx, depth, bounds)?;
                values[k] = g;
                k += 1;
            }
        }
        tr.count_buffer(0, 2 * (k - start) as u64);
        if (k - start) as u32 != touched {
            return Err(Error::Consistency(format!(
                "Gaussian {g} overlaps {} tiles but reported {touched}",
                k - start
            )));
        }
        Ok(())
    })?;
    Ok((keys, values))
}

/// Sorted pairs as they sit in texture memory.
struct SortedKv {
    count: usize,
    texture: Option<Texture2D>,
    blocks: Option<BlockGrid>,
}

impl SortedKv {
    fn new(out: &texsort::SortOutput, layout: FinalLayout) -> Result<Self> {
        let count = out.pairs.len();
        let texture = match (&out.texture, count) {
            (Some(t), _) => Some(t.clone()),
            (None, 0) => None,
            (None, _) => {
                // A single pair never reaches a kernel; upload it as is.
                let mut t = Texture2D::new(1, 1, LaneFormat::KeyValue, TextureLimits::default())?;
                let p = out.pairs[0];
                let lanes = match layout {
                    FinalLayout::Blockwise => [p.key.to_bits(), p.value, PAD.key.to_bits(), PAD.value],
                    FinalLayout::SinglePair => [p.key.to_bits(), p.value, 0, 0],
                };
                t.write_texel(0, 0, Texel::from_bits(lanes))?;
                Some(t)
            }
        };
        let blocks = match (&texture, layout) {
            (Some(t), FinalLayout::Blockwise) => Some(BlockGrid::new(t.width(), t.height(), SORTED_BLOCK_EDGE)?),
            _ => None,
        };
        Ok(SortedKv { count, texture, blocks })
    }

    /// Pairs stored per texel.
    fn per_texel(&self) -> usize {
        if self.blocks.is_some() {
            2
        } else {
            1
        }
    }

    fn position(&self, texel: u32) -> (u32, u32) {
        match (&self.blocks, &self.texture) {
            (Some(b), _) => b.position(texel),
            (None, Some(t)) => (texel % t.width(), texel / t.width()),
            (None, None) => (0, 0),
        }
    }

    fn read_texel(&self, tr: &mut Tracer<'_>, texel: u32, wi: u32) -> Result<Texel> {
        let (x, y) = self.position(texel);
        match &self.texture {
            Some(t) => tr.read(t, x, y, wi),
            None => Err(Error::CorruptIndex { index: 0, count: 0 }),
        }
    }

    /// Pair `k` out of a texel fetched for it.
    fn pair(&self, texel: Texel, k: usize) -> KvPair {
        let lane = if self.per_texel() == 2 { 2 * (k & 1) } else { 0 };
        KvPair::new(texel.f32(lane), texel.lanes[lane + 1])
    }
}

/// Per-tile half-open ranges into the sorted pairs.
fn identify_stage(
    tr: &mut Tracer<'_>,
    kv: &SortedKv,
    n_tiles: usize,
    check_sorted: bool,
    order: DispatchOrder,
) -> Result<Vec<(u32, u32)>> {
    let mut ranges = vec![(0u32, 0u32); n_tiles];
    let n = kv.count;
    let Some(tex) = &kv.texture else {
        return Ok(ranges);
    };
    let per = kv.per_texel();
    let texels = n.div_ceil(per);
    let tile_of = |key: f32| -> Result<usize> {
        let t = extract_tile(key)? as usize;
        if t >= n_tiles {
            return Err(Error::CorruptIndex { index: t, count: n_tiles });
        }
        Ok(t)
    };
    tr.begin_pass();
    Grid::new(tex.width(), tex.height()).for_each(order, |wi, x, y| {
        let t = match &kv.blocks {
            Some(b) => b.texel(x, y),
            None => y * tex.width() + x,
        } as usize;
        if t >= texels {
            return Ok(());
        }
        let own = kv.read_texel(tr, t as u32, wi)?;
        let mut prev = if t > 0 {
            Some(kv.pair(kv.read_texel(tr, t as u32 - 1, wi)?, per * t - 1))
        } else {
            None
        };
        for k in per * t..(per * t + per).min(n) {
            let cur = kv.pair(own, k);
            let tile = tile_of(cur.key)?;
            match prev {
                Some(p) => {
                    if check_sorted && cur.key < p.key {
                        return Err(Error::Precondition(format!("sorted keys descend at position {k}")));
                    }
                    let pt = tile_of(p.key)?;
                    if pt != tile {
                        ranges[pt].1 = k as u32;
                        ranges[tile].0 = k as u32;
                        tr.count_buffer(0, 2);
                    }
                }
                None => {
                    ranges[tile].0 = 0;
                    tr.count_buffer(0, 1);
                }
            }
            if k + 1 == n {
                ranges[tile].1 = n as u32;
                tr.count_buffer(0, 1);
            }
            prev = Some(cur);
        }
        Ok(())
    })?;
    Ok(ranges)
}

#[inline]
fn blend(p: &RenderParams, px: f32, py: f32, color: &mut [f32; 3], t: &mut f32) -> bool {
    let [a, b, c, op] = p.conic_opacity;
    let dx = p.xy[0] - px;
    let dy = p.xy[1] - py;
    let power = -0.5 * (a * dx * dx + c * dy * dy) - b * dx * dy;
    if power > 0.0 {
        return false;
    }
    let alpha = (op * expf(power)).min(ALPHA_MAX);
    if alpha < ALPHA_MIN {
        return false;
    }
    color[0] += p.rgb[0] * alpha * *t;
    color[1] += p.rgb[1] * alpha * *t;
    color[2] += p.rgb[2] * alpha * *t;
    *t *= 1.0 - alpha;
    *t < T_MIN
}

fn render_stage(
    tr: &mut Tracer<'_>,
    kv: &SortedKv,
    ranges: &[(u32, u32)],
    out: &OutputTextures,
    cam: &Camera,
    cfg: &PipelineConfig,
) -> Result<FrameBuffer> {
    let (tiles_x, tiles_y) = cam.tiles();
    let mut fb = FrameBuffer::filled(cam.width, cam.height, cfg.background);
    let quad = if cfg.fusion { 4 } else { 1 };
    let items_x = TILE / quad;
    let count = out.grid.count;
    let mut wi = 0u32;
    tr.begin_pass();
    for ty in 0..tiles_y {
        for tx in 0..tiles_x {
            let (start, end) = ranges[(ty * tiles_x + tx) as usize];
            for iy in 0..TILE {
                for ix in 0..items_x {
                    let y = ty * TILE + iy;
                    let x0 = tx * TILE + ix * quad;
                    let mut color = [[0.0f32; 3]; 4];
                    let mut trans = [1.0f32; 4];
                    let mut live = [false; 4];
                    for (q, l) in live.iter_mut().enumerate().take(quad as usize) {
                        *l = y < cam.height && x0 + (q as u32) < cam.width;
                    }
                    let mut fetched: Option<(usize, Texel)> = None;
                    for k in start as usize..end as usize {
                        if !live.iter().any(|&l| l) {
                            break;
                        }
                        let texel_idx = k / kv.per_texel();
                        let texel = match fetched {
                            Some((i, t)) if i == texel_idx => t,
                            _ => {
                                let t = kv.read_texel(tr, texel_idx as u32, wi)?;
                                fetched = Some((texel_idx, t));
                                t
                            }
                        };
                        let g = kv.pair(texel, k).value as usize;
                        if g >= count {
                            return Err(Error::CorruptIndex { index: g, count });
                        }
                        let params = out.read_render(tr, g as u32, wi)?;
                        for q in 0..quad as usize {
                            if live[q] && blend(&params, (x0 + q as u32) as f32, y as f32, &mut color[q], &mut trans[q]) {
                                live[q] = false;
                            }
                        }
                    }
                    for q in 0..quad {
                        let x = x0 + q;
                        if x < cam.width && y < cam.height {
                            let (c, t) = (color[q as usize], trans[q as usize]);
                            let bg = cfg.background;
                            fb.set(x, y, [c[0] + bg[0] * t, c[1] + bg[1] * t, c[2] + bg[2] * t]);
                            tr.count_buffer(0, 1);
                        }
                    }
                    wi += 1;
                }
            }
        }
    }
    Ok(fb)
}
