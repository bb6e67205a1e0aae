//! Key-value bitonic sort on texture memory.
//!
//! Keys are `f32`, values `u32`; every texel stores two pairs. Each kernel
//! writes its output directly in the placement the next kernel needs, which
//! keeps every compare partner a vertical neighbour in the same column. The
//! final stage writes a block-wise layout so that consumers reading runs of
//! sorted pairs stay inside a few cache blocks.
//!
//! ```
//! use texsplat_core::texsort::{sort, KvPair, SortConfig};
//!
//! let input: Vec<KvPair> = [3.0f32, -1.0, 2.0, 0.5, 7.0]
//!     .iter()
//!     .enumerate()
//!     .map(|(i, &k)| KvPair::new(k, i as u32))
//!     .collect();
//! let out = sort(&input, &SortConfig::default()).unwrap();
//! let keys: Vec<f32> = out.pairs.iter().map(|p| p.key).collect();
//! assert_eq!(keys, [-1.0, 0.5, 2.0, 3.0, 7.0]);
//! ```

mod baseline;
mod blockwise;
pub mod kernels;
pub mod layout;
pub mod network;
pub mod plan;

use alloc::format;
use alloc::vec::Vec;

pub use baseline::terasort_baseline;
pub use blockwise::{blockwise_load, blockwise_store, BlockGrid, SORTED_BLOCK_EDGE};
pub use layout::{layout_for_step, AdjacencyReport, PlacementMap, SortGeometry};
pub use network::{bitonic_direction, bitonic_partner, Direction};
pub use plan::{PassKind, PassSpec, SortPlan};

use crate::cache::{CacheBank, CacheConfig, CacheStats};
use crate::dispatch::DispatchOrder;
use crate::texture::{choose_dimensions, AccessSink, LaneFormat, Tee, Texel, Texture2D, TextureLimits, Tracer};
use crate::{Error, Result};

use kernels::{compare_swap_fused, compare_swap_pass, preprocess_kernel, KernelCtx, OutputLayout, Shadow};

/// Default cap on the number of input pairs.
pub const DEFAULT_MAX_PAIRS: usize = 1 << 26;

/// Padding pair appended up to the next power of two. It sorts last and is
/// removed by identity, so user input may not contain this exact pair.
pub const PAD: KvPair = KvPair {
    key: f32::MAX,
    value: u32::MAX,
};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KvPair {
    pub key: f32,
    pub value: u32,
}

impl KvPair {
    pub fn new(key: f32, value: u32) -> Self {
        KvPair { key, value }
    }

    fn is_pad(&self) -> bool {
        self.key.to_bits() == PAD.key.to_bits() && self.value == PAD.value
    }
}

/// Placement of the sorted output.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum FinalLayout {
    /// `32 x 32` texel blocks, two pairs per texel.
    #[default]
    Blockwise,
    /// One pair per texel in plain row-major order.
    SinglePair,
}

#[derive(Debug, Clone)]
pub struct SortConfig {
    pub max_pairs: usize,
    pub limits: TextureLimits,
    /// Caches simulated while sorting; empty disables tracing.
    pub caches: Vec<CacheConfig>,
    /// Track logical tags per slot and verify every pass against its layout.
    pub debug: bool,
    /// In debug mode, keep a copy of each pass's input placement.
    pub record_placements: bool,
    pub final_layout: FinalLayout,
    pub order: DispatchOrder,
}

impl Default for SortConfig {
    fn default() -> Self {
        SortConfig {
            max_pairs: DEFAULT_MAX_PAIRS,
            limits: TextureLimits::default(),
            caches: Vec::new(),
            debug: false,
            record_placements: false,
            final_layout: FinalLayout::Blockwise,
            order: DispatchOrder::Tiled,
        }
    }
}

/// Access counts for one sort run.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct SortMetrics {
    pub n: usize,
    pub n_logical: usize,
    pub stages: u32,
    /// Compare passes (preprocessing excluded).
    pub passes: usize,
    /// Pair-level memory accesses of the compare passes.
    pub element_accesses: u64,
    pub texel_reads: u64,
    pub texel_writes: u64,
    pub caches: Vec<(CacheConfig, CacheStats)>,
}

impl SortMetrics {
    pub fn cache(&self, cfg: CacheConfig) -> Option<&CacheStats> {
        self.caches.iter().find(|(c, _)| *c == cfg).map(|(_, s)| s)
    }
}

/// Debug record of one compare pass.
#[derive(Debug, Clone, PartialEq)]
pub struct PassRecord {
    pub spec: PassSpec,
    /// Partner adjacency of the input placement, per executed step.
    pub adjacency: Vec<(u32, AdjacencyReport)>,
    pub placement: Option<PlacementMap>,
}

#[derive(Debug, Clone)]
pub struct SortOutput {
    /// Sorted pairs with padding removed.
    pub pairs: Vec<KvPair>,
    /// Final texture (absent when no kernel ran).
    pub texture: Option<Texture2D>,
    pub metrics: SortMetrics,
    pub passes: Vec<PassRecord>,
}

pub(crate) fn validate(pairs: &[KvPair], cfg: &SortConfig) -> Result<()> {
    if pairs.len() > cfg.max_pairs {
        return Err(Error::Capacity {
            count: pairs.len(),
            max: cfg.max_pairs,
        });
    }
    for p in pairs {
        if !p.key.is_finite() {
            return Err(Error::InvalidKey(p.key));
        }
        if p.is_pad() {
            return Err(Error::ReservedSentinel {
                key: p.key,
                value: p.value,
            });
        }
    }
    Ok(())
}

pub(crate) fn strip_padding(all: Vec<KvPair>, n: usize) -> Result<Vec<KvPair>> {
    let total = all.len();
    let out: Vec<KvPair> = all.into_iter().filter(|p| !p.is_pad()).collect();
    if out.len() != n {
        return Err(Error::Consistency(format!(
            "{} of {total} sorted pairs survived padding removal, expected {n}",
            out.len()
        )));
    }
    Ok(out)
}

fn trivial(pairs: &[KvPair]) -> SortOutput {
    SortOutput {
        pairs: pairs.to_vec(),
        texture: None,
        metrics: SortMetrics {
            n: pairs.len(),
            n_logical: pairs.len(),
            ..SortMetrics::default()
        },
        passes: Vec::new(),
    }
}

/// Sorts `pairs` ascending by key. Equal keys may come out in any order.
pub fn sort(pairs: &[KvPair], cfg: &SortConfig) -> Result<SortOutput> {
    sort_with_sink(pairs, cfg, None)
}

/// Like [`sort`], also forwarding every traced access to `sink`.
pub fn sort_with_sink(pairs: &[KvPair], cfg: &SortConfig, sink: Option<&mut dyn AccessSink>) -> Result<SortOutput> {
    validate(pairs, cfg)?;
    let n = pairs.len();
    if n <= 1 {
        return Ok(trivial(pairs));
    }
    let n_logical = n.next_power_of_two().max(4);
    if n_logical > u32::MAX as usize / 2 {
        return Err(Error::Capacity {
            count: n,
            max: u32::MAX as usize / 4,
        });
    }
    let plan = SortPlan::new(n_logical as u32)?;
    let geom = plan.geometry;
    if geom.width > cfg.limits.max_side || geom.height > cfg.limits.max_side {
        return Err(Error::DimensionCap {
            width: geom.width,
            height: geom.height,
            max_side: cfg.limits.max_side,
        });
    }

    // Row-major key and value uploads, four per texel.
    let (iw, ih) = choose_dimensions(n_logical as u64 / 4);
    let mut keys = Texture2D::new(iw, ih, LaneFormat::Float, cfg.limits)?;
    let mut values = Texture2D::new(iw, ih, LaneFormat::Uint, cfg.limits)?;
    for q in 0..n_logical / 4 {
        let mut k = [0u32; 4];
        let mut v = [0u32; 4];
        for i in 0..4 {
            let p = pairs.get(4 * q + i).copied().unwrap_or(PAD);
            k[i] = p.key.to_bits();
            v[i] = p.value;
        }
        keys.set_linear(q, Texel::from_bits(k));
        values.set_linear(q, Texel::from_bits(v));
    }

    let mut bank = CacheBank::new(&cfg.caches);
    let mut tracer = match (bank.is_empty(), sink) {
        (true, None) => Tracer::untraced(),
        (true, Some(s)) => Tracer::with_sink(s),
        (false, None) => Tracer::with_sink(&mut bank),
        (false, Some(s)) => return sort_teed(pairs, cfg, s, plan, keys, values),
    };
    let mut run = run_plan(&mut tracer, cfg, &plan, &keys, &values)?;
    run.metrics.n = n;
    run.metrics.caches = bank.finish();
    finish(run, n, cfg)
}

fn sort_teed(
    pairs: &[KvPair],
    cfg: &SortConfig,
    sink: &mut dyn AccessSink,
    plan: SortPlan,
    keys: Texture2D,
    values: Texture2D,
) -> Result<SortOutput> {
    let mut bank = CacheBank::new(&cfg.caches);
    let mut tee = Tee {
        first: &mut bank,
        second: sink,
    };
    let mut tracer = Tracer::with_sink(&mut tee);
    let mut run = run_plan(&mut tracer, cfg, &plan, &keys, &values)?;
    run.metrics.n = pairs.len();
    run.metrics.caches = bank.finish();
    finish(run, pairs.len(), cfg)
}

struct Run {
    texture: Texture2D,
    metrics: SortMetrics,
    passes: Vec<PassRecord>,
}

fn finish(run: Run, n: usize, cfg: &SortConfig) -> Result<SortOutput> {
    let all = match cfg.final_layout {
        FinalLayout::Blockwise => blockwise_load(&run.texture, SORTED_BLOCK_EDGE)?,
        FinalLayout::SinglePair => (0..run.metrics.n_logical)
            .map(|i| {
                let t = run.texture.get_linear(i);
                KvPair::new(t.f32(0), t.lanes[1])
            })
            .collect(),
    };
    Ok(SortOutput {
        pairs: strip_padding(all, n)?,
        texture: Some(run.texture),
        metrics: run.metrics,
        passes: run.passes,
    })
}

fn debug_check(map: &PlacementMap, spec: PassSpec, pass: u32) -> Result<Vec<(u32, AdjacencyReport)>> {
    let steps: &[u32] = match spec.kind {
        PassKind::Fused => &[2, 1],
        _ => core::slice::from_ref(&spec.step),
    };
    let mut out = Vec::new();
    for &step in steps {
        let report = map.check_adjacency(step)?;
        if let Some(l) = report.first_violation {
            return Err(Error::LayoutViolation {
                pass,
                logical: l,
                detail: format!(
                    "partner of {l} is not adjacent at stage {} step {step} ({} violations)",
                    spec.stage, report.violations
                ),
            });
        }
        out.push((step, report));
    }
    Ok(out)
}

fn run_plan(
    tracer: &mut Tracer<'_>,
    cfg: &SortConfig,
    plan: &SortPlan,
    keys: &Texture2D,
    values: &Texture2D,
) -> Result<Run> {
    let geom = plan.geometry;
    let mut a = Texture2D::new(geom.width, geom.height, LaneFormat::KeyValue, cfg.limits)?;
    let mut b = a.like();
    let single_pair_dims = choose_dimensions(geom.n_logical as u64);
    let mut ctx = KernelCtx {
        tracer,
        order: cfg.order,
    };

    let mut shadow_a = cfg.debug.then(|| PlacementMap::new(geom.width, geom.height));
    let mut shadow_b = shadow_a.clone();

    preprocess_kernel(&mut ctx, &geom, keys, values, &mut a, shadow_a.as_mut())?;
    let after_pre = ctx.tracer.reads();
    let mut records = Vec::new();
    let mut final_tex = None;

    for spec in plan.passes.iter().skip(1).copied() {
        let is_last = spec.kind == PassKind::Fused && spec.stage == geom.stages;
        let pass = ctx.tracer.pass_id() + 1;
        if let Some(m) = &shadow_a {
            let adjacency = debug_check(m, spec, pass)?;
            records.push(PassRecord {
                spec,
                adjacency,
                placement: cfg.record_placements.then(|| m.clone()),
            });
        }
        let layout = match (spec.kind, is_last, cfg.final_layout) {
            (PassKind::CompareSwap, _, _) => OutputLayout::Step(spec.step - 1),
            (_, false, _) => OutputLayout::Step(spec.stage + 1),
            (_, true, FinalLayout::Blockwise) => {
                OutputLayout::Blockwise(BlockGrid::new(geom.width, geom.height, SORTED_BLOCK_EDGE)?)
            }
            (_, true, FinalLayout::SinglePair) => OutputLayout::SinglePair {
                width: single_pair_dims.0,
            },
        };
        let mut single = None;
        let out: &mut Texture2D = if matches!(layout, OutputLayout::SinglePair { .. }) {
            single.insert(Texture2D::new(
                single_pair_dims.0,
                single_pair_dims.1,
                LaneFormat::KeyValue,
                cfg.limits,
            )?)
        } else {
            &mut b
        };
        let shadow = match (&shadow_a, &mut shadow_b) {
            (Some(i), Some(o)) => Some(Shadow {
                input: i,
                output: (!matches!(layout, OutputLayout::SinglePair { .. })).then_some(o),
            }),
            _ => None,
        };
        match spec.kind {
            PassKind::CompareSwap => compare_swap_pass(&mut ctx, &geom, &a, out, spec.stage, spec.step, shadow)?,
            PassKind::Fused => compare_swap_fused(&mut ctx, &geom, &a, out, spec.stage, layout, shadow)?,
            PassKind::Preprocess => unreachable!("preprocess runs once before the loop"),
        }
        if let Some(s) = single {
            final_tex = Some(s);
        } else {
            core::mem::swap(&mut a, &mut b);
            core::mem::swap(&mut shadow_a, &mut shadow_b);
        }
        if is_last {
            if let Some(m) = &shadow_a {
                if final_tex.is_none() {
                    if let Err(l) = m.positions() {
                        return Err(Error::LayoutViolation {
                            pass,
                            logical: l,
                            detail: "final placement is not a bijection".into(),
                        });
                    }
                }
            }
        }
    }
    let reads = ctx.tracer.reads();
    let writes = ctx.tracer.writes();
    Ok(Run {
        texture: final_tex.unwrap_or(a),
        metrics: SortMetrics {
            n: 0,
            n_logical: geom.n_logical as usize,
            stages: geom.stages,
            passes: plan.compare_passes(),
            element_accesses: 2 * (reads - after_pre),
            texel_reads: reads,
            texel_writes: writes,
            caches: Vec::new(),
        },
        passes: records,
    })
}
