//! Simulated 2.5D texture memory.
//!
//! A [`Texture2D`] is a `width x height` grid of [`Texel`]s, each holding four
//! raw 32-bit lanes. Kernels never touch texels directly; they go through a
//! [`Tracer`], which bounds-checks every access, counts it and optionally
//! forwards an [`AccessEvent`] to an [`AccessSink`] (a trace recorder or a
//! streaming cache simulator).

use alloc::vec;
use alloc::vec::Vec;
use core::fmt;
use core::sync::atomic::{AtomicU32, Ordering};

use crate::{Error, Result};

/// Default cap on either texture side, in texels.
pub const DEFAULT_MAX_SIDE: u32 = 16384;

static NEXT_TEXTURE_ID: AtomicU32 = AtomicU32::new(0);

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct TextureId(pub u32);

impl fmt::Display for TextureId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "#{}", self.0)
    }
}

/// Four raw 32-bit lanes. Whether a lane is a float or an integer is up to
/// the texture's [`LaneFormat`]; the bits are stored verbatim either way.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash)]
pub struct Texel {
    pub lanes: [u32; 4],
}

impl Texel {
    pub const ZERO: Texel = Texel { lanes: [0; 4] };

    pub fn from_bits(lanes: [u32; 4]) -> Self {
        Texel { lanes }
    }

    pub fn from_f32(v: [f32; 4]) -> Self {
        Texel {
            lanes: [v[0].to_bits(), v[1].to_bits(), v[2].to_bits(), v[3].to_bits()],
        }
    }

    pub fn to_f32(self) -> [f32; 4] {
        self.lanes.map(f32::from_bits)
    }

    #[inline]
    pub fn f32(self, lane: usize) -> f32 {
        f32::from_bits(self.lanes[lane])
    }

    #[inline]
    pub fn set_f32(&mut self, lane: usize, v: f32) {
        self.lanes[lane] = v.to_bits();
    }
}

/// How the lanes of a texture are meant to be read.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum LaneFormat {
    #[default]
    Float,
    Uint,
    /// `(key0, value0, key1, value1)`: float keys, integer values.
    KeyValue,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TextureLimits {
    pub max_side: u32,
}

impl Default for TextureLimits {
    fn default() -> Self {
        TextureLimits {
            max_side: DEFAULT_MAX_SIDE,
        }
    }
}

#[derive(Clone, PartialEq)]
pub struct Texture2D {
    id: TextureId,
    width: u32,
    height: u32,
    format: LaneFormat,
    data: Vec<Texel>,
}

impl fmt::Debug for Texture2D {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Texture2D")
            .field("id", &self.id)
            .field("width", &self.width)
            .field("height", &self.height)
            .field("format", &self.format)
            .finish_non_exhaustive()
    }
}

/// Allocates a zero-filled texture with the default side limit.
pub fn alloc_texture(width: u32, height: u32) -> Result<Texture2D> {
    Texture2D::new(width, height, LaneFormat::Float, TextureLimits::default())
}

impl Texture2D {
    pub fn new(width: u32, height: u32, format: LaneFormat, limits: TextureLimits) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::InvalidDimension { width, height });
        }
        if width > limits.max_side || height > limits.max_side {
            return Err(Error::DimensionCap {
                width,
                height,
                max_side: limits.max_side,
            });
        }
        Ok(Texture2D {
            id: TextureId(NEXT_TEXTURE_ID.fetch_add(1, Ordering::Relaxed)),
            width,
            height,
            format,
            data: vec![Texel::ZERO; width as usize * height as usize],
        })
    }

    /// Like [`Texture2D::new`] but both sides must be powers of two.
    pub fn new_pow2(width: u32, height: u32, format: LaneFormat, limits: TextureLimits) -> Result<Self> {
        if !width.is_power_of_two() || !height.is_power_of_two() {
            return Err(Error::InvalidDimension { width, height });
        }
        Self::new(width, height, format, limits)
    }

    /// A texture with the same shape and format but a fresh id and zeroed data.
    pub fn like(&self) -> Self {
        Texture2D {
            id: TextureId(NEXT_TEXTURE_ID.fetch_add(1, Ordering::Relaxed)),
            width: self.width,
            height: self.height,
            format: self.format,
            data: vec![Texel::ZERO; self.data.len()],
        }
    }

    pub fn id(&self) -> TextureId {
        self.id
    }

    pub fn width(&self) -> u32 {
        self.width
    }

    pub fn height(&self) -> u32 {
        self.height
    }

    pub fn format(&self) -> LaneFormat {
        self.format
    }

    pub fn texel_count(&self) -> usize {
        self.data.len()
    }

    pub fn texels(&self) -> &[Texel] {
        &self.data
    }

    #[inline]
    fn index(&self, x: u32, y: u32) -> Result<usize> {
        if x >= self.width || y >= self.height {
            return Err(Error::OutOfBounds {
                texture: self.id,
                x,
                y,
                width: self.width,
                height: self.height,
            });
        }
        Ok(y as usize * self.width as usize + x as usize)
    }

    /// Untraced read (host-side inspection).
    pub fn read_texel(&self, x: u32, y: u32) -> Result<Texel> {
        Ok(self.data[self.index(x, y)?])
    }

    /// Untraced write (host-side upload).
    pub fn write_texel(&mut self, x: u32, y: u32, t: Texel) -> Result<()> {
        let i = self.index(x, y)?;
        self.data[i] = t;
        Ok(())
    }

    /// Row-major texel at linear index `i`, for uploads.
    pub fn set_linear(&mut self, i: usize, t: Texel) {
        self.data[i] = t;
    }

    pub fn get_linear(&self, i: usize) -> Texel {
        self.data[i]
    }

    pub(crate) fn copy_from(&mut self, other: &Texture2D) {
        self.data.copy_from_slice(&other.data);
    }
}

/// Power-of-two texture dimensions holding at least `n_texels` texels.
///
/// The product is the smallest power of two `>= n_texels`; its exponent is
/// split as evenly as possible with the wider side first.
pub fn choose_dimensions(n_texels: u64) -> (u32, u32) {
    let total_bits = n_texels.max(1).next_power_of_two().trailing_zeros();
    let w_bits = total_bits.div_ceil(2);
    let h_bits = total_bits / 2;
    (1u32 << w_bits, 1u32 << h_bits)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum AccessKind {
    Read,
    Write,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct AccessEvent {
    pub pass_id: u32,
    pub work_item: u32,
    pub texture: TextureId,
    pub x: u32,
    pub y: u32,
    pub kind: AccessKind,
}

/// Consumer of traced accesses.
pub trait AccessSink {
    fn record(&mut self, ev: &AccessEvent);
}

impl AccessSink for Vec<AccessEvent> {
    fn record(&mut self, ev: &AccessEvent) {
        self.push(*ev);
    }
}

/// Forwards every event to two sinks.
pub struct Tee<'a, 'b> {
    pub first: &'a mut dyn AccessSink,
    pub second: &'b mut dyn AccessSink,
}

impl AccessSink for Tee<'_, '_> {
    fn record(&mut self, ev: &AccessEvent) {
        self.first.record(ev);
        self.second.record(ev);
    }
}

/// Shifts pass ids by `base` before forwarding, so several tracers can share
/// one trace without their pass ids colliding.
pub struct OffsetSink<'a> {
    pub inner: &'a mut dyn AccessSink,
    pub base: u32,
}

impl AccessSink for OffsetSink<'_> {
    fn record(&mut self, ev: &AccessEvent) {
        self.inner.record(&AccessEvent {
            pass_id: ev.pass_id + self.base,
            ..*ev
        });
    }
}

/// Orders per-work-item trace chunks deterministically: by pass, then work
/// item, keeping each work item's own sequence.
pub fn merge_traces(chunks: Vec<Vec<AccessEvent>>) -> Vec<AccessEvent> {
    let mut all: Vec<AccessEvent> = chunks.into_iter().flatten().collect();
    all.sort_by_key(|e| (e.pass_id, e.work_item));
    all
}

/// Access path used by kernels: counts texel reads and writes, and streams
/// events to an optional sink.
pub struct Tracer<'a> {
    sink: Option<&'a mut dyn AccessSink>,
    trace_writes: bool,
    pass_id: u32,
    started: bool,
    reads: u64,
    writes: u64,
}

impl Default for Tracer<'_> {
    fn default() -> Self {
        Self::untraced()
    }
}

impl<'a> Tracer<'a> {
    pub fn untraced() -> Self {
        Tracer {
            sink: None,
            trace_writes: false,
            pass_id: 0,
            started: false,
            reads: 0,
            writes: 0,
        }
    }

    pub fn with_sink(sink: &'a mut dyn AccessSink) -> Self {
        Tracer {
            sink: Some(sink),
            ..Self::untraced()
        }
    }

    /// Also emit write events (they never affect cache residency).
    pub fn trace_writes(mut self, on: bool) -> Self {
        self.trace_writes = on;
        self
    }

    pub fn is_tracing(&self) -> bool {
        self.sink.is_some()
    }

    /// Starts a new kernel pass and returns its id.
    pub fn begin_pass(&mut self) -> u32 {
        if self.started {
            self.pass_id += 1;
        }
        self.started = true;
        self.pass_id
    }

    pub fn pass_id(&self) -> u32 {
        self.pass_id
    }

    /// Number of passes begun so far.
    pub fn passes(&self) -> u32 {
        if self.started {
            self.pass_id + 1
        } else {
            0
        }
    }

    pub fn reads(&self) -> u64 {
        self.reads
    }

    pub fn writes(&self) -> u64 {
        self.writes
    }

    #[inline]
    pub fn read(&mut self, tex: &Texture2D, x: u32, y: u32, work_item: u32) -> Result<Texel> {
        let t = tex.read_texel(x, y)?;
        self.reads += 1;
        if let Some(sink) = self.sink.as_deref_mut() {
            sink.record(&AccessEvent {
                pass_id: self.pass_id,
                work_item,
                texture: tex.id,
                x,
                y,
                kind: AccessKind::Read,
            });
        }
        Ok(t)
    }

    #[inline]
    pub fn write(&mut self, tex: &mut Texture2D, x: u32, y: u32, work_item: u32, t: Texel) -> Result<()> {
        tex.write_texel(x, y, t)?;
        self.writes += 1;
        if self.trace_writes {
            if let Some(sink) = self.sink.as_deref_mut() {
                sink.record(&AccessEvent {
                    pass_id: self.pass_id,
                    work_item,
                    texture: tex.id,
                    x,
                    y,
                    kind: AccessKind::Write,
                });
            }
        }
        Ok(())
    }

    /// Accounts for `n` accesses that bypass texture memory (linear buffers).
    pub fn count_buffer(&mut self, reads: u64, writes: u64) {
        self.reads += reads;
        self.writes += writes;
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_initialised() {
        let t = alloc_texture(4, 2).unwrap();
        assert_eq!(t.texel_count(), 8);
        assert!(t.texels().iter().all(|&x| x == Texel::ZERO));
        assert_eq!(alloc_texture(1, 1).unwrap().texel_count(), 1);
        assert_eq!(alloc_texture(1024, 1024).unwrap().texel_count(), 1 << 20);
    }

    #[test]
    fn zero_dimension_rejected() {
        assert!(matches!(alloc_texture(0, 4), Err(Error::InvalidDimension { .. })));
        assert!(matches!(alloc_texture(4, 0), Err(Error::InvalidDimension { .. })));
    }

    #[test]
    fn cap_enforced() {
        let limits = TextureLimits { max_side: 64 };
        assert!(matches!(
            Texture2D::new(128, 1, LaneFormat::Float, limits),
            Err(Error::DimensionCap { .. })
        ));
        assert!(Texture2D::new_pow2(6, 4, LaneFormat::Float, limits).is_err());
    }

    #[test]
    fn write_then_read() {
        let mut t = alloc_texture(4, 4).unwrap();
        let v = Texel::from_f32([1.0, 2.0, 3.0, 4.0]);
        t.write_texel(0, 0, v).unwrap();
        assert_eq!(t.read_texel(0, 0).unwrap().to_f32(), [1.0, 2.0, 3.0, 4.0]);
        assert_eq!(t.read_texel(3, 3).unwrap(), Texel::ZERO);
        t.write_texel(0, 0, Texel::from_bits([9, 9, 9, 9])).unwrap();
        assert_eq!(t.read_texel(0, 0).unwrap().lanes, [9; 4]);
    }

    #[test]
    fn nan_bits_survive() {
        let mut t = alloc_texture(1, 1).unwrap();
        let bits = [0x7fc0_0001, 0xffff_ffff, 0x8000_0000, 1];
        t.write_texel(0, 0, Texel::from_bits(bits)).unwrap();
        assert_eq!(t.read_texel(0, 0).unwrap().lanes, bits);
    }

    #[test]
    fn out_of_bounds_names_texture() {
        let t = alloc_texture(2, 2).unwrap();
        match t.read_texel(2, 0) {
            Err(Error::OutOfBounds { texture, x, y, .. }) => {
                assert_eq!((texture, x, y), (t.id(), 2, 0));
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn dimension_examples() {
        assert_eq!(choose_dimensions(1 << 20), (1024, 1024));
        assert_eq!(choose_dimensions(524_288), (1024, 512));
        assert_eq!(choose_dimensions(3), (2, 2));
        assert_eq!(choose_dimensions(1), (1, 1));
        assert_eq!(choose_dimensions(2), (2, 1));
    }

    // Enumerate every power-of-two pair and apply the minimality and tie rules.
    fn dims_oracle(n: u64) -> (u32, u32) {
        let mut best: Option<(u64, u32, u32, u32)> = None;
        for wb in 0..32u32 {
            for hb in 0..32u32 {
                let prod = 1u64 << (wb + hb);
                if prod < n {
                    continue;
                }
                let skew = wb.abs_diff(hb);
                let cand = (prod, skew, wb, hb);
                let better = match best {
                    None => true,
                    Some((bp, bs, bw, _)) => (prod, skew) < (bp, bs) || ((prod, skew) == (bp, bs) && wb > bw),
                };
                if better {
                    best = Some(cand);
                }
            }
        }
        let (_, _, wb, hb) = best.unwrap();
        (1 << wb, 1 << hb)
    }

    #[test]
    fn dimensions_match_enumeration() {
        for n in (1..5000u64).chain([524_288, 1 << 20, (1 << 20) + 1, 3 << 18]) {
            assert_eq!(choose_dimensions(n), dims_oracle(n), "n = {n}");
        }
    }

    #[test]
    fn dimensions_product_bound() {
        let mut n = 1u64;
        while n <= 1 << 24 {
            for m in [n, n + 1, 2 * n - 1] {
                if m > 1 << 24 {
                    continue;
                }
                let (w, h) = choose_dimensions(m);
                let prod = w as u64 * h as u64;
                assert!(w.is_power_of_two() && h.is_power_of_two());
                assert!(prod >= m && prod < 2 * m, "m = {m}");
            }
            n *= 2;
        }
    }

    #[test]
    fn tracer_counts_reads_and_orders_passes() {
        let mut log: Vec<AccessEvent> = Vec::new();
        let mut tex = alloc_texture(4, 4).unwrap();
        {
            let mut tr = Tracer::with_sink(&mut log);
            assert_eq!(tr.begin_pass(), 0);
            for i in 0..5 {
                tr.read(&tex, i % 4, 0, i).unwrap();
            }
            assert_eq!(tr.begin_pass(), 1);
            tr.write(&mut tex, 1, 1, 0, Texel::ZERO).unwrap();
            assert_eq!((tr.reads(), tr.writes()), (5, 1));
        }
        assert_eq!(log.len(), 5);
        assert!(log.iter().all(|e| e.kind == AccessKind::Read && e.pass_id == 0));
    }

    #[test]
    fn write_tracing_opt_in() {
        let mut log: Vec<AccessEvent> = Vec::new();
        let mut tex = alloc_texture(2, 2).unwrap();
        let mut tr = Tracer::with_sink(&mut log).trace_writes(true);
        tr.begin_pass();
        tr.write(&mut tex, 0, 1, 3, Texel::ZERO).unwrap();
        assert_eq!(log[0].kind, AccessKind::Write);
        assert_eq!((log[0].x, log[0].y, log[0].work_item), (0, 1, 3));
    }

    #[test]
    fn merged_traces_are_ordered() {
        let ev = |pass, wi, x| AccessEvent {
            pass_id: pass,
            work_item: wi,
            texture: TextureId(0),
            x,
            y: 0,
            kind: AccessKind::Read,
        };
        let merged = merge_traces(alloc::vec![
            alloc::vec![ev(0, 2, 0), ev(0, 2, 1)],
            alloc::vec![ev(0, 1, 5), ev(0, 1, 6)],
        ]);
        let xs: Vec<u32> = merged.iter().map(|e| e.x).collect();
        assert_eq!(xs, [5, 6, 0, 1]);
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #[test]
            fn last_write_wins(ops in proptest::collection::vec((0u32..8, 0u32..4, any::<[u32; 4]>()), 1..64)) {
                let mut tex = alloc_texture(8, 4).unwrap();
                let mut model = [[Texel::ZERO; 8]; 4];
                for &(x, y, lanes) in &ops {
                    tex.write_texel(x, y, Texel::from_bits(lanes)).unwrap();
                    model[y as usize][x as usize] = Texel::from_bits(lanes);
                }
                for y in 0..4 {
                    for x in 0..8 {
                        prop_assert_eq!(tex.read_texel(x, y).unwrap(), model[y as usize][x as usize]);
                    }
                }
            }

            #[test]
            fn read_events_match_calls(coords in proptest::collection::vec((0u32..4, 0u32..4), 0..100)) {
                let tex = alloc_texture(4, 4).unwrap();
                let mut log: Vec<AccessEvent> = Vec::new();
                let mut tr = Tracer::with_sink(&mut log);
                tr.begin_pass();
                for (i, &(x, y)) in coords.iter().enumerate() {
                    tr.read(&tex, x, y, i as u32).unwrap();
                }
                prop_assert_eq!(log.len(), coords.len());
            }
        }
    }
}
