//! 2D-block texture cache model.
//!
//! The cache holds square `b x b` texel blocks, is fully associative and
//! evicts the least recently used block. Reads hit iff their block is
//! resident; writes never change residency. The cache is flushed whenever the
//! pass id changes (each kernel launch starts cold).
//!
//! Alongside the simulator sit the cross-block stride features and an
//! ordinary-least-squares latency model over them.

use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use crate::texture::{AccessEvent, AccessKind, AccessSink, TextureId};
use crate::{Error, Result};

/// Block edges used for stride features.
pub const BLOCK_SIZES: [u32; 5] = [2, 4, 8, 16, 32];

pub const DEFAULT_CAPACITY_BLOCKS: usize = 16;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct CacheConfig {
    block_edge: u32,
    capacity_blocks: usize,
}

impl CacheConfig {
    pub fn new(block_edge: u32, capacity_blocks: usize) -> Result<Self> {
        if !BLOCK_SIZES.contains(&block_edge) {
            return Err(Error::InvalidConfig(format!(
                "block edge {block_edge} not in {BLOCK_SIZES:?}"
            )));
        }
        if capacity_blocks == 0 {
            return Err(Error::InvalidConfig("capacity must be at least one block".into()));
        }
        Ok(CacheConfig {
            block_edge,
            capacity_blocks,
        })
    }

    pub fn block_edge(&self) -> u32 {
        self.block_edge
    }

    pub fn capacity_blocks(&self) -> usize {
        self.capacity_blocks
    }
}

impl Default for CacheConfig {
    fn default() -> Self {
        CacheConfig {
            block_edge: 8,
            capacity_blocks: DEFAULT_CAPACITY_BLOCKS,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct PassStats {
    pub pass_id: u32,
    pub reads: u64,
    pub misses: u64,
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct CacheStats {
    pub reads: u64,
    pub hits: u64,
    pub misses: u64,
    pub per_pass: Vec<PassStats>,
}

impl CacheStats {
    pub fn miss_rate(&self) -> f64 {
        if self.reads == 0 {
            0.0
        } else {
            self.misses as f64 / self.reads as f64
        }
    }
}

/// Streaming simulator; feed it events in issue order.
#[derive(Debug, Clone)]
pub struct CacheSim {
    cfg: CacheConfig,
    shift: u32,
    // Most recently used first.
    lru: Vec<u64>,
    stats: CacheStats,
}

#[inline]
fn block_key(texture: TextureId, bx: u32, by: u32) -> u64 {
    ((texture.0 as u64) << 40) | ((by as u64 & 0xf_ffff) << 20) | (bx as u64 & 0xf_ffff)
}

impl CacheSim {
    pub fn new(cfg: CacheConfig) -> Self {
        CacheSim {
            cfg,
            shift: cfg.block_edge.trailing_zeros(),
            lru: Vec::with_capacity(cfg.capacity_blocks),
            stats: CacheStats::default(),
        }
    }

    pub fn config(&self) -> CacheConfig {
        self.cfg
    }

    #[inline]
    pub fn access(&mut self, ev: &AccessEvent) {
        if ev.kind == AccessKind::Write {
            return;
        }
        let new_pass = match self.stats.per_pass.last() {
            Some(p) => p.pass_id != ev.pass_id,
            None => true,
        };
        if new_pass {
            self.lru.clear();
            self.stats.per_pass.push(PassStats {
                pass_id: ev.pass_id,
                ..PassStats::default()
            });
        }
        let key = block_key(ev.texture, ev.x >> self.shift, ev.y >> self.shift);
        let pass = self.stats.per_pass.last_mut().expect("pass entry pushed above");
        pass.reads += 1;
        self.stats.reads += 1;
        match self.lru.iter().position(|&k| k == key) {
            Some(pos) => {
                self.lru[..=pos].rotate_right(1);
                self.stats.hits += 1;
            }
            None => {
                if self.lru.len() == self.cfg.capacity_blocks {
                    self.lru.pop();
                }
                self.lru.insert(0, key);
                self.stats.misses += 1;
                pass.misses += 1;
            }
        }
    }

    pub fn stats(&self) -> &CacheStats {
        &self.stats
    }

    pub fn finish(self) -> CacheStats {
        self.stats
    }
}

impl AccessSink for CacheSim {
    fn record(&mut self, ev: &AccessEvent) {
        self.access(ev);
    }
}

/// Several caches fed from one trace.
#[derive(Debug, Clone, Default)]
pub struct CacheBank {
    sims: Vec<CacheSim>,
}

impl CacheBank {
    pub fn new(configs: &[CacheConfig]) -> Self {
        CacheBank {
            sims: configs.iter().map(|&c| CacheSim::new(c)).collect(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.sims.is_empty()
    }

    pub fn finish(self) -> Vec<(CacheConfig, CacheStats)> {
        self.sims.into_iter().map(|s| (s.cfg, s.finish())).collect()
    }

    /// Snapshot of (config, stats) pairs so far.
    pub fn snapshot(&self) -> Vec<(CacheConfig, CacheStats)> {
        self.sims.iter().map(|s| (s.cfg, s.stats.clone())).collect()
    }
}

impl AccessSink for CacheBank {
    fn record(&mut self, ev: &AccessEvent) {
        for s in &mut self.sims {
            s.access(ev);
        }
    }
}

/// Runs a recorded single-texture trace through a fresh cache.
///
/// `extent` is the texture's `(width, height)`; events outside it are
/// rejected.
pub fn simulate(trace: &[AccessEvent], extent: (u32, u32), cfg: CacheConfig) -> Result<CacheStats> {
    let mut sim = CacheSim::new(cfg);
    for ev in trace {
        if ev.x >= extent.0 || ev.y >= extent.1 {
            return Err(Error::OutOfBounds {
                texture: ev.texture,
                x: ev.x,
                y: ev.y,
                width: extent.0,
                height: extent.1,
            });
        }
        sim.access(ev);
    }
    Ok(sim.finish())
}

/// Compulsory misses for one traversal of a `width x height` texture.
pub fn min_misses(width: u32, height: u32, block_edge: u32) -> Result<u64> {
    if block_edge == 0 || !width.is_multiple_of(block_edge) || !height.is_multiple_of(block_edge) {
        return Err(Error::InvalidConfig(format!(
            "block edge {block_edge} does not divide {width}x{height}"
        )));
    }
    Ok(width as u64 * height as u64 / (block_edge as u64 * block_edge as u64))
}

/// Cross-block stride counts per assumed block edge.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct StrideHistogram {
    pub block_sizes: Vec<u32>,
    pub horizontal: Vec<u64>,
    pub vertical: Vec<u64>,
    pub total: u64,
}

impl StrideHistogram {
    /// Counts normalized by total accesses: horizontal features first, then
    /// vertical, in `block_sizes` order.
    pub fn features(&self) -> Vec<f64> {
        let denom = self.total.max(1) as f64;
        self.horizontal
            .iter()
            .chain(self.vertical.iter())
            .map(|&c| c as f64 / denom)
            .collect()
    }

    pub fn feature_names(&self) -> Vec<String> {
        feature_names(&self.block_sizes)
    }
}

pub fn feature_names(block_sizes: &[u32]) -> Vec<String> {
    block_sizes
        .iter()
        .map(|s| format!("cross_h_{s}"))
        .chain(block_sizes.iter().map(|s| format!("cross_v_{s}")))
        .collect()
}

/// Counts, for each assumed block edge, successive reads of one work item
/// that land in a different block column (horizontal) or block row
/// (vertical). A diagonal crossing counts on both axes. Writes are ignored.
pub fn cross_block_histogram(trace: &[AccessEvent], block_sizes: &[u32]) -> StrideHistogram {
    let mut h = StrideHistogram {
        block_sizes: block_sizes.to_vec(),
        horizontal: vec![0; block_sizes.len()],
        vertical: vec![0; block_sizes.len()],
        total: 0,
    };
    let mut prev: Option<&AccessEvent> = None;
    for ev in trace.iter().filter(|e| e.kind == AccessKind::Read) {
        h.total += 1;
        if let Some(p) = prev {
            if p.pass_id == ev.pass_id && p.work_item == ev.work_item && p.texture == ev.texture {
                for (i, &s) in block_sizes.iter().enumerate() {
                    if p.x / s != ev.x / s {
                        h.horizontal[i] += 1;
                    }
                    if p.y / s != ev.y / s {
                        h.vertical[i] += 1;
                    }
                }
            }
        }
        prev = Some(ev);
    }
    h
}

/// Linear latency model over normalized cross-block features.
#[derive(Debug, Clone, PartialEq)]
pub struct LatencyModel {
    pub block_sizes: Vec<u32>,
    pub intercept: f64,
    /// Horizontal weights then vertical weights, in `block_sizes` order.
    pub weights: Vec<f64>,
    pub r_squared: f64,
}

impl LatencyModel {
    pub fn feature_names(&self) -> Vec<String> {
        feature_names(&self.block_sizes)
    }

    pub fn horizontal(&self) -> &[f64] {
        &self.weights[..self.block_sizes.len()]
    }

    pub fn vertical(&self) -> &[f64] {
        &self.weights[self.block_sizes.len()..]
    }

    pub fn predict(&self, h: &StrideHistogram) -> f64 {
        self.intercept + h.features().iter().zip(&self.weights).map(|(f, w)| f * w).sum::<f64>()
    }

    /// Indices of the weights ordered by decreasing magnitude.
    pub fn ranked(&self) -> Vec<usize> {
        let mut idx: Vec<usize> = (0..self.weights.len()).collect();
        idx.sort_by(|&a, &b| libm::fabs(self.weights[b]).total_cmp(&libm::fabs(self.weights[a])));
        idx
    }
}

/// Fits `latency ~ intercept + sum(w_k * feature_k)` by least squares.
///
/// Uses modified Gram-Schmidt with one re-orthogonalization pass; a column
/// whose residual norm collapses is reported as collinear.
pub fn fit_latency_model(samples: &[(StrideHistogram, f64)]) -> Result<LatencyModel> {
    let Some((first, _)) = samples.first() else {
        return Err(Error::TooFewSamples { needed: 1, got: 0 });
    };
    let block_sizes = first.block_sizes.clone();
    let n_features = 2 * block_sizes.len();
    let needed = 2 * n_features;
    if samples.len() < needed {
        return Err(Error::TooFewSamples {
            needed,
            got: samples.len(),
        });
    }
    let m = samples.len();
    let cols = n_features + 1;
    // Column-major design matrix, intercept first.
    let mut a = vec![vec![0.0f64; m]; cols];
    let mut y = vec![0.0f64; m];
    for (row, (hist, lat)) in samples.iter().enumerate() {
        if hist.block_sizes != block_sizes {
            return Err(Error::InputMismatch("samples use different block sizes".into()));
        }
        if !(*lat > 0.0) || !lat.is_finite() {
            return Err(Error::Precondition(format!("latency {lat} is not positive")));
        }
        a[0][row] = 1.0;
        for (k, f) in hist.features().into_iter().enumerate() {
            a[k + 1][row] = f;
        }
        y[row] = *lat;
    }

    let mut names = Vec::with_capacity(cols);
    names.push(String::from("intercept"));
    names.extend(feature_names(&block_sizes));

    let norms: Vec<f64> = a.iter().map(|c| norm(c)).collect();
    let mut q: Vec<Vec<f64>> = Vec::with_capacity(cols);
    let mut r = vec![vec![0.0f64; cols]; cols];
    let mut collinear = Vec::new();
    for j in 0..cols {
        let mut v = a[j].clone();
        for _ in 0..2 {
            for (i, qi) in q.iter().enumerate() {
                let d = dot(qi, &v);
                r[i][j] += d;
                axpy(-d, qi, &mut v);
            }
        }
        let nv = norm(&v);
        if nv <= 1e-10 * norms[j].max(1e-300) || nv < 1e-14 {
            collinear.push(names[j].clone());
            q.push(vec![0.0; m]);
            continue;
        }
        r[j][j] = nv;
        v.iter_mut().for_each(|x| *x /= nv);
        q.push(v);
    }
    if !collinear.is_empty() {
        return Err(Error::DegenerateFit { collinear });
    }

    let qty: Vec<f64> = q.iter().map(|qi| dot(qi, &y)).collect();
    let mut beta = vec![0.0f64; cols];
    for i in (0..cols).rev() {
        let mut s = qty[i];
        for k in i + 1..cols {
            s -= r[i][k] * beta[k];
        }
        beta[i] = s / r[i][i];
    }

    let mean = y.iter().sum::<f64>() / m as f64;
    let ss_tot: f64 = y.iter().map(|v| (v - mean) * (v - mean)).sum();
    let ss_res: f64 = (0..m)
        .map(|row| {
            let pred: f64 = (0..cols).map(|c| a[c][row] * beta[c]).sum();
            (y[row] - pred) * (y[row] - pred)
        })
        .sum();
    let r_squared = if ss_tot > 0.0 { 1.0 - ss_res / ss_tot } else { 1.0 };

    Ok(LatencyModel {
        block_sizes,
        intercept: beta[0],
        weights: beta[1..].to_vec(),
        r_squared,
    })
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn norm(a: &[f64]) -> f64 {
    libm::sqrt(dot(a, a))
}

fn axpy(alpha: f64, x: &[f64], y: &mut [f64]) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += alpha * xi;
    }
}
