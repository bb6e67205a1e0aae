//! Experiment drivers behind the `texsplat` subcommands. Every driver checks
//! its results against an oracle before returning metrics.

use std::path::Path;
use std::time::Instant;

use anyhow::{bail, ensure, Context, Result};
use texsplat_core::cache::{CacheConfig, LatencyModel};
use texsplat_core::gs::{
    ablation_ladder, render_frame_with, render_reference, Camera, FrameBuffer, FrameOutput, Gaussian3D, Hooks,
    PipelineConfig, StageMetrics,
};
use texsplat_core::texsort::{self, terasort_baseline, KvPair, SortConfig, SortGeometry, SortMetrics, SortOutput};
use texsplat_core::texture::AccessSink;

use crate::{costfit, io, synth};

/// Smallest and largest sizes accepted by [`sort_bench`].
pub const MIN_BENCH_PAIRS: usize = 1 << 10;
pub const MAX_BENCH_PAIRS: usize = 1 << 24;

/// Parses `b:capacity`, e.g. `16:16`.
pub fn parse_cache(s: &str) -> std::result::Result<CacheConfig, String> {
    let (b, cap) = s.split_once(':').ok_or_else(|| format!("expected b:capacity, got `{s}`"))?;
    let b: u32 = b.trim().parse().map_err(|_| format!("bad block edge `{b}`"))?;
    let cap: usize = cap.trim().parse().map_err(|_| format!("bad capacity `{cap}`"))?;
    CacheConfig::new(b, cap).map_err(|e| e.to_string())
}

/// Parses `black`, `white` or `r,g,b`.
pub fn parse_background(s: &str) -> std::result::Result<[f32; 3], String> {
    match s {
        "black" => Ok([0.0; 3]),
        "white" => Ok([1.0; 3]),
        _ => {
            let parts: Vec<&str> = s.split(',').collect();
            if parts.len() != 3 {
                return Err(format!("expected black, white or r,g,b; got `{s}`"));
            }
            let mut rgb = [0.0f32; 3];
            for (c, p) in rgb.iter_mut().zip(parts) {
                *c = p.trim().parse().map_err(|_| format!("bad channel `{p}`"))?;
                if !c.is_finite() {
                    return Err(format!("bad channel `{p}`"));
                }
            }
            Ok(rgb)
        }
    }
}

pub fn cache_label(c: &CacheConfig) -> String {
    format!("misses_b{}_c{}", c.block_edge(), c.capacity_blocks())
}

/// Compares a sort result with a stable comparison sort of the input.
/// Values must index into `input`. Returns the first mismatching position.
pub fn verify_sort(input: &[KvPair], output: &[KvPair]) -> std::result::Result<(), String> {
    if input.len() != output.len() {
        return Err(format!("length {} != {}", output.len(), input.len()));
    }
    let mut oracle: Vec<f32> = input.iter().map(|p| p.key).collect();
    oracle.sort_by(f32::total_cmp);
    let mut seen = vec![false; input.len()];
    for (i, (p, &k)) in output.iter().zip(&oracle).enumerate() {
        if p.key.to_bits() != k.to_bits() {
            return Err(format!("index {i}: key {} != oracle {}", p.key, k));
        }
        let v = p.value as usize;
        if v >= input.len() || seen[v] || input[v].key.to_bits() != p.key.to_bits() {
            return Err(format!("index {i}: value {} does not carry key {}", p.value, p.key));
        }
        seen[v] = true;
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq)]
pub struct SortBenchRow {
    pub n: usize,
    pub implementation: &'static str,
    pub passes: usize,
    pub element_accesses: u64,
    pub misses: Vec<u64>,
    pub wall_ms: f64,
}

impl SortBenchRow {
    fn new(n: usize, implementation: &'static str, m: &SortMetrics, caches: &[CacheConfig], wall_ms: f64) -> Self {
        SortBenchRow {
            n,
            implementation,
            passes: m.passes,
            element_accesses: m.element_accesses,
            misses: caches.iter().map(|c| m.cache(*c).map_or(0, |s| s.misses)).collect(),
            wall_ms,
        }
    }
}

fn timed<T>(f: impl FnOnce() -> T) -> (T, f64) {
    let t0 = Instant::now();
    let out = f();
    (out, t0.elapsed().as_secs_f64() * 1e3)
}

fn run_both(n: usize, seed: u64, caches: &[CacheConfig]) -> Result<[(SortOutput, f64); 2]> {
    let input = synth::random_pairs(n, seed ^ n as u64);
    let cfg = SortConfig {
        caches: caches.to_vec(),
        ..SortConfig::default()
    };
    let (ours, t_ours) = timed(|| texsort::sort(&input, &cfg));
    let ours = ours.with_context(|| format!("sort of {n} pairs"))?;
    let (base, t_base) = timed(|| terasort_baseline(&input, &cfg));
    let base = base.with_context(|| format!("baseline sort of {n} pairs"))?;
    for (name, out) in [("ours", &ours), ("baseline", &base)] {
        if let Err(e) = verify_sort(&input, &out.pairs) {
            bail!("{name} sort of {n} pairs failed verification at {e}");
        }
    }
    Ok([(ours, t_ours), (base, t_base)])
}

/// Our sort and the baseline on identical seeded data for every size.
pub fn sort_bench(sizes: &[usize], seed: u64, caches: &[CacheConfig]) -> Result<Vec<SortBenchRow>> {
    let mut rows = Vec::new();
    for &n in sizes {
        ensure!(
            (MIN_BENCH_PAIRS..=MAX_BENCH_PAIRS).contains(&n),
            "size {n} outside [{MIN_BENCH_PAIRS}, {MAX_BENCH_PAIRS}]"
        );
        let [(ours, t_ours), (base, t_base)] = run_both(n, seed, caches)?;
        rows.push(SortBenchRow::new(n, "ours", &ours.metrics, caches, t_ours));
        rows.push(SortBenchRow::new(n, "baseline", &base.metrics, caches, t_base));
    }
    Ok(rows)
}

pub fn write_sort_bench(path: &Path, rows: &[SortBenchRow], caches: &[CacheConfig]) -> Result<()> {
    let mut header = vec!["n".to_string(), "impl".into(), "passes".into(), "element_accesses".into()];
    header.extend(caches.iter().map(cache_label));
    header.push("wall_ms".into());
    let header: Vec<&str> = header.iter().map(String::as_str).collect();
    let records = rows.iter().map(|r| {
        let mut rec = vec![
            r.n.to_string(),
            r.implementation.to_string(),
            r.passes.to_string(),
            r.element_accesses.to_string(),
        ];
        rec.extend(r.misses.iter().map(u64::to_string));
        rec.push(format!("{:.3}", r.wall_ms));
        rec
    });
    io::write_csv(path, &header, records)?;
    Ok(())
}

#[derive(Debug, Clone, PartialEq)]
pub struct CacheReportRow {
    pub n: usize,
    pub implementation: &'static str,
    pub cache: CacheConfig,
    pub passes: usize,
    pub reads: u64,
    pub misses: u64,
    /// Largest read-miss count of a single compare pass (ours only).
    pub max_pass_misses: Option<u64>,
    /// `W * H / b^2` of the sort texture (ours only).
    pub blocks_per_pass: Option<u64>,
    /// `1 - ours / baseline` (ours only).
    pub reduction: Option<f64>,
}

/// Cache behaviour of both sorts for every size and configuration.
pub fn cache_report(sizes: &[usize], seed: u64, caches: &[CacheConfig]) -> Result<Vec<CacheReportRow>> {
    ensure!(!caches.is_empty(), "cache-report needs at least one --cache");
    let mut rows = Vec::new();
    for &n in sizes {
        ensure!(
            (MIN_BENCH_PAIRS..=MAX_BENCH_PAIRS).contains(&n),
            "size {n} outside [{MIN_BENCH_PAIRS}, {MAX_BENCH_PAIRS}]"
        );
        let [(ours, _), (base, _)] = run_both(n, seed, caches)?;
        let geom = SortGeometry::new(ours.metrics.n_logical as u32)?;
        for c in caches {
            let o = ours.metrics.cache(*c).context("missing cache stats")?;
            let b = base.metrics.cache(*c).context("missing cache stats")?;
            let b2 = (c.block_edge() as u64).pow(2);
            rows.push(CacheReportRow {
                n,
                implementation: "ours",
                cache: *c,
                passes: ours.metrics.passes,
                reads: o.reads,
                misses: o.misses,
                max_pass_misses: Some(compare_pass_misses(&ours.metrics, *c).into_iter().max().unwrap_or(0)),
                blocks_per_pass: Some(geom.width as u64 * geom.height as u64 / b2.max(1)),
                reduction: Some(1.0 - o.misses as f64 / b.misses.max(1) as f64),
            });
            rows.push(CacheReportRow {
                n,
                implementation: "baseline",
                cache: *c,
                passes: base.metrics.passes,
                reads: b.reads,
                misses: b.misses,
                max_pass_misses: None,
                blocks_per_pass: None,
                reduction: None,
            });
        }
    }
    Ok(rows)
}

/// Read misses of every compare pass of our sort; the preprocessing pass
/// comes first and is skipped.
pub fn compare_pass_misses(m: &SortMetrics, cache: CacheConfig) -> Vec<u64> {
    m.cache(cache)
        .map(|s| s.per_pass.iter().skip(1).map(|p| p.misses).collect())
        .unwrap_or_default()
}

pub fn write_cache_report(path: &Path, rows: &[CacheReportRow]) -> Result<()> {
    let header = [
        "n",
        "impl",
        "block",
        "capacity",
        "passes",
        "reads",
        "misses",
        "max_pass_misses",
        "blocks_per_pass",
        "reduction",
    ];
    let opt = |v: Option<u64>| v.map_or(String::new(), |v| v.to_string());
    let records = rows.iter().map(|r| {
        [
            r.n.to_string(),
            r.implementation.to_string(),
            r.cache.block_edge().to_string(),
            r.cache.capacity_blocks().to_string(),
            r.passes.to_string(),
            r.reads.to_string(),
            r.misses.to_string(),
            opt(r.max_pass_misses),
            opt(r.blocks_per_pass),
            r.reduction.map_or(String::new(), |v| format!("{v:.4}")),
        ]
    });
    io::write_csv(path, &header, records)?;
    Ok(())
}

/// Renders one frame with stage timings, optionally streaming every access
/// to `trace`.
pub fn render(
    gaussians: &[Gaussian3D],
    camera: &Camera,
    cfg: &PipelineConfig,
    trace: Option<&mut dyn AccessSink>,
) -> Result<FrameOutput> {
    let start = Instant::now();
    let mut clock = move || start.elapsed().as_nanos() as u64;
    let mut hooks = Hooks {
        clock: Some(&mut clock),
        trace: trace.map(|t| -> &mut dyn AccessSink { t }),
    };
    Ok(render_frame_with(gaussians, camera, cfg, &mut hooks)?)
}

pub fn oracle_diff(image: &FrameBuffer, gaussians: &[Gaussian3D], camera: &Camera, background: [f32; 3]) -> Result<f32> {
    let reference = render_reference(gaussians, camera, background)?;
    Ok(image.max_abs_diff(&reference))
}

pub fn stage_header(caches: &[CacheConfig], with_variant: bool) -> Vec<String> {
    let mut h: Vec<String> = Vec::new();
    if with_variant {
        h.push("variant".into());
    }
    h.extend(["stage", "passes", "texel_reads", "texel_writes"].map(String::from));
    h.extend(caches.iter().map(cache_label));
    h.push("wall_ms".into());
    h
}

pub fn stage_record(s: &StageMetrics, caches: &[CacheConfig]) -> Vec<String> {
    let mut rec = vec![
        s.name.to_string(),
        s.passes.to_string(),
        s.texel_reads.to_string(),
        s.texel_writes.to_string(),
    ];
    rec.extend(
        caches
            .iter()
            .map(|c| s.caches.iter().find(|(k, _)| k == c).map_or(0, |(_, st)| st.misses).to_string()),
    );
    rec.push(format!("{:.3}", s.elapsed_ns as f64 / 1e6));
    rec
}

pub fn write_stages(path: &Path, frame: &FrameOutput, caches: &[CacheConfig]) -> Result<()> {
    let header = stage_header(caches, false);
    let header: Vec<&str> = header.iter().map(String::as_str).collect();
    io::write_csv(path, &header, frame.stages.iter().map(|s| stage_record(s, caches)))?;
    Ok(())
}

/// Runs the cumulative ablation ladder. Fails unless all four images are
/// bit-identical and, when `tolerance` is given, within it of the reference
/// renderer.
pub fn ablate(
    gaussians: &[Gaussian3D],
    camera: &Camera,
    base: &PipelineConfig,
    tolerance: Option<f32>,
) -> Result<Vec<(&'static str, FrameOutput)>> {
    let mut out: Vec<(&'static str, FrameOutput)> = Vec::new();
    for (name, cfg) in ablation_ladder(base) {
        let frame = render(gaussians, camera, &cfg, None).with_context(|| format!("variant {name}"))?;
        if let Some((first, f0)) = out.first() {
            let same = f0.image.data.len() == frame.image.data.len()
                && f0
                    .image
                    .data
                    .iter()
                    .zip(&frame.image.data)
                    .all(|(a, b)| a.to_bits() == b.to_bits());
            ensure!(same, "variant {name} image differs from {first}");
        }
        out.push((name, frame));
    }
    if let Some(tol) = tolerance {
        let diff = oracle_diff(&out[0].1.image, gaussians, camera, base.background)?;
        ensure!(diff <= tol, "images differ from the reference renderer by {diff} > {tol}");
    }
    Ok(out)
}

pub fn write_ablation(path: &Path, variants: &[(&'static str, FrameOutput)], caches: &[CacheConfig]) -> Result<()> {
    let header = stage_header(caches, true);
    let header: Vec<&str> = header.iter().map(String::as_str).collect();
    let records = variants.iter().flat_map(|(name, f)| {
        f.stages.iter().map(move |s| {
            let mut rec = vec![name.to_string()];
            rec.extend(stage_record(s, caches));
            rec
        })
    });
    io::write_csv(path, &header, records)?;
    Ok(())
}

/// Fits the latency model against a hidden cache and checks the fit.
pub fn fit_cost_model(samples: usize, seed: u64, hidden: CacheConfig) -> Result<LatencyModel> {
    let model = costfit::fit(samples, seed, hidden)?;
    Ok(model)
}

/// Block sizes down the rows, crossing direction across the columns.
pub fn write_cost_model(path: &Path, model: &LatencyModel) -> Result<()> {
    let header = ["block", "horizontal_weight", "vertical_weight"];
    let records = model
        .block_sizes
        .iter()
        .zip(model.horizontal().iter().zip(model.vertical()))
        .map(|(b, (h, v))| [b.to_string(), format!("{h:.6}"), format!("{v:.6}")]);
    io::write_csv(path, &header, records)?;
    Ok(())
}
