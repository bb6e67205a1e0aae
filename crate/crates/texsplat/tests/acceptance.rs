//! Acceptance suite: one PASS/FAIL line per criterion.
//!
//! Runs as a plain binary (`harness = false`). Pass criterion numbers as
//! arguments to run a subset, e.g. `cargo test --test acceptance -- 2 5`.
//! Criterion 9 needs a trained point cloud: set `TEXSPLAT_SCENE` (and
//! optionally `TEXSPLAT_CAMERA`) to run it.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use texsplat::bench::{ablate, compare_pass_misses, verify_sort};
use texsplat::io::{self, PlyPoint};
use texsplat::{costfit, synth};
use texsplat_core::cache::{CacheConfig, BLOCK_SIZES};
use texsplat_core::gs::{
    extract_tile, normalize_key, project_gaussian, render_frame, render_reference, DepthBounds, PipelineConfig,
    TileRange,
};
use texsplat_core::gs::keys::MAX_TILES;
use texsplat_core::texsort::{sort, terasort_baseline, KvPair, SortConfig, SortGeometry};

type Outcome = Result<String, String>;
type Criterion = (u32, &'static str, fn() -> Verdict);

macro_rules! check {
    ($cond:expr, $($msg:tt)*) => {
        if !$cond {
            return Err(format!($($msg)*));
        }
    };
}

fn log2(n: usize) -> u64 {
    n.trailing_zeros() as u64
}

fn c1_sort_correctness() -> Outcome {
    let t0 = Instant::now();
    let plan: [(usize, usize); 9] = [
        (1, 20),
        (2, 20),
        (3, 25),
        (4, 25),
        (1 << 10, 30),
        ((1 << 10) + 1, 30),
        (1 << 14, 35),
        (1 << 17, 12),
        (1 << 20, 3),
    ];
    let mut arrays = 0;
    let mut rng = ChaCha8Rng::seed_from_u64(0xC1);
    for (n, count) in plan {
        for k in 0..count {
            // Every other array draws from 16 distinct keys to force duplicates.
            let input: Vec<KvPair> = (0..n)
                .map(|i| {
                    let key = if k % 2 == 0 {
                        rng.gen_range(-1.0e6f32..1.0e6)
                    } else {
                        rng.gen_range(0..16) as f32 * 0.25
                    };
                    KvPair::new(key, i as u32)
                })
                .collect();
            let out = sort(&input, &SortConfig::default()).map_err(|e| format!("n={n}: {e}"))?;
            verify_sort(&input, &out.pairs).map_err(|e| format!("n={n} array {k}: {e}"))?;
            arrays += 1;
        }
    }
    let elapsed = t0.elapsed();
    check!(arrays == 200, "ran {arrays} arrays");
    check!(elapsed < Duration::from_secs(120), "took {:.1} s", elapsed.as_secs_f64());
    Ok(format!("200 arrays, n from 1 to 2^20, {:.1} s", elapsed.as_secs_f64()))
}

fn c2_formulas() -> Outcome {
    let mut parts = Vec::new();
    for n in [1usize << 10, 1 << 14, 1 << 17] {
        let input = synth::random_pairs(n, n as u64);
        let ours = sort(&input, &SortConfig::default()).map_err(|e| e.to_string())?;
        let base = terasort_baseline(&input, &SortConfig::default()).map_err(|e| e.to_string())?;
        let x = log2(n);
        let n = n as u64;
        let m = &ours.metrics;
        check!(m.passes as u64 == x * (x - 1) / 2, "n={n}: {} passes, want {}", m.passes, x * (x - 1) / 2);
        check!(
            m.element_accesses == n * x * (x - 1) / 2,
            "n={n}: {} accesses, want {}",
            m.element_accesses,
            n * x * (x - 1) / 2
        );
        let want = 5 * n * x * (x + 1) / 2;
        check!(
            base.metrics.element_accesses == want,
            "n={n}: baseline {} accesses, want {want}",
            base.metrics.element_accesses
        );
        parts.push(format!("n={n}: {} vs {}", m.element_accesses, want));
    }
    Ok(parts.join("; "))
}

fn c3_adjacency() -> Outcome {
    let n = 1usize << 14;
    let input = synth::random_pairs(n, 3);
    let cfg = SortConfig {
        debug: true,
        ..SortConfig::default()
    };
    let out = sort(&input, &cfg).map_err(|e| e.to_string())?;
    verify_sort(&input, &out.pairs)?;
    let x = log2(n) as usize;
    check!(out.passes.len() == x * (x - 1) / 2, "{} passes recorded", out.passes.len());
    let (mut checked, mut violations) = (0u64, 0u64);
    for rec in &out.passes {
        check!(!rec.adjacency.is_empty(), "pass {:?} has no adjacency report", rec.spec);
        for (_, r) in &rec.adjacency {
            checked += r.pairs_checked;
            violations += r.violations;
        }
    }
    check!(violations == 0, "{violations} of {checked} compare pairs not adjacent");
    Ok(format!("{} passes, {checked} compare pairs, 0 violations", out.passes.len()))
}

fn c4_cache() -> Outcome {
    let caches: Vec<CacheConfig> = [4, 8, 16, 32].iter().map(|&b| CacheConfig::new(b, 16).unwrap()).collect();
    let mut worst_ratio = 0.0f64;
    let mut lines = Vec::new();
    for n in [1usize << 14, 1 << 17, 1 << 20] {
        let input = synth::random_pairs(n, 40 + n as u64);
        let cfg = SortConfig {
            caches: caches.clone(),
            ..SortConfig::default()
        };
        let ours = sort(&input, &cfg).map_err(|e| e.to_string())?;
        let base = terasort_baseline(&input, &cfg).map_err(|e| e.to_string())?;
        verify_sort(&input, &ours.pairs)?;
        verify_sort(&input, &base.pairs)?;
        let geom = SortGeometry::new(ours.metrics.n_logical as u32).map_err(|e| e.to_string())?;
        let mut reductions = Vec::new();
        for c in &caches {
            let b = c.block_edge() as u64;
            let bound = 2.0 * (geom.width as u64 * geom.height as u64 / (b * b)) as f64 * 1.25;
            let per_pass = compare_pass_misses(&ours.metrics, *c);
            check!(per_pass.len() == ours.metrics.passes, "n={n} b={b}: {} pass stats", per_pass.len());
            let max = *per_pass.iter().max().unwrap_or(&0) as f64;
            check!(max <= bound, "(a) n={n} b={b}: pass misses {max} > {bound}");
            worst_ratio = worst_ratio.max(max / bound);
            let o = ours.metrics.cache(*c).unwrap().misses;
            let t = base.metrics.cache(*c).unwrap().misses;
            check!(o < t, "(b) n={n} b={b}: {o} >= baseline {t}");
            let red = 1.0 - o as f64 / t as f64;
            if b >= 8 && n >= 1 << 17 {
                check!(red >= 0.30, "(c) n={n} b={b}: reduction {:.1}% < 30%", 100.0 * red);
            }
            reductions.push(format!("b{b} {:.0}%", 100.0 * red));
        }
        lines.push(format!("2^{}: {}", log2(n), reductions.join(" ")));
    }
    Ok(format!("max pass misses at {:.0}% of bound; reductions {}", 100.0 * worst_ratio, lines.join(", ")))
}

/// Order-preserving 32-bit code of a non-negative depth.
fn depth_bits(d: f32) -> u64 {
    d.to_bits() as u64
}

fn key_grouping(samples: &[(u32, f32)], bounds: DepthBounds) -> Result<(u64, u64), String> {
    let keys: Vec<f32> = samples
        .iter()
        .map(|&(t, d)| normalize_key(t, d, bounds))
        .collect::<Result<_, _>>()
        .map_err(|e| e.to_string())?;
    for (&(t, _), &k) in samples.iter().zip(&keys) {
        let back = extract_tile(k).map_err(|e| e.to_string())?;
        check!(back == t, "tile {t} came back as {back}");
    }
    let mut ours: Vec<usize> = (0..samples.len()).collect();
    ours.sort_by(|&a, &b| keys[a].total_cmp(&keys[b]));
    let mut exact: Vec<usize> = (0..samples.len()).collect();
    exact.sort_by_key(|&i| ((samples[i].0 as u64) << 32) | depth_bits(samples[i].1));
    for (k, (&a, &b)) in ours.iter().zip(&exact).enumerate() {
        check!(samples[a].0 == samples[b].0, "tile grouping differs at {k}");
    }
    let (mut inversions, mut adjacent_ties) = (0, 0);
    for w in ours.windows(2) {
        let (a, b) = (w[0], w[1]);
        if samples[a].0 != samples[b].0 {
            continue;
        }
        if keys[a] == keys[b] {
            adjacent_ties += (samples[a].1 != samples[b].1) as u64;
        } else if samples[a].1 > samples[b].1 {
            inversions += 1;
        }
    }
    Ok((inversions, adjacent_ties))
}

fn collision_rate(rng: &mut ChaCha8Rng, tiles: u32, bounds: DepthBounds, trials: usize) -> Result<f64, String> {
    let mut ties = 0;
    for _ in 0..trials {
        let t = rng.gen_range(0..tiles);
        let d1 = rng.gen_range(bounds.lo..bounds.hi);
        let d2 = rng.gen_range(bounds.lo..bounds.hi);
        let k1 = normalize_key(t, d1, bounds).map_err(|e| e.to_string())?;
        let k2 = normalize_key(t, d2, bounds).map_err(|e| e.to_string())?;
        ties += (k1 == k2 && d1 != d2) as usize;
    }
    Ok(ties as f64 / trials as f64)
}

fn c5_keys() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(0xC5);
    let bounds = DepthBounds::from_depths([0.1f32, 100.0]);
    let full: Vec<(u32, f32)> = (0..1_000_000)
        .map(|_| (rng.gen_range(0..MAX_TILES), rng.gen_range(0.1f32..100.0)))
        .collect();
    let (inv_full, _) = key_grouping(&full, bounds)?;
    check!(inv_full == 0, "{inv_full} within-tile inversions over all tiles");
    // Dense tiles, so within-tile order is actually exercised.
    let dense_tiles = 1u32 << 13;
    let dense: Vec<(u32, f32)> = (0..1_000_000)
        .map(|_| (rng.gen_range(0..dense_tiles), rng.gen_range(0.1f32..100.0)))
        .collect();
    let (inv_dense, adj_ties) = key_grouping(&dense, bounds)?;
    check!(inv_dense == 0, "{inv_dense} within-tile inversions in dense tiles");
    let rate = collision_rate(&mut rng, dense_tiles, bounds, 1_000_000)?;
    let rate_all = collision_rate(&mut rng, MAX_TILES, bounds, 1_000_000)?;
    check!(rate < 0.01, "tie rate {:.3}% >= 1% for tiles < 2^13", 100.0 * rate);
    Ok(format!(
        "2x10^6 samples round-trip, 0 inversions; pairwise tie rate {:.3}% (tiles < 2^13), {:.2}% over all 2^20 tiles (informational); {adj_ties} adjacent ties in dense tiles",
        100.0 * rate,
        100.0 * rate_all
    ))
}

fn brute_ranges(sorted: &[KvPair]) -> Vec<TileRange> {
    let mut out: Vec<TileRange> = Vec::new();
    for (i, p) in sorted.iter().enumerate() {
        let tile = (p.key / 1024.0).floor() as u32;
        match out.last_mut() {
            Some(r) if r.tile == tile => r.end = i as u32 + 1,
            _ => out.push(TileRange {
                tile,
                start: i as u32,
                end: i as u32 + 1,
            }),
        }
    }
    out
}

fn c6_pipeline() -> Outcome {
    let t0 = Instant::now();
    let cam = synth::default_camera(256, 256);
    let eye = cam.position().map_err(|e| e.to_string())?;
    let (tiles_x, _) = cam.tiles();
    let mut worst = 0.0f32;
    for (s, n) in [10usize, 100, 1000, 4000, 10_000].into_iter().enumerate() {
        let scene = synth::random_scene(n, 600 + s as u64);
        let frame = render_frame(&scene, &cam, &PipelineConfig::default()).map_err(|e| format!("n={n}: {e}"))?;
        let reference = render_reference(&scene, &cam, [0.0; 3]).map_err(|e| e.to_string())?;
        let diff = frame.image.max_abs_diff(&reference);
        check!(diff <= 1e-5, "n={n}: image differs by {diff}");
        worst = worst.max(diff);
        check!(
            frame.sorted.windows(2).all(|w| w[0].key < w[1].key),
            "n={n}: quantized keys are not distinct"
        );

        // Projection, scan and duplication against brute force.
        let touched: Vec<u32> = scene
            .iter()
            .map(|g| project_gaussian(g, &cam, &eye).map_or(0, |p| p.tiles_touched))
            .collect();
        let got: Vec<u32> = frame.projected.iter().map(|p| p.tiles_touched).collect();
        check!(got == touched, "n={n}: tiles_touched differ");
        let mut acc = 0u32;
        for (i, &t) in touched.iter().enumerate() {
            check!(frame.offsets[i] == acc, "n={n}: offset {i} is {} not {acc}", frame.offsets[i]);
            acc += t;
        }
        check!(frame.keys.len() == acc as usize, "n={n}: {} pairs, want {acc}", frame.keys.len());
        let mut per_gaussian = vec![0u32; n];
        for &v in &frame.values {
            per_gaussian[v as usize] += 1;
        }
        check!(per_gaussian == touched, "n={n}: duplication counts differ");
        for (i, p) in frame.projected.iter().enumerate() {
            let mut k = frame.offsets[i] as usize;
            for ty in p.tile_min.1..p.tile_max.1 {
                for tx in p.tile_min.0..p.tile_max.0 {
                    let tile = extract_tile(frame.keys[k]).map_err(|e| e.to_string())?;
                    check!(
                        frame.values[k] == i as u32 && tile == ty * tiles_x + tx,
                        "n={n}: pair {k} is ({tile}, {}), want ({}, {i})",
                        frame.values[k],
                        ty * tiles_x + tx
                    );
                    k += 1;
                }
            }
        }
        // Sorted order against a comparison sort of the duplicated pairs.
        let mut oracle: Vec<(f32, u32)> = frame.keys.iter().copied().zip(frame.values.iter().copied()).collect();
        oracle.sort_by(|a, b| a.0.total_cmp(&b.0));
        let sorted: Vec<(f32, u32)> = frame.sorted.iter().map(|p| (p.key, p.value)).collect();
        check!(sorted == oracle, "n={n}: sorted pairs differ from comparison sort");
        check!(frame.ranges == brute_ranges(&frame.sorted), "n={n}: tile ranges differ");
    }
    let elapsed = t0.elapsed();
    check!(elapsed < Duration::from_secs(300), "took {:.1} s", elapsed.as_secs_f64());
    Ok(format!(
        "5 scenes (10..10000 Gaussians, 256x256), max diff {worst:e}, scan/duplication/ranges exact, {:.1} s",
        elapsed.as_secs_f64()
    ))
}

fn c7_ablation() -> Outcome {
    let n = 1500;
    let scene = synth::random_scene(n, 77);
    let cam = synth::default_camera(256, 256);
    let variants = ablate(&scene, &cam, &PipelineConfig::default(), Some(1e-5)).map_err(|e| format!("{e:#}"))?;
    let reads = |i: usize, stage: &str| variants[i].1.stage(stage).unwrap().texel_reads;
    let render: Vec<u64> = (0..4).map(|i| reads(i, "render")).collect();
    check!(
        render[1..].iter().all(|&r| render[0] < r),
        "full variant render reads {} not strictly lowest of {render:?}",
        render[0]
    );
    let ratio = reads(2, "preprocess") as f64 / reads(1, "preprocess") as f64;
    check!(ratio >= 2.0, "disabling packing raised preprocess reads only {ratio:.2}x");
    let sorting: Vec<u64> = (0..4).map(|i| reads(i, "sorting")).collect();
    Ok(format!(
        "4 images bit-identical; render reads {render:?}; preprocess reads x{ratio:.2} without packing; sorting reads {}",
        if sorting.iter().all(|&s| s == sorting[0]) { "identical" } else { "differ" }
    ))
}

fn c8_cost_model() -> Outcome {
    let hidden = CacheConfig::new(16, 16).unwrap();
    let model = costfit::fit(300, 0xC8, hidden).map_err(|e| e.to_string())?;
    check!(model.r_squared >= 0.99, "R^2 {}", model.r_squared);
    let k = BLOCK_SIZES.iter().position(|&b| b == 16).unwrap();
    let mut top = model.ranked()[..2].to_vec();
    top.sort();
    check!(
        top == [k, k + BLOCK_SIZES.len()],
        "largest weights on {:?}",
        top.iter().map(|&i| model.feature_names()[i].clone()).collect::<Vec<_>>()
    );
    Ok(format!(
        "R^2 {:.6}; top weights cross_h_16 {:.2}, cross_v_16 {:.2}",
        model.r_squared,
        model.weights[k],
        model.weights[k + BLOCK_SIZES.len()]
    ))
}

/// Load, render and compare with the reference; returns the difference.
fn smoke(scene_path: &Path, camera: Option<PathBuf>) -> Result<(usize, usize, f32), String> {
    let scene = io::load_scene(scene_path).map_err(|e| e.to_string())?;
    let cam = match camera {
        Some(p) => io::load_camera(&p).map_err(|e| e.to_string())?,
        None => synth::default_camera(256, 256),
    };
    let frame = render_frame(&scene.gaussians, &cam, &PipelineConfig::default()).map_err(|e| e.to_string())?;
    let reference = render_reference(&scene.gaussians, &cam, [0.0; 3]).map_err(|e| e.to_string())?;
    Ok((scene.gaussians.len(), scene.rejected.len(), frame.image.max_abs_diff(&reference)))
}

enum Verdict {
    Pass(String),
    Fail(String),
    Skip(String),
}

fn c9_real_scene() -> Verdict {
    if let Some(path) = std::env::var_os("TEXSPLAT_SCENE").map(PathBuf::from) {
        let camera = std::env::var_os("TEXSPLAT_CAMERA").map(PathBuf::from);
        return match smoke(&path, camera) {
            Ok((n, rej, diff)) if diff <= 1e-4 => Verdict::Pass(format!("{n} Gaussians ({rej} rejected), diff {diff:e}")),
            Ok((n, _, diff)) => Verdict::Fail(format!("{n} Gaussians, diff {diff:e} > 1e-4")),
            Err(e) => Verdict::Fail(e),
        };
    }
    // No trained file here: exercise the same path on a generated PLY.
    let dir = match tempfile::tempdir() {
        Ok(d) => d,
        Err(e) => return Verdict::Fail(e.to_string()),
    };
    let path = dir.path().join("standin.ply");
    let mut rng = ChaCha8Rng::seed_from_u64(0xC9);
    let points: Vec<PlyPoint> = (0..400)
        .map(|_| {
            let z = rng.gen_range(2.0f32..10.0);
            let mut p = PlyPoint {
                position: [rng.gen_range(-0.35..0.35) * z, rng.gen_range(-0.35..0.35) * z, z],
                opacity_logit: rng.gen_range(-3.0..4.0),
                log_scale: std::array::from_fn(|_| rng.gen_range(-4.0..-1.5)),
                rotation: std::array::from_fn(|_| rng.gen_range(-1.0..1.0)),
                ..PlyPoint::default()
            };
            p.f_dc = std::array::from_fn(|_| rng.gen_range(-1.5..1.5));
            p.f_rest.iter_mut().for_each(|v| *v = rng.gen_range(-0.2..0.2));
            p
        })
        .collect();
    if let Err(e) = io::write_ply(&path, &points) {
        return Verdict::Fail(e.to_string());
    }
    match smoke(&path, None) {
        Ok((n, _, diff)) if diff <= 1e-4 => Verdict::Skip(format!(
            "no trained point cloud (set TEXSPLAT_SCENE); generated {n}-point PLY stand-in renders within {diff:e} of the reference"
        )),
        Ok((_, _, diff)) => Verdict::Fail(format!("generated PLY stand-in differs by {diff:e}")),
        Err(e) => Verdict::Fail(e),
    }
}

fn run(f: fn() -> Outcome) -> Verdict {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(s)) => Verdict::Pass(s),
        Ok(Err(s)) => Verdict::Fail(s),
        Err(p) => Verdict::Fail(
            p.downcast_ref::<String>()
                .cloned()
                .or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_else(|| "panicked".into()),
        ),
    }
}

fn main() -> ExitCode {
    let criteria: [Criterion; 9] = [
        (1, "sort correctness", || run(c1_sort_correctness)),
        (2, "pass and access formulas", || run(c2_formulas)),
        (3, "partner adjacency", || run(c3_adjacency)),
        (4, "cache dominance", || run(c4_cache)),
        (5, "key normalization", || run(c5_keys)),
        (6, "pipeline oracle equivalence", || run(c6_pipeline)),
        (7, "ablation consistency", || run(c7_ablation)),
        (8, "cost-model recovery", || run(c8_cost_model)),
        (9, "real-scene smoke test", c9_real_scene),
    ];
    let selected: Vec<u32> = std::env::args().skip(1).filter_map(|a| a.parse().ok()).collect();
    let mut failed = 0;
    for (id, name, f) in criteria {
        if !selected.is_empty() && !selected.contains(&id) {
            continue;
        }
        let t0 = Instant::now();
        let verdict = f();
        let secs = t0.elapsed().as_secs_f64();
        let (tag, detail) = match verdict {
            Verdict::Pass(d) => ("PASS", d),
            Verdict::Fail(d) => {
                failed += 1;
                ("FAIL", d)
            }
            Verdict::Skip(d) => ("SKIP", d),
        };
        println!("{tag} criterion {id} ({name}): {detail} [{secs:.1} s]");
    }
    if failed > 0 {
        ExitCode::FAILURE
    } else {
        ExitCode::SUCCESS
    }
}
