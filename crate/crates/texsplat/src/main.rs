use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use texsplat::bench::{self, parse_background, parse_cache};
use texsplat::io::{self, TraceWriter};
use texsplat::synth;
use texsplat_core::cache::CacheConfig;
use texsplat_core::gs::{render_reference, Camera, Gaussian3D, PipelineConfig};
use texsplat_core::texture::AccessSink;

/// Texture-cache-aware sorting and Gaussian splatting experiments.
#[derive(Parser)]
#[command(name = "texsplat", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
    #[command(flatten)]
    opts: Opts,
}

#[derive(Subcommand)]
enum Command {
    /// Our sort and the baseline on seeded random key-value arrays.
    SortBench,
    /// Render one frame and report per-stage metrics.
    Render,
    /// Run the cumulative layout / packing / fusion ablation.
    Ablate,
    /// Fit the cross-block latency model against a hidden cache.
    FitCostModel,
    /// Cache misses of both sorts per block size.
    CacheReport,
}

#[derive(Args)]
struct Opts {
    #[arg(long, global = true, default_value_t = 1)]
    seed: u64,
    /// Key-value counts; `1024` and `2^10` are both accepted.
    #[arg(long, global = true, value_delimiter = ',', value_parser = parse_size)]
    sizes: Vec<usize>,
    /// Simulated cache as `block_edge:capacity_blocks`; repeatable.
    #[arg(long = "cache", global = true, value_parser = parse_cache)]
    caches: Vec<CacheConfig>,
    /// Binary little-endian PLY point cloud; a seeded synthetic scene is
    /// used when absent.
    #[arg(long, global = true)]
    scene: Option<PathBuf>,
    /// JSON camera; a camera at the origin looking down +z when absent.
    #[arg(long, global = true)]
    camera: Option<PathBuf>,
    /// Gaussians in the synthetic scene.
    #[arg(long, global = true, default_value_t = 1000)]
    gaussians: usize,
    /// Edge of the synthetic camera's square image.
    #[arg(long, global = true, default_value_t = synth::DEFAULT_SIZE)]
    size: u32,
    /// `black`, `white` or `r,g,b`.
    #[arg(long, global = true, default_value = "black", value_parser = parse_background)]
    background: [f32; 3],
    #[arg(long, global = true)]
    no_layout: bool,
    #[arg(long, global = true)]
    no_packing: bool,
    #[arg(long, global = true)]
    no_fusion: bool,
    /// Also render with the reference renderer and report the difference.
    #[arg(long, global = true)]
    oracle: bool,
    /// Largest accepted difference from the reference renderer.
    #[arg(long, global = true, default_value_t = 1e-4)]
    tolerance: f32,
    /// Pointer-chase samples for fit-cost-model.
    #[arg(long, global = true, default_value_t = 300)]
    samples: usize,
    #[arg(long, global = true, default_value = "out")]
    out: PathBuf,
    /// Write every texel access of the render to `trace.csv`.
    #[arg(long, global = true)]
    trace: bool,
}

fn parse_size(s: &str) -> std::result::Result<usize, String> {
    let s = s.trim();
    if let Some(exp) = s.strip_prefix("2^") {
        let e: u32 = exp.parse().map_err(|_| format!("bad exponent in `{s}`"))?;
        return 1usize.checked_shl(e).filter(|_| e < 63).ok_or_else(|| format!("`{s}` is too large"));
    }
    s.parse().map_err(|_| format!("bad size `{s}`"))
}

impl Opts {
    fn caches(&self) -> Vec<CacheConfig> {
        if self.caches.is_empty() {
            [4, 8, 16, 32].map(|b| CacheConfig::new(b, 16).expect("valid default cache")).to_vec()
        } else {
            self.caches.clone()
        }
    }

    fn sizes(&self) -> Vec<usize> {
        if self.sizes.is_empty() {
            vec![1 << 10, 1 << 14, 1 << 17]
        } else {
            self.sizes.clone()
        }
    }

    fn pipeline(&self) -> PipelineConfig {
        PipelineConfig {
            layout: !self.no_layout,
            packing: !self.no_packing,
            fusion: !self.no_fusion,
            background: self.background,
            caches: self.caches(),
            ..PipelineConfig::default()
        }
    }

    fn scene(&self) -> Result<Vec<Gaussian3D>> {
        match &self.scene {
            Some(path) => {
                let scene = io::load_scene(path)?;
                println!(
                    "loaded {} Gaussians from {} ({} rejected)",
                    scene.gaussians.len(),
                    path.display(),
                    scene.rejected.len()
                );
                Ok(scene.gaussians)
            }
            None => Ok(synth::random_scene(self.gaussians, self.seed)),
        }
    }

    fn camera(&self) -> Result<Camera> {
        match &self.camera {
            Some(path) => Ok(io::load_camera(path)?),
            None => Ok(synth::default_camera(self.size, self.size)),
        }
    }

    fn out_file(&self, name: &str) -> Result<PathBuf> {
        fs::create_dir_all(&self.out).with_context(|| format!("creating {}", self.out.display()))?;
        Ok(self.out.join(name))
    }
}

fn announce(path: &Path) {
    println!("wrote {}", path.display());
}

fn sort_bench(o: &Opts) -> Result<()> {
    let caches = o.caches();
    let rows = bench::sort_bench(&o.sizes(), o.seed, &caches)?;
    for r in &rows {
        println!(
            "n={:<9} {:<8} passes={:<4} accesses={:<12} {:.1} ms",
            r.n, r.implementation, r.passes, r.element_accesses, r.wall_ms
        );
    }
    let path = o.out_file("sort_bench.csv")?;
    bench::write_sort_bench(&path, &rows, &caches)?;
    announce(&path);
    Ok(())
}

fn cache_report(o: &Opts) -> Result<()> {
    let rows = bench::cache_report(&o.sizes(), o.seed, &o.caches())?;
    for r in rows.iter().filter(|r| r.implementation == "ours") {
        println!(
            "n={:<9} b={:<2} cap={:<3} misses={:<12} reduction={:.1}%",
            r.n,
            r.cache.block_edge(),
            r.cache.capacity_blocks(),
            r.misses,
            100.0 * r.reduction.unwrap_or(0.0)
        );
    }
    let path = o.out_file("cache_report.csv")?;
    bench::write_cache_report(&path, &rows)?;
    announce(&path);
    Ok(())
}

fn render(o: &Opts) -> Result<()> {
    let scene = o.scene()?;
    let camera = o.camera()?;
    let cfg = o.pipeline();
    let mut trace = if o.trace {
        Some(TraceWriter::create(&o.out_file("trace.csv")?)?)
    } else {
        None
    };
    let frame = bench::render(&scene, &camera, &cfg, trace.as_mut().map(|t| t as &mut dyn AccessSink))?;
    if let Some(t) = trace {
        let events = t.finish()?;
        println!("traced {events} accesses");
    }
    let d = &frame.diagnostics;
    println!("{} Gaussians, {} visible, {} tile pairs", d.gaussians, d.visible, d.pairs);
    for s in &frame.stages {
        println!(
            "{:<22} passes={:<4} reads={:<10} writes={:<10} {:.3} ms",
            s.name,
            s.passes,
            s.texel_reads,
            s.texel_writes,
            s.elapsed_ns as f64 / 1e6
        );
    }
    let image = o.out_file("image.ppm")?;
    io::write_image(&frame.image, &image)?;
    announce(&image);
    let stages = o.out_file("stages.csv")?;
    bench::write_stages(&stages, &frame, &cfg.caches)?;
    announce(&stages);
    if o.oracle {
        let reference = render_reference(&scene, &camera, cfg.background)?;
        let diff = frame.image.max_abs_diff(&reference);
        println!("max per-channel difference from the reference renderer: {diff:e}");
        let path = o.out_file("reference.ppm")?;
        io::write_image(&reference, &path)?;
        announce(&path);
        if diff > o.tolerance {
            bail!("difference {diff:e} exceeds tolerance {:e}", o.tolerance);
        }
    }
    Ok(())
}

fn ablate(o: &Opts) -> Result<()> {
    let scene = o.scene()?;
    let camera = o.camera()?;
    let cfg = o.pipeline();
    let variants = bench::ablate(&scene, &camera, &cfg, Some(o.tolerance))?;
    println!("all {} variants produced bit-identical images", variants.len());
    for (name, f) in &variants {
        let total: u64 = f.stages.iter().map(|s| s.texel_reads).sum();
        let render = f.stage("render").map_or(0, |s| s.texel_reads);
        let pre = f.stage("preprocess").map_or(0, |s| s.texel_reads);
        println!("{name:<10} preprocess_reads={pre:<10} render_reads={render:<10} total_reads={total}");
    }
    let path = o.out_file("ablation.csv")?;
    bench::write_ablation(&path, &variants, &cfg.caches)?;
    announce(&path);
    Ok(())
}

fn fit_cost_model(o: &Opts) -> Result<()> {
    let hidden = match o.caches.first() {
        Some(c) => *c,
        None => CacheConfig::new(16, 16)?,
    };
    let model = bench::fit_cost_model(o.samples, o.seed, hidden)?;
    println!("{:>6} {:>14} {:>14}", "block", "horizontal", "vertical");
    for (b, (h, v)) in model.block_sizes.iter().zip(model.horizontal().iter().zip(model.vertical())) {
        println!("{b:>6} {h:>14.4} {v:>14.4}");
    }
    println!("intercept {:.4}, R^2 {:.6}", model.intercept, model.r_squared);
    let path = o.out_file("cost_model.csv")?;
    bench::write_cost_model(&path, &model)?;
    announce(&path);
    Ok(())
}

fn main() -> Result<()> {
    let cli = Cli::parse();
    match cli.command {
        Command::SortBench => sort_bench(&cli.opts),
        Command::Render => render(&cli.opts),
        Command::Ablate => ablate(&cli.opts),
        Command::FitCostModel => fit_cost_model(&cli.opts),
        Command::CacheReport => cache_report(&cli.opts),
    }
}
