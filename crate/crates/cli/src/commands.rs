use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context};
use clap::Args;
use gifreplay_core::keyframe::{analyze, KeyframeReport};
use gifreplay_core::mapping::map_masks;
use gifreplay_core::media::{load_rgb, rgb_to_luminance, save_png};
use gifreplay_core::{
    evalkit, load_recording, load_utg, pipeline, synthgen, Error, IndexSequence, ScreenGallery,
    SynthConfig, TransitionKind,
};
use log::info;
use serde::Serialize;

use crate::config::{Common, MappingFlags, RunConfig, SegmentationFlags, TraceFlags};

pub const EXIT_OK: u8 = 0;
pub const EXIT_INPUT: u8 = 2;
pub const EXIT_NO_KEYFRAMES: u8 = 3;
pub const EXIT_UNREACHABLE: u8 = 4;
pub const EXIT_EXPLOSION: u8 = 5;
pub const EXIT_EMPTY_DATASET: u8 = 6;

/// Exit status for an error, looking through context layers for a core error.
pub fn exit_code(err: &anyhow::Error) -> u8 {
    match err.chain().find_map(|e| e.downcast_ref::<Error>()) {
        Some(Error::NoInput) => EXIT_NO_KEYFRAMES,
        Some(Error::Unreachable(_)) => EXIT_UNREACHABLE,
        Some(Error::PathExplosion { .. }) => EXIT_EXPLOSION,
        _ => EXIT_INPUT,
    }
}

#[derive(Debug, Args)]
pub struct KeyframesArgs {
    /// GIF, still image, or directory of frames.
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    /// Also write each keyframe as `<index>.png` here.
    #[arg(long)]
    pub dump_frames: Option<PathBuf>,
    #[command(flatten)]
    pub segmentation: SegmentationFlags,
}

#[derive(Debug, Args)]
pub struct MapArgs {
    /// Keyframe JSON written by `keyframes`.
    #[arg(long)]
    pub keyframes: PathBuf,
    /// Directory holding `<index>.png` for every listed keyframe.
    #[arg(long)]
    pub frames_dir: PathBuf,
    #[arg(long)]
    pub utg: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    #[command(flatten)]
    pub mapping: MappingFlags,
}

#[derive(Debug, Args)]
pub struct TraceArgs {
    /// Mapping JSON written by `map`.
    #[arg(long)]
    pub mapping: PathBuf,
    #[arg(long)]
    pub utg: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    #[command(flatten)]
    pub trace: TraceFlags,
}

#[derive(Debug, Args)]
pub struct RunArgs {
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long)]
    pub utg: PathBuf,
    /// Output directory for keyframes.json, mapping.json, trace.json, timings.json.
    #[arg(long)]
    pub out: PathBuf,
    #[command(flatten)]
    pub segmentation: SegmentationFlags,
    #[command(flatten)]
    pub mapping: MappingFlags,
    #[command(flatten)]
    pub trace: TraceFlags,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    /// Directory whose subdirectories are dataset cases.
    #[arg(long)]
    pub dataset: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    /// Rescale every recording by this factor before evaluation.
    #[arg(long)]
    pub resize: Option<f64>,
    #[command(flatten)]
    pub segmentation: SegmentationFlags,
    #[command(flatten)]
    pub mapping: MappingFlags,
    #[command(flatten)]
    pub trace: TraceFlags,
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, default_value_t = 1)]
    pub cases: usize,
    /// Case `i` uses seed `seed + i`.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub n_nodes: Option<usize>,
    #[arg(long)]
    pub edge_density: Option<f64>,
    #[arg(long)]
    pub width: Option<u32>,
    #[arg(long)]
    pub height: Option<u32>,
    #[arg(long)]
    pub steady_frames: Option<usize>,
    #[arg(long)]
    pub transition_frames: Option<usize>,
    #[arg(long)]
    pub transition_kind: Option<TransitionKind>,
    #[arg(long)]
    pub path_len: Option<usize>,
    /// Same background for every node.
    #[arg(long)]
    pub hard: bool,
    #[arg(long)]
    pub delay_ms: Option<u32>,
}

impl SynthArgs {
    fn config(&self) -> SynthConfig {
        let d = SynthConfig::default();
        SynthConfig {
            seed: self.seed,
            n_nodes: self.n_nodes.unwrap_or(d.n_nodes),
            edge_density: self.edge_density.unwrap_or(d.edge_density),
            resolution: (
                self.width.unwrap_or(d.resolution.0),
                self.height.unwrap_or(d.resolution.1),
            ),
            steady_frames: self.steady_frames.unwrap_or(d.steady_frames),
            transition_frames: self.transition_frames.unwrap_or(d.transition_frames),
            transition_kind: self.transition_kind.unwrap_or(d.transition_kind),
            path_len: self.path_len.unwrap_or(d.path_len),
            hard: self.hard,
            delay_ms: self.delay_ms.unwrap_or(d.delay_ms),
        }
    }
}

/// Resolves the config, validates it and sizes the global worker pool.
fn setup(common: &Common, apply: impl FnOnce(&mut RunConfig)) -> anyhow::Result<RunConfig> {
    let mut cfg = common.resolve()?;
    apply(&mut cfg);
    cfg.validate()?;
    let mut pool = rayon::ThreadPoolBuilder::new();
    if let Some(n) = cfg.threads {
        pool = pool.num_threads(n);
    }
    // Only fails when a pool already exists, which cannot happen in one run.
    let _ = pool.build_global();
    Ok(cfg)
}

fn write_json(path: &Path, value: &impl Serialize) -> anyhow::Result<()> {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(parent).with_context(|| format!("creating {}", parent.display()))?;
    }
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    fs::write(path, text).with_context(|| format!("writing {}", path.display()))
}

fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> anyhow::Result<T> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))
}

pub fn keyframes(common: &Common, args: &KeyframesArgs) -> anyhow::Result<u8> {
    let cfg = setup(common, |c| args.segmentation.apply(&mut c.pipeline))?;
    let rec = load_recording(&args.input, None)?;
    let analysis = analyze(&rec, &cfg.pipeline.ssim, &cfg.pipeline.segmentation)?;
    let kfs = &analysis.keyframes;
    write_json(&args.out, &kfs.report())?;
    if let Some(dir) = &args.dump_frames {
        fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
        for k in &kfs.keyframes {
            save_png(&dir.join(format!("{:06}.png", k.index)), &k.frame.raster)?;
        }
    }
    for w in &kfs.warnings {
        log::warn!("{w}");
    }
    info!("{} keyframes in {} frames", kfs.len(), rec.len());
    if kfs.is_empty() {
        eprintln!("no steady segment found in {}", args.input.display());
        return Ok(EXIT_NO_KEYFRAMES);
    }
    Ok(EXIT_OK)
}

pub fn map(common: &Common, args: &MapArgs) -> anyhow::Result<u8> {
    let cfg = setup(common, |c| args.mapping.apply(&mut c.pipeline))?;
    let report: KeyframeReport = read_json(&args.keyframes)?;
    let utg = load_utg(&args.utg)?;
    let queries = report
        .keyframes
        .iter()
        .map(|k| {
            let path = args.frames_dir.join(format!("{:06}.png", k.index));
            Ok((k.index, rgb_to_luminance(&load_rgb(&path)?)))
        })
        .collect::<anyhow::Result<Vec<_>>>()?;
    let gallery = ScreenGallery::from_utg(&utg, &cfg.pipeline.features)?;
    let mapping = map_masks(&queries, &gallery, &cfg.pipeline.mapping_config())?;
    write_json(&args.out, &mapping)?;
    Ok(EXIT_OK)
}

pub fn trace(common: &Common, args: &TraceArgs) -> anyhow::Result<u8> {
    let cfg = setup(common, |c| args.trace.apply(&mut c.pipeline))?;
    let mapping: IndexSequence = read_json(&args.mapping)?;
    let utg = load_utg(&args.utg)?;
    let trace = gifreplay_core::generate_trace(&mapping.indices, &utg, cfg.pipeline.limits)?;
    write_json(&args.out, &trace.report())?;
    Ok(EXIT_OK)
}

pub fn run(common: &Common, args: &RunArgs) -> anyhow::Result<u8> {
    let cfg = setup(common, |c| {
        args.segmentation.apply(&mut c.pipeline);
        args.mapping.apply(&mut c.pipeline);
        args.trace.apply(&mut c.pipeline);
    })?;
    let rec = load_recording(&args.input, None)?;
    let utg = load_utg(&args.utg)?;
    let out = pipeline::run(&rec, &utg, &cfg.pipeline)?;
    let dir = &args.out;
    write_json(&dir.join("keyframes.json"), &out.analysis.keyframes.report())?;
    write_json(&dir.join("mapping.json"), &out.mapping)?;
    write_json(&dir.join("timings.json"), &out.timings)?;
    let trace = out.trace?;
    write_json(&dir.join("trace.json"), &trace.report())?;
    info!(
        "{} keyframes, trace of {} nodes in {:.2}s",
        out.analysis.keyframes.len(),
        trace.path.nodes.len(),
        out.timings.total_sec
    );
    Ok(EXIT_OK)
}

pub fn eval(common: &Common, args: &EvalArgs) -> anyhow::Result<u8> {
    let cfg = setup(common, |c| {
        args.segmentation.apply(&mut c.pipeline);
        args.mapping.apply(&mut c.pipeline);
        args.trace.apply(&mut c.pipeline);
    })?;
    if let Some(f) = args.resize {
        if !(f.is_finite() && f > 0.0) {
            bail!("--resize must be a positive factor, got {f}");
        }
    }
    let report = evalkit::run_benchmark(&args.dataset, &cfg.pipeline, args.resize)?;
    write_json(&args.out, &report)?;
    print!("{}", report.table());
    if report.cases.is_empty() {
        eprintln!("no cases loaded from {}", args.dataset.display());
        return Ok(EXIT_EMPTY_DATASET);
    }
    Ok(EXIT_OK)
}

pub fn synth(_common: &Common, args: &SynthArgs) -> anyhow::Result<u8> {
    let base = args.config();
    base.validate()?;
    for i in 0..args.cases {
        let cfg = SynthConfig {
            seed: base.seed + i as u64,
            ..base.clone()
        };
        let dir = args.out.join(format!("case_{i:03}"));
        let case = synthgen::generate_case(&cfg, &dir)?;
        info!("{}: {} frames, walk {:?}", dir.display(), case.frames.len(), case.walk);
    }
    Ok(EXIT_OK)
}
