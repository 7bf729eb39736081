//! Deterministic synthetic dataset cases: a random UTG, pseudo-widget
//! screenshots, a recording of a walk through the graph and the ground truth
//! for all three phases.

use std::fmt;
use std::fs;
use std::path::Path;
use std::str::FromStr;

use image::{Rgb, RgbImage};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::evalkit::{KeyframeGroundTruth, MappingGroundTruth, TraceGroundTruth};
use crate::media::{save_png, write_frame_dir, Recording};
use crate::utg::{enumerate_index_paths, PathLimits, Utg, UtgEdge, UtgManifest, UtgNode};

const MAX_ATTEMPTS: u64 = 100;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TransitionKind {
    CrossFade,
    Slide,
    CutWithPartialRender,
    /// One of the other three, drawn per transition.
    Mixed,
}

impl FromStr for TransitionKind {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "cross-fade" => Ok(Self::CrossFade),
            "slide" => Ok(Self::Slide),
            "cut-with-partial-render" => Ok(Self::CutWithPartialRender),
            "mixed" => Ok(Self::Mixed),
            other => Err(format!(
                "unknown transition kind {other:?} (cross-fade, slide, cut-with-partial-render, mixed)"
            )),
        }
    }
}

impl fmt::Display for TransitionKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::CrossFade => "cross-fade",
            Self::Slide => "slide",
            Self::CutWithPartialRender => "cut-with-partial-render",
            Self::Mixed => "mixed",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SynthConfig {
    pub seed: u64,
    pub n_nodes: usize,
    /// Probability of an extra edge between an ordered pair of nodes, on top
    /// of the spanning tree and back/home edges.
    pub edge_density: f64,
    pub resolution: (u32, u32),
    pub steady_frames: usize,
    pub transition_frames: usize,
    pub transition_kind: TransitionKind,
    pub path_len: usize,
    /// One background for every node.
    pub hard: bool,
    pub delay_ms: u32,
}

impl Default for SynthConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            n_nodes: 20,
            edge_density: 0.02,
            resolution: (960, 540),
            steady_frames: 20,
            transition_frames: 4,
            transition_kind: TransitionKind::Mixed,
            path_len: 5,
            hard: false,
            delay_ms: 100,
        }
    }
}

impl SynthConfig {
    pub fn validate(&self) -> Result<()> {
        let mut errs = Vec::new();
        if self.n_nodes < 2 {
            errs.push(format!("n_nodes must be >= 2, got {}", self.n_nodes));
        }
        if self.path_len >= self.n_nodes {
            errs.push(format!(
                "path_len {} needs at least {} nodes",
                self.path_len,
                self.path_len + 1
            ));
        }
        if self.steady_frames < 5 {
            errs.push(format!("steady_frames must be >= 5, got {}", self.steady_frames));
        }
        if !(0.0..=1.0).contains(&self.edge_density) {
            errs.push(format!("edge_density must be in [0,1], got {}", self.edge_density));
        }
        let (w, h) = self.resolution;
        if w < 64 || h < 64 {
            errs.push(format!("resolution must be at least 64x64, got {w}x{h}"));
        }
        if errs.is_empty() {
            Ok(())
        } else {
            Err(Error::InvalidConfig(errs.join("; ")))
        }
    }
}

/// A generated case held in memory.
#[derive(Debug, Clone)]
pub struct SynthCase {
    pub config: SynthConfig,
    /// Screenshot paths are relative: `shots/<id>.png`.
    pub manifest: UtgManifest,
    /// In manifest node order.
    pub screenshots: Vec<RgbImage>,
    pub frames: Vec<RgbImage>,
    pub delays_ms: Vec<u32>,
    pub walk: Vec<String>,
    pub gt_keyframes: KeyframeGroundTruth,
    pub gt_mapping: MappingGroundTruth,
    pub gt_traces: TraceGroundTruth,
    /// Sub-seed of the attempt that produced the graph.
    pub attempt: u64,
}

impl SynthCase {
    pub fn recording(&self) -> Result<Recording> {
        Recording::from_rasters(self.frames.clone(), &self.delays_ms, "synthetic", None)
    }

    /// The UTG with screenshots resolved against `base_dir`.
    pub fn utg(&self, base_dir: &Path) -> Result<Utg> {
        Utg::from_manifest(self.manifest.clone(), base_dir)
    }

    /// Writes the dataset case layout: `frames/`, `shots/`, `utg.json` and
    /// the three ground-truth files.
    pub fn write(&self, out_dir: &Path) -> Result<()> {
        let shots = out_dir.join("shots");
        fs::create_dir_all(&shots).map_err(|e| Error::io(&shots, e))?;
        for (node, img) in self.manifest.nodes.iter().zip(&self.screenshots) {
            save_png(&out_dir.join(&node.screenshot_path), img)?;
        }
        write_frame_dir(&out_dir.join("frames"), &self.frames, &self.delays_ms)?;
        write_json(&out_dir.join("utg.json"), &self.manifest)?;
        write_json(&out_dir.join("gt_keyframes.json"), &self.gt_keyframes)?;
        write_json(&out_dir.join("gt_mapping.json"), &self.gt_mapping)?;
        write_json(&out_dir.join("gt_traces.json"), &self.gt_traces)?;
        Ok(())
    }
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let text = serde_json::to_string_pretty(value).expect("plain data serializes");
    fs::write(path, text + "\n").map_err(|e| Error::io(path, e))
}

pub fn generate_case(cfg: &SynthConfig, out_dir: &Path) -> Result<SynthCase> {
    let case = generate(cfg)?;
    case.write(out_dir)?;
    Ok(case)
}

pub fn node_id(i: usize, n: usize) -> String {
    let width = (n.saturating_sub(1)).to_string().len().max(2);
    format!("N{i:0width$}")
}

/// Builds a case in memory. Graphs without a simple walk of `path_len`
/// edges, or whose launch-to-target path count exceeds the default limits,
/// are redrawn with the next sub-seed.
pub fn generate(cfg: &SynthConfig) -> Result<SynthCase> {
    cfg.validate()?;
    for attempt in 0..MAX_ATTEMPTS {
        let mut rng = ChaCha8Rng::seed_from_u64(mix(cfg.seed, attempt));
        let adjacency = random_graph(cfg, &mut rng);
        let Some(walk) = self_avoiding_walk(&adjacency, cfg.path_len, &mut rng) else {
            continue;
        };
        let manifest = manifest(cfg, &adjacency, &mut rng);
        if !within_limits(&manifest, *walk.last().expect("walk has the launch node"))? {
            continue;
        }
        return Ok(assemble(cfg, manifest, &walk, attempt));
    }
    Err(Error::InvalidConfig(format!(
        "no usable graph for seed {} after {MAX_ATTEMPTS} attempts",
        cfg.seed
    )))
}

fn mix(seed: u64, salt: u64) -> u64 {
    // splitmix64 finaliser
    let mut z = seed ^ salt.wrapping_mul(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Spanning tree rooted at node 0 with parents drawn among the few previous
/// nodes (so deep walks exist), back and home edges, plus random extras.
fn random_graph(cfg: &SynthConfig, rng: &mut ChaCha8Rng) -> Vec<Vec<usize>> {
    let n = cfg.n_nodes;
    let mut adj = vec![Vec::new(); n];
    for v in 1..n {
        let parent = rng.random_range(v.saturating_sub(3)..v);
        adj[parent].push(v);
        if rng.random_bool(0.5) {
            adj[v].push(parent);
        }
        if parent != 0 && rng.random_bool(0.3) {
            adj[v].push(0);
        }
    }
    for u in 0..n {
        for v in 1..n {
            if u != v && !adj[u].contains(&v) && rng.random_bool(cfg.edge_density) {
                adj[u].push(v);
            }
        }
    }
    adj
}

fn self_avoiding_walk(adj: &[Vec<usize>], len: usize, rng: &mut ChaCha8Rng) -> Option<Vec<usize>> {
    fn extend(adj: &[Vec<usize>], len: usize, path: &mut Vec<usize>, rng: &mut ChaCha8Rng, budget: &mut u32) -> bool {
        if path.len() == len + 1 {
            return true;
        }
        if *budget == 0 {
            return false;
        }
        *budget -= 1;
        let mut next = adj[*path.last().unwrap()].clone();
        next.shuffle(rng);
        for v in next {
            if !path.contains(&v) {
                path.push(v);
                if extend(adj, len, path, rng, budget) {
                    return true;
                }
                path.pop();
            }
        }
        false
    }
    let mut path = vec![0];
    let mut budget = 10_000;
    extend(adj, len, &mut path, rng, &mut budget).then_some(path)
}

const WIDGETS: [&str; 6] = ["button", "tab", "item", "icon", "menu", "card"];

fn manifest(cfg: &SynthConfig, adj: &[Vec<usize>], rng: &mut ChaCha8Rng) -> UtgManifest {
    let n = cfg.n_nodes;
    let ids: Vec<String> = (0..n).map(|i| node_id(i, n)).collect();
    let mut edges = Vec::new();
    for (u, succ) in adj.iter().enumerate() {
        for &v in succ {
            let widget = WIDGETS[rng.random_range(0..WIDGETS.len())];
            edges.push(UtgEdge {
                from: ids[u].clone(),
                to: ids[v].clone(),
                action: format!("tap:{widget}_{}", ids[v].to_lowercase()),
            });
        }
    }
    UtgManifest {
        launch: ids[0].clone(),
        nodes: ids
            .iter()
            .map(|id| UtgNode {
                id: id.clone(),
                screenshot_path: format!("shots/{id}.png").into(),
                label: None,
            })
            .collect(),
        edges,
    }
}

fn within_limits(manifest: &UtgManifest, target: usize) -> Result<bool> {
    let g = Utg::from_manifest(manifest.clone(), ".")?;
    match enumerate_index_paths(&g, 0, target, PathLimits::default()) {
        Ok(_) => Ok(true),
        Err(Error::PathExplosion { .. }) => Ok(false),
        Err(e) => Err(e),
    }
}

fn assemble(cfg: &SynthConfig, manifest: UtgManifest, walk: &[usize], attempt: u64) -> SynthCase {
    let (w, h) = cfg.resolution;
    let theme = Theme::new(cfg.seed);
    let specs: Vec<ScreenSpec> = (0..cfg.n_nodes)
        .map(|i| ScreenSpec::new(cfg, &theme, i))
        .collect();
    let screenshots: Vec<RgbImage> = specs.iter().map(|s| s.render(w, h, None)).collect();

    let mut rng = ChaCha8Rng::seed_from_u64(mix(cfg.seed, 0x7472_616e) ^ attempt);
    let mut frames = Vec::new();
    let mut intervals = Vec::new();
    for (step, &node) in walk.iter().enumerate() {
        if step > 0 {
            let prev = walk[step - 1];
            let kind = match cfg.transition_kind {
                TransitionKind::Mixed => [
                    TransitionKind::CrossFade,
                    TransitionKind::Slide,
                    TransitionKind::CutWithPartialRender,
                ][rng.random_range(0..3)],
                k => k,
            };
            frames.extend(transition(
                kind,
                &screenshots[prev],
                &screenshots[node],
                &specs[node],
                cfg.transition_frames,
            ));
        }
        let start = frames.len();
        frames.extend(std::iter::repeat_n(screenshots[node].clone(), cfg.steady_frames));
        intervals.push([start, frames.len() - 1]);
    }

    let ids: Vec<String> = manifest.nodes.iter().map(|n| n.id.clone()).collect();
    let walk_ids: Vec<String> = walk.iter().map(|&i| ids[i].clone()).collect();
    SynthCase {
        config: cfg.clone(),
        delays_ms: vec![cfg.delay_ms; frames.len()],
        frames,
        screenshots,
        gt_keyframes: KeyframeGroundTruth { intervals },
        gt_mapping: MappingGroundTruth {
            pairs: walk_ids.iter().cloned().enumerate().collect(),
        },
        gt_traces: TraceGroundTruth {
            traces: vec![walk_ids.clone()],
        },
        walk: walk_ids,
        manifest,
        attempt,
    }
}

fn transition(kind: TransitionKind, a: &RgbImage, b: &RgbImage, b_spec: &ScreenSpec, t: usize) -> Vec<RgbImage> {
    let (w, h) = a.dimensions();
    let step = |k: usize| k as f64 / (t + 1) as f64;
    match kind {
        // Ease-out, like platform fade animations: the first step is the largest.
        TransitionKind::CrossFade | TransitionKind::Mixed => (1..=t)
            .map(|k| blend(a, b, 1.0 - (1.0 - step(k)).powi(3)))
            .collect(),
        TransitionKind::Slide => (1..=t)
            .map(|k| {
                // Ease-out push from the right.
                let p = 1.0 - (1.0 - step(k)).powi(2);
                let o = ((1.0 - p) * w as f64).round() as u32;
                RgbImage::from_fn(w, h, |x, y| {
                    if x < o {
                        *a.get_pixel(x + w - o, y)
                    } else {
                        *b.get_pixel(x - o, y)
                    }
                })
            })
            .collect(),
        TransitionKind::CutWithPartialRender => {
            let plateau = t.min(4);
            let half = b_spec.render(w, h, Some(b_spec.widgets.len() / 2));
            let rest = t - plateau;
            let mut out = vec![half.clone(); plateau];
            out.extend((1..=rest).map(|k| blend(&half, b, k as f64 / (rest + 1) as f64)));
            out
        }
    }
}

fn blend(a: &RgbImage, b: &RgbImage, alpha: f64) -> RgbImage {
    let mut out = a.clone();
    for (o, &q) in out.iter_mut().zip(b.iter()) {
        *o = (*o as f64 * (1.0 - alpha) + q as f64 * alpha).round() as u8;
    }
    out
}

struct Theme {
    bar: Rgb<u8>,
    bar_text: Rgb<u8>,
    shared_bg: Rgb<u8>,
}

impl Theme {
    fn new(seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(mix(seed, 0x7468_656d));
        let hue = rng.random_range(0.0..360.0);
        Self {
            bar: hsl(hue, 0.6, 0.35),
            bar_text: Rgb([240, 240, 240]),
            shared_bg: hsl(hue, 0.1, 0.92),
        }
    }
}

#[derive(Debug, Clone, Copy)]
enum Fill {
    Solid,
    HStripes { period: u32, thick: u32 },
    VStripes { period: u32, thick: u32 },
    /// Lines of pseudo-text.
    TextLines { period: u32, seed: u64 },
}

#[derive(Debug, Clone)]
struct Widget {
    rect: (f64, f64, f64, f64),
    color: Rgb<u8>,
    fill: Fill,
}

#[derive(Debug, Clone)]
struct ScreenSpec {
    index: usize,
    background: Rgb<u8>,
    bar: Rgb<u8>,
    bar_text: Rgb<u8>,
    title_len: f64,
    title_seed: u64,
    /// Spacing of the full-width list separators in the body.
    separator_period: u32,
    widgets: Vec<Widget>,
}

impl ScreenSpec {
    fn new(cfg: &SynthConfig, theme: &Theme, index: usize) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(mix(cfg.seed, 0x6e6f_6465_0000 + index as u64));
        let background = if cfg.hard {
            theme.shared_bg
        } else {
            // Golden-angle hues with alternating lightness keep neighbours apart.
            let hue = (index as f64 * 137.507_764) % 360.0;
            let light = [0.82, 0.62, 0.42][index % 3];
            hsl(hue, 0.45, light)
        };

        // Body is a 4x4 grid of slots; widgets take one or two slots in a row.
        let n_widgets = rng.random_range(3..=8);
        let mut slots: Vec<usize> = (0..16).collect();
        slots.shuffle(&mut rng);
        let widgets = slots[..n_widgets]
            .iter()
            .map(|&slot| {
                let (col, row) = ((slot % 4) as f64, (slot / 4) as f64);
                let span = if col < 3.0 && rng.random_bool(0.4) { 2.0 } else { 1.0 };
                let x0 = (col + rng.random_range(0.05..0.2)) / 4.0;
                let x1 = (col + span - rng.random_range(0.05..0.2)) / 4.0;
                let y0 = 0.1 + 0.9 * (row + rng.random_range(0.05..0.2)) / 4.0;
                let rows = if row < 3.0 && rng.random_bool(0.3) { 2.0 } else { 1.0 };
                let y1 = 0.1 + 0.9 * (row + rows - rng.random_range(0.05..0.2)) / 4.0;
                let color = hsl(
                    rng.random_range(0.0..360.0),
                    rng.random_range(0.3..0.9),
                    rng.random_range(0.1..0.9),
                );
                let fill = match rng.random_range(0..10) {
                    0..=2 => Fill::Solid,
                    3..=5 => Fill::HStripes {
                        period: rng.random_range(6..18),
                        thick: rng.random_range(2..5),
                    },
                    6..=7 => Fill::VStripes {
                        period: rng.random_range(6..18),
                        thick: rng.random_range(2..5),
                    },
                    _ => Fill::TextLines {
                        period: rng.random_range(14..24),
                        seed: rng.random(),
                    },
                };
                Widget { rect: (x0, y0, x1, y1), color, fill }
            })
            .collect();

        Self {
            index,
            background,
            bar: theme.bar,
            bar_text: theme.bar_text,
            title_len: rng.random_range(0.06..0.18),
            title_seed: rng.random(),
            separator_period: rng.random_range(18..48),
            widgets,
        }
    }

    /// Renders the screen; `partial` limits how many widgets are drawn, the
    /// rest showing as flat placeholders.
    fn render(&self, w: u32, h: u32, partial: Option<usize>) -> RgbImage {
        let mut img = RgbImage::from_pixel(w, h, self.background);
        let (wf, hf) = (w as f64, h as f64);
        let bar_h = (hf * 0.1).round() as u32;
        fill_rect(&mut img, 0, 0, w, bar_h, self.bar);
        let cell = (h / 200).max(1);
        draw_text(
            &mut img,
            (bar_h / 2, bar_h.saturating_sub(7 * cell) / 2),
            bar_h / 2 + (wf * self.title_len) as u32,
            cell + 1,
            self.bar_text,
            self.title_seed,
        );
        self.draw_glyph(&mut img, bar_h);
        let line = if luma_of(self.background) > 128 { Rgb([60, 60, 60]) } else { Rgb([220, 220, 220]) };
        let mut y = bar_h + self.separator_period;
        while y < h {
            fill_rect(&mut img, 0, y, w, y + 2, line);
            y += self.separator_period;
        }

        let drawn = partial.unwrap_or(self.widgets.len());
        for (k, wd) in self.widgets.iter().enumerate() {
            let (x0, y0, x1, y1) = (
                (wd.rect.0 * wf) as u32,
                (wd.rect.1 * hf) as u32,
                (wd.rect.2 * wf) as u32,
                (wd.rect.3 * hf) as u32,
            );
            if k >= drawn {
                fill_rect(&mut img, x0, y0, x1, y1, Rgb([200, 200, 200]));
                continue;
            }
            match wd.fill {
                Fill::Solid => fill_rect(&mut img, x0, y0, x1, y1, wd.color),
                Fill::HStripes { period, thick } => {
                    for y in y0..y1 {
                        if (y - y0) % period < thick {
                            fill_rect(&mut img, x0, y, x1, y + 1, wd.color);
                        }
                    }
                }
                Fill::VStripes { period, thick } => {
                    for x in x0..x1 {
                        if (x - x0) % period < thick {
                            fill_rect(&mut img, x, y0, x + 1, y1, wd.color);
                        }
                    }
                }
                Fill::TextLines { period, seed } => {
                    let mut line = 0;
                    let mut y = y0 + 2;
                    while y + 5 * cell < y1 {
                        let len = (x1 - x0) * [9, 6, 8, 4, 7][line % 5] / 10;
                        draw_text(&mut img, (x0 + 2, y), x0 + 2 + len, cell, wd.color, seed ^ line as u64);
                        y += period * cell;
                        line += 1;
                    }
                }
            }
        }
        img
    }

    /// Node index as a 2x6 bit block at the right end of the app bar.
    fn draw_glyph(&self, img: &mut RgbImage, bar_h: u32) {
        let cell = (bar_h / 3).max(2);
        let right = img.width().saturating_sub(cell);
        for bit in 0..12 {
            let on = (self.index >> bit) & 1 == 1;
            let (col, row) = (bit % 6, bit / 6);
            let x = right.saturating_sub((6 - col as u32) * cell);
            let y = bar_h / 6 + row as u32 * cell;
            let c = if on { Rgb([250, 250, 250]) } else { Rgb([20, 20, 20]) };
            fill_rect(img, x, y, x + cell, y + cell, c);
        }
    }
}

/// Words of pseudo-glyphs, each two to four strokes at arbitrary offsets
/// inside a 3x5 `cell` box, from `at` up to `x_end`.
fn draw_text(img: &mut RgbImage, at: (u32, u32), x_end: u32, cell: u32, c: Rgb<u8>, seed: u64) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (gw, gh) = (3 * cell, 5 * cell);
    let (mut x, y) = at;
    while x + gw <= x_end {
        for _ in 0..rng.random_range(2..8) {
            if x + gw > x_end {
                break;
            }
            for _ in 0..rng.random_range(2..=4) {
                if rng.random_bool(0.5) {
                    let sx = x + rng.random_range(0..gw - cell + 1);
                    let sy = y + rng.random_range(0..gh / 2);
                    let len = rng.random_range(gh / 2..=gh - (sy - y));
                    fill_rect(img, sx, sy, sx + cell, sy + len, c);
                } else {
                    let sy = y + rng.random_range(0..gh - cell + 1);
                    let sx = x + rng.random_range(0..gw / 2);
                    let len = rng.random_range(gw / 2..=gw - (sx - x));
                    fill_rect(img, sx, sy, sx + len, sy + cell, c);
                }
            }
            x += gw + cell;
        }
        x += 3 * cell;
    }
}

fn fill_rect(img: &mut RgbImage, x0: u32, y0: u32, x1: u32, y1: u32, c: Rgb<u8>) {
    let (w, h) = img.dimensions();
    for y in y0.min(h)..y1.min(h) {
        for x in x0.min(w)..x1.min(w) {
            img.put_pixel(x, y, c);
        }
    }
}

fn luma_of(c: Rgb<u8>) -> u8 {
    crate::media::luma(c[0], c[1], c[2])
}

fn hsl(hue: f64, s: f64, l: f64) -> Rgb<u8> {
    let c = (1.0 - (2.0 * l - 1.0).abs()) * s;
    let hp = hue.rem_euclid(360.0) / 60.0;
    let x = c * (1.0 - (hp % 2.0 - 1.0).abs());
    let (r, g, b) = match hp as u32 {
        0 => (c, x, 0.0),
        1 => (x, c, 0.0),
        2 => (0.0, c, x),
        3 => (0.0, x, c),
        4 => (x, 0.0, c),
        _ => (c, 0.0, x),
    };
    let m = l - c / 2.0;
    let to = |v: f64| ((v + m) * 255.0).round().clamp(0.0, 255.0) as u8;
    Rgb([to(r), to(g), to(b)])
}
