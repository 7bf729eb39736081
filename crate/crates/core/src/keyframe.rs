//! Keyframe location: consecutive-frame similarity, activity segmentation,
//! and selection of one fully rendered frame per steady interval.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::media::{Frame, LuminanceMask, Recording};
use crate::simcore::{ssim, SimilarityScore, SsimParams};

/// `scores[i]` is the similarity of frame `i` and frame `i + 1`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimilaritySeries {
    pub scores: Vec<SimilarityScore>,
}

impl SimilaritySeries {
    pub fn from_values(values: &[f64]) -> Self {
        Self {
            scores: values.iter().map(|&v| SimilarityScore::new(v)).collect(),
        }
    }

    pub fn len(&self) -> usize {
        self.scores.len()
    }

    pub fn is_empty(&self) -> bool {
        self.scores.is_empty()
    }

    /// Number of frames the series was computed from.
    pub fn frame_count(&self) -> usize {
        self.scores.len() + 1
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SegmentationConfig {
    pub sim_threshold: f64,
    /// Minimum number of frames in a steady run.
    pub steady_min_frames: usize,
    /// Longest plateau (in frames) that is still treated as part of a
    /// transition, e.g. a screen whose resources are still loading.
    pub partial_render_max_frames: usize,
}

impl Default for SegmentationConfig {
    fn default() -> Self {
        Self::with_steady_frames(0.95, 5)
    }
}

impl SegmentationConfig {
    pub fn with_steady_frames(sim_threshold: f64, steady_min_frames: usize) -> Self {
        Self {
            sim_threshold,
            steady_min_frames,
            partial_render_max_frames: steady_min_frames.saturating_sub(1),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.sim_threshold > 0.0 && self.sim_threshold <= 1.0) {
            return Err(Error::InvalidConfig(format!(
                "sim_threshold must lie in (0, 1], got {}",
                self.sim_threshold
            )));
        }
        if self.steady_min_frames < 2 {
            return Err(Error::InvalidConfig(
                "steady_min_frames must be >= 2".into(),
            ));
        }
        if self.partial_render_max_frames >= self.steady_min_frames {
            return Err(Error::InvalidConfig(
                "partial_render_max_frames must be < steady_min_frames".into(),
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum SegmentKind {
    InstantaneousTransition,
    AnimationTransition,
    Steady,
}

/// Inclusive frame range.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Segment {
    pub kind: SegmentKind,
    pub start: usize,
    pub end: usize,
}

impl Segment {
    pub fn len(&self) -> usize {
        self.end - self.start + 1
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn contains(&self, frame: usize) -> bool {
        (self.start..=self.end).contains(&frame)
    }
}

#[derive(Debug, Clone)]
pub struct Keyframe {
    pub index: usize,
    pub time_ms: u64,
    pub frame: Frame,
}

#[derive(Debug, Clone, Default)]
pub struct KeyframeSequence {
    pub keyframes: Vec<Keyframe>,
    pub source: String,
    pub warnings: Vec<String>,
}

impl KeyframeSequence {
    pub fn indices(&self) -> Vec<usize> {
        self.keyframes.iter().map(|k| k.index).collect()
    }

    pub fn len(&self) -> usize {
        self.keyframes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.keyframes.is_empty()
    }

    pub fn report(&self) -> KeyframeReport {
        KeyframeReport {
            source: self.source.clone(),
            keyframes: self
                .keyframes
                .iter()
                .map(|k| KeyframeEntry {
                    index: k.index,
                    time_ms: k.time_ms,
                })
                .collect(),
        }
    }
}

/// On-disk keyframe listing.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct KeyframeReport {
    pub source: String,
    pub keyframes: Vec<KeyframeEntry>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct KeyframeEntry {
    pub index: usize,
    pub time_ms: u64,
}

/// Luma masks of every frame, in order.
pub fn luminance_masks(rec: &Recording) -> Vec<LuminanceMask> {
    rec.frames().par_iter().map(Frame::luminance).collect()
}

pub fn similarity_series(rec: &Recording, params: &SsimParams) -> Result<SimilaritySeries> {
    series_from_masks(&luminance_masks(rec), params)
}

pub fn series_from_masks(masks: &[LuminanceMask], params: &SsimParams) -> Result<SimilaritySeries> {
    if masks.len() < 2 {
        return Err(Error::InvalidConfig(
            "a similarity series needs at least two frames".into(),
        ));
    }
    let scores = masks
        .par_windows(2)
        .map(|pair| ssim(&pair[0], &pair[1], params))
        .collect::<Result<Vec<_>>>()?;
    Ok(SimilaritySeries { scores })
}

/// Splits the frame range covered by `series` into steady runs and the
/// transitions between them.
///
/// A maximal run of `k` consecutive scores at or above the threshold spans
/// `k + 1` frames; it is steady when that span reaches `steady_min_frames`.
/// Plateaus no longer than `partial_render_max_frames` are absorbed into the
/// surrounding transition. A plateau between the two limits (only possible
/// with a non-default config) forms its own instantaneous segment.
pub fn segment(series: &SimilaritySeries, cfg: &SegmentationConfig) -> Vec<Segment> {
    let scores: Vec<f64> = series.scores.iter().map(|s| s.value()).collect();
    let frames = scores.len() + 1;

    // (first frame, last frame, is_steady) for every plateau.
    let mut plateaus = Vec::new();
    let mut i = 0;
    while i < scores.len() {
        if scores[i] >= cfg.sim_threshold {
            let mut j = i;
            while j + 1 < scores.len() && scores[j + 1] >= cfg.sim_threshold {
                j += 1;
            }
            let span = j - i + 2;
            if span >= cfg.steady_min_frames {
                plateaus.push((i, j + 1, true));
            } else if span > cfg.partial_render_max_frames {
                plateaus.push((i, j + 1, false));
            }
            i = j + 1;
        } else {
            i += 1;
        }
    }

    let mut out = Vec::new();
    let mut cursor = 0;
    for (start, end, steady) in plateaus {
        // Steady runs may abut each other directly (hard cut).
        if start > cursor {
            out.push(transition(&scores, cursor, start - 1));
        }
        if steady {
            out.push(Segment {
                kind: SegmentKind::Steady,
                start,
                end,
            });
        } else {
            out.push(Segment {
                kind: SegmentKind::InstantaneousTransition,
                start,
                end,
            });
        }
        cursor = end + 1;
    }
    if cursor < frames {
        out.push(transition(&scores, cursor, frames - 1));
    }
    out
}

/// Classifies the non-steady frames `start..=end`. The comparisons touching
/// the segment are scores `start - 1 ..= end`; a rising (non-decreasing)
/// profile over at least three of them is an animation.
fn transition(scores: &[f64], start: usize, end: usize) -> Segment {
    let lo = start.saturating_sub(1);
    let hi = end.min(scores.len().saturating_sub(1));
    let span = if scores.is_empty() || lo > hi {
        &[][..]
    } else {
        &scores[lo..=hi]
    };
    let rising = span.len() >= 3 && span.windows(2).all(|w| w[1] >= w[0]);
    Segment {
        kind: if rising {
            SegmentKind::AnimationTransition
        } else {
            SegmentKind::InstantaneousTransition
        },
        start,
        end,
    }
}

/// Picks the last frame of every steady segment. Neighbouring steady segments
/// whose facing boundary frames are still similar are merged first.
pub fn locate_keyframes(
    rec: &Recording,
    segs: &[Segment],
    params: &SsimParams,
    cfg: &SegmentationConfig,
) -> Result<KeyframeSequence> {
    let mut seq = KeyframeSequence {
        source: rec.source_path().to_string(),
        ..Default::default()
    };
    if rec.len() == 1 {
        seq.keyframes.push(keyframe(rec, 0));
        return Ok(seq);
    }

    let mut merged: Vec<Segment> = Vec::new();
    for seg in segs.iter().filter(|s| s.kind == SegmentKind::Steady) {
        if let Some(prev) = merged.last_mut() {
            let a = rec.frames()[prev.end].luminance();
            let b = rec.frames()[seg.start].luminance();
            if ssim(&a, &b, params)?.value() >= cfg.sim_threshold {
                prev.end = seg.end;
                continue;
            }
        }
        merged.push(*seg);
    }

    if merged.is_empty() {
        seq.warnings
            .push("no steady interval found; recording has no keyframes".into());
    }
    if let Some(last) = segs.last() {
        if last.kind != SegmentKind::Steady {
            seq.warnings.push(format!(
                "recording ends mid-transition (frames {}..={}); trailing frames yield no keyframe",
                last.start, last.end
            ));
        }
    }
    for w in &seq.warnings {
        log::warn!("{}: {w}", rec.source_path());
    }

    seq.keyframes = merged.iter().map(|s| keyframe(rec, s.end)).collect();
    Ok(seq)
}

fn keyframe(rec: &Recording, index: usize) -> Keyframe {
    Keyframe {
        index,
        time_ms: rec.time_ms(index),
        frame: rec.frames()[index].clone(),
    }
}

/// Everything produced by keyframe location.
#[derive(Debug, Clone)]
pub struct KeyframeAnalysis {
    pub series: SimilaritySeries,
    pub segments: Vec<Segment>,
    pub keyframes: KeyframeSequence,
}

/// Series, segmentation and keyframes in one pass. Single-frame recordings
/// skip straight to their only frame.
pub fn analyze(
    rec: &Recording,
    params: &SsimParams,
    cfg: &SegmentationConfig,
) -> Result<KeyframeAnalysis> {
    cfg.validate()?;
    params.validate()?;
    if rec.len() == 1 {
        return Ok(KeyframeAnalysis {
            series: SimilaritySeries { scores: vec![] },
            segments: vec![Segment {
                kind: SegmentKind::Steady,
                start: 0,
                end: 0,
            }],
            keyframes: locate_keyframes(rec, &[], params, cfg)?,
        });
    }
    let series = similarity_series(rec, params)?;
    let segments = segment(&series, cfg);
    let keyframes = locate_keyframes(rec, &segments, params, cfg)?;
    Ok(KeyframeAnalysis {
        series,
        segments,
        keyframes,
    })
}
