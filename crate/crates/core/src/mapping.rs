//! GUI mapping: rank every UTG screenshot against each keyframe by a convex
//! blend of SSIM and local-feature similarity.

use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::features::{detect_and_describe_with, orb_similarity, FeatureParams, FeatureSet, SamplingTable};
use crate::keyframe::KeyframeSequence;
use crate::media::{load_rgb, rgb_to_luminance, LuminanceMask};
use crate::simcore::{ssim, SsimParams};
use crate::utg::Utg;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct MappingConfig {
    /// Weight of the feature score; `1 - w` goes to SSIM.
    pub w: f64,
    pub top_k: usize,
    /// Keyframes whose best score falls below this are dropped.
    pub min_score: Option<f64>,
    pub max_hamming: u32,
    /// Filled from the top-level sections of a pipeline config.
    #[serde(skip)]
    pub ssim: SsimParams,
    #[serde(skip)]
    pub features: FeatureParams,
}

impl Default for MappingConfig {
    fn default() -> Self {
        Self {
            w: 0.5,
            top_k: 3,
            min_score: None,
            max_hamming: 64,
            ssim: SsimParams::default(),
            features: FeatureParams::default(),
        }
    }
}

impl MappingConfig {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.w) {
            return Err(Error::InvalidConfig(format!("w must lie in [0, 1], got {}", self.w)));
        }
        if self.top_k == 0 {
            return Err(Error::InvalidConfig("top_k must be >= 1".into()));
        }
        self.ssim.validate()?;
        self.features.validate()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CombinedScore {
    pub s_comb: f64,
    pub s_ssim: f64,
    pub s_orb: f64,
}

impl CombinedScore {
    pub fn blend(w: f64, s_ssim: f64, s_orb: f64) -> Self {
        let lo = s_ssim.min(s_orb);
        let hi = s_ssim.max(s_orb);
        let s_comb = (w * s_orb + (1.0 - w) * s_ssim).clamp(lo, hi);
        Self {
            s_comb,
            s_ssim,
            s_orb,
        }
    }
}

/// Similarity of `a` against reference `b`; `a` is resampled to `b`'s size
/// first.
pub fn combined_similarity(
    a: &LuminanceMask,
    b: &LuminanceMask,
    cfg: &MappingConfig,
) -> Result<CombinedScore> {
    let table = SamplingTable::new(&cfg.features);
    let a = a.resized(b.width(), b.height());
    let fa = detect_and_describe_with(&a, &cfg.features, &table);
    let fb = detect_and_describe_with(b, &cfg.features, &table);
    score_pair(&a, &fa, b, &fb, cfg)
}

fn score_pair(
    a: &LuminanceMask,
    fa: &FeatureSet,
    b: &LuminanceMask,
    fb: &FeatureSet,
    cfg: &MappingConfig,
) -> Result<CombinedScore> {
    let s_ssim = ssim(a, b, &cfg.ssim)?.value();
    let s_orb = orb_similarity(fa, fb, cfg.max_hamming).value();
    Ok(CombinedScore::blend(cfg.w, s_ssim, s_orb))
}

struct GalleryEntry {
    id: String,
    mask: LuminanceMask,
    features: FeatureSet,
}

/// UTG screenshots with their features computed once.
pub struct ScreenGallery {
    entries: Vec<GalleryEntry>,
    table: SamplingTable,
    features: FeatureParams,
}

impl ScreenGallery {
    pub fn from_masks(masks: Vec<(String, LuminanceMask)>, params: &FeatureParams) -> Self {
        let table = SamplingTable::new(params);
        let entries = masks
            .into_par_iter()
            .map(|(id, mask)| {
                let features = detect_and_describe_with(&mask, params, &table);
                GalleryEntry { id, mask, features }
            })
            .collect();
        Self {
            entries,
            table,
            features: params.clone(),
        }
    }

    /// Decodes every node's screenshot.
    pub fn from_utg(utg: &Utg, params: &FeatureParams) -> Result<Self> {
        let masks = utg
            .nodes()
            .par_iter()
            .map(|node| {
                let raster = load_rgb(&utg.screenshot_path(node))?;
                Ok((node.id.clone(), rgb_to_luminance(&raster)))
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self::from_masks(masks, params))
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn ids(&self) -> impl Iterator<Item = &str> {
        self.entries.iter().map(|e| e.id.as_str())
    }

    pub fn sampling_table(&self) -> &SamplingTable {
        &self.table
    }

    /// Scores `query` against every entry, in gallery order.
    pub fn score_all(&self, query: &LuminanceMask, cfg: &MappingConfig) -> Result<Vec<CombinedScore>> {
        // One resampled query (and its features) per distinct screenshot size.
        let mut per_size: BTreeMap<(u32, u32), (LuminanceMask, FeatureSet)> = BTreeMap::new();
        for e in &self.entries {
            per_size.entry(e.mask.dimensions()).or_insert_with(|| {
                let q = query.resized(e.mask.width(), e.mask.height());
                let f = detect_and_describe_with(&q, &self.features, &self.table);
                (q, f)
            });
        }
        self.entries
            .iter()
            .map(|e| {
                let (q, fq) = &per_size[&e.mask.dimensions()];
                score_pair(q, fq, &e.mask, &e.features, cfg)
            })
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankedNode {
    pub node: String,
    pub s_comb: f64,
    pub s_ssim: f64,
    pub s_orb: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MappingResult {
    #[serde(rename = "keyframe")]
    pub keyframe_index: usize,
    pub ranked: Vec<RankedNode>,
}

impl MappingResult {
    pub fn best(&self) -> Option<&RankedNode> {
        self.ranked.first()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SamplerInfo {
    pub seed: u64,
    pub n_bits: usize,
    pub patch_size: u32,
    pub table_sha256: String,
}

/// Mapping output; also the on-disk mapping JSON.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IndexSequence {
    pub indices: Vec<String>,
    pub results: Vec<MappingResult>,
    /// Keyframes left out of `indices` because they scored below `min_score`.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub dropped: Vec<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sampler: Option<SamplerInfo>,
}

/// Ranks by descending `s_comb`, ties by ascending id.
fn rank(ids: &[&str], scores: &[CombinedScore], top_k: usize) -> Vec<RankedNode> {
    let mut order: Vec<usize> = (0..ids.len()).collect();
    order.sort_by(|&a, &b| {
        scores[b]
            .s_comb
            .total_cmp(&scores[a].s_comb)
            .then_with(|| ids[a].cmp(ids[b]))
    });
    order
        .into_iter()
        .take(top_k)
        .map(|i| RankedNode {
            node: ids[i].to_string(),
            s_comb: scores[i].s_comb,
            s_ssim: scores[i].s_ssim,
            s_orb: scores[i].s_orb,
        })
        .collect()
}

pub fn map_keyframes(kfs: &KeyframeSequence, utg: &Utg, cfg: &MappingConfig) -> Result<IndexSequence> {
    let gallery = ScreenGallery::from_utg(utg, &cfg.features)?;
    map_with_gallery(kfs, &gallery, cfg)
}

pub fn map_with_gallery(
    kfs: &KeyframeSequence,
    gallery: &ScreenGallery,
    cfg: &MappingConfig,
) -> Result<IndexSequence> {
    let queries: Vec<(usize, LuminanceMask)> = kfs
        .keyframes
        .iter()
        .map(|k| (k.index, k.frame.luminance()))
        .collect();
    map_masks(&queries, gallery, cfg)
}

/// Maps pre-computed keyframe masks `(frame index, mask)`.
pub fn map_masks(
    queries: &[(usize, LuminanceMask)],
    gallery: &ScreenGallery,
    cfg: &MappingConfig,
) -> Result<IndexSequence> {
    cfg.validate()?;
    if gallery.is_empty() {
        return Err(Error::Validation(vec!["UTG has no nodes to map onto".into()]));
    }
    let ids: Vec<&str> = gallery.ids().collect();
    let results = queries
        .par_iter()
        .map(|(index, mask)| {
            let scores = gallery.score_all(mask, cfg)?;
            Ok(MappingResult {
                keyframe_index: *index,
                ranked: rank(&ids, &scores, cfg.top_k),
            })
        })
        .collect::<Result<Vec<_>>>()?;

    let mut indices = Vec::new();
    let mut dropped = Vec::new();
    for r in &results {
        let best = r.best().expect("gallery is non-empty");
        match cfg.min_score {
            Some(floor) if best.s_comb < floor => {
                log::warn!(
                    "keyframe {} dropped: best score {:.4} below {floor}",
                    r.keyframe_index,
                    best.s_comb
                );
                dropped.push(r.keyframe_index);
            }
            _ => indices.push(best.node.clone()),
        }
    }
    let table = gallery.sampling_table();
    Ok(IndexSequence {
        indices,
        results,
        dropped,
        sampler: Some(SamplerInfo {
            seed: cfg.features.sampler_seed,
            n_bits: cfg.features.n_bits,
            patch_size: cfg.features.patch_size,
            table_sha256: table.digest(),
        }),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pattern(seed: u32, w: u32, h: u32) -> LuminanceMask {
        LuminanceMask::from_fn(w, h, |x, y| {
            let cell = ((x / 12) * 7 + (y / 10) * 13 + seed * 31) % 5;
            (40 + cell * 45) as u8
        })
    }

    #[test]
    fn identical_images_score_one_for_any_weight() {
        let img = pattern(1, 96, 80);
        for w in [0.0, 0.3, 0.5, 1.0] {
            let cfg = MappingConfig {
                w,
                ..Default::default()
            };
            let s = combined_similarity(&img, &img, &cfg).unwrap();
            assert_eq!(s.s_comb, 1.0, "w = {w}: {s:?}");
        }
    }

    #[test]
    fn weight_endpoints_are_exact() {
        let (a, b) = (pattern(1, 96, 80), pattern(2, 96, 80));
        let at = |w| {
            combined_similarity(
                &a,
                &b,
                &MappingConfig {
                    w,
                    ..Default::default()
                },
            )
            .unwrap()
        };
        let s0 = at(0.0);
        assert_eq!(s0.s_comb, s0.s_ssim);
        let s1 = at(1.0);
        assert_eq!(s1.s_comb, s1.s_orb);
    }

    #[test]
    fn blend_is_convex() {
        for (s, o) in [(0.2, 0.9), (0.9, 0.2), (0.5, 0.5), (0.0, 1.0)] {
            for w in [0.0, 0.1, 0.5, 0.77, 1.0] {
                let c = CombinedScore::blend(w, s, o);
                assert!(c.s_comb >= s.min(o) && c.s_comb <= s.max(o));
            }
        }
    }

    #[test]
    fn sizes_may_differ() {
        let a = pattern(3, 120, 100);
        let b = pattern(3, 96, 80);
        let s = combined_similarity(&a, &b, &MappingConfig::default()).unwrap();
        assert!(s.s_ssim > 0.0);
    }

    #[test]
    fn ranking_ties_break_by_id() {
        let s = CombinedScore::blend(0.5, 0.4, 0.4);
        let ranked = rank(&["b", "a", "c"], &[s, s, s], 2);
        let ids: Vec<_> = ranked.iter().map(|r| r.node.as_str()).collect();
        assert_eq!(ids, ["a", "b"]);
    }

    #[test]
    fn self_retrieval_and_min_score() {
        let masks: Vec<(String, LuminanceMask)> =
            (0..4).map(|i| (format!("N{i}"), pattern(i, 96, 80))).collect();
        let gallery = ScreenGallery::from_masks(masks.clone(), &FeatureParams::default());
        let queries: Vec<(usize, LuminanceMask)> =
            masks.iter().enumerate().map(|(i, (_, m))| (i * 10, m.clone())).collect();
        let seq = map_masks(&queries, &gallery, &MappingConfig::default()).unwrap();
        assert_eq!(seq.indices, ["N0", "N1", "N2", "N3"]);
        assert!(seq.results.iter().all(|r| r.ranked.len() == 3));
        assert!(seq
            .results
            .iter()
            .all(|r| r.ranked.windows(2).all(|w| w[0].s_comb >= w[1].s_comb)));

        let strict = MappingConfig {
            min_score: Some(1.5),
            ..Default::default()
        };
        let seq = map_masks(&queries, &gallery, &strict).unwrap();
        assert!(seq.indices.is_empty());
        assert_eq!(seq.dropped, vec![0, 10, 20, 30]);
    }

    #[test]
    fn empty_keyframes_map_to_nothing() {
        let gallery = ScreenGallery::from_masks(
            vec![("A".into(), pattern(0, 64, 64))],
            &FeatureParams::default(),
        );
        let seq = map_masks(&[], &gallery, &MappingConfig::default()).unwrap();
        assert!(seq.indices.is_empty() && seq.results.is_empty());
    }

    #[test]
    fn invalid_weight_rejected() {
        let cfg = MappingConfig {
            w: 1.5,
            ..Default::default()
        };
        assert!(cfg.validate().is_err());
    }
}
