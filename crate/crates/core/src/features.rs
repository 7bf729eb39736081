//! Local binary features: FAST segment-test corners over an image pyramid,
//! intensity-comparison descriptors on a smoothed patch, and cross-checked
//! brute-force Hamming matching.
//!
//! There is no orientation assignment. Screen recordings are upright, so the
//! sampling pattern is used unrotated.

use std::collections::HashSet;
use std::sync::Arc;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::media::LuminanceMask;
use crate::simcore::SimilarityScore;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FeatureParams {
    pub fast_threshold: u8,
    /// Contiguous pixels of the 16-pixel circle that must all be brighter or
    /// all darker than the centre.
    pub circle_arc_min: usize,
    pub max_keypoints: usize,
    pub n_bits: usize,
    pub patch_size: u32,
    pub pyramid_levels: usize,
    pub pyramid_scale: f64,
    pub sampler_seed: u64,
}

impl Default for FeatureParams {
    fn default() -> Self {
        Self {
            fast_threshold: 20,
            circle_arc_min: 9,
            max_keypoints: 500,
            n_bits: 256,
            patch_size: 31,
            pyramid_levels: 4,
            pyramid_scale: 1.2,
            sampler_seed: 0x6b65_7966_7261_6d65,
        }
    }
}

impl FeatureParams {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidConfig(m.to_string()));
        if self.fast_threshold == 0 {
            return bad("fast_threshold must be positive");
        }
        if !(1..=16).contains(&self.circle_arc_min) {
            return bad("circle_arc_min must lie in 1..=16");
        }
        if self.max_keypoints == 0 || self.n_bits == 0 || self.pyramid_levels == 0 {
            return bad("max_keypoints, n_bits and pyramid_levels must be positive");
        }
        if self.patch_size < 3 {
            return bad("patch_size must be at least 3");
        }
        if !(self.pyramid_scale > 1.0) {
            return bad("pyramid_scale must exceed 1");
        }
        Ok(())
    }

    pub fn patch_radius(&self) -> u32 {
        self.patch_size / 2
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct InterestPoint {
    /// Column at `octave`.
    pub x: u32,
    /// Row at `octave`.
    pub y: u32,
    pub octave: u8,
    pub response: u32,
}

impl InterestPoint {
    /// Position in full-resolution coordinates.
    pub fn base_position(&self, pyramid_scale: f64) -> (f64, f64) {
        let s = pyramid_scale.powi(i32::from(self.octave));
        (f64::from(self.x) * s, f64::from(self.y) * s)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct BinaryDescriptor {
    words: Vec<u64>,
    n_bits: usize,
}

impl BinaryDescriptor {
    pub fn zeros(n_bits: usize) -> Self {
        Self {
            words: vec![0; n_bits.div_ceil(64)],
            n_bits,
        }
    }

    pub fn from_bits(bits: &[bool]) -> Self {
        let mut d = Self::zeros(bits.len());
        for (i, &b) in bits.iter().enumerate() {
            d.set(i, b);
        }
        d
    }

    pub fn n_bits(&self) -> usize {
        self.n_bits
    }

    pub fn bit(&self, i: usize) -> bool {
        self.words[i / 64] >> (i % 64) & 1 == 1
    }

    pub fn set(&mut self, i: usize, value: bool) {
        assert!(i < self.n_bits, "bit {i} out of range");
        let mask = 1u64 << (i % 64);
        if value {
            self.words[i / 64] |= mask;
        } else {
            self.words[i / 64] &= !mask;
        }
    }

    pub fn hamming(&self, other: &Self) -> u32 {
        assert_eq!(self.n_bits, other.n_bits, "descriptor lengths differ");
        self.words
            .iter()
            .zip(&other.words)
            .map(|(a, b)| (a ^ b).count_ones())
            .sum()
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct FeatureSet {
    pub points: Vec<InterestPoint>,
    pub descriptors: Vec<BinaryDescriptor>,
}

impl FeatureSet {
    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }
}

/// Offset pair `(dx1, dy1, dx2, dy2)` of one descriptor test.
pub type SamplePair = [i8; 4];

/// Test-pair layout drawn from an isotropic Gaussian of sigma `patch/5`,
/// clipped to the patch. Identical for identical `(seed, n_bits, patch)`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SamplingTable {
    pairs: Arc<[SamplePair]>,
}

impl SamplingTable {
    pub fn new(params: &FeatureParams) -> Self {
        let r = params.patch_radius() as f64;
        let normal = Normal::new(0.0, f64::from(params.patch_size) / 5.0)
            .expect("positive sigma");
        let mut rng = ChaCha8Rng::seed_from_u64(params.sampler_seed);
        let mut draw = || normal.sample(&mut rng).round().clamp(-r, r) as i8;
        let pairs = (0..params.n_bits)
            .map(|_| {
                loop {
                    let p = [draw(), draw(), draw(), draw()];
                    if p[..2] != p[2..] {
                        break p;
                    }
                }
            })
            .collect();
        Self { pairs }
    }

    pub fn pairs(&self) -> &[SamplePair] {
        &self.pairs
    }

    /// Hex SHA-256 over the table, for recording alongside outputs.
    pub fn digest(&self) -> String {
        let mut h = Sha256::new();
        for p in self.pairs.iter() {
            h.update(p.map(|v| v as u8));
        }
        h.finalize().iter().map(|b| format!("{b:02x}")).collect()
    }
}

/// Bresenham circle of radius 3, clockwise from 12 o'clock.
const CIRCLE: [(i32, i32); 16] = [
    (0, -3),
    (1, -3),
    (2, -2),
    (3, -1),
    (3, 0),
    (3, 1),
    (2, 2),
    (1, 3),
    (0, 3),
    (-1, 3),
    (-2, 2),
    (-3, 1),
    (-3, 0),
    (-3, -1),
    (-2, -2),
    (-1, -3),
];

pub fn detect_and_describe(img: &LuminanceMask, params: &FeatureParams) -> FeatureSet {
    let table = SamplingTable::new(params);
    detect_and_describe_with(img, params, &table)
}

/// Same as [`detect_and_describe`] with a prebuilt sampling table.
pub fn detect_and_describe_with(
    img: &LuminanceMask,
    params: &FeatureParams,
    table: &SamplingTable,
) -> FeatureSet {
    let radius = params.patch_radius();
    // Patch plus the two-pixel smoothing support must fit.
    let margin = radius.max(3) + 2;
    let min_side = 2 * margin + 1;
    if img.width() < params.patch_size.max(min_side) || img.height() < params.patch_size.max(min_side)
    {
        return FeatureSet::default();
    }

    let mut candidates: Vec<InterestPoint> = Vec::new();
    let mut levels: Vec<LuminanceMask> = Vec::new();
    for octave in 0..params.pyramid_levels {
        let level = if octave == 0 {
            img.clone()
        } else {
            let s = params.pyramid_scale.powi(octave as i32);
            let w = (f64::from(img.width()) / s).round() as u32;
            let h = (f64::from(img.height()) / s).round() as u32;
            if w < min_side || h < min_side {
                break;
            }
            img.resized(w, h)
        };
        candidates.extend(fast_corners(&level, params, margin, octave as u8));
        levels.push(level);
    }

    candidates.sort_by(|a, b| {
        b.response
            .cmp(&a.response)
            .then(a.octave.cmp(&b.octave))
            .then(a.y.cmp(&b.y))
            .then(a.x.cmp(&b.x))
    });

    // A descriptor that occurs twice in one image cannot be matched
    // unambiguously; only its strongest occurrence is kept.
    let smoothed: Vec<LuminanceMask> = levels.iter().map(binomial_blur).collect();
    let mut seen = HashSet::new();
    let mut out = FeatureSet::default();
    for p in candidates {
        if out.len() == params.max_keypoints {
            break;
        }
        let d = describe(&smoothed[p.octave as usize], &p, table);
        if seen.insert(d.clone()) {
            out.points.push(p);
            out.descriptors.push(d);
        }
    }
    out
}

fn describe(img: &LuminanceMask, p: &InterestPoint, table: &SamplingTable) -> BinaryDescriptor {
    let mut d = BinaryDescriptor::zeros(table.pairs().len());
    let at = |dx: i8, dy: i8| {
        img.get(
            (p.x as i32 + i32::from(dx)) as u32,
            (p.y as i32 + i32::from(dy)) as u32,
        )
    };
    for (bit, pair) in table.pairs().iter().enumerate() {
        if at(pair[0], pair[1]) < at(pair[2], pair[3]) {
            d.set(bit, true);
        }
    }
    d
}

/// Segment-test corners with 3x3 non-maximum suppression. Only pixels at
/// least `margin` away from every border are considered.
fn fast_corners(img: &LuminanceMask, params: &FeatureParams, margin: u32, octave: u8) -> Vec<InterestPoint> {
    let (w, h) = (img.width() as usize, img.height() as usize);
    let m = margin as usize;
    let t = i32::from(params.fast_threshold);
    let arc = params.circle_arc_min;
    let px = img.pixels();
    let offsets: Vec<isize> = CIRCLE
        .iter()
        .map(|&(dx, dy)| dy as isize * w as isize + dx as isize)
        .collect();
    // Any arc of >= 9 pixels covers at least two compass points.
    let compass_min = match arc {
        13..=16 => 3,
        9..=12 => 2,
        5..=8 => 1,
        _ => 0,
    };

    let mut score = vec![0u32; w * h];
    for y in m..h - m {
        for x in m..w - m {
            let idx = y * w + x;
            let c = i32::from(px[idx]);
            let ring = |k: usize| i32::from(px[(idx as isize + offsets[k]) as usize]);

            if compass_min > 0 {
                let (mut hi, mut lo) = (0, 0);
                for k in [0, 4, 8, 12] {
                    let v = ring(k);
                    hi += usize::from(v > c + t);
                    lo += usize::from(v < c - t);
                }
                if hi < compass_min && lo < compass_min {
                    continue;
                }
            }

            let (mut bright, mut dark) = (0u32, 0u32);
            let (mut bright_sum, mut dark_sum) = (0u32, 0u32);
            for k in 0..16 {
                let v = ring(k);
                if v > c + t {
                    bright |= 1 << k;
                    bright_sum += (v - c - t) as u32;
                } else if v < c - t {
                    dark |= 1 << k;
                    dark_sum += (c - t - v) as u32;
                }
            }
            let mut s = 0;
            if longest_circular_run(bright) >= arc {
                s = s.max(bright_sum);
            }
            if longest_circular_run(dark) >= arc {
                s = s.max(dark_sum);
            }
            score[idx] = s;
        }
    }

    let mut out = Vec::new();
    for y in m..h - m {
        for x in m..w - m {
            let idx = y * w + x;
            let s = score[idx];
            if s == 0 {
                continue;
            }
            // Ties resolve to the first pixel in scan order.
            let mut keep = true;
            'nb: for dy in -1isize..=1 {
                for dx in -1isize..=1 {
                    if dx == 0 && dy == 0 {
                        continue;
                    }
                    let n = score[(idx as isize + dy * w as isize + dx) as usize];
                    let earlier = dy < 0 || (dy == 0 && dx < 0);
                    if n > s || (earlier && n == s) {
                        keep = false;
                        break 'nb;
                    }
                }
            }
            if keep {
                out.push(InterestPoint {
                    x: x as u32,
                    y: y as u32,
                    octave,
                    response: s,
                });
            }
        }
    }
    out
}

fn longest_circular_run(mask: u32) -> usize {
    if mask == 0xffff {
        return 16;
    }
    let doubled = mask | (mask << 16);
    let mut best = 0;
    let mut run = 0;
    for k in 0..32 {
        if doubled >> k & 1 == 1 {
            run += 1;
            best = best.max(run);
        } else {
            run = 0;
        }
    }
    best.min(16)
}

/// Separable [1 4 6 4 1] / 16 smoothing with clamped borders, in integers.
fn binomial_blur(img: &LuminanceMask) -> LuminanceMask {
    let (w, h) = (img.width() as usize, img.height() as usize);
    let px = img.pixels();
    let tap = |a: u32, b: u32, c: u32, d: u32, e: u32| a + 4 * b + 6 * c + 4 * d + e;
    let clamp = |v: isize, n: usize| v.clamp(0, n as isize - 1) as usize;

    let mut tmp = vec![0u32; w * h];
    for y in 0..h {
        let row = &px[y * w..(y + 1) * w];
        let out = &mut tmp[y * w..(y + 1) * w];
        let at = |x: isize| u32::from(row[clamp(x, w)]);
        for x in 0..w {
            let xi = x as isize;
            out[x] = if x >= 2 && x + 2 < w {
                tap(
                    row[x - 2].into(),
                    row[x - 1].into(),
                    row[x].into(),
                    row[x + 1].into(),
                    row[x + 2].into(),
                )
            } else {
                tap(at(xi - 2), at(xi - 1), at(xi), at(xi + 1), at(xi + 2))
            };
        }
    }
    let mut out = vec![0u8; w * h];
    for y in 0..h {
        let r = |dy: isize| &tmp[clamp(y as isize + dy, h) * w..][..w];
        let (r0, r1, r2, r3, r4) = (r(-2), r(-1), r(0), r(1), r(2));
        for x in 0..w {
            let v = tap(r0[x], r1[x], r2[x], r3[x], r4[x]);
            out[y * w + x] = ((v + 128) >> 8) as u8;
        }
    }
    LuminanceMask::new(w as u32, h as u32, out)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct FeatureMatch {
    pub index_a: usize,
    pub index_b: usize,
    pub distance: u32,
}

/// Mutual nearest neighbours by Hamming distance, kept when the distance is
/// at most `max_hamming`. Ties go to the lower index on either side.
pub fn match_features(a: &FeatureSet, b: &FeatureSet, max_hamming: u32) -> Vec<FeatureMatch> {
    match_descriptors(&a.descriptors, &b.descriptors, max_hamming)
}

pub fn match_descriptors(
    a: &[BinaryDescriptor],
    b: &[BinaryDescriptor],
    max_hamming: u32,
) -> Vec<FeatureMatch> {
    if a.is_empty() || b.is_empty() {
        return Vec::new();
    }
    let mut best_for_a = vec![(u32::MAX, 0usize); a.len()];
    let mut best_for_b = vec![(u32::MAX, 0usize); b.len()];
    for (i, da) in a.iter().enumerate() {
        for (j, db) in b.iter().enumerate() {
            let d = da.hamming(db);
            if d < best_for_a[i].0 {
                best_for_a[i] = (d, j);
            }
            if d < best_for_b[j].0 {
                best_for_b[j] = (d, i);
            }
        }
    }
    best_for_a
        .iter()
        .enumerate()
        .filter_map(|(i, &(d, j))| {
            (d <= max_hamming && best_for_b[j].1 == i).then_some(FeatureMatch {
                index_a: i,
                index_b: j,
                distance: d,
            })
        })
        .collect()
}

/// Fraction of the smaller feature set that found a mutual match.
pub fn orb_similarity(a: &FeatureSet, b: &FeatureSet, max_hamming: u32) -> SimilarityScore {
    if a.is_empty() || b.is_empty() {
        return SimilarityScore::ZERO;
    }
    let matches = match_features(a, b, max_hamming).len();
    SimilarityScore::new(matches as f64 / a.len().min(b.len()).max(1) as f64)
}
