//! Windowed SSIM over luma masks.
//!
//! Window statistics are accumulated in exact integer arithmetic, so the
//! result does not depend on evaluation order and is bit-identical across
//! thread counts.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::media::LuminanceMask;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SsimParams {
    pub window: u32,
    pub stride: u32,
    pub k1: f64,
    pub k2: f64,
    pub dynamic_range: f64,
}

impl Default for SsimParams {
    fn default() -> Self {
        Self {
            window: 8,
            stride: 4,
            k1: 0.01,
            k2: 0.03,
            dynamic_range: 255.0,
        }
    }
}

impl SsimParams {
    pub fn c1(&self) -> f64 {
        (self.k1 * self.dynamic_range).powi(2)
    }

    pub fn c2(&self) -> f64 {
        (self.k2 * self.dynamic_range).powi(2)
    }

    pub fn validate(&self) -> Result<()> {
        if self.window == 0 || self.stride == 0 {
            return Err(Error::InvalidConfig(
                "ssim window and stride must be >= 1".into(),
            ));
        }
        if !(self.c1() > 0.0 && self.c2() > 0.0) {
            return Err(Error::InvalidConfig(
                "ssim stabilizers c1, c2 must be positive".into(),
            ));
        }
        Ok(())
    }
}

/// A similarity in `[0, 1]`.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Serialize, Deserialize)]
#[serde(transparent)]
pub struct SimilarityScore(f64);

impl SimilarityScore {
    pub const ZERO: Self = Self(0.0);
    pub const ONE: Self = Self(1.0);

    /// Clamps into `[0, 1]`; NaN maps to 0.
    pub fn new(value: f64) -> Self {
        if value.is_nan() {
            Self(0.0)
        } else {
            Self(value.clamp(0.0, 1.0))
        }
    }

    pub fn value(self) -> f64 {
        self.0
    }
}

impl From<SimilarityScore> for f64 {
    fn from(s: SimilarityScore) -> f64 {
        s.0
    }
}

/// Raw sums over one window.
#[derive(Debug, Default, Clone, Copy)]
struct WindowSums {
    n: u64,
    x: u64,
    y: u64,
    xx: u64,
    yy: u64,
    xy: u64,
}

impl WindowSums {
    /// Local SSIM in the multiplicative form
    /// `(2 mx my + c1)(2 sxy + c2) / ((mx^2 + my^2 + c1)(vx + vy + c2))`,
    /// with population (1/n) moments. Every product is written so that
    /// swapping x and y yields the same floating point operations.
    fn local_ssim(&self, c1: f64, c2: f64) -> f64 {
        let n = self.n as f64;
        let mx = self.x as f64 / n;
        let my = self.y as f64 / n;
        let vx = self.xx as f64 / n - mx * mx;
        let vy = self.yy as f64 / n - my * my;
        let cov = self.xy as f64 / n - mx * my;
        let num = (mx * my * 2.0 + c1) * (cov * 2.0 + c2);
        let den = (mx * mx + my * my + c1) * (vx + vy + c2);
        num / den
    }
}

/// Mean local SSIM over all window positions, clamped to `[0, 1]`.
///
/// When either side of the image is smaller than the window, a single window
/// covering the whole image is used.
pub fn ssim(a: &LuminanceMask, b: &LuminanceMask, params: &SsimParams) -> Result<SimilarityScore> {
    if a.dimensions() != b.dimensions() {
        return Err(Error::DimensionMismatch {
            left: a.dimensions(),
            right: b.dimensions(),
        });
    }
    params.validate()?;
    Ok(SimilarityScore::new(mean_local_ssim(a, b, params)))
}

/// Unclamped mean of the local SSIM map. Callers must pass equally sized masks.
pub(crate) fn mean_local_ssim(a: &LuminanceMask, b: &LuminanceMask, params: &SsimParams) -> f64 {
    let (w, h) = a.dimensions();
    let (c1, c2) = (params.c1(), params.c2());
    if w < params.window || h < params.window {
        return global_sums(a, b).local_ssim(c1, c2);
    }

    let win = params.window as usize;
    let stride = params.stride as usize;
    let (w, h) = (w as usize, h as usize);
    let xs: Vec<usize> = (0..=w - win).step_by(stride).collect();

    // Per-column sums over the current horizontal band, then a prefix over
    // columns so that each window is an O(1) difference.
    let mut col = vec![WindowSums::default(); w + 1];
    let mut total = 0.0f64;
    let mut count = 0usize;
    for y0 in (0..=h - win).step_by(stride) {
        col.iter_mut().for_each(|c| *c = WindowSums::default());
        for y in y0..y0 + win {
            let ra = a.row(y as u32);
            let rb = b.row(y as u32);
            for (c, (&pa, &pb)) in col[1..].iter_mut().zip(ra.iter().zip(rb)) {
                let (pa, pb) = (u64::from(pa), u64::from(pb));
                c.x += pa;
                c.y += pb;
                c.xx += pa * pa;
                c.yy += pb * pb;
                c.xy += pa * pb;
            }
        }
        for i in 1..=w {
            let prev = col[i - 1];
            let cur = &mut col[i];
            cur.x += prev.x;
            cur.y += prev.y;
            cur.xx += prev.xx;
            cur.yy += prev.yy;
            cur.xy += prev.xy;
        }
        for &x0 in &xs {
            let (lo, hi) = (col[x0], col[x0 + win]);
            let sums = WindowSums {
                n: (win * win) as u64,
                x: hi.x - lo.x,
                y: hi.y - lo.y,
                xx: hi.xx - lo.xx,
                yy: hi.yy - lo.yy,
                xy: hi.xy - lo.xy,
            };
            total += sums.local_ssim(c1, c2);
            count += 1;
        }
    }
    total / count as f64
}

fn global_sums(a: &LuminanceMask, b: &LuminanceMask) -> WindowSums {
    let mut s = WindowSums {
        n: a.pixels().len() as u64,
        ..Default::default()
    };
    for (&pa, &pb) in a.pixels().iter().zip(b.pixels()) {
        let (pa, pb) = (u64::from(pa), u64::from(pb));
        s.x += pa;
        s.y += pb;
        s.xx += pa * pa;
        s.yy += pb * pb;
        s.xy += pa * pb;
    }
    s
}
