//! Recording ingestion and luma conversion.
//!
//! A recording is either an animated GIF or a directory of still frames
//! (`*.png`, `*.jpg`) sorted by file name, optionally accompanied by a
//! `timing.json` of the form `{"delays_ms": [...]}`.

use std::fs;
use std::io::BufReader;
use std::path::{Path, PathBuf};

use image::codecs::gif::GifDecoder;
use fast_image_resize::{self as fir, PixelType};
use image::{AnimationDecoder, GrayImage, ImageReader, RgbImage};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Delay assumed for frames whose timing is unknown.
pub const DEFAULT_DELAY_MS: u32 = 100;

#[derive(Debug, Clone, PartialEq)]
pub struct Frame {
    pub index: usize,
    pub raster: RgbImage,
    pub delay_ms: u32,
}

impl Frame {
    pub fn width(&self) -> u32 {
        self.raster.width()
    }

    pub fn height(&self) -> u32 {
        self.raster.height()
    }

    pub fn luminance(&self) -> LuminanceMask {
        to_luminance(self)
    }
}

/// An ordered, size-unified sequence of frames.
#[derive(Debug, Clone)]
pub struct Recording {
    frames: Vec<Frame>,
    source_path: String,
    fps_nominal: f64,
}

impl Recording {
    /// Builds a recording from decoded rasters. Frames that differ from the
    /// target size (`resize_to`, else the first frame's size) are resampled
    /// bilinearly. `delays_ms` shorter than `rasters` is padded with
    /// [`DEFAULT_DELAY_MS`].
    pub fn from_rasters(
        rasters: Vec<RgbImage>,
        delays_ms: &[u32],
        source_path: impl Into<String>,
        resize_to: Option<(u32, u32)>,
    ) -> Result<Self> {
        let source_path = source_path.into();
        let Some(first) = rasters.first() else {
            return Err(Error::EmptyInput(PathBuf::from(&source_path)));
        };
        let (tw, th) = resize_to.unwrap_or(first.dimensions());
        if tw == 0 || th == 0 {
            return Err(Error::InvalidConfig(format!(
                "frame size must be positive, got {tw}x{th}"
            )));
        }

        let frames: Vec<Frame> = rasters
            .into_iter()
            .enumerate()
            .map(|(index, raster)| {
                let raster = if raster.dimensions() == (tw, th) {
                    raster
                } else {
                    resize_rgb(&raster, tw, th)
                };
                Frame {
                    index,
                    raster,
                    delay_ms: delays_ms.get(index).copied().unwrap_or(DEFAULT_DELAY_MS),
                }
            })
            .collect();

        let fps_nominal = nominal_fps(&frames);
        Ok(Self {
            frames,
            source_path,
            fps_nominal,
        })
    }

    pub fn frames(&self) -> &[Frame] {
        &self.frames
    }

    pub fn len(&self) -> usize {
        self.frames.len()
    }

    pub fn is_empty(&self) -> bool {
        self.frames.is_empty()
    }

    pub fn source_path(&self) -> &str {
        &self.source_path
    }

    pub fn fps_nominal(&self) -> f64 {
        self.fps_nominal
    }

    pub fn dimensions(&self) -> (u32, u32) {
        self.frames[0].raster.dimensions()
    }

    /// Presentation time of `index`, i.e. the sum of all earlier delays.
    pub fn time_ms(&self, index: usize) -> u64 {
        self.frames[..index.min(self.frames.len())]
            .iter()
            .map(|f| u64::from(f.delay_ms))
            .sum()
    }

    /// A copy of this recording with every frame resampled to `width`x`height`.
    pub fn resampled(&self, width: u32, height: u32) -> Result<Self> {
        let rasters = self.frames.iter().map(|f| f.raster.clone()).collect();
        let delays: Vec<u32> = self.frames.iter().map(|f| f.delay_ms).collect();
        Self::from_rasters(
            rasters,
            &delays,
            self.source_path.clone(),
            Some((width, height)),
        )
    }
}

fn nominal_fps(frames: &[Frame]) -> f64 {
    let mut delays: Vec<u32> = frames.iter().map(|f| f.delay_ms).collect();
    delays.sort_unstable();
    let mid = delays.len() / 2;
    let median = if delays.len() % 2 == 1 {
        f64::from(delays[mid])
    } else {
        (f64::from(delays[mid - 1]) + f64::from(delays[mid])) / 2.0
    };
    if median > 0.0 {
        1000.0 / median
    } else {
        0.0
    }
}

#[derive(Debug, Serialize, Deserialize)]
struct TimingFile {
    delays_ms: Vec<u32>,
}

/// Decodes a GIF, a single still image, or a directory of frames.
pub fn load_recording(path: &Path, resize_to: Option<(u32, u32)>) -> Result<Recording> {
    let meta = fs::metadata(path).map_err(|e| Error::io(path, e))?;
    let source = path.display().to_string();
    if meta.is_dir() {
        let (rasters, delays) = load_frame_dir(path)?;
        Recording::from_rasters(rasters, &delays, source, resize_to)
    } else if has_extension(path, &["gif"]) {
        let (rasters, delays) = load_gif(path)?;
        Recording::from_rasters(rasters, &delays, source, resize_to)
    } else {
        let raster = load_rgb(path)?;
        Recording::from_rasters(vec![raster], &[], source, resize_to)
    }
}

fn has_extension(path: &Path, exts: &[&str]) -> bool {
    path.extension()
        .and_then(|e| e.to_str())
        .map(|e| exts.iter().any(|x| e.eq_ignore_ascii_case(x)))
        .unwrap_or(false)
}

/// Reads any still image supported by the `image` crate as 8-bit RGB.
pub fn load_rgb(path: &Path) -> Result<RgbImage> {
    let img = ImageReader::open(path)
        .map_err(|e| Error::io(path, e))?
        .with_guessed_format()
        .map_err(|e| Error::io(path, e))?
        .decode()
        .map_err(|e| Error::decode(path, e))?;
    Ok(img.to_rgb8())
}

fn load_gif(path: &Path) -> Result<(Vec<RgbImage>, Vec<u32>)> {
    let file = fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let decoder = GifDecoder::new(BufReader::new(file)).map_err(|e| Error::decode(path, e))?;
    // `into_frames` composites each sub-image onto the running canvas and
    // applies the disposal method, so every yielded buffer is a full screen.
    let frames = decoder
        .into_frames()
        .collect_frames()
        .map_err(|e| Error::decode(path, e))?;
    if frames.is_empty() {
        return Err(Error::EmptyInput(path.to_path_buf()));
    }
    let mut rasters = Vec::with_capacity(frames.len());
    let mut delays = Vec::with_capacity(frames.len());
    for frame in frames {
        let (num, den) = frame.delay().numer_denom_ms();
        delays.push(if den == 0 { 0 } else { num / den });
        let rgba = frame.into_buffer();
        let rgb = RgbImage::from_fn(rgba.width(), rgba.height(), |x, y| {
            let p = rgba.get_pixel(x, y).0;
            image::Rgb([p[0], p[1], p[2]])
        });
        rasters.push(rgb);
    }
    Ok((rasters, delays))
}

fn load_frame_dir(dir: &Path) -> Result<(Vec<RgbImage>, Vec<u32>)> {
    let mut files: Vec<PathBuf> = fs::read_dir(dir)
        .map_err(|e| Error::io(dir, e))?
        .filter_map(|entry| entry.ok().map(|e| e.path()))
        .filter(|p| p.is_file() && has_extension(p, &["png", "jpg", "jpeg"]))
        .collect();
    if files.is_empty() {
        return Err(Error::EmptyInput(dir.to_path_buf()));
    }
    files.sort();

    let timing_path = dir.join("timing.json");
    let delays = if timing_path.is_file() {
        let text = fs::read_to_string(&timing_path).map_err(|e| Error::io(&timing_path, e))?;
        let timing: TimingFile = serde_json::from_str(&text).map_err(|source| Error::Json {
            path: timing_path.clone(),
            source,
        })?;
        timing.delays_ms
    } else {
        Vec::new()
    };

    let rasters = files
        .iter()
        .map(|p| load_rgb(p))
        .collect::<Result<Vec<_>>>()?;
    Ok((rasters, delays))
}

/// Writes `frames` as `000000.png, 000001.png, ...` plus `timing.json`.
pub fn write_frame_dir(dir: &Path, frames: &[RgbImage], delays_ms: &[u32]) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    for (i, raster) in frames.iter().enumerate() {
        let path = dir.join(format!("{i:06}.png"));
        save_png(&path, raster)?;
    }
    let timing = TimingFile {
        delays_ms: delays_ms.to_vec(),
    };
    let path = dir.join("timing.json");
    let text = serde_json::to_string(&timing).expect("timing serializes");
    fs::write(&path, text).map_err(|e| Error::io(&path, e))
}

pub fn save_png(path: &Path, raster: &RgbImage) -> Result<()> {
    use image::codecs::png::{CompressionType, FilterType as PngFilter, PngEncoder};
    use image::ImageEncoder;

    let file = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    let encoder = PngEncoder::new_with_quality(
        std::io::BufWriter::new(file),
        CompressionType::Fast,
        PngFilter::Adaptive,
    );
    encoder
        .write_image(
            raster.as_raw(),
            raster.width(),
            raster.height(),
            image::ExtendedColorType::Rgb8,
        )
        .map_err(|e| Error::decode(path, e))
}

/// Single-channel 8-bit luma image.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LuminanceMask {
    width: u32,
    height: u32,
    pixels: Vec<u8>,
}

impl LuminanceMask {
    pub fn new(width: u32, height: u32, pixels: Vec<u8>) -> Self {
        assert_eq!(
            pixels.len(),
            width as usize * height as usize,
            "pixel buffer does not match {width}x{height}"
        );
        Self {
            width,
            height,
            pixels,
        }
    }

    pub fn filled(width: u32, height: u32, value: u8) -> Self {
        Self::new(width, height, vec![value; width as usize * height as usize])
    }

    pub fn from_fn(width: u32, height: u32, mut f: impl FnMut(u32, u32) -> u8) -> Self {
        let mut pixels = Vec::with_capacity(width as usize * height as usize);
        for y in 0..height {
            for x in 0..width {
                pixels.push(f(x, y));
            }
        }
        Self::new(width, height, pixels)
    }

    pub fn width(&self) -> u32 {
        self.width
    }

    pub fn height(&self) -> u32 {
        self.height
    }

    pub fn dimensions(&self) -> (u32, u32) {
        (self.width, self.height)
    }

    pub fn pixels(&self) -> &[u8] {
        &self.pixels
    }

    #[inline]
    pub fn get(&self, x: u32, y: u32) -> u8 {
        self.pixels[y as usize * self.width as usize + x as usize]
    }

    pub fn row(&self, y: u32) -> &[u8] {
        let w = self.width as usize;
        &self.pixels[y as usize * w..(y as usize + 1) * w]
    }

    /// Bilinear resample; returns a clone when the size already matches.
    pub fn resized(&self, width: u32, height: u32) -> Self {
        if (width, height) == self.dimensions() {
            return self.clone();
        }
        let pixels = resample(&self.pixels, self.width, self.height, PixelType::U8, width, height);
        Self::new(width, height, pixels)
    }

    pub fn to_gray_image(&self) -> GrayImage {
        GrayImage::from_raw(self.width, self.height, self.pixels.clone())
            .expect("buffer length checked at construction")
    }
}

impl From<GrayImage> for LuminanceMask {
    fn from(img: GrayImage) -> Self {
        let (w, h) = img.dimensions();
        Self::new(w, h, img.into_raw())
    }
}

/// Bilinear (triangle-filter) resampling of a packed 8-bit buffer.
fn resample(src: &[u8], w: u32, h: u32, kind: PixelType, nw: u32, nh: u32) -> Vec<u8> {
    let src = fir::images::ImageRef::new(w, h, src, kind).expect("buffer matches its dimensions");
    let mut dst = fir::images::Image::new(nw, nh, kind);
    let opts = fir::ResizeOptions::new().resize_alg(fir::ResizeAlg::Convolution(fir::FilterType::Bilinear));
    fir::Resizer::new()
        .resize(&src, &mut dst, &opts)
        .expect("pixel types agree");
    dst.into_vec()
}

pub fn resize_rgb(raster: &RgbImage, width: u32, height: u32) -> RgbImage {
    let (w, h) = raster.dimensions();
    let pixels = resample(raster.as_raw(), w, h, PixelType::U8x3, width, height);
    RgbImage::from_raw(width, height, pixels).expect("buffer sized for the target")
}

/// BT.601 full-range luma of an RGB pixel, rounded half up.
#[inline]
pub fn luma(r: u8, g: u8, b: u8) -> u8 {
    // Fixed-point evaluation of round(0.299 R + 0.587 G + 0.114 B).
    let y = (299 * u32::from(r) + 587 * u32::from(g) + 114 * u32::from(b) + 500) / 1000;
    y.min(255) as u8
}

pub fn rgb_to_luminance(raster: &RgbImage) -> LuminanceMask {
    let pixels = raster
        .as_raw()
        .chunks_exact(3)
        .map(|p| luma(p[0], p[1], p[2]))
        .collect();
    LuminanceMask::new(raster.width(), raster.height(), pixels)
}

pub fn to_luminance(frame: &Frame) -> LuminanceMask {
    rgb_to_luminance(&frame.raster)
}
