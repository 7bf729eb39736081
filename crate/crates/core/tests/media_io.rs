use std::fs;

use gifreplay_core::keyframe::analyze;
use gifreplay_core::load_recording;
use gifreplay_core::media::write_frame_dir;
use gifreplay_core::{SegmentationConfig, SsimParams};
use image::codecs::gif::GifEncoder;
use image::{Delay, Frame, Rgb, RgbImage, Rgba, RgbaImage};

fn write_gif(path: &std::path::Path, frames: &[(RgbaImage, u32)]) {
    let mut enc = GifEncoder::new(fs::File::create(path).unwrap());
    for (img, ms) in frames {
        enc.encode_frame(Frame::from_parts(img.clone(), 0, 0, Delay::from_numer_denom_ms(*ms, 1)))
            .unwrap();
    }
}

#[test]
fn single_frame_gif() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("one.gif");
    write_gif(&path, &[(RgbaImage::from_pixel(40, 30, Rgba([10, 200, 30, 255])), 70)]);
    let rec = load_recording(&path, None).unwrap();
    assert_eq!(rec.len(), 1);
    assert_eq!(rec.dimensions(), (40, 30));
    assert_eq!(rec.frames()[0].delay_ms, 70);
    let a = analyze(&rec, &SsimParams::default(), &SegmentationConfig::default()).unwrap();
    assert_eq!(a.keyframes.indices(), [0]);
}

#[test]
fn gif_frames_keep_order_and_delays() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("anim.gif");
    let frames: Vec<(RgbaImage, u32)> = (0..4u8)
        .map(|i| (RgbaImage::from_pixel(16, 16, Rgba([i * 60, 0, 0, 255])), 50 + 10 * i as u32))
        .collect();
    write_gif(&path, &frames);
    let rec = load_recording(&path, None).unwrap();
    assert_eq!(rec.len(), 4);
    let delays: Vec<u32> = rec.frames().iter().map(|f| f.delay_ms).collect();
    assert_eq!(delays, [50, 60, 70, 80]);
    let reds: Vec<u8> = rec.frames().iter().map(|f| f.raster.get_pixel(3, 3).0[0]).collect();
    assert!(reds.windows(2).all(|w| w[0] < w[1]), "{reds:?}");
    assert_eq!(rec.time_ms(2), 110);
}

#[test]
fn frame_directory_roundtrip_with_resize() {
    let dir = tempfile::tempdir().unwrap();
    let frames: Vec<RgbImage> = (0..3u8).map(|i| RgbImage::from_pixel(20, 10, Rgb([i * 50, 90, 200]))).collect();
    write_frame_dir(dir.path(), &frames, &[100, 100, 40]).unwrap();
    let rec = load_recording(dir.path(), None).unwrap();
    assert_eq!(rec.len(), 3);
    assert_eq!(rec.frames()[1].raster, frames[1]);
    assert_eq!(rec.frames()[2].delay_ms, 40);
    let small = load_recording(dir.path(), Some((10, 5))).unwrap();
    assert_eq!(small.dimensions(), (10, 5));
}

#[test]
fn empty_and_corrupt_inputs_are_errors() {
    let dir = tempfile::tempdir().unwrap();
    assert!(load_recording(dir.path(), None).is_err());
    let bad = dir.path().join("x.gif");
    fs::write(&bad, b"not a gif").unwrap();
    assert!(load_recording(&bad, None).is_err());
}
