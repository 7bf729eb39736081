use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use gifreplay_core::synthgen::generate_case;
use gifreplay_core::{BenchmarkReport, KeyframeReport, SynthConfig, TraceReport, TransitionKind};
use image::codecs::gif::GifEncoder;
use image::{Delay, Frame, Rgb, RgbImage, RgbaImage};

fn gifreplay(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_gifreplay"))
        .env_remove("GIFREPLAY_THREADS")
        .args(args)
        .output()
        .unwrap()
}

fn code(out: &Output) -> i32 {
    out.status.code().unwrap()
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

fn small_case(dir: &Path) {
    let cfg = SynthConfig {
        seed: 1,
        n_nodes: 2,
        path_len: 1,
        steady_frames: 6,
        transition_frames: 4,
        transition_kind: TransitionKind::CrossFade,
        resolution: (240, 160),
        ..SynthConfig::default()
    };
    generate_case(&cfg, dir).unwrap();
}

const ABC_UTG: &str = r#"{
  "launch": "A",
  "nodes": [
    {"id": "A", "screenshot": "a.png"},
    {"id": "B", "screenshot": "b.png"},
    {"id": "C", "screenshot": "c.png"},
    {"id": "Z", "screenshot": "z.png"}
  ],
  "edges": [
    {"from": "A", "to": "B", "action": "tap:b"},
    {"from": "A", "to": "C", "action": "tap:c"},
    {"from": "B", "to": "C", "action": "tap:c"}
  ]
}"#;

fn trace_with(dir: &Path, indices: &str, extra: &[&str]) -> Output {
    let utg = dir.join("utg.json");
    fs::write(&utg, ABC_UTG).unwrap();
    for (i, name) in ["a", "b", "c", "z"].iter().enumerate() {
        let v = 60 * i as u8;
        RgbImage::from_pixel(16, 16, Rgb([v, v, v])).save(dir.join(format!("{name}.png"))).unwrap();
    }
    let mapping = dir.join("mapping.json");
    fs::write(&mapping, format!(r#"{{"indices": {indices}, "results": []}}"#)).unwrap();
    let out = dir.join("trace.json");
    let mut args = vec!["trace", "--mapping", p(&mapping), "--utg", p(&utg), "--out", p(&out)];
    args.extend_from_slice(extra);
    gifreplay(&args)
}

#[test]
fn corrupt_input_exits_2() {
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.gif");
    fs::write(&bad, b"GIF89a not really").unwrap();
    let out = gifreplay(&["keyframes", "--input", p(&bad), "--out", p(&dir.path().join("k.json"))]);
    assert_eq!(code(&out), 2);
    assert!(String::from_utf8_lossy(&out.stderr).contains("error"));
}

#[test]
fn missing_input_exits_2() {
    let dir = tempfile::tempdir().unwrap();
    let out = gifreplay(&["keyframes", "--input", p(&dir.path().join("nope.gif")), "--out", p(&dir.path().join("k.json"))]);
    assert_eq!(code(&out), 2);
}

#[test]
fn single_frame_gif_gives_one_keyframe() {
    let dir = tempfile::tempdir().unwrap();
    let gif = dir.path().join("one.gif");
    {
        let mut enc = GifEncoder::new(fs::File::create(&gif).unwrap());
        let img = RgbaImage::from_pixel(32, 24, image::Rgba([200, 40, 40, 255]));
        enc.encode_frame(Frame::from_parts(img, 0, 0, Delay::from_numer_denom_ms(70, 1))).unwrap();
    }
    let kf = dir.path().join("k.json");
    let frames = dir.path().join("dump");
    let out = gifreplay(&["keyframes", "--input", p(&gif), "--out", p(&kf), "--dump-frames", p(&frames)]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let report: KeyframeReport = serde_json::from_str(&fs::read_to_string(&kf).unwrap()).unwrap();
    assert_eq!(report.keyframes.len(), 1);
    assert_eq!(report.keyframes[0].index, 0);
    assert!(frames.join("000000.png").is_file());
}

#[test]
fn flickering_frames_have_no_keyframes() {
    let dir = tempfile::tempdir().unwrap();
    let frames = dir.path().join("frames");
    fs::create_dir(&frames).unwrap();
    for i in 0..8u8 {
        let v = if i % 2 == 0 { 0 } else { 255 };
        RgbImage::from_pixel(32, 32, Rgb([v, v, v]))
            .save(frames.join(format!("{i:06}.png")))
            .unwrap();
    }
    let out = gifreplay(&["keyframes", "--input", p(&frames), "--out", p(&dir.path().join("k.json"))]);
    assert_eq!(code(&out), 3);
}

#[test]
fn staged_commands_match_run() {
    let dir = tempfile::tempdir().unwrap();
    let case = dir.path().join("case");
    small_case(&case);
    let frames = case.join("frames");
    let utg = case.join("utg.json");

    let kf = dir.path().join("keyframes.json");
    let out = gifreplay(&["keyframes", "--input", p(&frames), "--out", p(&kf)]);
    assert_eq!(code(&out), 0);
    let report: KeyframeReport = serde_json::from_str(&fs::read_to_string(&kf).unwrap()).unwrap();
    assert_eq!(report.keyframes.iter().map(|k| k.index).collect::<Vec<_>>(), [5, 15]);

    let mapping = dir.path().join("mapping.json");
    let out = gifreplay(&["map", "--keyframes", p(&kf), "--frames-dir", p(&frames), "--utg", p(&utg), "--out", p(&mapping)]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let trace = dir.path().join("trace.json");
    let out = gifreplay(&["trace", "--mapping", p(&mapping), "--utg", p(&utg), "--out", p(&trace)]);
    assert_eq!(code(&out), 0);

    let run = dir.path().join("run");
    let out = gifreplay(&["run", "--input", p(&frames), "--utg", p(&utg), "--out", p(&run)]);
    assert_eq!(code(&out), 0);
    for (staged, name) in [(&kf, "keyframes.json"), (&mapping, "mapping.json"), (&trace, "trace.json")] {
        assert_eq!(fs::read(staged).unwrap(), fs::read(run.join(name)).unwrap(), "{name}");
    }
    let t: TraceReport = serde_json::from_str(&fs::read_to_string(&trace).unwrap()).unwrap();
    assert_eq!(t.trace, ["N00", "N01"]);
    let timings: serde_json::Value = serde_json::from_str(&fs::read_to_string(run.join("timings.json")).unwrap()).unwrap();
    for key in ["keyframe_location_sec", "gui_mapping_sec", "trace_generation_sec", "total_sec"] {
        assert!(timings[key].as_f64().unwrap() >= 0.0, "{key}");
    }
}

#[test]
fn trace_exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let ok = trace_with(dir.path(), r#"["C"]"#, &[]);
    assert_eq!(code(&ok), 0);
    let t: TraceReport = serde_json::from_str(&fs::read_to_string(dir.path().join("trace.json")).unwrap()).unwrap();
    assert_eq!(t.trace, ["A", "C"]);
    assert_eq!(t.actions, ["tap:c"]);

    assert_eq!(code(&trace_with(dir.path(), r#"["Z"]"#, &[])), 4);
    assert_eq!(code(&trace_with(dir.path(), r#"["C"]"#, &["--max-paths", "1"])), 5);
    assert_eq!(code(&trace_with(dir.path(), r#"["B", "C"]"#, &["--max-depth", "1"])), 5);
    assert_eq!(code(&trace_with(dir.path(), "[]", &[])), 3);
}

#[test]
fn invalid_config_exits_2() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("c.toml");
    fs::write(&cfg, "[mapping]\nw = 2.0\n").unwrap();
    let out = trace_with(dir.path(), r#"["C"]"#, &["--config", p(&cfg)]);
    assert_eq!(code(&out), 2);

    fs::write(&cfg, "[limits]\nmax_paths = 1\n").unwrap();
    assert_eq!(code(&trace_with(dir.path(), r#"["C"]"#, &["--config", p(&cfg)])), 5);
    // Flags win over the file.
    assert_eq!(code(&trace_with(dir.path(), r#"["C"]"#, &["--config", p(&cfg), "--max-paths", "5"])), 0);
}

#[test]
fn thread_env_var_is_read() {
    let dir = tempfile::tempdir().unwrap();
    trace_with(dir.path(), r#"["C"]"#, &[]);
    let out = Command::new(env!("CARGO_BIN_EXE_gifreplay"))
        .env("GIFREPLAY_THREADS", "0")
        .args(["trace", "--mapping", p(&dir.path().join("mapping.json")), "--utg", p(&dir.path().join("utg.json"))])
        .args(["--out", p(&dir.path().join("t.json"))])
        .output()
        .unwrap();
    assert_eq!(code(&out), 2);
    assert!(String::from_utf8_lossy(&out.stderr).contains("threads"));
}

#[test]
fn eval_on_empty_dataset_exits_6() {
    let dir = tempfile::tempdir().unwrap();
    let out = gifreplay(&["eval", "--dataset", p(dir.path()), "--out", p(&dir.path().join("r.json"))]);
    assert_eq!(code(&out), 6);
}

#[test]
fn synth_then_eval() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("data");
    let out = gifreplay(&[
        "synth", "--out", p(&data), "--cases", "2", "--seed", "1", "--n-nodes", "2", "--path-len", "1",
        "--steady-frames", "6", "--width", "240", "--height", "160", "--transition-kind", "slide",
    ]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    assert!(data.join("case_000/utg.json").is_file());
    assert!(data.join("case_001/frames/timing.json").is_file());
    // A broken case is reported, not fatal.
    fs::create_dir(data.join("case_999")).unwrap();
    fs::write(data.join("case_999/utg.json"), "{").unwrap();

    let report_path = dir.path().join("r.json");
    let out = gifreplay(&["eval", "--dataset", p(&data), "--out", p(&report_path)]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    assert!(String::from_utf8_lossy(&out.stdout).contains("mean"));
    let report: BenchmarkReport = serde_json::from_str(&fs::read_to_string(&report_path).unwrap()).unwrap();
    assert_eq!(report.cases.len(), 2);
    assert_eq!(report.failed.keys().collect::<Vec<_>>(), ["case_999"]);
    assert_eq!(report.aggregate.metrics.trace_similarity, 1.0);
}

#[test]
fn synth_is_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let args = |out: &str| {
        vec![
            "synth".to_string(), "--out".into(), out.into(), "--seed".into(), "4".into(), "--n-nodes".into(),
            "3".into(), "--path-len".into(), "2".into(), "--width".into(), "160".into(), "--height".into(), "96".into(),
        ]
    };
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    for d in [&a, &b] {
        let out = Command::new(env!("CARGO_BIN_EXE_gifreplay")).args(args(p(d))).output().unwrap();
        assert_eq!(code(&out), 0);
    }
    let list = |root: &Path| {
        let mut files = Vec::new();
        let mut stack = vec![root.to_path_buf()];
        while let Some(d) = stack.pop() {
            for e in fs::read_dir(&d).unwrap() {
                let path = e.unwrap().path();
                if path.is_dir() {
                    stack.push(path);
                } else {
                    files.push((path.strip_prefix(root).unwrap().to_path_buf(), fs::read(&path).unwrap()));
                }
            }
        }
        files.sort();
        files
    };
    assert_eq!(list(&a), list(&b));
}
