//! Ground-truth formats, the three metric families and the dataset
//! benchmark runner.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use log::warn;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mapping::MappingResult;
use crate::media::{load_recording, Recording};
use crate::pipeline::{self, PhaseTimings, PipelineConfig};
use crate::trace::sequence_similarity;
use crate::utg::load_utg;

/// Inclusive, sorted, disjoint frame intervals of fully rendered screens.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct KeyframeGroundTruth {
    pub intervals: Vec<[usize; 2]>,
}

impl KeyframeGroundTruth {
    pub fn validate(&self) -> Result<()> {
        let mut errs = Vec::new();
        for (k, &[s, e]) in self.intervals.iter().enumerate() {
            if s > e {
                errs.push(format!("interval {k}: start {s} > end {e}"));
            }
            if k > 0 && s <= self.intervals[k - 1][1] {
                errs.push(format!("interval {k} overlaps or precedes interval {}", k - 1));
            }
        }
        if errs.is_empty() {
            Ok(())
        } else {
            Err(Error::Validation(errs))
        }
    }

    /// Ordinal of the interval containing `frame`.
    pub fn interval_of(&self, frame: usize) -> Option<usize> {
        self.intervals.iter().position(|&[s, e]| (s..=e).contains(&frame))
    }
}

/// Pairs of (keyframe interval ordinal, node id).
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MappingGroundTruth {
    pub pairs: Vec<(usize, String)>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TraceGroundTruth {
    pub traces: Vec<Vec<String>>,
}

impl TraceGroundTruth {
    pub fn validate(&self) -> Result<()> {
        let Some(first) = self.traces.first() else {
            return Err(Error::Validation(vec!["no ground-truth trace".into()]));
        };
        let last = first.last();
        if self.traces.iter().any(|t| t.is_empty() || t.last() != last) {
            return Err(Error::Validation(vec![
                "ground-truth traces must be non-empty and end at the same node".into(),
            ]));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Prf {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

fn ratio(num: usize, den: usize) -> f64 {
    if den == 0 {
        0.0
    } else {
        num as f64 / den as f64
    }
}

/// Interval-based precision/recall/F1: the first prediction inside an
/// interval is a hit, any further one in the same interval is a false
/// positive, as is anything outside every interval.
pub fn keyframe_prf(predicted: &[usize], gt: &KeyframeGroundTruth) -> Prf {
    let mut hit = vec![false; gt.intervals.len()];
    let (mut tp, mut fp) = (0, 0);
    for &f in predicted {
        match gt.interval_of(f) {
            Some(k) if !hit[k] => {
                hit[k] = true;
                tp += 1;
            }
            _ => fp += 1,
        }
    }
    let fn_ = gt.intervals.len() - tp;
    let precision = ratio(tp, tp + fp);
    let recall = ratio(tp, tp + fn_);
    let f1 = if precision + recall == 0.0 {
        0.0
    } else {
        2.0 * precision * recall / (precision + recall)
    };
    Prf { precision, recall, f1 }
}

/// Fraction of ground-truth pairs whose node is within the top `k` of the
/// result for the first keyframe falling in the pair's interval. A pair with
/// no such result is a miss.
pub fn precision_at_k(
    results: &[MappingResult],
    gt: &MappingGroundTruth,
    intervals: &KeyframeGroundTruth,
    k: usize,
) -> f64 {
    let mut hits = 0;
    for (ordinal, node) in &gt.pairs {
        let result = intervals.intervals.get(*ordinal).and_then(|&[s, e]| {
            results
                .iter()
                .find(|r| (s..=e).contains(&r.keyframe_index))
        });
        match result {
            Some(r) => {
                if r.ranked.iter().take(k).any(|n| &n.node == node) {
                    hits += 1;
                }
            }
            None => warn!("no mapping result for ground-truth interval {ordinal}"),
        }
    }
    ratio(hits, gt.pairs.len())
}

/// Best sequence similarity against any ground-truth trace.
pub fn trace_similarity(predicted: &[String], gt: &TraceGroundTruth) -> f64 {
    gt.traces
        .iter()
        .map(|t| sequence_similarity(t, predicted))
        .fold(0.0, f64::max)
}

/// Everything a benchmark case needs, loaded from its directory.
#[derive(Debug)]
pub struct DatasetCase {
    pub name: String,
    pub dir: PathBuf,
    pub recording: Recording,
    pub utg: crate::utg::Utg,
    pub gt_keyframes: KeyframeGroundTruth,
    pub gt_mapping: MappingGroundTruth,
    pub gt_traces: TraceGroundTruth,
}

fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    serde_json::from_str(&text).map_err(|source| Error::Json {
        path: path.to_path_buf(),
        source,
    })
}

/// Loads `dir/{recording.gif | frames/}`, `utg.json` and the ground truths.
pub fn load_case(dir: &Path, resize: Option<f64>) -> Result<DatasetCase> {
    let gif = dir.join("recording.gif");
    let source = if gif.exists() { gif } else { dir.join("frames") };
    let mut recording = load_recording(&source, None)?;
    if let Some(f) = resize {
        let (w, h) = recording.dimensions();
        let scaled = |v: u32| ((v as f64 * f).round() as u32).max(1);
        recording = recording.resampled(scaled(w), scaled(h))?;
    }
    let gt_keyframes: KeyframeGroundTruth = read_json(&dir.join("gt_keyframes.json"))?;
    gt_keyframes.validate()?;
    let gt_traces: TraceGroundTruth = read_json(&dir.join("gt_traces.json"))?;
    gt_traces.validate()?;
    Ok(DatasetCase {
        name: dir
            .file_name()
            .map(|n| n.to_string_lossy().into_owned())
            .unwrap_or_default(),
        dir: dir.to_path_buf(),
        recording,
        utg: load_utg(&dir.join("utg.json"))?,
        gt_keyframes,
        gt_mapping: read_json(&dir.join("gt_mapping.json"))?,
        gt_traces,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct CaseMetrics {
    pub keyframes: Prf,
    pub precision_at_1: f64,
    pub precision_at_2: f64,
    pub precision_at_3: f64,
    pub trace_similarity: f64,
}

impl CaseMetrics {
    fn mean(all: &[CaseMetrics]) -> Self {
        let n = all.len().max(1) as f64;
        let avg = |f: &dyn Fn(&CaseMetrics) -> f64| all.iter().map(f).sum::<f64>() / n;
        CaseMetrics {
            keyframes: Prf {
                precision: avg(&|m| m.keyframes.precision),
                recall: avg(&|m| m.keyframes.recall),
                f1: avg(&|m| m.keyframes.f1),
            },
            precision_at_1: avg(&|m| m.precision_at_1),
            precision_at_2: avg(&|m| m.precision_at_2),
            precision_at_3: avg(&|m| m.precision_at_3),
            trace_similarity: avg(&|m| m.trace_similarity),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CaseReport {
    pub metrics: CaseMetrics,
    pub timings: PhaseTimings,
    pub keyframes: Vec<usize>,
    pub trace: Vec<String>,
    /// Set when the trace phase failed (the metrics then score an empty trace).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub trace_error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct Aggregate {
    pub cases: usize,
    pub metrics: CaseMetrics,
    pub timings: PhaseTimings,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct BenchmarkReport {
    /// Keyed by case directory name.
    pub cases: BTreeMap<String, CaseReport>,
    pub failed: BTreeMap<String, String>,
    pub aggregate: Aggregate,
}

impl BenchmarkReport {
    fn finish(&mut self) {
        let metrics: Vec<CaseMetrics> = self.cases.values().map(|c| c.metrics).collect();
        let n = metrics.len().max(1) as f64;
        let sum = |f: fn(&PhaseTimings) -> f64| self.cases.values().map(|c| f(&c.timings)).sum::<f64>() / n;
        self.aggregate = Aggregate {
            cases: metrics.len(),
            metrics: CaseMetrics::mean(&metrics),
            timings: PhaseTimings {
                keyframe_location_sec: sum(|t| t.keyframe_location_sec),
                gui_mapping_sec: sum(|t| t.gui_mapping_sec),
                trace_generation_sec: sum(|t| t.trace_generation_sec),
                total_sec: sum(|t| t.total_sec),
            },
        };
    }

    /// Per-case rows and a mean row, timing columns first.
    pub fn table(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(
            out,
            "{:<16} {:>10} {:>10} {:>10} {:>10} {:>6} {:>6} {:>6} {:>6}",
            "case", "keyframe_s", "mapping_s", "trace_s", "total_s", "kf_f1", "p@1", "p@3", "sim"
        );
        let mut row = |name: &str, m: &CaseMetrics, t: &PhaseTimings| {
            let _ = writeln!(
                out,
                "{:<16} {:>10.3} {:>10.3} {:>10.3} {:>10.3} {:>6.3} {:>6.3} {:>6.3} {:>6.3}",
                name,
                t.keyframe_location_sec,
                t.gui_mapping_sec,
                t.trace_generation_sec,
                t.total_sec,
                m.keyframes.f1,
                m.precision_at_1,
                m.precision_at_3,
                m.trace_similarity
            );
        };
        for (name, c) in &self.cases {
            row(name, &c.metrics, &c.timings);
        }
        row("mean", &self.aggregate.metrics, &self.aggregate.timings);
        for (name, err) in &self.failed {
            let _ = writeln!(out, "{name:<16} FAILED: {err}");
        }
        out
    }
}

/// Runs the pipeline on one loaded case and scores it.
pub fn evaluate_case(case: &DatasetCase, cfg: &PipelineConfig) -> Result<CaseReport> {
    let out = pipeline::run(&case.recording, &case.utg, cfg)?;
    let keyframes = out.analysis.keyframes.indices();
    let (trace, trace_error) = match &out.trace {
        Ok(t) => (t.path.nodes.clone(), None),
        Err(e) => (Vec::new(), Some(e.to_string())),
    };
    let results = &out.mapping.results;
    let p = |k| precision_at_k(results, &case.gt_mapping, &case.gt_keyframes, k);
    Ok(CaseReport {
        metrics: CaseMetrics {
            keyframes: keyframe_prf(&keyframes, &case.gt_keyframes),
            precision_at_1: p(1),
            precision_at_2: p(2),
            precision_at_3: p(3),
            trace_similarity: trace_similarity(&trace, &case.gt_traces),
        },
        timings: out.timings,
        keyframes,
        trace,
        trace_error,
    })
}

/// Case directories: sorted subdirectories holding a `utg.json`.
pub fn case_dirs(dataset_dir: &Path) -> Result<Vec<PathBuf>> {
    let entries = fs::read_dir(dataset_dir).map_err(|e| Error::io(dataset_dir, e))?;
    let mut dirs: Vec<PathBuf> = entries
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.join("utg.json").is_file())
        .collect();
    dirs.sort();
    Ok(dirs)
}

/// Evaluates every case of a dataset in directory order. Cases that fail to
/// load or run are recorded under `failed` and skipped. `resize` rescales
/// recordings by a factor before the pipeline sees them.
pub fn run_benchmark(dataset_dir: &Path, cfg: &PipelineConfig, resize: Option<f64>) -> Result<BenchmarkReport> {
    cfg.validate()?;
    let mut report = BenchmarkReport::default();
    for dir in case_dirs(dataset_dir)? {
        let name = dir.file_name().unwrap().to_string_lossy().into_owned();
        match load_case(&dir, resize).and_then(|c| evaluate_case(&c, cfg)) {
            Ok(r) => {
                report.cases.insert(name, r);
            }
            Err(e) => {
                warn!("case {name} failed: {e}");
                report.failed.insert(name, e.to_string());
            }
        }
    }
    report.finish();
    Ok(report)
}
