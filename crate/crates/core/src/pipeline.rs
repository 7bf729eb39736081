//! The three phases end to end: keyframe location, GUI mapping, trace
//! generation, with wall-clock time per phase.

use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::features::FeatureParams;
use crate::keyframe::{analyze, KeyframeAnalysis, SegmentationConfig};
use crate::mapping::{map_with_gallery, IndexSequence, MappingConfig, ScreenGallery};
use crate::media::Recording;
use crate::simcore::SsimParams;
use crate::trace::{generate_trace, ExecutionTrace};
use crate::utg::{PathLimits, Utg};

/// Every tunable of the pipeline.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default)]
pub struct PipelineConfig {
    pub ssim: SsimParams,
    pub segmentation: SegmentationConfig,
    pub features: FeatureParams,
    pub mapping: MappingConfig,
    pub limits: PathLimits,
}

impl PipelineConfig {
    /// The mapping section with the shared SSIM and feature parameters
    /// filled in.
    pub fn mapping_config(&self) -> MappingConfig {
        MappingConfig {
            ssim: self.ssim,
            features: self.features.clone(),
            ..self.mapping.clone()
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.ssim.validate()?;
        self.segmentation.validate()?;
        self.features.validate()?;
        self.mapping_config().validate()?;
        if self.limits.max_paths == 0 || self.limits.max_depth == 0 {
            return Err(Error::InvalidConfig(
                "max_paths and max_depth must be positive".into(),
            ));
        }
        Ok(())
    }
}

/// Seconds spent per phase.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct PhaseTimings {
    pub keyframe_location_sec: f64,
    pub gui_mapping_sec: f64,
    pub trace_generation_sec: f64,
    pub total_sec: f64,
}

#[derive(Debug)]
pub struct PipelineOutput {
    pub analysis: KeyframeAnalysis,
    pub mapping: IndexSequence,
    /// Trace failures (no keyframes, unreachable target, path explosion) do
    /// not invalidate the earlier phases.
    pub trace: Result<ExecutionTrace>,
    pub timings: PhaseTimings,
}

/// Runs all phases. The gallery is built from the UTG's screenshots inside
/// the GUI-mapping phase.
pub fn run(rec: &Recording, utg: &Utg, cfg: &PipelineConfig) -> Result<PipelineOutput> {
    run_with(rec, utg, None, cfg)
}

/// As [`run`], reusing a prebuilt gallery when given.
pub fn run_with(
    rec: &Recording,
    utg: &Utg,
    gallery: Option<&ScreenGallery>,
    cfg: &PipelineConfig,
) -> Result<PipelineOutput> {
    cfg.validate()?;
    let started = Instant::now();

    let analysis = analyze(rec, &cfg.ssim, &cfg.segmentation)?;
    let t_keyframes = started.elapsed().as_secs_f64();

    let mapping_started = Instant::now();
    let mapping_cfg = cfg.mapping_config();
    let owned;
    let gallery = match gallery {
        Some(g) => g,
        None => {
            owned = ScreenGallery::from_utg(utg, &cfg.features)?;
            &owned
        }
    };
    let mapping = map_with_gallery(&analysis.keyframes, gallery, &mapping_cfg)?;
    let t_mapping = mapping_started.elapsed().as_secs_f64();

    let trace_started = Instant::now();
    let trace = generate_trace(&mapping.indices, utg, cfg.limits);
    let t_trace = trace_started.elapsed().as_secs_f64();

    Ok(PipelineOutput {
        analysis,
        mapping,
        trace,
        timings: PhaseTimings {
            keyframe_location_sec: t_keyframes,
            gui_mapping_sec: t_mapping,
            trace_generation_sec: t_trace,
            total_sec: started.elapsed().as_secs_f64(),
        },
    })
}
