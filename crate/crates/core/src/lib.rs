//! Turns a screen recording of a bug plus a UI transition graph into an
//! execution trace: keyframe location, GUI mapping, trace generation.

pub mod error;
pub mod evalkit;
pub mod features;
pub mod keyframe;
pub mod mapping;
pub mod media;
pub mod pipeline;
pub mod simcore;
pub mod synthgen;
pub mod trace;
pub mod utg;

pub use error::{Error, Result};
pub use features::{BinaryDescriptor, FeatureParams, FeatureSet, InterestPoint, SamplingTable};
pub use keyframe::{
    Keyframe, KeyframeReport, KeyframeSequence, Segment, SegmentKind, SegmentationConfig,
    SimilaritySeries,
};
pub use mapping::{IndexSequence, MappingConfig, MappingResult, RankedNode, ScreenGallery};
pub use media::{load_recording, Frame, LuminanceMask, Recording};
pub use pipeline::{PhaseTimings, PipelineConfig, PipelineOutput};
pub use simcore::{ssim, SimilarityScore, SsimParams};
pub use trace::{generate_trace, sequence_similarity, ExecutionTrace, TraceReport};
pub use utg::{load_utg, NodePath, PathLimits, Utg, UtgEdge, UtgManifest, UtgNode};
pub use evalkit::{BenchmarkReport, KeyframeGroundTruth, MappingGroundTruth, TraceGroundTruth};
pub use synthgen::{SynthCase, SynthConfig, TransitionKind};
