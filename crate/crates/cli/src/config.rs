use std::fs;
use std::path::Path;

use anyhow::{bail, Context};
use clap::Args;
use gifreplay_core::PipelineConfig;
use serde::{Deserialize, Serialize};

/// Every tunable plus the worker count, as read from `--config`.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default)]
pub struct RunConfig {
    #[serde(flatten)]
    pub pipeline: PipelineConfig,
    pub threads: Option<usize>,
}

impl RunConfig {
    /// TOML when the extension is `.toml`, JSON otherwise.
    pub fn load(path: &Path) -> anyhow::Result<Self> {
        let text = fs::read_to_string(path).with_context(|| format!("reading config {}", path.display()))?;
        let cfg = if path.extension().is_some_and(|e| e == "toml") {
            toml::from_str(&text).with_context(|| format!("parsing TOML config {}", path.display()))?
        } else {
            serde_json::from_str(&text).with_context(|| format!("parsing JSON config {}", path.display()))?
        };
        Ok(cfg)
    }

    pub fn validate(&self) -> anyhow::Result<()> {
        self.pipeline.validate()?;
        if self.threads == Some(0) {
            bail!("threads must be positive");
        }
        Ok(())
    }
}

/// Flags shared by every command; each overrides the config file.
#[derive(Debug, Clone, Default, Args)]
pub struct Common {
    /// TOML or JSON file with any subset of the tunables.
    #[arg(long, global = true)]
    pub config: Option<std::path::PathBuf>,
    /// Worker threads for frame and mapping parallelism [default: logical cores].
    #[arg(long, global = true, env = "GIFREPLAY_THREADS")]
    pub threads: Option<usize>,
}

#[derive(Debug, Clone, Default, Args)]
pub struct SegmentationFlags {
    #[arg(long)]
    pub sim_threshold: Option<f64>,
    #[arg(long)]
    pub steady_frames: Option<usize>,
}

#[derive(Debug, Clone, Default, Args)]
pub struct MappingFlags {
    /// Weight of the feature score in the combined similarity.
    #[arg(long)]
    pub w: Option<f64>,
    #[arg(long)]
    pub top_k: Option<usize>,
    #[arg(long)]
    pub min_score: Option<f64>,
    #[arg(long)]
    pub max_hamming: Option<u32>,
}

#[derive(Debug, Clone, Default, Args)]
pub struct TraceFlags {
    #[arg(long)]
    pub max_paths: Option<usize>,
    #[arg(long)]
    pub max_depth: Option<usize>,
}

impl Common {
    pub fn resolve(&self) -> anyhow::Result<RunConfig> {
        let mut cfg = match &self.config {
            Some(path) => RunConfig::load(path)?,
            None => RunConfig::default(),
        };
        if self.threads.is_some() {
            cfg.threads = self.threads;
        }
        Ok(cfg)
    }
}

impl SegmentationFlags {
    pub fn apply(&self, cfg: &mut PipelineConfig) {
        if let Some(v) = self.sim_threshold {
            cfg.segmentation.sim_threshold = v;
        }
        if let Some(v) = self.steady_frames {
            cfg.segmentation.steady_min_frames = v;
        }
    }
}

impl MappingFlags {
    pub fn apply(&self, cfg: &mut PipelineConfig) {
        if let Some(v) = self.w {
            cfg.mapping.w = v;
        }
        if let Some(v) = self.top_k {
            cfg.mapping.top_k = v;
        }
        if self.min_score.is_some() {
            cfg.mapping.min_score = self.min_score;
        }
        if let Some(v) = self.max_hamming {
            cfg.mapping.max_hamming = v;
        }
    }
}

impl TraceFlags {
    pub fn apply(&self, cfg: &mut PipelineConfig) {
        if let Some(v) = self.max_paths {
            cfg.limits.max_paths = v;
        }
        if let Some(v) = self.max_depth {
            cfg.limits.max_depth = v;
        }
    }
}
