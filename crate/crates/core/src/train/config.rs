use serde::{Deserialize, Serialize};

use super::loss::LossWeights;
use crate::error::{Error, Result};
use crate::model::ParamGroup;

/// One resolution phase: render at `scale` times the target size.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Phase {
    pub scale: f64,
    pub iterations: usize,
}

/// Constant learning rate per parameter group.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LearningRates {
    /// Multiplied by the scene diagonal in metres.
    pub position: f64,
    pub log_scale: f64,
    pub rotation: f64,
    pub opacity: f64,
    pub sh_visual: f64,
    pub sh_gain: f64,
    pub sh_tof: f64,
}

impl Default for LearningRates {
    fn default() -> Self {
        Self {
            position: 2e-4,
            log_scale: 5e-3,
            rotation: 1e-3,
            opacity: 5e-2,
            sh_visual: 2.5e-3,
            sh_gain: 2.5e-3,
            sh_tof: 2.5e-3,
        }
    }
}

impl LearningRates {
    pub fn get(&self, group: ParamGroup, scene_diagonal: f64) -> f64 {
        match group {
            ParamGroup::Position => self.position * scene_diagonal,
            ParamGroup::LogScale => self.log_scale,
            ParamGroup::Rotation => self.rotation,
            ParamGroup::Opacity => self.opacity,
            ParamGroup::ShVisual => self.sh_visual,
            ParamGroup::ShGain => self.sh_gain,
            ParamGroup::ShTof => self.sh_tof,
        }
    }
}

/// Growth and removal of primitives during stage 1.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DensifyConfig {
    /// Iterations between densification steps; 0 disables densification.
    pub interval: usize,
    /// First stage-1 iteration at which densification may run.
    pub start: usize,
    /// Densification stops after this stage-1 iteration.
    pub until: usize,
    /// Mean screen-space gradient norm that triggers growth.
    pub grad_threshold: f64,
    /// Clone below, split at or above this fraction of the scene diagonal.
    pub scale_threshold: f64,
    /// Primitives with opacity below this are removed.
    pub prune_opacity: f64,
    /// Growth stops at this many primitives.
    pub max_primitives: usize,
}

impl Default for DensifyConfig {
    fn default() -> Self {
        Self {
            interval: 100,
            start: 200,
            until: 2500,
            grad_threshold: 2e-4,
            scale_threshold: 0.01,
            prune_opacity: 0.005,
            max_primitives: 50_000,
        }
    }
}

/// Full training configuration; read from JSON with every field optional.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub stage1_phases: Vec<Phase>,
    /// Stage-2 iterations fitting gain SH and opacity to the gain loss.
    pub stage2_iterations: usize,
    /// Stage-2 iterations that follow, fitting only the ToF SH to the masked
    /// ToF loss. Resolved ToF divides by the rendered gain, so a joint fit
    /// lets the ToF term inflate the gain field wherever it is still small.
    pub stage2_tof_iterations: usize,
    /// Resolution scale of the radio panoramas in stage 2.
    pub stage2_scale: f64,
    pub lr: LearningRates,
    /// Stage-2 learning rates; geometry entries are ignored.
    pub stage2_lr: LearningRates,
    pub visual_weights: LossWeights,
    pub radio_weights: LossWeights,
    /// ToF loss is restricted to pixels whose target gain exceeds this.
    pub mask_threshold: f64,
    /// Views whose gradients are averaged per iteration.
    pub batch_size: usize,
    pub densify: DensifyConfig,
    pub seed: u64,
    /// Forces single-threaded execution in the command-line tool. Gradient
    /// reduction is ordered in every mode.
    pub deterministic: bool,
    /// Iterations between log records.
    pub log_interval: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            stage1_phases: vec![
                Phase { scale: 0.25, iterations: 400 },
                Phase { scale: 0.5, iterations: 800 },
                Phase { scale: 1.0, iterations: 1800 },
            ],
            stage2_iterations: 1500,
            stage2_tof_iterations: 500,
            stage2_scale: 1.0,
            lr: LearningRates::default(),
            stage2_lr: LearningRates::default(),
            visual_weights: LossWeights::VISUAL,
            radio_weights: LossWeights::RADIO,
            mask_threshold: 1e-3,
            batch_size: 1,
            densify: DensifyConfig::default(),
            seed: 0,
            deterministic: false,
            log_interval: 50,
        }
    }
}

const SCALES: [f64; 4] = [0.125, 0.25, 0.5, 1.0];

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        for p in &self.stage1_phases {
            if !SCALES.contains(&p.scale) {
                return Err(Error::InvalidArgument(format!(
                    "phase scale {} not in {{1/8, 1/4, 1/2, 1}}",
                    p.scale
                )));
            }
        }
        if !SCALES.contains(&self.stage2_scale) {
            return Err(Error::InvalidArgument(format!(
                "stage-2 scale {} not in {{1/8, 1/4, 1/2, 1}}",
                self.stage2_scale
            )));
        }
        if self.batch_size == 0 {
            return Err(Error::InvalidArgument("batch_size must be at least 1".into()));
        }
        Ok(())
    }

    /// Downsampling factor of a resolution scale.
    pub fn factor(scale: f64) -> usize {
        (1.0 / scale).round() as usize
    }

    pub fn load(path: &std::path::Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let cfg: TrainConfig = serde_json::from_str(&text)?;
        cfg.validate()?;
        Ok(cfg)
    }
}
