//! Run configuration: one TOML document with per-command sections. Unknown
//! keys are rejected, every field has a default, and each run writes its
//! resolved snapshot beside the outputs.

use anyhow::{Context, Result};
use eqa_core::calib::CalibrationConfig;
use eqa_core::eval::EvalConfig;
use eqa_core::gen::{DatasetConfig, EnvConfig};
use eqa_core::grid::ObsWindow;
use eqa_core::train::{JointConfig, NavTrainConfig, QaTrainConfig, TrainSchedule};
use serde::{Deserialize, Serialize};
use std::fs;
use std::path::Path;

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub master_seed: u64,
    pub dataset: DatasetSection,
    pub env: EnvSection,
    pub train: TrainSection,
    pub calibrate: CalibrateSection,
    pub eval: EvalSection,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            master_seed: 1,
            dataset: DatasetSection::default(),
            env: EnvSection::default(),
            train: TrainSection::default(),
            calibrate: CalibrateSection::default(),
            eval: EvalSection::default(),
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DatasetSection {
    pub train_envs: usize,
    pub val_envs: usize,
    pub test_envs: usize,
}

impl Default for DatasetSection {
    fn default() -> Self {
        DatasetSection { train_envs: 60, val_envs: 10, test_envs: 10 }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EnvSection {
    pub width: usize,
    pub height: usize,
    pub rooms: usize,
    pub objects: usize,
    pub obs_depth: usize,
    pub obs_width: usize,
}

impl Default for EnvSection {
    fn default() -> Self {
        EnvSection { width: 25, height: 25, rooms: 4, objects: 10, obs_depth: 5, obs_width: 5 }
    }
}

#[derive(Clone, Debug, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrainSection {
    pub nav: NavSection,
    pub qa: QaSection,
    pub e2e: E2eSection,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct NavSection {
    pub epochs: usize,
    pub lr: f64,
    pub batch: usize,
}

impl Default for NavSection {
    fn default() -> Self {
        NavSection { epochs: 12, lr: 1e-3, batch: 8 }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct QaSection {
    pub epochs: usize,
    pub lr: f64,
    pub batch: usize,
}

impl Default for QaSection {
    fn default() -> Self {
        QaSection { epochs: 30, lr: 1e-3, batch: 8 }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct E2eSection {
    pub warmstart_epochs: usize,
    pub joint_epochs: usize,
    pub w_nav: f64,
    pub w_qa: f64,
    pub lr: f64,
    pub batch: usize,
    pub rollout_mix_peak: f64,
    pub track_val: bool,
}

impl Default for E2eSection {
    fn default() -> Self {
        E2eSection {
            warmstart_epochs: 3,
            joint_epochs: 6,
            w_nav: 1.0,
            w_qa: 1.0,
            lr: 1e-3,
            batch: 8,
            rollout_mix_peak: 0.5,
            track_val: true,
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CalibrateSection {
    pub markers: usize,
    pub min_distance: usize,
    pub lambda: f64,
    pub epochs: usize,
    pub lr: f64,
}

impl Default for CalibrateSection {
    fn default() -> Self {
        CalibrateSection { markers: 5, min_distance: 4, lambda: 0.2, epochs: 40, lr: 1e-3 }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EvalSection {
    pub tiers: Vec<usize>,
    pub step_cap: usize,
    pub seeds: usize,
}

impl Default for EvalSection {
    fn default() -> Self {
        EvalSection { tiers: vec![10, 20, 30], step_cap: 120, seeds: 5 }
    }
}

impl RunConfig {
    /// Load a TOML config, or the defaults when no path is given. Unknown
    /// keys and type errors are reported with their location.
    pub fn load(path: Option<&Path>) -> Result<Self> {
        match path {
            None => Ok(RunConfig::default()),
            Some(p) => {
                let text = fs::read_to_string(p).with_context(|| format!("cannot read config {}", p.display()))?;
                let cfg: RunConfig =
                    toml::from_str(&text).map_err(|e| anyhow::anyhow!("config {}: {e}", p.display()))?;
                Ok(cfg)
            }
        }
    }

    pub fn dataset_config(&self) -> DatasetConfig {
        DatasetConfig {
            n_train_envs: self.dataset.train_envs,
            n_val_envs: self.dataset.val_envs,
            n_test_envs: self.dataset.test_envs,
            master_seed: self.master_seed,
            env: EnvConfig {
                width: self.env.width,
                height: self.env.height,
                n_rooms: self.env.rooms,
                n_objects: self.env.objects,
                window: ObsWindow { depth: self.env.obs_depth, width: self.env.obs_width },
            },
        }
    }

    pub fn nav_train_config(&self) -> NavTrainConfig {
        NavTrainConfig {
            epochs: self.train.nav.epochs,
            lr: self.train.nav.lr,
            batch: self.train.nav.batch,
            seed: self.master_seed,
        }
    }

    pub fn qa_train_config(&self) -> QaTrainConfig {
        QaTrainConfig {
            epochs: self.train.qa.epochs,
            lr: self.train.qa.lr,
            batch: self.train.qa.batch,
            seed: self.master_seed,
        }
    }

    pub fn joint_config(&self) -> JointConfig {
        JointConfig {
            warmstart_epochs: self.train.e2e.warmstart_epochs,
            joint_epochs: self.train.e2e.joint_epochs,
            w_nav: self.train.e2e.w_nav,
            w_qa: self.train.e2e.w_qa,
            lr: self.train.e2e.lr,
            batch: self.train.e2e.batch,
            seed: self.master_seed,
            schedule: TrainSchedule { peak: self.train.e2e.rollout_mix_peak },
            track_val: self.train.e2e.track_val,
        }
    }

    pub fn calibration_config(&self) -> CalibrationConfig {
        CalibrationConfig {
            n_markers: self.calibrate.markers,
            min_distance: self.calibrate.min_distance,
            lambda: self.calibrate.lambda,
            epochs: self.calibrate.epochs,
            lr: self.calibrate.lr,
            seed: self.master_seed,
        }
    }

    pub fn eval_config(&self) -> EvalConfig {
        EvalConfig { tiers: self.eval.tiers.clone(), step_cap: self.eval.step_cap }
    }

    /// Write the resolved configuration next to a command's outputs.
    pub fn write_snapshot(&self, dir: &Path) -> Result<()> {
        fs::create_dir_all(dir).with_context(|| format!("cannot create {}", dir.display()))?;
        let text = toml::to_string_pretty(self).context("config serialization failed")?;
        let path = dir.join("config_snapshot.toml");
        fs::write(&path, text).with_context(|| format!("cannot write {}", path.display()))?;
        Ok(())
    }
}
