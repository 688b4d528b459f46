use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::corpus::SegmentOptions;
use crate::error::{Error, Result};
use crate::rng::derive_seed;
use crate::simulator::WorldConfig;
use crate::student::{Architecture, PipelineConfig, TrainConfig};

/// Environment variable that overrides the config file's seed.
pub const SEED_ENV: &str = "PAIRDISTILL_SEED";

/// Everything one run needs.
///
/// Per-component seeds (`world.seed`, `train.seed`, `finetune.seed`) are
/// derived from the top-level `seed` and the replica number; values written
/// in the file for them are ignored.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub seed: u64,
    pub output_dir: PathBuf,
    pub world: WorldConfig,
    pub segments: SegmentOptions,
    pub student: Architecture,
    /// Pretraining schedule.
    pub train: TrainConfig,
    /// Gold fine-tuning schedule.
    pub finetune: TrainConfig,
    pub experiment: ExperimentConfig,
    pub gradcheck: GradcheckConfig,
    pub inputs: InputConfig,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    /// Ensemble sizes for the calibration curve.
    pub k_values: Vec<usize>,
    /// Reliability and correlation bucket count.
    pub buckets: usize,
    pub pairs_per_dialogue: usize,
    /// Ensemble size of the scores used for pairing and pretraining.
    pub train_k: usize,
    pub gold_fractions: Vec<f64>,
    pub n_seeds: usize,
    pub test_fraction: f64,
    pub threshold: f64,
    pub bootstrap_replicates: usize,
    pub class: usize,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            k_values: vec![1, 2, 3, 5, 10, 15, 20, 25, 30],
            buckets: 5,
            pairs_per_dialogue: 16,
            train_k: 30,
            gold_fractions: vec![0.01, 0.05, 0.25],
            n_seeds: 5,
            test_fraction: 0.2,
            threshold: 0.5,
            bootstrap_replicates: 200,
            class: 0,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GradcheckConfig {
    pub instances: usize,
    pub d: usize,
    pub hidden: usize,
    pub tolerance: f64,
    pub unbiased_d: usize,
    pub unbiased_draws: usize,
    pub unbiased_seeds: usize,
    pub z_limit: f64,
    /// Shift applied to soft labels in the miscalibrated control.
    pub control_shift: f64,
    pub control_z_min: f64,
}

impl Default for GradcheckConfig {
    fn default() -> Self {
        GradcheckConfig {
            instances: 100,
            d: 6,
            hidden: 5,
            tolerance: 1e-5,
            unbiased_d: 4,
            unbiased_draws: 100_000,
            unbiased_seeds: 3,
            z_limit: 4.0,
            control_shift: 0.3,
            control_z_min: 10.0,
        }
    }
}

/// Externally produced data that replaces the simulator when set.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct InputConfig {
    pub corpus: Option<PathBuf>,
    /// Score files, one per ensemble setting; the last one feeds pairing and
    /// pretraining.
    pub scores: Vec<PathBuf>,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            seed: 20_240_601,
            output_dir: PathBuf::from("out"),
            world: WorldConfig {
                d: 32,
                ..WorldConfig::default()
            },
            segments: SegmentOptions {
                window: None,
                recency: 0.3,
            },
            student: Architecture::Linear,
            train: TrainConfig::default(),
            finetune: TrainConfig {
                epochs: 30,
                ..TrainConfig::default()
            },
            experiment: ExperimentConfig::default(),
            gradcheck: GradcheckConfig::default(),
            inputs: InputConfig::default(),
        }
    }
}

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let config: RunConfig = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        config.validate()?;
        Ok(config)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut config = Self::from_toml(&text)?;
        // relative input paths resolve against the config file
        let base = path.parent().unwrap_or(Path::new("."));
        if let Some(c) = &config.inputs.corpus {
            config.inputs.corpus = Some(base.join(c));
        }
        config.inputs.scores = config.inputs.scores.iter().map(|s| base.join(s)).collect();
        Ok(config)
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Serialize(e.to_string()))
    }

    /// Apply `--seed`, then the environment override, then `--out`.
    pub fn with_overrides(mut self, seed: Option<u64>, out: Option<PathBuf>) -> Result<Self> {
        if let Some(seed) = seed {
            self.seed = seed;
        } else if let Ok(value) = std::env::var(SEED_ENV) {
            self.seed = value
                .trim()
                .parse()
                .map_err(|_| Error::Config(format!("{SEED_ENV}={value:?} is not a u64")))?;
        }
        if let Some(out) = out {
            self.output_dir = out;
        }
        Ok(self)
    }

    pub fn validate(&self) -> Result<()> {
        self.world.validate()?;
        self.segments.validate()?;
        self.train.validate()?;
        self.finetune.validate()?;
        if let Architecture::Mlp1 { hidden: 0 } = self.student {
            return Err(Error::param("student.hidden", "must be positive"));
        }
        let e = &self.experiment;
        if e.k_values.is_empty() || e.k_values.contains(&0) {
            return Err(Error::param(
                "experiment.k_values",
                "need at least one positive ensemble size",
            ));
        }
        if e.train_k == 0 {
            return Err(Error::param("experiment.train_k", "must be positive"));
        }
        if e.buckets < 2 {
            return Err(Error::param("experiment.buckets", "need at least 2"));
        }
        if e.n_seeds == 0 {
            return Err(Error::param("experiment.n_seeds", "must be positive"));
        }
        if let Some(f) = e.gold_fractions.iter().find(|f| !(**f > 0.0 && **f <= 1.0)) {
            return Err(Error::param(
                "experiment.gold_fractions",
                format!("{f} is not in (0, 1]"),
            ));
        }
        if !(e.threshold > 0.0 && e.threshold < 1.0) {
            return Err(Error::param("experiment.threshold", "must be in (0, 1)"));
        }
        if self.gradcheck.unbiased_seeds == 0 || self.gradcheck.instances == 0 {
            return Err(Error::param(
                "gradcheck",
                "instances and unbiased_seeds must be positive",
            ));
        }
        Ok(())
    }

    /// World for one replica, seeded from the run seed.
    pub fn world_for(&self, replica: usize) -> WorldConfig {
        WorldConfig {
            seed: derive_seed(self.seed, "world", &replica.to_string()),
            ..self.world.clone()
        }
    }

    pub fn replica_seed(&self, scope: &str, replica: usize) -> u64 {
        derive_seed(self.seed, scope, &replica.to_string())
    }

    pub fn pipeline_for(&self, replica: usize) -> PipelineConfig {
        let seed = self.replica_seed("pipeline", replica);
        PipelineConfig {
            architecture: self.student,
            segments: self.segments,
            pretrain: TrainConfig {
                seed: derive_seed(seed, "pretrain", ""),
                ..self.train.clone()
            },
            finetune: TrainConfig {
                seed: derive_seed(seed, "finetune", ""),
                ..self.finetune.clone()
            },
            pairs_per_dialogue: self.experiment.pairs_per_dialogue,
            test_fraction: self.experiment.test_fraction,
            threshold: self.experiment.threshold,
            class: self.experiment.class,
            seed,
        }
    }
}
