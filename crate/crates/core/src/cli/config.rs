//! Experiment configuration shared by every subcommand.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::ccp::SmoothingConfig;
use crate::env::{EnvSpec, ExpertKind, GridSpec, ObjectworldSpec};
use crate::error::{Error, Result};
use crate::fingerprint;
use crate::hotz_miller::OperatorMode;
use crate::irl::{Algorithm, OptimizerConfig, RewardModel, TrainConfig};

pub const SEED_ENV_VAR: &str = "CCPIRL_SEED";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ExperimentConfig {
    pub env: EnvSpec,
    pub algorithm: Algorithm,
    pub reward_model: RewardModel,
    pub hidden: usize,
    pub iterations: usize,
    pub n_trajectories: usize,
    pub n_held_out: usize,
    /// Defaults to the environment's episode length.
    pub traj_length: Option<usize>,
    pub seed: Option<u64>,
    pub expert: ExpertKind,
    /// Defaults to the reward model's usual optimizer.
    pub optimizer: Option<OptimizerConfig>,
    pub smoothing: SmoothingConfig,
    pub horizon: Option<usize>,
    pub operator_mode: OperatorMode,
    pub output_dir: PathBuf,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            env: EnvSpec::FixedTarget(GridSpec::default()),
            algorithm: Algorithm::Ccp,
            reward_model: RewardModel::Linear,
            hidden: 32,
            iterations: 50,
            n_trajectories: 80,
            n_held_out: 20,
            traj_length: None,
            seed: None,
            expert: ExpertKind::Soft,
            optimizer: None,
            smoothing: SmoothingConfig::default(),
            horizon: None,
            operator_mode: OperatorMode::Auto,
            output_dir: PathBuf::from("run"),
        }
    }
}

impl ExperimentConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::InvalidSpec(format!("config: cannot read {}: {e}", path.display())))?;
        let file: ConfigFile = serde_json::from_str(&text)?;
        Ok(file.config)
    }

    /// The seed, falling back to `CCPIRL_SEED` with a warning.
    pub fn resolve_seed(&mut self) -> Result<u64> {
        if let Some(s) = self.seed {
            return Ok(s);
        }
        match std::env::var(SEED_ENV_VAR) {
            Ok(v) => {
                let s = v
                    .trim()
                    .parse()
                    .map_err(|_| Error::InvalidSpec(format!("seed: {SEED_ENV_VAR}={v} is not an unsigned integer")))?;
                eprintln!("warning: no seed in config or flags; using {SEED_ENV_VAR}={s}");
                self.seed = Some(s);
                Ok(s)
            }
            Err(_) => Err(Error::InvalidSpec(format!("seed: required (pass --seed or set it in the config; {SEED_ENV_VAR} is a fallback)"))),
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidSpec(msg));
        if self.env.side() == 0 {
            return bad("n: grid side must be positive".into());
        }
        if !(0.0..1.0).contains(&self.env.discount()) {
            return bad(format!("discount: must lie in [0, 1), got {}", self.env.discount()));
        }
        if self.n_trajectories == 0 {
            return bad("n_trajectories: must be positive".into());
        }
        if self.traj_length == Some(0) {
            return bad("traj_length: must be positive".into());
        }
        if self.reward_model == RewardModel::Mlp && self.hidden == 0 {
            return bad("hidden: must be positive".into());
        }
        Ok(())
    }

    pub fn traj_length(&self) -> usize {
        self.traj_length.unwrap_or_else(|| self.env.default_traj_length())
    }

    /// Demos use the seed itself; held-out trajectories a derived seed.
    pub fn held_out_seed(seed: u64) -> u64 {
        seed ^ 0x9e37_79b9_7f4a_7c15
    }

    pub fn train_config(&self, iterations: usize) -> TrainConfig {
        TrainConfig {
            iterations,
            horizon: self.horizon,
            optimizer: self.optimizer.unwrap_or_else(|| self.reward_model.default_optimizer()),
            smoothing: self.smoothing,
            operator_mode: self.operator_mode,
            ..Default::default()
        }
    }

    /// Hash of everything except the output directory.
    pub fn fingerprint(&self) -> Result<String> {
        let mut c = self.clone();
        c.output_dir = PathBuf::new();
        fingerprint::of_json(&c)
    }

    pub fn to_file(&self) -> Result<ConfigFile> {
        Ok(ConfigFile { config: self.clone(), fingerprint: Some(self.fingerprint()?) })
    }
}

/// `config.json` as written into an output directory.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConfigFile {
    #[serde(flatten)]
    pub config: ExperimentConfig,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fingerprint: Option<String>,
}

/// Environment kind as accepted on the command line.
pub fn env_of_kind(kind: &str, current: &EnvSpec) -> Result<EnvSpec> {
    let same = |name: &str| current.name() == name;
    Ok(match kind {
        "fixed" | "fixed-target" if same("fixed-target") => current.clone(),
        "macro" | "macro-cell" if same("macro-cell") => current.clone(),
        "objectworld" if same("objectworld") => current.clone(),
        "fixed" | "fixed-target" => EnvSpec::FixedTarget(GridSpec::default()),
        "macro" | "macro-cell" => EnvSpec::MacroCell(GridSpec::default()),
        "objectworld" => EnvSpec::Objectworld(ObjectworldSpec::default()),
        other => return Err(Error::InvalidSpec(format!("env: expected fixed, macro or objectworld, got {other}"))),
    })
}
