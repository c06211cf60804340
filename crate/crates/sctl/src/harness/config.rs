//! One TOML document drives every subcommand.

use std::path::Path;

use crate::dynamics::PlantParams;
use crate::error::{Result, SctlError};
use crate::excitation::KanaiTajimiParams;
use crate::lac::LacConfig;

#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    /// Linear model the LQR is designed from (deliberately mismatched).
    pub assumed_plant: PlantParams,
    /// Nonlinear plant every rollout runs on.
    pub true_plant: PlantParams,
    pub excitation: KanaiTajimiParams,
    /// Diagonal of the LQR state weight Q.
    pub lqr_q: [f64; 2],
    pub lqr_r: f64,
    pub lac: LacConfig,
    /// Guidance weight α on the LQR force; 0 disables guidance.
    pub alpha: f64,
    /// Episode horizon, s.
    pub t_final: f64,
    /// Control/integration interval, s.
    pub dt: f64,
    pub episodes: usize,
    /// Response-history length l; the RL state is 4l-dimensional.
    pub history_len: usize,
    /// Reward weights [w1, w2, w3] on |x|, |ẍ|, |u|.
    pub reward_weights: [f64; 3],
    /// Force scale mapping the actor's [−1,1] output to force units. The
    /// default matches the standalone LQR's peak force on the held-out
    /// records (≈3), so the RL force authority is comparable to the guidance
    /// it is meant to replace; a much larger scale makes exploration noise
    /// dominate both the plant response and the reward signal.
    pub u_max: f64,
    /// Optional clamp on the total applied force.
    pub u_clamp: Option<f64>,
    /// Master seed; every stream in a run derives from it.
    pub seed: u64,
    /// Held-out excitation seeds used for evaluation.
    pub eval_seeds: usize,
    pub out_dir: String,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            assumed_plant: PlantParams::assumed_default(),
            true_plant: PlantParams::true_default(),
            excitation: KanaiTajimiParams::default(),
            lqr_q: [1.0, 1.0],
            lqr_r: crate::lqr::DEFAULT_R,
            lac: LacConfig::default(),
            alpha: 0.5,
            t_final: 20.0,
            dt: 0.02,
            episodes: 100,
            history_len: 4,
            reward_weights: [1.0, 1e-2, 1e-3],
            u_max: 3.0,
            u_clamp: None,
            seed: 0,
            eval_seeds: 10,
            out_dir: "runs".into(),
        }
    }
}

impl RunConfig {
    pub fn validate(&self) -> Result<()> {
        self.assumed_plant.validate()?;
        self.true_plant.validate()?;
        self.excitation.validate()?;
        self.lac.validate()?;
        if !(0.0..=1.0).contains(&self.alpha) {
            return Err(SctlError::Config(format!("alpha must be in [0,1], got {}", self.alpha)));
        }
        if self.history_len < 1 {
            return Err(SctlError::Config("history_len must be >= 1".into()));
        }
        if !(self.dt > 0.0) || !(self.t_final > 0.0) {
            return Err(SctlError::Config("dt and t_final must be > 0".into()));
        }
        if self.episodes < 1 {
            return Err(SctlError::Config("episodes must be >= 1".into()));
        }
        if self.reward_weights.iter().any(|w| !(*w >= 0.0)) {
            return Err(SctlError::Config("reward weights must be >= 0".into()));
        }
        if !(self.u_max >= 0.0) {
            return Err(SctlError::Config(format!("u_max must be >= 0, got {}", self.u_max)));
        }
        if let Some(c) = self.u_clamp {
            if !(c > 0.0) {
                return Err(SctlError::Config(format!("u_clamp must be > 0, got {c}")));
            }
        }
        if !(self.lqr_r > 0.0) || self.lqr_q.iter().any(|q| !(*q >= 0.0)) {
            return Err(SctlError::Config("lqr_r must be > 0 and lqr_q >= 0".into()));
        }
        if (self.excitation.dt - self.dt).abs() > 1e-12 {
            return Err(SctlError::Config(format!(
                "excitation.dt {} must equal dt {}",
                self.excitation.dt, self.dt
            )));
        }
        if self.excitation.duration + 1e-9 < self.t_final {
            return Err(SctlError::Config(format!(
                "excitation.duration {} shorter than t_final {}",
                self.excitation.duration, self.t_final
            )));
        }
        Ok(())
    }

    /// Environment steps per episode, ⌈T/dt⌉.
    pub fn n_steps(&self) -> usize {
        (self.t_final / self.dt).ceil() as usize
    }

    /// RL state dimension, 4l.
    pub fn state_dim(&self) -> usize {
        4 * self.history_len
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        let cfg: RunConfig = toml::from_str(&text)
            .map_err(|e| SctlError::Config(format!("{}: {e}", path.display())))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string_pretty(self).expect("config serializes")
    }

    /// FNV-1a over the canonical TOML rendering; identifies a run's settings.
    pub fn content_hash(&self) -> u64 {
        let mut h: u64 = 0xcbf2_9ce4_8422_2325;
        for b in self.to_toml().bytes() {
            h ^= b as u64;
            h = h.wrapping_mul(0x0000_0100_0000_01b3);
        }
        h
    }
}
