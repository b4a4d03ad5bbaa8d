//! Proximal policy optimization for a single morphology.

pub mod buffer;
pub mod nn;
pub mod policy;
pub mod ppo;
pub mod train;

use std::io::{Read, Write};

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use buffer::{gae, RolloutBuffer};
pub use policy::{loss_and_grad, squash, ActSample, LossCoefficients, LossParts, Minibatch, Policy};
pub use ppo::{clip_grad_norm, ppo_update, Adam, UpdateStats};
pub use train::{train, TrainOutput, VecEnv};

pub const CHECKPOINT_FORMAT: &str = "hexevo.policy";
pub const CHECKPOINT_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum LearnerError {
    #[error("invalid PPO configuration: {0}")]
    BadConfig(String),
    #[error("non-finite loss in update {update}, epoch {epoch}; parameters restored")]
    NonFiniteLoss { update: usize, epoch: usize },
    #[error("checkpoint: {0}")]
    Checkpoint(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PPOConfig {
    pub gamma: f64,
    pub gae_lambda: f64,
    pub clip: f64,
    pub lr: f64,
    /// Steps per environment per update.
    pub n_steps: usize,
    pub batch_size: usize,
    pub n_epochs: usize,
    pub ent_coef: f64,
    pub vf_coef: f64,
    pub max_grad_norm: f64,
    pub n_envs: usize,
    pub total_timesteps: u64,
    /// Training episode length in seconds.
    pub episode_seconds: f64,
}

impl Default for PPOConfig {
    fn default() -> Self {
        Self {
            gamma: 0.999,
            gae_lambda: 0.95,
            clip: 0.2,
            lr: 3e-4,
            n_steps: 1000,
            batch_size: 5000,
            n_epochs: 10,
            ent_coef: 0.0,
            vf_coef: 0.5,
            max_grad_norm: 0.5,
            n_envs: 100,
            total_timesteps: 250_000_000,
            episode_seconds: 12.0,
        }
    }
}

impl PPOConfig {
    pub fn with_budget(mut self, total_timesteps: u64) -> Self {
        self.total_timesteps = total_timesteps;
        self
    }

    pub fn rollout_size(&self) -> usize {
        self.n_steps * self.n_envs
    }

    /// Smallest number of full rollouts whose steps cover the budget.
    pub fn num_updates(&self) -> usize {
        let per = self.rollout_size() as u64;
        self.total_timesteps.div_ceil(per) as usize
    }

    /// Environment steps actually consumed.
    pub fn consumed_timesteps(&self) -> u64 {
        self.num_updates() as u64 * self.rollout_size() as u64
    }

    pub fn coefficients(&self) -> LossCoefficients {
        LossCoefficients {
            clip: self.clip,
            vf_coef: self.vf_coef,
            ent_coef: self.ent_coef,
        }
    }

    pub fn validate(&self) -> Result<(), LearnerError> {
        let bad = |m: &str| Err(LearnerError::BadConfig(m.to_string()));
        if !(self.gamma > 0.0 && self.gamma <= 1.0) {
            return bad("gamma must be in (0, 1]");
        }
        if !(0.0..=1.0).contains(&self.gae_lambda) {
            return bad("gae_lambda must be in [0, 1]");
        }
        if !(self.clip > 0.0) {
            return bad("clip must be positive");
        }
        if !(self.lr > 0.0 && self.lr.is_finite()) {
            return bad("lr must be positive");
        }
        if self.n_steps == 0 || self.n_envs == 0 || self.batch_size == 0 || self.n_epochs == 0 {
            return bad("n_steps, n_envs, batch_size and n_epochs must be positive");
        }
        if !self.rollout_size().is_multiple_of(self.batch_size) {
            return bad("batch_size must divide n_steps * n_envs");
        }
        if !(self.max_grad_norm > 0.0) {
            return bad("max_grad_norm must be positive");
        }
        if !(self.vf_coef >= 0.0 && self.ent_coef >= 0.0) {
            return bad("loss coefficients must be non-negative");
        }
        if !(self.episode_seconds > 0.0) {
            return bad("episode_seconds must be positive");
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpisodeRecord {
    pub episode: u64,
    pub reward: f64,
    /// Environment steps consumed when the episode ended.
    pub timestep: u64,
}

/// Total reward of every finished training episode, in completion order.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct RewardTrace {
    pub episodes: Vec<EpisodeRecord>,
}

impl RewardTrace {
    pub fn push(&mut self, reward: f64, timestep: u64) {
        let episode = self.episodes.len() as u64;
        self.episodes.push(EpisodeRecord {
            episode,
            reward,
            timestep,
        });
    }

    pub fn rewards(&self) -> Vec<f64> {
        self.episodes.iter().map(|e| e.reward).collect()
    }

    pub fn len(&self) -> usize {
        self.episodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.episodes.is_empty()
    }

    pub fn write_csv<W: Write>(&self, out: W) -> Result<(), LearnerError> {
        let mut w = csv::Writer::from_writer(out);
        for e in &self.episodes {
            w.serialize(e)?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn read_csv<R: Read>(input: R) -> Result<Self, LearnerError> {
        let mut r = csv::Reader::from_reader(input);
        let episodes = r.deserialize().collect::<Result<Vec<EpisodeRecord>, _>>()?;
        if episodes.windows(2).any(|w| w[1].timestep <= w[0].timestep) {
            return Err(LearnerError::Checkpoint("trace timesteps not increasing".into()));
        }
        Ok(Self { episodes })
    }
}

/// Serialized policy parameters with the configuration that produced them.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PolicyCheckpoint {
    pub format: String,
    pub version: u32,
    pub config: PPOConfig,
    pub seed: u64,
    /// ChaCha8 word position of the training generator at the end of training.
    pub rng_word_pos: String,
    pub params: Vec<f64>,
}

impl PolicyCheckpoint {
    pub fn new(policy: &Policy, config: &PPOConfig, seed: u64, rng_word_pos: u128) -> Self {
        Self {
            format: CHECKPOINT_FORMAT.into(),
            version: CHECKPOINT_VERSION,
            config: config.clone(),
            seed,
            rng_word_pos: rng_word_pos.to_string(),
            params: policy.params.clone(),
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("checkpoint serializes")
    }

    pub fn from_json(text: &str) -> Result<Self, LearnerError> {
        let c: Self = serde_json::from_str(text).map_err(|e| LearnerError::Checkpoint(e.to_string()))?;
        if c.format != CHECKPOINT_FORMAT || c.version != CHECKPOINT_VERSION {
            return Err(LearnerError::Checkpoint(format!(
                "unsupported checkpoint {} v{}",
                c.format, c.version
            )));
        }
        c.rng_word_pos
            .parse::<u128>()
            .map_err(|e| LearnerError::Checkpoint(format!("rng_word_pos: {e}")))?;
        Ok(c)
    }

    pub fn policy(&self) -> Result<Policy, LearnerError> {
        Policy::from_params(self.params.clone())
            .ok_or_else(|| LearnerError::Checkpoint("parameter count mismatch".into()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_config_is_valid() {
        let c = PPOConfig::default();
        c.validate().unwrap();
        assert_eq!(c.rollout_size() / c.batch_size, 20);
        assert_eq!(c.num_updates(), 2500);
    }

    #[test]
    fn budget_rounds_up_to_rollouts() {
        let c = PPOConfig::default();
        assert_eq!(c.clone().with_budget(100_000).num_updates(), 1);
        assert_eq!(c.clone().with_budget(100_001).consumed_timesteps(), 200_000);
        assert_eq!(c.with_budget(0).num_updates(), 0);
    }

    #[test]
    fn batch_must_divide_rollout() {
        let c = PPOConfig {
            batch_size: 3000,
            ..PPOConfig::default()
        };
        assert!(c.validate().is_err());
    }

    #[test]
    fn trace_csv_round_trip() {
        let mut t = RewardTrace::default();
        t.push(1.25, 10);
        t.push(-0.1 / 3.0, 25);
        let mut buf = Vec::new();
        t.write_csv(&mut buf).unwrap();
        assert!(String::from_utf8_lossy(&buf).starts_with("episode,reward,timestep"));
        assert_eq!(RewardTrace::read_csv(buf.as_slice()).unwrap(), t);
    }

    #[test]
    fn checkpoint_round_trip() {
        let p = Policy::zeros();
        let c = PolicyCheckpoint::new(&p, &PPOConfig::default(), 7, u128::MAX);
        let back = PolicyCheckpoint::from_json(&c.to_json()).unwrap();
        assert_eq!(back, c);
        assert_eq!(back.policy().unwrap(), p);
    }
}
