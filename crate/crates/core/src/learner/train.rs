//! Vectorized rollout collection alternating with PPO updates.

use log::debug;
use ndarray::Array2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::learner::buffer::RolloutBuffer;
use crate::learner::policy::Policy;
use crate::learner::ppo::{ppo_update, Adam, UpdateStats};
use crate::learner::{LearnerError, PPOConfig, RewardTrace};
use crate::morphology::Phenotype;
use crate::sim::PhysicalConstants;
use crate::tasks::{Observation, StepStatus, TaskEnv, Track, OBS_DIM};

#[derive(Debug, Clone)]
pub struct TrainOutput {
    pub policy: Policy,
    pub trace: RewardTrace,
    pub updates: Vec<UpdateStats>,
    pub timesteps: u64,
    /// Word position of the generator after training.
    pub rng_word_pos: u128,
}

fn obs_matrix(obs: &[Observation]) -> Array2<f64> {
    Array2::from_shape_fn((obs.len(), OBS_DIM), |(i, j)| obs[i][j])
}

/// `n_envs` environments stepped in lockstep, with episode bookkeeping.
pub struct VecEnv {
    pub envs: Vec<TaskEnv>,
    pub obs: Vec<Observation>,
    /// Environment steps taken so far across all instances.
    pub timestep: u64,
    pub trace: RewardTrace,
}

impl VecEnv {
    pub fn new(phenotype: &Phenotype, track: &Track, phys: &PhysicalConstants, cfg: &PPOConfig) -> Self {
        let max_steps = (cfg.episode_seconds / phys.dt).round().max(1.0) as usize;
        let mut envs: Vec<TaskEnv> = (0..cfg.n_envs)
            .map(|_| TaskEnv::new(track.clone(), phenotype.clone(), phys.clone(), max_steps))
            .collect();
        let obs = envs.iter_mut().map(TaskEnv::reset).collect();
        Self {
            envs,
            obs,
            timestep: 0,
            trace: RewardTrace::default(),
        }
    }

    /// Fills `buffer` with one rollout of `buffer.n_steps` lockstep steps.
    /// Successor values are bootstrapped: 0 after a crash, the critic's value
    /// of the final observation after a time-limit cut.
    pub fn collect<R: Rng + ?Sized>(&mut self, policy: &Policy, buffer: &mut RolloutBuffer, rng: &mut R) {
        let n_envs = self.envs.len();
        assert_eq!(buffer.n_envs, n_envs);
        buffer.clear();
        for t in 0..buffer.n_steps {
            let x = obs_matrix(&self.obs);
            let means = policy.means(x.view());
            let values = policy.values(x.view());
            let samples: Vec<_> = (0..n_envs)
                .map(|e| policy.sample_from_mean(means.row(e).as_slice().expect("row"), false, rng))
                .collect();
            let results: Vec<_> = self
                .envs
                .par_iter_mut()
                .zip(samples.par_iter())
                .map(|(env, s)| {
                    let r = env.step(&s.action);
                    (r, env.episode_return)
                })
                .collect();

            let mut truncated = Vec::new();
            for (e, (r, episode_return)) in results.into_iter().enumerate() {
                let s = &samples[e];
                buffer.push(&self.obs[e], &s.raw, s.log_prob, r.reward, values[e], 0.0, r.done());
                let step_index = self.timestep + e as u64 + 1;
                match r.status {
                    StepStatus::Running => self.obs[e] = r.observation,
                    StepStatus::Terminated => {
                        self.trace.push(episode_return, step_index);
                        self.obs[e] = self.envs[e].reset();
                    }
                    StepStatus::Truncated => {
                        self.trace.push(episode_return, step_index);
                        truncated.push((e, r.observation));
                        self.obs[e] = self.envs[e].reset();
                    }
                }
            }
            self.timestep += n_envs as u64;
            if !truncated.is_empty() {
                let finals: Vec<Observation> = truncated.iter().map(|(_, o)| *o).collect();
                let v = policy.values(obs_matrix(&finals).view());
                for (k, (e, _)) in truncated.iter().enumerate() {
                    buffer.set_next_value(t, *e, v[k]);
                }
            }
            if t > 0 {
                for (e, v) in values.iter().enumerate() {
                    let prev = buffer.index(t - 1, e);
                    if !buffer.ends[prev] {
                        buffer.next_values[prev] = *v;
                    }
                }
            }
        }
        let last = buffer.n_steps - 1;
        let v = policy.values(obs_matrix(&self.obs).view());
        for (e, v) in v.iter().enumerate() {
            let i = buffer.index(last, e);
            if !buffer.ends[i] {
                buffer.next_values[i] = *v;
            }
        }
    }
}

/// Trains a fresh policy on `track` for `cfg.total_timesteps` (rounded up to
/// whole rollouts). Everything random is drawn from one generator seeded with
/// `seed`, so the result is reproducible.
pub fn train(
    phenotype: &Phenotype,
    track: &Track,
    phys: &PhysicalConstants,
    cfg: &PPOConfig,
    seed: u64,
) -> Result<TrainOutput, LearnerError> {
    cfg.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut policy = Policy::new(&mut rng);
    let mut adam = Adam::new(policy.num_params(), cfg.lr);
    let mut venv = VecEnv::new(phenotype, track, phys, cfg);
    let mut buffer = RolloutBuffer::new(cfg.n_envs, cfg.n_steps);
    let mut updates = Vec::new();

    for update in 0..cfg.num_updates() {
        venv.collect(&policy, &mut buffer, &mut rng);
        buffer.compute_gae(cfg.gamma, cfg.gae_lambda);
        let stats = ppo_update(&mut policy, &mut adam, &buffer, cfg, update, &mut rng)?;
        debug!(
            "update {update}: episodes {} kl {:.4} clip {:.3} vloss {:.4}",
            venv.trace.len(),
            stats.approx_kl,
            stats.clip_fraction,
            stats.value_loss
        );
        updates.push(stats);
    }

    Ok(TrainOutput {
        policy,
        trace: venv.trace,
        updates,
        timesteps: venv.timestep,
        rng_word_pos: rng.get_word_pos(),
    })
}
