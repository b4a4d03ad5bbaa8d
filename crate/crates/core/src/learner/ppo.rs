//! Adam optimizer, gradient clipping and the epoch/minibatch update loop.

use ndarray::{Array1, Array2, Axis};
use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::learner::buffer::RolloutBuffer;
use crate::learner::policy::{loss_and_grad, Minibatch, Policy};
use crate::learner::{LearnerError, PPOConfig};

#[derive(Debug, Clone, PartialEq)]
pub struct Adam {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    m: Vec<f64>,
    v: Vec<f64>,
    t: u64,
}

impl Adam {
    pub fn new(n: usize, lr: f64) -> Self {
        Self {
            lr,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-5,
            m: vec![0.0; n],
            v: vec![0.0; n],
            t: 0,
        }
    }

    pub fn steps(&self) -> u64 {
        self.t
    }

    /// Descends along `grad`.
    pub fn step(&mut self, params: &mut [f64], grad: &[f64]) {
        self.t += 1;
        let c1 = 1.0 - self.beta1.powi(self.t as i32);
        let c2 = 1.0 - self.beta2.powi(self.t as i32);
        for i in 0..params.len() {
            let g = grad[i];
            self.m[i] = self.beta1 * self.m[i] + (1.0 - self.beta1) * g;
            self.v[i] = self.beta2 * self.v[i] + (1.0 - self.beta2) * g * g;
            let m_hat = self.m[i] / c1;
            let v_hat = self.v[i] / c2;
            params[i] -= self.lr * m_hat / (v_hat.sqrt() + self.eps);
        }
    }
}

/// Rescales `grad` so its global L2 norm is at most `max_norm`; returns the
/// norm before clipping.
pub fn clip_grad_norm(grad: &mut [f64], max_norm: f64) -> f64 {
    let norm = grad.iter().map(|g| g * g).sum::<f64>().sqrt();
    if norm > max_norm {
        let c = max_norm / (norm + 1e-6);
        grad.iter_mut().for_each(|g| *g *= c);
    }
    norm
}

/// Averages over every minibatch step of one update.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct UpdateStats {
    pub clip_fraction: f64,
    pub approx_kl: f64,
    pub policy_loss: f64,
    pub value_loss: f64,
    pub entropy: f64,
    pub grad_norm: f64,
    pub minibatches: usize,
}

fn gather(src: &Array2<f64>, idx: &[usize]) -> Array2<f64> {
    src.select(Axis(0), idx)
}

fn gather1(src: &Array1<f64>, idx: &[usize]) -> Array1<f64> {
    src.select(Axis(0), idx)
}

/// Several epochs of shuffled minibatch descent on the clipped surrogate.
/// A non-finite loss or gradient restores the parameters and optimizer state
/// from before the call.
pub fn ppo_update<R: Rng + ?Sized>(
    policy: &mut Policy,
    adam: &mut Adam,
    buffer: &RolloutBuffer,
    cfg: &PPOConfig,
    update: usize,
    rng: &mut R,
) -> Result<UpdateStats, LearnerError> {
    let saved_params = policy.params.clone();
    let saved_adam = adam.clone();
    let n = buffer.len();
    let k = cfg.coefficients();
    let mut idx: Vec<usize> = (0..n).collect();
    let mut stats = UpdateStats::default();
    for epoch in 0..cfg.n_epochs {
        idx.shuffle(rng);
        for chunk in idx.chunks(cfg.batch_size) {
            let obs = gather(&buffer.obs, chunk);
            let raw = gather(&buffer.raw_actions, chunk);
            let old = gather1(&buffer.log_probs, chunk);
            let adv = gather1(&buffer.advantages, chunk);
            let ret = gather1(&buffer.returns, chunk);
            let mb = Minibatch {
                obs: obs.view(),
                raw_actions: raw.view(),
                old_log_probs: old.view(),
                advantages: adv.view(),
                returns: ret.view(),
            };
            let (parts, mut grad) = loss_and_grad(policy, &mb, &k);
            if !parts.total.is_finite() || grad.iter().any(|g| !g.is_finite()) {
                policy.params = saved_params;
                *adam = saved_adam;
                return Err(LearnerError::NonFiniteLoss { update, epoch });
            }
            let norm = clip_grad_norm(&mut grad, cfg.max_grad_norm);
            adam.step(&mut policy.params, &grad);
            stats.clip_fraction += parts.clip_fraction;
            stats.approx_kl += parts.approx_kl;
            stats.policy_loss += parts.policy;
            stats.value_loss += parts.value;
            stats.entropy += parts.entropy;
            stats.grad_norm += norm;
            stats.minibatches += 1;
        }
    }
    let m = stats.minibatches.max(1) as f64;
    stats.clip_fraction /= m;
    stats.approx_kl /= m;
    stats.policy_loss /= m;
    stats.value_loss /= m;
    stats.entropy /= m;
    stats.grad_norm /= m;
    Ok(stats)
}
