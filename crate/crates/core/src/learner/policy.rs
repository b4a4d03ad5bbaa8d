//! Gaussian actor-critic policy and the clipped-surrogate loss with its
//! analytic gradient.

use ndarray::{Array1, Array2, ArrayView1, ArrayView2, Axis};
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::learner::nn::{forward_one, Mlp};
use crate::morphology::MOTORS;
use crate::tasks::{Action, Observation, OBS_DIM};

pub const HIDDEN: [usize; 3] = [64, 64, 64];
const LN_2PI: f64 = 1.8378770664093453;

/// Maps a raw Gaussian sample to a command in `[0, 1]`.
pub fn squash(raw: f64) -> f64 {
    (0.5 + 0.5 * raw).clamp(0.0, 1.0)
}

#[derive(Debug, Clone, PartialEq)]
pub struct Policy {
    pub params: Vec<f64>,
    actor: Mlp,
    critic: Mlp,
    log_std_at: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ActSample {
    pub action: Action,
    /// Unsquashed Gaussian sample.
    pub raw: [f64; MOTORS],
    /// Log-density of `raw` under the current Gaussian.
    pub log_prob: f64,
}

impl Policy {
    /// Zero weights and `log_std = 0`.
    pub fn zeros() -> Self {
        let sizes = |out| {
            let mut s = vec![OBS_DIM];
            s.extend(HIDDEN);
            s.push(out);
            s
        };
        let actor = Mlp::new(&sizes(MOTORS), 0);
        let log_std_at = actor.end();
        let critic = Mlp::new(&sizes(1), log_std_at + MOTORS);
        let len = critic.end();
        Self {
            params: vec![0.0; len],
            actor,
            critic,
            log_std_at,
        }
    }

    /// Orthogonal initialization: gain √2 on hidden layers, 0.01 on the action
    /// head, 1 on the value head.
    pub fn new<R: Rng + ?Sized>(rng: &mut R) -> Self {
        let mut p = Self::zeros();
        let s2 = std::f64::consts::SQRT_2;
        let mut params = std::mem::take(&mut p.params);
        p.actor.init_orthogonal(&mut params, &[s2, s2, s2, 0.01], rng);
        p.critic.init_orthogonal(&mut params, &[s2, s2, s2, 1.0], rng);
        p.params = params;
        p
    }

    pub fn from_params(params: Vec<f64>) -> Option<Self> {
        let mut p = Self::zeros();
        if params.len() != p.params.len() {
            return None;
        }
        p.params = params;
        Some(p)
    }

    pub fn num_params(&self) -> usize {
        self.params.len()
    }

    pub fn log_std(&self) -> &[f64] {
        &self.params[self.log_std_at..self.log_std_at + MOTORS]
    }

    pub fn log_std_mut(&mut self) -> &mut [f64] {
        &mut self.params[self.log_std_at..self.log_std_at + MOTORS]
    }

    pub fn log_std_range(&self) -> std::ops::Range<usize> {
        self.log_std_at..self.log_std_at + MOTORS
    }

    pub fn actor(&self) -> &Mlp {
        &self.actor
    }

    pub fn critic(&self) -> &Mlp {
        &self.critic
    }

    pub fn mean(&self, obs: &Observation) -> [f64; MOTORS] {
        let m = forward_one(&self.actor, &self.params, obs);
        std::array::from_fn(|i| m[i])
    }

    pub fn value(&self, obs: &Observation) -> f64 {
        forward_one(&self.critic, &self.params, obs)[0]
    }

    pub fn means(&self, obs: ArrayView2<f64>) -> Array2<f64> {
        self.actor.forward(&self.params, obs).layers.pop().expect("output")
    }

    pub fn values(&self, obs: ArrayView2<f64>) -> Array1<f64> {
        let out = self.critic.forward(&self.params, obs).layers.pop().expect("output");
        out.column(0).to_owned()
    }

    pub fn log_prob(&self, mean: &[f64], raw: &[f64]) -> f64 {
        let ls = self.log_std();
        let mut lp = 0.0;
        for i in 0..MOTORS {
            let z = (raw[i] - mean[i]) / ls[i].exp();
            lp += -0.5 * z * z - ls[i];
        }
        lp - 0.5 * MOTORS as f64 * LN_2PI
    }

    /// Samples (or takes the mean of) the action distribution given the
    /// actor's mean output.
    pub fn sample_from_mean<R: Rng + ?Sized>(
        &self,
        mean: &[f64],
        deterministic: bool,
        rng: &mut R,
    ) -> ActSample {
        let ls = self.log_std();
        let raw: [f64; MOTORS] = std::array::from_fn(|i| {
            if deterministic {
                mean[i]
            } else {
                mean[i] + ls[i].exp() * rng.sample::<f64, _>(StandardNormal)
            }
        });
        ActSample {
            action: raw.map(squash),
            raw,
            log_prob: self.log_prob(mean, &raw),
        }
    }

    pub fn act<R: Rng + ?Sized>(&self, obs: &Observation, deterministic: bool, rng: &mut R) -> ActSample {
        let mean = self.mean(obs);
        self.sample_from_mean(&mean, deterministic, rng)
    }

    /// Deterministic controller suitable for fitness evaluation.
    pub fn controller(&self) -> impl FnMut(&Observation) -> Action + '_ {
        move |obs| self.mean(obs).map(squash)
    }

    pub fn entropy(&self) -> f64 {
        self.log_std().iter().sum::<f64>() + 0.5 * MOTORS as f64 * (1.0 + LN_2PI)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LossCoefficients {
    pub clip: f64,
    pub vf_coef: f64,
    pub ent_coef: f64,
}

/// One optimization batch.
pub struct Minibatch<'a> {
    pub obs: ArrayView2<'a, f64>,
    pub raw_actions: ArrayView2<'a, f64>,
    pub old_log_probs: ArrayView1<'a, f64>,
    pub advantages: ArrayView1<'a, f64>,
    pub returns: ArrayView1<'a, f64>,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct LossParts {
    pub total: f64,
    pub policy: f64,
    pub value: f64,
    pub entropy: f64,
    pub clip_fraction: f64,
    pub approx_kl: f64,
    /// Mean of the (normalized) advantages seen by the surrogate.
    pub surrogate_mean: f64,
}

/// Zero-mean, unit (population) variance; batches of one are left as is.
pub fn normalize_advantages(adv: ArrayView1<f64>) -> Array1<f64> {
    let n = adv.len();
    if n < 2 {
        return adv.to_owned();
    }
    let mean = adv.sum() / n as f64;
    let var = adv.iter().map(|a| (a - mean) * (a - mean)).sum::<f64>() / n as f64;
    let std = var.sqrt();
    adv.mapv(|a| (a - mean) / (std + 1e-8))
}

/// `L = -mean(min(ρÂ, clip(ρ)Â)) + c_v·mean((R - V)²) - c_e·H`, with `Â` the
/// batch-normalized advantages, and its gradient with respect to every
/// policy parameter.
pub fn loss_and_grad(policy: &Policy, mb: &Minibatch, k: &LossCoefficients) -> (LossParts, Vec<f64>) {
    let b = mb.obs.nrows();
    let bf = b as f64;
    let params = &policy.params;
    let adv = normalize_advantages(mb.advantages);
    let ls: Vec<f64> = policy.log_std().to_vec();
    let inv_var: Vec<f64> = ls.iter().map(|l| (-2.0 * l).exp()).collect();

    let actor_acts = policy.actor.forward(params, mb.obs);
    let mean = actor_acts.output();
    let critic_acts = policy.critic.forward(params, mb.obs);
    let values = critic_acts.output().column(0);

    let mut grad = vec![0.0; params.len()];
    let mut d_mean = Array2::<f64>::zeros((b, MOTORS));
    let mut d_log_std = vec![0.0; MOTORS];
    let mut policy_loss = 0.0;
    let mut clipped = 0usize;
    let mut kl = 0.0;
    let norm_const = ls.iter().sum::<f64>() + 0.5 * MOTORS as f64 * LN_2PI;

    for i in 0..b {
        let mut quad = 0.0;
        for j in 0..MOTORS {
            let d = mb.raw_actions[(i, j)] - mean[(i, j)];
            quad += d * d * inv_var[j];
        }
        let log_prob = -0.5 * quad - norm_const;
        let log_ratio = log_prob - mb.old_log_probs[i];
        let ratio = log_ratio.exp();
        let a = adv[i];
        let unclipped = ratio * a;
        let clipped_ratio = ratio.clamp(1.0 - k.clip, 1.0 + k.clip);
        let clipped_obj = clipped_ratio * a;
        policy_loss -= unclipped.min(clipped_obj);
        if (ratio - 1.0).abs() > k.clip {
            clipped += 1;
        }
        kl += (ratio - 1.0) - log_ratio;

        // ∂(-min)/∂ρ: the unclipped branch carries the gradient whenever it
        // is the selected minimum
        let d_ratio = if unclipped <= clipped_obj { -a / bf } else { 0.0 };
        let d_logp = d_ratio * ratio;
        if d_logp != 0.0 {
            for j in 0..MOTORS {
                let d = mb.raw_actions[(i, j)] - mean[(i, j)];
                d_mean[(i, j)] = d_logp * d * inv_var[j];
                d_log_std[j] += d_logp * (d * d * inv_var[j] - 1.0);
            }
        }
    }
    policy_loss /= bf;

    let mut value_loss = 0.0;
    let mut d_values = Array2::<f64>::zeros((b, 1));
    for i in 0..b {
        let e = values[i] - mb.returns[i];
        value_loss += e * e;
        d_values[(i, 0)] = k.vf_coef * 2.0 * e / bf;
    }
    value_loss /= bf;

    let entropy = policy.entropy();
    for d in d_log_std.iter_mut() {
        *d -= k.ent_coef;
    }

    policy.actor.backward(params, &actor_acts, d_mean, &mut grad);
    policy.critic.backward(params, &critic_acts, d_values, &mut grad);
    for (g, d) in grad[policy.log_std_range()].iter_mut().zip(d_log_std) {
        *g += d;
    }

    let parts = LossParts {
        total: policy_loss + k.vf_coef * value_loss - k.ent_coef * entropy,
        policy: policy_loss,
        value: value_loss,
        entropy,
        clip_fraction: clipped as f64 / bf,
        approx_kl: kl / bf,
        surrogate_mean: adv.sum() / bf,
    };
    (parts, grad)
}

/// Loss only, for finite-difference checks.
pub fn loss(policy: &Policy, mb: &Minibatch, k: &LossCoefficients) -> f64 {
    loss_and_grad(policy, mb, k).0.total
}

/// Log-probabilities of stored raw actions under the current policy.
pub fn log_probs(policy: &Policy, obs: ArrayView2<f64>, raw: ArrayView2<f64>) -> Array1<f64> {
    let means = policy.means(obs);
    means
        .axis_iter(Axis(0))
        .zip(raw.axis_iter(Axis(0)))
        .map(|(m, r)| policy.log_prob(m.as_slice().expect("row"), r.as_slice().expect("row")))
        .collect()
}
