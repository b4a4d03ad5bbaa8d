//! Rollout storage and generalized advantage estimation.
//!
//! Transitions are stored time-major: row `t * n_envs + e`.

use ndarray::{Array1, Array2};

use crate::morphology::MOTORS;
use crate::tasks::{Observation, OBS_DIM};

/// Advantages and returns for one environment's transition sequence.
///
/// `next_values[t]` is the value of the state reached after transition `t`
/// (0 after a terminal state). `ends[t]` marks that transition `t + 1` does
/// not continue the same episode, so the recursion is cut there.
pub fn gae(
    rewards: &[f64],
    values: &[f64],
    next_values: &[f64],
    ends: &[bool],
    gamma: f64,
    lambda: f64,
) -> (Vec<f64>, Vec<f64>) {
    let n = rewards.len();
    let mut adv = vec![0.0; n];
    let mut carry = 0.0;
    for t in (0..n).rev() {
        if ends[t] {
            carry = 0.0;
        }
        let delta = rewards[t] + gamma * next_values[t] - values[t];
        carry = delta + gamma * lambda * carry;
        adv[t] = carry;
    }
    let returns = adv.iter().zip(values).map(|(a, v)| a + v).collect();
    (adv, returns)
}

#[derive(Debug, Clone)]
pub struct RolloutBuffer {
    pub n_envs: usize,
    pub n_steps: usize,
    pub obs: Array2<f64>,
    pub raw_actions: Array2<f64>,
    pub log_probs: Array1<f64>,
    pub rewards: Array1<f64>,
    pub values: Array1<f64>,
    /// Bootstrap value of the successor state of each transition.
    pub next_values: Array1<f64>,
    /// The episode ended (terminated or truncated) at this transition.
    pub ends: Vec<bool>,
    pub advantages: Array1<f64>,
    pub returns: Array1<f64>,
    len: usize,
}

impl RolloutBuffer {
    pub fn new(n_envs: usize, n_steps: usize) -> Self {
        let n = n_envs * n_steps;
        Self {
            n_envs,
            n_steps,
            obs: Array2::zeros((n, OBS_DIM)),
            raw_actions: Array2::zeros((n, MOTORS)),
            log_probs: Array1::zeros(n),
            rewards: Array1::zeros(n),
            values: Array1::zeros(n),
            next_values: Array1::zeros(n),
            ends: vec![false; n],
            advantages: Array1::zeros(n),
            returns: Array1::zeros(n),
            len: 0,
        }
    }

    pub fn capacity(&self) -> usize {
        self.n_envs * self.n_steps
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn is_full(&self) -> bool {
        self.len == self.capacity()
    }

    pub fn clear(&mut self) {
        self.len = 0;
    }

    pub fn index(&self, step: usize, env: usize) -> usize {
        step * self.n_envs + env
    }

    /// Appends the next transition in time-major order.
    #[allow(clippy::too_many_arguments)]
    pub fn push(
        &mut self,
        obs: &Observation,
        raw: &[f64; MOTORS],
        log_prob: f64,
        reward: f64,
        value: f64,
        next_value: f64,
        end: bool,
    ) {
        let i = self.len;
        assert!(i < self.capacity(), "rollout buffer overflow");
        self.obs.row_mut(i).iter_mut().zip(obs).for_each(|(d, s)| *d = *s);
        self.raw_actions.row_mut(i).iter_mut().zip(raw).for_each(|(d, s)| *d = *s);
        self.log_probs[i] = log_prob;
        self.rewards[i] = reward;
        self.values[i] = value;
        self.next_values[i] = next_value;
        self.ends[i] = end;
        self.len += 1;
    }

    /// Overwrites the bootstrap value of a stored transition.
    pub fn set_next_value(&mut self, step: usize, env: usize, v: f64) {
        let i = self.index(step, env);
        self.next_values[i] = v;
    }

    /// Fills advantages and returns, one environment at a time.
    pub fn compute_gae(&mut self, gamma: f64, lambda: f64) {
        assert!(self.is_full(), "buffer must be full");
        let mut r = vec![0.0; self.n_steps];
        let mut v = vec![0.0; self.n_steps];
        let mut nv = vec![0.0; self.n_steps];
        let mut ends = vec![false; self.n_steps];
        for e in 0..self.n_envs {
            for t in 0..self.n_steps {
                let i = self.index(t, e);
                r[t] = self.rewards[i];
                v[t] = self.values[i];
                nv[t] = self.next_values[i];
                ends[t] = self.ends[i];
            }
            let (adv, ret) = gae(&r, &v, &nv, &ends, gamma, lambda);
            for t in 0..self.n_steps {
                let i = self.index(t, e);
                self.advantages[i] = adv[t];
                self.returns[i] = ret[t];
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn three_step_episode() {
        let (adv, ret) = gae(&[1.0; 3], &[0.0; 3], &[0.0; 3], &[false, false, true], 1.0, 1.0);
        assert_eq!(adv, vec![3.0, 2.0, 1.0]);
        assert_eq!(ret, adv);
    }

    #[test]
    fn gamma_zero_is_one_step() {
        let r = [0.5, -1.0, 2.0];
        let v = [0.1, 0.2, 0.3];
        let (adv, _) = gae(&r, &v, &[9.0; 3], &[false; 3], 0.0, 0.95);
        for t in 0..3 {
            assert_eq!(adv[t], r[t] - v[t]);
        }
    }

    #[test]
    fn matches_brute_force_double_sum() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let n = 50;
        let r: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
        let v: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
        let mut nv: Vec<f64> = v[1..].to_vec();
        nv.push(0.0);
        let (g, l) = (0.99, 0.9);
        let (adv, _) = gae(&r, &v, &nv, &[false; 50], g, l);
        for t in 0..n {
            let brute: f64 = (t..n)
                .map(|k| {
                    let delta = r[k] + g * nv[k] - v[k];
                    (g * l).powi((k - t) as i32) * delta
                })
                .sum();
            assert!((adv[t] - brute).abs() < 1e-10);
        }
    }

    #[test]
    fn lambda_one_gives_return_minus_baseline() {
        let r = [1.0, 2.0, 3.0, 4.0];
        let v = [0.5, 0.1, -0.3, 0.2];
        let mut nv = v[1..].to_vec();
        nv.push(0.0);
        let (adv, _) = gae(&r, &v, &nv, &[false; 4], 1.0, 1.0);
        assert!((adv[0] - (10.0 - 0.5)).abs() < 1e-12);
        assert!((adv[2] - (7.0 + 0.3)).abs() < 1e-12);
    }

    #[test]
    fn buffer_cuts_at_episode_end() {
        let mut b = RolloutBuffer::new(1, 4);
        let o = [0.0; OBS_DIM];
        let raw = [0.0; MOTORS];
        // episode of two steps then a fresh one
        b.push(&o, &raw, 0.0, 1.0, 0.0, 0.0, false);
        b.push(&o, &raw, 0.0, 1.0, 0.0, 0.0, true);
        b.push(&o, &raw, 0.0, 1.0, 0.0, 0.0, false);
        b.push(&o, &raw, 0.0, 1.0, 0.0, 0.0, false);
        b.compute_gae(1.0, 1.0);
        assert_eq!(b.advantages.to_vec(), vec![2.0, 1.0, 2.0, 1.0]);
    }
}
