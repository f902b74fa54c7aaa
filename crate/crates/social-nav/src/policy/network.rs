//! The recurrent Gaussian navigation policy.
//!
//! Architecture: a fixed diagonal input scaling, a 2-layer LSTM feature
//! extractor, an actor trunk (two hidden layers) ending in separate linear
//! heads for the action mean and for `log(sigma)`, and a critic trunk (two
//! hidden layers) ending in a scalar value head.
//!
//! Dropout placement and the two-pass rule: stochastic masks can sit between
//! the LSTM layers, after the second LSTM layer, and after each actor hidden
//! layer. The critic and the recurrent state are never exposed to them — each
//! forward runs a mask-free extractor pass whose outputs feed the critic and
//! become the next recurrent state, and (only when dropout is active) a
//! second masked pass of layer 2 that produces the features the actor
//! consumes. Toggling dropout therefore never changes the state value or the
//! recurrent state stream, while the actor heads and reported features do
//! vary probe to probe — which is exactly what Monte-Carlo dropout
//! uncertainty estimation needs.
//!
//! The `log(sigma)` head is clamped elementwise before use, so the action
//! variance `sigma^2 = exp(2 * clamp(raw))` is confined to
//! `[exp(2 * clamp_min), exp(2 * clamp_max)]` for any input and any weights.

use super::layers::{sample_dropout_mask, Linear, LstmCache, LstmCell};
use rand::Rng;
use rand_chacha::ChaCha12Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

pub const ACTION_DIM: usize = 2;
/// Elementwise bounds on the `log(sigma)` head output.
pub const LOG_SIGMA_MIN: f64 = -20.0;
pub const LOG_SIGMA_MAX: f64 = 0.25;
/// Dropout rate while training (rollout collection and gradient updates).
pub const DROPOUT_TRAIN: f64 = 0.1;
/// Dropout rate for Monte-Carlo uncertainty probes.
pub const DROPOUT_TEST: f64 = 0.5;

/// Network dimensions; the feature dimension equals `lstm_hidden`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Architecture {
    pub obs_dim: usize,
    pub lstm_hidden: usize,
    pub actor_hidden: usize,
    pub action_dim: usize,
}

impl Architecture {
    pub fn navigation(obs_dim: usize) -> Self {
        Architecture {
            obs_dim,
            lstm_hidden: 64,
            actor_hidden: 64,
            action_dim: ACTION_DIM,
        }
    }

    pub fn feature_dim(&self) -> usize {
        self.lstm_hidden
    }
}

/// Dropout setting for one forward pass.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DropoutMode {
    /// No masks; features equal the clean extractor output.
    Off,
    /// Training-rate masks.
    Train,
    /// Test-rate masks (Monte-Carlo probes).
    Test,
}

/// Recurrent state of the two LSTM layers (always from the mask-free pass).
#[derive(Debug, Clone, PartialEq)]
pub struct LstmState {
    pub h1: Vec<f64>,
    pub c1: Vec<f64>,
    pub h2: Vec<f64>,
    pub c2: Vec<f64>,
}

impl LstmState {
    pub fn zeros(arch: &Architecture) -> Self {
        let h = arch.lstm_hidden;
        LstmState {
            h1: vec![0.0; h],
            c1: vec![0.0; h],
            h2: vec![0.0; h],
            c2: vec![0.0; h],
        }
    }
}

/// Multiplicative inverted-dropout masks for the four dropout sites.
#[derive(Debug, Clone, PartialEq)]
pub struct DropoutMasks {
    pub extractor_mid: Vec<f64>,
    pub extractor_out: Vec<f64>,
    pub actor_mid1: Vec<f64>,
    pub actor_mid2: Vec<f64>,
}

/// Everything one forward pass produces.
#[derive(Debug, Clone)]
pub struct PolicyOutput {
    pub action_mean: [f64; 2],
    /// Clamped `log(sigma)` per action dimension.
    pub action_log_sigma: [f64; 2],
    /// `exp(2 * log_sigma)`; strictly positive and at most `exp(2 * clamp_max)`.
    pub action_variance: [f64; 2],
    pub state_value: f64,
    /// Features the actor consumed (post-dropout when masks were active).
    pub features: Vec<f64>,
    /// Clean-pass recurrent state to carry into the next step.
    pub next_state: LstmState,
}

impl PolicyOutput {
    pub fn sigma(&self) -> [f64; 2] {
        [self.action_log_sigma[0].exp(), self.action_log_sigma[1].exp()]
    }

    /// Draw an action (or take the mean) and return it with its log-density.
    pub fn sample_action(&self, deterministic: bool, rng: &mut impl Rng) -> ([f64; 2], f64) {
        let sigma = self.sigma();
        let action = if deterministic {
            self.action_mean
        } else {
            let z0: f64 = rng.sample(StandardNormal);
            let z1: f64 = rng.sample(StandardNormal);
            [
                self.action_mean[0] + sigma[0] * z0,
                self.action_mean[1] + sigma[1] * z1,
            ]
        };
        (action, self.log_prob(action))
    }

    /// Log-density of `action` under the diagonal Gaussian.
    pub fn log_prob(&self, action: [f64; 2]) -> f64 {
        let sigma = self.sigma();
        let mut lp = 0.0;
        for d in 0..2 {
            let z = (action[d] - self.action_mean[d]) / sigma[d];
            lp += -0.5 * z * z - self.action_log_sigma[d] - 0.5 * (2.0 * std::f64::consts::PI).ln();
        }
        lp
    }

    /// Differential entropy of the diagonal Gaussian.
    pub fn entropy(&self) -> f64 {
        let half_log_2pe = 0.5 * (2.0 * std::f64::consts::PI * std::f64::consts::E).ln();
        2.0 * half_log_2pe + self.action_log_sigma[0] + self.action_log_sigma[1]
    }
}

/// Forward cache for one observation; everything `backward` needs.
#[derive(Debug, Clone)]
pub struct ForwardCache {
    l1: LstmCache,
    l2_clean: LstmCache,
    l2_masked: Option<LstmCache>,
    masks: Option<DropoutMasks>,
    h2_clean: Vec<f64>,
    features: Vec<f64>,
    t1: Vec<f64>,
    t1d: Vec<f64>,
    t2: Vec<f64>,
    t2d: Vec<f64>,
    k1: Vec<f64>,
    k2: Vec<f64>,
    raw_log_sigma: [f64; 2],
}

/// Upstream loss gradients with respect to the network outputs.
/// `d_log_sigma` is taken with respect to the *clamped* log-sigma; the
/// backward pass zeroes it wherever the clamp saturated.
#[derive(Debug, Clone, Copy, Default)]
pub struct OutputGrads {
    pub d_mean: [f64; 2],
    pub d_log_sigma: [f64; 2],
    pub d_value: f64,
}

/// Parameter gradients, same shapes as the policy's layers.
#[derive(Debug, Clone)]
pub struct PolicyGrads {
    pub lstm1: LstmCell,
    pub lstm2: LstmCell,
    pub actor1: Linear,
    pub actor2: Linear,
    pub mean_head: Linear,
    pub log_sigma_head: Linear,
    pub critic1: Linear,
    pub critic2: Linear,
    pub value_head: Linear,
}

/// The policy network. Serializable in full (checkpoints embed it).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OdvPolicy {
    pub arch: Architecture,
    /// Fixed (non-trained) diagonal input scaling.
    pub input_scale: Vec<f64>,
    pub lstm1: LstmCell,
    pub lstm2: LstmCell,
    pub actor1: Linear,
    pub actor2: Linear,
    pub mean_head: Linear,
    pub log_sigma_head: Linear,
    pub critic1: Linear,
    pub critic2: Linear,
    pub value_head: Linear,
    pub log_sigma_clamp: (f64, f64),
    pub dropout_train: f64,
    pub dropout_test: f64,
}

fn tanh_vec(mut v: Vec<f64>) -> Vec<f64> {
    for x in &mut v {
        *x = x.tanh();
    }
    v
}

impl OdvPolicy {
    /// Fresh policy with unit input scaling.
    pub fn new(arch: Architecture, seed: u64) -> Self {
        Self::with_input_scale(arch, vec![1.0; arch.obs_dim], seed)
    }

    pub fn with_input_scale(arch: Architecture, input_scale: Vec<f64>, seed: u64) -> Self {
        assert_eq!(input_scale.len(), arch.obs_dim);
        assert_eq!(arch.action_dim, ACTION_DIM);
        use rand::SeedableRng;
        let rng = &mut ChaCha12Rng::seed_from_u64(seed);
        let h = arch.lstm_hidden;
        let a = arch.actor_hidden;
        let sqrt2 = std::f64::consts::SQRT_2;
        OdvPolicy {
            arch,
            input_scale,
            lstm1: LstmCell::uniform(h, arch.obs_dim, rng),
            lstm2: LstmCell::uniform(h, h, rng),
            actor1: Linear::orthogonal(a, h, sqrt2, rng),
            actor2: Linear::orthogonal(a, a, sqrt2, rng),
            mean_head: Linear::orthogonal(ACTION_DIM, a, 0.01, rng),
            log_sigma_head: Linear::orthogonal(ACTION_DIM, a, 0.01, rng),
            critic1: Linear::orthogonal(a, h, sqrt2, rng),
            critic2: Linear::orthogonal(a, a, sqrt2, rng),
            value_head: Linear::orthogonal(1, a, 1.0, rng),
            log_sigma_clamp: (LOG_SIGMA_MIN, LOG_SIGMA_MAX),
            dropout_train: DROPOUT_TRAIN,
            dropout_test: DROPOUT_TEST,
        }
    }

    /// Policy for the navigation observation layout (see
    /// [`crate::sim::Observation`]): distances and positions scaled by 0.1,
    /// angles by 1/pi, speeds by 0.5, radii unscaled.
    pub fn for_navigation(max_observed_humans: usize, seed: u64) -> Self {
        let obs_dim = crate::sim::observation_dim(max_observed_humans);
        let arch = Architecture::navigation(obs_dim);
        Self::with_input_scale(arch, nav_input_scale(max_observed_humans), seed)
    }

    pub fn dropout_rate(&self, mode: DropoutMode) -> f64 {
        match mode {
            DropoutMode::Off => 0.0,
            DropoutMode::Train => self.dropout_train,
            DropoutMode::Test => self.dropout_test,
        }
    }

    /// Fresh masks for `mode`; `None` when the mode disables dropout.
    pub fn sample_masks(&self, mode: DropoutMode, rng: &mut impl Rng) -> Option<DropoutMasks> {
        let p = self.dropout_rate(mode);
        if p == 0.0 {
            return None;
        }
        let h = self.arch.lstm_hidden;
        let a = self.arch.actor_hidden;
        Some(DropoutMasks {
            extractor_mid: sample_dropout_mask(h, p, rng),
            extractor_out: sample_dropout_mask(h, p, rng),
            actor_mid1: sample_dropout_mask(a, p, rng),
            actor_mid2: sample_dropout_mask(a, p, rng),
        })
    }

    /// Elementwise clamp applied to the raw `log(sigma)` head output.
    pub fn clamp_log_sigma(&self, raw: f64) -> f64 {
        raw.clamp(self.log_sigma_clamp.0, self.log_sigma_clamp.1)
    }

    /// Forward pass with freshly sampled masks for `mode`.
    pub fn forward(
        &self,
        obs: &[f64],
        state: &LstmState,
        mode: DropoutMode,
        rng: &mut impl Rng,
    ) -> PolicyOutput {
        let masks = self.sample_masks(mode, rng);
        self.forward_cached(obs, state, masks.as_ref()).0
    }

    /// Deterministic forward pass under explicit masks (`None` = no dropout),
    /// returning the cache needed by [`OdvPolicy::backward`].
    pub fn forward_cached(
        &self,
        obs: &[f64],
        state: &LstmState,
        masks: Option<&DropoutMasks>,
    ) -> (PolicyOutput, ForwardCache) {
        assert_eq!(obs.len(), self.arch.obs_dim, "observation dimension mismatch");
        let x: Vec<f64> = obs
            .iter()
            .zip(&self.input_scale)
            .map(|(o, s)| o * s)
            .collect();

        // Mask-free extractor pass: recurrent state and critic input.
        let (h1, c1, l1_cache) = self.lstm1.forward(&x, &state.h1, &state.c1);
        let (h2_clean, c2_clean, l2_clean_cache) = self.lstm2.forward(&h1, &state.h2, &state.c2);

        // Masked pass of layer 2 (same previous state, dropped input) when
        // dropout is active; its output is what the actor sees.
        let (features, l2_masked_cache) = match masks {
            Some(m) => {
                let h1d = super::linalg::hadamard(&h1, &m.extractor_mid);
                let (h2m, _c2m, cache) = self.lstm2.forward(&h1d, &state.h2, &state.c2);
                (super::linalg::hadamard(&h2m, &m.extractor_out), Some(cache))
            }
            None => (h2_clean.clone(), None),
        };

        // Actor trunk.
        let t1 = tanh_vec(self.actor1.forward(&features));
        let t1d = match masks {
            Some(m) => super::linalg::hadamard(&t1, &m.actor_mid1),
            None => t1.clone(),
        };
        let t2 = tanh_vec(self.actor2.forward(&t1d));
        let t2d = match masks {
            Some(m) => super::linalg::hadamard(&t2, &m.actor_mid2),
            None => t2.clone(),
        };
        let mean = self.mean_head.forward(&t2d);
        let raw_ls = self.log_sigma_head.forward(&t2d);
        let ls = [self.clamp_log_sigma(raw_ls[0]), self.clamp_log_sigma(raw_ls[1])];

        // Critic trunk (clean features only).
        let k1 = tanh_vec(self.critic1.forward(&h2_clean));
        let k2 = tanh_vec(self.critic2.forward(&k1));
        let value = self.value_head.forward(&k2)[0];

        let output = PolicyOutput {
            action_mean: [mean[0], mean[1]],
            action_log_sigma: ls,
            action_variance: [(2.0 * ls[0]).exp(), (2.0 * ls[1]).exp()],
            state_value: value,
            features: features.clone(),
            next_state: LstmState {
                h1: h1.clone(),
                c1,
                h2: h2_clean.clone(),
                c2: c2_clean,
            },
        };
        let cache = ForwardCache {
            l1: l1_cache,
            l2_clean: l2_clean_cache,
            l2_masked: l2_masked_cache,
            masks: masks.cloned(),
            h2_clean,
            features,
            t1,
            t1d,
            t2,
            t2d,
            k1,
            k2,
            raw_log_sigma: [raw_ls[0], raw_ls[1]],
        };
        (output, cache)
    }

    /// Accumulate parameter gradients for one sample. Gradients do not flow
    /// into the stored previous recurrent state (truncated BPTT).
    pub fn backward(&self, cache: &ForwardCache, upstream: &OutputGrads, grads: &mut PolicyGrads) {
        let (lo, hi) = self.log_sigma_clamp;
        // Clamp derivative: zero where saturated.
        let d_ls: Vec<f64> = (0..2)
            .map(|d| {
                let raw = cache.raw_log_sigma[d];
                if raw > lo && raw < hi {
                    upstream.d_log_sigma[d]
                } else {
                    0.0
                }
            })
            .collect();
        let d_mean = &upstream.d_mean;

        // Heads back to the shared actor trunk output.
        let mut d_t2d = self.mean_head.backward(&cache.t2d, d_mean, &mut grads.mean_head);
        let from_ls = self
            .log_sigma_head
            .backward(&cache.t2d, &d_ls, &mut grads.log_sigma_head);
        super::linalg::add_assign(&mut d_t2d, &from_ls);

        // Actor trunk.
        let d_t2 = match &cache.masks {
            Some(m) => super::linalg::hadamard(&d_t2d, &m.actor_mid2),
            None => d_t2d,
        };
        let d_pre2: Vec<f64> = d_t2
            .iter()
            .zip(&cache.t2)
            .map(|(g, t)| g * (1.0 - t * t))
            .collect();
        let d_t1d = self.actor2.backward(&cache.t1d, &d_pre2, &mut grads.actor2);
        let d_t1 = match &cache.masks {
            Some(m) => super::linalg::hadamard(&d_t1d, &m.actor_mid1),
            None => d_t1d,
        };
        let d_pre1: Vec<f64> = d_t1
            .iter()
            .zip(&cache.t1)
            .map(|(g, t)| g * (1.0 - t * t))
            .collect();
        let d_features = self.actor1.backward(&cache.features, &d_pre1, &mut grads.actor1);

        // Critic trunk.
        let d_k2 = self
            .value_head
            .backward(&cache.k2, &[upstream.d_value], &mut grads.value_head);
        let d_pre_k2: Vec<f64> = d_k2
            .iter()
            .zip(&cache.k2)
            .map(|(g, t)| g * (1.0 - t * t))
            .collect();
        let d_k1 = self.critic2.backward(&cache.k1, &d_pre_k2, &mut grads.critic2);
        let d_pre_k1: Vec<f64> = d_k1
            .iter()
            .zip(&cache.k1)
            .map(|(g, t)| g * (1.0 - t * t))
            .collect();
        let d_h2_critic = self
            .critic1
            .backward(&cache.h2_clean, &d_pre_k1, &mut grads.critic1);

        // Extractor: actor gradient flows through the masked pass (if any),
        // critic gradient through the clean pass; layer-2 weights accumulate
        // from both uses.
        let d_h1 = match (&cache.masks, &cache.l2_masked) {
            (Some(m), Some(masked_cache)) => {
                let d_h2m = super::linalg::hadamard(&d_features, &m.extractor_out);
                let d_h1d = self.lstm2.backward(masked_cache, &d_h2m, &mut grads.lstm2);
                let mut d_h1 = super::linalg::hadamard(&d_h1d, &m.extractor_mid);
                let d_h1_clean = self
                    .lstm2
                    .backward(&cache.l2_clean, &d_h2_critic, &mut grads.lstm2);
                super::linalg::add_assign(&mut d_h1, &d_h1_clean);
                d_h1
            }
            _ => {
                let mut d_h2 = d_features;
                super::linalg::add_assign(&mut d_h2, &d_h2_critic);
                self.lstm2.backward(&cache.l2_clean, &d_h2, &mut grads.lstm2)
            }
        };
        // Input is not trainable; discard d_x.
        let _ = self.lstm1.backward(&cache.l1, &d_h1, &mut grads.lstm1);
    }

    pub fn zero_grads(&self) -> PolicyGrads {
        PolicyGrads {
            lstm1: self.lstm1.zeros_like(),
            lstm2: self.lstm2.zeros_like(),
            actor1: self.actor1.zeros_like(),
            actor2: self.actor2.zeros_like(),
            mean_head: self.mean_head.zeros_like(),
            log_sigma_head: self.log_sigma_head.zeros_like(),
            critic1: self.critic1.zeros_like(),
            critic2: self.critic2.zeros_like(),
            value_head: self.value_head.zeros_like(),
        }
    }

    fn param_slices(&self) -> Vec<&[f64]> {
        vec![
            &self.lstm1.w_ih.data,
            &self.lstm1.w_hh.data,
            &self.lstm1.b,
            &self.lstm2.w_ih.data,
            &self.lstm2.w_hh.data,
            &self.lstm2.b,
            &self.actor1.w.data,
            &self.actor1.b,
            &self.actor2.w.data,
            &self.actor2.b,
            &self.mean_head.w.data,
            &self.mean_head.b,
            &self.log_sigma_head.w.data,
            &self.log_sigma_head.b,
            &self.critic1.w.data,
            &self.critic1.b,
            &self.critic2.w.data,
            &self.critic2.b,
            &self.value_head.w.data,
            &self.value_head.b,
        ]
    }

    fn param_slices_mut(&mut self) -> Vec<&mut Vec<f64>> {
        vec![
            &mut self.lstm1.w_ih.data,
            &mut self.lstm1.w_hh.data,
            &mut self.lstm1.b,
            &mut self.lstm2.w_ih.data,
            &mut self.lstm2.w_hh.data,
            &mut self.lstm2.b,
            &mut self.actor1.w.data,
            &mut self.actor1.b,
            &mut self.actor2.w.data,
            &mut self.actor2.b,
            &mut self.mean_head.w.data,
            &mut self.mean_head.b,
            &mut self.log_sigma_head.w.data,
            &mut self.log_sigma_head.b,
            &mut self.critic1.w.data,
            &mut self.critic1.b,
            &mut self.critic2.w.data,
            &mut self.critic2.b,
            &mut self.value_head.w.data,
            &mut self.value_head.b,
        ]
    }

    pub fn param_count(&self) -> usize {
        self.param_slices().iter().map(|s| s.len()).sum()
    }

    /// All trainable parameters in a fixed canonical order.
    pub fn param_vector(&self) -> Vec<f64> {
        let mut v = Vec::with_capacity(self.param_count());
        for s in self.param_slices() {
            v.extend_from_slice(s);
        }
        v
    }

    /// Overwrite all trainable parameters from the canonical order.
    pub fn set_param_vector(&mut self, params: &[f64]) {
        let mut offset = 0;
        for slice in self.param_slices_mut() {
            let len = slice.len();
            slice.copy_from_slice(&params[offset..offset + len]);
            offset += len;
        }
        assert_eq!(offset, params.len(), "parameter vector length mismatch");
    }
}

impl PolicyGrads {
    /// Same canonical order as [`OdvPolicy::param_vector`].
    pub fn to_vector(&self) -> Vec<f64> {
        let slices: Vec<&[f64]> = vec![
            &self.lstm1.w_ih.data,
            &self.lstm1.w_hh.data,
            &self.lstm1.b,
            &self.lstm2.w_ih.data,
            &self.lstm2.w_hh.data,
            &self.lstm2.b,
            &self.actor1.w.data,
            &self.actor1.b,
            &self.actor2.w.data,
            &self.actor2.b,
            &self.mean_head.w.data,
            &self.mean_head.b,
            &self.log_sigma_head.w.data,
            &self.log_sigma_head.b,
            &self.critic1.w.data,
            &self.critic1.b,
            &self.critic2.w.data,
            &self.critic2.b,
            &self.value_head.w.data,
            &self.value_head.b,
        ];
        let mut v = Vec::with_capacity(slices.iter().map(|s| s.len()).sum());
        for s in slices {
            v.extend_from_slice(s);
        }
        v
    }
}

/// Input scaling for the navigation observation layout.
pub fn nav_input_scale(max_observed_humans: usize) -> Vec<f64> {
    let inv_pi = 1.0 / std::f64::consts::PI;
    let mut scale = vec![0.1, inv_pi, 0.5, inv_pi, 1.0];
    for _ in 0..max_observed_humans {
        scale.extend_from_slice(&[0.1, 0.1, 0.5, 0.5, 1.0]);
    }
    scale
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;

    fn toy_arch() -> Architecture {
        Architecture {
            obs_dim: 5,
            lstm_hidden: 4,
            actor_hidden: 4,
            action_dim: 2,
        }
    }

    fn toy_obs(seed: u64) -> Vec<f64> {
        use rand::Rng;
        let mut rng = ChaCha12Rng::seed_from_u64(seed);
        (0..5).map(|_| rng.gen_range(-1.5..1.5)).collect()
    }

    #[test]
    fn clamp_log_sigma_hand_cases() {
        let p = OdvPolicy::new(toy_arch(), 0);
        assert_eq!(p.clamp_log_sigma(3.0), 0.25);
        assert_eq!(p.clamp_log_sigma(-25.0), -20.0);
        assert_eq!(p.clamp_log_sigma(0.0), 0.0);
    }

    #[test]
    fn variance_is_bounded_for_arbitrary_weights() {
        use rand::Rng;
        let mut rng = ChaCha12Rng::seed_from_u64(7);
        for trial in 0..50 {
            let mut p = OdvPolicy::new(toy_arch(), trial);
            // Blow the weights up to push the heads far outside the clamp.
            let scaled: Vec<f64> = p.param_vector().iter().map(|w| w * 50.0).collect();
            p.set_param_vector(&scaled);
            let state = LstmState::zeros(&p.arch);
            let obs: Vec<f64> = (0..5).map(|_| rng.gen_range(-10.0..10.0)).collect();
            let out = p.forward(&obs, &state, DropoutMode::Test, &mut rng);
            for d in 0..2 {
                assert!(out.action_variance[d] > 0.0);
                assert!(out.action_variance[d] <= (0.5f64).exp() + 1e-15);
                assert!(out.action_log_sigma[d] >= -20.0 && out.action_log_sigma[d] <= 0.25);
            }
        }
    }

    #[test]
    fn critic_and_recurrent_state_ignore_dropout() {
        let p = OdvPolicy::new(toy_arch(), 3);
        let state = LstmState::zeros(&p.arch);
        let obs = toy_obs(1);
        let mut rng = ChaCha12Rng::seed_from_u64(5);
        let clean = p.forward(&obs, &state, DropoutMode::Off, &mut rng);
        let train = p.forward(&obs, &state, DropoutMode::Train, &mut rng);
        let test = p.forward(&obs, &state, DropoutMode::Test, &mut rng);
        assert_eq!(clean.state_value, train.state_value);
        assert_eq!(clean.state_value, test.state_value);
        assert_eq!(clean.next_state, train.next_state);
        assert_eq!(clean.next_state, test.next_state);
    }

    #[test]
    fn dropout_off_is_deterministic_and_rng_independent() {
        let p = OdvPolicy::new(toy_arch(), 4);
        let state = LstmState::zeros(&p.arch);
        let obs = toy_obs(2);
        let mut rng_a = ChaCha12Rng::seed_from_u64(1);
        let mut rng_b = ChaCha12Rng::seed_from_u64(999);
        let a = p.forward(&obs, &state, DropoutMode::Off, &mut rng_a);
        let b = p.forward(&obs, &state, DropoutMode::Off, &mut rng_b);
        assert_eq!(a.action_mean, b.action_mean);
        assert_eq!(a.features, b.features);
        assert_eq!(a.state_value, b.state_value);
    }

    #[test]
    fn masks_are_resampled_per_forward_call() {
        let p = OdvPolicy::new(toy_arch(), 5);
        let state = LstmState::zeros(&p.arch);
        let obs = toy_obs(3);
        let mut rng = ChaCha12Rng::seed_from_u64(2);
        let a = p.forward(&obs, &state, DropoutMode::Test, &mut rng);
        let b = p.forward(&obs, &state, DropoutMode::Test, &mut rng);
        assert_ne!(a.features, b.features, "probes should differ");
        // Means differ too once masks differ (almost surely).
        assert_ne!(a.action_mean, b.action_mean);
    }

    #[test]
    fn recurrent_state_carries_information() {
        let p = OdvPolicy::new(toy_arch(), 6);
        let zero = LstmState::zeros(&p.arch);
        let obs_a = toy_obs(4);
        let obs_b = toy_obs(5);
        let mut rng = ChaCha12Rng::seed_from_u64(0);
        let first = p.forward(&obs_a, &zero, DropoutMode::Off, &mut rng);
        let with_history = p.forward(&obs_b, &first.next_state, DropoutMode::Off, &mut rng);
        let without_history = p.forward(&obs_b, &zero, DropoutMode::Off, &mut rng);
        assert_ne!(with_history.action_mean, without_history.action_mean);
    }

    #[test]
    fn deterministic_sampling_returns_the_mean_with_its_density() {
        let p = OdvPolicy::new(toy_arch(), 8);
        let state = LstmState::zeros(&p.arch);
        let out = p.forward(&toy_obs(6), &state, DropoutMode::Off, &mut ChaCha12Rng::seed_from_u64(0));
        let (a, lp) = out.sample_action(true, &mut ChaCha12Rng::seed_from_u64(1));
        assert_eq!(a, out.action_mean);
        let expected: f64 = (0..2)
            .map(|d| -out.action_log_sigma[d] - 0.5 * (2.0 * std::f64::consts::PI).ln())
            .sum();
        assert!((lp - expected).abs() < 1e-12);
    }

    #[test]
    fn log_prob_matches_the_closed_form_gaussian_density() {
        // Construct an output with unit sigma and zero mean by hand.
        let p = OdvPolicy::new(toy_arch(), 9);
        let state = LstmState::zeros(&p.arch);
        let mut out = p.forward(&toy_obs(7), &state, DropoutMode::Off, &mut ChaCha12Rng::seed_from_u64(0));
        out.action_mean = [0.0, 0.0];
        out.action_log_sigma = [0.0, 0.0];
        let lp = out.log_prob([1.0, -1.0]);
        let expected = 2.0 * (-0.5 - 0.5 * (2.0 * std::f64::consts::PI).ln());
        assert!((lp - expected).abs() < 1e-12);
        // Entropy of a unit Gaussian pair.
        let expected_entropy = (2.0 * std::f64::consts::PI * std::f64::consts::E).ln();
        assert!((out.entropy() - expected_entropy).abs() < 1e-12);
    }

    #[test]
    fn stochastic_sampling_is_seeded() {
        let p = OdvPolicy::new(toy_arch(), 10);
        let state = LstmState::zeros(&p.arch);
        let out = p.forward(&toy_obs(8), &state, DropoutMode::Off, &mut ChaCha12Rng::seed_from_u64(0));
        let (a1, lp1) = out.sample_action(false, &mut ChaCha12Rng::seed_from_u64(42));
        let (a2, lp2) = out.sample_action(false, &mut ChaCha12Rng::seed_from_u64(42));
        assert_eq!(a1, a2);
        assert_eq!(lp1, lp2);
        // Self-consistency: reported log-prob is the density of the sample.
        assert!((lp1 - out.log_prob(a1)).abs() < 1e-12);
    }

    #[test]
    fn param_vector_roundtrips() {
        let mut p = OdvPolicy::new(toy_arch(), 11);
        let v = p.param_vector();
        assert_eq!(v.len(), p.param_count());
        let mut q = p.clone();
        q.set_param_vector(&v);
        assert_eq!(p, q);
        // Grad vector has matching length.
        let grads = p.zero_grads();
        assert_eq!(grads.to_vector().len(), v.len());
        // Mutation roundtrip.
        let doubled: Vec<f64> = v.iter().map(|x| x * 2.0).collect();
        p.set_param_vector(&doubled);
        assert_eq!(p.param_vector(), doubled);
    }

    /// Full-network gradient check: a linear functional of (mean, log-sigma,
    /// value) back through every parameter, against central differences,
    /// with dropout masks active and frozen.
    #[test]
    fn backward_matches_finite_differences_with_masks() {
        use rand::Rng;
        let mut rng = ChaCha12Rng::seed_from_u64(12);
        let base = OdvPolicy::new(toy_arch(), 12);
        let obs = toy_obs(9);
        // Non-zero recurrent state so h_prev/c_prev paths are exercised.
        let state = {
            let mut s = LstmState::zeros(&base.arch);
            for v in s
                .h1
                .iter_mut()
                .chain(s.c1.iter_mut())
                .chain(s.h2.iter_mut())
                .chain(s.c2.iter_mut())
            {
                *v = rng.gen_range(-0.5..0.5);
            }
            s
        };
        let masks = base.sample_masks(DropoutMode::Test, &mut rng);
        let w_mean = [rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)];
        let w_ls = [rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)];
        let w_v: f64 = rng.gen_range(-1.0..1.0);

        let loss = |p: &OdvPolicy| -> f64 {
            let (out, _) = p.forward_cached(&obs, &state, masks.as_ref());
            w_mean[0] * out.action_mean[0]
                + w_mean[1] * out.action_mean[1]
                + w_ls[0] * out.action_log_sigma[0]
                + w_ls[1] * out.action_log_sigma[1]
                + w_v * out.state_value
        };

        let (_, cache) = base.forward_cached(&obs, &state, masks.as_ref());
        let mut grads = base.zero_grads();
        base.backward(
            &cache,
            &OutputGrads {
                d_mean: w_mean,
                d_log_sigma: w_ls,
                d_value: w_v,
            },
            &mut grads,
        );
        let analytic = grads.to_vector();
        let theta = base.param_vector();

        let eps = 1e-5;
        let mut checked = 0;
        let mut worst: f64 = 0.0;
        // Every 7th parameter keeps the test fast while covering all layers.
        for idx in (0..theta.len()).step_by(7) {
            let mut plus = theta.clone();
            plus[idx] += eps;
            let mut minus = theta.clone();
            minus[idx] -= eps;
            let mut p_plus = base.clone();
            p_plus.set_param_vector(&plus);
            let mut p_minus = base.clone();
            p_minus.set_param_vector(&minus);
            let fd = (loss(&p_plus) - loss(&p_minus)) / (2.0 * eps);
            let denom = analytic[idx].abs().max(fd.abs()).max(1e-6);
            let rel = (analytic[idx] - fd).abs() / denom;
            worst = worst.max(rel);
            checked += 1;
            assert!(
                rel < 1e-4,
                "param {idx}: analytic {} vs fd {} (rel {rel})",
                analytic[idx],
                fd
            );
        }
        assert!(checked > 50);
        assert!(worst < 1e-4, "worst relative error {worst}");
    }

    #[test]
    fn nav_input_scale_matches_the_observation_layout() {
        let scale = nav_input_scale(6);
        assert_eq!(scale.len(), crate::sim::observation_dim(6));
        assert_eq!(scale[0], 0.1);
        assert_eq!(scale[4], 1.0);
        assert_eq!(scale[5], 0.1);
    }
}
