//! Tanh-squashed Gaussian policy head.
//!
//! The trunk emits `(mean, log-std)` for the 1-dim action; the emitted action
//! is `tanh(mean + std·noise)` and the log-probability carries the tanh
//! change-of-variables correction `−log(1 − a² + 1e-6)`. Sampling is
//! reparameterized: with the noise draw held fixed, the action and
//! log-probability are differentiable in the trunk parameters.

use nalgebra::{DMatrix, DVector};
use rand::Rng;

use super::mlp::{ForwardCache, Mlp};
use crate::error::{Result, SctlError};

pub const LOG_STD_MIN: f64 = -20.0;
pub const LOG_STD_MAX: f64 = 2.0;
pub const SQUASH_EPS: f64 = 1e-6;

const LN_2PI: f64 = 1.8378770664093453;

#[derive(Debug, Clone, PartialEq)]
pub struct GaussianActor {
    /// Trunk with 2-dim output: row 0 = mean, row 1 = raw log-std.
    pub trunk: Mlp,
}

/// Clamped heads of a batched actor forward pass, plus the cache needed to
/// backpropagate into the trunk.
pub struct ActorHeads {
    pub cache: ForwardCache,
    pub mean: Vec<f64>,
    /// Log-std after clamping to `[LOG_STD_MIN, LOG_STD_MAX]`.
    pub log_std: Vec<f64>,
    /// True where the clamp was active (gradient through log-std is zero there).
    pub clamped: Vec<bool>,
}

impl GaussianActor {
    pub fn new(state_dim: usize, hidden: &[usize], rng: &mut impl Rng) -> Self {
        let mut sizes = vec![state_dim];
        sizes.extend_from_slice(hidden);
        sizes.push(2);
        GaussianActor { trunk: Mlp::new(&sizes, rng) }
    }

    pub fn state_dim(&self) -> usize {
        self.trunk.input_dim()
    }

    /// Sample an action with an externally supplied standard-normal draw.
    /// Returns `(action ∈ [−1,1], log-probability)`.
    pub fn sample(&self, s: &DVector<f64>, noise: f64) -> Result<(f64, f64)> {
        if s.iter().any(|v| !v.is_finite()) {
            return Err(SctlError::NonFinite("actor state".into()));
        }
        let out = self.trunk.forward(s)?;
        let mean = out[0];
        let log_std = out[1].clamp(LOG_STD_MIN, LOG_STD_MAX);
        Ok(sample_from_heads(mean, log_std, noise))
    }

    /// Deterministic action (evaluation mode): tanh of the mean head.
    pub fn mean_action(&self, s: &DVector<f64>) -> Result<f64> {
        let out = self.trunk.forward(s)?;
        Ok(out[0].tanh())
    }

    /// Batched heads with cache, for the learner's gradient path.
    pub fn heads_cached(&self, states: &DMatrix<f64>) -> Result<ActorHeads> {
        let mut heads = ActorHeads::empty();
        self.heads_into(states, &mut heads)?;
        Ok(heads)
    }

    /// [`GaussianActor::heads_cached`] into a reusable buffer.
    pub fn heads_into(&self, states: &DMatrix<f64>, heads: &mut ActorHeads) -> Result<()> {
        self.trunk.forward_into(states, &mut heads.cache)?;
        let out = heads.cache.output();
        let n = out.ncols();
        heads.mean.clear();
        heads.log_std.clear();
        heads.clamped.clear();
        for j in 0..n {
            heads.mean.push(out[(0, j)]);
            let raw = out[(1, j)];
            let cl = raw.clamp(LOG_STD_MIN, LOG_STD_MAX);
            heads.log_std.push(cl);
            heads.clamped.push(cl != raw);
        }
        Ok(())
    }
}

impl ActorHeads {
    /// Shape-less buffer; filled (and reused) by [`GaussianActor::heads_into`].
    pub fn empty() -> Self {
        ActorHeads {
            cache: ForwardCache::empty(),
            mean: Vec::new(),
            log_std: Vec::new(),
            clamped: Vec::new(),
        }
    }
}

/// Squash and score one draw: `a = tanh(mean + e^{log_std}·noise)`.
pub fn sample_from_heads(mean: f64, log_std: f64, noise: f64) -> (f64, f64) {
    let pre = mean + log_std.exp() * noise;
    let a = pre.tanh();
    let log_prob = -0.5 * LN_2PI - log_std - 0.5 * noise * noise - (1.0 - a * a + SQUASH_EPS).ln();
    (a, log_prob)
}

/// Log-density of the squashed distribution at action `a ∈ (−1, 1)`,
/// evaluated directly from the change-of-variables formula. Test oracle for
/// normalization; not used by training.
pub fn squashed_log_density(mean: f64, log_std: f64, a: f64) -> f64 {
    let pre = a.atanh();
    let std = log_std.exp();
    let z = (pre - mean) / std;
    -0.5 * LN_2PI - log_std - 0.5 * z * z - (1.0 - a * a + SQUASH_EPS).ln()
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha12Rng;

    #[test]
    fn zero_noise_zero_mean() {
        let actor = GaussianActor { trunk: Mlp::zeros(&[2, 4, 2]) };
        let (a, logp) = actor.sample(&DVector::zeros(2), 0.0).unwrap();
        assert_eq!(a, 0.0);
        // mean 0, log-std 0 (zero net): logp = −½log2π − 0 − 0 − log(1 + 1e-6)
        let expect = -0.5 * LN_2PI - (1.0f64 + SQUASH_EPS).ln();
        assert!((logp - expect).abs() < 1e-14);
    }

    #[test]
    fn action_always_in_range() {
        let mut rng = ChaCha12Rng::seed_from_u64(5);
        let actor = GaussianActor::new(3, &[8, 8], &mut rng);
        for _ in 0..1000 {
            let s = DVector::from_fn(3, |_, _| rng.random_range(-5.0..5.0));
            let noise: f64 = rng.random_range(-4.0..4.0);
            let (a, logp) = actor.sample(&s, noise).unwrap();
            assert!((-1.0..=1.0).contains(&a));
            assert!(a.is_finite() && logp.is_finite());
        }
    }

    #[test]
    fn rejects_non_finite_state() {
        let actor = GaussianActor { trunk: Mlp::zeros(&[2, 4, 2]) };
        let s = DVector::from_vec(vec![f64::NAN, 0.0]);
        assert!(actor.sample(&s, 0.0).is_err());
    }

    /// Numerical quadrature of the squashed density over (−1, 1) integrates to 1.
    #[test]
    fn density_normalizes() {
        for (mean, log_std) in [(0.0, 0.0), (0.3, -0.5), (-0.8, 0.4)] {
            let n = 200_001;
            let h = 2.0 / (n as f64 + 1.0);
            // Simpson over the open interval, avoiding the endpoints
            let mut total = 0.0;
            for i in 0..n {
                let a = -1.0 + h * (i as f64 + 1.0);
                let w = if i % 2 == 0 { 4.0 } else { 2.0 };
                total += w * squashed_log_density(mean, log_std, a).exp();
            }
            total *= h / 3.0;
            assert!((total - 1.0).abs() < 1e-3, "integral {total} for ({mean}, {log_std})");
        }
    }

    #[test]
    fn vanishing_std_is_deterministic() {
        let (a, _) = sample_from_heads(0.7, LOG_STD_MIN, 3.0);
        assert!((a - 0.7f64.tanh()).abs() < 1e-8);
    }

    #[test]
    fn log_std_clamp_flags() {
        let mut actor = GaussianActor { trunk: Mlp::zeros(&[1, 2]) };
        actor.trunk.biases[0][1] = 5.0; // raw log-std above the clamp
        let heads = actor.heads_cached(&DMatrix::zeros(1, 1)).unwrap();
        assert_eq!(heads.log_std[0], LOG_STD_MAX);
        assert!(heads.clamped[0]);
    }
}
