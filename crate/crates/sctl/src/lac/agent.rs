//! Lyapunov actor-critic learner.
//!
//! The critic is a nonnegative Lyapunov function `L_φ(s,a) = ‖f_φ(s,a)‖²`
//! regressed toward `−r + γ·L_{φ′}(s′,a′)` with a Polyak-averaged target copy.
//! The actor descends `β(log π + H_t) + λ(L_φ(s′,a′_new) − L_φ(s,ũ) + α₃·c)`
//! with reparameterized sampling, then β and λ move by projected dual ascent.
//!
//! Loss/gradient computations are exposed as pure functions so the test suite
//! can check them against finite differences with frozen noise draws.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;
use rand_distr::StandardNormal;

use crate::error::{Result, SctlError};
use crate::neural::{
    adam_step, ensure_shape, sample_from_heads, ActorHeads, AdamState, DeltaScratch, ForwardCache,
    GaussianActor, Mlp, MlpGrads, SQUASH_EPS,
};

use super::replay::{ReplayBuffer, Transition};

/// Learner hyperparameters. Defaults reproduce the headline experiment;
/// everything is overridable from the run config.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
#[serde(default)]
pub struct LacConfig {
    /// Discount factor γ.
    pub gamma: f64,
    /// Polyak rate τ.
    pub tau: f64,
    /// Lyapunov-decrease cost weight α₃.
    pub alpha3: f64,
    /// Target entropy H_t (negative of the action dimension).
    pub target_entropy: f64,
    pub lr_actor: f64,
    pub lr_critic: f64,
    pub lr_dual: f64,
    pub batch_size: usize,
    /// Minimum stored transitions before updates begin.
    pub warmup: usize,
    pub capacity: usize,
    /// Hidden widths shared by actor and critic trunks.
    pub hidden: Vec<usize>,
    /// Critic feature width before the inner product; 1 reduces the Lyapunov
    /// value to a squared scalar.
    pub critic_features: usize,
    /// Use the undiscounted literal target `−r + L_φ(s′,a′)` with the online
    /// critic instead of `−r + γ·L_{φ′}(s′,a′)`.
    pub literal_target: bool,
    /// Use the stored next action instead of a fresh sample for the target.
    pub use_stored_next_action: bool,
    /// Initial dual variables.
    pub beta0: f64,
    pub lambda0: f64,
}

impl Default for LacConfig {
    fn default() -> Self {
        LacConfig {
            gamma: 0.998,
            tau: 0.005,
            alpha3: 0.5,
            target_entropy: -1.0,
            lr_actor: 1e-4,
            lr_critic: 3e-4,
            lr_dual: 3e-4,
            batch_size: 256,
            warmup: 1000,
            capacity: 100_000,
            hidden: vec![256, 256, 256],
            critic_features: 16,
            literal_target: false,
            use_stored_next_action: false,
            beta0: 1.0,
            lambda0: 1.0,
        }
    }
}

impl LacConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.gamma >= 0.0 && self.gamma <= 1.0) {
            return Err(SctlError::Config(format!("gamma must be in [0,1], got {}", self.gamma)));
        }
        if !(self.tau >= 0.0 && self.tau <= 1.0) {
            return Err(SctlError::Config(format!("tau must be in [0,1], got {}", self.tau)));
        }
        if self.batch_size == 0 || self.capacity == 0 || self.critic_features == 0 {
            return Err(SctlError::Config("batch size, capacity, critic features must be >= 1".into()));
        }
        if self.beta0 < 0.0 || self.lambda0 < 0.0 {
            return Err(SctlError::Config("beta0 and lambda0 must be >= 0".into()));
        }
        Ok(())
    }
}

pub struct LacAgent {
    pub actor: GaussianActor,
    /// Critic feature trunk f_φ(s, a).
    pub critic: Mlp,
    /// Polyak-tracked copy φ′.
    pub target_critic: Mlp,
    pub actor_opt: AdamState,
    pub critic_opt: AdamState,
    /// Entropy multiplier, ≥ 0.
    pub beta: f64,
    /// Lyapunov-decrease multiplier, ≥ 0.
    pub lambda: f64,
    pub cfg: LacConfig,
    pub state_dim: usize,
    pub update_count: u64,
    rng: ChaCha12Rng,
    scratch: UpdateScratch,
}

/// Reusable buffers for [`LacAgent::update_step`]; shapes track the batch.
struct UpdateScratch {
    s_all: DMatrix<f64>,
    x_next: DMatrix<f64>,
    x_cc: DMatrix<f64>,
    heads: ActorHeads,
    cc_cache: ForwardCache,
    tail_cache: ForwardCache,
    up_cc: DMatrix<f64>,
    up_heads: DMatrix<f64>,
    input_grad: DMatrix<f64>,
    actor_grads: MlpGrads,
    critic_grads: MlpGrads,
    deltas: DeltaScratch,
}

impl UpdateScratch {
    fn new(actor: &GaussianActor, critic: &Mlp) -> Self {
        UpdateScratch {
            s_all: DMatrix::zeros(0, 0),
            x_next: DMatrix::zeros(0, 0),
            x_cc: DMatrix::zeros(0, 0),
            heads: ActorHeads::empty(),
            cc_cache: ForwardCache::empty(),
            tail_cache: ForwardCache::empty(),
            up_cc: DMatrix::zeros(0, 0),
            up_heads: DMatrix::zeros(0, 0),
            input_grad: DMatrix::zeros(0, 0),
            actor_grads: MlpGrads::zeros_like(&actor.trunk),
            critic_grads: MlpGrads::zeros_like(critic),
            deltas: DeltaScratch::default(),
        }
    }
}

impl LacAgent {
    pub fn new(state_dim: usize, cfg: LacConfig, seed: u64) -> Result<Self> {
        cfg.validate()?;
        let mut rng = ChaCha12Rng::seed_from_u64(seed);
        let actor = GaussianActor::new(state_dim, &cfg.hidden, &mut rng);
        let mut critic_sizes = vec![state_dim + 1];
        critic_sizes.extend_from_slice(&cfg.hidden);
        critic_sizes.push(cfg.critic_features);
        let critic = Mlp::new(&critic_sizes, &mut rng);
        let target_critic = critic.clone();
        let actor_opt = AdamState::new(&actor.trunk, cfg.lr_actor);
        let critic_opt = AdamState::new(&critic, cfg.lr_critic);
        let scratch = UpdateScratch::new(&actor, &critic);
        Ok(LacAgent {
            actor,
            critic,
            target_critic,
            actor_opt,
            critic_opt,
            beta: cfg.beta0,
            lambda: cfg.lambda0,
            cfg,
            state_dim,
            update_count: 0,
            rng,
            scratch,
        })
    }

    /// Draw a training action for state `s`.
    pub fn act(&mut self, s: &DVector<f64>) -> Result<(f64, f64)> {
        let noise: f64 = self.rng.sample(StandardNormal);
        self.actor.sample(s, noise)
    }

    /// Target Lyapunov value for one transition tail.
    pub fn critic_target(&self, r: f64, s_next: &[f64], a_next: f64) -> Result<f64> {
        if self.cfg.literal_target {
            Ok(-r + lyapunov_value(&self.critic, s_next, a_next)?)
        } else {
            Ok(-r + self.cfg.gamma * lyapunov_value(&self.target_critic, s_next, a_next)?)
        }
    }

    /// One Adam step on φ toward the batch targets. Returns the pre-step loss.
    pub fn critic_update(&mut self, batch: &[&Transition]) -> Result<f64> {
        let bd = BatchView::collect(batch, self.state_dim)?;
        let a_next = self.next_actions(&bd)?;
        let x_next = stack_state_action(&bd.next_states, &a_next);
        let tgt_net = if self.cfg.literal_target { &self.critic } else { &self.target_critic };
        let l_next = lyapunov_batch(tgt_net, &x_next)?;
        let scale = if self.cfg.literal_target { 1.0 } else { self.cfg.gamma };
        let targets: Vec<f64> =
            bd.rewards.iter().zip(&l_next).map(|(r, l)| -r + scale * l).collect();
        let x = stack_state_action(&bd.states, &bd.u_tilde);
        let (loss, grads) = critic_loss_grad(&self.critic, &x, &targets);
        adam_step(&mut self.critic, &grads, &mut self.critic_opt)?;
        Ok(loss)
    }

    /// φ′ ← τφ + (1−τ)φ′, elementwise.
    pub fn polyak_update(&mut self) {
        let tau = self.cfg.tau;
        for (tw, w) in self.target_critic.weights.iter_mut().zip(&self.critic.weights) {
            tw.zip_apply(w, |t, s| *t = tau * s + (1.0 - tau) * *t);
        }
        for (tb, b) in self.target_critic.biases.iter_mut().zip(&self.critic.biases) {
            tb.zip_apply(b, |t, s| *t = tau * s + (1.0 - tau) * *t);
        }
    }

    /// One Adam step on θ followed by projected dual ascent on β and λ.
    /// Returns the pre-step actor loss.
    pub fn actor_update(&mut self, batch: &[&Transition]) -> Result<f64> {
        let bd = BatchView::collect(batch, self.state_dim)?;
        let n = bd.len();
        let noises: Vec<f64> = (0..n).map(|_| self.rng.sample(StandardNormal)).collect();
        let noises_next: Vec<f64> = (0..n).map(|_| self.rng.sample(StandardNormal)).collect();
        let (loss, grads, stats) = actor_loss_grad(
            &self.actor,
            &self.critic,
            &bd,
            &noises,
            &noises_next,
            self.beta,
            self.lambda,
            self.cfg.alpha3,
            self.cfg.target_entropy,
        )?;
        adam_step(&mut self.actor.trunk, &grads, &mut self.actor_opt)?;
        self.beta = (self.beta + self.cfg.lr_dual * stats.entropy_gap).max(0.0);
        self.lambda = (self.lambda + self.cfg.lr_dual * stats.lyapunov_gap).max(0.0);
        self.update_count += 1;
        Ok(loss)
    }

    /// Fused critic + actor update on one sampled batch. Shares the forward
    /// passes between the two losses: a single actor pass over `[S | S′]`, one
    /// critic pass at `(s, ũ)` reused for the regression residual and the
    /// actor's `L_φ(s,ũ)` term, and one fresh next-action draw reused for the
    /// critic target and the actor's `L_φ(s′,a′)` term. Both gradients are
    /// evaluated at the pre-step parameters and applied together, then the
    /// duals ascend. The caller runs the Polyak step. Returns (critic loss,
    /// actor loss).
    pub fn update_step(&mut self, batch: &[&Transition]) -> Result<(f64, f64)> {
        let bd = BatchView::collect(batch, self.state_dim)?;
        let n = bd.len();
        let nf = n as f64;
        let d = self.state_dim;
        let feat = self.critic.output_dim();
        let sc = &mut self.scratch;

        ensure_shape(&mut sc.s_all, d, 2 * n);
        sc.s_all.view_mut((0, 0), (d, n)).copy_from(&bd.states);
        sc.s_all.view_mut((0, n), (d, n)).copy_from(&bd.next_states);
        self.actor.heads_into(&sc.s_all, &mut sc.heads)?;

        let noises: Vec<f64> = (0..n).map(|_| self.rng.sample(StandardNormal)).collect();
        let noises_next: Vec<f64> = (0..n).map(|_| self.rng.sample(StandardNormal)).collect();
        let mut actions_s = Vec::with_capacity(n);
        let mut log_probs = Vec::with_capacity(n);
        for j in 0..n {
            let (a, lp) = sample_from_heads(sc.heads.mean[j], sc.heads.log_std[j], noises[j]);
            actions_s.push(a);
            log_probs.push(lp);
        }
        let actions_next: Vec<f64> = (0..n)
            .map(|j| {
                sample_from_heads(sc.heads.mean[n + j], sc.heads.log_std[n + j], noises_next[j]).0
            })
            .collect();

        // regression targets: constants with respect to both networks
        let a_tail: &[f64] =
            if self.cfg.use_stored_next_action { &bd.a_next_hint } else { &actions_next };
        ensure_shape(&mut sc.x_next, d + 1, n);
        sc.x_next.view_mut((0, 0), (d, n)).copy_from(&bd.next_states);
        for j in 0..n {
            sc.x_next[(d, j)] = a_tail[j];
        }
        let (tail_net, scale) = if self.cfg.literal_target {
            (&self.critic, 1.0)
        } else {
            (&self.target_critic, self.cfg.gamma)
        };
        tail_net.forward_into(&sc.x_next, &mut sc.tail_cache)?;
        let targets: Vec<f64> = sc
            .tail_cache
            .output()
            .as_slice()
            .chunks_exact(feat)
            .zip(&bd.rewards)
            .map(|(f, r)| -r + scale * f.iter().map(|v| v * v).sum::<f64>())
            .collect();

        // one critic pass over [(s, ũ) | (s′, a′)]: the leading half carries
        // the regression residual (parameter grads), the trailing half the
        // λ-term (action gradient); backward_split shares the chain gemms
        ensure_shape(&mut sc.x_cc, d + 1, 2 * n);
        sc.x_cc.view_mut((0, 0), (d, n)).copy_from(&bd.states);
        sc.x_cc.view_mut((0, n), (d, n)).copy_from(&bd.next_states);
        for j in 0..n {
            sc.x_cc[(d, j)] = bd.u_tilde[j];
            sc.x_cc[(d, n + j)] = actions_next[j];
        }
        self.critic.forward_into(&sc.x_cc, &mut sc.cc_cache)?;
        let mut critic_loss_v = 0.0;
        let mut l_cur = Vec::with_capacity(n);
        let mut l_next = Vec::with_capacity(n);
        let coeff_l = 2.0 * self.lambda / nf;
        ensure_shape(&mut sc.up_cc, feat, 2 * n);
        for (j, (fcol, ucol)) in sc
            .cc_cache
            .output()
            .as_slice()
            .chunks_exact(feat)
            .zip(sc.up_cc.as_mut_slice().chunks_exact_mut(feat))
            .enumerate()
        {
            let l: f64 = fcol.iter().map(|v| v * v).sum();
            let coeff = if j < n {
                l_cur.push(l);
                let resid = l - targets[j];
                critic_loss_v += 0.5 * resid * resid / nf;
                2.0 * resid / nf
            } else {
                l_next.push(l);
                coeff_l
            };
            for (u, v) in ucol.iter_mut().zip(fcol) {
                *u = coeff * v;
            }
        }
        self.critic.backward_split(
            &sc.cc_cache,
            &sc.up_cc,
            n,
            &mut sc.critic_grads,
            &mut sc.input_grad,
            &mut sc.deltas,
        );

        // combined head upstream over [S | S′]: β-term on the first n columns,
        // λ-term on the rest; one trunk backward sums the contributions
        let mut actor_loss_v = 0.0;
        let mut entropy_gap = 0.0;
        let mut lyapunov_gap = 0.0;
        ensure_shape(&mut sc.up_heads, 2, 2 * n);
        for j in 0..n {
            let e = log_probs[j] + self.cfg.target_entropy;
            let gap = l_next[j] - l_cur[j] + self.cfg.alpha3 * (-bd.rewards[j]);
            actor_loss_v += (self.beta * e + self.lambda * gap) / nf;
            entropy_gap += e / nf;
            lyapunov_gap += gap / nf;

            let a = actions_s[j];
            let dlogp_dpre = 2.0 * a * (1.0 - a * a) / (1.0 - a * a + SQUASH_EPS);
            let cb = self.beta / nf;
            sc.up_heads[(0, j)] = cb * dlogp_dpre;
            sc.up_heads[(1, j)] = if sc.heads.clamped[j] {
                0.0
            } else {
                cb * (-1.0 + dlogp_dpre * sc.heads.log_std[j].exp() * noises[j])
            };

            let g_a = sc.input_grad[(d, j)];
            let ap = actions_next[j];
            let dpre = g_a * (1.0 - ap * ap);
            sc.up_heads[(0, n + j)] = dpre;
            sc.up_heads[(1, n + j)] = if sc.heads.clamped[n + j] {
                0.0
            } else {
                dpre * sc.heads.log_std[n + j].exp() * noises_next[j]
            };
        }
        self.actor.trunk.backward_params(
            &sc.heads.cache,
            &sc.up_heads,
            &mut sc.actor_grads,
            &mut sc.deltas,
        );

        adam_step(&mut self.critic, &sc.critic_grads, &mut self.critic_opt)?;
        adam_step(&mut self.actor.trunk, &sc.actor_grads, &mut self.actor_opt)?;
        self.beta = (self.beta + self.cfg.lr_dual * entropy_gap).max(0.0);
        self.lambda = (self.lambda + self.cfg.lr_dual * lyapunov_gap).max(0.0);
        self.update_count += 1;
        Ok((critic_loss_v, actor_loss_v))
    }

    fn next_actions(&mut self, bd: &BatchView) -> Result<Vec<f64>> {
        if self.cfg.use_stored_next_action {
            return Ok(bd.a_next_hint.clone());
        }
        let heads = self.actor.heads_cached(&bd.next_states)?;
        Ok((0..bd.len())
            .map(|j| {
                let noise: f64 = self.rng.sample(StandardNormal);
                sample_from_heads(heads.mean[j], heads.log_std[j], noise).0
            })
            .collect())
    }

    /// Fresh replay buffer sized from this agent's config.
    pub fn make_buffer(&self) -> ReplayBuffer {
        ReplayBuffer::new(self.cfg.capacity)
    }
}

/// ℓ = ‖f_φ(s,a)‖² ≥ 0.
pub fn lyapunov_value(critic: &Mlp, s: &[f64], a: f64) -> Result<f64> {
    let mut input = DVector::zeros(s.len() + 1);
    input.as_mut_slice()[..s.len()].copy_from_slice(s);
    input[s.len()] = a;
    let f = critic.forward(&input)?;
    Ok(f.norm_squared())
}

/// Batched Lyapunov values for pre-stacked `[s; a]` columns.
fn lyapunov_batch(critic: &Mlp, x: &DMatrix<f64>) -> Result<Vec<f64>> {
    let f = critic.forward_batch(x)?;
    Ok((0..f.ncols()).map(|j| f.column(j).norm_squared()).collect())
}

/// Column-major batch view of a sampled transition batch.
pub struct BatchView {
    pub states: DMatrix<f64>,
    pub next_states: DMatrix<f64>,
    pub u_tilde: Vec<f64>,
    pub rewards: Vec<f64>,
    pub a_next_hint: Vec<f64>,
}

impl BatchView {
    pub fn collect(batch: &[&Transition], state_dim: usize) -> Result<Self> {
        if batch.is_empty() {
            return Err(SctlError::Usage("update requires a nonempty batch".into()));
        }
        for t in batch {
            t.validate(state_dim)?;
        }
        let n = batch.len();
        let states = DMatrix::from_fn(state_dim, n, |i, j| batch[j].s[i]);
        let next_states = DMatrix::from_fn(state_dim, n, |i, j| batch[j].s_next[i]);
        Ok(BatchView {
            states,
            next_states,
            u_tilde: batch.iter().map(|t| t.u_tilde).collect(),
            rewards: batch.iter().map(|t| t.r).collect(),
            a_next_hint: batch.iter().map(|t| t.a_next_hint).collect(),
        })
    }

    pub fn len(&self) -> usize {
        self.u_tilde.len()
    }

    pub fn is_empty(&self) -> bool {
        self.u_tilde.is_empty()
    }
}

fn stack_state_action(states: &DMatrix<f64>, actions: &[f64]) -> DMatrix<f64> {
    let d = states.nrows();
    DMatrix::from_fn(d + 1, states.ncols(), |i, j| if i < d { states[(i, j)] } else { actions[j] })
}

/// Mean critic regression loss `½(L_φ(s,ũ) − target)²` over pre-stacked
/// `[s; ũ]` columns, targets held constant.
pub fn critic_loss(critic: &Mlp, x: &DMatrix<f64>, targets: &[f64]) -> f64 {
    let f = critic.forward_batch(x).expect("stacked batch shape");
    let n = x.ncols() as f64;
    (0..x.ncols())
        .map(|j| {
            let resid = f.column(j).norm_squared() - targets[j];
            0.5 * resid * resid
        })
        .sum::<f64>()
        / n
}

/// Loss plus exact parameter gradients for [`critic_loss`].
pub fn critic_loss_grad(critic: &Mlp, x: &DMatrix<f64>, targets: &[f64]) -> (f64, MlpGrads) {
    let cache = critic.forward_cached(x).expect("stacked batch shape");
    let f = cache.output();
    let n = x.ncols();
    let mut loss = 0.0;
    let mut upstream = DMatrix::zeros(f.nrows(), n);
    for j in 0..n {
        let resid = f.column(j).norm_squared() - targets[j];
        loss += 0.5 * resid * resid / n as f64;
        let coeff = 2.0 * resid / n as f64;
        for i in 0..f.nrows() {
            upstream[(i, j)] = coeff * f[(i, j)];
        }
    }
    let (grads, _) = critic.backward(&cache, &upstream);
    (loss, grads)
}

/// Dual-ascent statistics from one actor batch.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DualStats {
    /// mean(log π + H_t).
    pub entropy_gap: f64,
    /// mean(L_φ(s′,a′_new) − L_φ(s,ũ) + α₃·c).
    pub lyapunov_gap: f64,
}

/// Actor objective value with frozen noise draws; pure in the actor parameters.
#[allow(clippy::too_many_arguments)]
pub fn actor_loss(
    actor: &GaussianActor,
    critic: &Mlp,
    bd: &BatchView,
    noises: &[f64],
    noises_next: &[f64],
    beta: f64,
    lambda: f64,
    alpha3: f64,
    target_entropy: f64,
) -> Result<f64> {
    let (loss, _, _) = actor_loss_terms(
        actor, critic, bd, noises, noises_next, beta, lambda, alpha3, target_entropy, false,
    )?;
    Ok(loss)
}

/// Actor objective with exact gradients in the actor trunk parameters.
/// Gradients do not flow into the critic.
#[allow(clippy::too_many_arguments)]
pub fn actor_loss_grad(
    actor: &GaussianActor,
    critic: &Mlp,
    bd: &BatchView,
    noises: &[f64],
    noises_next: &[f64],
    beta: f64,
    lambda: f64,
    alpha3: f64,
    target_entropy: f64,
) -> Result<(f64, MlpGrads, DualStats)> {
    let (loss, grads, stats) = actor_loss_terms(
        actor, critic, bd, noises, noises_next, beta, lambda, alpha3, target_entropy, true,
    )?;
    Ok((loss, grads.expect("gradients requested"), stats))
}

#[allow(clippy::too_many_arguments)]
fn actor_loss_terms(
    actor: &GaussianActor,
    critic: &Mlp,
    bd: &BatchView,
    noises: &[f64],
    noises_next: &[f64],
    beta: f64,
    lambda: f64,
    alpha3: f64,
    target_entropy: f64,
    want_grads: bool,
) -> Result<(f64, Option<MlpGrads>, DualStats)> {
    let n = bd.len();
    if noises.len() != n || noises_next.len() != n {
        return Err(SctlError::Shape("noise vectors must match the batch length".into()));
    }
    let heads_s = actor.heads_cached(&bd.states)?;
    let heads_next = actor.heads_cached(&bd.next_states)?;

    let mut actions_s = Vec::with_capacity(n);
    let mut log_probs = Vec::with_capacity(n);
    for j in 0..n {
        let (a, lp) = sample_from_heads(heads_s.mean[j], heads_s.log_std[j], noises[j]);
        actions_s.push(a);
        log_probs.push(lp);
    }
    let actions_next: Vec<f64> = (0..n)
        .map(|j| sample_from_heads(heads_next.mean[j], heads_next.log_std[j], noises_next[j]).0)
        .collect();

    let x_next = stack_state_action(&bd.next_states, &actions_next);
    let cache_next = critic.forward_cached(&x_next)?;
    let l_next: Vec<f64> =
        (0..n).map(|j| cache_next.output().column(j).norm_squared()).collect();
    let x_cur = stack_state_action(&bd.states, &bd.u_tilde);
    let l_cur = lyapunov_batch(critic, &x_cur)?;

    let nf = n as f64;
    let mut loss = 0.0;
    let mut entropy_gap = 0.0;
    let mut lyapunov_gap = 0.0;
    for j in 0..n {
        let e = log_probs[j] + target_entropy;
        let d = l_next[j] - l_cur[j] + alpha3 * (-bd.rewards[j]);
        loss += (beta * e + lambda * d) / nf;
        entropy_gap += e / nf;
        lyapunov_gap += d / nf;
    }
    let stats = DualStats { entropy_gap, lyapunov_gap };
    if !want_grads {
        return Ok((loss, None, stats));
    }

    // λ-term: critic input gradient at (s′, a′), chained through the squash
    // and the next-state heads.
    let feat = cache_next.output().nrows();
    let mut upstream_critic = DMatrix::zeros(feat, n);
    for j in 0..n {
        let coeff = 2.0 * lambda / nf;
        for i in 0..feat {
            upstream_critic[(i, j)] = coeff * cache_next.output()[(i, j)];
        }
    }
    let input_grad = critic.backward_input_only(&cache_next, &upstream_critic);
    let action_row = bd.states.nrows();
    let mut upstream_next = DMatrix::zeros(2, n);
    for j in 0..n {
        let g_a = input_grad[(action_row, j)];
        let a = actions_next[j];
        let dpre = g_a * (1.0 - a * a);
        upstream_next[(0, j)] = dpre;
        upstream_next[(1, j)] = if heads_next.clamped[j] {
            0.0
        } else {
            dpre * heads_next.log_std[j].exp() * noises_next[j]
        };
    }
    let (grads_next, _) = actor.trunk.backward(&heads_next.cache, &upstream_next);

    // β-term: log-probability gradient through the reparameterized action.
    let mut upstream_s = DMatrix::zeros(2, n);
    for j in 0..n {
        let a = actions_s[j];
        let dlogp_dpre = 2.0 * a * (1.0 - a * a) / (1.0 - a * a + SQUASH_EPS);
        let coeff = beta / nf;
        upstream_s[(0, j)] = coeff * dlogp_dpre;
        upstream_s[(1, j)] = if heads_s.clamped[j] {
            0.0
        } else {
            coeff * (-1.0 + dlogp_dpre * heads_s.log_std[j].exp() * noises[j])
        };
    }
    let (mut grads, _) = actor.trunk.backward(&heads_s.cache, &upstream_s);
    grads.add(&grads_next);
    Ok((loss, Some(grads), stats))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    fn small_cfg() -> LacConfig {
        LacConfig { hidden: vec![8, 8], critic_features: 4, ..LacConfig::default() }
    }

    fn rand_transition(state_dim: usize, rng: &mut impl Rng) -> Transition {
        Transition {
            s: (0..state_dim).map(|_| rng.random_range(-1.0..1.0)).collect(),
            u_tilde: rng.random_range(-1.0..1.0),
            r: -rng.random_range(0.0..2.0),
            s_next: (0..state_dim).map(|_| rng.random_range(-1.0..1.0)).collect(),
            a_next_hint: rng.random_range(-1.0..1.0),
        }
    }

    #[test]
    fn lyapunov_nonnegative_and_matches_features() {
        let mut rng = ChaCha12Rng::seed_from_u64(11);
        for _ in 0..100 {
            let critic = Mlp::new(&[4, 6, 5], &mut rng);
            let s: Vec<f64> = (0..3).map(|_| rng.random_range(-3.0..3.0)).collect();
            let a = rng.random_range(-1.0..1.0);
            let l = lyapunov_value(&critic, &s, a).unwrap();
            assert!(l >= 0.0);
            let mut input = DVector::zeros(4);
            input.as_mut_slice()[..3].copy_from_slice(&s);
            input[3] = a;
            let f = critic.forward(&input).unwrap();
            let manual: f64 = f.iter().map(|v| v * v).sum();
            assert!((l - manual).abs() <= 1e-12 * manual.max(1.0));
        }
    }

    #[test]
    fn critic_target_arithmetic() {
        let agent = LacAgent::new(2, small_cfg(), 1).unwrap();
        let s = [0.3, -0.7];
        let a = 0.2;
        let l = lyapunov_value(&agent.target_critic, &s, a).unwrap();
        let tgt = agent.critic_target(-2.0, &s, a).unwrap();
        assert!((tgt - (2.0 + 0.998 * l)).abs() < 1e-14);
        // nonneg reward cost, nonneg Lyapunov tail ⇒ nonneg target
        assert!(tgt >= 2.0);
        let zero_tail = agent.critic_target(0.0, &s, a).unwrap();
        assert!((zero_tail - 0.998 * l).abs() < 1e-14);
    }

    #[test]
    fn literal_target_uses_online_critic_undiscounted() {
        let mut cfg = small_cfg();
        cfg.literal_target = true;
        let agent = LacAgent::new(2, cfg, 1).unwrap();
        let s = [0.1, 0.4];
        let l = lyapunov_value(&agent.critic, &s, -0.3).unwrap();
        let tgt = agent.critic_target(-1.0, &s, -0.3).unwrap();
        assert!((tgt - (1.0 + l)).abs() < 1e-14);
    }

    #[test]
    fn critic_fixed_point_has_zero_loss_and_moves_nothing() {
        let mut agent = LacAgent::new(2, small_cfg(), 3).unwrap();
        // zero critic and target: L ≡ 0 everywhere, and with r = 0 the targets
        // are exactly met already
        let sizes = agent.critic.sizes().to_vec();
        agent.critic = Mlp::zeros(&sizes);
        agent.target_critic = Mlp::zeros(&sizes);
        agent.critic_opt = AdamState::new(&agent.critic, agent.cfg.lr_critic);
        let t = Transition {
            s: vec![0.5, -0.2],
            u_tilde: 0.3,
            r: 0.0,
            s_next: vec![0.4, -0.1],
            a_next_hint: 0.1,
        };
        let before = agent.critic.clone();
        let loss = agent.critic_update(&[&t, &t]).unwrap();
        assert_eq!(loss, 0.0);
        assert_eq!(agent.critic, before);
    }

    #[test]
    fn critic_gradient_matches_finite_differences() {
        let mut rng = ChaCha12Rng::seed_from_u64(21);
        let mut done = 0;
        while done < 3 {
            let critic = Mlp::new(&[3, 6, 4], &mut rng);
            let x = DMatrix::from_fn(3, 2, |_, _| rng.random_range(-1.0..1.0));
            let probe = critic.forward_cached(&x).unwrap();
            if probe.pre.iter().any(|z| z.iter().any(|v| v.abs() < 1e-3)) {
                continue;
            }
            done += 1;
            let targets = vec![rng.random_range(0.0..2.0), rng.random_range(0.0..2.0)];
            let (loss, grads) = critic_loss_grad(&critic, &x, &targets);
            assert!((loss - critic_loss(&critic, &x, &targets)).abs() < 1e-14);
            let h = 1e-6;
            for li in 0..critic.n_layers() {
                for idx in 0..critic.weights[li].len() {
                    let mut plus = critic.clone();
                    plus.weights[li].as_mut_slice()[idx] += h;
                    let mut minus = critic.clone();
                    minus.weights[li].as_mut_slice()[idx] -= h;
                    let fd = (critic_loss(&plus, &x, &targets)
                        - critic_loss(&minus, &x, &targets))
                        / (2.0 * h);
                    let an = grads.weights[li].as_slice()[idx];
                    let denom = fd.abs().max(an.abs()).max(1e-3);
                    assert!((fd - an).abs() / denom < 1e-6, "W[{li}][{idx}]: fd {fd} vs {an}");
                }
                for idx in 0..critic.biases[li].len() {
                    let mut plus = critic.clone();
                    plus.biases[li][idx] += h;
                    let mut minus = critic.clone();
                    minus.biases[li][idx] -= h;
                    let fd = (critic_loss(&plus, &x, &targets)
                        - critic_loss(&minus, &x, &targets))
                        / (2.0 * h);
                    let an = grads.biases[li][idx];
                    let denom = fd.abs().max(an.abs()).max(1e-3);
                    assert!((fd - an).abs() / denom < 1e-6, "b[{li}][{idx}]: fd {fd} vs {an}");
                }
            }
        }
    }

    #[test]
    fn critic_update_descends_with_tiny_lr() {
        let mut cfg = small_cfg();
        cfg.use_stored_next_action = true;
        let mut agent = LacAgent::new(2, cfg, 5).unwrap();
        agent.critic_opt.lr = 1e-6;
        let mut rng = ChaCha12Rng::seed_from_u64(6);
        let batch: Vec<Transition> = (0..8).map(|_| rand_transition(2, &mut rng)).collect();
        let refs: Vec<&Transition> = batch.iter().collect();
        // freeze the targets the update will use
        let targets: Vec<f64> = refs
            .iter()
            .map(|t| agent.critic_target(t.r, &t.s_next, t.a_next_hint).unwrap())
            .collect();
        let bd = BatchView::collect(&refs, 2).unwrap();
        let x = stack_state_action(&bd.states, &bd.u_tilde);
        let before = critic_loss(&agent.critic, &x, &targets);
        let reported = agent.critic_update(&refs).unwrap();
        assert!((reported - before).abs() < 1e-12);
        let after = critic_loss(&agent.critic, &x, &targets);
        assert!(after < before, "loss {before} -> {after}");
    }

    #[test]
    fn actor_gradient_matches_finite_differences() {
        let mut rng = ChaCha12Rng::seed_from_u64(31);
        let mut done = 0;
        while done < 3 {
            let actor = GaussianActor::new(2, &[5, 4], &mut rng);
            let critic = Mlp::new(&[3, 5, 3], &mut rng);
            let batch: Vec<Transition> = (0..2).map(|_| rand_transition(2, &mut rng)).collect();
            let refs: Vec<&Transition> = batch.iter().collect();
            let bd = BatchView::collect(&refs, 2).unwrap();
            let noises = vec![rng.random_range(-1.5..1.5), rng.random_range(-1.5..1.5)];
            let noises_next = vec![rng.random_range(-1.5..1.5), rng.random_range(-1.5..1.5)];
            // keep the evaluation point away from activation kinks and clamps
            let heads_s = actor.heads_cached(&bd.states).unwrap();
            let heads_p = actor.heads_cached(&bd.next_states).unwrap();
            if heads_s.clamped.iter().chain(&heads_p.clamped).any(|c| *c) {
                continue;
            }
            let kink = |cache: &crate::neural::ForwardCache| {
                cache.pre.iter().any(|z| z.iter().any(|v| v.abs() < 1e-3))
            };
            if kink(&heads_s.cache) || kink(&heads_p.cache) {
                continue;
            }
            let a_next: Vec<f64> = (0..2)
                .map(|j| sample_from_heads(heads_p.mean[j], heads_p.log_std[j], noises_next[j]).0)
                .collect();
            let x_next = stack_state_action(&bd.next_states, &a_next);
            if kink(&critic.forward_cached(&x_next).unwrap()) {
                continue;
            }
            done += 1;
            let (beta, lambda, alpha3, ht) = (0.7, 1.3, 0.5, -1.0);
            let (loss, grads, _) = actor_loss_grad(
                &actor, &critic, &bd, &noises, &noises_next, beta, lambda, alpha3, ht,
            )
            .unwrap();
            let eval = |a: &GaussianActor| {
                actor_loss(a, &critic, &bd, &noises, &noises_next, beta, lambda, alpha3, ht)
                    .unwrap()
            };
            assert!((loss - eval(&actor)).abs() < 1e-14);
            let h = 1e-6;
            for li in 0..actor.trunk.n_layers() {
                for idx in 0..actor.trunk.weights[li].len() {
                    let mut plus = actor.clone();
                    plus.trunk.weights[li].as_mut_slice()[idx] += h;
                    let mut minus = actor.clone();
                    minus.trunk.weights[li].as_mut_slice()[idx] -= h;
                    let fd = (eval(&plus) - eval(&minus)) / (2.0 * h);
                    let an = grads.weights[li].as_slice()[idx];
                    let denom = fd.abs().max(an.abs()).max(1e-3);
                    assert!((fd - an).abs() / denom < 1e-5, "W[{li}][{idx}]: fd {fd} vs {an}");
                }
                for idx in 0..actor.trunk.biases[li].len() {
                    let mut plus = actor.clone();
                    plus.trunk.biases[li][idx] += h;
                    let mut minus = actor.clone();
                    minus.trunk.biases[li][idx] -= h;
                    let fd = (eval(&plus) - eval(&minus)) / (2.0 * h);
                    let an = grads.biases[li][idx];
                    let denom = fd.abs().max(an.abs()).max(1e-3);
                    assert!((fd - an).abs() / denom < 1e-5, "b[{li}][{idx}]: fd {fd} vs {an}");
                }
            }
        }
    }

    #[test]
    fn zero_multipliers_give_zero_actor_gradient() {
        let mut rng = ChaCha12Rng::seed_from_u64(41);
        let actor = GaussianActor::new(2, &[6], &mut rng);
        let critic = Mlp::new(&[3, 6, 2], &mut rng);
        let batch: Vec<Transition> = (0..4).map(|_| rand_transition(2, &mut rng)).collect();
        let refs: Vec<&Transition> = batch.iter().collect();
        let bd = BatchView::collect(&refs, 2).unwrap();
        let noises = vec![0.3; 4];
        let (_, grads, _) =
            actor_loss_grad(&actor, &critic, &bd, &noises, &noises, 0.0, 0.0, 0.5, -1.0).unwrap();
        assert_eq!(grads.max_abs(), 0.0);
    }

    #[test]
    fn polyak_endpoint_identities() {
        let mut agent = LacAgent::new(2, small_cfg(), 9).unwrap();
        // desync the copies
        agent.target_critic.weights[0][(0, 0)] += 1.0;
        let target_before = agent.target_critic.clone();
        agent.cfg.tau = 0.0;
        agent.polyak_update();
        assert_eq!(agent.target_critic, target_before);
        agent.cfg.tau = 1.0;
        agent.polyak_update();
        assert_eq!(agent.target_critic, agent.critic);
    }

    #[test]
    fn polyak_elementwise_arithmetic() {
        let mut agent = LacAgent::new(2, small_cfg(), 10).unwrap();
        let s = agent.critic.weights[0][(0, 1)];
        agent.target_critic.weights[0][(0, 1)] = 2.0;
        agent.polyak_update();
        let expect = 0.005 * s + 0.995 * 2.0;
        assert!((agent.target_critic.weights[0][(0, 1)] - expect).abs() < 1e-15);
    }

    #[test]
    fn duals_at_zero_stay_zero_under_negative_gaps() {
        let mut cfg = small_cfg();
        cfg.beta0 = 0.0;
        cfg.lambda0 = 0.0;
        cfg.target_entropy = -1e3; // entropy gap decisively negative
        let mut agent = LacAgent::new(2, cfg, 12).unwrap();
        // critic that scores only the action: L = 9a². Stored actions at ±1
        // dominate any squashed fresh sample, so the Lyapunov gap is negative.
        let mut critic = Mlp::zeros(&[3, 1]);
        critic.weights[0][(0, 2)] = 3.0;
        agent.critic = critic;
        let t = |u: f64| Transition {
            s: vec![0.2, -0.4],
            u_tilde: u,
            r: 0.0,
            s_next: vec![0.1, 0.3],
            a_next_hint: 0.0,
        };
        let (a, b) = (t(1.0), t(-1.0));
        for _ in 0..20 {
            agent.actor_update(&[&a, &b]).unwrap();
            assert_eq!(agent.beta, 0.0);
            assert_eq!(agent.lambda, 0.0);
        }
    }

    #[test]
    fn duals_ascend_on_violated_constraints() {
        let mut cfg = small_cfg();
        cfg.target_entropy = 1e3; // force a positive entropy gap
        let mut agent = LacAgent::new(2, cfg, 13).unwrap();
        let sizes = agent.critic.sizes().to_vec();
        agent.critic = Mlp::zeros(&sizes); // L ≡ 0 ⇒ gap = α₃·(−r) > 0
        let t = Transition {
            s: vec![0.2, -0.4],
            u_tilde: 0.5,
            r: -2.0,
            s_next: vec![0.1, 0.3],
            a_next_hint: 0.0,
        };
        let (beta0, lambda0) = (agent.beta, agent.lambda);
        agent.actor_update(&[&t]).unwrap();
        assert!(agent.beta > beta0);
        let expect_lambda = lambda0 + agent.cfg.lr_dual * 0.5 * 2.0;
        assert!((agent.lambda - expect_lambda).abs() < 1e-12);
    }

    /// γ = 0 reduces the critic target to −r; a 1-transition buffer driven to
    /// convergence must regress L_φ(s,ũ) to the cost.
    #[test]
    fn gamma_zero_regresses_to_cost() {
        let mut cfg = small_cfg();
        cfg.gamma = 0.0;
        cfg.use_stored_next_action = true;
        cfg.hidden = vec![8];
        let mut agent = LacAgent::new(2, cfg, 17).unwrap();
        agent.critic_opt.lr = 1e-2;
        let t = Transition {
            s: vec![0.5, -0.2],
            u_tilde: 0.3,
            r: -1.5,
            s_next: vec![0.4, -0.1],
            a_next_hint: 0.1,
        };
        for _ in 0..2000 {
            agent.critic_update(&[&t]).unwrap();
        }
        let l = lyapunov_value(&agent.critic, &t.s, t.u_tilde).unwrap();
        assert!((l - 1.5).abs() < 1e-3, "L = {l}");
    }

    #[test]
    fn update_sequence_is_deterministic() {
        let mut rng = ChaCha12Rng::seed_from_u64(23);
        let batch: Vec<Transition> = (0..16).map(|_| rand_transition(2, &mut rng)).collect();
        let run = || {
            let mut agent = LacAgent::new(2, small_cfg(), 99).unwrap();
            let refs: Vec<&Transition> = batch.iter().collect();
            for _ in 0..5 {
                agent.critic_update(&refs).unwrap();
                agent.actor_update(&refs).unwrap();
                agent.polyak_update();
            }
            agent
        };
        let a = run();
        let b = run();
        assert_eq!(a.critic, b.critic);
        assert_eq!(a.actor.trunk, b.actor.trunk);
        assert_eq!(a.beta, b.beta);
        assert_eq!(a.lambda, b.lambda);
    }

    /// The fused update must agree with the pure loss/gradient functions fed
    /// the same frozen noise draws, up to gemm summation order.
    #[test]
    fn fused_update_matches_pure_gradients() {
        let mut rng = ChaCha12Rng::seed_from_u64(77);
        let batch: Vec<Transition> = (0..6).map(|_| rand_transition(2, &mut rng)).collect();
        let refs: Vec<&Transition> = batch.iter().collect();
        let mut fused = LacAgent::new(2, small_cfg(), 55).unwrap();
        let mut twin = LacAgent::new(2, small_cfg(), 55).unwrap();
        let (cl, al) = fused.update_step(&refs).unwrap();

        // replay the fused draw order on the twin
        let n = refs.len();
        let noises: Vec<f64> = (0..n).map(|_| twin.rng.sample(StandardNormal)).collect();
        let noises_next: Vec<f64> = (0..n).map(|_| twin.rng.sample(StandardNormal)).collect();
        let bd = BatchView::collect(&refs, 2).unwrap();
        let heads_next = twin.actor.heads_cached(&bd.next_states).unwrap();
        let a_next: Vec<f64> = (0..n)
            .map(|j| sample_from_heads(heads_next.mean[j], heads_next.log_std[j], noises_next[j]).0)
            .collect();
        let targets: Vec<f64> = (0..n)
            .map(|j| twin.critic_target(refs[j].r, &refs[j].s_next, a_next[j]).unwrap())
            .collect();
        let x = stack_state_action(&bd.states, &bd.u_tilde);
        let (cl_ref, cgrads) = critic_loss_grad(&twin.critic, &x, &targets);
        let (al_ref, agrads, stats) = actor_loss_grad(
            &twin.actor,
            &twin.critic,
            &bd,
            &noises,
            &noises_next,
            twin.beta,
            twin.lambda,
            twin.cfg.alpha3,
            twin.cfg.target_entropy,
        )
        .unwrap();
        assert!((cl - cl_ref).abs() < 1e-12, "critic loss {cl} vs {cl_ref}");
        assert!((al - al_ref).abs() < 1e-12, "actor loss {al} vs {al_ref}");
        adam_step(&mut twin.critic, &cgrads, &mut twin.critic_opt).unwrap();
        adam_step(&mut twin.actor.trunk, &agrads, &mut twin.actor_opt).unwrap();
        twin.beta = (twin.beta + twin.cfg.lr_dual * stats.entropy_gap).max(0.0);
        twin.lambda = (twin.lambda + twin.cfg.lr_dual * stats.lyapunov_gap).max(0.0);
        for (wa, wb) in fused.critic.weights.iter().zip(&twin.critic.weights) {
            assert!((wa - wb).abs().max() < 1e-10);
        }
        for (ba, bb) in fused.critic.biases.iter().zip(&twin.critic.biases) {
            assert!((ba - bb).abs().max() < 1e-10);
        }
        for (wa, wb) in fused.actor.trunk.weights.iter().zip(&twin.actor.trunk.weights) {
            assert!((wa - wb).abs().max() < 1e-10);
        }
        for (ba, bb) in fused.actor.trunk.biases.iter().zip(&twin.actor.trunk.biases) {
            assert!((ba - bb).abs().max() < 1e-10);
        }
        assert!((fused.beta - twin.beta).abs() < 1e-12);
        assert!((fused.lambda - twin.lambda).abs() < 1e-12);
        assert_eq!(fused.update_count, 1);
    }

    #[test]
    fn empty_batch_rejected() {
        let mut agent = LacAgent::new(2, small_cfg(), 1).unwrap();
        assert!(agent.critic_update(&[]).is_err());
        assert!(agent.actor_update(&[]).is_err());
    }

    #[test]
    fn config_validation() {
        let mut cfg = LacConfig::default();
        cfg.gamma = 1.5;
        assert!(cfg.validate().is_err());
        let mut cfg = LacConfig::default();
        cfg.batch_size = 0;
        assert!(cfg.validate().is_err());
        assert!(LacConfig::default().validate().is_ok());
    }
}
