//! LQR-guided (and naive) training loop.
//!
//! Per episode: reset the plant and histories, draw a fresh excitation record
//! from the master seed's training stream, then per step sample ũ from the
//! actor, apply `u = u_max·ũ + α·f_ψ` (α = 0 for naive runs), integrate,
//! compute the LQR reference force at the new state, reward, slide the history
//! window, store the transition, and run one critic/actor/Polyak update round
//! once the replay warmup is met. Everything derives from the master seed.

use nalgebra::DVector;
use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;

use crate::dynamics::{rk4_step, PlantState};
use crate::error::Result;
use crate::excitation::generate_record;
use crate::lac::{LacAgent, ReplayBuffer, Transition};
use crate::lqr::{self, LqrPolicy};

use super::config::RunConfig;
use super::history::HistoryWindow;
use super::metrics::{MetricsAccumulator, RunMetrics};
use super::rollout::{compute_reward, hybrid_action, TrajStep, Trajectory};
use super::{derive_seed, STREAM_AGENT, STREAM_REPLAY, STREAM_TRAIN_EXCITATION};

pub struct TrainResult {
    pub lqr: LqrPolicy,
    pub agent: LacAgent,
    pub buffer: ReplayBuffer,
    /// One entry per episode.
    pub metrics: Vec<RunMetrics>,
    pub trajectories: Vec<Trajectory>,
}

pub fn train(cfg: &RunConfig, guided: bool) -> Result<TrainResult> {
    cfg.validate()?;
    let lqr_policy = lqr::design(
        &cfg.assumed_plant,
        nalgebra::DMatrix::from_diagonal(&nalgebra::DVector::from_row_slice(&cfg.lqr_q)),
        cfg.lqr_r,
    )?;
    let alpha = if guided { cfg.alpha } else { 0.0 };
    let mut agent = LacAgent::new(cfg.state_dim(), cfg.lac.clone(), derive_seed(cfg.seed, STREAM_AGENT))?;
    let mut buffer = agent.make_buffer();
    let mut replay_rng = ChaCha12Rng::seed_from_u64(derive_seed(cfg.seed, STREAM_REPLAY));
    let n_steps = cfg.n_steps();
    let mut metrics = Vec::with_capacity(cfg.episodes);
    let mut trajectories = Vec::with_capacity(cfg.episodes);

    for ep in 0..cfg.episodes {
        let record = generate_record(
            derive_seed(cfg.seed, STREAM_TRAIN_EXCITATION + ep as u64),
            &cfg.excitation,
        )?;
        let mut plant = PlantState::default();
        let mut hist = HistoryWindow::new(cfg.history_len);
        let mut state = hist.state();
        let mut acc = MetricsAccumulator::new();
        let mut traj = Trajectory::default();
        // transition awaiting its next-step action before entering the buffer
        let mut pending: Option<Transition> = None;

        for k in 0..n_steps {
            let (u_tilde, _) = agent.act(&DVector::from_vec(state.clone()))?;
            if let Some(mut p) = pending.take() {
                p.a_next_hint = u_tilde;
                buffer.push(p);
            }
            let u = hybrid_action(
                u_tilde,
                cfg.u_max,
                alpha,
                lqr_policy.force(plant.x, plant.v),
                cfg.u_clamp,
            );
            let e = record[k];
            let stepped = rk4_step(plant, u, e, cfg.dt, &cfg.true_plant);
            let (next, a_next) = match stepped {
                Ok(pair) => pair,
                Err(_) => {
                    acc.mark_diverged();
                    break;
                }
            };
            if next.is_diverged() {
                acc.mark_diverged();
                break;
            }
            let u_star_next = lqr_policy.force(next.x, next.v);
            let r = compute_reward(next.x, a_next, u, &cfg.reward_weights);
            acc.push(next.x, a_next, u, r);
            traj.steps.push(TrajStep {
                t: (k + 1) as f64 * cfg.dt,
                x: next.x,
                v: next.v,
                a: a_next,
                u,
                xg_ddot: e,
            });
            hist.push(a_next, e, u_tilde, u_star_next);
            let next_state = hist.state();
            pending = Some(Transition {
                s: state,
                u_tilde,
                r,
                s_next: next_state.clone(),
                a_next_hint: 0.0,
            });
            state = next_state;
            plant = next;

            if buffer.len() >= cfg.lac.warmup {
                let batch = buffer.sample(cfg.lac.batch_size, &mut replay_rng)?;
                agent.update_step(&batch)?;
                agent.polyak_update();
            }
        }
        // the episode's last transition never sees a following step; score its
        // tail with a fresh draw
        if let Some(mut p) = pending.take() {
            let (hint, _) = agent.act(&DVector::from_vec(p.s_next.clone()))?;
            p.a_next_hint = hint;
            buffer.push(p);
        }
        metrics.push(acc.finish());
        trajectories.push(traj);
    }
    Ok(TrainResult { lqr: lqr_policy, agent, buffer, metrics, trajectories })
}
