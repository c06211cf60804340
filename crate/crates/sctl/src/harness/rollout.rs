//! Deterministic policy rollouts on the true plant.

use nalgebra::DVector;

use crate::dynamics::{rk4_step, PlantState};
use crate::error::{Result, SctlError};
use crate::lqr::LqrPolicy;
use crate::neural::GaussianActor;

use super::config::RunConfig;
use super::history::HistoryWindow;
use super::metrics::{MetricsAccumulator, RunMetrics};

/// Controller under evaluation. Learned policies run deterministically
/// (tanh of the mean head, no sampling); a naive-RL policy is `Guided` with
/// `alpha = 0` — the LQR force still feeds the state history, it just is not
/// applied.
pub enum Policy<'a> {
    Uncontrolled,
    Lqr(&'a LqrPolicy),
    Guided { actor: &'a GaussianActor, lqr: &'a LqrPolicy, alpha: f64, u_max: f64 },
}

/// `r = −(w₁|x| + w₂|ẍ| + w₃|u|)`.
pub fn compute_reward(x: f64, xddot: f64, u: f64, w: &[f64; 3]) -> f64 {
    debug_assert!(w.iter().all(|wi| *wi >= 0.0));
    -(w[0] * x.abs() + w[1] * xddot.abs() + w[2] * u.abs())
}

/// `u = u_max·raw + α·lqr_u`, optionally clamped to ±u_clamp.
pub fn hybrid_action(raw: f64, u_max: f64, alpha: f64, lqr_u: f64, u_clamp: Option<f64>) -> f64 {
    let u = u_max * raw + alpha * lqr_u;
    match u_clamp {
        Some(c) => u.clamp(-c, c),
        None => u,
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrajStep {
    pub t: f64,
    pub x: f64,
    pub v: f64,
    /// Relative acceleration at the end of the step.
    pub a: f64,
    /// Applied force over the step.
    pub u: f64,
    /// Ground acceleration held over the step.
    pub xg_ddot: f64,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Trajectory {
    pub steps: Vec<TrajStep>,
}

pub fn trajectory_csv(traj: &Trajectory) -> String {
    let mut out = String::from("t,x,v,a,u,xg_ddot\n");
    for s in &traj.steps {
        out.push_str(&format!(
            "{:.6},{:.14e},{:.14e},{:.14e},{:.14e},{:.14e}\n",
            s.t, s.x, s.v, s.a, s.u, s.xg_ddot
        ));
    }
    out
}

/// Roll one policy over one excitation record from the zero state.
/// Divergence does not error here: the episode is truncated and flagged.
pub fn rollout_episode(
    policy: &Policy,
    cfg: &RunConfig,
    record: &[f64],
) -> Result<(Trajectory, RunMetrics)> {
    cfg.validate()?;
    let n_steps = cfg.n_steps();
    if record.len() < n_steps {
        return Err(SctlError::Usage(format!(
            "excitation record has {} samples, need {}",
            record.len(),
            n_steps
        )));
    }
    if let Policy::Guided { actor, .. } = policy {
        if actor.state_dim() != cfg.state_dim() {
            return Err(SctlError::Shape(format!(
                "actor expects state dim {}, config produces {}",
                actor.state_dim(),
                cfg.state_dim()
            )));
        }
    }
    let mut plant = PlantState::default();
    let mut hist = HistoryWindow::new(cfg.history_len);
    let mut traj = Trajectory::default();
    let mut acc = MetricsAccumulator::new();
    for k in 0..n_steps {
        let e = record[k];
        let (raw, u) = match policy {
            Policy::Uncontrolled => (0.0, 0.0),
            Policy::Lqr(p) => (0.0, p.force(plant.x, plant.v)),
            Policy::Guided { actor, lqr, alpha, u_max } => {
                let raw = actor.mean_action(&DVector::from_vec(hist.state()))?;
                (raw, hybrid_action(raw, *u_max, *alpha, lqr.force(plant.x, plant.v), cfg.u_clamp))
            }
        };
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
        let r = compute_reward(next.x, a_next, u, &cfg.reward_weights);
        acc.push(next.x, a_next, u, r);
        traj.steps.push(TrajStep { t: (k + 1) as f64 * cfg.dt, x: next.x, v: next.v, a: a_next, u, xg_ddot: e });
        if let Policy::Guided { lqr, .. } = policy {
            hist.push(a_next, e, raw, lqr.force(next.x, next.v));
        }
        plant = next;
    }
    Ok((traj, acc.finish()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynamics::PlantParams;
    use crate::excitation::generate_record;
    use crate::lqr;
    use crate::neural::{GaussianActor, Mlp};

    #[test]
    fn reward_examples() {
        let w = [1.0, 1e-2, 1e-3];
        assert_eq!(compute_reward(0.0, 0.0, 0.0, &w), 0.0);
        assert!((compute_reward(1.0, 2.0, 3.0, &w) + 1.023).abs() < 1e-15);
        assert_eq!(compute_reward(1.0, 2.0, 3.0, &w), compute_reward(-1.0, -2.0, -3.0, &w));
        assert!(compute_reward(0.3, -5.0, 2.0, &w) <= 0.0);
    }

    #[test]
    fn hybrid_action_examples() {
        assert_eq!(hybrid_action(0.0, 100.0, 0.5, 10.0, None), 5.0);
        assert_eq!(hybrid_action(0.2, 100.0, 0.5, 10.0, None), 25.0);
        // α = 0: pure scaled RL force
        assert_eq!(hybrid_action(0.3, 50.0, 0.0, 999.0, None), 15.0);
        assert_eq!(hybrid_action(1.0, 100.0, 0.5, 10.0, Some(20.0)), 20.0);
    }

    fn short_cfg() -> RunConfig {
        let mut cfg = RunConfig::default();
        cfg.t_final = 2.0;
        cfg.dt = 0.02;
        cfg.excitation.duration = 2.0;
        cfg
    }

    #[test]
    fn lqr_from_rest_without_excitation_stays_at_rest() {
        let cfg = short_cfg();
        let policy = lqr::design(&cfg.assumed_plant, lqr::default_q(), cfg.lqr_r).unwrap();
        let record = vec![0.0; cfg.n_steps()];
        let (traj, m) = rollout_episode(&Policy::Lqr(&policy), &cfg, &record).unwrap();
        assert_eq!(m, RunMetrics::zeros());
        assert!(traj.steps.iter().all(|s| s.x == 0.0 && s.u == 0.0));
    }

    #[test]
    fn uncontrolled_is_plant_only() {
        let cfg = short_cfg();
        let record = generate_record(3, &cfg.excitation).unwrap();
        let (traj, _) = rollout_episode(&Policy::Uncontrolled, &cfg, &record).unwrap();
        // replicate by stepping the plant directly with u = 0
        let mut s = PlantState::default();
        for (k, step) in traj.steps.iter().enumerate() {
            let (next, _) = rk4_step(s, 0.0, record[k], cfg.dt, &cfg.true_plant).unwrap();
            assert_eq!(step.x, next.x);
            assert_eq!(step.v, next.v);
            assert_eq!(step.u, 0.0);
            s = next;
        }
    }

    /// Mismatched-model LQR still attenuates the true nonlinear plant.
    #[test]
    fn lqr_beats_uncontrolled_on_seeded_excitation() {
        let mut cfg = short_cfg();
        cfg.t_final = 10.0;
        cfg.excitation.duration = 10.0;
        let policy = lqr::design(&cfg.assumed_plant, lqr::default_q(), cfg.lqr_r).unwrap();
        let record = generate_record(11, &cfg.excitation).unwrap();
        let (_, unc) = rollout_episode(&Policy::Uncontrolled, &cfg, &record).unwrap();
        let (_, ctl) = rollout_episode(&Policy::Lqr(&policy), &cfg, &record).unwrap();
        assert!(ctl.rms_x < unc.rms_x, "lqr {} vs uncontrolled {}", ctl.rms_x, unc.rms_x);
    }

    #[test]
    fn guided_with_zero_actor_matches_scaled_lqr() {
        let mut cfg = short_cfg();
        cfg.alpha = 0.5;
        let policy = lqr::design(&cfg.assumed_plant, lqr::default_q(), cfg.lqr_r).unwrap();
        let record = generate_record(5, &cfg.excitation).unwrap();
        let actor = GaussianActor { trunk: Mlp::zeros(&[cfg.state_dim(), 4, 2]) };
        let guided = Policy::Guided { actor: &actor, lqr: &policy, alpha: 0.5, u_max: 100.0 };
        let (traj, _) = rollout_episode(&guided, &cfg, &record).unwrap();
        // zero actor ⇒ applied force is exactly α·f_ψ along the realized path
        let mut s = PlantState::default();
        for (k, step) in traj.steps.iter().enumerate() {
            let u = 0.5 * policy.force(s.x, s.v);
            assert_eq!(step.u, u);
            let (next, _) = rk4_step(s, u, record[k], cfg.dt, &cfg.true_plant).unwrap();
            s = next;
        }
    }

    #[test]
    fn short_record_rejected() {
        let cfg = short_cfg();
        assert!(rollout_episode(&Policy::Uncontrolled, &cfg, &[0.0; 3]).is_err());
    }

    #[test]
    fn divergence_truncates_and_flags() {
        let mut cfg = short_cfg();
        // undamped unstable plant: negative damping, no excitation needed
        cfg.true_plant = PlantParams { m: 1.0, c: -40.0, k: 100.0, k3: 0.0 };
        let record = vec![1.0; cfg.n_steps()];
        let (traj, m) = rollout_episode(&Policy::Uncontrolled, &cfg, &record).unwrap();
        assert!(m.diverged);
        assert!(traj.steps.len() < cfg.n_steps());
    }
}
