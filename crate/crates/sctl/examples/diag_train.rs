//! Diagnostic: full default guided training, episode trends, and evaluation
//! of the trained policy against the LQR and zero-actor baselines.

use std::time::Instant;

use nalgebra::{DMatrix, DVector};
use sctl::excitation::generate_record;
use sctl::harness::{
    derive_seed, rollout_episode, train, Policy, RunConfig, STREAM_EVAL_EXCITATION,
};
use sctl::lqr;
use sctl::neural::{GaussianActor, Mlp};

fn main() {
    let cfg = RunConfig::default();
    let t0 = Instant::now();
    let res = train(&cfg, true).unwrap();
    println!("train: {:.1} min, beta {:.4} lambda {:.4}", t0.elapsed().as_secs_f64() / 60.0, res.agent.beta, res.agent.lambda);
    for (ep, m) in res.metrics.iter().enumerate() {
        if ep % 10 == 0 || ep == cfg.episodes - 1 {
            println!(
                "ep {ep:3}  rms_x {:.4}  rms_xddot {:.4}  rms_u {:.3}  peak_xddot {:.3}  reward {:.1}",
                m.rms_x, m.rms_xddot, m.rms_u, m.peak_xddot, m.total_reward
            );
        }
    }

    let lqr_policy = lqr::design(
        &cfg.assumed_plant,
        DMatrix::from_diagonal(&DVector::from_row_slice(&cfg.lqr_q)),
        cfg.lqr_r,
    )
    .unwrap();
    let zero_actor = GaussianActor { trunk: Mlp::zeros(&[cfg.state_dim(), 4, 2]) };
    let mut sums = [[0.0f64; 3]; 3]; // [policy][rms_x, rms_xddot, rms_u]
    for i in 0..cfg.eval_seeds {
        let record =
            generate_record(derive_seed(cfg.seed, STREAM_EVAL_EXCITATION + i as u64), &cfg.excitation)
                .unwrap();
        let pols: Vec<Policy> = vec![
            Policy::Lqr(&lqr_policy),
            Policy::Guided { actor: &zero_actor, lqr: &lqr_policy, alpha: cfg.alpha, u_max: cfg.u_max },
            Policy::Guided { actor: &res.agent.actor, lqr: &lqr_policy, alpha: cfg.alpha, u_max: cfg.u_max },
        ];
        for (s, pol) in sums.iter_mut().zip(&pols) {
            let (_, m) = rollout_episode(pol, &cfg, &record).unwrap();
            s[0] += m.rms_x;
            s[1] += m.rms_xddot;
            s[2] += m.rms_u;
        }
    }
    let n = cfg.eval_seeds as f64;
    for (name, s) in ["lqr", "guided-zero-actor", "guided-trained"].iter().zip(&sums) {
        println!("{name:20} rms_x {:.4}  rms_xddot {:.4}  rms_u {:.3}", s[0] / n, s[1] / n, s[2] / n);
    }
}
