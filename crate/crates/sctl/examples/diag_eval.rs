//! Diagnostic: mean eval metrics for uncontrolled / LQR / zero-actor guided
//! baselines over the held-out evaluation seeds.

use nalgebra::{DMatrix, DVector};
use sctl::excitation::generate_record;
use sctl::harness::{derive_seed, rollout_episode, Policy, RunConfig, STREAM_EVAL_EXCITATION};
use sctl::lqr;
use sctl::neural::{GaussianActor, Mlp};

fn main() {
    let cfg = RunConfig::default();
    let lqr_policy = lqr::design(
        &cfg.assumed_plant,
        DMatrix::from_diagonal(&DVector::from_row_slice(&cfg.lqr_q)),
        cfg.lqr_r,
    )
    .unwrap();
    println!("K = {:?}", lqr_policy.k);
    let zero_actor = GaussianActor { trunk: Mlp::zeros(&[cfg.state_dim(), 4, 2]) };
    let mut rows: Vec<(String, Vec<f64>, Vec<f64>, Vec<f64>, Vec<f64>)> = vec![
        ("uncontrolled".into(), vec![], vec![], vec![], vec![]),
        ("lqr".into(), vec![], vec![], vec![], vec![]),
        ("guided-zero-actor".into(), vec![], vec![], vec![], vec![]),
    ];
    for i in 0..cfg.eval_seeds {
        let record =
            generate_record(derive_seed(cfg.seed, STREAM_EVAL_EXCITATION + i as u64), &cfg.excitation)
                .unwrap();
        let pols: Vec<Policy> = vec![
            Policy::Uncontrolled,
            Policy::Lqr(&lqr_policy),
            Policy::Guided { actor: &zero_actor, lqr: &lqr_policy, alpha: cfg.alpha, u_max: cfg.u_max },
        ];
        for (row, pol) in rows.iter_mut().zip(&pols) {
            let (traj, m) = rollout_episode(pol, &cfg, &record).unwrap();
            row.1.push(m.rms_x);
            row.2.push(m.rms_xddot);
            row.3.push(m.rms_u);
            let peak_u = traj.steps.iter().map(|s| s.u.abs()).fold(0.0, f64::max);
            row.4.push(peak_u);
        }
    }
    let mean = |v: &[f64]| v.iter().sum::<f64>() / v.len() as f64;
    for (name, x, a, u, pk) in &rows {
        println!(
            "{name:20} rms_x {:.4}  rms_xddot {:.4}  rms_u {:.3}  peak_u {:.3}",
            mean(x),
            mean(a),
            mean(u),
            mean(pk)
        );
    }
}
