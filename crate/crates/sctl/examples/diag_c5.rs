//! Diagnostic: paired guided/naive 20-episode trainings for the early-safety
//! comparison, plus the uncontrolled peak on the same excitation records.

use sctl::excitation::generate_record;
use sctl::harness::{
    derive_seed, rollout_episode, train, Policy, RunConfig, STREAM_TRAIN_EXCITATION,
};

fn main() {
    let seeds: Vec<u64> = std::env::args().skip(1).map(|a| a.parse().unwrap()).collect();
    for seed in seeds {
        let mut cfg = RunConfig::default();
        cfg.seed = seed;
        cfg.episodes = 20;
        let peak = |m: &[sctl::harness::RunMetrics]| {
            m.iter().map(|e| e.peak_xddot).fold(0.0, f64::max)
        };
        let g = train(&cfg, true).unwrap();
        let nv = train(&cfg, false).unwrap();
        let mut unc: f64 = 0.0;
        for ep in 0..cfg.episodes {
            let record = generate_record(
                derive_seed(cfg.seed, STREAM_TRAIN_EXCITATION + ep as u64),
                &cfg.excitation,
            )
            .unwrap();
            let (_, m) = rollout_episode(&Policy::Uncontrolled, &cfg, &record).unwrap();
            unc = unc.max(m.peak_xddot);
        }
        println!(
            "seed {seed}: guided {:.2}, naive {:.2}, uncontrolled {:.2}",
            peak(&g.metrics),
            peak(&nv.metrics),
            unc
        );
    }
}
