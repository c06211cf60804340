//! Times the learner's per-step cost at the default network sizes.
//!
//!     cargo run --release --example bench_update -- [iters]

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;
use sctl::lac::{LacAgent, LacConfig, Transition};

fn main() {
    let iters: usize = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(300);
    let cfg = LacConfig::default();
    let state_dim = 16;
    let mut agent = LacAgent::new(state_dim, cfg.clone(), 7).expect("agent");
    let mut rng = ChaCha12Rng::seed_from_u64(11);
    let pool: Vec<Transition> = (0..4096)
        .map(|_| Transition {
            s: (0..state_dim).map(|_| rng.random_range(-1.0..1.0)).collect(),
            u_tilde: rng.random_range(-0.99..0.99),
            r: -rng.random_range(0.0..1.0),
            s_next: (0..state_dim).map(|_| rng.random_range(-1.0..1.0)).collect(),
            a_next_hint: rng.random_range(-0.99..0.99),
        })
        .collect();

    // warm up allocations and caches
    for _ in 0..20 {
        let batch: Vec<&Transition> = (0..cfg.batch_size).map(|_| &pool[rng.random_range(0..pool.len())]).collect();
        agent.update_step(&batch).expect("update");
        agent.polyak_update();
    }

    let t0 = std::time::Instant::now();
    for _ in 0..iters {
        let batch: Vec<&Transition> = (0..cfg.batch_size).map(|_| &pool[rng.random_range(0..pool.len())]).collect();
        agent.update_step(&batch).expect("update");
        agent.polyak_update();
    }
    let dt = t0.elapsed().as_secs_f64();
    println!(
        "{iters} update+polyak steps: {:.3} s total, {:.3} ms/step",
        dt,
        dt / iters as f64 * 1e3
    );
}
