//! Experiment orchestration: configuration, training loop, evaluation
//! rollouts, metrics, and report tables.

mod artifacts;
mod config;
mod history;
mod metrics;
mod report;
mod rollout;
mod train;

pub use artifacts::{load_actor, save_agent};
pub use config::RunConfig;
pub use history::HistoryWindow;
pub use metrics::{metrics_csv, MetricsAccumulator, RunMetrics};
pub use report::{summarize, Summary};
pub use rollout::{
    compute_reward, hybrid_action, rollout_episode, trajectory_csv, Policy, TrajStep, Trajectory,
};
pub use train::{train, TrainResult};

/// Named RNG streams derived from the master seed. Training excitation,
/// evaluation excitation, network initialization, and replay sampling all draw
/// from disjoint streams so evaluation records are held out by construction.
pub const STREAM_AGENT: u64 = 1;
pub const STREAM_REPLAY: u64 = 2;
pub const STREAM_TRAIN_EXCITATION: u64 = 0x1_0000;
pub const STREAM_EVAL_EXCITATION: u64 = 0x2_0000;

/// SplitMix64 finalizer over (master, stream); decorrelates nearby seeds.
pub fn derive_seed(master: u64, stream: u64) -> u64 {
    let mut z = master ^ stream.wrapping_mul(0x9e37_79b9_7f4a_7c15);
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}
