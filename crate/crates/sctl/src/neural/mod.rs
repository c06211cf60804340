//! Minimal dense-network stack used by the actor-critic learner.
//!
//! Everything is 64-bit; gradients are exact reverse-mode and are validated
//! against central finite differences in the test suite.

mod actor;
mod adam;
mod checkpoint;
mod mlp;

pub use actor::{
    sample_from_heads, squashed_log_density, ActorHeads, GaussianActor, LOG_STD_MAX, LOG_STD_MIN,
    SQUASH_EPS,
};
pub use adam::{adam_step, AdamState};
pub use checkpoint::{load_mlp, read_mlp, save_mlp, write_mlp, CHECKPOINT_MAGIC};
pub use mlp::{DeltaScratch, ForwardCache, Mlp, MlpGrads, LEAKY_SLOPE};
pub(crate) use mlp::ensure_shape;
