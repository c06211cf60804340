//! Lyapunov actor-critic: replay storage and the learner.

mod agent;
mod replay;

pub use agent::{
    actor_loss, actor_loss_grad, critic_loss, critic_loss_grad, lyapunov_value, BatchView,
    DualStats, LacAgent, LacConfig,
};
pub use replay::{ReplayBuffer, Transition};
