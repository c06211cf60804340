//! Structural vibration control testbed.
//!
//! Trains a Lyapunov actor-critic controller on a nonlinear single-degree-of-freedom
//! plant under stochastic ground excitation, guided by an LQR policy designed from a
//! deliberately mismatched linear model. The crate is organized around the pipeline:
//!
//! - [`excitation`]: Kanai-Tajimi ground-motion generation
//! - [`dynamics`]: SDOF plant simulation (RK4, zero-order hold)
//! - [`lqr`]: continuous algebraic Riccati solver and state-feedback guidance policy
//! - [`neural`]: dense networks, reverse-mode gradients, Adam, squashed-Gaussian actor
//! - [`lac`]: the Lyapunov actor-critic learner and experience replay
//! - [`harness`]: training/evaluation orchestration, metrics, config, CSV output

pub mod dynamics;
pub mod error;
pub mod excitation;
pub mod harness;
pub mod lac;
pub mod lqr;
pub mod neural;

pub use error::SctlError;
