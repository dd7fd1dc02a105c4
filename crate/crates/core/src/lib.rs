//! Latent policy gradient models of how sequentially trained agents
//! generalise their goals, plus the tooling to test them: a small maze
//! environment with a trainable linear agent, Elo preference fitting,
//! hyperparameter fitting by differentiating through the inner ascent, and
//! an evaluation harness.

pub mod config;
pub mod diagnostics;
pub mod domain;
pub mod elo;
pub mod error;
pub mod eval;
pub mod fit;
pub mod lpg;
pub mod maze;
mod newton;

pub use error::{Error, Result};
