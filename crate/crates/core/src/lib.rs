//! Optimal commitment in finite-horizon stochastic principal-agent games
//! under hindsight observability.
//!
//! The crate computes ε-optimal incentive-compatible commitment policies via
//! a dynamic program over inducible value polytopes, evaluates them exactly on
//! small instances, and runs an explore-then-commit learner that measures
//! regret for both players.
//!
//! Modules, bottom-up:
//! - [`model`]: the game, its validation and sampling.
//! - [`lp`]: a dense two-phase simplex solver.
//! - [`geometry`]: 2D/3D convex hulls and halfspace forms.
//! - [`valueset_dp`]: per-step constraint systems and the value-polytope DP.
//! - [`policy_forward`]: on-the-fly policy queries and rollouts.
//! - [`oracle`]: exact evaluation, best response and small-instance optima.
//! - [`learning`]: exploration, δ-IC planning and regret reports.

pub mod error;
pub mod fixtures;
pub mod geometry;
pub mod learning;
pub mod lp;
pub mod model;
pub mod oracle;
pub mod policy_forward;
pub mod valueset_dp;

pub use error::{Error, LpError, ModelError, Result};
pub use model::{GameModel, History, StateActionKey, StepInteraction};
