//! Actor–critic reinforcement learning with data-driven exploration for
//! scalar-state stochastic linear–quadratic control.
//!
//! The crate is organised bottom-up:
//!
//! - [`model`]: the environment and shared parameter containers,
//! - [`oracle`]: closed-form optimal gain, value functions and regret,
//! - [`sim`]: Euler–Maruyama episodes under a Gaussian policy,
//! - [`policy`]: densities, scores, critic forms and projections,
//! - [`learner`]: the adaptive training loop,
//! - [`baselines`]: fixed-schedule and model-based comparison learners,
//! - [`harness`]: seeded multi-run experiments, aggregation and CSV output,
//! - [`config`]: the key=value configuration format.

pub mod baselines;
pub mod config;
pub mod error;
pub mod harness;
pub mod learner;
pub mod model;
pub mod oracle;
pub mod policy;
pub mod sim;

pub use error::{Error, Result};
pub use model::{sample_random_model, validate_model, CriticState, DerivedModel, Model, ModelParams, PolicyParams};
