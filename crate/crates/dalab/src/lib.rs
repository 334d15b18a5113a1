//! Desk-scale laboratory for semi-supervised domain adaptation: small dense
//! networks trained with MMD or adversarial alignment objectives, the full
//! set of closed-form covering-number and concentration bounds that govern
//! them, and Monte-Carlo verification that observed deviations stay inside
//! the theoretical envelopes.
//!
//! The crate is a library first; the `examples/` directory holds one runnable
//! program per capability, and the thin `dalab` binary exposes the same
//! functionality as CLI subcommands.

pub mod activation;
pub mod bounds;
pub mod conc;
pub mod config;
pub mod data;
pub mod emit;
pub mod error;
pub mod fit;
pub mod kernel;
pub mod loss;
pub mod mmd;
pub mod net;
pub mod seeding;
pub mod shallow;
pub mod sweep;
pub mod train;

pub use activation::Activation;
pub use error::{Error, Result};
