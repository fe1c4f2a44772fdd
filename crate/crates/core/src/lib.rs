//! Simulation engine for stochastic travelling waves on spiny dendrites.
//!
//! Two cable models are implemented: a spike-diffuse-spike model (passive
//! cable coupled to integrate-and-fire spine heads at discrete points) and
//! a Baer-Rinzel model (passive cable coupled through a spine density to
//! Hodgkin-Huxley spine heads). Both can be driven by additive or
//! multiplicative noise — white, Ornstein-Uhlenbeck in time, or spatially
//! correlated through a Q-Wiener spectral field — under an Ito or
//! Stratonovich interpretation, and both report travelling-wave speeds for
//! Monte-Carlo ensembles of realizations.

pub mod br;
pub mod cable;
pub mod config;
pub mod error;
pub mod integrators;
pub mod noise;
pub mod sds;
pub mod sim;
pub mod smallnoise;
pub mod speed;

pub use config::{load_config, DerivedParams, Discretization, ModelConfig, ModelKind, PhysicalParams};
pub use error::Error;
pub use noise::{Interpretation, NoiseConfig, NoiseKind, NoiseTarget};
pub use speed::{EnsembleStats, SpeedResult};

/// Convenience alias used throughout the crate.
pub type Result<T> = std::result::Result<T, Error>;
