//! Fibre lay-down on a moving conveyor belt.
//!
//! The crate covers the stochastic particle model, a finite-volume solver for the
//! kinetic Fokker-Planck equation on a truncated phase space, the Lyapunov weight
//! used to control the belt term, and the explicit hypocoercivity constant chain.

pub mod error;
pub mod potential;
pub mod weight;
pub mod plane;
pub mod elliptic;
pub mod constants;
pub mod kinetic;
pub mod sde;
pub mod cli;

pub use error::{Error, Result};
pub use potential::{PotentialEval, PotentialKind, PotentialSpec, QuadratureCfg};
pub use weight::{weight_params, LyapunovReport, SearchCfg, WeightParams};
