//! Deterministic solver for the kinetic Fokker-Planck equation on a truncated
//! phase space `[-L, L]^2 x S^1`.

pub mod field;
pub mod grid;
pub mod operators;
pub mod auxiliary;
pub mod random;
pub mod stepper;
pub mod stationary;
pub mod decay;

pub use field::{Norms, PhaseField};
pub use grid::{wrap_angle, Grid, WeightTable};
pub use operators::{AngularFft, Generator};
pub use auxiliary::{apply_auxiliary, dissipation_terms, AuxiliaryReport, Dissipation, GronwallCoefficients};
pub use stepper::{cfl_bound, Stepper};
pub use stationary::{solve_stationary, StationaryCfg, StationaryReport};
pub use decay::{evolve, measure_decay, DecayCfg, DecayOutcome, DecayReport, Evolution, EvolveOpts, Monitor, Record};
