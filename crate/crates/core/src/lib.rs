//! Simulation and verification of measurement-interrupted decay chains.
//!
//! The crate evolves the unreduced square-modulus dynamics of an
//! adjacent-coupled chain ([`born`]), runs the sequential reduction process
//! cycle by cycle ([`rule4`], [`observer`]) and compares the two count
//! distributions statistically ([`ensemble`], [`stats`]).

pub mod born;
pub mod chain;
pub mod cli;
pub mod ensemble;
pub mod error;
pub mod observer;
pub mod rule4;
pub mod stats;
pub mod stream;

pub use born::{born_distribution, currents, CurrentVector};
pub use chain::{make_n_atom_chain, n_atom_analytic, two_atom_analytic, ChainSpec, ComponentDistribution};
pub use ensemble::{compare, gillespie_oracle, run_ensemble, ComparisonReport, EnsembleResult};
pub use error::{Error, Result};
pub use observer::{run_trajectory, TrajectoryRecord};
pub use rule4::{cycle_rate, hit_time_cdf, reduce, sample_hit, CycleState, HitSample};
