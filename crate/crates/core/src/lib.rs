//! Simulation of discrete-time coined and continuous-time quantum walks, with
//! and without decoherence, plus closed-form reference values to check them
//! against.
//!
//! The crate is organised by subsystem:
//!
//! - [`graphs`]: line, cycle, hypercube, glued trees and edge-list graphs, with
//!   the port pairing used by the coined shift.
//! - [`coined`]: coins, shift, unitary stepping, decoherence channels in
//!   density and trajectory form, multi-coin walks and search.
//! - [`ctqw`]: Hamiltonians, spectral propagation, the dephasing master
//!   equation and the factored hypercube solution.
//! - [`observables`]: distributions, moments, total variation, mixing and
//!   hitting times, periodicity and top-hat fits.
//! - [`oracles`]: closed-form values used to pin simulations.

pub mod coined;
pub mod ctqw;
pub mod error;
pub mod graphs;
pub mod linalg;
pub mod observables;
pub mod oracles;
pub mod rng;

pub use num_complex::Complex64 as C64;

pub use coined::{
    CoinSpec, CoinedWalk, MultiCoinOrder, NoiseChannel, NoiseSpec, Schedule, ShiftRule,
    WalkStateDensity, WalkStatePure,
};
pub use ctqw::{CtqwNoise, CtqwNoiseSpec, HamiltonianSpec, HamiltonianVariant};
pub use error::{Error, Result};
pub use graphs::{GraphKind, GraphSpec, Port, VertexLabel};
pub use observables::{HittingResult, MixingKind, MixingResult, ObservableSeries, PositionDistribution};
pub use oracles::OracleValue;
