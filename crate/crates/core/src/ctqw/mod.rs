//! Continuous-time walks: Hamiltonians, spectral propagation, the dephasing
//! master equation and the factored hypercube solution.

pub mod classical;
pub mod hamiltonian;
pub mod hypercube;
pub mod master;
pub mod spectral;

pub use classical::ClassicalCtrw;
pub use hamiltonian::{HamiltonianSpec, HamiltonianVariant};
pub use hypercube::{hypercube_factored_evolve, product_distribution, product_probability};
pub use master::{
    density_diagonal, evolve_master, evolve_master_with, CtqwNoise, CtqwNoiseSpec, MasterSolution,
    StepControl,
};
pub use spectral::{evolve_ctqw_pure, SpectralCache, SpectralPropagator};
