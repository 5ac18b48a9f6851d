//! Low-frequency electric-field noise from correlated adatom dipole
//! fluctuators on a surface.
//!
//! Pipeline: adatom-surface potential and bound states ([`potential`]),
//! permutation-symmetric occupation basis ([`basis`]), phonon-driven rate
//! equation and its eigen-decomposition ([`master`]), and the Lorentzian
//! noise spectrum ([`spectrum`]). [`oracle`] holds independent numerical
//! cross-checks.

pub mod basis;
pub mod error;
pub mod master;
pub mod oracle;
pub mod potential;
pub mod spectrum;
mod tridiag;
pub mod units;

pub use basis::{enumerate_basis, state_dipole, SymmetricBasis, SymmetricState};
pub use error::{Error, Result};
pub use master::{build_rate_matrix, decompose, steady_state, EigenDecomposition, RateMatrix, ThermalParams, TransitionSet};
pub use oracle::{correlator_spectrum, gillespie_spectrum, OracleReport, TauGrid, TrajectoryConfig};
pub use potential::{
    solve_bound_states, BoundStateSolution, LevelStructure, MaterialParams, PotentialParams,
};
pub use spectrum::{
    aggregate_patches, evaluate_spectrum, exact_spectrum, lorentzian_weights, low_temperature_spectrum,
    pink_noise_closed_form, second_order_white_noise, FrequencyGrid, LorentzianPair, PatchDistribution,
    SpectralDecomposition,
};
