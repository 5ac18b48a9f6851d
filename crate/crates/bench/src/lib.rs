//! Shared fixtures for the benchmarks.

use surfnoise_core::{solve_bound_states, LevelStructure, MaterialParams, PotentialParams};

/// The 250 meV reference well on gold.
pub fn reference_well() -> PotentialParams {
    PotentialParams::new(250.0, 3.1, 1.86, 100.0, 4.0).expect("valid well")
}

pub fn reference_levels(m: usize) -> LevelStructure {
    solve_bound_states(&reference_well(), &MaterialParams::gold(0.0), m).expect("bound levels")
}
