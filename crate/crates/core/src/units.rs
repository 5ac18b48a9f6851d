//! Physical constants and the conversion layer between the working units
//! (meV, Angstrom, amu, s^-1, Debye) and SI.

/// Reduced Planck constant in J s.
pub const HBAR_J_S: f64 = 1.054_571_817e-34;
/// Reduced Planck constant in meV s.
pub const HBAR_MEV_S: f64 = 6.582_119_569e-13;
/// One meV in joules.
pub const MEV_J: f64 = 1.602_176_634e-22;
/// Atomic mass unit in kg.
pub const AMU_KG: f64 = 1.660_539_066_60e-27;
/// One Angstrom in metres.
pub const ANGSTROM_M: f64 = 1e-10;
/// Bohr radius in Angstrom.
pub const BOHR_ANGSTROM: f64 = 0.529_177_210_903;
/// One e*Angstrom expressed in Debye.
pub const E_ANGSTROM_DEBYE: f64 = 4.803_204_7;

/// hbar^2 / (2 * 1 amu) in meV A^2. Divide by the mass in amu.
pub fn kinetic_prefactor_mev_a2() -> f64 {
    HBAR_J_S * HBAR_J_S / (2.0 * AMU_KG) / MEV_J / (ANGSTROM_M * ANGSTROM_M)
}

/// Energy in meV to angular frequency in s^-1.
#[inline]
pub fn mev_to_angular(e_mev: f64) -> f64 {
    e_mev / HBAR_MEV_S
}

/// Angular frequency in s^-1 to energy in meV.
#[inline]
pub fn angular_to_mev(omega: f64) -> f64 {
    omega * HBAR_MEV_S
}
