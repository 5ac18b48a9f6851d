//! Adatom-surface exp-3 potential: bound vibrational levels, level dipoles
//! and pairwise phonon transition rates.
//!
//! The well is
//!
//! ```text
//! U(z) = b/(b-3) U0 [ 3/b exp(b (1 - z/z0)) - (z0/z)^3 ],   b = beta0 z0
//! ```
//!
//! Bound states come from a three-point finite-difference Hamiltonian on a
//! uniform grid from `U(z_min) = 10 U0` (or the crest of the repulsive
//! barrier, if lower) to `|U(z_max)| = 1e-4 U0`.

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::tridiag::SymTridiagonal;
use crate::units::{
    kinetic_prefactor_mev_a2, mev_to_angular, AMU_KG, ANGSTROM_M, BOHR_ANGSTROM,
    E_ANGSTROM_DEBYE, HBAR_J_S, MEV_J,
};

/// Dipole prefactor 0.47 e a0^(1/2) alpha^(3/2) <z^-4>.
const DIPOLE_PREFACTOR: f64 = 0.47;
/// Inner grid edge: where the repulsive wall reaches this multiple of U0.
const WALL_HEIGHT: f64 = 10.0;
/// Outer grid edge: where |U| falls below this fraction of U0.
const TAIL_FRACTION: f64 = 1e-4;
/// Default grid points per harmonic oscillator length sqrt(hbar / m w0).
const POINTS_PER_OSCILLATOR_LENGTH: f64 = 80.0;

/// exp-3 interaction parameters and adatom properties.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PotentialParams {
    /// Well depth U0 (meV).
    #[serde(rename = "U0_meV")]
    pub depth_mev: f64,
    /// Equilibrium distance z0 (A).
    #[serde(rename = "z0_A")]
    pub z0_angstrom: f64,
    /// Reciprocal repulsion range beta0 (1/A).
    #[serde(rename = "beta0_per_A")]
    pub beta0_per_angstrom: f64,
    /// Adatom mass (amu).
    #[serde(rename = "mass_amu")]
    pub mass_amu: f64,
    /// Atomic polarizability alpha (A^3).
    #[serde(rename = "polarizability_A3")]
    pub polarizability_a3: f64,
}

impl PotentialParams {
    pub fn new(
        depth_mev: f64,
        z0_angstrom: f64,
        beta0_per_angstrom: f64,
        mass_amu: f64,
        polarizability_a3: f64,
    ) -> Result<Self> {
        let p = Self {
            depth_mev,
            z0_angstrom,
            beta0_per_angstrom,
            mass_amu,
            polarizability_a3,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        let checks = [
            ("U0_meV", self.depth_mev),
            ("z0_A", self.z0_angstrom),
            ("beta0_per_A", self.beta0_per_angstrom),
            ("mass_amu", self.mass_amu),
            ("polarizability_A3", self.polarizability_a3),
        ];
        for (name, v) in checks {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::invalid(format!("{name} must be finite and > 0, got {v}")));
            }
        }
        if self.beta_tilde() <= 4.0 {
            return Err(Error::invalid(format!(
                "beta0 * z0 = {} must exceed 4 for a real harmonic frequency",
                self.beta_tilde()
            )));
        }
        Ok(())
    }

    /// Dimensionless steepness beta0 * z0.
    pub fn beta_tilde(&self) -> f64 {
        self.beta0_per_angstrom * self.z0_angstrom
    }

    fn prefactor(&self) -> f64 {
        let b = self.beta_tilde();
        b / (b - 3.0) * self.depth_mev
    }

    /// U(z) in meV without argument checks.
    pub(crate) fn energy_at(&self, z: f64) -> f64 {
        let b = self.beta_tilde();
        let r = self.z0_angstrom / z;
        self.prefactor() * (3.0 / b * (b * (1.0 - z / self.z0_angstrom)).exp() - r * r * r)
    }

    /// dU/dz in meV/A, analytic.
    pub(crate) fn gradient_at(&self, z: f64) -> f64 {
        let b = self.beta_tilde();
        let z0 = self.z0_angstrom;
        let r = z0 / z;
        self.prefactor() * (-3.0 / z0 * (b * (1.0 - z / z0)).exp() + 3.0 * r * r * r / z)
    }

    /// Harmonic force constant U''(z0) in meV/A^2.
    fn force_constant(&self) -> f64 {
        let b = self.beta_tilde();
        3.0 * self.depth_mev * (b * b - 4.0 * b) / (self.z0_angstrom.powi(2) * (b - 3.0))
    }

    fn mass_kg(&self) -> f64 {
        self.mass_amu * AMU_KG
    }
}

/// Substrate and coverage parameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MaterialParams {
    /// Phonon (sound) speed c (m/s).
    #[serde(rename = "phonon_speed_m_per_s")]
    pub phonon_speed: f64,
    /// Bulk number density (1/A^3).
    #[serde(rename = "bulk_density_per_A3")]
    pub bulk_density: f64,
    /// Mass of one bulk atom (amu); with the number density it gives the
    /// mass density entering the phonon coupling.
    #[serde(rename = "bulk_atom_mass_amu")]
    pub bulk_atom_mass_amu: f64,
    /// Adatom areal density R (1/A^2).
    #[serde(rename = "adatom_density_per_A2")]
    pub adatom_density: f64,
}

impl MaterialParams {
    pub fn new(
        phonon_speed: f64,
        bulk_density: f64,
        bulk_atom_mass_amu: f64,
        adatom_density: f64,
    ) -> Result<Self> {
        let m = Self {
            phonon_speed,
            bulk_density,
            bulk_atom_mass_amu,
            adatom_density,
        };
        m.validate()?;
        Ok(m)
    }

    /// Gold substrate: c = 3240 m/s, 0.059 atoms/A^3 of 196.97 amu.
    pub fn gold(adatom_density: f64) -> Self {
        Self {
            phonon_speed: 3240.0,
            bulk_density: 0.059,
            bulk_atom_mass_amu: 196.97,
            adatom_density,
        }
    }

    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("phonon_speed_m_per_s", self.phonon_speed),
            ("bulk_density_per_A3", self.bulk_density),
            ("bulk_atom_mass_amu", self.bulk_atom_mass_amu),
        ] {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::invalid(format!("{name} must be finite and > 0, got {v}")));
            }
        }
        // zero coverage is allowed (it simply yields C = 0)
        if !(self.adatom_density.is_finite() && self.adatom_density >= 0.0) {
            return Err(Error::invalid(format!(
                "adatom_density_per_A2 must be finite and >= 0, got {}",
                self.adatom_density
            )));
        }
        Ok(())
    }

    /// Bulk mass density in kg/m^3.
    pub fn mass_density_si(&self) -> f64 {
        self.bulk_density / ANGSTROM_M.powi(3) * self.bulk_atom_mass_amu * AMU_KG
    }
}

/// U(z) in meV.
pub fn evaluate_potential(p: &PotentialParams, z: f64) -> Result<f64> {
    p.validate()?;
    if !(z.is_finite() && z > 0.0) {
        return Err(Error::domain(format!("distance must be > 0, got {z}")));
    }
    Ok(p.energy_at(z))
}

/// Harmonic angular frequency w0 (1/s) about z0.
pub fn harmonic_frequency(p: &PotentialParams) -> Result<f64> {
    p.validate()?;
    let k_si = p.force_constant() * MEV_J / (ANGSTROM_M * ANGSTROM_M);
    Ok((k_si / p.mass_kg()).sqrt())
}

/// Cubic-order anharmonic shift delta = w12 - w23 (1/s).
pub fn anharmonic_shift(p: &PotentialParams) -> Result<f64> {
    p.validate()?;
    let b = p.beta_tilde();
    let z0 = p.z0_angstrom * ANGSTROM_M;
    Ok(5.0 * HBAR_J_S / (24.0 * p.mass_kg()) * (b * b - 20.0).powi(2)
        / (z0 * z0 * (b - 4.0).powi(2)))
}

/// Harmonic estimate of the fundamental emission rate w0^4 m / (4 pi c^3 rho).
pub fn harmonic_rate(p: &PotentialParams, mat: &MaterialParams) -> Result<f64> {
    mat.validate()?;
    let w0 = harmonic_frequency(p)?;
    Ok(w0.powi(4) * p.mass_kg()
        / (4.0 * std::f64::consts::PI * mat.phonon_speed.powi(3) * mat.mass_density_si()))
}

/// Correlation coverage sqrt(R) * 2 pi c / w0. Values of order one or larger
/// mark the collectively correlated regime.
pub fn coverage_parameter(p: &PotentialParams, mat: &MaterialParams) -> Result<f64> {
    mat.validate()?;
    let w0 = harmonic_frequency(p)?;
    let wavelength_a = 2.0 * std::f64::consts::PI * mat.phonon_speed / ANGSTROM_M / w0;
    Ok(mat.adatom_density.sqrt() * wavelength_a)
}

/// Bound levels with their dipoles and pairwise emission rates.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "LevelStructureRepr", into = "LevelStructureRepr")]
pub struct LevelStructure {
    energies_mev: Vec<f64>,
    dipoles_debye: Vec<f64>,
    rates: Vec<Vec<f64>>,
    omega0: f64,
    delta: f64,
}

#[derive(Serialize, Deserialize)]
struct LevelStructureRepr {
    #[serde(rename = "energies_meV")]
    energies_mev: Vec<f64>,
    dipoles_debye: Vec<f64>,
    rates_per_s: Vec<Vec<f64>>,
    omega0: f64,
    delta: f64,
}

impl TryFrom<LevelStructureRepr> for LevelStructure {
    type Error = Error;

    fn try_from(r: LevelStructureRepr) -> Result<Self> {
        LevelStructure::with_reference(r.energies_mev, r.dipoles_debye, r.rates_per_s, r.omega0, r.delta)
    }
}

impl From<LevelStructure> for LevelStructureRepr {
    fn from(l: LevelStructure) -> Self {
        Self {
            energies_mev: l.energies_mev,
            dipoles_debye: l.dipoles_debye,
            rates_per_s: l.rates,
            omega0: l.omega0,
            delta: l.delta,
        }
    }
}

impl LevelStructure {
    /// Build from explicit levels. `rates[mu][nu]` is read for `mu < nu`;
    /// the table is symmetrised. The reference w0 and delta are taken from
    /// the level spacings.
    pub fn new(energies_mev: Vec<f64>, dipoles_debye: Vec<f64>, rates: Vec<Vec<f64>>) -> Result<Self> {
        if energies_mev.len() < 2 {
            return Err(Error::InsufficientLevels {
                found: energies_mev.len(),
            });
        }
        let w12 = mev_to_angular(energies_mev[1] - energies_mev[0]);
        let delta = if energies_mev.len() > 2 {
            w12 - mev_to_angular(energies_mev[2] - energies_mev[1])
        } else {
            0.0
        };
        Self::with_reference(energies_mev, dipoles_debye, rates, w12, delta)
    }

    /// Like [`LevelStructure::new`] but with externally supplied reporting
    /// values for w0 and delta.
    pub fn with_reference(
        energies_mev: Vec<f64>,
        dipoles_debye: Vec<f64>,
        rates: Vec<Vec<f64>>,
        omega0: f64,
        delta: f64,
    ) -> Result<Self> {
        let m = energies_mev.len();
        if m < 2 {
            return Err(Error::InsufficientLevels { found: m });
        }
        if dipoles_debye.len() != m || rates.len() != m || rates.iter().any(|r| r.len() != m) {
            return Err(Error::domain(format!(
                "level table dimensions disagree: {m} energies, {} dipoles, {} rate rows",
                dipoles_debye.len(),
                rates.len()
            )));
        }
        if energies_mev.iter().any(|e| !e.is_finite() || *e >= 0.0) {
            return Err(Error::domain("level energies must be finite and below the dissociation threshold"));
        }
        if energies_mev.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::domain("level energies must be strictly increasing"));
        }
        if dipoles_debye.iter().any(|d| !d.is_finite() || *d <= 0.0) {
            return Err(Error::domain("level dipoles must be finite and > 0"));
        }
        let mut sym = vec![vec![0.0; m]; m];
        for mu in 0..m {
            for nu in (mu + 1)..m {
                let g = rates[mu][nu];
                if !g.is_finite() || g < 0.0 {
                    return Err(Error::domain(format!("rate ({mu},{nu}) must be finite and >= 0, got {g}")));
                }
                sym[mu][nu] = g;
                sym[nu][mu] = g;
            }
        }
        Ok(Self {
            energies_mev,
            dipoles_debye,
            rates: sym,
            omega0,
            delta,
        })
    }

    pub fn count(&self) -> usize {
        self.energies_mev.len()
    }

    pub fn energies_mev(&self) -> &[f64] {
        &self.energies_mev
    }

    pub fn dipoles(&self) -> &[f64] {
        &self.dipoles_debye
    }

    /// Emission rate Gamma0 between levels `mu` and `nu` (order-insensitive).
    pub fn rate(&self, mu: usize, nu: usize) -> f64 {
        self.rates[mu][nu]
    }

    pub fn rates(&self) -> &[Vec<f64>] {
        &self.rates
    }

    /// w_{mu nu} = w_nu - w_mu in 1/s.
    pub fn transition_frequency(&self, mu: usize, nu: usize) -> f64 {
        mev_to_angular(self.energies_mev[nu] - self.energies_mev[mu])
    }

    /// Excitation frequency of level `mu` above the ground level, 1/s.
    pub fn excitation_frequency(&self, mu: usize) -> f64 {
        self.transition_frequency(0, mu)
    }

    /// Numerical fundamental w12, the reference for beta * w0.
    pub fn fundamental_frequency(&self) -> f64 {
        self.transition_frequency(0, 1)
    }

    /// Reported harmonic w0 (1/s).
    pub fn omega0(&self) -> f64 {
        self.omega0
    }

    /// Reported anharmonic shift (1/s).
    pub fn delta(&self) -> f64 {
        self.delta
    }

    /// Keep the lowest `m` levels.
    pub fn truncated(&self, m: usize) -> Result<Self> {
        if m < 2 {
            return Err(Error::domain("at least two levels must be retained"));
        }
        if m >= self.count() {
            return Ok(self.clone());
        }
        Ok(Self {
            energies_mev: self.energies_mev[..m].to_vec(),
            dipoles_debye: self.dipoles_debye[..m].to_vec(),
            rates: self.rates[..m].iter().map(|r| r[..m].to_vec()).collect(),
            omega0: self.omega0,
            delta: self.delta,
        })
    }

    /// Drop levels bound by less than `kt_mev` (they would be thermally
    /// released).
    pub fn truncated_bound_margin(&self, kt_mev: f64) -> Result<Self> {
        let keep = self.energies_mev.iter().take_while(|e| -**e >= kt_mev).count();
        if keep < 2 {
            return Err(Error::InsufficientLevels { found: keep });
        }
        self.truncated(keep)
    }

    /// Stable short hash of the level table, used as spectrum provenance.
    pub fn fingerprint(&self) -> String {
        let mut h = Sha256::new();
        for v in self
            .energies_mev
            .iter()
            .chain(&self.dipoles_debye)
            .chain(self.rates.iter().flatten())
        {
            h.update(v.to_bits().to_le_bytes());
        }
        let digest = h.finalize();
        digest[..8].iter().map(|b| format!("{b:02x}")).collect()
    }
}

/// Finite-difference grid settings.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct GridOptions {
    /// Uniform spacing in A; `None` picks a fraction of the oscillator length.
    pub spacing_angstrom: Option<f64>,
}

/// Grid solution: sample points, normalised wavefunctions and derived levels.
#[derive(Debug, Clone)]
pub struct BoundStateSolution {
    pub z: Vec<f64>,
    pub spacing: f64,
    /// `wavefunctions[mu][i]` with sum_i psi^2 * spacing = 1.
    pub wavefunctions: Vec<Vec<f64>>,
    pub levels: LevelStructure,
}

impl BoundStateSolution {
    /// <mu| f(z) |nu> by quadrature on the solver grid.
    pub fn matrix_element(&self, mu: usize, nu: usize, f: impl Fn(f64) -> f64) -> f64 {
        let (a, b) = (&self.wavefunctions[mu], &self.wavefunctions[nu]);
        self.z
            .iter()
            .zip(a.iter().zip(b))
            .map(|(z, (x, y))| x * y * f(*z))
            .sum::<f64>()
            * self.spacing
    }
}

/// Bound levels of the exp-3 well with default grid settings.
pub fn solve_bound_states(
    p: &PotentialParams,
    mat: &MaterialParams,
    max_levels: usize,
) -> Result<LevelStructure> {
    Ok(solve_bound_states_with(p, mat, max_levels, &GridOptions::default())?.levels)
}

/// Bound levels plus the grid wavefunctions.
pub fn solve_bound_states_with(
    p: &PotentialParams,
    mat: &MaterialParams,
    max_levels: usize,
    grid: &GridOptions,
) -> Result<BoundStateSolution> {
    p.validate()?;
    mat.validate()?;
    if max_levels < 2 {
        return Err(Error::domain("max_levels must be at least 2"));
    }
    let kinetic = kinetic_prefactor_mev_a2() / p.mass_amu;
    let z0 = p.z0_angstrom;
    let u0 = p.depth_mev;

    // The r^-3 term wins as z -> 0, so the wall is a finite barrier with its
    // crest at z_b. The grid starts at 10 U0 on the wall or at the crest.
    let z_b = bisect(|z| p.gradient_at(z), 1e-3 * z0, 0.999 * z0);
    let wall = (WALL_HEIGHT * u0).min(p.energy_at(z_b));
    let z_min = bisect(|z| p.energy_at(z) - wall, z_b, z0);
    let z_max = bisect(|z| p.energy_at(z) + TAIL_FRACTION * u0, z0, 1e6 * z0);

    let spacing = match grid.spacing_angstrom {
        Some(h) if h.is_finite() && h > 0.0 => h,
        Some(h) => return Err(Error::domain(format!("grid spacing must be > 0, got {h}"))),
        None => {
            let hbar_w0 = kinetic_prefactor_mev_a2().sqrt()
                * (2.0 * p.force_constant() / p.mass_amu).sqrt();
            let osc_len = (2.0 * kinetic / hbar_w0).sqrt();
            osc_len / POINTS_PER_OSCILLATOR_LENGTH
        }
    };
    // Richardson: the three-point error is O(h^2), so combining spacings h and
    // 2h cancels the leading term of every eigenvalue.
    let coarse = solve_grid(p, z_min, z_max, 2.0 * spacing, max_levels)?;
    let fine = solve_grid(p, z_min, z_max, spacing, max_levels)?;
    let m = coarse.energies.len().min(fine.energies.len());
    let energies: Vec<f64> = (0..m)
        .map(|k| (4.0 * fine.energies[k] - coarse.energies[k]) / 3.0)
        .collect();
    let z = fine.z;
    let mut vectors = fine.vectors;
    vectors.truncate(m);

    let mut sol = BoundStateSolution {
        z,
        spacing,
        wavefunctions: vectors,
        levels: LevelStructure {
            energies_mev: vec![],
            dipoles_debye: vec![],
            rates: vec![],
            omega0: 0.0,
            delta: 0.0,
        },
    };

    let alpha = p.polarizability_a3;
    let dipole_scale = DIPOLE_PREFACTOR * BOHR_ANGSTROM.sqrt() * alpha.powf(1.5) * E_ANGSTROM_DEBYE;
    let dipoles: Vec<f64> = (0..m)
        .map(|mu| dipole_scale * sol.matrix_element(mu, mu, |z| z.powi(-4)))
        .collect();

    let grad_si = MEV_J / ANGSTROM_M;
    let rate_denominator = 2.0 * std::f64::consts::PI * HBAR_J_S * mat.phonon_speed.powi(3) * mat.mass_density_si();
    let mut rates = vec![vec![0.0; m]; m];
    for mu in 0..m {
        for nu in (mu + 1)..m {
            let g = sol.matrix_element(mu, nu, |z| p.gradient_at(z)) * grad_si;
            let w = mev_to_angular(energies[nu] - energies[mu]);
            let rate = g * g * w / rate_denominator;
            rates[mu][nu] = rate;
            rates[nu][mu] = rate;
        }
    }
    sol.levels = LevelStructure::with_reference(
        energies,
        dipoles,
        rates,
        harmonic_frequency(p)?,
        anharmonic_shift(p)?,
    )?;
    Ok(sol)
}

struct GridSolve {
    z: Vec<f64>,
    energies: Vec<f64>,
    vectors: Vec<Vec<f64>>,
}

/// Lowest bound eigenpairs of the three-point Hamiltonian at one spacing.
/// Vectors are normalised so that sum psi^2 h = 1.
fn solve_grid(p: &PotentialParams, z_min: f64, z_max: f64, spacing: f64, max_levels: usize) -> Result<GridSolve> {
    let kinetic = kinetic_prefactor_mev_a2() / p.mass_amu;
    let u0 = p.depth_mev;
    let n = ((z_max - z_min) / spacing).floor() as usize;
    if n < 16 {
        return Err(Error::domain(format!("grid of {n} points is too coarse")));
    }
    let z: Vec<f64> = (1..=n).map(|i| z_min + i as f64 * spacing).collect();
    let hop = kinetic / (spacing * spacing);
    let diag: Vec<f64> = z.iter().map(|&zi| 2.0 * hop + p.energy_at(zi)).collect();
    let h = SymTridiagonal::new(diag, vec![-hop; n - 1]);

    // Below U(z_max) a state is classically forbidden at the outer edge; the
    // grid states between U(z_max) and 0 are box artefacts.
    let bound = h.count_below(-TAIL_FRACTION * u0);
    let m = bound.min(max_levels);
    if m < 2 {
        return Err(Error::InsufficientLevels { found: bound });
    }

    let tol = 1e-13 * u0;
    let scale = {
        let (lo, hi) = h.gershgorin();
        lo.abs().max(hi.abs())
    };
    let mut energies: Vec<f64> = Vec::with_capacity(m);
    let mut vectors: Vec<Vec<f64>> = Vec::with_capacity(m);
    for k in 0..m {
        let e = h.eigenvalue(k, tol);
        // orthogonalise only against numerically clustered neighbours
        let cluster: Vec<&[f64]> = energies
            .iter()
            .zip(&vectors)
            .filter(|(ep, _)| (e - **ep).abs() < 1e-8 * u0)
            .map(|(_, v)| v.as_slice())
            .collect();
        let (mut v, residual) = h.eigenvector(e, &cluster);
        if residual > 1e-8 * scale {
            return Err(Error::Convergence {
                level: k,
                residual,
                grid_points: n,
                spacing_angstrom: spacing,
            });
        }
        let peak = v.iter().fold(0.0f64, |a, x| a.max(x.abs()));
        if let Some(first) = v.iter().find(|x| x.abs() > 1e-3 * peak) {
            if *first < 0.0 {
                v.iter_mut().for_each(|x| *x = -*x);
            }
        }
        energies.push(e);
        vectors.push(v);
    }
    let norm = spacing.sqrt();
    for v in &mut vectors {
        v.iter_mut().for_each(|x| *x /= norm);
    }
    Ok(GridSolve { z, energies, vectors })
}

/// Root of a monotone function on [lo, hi] by bisection.
fn bisect(f: impl Fn(f64) -> f64, mut lo: f64, mut hi: f64) -> f64 {
    let f_hi = f(hi);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if (f(mid) > 0.0) == (f_hi > 0.0) {
            hi = mid;
        } else {
            lo = mid;
        }
        if hi - lo < 1e-12 * hi.abs() {
            break;
        }
    }
    0.5 * (lo + hi)
}
