//! Noise spectrum of the summed dipole as a sum of Lorentzians, its
//! low-temperature limits, and patch aggregation.
//!
//! `S(w) = sum_k C_k (-lambda_k) / (lambda_k^2 + w^2)` in Debye^2 s.

use std::collections::BTreeMap;
use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::basis::{enumerate_basis, SymmetricBasis};
use crate::error::{Error, Result};
use crate::master::{build_rate_matrix, decompose, EigenDecomposition, ThermalParams, TransitionSet};
use crate::potential::LevelStructure;

/// Below this w / Gamma0 the closed-form pink spectrum uses its series.
const PINK_SERIES_THRESHOLD: f64 = 1e-3;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub n_atoms: usize,
    pub n_levels: usize,
    pub temperature_ratio: f64,
    pub potential_hash: String,
}

/// One Lorentzian: decay rate `lambda` (< 0, 1/s) and weight `C_k` (Debye^2).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LorentzianPair {
    #[serde(rename = "lambda_per_s")]
    pub lambda: f64,
    #[serde(rename = "C_k")]
    pub weight: f64,
}

impl LorentzianPair {
    pub fn at(&self, omega: f64) -> f64 {
        self.weight * -self.lambda / (self.lambda * self.lambda + omega * omega)
    }

    /// Zero-frequency contribution C_k / |lambda_k|.
    pub fn zero_frequency(&self) -> f64 {
        self.weight / -self.lambda
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpectralDecomposition {
    pairs: Vec<LorentzianPair>,
    #[serde(rename = "dipoles_debye")]
    dipoles: Vec<f64>,
    provenance: Provenance,
    /// Stationary variance of the summed dipole, Debye^2.
    variance: f64,
}

impl SpectralDecomposition {
    pub fn new(
        pairs: Vec<LorentzianPair>,
        dipoles: Vec<f64>,
        provenance: Provenance,
        variance: f64,
    ) -> Result<Self> {
        for p in &pairs {
            if !(p.lambda.is_finite() && p.lambda < 0.0) {
                return Err(Error::domain(format!("decay rate must be finite and < 0, got {}", p.lambda)));
            }
            if !(p.weight.is_finite() && p.weight >= 0.0) {
                return Err(Error::domain(format!("Lorentzian weight must be finite and >= 0, got {}", p.weight)));
            }
        }
        if !(variance.is_finite() && variance >= 0.0) {
            return Err(Error::domain(format!("variance must be finite and >= 0, got {variance}")));
        }
        Ok(Self {
            pairs,
            dipoles,
            provenance,
            variance,
        })
    }

    pub fn pairs(&self) -> &[LorentzianPair] {
        &self.pairs
    }

    pub fn dipoles(&self) -> &[f64] {
        &self.dipoles
    }

    pub fn provenance(&self) -> &Provenance {
        &self.provenance
    }

    pub fn variance(&self) -> f64 {
        self.variance
    }

    pub fn at(&self, omega: f64) -> f64 {
        self.pairs.iter().map(|p| p.at(omega)).sum()
    }

    pub fn zero_frequency(&self) -> f64 {
        self.pairs.iter().map(LorentzianPair::zero_frequency).sum()
    }

    /// |sum_k C_k / 2 - Var| / Var.
    pub fn sum_rule_residual(&self) -> f64 {
        let half: f64 = self.pairs.iter().map(|p| 0.5 * p.weight).sum();
        if self.variance == 0.0 {
            half
        } else {
            (half - self.variance).abs() / self.variance
        }
    }

    /// Pair indices ordered by decreasing |C_k / lambda_k|.
    pub fn ranking(&self) -> Vec<usize> {
        let mut idx: Vec<usize> = (0..self.pairs.len()).collect();
        idx.sort_by(|&a, &b| {
            self.pairs[b]
                .zero_frequency()
                .total_cmp(&self.pairs[a].zero_frequency())
                .then(a.cmp(&b))
        });
        idx
    }

    /// The pair with the largest zero-frequency contribution.
    pub fn dominant(&self) -> Option<LorentzianPair> {
        self.ranking().first().map(|&k| self.pairs[k])
    }

    /// Keep only the `k` highest-ranked pairs.
    pub fn truncated(&self, k: usize) -> Self {
        let pairs = self.ranking().into_iter().take(k).map(|i| self.pairs[i]).collect();
        Self {
            pairs,
            ..self.clone()
        }
    }
}

/// C_k = 2 sum_ij D_i D_j A^-1_ik A_kj rho_j for every non-steady mode.
///
/// In the symmetric frame this is `2 (sum_i D_i sqrt(rho_i) U_ik)^2`; the
/// dipole is centred first, which leaves every non-steady C_k unchanged
/// but keeps the sum free of cancellation.
pub fn lorentzian_weights(
    ed: &EigenDecomposition,
    basis: &SymmetricBasis,
    levels: &LevelStructure,
) -> Result<SpectralDecomposition> {
    if ed.n_atoms() != basis.n_atoms() || ed.n_levels() != basis.n_levels() || ed.dimension() != basis.len() {
        return Err(Error::domain(format!(
            "decomposition for N={}, M={} does not match basis N={}, M={}",
            ed.n_atoms(),
            ed.n_levels(),
            basis.n_atoms(),
            basis.n_levels()
        )));
    }
    let dipoles = basis.dipoles(levels)?;
    let rho = ed.stationary();
    let mean: f64 = dipoles.iter().zip(&rho).map(|(d, r)| d * r).sum();
    let y: Vec<f64> = dipoles
        .iter()
        .zip(ed.sqrt_stationary())
        .map(|(d, s)| (d - mean) * s)
        .collect();
    let variance: f64 = y.iter().map(|v| v * v).sum();
    let u = ed.symmetric_vectors();
    let pairs = (0..ed.dimension())
        .filter(|&k| k != ed.steady_index())
        .map(|k| {
            let proj: f64 = u.column(k).iter().zip(&y).map(|(a, b)| a * b).sum();
            LorentzianPair {
                lambda: ed.eigenvalues()[k],
                weight: 2.0 * proj * proj,
            }
        })
        .collect();
    SpectralDecomposition::new(
        pairs,
        dipoles,
        Provenance {
            n_atoms: basis.n_atoms(),
            n_levels: basis.n_levels(),
            temperature_ratio: ed.temperature_ratio(),
            potential_hash: levels.fingerprint(),
        },
        variance,
    )
}

/// Full pipeline for one patch: basis, generator, eigensolve, weights.
pub fn exact_spectrum(
    n_atoms: usize,
    levels: &LevelStructure,
    thermal: &ThermalParams,
    transition_set: &TransitionSet,
) -> Result<SpectralDecomposition> {
    let basis = enumerate_basis(n_atoms, levels.count())?;
    let rm = build_rate_matrix(&basis, levels, thermal, transition_set)?;
    let ed = decompose(&rm)?;
    lorentzian_weights(&ed, &basis, levels)
}

/// S(w) at each frequency. The spectrum is even, so only |w| matters.
pub fn evaluate_spectrum(sd: &SpectralDecomposition, omega: &[f64]) -> Vec<f64> {
    omega.iter().map(|w| sd.at(w.abs())).collect()
}

/// Single-Lorentzian low-temperature patch: lambda = -N Gamma0^12,
/// C = 2 (d1 - d2)^2 T with T = exp(-beta w0).
pub fn low_temperature_spectrum(
    n_atoms: usize,
    levels: &LevelStructure,
    thermal: &ThermalParams,
) -> Result<SpectralDecomposition> {
    if n_atoms < 1 {
        return Err(Error::domain("need at least one adatom"));
    }
    let d = levels.dipoles();
    let n = n_atoms as f64;
    let weight = 2.0 * (d[0] - d[1]).powi(2) * thermal.boltzmann_factor();
    SpectralDecomposition::new(
        vec![LorentzianPair {
            lambda: -n * levels.rate(0, 1),
            weight,
        }],
        vec![n * d[0], (n - 1.0) * d[0] + d[1]],
        Provenance {
            n_atoms,
            n_levels: 2,
            temperature_ratio: thermal.temperature_ratio(),
            potential_hash: levels.fingerprint(),
        },
        0.5 * weight,
    )
}

/// Coefficient of T^2 in the white noise S_N(0) for three levels with
/// nearest-neighbour transitions. `beta_delta` is the anharmonic shift in
/// units of the temperature.
pub fn second_order_coefficient(
    n_atoms: usize,
    dipoles: [f64; 3],
    gamma12: f64,
    gamma23: f64,
    beta_delta: f64,
) -> Result<f64> {
    if n_atoms < 2 {
        return Err(Error::domain(format!(
            "second-order coefficient diverges at N = {n_atoms}; it is defined for N >= 2"
        )));
    }
    if !(gamma12 > 0.0 && gamma23 > 0.0) {
        return Err(Error::domain("Gamma12 and Gamma23 must be > 0"));
    }
    let n = n_atoms as f64;
    let [d1, d2, d3] = dipoles;
    Ok(2.0 * (d1 - d2).powi(2) * (3.0 * n - 1.0) / ((n - 1.0) * n * gamma12)
        + 2.0 * (d1 - d3) * (2.0 * (d1 - d2) / (n * gamma12) + (d1 - d3) / gamma23) * beta_delta.exp())
}

/// [`second_order_coefficient`] with dipoles and rates read from `levels`
/// and beta referenced to the numerical w12.
pub fn second_order_white_noise(
    n_atoms: usize,
    delta: f64,
    levels: &LevelStructure,
    thermal: &ThermalParams,
) -> Result<f64> {
    if levels.count() < 3 {
        return Err(Error::InsufficientLevels { found: levels.count() });
    }
    let d = levels.dipoles();
    let beta_delta = thermal.beta_times(delta, levels.fundamental_frequency());
    second_order_coefficient(n_atoms, [d[0], d[1], d[2]], levels.rate(0, 1), levels.rate(1, 2), beta_delta)
}

/// Relative patch weights D(N) for N = 1..=N_max.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PatchDistribution {
    weights: Vec<f64>,
}

impl PatchDistribution {
    /// `weights[i]` is D(i + 1).
    pub fn custom(weights: Vec<f64>) -> Result<Self> {
        if weights.iter().any(|w| !w.is_finite() || *w < 0.0) {
            return Err(Error::invalid("patch weights must be finite and >= 0"));
        }
        if !weights.iter().any(|w| *w > 0.0) {
            return Err(Error::invalid("at least one patch weight must be positive"));
        }
        Ok(Self { weights })
    }

    pub fn delta(n0: usize) -> Result<Self> {
        if n0 < 1 {
            return Err(Error::invalid("patch size must be >= 1"));
        }
        let mut w = vec![0.0; n0];
        w[n0 - 1] = 1.0;
        Self::custom(w)
    }

    pub fn one_over_n(n_max: usize) -> Result<Self> {
        if n_max < 1 {
            return Err(Error::invalid("N_max must be >= 1"));
        }
        Self::custom((1..=n_max).map(|n| 1.0 / n as f64).collect())
    }

    pub fn n_max(&self) -> usize {
        self.weights.len()
    }

    pub fn weight(&self, n: usize) -> f64 {
        if n == 0 {
            0.0
        } else {
            self.weights.get(n - 1).copied().unwrap_or(0.0)
        }
    }

    /// Patch sizes with positive weight.
    pub fn support(&self) -> impl Iterator<Item = usize> + '_ {
        self.weights
            .iter()
            .enumerate()
            .filter(|(_, w)| **w > 0.0)
            .map(|(i, _)| i + 1)
    }
}

/// S_tot(w) = sum_N D(N) S_N(w).
pub fn aggregate_patches(
    spectra: &BTreeMap<usize, SpectralDecomposition>,
    dist: &PatchDistribution,
    omega: &[f64],
) -> Result<Vec<f64>> {
    let mut total = vec![0.0; omega.len()];
    for n in dist.support() {
        let sd = spectra.get(&n).ok_or(Error::MissingPatch(n))?;
        let weight = dist.weight(n);
        for (t, w) in total.iter_mut().zip(omega) {
            *t += weight * sd.at(w.abs());
        }
    }
    Ok(total)
}

/// N_max -> infinity limit of the 1/N-weighted low-temperature patch sum,
/// (C/2) (-Gamma0 / w^2 + pi coth(pi w / Gamma0) / w).
pub fn pink_noise_closed_form(gamma0: f64, amplitude: f64, omega: &[f64]) -> Result<Vec<f64>> {
    if !(gamma0.is_finite() && gamma0 > 0.0) {
        return Err(Error::domain(format!("Gamma0 must be finite and > 0, got {gamma0}")));
    }
    omega
        .iter()
        .map(|&w| {
            if w.is_nan() || w < 0.0 {
                return Err(Error::domain(format!("frequency must be >= 0, got {w}")));
            }
            let x = w / gamma0;
            // sum_N 1/(N^2 + x^2) = zeta(2) - zeta(4) x^2 + zeta(6) x^4 - ...
            let reduced = if x < PINK_SERIES_THRESHOLD {
                let x2 = x * x;
                PI.powi(2) / 6.0 - PI.powi(4) / 90.0 * x2 + PI.powi(6) / 945.0 * x2 * x2
            } else {
                0.5 * (PI / (x * (PI * x).tanh()) - 1.0 / (x * x))
            };
            Ok(amplitude / gamma0 * reduced)
        })
        .collect()
}

/// Default closed-form amplitude 2 (d1 - d2)^2 T, matching the low-T patch.
pub fn default_pink_amplitude(levels: &LevelStructure, thermal: &ThermalParams) -> f64 {
    let d = levels.dipoles();
    2.0 * (d[0] - d[1]).powi(2) * thermal.boltzmann_factor()
}

/// Logarithmic grid settings.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FrequencyGrid {
    pub min: f64,
    pub max: f64,
    pub points_per_decade: usize,
}

impl FrequencyGrid {
    pub fn new(min: f64, max: f64, points_per_decade: usize) -> Result<Self> {
        let g = Self {
            min,
            max,
            points_per_decade,
        };
        g.validate()?;
        Ok(g)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.min.is_finite() && self.max.is_finite() && self.min > 0.0 && self.min < self.max) {
            return Err(Error::invalid(format!(
                "frequency grid needs 0 < min < max, got [{}, {}]",
                self.min, self.max
            )));
        }
        if self.points_per_decade == 0 {
            return Err(Error::invalid("points per decade must be >= 1"));
        }
        Ok(())
    }

    /// Points from min to max inclusive, evenly spaced in log10.
    pub fn points(&self) -> Vec<f64> {
        log_grid(self.min, self.max, self.points_per_decade)
    }
}

pub fn log_grid(min: f64, max: f64, points_per_decade: usize) -> Vec<f64> {
    let (a, b) = (min.log10(), max.log10());
    let n = ((b - a) * points_per_decade as f64).round().max(1.0) as usize;
    (0..=n)
        .map(|i| 10f64.powf(a + (b - a) * i as f64 / n as f64))
        .collect()
}

/// Least-squares slope of log S against log w.
pub fn log_log_slope(omega: &[f64], s: &[f64]) -> f64 {
    let xs: Vec<f64> = omega.iter().map(|w| w.ln()).collect();
    let ys: Vec<f64> = s.iter().map(|v| v.ln()).collect();
    linear_fit(&xs, &ys).1
}

/// (intercept, slope) of the ordinary least-squares line.
pub fn linear_fit(x: &[f64], y: &[f64]) -> (f64, f64) {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = x.iter().map(|a| (a - mx).powi(2)).sum();
    let slope = sxy / sxx;
    (my - slope * mx, slope)
}

/// Frequency at which S falls to S(0)/2.
pub fn half_power_frequency(sd: &SpectralDecomposition) -> f64 {
    let target = 0.5 * sd.zero_frequency();
    let rates = sd.pairs().iter().map(|p| -p.lambda);
    let (mut lo, mut hi) = (
        rates.clone().fold(f64::INFINITY, f64::min) * 1e-6,
        rates.fold(0.0, f64::max) * 1e6,
    );
    for _ in 0..200 {
        let mid = (lo * hi).sqrt();
        if sd.at(mid) > target {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi / lo - 1.0 < 1e-13 {
            break;
        }
    }
    (lo * hi).sqrt()
}

/// Largest relative deviation of the top-`k` truncation from the full
/// spectrum over `omega`.
pub fn truncation_error(sd: &SpectralDecomposition, k: usize, omega: &[f64]) -> f64 {
    let t = sd.truncated(k);
    omega
        .iter()
        .map(|&w| {
            let full = sd.at(w);
            (t.at(w) - full).abs() / full
        })
        .fold(0.0, f64::max)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::master::ThermalParams;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn two_level(d: [f64; 2], gamma: f64) -> LevelStructure {
        LevelStructure::new(vec![-2.0, -1.0], d.to_vec(), vec![vec![0.0, gamma], vec![0.0, 0.0]]).unwrap()
    }

    fn three_level() -> LevelStructure {
        LevelStructure::new(
            vec![-3.0, -2.0, -1.1],
            vec![1.0, 0.8, 0.6],
            vec![vec![0.0, 1.0, 0.3], vec![0.0, 0.0, 1.4], vec![0.0; 3]],
        )
        .unwrap()
    }

    #[test]
    fn single_atom_lorentzian() {
        let th = ThermalParams::new(0.4).unwrap();
        let t = th.boltzmann_factor();
        let sd = exact_spectrum(1, &two_level([1.0, 0.8], 2.0), &th, &TransitionSet::AllPairs).unwrap();
        assert_eq!(sd.pairs().len(), 1);
        let p = sd.pairs()[0];
        assert_relative_eq!(p.weight, 2.0 * 0.04 * t / (1.0 + t).powi(2), max_relative = 1e-12);
        assert_relative_eq!(p.lambda, -2.0 * (1.0 + t) / (1.0 - t), max_relative = 1e-12);
        assert!(sd.sum_rule_residual() < 1e-12);
    }

    #[test]
    fn degenerate_dipoles_give_no_noise() {
        let l = LevelStructure::new(
            vec![-3.0, -2.0, -1.1],
            vec![0.7; 3],
            vec![vec![0.0, 1.0, 0.3], vec![0.0, 0.0, 1.4], vec![0.0; 3]],
        )
        .unwrap();
        let sd = exact_spectrum(3, &l, &ThermalParams::new(0.8).unwrap(), &TransitionSet::AllPairs).unwrap();
        assert!(sd.pairs().iter().all(|p| p.weight < 1e-28));
        assert!(sd.variance() < 1e-28);
    }

    #[test]
    fn pair_count_and_sum_rule() {
        let th = ThermalParams::new(0.5).unwrap();
        let sd = exact_spectrum(4, &three_level(), &th, &TransitionSet::AllPairs).unwrap();
        assert_eq!(sd.pairs().len(), 15 - 1);
        assert!(sd.sum_rule_residual() < 1e-10);
    }

    #[test]
    fn mismatched_decomposition_is_rejected() {
        let th = ThermalParams::new(0.5).unwrap();
        let l = three_level();
        let b3 = enumerate_basis(3, 3).unwrap();
        let b2 = enumerate_basis(2, 3).unwrap();
        let ed = decompose(&build_rate_matrix(&b3, &l, &th, &TransitionSet::AllPairs).unwrap()).unwrap();
        assert!(matches!(lorentzian_weights(&ed, &b2, &l), Err(Error::Domain(_))));
    }

    #[test]
    fn spectrum_shape() {
        let th = ThermalParams::new(0.7).unwrap();
        let sd = exact_spectrum(3, &three_level(), &th, &TransitionSet::AllPairs).unwrap();
        let grid = log_grid(1e-3, 1e3, 20);
        let s = evaluate_spectrum(&sd, &grid);
        assert!(s.iter().all(|v| *v > 0.0));
        assert!(s.windows(2).all(|w| w[1] <= w[0]));
        assert_relative_eq!(
            sd.zero_frequency(),
            sd.pairs().iter().map(|p| p.weight / -p.lambda).sum::<f64>(),
            max_relative = 1e-15
        );
        assert_relative_eq!(evaluate_spectrum(&sd, &[0.0])[0], sd.zero_frequency(), max_relative = 1e-14);
        assert_eq!(evaluate_spectrum(&sd, &[-2.5]), evaluate_spectrum(&sd, &[2.5]));
        // 1/w^2 tail
        let w = 1e9;
        let tail: f64 = sd.pairs().iter().map(|p| p.weight * -p.lambda).sum();
        assert_relative_eq!(sd.at(w) * w * w, tail, max_relative = 1e-12);
    }

    #[test]
    fn truncation_by_zero_frequency_weight() {
        let th = ThermalParams::new(0.7).unwrap();
        let sd = exact_spectrum(3, &three_level(), &th, &TransitionSet::AllPairs).unwrap();
        let top = sd.truncated(3);
        assert_eq!(top.pairs().len(), 3);
        let first = sd.dominant().unwrap();
        assert_eq!(top.pairs()[0], first);
        assert!(sd.pairs().iter().all(|p| p.zero_frequency() <= first.zero_frequency()));
        let all = sd.pairs().len();
        assert_eq!(truncation_error(&sd, all, &[0.0, 1.0, 10.0]), 0.0);
    }

    #[test]
    fn low_temperature_model() {
        let th = ThermalParams::new(0.2).unwrap();
        let t = th.boltzmann_factor();
        let l = two_level([1.0, 0.8], 1.5);
        for n in 1..6 {
            let sd = low_temperature_spectrum(n, &l, &th).unwrap();
            let s0 = sd.zero_frequency();
            let nf = n as f64;
            assert_relative_eq!(s0 / nf, 2.0 * 0.04 * t / (nf * nf * 1.5), max_relative = 1e-13);
            assert_relative_eq!(sd.pairs()[0].lambda, -nf * 1.5);
        }
    }

    #[test]
    fn low_temperature_model_tracks_exact_white_noise() {
        // The relative error of S(0) is first order in T (4T at N = 1).
        for beta in [3.0, 5.0, 8.0] {
            let th = ThermalParams::from_beta_omega0(beta).unwrap();
            let t = th.boltzmann_factor();
            let l = two_level([1.0, 0.8], 1.0);
            for n in 1..=6 {
                let exact = exact_spectrum(n, &l, &th, &TransitionSet::AllPairs).unwrap().zero_frequency();
                let model = low_temperature_spectrum(n, &l, &th).unwrap().zero_frequency();
                let rel = (model - exact).abs() / exact;
                assert!(rel < 5.0 * t, "beta w0 = {beta}, N = {n}: {rel} vs T = {t}");
            }
        }
        let th = ThermalParams::from_beta_omega0(6.0).unwrap();
        let t = th.boltzmann_factor();
        let exact = exact_spectrum(1, &two_level([1.0, 0.8], 1.0), &th, &TransitionSet::AllPairs).unwrap();
        let model = low_temperature_spectrum(1, &two_level([1.0, 0.8], 1.0), &th).unwrap();
        assert_relative_eq!(
            exact.zero_frequency() / model.zero_frequency(),
            (1.0 - t) / (1.0 + t).powi(3),
            max_relative = 1e-12
        );
    }

    #[test]
    fn second_order_coefficient_fixture() {
        let d = [1.0, 0.8, 0.6];
        // 2 * 0.04 * 5 / 2 + 2 * 0.4 * (0.2 + 0.4 / 1.4)
        let want = 0.2 + 0.8 * (0.2 + 0.4 / 1.4);
        assert_relative_eq!(second_order_coefficient(2, d, 1.0, 1.4, 0.0).unwrap(), want, max_relative = 1e-15);
        let want = 2.0 * 0.04 * 14.0 / 20.0 + 0.8 * (0.4 / 5.0 + 0.4 / 1.4) * 1f64.exp();
        assert_relative_eq!(second_order_coefficient(5, d, 1.0, 1.4, 1.0).unwrap(), want, max_relative = 1e-15);
        assert!(matches!(second_order_coefficient(1, d, 1.0, 1.4, 0.0), Err(Error::Domain(_))));
    }

    #[test]
    fn second_order_coefficient_plateaus_and_rises_with_anharmonicity() {
        let d = [1.0, 0.8, 0.6];
        for bd in [0.0, 0.5, 1.0] {
            let c100 = second_order_coefficient(100, d, 1.0, 1.4, bd).unwrap();
            let c200 = second_order_coefficient(200, d, 1.0, 1.4, bd).unwrap();
            assert!((c200 - c100).abs() / c100 < 0.02);
            assert!(c200 < c100);
        }
        let plateau = |bd| second_order_coefficient(1000, d, 1.0, 1.4, bd).unwrap();
        assert!(plateau(0.0) < plateau(0.5) && plateau(0.5) < plateau(1.0));
    }

    #[test]
    fn second_order_from_levels_uses_numeric_reference() {
        let l = three_level();
        let th = ThermalParams::new(0.5).unwrap();
        let delta = l.delta();
        let bd = delta / l.fundamental_frequency() / 0.5;
        let direct = second_order_coefficient(3, [1.0, 0.8, 0.6], 1.0, 1.4, bd).unwrap();
        assert_relative_eq!(second_order_white_noise(3, delta, &l, &th).unwrap(), direct, max_relative = 1e-14);
        let two = two_level([1.0, 0.8], 1.0);
        assert!(second_order_white_noise(3, 0.0, &two, &th).is_err());
    }

    #[test]
    fn patch_aggregation() {
        let th = ThermalParams::new(0.3).unwrap();
        let l = three_level();
        let mut spectra = BTreeMap::new();
        for n in 1..=4 {
            spectra.insert(n, exact_spectrum(n, &l, &th, &TransitionSet::AllPairs).unwrap());
        }
        let grid = [0.0, 0.3, 3.0];
        let single = aggregate_patches(&spectra, &PatchDistribution::delta(3).unwrap(), &grid).unwrap();
        assert_eq!(single, evaluate_spectrum(&spectra[&3], &grid));
        let err = aggregate_patches(&spectra, &PatchDistribution::one_over_n(5).unwrap(), &grid).unwrap_err();
        assert_eq!(err, Error::MissingPatch(5));
        assert!(err.to_string().contains('5'));
    }

    #[test]
    fn patch_distribution_validation() {
        assert!(PatchDistribution::custom(vec![0.0, 0.0]).is_err());
        assert!(PatchDistribution::custom(vec![1.0, -0.1]).is_err());
        assert!(PatchDistribution::delta(0).is_err());
        let d = PatchDistribution::one_over_n(4).unwrap();
        assert_eq!(d.support().collect::<Vec<_>>(), vec![1, 2, 3, 4]);
        assert_eq!(d.weight(2), 0.5);
        assert_eq!(d.weight(9), 0.0);
    }

    #[test]
    fn pink_closed_form_limits() {
        let (g, c) = (2.0, 0.3);
        let zero = pink_noise_closed_form(g, c, &[0.0]).unwrap()[0];
        assert_relative_eq!(zero, c * PI * PI / (6.0 * g), max_relative = 1e-15);
        let tiny = pink_noise_closed_form(g, c, &[1e-9]).unwrap()[0];
        assert_relative_eq!(tiny, zero, max_relative = 1e-6);
        let high = pink_noise_closed_form(g, c, &[1e3 * g]).unwrap()[0];
        assert!((high / (c * PI / (2.0 * 1e3 * g)) - 1.0).abs() < 0.01);
        assert!(pink_noise_closed_form(g, c, &[-1.0]).is_err());
        // series and closed form meet at the switch
        let below = pink_noise_closed_form(g, c, &[g * 0.999_999e-3]).unwrap()[0];
        let above = pink_noise_closed_form(g, c, &[g * 1.000_001e-3]).unwrap()[0];
        assert_relative_eq!(below, above, max_relative = 1e-9);
    }

    #[test]
    fn pink_closed_form_matches_brute_force_partial_sum() {
        let (g, c) = (1.0, 1.0);
        let w = 1.0;
        let partial: f64 = (1..=1_000_000u64)
            .rev()
            .map(|n| {
                let n = n as f64;
                c / n * g * n / ((g * n).powi(2) + w * w)
            })
            .sum();
        let closed = pink_noise_closed_form(g, c, &[w]).unwrap()[0];
        assert!((partial - closed).abs() / closed < 1e-5);
    }

    #[test]
    fn log_grid_and_slopes() {
        let g = FrequencyGrid::new(1e-2, 1e2, 50).unwrap().points();
        assert_eq!(g.len(), 201);
        assert_relative_eq!(g[0], 1e-2, max_relative = 1e-14);
        assert_relative_eq!(g[200], 1e2, max_relative = 1e-14);
        let s: Vec<f64> = g.iter().map(|w| 3.0 * w.powf(-1.3)).collect();
        assert_relative_eq!(log_log_slope(&g, &s), -1.3, max_relative = 1e-12);
        assert!(FrequencyGrid::new(1.0, 1.0, 50).is_err());
    }

    #[test]
    fn half_width_scales_with_patch_size_at_low_temperature() {
        let th = ThermalParams::new(0.1).unwrap();
        let l = two_level([1.0, 0.8], 1.0);
        for n in 1..=6 {
            let sd = exact_spectrum(n, &l, &th, &TransitionSet::AllPairs).unwrap();
            let w = half_power_frequency(&sd);
            assert!((w / n as f64 - 1.0).abs() < 0.02, "N = {n}: {w}");
        }
    }

    #[test]
    fn json_mirrors_decomposition() {
        let sd = exact_spectrum(2, &three_level(), &ThermalParams::new(0.5).unwrap(), &TransitionSet::AllPairs).unwrap();
        let v: serde_json::Value = serde_json::to_value(&sd).unwrap();
        assert!(v["pairs"][0]["lambda_per_s"].is_f64());
        assert!(v["pairs"][0]["C_k"].is_f64());
        assert_eq!(v["provenance"]["n_atoms"], 2);
        let back: SpectralDecomposition = serde_json::from_value(v).unwrap();
        assert_eq!(back, sd);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(24))]

        #[test]
        fn aggregation_is_linear(a in proptest::collection::vec(0.0f64..2.0, 4), b in proptest::collection::vec(0.0f64..2.0, 4), s in 0.1f64..3.0) {
            prop_assume!(a.iter().any(|x| *x > 0.0) && b.iter().any(|x| *x > 0.0));
            let th = ThermalParams::new(0.4).unwrap();
            let l = three_level();
            let spectra: BTreeMap<usize, SpectralDecomposition> = (1..=4)
                .map(|n| (n, exact_spectrum(n, &l, &th, &TransitionSet::AllPairs).unwrap()))
                .collect();
            let grid = [0.0, 0.5, 5.0];
            let combo: Vec<f64> = a.iter().zip(&b).map(|(x, y)| x + s * y).collect();
            let sa = aggregate_patches(&spectra, &PatchDistribution::custom(a.clone()).unwrap(), &grid).unwrap();
            let sb = aggregate_patches(&spectra, &PatchDistribution::custom(b.clone()).unwrap(), &grid).unwrap();
            let sc = aggregate_patches(&spectra, &PatchDistribution::custom(combo).unwrap(), &grid).unwrap();
            for i in 0..grid.len() {
                prop_assert!((sc[i] - (sa[i] + s * sb[i])).abs() <= 1e-12 * sc[i]);
            }
        }

        #[test]
        fn sum_rule_and_positivity(n in 1usize..6, ratio in 0.1f64..1.5, d2 in 0.1f64..0.95, d3 in 0.05f64..0.9) {
            let l = LevelStructure::new(
                vec![-3.0, -2.0, -1.1],
                vec![1.0, d2, d3],
                vec![vec![0.0, 1.0, 0.3], vec![0.0, 0.0, 1.4], vec![0.0; 3]],
            ).unwrap();
            let th = ThermalParams::new(ratio).unwrap();
            let sd = exact_spectrum(n, &l, &th, &TransitionSet::AllPairs).unwrap();
            prop_assert!(sd.sum_rule_residual() < 1e-8);
            for w in log_grid(1e-3, 1e3, 5) {
                prop_assert!(sd.at(w) > 0.0);
            }
        }
    }
}
