//! Classical rate equation over symmetric-state populations.
//!
//! Generator convention: `d rho_i / dt = sum_j M_ij rho_j`, so every column
//! of `M` sums to zero and `M_ij` (i != j) is the flow rate from j to i.

use std::collections::VecDeque;

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::basis::{SymmetricBasis, SymmetricState};
use crate::error::{Error, Result};
use crate::potential::LevelStructure;

/// Dense solver cap. A dense eigensolve beyond this many states is not
/// practical on a workstation.
pub const DEFAULT_DENSE_CAP: usize = 5000;

/// Temperature expressed through T / w0 with w0 the fundamental level spacing.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ThermalParams {
    temperature_ratio: f64,
}

impl ThermalParams {
    pub fn new(temperature_ratio: f64) -> Result<Self> {
        if !(temperature_ratio.is_finite() && temperature_ratio > 0.0) {
            return Err(Error::invalid(format!(
                "T/w0 must be finite and > 0, got {temperature_ratio}"
            )));
        }
        Ok(Self { temperature_ratio })
    }

    /// From beta * w0 directly.
    pub fn from_beta_omega0(beta_omega0: f64) -> Result<Self> {
        Self::new(1.0 / beta_omega0)
    }

    /// T = 0: no absorption. Only meaningful for rate-matrix construction
    /// and trajectory simulation; the generator is then not reversible.
    pub fn zero() -> Self {
        Self {
            temperature_ratio: 0.0,
        }
    }

    pub fn temperature_ratio(&self) -> f64 {
        self.temperature_ratio
    }

    pub fn is_zero(&self) -> bool {
        self.temperature_ratio == 0.0
    }

    pub fn beta_omega0(&self) -> f64 {
        1.0 / self.temperature_ratio
    }

    /// Boltzmann factor exp(-beta w0).
    pub fn boltzmann_factor(&self) -> f64 {
        if self.is_zero() {
            0.0
        } else {
            (-self.beta_omega0()).exp()
        }
    }

    /// beta * omega, with beta referenced to `omega0`.
    pub fn beta_times(&self, omega: f64, omega0: f64) -> f64 {
        if self.is_zero() {
            f64::INFINITY
        } else {
            omega / (omega0 * self.temperature_ratio)
        }
    }
}

/// Which level pairs exchange phonons.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TransitionSet {
    #[default]
    AllPairs,
    NearestNeighbor,
    Explicit(Vec<(usize, usize)>),
}

impl TransitionSet {
    /// Level pairs (mu < nu) for `m` levels.
    pub fn pairs(&self, m: usize) -> Result<Vec<(usize, usize)>> {
        let pairs: Vec<(usize, usize)> = match self {
            TransitionSet::AllPairs => (0..m)
                .flat_map(|mu| ((mu + 1)..m).map(move |nu| (mu, nu)))
                .collect(),
            TransitionSet::NearestNeighbor => (0..m.saturating_sub(1)).map(|mu| (mu, mu + 1)).collect(),
            TransitionSet::Explicit(p) => {
                for &(mu, nu) in p {
                    if mu >= nu || nu >= m {
                        return Err(Error::domain(format!("invalid transition ({mu}, {nu}) for {m} levels")));
                    }
                }
                p.clone()
            }
        };
        if pairs.is_empty() {
            return Err(Error::domain("transition set is empty"));
        }
        Ok(pairs)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum TransitionKind {
    Emission,
    Absorption,
}

/// Origin of one off-diagonal generator entry.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Transition {
    pub target: usize,
    pub source: usize,
    pub lower: usize,
    pub upper: usize,
    pub kind: TransitionKind,
    pub rate: f64,
}

/// Dense generator over the symmetric basis.
#[derive(Debug, Clone)]
pub struct RateMatrix {
    entries: DMatrix<f64>,
    transitions: Vec<Transition>,
    n_atoms: usize,
    n_levels: usize,
    thermal: ThermalParams,
}

impl RateMatrix {
    pub fn dimension(&self) -> usize {
        self.entries.nrows()
    }

    pub fn entries(&self) -> &DMatrix<f64> {
        &self.entries
    }

    pub fn get(&self, target: usize, source: usize) -> f64 {
        self.entries[(target, source)]
    }

    pub fn transitions(&self) -> &[Transition] {
        &self.transitions
    }

    pub fn thermal(&self) -> ThermalParams {
        self.thermal
    }

    pub fn n_atoms(&self) -> usize {
        self.n_atoms
    }

    pub fn n_levels(&self) -> usize {
        self.n_levels
    }

    pub fn max_abs(&self) -> f64 {
        self.entries.iter().fold(0.0f64, |a, v| a.max(v.abs()))
    }

    /// Total exit rate of state `j`.
    pub fn exit_rate(&self, j: usize) -> f64 {
        -self.entries[(j, j)]
    }

    /// max_j |sum_i M_ij| / max |M_ij|.
    pub fn column_sum_residual(&self) -> f64 {
        let scale = self.max_abs().max(f64::MIN_POSITIVE);
        self.entries
            .column_iter()
            .map(|c| c.sum().abs())
            .fold(0.0, f64::max)
            / scale
    }

    /// Largest relative pairwise flux imbalance
    /// |M_ij rho_j - M_ji rho_i| / max(M_ij rho_j, M_ji rho_i).
    pub fn detailed_balance_residual(&self, rho: &[f64]) -> f64 {
        let n = self.dimension();
        let mut worst: f64 = 0.0;
        for j in 0..n {
            for i in 0..n {
                if i == j {
                    continue;
                }
                let forward = self.entries[(i, j)] * rho[j];
                let backward = self.entries[(j, i)] * rho[i];
                let scale = forward.max(backward);
                if scale > 0.0 {
                    worst = worst.max((forward - backward).abs() / scale);
                }
            }
        }
        worst
    }

    /// Multiply the flow `source -> target` by `factor`, keeping columns
    /// summing to zero. Used for fault injection.
    pub fn scale_flow(&mut self, target: usize, source: usize, factor: f64) {
        assert_ne!(target, source);
        let old = self.entries[(target, source)];
        let new = old * factor;
        self.entries[(target, source)] = new;
        self.entries[(source, source)] -= new - old;
    }

    /// Natural-log stationary weights (unnormalised) from detailed balance,
    /// found by walking a spanning tree of the transition graph.
    pub fn log_stationary(&self) -> Result<Vec<f64>> {
        let n = self.dimension();
        let neighbours = self.neighbours();
        let mut phi = vec![f64::NAN; n];
        let mut components = 0;
        for root in 0..n {
            if !phi[root].is_nan() {
                continue;
            }
            components += 1;
            phi[root] = 0.0;
            let mut queue = VecDeque::from([root]);
            while let Some(j) = queue.pop_front() {
                for &i in &neighbours[j] {
                    if phi[i].is_nan() {
                        let (fwd, bwd) = (self.entries[(i, j)], self.entries[(j, i)]);
                        if fwd <= 0.0 || bwd <= 0.0 {
                            return Err(Error::DetailedBalance { residual: 1.0 });
                        }
                        phi[i] = phi[j] + fwd.ln() - bwd.ln();
                        queue.push_back(i);
                    }
                }
            }
        }
        if components > 1 {
            return Err(Error::Reducible {
                zero_modes: components,
            });
        }
        let mut worst: f64 = 0.0;
        for j in 0..n {
            for &i in &neighbours[j] {
                let (fwd, bwd) = (self.entries[(i, j)], self.entries[(j, i)]);
                if fwd <= 0.0 || bwd <= 0.0 {
                    return Err(Error::DetailedBalance { residual: 1.0 });
                }
                let r = (fwd.ln() + phi[j] - bwd.ln() - phi[i]).abs();
                worst = worst.max(r);
            }
        }
        if worst > 1e-9 {
            return Err(Error::DetailedBalance {
                residual: worst.exp_m1(),
            });
        }
        Ok(phi)
    }

    fn neighbours(&self) -> Vec<Vec<usize>> {
        let n = self.dimension();
        let mut adj = vec![Vec::new(); n];
        for (j, row) in adj.iter_mut().enumerate() {
            for i in 0..n {
                if i != j && (self.entries[(i, j)] > 0.0 || self.entries[(j, i)] > 0.0) {
                    row.push(i);
                }
            }
        }
        adj
    }
}

/// Emission/absorption generator for the symmetric populations.
pub fn build_rate_matrix(
    basis: &SymmetricBasis,
    levels: &LevelStructure,
    thermal: &ThermalParams,
    transition_set: &TransitionSet,
) -> Result<RateMatrix> {
    build_rate_matrix_capped(basis, levels, thermal, transition_set, DEFAULT_DENSE_CAP)
}

pub fn build_rate_matrix_capped(
    basis: &SymmetricBasis,
    levels: &LevelStructure,
    thermal: &ThermalParams,
    transition_set: &TransitionSet,
    dense_cap: usize,
) -> Result<RateMatrix> {
    let m = basis.n_levels();
    if levels.count() != m {
        return Err(Error::domain(format!(
            "basis has {m} levels but the level structure has {}",
            levels.count()
        )));
    }
    let n = basis.len();
    if n > dense_cap {
        return Err(Error::Capacity {
            states: n as u128,
            cap: dense_cap,
        });
    }
    let pairs = transition_set.pairs(m)?;
    let w0 = levels.fundamental_frequency();

    // (lower, upper, F, boltzmann) per active pair
    let channels: Vec<(usize, usize, f64, f64)> = pairs
        .into_iter()
        .filter(|&(mu, nu)| levels.rate(mu, nu) > 0.0)
        .map(|(mu, nu)| {
            let x = thermal.beta_times(levels.transition_frequency(mu, nu), w0);
            let gamma = levels.rate(mu, nu);
            if x.is_infinite() {
                (mu, nu, gamma, 0.0)
            } else {
                (mu, nu, gamma / -(-x).exp_m1(), (-x).exp())
            }
        })
        .collect();

    let mut entries = DMatrix::<f64>::zeros(n, n);
    let mut transitions = Vec::new();
    let mut scratch: Vec<u32> = vec![0; m];
    for (j, s) in basis.states().iter().enumerate() {
        let occ = s.occupations();
        for &(mu, nu, f, boltz) in &channels {
            let (m_mu, m_nu) = (occ[mu] as f64, occ[nu] as f64);
            if occ[nu] > 0 {
                scratch.copy_from_slice(occ);
                scratch[mu] += 1;
                scratch[nu] -= 1;
                let rate = f * m_nu * (m_mu + 1.0);
                push_flow(basis, &mut entries, &mut transitions, &scratch, j, mu, nu, TransitionKind::Emission, rate);
            }
            if occ[mu] > 0 && boltz > 0.0 {
                scratch.copy_from_slice(occ);
                scratch[mu] -= 1;
                scratch[nu] += 1;
                let rate = f * boltz * m_mu * (m_nu + 1.0);
                push_flow(basis, &mut entries, &mut transitions, &scratch, j, mu, nu, TransitionKind::Absorption, rate);
            }
        }
    }
    Ok(RateMatrix {
        entries,
        transitions,
        n_atoms: basis.n_atoms(),
        n_levels: m,
        thermal: *thermal,
    })
}

#[allow(clippy::too_many_arguments)]
fn push_flow(
    basis: &SymmetricBasis,
    entries: &mut DMatrix<f64>,
    transitions: &mut Vec<Transition>,
    target_occ: &[u32],
    source: usize,
    lower: usize,
    upper: usize,
    kind: TransitionKind,
    rate: f64,
) {
    if rate <= 0.0 {
        return;
    }
    let target = basis
        .index_of(&SymmetricState::new(target_occ.to_vec()))
        .expect("collective jumps stay inside the symmetric basis");
    entries[(target, source)] += rate;
    entries[(source, source)] -= rate;
    transitions.push(Transition {
        target,
        source,
        lower,
        upper,
        kind,
        rate,
    });
}

/// Boltzmann populations exp(-beta E_i) / Z over the symmetric states.
pub fn boltzmann_distribution(basis: &SymmetricBasis, levels: &LevelStructure, thermal: &ThermalParams) -> Vec<f64> {
    let w0 = levels.fundamental_frequency();
    let beta_levels: Vec<f64> = (0..levels.count())
        .map(|mu| {
            if mu == 0 {
                0.0
            } else {
                thermal.beta_times(levels.excitation_frequency(mu), w0)
            }
        })
        .collect();
    let log_w: Vec<f64> = basis.states().iter().map(|s| -s.energy(&beta_levels)).collect();
    normalise_log_weights(&log_w)
}

fn normalise_log_weights(log_w: &[f64]) -> Vec<f64> {
    let max = log_w.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let w: Vec<f64> = log_w.iter().map(|l| (l - max).exp()).collect();
    let z: f64 = w.iter().sum();
    w.into_iter().map(|x| x / z).collect()
}

/// Normalised stationary distribution of the generator.
pub fn steady_state(rm: &RateMatrix) -> Result<Vec<f64>> {
    match rm.log_stationary() {
        Ok(phi) => Ok(normalise_log_weights(&phi)),
        Err(Error::DetailedBalance { .. }) => kernel_by_lu(rm),
        Err(e) => Err(e),
    }
}

/// Kernel of a general (non-reversible) generator: replace one balance
/// equation with the normalisation constraint.
fn kernel_by_lu(rm: &RateMatrix) -> Result<Vec<f64>> {
    let n = rm.dimension();
    let mut a = rm.entries.clone();
    for j in 0..n {
        a[(n - 1, j)] = 1.0;
    }
    let mut b = DVector::<f64>::zeros(n);
    b[n - 1] = 1.0;
    let x = a.lu().solve(&b).ok_or(Error::Reducible { zero_modes: 2 })?;
    let residual = (rm.entries() * &x).amax() / rm.max_abs().max(f64::MIN_POSITIVE);
    if !x.iter().all(|v| v.is_finite()) || residual > 1e-8 {
        return Err(Error::Reducible { zero_modes: 2 });
    }
    // clip round-off negatives
    let mut rho: Vec<f64> = x.iter().map(|v| v.max(0.0)).collect();
    let s: f64 = rho.iter().sum();
    rho.iter_mut().for_each(|v| *v /= s);
    Ok(rho)
}

/// Full real eigendecomposition M = A^-1 diag(lambda) A.
///
/// Detailed balance makes `M` similar to the symmetric matrix
/// `S = P^-1/2 M P^1/2` (P = diag(rho_ss)) whose off-diagonal entries are
/// `sqrt(M_ij M_ji)`. `S = U diag(lambda) U^T` is solved instead, with right
/// eigenvectors `P^1/2 U` and left eigenvectors `U^T P^-1/2`.
#[derive(Debug, Clone)]
pub struct EigenDecomposition {
    eigenvalues: Vec<f64>,
    vectors: DMatrix<f64>,
    sqrt_stationary: Vec<f64>,
    steady_index: usize,
    max_residual: f64,
    n_atoms: usize,
    n_levels: usize,
    temperature_ratio: f64,
}

impl EigenDecomposition {
    /// Eigenvalues, descending (the stationary 0 first).
    pub fn eigenvalues(&self) -> &[f64] {
        &self.eigenvalues
    }

    pub fn steady_index(&self) -> usize {
        self.steady_index
    }

    pub fn dimension(&self) -> usize {
        self.eigenvalues.len()
    }

    /// Orthonormal eigenvectors of the symmetrised generator (columns).
    pub fn symmetric_vectors(&self) -> &DMatrix<f64> {
        &self.vectors
    }

    pub fn sqrt_stationary(&self) -> &[f64] {
        &self.sqrt_stationary
    }

    pub fn stationary(&self) -> Vec<f64> {
        self.sqrt_stationary.iter().map(|s| s * s).collect()
    }

    /// A^-1: right eigenvectors as columns.
    pub fn right_vectors(&self) -> DMatrix<f64> {
        let mut r = self.vectors.clone();
        for (i, s) in self.sqrt_stationary.iter().enumerate() {
            r.row_mut(i).scale_mut(*s);
        }
        r
    }

    /// A: left eigenvectors as rows.
    pub fn left_vectors(&self) -> DMatrix<f64> {
        let mut l = self.vectors.transpose();
        for (j, s) in self.sqrt_stationary.iter().enumerate() {
            l.column_mut(j).scale_mut(1.0 / s);
        }
        l
    }

    /// max_k ||S u_k - lambda_k u_k|| / ||S||.
    pub fn max_residual(&self) -> f64 {
        self.max_residual
    }

    pub fn n_atoms(&self) -> usize {
        self.n_atoms
    }

    pub fn n_levels(&self) -> usize {
        self.n_levels
    }

    pub fn temperature_ratio(&self) -> f64 {
        self.temperature_ratio
    }
}

/// Symmetrised generator S with S_ij = sqrt(M_ij M_ji).
pub fn symmetrised_generator(rm: &RateMatrix) -> DMatrix<f64> {
    let n = rm.dimension();
    let m = rm.entries();
    DMatrix::from_fn(n, n, |i, j| {
        if i == j {
            m[(i, i)]
        } else {
            (m[(i, j)] * m[(j, i)]).sqrt()
        }
    })
}

pub fn decompose(rm: &RateMatrix) -> Result<EigenDecomposition> {
    let n = rm.dimension();
    let scale = rm.max_abs();
    let numerical = |message: &str| Error::Numerical {
        message: message.to_string(),
        dimension: n,
        scale,
    };

    let phi = rm.log_stationary()?;
    let rho = normalise_log_weights(&phi);
    let log_z = {
        let max = phi.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        max + phi.iter().map(|p| (p - max).exp()).sum::<f64>().ln()
    };
    let sqrt_stationary: Vec<f64> = phi.iter().map(|p| (0.5 * (p - log_z)).exp()).collect();
    debug_assert!((rho.iter().sum::<f64>() - 1.0).abs() < 1e-12);

    let s = symmetrised_generator(rm);
    let eig = SymmetricEigen::try_new(s.clone(), f64::EPSILON, 200 * n.max(10))
        .ok_or_else(|| numerical("symmetric eigensolver did not converge"))?;

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
    let eigenvalues: Vec<f64> = order.iter().map(|&k| eig.eigenvalues[k]).collect();
    let mut vectors = DMatrix::<f64>::zeros(n, n);
    for (dst, &src) in order.iter().enumerate() {
        vectors.set_column(dst, &eig.eigenvectors.column(src));
    }

    if n > 1 {
        let gap = eigenvalues[1].abs();
        let floor = n as f64 * f64::EPSILON * scale;
        if gap <= 1e3 * floor {
            let zero_modes = eigenvalues.iter().filter(|l| l.abs() <= 1e3 * floor).count();
            return Err(Error::Reducible { zero_modes });
        }
        if eigenvalues[0].abs() >= 1e-9 * gap {
            return Err(numerical("stationary eigenvalue is not separated from zero"));
        }
        if eigenvalues[1..].iter().any(|l| *l >= 0.0) {
            return Err(numerical("non-stationary eigenvalue is not negative"));
        }
    }

    // stationary mode must be sqrt(rho); fix its sign
    let overlap: f64 = vectors.column(0).iter().zip(&sqrt_stationary).map(|(u, s)| u * s).sum();
    if (overlap.abs() - 1.0).abs() > 1e-8 {
        return Err(numerical("stationary eigenvector disagrees with detailed-balance weights"));
    }
    if overlap < 0.0 {
        vectors.column_mut(0).neg_mut();
    }

    let norm = eigenvalues.iter().fold(0.0f64, |a, l| a.max(l.abs())).max(f64::MIN_POSITIVE);
    let sv = &s * &vectors;
    let mut max_residual: f64 = 0.0;
    for (k, &l) in eigenvalues.iter().enumerate() {
        let r = (sv.column(k) - vectors.column(k) * l).norm();
        max_residual = max_residual.max(r / norm);
    }
    if max_residual > 1e-8 {
        return Err(numerical("eigenpair residual exceeds 1e-8 ||M||"));
    }

    Ok(EigenDecomposition {
        eigenvalues,
        vectors,
        sqrt_stationary,
        steady_index: 0,
        max_residual,
        n_atoms: rm.n_atoms(),
        n_levels: rm.n_levels(),
        temperature_ratio: rm.thermal().temperature_ratio(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::basis::enumerate_basis;
    use approx::assert_relative_eq;

    /// Two levels, unit rate; w12 = 1 meV so T/w0 sets everything.
    fn two_level(gamma: f64) -> LevelStructure {
        LevelStructure::new(vec![-2.0, -1.0], vec![1.0, 0.8], vec![vec![0.0, gamma], vec![0.0, 0.0]]).unwrap()
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
    fn single_atom_two_levels() {
        let th = ThermalParams::new(0.5).unwrap();
        let t = th.boltzmann_factor();
        let b = enumerate_basis(1, 2).unwrap();
        let rm = build_rate_matrix(&b, &two_level(1.0), &th, &TransitionSet::AllPairs).unwrap();
        let f = 1.0 / (1.0 - t);
        // state 0 = ground (1,0), state 1 = excited (0,1)
        assert_relative_eq!(rm.get(1, 0), f * t, max_relative = 1e-14);
        assert_relative_eq!(rm.get(0, 1), f, max_relative = 1e-14);
        assert!(rm.column_sum_residual() < 1e-15);

        let rho = steady_state(&rm).unwrap();
        assert_relative_eq!(rho[0], 1.0 / (1.0 + t), max_relative = 1e-13);
        assert_relative_eq!(rho[1], t / (1.0 + t), max_relative = 1e-13);

        let ed = decompose(&rm).unwrap();
        assert!(ed.eigenvalues()[0].abs() < 1e-14);
        // -Gamma coth(beta w0 / 2)
        let coth = 1.0 / (0.5 / th.temperature_ratio()).tanh();
        assert_relative_eq!(ed.eigenvalues()[1], -coth, max_relative = 1e-12);
    }

    #[test]
    fn superradiant_decay_rate_at_low_temperature() {
        let th = ThermalParams::new(0.02).unwrap();
        let b = enumerate_basis(3, 2).unwrap();
        let rm = build_rate_matrix(&b, &two_level(1.0), &th, &TransitionSet::AllPairs).unwrap();
        let i21 = b.index_of(&SymmetricState::new(vec![2, 1])).unwrap();
        let i30 = b.index_of(&SymmetricState::new(vec![3, 0])).unwrap();
        assert_relative_eq!(rm.get(i30, i21), 3.0, max_relative = 1e-12);
        assert_relative_eq!(rm.exit_rate(i21), 3.0, max_relative = 1e-12);
        let rho = steady_state(&rm).unwrap();
        assert!(rho[i30] > 1.0 - 1e-12);
    }

    #[test]
    fn steady_state_is_chain_product() {
        // T = 0.5 => beta w0 = ln 2
        let th = ThermalParams::from_beta_omega0(std::f64::consts::LN_2).unwrap();
        let b = enumerate_basis(3, 2).unwrap();
        let rm = build_rate_matrix(&b, &two_level(1.0), &th, &TransitionSet::AllPairs).unwrap();
        let rho = steady_state(&rm).unwrap();
        let z = 1.0 + 0.5 + 0.25 + 0.125;
        for (k, want) in [1.0, 0.5, 0.25, 0.125].iter().enumerate() {
            assert_relative_eq!(rho[k], want / z, max_relative = 1e-12);
        }
        // kernel check
        let r = rm.entries() * DVector::from_vec(rho.clone());
        assert!(r.amax() < 1e-14);
    }

    #[test]
    fn detailed_balance_holds_pairwise() {
        let th = ThermalParams::new(0.7).unwrap();
        let l = three_level();
        let b = enumerate_basis(4, 3).unwrap();
        let rm = build_rate_matrix(&b, &l, &th, &TransitionSet::AllPairs).unwrap();
        let rho = boltzmann_distribution(&b, &l, &th);
        assert!(rm.detailed_balance_residual(&rho) < 1e-13);
        let ss = steady_state(&rm).unwrap();
        for (a, c) in ss.iter().zip(&rho) {
            assert!((a - c).abs() < 1e-14);
        }
    }

    #[test]
    fn decomposition_invariants() {
        let th = ThermalParams::new(0.6).unwrap();
        let l = three_level();
        let b = enumerate_basis(4, 3).unwrap();
        let rm = build_rate_matrix(&b, &l, &th, &TransitionSet::AllPairs).unwrap();
        let ed = decompose(&rm).unwrap();
        let n = ed.dimension();
        let trace: f64 = (0..n).map(|i| rm.get(i, i)).sum();
        assert_relative_eq!(ed.eigenvalues().iter().sum::<f64>(), trace, max_relative = 1e-12);
        assert!(ed.eigenvalues()[1..].iter().all(|l| *l < 0.0));
        let a = ed.left_vectors();
        let ainv = ed.right_vectors();
        let id = &a * &ainv;
        assert!((id - DMatrix::<f64>::identity(n, n)).amax() < 1e-10);
        // right eigenvectors of M
        let mv = rm.entries() * &ainv;
        for k in 0..n {
            let v = ainv.column(k);
            let r = (mv.column(k) - v * ed.eigenvalues()[k]).norm() / v.norm();
            assert!(r < 1e-8 * rm.max_abs(), "pair {k} residual {r}");
        }
        assert!(ed.max_residual() < 1e-12);
    }

    #[test]
    fn empty_transition_set_is_rejected() {
        let b = enumerate_basis(2, 2).unwrap();
        let err = build_rate_matrix(
            &b,
            &two_level(1.0),
            &ThermalParams::new(1.0).unwrap(),
            &TransitionSet::Explicit(vec![]),
        )
        .unwrap_err();
        assert!(matches!(err, Error::Domain(_)));
    }

    #[test]
    fn nearest_neighbour_policy_drops_long_jumps() {
        let l = three_level();
        let b = enumerate_basis(2, 3).unwrap();
        let th = ThermalParams::new(1.0).unwrap();
        let all = build_rate_matrix(&b, &l, &th, &TransitionSet::AllPairs).unwrap();
        let nn = build_rate_matrix(&b, &l, &th, &TransitionSet::NearestNeighbor).unwrap();
        assert!(all.transitions().iter().any(|t| (t.lower, t.upper) == (0, 2)));
        assert!(nn.transitions().iter().all(|t| t.upper == t.lower + 1));
    }

    #[test]
    fn disconnected_generator_is_reducible() {
        // Gamma_12 = 0 isolates the levels
        let l = LevelStructure::new(vec![-2.0, -1.0], vec![1.0, 0.8], vec![vec![0.0, 0.0], vec![0.0, 0.0]]).unwrap();
        let b = enumerate_basis(2, 2).unwrap();
        let rm = build_rate_matrix(&b, &l, &ThermalParams::new(1.0).unwrap(), &TransitionSet::AllPairs).unwrap();
        assert!(matches!(steady_state(&rm), Err(Error::Reducible { zero_modes: 3 })));
        assert!(matches!(decompose(&rm), Err(Error::Reducible { .. })));
    }

    #[test]
    fn broken_detailed_balance_is_reported() {
        let l = three_level();
        let b = enumerate_basis(2, 3).unwrap();
        let mut rm = build_rate_matrix(&b, &l, &ThermalParams::new(1.0).unwrap(), &TransitionSet::AllPairs).unwrap();
        let t = rm.transitions()[0];
        rm.scale_flow(t.target, t.source, 1.5);
        assert!(rm.column_sum_residual() < 1e-15);
        assert!(matches!(decompose(&rm), Err(Error::DetailedBalance { .. })));
        // a general kernel still exists
        let rho = steady_state(&rm).unwrap();
        assert!((rho.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        assert!((rm.entries() * DVector::from_vec(rho)).amax() < 1e-12);
    }

    #[test]
    fn zero_temperature_has_absorbing_ground_state() {
        let b = enumerate_basis(3, 3).unwrap();
        let rm = build_rate_matrix(&b, &three_level(), &ThermalParams::zero(), &TransitionSet::AllPairs).unwrap();
        assert!(rm.transitions().iter().all(|t| t.kind == TransitionKind::Emission));
        let rho = steady_state(&rm).unwrap();
        assert!((rho[0] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn generator_columns_sum_to_zero() {
        let levels = LevelStructure::new(
            (0..10).map(|i| -10.0 + 0.93 * i as f64).collect(),
            (0..10).map(|i| 1.0 - 0.05 * i as f64).collect(),
            (0..10)
                .map(|mu| (0..10).map(|nu| if nu > mu { 1.0 / (nu - mu) as f64 } else { 0.0 }).collect())
                .collect(),
        )
        .unwrap();
        for n in 1..=10 {
            for m in 2..=10 {
                if crate::basis::basis_dimension(n, m) > 2000 {
                    continue;
                }
                let l = levels.truncated(m).unwrap();
                let b = enumerate_basis(n, m).unwrap();
                for t in [0.1, 1.0] {
                    let rm = build_rate_matrix(&b, &l, &ThermalParams::new(t).unwrap(), &TransitionSet::AllPairs).unwrap();
                    assert!(rm.column_sum_residual() < 1e-12, "N={n} M={m}: {}", rm.column_sum_residual());
                }
            }
        }
    }

    fn dominant_lambda(n: usize, t: f64) -> f64 {
        let l = two_level(1.0);
        let b = enumerate_basis(n, 2).unwrap();
        let rm = build_rate_matrix(&b, &l, &ThermalParams::new(t).unwrap(), &TransitionSet::AllPairs).unwrap();
        let ed = decompose(&rm).unwrap();
        crate::spectrum::lorentzian_weights(&ed, &b, &l).unwrap().dominant().unwrap().lambda
    }

    #[test]
    fn dominant_rate_is_affine_in_n_at_low_temperature() {
        let ns: Vec<f64> = (1..=10).map(|n| n as f64).collect();
        let fit = |t: f64| {
            let lam: Vec<f64> = (1..=10).map(|n| dominant_lambda(n, t)).collect();
            let (a, b) = crate::spectrum::linear_fit(&ns, &lam);
            let res = ns.iter().zip(&lam).map(|(n, y)| ((a + b * n - y) / y).abs()).fold(0.0, f64::max);
            (b, res)
        };
        let (slope, res) = fit(0.1);
        assert!(res < 0.01, "{res}");
        assert!((slope + 1.0).abs() < 0.01);
        // the slope flattens as the temperature rises
        let slopes: Vec<f64> = [0.2, 0.5, 1.0].iter().map(|&t| fit(t).0.abs()).collect();
        assert!(slopes.windows(2).all(|w| w[1] < w[0]), "{slopes:?}");
        assert!(slopes[2] < slope.abs());
    }

    proptest::proptest! {
        #[test]
        fn symmetrised_generator_is_symmetric(
            n in 1usize..5,
            t in 0.05f64..2.0,
            g in proptest::collection::vec(0.05f64..3.0, 3),
            gap in 0.2f64..1.5,
        ) {
            let l = LevelStructure::new(
                vec![-5.0, -5.0 + gap, -4.9 + 2.0 * gap],
                vec![1.0, 0.8, 0.6],
                vec![vec![0.0, g[0], g[1]], vec![0.0, 0.0, g[2]], vec![0.0; 3]],
            )
            .unwrap();
            let b = enumerate_basis(n, 3).unwrap();
            let rm = build_rate_matrix(&b, &l, &ThermalParams::new(t).unwrap(), &TransitionSet::AllPairs).unwrap();
            let rho = steady_state(&rm).unwrap();
            let d = rm.dimension();
            let s = DMatrix::from_fn(d, d, |i, j| rm.get(i, j) * (rho[j] / rho[i]).sqrt());
            let asym = (&s - s.transpose()).amax() / rm.max_abs();
            proptest::prop_assert!(asym < 1e-8, "{}", asym);
            let ed = decompose(&rm).unwrap();
            let trace: f64 = (0..d).map(|i| rm.get(i, i)).sum();
            let sum: f64 = ed.eigenvalues().iter().sum();
            proptest::prop_assert!((sum - trace).abs() < 1e-10 * trace.abs());
            proptest::prop_assert!(ed.eigenvalues().iter().enumerate().all(|(k, l)| k == ed.steady_index() || *l < 0.0));
        }
    }
}
