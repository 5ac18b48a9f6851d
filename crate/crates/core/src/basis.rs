//! Permutation-symmetric occupation states of N adatoms over M levels.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::potential::LevelStructure;

/// Default cap on the number of symmetric states.
pub const DEFAULT_DIMENSION_CAP: usize = 200_000;

/// Occupation vector (m_1, ..., m_M).
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct SymmetricState(Vec<u32>);

impl SymmetricState {
    pub fn new(occupations: Vec<u32>) -> Self {
        Self(occupations)
    }

    pub fn occupations(&self) -> &[u32] {
        &self.0
    }

    pub fn levels(&self) -> usize {
        self.0.len()
    }

    pub fn atoms(&self) -> u32 {
        self.0.iter().sum()
    }

    /// Total excitation energy above the all-ground state, in units where
    /// level `mu` carries `level_energy[mu]`.
    pub fn energy(&self, level_energy: &[f64]) -> f64 {
        self.0
            .iter()
            .zip(level_energy)
            .map(|(&m, e)| m as f64 * e)
            .sum()
    }
}

/// Binomial coefficient in u128; saturates instead of overflowing.
pub fn binomial(n: u64, k: u64) -> u128 {
    let k = k.min(n - k.min(n));
    let mut acc: u128 = 1;
    for i in 0..k {
        acc = match acc.checked_mul((n - i) as u128) {
            Some(v) => v / (i + 1) as u128,
            None => return u128::MAX,
        };
    }
    acc
}

/// Number of symmetric states C(N + M - 1, N).
pub fn basis_dimension(n_atoms: usize, n_levels: usize) -> u128 {
    binomial((n_atoms + n_levels - 1) as u64, n_atoms as u64)
}

/// All weak compositions of N into M parts in reverse-lexicographic order,
/// with a state -> ordinal index.
#[derive(Debug, Clone)]
pub struct SymmetricBasis {
    n_atoms: usize,
    n_levels: usize,
    states: Vec<SymmetricState>,
    index: HashMap<SymmetricState, usize>,
}

impl SymmetricBasis {
    pub fn n_atoms(&self) -> usize {
        self.n_atoms
    }

    pub fn n_levels(&self) -> usize {
        self.n_levels
    }

    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    pub fn states(&self) -> &[SymmetricState] {
        &self.states
    }

    pub fn state(&self, i: usize) -> &SymmetricState {
        &self.states[i]
    }

    pub fn index_of(&self, s: &SymmetricState) -> Option<usize> {
        self.index.get(s).copied()
    }

    /// Dipole D_i of every basis state, in basis order.
    pub fn dipoles(&self, levels: &LevelStructure) -> Result<Vec<f64>> {
        self.states.iter().map(|s| state_dipole(s, levels)).collect()
    }
}

/// Enumerate the symmetric basis with the default dimension cap.
pub fn enumerate_basis(n_atoms: usize, n_levels: usize) -> Result<SymmetricBasis> {
    enumerate_basis_capped(n_atoms, n_levels, DEFAULT_DIMENSION_CAP)
}

pub fn enumerate_basis_capped(n_atoms: usize, n_levels: usize, cap: usize) -> Result<SymmetricBasis> {
    if n_atoms < 1 {
        return Err(Error::domain("need at least one adatom"));
    }
    if n_levels < 2 {
        return Err(Error::domain("need at least two levels"));
    }
    let dim = basis_dimension(n_atoms, n_levels);
    if dim > cap as u128 {
        return Err(Error::Capacity { states: dim, cap });
    }
    let mut states = Vec::with_capacity(dim as usize);
    let mut current = vec![0u32; n_levels];
    compositions(n_atoms as u32, 0, &mut current, &mut states);
    debug_assert_eq!(states.len() as u128, dim);
    let index = states.iter().enumerate().map(|(i, s)| (s.clone(), i)).collect();
    Ok(SymmetricBasis {
        n_atoms,
        n_levels,
        states,
        index,
    })
}

fn compositions(remaining: u32, slot: usize, current: &mut Vec<u32>, out: &mut Vec<SymmetricState>) {
    if slot + 1 == current.len() {
        current[slot] = remaining;
        out.push(SymmetricState(current.clone()));
        return;
    }
    for m in (0..=remaining).rev() {
        current[slot] = m;
        compositions(remaining - m, slot + 1, current, out);
    }
}

/// Collective lowering L_{mu nu}: moves one adatom from `nu` down to `mu`.
/// Returns the target state and the amplitude sqrt((m_mu + 1) m_nu); if
/// `m_nu = 0` the amplitude is 0 and the input state is returned.
pub fn apply_lowering(s: &SymmetricState, mu: usize, nu: usize) -> Result<(SymmetricState, f64)> {
    check_pair(s, mu, nu)?;
    let occ = s.occupations();
    if occ[nu] == 0 {
        return Ok((s.clone(), 0.0));
    }
    let amp = (((occ[mu] + 1) * occ[nu]) as f64).sqrt();
    let mut next = occ.to_vec();
    next[mu] += 1;
    next[nu] -= 1;
    Ok((SymmetricState(next), amp))
}

/// Adjoint of [`apply_lowering`]: moves one adatom from `mu` up to `nu`
/// with amplitude sqrt(m_mu (m_nu + 1)).
pub fn apply_raising(s: &SymmetricState, mu: usize, nu: usize) -> Result<(SymmetricState, f64)> {
    check_pair(s, mu, nu)?;
    let occ = s.occupations();
    if occ[mu] == 0 {
        return Ok((s.clone(), 0.0));
    }
    let amp = ((occ[mu] * (occ[nu] + 1)) as f64).sqrt();
    let mut next = occ.to_vec();
    next[mu] -= 1;
    next[nu] += 1;
    Ok((SymmetricState(next), amp))
}

fn check_pair(s: &SymmetricState, mu: usize, nu: usize) -> Result<()> {
    if mu >= nu || nu >= s.levels() {
        return Err(Error::domain(format!(
            "invalid level pair ({mu}, {nu}) for {} levels; need mu < nu",
            s.levels()
        )));
    }
    Ok(())
}

/// D = sum_mu m_mu d_mu.
pub fn state_dipole(s: &SymmetricState, levels: &LevelStructure) -> Result<f64> {
    if s.levels() != levels.count() {
        return Err(Error::domain(format!(
            "state has {} levels but the level structure has {}",
            s.levels(),
            levels.count()
        )));
    }
    Ok(s.occupations()
        .iter()
        .zip(levels.dipoles())
        .map(|(&m, d)| m as f64 * d)
        .sum())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn st(v: &[u32]) -> SymmetricState {
        SymmetricState::new(v.to_vec())
    }

    fn three_levels(d: [f64; 3]) -> LevelStructure {
        LevelStructure::new(
            vec![-3.0, -2.0, -1.2],
            d.to_vec(),
            vec![vec![0.0, 1.0, 0.0], vec![0.0, 0.0, 1.4], vec![0.0; 3]],
        )
        .unwrap()
    }

    #[test]
    fn three_atoms_two_levels() {
        let b = enumerate_basis(3, 2).unwrap();
        let got: Vec<_> = b.states().iter().map(|s| s.occupations().to_vec()).collect();
        assert_eq!(got, vec![vec![3, 0], vec![2, 1], vec![1, 2], vec![0, 3]]);
    }

    #[test]
    fn small_dimensions() {
        assert_eq!(enumerate_basis(2, 3).unwrap().len(), 6);
        for m in 2..8 {
            assert_eq!(enumerate_basis(1, m).unwrap().len(), m);
        }
    }

    #[test]
    fn capacity_error_names_the_cap() {
        let err = enumerate_basis_capped(8, 10, 1000).unwrap_err();
        assert_eq!(err, Error::Capacity { states: 24310, cap: 1000 });
        assert!(err.to_string().contains("1000"));
    }

    #[test]
    fn invalid_sizes() {
        assert!(enumerate_basis(0, 3).is_err());
        assert!(enumerate_basis(3, 1).is_err());
    }

    #[test]
    fn lowering_examples() {
        let (s, a) = apply_lowering(&st(&[1, 2]), 0, 1).unwrap();
        assert_eq!(s, st(&[2, 1]));
        assert_eq!(a, 2.0);
        let (s, a) = apply_lowering(&st(&[4, 0]), 0, 1).unwrap();
        assert_eq!((s, a), (st(&[4, 0]), 0.0));
        let (s, a) = apply_lowering(&st(&[0, 1]), 0, 1).unwrap();
        assert_eq!((s, a), (st(&[1, 0]), 1.0));
        assert!(apply_lowering(&st(&[0, 1]), 1, 0).is_err());
        assert!(apply_lowering(&st(&[0, 1]), 0, 2).is_err());
    }

    #[test]
    fn state_dipole_examples() {
        let l = three_levels([1.0, 0.8, 0.6]);
        assert!((state_dipole(&st(&[2, 0, 1]), &l).unwrap() - 2.6).abs() < 1e-15);
        assert!((state_dipole(&st(&[1, 1, 1]), &l).unwrap() - 2.4).abs() < 1e-15);
        assert!((state_dipole(&st(&[5, 0, 0]), &l).unwrap() - 5.0).abs() < 1e-15);
        assert!(state_dipole(&st(&[2, 0]), &l).is_err());
    }

    fn brute_count(n: u32, m: usize) -> usize {
        if m == 1 {
            return 1;
        }
        (0..=n).map(|k| brute_count(n - k, m - 1)).sum()
    }

    #[test]
    fn dimension_matches_brute_force_count() {
        for n in 1..=12u32 {
            for m in 2..=10usize {
                assert_eq!(basis_dimension(n as usize, m), brute_count(n, m) as u128, "N={n} M={m}");
            }
        }
    }

    proptest! {
        #[test]
        fn index_round_trips_and_lowering_closes(n in 1usize..7, m in 2usize..6) {
            let b = enumerate_basis(n, m).unwrap();
            prop_assert_eq!(b.len() as u128, basis_dimension(n, m));
            for (i, s) in b.states().iter().enumerate() {
                prop_assert_eq!(b.index_of(s), Some(i));
                prop_assert_eq!(s.atoms() as usize, n);
                for mu in 0..m {
                    for nu in (mu + 1)..m {
                        let (t, a) = apply_lowering(s, mu, nu).unwrap();
                        prop_assert!(b.index_of(&t).is_some());
                        prop_assert_eq!(t.atoms() as usize, n);
                        if a > 0.0 {
                            // raising from the target returns with the same amplitude
                            let (back, a2) = apply_raising(&t, mu, nu).unwrap();
                            prop_assert_eq!(&back, s);
                            prop_assert!((a - a2).abs() < 1e-12);
                        }
                    }
                }
            }
            // reverse-lexicographic ordering
            for w in b.states().windows(2) {
                prop_assert!(w[0] > w[1]);
            }
        }
    }
}
