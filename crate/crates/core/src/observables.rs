//! Reduced density matrices, entanglement entropies, imbalance and the
//! three-way energy split.

use std::collections::BTreeMap;

use nalgebra::DMatrix;

use crate::lattice::{Block, BlockOperators, FullState, HermitianOperator, SectorState};
use crate::linalg::{self, CMatrix};
use crate::{Error, Result, C64};

/// Eigenvalues above this magnitude below zero are treated as a failure
/// rather than round-off.
const CLAMP_TOL: f64 = 1e-10;

/// Reduced state of a block, in the block's local basis
/// (bit `k` = site `block.start + k`).
#[derive(Debug, Clone, PartialEq)]
pub struct ReducedDensityMatrix {
    pub block: Block,
    pub matrix: CMatrix,
}

impl ReducedDensityMatrix {
    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn trace(&self) -> f64 {
        self.matrix.trace().re
    }

    /// Spectrum with round-off negatives clamped to zero and renormalized to
    /// unit sum, ascending.
    pub fn eigenvalues(&self) -> Result<Vec<f64>> {
        let (mut values, _) = linalg::hermitian_eigh(&self.matrix);
        if let Some(&worst) = values.first() {
            if worst < -CLAMP_TOL {
                return Err(Error::Numerical(format!(
                    "reduced density matrix has eigenvalue {worst:.3e}"
                )));
            }
        }
        values.iter_mut().for_each(|v| *v = v.max(0.0));
        let sum: f64 = values.iter().sum();
        values.iter_mut().for_each(|v| *v /= sum);
        Ok(values)
    }
}

fn check_block(block: Block, n_sites: usize) -> Result<()> {
    block.validate(n_sites)
}

/// `ρ_S = Tr_E |ψ⟩⟨ψ|` for a sector state.
pub fn reduced_density_matrix(psi: &SectorState, block: Block) -> Result<ReducedDensityMatrix> {
    check_block(block, psi.n_sites())?;
    let d = block.dim();
    let mask = block.mask();
    let mut rho = CMatrix::zeros(d, d);
    for (&config, &amp) in psi.basis().configs().iter().zip(psi.amps()) {
        if amp == C64::new(0.0, 0.0) {
            continue;
        }
        let row = block.local_index(config);
        let env = config & !mask;
        for col in 0..d {
            let partner = psi.amp_of(env | block.place(col));
            rho[(row, col)] += amp * partner.conj();
        }
    }
    Ok(ReducedDensityMatrix { block, matrix: rho })
}

/// `ρ_S` for a state on the full `2^N` space.
pub fn reduced_density_matrix_full(psi: &FullState, block: Block) -> Result<ReducedDensityMatrix> {
    check_block(block, psi.n_sites)?;
    let d = block.dim();
    let mask = block.mask();
    let mut rho = CMatrix::zeros(d, d);
    for (config, &amp) in psi.amps.iter().enumerate() {
        if amp == C64::new(0.0, 0.0) {
            continue;
        }
        let config = config as u32;
        let row = block.local_index(config);
        let env = config & !mask;
        for col in 0..d {
            rho[(row, col)] += amp * psi.amps[(env | block.place(col)) as usize].conj();
        }
    }
    Ok(ReducedDensityMatrix { block, matrix: rho })
}

fn entropy_of(probs: impl IntoIterator<Item = f64>) -> f64 {
    probs
        .into_iter()
        .filter(|&p| p > 0.0)
        .map(|p| -p * p.ln())
        .sum()
}

/// `-Tr ρ ln ρ` (natural log, `0 ln 0 = 0`).
pub fn von_neumann_entropy(rho: &ReducedDensityMatrix) -> Result<f64> {
    Ok(entropy_of(rho.eigenvalues()?).max(0.0))
}

/// Entropy of sites `1..=N/2` from the Schmidt values of the amplitude
/// matrix, one magnetization block of the left half at a time.
pub fn half_chain_entropy(psi: &SectorState) -> f64 {
    let n = psi.n_sites();
    let half = n / 2;
    let low_mask = (1u32 << half) - 1;
    // position of each half-configuration within its popcount group
    let mut slot = vec![0usize; 1 << half];
    let mut group_sizes = vec![0usize; half + 1];
    for c in 0..(1u32 << half) {
        let k = c.count_ones() as usize;
        slot[c as usize] = group_sizes[k];
        group_sizes[k] += 1;
    }
    let mut blocks: BTreeMap<usize, DMatrix<C64>> = BTreeMap::new();
    for (&config, &amp) in psi.basis().configs().iter().zip(psi.amps()) {
        let left = config & low_mask;
        let right = config >> half;
        let k = left.count_ones() as usize;
        let kr = right.count_ones() as usize;
        let m = blocks
            .entry(k)
            .or_insert_with(|| DMatrix::zeros(group_sizes[k], group_sizes[kr]));
        m[(slot[left as usize], slot[right as usize])] = amp;
    }
    let mut weights = Vec::new();
    for m in blocks.into_values() {
        weights.extend(m.singular_values().iter().map(|s| s * s));
    }
    let total: f64 = weights.iter().sum();
    entropy_of(weights.into_iter().map(|w| w / total)).max(0.0)
}

/// `⟨S^z_i⟩` for every site, 1-based order.
pub fn magnetization_profile(psi: &SectorState) -> Vec<f64> {
    let n = psi.n_sites();
    let mut profile = vec![0.0; n];
    for (&config, amp) in psi.basis().configs().iter().zip(psi.amps()) {
        let w = amp.norm_sqr();
        if w == 0.0 {
            continue;
        }
        for (bit, m) in profile.iter_mut().enumerate() {
            *m += if config >> bit & 1 == 1 { 0.5 * w } else { -0.5 * w };
        }
    }
    profile
}

/// `(⟨S^z_o⟩ - ⟨S^z_e⟩) / (⟨S^z_o⟩ + ⟨S^z_e⟩ + N/2)` with odd/even site sums.
pub fn imbalance(psi: &SectorState) -> f64 {
    let profile = magnetization_profile(psi);
    let odd: f64 = profile.iter().step_by(2).sum();
    let even: f64 = profile.iter().skip(1).step_by(2).sum();
    (odd - even) / (odd + even + psi.n_sites() as f64 / 2.0)
}

fn check_dim(op: &HermitianOperator, psi: &SectorState) -> Result<()> {
    if op.dim() != psi.amps().len() {
        return Err(Error::DimensionMismatch {
            expected: op.dim(),
            found: psi.amps().len(),
        });
    }
    Ok(())
}

/// `⟨ψ|op|ψ⟩`.
pub fn expectation(op: &HermitianOperator, psi: &SectorState) -> Result<f64> {
    check_dim(op, psi)?;
    Ok(linalg::inner(psi.amps(), &op.apply_vec(psi.amps())).re)
}

/// `⟨ψ|op²|ψ⟩ = ||op ψ||²`.
pub fn second_moment(op: &HermitianOperator, psi: &SectorState) -> Result<f64> {
    check_dim(op, psi)?;
    Ok(linalg::norm(&op.apply_vec(psi.amps())).powi(2))
}

/// Subsystem, interaction and environment energies.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EnergySplit {
    pub e_s: f64,
    pub e_int: f64,
    pub e_e: f64,
}

impl EnergySplit {
    pub fn total(&self) -> f64 {
        self.e_s + self.e_int + self.e_e
    }
}

pub fn energy_split(psi: &SectorState, ops: &BlockOperators) -> Result<EnergySplit> {
    Ok(EnergySplit {
        e_s: expectation(&ops.h_s, psi)?,
        e_int: expectation(&ops.v_se, psi)?,
        e_e: expectation(&ops.h_e, psi)?,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::collections::HashMap;
    use crate::lattice::{
        bell_chain_state, build_basis, build_block_operators, build_hamiltonian, neel_state,
        ModelParams, SectorBasis,
    };
    use crate::propagator::{diagonalize, evolve};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use std::f64::consts::LN_2;
    use std::sync::Arc;

    fn basis(n: usize) -> Arc<SectorBasis> {
        Arc::new(build_basis(n).unwrap())
    }

    fn random_state(b: &Arc<SectorBasis>, seed: u64) -> SectorState {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut amps: Vec<C64> = (0..b.dim())
            .map(|_| C64::new(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5))
            .collect();
        let n = linalg::norm(&amps);
        amps.iter_mut().for_each(|a| *a /= n);
        SectorState::new(Arc::clone(b), amps).unwrap()
    }

    #[test]
    fn neel_rdm_is_pure_projector() {
        let b = basis(8);
        let psi = neel_state(&b).unwrap();
        for block in [Block::new(1, 2), Block::new(4, 5), Block::new(3, 3)] {
            let rho = reduced_density_matrix(&psi, block).unwrap();
            // block pattern: odd sites up
            let local = block.local_index(0b0101_0101);
            for r in 0..rho.dim() {
                for c in 0..rho.dim() {
                    let expected = if r == local && c == local { 1.0 } else { 0.0 };
                    assert_eq!(rho.matrix[(r, c)], C64::new(expected, 0.0));
                }
            }
            assert_eq!(von_neumann_entropy(&rho).unwrap(), 0.0);
        }
    }

    #[test]
    fn bell_chain_rdms() {
        let b = basis(4);
        let psi = bell_chain_state(&b).unwrap();
        let inner = reduced_density_matrix(&psi, Block::new(2, 3)).unwrap();
        assert!(von_neumann_entropy(&inner).unwrap().abs() < 1e-12);
        let edge = reduced_density_matrix(&psi, Block::new(1, 2)).unwrap();
        let spectrum = edge.eigenvalues().unwrap();
        let expected = [0.0, 0.0, 0.5, 0.5];
        for (a, e) in spectrum.iter().zip(expected) {
            assert!((a - e).abs() < 1e-12);
        }
        assert!((von_neumann_entropy(&edge).unwrap() - LN_2).abs() < 1e-12);
        assert!((half_chain_entropy(&psi) - LN_2).abs() < 1e-12);
    }

    #[test]
    fn maximally_mixed_block_entropy() {
        let rho = ReducedDensityMatrix {
            block: Block::edge_pair(),
            matrix: CMatrix::identity(4, 4) * C64::new(0.25, 0.0),
        };
        assert!((von_neumann_entropy(&rho).unwrap() - 2.0 * LN_2).abs() < 1e-14);
    }

    #[test]
    fn clamping_rejects_real_negatives() {
        let mut m = CMatrix::identity(2, 2);
        m[(0, 0)] = C64::new(1.1, 0.0);
        m[(1, 1)] = C64::new(-0.1, 0.0);
        let rho = ReducedDensityMatrix {
            block: Block::new(1, 1),
            matrix: m,
        };
        assert!(rho.eigenvalues().is_err());
    }

    #[test]
    fn rdm_invariants_on_random_states() {
        let b = basis(8);
        for seed in 0..10 {
            let psi = random_state(&b, seed);
            for block in [Block::new(1, 2), Block::new(5, 6), Block::new(8, 8)] {
                let rho = reduced_density_matrix(&psi, block).unwrap();
                assert!((rho.trace() - 1.0).abs() < 1e-10);
                assert!(linalg::hermiticity_defect(&rho.matrix) < 1e-12);
                let (raw, _) = linalg::hermitian_eigh(&rho.matrix);
                assert!(raw[0] >= -1e-10);
                let s = von_neumann_entropy(&rho).unwrap();
                assert!(s >= 0.0 && s <= (rho.dim() as f64).ln() + 1e-9);
            }
        }
    }

    #[test]
    fn full_and_sector_rdms_agree() {
        let b = basis(6);
        let psi = random_state(&b, 42);
        for block in [Block::new(1, 2), Block::new(3, 4), Block::new(2, 2)] {
            let a = reduced_density_matrix(&psi, block).unwrap();
            let f = reduced_density_matrix_full(&psi.to_full(), block).unwrap();
            assert!((a.matrix - f.matrix).camax() < 1e-14);
        }
    }

    #[test]
    fn schmidt_path_matches_explicit_rdm() {
        // half chain of N = 4 is the block {1, 2}
        let b = basis(4);
        for seed in 0..5 {
            let psi = random_state(&b, seed);
            let rho = reduced_density_matrix(&psi, Block::new(1, 2)).unwrap();
            assert!((half_chain_entropy(&psi) - von_neumann_entropy(&rho).unwrap()).abs() < 1e-9);
        }
        // larger halves: explicit reduced matrix over the 2^{N/2} left configurations
        for n in [6, 8, 10] {
            let b = basis(n);
            let psi = random_state(&b, n as u64);
            let half = n / 2;
            let dl = 1usize << half;
            let mut rho = CMatrix::zeros(dl, dl);
            let mut by_right: HashMap<u32, Vec<(usize, C64)>> = HashMap::new();
            for (&c, &a) in b.configs().iter().zip(psi.amps()) {
                by_right.entry(c >> half).or_default().push(((c & ((1 << half) - 1)) as usize, a));
            }
            for entries in by_right.values() {
                for &(l, a) in entries {
                    for &(l2, a2) in entries {
                        rho[(l, l2)] += a * a2.conj();
                    }
                }
            }
            let (vals, _) = linalg::hermitian_eigh(&rho);
            let explicit: f64 = vals.iter().filter(|&&p| p > 1e-300).map(|&p| -p * p.ln()).sum();
            let schmidt = half_chain_entropy(&psi);
            assert!((explicit - schmidt).abs() < 1e-9, "N={n}: {explicit} vs {schmidt}");
            assert!(schmidt <= half as f64 * LN_2 + 1e-9);
        }
    }

    #[test]
    fn neel_half_chain_entropy_is_zero() {
        assert_eq!(half_chain_entropy(&neel_state(&basis(10)).unwrap()), 0.0);
    }

    #[test]
    fn imbalance_values() {
        let b = basis(8);
        assert_eq!(imbalance(&neel_state(&b).unwrap()), 1.0);
        let anti = SectorState::basis_state(Arc::clone(&b), 0b1010_1010).unwrap();
        assert_eq!(imbalance(&anti), -1.0);
        let amp = C64::new(1.0 / (b.dim() as f64).sqrt(), 0.0);
        let uniform = SectorState::new(Arc::clone(&b), vec![amp; b.dim()]).unwrap();
        assert!(imbalance(&uniform).abs() < 1e-14);
    }

    #[test]
    fn imbalance_frozen_without_hopping() {
        let b = basis(8);
        let p = ModelParams::new(0.0, 0.3, vec![1.0, -2.0, 0.5, 3.0, -0.5, 0.0, 2.0, -1.0], Block::edge_pair()).unwrap();
        let h = build_hamiltonian(&p, &b).unwrap();
        let spec = Arc::new(diagonalize(&h).unwrap());
        let psi0 = neel_state(&b).unwrap();
        for t in [0.5, 3.0, 40.0] {
            let psi = evolve(&spec, &psi0, t).unwrap();
            assert!((imbalance(&psi) - 1.0).abs() <= 1e-10);
        }
    }

    #[test]
    fn neel_energy_split() {
        let b = basis(8);
        let p = ModelParams::clean(8, 1.0, 0.2).unwrap();
        let ops = build_block_operators(&p, &b).unwrap();
        let psi = neel_state(&b).unwrap();
        let split = energy_split(&psi, &ops).unwrap();
        assert!((split.e_s + 0.05).abs() < 1e-15);
        assert!((split.e_int + 0.05).abs() < 1e-15);
        assert!((split.e_e + 0.25).abs() < 1e-15);
        let h = build_hamiltonian(&p, &b).unwrap();
        assert!((expectation(&h, &psi).unwrap() + 0.35).abs() < 1e-15);
    }

    #[test]
    fn two_site_split_has_no_environment() {
        let b = basis(2);
        let p = ModelParams::clean(2, 1.0, 0.2).unwrap();
        let ops = build_block_operators(&p, &b).unwrap();
        let split = energy_split(&neel_state(&b).unwrap(), &ops).unwrap();
        assert_eq!((split.e_int, split.e_e), (0.0, 0.0));
    }

    #[test]
    fn split_sums_to_energy_on_random_states() {
        let b = basis(8);
        let p = ModelParams::new(1.0, 0.2, vec![1.0, -2.0, 0.5, 3.0, -0.5, 0.0, 2.0, -1.0], Block::edge_pair()).unwrap();
        let ops = build_block_operators(&p, &b).unwrap();
        let h = build_hamiltonian(&p, &b).unwrap();
        for seed in 0..5 {
            let psi = random_state(&b, seed);
            let split = energy_split(&psi, &ops).unwrap();
            assert!((split.total() - expectation(&h, &psi).unwrap()).abs() <= 1e-9);
        }
    }

    #[test]
    fn moments() {
        let b = basis(6);
        let p = ModelParams::new(1.0, 0.2, vec![0.3, -0.7, 1.2, 0.0, -1.1, 0.4], Block::edge_pair()).unwrap();
        let h = build_hamiltonian(&p, &b).unwrap();
        let identity = build_hamiltonian(&ModelParams::clean(6, 0.0, 0.0).unwrap(), &b).unwrap();
        let psi = random_state(&b, 3);
        assert_eq!(expectation(&identity, &psi).unwrap(), 0.0);
        for seed in 0..20 {
            let psi = random_state(&b, seed);
            let mean = expectation(&h, &psi).unwrap();
            assert!(second_moment(&h, &psi).unwrap() - mean * mean >= 0.0);
        }
        let spec = diagonalize(&h).unwrap();
        let amps = spec.eigenvectors.column(3).iter().map(|&x| C64::new(x, 0.0)).collect();
        let eig = SectorState::new(Arc::clone(&b), amps).unwrap();
        let lambda = spec.eigenvalues[3];
        assert!((expectation(&h, &eig).unwrap() - lambda).abs() < 1e-12);
        assert!((second_moment(&h, &eig).unwrap() - lambda * lambda).abs() < 1e-11);
        let wrong = random_state(&basis(4), 0);
        assert!(expectation(&h, &wrong).is_err());
    }
}
