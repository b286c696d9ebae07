//! Disordered XXZ chain: parameters, the zero-magnetization basis, operators
//! and initial states.
//!
//! Sites are numbered from 1. Site `i` lives on bit `i - 1` of a
//! configuration bitmask and a set bit means spin up.

mod basis;
mod operator;
mod states;

pub use basis::{build_basis, SectorBasis};
pub use operator::{
    apply_full_environment_hamiltonian, apply_full_hamiltonian, build_block_operators, build_hamiltonian, BlockOperators,
    BoundaryCoupling, CsrMatrix, HermitianOperator, Storage, SPARSE_THRESHOLD,
};
pub use states::{bell_chain_state, neel_state, FullState, SectorState};

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Largest chain the model layer accepts.
pub const MAX_MODEL_SITES: usize = 16;
/// Largest chain for which a basis can be enumerated.
pub const MAX_BASIS_SITES: usize = 20;

/// Contiguous block of sites (1-based, inclusive) forming subsystem S.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Block {
    pub start: usize,
    pub end: usize,
}

impl Block {
    pub const fn new(start: usize, end: usize) -> Self {
        Block { start, end }
    }

    /// The first two sites of the chain.
    pub const fn edge_pair() -> Self {
        Block { start: 1, end: 2 }
    }

    pub fn len(&self) -> usize {
        self.end + 1 - self.start
    }

    pub fn is_empty(&self) -> bool {
        self.end < self.start
    }

    pub fn contains(&self, site: usize) -> bool {
        (self.start..=self.end).contains(&site)
    }

    /// Local Hilbert-space dimension `2^len`.
    pub fn dim(&self) -> usize {
        1 << self.len()
    }

    /// Bitmask of the block inside a chain configuration.
    pub fn mask(&self) -> u32 {
        ((1u32 << self.len()) - 1) << (self.start - 1)
    }

    /// Local block index (bit `k` = block site `start + k`) of a configuration.
    #[inline]
    pub fn local_index(&self, config: u32) -> usize {
        ((config >> (self.start - 1)) as usize) & (self.dim() - 1)
    }

    /// Configuration bits occupied by local block index `local`.
    #[inline]
    pub fn place(&self, local: usize) -> u32 {
        (local as u32) << (self.start - 1)
    }

    pub fn validate(&self, n_sites: usize) -> Result<()> {
        if self.start < 1 || self.end < self.start || self.end > n_sites {
            return Err(Error::InvalidBlock {
                start: self.start,
                end: self.end,
                n_sites,
            });
        }
        if self.len() > 2 {
            return Err(Error::UnsupportedBlock(self.len()));
        }
        Ok(())
    }
}

impl Default for Block {
    fn default() -> Self {
        Block::edge_pair()
    }
}

/// Couplings, fields and block definition of one Hamiltonian realization.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelParams {
    pub n_sites: usize,
    /// Spin-flip coupling; the reference energy scale.
    pub j_perp: f64,
    /// Longitudinal coupling.
    pub j_z: f64,
    /// On-site fields `h_1 .. h_N`.
    pub fields: Vec<f64>,
    pub block: Block,
}

impl ModelParams {
    pub fn new(j_perp: f64, j_z: f64, fields: Vec<f64>, block: Block) -> Result<Self> {
        let p = ModelParams {
            n_sites: fields.len(),
            j_perp,
            j_z,
            fields,
            block,
        };
        p.validate()?;
        Ok(p)
    }

    /// Clean chain (all fields zero) with the default edge block.
    pub fn clean(n_sites: usize, j_perp: f64, j_z: f64) -> Result<Self> {
        Self::new(j_perp, j_z, vec![0.0; n_sites], Block::edge_pair())
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.n_sites;
        if n < 2 || n % 2 != 0 || n > MAX_MODEL_SITES {
            return Err(Error::InvalidSiteCount {
                n_sites: n,
                max: MAX_MODEL_SITES,
            });
        }
        if self.fields.len() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                found: self.fields.len(),
            });
        }
        if !self.j_perp.is_finite() || !self.j_z.is_finite() {
            return Err(Error::InvalidParameter("couplings must be finite".into()));
        }
        if let Some(h) = self.fields.iter().find(|h| !h.is_finite()) {
            return Err(Error::InvalidParameter(format!("non-finite field {h}")));
        }
        self.block.validate(n)
    }
}

/// Draws `n_sites` independent fields uniformly on `[-w, w]`.
pub fn sample_disorder<R: Rng + ?Sized>(n_sites: usize, w: f64, rng: &mut R) -> Result<Vec<f64>> {
    if !(w >= 0.0) || !w.is_finite() {
        return Err(Error::InvalidParameter(format!(
            "disorder strength must be finite and non-negative, got {w}"
        )));
    }
    if w == 0.0 {
        return Ok(vec![0.0; n_sites]);
    }
    Ok((0..n_sites).map(|_| rng.random_range(-w..=w)).collect())
}

/// Spin parameters of the spinless-fermion chain with hopping `t`,
/// nearest-neighbour repulsion `v` and on-site energies `onsite`.
pub fn jordan_wigner_params(t: f64, v: f64, onsite: &[f64]) -> Result<ModelParams> {
    if !t.is_finite() || !v.is_finite() {
        return Err(Error::InvalidParameter("hopping and interaction must be finite".into()));
    }
    ModelParams::new(2.0 * t, v, onsite.to_vec(), Block::edge_pair())
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn block_bit_layout() {
        let b = Block::new(2, 3);
        assert_eq!(b.mask(), 0b0110);
        assert_eq!(b.local_index(0b0100), 2);
        assert_eq!(b.place(1), 0b0010);
        assert_eq!(Block::new(3, 3).dim(), 2);
    }

    #[test]
    fn block_validation() {
        assert!(Block::new(1, 2).validate(8).is_ok());
        assert!(Block::new(4, 5).validate(8).is_ok());
        assert!(matches!(Block::new(1, 3).validate(8), Err(Error::UnsupportedBlock(3))));
        assert!(matches!(Block::new(0, 1).validate(8), Err(Error::InvalidBlock { .. })));
        assert!(matches!(Block::new(8, 9).validate(8), Err(Error::InvalidBlock { .. })));
    }

    #[test]
    fn params_reject_odd_or_large_chains() {
        assert!(ModelParams::clean(3, 1.0, 0.2).is_err());
        assert!(ModelParams::clean(18, 1.0, 0.2).is_err());
        assert!(ModelParams::clean(0, 1.0, 0.2).is_err());
        assert!(ModelParams::new(1.0, 0.2, vec![0.0, f64::NAN], Block::edge_pair()).is_err());
        assert!(ModelParams::clean(16, 1.0, 0.2).is_ok());
    }

    #[test]
    fn disorder_zero_width() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        assert_eq!(sample_disorder(6, 0.0, &mut rng).unwrap(), vec![0.0; 6]);
        assert!(sample_disorder(6, -1.0, &mut rng).is_err());
    }

    #[test]
    fn disorder_support_and_mean() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let draws = sample_disorder(10_000, 5.0, &mut rng).unwrap();
        assert!(draws.iter().all(|h| (-5.0..=5.0).contains(h)));
        let mean = draws.iter().sum::<f64>() / draws.len() as f64;
        // three standard errors of a uniform[-W, W] mean
        let bound = 3.0 * (5.0 / 3f64.sqrt()) / 100.0;
        assert!(mean.abs() < bound, "mean {mean} outside {bound}");
    }

    #[test]
    fn disorder_kolmogorov_distance() {
        let w = 5.0;
        let mut rng = ChaCha8Rng::seed_from_u64(2024);
        let mut draws = sample_disorder(100_000, w, &mut rng).unwrap();
        draws.sort_by(f64::total_cmp);
        let n = draws.len() as f64;
        let mut d = 0.0_f64;
        for (i, x) in draws.iter().enumerate() {
            let cdf = (x + w) / (2.0 * w);
            d = d.max((cdf - i as f64 / n).abs()).max(((i + 1) as f64 / n - cdf).abs());
        }
        assert!(d < 0.01, "KS distance {d}");
    }

    #[test]
    fn jordan_wigner_mapping() {
        let p = jordan_wigner_params(0.5, 0.2, &[0.0; 4]).unwrap();
        assert_eq!((p.j_perp, p.j_z), (1.0, 0.2));
        assert_eq!(p.fields, vec![0.0; 4]);
        let p = jordan_wigner_params(0.0, 0.3, &[0.0; 4]).unwrap();
        assert_eq!(p.j_perp, 0.0);
        let p = jordan_wigner_params(1.0, 0.0, &[0.1, -0.2]).unwrap();
        assert_eq!((p.j_perp, p.j_z), (2.0, 0.0));
        assert_eq!(p.fields, vec![0.1, -0.2]);
    }
}
