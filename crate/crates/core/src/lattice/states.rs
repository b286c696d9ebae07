use std::sync::Arc;

use crate::linalg;
use crate::{Error, Result, C64};

use super::SectorBasis;

/// Pure state on a fixed-magnetization sector.
#[derive(Debug, Clone, PartialEq)]
pub struct SectorState {
    basis: Arc<SectorBasis>,
    amps: Vec<C64>,
}

impl SectorState {
    pub fn new(basis: Arc<SectorBasis>, amps: Vec<C64>) -> Result<Self> {
        if amps.len() != basis.dim() {
            return Err(Error::DimensionMismatch {
                expected: basis.dim(),
                found: amps.len(),
            });
        }
        Ok(SectorState { basis, amps })
    }

    /// Single configuration with amplitude 1.
    pub fn basis_state(basis: Arc<SectorBasis>, config: u32) -> Result<Self> {
        let idx = basis.index(config).ok_or_else(|| {
            Error::InvalidParameter(format!("configuration {config:#b} is outside the sector"))
        })?;
        let mut amps = vec![C64::new(0.0, 0.0); basis.dim()];
        amps[idx] = C64::new(1.0, 0.0);
        Ok(SectorState { basis, amps })
    }

    pub fn basis(&self) -> &Arc<SectorBasis> {
        &self.basis
    }

    pub fn amps(&self) -> &[C64] {
        &self.amps
    }

    pub fn amps_mut(&mut self) -> &mut [C64] {
        &mut self.amps
    }

    pub fn into_amps(self) -> Vec<C64> {
        self.amps
    }

    pub fn n_sites(&self) -> usize {
        self.basis.n_sites()
    }

    pub fn norm(&self) -> f64 {
        linalg::norm(&self.amps)
    }

    /// Amplitude of a configuration (zero outside the sector).
    #[inline]
    pub fn amp_of(&self, config: u32) -> C64 {
        self.basis
            .index(config)
            .map_or(C64::new(0.0, 0.0), |i| self.amps[i])
    }

    /// Embedding into the full `2^N` space.
    pub fn to_full(&self) -> FullState {
        let mut amps = vec![C64::new(0.0, 0.0); 1 << self.n_sites()];
        for (&c, &a) in self.basis.configs().iter().zip(&self.amps) {
            amps[c as usize] = a;
        }
        FullState {
            n_sites: self.n_sites(),
            amps,
        }
    }

    /// `||self - other||`.
    pub fn distance(&self, other: &SectorState) -> f64 {
        self.amps
            .iter()
            .zip(&other.amps)
            .map(|(a, b)| (a - b).norm_sqr())
            .sum::<f64>()
            .sqrt()
    }
}

/// Pure state on the full `2^N` space, indexed by configuration bitmask.
#[derive(Debug, Clone, PartialEq)]
pub struct FullState {
    pub n_sites: usize,
    pub amps: Vec<C64>,
}

impl FullState {
    pub fn norm(&self) -> f64 {
        linalg::norm(&self.amps)
    }
}

/// Néel state ↑↓↑↓… (odd sites up).
pub fn neel_state(basis: &Arc<SectorBasis>) -> Result<SectorState> {
    let n = basis.n_sites();
    let mask = (0x5555_5555u32) & ((1u32 << n) - 1);
    SectorState::basis_state(Arc::clone(basis), mask)
}

/// `|↑, Ψ⁻, …, Ψ⁻, ↓⟩` with singlets on the pairs (2,3), (4,5), …, (N-2, N-1)
/// and `Ψ⁻ = (|↑↓⟩ - |↓↑⟩)/√2`, left site first.
pub fn bell_chain_state(basis: &Arc<SectorBasis>) -> Result<SectorState> {
    let n = basis.n_sites();
    if n < 4 || n % 2 != 0 || basis.n_up() != n / 2 {
        return Err(Error::InvalidParameter(format!(
            "singlet chain needs an even N >= 4 in the zero sector, got N = {n}"
        )));
    }
    let pairs = (n - 2) / 2;
    let weight = (0.5f64).powf(pairs as f64 / 2.0);
    let mut amps = vec![C64::new(0.0, 0.0); basis.dim()];
    for choice in 0u32..(1 << pairs) {
        // site 1 up, site N down
        let mut config = 1u32;
        let mut sign = 1.0;
        for p in 0..pairs {
            let left_bit = 1 + 2 * p;
            if choice >> p & 1 == 0 {
                config |= 1 << left_bit;
            } else {
                config |= 1 << (left_bit + 1);
                sign = -sign;
            }
        }
        let idx = basis.index(config).expect("singlet chain stays in the zero sector");
        amps[idx] = C64::new(sign * weight, 0.0);
    }
    SectorState::new(Arc::clone(basis), amps)
}
