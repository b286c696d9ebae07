use crate::{Error, Result};

use super::MAX_BASIS_SITES;

const ABSENT: u32 = u32::MAX;

/// Fixed-magnetization configuration basis.
///
/// Configurations are stored in increasing bitmask order; `index` is the
/// inverse map, backed by a dense table over all `2^N` bitmasks.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SectorBasis {
    n_sites: usize,
    n_up: usize,
    configs: Vec<u32>,
    lookup: Vec<u32>,
}

impl SectorBasis {
    /// The `S^z_tot = 0` sector of an even chain.
    pub fn zero_magnetization(n_sites: usize) -> Result<Self> {
        if n_sites < 2 || n_sites % 2 != 0 || n_sites > MAX_BASIS_SITES {
            return Err(Error::InvalidSiteCount {
                n_sites,
                max: MAX_BASIS_SITES,
            });
        }
        Self::with_up_count(n_sites, n_sites / 2)
    }

    /// All configurations of `n_sites` spins with exactly `n_up` up spins.
    pub fn with_up_count(n_sites: usize, n_up: usize) -> Result<Self> {
        if n_sites == 0 || n_sites > MAX_BASIS_SITES {
            return Err(Error::InvalidSiteCount {
                n_sites,
                max: MAX_BASIS_SITES,
            });
        }
        if n_up > n_sites {
            return Err(Error::InvalidParameter(format!(
                "{n_up} up spins on {n_sites} sites"
            )));
        }
        let full = 1u64 << n_sites;
        let mut configs = Vec::new();
        if n_up == 0 {
            configs.push(0);
        } else {
            // Gosper's hack walks the k-subsets in increasing order.
            let mut c: u64 = (1 << n_up) - 1;
            while c < full {
                configs.push(c as u32);
                let low = c & c.wrapping_neg();
                let ripple = c + low;
                c = (((ripple ^ c) >> 2) / low) | ripple;
            }
        }
        let mut lookup = vec![ABSENT; full as usize];
        for (i, &c) in configs.iter().enumerate() {
            lookup[c as usize] = i as u32;
        }
        Ok(SectorBasis {
            n_sites,
            n_up,
            configs,
            lookup,
        })
    }

    pub fn n_sites(&self) -> usize {
        self.n_sites
    }

    pub fn n_up(&self) -> usize {
        self.n_up
    }

    pub fn dim(&self) -> usize {
        self.configs.len()
    }

    pub fn configs(&self) -> &[u32] {
        &self.configs
    }

    pub fn config(&self, i: usize) -> u32 {
        self.configs[i]
    }

    /// Dense index of a configuration, if it belongs to the sector.
    #[inline]
    pub fn index(&self, config: u32) -> Option<usize> {
        match self.lookup.get(config as usize) {
            Some(&i) if i != ABSENT => Some(i as usize),
            _ => None,
        }
    }
}

/// Builds the zero-magnetization basis of an `n_sites` chain.
pub fn build_basis(n_sites: usize) -> Result<SectorBasis> {
    SectorBasis::zero_magnetization(n_sites)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn binomial(n: u64, k: u64) -> u64 {
        (1..=k).fold(1, |acc, i| acc * (n + 1 - i) / i)
    }

    #[test]
    fn two_sites() {
        let b = build_basis(2).unwrap();
        assert_eq!(b.dim(), 2);
        assert_eq!(b.configs(), &[0b01, 0b10]);
    }

    #[test]
    fn dimensions_match_binomial() {
        assert_eq!(build_basis(8).unwrap().dim(), 70);
        assert_eq!(build_basis(12).unwrap().dim(), 924);
        for n in (2..=14).step_by(2) {
            assert_eq!(build_basis(n).unwrap().dim() as u64, binomial(n as u64, n as u64 / 2));
        }
        for k in 0..=6 {
            assert_eq!(SectorBasis::with_up_count(6, k).unwrap().dim() as u64, binomial(6, k as u64));
        }
    }

    #[test]
    fn ordering_and_bijection() {
        let b = build_basis(10).unwrap();
        assert!(b.configs().windows(2).all(|w| w[0] < w[1]));
        for (i, &c) in b.configs().iter().enumerate() {
            assert_eq!(c.count_ones(), 5);
            assert_eq!(b.index(c), Some(i));
        }
        assert_eq!(b.index(0b11111_11111), None);
    }

    #[test]
    fn rejects_bad_sizes() {
        assert!(build_basis(3).is_err());
        assert!(build_basis(0).is_err());
        assert!(build_basis(22).is_err());
    }
}
