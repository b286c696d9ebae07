use nalgebra::DMatrix;

use crate::linalg::CMatrix;
use crate::{Error, Result, C64};

use super::{Block, ModelParams, SectorBasis};

/// Sector dimension above which operators are stored sparse.
pub const SPARSE_THRESHOLD: usize = 5000;

/// One term of the XXZ Hamiltonian.
#[derive(Debug, Clone, Copy, PartialEq)]
pub(crate) enum Term {
    /// Bond between `left` and `left + 1`: `flip * (S+S- + S-S+) + zz * SzSz`.
    Bond { left: usize, flip: f64, zz: f64 },
    /// `h * Sz` on one site.
    Field { site: usize, h: f64 },
}

impl Term {
    /// Diagonal contribution and the optional off-diagonal image of `config`,
    /// where site `s` sits on bit `s - offset`.
    #[inline]
    fn act(&self, config: u32, offset: usize) -> (f64, Option<(u32, f64)>) {
        let spin = |site: usize| if config >> (site - offset) & 1 == 1 { 0.5 } else { -0.5 };
        match *self {
            Term::Bond { left, flip, zz } => {
                let (a, b) = (spin(left), spin(left + 1));
                let off = if a != b && flip != 0.0 {
                    Some((config ^ (0b11 << (left - offset)), flip))
                } else {
                    None
                };
                (zz * a * b, off)
            }
            Term::Field { site, h } => (h * spin(site), None),
        }
    }

    fn sites(&self) -> (usize, usize) {
        match *self {
            Term::Bond { left, .. } => (left, left + 1),
            Term::Field { site, .. } => (site, site),
        }
    }
}

pub(crate) fn model_terms(params: &ModelParams) -> Vec<Term> {
    let mut terms: Vec<Term> = (1..params.n_sites)
        .map(|left| Term::Bond {
            left,
            flip: 0.5 * params.j_perp,
            zz: params.j_z,
        })
        .collect();
    terms.extend(
        params
            .fields
            .iter()
            .enumerate()
            .map(|(i, &h)| Term::Field { site: i + 1, h }),
    );
    terms
}

/// Compressed sparse row storage for a real symmetric matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct CsrMatrix {
    dim: usize,
    row_ptr: Vec<usize>,
    cols: Vec<usize>,
    vals: Vec<f64>,
}

impl CsrMatrix {
    fn from_rows(rows: Vec<Vec<(usize, f64)>>) -> Self {
        let dim = rows.len();
        let mut row_ptr = Vec::with_capacity(dim + 1);
        let mut cols = Vec::new();
        let mut vals = Vec::new();
        row_ptr.push(0);
        for row in rows {
            for (c, v) in row {
                cols.push(c);
                vals.push(v);
            }
            row_ptr.push(cols.len());
        }
        CsrMatrix {
            dim,
            row_ptr,
            cols,
            vals,
        }
    }

    pub fn nnz(&self) -> usize {
        self.vals.len()
    }

    fn row(&self, r: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let span = self.row_ptr[r]..self.row_ptr[r + 1];
        self.cols[span.clone()].iter().copied().zip(self.vals[span].iter().copied())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Storage {
    Dense(DMatrix<f64>),
    Sparse(CsrMatrix),
}

/// Real symmetric operator on a sector basis.
#[derive(Debug, Clone, PartialEq)]
pub struct HermitianOperator {
    dim: usize,
    storage: Storage,
}

impl HermitianOperator {
    /// Builds from row lists (duplicates within a row are summed), choosing
    /// dense storage up to [`SPARSE_THRESHOLD`].
    fn from_rows(mut rows: Vec<Vec<(usize, f64)>>, force_sparse: Option<bool>) -> Self {
        let dim = rows.len();
        for row in rows.iter_mut() {
            row.sort_by_key(|&(c, _)| c);
            row.dedup_by(|next, kept| {
                if next.0 == kept.0 {
                    kept.1 += next.1;
                    true
                } else {
                    false
                }
            });
            row.retain(|&(_, v)| v != 0.0);
        }
        let sparse = force_sparse.unwrap_or(dim > SPARSE_THRESHOLD);
        let storage = if sparse {
            Storage::Sparse(CsrMatrix::from_rows(rows))
        } else {
            let mut m = DMatrix::zeros(dim, dim);
            for (r, row) in rows.into_iter().enumerate() {
                for (c, v) in row {
                    m[(r, c)] = v;
                }
            }
            Storage::Dense(m)
        };
        HermitianOperator { dim, storage }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn storage(&self) -> &Storage {
        &self.storage
    }

    pub fn is_sparse(&self) -> bool {
        matches!(self.storage, Storage::Sparse(_))
    }

    /// Same operator with the other storage layout.
    pub fn with_sparse_storage(&self, sparse: bool) -> Self {
        let rows = (0..self.dim).map(|r| self.row_entries(r)).collect();
        Self::from_rows(rows, Some(sparse))
    }

    fn row_entries(&self, r: usize) -> Vec<(usize, f64)> {
        match &self.storage {
            Storage::Dense(m) => (0..self.dim)
                .filter(|&c| m[(r, c)] != 0.0)
                .map(|c| (c, m[(r, c)]))
                .collect(),
            Storage::Sparse(s) => s.row(r).collect(),
        }
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        match &self.storage {
            Storage::Dense(m) => m.clone(),
            Storage::Sparse(s) => {
                let mut m = DMatrix::zeros(self.dim, self.dim);
                for r in 0..self.dim {
                    for (c, v) in s.row(r) {
                        m[(r, c)] = v;
                    }
                }
                m
            }
        }
    }

    /// `y = M x`.
    pub fn apply(&self, x: &[C64], y: &mut [C64]) {
        assert_eq!(x.len(), self.dim);
        assert_eq!(y.len(), self.dim);
        match &self.storage {
            Storage::Dense(m) => {
                y.iter_mut().for_each(|v| *v = C64::new(0.0, 0.0));
                // column-major: accumulate column by column
                for c in 0..self.dim {
                    let xc = x[c];
                    if xc == C64::new(0.0, 0.0) {
                        continue;
                    }
                    for (r, yr) in y.iter_mut().enumerate() {
                        *yr += xc * m[(r, c)];
                    }
                }
            }
            Storage::Sparse(s) => {
                for (r, yr) in y.iter_mut().enumerate() {
                    *yr = s.row(r).map(|(c, v)| x[c] * v).sum();
                }
            }
        }
    }

    pub fn apply_vec(&self, x: &[C64]) -> Vec<C64> {
        let mut y = vec![C64::new(0.0, 0.0); self.dim];
        self.apply(x, &mut y);
        y
    }

    /// Largest `|M_rc - M_cr|`.
    pub fn hermiticity_defect(&self) -> f64 {
        let m = self.to_dense();
        (&m - m.transpose()).amax()
    }

    /// Largest absolute entry.
    pub fn max_abs(&self) -> f64 {
        match &self.storage {
            Storage::Dense(m) => m.amax(),
            Storage::Sparse(s) => s.vals.iter().fold(0.0, |a, v| a.max(v.abs())),
        }
    }
}

fn build_from_terms(basis: &SectorBasis, terms: &[Term]) -> HermitianOperator {
    let rows = basis
        .configs()
        .iter()
        .map(|&config| {
            let mut row = Vec::with_capacity(terms.len() + 1);
            let mut diag = 0.0;
            for term in terms {
                let (d, off) = term.act(config, 1);
                diag += d;
                if let Some((image, amp)) = off {
                    let col = basis
                        .index(image)
                        .expect("XXZ terms conserve magnetization");
                    row.push((col, amp));
                }
            }
            row.push((basis.index(config).unwrap(), diag));
            row
        })
        .collect();
    HermitianOperator::from_rows(rows, None)
}

fn check_basis(params: &ModelParams, basis: &SectorBasis) -> Result<()> {
    params.validate()?;
    if basis.n_sites() != params.n_sites {
        return Err(Error::DimensionMismatch {
            expected: params.n_sites,
            found: basis.n_sites(),
        });
    }
    Ok(())
}

/// Hamiltonian restricted to `basis`.
pub fn build_hamiltonian(params: &ModelParams, basis: &SectorBasis) -> Result<HermitianOperator> {
    check_basis(params, basis)?;
    Ok(build_from_terms(basis, &model_terms(params)))
}

/// Bond crossing the S|E boundary.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundaryCoupling {
    /// Site inside the block.
    pub inner: usize,
    /// Neighbouring environment site.
    pub outer: usize,
    pub j_perp: f64,
    pub j_z: f64,
}

/// The split `H = H_S + H_E + V_SE` on the sector, plus `H_S` on the block's
/// own `2^len`-dimensional space.
#[derive(Debug, Clone)]
pub struct BlockOperators {
    pub block: Block,
    pub h_s: HermitianOperator,
    pub h_e: HermitianOperator,
    pub v_se: HermitianOperator,
    /// `H_S` in the local basis (bit `k` = site `block.start + k`).
    pub h_s_local: CMatrix,
    pub couplings: Vec<BoundaryCoupling>,
}

/// Splits the Hamiltonian by the block: terms wholly inside go to `H_S`,
/// wholly outside to `H_E`, and boundary bonds to `V_SE`.
pub fn build_block_operators(params: &ModelParams, basis: &SectorBasis) -> Result<BlockOperators> {
    check_basis(params, basis)?;
    let block = params.block;
    let (mut inside, mut outside, mut boundary) = (Vec::new(), Vec::new(), Vec::new());
    let mut couplings = Vec::new();
    for term in model_terms(params) {
        let (a, b) = term.sites();
        match (block.contains(a), block.contains(b)) {
            (true, true) => inside.push(term),
            (false, false) => outside.push(term),
            _ => {
                boundary.push(term);
                let (inner, outer) = if block.contains(a) { (a, b) } else { (b, a) };
                couplings.push(BoundaryCoupling {
                    inner,
                    outer,
                    j_perp: params.j_perp,
                    j_z: params.j_z,
                });
            }
        }
    }

    let d = block.dim();
    let mut h_s_local = CMatrix::zeros(d, d);
    for local in 0..d {
        for term in &inside {
            let (diag, off) = term.act(local as u32, block.start);
            h_s_local[(local, local)] += C64::new(diag, 0.0);
            if let Some((image, amp)) = off {
                h_s_local[(image as usize, local)] += C64::new(amp, 0.0);
            }
        }
    }

    Ok(BlockOperators {
        block,
        h_s: build_from_terms(basis, &inside),
        h_e: build_from_terms(basis, &outside),
        v_se: build_from_terms(basis, &boundary),
        h_s_local,
        couplings,
    })
}

/// `y = H x` on the full `2^N` space, computed on the fly.
pub fn apply_full_hamiltonian(params: &ModelParams, x: &[C64], y: &mut [C64]) {
    apply_full_terms(params.n_sites, &model_terms(params), x, y);
}

/// `y = H_E x` on the full `2^N` space: only terms with no site in the block.
pub fn apply_full_environment_hamiltonian(params: &ModelParams, x: &[C64], y: &mut [C64]) {
    let block = params.block;
    let terms: Vec<Term> = model_terms(params)
        .into_iter()
        .filter(|t| {
            let (a, b) = t.sites();
            !block.contains(a) && !block.contains(b)
        })
        .collect();
    apply_full_terms(params.n_sites, &terms, x, y);
}

fn apply_full_terms(n_sites: usize, terms: &[Term], x: &[C64], y: &mut [C64]) {
    let dim = 1usize << n_sites;
    assert_eq!(x.len(), dim);
    assert_eq!(y.len(), dim);
    y.iter_mut().for_each(|v| *v = C64::new(0.0, 0.0));
    for (config, &amp) in x.iter().enumerate() {
        if amp == C64::new(0.0, 0.0) {
            continue;
        }
        let mut diag = 0.0;
        for term in terms {
            let (d, off) = term.act(config as u32, 1);
            diag += d;
            if let Some((image, coeff)) = off {
                y[image as usize] += amp * coeff;
            }
        }
        y[config] += amp * diag;
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lattice::build_basis;

    fn dense(op: &HermitianOperator) -> DMatrix<f64> {
        op.to_dense()
    }

    #[test]
    fn two_site_flip_flop() {
        let p = ModelParams::clean(2, 1.0, 0.0).unwrap();
        let h = build_hamiltonian(&p, &build_basis(2).unwrap()).unwrap();
        let expected = DMatrix::from_row_slice(2, 2, &[0.0, 0.5, 0.5, 0.0]);
        assert_eq!(dense(&h), expected);
    }

    #[test]
    fn two_site_ising() {
        let p = ModelParams::clean(2, 0.0, 1.0).unwrap();
        let h = build_hamiltonian(&p, &build_basis(2).unwrap()).unwrap();
        assert_eq!(dense(&h), DMatrix::from_row_slice(2, 2, &[-0.25, 0.0, 0.0, -0.25]));
    }

    #[test]
    fn zero_couplings_give_zero_matrix() {
        let p = ModelParams::clean(8, 0.0, 0.0).unwrap();
        let h = build_hamiltonian(&p, &build_basis(8).unwrap()).unwrap();
        assert_eq!(h.max_abs(), 0.0);
    }

    #[test]
    fn basis_mismatch_rejected() {
        let p = ModelParams::clean(6, 1.0, 0.2).unwrap();
        assert!(matches!(
            build_hamiltonian(&p, &build_basis(8).unwrap()),
            Err(Error::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn block_split_sums_to_hamiltonian() {
        let fields = vec![0.3, -1.2, 2.5, 0.7, -0.4, 1.9, -2.2, 0.1];
        for block in [Block::new(1, 2), Block::new(4, 5), Block::new(3, 3), Block::new(7, 8)] {
            let p = ModelParams::new(1.0, 0.2, fields.clone(), block).unwrap();
            let basis = build_basis(8).unwrap();
            let h = dense(&build_hamiltonian(&p, &basis).unwrap());
            let ops = build_block_operators(&p, &basis).unwrap();
            let sum = dense(&ops.h_s) + dense(&ops.h_e) + dense(&ops.v_se);
            assert!((h - sum).amax() <= 1e-12);
        }
    }

    #[test]
    fn edge_block_boundary_is_bond_two_three() {
        let p = ModelParams::clean(4, 1.0, 0.2).unwrap();
        let ops = build_block_operators(&p, &build_basis(4).unwrap()).unwrap();
        assert_eq!(ops.couplings.len(), 1);
        assert_eq!((ops.couplings[0].inner, ops.couplings[0].outer), (2, 3));
        let interior = ModelParams::new(1.0, 0.2, vec![0.0; 6], Block::new(3, 4)).unwrap();
        let ops = build_block_operators(&interior, &build_basis(6).unwrap()).unwrap();
        let pairs: Vec<_> = ops.couplings.iter().map(|c| (c.inner, c.outer)).collect();
        assert_eq!(pairs, vec![(3, 2), (4, 5)]);
    }

    #[test]
    fn whole_chain_block_has_no_environment() {
        let p = ModelParams::new(1.0, 0.2, vec![0.4, -0.9], Block::new(1, 2)).unwrap();
        let ops = build_block_operators(&p, &build_basis(2).unwrap()).unwrap();
        assert_eq!(ops.v_se.max_abs(), 0.0);
        assert_eq!(ops.h_e.max_abs(), 0.0);
        assert!(ops.couplings.is_empty());
    }

    #[test]
    fn local_block_hamiltonian_matches_two_site_model() {
        // H_S on sites 1-2 equals the N = 2 chain Hamiltonian on the full 4-dim space
        let p = ModelParams::new(1.0, 0.2, vec![0.7, -0.3, 1.1, 0.0], Block::edge_pair()).unwrap();
        let ops = build_block_operators(&p, &build_basis(4).unwrap()).unwrap();
        let two = ModelParams::new(1.0, 0.2, vec![0.7, -0.3], Block::edge_pair()).unwrap();
        for col in 0..4 {
            let mut x = vec![C64::new(0.0, 0.0); 4];
            x[col] = C64::new(1.0, 0.0);
            let mut y = vec![C64::new(0.0, 0.0); 4];
            apply_full_hamiltonian(&two, &x, &mut y);
            for row in 0..4 {
                assert!((ops.h_s_local[(row, col)] - y[row]).norm() < 1e-15);
            }
        }
    }

    #[test]
    fn sparse_and_dense_agree() {
        let fields = vec![0.5, -0.25, 1.0, -1.5, 2.0, 0.0];
        let p = ModelParams::new(1.0, 0.3, fields, Block::edge_pair()).unwrap();
        let h = build_hamiltonian(&p, &build_basis(6).unwrap()).unwrap();
        assert!(!h.is_sparse());
        let s = h.with_sparse_storage(true);
        assert!(s.is_sparse());
        let x: Vec<C64> = (0..h.dim()).map(|i| C64::new(i as f64, 1.0 - i as f64)).collect();
        let (a, b) = (h.apply_vec(&x), s.apply_vec(&x));
        assert!(a.iter().zip(&b).all(|(u, v)| (u - v).norm() < 1e-12));
        assert_eq!(h.to_dense(), s.to_dense());
    }

    #[test]
    fn large_sectors_are_sparse() {
        let p = ModelParams::clean(16, 1.0, 0.2).unwrap();
        let h = build_hamiltonian(&p, &build_basis(16).unwrap()).unwrap();
        assert!(h.is_sparse());
        assert_eq!(h.dim(), 12870);
    }

    #[test]
    fn full_space_hamiltonian_conserves_magnetization() {
        for n in [2, 4, 6] {
            let fields: Vec<f64> = (0..n).map(|i| 0.37 * i as f64 - 0.8).collect();
            let p = ModelParams::new(1.0, 0.45, fields, Block::edge_pair()).unwrap();
            let dim = 1 << n;
            let mut h = DMatrix::<f64>::zeros(dim, dim);
            for col in 0..dim {
                let mut x = vec![C64::new(0.0, 0.0); dim];
                x[col] = C64::new(1.0, 0.0);
                let mut y = vec![C64::new(0.0, 0.0); dim];
                apply_full_hamiltonian(&p, &x, &mut y);
                for row in 0..dim {
                    assert_eq!(y[row].im, 0.0);
                    h[(row, col)] = y[row].re;
                }
            }
            let sz = DMatrix::from_fn(dim, dim, |r, c| {
                if r == c { (r as u32).count_ones() as f64 - n as f64 / 2.0 } else { 0.0 }
            });
            let commutator = &h * &sz - &sz * &h;
            assert!(commutator.amax() <= 1e-12);
            assert!((&h - h.transpose()).amax() <= 1e-12);
        }
    }

    #[test]
    fn real_symmetric() {
        let p = ModelParams::new(1.0, 0.2, vec![1.0, -2.0, 0.5, 3.0, -0.5, 0.0], Block::edge_pair()).unwrap();
        let h = build_hamiltonian(&p, &build_basis(6).unwrap()).unwrap();
        assert!(h.hermiticity_defect() <= 1e-12);
    }
}
