//! `U_AL`, the Pauli-generator parameterization `U_1 = exp(-iA)` and the
//! search box for its coefficients.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::linalg::{self, CMatrix};
use crate::{Error, Result, C64};

/// Tolerance on `U^dagger U - 1` for constructed unitaries.
pub const UNITARITY_TOL: f64 = 1e-10;

/// Half-width of the per-coordinate search box.
pub const BOX_HALF_WIDTH: f64 = PI;

/// Single-spin Pauli matrix in the bit basis (index 0 = down, 1 = up):
/// 0 = identity, 1 = x, 2 = y, 3 = z.
pub fn pauli(k: usize) -> [[C64; 2]; 2] {
    let o = C64::new(0.0, 0.0);
    let one = C64::new(1.0, 0.0);
    let i = C64::new(0.0, 1.0);
    match k {
        0 => [[one, o], [o, one]],
        1 => [[o, one], [one, o]],
        2 => [[o, i], [-i, o]],
        3 => [[-one, o], [o, one]],
        _ => panic!("Pauli index {k} out of range"),
    }
}

/// Pauli-string labels in parameter order for a block of `n_spins` spins
/// (lexicographic, identity string skipped). The first label acts on the
/// block's first site.
pub fn generator_labels(n_spins: usize) -> Vec<Vec<usize>> {
    match n_spins {
        1 => (1..4).map(|i| vec![i]).collect(),
        2 => (0..4)
            .flat_map(|i| (0..4).map(move |j| vec![i, j]))
            .filter(|l| l != &[0, 0])
            .collect(),
        _ => panic!("unsupported block of {n_spins} spins"),
    }
}

/// Number of coefficients for a block of dimension `dim`.
pub fn parameter_count(dim: usize) -> Result<usize> {
    match dim {
        2 => Ok(3),
        4 => Ok(15),
        _ => Err(Error::UnsupportedBlock(dim)),
    }
}

/// Tensor product of single-spin Paulis, bit `k` of the index belonging to
/// `labels[k]`.
pub fn pauli_string(labels: &[usize]) -> CMatrix {
    let dim = 1 << labels.len();
    CMatrix::from_fn(dim, dim, |r, c| {
        labels
            .iter()
            .enumerate()
            .map(|(k, &p)| pauli(p)[(r >> k) & 1][(c >> k) & 1])
            .product()
    })
}

/// Coefficients `a_ij` of the generator `A = sum a_ij sigma^i (x) sigma^j`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LocalUnitaryParams {
    pub coefficients: Vec<f64>,
}

impl LocalUnitaryParams {
    pub fn zeros(n: usize) -> Self {
        Self {
            coefficients: vec![0.0; n],
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !matches!(self.coefficients.len(), 3 | 15) {
            return Err(Error::InvalidParameter(format!(
                "expected 3 or 15 coefficients, got {}",
                self.coefficients.len()
            )));
        }
        if let Some(x) = self
            .coefficients
            .iter()
            .find(|x| !x.is_finite() || x.abs() > BOX_HALF_WIDTH)
        {
            return Err(Error::InvalidParameter(format!(
                "coefficient {x} outside [-pi, pi]"
            )));
        }
        Ok(())
    }

    pub fn unitary(&self) -> Result<CMatrix> {
        self.validate()?;
        Ok(build_u1(&self.coefficients))
    }
}

/// Hermitian generator `A` for 3 (one spin) or 15 (two spins) coefficients.
pub fn generator(a: &[f64]) -> CMatrix {
    let n_spins = match a.len() {
        3 => 1,
        15 => 2,
        n => panic!("expected 3 or 15 coefficients, got {n}"),
    };
    let dim = 1 << n_spins;
    let mut g = CMatrix::zeros(dim, dim);
    for (coef, labels) in a.iter().zip(generator_labels(n_spins)) {
        if *coef != 0.0 {
            g += pauli_string(&labels) * C64::new(*coef, 0.0);
        }
    }
    g
}

/// `U_1 = exp(-iA)`.
pub fn build_u1(a: &[f64]) -> CMatrix {
    if a.iter().all(|&x| x == 0.0) {
        let dim = if a.len() == 3 { 2 } else { 4 };
        return CMatrix::identity(dim, dim);
    }
    linalg::expm_minus_i(&generator(a))
}

/// `U_AL = sum_k |e_k><r_k|`, sending the k-th largest eigenvector of `rho`
/// to the k-th lowest eigenvector of `h`. Ties keep solver order (stable
/// sort), which changes the unitary but not the extracted work.
pub fn build_u_al(rho: &CMatrix, h: &CMatrix) -> Result<CMatrix> {
    if rho.shape() != h.shape() || !rho.is_square() {
        return Err(Error::DimensionMismatch {
            expected: h.nrows(),
            found: rho.nrows(),
        });
    }
    let (r, r_vecs) = linalg::hermitian_eigh(rho);
    let (_, e_vecs) = linalg::hermitian_eigh(h);
    let mut order: Vec<usize> = (0..r.len()).collect();
    order.sort_by(|&a, &b| r[b].total_cmp(&r[a]));
    let dim = r.len();
    let mut u = CMatrix::zeros(dim, dim);
    for (k, &src) in order.iter().enumerate() {
        u += e_vecs.column(k) * r_vecs.column(src).adjoint();
    }
    let defect = linalg::unitarity_defect(&u);
    if defect > UNITARITY_TOL {
        return Err(Error::NotUnitary(defect));
    }
    Ok(u)
}
