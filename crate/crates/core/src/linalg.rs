//! Small dense complex linear-algebra helpers shared by the ergotropy and
//! optimizer modules.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use rand_distr::StandardNormal;

use crate::C64;

pub type CMatrix = DMatrix<C64>;

/// Eigenpairs of a Hermitian matrix, eigenvalues ascending.
///
/// Ties keep the order produced by the underlying solver; callers that need a
/// specific tie-break sort the returned permutation themselves.
pub fn hermitian_eigh(m: &CMatrix) -> (Vec<f64>, CMatrix) {
    let eig = SymmetricEigen::new(m.clone());
    let mut order: Vec<usize> = (0..eig.eigenvalues.len()).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let values = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let vectors = CMatrix::from_fn(m.nrows(), m.ncols(), |r, c| eig.eigenvectors[(r, order[c])]);
    (values, vectors)
}

/// `exp(-i * a)` for Hermitian `a`, via its eigendecomposition.
pub fn expm_minus_i(a: &CMatrix) -> CMatrix {
    let (values, vectors) = hermitian_eigh(a);
    let phases = DVector::from_iterator(
        values.len(),
        values.iter().map(|&l| C64::from_polar(1.0, -l)),
    );
    let scaled = CMatrix::from_fn(vectors.nrows(), vectors.ncols(), |r, c| {
        vectors[(r, c)] * phases[c]
    });
    &scaled * vectors.adjoint()
}

/// Largest element of `|m - m^dagger|`.
pub fn hermiticity_defect(m: &CMatrix) -> f64 {
    let mut worst = 0.0_f64;
    for r in 0..m.nrows() {
        for c in 0..m.ncols() {
            worst = worst.max((m[(r, c)] - m[(c, r)].conj()).norm());
        }
    }
    worst
}

/// Largest element of `|u^dagger u - 1|`.
pub fn unitarity_defect(u: &CMatrix) -> f64 {
    let prod = u.adjoint() * u;
    let mut worst = 0.0_f64;
    for r in 0..prod.nrows() {
        for c in 0..prod.ncols() {
            let target = if r == c { C64::new(1.0, 0.0) } else { C64::new(0.0, 0.0) };
            worst = worst.max((prod[(r, c)] - target).norm());
        }
    }
    worst
}

/// `Tr(a * b)` without forming the product.
pub fn trace_product(a: &CMatrix, b: &CMatrix) -> C64 {
    let mut acc = C64::new(0.0, 0.0);
    for r in 0..a.nrows() {
        for k in 0..a.ncols() {
            acc += a[(r, k)] * b[(k, r)];
        }
    }
    acc
}

/// Euclidean norm of a complex slice.
pub fn norm(v: &[C64]) -> f64 {
    v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

/// `<a|b>`.
pub fn inner(a: &[C64], b: &[C64]) -> C64 {
    a.iter().zip(b).map(|(x, y)| x.conj() * y).sum()
}

/// Random unitary drawn from the Haar measure (QR of a Ginibre matrix with
/// the phase of R's diagonal fixed).
pub fn haar_unitary<R: rand::Rng + ?Sized>(dim: usize, rng: &mut R) -> CMatrix {
    let mut normal = || -> f64 { rng.sample(StandardNormal) };
    let g = CMatrix::from_fn(dim, dim, |_, _| C64::new(normal(), normal()));
    let qr = g.qr();
    let (q, r) = (qr.q(), qr.r());
    let mut u = q;
    for c in 0..dim {
        let d = r[(c, c)];
        let phase = if d.norm() > 0.0 { d / d.norm() } else { C64::new(1.0, 0.0) };
        for row in 0..dim {
            u[(row, c)] *= phase;
        }
    }
    u
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;

    #[test]
    fn eigh_sorts_ascending() {
        let m = CMatrix::from_diagonal(&DVector::from_vec(vec![
            C64::new(3.0, 0.0),
            C64::new(1.0, 0.0),
            C64::new(2.0, 0.0),
        ]));
        let (vals, vecs) = hermitian_eigh(&m);
        assert_eq!(vals, vec![1.0, 2.0, 3.0]);
        assert!((vecs[(1, 0)].norm() - 1.0).abs() < 1e-14);
    }

    #[test]
    fn haar_is_unitary() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
        for _ in 0..20 {
            let u = haar_unitary(4, &mut rng);
            assert!(unitarity_defect(&u) < 1e-12);
        }
    }

    #[test]
    fn expm_of_zero_is_identity() {
        let u = expm_minus_i(&CMatrix::zeros(4, 4));
        assert!((u - CMatrix::identity(4, 4)).norm() < 1e-15);
    }
}
