//! Exact time evolution and ground states.
//!
//! Sectors up to [`SPARSE_THRESHOLD`] are diagonalized once and propagated
//! spectrally to any time; larger sectors use a Lanczos exponential
//! integrator with adaptive sub-stepping.

use std::sync::Arc;

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::lattice::{HermitianOperator, SectorBasis, SectorState, SPARSE_THRESHOLD};
use crate::linalg;
use crate::{Error, Result, C64};

/// Dense path ceiling.
pub const MAX_DENSE_DIM: usize = 13_000;

const HERMITIAN_TOL: f64 = 1e-12;

/// Eigendecomposition `H = Q Λ Qᵀ` of a real symmetric sector operator.
#[derive(Debug, Clone)]
pub struct SpectralDecomposition {
    /// Ascending.
    pub eigenvalues: Vec<f64>,
    /// Orthonormal eigenvectors as columns.
    pub eigenvectors: DMatrix<f64>,
    /// Hash of the source operator's entries.
    pub fingerprint: u64,
}

impl SpectralDecomposition {
    pub fn dim(&self) -> usize {
        self.eigenvalues.len()
    }

    /// `max |H - QΛQᵀ|`.
    pub fn reconstruction_error(&self, op: &HermitianOperator) -> f64 {
        let q = &self.eigenvectors;
        let lambda = DMatrix::from_diagonal(&DVector::from_column_slice(&self.eigenvalues));
        (op.to_dense() - q * lambda * q.transpose()).amax()
    }

    /// `max |QᵀQ - 1|`.
    pub fn orthonormality_error(&self) -> f64 {
        let q = &self.eigenvectors;
        (q.transpose() * q - DMatrix::identity(self.dim(), self.dim())).amax()
    }
}

fn fingerprint(m: &DMatrix<f64>) -> u64 {
    // FNV-1a over the raw bits
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for v in m.iter() {
        for byte in v.to_bits().to_le_bytes() {
            h ^= byte as u64;
            h = h.wrapping_mul(0x0100_0000_01b3);
        }
    }
    h
}

/// Full eigendecomposition of a real symmetric operator.
pub fn diagonalize(op: &HermitianOperator) -> Result<SpectralDecomposition> {
    if op.dim() > MAX_DENSE_DIM {
        return Err(Error::TooLargeForDense(op.dim()));
    }
    let dense = op.to_dense();
    let defect = (&dense - dense.transpose()).amax();
    if defect > HERMITIAN_TOL {
        return Err(Error::NotHermitian(defect));
    }
    let fingerprint = fingerprint(&dense);
    let eig = SymmetricEigen::new(dense);
    let mut order: Vec<usize> = (0..eig.eigenvalues.len()).collect();
    // stable: ties keep solver order
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let n = order.len();
    let eigenvectors = DMatrix::from_fn(n, n, |r, c| eig.eigenvectors[(r, order[c])]);
    Ok(SpectralDecomposition {
        eigenvalues: order.iter().map(|&i| eig.eigenvalues[i]).collect(),
        eigenvectors,
        fingerprint,
    })
}

/// Precomputed eigenbasis coefficients of an initial state, for repeated
/// evaluation at arbitrary times.
#[derive(Debug, Clone)]
pub struct SpectralTrajectory {
    spec: Arc<SpectralDecomposition>,
    basis: Arc<SectorBasis>,
    coeff_re: DVector<f64>,
    coeff_im: DVector<f64>,
}

impl SpectralTrajectory {
    pub fn new(spec: Arc<SpectralDecomposition>, psi0: &SectorState) -> Result<Self> {
        if psi0.basis().dim() != spec.dim() {
            return Err(Error::DimensionMismatch {
                expected: spec.dim(),
                found: psi0.basis().dim(),
            });
        }
        let re = DVector::from_iterator(spec.dim(), psi0.amps().iter().map(|a| a.re));
        let im = DVector::from_iterator(spec.dim(), psi0.amps().iter().map(|a| a.im));
        let qt = spec.eigenvectors.transpose();
        Ok(SpectralTrajectory {
            coeff_re: &qt * re,
            coeff_im: &qt * im,
            basis: Arc::clone(psi0.basis()),
            spec,
        })
    }

    /// `ψ(t) = Q e^{-iΛt} Qᵀ ψ0`.
    pub fn at(&self, t: f64) -> SectorState {
        let n = self.spec.dim();
        let mut re = DVector::zeros(n);
        let mut im = DVector::zeros(n);
        for (k, &lambda) in self.spec.eigenvalues.iter().enumerate() {
            let (s, c) = (lambda * t).sin_cos();
            // (a + ib)(c - is)
            re[k] = self.coeff_re[k] * c + self.coeff_im[k] * s;
            im[k] = self.coeff_im[k] * c - self.coeff_re[k] * s;
        }
        let q = &self.spec.eigenvectors;
        let (out_re, out_im) = (q * re, q * im);
        let amps = out_re
            .iter()
            .zip(out_im.iter())
            .map(|(&a, &b)| C64::new(a, b))
            .collect();
        SectorState::new(Arc::clone(&self.basis), amps).expect("dimension checked at construction")
    }
}

/// Evolves `psi0` by time `t` with a precomputed decomposition.
pub fn evolve(spec: &Arc<SpectralDecomposition>, psi0: &SectorState, t: f64) -> Result<SectorState> {
    if !(t >= 0.0) {
        return Err(Error::InvalidParameter(format!("negative time {t}")));
    }
    if t == 0.0 {
        if psi0.basis().dim() != spec.dim() {
            return Err(Error::DimensionMismatch {
                expected: spec.dim(),
                found: psi0.basis().dim(),
            });
        }
        return Ok(psi0.clone());
    }
    Ok(SpectralTrajectory::new(Arc::clone(spec), psi0)?.at(t))
}

struct Lanczos {
    alphas: Vec<f64>,
    betas: Vec<f64>,
    vectors: Vec<Vec<C64>>,
    /// Norm of the residual after the last vector; zero on an invariant subspace.
    residual: f64,
}

fn lanczos(op: &HermitianOperator, start: &[C64], m: usize) -> Result<Lanczos> {
    let norm0 = linalg::norm(start);
    if !(norm0 > 0.0) || !norm0.is_finite() {
        return Err(Error::KrylovBreakdown(format!("start vector norm {norm0}")));
    }
    let dim = op.dim();
    let m = m.min(dim);
    let mut vectors: Vec<Vec<C64>> = vec![start.iter().map(|a| a / norm0).collect()];
    let mut alphas = Vec::with_capacity(m);
    let mut betas: Vec<f64> = Vec::with_capacity(m);
    let mut w = vec![C64::new(0.0, 0.0); dim];
    let mut residual = 0.0;
    for j in 0..m {
        op.apply(&vectors[j], &mut w);
        let alpha = linalg::inner(&vectors[j], &w).re;
        alphas.push(alpha);
        // full reorthogonalization, two passes
        for _ in 0..2 {
            for v in &vectors {
                let overlap = linalg::inner(v, &w);
                for (wi, vi) in w.iter_mut().zip(v) {
                    *wi -= overlap * vi;
                }
            }
        }
        let beta = linalg::norm(&w);
        if !beta.is_finite() {
            return Err(Error::KrylovBreakdown("non-finite Lanczos residual".into()));
        }
        residual = beta;
        if j + 1 == m || beta <= 1e-13 * (1.0 + alpha.abs()) {
            if beta <= 1e-13 * (1.0 + alpha.abs()) {
                residual = 0.0;
            }
            break;
        }
        betas.push(beta);
        vectors.push(w.iter().map(|x| x / beta).collect());
    }
    Ok(Lanczos {
        alphas,
        betas,
        vectors,
        residual,
    })
}

fn tridiagonal_eigen(alphas: &[f64], betas: &[f64]) -> SymmetricEigen<f64, nalgebra::Dyn> {
    let k = alphas.len();
    let mut t = DMatrix::zeros(k, k);
    for i in 0..k {
        t[(i, i)] = alphas[i];
        if i + 1 < k {
            t[(i, i + 1)] = betas[i];
            t[(i + 1, i)] = betas[i];
        }
    }
    SymmetricEigen::new(t)
}

const KRYLOV_TOL: f64 = 1e-12;

/// One Krylov step `e^{-iHτ}` on a prepared Lanczos basis; returns the
/// coefficient vector in that basis and an a-posteriori error estimate.
fn krylov_coefficients(lz: &Lanczos, eig: &SymmetricEigen<f64, nalgebra::Dyn>, tau: f64) -> (Vec<C64>, f64) {
    let k = lz.alphas.len();
    let mut coeffs = vec![C64::new(0.0, 0.0); k];
    for (i, &theta) in eig.eigenvalues.iter().enumerate() {
        let weight = eig.eigenvectors[(0, i)] * C64::from_polar(1.0, -theta * tau);
        for (r, c) in coeffs.iter_mut().enumerate() {
            *c += eig.eigenvectors[(r, i)] * weight;
        }
    }
    let err = lz.residual * coeffs[k - 1].norm();
    (coeffs, err)
}

/// Propagates `psi` by `dt` with an `m`-dimensional Krylov space, halving the
/// sub-step until the residual estimate is below 1e-12.
pub fn krylov_evolve(op: &HermitianOperator, psi: &SectorState, dt: f64, m: usize) -> Result<SectorState> {
    if m < 10 {
        return Err(Error::InvalidParameter(format!("Krylov dimension {m} < 10")));
    }
    if psi.basis().dim() != op.dim() {
        return Err(Error::DimensionMismatch {
            expected: op.dim(),
            found: psi.basis().dim(),
        });
    }
    if !(dt >= 0.0) {
        return Err(Error::InvalidParameter(format!("negative time step {dt}")));
    }
    if dt == 0.0 || op.max_abs() == 0.0 {
        return Ok(psi.clone());
    }
    let scale = psi.norm();
    let mut current: Vec<C64> = psi.amps().to_vec();
    let mut remaining = dt;
    let mut tau = dt;
    let min_tau = dt * 1e-9;
    while remaining > 0.0 {
        tau = tau.min(remaining);
        let lz = lanczos(op, &current, m)?;
        let eig = tridiagonal_eigen(&lz.alphas, &lz.betas);
        let coeffs = loop {
            let (coeffs, err) = krylov_coefficients(&lz, &eig, tau);
            if err <= KRYLOV_TOL || lz.residual == 0.0 {
                break coeffs;
            }
            tau *= 0.5;
            if tau < min_tau {
                return Err(Error::KrylovBreakdown(format!(
                    "sub-step fell below {min_tau:.3e}; reduce dt or raise m"
                )));
            }
        };
        let norm = linalg::norm(&current);
        let mut next = vec![C64::new(0.0, 0.0); op.dim()];
        for (c, v) in coeffs.iter().zip(&lz.vectors) {
            for (n, x) in next.iter_mut().zip(v) {
                *n += c * x * norm;
            }
        }
        current = next;
        remaining -= tau;
        if remaining < 1e-14 * dt {
            remaining = 0.0;
        }
        tau *= 1.5;
    }
    // pin the norm against accumulated round-off across sub-steps
    let drift = linalg::norm(&current) / scale;
    current.iter_mut().for_each(|a| *a /= drift);
    SectorState::new(Arc::clone(psi.basis()), current)
}

/// Lowest eigenvalue by Lanczos, iterated until the Ritz value settles.
pub fn lanczos_ground_energy(op: &HermitianOperator) -> Result<f64> {
    Ok(lanczos_ground_pair(op)?.0)
}

fn lanczos_ground_pair(op: &HermitianOperator) -> Result<(f64, Vec<C64>)> {
    let dim = op.dim();
    let mut rng = ChaCha8Rng::seed_from_u64(0x5eed);
    let start: Vec<C64> = (0..dim).map(|_| C64::new(rng.random::<f64>() - 0.5, 0.0)).collect();
    let mut m = 40.min(dim);
    loop {
        let lz = lanczos(op, &start, m)?;
        let eig = tridiagonal_eigen(&lz.alphas, &lz.betas);
        let (imin, &emin) = eig
            .eigenvalues
            .iter()
            .enumerate()
            .min_by(|a, b| a.1.total_cmp(b.1))
            .expect("non-empty Krylov space");
        let k = lz.alphas.len();
        let resid = lz.residual * eig.eigenvectors[(k - 1, imin)].abs();
        if resid <= 1e-10 * (1.0 + emin.abs()) || k >= dim || m >= 2000 {
            let mut vec = vec![C64::new(0.0, 0.0); dim];
            for (j, v) in lz.vectors.iter().enumerate().take(k) {
                let c = eig.eigenvectors[(j, imin)];
                for (x, y) in vec.iter_mut().zip(v) {
                    *x += y * c;
                }
            }
            let n = linalg::norm(&vec);
            vec.iter_mut().for_each(|x| *x /= n);
            return Ok((emin, vec));
        }
        m = (m * 2).min(dim);
    }
}

/// Minimum eigenpair. Dense for sectors up to [`SPARSE_THRESHOLD`], Lanczos
/// above.
pub fn ground_state(op: &HermitianOperator, basis: &Arc<SectorBasis>) -> Result<(f64, SectorState)> {
    if basis.dim() != op.dim() {
        return Err(Error::DimensionMismatch {
            expected: op.dim(),
            found: basis.dim(),
        });
    }
    if op.dim() <= SPARSE_THRESHOLD {
        let spec = diagonalize(op)?;
        let amps = spec.eigenvectors.column(0).iter().map(|&x| C64::new(x, 0.0)).collect();
        Ok((spec.eigenvalues[0], SectorState::new(Arc::clone(basis), amps)?))
    } else {
        let (e, amps) = lanczos_ground_pair(op)?;
        Ok((e, SectorState::new(Arc::clone(basis), amps)?))
    }
}

/// Lowest eigenvalue only.
pub fn ground_energy(op: &HermitianOperator) -> Result<f64> {
    if op.dim() <= SPARSE_THRESHOLD {
        Ok(diagonalize(op)?.eigenvalues[0])
    } else {
        lanczos_ground_energy(op)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum Spacing {
    #[default]
    Log,
    Linear,
}

/// Sample times in units of 1/J⊥, starting at 0.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TimeGrid {
    times: Vec<f64>,
}

impl TimeGrid {
    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }
}

/// `points` samples on `[t_min, t_max]` with `t = 0` prepended.
pub fn make_time_grid(t_min: f64, t_max: f64, points: usize, spacing: Spacing) -> Result<TimeGrid> {
    if !(t_min > 0.0) || !t_min.is_finite() || !t_max.is_finite() || !(t_max > t_min) {
        return Err(Error::InvalidTimeGrid(format!(
            "need 0 < t_min < t_max, got [{t_min}, {t_max}]"
        )));
    }
    if points == 0 {
        return Err(Error::InvalidTimeGrid("at least one point required".into()));
    }
    let mut times = Vec::with_capacity(points + 1);
    times.push(0.0);
    if points == 1 {
        times.push(t_min);
    } else {
        let last = (points - 1) as f64;
        for k in 0..points {
            let f = k as f64 / last;
            let t = match spacing {
                Spacing::Log => t_min * (t_max / t_min).powf(f),
                Spacing::Linear => t_min + (t_max - t_min) * f,
            };
            times.push(t);
        }
        // exact endpoint regardless of pow rounding
        *times.last_mut().unwrap() = t_max;
    }
    Ok(TimeGrid { times })
}

/// Walks a state along increasing times with whichever propagator suits the
/// sector size.
pub enum Trajectory {
    Spectral(SpectralTrajectory),
    Krylov {
        op: Arc<HermitianOperator>,
        state: SectorState,
        time: f64,
        krylov_dim: usize,
    },
}

impl Trajectory {
    /// Spectral for dense operators, Krylov otherwise.
    pub fn new(op: Arc<HermitianOperator>, psi0: SectorState) -> Result<Self> {
        if op.dim() <= SPARSE_THRESHOLD {
            let spec = Arc::new(diagonalize(&op)?);
            Ok(Trajectory::Spectral(SpectralTrajectory::new(spec, &psi0)?))
        } else {
            Ok(Trajectory::Krylov {
                op,
                state: psi0,
                time: 0.0,
                krylov_dim: 30,
            })
        }
    }

    /// State at `t`; for the Krylov path `t` must not decrease between calls.
    pub fn state_at(&mut self, t: f64) -> Result<SectorState> {
        match self {
            Trajectory::Spectral(s) => Ok(s.at(t)),
            Trajectory::Krylov {
                op,
                state,
                time,
                krylov_dim,
            } => {
                if t < *time {
                    return Err(Error::InvalidParameter(format!(
                        "Krylov trajectory cannot go back from {time} to {t}"
                    )));
                }
                if t > *time {
                    *state = krylov_evolve(op, state, t - *time, *krylov_dim)?;
                    *time = t;
                }
                Ok(state.clone())
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lattice::{build_basis, build_hamiltonian, neel_state, Block, ModelParams};
    use rand::Rng;

    fn random_fields(n: usize, w: f64, seed: u64) -> Vec<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..n).map(|_| rng.random_range(-w..=w)).collect()
    }

    fn model(n: usize, jz: f64, w: f64, seed: u64) -> (Arc<SectorBasis>, HermitianOperator) {
        let basis = Arc::new(build_basis(n).unwrap());
        let p = ModelParams::new(1.0, jz, random_fields(n, w, seed), Block::edge_pair()).unwrap();
        let h = build_hamiltonian(&p, &basis).unwrap();
        (basis, h)
    }

    fn random_state(basis: &Arc<SectorBasis>, seed: u64) -> SectorState {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut amps: Vec<C64> = (0..basis.dim())
            .map(|_| C64::new(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5))
            .collect();
        let n = linalg::norm(&amps);
        amps.iter_mut().for_each(|a| *a /= n);
        SectorState::new(Arc::clone(basis), amps).unwrap()
    }

    fn energy(h: &HermitianOperator, s: &SectorState) -> f64 {
        linalg::inner(s.amps(), &h.apply_vec(s.amps())).re
    }

    #[test]
    fn two_by_two_closed_form() {
        let p = ModelParams::clean(2, 1.0, 0.0).unwrap();
        let h = build_hamiltonian(&p, &build_basis(2).unwrap()).unwrap();
        let spec = diagonalize(&h).unwrap();
        assert!((spec.eigenvalues[0] + 0.5).abs() < 1e-14);
        assert!((spec.eigenvalues[1] - 0.5).abs() < 1e-14);

        let p = ModelParams::clean(2, 1.0, 0.2).unwrap();
        let h = build_hamiltonian(&p, &build_basis(2).unwrap()).unwrap();
        let spec = diagonalize(&h).unwrap();
        assert!((spec.eigenvalues[0] + 0.55).abs() < 1e-14);
        assert!((spec.eigenvalues[1] - 0.45).abs() < 1e-14);
    }

    #[test]
    fn diagonal_input_gives_permuted_identity() {
        // N = 2 with fields only: diag(h1/2 - h2/2, -h1/2 + h2/2)
        let p = ModelParams::new(0.0, 0.0, vec![1.0, -1.0], Block::edge_pair()).unwrap();
        let h = build_hamiltonian(&p, &build_basis(2).unwrap()).unwrap();
        let spec = diagonalize(&h).unwrap();
        assert_eq!(spec.eigenvalues, vec![-1.0, 1.0]);
        assert_eq!(spec.eigenvectors[(1, 0)].abs(), 1.0);
        assert_eq!(spec.eigenvectors[(0, 1)].abs(), 1.0);
    }

    #[test]
    fn decomposition_invariants() {
        let (_, h) = model(10, 0.2, 5.0, 3);
        let spec = diagonalize(&h).unwrap();
        assert!(spec.eigenvalues.windows(2).all(|w| w[0] <= w[1]));
        assert!(spec.reconstruction_error(&h) <= 1e-9 * h.max_abs());
        assert!(spec.orthonormality_error() <= 1e-10);
    }

    #[test]
    fn rabi_oscillation() {
        let basis = Arc::new(build_basis(2).unwrap());
        let p = ModelParams::clean(2, 1.0, 0.0).unwrap();
        let h = build_hamiltonian(&p, &basis).unwrap();
        let spec = Arc::new(diagonalize(&h).unwrap());
        let psi = evolve(&spec, &neel_state(&basis).unwrap(), std::f64::consts::PI).unwrap();
        // cos(t/2)|↑↓⟩ - i sin(t/2)|↓↑⟩ at t = π
        assert!(psi.amp_of(0b01).norm() < 1e-12);
        assert!((psi.amp_of(0b10) - C64::new(0.0, -1.0)).norm() < 1e-12);
    }

    #[test]
    fn zero_time_is_identity() {
        let (basis, h) = model(6, 0.2, 3.0, 5);
        let spec = Arc::new(diagonalize(&h).unwrap());
        let psi = random_state(&basis, 9);
        assert_eq!(evolve(&spec, &psi, 0.0).unwrap(), psi);
        assert_eq!(krylov_evolve(&h, &psi, 0.0, 20).unwrap(), psi);
        assert!(evolve(&spec, &psi, -1.0).is_err());
    }

    #[test]
    fn eigenstate_only_gains_phase() {
        let (basis, h) = model(6, 0.2, 3.0, 5);
        let spec = Arc::new(diagonalize(&h).unwrap());
        let amps = spec.eigenvectors.column(4).iter().map(|&x| C64::new(x, 0.0)).collect();
        let psi = SectorState::new(Arc::clone(&basis), amps).unwrap();
        let out = evolve(&spec, &psi, 7.3).unwrap();
        let overlap = linalg::inner(psi.amps(), out.amps());
        assert!((overlap.norm() - 1.0).abs() < 1e-12);
        assert!((overlap - C64::from_polar(1.0, -spec.eigenvalues[4] * 7.3)).norm() < 1e-10);
    }

    #[test]
    fn conservation_laws() {
        let (basis, h) = model(8, 0.2, 5.0, 17);
        let spec = Arc::new(diagonalize(&h).unwrap());
        let psi0 = neel_state(&basis).unwrap();
        let e0 = energy(&h, &psi0);
        let grid = make_time_grid(0.05, 200.0, 61, Spacing::Log).unwrap();
        for &t in grid.times() {
            let psi = evolve(&spec, &psi0, t).unwrap();
            assert!((psi.norm() - 1.0).abs() <= 1e-10);
            assert!((energy(&h, &psi) - e0).abs() <= 1e-9 * (e0.abs() + 1.0));
        }
    }

    #[test]
    fn time_composition() {
        let (basis, h) = model(8, 0.3, 2.0, 21);
        let spec = Arc::new(diagonalize(&h).unwrap());
        for seed in 0..5 {
            let psi = random_state(&basis, seed);
            let two_step = evolve(&spec, &evolve(&spec, &psi, 1.7).unwrap(), 3.1).unwrap();
            let one_step = evolve(&spec, &psi, 4.8).unwrap();
            assert!(two_step.distance(&one_step) <= 1e-9);
        }
    }

    #[test]
    fn krylov_matches_spectral() {
        let (basis, h) = model(8, 0.2, 5.0, 1);
        let spec = Arc::new(diagonalize(&h).unwrap());
        let psi0 = neel_state(&basis).unwrap();
        let exact = evolve(&spec, &psi0, 0.1).unwrap();
        let kry = krylov_evolve(&h, &psi0, 0.1, 30).unwrap();
        assert!(exact.distance(&kry) <= 1e-8);

        let (basis, h) = model(10, 0.2, 5.0, 2);
        let spec = Arc::new(diagonalize(&h).unwrap());
        let psi0 = random_state(&basis, 4);
        for dt in [0.5, 3.0, 20.0] {
            let exact = evolve(&spec, &psi0, dt).unwrap();
            let kry = krylov_evolve(&h, &psi0, dt, 30).unwrap();
            assert!(exact.distance(&kry) <= 1e-8, "dt {dt}: {}", exact.distance(&kry));
        }
    }

    #[test]
    fn krylov_on_zero_operator_is_identity() {
        let basis = Arc::new(build_basis(6).unwrap());
        let h = build_hamiltonian(&ModelParams::clean(6, 0.0, 0.0).unwrap(), &basis).unwrap();
        let psi = random_state(&basis, 1);
        assert_eq!(krylov_evolve(&h, &psi, 3.0, 12).unwrap(), psi);
        assert!(krylov_evolve(&h, &psi, 3.0, 5).is_err());
    }

    #[test]
    fn sparse_trajectory_matches_dense() {
        let (basis, h) = model(10, 0.2, 5.0, 8);
        let psi0 = neel_state(&basis).unwrap();
        let mut dense = Trajectory::new(Arc::new(h.clone()), psi0.clone()).unwrap();
        let sparse_op = Arc::new(h.with_sparse_storage(true));
        let mut kry = Trajectory::Krylov {
            op: sparse_op,
            state: psi0,
            time: 0.0,
            krylov_dim: 30,
        };
        for t in [0.0, 0.3, 1.0, 4.0, 12.0] {
            let a = dense.state_at(t).unwrap();
            let b = kry.state_at(t).unwrap();
            assert!(a.distance(&b) <= 1e-8);
        }
        assert!(kry.state_at(1.0).is_err());
    }

    #[test]
    fn ground_states() {
        let p = ModelParams::clean(2, 1.0, 0.2).unwrap();
        let basis = Arc::new(build_basis(2).unwrap());
        let h = build_hamiltonian(&p, &basis).unwrap();
        let (e, psi) = ground_state(&h, &basis).unwrap();
        assert!((e + 0.55).abs() < 1e-14);
        assert!((energy(&h, &psi) + 0.55).abs() < 1e-14);

        let basis = Arc::new(build_basis(8).unwrap());
        let h = build_hamiltonian(&ModelParams::clean(8, 1.0, 0.1).unwrap(), &basis).unwrap();
        let dense = ground_state(&h, &basis).unwrap().0;
        let krylov = lanczos_ground_energy(&h).unwrap();
        assert!((dense - krylov).abs() <= 1e-9, "{dense} vs {krylov}");
    }

    #[test]
    fn time_grids() {
        let g = make_time_grid(0.05, 200.0, 3, Spacing::Log).unwrap();
        assert_eq!(g.times().len(), 4);
        assert_eq!(g.times()[0], 0.0);
        assert!((g.times()[1] - 0.05).abs() < 1e-15);
        assert!((g.times()[2] - 10f64.sqrt()).abs() < 1e-12);
        assert_eq!(g.times()[3], 200.0);
        assert_eq!(make_time_grid(1.0, 2.0, 2, Spacing::Linear).unwrap().times(), &[0.0, 1.0, 2.0]);
        assert_eq!(make_time_grid(0.5, 2.0, 1, Spacing::Log).unwrap().times(), &[0.0, 0.5]);
        assert!(make_time_grid(0.0, 1.0, 5, Spacing::Log).is_err());
        assert!(make_time_grid(2.0, 1.0, 5, Spacing::Log).is_err());
        let g = make_time_grid(0.05, 200.0, 61, Spacing::Log).unwrap();
        assert!(g.times().windows(2).all(|w| w[0] < w[1]));
    }
}
