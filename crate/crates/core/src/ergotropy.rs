//! Work-extraction functionals: passive, global, local (lower bound),
//! subsystem and switch-off ergotropies, plus the quantum fluctuations of
//! the extracted work.

use crate::lattice::{
    apply_full_environment_hamiltonian, apply_full_hamiltonian, build_hamiltonian, Block,
    BlockOperators, FullState, HermitianOperator, ModelParams, SectorBasis, SectorState,
};
use crate::linalg::{self, CMatrix};
use crate::observables::{expectation, reduced_density_matrix};
use crate::optimizer::{build_u1, build_u_al, optimize, parameter_count, OptimizerConfig, UNITARITY_TOL};
use crate::propagator::ground_energy;
use crate::{Error, Result, C64};

/// `Tr[H rho] - sum_k r_k eps_k` with `r` descending and `eps` ascending.
pub fn passive_ergotropy(rho: &CMatrix, h: &CMatrix) -> Result<f64> {
    if rho.shape() != h.shape() || !rho.is_square() {
        return Err(Error::DimensionMismatch {
            expected: h.nrows(),
            found: rho.nrows(),
        });
    }
    let (r, _) = linalg::hermitian_eigh(rho);
    let (eps, _) = linalg::hermitian_eigh(h);
    let passive: f64 = r.iter().rev().zip(&eps).map(|(r, e)| r * e).sum();
    Ok(linalg::trace_product(h, rho).re - passive)
}

/// Lowest eigenvalue of the Hamiltonian over the whole `2^N` space, as the
/// minimum over all magnetization sectors.
pub fn full_space_ground_energy(params: &ModelParams) -> Result<f64> {
    params.validate()?;
    let mut e_min = f64::INFINITY;
    for n_up in 0..=params.n_sites {
        let basis = SectorBasis::with_up_count(params.n_sites, n_up)?;
        let h = build_hamiltonian(params, &basis)?;
        e_min = e_min.min(ground_energy(&h)?);
    }
    Ok(e_min)
}

/// `<psi|H|psi> - e_min` with `e_min` from [`full_space_ground_energy`].
pub fn global_ergotropy(psi: &SectorState, h: &HermitianOperator, e_min: f64) -> Result<f64> {
    Ok(expectation(h, psi)? - e_min)
}

fn check_unitary(u: &CMatrix, block: Block) -> Result<()> {
    if u.nrows() != block.dim() || u.ncols() != block.dim() {
        return Err(Error::DimensionMismatch {
            expected: block.dim(),
            found: u.nrows(),
        });
    }
    let defect = linalg::unitarity_defect(u);
    if defect > UNITARITY_TOL {
        return Err(Error::NotUnitary(defect));
    }
    Ok(())
}

fn apply_block(amps: &[C64], u: &CMatrix, block: Block) -> Vec<C64> {
    let d = block.dim();
    let mask = block.mask();
    let mut out = vec![C64::new(0.0, 0.0); amps.len()];
    let mut local = vec![C64::new(0.0, 0.0); d];
    for env in 0..amps.len() as u32 {
        if env & mask != 0 {
            continue;
        }
        for (s, v) in local.iter_mut().enumerate() {
            *v = amps[(env | block.place(s)) as usize];
        }
        if local.iter().all(|z| *z == C64::new(0.0, 0.0)) {
            continue;
        }
        for s_out in 0..d {
            let mut acc = C64::new(0.0, 0.0);
            for (s_in, v) in local.iter().enumerate() {
                acc += u[(s_out, s_in)] * v;
            }
            out[(env | block.place(s_out)) as usize] = acc;
        }
    }
    out
}

/// `(U_S (x) I_E) psi` on the full space.
pub fn apply_local_unitary(psi: &FullState, u: &CMatrix, block: Block) -> Result<FullState> {
    block.validate(psi.n_sites)?;
    check_unitary(u, block)?;
    Ok(FullState {
        n_sites: psi.n_sites,
        amps: apply_block(&psi.amps, u, block),
    })
}

fn full_energy(params: &ModelParams, amps: &[C64]) -> f64 {
    let mut h_amps = vec![C64::new(0.0, 0.0); amps.len()];
    apply_full_hamiltonian(params, amps, &mut h_amps);
    linalg::inner(amps, &h_amps).re
}

/// Extracted work `<H> - <U psi|H|U psi>` evaluated directly on the full
/// `2^N` space. Independent of [`LocalWorkModel`]; used for validation.
#[derive(Debug, Clone)]
pub struct FullSpaceWork {
    params: ModelParams,
    state: FullState,
    energy: f64,
}

impl FullSpaceWork {
    pub fn new(psi: &SectorState, params: &ModelParams) -> Result<Self> {
        params.validate()?;
        let state = psi.to_full();
        let energy = full_energy(params, &state.amps);
        Ok(Self {
            params: params.clone(),
            state,
            energy,
        })
    }

    pub fn energy(&self) -> f64 {
        self.energy
    }

    /// Work for a block unitary; unitarity is the caller's responsibility.
    pub fn work(&self, u: &CMatrix) -> f64 {
        let moved = apply_block(&self.state.amps, u, self.params.block);
        self.energy - full_energy(&self.params, &moved)
    }
}

/// `<psi|H|psi> - <psi|U^dagger H U|psi>` for `U` acting on `params.block`.
pub fn extracted_work(psi: &SectorState, params: &ModelParams, u: &CMatrix) -> Result<f64> {
    check_unitary(u, params.block)?;
    Ok(FullSpaceWork::new(psi, params)?.work(u))
}

/// Change of `<H_E>` under a block unitary. Zero up to round-off since the
/// unitary commutes with `H_E`.
pub fn environment_energy_shift(psi: &SectorState, params: &ModelParams, u: &CMatrix) -> Result<f64> {
    check_unitary(u, params.block)?;
    let before = psi.to_full().amps;
    let after = apply_block(&before, u, params.block);
    let energy = |amps: &[C64]| {
        let mut out = vec![C64::new(0.0, 0.0); amps.len()];
        apply_full_environment_hamiltonian(params, amps, &mut out);
        linalg::inner(amps, &out).re
    };
    Ok(energy(&after) - energy(&before))
}

fn local_spin_op(d: usize, bit: usize, kind: SpinOp) -> CMatrix {
    let mut m = CMatrix::zeros(d, d);
    for src in 0..d {
        let up = src >> bit & 1 == 1;
        match kind {
            SpinOp::Raise if !up => m[(src | 1 << bit, src)] = C64::new(1.0, 0.0),
            SpinOp::Lower if up => m[(src & !(1 << bit), src)] = C64::new(1.0, 0.0),
            SpinOp::Z => m[(src, src)] = C64::new(if up { 0.5 } else { -0.5 }, 0.0),
            _ => {}
        }
    }
    m
}

#[derive(Clone, Copy)]
enum SpinOp {
    Raise,
    Lower,
    Z,
}

/// Extracted work as a function of the block unitary, reduced to
/// `d_S x d_S` algebra.
///
/// Each block-touching term of `H` is a sum of products `A (x) B` with `A` on
/// the block. Writing `X_B = Tr_E[(I (x) B) |psi><psi|]`, the term contributes
/// `Tr(A U X_B U^dagger)` after the unitary; `H_E` terms do not change.
#[derive(Debug, Clone)]
pub struct LocalWorkModel {
    block: Block,
    rho: CMatrix,
    terms: Vec<(CMatrix, CMatrix)>,
    reference: f64,
}

impl LocalWorkModel {
    pub fn new(psi: &SectorState, ops: &BlockOperators) -> Result<Self> {
        let block = ops.block;
        let rho = reduced_density_matrix(psi, block)?.matrix;
        let d = block.dim();
        let mut terms = vec![(ops.h_s_local.clone(), rho.clone())];
        for c in &ops.couplings {
            let bit = c.inner - block.start;
            let outer_bit = c.outer - 1;
            let pairs = [
                (0.5 * c.j_perp, SpinOp::Raise, SpinOp::Lower),
                (0.5 * c.j_perp, SpinOp::Lower, SpinOp::Raise),
                (c.j_z, SpinOp::Z, SpinOp::Z),
            ];
            for (coef, a_kind, b_kind) in pairs {
                if coef == 0.0 {
                    continue;
                }
                let a = local_spin_op(d, bit, a_kind) * C64::new(coef, 0.0);
                let x = environment_weighted(psi, block, outer_bit, b_kind);
                terms.push((a, x));
            }
        }
        let reference = terms
            .iter()
            .map(|(a, x)| linalg::trace_product(a, x).re)
            .sum();
        Ok(Self {
            block,
            rho,
            terms,
            reference,
        })
    }

    pub fn block(&self) -> Block {
        self.block
    }

    /// Reduced state of the block.
    pub fn rho(&self) -> &CMatrix {
        &self.rho
    }

    /// Block-touching part of `<H>` before any unitary.
    pub fn reference_energy(&self) -> f64 {
        self.reference
    }

    pub fn work(&self, u: &CMatrix) -> f64 {
        let u_dag = u.adjoint();
        let after: f64 = self
            .terms
            .iter()
            .map(|(a, x)| linalg::trace_product(a, &(u * x * &u_dag)).re)
            .sum();
        self.reference - after
    }
}

/// `X[s', s] = sum_{e, e'} B[e, e'] psi(s', e') psi*(s, e)` for a single-site
/// environment operator `B` on bit `outer_bit`.
fn environment_weighted(psi: &SectorState, block: Block, outer_bit: usize, kind: SpinOp) -> CMatrix {
    let d = block.dim();
    let mask = block.mask();
    let mut x = CMatrix::zeros(d, d);
    for (&config, &amp) in psi.basis().configs().iter().zip(psi.amps()) {
        if amp == C64::new(0.0, 0.0) {
            continue;
        }
        let s_prime = block.local_index(config);
        let env = config & !mask;
        let up = env >> outer_bit & 1 == 1;
        let (image, coef) = match kind {
            SpinOp::Raise if !up => (env | 1 << outer_bit, 1.0),
            SpinOp::Lower if up => (env & !(1 << outer_bit), 1.0),
            SpinOp::Z => (env, if up { 0.5 } else { -0.5 }),
            _ => continue,
        };
        for s in 0..d {
            let partner = psi.amp_of(image | block.place(s));
            x[(s_prime, s)] += amp * partner.conj() * coef;
        }
    }
    x
}

/// Best block unitary found by the optimizer.
#[derive(Debug, Clone, PartialEq)]
pub struct LocalErgotropy {
    /// Certified lower bound on the local ergotropy.
    pub value: f64,
    /// Work of `U_AL` alone.
    pub baseline: f64,
    pub params: Vec<f64>,
    pub unitary: CMatrix,
    pub evaluations: usize,
    pub evaluations_to_incumbent: usize,
}

/// Maximizes the extracted work over `U_AL * exp(-iA)`.
pub fn local_ergotropy_lower_bound(
    psi: &SectorState,
    ops: &BlockOperators,
    cfg: &OptimizerConfig,
    warm_start: Option<&[f64]>,
) -> Result<LocalErgotropy> {
    let n_params = parameter_count(ops.block.dim())?;
    let model = LocalWorkModel::new(psi, ops)?;
    let u_al = build_u_al(model.rho(), &ops.h_s_local)?;
    let outcome = optimize(|a| model.work(&(&u_al * build_u1(a))), n_params, cfg, warm_start)?;
    let unitary = &u_al * build_u1(&outcome.best_params);
    let defect = linalg::unitarity_defect(&unitary);
    if defect > UNITARITY_TOL {
        return Err(Error::NotUnitary(defect));
    }
    Ok(LocalErgotropy {
        value: outcome.best_value,
        baseline: outcome.baseline,
        evaluations: outcome.evaluations(),
        evaluations_to_incumbent: outcome.evaluations_to_incumbent(1e-12 * (1.0 + outcome.best_value.abs())),
        params: outcome.best_params,
        unitary,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SwitchOff {
    /// Cost of switching the coupling off, `-<V_SE>`.
    pub delta_so: f64,
    /// Subsystem ergotropy of `rho_S` with respect to the block-local `H_S`.
    pub e_ss: f64,
    pub e_so: f64,
}

pub fn switch_off_ergotropy(psi: &SectorState, ops: &BlockOperators) -> Result<SwitchOff> {
    let rho = reduced_density_matrix(psi, ops.block)?;
    let e_ss = passive_ergotropy(&rho.matrix, &ops.h_s_local)?;
    let delta_so = -expectation(&ops.v_se, psi)?;
    Ok(SwitchOff {
        delta_so,
        e_ss,
        e_so: e_ss - delta_so,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Fluctuations {
    /// Variance of `H' - H` with `H' = U^dagger H U`.
    pub sigma2: f64,
    pub sigma: f64,
    /// `<H - H'>`, the extracted work.
    pub mean_work: f64,
}

/// Quantum fluctuations of the extracted work, from
/// `H' psi = U^dagger H U psi` on the full space.
pub fn work_fluctuations(psi: &SectorState, params: &ModelParams, u: &CMatrix) -> Result<Fluctuations> {
    check_unitary(u, params.block)?;
    let block = params.block;
    let full = psi.to_full().amps;
    let mut h_psi = vec![C64::new(0.0, 0.0); full.len()];
    apply_full_hamiltonian(params, &full, &mut h_psi);
    let moved = apply_block(&full, u, block);
    let mut h_moved = vec![C64::new(0.0, 0.0); full.len()];
    apply_full_hamiltonian(params, &moved, &mut h_moved);
    let h_prime_psi = apply_block(&h_moved, &u.adjoint(), block);
    let diff: Vec<C64> = h_prime_psi.iter().zip(&h_psi).map(|(a, b)| a - b).collect();
    let mean = linalg::inner(&full, &diff).re;
    let second = linalg::norm(&diff).powi(2);
    let sigma2 = second - mean * mean;
    if sigma2 < -1e-9 {
        return Err(Error::Numerical(format!("negative work variance {sigma2:.3e}")));
    }
    Ok(Fluctuations {
        sigma2,
        sigma: sigma2.max(0.0).sqrt(),
        mean_work: -mean,
    })
}

/// Everything computed on one state at one time.
#[derive(Debug, Clone, PartialEq)]
pub struct ErgotropyRecord {
    pub time: f64,
    pub e_global: f64,
    pub e_s_lower: f64,
    /// Work of `U_AL` alone.
    pub e_u_al: f64,
    pub e_ss: f64,
    pub delta_so: f64,
    pub e_so: f64,
    pub sigma2: f64,
    pub sigma: f64,
    /// `sigma / e_s_lower`, present when `e_s_lower > 1e-6`.
    pub relative_fluctuation: Option<f64>,
    /// Change of `<H_E>` under the optimal unitary.
    pub e_env_shift: f64,
    pub evaluations: usize,
    pub evaluations_to_incumbent: usize,
    pub best_params: Vec<f64>,
}

/// Per-realization data shared across time steps.
#[derive(Debug, Clone)]
pub struct WorkContext {
    pub params: ModelParams,
    pub ops: BlockOperators,
    pub hamiltonian: HermitianOperator,
    pub e_min: f64,
}

impl WorkContext {
    pub fn new(params: &ModelParams, basis: &SectorBasis) -> Result<Self> {
        Ok(Self {
            params: params.clone(),
            ops: crate::lattice::build_block_operators(params, basis)?,
            hamiltonian: build_hamiltonian(params, basis)?,
            e_min: full_space_ground_energy(params)?,
        })
    }
}

pub fn ergotropy_record(
    time: f64,
    psi: &SectorState,
    ctx: &WorkContext,
    cfg: &OptimizerConfig,
    warm_start: Option<&[f64]>,
) -> Result<ErgotropyRecord> {
    let e_global = global_ergotropy(psi, &ctx.hamiltonian, ctx.e_min)?;
    let local = local_ergotropy_lower_bound(psi, &ctx.ops, cfg, warm_start)?;
    let switch = switch_off_ergotropy(psi, &ctx.ops)?;
    let fluct = work_fluctuations(psi, &ctx.params, &local.unitary)?;
    let e_env_shift = environment_energy_shift(psi, &ctx.params, &local.unitary)?;
    if e_env_shift.abs() > 1e-9 {
        log::warn!("environment energy moved by {e_env_shift:.3e} under a block unitary");
    }
    if local.value < switch.e_so - 1e-9 {
        log::debug!("local bound {} below switch-off {} at t={time}", local.value, switch.e_so);
    }
    Ok(ErgotropyRecord {
        time,
        e_global,
        e_s_lower: local.value,
        e_u_al: local.baseline,
        e_ss: switch.e_ss,
        delta_so: switch.delta_so,
        e_so: switch.e_so,
        sigma2: fluct.sigma2,
        sigma: fluct.sigma,
        relative_fluctuation: (local.value > 1e-6).then(|| fluct.sigma / local.value),
        e_env_shift,
        evaluations: local.evaluations,
        evaluations_to_incumbent: local.evaluations_to_incumbent,
        best_params: local.params,
    })
}
