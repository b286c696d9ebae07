//! Disorder ensembles: per-realization pipelines run in parallel, reduced in
//! index order into time-series statistics, plus log-time slope fits and the
//! phase classifier.

use std::collections::BTreeMap;
use std::fmt;
use std::sync::Arc;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::ergotropy::{ergotropy_record, WorkContext};
use crate::lattice::{
    bell_chain_state, build_basis, build_block_operators, build_hamiltonian, neel_state, sample_disorder, Block, ModelParams, SectorBasis,
    SectorState,
};
use crate::observables::{
    energy_split, expectation, half_chain_entropy, imbalance, reduced_density_matrix, von_neumann_entropy,
};
use crate::optimizer::OptimizerConfig;
use crate::propagator::{make_time_grid, Spacing, TimeGrid, Trajectory};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum InitialState {
    #[default]
    Neel,
    BellChain,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TimeGridSpec {
    pub t_min: f64,
    pub t_max: f64,
    pub points: usize,
    pub spacing: Spacing,
}

impl Default for TimeGridSpec {
    fn default() -> Self {
        Self {
            t_min: 0.05,
            t_max: 200.0,
            points: 61,
            spacing: Spacing::Log,
        }
    }
}

impl TimeGridSpec {
    pub fn build(&self) -> Result<TimeGrid> {
        make_time_grid(self.t_min, self.t_max, self.points, self.spacing)
    }
}

/// Which groups of observables to compute at every time.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ObservableFlags {
    /// Block and half-chain entanglement entropies.
    pub entropy: bool,
    pub imbalance: bool,
    pub energy_split: bool,
    /// Global, local, subsystem and switch-off ergotropies and the work
    /// fluctuations. The only group that runs the optimizer.
    pub ergotropy: bool,
}

impl Default for ObservableFlags {
    fn default() -> Self {
        Self {
            entropy: true,
            imbalance: true,
            energy_split: true,
            ergotropy: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EnsembleConfig {
    pub n_sites: usize,
    pub j_perp: f64,
    pub j_z: f64,
    /// Fields are drawn uniformly from `[-disorder, disorder]`.
    pub disorder: f64,
    pub block: Block,
    pub realizations: usize,
    pub seed: u64,
    pub time_grid: TimeGridSpec,
    pub observables: ObservableFlags,
    pub optimizer: OptimizerConfig,
    pub initial_state: InitialState,
    /// Seed each time step's search with the previous step's optimum.
    pub warm_start: bool,
}

impl Default for EnsembleConfig {
    fn default() -> Self {
        Self {
            n_sites: 8,
            j_perp: 1.0,
            j_z: 0.2,
            disorder: 5.0,
            block: Block::edge_pair(),
            realizations: 100,
            seed: 2024,
            time_grid: TimeGridSpec::default(),
            observables: ObservableFlags::default(),
            optimizer: OptimizerConfig::default(),
            initial_state: InitialState::Neel,
            warm_start: true,
        }
    }
}

impl EnsembleConfig {
    pub fn validate(&self) -> Result<()> {
        if self.realizations < 1 {
            return Err(Error::Config("realizations must be at least 1".into()));
        }
        if !(self.disorder >= 0.0) || !self.disorder.is_finite() {
            return Err(Error::Config(format!("disorder must be finite and >= 0, got {}", self.disorder)));
        }
        ModelParams::new(self.j_perp, self.j_z, vec![0.0; self.n_sites], self.block)?;
        self.time_grid.build()?;
        if self.observables.ergotropy {
            self.optimizer.validate()?;
        }
        Ok(())
    }

    /// Model for realization `index`: fields from RNG stream `index` of the
    /// master seed.
    pub fn model(&self, index: usize) -> Result<ModelParams> {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(index as u64);
        let fields = sample_disorder(self.n_sites, self.disorder, &mut rng)?;
        ModelParams::new(self.j_perp, self.j_z, fields, self.block)
    }
}

/// Per-time quantities, in output order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Observable {
    EntropyBlock,
    EntropyHalf,
    Imbalance,
    EnergyS,
    EnergyInt,
    EnergyE,
    ErgotropyGlobal,
    ErgotropyLocal,
    ErgotropyUal,
    ErgotropySubsystem,
    DeltaSo,
    ErgotropySwitchOff,
    Sigma2,
    Sigma,
    RelativeSigma,
    Evaluations,
}

impl Observable {
    pub const ALL: [Observable; 16] = [
        Observable::EntropyBlock,
        Observable::EntropyHalf,
        Observable::Imbalance,
        Observable::EnergyS,
        Observable::EnergyInt,
        Observable::EnergyE,
        Observable::ErgotropyGlobal,
        Observable::ErgotropyLocal,
        Observable::ErgotropyUal,
        Observable::ErgotropySubsystem,
        Observable::DeltaSo,
        Observable::ErgotropySwitchOff,
        Observable::Sigma2,
        Observable::Sigma,
        Observable::RelativeSigma,
        Observable::Evaluations,
    ];

    /// File stem used in result bundles.
    pub fn name(self) -> &'static str {
        match self {
            Observable::EntropyBlock => "entropy_S",
            Observable::EntropyHalf => "entropy_half",
            Observable::Imbalance => "imbalance",
            Observable::EnergyS => "energy_S",
            Observable::EnergyInt => "energy_int",
            Observable::EnergyE => "energy_E",
            Observable::ErgotropyGlobal => "ergotropy_global",
            Observable::ErgotropyLocal => "ergotropy_S",
            Observable::ErgotropyUal => "ergotropy_U_AL",
            Observable::ErgotropySubsystem => "ergotropy_SS",
            Observable::DeltaSo => "delta_SO",
            Observable::ErgotropySwitchOff => "ergotropy_SO",
            Observable::Sigma2 => "sigma2",
            Observable::Sigma => "sigma",
            Observable::RelativeSigma => "relative_sigma",
            Observable::Evaluations => "evaluations",
        }
    }

    pub fn from_name(name: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|o| o.name() == name)
    }

    fn enabled(self, flags: &ObservableFlags) -> bool {
        match self {
            Observable::EntropyBlock | Observable::EntropyHalf => flags.entropy,
            Observable::Imbalance => flags.imbalance,
            Observable::EnergyS | Observable::EnergyInt | Observable::EnergyE => flags.energy_split,
            _ => flags.ergotropy,
        }
    }
}

impl fmt::Display for Observable {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Everything one realization produced. `NaN` marks undefined values
/// (relative fluctuation with vanishing ergotropy).
#[derive(Debug, Clone, PartialEq)]
pub struct RealizationRecord {
    pub index: usize,
    pub fields: Vec<f64>,
    pub series: BTreeMap<Observable, Vec<f64>>,
    /// Largest `|<H>(t) - <H>(0)|` over the grid.
    pub energy_drift: f64,
    /// Largest `|norm - 1|` over the grid.
    pub norm_drift: f64,
}

impl RealizationRecord {
    pub fn get(&self, obs: Observable) -> Option<&[f64]> {
        self.series.get(&obs).map(Vec::as_slice)
    }
}

fn initial_state(kind: InitialState, basis: &Arc<SectorBasis>) -> Result<SectorState> {
    match kind {
        InitialState::Neel => neel_state(basis),
        InitialState::BellChain => bell_chain_state(basis),
    }
}

/// Optimizer seed for time step `k`: shared by all realizations so that
/// clean (`W = 0`) ensembles stay identical across realizations.
fn step_seed(base: u64, k: usize) -> u64 {
    base ^ (k as u64 + 1).wrapping_mul(0x9e37_79b9_7f4a_7c15)
}

const NORM_TOL: f64 = 1e-10;
const ENERGY_TOL: f64 = 1e-9;

fn run_with_basis(cfg: &EnsembleConfig, basis: &Arc<SectorBasis>, grid: &TimeGrid, index: usize) -> Result<RealizationRecord> {
    let params = cfg.model(index)?;
    let ctx = if cfg.observables.ergotropy {
        WorkContext::new(&params, basis)?
    } else {
        // The full-space ground energy is only needed for the global ergotropy.
        WorkContext {
            params: params.clone(),
            ops: build_block_operators(&params, basis)?,
            hamiltonian: build_hamiltonian(&params, basis)?,
            e_min: f64::NAN,
        }
    };
    let psi0 = initial_state(cfg.initial_state, basis)?;
    let e0 = expectation(&ctx.hamiltonian, &psi0)?;
    let mut trajectory = Trajectory::new(Arc::new(ctx.hamiltonian.clone()), psi0)?;

    let wanted: Vec<Observable> = Observable::ALL
        .into_iter()
        .filter(|o| o.enabled(&cfg.observables))
        .collect();
    let mut series: BTreeMap<Observable, Vec<f64>> =
        wanted.iter().map(|&o| (o, Vec::with_capacity(grid.len()))).collect();
    let mut push = |o: Observable, v: f64| series.get_mut(&o).expect("enabled observable").push(v);
    let (mut energy_drift, mut norm_drift) = (0.0f64, 0.0f64);
    let mut warm: Option<Vec<f64>> = None;

    for (k, &t) in grid.times().iter().enumerate() {
        let psi = trajectory.state_at(t)?;
        norm_drift = norm_drift.max((psi.norm() - 1.0).abs());
        let energy = expectation(&ctx.hamiltonian, &psi)?;
        energy_drift = energy_drift.max((energy - e0).abs());
        if norm_drift > NORM_TOL || energy_drift > ENERGY_TOL * (1.0 + e0.abs()) {
            return Err(Error::Numerical(format!(
                "conservation violated at t={t}: norm drift {norm_drift:.3e}, energy drift {energy_drift:.3e}"
            )));
        }
        if cfg.observables.entropy {
            let rho = reduced_density_matrix(&psi, params.block)?;
            push(Observable::EntropyBlock, von_neumann_entropy(&rho)?);
            push(Observable::EntropyHalf, half_chain_entropy(&psi));
        }
        if cfg.observables.imbalance {
            push(Observable::Imbalance, imbalance(&psi));
        }
        if cfg.observables.energy_split {
            let split = energy_split(&psi, &ctx.ops)?;
            push(Observable::EnergyS, split.e_s);
            push(Observable::EnergyInt, split.e_int);
            push(Observable::EnergyE, split.e_e);
        }
        if cfg.observables.ergotropy {
            let opt = OptimizerConfig {
                seed: step_seed(cfg.optimizer.seed, k),
                ..cfg.optimizer.clone()
            };
            let warm_start = if cfg.warm_start { warm.as_deref() } else { None };
            let rec = ergotropy_record(t, &psi, &ctx, &opt, warm_start)?;
            push(Observable::ErgotropyGlobal, rec.e_global);
            push(Observable::ErgotropyLocal, rec.e_s_lower);
            push(Observable::ErgotropyUal, rec.e_u_al);
            push(Observable::ErgotropySubsystem, rec.e_ss);
            push(Observable::DeltaSo, rec.delta_so);
            push(Observable::ErgotropySwitchOff, rec.e_so);
            push(Observable::Sigma2, rec.sigma2);
            push(Observable::Sigma, rec.sigma);
            push(Observable::RelativeSigma, rec.relative_fluctuation.unwrap_or(f64::NAN));
            push(Observable::Evaluations, rec.evaluations_to_incumbent as f64);
            warm = Some(rec.best_params);
        }
    }
    Ok(RealizationRecord {
        index,
        fields: params.fields,
        series,
        energy_drift,
        norm_drift,
    })
}

/// Full pipeline for one disorder realization. Deterministic in
/// `(cfg, index)`.
pub fn run_realization(cfg: &EnsembleConfig, index: usize) -> Result<RealizationRecord> {
    cfg.validate()?;
    if index >= cfg.realizations {
        return Err(Error::InvalidParameter(format!(
            "realization index {index} out of range for R={}",
            cfg.realizations
        )));
    }
    let basis = Arc::new(build_basis(cfg.n_sites)?);
    let grid = cfg.time_grid.build()?;
    run_with_basis(cfg, &basis, &grid, index).map_err(|e| Error::Realization {
        index,
        source: Box::new(e),
    })
}

/// Disorder mean, sample standard deviation and standard error of one
/// observable on the grid. `count` is the number of defined (non-NaN)
/// values at each time.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeriesStats {
    pub mean: Vec<f64>,
    pub sigma_cl: Vec<f64>,
    pub sem: Vec<f64>,
    pub count: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TimeSeriesStats {
    pub times: Vec<f64>,
    pub realizations: usize,
    /// False for single-realization ensembles, where `sigma_cl` is reported
    /// as zero.
    pub sigma_defined: bool,
    pub series: BTreeMap<Observable, SeriesStats>,
}

impl TimeSeriesStats {
    pub fn get(&self, obs: Observable) -> Result<&SeriesStats> {
        self.series.get(&obs).ok_or_else(|| Error::MissingSeries(obs.name().into()))
    }

    /// Mean of `obs` over grid times `t >= t_from`.
    pub fn late_time_mean(&self, obs: Observable, t_from: f64) -> Result<f64> {
        let s = self.get(obs)?;
        let vals: Vec<f64> = self
            .times
            .iter()
            .zip(&s.mean)
            .filter(|(t, v)| **t >= t_from && v.is_finite())
            .map(|(_, v)| *v)
            .collect();
        if vals.is_empty() {
            return Err(Error::InvalidParameter(format!("no grid times at or after {t_from}")));
        }
        Ok(vals.iter().sum::<f64>() / vals.len() as f64)
    }
}

/// Reduces `records` in slice order. Sums run sequentially so the result does
/// not depend on how the records were computed.
pub fn aggregate(times: &[f64], records: &[RealizationRecord]) -> Result<TimeSeriesStats> {
    let first = records
        .first()
        .ok_or_else(|| Error::InvalidParameter("no realizations to aggregate".into()))?;
    let mut series = BTreeMap::new();
    for &obs in first.series.keys() {
        let n_t = times.len();
        let (mut mean, mut sigma_cl, mut sem, mut count) =
            (vec![0.0; n_t], vec![0.0; n_t], vec![0.0; n_t], vec![0usize; n_t]);
        for k in 0..n_t {
            let mut sum = 0.0;
            let mut n = 0usize;
            for r in records {
                let v = r.get(obs).ok_or_else(|| Error::MissingSeries(obs.name().into()))?[k];
                if v.is_finite() {
                    sum += v;
                    n += 1;
                }
            }
            count[k] = n;
            if n == 0 {
                mean[k] = f64::NAN;
                sigma_cl[k] = f64::NAN;
                sem[k] = f64::NAN;
                continue;
            }
            let m = sum / n as f64;
            mean[k] = m;
            if n >= 2 {
                let mut ss = 0.0;
                for r in records {
                    let v = r.get(obs).expect("checked above")[k];
                    if v.is_finite() {
                        ss += (v - m) * (v - m);
                    }
                }
                sigma_cl[k] = (ss / (n - 1) as f64).sqrt();
                sem[k] = sigma_cl[k] / (n as f64).sqrt();
            }
        }
        series.insert(obs, SeriesStats { mean, sigma_cl, sem, count });
    }
    Ok(TimeSeriesStats {
        times: times.to_vec(),
        realizations: records.len(),
        sigma_defined: records.len() >= 2,
        series,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct EnsembleResult {
    pub config: EnsembleConfig,
    pub times: Vec<f64>,
    /// Sorted by realization index.
    pub records: Vec<RealizationRecord>,
    pub stats: TimeSeriesStats,
}

impl EnsembleResult {
    /// Statistics of the first `r` realizations (nested sub-ensembles).
    pub fn prefix_stats(&self, r: usize) -> Result<TimeSeriesStats> {
        if r == 0 || r > self.records.len() {
            return Err(Error::InvalidParameter(format!(
                "prefix of {r} realizations out of {}",
                self.records.len()
            )));
        }
        aggregate(&self.times, &self.records[..r])
    }
}

/// An aborted ensemble: the first failure plus every realization that did
/// complete, in index order.
#[derive(Debug)]
pub struct EnsembleFailure {
    pub error: Error,
    pub completed: Vec<RealizationRecord>,
    pub times: Vec<f64>,
}

impl fmt::Display for EnsembleFailure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} ({} realizations completed)", self.error, self.completed.len())
    }
}

impl std::error::Error for EnsembleFailure {}

/// Runs all realizations on `workers` threads and reduces them in index
/// order, so the output is bitwise independent of the worker count.
///
/// A clean chain (`disorder == 0`) has identical realizations; one is
/// computed and replicated.
pub fn run_ensemble(cfg: &EnsembleConfig, workers: usize) -> std::result::Result<EnsembleResult, Box<EnsembleFailure>> {
    let fail = |error: Error, completed: Vec<RealizationRecord>, times: Vec<f64>| {
        Box::new(EnsembleFailure { error, completed, times })
    };
    if let Err(e) = cfg.validate() {
        return Err(fail(e, Vec::new(), Vec::new()));
    }
    let grid = match cfg.time_grid.build() {
        Ok(g) => g,
        Err(e) => return Err(fail(e, Vec::new(), Vec::new())),
    };
    let times = grid.times().to_vec();
    let basis = match build_basis(cfg.n_sites) {
        Ok(b) => Arc::new(b),
        Err(e) => return Err(fail(e, Vec::new(), times)),
    };
    let run = |index: usize| {
        run_with_basis(cfg, &basis, &grid, index).map_err(|e| Error::Realization {
            index,
            source: Box::new(e),
        })
    };

    let results: Vec<Result<RealizationRecord>> = if cfg.disorder == 0.0 {
        match run(0) {
            Ok(first) => (0..cfg.realizations)
                .map(|index| Ok(RealizationRecord { index, ..first.clone() }))
                .collect(),
            Err(e) => vec![Err(e)],
        }
    } else {
        let pool = match rayon::ThreadPoolBuilder::new().num_threads(workers.max(1)).build() {
            Ok(p) => p,
            Err(e) => return Err(fail(Error::Config(format!("thread pool: {e}")), Vec::new(), times)),
        };
        pool.install(|| (0..cfg.realizations).into_par_iter().map(run).collect())
    };

    let mut records = Vec::with_capacity(results.len());
    let mut first_error = None;
    for r in results {
        match r {
            Ok(rec) => records.push(rec),
            Err(e) => {
                if first_error.is_none() {
                    first_error = Some(e);
                }
            }
        }
    }
    if let Some(e) = first_error {
        return Err(fail(e, records, times));
    }
    match aggregate(&times, &records) {
        Ok(stats) => Ok(EnsembleResult {
            config: cfg.clone(),
            times,
            records,
            stats,
        }),
        Err(e) => Err(fail(e, records, times)),
    }
}

/// Sample standard deviation over realizations at one time.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DisorderFluctuation {
    pub sigma_cl: f64,
    pub sem: f64,
    /// `sigma_cl / mean` when `|mean| > 1e-9`.
    pub relative: Option<f64>,
}

pub fn disorder_fluctuations(values: &[f64]) -> Result<DisorderFluctuation> {
    let r = values.len();
    if r < 2 {
        return Err(Error::InvalidParameter(format!("need at least 2 realizations, got {r}")));
    }
    let mean = values.iter().sum::<f64>() / r as f64;
    let sigma_cl = (values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (r - 1) as f64).sqrt();
    Ok(DisorderFluctuation {
        sigma_cl,
        sem: sigma_cl / (r as f64).sqrt(),
        relative: (mean.abs() > 1e-9).then(|| sigma_cl / mean),
    })
}

/// Least-squares line of `value` against `ln t`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LogFit {
    pub slope: f64,
    pub intercept: f64,
    /// Standard error of the slope.
    pub stderr: f64,
    pub points: usize,
}

impl LogFit {
    /// `|slope| <= k * stderr`.
    pub fn consistent_with_zero(&self, k: f64) -> bool {
        self.slope.abs() <= k * self.stderr
    }
}

/// Fits over grid times inside `window` (inclusive).
pub fn fit_log_slope(times: &[f64], values: &[f64], window: (f64, f64)) -> Result<LogFit> {
    if times.len() != values.len() {
        return Err(Error::DimensionMismatch {
            expected: times.len(),
            found: values.len(),
        });
    }
    let pts: Vec<(f64, f64)> = times
        .iter()
        .zip(values)
        .filter(|(t, v)| **t >= window.0 && **t <= window.1 && v.is_finite())
        .map(|(t, v)| (t.ln(), *v))
        .collect();
    if pts.iter().any(|(x, _)| !x.is_finite()) {
        return Err(Error::InvalidParameter("fit window must exclude t <= 0".into()));
    }
    let n = pts.len();
    if n < 5 {
        return Err(Error::InvalidParameter(format!("log fit needs at least 5 points, window has {n}")));
    }
    let nf = n as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / nf;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / nf;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let ssr: f64 = pts.iter().map(|p| (p.1 - intercept - slope * p.0).powi(2)).sum();
    let stderr = (ssr / (nf - 2.0) / sxx).sqrt();
    Ok(LogFit {
        slope,
        intercept,
        stderr,
        points: n,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum PhaseLabel {
    Erg,
    Al,
    Mbl,
    Undetermined,
}

impl fmt::Display for PhaseLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            PhaseLabel::Erg => "ERG",
            PhaseLabel::Al => "AL",
            PhaseLabel::Mbl => "MBL",
            PhaseLabel::Undetermined => "UNDETERMINED",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ClassifyConfig {
    /// Fit window in units of `1/J_perp`.
    pub window: (f64, f64),
    /// Start of the late-time window for the ergotropy mean.
    pub late_from: f64,
    /// ERG when the late-time local ergotropy is below
    /// `theta_erg * max(W/2, J_perp)`.
    pub theta_erg: f64,
    /// Slopes within this many standard errors of zero count as flat.
    pub zero_sigmas: f64,
}

impl Default for ClassifyConfig {
    fn default() -> Self {
        Self {
            window: (2.0, 200.0),
            late_from: 10.0,
            theta_erg: 0.1,
            zero_sigmas: 2.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PhaseReport {
    pub label: PhaseLabel,
    pub entropy_fit: LogFit,
    pub ergotropy_fit: LogFit,
    pub sigma_fit: LogFit,
    pub late_ergotropy: f64,
    pub erg_threshold: f64,
    pub config: ClassifyConfig,
    pub diagnostics: Vec<String>,
}

/// Decision rule on the dynamical signatures: vanishing late-time local
/// ergotropy means ERG; otherwise a flat block entropy means AL; a growing
/// entropy with decreasing ergotropy means MBL.
pub fn classify_phase(stats: &TimeSeriesStats, disorder: f64, j_perp: f64, cfg: &ClassifyConfig) -> Result<PhaseReport> {
    let times = &stats.times;
    let fit = |obs| fit_log_slope(times, &stats.get(obs)?.mean, cfg.window);
    let entropy_fit = fit(Observable::EntropyBlock)?;
    let ergotropy_fit = fit(Observable::ErgotropyLocal)?;
    let sigma_fit = fit(Observable::Sigma)?;
    let late_ergotropy = stats.late_time_mean(Observable::ErgotropyLocal, cfg.late_from)?;
    let erg_threshold = cfg.theta_erg * (0.5 * disorder).max(j_perp.abs());
    let mut diagnostics = Vec::new();
    let label = if late_ergotropy < erg_threshold {
        PhaseLabel::Erg
    } else if entropy_fit.consistent_with_zero(cfg.zero_sigmas) {
        PhaseLabel::Al
    } else if entropy_fit.slope > 0.0 && ergotropy_fit.slope < 0.0 {
        PhaseLabel::Mbl
    } else {
        diagnostics.push(format!(
            "entropy slope {:.3e} +- {:.1e} with ergotropy slope {:.3e} +- {:.1e} fits no phase",
            entropy_fit.slope, entropy_fit.stderr, ergotropy_fit.slope, ergotropy_fit.stderr
        ));
        PhaseLabel::Undetermined
    };
    if label == PhaseLabel::Mbl && !(ergotropy_fit.slope.abs() > cfg.zero_sigmas * ergotropy_fit.stderr) {
        diagnostics.push("ergotropy decrease is within the zero-slope band".into());
    }
    Ok(PhaseReport {
        label,
        entropy_fit,
        ergotropy_fit,
        sigma_fit,
        late_ergotropy,
        erg_threshold,
        config: *cfg,
        diagnostics,
    })
}
