//! Maximization of extracted work over `U_S = U_AL * exp(-iA)`: a
//! trust-region Gaussian-process search with expected improvement, a pattern
//! search fallback, and a brute-force oracle for validation.

mod gp;
mod oracle;
mod unitary;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

pub use gp::{expected_improvement, GaussianProcess};
pub use oracle::{brute_force_local_ergotropy, OracleConfig};
pub use unitary::{
    build_u1, build_u_al, generator, generator_labels, parameter_count, pauli, pauli_string,
    LocalUnitaryParams, BOX_HALF_WIDTH, UNITARITY_TOL,
};

use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OptimizerConfig {
    /// Total objective evaluations per call.
    pub budget: usize,
    /// Points evaluated before the surrogate is used, including the origin
    /// and any warm start.
    pub initial_design: usize,
    pub seed: u64,
    /// Random candidates scored by expected improvement per step.
    pub candidates: usize,
    /// Best candidates refined by pattern search on the acquisition.
    pub restarts: usize,
    /// Nearest evaluated points used to fit the surrogate.
    pub max_gp_points: usize,
    /// Starting half-width of the trust region.
    pub initial_radius: f64,
    /// Take a pattern-search step when the surrogate cannot be fitted;
    /// otherwise sample the trust region at random.
    pub pattern_fallback: bool,
}

impl Default for OptimizerConfig {
    fn default() -> Self {
        Self {
            budget: 100,
            initial_design: 20,
            seed: 0x0e76_0b5e,
            candidates: 256,
            restarts: 1,
            max_gp_points: 30,
            initial_radius: 0.5,
            pattern_fallback: true,
        }
    }
}

impl OptimizerConfig {
    pub fn validate(&self) -> Result<()> {
        if self.budget < 1 {
            return Err(Error::InvalidParameter("optimizer budget must be at least 1".into()));
        }
        if self.budget > 1 && self.budget < self.initial_design + 1 {
            return Err(Error::InvalidParameter(format!(
                "budget {} must exceed the initial design size {}",
                self.budget, self.initial_design
            )));
        }
        if self.candidates == 0 || self.max_gp_points < 2 {
            return Err(Error::InvalidParameter(
                "candidates and max_gp_points must be positive".into(),
            ));
        }
        if !(self.initial_radius > 0.0 && self.initial_radius <= BOX_HALF_WIDTH) {
            return Err(Error::InvalidParameter(format!(
                "initial radius {} outside (0, pi]",
                self.initial_radius
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Evaluation {
    pub params: Vec<f64>,
    pub value: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct OptimizerOutcome {
    pub best_params: Vec<f64>,
    pub best_value: f64,
    /// Value at the origin, always the first evaluation.
    pub baseline: f64,
    pub history: Vec<Evaluation>,
    /// Steps where the surrogate could not be fitted.
    pub fallback_steps: usize,
}

impl OptimizerOutcome {
    pub fn evaluations(&self) -> usize {
        self.history.len()
    }

    /// 1-based index of the first evaluation within `tol` of the best value.
    pub fn evaluations_to_incumbent(&self, tol: f64) -> usize {
        self.history
            .iter()
            .position(|e| e.value >= self.best_value - tol)
            .map_or(self.history.len(), |i| i + 1)
    }
}

/// Initial-design augmentation: the previous step's optimum, if any, is
/// evaluated right after the origin.
pub fn warm_start_policy(previous: Option<&[f64]>) -> Option<Vec<f64>> {
    let p = previous?;
    if p.iter().all(|&x| x == 0.0) || p.iter().any(|x| !x.is_finite()) {
        return None;
    }
    Some(p.iter().map(|x| x.clamp(-BOX_HALF_WIDTH, BOX_HALF_WIDTH)).collect())
}

/// Van der Corput radical inverse of `i` in `base`.
fn radical_inverse(mut i: u64, base: u64) -> f64 {
    let mut inv = 1.0 / base as f64;
    let mut out = 0.0;
    while i > 0 {
        out += (i % base) as f64 * inv;
        i /= base;
        inv /= base as f64;
    }
    out
}

const PRIMES: [u64; 15] = [2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37, 41, 43, 47];

/// `i`-th point of a randomly shifted Halton sequence in `[0, 1)^d`.
fn halton(i: u64, shift: &[f64]) -> Vec<f64> {
    shift
        .iter()
        .zip(PRIMES)
        .map(|(s, p)| (radical_inverse(i, p) + s).fract())
        .collect()
}

struct Search<'a, F> {
    objective: F,
    cfg: &'a OptimizerConfig,
    history: Vec<Evaluation>,
    best: usize,
}

impl<F: FnMut(&[f64]) -> f64> Search<'_, F> {
    fn full(&self) -> bool {
        self.history.len() >= self.cfg.budget
    }

    fn best_value(&self) -> f64 {
        self.history[self.best].value
    }

    fn best_params(&self) -> &[f64] {
        &self.history[self.best].params
    }

    fn evaluate(&mut self, params: Vec<f64>) -> Result<f64> {
        let value = (self.objective)(&params);
        if !value.is_finite() {
            return Err(Error::Numerical(format!("objective returned {value}")));
        }
        if !self.history.is_empty() && value > self.best_value() {
            self.best = self.history.len();
        }
        self.history.push(Evaluation { params, value });
        Ok(value)
    }

    fn seen(&self, p: &[f64]) -> bool {
        self.history
            .iter()
            .any(|e| e.params.iter().zip(p).all(|(a, b)| (a - b).abs() < 1e-12))
    }
}

fn clip(x: f64) -> f64 {
    x.clamp(-BOX_HALF_WIDTH, BOX_HALF_WIDTH)
}

/// Compass search on the acquisition inside the trust region.
fn refine_acquisition(
    score: &dyn Fn(&[f64]) -> f64,
    start: Vec<f64>,
    center: &[f64],
    radius: f64,
) -> (Vec<f64>, f64) {
    let mut x = start;
    let mut fx = score(&x);
    let mut step = radius / 4.0;
    for _ in 0..3 {
        {
            for k in 0..x.len() {
                for sign in [1.0, -1.0] {
                    let v = x[k] + sign * step;
                    if (v - center[k]).abs() > radius || v.abs() > BOX_HALF_WIDTH {
                        continue;
                    }
                    let old = x[k];
                    x[k] = v;
                    let f = score(&x);
                    if f > fx {
                        fx = f;
                        break;
                    }
                    x[k] = old;
                }
            }
        }
        step /= 2.0;
    }
    (x, fx)
}

/// Trust-region state shared by the surrogate and fallback steps.
struct Region {
    radius: f64,
    successes: usize,
    failures: usize,
    // fallback compass search position
    direction: usize,
}

const MIN_RADIUS: f64 = 1e-4;

impl Region {
    fn update(&mut self, improved: bool) {
        if improved {
            self.successes += 1;
            self.failures = 0;
        } else {
            self.failures += 1;
            self.successes = 0;
        }
        if self.successes >= 3 {
            self.radius = (2.0 * self.radius).min(BOX_HALF_WIDTH);
            self.successes = 0;
        } else if self.failures >= 4 {
            self.radius = (0.5 * self.radius).max(MIN_RADIUS);
            self.failures = 0;
        }
    }
}

/// Maximizes `objective` over `[-pi, pi]^dim`.
///
/// The origin is always evaluated first, then the warm start (if any), then a
/// shifted Halton design in the initial trust region. Remaining evaluations
/// come from expected improvement under a Gaussian process fitted to the
/// points nearest the incumbent. The result is a pure function of the
/// objective, `cfg` and `warm_start`.
pub fn optimize<F>(
    objective: F,
    dim: usize,
    cfg: &OptimizerConfig,
    warm_start: Option<&[f64]>,
) -> Result<OptimizerOutcome>
where
    F: FnMut(&[f64]) -> f64,
{
    cfg.validate()?;
    if dim == 0 || dim > PRIMES.len() {
        return Err(Error::InvalidParameter(format!("unsupported dimension {dim}")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut s = Search {
        objective,
        cfg,
        history: Vec::with_capacity(cfg.budget),
        best: 0,
    };
    let baseline = s.evaluate(vec![0.0; dim])?;

    if let Some(w) = warm_start_policy(warm_start) {
        if w.len() != dim {
            return Err(Error::DimensionMismatch {
                expected: dim,
                found: w.len(),
            });
        }
        if !s.full() {
            s.evaluate(w)?;
        }
    }

    let mut region = Region {
        radius: cfg.initial_radius,
        successes: 0,
        failures: 0,
        direction: 0,
    };
    let center = s.best_params().to_vec();
    let shift: Vec<f64> = (0..dim).map(|_| rng.random::<f64>()).collect();
    let mut index = 1u64;
    while s.history.len() < cfg.initial_design.min(cfg.budget) {
        let u = halton(index, &shift);
        index += 1;
        let p: Vec<f64> = center
            .iter()
            .zip(u)
            .map(|(c, u)| clip(c + region.radius * (2.0 * u - 1.0)))
            .collect();
        s.evaluate(p)?;
    }

    let mut fallback_steps = 0;
    let mut length_index: Option<usize> = None;
    let mut step = 0usize;
    while !s.full() {
        let incumbent = s.best_params().to_vec();
        let best_before = s.best_value();
        // full length-scale search every few steps, neighbours of the last
        // choice otherwise
        let grid: Vec<usize> = match length_index {
            Some(g) if step % 5 != 0 => (g.saturating_sub(1)..=(g + 1).min(GaussianProcess::grid_len() - 1)).collect(),
            _ => Vec::new(),
        };
        step += 1;
        let model = fit_local(&s, &incumbent, &grid);
        length_index = model.as_ref().map(|m| m.grid_index());
        let proposal = match model {
            Some(model) => propose(&model, &s, &incumbent, region.radius, &mut rng),
            None => {
                fallback_steps += 1;
                log::debug!("surrogate fit failed; pattern step from incumbent");
                if cfg.pattern_fallback {
                    compass_step(&s, &incumbent, &mut region)
                } else {
                    random_in_region(&incumbent, region.radius, &mut rng)
                }
            }
        };
        let proposal = if s.seen(&proposal) {
            random_in_region(&incumbent, region.radius, &mut rng)
        } else {
            proposal
        };
        let value = s.evaluate(proposal)?;
        region.update(value > best_before + 1e-12 * (1.0 + best_before.abs()));
    }

    let best_value = s.best_value();
    assert!(best_value >= baseline, "optimizer lost the baseline");
    Ok(OptimizerOutcome {
        best_params: s.best_params().to_vec(),
        best_value,
        baseline,
        history: s.history,
        fallback_steps,
    })
}

fn fit_local<F: FnMut(&[f64]) -> f64>(
    s: &Search<'_, F>,
    incumbent: &[f64],
    grid: &[usize],
) -> Option<GaussianProcess> {
    let mut order: Vec<(f64, usize)> = s
        .history
        .iter()
        .enumerate()
        .map(|(i, e)| {
            let d: f64 = e.params.iter().zip(incumbent).map(|(a, b)| (a - b) * (a - b)).sum();
            (d, i)
        })
        .collect();
    order.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
    order.truncate(s.cfg.max_gp_points);
    let x: Vec<Vec<f64>> = order.iter().map(|&(_, i)| s.history[i].params.clone()).collect();
    let y: Vec<f64> = order.iter().map(|&(_, i)| s.history[i].value).collect();
    GaussianProcess::fit_with(&x, &y, grid)
}

fn random_in_region(center: &[f64], radius: f64, rng: &mut ChaCha8Rng) -> Vec<f64> {
    center
        .iter()
        .map(|c| clip(c + radius * (2.0 * rng.random::<f64>() - 1.0)))
        .collect()
}

fn propose<F: FnMut(&[f64]) -> f64>(
    model: &GaussianProcess,
    s: &Search<'_, F>,
    incumbent: &[f64],
    radius: f64,
    rng: &mut ChaCha8Rng,
) -> Vec<f64> {
    let dim = incumbent.len();
    let best = s.best_value();
    let score = |p: &[f64]| {
        let (m, sd) = model.predict(p);
        expected_improvement(m, sd, best)
    };
    // half the candidates move every coordinate, half a sparse subset
    let prob = (4.0 / dim as f64).min(1.0);
    let mut scored: Vec<(f64, Vec<f64>)> = (0..s.cfg.candidates)
        .map(|j| {
            let mut p = incumbent.to_vec();
            let sparse = j % 2 == 1;
            let mut moved = false;
            for x in p.iter_mut() {
                if !sparse || rng.random::<f64>() < prob {
                    *x = clip(*x + radius * (2.0 * rng.random::<f64>() - 1.0));
                    moved = true;
                }
            }
            if !moved {
                let k = rng.random_range(0..dim);
                p[k] = clip(p[k] + radius * (2.0 * rng.random::<f64>() - 1.0));
            }
            (score(&p), p)
        })
        .collect();
    scored.sort_by(|a, b| b.0.total_cmp(&a.0));
    let mut best_point = scored[0].1.clone();
    let mut best_score = scored[0].0;
    for (_, start) in scored.into_iter().take(s.cfg.restarts) {
        let (p, f) = refine_acquisition(&score, start, incumbent, radius);
        if f > best_score {
            best_score = f;
            best_point = p;
        }
    }
    if best_score <= 0.0 {
        // flat acquisition: fall back to the most optimistic prediction
        let ucb = |p: &[f64]| {
            let (m, sd) = model.predict(p);
            m + 2.0 * sd
        };
        best_point = refine_acquisition(&ucb, incumbent.to_vec(), incumbent, radius).0;
    }
    best_point
}

/// Next unseen compass point `incumbent +- radius e_k`, shrinking the radius
/// after a full unsuccessful cycle.
fn compass_step<F: FnMut(&[f64]) -> f64>(
    s: &Search<'_, F>,
    incumbent: &[f64],
    region: &mut Region,
) -> Vec<f64> {
    let dim = incumbent.len();
    for _ in 0..(4 * dim * 20) {
        let k = region.direction % (2 * dim);
        region.direction += 1;
        if k == 2 * dim - 1 {
            region.radius = (0.5 * region.radius).max(MIN_RADIUS);
        }
        let mut p = incumbent.to_vec();
        let sign = if k % 2 == 0 { 1.0 } else { -1.0 };
        p[k / 2] = clip(p[k / 2] + sign * region.radius);
        if !s.seen(&p) {
            return p;
        }
    }
    incumbent.to_vec()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn bowl(center: Vec<f64>, scales: Vec<f64>, top: f64) -> impl Fn(&[f64]) -> f64 {
        move |a: &[f64]| {
            top - a
                .iter()
                .zip(&center)
                .zip(&scales)
                .map(|((x, c), s)| s * (x - c) * (x - c))
                .sum::<f64>()
        }
    }

    #[test]
    fn config_validation() {
        assert!(OptimizerConfig::default().validate().is_ok());
        let mut cfg = OptimizerConfig::default();
        cfg.budget = 0;
        assert!(optimize(|_| 0.0, 15, &cfg, None).is_err());
        cfg.budget = 20;
        assert!(cfg.validate().is_err());
        cfg.budget = 1;
        let out = optimize(|_| 3.0, 15, &cfg, None).unwrap();
        assert_eq!(out.evaluations(), 1);
        assert_eq!(out.best_value, 3.0);
    }

    #[test]
    fn negative_norm_peaks_at_origin() {
        let cfg = OptimizerConfig::default();
        let out = optimize(|a| -a.iter().map(|x| x * x).sum::<f64>(), 15, &cfg, None).unwrap();
        assert_eq!(out.best_value, 0.0);
        assert!(out.best_params.iter().all(|&x| x == 0.0));
        assert_eq!(out.history[0].params, vec![0.0; 15]);
    }

    #[test]
    fn quadratic_bowl_within_five_percent() {
        let center: Vec<f64> = (0..15).map(|i| 0.6 * ((i as f64) * 1.3).sin()).collect();
        let scales: Vec<f64> = (0..15).map(|i| 0.5 + 0.1 * i as f64).collect();
        let top = 1.0;
        let f = bowl(center.clone(), scales.clone(), top);
        let f0 = f(&[0.0; 15]);
        let out = optimize(&f, 15, &OptimizerConfig::default(), None).unwrap();
        assert!(out.evaluations() <= 100);
        assert!(out.best_value >= out.baseline);
        assert!(
            (top - out.best_value).abs() <= 0.05 * top.abs(),
            "best {} (origin {f0})",
            out.best_value
        );
    }

    #[test]
    fn budget_respected_and_deterministic() {
        let f = bowl(vec![0.3; 3], vec![1.0; 3], 0.0);
        let mut cfg = OptimizerConfig::default();
        cfg.budget = 37;
        let a = optimize(&f, 3, &cfg, None).unwrap();
        let b = optimize(&f, 3, &cfg, None).unwrap();
        assert_eq!(a.evaluations(), 37);
        assert_eq!(a, b);
        cfg.seed += 1;
        assert_ne!(optimize(&f, 3, &cfg, None).unwrap().history, a.history);
    }

    #[test]
    fn warm_start_is_second_evaluation() {
        let f = bowl(vec![0.3; 15], vec![1.0; 15], 0.0);
        let warm = vec![0.3; 15];
        let out = optimize(&f, 15, &OptimizerConfig::default(), Some(&warm)).unwrap();
        assert_eq!(out.history[1].params, warm);
        assert_eq!(out.best_value, 0.0);
        assert_eq!(out.evaluations_to_incumbent(0.0), 2);
        assert_eq!(warm_start_policy(Some(&[0.0; 15])), None);
        assert_eq!(warm_start_policy(None), None);
        assert_eq!(warm_start_policy(Some(&[5.0])), Some(vec![BOX_HALF_WIDTH]));
        assert!(optimize(&f, 15, &OptimizerConfig::default(), Some(&[0.1; 3])).is_err());
    }

    #[test]
    fn fallback_without_surrogate() {
        // a constant objective with duplicated evaluations never breaks the loop
        let out = optimize(|_| 1.0, 3, &OptimizerConfig::default(), None).unwrap();
        assert_eq!(out.evaluations(), 100);
        assert_eq!(out.best_value, 1.0);
    }

    #[test]
    fn non_finite_objective_is_an_error() {
        assert!(optimize(|_| f64::NAN, 3, &OptimizerConfig::default(), None).is_err());
    }

    #[test]
    fn halton_is_low_discrepancy() {
        let shift = vec![0.0; 2];
        let pts: Vec<Vec<f64>> = (1..=64).map(|i| halton(i, &shift)).collect();
        assert_eq!(pts[0], vec![0.5, 1.0 / 3.0]);
        let in_quadrant = pts.iter().filter(|p| p[0] < 0.5 && p[1] < 0.5).count();
        assert!((14..=18).contains(&in_quadrant));
    }
}
