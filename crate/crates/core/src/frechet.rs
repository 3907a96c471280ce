//! Sample Fréchet mean and the inequalities it satisfies.
//!
//! The mean `argmin_m sum_i d^2(x_i, m)` is found by a safeguarded flow
//! `m <- Exp_m(t H^{-1} sum_i Log_m(x_i))` started at `x_0`, where `H` is the
//! Hessian of `m -> sum_i d^2(m, x_i) / 2` in orthonormal coordinates. On a
//! flat space `H = n I` and this is the Karcher flow `Exp_m((1/n) sum Log)`.
//! Under negative curvature `H` corrects the Karcher step for the stiffness
//! that far-away points add across their own direction (a point at distance
//! `r` contributes `r coth r` there), which would otherwise force step sizes
//! of order `n / r` for heavy-tailed samples. The step `t` starts at the
//! configured size and is halved while the objective increases.

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use schemars::JsonSchema;
use serde::{Deserialize, Serialize};

use crate::error::{domain, Error, Result};
use crate::manifold::{Manifold, Point, Space};
use crate::sampling::{stream_for, SymmetricSampler};

/// Slack in `lhs <= rhs` for the shrinkage inequality.
pub const SHRINKAGE_TOL: f64 = 1e-8;
/// Margin above which the shrinkage inequality counts as strict.
pub const STRICT_MARGIN: f64 = 1e-6;
/// Consecutive accepted steps without objective decrease before the solver
/// reports a stall.
pub const STALL_WINDOW: usize = 8;
/// Newton steps below this many units of point resolution cannot move the
/// iterate, see [`Manifold::resolution_ratio`].
pub const RESOLUTION_STALL: f64 = 8.0;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize, JsonSchema)]
#[serde(deny_unknown_fields, default)]
pub struct SolverConfig {
    /// Bound on the averaged gradient norm `|(1/n) sum Log_m(x_i)|`.
    pub gradient_tolerance: f64,
    pub max_iterations: usize,
    /// Initial step size in `(0, 1]`.
    pub step_size: f64,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig { gradient_tolerance: 1e-9, max_iterations: 200, step_size: 1.0 }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.gradient_tolerance > 0.0) {
            return Err(domain("gradient tolerance must be positive"));
        }
        if self.max_iterations < 1 {
            return Err(domain("max_iterations must be at least 1"));
        }
        if !(self.step_size > 0.0 && self.step_size <= 1.0) {
            return Err(domain("step size must lie in (0, 1]"));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct FrechetResult {
    pub mean: Point,
    /// `|sum_i Log_mean(x_i)|` at the returned mean.
    pub gradient_norm: f64,
    pub iterations: usize,
    pub converged: bool,
    /// The iteration stopped because no representable step decreased the
    /// objective further while the gradient was still above tolerance
    /// (round-off floor of samples with very large distances).
    pub stalled: bool,
}

struct State {
    point: Point,
    grad: DVector<f64>,
    hess: DMatrix<f64>,
    objective: f64,
}

fn evaluate(space: &Space, m: Point, points: &[Point]) -> Result<State> {
    let k = space.dim();
    let mut grad = DVector::zeros(k);
    let mut hess = DMatrix::zeros(k, k);
    let mut objective = 0.0;
    for x in points {
        let (v, h) = space.log_and_hessian(&m, x)?;
        objective += v.norm_squared();
        grad += &v;
        hess += h;
    }
    Ok(State { point: m, grad, hess, objective })
}

fn objective(space: &Space, m: &Point, points: &[Point]) -> Result<f64> {
    points.iter().map(|x| space.distance(m, x).map(|d| d * d)).sum()
}

fn newton_direction(state: &State) -> DVector<f64> {
    // H is symmetric positive definite with H >= n I on a Hadamard manifold
    match state.hess.clone().cholesky() {
        Some(c) => c.solve(&state.grad),
        None => &state.grad / state.hess.nrows().max(1) as f64,
    }
}

/// Sample Fréchet mean of `points`, initialised at `points[0]`.
pub fn frechet_mean(space: &Space, points: &[Point], config: &SolverConfig) -> Result<FrechetResult> {
    config.validate()?;
    if points.is_empty() {
        return Err(domain("the Fréchet mean of an empty sample is undefined"));
    }
    for x in points {
        space.check_point(x)?;
    }
    let n = points.len() as f64;
    let mut state = evaluate(space, points[0].clone(), points)?;
    let mut step = config.step_size;
    let mut iterations = 0;
    let mut stalled = false;
    let mut best = state.objective;
    let mut flat_steps = 0;
    while state.grad.norm() / n > config.gradient_tolerance && iterations < config.max_iterations {
        iterations += 1;
        let dir = newton_direction(&state);
        if space.resolution_ratio(&state.point, &dir)? <= RESOLUTION_STALL {
            stalled = true;
            break;
        }
        let mut t = (2.0 * step).min(config.step_size);
        let mut accepted = None;
        for _ in 0..64 {
            let cand = space.exp_coords(&state.point, &(&dir * t))?;
            let f = objective(space, &cand, points)?;
            if f <= state.objective * (1.0 + 1e-13) {
                accepted = Some(cand);
                break;
            }
            t *= 0.5;
        }
        let Some(next) = accepted else {
            stalled = true;
            break;
        };
        let moved = (&dir * t).norm();
        state = evaluate(space, next, points)?;
        step = t;
        if moved <= 1e-13 {
            stalled = state.grad.norm() / n > config.gradient_tolerance;
            break;
        }
        // Newton converges in a few steps once the objective stops moving;
        // a long run without progress means the representation cannot
        // resolve the mean any further
        if state.objective < best * (1.0 - 1e-12) {
            best = state.objective;
            flat_steps = 0;
        } else {
            flat_steps += 1;
            if flat_steps >= STALL_WINDOW {
                stalled = state.grad.norm() / n > config.gradient_tolerance;
                break;
            }
        }
    }
    let gradient_norm = state.grad.norm();
    let converged = gradient_norm / n <= config.gradient_tolerance;
    Ok(FrechetResult { mean: state.point, gradient_norm, iterations, converged, stalled: stalled && !converged })
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ShrinkageCheck {
    /// `|Log_x(mu_n)|_x`.
    pub lhs: f64,
    /// `|(1/n) sum Log_x(x_i)|_x`.
    pub rhs: f64,
    pub holds: bool,
    pub strict: bool,
}

/// Compares the Fréchet mean seen from `base` with the tangent average at
/// `base`: the mean is never farther than the average.
pub fn shrinkage_check(space: &Space, base: &Point, points: &[Point]) -> Result<ShrinkageCheck> {
    shrinkage_check_with(space, base, points, SHRINKAGE_TOL)
}

pub(crate) fn shrinkage_check_with(space: &Space, base: &Point, points: &[Point], tol: f64) -> Result<ShrinkageCheck> {
    let res = frechet_mean(space, points, &SolverConfig::default())?;
    if !res.converged {
        return Err(Error::Precondition(format!(
            "Fréchet mean did not converge (averaged gradient {:e} after {} iterations)",
            res.gradient_norm / points.len() as f64,
            res.iterations
        )));
    }
    let lhs = space.log_coords(base, &res.mean)?.norm();
    let mut avg = DVector::zeros(space.dim());
    for x in points {
        avg += space.log_coords(base, x)?;
    }
    let rhs = (avg / points.len() as f64).norm();
    Ok(ShrinkageCheck { lhs, rhs, holds: lhs <= rhs + tol, strict: rhs - lhs > STRICT_MARGIN })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize, JsonSchema)]
pub struct ModulationEstimate {
    pub n: usize,
    /// Estimate of `n E[d^2(mu_n, mu)] / E[d^2(X, mu)]`.
    pub m_hat: f64,
    pub standard_error: f64,
    pub replications: usize,
}

/// Per-replication pair `(n d^2(mu_n, mu), mean_i d^2(X_i, mu))`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ModulationPair {
    pub numerator: f64,
    pub denominator: f64,
    pub converged: bool,
}

/// One replication of the modulation study from its own stream.
pub fn modulation_replication(
    sampler: &SymmetricSampler,
    n: usize,
    seed: u64,
    stream: &[u64],
    config: &SolverConfig,
) -> Result<ModulationPair> {
    let space = sampler.space();
    let mu = sampler.center();
    let mut rng = stream_for(seed, stream);
    let points = sampler.sample_n(&mut rng, n)?;
    let mut denom = 0.0;
    for x in &points {
        denom += space.distance(x, mu)?.powi(2);
    }
    let res = frechet_mean(space, &points, config)?;
    let d = space.distance(&res.mean, mu)?;
    Ok(ModulationPair { numerator: n as f64 * d * d, denominator: denom / n as f64, converged: res.converged })
}

/// Ratio estimate `sum a_r / sum b_r` with a replication jackknife standard
/// error.
pub fn ratio_jackknife(pairs: &[ModulationPair]) -> (f64, f64) {
    let r = pairs.len();
    let a: f64 = pairs.iter().map(|p| p.numerator).sum();
    let b: f64 = pairs.iter().map(|p| p.denominator).sum();
    let m_hat = if b > 0.0 { a / b } else { 1.0 };
    if r < 2 {
        return (m_hat, 0.0);
    }
    let loo: Vec<f64> = pairs
        .iter()
        .map(|p| {
            let bb = b - p.denominator;
            if bb > 0.0 {
                (a - p.numerator) / bb
            } else {
                m_hat
            }
        })
        .collect();
    let mean = loo.iter().sum::<f64>() / r as f64;
    let ss: f64 = loo.iter().map(|x| (x - mean).powi(2)).sum();
    (m_hat, ((r as f64 - 1.0) / r as f64 * ss).sqrt())
}

/// Monte Carlo estimate of the variance modulation `m_n`.
///
/// Replication `r` draws from stream `(n, r)` under `seed`, so the result
/// does not depend on how replications are spread over threads.
pub fn modulation_estimate(
    sampler: &SymmetricSampler,
    n: usize,
    replications: usize,
    seed: u64,
    config: &SolverConfig,
) -> Result<ModulationEstimate> {
    modulation_estimate_in(sampler, n, replications, seed, &[], config)
}

pub(crate) fn modulation_estimate_in(
    sampler: &SymmetricSampler,
    n: usize,
    replications: usize,
    seed: u64,
    prefix: &[u64],
    config: &SolverConfig,
) -> Result<ModulationEstimate> {
    if !sampler.moments().second {
        return Err(Error::Precondition("modulation needs a sampler with finite variance".into()));
    }
    if n < 1 {
        return Err(domain("sample size must be at least 1"));
    }
    if replications < 2 {
        return Err(domain("at least two replications are needed"));
    }
    let pairs = (0..replications)
        .into_par_iter()
        .map(|r| {
            let mut stream = prefix.to_vec();
            stream.extend([n as u64, r as u64]);
            modulation_replication(sampler, n, seed, &stream, config)
        })
        .collect::<Result<Vec<_>>>()?;
    let (m_hat, standard_error) = ratio_jackknife(&pairs);
    Ok(ModulationEstimate { n, m_hat, standard_error, replications })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn single_point_is_its_own_mean() {
        let s = Space::hyperbolic(2);
        let x = s.exp_coords(&s.origin(), &DVector::from_vec(vec![1.0, 2.0])).unwrap();
        let r = frechet_mean(&s, std::slice::from_ref(&x), &SolverConfig::default()).unwrap();
        assert_eq!(r.mean, x);
        assert_eq!(r.iterations, 0);
        assert!(r.converged);
    }

    #[test]
    fn euclidean_mean_is_arithmetic() {
        let s = Space::euclidean(2);
        let pts: Vec<Point> =
            [[1.0, 2.0], [3.0, -1.0], [-0.5, 0.5], [7.0, 1.0]].iter().map(|p| Point::euclidean_slice(p)).collect();
        let r = frechet_mean(&s, &pts, &SolverConfig::default()).unwrap();
        let m = r.mean.as_euclidean().unwrap();
        assert_relative_eq!(m[0], 2.625, epsilon = 1e-12);
        assert_relative_eq!(m[1], 0.625, epsilon = 1e-12);
    }

    #[test]
    fn spd_mean_of_matrix_and_inverse_is_identity() {
        let s = Space::spd(3);
        let a = DMatrix::from_row_slice(3, 3, &[2.0, 0.3, 0.1, 0.3, 1.5, -0.2, 0.1, -0.2, 0.8]);
        let pa = Point::spd(&a).unwrap();
        let pinv = Point::spd(&a.clone().try_inverse().unwrap()).unwrap();
        let r = frechet_mean(&s, &[pa.clone(), pinv.clone()], &SolverConfig::default()).unwrap();
        assert!(r.converged);
        let mid = s.geodesic(&pa, &pinv, 0.5).unwrap();
        assert!(s.distance(&r.mean, &s.origin()).unwrap() < 1e-7);
        assert!(s.distance(&mid, &s.origin()).unwrap() < 1e-7);
    }

    #[test]
    fn empty_sample_and_bad_config_are_rejected() {
        let s = Space::euclidean(1);
        assert!(matches!(frechet_mean(&s, &[], &SolverConfig::default()), Err(Error::Domain(_))));
        let bad = SolverConfig { step_size: 1.5, ..SolverConfig::default() };
        assert!(frechet_mean(&s, &[s.origin()], &bad).is_err());
    }

    #[test]
    fn converges_with_a_far_outlier() {
        let s = Space::hyperbolic(2);
        let mut pts: Vec<Point> = (0..50)
            .map(|i| {
                s.exp_coords(&s.origin(), &DVector::from_vec(vec![(i as f64).sin(), (i as f64).cos() * 0.5])).unwrap()
            })
            .collect();
        pts.push(s.exp_coords(&s.origin(), &DVector::from_vec(vec![1e6, 0.0])).unwrap());
        let r = frechet_mean(&s, &pts, &SolverConfig::default()).unwrap();
        // the mean sits on the outlier's ray where 50 s = 1e6 - s, up to the
        // spread of the cluster
        let radius = s.distance(&r.mean, &s.origin()).unwrap();
        assert!((radius - 1e6 / 51.0).abs() < 1.0, "{r:?}");
        assert!(r.converged || r.stalled);
    }

    #[test]
    fn shrinkage_is_equality_in_flat_space() {
        let s = Space::euclidean(3);
        let pts: Vec<Point> = (0..5).map(|i| Point::euclidean_slice(&[i as f64, 1.0 - i as f64, 0.5])).collect();
        let c = shrinkage_check(&s, &Point::euclidean_slice(&[2.0, 0.0, -1.0]), &pts).unwrap();
        assert!(c.holds && !c.strict);
        assert_relative_eq!(c.lhs, c.rhs, epsilon = 1e-10);
    }

    #[test]
    fn jackknife_of_proportional_pairs_is_exact() {
        let pairs: Vec<ModulationPair> = (1..=10)
            .map(|i| ModulationPair { numerator: 0.5 * i as f64, denominator: i as f64, converged: true })
            .collect();
        let (m, se) = ratio_jackknife(&pairs);
        assert_relative_eq!(m, 0.5);
        assert!(se < 1e-15);
    }

    #[test]
    fn modulation_at_n_one_is_one() {
        let s = Space::hyperbolic(2);
        let g = SymmetricSampler::isotropic_gaussian(s.clone(), s.origin(), 1.0).unwrap();
        let m = modulation_estimate(&g, 1, 20, 3, &SolverConfig::default()).unwrap();
        assert_relative_eq!(m.m_hat, 1.0, epsilon = 1e-12);
    }

    #[test]
    fn modulation_rejects_infinite_variance() {
        let s = Space::euclidean(2);
        let p =
            SymmetricSampler::radial(s.clone(), s.origin(), crate::sampling::RadialLaw::Pareto { index: 1.5 }).unwrap();
        let r = modulation_estimate(&p, 10, 10, 0, &SolverConfig::default());
        assert!(matches!(r, Err(Error::Precondition(_))));
    }
}
