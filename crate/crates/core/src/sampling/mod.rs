//! Geodesically symmetric distributions.
//!
//! A [`SymmetricSampler`] draws a tangent vector at its center from a law
//! that is invariant under negation and pushes it through `Exp`. Since the
//! geodesic symmetry `s_mu` is negation in normal coordinates at `mu`, every
//! sampler is geodesically symmetric about its declared center by
//! construction.

pub mod rng;
mod scalar;

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::{ChiSquared, Distribution, StandardNormal, StudentT};
use schemars::JsonSchema;
use serde::{Deserialize, Serialize};
use statrs::distribution::{ChiSquared as ChiSquaredDist, ContinuousCDF, StudentsT};

use crate::error::{domain, validation, Result};
use crate::linalg::sym_eigen;
use crate::manifold::{Manifold, Point, Space};

pub use rng::{stream, stream_for, stream_id, Stream};
pub use scalar::{
    chernoff_chisq_bound, integrate, loglog_survival, loglog_tail_quantile, moment_via_tail, sign_probability_check,
    wilson_interval, Z95,
};

/// Distribution of the geodesic radius `d(X, mu)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize, JsonSchema)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum RadialLaw {
    /// `scale * sqrt(chi2_df)`.
    Chi {
        df: f64,
        #[serde(default = "one")]
        scale: f64,
    },
    /// Survival `e / (t ln t)` beyond `t = e`; infinite first moment.
    LoglogTail,
    /// Survival `min(1, t^{-index})`.
    Pareto { index: f64 },
    /// `|T|` for a Student t variable with `df` degrees of freedom.
    StudentRadius { df: f64 },
}

fn one() -> f64 {
    1.0
}

impl RadialLaw {
    pub fn validate(&self) -> Result<()> {
        let ok = match *self {
            RadialLaw::Chi { df, scale } => df >= 1.0 && df.is_finite() && scale >= 0.0 && scale.is_finite(),
            RadialLaw::LoglogTail => true,
            RadialLaw::Pareto { index } => index > 0.0 && index.is_finite(),
            RadialLaw::StudentRadius { df } => df > 0.0 && df.is_finite(),
        };
        if ok {
            Ok(())
        } else {
            Err(validation(format!("invalid radial law parameters: {self:?}")))
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            RadialLaw::Chi { .. } => "chi",
            RadialLaw::LoglogTail => "loglog_tail",
            RadialLaw::Pareto { .. } => "pareto",
            RadialLaw::StudentRadius { .. } => "student_radius",
        }
    }

    /// `P(R > t)`.
    pub fn survival(&self, t: f64) -> f64 {
        if t < 0.0 {
            return 1.0;
        }
        match *self {
            RadialLaw::Chi { df, scale } => {
                if scale == 0.0 {
                    return 0.0;
                }
                let x = (t / scale).powi(2);
                ChiSquaredDist::new(df).map(|c| c.sf(x)).unwrap_or(f64::NAN)
            }
            RadialLaw::LoglogTail => loglog_survival(t),
            RadialLaw::Pareto { index } => {
                if t <= 1.0 {
                    1.0
                } else {
                    t.powf(-index)
                }
            }
            RadialLaw::StudentRadius { df } => {
                StudentsT::new(0.0, 1.0, df).map(|s| 2.0 * s.sf(t)).unwrap_or(f64::NAN).min(1.0)
            }
        }
    }

    pub fn moments(&self) -> MomentFlags {
        match *self {
            RadialLaw::Chi { .. } => MomentFlags { first: true, second: true },
            RadialLaw::LoglogTail => MomentFlags { first: false, second: false },
            RadialLaw::Pareto { index } => MomentFlags { first: index > 1.0, second: index > 2.0 },
            RadialLaw::StudentRadius { df } => MomentFlags { first: df > 1.0, second: df > 2.0 },
        }
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match *self {
            RadialLaw::Chi { df, scale } => {
                let c = ChiSquared::new(df).expect("validated");
                scale * c.sample(rng).sqrt()
            }
            RadialLaw::LoglogTail => {
                let u = 1.0 - rng.random::<f64>();
                loglog_tail_quantile(u).expect("u in (0, 1]")
            }
            RadialLaw::Pareto { index } => {
                let u = 1.0 - rng.random::<f64>();
                (-u.ln() / index).exp()
            }
            RadialLaw::StudentRadius { df } => {
                let s = StudentT::new(df).expect("validated");
                s.sample(rng).abs()
            }
        }
    }
}

/// Declared finiteness of `E[d(X, mu)]` and `E[d^2(X, mu)]`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct MomentFlags {
    pub first: bool,
    pub second: bool,
}

/// Law of `Log_mu(X)` in orthonormal coordinates.
#[derive(Clone, Debug, PartialEq)]
pub enum TangentLaw {
    /// Centered Gaussian with the given (positive semidefinite) covariance.
    Gaussian { covariance: DMatrix<f64> },
    /// Radius from a [`RadialLaw`] times a uniform unit direction.
    Radial(RadialLaw),
}

/// A distribution on a space, geodesically symmetric about `center`.
#[derive(Clone, Debug)]
pub struct SymmetricSampler {
    space: Space,
    center: Point,
    law: TangentLaw,
    sqrt_cov: Option<DMatrix<f64>>,
    isotropic_scale: Option<f64>,
}

impl SymmetricSampler {
    pub fn new(space: Space, center: Point, law: TangentLaw) -> Result<Self> {
        space.check_point(&center)?;
        let k = space.dim();
        let (sqrt_cov, isotropic_scale) = match &law {
            TangentLaw::Gaussian { covariance } => {
                if covariance.shape() != (k, k) {
                    return Err(domain(format!("covariance must be {k}x{k}")));
                }
                if covariance.iter().any(|c| !c.is_finite()) {
                    return Err(validation("covariance has non-finite entries"));
                }
                if (covariance - covariance.transpose()).amax() > 1e-12 * (1.0 + covariance.amax()) {
                    return Err(validation("covariance is not symmetric"));
                }
                let (q, w) = sym_eigen(covariance);
                if w.min() < -1e-12 * (1.0 + w.amax()) {
                    return Err(validation("covariance is not positive semidefinite"));
                }
                let root = &q * DMatrix::from_diagonal(&w.map(|l| l.max(0.0).sqrt())) * q.transpose();
                let s2 = covariance[(0, 0)];
                let iso = (*covariance == DMatrix::identity(k, k) * s2).then(|| s2.sqrt());
                (Some(root), iso)
            }
            TangentLaw::Radial(r) => {
                r.validate()?;
                (None, None)
            }
        };
        Ok(SymmetricSampler { space, center, law, sqrt_cov, isotropic_scale })
    }

    /// Centered Gaussian `N(0, sigma^2 I)` in orthonormal coordinates.
    pub fn isotropic_gaussian(space: Space, center: Point, sigma: f64) -> Result<Self> {
        let k = space.dim();
        Self::new(space, center, TangentLaw::Gaussian { covariance: DMatrix::identity(k, k) * (sigma * sigma) })
    }

    pub fn radial(space: Space, center: Point, law: RadialLaw) -> Result<Self> {
        Self::new(space, center, TangentLaw::Radial(law))
    }

    pub fn space(&self) -> &Space {
        &self.space
    }

    pub fn center(&self) -> &Point {
        &self.center
    }

    pub fn law(&self) -> &TangentLaw {
        &self.law
    }

    /// Radial law of `d(X, mu)` when it has a closed form.
    pub fn radial_law(&self) -> Option<RadialLaw> {
        match &self.law {
            TangentLaw::Radial(r) => Some(r.clone()),
            TangentLaw::Gaussian { .. } => {
                self.isotropic_scale.map(|scale| RadialLaw::Chi { df: self.space.dim() as f64, scale })
            }
        }
    }

    /// Analytic `P(d(X, mu) > t)`, when available.
    pub fn tail(&self, t: f64) -> Option<f64> {
        self.radial_law().map(|r| r.survival(t))
    }

    pub fn moments(&self) -> MomentFlags {
        match &self.law {
            TangentLaw::Gaussian { .. } => MomentFlags { first: true, second: true },
            TangentLaw::Radial(r) => r.moments(),
        }
    }

    /// A draw of `Log_mu(X)` in orthonormal coordinates.
    pub fn sample_coords<R: Rng + ?Sized>(&self, rng: &mut R) -> DVector<f64> {
        let k = self.space.dim();
        let z = DVector::from_fn(k, |_, _| rng.sample::<f64, _>(StandardNormal));
        match &self.law {
            TangentLaw::Gaussian { .. } => self.sqrt_cov.as_ref().expect("gaussian root") * z,
            TangentLaw::Radial(r) => {
                let norm = z.norm();
                let dir =
                    if norm > 0.0 { z / norm } else { DVector::from_fn(k, |i, _| if i == 0 { 1.0 } else { 0.0 }) };
                dir * r.sample(rng)
            }
        }
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Result<Point> {
        let z = self.sample_coords(rng);
        self.space.exp_coords(&self.center, &z)
    }

    pub fn sample_n<R: Rng + ?Sized>(&self, rng: &mut R, n: usize) -> Result<Vec<Point>> {
        (0..n).map(|_| self.sample(rng)).collect()
    }
}

/// Replace points farther than `level` from `center` by `center`.
#[derive(Clone, Debug)]
pub struct TruncationScheme {
    pub level: f64,
    pub center: Point,
}

impl TruncationScheme {
    pub fn new(level: f64, center: Point) -> Result<Self> {
        if !(level > 0.0) {
            return Err(domain(format!("truncation level must be positive, got {level}")));
        }
        Ok(TruncationScheme { level, center })
    }
}

/// `x` if `d(x, mu) <= level`, otherwise `mu`.
pub fn truncate(scheme: &TruncationScheme, space: &Space, x: &Point) -> Result<Point> {
    if space.distance(x, &scheme.center)? <= scheme.level {
        Ok(x.clone())
    } else {
        Ok(scheme.center.clone())
    }
}

/// `<v, Log_mu(X)>` for `n` draws, with `v` a unit vector in orthonormal
/// coordinates at the center.
pub fn sample_projections<R: Rng + ?Sized>(
    sampler: &SymmetricSampler,
    direction: &DVector<f64>,
    n: usize,
    rng: &mut R,
) -> Result<Vec<f64>> {
    let space = sampler.space();
    if direction.len() != space.dim() {
        return Err(domain("direction has the wrong dimension"));
    }
    let v = direction / direction.norm();
    (0..n)
        .map(|_| {
            let x = sampler.sample(rng)?;
            Ok(space.log_coords(sampler.center(), &x)?.dot(&v))
        })
        .collect()
}

#[derive(Clone, Debug, PartialEq)]
pub struct TailEstimate {
    pub level: f64,
    /// `level * P(d(X, mu) > level)`.
    pub value: f64,
    pub lower: f64,
    pub upper: f64,
    /// Whether `value` is the sampler's analytic tail.
    pub analytic: bool,
}

/// `n P(d(X, mu) > n)` at each level, from the analytic tail when the sampler
/// has one and otherwise from `samples` draws with a 95% Wilson interval.
pub fn empirical_tail<R: Rng + ?Sized>(
    sampler: &SymmetricSampler,
    levels: &[f64],
    samples: usize,
    rng: &mut R,
) -> Result<Vec<TailEstimate>> {
    if levels.is_empty() || levels.iter().any(|l| !(*l > 0.0)) || levels.windows(2).any(|w| w[1] <= w[0]) {
        return Err(domain("tail levels must be positive and strictly increasing"));
    }
    if sampler.radial_law().is_some() {
        return Ok(levels
            .iter()
            .map(|&n| {
                let v = n * sampler.tail(n).expect("analytic tail");
                TailEstimate { level: n, value: v, lower: v, upper: v, analytic: true }
            })
            .collect());
    }
    if samples < 10_000 {
        return Err(domain(format!("empirical tail needs at least 10000 samples, got {samples}")));
    }
    let space = sampler.space();
    let mut radii = Vec::with_capacity(samples);
    for _ in 0..samples {
        let x = sampler.sample(rng)?;
        radii.push(space.distance(&x, sampler.center())?);
    }
    Ok(levels
        .iter()
        .map(|&n| {
            let k = radii.iter().filter(|r| **r > n).count();
            let (lo, hi) = wilson_interval(k, samples, Z95);
            TailEstimate {
                level: n,
                value: n * k as f64 / samples as f64,
                lower: n * lo,
                upper: n * hi,
                analytic: false,
            }
        })
        .collect())
}
