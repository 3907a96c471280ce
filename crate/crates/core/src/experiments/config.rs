use std::collections::BTreeSet;
use std::fmt;

use nalgebra::DMatrix;
use schemars::JsonSchema;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::frechet::SolverConfig;
use crate::manifold::{product_space, Euclidean, Manifold, Space};
use crate::sampling::{RadialLaw, SymmetricSampler, TangentLaw};

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize, JsonSchema)]
#[serde(rename_all = "snake_case")]
pub enum Scenario {
    TheoremINonidentical,
    TheoremIiHeavyTail,
    CorollaryFirstMoment,
    Modulation,
    ConversePareto,
}

impl Scenario {
    pub const ALL: [Scenario; 5] = [
        Scenario::TheoremINonidentical,
        Scenario::TheoremIiHeavyTail,
        Scenario::CorollaryFirstMoment,
        Scenario::Modulation,
        Scenario::ConversePareto,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Scenario::TheoremINonidentical => "theorem_i_nonidentical",
            Scenario::TheoremIiHeavyTail => "theorem_ii_heavy_tail",
            Scenario::CorollaryFirstMoment => "corollary_first_moment",
            Scenario::Modulation => "modulation",
            Scenario::ConversePareto => "converse_pareto",
        }
    }

    /// Stable index used in RNG stream coordinates.
    pub fn index(self) -> u64 {
        match self {
            Scenario::TheoremINonidentical => 1,
            Scenario::TheoremIiHeavyTail => 2,
            Scenario::CorollaryFirstMoment => 3,
            Scenario::Modulation => 4,
            Scenario::ConversePareto => 5,
        }
    }

    pub fn description(self) -> &'static str {
        match self {
            Scenario::TheoremINonidentical => {
                "SPD(k), independent non-identical log-normal draws with tangent covariance i^alpha I"
            }
            Scenario::TheoremIiHeavyTail => "i.i.d. radial draws with n P(d > n) -> 0 but infinite first moment",
            Scenario::CorollaryFirstMoment => "i.i.d. radial draws with finite first and infinite second moment",
            Scenario::Modulation => {
                "variance modulation n E[d^2(mu_n, mu)] / E[d^2(X, mu)] for finite-variance samplers"
            }
            Scenario::ConversePareto => "Euclidean space, symmetric tail with n P(|X| > n) >= delta: no convergence",
        }
    }
}

impl fmt::Display for Scenario {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// A space description; `gram` rows default to the identity.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize, JsonSchema)]
#[serde(tag = "family", rename_all = "snake_case", deny_unknown_fields)]
pub enum SpaceConfig {
    Euclidean {
        dim: usize,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        gram: Option<Vec<Vec<f64>>>,
    },
    Hyperbolic {
        dim: usize,
    },
    Spd {
        n: usize,
    },
    Product {
        factors: Vec<SpaceConfig>,
    },
}

fn matrix(rows: &[Vec<f64>], what: &str) -> Result<DMatrix<f64>> {
    let n = rows.len();
    if n == 0 || rows.iter().any(|r| r.len() != n) {
        return Err(Error::Config(format!("{what} must be a non-empty square matrix")));
    }
    Ok(DMatrix::from_fn(n, n, |i, j| rows[i][j]))
}

impl SpaceConfig {
    pub fn build(&self) -> Result<Space> {
        Ok(match self {
            SpaceConfig::Euclidean { dim, gram } => {
                if *dim == 0 {
                    return Err(Error::Config("euclidean dimension must be positive".into()));
                }
                match gram {
                    None => Space::euclidean(*dim),
                    Some(rows) => {
                        let g = matrix(rows, "gram")?;
                        if g.nrows() != *dim {
                            return Err(Error::Config(format!("gram must be {dim}x{dim}")));
                        }
                        Euclidean::with_gram(g).map_err(|e| Error::Config(e.to_string()))?.into()
                    }
                }
            }
            SpaceConfig::Hyperbolic { dim } => {
                if *dim == 0 {
                    return Err(Error::Config("hyperbolic dimension must be positive".into()));
                }
                Space::hyperbolic(*dim)
            }
            SpaceConfig::Spd { n } => {
                if *n == 0 {
                    return Err(Error::Config("SPD matrix size must be positive".into()));
                }
                Space::spd(*n)
            }
            SpaceConfig::Product { factors } => {
                let built = factors.iter().map(SpaceConfig::build).collect::<Result<Vec<_>>>()?;
                product_space(built).map_err(|e| Error::Config(e.to_string()))?
            }
        })
    }
}

/// A sampler description. The center is always the origin of the space
/// (`0`, the hyperboloid apex, or `I`).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize, JsonSchema)]
#[serde(tag = "law", rename_all = "snake_case", deny_unknown_fields)]
pub enum SamplerConfig {
    /// `N(0, sigma^2 I)` or `N(0, covariance)` in orthonormal tangent coordinates.
    Gaussian {
        #[serde(default, skip_serializing_if = "Option::is_none")]
        sigma: Option<f64>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        covariance: Option<Vec<Vec<f64>>>,
    },
    /// Radius from `radial`, uniform direction.
    Radial { radial: RadialLaw },
    /// Independent draws with `Log_mu(X_i) ~ N(0, i^alpha I)`, `i = 1..n`.
    IncreasingVariance { alpha: f64 },
}

impl SamplerConfig {
    /// The i.i.d. sampler, or for `IncreasingVariance` the unit-variance
    /// sampler whose `i`-th draw is scaled by `i^{alpha/2}`.
    pub fn build(&self, space: &Space) -> Result<SymmetricSampler> {
        let center = space.origin();
        let cfg = |e: Error| Error::Config(e.to_string());
        match self {
            SamplerConfig::Gaussian { sigma, covariance } => match (sigma, covariance) {
                (Some(s), None) => {
                    if !(*s >= 0.0 && s.is_finite()) {
                        return Err(Error::Config(format!("sigma must be finite and nonnegative, got {s}")));
                    }
                    SymmetricSampler::isotropic_gaussian(space.clone(), center, *s).map_err(cfg)
                }
                (None, Some(rows)) => {
                    let c = matrix(rows, "covariance")?;
                    SymmetricSampler::new(space.clone(), center, TangentLaw::Gaussian { covariance: c }).map_err(cfg)
                }
                _ => Err(Error::Config("gaussian sampler needs exactly one of sigma or covariance".into())),
            },
            SamplerConfig::Radial { radial } => {
                SymmetricSampler::radial(space.clone(), center, radial.clone()).map_err(cfg)
            }
            SamplerConfig::IncreasingVariance { alpha } => {
                if !(*alpha > 0.0 && *alpha < 1.0) {
                    return Err(Error::Config(format!("alpha must lie in (0, 1), got {alpha}")));
                }
                SymmetricSampler::isotropic_gaussian(space.clone(), center, 1.0).map_err(cfg)
            }
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize, JsonSchema)]
#[serde(deny_unknown_fields)]
pub struct CaseConfig {
    pub name: String,
    pub space: SpaceConfig,
    pub sampler: SamplerConfig,
    /// Upper bound on the exceedance at the largest n and the pass epsilon,
    /// for the heavy-tail scenarios.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub threshold: Option<f64>,
}

pub fn default_sample_sizes() -> Vec<usize> {
    vec![100, 1000, 10_000]
}

pub fn default_replications() -> Vec<usize> {
    vec![2000, 500, 200]
}

pub fn default_epsilons() -> Vec<f64> {
    vec![0.25, 0.5, 1.0]
}

pub fn default_pass_epsilon() -> f64 {
    0.5
}

/// A declarative scenario description. `scenario` and `seed` have no
/// defaults.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize, JsonSchema)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub scenario: Scenario,
    pub seed: u64,
    #[serde(default = "default_sample_sizes")]
    pub sample_sizes: Vec<usize>,
    /// Replications for each entry of `sample_sizes`.
    #[serde(default = "default_replications")]
    pub replications: Vec<usize>,
    /// Exceedance levels for `P(d(mu_n, mu) > epsilon)`.
    #[serde(default = "default_epsilons")]
    pub epsilons: Vec<f64>,
    /// The epsilon used for pass/fail evaluation.
    #[serde(default = "default_pass_epsilon")]
    pub pass_epsilon: f64,
    #[serde(default)]
    pub solver: SolverConfig,
    pub cases: Vec<CaseConfig>,
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        if self.sample_sizes.is_empty() {
            return bad("sample_sizes must not be empty".into());
        }
        if self.sample_sizes[0] < 1 || self.sample_sizes.windows(2).any(|w| w[1] <= w[0]) {
            return bad("sample_sizes must be positive and strictly increasing".into());
        }
        if self.replications.len() != self.sample_sizes.len() {
            return bad(format!(
                "replications has {} entries for {} sample sizes",
                self.replications.len(),
                self.sample_sizes.len()
            ));
        }
        if self.replications.iter().any(|r| *r < 30) {
            return bad("every replication count must be at least 30".into());
        }
        if self.epsilons.is_empty() || self.epsilons.iter().any(|e| !(*e > 0.0 && e.is_finite())) {
            return bad("epsilons must be positive".into());
        }
        if !self.epsilons.contains(&self.pass_epsilon) {
            return bad(format!("pass_epsilon {} is not one of the epsilons", self.pass_epsilon));
        }
        self.solver.validate().map_err(|e| Error::Config(e.to_string()))?;
        if self.cases.is_empty() {
            return bad("at least one case is required".into());
        }
        let mut names = BTreeSet::new();
        for c in &self.cases {
            if !names.insert(c.name.as_str()) {
                return bad(format!("duplicate case name {:?}", c.name));
            }
            if c.name.is_empty() || c.name.contains([',', '"', '\n']) {
                return bad(format!("case name {:?} must be non-empty without commas or quotes", c.name));
            }
            if let Some(t) = c.threshold {
                if !(0.0..=1.0).contains(&t) {
                    return bad(format!("threshold {t} outside [0, 1]"));
                }
            }
            let space = c.space.build()?;
            c.sampler.build(&space)?;
            let is_increasing = matches!(c.sampler, SamplerConfig::IncreasingVariance { .. });
            match self.scenario {
                Scenario::TheoremINonidentical => {
                    if !matches!(c.space, SpaceConfig::Spd { .. }) {
                        return bad(format!("case {}: theorem_i_nonidentical runs on SPD(k)", c.name));
                    }
                    if !is_increasing {
                        return bad(format!(
                            "case {}: theorem_i_nonidentical needs an increasing_variance sampler",
                            c.name
                        ));
                    }
                }
                Scenario::ConversePareto => {
                    if !matches!(c.space, SpaceConfig::Euclidean { .. }) {
                        return bad(format!("case {}: converse_pareto is stated for Euclidean space only", c.name));
                    }
                    if !matches!(c.sampler, SamplerConfig::Radial { .. }) {
                        return bad(format!("case {}: converse_pareto needs a radial sampler", c.name));
                    }
                }
                Scenario::TheoremIiHeavyTail | Scenario::CorollaryFirstMoment => {
                    if !matches!(c.sampler, SamplerConfig::Radial { .. }) {
                        return bad(format!("case {}: {} needs a radial sampler", c.name, self.scenario));
                    }
                }
                Scenario::Modulation => {
                    if is_increasing {
                        return bad(format!("case {}: modulation needs an i.i.d. sampler", c.name));
                    }
                }
            }
        }
        Ok(())
    }
}
