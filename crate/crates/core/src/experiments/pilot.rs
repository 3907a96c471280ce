//! Exceedance thresholds fixed by a pilot run (see `docs/pilot.md`).
//!
//! Each threshold is the pilot estimate of `P(d(mu_n, mu) > eps)` at the
//! largest `n`, plus three standard errors of the difference of two
//! independent estimates, rounded up to three decimals.

/// Seed shared by the configs under `configs/pilot/`.
pub const PILOT_SEED: u64 = 918273;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PilotThreshold {
    /// Bundled config file name under `configs/`.
    pub config: &'static str,
    pub case: &'static str,
    pub epsilon: f64,
    pub n: usize,
    pub replications: usize,
    pub pilot_estimate: f64,
    pub threshold: f64,
}

pub const PILOT_THRESHOLDS: [PilotThreshold; 4] = [
    PilotThreshold {
        config: "theorem_ii_loglog.toml",
        case: "R2",
        epsilon: 0.5,
        n: 10_000,
        replications: 200,
        pilot_estimate: 0.565,
        threshold: 0.714,
    },
    PilotThreshold {
        config: "theorem_ii_loglog.toml",
        case: "H2",
        epsilon: 0.5,
        n: 10_000,
        replications: 200,
        pilot_estimate: 0.08,
        threshold: 0.162,
    },
    PilotThreshold {
        config: "theorem_ii_h2_eps1.toml",
        case: "H2",
        epsilon: 1.0,
        n: 10_000,
        replications: 500,
        pilot_estimate: 0.042,
        threshold: 0.081,
    },
    PilotThreshold {
        config: "corollary_student.toml",
        case: "SPD2",
        epsilon: 0.5,
        n: 10_000,
        replications: 200,
        pilot_estimate: 0.015,
        threshold: 0.052,
    },
];

/// `p + 3 sqrt(2 p (1 - p) / R)`, rounded up to three decimals.
pub fn threshold_rule(pilot_estimate: f64, replications: usize) -> f64 {
    let p = pilot_estimate;
    let t = p + 3.0 * (2.0 * p * (1.0 - p) / replications as f64).sqrt();
    ((t * 1000.0) - 1e-9).ceil() / 1000.0
}

pub fn pilot_threshold(config: &str, case: &str) -> Option<&'static PilotThreshold> {
    PILOT_THRESHOLDS.iter().find(|t| t.config == config && t.case == case)
}
