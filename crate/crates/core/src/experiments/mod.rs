//! Scenario runners, aggregation and pass/fail evaluation.
//!
//! Every replication `(case, n, r)` draws from its own stream
//! `(scenario, case, n, r)` under the master seed, and records are collected
//! in task order, so results do not depend on the worker count.

mod config;
pub mod pilot;

use std::collections::BTreeMap;
use std::time::Instant;

use nalgebra::DVector;
use rayon::prelude::*;
use schemars::JsonSchema;
use serde::Serialize;
use statrs::distribution::{ChiSquared, ContinuousCDF};

pub use config::{
    default_epsilons, default_pass_epsilon, default_replications, default_sample_sizes, CaseConfig, ExperimentConfig,
    SamplerConfig, Scenario, SpaceConfig,
};

use crate::error::{domain, Error, Result};
use crate::frechet::{frechet_mean, ratio_jackknife, ModulationEstimate, ModulationPair, SolverConfig};
use crate::manifold::{Manifold, Space};
use crate::sampling::{stream_for, wilson_interval, SymmetricSampler, Z95};

/// One replication.
#[derive(Clone, Debug, PartialEq, Serialize, JsonSchema)]
pub struct TrialRecord {
    pub scenario: Scenario,
    pub case: String,
    pub n: usize,
    pub replication: usize,
    /// `d(mu_n, mu)`; for the converse scenario `|S_n / n|`.
    pub distance: f64,
    /// Some `d(X_i, mu) > n`, i.e. the truncated sample differs.
    pub mismatch: bool,
    /// Number of `i` with `d(X_i, mu) > n`.
    pub exceed_count: usize,
    /// `n^{-1} sum_i d^2(X_i, mu)`.
    pub mean_sq_distance: f64,
    pub converged: bool,
    /// Seconds; not part of any deterministic output.
    pub wall_time: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, JsonSchema)]
pub struct Exceedance {
    pub epsilon: f64,
    pub estimate: f64,
    pub lower: f64,
    pub upper: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, JsonSchema)]
pub struct SummaryRow {
    pub n: usize,
    pub replications: usize,
    pub median: f64,
    pub q90: f64,
    pub exceedance: Vec<Exceedance>,
    /// `n P(d(X, mu) > n)` when the sampler tail is known in closed form.
    pub tail_functional: Option<f64>,
    pub mismatch_frequency: f64,
    /// Empirical `sum_i P(d(X_i, mu) > n)`.
    pub mean_exceed_count: f64,
    pub exceed_count_se: f64,
    pub nonconverged: usize,
    /// Analytic reference values keyed by name.
    pub reference: BTreeMap<String, f64>,
}

impl SummaryRow {
    pub fn exceedance_at(&self, epsilon: f64) -> Option<&Exceedance> {
        self.exceedance.iter().find(|e| e.epsilon == epsilon)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, JsonSchema)]
pub struct ConvergenceSummary {
    pub scenario: Scenario,
    pub case: String,
    pub rows: Vec<SummaryRow>,
}

#[derive(Clone, Debug, PartialEq, Serialize, JsonSchema)]
pub struct Check {
    pub name: String,
    pub pass: bool,
    pub detail: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, JsonSchema)]
pub struct CaseReport {
    pub name: String,
    pub summary: ConvergenceSummary,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub modulation: Vec<ModulationEstimate>,
    pub checks: Vec<Check>,
}

#[derive(Clone, Debug, PartialEq, Serialize, JsonSchema)]
pub struct ScenarioReport {
    pub scenario: Scenario,
    pub seed: u64,
    pub pass_epsilon: f64,
    pub cases: Vec<CaseReport>,
    pub warnings: Vec<String>,
    pub pass: bool,
}

#[derive(Clone, Debug)]
pub struct RunOutput {
    pub records: Vec<TrialRecord>,
    pub report: ScenarioReport,
}

/// Nearest-rank quantile of sorted data: the value at rank `ceil(p N)`.
pub fn nearest_rank(sorted: &[f64], p: f64) -> f64 {
    let n = sorted.len();
    let rank = ((p * n as f64).ceil() as usize).clamp(1, n);
    sorted[rank - 1]
}

/// Summarizes the records of one case, one row per `n` in increasing order.
///
/// Quantiles use the nearest-rank rule; exceedances carry 95% Wilson
/// intervals. Records must share scenario and case.
pub fn aggregate(records: &[TrialRecord], epsilons: &[f64]) -> Result<ConvergenceSummary> {
    let Some(first) = records.first() else {
        return Err(domain("cannot aggregate an empty record list"));
    };
    if records.iter().any(|r| r.scenario != first.scenario || r.case != first.case) {
        return Err(domain("records mix scenarios or cases"));
    }
    let mut by_n: BTreeMap<usize, Vec<&TrialRecord>> = BTreeMap::new();
    for r in records {
        by_n.entry(r.n).or_default().push(r);
    }
    let rows = by_n
        .into_iter()
        .map(|(n, mut rs)| {
            rs.sort_by_key(|r| r.replication);
            let reps = rs.len();
            let mut d: Vec<f64> = rs.iter().map(|r| r.distance).collect();
            d.sort_by(f64::total_cmp);
            let exceedance = epsilons
                .iter()
                .map(|&epsilon| {
                    let k = d.iter().filter(|x| **x > epsilon).count();
                    let (lower, upper) = wilson_interval(k, reps, Z95);
                    Exceedance { epsilon, estimate: k as f64 / reps as f64, lower, upper }
                })
                .collect();
            let counts: Vec<f64> = rs.iter().map(|r| r.exceed_count as f64).collect();
            let mean_count = counts.iter().sum::<f64>() / reps as f64;
            let var = if reps > 1 {
                counts.iter().map(|c| (c - mean_count).powi(2)).sum::<f64>() / (reps as f64 - 1.0)
            } else {
                0.0
            };
            SummaryRow {
                n,
                replications: reps,
                median: nearest_rank(&d, 0.5),
                q90: nearest_rank(&d, 0.9),
                exceedance,
                tail_functional: None,
                mismatch_frequency: rs.iter().filter(|r| r.mismatch).count() as f64 / reps as f64,
                mean_exceed_count: mean_count,
                exceed_count_se: (var / reps as f64).sqrt(),
                nonconverged: rs.iter().filter(|r| !r.converged).count(),
                reference: BTreeMap::new(),
            }
        })
        .collect();
    Ok(ConvergenceSummary { scenario: first.scenario, case: first.case.clone(), rows })
}

struct Case {
    name: String,
    space: Space,
    sampler: SymmetricSampler,
    alpha: Option<f64>,
}

fn build_cases(config: &ExperimentConfig) -> Result<Vec<Case>> {
    config
        .cases
        .iter()
        .map(|c| {
            let space = c.space.build()?;
            let sampler = c.sampler.build(&space)?;
            let alpha = match c.sampler {
                SamplerConfig::IncreasingVariance { alpha } => Some(alpha),
                _ => None,
            };
            Ok(Case { name: c.name.clone(), space, sampler, alpha })
        })
        .collect()
}

fn run_trial(
    scenario: Scenario,
    seed: u64,
    case_index: usize,
    case: &Case,
    n: usize,
    rep: usize,
    solver: &SolverConfig,
) -> Result<TrialRecord> {
    let start = Instant::now();
    let mut rng = stream_for(seed, &[scenario.index(), case_index as u64, n as u64, rep as u64]);
    let nf = n as f64;
    let mut exceed_count = 0;
    let mut sum_sq = 0.0;
    let mut coords: Vec<DVector<f64>> = Vec::with_capacity(n);
    for i in 1..=n {
        let mut z = case.sampler.sample_coords(&mut rng);
        if let Some(alpha) = case.alpha {
            z *= (i as f64).powf(0.5 * alpha);
        }
        let d = z.norm();
        if d > nf {
            exceed_count += 1;
        }
        sum_sq += d * d;
        coords.push(z);
    }
    let (distance, converged) = if scenario == Scenario::ConversePareto {
        let sum = coords.iter().fold(DVector::zeros(case.space.dim()), |acc, z| acc + z);
        ((sum / nf).norm(), true)
    } else {
        let center = case.sampler.center();
        let points = coords.iter().map(|z| case.space.exp_coords(center, z)).collect::<Result<Vec<_>>>()?;
        let res = frechet_mean(&case.space, &points, solver)?;
        (case.space.distance(&res.mean, center)?, res.converged)
    };
    Ok(TrialRecord {
        scenario,
        case: case.name.clone(),
        n,
        replication: rep,
        distance,
        mismatch: exceed_count > 0,
        exceed_count,
        mean_sq_distance: sum_sq / nf,
        converged,
        wall_time: start.elapsed().as_secs_f64(),
    })
}

fn run_records(config: &ExperimentConfig, cases: &[Case]) -> Result<Vec<TrialRecord>> {
    let mut tasks = Vec::new();
    for ci in 0..cases.len() {
        for (&n, &reps) in config.sample_sizes.iter().zip(&config.replications) {
            tasks.extend((0..reps).map(|r| (ci, n, r)));
        }
    }
    tasks
        .into_par_iter()
        .map(|(ci, n, r)| run_trial(config.scenario, config.seed, ci, &cases[ci], n, r, &config.solver))
        .collect()
}

fn check(name: impl Into<String>, pass: bool, detail: impl Into<String>) -> Check {
    Check { name: name.into(), pass, detail: detail.into() }
}

/// Nonincreasing at every step and strictly smaller at the end.
pub fn is_decreasing(values: &[f64]) -> bool {
    values.windows(2).all(|w| w[1] <= w[0]) && values.len() >= 2 && values[values.len() - 1] < values[0]
}

fn fmt_list(values: &[f64]) -> String {
    let parts: Vec<String> = values.iter().map(|v| format!("{v:.4}")).collect();
    format!("[{}]", parts.join(", "))
}

fn convergence_checks(summary: &ConvergenceSummary, epsilon: f64, threshold: Option<f64>) -> Vec<Check> {
    let mut out = Vec::new();
    let exc: Vec<f64> =
        summary.rows.iter().map(|r| r.exceedance_at(epsilon).map_or(f64::NAN, |e| e.estimate)).collect();
    out.push(check(
        format!("exceedance_decreasing_eps_{epsilon}"),
        is_decreasing(&exc),
        format!("P(d > {epsilon}) over n: {}", fmt_list(&exc)),
    ));
    if let Some(t) = threshold {
        let last = *exc.last().expect("non-empty grid");
        out.push(check(
            "below_pilot_threshold",
            last < t,
            format!("P(d > {epsilon}) = {last:.4} at n = {} against threshold {t}", summary.rows.last().unwrap().n),
        ));
    }
    let medians: Vec<f64> = summary.rows.iter().map(|r| r.median).collect();
    let inversions = medians.windows(2).filter(|w| w[1] > w[0]).count();
    out.push(check(
        "median_monotone",
        inversions <= 1,
        format!("medians {} with {inversions} inversion(s)", fmt_list(&medians)),
    ));
    out.push(union_bound_check(summary));
    out
}

fn union_bound_check(summary: &ConvergenceSummary) -> Check {
    let worst = summary
        .rows
        .iter()
        .map(|r| r.mismatch_frequency - (r.mean_exceed_count + 3.0 * r.exceed_count_se))
        .fold(f64::NEG_INFINITY, f64::max);
    check(
        "union_bound",
        worst <= 0.0,
        format!("max of mismatch frequency minus (sum of exceedance frequencies + 3 SE): {worst:.3e}"),
    )
}

fn finish(config: &ExperimentConfig, cases: Vec<CaseReport>, warnings: Vec<String>) -> ScenarioReport {
    let pass = cases.iter().all(|c| c.checks.iter().all(|k| k.pass));
    ScenarioReport {
        scenario: config.scenario,
        seed: config.seed,
        pass_epsilon: config.pass_epsilon,
        cases,
        warnings,
        pass,
    }
}

fn prepare(config: &ExperimentConfig, expected: Scenario) -> Result<Vec<Case>> {
    if config.scenario != expected {
        return Err(Error::Config(format!("expected scenario {expected}, got {}", config.scenario)));
    }
    config.validate()?;
    build_cases(config)
}

fn records_of(records: &[TrialRecord], case: &str) -> Vec<TrialRecord> {
    records.iter().filter(|r| r.case == case).cloned().collect::<Vec<_>>()
}

/// `sum_{i <= n} P(chi2_m i^alpha > n^2)` and its Chernoff bound
/// `2^{m/2} n exp(-n^{2(1-alpha)}/4)`.
pub fn theorem_i_tail_sum(m: usize, alpha: f64, n: usize) -> (f64, f64) {
    let chi = ChiSquared::new(m as f64).expect("m >= 1");
    let nf = n as f64;
    let exact = (1..=n).map(|i| chi.sf(nf * nf / (i as f64).powf(alpha))).sum();
    let bound = (0.5 * m as f64 * std::f64::consts::LN_2 + nf.ln() - 0.25 * nf.powf(2.0 * (1.0 - alpha))).exp();
    (exact, bound)
}

/// `n^{-2} sum_{i <= n} E[d^2(X_i, mu)] = m n^{-2} sum i^alpha` and the
/// bound `m n^{alpha-1} (1 + 1/n)^{alpha+1} / (alpha + 1)`.
pub fn theorem_i_second_moment(m: usize, alpha: f64, n: usize) -> (f64, f64) {
    let nf = n as f64;
    let mf = m as f64;
    let exact = mf * (1..=n).map(|i| (i as f64).powf(alpha)).sum::<f64>() / (nf * nf);
    let bound = mf * nf.powf(alpha - 1.0) * (1.0 + 1.0 / nf).powf(alpha + 1.0) / (alpha + 1.0);
    (exact, bound)
}

/// Convergence under independent, non-identical draws on SPD(k).
pub fn run_theorem_i(config: &ExperimentConfig) -> Result<RunOutput> {
    let cases = prepare(config, Scenario::TheoremINonidentical)?;
    let records = run_records(config, &cases)?;
    let mut reports = Vec::new();
    for case in &cases {
        let mut summary = aggregate(&records_of(&records, &case.name), &config.epsilons)?;
        let alpha = case.alpha.expect("validated");
        let m = case.space.dim();
        for row in &mut summary.rows {
            let (p_exact, p_bound) = theorem_i_tail_sum(m, alpha, row.n);
            let (s_exact, s_bound) = theorem_i_second_moment(m, alpha, row.n);
            row.reference.insert("sum_tail_probability".into(), p_exact);
            row.reference.insert("sum_tail_probability_bound".into(), p_bound);
            row.reference.insert("second_moment_untruncated".into(), s_exact);
            row.reference.insert("second_moment_bound".into(), s_bound);
        }
        let mut checks = convergence_checks(&summary, config.pass_epsilon, None);
        let bounds_ok = summary.rows.iter().all(|r| {
            r.reference["sum_tail_probability"] <= r.reference["sum_tail_probability_bound"]
                && r.reference["second_moment_untruncated"] <= r.reference["second_moment_bound"]
        });
        checks.push(check("hypothesis_bounds_dominate", bounds_ok, "exact hypothesis quantities below their bounds"));
        reports.push(CaseReport { name: case.name.clone(), summary, modulation: Vec::new(), checks });
    }
    Ok(RunOutput { records, report: finish(config, reports, Vec::new()) })
}

fn run_iid_convergence(config: &ExperimentConfig, expected: Scenario) -> Result<RunOutput> {
    let cases = prepare(config, expected)?;
    let mut warnings = Vec::new();
    for case in &cases {
        let m = case.sampler.moments();
        match expected {
            Scenario::TheoremIiHeavyTail if m.first => warnings.push(format!(
                "case {}: sampler has a finite first moment; this is the first-moment regime",
                case.name
            )),
            Scenario::CorollaryFirstMoment if m.second => warnings.push(format!(
                "case {}: sampler has finite variance; the scenario does not exercise infinite variance",
                case.name
            )),
            Scenario::CorollaryFirstMoment if !m.first => warnings.push(format!(
                "case {}: sampler has an infinite first moment; this is the heavy-tail regime",
                case.name
            )),
            _ => {}
        }
    }
    let records = run_records(config, &cases)?;
    let mut reports = Vec::new();
    for (case, cfg) in cases.iter().zip(&config.cases) {
        let mut summary = aggregate(&records_of(&records, &case.name), &config.epsilons)?;
        for row in &mut summary.rows {
            row.tail_functional = case.sampler.tail(row.n as f64).map(|s| row.n as f64 * s);
        }
        if cfg.threshold.is_none() {
            warnings.push(format!("case {}: no pilot threshold configured", case.name));
        }
        let checks = convergence_checks(&summary, config.pass_epsilon, cfg.threshold);
        reports.push(CaseReport { name: case.name.clone(), summary, modulation: Vec::new(), checks });
    }
    Ok(RunOutput { records, report: finish(config, reports, warnings) })
}

/// Convergence under `n P(d > n) -> 0` with an infinite first moment.
pub fn run_theorem_ii(config: &ExperimentConfig) -> Result<RunOutput> {
    run_iid_convergence(config, Scenario::TheoremIiHeavyTail)
}

/// Convergence under a finite first moment and infinite variance.
pub fn run_corollary(config: &ExperimentConfig) -> Result<RunOutput> {
    run_iid_convergence(config, Scenario::CorollaryFirstMoment)
}

/// `(1 - e^{-delta}) / 2`.
pub fn converse_floor(delta: f64) -> f64 {
    0.5 * -(-delta).exp_m1()
}

/// Non-convergence of `S_n / n` in Euclidean space when `n P(|X| > n)`
/// stays above `delta`; pass when every grid point stays above the floor
/// `(1 - e^{-delta}) / 2` less three standard errors.
pub fn run_converse(config: &ExperimentConfig) -> Result<RunOutput> {
    let cases = prepare(config, Scenario::ConversePareto)?;
    if !config.epsilons.contains(&1.0) {
        return Err(Error::Config("converse_pareto needs 1.0 among the epsilons".into()));
    }
    let records = run_records(config, &cases)?;
    let mut reports = Vec::new();
    for case in &cases {
        let mut summary = aggregate(&records_of(&records, &case.name), &config.epsilons)?;
        let delta = summary
            .rows
            .iter()
            .map(|r| r.n as f64 * case.sampler.tail(r.n as f64).expect("radial law"))
            .fold(f64::INFINITY, f64::min);
        let floor = converse_floor(delta);
        let mut worst = f64::INFINITY;
        let mut values = Vec::new();
        for row in &mut summary.rows {
            let nf = row.n as f64;
            row.tail_functional = case.sampler.tail(nf).map(|s| nf * s);
            row.reference.insert("delta".into(), delta);
            row.reference.insert("floor".into(), floor);
            let e = row.exceedance_at(1.0).expect("validated").estimate;
            let se = (e * (1.0 - e) / row.replications as f64).sqrt();
            worst = worst.min(e - (floor - 3.0 * se));
            values.push(e);
        }
        let checks = vec![check(
            "above_floor",
            worst >= 0.0,
            format!("P(|S_n/n| > 1) over n: {} against floor {floor:.5} minus 3 SE", fmt_list(&values)),
        )];
        reports.push(CaseReport { name: case.name.clone(), summary, modulation: Vec::new(), checks });
    }
    Ok(RunOutput { records, report: finish(config, reports, Vec::new()) })
}

/// Variance modulation `n E[d^2(mu_n, mu)] / E[d^2(X, mu)]` per case and
/// `n`. Flat cases pass when `|m_hat - 1| <= 3 SE`, curved ones when
/// `m_hat + 3 SE < 1` for every `n >= 2`.
pub fn run_modulation(config: &ExperimentConfig) -> Result<RunOutput> {
    let cases = prepare(config, Scenario::Modulation)?;
    for case in &cases {
        if !case.sampler.moments().second {
            return Err(Error::Precondition(format!(
                "case {}: modulation needs a sampler with finite variance",
                case.name
            )));
        }
    }
    let records = run_records(config, &cases)?;
    let mut reports = Vec::new();
    for case in &cases {
        let rs = records_of(&records, &case.name);
        let summary = aggregate(&rs, &config.epsilons)?;
        let flat = case.space.is_flat();
        let mut modulation = Vec::new();
        let mut checks = Vec::new();
        for row in &summary.rows {
            let pairs: Vec<ModulationPair> = rs
                .iter()
                .filter(|r| r.n == row.n)
                .map(|r| ModulationPair {
                    numerator: r.n as f64 * r.distance * r.distance,
                    denominator: r.mean_sq_distance,
                    converged: r.converged,
                })
                .collect();
            let (m_hat, se) = ratio_jackknife(&pairs);
            modulation.push(ModulationEstimate { n: row.n, m_hat, standard_error: se, replications: pairs.len() });
            if flat {
                checks.push(check(
                    format!("brackets_one_n_{}", row.n),
                    (m_hat - 1.0).abs() <= 3.0 * se,
                    format!("m_hat = {m_hat:.4} +- {se:.4}"),
                ));
            } else if row.n >= 2 {
                checks.push(check(
                    format!("below_one_n_{}", row.n),
                    m_hat + 3.0 * se < 1.0,
                    format!("m_hat = {m_hat:.4} +- {se:.4}"),
                ));
            }
        }
        reports.push(CaseReport { name: case.name.clone(), summary, modulation, checks });
    }
    Ok(RunOutput { records, report: finish(config, reports, Vec::new()) })
}

/// Dispatches on `config.scenario`.
pub fn run(config: &ExperimentConfig) -> Result<RunOutput> {
    match config.scenario {
        Scenario::TheoremINonidentical => run_theorem_i(config),
        Scenario::TheoremIiHeavyTail => run_theorem_ii(config),
        Scenario::CorollaryFirstMoment => run_corollary(config),
        Scenario::Modulation => run_modulation(config),
        Scenario::ConversePareto => run_converse(config),
    }
}

/// One row of tidy plot data.
#[derive(Clone, Debug, PartialEq, Serialize, JsonSchema)]
pub struct PlotRow {
    pub n: usize,
    pub statistic: String,
    pub value: f64,
    pub lower: Option<f64>,
    pub upper: Option<f64>,
}

/// Flattens a report into `(n, statistic, value, lower, upper)` rows;
/// statistics are prefixed by the case name.
pub fn plot_rows(report: &ScenarioReport) -> Vec<PlotRow> {
    let mut out = Vec::new();
    let row = |n, s: String, value, lower, upper| PlotRow { n, statistic: s, value, lower, upper };
    for case in &report.cases {
        let c = &case.name;
        for r in &case.summary.rows {
            out.push(row(r.n, format!("{c}/median"), r.median, None, None));
            out.push(row(r.n, format!("{c}/q90"), r.q90, None, None));
            for e in &r.exceedance {
                out.push(row(
                    r.n,
                    format!("{c}/exceedance_eps_{}", e.epsilon),
                    e.estimate,
                    Some(e.lower),
                    Some(e.upper),
                ));
            }
            if let Some(t) = r.tail_functional {
                out.push(row(r.n, format!("{c}/tail_functional"), t, None, None));
            }
            out.push(row(r.n, format!("{c}/mismatch_frequency"), r.mismatch_frequency, None, None));
            for (k, v) in &r.reference {
                out.push(row(r.n, format!("{c}/{k}"), *v, None, None));
            }
        }
        for m in &case.modulation {
            let h = Z95 * m.standard_error;
            out.push(row(m.n, format!("{c}/m_hat"), m.m_hat, Some(m.m_hat - h), Some(m.m_hat + h)));
        }
    }
    out
}
