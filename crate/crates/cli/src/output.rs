use std::collections::BTreeMap;
use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::Path;
use std::time::Duration;

use schemars::{schema_for, JsonSchema};
use serde::Serialize;
use serde_json::{json, Value};
use sha2::{Digest, Sha256};
use symfrechet::experiments::{
    default_epsilons, default_pass_epsilon, default_replications, default_sample_sizes, plot_rows, ExperimentConfig,
    RunOutput, Scenario, ScenarioReport,
};
use symfrechet::frechet::SolverConfig;

use crate::Failure;

pub const TRIALS: &str = "trials.csv";
pub const SUMMARY: &str = "summary.json";
pub const PLOT: &str = "plot.csv";
pub const RESOLVED: &str = "config.resolved";
pub const MANIFEST: &str = "manifest.json";

pub const TRIAL_COLUMNS: [&str; 9] =
    ["scenario", "case", "n", "replication", "distance", "mismatch", "exceed_count", "mean_sq_distance", "converged"];
pub const PLOT_COLUMNS: [&str; 5] = ["n", "statistic", "value", "lower", "upper"];

/// 17 significant digits.
fn float(x: f64) -> String {
    format!("{x:.16e}")
}

#[derive(Serialize, JsonSchema)]
pub struct RunManifest {
    pub artifact_version: String,
    /// SHA-256 of `config.resolved`.
    pub config_hash: String,
    pub master_seed: u64,
    pub scenario: Scenario,
    pub threads: usize,
    /// Output file names relative to the output directory.
    pub outputs: BTreeMap<String, String>,
    pub started_unix: f64,
    pub finished_unix: f64,
    pub wall_time_seconds: f64,
    /// Summed per-trial wall time by case.
    pub trial_seconds: BTreeMap<String, f64>,
}

impl RunManifest {
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        config: &ExperimentConfig,
        resolved: &str,
        result: &RunOutput,
        outputs: BTreeMap<String, String>,
        threads: usize,
        started_unix: f64,
        finished_unix: f64,
        elapsed: Duration,
    ) -> Self {
        let mut trial_seconds = BTreeMap::new();
        for r in &result.records {
            *trial_seconds.entry(r.case.clone()).or_insert(0.0) += r.wall_time;
        }
        RunManifest {
            artifact_version: env!("CARGO_PKG_VERSION").to_string(),
            config_hash: sha256_hex(resolved.as_bytes()),
            master_seed: config.seed,
            scenario: config.scenario,
            threads,
            outputs,
            started_unix,
            finished_unix,
            wall_time_seconds: elapsed.as_secs_f64(),
            trial_seconds,
        }
    }
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

fn io<T>(path: &Path, r: std::io::Result<T>) -> Result<T, Failure> {
    r.map_err(|e| Failure::io(path, e))
}

fn csv_err(path: &Path, e: csv::Error) -> Failure {
    Failure::io(path, e)
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), Failure> {
    let mut text = serde_json::to_string_pretty(value).map_err(|e| Failure::io(path, e))?;
    text.push('\n');
    io(path, fs::write(path, text))
}

fn write_trials(path: &Path, result: &RunOutput) -> Result<(), Failure> {
    let file = io(path, File::create(path))?;
    let mut w = csv::Writer::from_writer(BufWriter::new(file));
    w.write_record(TRIAL_COLUMNS).map_err(|e| csv_err(path, e))?;
    for r in &result.records {
        w.write_record([
            r.scenario.as_str().to_string(),
            r.case.clone(),
            r.n.to_string(),
            r.replication.to_string(),
            float(r.distance),
            r.mismatch.to_string(),
            r.exceed_count.to_string(),
            float(r.mean_sq_distance),
            r.converged.to_string(),
        ])
        .map_err(|e| csv_err(path, e))?;
    }
    io(path, w.flush())
}

fn write_plot(path: &Path, report: &ScenarioReport) -> Result<(), Failure> {
    let file = io(path, File::create(path))?;
    let mut w = csv::Writer::from_writer(BufWriter::new(file));
    w.write_record(PLOT_COLUMNS).map_err(|e| csv_err(path, e))?;
    let opt = |x: Option<f64>| x.map(float).unwrap_or_default();
    for p in plot_rows(report) {
        w.write_record([p.n.to_string(), p.statistic, float(p.value), opt(p.lower), opt(p.upper)])
            .map_err(|e| csv_err(path, e))?;
    }
    io(path, w.flush())
}

/// Writes everything except the manifest; returns the file map.
pub fn write_all(out: &Path, resolved: &str, result: &RunOutput) -> Result<BTreeMap<String, String>, Failure> {
    write_trials(&out.join(TRIALS), result)?;
    write_json(&out.join(SUMMARY), &result.report)?;
    write_plot(&out.join(PLOT), &result.report)?;
    let path = out.join(RESOLVED);
    let mut f = io(&path, File::create(&path))?;
    io(&path, f.write_all(resolved.as_bytes()))?;
    Ok([("trials", TRIALS), ("summary", SUMMARY), ("plot", PLOT), ("config", RESOLVED)]
        .into_iter()
        .map(|(k, v)| (k.to_string(), v.to_string()))
        .collect())
}

pub fn catalog() -> Value {
    let scenarios: Vec<Value> =
        Scenario::ALL.iter().map(|s| json!({ "name": s.as_str(), "description": s.description() })).collect();
    json!({
        "scenarios": scenarios,
        "space_families": [
            { "family": "euclidean", "parameters": { "dim": "positive integer", "gram": "optional dim x dim positive definite matrix (rows)" } },
            { "family": "hyperbolic", "parameters": { "dim": "positive integer" } },
            { "family": "spd", "parameters": { "n": "positive integer (matrix size)" } },
            { "family": "product", "parameters": { "factors": "non-empty list of space descriptions" } }
        ],
        "samplers": [
            { "law": "gaussian", "parameters": { "sigma": "nonnegative real", "covariance": "dim x dim positive semidefinite matrix (rows); exactly one of sigma, covariance" } },
            { "law": "radial", "parameters": { "radial": "radial law, see radial_laws" } },
            { "law": "increasing_variance", "parameters": { "alpha": "real in (0, 1); draw i has tangent covariance i^alpha I" } }
        ],
        "radial_laws": [
            { "kind": "chi", "parameters": { "df": "real >= 1", "scale": "nonnegative real, default 1" } },
            { "kind": "loglog_tail", "parameters": {} },
            { "kind": "pareto", "parameters": { "index": "positive real" } },
            { "kind": "student_radius", "parameters": { "df": "positive real" } }
        ],
        "defaults": {
            "sample_sizes": default_sample_sizes(),
            "replications": default_replications(),
            "epsilons": default_epsilons(),
            "pass_epsilon": default_pass_epsilon(),
            "solver": SolverConfig::default(),
        },
        "schemas": schemas(),
    })
}

pub fn schemas() -> Value {
    json!({
        "config": schema_for!(ExperimentConfig),
        "summary": schema_for!(ScenarioReport),
        "manifest": schema_for!(RunManifest),
    })
}

pub fn list(as_json: bool) {
    let c = catalog();
    if as_json {
        println!("{}", serde_json::to_string_pretty(&c).expect("serializable"));
        return;
    }
    println!("scenarios:");
    for s in Scenario::ALL {
        println!("  {:<24} {}", s.as_str(), s.description());
    }
    for (title, key, tag) in [
        ("space families", "space_families", "family"),
        ("samplers", "samplers", "law"),
        ("radial laws", "radial_laws", "kind"),
    ] {
        println!("{title}:");
        for item in c[key].as_array().expect("array") {
            let params = item["parameters"].as_object().expect("object");
            let desc: Vec<String> = params.iter().map(|(k, v)| format!("{k}: {}", v.as_str().unwrap_or(""))).collect();
            println!("  {:<24} {}", item[tag].as_str().unwrap_or(""), desc.join("; "));
        }
    }
    println!("defaults:");
    for (k, v) in c["defaults"].as_object().expect("object") {
        println!("  {k:<24} {v}");
    }
    println!("config keys: scenario and seed are required; cases = [{{ name, space, sampler, threshold? }}]");
    println!("the full JSON schemas are printed by `list --json`");
}
