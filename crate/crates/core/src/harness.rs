//! Monte-Carlo experiment runner: sweeps, seeding, result tables and output
//! files.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use log::{info, warn};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::admm::{run_corr_map_admm, AdmmConfig};
use crate::baselines::{irw_l21, oracle_mmse, IrwConfig, OracleInfo};
use crate::emep::{run_em_ep, EmEpConfig};
use crate::error::{JuiceError, Result};
use crate::linalg::CMat;
use crate::metrics::{self, NmseAccumulator, SrrConvention};
use crate::model::{generate_scenario, Scenario, ScenarioConfig};

/// One estimator with its parameter block.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "name", rename_all = "snake_case")]
pub enum AlgorithmSpec {
    Emep(EmEpConfig),
    CorrMapAdmm(AdmmConfig),
    IrwL21(IrwConfig),
    OracleMmse,
}

impl AlgorithmSpec {
    pub fn name(&self) -> &'static str {
        match self {
            AlgorithmSpec::Emep(_) => "emep",
            AlgorithmSpec::CorrMapAdmm(_) => "corr_map_admm",
            AlgorithmSpec::IrwL21(_) => "irw_l21",
            AlgorithmSpec::OracleMmse => "oracle_mmse",
        }
    }

    /// The algorithm entry with default parameters for a name.
    pub fn default_for(name: &str) -> Result<AlgorithmSpec> {
        match name {
            "emep" => Ok(AlgorithmSpec::Emep(EmEpConfig::default())),
            "corr_map_admm" => Ok(AlgorithmSpec::CorrMapAdmm(AdmmConfig::default())),
            "irw_l21" => Ok(AlgorithmSpec::IrwL21(IrwConfig::default())),
            "oracle_mmse" => Ok(AlgorithmSpec::OracleMmse),
            other => Err(JuiceError::Config(format!(
                "unknown algorithm '{other}' (expected emep, corr_map_admm, irw_l21 or oracle_mmse)"
            ))),
        }
    }

    pub fn all_defaults() -> Vec<AlgorithmSpec> {
        ["emep", "corr_map_admm", "irw_l21", "oracle_mmse"]
            .iter()
            .map(|n| AlgorithmSpec::default_for(n).expect("known name"))
            .collect()
    }

    fn validate(&self) -> Result<()> {
        match self {
            AlgorithmSpec::Emep(c) => c.validate(),
            AlgorithmSpec::CorrMapAdmm(c) => c.validate(),
            AlgorithmSpec::IrwL21(c) => c.to_admm().validate(),
            AlgorithmSpec::OracleMmse => Ok(()),
        }
    }

    fn set_trace(&mut self, on: bool) {
        match self {
            AlgorithmSpec::Emep(c) => c.trace = on,
            AlgorithmSpec::CorrMapAdmm(c) => c.trace = on,
            AlgorithmSpec::IrwL21(_) | AlgorithmSpec::OracleMmse => {}
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum SweepAxis {
    #[serde(rename = "tau_p")]
    TauP,
    #[serde(rename = "snr_db")]
    SnrDb,
    #[serde(rename = "M", alias = "m")]
    Antennas,
    #[serde(rename = "none")]
    None,
}

impl SweepAxis {
    pub fn label(&self) -> &'static str {
        match self {
            SweepAxis::TauP => "tau_p",
            SweepAxis::SnrDb => "snr_db",
            SweepAxis::Antennas => "M",
            SweepAxis::None => "none",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Sweep {
    pub axis: SweepAxis,
    #[serde(default)]
    pub values: Vec<f64>,
}

impl Default for Sweep {
    fn default() -> Self {
        Sweep {
            axis: SweepAxis::None,
            values: Vec::new(),
        }
    }
}

impl Sweep {
    /// The points actually visited, a single placeholder `0` for `none`.
    pub fn points(&self) -> Vec<f64> {
        match self.axis {
            SweepAxis::None => vec![0.0],
            _ => self.values.clone(),
        }
    }
}

fn default_trials() -> usize {
    100
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(default)]
    pub scenario: ScenarioConfig,
    #[serde(default = "AlgorithmSpec::all_defaults")]
    pub algorithms: Vec<AlgorithmSpec>,
    #[serde(default)]
    pub sweep: Sweep,
    #[serde(default = "default_trials")]
    pub trials: usize,
    #[serde(default)]
    pub master_seed: u64,
    #[serde(default)]
    pub output_dir: Option<PathBuf>,
    /// Convention of the `mean_srr` column; the other one goes to `mean_srr_alt`.
    #[serde(default)]
    pub srr_convention: SrrConvention,
    /// Record wall-clock times. Off by default so that outputs are reproducible.
    #[serde(default)]
    pub timing: bool,
    /// Keep per-iteration traces of the iterative estimators.
    #[serde(default)]
    pub trace: bool,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            scenario: ScenarioConfig::default(),
            algorithms: AlgorithmSpec::all_defaults(),
            sweep: Sweep::default(),
            trials: default_trials(),
            master_seed: 0,
            output_dir: None,
            srr_convention: SrrConvention::default(),
            timing: false,
            trace: false,
        }
    }
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<ExperimentConfig> {
        let cfg: ExperimentConfig = serde_json::from_str(text).map_err(|e| JuiceError::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<ExperimentConfig> {
        let text = fs::read_to_string(path)
            .map_err(|e| JuiceError::Config(format!("cannot read {}: {e}", path.display())))?;
        ExperimentConfig::from_json(&text)
    }

    pub fn validate(&self) -> Result<()> {
        if self.trials == 0 {
            return Err(JuiceError::Config("trials must be at least 1".into()));
        }
        if self.algorithms.is_empty() {
            return Err(JuiceError::Config("no algorithm selected".into()));
        }
        if self.sweep.axis != SweepAxis::None && self.sweep.values.is_empty() {
            return Err(JuiceError::Config(format!("sweep over {} has no values", self.sweep.axis.label())));
        }
        for &v in &self.sweep.values {
            self.scenario_at(v, 0)?.validate()?;
        }
        self.scenario.validate()?;
        self.algorithms.iter().try_for_each(AlgorithmSpec::validate)
    }

    /// The scenario of one sweep point with a given seed.
    pub fn scenario_at(&self, value: f64, seed: u64) -> Result<ScenarioConfig> {
        let mut s = self.scenario.clone();
        s.seed = seed;
        let as_count = |what: &str| {
            if value >= 1.0 && value.fract() == 0.0 {
                Ok(value as usize)
            } else {
                Err(JuiceError::Config(format!("sweep value {value} is not a valid {what}")))
            }
        };
        match self.sweep.axis {
            SweepAxis::TauP => s.tau_p = as_count("pilot length")?,
            SweepAxis::SnrDb => s.snr_db = value,
            SweepAxis::Antennas => s.antennas = as_count("antenna count")?,
            SweepAxis::None => {}
        }
        Ok(s)
    }
}

/// SplitMix64 finalizer.
pub fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Seed streams: evaluation runs and grid search never share scenarios.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SeedStream {
    Evaluation,
    Grid,
}

/// `mix(mix(mix(master ⊕ stream) ⊕ sweep_index) ⊕ trial)`.
pub fn trial_seed(master: u64, stream: SeedStream, sweep_index: usize, trial: usize) -> u64 {
    let tag = match stream {
        SeedStream::Evaluation => 0,
        SeedStream::Grid => 0xA5A5_5A5A_C3C3_3C3C,
    };
    let a = splitmix64(master ^ tag);
    let b = splitmix64(a ^ sweep_index as u64);
    splitmix64(b ^ trial as u64)
}

/// Per-trial outcome of one estimator.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TrialMetrics {
    pub srr: f64,
    /// SRR under the other convention.
    pub srr_alt: f64,
    pub nmse_num: f64,
    pub nmse_den: f64,
    pub support_true: Vec<usize>,
    pub support_est: Vec<usize>,
    pub iters: usize,
    pub wall_time: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub trace: Option<serde_json::Value>,
}

fn other(conv: SrrConvention) -> SrrConvention {
    match conv {
        SrrConvention::Missed => SrrConvention::FalseAlarm,
        SrrConvention::FalseAlarm => SrrConvention::Missed,
    }
}

/// Runs one estimator on one scenario and scores it.
pub fn run_algorithm(spec: &AlgorithmSpec, sc: &Scenario, conv: SrrConvention) -> Result<TrialMetrics> {
    let start = Instant::now();
    let problem = sc.problem();
    let (x_hat, support, iters, trace): (CMat, Vec<usize>, usize, Option<serde_json::Value>) = match spec {
        AlgorithmSpec::Emep(cfg) => {
            let est = run_em_ep(&problem, cfg)?;
            let trace = cfg.trace.then(|| serde_json::to_value(&est.trace)).transpose()?;
            (est.x_hat, est.support, est.iterations, trace)
        }
        AlgorithmSpec::CorrMapAdmm(cfg) => {
            let est = run_corr_map_admm(&problem, cfg)?;
            let trace = cfg.trace.then(|| serde_json::to_value(&est.trace)).transpose()?;
            (est.x_hat, est.support, est.iterations, trace)
        }
        AlgorithmSpec::IrwL21(cfg) => {
            let est = irw_l21(&problem, cfg)?;
            (est.x_hat, est.support, est.iterations, None)
        }
        AlgorithmSpec::OracleMmse => {
            let x = oracle_mmse(&sc.y, &sc.phi, &OracleInfo::from_scenario(sc))?;
            (x, sc.activity.support.clone(), 1, None)
        }
    };
    let wall_time = start.elapsed().as_secs_f64();
    let truth = &sc.activity.support;
    let (srr, srr_alt) = if truth.is_empty() {
        (f64::NAN, f64::NAN)
    } else {
        (metrics::srr(truth, &support, conv)?, metrics::srr(truth, &support, other(conv))?)
    };
    let (nmse_num, nmse_den) = metrics::nmse_terms(&sc.x_true, &x_hat)?;
    Ok(TrialMetrics {
        srr,
        srr_alt,
        nmse_num,
        nmse_den,
        support_true: truth.clone(),
        support_est: support,
        iters,
        wall_time,
        trace,
    })
}

/// Everything one `(sweep point, trial)` cell produced, one entry per algorithm.
#[derive(Debug, Clone, Serialize)]
pub struct TrialRecord {
    pub sweep_index: usize,
    pub sweep_value: f64,
    pub trial: usize,
    pub seed: u64,
    pub outcomes: Vec<std::result::Result<TrialMetrics, String>>,
}

/// Generates the scenario of every cell and runs every algorithm on it.
/// Records come back ordered by `(sweep_index, trial)` whatever the
/// parallel schedule.
pub fn run_trials(config: &ExperimentConfig, stream: SeedStream) -> Result<Vec<TrialRecord>> {
    config.validate()?;
    let points = config.sweep.points();
    let cells: Vec<(usize, f64, usize)> = points
        .iter()
        .enumerate()
        .flat_map(|(si, &v)| (0..config.trials).map(move |t| (si, v, t)))
        .collect();
    let mut algorithms = config.algorithms.clone();
    for a in &mut algorithms {
        a.set_trace(config.trace);
    }
    cells
        .into_par_iter()
        .map(|(si, v, t)| {
            let seed = trial_seed(config.master_seed, stream, si, t);
            let sc = generate_scenario(&config.scenario_at(v, seed)?)?;
            let outcomes = algorithms
                .iter()
                .map(|a| run_algorithm(a, &sc, config.srr_convention).map_err(|e| e.to_string()))
                .collect();
            Ok(TrialRecord {
                sweep_index: si,
                sweep_value: v,
                trial: t,
                seed,
                outcomes,
            })
        })
        .collect()
}

/// One `(sweep value, algorithm)` cell of the result table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultRow {
    pub sweep_value: f64,
    pub algorithm: String,
    /// Successful trials.
    pub trials: usize,
    pub failures: usize,
    pub mean_srr: f64,
    pub srr_stderr: f64,
    /// Ratio of summed squared errors to summed channel energies.
    pub nmse: f64,
    pub nmse_db: f64,
    /// Delta-method standard error of `nmse`.
    pub nmse_stderr: f64,
    /// Mean of the per-trial NMSE ratios.
    pub nmse_mean_ratio: f64,
    pub mean_srr_alt: f64,
    pub mean_iters: f64,
    pub median_iters: f64,
    /// Absent unless timing is enabled.
    pub mean_wall_time: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultTable {
    pub axis: SweepAxis,
    pub rows: Vec<ResultRow>,
    pub warnings: Vec<String>,
}

impl ResultTable {
    pub fn row(&self, sweep_value: f64, algorithm: &str) -> Option<&ResultRow> {
        self.rows.iter().find(|r| r.sweep_value == sweep_value && r.algorithm == algorithm)
    }

    /// Cells where every trial failed.
    pub fn dead_cells(&self) -> Vec<&ResultRow> {
        self.rows.iter().filter(|r| r.trials == 0).collect()
    }
}

fn mean_and_stderr(v: &[f64]) -> (f64, f64) {
    let n = v.len();
    if n == 0 {
        return (f64::NAN, f64::NAN);
    }
    let mean = v.iter().sum::<f64>() / n as f64;
    if n < 2 {
        return (mean, f64::NAN);
    }
    let var = v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
    (mean, (var / n as f64).sqrt())
}

fn median(mut v: Vec<f64>) -> f64 {
    if v.is_empty() {
        return f64::NAN;
    }
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

fn ratio_stderr(trials: &[&TrialMetrics], ratio: f64, den: f64) -> f64 {
    let n = trials.len();
    if n < 2 || !(den > 0.0) {
        return f64::NAN;
    }
    let ss: f64 = trials.iter().map(|m| (m.nmse_num - ratio * m.nmse_den).powi(2)).sum();
    (ss * n as f64 / (n - 1) as f64).sqrt() / den
}

/// Reduces trial records into one row per `(sweep value, algorithm)`, in
/// sweep order then configuration order.
pub fn summarize(config: &ExperimentConfig, records: &[TrialRecord]) -> ResultTable {
    let mut rows = Vec::new();
    let mut warnings = Vec::new();
    for (si, &v) in config.sweep.points().iter().enumerate() {
        for (ai, alg) in config.algorithms.iter().enumerate() {
            let ok: Vec<&TrialMetrics> = records
                .iter()
                .filter(|r| r.sweep_index == si)
                .filter_map(|r| r.outcomes[ai].as_ref().ok())
                .collect();
            let failures = records.iter().filter(|r| r.sweep_index == si && r.outcomes[ai].is_err()).count();
            let mut acc = NmseAccumulator::default();
            for m in &ok {
                acc.push(m.nmse_num, m.nmse_den);
            }
            let srr: Vec<f64> = ok.iter().map(|m| m.srr).filter(|s| s.is_finite()).collect();
            let srr_alt: Vec<f64> = ok.iter().map(|m| m.srr_alt).filter(|s| s.is_finite()).collect();
            let iters: Vec<f64> = ok.iter().map(|m| m.iters as f64).collect();
            let (mean_srr, srr_stderr) = mean_and_stderr(&srr);
            let nmse = acc.nmse().unwrap_or(f64::NAN);
            let nmse_stderr = ratio_stderr(&ok, nmse, acc.den);
            let total = ok.len() + failures;
            if failures * 10 > total {
                let msg = format!(
                    "{} at {} = {v}: {failures} of {total} trials failed",
                    alg.name(),
                    config.sweep.axis.label()
                );
                warn!("{msg}");
                warnings.push(msg);
            }
            rows.push(ResultRow {
                sweep_value: v,
                algorithm: alg.name().to_string(),
                trials: ok.len(),
                failures,
                mean_srr,
                srr_stderr,
                nmse,
                nmse_db: metrics::to_db(nmse),
                nmse_stderr,
                nmse_mean_ratio: acc.mean_of_ratios().unwrap_or(f64::NAN),
                mean_srr_alt: mean_and_stderr(&srr_alt).0,
                mean_iters: mean_and_stderr(&iters).0,
                median_iters: median(iters),
                mean_wall_time: config
                    .timing
                    .then(|| mean_and_stderr(&ok.iter().map(|m| m.wall_time).collect::<Vec<_>>()).0),
            });
        }
    }
    ResultTable {
        axis: config.sweep.axis,
        rows,
        warnings,
    }
}

pub fn run_experiment(config: &ExperimentConfig) -> Result<ResultTable> {
    let records = run_trials(config, SeedStream::Evaluation)?;
    info!("{} trial cells done", records.len());
    Ok(summarize(config, &records))
}

/// Writes `results.csv`, `results.json` and `plot_<axis>.dat` into `dir`.
pub fn emit_outputs(table: &ResultTable, config: &ExperimentConfig, dir: &Path) -> Result<Vec<PathBuf>> {
    if table.rows.is_empty() {
        return Err(JuiceError::Config("nothing to write: empty result table".into()));
    }
    fs::create_dir_all(dir)?;
    let csv_path = dir.join("results.csv");
    write_csv(table, &csv_path)?;

    let json_path = dir.join("results.json");
    let doc = serde_json::json!({ "config": config, "table": table });
    fs::write(&json_path, serde_json::to_string_pretty(&doc)? + "\n")?;

    let dat_path = dir.join(format!("plot_{}.dat", table.axis.label()));
    fs::write(&dat_path, plot_data(table))?;
    Ok(vec![csv_path, json_path, dat_path])
}

pub fn write_csv(table: &ResultTable, path: &Path) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(csv_err)?;
    for row in &table.rows {
        w.serialize(row).map_err(csv_err)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_csv(path: &Path) -> Result<Vec<ResultRow>> {
    let mut r = csv::Reader::from_path(path).map_err(csv_err)?;
    r.deserialize().map(|row| row.map_err(csv_err)).collect()
}

fn csv_err(e: csv::Error) -> JuiceError {
    match e.into_kind() {
        csv::ErrorKind::Io(io) => JuiceError::Io(io),
        other => JuiceError::Config(format!("csv: {other:?}")),
    }
}

/// Gnuplot-style blocks, one per algorithm and metric, separated by two
/// blank lines.
pub fn plot_data(table: &ResultTable) -> String {
    let mut algorithms: Vec<&str> = Vec::new();
    for r in &table.rows {
        if !algorithms.contains(&r.algorithm.as_str()) {
            algorithms.push(&r.algorithm);
        }
    }
    let metrics: [(&str, fn(&ResultRow) -> f64); 3] = [
        ("srr", |r| r.mean_srr),
        ("nmse", |r| r.nmse),
        ("nmse_db", |r| r.nmse_db),
    ];
    let mut out = String::new();
    for alg in &algorithms {
        for (name, get) in &metrics {
            out.push_str(&format!("# algorithm={alg} metric={name}\n# {} {name}\n", table.axis.label()));
            for r in table.rows.iter().filter(|r| r.algorithm == *alg) {
                out.push_str(&format!("{} {}\n", r.sweep_value, get(r)));
            }
            out.push_str("\n\n");
        }
    }
    out
}

/// Per-algorithm lists of candidate values, keyed by parameter name.
pub type ParamGrid = BTreeMap<String, BTreeMap<String, Vec<serde_json::Value>>>;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridRow {
    pub algorithm: String,
    /// The parameters varied by the grid, as compact JSON.
    pub params: String,
    pub trials: usize,
    pub failures: usize,
    pub nmse: f64,
    pub nmse_db: f64,
    pub mean_srr: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GridOutcome {
    pub best: Vec<AlgorithmSpec>,
    pub table: Vec<GridRow>,
}

pub fn load_grid(path: &Path) -> Result<ParamGrid> {
    let text = fs::read_to_string(path)
        .map_err(|e| JuiceError::Config(format!("cannot read {}: {e}", path.display())))?;
    serde_json::from_str(&text).map_err(|e| JuiceError::Config(format!("grid: {e}")))
}

/// Every combination of the grid values, keys in sorted order.
fn grid_points(axes: &BTreeMap<String, Vec<serde_json::Value>>) -> Vec<serde_json::Map<String, serde_json::Value>> {
    let mut points = vec![serde_json::Map::new()];
    for (key, values) in axes {
        points = points
            .into_iter()
            .flat_map(|p| {
                values.iter().map(move |v| {
                    let mut q = p.clone();
                    q.insert(key.clone(), v.clone());
                    q
                })
            })
            .collect();
    }
    points
}

/// Applies `overrides` on top of the parameter block of `base`.
fn with_params(base: &AlgorithmSpec, overrides: &serde_json::Map<String, serde_json::Value>) -> Result<AlgorithmSpec> {
    let mut doc = serde_json::to_value(base)?;
    let obj = doc.as_object_mut().expect("algorithm entry serializes to an object");
    for (k, v) in overrides {
        if k == "name" {
            return Err(JuiceError::Config("grid may not override the algorithm name".into()));
        }
        obj.insert(k.clone(), v.clone());
    }
    let spec: AlgorithmSpec = serde_json::from_value(doc).map_err(|e| JuiceError::Config(format!("grid point: {e}")))?;
    spec.validate()?;
    Ok(spec)
}

/// Evaluates every grid point on the held-out seed stream and keeps, per
/// algorithm, the one with the lowest NMSE. Ties go to the smallest
/// parameter string so that the listing order does not matter.
pub fn grid_search(config: &ExperimentConfig, grid: &ParamGrid) -> Result<GridOutcome> {
    if grid.is_empty() || grid.values().any(|axes| axes.values().any(Vec::is_empty)) {
        return Err(JuiceError::Config("grid is empty".into()));
    }
    let mut best = Vec::new();
    let mut table = Vec::new();
    for (name, axes) in grid {
        let base = config
            .algorithms
            .iter()
            .find(|a| a.name() == name)
            .cloned()
            .map_or_else(|| AlgorithmSpec::default_for(name), Ok)?;
        let points = grid_points(axes);
        let specs: Vec<AlgorithmSpec> = points.iter().map(|p| with_params(&base, p)).collect::<Result<_>>()?;
        let sub = ExperimentConfig {
            algorithms: specs.clone(),
            timing: false,
            trace: false,
            ..config.clone()
        };
        let records = run_trials(&sub, SeedStream::Grid)?;
        let summary = summarize(&sub, &records);
        let mut chosen: Option<(f64, String, AlgorithmSpec)> = None;
        for (k, spec) in specs.iter().enumerate() {
            let cells: Vec<&ResultRow> = summary.rows.iter().skip(k).step_by(specs.len()).collect();
            let mut acc = NmseAccumulator::default();
            let mut trials = 0;
            let mut failures = 0;
            let mut srr = 0.0;
            for c in &cells {
                trials += c.trials;
                failures += c.failures;
                srr += c.mean_srr * c.trials as f64;
            }
            for r in &records {
                if let Ok(m) = &r.outcomes[k] {
                    acc.push(m.nmse_num, m.nmse_den);
                }
            }
            let nmse = acc.nmse().unwrap_or(f64::INFINITY);
            let params = serde_json::to_string(&points[k])?;
            table.push(GridRow {
                algorithm: name.clone(),
                params: params.clone(),
                trials,
                failures,
                nmse,
                nmse_db: metrics::to_db(nmse),
                mean_srr: if trials > 0 { srr / trials as f64 } else { f64::NAN },
            });
            let better = match &chosen {
                None => true,
                Some((b, p, _)) => nmse < *b || (nmse == *b && params < *p),
            };
            if better && nmse.is_finite() {
                chosen = Some((nmse, params, spec.clone()));
            }
        }
        let (_, _, spec) = chosen.ok_or_else(|| JuiceError::NumericalFailure(format!("every grid point of {name} failed")))?;
        best.push(spec);
    }
    Ok(GridOutcome { best, table })
}

pub fn emit_grid_outputs(outcome: &GridOutcome, dir: &Path) -> Result<Vec<PathBuf>> {
    fs::create_dir_all(dir)?;
    let csv_path = dir.join("grid.csv");
    let mut w = csv::Writer::from_path(&csv_path).map_err(csv_err)?;
    for row in &outcome.table {
        w.serialize(row).map_err(csv_err)?;
    }
    w.flush()?;
    let best_path = dir.join("best_params.json");
    fs::write(&best_path, serde_json::to_string_pretty(&outcome.best)? + "\n")?;
    Ok(vec![csv_path, best_path])
}

/// Plain-text rendering of a result table.
pub fn format_table(table: &ResultTable) -> String {
    let mut out = format!(
        "{:>8}  {:<14} {:>6} {:>5} {:>8} {:>8} {:>9} {:>9} {:>8}\n",
        table.axis.label(),
        "algorithm",
        "trials",
        "fail",
        "srr",
        "srr_se",
        "nmse_db",
        "srr_alt",
        "iters"
    );
    for r in &table.rows {
        out.push_str(&format!(
            "{:>8}  {:<14} {:>6} {:>5} {:>8.4} {:>8.4} {:>9.3} {:>9.4} {:>8.1}\n",
            r.sweep_value, r.algorithm, r.trials, r.failures, r.mean_srr, r.srr_stderr, r.nmse_db, r.mean_srr_alt, r.mean_iters
        ));
    }
    out
}
