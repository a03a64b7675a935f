//! Experiment orchestration: configs, the generate → tune → solve → evaluate
//! pipeline, Monte-Carlo sweeps and rate-slope regression.

use std::collections::BTreeMap;
use std::path::Path;
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::matrix::{error_report, DenseMatrix, ErrorReport, IndexSet};
use crate::sampling::SamplingDistribution;
use crate::solver::{fit, Regularizer, Samples, SolverConfig, SolverResult};
use crate::synth::{gen_lower_bound_instance, gen_observations, Adversary, CorruptionKind, Generated, ProblemInstance};
use crate::tuning::{ls_slope, PredictionSetup, RatePrediction};
use crate::derive_seed;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SamplingSpec {
    Uniform,
    Tilt { beta: f64 },
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NTildeRule {
    /// |Ω̃| = k
    Fixed(usize),
    /// |Ω̃| = ⌈ρ·n⌉
    Proportional(f64),
}

impl NTildeRule {
    pub fn count(self, n: usize) -> usize {
        match self {
            NTildeRule::Fixed(k) => k,
            NTildeRule::Proportional(rho) => (rho * n as f64).ceil() as usize,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Variant {
    Robust,
    /// λ₂ = ∞, so Ŝ = 0.
    NuclearOnly,
}

impl Variant {
    pub fn name(self) -> &'static str {
        match self {
            Variant::Robust => "robust",
            Variant::NuclearOnly => "nuclear_only",
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Axis {
    #[default]
    N,
    R,
    S,
}

impl Axis {
    pub fn name(self) -> &'static str {
        match self {
            Axis::N => "n",
            Axis::R => "r",
            Axis::S => "s",
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InstanceFamily {
    /// Random low-rank `L₀` and random corruption.
    #[default]
    Random,
    /// The lower-bound construction with scale factor γ.
    LowerBound { gamma: f64 },
}

fn default_lambda_c() -> f64 {
    1.0
}

fn default_variants() -> Vec<Variant> {
    vec![Variant::Robust]
}

/// A Monte-Carlo sweep, stored as one JSON document.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub dims: (usize, usize),
    pub rank_r: usize,
    pub sparsity_s: usize,
    pub corruption_kind: CorruptionKind,
    pub adversary: Adversary,
    pub sigma: f64,
    pub a_bound: f64,
    pub sampling: SamplingSpec,
    pub n_grid: Vec<usize>,
    pub n_tilde_rule: NTildeRule,
    #[serde(rename = "lambda_C", default = "default_lambda_c")]
    pub lambda_c: f64,
    pub replications: usize,
    pub seed: u64,
    #[serde(default = "default_variants")]
    pub estimator_variants: Vec<Variant>,
    /// Swept axis; `r` and `s` sweeps use a single-entry `n_grid`.
    #[serde(default)]
    pub axis: Axis,
    #[serde(default)]
    pub r_grid: Vec<usize>,
    #[serde(default)]
    pub s_grid: Vec<usize>,
    #[serde(default)]
    pub instance_family: InstanceFamily,
    #[serde(default)]
    pub max_iters: Option<usize>,
    #[serde(default)]
    pub rel_tol: Option<f64>,
}

fn strictly_increasing(v: &[usize]) -> bool {
    v.windows(2).all(|w| w[0] < w[1])
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: Self = serde_json::from_str(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn read(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    /// SHA-256 of the compact JSON encoding.
    pub fn hash(&self) -> String {
        let bytes = serde_json::to_vec(self).expect("config serializes");
        hex::encode(Sha256::digest(bytes))
    }

    pub fn validate(&self) -> Result<()> {
        let (m1, m2) = self.dims;
        let bad = |msg: &str| Err(Error::invalid(msg));
        if m1 == 0 || m2 == 0 {
            return bad("dims must be positive");
        }
        if self.n_grid.is_empty() || !strictly_increasing(&self.n_grid) || self.n_grid[0] == 0 {
            return bad("n_grid must be non-empty, positive and strictly increasing");
        }
        if self.replications == 0 {
            return bad("replications must be at least 1");
        }
        if !(self.sigma >= 0.0 && self.sigma.is_finite()) {
            return bad("sigma must be finite and non-negative");
        }
        if !(self.a_bound > 0.0 && self.a_bound.is_finite()) {
            return bad("a_bound must be positive and finite");
        }
        if !(self.lambda_c > 0.0 && self.lambda_c.is_finite()) {
            return bad("lambda_C must be positive and finite");
        }
        if self.estimator_variants.is_empty() {
            return bad("estimator_variants must not be empty");
        }
        if let SamplingSpec::Tilt { beta } = self.sampling {
            if !(0.0..1.0).contains(&beta) {
                return bad("tilt beta must lie in [0, 1)");
            }
        }
        if let NTildeRule::Proportional(rho) = self.n_tilde_rule {
            if !(rho >= 0.0 && rho.is_finite()) {
                return bad("proportional n_tilde rule needs a finite rho >= 0");
            }
        }
        if let InstanceFamily::LowerBound { gamma } = self.instance_family {
            if !(gamma > 0.0 && gamma.is_finite()) {
                return bad("lower-bound gamma must be positive");
            }
        }
        match self.axis {
            Axis::N => {}
            Axis::R | Axis::S => {
                let grid = self.axis_grid();
                if self.n_grid.len() != 1 {
                    return bad("r and s sweeps take a single-entry n_grid");
                }
                if grid.is_empty() || !strictly_increasing(&grid) {
                    return bad("axis grid must be non-empty and strictly increasing");
                }
            }
        }
        if let Some(t) = self.rel_tol {
            if !(t > 0.0) {
                return bad("rel_tol must be positive");
            }
        }
        if self.max_iters == Some(0) {
            return bad("max_iters must be positive");
        }
        Ok(())
    }

    /// The values of the swept axis.
    pub fn axis_grid(&self) -> Vec<usize> {
        match self.axis {
            Axis::N => self.n_grid.clone(),
            Axis::R => self.r_grid.clone(),
            Axis::S => self.s_grid.clone(),
        }
    }

    /// (n, r, s) at one grid point.
    pub fn point(&self, axis_value: usize) -> (usize, usize, usize) {
        match self.axis {
            Axis::N => (axis_value, self.rank_r, self.sparsity_s),
            Axis::R => (self.n_grid[0], axis_value, self.sparsity_s),
            Axis::S => (self.n_grid[0], self.rank_r, axis_value),
        }
    }

    pub fn regularizer(&self) -> Regularizer {
        match self.corruption_kind {
            CorruptionKind::Columnwise => Regularizer::L21,
            CorruptionKind::Entrywise => Regularizer::L1,
        }
    }
}

/// A generated problem together with its sampling distribution.
#[derive(Clone, Debug)]
pub struct Trial {
    pub generated: Generated,
    pub pi: SamplingDistribution,
}

impl Trial {
    pub fn instance(&self) -> &ProblemInstance {
        &self.generated.instance
    }
}

/// Seed of one (grid point, replication) cell of the sweep.
pub fn trial_seed(cfg: &ExperimentConfig, axis_value: usize, replication: usize) -> u64 {
    derive_seed(cfg.seed, &[axis_value as u64, replication as u64])
}

fn build_distribution(spec: SamplingSpec, support: &IndexSet) -> Result<SamplingDistribution> {
    match spec {
        SamplingSpec::Uniform => SamplingDistribution::uniform_on(support),
        SamplingSpec::Tilt { beta } => SamplingDistribution::tilt(support, beta),
    }
}

/// Generates the instance and observations of one sweep cell.
pub fn generate_trial(cfg: &ExperimentConfig, axis_value: usize, replication: usize) -> Result<Trial> {
    let (n, r, s) = cfg.point(axis_value);
    let seed = trial_seed(cfg, axis_value, replication);
    let instance = match cfg.instance_family {
        InstanceFamily::Random => {
            ProblemInstance::synthetic(cfg.dims, r, s, cfg.a_bound, cfg.corruption_kind, derive_seed(seed, &[1]))?
        }
        InstanceFamily::LowerBound { gamma } => gen_lower_bound_instance(
            cfg.dims,
            r,
            s,
            n,
            cfg.sigma,
            cfg.a_bound,
            gamma,
            cfg.corruption_kind,
            derive_seed(seed, &[1]),
        )?,
    };
    let pi = build_distribution(cfg.sampling, &instance.noncorrupted_set())?;
    let n_tilde = if instance.corrupted_support.is_empty() {
        0
    } else {
        cfg.n_tilde_rule.count(n)
    };
    let generated = gen_observations(&instance, &pi, n, n_tilde, cfg.sigma, cfg.adversary, derive_seed(seed, &[2]))?;
    Ok(Trial { generated, pi })
}

/// Prediction inputs for a problem whose flagged counts are known.
pub fn prediction_setup(
    cfg: &ExperimentConfig,
    pi: &SamplingDistribution,
    rank_r: usize,
    sparsity_s: usize,
    n: usize,
    n_tilde: usize,
) -> PredictionSetup {
    PredictionSetup {
        dims: cfg.dims,
        rank_r,
        sparsity_s,
        kind: cfg.corruption_kind,
        sigma: cfg.sigma,
        a: cfg.a_bound,
        n,
        n_tilde,
        c: cfg.lambda_c,
        constants: pi.measure_constants(),
    }
}

/// The matching minimax rate: ψ_GS for columnwise corruption, ψ_S for entrywise.
pub fn matching_rate(cfg: &ExperimentConfig, prediction: &RatePrediction) -> f64 {
    match cfg.corruption_kind {
        CorruptionKind::Columnwise => prediction.psi_gs,
        CorruptionKind::Entrywise => prediction.psi_s,
    }
}

/// Solver settings for a variant. The tuning formulas need N = |Ω| + |Ω̃|,
/// which the solver sees as the number of samples.
pub fn solver_config(cfg: &ExperimentConfig, lambdas: (f64, f64), variant: Variant) -> SolverConfig {
    let lambda2 = match variant {
        Variant::Robust => lambdas.1,
        Variant::NuclearOnly => f64::INFINITY,
    };
    let mut sc = SolverConfig::new(lambdas.0, lambda2, cfg.regularizer(), cfg.a_bound);
    if let Some(it) = cfg.max_iters {
        sc.max_iters = it;
    }
    if let Some(t) = cfg.rel_tol {
        sc.rel_tol = t;
    }
    sc
}

/// Fit from flag-free samples; the only path by which the solver sees data.
pub fn solve(
    cfg: &ExperimentConfig,
    samples: &Samples,
    lambdas: (f64, f64),
    variant: Variant,
) -> Result<SolverResult> {
    fit(samples, &solver_config(cfg, lambdas, variant), None)
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RunRecord {
    pub config_hash: String,
    pub variant: Variant,
    pub axis: Axis,
    pub axis_value: usize,
    pub replication: usize,
    pub n: usize,
    pub n_tilde: usize,
    pub report: ErrorReport,
    pub prediction: RatePrediction,
    pub psi_pred: f64,
    pub converged: bool,
    pub iterations: usize,
    pub inexact_prox_used: bool,
    pub final_objective: f64,
    pub seconds: f64,
}

/// Runs every (grid point, replication, variant) cell. Cells are independent
/// and executed on the rayon pool; records come back sorted by
/// (axis value, replication, variant).
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<Vec<RunRecord>> {
    cfg.validate()?;
    let hash = cfg.hash();
    let cells: Vec<(usize, usize)> = cfg
        .axis_grid()
        .into_iter()
        .flat_map(|v| (0..cfg.replications).map(move |rep| (v, rep)))
        .collect();
    let nested: Vec<Vec<RunRecord>> = cells
        .par_iter()
        .map(|&(value, rep)| run_cell(cfg, &hash, value, rep))
        .collect::<Result<_>>()?;
    let mut records: Vec<RunRecord> = nested.into_iter().flatten().collect();
    records.sort_by_key(|r| (r.axis_value, r.replication, r.variant));
    Ok(records)
}

fn run_cell(cfg: &ExperimentConfig, hash: &str, axis_value: usize, replication: usize) -> Result<Vec<RunRecord>> {
    let trial = generate_trial(cfg, axis_value, replication)?;
    let inst = trial.instance();
    let obs = &trial.generated.observations;
    let samples = obs.unflagged();
    let (n, r, s) = cfg.point(axis_value);
    let setup = prediction_setup(cfg, &trial.pi, r, s, n, obs.n_tilde());
    let prediction = setup.predict(None);
    let psi_pred = matching_rate(cfg, &prediction);
    let noncorrupted = inst.noncorrupted_set();
    let mut out = Vec::with_capacity(cfg.estimator_variants.len());
    for &variant in &cfg.estimator_variants {
        let start = Instant::now();
        let res = solve(cfg, &samples, (prediction.lambda1, prediction.lambda2), variant)?;
        let seconds = start.elapsed().as_secs_f64();
        let report = error_report(&res.l_hat, &res.s_hat, &inst.l0, &inst.s0, &noncorrupted)?;
        out.push(RunRecord {
            config_hash: hash.to_string(),
            variant,
            axis: cfg.axis,
            axis_value,
            replication,
            n,
            n_tilde: obs.n_tilde(),
            report,
            prediction,
            psi_pred,
            converged: res.converged,
            iterations: res.iterations,
            inexact_prox_used: res.inexact_prox_used,
            final_objective: res.final_objective(),
            seconds,
        });
    }
    Ok(out)
}

pub const RECORDS_HEADER: [&str; 10] = [
    "axis",
    "axis_value",
    "replication",
    "err_L",
    "err_S",
    "err_S_noncorrupted",
    "psi_pred",
    "converged",
    "iters",
    "seconds",
];

/// Records CSV for one variant. Wall time is written only when `timing` is
/// set, so the default output depends on (config, seed) alone.
pub fn records_csv(records: &[RunRecord], variant: Variant, timing: bool) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(RECORDS_HEADER)?;
    for r in records.iter().filter(|r| r.variant == variant) {
        w.write_record([
            r.axis.name().to_string(),
            r.axis_value.to_string(),
            r.replication.to_string(),
            format!("{:?}", r.report.normalized_frob_l),
            format!("{:?}", r.report.normalized_frob_s),
            format!("{:?}", r.report.noncorrupted_s_error),
            format!("{:?}", r.psi_pred),
            r.converged.to_string(),
            r.iterations.to_string(),
            format!("{:?}", if timing { r.seconds } else { 0.0 }),
        ])?;
    }
    let bytes = w.into_inner().map_err(|e| Error::Parse(e.to_string()))?;
    String::from_utf8(bytes).map_err(|e| Error::Parse(e.to_string()))
}

/// The error column a slope is fitted to.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Metric {
    ErrL,
    ErrS,
    ErrSNoncorrupted,
}

impl Metric {
    pub fn of(self, report: &ErrorReport) -> f64 {
        match self {
            Metric::ErrL => report.normalized_frob_l,
            Metric::ErrS => report.normalized_frob_s,
            Metric::ErrSNoncorrupted => report.noncorrupted_s_error,
        }
    }

    /// err_L for the n and r axes, err_S for the s axis.
    pub fn natural(axis: Axis) -> Self {
        match axis {
            Axis::N | Axis::R => Metric::ErrL,
            Axis::S => Metric::ErrS,
        }
    }
}

/// Mean and standard error of `metric` at each axis value, in axis order.
pub fn grid_means(records: &[RunRecord], metric: Metric) -> Vec<(usize, f64, f64)> {
    let mut groups: BTreeMap<usize, Vec<f64>> = BTreeMap::new();
    for r in records {
        groups.entry(r.axis_value).or_default().push(metric.of(&r.report));
    }
    groups
        .into_iter()
        .map(|(v, errs)| {
            let k = errs.len() as f64;
            let mean = errs.iter().sum::<f64>() / k;
            let se = if errs.len() > 1 {
                (errs.iter().map(|e| (e - mean).powi(2)).sum::<f64>() / (k - 1.0) / k).sqrt()
            } else {
                0.0
            };
            (v, mean, se)
        })
        .collect()
}

/// Least-squares slope (and its standard error) of log(mean error) against
/// log(axis value), using the axis's natural error column.
pub fn fit_rate_slope(records: &[RunRecord], axis: Axis) -> Result<(f64, f64)> {
    fit_rate_slope_with(records, axis, Metric::natural(axis))
}

pub fn fit_rate_slope_with(records: &[RunRecord], axis: Axis, metric: Metric) -> Result<(f64, f64)> {
    if let Some(r) = records.iter().find(|r| r.axis != axis) {
        return Err(Error::invalid(format!(
            "record swept along {} while fitting along {}",
            r.axis.name(),
            axis.name()
        )));
    }
    if records.iter().any(|r| r.variant != records[0].variant) {
        return Err(Error::invalid("records mix estimator variants"));
    }
    let means = grid_means(records, metric);
    if means.len() < 4 {
        return Err(Error::invalid(format!(
            "slope fit needs at least 4 grid points, got {}",
            means.len()
        )));
    }
    if means.iter().any(|&(v, m, _)| v == 0 || !(m > 0.0)) {
        return Err(Error::invalid("log-log fit needs positive axis values and errors"));
    }
    let xs: Vec<f64> = means.iter().map(|p| (p.0 as f64).ln()).collect();
    let ys: Vec<f64> = means.iter().map(|p| p.1.ln()).collect();
    Ok(ls_slope(&xs, &ys))
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct GridSummary {
    pub axis_value: usize,
    pub mean: f64,
    pub stderr: f64,
    pub mean_psi_pred: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct VariantSummary {
    pub variant: Variant,
    pub metric: Metric,
    pub grid: Vec<GridSummary>,
    pub slope: Option<f64>,
    pub slope_stderr: Option<f64>,
    pub nonconverged_runs: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ExperimentSummary {
    pub config_hash: String,
    pub axis: Axis,
    pub variants: Vec<VariantSummary>,
}

pub fn summarize(cfg: &ExperimentConfig, records: &[RunRecord]) -> ExperimentSummary {
    let metric = Metric::natural(cfg.axis);
    let variants = cfg
        .estimator_variants
        .iter()
        .map(|&variant| {
            let subset: Vec<RunRecord> = records.iter().filter(|r| r.variant == variant).cloned().collect();
            let psi = grid_means_of(&subset, |r| r.psi_pred);
            let grid = grid_means(&subset, metric)
                .into_iter()
                .zip(psi)
                .map(|((axis_value, mean, stderr), mean_psi_pred)| GridSummary {
                    axis_value,
                    mean,
                    stderr,
                    mean_psi_pred,
                })
                .collect();
            let fitted = fit_rate_slope_with(&subset, cfg.axis, metric).ok();
            VariantSummary {
                variant,
                metric,
                grid,
                slope: fitted.map(|f| f.0),
                slope_stderr: fitted.map(|f| f.1),
                nonconverged_runs: subset.iter().filter(|r| !r.converged).count(),
            }
        })
        .collect();
    ExperimentSummary {
        config_hash: cfg.hash(),
        axis: cfg.axis,
        variants,
    }
}

fn grid_means_of(records: &[RunRecord], f: impl Fn(&RunRecord) -> f64) -> Vec<f64> {
    let mut groups: BTreeMap<usize, (f64, usize)> = BTreeMap::new();
    for r in records {
        let e = groups.entry(r.axis_value).or_default();
        e.0 += f(r);
        e.1 += 1;
    }
    groups.into_values().map(|(s, k)| s / k as f64).collect()
}

/// Metadata written next to a generated instance.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct InstanceMeta {
    pub dims: (usize, usize),
    pub rank_r: usize,
    pub sparsity_s: usize,
    pub corruption_kind: CorruptionKind,
    pub a_bound: f64,
    pub axis_value: usize,
    pub replication: usize,
    pub n: usize,
    pub n_tilde: usize,
    /// Cells of Ĩ in row-major order.
    pub corrupted_support: Vec<(usize, usize)>,
}

pub const L0_FILE: &str = "L0.csv";
pub const S0_FILE: &str = "S0.csv";
pub const PI_FILE: &str = "pi.csv";
pub const OBS_FILE: &str = "observations.csv";
pub const META_FILE: &str = "instance.json";
pub const L_HAT_FILE: &str = "L_hat.csv";
pub const S_HAT_FILE: &str = "S_hat.csv";
pub const SOLVE_SUMMARY_FILE: &str = "summary.json";

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let text = serde_json::to_string_pretty(value)?;
    std::fs::write(path, text + "\n").map_err(|e| Error::io(path, e))
}

fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    Ok(serde_json::from_str(&text)?)
}

/// Writes L₀, S₀, Π, the flagged observations and metadata into `dir`.
pub fn write_trial(dir: &Path, trial: &Trial, cfg: &ExperimentConfig, axis_value: usize, replication: usize) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let inst = trial.instance();
    let obs = &trial.generated.observations;
    let (n, _, _) = cfg.point(axis_value);
    inst.l0.write_csv(&dir.join(L0_FILE))?;
    inst.s0.write_csv(&dir.join(S0_FILE))?;
    trial.pi.write_csv(&dir.join(PI_FILE))?;
    obs.write_csv(&dir.join(OBS_FILE))?;
    let meta = InstanceMeta {
        dims: inst.dims(),
        rank_r: inst.rank_r,
        sparsity_s: inst.sparsity_s,
        corruption_kind: inst.corruption_kind,
        a_bound: inst.a_bound,
        axis_value,
        replication,
        n,
        n_tilde: obs.n_tilde(),
        corrupted_support: inst.corrupted_support.iter().collect(),
    };
    write_json(&dir.join(META_FILE), &meta)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SolveSummary {
    pub variant: Variant,
    pub lambda1: f64,
    pub lambda2: Option<f64>,
    pub samples: usize,
    pub iterations: usize,
    pub converged: bool,
    pub inexact_prox_used: bool,
    pub final_objective: f64,
}

/// Solves the problem stored in `input` (flags ignored) and writes L̂, Ŝ and
/// a summary into `out`. λ's come from `lambdas` when given, otherwise from
/// the tuning formulas with the distribution in `input`.
pub fn solve_files(
    cfg: &ExperimentConfig,
    input: &Path,
    out: &Path,
    variant: Variant,
    lambdas: Option<(f64, f64)>,
) -> Result<(SolverResult, SolveSummary)> {
    let meta: InstanceMeta = read_json(&input.join(META_FILE))?;
    let samples = crate::synth::read_samples(&input.join(OBS_FILE), meta.dims)?;
    let lambdas = match lambdas {
        Some(l) => l,
        None => {
            let pi = SamplingDistribution::read_csv(&input.join(PI_FILE), meta.dims)?;
            prediction_setup(cfg, &pi, meta.rank_r, meta.sparsity_s, meta.n, samples.len() - meta.n).lambdas()
        }
    };
    let res = solve(cfg, &samples, lambdas, variant)?;
    std::fs::create_dir_all(out).map_err(|e| Error::io(out, e))?;
    res.l_hat.write_csv(&out.join(L_HAT_FILE))?;
    res.s_hat.write_csv(&out.join(S_HAT_FILE))?;
    let summary = SolveSummary {
        variant,
        lambda1: lambdas.0,
        lambda2: (variant == Variant::Robust).then_some(lambdas.1),
        samples: samples.len(),
        iterations: res.iterations,
        converged: res.converged,
        inexact_prox_used: res.inexact_prox_used,
        final_objective: res.final_objective(),
    };
    write_json(&out.join(SOLVE_SUMMARY_FILE), &summary)?;
    Ok((res, summary))
}

/// Error report of the estimate in `estimate` against the truth in `input`.
pub fn evaluate_files(input: &Path, estimate: &Path) -> Result<ErrorReport> {
    let meta: InstanceMeta = read_json(&input.join(META_FILE))?;
    let l0 = DenseMatrix::read_csv(&input.join(L0_FILE))?;
    let s0 = DenseMatrix::read_csv(&input.join(S0_FILE))?;
    let l_hat = DenseMatrix::read_csv(&estimate.join(L_HAT_FILE))?;
    let s_hat = DenseMatrix::read_csv(&estimate.join(S_HAT_FILE))?;
    let (m1, m2) = meta.dims;
    let corrupted = IndexSet::from_members(m1, m2, meta.corrupted_support.iter().copied())?;
    error_report(&l_hat, &s_hat, &l0, &s0, &corrupted.complement())
}

pub fn write_report(path: &Path, report: &ErrorReport) -> Result<()> {
    write_json(path, report)
}

pub fn write_summary<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    write_json(path, value)
}

#[cfg(test)]
mod tests {
    use super::*;

    pub(crate) fn tiny_config() -> ExperimentConfig {
        ExperimentConfig {
            dims: (6, 6),
            rank_r: 1,
            sparsity_s: 0,
            corruption_kind: CorruptionKind::Columnwise,
            adversary: Adversary::UniformSupport,
            sigma: 0.0,
            a_bound: 1.0,
            sampling: SamplingSpec::Uniform,
            n_grid: vec![100],
            n_tilde_rule: NTildeRule::Fixed(0),
            lambda_c: 0.05,
            replications: 1,
            seed: 11,
            estimator_variants: vec![Variant::Robust],
            axis: Axis::N,
            r_grid: vec![],
            s_grid: vec![],
            instance_family: InstanceFamily::Random,
            max_iters: None,
            rel_tol: None,
        }
    }

    fn fake(axis: Axis, value: usize, err: f64) -> RunRecord {
        RunRecord {
            config_hash: String::new(),
            variant: Variant::Robust,
            axis,
            axis_value: value,
            replication: 0,
            n: 0,
            n_tilde: 0,
            report: ErrorReport {
                normalized_frob_l: err,
                normalized_frob_s: err,
                noncorrupted_s_error: 0.0,
            },
            prediction: RatePrediction {
                lambda1: 0.0,
                lambda2: 0.0,
                n_star: 0.0,
                psi1: 0.0,
                psi2: 0.0,
                psi3: 0.0,
                psi4: 0.0,
                psi_gs: 0.0,
                psi_s: 0.0,
                constants: crate::tuning::PredictionConstants {
                    c: 1.0,
                    sigma: 0.0,
                    a: 1.0,
                    mu: 1.0,
                    l_const: 1.0,
                    gamma: 1.0,
                    mu1: 1.0,
                },
            },
            psi_pred: 0.0,
            converged: true,
            iterations: 0,
            inexact_prox_used: false,
            final_objective: 0.0,
            seconds: 0.0,
        }
    }

    #[test]
    fn exact_power_laws_give_exact_slopes() {
        let inv: Vec<_> = [100, 200, 400, 800, 1600]
            .iter()
            .map(|&n| fake(Axis::N, n, 3.0 / n as f64))
            .collect();
        let (slope, _) = fit_rate_slope(&inv, Axis::N).unwrap();
        assert!((slope + 1.0).abs() < 1e-10);
        let lin: Vec<_> = [1, 2, 4, 8].iter().map(|&s| fake(Axis::S, s, 0.2 * s as f64)).collect();
        let (slope, _) = fit_rate_slope(&lin, Axis::S).unwrap();
        assert!((slope - 1.0).abs() < 1e-10);
    }

    #[test]
    fn slope_needs_four_points_and_one_axis() {
        let three: Vec<_> = [1, 2, 4].iter().map(|&s| fake(Axis::S, s, s as f64)).collect();
        assert!(fit_rate_slope(&three, Axis::S).is_err());
        let four: Vec<_> = [1, 2, 4, 8].iter().map(|&s| fake(Axis::S, s, s as f64)).collect();
        assert!(fit_rate_slope(&four, Axis::N).is_err());
        let mut mixed = four.clone();
        mixed[0].variant = Variant::NuclearOnly;
        assert!(fit_rate_slope(&mixed, Axis::S).is_err());
    }

    #[test]
    fn replicates_are_averaged_before_the_log() {
        let mut recs = Vec::new();
        for &n in &[10usize, 20, 40, 80] {
            for (rep, w) in [0.5, 1.5].iter().enumerate() {
                let mut r = fake(Axis::N, n, w / n as f64);
                r.replication = rep;
                recs.push(r);
            }
        }
        let (slope, se) = fit_rate_slope(&recs, Axis::N).unwrap();
        assert!((slope + 1.0).abs() < 1e-10 && se < 1e-8);
        let means = grid_means(&recs, Metric::ErrL);
        assert!((means[0].1 - 0.1).abs() < 1e-15);
        assert!((means[0].2 - 0.05).abs() < 1e-15);
    }

    #[test]
    fn config_validation() {
        let ok = tiny_config();
        ok.validate().unwrap();
        let cases: Vec<Box<dyn Fn(&mut ExperimentConfig)>> = vec![
            Box::new(|c| c.n_grid = vec![200, 100]),
            Box::new(|c| c.n_grid = vec![]),
            Box::new(|c| c.replications = 0),
            Box::new(|c| c.sigma = -1.0),
            Box::new(|c| c.a_bound = 0.0),
            Box::new(|c| c.lambda_c = 0.0),
            Box::new(|c| c.estimator_variants.clear()),
            Box::new(|c| c.sampling = SamplingSpec::Tilt { beta: 1.0 }),
            Box::new(|c| c.axis = Axis::S),
            Box::new(|c| {
                c.axis = Axis::S;
                c.s_grid = vec![1, 2];
                c.n_grid = vec![10, 20];
            }),
        ];
        for (i, mutate) in cases.iter().enumerate() {
            let mut c = tiny_config();
            mutate(&mut c);
            assert!(c.validate().is_err(), "case {i}");
        }
    }

    #[test]
    fn config_json_round_trip_and_hash() {
        let c = tiny_config();
        let back = ExperimentConfig::from_json(&c.to_json()).unwrap();
        assert_eq!(back, c);
        assert_eq!(back.hash(), c.hash());
        let mut d = c.clone();
        d.seed += 1;
        assert_ne!(d.hash(), c.hash());
        assert!(ExperimentConfig::from_json("{\"dims\": [2, 2]}").is_err());
        let text = c.to_json().replace("\"lambda_C\": 0.05", "\"lambda_C\": 0.05, \"bogus\": 1");
        assert!(ExperimentConfig::from_json(&text).is_err());
    }

    #[test]
    fn n_tilde_rules() {
        assert_eq!(NTildeRule::Fixed(7).count(1000), 7);
        assert_eq!(NTildeRule::Proportional(0.02).count(600), 12);
        assert_eq!(NTildeRule::Proportional(0.02).count(601), 13);
        assert_eq!(NTildeRule::Proportional(0.0).count(601), 0);
    }

    #[test]
    fn smoke_run_is_accurate_and_deterministic() {
        let cfg = tiny_config();
        let a = run_experiment(&cfg).unwrap();
        assert_eq!(a.len(), 1);
        assert!(a[0].report.normalized_frob_l < 1e-3, "{:?}", a[0].report);
        let b = run_experiment(&cfg).unwrap();
        let strip = |v: &[RunRecord]| v.iter().map(|r| RunRecord { seconds: 0.0, ..r.clone() }).collect::<Vec<_>>();
        assert_eq!(strip(&a), strip(&b));
        assert_eq!(
            records_csv(&a, Variant::Robust, false).unwrap(),
            records_csv(&b, Variant::Robust, false).unwrap()
        );
    }

    #[test]
    fn records_are_sorted_and_split_by_variant() {
        let mut cfg = tiny_config();
        cfg.n_grid = vec![60, 90];
        cfg.replications = 2;
        cfg.sparsity_s = 1;
        cfg.n_tilde_rule = NTildeRule::Proportional(0.05);
        cfg.estimator_variants = vec![Variant::NuclearOnly, Variant::Robust];
        let recs = run_experiment(&cfg).unwrap();
        assert_eq!(recs.len(), 8);
        let keys: Vec<_> = recs.iter().map(|r| (r.axis_value, r.replication, r.variant)).collect();
        let mut sorted = keys.clone();
        sorted.sort();
        assert_eq!(keys, sorted);
        let csv = records_csv(&recs, Variant::Robust, false).unwrap();
        assert_eq!(csv.lines().count(), 5);
        assert_eq!(csv.lines().next().unwrap(), RECORDS_HEADER.join(","));
        assert!(recs.iter().all(|r| r.n_tilde == if r.axis_value == 60 { 3 } else { 5 }));
        for r in recs.iter().filter(|r| r.variant == Variant::NuclearOnly) {
            assert!(r.prediction.lambda2.is_finite());
        }
    }

    #[test]
    fn file_pipeline_matches_in_process() {
        let mut cfg = tiny_config();
        cfg.sparsity_s = 1;
        cfg.sigma = 0.1;
        cfg.n_tilde_rule = NTildeRule::Fixed(4);
        let recs = run_experiment(&cfg).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let trial = generate_trial(&cfg, 100, 0).unwrap();
        write_trial(dir.path(), &trial, &cfg, 100, 0).unwrap();
        let est = dir.path().join("est");
        solve_files(&cfg, dir.path(), &est, Variant::Robust, None).unwrap();
        let report = evaluate_files(dir.path(), &est).unwrap();
        assert_eq!(report, recs[0].report);
    }
}
