//! Regularization parameters, sample-size thresholds, rate predictions and
//! stochastic-term diagnostics. All logarithms are natural.

use std::path::Path;

use rand::Rng as _;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrix::{norm, DenseMatrix, NormKind};
use crate::sampling::{AssumptionConstants, SamplingDistribution};
use crate::synth::{CorruptionKind, ObservationSet};
use crate::{derive_seed, seeded_rng};

fn ln_d(m1: usize, m2: usize) -> f64 {
    ((m1 + m2) as f64).ln()
}

fn m_min(m1: usize, m2: usize) -> f64 {
    m1.min(m2) as f64
}

/// λ₁ = C(σ∨a)√(L log d / (N m)),  λ₂ = Cγ(σ∨a)√(log d / (N m₂)).
#[allow(clippy::too_many_arguments)]
pub fn lambdas_columnwise(
    sigma: f64,
    a: f64,
    l_const: f64,
    gamma: f64,
    total: f64,
    m1: usize,
    m2: usize,
    c: f64,
) -> (f64, f64) {
    let scale = c * sigma.max(a);
    let log_d = ln_d(m1, m2);
    (
        scale * (l_const * log_d / (total * m_min(m1, m2))).sqrt(),
        scale * gamma * (log_d / (total * m2 as f64)).sqrt(),
    )
}

/// λ₁ = C(σ∨a)√(μ₁ log d / (N m)),  λ₂ = C(σ∨a) log d / N.
pub fn lambdas_entrywise(sigma: f64, a: f64, mu1: f64, total: f64, m1: usize, m2: usize, c: f64) -> (f64, f64) {
    let scale = c * sigma.max(a);
    let log_d = ln_d(m1, m2);
    (
        scale * (mu1 * log_d / (total * m_min(m1, m2))).sqrt(),
        scale * log_d / total,
    )
}

/// n* = 2 log d · max(m₂/γ, m log²m / L).
pub fn n_star(gamma: f64, l_const: f64, m1: usize, m2: usize) -> f64 {
    let m = m_min(m1, m2);
    2.0 * ln_d(m1, m2) * (m2 as f64 / gamma).max(m * m.ln().powi(2) / l_const)
}

/// Window on n under which the entrywise parameters apply:
/// `2 m log d log²m / L ≤ n ≤ m₁m₂ log d / μ₁`.
pub fn entrywise_n_window(l_const: f64, mu1: f64, m1: usize, m2: usize) -> (f64, f64) {
    let m = m_min(m1, m2);
    let log_d = ln_d(m1, m2);
    (
        2.0 * m * log_d * m.ln().powi(2) / l_const,
        (m1 * m2) as f64 * log_d / mu1,
    )
}

/// Everything the four Ψ terms depend on.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PsiInputs {
    pub mu: f64,
    pub m1: usize,
    pub m2: usize,
    pub rank_r: usize,
    pub lambda1: f64,
    pub lambda2: f64,
    pub a: f64,
    pub sigma: f64,
    /// n = |Ω|
    pub n: usize,
    /// |Ω̃|
    pub n_tilde: usize,
    /// |Ĩ|
    pub corrupted_support_size: usize,
    /// 𝓡(Id_Ω̃)
    pub reg_of_corrupted_indicator: f64,
    /// E‖Σ_R‖ (operator norm)
    pub e_sigma_r_op: f64,
    /// E 𝓡*(Σ_R)
    pub e_sigma_r_dual: f64,
}

/// Ψ₁..Ψ₄ evaluated literally.
pub fn psi_terms(p: &PsiInputs) -> [f64; 4] {
    let n = p.n as f64;
    let total = (p.n + p.n_tilde) as f64;
    let aleph = total / n;
    let log_d = ln_d(p.m1, p.m2);
    let cells = (p.m1 * p.m2) as f64;
    let a = p.a;
    let root = (log_d / n).sqrt();

    let psi1 = p.mu * p.mu * cells * p.rank_r as f64
        * (aleph * aleph * p.lambda1 * p.lambda1 + a * a * p.e_sigma_r_op * p.e_sigma_r_op)
        + a * a * p.mu * root;

    let corrupt_mass = p.mu * p.n_tilde as f64 * (a * a + p.sigma * p.sigma * log_d) / total;
    let reg_part = p.mu * a * p.reg_of_corrupted_indicator;

    let psi2 = reg_part
        * (p.lambda2 * a / p.lambda1 * p.e_sigma_r_op + aleph * p.lambda2 + a * p.e_sigma_r_dual);
    let psi3 = corrupt_mass
        * (a * p.e_sigma_r_op / p.lambda1 + a * p.e_sigma_r_dual / p.lambda2 + aleph)
        + a * a * p.corrupted_support_size as f64 / cells;
    let psi4 = p.mu * a * a * root
        + reg_part * (aleph * p.lambda2 + a * p.e_sigma_r_dual)
        + (a * p.e_sigma_r_dual / p.lambda2 + aleph) * corrupt_mass;
    [psi1, psi2, psi3, psi4]
}

/// Minimax rates: (σ∧a)²((Mr + |Ω̃|)/n + s/m₂) for columnwise corruption,
/// with `s/(m₁m₂)` in place of `s/m₂` for entrywise corruption.
#[allow(clippy::too_many_arguments)]
pub fn psi_rates(
    sigma: f64,
    a: f64,
    big_m: usize,
    r: usize,
    n: usize,
    n_tilde: usize,
    s: usize,
    m1: usize,
    m2: usize,
    kind: CorruptionKind,
) -> f64 {
    let level = sigma.min(a).powi(2);
    let sparse_cells = match kind {
        CorruptionKind::Columnwise => m2 as f64,
        CorruptionKind::Entrywise => (m1 * m2) as f64,
    };
    level * ((big_m * r + n_tilde) as f64 / n as f64 + s as f64 / sparse_cells)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PredictionConstants {
    pub c: f64,
    pub sigma: f64,
    pub a: f64,
    pub mu: f64,
    pub l_const: f64,
    pub gamma: f64,
    pub mu1: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RatePrediction {
    pub lambda1: f64,
    pub lambda2: f64,
    pub n_star: f64,
    pub psi1: f64,
    pub psi2: f64,
    pub psi3: f64,
    pub psi4: f64,
    #[serde(rename = "psi_GS")]
    pub psi_gs: f64,
    #[serde(rename = "psi_S")]
    pub psi_s: f64,
    pub constants: PredictionConstants,
}

/// Configuration of a single prediction.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PredictionSetup {
    pub dims: (usize, usize),
    pub rank_r: usize,
    pub sparsity_s: usize,
    pub kind: CorruptionKind,
    pub sigma: f64,
    pub a: f64,
    pub n: usize,
    pub n_tilde: usize,
    pub c: f64,
    pub constants: AssumptionConstants,
}

impl PredictionSetup {
    pub fn lambdas(&self) -> (f64, f64) {
        let (m1, m2) = self.dims;
        let total = (self.n + self.n_tilde) as f64;
        let k = &self.constants;
        match self.kind {
            CorruptionKind::Columnwise => {
                lambdas_columnwise(self.sigma, self.a, k.l_const, k.gamma, total, m1, m2, self.c)
            }
            CorruptionKind::Entrywise => lambdas_entrywise(self.sigma, self.a, k.mu1, total, m1, m2, self.c),
        }
    }

    /// Order-of-magnitude surrogates (unit constant) for E‖Σ_R‖ and E𝓡*(Σ_R).
    pub fn stochastic_surrogates(&self) -> (f64, f64) {
        let (m1, m2) = self.dims;
        let n = self.n as f64;
        let total = (self.n + self.n_tilde) as f64;
        let log_d = ln_d(m1, m2);
        let k = &self.constants;
        let op = (k.l_const * log_d / (n * m_min(m1, m2))).sqrt() + log_d * log_d / total;
        let dual = match self.kind {
            CorruptionKind::Columnwise => (k.gamma * log_d / (n * m2 as f64)).sqrt() + log_d / n,
            CorruptionKind::Entrywise => (k.mu1 * log_d / (n * (m1 * m2) as f64)).sqrt() + log_d / n,
        };
        (op, dual)
    }

    /// Evaluates the prediction with the given stochastic-term expectations,
    /// or the surrogates when `None`.
    pub fn predict(&self, expectations: Option<(f64, f64)>) -> RatePrediction {
        let (m1, m2) = self.dims;
        let (lambda1, lambda2) = self.lambdas();
        let (e_op, e_dual) = expectations.unwrap_or_else(|| self.stochastic_surrogates());
        let s = self.sparsity_s;
        let (support, indicator) = match self.kind {
            CorruptionKind::Columnwise => (m1 * s, ((s * self.n_tilde) as f64).sqrt()),
            CorruptionKind::Entrywise => (s, self.n_tilde as f64),
        };
        let k = &self.constants;
        let [psi1, psi2, psi3, psi4] = psi_terms(&PsiInputs {
            mu: k.mu,
            m1,
            m2,
            rank_r: self.rank_r,
            lambda1,
            lambda2,
            a: self.a,
            sigma: self.sigma,
            n: self.n,
            n_tilde: self.n_tilde,
            corrupted_support_size: support,
            reg_of_corrupted_indicator: indicator,
            e_sigma_r_op: e_op,
            e_sigma_r_dual: e_dual,
        });
        let big_m = m1.max(m2);
        let rate = |kind| psi_rates(self.sigma, self.a, big_m, self.rank_r, self.n, self.n_tilde, s, m1, m2, kind);
        RatePrediction {
            lambda1,
            lambda2,
            n_star: n_star(k.gamma, k.l_const, m1, m2),
            psi1,
            psi2,
            psi3,
            psi4,
            psi_gs: rate(CorruptionKind::Columnwise),
            psi_s: rate(CorruptionKind::Entrywise),
            constants: PredictionConstants {
                c: self.c,
                sigma: self.sigma,
                a: self.a,
                mu: k.mu,
                l_const: k.l_const,
                gamma: k.gamma,
                mu1: k.mu1,
            },
        }
    }
}

/// Σ = (1/N)Σ_{i∈Ω} ξᵢXᵢ, Σ_R = (1/n)Σ_{i∈Ω} εᵢXᵢ, W = (1/N)Σ_{i∈Ω} Xᵢ.
#[derive(Clone, Debug)]
pub struct StochasticTerms {
    sigma: Option<DenseMatrix>,
    pub sigma_r: DenseMatrix,
    pub w: DenseMatrix,
}

impl StochasticTerms {
    /// Σ; only available when the noise values were supplied.
    pub fn sigma(&self) -> Result<&DenseMatrix> {
        self.sigma
            .as_ref()
            .ok_or_else(|| Error::invalid("Sigma needs the noise values of the non-corrupted observations"))
    }
}

/// Accumulates the stochastic terms over Ω. Rademacher signs for Σ_R come
/// from `seed`; `noise` holds ξᵢ for each non-corrupted observation, in order.
pub fn stochastic_terms(obs: &ObservationSet, noise: Option<&[f64]>, seed: u64) -> Result<StochasticTerms> {
    let (m1, m2) = obs.dims;
    if obs.n() == 0 {
        return Err(Error::invalid("no non-corrupted observations"));
    }
    if let Some(xi) = noise {
        if xi.len() != obs.n() {
            return Err(Error::invalid(format!(
                "{} noise values for {} observations",
                xi.len(),
                obs.n()
            )));
        }
    }
    let total = obs.total() as f64;
    let n = obs.n() as f64;
    let mut rng = seeded_rng(seed);
    let mut sigma = noise.map(|_| DenseMatrix::zeros(m1, m2));
    let mut sigma_r = DenseMatrix::zeros(m1, m2);
    let mut w = DenseMatrix::zeros(m1, m2);
    for (i, s) in obs.noncorrupted.iter().enumerate() {
        let eps = if rng.random_bool(0.5) { 1.0 } else { -1.0 };
        sigma_r[(s.row, s.col)] += eps;
        w[(s.row, s.col)] += 1.0;
        if let (Some(acc), Some(xi)) = (sigma.as_mut(), noise) {
            acc[(s.row, s.col)] += xi[i];
        }
    }
    Ok(StochasticTerms {
        sigma: sigma.map(|m| m.scale(1.0 / total)),
        sigma_r: sigma_r.scale(1.0 / n),
        w: w.scale(1.0 / total),
    })
}

/// Monte-Carlo estimates of E‖Σ_R‖ and E𝓡*(Σ_R) over Rademacher draws with
/// the Ω locations held fixed. `dual` is ‖·‖₂,∞ or ‖·‖∞.
pub fn expected_sigma_r_norms(obs: &ObservationSet, dual: NormKind, draws: usize, seed: u64) -> Result<(f64, f64)> {
    if draws == 0 {
        return Err(Error::invalid("need at least one Rademacher draw"));
    }
    let mut op = 0.0;
    let mut du = 0.0;
    for d in 0..draws {
        let terms = stochastic_terms(obs, None, derive_seed(seed, &[d as u64]))?;
        op += norm(&terms.sigma_r, NormKind::Operator);
        du += norm(&terms.sigma_r, dual);
    }
    Ok((op / draws as f64, du / draws as f64))
}

/// Norms reported by [`diagnose_scaling`], in table order.
pub const DIAGNOSED_NORMS: [&str; 6] = [
    "sigma_op",
    "sigma_l2inf",
    "sigma_r_l2inf",
    "w_l2inf",
    "sigma_sup",
    "w_sup",
];

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct DiagnosticRow {
    #[serde(rename = "N")]
    pub total: usize,
    pub norm_name: String,
    pub mean: f64,
    pub stderr: f64,
    /// Log-log slope of the mean over the grid points up to this one.
    pub slope_so_far: Option<f64>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct DiagnosticTable {
    pub rows: Vec<DiagnosticRow>,
}

impl DiagnosticTable {
    /// Slope of log(mean) against log(N) over the full grid.
    pub fn slope(&self, norm_name: &str) -> Option<f64> {
        self.rows
            .iter()
            .rfind(|r| r.norm_name == norm_name)
            .and_then(|r| r.slope_so_far)
    }

    pub fn means(&self, norm_name: &str) -> Vec<f64> {
        self.rows
            .iter()
            .filter(|r| r.norm_name == norm_name)
            .map(|r| r.mean)
            .collect()
    }

    pub fn to_csv_string(&self) -> Result<String> {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(["N", "norm_name", "mean", "stderr", "slope_so_far"])?;
        for r in &self.rows {
            w.write_record([
                r.total.to_string(),
                r.norm_name.clone(),
                format!("{:?}", r.mean),
                format!("{:?}", r.stderr),
                r.slope_so_far.map(|s| format!("{s:?}")).unwrap_or_default(),
            ])?;
        }
        let bytes = w.into_inner().map_err(|e| Error::Parse(e.to_string()))?;
        String::from_utf8(bytes).map_err(|e| Error::Parse(e.to_string()))
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_csv_string()?).map_err(|e| Error::io(path, e))
    }
}

/// Least-squares slope of `ys` against `xs`.
pub fn ls_slope(xs: &[f64], ys: &[f64]) -> (f64, f64) {
    let k = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / k;
    let my = ys.iter().sum::<f64>() / k;
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let slope = sxy / sxx;
    let resid: f64 = xs
        .iter()
        .zip(ys)
        .map(|(x, y)| (y - my - slope * (x - mx)).powi(2))
        .sum();
    let stderr = if xs.len() > 2 {
        (resid / (k - 2.0) / sxx).sqrt()
    } else {
        f64::NAN
    };
    (slope, stderr)
}

fn mean_and_stderr(values: &[f64]) -> (f64, f64) {
    let k = values.len() as f64;
    let mean = values.iter().sum::<f64>() / k;
    if values.len() < 2 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (k - 1.0);
    (mean, (var / k).sqrt())
}

/// Monte-Carlo means of the stochastic-term norms for each N in the grid
/// (no corruption, so N = n), with running log-log slopes.
pub fn diagnose_scaling(
    pi: &SamplingDistribution,
    sigma: f64,
    n_grid: &[usize],
    replications: usize,
    seed: u64,
) -> Result<DiagnosticTable> {
    if replications < 20 {
        return Err(Error::invalid("diagnostics need at least 20 replications"));
    }
    if n_grid.is_empty() || n_grid.windows(2).any(|w| w[0] >= w[1]) || n_grid[0] == 0 {
        return Err(Error::invalid("N grid must be positive and strictly increasing"));
    }
    if !(sigma >= 0.0) {
        return Err(Error::invalid("sigma must be non-negative"));
    }
    let (m1, m2) = pi.dims();
    let mut per_norm: Vec<Vec<(f64, f64)>> = vec![Vec::new(); DIAGNOSED_NORMS.len()];
    let mut rows = Vec::new();
    for (gi, &total) in n_grid.iter().enumerate() {
        let values: Vec<[f64; 6]> = (0..replications)
            .into_par_iter()
            .map(|rep| {
                let rep_seed = derive_seed(seed, &[gi as u64, rep as u64]);
                let cells = pi.sample(total, derive_seed(rep_seed, &[1]));
                let mut rng = seeded_rng(derive_seed(rep_seed, &[2]));
                let xi: Vec<f64> = (0..total)
                    .map(|_| {
                        let z: f64 = StandardNormal.sample(&mut rng);
                        sigma * z
                    })
                    .collect();
                let obs = ObservationSet {
                    dims: (m1, m2),
                    noncorrupted: cells
                        .iter()
                        .zip(&xi)
                        .map(|(&(row, col), &v)| crate::synth::Sample { row, col, value: v })
                        .collect(),
                    corrupted: Vec::new(),
                };
                let t = stochastic_terms(&obs, Some(&xi), derive_seed(rep_seed, &[3]))?;
                let sig = t.sigma()?;
                Ok([
                    norm(sig, NormKind::Operator),
                    norm(sig, NormKind::L2Inf),
                    norm(&t.sigma_r, NormKind::L2Inf),
                    norm(&t.w, NormKind::L2Inf),
                    norm(sig, NormKind::Sup),
                    norm(&t.w, NormKind::Sup),
                ])
            })
            .collect::<Result<_>>()?;
        for (ni, name) in DIAGNOSED_NORMS.iter().enumerate() {
            let column: Vec<f64> = values.iter().map(|v| v[ni]).collect();
            let (mean, stderr) = mean_and_stderr(&column);
            per_norm[ni].push(((total as f64).ln(), mean.ln()));
            let pts = &per_norm[ni];
            let slope_so_far = (pts.len() >= 2 && pts.iter().all(|p| p.1.is_finite())).then(|| {
                let xs: Vec<f64> = pts.iter().map(|p| p.0).collect();
                let ys: Vec<f64> = pts.iter().map(|p| p.1).collect();
                ls_slope(&xs, &ys).0
            });
            rows.push(DiagnosticRow {
                total,
                norm_name: name.to_string(),
                mean,
                stderr,
                slope_so_far,
            });
        }
    }
    Ok(DiagnosticTable { rows })
}
