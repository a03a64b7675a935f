//! Sampling distributions over the non-corrupted index set and the
//! constants of the sampling assumptions.

use std::path::Path;

use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrix::IndexSet;
use crate::seeded_rng;

/// Probability mass over matrix positions, supported inside `support`.
#[derive(Clone, Debug, PartialEq)]
pub struct SamplingDistribution {
    support: IndexSet,
    /// Row-major, zero outside `support`.
    pmf: Vec<f64>,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct AssumptionConstants {
    /// Lower bound on entry probabilities: π_jk ≥ 1/(μ|I|). Infinite when
    /// an entry of the support has zero mass.
    pub mu: f64,
    /// Row and column marginals: max(π_·k, π_j·) ≤ L/m.
    pub l_const: f64,
    /// Column second moments: max_k π_·k^(2) ≤ γ²/(|I| m₂).
    pub gamma: f64,
    /// Upper bound on entry probabilities: π_jk ≤ μ₁/|I|.
    pub mu1: f64,
}

const SUM_TOL: f64 = 1e-10;

impl SamplingDistribution {
    pub fn new(support: IndexSet, pmf: Vec<f64>) -> Result<Self> {
        let (m1, m2) = support.dims();
        if pmf.len() != m1 * m2 {
            return Err(Error::invalid(format!(
                "pmf has {} cells for a {m1}x{m2} grid",
                pmf.len()
            )));
        }
        if support.is_empty() {
            return Err(Error::invalid("empty support"));
        }
        for (p, (&v, &inside)) in pmf.iter().zip(support.mask()).enumerate() {
            if !v.is_finite() || v < 0.0 {
                return Err(Error::invalid(format!("bad probability {v} at cell {p}")));
            }
            if v > 0.0 && !inside {
                return Err(Error::invalid(format!(
                    "mass at ({}, {}) outside the support",
                    p / m2,
                    p % m2
                )));
            }
        }
        let total: f64 = pmf.iter().sum();
        if (total - 1.0).abs() > SUM_TOL {
            return Err(Error::invalid(format!("probabilities sum to {total}")));
        }
        Ok(Self { support, pmf })
    }

    /// π_jk = 1/|I| on `support`.
    pub fn uniform_on(support: &IndexSet) -> Result<Self> {
        if support.is_empty() {
            return Err(Error::invalid("uniform distribution on an empty set"));
        }
        let p = 1.0 / support.len() as f64;
        let pmf = support.mask().iter().map(|&b| if b { p } else { 0.0 }).collect();
        Self::new(support.clone(), pmf)
    }

    /// π_jk ∝ 1 + β cos(2πk/m₂) on `support`, with β ∈ [0, 1).
    pub fn tilt(support: &IndexSet, beta: f64) -> Result<Self> {
        if !(0.0..1.0).contains(&beta) {
            return Err(Error::invalid(format!("tilt beta {beta} not in [0, 1)")));
        }
        if support.is_empty() {
            return Err(Error::invalid("tilt distribution on an empty set"));
        }
        let (_, m2) = support.dims();
        let weight =
            |k: usize| 1.0 + beta * (2.0 * std::f64::consts::PI * k as f64 / m2 as f64).cos();
        let mut pmf: Vec<f64> = support
            .mask()
            .iter()
            .enumerate()
            .map(|(p, &b)| if b { weight(p % m2) } else { 0.0 })
            .collect();
        let total: f64 = pmf.iter().sum();
        pmf.iter_mut().for_each(|v| *v /= total);
        Self::new(support.clone(), pmf)
    }

    pub fn dims(&self) -> (usize, usize) {
        self.support.dims()
    }

    pub fn support(&self) -> &IndexSet {
        &self.support
    }

    pub fn prob(&self, j: usize, k: usize) -> f64 {
        let (_, m2) = self.dims();
        self.pmf[j * m2 + k]
    }

    pub fn pmf(&self) -> &[f64] {
        &self.pmf
    }

    /// π_·k for every column.
    pub fn column_marginals(&self) -> Vec<f64> {
        let (_, m2) = self.dims();
        let mut out = vec![0.0; m2];
        for row in self.pmf.chunks_exact(m2) {
            out.iter_mut().zip(row).for_each(|(acc, v)| *acc += v);
        }
        out
    }

    /// π_j· for every row.
    pub fn row_marginals(&self) -> Vec<f64> {
        let (_, m2) = self.dims();
        self.pmf.chunks_exact(m2).map(|row| row.iter().sum()).collect()
    }

    /// π_·k^(2) = Σ_j π_jk² for every column.
    pub fn column_second_moments(&self) -> Vec<f64> {
        let (_, m2) = self.dims();
        let mut out = vec![0.0; m2];
        for row in self.pmf.chunks_exact(m2) {
            out.iter_mut().zip(row).for_each(|(acc, v)| *acc += v * v);
        }
        out
    }

    pub fn max_prob(&self) -> f64 {
        self.pmf.iter().copied().fold(0.0, f64::max)
    }

    /// The tightest constants for which the sampling assumptions hold.
    pub fn measure_constants(&self) -> AssumptionConstants {
        let (m1, m2) = self.dims();
        let size = self.support.len() as f64;
        let min_inside = self
            .support
            .iter()
            .map(|(j, k)| self.prob(j, k))
            .fold(f64::INFINITY, f64::min);
        let mu = if min_inside > 0.0 {
            1.0 / (size * min_inside)
        } else {
            f64::INFINITY
        };
        // Marginals of |I|·π keep the uniform case free of rounding.
        let scaled = Self {
            support: self.support.clone(),
            pmf: self.pmf.iter().map(|p| p * size).collect(),
        };
        let max_col = scaled.column_marginals().into_iter().fold(0.0, f64::max);
        let max_row = scaled.row_marginals().into_iter().fold(0.0, f64::max);
        let max_second = self.column_second_moments().into_iter().fold(0.0, f64::max);
        AssumptionConstants {
            mu,
            l_const: m1.min(m2) as f64 * max_col.max(max_row) / size,
            gamma: (size * m2 as f64 * max_second).sqrt(),
            mu1: size * self.max_prob(),
        }
    }

    /// max_k π_·k ≤ √2 γ / m₂.
    pub fn check_milder_marginal(&self, gamma: f64) -> bool {
        let (_, m2) = self.dims();
        let bound = std::f64::consts::SQRT_2 * gamma / m2 as f64;
        self.column_marginals().iter().all(|&p| p <= bound)
    }

    /// `n` i.i.d. draws (with replacement), deterministic in `seed`.
    pub fn sample(&self, n: usize, seed: u64) -> Vec<(usize, usize)> {
        let mut rng = seeded_rng(seed);
        self.sample_with(n, &mut rng)
    }

    pub(crate) fn sample_with(&self, n: usize, rng: &mut impl rand::Rng) -> Vec<(usize, usize)> {
        let (_, m2) = self.dims();
        let cells: Vec<usize> = (0..self.pmf.len()).filter(|&p| self.pmf[p] > 0.0).collect();
        let weights = cells.iter().map(|&p| self.pmf[p]);
        let dist = WeightedIndex::new(weights).expect("pmf has positive mass");
        (0..n)
            .map(|_| {
                let p = cells[dist.sample(rng)];
                (p / m2, p % m2)
            })
            .collect()
    }

    /// Reads `row,col,prob` rows. The support is the listed cells; a total
    /// within 1e-6 of one is renormalized (values are kept verbatim when
    /// already normalized), anything further off is rejected.
    pub fn read_csv(path: &Path, dims: (usize, usize)) -> Result<Self> {
        let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
        Self::from_csv_reader(file, dims)
    }

    pub fn from_csv_reader(reader: impl std::io::Read, (m1, m2): (usize, usize)) -> Result<Self> {
        #[derive(Deserialize)]
        struct Row {
            row: usize,
            col: usize,
            prob: f64,
        }
        let mut rdr = csv::Reader::from_reader(reader);
        let headers = rdr.headers()?.clone();
        if headers.iter().map(str::trim).collect::<Vec<_>>() != ["row", "col", "prob"] {
            return Err(Error::Parse(format!("bad distribution header {headers:?}")));
        }
        let mut support = IndexSet::empty(m1, m2);
        let mut pmf = vec![0.0; m1 * m2];
        for rec in rdr.deserialize() {
            let Row { row, col, prob } = rec?;
            if row >= m1 || col >= m2 {
                return Err(Error::Parse(format!("cell ({row}, {col}) outside {m1}x{m2}")));
            }
            if !prob.is_finite() || prob < 0.0 {
                return Err(Error::Parse(format!("bad probability {prob}")));
            }
            support.insert(row, col);
            pmf[row * m2 + col] += prob;
        }
        let total: f64 = pmf.iter().sum();
        if (total - 1.0).abs() >= 1e-6 {
            return Err(Error::Parse(format!("probabilities sum to {total}")));
        }
        if (total - 1.0).abs() > SUM_TOL {
            pmf.iter_mut().for_each(|v| *v /= total);
        }
        Self::new(support, pmf)
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut w = csv::Writer::from_path(path)?;
        w.write_record(["row", "col", "prob"])?;
        for (j, k) in self.support.iter() {
            w.write_record([j.to_string(), k.to_string(), format!("{:?}", self.prob(j, k))])?;
        }
        w.flush().map_err(|e| Error::io(path, e))
    }
}
