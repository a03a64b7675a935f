//! Synthetic ground truth, observation sets and lower-bound test instances.

use std::path::Path;

use rand::seq::index::sample as sample_indices;
use rand::Rng;
use rand_distr::{Distribution, Normal, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrix::{DenseMatrix, IndexSet};
use crate::sampling::SamplingDistribution;
use crate::solver::Samples;
use crate::{derive_seed, seeded_rng};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CorruptionKind {
    /// At most `s` nonzero columns.
    Columnwise,
    /// At most `s` nonzero entries.
    Entrywise,
}

/// How corrupted observations are placed inside the corruption support.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Adversary {
    /// Uniform over the corruption support.
    UniformSupport,
    /// Every corrupted draw falls in one column of the support.
    SingleColumn,
    /// Uniform locations; the corruption at each hit cell is ±a with the sign
    /// of the clean entry, maximizing |y|.
    WorstSign,
    /// Single-column placement with worst-sign ±a values.
    SingleColumnWorstSign,
}

impl Adversary {
    fn worst_sign_values(self) -> bool {
        matches!(self, Adversary::WorstSign | Adversary::SingleColumnWorstSign)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ProblemInstance {
    pub l0: DenseMatrix,
    pub s0: DenseMatrix,
    pub a_bound: f64,
    pub rank_r: usize,
    pub sparsity_s: usize,
    pub corruption_kind: CorruptionKind,
    /// Ĩ; its complement is the non-corrupted index set I.
    pub corrupted_support: IndexSet,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Sample {
    pub row: usize,
    pub col: usize,
    pub value: f64,
}

/// Observations split into the non-corrupted part Ω and the corrupted part Ω̃.
#[derive(Clone, Debug, PartialEq)]
pub struct ObservationSet {
    pub dims: (usize, usize),
    pub noncorrupted: Vec<Sample>,
    pub corrupted: Vec<Sample>,
}

/// Output of [`gen_observations`]: the observations, the ground truth with
/// `S₀` zeroed off the observed corrupted cells, and the noise drawn for Ω.
#[derive(Clone, Debug)]
pub struct Generated {
    pub instance: ProblemInstance,
    pub observations: ObservationSet,
    /// ξ_i for each entry of `observations.noncorrupted`, in order.
    pub noise: Vec<f64>,
}

fn max_sparsity(kind: CorruptionKind, m1: usize, m2: usize) -> usize {
    match kind {
        CorruptionKind::Columnwise => m2 / 2,
        CorruptionKind::Entrywise => m1 * m2 / 2,
    }
}

impl ProblemInstance {
    /// Assembles an instance and checks rank, box and support invariants.
    pub fn new(
        l0: DenseMatrix,
        s0: DenseMatrix,
        a_bound: f64,
        rank_r: usize,
        sparsity_s: usize,
        corruption_kind: CorruptionKind,
        corrupted_support: IndexSet,
    ) -> Result<Self> {
        let (m1, m2) = l0.dims();
        if s0.dims() != (m1, m2) || corrupted_support.dims() != (m1, m2) {
            return Err(Error::Dimension {
                expected: (m1, m2),
                got: s0.dims(),
            });
        }
        if !(a_bound > 0.0) {
            return Err(Error::invalid("a_bound must be positive"));
        }
        let slack = 1e-12 * a_bound;
        if l0.max_abs() > a_bound + slack || s0.max_abs() > a_bound + slack {
            return Err(Error::invalid("ground truth exceeds the box bound"));
        }
        if l0.rank() > rank_r {
            return Err(Error::invalid(format!("rank(L0) exceeds {rank_r}")));
        }
        if sparsity_s > max_sparsity(corruption_kind, m1, m2) {
            return Err(Error::invalid(format!(
                "sparsity {sparsity_s} too large for {corruption_kind:?} corruption"
            )));
        }
        let active = match corruption_kind {
            CorruptionKind::Columnwise => s0.count_nonzero_columns(),
            CorruptionKind::Entrywise => s0.count_nonzero(),
        };
        if active > sparsity_s {
            return Err(Error::invalid(format!("S0 has {active} > {sparsity_s} nonzero groups")));
        }
        let outside = corrupted_support.complement();
        if outside.iter().any(|(j, k)| s0[(j, k)] != 0.0) {
            return Err(Error::invalid("S0 nonzero outside the corrupted support"));
        }
        Ok(Self {
            l0,
            s0,
            a_bound,
            rank_r,
            sparsity_s,
            corruption_kind,
            corrupted_support,
        })
    }

    /// Random low-rank `L₀` and random corruption `S₀`.
    pub fn synthetic(
        (m1, m2): (usize, usize),
        rank_r: usize,
        sparsity_s: usize,
        a_bound: f64,
        kind: CorruptionKind,
        seed: u64,
    ) -> Result<Self> {
        let l0 = gen_low_rank(m1, m2, rank_r, a_bound, derive_seed(seed, &[1]))?;
        let (s0, support) =
            gen_corruption(m1, m2, sparsity_s, a_bound, kind, derive_seed(seed, &[2]))?;
        Self::new(l0, s0, a_bound, rank_r, sparsity_s, kind, support)
    }

    pub fn dims(&self) -> (usize, usize) {
        self.l0.dims()
    }

    /// I, the complement of the corruption support.
    pub fn noncorrupted_set(&self) -> IndexSet {
        self.corrupted_support.complement()
    }
}

/// `U Vᵀ` with standard Gaussian factors, rescaled so its largest absolute
/// entry equals `a_bound`.
pub fn gen_low_rank(m1: usize, m2: usize, r: usize, a_bound: f64, seed: u64) -> Result<DenseMatrix> {
    if r == 0 || r > m1.min(m2) {
        return Err(Error::invalid(format!("rank {r} outside 1..={}", m1.min(m2))));
    }
    if !(a_bound > 0.0) {
        return Err(Error::invalid("a_bound must be positive"));
    }
    let mut rng = seeded_rng(seed);
    let mut gauss = |n: usize| -> Vec<f64> { (0..n).map(|_| StandardNormal.sample(&mut rng)).collect() };
    let u = gauss(m1 * r);
    let v = gauss(m2 * r);
    let prod = DenseMatrix::from_fn(m1, m2, |j, k| (0..r).map(|t| u[j * r + t] * v[k * r + t]).sum());
    let top = prod.max_abs();
    if top == 0.0 {
        return Err(Error::Numerical("degenerate low-rank draw".into()));
    }
    Ok(prod.scale(a_bound / top))
}

fn corruption_value(rng: &mut impl Rng, a_bound: f64) -> f64 {
    let mag = rng.random_range(a_bound / 10.0..=a_bound);
    if rng.random_bool(0.5) {
        mag
    } else {
        -mag
    }
}

/// Sparse corruption with magnitudes uniform on [a/10, a] and random signs.
/// Columnwise: `s` random columns, fully populated. Entrywise: `s` random cells.
pub fn gen_corruption(
    m1: usize,
    m2: usize,
    s: usize,
    a_bound: f64,
    kind: CorruptionKind,
    seed: u64,
) -> Result<(DenseMatrix, IndexSet)> {
    if s > max_sparsity(kind, m1, m2) {
        return Err(Error::invalid(format!("sparsity {s} out of range for {kind:?}")));
    }
    let mut rng = seeded_rng(seed);
    let mut s0 = DenseMatrix::zeros(m1, m2);
    let support = match kind {
        CorruptionKind::Columnwise => {
            let mut cols = sample_indices(&mut rng, m2, s).into_vec();
            cols.sort_unstable();
            IndexSet::columns(m1, m2, &cols)?
        }
        CorruptionKind::Entrywise => {
            let mut cells = sample_indices(&mut rng, m1 * m2, s).into_vec();
            cells.sort_unstable();
            IndexSet::from_members(m1, m2, cells.into_iter().map(|p| (p / m2, p % m2)))?
        }
    };
    for (j, k) in support.iter() {
        s0[(j, k)] = corruption_value(&mut rng, a_bound);
    }
    Ok((s0, support))
}

/// Draws `n` non-corrupted observations from `pi` and `n_tilde` corrupted
/// ones placed by `adversary`, all with N(0, σ²) noise.
#[allow(clippy::too_many_arguments)]
pub fn gen_observations(
    inst: &ProblemInstance,
    pi: &SamplingDistribution,
    n: usize,
    n_tilde: usize,
    noise_sigma: f64,
    adversary: Adversary,
    seed: u64,
) -> Result<Generated> {
    let dims = inst.dims();
    if pi.dims() != dims {
        return Err(Error::Dimension {
            expected: dims,
            got: pi.dims(),
        });
    }
    if n == 0 {
        return Err(Error::invalid("need at least one non-corrupted observation"));
    }
    if !(noise_sigma >= 0.0) {
        return Err(Error::invalid("noise sigma must be non-negative"));
    }
    if pi.support().iter().any(|(j, k)| inst.corrupted_support.contains(j, k)) {
        return Err(Error::invalid("sampling distribution overlaps the corrupted support"));
    }
    if n_tilde > 0 && inst.corrupted_support.is_empty() {
        return Err(Error::invalid("corrupted observations requested with empty support"));
    }

    let clean_cells = pi.sample(n, derive_seed(seed, &[1]));
    let corrupt_cells = place_corruptions(inst, n_tilde, adversary, derive_seed(seed, &[2]));

    let normal = Normal::new(0.0, noise_sigma).map_err(|e| Error::invalid(e.to_string()))?;
    let mut noise_rng = seeded_rng(derive_seed(seed, &[3]));
    let noise: Vec<f64> = (0..n).map(|_| normal.sample(&mut noise_rng)).collect();
    let corrupt_noise: Vec<f64> = (0..n_tilde).map(|_| normal.sample(&mut noise_rng)).collect();

    // Ground truth for S₀ keeps only the corrupted cells that were observed.
    let mut s0 = DenseMatrix::zeros(dims.0, dims.1);
    for &(j, k) in &corrupt_cells {
        s0[(j, k)] = if !adversary.worst_sign_values() {
            inst.s0[(j, k)]
        } else if inst.l0[(j, k)] < 0.0 {
            -inst.a_bound
        } else {
            inst.a_bound
        };
    }

    let noncorrupted = clean_cells
        .iter()
        .zip(&noise)
        .map(|(&(row, col), xi)| Sample {
            row,
            col,
            value: inst.l0[(row, col)] + xi,
        })
        .collect();
    let corrupted = corrupt_cells
        .iter()
        .zip(&corrupt_noise)
        .map(|(&(row, col), xi)| Sample {
            row,
            col,
            value: inst.l0[(row, col)] + s0[(row, col)] + xi,
        })
        .collect();

    let instance = ProblemInstance {
        s0,
        ..inst.clone()
    };
    Ok(Generated {
        instance,
        observations: ObservationSet {
            dims,
            noncorrupted,
            corrupted,
        },
        noise,
    })
}

fn place_corruptions(
    inst: &ProblemInstance,
    n_tilde: usize,
    adversary: Adversary,
    seed: u64,
) -> Vec<(usize, usize)> {
    if n_tilde == 0 {
        return Vec::new();
    }
    let mut rng = seeded_rng(seed);
    let cells: Vec<(usize, usize)> = match adversary {
        Adversary::UniformSupport | Adversary::WorstSign => inst.corrupted_support.iter().collect(),
        Adversary::SingleColumn | Adversary::SingleColumnWorstSign => {
            let cols = inst.corrupted_support.occupied_columns();
            let target = cols[rng.random_range(0..cols.len())];
            inst.corrupted_support.iter().filter(|&(_, k)| k == target).collect()
        }
    };
    (0..n_tilde).map(|_| cells[rng.random_range(0..cells.len())]).collect()
}

/// Hard instances from the minimax lower-bound construction: a block matrix
/// replicating a random binary `L̃` scaled to γ(σ∧a)√(rM/n), and a binary
/// corruption with entries γ(σ∧a) on the right half of the columns.
#[allow(clippy::too_many_arguments)]
pub fn gen_lower_bound_instance(
    (m1, m2): (usize, usize),
    r: usize,
    s: usize,
    n: usize,
    sigma: f64,
    a_bound: f64,
    gamma: f64,
    kind: CorruptionKind,
    seed: u64,
) -> Result<ProblemInstance> {
    if m1 < 2 || m2 < 2 {
        return Err(Error::invalid("lower-bound instances need m1, m2 >= 2"));
    }
    if r == 0 || r > m1.min(m2) {
        return Err(Error::invalid(format!("rank {r} outside 1..={}", m1.min(m2))));
    }
    if s > max_sparsity(kind, m1, m2) {
        return Err(Error::invalid(format!("sparsity {s} out of range for {kind:?}")));
    }
    if !(gamma > 0.0 && gamma <= 1.0) {
        return Err(Error::invalid("gamma must lie in (0, 1]"));
    }
    if n == 0 || !(sigma > 0.0) || !(a_bound > 0.0) {
        return Err(Error::invalid("n, sigma and a_bound must be positive"));
    }
    let big_m = m1.max(m2) as f64;
    let base = gamma * sigma.min(a_bound);
    let l_level = base * (r as f64 * big_m / n as f64).sqrt();
    if l_level > a_bound {
        return Err(Error::invalid("low-rank level exceeds a_bound; need r*M <= n"));
    }

    let mut rng = seeded_rng(seed);
    let mut l0 = DenseMatrix::zeros(m1, m2);
    if m1 >= m2 {
        // (L̃ | … | L̃ | O) with L̃ ∈ {0, level}^{m1×r}
        let pattern: Vec<bool> = (0..m1 * r).map(|_| rng.random_bool(0.5)).collect();
        let copies = m2 / (2 * r);
        for b in 0..copies {
            for j in 0..m1 {
                for t in 0..r {
                    if pattern[j * r + t] {
                        l0[(j, b * r + t)] = l_level;
                    }
                }
            }
        }
    } else {
        // rows: L̃ = (L̄ | O) ∈ R^{r×m2}, stacked ⌊m1/r⌋ times, then zeros
        let half = m2 / 2;
        let pattern: Vec<bool> = (0..r * half).map(|_| rng.random_bool(0.5)).collect();
        let copies = m1 / r;
        for b in 0..copies {
            for t in 0..r {
                for k in 0..half {
                    if pattern[t * half + k] {
                        l0[(b * r + t, k)] = l_level;
                    }
                }
            }
        }
    }

    let mut s0 = DenseMatrix::zeros(m1, m2);
    let support = match kind {
        CorruptionKind::Columnwise => {
            let cols: Vec<usize> = (m2 - s..m2).collect();
            let support = IndexSet::columns(m1, m2, &cols)?;
            for (j, k) in support.iter() {
                if rng.random_bool(0.5) {
                    s0[(j, k)] = base;
                }
            }
            support
        }
        CorruptionKind::Entrywise => {
            let first = m2 / 2;
            let width = m2 - first;
            let mut cells = sample_indices(&mut rng, m1 * width, s).into_vec();
            cells.sort_unstable();
            let support = IndexSet::from_members(
                m1,
                m2,
                cells.into_iter().map(|p| (p / width, first + p % width)),
            )?;
            for (j, k) in support.iter() {
                s0[(j, k)] = base;
            }
            support
        }
    };
    ProblemInstance::new(l0, s0, a_bound, r, s, kind, support)
}

impl ObservationSet {
    pub fn n(&self) -> usize {
        self.noncorrupted.len()
    }

    pub fn n_tilde(&self) -> usize {
        self.corrupted.len()
    }

    /// N = |Ω| + |Ω̃|.
    pub fn total(&self) -> usize {
        self.n() + self.n_tilde()
    }

    /// The flag-free view handed to the solver.
    pub fn unflagged(&self) -> Samples {
        Samples::new(
            self.dims,
            self.noncorrupted.iter().chain(&self.corrupted).copied().collect(),
        )
        .expect("generated samples lie inside the grid")
    }

    /// Writes `row,col,value,flag` with flag 1 on corrupted rows.
    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut w = csv::Writer::from_path(path)?;
        w.write_record(["row", "col", "value", "flag"])?;
        for (flag, list) in [("0", &self.noncorrupted), ("1", &self.corrupted)] {
            for s in list {
                w.write_record([
                    s.row.to_string(),
                    s.col.to_string(),
                    format!("{:?}", s.value),
                    flag.to_string(),
                ])?;
            }
        }
        w.flush().map_err(|e| Error::io(path, e))
    }

    pub fn read_csv(path: &Path, dims: (usize, usize)) -> Result<Self> {
        let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
        let mut out = Self {
            dims,
            noncorrupted: Vec::new(),
            corrupted: Vec::new(),
        };
        for rec in read_rows(file, dims)? {
            let (sample, flag) = rec;
            match flag {
                0 => out.noncorrupted.push(sample),
                1 => out.corrupted.push(sample),
                f => return Err(Error::Parse(format!("bad flag {f}"))),
            }
        }
        Ok(out)
    }
}

#[derive(Deserialize)]
struct ObsRow {
    row: usize,
    col: usize,
    value: f64,
    flag: u8,
}

fn read_rows(reader: impl std::io::Read, (m1, m2): (usize, usize)) -> Result<Vec<(Sample, u8)>> {
    let mut rdr = csv::Reader::from_reader(reader);
    let headers = rdr.headers()?.clone();
    if headers.iter().map(str::trim).collect::<Vec<_>>() != ["row", "col", "value", "flag"] {
        return Err(Error::Parse(format!("bad observation header {headers:?}")));
    }
    let mut out = Vec::new();
    for rec in rdr.deserialize() {
        let ObsRow { row, col, value, flag } = rec?;
        if row >= m1 || col >= m2 {
            return Err(Error::Parse(format!("cell ({row}, {col}) outside {m1}x{m2}")));
        }
        if !value.is_finite() {
            return Err(Error::Parse(format!("non-finite value at ({row}, {col})")));
        }
        out.push((Sample { row, col, value }, flag));
    }
    Ok(out)
}

/// Reads an observation file for the solver: the flag column is parsed for
/// well-formedness and then dropped.
pub fn read_samples(path: &Path, dims: (usize, usize)) -> Result<Samples> {
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let rows = read_rows(file, dims)?;
    Samples::new(dims, rows.into_iter().map(|(s, _)| s).collect())
}
