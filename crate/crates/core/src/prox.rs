//! Proximal operators and projections used by the solver.
//!
//! Every operator here solves `argmin_X ½‖X − A‖₂² + τ·R(X)` for one
//! regularizer `R`, optionally intersected with the box `‖X‖∞ ≤ a`.

use crate::error::Result;
use crate::matrix::DenseMatrix;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ProxConfig {
    pub a_bound: f64,
    /// Rounds of the Dykstra-type splitting for nuclear norm + box.
    pub dykstra_iters: usize,
    /// Relative slack under which a spectral result counts as inside the box.
    pub svd_tol: f64,
}

impl ProxConfig {
    pub fn new(a_bound: f64) -> Self {
        Self {
            a_bound,
            dykstra_iters: 20,
            svd_tol: 1e-12,
        }
    }
}

/// A prox result plus whether it was computed exactly.
#[derive(Clone, Debug)]
pub struct ProxOutput {
    pub value: DenseMatrix,
    pub exact: bool,
}

#[inline]
fn shrink(x: f64, tau: f64) -> f64 {
    x.signum() * (x.abs() - tau).max(0.0)
}

/// Entrywise `sign(x)·max(|x| − τ, 0)`; the prox of τ‖·‖₁.
pub fn soft_threshold(a: &DenseMatrix, tau: f64) -> DenseMatrix {
    debug_assert!(tau >= 0.0);
    a.map(|x| shrink(x, tau))
}

/// Column-wise `c·max(1 − τ/‖c‖₂, 0)`; the prox of τ‖·‖₂,₁.
pub fn group_soft_threshold(a: &DenseMatrix, tau: f64) -> DenseMatrix {
    debug_assert!(tau >= 0.0);
    let factors: Vec<f64> = a
        .column_norms()
        .into_iter()
        .map(|n| if n > tau { 1.0 - tau / n } else { 0.0 })
        .collect();
    let mut out = a.clone();
    let cols = a.cols();
    for row in out.as_mut_slice().chunks_exact_mut(cols) {
        row.iter_mut().zip(&factors).for_each(|(x, f)| *x *= f);
    }
    out
}

/// Singular value thresholding `U·max(Σ − τ, 0)·Vᵀ`; the prox of τ‖·‖*.
pub fn svt(a: &DenseMatrix, tau: f64) -> Result<DenseMatrix> {
    debug_assert!(tau >= 0.0);
    Ok(a.svd()?.recompose_with(|s| (s - tau).max(0.0)))
}

/// Entrywise clamp to `[−a, a]`; the Euclidean projection onto the ℓ∞ ball.
pub fn box_clip(a: &DenseMatrix, a_bound: f64) -> DenseMatrix {
    a.map(|x| x.clamp(-a_bound, a_bound))
}

/// Prox of τ‖·‖₁ plus the box indicator. Exact: the problem separates per
/// entry and each scalar problem is solved by clipping the shrunk value.
pub fn prox_l1_box(a: &DenseMatrix, tau: f64, a_bound: f64) -> DenseMatrix {
    a.map(|x| shrink(x, tau).clamp(-a_bound, a_bound))
}

/// Prox of τ‖·‖₂,₁ plus the box indicator, solved exactly per column.
///
/// For a column `c` with ‖c‖₂ > τ the minimizer is `clip(β·c)` where
/// `β = ρ/(ρ + τ)` and `ρ` is the unique positive root of
/// `ρ = ‖clip(c·ρ/(ρ + τ))‖₂`, found by bisection.
pub fn prox_l21_box(a: &DenseMatrix, tau: f64, a_bound: f64) -> DenseMatrix {
    let (m1, m2) = a.dims();
    let mut out = DenseMatrix::zeros(m1, m2);
    let mut col = vec![0.0; m1];
    for k in 0..m2 {
        col.iter_mut().zip(a.column(k)).for_each(|(c, v)| *c = v);
        let beta = l21_box_factor(&col, tau, a_bound);
        if beta == 0.0 {
            continue;
        }
        for (j, &c) in col.iter().enumerate() {
            out[(j, k)] = (beta * c).clamp(-a_bound, a_bound);
        }
    }
    out
}

fn l21_box_factor(col: &[f64], tau: f64, a_bound: f64) -> f64 {
    let norm = col.iter().map(|v| v * v).sum::<f64>().sqrt();
    if norm <= tau {
        return 0.0;
    }
    if tau == 0.0 {
        return 1.0;
    }
    let clipped_norm = |beta: f64| -> f64 {
        col.iter()
            .map(|&c| {
                let v = (beta * c).clamp(-a_bound, a_bound);
                v * v
            })
            .sum::<f64>()
            .sqrt()
    };
    // Unclipped shortcut: plain group shrinkage already inside the box.
    let plain = 1.0 - tau / norm;
    let top = col.iter().fold(0.0f64, |m, c| m.max(c.abs()));
    if plain * top <= a_bound {
        return plain;
    }
    // h(ρ) = ‖clip(c ρ/(ρ+τ))‖ − ρ is positive near 0 and negative at ‖c‖.
    let (mut lo, mut hi) = (0.0, norm);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if clipped_norm(mid / (mid + tau)) > mid {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let rho = 0.5 * (lo + hi);
    rho / (rho + tau)
}

/// Prox of τ‖·‖* plus the box indicator.
///
/// Returns the SVT result when it already lies in the box. Otherwise runs
/// `cfg.dykstra_iters` rounds of the Dykstra-like proximal splitting between
/// SVT and box projection; the result is feasible but only approximately
/// optimal, and is flagged as inexact.
pub fn prox_nuclear_box(a: &DenseMatrix, tau: f64, cfg: &ProxConfig) -> Result<ProxOutput> {
    let a_bound = cfg.a_bound;
    let first = svt(a, tau)?;
    if first.max_abs() <= a_bound * (1.0 + cfg.svd_tol) {
        return Ok(ProxOutput {
            value: box_clip(&first, a_bound),
            exact: true,
        });
    }
    let (m1, m2) = a.dims();
    let mut x = a.clone();
    let mut p = DenseMatrix::zeros(m1, m2);
    let mut q = DenseMatrix::zeros(m1, m2);
    let mut y = first;
    for round in 0..cfg.dykstra_iters.max(1) {
        if round > 0 {
            y = svt(&x.add(&p), tau)?;
        }
        // p ← x + p − y, computed in place
        p.as_mut_slice()
            .iter_mut()
            .zip(x.as_slice().iter().zip(y.as_slice()))
            .for_each(|(pv, (xv, yv))| *pv += xv - yv);
        let shifted = y.add(&q);
        x = box_clip(&shifted, a_bound);
        q = shifted.sub(&x);
    }
    Ok(ProxOutput { value: x, exact: false })
}
