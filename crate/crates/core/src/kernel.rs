//! Kernel expansion of the top Lyapunov exponent for positive families.
//!
//! For a family of entrywise positive matrices the exponent equals
//! `Σₙ (Tⁿ v)₀` for an explicit infinite matrix `T` and vector `v`. This module
//! builds the truncations `T_M`, `v^(M)`, evaluates partial sums and provides
//! an a-priori bound on `|λ − Σ_{n<N} (T_Mⁿ v^(M))₀|`.

use std::f64::consts::{E as EULER, PI};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{precondition, Error, Result};
use crate::projective::{apply_f, Matrix2};

/// Default margin added to the largest endpoint image in [`choose_r`].
pub const DEFAULT_MARGIN: f64 = 1e-9;

/// Relative determinant threshold below which a matrix counts as singular.
pub const SINGULAR_TOL: f64 = 1e-12;

const MAX_M: usize = 4000;
const MAX_N: usize = 100_000;

/// Matrices with a strictly positive probability vector.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WeightedFamily {
    matrices: Vec<Matrix2>,
    weights: Vec<f64>,
}

impl WeightedFamily {
    pub fn new(matrices: Vec<Matrix2>, weights: Vec<f64>) -> Result<Self> {
        if matrices.is_empty() {
            return precondition("family is empty");
        }
        if matrices.len() != weights.len() {
            return precondition(format!(
                "{} matrices but {} weights",
                matrices.len(),
                weights.len()
            ));
        }
        if let Some(i) = weights.iter().position(|w| !(w.is_finite() && *w > 0.0)) {
            return precondition(format!("weight {i} is not strictly positive"));
        }
        let total: f64 = weights.iter().sum();
        if (total - 1.0).abs() > 1e-12 {
            return precondition(format!("weights sum to {total}, expected 1"));
        }
        for (i, m) in matrices.iter().enumerate() {
            if !m.is_finite() {
                return precondition(format!("matrix {i} has a non-finite entry"));
            }
            if !m.is_invertible(SINGULAR_TOL) {
                return precondition(format!("matrix {i} {m} is singular"));
            }
        }
        Ok(WeightedFamily { matrices, weights })
    }

    pub fn uniform(matrices: Vec<Matrix2>) -> Result<Self> {
        let n = matrices.len();
        WeightedFamily::new(matrices, vec![1.0 / n.max(1) as f64; n])
    }

    /// Like [`new`](Self::new) but rescales the weights to sum to one.
    pub fn normalized(matrices: Vec<Matrix2>, weights: Vec<f64>) -> Result<Self> {
        let total: f64 = weights.iter().sum();
        if !(total.is_finite() && total > 0.0) {
            return precondition("weights must have a positive finite sum");
        }
        WeightedFamily::new(matrices, weights.iter().map(|w| w / total).collect())
    }

    pub fn matrices(&self) -> &[Matrix2] {
        &self.matrices
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn len(&self) -> usize {
        self.matrices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.matrices.is_empty()
    }

    pub fn is_positive(&self) -> bool {
        self.matrices.iter().all(Matrix2::is_positive)
    }

    pub fn is_nonnegative(&self) -> bool {
        self.matrices.iter().all(Matrix2::is_nonnegative)
    }

    /// Same weights, each matrix replaced by `f(A_i)`.
    pub fn map_matrices(&self, f: impl Fn(&Matrix2) -> Matrix2) -> Result<Self> {
        WeightedFamily::new(self.matrices.iter().map(f).collect(), self.weights.clone())
    }

    pub fn scaled(&self, t: f64) -> Result<Self> {
        self.map_matrices(|m| m.scale(t))
    }

    pub fn transposed(&self) -> Result<Self> {
        self.map_matrices(Matrix2::transpose)
    }
}

/// Result of a kernel computation.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CertifiedValue {
    pub estimate: f64,
    pub truncation_bound: f64,
    #[serde(rename = "N")]
    pub n: usize,
    #[serde(rename = "M")]
    pub m: usize,
    pub r_used: f64,
}

/// Constants entering the truncation bound.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ErrorConstants {
    /// Tail constant.
    pub e: f64,
    /// `max_i |f_iᵀ(0)|`.
    pub c: f64,
    /// Upper bound on `K(r)`.
    pub kr: f64,
}

/// Values of `f_i` and `f_iᵀ` at the origin read off `F(A_i) = [[p₁, p₂], [q₁, q₂]]`.
#[derive(Clone, Copy, Debug, PartialEq)]
struct ChartData {
    /// `f_iᵀ(0) = q₁/q₂`
    ft0: f64,
    /// `f_i(0) = p₂/q₂`
    f0: f64,
    /// `f_i'(0) = det/q₂²`
    fp0: f64,
    q2: f64,
}

fn chart_data(family: &WeightedFamily) -> Result<Vec<ChartData>> {
    if !family.is_positive() {
        return precondition(
            "kernel expansion needs an entrywise positive family; positivize it first",
        );
    }
    Ok(family
        .matrices()
        .iter()
        .map(|a| {
            let g = apply_f(a);
            ChartData {
                ft0: g.c / g.d,
                f0: g.b / g.d,
                fp0: g.det() / (g.d * g.d),
                q2: g.d,
            }
        })
        .collect())
}

/// Contraction radius: every `f_i` maps `[−1, 1]` into `[−r, r]`.
pub fn choose_r(family: &WeightedFamily, margin: f64) -> Result<f64> {
    if !(0.0..0.5).contains(&margin) {
        return precondition(format!("margin {margin} outside [0, 0.5)"));
    }
    let mut worst = 0.0_f64;
    for a in family.matrices() {
        let g = apply_f(a);
        let (lo, hi) = (g.d - g.c, g.d + g.c);
        if !(lo > 0.0 && hi > 0.0) {
            // a pole in [−1, 1]
            return Err(Error::NotStrictlyContracting {
                max_image: f64::INFINITY,
            });
        }
        worst = worst
            .max(((g.b - g.a) / lo).abs())
            .max(((g.a + g.b) / hi).abs());
    }
    if worst.is_nan() || worst >= 1.0 - 2.0 * margin {
        return Err(Error::NotStrictlyContracting { max_image: worst });
    }
    Ok((1.0 - margin).min(worst + margin))
}

/// `K(r) ≤ min{ r/√(1−r²), 2r/(π(1+r)) · (π/2 + log((1+r)/(1−r))) }`.
pub fn k_bound(r: f64) -> f64 {
    let first = r / (1.0 - r * r).sqrt();
    let second = 2.0 * r / (PI * (1.0 + r)) * (PI / 2.0 + ((1.0 + r) / (1.0 - r)).ln());
    first.min(second)
}

pub fn error_constants(family: &WeightedFamily, r: f64) -> Result<ErrorConstants> {
    if !(r > 0.0 && r < 1.0) {
        return precondition(format!("contraction radius {r} outside (0, 1)"));
    }
    let data = chart_data(family)?;
    let mut tail = 0.0;
    let mut dist = 0.0;
    let mut c = 0.0_f64;
    for (d, w) in data.iter().zip(family.weights()) {
        let t = d.ft0.abs();
        c = c.max(t);
        tail += w * t / (1.0 + (1.0 - t * t).sqrt());
        dist += w * 2.0 * d.f0.abs().atanh();
    }
    Ok(ErrorConstants {
        e: tail * dist / (1.0 - r),
        c,
        kr: k_bound(r),
    })
}

/// `((1+ρ)^{n−1} − 1 − (n−1)ρ)/ρ`, summed as the positive series
/// `Σ_{j≥2} C(n−1, j) ρ^{j−1}` to avoid cancellation.
fn binomial_tail(n: usize, rho: f64) -> f64 {
    let k = n.saturating_sub(1);
    let mut term = k as f64;
    let mut sum = 0.0;
    for j in 2..=k {
        term *= (k + 1 - j) as f64 / j as f64 * rho;
        sum += term;
        if term == 0.0 {
            break;
        }
    }
    sum
}

/// A-priori truncation bound for parameters `n, m ≥ 2`.
pub fn truncation_bound(consts: &ErrorConstants, r: f64, n: usize, m: usize) -> f64 {
    let rho = r.powi(m as i32 - 1) * consts.kr;
    let log_term = -(1.0 - r * consts.c).ln();
    let nm1 = (n - 1) as f64;
    consts.e * r.powi(n as i32 - 1)
        + 2.0 * log_term * binomial_tail(n, rho)
        + 2.0 * nm1 * (r * consts.c).powi(m as i32) / (m as f64 * (1.0 - r * consts.c))
}

/// Chooses `(N, M)` with `truncation_bound(N, M) < ε`.
///
/// Starts from the sufficient conditions `E r^{N−1} < ε/2` and
/// `e·log(1/(1−rC))(N−1)²ρ_M + 2(N−1)(rC)^M/(M(1−rC)) < ε/2` with
/// `(N−1)ρ_M ≤ 1`, then trims `N` and afterwards `M` while the bound allows.
pub fn select_parameters(consts: &ErrorConstants, r: f64, eps: f64) -> Result<(usize, usize)> {
    if !(eps > 0.0 && eps.is_finite()) {
        return precondition(format!("target accuracy {eps} must be positive"));
    }
    let mut n = 2;
    while consts.e * r.powi(n as i32 - 1) >= eps / 2.0 {
        n += 1;
        if n > MAX_N {
            return Err(Error::Numerical(format!(
                "no N ≤ {MAX_N} reaches accuracy {eps}"
            )));
        }
    }
    let log_term = -(1.0 - r * consts.c).ln();
    let nm1 = (n - 1) as f64;
    let sufficient = |m: usize| {
        let rho = r.powi(m as i32 - 1) * consts.kr;
        nm1 * rho <= 1.0
            && EULER * log_term * nm1 * nm1 * rho
                + 2.0 * nm1 * (r * consts.c).powi(m as i32) / (m as f64 * (1.0 - r * consts.c))
                < eps / 2.0
    };
    let mut m = 2;
    while !sufficient(m) {
        m += 1;
        if m > MAX_M {
            return Err(Error::Numerical(format!(
                "no M ≤ {MAX_M} reaches accuracy {eps}"
            )));
        }
    }
    // the sufficient conditions imply the bound; guard against round-off anyway
    while truncation_bound(consts, r, n, m) >= eps {
        m += 1;
        if m > MAX_M {
            return Err(Error::Numerical(format!(
                "no M ≤ {MAX_M} reaches accuracy {eps}"
            )));
        }
    }
    while n > 2 && truncation_bound(consts, r, n - 1, m) < eps {
        n -= 1;
    }
    while m > 2 && truncation_bound(consts, r, n, m - 1) < eps {
        m -= 1;
    }
    Ok((n, m))
}

/// Truncated kernel matrix, row-major `m × m`.
///
/// Row `k ≥ 1` holds `(−1)ⁿ (n/k) [xⁿ] (−f_i(x))^k` averaged over `i`, which
/// is the stable way to evaluate the coefficients.
pub fn build_t(family: &WeightedFamily, m: usize) -> Result<Vec<f64>> {
    if m < 2 {
        return precondition("truncation size M must be at least 2");
    }
    let data = chart_data(family)?;
    let parts: Vec<Vec<f64>> = data
        .par_iter()
        .zip(family.weights().par_iter())
        .map(|(d, &w)| {
            let mut t = vec![0.0; m * m];
            let mut pow = 1.0;
            for n in 1..m {
                pow *= d.ft0;
                t[n] = w * pow;
            }
            // Taylor coefficients of −f: f(x) = f(0) + f'(0) x / (1 + fᵀ(0) x)
            let mut neg_f = vec![0.0; m];
            neg_f[0] = -d.f0;
            let mut c = d.fp0;
            for coeff in neg_f.iter_mut().skip(1) {
                *coeff = -c;
                c *= -d.ft0;
            }
            let mut power = vec![0.0; m];
            power[0] = 1.0;
            let mut next = vec![0.0; m];
            for k in 1..m {
                for (n, slot) in next.iter_mut().enumerate() {
                    *slot = (0..=n).map(|j| power[j] * neg_f[n - j]).sum();
                }
                std::mem::swap(&mut power, &mut next);
                let row = &mut t[k * m..(k + 1) * m];
                for n in 1..m {
                    let sign = if n % 2 == 0 { 1.0 } else { -1.0 };
                    row[n] = w * sign * n as f64 / k as f64 * power[n];
                }
            }
            t
        })
        .collect();
    let mut t = vec![0.0; m * m];
    for part in parts {
        for (x, y) in t.iter_mut().zip(part) {
            *x += y;
        }
    }
    Ok(t)
}

/// Neumaier compensated summation.
#[derive(Clone, Copy, Debug, Default)]
pub(crate) struct Compensated {
    sum: f64,
    carry: f64,
    abs: f64,
}

impl Compensated {
    pub(crate) fn add(&mut self, x: f64) {
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.carry += (self.sum - t) + x;
        } else {
            self.carry += (x - t) + self.sum;
        }
        self.sum = t;
        self.abs += x.abs();
    }

    pub(crate) fn value(&self) -> f64 {
        self.sum + self.carry
    }
}

/// Pascal triangle up to row `n` in floating point.
fn pascal(n: usize) -> Result<Vec<Vec<f64>>> {
    let mut rows: Vec<Vec<f64>> = Vec::with_capacity(n + 1);
    rows.push(vec![1.0]);
    for i in 1..=n {
        let prev = &rows[i - 1];
        let mut row = vec![1.0; i + 1];
        for j in 1..i {
            row[j] = prev[j - 1] + prev[j];
        }
        if row.iter().any(|x| !x.is_finite()) {
            return Err(Error::Numerical(format!(
                "binomial coefficients of order {i} overflow"
            )));
        }
        rows.push(row);
    }
    Ok(rows)
}

/// Kernel matrix from the explicit binomial double sum, together with the
/// sums of absolute values of the terms (a conditioning measure).
///
/// This path loses digits for large indices; it exists to cross-check
/// [`build_t`].
pub fn build_t_direct(family: &WeightedFamily, m: usize) -> Result<(Vec<f64>, Vec<f64>)> {
    if m < 2 {
        return precondition("truncation size M must be at least 2");
    }
    let data = chart_data(family)?;
    let binom = pascal(m)?;
    let mut t = vec![0.0; m * m];
    let mut mag = vec![0.0; m * m];
    for n in 1..m {
        let mut acc = Compensated::default();
        for (d, w) in data.iter().zip(family.weights()) {
            acc.add(w * d.ft0.powi(n as i32));
        }
        t[n] = acc.value();
        mag[n] = acc.abs;
    }
    for k in 1..m {
        for n in 1..m {
            let mut acc = Compensated::default();
            for (d, w) in data.iter().zip(family.weights()) {
                for l in 1..=k.min(n) {
                    acc.add(
                        w * binom[n][l]
                            * binom[k - 1][l - 1]
                            * d.ft0.powi((n - l) as i32)
                            * (-d.f0).powi((k - l) as i32)
                            * d.fp0.powi(l as i32),
                    );
                }
            }
            t[k * m + n] = acc.value();
            mag[k * m + n] = acc.abs;
        }
    }
    Ok((t, mag))
}

/// Outcome of comparing [`build_t`] with [`build_t_direct`].
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct SelfCheck {
    /// Largest entrywise relative difference.
    pub max_relative: f64,
    /// Largest difference divided by its allowance; `≤ 1` passes.
    pub max_scaled: f64,
    pub passed: bool,
}

/// Cross-checks the two constructions of `T_M`.
///
/// An entry passes when the difference is within `rel_tol` relative to the
/// series value, or within the round-off expected from the magnitudes of the
/// terms of the double sum.
pub fn self_check(family: &WeightedFamily, m: usize, rel_tol: f64) -> Result<SelfCheck> {
    let series = build_t(family, m)?;
    let (direct, mag) = build_t_direct(family, m)?;
    let mut max_relative = 0.0_f64;
    let mut max_scaled = 0.0_f64;
    for k in 0..m {
        for n in 0..m {
            let i = k * m + n;
            let diff = (series[i] - direct[i]).abs();
            if diff == 0.0 {
                continue;
            }
            max_relative = max_relative.max(diff / series[i].abs().max(f64::MIN_POSITIVE));
            let allowance =
                rel_tol * series[i].abs() + 4.0 * (k + n) as f64 * f64::EPSILON * mag[i];
            max_scaled = max_scaled.max(diff / allowance);
        }
    }
    Ok(SelfCheck {
        max_relative,
        max_scaled,
        passed: max_scaled <= 1.0,
    })
}

/// `v^(M)`: `v₀ = Σ w_i log q₂(i)` and `v_n = −Σ w_i (−f_i(0))ⁿ/n`.
pub fn build_v(family: &WeightedFamily, m: usize) -> Result<Vec<f64>> {
    let data = chart_data(family)?;
    let mut v = vec![0.0; m];
    for (d, w) in data.iter().zip(family.weights()) {
        if m > 0 {
            v[0] += w * d.q2.ln();
        }
        let mut pow = 1.0;
        for (n, slot) in v.iter_mut().enumerate().skip(1) {
            pow *= -d.f0;
            *slot -= w * pow / n as f64;
        }
    }
    Ok(v)
}

/// Everything needed to evaluate partial sums and the bound.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct KernelSystem {
    pub r: f64,
    pub m: usize,
    /// Row-major `m × m`.
    pub t: Vec<f64>,
    pub v: Vec<f64>,
    pub constants: ErrorConstants,
}

impl KernelSystem {
    pub fn build(family: &WeightedFamily, r: f64, m: usize) -> Result<Self> {
        let constants = error_constants(family, r)?;
        Ok(KernelSystem {
            r,
            m,
            t: build_t(family, m)?,
            v: build_v(family, m)?,
            constants,
        })
    }

    pub fn entry(&self, k: usize, n: usize) -> f64 {
        self.t[k * self.m + n]
    }

    /// `x ↦ T_M x`.
    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        self.t
            .chunks_exact(self.m)
            .map(|row| row.iter().zip(x).map(|(a, b)| a * b).sum())
            .collect()
    }

    /// `Σ_{n<N} (T_Mⁿ v)₀`.
    pub fn partial_sum(&self, n: usize) -> f64 {
        let mut x = self.v.clone();
        let mut s = 0.0;
        for it in 0..n {
            s += x[0];
            if it + 1 < n {
                x = self.apply(&x);
            }
        }
        s
    }

    pub fn truncation_bound(&self, n: usize, m: usize) -> f64 {
        truncation_bound(&self.constants, self.r, n, m)
    }
}

/// Certified approximation of the top Lyapunov exponent of a positive family.
pub fn compute_lyapunov(family: &WeightedFamily, eps: f64) -> Result<CertifiedValue> {
    let r = choose_r(family, DEFAULT_MARGIN)?;
    let consts = error_constants(family, r)?;
    let (n, m) = select_parameters(&consts, r, eps)?;
    log::debug!(
        "kernel parameters r={r} N={n} M={m} E={} C={} K={}",
        consts.e,
        consts.c,
        consts.kr
    );
    compute_with_parameters(family, r, n, m)
}

/// Partial sum for given parameters, as reported by [`compute_lyapunov`].
pub fn compute_with_parameters(
    family: &WeightedFamily,
    r: f64,
    n: usize,
    m: usize,
) -> Result<CertifiedValue> {
    if n < 1 || m < 2 {
        return precondition(format!("invalid parameters N={n}, M={m}"));
    }
    let ks = KernelSystem::build(family, r, m)?;
    let estimate = ks.partial_sum(n);
    let truncation_bound = if n >= 2 {
        ks.truncation_bound(n, m)
    } else {
        f64::INFINITY
    };
    Ok(CertifiedValue {
        estimate,
        truncation_bound,
        n,
        m,
        r_used: r,
    })
}
