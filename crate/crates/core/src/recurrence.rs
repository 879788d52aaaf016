//! Growth rate of random recurrences `x_{n+1} = a x_n + b x_{n−1}`.
//!
//! Each step multiplies `(x_{n−1}, x_n)` by `M = [[0, 1], [b, a]]`. The
//! companion matrices have a zero entry, but every product of two of them is
//! positive when all coefficients are, so the kernel expansion is applied to
//! the family of pairs.

use serde::{Deserialize, Serialize};

use crate::error::{precondition, Result};
use crate::kernel::{compute_lyapunov, CertifiedValue, WeightedFamily};
use crate::oracle::{mc_lyapunov, McEstimate};
use crate::pipeline::{lyapunov_pipeline, PipelineOptions, PipelineStatus};
use crate::projective::Matrix2;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RecurrenceSpec {
    /// Coefficient pairs `(a_i, b_i)`.
    pub pairs: Vec<(f64, f64)>,
    pub weights: Vec<f64>,
}

/// `[[0, 1], [b, a]]`
pub fn companion(a: f64, b: f64) -> Matrix2 {
    Matrix2::new(0.0, 1.0, b, a)
}

impl RecurrenceSpec {
    pub fn new(pairs: Vec<(f64, f64)>, weights: Vec<f64>) -> Result<Self> {
        if pairs.is_empty() || pairs.len() != weights.len() {
            return precondition("need at least one coefficient pair and one weight per pair");
        }
        for (i, &(a, b)) in pairs.iter().enumerate() {
            if !(a > 0.0 && a.is_finite()) {
                return precondition(format!(
                    "a_{i} = {a} is not positive; a zero or negative coefficient yields a heteroclinic connection, use the Monte Carlo estimator instead"
                ));
            }
            if !(b > 0.0 && b.is_finite()) {
                return precondition(format!(
                    "b_{i} = {b} is not positive; the companion matrix is singular or sign-changing, use the Monte Carlo estimator instead"
                ));
            }
        }
        if weights.iter().any(|w| !(*w > 0.0)) {
            return precondition("weights must be strictly positive");
        }
        let total: f64 = weights.iter().sum();
        if (total - 1.0).abs() > 1e-12 {
            return precondition(format!("weights sum to {total}, expected 1"));
        }
        Ok(RecurrenceSpec { pairs, weights })
    }

    pub fn uniform(pairs: Vec<(f64, f64)>) -> Result<Self> {
        let n = pairs.len().max(1);
        RecurrenceSpec::new(pairs, vec![1.0 / n as f64; n])
    }

    pub fn matrices(&self) -> Vec<Matrix2> {
        self.pairs.iter().map(|&(a, b)| companion(a, b)).collect()
    }

    /// All products `M_i M_j` with weights `w_i w_j`.
    pub fn pair_family(&self) -> Result<WeightedFamily> {
        let ms = self.matrices();
        let mut prods = Vec::with_capacity(ms.len() * ms.len());
        let mut ws = Vec::with_capacity(ms.len() * ms.len());
        for (mi, wi) in ms.iter().zip(&self.weights) {
            for (mj, wj) in ms.iter().zip(&self.weights) {
                prods.push(mi.mul(mj));
                ws.push(wi * wj);
            }
        }
        if let Some(i) = prods.iter().position(|p| !p.is_positive()) {
            return precondition(format!("product {i} is not entrywise positive"));
        }
        WeightedFamily::normalized(prods, ws)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GrowthRate {
    /// Almost-sure limit of `|x_n|^{1/n}`.
    pub growth: f64,
    /// Bound on `|growth − exp(λ)|` implied by the truncation bound.
    pub bound: f64,
    /// Exponent of the family used for the computation.
    pub lyapunov: CertifiedValue,
}

fn from_exponent(lyapunov: CertifiedValue, halve: bool) -> GrowthRate {
    let k = if halve { 0.5 } else { 1.0 };
    let growth = (k * lyapunov.estimate).exp();
    GrowthRate {
        growth,
        bound: growth * (k * lyapunov.truncation_bound).exp_m1(),
        lyapunov,
    }
}

/// Growth multiplier through the positive family of pairs, which has
/// exponent `2λ`; the accuracy target on it is `2ε`.
pub fn growth_rate(spec: &RecurrenceSpec, eps: f64) -> Result<GrowthRate> {
    let fam = spec.pair_family()?;
    Ok(from_exponent(compute_lyapunov(&fam, 2.0 * eps)?, true))
}

/// Same quantity obtained by positivizing the companion matrices directly.
pub fn growth_rate_direct(spec: &RecurrenceSpec, eps: f64) -> Result<GrowthRate> {
    let out = lyapunov_pipeline(
        &spec.matrices(),
        &spec.weights,
        eps,
        &PipelineOptions::default(),
    )?;
    match (out.status, out.value) {
        (status, Some(v)) if status.is_certifiable() => Ok(from_exponent(v, false)),
        (PipelineStatus::GhcDetected { witness }, _) => precondition(format!(
            "companion family has a heteroclinic connection: {}",
            witness.describe()
        )),
        (status, _) => precondition(format!(
            "companion family is not certifiable ({})",
            status.name()
        )),
    }
}

/// Monte Carlo estimate of `exp(λ)` for arbitrary real coefficients.
pub fn growth_rate_mc(
    pairs: &[(f64, f64)],
    weights: &[f64],
    steps: usize,
    trials: usize,
    seed: u64,
) -> Result<(f64, McEstimate)> {
    let ms: Vec<Matrix2> = pairs.iter().map(|&(a, b)| companion(a, b)).collect();
    let est = mc_lyapunov(&ms, weights, steps, trials, seed)?;
    Ok((est.mean.exp(), est))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn fibonacci_is_golden() {
        let g = growth_rate(&RecurrenceSpec::uniform(vec![(1.0, 1.0)]).unwrap(), 1e-10).unwrap();
        assert!((g.growth - (1.0 + 5f64.sqrt()) / 2.0).abs() < 1e-9, "{g:?}");
        let d = growth_rate(
            &RecurrenceSpec::uniform(vec![(1.0, 1.0), (1.0, 1.0)]).unwrap(),
            1e-10,
        )
        .unwrap();
        assert!((d.growth - g.growth).abs() < 1e-9);
    }

    #[test]
    fn pell_growth() {
        let g = growth_rate(&RecurrenceSpec::uniform(vec![(2.0, 1.0)]).unwrap(), 1e-10).unwrap();
        assert!((g.growth - (1.0 + 2f64.sqrt())).abs() < 1e-9);
    }

    #[test]
    fn direct_route_agrees() {
        let spec = RecurrenceSpec::new(vec![(1.0, 1.0), (2.0, 0.5)], vec![0.4, 0.6]).unwrap();
        let a = growth_rate(&spec, 1e-10).unwrap();
        let b = growth_rate_direct(&spec, 1e-10).unwrap();
        assert!((a.growth - b.growth).abs() < 1e-8, "{a:?} {b:?}");
    }

    #[test]
    fn invalid_coefficients() {
        assert!(RecurrenceSpec::uniform(vec![(0.0, 1.0)]).is_err());
        assert!(RecurrenceSpec::uniform(vec![(1.0, -1.0)]).is_err());
    }

    proptest! {
        #[test]
        fn pair_products_are_positive(pairs in prop::collection::vec((0.01f64..5.0, 0.01f64..5.0), 1..5)) {
            let spec = RecurrenceSpec::uniform(pairs.clone()).unwrap();
            let fam = spec.pair_family().unwrap();
            prop_assert!(fam.is_positive());
            let (a1, b1) = pairs[0];
            let (a2, b2) = pairs[pairs.len() - 1];
            let p = companion(a1, b1).mul(&companion(a2, b2));
            prop_assert_eq!(p, Matrix2::new(b2, a2, a1 * b2, b1 + a1 * a2));
        }
    }
}
