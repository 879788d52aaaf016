//! Independent estimators used to validate the kernel expansion.
//!
//! [`mc_lyapunov`] samples random products directly, and
//! [`word_partial_sum`] enumerates every word of a fixed length. Neither uses
//! any of the kernel machinery.

use rand::distributions::{Distribution, WeightedIndex};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{precondition, Error, Result};
use crate::kernel::Compensated;
use crate::projective::{apply_f, Matrix2};

/// Word enumeration refuses to visit more words than this.
pub const WORD_BUDGET: u128 = 10_000_000;

/// Burn-in steps discarded at the start of each trial.
pub fn burn_in(steps: usize) -> usize {
    (steps / 10).min(1000)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct McEstimate {
    pub mean: f64,
    pub std_error: f64,
    pub steps: usize,
    pub trials: usize,
    pub seed: u64,
}

fn check_weights(n: usize, weights: &[f64]) -> Result<()> {
    if n == 0 || n != weights.len() {
        return precondition("need one weight per matrix and at least one matrix");
    }
    if weights.iter().any(|w| !(w.is_finite() && *w > 0.0)) {
        return precondition("weights must be strictly positive");
    }
    let total: f64 = weights.iter().sum();
    if (total - 1.0).abs() > 1e-12 {
        return precondition(format!("weights sum to {total}, expected 1"));
    }
    Ok(())
}

/// Monte Carlo estimate of the top Lyapunov exponent.
///
/// Each trial multiplies a random unit vector by `steps` random matrices,
/// renormalizing in the ℓ¹ norm after every step, and reports the average
/// log growth. Trial `t` draws from stream `seed ^ t` of a ChaCha generator
/// keyed by `seed`, so results do not depend on the thread count and nearby
/// seeds do not share trials.
pub fn mc_lyapunov(
    matrices: &[Matrix2],
    weights: &[f64],
    steps: usize,
    trials: usize,
    seed: u64,
) -> Result<McEstimate> {
    check_weights(matrices.len(), weights)?;
    if steps < 1000 {
        return precondition(format!(
            "at least 1000 steps per trial are required, got {steps}"
        ));
    }
    if trials == 0 {
        return precondition("at least one trial is required");
    }
    if let Some(i) = matrices
        .iter()
        .position(|m| !m.is_finite() || m.det() == 0.0)
    {
        return precondition(format!("matrix {i} is singular or not finite"));
    }
    let dist = WeightedIndex::new(weights).map_err(|e| Error::Precondition(e.to_string()))?;

    let values: Vec<f64> = (0..trials)
        .into_par_iter()
        .map(|t| run_trial(matrices, &dist, steps, seed, seed ^ t as u64))
        .collect::<Result<_>>()?;

    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let std_error = if values.len() > 1 {
        let var = values.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
        (var / n).sqrt()
    } else {
        0.0
    };
    Ok(McEstimate {
        mean,
        std_error,
        steps,
        trials,
        seed,
    })
}

fn run_trial(
    matrices: &[Matrix2],
    dist: &WeightedIndex<f64>,
    steps: usize,
    seed: u64,
    stream: u64,
) -> Result<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    let theta: f64 = rng.gen_range(0.0..std::f64::consts::TAU);
    let (s, c) = theta.sin_cos();
    let norm = s.abs() + c.abs();
    let (mut x, mut y) = (c / norm, s / norm);
    let warm = burn_in(steps);
    let mut acc = 0.0;
    for step in 0..warm + steps {
        let m = &matrices[dist.sample(&mut rng)];
        let (nx, ny) = (m.a * x + m.b * y, m.c * x + m.d * y);
        let norm = nx.abs() + ny.abs();
        if !(norm.is_finite() && norm > 0.0) {
            return Err(Error::Numerical(format!(
                "vector norm became {norm} at step {step}"
            )));
        }
        x = nx / norm;
        y = ny / norm;
        if step >= warm {
            acc += norm.ln();
        }
    }
    Ok(acc / steps as f64)
}

/// Partial sums `S_n` by explicit enumeration of the `|I|ⁿ` words.
///
/// Coordinate 0 is `Σ_ī w_ī log(q₁(i_n) f_{ī*}(0) + q₂(i_n))` where `ī*` drops
/// the last letter; coordinate `k ≥ 1` is `−Σ_ī w_ī (−f_ī(0))^k / k`.
/// Returns the first `coords` coordinates.
pub fn word_partial_sum(
    family: &crate::kernel::WeightedFamily,
    n: usize,
    coords: usize,
) -> Result<Vec<f64>> {
    if n == 0 {
        return precondition("word length must be at least 1");
    }
    let size = family.len() as u128;
    let needed = (0..n)
        .try_fold(1u128, |acc, _| acc.checked_mul(size))
        .unwrap_or(u128::MAX);
    if needed > WORD_BUDGET {
        return Err(Error::BudgetExceeded {
            needed,
            budget: WORD_BUDGET,
        });
    }
    let charts: Vec<Matrix2> = family.matrices().iter().map(apply_f).collect();
    let mut sums = vec![Compensated::default(); coords.max(1)];
    walk(&charts, family.weights(), n, 0.0, 1.0, &mut sums)?;
    Ok(sums
        .iter()
        .take(coords.max(1))
        .map(Compensated::value)
        .collect())
}

fn walk(
    charts: &[Matrix2],
    weights: &[f64],
    remaining: usize,
    x: f64,
    weight: f64,
    sums: &mut [Compensated],
) -> Result<()> {
    for (ch, w) in charts.iter().zip(weights) {
        let den = ch.c * x + ch.d;
        if remaining == 1 {
            if !(den > 0.0) {
                return Err(Error::Precondition(format!(
                    "denominator {den} is not positive along an orbit"
                )));
            }
            let wt = weight * w;
            sums[0].add(wt * den.ln());
            if sums.len() > 1 {
                let fx = (ch.a * x + ch.b) / den;
                let mut pow = 1.0;
                for (k, s) in sums.iter_mut().enumerate().skip(1) {
                    pow *= -fx;
                    s.add(-wt * pow / k as f64);
                }
            }
        } else {
            if den == 0.0 {
                return Err(Error::Precondition("orbit of 0 hits a pole".into()));
            }
            let fx = (ch.a * x + ch.b) / den;
            walk(charts, weights, remaining - 1, fx, weight * w, sums)?;
        }
    }
    Ok(())
}
