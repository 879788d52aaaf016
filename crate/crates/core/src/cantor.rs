//! Dimension of the intersection of two base-`b` Cantor sets under a random
//! translation.
//!
//! For digit sets `D₁, D₂ ⊂ {0, …, b−1}` the dimension is `λ / log b` where
//! `λ` is the exponent of the uniform family `A_i(j, k) = #((D₁+i+j) ∩ (D₂+kb))`.

use std::fmt;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{precondition, Result};
use crate::exact::{detect_ghc_exact, IntMatrix};
use crate::pipeline::{lyapunov_pipeline, LyapunovOutcome, PipelineOptions};
use crate::positivize::certify_arc;
use crate::projective::Matrix2;

pub const MAX_BASE: u32 = 16;

/// Two proper non-empty digit sets, stored as bit masks.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct DigitPair {
    pub b: u32,
    pub d1: u32,
    pub d2: u32,
}

fn mask_of(b: u32, digits: &[u32]) -> Result<u32> {
    let mut mask = 0u32;
    for &d in digits {
        if d >= b {
            return precondition(format!("digit {d} is not below the base {b}"));
        }
        mask |= 1 << d;
    }
    Ok(mask)
}

fn digits_of(mask: u32) -> Vec<u32> {
    (0..32).filter(|i| mask >> i & 1 == 1).collect()
}

impl DigitPair {
    pub fn new(b: u32, d1: &[u32], d2: &[u32]) -> Result<Self> {
        DigitPair::from_masks(b, mask_of(b, d1)?, mask_of(b, d2)?)
    }

    pub fn from_masks(b: u32, d1: u32, d2: u32) -> Result<Self> {
        if !(2..=31).contains(&b) {
            return precondition(format!("base {b} outside 2..=31"));
        }
        let full = (1u32 << b) - 1;
        for (name, m) in [("D1", d1), ("D2", d2)] {
            if m == 0 || m & !full != 0 || m == full {
                return precondition(format!(
                    "{name} must be a non-empty proper subset of 0..{b}"
                ));
            }
        }
        Ok(DigitPair { b, d1, d2 })
    }

    pub fn d1_digits(&self) -> Vec<u32> {
        digits_of(self.d1)
    }

    pub fn d2_digits(&self) -> Vec<u32> {
        digits_of(self.d2)
    }
}

impl fmt::Display for DigitPair {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let join = |v: Vec<u32>| v.iter().map(u32::to_string).collect::<Vec<_>>().join(" ");
        write!(
            f,
            "b={} D1={{{}}} D2={{{}}}",
            self.b,
            join(self.d1_digits()),
            join(self.d2_digits())
        )
    }
}

/// The `b` integer matrices of a digit pair.
pub fn digit_int_matrices(pair: &DigitPair) -> Vec<IntMatrix> {
    let d1 = pair.d1 as u64;
    let d2 = pair.d2 as u64;
    let b = pair.b;
    (0..b)
        .map(|i| {
            let e = |j: u32, k: u32| ((d1 << (i + j)) & (d2 << (k * b))).count_ones() as i128;
            IntMatrix::new(e(0, 0), e(0, 1), e(1, 0), e(1, 1))
        })
        .collect()
}

pub fn digit_matrices(pair: &DigitPair) -> Vec<Matrix2> {
    digit_int_matrices(pair)
        .iter()
        .map(IntMatrix::to_matrix)
        .collect()
}

pub fn is_degenerate(pair: &DigitPair) -> bool {
    digit_int_matrices(pair).iter().any(|m| m.det() == Some(0))
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct DimensionResult {
    pub pair: DigitPair,
    pub outcome: LyapunovOutcome,
    /// `λ / log b` when the kernel path applies.
    pub dimension: Option<f64>,
    pub dimension_bound: Option<f64>,
}

/// Runs the full pipeline with uniform weights.
pub fn intersection_dimension(pair: &DigitPair, eps: f64) -> Result<DimensionResult> {
    let ms = digit_matrices(pair);
    let w = vec![1.0 / pair.b as f64; ms.len()];
    let outcome = lyapunov_pipeline(&ms, &w, eps, &PipelineOptions::default())?;
    let log_b = (pair.b as f64).ln();
    let dimension = outcome.value.map(|v| v.estimate / log_b);
    let dimension_bound = outcome.value.map(|v| v.truncation_bound / log_b);
    Ok(DimensionResult {
        pair: *pair,
        outcome,
        dimension,
        dimension_bound,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum OneDigitStatus {
    Degenerate,
    KernelApplicable,
}

/// Closed-form status of the pair `D₁ = {0..b−1}∖{τ}`, `D₂ = {0..b−1}∖{u}`.
pub fn one_digit_forbidden_status(b: u32, tau: u32, u: u32) -> Result<OneDigitStatus> {
    if b < 5 {
        return precondition(format!(
            "the one-digit-forbidden criterion needs b >= 5, got {b}"
        ));
    }
    if tau >= b || u >= b {
        return precondition("forbidden digits must be below the base");
    }
    let interior = |x: u32| x != 0 && x != b - 1;
    Ok(if interior(tau) && interior(u) && tau + u == b - 1 {
        OneDigitStatus::KernelApplicable
    } else {
        OneDigitStatus::Degenerate
    })
}

pub fn one_digit_forbidden_pair(b: u32, tau: u32, u: u32) -> Result<DigitPair> {
    let full = (1u32 << b) - 1;
    DigitPair::from_masks(b, full & !(1 << tau), full & !(1 << u))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum ThickStatus {
    Applicable,
    NotCovered,
}

/// `⌊(b − 3)/5⌋`
pub fn thick_rho(b: u32) -> u32 {
    b.saturating_sub(3) / 5
}

/// Applicable when both digit sets miss at most `ρ(b)` digits.
pub fn thick_family_status(pair: &DigitPair) -> Result<ThickStatus> {
    if pair.b < 3 {
        return precondition("thick criterion needs b >= 3");
    }
    let need = pair.b - thick_rho(pair.b);
    Ok(
        if pair.d1.count_ones() >= need && pair.d2.count_ones() >= need {
            ThickStatus::Applicable
        } else {
            ThickStatus::NotCovered
        },
    )
}

/// Whether `[−½, ½]` is a common strictly invariant arc.
pub fn half_arc_certifies(pair: &DigitPair) -> bool {
    certify_arc(&digit_matrices(pair), -0.5, 0.5)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum PairStatus {
    #[serde(rename = "DEGEN")]
    Degenerate,
    #[serde(rename = "GHC")]
    Ghc,
    #[serde(rename = "OK")]
    Ok,
}

impl PairStatus {
    pub fn label(&self) -> &'static str {
        match self {
            PairStatus::Degenerate => "DEGEN",
            PairStatus::Ghc => "GHC",
            PairStatus::Ok => "OK",
        }
    }
}

/// Exact census status of a single pair.
pub fn pair_status(pair: &DigitPair) -> Result<PairStatus> {
    let ms = digit_int_matrices(pair);
    if ms.iter().any(|m| m.det() == Some(0)) {
        return Ok(PairStatus::Degenerate);
    }
    Ok(match detect_ghc_exact(&ms)? {
        Some(_) => PairStatus::Ghc,
        None => PairStatus::Ok,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct CensusRow {
    pub b: u32,
    pub all_pairs: u64,
    pub degenerate: u64,
    pub no_ghc: u64,
}

impl CensusRow {
    pub const CSV_HEADER: &'static str = "b,all_pairs,degenerate,degenerate_pct,no_ghc,no_ghc_pct";

    /// Percentage of degenerate pairs among all pairs.
    pub fn degenerate_pct(&self) -> f64 {
        100.0 * self.degenerate as f64 / self.all_pairs as f64
    }

    /// Percentage of connection-free pairs among non-degenerate pairs.
    pub fn no_ghc_pct(&self) -> f64 {
        let nondegen = self.all_pairs - self.degenerate;
        if nondegen == 0 {
            0.0
        } else {
            100.0 * self.no_ghc as f64 / nondegen as f64
        }
    }

    pub fn to_csv(&self) -> String {
        format!(
            "{},{},{},{:.2},{},{:.2}",
            self.b,
            self.all_pairs,
            self.degenerate,
            self.degenerate_pct(),
            self.no_ghc,
            self.no_ghc_pct()
        )
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CensusResult {
    pub row: CensusRow,
    /// Every pair with its status, in enumeration order, when requested.
    pub details: Option<Vec<(DigitPair, PairStatus)>>,
}

/// Enumerates all `(2^b − 2)²` ordered pairs.
///
/// Runs on the current rayon pool; counts and detail order do not depend on
/// the number of threads.
pub fn census(b: u32, with_details: bool) -> Result<CensusResult> {
    if !(2..=MAX_BASE).contains(&b) {
        return precondition(format!("census base {b} outside 2..={MAX_BASE}"));
    }
    let full = (1u32 << b) - 1;
    let per_d1: Vec<(u64, u64, Vec<(DigitPair, PairStatus)>)> = (1..full)
        .into_par_iter()
        .map(|d1| -> Result<_> {
            let (mut degen, mut ok) = (0u64, 0u64);
            let mut detail = Vec::new();
            for d2 in 1..full {
                let pair = DigitPair { b, d1, d2 };
                let status = pair_status(&pair)?;
                match status {
                    PairStatus::Degenerate => degen += 1,
                    PairStatus::Ok => ok += 1,
                    PairStatus::Ghc => {}
                }
                if with_details {
                    detail.push((pair, status));
                }
            }
            Ok((degen, ok, detail))
        })
        .collect::<Result<_>>()?;
    let count = (full - 1) as u64;
    let mut row = CensusRow {
        b,
        all_pairs: count * count,
        degenerate: 0,
        no_ghc: 0,
    };
    let mut details = with_details.then(Vec::new);
    for (degen, ok, detail) in per_d1 {
        row.degenerate += degen;
        row.no_ghc += ok;
        if let Some(d) = details.as_mut() {
            d.extend(detail);
        }
    }
    Ok(CensusResult { row, details })
}

/// One line of the optional detail file: `D1;D2;STATUS` with comma lists.
pub fn detail_line(pair: &DigitPair, status: PairStatus) -> String {
    let join = |v: Vec<u32>| v.iter().map(u32::to_string).collect::<Vec<_>>().join(",");
    format!(
        "{};{};{}",
        join(pair.d1_digits()),
        join(pair.d2_digits()),
        status.label()
    )
}
