//! End-to-end computation for non-negative families.
//!
//! Singular families are reported as degenerate. Multiples of the identity are
//! split off, since they only shift the exponent. The rest is either positive
//! already, conjugated to a positive family through an invariant arc, or
//! reported with a heteroclinic witness.

use serde::{Deserialize, Serialize};

use crate::error::{precondition, Result};
use crate::exact::{detect_ghc_exact, IntMatrix};
use crate::kernel::{
    compute_lyapunov, compute_with_parameters, CertifiedValue, WeightedFamily, SINGULAR_TOL,
};
use crate::positivize::{
    build_depth2, conjugate_to_positive, detect_ghc_depth2, find_invariant_arc, scalar_indices,
    GhcWitness, InvariantArc,
};
use crate::projective::{Matrix2, DEFAULT_CLASSIFY_TOL};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PipelineOptions {
    /// Classification and point-matching tolerance for non-integer input.
    pub tol: f64,
    /// Entries of conjugated matrices must exceed this times their scale.
    pub positivity_tol: f64,
    /// Use exact arithmetic when every entry is an integer.
    pub exact_integers: bool,
}

impl Default for PipelineOptions {
    fn default() -> Self {
        PipelineOptions {
            tol: DEFAULT_CLASSIFY_TOL,
            positivity_tol: 1e-12,
            exact_integers: true,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum PipelineStatus {
    Positive,
    Conjugated { p: Matrix2, arc: InvariantArc },
    GhcDetected { witness: GhcWitness },
    Degenerate { index: usize },
}

impl PipelineStatus {
    pub fn name(&self) -> &'static str {
        match self {
            PipelineStatus::Positive => "Positive",
            PipelineStatus::Conjugated { .. } => "Conjugated",
            PipelineStatus::GhcDetected { .. } => "GhcDetected",
            PipelineStatus::Degenerate { .. } => "Degenerate",
        }
    }

    /// Whether the kernel expansion applies.
    pub fn is_certifiable(&self) -> bool {
        matches!(
            self,
            PipelineStatus::Positive | PipelineStatus::Conjugated { .. }
        )
    }
}

/// Result of [`positivize`].
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Positivization {
    pub status: PipelineStatus,
    /// Indices split off as multiples of the identity.
    pub excluded: Vec<usize>,
    /// Positive matrices for the indices that were kept, in order.
    pub images: Vec<Matrix2>,
}

/// Result of [`lyapunov_pipeline`].
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct LyapunovOutcome {
    #[serde(flatten)]
    pub status: PipelineStatus,
    pub excluded: Vec<usize>,
    pub value: Option<CertifiedValue>,
}

fn singular_index(matrices: &[Matrix2]) -> Option<usize> {
    matrices
        .iter()
        .position(|m| match IntMatrix::from_matrix(m) {
            Some(im) => im.det() == Some(0),
            None => !m.is_invertible(SINGULAR_TOL),
        })
}

/// Decides which case of the trichotomy applies and, if possible, produces
/// positive conjugates of the non-scalar matrices.
pub fn positivize(matrices: &[Matrix2], opts: &PipelineOptions) -> Result<Positivization> {
    if matrices.is_empty() {
        return precondition("family is empty");
    }
    if let Some(index) = singular_index(matrices) {
        return Ok(Positivization {
            status: PipelineStatus::Degenerate { index },
            excluded: vec![],
            images: vec![],
        });
    }
    if matrices.iter().all(Matrix2::is_positive) {
        return Ok(Positivization {
            status: PipelineStatus::Positive,
            excluded: vec![],
            images: matrices.to_vec(),
        });
    }
    if let Some(i) = matrices.iter().position(|m| !m.is_nonnegative()) {
        return precondition(format!(
            "matrix {i} has a negative entry; only non-negative families are supported"
        ));
    }

    let ints: Option<Vec<IntMatrix>> = if opts.exact_integers {
        matrices.iter().map(IntMatrix::from_matrix).collect()
    } else {
        None
    };
    let excluded = match &ints {
        Some(ints) => (0..ints.len()).filter(|&i| ints[i].is_scalar()).collect(),
        None => scalar_indices(matrices, opts.tol),
    };
    let kept: Vec<Matrix2> = (0..matrices.len())
        .filter(|i| !excluded.contains(i))
        .map(|i| matrices[i])
        .collect();

    let exact_witness = match &ints {
        Some(ints) => match detect_ghc_exact(ints) {
            Ok(w) => Some(w),
            Err(e) => {
                log::warn!("exact detection failed ({e}); using floating point");
                None
            }
        },
        None => None,
    };
    if let Some(Some(witness)) = exact_witness {
        return Ok(Positivization {
            status: PipelineStatus::GhcDetected { witness },
            excluded,
            images: vec![],
        });
    }
    if kept.is_empty() {
        return Ok(Positivization {
            status: PipelineStatus::Positive,
            excluded,
            images: vec![],
        });
    }

    // depth-2 words are indexed within `kept`; map them back for reporting
    let sys = build_depth2(&kept, opts.tol)?;
    if exact_witness.is_none() {
        if let Some(witness) = detect_ghc_depth2(&sys, opts.tol) {
            let back: Vec<usize> = (0..matrices.len())
                .filter(|i| !excluded.contains(i))
                .collect();
            let witness = remap_witness(witness, &back);
            return Ok(Positivization {
                status: PipelineStatus::GhcDetected { witness },
                excluded,
                images: vec![],
            });
        }
    }
    let arc = find_invariant_arc(&kept, &sys)?;
    let conj = conjugate_to_positive(&kept, &arc, opts.positivity_tol)?;
    Ok(Positivization {
        status: PipelineStatus::Conjugated { p: conj.p, arc },
        excluded,
        images: conj.positive_images,
    })
}

fn remap_witness(w: GhcWitness, back: &[usize]) -> GhcWitness {
    let map = |v: Vec<usize>| v.into_iter().map(|i| back[i]).collect::<Vec<_>>();
    match w {
        GhcWitness::NonHyperbolic { word, kind } => GhcWitness::NonHyperbolic {
            word: map(word),
            kind,
        },
        GhcWitness::Connection {
            h,
            source,
            attracting,
            target,
            repelling,
        } => GhcWitness::Connection {
            h: map(h),
            source: map(source),
            attracting,
            target: map(target),
            repelling,
        },
    }
}

/// How the kernel parameters are chosen.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Parameters {
    /// Select `(N, M)` for this accuracy.
    Target(f64),
    /// Use the given radius and truncation, e.g. to replay a report.
    Fixed { r: f64, n: usize, m: usize },
}

/// Top Lyapunov exponent of a non-negative family to accuracy `eps`.
///
/// A multiple `cI` of the identity with weight `w₀` contributes `w₀ log c`;
/// the remaining matrices are handled with renormalized weights and their
/// exponent is scaled by `1 − w₀`.
pub fn lyapunov_pipeline(
    matrices: &[Matrix2],
    weights: &[f64],
    eps: f64,
    opts: &PipelineOptions,
) -> Result<LyapunovOutcome> {
    lyapunov_pipeline_with(matrices, weights, Parameters::Target(eps), opts)
}

pub fn lyapunov_pipeline_with(
    matrices: &[Matrix2],
    weights: &[f64],
    params: Parameters,
    opts: &PipelineOptions,
) -> Result<LyapunovOutcome> {
    if matrices.len() != weights.len() {
        return precondition(format!(
            "{} matrices but {} weights",
            matrices.len(),
            weights.len()
        ));
    }
    if let Parameters::Target(eps) = params {
        if !(eps > 0.0) {
            return precondition(format!("target accuracy {eps} must be positive"));
        }
    }
    let pos = positivize(matrices, opts)?;
    if !pos.status.is_certifiable() {
        return Ok(LyapunovOutcome {
            status: pos.status,
            excluded: pos.excluded,
            value: None,
        });
    }
    // validates the weights
    WeightedFamily::new(matrices.to_vec(), weights.to_vec())?;

    let w0: f64 = pos.excluded.iter().map(|&i| weights[i]).sum();
    let shift: f64 = pos
        .excluded
        .iter()
        .map(|&i| weights[i] * matrices[i].a.abs().ln())
        .sum();
    let rest_weights: Vec<f64> = (0..matrices.len())
        .filter(|i| !pos.excluded.contains(i))
        .map(|i| weights[i])
        .collect();

    let value = if pos.images.is_empty() {
        CertifiedValue {
            estimate: shift,
            truncation_bound: 0.0,
            n: 1,
            m: 2,
            r_used: 0.0,
        }
    } else {
        let fam = WeightedFamily::normalized(pos.images.clone(), rest_weights)?;
        let frac = 1.0 - w0;
        let inner = match params {
            Parameters::Target(eps) => compute_lyapunov(&fam, eps / frac)?,
            Parameters::Fixed { r, n, m } => compute_with_parameters(&fam, r, n, m)?,
        };
        CertifiedValue {
            estimate: shift + frac * inner.estimate,
            truncation_bound: frac * inner.truncation_bound,
            ..inner
        }
    };
    Ok(LyapunovOutcome {
        status: pos.status,
        excluded: pos.excluded,
        value: Some(value),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::oracle::mc_lyapunov;
    use crate::projective::MobiusKind;

    fn mf(rows: [[f64; 2]; 2]) -> Matrix2 {
        Matrix2::from(rows)
    }

    fn middle_fifth() -> Vec<Matrix2> {
        vec![
            mf([[4.0, 0.0], [2.0, 1.0]]),
            mf([[2.0, 1.0], [1.0, 2.0]]),
            mf([[1.0, 2.0], [2.0, 1.0]]),
            mf([[2.0, 1.0], [1.0, 2.0]]),
            mf([[1.0, 2.0], [0.0, 4.0]]),
        ]
    }

    #[test]
    fn middle_fifth_value() {
        let out = lyapunov_pipeline(
            &middle_fifth(),
            &[0.2; 5],
            1e-10,
            &PipelineOptions::default(),
        )
        .unwrap();
        assert_eq!(out.status.name(), "Conjugated");
        let v = out.value.unwrap();
        assert!((v.estimate - 1.159_357_955_327_188_3).abs() < 1e-9, "{v:?}");
        assert!(v.truncation_bound < 1e-10);
    }

    #[test]
    fn exact_and_float_paths_agree() {
        let float = PipelineOptions {
            exact_integers: false,
            ..Default::default()
        };
        let a = positivize(&middle_fifth(), &PipelineOptions::default()).unwrap();
        let b = positivize(&middle_fifth(), &float).unwrap();
        assert_eq!(a.status, b.status);
        let third = vec![
            mf([[2.0, 0.0], [0.0, 1.0]]),
            mf([[0.0, 1.0], [1.0, 0.0]]),
            mf([[1.0, 0.0], [0.0, 2.0]]),
        ];
        for opts in [PipelineOptions::default(), float] {
            match positivize(&third, &opts).unwrap().status {
                PipelineStatus::GhcDetected {
                    witness: GhcWitness::NonHyperbolic { kind, .. },
                } => {
                    assert_eq!(kind, MobiusKind::Involution)
                }
                other => panic!("unexpected {other:?}"),
            }
        }
    }

    #[test]
    fn degenerate_and_positive_statuses() {
        let s = positivize(&[mf([[1.0, 1.0], [1.0, 1.0]])], &PipelineOptions::default()).unwrap();
        assert_eq!(s.status, PipelineStatus::Degenerate { index: 0 });
        let s = positivize(&[mf([[1.0, 2.0], [3.0, 1.0]])], &PipelineOptions::default()).unwrap();
        assert_eq!(s.status, PipelineStatus::Positive);
        assert!(positivize(
            &[mf([[1.0, -2.0], [3.0, 1.0]])],
            &PipelineOptions::default()
        )
        .is_err());
    }

    #[test]
    fn scalar_atoms_are_split_off() {
        let ms = vec![
            mf([[4.0, 0.0], [2.0, 1.0]]),
            mf([[3.0, 0.0], [0.0, 3.0]]),
            mf([[1.0, 2.0], [0.0, 4.0]]),
        ];
        let w = [0.25, 0.5, 0.25];
        let out = lyapunov_pipeline(&ms, &w, 1e-10, &PipelineOptions::default()).unwrap();
        assert_eq!(out.excluded, vec![1]);
        let v = out.value.unwrap();
        let mc = mc_lyapunov(&ms, &w, 100_000, 32, 11).unwrap();
        assert!(
            (v.estimate - mc.mean).abs() < 4.0 * mc.std_error + 1e-9,
            "{v:?} vs {mc:?}"
        );
    }
}
