//! Deciding whether a non-negative family can be conjugated to a positive one.
//!
//! A family of invertible non-negative matrices either has a heteroclinic
//! connection among its words of length at most two, or it has a common
//! strictly invariant arc, in which case an explicit change of basis makes
//! every matrix entrywise positive.

use serde::{Deserialize, Serialize};

use crate::error::{precondition, Error, Result};
use crate::projective::{apply_f, ExtendedReal, Matrix2, MobiusClass, MobiusKind, MobiusMap};

/// Maximum number of halvings when pushing the arc endpoints.
pub const MAX_HALVINGS: u32 = 200;

/// Evidence that a family has a generalized heteroclinic connection.
///
/// Words are lists of family indices; `[i, j]` stands for `f_i ∘ f_j`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum GhcWitness {
    /// Some word of length ≤ 2 is not hyperbolic.
    NonHyperbolic { word: Vec<usize>, kind: MobiusKind },
    /// `h` (empty for the identity) maps the attracting point of `source`
    /// onto the repelling point of `target`.
    Connection {
        h: Vec<usize>,
        source: Vec<usize>,
        attracting: ExtendedReal,
        target: Vec<usize>,
        repelling: ExtendedReal,
    },
}

impl GhcWitness {
    pub fn describe(&self) -> String {
        match self {
            GhcWitness::NonHyperbolic { word, kind } => format!("word {word:?} is {kind}"),
            GhcWitness::Connection { h, source, attracting, target, repelling } => format!(
                "word {h:?} maps the attracting point {attracting} of {source:?} to the repelling point {repelling} of {target:?}"
            ),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Depth2Map {
    pub word: Vec<usize>,
    pub map: MobiusMap,
    pub class: MobiusClass,
}

/// All words of length one and two with their classifications.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Depth2System {
    pub maps: Vec<Depth2Map>,
    /// Indices removed because the matrix is a multiple of the identity.
    pub excluded: Vec<usize>,
    pub attr2: Vec<ExtendedReal>,
    pub rep2: Vec<ExtendedReal>,
    pub pole2: Vec<ExtendedReal>,
}

fn check_nonnegative(matrices: &[Matrix2]) -> Result<()> {
    for (i, m) in matrices.iter().enumerate() {
        if !m.is_finite() || m.det() == 0.0 {
            return precondition(format!("matrix {i} is singular"));
        }
        if !m.is_nonnegative() {
            return precondition(format!("matrix {i} {m} has a negative entry"));
        }
    }
    Ok(())
}

/// Indices of matrices that are (up to `tol`) multiples of the identity.
pub fn scalar_indices(matrices: &[Matrix2], tol: f64) -> Vec<usize> {
    (0..matrices.len())
        .filter(|&i| matrices[i].is_scalar_identity(tol))
        .collect()
}

pub fn build_depth2(matrices: &[Matrix2], tol: f64) -> Result<Depth2System> {
    check_nonnegative(matrices)?;
    let excluded = scalar_indices(matrices, tol);
    let kept: Vec<usize> = (0..matrices.len())
        .filter(|i| !excluded.contains(i))
        .collect();
    let charts: Vec<Matrix2> = kept
        .iter()
        .map(|&i| {
            let f = apply_f(&matrices[i]);
            f.scale(1.0 / f.max_abs())
        })
        .collect();

    let mut words: Vec<(Vec<usize>, Matrix2)> = Vec::with_capacity(kept.len() * (kept.len() + 1));
    for (x, f) in charts.iter().enumerate() {
        words.push((vec![kept[x]], *f));
    }
    for (x, f) in charts.iter().enumerate() {
        for (y, g) in charts.iter().enumerate() {
            words.push((vec![kept[x], kept[y]], f.mul(g)));
        }
    }

    let mut sys = Depth2System {
        maps: Vec::new(),
        excluded,
        attr2: Vec::new(),
        rep2: Vec::new(),
        pole2: Vec::new(),
    };
    for (word, rep) in words {
        let map = MobiusMap::new(rep)?;
        let class = map.classify(tol);
        for fp in &class.fixed_points {
            if fp.derivative <= 1.0 + tol {
                sys.attr2.push(fp.point);
            }
            if fp.derivative >= 1.0 - tol {
                sys.rep2.push(fp.point);
            }
        }
        sys.pole2.push(map.pole());
        sys.maps.push(Depth2Map { word, map, class });
    }
    Ok(sys)
}

/// Depth-2 connection test in floating point; points are matched by chordal
/// distance below `tol`.
pub fn detect_ghc_depth2(sys: &Depth2System, tol: f64) -> Option<GhcWitness> {
    if let Some(m) = sys
        .maps
        .iter()
        .find(|m| m.class.kind != MobiusKind::Hyperbolic)
    {
        return Some(GhcWitness::NonHyperbolic {
            word: m.word.clone(),
            kind: m.class.kind,
        });
    }
    let attracting: Vec<(usize, ExtendedReal)> = sys
        .maps
        .iter()
        .enumerate()
        .map(|(i, m)| (i, m.class.fixed_points[0].point))
        .collect();
    let repelling: Vec<(usize, ExtendedReal)> = sys
        .maps
        .iter()
        .enumerate()
        .map(|(i, m)| (i, m.class.fixed_points[1].point))
        .collect();
    let hs = std::iter::once(None).chain(sys.maps.iter().map(Some));
    for h in hs {
        for &(src, a) in &attracting {
            let y = h.map_or(a, |h| h.map.eval(a));
            if let Some(&(dst, r)) = repelling.iter().find(|(_, r)| y.approx_eq(*r, tol)) {
                return Some(GhcWitness::Connection {
                    h: h.map_or_else(Vec::new, |h| h.word.clone()),
                    source: sys.maps[src].word.clone(),
                    attracting: a,
                    target: sys.maps[dst].word.clone(),
                    repelling: r,
                });
            }
        }
    }
    None
}

/// A closed interval `[a, b]` mapped into its interior by every map.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct InvariantArc {
    pub a: f64,
    pub b: f64,
    pub certified: bool,
}

/// Checks that every `f_i = [F(A_i)]` is pole-free on `[a, b]` and maps both
/// endpoints into `(a, b)`.
pub fn certify_arc(matrices: &[Matrix2], a: f64, b: f64) -> bool {
    if !(a < b && a.is_finite() && b.is_finite()) {
        return false;
    }
    matrices.iter().all(|m| {
        let f = apply_f(m);
        let (da, db) = (f.c * a + f.d, f.c * b + f.d);
        if !(da * db > 0.0) {
            return false;
        }
        let (fa, fb) = ((f.a * a + f.b) / da, (f.a * b + f.b) / db);
        a < fa && fa < b && a < fb && fb < b
    })
}

/// The quantities from which the arc is grown.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct ArcSkeleton {
    pub beta1: f64,
    pub alpha1: f64,
    pub alpha2: f64,
    pub beta2: f64,
}

pub fn arc_skeleton(sys: &Depth2System) -> Result<ArcSkeleton> {
    let finite = |pts: &[ExtendedReal]| pts.iter().filter_map(|p| p.finite()).collect::<Vec<f64>>();
    let attr = finite(&sys.attr2);
    let rep = finite(&sys.rep2);
    let poles = finite(&sys.pole2);
    if attr.is_empty() {
        return Err(Error::ArcConstructionFailed(
            "no finite attracting fixed points".into(),
        ));
    }
    let tol = 1e-9;
    if let Some(x) = rep.iter().find(|x| x.abs() < 1.0 - tol) {
        return Err(Error::ArcConstructionFailed(format!(
            "repelling fixed point {x} inside (-1, 1)"
        )));
    }
    let beta1 = poles
        .iter()
        .filter(|&&p| p < -1.0)
        .chain(rep.iter().filter(|&&p| p <= -1.0 + tol))
        .fold(-2.0_f64, |m, &x| m.max(x));
    let beta2 = poles
        .iter()
        .filter(|&&p| p > 1.0)
        .chain(rep.iter().filter(|&&p| p >= 1.0 - tol))
        .fold(2.0_f64, |m, &x| m.min(x));
    let alpha1 = attr.iter().copied().fold(f64::INFINITY, f64::min);
    let alpha2 = attr.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if !(beta1 < alpha1 && alpha1 <= alpha2 && alpha2 < beta2) {
        return Err(Error::ArcConstructionFailed(format!(
            "expected beta1 < alpha1 <= alpha2 < beta2, got {beta1}, {alpha1}, {alpha2}, {beta2}"
        )));
    }
    Ok(ArcSkeleton {
        beta1,
        alpha1,
        alpha2,
        beta2,
    })
}

/// Grows a strictly invariant arc out of the attracting fixed points.
pub fn find_invariant_arc(matrices: &[Matrix2], sys: &Depth2System) -> Result<InvariantArc> {
    let sk = arc_skeleton(sys)?;
    let maps: Vec<MobiusMap> = matrices
        .iter()
        .map(MobiusMap::of_matrix)
        .collect::<Result<_>>()?;

    let a0 = maps
        .iter()
        .map(|f| f.eval_f64(sk.alpha2))
        .fold(sk.alpha1, f64::min);
    let a = (1..=MAX_HALVINGS)
        .map(|k| a0 - (a0 - sk.beta1) * 0.5f64.powi(k as i32))
        .find(|&a| maps.iter().all(|f| f.eval_f64(a) < sk.beta2))
        .ok_or_else(|| Error::ArcConstructionFailed("left endpoint did not settle".into()))?;

    let b0 = maps.iter().map(|f| f.eval_f64(a)).fold(sk.alpha2, f64::max);
    let b = (1..=MAX_HALVINGS)
        .map(|k| b0 + (sk.beta2 - b0) * 0.5f64.powi(k as i32))
        .find(|&b| maps.iter().all(|f| f.eval_f64(b) > a))
        .ok_or_else(|| Error::ArcConstructionFailed("right endpoint did not settle".into()))?;

    if !certify_arc(matrices, a, b) {
        return Err(Error::ArcConstructionFailed(format!(
            "arc [{a}, {b}] is not strictly invariant"
        )));
    }
    Ok(InvariantArc {
        a,
        b,
        certified: true,
    })
}

/// `P` together with the positive matrices `P A_i P⁻¹`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Conjugation {
    pub p: Matrix2,
    pub positive_images: Vec<Matrix2>,
}

/// The conjugator sending the arc `[a, b]` to `[−1, 1]`.
pub fn conjugator(a: f64, b: f64) -> Result<Matrix2> {
    if !(a < b) {
        return precondition(format!("arc endpoints {a} < {b} required"));
    }
    let q = Matrix2::new(2.0, -(a + b), 0.0, b - a);
    let h = Matrix2::H;
    let p = h.inverse().expect("H is invertible").mul(&q).mul(&h);
    Ok(p.scale(1.0 / p.max_abs()))
}

/// Conjugates with `p`, requiring every entry of every image to exceed
/// `tol` times that image's largest entry.
pub fn conjugate_with(matrices: &[Matrix2], p: &Matrix2, tol: f64) -> Result<Conjugation> {
    let p_inv = p
        .inverse()
        .ok_or_else(|| Error::Precondition("conjugator is singular".into()))?;
    let mut images = Vec::with_capacity(matrices.len());
    for (index, m) in matrices.iter().enumerate() {
        let img = p.mul(m).mul(&p_inv);
        let scale = img.max_abs();
        let value = img.min_entry();
        if !(value > tol * scale) {
            return Err(Error::PositivityFailed { index, value });
        }
        images.push(img);
    }
    Ok(Conjugation {
        p: *p,
        positive_images: images,
    })
}

pub fn conjugate_to_positive(
    matrices: &[Matrix2],
    arc: &InvariantArc,
    tol: f64,
) -> Result<Conjugation> {
    if !arc.certified {
        return precondition("arc is not certified");
    }
    conjugate_with(matrices, &conjugator(arc.a, arc.b)?, tol)
}
