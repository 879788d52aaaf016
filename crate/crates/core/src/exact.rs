//! Exact integer Möbius arithmetic.
//!
//! Fixed points of integer Möbius maps are real quadratic irrationals, so they
//! are held as `(p + q√k)/r` with integer `p, q, r` and squarefree `k`. Images
//! under integer maps stay in the same field, which lets heteroclinic matching
//! be decided with equality instead of a tolerance.

use std::collections::{HashMap, HashSet};
use std::fmt;

use num_integer::{Integer, Roots};

use crate::error::{Error, Result};
use crate::positivize::GhcWitness;
use crate::projective::{ExtendedReal, Matrix2, MobiusKind};

/// Integer 2×2 matrix `[[a, b], [c, d]]`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct IntMatrix {
    pub a: i128,
    pub b: i128,
    pub c: i128,
    pub d: i128,
}

impl IntMatrix {
    pub const fn new(a: i128, b: i128, c: i128, d: i128) -> Self {
        IntMatrix { a, b, c, d }
    }

    /// Converts a float matrix whose entries are all integers.
    pub fn from_matrix(m: &Matrix2) -> Option<Self> {
        if !m.is_integral() {
            return None;
        }
        Some(IntMatrix::new(
            m.a as i128,
            m.b as i128,
            m.c as i128,
            m.d as i128,
        ))
    }

    pub fn to_matrix(&self) -> Matrix2 {
        Matrix2::new(self.a as f64, self.b as f64, self.c as f64, self.d as f64)
    }

    pub fn det(&self) -> Option<i128> {
        self.a
            .checked_mul(self.d)?
            .checked_sub(self.b.checked_mul(self.c)?)
    }

    pub fn trace(&self) -> Option<i128> {
        self.a.checked_add(self.d)
    }

    pub fn mul(&self, o: &IntMatrix) -> Option<IntMatrix> {
        let dot =
            |x: i128, y: i128, u: i128, v: i128| x.checked_mul(y)?.checked_add(u.checked_mul(v)?);
        Some(IntMatrix::new(
            dot(self.a, o.a, self.b, o.c)?,
            dot(self.a, o.b, self.b, o.d)?,
            dot(self.c, o.a, self.d, o.c)?,
            dot(self.c, o.b, self.d, o.d)?,
        ))
    }

    pub fn is_scalar(&self) -> bool {
        self.b == 0 && self.c == 0 && self.a == self.d
    }

    /// `2·F(A)`, which is integral for integer `A`.
    pub fn doubled_f(&self) -> Option<IntMatrix> {
        let (p, q, r, s) = (self.a, self.b, self.c, self.d);
        let comb =
            |x: i128, y: i128, z: i128, w: i128| x.checked_add(y)?.checked_add(z)?.checked_add(w);
        Some(IntMatrix::new(
            comb(p, -q, -r, s)?,
            comb(p, q, -r, -s)?,
            comb(p, -q, r, -s)?,
            comb(p, q, r, s)?,
        ))
    }

    /// Primitive representative with positive leading nonzero entry, used to
    /// identify projectively equal maps.
    fn projective_key(&self) -> IntMatrix {
        let g = self.a.gcd(&self.b).gcd(&self.c).gcd(&self.d);
        let g = if g == 0 { 1 } else { g };
        let lead = [self.a, self.b, self.c, self.d]
            .into_iter()
            .find(|&x| x != 0)
            .unwrap_or(1);
        let g = if lead < 0 { -g } else { g };
        IntMatrix::new(self.a / g, self.b / g, self.c / g, self.d / g)
    }
}

fn overflow() -> Error {
    Error::Numerical("integer overflow in exact Möbius arithmetic".into())
}

/// Splits `n > 0` as `s² · k` with `k` squarefree.
pub fn squarefree_split(n: i128) -> (i128, i128) {
    debug_assert!(n > 0);
    let mut m = n;
    let (mut s, mut k) = (1i128, 1i128);
    let mut p = 2i128;
    // once every prime up to the cube root of the cofactor is removed, the
    // cofactor has at most two prime factors
    while p * p * p <= m {
        let mut e = 0;
        while m % p == 0 {
            m /= p;
            e += 1;
        }
        s *= p.pow(e / 2);
        k *= p.pow(e % 2);
        p += if p == 2 { 1 } else { 2 };
    }
    let t = m.sqrt();
    if t * t == m {
        (s * t, k)
    } else {
        (s, k * m)
    }
}

/// The number `(p + q√k)/r` in lowest terms: `r > 0`, `k` squarefree,
/// `q = 0` whenever `k = 1`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct QuadraticNumber {
    p: i128,
    q: i128,
    r: i128,
    k: i128,
}

impl QuadraticNumber {
    pub fn rational(p: i128, r: i128) -> Option<Self> {
        QuadraticNumber::new(p, 0, r, 1)
    }

    /// `(p + q√n)/r` for any `n ≥ 1`; returns `None` on overflow or `r = 0`.
    pub fn new(p: i128, q: i128, r: i128, n: i128) -> Option<Self> {
        if r == 0 || n < 1 {
            return None;
        }
        let (s, k) = squarefree_split(n);
        let q = q.checked_mul(s)?;
        let (p, q, k) = if k == 1 {
            (p.checked_add(q)?, 0, 1)
        } else {
            (p, q, k)
        };
        let k = if q == 0 { 1 } else { k };
        let g = p.gcd(&q).gcd(&r);
        let g = if r < 0 { -g } else { g };
        Some(QuadraticNumber {
            p: p / g,
            q: q / g,
            r: r / g,
            k,
        })
    }

    pub fn parts(&self) -> (i128, i128, i128, i128) {
        (self.p, self.q, self.r, self.k)
    }

    pub fn to_f64(&self) -> f64 {
        (self.p as f64 + self.q as f64 * (self.k as f64).sqrt()) / self.r as f64
    }
}

impl fmt::Display for QuadraticNumber {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.q == 0 {
            write!(f, "{}/{}", self.p, self.r)
        } else {
            write!(f, "({} + {}√{})/{}", self.p, self.q, self.k, self.r)
        }
    }
}

/// A point of R̂ with exact coordinates.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum ExactPoint {
    Finite(QuadraticNumber),
    Infinity,
}

impl ExactPoint {
    pub fn to_extended(&self) -> ExtendedReal {
        match self {
            ExactPoint::Finite(x) => ExtendedReal::Finite(x.to_f64()),
            ExactPoint::Infinity => ExtendedReal::Infinity,
        }
    }

    /// Image under the Möbius map of `m`.
    pub fn apply(&self, m: &IntMatrix) -> Option<ExactPoint> {
        let x = match self {
            ExactPoint::Infinity => {
                return if m.c == 0 {
                    Some(ExactPoint::Infinity)
                } else {
                    QuadraticNumber::rational(m.a, m.c).map(ExactPoint::Finite)
                }
            }
            ExactPoint::Finite(x) => x,
        };
        let (p, q, r, k) = (x.p, x.q, x.r, x.k);
        // (a x + b)/(c x + d) = (n1 + n2√k)/(d1 + d2√k)
        let n1 = m.a.checked_mul(p)?.checked_add(m.b.checked_mul(r)?)?;
        let n2 = m.a.checked_mul(q)?;
        let d1 = m.c.checked_mul(p)?.checked_add(m.d.checked_mul(r)?)?;
        let d2 = m.c.checked_mul(q)?;
        if d1 == 0 && d2 == 0 {
            return Some(ExactPoint::Infinity);
        }
        let norm = d1
            .checked_mul(d1)?
            .checked_sub(d2.checked_mul(d2)?.checked_mul(k)?)?;
        let u = n1
            .checked_mul(d1)?
            .checked_sub(n2.checked_mul(d2)?.checked_mul(k)?)?;
        let v = n2.checked_mul(d1)?.checked_sub(n1.checked_mul(d2)?)?;
        QuadraticNumber::new(u, v, norm, k).map(ExactPoint::Finite)
    }
}

/// Exact classification of an integer Möbius map.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ExactClass {
    NonHyperbolic(MobiusKind),
    Hyperbolic {
        attracting: ExactPoint,
        repelling: ExactPoint,
    },
}

pub fn classify_exact(m: &IntMatrix) -> Option<ExactClass> {
    use ExactClass::*;
    let (a, b, c, d) = (m.a, m.b, m.c, m.d);
    if m.is_scalar() {
        return Some(NonHyperbolic(MobiusKind::Identity));
    }
    if c == 0 {
        if a == d {
            return Some(NonHyperbolic(MobiusKind::Parabolic));
        }
        if a.abs() == d.abs() {
            return Some(NonHyperbolic(MobiusKind::Involution));
        }
        let p = ExactPoint::Finite(QuadraticNumber::rational(b, d.checked_sub(a)?)?);
        // derivative a/d at p and d/a at ∞
        return Some(if a.abs() < d.abs() {
            Hyperbolic {
                attracting: p,
                repelling: ExactPoint::Infinity,
            }
        } else {
            Hyperbolic {
                attracting: ExactPoint::Infinity,
                repelling: p,
            }
        });
    }
    let disc = (d - a)
        .checked_mul(d - a)?
        .checked_add(b.checked_mul(c)?.checked_mul(4)?)?;
    if disc < 0 {
        return Some(NonHyperbolic(MobiusKind::Elliptic));
    }
    if disc == 0 {
        return Some(NonHyperbolic(MobiusKind::Parabolic));
    }
    let t = m.trace()?;
    if t == 0 {
        return Some(NonHyperbolic(MobiusKind::Involution));
    }
    // roots ((a − d) ± √Δ)/(2c); the '+' root attracts when the trace is positive
    let plus = ExactPoint::Finite(QuadraticNumber::new(a - d, 1, c.checked_mul(2)?, disc)?);
    let minus = ExactPoint::Finite(QuadraticNumber::new(a - d, -1, c.checked_mul(2)?, disc)?);
    Some(if t > 0 {
        Hyperbolic {
            attracting: plus,
            repelling: minus,
        }
    } else {
        Hyperbolic {
            attracting: minus,
            repelling: plus,
        }
    })
}

/// Depth-2 heteroclinic detection for an integer family, done exactly.
///
/// `matrices` are the original (non-chart) matrices. Scalar multiples of the
/// identity are dropped before the analysis. Returns the witness when a
/// connection exists, `None` when the family is free of them.
pub fn detect_ghc_exact(matrices: &[IntMatrix]) -> Result<Option<GhcWitness>> {
    let kept: Vec<usize> = (0..matrices.len())
        .filter(|&i| !matrices[i].is_scalar())
        .collect();
    let fs: Vec<IntMatrix> = kept
        .iter()
        .map(|&i| matrices[i].doubled_f().ok_or_else(overflow))
        .collect::<Result<_>>()?;

    let mut words: Vec<(Vec<usize>, IntMatrix)> = Vec::with_capacity(fs.len() * (fs.len() + 1));
    for (x, f) in fs.iter().enumerate() {
        words.push((vec![kept[x]], *f));
    }
    for (x, f) in fs.iter().enumerate() {
        for (y, g) in fs.iter().enumerate() {
            words.push((vec![kept[x], kept[y]], f.mul(g).ok_or_else(overflow)?));
        }
    }

    let mut seen = HashSet::new();
    let mut maps: Vec<(Vec<usize>, IntMatrix)> = Vec::new();
    let mut attracting: Vec<(ExactPoint, usize)> = Vec::new();
    let mut repelling: HashMap<ExactPoint, usize> = HashMap::new();
    for (word, m) in words {
        if !seen.insert(m.projective_key()) {
            continue;
        }
        match classify_exact(&m).ok_or_else(overflow)? {
            ExactClass::NonHyperbolic(kind) => {
                return Ok(Some(GhcWitness::NonHyperbolic { word, kind }));
            }
            ExactClass::Hyperbolic {
                attracting: a,
                repelling: r,
            } => {
                attracting.push((a, maps.len()));
                repelling.entry(r).or_insert(maps.len());
            }
        }
        maps.push((word, m));
    }

    for &(a, src) in &attracting {
        if let Some(&dst) = repelling.get(&a) {
            return Ok(Some(GhcWitness::Connection {
                h: Vec::new(),
                source: maps[src].0.clone(),
                attracting: a.to_extended(),
                target: maps[dst].0.clone(),
                repelling: a.to_extended(),
            }));
        }
        for (h_word, h) in &maps {
            let y = a.apply(h).ok_or_else(overflow)?;
            if let Some(&dst) = repelling.get(&y) {
                return Ok(Some(GhcWitness::Connection {
                    h: h_word.clone(),
                    source: maps[src].0.clone(),
                    attracting: a.to_extended(),
                    target: maps[dst].0.clone(),
                    repelling: y.to_extended(),
                }));
            }
        }
    }
    Ok(None)
}
