//! 2×2 matrices and their projective action on the extended real line.
//!
//! A non-negative matrix acts on the 1-simplex, which is identified with
//! `[-1, 1]` through `x ↦ ½(1 + x, 1 − x)`. In that chart the action becomes
//! the Möbius map of [`apply_f`]`(A)`, and `F(A) = H A H⁻¹` with
//! `H = [[1, −1], [1, 1]]`.

use std::f64::consts::PI;
use std::fmt;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{precondition, Result};

/// Default relative tolerance for classification of floating-point maps.
pub const DEFAULT_CLASSIFY_TOL: f64 = 1e-9;

/// Absolute tolerance on the chordal angle used to identify points of R̂.
pub const CHORDAL_TOL: f64 = 1e-9;

/// A real 2×2 matrix `[[a, b], [c, d]]`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(from = "[[f64; 2]; 2]", into = "[[f64; 2]; 2]")]
pub struct Matrix2 {
    pub a: f64,
    pub b: f64,
    pub c: f64,
    pub d: f64,
}

impl From<[[f64; 2]; 2]> for Matrix2 {
    fn from(rows: [[f64; 2]; 2]) -> Self {
        Matrix2::new(rows[0][0], rows[0][1], rows[1][0], rows[1][1])
    }
}

impl From<Matrix2> for [[f64; 2]; 2] {
    fn from(m: Matrix2) -> Self {
        m.rows()
    }
}

impl Matrix2 {
    pub const IDENTITY: Matrix2 = Matrix2 {
        a: 1.0,
        b: 0.0,
        c: 0.0,
        d: 1.0,
    };

    /// `H`, the change of basis behind the F chart.
    pub const H: Matrix2 = Matrix2 {
        a: 1.0,
        b: -1.0,
        c: 1.0,
        d: 1.0,
    };

    pub const fn new(a: f64, b: f64, c: f64, d: f64) -> Self {
        Matrix2 { a, b, c, d }
    }

    pub fn rows(&self) -> [[f64; 2]; 2] {
        [[self.a, self.b], [self.c, self.d]]
    }

    pub fn entries(&self) -> [f64; 4] {
        [self.a, self.b, self.c, self.d]
    }

    pub fn det(&self) -> f64 {
        self.a * self.d - self.b * self.c
    }

    pub fn trace(&self) -> f64 {
        self.a + self.d
    }

    pub fn mul(&self, o: &Matrix2) -> Matrix2 {
        Matrix2::new(
            self.a * o.a + self.b * o.c,
            self.a * o.b + self.b * o.d,
            self.c * o.a + self.d * o.c,
            self.c * o.b + self.d * o.d,
        )
    }

    pub fn scale(&self, t: f64) -> Matrix2 {
        Matrix2::new(t * self.a, t * self.b, t * self.c, t * self.d)
    }

    pub fn transpose(&self) -> Matrix2 {
        Matrix2::new(self.a, self.c, self.b, self.d)
    }

    pub fn sub(&self, o: &Matrix2) -> Matrix2 {
        Matrix2::new(self.a - o.a, self.b - o.b, self.c - o.c, self.d - o.d)
    }

    /// Inverse, or `None` when the determinant is exactly zero.
    pub fn inverse(&self) -> Option<Matrix2> {
        let det = self.det();
        if det == 0.0 || !det.is_finite() {
            return None;
        }
        Some(Matrix2::new(
            self.d / det,
            -self.b / det,
            -self.c / det,
            self.a / det,
        ))
    }

    pub fn max_abs(&self) -> f64 {
        self.entries().iter().fold(0.0_f64, |m, x| m.max(x.abs()))
    }

    pub fn min_entry(&self) -> f64 {
        self.entries().iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn frobenius(&self) -> f64 {
        self.entries().iter().map(|x| x * x).sum::<f64>().sqrt()
    }

    pub fn is_finite(&self) -> bool {
        self.entries().iter().all(|x| x.is_finite())
    }

    /// `|det| > tol · max|entry|²`, i.e. invertible relative to the matrix scale.
    pub fn is_invertible(&self, tol: f64) -> bool {
        let s = self.max_abs();
        s > 0.0 && self.det().abs() > tol * s * s
    }

    pub fn is_nonnegative(&self) -> bool {
        self.entries().iter().all(|&x| x >= 0.0)
    }

    pub fn is_positive(&self) -> bool {
        self.entries().iter().all(|&x| x > 0.0)
    }

    /// True when every entry is an integer of moderate size, so exact
    /// integer arithmetic can stand in for floating point.
    pub fn is_integral(&self) -> bool {
        self.entries()
            .iter()
            .all(|&x| x.fract() == 0.0 && x.abs() < (1u64 << 40) as f64)
    }

    /// Scalar multiple of the identity, up to `tol` relative to the scale.
    pub fn is_scalar_identity(&self, tol: f64) -> bool {
        let s = self.max_abs();
        s > 0.0
            && self.b.abs() <= tol * s
            && self.c.abs() <= tol * s
            && (self.a - self.d).abs() <= tol * s
    }
}

impl fmt::Display for Matrix2 {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "[[{}, {}], [{}, {}]]", self.a, self.b, self.c, self.d)
    }
}

/// The F chart: `F(A) = H A H⁻¹`, written out entrywise.
///
/// For `A = [[p, q], [r, s]]` this is
/// `½ [[p−q−r+s, p+q−r−s], [p−q+r−s, p+q+r+s]]`.
pub fn apply_f(m: &Matrix2) -> Matrix2 {
    let (p, q, r, s) = (m.a, m.b, m.c, m.d);
    Matrix2::new(
        0.5 * (p - q - r + s),
        0.5 * (p + q - r - s),
        0.5 * (p - q + r - s),
        0.5 * (p + q + r + s),
    )
}

/// Inverse of the F chart: `H⁻¹ N H`.
pub fn apply_f_inverse(n: &Matrix2) -> Matrix2 {
    let (a, b, c, d) = (n.a, n.b, n.c, n.d);
    Matrix2::new(
        0.5 * ((a + b) + (c + d)),
        0.5 * ((b - a) + (d - c)),
        0.5 * ((c + d) - (a + b)),
        0.5 * ((d - c) - (b - a)),
    )
}

/// A point of R̂ = ℝ ∪ {∞}.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum ExtendedReal {
    Finite(f64),
    Infinity,
}

impl ExtendedReal {
    pub fn finite(self) -> Option<f64> {
        match self {
            ExtendedReal::Finite(x) => Some(x),
            ExtendedReal::Infinity => None,
        }
    }

    pub fn is_infinite(self) -> bool {
        matches!(self, ExtendedReal::Infinity)
    }

    /// Angle of the point on the circle R̂: `2·atan2(1, x)`, with ∞ at 0.
    pub fn chordal_angle(self) -> f64 {
        match self {
            ExtendedReal::Finite(x) => 2.0 * 1.0_f64.atan2(x),
            ExtendedReal::Infinity => 0.0,
        }
    }

    /// Angular distance on the circle, in `[0, π]`.
    pub fn chordal_distance(self, other: ExtendedReal) -> f64 {
        let diff = (self.chordal_angle() - other.chordal_angle()).abs() % (2.0 * PI);
        diff.min(2.0 * PI - diff)
    }

    pub fn approx_eq(self, other: ExtendedReal, tol: f64) -> bool {
        self.chordal_distance(other) <= tol
    }

    /// Lossy conversion: ∞ becomes `f64::INFINITY`.
    pub fn to_f64(self) -> f64 {
        self.finite().unwrap_or(f64::INFINITY)
    }
}

impl From<f64> for ExtendedReal {
    fn from(x: f64) -> Self {
        if x.is_infinite() {
            ExtendedReal::Infinity
        } else {
            ExtendedReal::Finite(x)
        }
    }
}

impl fmt::Display for ExtendedReal {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ExtendedReal::Finite(x) => write!(f, "{x}"),
            ExtendedReal::Infinity => write!(f, "inf"),
        }
    }
}

impl Serialize for ExtendedReal {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        match self {
            ExtendedReal::Finite(x) => s.serialize_f64(*x),
            ExtendedReal::Infinity => s.serialize_str("inf"),
        }
    }
}

impl<'de> Deserialize<'de> for ExtendedReal {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Repr {
            Num(f64),
            Str(String),
        }
        match Repr::deserialize(d)? {
            Repr::Num(x) => Ok(ExtendedReal::Finite(x)),
            Repr::Str(s) if s == "inf" => Ok(ExtendedReal::Infinity),
            Repr::Str(s) => Err(serde::de::Error::custom(format!(
                "expected number or \"inf\", got {s:?}"
            ))),
        }
    }
}

/// Kind of a real Möbius map.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MobiusKind {
    Identity,
    Elliptic,
    Parabolic,
    Involution,
    Hyperbolic,
}

impl fmt::Display for MobiusKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            MobiusKind::Identity => "identity",
            MobiusKind::Elliptic => "elliptic",
            MobiusKind::Parabolic => "parabolic",
            MobiusKind::Involution => "involution",
            MobiusKind::Hyperbolic => "hyperbolic",
        };
        f.write_str(s)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct FixedPoint {
    pub point: ExtendedReal,
    /// `|f'(point)|`
    pub derivative: f64,
}

/// Classification together with fixed points.
///
/// For hyperbolic maps `fixed_points[0]` is the attracting point and
/// `fixed_points[1]` the repelling one.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MobiusClass {
    pub kind: MobiusKind,
    pub fixed_points: Vec<FixedPoint>,
}

impl MobiusClass {
    pub fn attracting(&self) -> Option<FixedPoint> {
        match self.kind {
            MobiusKind::Hyperbolic => Some(self.fixed_points[0]),
            _ => None,
        }
    }

    pub fn repelling(&self) -> Option<FixedPoint> {
        match self.kind {
            MobiusKind::Hyperbolic => Some(self.fixed_points[1]),
            _ => None,
        }
    }
}

/// Projective class of an invertible real 2×2 matrix, acting on R̂.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MobiusMap {
    rep: Matrix2,
}

impl MobiusMap {
    pub fn new(rep: Matrix2) -> Result<Self> {
        if !rep.is_finite() || rep.det() == 0.0 {
            return precondition(format!("Möbius representative {rep} is not invertible"));
        }
        Ok(MobiusMap { rep })
    }

    /// The projective map `[F(A)]` of a matrix.
    pub fn of_matrix(a: &Matrix2) -> Result<Self> {
        MobiusMap::new(apply_f(a))
    }

    /// `s(x) = −1/x`.
    pub fn flip() -> Self {
        MobiusMap {
            rep: Matrix2::new(0.0, -1.0, 1.0, 0.0),
        }
    }

    pub fn identity() -> Self {
        MobiusMap {
            rep: Matrix2::IDENTITY,
        }
    }

    pub fn representative(&self) -> &Matrix2 {
        &self.rep
    }

    /// Real evaluation; returns ±∞ at the pole.
    #[inline]
    pub fn eval_f64(&self, x: f64) -> f64 {
        let m = &self.rep;
        (m.a * x + m.b) / (m.c * x + m.d)
    }

    pub fn eval(&self, x: ExtendedReal) -> ExtendedReal {
        let m = &self.rep;
        match x {
            ExtendedReal::Finite(x) => {
                let den = m.c * x + m.d;
                if den == 0.0 {
                    ExtendedReal::Infinity
                } else {
                    ExtendedReal::Finite((m.a * x + m.b) / den)
                }
            }
            ExtendedReal::Infinity => {
                if m.c == 0.0 {
                    ExtendedReal::Infinity
                } else {
                    ExtendedReal::Finite(m.a / m.c)
                }
            }
        }
    }

    /// `f'(x) = det / (cx + d)²`.
    pub fn derivative(&self, x: f64) -> f64 {
        let den = self.rep.c * x + self.rep.d;
        self.rep.det() / (den * den)
    }

    /// `|f'|` at a point of R̂; at ∞ via the chart `1/f(1/z)`.
    pub fn derivative_abs(&self, x: ExtendedReal) -> f64 {
        match x {
            ExtendedReal::Finite(x) => self.derivative(x).abs(),
            // only meaningful when ∞ is fixed, i.e. c = 0, where it equals d/a
            ExtendedReal::Infinity => (self.rep.d / self.rep.a).abs(),
        }
    }

    /// The pole `f⁻¹(∞)`.
    pub fn pole(&self) -> ExtendedReal {
        if self.rep.c == 0.0 {
            ExtendedReal::Infinity
        } else {
            ExtendedReal::Finite(-self.rep.d / self.rep.c)
        }
    }

    /// `self ∘ other`.
    pub fn compose(&self, other: &MobiusMap) -> MobiusMap {
        MobiusMap {
            rep: self.rep.mul(&other.rep),
        }
    }

    pub fn inverse(&self) -> MobiusMap {
        let m = &self.rep;
        MobiusMap {
            rep: Matrix2::new(m.d, -m.b, -m.c, m.a),
        }
    }

    /// `[M]ᵀ = [Mᵀ]`.
    pub fn transpose(&self) -> MobiusMap {
        MobiusMap {
            rep: self.rep.transpose(),
        }
    }

    /// Classify with relative tolerance `tol` against the representative's scale.
    pub fn classify(&self, tol: f64) -> MobiusClass {
        let s = self.rep.max_abs();
        let m = self.rep.scale(1.0 / s);
        let (a, b, c, d) = (m.a, m.b, m.c, m.d);
        let det = m.det();

        if b.abs() <= tol && c.abs() <= tol && (a - d).abs() <= tol {
            return MobiusClass {
                kind: MobiusKind::Identity,
                fixed_points: Vec::new(),
            };
        }

        if c == 0.0 {
            // f(x) = (a x + b) / d fixes ∞
            if (a - d).abs() <= tol {
                return MobiusClass {
                    kind: MobiusKind::Parabolic,
                    fixed_points: vec![FixedPoint {
                        point: ExtendedReal::Infinity,
                        derivative: 1.0,
                    }],
                };
            }
            let p = FixedPoint {
                point: ExtendedReal::Finite(b / (d - a)),
                derivative: (a / d).abs(),
            };
            let inf = FixedPoint {
                point: ExtendedReal::Infinity,
                derivative: (d / a).abs(),
            };
            return two_point_class(p, inf, tol);
        }

        let disc = (d - a) * (d - a) + 4.0 * b * c;
        if disc.abs() <= tol {
            let q = (a - d) / (2.0 * c);
            return MobiusClass {
                kind: MobiusKind::Parabolic,
                fixed_points: vec![FixedPoint {
                    point: ExtendedReal::Finite(q),
                    derivative: 1.0,
                }],
            };
        }
        if disc < 0.0 {
            return MobiusClass {
                kind: MobiusKind::Elliptic,
                fixed_points: Vec::new(),
            };
        }
        // roots of c x² + (d − a) x − b = 0, computed without cancellation
        let bq = d - a;
        let sq = disc.sqrt();
        let q = -0.5 * (bq + if bq >= 0.0 { sq } else { -sq });
        let x1 = q / c;
        let x2 = -b / q;
        let fp = |x: f64| {
            let den = c * x + d;
            FixedPoint {
                point: ExtendedReal::Finite(x),
                derivative: (det / (den * den)).abs(),
            }
        };
        two_point_class(fp(x1), fp(x2), tol)
    }
}

fn two_point_class(p: FixedPoint, q: FixedPoint, tol: f64) -> MobiusClass {
    let neutral = |f: &FixedPoint| (f.derivative - 1.0).abs() <= tol;
    if neutral(&p) && neutral(&q) {
        return MobiusClass {
            kind: MobiusKind::Involution,
            fixed_points: vec![p, q],
        };
    }
    let (att, rep) = if p.derivative < q.derivative {
        (p, q)
    } else {
        (q, p)
    };
    MobiusClass {
        kind: MobiusKind::Hyperbolic,
        fixed_points: vec![att, rep],
    }
}

/// Hyperbolic distance on `(−1, 1)`: `2 artanh |(x − y)/(1 − xy)|`.
pub fn hyperbolic_distance(x: f64, y: f64) -> Result<f64> {
    if !(x.abs() < 1.0 && y.abs() < 1.0) {
        return precondition(format!(
            "hyperbolic distance needs |x|,|y| < 1, got ({x}, {y})"
        ));
    }
    Ok(2.0 * ((x - y) / (1.0 - x * y)).abs().atanh())
}
