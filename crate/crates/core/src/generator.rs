//! Toom-Cook construction of minimal filtering algorithms.
//!
//! A minimal linear-convolution algorithm evaluates both polynomials at
//! `α = m + r - 1` points (optionally including the point at infinity, which
//! reads off the leading coefficient), multiplies pointwise, and
//! interpolates back with the Chinese remainder theorem. Transposing that
//! algorithm with respect to the data operand yields `F(m, r)`.
//!
//! Scaling convention: `Bᵀ` rows are the integer-coefficient Lagrange
//! numerators `∏_{j≠i}(x - a_j)` (and `∏_j (x - a_j)` for infinity), the
//! denominators `1/∏_{j≠i}(a_i - a_j)` are folded into `G`, and `Aᵀ` is the
//! plain transposed Vandermonde matrix. With points `{0, 1, -1, 2, -2, ∞}`
//! this reproduces the hand-derived F(4,3) exactly.

use std::fmt;
use std::str::FromStr;

use num_traits::{One, Signed, Zero};

use crate::error::{ConvError, Result};
use crate::matrix::{format_rational, parse_rational, rat, Matrix, Rational};
use crate::oracle::{fir_valid, random_rational};
use crate::winograd::{Nested2d, WinogradAlgorithm};

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Point {
    Finite(Rational),
    Infinity,
}

impl fmt::Display for Point {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Point::Finite(v) => f.write_str(&format_rational(v)),
            Point::Infinity => f.write_str("inf"),
        }
    }
}

impl FromStr for Point {
    type Err = ConvError;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "inf" | "Inf" | "infinity" | "∞" => Ok(Point::Infinity),
            other => parse_rational(other).map(Point::Finite),
        }
    }
}

/// Distinct evaluation points, at most one of them infinite.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PointSet {
    finite: Vec<Rational>,
    infinity: bool,
}

impl PointSet {
    pub fn new(points: Vec<Point>) -> Result<Self> {
        let mut finite: Vec<Rational> = Vec::new();
        let mut infinity = false;
        for p in points {
            match p {
                Point::Infinity if infinity => {
                    return Err(ConvError::InvalidPoints("infinity listed twice".into()))
                }
                Point::Infinity => infinity = true,
                Point::Finite(v) => {
                    if finite.contains(&v) {
                        return Err(ConvError::InvalidPoints(format!(
                            "duplicate point {}",
                            format_rational(&v)
                        )));
                    }
                    finite.push(v);
                }
            }
        }
        Ok(PointSet { finite, infinity })
    }

    /// Parses a comma-separated list such as `0,1,-1,1/2,inf`.
    pub fn parse(s: &str) -> Result<Self> {
        let points = s
            .split(',')
            .filter(|t| !t.trim().is_empty())
            .map(str::parse)
            .collect::<Result<Vec<Point>>>()?;
        PointSet::new(points)
    }

    pub fn finite(&self) -> &[Rational] {
        &self.finite
    }

    pub fn has_infinity(&self) -> bool {
        self.infinity
    }

    pub fn len(&self) -> usize {
        self.finite.len() + usize::from(self.infinity)
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

impl fmt::Display for PointSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut parts: Vec<String> = self.finite.iter().map(format_rational).collect();
        if self.infinity {
            parts.push("inf".into());
        }
        write!(f, "{{{}}}", parts.join(", "))
    }
}

/// The `k`-th entry of 0, 1, -1, 2, -2, 1/2, -1/2, 4, -4, 1/4, -1/4, 8, ...
fn default_point(k: usize) -> Rational {
    match k {
        0 => Rational::zero(),
        1 => Rational::one(),
        2 => -Rational::one(),
        _ => {
            // Groups of four after the first three: ±2^e, ±2^-e.
            let j = k - 3;
            let e = (j / 4 + 1) as u32;
            let p = 1i64 << e;
            match j % 4 {
                0 => rat(p, 1),
                1 => rat(-p, 1),
                2 => rat(1, p),
                _ => rat(-1, p),
            }
        }
    }
}

/// `m + r - 2` small, reciprocal-paired finite points plus infinity.
pub fn default_points(m: usize, r: usize) -> PointSet {
    let alpha = m + r - 1;
    PointSet {
        finite: (0..alpha.saturating_sub(1)).map(default_point).collect(),
        infinity: true,
    }
}

/// Coefficients (lowest degree first) of `∏ (x - root)`.
fn poly_from_roots<'a>(roots: impl Iterator<Item = &'a Rational>) -> Vec<Rational> {
    let mut coeffs = vec![Rational::one()];
    for root in roots {
        let mut next = vec![Rational::zero(); coeffs.len() + 1];
        for (k, c) in coeffs.iter().enumerate() {
            next[k + 1] += c.clone();
            next[k] -= c.clone() * root.clone();
        }
        coeffs = next;
    }
    coeffs
}

fn power(x: &Rational, e: usize) -> Rational {
    (0..e).fold(Rational::one(), |acc, _| acc * x.clone())
}

/// Builds `F(m, r)` from the given evaluation points.
pub fn generate(m: usize, r: usize, points: &PointSet) -> Result<WinogradAlgorithm> {
    if m == 0 || r == 0 {
        return Err(ConvError::InvalidConfig("F(m, r) needs m, r >= 1".into()));
    }
    let alpha = m + r - 1;
    if points.len() != alpha {
        return Err(ConvError::InvalidPoints(format!(
            "F({m},{r}) needs {alpha} points, got {}",
            points.len()
        )));
    }
    let a = points.finite();
    let n = a.len();

    let mut bt = Matrix::zeros(alpha, alpha);
    let mut g = Matrix::zeros(alpha, r);
    let mut at = Matrix::zeros(m, alpha);

    for i in 0..n {
        let numerator = poly_from_roots(a.iter().enumerate().filter(|&(j, _)| j != i).map(|(_, v)| v));
        let denom = a
            .iter()
            .enumerate()
            .filter(|&(j, _)| j != i)
            .fold(Rational::one(), |acc, (_, aj)| acc * (a[i].clone() - aj.clone()));
        for (k, c) in numerator.into_iter().enumerate() {
            bt.set(i, k, c);
        }
        for k in 0..r {
            g.set(i, k, power(&a[i], k) / denom.clone());
        }
        for j in 0..m {
            at.set(j, i, power(&a[i], j));
        }
    }
    if points.has_infinity() {
        let row = n;
        for (k, c) in poly_from_roots(a.iter()).into_iter().enumerate() {
            bt.set(row, k, c);
        }
        g.set(row, r - 1, Rational::one());
        at.set(m - 1, row, Rational::one());
    }
    WinogradAlgorithm::new(m, r, bt, g, at)
}

/// Largest absolute entry over `Bᵀ`, `G`, and `Aᵀ`.
pub fn max_transform_magnitude(alg: &WinogradAlgorithm) -> Rational {
    [alg.bt().max_abs(), alg.g().max_abs(), alg.at().max_abs()]
        .into_iter()
        .max()
        .unwrap_or_else(Rational::zero)
}

/// Checks the exactness property on `trials` random rational 1-d and 2-d
/// cases. Returns the first counterexample as an error message.
pub fn verify_exact<R: rand::Rng + ?Sized>(
    alg: &WinogradAlgorithm,
    trials: usize,
    rng: &mut R,
) -> std::result::Result<(), String> {
    let t = alg.exact();
    let nested = Nested2d::square(t.clone());
    let (a, r) = (alg.alpha(), alg.r());
    for trial in 0..trials {
        let d: Vec<Rational> = (0..a).map(|_| random_rational(rng)).collect();
        let g: Vec<Rational> = (0..r).map(|_| random_rational(rng)).collect();
        let got = t.filter_tile_1d(&d, &g).map_err(|e| e.to_string())?;
        if got != fir_valid(&d, &g) {
            return Err(format!("1-d mismatch on trial {trial}"));
        }
        let d2 = crate::oracle::random_rational_matrix(rng, a, a);
        let g2 = crate::oracle::random_rational_matrix(rng, r, r);
        let got = nested.filter_tile_2d(&d2, &g2).map_err(|e| e.to_string())?;
        if got != crate::oracle::correlate_valid_2d(&d2, &g2) {
            return Err(format!("2-d mismatch on trial {trial}"));
        }
    }
    Ok(())
}

/// Human-readable dump of an algorithm's transforms.
pub fn describe(alg: &WinogradAlgorithm, points: Option<&PointSet>) -> String {
    let mut s = format!("F({},{})  alpha = {}\n", alg.m(), alg.r(), alg.alpha());
    if let Some(p) = points {
        s += &format!("points: {p}\n");
    }
    s += &format!("BT ({0}x{0}):\n{1}", alg.alpha(), alg.bt().to_text());
    s += &format!("G ({}x{}):\n{}", alg.alpha(), alg.r(), alg.g().to_text());
    s += &format!("AT ({}x{}):\n{}", alg.m(), alg.alpha(), alg.at().to_text());
    s += &format!("max |entry|: {}\n", format_rational(&max_transform_magnitude(alg)));
    s += &format!(
        "multiplies: 1D {} (direct {}), 2D {} (direct {})\n",
        alg.alpha(),
        alg.m() * alg.r(),
        alg.alpha() * alg.alpha(),
        alg.m() * alg.m() * alg.r() * alg.r()
    );
    s
}

/// True when `|x| > |y|` for rationals.
pub fn magnitude_exceeds(x: &Rational, y: &Rational) -> bool {
    x.abs() > y.abs()
}
