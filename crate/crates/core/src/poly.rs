//! Sparse univariate polynomials with real coefficients, and the intervals
//! on which nonnegativity is studied.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Coefficients with magnitude below this are dropped after arithmetic.
pub const DEFAULT_DROP_TOL: f64 = 1e-14;

/// A polynomial `Σ c_a t^a` stored as terms with strictly decreasing
/// exponents and no zero coefficients.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(try_from = "PolyJson", into = "PolyJson")]
pub struct SparsePoly {
    terms: Vec<(u32, f64)>,
}

#[derive(Serialize, Deserialize)]
struct TermJson {
    exp: u32,
    coef: f64,
}

#[derive(Serialize, Deserialize)]
struct PolyJson {
    terms: Vec<TermJson>,
}

impl TryFrom<PolyJson> for SparsePoly {
    type Error = Error;

    fn try_from(value: PolyJson) -> Result<Self> {
        SparsePoly::from_terms(value.terms.into_iter().map(|t| (t.exp, t.coef)))
    }
}

impl From<SparsePoly> for PolyJson {
    fn from(p: SparsePoly) -> Self {
        PolyJson {
            terms: p
                .terms
                .into_iter()
                .map(|(exp, coef)| TermJson { exp, coef })
                .collect(),
        }
    }
}

impl SparsePoly {
    pub fn zero() -> Self {
        SparsePoly { terms: Vec::new() }
    }

    pub fn monomial(exp: u32, coef: f64) -> Self {
        if coef == 0.0 {
            return Self::zero();
        }
        SparsePoly {
            terms: vec![(exp, coef)],
        }
    }

    pub fn constant(c: f64) -> Self {
        Self::monomial(0, c)
    }

    /// Builds a polynomial from `(exponent, coefficient)` pairs in any order.
    /// Exponents must be distinct; zero coefficients are discarded.
    pub fn from_terms<I: IntoIterator<Item = (u32, f64)>>(terms: I) -> Result<Self> {
        let mut map = BTreeMap::new();
        for (e, c) in terms {
            if !c.is_finite() {
                return Err(Error::NonFiniteCoefficient(e));
            }
            if map.insert(e, c).is_some() {
                return Err(Error::DuplicateExponent(e));
            }
        }
        Ok(Self::from_map(map, 0.0))
    }

    /// Builds from ascending dense coefficients `c[0] + c[1] t + ...`.
    pub fn from_dense(coeffs: &[f64]) -> Self {
        let map = coeffs
            .iter()
            .enumerate()
            .map(|(i, &c)| (i as u32, c))
            .collect();
        Self::from_map(map, 0.0)
    }

    fn from_map(map: BTreeMap<u32, f64>, tol: f64) -> Self {
        let terms = map
            .into_iter()
            .rev()
            .filter(|&(_, c)| c != 0.0 && c.abs() >= tol)
            .collect();
        SparsePoly { terms }
    }

    /// Terms in strictly decreasing exponent order.
    pub fn terms(&self) -> &[(u32, f64)] {
        &self.terms
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    /// Degree of the polynomial; `0` for the zero polynomial.
    pub fn degree(&self) -> u32 {
        self.terms.first().map_or(0, |t| t.0)
    }

    pub fn leading_coefficient(&self) -> f64 {
        self.terms.first().map_or(0.0, |t| t.1)
    }

    /// Exponents with nonzero coefficient, decreasing.
    pub fn support(&self) -> Vec<u32> {
        self.terms.iter().map(|t| t.0).collect()
    }

    /// Number of elements of `supp(f) ∪ {0}`.
    pub fn support_size_with_zero(&self) -> usize {
        let n = self.terms.len();
        if self.coeff(0) == 0.0 {
            n + 1
        } else {
            n
        }
    }

    pub fn coeff(&self, exp: u32) -> f64 {
        self.terms
            .iter()
            .find(|t| t.0 == exp)
            .map_or(0.0, |t| t.1)
    }

    /// Ascending dense coefficient vector of length `len` (at least degree + 1).
    pub fn dense(&self, len: usize) -> Vec<f64> {
        let mut out = vec![0.0; len.max(self.degree() as usize + 1)];
        for &(e, c) in &self.terms {
            out[e as usize] = c;
        }
        out
    }

    pub fn max_abs_coeff(&self) -> f64 {
        self.terms.iter().fold(0.0, |m, t| m.max(t.1.abs()))
    }

    /// `Σ c_a t^a` with `0^0 = 1`.
    pub fn eval(&self, t: f64) -> f64 {
        // Horner over the gaps between consecutive exponents.
        let mut acc = 0.0;
        let mut prev: Option<u32> = None;
        for &(e, c) in &self.terms {
            if let Some(p) = prev {
                acc *= powu(t, p - e);
            }
            acc += c;
            prev = Some(e);
        }
        if let Some(p) = prev {
            acc *= powu(t, p);
        }
        acc
    }

    /// Number of sign changes in the coefficient sequence; bounds the number
    /// of strictly positive roots counted with multiplicity.
    pub fn descartes_positive_root_bound(&self) -> Result<usize> {
        if self.is_zero() {
            return Err(Error::ZeroPolynomial);
        }
        Ok(self
            .terms
            .windows(2)
            .filter(|w| (w[0].1 > 0.0) != (w[1].1 > 0.0))
            .count())
    }

    /// Splits `p = t^w q` with `q(0) != 0`.
    pub fn factor_out_zero_root(&self) -> Result<(u32, SparsePoly)> {
        let w = self.terms.last().ok_or(Error::ZeroPolynomial)?.0;
        let q = SparsePoly {
            terms: self.terms.iter().map(|&(e, c)| (e - w, c)).collect(),
        };
        Ok((w, q))
    }

    pub fn scale(&self, s: f64) -> SparsePoly {
        if s == 0.0 {
            return Self::zero();
        }
        SparsePoly {
            terms: self.terms.iter().map(|&(e, c)| (e, c * s)).collect(),
        }
    }

    /// Multiplies by `t^s`.
    pub fn shift(&self, s: u32) -> SparsePoly {
        SparsePoly {
            terms: self.terms.iter().map(|&(e, c)| (e + s, c)).collect(),
        }
    }

    /// `p(-t)`.
    pub fn reflect(&self) -> SparsePoly {
        SparsePoly {
            terms: self
                .terms
                .iter()
                .map(|&(e, c)| (e, if e % 2 == 1 { -c } else { c }))
                .collect(),
        }
    }

    /// `p(α t)`.
    pub fn rescale_variable(&self, alpha: f64) -> SparsePoly {
        let map = self
            .terms
            .iter()
            .map(|&(e, c)| (e, c * powu(alpha, e)))
            .collect();
        Self::from_map(map, 0.0)
    }

    pub fn derivative(&self) -> SparsePoly {
        SparsePoly {
            terms: self
                .terms
                .iter()
                .filter(|t| t.0 > 0)
                .map(|&(e, c)| (e - 1, c * e as f64))
                .collect(),
        }
    }

    pub fn add_tol(&self, other: &SparsePoly, tol: f64) -> SparsePoly {
        let mut map: BTreeMap<u32, f64> = self.terms.iter().copied().collect();
        for &(e, c) in &other.terms {
            *map.entry(e).or_insert(0.0) += c;
        }
        Self::from_map(map, tol)
    }

    pub fn mul_tol(&self, other: &SparsePoly, tol: f64) -> SparsePoly {
        let mut map: BTreeMap<u32, f64> = BTreeMap::new();
        for &(e1, c1) in &self.terms {
            for &(e2, c2) in &other.terms {
                *map.entry(e1 + e2).or_insert(0.0) += c1 * c2;
            }
        }
        Self::from_map(map, tol)
    }

    /// Removes terms with `|c| < tol`.
    pub fn prune(&self, tol: f64) -> SparsePoly {
        SparsePoly {
            terms: self
                .terms
                .iter()
                .copied()
                .filter(|t| t.1.abs() >= tol)
                .collect(),
        }
    }

    pub fn pow(&self, n: u32) -> SparsePoly {
        let mut acc = SparsePoly::constant(1.0);
        for _ in 0..n {
            acc = &acc * self;
        }
        acc
    }

    /// Largest coefficient difference against `other`.
    pub fn max_abs_diff(&self, other: &SparsePoly) -> f64 {
        let diff = self.add_tol(&other.scale(-1.0), 0.0);
        diff.max_abs_coeff()
    }
}

/// `t^e` by repeated squaring, with `0^0 = 1`.
pub fn powu(t: f64, e: u32) -> f64 {
    if e <= i32::MAX as u32 {
        t.powi(e as i32)
    } else {
        t.powf(e as f64)
    }
}

impl std::ops::Add for &SparsePoly {
    type Output = SparsePoly;
    fn add(self, rhs: &SparsePoly) -> SparsePoly {
        self.add_tol(rhs, DEFAULT_DROP_TOL)
    }
}

impl std::ops::Sub for &SparsePoly {
    type Output = SparsePoly;
    fn sub(self, rhs: &SparsePoly) -> SparsePoly {
        self.add_tol(&rhs.scale(-1.0), DEFAULT_DROP_TOL)
    }
}

impl std::ops::Mul for &SparsePoly {
    type Output = SparsePoly;
    fn mul(self, rhs: &SparsePoly) -> SparsePoly {
        self.mul_tol(rhs, DEFAULT_DROP_TOL)
    }
}

impl std::ops::Neg for &SparsePoly {
    type Output = SparsePoly;
    fn neg(self) -> SparsePoly {
        self.scale(-1.0)
    }
}

impl fmt::Display for SparsePoly {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.is_zero() {
            return write!(f, "0");
        }
        for (i, &(e, c)) in self.terms.iter().enumerate() {
            let sign = if c < 0.0 { "-" } else { "+" };
            if i == 0 {
                if c < 0.0 {
                    write!(f, "-")?;
                }
            } else {
                write!(f, " {sign} ")?;
            }
            let a = c.abs();
            match e {
                0 => write!(f, "{a}")?,
                _ => {
                    if a != 1.0 {
                        write!(f, "{a}*")?;
                    }
                    if e == 1 {
                        write!(f, "t")?;
                    } else {
                        write!(f, "t^{e}")?;
                    }
                }
            }
        }
        Ok(())
    }
}

/// The set on which nonnegativity is required.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Interval {
    /// `[0, ∞)`
    HalfLine,
    /// `[0, 1]`
    UnitInterval,
    /// `[a, b]` with `0 <= a < b`
    Compact { a: f64, b: f64 },
    /// `[a, ∞)` with `a > 0`
    RightHalfLine { a: f64 },
    /// `(-∞, ∞)`
    FullLine,
}

impl Interval {
    pub fn compact(a: f64, b: f64) -> Result<Self> {
        let iv = Interval::Compact { a, b };
        iv.validate()?;
        Ok(iv)
    }

    pub fn right_half_line(a: f64) -> Result<Self> {
        let iv = Interval::RightHalfLine { a };
        iv.validate()?;
        Ok(iv)
    }

    pub fn validate(&self) -> Result<()> {
        match *self {
            Interval::Compact { a, b } => {
                if !(a.is_finite() && b.is_finite() && 0.0 <= a && a < b) {
                    return Err(Error::InvalidInterval(format!(
                        "compact interval needs 0 <= a < b, got [{a}, {b}]"
                    )));
                }
            }
            Interval::RightHalfLine { a } => {
                if !(a.is_finite() && a > 0.0) {
                    return Err(Error::InvalidInterval(format!(
                        "right half-line needs a > 0, got {a}"
                    )));
                }
            }
            _ => {}
        }
        Ok(())
    }

    /// Finite lower and upper ends, `None` for infinite ends.
    pub fn bounds(&self) -> (Option<f64>, Option<f64>) {
        match *self {
            Interval::HalfLine => (Some(0.0), None),
            Interval::UnitInterval => (Some(0.0), Some(1.0)),
            Interval::Compact { a, b } => (Some(a), Some(b)),
            Interval::RightHalfLine { a } => (Some(a), None),
            Interval::FullLine => (None, None),
        }
    }

    pub fn contains(&self, t: f64) -> bool {
        let (lo, hi) = self.bounds();
        lo.is_none_or(|l| t >= l) && hi.is_none_or(|h| t <= h)
    }

    pub fn is_compact(&self) -> bool {
        matches!(self, Interval::UnitInterval | Interval::Compact { .. })
    }
}

impl fmt::Display for Interval {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match *self {
            Interval::HalfLine => write!(f, "R+"),
            Interval::UnitInterval => write!(f, "[0,1]"),
            Interval::Compact { a, b } => write!(f, "[{a},{b}]"),
            Interval::RightHalfLine { a } => write!(f, "[{a},inf)"),
            Interval::FullLine => write!(f, "R"),
        }
    }
}

impl FromStr for Interval {
    type Err = Error;

    /// Accepts `R+`, `R`, `[0,1]`, `[a,b]` and `[a,inf)`.
    fn from_str(s: &str) -> Result<Self> {
        let s: String = s.chars().filter(|c| !c.is_whitespace()).collect();
        match s.as_str() {
            "R+" | "r+" | "halfline" => return Ok(Interval::HalfLine),
            "R" | "r" | "fullline" => return Ok(Interval::FullLine),
            "[0,1]" | "unit" => return Ok(Interval::UnitInterval),
            _ => {}
        }
        let bad = || Error::InvalidInterval(format!("cannot parse interval '{s}'"));
        let inner = s.strip_prefix('[').ok_or_else(bad)?;
        let (lo, hi) = inner.split_once(',').ok_or_else(bad)?;
        let a: f64 = lo.parse().map_err(|_| bad())?;
        if let Some(h) = hi.strip_suffix(')') {
            if h == "inf" || h == "+inf" {
                return if a == 0.0 {
                    Ok(Interval::HalfLine)
                } else {
                    Interval::right_half_line(a)
                };
            }
            return Err(bad());
        }
        let b: f64 = hi.strip_suffix(']').ok_or_else(bad)?.parse().map_err(|_| bad())?;
        Interval::compact(a, b)
    }
}
