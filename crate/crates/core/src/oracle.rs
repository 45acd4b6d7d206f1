//! Brute-force ground truth for univariate polynomials: global minima and
//! root counts on an interval.
//!
//! Every finite double is an exact dyadic rational, so the default path
//! converts coefficients exactly to integers and works with Sturm
//! sequences built from primitive pseudo-remainders. A companion-matrix
//! eigenvalue path is kept for cross-checks and for callers that opt out of
//! exact arithmetic.

use nalgebra::DMatrix;
use num_bigint::{BigInt, Sign};
use num_integer::Integer;
use num_rational::BigRational;
use num_traits::{One, Signed, Zero};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{to_f64, to_rational};
use crate::poly::{Interval, SparsePoly};

/// Width to which critical points and roots are refined.
pub const REFINE_WIDTH: f64 = 1e-12;

/// Where the infimum is attained.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "t", rename_all = "snake_case")]
pub enum Argmin {
    Interior(f64),
    Endpoint(f64),
    /// Unbounded below as `t → +∞`.
    PlusInfinity,
    /// Unbounded below as `t → -∞`.
    MinusInfinity,
    /// Constant polynomial.
    Anywhere,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OracleResult {
    /// `-∞` when unbounded below.
    pub min_value: f64,
    pub argmin: Argmin,
    /// Roots of `f` in the interval with multiplicities.
    pub roots: Vec<(f64, u32)>,
}

/// Integer polynomial, ascending coefficients, no trailing zeros.
#[derive(Debug, Clone, PartialEq)]
pub(crate) struct IntPoly(Vec<BigInt>);

impl IntPoly {
    fn trimmed(mut v: Vec<BigInt>) -> Self {
        while v.last().is_some_and(|c| c.is_zero()) {
            v.pop();
        }
        IntPoly(v)
    }

    /// Exact integer multiple of `f` (positive factor), made primitive.
    pub(crate) fn from_sparse(f: &SparsePoly) -> Self {
        let dense = f.dense(0);
        let rats: Vec<BigRational> = dense.iter().map(|&c| to_rational(c)).collect();
        Self::from_rationals(&rats)
    }

    /// Ascending rational coefficients cleared of denominators.
    pub(crate) fn from_rationals(rats: &[BigRational]) -> Self {
        let lcm = rats
            .iter()
            .fold(BigInt::one(), |acc, r| acc.lcm(r.denom()));
        let ints = rats
            .iter()
            .map(|r| (r * BigRational::from_integer(lcm.clone())).to_integer())
            .collect();
        IntPoly::trimmed(ints).primitive()
    }

    fn is_zero(&self) -> bool {
        self.0.is_empty()
    }

    fn degree(&self) -> usize {
        self.0.len().saturating_sub(1)
    }

    fn lc(&self) -> &BigInt {
        self.0.last().expect("nonzero polynomial")
    }

    fn content(&self) -> BigInt {
        self.0.iter().fold(BigInt::zero(), |g, c| g.gcd(c))
    }

    /// Divides by the (positive) content.
    fn primitive(self) -> Self {
        if self.is_zero() {
            return self;
        }
        let g = self.content();
        if g.is_one() {
            return self;
        }
        IntPoly(self.0.into_iter().map(|c| c / &g).collect())
    }

    fn normalized(self) -> Self {
        let p = self.primitive();
        if !p.is_zero() && p.lc().is_negative() {
            IntPoly(p.0.into_iter().map(|c| -c).collect())
        } else {
            p
        }
    }

    fn derivative(&self) -> Self {
        IntPoly::trimmed(
            self.0
                .iter()
                .enumerate()
                .skip(1)
                .map(|(i, c)| c * BigInt::from(i))
                .collect(),
        )
    }

    /// Pseudo-division: `lc(b)^{δ+1} a = q b + r`.
    fn pseudo_divide(&self, b: &IntPoly) -> (IntPoly, IntPoly) {
        let db = b.degree();
        let lb = b.lc().clone();
        let mut r = self.0.clone();
        if self.is_zero() || self.degree() < db {
            return (IntPoly(vec![]), self.clone());
        }
        let delta = self.degree() - db;
        let mut q = vec![BigInt::zero(); delta + 1];
        for k in (0..=delta).rev() {
            let coef = r[k + db].clone();
            for c in q.iter_mut() {
                *c *= &lb;
            }
            q[k] += &coef;
            for c in r.iter_mut() {
                *c *= &lb;
            }
            for (j, bj) in b.0.iter().enumerate() {
                r[k + j] -= &coef * bj;
            }
        }
        r.truncate(db);
        (IntPoly::trimmed(q), IntPoly::trimmed(r))
    }

    fn gcd(&self, other: &IntPoly) -> IntPoly {
        let (mut a, mut b) = (self.clone().normalized(), other.clone().normalized());
        if a.degree() < b.degree() {
            std::mem::swap(&mut a, &mut b);
        }
        while !b.is_zero() {
            let (_, r) = a.pseudo_divide(&b);
            a = b;
            b = r.normalized();
        }
        a.normalized()
    }

    /// Quotient of an exact division over the rationals, made primitive.
    fn div_exact(&self, b: &IntPoly) -> IntPoly {
        self.pseudo_divide(b).0.normalized()
    }

    /// Sign of `self(p/q)` for `q > 0`.
    fn sign_at(&self, x: &BigRational) -> Sign {
        if self.is_zero() {
            return Sign::NoSign;
        }
        let (p, q) = (x.numer(), x.denom());
        let mut acc = self.lc().clone();
        let mut qpow = BigInt::one();
        for c in self.0.iter().rev().skip(1) {
            qpow *= q;
            acc = acc * p + c * &qpow;
        }
        acc.sign()
    }

    /// `1 + max |a_i / a_n|`, an upper bound on root magnitudes.
    fn cauchy_bound(&self) -> BigRational {
        let lc = self.lc().abs();
        let max = self.0.iter().map(|c| c.abs()).max().unwrap_or_default();
        BigRational::one() + BigRational::new(max, lc)
    }

    /// Square-free decomposition `self = c Π g_i^i` from the chain
    /// `A_0 = f`, `A_{i+1} = gcd(A_i, A_i')`; returned as `(i, g_i)` with
    /// nonconstant `g_i`. Only gcds and exact divisions are used, so the
    /// arbitrary scale of each primitive factor does not matter.
    fn square_free_factors(&self) -> Vec<(u32, IntPoly)> {
        let mut chain = vec![self.clone().normalized()];
        while chain.last().unwrap().degree() > 0 {
            let a = chain.last().unwrap();
            chain.push(a.gcd(&a.derivative()));
        }
        // b_i = A_{i-1} / A_i collects the factors of multiplicity >= i
        let b: Vec<IntPoly> = chain.windows(2).map(|w| w[0].div_exact(&w[1])).collect();
        let mut out = Vec::new();
        for i in 0..b.len() {
            let g = match b.get(i + 1) {
                Some(next) => b[i].div_exact(next),
                None => b[i].clone(),
            };
            if g.degree() > 0 {
                out.push((i as u32 + 1, g));
            }
        }
        out
    }

    fn square_free_part(&self) -> IntPoly {
        let d = self.derivative();
        if d.is_zero() {
            return self.clone().normalized();
        }
        self.div_exact(&self.gcd(&d))
    }
}

/// Sturm sequence of a square-free polynomial.
struct Sturm(Vec<IntPoly>);

impl Sturm {
    fn new(g: &IntPoly) -> Self {
        let mut seq = vec![g.clone(), g.derivative().primitive()];
        loop {
            let n = seq.len();
            if seq[n - 1].is_zero() {
                seq.pop();
                break;
            }
            let (_, r) = seq[n - 2].pseudo_divide(&seq[n - 1]);
            if r.is_zero() {
                break;
            }
            let delta = seq[n - 2].degree() - seq[n - 1].degree();
            let lc_neg = seq[n - 1].lc().is_negative() && (delta + 1) % 2 == 1;
            // s_{n} = -rem with the pseudo-division factor's sign removed.
            let r = r.primitive();
            let next = if lc_neg { r } else { IntPoly(r.0.into_iter().map(|c| -c).collect()) };
            seq.push(next);
        }
        Sturm(seq)
    }

    fn variations(signs: impl Iterator<Item = Sign>) -> usize {
        let mut count = 0;
        let mut prev = Sign::NoSign;
        for s in signs {
            if s == Sign::NoSign {
                continue;
            }
            if prev != Sign::NoSign && s != prev {
                count += 1;
            }
            prev = s;
        }
        count
    }

    fn var_at(&self, x: &BigRational) -> usize {
        Self::variations(self.0.iter().map(|p| p.sign_at(x)))
    }

    /// Distinct roots in `(lo, hi]`.
    fn count(&self, lo: &BigRational, hi: &BigRational) -> usize {
        self.var_at(lo).saturating_sub(self.var_at(hi))
    }
}

/// Closed search window `[lo, hi]` for the roots of `g` in the interval.
fn window(g: &IntPoly, iv: &Interval) -> (BigRational, BigRational) {
    let b = g.cauchy_bound();
    let (lo, hi) = iv.bounds();
    let lo = lo.map_or(-b.clone(), to_rational);
    let hi = hi.map_or(b, to_rational);
    (lo, hi)
}

/// Isolates and refines the distinct roots of square-free `g` in `[lo, hi]`.
fn isolate(g: &IntPoly, lo: &BigRational, hi: &BigRational) -> Vec<f64> {
    if g.degree() == 0 || lo > hi {
        return Vec::new();
    }
    let sturm = Sturm::new(g);
    let mut roots = Vec::new();
    if g.sign_at(lo).is_zero_sign() {
        roots.push(to_f64(lo));
    }
    let two = BigRational::from_integer(BigInt::from(2));
    let width = to_rational(REFINE_WIDTH);
    let mut stack = vec![(lo.clone(), hi.clone())];
    while let Some((a, b)) = stack.pop() {
        let n = sturm.count(&a, &b);
        if n == 0 {
            continue;
        }
        if n == 1 {
            roots.push(refine(g, &sturm, a, b, &width));
            continue;
        }
        let mid = (&a + &b) / &two;
        stack.push((mid.clone(), b));
        stack.push((a, mid));
    }
    roots.sort_by(f64::total_cmp);
    roots
}

/// Refines the single root of `g` in `(a, b]`.
fn refine(g: &IntPoly, sturm: &Sturm, mut a: BigRational, mut b: BigRational, width: &BigRational) -> f64 {
    let two = BigRational::from_integer(BigInt::from(2));
    if g.sign_at(&b).is_zero_sign() {
        return to_f64(&b);
    }
    for _ in 0..400 {
        if &b - &a <= *width {
            break;
        }
        let mid = (&a + &b) / &two;
        let sm = g.sign_at(&mid);
        if sm == Sign::NoSign {
            return to_f64(&mid);
        }
        let sb = g.sign_at(&b);
        let sa = g.sign_at(&a);
        if sa != Sign::NoSign && sa != sb {
            // simple root: sign change brackets it
            if sm == sb {
                b = mid;
            } else {
                a = mid;
            }
        } else if sturm.count(&a, &mid) == 1 {
            b = mid;
        } else {
            a = mid;
        }
    }
    to_f64(&((&a + &b) / &two))
}

trait ZeroSign {
    fn is_zero_sign(&self) -> bool;
}

impl ZeroSign for Sign {
    fn is_zero_sign(&self) -> bool {
        *self == Sign::NoSign
    }
}

/// Roots of `f` in the interval with multiplicities, by exact Sturm
/// sequences on the square-free factors.
pub fn roots_in(f: &SparsePoly, iv: &Interval) -> Result<Vec<(f64, u32)>> {
    if f.is_zero() {
        return Err(Error::ZeroPolynomial);
    }
    iv.validate()?;
    let p = IntPoly::from_sparse(f);
    let mut out = Vec::new();
    for (mult, g) in p.square_free_factors() {
        let (lo, hi) = window(&g, iv);
        for r in isolate(&g, &lo, &hi) {
            out.push((r, mult));
        }
    }
    out.sort_by(|a, b| a.0.total_cmp(&b.0));
    Ok(out)
}

/// Number of roots of `f` in the interval, counted with multiplicity.
pub fn count_roots(f: &SparsePoly, iv: &Interval) -> Result<u32> {
    if f.is_zero() {
        return Err(Error::ZeroPolynomial);
    }
    iv.validate()?;
    Ok(count_int_roots(&IntPoly::from_sparse(f), iv))
}

/// [`count_roots`] for exact ascending rational coefficients.
pub fn count_roots_rational(coeffs: &[BigRational], iv: &Interval) -> Result<u32> {
    let p = IntPoly::from_rationals(coeffs);
    if p.is_zero() {
        return Err(Error::ZeroPolynomial);
    }
    iv.validate()?;
    Ok(count_int_roots(&p, iv))
}

fn count_int_roots(p: &IntPoly, iv: &Interval) -> u32 {
    let mut total = 0u32;
    for (mult, g) in p.square_free_factors() {
        let (lo, hi) = window(&g, iv);
        if lo > hi {
            continue;
        }
        let sturm = Sturm::new(&g);
        let mut n = sturm.count(&lo, &hi);
        if g.sign_at(&lo).is_zero_sign() {
            n += 1;
        }
        total += mult * n as u32;
    }
    total
}

fn unbounded_direction(f: &SparsePoly, iv: &Interval) -> Option<Argmin> {
    if f.degree() == 0 {
        return None;
    }
    let lc = f.leading_coefficient();
    let (lo, hi) = iv.bounds();
    if hi.is_none() && lc < 0.0 {
        return Some(Argmin::PlusInfinity);
    }
    if lo.is_none() {
        let odd = f.degree() % 2 == 1;
        // sign at -∞ is lc * (-1)^deg
        if (lc < 0.0) != odd {
            return Some(Argmin::MinusInfinity);
        }
    }
    None
}

/// Infimum of `f` over the interval.
pub fn global_min(f: &SparsePoly, iv: &Interval) -> Result<OracleResult> {
    if f.is_zero() {
        return Err(Error::ZeroPolynomial);
    }
    iv.validate()?;
    let roots = roots_in(f, iv)?;
    if f.degree() == 0 {
        return Ok(OracleResult {
            min_value: f.coeff(0),
            argmin: Argmin::Anywhere,
            roots,
        });
    }
    if let Some(dir) = unbounded_direction(f, iv) {
        return Ok(OracleResult {
            min_value: f64::NEG_INFINITY,
            argmin: dir,
            roots,
        });
    }
    let df = IntPoly::from_sparse(&f.derivative());
    let crit = if df.degree() == 0 {
        Vec::new()
    } else {
        let g = df.square_free_part();
        let (lo, hi) = window(&g, iv);
        isolate(&g, &lo, &hi)
    };
    Ok(pick_min(f, iv, crit, roots))
}

fn pick_min(f: &SparsePoly, iv: &Interval, crit: Vec<f64>, roots: Vec<(f64, u32)>) -> OracleResult {
    let (lo, hi) = iv.bounds();
    let mut best = (f64::INFINITY, Argmin::Anywhere);
    for t in [lo, hi].into_iter().flatten() {
        let v = f.eval(t);
        if v < best.0 {
            best = (v, Argmin::Endpoint(t));
        }
    }
    for t in crit {
        if !iv.contains(t) {
            continue;
        }
        let v = f.eval(t);
        if v < best.0 {
            let at_end = lo == Some(t) || hi == Some(t);
            best = (v, if at_end { Argmin::Endpoint(t) } else { Argmin::Interior(t) });
        }
    }
    OracleResult {
        min_value: best.0,
        argmin: best.1,
        roots,
    }
}

fn companion_eigenvalues(f: &SparsePoly) -> Result<Vec<(f64, f64)>> {
    if f.is_zero() {
        return Err(Error::ZeroPolynomial);
    }
    let d = f.degree() as usize;
    if d == 0 {
        return Ok(Vec::new());
    }
    let c = f.dense(d + 1);
    let lc = c[d];
    let m = DMatrix::from_fn(d, d, |i, j| {
        if j == d - 1 {
            -c[i] / lc
        } else if i == j + 1 {
            1.0
        } else {
            0.0
        }
    });
    Ok(m.complex_eigenvalues().iter().map(|z| (z.re, z.im)).collect())
}

/// Real eigenvalues of the companion matrix of `f`.
pub fn companion_real_roots(f: &SparsePoly) -> Result<Vec<f64>> {
    let mut roots: Vec<f64> = companion_eigenvalues(f)?
        .into_iter()
        .filter(|z| z.1.abs() <= 1e-7 * (1.0 + z.0.abs()))
        .map(|z| z.0)
        .collect();
    roots.sort_by(f64::total_cmp);
    Ok(roots)
}

/// Real roots with multiplicity from companion eigenvalues grouped by
/// single linkage at distance `cluster_tol · (1 + |z|)`. A multiple root
/// splits into a small ring of eigenvalues whose centroid is real.
pub fn companion_root_clusters(f: &SparsePoly, cluster_tol: f64) -> Result<Vec<(f64, u32)>> {
    let z = companion_eigenvalues(f)?;
    let n = z.len();
    let mut label: Vec<usize> = (0..n).collect();
    fn find(label: &mut [usize], mut i: usize) -> usize {
        while label[i] != i {
            label[i] = label[label[i]];
            i = label[i];
        }
        i
    }
    for i in 0..n {
        for j in i + 1..n {
            let dist = (z[i].0 - z[j].0).hypot(z[i].1 - z[j].1);
            let scale = 1.0 + z[i].0.hypot(z[i].1);
            if dist <= cluster_tol * scale {
                let (a, b) = (find(&mut label, i), find(&mut label, j));
                label[a] = b;
            }
        }
    }
    let mut groups: std::collections::BTreeMap<usize, (f64, f64, u32)> = Default::default();
    for i in 0..n {
        let g = groups.entry(find(&mut label, i)).or_default();
        g.0 += z[i].0;
        g.1 += z[i].1;
        g.2 += 1;
    }
    let mut roots: Vec<(f64, u32)> = groups
        .into_values()
        .map(|(re, im, m)| (re / m as f64, im / m as f64, m))
        .filter(|&(re, im, _)| im.abs() <= cluster_tol * (1.0 + re.abs()))
        .map(|(re, _, m)| (re, m))
        .collect();
    roots.sort_by(|a, b| a.0.total_cmp(&b.0));
    Ok(roots)
}

/// Root count with multiplicity from clustered companion eigenvalues.
pub fn count_roots_numeric(f: &SparsePoly, iv: &Interval, cluster_tol: f64) -> Result<u32> {
    Ok(companion_root_clusters(f, cluster_tol)?
        .into_iter()
        .filter(|&(r, _)| iv.contains(r) || near_end(iv, r, cluster_tol))
        .map(|(_, m)| m)
        .sum())
}

fn near_end(iv: &Interval, r: f64, tol: f64) -> bool {
    let (lo, hi) = iv.bounds();
    lo.is_some_and(|l| (r - l).abs() <= tol) || hi.is_some_and(|h| (r - h).abs() <= tol)
}

/// Float-only infimum from companion-matrix critical points, accurate to
/// about `1e-10` relative for well-conditioned inputs.
pub fn global_min_numeric(f: &SparsePoly, iv: &Interval) -> Result<OracleResult> {
    if f.is_zero() {
        return Err(Error::ZeroPolynomial);
    }
    iv.validate()?;
    if f.degree() == 0 {
        return Ok(OracleResult {
            min_value: f.coeff(0),
            argmin: Argmin::Anywhere,
            roots: Vec::new(),
        });
    }
    if let Some(dir) = unbounded_direction(f, iv) {
        return Ok(OracleResult {
            min_value: f64::NEG_INFINITY,
            argmin: dir,
            roots: Vec::new(),
        });
    }
    let crit = companion_real_roots(&f.derivative())?;
    Ok(pick_min(f, iv, crit, Vec::new()))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn p(terms: &[(u32, f64)]) -> SparsePoly {
        SparsePoly::from_terms(terms.iter().copied()).unwrap()
    }

    fn paper_quartic() -> SparsePoly {
        p(&[(4, 3.0), (3, -4.0), (0, 1.0)])
    }

    #[test]
    fn global_min_examples() {
        let r = global_min(&p(&[(2, 1.0), (1, -2.0), (0, 3.0)]), &Interval::HalfLine).unwrap();
        assert!((r.min_value - 2.0).abs() < 1e-12);
        match r.argmin {
            Argmin::Interior(t) => assert!((t - 1.0).abs() < 1e-11),
            other => panic!("unexpected argmin {other:?}"),
        }

        let r = global_min(&paper_quartic(), &Interval::FullLine).unwrap();
        assert!(r.min_value.abs() < 1e-12);

        let r = global_min(&p(&[(1, 1.0)]), &Interval::FullLine).unwrap();
        assert_eq!(r.min_value, f64::NEG_INFINITY);
        assert_eq!(r.argmin, Argmin::MinusInfinity);
    }

    #[test]
    fn global_min_at_endpoint() {
        let r = global_min(&p(&[(1, 1.0)]), &Interval::HalfLine).unwrap();
        assert_eq!((r.min_value, r.argmin), (0.0, Argmin::Endpoint(0.0)));
        let r = global_min(&p(&[(1, -1.0)]), &Interval::UnitInterval).unwrap();
        assert_eq!((r.min_value, r.argmin), (-1.0, Argmin::Endpoint(1.0)));
        let r = global_min(&p(&[(1, -1.0)]), &Interval::HalfLine).unwrap();
        assert_eq!(r.argmin, Argmin::PlusInfinity);
    }

    #[test]
    fn count_roots_examples() {
        let sq = p(&[(2, 1.0), (1, -2.0), (0, 1.0)]);
        assert_eq!(count_roots(&sq, &Interval::UnitInterval).unwrap(), 2);
        assert_eq!(count_roots(&paper_quartic(), &Interval::HalfLine).unwrap(), 2);
        assert_eq!(count_roots(&p(&[(2, 1.0), (0, 1.0)]), &Interval::FullLine).unwrap(), 0);
        assert!(count_roots(&SparsePoly::zero(), &Interval::FullLine).is_err());
    }

    #[test]
    fn roots_with_multiplicity_and_endpoints() {
        // t^2 (t-1)^3 (t+2)
        let f = &(&p(&[(2, 1.0)]) * &p(&[(1, 1.0), (0, -1.0)]).pow(3)) * &p(&[(1, 1.0), (0, 2.0)]);
        let roots = roots_in(&f, &Interval::FullLine).unwrap();
        assert_eq!(roots.len(), 3);
        assert_eq!(roots[0].1, 1);
        assert!((roots[0].0 + 2.0).abs() < 1e-11);
        assert_eq!(roots[1], (0.0, 2));
        assert!((roots[2].0 - 1.0).abs() < 1e-11 && roots[2].1 == 3);
        assert_eq!(count_roots(&f, &Interval::HalfLine).unwrap(), 5);
        assert_eq!(count_roots(&f, &Interval::compact(0.5, 1.0).unwrap()).unwrap(), 3);
        assert_eq!(count_roots(&f, &Interval::right_half_line(1.5).unwrap()).unwrap(), 0);
    }

    #[test]
    fn companion_path_agrees_on_simple_case() {
        let f = &(&p(&[(1, 1.0), (0, -1.0)]) * &p(&[(1, 1.0), (0, -3.0)])) * &p(&[(1, 1.0), (0, 5.0)]);
        assert_eq!(count_roots_numeric(&f, &Interval::HalfLine, 1e-6).unwrap(), 2);
        let a = global_min_numeric(&f, &Interval::UnitInterval).unwrap();
        let b = global_min(&f, &Interval::UnitInterval).unwrap();
        assert!((a.min_value - b.min_value).abs() < 1e-10);
    }
}
