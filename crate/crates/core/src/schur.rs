//! Schur polynomials, generalized (confluent) Vandermonde determinants and
//! their product decomposition.
//!
//! For a partition `μ = (m_0 > ... > m_n >= 0)` with `λ = μ - δ`,
//! the alternant `det(x_i^{m_j})` equals `v(x) s_λ(x)`. When points are
//! repeated, rows are replaced by derivatives and the determinant becomes
//! `c · v_b(y) · s_{λ,b}(y)`.

use std::collections::{BTreeMap, HashMap};

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Zero};

use crate::error::{Error, Result};
use crate::linalg::{det_exact, det_lu, factorial, falling_factorial, rational_pow, to_f64, to_rational};
use crate::poly::powu;

/// A weakly decreasing tuple of nonnegative integers.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Partition(Vec<u32>);

impl Partition {
    pub fn new(parts: Vec<u32>) -> Result<Self> {
        if parts.windows(2).any(|w| w[0] < w[1]) {
            return Err(Error::InvalidPartition(format!("{parts:?} is not weakly decreasing")));
        }
        Ok(Partition(parts))
    }

    /// `(n, n-1, ..., 0)`.
    pub fn delta(n: u32) -> Self {
        Partition((0..=n).rev().collect())
    }

    pub fn parts(&self) -> &[u32] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    /// `|λ|`.
    pub fn size(&self) -> u32 {
        self.0.iter().sum()
    }

    pub fn is_strict(&self) -> bool {
        self.0.windows(2).all(|w| w[0] > w[1])
    }

    /// Number of nonzero parts.
    pub fn length(&self) -> usize {
        self.0.iter().filter(|&&p| p > 0).count()
    }

    /// `λ = μ - δ` for a partition with distinct parts.
    pub fn minus_delta(&self) -> Result<Partition> {
        if !self.is_strict() {
            return Err(Error::InvalidPartition(format!("{:?} has repeated parts", self.0)));
        }
        let n = self.0.len();
        Ok(Partition(
            self.0
                .iter()
                .enumerate()
                .map(|(i, &m)| m - (n - 1 - i) as u32)
                .collect(),
        ))
    }

    /// `μ = λ + δ` for `δ` with as many entries as `self`.
    pub fn plus_delta(&self) -> Partition {
        let n = self.0.len();
        Partition(
            self.0
                .iter()
                .enumerate()
                .map(|(i, &l)| l + (n - 1 - i) as u32)
                .collect(),
        )
    }

    fn padded(&self, len: usize) -> Option<Vec<u32>> {
        if self.length() > len {
            return None;
        }
        let mut v: Vec<u32> = self.0.iter().copied().filter(|&p| p > 0).collect();
        v.resize(len, 0);
        Some(v)
    }
}

/// Multiplicities `(b_0, ..., b_r)`, each at least one.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MultiplicityVector(Vec<u32>);

impl MultiplicityVector {
    pub fn new(b: Vec<u32>) -> Result<Self> {
        if b.is_empty() || b.contains(&0) {
            return Err(Error::DimensionMismatch(format!(
                "multiplicities must be nonempty and positive, got {b:?}"
            )));
        }
        Ok(MultiplicityVector(b))
    }

    pub fn ones(len: usize) -> Self {
        MultiplicityVector(vec![1; len])
    }

    pub fn as_slice(&self) -> &[u32] {
        &self.0
    }

    pub fn total(&self) -> u32 {
        self.0.iter().sum()
    }

    /// `y` with each `y_i` repeated `b_i` times.
    pub fn expand<T: Clone>(&self, y: &[T]) -> Vec<T> {
        y.iter()
            .zip(&self.0)
            .flat_map(|(v, &b)| std::iter::repeat_n(v.clone(), b as usize))
            .collect()
    }
}

/// Size limits for dense monomial expansion.
#[derive(Debug, Clone, Copy)]
pub struct ExpansionBudget {
    pub max_size: u32,
    pub max_vars: usize,
}

impl Default for ExpansionBudget {
    fn default() -> Self {
        ExpansionBudget {
            max_size: 20,
            max_vars: 8,
        }
    }
}

/// A multivariate polynomial with integer coefficients, keyed by exponent
/// vectors.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Expansion {
    pub nvars: usize,
    pub terms: BTreeMap<Vec<u32>, i128>,
}

impl Expansion {
    pub fn eval(&self, x: &[f64]) -> f64 {
        self.terms
            .iter()
            .map(|(e, &c)| {
                c as f64 * e.iter().zip(x).map(|(&k, &xi)| powu(xi, k)).product::<f64>()
            })
            .sum()
    }

    pub fn coeff(&self, exps: &[u32]) -> i128 {
        self.terms.get(exps).copied().unwrap_or(0)
    }
}

// Packed monomials: 8 bits per variable, at most 8 variables.
type Packed = HashMap<u64, i128>;

fn pack(e: &[u32]) -> u64 {
    e.iter().enumerate().fold(0u64, |k, (i, &x)| k | ((x as u64) << (8 * i)))
}

fn unpack(k: u64, nvars: usize) -> Vec<u32> {
    (0..nvars).map(|i| ((k >> (8 * i)) & 0xff) as u32).collect()
}

fn complete_homogeneous(m: u32, nvars: usize) -> Packed {
    // All exponent vectors of total degree m.
    fn rec(var: usize, left: u32, nvars: usize, cur: &mut Vec<u32>, out: &mut Packed) {
        if var + 1 == nvars {
            cur.push(left);
            out.insert(pack(cur), 1);
            cur.pop();
            return;
        }
        for e in 0..=left {
            cur.push(e);
            rec(var + 1, left - e, nvars, cur, out);
            cur.pop();
        }
    }
    let mut out = Packed::new();
    rec(0, m, nvars, &mut Vec::new(), &mut out);
    out
}

fn packed_mul_add(acc: &mut Packed, a: &Packed, b: &Packed, sign: i128) {
    for (&ka, &ca) in a {
        for (&kb, &cb) in b {
            *acc.entry(ka + kb).or_insert(0) += sign * ca * cb;
        }
    }
}

/// Monomial expansion of `s_λ` in `nvars` variables by the Jacobi–Trudi
/// determinant `det(h_{λ_i - i + j})`.
pub fn schur_expand(lambda: &Partition, nvars: usize) -> Result<Expansion> {
    schur_expand_with_budget(lambda, nvars, ExpansionBudget::default())
}

pub fn schur_expand_with_budget(
    lambda: &Partition,
    nvars: usize,
    budget: ExpansionBudget,
) -> Result<Expansion> {
    let size = lambda.size();
    if size > budget.max_size || nvars > budget.max_vars.min(8) || nvars == 0 {
        return Err(Error::BudgetExceeded {
            size: size as usize,
            nvars,
        });
    }
    let Some(_) = lambda.padded(nvars) else {
        return Ok(Expansion {
            nvars,
            terms: BTreeMap::new(),
        });
    };
    let parts: Vec<i64> = lambda.0.iter().filter(|&&p| p > 0).map(|&p| p as i64).collect();
    let ell = parts.len();
    if ell == 0 {
        let mut terms = BTreeMap::new();
        terms.insert(vec![0; nvars], 1);
        return Ok(Expansion { nvars, terms });
    }

    let mut h_cache: HashMap<u32, Packed> = HashMap::new();
    let mut entry = |i: usize, j: usize| -> Option<Packed> {
        let m = parts[i] - i as i64 + j as i64;
        if m < 0 {
            return None;
        }
        Some(
            h_cache
                .entry(m as u32)
                .or_insert_with(|| complete_homogeneous(m as u32, nvars))
                .clone(),
        )
    };

    // dp[mask]: determinant of rows 0..popcount(mask) restricted to the
    // columns in mask.
    let full = (1usize << ell) - 1;
    let mut dp: Vec<Option<Packed>> = vec![None; full + 1];
    let mut unit = Packed::new();
    unit.insert(0, 1);
    dp[0] = Some(unit);
    for mask in 1..=full {
        let r = mask.count_ones() as usize - 1;
        let mut acc = Packed::new();
        for j in 0..ell {
            if mask & (1 << j) == 0 {
                continue;
            }
            let rest = mask & !(1 << j);
            let Some(minor) = dp[rest].as_ref() else { continue };
            let Some(a) = entry(r, j) else { continue };
            let greater = (mask >> (j + 1)).count_ones();
            let sign = if greater % 2 == 0 { 1 } else { -1 };
            packed_mul_add(&mut acc, &a, minor, sign);
        }
        acc.retain(|_, c| *c != 0);
        dp[mask] = Some(acc);
    }
    let det = dp[full].take().unwrap_or_default();
    let terms = det
        .into_iter()
        .filter(|&(_, c)| c != 0)
        .map(|(k, c)| (unpack(k, nvars), c))
        .collect();
    Ok(Expansion { nvars, terms })
}

/// `h_0 .. h_max` of the given points, exactly.
fn complete_homogeneous_values(x: &[BigRational], max: usize) -> Vec<BigRational> {
    let mut h = vec![BigRational::zero(); max + 1];
    h[0] = BigRational::one();
    for xi in x {
        for k in 1..=max {
            let prev = &h[k - 1] * xi;
            h[k] += prev;
        }
    }
    h
}

/// Exact `s_λ(x)` via Jacobi–Trudi over the rationals; valid for any
/// (possibly repeated) points.
pub fn schur_eval_exact(lambda: &Partition, x: &[BigRational]) -> BigRational {
    let Some(_) = lambda.padded(x.len()) else {
        return BigRational::zero();
    };
    let parts: Vec<i64> = lambda.0.iter().filter(|&&p| p > 0).map(|&p| p as i64).collect();
    let ell = parts.len();
    if ell == 0 {
        return BigRational::one();
    }
    let max = (parts[0] + ell as i64) as usize;
    let h = complete_homogeneous_values(x, max);
    let rows: Vec<Vec<BigRational>> = (0..ell)
        .map(|i| {
            (0..ell)
                .map(|j| {
                    let m = parts[i] - i as i64 + j as i64;
                    if m < 0 {
                        BigRational::zero()
                    } else {
                        h[m as usize].clone()
                    }
                })
                .collect()
        })
        .collect();
    det_exact(&rows)
}

/// Relative gap below which points are treated as coincident.
pub const COINCIDENCE_TOL: f64 = 1e-6;

/// `s_λ(x)`. Uses the bialternant ratio for well-separated points and the
/// monomial expansion (or exact Jacobi–Trudi, past the expansion budget)
/// when points nearly coincide.
pub fn schur_eval(lambda: &Partition, x: &[f64]) -> f64 {
    let n = x.len();
    let Some(padded) = lambda.padded(n) else {
        return 0.0;
    };
    if padded.iter().all(|&p| p == 0) {
        return 1.0;
    }
    let scale = x.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let mut min_gap = f64::INFINITY;
    for i in 0..n {
        for j in i + 1..n {
            min_gap = min_gap.min((x[i] - x[j]).abs());
        }
    }
    if min_gap < COINCIDENCE_TOL * scale || scale == 0.0 {
        let lam = Partition(padded);
        return match schur_expand(&lam, n) {
            Ok(e) => e.eval(x),
            Err(_) => {
                let xr: Vec<BigRational> = x.iter().map(|&v| to_rational(v)).collect();
                to_f64(&schur_eval_exact(&lam, &xr))
            }
        };
    }
    let mu = Partition(padded).plus_delta();
    let rows: Vec<Vec<f64>> = x
        .iter()
        .map(|&xi| mu.0.iter().map(|&m| powu(xi, m)).collect())
        .collect();
    let num = det_lu(&rows);
    let mut vand = 1.0;
    for i in 0..n {
        for j in i + 1..n {
            vand *= x[i] - x[j];
        }
    }
    num / vand
}

fn check_confluent_dims(mu: &Partition, b: &MultiplicityVector, ylen: usize) -> Result<()> {
    if !mu.is_strict() {
        return Err(Error::InvalidPartition(format!("{:?} must have distinct parts", mu.0)));
    }
    if b.total() as usize != mu.len() {
        return Err(Error::DimensionMismatch(format!(
            "sum of multiplicities {} differs from number of parts {}",
            b.total(),
            mu.len()
        )));
    }
    if b.as_slice().len() != ylen {
        return Err(Error::DimensionMismatch(format!(
            "{} points for {} multiplicities",
            ylen,
            b.as_slice().len()
        )));
    }
    Ok(())
}

/// Row `p^{(j)}(y)` with `p_c(t) = t^{m_c}`, exactly.
pub fn derivative_row(mu: &[u32], j: u32, y: &BigRational) -> Vec<BigRational> {
    mu.iter()
        .map(|&m| {
            let ff = falling_factorial(m, j);
            if ff.is_zero() {
                BigRational::zero()
            } else {
                BigRational::from_integer(ff) * rational_pow(y, m - j)
            }
        })
        .collect()
}

/// The confluent alternant matrix with row groups `p^{(j)}(y_i)`,
/// `j < b_i`.
pub fn confluent_matrix(mu: &Partition, b: &MultiplicityVector, y: &[f64]) -> Result<Vec<Vec<BigRational>>> {
    check_confluent_dims(mu, b, y.len())?;
    let mut rows = Vec::with_capacity(mu.len());
    for (&yi, &bi) in y.iter().zip(b.as_slice()) {
        let yr = to_rational(yi);
        for j in 0..bi {
            rows.push(derivative_row(mu.parts(), j, &yr));
        }
    }
    Ok(rows)
}

/// `F_{μ,b}(y)`, evaluated exactly and rounded once.
pub fn confluent_alternant(mu: &Partition, b: &MultiplicityVector, y: &[f64]) -> Result<f64> {
    let rows = confluent_matrix(mu, b, y)?;
    Ok(to_f64(&det_exact(&rows)))
}

/// Factors of `F_{μ,b} = c · v_b(y) · s_{λ,b}(y)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProductFactors {
    pub c: f64,
    pub vb: f64,
    pub slb: f64,
}

impl ProductFactors {
    pub fn product(&self) -> f64 {
        self.c * self.vb * self.slb
    }
}

/// `c = Π (-1)^{b_i (b_i - 1)/2} Π_{j<b_i} j!`.
///
/// The derivative rows of a block of size `b_i` contribute `0! 1! ⋯ (b_i-1)!`,
/// which is `(b_i - 1)!` only for `b_i ≤ 3`.
pub fn confluent_constant(b: &MultiplicityVector) -> BigInt {
    b.as_slice().iter().fold(BigInt::one(), |acc, &bi| {
        let sign = if (bi as u64 * (bi as u64 - 1) / 2) % 2 == 0 { 1 } else { -1 };
        (0..bi).fold(acc * sign, |a, j| a * factorial(j))
    })
}

/// `v_b(y) = Π_{i<j} (y_i - y_j)^{b_i b_j}`.
pub fn confluent_vandermonde(b: &MultiplicityVector, y: &[f64]) -> f64 {
    let b = b.as_slice();
    let mut v = 1.0;
    for i in 0..y.len() {
        for j in i + 1..y.len() {
            v *= powu(y[i] - y[j], b[i] * b[j]);
        }
    }
    v
}

pub fn product_decomposition(
    mu: &Partition,
    b: &MultiplicityVector,
    y: &[f64],
) -> Result<ProductFactors> {
    check_confluent_dims(mu, b, y.len())?;
    let lambda = mu.minus_delta()?;
    let c = confluent_constant(b);
    let yr: Vec<BigRational> = y.iter().map(|&v| to_rational(v)).collect();
    let slb = schur_eval_exact(&lambda, &b.expand(&yr));
    Ok(ProductFactors {
        c: to_f64(&BigRational::from_integer(c)),
        vb: confluent_vandermonde(b, y),
        slb: to_f64(&slb),
    })
}
