//! Gram certificates: extraction from solver output, independent
//! verification, and presentation as weighted sums of squares.

use nalgebra::DMatrix;
use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, Zero};
use serde::{Deserialize, Serialize};

use crate::cones::BlockSdp;
use crate::error::{Error, Result};
use crate::linalg::{min_eigenvalue, psd_project, sym_eigen, to_f64, to_rational};
use crate::poly::{Interval, SparsePoly};
use crate::sdp::{SdpSolution, SolveStatus};

/// Eigenvalues down to this are clipped to zero; below it the solution is
/// rejected.
pub const CLIP_TOL: f64 = 1e-8;

/// Largest denominator used by the strict rational checker.
pub const RATIONAL_DENOMINATOR: i64 = 1_000_000;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CertificatePart {
    pub weight: SparsePoly,
    pub shift: u32,
    pub gram: Vec<Vec<f64>>,
    /// Part of the certificate for `f(-t)` (real-line certificates).
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    pub reflected: bool,
}

impl CertificatePart {
    pub fn matrix(&self) -> DMatrix<f64> {
        let n = self.gram.len();
        DMatrix::from_fn(n, n, |i, j| self.gram[i][j])
    }

    /// `weight · t^shift · (1, t, …)·G·(1, t, …)ᵀ`.
    pub fn polynomial(&self) -> SparsePoly {
        crate::cones::gram_image(&self.weight, self.shift, &self.matrix())
    }
}

fn to_rows(m: &DMatrix<f64>) -> Vec<Vec<f64>> {
    (0..m.nrows())
        .map(|i| (0..m.ncols()).map(|j| m[(i, j)]).collect())
        .collect()
}

/// `f − bound = Σ parts` on the interval (for the real line, the
/// non-reflected parts certify `f(t) − bound` and the reflected ones
/// `f(−t) − bound`).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GramCertificate {
    pub bound: f64,
    pub interval: Interval,
    pub parts: Vec<CertificatePart>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Verification {
    pub coeff_residual: f64,
    pub min_eig: f64,
    pub ok: bool,
}

/// A term `square² · monomial · weight` of the normal form.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ShapeTerm {
    pub square: SparsePoly,
    pub monomial: SparsePoly,
    pub weight: SparsePoly,
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    pub reflected: bool,
}

impl GramCertificate {
    /// Sum of the parts for `f(t)` (or `f(−t)` when `reflected`).
    pub fn polynomial(&self, reflected: bool) -> SparsePoly {
        self.parts
            .iter()
            .filter(|p| p.reflected == reflected)
            .fold(SparsePoly::zero(), |acc, p| acc.add_tol(&p.polynomial(), 0.0))
    }

    pub fn min_eig(&self) -> f64 {
        self.parts
            .iter()
            .map(|p| min_eigenvalue(&p.matrix()))
            .fold(f64::INFINITY, f64::min)
    }

    /// Max Gram size over the parts.
    pub fn max_gram_size(&self) -> usize {
        self.parts.iter().map(|p| p.gram.len()).max().unwrap_or(0)
    }
}

/// Folds a positive monomial weight `c·t^e` into the shift and the Gram
/// matrix so that such parts read `(1, shift, G)`.
fn normalize_weight(weight: &SparsePoly, shift: u32, gram: DMatrix<f64>) -> (SparsePoly, u32, DMatrix<f64>) {
    if let [(e, c)] = weight.terms() {
        if *c > 0.0 {
            return (SparsePoly::constant(1.0), shift + e, gram * *c);
        }
    }
    (weight.clone(), shift, gram)
}

/// Collects the Gram blocks of an optimal membership or bound solution.
pub fn extract(solution: &SdpSolution, problem: &BlockSdp) -> Result<GramCertificate> {
    if solution.status != SolveStatus::Optimal {
        return Err(Error::MalformedProblem(format!(
            "cannot extract a certificate from a {:?} solution",
            solution.status
        )));
    }
    let bound = problem
        .bound_scalar
        .map(|i| solution.scalar_values[i])
        .unwrap_or(0.0);
    let interval = problem.interval.unwrap_or(Interval::HalfLine);
    let mut raw = Vec::new();
    for (b, x) in problem.blocks.iter().zip(&solution.block_values) {
        let Some(role) = &b.role else { continue };
        let lmin = min_eigenvalue(x);
        if lmin < -CLIP_TOL {
            return Err(Error::NotCertifiable(lmin));
        }
        let g = if lmin < 0.0 { psd_project(x) } else { x.clone() };
        let (weight, shift, g) = normalize_weight(&role.weight, role.shift, g);
        raw.push((weight, shift, g, role.reflected));
    }
    if raw.is_empty() {
        return Err(Error::MalformedProblem("problem has no Gram blocks".into()));
    }
    // Parts that are zero up to solver accuracy carry no information.
    let scale = raw.iter().fold(0.0f64, |m, r| m.max(r.2.amax()));
    let parts = raw
        .into_iter()
        .filter(|r| r.2.amax() > 1e-9 * (1.0 + scale))
        .map(|(weight, shift, g, reflected)| CertificatePart {
            weight,
            shift,
            gram: to_rows(&g),
            reflected,
        })
        .collect();
    Ok(GramCertificate {
        bound,
        interval,
        parts,
    })
}

fn targets(cert: &GramCertificate, f: &SparsePoly) -> Vec<(bool, SparsePoly)> {
    let shifted = |p: &SparsePoly| p.add_tol(&SparsePoly::constant(-cert.bound), 0.0);
    let mut out = vec![(false, shifted(f))];
    if cert.parts.iter().any(|p| p.reflected) || cert.interval == Interval::FullLine {
        out.push((true, shifted(&f.reflect())));
    }
    out
}

/// The identity is checked relative to the size of `f − bound`, which
/// includes the bound itself.
fn decide(coeff_residual: f64, min_eig: f64, cert: &GramCertificate, f: &SparsePoly) -> bool {
    let scale = targets(cert, f)
        .iter()
        .fold(0.0f64, |m, (_, t)| m.max(t.max_abs_coeff()));
    coeff_residual <= 1e-6 * (1.0 + scale) && min_eig >= -CLIP_TOL
}

/// Floating-point check of the certificate identity and of the Gram
/// matrices' eigenvalues.
pub fn verify(cert: &GramCertificate, f: &SparsePoly) -> Verification {
    let mut res = 0.0f64;
    for (reflected, target) in targets(cert, f) {
        res = res.max(cert.polynomial(reflected).max_abs_diff(&target));
    }
    let min_eig = if cert.parts.is_empty() { 0.0 } else { cert.min_eig() };
    Verification {
        coeff_residual: res,
        min_eig,
        ok: decide(res, min_eig, cert, f) && !res.is_nan(),
    }
}

/// Best rational approximation of `x` with denominator at most `max_den`.
pub fn round_rational(x: f64, max_den: i64) -> BigRational {
    if x == 0.0 || !x.is_finite() {
        return BigRational::zero();
    }
    let exact = to_rational(x);
    let neg = exact.is_negative();
    let mut r = exact.abs();
    // continued-fraction convergents h/k
    let (mut h0, mut h1) = (BigInt::zero(), BigInt::one());
    let (mut k0, mut k1) = (BigInt::one(), BigInt::zero());
    let bound = BigInt::from(max_den);
    loop {
        let a = r.floor().to_integer();
        let k2 = &a * &k1 + &k0;
        if k2 > bound {
            // best semiconvergent within the bound
            let t = (&bound - &k0) / &k1;
            let hs = &t * &h1 + &h0;
            let ks = &t * &k1 + &k0;
            let cand1 = BigRational::new(h1.clone(), k1.clone());
            let out = if t.is_zero() {
                cand1
            } else {
                let cand2 = BigRational::new(hs, ks);
                if (&cand2 - exact.abs()).abs() < (&cand1 - exact.abs()).abs() {
                    cand2
                } else {
                    cand1
                }
            };
            return if neg { -out } else { out };
        }
        let h2 = &a * &h1 + &h0;
        h0 = h1;
        h1 = h2;
        k0 = k1;
        k1 = k2;
        let frac = &r - BigRational::from_integer(a);
        if frac.is_zero() {
            let out = BigRational::new(h1, k1);
            return if neg { -out } else { out };
        }
        r = frac.recip();
    }
}

/// Strict check: Gram entries are rounded to rationals with denominator
/// at most 10⁶ and the identity is expanded exactly against the exact
/// values of `f`'s coefficients.
pub fn verify_exact(cert: &GramCertificate, f: &SparsePoly) -> Verification {
    let mut res = 0.0f64;
    let mut min_eig = f64::INFINITY;
    for (reflected, target) in targets(cert, f) {
        let deg = cert
            .parts
            .iter()
            .filter(|p| p.reflected == reflected)
            .map(|p| p.weight.degree() as usize + p.shift as usize + 2 * p.gram.len())
            .max()
            .unwrap_or(0)
            .max(target.degree() as usize + 1);
        let mut acc = vec![BigRational::zero(); deg + 1];
        for p in cert.parts.iter().filter(|p| p.reflected == reflected) {
            let n = p.gram.len();
            let q: Vec<Vec<BigRational>> = p
                .gram
                .iter()
                .map(|row| row.iter().map(|&x| round_rational(x, RATIONAL_DENOMINATOR)).collect())
                .collect();
            let rounded = DMatrix::from_fn(n, n, |i, j| to_f64(&q[i][j]));
            min_eig = min_eig.min(min_eigenvalue(&rounded));
            for i in 0..n {
                for j in 0..n {
                    for &(e, c) in p.weight.terms() {
                        acc[e as usize + p.shift as usize + i + j] += to_rational(c) * &q[i][j];
                    }
                }
            }
        }
        for (e, a) in acc.iter().enumerate() {
            let diff = a - to_rational(target.coeff(e as u32));
            res = res.max(to_f64(&diff.abs()));
        }
    }
    if !min_eig.is_finite() {
        min_eig = 0.0;
    }
    Verification {
        coeff_residual: res,
        min_eig,
        ok: decide(res, min_eig, cert, f),
    }
}

/// Eigen-factors each Gram matrix into weighted squares of degree ≤ its
/// size − 1. Each square's leading coefficient is made positive.
pub fn theorem_shape(cert: &GramCertificate) -> Result<Vec<ShapeTerm>> {
    let mut out = Vec::new();
    for p in &cert.parts {
        let m = p.matrix();
        let (vals, vecs) = sym_eigen(&m);
        for (idx, &w) in vals.iter().enumerate() {
            if w < -CLIP_TOL {
                return Err(Error::NotCertifiable(w));
            }
            // every positive eigenvalue is kept so that the squares sum
            // back to the Gram form up to rounding
            if w <= 0.0 {
                continue;
            }
            let r = w.sqrt();
            let coeffs: Vec<f64> = vecs.column(idx).iter().map(|u| u * r).collect();
            let mut g = SparsePoly::from_dense(&coeffs);
            if g.leading_coefficient() < 0.0 {
                g = g.scale(-1.0);
            }
            out.push(ShapeTerm {
                square: g,
                monomial: SparsePoly::monomial(p.shift, 1.0),
                weight: p.weight.clone(),
                reflected: p.reflected,
            });
        }
    }
    Ok(out)
}

/// `Σ square² · monomial · weight` over the terms for `f(t)` (or `f(−t)`).
pub fn reassemble(terms: &[ShapeTerm], reflected: bool) -> SparsePoly {
    terms
        .iter()
        .filter(|t| t.reflected == reflected)
        .fold(SparsePoly::zero(), |acc, t| {
            let sq = t.square.mul_tol(&t.square, 0.0);
            acc.add_tol(&sq.mul_tol(&t.monomial, 0.0).mul_tol(&t.weight, 0.0), 0.0)
        })
}
