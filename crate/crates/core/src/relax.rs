//! End-to-end lower bounds and membership certificates on any interval.
//!
//! Before building a relaxation the polynomial is rescaled, `g(u) = f(ρu)/c`,
//! so that the solver sees coefficients and moments of moderate size: `ρ`
//! moves the approximate minimizer to `u ≈ 1` when it lies beyond 1, and `c`
//! is a power of two near the largest coefficient. The shifted chains are
//! invariant under `t ↦ ρu`, so bounds and certificates map back directly.

use serde::{Deserialize, Serialize};

use crate::certify::{extract, CertificatePart, GramCertificate};
use crate::cones::{
    build_bound_primal_degree, build_banded_bound, build_membership_degree, build_moment_dual,
    moments_from_scalars, BlockSdp, MomentVector,
};
use crate::error::{Error, Result};
use crate::poly::{powu, Interval, SparsePoly};
use crate::sdp::{residuals, solve, Residuals, SdpSolution, SolveStatus, SolverSettings};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Formulation {
    #[default]
    Primal,
    MomentDual,
    Banded,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoundOptions {
    pub k: Option<usize>,
    pub d: Option<usize>,
    pub formulation: Formulation,
    pub settings: SolverSettings,
    /// Rescale the variable and the coefficients before solving.
    pub rescale: bool,
}

impl Default for BoundOptions {
    fn default() -> Self {
        BoundOptions {
            k: None,
            d: None,
            formulation: Formulation::Primal,
            settings: SolverSettings::default(),
            rescale: true,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BoundStatus {
    Optimal,
    /// The solver stalled at an iterate that is feasible within `feas_tol`
    /// and has relative gap at most [`NEAR_OPTIMAL_GAP`]; no certificate.
    NearOptimal,
    UnboundedBelow,
    Infeasible,
    NumericalTrouble,
}

/// Largest relative gap at which a stalled solve still yields a bound.
pub const NEAR_OPTIMAL_GAP: f64 = 1e-6;

impl From<SolveStatus> for BoundStatus {
    fn from(s: SolveStatus) -> Self {
        match s {
            SolveStatus::Optimal => BoundStatus::Optimal,
            SolveStatus::Infeasible => BoundStatus::Infeasible,
            SolveStatus::Unbounded => BoundStatus::UnboundedBelow,
            SolveStatus::NumericalTrouble => BoundStatus::NumericalTrouble,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolveStats {
    pub status: SolveStatus,
    pub iterations: usize,
    pub primal_value: f64,
    pub dual_value: f64,
    pub gap: f64,
    pub blocks: usize,
    pub max_block_size: usize,
    pub constraints: usize,
    pub variable_scale: f64,
    pub coefficient_scale: f64,
    /// Residuals of the solved (scaled) problem.
    pub residuals: Residuals,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundResult {
    pub status: BoundStatus,
    /// `-inf` when unbounded below; NaN when the solver failed.
    pub bound: f64,
    pub k: usize,
    pub d: usize,
    pub interval: Interval,
    pub formulation: Formulation,
    /// `|supp(f) ∪ {0}| ≤ 2k + 1`, in which case the bound is the true
    /// minimum up to solver accuracy.
    pub exact_by_sparsity: bool,
    pub solves: Vec<SolveStats>,
    pub certificate: Option<GramCertificate>,
    pub moments: Option<MomentVector>,
}

/// Smallest `k` for which the sparse chain is exact: `⌊(|supp f ∪ {0}| − 1)/2⌋`,
/// at least 1.
pub fn default_k(f: &SparsePoly) -> usize {
    ((f.support_size_with_zero() - 1) / 2).max(1)
}

/// True when `f` is unbounded below on `iv`.
pub fn unbounded_below(f: &SparsePoly, iv: &Interval) -> bool {
    let lc = f.leading_coefficient();
    match iv {
        Interval::HalfLine | Interval::RightHalfLine { .. } => lc < 0.0,
        Interval::FullLine => f.degree() % 2 == 1 || lc < 0.0,
        Interval::UnitInterval | Interval::Compact { .. } => false,
    }
}

fn pow2_near(x: f64) -> f64 {
    if !(x > 0.0) || !x.is_finite() {
        return 1.0;
    }
    2f64.powi(x.log2().round() as i32)
}

/// Best point of a logarithmic grid over the interval, endpoints included,
/// as `(t, f(t))`. The grid reaches the Cauchy root bound on unbounded
/// intervals.
fn sampled_min(f: &SparsePoly, iv: &Interval) -> (f64, f64) {
    let (lo, hi) = match *iv {
        Interval::Compact { a, b } => (a, b),
        Interval::UnitInterval => (0.0, 1.0),
        Interval::RightHalfLine { a } => (a, f64::INFINITY),
        Interval::HalfLine | Interval::FullLine => (0.0, f64::INFINITY),
    };
    let lc = f.leading_coefficient();
    let cauchy = 1.0 + f.terms().iter().skip(1).map(|t| (t.1 / lc).abs()).fold(0.0, f64::max);
    let top = (cauchy.log2().clamp(16.0, 64.0) * 32.0).ceil() as i32;
    let mut best = (f.eval(lo), lo);
    if hi.is_finite() {
        let v = f.eval(hi);
        if v < best.0 {
            best = (v, hi);
        }
    }
    for i in -512..=top {
        let t = 2f64.powf(i as f64 / 32.0);
        if t > lo && t < hi {
            let v = f.eval(t);
            if v < best.0 {
                best = (v, t);
            }
        }
    }
    (best.1, best.0)
}

/// `(ρ, c)` with `g(u) = f(ρu)/c`. `ρ` moves an approximate minimizer
/// beyond 1 to `u ≈ 1`; `c` is a power of two near the size of the sampled
/// minimum, clamped to within a factor ten below the largest coefficient.
pub fn choose_scaling(f: &SparsePoly, iv: &Interval) -> (f64, f64) {
    let (t, v) = sampled_min(f, iv);
    let rho = if t > 1.0 && t.is_finite() { t } else { 1.0 };
    let g = f.rescale_variable(rho);
    let top = g.max_abs_coeff();
    let vmin = v.abs();
    (rho, pow2_near(vmin.min(top).max(1e-1 * top)))
}

/// The interval seen by `u = t/ρ`.
pub fn scale_interval(iv: &Interval, rho: f64) -> Interval {
    match *iv {
        Interval::Compact { a, b } => Interval::Compact {
            a: a / rho,
            b: b / rho,
        },
        Interval::RightHalfLine { a } => Interval::RightHalfLine { a: a / rho },
        other => other,
    }
}

/// Maps a certificate for `g(u) = f(ρu)/c` back to `f`.
fn unscale_certificate(cert: GramCertificate, rho: f64, c: f64, iv: &Interval) -> GramCertificate {
    let parts = cert
        .parts
        .into_iter()
        .map(|p| {
            let wdeg = p.weight.degree();
            let weight = p.weight.rescale_variable(1.0 / rho).scale(powu(rho, wdeg));
            let n = p.gram.len();
            let outer = c * powu(1.0 / rho, wdeg + p.shift);
            let gram = (0..n)
                .map(|i| {
                    (0..n)
                        .map(|j| p.gram[i][j] * outer * powu(1.0 / rho, (i + j) as u32))
                        .collect()
                })
                .collect();
            CertificatePart {
                weight,
                shift: p.shift,
                gram,
                reflected: p.reflected,
            }
        })
        .collect();
    GramCertificate {
        bound: cert.bound * c,
        interval: *iv,
        parts,
    }
}

fn stats(problem: &BlockSdp, sol: &SdpSolution, rho: f64, c: f64) -> SolveStats {
    SolveStats {
        status: sol.status,
        iterations: sol.iterations,
        primal_value: sol.primal_value,
        dual_value: sol.dual_value,
        gap: sol.gap,
        blocks: problem.blocks.len(),
        max_block_size: problem.max_block_size(),
        constraints: problem.constraints.len(),
        variable_scale: rho,
        coefficient_scale: c,
        residuals: residuals(problem, sol),
    }
}

struct HalfResult {
    status: SolveStatus,
    bound_status: BoundStatus,
    bound: f64,
    stats: SolveStats,
    certificate: Option<GramCertificate>,
    moments: Option<MomentVector>,
}

#[derive(Clone, Copy, PartialEq)]
enum Goal {
    Bound(Formulation),
    Membership,
}

fn solve_one(
    f: &SparsePoly,
    k: usize,
    d: usize,
    iv: &Interval,
    goal: Goal,
    opts: &BoundOptions,
) -> Result<HalfResult> {
    let (rho, c) = if opts.rescale {
        choose_scaling(f, iv)
    } else {
        (1.0, 1.0)
    };
    let g = f.rescale_variable(rho).scale(1.0 / c);
    let giv = scale_interval(iv, rho);
    let problem = match goal {
        Goal::Bound(Formulation::Primal) => build_bound_primal_degree(&g, k, d, &giv)?,
        Goal::Bound(Formulation::MomentDual) => build_moment_dual(&g, k, d, &giv)?,
        Goal::Bound(Formulation::Banded) => {
            if giv != Interval::HalfLine || d != f.degree() as usize {
                return Err(Error::InvalidInterval(
                    "the banded form covers the half-line at the polynomial's own degree".into(),
                ));
            }
            build_banded_bound(&g, k)?
        }
        Goal::Membership => build_membership_degree(&g, k, d, &giv)?,
    };
    let sol = solve(&problem, &opts.settings)?;
    let st = stats(&problem, &sol, rho, c);
    let optimal = sol.status == SolveStatus::Optimal;
    let near = sol.status == SolveStatus::NumericalTrouble && goal != Goal::Membership && {
        let r = st.residuals;
        let tol = opts.settings.feas_tol;
        r.primal_infeas <= tol && r.dual_infeas <= tol && r.min_eig >= -tol && sol.gap <= NEAR_OPTIMAL_GAP
    };
    let bound_status = if near {
        BoundStatus::NearOptimal
    } else {
        sol.status.into()
    };
    let bound = match goal {
        Goal::Membership => 0.0,
        _ if optimal || near => sol.primal_value * c,
        _ => f64::NAN,
    };
    let certificate = match goal {
        Goal::Bound(Formulation::MomentDual) => None,
        _ if optimal => match extract(&sol, &problem) {
            Ok(cert) => Some(unscale_certificate(cert, rho, c, iv)),
            Err(Error::NotCertifiable(_)) => None,
            Err(e) => return Err(e),
        },
        _ => None,
    };
    let moments = match goal {
        Goal::Bound(Formulation::MomentDual) if optimal => {
            let mut m = moments_from_scalars(&sol.scalar_values);
            for (j, v) in m.v.iter_mut().enumerate() {
                *v *= powu(rho, j as u32);
            }
            Some(m)
        }
        _ => None,
    };
    Ok(HalfResult {
        status: sol.status,
        bound_status,
        bound,
        stats: st,
        certificate,
        moments,
    })
}

fn resolve_k_d(f: &SparsePoly, k: Option<usize>, d: Option<usize>) -> Result<(usize, usize)> {
    let k = k.unwrap_or_else(|| default_k(f));
    if k == 0 {
        return Err(Error::InvalidK(0));
    }
    let d = d.unwrap_or_else(|| (f.degree() as usize).max(2 * k));
    if d < f.degree() as usize {
        return Err(Error::DimensionMismatch(format!(
            "relaxation degree {d} is below the polynomial degree {}",
            f.degree()
        )));
    }
    Ok((k, d))
}

/// Adds `extra · 1` to the certificate so it certifies a smaller bound.
fn lower_certificate(mut cert: GramCertificate, new_bound: f64, reflected: bool) -> GramCertificate {
    let extra = cert.bound - new_bound;
    if extra > 0.0 {
        cert.parts.push(CertificatePart {
            weight: SparsePoly::constant(1.0),
            shift: 0,
            gram: vec![vec![extra]],
            reflected,
        });
    }
    cert.bound = new_bound;
    cert
}

/// Lower bound for `f` on `iv` from the shifted sos chain.
pub fn lower_bound(f: &SparsePoly, iv: &Interval, opts: &BoundOptions) -> Result<BoundResult> {
    iv.validate()?;
    let (k, d) = resolve_k_d(f, opts.k, opts.d)?;
    let mut result = BoundResult {
        status: BoundStatus::Optimal,
        bound: f64::NEG_INFINITY,
        k,
        d,
        interval: *iv,
        formulation: opts.formulation,
        exact_by_sparsity: f.support_size_with_zero() <= 2 * k + 1,
        solves: Vec::new(),
        certificate: None,
        moments: None,
    };
    if unbounded_below(f, iv) {
        result.status = BoundStatus::UnboundedBelow;
        return Ok(result);
    }
    let goal = Goal::Bound(opts.formulation);
    if *iv == Interval::FullLine {
        let pos = solve_one(f, k, d, &Interval::HalfLine, goal, opts)?;
        let neg = solve_one(&f.reflect(), k, d, &Interval::HalfLine, goal, opts)?;
        result.solves = vec![pos.stats.clone(), neg.stats.clone()];
        for side in [&pos, &neg] {
            if !matches!(side.bound_status, BoundStatus::Optimal | BoundStatus::NearOptimal) {
                result.status = side.bound_status;
                result.bound = f64::NAN;
                return Ok(result);
            }
        }
        if pos.bound_status == BoundStatus::NearOptimal || neg.bound_status == BoundStatus::NearOptimal {
            result.status = BoundStatus::NearOptimal;
        }
        let bound = pos.bound.min(neg.bound);
        result.bound = bound;
        if let (Some(a), Some(b)) = (pos.certificate, neg.certificate) {
            let a = lower_certificate(a, bound, false);
            let mut b = lower_certificate(b, bound, true);
            for p in &mut b.parts {
                p.reflected = true;
            }
            let mut parts = a.parts;
            parts.extend(b.parts);
            result.certificate = Some(GramCertificate {
                bound,
                interval: Interval::FullLine,
                parts,
            });
        }
        result.moments = if pos.bound <= neg.bound {
            pos.moments
        } else {
            neg.moments.map(|mut m| {
                for (j, v) in m.v.iter_mut().enumerate() {
                    if j % 2 == 1 {
                        *v = -*v;
                    }
                }
                m
            })
        };
        return Ok(result);
    }
    let r = solve_one(f, k, d, iv, goal, opts)?;
    result.status = r.bound_status;
    result.bound = r.bound;
    result.solves = vec![r.stats];
    result.certificate = r.certificate;
    result.moments = r.moments;
    Ok(result)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MembershipResult {
    /// `Optimal` means a certificate was found.
    pub status: SolveStatus,
    pub k: usize,
    pub d: usize,
    pub interval: Interval,
    pub solves: Vec<SolveStats>,
    pub certificate: Option<GramCertificate>,
}

/// Decides `f ∈ cone(k, d, iv)` and returns a certificate when it is.
/// On the real line both `f(t)` and `f(−t)` must be in the half-line cone.
pub fn membership(f: &SparsePoly, iv: &Interval, opts: &BoundOptions) -> Result<MembershipResult> {
    iv.validate()?;
    let (k, d) = resolve_k_d(f, opts.k, opts.d)?;
    let mut out = MembershipResult {
        status: SolveStatus::Infeasible,
        k,
        d,
        interval: *iv,
        solves: Vec::new(),
        certificate: None,
    };
    if unbounded_below(f, iv) {
        return Ok(out);
    }
    if *iv == Interval::FullLine {
        let pos = solve_one(f, k, d, &Interval::HalfLine, Goal::Membership, opts)?;
        let neg = solve_one(&f.reflect(), k, d, &Interval::HalfLine, Goal::Membership, opts)?;
        out.solves = vec![pos.stats, neg.stats];
        out.status = if pos.status != SolveStatus::Optimal {
            pos.status
        } else {
            neg.status
        };
        if let (Some(a), Some(b)) = (pos.certificate, neg.certificate) {
            let mut parts = a.parts;
            parts.extend(b.parts.into_iter().map(|mut p| {
                p.reflected = true;
                p
            }));
            out.certificate = Some(GramCertificate {
                bound: 0.0,
                interval: Interval::FullLine,
                parts,
            });
        }
        return Ok(out);
    }
    let r = solve_one(f, k, d, iv, Goal::Membership, opts)?;
    out.status = r.status;
    out.solves = vec![r.stats];
    out.certificate = r.certificate;
    Ok(out)
}
