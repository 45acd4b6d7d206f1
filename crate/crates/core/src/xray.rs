//! Extreme rays of the cone of polynomials in `span{t^{m_0}, ..., t^{m_n}}`
//! that are nonnegative on an interval, built from prescribed roots.

use num_rational::BigRational;
use num_traits::{Signed, Zero};

use crate::error::{Error, Result};
use crate::linalg::{det_exact, rational_pow, to_f64, to_rational};
use crate::oracle;
use crate::poly::{Interval, SparsePoly};
use crate::schur::{derivative_row, schur_eval_exact, schur_expand, MultiplicityVector, Partition};

/// Distinct positive roots with multiplicities.
#[derive(Debug, Clone, PartialEq)]
pub struct RootPattern {
    roots: Vec<(f64, u32)>,
}

impl RootPattern {
    pub fn new(roots: Vec<(f64, u32)>) -> Result<Self> {
        for (i, &(x, b)) in roots.iter().enumerate() {
            if !(x.is_finite() && x > 0.0) || b == 0 {
                return Err(Error::DimensionMismatch(format!(
                    "root {x} with multiplicity {b} must be positive"
                )));
            }
            if roots[..i].iter().any(|&(y, _)| y == x) {
                return Err(Error::DimensionMismatch(format!("repeated root location {x}")));
            }
        }
        Ok(RootPattern { roots })
    }

    pub fn roots(&self) -> &[(f64, u32)] {
        &self.roots
    }

    /// Total multiplicity.
    pub fn total(&self) -> u32 {
        self.roots.iter().map(|r| r.1).sum()
    }

    fn locations(&self) -> Vec<f64> {
        self.roots.iter().map(|r| r.0).collect()
    }
}

fn check_pattern(mu: &Partition, pattern: &RootPattern) -> Result<()> {
    if !mu.is_strict() || mu.is_empty() {
        return Err(Error::InvalidPartition(format!(
            "{:?} must have distinct parts",
            mu.parts()
        )));
    }
    let n = mu.len() as u32 - 1;
    if pattern.total() != n {
        return Err(Error::DimensionMismatch(format!(
            "root multiplicities sum to {}, expected dim V - 1 = {n}",
            pattern.total()
        )));
    }
    Ok(())
}

/// `det A(t; ξ)` expanded along its first row `(t^{m_0}, ..., t^{m_n})`,
/// scaled to leading coefficient `+1`.
pub fn extreme_ray_from_roots(mu: &Partition, pattern: &RootPattern) -> Result<SparsePoly> {
    let coeffs = extreme_ray_exact(mu, pattern)?;
    SparsePoly::from_terms(mu.parts().iter().map(|&e| (e, to_f64(&coeffs[e as usize]))))
}

/// The ray with exact ascending coefficients (length `m_0 + 1`), leading
/// coefficient `+1`. The cofactors are exact, so the pattern is degenerate
/// only when all of them vanish.
pub fn extreme_ray_exact(mu: &Partition, pattern: &RootPattern) -> Result<Vec<BigRational>> {
    check_pattern(mu, pattern)?;
    let m = mu.parts();
    let mut lower: Vec<Vec<BigRational>> = Vec::new();
    for &(xi, b) in pattern.roots() {
        let x = to_rational(xi);
        for j in 0..b {
            let mut row = derivative_row(m, j, &x);
            // rows are rescaled to unit max entry; only the overall scale of
            // the determinant changes
            let max = row.iter().map(|v| v.abs()).max().unwrap_or_default();
            if !max.is_zero() {
                row.iter_mut().for_each(|v| *v /= &max);
            }
            lower.push(row);
        }
    }
    let cols = m.len();
    let cofactors: Vec<BigRational> = (0..cols)
        .map(|c| {
            let minor: Vec<Vec<BigRational>> = lower
                .iter()
                .map(|row| {
                    row.iter()
                        .enumerate()
                        .filter(|&(j, _)| j != c)
                        .map(|(_, v)| v.clone())
                        .collect()
                })
                .collect();
            let d = det_exact(&minor);
            if c % 2 == 0 {
                d
            } else {
                -d
            }
        })
        .collect();
    let lead = cofactors
        .iter()
        .find(|c| !c.is_zero())
        .cloned()
        .ok_or(Error::DegenerateRootPattern)?;
    let mut dense = vec![BigRational::zero(); m[0] as usize + 1];
    for (&e, c) in m.iter().zip(&cofactors) {
        dense[e as usize] = c / &lead;
    }
    Ok(dense)
}

/// Strictly positive roots, with multiplicity, of the exact ray. Rounding
/// the coefficients can split or remove multiple roots, so this counts on
/// the rational determinant itself.
pub fn ray_positive_roots(mu: &Partition, pattern: &RootPattern) -> Result<u32> {
    let coeffs = extreme_ray_exact(mu, pattern)?;
    let zeros = coeffs.iter().take_while(|c| c.is_zero()).count();
    oracle::count_roots_rational(&coeffs[zeros..], &Interval::HalfLine)
}

/// The Schur factor `s_λ(t, ξ_1^{b_1}, ...)` as a polynomial in `t`, with
/// exact rational coefficients rounded once.
pub fn schur_factor_in_t(mu: &Partition, pattern: &RootPattern) -> Result<SparsePoly> {
    let coeffs = schur_factor_exact(mu, pattern)?;
    Ok(SparsePoly::from_dense(&coeffs.iter().map(to_f64).collect::<Vec<_>>()))
}

fn schur_factor_exact(mu: &Partition, pattern: &RootPattern) -> Result<Vec<BigRational>> {
    check_pattern(mu, pattern)?;
    let lambda = mu.minus_delta()?;
    let b = MultiplicityVector::new(pattern.roots().iter().map(|r| r.1).collect())?;
    let xi = b.expand(&pattern.locations());
    let nvars = xi.len() + 1;
    if let Ok(exp) = schur_expand(&lambda, nvars) {
        // substitute x_1.. = ξ and collect by the power of x_0 = t
        let xr: Vec<BigRational> = xi.iter().map(|&v| to_rational(v)).collect();
        let mut coeffs = vec![BigRational::zero(); lambda.parts().first().copied().unwrap_or(0) as usize + 1];
        for (e, &c) in &exp.terms {
            let mut term = BigRational::from_integer(c.into());
            for (k, x) in e[1..].iter().zip(&xr) {
                term *= rational_pow(x, *k);
            }
            coeffs[e[0] as usize] += term;
        }
        return Ok(coeffs);
    }
    // Past the expansion budget: exact interpolation at t = 0, 1, ..., λ_0.
    let deg = lambda.parts().first().copied().unwrap_or(0) as usize;
    let mut xs: Vec<BigRational> = Vec::with_capacity(nvars);
    xs.push(BigRational::zero());
    xs.extend(xi.iter().map(|&v| to_rational(v)));
    let nodes: Vec<BigRational> = (0..=deg).map(|i| BigRational::from_integer((i as i64).into())).collect();
    let values: Vec<BigRational> = nodes
        .iter()
        .map(|t| {
            xs[0] = t.clone();
            schur_eval_exact(&lambda, &xs)
        })
        .collect();
    Ok(interpolate(&nodes, &values))
}

/// Newton interpolation, returning ascending monomial coefficients.
fn interpolate(nodes: &[BigRational], values: &[BigRational]) -> Vec<BigRational> {
    let n = nodes.len();
    let mut dd = values.to_vec();
    for j in 1..n {
        for i in (j..n).rev() {
            dd[i] = (&dd[i] - &dd[i - 1]) / (&nodes[i] - &nodes[i - j]);
        }
    }
    let mut coeffs = vec![BigRational::zero(); n];
    for i in (0..n).rev() {
        // coeffs = coeffs * (t - nodes[i]) + dd[i]
        let mut next = vec![BigRational::zero(); n];
        for k in 0..n {
            if coeffs[k].is_zero() {
                continue;
            }
            if k + 1 < n {
                next[k + 1] += &coeffs[k];
            }
            next[k] -= &coeffs[k] * &nodes[i];
        }
        next[0] += &dd[i];
        coeffs = next;
    }
    coeffs
}

/// `Π (t - ξ_i)^{b_i} · s_λ(t, ξ's)`, the factorized form of the ray.
pub fn factorized_ray(mu: &Partition, pattern: &RootPattern) -> Result<SparsePoly> {
    let mut g = schur_factor_exact(mu, pattern)?;
    for &(xi, b) in pattern.roots() {
        let x = to_rational(xi);
        for _ in 0..b {
            // g *= (t - ξ)
            let mut next = vec![BigRational::zero(); g.len() + 1];
            for (k, c) in g.iter().enumerate() {
                next[k + 1] += c;
                next[k] -= c * &x;
            }
            g = next;
        }
    }
    Ok(SparsePoly::from_dense(&g.iter().map(to_f64).collect::<Vec<_>>()))
}

/// `min_γ max_a |f_a - γ g_a| / max_a |f_a|` over all exponents. A ray is
/// only defined up to scale, so the residual is relative to `f`.
pub fn proportionality_residual(f: &SparsePoly, g: &SparsePoly) -> f64 {
    let len = f.degree().max(g.degree()) as usize + 1;
    let (fv, gv) = (f.dense(len), g.dense(len));
    let objective = |gamma: f64| {
        fv.iter()
            .zip(&gv)
            .map(|(a, b)| (a - gamma * b).abs())
            .fold(0.0, f64::max)
    };
    // The optimum of this 1-D piecewise-linear problem sits where one term
    // vanishes or two terms balance.
    let mut best = objective(0.0);
    for i in 0..len {
        if gv[i] != 0.0 {
            best = best.min(objective(fv[i] / gv[i]));
        }
        for j in 0..i {
            for (num, den) in [(fv[i] - fv[j], gv[i] - gv[j]), (fv[i] + fv[j], gv[i] + gv[j])] {
                if den != 0.0 {
                    best = best.min(objective(num / den));
                }
            }
        }
    }
    let norm = fv.iter().fold(0.0, |m: f64, a| m.max(a.abs()));
    if norm > 0.0 {
        best / norm
    } else {
        best
    }
}

/// Residual of `f ≈ γ' Π (t - ξ_i)^{b_i} s_λ(t, ξ's)` for the best `γ'`.
pub fn verify_extreme_factorization(f: &SparsePoly, mu: &Partition, pattern: &RootPattern) -> Result<f64> {
    check_pattern(mu, pattern)?;
    let g = factorized_ray(mu, pattern)?;
    Ok(proportionality_residual(f, &g))
}

/// Roots of `f` in the interval (with multiplicity) and whether that count
/// reaches `dim V - 1` for `V = span(supp(f) ∪ {0})`.
pub fn check_root_count(f: &SparsePoly, iv: &Interval) -> Result<(u32, bool)> {
    let n = f.support_size_with_zero() as u32 - 1;
    let roots = oracle::count_roots(f, iv)?;
    Ok((roots, roots >= n))
}

/// As [`check_root_count`] with `V = span{t^{m_i}}` given explicitly.
pub fn check_root_count_in(f: &SparsePoly, mu: &Partition, iv: &Interval) -> Result<(u32, bool)> {
    let n = mu.len() as u32 - 1;
    let roots = oracle::count_roots(f, iv)?;
    Ok((roots, roots >= n))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn part(v: &[u32]) -> Partition {
        Partition::new(v.to_vec()).unwrap()
    }

    fn pat(v: &[(f64, u32)]) -> RootPattern {
        RootPattern::new(v.to_vec()).unwrap()
    }

    fn p(terms: &[(u32, f64)]) -> SparsePoly {
        SparsePoly::from_terms(terms.iter().copied()).unwrap()
    }

    #[test]
    fn ray_examples() {
        let f = extreme_ray_from_roots(&part(&[2, 1, 0]), &pat(&[(1.0, 2)])).unwrap();
        assert_eq!(f, p(&[(2, 1.0), (1, -2.0), (0, 1.0)]));

        let f = extreme_ray_from_roots(&part(&[1, 0]), &pat(&[(2.5, 1)])).unwrap();
        assert_eq!(f, p(&[(1, 1.0), (0, -2.5)]));

        let f = extreme_ray_from_roots(&part(&[4, 3, 0]), &pat(&[(1.0, 2)])).unwrap();
        let expected = p(&[(4, 3.0), (3, -4.0), (0, 1.0)]).scale(1.0 / 3.0);
        assert!(f.max_abs_diff(&expected) < 1e-15);
    }

    #[test]
    fn pattern_must_match_dimension() {
        assert!(extreme_ray_from_roots(&part(&[2, 1, 0]), &pat(&[(1.0, 1)])).is_err());
        assert!(RootPattern::new(vec![(-1.0, 1)]).is_err());
        assert!(RootPattern::new(vec![(1.0, 1), (1.0, 1)]).is_err());
        assert!(verify_extreme_factorization(&p(&[(0, 1.0)]), &part(&[2, 1, 0]), &pat(&[(1.0, 3)])).is_err());
    }

    #[test]
    fn near_coincident_roots_approach_the_double_root() {
        // the cofactors are O(1e-13) but exact, so the ray is still found
        let f = extreme_ray_from_roots(&part(&[2, 1, 0]), &pat(&[(1.0, 1), (1.0 + 1e-13, 1)])).unwrap();
        assert!(f.max_abs_diff(&p(&[(2, 1.0), (1, -2.0), (0, 1.0)])) < 1e-12);
    }

    #[test]
    fn factorization_examples() {
        let f = p(&[(4, 3.0), (3, -4.0), (0, 1.0)]);
        let r = verify_extreme_factorization(&f, &part(&[4, 3, 0]), &pat(&[(1.0, 2)])).unwrap();
        assert!(r <= 1e-9);
        let s = schur_factor_in_t(&part(&[4, 3, 0]), &pat(&[(1.0, 2)])).unwrap();
        assert_eq!(s, p(&[(2, 3.0), (1, 2.0), (0, 1.0)]));

        let sq = p(&[(2, 1.0), (1, -4.0), (0, 4.0)]);
        let r = verify_extreme_factorization(&sq, &part(&[2, 1, 0]), &pat(&[(2.0, 2)])).unwrap();
        assert_eq!(r, 0.0);

        let r = verify_extreme_factorization(&p(&[(2, 1.0), (0, 1.0)]), &part(&[2, 1, 0]), &pat(&[(1.0, 2)]))
            .unwrap();
        assert!(r > 0.5);
    }

    #[test]
    fn interpolation_route_matches_expansion_route() {
        // |λ| = 21 exceeds the default expansion budget
        let mu = part(&[13, 11, 0]);
        let pattern = pat(&[(0.7, 1), (1.9, 1)]);
        let s = schur_factor_in_t(&mu, &pattern).unwrap();
        let lambda = mu.minus_delta().unwrap();
        assert!(lambda.size() > 20);
        for t in [0.3, 1.1, 2.0] {
            let direct = crate::schur::schur_eval(&lambda, &[t, 0.7, 1.9]);
            assert!((s.eval(t) - direct).abs() <= 1e-9 * direct.abs());
        }
        let f = extreme_ray_from_roots(&mu, &pattern).unwrap();
        assert!(verify_extreme_factorization(&f, &mu, &pattern).unwrap() < 1e-8);
    }

    #[test]
    fn root_count_examples() {
        let sq = p(&[(2, 1.0), (1, -2.0), (0, 1.0)]);
        assert_eq!(check_root_count(&sq, &Interval::UnitInterval).unwrap(), (2, true));
        let f = p(&[(4, 3.0), (3, -4.0), (0, 1.0)]);
        assert_eq!(check_root_count(&f, &Interval::HalfLine).unwrap(), (2, true));
        assert_eq!(
            check_root_count(&p(&[(2, 1.0), (0, 1.0)]), &Interval::HalfLine).unwrap(),
            (0, false)
        );
        assert_eq!(
            check_root_count_in(&sq, &part(&[2, 1, 0]), &Interval::UnitInterval).unwrap(),
            (2, true)
        );
    }
}
