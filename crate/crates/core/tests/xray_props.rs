use proptest::prelude::*;
use socf::oracle::{global_min, Argmin};
use socf::schur::Partition;
use socf::xray::{extreme_ray_from_roots, ray_positive_roots, verify_extreme_factorization, RootPattern};
use socf::{Interval, SparsePoly};

/// `m_0 > ... > m_n` with `n <= 7`, `m_0 <= 30`.
fn exponents(min_n: usize) -> impl Strategy<Value = Vec<u32>> {
    (min_n + 1..=8).prop_flat_map(|len| {
        prop::sample::subsequence((0..=30u32).collect::<Vec<_>>(), len).prop_map(|mut v| {
            v.reverse();
            v
        })
    })
}

/// Splits `total` into multiplicities, each a multiple of `step`, placed at
/// distinct locations on a grid in `[0.25, 3]`.
fn pattern(total: u32, step: u32) -> impl Strategy<Value = RootPattern> {
    let slots = (total / step) as usize;
    (
        prop::collection::vec(any::<bool>(), slots.saturating_sub(1)),
        prop::sample::subsequence((1..=12u32).collect::<Vec<_>>(), slots),
    )
        .prop_map(move |(cuts, mut locs)| {
            let mut mults = vec![step];
            for c in cuts {
                if c {
                    mults.push(step);
                } else {
                    *mults.last_mut().unwrap() += step;
                }
            }
            locs.truncate(mults.len());
            let roots = locs.iter().zip(&mults).map(|(&l, &m)| (l as f64 / 4.0, m)).collect();
            RootPattern::new(roots).unwrap()
        })
}

fn magnitude(f: &SparsePoly, t: f64) -> f64 {
    f.terms().iter().map(|&(e, c)| c.abs() * t.powi(e as i32)).sum()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn ray_from_any_pattern_factors(
        (mu, pat) in exponents(1).prop_flat_map(|m| {
            let n = m.len() as u32 - 1;
            (Just(m), pattern(n, 1))
        })
    ) {
        let mu = Partition::new(mu).unwrap();
        let f = extreme_ray_from_roots(&mu, &pat).unwrap();
        prop_assert!(verify_extreme_factorization(&f, &mu, &pat).unwrap() <= 1e-8);
        prop_assert_eq!(ray_positive_roots(&mu, &pat).unwrap(), pat.total());
    }

    #[test]
    fn ray_with_even_multiplicities_is_nonnegative(
        (mu, pat) in exponents(2)
            .prop_filter("even n", |m| m.len() % 2 == 1)
            .prop_flat_map(|m| {
                let n = m.len() as u32 - 1;
                (Just(m), pattern(n, 2))
            })
    ) {
        let mu = Partition::new(mu).unwrap();
        let f = extreme_ray_from_roots(&mu, &pat).unwrap();
        let res = global_min(&f, &Interval::HalfLine).unwrap();
        let at = match res.argmin {
            Argmin::Interior(t) | Argmin::Endpoint(t) => t,
            other => panic!("unexpected argmin {other:?}"),
        };
        // coefficients are rounded once, so near a multiple root the value
        // can dip by the rounding of the summed terms
        prop_assert!(res.min_value >= -1e-14 * magnitude(&f, at), "min {} of {f}", res.min_value);
        prop_assert!(verify_extreme_factorization(&f, &mu, &pat).unwrap() <= 1e-8);
        prop_assert_eq!(ray_positive_roots(&mu, &pat).unwrap(), pat.total());
    }
}
