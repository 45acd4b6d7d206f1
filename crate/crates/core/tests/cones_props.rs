mod common;

use common::{chain_member, magnitude, rng, sparse_instance};
use proptest::prelude::*;
use socf::cones::{
    build_banded, build_bound_primal, build_membership, build_moment_dual, expand_banded,
};
use socf::oracle::global_min;
use socf::relax::{lower_bound, membership, BoundOptions, BoundStatus, Formulation};
use socf::sdp::SolveStatus;
use socf::Interval;

fn opts(k: usize) -> BoundOptions {
    BoundOptions {
        k: Some(k),
        ..Default::default()
    }
}

fn solved(r: &socf::relax::BoundResult) -> bool {
    matches!(r.status, BoundStatus::Optimal | BoundStatus::NearOptimal)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn bound_is_exact_for_sparse_support(seed in any::<u64>(), k in 1usize..=3, unit in any::<bool>()) {
        let f = sparse_instance(&mut rng(seed), k, 40);
        let iv = if unit { Interval::UnitInterval } else { Interval::HalfLine };
        let r = lower_bound(&f, &iv, &opts(k)).unwrap();
        prop_assert!(solved(&r), "{:?} for {f}", r.status);
        let m = global_min(&f, &iv).unwrap().min_value;
        prop_assert!((r.bound - m).abs() <= 1e-6 * (1.0 + m.abs()), "{} vs {m} for {f}", r.bound);
    }

    #[test]
    fn primal_and_moment_dual_agree(seed in any::<u64>(), k in 1usize..=3) {
        let f = sparse_instance(&mut rng(seed), k, 30);
        let iv = Interval::HalfLine;
        let p = lower_bound(&f, &iv, &opts(k)).unwrap();
        let d = lower_bound(&f, &iv, &BoundOptions { formulation: Formulation::MomentDual, ..opts(k) }).unwrap();
        prop_assert!(solved(&p) && solved(&d));
        prop_assert!((p.bound - d.bound).abs() <= 1e-7 * (1.0 + p.bound.abs()), "{} vs {} for {f}", p.bound, d.bound);
    }

    #[test]
    fn membership_certificate_is_nonnegative(seed in any::<u64>(), k in 1usize..=2, d in 5u32..=16) {
        let mut r = rng(seed);
        let f = chain_member(&mut r, k, d);
        let res = membership(&f, &Interval::HalfLine, &opts(k)).unwrap();
        prop_assert_eq!(res.status, SolveStatus::Optimal);
        let g = res.certificate.unwrap().polynomial(false);
        for i in 0..10_000 {
            let t = 4.0 * i as f64 / 9_999.0;
            prop_assert!(g.eval(t) >= -1e-9 * (1.0 + magnitude(&g, t)), "{g} at {t}");
        }
    }

    #[test]
    fn bound_certificate_is_nonnegative_on_unit_interval(seed in any::<u64>(), k in 1usize..=2) {
        let f = sparse_instance(&mut rng(seed), k, 30);
        let r = lower_bound(&f, &Interval::UnitInterval, &opts(k)).unwrap();
        prop_assert!(solved(&r));
        if let Some(cert) = r.certificate {
            let g = cert.polynomial(false);
            for i in 0..10_000 {
                let t = i as f64 / 9_999.0;
                prop_assert!(g.eval(t) >= -1e-9 * (1.0 + magnitude(&g, t)), "{g} at {t}");
            }
        }
    }

    #[test]
    fn blocks_stay_small(seed in any::<u64>(), k in 1usize..=3) {
        let f = sparse_instance(&mut rng(seed), k, 40);
        let d = f.degree() as usize;
        for iv in [Interval::HalfLine, Interval::UnitInterval, Interval::compact(1.0, 3.0).unwrap()] {
            prop_assert!(build_bound_primal(&f, k, &iv).unwrap().max_block_size() <= k + 1);
            prop_assert!(build_membership(&f, k, &iv).unwrap().max_block_size() <= k + 1);
            prop_assert!(build_moment_dual(&f, k, d, &iv).unwrap().max_block_size() <= k + 1);
        }
        if d > 2 * k {
            let banded = build_banded(&f, k).unwrap();
            for c in &banded.constraints {
                // rows touching an entry outside the band only pin it to zero
                let outside = c.form.entries.iter().any(|e| e.row.abs_diff(e.col) > k);
                prop_assert!(!outside || (c.form.entries.len() == 1 && c.rhs == 0.0));
            }
            prop_assert!(banded.blocks.iter().all(|b| b.band == Some(k)));
            prop_assert!(expand_banded(&banded).unwrap().max_block_size() <= k + 1);
        }
    }
}

