mod common;

use common::{chain_member, rng, sparse_instance};
use proptest::prelude::*;
use socf::certify::{reassemble, theorem_shape, verify};
use socf::relax::{lower_bound, membership, BoundOptions};
use socf::sdp::SolveStatus;
use socf::{Interval, SparsePoly};

fn opts(k: usize) -> BoundOptions {
    BoundOptions {
        k: Some(k),
        ..Default::default()
    }
}

fn max_abs_diff(a: &SparsePoly, b: &SparsePoly) -> f64 {
    (a - b).terms().iter().map(|t| t.1.abs()).fold(0.0, f64::max)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn chain_members_get_verified_certificates(seed in any::<u64>(), k in 1usize..=3, d in 6u32..=20) {
        let f = chain_member(&mut rng(seed), k, d);
        let res = membership(&f, &Interval::HalfLine, &opts(k)).unwrap();
        prop_assert_eq!(res.status, SolveStatus::Optimal);
        let cert = res.certificate.unwrap();
        let v = verify(&cert, &f);
        prop_assert!(v.ok, "{v:?} for {f}");
    }

    #[test]
    fn shape_reassembles_and_respects_degrees(seed in any::<u64>(), k in 1usize..=3, unit in any::<bool>()) {
        let f = sparse_instance(&mut rng(seed), k, 30);
        let iv = if unit { Interval::UnitInterval } else { Interval::HalfLine };
        let r = lower_bound(&f, &iv, &opts(k)).unwrap();
        let Some(cert) = r.certificate else {
            return Err(TestCaseError::fail(format!("no certificate for {f}: {:?}", r.status)));
        };
        let terms = theorem_shape(&cert).unwrap();
        let target = &f - &SparsePoly::constant(cert.bound);
        let back = reassemble(&terms, false);
        // same yardstick as verify: relative to the size of f − bound
        let scale = 1.0 + target.max_abs_coeff();
        prop_assert!(max_abs_diff(&back, &target) <= 1e-6 * scale, "{back} vs {target}");
        for t in &terms {
            prop_assert!(t.square.degree() as usize <= k);
            let deg = 2 * t.square.degree() + t.monomial.degree() + t.weight.degree();
            prop_assert!(deg <= f.degree());
        }
    }
}
