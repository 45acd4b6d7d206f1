use clap::Parser;
use proptest::prelude::*;
use socf::SparsePoly;
use socfopt::{execute, Cli, RunReport};

fn exec(args: &[&str]) -> (i32, RunReport) {
    let argv: Vec<String> = std::iter::once("socfopt").chain(args.iter().copied()).map(String::from).collect();
    let cli = Cli::try_parse_from(&argv).unwrap();
    execute(&cli, argv[1..].to_vec())
}

fn sparse_poly() -> impl Strategy<Value = SparsePoly> {
    (1u32..=24, prop::collection::btree_map(1u32..24, -10.0f64..10.0, 0..4), -10.0f64..10.0, 0.1f64..10.0)
        .prop_map(|(d, mid, c0, lead)| {
            let mut terms: Vec<(u32, f64)> = mid.into_iter().filter(|&(e, _)| e < d).collect();
            terms.push((0, c0));
            terms.push((d, lead));
            SparsePoly::from_terms(terms).unwrap()
        })
}

fn interval() -> impl Strategy<Value = &'static str> {
    prop::sample::select(vec!["R+", "[0,1]", "[1,3]"])
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn certified_bounds_pass_verification(f in sparse_poly(), iv in interval()) {
        let dir = tempfile::tempdir().unwrap();
        let poly = dir.path().join("f.json");
        std::fs::write(&poly, serde_json::to_string(&f).unwrap()).unwrap();
        let cert = dir.path().join("c.json");
        let (code, r) = exec(&["bound", poly.to_str().unwrap(), "--interval", iv, "--certify", "--cert-out", cert.to_str().unwrap()]);
        prop_assume!(code == 0 && r.certificate.is_some());
        let (code, v) = exec(&["certify", "verify", "--poly", poly.to_str().unwrap(), "--cert", cert.to_str().unwrap()]);
        prop_assert_eq!(code, 0, "{:?}", v);
        prop_assert_eq!(v.status.as_str(), "accepted");
    }

    #[test]
    fn exported_problem_solves_to_same_optimum(f in sparse_poly(), iv in interval()) {
        let dir = tempfile::tempdir().unwrap();
        let poly = dir.path().join("f.json");
        std::fs::write(&poly, serde_json::to_string(&f).unwrap()).unwrap();
        let file = dir.path().join("p.dat-s");
        let (code, r) = exec(&["export", poly.to_str().unwrap(), file.to_str().unwrap(), "--interval", iv]);
        prop_assert_eq!(code, 0);
        let (code, b) = exec(&["bound", poly.to_str().unwrap(), "--interval", iv, "--k", &r.k.unwrap().to_string()]);
        prop_assert_eq!(code, 0);
        let bound = b.bound.unwrap();
        let (code, r) = exec(&["solve", file.to_str().unwrap()]);
        prop_assert_eq!(code, 0);
        let imported = r.output.unwrap()["optimum"].as_f64().unwrap();
        prop_assert!((imported - bound).abs() <= 1e-7 * (1.0 + bound.abs()), "{imported} vs {bound}");
    }
}
