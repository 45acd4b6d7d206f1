use std::path::{Path, PathBuf};
use std::process::Command;

use socf::cones::build_bound_primal_degree;
use socf::sdp::{solve, SolverSettings};
use socf::{Interval, SparsePoly};
use socfopt::RunReport;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_socfopt"))
}

fn write_poly(dir: &Path, name: &str, terms: &[(u32, f64)]) -> PathBuf {
    let f = SparsePoly::from_terms(terms.iter().copied()).unwrap();
    let p = dir.join(name);
    std::fs::write(&p, serde_json::to_string(&f).unwrap()).unwrap();
    p
}

fn run(args: &[&str]) -> (i32, String) {
    let out = bin().args(args).output().unwrap();
    (out.status.code().unwrap(), String::from_utf8(out.stdout).unwrap())
}

fn report(args: &[&str]) -> (i32, RunReport) {
    let (code, text) = run(args);
    let r: RunReport = serde_json::from_str(&text).unwrap_or_else(|e| panic!("{e}: {text}"));
    (code, r)
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn bound_matches_oracle_on_shifted_quadratic() {
    let dir = tempfile::tempdir().unwrap();
    let f = write_poly(dir.path(), "q.json", &[(2, 1.0), (1, -2.0), (0, 3.0)]);
    let (code, r) = report(&["bound", s(&f), "--k", "1", "--interval", "R+", "--compare-oracle"]);
    assert_eq!(code, 0);
    assert!((r.bound.unwrap() - 2.0).abs() <= 1e-6);
    let o = r.oracle.unwrap();
    assert_eq!(o.min_value, Some(2.0));
    assert!(o.gap.unwrap() <= 1e-6);
    assert_eq!(r.schema, "socfopt/1");
}

#[test]
fn bound_of_polynomial_with_double_root_is_zero() {
    let dir = tempfile::tempdir().unwrap();
    let f = write_poly(dir.path(), "f.json", &[(4, 3.0), (3, -4.0), (0, 1.0)]);
    let (code, r) = report(&["bound", s(&f), "--k", "1", "--interval", "R+"]);
    assert_eq!(code, 0);
    assert!(r.bound.unwrap().abs() <= 1e-6);
    let (code, r) = report(&["bound", s(&f), "--k", "1", "--dual"]);
    assert_eq!(code, 0);
    assert!(r.bound.unwrap().abs() <= 1e-6);
}

#[test]
fn odd_polynomial_on_the_line_is_unbounded() {
    let dir = tempfile::tempdir().unwrap();
    let f = write_poly(dir.path(), "t.json", &[(1, 1.0)]);
    let (code, r) = report(&["bound", s(&f), "--interval", "R"]);
    assert_eq!(code, 0);
    assert_eq!(r.message.as_deref(), Some("unbounded below"));
    assert_eq!(r.bound, None);
}

#[test]
fn report_round_trips_through_json() {
    let dir = tempfile::tempdir().unwrap();
    let f = write_poly(dir.path(), "f.json", &[(9, 1.3), (4, -2.7), (0, 0.4)]);
    let out = dir.path().join("report.json");
    let (code, text) = run(&["bound", s(&f), "--compare-oracle", "--certify", "--out", s(&out)]);
    assert_eq!(code, 0);
    let r: RunReport = serde_json::from_str(&text).unwrap();
    assert_eq!(r.to_json(), text.trim_end());
    let again: RunReport = serde_json::from_str(&r.to_json()).unwrap();
    assert_eq!(again, r);
    let saved: RunReport = serde_json::from_str(&std::fs::read_to_string(&out).unwrap()).unwrap();
    assert_eq!(saved, r);
}

#[test]
fn certificates_from_bound_are_accepted_by_verify() {
    let dir = tempfile::tempdir().unwrap();
    let cases: &[(&[(u32, f64)], &str)] = &[
        (&[(4, 3.0), (3, -4.0), (0, 1.0)], "R+"),
        (&[(6, 1.0), (5, -3.0), (2, 1.0), (0, 2.0)], "R+"),
        (&[(7, 2.0), (3, -5.0), (0, 1.0)], "[0,1]"),
        (&[(5, 1.0), (2, -4.0), (0, 3.0)], "[1,3]"),
        (&[(4, 1.0), (1, -3.0), (0, 1.0)], "R"),
        (&[(8, 1.0), (5, -2.0), (1, 1.0)], "[2,inf)"),
    ];
    for (i, (terms, iv)) in cases.iter().enumerate() {
        let f = write_poly(dir.path(), &format!("f{i}.json"), terms);
        let cert = dir.path().join(format!("c{i}.json"));
        let (code, r) = report(&["bound", s(&f), "--interval", iv, "--certify", "--cert-out", s(&cert)]);
        assert_eq!(code, 0, "{terms:?} on {iv}");
        assert!(r.certificate.as_ref().unwrap().verification.ok);
        let (code, v) = report(&["certify", "verify", "--poly", s(&f), "--cert", s(&cert)]);
        assert_eq!(code, 0, "{terms:?} on {iv}");
        assert_eq!(v.status, "accepted");
    }
}

#[test]
fn tampered_certificate_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let f = write_poly(dir.path(), "f.json", &[(4, 3.0), (3, -4.0), (0, 1.0)]);
    let g = write_poly(dir.path(), "g.json", &[(4, 3.0), (3, -4.0), (0, 2.0)]);
    let cert = dir.path().join("c.json");
    let (code, _) = run(&["bound", s(&f), "--certify", "--cert-out", s(&cert)]);
    assert_eq!(code, 0);
    let (code, v) = report(&["certify", "verify", "--poly", s(&g), "--cert", s(&cert)]);
    assert_eq!(code, 1);
    assert_eq!(v.status, "rejected");
}

#[test]
fn membership_with_restricted_shifts() {
    let dir = tempfile::tempdir().unwrap();
    let f = write_poly(dir.path(), "f.json", &[(4, 3.0), (3, -4.0), (0, 1.0)]);
    let (code, r) = report(&["certify", "membership", s(&f), "--k", "1", "--shifts", "0,2"]);
    assert_eq!(code, 4);
    assert_eq!(r.status, "infeasible");
    let cert = dir.path().join("m.json");
    let (code, r) = report(&["certify", "membership", s(&f), "--k", "1", "--shifts", "0,1,2", "--cert-out", s(&cert)]);
    assert_eq!(code, 0);
    assert!(r.certificate.unwrap().verification.ok);
    let (code, shape) = report(&["certify", "shape", "--cert", s(&cert)]);
    assert_eq!(code, 0);
    assert!(!shape.output.unwrap()["terms"].as_array().unwrap().is_empty());
}

#[test]
fn export_then_solve_reproduces_optimum() {
    let dir = tempfile::tempdir().unwrap();
    let cases: &[(&[(u32, f64)], &str)] = &[
        (&[(4, 3.0), (3, -4.0), (0, 1.0)], "R+"),
        (&[(6, 1.0), (3, -2.0), (1, 0.5), (0, 1.0)], "R+"),
        (&[(5, 1.0), (2, -1.5), (0, 0.2)], "[0,1]"),
        (&[(18, 0.1), (17, -1.3)], "[1,3]"),
        (&[(6, 1.0), (1, -3.0), (0, 1.0)], "R"),
    ];
    for (i, (terms, iv)) in cases.iter().enumerate() {
        let f = write_poly(dir.path(), &format!("f{i}.json"), terms);
        let file = dir.path().join(format!("p{i}.dat-s"));
        let (code, _) = report(&["export", s(&f), s(&file), "--interval", iv]);
        assert_eq!(code, 0);
        let (code, b) = report(&["bound", s(&f), "--interval", iv]);
        assert_eq!(code, 0);
        let bound = b.bound.unwrap();
        let (code, r) = report(&["solve", s(&file)]);
        assert_eq!(code, 0, "{terms:?} on {iv}");
        let imported = r.output.unwrap()["optimum"].as_f64().unwrap();
        assert!((imported - bound).abs() <= 1e-7 * (1.0 + bound.abs()), "{imported} vs {bound}");
    }
}

#[test]
fn unscaled_export_matches_direct_solve() {
    let dir = tempfile::tempdir().unwrap();
    let terms = [(6, 1.0), (3, -2.0), (1, 0.5), (0, 1.0)];
    let f = write_poly(dir.path(), "f.json", &terms);
    let file = dir.path().join("p.dat-s");
    let (code, r) = report(&["export", s(&f), s(&file), "--no-rescale"]);
    assert_eq!(code, 0);
    let poly = SparsePoly::from_terms(terms).unwrap();
    let problem = build_bound_primal_degree(&poly, r.k.unwrap(), r.d.unwrap(), &Interval::HalfLine).unwrap();
    let direct = solve(&problem, &SolverSettings::default()).unwrap();
    let (code, r) = report(&["solve", s(&file)]);
    assert_eq!(code, 0);
    let imported = r.output.unwrap()["optimum"].as_f64().unwrap();
    assert!((imported - direct.primal_value).abs() <= 1e-7, "{imported} vs {}", direct.primal_value);
}

#[test]
fn bad_input_exits_with_parse_code() {
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.json");
    std::fs::write(&bad, "{\"terms\": [ {\"exp\": 1} ]}").unwrap();
    assert_eq!(run(&["bound", s(&bad)]).0, 2);
    let dup = dir.path().join("dup.json");
    std::fs::write(&dup, r#"{"terms":[{"exp":1,"coef":1},{"exp":1,"coef":2}]}"#).unwrap();
    assert_eq!(run(&["bound", s(&dup)]).0, 2);
    let f = write_poly(dir.path(), "f.json", &[(2, 1.0), (0, 1.0)]);
    assert_eq!(run(&["bound", s(&f), "--interval", "[3,1]"]).0, 2);
    assert_eq!(run(&["bound", s(&f), "--k", "0"]).0, 2);
    assert_eq!(run(&["bound", s(&dir.path().join("missing.json"))]).0, 2);
}

#[test]
fn xray_reports_verified_factorization() {
    let (code, r) = report(&["xray", "--mu", "5,2,0", "--roots", "1:2"]);
    assert_eq!(code, 0);
    let out = r.output.unwrap();
    assert!(out["factorization_residual"].as_f64().unwrap() <= 1e-8);
    assert_eq!(out["positive_roots"], 2);
    assert_eq!(out["extremal_root_count"], true);
}

#[test]
fn oracle_and_moments_commands() {
    let dir = tempfile::tempdir().unwrap();
    let f = write_poly(dir.path(), "f.json", &[(4, 3.0), (3, -4.0), (0, 1.0)]);
    let (code, r) = report(&["oracle", s(&f)]);
    assert_eq!(code, 0);
    assert_eq!(r.oracle.unwrap().min_value, Some(0.0));
    let (code, r) = report(&["moments", s(&f), "--k", "1"]);
    assert_eq!(code, 0);
    let m = r.output.unwrap()["moments"].as_array().unwrap().clone();
    assert_eq!(m.len(), 5);
    // the minimizer is t = 1, so the moments are close to 1
    assert!(m.iter().all(|v| (v.as_f64().unwrap() - 1.0).abs() < 1e-3));
}
