//! Implementation of the `socfopt` command-line tool.
//!
//! Every subcommand produces a [`RunReport`] that is printed to stdout as
//! JSON (and optionally written to `--out`). Exit codes: 0 success, 1 a
//! certificate was rejected or an output file could not be written, 2 bad
//! input, 3 the solver ran into numerical trouble, 4 a membership problem
//! is infeasible.

pub mod report;

use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Args, Parser, Subcommand};
use serde_json::json;
use socf::certify::{theorem_shape, verify, verify_exact, GramCertificate};
use socf::cones::{
    build_banded_bound, build_bound_primal_degree, build_full_line_joint, build_membership_degree,
    build_membership_with_shifts, build_moment_dual, BlockSdp,
};
use socf::relax::{
    choose_scaling, lower_bound, membership, scale_interval, BoundOptions, BoundStatus, Formulation,
};
use socf::schur::Partition;
use socf::sdp::{solve, SolveStatus, SolverSettings};
use socf::sdpa::{read_sdpa, write_sdpa};
use socf::xray::{extreme_ray_from_roots, ray_positive_roots, verify_extreme_factorization, RootPattern};
use socf::{Interval, SparsePoly};

pub use report::RunReport;

type Result<T> = std::result::Result<T, Failure>;
use report::{finite, to_rounded_json, CertificateRef, OracleComparison, SolverRecord};

pub const EXIT_OK: i32 = 0;
pub const EXIT_REJECTED: i32 = 1;
pub const EXIT_USAGE: i32 = 2;
pub const EXIT_NUMERICAL: i32 = 3;
pub const EXIT_INFEASIBLE: i32 = 4;

#[derive(Debug, Parser)]
#[command(name = "socfopt", version, about = "Certified lower bounds and sums-of-squares certificates for sparse univariate polynomials")]
pub struct Cli {
    /// Also write the JSON report to this file.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Lower bound of a polynomial on an interval.
    Bound(BoundArgs),
    /// Membership certificates and their checking.
    #[command(subcommand)]
    Certify(CertifyCommand),
    /// Pseudo-moments from the moment formulation.
    Moments(ProblemArgs),
    /// Exact global minimum and real roots.
    Oracle(OracleArgs),
    /// Write a relaxation in SDPA sparse format.
    Export(ExportArgs),
    /// Solve a problem given in SDPA sparse format.
    Solve(SolveArgs),
    /// Extreme ray with prescribed positive roots.
    Xray(XrayArgs),
}

#[derive(Debug, Args)]
pub struct ProblemArgs {
    /// Polynomial JSON file (`{"terms":[{"exp":..,"coef":..},..]}`), `-` for stdin.
    pub poly: PathBuf,
    /// Sparsity parameter; defaults to the smallest exact one for the support.
    #[arg(long)]
    pub k: Option<usize>,
    /// Interval: `R+`, `R`, `[0,1]`, `[a,b]` or `[a,inf)`.
    #[arg(long, default_value = "R+")]
    pub interval: Interval,
    /// Degree of the relaxation (at least the degree of the polynomial).
    #[arg(long)]
    pub d: Option<usize>,
    /// Solver gap and feasibility tolerance.
    #[arg(long, default_value_t = 1e-8)]
    pub tol: f64,
    #[arg(long, default_value_t = 200)]
    pub max_iter: usize,
}

impl ProblemArgs {
    fn settings(&self) -> SolverSettings {
        SolverSettings {
            gap_tol: self.tol,
            feas_tol: self.tol,
            max_iter: self.max_iter,
        }
    }
}

#[derive(Debug, Args)]
pub struct BoundArgs {
    #[command(flatten)]
    pub problem: ProblemArgs,
    /// Solve the moment formulation instead of the sos one.
    #[arg(long, conflicts_with = "banded")]
    pub dual: bool,
    /// Solve the single banded-matrix formulation.
    #[arg(long)]
    pub banded: bool,
    /// Compare with the exact oracle minimum.
    #[arg(long)]
    pub compare_oracle: bool,
    /// Extract and check a Gram certificate.
    #[arg(long)]
    pub certify: bool,
    /// Where to write the certificate (default: inline in the report).
    #[arg(long, requires = "certify")]
    pub cert_out: Option<PathBuf>,
}

#[derive(Debug, Subcommand)]
pub enum CertifyCommand {
    /// Decide membership in the cone and emit a certificate.
    Membership(MembershipArgs),
    /// Check a certificate against a polynomial.
    Verify(VerifyArgs),
    /// Present a certificate as weighted squares.
    Shape(ShapeArgs),
}

#[derive(Debug, Args)]
pub struct MembershipArgs {
    #[command(flatten)]
    pub problem: ProblemArgs,
    /// Only use these shifts of the chain (comma separated, half-line only).
    #[arg(long, value_delimiter = ',')]
    pub shifts: Option<Vec<u32>>,
    #[arg(long)]
    pub cert_out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct VerifyArgs {
    #[arg(long)]
    pub poly: PathBuf,
    #[arg(long)]
    pub cert: PathBuf,
    /// Use the rational checker.
    #[arg(long)]
    pub exact: bool,
}

#[derive(Debug, Args)]
pub struct ShapeArgs {
    #[arg(long)]
    pub cert: PathBuf,
}

#[derive(Debug, Args)]
pub struct OracleArgs {
    pub poly: PathBuf,
    #[arg(long, default_value = "R+")]
    pub interval: Interval,
    /// Companion-matrix roots instead of exact isolation.
    #[arg(long)]
    pub numeric: bool,
}

#[derive(Debug, Args)]
pub struct ExportArgs {
    #[command(flatten)]
    pub problem: ProblemArgs,
    /// Destination `.dat-s` file.
    pub output: PathBuf,
    #[arg(long, conflicts_with_all = ["banded", "membership"])]
    pub dual: bool,
    #[arg(long, conflicts_with = "membership")]
    pub banded: bool,
    /// Export the membership problem instead of the bound problem.
    #[arg(long)]
    pub membership: bool,
    /// Write the problem for the polynomial as given. By default the
    /// variable and coefficients are rescaled as for `bound`, with the
    /// objective scaled back so the optimum is unchanged.
    #[arg(long)]
    pub no_rescale: bool,
}

#[derive(Debug, Args)]
pub struct SolveArgs {
    /// SDPA sparse file.
    pub file: PathBuf,
    #[arg(long, default_value_t = 1e-8)]
    pub tol: f64,
    #[arg(long, default_value_t = 200)]
    pub max_iter: usize,
}

#[derive(Debug, Args)]
pub struct XrayArgs {
    /// Exponents `m_0 > ... > m_n >= 0`, comma separated.
    #[arg(long, value_delimiter = ',', required = true)]
    pub mu: Vec<u32>,
    /// Positive roots as `location:multiplicity`, comma separated.
    #[arg(long, value_delimiter = ',', required = true)]
    pub roots: Vec<String>,
}

/// A command that could not produce a regular report.
#[derive(Debug)]
pub struct Failure {
    pub code: i32,
    pub message: String,
}

impl Failure {
    fn usage(message: impl Into<String>) -> Self {
        Failure {
            code: EXIT_USAGE,
            message: message.into(),
        }
    }

    fn unreadable(path: &Path, e: std::io::Error) -> Self {
        Failure::usage(format!("{}: {e}", path.display()))
    }

    fn io(path: &Path, e: std::io::Error) -> Self {
        Failure {
            code: EXIT_REJECTED,
            message: format!("{}: {e}", path.display()),
        }
    }
}

impl From<socf::Error> for Failure {
    fn from(e: socf::Error) -> Self {
        let code = match e {
            socf::Error::NotCertifiable(_) => EXIT_NUMERICAL,
            _ => EXIT_USAGE,
        };
        Failure {
            code,
            message: e.to_string(),
        }
    }
}

fn read_text(path: &Path) -> Result<String> {
    if path.as_os_str() == "-" {
        let mut s = String::new();
        std::io::Read::read_to_string(&mut std::io::stdin(), &mut s).map_err(|e| Failure::unreadable(path, e))?;
        return Ok(s);
    }
    std::fs::read_to_string(path).map_err(|e| Failure::unreadable(path, e))
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    std::fs::write(path, text).map_err(|e| Failure::io(path, e))
}

pub fn read_poly(path: &Path) -> Result<SparsePoly> {
    let text = read_text(path)?;
    let f: SparsePoly =
        serde_json::from_str(&text).map_err(|e| Failure::usage(format!("{}: {e}", path.display())))?;
    if f.is_zero() {
        return Err(Failure::usage("zero polynomial"));
    }
    Ok(f)
}

fn read_certificate(path: &Path) -> Result<GramCertificate> {
    let text = read_text(path)?;
    serde_json::from_str(&text).map_err(|e| Failure::usage(format!("{}: {e}", path.display())))
}

fn ms(t: Instant) -> f64 {
    t.elapsed().as_secs_f64() * 1e3
}

/// Writes the certificate to `path` (or inlines it in the payload) and
/// returns its reference.
fn store_certificate(
    cert: &GramCertificate,
    f: &SparsePoly,
    path: Option<&Path>,
    payload: &mut serde_json::Map<String, serde_json::Value>,
) -> Result<CertificateRef> {
    // the certificate is checked in the form it is written
    let written: GramCertificate = serde_json::from_str(&to_rounded_json(cert)).expect("certificate JSON");
    let verification = verify(&written, f);
    match path {
        Some(p) => write_text(p, &to_rounded_json(&written))?,
        None => {
            payload.insert("certificate".into(), serde_json::to_value(&written).expect("certificate JSON"));
        }
    }
    Ok(CertificateRef {
        path: path.map(|p| p.display().to_string()),
        bound: written.bound,
        parts: written.parts.len(),
        max_gram_size: written.max_gram_size(),
        verification,
    })
}

fn cmd_bound(args: &BoundArgs, report: &mut RunReport) -> Result<i32> {
    let p = &args.problem;
    let f = read_poly(&p.poly)?;
    let formulation = if args.dual {
        Formulation::MomentDual
    } else if args.banded {
        Formulation::Banded
    } else {
        Formulation::Primal
    };
    let opts = BoundOptions {
        k: p.k,
        d: p.d,
        formulation,
        settings: p.settings(),
        ..Default::default()
    };
    report.input = Some(f.clone());
    report.interval = Some(p.interval);
    report.formulation = Some(formulation);
    let t = Instant::now();
    let r = lower_bound(&f, &p.interval, &opts)?;
    report.timings.solve_ms = ms(t);
    report.k = Some(r.k);
    report.d = Some(r.d);
    report.solver = r.solves.iter().map(SolverRecord::from).collect();
    report.status = serde_json::to_value(r.status)
        .ok()
        .and_then(|v| v.as_str().map(String::from))
        .unwrap_or_default();
    let mut payload = serde_json::Map::new();
    payload.insert("exact_by_sparsity".into(), json!(r.exact_by_sparsity));
    let code = match r.status {
        BoundStatus::Optimal | BoundStatus::NearOptimal => {
            report.bound = finite(r.bound);
            EXIT_OK
        }
        BoundStatus::UnboundedBelow => {
            report.message = Some("unbounded below".into());
            EXIT_OK
        }
        BoundStatus::Infeasible | BoundStatus::NumericalTrouble => {
            report.message = Some("the solver did not reach the requested accuracy".into());
            EXIT_NUMERICAL
        }
    };
    if args.compare_oracle {
        let t = Instant::now();
        let o = socf::oracle::global_min(&f, &p.interval)?;
        report.timings.oracle_ms = ms(t);
        let min_value = finite(o.min_value);
        let gap = match (report.bound, min_value) {
            (Some(b), Some(m)) => Some((b - m).abs()),
            _ => None,
        };
        report.oracle = Some(OracleComparison {
            min_value,
            argmin: o.argmin,
            gap,
        });
    }
    if args.certify && code == EXIT_OK {
        match &r.certificate {
            Some(cert) => {
                report.certificate = Some(store_certificate(cert, &f, args.cert_out.as_deref(), &mut payload)?);
            }
            None if r.status == BoundStatus::UnboundedBelow => {}
            None => {
                report.message = Some("no certificate could be extracted".into());
            }
        }
    }
    if let Some(m) = r.moments {
        payload.insert("moments".into(), json!(m.v));
    }
    report.output = Some(serde_json::Value::Object(payload));
    Ok(code)
}

fn cmd_membership(args: &MembershipArgs, report: &mut RunReport) -> Result<i32> {
    let p = &args.problem;
    let f = read_poly(&p.poly)?;
    report.input = Some(f.clone());
    report.interval = Some(p.interval);
    let t = Instant::now();
    let (status, cert) = match &args.shifts {
        Some(shifts) => {
            let k = p.k.unwrap_or_else(|| socf::relax::default_k(&f));
            let problem = build_membership_with_shifts(&f, k, &p.interval, shifts)?;
            let sol = solve(&problem, &p.settings())?;
            report.k = Some(k);
            report.d = Some(f.degree() as usize);
            report.solver = vec![SolverRecord::from_solution(&problem, &sol)];
            let cert = match sol.status {
                SolveStatus::Optimal => match socf::certify::extract(&sol, &problem) {
                    Ok(c) => Some(c),
                    Err(socf::Error::NotCertifiable(_)) => None,
                    Err(e) => return Err(e.into()),
                },
                _ => None,
            };
            (sol.status, cert)
        }
        None => {
            let opts = BoundOptions {
                k: p.k,
                d: p.d,
                settings: p.settings(),
                ..Default::default()
            };
            let r = membership(&f, &p.interval, &opts)?;
            report.k = Some(r.k);
            report.d = Some(r.d);
            report.solver = r.solves.iter().map(SolverRecord::from).collect();
            (r.status, r.certificate)
        }
    };
    report.timings.solve_ms = ms(t);
    let mut payload = serde_json::Map::new();
    let code = match status {
        SolveStatus::Optimal => {
            report.status = "optimal".into();
            match &cert {
                Some(c) => {
                    report.certificate = Some(store_certificate(c, &f, args.cert_out.as_deref(), &mut payload)?);
                    EXIT_OK
                }
                None => {
                    report.message = Some("no certificate could be extracted".into());
                    EXIT_NUMERICAL
                }
            }
        }
        SolveStatus::Infeasible | SolveStatus::Unbounded => {
            report.status = "infeasible".into();
            report.message = Some("the polynomial is not in the cone".into());
            EXIT_INFEASIBLE
        }
        SolveStatus::NumericalTrouble => {
            report.status = "numerical_trouble".into();
            EXIT_NUMERICAL
        }
    };
    report.output = Some(serde_json::Value::Object(payload));
    Ok(code)
}

fn cmd_verify(args: &VerifyArgs, report: &mut RunReport) -> Result<i32> {
    let f = read_poly(&args.poly)?;
    let cert = read_certificate(&args.cert)?;
    let v = if args.exact {
        verify_exact(&cert, &f)
    } else {
        verify(&cert, &f)
    };
    report.input = Some(f);
    report.interval = Some(cert.interval);
    report.bound = Some(cert.bound);
    report.certificate = Some(CertificateRef {
        path: Some(args.cert.display().to_string()),
        bound: cert.bound,
        parts: cert.parts.len(),
        max_gram_size: cert.max_gram_size(),
        verification: v,
    });
    report.status = if v.ok { "accepted" } else { "rejected" }.into();
    Ok(if v.ok { EXIT_OK } else { EXIT_REJECTED })
}

fn cmd_shape(args: &ShapeArgs, report: &mut RunReport) -> Result<i32> {
    let cert = read_certificate(&args.cert)?;
    let terms = theorem_shape(&cert)?;
    report.interval = Some(cert.interval);
    report.bound = Some(cert.bound);
    report.output = Some(json!({ "terms": terms }));
    Ok(EXIT_OK)
}

fn cmd_moments(p: &ProblemArgs, report: &mut RunReport) -> Result<i32> {
    let f = read_poly(&p.poly)?;
    let opts = BoundOptions {
        k: p.k,
        d: p.d,
        formulation: Formulation::MomentDual,
        settings: p.settings(),
        ..Default::default()
    };
    report.input = Some(f.clone());
    report.interval = Some(p.interval);
    report.formulation = Some(Formulation::MomentDual);
    let t = Instant::now();
    let r = lower_bound(&f, &p.interval, &opts)?;
    report.timings.solve_ms = ms(t);
    report.k = Some(r.k);
    report.d = Some(r.d);
    report.solver = r.solves.iter().map(SolverRecord::from).collect();
    report.status = serde_json::to_value(r.status)
        .ok()
        .and_then(|v| v.as_str().map(String::from))
        .unwrap_or_default();
    report.bound = finite(r.bound);
    let code = match r.status {
        BoundStatus::Optimal | BoundStatus::NearOptimal => EXIT_OK,
        BoundStatus::UnboundedBelow => {
            report.message = Some("unbounded below".into());
            EXIT_OK
        }
        _ => EXIT_NUMERICAL,
    };
    if let Some(m) = r.moments {
        report.output = Some(json!({ "moments": m.v }));
    }
    Ok(code)
}

fn cmd_oracle(args: &OracleArgs, report: &mut RunReport) -> Result<i32> {
    let f = read_poly(&args.poly)?;
    let t = Instant::now();
    let o = if args.numeric {
        socf::oracle::global_min_numeric(&f, &args.interval)?
    } else {
        socf::oracle::global_min(&f, &args.interval)?
    };
    report.timings.oracle_ms = ms(t);
    report.input = Some(f);
    report.interval = Some(args.interval);
    if !o.min_value.is_finite() {
        report.message = Some("unbounded below".into());
    }
    report.oracle = Some(OracleComparison {
        min_value: finite(o.min_value),
        argmin: o.argmin,
        gap: None,
    });
    report.output = Some(json!({
        "roots": o.roots.iter().map(|&(t, m)| json!({"t": t, "multiplicity": m})).collect::<Vec<_>>(),
    }));
    Ok(EXIT_OK)
}

fn export_problem(args: &ExportArgs, f: &SparsePoly, k: usize, d: usize, iv: &Interval) -> socf::Result<BlockSdp> {
    if args.membership {
        build_membership_degree(f, k, d, iv)
    } else if args.dual {
        build_moment_dual(f, k, d, iv)
    } else if args.banded {
        build_banded_bound(f, k)
    } else if *iv == Interval::FullLine {
        build_full_line_joint(f, k, d)
    } else {
        build_bound_primal_degree(f, k, d, iv)
    }
}

/// `(ρ, c)` for the exported problem; on the real line one pair covers
/// both `f(t)` and `f(−t)`.
fn export_scaling(f: &SparsePoly, iv: &Interval) -> (f64, f64) {
    if *iv == Interval::FullLine {
        let (r1, c1) = choose_scaling(f, &Interval::HalfLine);
        let (r2, c2) = choose_scaling(&f.reflect(), &Interval::HalfLine);
        (r1.max(r2), c1.min(c2))
    } else {
        choose_scaling(f, iv)
    }
}

fn cmd_export(args: &ExportArgs, report: &mut RunReport) -> Result<i32> {
    let p = &args.problem;
    let f = read_poly(&p.poly)?;
    let k = p.k.unwrap_or_else(|| socf::relax::default_k(&f));
    let d = p.d.unwrap_or_else(|| (f.degree() as usize).max(2 * k));
    p.interval.validate()?;
    let (rho, c) = if args.no_rescale {
        (1.0, 1.0)
    } else {
        export_scaling(&f, &p.interval)
    };
    let g = f.rescale_variable(rho).scale(1.0 / c);
    let mut problem = export_problem(args, &g, k, d, &scale_interval(&p.interval, rho))?;
    // the optimum of the scaled problem is the one for f divided by c
    for e in &mut problem.objective.entries {
        e.coef *= c;
    }
    for sc in &mut problem.objective.scalars {
        sc.1 *= c;
    }
    problem.objective_constant *= c;
    let text = write_sdpa(&problem)?;
    write_text(&args.output, &text)?;
    report.input = Some(f);
    report.interval = Some(p.interval);
    report.k = Some(k);
    report.d = Some(d);
    report.output = Some(json!({
        "file": args.output.display().to_string(),
        "blocks": problem.blocks.len(),
        "max_block_size": problem.max_block_size(),
        "scalars": problem.scalars.len(),
        "constraints": problem.constraints.len(),
        "variable_scale": rho,
        "coefficient_scale": c,
    }));
    Ok(EXIT_OK)
}

fn cmd_solve(args: &SolveArgs, report: &mut RunReport) -> Result<i32> {
    let text = read_text(&args.file)?;
    let problem = read_sdpa(&text)?;
    let settings = SolverSettings {
        gap_tol: args.tol,
        feas_tol: args.tol,
        max_iter: args.max_iter,
    };
    let t = Instant::now();
    let sol = solve(&problem, &settings)?;
    report.timings.solve_ms = ms(t);
    report.solver = vec![SolverRecord::from_solution(&problem, &sol)];
    report.status = serde_json::to_value(sol.status)
        .ok()
        .and_then(|v| v.as_str().map(String::from))
        .unwrap_or_default();
    let code = match sol.status {
        SolveStatus::Optimal => {
            report.output = Some(json!({ "optimum": sol.primal_value, "scalars": sol.scalar_values }));
            EXIT_OK
        }
        SolveStatus::Infeasible => {
            report.message = Some("infeasible".into());
            EXIT_INFEASIBLE
        }
        SolveStatus::Unbounded => {
            report.message = Some("unbounded".into());
            EXIT_OK
        }
        SolveStatus::NumericalTrouble => EXIT_NUMERICAL,
    };
    Ok(code)
}

fn parse_roots(items: &[String]) -> Result<RootPattern> {
    let mut roots = Vec::with_capacity(items.len());
    for it in items {
        let (x, m) = it
            .split_once(':')
            .ok_or_else(|| Failure::usage(format!("root '{it}' is not location:multiplicity")))?;
        let x: f64 = x.trim().parse().map_err(|_| Failure::usage(format!("bad root location '{x}'")))?;
        let m: u32 = m.trim().parse().map_err(|_| Failure::usage(format!("bad multiplicity '{m}'")))?;
        roots.push((x, m));
    }
    Ok(RootPattern::new(roots)?)
}

fn cmd_xray(args: &XrayArgs, report: &mut RunReport) -> Result<i32> {
    let mu = Partition::new(args.mu.clone())?;
    let pattern = parse_roots(&args.roots)?;
    let ray = extreme_ray_from_roots(&mu, &pattern)?;
    let residual = verify_extreme_factorization(&ray, &mu, &pattern)?;
    let roots = ray_positive_roots(&mu, &pattern)?;
    let extremal = roots as usize + 1 >= mu.len();
    report.input = Some(ray.clone());
    report.interval = Some(Interval::HalfLine);
    report.output = Some(json!({
        "ray": ray,
        "factorization_residual": residual,
        "positive_roots": roots,
        "extremal_root_count": extremal,
    }));
    Ok(EXIT_OK)
}

/// Runs a parsed command line; `argv` is echoed into the report.
pub fn execute(cli: &Cli, argv: Vec<String>) -> (i32, RunReport) {
    let start = Instant::now();
    let mut report = RunReport::new(argv);
    let result = match &cli.command {
        Command::Bound(a) => cmd_bound(a, &mut report),
        Command::Certify(CertifyCommand::Membership(a)) => cmd_membership(a, &mut report),
        Command::Certify(CertifyCommand::Verify(a)) => cmd_verify(a, &mut report),
        Command::Certify(CertifyCommand::Shape(a)) => cmd_shape(a, &mut report),
        Command::Moments(a) => cmd_moments(a, &mut report),
        Command::Oracle(a) => cmd_oracle(a, &mut report),
        Command::Export(a) => cmd_export(a, &mut report),
        Command::Solve(a) => cmd_solve(a, &mut report),
        Command::Xray(a) => cmd_xray(a, &mut report),
    };
    let code = match result {
        Ok(code) => code,
        Err(e) => {
            report.status = "error".into();
            report.message = Some(e.message);
            e.code
        }
    };
    report.timings.total_ms = ms(start);
    (code, report.rounded())
}

/// Parses `args` (program name first), runs the command, prints the report
/// and writes `--out`. Returns the process exit code.
pub fn run(args: Vec<String>) -> i32 {
    let cli = match Cli::try_parse_from(&args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
        }
    };
    let (mut code, report) = execute(&cli, args.into_iter().skip(1).collect());
    let text = report.to_json();
    {
        use std::io::Write;
        // a closed pipe is not an error of the command
        let _ = writeln!(std::io::stdout(), "{text}");
    }
    if let Some(msg) = &report.message {
        if code != EXIT_OK {
            eprintln!("socfopt: {msg}");
        }
    }
    if let Some(path) = &cli.out {
        if let Err(e) = std::fs::write(path, &text) {
            eprintln!("socfopt: {}: {e}", path.display());
            if code == EXIT_OK {
                code = EXIT_REJECTED;
            }
        }
    }
    code
}
