//! `aderdg`: tableau generation, verification, integration, convergence
//! studies and stability probing from the command line.

mod config;

use std::fmt::Write as _;
use std::fs;
use std::path::PathBuf;
use std::process::ExitCode;
use std::sync::Arc;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use aderdg::analysis::{convergence_study, AnalysisError, ErrorOptions, StudyOptions, TableFormat, VectorNorm};
use aderdg::arith::{Complex, PrecisionContext, Real};
use aderdg::basis::{check_conditioning, NodeFamily};
use aderdg::problems::{lookup, parse_lambda, ProblemError, ReferenceKind};
use aderdg::solver::{export_trajectory, integrate, Grid, SolverConfig, TrajectoryFormat};
use aderdg::tableau::{
    export_tableau, import_tableau, pade_exp, sample_disc, stability_function, verify_tableau, AderDgTableau,
    VerificationReport, DEFAULT_SAMPLE_SEED,
};

use config::{Settings, CONFIG_ENV};

const EXIT_USAGE: u8 = 1;
const EXIT_VERIFY: u8 = 2;
const EXIT_SOLVER: u8 = 3;
const EXIT_ANALYSIS: u8 = 4;

#[derive(Parser, Debug)]
#[command(
    name = "aderdg",
    version,
    about = "Arbitrary-order ADER-DG time integration in arbitrary precision",
    after_help = "Exit codes: 0 success, 1 usage, 2 verification failure, 3 solver failure, 4 analysis abort.\n\
                  Set ADERDG_CONFIG to a key=value file to override max_order (default 24) and digits (default 120)."
)]
struct Cli {
    #[command(flatten)]
    common: Common,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug)]
struct Common {
    /// Working precision in decimal digits [default: 120, or `digits` from the config file]
    #[arg(long, global = true)]
    digits: Option<u32>,
    /// Write the main artifact here instead of standard output
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[arg(long, global = true, value_enum, default_value_t = Format::Table)]
    format: Format,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Table,
    Csv,
    Json,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Family {
    GaussLegendre,
    RadauRight,
    RadauLeft,
}

impl From<Family> for NodeFamily {
    fn from(f: Family) -> Self {
        match f {
            Family::GaussLegendre => NodeFamily::GaussLegendre,
            Family::RadauRight => NodeFamily::RadauRight,
            Family::RadauLeft => NodeFamily::RadauLeft,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Axis {
    /// Uniform points on [-radius, radius]
    Real,
    /// Uniform points on i[-radius, radius]
    Imaginary,
    /// Logarithmic points from -1e-2 to -1e8
    Negative,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Norm {
    Max,
    Euclidean,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Build, verify and export the tableau for one N
    Tableau {
        #[arg(short = 'N', long = "order")]
        n: usize,
        #[arg(long, value_enum, default_value_t = Family::GaussLegendre)]
        family: Family,
    },
    /// Verification matrix for N = 1..N, or re-verification of a document
    Verify {
        #[arg(short = 'N', long = "order", required_unless_present = "document")]
        n: Option<usize>,
        #[arg(long, value_enum, default_value_t = Family::GaussLegendre)]
        family: Family,
        /// Complex samples for the Padé comparison
        #[arg(long, default_value_t = 20)]
        samples: usize,
        /// Import a tableau document and re-verify it instead
        #[arg(long, conflicts_with = "n")]
        document: Option<PathBuf>,
    },
    /// Integrate a catalog problem
    Solve {
        /// harmonic, pendulum, dahlquist:<lambda>, poly:<L>:<seed>
        problem: String,
        #[arg(short = 'N', long = "order")]
        n: usize,
        /// Number of uniform intervals
        #[arg(short = 'M', required_unless_present = "nodes", conflicts_with = "nodes")]
        m: Option<usize>,
        /// Explicit grid nodes from t0 to tf; the words t0 and tf stand for the exact endpoints
        #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
        nodes: Option<Vec<String>>,
        #[arg(long, value_enum, default_value_t = Family::GaussLegendre)]
        family: Family,
        /// Dense samples of the local solution per interval
        #[arg(long, default_value_t = 0)]
        dense: usize,
    },
    /// Convergence study over lists of N and M
    Converge {
        problem: String,
        #[arg(short = 'N', long = "order", value_delimiter = ',', required = true)]
        n: Vec<usize>,
        #[arg(short = 'M', value_delimiter = ',', required = true)]
        m: Vec<usize>,
        #[arg(long, value_enum, default_value_t = Family::GaussLegendre)]
        family: Family,
        /// Worker threads (0 = one per core)
        #[arg(long, default_value_t = 0)]
        jobs: usize,
        /// Also write the raw (N, M, dt, 14 errors) rows here
        #[arg(long)]
        raw: Option<PathBuf>,
        #[arg(long, value_enum, default_value_t = Norm::Max)]
        norm: Norm,
    },
    /// Sample the stability function against the Padé approximant
    Stability {
        #[arg(short = 'N', long = "order")]
        n: usize,
        #[arg(long, value_enum, default_value_t = Family::GaussLegendre)]
        family: Family,
        /// Explicit sample points such as 1, -1e8, 2+3i
        #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
        z: Vec<String>,
        #[arg(long, value_enum)]
        axis: Option<Axis>,
        #[arg(long, default_value_t = 25)]
        count: usize,
        #[arg(long, default_value_t = 10.0)]
        radius: f64,
    },
}

/// A failed run: exit status plus message.
#[derive(Debug)]
struct Failure {
    code: u8,
    message: String,
}

impl Failure {
    fn new(code: u8, message: impl Into<String>) -> Self {
        Self {
            code,
            message: message.into(),
        }
    }
}

type CmdResult = Result<(), Failure>;

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if !e.use_stderr() => {
            let _ = e.print();
            return ExitCode::SUCCESS;
        }
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(EXIT_USAGE);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}

/// Resolved settings shared by every command.
struct Env {
    settings: Settings,
    ctx: PrecisionContext,
    out: Option<PathBuf>,
    format: Format,
}

impl Env {
    fn check_order(&self, n: usize, min: usize) -> CmdResult {
        if n < min {
            return Err(Failure::new(EXIT_USAGE, format!("N must be at least {min}")));
        }
        if n > self.settings.max_order {
            return Err(Failure::new(
                EXIT_USAGE,
                format!(
                    "N = {n} exceeds the cap of {} (raise max_order in the file named by {CONFIG_ENV})",
                    self.settings.max_order
                ),
            ));
        }
        check_conditioning(n, &self.ctx).map_err(|e| Failure::new(EXIT_USAGE, format!("{e}; raise --digits")))
    }

    fn tableau(&self, n: usize, family: Family) -> Result<AderDgTableau, Failure> {
        AderDgTableau::build(n, family.into(), &self.ctx).map_err(|e| Failure::new(EXIT_VERIFY, e.to_string()))
    }

    /// Writes the artifact to `--out` or standard output. Notes go to
    /// standard output when the artifact went to a file, else to stderr.
    fn emit(&self, artifact: &str, notes: &str) -> CmdResult {
        match &self.out {
            Some(path) => {
                fs::write(path, artifact)
                    .map_err(|e| Failure::new(EXIT_USAGE, format!("cannot write {}: {e}", path.display())))?;
                print!("{notes}");
            }
            None => {
                print!("{artifact}");
                if !artifact.ends_with('\n') {
                    println!();
                }
                eprint!("{notes}");
            }
        }
        Ok(())
    }
}

fn run(cli: Cli) -> CmdResult {
    let settings = Settings::load().map_err(|e| Failure::new(EXIT_USAGE, e))?;
    let digits = cli.common.digits.unwrap_or(settings.digits);
    let ctx = PrecisionContext::new(digits).map_err(|e| Failure::new(EXIT_USAGE, e.to_string()))?;
    let env = Env {
        settings,
        ctx,
        out: cli.common.out,
        format: cli.common.format,
    };
    match cli.command {
        Command::Tableau { n, family } => cmd_tableau(&env, n, family),
        Command::Verify {
            n,
            family,
            samples,
            document,
        } => match document {
            Some(path) => cmd_verify_document(&env, &path),
            None => cmd_verify(&env, n.unwrap_or(1), family, samples),
        },
        Command::Solve {
            problem,
            n,
            m,
            nodes,
            family,
            dense,
        } => cmd_solve(&env, &problem, n, m, nodes, family, dense),
        Command::Converge {
            problem,
            n,
            m,
            family,
            jobs,
            raw,
            norm,
        } => cmd_converge(&env, &problem, &n, &m, family, jobs, raw, norm),
        Command::Stability {
            n,
            family,
            z,
            axis,
            count,
            radius,
        } => cmd_stability(&env, n, family, &z, axis, count, radius),
    }
}

fn sci(x: &Real) -> String {
    format!("{:.3e}", x.to_f64())
}

fn cmd_tableau(env: &Env, n: usize, family: Family) -> CmdResult {
    env.check_order(n, 1)?;
    let tab = env.tableau(n, family)?;
    let report = verify_tableau(&tab, 20, &env.ctx);
    let mut notes = format!(
        "N={n} family={} digits={}: max structural residual {}\n",
        tab.family(),
        env.ctx.digits(),
        sci(&report.lemma21_max())
    );
    for c in report.failures() {
        let _ = writeln!(notes, "failed check {}: residual {}", c.name, sci(&c.residual));
    }
    env.emit(&export_tableau(&tab, &env.ctx), &notes)?;
    if report.passed() {
        Ok(())
    } else {
        Err(Failure::new(EXIT_VERIFY, "tableau verification failed"))
    }
}

#[derive(Serialize)]
struct CheckDoc {
    name: String,
    residual: String,
    tolerance: String,
    expectation: String,
    passed: bool,
}

#[derive(Serialize)]
struct ReportDoc {
    n: usize,
    family: String,
    digits: u32,
    passed: bool,
    checks: Vec<CheckDoc>,
}

fn report_doc(r: &VerificationReport) -> ReportDoc {
    ReportDoc {
        n: r.n,
        family: r.family.to_string(),
        digits: r.digits,
        passed: r.passed(),
        checks: r
            .checks
            .iter()
            .map(|c| CheckDoc {
                name: c.name.clone(),
                residual: sci(&c.residual),
                tolerance: sci(&c.tolerance),
                expectation: format!("{:?}", c.expectation).to_lowercase(),
                passed: c.passed(),
            })
            .collect(),
    }
}

/// Columns of the verification matrix: header and check-name lookup.
fn verify_columns(n: usize) -> Vec<(&'static str, String)> {
    vec![
        ("lemma2.1", String::new()),
        ("B", "B(".into()),
        ("C(N)", format!("C({n})")),
        ("D(N)", format!("D({n})")),
        ("C(N+1)", format!("C({})", n + 1)),
        ("D(N+1)", format!("D({})", n + 1)),
        ("Q=psipsi^T", "Q = psi psi^T".into()),
        ("M=vv^T", "M = v v^T".into()),
        ("M rank1", "M rank one".into()),
        ("R=Pade", "R = Pade".into()),
        ("|R|<=1", "|R| <= 1 left half-plane".into()),
    ]
}

fn column_value(r: &VerificationReport, key: &str) -> String {
    if key.is_empty() {
        return sci(&r.lemma21_max());
    }
    r.checks
        .iter()
        .find(|c| c.name == key || (key.ends_with('(') || key == "R = Pade") && c.name.starts_with(key))
        .map_or("-".into(), |c| sci(&c.residual))
}

fn cmd_verify(env: &Env, n_max: usize, family: Family, samples: usize) -> CmdResult {
    env.check_order(n_max, 1)?;
    let mut reports = Vec::with_capacity(n_max);
    for n in 1..=n_max {
        reports.push(verify_tableau(&env.tableau(n, family)?, samples, &env.ctx));
    }
    let headers: Vec<&str> = verify_columns(1).iter().map(|c| c.0).collect();
    let artifact = match env.format {
        Format::Json => serde_json::to_string_pretty(&reports.iter().map(report_doc).collect::<Vec<_>>())
            .expect("report serializes"),
        Format::Csv => {
            let mut s = format!("N,{},status\n", headers.join(","));
            for r in &reports {
                let vals: Vec<String> = verify_columns(r.n).iter().map(|c| column_value(r, &c.1)).collect();
                let _ = writeln!(s, "{},{},{}", r.n, vals.join(","), if r.passed() { "pass" } else { "FAIL" });
            }
            s
        }
        Format::Table => {
            let mut s = format!("{:>3}", "N");
            for h in &headers {
                let _ = write!(s, " {h:>10}");
            }
            s.push_str("  status\n");
            for r in &reports {
                let _ = write!(s, "{:>3}", r.n);
                for c in verify_columns(r.n) {
                    let _ = write!(s, " {:>10}", column_value(r, &c.1));
                }
                let _ = writeln!(s, "  {}", if r.passed() { "pass" } else { "FAIL" });
            }
            s
        }
    };
    let mut notes = String::new();
    for r in &reports {
        for c in r.failures() {
            let _ = writeln!(notes, "N={}: {} residual {} vs {}", r.n, c.name, sci(&c.residual), sci(&c.tolerance));
        }
    }
    env.emit(&artifact, &notes)?;
    if reports.iter().all(VerificationReport::passed) {
        Ok(())
    } else {
        Err(Failure::new(EXIT_VERIFY, "verification failed"))
    }
}

fn cmd_verify_document(env: &Env, path: &PathBuf) -> CmdResult {
    let text = fs::read_to_string(path)
        .map_err(|e| Failure::new(EXIT_USAGE, format!("cannot read {}: {e}", path.display())))?;
    let tab = import_tableau(&text, &env.ctx).map_err(|e| Failure::new(EXIT_VERIFY, format!("rejected: {e}")))?;
    env.check_order(tab.degree(), 0)?;
    let report = verify_tableau(&tab, 20, &env.ctx);
    let artifact = match env.format {
        Format::Json => serde_json::to_string_pretty(&report_doc(&report)).expect("report serializes"),
        _ => report.to_string(),
    };
    env.emit(&artifact, "")?;
    if report.passed() {
        Ok(())
    } else {
        Err(Failure::new(EXIT_VERIFY, "verification failed"))
    }
}

fn problem_failure(e: ProblemError) -> Failure {
    match e {
        ProblemError::Unknown(_) | ProblemError::Parameter { .. } => Failure::new(EXIT_USAGE, e.to_string()),
        ProblemError::Tableau(_) => Failure::new(EXIT_VERIFY, e.to_string()),
        ProblemError::Solver(_) | ProblemError::Oracle(_) => Failure::new(EXIT_SOLVER, e.to_string()),
    }
}

fn cmd_solve(
    env: &Env,
    name: &str,
    n: usize,
    m: Option<usize>,
    nodes: Option<Vec<String>>,
    family: Family,
    dense: usize,
) -> CmdResult {
    let ctx = &env.ctx;
    let entry = lookup(name, ctx).map_err(problem_failure)?;
    env.check_order(n, 1)?;
    let problem = &entry.problem;
    let grid = match (m, nodes) {
        (Some(m), _) => Grid::Uniform(m),
        (None, Some(list)) => {
            let mut nodes: Vec<Real> = list
                .iter()
                .map(|s| match s.trim() {
                    "t0" => Ok(problem.t0.clone()),
                    "tf" => Ok(problem.tf.clone()),
                    s => ctx.parse(s).map_err(|e| Failure::new(EXIT_USAGE, e.to_string())),
                })
                .collect::<Result<_, _>>()?;
            // endpoints typed in decimal snap to the exact t0 and tf
            let snap = ctx.pow10(10 - ctx.digits() as i32) * (problem.tf.clone().abs() + 1u32);
            let last = nodes.len().saturating_sub(1);
            for (i, target) in [(0, &problem.t0), (last, &problem.tf)] {
                if let Some(x) = nodes.get_mut(i) {
                    if (x.clone() - target).abs() <= snap {
                        *x = target.clone();
                    }
                }
            }
            Grid::Nodes(nodes)
        }
        (None, None) => return Err(Failure::new(EXIT_USAGE, "give -M or --nodes")),
    };
    grid.nodes(&problem.t0, &problem.tf, ctx)
        .map_err(|e| Failure::new(EXIT_USAGE, e.to_string()))?;
    let tab = Arc::new(env.tableau(n, family)?);
    let cfg = SolverConfig::for_problem(problem, ctx);
    let traj = integrate(tab, problem, &grid, &cfg, ctx).map_err(|e| Failure::new(EXIT_SOLVER, e.to_string()))?;
    let format = match env.format {
        Format::Json => TrajectoryFormat::Json,
        _ => TrajectoryFormat::Csv,
    };
    let mut notes = format!("{} intervals, endpoint defect {}\n", traj.intervals(), sci(&traj.endpoint_defect(ctx)));
    let reference = match entry.reference_kind {
        ReferenceKind::ExactClosedForm => problem.exact().cloned(),
        // t_f is always an oracle node, so the final error has node accuracy
        ReferenceKind::HighOrderOracle => Some(
            entry
                .reference(n, &[traj.intervals()], ctx)
                .map_err(problem_failure)?,
        ),
    };
    if let Some(r) = reference {
        let exact = r(&problem.tf, ctx);
        let err = traj
            .final_value()
            .iter()
            .zip(&exact)
            .map(|(a, b)| (a.clone() - b).abs())
            .fold(ctx.zero(), |acc, d| if d > acc { d } else { acc });
        let _ = writeln!(notes, "e^n_f = {}", ctx.format(&err));
    }
    env.emit(&export_trajectory(&traj, dense, format, ctx), &notes)
}

#[allow(clippy::too_many_arguments)]
fn cmd_converge(
    env: &Env,
    name: &str,
    n_list: &[usize],
    m_list: &[usize],
    family: Family,
    jobs: usize,
    raw: Option<PathBuf>,
    norm: Norm,
) -> CmdResult {
    let ctx = &env.ctx;
    let entry = lookup(name, ctx).map_err(problem_failure)?;
    for &n in n_list {
        env.check_order(n, 1)?;
    }
    if m_list.len() < 3 || m_list.contains(&0) {
        return Err(Failure::new(EXIT_USAGE, "need at least 3 grid levels, each M >= 1"));
    }
    let n_max = n_list.iter().copied().max().unwrap_or(1);
    let entry = entry.with_reference(n_max, m_list, ctx).map_err(problem_failure)?;
    let options = StudyOptions {
        family: family.into(),
        errors: ErrorOptions {
            norm: match norm {
                Norm::Max => VectorNorm::Max,
                Norm::Euclidean => VectorNorm::Euclidean,
            },
            ..ErrorOptions::default()
        },
        ..StudyOptions::default()
    };
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs)
        .build()
        .map_err(|e| Failure::new(EXIT_USAGE, e.to_string()))?;
    let table = pool
        .install(|| convergence_study(&entry.problem, n_list, m_list, &options, ctx))
        .map_err(|e| match e {
            AnalysisError::ZeroError { .. } | AnalysisError::ZeroFitPoint(_) => Failure::new(
                EXIT_ANALYSIS,
                format!("{e}. The fit is impossible: errors at the roundoff floor carry no order information."),
            ),
            AnalysisError::TooFewPoints(_) | AnalysisError::DuplicateStep => Failure::new(EXIT_USAGE, e.to_string()),
            AnalysisError::Tableau(_) => Failure::new(EXIT_VERIFY, e.to_string()),
            _ => Failure::new(EXIT_SOLVER, e.to_string()),
        })?;
    if let Some(path) = raw {
        fs::write(&path, table.raw_errors_csv())
            .map_err(|e| Failure::new(EXIT_USAGE, format!("cannot write {}: {e}", path.display())))?;
    }
    let format = match env.format {
        Format::Table => TableFormat::Table,
        Format::Csv => TableFormat::Csv,
        Format::Json => TableFormat::Json,
    };
    let notes = format!("fit residuals (rms, lg e):\n{}", table.fit_residuals_csv());
    env.emit(&table.render(format), &notes)
}

fn stability_points(
    z: &[String],
    axis: Option<Axis>,
    count: usize,
    radius: f64,
    ctx: &PrecisionContext,
) -> Result<Vec<Complex>, Failure> {
    let mut points: Vec<Complex> = z
        .iter()
        .map(|s| parse_lambda(s, ctx).map_err(|e| Failure::new(EXIT_USAGE, e.to_string())))
        .collect::<Result<_, _>>()?;
    let line = |k: usize| -> f64 {
        if count == 1 {
            0.0
        } else {
            -radius + 2.0 * radius * k as f64 / (count - 1) as f64
        }
    };
    match axis {
        Some(Axis::Real) => points.extend((0..count).map(|k| Complex::from_real(ctx.real(line(k))))),
        Some(Axis::Imaginary) => points.extend((0..count).map(|k| Complex::new(ctx.zero(), ctx.real(line(k))))),
        Some(Axis::Negative) => points.extend((0..count).map(|k| {
            let e = if count == 1 { 8.0 } else { -2.0 + 10.0 * k as f64 / (count - 1) as f64 };
            Complex::from_real(-ctx.real(10f64.powf(e)))
        })),
        None if z.is_empty() => {
            points.extend(sample_disc(count, radius.min(5.0), DEFAULT_SAMPLE_SEED, ctx));
            points.extend((0..=8).map(|k| Complex::from_real(-ctx.pow10(k))));
        }
        None => {}
    }
    Ok(points)
}

#[derive(Serialize)]
struct StabilityRow {
    z: [String; 2],
    r: Option<[String; 2]>,
    pade: Option<[String; 2]>,
    deviation: Option<String>,
    abs_r: Option<String>,
    status: String,
}

fn cmd_stability(
    env: &Env,
    n: usize,
    family: Family,
    z: &[String],
    axis: Option<Axis>,
    count: usize,
    radius: f64,
) -> CmdResult {
    let ctx = &env.ctx;
    env.check_order(n, 1)?;
    let tab = env.tableau(n, family)?;
    let points = stability_points(z, axis, count, radius, ctx)?;
    let pair = |c: &Complex| [ctx.format(&c.re), ctx.format(&c.im)];
    let mut rows = Vec::with_capacity(points.len());
    let mut max_abs = ctx.zero();
    let mut max_dev = ctx.zero();
    for p in &points {
        let r = stability_function(&tab, p, ctx);
        let pade = pade_exp(n, p, ctx);
        let dev = match (&r, &pade) {
            (Ok(r), Ok(q)) if !q.is_zero() => Some((r - q).abs() / q.abs()),
            _ => None,
        };
        let abs_r = r.as_ref().ok().map(Complex::abs);
        if let Some(a) = &abs_r {
            if *a > max_abs {
                max_abs = a.clone();
            }
        }
        if let Some(d) = &dev {
            if *d > max_dev {
                max_dev = d.clone();
            }
        }
        let status = match (&r, &pade) {
            (Ok(_), Ok(_)) => "ok".to_string(),
            (Err(e), _) | (_, Err(e)) => format!("pole: {e}"),
        };
        rows.push(StabilityRow {
            z: pair(p),
            r: r.as_ref().ok().map(pair),
            pade: pade.as_ref().ok().map(pair),
            deviation: dev.as_ref().map(|d| ctx.format(d)),
            abs_r: abs_r.as_ref().map(|a| ctx.format(a)),
            status,
        });
    }
    let opt = |s: &Option<String>| s.clone().unwrap_or_else(|| "-".into());
    let opt_pair = |s: &Option<[String; 2]>| s.clone().unwrap_or_else(|| ["-".into(), "-".into()]);
    let artifact = match env.format {
        Format::Json => serde_json::to_string_pretty(&rows).expect("rows serialize"),
        Format::Csv => {
            let mut s = String::from("z_re,z_im,r_re,r_im,pade_re,pade_im,deviation,abs_r,status\n");
            for row in &rows {
                let (r, q) = (opt_pair(&row.r), opt_pair(&row.pade));
                let _ = writeln!(
                    s,
                    "{},{},{},{},{},{},{},{},{}",
                    row.z[0],
                    row.z[1],
                    r[0],
                    r[1],
                    q[0],
                    q[1],
                    opt(&row.deviation),
                    opt(&row.abs_r),
                    row.status
                );
            }
            s
        }
        Format::Table => {
            let short = |s: &str| ctx.parse(s).map_or("-".to_string(), |x| format!("{:.12e}", x.to_f64()));
            let mut s = format!(
                "{:>21} {:>21} {:>21} {:>21} {:>10} {:>19}  status\n",
                "Re z", "Im z", "Re R(z)", "Im R(z)", "rel dev", "|R(z)|"
            );
            for row in &rows {
                let r = opt_pair(&row.r);
                let _ = writeln!(
                    s,
                    "{:>21} {:>21} {:>21} {:>21} {:>10} {:>19}  {}",
                    short(&row.z[0]),
                    short(&row.z[1]),
                    short(&r[0]),
                    short(&r[1]),
                    row.deviation.as_deref().map_or("-".into(), |d| format!("{:.2e}", ctx.parse(d).unwrap().to_f64())),
                    short(&opt(&row.abs_r)),
                    row.status
                );
            }
            s
        }
    };
    let notes = format!(
        "{} samples: max |R(z)| {}, max relative deviation from Pade {}\n",
        rows.len(),
        sci(&max_abs),
        sci(&max_dev)
    );
    env.emit(&artifact, &notes)
}
