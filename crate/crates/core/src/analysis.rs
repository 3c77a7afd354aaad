//! Global error norms, empirical convergence orders and convergence tables.

use std::fmt;
use std::sync::Arc;

use rayon::prelude::*;
use rug::float::Round;
use serde::Serialize;
use thiserror::Error;

use crate::arith::{PrecisionContext, Real};
use crate::basis::{gauss_legendre_rule, NodeFamily};
use crate::solver::{integrate, Grid, OdeProblem, ReferenceFn, SolverConfig, SolverError, Trajectory};
use crate::tableau::{AderDgTableau, TableauError};

#[derive(Debug, Error)]
pub enum AnalysisError {
    #[error("reference evaluation failed at t = {t:e}: {reason}")]
    Reference { t: f64, reason: String },
    #[error("problem has no reference solution")]
    NoReference,
    #[error("fit needs at least 3 points, got {0}")]
    TooFewPoints(usize),
    #[error("fit needs distinct step sizes")]
    DuplicateStep,
    #[error(
        "error {kind} is at the roundoff floor for N = {n}, M = {m}; raise --digits or lower N \
         (the method may be exact for this problem)"
    )]
    ZeroError { kind: ErrorKind, n: usize, m: usize },
    #[error("zero error in fit point {0}")]
    ZeroFitPoint(usize),
    #[error("N = {n}, M = {m}: {source}")]
    Solver {
        n: usize,
        m: usize,
        #[source]
        source: SolverError,
    },
    #[error(transparent)]
    Tableau(#[from] TableauError),
    #[error(transparent)]
    Eval(#[from] SolverError),
}

/// The fourteen global errors, in table column order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
pub enum ErrorKind {
    NodeFinal,
    NodeL1,
    NodeL2,
    NodeLinf,
    LocalNodeFinal,
    LocalNodeL1,
    LocalNodeL2,
    LocalNodeLinf,
    LocalL1,
    LocalL2,
    LocalLinf,
    LocalQuadL1,
    LocalQuadL2,
    LocalQuadLinf,
}

impl ErrorKind {
    pub const ALL: [ErrorKind; 14] = [
        ErrorKind::NodeFinal,
        ErrorKind::NodeL1,
        ErrorKind::NodeL2,
        ErrorKind::NodeLinf,
        ErrorKind::LocalNodeFinal,
        ErrorKind::LocalNodeL1,
        ErrorKind::LocalNodeL2,
        ErrorKind::LocalNodeLinf,
        ErrorKind::LocalL1,
        ErrorKind::LocalL2,
        ErrorKind::LocalLinf,
        ErrorKind::LocalQuadL1,
        ErrorKind::LocalQuadL2,
        ErrorKind::LocalQuadLinf,
    ];

    /// Superscript/subscript label without the leading letter, e.g. `n_f`.
    pub fn label(self) -> &'static str {
        match self {
            ErrorKind::NodeFinal => "n_f",
            ErrorKind::NodeL1 => "n_L1",
            ErrorKind::NodeL2 => "n_L2",
            ErrorKind::NodeLinf => "n_Linf",
            ErrorKind::LocalNodeFinal => "l,n_f",
            ErrorKind::LocalNodeL1 => "l,n_L1",
            ErrorKind::LocalNodeL2 => "l,n_L2",
            ErrorKind::LocalNodeLinf => "l,n_Linf",
            ErrorKind::LocalL1 => "l_L1",
            ErrorKind::LocalL2 => "l_L2",
            ErrorKind::LocalLinf => "l_Linf",
            ErrorKind::LocalQuadL1 => "l,q_L1",
            ErrorKind::LocalQuadL2 => "l,q_L2",
            ErrorKind::LocalQuadLinf => "l,q_Linf",
        }
    }

    pub fn index(self) -> usize {
        self as usize
    }
}

impl fmt::Display for ErrorKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "e^{}", self.label())
    }
}

/// Magnitude of an error vector.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum VectorNorm {
    /// Largest component magnitude.
    #[default]
    Max,
    Euclidean,
}

#[derive(Debug, Clone)]
pub struct ErrorOptions {
    pub norm: VectorNorm,
    /// Gauss-Legendre points per interval are `N + quad_extra`.
    pub quad_extra: usize,
    /// Uniform samples per interval for the sup-norm search.
    pub sup_samples: usize,
    /// Golden-section iterations refining the sampled maximum.
    pub sup_refine: usize,
}

impl Default for ErrorOptions {
    fn default() -> Self {
        Self {
            norm: VectorNorm::Max,
            quad_extra: 8,
            sup_samples: 64,
            sup_refine: 40,
        }
    }
}

/// The fourteen global errors of one run.
#[derive(Debug, Clone)]
pub struct ErrorReport {
    pub n: usize,
    pub m: usize,
    /// `(tf − t0) / M`
    pub dt: Real,
    pub errors: [Real; 14],
    /// Largest `|q_n(1) − u_{n+1}|` over the run.
    pub endpoint_defect: Real,
}

impl ErrorReport {
    pub fn get(&self, kind: ErrorKind) -> &Real {
        &self.errors[kind.index()]
    }
}

fn magnitude(u: &[Real], r: &[Real], norm: VectorNorm, ctx: &PrecisionContext) -> Real {
    match norm {
        VectorNorm::Max => u.iter().zip(r).fold(ctx.zero(), |acc, (a, b)| {
            let d = (a.clone() - b).abs();
            if d > acc {
                d
            } else {
                acc
            }
        }),
        VectorNorm::Euclidean => u
            .iter()
            .zip(r)
            .fold(ctx.zero(), |acc, (a, b)| acc + (a.clone() - b).square())
            .sqrt(),
    }
}

/// Weighted L1, L2 and max of `(weight, error)` pairs.
fn discrete_norms(terms: &[(Real, Real)], ctx: &PrecisionContext) -> (Real, Real, Real) {
    let mut l1 = ctx.zero();
    let mut l2 = ctx.zero();
    let mut linf = ctx.zero();
    for (w, e) in terms {
        l1 += w.clone() * e;
        l2 += w.clone() * e.clone().square();
        if *e > linf {
            linf = e.clone();
        }
    }
    (l1, l2.sqrt(), linf)
}

struct Evaluator<'a> {
    reference: &'a ReferenceFn,
    dim: usize,
    norm: VectorNorm,
    ctx: &'a PrecisionContext,
}

impl Evaluator<'_> {
    fn reference(&self, t: &Real) -> Result<Vec<Real>, AnalysisError> {
        let r = (self.reference)(t, self.ctx);
        let fail = |reason: String| AnalysisError::Reference { t: t.to_f64(), reason };
        if r.len() != self.dim {
            return Err(fail(format!("returned {} components, expected {}", r.len(), self.dim)));
        }
        if r.iter().any(|x| !x.is_finite()) {
            return Err(fail("non-finite value".into()));
        }
        Ok(r)
    }

    fn error(&self, u: &[Real], t: &Real) -> Result<Real, AnalysisError> {
        Ok(magnitude(u, &self.reference(t)?, self.norm, self.ctx))
    }
}

/// Computes all fourteen global errors of `traj` against `reference`.
///
/// Node sums run over `n = 0..=M` with weight `Δt_{min(n, M−1)}`. The local
/// solution at a grid node is the left limit `q_{n−1}(1)`, and `u_0` at `t_0`.
/// Nodal-point weights are the distance to the next nodal point, or to `t_f`
/// for the last one.
pub fn compute_errors(
    traj: &Trajectory,
    reference: &ReferenceFn,
    options: &ErrorOptions,
    ctx: &PrecisionContext,
) -> Result<ErrorReport, AnalysisError> {
    let m = traj.intervals();
    let basis = traj.basis();
    let ev = Evaluator {
        reference,
        dim: traj.values[0].len(),
        norm: options.norm,
        ctx,
    };
    let t0 = &traj.times[0];
    let tf = &traj.times[m];
    let weight = |n: usize| traj.locals[n.min(m - 1)].dt.clone();

    let mut node_terms = Vec::with_capacity(m + 1);
    let mut local_node_terms = Vec::with_capacity(m + 1);
    for n in 0..=m {
        let t = &traj.times[n];
        let exact = ev.reference(t)?;
        node_terms.push((weight(n), magnitude(&traj.values[n], &exact, ev.norm, ctx)));
        let left = if n == 0 {
            traj.values[0].clone()
        } else {
            traj.locals[n - 1].eval_tau(basis, &ctx.one(), ctx)
        };
        local_node_terms.push((weight(n), magnitude(&left, &exact, ev.norm, ctx)));
    }

    let mut points: Vec<(Real, Real)> = Vec::with_capacity(m * basis.len());
    for local in &traj.locals {
        for (tau, q) in basis.nodes().iter().zip(&local.qhat) {
            let t = tau.clone() * &local.dt + &local.t_n;
            let e = ev.error(q, &t)?;
            points.push((t, e));
        }
    }
    let quad_terms: Vec<(Real, Real)> = (0..points.len())
        .map(|i| {
            let next = points.get(i + 1).map_or(tf, |p| &p.0);
            (next.clone() - &points[i].0, points[i].1.clone())
        })
        .collect();

    let (gl_nodes, gl_weights) = gauss_legendre_rule(traj.degree() + options.quad_extra, ctx)
        .map_err(|e| AnalysisError::Tableau(TableauError::Basis(e)))?;
    let mut l1 = ctx.zero();
    let mut l2 = ctx.zero();
    let mut linf = ctx.zero();
    for local in &traj.locals {
        let err_at = |tau: &Real| -> Result<Real, AnalysisError> {
            let t = tau.clone() * &local.dt + &local.t_n;
            ev.error(&local.eval_tau(basis, tau, ctx), &t)
        };
        for (x, w) in gl_nodes.iter().zip(&gl_weights) {
            let e = err_at(x)?;
            l1 += w.clone() * &local.dt * &e;
            l2 += w.clone() * &local.dt * e.square();
        }
        let sup = interval_sup(&err_at, options, ctx)?;
        if sup > linf {
            linf = sup;
        }
    }

    let (n_l1, n_l2, n_linf) = discrete_norms(&node_terms, ctx);
    let (ln_l1, ln_l2, ln_linf) = discrete_norms(&local_node_terms, ctx);
    let (q_l1, q_l2, q_linf) = discrete_norms(&quad_terms, ctx);
    let errors = [
        node_terms[m].1.clone(),
        n_l1,
        n_l2,
        n_linf,
        local_node_terms[m].1.clone(),
        ln_l1,
        ln_l2,
        ln_linf,
        l1,
        l2.sqrt(),
        linf,
        q_l1,
        q_l2,
        q_linf,
    ];
    Ok(ErrorReport {
        n: traj.degree(),
        m,
        dt: (tf.clone() - t0) / m as u32,
        errors,
        endpoint_defect: traj.endpoint_defect(ctx),
    })
}

/// Sup of `f` over `[0, 1]`: uniform sampling, then golden-section search in
/// the bracket around the largest sample.
fn interval_sup<F>(f: &F, options: &ErrorOptions, ctx: &PrecisionContext) -> Result<Real, AnalysisError>
where
    F: Fn(&Real) -> Result<Real, AnalysisError>,
{
    let k = options.sup_samples.max(2);
    let taus: Vec<Real> = (0..k).map(|j| ctx.real(j as u32) / (k as u32 - 1)).collect();
    let mut best = 0;
    let mut best_val = ctx.zero();
    for (j, tau) in taus.iter().enumerate() {
        let v = f(tau)?;
        if j == 0 || v > best_val {
            best = j;
            best_val = v;
        }
    }
    let mut lo = taus[best.saturating_sub(1)].clone();
    let mut hi = taus[(best + 1).min(k - 1)].clone();
    let g = (ctx.real(5u32).sqrt() - 1u32) / 2u32;
    let mut x1 = hi.clone() - g.clone() * (hi.clone() - &lo);
    let mut x2 = lo.clone() + g.clone() * (hi.clone() - &lo);
    let mut f1 = f(&x1)?;
    let mut f2 = f(&x2)?;
    for _ in 0..options.sup_refine {
        if f1 > f2 {
            hi = x2;
            x2 = x1;
            f2 = f1.clone();
            x1 = hi.clone() - g.clone() * (hi.clone() - &lo);
            f1 = f(&x1)?;
        } else {
            lo = x1;
            x1 = x2;
            f1 = f2.clone();
            x2 = lo.clone() + g.clone() * (hi.clone() - &lo);
            f2 = f(&x2)?;
        }
        for v in [&f1, &f2] {
            if *v > best_val {
                best_val = v.clone();
            }
        }
    }
    Ok(best_val)
}

/// Least-squares line through `(lg Δt, lg e)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct OrderFit {
    /// Slope, the empirical order.
    pub p: f64,
    pub intercept: f64,
    /// Root-mean-square residual of the fit in `lg e`.
    pub residual: f64,
}

/// Decimal logarithm as f64; safe for magnitudes far outside the f64 range.
fn lg(x: &Real) -> f64 {
    let (m, e) = x.to_f64_exp();
    (m.abs()).log10() + e as f64 * std::f64::consts::LOG10_2
}

/// Fits `e ∝ Δt^p` by least squares on `lg e` against `lg Δt`.
pub fn fit_order(points: &[(Real, Real)]) -> Result<OrderFit, AnalysisError> {
    if points.len() < 3 {
        return Err(AnalysisError::TooFewPoints(points.len()));
    }
    if let Some(i) = points.iter().position(|(_, e)| !(*e > 0u32)) {
        return Err(AnalysisError::ZeroFitPoint(i));
    }
    let xy: Vec<(f64, f64)> = points.iter().map(|(h, e)| (lg(h), lg(e))).collect();
    let n = xy.len() as f64;
    let mx = xy.iter().map(|p| p.0).sum::<f64>() / n;
    let my = xy.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = xy.iter().map(|p| (p.0 - mx).powi(2)).sum();
    if sxx <= f64::EPSILON * mx.abs().max(1.0) {
        return Err(AnalysisError::DuplicateStep);
    }
    let sxy: f64 = xy.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let p = sxy / sxx;
    let intercept = my - p * mx;
    let residual = (xy.iter().map(|(x, y)| (y - intercept - p * x).powi(2)).sum::<f64>() / n).sqrt();
    Ok(OrderFit { p, intercept, residual })
}

/// Settings for [`convergence_study`].
#[derive(Debug, Clone)]
pub struct StudyOptions {
    pub family: NodeFamily,
    pub errors: ErrorOptions,
    /// Errors at or below this are treated as zero and abort the fit.
    /// Defaults to `100 × stage_tol`.
    pub floor: Option<Real>,
    pub solver: Option<SolverConfig>,
}

impl Default for StudyOptions {
    fn default() -> Self {
        Self {
            family: NodeFamily::GaussLegendre,
            errors: ErrorOptions::default(),
            floor: None,
            solver: None,
        }
    }
}

/// Fitted orders for one `N`.
#[derive(Debug, Clone, Serialize)]
pub struct ConvergenceRow {
    pub n: usize,
    /// One fit per [`ErrorKind::ALL`] entry.
    pub fits: Vec<OrderFit>,
    /// `2N + 1`
    pub p_g: usize,
    /// `N + 1`
    pub p_l: usize,
}

impl ConvergenceRow {
    pub fn order(&self, kind: ErrorKind) -> f64 {
        self.fits[kind.index()].p
    }

    pub fn max_fit_residual(&self) -> f64 {
        self.fits.iter().map(|f| f.residual).fold(0.0, f64::max)
    }
}

#[derive(Debug, Clone)]
pub struct ConvergenceTable {
    pub family: NodeFamily,
    pub digits: u32,
    pub m_list: Vec<usize>,
    pub rows: Vec<ConvergenceRow>,
    /// Every (N, M) cell, ordered by N then M.
    pub reports: Vec<ErrorReport>,
}

/// Integrates `problem` for every `(N, M)` pair in parallel and fits the
/// fourteen orders per `N`.
pub fn convergence_study(
    problem: &OdeProblem,
    n_list: &[usize],
    m_list: &[usize],
    options: &StudyOptions,
    ctx: &PrecisionContext,
) -> Result<ConvergenceTable, AnalysisError> {
    let reference = problem.exact().ok_or(AnalysisError::NoReference)?.clone();
    if m_list.len() < 3 {
        return Err(AnalysisError::TooFewPoints(m_list.len()));
    }
    let config = options.solver.clone().unwrap_or_else(|| SolverConfig::for_problem(problem, ctx));
    let floor = options.floor.clone().unwrap_or_else(|| config.stage_tol.clone() * 100u32);
    let tableaus: Vec<Arc<AderDgTableau>> = n_list
        .par_iter()
        .map(|&n| AderDgTableau::build(n, options.family, ctx).map(Arc::new))
        .collect::<Result<_, _>>()?;
    let cells: Vec<(usize, usize)> = (0..n_list.len())
        .flat_map(|i| m_list.iter().map(move |&m| (i, m)))
        .collect();
    let reports: Vec<ErrorReport> = cells
        .par_iter()
        .map(|&(i, m)| {
            let n = n_list[i];
            let traj = integrate(tableaus[i].clone(), problem, &Grid::Uniform(m), &config, ctx)
                .map_err(|source| AnalysisError::Solver { n, m, source })?;
            compute_errors(&traj, reference.as_ref(), &options.errors, ctx)
        })
        .collect::<Result<_, _>>()?;

    let mut rows = Vec::with_capacity(n_list.len());
    for (i, &n) in n_list.iter().enumerate() {
        let cell = &reports[i * m_list.len()..(i + 1) * m_list.len()];
        let mut fits = Vec::with_capacity(14);
        for kind in ErrorKind::ALL {
            if let Some(r) = cell.iter().find(|r| *r.get(kind) <= floor) {
                return Err(AnalysisError::ZeroError { kind, n, m: r.m });
            }
            let points: Vec<(Real, Real)> = cell.iter().map(|r| (r.dt.clone(), r.get(kind).clone())).collect();
            fits.push(fit_order(&points)?);
        }
        rows.push(ConvergenceRow {
            n,
            fits,
            p_g: 2 * n + 1,
            p_l: n + 1,
        });
    }
    Ok(ConvergenceTable {
        family: options.family,
        digits: ctx.digits(),
        m_list: m_list.to_vec(),
        rows,
        reports,
    })
}

/// Output layout for convergence tables.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TableFormat {
    Table,
    Csv,
    Json,
}

enum Column {
    Order(ErrorKind),
    Global,
    Local,
}

const COLUMNS: [Column; 16] = [
    Column::Order(ErrorKind::NodeFinal),
    Column::Order(ErrorKind::NodeL1),
    Column::Order(ErrorKind::NodeL2),
    Column::Order(ErrorKind::NodeLinf),
    Column::Global,
    Column::Order(ErrorKind::LocalNodeFinal),
    Column::Order(ErrorKind::LocalNodeL1),
    Column::Order(ErrorKind::LocalNodeL2),
    Column::Order(ErrorKind::LocalNodeLinf),
    Column::Order(ErrorKind::LocalL1),
    Column::Order(ErrorKind::LocalL2),
    Column::Order(ErrorKind::LocalLinf),
    Column::Order(ErrorKind::LocalQuadL1),
    Column::Order(ErrorKind::LocalQuadL2),
    Column::Order(ErrorKind::LocalQuadLinf),
    Column::Local,
];

impl Column {
    fn header(&self) -> String {
        match self {
            Column::Order(k) => format!("p^{}", k.label()),
            Column::Global => "p_G".into(),
            Column::Local => "p_L".into(),
        }
    }

    fn value(&self, row: &ConvergenceRow, decimals: usize) -> String {
        match self {
            Column::Order(k) => format!("{:.decimals$}", row.order(*k)),
            Column::Global => row.p_g.to_string(),
            Column::Local => row.p_l.to_string(),
        }
    }
}

/// Scientific notation with `sig` significant digits, for any exponent.
fn sci(x: &Real, sig: usize) -> String {
    if x.is_zero() {
        return "0".into();
    }
    let (neg, mantissa, exp) = x.to_sign_string_exp_round(10, Some(sig), Round::Nearest);
    let exp = exp.unwrap_or(0) - 1;
    let (lead, rest) = mantissa.split_at(1);
    format!("{}{lead}.{rest}e{exp}", if neg { "-" } else { "" })
}

#[derive(Serialize)]
struct TableDocument<'a> {
    family: String,
    digits: u32,
    m: &'a [usize],
    columns: Vec<String>,
    rows: Vec<RowDocument>,
    errors: Vec<RawDocument>,
}

#[derive(Serialize)]
struct RowDocument {
    n: usize,
    orders: Vec<f64>,
    fit_residuals: Vec<f64>,
    p_g: usize,
    p_l: usize,
}

#[derive(Serialize)]
struct RawDocument {
    n: usize,
    m: usize,
    dt: String,
    errors: Vec<String>,
    endpoint_defect: String,
}

impl ConvergenceTable {
    pub fn row(&self, n: usize) -> Option<&ConvergenceRow> {
        self.rows.iter().find(|r| r.n == n)
    }

    pub fn column_headers() -> Vec<String> {
        COLUMNS.iter().map(Column::header).collect()
    }

    /// Fitted orders in table column order, one line per `N`.
    pub fn to_csv(&self) -> String {
        let mut out = format!("N,{}\n", Self::column_headers().join(","));
        for row in &self.rows {
            let vals: Vec<String> = COLUMNS.iter().map(|c| c.value(row, 6)).collect();
            out.push_str(&format!("{},{}\n", row.n, vals.join(",")));
        }
        out
    }

    /// Fit residuals in the same column order, with the reference columns
    /// left out.
    pub fn fit_residuals_csv(&self) -> String {
        let kinds: Vec<ErrorKind> = COLUMNS
            .iter()
            .filter_map(|c| if let Column::Order(k) = c { Some(*k) } else { None })
            .collect();
        let head: Vec<String> = kinds.iter().map(|k| format!("r^{}", k.label())).collect();
        let mut out = format!("N,{}\n", head.join(","));
        for row in &self.rows {
            let vals: Vec<String> = kinds.iter().map(|k| format!("{:.6}", row.fits[k.index()].residual)).collect();
            out.push_str(&format!("{},{}\n", row.n, vals.join(",")));
        }
        out
    }

    /// Raw `(N, M, Δt, 14 errors)` rows for plotting.
    pub fn raw_errors_csv(&self) -> String {
        let head: Vec<String> = ErrorKind::ALL.iter().map(|k| k.to_string()).collect();
        let mut out = format!("N,M,dt,{},endpoint_defect\n", head.join(","));
        for r in &self.reports {
            let errs: Vec<String> = r.errors.iter().map(|e| sci(e, 30)).collect();
            out.push_str(&format!(
                "{},{},{},{},{}\n",
                r.n,
                r.m,
                sci(&r.dt, 30),
                errs.join(","),
                sci(&r.endpoint_defect, 6)
            ));
        }
        out
    }

    pub fn to_json(&self) -> String {
        let doc = TableDocument {
            family: self.family.to_string(),
            digits: self.digits,
            m: &self.m_list,
            columns: Self::column_headers(),
            rows: self
                .rows
                .iter()
                .map(|row| RowDocument {
                    n: row.n,
                    orders: row.fits.iter().map(|f| f.p).collect(),
                    fit_residuals: row.fits.iter().map(|f| f.residual).collect(),
                    p_g: row.p_g,
                    p_l: row.p_l,
                })
                .collect(),
            errors: self
                .reports
                .iter()
                .map(|r| RawDocument {
                    n: r.n,
                    m: r.m,
                    dt: sci(&r.dt, 30),
                    errors: r.errors.iter().map(|e| sci(e, 30)).collect(),
                    endpoint_defect: sci(&r.endpoint_defect, 6),
                })
                .collect(),
        };
        serde_json::to_string_pretty(&doc).expect("table serializes")
    }

    pub fn render(&self, format: TableFormat) -> String {
        match format {
            TableFormat::Csv => self.to_csv(),
            TableFormat::Json => self.to_json(),
            TableFormat::Table => self.to_string(),
        }
    }
}

impl fmt::Display for ConvergenceTable {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:>3}", "N")?;
        for c in &COLUMNS {
            write!(f, " {:>9}", c.header())?;
        }
        writeln!(f, " {:>9}", "max fit r")?;
        for row in &self.rows {
            write!(f, "{:>3}", row.n)?;
            for c in &COLUMNS {
                write!(f, " {:>9}", c.value(row, 2))?;
            }
            writeln!(f, " {:>9.2e}", row.max_fit_residual())?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::problems::{harmonic_oscillator, polynomial_rhs};
    use rug::ops::Pow;

    fn ctx() -> PrecisionContext {
        PrecisionContext::new(60).unwrap()
    }

    fn pts(ctx: &PrecisionContext, data: &[(f64, f64)]) -> Vec<(Real, Real)> {
        data.iter().map(|&(h, e)| (ctx.real(h), ctx.real(e))).collect()
    }

    #[test]
    fn fit_recovers_exact_power() {
        let ctx = ctx();
        let data: Vec<(f64, f64)> = [0.5, 0.25, 0.1, 0.05].iter().map(|&h: &f64| (h, h.powi(3))).collect();
        let fit = fit_order(&pts(&ctx, &data)).unwrap();
        assert!((fit.p - 3.0).abs() < 1e-12, "{fit:?}");
        assert!(fit.residual < 1e-12);
    }

    #[test]
    fn fit_tolerates_noise() {
        let ctx = ctx();
        let noise = [1.01, 0.99, 1.0, 1.01, 0.99, 1.005];
        let data: Vec<(f64, f64)> = (0..6)
            .map(|i| {
                let h = 1.0 / (4.0 + 2.0 * i as f64);
                (h, 2.0 * h.powf(4.5) * noise[i])
            })
            .collect();
        let p = fit_order(&pts(&ctx, &data)).unwrap().p;
        assert!((4.3..=4.7).contains(&p), "{p}");
    }

    #[test]
    fn fit_rejects_degenerate_input() {
        let ctx = ctx();
        assert!(matches!(
            fit_order(&pts(&ctx, &[(0.5, 1.0), (0.25, 0.5)])),
            Err(AnalysisError::TooFewPoints(2))
        ));
        assert!(matches!(
            fit_order(&pts(&ctx, &[(0.5, 1.0), (0.25, 0.0), (0.1, 0.1)])),
            Err(AnalysisError::ZeroFitPoint(1))
        ));
        assert!(matches!(
            fit_order(&pts(&ctx, &[(0.5, 1.0), (0.5, 0.5), (0.5, 0.1)])),
            Err(AnalysisError::DuplicateStep)
        ));
    }

    #[test]
    fn fit_handles_tiny_errors() {
        let ctx = PrecisionContext::new(600).unwrap();
        let points: Vec<(Real, Real)> = [4u32, 8, 16]
            .iter()
            .map(|&m| {
                let h = ctx.one() / m;
                (h.clone(), ctx.pow10(-400) * h.pow(17u32))
            })
            .collect();
        assert!((fit_order(&points).unwrap().p - 17.0).abs() < 1e-9);
    }

    #[test]
    fn exact_method_gives_zero_errors() {
        // degree-2 right-hand side is integrated exactly by N = 4
        let ctx = ctx();
        let p = polynomial_rhs(2, 5, &ctx);
        let tab = Arc::new(AderDgTableau::build(4, NodeFamily::GaussLegendre, &ctx).unwrap());
        let cfg = SolverConfig::for_problem(&p.problem, &ctx);
        let traj = integrate(tab, &p.problem, &Grid::Uniform(3), &cfg, &ctx).unwrap();
        let report = compute_errors(&traj, p.problem.exact().unwrap().as_ref(), &ErrorOptions::default(), &ctx).unwrap();
        let bound = cfg.stage_tol.clone() * 100u32;
        for kind in ErrorKind::ALL {
            assert!(*report.get(kind) <= bound, "{kind}: {}", report.get(kind).to_f64());
        }
    }

    #[test]
    fn dense_self_reference_zeroes_local_norms() {
        let ctx = ctx();
        let h = harmonic_oscillator(&ctx);
        let tab = Arc::new(AderDgTableau::build(3, NodeFamily::GaussLegendre, &ctx).unwrap());
        let cfg = SolverConfig::for_problem(&h.problem, &ctx);
        let traj = Arc::new(integrate(tab, &h.problem, &Grid::Uniform(1), &cfg, &ctx).unwrap());
        let t2 = traj.clone();
        let reference: Arc<ReferenceFn> = Arc::new(move |t, c| t2.eval(t, c).unwrap());
        let report = compute_errors(&traj, reference.as_ref(), &ErrorOptions::default(), &ctx).unwrap();
        let bound = ctx.unit_roundoff().clone() * 1000u32;
        for kind in [
            ErrorKind::LocalL1,
            ErrorKind::LocalL2,
            ErrorKind::LocalLinf,
            ErrorKind::LocalQuadL1,
            ErrorKind::LocalQuadL2,
            ErrorKind::LocalQuadLinf,
        ] {
            assert!(*report.get(kind) <= bound, "{kind}: {}", report.get(kind).to_f64());
        }
        // the node solution differs from the predictor at t_0
        assert!(*report.get(ErrorKind::NodeLinf) > 1e-3);
    }

    #[test]
    fn single_interval_final_error() {
        let ctx = ctx();
        let eps = ctx.pow10(-7);
        let h = harmonic_oscillator(&ctx);
        let tab = Arc::new(AderDgTableau::build(2, NodeFamily::GaussLegendre, &ctx).unwrap());
        let cfg = SolverConfig::for_problem(&h.problem, &ctx);
        let traj = integrate(tab, &h.problem, &Grid::Uniform(1), &cfg, &ctx).unwrap();
        let tf = traj.times[1].clone();
        let (u0, u1) = (traj.values[0].clone(), traj.values[1].clone());
        let e2 = eps.clone();
        let reference: Arc<ReferenceFn> = Arc::new(move |t, _| {
            if *t == tf {
                vec![u1[0].clone() + &e2, u1[1].clone()]
            } else {
                u0.clone()
            }
        });
        let report = compute_errors(&traj, reference.as_ref(), &ErrorOptions::default(), &ctx).unwrap();
        let close = |a: &Real, b: &Real| (a.clone() - b).abs() <= ctx.pow10(-40);
        assert!(close(report.get(ErrorKind::NodeFinal), &eps));
        assert!(close(report.get(ErrorKind::NodeLinf), &eps));
        assert!(close(report.get(ErrorKind::NodeL1), &(eps.clone() * &traj.locals[0].dt)));
    }

    #[test]
    fn final_errors_bounded_by_max_and_orders_near_reference() {
        let ctx = PrecisionContext::new(80).unwrap();
        let h = harmonic_oscillator(&ctx);
        let table = convergence_study(&h.problem, &[2], &[4, 6, 8, 10], &StudyOptions::default(), &ctx).unwrap();
        for r in &table.reports {
            assert!(r.get(ErrorKind::NodeFinal) <= r.get(ErrorKind::NodeLinf));
            assert!(r.get(ErrorKind::LocalNodeFinal) <= r.get(ErrorKind::LocalNodeLinf));
            assert!(r.errors.iter().all(|e| *e >= 0u32));
        }
        let row = table.row(2).unwrap();
        assert_eq!((row.p_g, row.p_l), (5, 3));
        assert!(row.fits.iter().all(|f| f.p.is_finite()));
        let p = row.order(ErrorKind::LocalL1);
        assert!((p - 3.0).abs() < 0.6, "{p}");
        let csv = table.to_csv();
        assert!(csv.starts_with("N,p^n_f,p^n_L1,p^n_L2,p^n_Linf,p_G,p^l,n_f"));
        assert!(csv.trim_end().ends_with(",3"));
        assert_eq!(table.raw_errors_csv().lines().count(), 5);
    }

    #[test]
    fn sci_formats_extreme_exponents() {
        let ctx = PrecisionContext::new(600).unwrap();
        assert_eq!(sci(&(ctx.pow10(-450) * 3u32), 3), "3.00e-450");
        assert_eq!(sci(&ctx.zero(), 3), "0");
    }
}
