//! The ADER-DG time stepper: implicit stage solve, predictor reconstruction,
//! node update and dense evaluation of the local solution.

use std::fmt;
use std::sync::Arc;

use serde::Serialize;
use thiserror::Error;

use crate::arith::{max_abs, PrecisionContext, Real};
use crate::basis::NodalBasis;
use crate::linalg::{Lu, Matrix};
use crate::tableau::AderDgTableau;

/// `F(u, t)`
pub type RhsFn = dyn Fn(&[Real], &Real, &PrecisionContext) -> Vec<Real> + Send + Sync;
/// `∂F/∂u (u, t)`
pub type JacobianFn = dyn Fn(&[Real], &Real, &PrecisionContext) -> Matrix<Real> + Send + Sync;
/// Reference solution `t ↦ u(t)`.
pub type ReferenceFn = dyn Fn(&Real, &PrecisionContext) -> Vec<Real> + Send + Sync;

#[derive(Debug, Error)]
pub enum SolverError {
    #[error("invalid problem: {0}")]
    Problem(String),
    #[error("invalid solver configuration: {0}")]
    Config(String),
    #[error("stage iteration did not converge in {iterations} iterations (residual {residual:e})")]
    NonConvergence { iterations: usize, residual: f64 },
    #[error("Newton matrix is singular")]
    SingularNewton,
    #[error("t = {t} lies outside the interval [{start}, {end}]")]
    Domain { t: f64, start: f64, end: f64 },
    #[error("fixed-point iteration not guaranteed to contract: dt*L*max|a| = {0:.3e} >= 1")]
    PicardBound(f64),
    #[error("step {interval} failed: {source}")]
    Step {
        interval: usize,
        #[source]
        source: Box<SolverError>,
    },
}

/// First-order system `u' = F(u, t)`, `u(t0) = u0` on `[t0, tf]`.
#[derive(Clone)]
pub struct OdeProblem {
    pub dim: usize,
    pub t0: Real,
    pub tf: Real,
    pub u0: Vec<Real>,
    rhs: Arc<RhsFn>,
    jacobian: Option<Arc<JacobianFn>>,
    exact: Option<Arc<ReferenceFn>>,
    /// Optional Lipschitz constant of `F` in `u`, used by the fixed-point mode.
    pub lipschitz: Option<Real>,
}

impl fmt::Debug for OdeProblem {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("OdeProblem")
            .field("dim", &self.dim)
            .field("t0", &self.t0.to_f64())
            .field("tf", &self.tf.to_f64())
            .field("jacobian", &self.jacobian.is_some())
            .field("exact", &self.exact.is_some())
            .finish()
    }
}

impl OdeProblem {
    pub fn new<F>(t0: Real, tf: Real, u0: Vec<Real>, rhs: F) -> Self
    where
        F: Fn(&[Real], &Real, &PrecisionContext) -> Vec<Real> + Send + Sync + 'static,
    {
        Self {
            dim: u0.len(),
            t0,
            tf,
            u0,
            rhs: Arc::new(rhs),
            jacobian: None,
            exact: None,
            lipschitz: None,
        }
    }

    pub fn with_jacobian<J>(mut self, jac: J) -> Self
    where
        J: Fn(&[Real], &Real, &PrecisionContext) -> Matrix<Real> + Send + Sync + 'static,
    {
        self.jacobian = Some(Arc::new(jac));
        self
    }

    pub fn with_exact<E>(mut self, exact: E) -> Self
    where
        E: Fn(&Real, &PrecisionContext) -> Vec<Real> + Send + Sync + 'static,
    {
        self.exact = Some(Arc::new(exact));
        self
    }

    pub fn with_exact_arc(mut self, exact: Arc<ReferenceFn>) -> Self {
        self.exact = Some(exact);
        self
    }

    pub fn with_lipschitz(mut self, l: Real) -> Self {
        self.lipschitz = Some(l);
        self
    }

    pub fn rhs(&self, u: &[Real], t: &Real, ctx: &PrecisionContext) -> Vec<Real> {
        (self.rhs)(u, t, ctx)
    }

    pub fn has_jacobian(&self) -> bool {
        self.jacobian.is_some()
    }

    pub fn jacobian(&self, u: &[Real], t: &Real, ctx: &PrecisionContext) -> Option<Matrix<Real>> {
        self.jacobian.as_ref().map(|j| j(u, t, ctx))
    }

    pub fn exact(&self) -> Option<&Arc<ReferenceFn>> {
        self.exact.as_ref()
    }

    /// Checks `t0 < tf`, dimensions, and `exact(t0) = u0`.
    pub fn validate(&self, ctx: &PrecisionContext) -> Result<(), SolverError> {
        if self.t0 >= self.tf {
            return Err(SolverError::Problem("t0 must be less than tf".into()));
        }
        if self.dim == 0 || self.u0.len() != self.dim {
            return Err(SolverError::Problem("u0 length must equal dim >= 1".into()));
        }
        if let Some(exact) = &self.exact {
            let e = exact(&self.t0, ctx);
            let scale = max_abs(&self.u0, ctx).max(&ctx.one()).clone();
            let tol = ctx.unit_roundoff().clone() * 10u32 * scale;
            if e.len() != self.dim || e.iter().zip(&self.u0).any(|(a, b)| (a.clone() - b).abs() > tol) {
                return Err(SolverError::Problem("exact(t0) differs from u0".into()));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum JacobianMode {
    Analytic,
    FiniteDifference,
    /// Plain fixed-point iteration on the stage equations.
    Picard,
}

#[derive(Debug, Clone)]
pub struct SolverConfig {
    /// Max-norm target for the stage residual.
    pub stage_tol: Real,
    pub max_newton: usize,
    pub jacobian_mode: JacobianMode,
    /// Relative increment for central-difference Jacobians.
    pub fd_step: Real,
    /// Full Jacobian refresh period for simplified Newton.
    pub refresh_every: usize,
}

impl SolverConfig {
    /// Defaults: `stage_tol = 10^(20−d)`, `fd_step = 10^(−d/3)`, analytic
    /// Jacobian.
    pub fn new(ctx: &PrecisionContext) -> Self {
        let d = ctx.digits() as i32;
        Self {
            stage_tol: ctx.pow10(20 - d),
            max_newton: 60,
            jacobian_mode: JacobianMode::Analytic,
            fd_step: ctx.pow10(-d / 3),
            refresh_every: 5,
        }
    }

    /// Analytic Jacobian when the problem supplies one, finite differences
    /// otherwise.
    pub fn for_problem(problem: &OdeProblem, ctx: &PrecisionContext) -> Self {
        let mut cfg = Self::new(ctx);
        if !problem.has_jacobian() {
            cfg.jacobian_mode = JacobianMode::FiniteDifference;
        }
        cfg
    }

    pub fn with_mode(mut self, mode: JacobianMode) -> Self {
        self.jacobian_mode = mode;
        self
    }

    pub fn validate(&self, ctx: &PrecisionContext) -> Result<(), SolverError> {
        if self.stage_tol < ctx.unit_roundoff().clone() * 10u32 {
            return Err(SolverError::Config("stage_tol must be at least 10 x unit roundoff".into()));
        }
        if self.max_newton == 0 {
            return Err(SolverError::Config("max_newton must be at least 1".into()));
        }
        if self.refresh_every == 0 {
            return Err(SolverError::Config("refresh_every must be at least 1".into()));
        }
        Ok(())
    }
}

/// Central-difference approximation of `∂F/∂u` with per-component steps
/// `fd_step · max(1, |u_e|)`.
pub fn fd_jacobian(problem: &OdeProblem, u: &[Real], t: &Real, fd_step: &Real, ctx: &PrecisionContext) -> Matrix<Real> {
    let d = problem.dim;
    let mut jac = Matrix::zeros(d, d, ctx);
    for e in 0..d {
        let mag = u[e].clone().abs();
        let h = fd_step.clone() * if mag > 1u32 { mag } else { ctx.one() };
        let mut up = u.to_vec();
        let mut dn = u.to_vec();
        up[e] += &h;
        dn[e] -= &h;
        let fu = problem.rhs(&up, t, ctx);
        let fd = problem.rhs(&dn, t, ctx);
        let two_h = h * 2u32;
        for r in 0..d {
            jac[(r, e)] = (fu[r].clone() - &fd[r]) / &two_h;
        }
    }
    jac
}

fn jacobian_at(problem: &OdeProblem, u: &[Real], t: &Real, config: &SolverConfig, ctx: &PrecisionContext) -> Matrix<Real> {
    match config.jacobian_mode {
        JacobianMode::Analytic => problem
            .jacobian(u, t, ctx)
            .unwrap_or_else(|| fd_jacobian(problem, u, t, &config.fd_step, ctx)),
        _ => fd_jacobian(problem, u, t, &config.fd_step, ctx),
    }
}

/// Stage states `u_n + dt Σ_q a_pq k_q`.
pub fn stages_to_qhat(tab: &AderDgTableau, u_n: &[Real], k: &[Vec<Real>], dt: &Real) -> Vec<Vec<Real>> {
    let a = tab.a();
    let s = tab.stages();
    (0..s)
        .map(|p| {
            u_n.iter()
                .enumerate()
                .map(|(d, u)| {
                    let mut acc = Real::new(u.prec());
                    for q in 0..s {
                        acc += a[(p, q)].clone() * &k[q][d];
                    }
                    acc * dt + u
                })
                .collect()
        })
        .collect()
}

fn stage_times(tab: &AderDgTableau, t_n: &Real, dt: &Real) -> Vec<Real> {
    tab.nodes().iter().map(|tau| tau.clone() * dt + t_n).collect()
}

/// `G_p(k) = k_p − F(q̂_p, t_p)` with its max-norm.
fn stage_residual(
    problem: &OdeProblem,
    qhat: &[Vec<Real>],
    k: &[Vec<Real>],
    times: &[Real],
    ctx: &PrecisionContext,
) -> (Vec<Vec<Real>>, Real) {
    let mut worst = ctx.zero();
    let g = qhat
        .iter()
        .zip(k)
        .zip(times)
        .map(|((q, kp), t)| {
            let f = problem.rhs(q, t, ctx);
            kp.iter()
                .zip(f)
                .map(|(a, b)| {
                    let r = a.clone() - b;
                    let m = r.clone().abs();
                    if m > worst {
                        worst = m;
                    }
                    r
                })
                .collect()
        })
        .collect();
    (g, worst)
}

/// Block Newton matrix `I − dt (a_pq J_p)`, with `J_p` the Jacobian used for
/// stage row p.
fn newton_matrix(tab: &AderDgTableau, jacs: &[Matrix<Real>], dt: &Real, ctx: &PrecisionContext) -> Matrix<Real> {
    let s = tab.stages();
    let d = jacs[0].rows();
    let a = tab.a();
    Matrix::from_fn(s * d, s * d, |r, c| {
        let (p, i) = (r / d, r % d);
        let (q, j) = (c / d, c % d);
        let v = a[(p, q)].clone() * &jacs[p][(i, j)] * dt;
        if r == c {
            ctx.one() - v
        } else {
            -v
        }
    })
}

/// Solves `k_p = F(u_n + dt Σ_q a_pq k_q, t_n + τ_p dt)` for the stage
/// derivatives. Returns `k` (one row per stage) and the number of iterations.
pub fn solve_stages(
    tab: &AderDgTableau,
    problem: &OdeProblem,
    u_n: &[Real],
    t_n: &Real,
    dt: &Real,
    config: &SolverConfig,
    ctx: &PrecisionContext,
) -> Result<(Vec<Vec<Real>>, usize), SolverError> {
    let s = tab.stages();
    let d = problem.dim;
    let times = stage_times(tab, t_n, dt);
    let f0 = problem.rhs(u_n, t_n, ctx);
    let mut k: Vec<Vec<Real>> = vec![f0; s];
    let mut qhat = stages_to_qhat(tab, u_n, &k, dt);
    let (mut g, mut res) = stage_residual(problem, &qhat, &k, &times, ctx);
    if res <= config.stage_tol {
        return Ok((k, 0));
    }

    if config.jacobian_mode == JacobianMode::Picard {
        for it in 1..=config.max_newton {
            k = qhat
                .iter()
                .zip(&times)
                .map(|(q, t)| problem.rhs(q, t, ctx))
                .collect();
            qhat = stages_to_qhat(tab, u_n, &k, dt);
            (_, res) = stage_residual(problem, &qhat, &k, &times, ctx);
            if res <= config.stage_tol {
                return Ok((k, it));
            }
        }
        return Err(SolverError::NonConvergence {
            iterations: config.max_newton,
            residual: res.to_f64(),
        });
    }

    // simplified Newton: Jacobian frozen at (u_n, t_n) until a refresh
    let frozen = jacobian_at(problem, u_n, t_n, config, ctx);
    let mut lu = Lu::factor(newton_matrix(tab, &vec![frozen; s], dt, ctx), &ctx.zero())
        .map_err(|_| SolverError::SingularNewton)?;
    let mut since_refresh = 0;
    for it in 1..=config.max_newton {
        let rhs: Vec<Real> = g.iter().flatten().cloned().collect();
        let delta = lu.solve(&rhs);
        for p in 0..s {
            for i in 0..d {
                k[p][i] -= &delta[p * d + i];
            }
        }
        qhat = stages_to_qhat(tab, u_n, &k, dt);
        let prev = res;
        (g, res) = stage_residual(problem, &qhat, &k, &times, ctx);
        if res <= config.stage_tol {
            return Ok((k, it));
        }
        since_refresh += 1;
        let slow = res.clone() > prev * 0.5f64;
        if slow || since_refresh >= config.refresh_every {
            let jacs: Vec<Matrix<Real>> = qhat
                .iter()
                .zip(&times)
                .map(|(q, t)| jacobian_at(problem, q, t, config, ctx))
                .collect();
            lu = Lu::factor(newton_matrix(tab, &jacs, dt, ctx), &ctx.zero())
                .map_err(|_| SolverError::SingularNewton)?;
            since_refresh = 0;
        }
    }
    Err(SolverError::NonConvergence {
        iterations: config.max_newton,
        residual: res.to_f64(),
    })
}

/// Predictor on one interval together with its node values.
#[derive(Debug, Clone)]
pub struct LocalSolution {
    pub t_n: Real,
    pub dt: Real,
    pub u_n: Vec<Real>,
    /// Row p holds `q̂_{n,p}`, the predictor value at `τ_p`.
    pub qhat: Vec<Vec<Real>>,
    /// Stage derivatives `k_p = F(q̂_p, t_p)`.
    pub k: Vec<Vec<Real>>,
    pub u_next: Vec<Real>,
    pub iterations: usize,
}

impl LocalSolution {
    pub fn t_end(&self) -> Real {
        self.t_n.clone() + &self.dt
    }

    /// `q_n(τ) = Σ_p q̂_p φ_p(τ)` at a reference coordinate.
    pub fn eval_tau(&self, basis: &NodalBasis, tau: &Real, ctx: &PrecisionContext) -> Vec<Real> {
        let phi = basis.eval(tau, ctx);
        let dim = self.u_n.len();
        (0..dim)
            .map(|i| {
                let mut acc = ctx.zero();
                for (q, f) in self.qhat.iter().zip(&phi) {
                    acc += q[i].clone() * f;
                }
                acc
            })
            .collect()
    }

    /// The local solution `u_L(t)` at a physical time in `[t_n, t_n + dt]`.
    pub fn eval(&self, basis: &NodalBasis, t: &Real, ctx: &PrecisionContext) -> Result<Vec<Real>, SolverError> {
        let end = self.t_end();
        let slack = ctx.unit_roundoff().clone() * 100u32 * (self.t_n.clone().abs() + &end.clone().abs() + 1u32);
        if *t < self.t_n.clone() - &slack || *t > end.clone() + &slack {
            return Err(SolverError::Domain {
                t: t.to_f64(),
                start: self.t_n.to_f64(),
                end: end.to_f64(),
            });
        }
        let tau = (t.clone() - &self.t_n) / &self.dt;
        Ok(self.eval_tau(basis, &tau, ctx))
    }
}

/// Free-function form of [`LocalSolution::eval`].
pub fn eval_local(
    local: &LocalSolution,
    basis: &NodalBasis,
    t: &Real,
    ctx: &PrecisionContext,
) -> Result<Vec<Real>, SolverError> {
    local.eval(basis, t, ctx)
}

/// One ADER-DG step from `(t_n, u_n)` of length `dt`.
pub fn step(
    tab: &AderDgTableau,
    problem: &OdeProblem,
    u_n: &[Real],
    t_n: &Real,
    dt: &Real,
    config: &SolverConfig,
    ctx: &PrecisionContext,
) -> Result<LocalSolution, SolverError> {
    if *dt <= 0u32 {
        return Err(SolverError::Config("dt must be positive".into()));
    }
    let (k, iterations) = solve_stages(tab, problem, u_n, t_n, dt, config, ctx)?;
    let qhat = stages_to_qhat(tab, u_n, &k, dt);
    let u_next = u_n
        .iter()
        .enumerate()
        .map(|(i, u)| {
            let mut acc = ctx.zero();
            for (w, kp) in tab.weights().iter().zip(&k) {
                acc += w.clone() * &kp[i];
            }
            acc * dt + u
        })
        .collect();
    Ok(LocalSolution {
        t_n: t_n.clone(),
        dt: dt.clone(),
        u_n: u_n.to_vec(),
        qhat,
        k,
        u_next,
        iterations,
    })
}

/// How the integration interval is partitioned.
#[derive(Debug, Clone)]
pub enum Grid {
    /// `M` equal intervals.
    Uniform(usize),
    /// Strictly increasing nodes from `t0` to `tf`.
    Nodes(Vec<Real>),
}

impl Grid {
    pub fn nodes(&self, t0: &Real, tf: &Real, ctx: &PrecisionContext) -> Result<Vec<Real>, SolverError> {
        match self {
            Grid::Uniform(0) => Err(SolverError::Config("M must be at least 1".into())),
            Grid::Uniform(m) => {
                let h = (tf.clone() - t0) / *m as u32;
                let mut nodes: Vec<Real> = (0..*m).map(|n| h.clone() * n as u32 + t0).collect();
                nodes.push(ctx.round(tf));
                Ok(nodes)
            }
            Grid::Nodes(nodes) => {
                let ok = nodes.len() >= 2
                    && nodes.windows(2).all(|w| w[0] < w[1])
                    && nodes[0] == *t0
                    && nodes[nodes.len() - 1] == *tf;
                if ok {
                    Ok(nodes.iter().map(|t| ctx.round(t)).collect())
                } else {
                    Err(SolverError::Config("node list must increase strictly from t0 to tf".into()))
                }
            }
        }
    }
}

/// Node values and per-interval local solutions over the whole domain.
#[derive(Debug, Clone)]
pub struct Trajectory {
    pub tableau: Arc<AderDgTableau>,
    /// `t_0 .. t_M`
    pub times: Vec<Real>,
    /// `u_0 .. u_M`
    pub values: Vec<Vec<Real>>,
    pub locals: Vec<LocalSolution>,
}

impl Trajectory {
    pub fn intervals(&self) -> usize {
        self.locals.len()
    }

    pub fn degree(&self) -> usize {
        self.tableau.degree()
    }

    pub fn basis(&self) -> &NodalBasis {
        self.tableau.basis()
    }

    pub fn final_value(&self) -> &[Real] {
        self.values.last().expect("trajectory has at least one node")
    }

    /// Index of the interval containing `t`, preferring the left one at
    /// interior grid nodes.
    pub fn interval_of(&self, t: &Real) -> Option<usize> {
        let m = self.intervals();
        if *t < self.times[0] || *t > self.times[m] {
            return None;
        }
        let idx = self.times[1..].partition_point(|x| x < t);
        Some(idx.min(m - 1))
    }

    /// Dense local solution `u_L(t)`.
    pub fn eval(&self, t: &Real, ctx: &PrecisionContext) -> Result<Vec<Real>, SolverError> {
        let n = self.interval_of(t).ok_or(SolverError::Domain {
            t: t.to_f64(),
            start: self.times[0].to_f64(),
            end: self.times[self.intervals()].to_f64(),
        })?;
        self.locals[n].eval(self.basis(), t, ctx)
    }

    /// Largest `|q_n(1) − u_{n+1}|` over all intervals.
    pub fn endpoint_defect(&self, ctx: &PrecisionContext) -> Real {
        let one = ctx.one();
        let mut worst = ctx.zero();
        for local in &self.locals {
            let end = local.eval_tau(self.basis(), &one, ctx);
            for (a, b) in end.iter().zip(&local.u_next) {
                let d = (a.clone() - b).abs();
                if d > worst {
                    worst = d;
                }
            }
        }
        worst
    }
}

/// Checks the fixed-point contraction bound `dt · L · max_p Σ_q |a_pq| < 1`.
fn check_picard_bound(
    tab: &AderDgTableau,
    problem: &OdeProblem,
    nodes: &[Real],
    config: &SolverConfig,
    ctx: &PrecisionContext,
) -> Result<(), SolverError> {
    let lip = match &problem.lipschitz {
        Some(l) => l.clone(),
        None => fd_jacobian(problem, &problem.u0, &problem.t0, &config.fd_step, ctx).max_row_abs_sum(ctx),
    };
    let dt_max = nodes
        .windows(2)
        .map(|w| w[1].clone() - &w[0])
        .fold(ctx.zero(), |a, b| if b > a { b } else { a });
    let bound = dt_max * lip * tab.a_row_abs_max(ctx);
    if bound >= 1u32 {
        return Err(SolverError::PicardBound(bound.to_f64()));
    }
    Ok(())
}

/// Integrates the problem over the grid.
pub fn integrate(
    tab: Arc<AderDgTableau>,
    problem: &OdeProblem,
    grid: &Grid,
    config: &SolverConfig,
    ctx: &PrecisionContext,
) -> Result<Trajectory, SolverError> {
    problem.validate(ctx)?;
    config.validate(ctx)?;
    let times = grid.nodes(&problem.t0, &problem.tf, ctx)?;
    if config.jacobian_mode == JacobianMode::Picard {
        check_picard_bound(&tab, problem, &times, config, ctx)?;
    }
    let mut values = vec![problem.u0.iter().map(|u| ctx.round(u)).collect::<Vec<_>>()];
    let mut locals = Vec::with_capacity(times.len() - 1);
    for (n, w) in times.windows(2).enumerate() {
        let dt = w[1].clone() - &w[0];
        let local = step(&tab, problem, &values[n], &w[0], &dt, config, ctx).map_err(|e| SolverError::Step {
            interval: n,
            source: Box::new(e),
        })?;
        values.push(local.u_next.clone());
        locals.push(local);
    }
    Ok(Trajectory {
        tableau: tab,
        times,
        values,
        locals,
    })
}

/// Output layout for [`export_trajectory`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TrajectoryFormat {
    Csv,
    Json,
}

#[derive(Serialize)]
struct TrajectoryDocument {
    n: usize,
    family: String,
    digits: u32,
    nodes: Vec<SampleRow>,
    dense: Vec<SampleRow>,
}

#[derive(Serialize)]
struct SampleRow {
    interval: Option<usize>,
    t: String,
    u: Vec<String>,
}

/// Node values plus `dense` uniformly spaced samples of `u_L` per interval
/// (both interval endpoints included when `dense >= 2`).
pub fn export_trajectory(traj: &Trajectory, dense: usize, format: TrajectoryFormat, ctx: &PrecisionContext) -> String {
    let row = |interval, t: &Real, u: &[Real]| SampleRow {
        interval,
        t: ctx.format(t),
        u: u.iter().map(|x| ctx.format(x)).collect(),
    };
    let nodes: Vec<SampleRow> = traj.times.iter().zip(&traj.values).map(|(t, u)| row(None, t, u)).collect();
    let mut samples = Vec::new();
    for (n, local) in traj.locals.iter().enumerate() {
        for j in 0..dense {
            let tau = if dense == 1 {
                ctx.ratio(1, 2)
            } else {
                ctx.real(j as u32) / (dense as u32 - 1)
            };
            let t = tau.clone() * &local.dt + &local.t_n;
            samples.push(row(Some(n), &t, &local.eval_tau(traj.basis(), &tau, ctx)));
        }
    }
    match format {
        TrajectoryFormat::Json => serde_json::to_string_pretty(&TrajectoryDocument {
            n: traj.degree(),
            family: traj.tableau.family().to_string(),
            digits: ctx.digits(),
            nodes,
            dense: samples,
        })
        .expect("trajectory serializes"),
        TrajectoryFormat::Csv => {
            let dim = traj.values[0].len();
            let mut out = String::from("kind,interval,t");
            for i in 0..dim {
                out.push_str(&format!(",u{i}"));
            }
            out.push('\n');
            for (kind, rows) in [("node", &nodes), ("dense", &samples)] {
                for r in rows {
                    let interval = r.interval.map_or(String::new(), |i| i.to_string());
                    out.push_str(&format!("{kind},{interval},{}", r.t));
                    for u in &r.u {
                        out.push(',');
                        out.push_str(u);
                    }
                    out.push('\n');
                }
            }
            out
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::basis::NodeFamily;
    use crate::tableau::stability_function;
    use crate::arith::Complex;

    fn ctx() -> PrecisionContext {
        PrecisionContext::new(60).unwrap()
    }

    fn tab(n: usize, ctx: &PrecisionContext) -> Arc<AderDgTableau> {
        Arc::new(AderDgTableau::build(n, NodeFamily::GaussLegendre, ctx).unwrap())
    }

    fn linear(lambda: Real, ctx: &PrecisionContext) -> OdeProblem {
        let l2 = lambda.clone();
        OdeProblem::new(ctx.zero(), ctx.one(), vec![ctx.one()], move |u, _, _| vec![u[0].clone() * &lambda])
            .with_jacobian(move |_, _, _| Matrix::from_rows(vec![vec![l2.clone()]]))
    }

    #[test]
    fn zero_rhs_gives_zero_stages() {
        let ctx = ctx();
        let tab = tab(3, &ctx);
        let p = OdeProblem::new(ctx.zero(), ctx.one(), vec![ctx.real(2), ctx.real(-1)], |u, _, c| {
            vec![c.zero(); u.len()]
        });
        let cfg = SolverConfig::for_problem(&p, &ctx);
        let (k, _) = solve_stages(&tab, &p, &p.u0, &p.t0, &ctx.one(), &cfg, &ctx).unwrap();
        assert!(k.iter().flatten().all(|x| x.is_zero()));
        let local = step(&tab, &p, &p.u0, &p.t0, &ctx.one(), &cfg, &ctx).unwrap();
        assert_eq!(local.u_next, p.u0);
        for row in &local.qhat {
            assert_eq!(row, &p.u0);
        }
    }

    #[test]
    fn constant_rhs() {
        let ctx = ctx();
        let tab = tab(2, &ctx);
        let c = ctx.ratio(3, 2);
        let c2 = c.clone();
        let p = OdeProblem::new(ctx.zero(), ctx.one(), vec![ctx.one()], move |_, _, _| vec![c2.clone()]);
        let cfg = SolverConfig::for_problem(&p, &ctx);
        let dt = ctx.ratio(1, 4);
        let (k, _) = solve_stages(&tab, &p, &p.u0, &p.t0, &dt, &cfg, &ctx).unwrap();
        assert!(k.iter().all(|r| r[0] == c));
        let qhat = stages_to_qhat(&tab, &p.u0, &k, &dt);
        for (q, tau) in qhat.iter().zip(tab.nodes()) {
            let expected = ctx.one() + dt.clone() * tau * &c;
            assert!((q[0].clone() - expected).abs() <= *ctx.identity_tol());
        }
    }

    #[test]
    fn exponential_growth_matches_stability_function() {
        let ctx = ctx();
        let tab = tab(1, &ctx);
        let p = linear(ctx.one(), &ctx);
        let cfg = SolverConfig::for_problem(&p, &ctx);
        let local = step(&tab, &p, &p.u0, &p.t0, &ctx.one(), &cfg, &ctx).unwrap();
        let tol = cfg.stage_tol.clone() * 10u32;
        assert!((local.u_next[0].clone() - ctx.ratio(8, 3)).abs() <= tol);
        let sum = tab.weights()[0].clone() * &local.k[0][0] + tab.weights()[1].clone() * &local.k[1][0];
        assert!((sum - ctx.ratio(5, 3)).abs() <= tol);
    }

    #[test]
    fn stiff_decay() {
        let ctx = ctx();
        for n in [1, 2, 5, 8] {
            let tab = tab(n, &ctx);
            let p = linear(ctx.real(-1_000_000), &ctx);
            let cfg = SolverConfig::for_problem(&p, &ctx);
            let local = step(&tab, &p, &p.u0, &p.t0, &ctx.one(), &cfg, &ctx).unwrap();
            assert!(local.u_next[0].clone().abs() <= 1e-5, "N={n}");
            let r = stability_function(&tab, &Complex::from_real(ctx.real(-1_000_000)), &ctx).unwrap();
            assert!((local.u_next[0].clone() - r.re).abs() <= cfg.stage_tol.clone() * 10u32);
        }
    }

    #[test]
    fn composition_over_uniform_grid() {
        let ctx = ctx();
        let tab = tab(2, &ctx);
        let p = linear(ctx.one(), &ctx);
        let cfg = SolverConfig::for_problem(&p, &ctx);
        let traj = integrate(tab.clone(), &p, &Grid::Uniform(4), &cfg, &ctx).unwrap();
        let r = stability_function(&tab, &Complex::from_real(ctx.ratio(1, 4)), &ctx).unwrap().re;
        let expected = r.clone() * &r * &r * &r;
        assert!((traj.final_value()[0].clone() - expected).abs() <= cfg.stage_tol.clone() * 10u32);
        assert_eq!(traj.times.len(), 5);
        assert_eq!(traj.times[4], ctx.one());
    }

    #[test]
    fn picard_and_newton_agree() {
        let ctx = ctx();
        let tab = tab(3, &ctx);
        let p = linear(ctx.ratio(-1, 2), &ctx);
        let newton = SolverConfig::for_problem(&p, &ctx);
        let picard = SolverConfig::new(&ctx).with_mode(JacobianMode::Picard);
        let fd = SolverConfig::new(&ctx).with_mode(JacobianMode::FiniteDifference);
        let a = integrate(tab.clone(), &p, &Grid::Uniform(3), &newton, &ctx).unwrap();
        let b = integrate(tab.clone(), &p, &Grid::Uniform(3), &picard, &ctx).unwrap();
        let c = integrate(tab, &p, &Grid::Uniform(3), &fd, &ctx).unwrap();
        let tol = newton.stage_tol.clone() * 10u32;
        assert!((a.final_value()[0].clone() - &b.final_value()[0]).abs() <= tol);
        assert!((a.final_value()[0].clone() - &c.final_value()[0]).abs() <= tol);
    }

    #[test]
    fn picard_bound_is_enforced() {
        let ctx = ctx();
        let tab = tab(2, &ctx);
        let p = linear(ctx.real(-50), &ctx);
        let picard = SolverConfig::new(&ctx).with_mode(JacobianMode::Picard);
        let err = integrate(tab, &p, &Grid::Uniform(1), &picard, &ctx).unwrap_err();
        assert!(matches!(err, SolverError::PicardBound(_)));
    }

    #[test]
    fn dense_output_hits_nodes_exactly() {
        let ctx = ctx();
        let tab = tab(4, &ctx);
        let p = linear(ctx.one(), &ctx);
        let cfg = SolverConfig::for_problem(&p, &ctx);
        let traj = integrate(tab.clone(), &p, &Grid::Uniform(2), &cfg, &ctx).unwrap();
        for local in &traj.locals {
            for (tau, row) in tab.nodes().iter().zip(&local.qhat) {
                assert_eq!(&local.eval_tau(tab.basis(), tau, &ctx), row);
            }
        }
        assert!(traj.endpoint_defect(&ctx) <= cfg.stage_tol.clone() * 10u32);
        assert!(traj.eval(&ctx.real(2), &ctx).is_err());
        assert_eq!(traj.interval_of(&ctx.ratio(1, 2)), Some(0));
        assert_eq!(traj.interval_of(&ctx.one()), Some(1));
    }

    #[test]
    fn invalid_inputs() {
        let ctx = ctx();
        let tab = tab(1, &ctx);
        let p = linear(ctx.one(), &ctx);
        let cfg = SolverConfig::for_problem(&p, &ctx);
        assert!(integrate(tab.clone(), &p, &Grid::Uniform(0), &cfg, &ctx).is_err());
        let bad = Grid::Nodes(vec![ctx.zero(), ctx.ratio(1, 2), ctx.ratio(1, 2), ctx.one()]);
        assert!(integrate(tab.clone(), &p, &bad, &cfg, &ctx).is_err());
        let mut cfg2 = cfg.clone();
        cfg2.stage_tol = ctx.pow10(-70);
        assert!(matches!(integrate(tab.clone(), &p, &Grid::Uniform(1), &cfg2, &ctx), Err(SolverError::Config(_))));
        let backwards = OdeProblem::new(ctx.one(), ctx.zero(), vec![ctx.one()], |u, _, _| u.to_vec());
        assert!(integrate(tab, &backwards, &Grid::Uniform(1), &cfg, &ctx).is_err());
    }

    #[test]
    fn variable_grid() {
        let ctx = ctx();
        let tab = tab(2, &ctx);
        let p = linear(ctx.one(), &ctx);
        let cfg = SolverConfig::for_problem(&p, &ctx);
        let grid = Grid::Nodes(vec![ctx.zero(), ctx.ratio(1, 10), ctx.ratio(1, 2), ctx.one()]);
        let traj = integrate(tab, &p, &grid, &cfg, &ctx).unwrap();
        let e = ctx.one().exp();
        assert!((traj.final_value()[0].clone() - e).abs() < 1e-4);
        assert_eq!(traj.intervals(), 3);
    }

    #[test]
    fn export_formats() {
        let ctx = ctx();
        let tab = tab(1, &ctx);
        let p = linear(ctx.one(), &ctx);
        let cfg = SolverConfig::for_problem(&p, &ctx);
        let traj = integrate(tab, &p, &Grid::Uniform(2), &cfg, &ctx).unwrap();
        let csv = export_trajectory(&traj, 3, TrajectoryFormat::Csv, &ctx);
        assert_eq!(csv.lines().count(), 1 + 3 + 6);
        assert!(csv.starts_with("kind,interval,t,u0\nnode,,0"));
        let json = export_trajectory(&traj, 0, TrajectoryFormat::Json, &ctx);
        let v: serde_json::Value = serde_json::from_str(&json).unwrap();
        assert_eq!(v["nodes"].as_array().unwrap().len(), 3);
    }
}
