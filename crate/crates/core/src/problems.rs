//! Built-in test problems and their reference solutions.

use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::arith::{Complex, PrecisionContext, Real};
use crate::basis::NodeFamily;
use crate::linalg::Matrix;
use crate::solver::{integrate, Grid, OdeProblem, ReferenceFn, SolverConfig, SolverError, Trajectory};
use crate::tableau::{AderDgTableau, TableauError};

#[derive(Debug, Error)]
pub enum ProblemError {
    #[error("unknown problem {0:?} (expected harmonic, pendulum, dahlquist:<lambda>, poly:<L>:<seed>)")]
    Unknown(String),
    #[error("bad parameter in {name:?}: {reason}")]
    Parameter { name: String, reason: String },
    #[error("oracle construction failed: {0}")]
    Oracle(String),
    #[error(transparent)]
    Solver(#[from] SolverError),
    #[error(transparent)]
    Tableau(#[from] TableauError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReferenceKind {
    ExactClosedForm,
    HighOrderOracle,
}

impl fmt::Display for ReferenceKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ReferenceKind::ExactClosedForm => "exact-closed-form",
            ReferenceKind::HighOrderOracle => "high-order-oracle",
        })
    }
}

#[derive(Debug, Clone)]
pub struct ProblemCatalogEntry {
    pub name: String,
    pub problem: OdeProblem,
    pub reference_kind: ReferenceKind,
    pub note: &'static str,
}

/// `x'' = −x` in first-order form, `u = (x, x')`, on `[0, 4π]`.
pub fn harmonic_oscillator(ctx: &PrecisionContext) -> ProblemCatalogEntry {
    let problem = OdeProblem::new(
        ctx.zero(),
        ctx.pi() * 4u32,
        vec![ctx.one(), ctx.zero()],
        |u, _, _| vec![u[1].clone(), -u[0].clone()],
    )
    .with_jacobian(|_, _, c| Matrix::from_rows(vec![vec![c.zero(), c.one()], vec![-c.one(), c.zero()]]))
    .with_exact(|t, _| {
        let (s, c) = t.clone().sin_cos(Real::new(t.prec()));
        vec![c, -s]
    })
    .with_lipschitz(ctx.one());
    ProblemCatalogEntry {
        name: "harmonic".into(),
        problem,
        reference_kind: ReferenceKind::ExactClosedForm,
        note: "x'' + x = 0, x(0) = 1, x'(0) = 0",
    }
}

/// `φ'' = −sin φ`, `u = (φ, φ')`, `u(0) = (π/2, 0)` on `[0, 10]`.
pub fn pendulum(ctx: &PrecisionContext) -> ProblemCatalogEntry {
    ProblemCatalogEntry {
        name: "pendulum".into(),
        problem: pendulum_problem(ctx),
        reference_kind: ReferenceKind::HighOrderOracle,
        note: "phi'' + sin(phi) = 0, phi(0) = pi/2, phi'(0) = 0; reference from a self-converged run",
    }
}

fn pendulum_problem(ctx: &PrecisionContext) -> OdeProblem {
    OdeProblem::new(ctx.zero(), ctx.real(10), vec![ctx.pi() / 2u32, ctx.zero()], |u, _, _| {
        vec![u[1].clone(), -u[0].clone().sin()]
    })
    .with_jacobian(|u, _, c| {
        Matrix::from_rows(vec![vec![c.zero(), c.one()], vec![-u[0].clone().cos(), c.zero()]])
    })
    .with_lipschitz(ctx.one())
}

/// `H(u) = u₂²/2 − cos u₁`, zero along the pendulum reference.
pub fn pendulum_energy(u: &[Real]) -> Real {
    u[1].clone().square() / 2u32 - u[0].clone().cos()
}

/// `u' = λ u`, `u(0) = 1` on `[0, 1]`. A complex `λ` is written as the real
/// system for `(Re u, Im u)`.
pub fn dahlquist(lambda: &Complex, ctx: &PrecisionContext) -> ProblemCatalogEntry {
    let (lr, li) = (lambda.re.clone(), lambda.im.clone());
    let problem = if li.is_zero() {
        let (l1, l2, l3) = (lr.clone(), lr.clone(), lr.clone());
        OdeProblem::new(ctx.zero(), ctx.one(), vec![ctx.one()], move |u, _, _| vec![u[0].clone() * &l1])
            .with_jacobian(move |_, _, _| Matrix::from_rows(vec![vec![l2.clone()]]))
            .with_exact(move |t, _| vec![(l3.clone() * t).exp()])
            .with_lipschitz(lr.abs())
    } else {
        let lam = lambda.clone();
        let jac = Matrix::from_rows(vec![vec![lr.clone(), -li.clone()], vec![li.clone(), lr.clone()]]);
        let (a, b) = (lr.clone(), li.clone());
        OdeProblem::new(ctx.zero(), ctx.one(), vec![ctx.one(), ctx.zero()], move |u, _, _| {
            vec![
                a.clone() * &u[0] - b.clone() * &u[1],
                b.clone() * &u[0] + a.clone() * &u[1],
            ]
        })
        .with_jacobian(move |_, _, _| jac.clone())
        .with_exact(move |t, _| {
            let e = lam.scale(t).exp();
            vec![e.re, e.im]
        })
        .with_lipschitz(lambda.abs())
    };
    ProblemCatalogEntry {
        name: format!("dahlquist:{lambda}"),
        problem,
        reference_kind: ReferenceKind::ExactClosedForm,
        note: "u' = lambda u, u(0) = 1",
    }
}

/// Coefficients of the seeded degree-`l` polynomial: small rationals `a/b`
/// with `a ∈ [−9, 9]`, `b ∈ [1, 9]`, lowest degree first.
pub fn polynomial_coefficients(l: usize, seed: u64, ctx: &PrecisionContext) -> Vec<Real> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..=l)
        .map(|j| {
            let mut num: i64 = rng.gen_range(-9..=9);
            let den: i64 = rng.gen_range(1..=9);
            if j == l && num == 0 {
                num = 1; // keep the stated degree
            }
            ctx.ratio(num, den)
        })
        .collect()
}

/// `u' = f(t)` with `f` a seeded polynomial of degree `l`, `u(0) = 1` on `[0, 1]`.
pub fn polynomial_rhs(l: usize, seed: u64, ctx: &PrecisionContext) -> ProblemCatalogEntry {
    polynomial_problem(polynomial_coefficients(l, seed, ctx), ctx, format!("poly:{l}:{seed}"))
}

/// `u' = Σ_j c_j t^j`, `u(0) = 1` on `[0, 1]`.
pub fn polynomial_problem(coefs: Vec<Real>, ctx: &PrecisionContext, name: String) -> ProblemCatalogEntry {
    let f = coefs.clone();
    let anti: Vec<Real> = coefs
        .iter()
        .enumerate()
        .map(|(j, c)| c.clone() / (j as u32 + 1))
        .collect();
    let problem = OdeProblem::new(ctx.zero(), ctx.one(), vec![ctx.one()], move |_, t, c| {
        vec![f.iter().rev().fold(c.zero(), |acc, x| acc * t + x)]
    })
    .with_jacobian(|_, _, c| Matrix::from_rows(vec![vec![c.zero()]]))
    .with_exact(move |t, c| {
        let poly = anti.iter().rev().fold(c.zero(), |acc, x| acc * t + x);
        vec![poly * t + 1u32]
    })
    .with_lipschitz(ctx.zero());
    ProblemCatalogEntry {
        name,
        problem,
        reference_kind: ReferenceKind::ExactClosedForm,
        note: "u' = f(t), f polynomial; exact solution is its antiderivative",
    }
}

/// Parses `a`, `a+bi`, `a-bi`, `bi`.
pub fn parse_lambda(s: &str, ctx: &PrecisionContext) -> Result<Complex, ProblemError> {
    let err = |reason: &str| ProblemError::Parameter {
        name: s.to_string(),
        reason: reason.to_string(),
    };
    let parse = |x: &str| ctx.parse(x).map_err(|e| err(&e.to_string()));
    let Some(body) = s.strip_suffix('i') else {
        return Ok(Complex::from_real(parse(s)?));
    };
    // split at the last sign that is not part of an exponent
    let bytes = body.as_bytes();
    let split = (1..bytes.len())
        .rev()
        .find(|&i| matches!(bytes[i], b'+' | b'-') && !matches!(bytes[i - 1], b'e' | b'E'));
    let (re, im) = match split {
        Some(i) => (parse(&body[..i])?, &body[i..]),
        None => (ctx.zero(), body),
    };
    let im = match im {
        "" | "+" => ctx.one(),
        "-" => -ctx.one(),
        x => parse(x)?,
    };
    Ok(Complex::new(re, im))
}

/// Catalog lookup by CLI name.
pub fn lookup(name: &str, ctx: &PrecisionContext) -> Result<ProblemCatalogEntry, ProblemError> {
    let mut parts = name.splitn(2, ':');
    let head = parts.next().unwrap_or_default();
    let rest = parts.next();
    match (head, rest) {
        ("harmonic", None) => Ok(harmonic_oscillator(ctx)),
        ("pendulum", None) => Ok(pendulum(ctx)),
        ("dahlquist", Some(l)) => {
            let mut entry = dahlquist(&parse_lambda(l, ctx)?, ctx);
            entry.name = name.to_string();
            Ok(entry)
        }
        ("poly", Some(args)) => {
            let bad = |reason: &str| ProblemError::Parameter {
                name: name.to_string(),
                reason: reason.to_string(),
            };
            let (l, seed) = args.split_once(':').ok_or_else(|| bad("expected poly:<L>:<seed>"))?;
            let l = usize::from_str(l).map_err(|_| bad("degree must be a nonnegative integer"))?;
            let seed = u64::from_str(seed).map_err(|_| bad("seed must be a nonnegative integer"))?;
            Ok(polynomial_rhs(l, seed, ctx))
        }
        _ => Err(ProblemError::Unknown(name.to_string())),
    }
}

/// Settings for the pendulum reference run.
#[derive(Debug, Clone)]
pub struct OracleConfig {
    pub n_ref: usize,
    /// The coarse oracle grid has spacing at most `(tf − t0) / m_ref`; the
    /// accepted oracle bisects every coarse interval.
    pub m_ref: usize,
    /// Uniform study grids whose nodes must be oracle nodes, so that node
    /// references carry node (not dense) accuracy.
    pub anchors: Vec<usize>,
    /// Digits added to the study's working precision.
    pub extra_digits: u32,
    /// Required node agreement between the two oracle runs and bound on the
    /// energy drift at oracle nodes, as a power of ten.
    pub target_digits: u32,
    /// Required agreement of the dense (between-node) output.
    pub dense_target_digits: u32,
}

impl OracleConfig {
    /// `N_ref = max(N_max + 8, 16)`, spacing `T / max(4 M_max, 32)`, +60 digits,
    /// node target `10^-40`, dense target `10^-20`.
    pub fn for_study(n_max: usize, m_list: &[usize]) -> Self {
        let m_max = m_list.iter().copied().max().unwrap_or(1);
        Self {
            n_ref: (n_max + 8).max(16),
            m_ref: (4 * m_max).max(32),
            anchors: m_list.to_vec(),
            extra_digits: 60,
            target_digits: 40,
            dense_target_digits: 20,
        }
    }

    /// Coarse oracle grid: the union of all anchor grids, with every gap
    /// subdivided to spacing at most `(tf − t0) / m_ref`.
    fn coarse_nodes(&self, t0: &Real, tf: &Real, ctx: &PrecisionContext) -> Vec<Real> {
        // anchors as reduced fractions n/M of the domain
        let mut fracs: Vec<(u64, u64)> = vec![(0, 1), (1, 1)];
        for &m in &self.anchors {
            for n in 1..m as u64 {
                let g = gcd(n, m as u64);
                fracs.push((n / g, m as u64 / g));
            }
        }
        fracs.sort_by(|a, b| (a.0 * b.1).cmp(&(b.0 * a.1)));
        fracs.dedup();
        let len = tf.clone() - t0;
        let at = |num: u64, den: u64| len.clone() * num as u32 / den as u32 + t0;
        let mut nodes = vec![ctx.round(t0)];
        for w in fracs.windows(2) {
            let ((a, b), (c, d)) = (w[0], w[1]);
            // gap (c/d − a/b) in units of 1/m_ref, rounded up
            let pieces = ((c * b - a * d) * self.m_ref as u64).div_ceil(b * d).max(1);
            for j in 1..=pieces {
                // a/b + j (c/d − a/b) / pieces
                let num = a * d * pieces + j * (c * b - a * d);
                nodes.push(at(num, b * d * pieces));
            }
        }
        let last = nodes.len() - 1;
        nodes[last] = ctx.round(tf);
        nodes
    }
}

fn gcd(a: u64, b: u64) -> u64 {
    if b == 0 {
        a
    } else {
        gcd(b, a % b)
    }
}

fn bisect(nodes: &[Real]) -> Vec<Real> {
    let mut out = Vec::with_capacity(2 * nodes.len());
    for w in nodes.windows(2) {
        out.push(w[0].clone());
        out.push((w[0].clone() + &w[1]) / 2u32);
    }
    out.push(nodes[nodes.len() - 1].clone());
    out
}

/// Self-converged high-order reference for the pendulum.
pub struct PendulumOracle {
    traj: Trajectory,
    ctx: PrecisionContext,
    /// Tolerance for recognising a requested time as an oracle node.
    snap: Real,
    /// Largest node disagreement between the coarse and the bisected run.
    pub node_agreement: Real,
    /// Largest dense-output disagreement between the two runs.
    pub dense_agreement: Real,
    /// Largest `|H(u_j) − H(u_0)|` over the oracle's node values.
    pub energy_drift: Real,
}

impl fmt::Debug for PendulumOracle {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("PendulumOracle")
            .field("n_ref", &self.traj.degree())
            .field("intervals", &self.traj.intervals())
            .field("digits", &self.ctx.digits())
            .field("node_agreement", &self.node_agreement.to_f64())
            .field("dense_agreement", &self.dense_agreement.to_f64())
            .field("energy_drift", &self.energy_drift.to_f64())
            .finish()
    }
}

fn max_diff(a: &[Real], b: &[Real], acc: &mut Real) {
    for (x, y) in a.iter().zip(b) {
        let d = (x.clone() - y).abs();
        if d > *acc {
            *acc = d;
        }
    }
}

impl PendulumOracle {
    /// Runs the coarse and the bisected grid and accepts the bisected run
    /// only if both agree and energy is conserved to the configured targets.
    pub fn build(config: &OracleConfig, study_ctx: &PrecisionContext) -> Result<Self, ProblemError> {
        let ctx = PrecisionContext::new(study_ctx.digits() + config.extra_digits)
            .map_err(|e| ProblemError::Oracle(e.to_string()))?;
        let tab = Arc::new(AderDgTableau::build(config.n_ref, NodeFamily::GaussLegendre, &ctx)?);
        let problem = pendulum_problem(&ctx);
        let cfg = SolverConfig::for_problem(&problem, &ctx);
        let coarse_nodes = config.coarse_nodes(&problem.t0, &problem.tf, &ctx);
        let fine_nodes = bisect(&coarse_nodes);
        let coarse = integrate(tab.clone(), &problem, &Grid::Nodes(coarse_nodes), &cfg, &ctx)?;
        let fine = integrate(tab, &problem, &Grid::Nodes(fine_nodes), &cfg, &ctx)?;

        let mut node_agreement = ctx.zero();
        for (j, u) in coarse.values.iter().enumerate() {
            max_diff(u, &fine.values[2 * j], &mut node_agreement);
        }
        let mut dense_agreement = ctx.zero();
        let samples = 8 * coarse.intervals();
        let tf = problem.tf.clone();
        for j in 1..samples {
            let t = tf.clone() * j as u32 / samples as u32;
            max_diff(&coarse.eval(&t, &ctx)?, &fine.eval(&t, &ctx)?, &mut dense_agreement);
        }
        let h0 = pendulum_energy(&problem.u0);
        let mut energy_drift = ctx.zero();
        for u in &fine.values {
            let e = (pendulum_energy(u) - &h0).abs();
            if e > energy_drift {
                energy_drift = e;
            }
        }
        let target = ctx.pow10(-(config.target_digits as i32));
        let dense_target = ctx.pow10(-(config.dense_target_digits as i32));
        if node_agreement > target || energy_drift > target || dense_agreement > dense_target {
            return Err(ProblemError::Oracle(format!(
                "not converged: node agreement {:e}, dense agreement {:e}, energy drift {:e}",
                node_agreement.to_f64(),
                dense_agreement.to_f64(),
                energy_drift.to_f64(),
            )));
        }
        Ok(Self {
            traj: fine,
            snap: study_ctx.pow10(10 - study_ctx.digits() as i32),
            ctx,
            node_agreement,
            dense_agreement,
            energy_drift,
        })
    }

    pub fn digits(&self) -> u32 {
        self.ctx.digits()
    }

    pub fn n_ref(&self) -> usize {
        self.traj.degree()
    }

    pub fn intervals(&self) -> usize {
        self.traj.intervals()
    }

    /// Reference state at `t`, rounded to the caller's precision. Times within
    /// rounding of an oracle node get that node's value; other times get the
    /// oracle's dense output.
    pub fn eval(&self, t: &Real, ctx: &PrecisionContext) -> Vec<Real> {
        let t = self.ctx.round(t);
        let times = &self.traj.times;
        let idx = times.partition_point(|x| *x < t);
        let near = [idx.checked_sub(1), Some(idx)]
            .into_iter()
            .flatten()
            .filter(|&j| j < times.len())
            .find(|&j| (times[j].clone() - &t).abs() <= self.snap);
        let value = match near {
            Some(j) => self.traj.values[j].clone(),
            None => self.traj.eval(&t, &self.ctx).expect("reference requested inside the domain"),
        };
        value.iter().map(|x| ctx.round(x)).collect()
    }

    pub fn into_reference(self) -> Arc<ReferenceFn> {
        let oracle = Arc::new(self);
        Arc::new(move |t, ctx| oracle.eval(t, ctx))
    }
}

impl ProblemCatalogEntry {
    /// The reference solution; for the pendulum this builds the oracle sized
    /// for a study with the given largest N and M.
    pub fn reference(&self, n_max: usize, m_list: &[usize], ctx: &PrecisionContext) -> Result<Arc<ReferenceFn>, ProblemError> {
        match (self.reference_kind, self.problem.exact()) {
            (ReferenceKind::ExactClosedForm, Some(e)) => Ok(e.clone()),
            (ReferenceKind::HighOrderOracle, _) => {
                Ok(PendulumOracle::build(&OracleConfig::for_study(n_max, m_list), ctx)?.into_reference())
            }
            _ => Err(ProblemError::Oracle(format!("{} has no reference", self.name))),
        }
    }

    /// The problem with its reference attached.
    pub fn with_reference(mut self, n_max: usize, m_list: &[usize], ctx: &PrecisionContext) -> Result<Self, ProblemError> {
        if self.problem.exact().is_none() {
            let r = self.reference(n_max, m_list, ctx)?;
            self.problem = self.problem.with_exact_arc(r);
        }
        Ok(self)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ctx() -> PrecisionContext {
        PrecisionContext::new(60).unwrap()
    }

    fn close(a: &Real, b: &Real, tol: &Real) -> bool {
        (a.clone() - b).abs() <= *tol
    }

    #[test]
    fn harmonic_exact_values() {
        let ctx = ctx();
        let h = harmonic_oscillator(&ctx);
        let e = h.problem.exact().unwrap();
        let tol = ctx.unit_roundoff().clone() * 100u32;
        let at = |t: Real| e(&t, &ctx);
        assert_eq!(at(ctx.zero()), vec![ctx.one(), ctx.zero()]);
        let q = at(ctx.pi() / 2u32);
        assert!(close(&q[0], &ctx.zero(), &tol) && close(&q[1], &-ctx.one(), &tol));
        let f = at(ctx.pi() * 4u32);
        assert!(close(&f[0], &ctx.one(), &tol) && close(&f[1], &ctx.zero(), &tol));
        h.problem.validate(&ctx).unwrap();
    }

    #[test]
    fn exact_solutions_satisfy_their_odes() {
        let ctx = ctx();
        let entries = [
            harmonic_oscillator(&ctx),
            dahlquist(&Complex::from_real(ctx.real(-3)), &ctx),
            dahlquist(&Complex::new(ctx.real(-1), ctx.real(2)), &ctx),
            polynomial_rhs(5, 11, &ctx),
        ];
        let h = ctx.pow10(-20);
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for entry in &entries {
            let p = &entry.problem;
            let exact = p.exact().unwrap();
            for _ in 0..100 {
                let t = (p.tf.clone() - &p.t0) * rng.gen::<f64>() + &p.t0;
                let up = exact(&(t.clone() + &h), &ctx);
                let dn = exact(&(t.clone() - &h), &ctx);
                let u = exact(&t, &ctx);
                let f = p.rhs(&u, &t, &ctx);
                for i in 0..p.dim {
                    let deriv = (up[i].clone() - &dn[i]) / (h.clone() * 2u32);
                    let scale = f[i].clone().abs().max(&ctx.one()).clone();
                    assert!(close(&deriv, &f[i], &(ctx.pow10(-30) * scale)), "{}", entry.name);
                }
            }
        }
    }

    #[test]
    fn dahlquist_values() {
        let ctx = ctx();
        let zero = dahlquist(&Complex::zero(&ctx), &ctx);
        assert_eq!(zero.problem.exact().unwrap()(&ctx.real(5), &ctx), vec![ctx.one()]);
        let one = dahlquist(&Complex::one(&ctx), &ctx);
        let e = one.problem.exact().unwrap()(&ctx.one(), &ctx);
        assert!((e[0].to_f64() - std::f64::consts::E).abs() < 1e-15);
    }

    #[test]
    fn polynomial_exact_and_determinism() {
        let ctx = ctx();
        let p = polynomial_problem(vec![ctx.one(), ctx.one(), ctx.one()], &ctx, "p".into());
        let v = p.problem.exact().unwrap()(&ctx.one(), &ctx);
        let expected = ctx.one() + ctx.one() + ctx.ratio(1, 2) + ctx.ratio(1, 3);
        assert!(close(&v[0], &expected, ctx.unit_roundoff()));
        let c = polynomial_problem(vec![ctx.real(3)], &ctx, "c".into());
        let v = c.problem.exact().unwrap()(&ctx.ratio(1, 4), &ctx);
        assert!(close(&v[0], &ctx.ratio(7, 4), ctx.unit_roundoff()));
        assert_eq!(polynomial_coefficients(5, 42, &ctx), polynomial_coefficients(5, 42, &ctx));
        assert_ne!(polynomial_coefficients(5, 42, &ctx), polynomial_coefficients(5, 43, &ctx));
        assert!(!polynomial_coefficients(4, 9, &ctx)[4].is_zero());
    }

    #[test]
    fn catalog_names() {
        let ctx = ctx();
        assert_eq!(lookup("harmonic", &ctx).unwrap().name, "harmonic");
        assert_eq!(lookup("pendulum", &ctx).unwrap().reference_kind, ReferenceKind::HighOrderOracle);
        let d = lookup("dahlquist:-1e6", &ctx).unwrap();
        assert_eq!(d.problem.dim, 1);
        let d = lookup("dahlquist:-1+2i", &ctx).unwrap();
        assert_eq!(d.problem.dim, 2);
        assert_eq!(lookup("poly:3:7", &ctx).unwrap().name, "poly:3:7");
        assert_eq!(lookup("dahlquist:-1e6", &ctx).unwrap().name, "dahlquist:-1e6");
        assert!(matches!(lookup("nosuch", &ctx), Err(ProblemError::Unknown(_))));
        assert!(lookup("poly:x:1", &ctx).is_err());
        assert!(lookup("dahlquist:abc", &ctx).is_err());
        assert!(lookup("harmonic:3", &ctx).is_err());
    }

    #[test]
    fn lambda_parsing() {
        let ctx = ctx();
        let z = parse_lambda("-2.5e-1-3i", &ctx).unwrap();
        assert_eq!((z.re.to_f64(), z.im.to_f64()), (-0.25, -3.0));
        let z = parse_lambda("1e+2+i", &ctx).unwrap();
        assert_eq!((z.re.to_f64(), z.im.to_f64()), (100.0, 1.0));
        let z = parse_lambda("-4i", &ctx).unwrap();
        assert_eq!((z.re.to_f64(), z.im.to_f64()), (0.0, -4.0));
    }

    #[test]
    fn pendulum_initial_state_and_energy() {
        let ctx = ctx();
        let p = pendulum(&ctx);
        assert!(close(&p.problem.u0[0], &(ctx.pi() / 2u32), ctx.unit_roundoff()));
        assert!(pendulum_energy(&p.problem.u0).abs() <= *ctx.unit_roundoff());
    }

    #[test]
    fn coarse_oracle_grid_contains_anchor_nodes() {
        let ctx = ctx();
        let cfg = OracleConfig {
            n_ref: 2,
            m_ref: 8,
            anchors: vec![4, 6],
            extra_digits: 0,
            target_digits: 10,
            dense_target_digits: 5,
        };
        let nodes = cfg.coarse_nodes(&ctx.zero(), &ctx.real(10), &ctx);
        assert!(nodes.windows(2).all(|w| w[0] < w[1]));
        assert!(nodes.windows(2).all(|w| w[1].clone() - &w[0] <= ctx.real(10) / 8u32 + ctx.pow10(-50)));
        for m in [4u32, 6] {
            for n in 0..=m {
                let t = ctx.real(10) * n / m;
                assert!(nodes.iter().any(|x| (x.clone() - &t).abs() <= ctx.pow10(-50)), "{n}/{m}");
            }
        }
        assert_eq!(bisect(&nodes).len(), 2 * nodes.len() - 1);
    }

    #[test]
    fn weak_oracle_is_rejected() {
        let ctx = PrecisionContext::new(40).unwrap();
        let cfg = OracleConfig {
            n_ref: 2,
            m_ref: 8,
            anchors: vec![4],
            extra_digits: 0,
            target_digits: 30,
            dense_target_digits: 5,
        };
        assert!(PendulumOracle::build(&cfg, &ctx).is_err());
    }

    #[test]
    fn modest_oracle_converges() {
        let ctx = PrecisionContext::new(40).unwrap();
        let cfg = OracleConfig {
            n_ref: 8,
            m_ref: 40,
            anchors: vec![4, 7],
            extra_digits: 10,
            target_digits: 20,
            dense_target_digits: 8,
        };
        let oracle = PendulumOracle::build(&cfg, &ctx).unwrap();
        let u0 = oracle.eval(&ctx.zero(), &ctx);
        assert_eq!(u0[0], ctx.pi() / 2u32);
        let mut max_angle: f64 = 0.0;
        for j in 0..=100 {
            let u = oracle.eval(&ctx.ratio(j, 10), &ctx);
            max_angle = max_angle.max(u[0].to_f64().abs());
        }
        assert!(max_angle <= std::f64::consts::FRAC_PI_2 + 1e-12);
        // an anchor node gets the node value, not the dense value
        let t = ctx.real(10) * 3u32 / 7u32;
        let node = oracle.eval(&t, &ctx);
        let h = pendulum_energy(&node);
        assert!(h.abs() <= ctx.pow10(-20));
    }
}
