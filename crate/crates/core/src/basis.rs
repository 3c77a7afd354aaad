//! Shifted Legendre polynomials, quadrature nodes and weights, and the nodal
//! Lagrange basis on the reference interval `[0, 1]`.

use std::fmt;
use std::str::FromStr;

use rug::ops::Pow;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::arith::{PrecisionContext, Real};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum BasisError {
    #[error("root iteration for degree {degree} did not converge after {iterations} iterations")]
    NonConvergence { degree: usize, iterations: usize },
    #[error("nodes {0} and {1} coincide")]
    CoincidentNodes(usize, usize),
    #[error("degree {degree} needs at least {required} decimal digits, context has {digits}")]
    Conditioning { degree: usize, required: u32, digits: u32 },
    #[error("unknown node family {0:?}")]
    UnknownFamily(String),
}

/// Which polynomial's roots the collocation nodes are taken from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum NodeFamily {
    /// Roots of the shifted Legendre polynomial of degree N+1, all interior.
    GaussLegendre,
    /// Left Radau points, containing τ = 0.
    RadauLeft,
    /// Right Radau points, containing τ = 1.
    RadauRight,
}

impl NodeFamily {
    pub fn as_str(self) -> &'static str {
        match self {
            NodeFamily::GaussLegendre => "gauss-legendre",
            NodeFamily::RadauLeft => "radau-left",
            NodeFamily::RadauRight => "radau-right",
        }
    }
}

impl fmt::Display for NodeFamily {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for NodeFamily {
    type Err = BasisError;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "gauss-legendre" | "gl" => Ok(NodeFamily::GaussLegendre),
            "radau-left" => Ok(NodeFamily::RadauLeft),
            "radau-right" => Ok(NodeFamily::RadauRight),
            other => Err(BasisError::UnknownFamily(other.to_string())),
        }
    }
}

/// Minimum working digits for a degree-`n` monomial basis.
///
/// Monomial Lagrange coefficients grow roughly like 4^N, so identity checks
/// lose about `0.6 N` digits to cancellation.
pub fn required_digits(n: usize) -> u32 {
    (0.7 * n as f64 + 40.0).ceil() as u32
}

pub fn check_conditioning(n: usize, ctx: &PrecisionContext) -> Result<(), BasisError> {
    let required = required_digits(n);
    if ctx.digits() < required {
        return Err(BasisError::Conditioning {
            degree: n,
            required,
            digits: ctx.digits(),
        });
    }
    Ok(())
}

/// Value and τ-derivative of the shifted Legendre polynomial `P̃_n(τ) = P_n(2τ − 1)`.
pub fn shifted_legendre(n: usize, tau: &Real, ctx: &PrecisionContext) -> (Real, Real) {
    let (p, dp, _, _) = legendre_pair(n, tau, ctx);
    (p, dp)
}

/// Returns `(P̃_n, P̃_n', P̃_{n-1}, P̃_{n-1}')`, derivatives with respect to τ.
fn legendre_pair(n: usize, tau: &Real, ctx: &PrecisionContext) -> (Real, Real, Real, Real) {
    let x = ctx.round(tau) * 2u32 - 1u32;
    // P_{k+1} = ((2k+1) x P_k - k P_{k-1}) / (k+1);  P'_{k+1} = P'_{k-1} + (2k+1) P_k   (d/dx)
    let mut p_prev = ctx.zero();
    let mut dp_prev = ctx.zero();
    let mut p = ctx.one();
    let mut dp = ctx.zero();
    for k in 0..n {
        let k_u = k as u32;
        let p_next = (x.clone() * &p * (2 * k_u + 1) - p_prev.clone() * k_u) / (k_u + 1);
        let dp_next = dp_prev.clone() + p.clone() * (2 * k_u + 1);
        p_prev = std::mem::replace(&mut p, p_next);
        dp_prev = std::mem::replace(&mut dp, dp_next);
    }
    (p, dp * 2u32, p_prev, dp_prev * 2u32)
}

/// The polynomial whose roots are the nodes of `family` at degree `n`.
fn family_polynomial(family: NodeFamily, n: usize, tau: &Real, ctx: &PrecisionContext) -> (Real, Real) {
    let (p, dp, q, dq) = legendre_pair(n + 1, tau, ctx);
    match family {
        NodeFamily::GaussLegendre => (p, dp),
        NodeFamily::RadauRight => (p - q, dp - dq),
        NodeFamily::RadauLeft => (p + q, dp + dq),
    }
}

fn initial_guesses(n: usize, family: NodeFamily) -> Vec<f64> {
    use std::f64::consts::PI;
    let count = n + 1;
    let x: Vec<f64> = match family {
        NodeFamily::GaussLegendre => (0..count)
            .map(|i| -((PI * (i as f64 + 0.75)) / (count as f64 + 0.5)).cos())
            .collect(),
        NodeFamily::RadauLeft => (0..count)
            .map(|j| -((2.0 * PI * j as f64) / (2.0 * n as f64 + 1.0)).cos())
            .collect(),
        NodeFamily::RadauRight => (0..count)
            .map(|j| ((2.0 * PI * (n - j) as f64) / (2.0 * n as f64 + 1.0)).cos())
            .collect(),
    };
    x.into_iter().map(|x| 0.5 * (x + 1.0)).collect()
}

const MAX_ROOT_ITERATIONS: usize = 200;

/// The `N + 1` ascending nodes of `family` at degree `n` on `[0, 1]`.
///
/// Newton steps with simultaneous deflation (Aberth) from cosine guesses;
/// Radau endpoints are pinned exactly.
pub fn compute_nodes(n: usize, family: NodeFamily, ctx: &PrecisionContext) -> Result<Vec<Real>, BasisError> {
    let count = n + 1;
    let mut z: Vec<Real> = initial_guesses(n, family).into_iter().map(|g| ctx.real(g)).collect();
    match family {
        NodeFamily::RadauLeft => z[0] = ctx.zero(),
        NodeFamily::RadauRight => z[count - 1] = ctx.one(),
        NodeFamily::GaussLegendre => {}
    }
    let step_tol = ctx.unit_roundoff().clone() / 1000u32;
    let residual_tol = ctx.unit_roundoff().clone() * 100u32;
    let mut converged_sweeps = 0;
    for _ in 0..MAX_ROOT_ITERATIONS {
        let mut max_step = ctx.zero();
        for i in 0..count {
            let (f, df) = family_polynomial(family, n, &z[i], ctx);
            if f.is_zero() {
                continue;
            }
            let ratio = f / df;
            let mut repulsion = ctx.zero();
            for (j, zj) in z.iter().enumerate() {
                if j != i {
                    repulsion += (z[i].clone() - zj).recip();
                }
            }
            let denom = ctx.one() - ratio.clone() * &repulsion;
            let step = ratio / denom;
            let mag = step.clone().abs();
            if mag > max_step {
                max_step = mag;
            }
            z[i] -= step;
        }
        if max_step <= step_tol {
            converged_sweeps += 1;
            if converged_sweeps >= 2 {
                break;
            }
        }
    }
    z.sort_by(|a, b| a.partial_cmp(b).expect("finite nodes"));
    let max_residual = z
        .iter()
        .map(|t| family_polynomial(family, n, t, ctx).0.abs())
        .fold(ctx.zero(), |acc, r| if r > acc { r } else { acc });
    if converged_sweeps < 2 || max_residual > residual_tol {
        return Err(BasisError::NonConvergence {
            degree: n,
            iterations: MAX_ROOT_ITERATIONS,
        });
    }
    Ok(z)
}

/// Gauss-Legendre rule with `points` nodes on `[0, 1]`, weights from the
/// closed form `1 / (τ (1 − τ) P̃'(τ)²)`.
pub fn gauss_legendre_rule(points: usize, ctx: &PrecisionContext) -> Result<(Vec<Real>, Vec<Real>), BasisError> {
    assert!(points >= 1, "a quadrature rule needs at least one node");
    let nodes = compute_nodes(points - 1, NodeFamily::GaussLegendre, ctx)?;
    let weights = nodes
        .iter()
        .map(|t| {
            let (_, d) = shifted_legendre(points, t, ctx);
            (t.clone() * (ctx.one() - t) * d.square()).recip()
        })
        .collect();
    Ok((nodes, weights))
}

/// Monomial coefficients `φ_{p,k}` of the Lagrange polynomials through `tau`.
pub fn lagrange_coefficients(tau: &[Real], ctx: &PrecisionContext) -> Result<Vec<Vec<Real>>, BasisError> {
    let count = tau.len();
    let mut phi = Vec::with_capacity(count);
    for p in 0..count {
        let mut poly = vec![ctx.one()];
        let mut denom = ctx.one();
        for (k, tk) in tau.iter().enumerate() {
            if k == p {
                continue;
            }
            let gap = tau[p].clone() - tk;
            if gap.clone().abs() <= *ctx.identity_tol() {
                return Err(BasisError::CoincidentNodes(p.min(k), p.max(k)));
            }
            denom *= gap;
            // poly *= (τ - τ_k)
            let mut next = vec![ctx.zero(); poly.len() + 1];
            for (j, c) in poly.iter().enumerate() {
                next[j + 1] += c;
                next[j] -= c.clone() * tk;
            }
            poly = next;
        }
        phi.push(poly.into_iter().map(|c| c / &denom).collect());
    }
    Ok(phi)
}

/// `∫₀¹ φ_p dτ` by exact monomial integration.
pub fn compute_weights(phi: &[Vec<Real>], ctx: &PrecisionContext) -> Vec<Real> {
    phi.iter()
        .map(|coeffs| {
            coeffs
                .iter()
                .enumerate()
                .fold(ctx.zero(), |acc, (k, c)| acc + c.clone() / (k as u32 + 1))
        })
        .collect()
}

fn horner(coeffs: &[Real], tau: &Real, ctx: &PrecisionContext) -> Real {
    coeffs
        .iter()
        .rev()
        .fold(ctx.zero(), |acc, c| acc * tau + c)
}

/// Extra digits used for the monomial coefficient algebra at degree `n`.
///
/// Products and sums of `φ_{p,k}` cancel about `1.3 N` digits.
pub(crate) fn coefficient_guard_digits(n: usize) -> u32 {
    (1.3 * n as f64).ceil() as u32 + 5
}

/// Nodal Lagrange basis of degree N on `[0, 1]` with its quadrature rule.
#[derive(Debug, Clone)]
pub struct NodalBasis {
    n: usize,
    family: NodeFamily,
    tau: Vec<Real>,
    w: Vec<Real>,
    phi: Vec<Vec<Real>>,
    psi: Vec<Real>,
    psi_tilde: Vec<Real>,
    // coefficients of the same polynomials at extended precision
    phi_ext: Vec<Vec<Real>>,
    ext: PrecisionContext,
}

impl NodalBasis {
    pub fn new(n: usize, family: NodeFamily, ctx: &PrecisionContext) -> Result<Self, BasisError> {
        check_conditioning(n, ctx)?;
        let tau = compute_nodes(n, family, ctx)?;
        Self::from_nodes(tau, family, ctx)
    }

    /// Builds the basis through given nodes (used when importing tableaus).
    pub fn from_nodes(tau: Vec<Real>, family: NodeFamily, ctx: &PrecisionContext) -> Result<Self, BasisError> {
        let n = tau.len() - 1;
        let ext = ctx.extended(coefficient_guard_digits(n));
        let tau_ext: Vec<Real> = tau.iter().map(|t| ext.round(t)).collect();
        let phi_ext = lagrange_coefficients(&tau_ext, &ext)?;
        let w = compute_weights(&phi_ext, &ext).iter().map(|x| ctx.round(x)).collect();
        let psi = phi_ext.iter().map(|c| ctx.round(&c[0])).collect();
        let psi_tilde = phi_ext
            .iter()
            .map(|c| ctx.round(&c.iter().fold(ext.zero(), |acc, x| acc + x)))
            .collect();
        let phi = phi_ext
            .iter()
            .map(|c| c.iter().map(|x| ctx.round(x)).collect())
            .collect();
        Ok(Self {
            n,
            family,
            tau,
            w,
            phi,
            psi,
            psi_tilde,
            phi_ext,
            ext,
        })
    }

    /// Polynomial degree N.
    pub fn degree(&self) -> usize {
        self.n
    }

    /// Number of nodes, N + 1.
    pub fn len(&self) -> usize {
        self.n + 1
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn family(&self) -> NodeFamily {
        self.family
    }

    pub fn nodes(&self) -> &[Real] {
        &self.tau
    }

    pub fn weights(&self) -> &[Real] {
        &self.w
    }

    /// `φ_{p,k}`, row p holding the monomial coefficients of `φ_p`.
    pub fn coefficients(&self) -> &[Vec<Real>] {
        &self.phi
    }

    /// Coefficients at extended precision together with that precision.
    pub(crate) fn coefficients_extended(&self) -> (&[Vec<Real>], &PrecisionContext) {
        (&self.phi_ext, &self.ext)
    }

    /// `φ_p(0)`
    pub fn psi(&self) -> &[Real] {
        &self.psi
    }

    /// `φ_p(1)`
    pub fn psi_tilde(&self) -> &[Real] {
        &self.psi_tilde
    }

    /// All basis functions at `tau`. Exact node hits return unit vectors.
    pub fn eval(&self, tau: &Real, ctx: &PrecisionContext) -> Vec<Real> {
        if let Some(q) = self.tau.iter().position(|t| t == tau) {
            return (0..self.len())
                .map(|p| if p == q { ctx.one() } else { ctx.zero() })
                .collect();
        }
        self.phi.iter().map(|c| horner(c, tau, ctx)).collect()
    }

    /// Derivatives `φ_p'(τ)`.
    pub fn eval_derivative(&self, tau: &Real, ctx: &PrecisionContext) -> Vec<Real> {
        self.phi
            .iter()
            .map(|c| {
                let deriv: Vec<Real> = c
                    .iter()
                    .enumerate()
                    .skip(1)
                    .map(|(k, v)| v.clone() * k as u32)
                    .collect();
                horner(&deriv, tau, ctx)
            })
            .collect()
    }

    /// `φ_p(τ)` from the product form, free of monomial cancellation.
    pub fn eval_product(&self, p: usize, tau: &Real, ctx: &PrecisionContext) -> Real {
        let mut v = ctx.one();
        for (k, tk) in self.tau.iter().enumerate() {
            if k != p {
                v *= (tau.clone() - tk) / (self.tau[p].clone() - tk);
            }
        }
        v
    }

    /// Largest disagreement between the stored weights and both defining
    /// integrals `∫ φ_p` and `∫ φ_p²`, each evaluated by an independent
    /// (N+2)-point Gauss-Legendre rule on the product form of `φ_p`.
    pub fn weight_identity_residual(&self, ctx: &PrecisionContext) -> Result<Real, BasisError> {
        let (x, wx) = gauss_legendre_rule(self.n + 2, ctx)?;
        let mut worst = ctx.zero();
        for (p, w) in self.w.iter().enumerate() {
            let mut lin = ctx.zero();
            let mut sq = ctx.zero();
            for (xi, wi) in x.iter().zip(&wx) {
                let v = self.eval_product(p, xi, ctx);
                lin += wi.clone() * &v;
                sq += wi.clone() * v.square();
            }
            for r in [lin - w, sq - w] {
                let r = r.abs();
                if r > worst {
                    worst = r;
                }
            }
        }
        Ok(worst)
    }

    /// `max_r |Σ w_p τ_p^r − 1/(r+1)|` over `0 <= r < up_to`.
    pub fn quadrature_residual(&self, up_to: usize, ctx: &PrecisionContext) -> Real {
        let mut worst = ctx.zero();
        for r in 0..up_to {
            let mut s = ctx.zero();
            for (t, w) in self.tau.iter().zip(&self.w) {
                s += w.clone() * t.clone().pow(r as u32);
            }
            let res = (s - ctx.one() / (r as u32 + 1)).abs();
            if res > worst {
                worst = res;
            }
        }
        worst
    }
}
