//! The ADER-DG coefficient matrices and the implicit Runge-Kutta tableau they
//! define.
//!
//! The predictor's weak form yields a stiffness-like matrix `κ` and the
//! diagonal mass matrix `μ = diag(w)`; the Runge-Kutta matrix is `a = κ⁻¹μ`
//! with abscissas `τ` and weights `w` taken from the nodal basis.

mod document;
mod stability;
mod verify;

pub use document::{export_tableau, import_tableau, TableauDocument, SCHEMA_VERSION};
pub use stability::{
    build_q_m, pade_coefficients, pade_exp, pade_series_residual, stability_function, stability_series_residual,
    StabilityMatrices,
};
pub use verify::{
    left_half_plane_samples, pade_deviation, sample_disc, verify_tableau, Check, Expectation, VerificationReport,
    DEFAULT_SAMPLE_SEED,
};

use thiserror::Error;

use crate::arith::{PrecisionContext, Real};
use crate::basis::{BasisError, NodalBasis, NodeFamily};
use crate::linalg::{LinalgError, Lu, Matrix};

#[derive(Debug, Error)]
pub enum TableauError {
    #[error(transparent)]
    Basis(#[from] BasisError),
    #[error("coefficient matrix is singular: {0}")]
    Singular(#[from] LinalgError),
    #[error("malformed tableau document: {0}")]
    Document(String),
    #[error("imported tableau fails check {check}: residual {residual:e}")]
    Verification { check: String, residual: f64 },
    #[error("stability function has a pole at z = {0}")]
    Pole(String),
}

/// Coefficients of the ADER-DG method viewed as an (N+1)-stage implicit
/// Runge-Kutta method.
#[derive(Debug, Clone)]
pub struct AderDgTableau {
    basis: NodalBasis,
    kappa: Matrix<Real>,
    kappa_inv: Matrix<Real>,
    a: Matrix<Real>,
    digits: u32,
    kappa_form_residual: Real,
}

/// Polynomial product of two coefficient vectors integrated over `[0, 1]`,
/// with the first factor differentiated.
fn integrate_derivative_product(p: &[Real], q: &[Real], ctx: &PrecisionContext) -> Real {
    let mut acc = ctx.zero();
    for (j, pj) in p.iter().enumerate().skip(1) {
        for (k, qk) in q.iter().enumerate() {
            // ∫ j τ^{j-1} τ^k = j / (j + k)
            acc += pj.clone() * qk * j as u32 / (j as u32 + k as u32);
        }
    }
    acc
}

/// `κ_pq = ψ̃_p ψ̃_q − ∫ φ_p' φ_q` at the basis' extended precision, plus the
/// largest disagreement with the equivalent form `ψ_p ψ_q + ∫ φ_p φ_q'`.
fn kappa_extended(basis: &NodalBasis) -> (Matrix<Real>, Real) {
    let (phi, ext) = basis.coefficients_extended();
    let s = basis.len();
    let psi: Vec<Real> = phi.iter().map(|c| c[0].clone()).collect();
    let psi_t: Vec<Real> = phi.iter().map(|c| c.iter().fold(ext.zero(), |a, x| a + x)).collect();
    let mut kappa = Matrix::zeros(s, s, ext);
    let mut worst = ext.zero();
    for p in 0..s {
        for q in 0..s {
            let right = psi_t[p].clone() * &psi_t[q] - integrate_derivative_product(&phi[p], &phi[q], ext);
            let left = psi[p].clone() * &psi[q] + integrate_derivative_product(&phi[q], &phi[p], ext);
            let diff = (left - &right).abs();
            if diff > worst {
                worst = diff;
            }
            kappa[(p, q)] = right;
        }
    }
    (kappa, worst)
}

/// `κ` by exact monomial integration, rounded to working precision, with the
/// disagreement between its two integration-by-parts forms.
pub fn build_kappa(basis: &NodalBasis, ctx: &PrecisionContext) -> (Matrix<Real>, Real) {
    let (k, worst) = kappa_extended(basis);
    (round_matrix(&k, ctx), ctx.round(&worst))
}

fn round_matrix(m: &Matrix<Real>, ctx: &PrecisionContext) -> Matrix<Real> {
    Matrix::from_fn(m.rows(), m.cols(), |r, c| ctx.round(&m[(r, c)]))
}

impl AderDgTableau {
    /// Builds the degree-`n` tableau for the given node family.
    pub fn build(n: usize, family: NodeFamily, ctx: &PrecisionContext) -> Result<Self, TableauError> {
        let basis = NodalBasis::new(n, family, ctx)?;
        Self::from_basis(basis, ctx)
    }

    pub fn from_basis(basis: NodalBasis, ctx: &PrecisionContext) -> Result<Self, TableauError> {
        let (kappa_ext, residual) = kappa_extended(&basis);
        let ext = basis.coefficients_extended().1.clone();
        let s = basis.len();
        // κ a = μ solved column-wise at extended precision, then rounded.
        let lu = Lu::factor(kappa_ext.clone(), &ext.zero())?;
        let w_ext: Vec<Real> = basis.weights().iter().map(|w| ext.round(w)).collect();
        let a = round_matrix(&lu.solve_matrix(&Matrix::diag(&w_ext)), ctx);
        let kappa_inv = round_matrix(&lu.solve_matrix(&Matrix::identity(s, &ext)), ctx);
        Ok(Self {
            basis,
            kappa: round_matrix(&kappa_ext, ctx),
            kappa_inv,
            a,
            digits: ctx.digits(),
            kappa_form_residual: ctx.round(&residual),
        })
    }

    pub(crate) fn from_parts(
        basis: NodalBasis,
        kappa: Matrix<Real>,
        a: Matrix<Real>,
        ctx: &PrecisionContext,
    ) -> Result<Self, TableauError> {
        let kappa_inv = kappa.inverse(ctx)?;
        Ok(Self {
            basis,
            kappa,
            kappa_inv,
            a,
            digits: ctx.digits(),
            kappa_form_residual: ctx.zero(),
        })
    }

    /// Polynomial degree N.
    pub fn degree(&self) -> usize {
        self.basis.degree()
    }

    /// Number of stages, N + 1.
    pub fn stages(&self) -> usize {
        self.basis.len()
    }

    pub fn family(&self) -> NodeFamily {
        self.basis.family()
    }

    pub fn basis(&self) -> &NodalBasis {
        &self.basis
    }

    pub fn nodes(&self) -> &[Real] {
        self.basis.nodes()
    }

    pub fn weights(&self) -> &[Real] {
        self.basis.weights()
    }

    pub fn psi(&self) -> &[Real] {
        self.basis.psi()
    }

    pub fn psi_tilde(&self) -> &[Real] {
        self.basis.psi_tilde()
    }

    pub fn kappa(&self) -> &Matrix<Real> {
        &self.kappa
    }

    pub fn kappa_inv(&self) -> &Matrix<Real> {
        &self.kappa_inv
    }

    /// The Runge-Kutta matrix `a = κ⁻¹ μ`.
    pub fn a(&self) -> &Matrix<Real> {
        &self.a
    }

    /// `μ = diag(w)`
    pub fn mu(&self) -> Matrix<Real> {
        Matrix::diag(self.weights())
    }

    /// Decimal digits the tableau was built with.
    pub fn digits(&self) -> u32 {
        self.digits
    }

    /// Disagreement between the two integration-by-parts forms of `κ`.
    pub fn kappa_form_residual(&self) -> &Real {
        &self.kappa_form_residual
    }

    /// `max_p Σ_q |a_pq|`, the factor in the fixed-point contraction bound.
    pub fn a_row_abs_max(&self, ctx: &PrecisionContext) -> Real {
        self.a.max_row_abs_sum(ctx)
    }
}

/// Residuals of the six structural relations between `κ`, `a`, `w`, `ψ`, `ψ̃`.
#[derive(Debug, Clone)]
pub struct Lemma21Residuals {
    /// `Σ_q a_pq ψ_q / w_q − 1`. The unweighted form `Σ_q a_pq ψ_q = w_p`
    /// holds for `μκ⁻¹` rather than `κ⁻¹μ`; see [`unweighted_a_psi_residual`].
    pub a_psi: Real,
    /// `Σ_q [κ⁻¹]_pq ψ_q − 1`
    pub kappa_inv_psi: Real,
    /// `Σ_q κ_pq − ψ_p`
    pub kappa_row_sum: Real,
    /// `Σ_p a_pq ψ̃_p − w_q`
    pub a_psi_tilde: Real,
    /// `Σ_p κ_pq − ψ̃_q`
    pub kappa_col_sum: Real,
    /// `tr κ − Σ ψ_p²`, or `tr κ − ½ Σ (ψ_p² + ψ̃_p²)` for node sets without
    /// the `τ ↦ 1 − τ` symmetry.
    pub trace: Real,
}

impl Lemma21Residuals {
    pub const NAMES: [&'static str; 6] = [
        "sum_q a_pq psi_q / w_q = 1",
        "sum_q kinv_pq psi_q = 1",
        "sum_q kappa_pq = psi_p",
        "sum_p a_pq psit_p = w_q",
        "sum_p kappa_pq = psit_q",
        "trace(kappa) = sum psi_p^2",
    ];

    pub fn as_array(&self) -> [&Real; 6] {
        [
            &self.a_psi,
            &self.kappa_inv_psi,
            &self.kappa_row_sum,
            &self.a_psi_tilde,
            &self.kappa_col_sum,
            &self.trace,
        ]
    }

    pub fn max(&self) -> Real {
        self.as_array()
            .into_iter()
            .fold(Real::new(self.a_psi.prec()), |acc, r| if *r > acc { r.clone() } else { acc })
    }
}

fn max_abs_of(values: impl IntoIterator<Item = Real>, ctx: &PrecisionContext) -> Real {
    values.into_iter().fold(ctx.zero(), |acc, v| {
        let v = v.abs();
        if v > acc {
            v
        } else {
            acc
        }
    })
}

pub fn verify_lemma21(tab: &AderDgTableau, ctx: &PrecisionContext) -> Lemma21Residuals {
    let s = tab.stages();
    let psi = tab.psi();
    let psi_t = tab.psi_tilde();
    let w = tab.weights();
    let a = tab.a();
    let kinv = tab.kappa_inv();
    let kappa = tab.kappa();

    let psi_over_w: Vec<Real> = psi.iter().zip(w).map(|(p, w)| p.clone() / w).collect();
    let a_psi = max_abs_of(a.matvec(&psi_over_w).into_iter().map(|x| x - 1u32), ctx);
    let kappa_inv_psi = max_abs_of(kinv.matvec(psi).into_iter().map(|x| x - 1u32), ctx);
    let kappa_row_sum = max_abs_of(kappa.row_sums(ctx).into_iter().zip(psi).map(|(x, p)| x - p), ctx);
    let a_psi_tilde = max_abs_of(
        a.transpose().matvec(psi_t).into_iter().zip(w).map(|(x, w)| x - w),
        ctx,
    );
    let kappa_col_sum = max_abs_of(kappa.col_sums(ctx).into_iter().zip(psi_t).map(|(x, p)| x - p), ctx);

    let trace = (0..s).fold(ctx.zero(), |acc, p| acc + &kappa[(p, p)]);
    let psi_sq = psi.iter().fold(ctx.zero(), |acc, x| acc + x.clone().square());
    let target = if tab.family() == NodeFamily::GaussLegendre {
        psi_sq
    } else {
        let psit_sq = psi_t.iter().fold(ctx.zero(), |acc, x| acc + x.clone().square());
        (psi_sq + psit_sq) / 2u32
    };
    let trace = (trace - target).abs();

    Lemma21Residuals {
        a_psi,
        kappa_inv_psi,
        kappa_row_sum,
        a_psi_tilde,
        kappa_col_sum,
        trace,
    }
}

/// `max_p |Σ_q a_pq ψ_q − w_p|`. Zero only when the weights are all equal
/// (N ≤ 1 for Gauss-Legendre nodes); reported for diagnostics.
pub fn unweighted_a_psi_residual(tab: &AderDgTableau, ctx: &PrecisionContext) -> Real {
    max_abs_of(
        tab.a().matvec(tab.psi()).into_iter().zip(tab.weights()).map(|(x, w)| x - w),
        ctx,
    )
}

/// Which simplifying order condition to evaluate.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Simplifying {
    /// `Σ_q w_q τ_q^r = 1/(r+1)`
    B,
    /// `Σ_q a_pq τ_q^r = τ_p^{r+1}/(r+1)`
    C,
    /// `Σ_q w_q a_qp τ_q^r = w_p (1 − τ_p^{r+1})/(r+1)`
    D,
}

/// Largest residual of condition `which` over `0 <= r < order` (and all p).
pub fn check_simplifying(tab: &AderDgTableau, which: Simplifying, order: usize, ctx: &PrecisionContext) -> Real {
    assert!(order >= 1, "simplifying conditions start at order 1");
    let s = tab.stages();
    let tau = tab.nodes();
    let w = tab.weights();
    let a = tab.a();
    let mut worst = ctx.zero();
    let mut update = |r: Real| {
        let r = r.abs();
        if r > worst {
            worst = r;
        }
    };
    // powers[q][r] = τ_q^r
    let powers: Vec<Vec<Real>> = tau
        .iter()
        .map(|t| {
            let mut v = Vec::with_capacity(order + 1);
            let mut x = ctx.one();
            for _ in 0..=order {
                v.push(x.clone());
                x *= t;
            }
            v
        })
        .collect();
    for r in 0..order {
        let inv = ctx.one() / (r as u32 + 1);
        match which {
            Simplifying::B => {
                let lhs = (0..s).fold(ctx.zero(), |acc, q| acc + w[q].clone() * &powers[q][r]);
                update(lhs - &inv);
            }
            Simplifying::C => {
                for p in 0..s {
                    let lhs = (0..s).fold(ctx.zero(), |acc, q| acc + a[(p, q)].clone() * &powers[q][r]);
                    update(lhs - powers[p][r + 1].clone() * &inv);
                }
            }
            Simplifying::D => {
                for p in 0..s {
                    let lhs = (0..s).fold(ctx.zero(), |acc, q| {
                        acc + w[q].clone() * &a[(q, p)] * &powers[q][r]
                    });
                    let rhs = w[p].clone() * &inv * (ctx.one() - &powers[p][r + 1]);
                    update(lhs - rhs);
                }
            }
        }
    }
    worst
}
