//! Algebraic stability matrices and the linear stability function.

use rug::Float;

use super::{AderDgTableau, TableauError};
use crate::arith::{Complex, PrecisionContext, Real};
use crate::linalg::{Lu, Matrix};

/// `Q`, `M` and the quantities certifying their rank-one structure.
#[derive(Debug, Clone)]
pub struct StabilityMatrices {
    pub q: Matrix<Real>,
    pub m: Matrix<Real>,
    /// `aᵀψ`
    pub v: Vec<Real>,
    /// `|ψ|²`, the only nonzero eigenvalue of `Q`.
    pub lambda_q: Real,
    /// `|aᵀψ|²`, the only nonzero eigenvalue of `M`.
    pub lambda_m: Real,
    /// `‖Q − ψψᵀ‖_max`
    pub q_dyadic_residual: Real,
    /// `‖Q − ψ̃ψ̃ᵀ‖_max`, kept for diagnostics; nonzero in general.
    pub q_tilde_residual: Real,
    /// `‖M − vvᵀ‖_max`
    pub m_dyadic_residual: Real,
    /// `‖M − (μa + aᵀμ − wwᵀ)‖_max`, the classical form of `M`.
    pub m_classical_residual: Real,
    /// `‖Q − Qᵀ‖_max`
    pub q_asymmetry: Real,
    /// Bound on `‖M − vvᵀ‖₂`. Every eigenvalue of `M` other than `λ_M` lies in
    /// `[−bound, bound]`, so `−bound` certifies nonnegativity.
    pub m_perturbation_bound: Real,
}

pub fn build_q_m(tab: &AderDgTableau, ctx: &PrecisionContext) -> StabilityMatrices {
    let s = tab.stages();
    let w = tab.weights();
    let psi = tab.psi();
    let a = tab.a();
    let mu = tab.mu();
    // α = μ⁻¹ κ
    let alpha = Matrix::from_fn(s, s, |r, c| tab.kappa()[(r, c)].clone() / &w[r]);
    let alpha_t = alpha.transpose();
    let alpha_t_w = alpha_t.matvec(w);
    let q = mu
        .matmul(&alpha)
        .add(&alpha_t.matmul(&mu))
        .sub(&Matrix::outer(&alpha_t_w, &alpha_t_w));
    let a_t = a.transpose();
    let m = a_t.matmul(&q).matmul(a);
    let v = a_t.matvec(psi);

    let m_classical = mu.matmul(a).add(&a_t.matmul(&mu)).sub(&Matrix::outer(w, w));
    let dyad_m = Matrix::outer(&v, &v);
    let m_err = m.sub(&dyad_m);
    let norm_sq = |x: &[Real]| x.iter().fold(ctx.zero(), |acc, y| acc + y.clone().square());

    StabilityMatrices {
        q_dyadic_residual: q.max_abs_diff(&Matrix::outer(psi, psi), ctx),
        q_tilde_residual: q.max_abs_diff(&Matrix::outer(tab.psi_tilde(), tab.psi_tilde()), ctx),
        m_dyadic_residual: m_err.max_abs(ctx),
        m_classical_residual: m.max_abs_diff(&m_classical, ctx),
        q_asymmetry: q.max_abs_diff(&q.transpose(), ctx),
        // symmetric part of the perturbation, bounded by its ∞-norm
        m_perturbation_bound: m_err.add(&m_err.transpose()).max_row_abs_sum(ctx) / 2u32,
        lambda_q: norm_sq(psi),
        lambda_m: norm_sq(&v),
        q,
        m,
        v,
    }
}

/// `R(z) = 1 + z wᵀ (I − z a)⁻¹ 1`.
pub fn stability_function(tab: &AderDgTableau, z: &Complex, ctx: &PrecisionContext) -> Result<Complex, TableauError> {
    if z.is_zero() {
        return Ok(Complex::one(ctx));
    }
    let s = tab.stages();
    let a = tab.a();
    let system = Matrix::from_fn(s, s, |r, c| {
        let za = z.scale(&a[(r, c)]);
        if r == c {
            &Complex::one(ctx) - &za
        } else {
            -za
        }
    });
    let scale = z.abs() * a.max_abs(ctx);
    let threshold = ctx.identity_tol().clone() * if scale > 1u32 { scale } else { ctx.one() };
    let lu = Lu::factor(system, &threshold).map_err(|_| TableauError::Pole(z.to_string()))?;
    let x = lu.solve(&vec![Complex::one(ctx); s]);
    let wx = x
        .iter()
        .zip(tab.weights())
        .fold(Complex::zero(ctx), |acc, (xi, wi)| &acc + &xi.scale(wi));
    Ok(&Complex::one(ctx) + &(z * &wx))
}

fn factorial(k: u32, ctx: &PrecisionContext) -> Real {
    Float::with_val(ctx.bits(), Float::factorial(k))
}

/// Coefficients of the `(m, n)` Padé approximant of `exp`, lowest degree first.
/// The denominator coefficients already carry their alternating signs.
pub fn pade_coefficients(m: usize, n: usize, ctx: &PrecisionContext) -> (Vec<Real>, Vec<Real>) {
    let (m32, n32) = (m as u32, n as u32);
    let total = factorial(m32 + n32, ctx);
    let coef = |deg: u32, j: u32| -> Real {
        factorial(m32 + n32 - j, ctx) * factorial(deg, ctx) / (total.clone() * factorial(j, ctx) * factorial(deg - j, ctx))
    };
    let num = (0..=m32).map(|j| coef(m32, j)).collect();
    let den = (0..=n32)
        .map(|j| {
            let c = coef(n32, j);
            if j % 2 == 1 {
                -c
            } else {
                c
            }
        })
        .collect();
    (num, den)
}

fn horner_complex(coefs: &[Real], z: &Complex, ctx: &PrecisionContext) -> Complex {
    coefs
        .iter()
        .rev()
        .fold(Complex::zero(ctx), |acc, c| &(&acc * z) + &Complex::from_real(c.clone()))
}

/// The `(N, N+1)` Padé approximant of `exp(z)`.
pub fn pade_exp(n: usize, z: &Complex, ctx: &PrecisionContext) -> Result<Complex, TableauError> {
    let (num, den) = pade_coefficients(n, n + 1, ctx);
    let p = horner_complex(&num, z, ctx);
    let q = horner_complex(&den, z, ctx);
    if q.abs() <= *ctx.identity_tol() {
        return Err(TableauError::Pole(z.to_string()));
    }
    p.checked_div(&q).ok_or_else(|| TableauError::Pole(z.to_string()))
}

/// Taylor agreement of the `(N, N+1)` Padé approximant with `exp`.
///
/// Returns the largest coefficient mismatch through order `2N+1` and the
/// mismatch at order `2N+2`, which must be nonzero.
pub fn pade_series_residual(n: usize, ctx: &PrecisionContext) -> (Real, Real) {
    let (num, den) = pade_coefficients(n, n + 1, ctx);
    let order = 2 * n + 2;
    // series of num / den, den[0] = 1
    let mut c: Vec<Real> = Vec::with_capacity(order + 1);
    for k in 0..=order {
        let mut v = num.get(k).cloned().unwrap_or_else(|| ctx.zero());
        for j in 1..=k.min(n + 1) {
            v -= den[j].clone() * &c[k - j];
        }
        c.push(v);
    }
    let mismatch = |k: usize| (c[k].clone() - ctx.one() / factorial(k as u32, ctx)).abs();
    let matched = (0..order).map(mismatch).fold(ctx.zero(), |acc, x| if x > acc { x } else { acc });
    (matched, mismatch(order))
}

/// Taylor agreement of the tableau's stability function with `exp`, via
/// `R(z) = 1 + Σ_k z^k wᵀ a^{k−1} 1`. Same return convention as
/// [`pade_series_residual`].
pub fn stability_series_residual(tab: &AderDgTableau, ctx: &PrecisionContext) -> (Real, Real) {
    let order = 2 * tab.degree() + 2;
    let w = tab.weights();
    let mut x = vec![ctx.one(); tab.stages()];
    let mut matched = ctx.zero();
    let mut next = ctx.zero();
    for k in 1..=order {
        let coeff = w.iter().zip(&x).fold(ctx.zero(), |acc, (wi, xi)| acc + wi.clone() * xi);
        let r = (coeff - ctx.one() / factorial(k as u32, ctx)).abs();
        if k < order {
            if r > matched {
                matched = r;
            }
        } else {
            next = r;
        }
        x = tab.a().matvec(&x);
    }
    (matched, next)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::basis::NodeFamily;

    fn ctx() -> PrecisionContext {
        PrecisionContext::new(120).unwrap()
    }

    fn close(a: &Real, b: &Real, ctx: &PrecisionContext) -> bool {
        (a.clone() - b).abs() <= *ctx.identity_tol()
    }

    #[test]
    fn q_and_m_at_degree_one() {
        let ctx = ctx();
        let tab = AderDgTableau::build(1, NodeFamily::GaussLegendre, &ctx).unwrap();
        let qm = build_q_m(&tab, &ctx);
        let half_s3 = ctx.real(3).sqrt() / 2u32;
        assert!(close(&qm.q[(0, 0)], &(ctx.one() + &half_s3), &ctx));
        assert!(close(&qm.q[(0, 1)], &ctx.ratio(-1, 2), &ctx));
        assert!(close(&qm.q[(1, 1)], &(ctx.one() - &half_s3), &ctx));
        assert!(close(&qm.lambda_q, &ctx.real(2), &ctx));
        assert!(close(&qm.lambda_m, &ctx.ratio(1, 6), &ctx));
        let v0 = ctx.one() / (ctx.real(3).sqrt() * 2u32);
        assert!(close(&qm.v[0], &v0, &ctx));
        assert!(close(&qm.v[1], &(-v0), &ctx));
    }

    #[test]
    fn q_m_are_dyadic() {
        let ctx = ctx();
        for family in [NodeFamily::GaussLegendre, NodeFamily::RadauLeft, NodeFamily::RadauRight] {
            for n in [1, 4, 9, 12] {
                let tab = AderDgTableau::build(n, family, &ctx).unwrap();
                let qm = build_q_m(&tab, &ctx);
                let tol = ctx.identity_tol();
                assert!(qm.q_dyadic_residual <= *tol, "{family} {n}");
                assert!(qm.m_dyadic_residual <= *tol, "{family} {n}");
                assert!(qm.m_classical_residual <= *tol, "{family} {n}");
                assert!(qm.q_asymmetry <= *tol);
                assert!(qm.m_perturbation_bound <= tol.clone() * &qm.lambda_m);
            }
        }
    }

    #[test]
    fn q_differs_from_psi_tilde_outer_product() {
        let ctx = ctx();
        let tab = AderDgTableau::build(1, NodeFamily::GaussLegendre, &ctx).unwrap();
        let qm = build_q_m(&tab, &ctx);
        assert!(qm.q_tilde_residual > 0.1);
    }

    #[test]
    fn stability_function_at_one() {
        let ctx = ctx();
        let tab = AderDgTableau::build(1, NodeFamily::GaussLegendre, &ctx).unwrap();
        let z = Complex::one(&ctx);
        let r = stability_function(&tab, &z, &ctx).unwrap();
        assert!(close(&r.re, &ctx.ratio(8, 3), &ctx));
        assert!(r.im.is_zero());
        let p = pade_exp(1, &z, &ctx).unwrap();
        assert!(close(&p.re, &ctx.ratio(8, 3), &ctx));
    }

    #[test]
    fn stability_function_at_zero() {
        let ctx = ctx();
        let tab = AderDgTableau::build(3, NodeFamily::GaussLegendre, &ctx).unwrap();
        let r = stability_function(&tab, &Complex::zero(&ctx), &ctx).unwrap();
        assert_eq!(r, Complex::one(&ctx));
        assert_eq!(pade_exp(3, &Complex::zero(&ctx), &ctx).unwrap(), Complex::one(&ctx));
    }

    #[test]
    fn pade_coefficients_degree_one() {
        let ctx = ctx();
        let (num, den) = pade_coefficients(1, 2, &ctx);
        assert_eq!(num.len(), 2);
        assert_eq!(den.len(), 3);
        assert!(close(&num[1], &ctx.ratio(1, 3), &ctx));
        assert!(close(&den[1], &ctx.ratio(-2, 3), &ctx));
        assert!(close(&den[2], &ctx.ratio(1, 6), &ctx));
    }

    #[test]
    fn series_agreement() {
        let ctx = ctx();
        for n in 0..=10 {
            let (matched, next) = pade_series_residual(n, &ctx);
            assert!(matched <= *ctx.identity_tol(), "N={n}");
            assert!(next > ctx.pow10(-40), "N={n}");
            let tab = AderDgTableau::build(n, NodeFamily::GaussLegendre, &ctx).unwrap();
            let (matched, next) = stability_series_residual(&tab, &ctx);
            assert!(matched <= *ctx.identity_tol(), "N={n}");
            assert!(next > ctx.pow10(-40), "N={n}");
        }
    }

    #[test]
    fn pole_is_reported() {
        let ctx = ctx();
        // denominator 1 − 2z/3 + z²/6 vanishes at z = 2 ± i√2
        let z = Complex::new(ctx.real(2), ctx.real(2).sqrt());
        assert!(matches!(pade_exp(1, &z, &ctx), Err(TableauError::Pole(_))));
        let tab = AderDgTableau::build(1, NodeFamily::GaussLegendre, &ctx).unwrap();
        assert!(matches!(stability_function(&tab, &z, &ctx), Err(TableauError::Pole(_))));
    }

    #[test]
    fn l_stable_decay() {
        let ctx = ctx();
        let z = Complex::from_real(ctx.real(-100_000_000));
        for n in 1..=8 {
            let tab = AderDgTableau::build(n, NodeFamily::GaussLegendre, &ctx).unwrap();
            let r = stability_function(&tab, &z, &ctx).unwrap();
            assert!(r.abs() <= ctx.pow10(-6), "N={n}");
        }
    }
}
