use std::sync::Arc;

use aderdg::analysis::fit_order;
use aderdg::arith::{PrecisionContext, Real};
use aderdg::basis::{NodalBasis, NodeFamily};
use aderdg::problems::polynomial_rhs;
use aderdg::solver::{integrate, Grid, SolverConfig};
use aderdg::tableau::{export_tableau, import_tableau, AderDgTableau};
use proptest::prelude::*;

fn ctx() -> PrecisionContext {
    PrecisionContext::new(80).unwrap()
}

fn family() -> impl Strategy<Value = NodeFamily> {
    prop_oneof![
        Just(NodeFamily::GaussLegendre),
        Just(NodeFamily::RadauLeft),
        Just(NodeFamily::RadauRight),
    ]
}

fn rel_close(a: &Real, b: &Real, tol: &Real) -> bool {
    let scale = b.clone().abs().max(&Real::with_val(b.prec(), 1));
    (a.clone() - b).abs() <= tol.clone() * scale
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn decimal_round_trip(mantissa in -1_000_000_000i64..1_000_000_000, exp in -300i32..300) {
        let c = ctx();
        let x = c.real(mantissa) * c.pow10(exp);
        let back = c.parse(&c.format(&x)).unwrap();
        prop_assert!(rel_close(&back, &x, c.unit_roundoff()));
        prop_assert_eq!(c.format(&back), c.format(&x));
    }

    #[test]
    fn lagrange_reproduces_polynomials(
        n in 1usize..8,
        fam in family(),
        coefs in prop::collection::vec(-50i64..50, 8),
        tau_num in 0u32..=1000,
    ) {
        let c = ctx();
        let basis = NodalBasis::new(n, fam, &c).unwrap();
        let poly = |t: &Real| coefs[..=n].iter().rev().fold(c.zero(), |acc, k| acc * t + c.real(*k));
        let tau = c.ratio(i64::from(tau_num), 1000);
        let phi = basis.eval(&tau, &c);
        let interp = basis
            .nodes()
            .iter()
            .zip(&phi)
            .fold(c.zero(), |acc, (node, p)| acc + poly(node) * p);
        prop_assert!(rel_close(&interp, &poly(&tau), c.identity_tol()));
        let unity = phi.iter().fold(c.zero(), |acc, p| acc + p);
        prop_assert!(rel_close(&unity, &c.one(), c.identity_tol()));
    }

    #[test]
    fn tableau_structure(n in 1usize..7, fam in family()) {
        let c = ctx();
        let tab = AderDgTableau::build(n, fam, &c).unwrap();
        let tol = c.identity_tol();
        let wsum = tab.weights().iter().fold(c.zero(), |acc, w| acc + w);
        prop_assert!(rel_close(&wsum, &c.one(), tol));
        let a = tab.a();
        for p in 0..tab.stages() {
            let weighted = (0..tab.stages()).fold(c.zero(), |acc, q| {
                acc + a.row(p)[q].clone() * &tab.psi()[q] / &tab.weights()[q]
            });
            prop_assert!(rel_close(&weighted, &c.one(), tol), "row {p}");
        }
    }

    #[test]
    fn document_round_trip(n in 1usize..6, fam in family()) {
        let c = ctx();
        let tab = AderDgTableau::build(n, fam, &c).unwrap();
        let text = export_tableau(&tab, &c);
        let back = import_tableau(&text, &c).unwrap();
        prop_assert_eq!(back.degree(), n);
        prop_assert_eq!(back.family(), fam);
        for p in 0..tab.stages() {
            for q in 0..tab.stages() {
                prop_assert!(rel_close(&back.a().row(p)[q], &tab.a().row(p)[q], c.identity_tol()));
            }
        }
        for (x, y) in back.psi().iter().zip(tab.psi()) {
            prop_assert!(rel_close(x, y, c.identity_tol()));
        }
    }

    #[test]
    fn fit_recovers_synthetic_order(
        p in 0.5f64..12.0,
        scale_exp in -200i32..5,
        steps in prop::collection::btree_set(2u32..64, 3..7),
    ) {
        let c = ctx();
        let points: Vec<(Real, Real)> = steps
            .iter()
            .map(|m| {
                let dt = c.one() / *m;
                let e = c.real(p) * dt.clone().ln();
                (dt, e.exp() * c.pow10(scale_exp))
            })
            .collect();
        let fit = fit_order(&points).unwrap();
        prop_assert!((fit.p - p).abs() < 1e-9, "{} vs {p}", fit.p);
        prop_assert!(fit.residual < 1e-9);
    }

    #[test]
    fn polynomial_forcing_is_integrated_exactly(
        n in 1usize..5,
        fam in family(),
        seed in 0u64..1000,
        m in 1usize..5,
        l_frac in 0u32..=100,
    ) {
        // Node values are exact while the quadrature integrates the forcing.
        let c = ctx();
        let max_l = match fam {
            NodeFamily::GaussLegendre => 2 * n + 1,
            _ => 2 * n,
        };
        let l = (max_l as u32 * l_frac / 100) as usize;
        let entry = polynomial_rhs(l, seed, &c);
        let tab = Arc::new(AderDgTableau::build(n, fam, &c).unwrap());
        let traj = integrate(tab, &entry.problem, &Grid::Uniform(m), &SolverConfig::new(&c), &c).unwrap();
        let exact = entry.problem.exact().unwrap();
        for (t, u) in traj.times.iter().zip(&traj.values) {
            prop_assert!(rel_close(&u[0], &exact(t, &c)[0], c.identity_tol()), "L = {l}");
        }
    }
}
