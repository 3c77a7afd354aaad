//! Structured text serialization of tableaus.
//!
//! All numeric entries are decimal strings so that no precision is lost to a
//! binary float format. Matrices are stored row-major as nested arrays.

use serde::{Deserialize, Serialize};

use super::{verify_lemma21, AderDgTableau, Lemma21Residuals, TableauError};
use crate::arith::{PrecisionContext, Real, MIN_DIGITS};
use crate::basis::{NodalBasis, NodeFamily};
use crate::linalg::Matrix;

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TableauDocument {
    pub schema_version: u32,
    pub n: usize,
    pub family: NodeFamily,
    pub digits: u32,
    pub tau: Vec<String>,
    pub w: Vec<String>,
    pub psi: Vec<String>,
    pub psi_tilde: Vec<String>,
    pub kappa: Vec<Vec<String>>,
    pub a: Vec<Vec<String>>,
}

impl TableauDocument {
    pub fn from_tableau(tab: &AderDgTableau, ctx: &PrecisionContext) -> Self {
        let vec = |v: &[Real]| v.iter().map(|x| ctx.format(x)).collect();
        let mat = |m: &Matrix<Real>| m.to_rows().iter().map(|r| vec(r)).collect();
        Self {
            schema_version: SCHEMA_VERSION,
            n: tab.degree(),
            family: tab.family(),
            digits: ctx.digits(),
            tau: vec(tab.nodes()),
            w: vec(tab.weights()),
            psi: vec(tab.psi()),
            psi_tilde: vec(tab.psi_tilde()),
            kappa: mat(tab.kappa()),
            a: mat(tab.a()),
        }
    }
}

/// Serializes the tableau as pretty-printed JSON.
pub fn export_tableau(tab: &AderDgTableau, ctx: &PrecisionContext) -> String {
    serde_json::to_string_pretty(&TableauDocument::from_tableau(tab, ctx)).expect("document serializes")
}

fn malformed(msg: impl Into<String>) -> TableauError {
    TableauError::Document(msg.into())
}

fn parse_vec(field: &str, v: &[String], len: usize, ctx: &PrecisionContext) -> Result<Vec<Real>, TableauError> {
    if v.len() != len {
        return Err(malformed(format!("{field} has {} entries, expected {len}", v.len())));
    }
    v.iter()
        .map(|s| ctx.parse(s).map_err(|e| malformed(format!("{field}: {e}"))))
        .collect()
}

fn parse_mat(field: &str, m: &[Vec<String>], len: usize, ctx: &PrecisionContext) -> Result<Matrix<Real>, TableauError> {
    if m.len() != len {
        return Err(malformed(format!("{field} has {} rows, expected {len}", m.len())));
    }
    let rows = m
        .iter()
        .enumerate()
        .map(|(i, r)| parse_vec(&format!("{field}[{i}]"), r, len, ctx))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(Matrix::from_rows(rows))
}

fn reject(check: &str, residual: &Real) -> TableauError {
    TableauError::Verification {
        check: check.to_string(),
        residual: residual.to_f64(),
    }
}

fn max_diff(a: &[Real], b: &[Real], ctx: &PrecisionContext) -> Real {
    a.iter().zip(b).fold(ctx.zero(), |acc, (x, y)| {
        let d = (x.clone() - y).abs();
        if d > acc {
            d
        } else {
            acc
        }
    })
}

/// Parses a tableau document and re-verifies it.
///
/// The basis is rebuilt from the stored nodes and compared against the stored
/// `w`, `ψ`, `ψ̃`; the stored `a` is compared against `κ⁻¹μ`; then the six
/// structural relations are re-run. The tolerance is the context's identity
/// tolerance, relaxed to `10^(10 − digits)` when the document carries fewer
/// digits than the context.
pub fn import_tableau(text: &str, ctx: &PrecisionContext) -> Result<AderDgTableau, TableauError> {
    let doc: TableauDocument = serde_json::from_str(text).map_err(|e| malformed(e.to_string()))?;
    if doc.schema_version != SCHEMA_VERSION {
        return Err(malformed(format!("unsupported schema_version {}", doc.schema_version)));
    }
    if doc.digits < MIN_DIGITS {
        return Err(malformed(format!("digits {} below minimum {MIN_DIGITS}", doc.digits)));
    }
    let s = doc.n + 1;
    let tau = parse_vec("tau", &doc.tau, s, ctx)?;
    if tau.windows(2).any(|p| p[0] >= p[1]) || tau[0] < 0u32 || tau[s - 1] > 1u32 {
        return Err(malformed("tau must be strictly ascending in [0, 1]"));
    }
    let w = parse_vec("w", &doc.w, s, ctx)?;
    let psi = parse_vec("psi", &doc.psi, s, ctx)?;
    let psi_tilde = parse_vec("psi_tilde", &doc.psi_tilde, s, ctx)?;
    let kappa = parse_mat("kappa", &doc.kappa, s, ctx)?;
    let a = parse_mat("a", &doc.a, s, ctx)?;

    let doc_tol = ctx.pow10(10 - doc.digits.min(ctx.digits()) as i32);
    let tol = if doc_tol > *ctx.identity_tol() {
        doc_tol
    } else {
        ctx.identity_tol().clone()
    };

    let basis = NodalBasis::from_nodes(tau, doc.family, ctx)?;
    for (name, stored, fresh) in [
        ("w", &w, basis.weights()),
        ("psi", &psi, basis.psi()),
        ("psi_tilde", &psi_tilde, basis.psi_tilde()),
    ] {
        let d = max_diff(stored, fresh, ctx);
        if d > tol {
            return Err(reject(name, &d));
        }
    }
    let mu = Matrix::diag(basis.weights());
    let tab = AderDgTableau::from_parts(basis, kappa, a, ctx)?;
    let d = tab.kappa().matmul(tab.a()).max_abs_diff(&mu, ctx);
    if d > tol {
        return Err(reject("kappa a = mu", &d));
    }
    let res = verify_lemma21(&tab, ctx);
    for (name, r) in Lemma21Residuals::NAMES.iter().zip(res.as_array()) {
        if *r > tol {
            return Err(reject(name, r));
        }
    }
    Ok(tab)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ctx() -> PrecisionContext {
        PrecisionContext::new(120).unwrap()
    }

    #[test]
    fn round_trip_preserves_entries() {
        let ctx = ctx();
        for family in [NodeFamily::GaussLegendre, NodeFamily::RadauRight] {
            let tab = AderDgTableau::build(3, family, &ctx).unwrap();
            let text = export_tableau(&tab, &ctx);
            let back = import_tableau(&text, &ctx).unwrap();
            assert!(back.a().max_abs_diff(tab.a(), &ctx) <= ctx.unit_roundoff().clone() * 10u32);
            assert!(back.kappa().max_abs_diff(tab.kappa(), &ctx) <= ctx.unit_roundoff().clone() * 10u32);
            let res = verify_lemma21(&back, &ctx);
            assert!(res.max() <= *ctx.identity_tol());
        }
    }

    #[test]
    fn tampered_entry_is_rejected() {
        let ctx = ctx();
        let tab = AderDgTableau::build(1, NodeFamily::GaussLegendre, &ctx).unwrap();
        let mut doc = TableauDocument::from_tableau(&tab, &ctx);
        let a00 = ctx.parse(&doc.a[0][0]).unwrap() + ctx.pow10(-5);
        doc.a[0][0] = ctx.format(&a00);
        let text = serde_json::to_string(&doc).unwrap();
        assert!(matches!(import_tableau(&text, &ctx), Err(TableauError::Verification { .. })));
    }

    #[test]
    fn weights_are_decimal_strings() {
        let ctx = ctx();
        let tab = AderDgTableau::build(2, NodeFamily::GaussLegendre, &ctx).unwrap();
        let doc = TableauDocument::from_tableau(&tab, &ctx);
        let expected = [ctx.ratio(5, 18), ctx.ratio(4, 9), ctx.ratio(5, 18)];
        for (s, e) in doc.w.iter().zip(&expected) {
            assert!((ctx.parse(s).unwrap() - e).abs() <= *ctx.identity_tol());
        }
        assert!(doc.w[1].starts_with("0.444444444"));
    }

    #[test]
    fn malformed_documents_are_rejected() {
        let ctx = ctx();
        let tab = AderDgTableau::build(1, NodeFamily::GaussLegendre, &ctx).unwrap();
        let good = TableauDocument::from_tableau(&tab, &ctx);

        assert!(matches!(import_tableau("{", &ctx), Err(TableauError::Document(_))));
        let mut doc = good.clone();
        doc.w.pop();
        let text = serde_json::to_string(&doc).unwrap();
        assert!(matches!(import_tableau(&text, &ctx), Err(TableauError::Document(_))));
        let mut doc = good.clone();
        doc.kappa[1][0] = "1.2.3".into();
        let text = serde_json::to_string(&doc).unwrap();
        assert!(matches!(import_tableau(&text, &ctx), Err(TableauError::Document(_))));
        let mut doc = good;
        doc.schema_version = 99;
        let text = serde_json::to_string(&doc).unwrap();
        assert!(matches!(import_tableau(&text, &ctx), Err(TableauError::Document(_))));
    }
}
