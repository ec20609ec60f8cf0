//! First-order contact of pointed curves in the parameter space of a map
//! system, and the induced tangent representation.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::expr::{eval_numeric, rational_from_f64, Expr, Point, Realizations};
use crate::map_systems::{iota, MapSystem, TangentMapRep};

use super::{exact_lambda, Curve, CurveBody};

/// Tolerance of the numeric contact test, relative to `1 + |value|`.
pub const CONTACT_TOLERANCE: f64 = 1e-7;

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ContactVerdict {
    pub contact: bool,
    /// `exact` or `numeric`.
    pub method: &'static str,
    /// Largest relative gap seen by the numeric route, 0 for the exact one.
    pub max_gap: f64,
}

fn check_codomain(sys: &MapSystem, c: &Curve) -> Result<()> {
    if c.codomain() != sys.params() {
        return Err(Error::Mismatch("curve must be valued in the parameter space".into()));
    }
    Ok(())
}

/// `ĉ*(ε)`: the evaluation map along a symbolic curve, over `lam` and the
/// source coordinates.
pub fn pulled_back(sys: &MapSystem, c: &Curve) -> Result<Vec<Expr>> {
    check_codomain(sys, c)?;
    let CurveBody::Symbolic(body) = c.body() else {
        return Err(Error::Unsupported("pullback along a numeric curve".into()));
    };
    sys.at(body)
}

/// `(T₁ ĉ*(ε))` at `(t, 1)`: value and `λ`-derivative of the evaluation
/// map along the curve.
pub fn tangent_rep_map_space(sys: &MapSystem, c: &Curve, t: f64, real: &Realizations) -> Result<TangentMapRep> {
    check_codomain(sys, c)?;
    let (w, w_dot) = pointed(c, t, real)?;
    iota(sys, &w, &w_dot)
}

fn pointed(c: &Curve, t: f64, real: &Realizations) -> Result<(Vec<Expr>, Vec<Expr>)> {
    c.interval().check(t)?;
    if c.is_symbolic() {
        let r = exact_lambda(t)?;
        return Ok((c.exact_point(&r).expect("symbolic"), c.exact_velocity(&r).expect("symbolic")));
    }
    let to_expr = |v: Vec<f64>| -> Result<Vec<Expr>> {
        v.into_iter()
            .map(|x| {
                rational_from_f64(x)
                    .map(Expr::constant)
                    .ok_or_else(|| Error::Evaluation(format!("{x} is not finite")))
            })
            .collect()
    };
    Ok((to_expr(c.value(t, real)?)?, to_expr(c.velocity(t, real)?)?))
}

/// Whether `(c1, t1)` and `(c2, t2)` induce the same value and first
/// derivative of the evaluation map. Symbolic curves are compared exactly;
/// otherwise at the witness source points within [`CONTACT_TOLERANCE`].
pub fn first_order_contact(
    sys: &MapSystem,
    p1: (&Curve, f64),
    p2: (&Curve, f64),
    witnesses: &[Vec<f64>],
    real: &Realizations,
) -> Result<ContactVerdict> {
    check_codomain(sys, p1.0)?;
    check_codomain(sys, p2.0)?;
    p1.0.interval().check(p1.1)?;
    p2.0.interval().check(p2.1)?;
    if p1.0.is_symbolic() && p2.0.is_symbolic() {
        let a = tangent_rep_map_space(sys, p1.0, p1.1, real)?;
        let b = tangent_rep_map_space(sys, p2.0, p2.1, real)?;
        return Ok(ContactVerdict {
            contact: a == b,
            method: "exact",
            max_gap: 0.0,
        });
    }
    if witnesses.is_empty() {
        return Err(Error::EmptyGrid);
    }
    let jets = |c: &Curve, t: f64| -> Result<(Vec<f64>, Vec<f64>)> { Ok((c.value(t, real)?, c.velocity(t, real)?)) };
    let (w1, v1) = jets(p1.0, p1.1)?;
    let (w2, v2) = jets(p2.0, p2.1)?;
    let derivs: Vec<Vec<Expr>> = sys
        .eval()
        .values()
        .iter()
        .map(|e| sys.params().iter().map(|p| e.partial(p)).collect())
        .collect();
    let mut max_gap: f64 = 0.0;
    for m in witnesses {
        if m.len() != sys.source().len() {
            return Err(Error::Mismatch("witness is not a source point".into()));
        }
        let at = |w: &[f64]| -> Point {
            sys.params()
                .iter()
                .cloned()
                .zip(w.iter().copied())
                .chain(sys.source().iter().cloned().zip(m.iter().copied()))
                .collect()
        };
        let (pt1, pt2) = (at(&w1), at(&w2));
        for (e, de) in sys.eval().values().iter().zip(&derivs) {
            let a = eval_numeric(e, &pt1, real)?;
            let b = eval_numeric(e, &pt2, real)?;
            let mut da = 0.0;
            let mut db = 0.0;
            for (k, d) in de.iter().enumerate() {
                da += eval_numeric(d, &pt1, real)? * v1[k];
                db += eval_numeric(d, &pt2, real)? * v2[k];
            }
            for (x, y) in [(a, b), (da, db)] {
                max_gap = max_gap.max((x - y).abs() / (1.0 + x.abs().max(y.abs())));
            }
        }
    }
    Ok(ContactVerdict {
        contact: max_gap <= CONTACT_TOLERANCE,
        method: "numeric",
        max_gap,
    })
}

/// Substitute `lam = t` into pulled-back expressions.
#[cfg(test)]
fn at_lambda(es: &[Expr], t: f64) -> Result<Vec<Expr>> {
    let b = crate::expr::Binding::new().with(super::lambda(), Expr::constant(exact_lambda(t)?));
    Ok(es.iter().map(|e| e.substitute(&b)).collect())
}
