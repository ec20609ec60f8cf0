//! Frölicher spaces presented by families of curves: curves, families,
//! smoothness probes and first-order contact.

mod contact;
mod family;
pub(crate) mod numeric_body;
mod probe;

use std::fmt;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::expr::{
    eval_numeric, rational_to_f64, Binding, Expr, ParseError, Point, Rational, Realizations,
    Symbol, Tree,
};

pub use contact::{first_order_contact, pulled_back, tangent_rep_map_space, ContactVerdict};
pub use family::{member, product, subspace, CurveFamily, FamilyKind, MemberVerdict, Predicate};
pub use probe::{smoothness_probe, witness_points, OrderReport, ProbeVerdict};

/// Name of the curve parameter in curve bodies.
pub const LAMBDA: &str = "lam";

pub fn lambda() -> Symbol {
    Symbol::new(LAMBDA)
}

/// Open interval with rational endpoints; `None` is unbounded.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Interval {
    lo: Option<Rational>,
    hi: Option<Rational>,
}

impl Interval {
    pub fn new(lo: Option<Rational>, hi: Option<Rational>) -> Result<Self> {
        if let (Some(a), Some(b)) = (&lo, &hi) {
            if a >= b {
                return Err(Error::Mismatch(format!("empty interval ({a}, {b})")));
            }
        }
        Ok(Interval { lo, hi })
    }

    pub fn real_line() -> Self {
        Interval { lo: None, hi: None }
    }

    pub fn lo(&self) -> Option<&Rational> {
        self.lo.as_ref()
    }

    pub fn hi(&self) -> Option<&Rational> {
        self.hi.as_ref()
    }

    pub fn contains(&self, t: f64) -> bool {
        self.lo.as_ref().is_none_or(|a| t > rational_to_f64(a))
            && self.hi.as_ref().is_none_or(|b| t < rational_to_f64(b))
    }

    /// Distance from `t` to the nearest endpoint.
    pub fn margin(&self, t: f64) -> f64 {
        let a = self.lo.as_ref().map_or(f64::INFINITY, |a| t - rational_to_f64(a));
        let b = self.hi.as_ref().map_or(f64::INFINITY, |b| rational_to_f64(b) - t);
        a.min(b)
    }

    /// `n` evenly spaced interior points; unbounded ends are cut two units
    /// from the other end (or to `[-1, 1]`).
    pub fn sample_points(&self, n: usize) -> Vec<f64> {
        let (a, b) = match (&self.lo, &self.hi) {
            (Some(a), Some(b)) => (rational_to_f64(a), rational_to_f64(b)),
            (Some(a), None) => (rational_to_f64(a), rational_to_f64(a) + 2.0),
            (None, Some(b)) => (rational_to_f64(b) - 2.0, rational_to_f64(b)),
            (None, None) => (-1.0, 1.0),
        };
        (0..n)
            .map(|k| a + (b - a) * (k as f64 + 1.0) / (n as f64 + 1.0))
            .collect()
    }

    pub(crate) fn check(&self, t: f64) -> Result<()> {
        if self.contains(t) {
            Ok(())
        } else {
            Err(Error::OutsideInterval {
                lambda: t.to_string(),
                interval: self.to_string(),
            })
        }
    }
}

impl fmt::Display for Interval {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let end = |r: &Option<Rational>, inf: &str| match r {
            Some(r) => Expr::constant(r.clone()).to_string(),
            None => inf.to_string(),
        };
        write!(f, "({}, {})", end(&self.lo, "-inf"), end(&self.hi, "inf"))
    }
}

type CurveFn = dyn Fn(f64) -> Vec<f64> + Send + Sync;

/// Floating-point curve body. Equality compares labels.
#[derive(Clone)]
pub struct NumericCurve {
    label: String,
    dim: usize,
    sources: Option<Vec<String>>,
    f: Arc<CurveFn>,
}

impl NumericCurve {
    pub fn new<F>(label: impl Into<String>, dim: usize, f: F) -> Self
    where
        F: Fn(f64) -> Vec<f64> + Send + Sync + 'static,
    {
        NumericCurve {
            label: label.into(),
            dim,
            sources: None,
            f: Arc::new(f),
        }
    }

    /// Components written in the expression syntax over `lam`, with the
    /// builtins `abs`, `cbrt`, `sqrt`, `sin`, `cos`, `exp`.
    pub fn parse(texts: &[String]) -> std::result::Result<Self, (usize, ParseError)> {
        let trees: Vec<Tree> = texts
            .iter()
            .enumerate()
            .map(|(k, t)| numeric_body::parse(t).map_err(|e| (k, e)))
            .collect::<std::result::Result<_, _>>()?;
        let label = texts.join("; ");
        Ok(NumericCurve {
            label,
            dim: texts.len(),
            sources: Some(texts.to_vec()),
            f: Arc::new(move |t| trees.iter().map(|tr| numeric_body::eval(tr, t)).collect()),
        })
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn sources(&self) -> Option<&[String]> {
        self.sources.as_deref()
    }

    pub fn eval(&self, t: f64) -> Vec<f64> {
        (self.f)(t)
    }
}

impl fmt::Debug for NumericCurve {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "NumericCurve({})", self.label)
    }
}

impl PartialEq for NumericCurve {
    fn eq(&self, other: &Self) -> bool {
        self.label == other.label && self.dim == other.dim
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum CurveBody {
    /// One expression in `lam` per codomain coordinate.
    Symbolic(Vec<Expr>),
    Numeric(NumericCurve),
}

/// A curve `c : I → S` in coordinates.
#[derive(Clone, Debug)]
pub struct Curve {
    codomain: Vec<Symbol>,
    interval: Interval,
    body: CurveBody,
    origin: Option<Arc<(Curve, Expr)>>,
}

impl PartialEq for Curve {
    fn eq(&self, other: &Self) -> bool {
        self.codomain == other.codomain && self.interval == other.interval && self.body == other.body
    }
}

const STENCIL_STEP: f64 = 1e-3;

impl Curve {
    pub fn symbolic(codomain: Vec<Symbol>, interval: Interval, body: Vec<Expr>) -> Result<Self> {
        if body.len() != codomain.len() {
            return Err(Error::Mismatch(format!(
                "{} components for {} coordinates",
                body.len(),
                codomain.len()
            )));
        }
        let lam = lambda();
        for e in &body {
            if let Some(s) = e.symbols().into_iter().find(|s| *s != lam) {
                return Err(Error::Mismatch(format!("curve body uses `{s}`; only `{LAMBDA}` is allowed")));
            }
        }
        Ok(Curve {
            codomain,
            interval,
            body: CurveBody::Symbolic(body),
            origin: None,
        })
    }

    pub fn numeric(codomain: Vec<Symbol>, interval: Interval, body: NumericCurve) -> Result<Self> {
        if body.dim != codomain.len() {
            return Err(Error::Mismatch(format!(
                "{} components for {} coordinates",
                body.dim,
                codomain.len()
            )));
        }
        Ok(Curve {
            codomain,
            interval,
            body: CurveBody::Numeric(body),
            origin: None,
        })
    }

    pub fn constant(codomain: Vec<Symbol>, values: Vec<Expr>) -> Result<Self> {
        Curve::symbolic(codomain, Interval::real_line(), values)
    }

    pub fn codomain(&self) -> &[Symbol] {
        &self.codomain
    }

    pub fn interval(&self) -> &Interval {
        &self.interval
    }

    pub fn body(&self) -> &CurveBody {
        &self.body
    }

    /// The curve and reparametrisation this one was obtained from.
    pub fn origin(&self) -> Option<(&Curve, &Expr)> {
        self.origin.as_deref().map(|(c, g)| (c, g))
    }

    pub fn dim(&self) -> usize {
        self.codomain.len()
    }

    pub fn is_symbolic(&self) -> bool {
        matches!(self.body, CurveBody::Symbolic(_))
    }

    pub fn value(&self, t: f64, real: &Realizations) -> Result<Vec<f64>> {
        self.interval.check(t)?;
        self.value_unchecked(t, real)
    }

    fn value_unchecked(&self, t: f64, real: &Realizations) -> Result<Vec<f64>> {
        match &self.body {
            CurveBody::Symbolic(es) => {
                let point: Point = [(lambda(), t)].into_iter().collect();
                es.iter()
                    .map(|e| eval_numeric(e, &point, real).map_err(Error::from))
                    .collect()
            }
            CurveBody::Numeric(n) => {
                let v = n.eval(t);
                if v.iter().all(|x| x.is_finite()) {
                    Ok(v)
                } else {
                    Err(Error::Evaluation(format!("curve `{}` is not finite at {t}", n.label)))
                }
            }
        }
    }

    /// Velocity at `t`: exact for symbolic bodies, a five-point stencil
    /// otherwise.
    pub fn velocity(&self, t: f64, real: &Realizations) -> Result<Vec<f64>> {
        self.interval.check(t)?;
        match &self.body {
            CurveBody::Symbolic(es) => {
                let point: Point = [(lambda(), t)].into_iter().collect();
                let lam = lambda();
                es.iter()
                    .map(|e| eval_numeric(&e.partial(&lam), &point, real).map_err(Error::from))
                    .collect()
            }
            CurveBody::Numeric(_) => {
                five_point(|s| self.value_unchecked(s, real), t, stencil_step(&self.interval, t))
            }
        }
    }

    /// Exact point at a rational parameter, for symbolic bodies.
    pub fn exact_point(&self, t: &Rational) -> Option<Vec<Expr>> {
        let CurveBody::Symbolic(es) = &self.body else {
            return None;
        };
        let b = Binding::new().with(lambda(), Expr::constant(t.clone()));
        Some(es.iter().map(|e| e.substitute(&b)).collect())
    }

    /// Exact velocity at a rational parameter, for symbolic bodies.
    pub fn exact_velocity(&self, t: &Rational) -> Option<Vec<Expr>> {
        let CurveBody::Symbolic(es) = &self.body else {
            return None;
        };
        let lam = lambda();
        let b = Binding::new().with(lam.clone(), Expr::constant(t.clone()));
        Some(es.iter().map(|e| e.partial(&lam).substitute(&b)).collect())
    }

    /// Exact for symbolic bodies; sampled at 16 interior points otherwise.
    pub fn is_constant(&self, real: &Realizations) -> Result<bool> {
        match &self.body {
            CurveBody::Symbolic(es) => {
                let lam = lambda();
                Ok(es.iter().all(|e| !e.symbols().contains(&lam)))
            }
            CurveBody::Numeric(_) => {
                let pts = self.interval.sample_points(16);
                let first = self.value(pts[0], real)?;
                for t in &pts[1..] {
                    let v = self.value(*t, real)?;
                    if v.iter().zip(&first).any(|(a, b)| (a - b).abs() > 1e-12) {
                        return Ok(false);
                    }
                }
                Ok(true)
            }
        }
    }

    /// `self ∘ γ` for a polynomial `γ` in `lam` mapping `interval` into the
    /// curve's interval (checked at 16 sample points).
    pub fn reparametrize(&self, gamma: &Expr, interval: Interval) -> Result<Curve> {
        let lam = lambda();
        if let Some(s) = gamma.symbols().into_iter().find(|s| *s != lam) {
            return Err(Error::Mismatch(format!("reparametrisation uses `{s}`")));
        }
        if gamma.contains_opaque() {
            return Err(Error::Unsupported("opaque reparametrisations".into()));
        }
        let eval_gamma = {
            let g = gamma.clone();
            move |t: f64| -> f64 {
                let point: Point = [(lambda(), t)].into_iter().collect();
                eval_numeric(&g, &point, &Realizations::new()).expect("polynomial in lam")
            }
        };
        for t in interval.sample_points(16) {
            let s = eval_gamma(t);
            if !self.interval.contains(s) {
                return Err(Error::OutsideInterval {
                    lambda: s.to_string(),
                    interval: self.interval.to_string(),
                });
            }
        }
        let body = match &self.body {
            CurveBody::Symbolic(es) => {
                let b = Binding::new().with(lam, gamma.clone());
                CurveBody::Symbolic(es.iter().map(|e| e.substitute(&b)).collect())
            }
            CurveBody::Numeric(n) => {
                let inner = n.clone();
                CurveBody::Numeric(NumericCurve {
                    label: format!("({}) o ({gamma})", n.label),
                    dim: n.dim,
                    sources: None,
                    f: Arc::new(move |t| inner.eval(eval_gamma(t))),
                })
            }
        };
        Ok(Curve {
            codomain: self.codomain.clone(),
            interval,
            body,
            origin: Some(Arc::new((self.clone(), gamma.clone()))),
        })
    }

    /// Components at the given positions.
    pub fn project(&self, indices: &[usize]) -> Result<Curve> {
        if let Some(k) = indices.iter().find(|&&k| k >= self.dim()) {
            return Err(Error::Mismatch(format!("no component {k}")));
        }
        let codomain = indices.iter().map(|&k| self.codomain[k].clone()).collect();
        let body = match &self.body {
            CurveBody::Symbolic(es) => CurveBody::Symbolic(indices.iter().map(|&k| es[k].clone()).collect()),
            CurveBody::Numeric(n) => {
                let inner = n.clone();
                let idx = indices.to_vec();
                CurveBody::Numeric(NumericCurve {
                    label: format!("({}){idx:?}", n.label),
                    dim: idx.len(),
                    sources: None,
                    f: Arc::new(move |t| {
                        let v = inner.eval(t);
                        idx.iter().map(|&k| v[k]).collect()
                    }),
                })
            }
        };
        Ok(Curve {
            codomain,
            interval: self.interval.clone(),
            body,
            origin: None,
        })
    }

    /// The curve `λ ↦ (a(λ), b(λ))`; intervals must agree.
    pub fn pair(a: &Curve, b: &Curve) -> Result<Curve> {
        if a.interval != b.interval {
            return Err(Error::Mismatch("paired curves need equal intervals".into()));
        }
        let codomain: Vec<Symbol> = a.codomain.iter().chain(&b.codomain).cloned().collect();
        let body = match (&a.body, &b.body) {
            (CurveBody::Symbolic(x), CurveBody::Symbolic(y)) => {
                CurveBody::Symbolic(x.iter().chain(y).cloned().collect())
            }
            _ => {
                let (ca, cb) = (a.clone(), b.clone());
                let real = Realizations::new();
                let symbolic_opaque = [&a.body, &b.body].iter().any(|body| {
                    matches!(body, CurveBody::Symbolic(es) if es.iter().any(Expr::contains_opaque))
                });
                if symbolic_opaque {
                    return Err(Error::Unsupported(
                        "pairing a numeric curve with an opaque symbolic one".into(),
                    ));
                }
                CurveBody::Numeric(NumericCurve {
                    label: format!("({}, {})", describe(&a.body), describe(&b.body)),
                    dim: codomain.len(),
                    sources: None,
                    f: Arc::new(move |t| {
                        let mut v = ca.value_unchecked(t, &real).unwrap_or_else(|_| vec![f64::NAN; ca.dim()]);
                        v.extend(cb.value_unchecked(t, &real).unwrap_or_else(|_| vec![f64::NAN; cb.dim()]));
                        v
                    }),
                })
            }
        };
        Ok(Curve {
            codomain,
            interval: a.interval.clone(),
            body,
            origin: None,
        })
    }
}

fn describe(body: &CurveBody) -> String {
    match body {
        CurveBody::Symbolic(es) => es.iter().map(ToString::to_string).collect::<Vec<_>>().join("; "),
        CurveBody::Numeric(n) => n.label.clone(),
    }
}

fn stencil_step(interval: &Interval, t: f64) -> f64 {
    STENCIL_STEP.min(interval.margin(t) / 4.0)
}

/// Five-point first-derivative stencil.
pub(crate) fn five_point<F>(f: F, t: f64, h: f64) -> Result<Vec<f64>>
where
    F: Fn(f64) -> Result<Vec<f64>>,
{
    let (a, b, c, d) = (f(t + 2.0 * h)?, f(t + h)?, f(t - h)?, f(t - 2.0 * h)?);
    Ok((0..a.len())
        .map(|k| (-a[k] + 8.0 * b[k] - 8.0 * c[k] + d[k]) / (12.0 * h))
        .collect())
}

pub(crate) fn exact_lambda(t: f64) -> Result<Rational> {
    crate::expr::rational_from_f64(t).ok_or_else(|| Error::Evaluation(format!("{t} is not finite")))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expr::{parse_expr, rational, Scope};

    fn lam_scope() -> Scope {
        Scope::with_coords([LAMBDA])
    }

    fn curve(body: &[&str]) -> Curve {
        let codomain = (0..body.len()).map(|k| Symbol::new(format!("w{k}"))).collect();
        let body = body.iter().map(|b| parse_expr(b, &lam_scope()).unwrap()).collect();
        Curve::symbolic(codomain, Interval::new(Some(rational(-1, 1)), Some(rational(1, 1))).unwrap(), body).unwrap()
    }

    #[test]
    fn interval_checks() {
        assert!(Interval::new(Some(rational(1, 1)), Some(rational(1, 1))).is_err());
        let i = Interval::new(Some(rational(-1, 1)), None).unwrap();
        assert!(i.contains(5.0) && !i.contains(-1.0));
        assert_eq!(i.to_string(), "(-1, inf)");
        let c = curve(&["lam"]);
        assert!(matches!(c.value(2.0, &Realizations::new()), Err(Error::OutsideInterval { .. })));
    }

    #[test]
    fn values_and_velocities() {
        let c = curve(&["lam^2", "3*lam"]);
        let real = Realizations::new();
        assert_eq!(c.value(0.5, &real).unwrap(), vec![0.25, 1.5]);
        assert_eq!(c.velocity(0.5, &real).unwrap(), vec![1.0, 3.0]);
        let n = Curve::numeric(
            c.codomain().to_vec(),
            c.interval().clone(),
            NumericCurve::parse(&["lam^2".into(), "3*lam".into()]).unwrap(),
        )
        .unwrap();
        let v = n.velocity(0.5, &real).unwrap();
        assert!((v[0] - 1.0).abs() < 1e-10 && (v[1] - 3.0).abs() < 1e-10);
        assert_eq!(c.exact_velocity(&rational(1, 2)).unwrap(), vec![Expr::one(), Expr::int(3)]);
    }

    #[test]
    fn reparametrisation_composes() {
        let c = curve(&["lam + lam^3"]);
        let g = parse_expr("lam^2", &lam_scope()).unwrap();
        let r = c
            .reparametrize(&g, Interval::new(Some(rational(-1, 2)), Some(rational(1, 2))).unwrap())
            .unwrap();
        assert_eq!(r.body, CurveBody::Symbolic(vec![parse_expr("lam^2 + lam^6", &lam_scope()).unwrap()]));
        assert_eq!(r.origin().unwrap().0, &c);
        let too_wide = c.reparametrize(&g, Interval::new(Some(rational(-2, 1)), Some(rational(2, 1))).unwrap());
        assert!(matches!(too_wide, Err(Error::OutsideInterval { .. })));
    }

    #[test]
    fn constant_detection() {
        let real = Realizations::new();
        assert!(curve(&["3/2"]).is_constant(&real).unwrap());
        assert!(!curve(&["lam"]).is_constant(&real).unwrap());
        let n = Curve::numeric(
            vec![Symbol::new("w")],
            Interval::real_line(),
            NumericCurve::parse(&["abs(lam) - abs(lam) + 2".into()]).unwrap(),
        )
        .unwrap();
        assert!(n.is_constant(&real).unwrap());
    }

    #[test]
    fn pairing_and_projection() {
        let real = Realizations::new();
        let a = curve(&["lam"]);
        let b = Curve::numeric(
            vec![Symbol::new("v")],
            a.interval().clone(),
            NumericCurve::parse(&["abs(lam)".into()]).unwrap(),
        )
        .unwrap();
        let p = Curve::pair(&a, &b).unwrap();
        assert_eq!(p.value(-0.5, &real).unwrap(), vec![-0.5, 0.5]);
        assert_eq!(p.project(&[1]).unwrap().value(-0.25, &real).unwrap(), vec![0.25]);
    }
}
