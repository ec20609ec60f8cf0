//! Floating-point evaluation and randomized equivalence probing.

use std::collections::BTreeMap;
use std::fmt;
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{rational_to_f64, Atom, Expr, Symbol};

/// Numeric values for coordinate symbols.
pub type Point = BTreeMap<Symbol, f64>;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum EvalError {
    #[error("symbol `{0}` is not bound")]
    UnboundSymbol(String),
    #[error("opaque `{0}` has no realization")]
    MissingRealization(String),
    #[error("realization of `{name}` cannot provide partial {partials:?}")]
    PartialUnavailable { name: String, partials: Vec<usize> },
    #[error("realization of `{name}` takes {expected} argument(s), got {found}")]
    ArityMismatch {
        name: String,
        expected: usize,
        found: usize,
    },
}

/// A concrete smooth function standing in for an opaque symbol.
pub trait OpaqueModel: Send + Sync {
    fn arity(&self) -> usize;

    /// Value of the partial derivative named by the sorted multi-index, or
    /// `None` when the model does not support that order.
    fn eval(&self, partials: &[usize], args: &[f64]) -> Option<f64>;
}

/// Polynomial realization; every partial is available exactly.
#[derive(Clone, Debug)]
pub struct PolyModel {
    params: Vec<Symbol>,
    body: Expr,
}

impl PolyModel {
    /// `body` may only mention `params` and no opaque symbols.
    pub fn new(params: Vec<Symbol>, body: Expr) -> Self {
        debug_assert!(!body.contains_opaque());
        PolyModel { params, body }
    }

    /// Random dense polynomial of degree two with nonzero small integer
    /// coefficients, so no first partial vanishes identically.
    pub fn random(arity: usize, rng: &mut impl Rng) -> Self {
        let params: Vec<Symbol> = (0..arity).map(|k| Symbol::new(format!("_t{k}"))).collect();
        let coeff = |rng: &mut dyn rand::RngCore| {
            let mag = rng.gen_range(1..=4);
            if rng.gen_bool(0.5) {
                Expr::int(mag)
            } else {
                Expr::int(-mag)
            }
        };
        let mut body = coeff(rng);
        for i in 0..arity {
            let ti = Expr::symbol(params[i].clone());
            body = &body + &(&coeff(rng) * &ti);
            for j in i..arity {
                let tj = Expr::symbol(params[j].clone());
                body = &body + &(&coeff(rng) * &(&ti * &tj));
            }
        }
        PolyModel { params, body }
    }

    pub fn body(&self) -> &Expr {
        &self.body
    }
}

impl OpaqueModel for PolyModel {
    fn arity(&self) -> usize {
        self.params.len()
    }

    fn eval(&self, partials: &[usize], args: &[f64]) -> Option<f64> {
        let mut e = self.body.clone();
        for &k in partials {
            e = e.partial(self.params.get(k)?);
        }
        let point: Point = self.params.iter().cloned().zip(args.iter().copied()).collect();
        eval_numeric(&e, &point, &Realizations::new()).ok()
    }
}

type ModelFn = dyn Fn(&[usize], &[f64]) -> Option<f64> + Send + Sync;

/// Closure-backed realization with a declared maximal derivative order.
#[derive(Clone)]
pub struct FnModel {
    arity: usize,
    max_order: usize,
    f: Arc<ModelFn>,
}

impl FnModel {
    pub fn new<F>(arity: usize, max_order: usize, f: F) -> Self
    where
        F: Fn(&[usize], &[f64]) -> Option<f64> + Send + Sync + 'static,
    {
        FnModel {
            arity,
            max_order,
            f: Arc::new(f),
        }
    }
}

impl fmt::Debug for FnModel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("FnModel")
            .field("arity", &self.arity)
            .field("max_order", &self.max_order)
            .finish()
    }
}

impl OpaqueModel for FnModel {
    fn arity(&self) -> usize {
        self.arity
    }

    fn eval(&self, partials: &[usize], args: &[f64]) -> Option<f64> {
        if partials.len() > self.max_order {
            return None;
        }
        (self.f)(partials, args)
    }
}

/// Realizations for the opaque symbols of an expression.
#[derive(Clone, Default)]
pub struct Realizations {
    models: BTreeMap<Symbol, Arc<dyn OpaqueModel>>,
}

impl Realizations {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, name: impl Into<Symbol>, model: impl OpaqueModel + 'static) {
        self.models.insert(name.into(), Arc::new(model));
    }

    pub fn with(mut self, name: impl Into<Symbol>, model: impl OpaqueModel + 'static) -> Self {
        self.insert(name, model);
        self
    }

    pub fn get(&self, name: &Symbol) -> Option<&Arc<dyn OpaqueModel>> {
        self.models.get(name)
    }
}

impl fmt::Debug for Realizations {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_set().entries(self.models.keys()).finish()
    }
}

/// Random polynomial realizations for the given opaque symbols, assigned in
/// name order so the result depends only on `rng`'s state.
pub fn random_realizations(opaques: &BTreeMap<Symbol, usize>, rng: &mut impl Rng) -> Realizations {
    let mut out = Realizations::new();
    for (name, arity) in opaques {
        out.insert(name.clone(), PolyModel::random(*arity, rng));
    }
    out
}

fn eval_atom(atom: &Atom, point: &Point, real: &Realizations) -> Result<f64, EvalError> {
    match atom {
        Atom::Symbol(s) => point
            .get(s)
            .copied()
            .ok_or_else(|| EvalError::UnboundSymbol(s.to_string())),
        Atom::Apply(app) => {
            let model = real
                .get(app.func())
                .ok_or_else(|| EvalError::MissingRealization(app.func().to_string()))?;
            if model.arity() != app.arity() {
                return Err(EvalError::ArityMismatch {
                    name: app.func().to_string(),
                    expected: model.arity(),
                    found: app.arity(),
                });
            }
            let args = app
                .args()
                .iter()
                .map(|a| eval_numeric(a, point, real))
                .collect::<Result<Vec<_>, _>>()?;
            model
                .eval(app.partials(), &args)
                .ok_or_else(|| EvalError::PartialUnavailable {
                    name: app.func().to_string(),
                    partials: app.partials().to_vec(),
                })
        }
    }
}

/// Evaluate `e` in IEEE doubles. Deterministic for fixed inputs.
pub fn eval_numeric(e: &Expr, point: &Point, real: &Realizations) -> Result<f64, EvalError> {
    let mut acc = 0.0;
    for (m, c) in e.terms() {
        let mut prod = rational_to_f64(c);
        for (atom, k) in m.factors() {
            prod *= eval_atom(atom, point, real)?.powi(*k as i32);
        }
        acc += prod;
    }
    Ok(acc)
}

/// Outcome of comparing two expressions by canonical form and by probing.
#[derive(Clone, Debug, PartialEq)]
pub struct EquivalenceReport {
    pub canonical_equal: bool,
    pub probe_equal: bool,
    pub points: usize,
    pub max_relative_gap: f64,
}

impl EquivalenceReport {
    pub fn consistent(&self) -> bool {
        self.canonical_equal == self.probe_equal
    }
}

const PROBE_POINTS: usize = 8;
const PROBE_TOLERANCE: f64 = 1e-9;

/// Compare canonical forms and cross-check at random rational points with
/// opaque symbols realized as random low-degree polynomials.
pub fn equivalence_report(a: &Expr, b: &Expr, seed: u64) -> EquivalenceReport {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut opaques = a.opaques();
    opaques.extend(b.opaques());
    let real = random_realizations(&opaques, &mut rng);
    let mut symbols = a.symbols();
    symbols.extend(b.symbols());
    let mut max_gap: f64 = 0.0;
    for _ in 0..PROBE_POINTS {
        let point: Point = symbols
            .iter()
            .map(|s| {
                let p: i32 = rng.gen_range(-9..=9);
                let q: i32 = rng.gen_range(1..=4);
                (s.clone(), f64::from(p) / f64::from(q))
            })
            .collect();
        let va = eval_numeric(a, &point, &real).expect("probe realizations cover all opaques");
        let vb = eval_numeric(b, &point, &real).expect("probe realizations cover all opaques");
        let scale = 1f64.max(va.abs()).max(vb.abs());
        max_gap = max_gap.max((va - vb).abs() / scale);
    }
    EquivalenceReport {
        canonical_equal: a == b,
        probe_equal: max_gap <= PROBE_TOLERANCE,
        points: PROBE_POINTS,
        max_relative_gap: max_gap,
    }
}

pub fn equivalent_with_seed(a: &Expr, b: &Expr, seed: u64) -> bool {
    let report = equivalence_report(a, b, seed);
    if !report.consistent() {
        log::warn!(
            "canonical comparison ({}) disagrees with probing ({}, gap {:e}) for {a} vs {b}",
            report.canonical_equal,
            report.probe_equal,
            report.max_relative_gap
        );
    }
    report.canonical_equal
}

/// Exact equivalence of canonical forms, cross-checked by probing with seed 0.
pub fn equivalent(a: &Expr, b: &Expr) -> bool {
    equivalent_with_seed(a, b, 0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expr::{parse_expr, Scope};

    fn pt(pairs: &[(&str, f64)]) -> Point {
        pairs.iter().map(|(k, v)| (Symbol::new(k), *v)).collect()
    }

    #[test]
    fn evaluates_polynomial_and_derivative() {
        let e = &Expr::symbol("w").pow(2) * &Expr::symbol("y");
        let p = pt(&[("w", 2.0), ("y", 3.0)]);
        assert_eq!(eval_numeric(&e, &p, &Realizations::new()).unwrap(), 12.0);
        assert_eq!(eval_numeric(&e.d("w"), &p, &Realizations::new()).unwrap(), 12.0);
    }

    #[test]
    fn missing_bindings_are_errors() {
        let e = Expr::symbol("w");
        assert_eq!(
            eval_numeric(&e, &Point::new(), &Realizations::new()),
            Err(EvalError::UnboundSymbol("w".into()))
        );
        let f = Expr::apply("f", vec![Expr::symbol("w")]);
        assert_eq!(
            eval_numeric(&f, &pt(&[("w", 1.0)]), &Realizations::new()),
            Err(EvalError::MissingRealization("f".into()))
        );
        let limited = Realizations::new().with("f", FnModel::new(1, 0, |_, a| Some(a[0].sin())));
        let df = f.d("w");
        assert!(matches!(
            eval_numeric(&df, &pt(&[("w", 1.0)]), &limited),
            Err(EvalError::PartialUnavailable { .. })
        ));
    }

    #[test]
    fn probing_agrees_with_canonical_forms() {
        let scope = Scope::with_coords(["w", "y", "x"]).opaque("f", 2);
        let cases = [
            ("(w+y)^2", "w^2 + 2*w*y + y^2", true),
            ("w^2*y", "w^3*y", false),
            ("f(x, w)*f(x,w) - f(x,w)^2", "0", true),
            ("D[1] f(x, w)", "D[2] f(x, w)", false),
        ];
        for (a, b, eq) in cases {
            let (a, b) = (parse_expr(a, &scope).unwrap(), parse_expr(b, &scope).unwrap());
            let r = equivalence_report(&a, &b, 0);
            assert_eq!(r.canonical_equal, eq, "{a} vs {b}");
            assert!(r.consistent(), "{a} vs {b}: {r:?}");
            assert_eq!(equivalent(&a, &b), eq);
        }
    }

    #[test]
    fn poly_model_partials_are_exact() {
        let t = Symbol::new("t");
        let m = PolyModel::new(vec![t.clone()], Expr::symbol(t).pow(3));
        assert_eq!(m.eval(&[], &[2.0]), Some(8.0));
        assert_eq!(m.eval(&[0], &[2.0]), Some(12.0));
        assert_eq!(m.eval(&[0, 0, 0], &[2.0]), Some(6.0));
    }
}
