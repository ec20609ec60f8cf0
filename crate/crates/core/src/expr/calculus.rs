//! Partial differentiation and substitution.

use std::collections::BTreeMap;

use super::{Application, Atom, Expr, Monomial, Rational, Symbol};

/// Simultaneous replacement of coordinate symbols by expressions.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Binding {
    map: BTreeMap<Symbol, Expr>,
}

impl Binding {
    pub fn new() -> Self {
        Self::default()
    }

    /// Build from pairs; returns the first repeated symbol on failure.
    pub fn from_pairs<I>(pairs: I) -> Result<Self, Symbol>
    where
        I: IntoIterator<Item = (Symbol, Expr)>,
    {
        let mut map = BTreeMap::new();
        for (s, e) in pairs {
            if map.insert(s.clone(), e).is_some() {
                return Err(s);
            }
        }
        Ok(Binding { map })
    }

    /// Builder-style insert. Panics on a repeated symbol.
    pub fn with(mut self, s: impl Into<Symbol>, e: Expr) -> Self {
        let s = s.into();
        assert!(
            self.map.insert(s.clone(), e).is_none(),
            "symbol `{s}` bound twice"
        );
        self
    }

    pub fn insert(&mut self, s: impl Into<Symbol>, e: Expr) -> Option<Expr> {
        self.map.insert(s.into(), e)
    }

    pub fn get(&self, s: &Symbol) -> Option<&Expr> {
        self.map.get(s)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&Symbol, &Expr)> {
        self.map.iter()
    }

    pub fn len(&self) -> usize {
        self.map.len()
    }

    pub fn is_empty(&self) -> bool {
        self.map.is_empty()
    }
}

fn atom_partial(atom: &Atom, s: &Symbol) -> Expr {
    match atom {
        Atom::Symbol(t) if t == s => Expr::one(),
        Atom::Symbol(_) => Expr::zero(),
        Atom::Apply(app) => {
            let mut acc = Expr::zero();
            for (k, arg) in app.args.iter().enumerate() {
                let inner = arg.partial(s);
                if inner.is_zero() {
                    continue;
                }
                let mut partials = app.partials.clone();
                partials.push(k);
                let outer = Expr::apply_partial(app.func.clone(), partials, app.args.clone());
                acc = &acc + &(&outer * &inner);
            }
            acc
        }
    }
}

impl Expr {
    /// Partial derivative with respect to the coordinate `s`.
    ///
    /// Opaque applications follow the chain rule: each argument that depends
    /// on `s` contributes the corresponding partial of the opaque function,
    /// evaluated at the same arguments, times the argument's derivative.
    pub fn partial(&self, s: &Symbol) -> Expr {
        let mut acc = Expr::zero();
        for (m, c) in self.terms() {
            let factors = m.factors();
            for (k, (atom, e)) in factors.iter().enumerate() {
                let d = atom_partial(atom, s);
                if d.is_zero() {
                    continue;
                }
                let mut rest: Vec<(Atom, u32)> = Vec::with_capacity(factors.len());
                for (j, f) in factors.iter().enumerate() {
                    if j != k {
                        rest.push(f.clone());
                    } else if *e > 1 {
                        rest.push((atom.clone(), e - 1));
                    }
                }
                let coeff = c * Rational::from_integer((*e).into());
                let term = Expr::from_monomial(Monomial(rest), coeff);
                acc = &acc + &(&term * &d);
            }
        }
        acc
    }

    /// Partial derivative with respect to a named coordinate.
    pub fn d(&self, s: &str) -> Expr {
        self.partial(&Symbol::new(s))
    }

    /// Repeated partial derivative, in the given order.
    pub fn partials(&self, symbols: &[Symbol]) -> Expr {
        symbols.iter().fold(self.clone(), |e, s| e.partial(s))
    }

    /// Simultaneous substitution followed by canonicalization. Opaque
    /// partials are not re-differentiated; only their arguments change.
    pub fn substitute(&self, b: &Binding) -> Expr {
        if b.is_empty() {
            return self.clone();
        }
        self.map_atoms(&mut |atom| match atom {
            Atom::Symbol(s) => b.get(s).cloned().unwrap_or_else(|| Expr::symbol(s.clone())),
            Atom::Apply(app) => Expr::apply_partial(
                app.func.clone(),
                app.partials.clone(),
                app.args.iter().map(|a| a.substitute(b)).collect(),
            ),
        })
    }

    /// Replace the opaque function `func` by a concrete body over `params`.
    ///
    /// `D[k..] func(args)` becomes the corresponding partial of `body`, with
    /// `params` replaced by the (already substituted) `args`.
    pub fn substitute_function(&self, func: &Symbol, params: &[Symbol], body: &Expr) -> Expr {
        self.map_atoms(&mut |atom| match atom {
            Atom::Symbol(s) => Expr::symbol(s.clone()),
            Atom::Apply(app) => {
                let args: Vec<Expr> = app
                    .args
                    .iter()
                    .map(|a| a.substitute_function(func, params, body))
                    .collect();
                if &app.func != func || params.len() != args.len() {
                    return Expr::apply_partial(app.func.clone(), app.partials.clone(), args);
                }
                let mut derived = body.clone();
                for &k in &app.partials {
                    derived = derived.partial(&params[k]);
                }
                let binding = Binding {
                    map: params.iter().cloned().zip(args).collect(),
                };
                derived.substitute(&binding)
            }
        })
    }

    /// Substitute several opaque functions at once.
    pub fn substitute_functions(&self, defs: &[(Symbol, Vec<Symbol>, Expr)]) -> Expr {
        self.map_atoms(&mut |atom| match atom {
            Atom::Symbol(s) => Expr::symbol(s.clone()),
            Atom::Apply(app) => {
                let args: Vec<Expr> = app
                    .args
                    .iter()
                    .map(|a| a.substitute_functions(defs))
                    .collect();
                match defs
                    .iter()
                    .find(|(f, p, _)| f == &app.func && p.len() == args.len())
                {
                    None => Expr::apply_partial(app.func.clone(), app.partials.clone(), args),
                    Some((_, params, body)) => {
                        let mut derived = body.clone();
                        for &k in &app.partials {
                            derived = derived.partial(&params[k]);
                        }
                        let binding = Binding {
                            map: params.iter().cloned().zip(args).collect(),
                        };
                        derived.substitute(&binding)
                    }
                }
            }
        })
    }

    /// Total differential `sum_k d(self)/d(vars[k]) * dots[k]`.
    pub fn total_differential(&self, vars: &[Symbol], dots: &[Expr]) -> Expr {
        vars.iter()
            .zip(dots)
            .map(|(v, dv)| &self.partial(v) * dv)
            .sum()
    }
}

impl Application {
    pub fn with_args(&self, args: Vec<Expr>) -> Expr {
        Expr::apply_partial(self.func.clone(), self.partials.clone(), args)
    }
}
