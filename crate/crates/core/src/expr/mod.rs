//! Canonical symbolic expressions.
//!
//! An [`Expr`] is always stored in canonical form: a sorted sum of monomials
//! with nonzero exact rational coefficients. A monomial is a sorted product of
//! atoms raised to positive integer powers, and an atom is either a coordinate
//! symbol or an application of an opaque smooth function (possibly carrying a
//! sorted multi-index of partial derivatives on its argument positions).
//!
//! Because every constructor canonicalizes, structural equality of two
//! [`Expr`] values is exact symbolic equality for polynomial expressions over
//! opaque atoms.

mod calculus;
mod numeric;
mod parse;
mod tree;

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::sync::Arc;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};

pub use calculus::Binding;
pub use numeric::{
    equivalence_report, equivalent, equivalent_with_seed, eval_numeric, random_realizations,
    EquivalenceReport, EvalError, FnModel, OpaqueModel, Point, PolyModel, Realizations,
};
pub use parse::{parse_expr, parse_tree, ParseError, Scope};
pub use tree::{canonicalize, Tree};

/// Exact rational number used for every constant inside an expression.
pub type Rational = BigRational;

/// Build a rational from a numerator and denominator.
///
/// Panics if `den` is zero.
pub fn rational(num: i64, den: i64) -> Rational {
    BigRational::new(BigInt::from(num), BigInt::from(den))
}

/// An interned coordinate or function name.
#[derive(Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Symbol(Arc<str>);

impl Symbol {
    pub fn new(name: impl AsRef<str>) -> Self {
        Symbol(Arc::from(name.as_ref()))
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl fmt::Debug for Symbol {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl fmt::Display for Symbol {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl From<&str> for Symbol {
    fn from(s: &str) -> Self {
        Symbol::new(s)
    }
}

impl From<String> for Symbol {
    fn from(s: String) -> Self {
        Symbol(Arc::from(s))
    }
}

impl From<&Symbol> for Symbol {
    fn from(s: &Symbol) -> Self {
        s.clone()
    }
}

/// Application of an opaque smooth function, `D[k..] f(args)`.
#[derive(Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Debug)]
pub struct Application {
    func: Symbol,
    /// Zero-based argument positions, sorted; partials commute.
    partials: Vec<usize>,
    args: Vec<Expr>,
}

impl Application {
    pub fn func(&self) -> &Symbol {
        &self.func
    }

    pub fn partials(&self) -> &[usize] {
        &self.partials
    }

    pub fn args(&self) -> &[Expr] {
        &self.args
    }

    pub fn arity(&self) -> usize {
        self.args.len()
    }
}

#[derive(Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Debug)]
pub enum Atom {
    Symbol(Symbol),
    Apply(Arc<Application>),
}

impl Atom {
    fn to_expr(&self) -> Expr {
        Expr::from_monomial(Monomial(vec![(self.clone(), 1)]), Rational::one())
    }
}

/// Sorted product of atoms with positive exponents. The empty monomial is 1.
#[derive(Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Debug, Default)]
pub struct Monomial(Vec<(Atom, u32)>);

impl Monomial {
    pub fn factors(&self) -> &[(Atom, u32)] {
        &self.0
    }

    pub fn is_one(&self) -> bool {
        self.0.is_empty()
    }

    pub fn degree(&self) -> u32 {
        self.0.iter().map(|(_, e)| *e).sum()
    }

    fn mul(&self, other: &Monomial) -> Monomial {
        let mut out = Vec::with_capacity(self.0.len() + other.0.len());
        let (mut i, mut j) = (0, 0);
        while i < self.0.len() && j < other.0.len() {
            match self.0[i].0.cmp(&other.0[j].0) {
                std::cmp::Ordering::Less => {
                    out.push(self.0[i].clone());
                    i += 1;
                }
                std::cmp::Ordering::Greater => {
                    out.push(other.0[j].clone());
                    j += 1;
                }
                std::cmp::Ordering::Equal => {
                    out.push((self.0[i].0.clone(), self.0[i].1 + other.0[j].1));
                    i += 1;
                    j += 1;
                }
            }
        }
        out.extend_from_slice(&self.0[i..]);
        out.extend_from_slice(&other.0[j..]);
        Monomial(out)
    }
}

/// Canonical symbolic expression. Cheap to clone; immutable.
#[derive(Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Expr {
    terms: Arc<Vec<(Monomial, Rational)>>,
}

/// Structural view of a canonical expression, one node deep.
#[derive(Clone, Debug, PartialEq)]
pub enum View<'a> {
    Constant(Rational),
    Symbol(&'a Symbol),
    Sum(Vec<Expr>),
    Product(Vec<Expr>),
    Power(Expr, u32),
    Apply(&'a Application),
    Partial(&'a Application),
}

impl Expr {
    fn from_map(map: BTreeMap<Monomial, Rational>) -> Expr {
        let terms: Vec<_> = map.into_iter().filter(|(_, c)| !c.is_zero()).collect();
        Expr {
            terms: Arc::new(terms),
        }
    }

    fn from_monomial(m: Monomial, c: Rational) -> Expr {
        if c.is_zero() {
            return Expr::zero();
        }
        Expr {
            terms: Arc::new(vec![(m, c)]),
        }
    }

    pub fn zero() -> Expr {
        Expr {
            terms: Arc::new(Vec::new()),
        }
    }

    pub fn one() -> Expr {
        Expr::constant(Rational::one())
    }

    pub fn constant(c: Rational) -> Expr {
        Expr::from_monomial(Monomial::default(), c)
    }

    pub fn int(n: i64) -> Expr {
        Expr::constant(Rational::from_integer(BigInt::from(n)))
    }

    pub fn ratio(num: i64, den: i64) -> Expr {
        Expr::constant(rational(num, den))
    }

    pub fn symbol(name: impl Into<Symbol>) -> Expr {
        Atom::Symbol(name.into()).to_expr()
    }

    /// `f(args)` for an opaque function symbol.
    pub fn apply(func: impl Into<Symbol>, args: Vec<Expr>) -> Expr {
        Expr::apply_partial(func, Vec::new(), args)
    }

    /// `D[partials] f(args)`; positions are zero-based and get sorted.
    pub fn apply_partial(func: impl Into<Symbol>, mut partials: Vec<usize>, args: Vec<Expr>) -> Expr {
        partials.sort_unstable();
        debug_assert!(partials.iter().all(|&k| k < args.len()));
        Atom::Apply(Arc::new(Application {
            func: func.into(),
            partials,
            args,
        }))
        .to_expr()
    }

    pub fn terms(&self) -> &[(Monomial, Rational)] {
        &self.terms
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn as_constant(&self) -> Option<Rational> {
        match self.terms.as_slice() {
            [] => Some(Rational::zero()),
            [(m, c)] if m.is_one() => Some(c.clone()),
            _ => None,
        }
    }

    pub fn as_symbol(&self) -> Option<&Symbol> {
        match self.terms.as_slice() {
            [(m, c)] if c.is_one() && m.0.len() == 1 && m.0[0].1 == 1 => match &m.0[0].0 {
                Atom::Symbol(s) => Some(s),
                Atom::Apply(_) => None,
            },
            _ => None,
        }
    }

    pub fn view(&self) -> View<'_> {
        match self.terms.as_slice() {
            [] => View::Constant(Rational::zero()),
            [(m, c)] => {
                if m.is_one() {
                    return View::Constant(c.clone());
                }
                if c.is_one() && m.0.len() == 1 {
                    let (atom, e) = &m.0[0];
                    if *e == 1 {
                        return match atom {
                            Atom::Symbol(s) => View::Symbol(s),
                            Atom::Apply(a) if a.partials.is_empty() => View::Apply(a),
                            Atom::Apply(a) => View::Partial(a),
                        };
                    }
                    return View::Power(atom.to_expr(), *e);
                }
                let mut factors = Vec::new();
                if !c.is_one() {
                    factors.push(Expr::constant(c.clone()));
                }
                for (atom, e) in &m.0 {
                    factors.push(atom.to_expr().pow(*e));
                }
                View::Product(factors)
            }
            many => View::Sum(
                many.iter()
                    .map(|(m, c)| Expr::from_monomial(m.clone(), c.clone()))
                    .collect(),
            ),
        }
    }

    pub fn scale(&self, r: &Rational) -> Expr {
        if r.is_zero() {
            return Expr::zero();
        }
        Expr {
            terms: Arc::new(self.terms.iter().map(|(m, c)| (m.clone(), c * r)).collect()),
        }
    }

    pub fn pow(&self, n: u32) -> Expr {
        let mut result = Expr::one();
        let mut base = self.clone();
        let mut n = n;
        while n > 0 {
            if n & 1 == 1 {
                result = &result * &base;
            }
            n >>= 1;
            if n > 0 {
                base = &base * &base;
            }
        }
        result
    }

    /// Number of monomials in the canonical sum.
    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.is_zero()
    }

    /// All coordinate symbols, including those nested in opaque arguments.
    pub fn symbols(&self) -> BTreeSet<Symbol> {
        let mut out = BTreeSet::new();
        self.collect_symbols(&mut out);
        out
    }

    fn collect_symbols(&self, out: &mut BTreeSet<Symbol>) {
        for (m, _) in self.terms.iter() {
            for (atom, _) in &m.0 {
                match atom {
                    Atom::Symbol(s) => {
                        out.insert(s.clone());
                    }
                    Atom::Apply(a) => a.args.iter().for_each(|e| e.collect_symbols(out)),
                }
            }
        }
    }

    /// Opaque function symbols with their arities.
    pub fn opaques(&self) -> BTreeMap<Symbol, usize> {
        let mut out = BTreeMap::new();
        self.collect_opaques(&mut out);
        out
    }

    fn collect_opaques(&self, out: &mut BTreeMap<Symbol, usize>) {
        for (m, _) in self.terms.iter() {
            for (atom, _) in &m.0 {
                if let Atom::Apply(a) = atom {
                    out.insert(a.func.clone(), a.args.len());
                    a.args.iter().for_each(|e| e.collect_opaques(out));
                }
            }
        }
    }

    pub fn contains_opaque(&self) -> bool {
        self.terms
            .iter()
            .any(|(m, _)| m.0.iter().any(|(a, _)| matches!(a, Atom::Apply(_))))
    }

    /// Whether any of `vars` occurs anywhere in the expression.
    pub fn depends_on(&self, vars: &[Symbol]) -> bool {
        let syms = self.symbols();
        vars.iter().any(|v| syms.contains(v))
    }

    /// Decompose as a polynomial in `vars`, keyed by exponent vectors.
    ///
    /// Fails with the offending atom when one of `vars` occurs inside an
    /// opaque argument, since the expression is then not polynomial in them.
    pub fn coefficients(&self, vars: &[Symbol]) -> Result<BTreeMap<Vec<u32>, Expr>, Atom> {
        let mut acc: BTreeMap<Vec<u32>, BTreeMap<Monomial, Rational>> = BTreeMap::new();
        for (m, c) in self.terms.iter() {
            let mut key = vec![0u32; vars.len()];
            let mut rest = Vec::new();
            for (atom, e) in &m.0 {
                match atom {
                    Atom::Symbol(s) => match vars.iter().position(|v| v == s) {
                        Some(k) => key[k] += e,
                        None => rest.push((atom.clone(), *e)),
                    },
                    Atom::Apply(a) => {
                        if a.args.iter().any(|arg| arg.depends_on(vars)) {
                            return Err(atom.clone());
                        }
                        rest.push((atom.clone(), *e));
                    }
                }
            }
            let slot = acc.entry(key).or_default();
            *slot.entry(Monomial(rest)).or_insert_with(Rational::zero) += c;
        }
        Ok(acc
            .into_iter()
            .map(|(k, v)| (k, Expr::from_map(v)))
            .filter(|(_, e)| !e.is_zero())
            .collect())
    }

    /// Total degree in `vars`, or `None` if not polynomial in them.
    pub fn degree_in(&self, vars: &[Symbol]) -> Option<u32> {
        let coeffs = self.coefficients(vars).ok()?;
        Some(coeffs.keys().map(|k| k.iter().sum()).max().unwrap_or(0))
    }

    /// Rebuild the expression with every atom replaced by `f(atom)`.
    pub(crate) fn map_atoms(&self, f: &mut impl FnMut(&Atom) -> Expr) -> Expr {
        let mut acc = Expr::zero();
        for (m, c) in self.terms.iter() {
            let mut prod = Expr::constant(c.clone());
            for (atom, e) in &m.0 {
                prod = &prod * &f(atom).pow(*e);
            }
            acc = &acc + &prod;
        }
        acc
    }
}

impl Default for Expr {
    fn default() -> Self {
        Expr::zero()
    }
}

fn add_terms(a: &[(Monomial, Rational)], b: &[(Monomial, Rational)], sign: bool) -> Expr {
    let mut out = Vec::with_capacity(a.len() + b.len());
    let (mut i, mut j) = (0, 0);
    let adj = |c: &Rational| if sign { c.clone() } else { -c };
    while i < a.len() && j < b.len() {
        match a[i].0.cmp(&b[j].0) {
            std::cmp::Ordering::Less => {
                out.push(a[i].clone());
                i += 1;
            }
            std::cmp::Ordering::Greater => {
                out.push((b[j].0.clone(), adj(&b[j].1)));
                j += 1;
            }
            std::cmp::Ordering::Equal => {
                let c = &a[i].1 + adj(&b[j].1);
                if !c.is_zero() {
                    out.push((a[i].0.clone(), c));
                }
                i += 1;
                j += 1;
            }
        }
    }
    out.extend_from_slice(&a[i..]);
    out.extend(b[j..].iter().map(|(m, c)| (m.clone(), adj(c))));
    Expr {
        terms: Arc::new(out),
    }
}

impl std::ops::Add for &Expr {
    type Output = Expr;
    fn add(self, rhs: &Expr) -> Expr {
        add_terms(&self.terms, &rhs.terms, true)
    }
}

impl std::ops::Sub for &Expr {
    type Output = Expr;
    fn sub(self, rhs: &Expr) -> Expr {
        add_terms(&self.terms, &rhs.terms, false)
    }
}

impl std::ops::Mul for &Expr {
    type Output = Expr;
    fn mul(self, rhs: &Expr) -> Expr {
        if self.is_zero() || rhs.is_zero() {
            return Expr::zero();
        }
        let mut map: BTreeMap<Monomial, Rational> = BTreeMap::new();
        for (ma, ca) in self.terms.iter() {
            for (mb, cb) in rhs.terms.iter() {
                *map.entry(ma.mul(mb)).or_insert_with(Rational::zero) += ca * cb;
            }
        }
        Expr::from_map(map)
    }
}

impl std::ops::Neg for &Expr {
    type Output = Expr;
    fn neg(self) -> Expr {
        Expr {
            terms: Arc::new(self.terms.iter().map(|(m, c)| (m.clone(), -c)).collect()),
        }
    }
}

macro_rules! forward_owned {
    ($tr:ident, $method:ident) => {
        impl std::ops::$tr for Expr {
            type Output = Expr;
            fn $method(self, rhs: Expr) -> Expr {
                std::ops::$tr::$method(&self, &rhs)
            }
        }
        impl std::ops::$tr<&Expr> for Expr {
            type Output = Expr;
            fn $method(self, rhs: &Expr) -> Expr {
                std::ops::$tr::$method(&self, rhs)
            }
        }
        impl std::ops::$tr<Expr> for &Expr {
            type Output = Expr;
            fn $method(self, rhs: Expr) -> Expr {
                std::ops::$tr::$method(self, &rhs)
            }
        }
    };
}

forward_owned!(Add, add);
forward_owned!(Sub, sub);
forward_owned!(Mul, mul);

impl std::ops::Neg for Expr {
    type Output = Expr;
    fn neg(self) -> Expr {
        -&self
    }
}

impl std::iter::Sum for Expr {
    fn sum<I: Iterator<Item = Expr>>(iter: I) -> Expr {
        iter.fold(Expr::zero(), |a, b| &a + &b)
    }
}

impl From<i64> for Expr {
    fn from(n: i64) -> Self {
        Expr::int(n)
    }
}

impl From<Rational> for Expr {
    fn from(r: Rational) -> Self {
        Expr::constant(r)
    }
}

pub(crate) fn fmt_rational(r: &Rational, f: &mut fmt::Formatter<'_>) -> fmt::Result {
    if r.is_integer() {
        write!(f, "{}", r.numer())
    } else {
        write!(f, "{}/{}", r.numer(), r.denom())
    }
}

impl fmt::Display for Atom {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Atom::Symbol(s) => write!(f, "{s}"),
            Atom::Apply(a) => {
                if !a.partials.is_empty() {
                    let idx: Vec<String> = a.partials.iter().map(|k| (k + 1).to_string()).collect();
                    write!(f, "D[{}] ", idx.join(","))?;
                }
                write!(f, "{}(", a.func)?;
                for (k, arg) in a.args.iter().enumerate() {
                    if k > 0 {
                        f.write_str(", ")?;
                    }
                    write!(f, "{arg}")?;
                }
                f.write_str(")")
            }
        }
    }
}

impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.terms.is_empty() {
            return f.write_str("0");
        }
        for (k, (m, c)) in self.terms.iter().enumerate() {
            let negative = c.is_negative();
            let mag = c.abs();
            match (k, negative) {
                (0, true) => f.write_str("-")?,
                (0, false) => {}
                (_, true) => f.write_str(" - ")?,
                (_, false) => f.write_str(" + ")?,
            }
            let mut first = true;
            if m.is_one() || !mag.is_one() {
                fmt_rational(&mag, f)?;
                first = false;
            }
            for (atom, e) in &m.0 {
                if !first {
                    f.write_str("*")?;
                }
                first = false;
                write!(f, "{atom}")?;
                if *e > 1 {
                    write!(f, "^{e}")?;
                }
            }
        }
        Ok(())
    }
}

impl fmt::Debug for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Expr({self})")
    }
}

/// Best-effort conversion of an exact rational to `f64`.
pub fn rational_to_f64(r: &Rational) -> f64 {
    r.to_f64().unwrap_or_else(|| {
        let n = r.numer().to_f64().unwrap_or(f64::NAN);
        let d = r.denom().to_f64().unwrap_or(f64::NAN);
        n / d
    })
}

/// Exact rational for a finite `f64` (dyadic expansion), `None` for NaN/inf.
pub fn rational_from_f64(x: f64) -> Option<Rational> {
    BigRational::from_float(x)
}
