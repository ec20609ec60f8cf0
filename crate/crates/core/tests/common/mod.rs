#![allow(dead_code)]

use jetfield::expr::{parse_expr, Expr, Scope, Symbol};
use proptest::prelude::*;

pub fn syms(names: &[&str]) -> Vec<Symbol> {
    names.iter().map(|n| Symbol::new(*n)).collect()
}

pub fn names(prefix: &str, n: usize) -> Vec<String> {
    (0..n).map(|k| format!("{prefix}{k}")).collect()
}

pub fn parse(text: &str, scope: &Scope) -> Expr {
    parse_expr(text, scope).unwrap_or_else(|e| panic!("{text}: {e}"))
}

/// Monomial with the given exponents over `vars`.
pub fn monomial(vars: &[Symbol], exps: &[u32]) -> Expr {
    vars.iter()
        .zip(exps)
        .fold(Expr::one(), |acc, (v, &k)| &acc * &Expr::symbol(v.clone()).pow(k))
}

/// Random polynomial over `vars` with small integer coefficients, at most
/// `terms` terms and total degree at most `deg`.
pub fn poly(vars: Vec<Symbol>, deg: u32, terms: usize) -> BoxedStrategy<Expr> {
    let n = vars.len();
    prop::collection::vec((-3i64..=3, prop::collection::vec(0..=deg, n)), 0..=terms)
        .prop_map(move |ts| {
            ts.into_iter()
                .filter(|(_, e)| e.iter().sum::<u32>() <= deg)
                .fold(Expr::zero(), |acc, (c, e)| &acc + &(&Expr::int(c) * &monomial(&vars, &e)))
        })
        .boxed()
}

/// Like [`poly`] but never zero.
pub fn nonzero_poly(vars: Vec<Symbol>, deg: u32, terms: usize) -> BoxedStrategy<Expr> {
    (poly(vars.clone(), deg, terms), 1i64..=3).prop_map(|(p, c)| if p.is_zero() { Expr::int(c) } else { p }).boxed()
}

/// Opaque application `name(args..)`.
pub fn opaque(name: &str, args: &[Symbol]) -> Expr {
    Expr::apply(Symbol::new(name), args.iter().cloned().map(Expr::symbol).collect())
}

/// Nonzero small integer.
pub fn unit() -> impl Strategy<Value = i64> {
    prop_oneof![-3i64..=-1, 1i64..=3]
}

/// Random block-triangular chart change of `frame` onto itself. Each new
/// coordinate is a nonzero multiple of the old one plus a polynomial of
/// degree at most 2 in lower blocks and earlier coordinates of its own
/// block; with `opaques`, those extra terms carry opaque coefficients of
/// the base.
pub fn random_chart(frame: &jetfield::geometry::Frame, rng: &mut impl rand::Rng, opaques: bool) -> jetfield::geometry::ChartChange {
    random_chart_avoiding(frame, rng, opaques, &[])
}

/// [`random_chart`] with the top block kept independent of `avoid`.
pub fn random_chart_avoiding(
    frame: &jetfield::geometry::Frame,
    rng: &mut impl rand::Rng,
    opaques: bool,
    avoid: &[Symbol],
) -> jetfield::geometry::ChartChange {
    use jetfield::geometry::{ChartChange, Role};
    let coords = frame.coords();
    let roles = frame.roles();
    let base = frame.block(Role::Base);
    let permitted = |r: Role, s: Role| match r {
        Role::Base => s == Role::Base,
        Role::Fibre => matches!(s, Role::Base | Role::Fibre),
        Role::Parameter => matches!(s, Role::Base | Role::Parameter),
        Role::SecondFibre => s != Role::Parameter,
    };
    let mut formulas = Vec::new();
    for (k, (c, r)) in coords.iter().zip(roles).enumerate() {
        let diag = [-2i64, -1, 1, 2, 3][rng.gen_range(0..5)];
        let mut f = &Expr::int(diag) * &Expr::symbol(c.clone());
        let others: Vec<Symbol> = coords
            .iter()
            .zip(roles)
            .enumerate()
            .filter(|(j, (s, sr))| {
                permitted(*r, **sr) && (**sr != *r || *j < k) && !(*r == Role::SecondFibre && avoid.contains(s))
            })
            .map(|(_, (s, _))| s.clone())
            .collect();
        for t in 0..rng.gen_range(0..=3) {
            let mut m = Expr::int(rng.gen_range(-2i64..=2));
            for _ in 0..rng.gen_range(0..=2) {
                if others.is_empty() {
                    break;
                }
                m = &m * &Expr::symbol(others[rng.gen_range(0..others.len())].clone());
            }
            if opaques && *r != Role::Base && !base.is_empty() {
                m = &m * &opaque(&format!("A{k}_{t}"), &base);
            }
            f = &f + &m;
        }
        if *r == Role::Base {
            f = &f + &Expr::int(rng.gen_range(-2i64..=2));
        }
        formulas.push(f);
    }
    ChartChange::new(frame.clone(), frame.clone(), formulas).expect("block-triangular chart")
}

