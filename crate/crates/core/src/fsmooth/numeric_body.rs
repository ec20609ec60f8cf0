//! Floating-point curve bodies written in the expression syntax, with a
//! handful of non-smooth builtins for building counterexamples.

use crate::expr::{rational_to_f64, parse_tree, ParseError, Tree};

use super::LAMBDA;

const BUILTINS: &[&str] = &["abs", "cbrt", "sqrt", "sin", "cos", "exp"];

fn builtin(name: &str, x: f64) -> f64 {
    match name {
        "abs" => x.abs(),
        "cbrt" => x.cbrt(),
        "sqrt" => x.sqrt(),
        "sin" => x.sin(),
        "cos" => x.cos(),
        "exp" => x.exp(),
        _ => unreachable!("checked on construction"),
    }
}

/// Check that `tree` only uses `lam`, numbers, arithmetic and builtins.
pub(crate) fn check(tree: &Tree) -> Result<(), ParseError> {
    match tree {
        Tree::Num(_) => Ok(()),
        Tree::Sym { name, at } => {
            if name == LAMBDA {
                Ok(())
            } else {
                Err(ParseError::UnknownSymbol {
                    name: name.clone(),
                    offset: *at,
                })
            }
        }
        Tree::Add(a, b) | Tree::Sub(a, b) | Tree::Mul(a, b) => {
            check(a)?;
            check(b)
        }
        Tree::Neg(a) | Tree::Pow(a, _) => check(a),
        Tree::Call {
            name,
            partials,
            args,
            at,
        } => {
            if !BUILTINS.contains(&name.as_str()) || !partials.is_empty() {
                return Err(ParseError::UnknownSymbol {
                    name: name.clone(),
                    offset: *at,
                });
            }
            if args.len() != 1 {
                return Err(ParseError::ArityMismatch {
                    name: name.clone(),
                    expected: 1,
                    found: args.len(),
                    offset: *at,
                });
            }
            check(&args[0])
        }
    }
}

pub(crate) fn eval(tree: &Tree, lam: f64) -> f64 {
    match tree {
        Tree::Num(r) => rational_to_f64(r),
        Tree::Sym { .. } => lam,
        Tree::Add(a, b) => eval(a, lam) + eval(b, lam),
        Tree::Sub(a, b) => eval(a, lam) - eval(b, lam),
        Tree::Mul(a, b) => eval(a, lam) * eval(b, lam),
        Tree::Neg(a) => -eval(a, lam),
        Tree::Pow(a, n) => eval(a, lam).powi(*n as i32),
        Tree::Call { name, args, .. } => builtin(name, eval(&args[0], lam)),
    }
}

pub(crate) fn parse(text: &str) -> Result<Tree, ParseError> {
    let tree = parse_tree(text)?;
    check(&tree)?;
    Ok(tree)
}
