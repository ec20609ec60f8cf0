//! Raw (non-canonical) syntax trees and their canonicalization.

use num_traits::One;

use super::{Atom, Expr, Rational, Symbol};

/// Syntax tree as written, before canonicalization.
///
/// Symbol and call nodes remember the byte offset they were parsed from so
/// resolution errors can point back into the source text.
#[derive(Clone, Debug, PartialEq)]
pub enum Tree {
    Num(Rational),
    Sym { name: String, at: usize },
    Add(Box<Tree>, Box<Tree>),
    Sub(Box<Tree>, Box<Tree>),
    Mul(Box<Tree>, Box<Tree>),
    Neg(Box<Tree>),
    Pow(Box<Tree>, u32),
    Call {
        name: String,
        /// Zero-based argument positions.
        partials: Vec<usize>,
        args: Vec<Tree>,
        at: usize,
    },
}

impl Tree {
    pub fn sym(name: &str) -> Tree {
        Tree::Sym {
            name: name.to_string(),
            at: 0,
        }
    }

    pub fn depth(&self) -> usize {
        match self {
            Tree::Num(_) | Tree::Sym { .. } => 1,
            Tree::Add(a, b) | Tree::Sub(a, b) | Tree::Mul(a, b) => 1 + a.depth().max(b.depth()),
            Tree::Neg(a) | Tree::Pow(a, _) => 1 + a.depth(),
            Tree::Call { args, .. } => 1 + args.iter().map(Tree::depth).max().unwrap_or(0),
        }
    }
}

/// Canonicalize a syntax tree. Symbols are taken at face value; scope checks
/// happen in the parser.
pub fn canonicalize(tree: &Tree) -> Expr {
    match tree {
        Tree::Num(r) => Expr::constant(r.clone()),
        Tree::Sym { name, .. } => Expr::symbol(name.as_str()),
        Tree::Add(a, b) => canonicalize(a) + canonicalize(b),
        Tree::Sub(a, b) => canonicalize(a) - canonicalize(b),
        Tree::Mul(a, b) => canonicalize(a) * canonicalize(b),
        Tree::Neg(a) => -canonicalize(a),
        Tree::Pow(a, n) => canonicalize(a).pow(*n),
        Tree::Call {
            name,
            partials,
            args,
            ..
        } => Expr::apply_partial(
            name.as_str(),
            partials.clone(),
            args.iter().map(canonicalize).collect(),
        ),
    }
}

fn atom_tree(atom: &Atom) -> Tree {
    match atom {
        Atom::Symbol(s) => Tree::sym(s.as_str()),
        Atom::Apply(a) => Tree::Call {
            name: a.func().as_str().to_string(),
            partials: a.partials().to_vec(),
            args: a.args().iter().map(Expr::to_tree).collect(),
            at: 0,
        },
    }
}

impl Expr {
    /// Explicit sum-of-products tree for this canonical expression.
    pub fn to_tree(&self) -> Tree {
        let mut acc: Option<Tree> = None;
        for (m, c) in self.terms() {
            let mut prod: Option<Tree> = if m.is_one() || !c.is_one() {
                Some(Tree::Num(c.clone()))
            } else {
                None
            };
            for (atom, e) in m.factors() {
                let t = if *e == 1 {
                    atom_tree(atom)
                } else {
                    Tree::Pow(Box::new(atom_tree(atom)), *e)
                };
                prod = Some(match prod {
                    None => t,
                    Some(p) => Tree::Mul(Box::new(p), Box::new(t)),
                });
            }
            let prod = prod.expect("nonempty term");
            acc = Some(match acc {
                None => prod,
                Some(a) => Tree::Add(Box::new(a), Box::new(prod)),
            });
        }
        acc.unwrap_or_else(|| Tree::Num(Rational::default()))
    }
}

impl From<&Symbol> for Tree {
    fn from(s: &Symbol) -> Self {
        Tree::sym(s.as_str())
    }
}
