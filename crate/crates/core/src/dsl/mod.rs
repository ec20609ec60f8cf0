//! Model files: declarations of charts, fibred frames, systems, curves,
//! sections and connections.
//!
//! ```text
//! # comment
//! chart B (x0, x1)
//! fibred F over B (y0)
//! fibred G over F (z0)
//! opaque K/1
//! change ch on G { x0 = x0, y0 = y0 + x0, z0 = 2*z0 }
//! system lin params (w0) from M to N eval { z0 = w0*y0 }
//! curve c in lin interval (-1, 1) { w0 = lam^2 }
//! curve numeric k in lin interval (-inf, inf) { w0 = abs(lam) }
//! secsystem s over (B, F, G) params (w0) vector eval { z0 = w0*y0 }
//! section sigma of s { w0 = K(x0) }
//! connsystem cs over (B, F) params (w0) coeff { c[y0, x0] = w0*y0 }
//! gamma g of cs { w0 = K(x0) }
//! fconnection nabla over s { D[z0, x0](phi) = K(x0)*phi_z0(x0, y0) }
//! ```
//!
//! Entries inside braces are separated by commas or newlines. Names must be
//! declared before use. In `fconnection` bodies the section is written
//! `phi_<z>(x.., y..)`.

mod model;
mod parser;

use std::fmt;

use crate::expr::{Expr, Rational, Symbol};
use crate::sections::BundleKind;

pub use model::{Model, Object};
pub use parser::parse_model;

/// One-based source position.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Default)]
pub struct Pos {
    pub line: usize,
    pub column: usize,
}

impl fmt::Display for Pos {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}", self.line, self.column)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("line {}, column {}: {message}", pos.line, pos.column)]
pub struct DslError {
    pub pos: Pos,
    pub message: String,
}

impl DslError {
    pub(crate) fn new(pos: Pos, message: impl Into<String>) -> Self {
        DslError {
            pos,
            message: message.into(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum CurveBodyDecl {
    Symbolic(Vec<Expr>),
    /// Source text per component, over `lam`.
    Numeric(Vec<String>),
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum DeclKind {
    Chart {
        coords: Vec<Symbol>,
    },
    Fibred {
        over: Symbol,
        coords: Vec<Symbol>,
    },
    Opaque {
        arity: usize,
    },
    Change {
        on: Symbol,
        formulas: Vec<Expr>,
    },
    System {
        params: Vec<Symbol>,
        from: Symbol,
        to: Symbol,
        eval: Vec<Expr>,
    },
    Curve {
        system: Symbol,
        lo: Option<Rational>,
        hi: Option<Rational>,
        body: CurveBodyDecl,
    },
    SecSystem {
        over: [Symbol; 3],
        params: Vec<Symbol>,
        bundle: BundleKind,
        eval: Vec<Expr>,
    },
    Section {
        system: Symbol,
        values: Vec<Expr>,
    },
    ConnSystem {
        over: [Symbol; 2],
        params: Vec<Symbol>,
        /// `[i][λ]`.
        coeffs: Vec<Vec<Expr>>,
    },
    Gamma {
        system: Symbol,
        values: Vec<Expr>,
    },
    FConnection {
        system: Symbol,
        /// `[a][λ]`.
        recipes: Vec<Vec<Expr>>,
    },
}

impl DeclKind {
    pub fn keyword(&self) -> &'static str {
        match self {
            DeclKind::Chart { .. } => "chart",
            DeclKind::Fibred { .. } => "fibred",
            DeclKind::Opaque { .. } => "opaque",
            DeclKind::Change { .. } => "change",
            DeclKind::System { .. } => "system",
            DeclKind::Curve { .. } => "curve",
            DeclKind::SecSystem { .. } => "secsystem",
            DeclKind::Section { .. } => "section",
            DeclKind::ConnSystem { .. } => "connsystem",
            DeclKind::Gamma { .. } => "gamma",
            DeclKind::FConnection { .. } => "fconnection",
        }
    }
}

/// Equality ignores positions.
#[derive(Clone, Debug)]
pub struct Decl {
    pub name: Symbol,
    pub pos: Pos,
    pub kind: DeclKind,
}

impl PartialEq for Decl {
    fn eq(&self, other: &Self) -> bool {
        self.name == other.name && self.kind == other.kind
    }
}

impl Eq for Decl {}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct ModelFile {
    pub decls: Vec<Decl>,
}

impl ModelFile {
    pub fn get(&self, name: &str) -> Option<&Decl> {
        self.decls.iter().find(|d| d.name.as_str() == name)
    }

    pub fn len(&self) -> usize {
        self.decls.len()
    }

    pub fn is_empty(&self) -> bool {
        self.decls.is_empty()
    }
}

fn list(names: &[Symbol]) -> String {
    names.iter().map(Symbol::as_str).collect::<Vec<_>>().join(", ")
}

fn bound(b: &Option<Rational>, inf: &str) -> String {
    match b {
        None => inf.to_string(),
        Some(r) if r.is_integer() => r.numer().to_string(),
        Some(r) => format!("{}/{}", r.numer(), r.denom()),
    }
}

fn frame_coords(decls: &[Decl], name: &Symbol) -> Vec<Symbol> {
    let mut blocks = Vec::new();
    let mut cur = name.clone();
    while let Some(d) = decls.iter().rev().find(|d| d.name == cur) {
        match &d.kind {
            DeclKind::Chart { coords } => {
                blocks.push(coords.clone());
                break;
            }
            DeclKind::Fibred { over, coords } => {
                blocks.push(coords.clone());
                cur = over.clone();
            }
            _ => break,
        }
    }
    blocks.into_iter().rev().flatten().collect()
}

/// Coordinates a frame declaration adds.
fn own_coords(decls: &[Decl], name: &Symbol) -> Vec<Symbol> {
    match decls.iter().rev().find(|d| &d.name == name).map(|d| &d.kind) {
        Some(DeclKind::Chart { coords }) | Some(DeclKind::Fibred { coords, .. }) => coords.clone(),
        _ => Vec::new(),
    }
}

fn params_of<'a>(decls: &'a [Decl], name: &Symbol) -> Option<(Vec<Symbol>, &'a DeclKind)> {
    let kind = &decls.iter().rev().find(|d| &d.name == name)?.kind;
    match kind {
        DeclKind::System { params, .. } | DeclKind::SecSystem { params, .. } | DeclKind::ConnSystem { params, .. } => {
            Some((params.clone(), kind))
        }
        _ => None,
    }
}

/// Left-hand sides of the body of `decls[k]`, in storage order.
pub(crate) fn body_labels(decls: &[Decl], k: usize) -> Vec<String> {
    let before = &decls[..k];
    let names = |v: Vec<Symbol>| v.into_iter().map(|s| s.to_string()).collect();
    let pairs = |outer: Vec<Symbol>, inner: Vec<Symbol>, fmt: &dyn Fn(&Symbol, &Symbol) -> String| {
        outer
            .iter()
            .flat_map(|a| inner.iter().map(move |b| (a.clone(), b.clone())))
            .map(|(a, b)| fmt(&a, &b))
            .collect()
    };
    match &decls[k].kind {
        DeclKind::Change { on, .. } => names(frame_coords(before, on)),
        DeclKind::System { to, .. } => names(own_coords(before, to)),
        DeclKind::Curve { system, .. } => match params_of(before, system) {
            Some((p, DeclKind::SecSystem { over, .. })) => names(own_coords(before, &over[0]).into_iter().chain(p).collect()),
            Some((p, _)) => names(p),
            None => Vec::new(),
        },
        DeclKind::SecSystem { over, .. } => names(own_coords(before, &over[2])),
        DeclKind::Section { system, .. } | DeclKind::Gamma { system, .. } => {
            params_of(before, system).map_or_else(Vec::new, |(p, _)| names(p))
        }
        DeclKind::ConnSystem { over, .. } => pairs(own_coords(before, &over[1]), own_coords(before, &over[0]), &|y, x| {
            format!("c[{y}, {x}]")
        }),
        DeclKind::FConnection { system, .. } => match params_of(before, system) {
            Some((_, DeclKind::SecSystem { over, .. })) => {
                pairs(own_coords(before, &over[2]), own_coords(before, &over[0]), &|z, x| format!("D[{z}, {x}](phi)"))
            }
            _ => Vec::new(),
        },
        DeclKind::Chart { .. } | DeclKind::Fibred { .. } | DeclKind::Opaque { .. } => Vec::new(),
    }
}

fn body_values(kind: &DeclKind) -> Vec<String> {
    let show = |v: &[Expr]| v.iter().map(ToString::to_string).collect::<Vec<_>>();
    match kind {
        DeclKind::Change { formulas: v, .. }
        | DeclKind::System { eval: v, .. }
        | DeclKind::SecSystem { eval: v, .. }
        | DeclKind::Section { values: v, .. }
        | DeclKind::Gamma { values: v, .. } => show(v),
        DeclKind::Curve { body, .. } => match body {
            CurveBodyDecl::Symbolic(v) => show(v),
            CurveBodyDecl::Numeric(v) => v.clone(),
        },
        DeclKind::ConnSystem { coeffs: t, .. } | DeclKind::FConnection { recipes: t, .. } => {
            t.iter().flat_map(|row| show(row)).collect()
        }
        DeclKind::Chart { .. } | DeclKind::Fibred { .. } | DeclKind::Opaque { .. } => Vec::new(),
    }
}

fn header(d: &Decl) -> String {
    let name = &d.name;
    match &d.kind {
        DeclKind::Chart { coords } => format!("chart {name} ({})", list(coords)),
        DeclKind::Fibred { over, coords } => format!("fibred {name} over {over} ({})", list(coords)),
        DeclKind::Opaque { arity } => format!("opaque {name}/{arity}"),
        DeclKind::Change { on, .. } => format!("change {name} on {on}"),
        DeclKind::System { params, from, to, .. } => {
            format!("system {name} params ({}) from {from} to {to} eval", list(params))
        }
        DeclKind::Curve { system, lo, hi, body } => format!(
            "curve {}{name} in {system} interval ({}, {})",
            if matches!(body, CurveBodyDecl::Numeric(_)) { "numeric " } else { "" },
            bound(lo, "-inf"),
            bound(hi, "inf")
        ),
        DeclKind::SecSystem { over, params, bundle, .. } => {
            let flag = match bundle {
                BundleKind::General => "",
                BundleKind::Vector => "vector ",
                BundleKind::Affine => "affine ",
            };
            format!("secsystem {name} over ({}) params ({}) {flag}eval", list(over), list(params))
        }
        DeclKind::Section { system, .. } => format!("section {name} of {system}"),
        DeclKind::Gamma { system, .. } => format!("gamma {name} of {system}"),
        DeclKind::ConnSystem { over, params, .. } => {
            format!("connsystem {name} over ({}) params ({}) coeff", list(over), list(params))
        }
        DeclKind::FConnection { system, .. } => format!("fconnection {name} over {system}"),
    }
}

impl fmt::Display for ModelFile {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (k, d) in self.decls.iter().enumerate() {
            f.write_str(&header(d))?;
            if matches!(d.kind, DeclKind::Chart { .. } | DeclKind::Fibred { .. } | DeclKind::Opaque { .. }) {
                f.write_str("\n")?;
                continue;
            }
            f.write_str(" {\n")?;
            for (l, v) in body_labels(&self.decls, k).iter().zip(body_values(&d.kind)) {
                writeln!(f, "    {l} = {v}")?;
            }
            f.write_str("}\n")?;
        }
        Ok(())
    }
}
