//! Smooth systems of smooth maps `ε : S × M → N` and their tangent
//! prolongations.

use std::collections::BTreeSet;
use std::fmt;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::expr::{eval_numeric, Binding, Expr, Point, Realizations, Symbol};
use crate::geometry::dotted;

/// Target coordinates assigned to expressions over some source coordinates.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct EvaluationMap {
    targets: Vec<Symbol>,
    values: Vec<Expr>,
}

impl EvaluationMap {
    pub fn new(targets: Vec<Symbol>, values: Vec<Expr>) -> Result<Self> {
        if targets.len() != values.len() {
            return Err(Error::Mismatch(format!(
                "{} targets but {} expressions",
                targets.len(),
                values.len()
            )));
        }
        let unique: BTreeSet<&Symbol> = targets.iter().collect();
        if unique.len() != targets.len() {
            return Err(Error::Mismatch("target assigned twice".into()));
        }
        Ok(EvaluationMap { targets, values })
    }

    pub fn targets(&self) -> &[Symbol] {
        &self.targets
    }

    pub fn values(&self) -> &[Expr] {
        &self.values
    }

    pub fn get(&self, s: &Symbol) -> Option<&Expr> {
        self.targets.iter().position(|t| t == s).map(|k| &self.values[k])
    }

    pub fn substitute(&self, b: &Binding) -> EvaluationMap {
        EvaluationMap {
            targets: self.targets.clone(),
            values: self.values.iter().map(|v| v.substitute(b)).collect(),
        }
    }
}

impl fmt::Display for EvaluationMap {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (t, v) in self.targets.iter().zip(&self.values) {
            writeln!(f, "{t} = {v}")?;
        }
        Ok(())
    }
}

/// Parameters `w^A`, source `y^i`, target `z^a` and `ε^a(w, y)`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct MapSystem {
    params: Vec<Symbol>,
    source: Vec<Symbol>,
    eval: EvaluationMap,
}

impl MapSystem {
    pub fn new(params: Vec<Symbol>, source: Vec<Symbol>, target: Vec<Symbol>, eval: Vec<Expr>) -> Result<Self> {
        let eval = EvaluationMap::new(target, eval)?;
        let mut names = BTreeSet::new();
        for s in params.iter().chain(&source).chain(eval.targets()) {
            if !names.insert(s.clone()) {
                return Err(Error::NameCollision(s.to_string()));
            }
        }
        for s in params.iter().chain(&source).chain(eval.targets()) {
            let d = dotted(s);
            if names.contains(&d) {
                return Err(Error::NameCollision(d.to_string()));
            }
        }
        let allowed: BTreeSet<&Symbol> = params.iter().chain(&source).collect();
        for (t, v) in eval.targets().iter().zip(eval.values()) {
            if let Some(s) = v.symbols().iter().find(|s| !allowed.contains(s)) {
                return Err(Error::Mismatch(format!(
                    "`{t}` uses `{s}`, which is neither a parameter nor a source coordinate"
                )));
            }
        }
        Ok(MapSystem { params, source, eval })
    }

    pub fn params(&self) -> &[Symbol] {
        &self.params
    }

    pub fn source(&self) -> &[Symbol] {
        &self.source
    }

    pub fn target(&self) -> &[Symbol] {
        self.eval.targets()
    }

    pub fn eval(&self) -> &EvaluationMap {
        &self.eval
    }

    /// `ε_s` for a parameter point given as expressions.
    pub fn at(&self, w: &[Expr]) -> Result<Vec<Expr>> {
        let b = self.param_binding(w)?;
        Ok(self.eval.values().iter().map(|e| e.substitute(&b)).collect())
    }

    fn param_binding(&self, w: &[Expr]) -> Result<Binding> {
        if w.len() != self.params.len() {
            return Err(Error::Mismatch(format!(
                "expected {} parameter values, got {}",
                self.params.len(),
                w.len()
            )));
        }
        Ok(Binding::from_pairs(self.params.iter().cloned().zip(w.iter().cloned()))
            .expect("parameters are unique"))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum ProlongKind {
    Total,
    P1,
    P2,
}

impl ProlongKind {
    pub fn name(self) -> &'static str {
        match self {
            ProlongKind::Total => "total",
            ProlongKind::P1 => "p1",
            ProlongKind::P2 => "p2",
        }
    }
}

impl std::str::FromStr for ProlongKind {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "total" => Ok(ProlongKind::Total),
            "p1" => Ok(ProlongKind::P1),
            "p2" => Ok(ProlongKind::P2),
            other => Err(format!("unknown prolongation kind `{other}` (total, p1, p2)")),
        }
    }
}

/// Target and dotted-target coordinates as expressions over the sources
/// and their dotted twins.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ProlongedMap {
    pub kind: ProlongKind,
    pub values: EvaluationMap,
    pub dotted: EvaluationMap,
}

impl fmt::Display for ProlongedMap {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}{}", self.values, self.dotted)
    }
}

fn contraction(e: &Expr, vars: &[Symbol]) -> Expr {
    let dots: Vec<Expr> = vars.iter().map(|v| Expr::symbol(dotted(v))).collect();
    e.total_differential(vars, &dots)
}

fn prolong(sys: &MapSystem, kind: ProlongKind) -> ProlongedMap {
    let dotted_values = sys
        .eval
        .values()
        .iter()
        .map(|e| match kind {
            ProlongKind::Total => &contraction(e, &sys.params) + &contraction(e, &sys.source),
            ProlongKind::P1 => contraction(e, &sys.params),
            ProlongKind::P2 => contraction(e, &sys.source),
        })
        .collect();
    ProlongedMap {
        kind,
        values: sys.eval.clone(),
        dotted: EvaluationMap {
            targets: sys.target().iter().map(dotted).collect(),
            values: dotted_values,
        },
    }
}

/// `ż^a = ∂_A ε^a ẇ^A + ∂_i ε^a ẏ^i`.
pub fn total_tangent(sys: &MapSystem) -> ProlongedMap {
    prolong(sys, ProlongKind::Total)
}

/// `ż^a = ∂_A ε^a ẇ^A`.
pub fn partial_tangent_1(sys: &MapSystem) -> ProlongedMap {
    prolong(sys, ProlongKind::P1)
}

/// `ż^a = ∂_i ε^a ẏ^i`.
pub fn partial_tangent_2(sys: &MapSystem) -> ProlongedMap {
    prolong(sys, ProlongKind::P2)
}

pub fn prolong_kind(sys: &MapSystem, kind: ProlongKind) -> ProlongedMap {
    prolong(sys, kind)
}

/// `Tε = T₁ε + T₂ε` on the dotted block, by exact comparison.
pub fn check_decomposition(sys: &MapSystem) -> bool {
    let t = total_tangent(sys);
    let p1 = partial_tangent_1(sys);
    let p2 = partial_tangent_2(sys);
    t.dotted
        .values()
        .iter()
        .zip(p1.dotted.values().iter().zip(p2.dotted.values()))
        .all(|(t, (a, b))| *t == a + b)
}

#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(tag = "verdict", rename_all = "kebab-case")]
pub enum InjectivityOutcome {
    NoCollisionFound,
    Counterexample { s: Vec<f64>, s_prime: Vec<f64> },
}

/// Sample-relative injectivity verdict, recording the grids probed.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct InjectivityVerdict {
    pub grid: Vec<Vec<f64>>,
    pub witnesses: Vec<Vec<f64>>,
    pub outcome: InjectivityOutcome,
}

impl InjectivityVerdict {
    pub fn injective_on_samples(&self) -> bool {
        self.outcome == InjectivityOutcome::NoCollisionFound
    }
}

pub(crate) fn cartesian(lists: &[Vec<f64>]) -> Vec<Vec<f64>> {
    lists.iter().fold(vec![Vec::new()], |acc, list| {
        acc.iter()
            .flat_map(|prefix| {
                list.iter().map(move |v| {
                    let mut p = prefix.clone();
                    p.push(*v);
                    p
                })
            })
            .collect()
    })
}

const COLLISION_TOLERANCE: f64 = 1e-12;

fn norm2(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum()
}

/// Search the product grid for two distinct parameter points whose selected
/// maps agree at every witness point. Among collisions the pair of least
/// total squared norm is returned; within the pair the point of smaller
/// norm comes first, and equal norms put the larger point first.
pub fn injectivity_probe(
    sys: &MapSystem,
    grid: &[Vec<f64>],
    witnesses: &[Vec<f64>],
    real: &Realizations,
) -> Result<InjectivityVerdict> {
    if grid.len() != sys.params.len() || witnesses.len() != sys.source.len() {
        return Err(Error::Mismatch(
            "one sample list per parameter and per source coordinate expected".into(),
        ));
    }
    if grid.iter().chain(witnesses).any(Vec::is_empty) {
        return Err(Error::EmptyGrid);
    }
    let points = cartesian(grid);
    let wits = cartesian(witnesses);
    let mut images = Vec::with_capacity(points.len());
    for p in &points {
        let mut img = Vec::with_capacity(wits.len() * sys.target().len());
        for m in &wits {
            let point: Point = sys
                .params
                .iter()
                .cloned()
                .zip(p.iter().copied())
                .chain(sys.source.iter().cloned().zip(m.iter().copied()))
                .collect();
            for e in sys.eval.values() {
                img.push(eval_numeric(e, &point, real)?);
            }
        }
        images.push(img);
    }
    let mut best: Option<(f64, usize, usize)> = None;
    for i in 0..points.len() {
        for j in i + 1..points.len() {
            if points[i] == points[j] {
                continue;
            }
            let close = images[i]
                .iter()
                .zip(&images[j])
                .all(|(a, b)| (a - b).abs() <= COLLISION_TOLERANCE);
            if !close {
                continue;
            }
            let n = norm2(&points[i]) + norm2(&points[j]);
            if best.is_none_or(|(m, _, _)| n < m) {
                best = Some((n, i, j));
            }
        }
    }
    let outcome = match best {
        None => InjectivityOutcome::NoCollisionFound,
        Some((_, i, j)) => {
            let (a, b) = (&points[i], &points[j]);
            let a_first = match norm2(a).partial_cmp(&norm2(b)) {
                Some(std::cmp::Ordering::Less) => true,
                Some(std::cmp::Ordering::Greater) => false,
                _ => a > b,
            };
            let (s, s_prime) = if a_first { (a, b) } else { (b, a) };
            InjectivityOutcome::Counterexample {
                s: s.clone(),
                s_prime: s_prime.clone(),
            }
        }
    };
    Ok(InjectivityVerdict {
        grid: grid.to_vec(),
        witnesses: witnesses.to_vec(),
        outcome,
    })
}

/// Value and first-factor derivative of a selected map, as expressions over
/// the source coordinates: `(z^a, ż^a)`.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct TangentMapRep {
    pub values: Vec<Expr>,
    pub dotted: Vec<Expr>,
}

impl TangentMapRep {
    pub fn scale(&self, r: &Expr) -> TangentMapRep {
        TangentMapRep {
            values: self.values.clone(),
            dotted: self.dotted.iter().map(|d| r * d).collect(),
        }
    }

    pub fn add(&self, other: &TangentMapRep) -> Result<TangentMapRep> {
        if self.values != other.values {
            return Err(Error::Mismatch("tangent vectors at different points".into()));
        }
        Ok(TangentMapRep {
            values: self.values.clone(),
            dotted: self.dotted.iter().zip(&other.dotted).map(|(a, b)| a + b).collect(),
        })
    }
}

/// `ι(X) = (T₁ε)|_X` for `X = (w, ẇ)`.
pub fn iota(sys: &MapSystem, w: &[Expr], w_dot: &[Expr]) -> Result<TangentMapRep> {
    if w_dot.len() != sys.params.len() {
        return Err(Error::Mismatch(format!(
            "expected {} velocity components, got {}",
            sys.params.len(),
            w_dot.len()
        )));
    }
    let mut b = sys.param_binding(w)?;
    for (p, v) in sys.params.iter().zip(w_dot) {
        b.insert(dotted(p), v.clone());
    }
    let p1 = partial_tangent_1(sys);
    Ok(TangentMapRep {
        values: p1.values.values().iter().map(|e| e.substitute(&b)).collect(),
        dotted: p1.dotted.values().iter().map(|e| e.substitute(&b)).collect(),
    })
}
