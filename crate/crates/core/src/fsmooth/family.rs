//! Curve families presenting Frölicher structures, and membership.

use std::collections::BTreeSet;
use std::fmt;
use std::sync::Arc;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::expr::{eval_numeric, Point, Realizations, Symbol};
use crate::map_systems::MapSystem;

use super::{smoothness_probe, Curve, CurveBody};

const SUBSPACE_SAMPLES: usize = 16;
const PROBE_ORDER: usize = 3;

type PredicateFn = dyn Fn(&[f64]) -> bool + Send + Sync;

/// A membership test on points of a space.
#[derive(Clone)]
pub struct Predicate {
    name: String,
    f: Arc<PredicateFn>,
}

impl Predicate {
    pub fn new<F>(name: impl Into<String>, f: F) -> Self
    where
        F: Fn(&[f64]) -> bool + Send + Sync + 'static,
    {
        Predicate {
            name: name.into(),
            f: Arc::new(f),
        }
    }

    pub fn everything() -> Self {
        Predicate::new("everything", |_| true)
    }

    /// Points whose coordinates are all at least `1e-12` away from every
    /// fraction with denominator up to 1000.
    pub fn irrational() -> Self {
        Predicate::new("irrational", |p| {
            p.iter().all(|x| {
                (1..=1000).all(|q| {
                    let qf = f64::from(q);
                    (x * qf - (x * qf).round()).abs() > 1e-12 * qf
                })
            })
        })
    }

    /// The coordinate hyperplane `{p[k] = 0}`.
    pub fn coordinate_zero(k: usize) -> Self {
        Predicate::new(format!("p[{k}] = 0"), move |p| p[k].abs() <= 1e-12)
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn holds(&self, p: &[f64]) -> bool {
        (self.f)(p)
    }
}

impl fmt::Debug for Predicate {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Predicate({})", self.name)
    }
}

#[derive(Clone, Debug)]
pub enum FamilyKind {
    /// Constant curves only.
    Constants,
    /// All smooth curves of the chart.
    Smooth,
    /// Smooth curves that are constant in the listed components.
    Frozen(Vec<usize>),
    /// Curves `c` in the parameter space with `λ ↦ ε(c(λ), m)` smooth for
    /// every witness `m`.
    System {
        sys: MapSystem,
        witnesses: Vec<Vec<f64>>,
        real: Realizations,
    },
    /// Generators closed under smooth reparametrisation, plus constants.
    Generated(Vec<Curve>),
    Product(Box<CurveFamily>, Box<CurveFamily>),
    Subspace(Box<CurveFamily>, Predicate),
}

#[derive(Clone, Debug)]
pub struct CurveFamily {
    coords: Vec<Symbol>,
    kind: FamilyKind,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct MemberVerdict {
    pub member: bool,
    /// `exact` when decided symbolically, `probe` when sampled.
    pub method: &'static str,
    pub detail: String,
}

impl MemberVerdict {
    fn exact(member: bool, detail: impl Into<String>) -> Self {
        MemberVerdict {
            member,
            method: "exact",
            detail: detail.into(),
        }
    }

    fn probe(member: bool, detail: impl Into<String>) -> Self {
        MemberVerdict {
            member,
            method: "probe",
            detail: detail.into(),
        }
    }
}

impl CurveFamily {
    pub fn new(coords: Vec<Symbol>, kind: FamilyKind) -> Result<Self> {
        match &kind {
            FamilyKind::Frozen(idx) if idx.iter().any(|&k| k >= coords.len()) => {
                return Err(Error::Mismatch("frozen component out of range".into()))
            }
            FamilyKind::System { sys, witnesses, .. } => {
                if sys.params() != coords.as_slice() {
                    return Err(Error::Mismatch("system family lives on the parameter space".into()));
                }
                if witnesses.is_empty() || witnesses.iter().any(|w| w.len() != sys.source().len()) {
                    return Err(Error::Mismatch("witnesses must be source points".into()));
                }
            }
            FamilyKind::Generated(gens) if gens.iter().any(|g| g.codomain() != coords.as_slice()) => {
                return Err(Error::Mismatch("generator codomain differs from the space".into()))
            }
            _ => {}
        }
        Ok(CurveFamily { coords, kind })
    }

    pub fn coords(&self) -> &[Symbol] {
        &self.coords
    }

    pub fn kind(&self) -> &FamilyKind {
        &self.kind
    }
}

/// Cartesian product; coordinates of the factors must be distinct.
pub fn product(f1: &CurveFamily, f2: &CurveFamily) -> Result<CurveFamily> {
    let coords: Vec<Symbol> = f1.coords.iter().chain(&f2.coords).cloned().collect();
    let unique: BTreeSet<&Symbol> = coords.iter().collect();
    if unique.len() != coords.len() {
        return Err(Error::NameCollision("factor coordinates overlap".into()));
    }
    Ok(CurveFamily {
        coords,
        kind: FamilyKind::Product(Box::new(f1.clone()), Box::new(f2.clone())),
    })
}

/// Curves of `family` whose values satisfy `predicate`.
pub fn subspace(family: &CurveFamily, predicate: Predicate) -> CurveFamily {
    CurveFamily {
        coords: family.coords.clone(),
        kind: FamilyKind::Subspace(Box::new(family.clone()), predicate),
    }
}

fn probe_points_or_default(candidate: &Curve, probe_points: &[f64]) -> Vec<f64> {
    if probe_points.is_empty() {
        candidate.interval().sample_points(3)
    } else {
        probe_points.to_vec()
    }
}

fn probe_all<F>(f: F, points: &[f64], what: &str) -> Result<MemberVerdict>
where
    F: Fn(f64) -> Result<Vec<f64>>,
{
    for &t in points {
        let v = smoothness_probe(&f, t, PROBE_ORDER)?;
        if let Some(k) = v.failed_order {
            return Ok(MemberVerdict::probe(false, format!("{what} fails order {k} at {t}")));
        }
    }
    Ok(MemberVerdict::probe(true, format!("{what} passes at {} point(s)", points.len())))
}

/// Decide whether `candidate` belongs to `family`. Symbolic curve bodies are
/// smooth by construction; numeric ones are probed at `probe_points`
/// (three interior points when empty).
pub fn member(family: &CurveFamily, candidate: &Curve, probe_points: &[f64]) -> Result<MemberVerdict> {
    if candidate.codomain() != family.coords.as_slice() {
        return Err(Error::Mismatch(format!(
            "curve lives in ({}) but the family in ({})",
            join(candidate.codomain()),
            join(&family.coords)
        )));
    }
    let real = Realizations::new();
    let points = probe_points_or_default(candidate, probe_points);
    match &family.kind {
        FamilyKind::Constants => {
            let c = candidate.is_constant(&real)?;
            Ok(if candidate.is_symbolic() {
                MemberVerdict::exact(c, "constancy")
            } else {
                MemberVerdict::probe(c, "sampled constancy")
            })
        }
        FamilyKind::Smooth => match candidate.body() {
            CurveBody::Symbolic(_) => Ok(MemberVerdict::exact(true, "symbolic body")),
            CurveBody::Numeric(_) => probe_all(|t| candidate.value(t, &real), &points, "curve"),
        },
        FamilyKind::Frozen(idx) => {
            let frozen = candidate.project(idx)?;
            if !frozen.is_constant(&real)? {
                return Ok(MemberVerdict::exact(false, "frozen components vary"));
            }
            let free = CurveFamily {
                coords: family.coords.clone(),
                kind: FamilyKind::Smooth,
            };
            member(&free, candidate, probe_points)
        }
        FamilyKind::System { sys, witnesses, real } => match candidate.body() {
            CurveBody::Symbolic(_) => Ok(MemberVerdict::exact(true, "symbolic pullback")),
            CurveBody::Numeric(_) => {
                for m in witnesses {
                    let f = |t: f64| -> Result<Vec<f64>> {
                        let w = candidate.value(t, real)?;
                        let point: Point = sys
                            .params()
                            .iter()
                            .cloned()
                            .zip(w)
                            .chain(sys.source().iter().cloned().zip(m.iter().copied()))
                            .collect();
                        sys.eval()
                            .values()
                            .iter()
                            .map(|e| eval_numeric(e, &point, real).map_err(Error::from))
                            .collect()
                    };
                    let v = probe_all(f, &points, &format!("pullback at witness {m:?}"))?;
                    if !v.member {
                        return Ok(v);
                    }
                }
                Ok(MemberVerdict::probe(true, format!("{} witness(es) pass", witnesses.len())))
            }
        },
        FamilyKind::Generated(gens) => {
            if candidate.is_constant(&real)? {
                return Ok(MemberVerdict::exact(true, "constant curve"));
            }
            let mut c = candidate;
            loop {
                if gens.iter().any(|g| g == c) {
                    return Ok(MemberVerdict::exact(true, "generator up to reparametrisation"));
                }
                match c.origin() {
                    Some((parent, _)) => c = parent,
                    None => return Ok(MemberVerdict::exact(false, "not obtained from a generator")),
                }
            }
        }
        FamilyKind::Product(a, b) => {
            let n = a.coords.len();
            let first: Vec<usize> = (0..n).collect();
            let second: Vec<usize> = (n..family.coords.len()).collect();
            let va = member(a, &candidate.project(&first)?, probe_points)?;
            if !va.member {
                return Ok(MemberVerdict { detail: format!("first factor: {}", va.detail), ..va });
            }
            let vb = member(b, &candidate.project(&second)?, probe_points)?;
            let method = if va.method == "probe" { "probe" } else { vb.method };
            Ok(MemberVerdict {
                member: vb.member,
                method,
                detail: format!("second factor: {}", vb.detail),
            })
        }
        FamilyKind::Subspace(base, predicate) => {
            let v = member(base, candidate, probe_points)?;
            if !v.member {
                return Ok(v);
            }
            for t in candidate.interval().sample_points(SUBSPACE_SAMPLES) {
                if !predicate.holds(&candidate.value(t, &real)?) {
                    return Ok(MemberVerdict::probe(
                        false,
                        format!("leaves `{}` at lam = {t}", predicate.name()),
                    ));
                }
            }
            Ok(MemberVerdict::probe(true, format!("stays in `{}`", predicate.name())))
        }
    }
}

fn join(s: &[Symbol]) -> String {
    s.iter().map(Symbol::as_str).collect::<Vec<_>>().join(", ")
}
