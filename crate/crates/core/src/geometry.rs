//! Coordinate frames of manifolds, fibred manifolds and their tangent
//! bundles, together with block-triangular chart changes.

use std::collections::BTreeSet;

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::expr::{
    eval_numeric, random_realizations, Binding, Expr, Point, Realizations, Scope, Symbol,
};

/// Prefix of the dotted (tangent) twin of a coordinate.
pub const DOT_PREFIX: &str = "d_";

pub fn dotted(s: &Symbol) -> Symbol {
    Symbol::new(format!("{DOT_PREFIX}{s}"))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Role {
    /// `x^λ`
    Base,
    /// `y^i`
    Fibre,
    /// `w^A`
    Parameter,
    /// `z^a`
    SecondFibre,
}

impl Role {
    /// Old-coordinate roles a new coordinate of this role may depend on.
    fn permitted(self) -> &'static [Role] {
        match self {
            Role::Base => &[Role::Base],
            Role::Fibre => &[Role::Base, Role::Fibre],
            Role::Parameter => &[Role::Base, Role::Parameter],
            Role::SecondFibre => &[Role::Base, Role::Fibre, Role::SecondFibre],
        }
    }
}

/// Ordered coordinate symbols with role tags.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Frame {
    coords: Vec<Symbol>,
    roles: Vec<Role>,
}

impl Frame {
    pub fn new<I, S>(coords: I) -> Result<Frame>
    where
        I: IntoIterator<Item = (S, Role)>,
        S: Into<Symbol>,
    {
        let (coords, roles): (Vec<Symbol>, Vec<Role>) =
            coords.into_iter().map(|(s, r)| (s.into(), r)).unzip();
        let mut seen = BTreeSet::new();
        for s in &coords {
            if !seen.insert(s.clone()) {
                return Err(Error::InvalidFrame(format!("coordinate `{s}` declared twice")));
            }
        }
        if !roles.contains(&Role::Base) {
            return Err(Error::InvalidFrame("at least one base coordinate required".into()));
        }
        let mut closed = BTreeSet::new();
        for w in roles.windows(2) {
            if w[0] != w[1] {
                closed.insert(w[0]);
                if closed.contains(&w[1]) {
                    return Err(Error::InvalidFrame(format!(
                        "{:?} coordinates are not contiguous",
                        w[1]
                    )));
                }
            }
        }
        Ok(Frame { coords, roles })
    }

    /// Plain manifold chart: every coordinate is a base coordinate.
    pub fn manifold<I, S>(names: I) -> Result<Frame>
    where
        I: IntoIterator<Item = S>,
        S: Into<Symbol>,
    {
        Frame::new(names.into_iter().map(|s| (s, Role::Base)))
    }

    /// Frame assembled from consecutive role blocks.
    pub fn from_blocks(blocks: &[(Role, &[Symbol])]) -> Result<Frame> {
        Frame::new(
            blocks
                .iter()
                .flat_map(|(r, syms)| syms.iter().map(move |s| (s.clone(), *r))),
        )
    }

    pub fn coords(&self) -> &[Symbol] {
        &self.coords
    }

    pub fn roles(&self) -> &[Role] {
        &self.roles
    }

    pub fn len(&self) -> usize {
        self.coords.len()
    }

    pub fn is_empty(&self) -> bool {
        self.coords.is_empty()
    }

    pub fn role_of(&self, s: &Symbol) -> Option<Role> {
        self.position(s).map(|k| self.roles[k])
    }

    pub fn position(&self, s: &Symbol) -> Option<usize> {
        self.coords.iter().position(|c| c == s)
    }

    pub fn block(&self, role: Role) -> Vec<Symbol> {
        self.coords
            .iter()
            .zip(&self.roles)
            .filter(|(_, r)| **r == role)
            .map(|(s, _)| s.clone())
            .collect()
    }

    pub fn dim(&self, role: Role) -> usize {
        self.roles.iter().filter(|r| **r == role).count()
    }

    pub fn scope(&self) -> Scope {
        Scope::with_coords(self.coords.iter().map(Symbol::as_str))
    }
}

/// Frames of `G -> F -> B`: base `x`, fibre `y`, second fibre `z`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct DoubleFibredFrame {
    base: Vec<Symbol>,
    fibre: Vec<Symbol>,
    second: Vec<Symbol>,
}

impl DoubleFibredFrame {
    /// Check that `f` sits over `b` and `g` over `f`.
    pub fn new(b: &Frame, f: &Frame, g: &Frame) -> Result<Self> {
        let base = b.coords().to_vec();
        if f.block(Role::Base) != base {
            return Err(Error::InvalidFrame("F's base block differs from B".into()));
        }
        let fibre = f.block(Role::Fibre);
        if fibre.len() + base.len() != f.len() {
            return Err(Error::InvalidFrame("F may only carry base and fibre coordinates".into()));
        }
        if g.block(Role::Base) != base || g.block(Role::Fibre) != fibre {
            return Err(Error::InvalidFrame("G's base and fibre blocks differ from F".into()));
        }
        let second = g.block(Role::SecondFibre);
        if second.len() + f.len() != g.len() {
            return Err(Error::InvalidFrame("G may only add second-fibre coordinates".into()));
        }
        Ok(DoubleFibredFrame {
            base,
            fibre,
            second,
        })
    }

    pub fn from_blocks(base: Vec<Symbol>, fibre: Vec<Symbol>, second: Vec<Symbol>) -> Result<Self> {
        let frame = DoubleFibredFrame {
            base,
            fibre,
            second,
        };
        frame.frame_g()?;
        Ok(frame)
    }

    pub fn base(&self) -> &[Symbol] {
        &self.base
    }

    pub fn fibre(&self) -> &[Symbol] {
        &self.fibre
    }

    pub fn second(&self) -> &[Symbol] {
        &self.second
    }

    pub fn frame_b(&self) -> Result<Frame> {
        Frame::from_blocks(&[(Role::Base, &self.base)])
    }

    pub fn frame_f(&self) -> Result<Frame> {
        Frame::from_blocks(&[(Role::Base, &self.base), (Role::Fibre, &self.fibre)])
    }

    pub fn frame_g(&self) -> Result<Frame> {
        Frame::from_blocks(&[
            (Role::Base, &self.base),
            (Role::Fibre, &self.fibre),
            (Role::SecondFibre, &self.second),
        ])
    }
}

/// A frame together with the dotted twins of its coordinates.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TangentFrame {
    frame: Frame,
    dotted: Vec<Symbol>,
}

impl TangentFrame {
    pub fn frame(&self) -> &Frame {
        &self.frame
    }

    pub fn dotted(&self) -> &[Symbol] {
        &self.dotted
    }

    pub fn dot_of(&self, s: &Symbol) -> Option<&Symbol> {
        self.frame.position(s).map(|k| &self.dotted[k])
    }

    /// All coordinates: originals followed by dotted twins.
    pub fn all(&self) -> Vec<Symbol> {
        self.frame
            .coords()
            .iter()
            .chain(&self.dotted)
            .cloned()
            .collect()
    }

    pub fn scope(&self) -> Scope {
        Scope::with_coords(self.all().iter().map(Symbol::as_str))
    }
}

/// Add dotted twins `d_<name>`, preserving coordinate order.
pub fn induce_tangent(frame: &Frame) -> Result<TangentFrame> {
    let dotted: Vec<Symbol> = frame.coords().iter().map(dotted).collect();
    for d in &dotted {
        if frame.position(d).is_some() {
            return Err(Error::NameCollision(d.to_string()));
        }
    }
    Ok(TangentFrame {
        frame: frame.clone(),
        dotted,
    })
}

const INVERTIBILITY_POINTS: usize = 8;
const INVERTIBILITY_THRESHOLD: f64 = 1e-9;

/// New coordinates written as expressions in the old ones.
///
/// The change is block-triangular: `x̄(x)`, `ȳ(x,y)`, `w̄(x,w)`, `z̄(x,y,z)`,
/// checked syntactically on construction; each diagonal Jacobian block must be
/// invertible at eight seeded random points.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ChartChange {
    from: Frame,
    to: Frame,
    formulas: Vec<Expr>,
}

impl ChartChange {
    pub fn new(from: Frame, to: Frame, formulas: Vec<Expr>) -> Result<Self> {
        Self::with_seed(from, to, formulas, 0)
    }

    pub fn with_seed(from: Frame, to: Frame, formulas: Vec<Expr>, seed: u64) -> Result<Self> {
        let ch = ChartChange { from, to, formulas };
        ch.check_shape()?;
        ch.check_invertible(seed)?;
        Ok(ch)
    }

    pub fn identity(frame: &Frame) -> Self {
        ChartChange {
            from: frame.clone(),
            to: frame.clone(),
            formulas: frame.coords().iter().cloned().map(Expr::symbol).collect(),
        }
    }

    fn check_shape(&self) -> Result<()> {
        if self.formulas.len() != self.from.len() || self.to.len() != self.from.len() {
            return Err(Error::InvalidChart("dimension mismatch".into()));
        }
        if self.to.roles() != self.from.roles() {
            return Err(Error::InvalidChart("new coordinates must keep the role layout".into()));
        }
        for (k, f) in self.formulas.iter().enumerate() {
            let role = self.to.roles()[k];
            for s in f.symbols() {
                match self.from.role_of(&s) {
                    None => {
                        return Err(Error::InvalidChart(format!(
                            "`{}` uses `{s}`, which is not an old coordinate",
                            self.to.coords()[k]
                        )))
                    }
                    Some(r) if !role.permitted().contains(&r) => {
                        return Err(Error::InvalidChart(format!(
                            "`{}` ({role:?}) may not depend on `{s}` ({r:?})",
                            self.to.coords()[k]
                        )))
                    }
                    Some(_) => {}
                }
            }
        }
        Ok(())
    }

    fn check_invertible(&self, seed: u64) -> Result<()> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let real = random_realizations(&self.opaques(), &mut rng);
        let jac = self.jacobian();
        let roles: BTreeSet<Role> = self.from.roles().iter().copied().collect();
        for _ in 0..INVERTIBILITY_POINTS {
            let point: Point = self
                .from
                .coords()
                .iter()
                .map(|s| (s.clone(), rng.gen_range(-2.0..2.0)))
                .collect();
            for role in &roles {
                let idx: Vec<usize> = (0..self.from.len())
                    .filter(|&k| self.from.roles()[k] == *role)
                    .collect();
                let n = idx.len();
                let mut m = DMatrix::<f64>::zeros(n, n);
                for (a, &i) in idx.iter().enumerate() {
                    for (b, &j) in idx.iter().enumerate() {
                        m[(a, b)] = eval_numeric(&jac[i][j], &point, &real)?;
                    }
                }
                let det = m.determinant();
                if !(det.abs() > INVERTIBILITY_THRESHOLD) {
                    return Err(Error::InvalidChart(format!(
                        "{role:?} Jacobian block is singular (det {det:e})"
                    )));
                }
            }
        }
        Ok(())
    }

    pub fn from_frame(&self) -> &Frame {
        &self.from
    }

    pub fn to_frame(&self) -> &Frame {
        &self.to
    }

    pub fn formulas(&self) -> &[Expr] {
        &self.formulas
    }

    /// Formula for the new coordinate at position `k`.
    pub fn formula(&self, k: usize) -> &Expr {
        &self.formulas[k]
    }

    /// Formula for the new coordinate named `s`.
    pub fn formula_for(&self, s: &Symbol) -> Option<&Expr> {
        self.to.position(s).map(|k| &self.formulas[k])
    }

    pub fn opaques(&self) -> std::collections::BTreeMap<Symbol, usize> {
        let mut out = std::collections::BTreeMap::new();
        for f in &self.formulas {
            out.extend(f.opaques());
        }
        out
    }

    /// `J[i][j] = ∂ new_i / ∂ old_j`.
    pub fn jacobian(&self) -> Vec<Vec<Expr>> {
        self.formulas
            .iter()
            .map(|f| self.from.coords().iter().map(|s| f.partial(s)).collect())
            .collect()
    }

    /// Binding old coordinate symbols to the formulas, for pulling
    /// expressions written in new coordinates back to old ones.
    pub fn pullback_binding(&self) -> Binding {
        Binding::from_pairs(self.to.coords().iter().cloned().zip(self.formulas.iter().cloned()))
            .expect("frame coordinates are unique")
    }

    /// `next ∘ self`.
    pub fn then(&self, next: &ChartChange) -> Result<ChartChange> {
        if next.from != self.to {
            return Err(Error::InvalidChart("composed charts do not match".into()));
        }
        let b = Binding::from_pairs(
            next.from
                .coords()
                .iter()
                .cloned()
                .zip(self.formulas.iter().cloned()),
        )
        .expect("frame coordinates are unique");
        Ok(ChartChange {
            from: self.from.clone(),
            to: next.to.clone(),
            formulas: next.formulas.iter().map(|f| f.substitute(&b)).collect(),
        })
    }

    /// Evaluate the new coordinates at an old-coordinate point.
    pub fn apply(&self, old: &[f64], real: &Realizations) -> Result<Vec<f64>> {
        let point = self.point(old)?;
        self.formulas
            .iter()
            .map(|f| eval_numeric(f, &point, real).map_err(Error::from))
            .collect()
    }

    fn point(&self, old: &[f64]) -> Result<Point> {
        if old.len() != self.from.len() {
            return Err(Error::Mismatch(format!(
                "expected {} coordinates, got {}",
                self.from.len(),
                old.len()
            )));
        }
        Ok(self.from.coords().iter().cloned().zip(old.iter().copied()).collect())
    }

    /// Solve `apply(old) = new` by Newton iteration from `guess`.
    pub fn invert_numeric(&self, new: &[f64], guess: &[f64], real: &Realizations) -> Result<Vec<f64>> {
        let jac = self.jacobian();
        let n = self.from.len();
        let mut x = DVector::from_column_slice(guess);
        let target = DVector::from_column_slice(new);
        for _ in 0..100 {
            let fx = DVector::from_vec(self.apply(x.as_slice(), real)?) - &target;
            if fx.amax() < 1e-13 {
                return Ok(x.as_slice().to_vec());
            }
            let point = self.point(x.as_slice())?;
            let mut m = DMatrix::<f64>::zeros(n, n);
            for i in 0..n {
                for j in 0..n {
                    m[(i, j)] = eval_numeric(&jac[i][j], &point, real)?;
                }
            }
            let step = m
                .lu()
                .solve(&fx)
                .ok_or_else(|| Error::Evaluation("singular Jacobian during inversion".into()))?;
            x -= step;
        }
        let fx = DVector::from_vec(self.apply(x.as_slice(), real)?) - &target;
        if fx.amax() < 1e-10 {
            Ok(x.as_slice().to_vec())
        } else {
            Err(Error::Evaluation("Newton inversion did not converge".into()))
        }
    }
}

/// A chart change on tangent frames: undotted formulas plus dotted ones.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TangentChartChange {
    from: TangentFrame,
    to: TangentFrame,
    formulas: Vec<Expr>,
    dotted: Vec<Expr>,
}

impl TangentChartChange {
    pub fn from_frame(&self) -> &TangentFrame {
        &self.from
    }

    pub fn to_frame(&self) -> &TangentFrame {
        &self.to
    }

    pub fn formulas(&self) -> &[Expr] {
        &self.formulas
    }

    pub fn dotted_formulas(&self) -> &[Expr] {
        &self.dotted
    }

    pub fn is_identity(&self) -> bool {
        self.from == self.to
            && self
                .from
                .all()
                .into_iter()
                .map(Expr::symbol)
                .eq(self.formulas.iter().chain(&self.dotted).cloned())
    }

    /// `next ∘ self`.
    pub fn then(&self, next: &TangentChartChange) -> Result<TangentChartChange> {
        if next.from != self.to {
            return Err(Error::InvalidChart("composed charts do not match".into()));
        }
        let b = Binding::from_pairs(
            next.from
                .all()
                .into_iter()
                .zip(self.formulas.iter().chain(&self.dotted).cloned()),
        )
        .expect("frame coordinates are unique");
        Ok(TangentChartChange {
            from: self.from.clone(),
            to: next.to.clone(),
            formulas: next.formulas.iter().map(|f| f.substitute(&b)).collect(),
            dotted: next.dotted.iter().map(|f| f.substitute(&b)).collect(),
        })
    }
}

/// Tangent prolongation: each dotted new coordinate is the total
/// differential of the corresponding undotted formula.
pub fn prolong_chart_change(ch: &ChartChange) -> Result<TangentChartChange> {
    let from = induce_tangent(&ch.from)?;
    let to = induce_tangent(&ch.to)?;
    let dots: Vec<Expr> = from.dotted().iter().cloned().map(Expr::symbol).collect();
    let dotted = ch
        .formulas
        .iter()
        .map(|f| f.total_differential(ch.from.coords(), &dots))
        .collect();
    Ok(TangentChartChange {
        from,
        to,
        formulas: ch.formulas.clone(),
        dotted,
    })
}
