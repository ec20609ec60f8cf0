//! Systems of sections of a double fibred manifold `G → F → B` and their
//! tangent representations `(u, Ξ_u)`.

use std::collections::BTreeSet;
use std::fmt;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::expr::{Binding, Expr, Symbol};
use crate::fsmooth::{lambda, Curve, CurveBody};
use crate::geometry::{dotted, ChartChange, DoubleFibredFrame};
use crate::linear::{affine_split, solve_coefficients, Solution};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum BundleKind {
    General,
    /// Evaluation map linear in the parameters.
    Vector,
    /// Evaluation map affine in the parameters.
    Affine,
}

/// Parameters `w^A` over the base and `ε^a(x, w, y)`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SectionSystem {
    frame: DoubleFibredFrame,
    params: Vec<Symbol>,
    eval: Vec<Expr>,
    bundle: BundleKind,
}

/// `σ : B → S` as `w^A = σ^A(x)`.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct ParameterSection {
    values: Vec<Expr>,
}

impl ParameterSection {
    /// Components may only involve the `base` symbols.
    pub fn new(base: &[Symbol], values: Vec<Expr>) -> Result<Self> {
        let base: BTreeSet<&Symbol> = base.iter().collect();
        for v in &values {
            if let Some(s) = v.symbols().iter().find(|s| !base.contains(s)) {
                return Err(Error::Mismatch(format!("section uses `{s}`, not a base coordinate")));
            }
        }
        Ok(ParameterSection { values })
    }

    pub fn values(&self) -> &[Expr] {
        &self.values
    }
}

impl SectionSystem {
    pub fn new(frame: DoubleFibredFrame, params: Vec<Symbol>, eval: Vec<Expr>, bundle: BundleKind) -> Result<Self> {
        if eval.len() != frame.second().len() {
            return Err(Error::Mismatch(format!(
                "{} components for {} second-fibre coordinates",
                eval.len(),
                frame.second().len()
            )));
        }
        let mut names: BTreeSet<&Symbol> = BTreeSet::new();
        for s in frame.base().iter().chain(frame.fibre()).chain(frame.second()).chain(&params) {
            if !names.insert(s) {
                return Err(Error::NameCollision(s.to_string()));
            }
        }
        let allowed: BTreeSet<&Symbol> = frame.base().iter().chain(frame.fibre()).chain(&params).collect();
        for e in &eval {
            if let Some(s) = e.symbols().iter().find(|s| !allowed.contains(s)) {
                return Err(Error::Mismatch(format!("evaluation map uses `{s}`")));
            }
        }
        let sys = SectionSystem {
            frame,
            params,
            eval,
            bundle,
        };
        sys.check_bundle()?;
        Ok(sys)
    }

    fn check_bundle(&self) -> Result<()> {
        if self.bundle == BundleKind::General {
            return Ok(());
        }
        let Some((offset, _)) = affine_split(&self.eval, &self.params)? else {
            return Err(Error::Bundle("evaluation map is not affine in the parameters".into()));
        };
        if self.bundle == BundleKind::Vector && offset.iter().any(|e| !e.is_zero()) {
            return Err(Error::Bundle("evaluation map is not linear in the parameters".into()));
        }
        Ok(())
    }

    pub fn frame(&self) -> &DoubleFibredFrame {
        &self.frame
    }

    pub fn base(&self) -> &[Symbol] {
        self.frame.base()
    }

    pub fn fibre(&self) -> &[Symbol] {
        self.frame.fibre()
    }

    pub fn target(&self) -> &[Symbol] {
        self.frame.second()
    }

    pub fn params(&self) -> &[Symbol] {
        &self.params
    }

    pub fn eval(&self) -> &[Expr] {
        &self.eval
    }

    pub fn bundle(&self) -> BundleKind {
        self.bundle
    }

    /// A parameter section; its components may only involve the base.
    pub fn section(&self, values: Vec<Expr>) -> Result<ParameterSection> {
        if values.len() != self.params.len() {
            return Err(Error::Mismatch(format!(
                "{} components for {} parameters",
                values.len(),
                self.params.len()
            )));
        }
        ParameterSection::new(self.base(), values)
    }

    /// `ε(x0, w0, y)`.
    pub fn at(&self, base: &[Expr], params: &[Expr]) -> Result<Vec<Expr>> {
        let b = self.binding(base, params)?;
        Ok(self.eval.iter().map(|e| e.substitute(&b)).collect())
    }

    fn binding(&self, base: &[Expr], params: &[Expr]) -> Result<Binding> {
        if base.len() != self.base().len() || params.len() != self.params.len() {
            return Err(Error::Mismatch("point has the wrong number of components".into()));
        }
        Ok(Binding::from_pairs(
            self.base()
                .iter()
                .cloned()
                .zip(base.iter().cloned())
                .chain(self.params.iter().cloned().zip(params.iter().cloned())),
        )
        .expect("names are unique"))
    }

    fn base_symbols(&self) -> Vec<Expr> {
        self.base().iter().cloned().map(Expr::symbol).collect()
    }
}

/// `σ̄ = ε(σ(x), ·)` as expressions over `(x, y)`.
pub fn apply_section(sys: &SectionSystem, sigma: &ParameterSection) -> Result<Vec<Expr>> {
    sys.at(&sys.base_symbols(), &sigma.values)
}

/// `F↑ = S ×_B F` as a double fibred frame: base `x`, then parameters,
/// then the fibre of `F`.
pub fn lift_fibred(base: &[Symbol], params: &[Symbol], fibre: &[Symbol]) -> Result<DoubleFibredFrame> {
    DoubleFibredFrame::from_blocks(base.to_vec(), params.to_vec(), fibre.to_vec())
}

impl SectionSystem {
    pub fn lift(&self) -> Result<DoubleFibredFrame> {
        lift_fibred(self.base(), &self.params, self.fibre())
    }
}

/// A tangent vector at the section `s = (base, params)`: base vector `u`,
/// free part `Ξ_0`, and the forced block `∂_i (s*ε)^a` that multiplies `ẏ^i`.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct SectionTangentRep {
    pub base: Vec<Expr>,
    pub params: Vec<Expr>,
    pub u: Vec<Expr>,
    pub xi0: Vec<Expr>,
    pub forced: Vec<Vec<Expr>>,
}

impl SectionTangentRep {
    /// `Ξ^a = Ξ^a_0 + ∂_i(s*ε)^a ẏ^i`.
    pub fn xi(&self, fibre: &[Symbol]) -> Vec<Expr> {
        self.xi0
            .iter()
            .zip(&self.forced)
            .map(|(x0, row)| {
                row.iter()
                    .zip(fibre)
                    .fold(x0.clone(), |acc, (c, y)| &acc + &(c * &Expr::symbol(dotted(y))))
            })
            .collect()
    }

    pub fn is_vertical(&self) -> bool {
        self.u.iter().all(Expr::is_zero)
    }

    /// Whether the forced block equals the fibre derivatives of `s*ε`.
    pub fn forced_consistent(&self, sys: &SectionSystem) -> Result<bool> {
        Ok(self.forced == forced_block(sys, &self.base, &self.params)?)
    }
}

impl fmt::Display for SectionTangentRep {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let list = |v: &[Expr]| v.iter().map(ToString::to_string).collect::<Vec<_>>().join(", ");
        writeln!(f, "base = ({})", list(&self.base))?;
        writeln!(f, "params = ({})", list(&self.params))?;
        writeln!(f, "u = ({})", list(&self.u))?;
        writeln!(f, "xi0 = ({})", list(&self.xi0))?;
        for row in &self.forced {
            writeln!(f, "forced = ({})", list(row))?;
        }
        Ok(())
    }
}

fn forced_block(sys: &SectionSystem, base: &[Expr], params: &[Expr]) -> Result<Vec<Vec<Expr>>> {
    Ok(sys
        .at(base, params)?
        .iter()
        .map(|e| sys.fibre().iter().map(|y| e.partial(y)).collect())
        .collect())
}

/// Rep of the vector with base velocity `u` and parameter velocity `w_dot`
/// at `(base, params)`: `Ξ_0 = ∂_μ ε u^μ + ∂_A ε ẇ^A`.
pub fn tangent_rep_from_velocity(
    sys: &SectionSystem,
    base: &[Expr],
    params: &[Expr],
    u: &[Expr],
    w_dot: &[Expr],
) -> Result<SectionTangentRep> {
    if u.len() != sys.base().len() || w_dot.len() != sys.params.len() {
        return Err(Error::Mismatch("velocity has the wrong number of components".into()));
    }
    let b = sys.binding(base, params)?;
    let xi0 = sys
        .eval
        .iter()
        .map(|e| {
            let dx = e.total_differential(sys.base(), u);
            let dw = e.total_differential(&sys.params, w_dot);
            (&dx + &dw).substitute(&b)
        })
        .collect();
    Ok(SectionTangentRep {
        base: base.to_vec(),
        params: params.to_vec(),
        u: u.to_vec(),
        xi0,
        forced: forced_block(sys, base, params)?,
    })
}

/// Rep of the pointed curve `(ĉ, t0)` in `S`, given in the coordinates
/// `(x, w)`: `u = ċ(t0)` and `Ξ_0` the `λ`-derivative of `ε(ĉ(λ), y)`.
pub fn tangent_rep_section(sys: &SectionSystem, c: &Curve, t0: f64) -> Result<SectionTangentRep> {
    let expected: Vec<Symbol> = sys.base().iter().chain(&sys.params).cloned().collect();
    if c.codomain() != expected.as_slice() {
        return Err(Error::Mismatch("curve must be given in (base, parameter) coordinates".into()));
    }
    c.interval().check(t0)?;
    let n = sys.base().len();
    let CurveBody::Symbolic(body) = c.body() else {
        let real = crate::expr::Realizations::new();
        let to_exprs = |v: Vec<f64>| -> Result<Vec<Expr>> {
            v.into_iter()
                .map(|x| {
                    crate::expr::rational_from_f64(x)
                        .map(Expr::constant)
                        .ok_or_else(|| Error::Evaluation(format!("{x} is not finite")))
                })
                .collect()
        };
        let p = to_exprs(c.value(t0, &real)?)?;
        let v = to_exprs(c.velocity(t0, &real)?)?;
        return tangent_rep_from_velocity(sys, &p[..n], &p[n..], &v[..n], &v[n..]);
    };
    let t = crate::fsmooth::exact_lambda(t0)?;
    let at_t = Binding::new().with(lambda(), Expr::constant(t.clone()));
    let along = sys.at(&body[..n], &body[n..])?;
    let lam = lambda();
    let point = c.exact_point(&t).expect("symbolic");
    let vel = c.exact_velocity(&t).expect("symbolic");
    Ok(SectionTangentRep {
        xi0: along.iter().map(|e| e.partial(&lam).substitute(&at_t)).collect(),
        forced: forced_block(sys, &point[..n], &point[n..])?,
        base: point[..n].to_vec(),
        params: point[n..].to_vec(),
        u: vel[..n].to_vec(),
    })
}

/// The zero vector at `s`; its full `Ξ` is the forced block alone.
pub fn zero_rep(sys: &SectionSystem, base: &[Expr], params: &[Expr]) -> Result<SectionTangentRep> {
    Ok(SectionTangentRep {
        base: base.to_vec(),
        params: params.to_vec(),
        u: vec![Expr::zero(); sys.base().len()],
        xi0: vec![Expr::zero(); sys.target().len()],
        forced: forced_block(sys, base, params)?,
    })
}

pub fn rep_scale(r: &Expr, rep: &SectionTangentRep) -> SectionTangentRep {
    SectionTangentRep {
        u: rep.u.iter().map(|v| r * v).collect(),
        xi0: rep.xi0.iter().map(|v| r * v).collect(),
        ..rep.clone()
    }
}

pub fn rep_add(a: &SectionTangentRep, b: &SectionTangentRep) -> Result<SectionTangentRep> {
    if a.base != b.base || a.params != b.params {
        return Err(Error::Mismatch("tangent vectors at different sections".into()));
    }
    Ok(SectionTangentRep {
        u: a.u.iter().zip(&b.u).map(|(x, y)| x + y).collect(),
        xi0: a.xi0.iter().zip(&b.xi0).map(|(x, y)| x + y).collect(),
        ..a.clone()
    })
}

/// Vertical vector as a section `F_b → G_b`, and the parameters realizing it.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct VerticalSplit {
    /// `z^a = Ξ^a_0` over the fibre.
    pub section: Vec<Expr>,
    /// The section point `s` the vector sits at.
    pub point: Vec<Expr>,
    /// Parameters `v` with `Σ v^A ∂_A ε = Ξ_0`; for vector bundles these are
    /// the parameters `ŝ` selecting `Ξ̄`, for affine ones the associated
    /// vector. `None` when `Ξ_0` is not selected.
    pub params: Option<Vec<Expr>>,
}

fn parameter_columns(sys: &SectionSystem, base: &[Expr]) -> Result<Vec<Vec<Expr>>> {
    let b = Binding::from_pairs(sys.base().iter().cloned().zip(base.iter().cloned())).expect("unique");
    let at_base: Vec<Expr> = sys.eval.iter().map(|e| e.substitute(&b)).collect();
    let (_, cols) = affine_split(&at_base, &sys.params)?
        .ok_or_else(|| Error::Bundle("evaluation map is not affine in the parameters".into()))?;
    Ok(cols)
}

fn recover(sys: &SectionSystem, cols: &[Vec<Expr>], rhs: &[Expr]) -> Result<Option<Vec<Expr>>> {
    match solve_coefficients(cols, rhs, sys.fibre(), sys.params.len())? {
        Solution::Unique(v) => Ok(Some(v)),
        Solution::NotInImage => Ok(None),
        Solution::Singular => Err(Error::NotInjective("parameter directions are linearly dependent".into())),
    }
}

/// `E V S ≃ S ×_B S` for vector and affine bundles.
pub fn vertical_split(sys: &SectionSystem, rep: &SectionTangentRep) -> Result<VerticalSplit> {
    if sys.bundle == BundleKind::General {
        return Err(Error::Bundle("vertical splitting needs a vector or affine system".into()));
    }
    if !rep.is_vertical() {
        return Err(Error::NotVertical);
    }
    let cols = parameter_columns(sys, &rep.base)?;
    Ok(VerticalSplit {
        section: rep.xi0.clone(),
        point: rep.params.clone(),
        params: recover(sys, &cols, &rep.xi0)?,
    })
}

/// Inverse of [`vertical_split`]: the vertical rep at `point` with
/// parameter velocity `v`.
pub fn embed_vertical(sys: &SectionSystem, base: &[Expr], point: &[Expr], v: &[Expr]) -> Result<SectionTangentRep> {
    tangent_rep_from_velocity(sys, base, point, &vec![Expr::zero(); sys.base().len()], v)
}

/// `(ū, Ξ̄_0)` in the chart `ch` of `G`: `ū = J_x u` and
/// `Ξ̄^a_0 = ∂_b z̄^a Ξ^b_0 + ∂_μ z̄^a u^μ`, evaluated along `s*ε`.
pub fn transform_rep(sys: &SectionSystem, rep: &SectionTangentRep, ch: &ChartChange) -> Result<(Vec<Expr>, Vec<Expr>)> {
    let g = sys.frame.frame_g()?;
    if ch.from_frame() != &g {
        return Err(Error::InvalidChart("chart change is not on the frame of G".into()));
    }
    let zvals = sys.at(&rep.base, &rep.params)?;
    let b = Binding::from_pairs(
        sys.base()
            .iter()
            .cloned()
            .zip(rep.base.iter().cloned())
            .chain(sys.target().iter().cloned().zip(zvals)),
    )
    .expect("unique");
    let nx = sys.base().len();
    let ny = sys.fibre().len();
    let d = |f: &Expr, s: &Symbol| f.partial(s).substitute(&b);
    let u_bar = (0..nx)
        .map(|nu| {
            sys.base()
                .iter()
                .zip(&rep.u)
                .map(|(x, u)| &d(ch.formula(nu), x) * u)
                .sum()
        })
        .collect();
    let xi_bar = (0..sys.target().len())
        .map(|a| {
            let zbar = ch.formula(nx + ny + a);
            let vertical: Expr = sys.target().iter().zip(&rep.xi0).map(|(z, x)| &d(zbar, z) * x).sum();
            let horizontal: Expr = sys.base().iter().zip(&rep.u).map(|(x, u)| &d(zbar, x) * u).sum();
            &vertical + &horizontal
        })
        .collect();
    Ok((u_bar, xi_bar))
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct ChartInvariance {
    pub scale: bool,
    pub add: bool,
}

impl ChartInvariance {
    pub fn holds(&self) -> bool {
        self.scale && self.add
    }
}

/// Transform-then-operate against operate-then-transform for `rep_scale`
/// (by `r`) and `rep_add` (of `a` and `b`), exactly.
pub fn chart_invariance_check(
    sys: &SectionSystem,
    a: &SectionTangentRep,
    b: &SectionTangentRep,
    r: &Expr,
    ch: &ChartChange,
) -> Result<ChartInvariance> {
    let (ua, xa) = transform_rep(sys, a, ch)?;
    let (ub, xb) = transform_rep(sys, b, ch)?;
    let (us, xs) = transform_rep(sys, &rep_scale(r, a), ch)?;
    let (uc, xc) = transform_rep(sys, &rep_add(a, b)?, ch)?;
    let scaled = |v: &[Expr]| v.iter().map(|e| r * e).collect::<Vec<_>>();
    let summed = |p: &[Expr], q: &[Expr]| p.iter().zip(q).map(|(x, y)| x + y).collect::<Vec<_>>();
    Ok(ChartInvariance {
        scale: us == scaled(&ua) && xs == scaled(&xa),
        add: uc == summed(&ua, &ub) && xc == summed(&xa, &xb),
    })
}

/// `E T σ : u ↦ (u, Ξ_u)` for a symbolic base vector `u = (ẋ^μ)`.
pub fn tangent_prolong_section(sys: &SectionSystem, sigma: &ParameterSection) -> Result<SectionTangentRep> {
    let sigma_bar = apply_section(sys, sigma)?;
    let u: Vec<Expr> = sys.base().iter().map(|x| Expr::symbol(dotted(x))).collect();
    Ok(SectionTangentRep {
        xi0: sigma_bar.iter().map(|e| e.total_differential(sys.base(), &u)).collect(),
        forced: sigma_bar
            .iter()
            .map(|e| sys.fibre().iter().map(|y| e.partial(y)).collect())
            .collect(),
        base: sys.base_symbols(),
        params: sigma.values.clone(),
        u,
    })
}

/// A section operator `D` from sections of one system to sections of
/// another over the same `F`, written in terms of opaque functions
/// `phi_<z>(x.., y..)` standing for the input section.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SectionOperator {
    pub body: Vec<Expr>,
}

pub fn phi_name(z: &Symbol) -> Symbol {
    Symbol::new(format!("phi_{z}"))
}

fn section_defs(sys: &SectionSystem, sigma_bar: &[Expr]) -> Vec<(Symbol, Vec<Symbol>, Expr)> {
    let params: Vec<Symbol> = sys.base().iter().chain(sys.fibre()).cloned().collect();
    sys.target()
        .iter()
        .zip(sigma_bar)
        .map(|(z, s)| (phi_name(z), params.clone(), s.clone()))
        .collect()
}

/// Substitute a concrete section body for the `phi_<z>` functions.
pub(crate) fn instantiate(sys: &SectionSystem, template: &Expr, sigma_bar: &[Expr]) -> Expr {
    template.substitute_functions(&section_defs(sys, sigma_bar))
}

/// `D̂ : σ ↦ (D σ̄)^`, compatible on the instances it was built with.
#[derive(Clone, Debug)]
pub struct HatOperator {
    source: SectionSystem,
    target: SectionSystem,
    op: SectionOperator,
}

impl HatOperator {
    /// Parameters of `D(σ̄)`, or `None` when the image is not selected.
    pub fn try_apply(&self, sigma: &ParameterSection) -> Result<Option<ParameterSection>> {
        let sigma_bar = apply_section(&self.source, sigma)?;
        let image: Vec<Expr> = self.op.body.iter().map(|t| instantiate(&self.source, t, &sigma_bar)).collect();
        let zero: Vec<Expr> = vec![Expr::zero(); self.target.params.len()];
        let offset = self.target.at(&self.target.base_symbols(), &zero)?;
        let cols = parameter_columns(&self.target, &self.target.base_symbols())?;
        let rhs: Vec<Expr> = image.iter().zip(&offset).map(|(i, o)| i - o).collect();
        let Some(values) = recover(&self.target, &cols, &rhs)? else {
            return Ok(None);
        };
        let out = self.target.section(values)?;
        debug_assert_eq!(apply_section(&self.target, &out)?, image);
        Ok(Some(out))
    }

    pub fn apply(&self, sigma: &ParameterSection) -> Result<ParameterSection> {
        self.try_apply(sigma)?
            .ok_or_else(|| Error::Incompatible("image section is not selected by the target system".into()))
    }
}

/// Build `D̂`, checking on `instances` that `D` maps selected sections to
/// selected sections.
pub fn hat_operator(
    source: &SectionSystem,
    target: &SectionSystem,
    op: SectionOperator,
    instances: &[ParameterSection],
) -> Result<HatOperator> {
    if source.base() != target.base() || source.fibre() != target.fibre() {
        return Err(Error::Mismatch("systems must share the base and the fibre of F".into()));
    }
    if op.body.len() != target.target().len() {
        return Err(Error::Mismatch("operator must produce one component per target coordinate".into()));
    }
    if target.bundle == BundleKind::General {
        return Err(Error::Bundle("parameter recovery needs an affine target system".into()));
    }
    let hat = HatOperator {
        source: source.clone(),
        target: target.clone(),
        op,
    };
    for (k, sigma) in instances.iter().enumerate() {
        if hat.try_apply(sigma)?.is_none() {
            return Err(Error::Incompatible(format!("image of instance {k} is not selected")));
        }
    }
    Ok(hat)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expr::{parse_expr, rational, Scope};
    use crate::fsmooth::{Interval, LAMBDA};
    use crate::geometry::{Frame, Role};

    fn syms(n: &[&str]) -> Vec<Symbol> {
        n.iter().map(Symbol::new).collect()
    }

    fn scope() -> Scope {
        Scope::with_coords(["x", "y0", "y1", "z0", "w00", "w01", "w0", "d_x", "d_y0", "d_y1", LAMBDA])
            .opaque("K00", 1)
            .opaque("K01", 1)
            .opaque("K0", 1)
            .opaque("A", 1)
            .opaque("phi_z0", 3)
    }

    fn e(t: &str) -> Expr {
        parse_expr(t, &scope()).unwrap()
    }

    fn frame() -> DoubleFibredFrame {
        DoubleFibredFrame::from_blocks(syms(&["x"]), syms(&["y0", "y1"]), syms(&["z0"])).unwrap()
    }

    fn linear() -> SectionSystem {
        SectionSystem::new(frame(), syms(&["w00", "w01"]), vec![e("w00*y0 + w01*y1")], BundleKind::Vector).unwrap()
    }

    fn affine() -> SectionSystem {
        SectionSystem::new(
            frame(),
            syms(&["w00", "w01", "w0"]),
            vec![e("w00*y0 + w01*y1 + w0")],
            BundleKind::Affine,
        )
        .unwrap()
    }

    fn generic_sigma(sys: &SectionSystem) -> ParameterSection {
        let names = ["K00(x)", "K01(x)", "K0(x)"];
        sys.section(names[..sys.params().len()].iter().map(|t| e(t)).collect()).unwrap()
    }

    #[test]
    fn applying_sections() {
        let lin = linear();
        assert_eq!(apply_section(&lin, &generic_sigma(&lin)).unwrap(), vec![e("K00(x)*y0 + K01(x)*y1")]);
        let aff = affine();
        assert_eq!(apply_section(&aff, &generic_sigma(&aff)).unwrap(), vec![e("K00(x)*y0 + K01(x)*y1 + K0(x)")]);
        let constant = lin.section(vec![e("2"), e("3")]).unwrap();
        assert!(!apply_section(&lin, &constant).unwrap()[0].depends_on(&syms(&["x"])));
        assert!(lin.section(vec![e("y0"), e("1")]).is_err());
    }

    #[test]
    fn bundle_flags_are_validated() {
        let bad = SectionSystem::new(frame(), syms(&["w00", "w01"]), vec![e("w00*y0 + 1")], BundleKind::Vector);
        assert!(matches!(bad, Err(Error::Bundle(_))));
        let bad = SectionSystem::new(frame(), syms(&["w00", "w01"]), vec![e("w00^2*y0")], BundleKind::Affine);
        assert!(matches!(bad, Err(Error::Bundle(_))));
        assert!(SectionSystem::new(frame(), syms(&["w00", "w01"]), vec![e("w00^2*y0")], BundleKind::General).is_ok());
    }

    #[test]
    fn lifted_frame() {
        let lift = linear().lift().unwrap();
        let f = Frame::new([
            ("x", Role::Base),
            ("w00", Role::Fibre),
            ("w01", Role::Fibre),
            ("y0", Role::SecondFibre),
            ("y1", Role::SecondFibre),
        ])
        .unwrap();
        assert_eq!(lift.frame_g().unwrap(), f);
        let bare = lift_fibred(&syms(&["x"]), &[], &syms(&["y0"])).unwrap();
        assert_eq!(bare.frame_g().unwrap().coords(), &syms(&["x", "y0"])[..]);
    }

    fn curve(body: &[&str]) -> Curve {
        Curve::symbolic(
            syms(&["x", "w00", "w01"]),
            Interval::new(Some(rational(-1, 1)), Some(rational(1, 1))).unwrap(),
            body.iter().map(|b| e(b)).collect(),
        )
        .unwrap()
    }

    #[test]
    fn reps_from_curves() {
        let sys = linear();
        let rep = tangent_rep_section(&sys, &curve(&["1/2", "3*lam", "-lam"]), 0.0).unwrap();
        assert!(rep.is_vertical());
        assert_eq!(rep.xi0, vec![e("3*y0 - y1")]);
        assert!(rep.forced_consistent(&sys).unwrap());
        let still = tangent_rep_section(&sys, &curve(&["1/2", "1", "2"]), 0.25).unwrap();
        assert_eq!(still, zero_rep(&sys, &[e("1/2")], &[e("1"), e("2")]).unwrap());
        assert_eq!(still.xi(sys.fibre()), vec![e("d_y0 + 2*d_y1")]);
    }

    #[test]
    fn moving_base_uses_explicit_x_dependence() {
        let sys = SectionSystem::new(frame(), syms(&["w00", "w01"]), vec![e("x^2*w00*y0 + w01")], BundleKind::General).unwrap();
        let rep = tangent_rep_section(&sys, &curve(&["lam", "1", "0"]), 0.5).unwrap();
        assert_eq!(rep.u, vec![e("1")]);
        assert_eq!(rep.xi0, vec![e("y0")]);
        let via_velocity = tangent_rep_from_velocity(&sys, &rep.base, &rep.params, &[e("1")], &[e("0"), e("0")]).unwrap();
        assert_eq!(via_velocity, rep);
    }

    #[test]
    fn vector_operations() {
        let sys = linear();
        let a = tangent_rep_section(&sys, &curve(&["lam", "1 + 2*lam", "-lam"]), 0.0).unwrap();
        let b = tangent_rep_section(&sys, &curve(&["-lam", "1 + lam", "5*lam"]), 0.0).unwrap();
        assert_eq!(rep_scale(&Expr::one(), &a), a);
        let z = rep_scale(&Expr::zero(), &a);
        assert_eq!(z, zero_rep(&sys, &a.base, &a.params).unwrap());
        assert_eq!(z.xi(sys.fibre()), vec![e("d_y0")]);
        let s = rep_add(&a, &b).unwrap();
        assert_eq!(s.u, vec![Expr::zero()]);
        assert_eq!(s.xi0, vec![e("3*y0 + 4*y1")]);
        let far = tangent_rep_section(&sys, &curve(&["lam", "2", "0"]), 0.0).unwrap();
        assert!(rep_add(&a, &far).is_err());
    }

    #[test]
    fn vertical_splitting() {
        let sys = linear();
        let rep = tangent_rep_section(&sys, &curve(&["0", "1 + 3*lam", "-lam"]), 0.0).unwrap();
        let split = vertical_split(&sys, &rep).unwrap();
        assert_eq!(split.params, Some(vec![e("3"), e("-1")]));
        assert_eq!(embed_vertical(&sys, &rep.base, &split.point, &split.params.unwrap()).unwrap(), rep);
        let zero = zero_rep(&sys, &rep.base, &rep.params).unwrap();
        assert_eq!(vertical_split(&sys, &zero).unwrap().params, Some(vec![e("0"), e("0")]));
        let moving = tangent_rep_section(&sys, &curve(&["lam", "1", "0"]), 0.0).unwrap();
        assert_eq!(vertical_split(&sys, &moving), Err(Error::NotVertical));
        let general = SectionSystem::new(frame(), syms(&["w00", "w01"]), vec![e("w00*y0 + w01*y1")], BundleKind::General).unwrap();
        assert!(matches!(vertical_split(&general, &rep), Err(Error::Bundle(_))));
    }

    #[test]
    fn affine_vertical_vectors_split_into_point_and_vector() {
        let sys = affine();
        let c = Curve::symbolic(
            syms(&["x", "w00", "w01", "w0"]),
            Interval::real_line(),
            vec![e("0"), e("2"), e("lam"), e("7 - 4*lam")],
        )
        .unwrap();
        let rep = tangent_rep_section(&sys, &c, 0.0).unwrap();
        let split = vertical_split(&sys, &rep).unwrap();
        assert_eq!(split.point, vec![e("2"), e("0"), e("7")]);
        assert_eq!(split.params, Some(vec![e("0"), e("1"), e("-4")]));
    }

    fn g_frame() -> Frame {
        frame().frame_g().unwrap()
    }

    #[test]
    fn chart_invariance() {
        let sys = linear();
        let a = tangent_rep_section(&sys, &curve(&["lam", "1 + 2*lam", "-lam"]), 0.0).unwrap();
        let b = tangent_rep_section(&sys, &curve(&["3*lam", "1 + lam", "5*lam"]), 0.0).unwrap();
        let r = Expr::symbol("r");
        let id = ChartChange::identity(&g_frame());
        assert!(chart_invariance_check(&sys, &a, &b, &r, &id).unwrap().holds());
        let s = scope().opaque("X", 1).opaque("Y", 3).opaque("Z", 4);
        let generic = ChartChange::new(
            g_frame(),
            g_frame(),
            ["X(x)", "Y(x, y0, y1)", "y1 + x*y0", "A(x)*z0 + Z(x, y0, y1, z0)"]
                .iter()
                .map(|t| parse_expr(t, &s).unwrap())
                .collect(),
        )
        .unwrap();
        assert!(chart_invariance_check(&sys, &a, &b, &r, &generic).unwrap().holds());
        let (u_bar, xi_bar) = transform_rep(&sys, &a, &generic).unwrap();
        assert_eq!(u_bar, vec![parse_expr("D[1] X(0)", &s).unwrap()]);
        assert!(xi_bar[0].contains_opaque());
    }

    #[test]
    fn prolonged_sections() {
        let sys = linear();
        let sigma = generic_sigma(&sys);
        let p = tangent_prolong_section(&sys, &sigma).unwrap();
        assert_eq!(p.xi0, vec![e("D[1] K00(x)*d_x*y0 + D[1] K01(x)*d_x*y1")]);
        assert_eq!(p.params, sigma.values().to_vec());
        assert_eq!(p.u, vec![e("d_x")]);
        assert!(p.forced_consistent(&sys).unwrap());
        let w_dot: Vec<Expr> = sigma.values().iter().map(|s| &s.d("x") * &e("d_x")).collect();
        assert_eq!(tangent_rep_from_velocity(&sys, &[e("x")], sigma.values(), &[e("d_x")], &w_dot).unwrap(), p);
        let constant = sys.section(vec![e("1"), e("2")]).unwrap();
        let c = tangent_prolong_section(&sys, &constant).unwrap();
        assert!(c.xi0[0].is_zero());
    }

    #[test]
    fn hat_operators() {
        let sys = linear();
        let sigma = generic_sigma(&sys);
        let id = hat_operator(&sys, &sys, SectionOperator { body: vec![e("phi_z0(x, y0, y1)")] }, std::slice::from_ref(&sigma)).unwrap();
        assert_eq!(id.apply(&sigma).unwrap(), sigma);
        let dx = hat_operator(&sys, &sys, SectionOperator { body: vec![e("D[1] phi_z0(x, y0, y1)")] }, std::slice::from_ref(&sigma)).unwrap();
        assert_eq!(dx.apply(&sigma).unwrap().values(), &[e("D[1] K00(x)"), e("D[1] K01(x)")]);
        let mul = hat_operator(&sys, &sys, SectionOperator { body: vec![e("A(x)*phi_z0(x, y0, y1)")] }, std::slice::from_ref(&sigma)).unwrap();
        assert_eq!(mul.apply(&sigma).unwrap().values(), &[e("A(x)*K00(x)"), e("A(x)*K01(x)")]);
        let square = hat_operator(&sys, &sys, SectionOperator { body: vec![e("phi_z0(x, y0, y1)^2")] }, &[sigma]);
        assert!(matches!(square, Err(Error::Incompatible(_))));
    }
}
