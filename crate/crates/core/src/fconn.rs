//! F-smooth connections of a section system, given by their operator
//! coefficients `Ď^a_λ`, and covariant differentials.

use std::collections::BTreeSet;

use crate::error::{Error, Result};
use crate::expr::{Application, Atom, Expr, Symbol, View};
use crate::sections::{apply_section, instantiate, phi_name, BundleKind, ParameterSection, SectionSystem, SectionTangentRep};

/// Templates are expressions over the frame coordinates `(x, y)` in which the
/// section body appears as `phi_<z>(x.., y..)` and its partials.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct OperatorConnection {
    sys: SectionSystem,
    /// `Ď^a_λ`, indexed `[a][λ]`.
    recipes: Vec<Vec<Expr>>,
}

/// `(D φ)^a_λ`, indexed `[a][λ]`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct DifferentialOperator {
    sys: SectionSystem,
    body: Vec<Vec<Expr>>,
}

impl DifferentialOperator {
    pub fn new(sys: SectionSystem, body: Vec<Vec<Expr>>) -> Result<Self> {
        check_templates(&sys, &body)?;
        Ok(DifferentialOperator { sys, body })
    }

    pub fn system(&self) -> &SectionSystem {
        &self.sys
    }

    pub fn body(&self) -> &[Vec<Expr>] {
        &self.body
    }

    /// `(D σ̄)^a_λ`.
    pub fn apply(&self, sigma: &ParameterSection) -> Result<Vec<Vec<Expr>>> {
        let bar = apply_section(&self.sys, sigma)?;
        Ok(self
            .body
            .iter()
            .map(|row| row.iter().map(|t| instantiate(&self.sys, t, &bar)).collect())
            .collect())
    }
}

/// `phi_<z>` applications in `e`, nested ones included.
fn phi_applications(sys: &SectionSystem, e: &Expr, out: &mut Vec<Application>) {
    let phis: BTreeSet<Symbol> = sys.target().iter().map(phi_name).collect();
    collect(e, &phis, out);
}

fn collect(e: &Expr, phis: &BTreeSet<Symbol>, out: &mut Vec<Application>) {
    for (m, _) in e.terms() {
        for (atom, _) in m.factors() {
            if let Atom::Apply(app) = atom {
                if phis.contains(app.func()) {
                    out.push((**app).clone());
                }
                for a in app.args() {
                    collect(a, phis, out);
                }
            }
        }
    }
}

fn frame_args(sys: &SectionSystem) -> Vec<Expr> {
    sys.base().iter().chain(sys.fibre()).cloned().map(Expr::symbol).collect()
}

fn check_templates(sys: &SectionSystem, table: &[Vec<Expr>]) -> Result<()> {
    let (nz, nx) = (sys.target().len(), sys.base().len());
    if table.len() != nz || table.iter().any(|r| r.len() != nx) {
        return Err(Error::Mismatch(format!("recipe table must be {nz} x {nx}")));
    }
    let allowed: BTreeSet<&Symbol> = sys.base().iter().chain(sys.fibre()).collect();
    let args = frame_args(sys);
    for t in table.iter().flatten() {
        if let Some(s) = t.symbols().iter().find(|s| !allowed.contains(s)) {
            return Err(Error::Mismatch(format!("recipe uses `{s}`")));
        }
        let mut apps = Vec::new();
        phi_applications(sys, t, &mut apps);
        if let Some(app) = apps.iter().find(|a| a.args() != args.as_slice()) {
            return Err(Error::Mismatch(format!(
                "`{}` must be applied to the frame coordinates",
                app.func()
            )));
        }
    }
    Ok(())
}

/// Monomial of `e` with the most base derivatives of the section body.
fn horizontal_term(sys: &SectionSystem, e: &Expr) -> Option<(usize, Expr)> {
    let nx = sys.base().len();
    e.terms()
        .iter()
        .filter_map(|(m, c)| {
            let term = Expr::from(c.clone()) * m.factors().iter().fold(Expr::one(), |acc, (a, p)| &acc * &atom_expr(a).pow(*p));
            let mut apps = Vec::new();
            phi_applications(sys, &term, &mut apps);
            let order = apps
                .iter()
                .map(|a| a.partials().iter().filter(|&&k| k < nx).count())
                .max()
                .unwrap_or(0);
            (order > 0).then_some((order, term))
        })
        .max_by_key(|(order, _)| *order)
}

fn atom_expr(a: &Atom) -> Expr {
    match a {
        Atom::Symbol(s) => Expr::symbol(s.clone()),
        Atom::Apply(app) => app.with_args(app.args().to_vec()),
    }
}

impl OperatorConnection {
    /// Recipes may not contain base derivatives of the section body.
    pub fn new(sys: SectionSystem, recipes: Vec<Vec<Expr>>) -> Result<Self> {
        check_templates(&sys, &recipes)?;
        if let Some((_, t)) = recipes
            .iter()
            .flatten()
            .filter_map(|r| horizontal_term(&sys, r))
            .max_by_key(|(order, _)| *order)
        {
            return Err(Error::HorizontalOrder(t.to_string()));
        }
        Ok(OperatorConnection { sys, recipes })
    }

    pub fn system(&self) -> &SectionSystem {
        &self.sys
    }

    pub fn recipes(&self) -> &[Vec<Expr>] {
        &self.recipes
    }

    /// `Ď^a_λ(σ̄)`.
    pub fn apply(&self, sigma: &ParameterSection) -> Result<Vec<Vec<Expr>>> {
        let bar = apply_section(&self.sys, sigma)?;
        Ok(self
            .recipes
            .iter()
            .map(|row| row.iter().map(|t| instantiate(&self.sys, t, &bar)).collect())
            .collect())
    }

    /// `E K ∘ σ` along `u = ∂_λ`, as a rep at `σ(x)`.
    pub fn rep_along(&self, sigma: &ParameterSection, lambda: usize) -> Result<SectionTangentRep> {
        let applied = self.apply(sigma)?;
        let base: Vec<Expr> = self.sys.base().iter().cloned().map(Expr::symbol).collect();
        let zero = crate::sections::zero_rep(&self.sys, &base, sigma.values())?;
        Ok(SectionTangentRep {
            u: unit(self.sys.base().len(), lambda),
            xi0: applied.iter().map(|row| row[lambda].clone()).collect(),
            ..zero
        })
    }
}

fn unit(n: usize, k: usize) -> Vec<Expr> {
    (0..n).map(|j| if j == k { Expr::one() } else { Expr::zero() }).collect()
}

fn check_section(sys: &SectionSystem, sigma: &ParameterSection) -> Result<Vec<Expr>> {
    if sigma.values().len() != sys.params().len() {
        return Err(Error::Incompatible("section does not match the system parameters".into()));
    }
    apply_section(sys, sigma)
}

/// `(∇σ)^a_λ = ∂_λ σ̄^a − Ď^a_λ(σ̄)`.
pub fn covariant_differential(k: &OperatorConnection, sigma: &ParameterSection) -> Result<Vec<Vec<Expr>>> {
    let bar = check_section(&k.sys, sigma)?;
    let applied = k.apply(sigma)?;
    Ok(bar
        .iter()
        .zip(&applied)
        .map(|(s, row)| k.sys.base().iter().zip(row).map(|(x, d)| &s.partial(x) - d).collect())
        .collect())
}

/// `∂_λ phi_<z>` as a template.
fn d_phi(sys: &SectionSystem, a: usize, lambda: usize) -> Expr {
    Expr::apply_partial(phi_name(&sys.target()[a]), vec![lambda], frame_args(sys))
}

/// `D = ∂_λ φ − Ď`.
pub fn operator_from_connection(k: &OperatorConnection) -> DifferentialOperator {
    let body = k
        .recipes
        .iter()
        .enumerate()
        .map(|(a, row)| row.iter().enumerate().map(|(l, r)| &d_phi(&k.sys, a, l) - r).collect())
        .collect();
    DifferentialOperator {
        sys: k.sys.clone(),
        body,
    }
}

/// `Ď = ∂_λ φ − D`; fails when `D` is not of horizontal order 1.
pub fn connection_from_operator(d: &DifferentialOperator) -> Result<OperatorConnection> {
    let recipes = d
        .body
        .iter()
        .enumerate()
        .map(|(a, row)| row.iter().enumerate().map(|(l, t)| &d_phi(&d.sys, a, l) - t).collect())
        .collect();
    OperatorConnection::new(d.sys.clone(), recipes)
}

/// Whether `Ď(αφ + ψ) = α Ď(φ) + Ď(ψ)` as templates, with a formal scalar
/// `α` and a second formal section `ψ`.
pub fn is_linear(k: &OperatorConnection) -> Result<bool> {
    if k.sys.bundle() != BundleKind::Vector {
        return Err(Error::Bundle("linearity needs a vector bundle system".into()));
    }
    let alpha = Expr::symbol("_alpha");
    let params: Vec<Symbol> = k.sys.base().iter().chain(k.sys.fibre()).cloned().collect();
    let args = frame_args(&k.sys);
    let psi = |z: &Symbol| Symbol::new(format!("_psi_{z}"));
    let combined: Vec<(Symbol, Vec<Symbol>, Expr)> = k
        .sys
        .target()
        .iter()
        .map(|z| {
            let phi = Expr::apply(phi_name(z), args.clone());
            let body = &(&alpha * &phi) + &Expr::apply(psi(z), args.clone());
            (phi_name(z), params.clone(), body)
        })
        .collect();
    let to_psi: Vec<(Symbol, Vec<Symbol>, Expr)> = k
        .sys
        .target()
        .iter()
        .map(|z| (phi_name(z), params.clone(), Expr::apply(psi(z), args.clone())))
        .collect();
    Ok(k.recipes.iter().flatten().all(|r| {
        r.substitute_functions(&combined) == &(&alpha * r) + &r.substitute_functions(&to_psi)
    }))
}

/// Whether `e` is a bare `phi` application; used by printers.
pub fn is_phi(sys: &SectionSystem, e: &Expr) -> bool {
    match e.view() {
        View::Apply(app) | View::Partial(app) => sys.target().iter().any(|z| &phi_name(z) == app.func()),
        _ => false,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expr::{parse_expr, Scope};
    use crate::geometry::DoubleFibredFrame;
    use crate::sections::tangent_prolong_section;

    fn syms(n: &[&str]) -> Vec<Symbol> {
        n.iter().map(Symbol::new).collect()
    }

    fn scope() -> Scope {
        Scope::with_coords(["x0", "x1", "y0", "w00", "w10"])
            .opaque("phi_z0", 3)
            .opaque("G00", 2)
            .opaque("G01", 2)
            .opaque("K0", 2)
            .opaque("K1", 2)
    }

    fn e(t: &str) -> Expr {
        parse_expr(t, &scope()).unwrap()
    }

    fn sys(bundle: BundleKind) -> SectionSystem {
        let frame = DoubleFibredFrame::from_blocks(syms(&["x0", "x1"]), syms(&["y0"]), syms(&["z0"])).unwrap();
        SectionSystem::new(frame, syms(&["w00"]), vec![e("w00*y0")], bundle).unwrap()
    }

    fn gamma() -> OperatorConnection {
        OperatorConnection::new(
            sys(BundleKind::Vector),
            vec![vec![e("G00(x0, x1)*phi_z0(x0, x1, y0)"), e("G01(x0, x1)*phi_z0(x0, x1, y0)")]],
        )
        .unwrap()
    }

    fn sigma() -> ParameterSection {
        sys(BundleKind::Vector).section(vec![e("K0(x0, x1)")]).unwrap()
    }

    #[test]
    fn trivial_connection() {
        let k = OperatorConnection::new(sys(BundleKind::Vector), vec![vec![Expr::zero(), Expr::zero()]]).unwrap();
        let n = covariant_differential(&k, &sigma()).unwrap();
        assert_eq!(n, vec![vec![e("D[1] K0(x0, x1)*y0"), e("D[2] K0(x0, x1)*y0")]]);
        assert!(is_linear(&k).unwrap());
    }

    #[test]
    fn gamma_connection() {
        let n = covariant_differential(&gamma(), &sigma()).unwrap();
        assert_eq!(n[0][1], e("(D[2] K0(x0, x1) - G01(x0, x1)*K0(x0, x1))*y0"));
        assert!(is_linear(&gamma()).unwrap());
    }

    #[test]
    fn nabla_is_prolongation_minus_connection() {
        let k = gamma();
        let s = sigma();
        let n = covariant_differential(&k, &s).unwrap();
        let et = tangent_prolong_section(k.system(), &s).unwrap();
        for l in 0..2 {
            let at = crate::expr::Binding::from_pairs([
                (Symbol::new("d_x0"), Expr::from(i64::from(l == 0))),
                (Symbol::new("d_x1"), Expr::from(i64::from(l == 1))),
            ])
            .unwrap();
            let kr = k.rep_along(&s, l).unwrap();
            assert_eq!(kr.u, unit(2, l));
            assert_eq!(&et.xi0[0].substitute(&at) - &kr.xi0[0], n[0][l]);
        }
    }

    #[test]
    fn depends_only_on_the_section_body() {
        let frame = DoubleFibredFrame::from_blocks(syms(&["x0", "x1"]), syms(&["y0"]), syms(&["z0"])).unwrap();
        let redundant = SectionSystem::new(frame, syms(&["w00", "w10"]), vec![e("(w00 + w10)*y0")], BundleKind::Vector).unwrap();
        let k = OperatorConnection::new(redundant.clone(), vec![vec![e("phi_z0(x0, x1, y0)^2"), Expr::zero()]]).unwrap();
        let a = redundant.section(vec![e("K0(x0, x1)"), e("K1(x0, x1)")]).unwrap();
        let b = redundant.section(vec![e("K0(x0, x1) + K1(x0, x1)"), Expr::zero()]).unwrap();
        assert_eq!(covariant_differential(&k, &a).unwrap(), covariant_differential(&k, &b).unwrap());
    }

    #[test]
    fn round_trips() {
        let k = gamma();
        let d = operator_from_connection(&k);
        assert_eq!(connection_from_operator(&d).unwrap(), k);
        assert_eq!(operator_from_connection(&connection_from_operator(&d).unwrap()), d);
        let fibre = OperatorConnection::new(sys(BundleKind::Vector), vec![vec![e("D[3] phi_z0(x0, x1, y0)*y0"), Expr::zero()]]).unwrap();
        assert_eq!(connection_from_operator(&operator_from_connection(&fibre)).unwrap(), fibre);
        assert_eq!(d.apply(&sigma()).unwrap(), covariant_differential(&k, &sigma()).unwrap());
    }

    #[test]
    fn second_order_is_rejected() {
        let d = DifferentialOperator::new(
            sys(BundleKind::Vector),
            vec![vec![e("D[1,2] phi_z0(x0, x1, y0)"), e("D[2] phi_z0(x0, x1, y0)")]],
        )
        .unwrap();
        match connection_from_operator(&d) {
            Err(Error::HorizontalOrder(t)) => assert!(t.contains("D[1,2]") || t.contains("D[1, 2]"), "{t}"),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn linearity() {
        let sq = OperatorConnection::new(sys(BundleKind::Vector), vec![vec![e("phi_z0(x0, x1, y0)^2"), Expr::zero()]]).unwrap();
        assert!(!is_linear(&sq).unwrap());
        let shifted = OperatorConnection::new(sys(BundleKind::Vector), vec![vec![e("phi_z0(x0, x1, y0) + y0"), Expr::zero()]]).unwrap();
        assert!(!is_linear(&shifted).unwrap());
        let general = OperatorConnection::new(sys(BundleKind::General), vec![vec![Expr::zero(), Expr::zero()]]).unwrap();
        assert!(matches!(is_linear(&general), Err(Error::Bundle(_))));
    }

    #[test]
    fn templates_are_checked() {
        let bad = OperatorConnection::new(sys(BundleKind::Vector), vec![vec![e("phi_z0(x0, x0, y0)"), Expr::zero()]]);
        assert!(matches!(bad, Err(Error::Mismatch(_))));
        let bad = OperatorConnection::new(sys(BundleKind::Vector), vec![vec![e("w00"), Expr::zero()]]);
        assert!(bad.is_err());
    }
}
