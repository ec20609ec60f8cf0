//! Systems of connections on a fibred manifold `F → B`, upper and reducible
//! connections, the universal connection and its curvature.

use std::collections::BTreeSet;

use crate::error::{Error, Result};
use crate::expr::{rational, Binding, Expr, Scope, Symbol};
use crate::geometry::{dotted, ChartChange, DoubleFibredFrame, Frame, Role};
use crate::sections::{lift_fibred, ParameterSection};

/// Normalization of [`Curvature`] components.
pub const CURVATURE_NORMALIZATION: &str = "R^i_ab = -2 (C^i_ab - C^i_ba), C^i_ab = d_a c^i_b + c^j_a d_j c^i_b";

fn check_table(rows: &[Vec<Expr>], n_rows: usize, n_cols: usize, what: &str) -> Result<()> {
    if rows.len() != n_rows || rows.iter().any(|r| r.len() != n_cols) {
        return Err(Error::Mismatch(format!("{what} table must be {n_rows} x {n_cols}")));
    }
    Ok(())
}

fn check_symbols<'a>(rows: &[Vec<Expr>], allowed: impl IntoIterator<Item = &'a Symbol>) -> Result<()> {
    let allowed: BTreeSet<&Symbol> = allowed.into_iter().collect();
    for e in rows.iter().flatten() {
        if let Some(s) = e.symbols().iter().find(|s| !allowed.contains(s)) {
            return Err(Error::Mismatch(format!("coefficient uses `{s}`")));
        }
    }
    Ok(())
}

fn unique<'a>(names: impl IntoIterator<Item = &'a Symbol>) -> Result<()> {
    let mut seen = BTreeSet::new();
    for s in names {
        if !seen.insert(s) {
            return Err(Error::NameCollision(s.to_string()));
        }
    }
    Ok(())
}

/// `c = d^λ ⊗ (∂_λ + c^i_λ ∂_i)`, with `coeffs[i][λ]`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Connection {
    base: Vec<Symbol>,
    fibre: Vec<Symbol>,
    coeffs: Vec<Vec<Expr>>,
}

impl Connection {
    pub fn new(base: Vec<Symbol>, fibre: Vec<Symbol>, coeffs: Vec<Vec<Expr>>) -> Result<Self> {
        unique(base.iter().chain(&fibre))?;
        check_table(&coeffs, fibre.len(), base.len(), "coefficient")?;
        check_symbols(&coeffs, base.iter().chain(&fibre))?;
        Ok(Connection { base, fibre, coeffs })
    }

    pub fn base(&self) -> &[Symbol] {
        &self.base
    }

    pub fn fibre(&self) -> &[Symbol] {
        &self.fibre
    }

    pub fn coeffs(&self) -> &[Vec<Expr>] {
        &self.coeffs
    }

    pub fn coeff(&self, i: usize, lambda: usize) -> &Expr {
        &self.coeffs[i][lambda]
    }

    pub fn frame(&self) -> Result<Frame> {
        Frame::from_blocks(&[(Role::Base, &self.base), (Role::Fibre, &self.fibre)])
    }
}

/// Parameters `w^A` over the base and `ε^i_λ(x, w, y)`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ConnectionSystem {
    base: Vec<Symbol>,
    params: Vec<Symbol>,
    fibre: Vec<Symbol>,
    coeffs: Vec<Vec<Expr>>,
}

impl ConnectionSystem {
    pub fn new(base: Vec<Symbol>, params: Vec<Symbol>, fibre: Vec<Symbol>, coeffs: Vec<Vec<Expr>>) -> Result<Self> {
        unique(base.iter().chain(&params).chain(&fibre))?;
        check_table(&coeffs, fibre.len(), base.len(), "coefficient")?;
        check_symbols(&coeffs, base.iter().chain(&params).chain(&fibre))?;
        Ok(ConnectionSystem {
            base,
            params,
            fibre,
            coeffs,
        })
    }

    pub fn base(&self) -> &[Symbol] {
        &self.base
    }

    pub fn params(&self) -> &[Symbol] {
        &self.params
    }

    pub fn fibre(&self) -> &[Symbol] {
        &self.fibre
    }

    pub fn coeffs(&self) -> &[Vec<Expr>] {
        &self.coeffs
    }

    /// `F↑ = C ×_B F`, ordered `(x, w, y)`.
    pub fn lift(&self) -> Result<DoubleFibredFrame> {
        lift_fibred(&self.base, &self.params, &self.fibre)
    }

    pub fn section(&self, values: Vec<Expr>) -> Result<ParameterSection> {
        if values.len() != self.params.len() {
            return Err(Error::Mismatch(format!(
                "{} components for {} parameters",
                values.len(),
                self.params.len()
            )));
        }
        ParameterSection::new(&self.base, values)
    }

    fn binding(&self, gamma: &ParameterSection) -> Result<Binding> {
        if gamma.values().len() != self.params.len() {
            return Err(Error::Mismatch("section does not match the parameters".into()));
        }
        Ok(Binding::from_pairs(self.params.iter().cloned().zip(gamma.values().iter().cloned())).expect("unique"))
    }
}

/// A connection of `F↑ → C`: base leg `c↑^i_λ` and parameter leg `c↑^i_A`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct UpperConnection {
    base: Vec<Symbol>,
    params: Vec<Symbol>,
    fibre: Vec<Symbol>,
    base_leg: Vec<Vec<Expr>>,
    param_leg: Vec<Vec<Expr>>,
}

impl UpperConnection {
    pub fn new(lifted: &DoubleFibredFrame, base_leg: Vec<Vec<Expr>>, param_leg: Vec<Vec<Expr>>) -> Result<Self> {
        let (base, params, fibre) = (lifted.base().to_vec(), lifted.fibre().to_vec(), lifted.second().to_vec());
        check_table(&base_leg, fibre.len(), base.len(), "base-leg")?;
        check_table(&param_leg, fibre.len(), params.len(), "parameter-leg")?;
        let all: Vec<&Symbol> = base.iter().chain(&params).chain(&fibre).collect();
        check_symbols(&base_leg, all.iter().copied())?;
        check_symbols(&param_leg, all.iter().copied())?;
        Ok(UpperConnection {
            base,
            params,
            fibre,
            base_leg,
            param_leg,
        })
    }

    pub fn lifted(&self) -> Result<DoubleFibredFrame> {
        lift_fibred(&self.base, &self.params, &self.fibre)
    }

    pub fn base_leg(&self) -> &[Vec<Expr>] {
        &self.base_leg
    }

    pub fn param_leg(&self) -> &[Vec<Expr>] {
        &self.param_leg
    }

    /// The lifted base `(x, w)`.
    pub fn lifted_base(&self) -> Vec<Symbol> {
        self.base.iter().chain(&self.params).cloned().collect()
    }

    /// Coefficient column `c↑^i_α` over the lifted base index `α`.
    fn leg(&self, i: usize, alpha: usize) -> &Expr {
        let n = self.base.len();
        if alpha < n {
            &self.base_leg[i][alpha]
        } else {
            &self.param_leg[i][alpha - n]
        }
    }

    fn leg_vanishes(&self) -> bool {
        self.param_leg.iter().flatten().all(Expr::is_zero)
    }

    /// The system a reducible connection comes from.
    pub fn factor_system(&self) -> Result<ConnectionSystem> {
        if !self.leg_vanishes() {
            return Err(Error::Incompatible("upper connection is not reducible".into()));
        }
        ConnectionSystem::new(self.base.clone(), self.params.clone(), self.fibre.clone(), self.base_leg.clone())
    }
}

/// `ε↑ = d^λ ⊗ (∂_λ + ε^i_λ ∂_i) + d^A ⊗ ∂_A`.
pub fn make_universal(sys: &ConnectionSystem) -> UpperConnection {
    UpperConnection {
        base: sys.base.clone(),
        params: sys.params.clone(),
        fibre: sys.fibre.clone(),
        base_leg: sys.coeffs.clone(),
        param_leg: vec![vec![Expr::zero(); sys.params.len()]; sys.fibre.len()],
    }
}

/// Whether the parameter leg vanishes in the given chart and in each chart
/// change of `F↑`. Chart changes must keep `ȳ` independent of `w`; the
/// transformed leg is `J_w⁻¹ (c↑^i_B ∂_i ȳ^j)`.
pub fn is_reducible(up: &UpperConnection, charts: &[ChartChange]) -> Result<bool> {
    let frame = up.lifted()?.frame_g()?;
    let (nx, nw) = (up.base.len(), up.params.len());
    for ch in charts {
        if ch.from_frame() != &frame {
            return Err(Error::InvalidChart("chart change is not on the lifted frame".into()));
        }
        for j in 0..up.fibre.len() {
            if ch.formula(nx + nw + j).depends_on(&up.params) {
                return Err(Error::InvalidChart(format!(
                    "fibre coordinate `{}` depends on the parameters",
                    ch.to_frame().coords()[nx + nw + j]
                )));
            }
        }
    }
    if !up.leg_vanishes() {
        return Ok(false);
    }
    for ch in charts {
        for j in 0..up.fibre.len() {
            let ybar = ch.formula(nx + nw + j);
            for b in 0..nw {
                let w: Expr = up
                    .fibre
                    .iter()
                    .enumerate()
                    .map(|(i, y)| &up.param_leg[i][b] * &ybar.partial(y))
                    .sum();
                if !w.is_zero() {
                    return Ok(false);
                }
            }
        }
    }
    Ok(true)
}

/// `γ̄ = ε*(γ)`: coefficients with `w ↦ γ(x)`.
pub fn pullback(sys: &ConnectionSystem, gamma: &ParameterSection) -> Result<Connection> {
    let b = sys.binding(gamma)?;
    Connection::new(
        sys.base.clone(),
        sys.fibre.clone(),
        sys.coeffs
            .iter()
            .map(|row| row.iter().map(|e| e.substitute(&b)).collect())
            .collect(),
    )
}

/// `γ*(c↑)`: `c↑^i_λ ∘ γ + (c↑^i_A ∘ γ) ∂_λ γ^A`.
pub fn pullback_upper(up: &UpperConnection, gamma: &ParameterSection) -> Result<Connection> {
    if gamma.values().len() != up.params.len() {
        return Err(Error::Mismatch("section does not match the parameters".into()));
    }
    let b = Binding::from_pairs(up.params.iter().cloned().zip(gamma.values().iter().cloned())).expect("unique");
    let coeffs = (0..up.fibre.len())
        .map(|i| {
            up.base
                .iter()
                .enumerate()
                .map(|(l, x)| {
                    let contracted: Expr = gamma
                        .values()
                        .iter()
                        .enumerate()
                        .map(|(a, g)| &up.param_leg[i][a].substitute(&b) * &g.partial(x))
                        .sum();
                    &up.base_leg[i][l].substitute(&b) + &contracted
                })
                .collect()
        })
        .collect();
    Connection::new(up.base.clone(), up.fibre.clone(), coeffs)
}

/// An antisymmetric table over `coords`, stored for `α < β`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TwoForm {
    coords: Vec<Symbol>,
    upper: Vec<Expr>,
}

impl TwoForm {
    fn index(n: usize, a: usize, b: usize) -> usize {
        debug_assert!(a < b && b < n);
        a * n - a * (a + 1) / 2 + (b - a - 1)
    }

    /// Build from the `α < β` components.
    pub fn from_fn(coords: Vec<Symbol>, mut f: impl FnMut(usize, usize) -> Expr) -> Self {
        let n = coords.len();
        let mut upper = Vec::with_capacity(n * n.saturating_sub(1) / 2);
        for a in 0..n {
            for b in a + 1..n {
                upper.push(f(a, b));
            }
        }
        TwoForm { coords, upper }
    }

    pub fn coords(&self) -> &[Symbol] {
        &self.coords
    }

    pub fn get(&self, a: usize, b: usize) -> Expr {
        match a.cmp(&b) {
            std::cmp::Ordering::Equal => Expr::zero(),
            std::cmp::Ordering::Less => self.upper[Self::index(self.coords.len(), a, b)].clone(),
            std::cmp::Ordering::Greater => -&self.upper[Self::index(self.coords.len(), b, a)],
        }
    }

    /// `(α, β, value)` for `α < β`.
    pub fn components(&self) -> impl Iterator<Item = (usize, usize, &Expr)> {
        let n = self.coords.len();
        (0..n)
            .flat_map(move |a| (a + 1..n).map(move |b| (a, b)))
            .zip(&self.upper)
            .map(|((a, b), e)| (a, b, e))
    }

    pub fn is_zero(&self) -> bool {
        self.upper.iter().all(Expr::is_zero)
    }

    pub fn map(&self, f: impl Fn(&Expr) -> Expr) -> TwoForm {
        TwoForm {
            coords: self.coords.clone(),
            upper: self.upper.iter().map(f).collect(),
        }
    }

    pub fn sub(&self, other: &TwoForm) -> Result<TwoForm> {
        if self.coords != other.coords {
            return Err(Error::Mismatch("forms over different coordinates".into()));
        }
        Ok(TwoForm {
            coords: self.coords.clone(),
            upper: self.upper.iter().zip(&other.upper).map(|(a, b)| a - b).collect(),
        })
    }
}

/// `dα` for `α = a_β d^β`: `(dα)_{αβ} = ∂_α a_β − ∂_β a_α`.
pub fn exterior_derivative(coords: &[Symbol], a: &[Expr]) -> Result<TwoForm> {
    if a.len() != coords.len() {
        return Err(Error::Mismatch("one coefficient per coordinate".into()));
    }
    Ok(TwoForm::from_fn(coords.to_vec(), |p, q| {
        &a[q].partial(&coords[p]) - &a[p].partial(&coords[q])
    }))
}

/// Curvature components `R^i_{αβ}`, one form per fibre coordinate.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Curvature {
    pub fibre: Vec<Symbol>,
    pub forms: Vec<TwoForm>,
}

impl Curvature {
    pub fn normalization(&self) -> &'static str {
        CURVATURE_NORMALIZATION
    }

    pub fn get(&self, i: usize, a: usize, b: usize) -> Expr {
        self.forms[i].get(a, b)
    }

    pub fn is_zero(&self) -> bool {
        self.forms.iter().all(TwoForm::is_zero)
    }

    pub fn coords(&self) -> &[Symbol] {
        self.forms.first().map_or(&[], |f| f.coords())
    }
}

fn curvature_of(coords: Vec<Symbol>, fibre: &[Symbol], leg: impl Fn(usize, usize) -> Expr) -> Curvature {
    let c = |i: usize, a: usize, b: usize| -> Expr {
        let mut e = leg(i, b).partial(&coords[a]);
        for (j, y) in fibre.iter().enumerate() {
            e = &e + &(&leg(j, a) * &leg(i, b).partial(y));
        }
        e
    };
    let forms = (0..fibre.len())
        .map(|i| TwoForm::from_fn(coords.clone(), |a, b| (&c(i, a, b) - &c(i, b, a)).scale(&rational(-2, 1))))
        .collect();
    Curvature {
        fibre: fibre.to_vec(),
        forms,
    }
}

pub fn curvature(conn: &Connection) -> Curvature {
    curvature_of(conn.base.clone(), &conn.fibre, |i, l| conn.coeffs[i][l].clone())
}

/// Curvature over the lifted base `(x, w)`, parameter leg included.
pub fn curvature_upper(up: &UpperConnection) -> Curvature {
    curvature_of(up.lifted_base(), &up.fibre, |i, a| up.leg(i, a).clone())
}

/// `γ*R`: components composed with `Γ = (x, γ(x))` and contracted with
/// `∂_λ Γ^α ∂_μ Γ^β − ∂_μ Γ^α ∂_λ Γ^β`.
pub fn pullback_curvature(r: &Curvature, base: &[Symbol], params: &[Symbol], gamma: &ParameterSection) -> Result<Curvature> {
    let lifted: Vec<Symbol> = base.iter().chain(params).cloned().collect();
    if r.coords() != lifted.as_slice() || gamma.values().len() != params.len() {
        return Err(Error::Mismatch("curvature is not over the lifted base".into()));
    }
    let b = Binding::from_pairs(params.iter().cloned().zip(gamma.values().iter().cloned())).expect("unique");
    let big_gamma: Vec<Expr> = base
        .iter()
        .cloned()
        .map(Expr::symbol)
        .chain(gamma.values().iter().cloned())
        .collect();
    let dg: Vec<Vec<Expr>> = big_gamma.iter().map(|g| base.iter().map(|x| g.partial(x)).collect()).collect();
    let forms = r
        .forms
        .iter()
        .map(|form| {
            let composed: Vec<(usize, usize, Expr)> =
                form.components().map(|(a, c, e)| (a, c, e.substitute(&b))).collect();
            TwoForm::from_fn(base.to_vec(), |l, m| {
                composed
                    .iter()
                    .map(|(a, c, e)| e * &(&(&dg[*a][l] * &dg[*c][m]) - &(&dg[*a][m] * &dg[*c][l])))
                    .sum()
            })
        })
        .collect();
    Ok(Curvature {
        fibre: r.fibre.clone(),
        forms,
    })
}

/// Outcome of checking the universal property on one section.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct UniversalReport {
    pub connection_identity: bool,
    pub curvature_identity: bool,
    /// `γ*(ε↑) − ε*(γ)`, per `(i, λ)`.
    pub connection_residuals: Vec<Vec<Expr>>,
    /// `γ*R[ε↑] − R[γ̄]`, per `i` and `λ < μ`.
    pub curvature_residuals: Vec<TwoForm>,
    pub normalization: &'static str,
}

pub fn verify_universal(sys: &ConnectionSystem, gamma: &ParameterSection) -> Result<UniversalReport> {
    let up = make_universal(sys);
    let via_up = pullback_upper(&up, gamma)?;
    let via_sys = pullback(sys, gamma)?;
    let b = sys.binding(gamma)?;
    let direct: Vec<Vec<Expr>> = sys
        .coeffs
        .iter()
        .map(|row| row.iter().map(|e| e.substitute(&b)).collect())
        .collect();
    let connection_residuals: Vec<Vec<Expr>> = via_up
        .coeffs
        .iter()
        .zip(&via_sys.coeffs)
        .map(|(u, s)| u.iter().zip(s).map(|(a, b)| a - b).collect())
        .collect();
    let connection_identity =
        connection_residuals.iter().flatten().all(Expr::is_zero) && via_sys.coeffs == direct;
    let pulled = pullback_curvature(&curvature_upper(&up), &sys.base, &sys.params, gamma)?;
    let direct_r = curvature(&via_sys);
    let curvature_residuals = pulled
        .forms
        .iter()
        .zip(&direct_r.forms)
        .map(|(a, b)| a.sub(b))
        .collect::<Result<Vec<_>>>()?;
    Ok(UniversalReport {
        connection_identity,
        curvature_identity: curvature_residuals.iter().all(TwoForm::is_zero),
        connection_residuals,
        curvature_residuals,
        normalization: CURVATURE_NORMALIZATION,
    })
}

fn names(prefix: &str, n: usize) -> Vec<Symbol> {
    (0..n).map(|k| Symbol::new(format!("{prefix}{k}"))).collect()
}

fn index_name(prefix: &str, idx: &[usize]) -> Symbol {
    Symbol::new(format!("{prefix}{}", idx.iter().map(ToString::to_string).collect::<Vec<_>>().join("_")))
}

/// A system together with a section to test it on.
#[derive(Clone, Debug)]
pub struct Instance {
    pub system: ConnectionSystem,
    pub gamma: ParameterSection,
    pub scope: Scope,
}

fn opaque_in(name: &Symbol, vars: &[Symbol]) -> Expr {
    Expr::apply(name.clone(), vars.iter().cloned().map(Expr::symbol).collect())
}

fn instance(base: Vec<Symbol>, params: Vec<Symbol>, fibre: Vec<Symbol>, coeffs: Vec<Vec<Expr>>, gamma: Vec<Expr>) -> Result<Instance> {
    let mut scope = Scope::with_coords(base.iter().chain(&params).chain(&fibre).map(Symbol::as_str));
    for e in coeffs.iter().flatten().chain(&gamma) {
        for (f, arity) in e.opaques() {
            scope.add_opaque(f.as_str(), arity);
        }
    }
    let system = ConnectionSystem::new(base, params, fibre, coeffs)?;
    let gamma = system.section(gamma)?;
    Ok(Instance { system, gamma, scope })
}

/// Linear connections `ε^i_λ = w^i_{λj} y^j` with `γ = K^i_{λj}(x)`.
pub fn linear_instance(nb: usize, nf: usize) -> Result<Instance> {
    affine_like(nb, nf, false)
}

/// Affine connections `ε^i_λ = w^i_{λj} y^j + w^i_λ` with `γ = (K, k)(x)`.
pub fn affine_instance(nb: usize, nf: usize) -> Result<Instance> {
    affine_like(nb, nf, true)
}

fn affine_like(nb: usize, nf: usize, affine: bool) -> Result<Instance> {
    let base = names("x", nb);
    let fibre = names("y", nf);
    let mut params = Vec::new();
    let mut gamma = Vec::new();
    let mut coeffs = vec![vec![Expr::zero(); nb]; nf];
    for (i, row) in coeffs.iter_mut().enumerate() {
        for (l, c) in row.iter_mut().enumerate() {
            for (j, y) in fibre.iter().enumerate() {
                let w = index_name("w", &[i, l, j]);
                *c = &*c + &(&Expr::symbol(w.clone()) * &Expr::symbol(y.clone()));
                gamma.push(opaque_in(&index_name("K", &[i, l, j]), &base));
                params.push(w);
            }
            if affine {
                let w = index_name("w", &[i, l]);
                *c = &*c + &Expr::symbol(w.clone());
                gamma.push(opaque_in(&index_name("k", &[i, l]), &base));
                params.push(w);
            }
        }
    }
    instance(base, params, fibre, coeffs, gamma)
}

/// Opaque `ε^i_λ(x, w, y)` and opaque `γ^A(x)`.
pub fn generic_instance(nb: usize, nf: usize, nw: usize) -> Result<Instance> {
    let base = names("x", nb);
    let params = names("w", nw);
    let fibre = names("y", nf);
    let all: Vec<Symbol> = base.iter().chain(&params).chain(&fibre).cloned().collect();
    let coeffs = (0..nf)
        .map(|i| (0..nb).map(|l| opaque_in(&index_name("eps", &[i, l]), &all)).collect())
        .collect();
    let gamma = (0..nw).map(|a| opaque_in(&index_name("gamma", &[a]), &base)).collect();
    instance(base, params, fibre, coeffs, gamma)
}

/// The system of principal connections of `M × ℝ → M` and its universal
/// connection against the Liouville form.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct LiouvilleReport {
    pub dim: usize,
    /// `x_μ` then `ẋ_μ`.
    pub coords: Vec<Symbol>,
    /// `λ_α`, read off the universal connection.
    pub lambda: Vec<Expr>,
    /// `ω = −dλ`.
    pub omega: TwoForm,
    pub lambda_matches: bool,
    pub omega_matches: bool,
    /// `R[ε↑] − 2ω`.
    pub curvature_residual: TwoForm,
    pub curvature_matches: bool,
    pub normalization: &'static str,
}

impl LiouvilleReport {
    pub fn passes(&self) -> bool {
        self.lambda_matches && self.omega_matches && self.curvature_matches
    }
}

/// Parameters are named `d_x<μ>` and stand for `ẋ_μ`; the fibre is `t`.
pub fn liouville_system(dim: usize) -> Result<ConnectionSystem> {
    if dim == 0 {
        return Err(Error::Mismatch("base dimension must be at least 1".into()));
    }
    let base = names("x", dim);
    let params: Vec<Symbol> = base.iter().map(dotted).collect();
    let coeffs = vec![params.iter().cloned().map(Expr::symbol).collect()];
    ConnectionSystem::new(base, params, vec![Symbol::new("t")], coeffs)
}

pub fn liouville_check(dim: usize) -> Result<LiouvilleReport> {
    let sys = liouville_system(dim)?;
    let up = make_universal(&sys);
    let coords = up.lifted_base();
    let lambda: Vec<Expr> = (0..coords.len()).map(|a| up.leg(0, a).clone()).collect();
    let expected: Vec<Expr> = (0..2 * dim)
        .map(|a| if a < dim { Expr::symbol(dotted(&coords[a])) } else { Expr::zero() })
        .collect();
    let omega = exterior_derivative(&coords, &lambda)?.map(|e| -e);
    let standard = TwoForm::from_fn(coords.clone(), |a, b| if b == a + dim { Expr::one() } else { Expr::zero() });
    let r = curvature_upper(&up);
    let curvature_residual = r.forms[0].sub(&omega.map(|e| e.scale(&rational(2, 1))))?;
    Ok(LiouvilleReport {
        dim,
        lambda_matches: lambda == expected,
        omega_matches: omega == standard,
        curvature_matches: curvature_residual.is_zero(),
        coords,
        lambda,
        omega,
        curvature_residual,
        normalization: "R[eps_up] = -2 d(lambda) = 2 omega",
    })
}
