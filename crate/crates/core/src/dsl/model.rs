use std::collections::BTreeMap;

use crate::connections::ConnectionSystem;
use crate::error::Error;
use crate::expr::{Scope, Symbol};
use crate::fconn::OperatorConnection;
use crate::fsmooth::{Curve, Interval, NumericCurve};
use crate::geometry::{ChartChange, Frame, Role};
use crate::map_systems::MapSystem;
use crate::sections::{ParameterSection, SectionSystem};

use super::{parse_model, CurveBodyDecl, DeclKind, DslError, ModelFile};

#[derive(Clone, Debug)]
pub enum Object {
    Frame(Frame),
    Opaque(usize),
    Change(ChartChange),
    System(MapSystem),
    Curve(Curve),
    SecSystem(SectionSystem),
    Section { system: Symbol, section: ParameterSection },
    ConnSystem(ConnectionSystem),
    Gamma { system: Symbol, section: ParameterSection },
    FConnection(OperatorConnection),
}

/// A parsed model with every declaration built.
#[derive(Clone, Debug)]
pub struct Model {
    file: ModelFile,
    objects: BTreeMap<Symbol, Object>,
    opaques: Scope,
}

macro_rules! getter {
    ($name:ident, $variant:ident, $ty:ty) => {
        pub fn $name(&self, name: &str) -> Option<&$ty> {
            match self.objects.get(&Symbol::new(name)) {
                Some(Object::$variant(x)) => Some(x),
                _ => None,
            }
        }
    };
}

impl Model {
    pub fn load(text: &str) -> Result<Model, DslError> {
        Model::build(parse_model(text)?)
    }

    pub fn build(file: ModelFile) -> Result<Model, DslError> {
        let mut objects: BTreeMap<Symbol, Object> = BTreeMap::new();
        let mut opaques = Scope::new();
        for d in &file.decls {
            let fail = |e: Error| DslError::new(d.pos, format!("in {} `{}`: {e}", d.kind.keyword(), d.name));
            let frame = |n: &Symbol| match objects.get(n) {
                Some(Object::Frame(f)) => f.clone(),
                _ => unreachable!("references are resolved by the parser"),
            };
            let obj = match &d.kind {
                DeclKind::Chart { coords } => Object::Frame(Frame::manifold(coords.iter().map(Symbol::as_str)).map_err(fail)?),
                DeclKind::Fibred { over, coords } => {
                    let parent = frame(over);
                    let role = if parent.dim(Role::Fibre) == 0 { Role::Fibre } else { Role::SecondFibre };
                    let pairs = parent
                        .coords()
                        .iter()
                        .cloned()
                        .zip(parent.roles().iter().copied())
                        .chain(coords.iter().cloned().map(|c| (c, role)));
                    Object::Frame(Frame::new(pairs).map_err(fail)?)
                }
                DeclKind::Opaque { arity } => {
                    opaques.add_opaque(d.name.as_str(), *arity);
                    Object::Opaque(*arity)
                }
                DeclKind::Change { on, formulas } => {
                    let f = frame(on);
                    Object::Change(ChartChange::new(f.clone(), f, formulas.clone()).map_err(fail)?)
                }
                DeclKind::System { params, from, to, eval } => Object::System(
                    MapSystem::new(params.clone(), frame(from).coords().to_vec(), frame(to).coords().to_vec(), eval.clone())
                        .map_err(fail)?,
                ),
                DeclKind::Curve { system, lo, hi, body } => {
                    let codomain = match objects.get(system) {
                        Some(Object::System(s)) => s.params().to_vec(),
                        Some(Object::SecSystem(s)) => s.base().iter().chain(s.params()).cloned().collect(),
                        _ => unreachable!("checked by the parser"),
                    };
                    let interval = Interval::new(lo.clone(), hi.clone()).map_err(fail)?;
                    let curve = match body {
                        CurveBodyDecl::Symbolic(v) => Curve::symbolic(codomain, interval, v.clone()),
                        CurveBodyDecl::Numeric(texts) => {
                            let n = NumericCurve::parse(texts).map_err(|(_, e)| fail(e.into()))?;
                            Curve::numeric(codomain, interval, n)
                        }
                    };
                    Object::Curve(curve.map_err(fail)?)
                }
                DeclKind::SecSystem { over, params, bundle, eval } => {
                    let g = frame(&over[2]);
                    let dff = crate::geometry::DoubleFibredFrame::from_blocks(
                        g.block(Role::Base),
                        g.block(Role::Fibre),
                        g.block(Role::SecondFibre),
                    )
                    .map_err(fail)?;
                    Object::SecSystem(SectionSystem::new(dff, params.clone(), eval.clone(), *bundle).map_err(fail)?)
                }
                DeclKind::Section { system, values } => {
                    let Some(Object::SecSystem(s)) = objects.get(system) else {
                        unreachable!("checked by the parser")
                    };
                    Object::Section {
                        system: system.clone(),
                        section: s.section(values.clone()).map_err(fail)?,
                    }
                }
                DeclKind::ConnSystem { over, params, coeffs } => {
                    let f = frame(&over[1]);
                    Object::ConnSystem(
                        ConnectionSystem::new(f.block(Role::Base), params.clone(), f.block(Role::Fibre), coeffs.clone())
                            .map_err(fail)?,
                    )
                }
                DeclKind::Gamma { system, values } => {
                    let Some(Object::ConnSystem(s)) = objects.get(system) else {
                        unreachable!("checked by the parser")
                    };
                    Object::Gamma {
                        system: system.clone(),
                        section: s.section(values.clone()).map_err(fail)?,
                    }
                }
                DeclKind::FConnection { system, recipes } => {
                    let Some(Object::SecSystem(s)) = objects.get(system) else {
                        unreachable!("checked by the parser")
                    };
                    Object::FConnection(OperatorConnection::new(s.clone(), recipes.clone()).map_err(fail)?)
                }
            };
            objects.insert(d.name.clone(), obj);
        }
        Ok(Model { file, objects, opaques })
    }

    pub fn file(&self) -> &ModelFile {
        &self.file
    }

    pub fn get(&self, name: &str) -> Option<&Object> {
        self.objects.get(&Symbol::new(name))
    }

    /// Declared opaque functions.
    pub fn opaques(&self) -> &Scope {
        &self.opaques
    }

    getter!(frame, Frame, Frame);
    getter!(change, Change, ChartChange);
    getter!(system, System, MapSystem);
    getter!(curve, Curve, Curve);
    getter!(secsystem, SecSystem, SectionSystem);
    getter!(connsystem, ConnSystem, ConnectionSystem);
    getter!(fconnection, FConnection, OperatorConnection);

    /// A section with the system it belongs to.
    pub fn section(&self, name: &str) -> Option<(&SectionSystem, &ParameterSection)> {
        match self.get(name) {
            Some(Object::Section { system, section }) => Some((self.secsystem(system.as_str())?, section)),
            _ => None,
        }
    }

    pub fn gamma(&self, name: &str) -> Option<(&ConnectionSystem, &ParameterSection)> {
        match self.get(name) {
            Some(Object::Gamma { system, section }) => Some((self.connsystem(system.as_str())?, section)),
            _ => None,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const FULL: &str = "\
chart B (x0)
fibred F over B (y0)
fibred G over F (z0)
chart M (u0)
chart N (v0)
opaque K/1
change ch on G { x0 = x0, y0 = y0 + x0, z0 = 2*z0 }
system lin params (w0) from M to N eval { v0 = w0*u0 }
curve c in lin interval (-1, 1) { w0 = lam^2 }
curve numeric k in lin interval (-inf, inf) { w0 = abs(lam) }
secsystem s over (B, F, G) params (w0) vector eval { z0 = w0*y0 }
section sigma of s { w0 = K(x0) }
connsystem cs over (B, F) params (w0) coeff { c[y0, x0] = w0*y0 }
gamma g of cs { w0 = K(x0) }
fconnection nabla over s { D[z0, x0](phi) = K(x0)*phi_z0(x0, y0) }
";

    #[test]
    fn builds_every_kind() {
        let m = Model::load(FULL).unwrap();
        assert_eq!(m.file().len(), 15);
        assert_eq!(m.frame("G").unwrap().coords().len(), 3);
        assert!(m.change("ch").is_some());
        assert!(m.system("lin").is_some());
        assert!(m.curve("c").is_some() && m.curve("k").is_some());
        assert!(m.section("sigma").is_some());
        assert!(m.gamma("g").is_some());
        assert!(m.fconnection("nabla").is_some());
        assert!(matches!(m.get("K"), Some(Object::Opaque(1))));
        assert!(m.system("sigma").is_none());
    }

    #[test]
    fn printed_file_reparses() {
        let m = Model::load(FULL).unwrap();
        let again = parse_model(&m.file().to_string()).unwrap();
        assert_eq!(&again, m.file());
        assert_eq!(again.to_string(), m.file().to_string());
    }

    #[test]
    fn library_errors_carry_position() {
        let e = Model::load("chart B (x0)\nfibred F over B (y0)\nfibred G over F (z0)\nsecsystem s over (B, F, G) params (w) vector eval { z0 = w*y0 + 1 }")
            .unwrap_err();
        assert_eq!(e.pos.line, 4);
        assert!(e.message.contains("secsystem `s`"));
    }
}
