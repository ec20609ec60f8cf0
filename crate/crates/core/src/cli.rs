//! Command dispatcher and report emitters behind the `jetfield` binary.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde_json::{json, Value};

use crate::connections::{
    affine_instance, curvature, curvature_upper, generic_instance, linear_instance, liouville_check, make_universal,
    pullback, verify_universal, Curvature, Instance,
};
use crate::dsl::{Model, Object};
use crate::error::Error;
use crate::expr::{random_realizations, Expr, Realizations, Symbol};
use crate::fconn::{covariant_differential, is_linear};
use crate::fsmooth::{first_order_contact, smoothness_probe, tangent_rep_map_space, witness_points};
use crate::map_systems::{check_decomposition, prolong_kind, ProlongKind};
use crate::sections::{apply_section, tangent_prolong_section, tangent_rep_section, BundleKind};

pub const SCHEMA: u32 = 1;

/// Exit code when every verdict passes.
pub const EXIT_PASS: i32 = 0;
/// Exit code when an identity or probe fails.
pub const EXIT_FAIL: i32 = 1;
/// Exit code for usage, parse and model errors.
pub const EXIT_USAGE: i32 = 2;

#[derive(Parser, Debug)]
#[command(name = "jetfield", version, about = "Systems of maps, sections and connections over coordinate charts")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    #[command(flatten)]
    global: Global,
}

#[derive(Args, Debug, Clone)]
struct Global {
    /// Model file.
    #[arg(long, global = true)]
    model: Option<PathBuf>,
    #[arg(long, global = true, value_enum, default_value = "text")]
    format: Format,
    /// Seed for every random choice.
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
    /// Write the report here instead of stdout.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq, Eq)]
enum Format {
    Text,
    Json,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Tangent prolongation of a map system.
    Prolong {
        #[arg(long)]
        system: String,
        #[arg(long, default_value = "total")]
        kind: ProlongKind,
    },
    /// First-order contact of two pointed curves in a parameter space.
    Contact {
        #[arg(long)]
        system: String,
        /// Two curves.
        #[arg(long, num_args = 2)]
        curves: Vec<String>,
        /// Two parameter values.
        #[arg(long, num_args = 2, allow_negative_numbers = true)]
        at: Vec<f64>,
    },
    /// Tangent representation of a pointed curve.
    Rep {
        #[arg(long)]
        curve: String,
        #[arg(long, allow_negative_numbers = true)]
        at: f64,
    },
    /// Apply a parameter section and prolong it.
    SectionApply {
        #[arg(long)]
        section: String,
    },
    /// Universal connection of a connection system.
    Universal {
        #[arg(long)]
        system: String,
    },
    /// Curvature of the universal connection, or of a pulled back one.
    Curvature {
        #[arg(long, conflicts_with = "gamma", required_unless_present = "gamma")]
        system: Option<String>,
        #[arg(long)]
        gamma: Option<String>,
    },
    /// Connection selected by a parameter section.
    Pullback {
        #[arg(long)]
        gamma: String,
    },
    /// Check the universal connection and curvature identities.
    VerifyUniversal(VerifyArgs),
    /// Liouville form against the universal curvature.
    Liouville {
        #[arg(long)]
        dim: usize,
    },
    /// Covariant differential of a section.
    Nabla {
        #[arg(long)]
        connection: String,
        #[arg(long)]
        section: String,
    },
    /// Finite-difference smoothness probe of a curve.
    Probe {
        #[arg(long)]
        curve: String,
        #[arg(long, allow_negative_numbers = true)]
        at: f64,
        #[arg(long, default_value_t = 1)]
        order: usize,
    },
}

#[derive(Args, Debug)]
struct VerifyArgs {
    /// Opaque instance: `nb nf nw` or `nb/nf/nw` (default 2 1 1).
    #[arg(long, num_args = 0..=3, group = "instance")]
    generic: Option<Vec<String>>,
    /// Linear connections on `nb nf` (default 2 1).
    #[arg(long, num_args = 0..=2, group = "instance")]
    linear: Option<Vec<usize>>,
    /// Affine connections on `nb nf` (default 2 1).
    #[arg(long, num_args = 0..=2, group = "instance")]
    affine: Option<Vec<usize>>,
    /// Model gamma section.
    #[arg(long, group = "instance")]
    gamma: Option<String>,
}

/// A command report. Keys are emitted in sorted order.
#[derive(Debug, Clone, PartialEq)]
pub struct Report {
    pub command: String,
    pub seed: u64,
    pub verdicts: BTreeMap<String, bool>,
    pub residuals: BTreeMap<String, Vec<String>>,
    pub results: BTreeMap<String, Value>,
}

impl Report {
    fn new(command: String, seed: u64) -> Self {
        Report {
            command,
            seed,
            verdicts: BTreeMap::new(),
            residuals: BTreeMap::new(),
            results: BTreeMap::new(),
        }
    }

    pub fn passes(&self) -> bool {
        self.verdicts.values().all(|v| *v)
    }

    fn verdict(&mut self, name: &str, v: bool) {
        self.verdicts.insert(name.to_string(), v);
    }

    fn residual(&mut self, name: &str, es: impl IntoIterator<Item = Expr>) {
        self.residuals.insert(name.to_string(), es.into_iter().map(|e| e.to_string()).collect());
    }

    fn result(&mut self, name: &str, v: Value) {
        self.results.insert(name.to_string(), v);
    }

    fn lines(&mut self, name: &str, rows: Vec<String>) {
        self.result(name, json!(rows));
    }

    pub fn to_json(&self) -> Value {
        json!({
            "schema": SCHEMA,
            "command": self.command,
            "seed": self.seed,
            "pass": self.passes(),
            "verdicts": self.verdicts,
            "residuals": self.residuals,
            "results": self.results,
        })
    }

    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "jetfield {}", self.command);
        let _ = writeln!(s, "seed: {}", self.seed);
        for (k, v) in &self.results {
            match v {
                Value::Array(rows) => {
                    let _ = writeln!(s, "{k}:");
                    for r in rows {
                        let _ = writeln!(s, "  {}", plain(r));
                    }
                }
                other => {
                    let _ = writeln!(s, "{k}: {}", plain(other));
                }
            }
        }
        for (k, rows) in &self.residuals {
            let _ = writeln!(s, "residual {k}: {}", rows.join(", "));
        }
        for (k, v) in &self.verdicts {
            let _ = writeln!(s, "{k}: {}", if *v { "pass" } else { "FAIL" });
        }
        let _ = writeln!(s, "result: {}", if self.passes() { "pass" } else { "FAIL" });
        s
    }
}

fn plain(v: &Value) -> String {
    match v {
        Value::String(s) => s.clone(),
        other => other.to_string(),
    }
}

#[derive(Debug, thiserror::Error)]
enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("{path}:{pos}: {message}", pos = .err.pos, message = .err.message)]
    Model { path: String, err: crate::dsl::DslError },
    #[error(transparent)]
    Engine(#[from] Error),
}

fn usage(msg: impl Into<String>) -> CliError {
    CliError::Usage(msg.into())
}

/// Run the command line `args` (without the program name). Returns the text
/// to print and the exit code.
pub fn run<S: AsRef<str>>(args: &[S]) -> (String, i32) {
    let argv = std::iter::once("jetfield").chain(args.iter().map(AsRef::as_ref));
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_PASS };
            return (e.render().to_string(), code);
        }
    };
    let echo = echo(args);
    match execute(&cli, echo) {
        Ok(report) => {
            let code = if report.passes() { EXIT_PASS } else { EXIT_FAIL };
            let body = match cli.global.format {
                Format::Json => {
                    let mut s = serde_json::to_string_pretty(&report.to_json()).expect("report serializes");
                    s.push('\n');
                    s
                }
                Format::Text => report.to_text(),
            };
            match &cli.global.out {
                Some(path) => match std::fs::write(path, &body) {
                    Ok(()) => (String::new(), code),
                    Err(e) => (format!("error: cannot write {}: {e}\n", path.display()), EXIT_USAGE),
                },
                None => (body, code),
            }
        }
        Err(e) => (format!("error: {e}\n"), EXIT_USAGE),
    }
}

/// The command line without output routing flags.
fn echo<S: AsRef<str>>(args: &[S]) -> String {
    let mut out = Vec::new();
    let mut it = args.iter().map(AsRef::as_ref);
    while let Some(a) = it.next() {
        if a == "--out" {
            it.next();
        } else if !a.starts_with("--out=") {
            out.push(a);
        }
    }
    out.join(" ")
}

fn load(global: &Global) -> Result<Model, CliError> {
    let path = global.model.as_ref().ok_or_else(|| usage("this command needs --model"))?;
    let text = std::fs::read_to_string(path).map_err(|e| usage(format!("cannot read {}: {e}", path.display())))?;
    Model::load(&text).map_err(|err| CliError::Model {
        path: path.display().to_string(),
        err,
    })
}

fn missing(kind: &str, name: &str) -> CliError {
    usage(format!("no {kind} named `{name}` in the model"))
}

fn realizations(model: &Model, seed: u64) -> Realizations {
    let opaques: BTreeMap<Symbol, usize> = model.opaques().opaques().map(|(n, a)| (Symbol::new(n), a)).collect();
    random_realizations(&opaques, &mut ChaCha8Rng::seed_from_u64(seed))
}

fn show(es: &[Expr]) -> Vec<String> {
    es.iter().map(ToString::to_string).collect()
}

fn assignments(targets: &[Symbol], values: &[Expr]) -> Vec<String> {
    targets.iter().zip(values).map(|(t, v)| format!("{t} = {v}")).collect()
}

fn table(rows: &[Symbol], cols: &[Symbol], t: &[Vec<Expr>], label: &str) -> Vec<String> {
    rows.iter()
        .zip(t)
        .flat_map(|(r, row)| cols.iter().zip(row).map(move |(c, e)| format!("{label}[{r}, {c}] = {e}")))
        .collect()
}

fn curvature_rows(r: &Curvature) -> Vec<String> {
    r.fibre
        .iter()
        .zip(&r.forms)
        .flat_map(|(i, f)| {
            f.components()
                .map(|(a, b, e)| format!("R[{i}; {}, {}] = {e}", f.coords()[a], f.coords()[b]))
                .collect::<Vec<_>>()
        })
        .collect()
}

fn execute(cli: &Cli, echo: String) -> Result<Report, CliError> {
    let g = &cli.global;
    let mut rep = Report::new(echo, g.seed);
    match &cli.command {
        Command::Prolong { system, kind } => {
            let m = load(g)?;
            let sys = m.system(system).ok_or_else(|| missing("system", system))?;
            let p = prolong_kind(sys, *kind);
            rep.result("kind", json!(kind.name()));
            rep.lines("values", assignments(p.values.targets(), p.values.values()));
            rep.lines("dotted", assignments(p.dotted.targets(), p.dotted.values()));
            rep.verdict("decomposition", check_decomposition(sys));
        }
        Command::Contact { system, curves, at } => {
            let m = load(g)?;
            let sys = m.system(system).ok_or_else(|| missing("system", system))?;
            let c1 = m.curve(&curves[0]).ok_or_else(|| missing("curve", &curves[0]))?;
            let c2 = m.curve(&curves[1]).ok_or_else(|| missing("curve", &curves[1]))?;
            let real = realizations(&m, g.seed);
            let wits = witness_points(sys.source().len(), -2.0, 2.0, g.seed);
            let v = first_order_contact(sys, (c1, at[0]), (c2, at[1]), &wits, &real)?;
            rep.result("method", json!(v.method));
            rep.result("max_gap", json!(v.max_gap));
            for (k, (c, t)) in [(c1, at[0]), (c2, at[1])].into_iter().enumerate() {
                let r = tangent_rep_map_space(sys, c, t, &real)?;
                rep.lines(&format!("rep{}", k + 1), dotted_rows(sys.target(), &r.values, &r.dotted));
                if c.is_symbolic() {
                    let tr = crate::expr::rational_from_f64(t).ok_or_else(|| usage(format!("{t} is not finite")))?;
                    let mut x = c.exact_point(&tr).expect("symbolic");
                    x.extend(c.exact_velocity(&tr).expect("symbolic"));
                    rep.lines(&format!("vector{}", k + 1), show(&x));
                }
            }
            rep.verdict("contact", v.contact);
        }
        Command::Rep { curve, at } => {
            let m = load(g)?;
            let c = m.curve(curve).ok_or_else(|| missing("curve", curve))?;
            match owner(&m, curve)? {
                Object::System(sys) => {
                    let r = tangent_rep_map_space(sys, c, *at, &realizations(&m, g.seed))?;
                    rep.lines("rep", dotted_rows(sys.target(), &r.values, &r.dotted));
                }
                Object::SecSystem(sys) => {
                    let r = tangent_rep_section(sys, c, *at)?;
                    rep.lines("base", show(&r.base));
                    rep.lines("params", show(&r.params));
                    rep.lines("u", show(&r.u));
                    rep.lines("xi", assignments(sys.target(), &r.xi(sys.fibre())));
                    rep.verdict("forced_consistent", r.forced_consistent(sys)?);
                }
                _ => unreachable!("curves live in systems"),
            }
        }
        Command::SectionApply { section } => {
            let m = load(g)?;
            let (sys, sigma) = m.section(section).ok_or_else(|| missing("section", section))?;
            rep.lines("values", assignments(sys.target(), &apply_section(sys, sigma)?));
            let t = tangent_prolong_section(sys, sigma)?;
            rep.lines("u", show(&t.u));
            rep.lines("xi", assignments(sys.target(), &t.xi(sys.fibre())));
        }
        Command::Universal { system } => {
            let m = load(g)?;
            let sys = m.connsystem(system).ok_or_else(|| missing("connsystem", system))?;
            let up = make_universal(sys);
            rep.lines("base_leg", table(sys.fibre(), sys.base(), up.base_leg(), "c"));
            rep.lines("param_leg", table(sys.fibre(), sys.params(), up.param_leg(), "c"));
            rep.verdict("reducible", up.factor_system().map(|f| &f == sys).unwrap_or(false));
        }
        Command::Curvature { system, gamma } => {
            let m = load(g)?;
            let r = match (system, gamma) {
                (Some(s), _) => {
                    let sys = m.connsystem(s).ok_or_else(|| missing("connsystem", s))?;
                    curvature_upper(&make_universal(sys))
                }
                (None, Some(gm)) => {
                    let (sys, sec) = m.gamma(gm).ok_or_else(|| missing("gamma", gm))?;
                    curvature(&pullback(sys, sec)?)
                }
                (None, None) => return Err(usage("--system or --gamma is required")),
            };
            rep.result("normalization", json!(r.normalization()));
            rep.lines("components", curvature_rows(&r));
        }
        Command::Pullback { gamma } => {
            let m = load(g)?;
            let (sys, sec) = m.gamma(gamma).ok_or_else(|| missing("gamma", gamma))?;
            let c = pullback(sys, sec)?;
            rep.lines("coefficients", table(c.fibre(), c.base(), c.coeffs(), "c"));
        }
        Command::VerifyUniversal(a) => verify(g, a, &mut rep)?,
        Command::Liouville { dim } => {
            let r = liouville_check(*dim)?;
            rep.lines("coords", r.coords.iter().map(ToString::to_string).collect());
            rep.lines("lambda", show(&r.lambda));
            rep.lines(
                "omega",
                r.omega
                    .components()
                    .map(|(a, b, e)| format!("omega[{}, {}] = {e}", r.coords[a], r.coords[b]))
                    .collect(),
            );
            rep.result("normalization", json!(r.normalization));
            rep.residual("curvature", r.curvature_residual.components().map(|(_, _, e)| e.clone()));
            rep.verdict("lambda_matches", r.lambda_matches);
            rep.verdict("omega_matches", r.omega_matches);
            rep.verdict("curvature_matches", r.curvature_matches);
        }
        Command::Nabla { connection, section } => {
            let m = load(g)?;
            let k = m.fconnection(connection).ok_or_else(|| missing("fconnection", connection))?;
            let (sys, sigma) = m.section(section).ok_or_else(|| missing("section", section))?;
            if sys != k.system() {
                return Err(usage(format!("`{section}` is not a section of the system of `{connection}`")));
            }
            let d = covariant_differential(k, sigma)?;
            rep.lines("nabla", table(sys.target(), sys.base(), &d, "nabla"));
            if sys.bundle() == BundleKind::Vector {
                rep.result("linear", json!(is_linear(k)?));
            }
        }
        Command::Probe { curve, at, order } => {
            let m = load(g)?;
            let c = m.curve(curve).ok_or_else(|| missing("curve", curve))?;
            let real = realizations(&m, g.seed);
            let v = smoothness_probe(|t| c.value(t, &real), *at, *order)?;
            rep.result("orders", serde_json::to_value(&v.orders).expect("serializable"));
            if let Some(k) = v.failed_order {
                rep.result("failed_order", json!(k));
            }
            rep.verdict("smooth", v.passes);
        }
    }
    Ok(rep)
}

fn dotted_rows(targets: &[Symbol], values: &[Expr], dotted: &[Expr]) -> Vec<String> {
    let mut rows = assignments(targets, values);
    let dots: Vec<Symbol> = targets.iter().map(crate::geometry::dotted).collect();
    rows.extend(assignments(&dots, dotted));
    rows
}

fn owner<'m>(m: &'m Model, curve: &str) -> Result<&'m Object, CliError> {
    let Some(crate::dsl::Decl {
        kind: crate::dsl::DeclKind::Curve { system, .. },
        ..
    }) = m.file().get(curve)
    else {
        return Err(missing("curve", curve));
    };
    m.get(system.as_str()).ok_or_else(|| missing("system", system.as_str()))
}

fn dims(v: &[usize], default: &[usize]) -> Result<Vec<usize>, CliError> {
    match v.len() {
        0 => Ok(default.to_vec()),
        n if n == default.len() => Ok(v.to_vec()),
        _ => Err(usage(format!("expected {} dimensions", default.len()))),
    }
}

fn generic_dims(v: &[String]) -> Result<Vec<usize>, CliError> {
    let parts: Vec<&str> = match v {
        [one] if one.contains('/') => one.split('/').collect(),
        _ => v.iter().map(String::as_str).collect(),
    };
    let nums = parts
        .iter()
        .map(|p| p.trim().parse::<usize>().map_err(|_| usage(format!("`{p}` is not a dimension"))))
        .collect::<Result<Vec<_>, _>>()?;
    dims(&nums, &[2, 1, 1])
}

fn verify(g: &Global, a: &VerifyArgs, rep: &mut Report) -> Result<(), CliError> {
    let model;
    let (sys, gamma) = if let Some(name) = &a.gamma {
        model = load(g)?;
        let (s, sec) = model.gamma(name).ok_or_else(|| missing("gamma", name))?;
        (s.clone(), sec.clone())
    } else {
        let inst: Instance = if let Some(v) = &a.linear {
            let d = dims(v, &[2, 1])?;
            rep.result("instance", json!(format!("linear {} {}", d[0], d[1])));
            linear_instance(d[0], d[1])?
        } else if let Some(v) = &a.affine {
            let d = dims(v, &[2, 1])?;
            rep.result("instance", json!(format!("affine {} {}", d[0], d[1])));
            affine_instance(d[0], d[1])?
        } else {
            let d = generic_dims(a.generic.as_deref().unwrap_or(&[]))?;
            rep.result("instance", json!(format!("generic {} {} {}", d[0], d[1], d[2])));
            generic_instance(d[0], d[1], d[2])?
        };
        (inst.system, inst.gamma)
    };
    let r = verify_universal(&sys, &gamma)?;
    rep.result("normalization", json!(r.normalization));
    rep.residual("connection", r.connection_residuals.iter().flatten().cloned());
    rep.residual(
        "curvature",
        r.curvature_residuals.iter().flat_map(|f| f.components().map(|(_, _, e)| e.clone()).collect::<Vec<_>>()),
    );
    rep.verdict("connection_identity", r.connection_identity);
    rep.verdict("curvature_identity", r.curvature_identity);
    Ok(())
}
