//! Acceptance suite. Prints one line per criterion; exits nonzero when a
//! criterion outside `EXPECTED_FAILURES` fails, or one inside it passes.

mod common;

use std::time::{Duration, Instant};

use common::{monomial, opaque, random_chart, syms};
use jetfield::connections::{affine_instance, generic_instance, linear_instance, liouville_check, verify_universal, Instance};
use jetfield::error::Error;
use jetfield::expr::{Expr, Realizations, Symbol};
use jetfield::fconn::{connection_from_operator, is_linear, operator_from_connection, OperatorConnection};
use jetfield::fsmooth::{first_order_contact, smoothness_probe, tangent_rep_map_space, Curve, Interval};
use jetfield::geometry::DoubleFibredFrame;
use jetfield::map_systems::{check_decomposition, injectivity_probe, InjectivityOutcome, MapSystem};
use jetfield::sections::{chart_invariance_check, tangent_rep_section, BundleKind, SectionSystem};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const SEED: u64 = 0;
/// Wall-clock budget for the three universal-connection instances.
const UNIVERSAL_BUDGET: Duration = Duration::from_secs(2);
const RANDOM_SYSTEMS: usize = 50;
const RANDOM_CHARTS: usize = 10;
const RANDOM_RECIPES: usize = 20;
/// Observed Richardson rates must lie within this fraction of nominal.
const RATE_TOLERANCE: f64 = 0.2;
const NOMINAL_RATE: f64 = 2.0;
/// `ε = w²y` gives `ż = 2y` at `(ĉ₁, 1)` but `ż = −2y` at `(ĉ₂, −1)`.
const EXPECTED_FAILURES: &[u32] = &[4];

type Criterion = (u32, &'static str, fn() -> Outcome);

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome { pass, detail: detail.into() }
}

fn guard(f: impl FnOnce() -> jetfield::Result<Outcome>) -> Outcome {
    f().unwrap_or_else(|e| outcome(false, format!("error: {e}")))
}

fn instances() -> jetfield::Result<Vec<(&'static str, Instance)>> {
    Ok(vec![
        ("linear 2/2", linear_instance(2, 2)?),
        ("affine 2/2", affine_instance(2, 2)?),
        ("generic 2/1/1", generic_instance(2, 1, 1)?),
    ])
}

fn universal(curvature: bool) -> Outcome {
    guard(|| {
        let start = Instant::now();
        let mut bad = Vec::new();
        for (name, inst) in instances()? {
            let r = verify_universal(&inst.system, &inst.gamma)?;
            let ok = if curvature {
                r.curvature_identity && r.curvature_residuals.iter().all(|f| f.is_zero())
            } else {
                r.connection_identity && r.connection_residuals.iter().flatten().all(Expr::is_zero)
            };
            if !ok {
                bad.push(name);
            }
        }
        let took = start.elapsed();
        Ok(outcome(
            bad.is_empty() && took < UNIVERSAL_BUDGET,
            format!("3 instances, exact zero residuals, {:.3}s of {}s{}", took.as_secs_f64(), UNIVERSAL_BUDGET.as_secs(), if bad.is_empty() { String::new() } else { format!(", failing: {bad:?}") }),
        ))
    })
}

fn decomposition() -> Outcome {
    guard(|| {
        let y = syms(&["y0", "y1"]);
        let z = syms(&["z0", "z1"]);
        let w = syms(&["w0_0", "w0_1", "w1_0", "w1_1"]);
        let s = |n: &Symbol| Expr::symbol(n.clone());
        let linear: Vec<Expr> = (0..2).map(|a| &(&s(&w[2 * a]) * &s(&y[0])) + &(&s(&w[2 * a + 1]) * &s(&y[1]))).collect();
        let b = syms(&["b0", "b1"]);
        let affine: Vec<Expr> = linear.iter().zip(&b).map(|(e, v)| e + &s(v)).collect();
        let mut params = w.clone();
        params.extend(b.clone());
        let mut ok = check_decomposition(&MapSystem::new(w, y.clone(), z.clone(), linear)?)
            && check_decomposition(&MapSystem::new(params, y, z, affine)?);
        let mut rng = ChaCha8Rng::seed_from_u64(SEED);
        for _ in 0..RANDOM_SYSTEMS {
            let (np, ns, nt) = (rng.gen_range(1..=3), rng.gen_range(1..=3), rng.gen_range(1..=3));
            let params = syms(&["w0", "w1", "w2"][..np]);
            let source = syms(&["y0", "y1", "y2"][..ns]);
            let target = syms(&["z0", "z1", "z2"][..nt]);
            let vars: Vec<Symbol> = params.iter().chain(&source).cloned().collect();
            let eval = (0..nt)
                .map(|_| {
                    (0..rng.gen_range(1..=5)).fold(Expr::zero(), |acc, _| {
                        let mut exps = vec![0u32; vars.len()];
                        for _ in 0..rng.gen_range(0..=3) {
                            exps[rng.gen_range(0..vars.len())] += 1;
                        }
                        &acc + &(&Expr::int(rng.gen_range(-3..=3)) * &monomial(&vars, &exps))
                    })
                })
                .collect();
            ok &= check_decomposition(&MapSystem::new(params, source, target, eval)?);
        }
        Ok(outcome(ok, format!("linear, affine and {RANDOM_SYSTEMS} random systems (deg <= 3, dims <= 3)")))
    })
}

fn square_family() -> jetfield::Result<MapSystem> {
    let e = &Expr::symbol("w").pow(2) * &Expr::symbol("y");
    MapSystem::new(syms(&["w"]), syms(&["y"]), syms(&["z"]), vec![e])
}

fn non_injectivity() -> Outcome {
    guard(|| {
        let sys = square_family()?;
        let lam = Expr::symbol("lam");
        let c1 = Curve::symbolic(syms(&["w"]), Interval::real_line(), vec![lam.clone()])?;
        let c2 = Curve::symbolic(syms(&["w"]), Interval::real_line(), vec![-&lam])?;
        let real = Realizations::new();
        let contact = first_order_contact(&sys, (&c1, 1.0), (&c2, -1.0), &[], &real)?;
        let r1 = tangent_rep_map_space(&sys, &c1, 1.0, &real)?;
        let r2 = tangent_rep_map_space(&sys, &c2, -1.0, &real)?;
        let two_y = &Expr::int(2) * &Expr::symbol("y");
        let tv1 = (c1.value(1.0, &real)?, c1.velocity(1.0, &real)?);
        let tv2 = (c2.value(-1.0, &real)?, c2.velocity(-1.0, &real)?);
        let pass = contact.contact && r1 == r2 && r1.dotted == vec![two_y.clone()] && tv1 != tv2;
        Ok(outcome(
            pass,
            format!(
                "contact = {}, d_z = {} vs {} (expected both {}), TS vectors {:?} vs {:?}",
                contact.contact, r1.dotted[0], r2.dotted[0], two_y, tv1, tv2
            ),
        ))
    })
}

fn injectivity() -> Outcome {
    guard(|| {
        let grid: Vec<f64> = vec![-2.0, -1.0, 0.0, 1.0, 2.0];
        let real = Realizations::new();
        let verdict = |k: u32| -> jetfield::Result<InjectivityOutcome> {
            let e = &Expr::symbol("w").pow(k) * &Expr::symbol("y");
            let sys = MapSystem::new(syms(&["w"]), syms(&["y"]), syms(&["z"]), vec![e])?;
            Ok(injectivity_probe(&sys, std::slice::from_ref(&grid), std::slice::from_ref(&grid), &real)?.outcome)
        };
        let (e1, e2, e3) = (verdict(1)?, verdict(3)?, verdict(2)?);
        let expected = InjectivityOutcome::Counterexample { s: vec![1.0], s_prime: vec![-1.0] };
        let pass = e1 == InjectivityOutcome::NoCollisionFound && e2 == InjectivityOutcome::NoCollisionFound && e3 == expected;
        Ok(outcome(pass, format!("wy: {e1:?}, w^3y: {e2:?}, w^2y: {e3:?}")))
    })
}

fn liouville() -> Outcome {
    guard(|| {
        let mut ok = true;
        for dim in 1..=3 {
            ok &= liouville_check(dim)?.passes();
        }
        Ok(outcome(ok, "dims 1-3, exact, normalization R = -2 d(lambda) = 2 omega"))
    })
}

fn curve_through(point: &[i64], rng: &mut ChaCha8Rng, codomain: &[Symbol]) -> jetfield::Result<Curve> {
    let lam = Expr::symbol("lam");
    let body = point
        .iter()
        .map(|&p| {
            let v = Expr::int(rng.gen_range(-3..=3));
            let a = Expr::int(rng.gen_range(-2..=2));
            &(&Expr::int(p) + &(&v * &lam)) + &(&a * &lam.pow(2))
        })
        .collect();
    Curve::symbolic(codomain.to_vec(), Interval::real_line(), body)
}

fn chart_invariance() -> Outcome {
    guard(|| {
        let mut rng = ChaCha8Rng::seed_from_u64(SEED);
        let s = |n: &str| Expr::symbol(n);
        let plane = DoubleFibredFrame::from_blocks(syms(&["x"]), syms(&["y0", "y1"]), syms(&["z0"]))?;
        let plane_eval = vec![&(&s("w00") * &s("y0")) + &(&s("w01") * &s("y1"))];
        let line = DoubleFibredFrame::from_blocks(syms(&["x"]), syms(&["y"]), syms(&["z"]))?;
        let cases = [
            (SectionSystem::new(plane, syms(&["w00", "w01"]), plane_eval, BundleKind::Vector)?, false),
            (SectionSystem::new(line, syms(&["w"]), vec![&s("w") * &s("y")], BundleKind::Vector)?, true),
        ];
        let mut ok = true;
        for (sys, opaques) in &cases {
            let codomain: Vec<Symbol> = sys.base().iter().chain(sys.params()).cloned().collect();
            let g = sys.frame().frame_g()?;
            for _ in 0..RANDOM_CHARTS {
                let point: Vec<i64> = (0..codomain.len()).map(|_| rng.gen_range(-2..=2)).collect();
                let a = tangent_rep_section(sys, &curve_through(&point, &mut rng, &codomain)?, 0.0)?;
                let b = tangent_rep_section(sys, &curve_through(&point, &mut rng, &codomain)?, 0.0)?;
                let ch = random_chart(&g, &mut rng, *opaques);
                ok &= chart_invariance_check(sys, &a, &b, &Expr::int(rng.gen_range(-3..=3)), &ch)?.holds();
                ok &= chart_invariance_check(sys, &a, &b, &s("r"), &ch)?.holds();
            }
        }
        Ok(outcome(ok, format!("{RANDOM_CHARTS} charts on a 2-D fibre, {RANDOM_CHARTS} opaque-coefficient charts on a 1-D instance")))
    })
}

fn smoothness() -> Outcome {
    guard(|| {
        let lam = Expr::symbol("lam");
        let body = &(&(&lam.pow(5) - &(&Expr::int(2) * &lam.pow(3))) + &lam) + &Expr::int(1);
        let poly = Curve::symbolic(syms(&["w"]), Interval::real_line(), vec![body])?;
        let real = Realizations::new();
        let v = smoothness_probe(|t| poly.value(t, &real), 0.3, 3)?;
        let mut rates = Vec::new();
        let mut ok = v.passes;
        for o in &v.orders {
            match o.rate {
                Some(r) => {
                    ok &= (r - NOMINAL_RATE).abs() <= RATE_TOLERANCE * NOMINAL_RATE;
                    rates.push(format!("{}:{r:.3}", o.order));
                }
                None => {
                    ok = false;
                    rates.push(format!("{}:none", o.order));
                }
            }
        }
        let kink = smoothness_probe(|t: f64| Ok(vec![t.abs()]), 0.0, 3)?;
        let cusp = smoothness_probe(|t: f64| Ok(vec![t.cbrt()]), 0.0, 3)?;
        ok &= kink.failed_order == Some(1) && cusp.failed_order == Some(1);
        Ok(outcome(
            ok,
            format!(
                "quintic rates [{}], |lam| fails at order {:?}, cbrt fails at order {:?}",
                rates.join(", "),
                kink.failed_order,
                cusp.failed_order
            ),
        ))
    })
}

const BASE: [&str; 2] = ["x0", "x1"];
const TARGETS: [&str; 2] = ["z0", "z1"];

fn frame_args() -> Vec<Expr> {
    ["x0", "x1", "y0"].iter().map(|s| Expr::symbol(*s)).collect()
}

fn phi(z: &str, partials: Vec<usize>) -> Expr {
    Expr::apply_partial(Symbol::new(format!("phi_{z}")), partials, frame_args())
}

/// A random `Γ`-style recipe table; non-linear extras are added with
/// probability one half per entry when `extras` is set. Returns the table
/// and whether it is linear by construction.
fn random_recipe(rng: &mut ChaCha8Rng, extras: bool) -> (Vec<Vec<Expr>>, bool) {
    let base = syms(&BASE);
    let mut linear = true;
    let table = (0..TARGETS.len())
        .map(|a| {
            (0..BASE.len())
                .map(|l| {
                    let mut e = Expr::zero();
                    for (b, z) in TARGETS.iter().enumerate() {
                        let g = &Expr::int(rng.gen_range(-2..=2)) * &opaque(&format!("G{a}_{l}_{b}"), &base);
                        e = &e + &(&g * &phi(z, vec![]));
                        let f = &Expr::int(rng.gen_range(-2..=2)) * &Expr::symbol("y0");
                        e = &e + &(&f * &phi(z, vec![2]));
                    }
                    if extras && rng.gen_bool(0.5) {
                        linear = false;
                        let c = Expr::int([-2, -1, 1, 2][rng.gen_range(0..4)]);
                        let extra = match rng.gen_range(0..3) {
                            0 => phi("z0", vec![]).pow(2),
                            1 => &phi("z0", vec![]) * &phi("z1", vec![2]),
                            _ => opaque(&format!("H{a}_{l}"), &base),
                        };
                        e = &e + &(&c * &extra);
                    }
                    e
                })
                .collect()
        })
        .collect();
    (table, linear)
}

fn operators() -> Outcome {
    guard(|| {
        let frame = DoubleFibredFrame::from_blocks(syms(&BASE), syms(&["y0"]), syms(&TARGETS))?;
        let y = Expr::symbol("y0");
        let eval = vec![&Expr::symbol("w0") * &y, &Expr::symbol("w1") * &y];
        let sys = SectionSystem::new(frame, syms(&["w0", "w1"]), eval, BundleKind::Vector)?;
        let mut rng = ChaCha8Rng::seed_from_u64(SEED);
        let mut round_trips = 0;
        for _ in 0..RANDOM_RECIPES {
            let (r, _) = random_recipe(&mut rng, false);
            let k = OperatorConnection::new(sys.clone(), r)?;
            let d = operator_from_connection(&k);
            if connection_from_operator(&d)? == k {
                round_trips += 1;
            }
        }
        let (mut r, _) = random_recipe(&mut rng, false);
        r[0][1] = &r[0][1] + &phi("z1", vec![0, 1]);
        let rejected = matches!(OperatorConnection::new(sys.clone(), r), Err(Error::HorizontalOrder(_)));
        let mut agree = 0;
        for _ in 0..RANDOM_RECIPES {
            let (r, linear) = random_recipe(&mut rng, true);
            if is_linear(&OperatorConnection::new(sys.clone(), r)?)? == linear {
                agree += 1;
            }
        }
        Ok(outcome(
            round_trips == RANDOM_RECIPES && rejected && agree == RANDOM_RECIPES,
            format!("{round_trips}/{RANDOM_RECIPES} round trips, order-2 rejected: {rejected}, linearity agrees {agree}/{RANDOM_RECIPES}"),
        ))
    })
}

fn model(name: &str) -> String {
    format!("{}/../../models/{name}", env!("CARGO_MANIFEST_DIR"))
}

fn full_suite_json() -> String {
    let (lin, sq, kinks, conn) = (model("linear_maps.jf"), model("squares.jf"), model("kinks.jf"), model("connections.jf"));
    let runs: Vec<Vec<&str>> = vec![
        vec!["verify-universal", "--linear", "2", "2"],
        vec!["verify-universal", "--affine", "2", "2"],
        vec!["verify-universal", "--generic", "2", "1", "1"],
        vec!["--model", &lin, "prolong", "--system", "lin"],
        vec!["--model", &sq, "contact", "--system", "sq", "--curves", "c1", "c2", "--at", "1", "-1"],
        vec!["--model", &lin, "rep", "--curve", "line", "--at", "0.5"],
        vec!["liouville", "--dim", "3"],
        vec!["--model", &kinks, "probe", "--curve", "cubic", "--at", "0.3", "--order", "3"],
        vec!["--model", &kinks, "probe", "--curve", "kink", "--at", "0", "--order", "1"],
        vec!["--model", &conn, "curvature", "--gamma", "g"],
        vec!["--model", &conn, "pullback", "--gamma", "g"],
        vec!["--model", &conn, "universal", "--system", "conn"],
        vec!["--model", &conn, "nabla", "--connection", "nabla", "--section", "sigma"],
    ];
    let mut all = String::new();
    for mut args in runs {
        args.extend(["--seed", "0", "--format", "json"]);
        all.push_str(&jetfield::cli::run(&args).0);
    }
    all
}

fn determinism() -> Outcome {
    let (a, b) = (full_suite_json(), full_suite_json());
    outcome(a == b, format!("{} bytes of JSON over 13 commands, identical: {}", a.len(), a == b))
}

fn main() {
    let criteria: Vec<Criterion> = vec![
        (1, "universal connection identity", || universal(false)),
        (2, "curvature pullback identity", || universal(true)),
        (3, "prolongation decomposition", decomposition),
        (4, "iota non-injectivity reproduction", non_injectivity),
        (5, "injectivity verdicts", injectivity),
        (6, "Liouville identification", liouville),
        (7, "chart invariance of vector operations", chart_invariance),
        (8, "smoothness probes", smoothness),
        (9, "operator/connection round trip", operators),
        (10, "determinism", determinism),
    ];
    let mut unexpected = Vec::new();
    for (n, name, f) in criteria {
        let o = f();
        let expected_fail = EXPECTED_FAILURES.contains(&n);
        let tag = match (o.pass, expected_fail) {
            (true, _) => "PASS",
            (false, true) => "FAIL (expected)",
            (false, false) => "FAIL",
        };
        println!("criterion {n:>2}: {tag:<15} {name}: {}", o.detail);
        if o.pass == expected_fail {
            unexpected.push(n);
        }
    }
    if !unexpected.is_empty() {
        eprintln!("unexpected outcome for criteria {unexpected:?}");
        std::process::exit(1);
    }
}
