mod common;

use common::{nonzero_poly, poly, syms};
use jetfield::expr::{eval_numeric, Expr, Point, Realizations, Symbol};
use jetfield::fsmooth::{first_order_contact, member, tangent_rep_map_space, CurveFamily, FamilyKind, Interval, Curve};
use jetfield::geometry::dotted;
use jetfield::map_systems::{
    check_decomposition, injectivity_probe, iota, partial_tangent_2, prolong_kind, InjectivityOutcome, MapSystem,
    ProlongKind,
};
use proptest::prelude::*;

fn system_strategy() -> impl Strategy<Value = MapSystem> {
    (1usize..=3, 1usize..=3, 1usize..=3).prop_flat_map(|(np, ns, nt)| {
        let params = syms(&["w0", "w1", "w2"][..np]);
        let source = syms(&["y0", "y1", "y2"][..ns]);
        let target = syms(&["z0", "z1", "z2"][..nt]);
        let vars: Vec<Symbol> = params.iter().chain(&source).cloned().collect();
        prop::collection::vec(poly(vars, 3, 4), nt)
            .prop_map(move |eval| MapSystem::new(params.clone(), source.clone(), target.clone(), eval).unwrap())
    })
}

/// `Σ_k P_k(w) y^k` with `deg_y ≤ 3`: equal at five witnesses means equal.
fn separable_strategy() -> impl Strategy<Value = MapSystem> {
    prop::collection::vec(poly(syms(&["w"]), 3, 3), 1..=3).prop_map(|ps| {
        let y = Expr::symbol("y");
        let e = ps.iter().enumerate().fold(Expr::zero(), |acc, (k, p)| &acc + &(p * &y.pow(k as u32)));
        MapSystem::new(syms(&["w"]), syms(&["y"]), syms(&["z"]), vec![e]).unwrap()
    })
}

fn grid() -> Vec<f64> {
    vec![-2.0, -1.0, 0.0, 1.0, 2.0]
}

fn curve(body: Vec<Expr>, params: &[Symbol]) -> Curve {
    Curve::symbolic(params.to_vec(), Interval::real_line(), body).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn prolongations_project_and_decompose(sys in system_strategy()) {
        prop_assert!(check_decomposition(&sys));
        for kind in [ProlongKind::Total, ProlongKind::P1, ProlongKind::P2] {
            let p = prolong_kind(&sys, kind);
            prop_assert_eq!(p.values.values(), sys.eval().values());
            let dots: Vec<Symbol> = sys.target().iter().map(dotted).collect();
            prop_assert_eq!(p.dotted.targets(), dots.as_slice());
        }
    }

    #[test]
    fn collisions_survive_second_partial_prolongation(sys in separable_strategy()) {
        let real = Realizations::new();
        let v = injectivity_probe(&sys, &[grid()], &[grid()], &real).unwrap();
        if let InjectivityOutcome::Counterexample { s, s_prime } = v.outcome {
            let p2 = partial_tangent_2(&sys);
            for y in grid() {
                for dy in [-1.5, 0.5, 2.0] {
                    let at = |w: f64| -> Point {
                        [("w", w), ("y", y), ("d_y", dy)].into_iter().map(|(k, v)| (Symbol::new(k), v)).collect()
                    };
                    for e in p2.values.values().iter().chain(p2.dotted.values()) {
                        let a = eval_numeric(e, &at(s[0]), &real).unwrap();
                        let b = eval_numeric(e, &at(s_prime[0]), &real).unwrap();
                        prop_assert!((a - b).abs() <= 1e-9 * (1.0 + a.abs()));
                    }
                }
            }
        }
    }

    #[test]
    fn contact_is_an_equivalence(
        sys in separable_strategy(),
        base in poly(syms(&["lam"]), 1, 2),
        bends in prop::collection::vec(-3i64..=3, 3),
        other in poly(syms(&["lam"]), 3, 4),
    ) {
        let w = syms(&["w"]);
        let lam = Expr::symbol("lam");
        let mut curves: Vec<Curve> = bends
            .iter()
            .map(|&k| curve(vec![&base + &(&Expr::int(k) * &lam.pow(2))], &w))
            .collect();
        curves.push(curve(vec![other], &w));
        let wit = vec![vec![-1.0], vec![0.5], vec![2.0]];
        let real = Realizations::new();
        let c = |i: usize, j: usize| first_order_contact(&sys, (&curves[i], 0.0), (&curves[j], 0.0), &wit, &real).unwrap().contact;
        for i in 0..4 {
            prop_assert!(c(i, i));
            for j in 0..4 {
                prop_assert_eq!(c(i, j), c(j, i));
                for k in 0..4 {
                    if c(i, j) && c(j, k) {
                        prop_assert!(c(i, k));
                    }
                }
            }
        }
        // the three bent curves share a 1-jet at 0
        prop_assert!(c(0, 1) && c(1, 2));
        for i in 0..4 {
            for j in 0..4 {
                let a = tangent_rep_map_space(&sys, &curves[i], 0.0, &real).unwrap();
                let b = tangent_rep_map_space(&sys, &curves[j], 0.0, &real).unwrap();
                prop_assert_eq!(c(i, j), a == b);
            }
        }
    }

    #[test]
    fn fibrewise_operations_are_a_vector_space(
        sys in separable_strategy(),
        w in -3i64..=3,
        v in prop::collection::vec(-3i64..=3, 3),
        r in -3i64..=3,
        s in -3i64..=3,
    ) {
        let at = |d: i64| iota(&sys, &[Expr::int(w)], &[Expr::int(d)]).unwrap();
        let (a, b, c) = (at(v[0]), at(v[1]), at(v[2]));
        let zero = at(0);
        let (r, s) = (Expr::int(r), Expr::int(s));
        prop_assert_eq!(a.add(&b).unwrap(), b.add(&a).unwrap());
        prop_assert_eq!(a.add(&b).unwrap().add(&c).unwrap(), a.add(&b.add(&c).unwrap()).unwrap());
        prop_assert_eq!(a.add(&zero).unwrap(), a.clone());
        prop_assert_eq!(a.add(&a.scale(&Expr::int(-1))).unwrap(), zero.clone());
        prop_assert_eq!(a.scale(&Expr::one()), a.clone());
        prop_assert_eq!(a.scale(&(&r * &s)), a.scale(&s).scale(&r));
        prop_assert_eq!(a.add(&b).unwrap().scale(&r), a.scale(&r).add(&b.scale(&r)).unwrap());
        prop_assert_eq!(a.scale(&(&r + &s)), a.scale(&r).add(&a.scale(&s)).unwrap());
        // iota is linear in the velocity at a fixed point
        prop_assert_eq!(a.add(&b).unwrap(), at(v[0] + v[1]));
    }

    #[test]
    fn membership_survives_affine_reparametrisation(
        sys in separable_strategy(),
        body in nonzero_poly(syms(&["lam"]), 3, 3),
        alpha in common::unit(),
        beta in -2i64..=2,
    ) {
        let w = syms(&["w"]);
        let c = curve(vec![body], &w);
        let gamma = &(&Expr::int(alpha) * &Expr::symbol("lam")) + &Expr::int(beta);
        let cr = c.reparametrize(&gamma, Interval::real_line()).unwrap();
        let fams = [
            CurveFamily::new(w.clone(), FamilyKind::Smooth).unwrap(),
            CurveFamily::new(w.clone(), FamilyKind::Constants).unwrap(),
            CurveFamily::new(
                w.clone(),
                FamilyKind::System { sys: sys.clone(), witnesses: vec![vec![-1.0], vec![1.0]], real: Realizations::new() },
            )
            .unwrap(),
        ];
        for f in &fams {
            let a = member(f, &c, &[]).unwrap();
            let b = member(f, &cr, &[]).unwrap();
            prop_assert_eq!(a.member, b.member);
            prop_assert_eq!(a.method, "exact");
        }
    }
}
