use jetfield::expr::{
    canonicalize, eval_numeric, random_realizations, Binding, Expr, Point, Rational, Symbol, Tree,
};
use num_bigint::BigInt;
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

const VARS: [&str; 3] = ["x", "w", "y"];

fn leaf() -> impl Strategy<Value = Tree> {
    prop_oneof![
        (-3i64..=3).prop_map(|n| Tree::Num(Rational::from_integer(BigInt::from(n)))),
        prop::sample::select(VARS.to_vec()).prop_map(Tree::sym),
    ]
}

fn tree() -> impl Strategy<Value = Tree> {
    leaf().prop_recursive(5, 24, 2, |inner| {
        prop_oneof![
            (inner.clone(), inner.clone()).prop_map(|(a, b)| Tree::Add(Box::new(a), Box::new(b))),
            (inner.clone(), inner.clone()).prop_map(|(a, b)| Tree::Sub(Box::new(a), Box::new(b))),
            (inner.clone(), inner.clone()).prop_map(|(a, b)| Tree::Mul(Box::new(a), Box::new(b))),
            inner.clone().prop_map(|a| Tree::Neg(Box::new(a))),
            (inner.clone(), 0u32..=2).prop_map(|(a, n)| Tree::Pow(Box::new(a), n)),
            inner.clone().prop_map(|a| Tree::Call {
                name: "g".into(),
                partials: vec![],
                args: vec![a],
                at: 0
            }),
            (inner.clone(), inner, prop::collection::vec(0usize..2, 0..2)).prop_map(|(a, b, p)| {
                Tree::Call {
                    name: "f".into(),
                    partials: p,
                    args: vec![a, b],
                    at: 0,
                }
            }),
        ]
    })
}

fn polynomial_tree() -> impl Strategy<Value = Tree> {
    leaf().prop_recursive(4, 16, 2, |inner| {
        prop_oneof![
            (inner.clone(), inner.clone()).prop_map(|(a, b)| Tree::Add(Box::new(a), Box::new(b))),
            (inner.clone(), inner.clone()).prop_map(|(a, b)| Tree::Mul(Box::new(a), Box::new(b))),
            (inner, 0u32..=3).prop_map(|(a, n)| Tree::Pow(Box::new(a), n)),
        ]
    })
}

fn var() -> impl Strategy<Value = Symbol> {
    prop::sample::select(VARS.to_vec()).prop_map(Symbol::new)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(1000))]

    #[test]
    fn canonicalization_is_idempotent(t in tree()) {
        prop_assume!(t.depth() <= 6);
        let once = canonicalize(&t);
        let twice = canonicalize(&once.to_tree());
        prop_assert_eq!(once, twice);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn partial_is_linear(a in tree(), b in tree(), k in -4i64..=4, s in var()) {
        let (a, b) = (canonicalize(&a), canonicalize(&b));
        let k = Expr::int(k);
        let lhs = (&(&k * &a) + &b).partial(&s);
        let rhs = &(&k * &a.partial(&s)) + &b.partial(&s);
        prop_assert_eq!(lhs, rhs);
    }

    #[test]
    fn partials_commute(t in tree(), s in var(), u in var()) {
        let e = canonicalize(&t);
        prop_assert_eq!(e.partial(&s).partial(&u), e.partial(&u).partial(&s));
    }

    #[test]
    fn substitution_chain_law(t in tree(), g in tree()) {
        // d/dx e[w := g] = (d/dx e)[w := g] + (d/dw e)[w := g] * d/dx g
        let e = canonicalize(&t);
        let g = canonicalize(&g);
        let (x, w) = (Symbol::new("x"), Symbol::new("w"));
        // g must not mention w for the binding to be a pullback
        let g = g.substitute(&Binding::new().with("w", Expr::symbol("y")));
        let b = Binding::new().with(w.clone(), g.clone());
        let lhs = e.substitute(&b).partial(&x);
        let rhs = &e.partial(&x).substitute(&b) + &(&e.partial(&w).substitute(&b) * &g.partial(&x));
        prop_assert_eq!(lhs, rhs);
    }

    #[test]
    fn derivative_matches_central_difference(
        t in tree(),
        s in var(),
        coords in prop::collection::vec((-8i32..=8, 1i32..=4), 3),
        seed in any::<u64>(),
    ) {
        let e = canonicalize(&t);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let real = random_realizations(&e.opaques(), &mut rng);
        let point: Point = VARS.iter().zip(&coords)
            .map(|(n, (p, q))| (Symbol::new(n), f64::from(*p) / f64::from(*q)))
            .collect();
        let h = 1e-5;
        let shifted = |delta: f64| {
            let mut p = point.clone();
            *p.get_mut(&s).unwrap() += delta;
            eval_numeric(&e, &p, &real).unwrap()
        };
        let fd = (shifted(h) - shifted(-h)) / (2.0 * h);
        let exact = eval_numeric(&e.partial(&s), &point, &real).unwrap();
        let scale = 1.0 + exact.abs();
        // central differences lose digits on large values; only compare where
        // rounding error (~1e-16 * |f| / h) stays far below the tolerance
        let magnitude = shifted(0.0).abs().max(shifted(h).abs());
        prop_assume!(magnitude < 1e3);
        prop_assert!((fd - exact).abs() <= 1e-6 * scale, "fd {} exact {}", fd, exact);
    }
}

#[test]
fn polynomial_trees_expand_consistently() {
    let mut runner = proptest::test_runner::TestRunner::deterministic();
    runner
        .run(&polynomial_tree(), |t| {
            let e = canonicalize(&t);
            prop_assert!(!e.contains_opaque());
            prop_assert_eq!(canonicalize(&e.to_tree()), e);
            Ok(())
        })
        .unwrap();
}
