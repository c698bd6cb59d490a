use proptest::prelude::*;
use warpcurv::cli::{fmt17, ConfigFile};
use warpcurv::convex::{Expr, PiecewiseExpr, SmoothedFunction};
use warpcurv::curvature::*;
use warpcurv::frame::{coefficient_identity_residual, make_nongeneric_pair, make_plane_pair, PlanePair};
use warpcurv::search::{PlaneSearch, SearchSpec};
use warpcurv::symbolic::{Monomial, Rational, TailPoint, TailPolynomial};

fn jet() -> impl Strategy<Value = [f64; 3]> {
    (0.2f64..3.0, -2.0f64..2.0, -2.0f64..2.0).prop_map(|(a, b, c)| [a, b, c])
}

fn state() -> impl Strategy<Value = WarpState<f64>> {
    (-3.0f64..3.0, jet(), jet()).prop_map(|(r, v, h)| WarpState::new(r, v, h).unwrap())
}

fn generic_pair() -> impl Strategy<Value = PlanePair<f64>> {
    (prop::array::uniform4(-1.0f64..1.0), any::<u64>())
        .prop_filter_map("zero vector", |(c, s)| make_plane_pair(c, s).ok())
}

fn nongeneric_pair() -> impl Strategy<Value = PlanePair<f64>> {
    (prop::array::uniform3(-1.0f64..1.0), any::<u64>())
        .prop_filter_map("zero vector", |(c, s)| make_nongeneric_pair(c, s).ok())
}

fn any_pair() -> impl Strategy<Value = PlanePair<f64>> {
    prop_oneof![generic_pair(), nongeneric_pair()]
}

fn flip(p: PlanePair<f64>) -> PlanePair<f64> {
    match p {
        PlanePair::Generic { c, d } => PlanePair::Generic { c, d: d.map(|x| -x) },
        PlanePair::Nongeneric { c, d } => PlanePair::Nongeneric { c, d: d.map(|x| -x) },
    }
}

fn poly() -> impl Strategy<Value = TailPolynomial> {
    prop::collection::vec((-5i128..5, 1i128..4, 0u32..4, 0u32..3, 0u32..2, 0u32..2), 0..6).prop_map(|terms| {
        terms.into_iter().fold(TailPolynomial::zero(), |acc, (n, d, f, u, eps, c)| {
            acc.add(&TailPolynomial::term(Rational::new(n, d), Monomial { f, u, eps, c }))
        })
    })
}

proptest! {
    #[test]
    fn pairs_are_orthonormal_and_weights_sum_to_one(p in any_pair()) {
        prop_assert!(p.orthonormality_defect() < 1e-12);
        prop_assert!(coefficient_identity_residual(&p) < 1e-12);
    }

    #[test]
    fn curvature_ignores_orientation_of_d(ws in state(), c in -0.5f64..0.5, p in any_pair()) {
        let cc = coordinate_curvatures(&ws, c).unwrap();
        let (a, b) = (sectional_curvature(&cc, &p), sectional_curvature(&cc, &flip(p)));
        prop_assert!((a - b).abs() <= 1e-13 * a.abs().max(1.0));
    }

    #[test]
    fn sectional_curvature_is_a_convex_combination(ws in state(), c in -0.5f64..0.5, p in any_pair()) {
        let cc = coordinate_curvatures(&ws, c).unwrap();
        let k = sectional_curvature(&cc, &p);
        let m = cc.mixed.abs() * 1.5;
        let lo = cc.k21.min(cc.k32).min(cc.kr1).min(cc.kr2) - m;
        let hi = cc.k21.max(cc.k32).max(cc.kr1).max(cc.kr2) + m;
        prop_assert!(lo - 1e-12 <= k && k <= hi + 1e-12);
    }

    #[test]
    fn complex_hyperbolic_pinching(r in 0.01f64..10.0, c in -0.5f64..0.5, p in any_pair()) {
        let cc = coordinate_curvatures(&WarpState::complex_hyperbolic(r), c).unwrap();
        let k = sectional_curvature(&cc, &p);
        prop_assert!((-1.0 - 1e-9..=-0.25 + 1e-9).contains(&k), "K = {}", k);
    }

    #[test]
    fn single_precision_tracks_double(ws in state(), c in -0.5f64..0.5) {
        let lo = WarpState::new(ws.r as f32, [ws.v as f32, ws.v1 as f32, ws.v2 as f32], [ws.h as f32, ws.h1 as f32, ws.h2 as f32]).unwrap();
        let (a, b) = (coordinate_curvatures(&ws, c).unwrap(), coordinate_curvatures(&lo, c as f32).unwrap());
        for (x, y) in [(a.k21, b.k21), (a.k32, b.k32), (a.kr1, b.kr1), (a.kr2, b.kr2), (a.mixed, b.mixed)] {
            prop_assert!((x - y as f64).abs() <= 1e-4 * x.abs().max(1.0));
        }
    }

    #[test]
    fn leibniz_rule(p in poly(), q in poly()) {
        let lhs = p.mul(&q).derive();
        let rhs = p.derive().mul(&q).add(&p.mul(&q.derive()));
        prop_assert_eq!(lhs, rhs);
    }

    #[test]
    fn derivation_matches_tail_differences(p in poly(), r in -8.0f64..0.0, tau in 0.01f64..1.0) {
        let at = |r: f64| {
            let x = (0.5 * r).exp();
            p.eval(&TailPoint { f: 0.5 * x / (tau + x), u: 1.0 / (tau + x), eps: 0.1, c: 0.3 })
        };
        let h = 1e-3;
        let fd = (at(r - 2.0 * h) - 8.0 * at(r - h) + 8.0 * at(r + h) - at(r + 2.0 * h)) / (12.0 * h);
        let x = (0.5 * r).exp();
        let exact = p.derive().eval(&TailPoint { f: 0.5 * x / (tau + x), u: 1.0 / (tau + x), eps: 0.1, c: 0.3 });
        let scale = (0..=4).map(|k| at(r + (k as f64 - 2.0) * h).abs()).fold(1.0, f64::max);
        prop_assert!((fd - exact).abs() <= 1e-7 * scale, "{} vs {}", fd, exact);
    }

    #[test]
    fn smoothing_is_exact_outside_windows(
        a in -2.0f64..0.0, b in 0.1f64..2.0, k in 0.0f64..1.0, sigma in 0.01f64..0.5, x in -3.0f64..3.0,
    ) {
        let piece = |s: f64| Expr::Quadratic { coeff: k / 2.0, center: 0.0 }.plus(Expr::line(s, 0.0, 0.0));
        let base = PiecewiseExpr::single(piece(a)).splice(0.0, &PiecewiseExpr::single(piece(b))).unwrap();
        let mut sf = SmoothedFunction::new(base.clone());
        sf.add_window(0.0, sigma / 20.0, sigma).unwrap();
        prop_assume!(x.abs() >= sigma);
        prop_assert_eq!(sf.eval(x), base.eval(x));
    }

    #[test]
    fn csv_numbers_round_trip(x in any::<f64>().prop_filter("finite", |x| x.is_finite())) {
        prop_assert_eq!(fmt17(x).parse::<f64>().unwrap(), x);
    }

    #[test]
    fn flags_override_config(file in -1e3f64..1e3, flag in proptest::option::of(-1e3f64..1e3)) {
        let cfg = ConfigFile::parse(&format!("# comment\neps = {file}\n")).unwrap();
        let got = cfg.resolve("eps", flag, 0.5).unwrap();
        prop_assert_eq!(got, flag.unwrap_or(file));
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn sup_is_even_in_c23(ws in state(), c in 0.0f64..0.5) {
        let search = PlaneSearch::new(&SearchSpec::default());
        let plus = search.sup(&coordinate_curvatures(&ws, c).unwrap()).value;
        let minus = search.sup(&coordinate_curvatures(&ws, -c).unwrap()).value;
        prop_assert!((plus - minus).abs() <= 1e-9 * plus.abs().max(1.0), "{} vs {}", plus, minus);
    }

    #[test]
    fn sup_dominates_every_pair(ws in state(), c in -0.5f64..0.5, pairs in prop::collection::vec(any_pair(), 50)) {
        let cc = coordinate_curvatures(&ws, c).unwrap();
        let sup = PlaneSearch::new(&SearchSpec::default()).sup(&cc).value;
        for p in &pairs {
            prop_assert!(sectional_curvature(&cc, p) <= sup + 1e-12 * sup.abs().max(1.0));
        }
    }
}
