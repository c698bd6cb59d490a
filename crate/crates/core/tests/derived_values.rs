//! Values computed once by independent oracles and frozen here.

use warpcurv::convex::{c1_convergence_probe, mollify, smooth_at, Expr, MollifierSpec, PiecewiseExpr};
use warpcurv::profiles::*;

fn bisect(f: impl Fn(f64) -> f64, mut lo: f64, mut hi: f64) -> f64 {
    assert!(f(lo) < 0.0 && f(hi) > 0.0);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if f(mid) < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

/// Composite Simpson rule with `n` (even) panels.
fn simpson(f: impl Fn(f64) -> f64, a: f64, b: f64, n: usize) -> f64 {
    let h = (b - a) / n as f64;
    let inner: f64 = (1..n).map(|i| f(a + i as f64 * h) * if i % 2 == 1 { 4.0 } else { 2.0 }).sum();
    (f(a) + f(b) + inner) * h / 3.0
}

// Frozen from the bisection oracle below.
const R_EPS_0_1: f64 = 0.11157177565710488;
const R_EPS_0_25: f64 = 0.34657359027997264;

#[test]
fn r_epsilon_oracle_and_frozen_values() {
    for (eps, frozen) in [(0.1, R_EPS_0_1), (0.25, R_EPS_0_25)] {
        let oracle = bisect(|r: f64| r.sinh() - eps * r.exp(), 0.0, 1.0);
        assert!((oracle - frozen).abs() < 1e-15, "oracle {oracle} vs frozen {frozen}");
        let closed = -0.5 * (1.0 - 2.0 * eps).ln();
        assert!((closed - frozen).abs() < 1e-13);
        assert!((solve_r_epsilon(eps).unwrap() - frozen).abs() < 1e-13);
    }
}

#[test]
fn half_of_r_minus_at_eps_tenth() {
    let p = EpsilonParams::practical(0.1).unwrap();
    let v = VProfile::build(&p).unwrap();
    let h = HProfile::build(&p, &v).unwrap();
    assert!((h.rho - 0.05573588782855244).abs() < 1e-15, "{}", h.rho);
}

#[test]
fn v_is_exact_away_from_the_windows() {
    let eps = 0.1;
    let p = EpsilonParams::practical(eps).unwrap();
    let v = VProfile::build(&p).unwrap();
    let left = v.r_minus - 2.0 * p.sigma;
    assert_eq!(eval_profile(&v, left).unwrap()[0], eps * left.exp());
    let right = v.r_plus + 1.0;
    assert_eq!(eval_profile(&v, right).unwrap()[0], right.sinh());
    for i in 1..1000 {
        let r = v.r_minus + (v.r_plus - v.r_minus) * i as f64 / 1000.0;
        assert!(v.c1_base().eval(r)[2] > 0.0, "(ln v)'' <= 0 at {r}");
    }
}

#[test]
fn v_verifier_passes_and_reports_a_c1_violation() {
    let p = EpsilonParams::practical(0.1).unwrap();
    let v = VProfile::build(&p).unwrap();
    let report = verify_v(&v, &ProfileGrid::default());
    assert!(report.passes(), "{report:?}");

    let coarse = EpsilonParams::new(0.1, 1e-5, 2e-6, false).unwrap();
    let vc = VProfile::build(&coarse).unwrap();
    let tight = ProfileGrid { c1_tolerance: 1e-15, ..ProfileGrid::default() };
    let report = verify_v(&vc, &tight);
    let c1 = report.checks.iter().find(|c| c.name.contains("C1-close")).unwrap();
    assert!(!c1.pass && c1.margin < 0.0, "{c1:?}");
}

#[test]
fn twice_mollified_kink_has_second_derivative_int_theta_squared() {
    let kink = PiecewiseExpr::new(vec![0.0], vec![Expr::affine(1.0, 0.0), Expr::affine(2.0, 0.0)]).unwrap();
    for delta in [0.3, 0.01] {
        let spec = MollifierSpec::new(delta).unwrap();
        let value = mollify(&kink, &spec, 2, 2, 0.0).unwrap();
        let oracle = simpson(|y| spec.kernel(y).powi(2), -delta, delta, 20_000);
        assert!(value >= 1.0 / (2.0 * delta));
        assert!((value - oracle).abs() < 1e-9 * oracle, "{value} vs {oracle}");
    }
}

#[test]
fn kink_deviation_scales_with_delta() {
    let kink = PiecewiseExpr::new(vec![0.0], vec![Expr::affine(1.0, 0.0), Expr::affine(2.0, 0.0)]).unwrap();
    // a pure kink is scale invariant, so the deviation at the corner is linear in δ
    let at_corner: Vec<f64> = [1e-2, 1e-3, 1e-4]
        .iter()
        .map(|&d| smooth_at(&kink, 0.0, d, 0.05).unwrap().eval(0.0)[0])
        .collect();
    for w in at_corner.windows(2) {
        assert!((w[0] / w[1] - 10.0).abs() < 1e-9, "{at_corner:?}");
    }
    let rows = c1_convergence_probe(&kink, 0.0, 0.05, &[1e-2, 1e-3, 1e-4]).unwrap();
    for w in rows.windows(2) {
        assert!(w[1].sup_value < w[0].sup_value && w[1].sup_slope < w[0].sup_slope, "{rows:?}");
    }
    assert!(rows[0].sup_value > 0.9 * at_corner[0] && rows[2].sup_value <= at_corner[2], "{rows:?}");
}
