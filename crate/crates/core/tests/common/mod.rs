//! Oracles shared by the integration suites. They rebuild curvature quantities
//! from the full four-index tensor instead of the closed-form plane weights.
#![allow(dead_code)]

use nalgebra::{Matrix2, Matrix3};
use warpcurv::curvature::CoordinateCurvatures;
use warpcurv::frame::PlanePair;

pub type Tensor4 = [[[[f64; 4]; 4]; 4]; 4];

fn put(t: &mut Tensor4, [a, b, c, d]: [usize; 4], x: f64) {
    for (p, q, r, s) in [(a, b, c, d), (c, d, a, b)] {
        t[p][q][r][s] = x;
        t[q][p][r][s] = -x;
        t[p][q][s][r] = -x;
        t[q][p][s][r] = x;
    }
}

/// Curvature tensor on `∂r, Y1, Y2, Y3` with `R(X, Y, Y, X)` the sectional numerator.
pub fn tensor(cc: &CoordinateCurvatures<f64>) -> Tensor4 {
    let mut t = [[[[0.0; 4]; 4]; 4]; 4];
    put(&mut t, [0, 1, 1, 0], cc.kr1);
    put(&mut t, [0, 2, 2, 0], cc.kr2);
    put(&mut t, [0, 3, 3, 0], cc.kr2);
    put(&mut t, [1, 2, 2, 1], cc.k21);
    put(&mut t, [1, 3, 3, 1], cc.k21);
    put(&mut t, [2, 3, 3, 2], cc.k32);
    put(&mut t, [0, 1, 2, 3], cc.mixed);
    put(&mut t, [0, 2, 3, 1], -cc.mixed / 2.0);
    put(&mut t, [0, 3, 1, 2], -cc.mixed / 2.0);
    t
}

pub fn form(t: &Tensor4, x: &[f64; 4], d: &[f64; 4], y: &[f64; 4]) -> f64 {
    let mut s = 0.0;
    for a in 0..4 {
        for b in 0..4 {
            for c in 0..4 {
                for e in 0..4 {
                    s += t[a][b][c][e] * x[a] * d[b] * d[c] * y[e];
                }
            }
        }
    }
    s
}

/// Sectional curvature of span(x, y) straight from the tensor.
pub fn tensor_sectional(t: &Tensor4, x: &[f64; 4], y: &[f64; 4]) -> f64 {
    let dot = |p: &[f64; 4], q: &[f64; 4]| p.iter().zip(q).map(|(a, b)| a * b).sum::<f64>();
    form(t, x, y, x) / (dot(x, x) * dot(y, y) - dot(x, y).powi(2))
}

pub fn pair_vectors(p: &PlanePair<f64>) -> ([f64; 4], [f64; 4]) {
    match *p {
        PlanePair::Generic { c, d } => (c, [0.0, d[0], d[1], 0.0]),
        PlanePair::Nongeneric { c, d } => ([c[0], c[1], c[2], 0.0], [d[0], d[1], 0.0, 0.0]),
    }
}

fn generic_at(t: &Tensor4, phi: f64) -> f64 {
    let (s, c) = phi.sin_cos();
    let d = [0.0, c, s, 0.0];
    let basis = [[1.0, 0.0, 0.0, 0.0], [0.0, 0.0, 0.0, 1.0], [0.0, -s, c, 0.0]];
    let q = Matrix3::from_fn(|i, j| form(t, &basis[i], &d, &basis[j]));
    q.symmetric_eigenvalues().max()
}

fn nongeneric_at(t: &Tensor4, phi: f64) -> f64 {
    let (s, c) = phi.sin_cos();
    let d = [c, s, 0.0, 0.0];
    let basis = [[-s, c, 0.0, 0.0], [0.0, 0.0, 1.0, 0.0]];
    let q = Matrix2::from_fn(|i, j| form(t, &basis[i], &d, &basis[j]));
    q.symmetric_eigenvalues().max()
}

fn golden_max(f: &dyn Fn(f64) -> f64, mut lo: f64, mut hi: f64) -> f64 {
    let g = (5f64.sqrt() - 1.0) / 2.0;
    for _ in 0..100 {
        let (a, b) = (hi - g * (hi - lo), lo + g * (hi - lo));
        if f(a) < f(b) {
            lo = a;
        } else {
            hi = b;
        }
    }
    f(0.5 * (lo + hi))
}

/// Sup over both plane families: for each direction `D` the best `C ⟂ D` is
/// the top eigenvalue of `C ↦ R(C, D, D, C)`; `D` is scanned then refined.
pub fn plane_sup_oracle(cc: &CoordinateCurvatures<f64>, steps: usize) -> f64 {
    let t = tensor(cc);
    let mut best = f64::NEG_INFINITY;
    let fams: [&dyn Fn(f64) -> f64; 2] = [&|p| generic_at(&t, p), &|p| nongeneric_at(&t, p)];
    for f in fams {
        let h = std::f64::consts::PI / steps as f64;
        let (mut top, mut at) = (f64::NEG_INFINITY, 0.0);
        for i in 0..steps {
            let x = f(i as f64 * h);
            if x > top {
                top = x;
                at = i as f64 * h;
            }
        }
        best = best.max(top).max(golden_max(f, at - h, at + h));
    }
    best
}
