//! Maximization of the sectional curvature over plane pairs.
//!
//! Generic pairs are parameterized by hyperspherical angles of `C` on the
//! 3-sphere, with `D` resolved from the orthogonality constraint; nongeneric
//! pairs by two angles of `C` on the 2-sphere. A full grid is followed by
//! Nelder–Mead refinement of the best grid points.

use std::f64::consts::PI;

use serde::Serialize;

use crate::curvature::{
    coordinate_curvatures, generic_sectional, nongeneric_sectional, sectional_curvature, CoordinateCurvatures, WarpState,
};
use crate::error::Result;
use crate::frame::PlanePair;

/// Grid resolution and refinement budget for [`sup_sectional`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SearchSpec {
    /// Divisions per angle.
    pub divisions: usize,
    /// Number of best grid points refined.
    pub refine_starts: usize,
    /// Nelder–Mead iteration cap per start.
    pub refine_iterations: usize,
    /// Stop once the simplex values agree to this tolerance.
    pub tolerance: f64,
}

impl Default for SearchSpec {
    fn default() -> Self {
        Self { divisions: 24, refine_starts: 10, refine_iterations: 1000, tolerance: 1e-15 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SupResult {
    pub value: f64,
    pub pair: PlanePair<f64>,
}

#[derive(Clone, Copy)]
enum Family {
    Generic { sign: f64 },
    Nongeneric { sign: f64 },
}

fn generic_pair(a: &[f64], sign: f64) -> ([f64; 4], [f64; 2]) {
    let (s1, c1) = a[0].sin_cos();
    let (s2, c2) = a[1].sin_cos();
    let (s3, c3) = a[2].sin_cos();
    let c = [c1, s1 * c2, s1 * s2 * c3, s1 * s2 * s3];
    let planar = c[1].hypot(c[2]);
    let d = if planar > 0.0 { [-sign * c[2] / planar, sign * c[1] / planar] } else { [0.0, sign] };
    (c, d)
}

fn nongeneric_pair(a: &[f64], sign: f64) -> ([f64; 3], [f64; 2]) {
    let (s1, c1) = a[0].sin_cos();
    let (s2, c2) = a[1].sin_cos();
    let c = [s1 * c2, s1 * s2, c1];
    let planar = c[0].hypot(c[1]);
    let d = if planar > 0.0 { [-sign * c[1] / planar, sign * c[0] / planar] } else { [sign, 0.0] };
    (c, d)
}

fn evaluate(cc: &CoordinateCurvatures<f64>, family: Family, a: &[f64]) -> (f64, PlanePair<f64>) {
    match family {
        Family::Generic { sign } => {
            let (c, d) = generic_pair(a, sign);
            (generic_sectional(cc, c, d), PlanePair::Generic { c, d })
        }
        Family::Nongeneric { sign } => {
            let (c, d) = nongeneric_pair(a, sign);
            (nongeneric_sectional(cc, c, d), PlanePair::Nongeneric { c, d })
        }
    }
}

/// The six coordinate planes, listed exactly.
fn coordinate_planes() -> [PlanePair<f64>; 6] {
    [
        PlanePair::Nongeneric { c: [0.0, 1.0, 0.0], d: [1.0, 0.0] },
        PlanePair::Nongeneric { c: [0.0, 0.0, 1.0], d: [1.0, 0.0] },
        PlanePair::Nongeneric { c: [0.0, 0.0, 1.0], d: [0.0, 1.0] },
        PlanePair::Generic { c: [0.0, 0.0, 0.0, 1.0], d: [1.0, 0.0] },
        PlanePair::Generic { c: [0.0, 0.0, 0.0, 1.0], d: [0.0, 1.0] },
        PlanePair::Generic { c: [1.0, 0.0, 0.0, 0.0], d: [0.0, 1.0] },
    ]
}

#[derive(Clone, Copy)]
struct Candidate {
    value: f64,
    family: Family,
    angles: [f64; 3],
    dim: usize,
}

/// The `cap` best candidates, earlier grid points first among ties.
struct Leaders {
    cap: usize,
    list: Vec<Candidate>,
}

impl Leaders {
    fn offer(&mut self, cand: Candidate) {
        if self.list.len() == self.cap && !self.list.last().is_some_and(|w| cand.value > w.value) {
            return;
        }
        let at = self.list.partition_point(|x| x.value >= cand.value);
        self.list.insert(at, cand);
        self.list.truncate(self.cap);
    }
}

/// Maximizes `f` by Nelder–Mead from `start` with initial edge `step`.
fn nelder_mead(f: impl Fn(&[f64]) -> f64, start: &[f64], step: f64, iterations: usize, tol: f64) -> (f64, Vec<f64>) {
    let n = start.len();
    let mut simplex: Vec<(f64, Vec<f64>)> = (0..=n)
        .map(|i| {
            let mut x = start.to_vec();
            if i > 0 {
                x[i - 1] += step;
            }
            (f(&x), x)
        })
        .collect();
    let by_value = |a: &(f64, Vec<f64>), b: &(f64, Vec<f64>)| b.0.total_cmp(&a.0);
    for _ in 0..iterations {
        simplex.sort_by(by_value);
        if simplex[0].0 - simplex[n].0 <= tol {
            break;
        }
        let centroid: Vec<f64> =
            (0..n).map(|k| simplex[..n].iter().map(|p| p.1[k]).sum::<f64>() / n as f64).collect();
        let toward = |t: f64| -> Vec<f64> {
            centroid.iter().zip(&simplex[n].1).map(|(c, w)| c + t * (c - w)).collect()
        };
        let reflected = toward(1.0);
        let fr = f(&reflected);
        if fr > simplex[0].0 {
            let expanded = toward(2.0);
            let fe = f(&expanded);
            simplex[n] = if fe > fr { (fe, expanded) } else { (fr, reflected) };
        } else if fr > simplex[n - 1].0 {
            simplex[n] = (fr, reflected);
        } else {
            let contracted = if fr > simplex[n].0 { toward(0.5) } else { toward(-0.5) };
            let fc = f(&contracted);
            if fc > simplex[n].0.max(fr) {
                simplex[n] = (fc, contracted);
            } else {
                let best = simplex[0].1.clone();
                for p in simplex.iter_mut().skip(1) {
                    p.1 = best.iter().zip(&p.1).map(|(b, x)| b + 0.5 * (x - b)).collect();
                    p.0 = f(&p.1);
                }
            }
        }
    }
    simplex.sort_by(by_value);
    simplex.swap_remove(0)
}

#[derive(Clone, Copy)]
struct Node {
    family: Family,
    angles: [f64; 3],
    dim: usize,
    /// Coefficients of `(k21, kr1, kr2, k32, mixed)` in the curvature formula.
    weights: [f64; 5],
}

fn weights(pair: &PlanePair<f64>) -> [f64; 5] {
    match *pair {
        PlanePair::Generic { c: [c0, c1, c2, c3], d: [d1, d2] } => {
            let cross = d1 * c2 - d2 * c1;
            [
                cross * cross + d1 * d1 * c3 * c3,
                d1 * d1 * c0 * c0,
                d2 * d2 * c0 * c0,
                d2 * d2 * c3 * c3,
                3.0 * d1 * d2 * c0 * c3,
            ]
        }
        PlanePair::Nongeneric { c: [c0, c1, c2], d: [d0, d1] } => {
            let cross = d0 * c1 - d1 * c0;
            [d1 * d1 * c2 * c2, cross * cross, d0 * d0 * c2 * c2, 0.0, 0.0]
        }
    }
}

/// A [`SearchSpec`] with its grid of plane pairs precomputed, for repeated use.
pub struct PlaneSearch {
    spec: SearchSpec,
    step: f64,
    nodes: Vec<Node>,
}

impl PlaneSearch {
    pub fn new(spec: &SearchSpec) -> Self {
        let n = spec.divisions.max(2);
        let h = PI / n as f64;
        let mut nodes = Vec::with_capacity(2 * n * (n + 1) * (n + 2));
        // K(C, -D) = K(C, D): the opposite orientation of D would repeat every value
        let sign = 1.0;
        let family = Family::Generic { sign };
        for i in 0..=n {
            for j in 0..=n {
                for k in 0..2 * n {
                    let angles = [i as f64 * h, j as f64 * h, k as f64 * h];
                    let (c, d) = generic_pair(&angles, sign);
                    nodes.push(Node { family, angles, dim: 3, weights: weights(&PlanePair::Generic { c, d }) });
                }
            }
        }
        let family = Family::Nongeneric { sign };
        for i in 0..=n {
            for j in 0..2 * n {
                let angles = [i as f64 * h, j as f64 * h, 0.0];
                let (c, d) = nongeneric_pair(&angles[..2], sign);
                nodes.push(Node { family, angles, dim: 2, weights: weights(&PlanePair::Nongeneric { c, d }) });
            }
        }
        Self { spec: *spec, step: h, nodes }
    }

    pub fn spec(&self) -> &SearchSpec {
        &self.spec
    }

    /// Maximum sectional curvature over generic and nongeneric pairs.
    /// Deterministic for a fixed spec; never below the value at any grid pair.
    pub fn sup(&self, cc: &CoordinateCurvatures<f64>) -> SupResult {
        let mut leaders = Leaders { cap: self.spec.refine_starts.max(1), list: Vec::new() };
        let comps = [cc.k21, cc.kr1, cc.kr2, cc.k32, cc.mixed];
        for node in &self.nodes {
            let w = &node.weights;
            let value = w[0] * comps[0] + w[1] * comps[1] + w[2] * comps[2] + w[3] * comps[3] + w[4] * comps[4];
            if leaders.list.len() == leaders.cap && value <= leaders.list[leaders.cap - 1].value {
                continue;
            }
            leaders.offer(Candidate { value, family: node.family, angles: node.angles, dim: node.dim });
        }

        let mut best = SupResult { value: f64::NEG_INFINITY, pair: coordinate_planes()[0] };
        let mut consider = |value: f64, pair: PlanePair<f64>| {
            if value > best.value {
                best = SupResult { value, pair };
            }
        };
        for pair in coordinate_planes() {
            consider(sectional_curvature(cc, &pair), pair);
        }
        let top = leaders.list[0];
        let (value, pair) = evaluate(cc, top.family, &top.angles[..top.dim]);
        consider(value, pair);
        for cand in leaders.list.iter().take(self.spec.refine_starts) {
            let family = cand.family;
            let (_, x) = nelder_mead(
                |a| evaluate(cc, family, a).0,
                &cand.angles[..cand.dim],
                self.step / 2.0,
                self.spec.refine_iterations,
                self.spec.tolerance,
            );
            let (value, pair) = evaluate(cc, family, &x);
            consider(value, pair);
        }
        best
    }
}

/// One-off [`PlaneSearch::sup`].
pub fn sup_sectional_cc(cc: &CoordinateCurvatures<f64>, spec: &SearchSpec) -> SupResult {
    PlaneSearch::new(spec).sup(cc)
}

/// [`sup_sectional_cc`] for a warp state and `c23`.
pub fn sup_sectional(ws: &WarpState<f64>, c23: f64, spec: &SearchSpec) -> Result<SupResult> {
    Ok(sup_sectional_cc(&coordinate_curvatures(ws, c23)?, spec))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn constant_curvature() {
        let cc = CoordinateCurvatures { k21: -0.25, k32: -0.25, kr1: -0.25, kr2: -0.25, mixed: 0.0, c23: 0.0 };
        let s = sup_sectional_cc(&cc, &SearchSpec::default());
        assert!((s.value + 0.25).abs() < 1e-15);
    }

    #[test]
    fn complex_hyperbolic_upper_end() {
        for c23 in [0.0, 0.5, -0.5] {
            let ws = WarpState::complex_hyperbolic(1.0);
            let s = sup_sectional(&ws, c23, &SearchSpec::default()).unwrap();
            assert!((s.value + 0.25).abs() < 1e-8, "c23={c23}: {}", s.value);
            let cc = coordinate_curvatures(&ws, c23).unwrap();
            assert_eq!(sectional_curvature(&cc, &s.pair), s.value);
        }
    }

    #[test]
    fn refinement_finds_interior_maximum() {
        let cc = CoordinateCurvatures { k21: -1.0, k32: -0.8, kr1: -0.9, kr2: -0.7, mixed: 0.6, c23: 0.5 };
        let coarse = SearchSpec { refine_starts: 0, ..SearchSpec::default() };
        let a = sup_sectional_cc(&cc, &coarse).value;
        let b = sup_sectional_cc(&cc, &SearchSpec::default()).value;
        assert!(b >= a);
    }
}
