//! Verification campaigns: the complex hyperbolic identity suite, the
//! six-interval negativity scan, tail identities and the A-regularity program.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::convex::{grid, Jet, SmoothedFunction};
use crate::curvature::{
    coordinate_curvatures, coordinate_curvatures_from_ratios, scaled_fiber_curvatures, sectional_curvature,
    CoordinateCurvatures, WarpRatios, WarpState,
};
use crate::error::{Error, Result};
use crate::frame::{make_nongeneric_pair, make_plane_pair, PlanePair, StructureConstants};
use crate::profiles::{EpsilonParams, GProfile, HProfile, VProfile, WarpProfile};
use crate::search::{PlaneSearch, SearchSpec, SupResult};
use crate::symbolic::{covariant_derivative_closure, ClosureLevel, TailComponents, TailPoint};

/// Tolerance granted to non-strict inequalities that hold with equality at an endpoint.
const EQUALITY_SLACK: f64 = 1e-12;

/// A named check with its margin (positive or zero when it holds).
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Check {
    pub name: String,
    pub pass: bool,
    pub margin: f64,
}

impl Check {
    fn strict(name: impl Into<String>, margin: f64) -> Self {
        Self { name: name.into(), pass: margin > 0.0, margin }
    }

    fn weak(name: impl Into<String>, margin: f64) -> Self {
        Self { name: name.into(), pass: margin >= -EQUALITY_SLACK, margin }
    }

    /// `residual ≤ tol`, margin `tol - residual`.
    fn residual(name: impl Into<String>, residual: f64, tol: f64) -> Self {
        Self { name: name.into(), pass: residual <= tol, margin: tol - residual }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Range {
    pub min: f64,
    pub max: f64,
}

impl Range {
    fn empty() -> Self {
        Self { min: f64::INFINITY, max: f64::NEG_INFINITY }
    }

    fn include(&mut self, x: f64) {
        self.min = self.min.min(x);
        self.max = self.max.max(x);
    }

    fn merge(self, o: Range) -> Range {
        Range { min: self.min.min(o.min), max: self.max.max(o.max) }
    }
}

/// Sampling for [`verify_chn_suite`].
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ChnGridSpec {
    pub rmin: f64,
    pub rmax: f64,
    pub points: usize,
    /// Seeded random pairs per kind (generic and nongeneric).
    pub pairs: usize,
    pub seed: u64,
    pub c_values: Vec<f64>,
    pub tolerance: f64,
}

impl Default for ChnGridSpec {
    fn default() -> Self {
        Self {
            rmin: 0.01,
            rmax: 10.0,
            points: 1000,
            pairs: 10_000,
            seed: 7,
            c_values: vec![0.0, 0.1, -0.1, 0.25, -0.25, 0.5, -0.5],
            tolerance: 1e-12,
        }
    }
}

impl ChnGridSpec {
    pub fn validate(&self) -> Result<()> {
        if self.points == 0 || self.pairs == 0 {
            return Err(Error::Parameter("grid and pair counts must be positive".into()));
        }
        if !(self.rmin > 0.0 && self.rmin < self.rmax && self.rmax.is_finite()) {
            return Err(Error::Parameter(format!("need 0 < rmin < rmax, got {} and {}", self.rmin, self.rmax)));
        }
        if self.c_values.iter().any(|c| !(c.abs() <= 0.5)) {
            return Err(Error::Parameter("c23 values must lie in [-1/2, 1/2]".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ChnReport {
    pub spec: ChnGridSpec,
    pub pinching: Range,
    pub pairs_per_point: usize,
    pub k21_residual: f64,
    pub mixed_factor_residual: f64,
    pub mixed_residual: f64,
    pub scaling_chain_residual: f64,
    pub checks: Vec<Check>,
    pub pass: bool,
}

/// Seeded random generic and nongeneric pairs, `count` of each.
pub fn random_pairs(count: usize, seed: u64) -> Vec<PlanePair<f64>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::with_capacity(2 * count);
    while out.len() < count {
        let c: [f64; 4] = std::array::from_fn(|_| rng.gen_range(-1.0..1.0));
        if let Ok(p) = make_plane_pair(c, rng.gen()) {
            out.push(p);
        }
    }
    while out.len() < 2 * count {
        let c: [f64; 3] = std::array::from_fn(|_| rng.gen_range(-1.0..1.0));
        if let Ok(p) = make_nongeneric_pair(c, rng.gen()) {
            out.push(p);
        }
    }
    out
}

/// Pinching, exact identities and the fiber scaling chain for `v = sinh r`,
/// `h = cosh(r/2)`.
pub fn verify_chn_suite(spec: &ChnGridSpec) -> Result<ChnReport> {
    spec.validate()?;
    let pairs = random_pairs(spec.pairs, spec.seed);
    let rs: Vec<f64> = grid(spec.rmin, spec.rmax, spec.points).collect();
    struct Acc {
        pinch: Range,
        k21: f64,
        factor: f64,
        mixed: f64,
        chain: f64,
    }
    let per_point: Vec<Acc> = rs
        .par_iter()
        .map(|&r| {
            let ws = WarpState::complex_hyperbolic(r);
            let w = ws.ratios();
            let mut acc = Acc {
                pinch: Range::empty(),
                k21: 0.0,
                factor: (w.mixed_factor() - 1.0).abs(),
                mixed: 0.0,
                chain: 0.0,
            };
            for &c in &spec.c_values {
                let Ok(cc) = coordinate_curvatures(&ws, c) else { continue };
                acc.k21 = acc.k21.max((cc.k21 + 0.25).abs());
                acc.mixed = acc.mixed.max((cc.mixed + c).abs());
                let (vertical, horizontal) = scaled_fiber_curvatures(ws.v, ws.h, c);
                acc.chain = acc
                    .chain
                    .max((vertical - w.dlog_v * w.dlog_h - cc.k21).abs())
                    .max((horizontal - w.dlog_h * w.dlog_h - cc.k32).abs());
                for p in &pairs {
                    acc.pinch.include(sectional_curvature(&cc, p));
                }
            }
            acc
        })
        .collect();
    let mut pinching = Range::empty();
    let (mut k21, mut factor, mut mixed, mut chain) = (0.0f64, 0.0f64, 0.0f64, 0.0f64);
    for a in &per_point {
        pinching = pinching.merge(a.pinch);
        k21 = k21.max(a.k21);
        factor = factor.max(a.factor);
        mixed = mixed.max(a.mixed);
        chain = chain.max(a.chain);
    }

    let tol = spec.tolerance;
    let mut checks = vec![
        Check::weak("pinching: min K >= -1 - 1e-9", pinching.min + 1.0 + 1e-9),
        Check::weak("pinching: max K <= -1/4 + 1e-9", -0.25 + 1e-9 - pinching.max),
        Check::residual("k21 = -1/4", k21, tol),
        Check::residual("(v/h^2)(v'/v - h'/h) = 1", factor, tol),
        Check::residual("mixed = -c23", mixed, tol),
        Check::residual("fiber curvatures rescale to k21 and k32", chain, tol),
    ];
    let cc = coordinate_curvatures(&WarpState::complex_hyperbolic(5.0f64), 0.0)?;
    let radial = sectional_curvature(&cc, &PlanePair::Nongeneric { c: [0.0, 1.0, 0.0], d: [1.0, 0.0] });
    checks.push(Check::residual("K(dr, Y1) = -1 at r = 5", (radial + 1.0).abs(), tol));
    let flat = sectional_curvature(&cc, &PlanePair::Nongeneric { c: [0.0, 0.0, 1.0], d: [0.0, 1.0] });
    checks.push(Check::residual("K(Y1, Y2) = -1/4 at r = 5", (flat + 0.25).abs(), tol));
    let pass = checks.iter().all(|c| c.pass);
    Ok(ChnReport {
        spec: spec.clone(),
        pinching,
        pairs_per_point: pairs.len(),
        k21_residual: k21,
        mixed_factor_residual: factor,
        mixed_residual: mixed,
        scaling_chain_residual: chain,
        checks,
        pass,
    })
}

/// The ordered corners `n < m < ρ < r⁻ < r⁺` and the six intervals they cut,
/// with the two unbounded ends truncated.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct IntervalPartition {
    pub n: f64,
    pub m: f64,
    pub rho: f64,
    pub r_minus: f64,
    pub r_plus: f64,
    /// Length kept of `(-∞, n]`.
    pub tail_length: f64,
    /// Length kept of `[r⁺, ∞)`.
    pub head_length: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Interval {
    pub step: u8,
    pub lo: f64,
    pub hi: f64,
}

impl IntervalPartition {
    pub fn new(v: &VProfile, h: &HProfile, tail_length: f64, head_length: f64) -> Result<Self> {
        let p = Self { n: h.n, m: h.m, rho: h.rho, r_minus: v.r_minus, r_plus: v.r_plus, tail_length, head_length };
        let ordered = [p.n, p.m, p.rho, p.r_minus, p.r_plus];
        if ordered.windows(2).any(|w| !(w[0] < w[1])) {
            return Err(Error::Parameter(format!("breakpoints out of order: {ordered:?}")));
        }
        if !(tail_length > 0.0 && head_length > 0.0) {
            return Err(Error::Parameter("truncation lengths must be positive".into()));
        }
        Ok(p)
    }

    /// Steps 5 down to 0, left to right.
    pub fn intervals(&self) -> [Interval; 6] {
        [
            Interval { step: 5, lo: self.n - self.tail_length, hi: self.n },
            Interval { step: 4, lo: self.n, hi: self.m },
            Interval { step: 3, lo: self.m, hi: self.rho },
            Interval { step: 2, lo: self.rho, hi: self.r_minus },
            Interval { step: 1, lo: self.r_minus, hi: self.r_plus },
            Interval { step: 0, lo: self.r_plus, hi: self.r_plus + self.head_length },
        ]
    }
}

/// Sampling for [`verify_negative_curvature`].
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScanGridSpec {
    /// Uniform points per interval.
    pub points: usize,
    /// Extra points across each smoothing window.
    pub window_points: usize,
    /// `c23` values scanned; `K` is even in `c23`, so `[0, 1/2]` covers `±c23`.
    pub c_values: Vec<f64>,
    pub search: SearchSpec,
    pub tail_length: f64,
    pub head_length: f64,
}

impl Default for ScanGridSpec {
    fn default() -> Self {
        Self {
            points: 2000,
            window_points: 250,
            c_values: (0..=10).map(|i| i as f64 * 0.05).collect(),
            search: SearchSpec::default(),
            tail_length: 10.0,
            head_length: 10.0,
        }
    }
}

/// One row of the scan: the state at `r` and the maximal sectional curvature.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ScanRow {
    pub r: f64,
    pub step: u8,
    pub v: f64,
    pub h: f64,
    pub k21: f64,
    pub k32_c0: f64,
    pub k32_cmax: f64,
    pub kr1: f64,
    pub kr2: f64,
    pub mixed_cmax: f64,
    pub sup_k: f64,
    pub argmax_c23: f64,
    pub argmax_pair: PlanePair<f64>,
    pub v_over_h2: f64,
    pub dlog_v: f64,
    pub dlog_h: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct IntervalReport {
    pub step: u8,
    pub lo: f64,
    pub hi: f64,
    pub points: usize,
    pub max_k: f64,
    pub argmax_r: f64,
    pub argmax_c23: f64,
    pub argmax_pair: PlanePair<f64>,
    /// Largest `|Δ sup K| / Δr` between neighbouring grid points.
    pub lipschitz: f64,
    pub pass: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StepCheck {
    pub step: u8,
    #[serde(flatten)]
    pub check: Check,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CurvatureScanReport {
    pub params: EpsilonParams,
    pub partition: IntervalPartition,
    pub intervals: Vec<IntervalReport>,
    pub global_max: f64,
    pub threshold: f64,
    pub inequalities: Vec<StepCheck>,
    pub inequalities_pass: bool,
    pub pass: bool,
    #[serde(skip)]
    pub rows: Vec<ScanRow>,
}

fn scan_state(
    log_v: Jet,
    log_h: Jet,
    c_values: &[f64],
    search: &PlaneSearch,
) -> Result<(WarpRatios<f64>, CoordinateCurvatures<f64>, CoordinateCurvatures<f64>, f64, SupResult)> {
    let w = WarpRatios::from_log_jets(log_v, log_h);
    let c0 = coordinate_curvatures_from_ratios(&w, 0.0)?;
    let cmax = coordinate_curvatures_from_ratios(&w, 0.5)?;
    let mut best: Option<(f64, SupResult)> = None;
    for &c in c_values {
        let s = search.sup(&coordinate_curvatures_from_ratios(&w, c)?);
        if best.map_or(true, |(_, b)| s.value > b.value) {
            best = Some((c, s));
        }
    }
    let (c, s) = best.ok_or_else(|| Error::Parameter("no c23 values to scan".into()))?;
    Ok((w, c0, cmax, c, s))
}

/// Points of `[lo, hi]`: a uniform grid plus the window grids that fall inside.
fn interval_points(iv: &Interval, points: usize, windows: &[f64], window_points: usize, sf: &[&SmoothedFunction]) -> Vec<f64> {
    let mut pts: Vec<f64> = grid(iv.lo, iv.hi, points).collect();
    for f in sf {
        for w in f.windows() {
            for i in 0..window_points {
                let t = -w.sigma + (2.0 * i as f64 + 1.0) * w.sigma / window_points as f64;
                let r = w.center + t;
                if iv.lo <= r && r <= iv.hi {
                    pts.push(r);
                }
            }
        }
    }
    pts.extend(windows.iter().copied().filter(|&c| iv.lo <= c && c <= iv.hi));
    pts.sort_by(f64::total_cmp);
    pts.dedup();
    pts
}

/// Sup of the sectional curvature over the six intervals for the metric with
/// warping functions `v` and `h`, plus the intermediate inequalities of each step.
pub fn verify_negative_curvature(
    vp: &VProfile,
    hp: &HProfile,
    threshold: Option<f64>,
    spec: &ScanGridSpec,
) -> Result<CurvatureScanReport> {
    if vp.params != hp.params {
        return Err(Error::Parameter("v and h profiles were built with different parameters".into()));
    }
    if spec.points < 2 || spec.c_values.is_empty() {
        return Err(Error::Parameter("scan needs at least two points and one c23 value".into()));
    }
    let params = vp.params;
    let partition = IntervalPartition::new(vp, hp, spec.tail_length, spec.head_length)?;
    let search = PlaneSearch::new(&spec.search);
    let (sv, sh) = (vp.log_function(), hp.log_function());
    let centers: Vec<f64> = sv.windows().iter().chain(sh.windows()).map(|w| w.center).collect();

    let mut intervals = Vec::new();
    let mut rows = Vec::new();
    for iv in partition.intervals() {
        let pts = interval_points(&iv, spec.points, &centers, spec.window_points, &[sv, sh]);
        let part: Vec<ScanRow> = pts
            .par_iter()
            .map(|&r| {
                let (lv, lh) = (sv.eval(r), sh.eval(r));
                let (w, c0, cmax, c, s) = scan_state(lv, lh, &spec.c_values, &search)?;
                Ok(ScanRow {
                    r,
                    step: iv.step,
                    v: lv[0].exp(),
                    h: lh[0].exp(),
                    k21: c0.k21,
                    k32_c0: c0.k32,
                    k32_cmax: cmax.k32,
                    kr1: c0.kr1,
                    kr2: c0.kr2,
                    mixed_cmax: cmax.mixed,
                    sup_k: s.value,
                    argmax_c23: c,
                    argmax_pair: s.pair,
                    v_over_h2: w.v_over_h2,
                    dlog_v: w.dlog_v,
                    dlog_h: w.dlog_h,
                })
            })
            .collect::<Result<_>>()?;
        let best = part
            .iter()
            .fold(None::<&ScanRow>, |b, x| match b {
                Some(b) if b.sup_k >= x.sup_k => Some(b),
                _ => Some(x),
            })
            .ok_or_else(|| Error::Parameter("empty interval".into()))?;
        let lipschitz = part
            .windows(2)
            .map(|w| (w[1].sup_k - w[0].sup_k).abs() / (w[1].r - w[0].r))
            .fold(0.0, f64::max);
        let limit = threshold.unwrap_or(0.0).min(0.0);
        intervals.push(IntervalReport {
            step: iv.step,
            lo: iv.lo,
            hi: iv.hi,
            points: part.len(),
            max_k: best.sup_k,
            argmax_r: best.r,
            argmax_c23: best.argmax_c23,
            argmax_pair: best.argmax_pair,
            lipschitz,
            pass: best.sup_k < limit,
        });
        rows.extend(part);
    }
    let global_max = intervals.iter().map(|i| i.max_k).fold(f64::NEG_INFINITY, f64::max);
    let inequalities = step_inequalities(vp, hp, &rows);
    let inequalities_pass = inequalities.iter().all(|c| c.check.pass);
    let limit = threshold.unwrap_or(0.0).min(0.0);
    Ok(CurvatureScanReport {
        params,
        partition,
        intervals,
        global_max,
        threshold: limit,
        inequalities,
        inequalities_pass,
        pass: global_max < limit,
        rows,
    })
}

fn step_inequalities(vp: &VProfile, hp: &HProfile, rows: &[ScanRow]) -> Vec<StepCheck> {
    let eps = vp.params.eps;
    let of = |steps: &'static [u8]| rows.iter().filter(move |r| steps.contains(&r.step));
    let min = |it: Box<dyn Iterator<Item = f64> + '_>| it.fold(f64::INFINITY, f64::min);
    let mut out = Vec::new();
    let mut push = |step: u8, check: Check| out.push(StepCheck { step, check });

    for step in 1..=5u8 {
        let margin = rows.iter().filter(|r| r.step == step).map(|r| 2.0 * eps - r.v_over_h2).fold(f64::INFINITY, f64::min);
        push(step, Check::strict("v/h^2 < 2 eps", margin));
    }

    let coth = 1.0 / (vp.r_eps + eps.powi(4)).tanh();
    let base_v = vp.c1_base();
    push(
        1,
        Check::weak(
            "1 <= (ln v)' <= coth(r_eps + eps^4) for the C1 profile",
            min(Box::new(of(&[1]).map(|r| {
                let d = base_v.eval(r.r)[1];
                (d - 1.0).min(coth - d)
            }))),
        ),
    );
    push(2, Check::strict("h'/h > eps/9", min(Box::new(of(&[2]).map(|r| r.dlog_h - eps / 9.0)))));
    push(
        3,
        Check::strict("h'/h in (eps/9, 4/5)", min(Box::new(of(&[3]).map(|r| (r.dlog_h - eps / 9.0).min(0.8 - r.dlog_h))))),
    );
    push(
        4,
        Check::weak("h'/h in [1/3, 1]", min(Box::new(of(&[4]).map(|r| (r.dlog_h - 1.0 / 3.0).min(1.0 - r.dlog_h))))),
    );
    let base_h = hp.c1_base();
    push(
        4,
        Check::weak("h >= e^(r/2) for the C1 profile", min(Box::new(of(&[4]).map(|r| base_h.eval(r.r)[0] - r.r / 2.0)))),
    );
    push(5, Check::strict("h'/h > 1/3", min(Box::new(of(&[5]).map(|r| r.dlog_h - 1.0 / 3.0)))));
    push(
        5,
        Check::weak("sup K <= -1/9 + 3 eps", min(Box::new(of(&[5]).map(|r| -1.0 / 9.0 + 3.0 * eps - r.sup_k)))),
    );
    push(0, Check::weak("sup K <= -1/5", min(Box::new(of(&[0]).map(|r| -0.2 - r.sup_k)))));
    out
}

/// `F = g'/g` in closed form on the tail, where `g = τ + e^{r/2}`.
pub fn tail_f(tau: f64, r: f64) -> f64 {
    0.5 / (1.0 + (tau.ln() - 0.5 * r).exp())
}

/// Residual table of the tail identities of `g` and `v = ε e^r`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TailIdentityReport {
    pub points: usize,
    pub checks: Vec<Check>,
    pub pass: bool,
}

/// Max residuals of the closed-form identities over `r_grid ⊂ (-∞, p - σ]`.
pub fn tail_identities(vp: &VProfile, gp: &GProfile, r_grid: &[f64]) -> Result<TailIdentityReport> {
    let edge = gp.p - gp.params.sigma;
    if let Some(r) = r_grid.iter().find(|&&r| !(r <= edge)) {
        return Err(Error::Domain(format!("tail grid point {r} is not below p - σ = {edge}")));
    }
    let eps = gp.params.eps;
    let (sv, sg) = (vp.log_function(), gp.log_function());
    let mut res = [0.0f64; 7];
    for &r in r_grid {
        let (lv, lg) = (sv.eval(r), sg.eval(r));
        let f = lg[1];
        let g = lg[0].exp();
        let closed = [
            lg[2] - (0.5 * f - f * f),
            lg[2] + f * f - 0.5 * f,
            (lv[0] - 2.0 * lg[0]).exp() - 4.0 * eps * f * f,
            // (1/g²)' = -e^{r/2}/g³ against -2F/g², relative
            ((-(0.5 * r).exp() / g) + 2.0 * f) / (2.0 * f),
            lv[1] - 1.0,
            lv[2] + lv[1] * lv[1] - 1.0,
            f - tail_f(gp.tau, r),
        ];
        for (m, x) in res.iter_mut().zip(closed) {
            *m = m.max(x.abs());
        }
    }
    let names = [
        "F' = F/2 - F^2",
        "g''/g = F/2",
        "v/g^2 = 4 eps F^2",
        "(1/g^2)' = -2F/g^2 (relative)",
        "v'/v = 1",
        "v''/v = 1",
        "F matches 1/(2(1 + tau e^(-r/2)))",
    ];
    let mut checks: Vec<Check> = names.iter().zip(res).map(|(n, x)| Check::residual(*n, x, 1e-12)).collect();
    let f_before = sg.eval(gp.p - 1.0)[1];
    checks.push(Check::strict("F(p - 1) < 1/4", 0.25 - f_before));
    let f_far = sg.eval(gp.p - 50.0)[1];
    checks.push(Check::strict("F(p - 50) < 1e-10", 1e-10 - f_far));
    let pass = checks.iter().all(|c| c.pass);
    Ok(TailIdentityReport { points: r_grid.len(), checks, pass })
}

/// `j`-th derivative of `f` at `r` by central differences: five-point
/// stencils with step `h` up to `j = 3`, the binomial stencil with step `100 h` beyond.
pub fn central_difference(f: &dyn Fn(f64) -> f64, r: f64, j: usize, h: f64) -> f64 {
    match j {
        0 => f(r),
        1 => (f(r - 2.0 * h) - 8.0 * f(r - h) + 8.0 * f(r + h) - f(r + 2.0 * h)) / (12.0 * h),
        2 => {
            (-f(r - 2.0 * h) + 16.0 * f(r - h) - 30.0 * f(r) + 16.0 * f(r + h) - f(r + 2.0 * h)) / (12.0 * h * h)
        }
        3 => (-f(r - 2.0 * h) + 2.0 * f(r - h) - 2.0 * f(r + h) + f(r + 2.0 * h)) / (-2.0 * h * h * h),
        _ => {
            let h = 100.0 * h;
            let mut binom = 1.0;
            let mut sum = 0.0;
            for i in 0..=j {
                let sign = if i % 2 == 0 { 1.0 } else { -1.0 };
                sum += sign * binom * f(r + (j as f64 / 2.0 - i as f64) * h);
                binom = binom * (j - i) as f64 / (i + 1) as f64;
            }
            sum / h.powi(j as i32)
        }
    }
}

/// Sampling for [`verify_aregularity`].
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ARegularityGridSpec {
    /// Points on `[p - tail_span, p - σ]`.
    pub tail_points: usize,
    pub tail_span: f64,
    /// Points on each of `[p - σ, o]` and `[o, o + σ]`.
    pub step_points: usize,
    pub window_points: usize,
    pub fd_step: f64,
    pub c_values: Vec<f64>,
    pub search: SearchSpec,
}

impl Default for ARegularityGridSpec {
    fn default() -> Self {
        Self {
            tail_points: 1000,
            tail_span: 50.0,
            step_points: 2000,
            window_points: 250,
            fd_step: 1e-4,
            c_values: (0..=10).map(|i| i as f64 * 0.05).collect(),
            search: SearchSpec::default(),
        }
    }
}

/// Numeric sup of `|d^j component / dr^j|` against the bound of its symbolic derivative.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DerivativeBound {
    pub component: String,
    pub order: usize,
    pub symbolic: String,
    pub numeric_sup: f64,
    pub bound: f64,
    /// Largest gap between finite differences and the symbolic derivative,
    /// relative to the size of the component itself.
    pub agreement: f64,
    pub pass: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct NegativityResult {
    pub step: u8,
    pub lo: f64,
    pub hi: f64,
    pub points: usize,
    pub max_k: f64,
    pub argmax_r: f64,
    pub pass: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ARegularityReport {
    pub params: EpsilonParams,
    pub kmax: usize,
    pub c23: f64,
    pub u_max: f64,
    pub closure: Vec<ClosureLevel>,
    /// Nonzero order-0 components in the `∂r, Y1, Y2, Y3` frame.
    pub curvature_table: Vec<(Vec<usize>, String)>,
    pub derivatives: Vec<DerivativeBound>,
    pub identities: TailIdentityReport,
    pub negativity: Vec<NegativityResult>,
    pub checks: Vec<Check>,
    pub pass: bool,
}

/// Tolerance of finite differences against symbolic first derivatives.
const DERIVATIVE_AGREEMENT: f64 = 1e-9;

fn sup_curvature_over(
    sv: &SmoothedFunction,
    sg: &SmoothedFunction,
    pts: &[f64],
    c_values: &[f64],
    search: &PlaneSearch,
) -> Result<(f64, f64)> {
    let sups: Vec<(f64, f64)> = pts
        .par_iter()
        .map(|&r| scan_state(sv.eval(r), sg.eval(r), c_values, search).map(|(.., s)| (s.value, r)))
        .collect::<Result<_>>()?;
    Ok(sups.into_iter().fold((f64::NEG_INFINITY, f64::NAN), |b, x| if x.0 > b.0 { x } else { b }))
}

/// Closure of `∇^k R` on the tail, finite-difference derivative bounds,
/// tail identities and negativity of the metric with warping functions `v`, `g`.
pub fn verify_aregularity(
    vp: &VProfile,
    gp: &GProfile,
    sc: &StructureConstants<f64>,
    kmax: usize,
    spec: &ARegularityGridSpec,
) -> Result<ARegularityReport> {
    if vp.params != gp.params {
        return Err(Error::Parameter("v and g profiles were built with different parameters".into()));
    }
    if spec.tail_points < 2 || spec.step_points < 2 || spec.c_values.is_empty() || !(spec.tail_span > 0.0) {
        return Err(Error::Parameter("A-regularity grid needs points, a positive span and c23 values".into()));
    }
    let params = vp.params;
    let (eps, sigma) = (params.eps, params.sigma);
    let table = covariant_derivative_closure(kmax, sc)?;
    let c23 = table.c23;
    let u_max = gp.tau.recip();
    let closure = table.summary(eps, u_max);
    let curvature_table = table.nonzero(0).map(|(i, p)| (i, p.to_string())).collect();

    let (sv, sg) = (vp.log_function(), gp.log_function());
    let reach = 2.0 * spec.fd_step * if kmax > 3 { 100.0 * kmax as f64 } else { 1.0 };
    let tail_hi = gp.p - sigma;
    let tail: Vec<f64> = grid(gp.p - spec.tail_span, tail_hi, spec.tail_points).collect();
    let identities = tail_identities(vp, gp, &tail)?;

    let numeric = |r: f64| -> Result<CoordinateCurvatures<f64>> {
        coordinate_curvatures_from_ratios(&WarpRatios::from_log_jets(sv.eval(r), sg.eval(r)), c23)
    };
    numeric(tail_hi)?;
    let pick: [fn(&CoordinateCurvatures<f64>) -> f64; 5] =
        [|c| c.k21, |c| c.k32, |c| c.kr1, |c| c.kr2, |c| c.mixed];
    let components = TailComponents::new();
    let fd_grid: Vec<f64> = grid(gp.p - spec.tail_span + reach, tail_hi - reach, spec.tail_points).collect();
    let mut derivatives = Vec::new();
    for ((name, poly), get) in components.named().into_iter().zip(pick) {
        let f = |r: f64| numeric(r).map(|c| get(&c)).unwrap_or(f64::NAN);
        let mut symbolic = poly.clone();
        for order in 0..=kmax {
            let bound = symbolic.coefficient_bound(eps, u_max);
            let (mut sup, mut agreement) = (0.0f64, 0.0f64);
            for &r in &fd_grid {
                let fd = central_difference(&f, r, order, spec.fd_step);
                let g = (r * 0.5).exp() + gp.tau;
                let exact = symbolic.eval(&TailPoint { f: tail_f(gp.tau, r), u: g.recip(), eps, c: c23 });
                sup = sup.max(fd.abs());
                let scale = f(r).abs().max(exact.abs()).max(1.0);
                agreement = agreement.max((fd - exact).abs() / scale);
            }
            let pass = sup <= bound + 1e-9 && (order > 1 || agreement <= DERIVATIVE_AGREEMENT);
            derivatives.push(DerivativeBound {
                component: name.to_string(),
                order,
                symbolic: symbolic.to_string(),
                numeric_sup: sup,
                bound,
                agreement,
                pass,
            });
            symbolic = symbolic.derive();
        }
    }

    let search = PlaneSearch::new(&spec.search);
    let with_windows = |lo: f64, hi: f64, points: usize| {
        let iv = Interval { step: 0, lo, hi };
        let centers: Vec<f64> = sg.windows().iter().map(|w| w.center).collect();
        interval_points(&iv, points, &centers, spec.window_points, &[sv, sg])
    };
    let regions = [
        (1u8, gp.o, gp.o + sigma, with_windows(gp.o, gp.o + sigma, spec.step_points)),
        (2, gp.p - sigma, gp.o, with_windows(gp.p - sigma, gp.o, spec.step_points)),
        (3, gp.p - spec.tail_span, tail_hi, tail.clone()),
    ];
    let mut negativity = Vec::new();
    for (step, lo, hi, pts) in regions {
        let (max_k, argmax_r) = sup_curvature_over(sv, sg, &pts, &spec.c_values, &search)?;
        negativity.push(NegativityResult { step, lo, hi, points: pts.len(), max_k, argmax_r, pass: max_k < 0.0 });
    }

    let mut checks = Vec::new();
    let finite = closure.iter().all(|l| l.coefficient_bound.is_finite());
    checks.push(Check { name: format!("closure bounds finite for k <= {kmax}"), pass: finite, margin: 0.0 });
    let decaying = closure.iter().skip(1).all(|l| l.min_f_degree.map_or(true, |d| d >= 1));
    checks.push(Check { name: "every k >= 1 monomial carries a factor F".into(), pass: decaying, margin: 0.0 });
    let r10 = gp.p - 10.0;
    let c10 = numeric(r10)?;
    let f10 = sg.eval(r10)[1];
    checks.push(Check::residual(
        "K(Y2,Y1) = eps^2 F^4 - F at p - 10",
        (c10.k21 + f10 - eps * eps * f10.powi(4)).abs(),
        1e-13,
    ));
    let below = tail.iter().map(|&r| numeric(r).map(|c| -0.5 * sg.eval(r)[1] - c.k21)).collect::<Result<Vec<_>>>()?;
    checks.push(Check::strict("K(Y2,Y1) < -F/2 on the tail", below.into_iter().fold(f64::INFINITY, f64::min)));
    let far = numeric(gp.p - 50.0)?;
    checks.push(Check::residual("|K(dr,Y2)| < 1e-8 at p - 50", far.kr2.abs(), 1e-8));
    let far_sup = scan_state(sv.eval(gp.p - 50.0), sg.eval(gp.p - 50.0), &spec.c_values, &search)?.4.value;
    checks.push(Check::residual("sup K -> 0: |sup K| < 1e-8 at p - 50", far_sup.abs(), 1e-8));

    let pass = checks.iter().all(|c| c.pass)
        && derivatives.iter().all(|d| d.pass)
        && identities.pass
        && negativity.iter().all(|n| n.pass);
    Ok(ARegularityReport {
        params,
        kmax,
        c23,
        u_max,
        closure,
        curvature_table,
        derivatives,
        identities,
        negativity,
        checks,
        pass,
    })
}
