//! The three warping profiles `v`, `h` and `g` for a given `ε`.
//!
//! Each profile is stored through its logarithm as a [`SmoothedFunction`].
//! Corners that are straightened by a quadratic bend are smoothed in the log
//! domain; plain joints of two convex pieces are smoothed on the positive
//! function itself, so the ratio `f''/f` stays close to its one-sided values.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::convex::{bend_splice, grid, Expr, Jet, PiecewiseExpr, Scale, SmoothedFunction, Window};
use crate::error::{Error, Result};

/// Largest `|2 ln f|` the profiles may reach near their left ends before
/// `1/f²` leaves the `f64` range.
const EXPONENT_GUARD: f64 = 700.0;

/// `ε` together with the smoothing width `σ` and mollifier half-width `δ`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpsilonParams {
    pub eps: f64,
    pub sigma: f64,
    pub delta: f64,
    pub strict_regime: bool,
}

impl EpsilonParams {
    pub fn new(eps: f64, sigma: f64, delta: f64, strict_regime: bool) -> Result<Self> {
        if !(eps > 0.0 && eps < 0.3) {
            return Err(Error::Parameter(format!("ε must lie in (0, 0.3), got {eps}")));
        }
        if !(sigma > 0.0 && sigma.is_finite()) {
            return Err(Error::Parameter(format!("σ must be positive, got {sigma}")));
        }
        if !(delta > 0.0 && delta < sigma / 4.0) {
            return Err(Error::Parameter(format!("δ must lie in (0, σ/4), got δ={delta}, σ={sigma}")));
        }
        if strict_regime {
            if !(sigma < eps.powi(8)) {
                return Err(Error::Parameter(format!("strict regime needs σ < ε⁸ = {}", eps.powi(8))));
            }
            if eps < 0.05 {
                return Err(Error::Parameter("strict regime is supported only for ε ≥ 0.05".into()));
            }
        }
        Ok(Self { eps, sigma, delta, strict_regime })
    }

    /// `σ = ε⁴/10`, `δ = σ/50`.
    pub fn practical(eps: f64) -> Result<Self> {
        let sigma = eps.powi(4) / 10.0;
        Self::new(eps, sigma, sigma / 50.0, false)
    }

    /// `σ = ε⁸/2`, `δ = σ/50`.
    pub fn strict(eps: f64) -> Result<Self> {
        let sigma = eps.powi(8) / 2.0;
        Self::new(eps, sigma, sigma / 50.0, true)
    }
}

/// Unique root of `sinh r = ε e^r`.
pub fn solve_r_epsilon(eps: f64) -> Result<f64> {
    if !(eps > 0.0 && eps < 0.5) {
        return Err(Error::Parameter(format!("sinh r = ε e^r has no root for ε = {eps}")));
    }
    Ok(-0.5 * (-2.0 * eps).ln_1p())
}

/// Per-window `(σ_j, δ_j)`: each window keeps 0.4 of the gap to its nearest
/// neighbouring corner, and `δ_j ≤ σ_j / 5`.
fn window_sizes(corners: &[f64], c: f64, params: &EpsilonParams) -> (f64, f64) {
    let gap = corners
        .iter()
        .filter(|&&x| x != c)
        .map(|&x| (x - c).abs())
        .fold(f64::INFINITY, f64::min);
    let sigma = params.sigma.min(0.4 * gap);
    (sigma, params.delta.min(sigma / 5.0))
}

fn add_joint(sf: &mut SmoothedFunction, corners: &[f64], c: f64, params: &EpsilonParams) -> Result<()> {
    let (sigma, delta) = window_sizes(corners, c, params);
    sf.add_scaled_window(c, delta, sigma, Scale::Exponential)
}

fn bend(
    f1: &PiecewiseExpr,
    f2: &PiecewiseExpr,
    [a1, c, a2]: [f64; 3],
    corners: &[f64],
    params: &EpsilonParams,
) -> Result<SmoothedFunction> {
    let (sigma, delta) = window_sizes(corners, c, params);
    bend_splice(f1, f2, a1, c, a2, delta, sigma, 0.0)
}

fn ln_sinh_jet(r: f64) -> Jet {
    Expr::LnSinh { rate: 1.0 }.eval(r)
}

/// Common read access to a profile.
pub trait WarpProfile {
    fn name(&self) -> &'static str;
    fn params(&self) -> &EpsilonParams;
    /// Logarithm of the smooth profile.
    fn log_function(&self) -> &SmoothedFunction;
    /// Logarithm of the C¹ profile before the joints are smoothed.
    fn c1_base(&self) -> &SmoothedFunction;
    /// Named breakpoints of the construction.
    fn breakpoints(&self) -> BTreeMap<String, f64>;
}

fn checked_jet(name: &str, r: f64, j: Jet) -> Result<Jet> {
    if !r.is_finite() {
        return Err(Error::Domain(format!("{name}: non-finite argument {r}")));
    }
    if j.iter().any(|x| !x.is_finite()) || !(j[0] > 0.0) {
        return Err(Error::Domain(format!("{name}: value not representable at r = {r}")));
    }
    Ok(j)
}

/// `(f, f', f'')` of the smooth profile at `r`.
pub fn eval_profile(p: &dyn WarpProfile, r: f64) -> Result<Jet> {
    checked_jet(p.name(), r, p.log_function().eval_exp(r))
}

/// `(ln f, (ln f)', (ln f)'')` of the smooth profile at `r`.
pub fn eval_profile_log(p: &dyn WarpProfile, r: f64) -> Result<Jet> {
    let j = p.log_function().eval(r);
    if !r.is_finite() || j.iter().any(|x| !x.is_finite()) {
        return Err(Error::Domain(format!("{}: log jet not finite at r = {r}", p.name())));
    }
    Ok(j)
}

/// The profile `v`: `ε e^r` far left, `sinh r` right of `r_ε`.
#[derive(Debug, Clone, PartialEq)]
pub struct VProfile {
    pub params: EpsilonParams,
    pub r_eps: f64,
    pub r_minus: f64,
    pub r_zero: f64,
    pub r_plus: f64,
    log_v: SmoothedFunction,
    c1: SmoothedFunction,
}

impl VProfile {
    pub fn build(params: &EpsilonParams) -> Result<Self> {
        let eps = params.eps;
        let r_eps = solve_r_epsilon(eps)?;
        let e4 = eps.powi(4);
        let r_minus = r_eps - e4;
        let mut offset = e4;
        let mut found = None;
        for _ in 0..=50 {
            let r_plus = r_eps + offset;
            let n = ((1.0 - 2.0 * eps) * (-(-2.0 * offset).exp_m1()) / (2.0 * eps)).ln_1p();
            let r_zero = r_plus - n * (2.0 * r_plus).exp_m1() / 2.0;
            if r_minus < r_zero && r_zero < r_eps {
                found = Some((r_zero, r_plus));
                break;
            }
            offset /= 2.0;
        }
        let (r_zero, r_plus) = found.ok_or_else(|| {
            Error::construction("v", "no admissible r⁺ in (r_ε, r_ε + ε⁴] after 50 halvings")
        })?;

        let right_line = {
            let s = ln_sinh_jet(r_plus);
            Expr::line(s[1], r_plus, s[0])
        };
        let left = PiecewiseExpr::single(Expr::LnScaledExp { scale: eps, rate: 1.0 });
        let right = PiecewiseExpr::new(vec![r_plus], vec![right_line, Expr::LnSinh { rate: 1.0 }])?;
        let corners = [r_minus, r_zero, r_plus];
        let mut log_v = bend(&left, &right, corners, &corners, params)?;
        let c1 = log_v.clone();
        for c in [r_minus, r_plus] {
            add_joint(&mut log_v, &corners, c, params)?;
        }
        Ok(Self { params: *params, r_eps, r_minus, r_zero, r_plus, log_v, c1 })
    }
}

impl WarpProfile for VProfile {
    fn name(&self) -> &'static str {
        "v"
    }
    fn params(&self) -> &EpsilonParams {
        &self.params
    }
    fn log_function(&self) -> &SmoothedFunction {
        &self.log_v
    }
    fn c1_base(&self) -> &SmoothedFunction {
        &self.c1
    }
    fn breakpoints(&self) -> BTreeMap<String, f64> {
        named(&[("r_eps", self.r_eps), ("r_minus", self.r_minus), ("r_zero", self.r_zero), ("r_plus", self.r_plus)])
    }
}

fn named(items: &[(&str, f64)]) -> BTreeMap<String, f64> {
    items.iter().map(|(k, v)| (k.to_string(), *v)).collect()
}

/// The profile `h`: `e^{r/2}` far left, `cosh(r/2)` right of `ρ`, and the
/// quadratic `q` in between.
#[derive(Debug, Clone, PartialEq)]
pub struct HProfile {
    pub params: EpsilonParams,
    pub rho: f64,
    /// Coefficients of `q(r) = c0 + c1 s + c2 s²`, `s = r - ρ`.
    pub q_coeffs: [f64; 3],
    /// Largest zero of `q`.
    pub q_zero: f64,
    /// Point where `q'/q = 3/4`.
    pub m: f64,
    /// Corner between `r/2` and the slope-3/4 line through `(m, ln q(m))`.
    pub bend_point: f64,
    /// Left end of the bend.
    pub n: f64,
    log_h: SmoothedFunction,
    c1: SmoothedFunction,
}

impl HProfile {
    pub fn build(params: &EpsilonParams, v: &VProfile) -> Result<Self> {
        let eps = params.eps;
        let rho = v.r_minus / 2.0;
        let c0 = (rho / 2.0).cosh();
        let c1 = 0.5 * (rho / 2.0).sinh();
        let c2 = eps.powi(6);
        let quad = Expr::LnQuadratic { c0, c1, c2, center: rho };
        let disc = c1 * c1 - 4.0 * c2 * c0;
        if !(disc > 0.0) {
            return Err(Error::construction("h", "q has no real zero"));
        }
        let q_zero = rho - 2.0 * c0 / (c1 + disc.sqrt());

        let q = |r: f64| {
            let s = r - rho;
            c0 + s * (c1 + c2 * s)
        };
        let excess = |r: f64| (c1 + 2.0 * c2 * (r - rho)) / q(r) - 0.75;
        if !(excess(rho) < 0.0) {
            return Err(Error::construction("h", "q'/q already exceeds 3/4 at ρ"));
        }
        let (mut lo, mut hi) = (q_zero, rho);
        for _ in 0..400 {
            let mid = 0.5 * (lo + hi);
            if mid <= lo || mid >= hi {
                break;
            }
            if q(mid) <= 0.0 || excess(mid) > 0.0 {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        let m = hi;
        let ln_q_m = quad.eval(m)[0];
        if !(ln_q_m > m / 2.0) {
            return Err(Error::construction("h", format!("q(m) ≤ e^(m/2) at m = {m}")));
        }
        let bend_point = 3.0 * m - 4.0 * ln_q_m;
        let n = bend_point - 1.0;
        if -(n - 10.0) > EXPONENT_GUARD {
            return Err(Error::Guard(format!(
                "h reaches e^(n/2) with n = {n}; 1/h² overflows f64 for ε = {eps}"
            )));
        }

        let left = PiecewiseExpr::single(Expr::LnScaledExp { scale: 1.0, rate: 0.5 });
        let right = PiecewiseExpr::new(
            vec![m, rho],
            vec![Expr::line(0.75, m, ln_q_m), quad, Expr::LnCosh { rate: 0.5 }],
        )?;
        let corners = [n, bend_point, m, rho];
        let mut log_h = bend(&left, &right, [n, bend_point, m], &corners, params)?;
        let c1_fn = log_h.clone();
        for c in [n, m, rho] {
            add_joint(&mut log_h, &corners, c, params)?;
        }
        Ok(Self {
            params: *params,
            rho,
            q_coeffs: [c0, c1, c2],
            q_zero,
            m,
            bend_point,
            n,
            log_h,
            c1: c1_fn,
        })
    }

    pub fn q(&self, r: f64) -> Jet {
        let [c0, c1, c2] = self.q_coeffs;
        let s = r - self.rho;
        [c0 + s * (c1 + c2 * s), c1 + 2.0 * c2 * s, 2.0 * c2]
    }
}

impl WarpProfile for HProfile {
    fn name(&self) -> &'static str {
        "h"
    }
    fn params(&self) -> &EpsilonParams {
        &self.params
    }
    fn log_function(&self) -> &SmoothedFunction {
        &self.log_h
    }
    fn c1_base(&self) -> &SmoothedFunction {
        &self.c1
    }
    fn breakpoints(&self) -> BTreeMap<String, f64> {
        named(&[
            ("rho", self.rho),
            ("q_zero", self.q_zero),
            ("m", self.m),
            ("bend_point", self.bend_point),
            ("n", self.n),
        ])
    }
}

/// The profile `g`: `τ + e^{r/2}` far left and equal to `h` right of `o = ln τ`.
#[derive(Debug, Clone, PartialEq)]
pub struct GProfile {
    pub params: EpsilonParams,
    pub tau: f64,
    /// `ln τ`
    pub o: f64,
    /// `2 ln τ`
    pub p: f64,
    pub bend_point: f64,
    pub h: HProfile,
    log_g: SmoothedFunction,
    c1: SmoothedFunction,
}

impl GProfile {
    pub fn build(params: &EpsilonParams, h: &HProfile) -> Result<Self> {
        let tau = (params.eps.ln() + h.n).exp();
        if !(tau > 0.0 && tau < 2.0 * params.eps) {
            return Err(Error::construction("g", format!("τ = {tau} outside (0, 2ε)")));
        }
        let o = tau.ln();
        let p = 2.0 * o;
        if -p > EXPONENT_GUARD {
            return Err(Error::Guard(format!(
                "g reaches 2τ at p = {p}; 1/g² overflows f64 for ε = {}",
                params.eps
            )));
        }
        let bend_point = p + 4.0 * std::f64::consts::LN_2;
        if !(p < bend_point && bend_point < o) {
            return Err(Error::construction("g", "bend point outside (p, o)"));
        }
        let tail = Expr::LnTauExp { tau };
        let at_p = tail.eval(p);
        let left = PiecewiseExpr::new(vec![p], vec![tail, Expr::line(at_p[1], p, at_p[0])])?;
        let corners = [p, bend_point, o, h.n];
        let mut log_g = bend(&left, h.log_h.base(), [p, bend_point, o], &corners, params)?;
        for w in h.log_h.windows() {
            log_g.add_scaled_window(w.center, w.delta, w.sigma, w.scale)?;
        }
        let c1_fn = log_g.clone();
        for c in [p, o] {
            add_joint(&mut log_g, &corners, c, params)?;
        }
        Ok(Self { params: *params, tau, o, p, bend_point, h: h.clone(), log_g, c1: c1_fn })
    }
}

impl WarpProfile for GProfile {
    fn name(&self) -> &'static str {
        "g"
    }
    fn params(&self) -> &EpsilonParams {
        &self.params
    }
    fn log_function(&self) -> &SmoothedFunction {
        &self.log_g
    }
    fn c1_base(&self) -> &SmoothedFunction {
        &self.c1
    }
    fn breakpoints(&self) -> BTreeMap<String, f64> {
        named(&[("tau", self.tau), ("o", self.o), ("p", self.p), ("bend_point", self.bend_point)])
    }
}

/// All three profiles for one parameter set.
#[derive(Debug, Clone, PartialEq)]
pub struct ProfileSet {
    pub v: VProfile,
    pub h: HProfile,
    pub g: GProfile,
}

impl ProfileSet {
    pub fn build(params: &EpsilonParams) -> Result<Self> {
        let v = VProfile::build(params)?;
        let h = HProfile::build(params, &v)?;
        let g = GProfile::build(params, &h)?;
        Ok(Self { v, h, g })
    }
}

/// Sampling used by [`verify_profile_invariants`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProfileGrid {
    /// Points per plain interval.
    pub points: usize,
    /// Points per smoothing window.
    pub window_points: usize,
    /// Allowed relative C¹ distance between the smooth and the C¹ profile.
    pub c1_tolerance: f64,
}

impl Default for ProfileGrid {
    fn default() -> Self {
        Self { points: 1000, window_points: 200, c1_tolerance: 1e-4 }
    }
}

/// Outcome of one invariant; `margin` is positive when it holds.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct InvariantCheck {
    pub name: String,
    pub pass: bool,
    pub margin: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ProfileReport {
    pub profile: String,
    pub checks: Vec<InvariantCheck>,
}

impl ProfileReport {
    pub fn passes(&self) -> bool {
        self.checks.iter().all(|c| c.pass)
    }

    fn push(&mut self, name: &str, margin: f64) {
        self.checks.push(InvariantCheck { name: name.into(), pass: margin > 0.0, margin });
    }

    fn push_weak(&mut self, name: &str, margin: f64) {
        self.checks.push(InvariantCheck { name: name.into(), pass: margin >= 0.0, margin });
    }

    /// Records an exact-equality check: margin is `-max |a-b|`, or 1 when all agree.
    fn push_exact(&mut self, name: &str, diffs: impl Iterator<Item = f64>) {
        let worst = diffs.fold(0.0, f64::max);
        let margin = if worst == 0.0 { 1.0 } else { -worst };
        self.checks.push(InvariantCheck { name: name.into(), pass: worst == 0.0, margin });
    }
}

/// Points strictly inside `(lo, hi)`.
fn interior(lo: f64, hi: f64, n: usize) -> impl Iterator<Item = f64> {
    let step = (hi - lo) / n as f64;
    (0..n).map(move |i| lo + (i as f64 + 0.5) * step)
}

fn window_points(w: &Window, n: usize) -> impl Iterator<Item = f64> + '_ {
    interior(w.center - w.sigma, w.center + w.sigma, n)
}

fn min_over(xs: impl Iterator<Item = f64>, f: impl Fn(f64) -> f64) -> f64 {
    xs.map(f).fold(f64::INFINITY, f64::min)
}

fn exp_diff<'a>(sf: &'a SmoothedFunction, closed: impl Fn(f64) -> f64 + 'a) -> impl Fn(f64) -> f64 + 'a {
    move |r| (sf.eval_exp(r)[0] - closed(r)).abs()
}

/// Worst relative C¹ distance between the smooth and C¹ logs in the joint windows.
fn c1_distance(p: &dyn WarpProfile, n: usize) -> f64 {
    let (s, b) = (p.log_function(), p.c1_base());
    let mut worst: f64 = 0.0;
    for w in s.windows().iter().filter(|w| w.scale == Scale::Exponential) {
        for r in window_points(w, n) {
            let (x, y) = (s.eval(r), b.eval(r));
            let scale = y[0].abs().max(1.0);
            worst = worst.max((x[0] - y[0]).abs() / scale).max((x[1] - y[1]).abs() / y[1].abs().max(1e-300));
        }
    }
    worst
}

fn ratio2(sf: &SmoothedFunction, r: f64) -> f64 {
    let j = sf.eval(r);
    j[2] + j[1] * j[1]
}

fn positive_increasing(p: &dyn WarpProfile, lo: f64, hi: f64, grid_spec: &ProfileGrid) -> f64 {
    let s = p.log_function();
    let pts = grid(lo, hi, grid_spec.points)
        .chain(s.windows().iter().flat_map(|w| window_points(w, grid_spec.window_points)))
        .collect::<Vec<_>>();
    min_over(pts.into_iter(), |r| {
        let j = s.eval_exp(r);
        j[0].min(j[1])
    })
}

/// Runs the construction invariants of `v`, `h` and `g`.
pub fn verify_profile_invariants(set: &ProfileSet, grid_spec: &ProfileGrid) -> Vec<ProfileReport> {
    vec![verify_v(&set.v, grid_spec), verify_h(&set.h, grid_spec), verify_g(&set.g, grid_spec)]
}

pub fn verify_v(v: &VProfile, gs: &ProfileGrid) -> ProfileReport {
    let eps = v.params.eps;
    let sigma = v.params.sigma;
    let (s, b) = (&v.log_v, &v.c1);
    let mut rep = ProfileReport { profile: "v".into(), checks: Vec::new() };
    let target = eps * v.r_eps.exp();
    rep.push("sinh(r_eps) = eps e^r_eps", 1e-12 - (v.r_eps.sinh() - target).abs() / target);
    rep.push("r_plus > r_eps", v.r_plus - v.r_eps);
    rep.push_weak("r_plus <= r_eps + eps^4", v.r_eps + eps.powi(4) - v.r_plus);
    rep.push("r_zero in (r_minus, r_eps)", (v.r_zero - v.r_minus).min(v.r_eps - v.r_zero));
    rep.push_exact(
        "v = eps e^r for r <= r_minus - sigma",
        grid(v.r_minus - sigma - 5.0, v.r_minus - sigma, gs.points).map(exp_diff(s, |r| eps * r.exp())),
    );
    rep.push_exact(
        "v = sinh r for r >= r_plus + sigma",
        grid(v.r_plus + sigma, v.r_plus + sigma + 5.0, gs.points).map(exp_diff(s, f64::sinh)),
    );
    rep.push("v > 0 and v' > 0", positive_increasing(v, v.r_minus - 1.0, v.r_plus + 1.0, gs));
    rep.push(
        "(ln v)'' > 0 on (r_minus, r_plus) before smoothing the joints",
        min_over(interior(v.r_minus, v.r_plus, gs.points), |r| b.eval(r)[2]),
    );
    rep.push(
        "v'' > v on (r_minus, r_plus) before smoothing the joints",
        min_over(interior(v.r_minus, v.r_plus, gs.points), |r| ratio2(b, r) - 1.0),
    );
    rep.push(
        "v''/v > 1/4 in the smoothing windows",
        min_over(s.windows().iter().flat_map(|w| window_points(w, gs.window_points)), |r| ratio2(s, r) - 0.25),
    );
    rep.push("smooth v is C1-close to the C1 profile", gs.c1_tolerance - c1_distance(v, gs.window_points));
    rep
}

pub fn verify_h(h: &HProfile, gs: &ProfileGrid) -> ProfileReport {
    let eps = h.params.eps;
    let sigma = h.params.sigma;
    let (s, b) = (&h.log_h, &h.c1);
    let mut rep = ProfileReport { profile: "h".into(), checks: Vec::new() };
    let qm = h.q(h.m);
    rep.push("q'(m)/q(m) = 3/4", 1e-12 - (qm[1] / qm[0] - 0.75).abs());
    rep.push("q(m) > e^(m/2)", qm[0].ln() - h.m / 2.0);
    rep.push(
        "n < bend_point < m < rho and q_zero < m",
        (h.m - h.q_zero).min(h.bend_point - h.n).min(h.m - h.bend_point).min(h.rho - h.m),
    );
    rep.push_exact(
        "h = e^(r/2) for r <= n - sigma",
        grid(h.n - sigma - 5.0, h.n - sigma, gs.points).map(exp_diff(s, |r| (0.5 * r).exp())),
    );
    rep.push_exact(
        "h = q on [m + sigma, rho - sigma]",
        grid(h.m + sigma, h.rho - sigma, gs.points).map(exp_diff(s, |r| h.q(r)[0])),
    );
    rep.push_exact(
        "h = cosh(r/2) for r >= rho + sigma",
        grid(h.rho + sigma, h.rho + sigma + 5.0, gs.points).map(exp_diff(s, |r| (0.5 * r).cosh())),
    );
    rep.push(
        "(ln h)' in [1/2, 3/4] on [n, m] before smoothing the joints",
        min_over(grid(h.n, h.m, gs.points), |r| {
            let d = b.eval(r)[1];
            (d - 0.5).min(0.75 - d) + 1e-15
        }),
    );
    rep.push("h > 0 and h' > 0", positive_increasing(h, h.n - 1.0, h.rho + 1.0, gs));
    let near = |c: f64| s.windows().iter().find(|w| w.center == c).copied();
    let win_min = |c: f64, k: f64| {
        near(c).map_or(f64::NEG_INFINITY, |w| min_over(window_points(&w, gs.window_points), |r| ratio2(s, r) - k))
    };
    rep.push("h''/h > 1/9 near n", win_min(h.n, 1.0 / 9.0));
    rep.push("h''/h > eps^6 near m", win_min(h.m, eps.powi(6)));
    rep.push("h''/h > eps^6 near rho", win_min(h.rho, eps.powi(6)));
    rep.push("smooth h is C1-close to the C1 profile", gs.c1_tolerance - c1_distance(h, gs.window_points));
    rep
}

pub fn verify_g(g: &GProfile, gs: &ProfileGrid) -> ProfileReport {
    let sigma = g.params.sigma;
    let (s, b) = (&g.log_g, &g.c1);
    let mut rep = ProfileReport { profile: "g".into(), checks: Vec::new() };
    rep.push("tau in (0, 2 eps)", g.tau.min(2.0 * g.params.eps - g.tau));
    let fp = Expr::LnTauExp { tau: g.tau }.eval(g.p)[1];
    rep.push_exact("(ln(tau + e^(r/2)))' = 1/4 at p", std::iter::once((fp - 0.25).abs()));
    rep.push("p < bend_point < o", (g.bend_point - g.p).min(g.o - g.bend_point));
    rep.push_exact(
        "g = tau + e^(r/2) for r <= p - sigma",
        grid(g.p - sigma - 5.0, g.p - sigma, gs.points).map(exp_diff(s, |r| g.tau + (0.5 * r).exp())),
    );
    let hs = g.h.log_function();
    let right = grid(g.o + sigma, g.h.rho + 2.0, gs.points)
        .chain(hs.windows().iter().flat_map(|w| window_points(w, gs.window_points)))
        .collect::<Vec<_>>();
    rep.push_exact("g = h for r >= o + sigma", right.into_iter().map(exp_diff(s, |r| hs.eval_exp(r)[0])));
    rep.push(
        "(ln g)' in [1/4, 1/2] on [p, o] before smoothing the joints",
        min_over(grid(g.p, g.o, gs.points), |r| {
            let d = b.eval(r)[1];
            (d - 0.25).min(0.5 - d) + 1e-15
        }),
    );
    rep.push("g > 0 and g' > 0", positive_increasing(g, g.p - 1.0, g.h.rho + 1.0, gs));
    let own = s.windows().iter().filter(|w| w.center <= g.o).flat_map(|w| window_points(w, gs.window_points));
    rep.push(
        "g''/g > 1/25 on [p - sigma, o + sigma]",
        min_over(grid(g.p - sigma, g.o + sigma, gs.points).chain(own), |r| ratio2(s, r) - 1.0 / 25.0),
    );
    rep.push("smooth g is C1-close to the C1 profile", gs.c1_tolerance - c1_distance(g, gs.window_points));
    rep
}

/// Serialized profile: named breakpoints as shortest round-trip decimals and
/// the full smoothed logarithm.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProfileDocument {
    pub profile: String,
    pub params: EpsilonParams,
    pub breakpoints: BTreeMap<String, String>,
    pub log_function: SmoothedFunction,
    pub c1_base: SmoothedFunction,
}

impl ProfileDocument {
    pub fn from_profile(p: &dyn WarpProfile) -> Self {
        Self {
            profile: p.name().to_string(),
            params: *p.params(),
            breakpoints: p.breakpoints().into_iter().map(|(k, v)| (k, format!("{v:?}"))).collect(),
            log_function: p.log_function().clone(),
            c1_base: p.c1_base().clone(),
        }
    }

    pub fn to_json(&self) -> Result<String> {
        serde_json::to_string_pretty(self).map_err(|e| Error::Parse(e.to_string()))
    }

    pub fn from_json(text: &str) -> Result<LoadedProfile> {
        let doc: ProfileDocument = serde_json::from_str(text).map_err(|e| Error::Parse(e.to_string()))?;
        let name = match doc.profile.as_str() {
            "v" => "v",
            "h" => "h",
            "g" => "g",
            other => return Err(Error::Parse(format!("unknown profile kind {other:?}"))),
        };
        let breakpoints = doc
            .breakpoints
            .iter()
            .map(|(k, v)| v.parse::<f64>().map(|x| (k.clone(), x)).map_err(|e| Error::Parse(format!("{k}: {e}"))))
            .collect::<Result<_>>()?;
        Ok(LoadedProfile { name, breakpoints, doc })
    }
}

/// A profile reloaded from JSON.
#[derive(Debug, Clone, PartialEq)]
pub struct LoadedProfile {
    name: &'static str,
    breakpoints: BTreeMap<String, f64>,
    pub doc: ProfileDocument,
}

impl WarpProfile for LoadedProfile {
    fn name(&self) -> &'static str {
        self.name
    }
    fn params(&self) -> &EpsilonParams {
        &self.doc.params
    }
    fn log_function(&self) -> &SmoothedFunction {
        &self.doc.log_function
    }
    fn c1_base(&self) -> &SmoothedFunction {
        &self.doc.c1_base
    }
    fn breakpoints(&self) -> BTreeMap<String, f64> {
        self.breakpoints.clone()
    }
}
