//! Mollifier smoothing of convex splices and tangent-line bending.
//!
//! Everything here is `f64`: the convolution integrals are evaluated with
//! Gauss–Legendre rules in window-local coordinates.

use crate::error::{Error, Result};
use crate::quadrature::GaussLegendre;
use serde::{Deserialize, Serialize};
use std::collections::HashMap;
use std::f64::consts::LN_2;
use std::sync::{Arc, Mutex, OnceLock};

/// Value, first and second derivative.
pub type Jet = [f64; 3];

pub const DEFAULT_QUADRATURE_ORDER: usize = 32;

/// Closed catalog of analytic segment expressions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Expr {
    /// `value + slope (r - anchor)`
    Affine { slope: f64, anchor: f64, value: f64 },
    /// `ln(scale e^{rate r})`
    LnScaledExp { scale: f64, rate: f64 },
    /// `ln sinh(rate r)`
    LnSinh { rate: f64 },
    /// `ln cosh(rate r)`
    LnCosh { rate: f64 },
    /// `ln(c0 + c1 s + c2 s²)` with `s = r - center`
    LnQuadratic { c0: f64, c1: f64, c2: f64, center: f64 },
    /// `ln(tau + e^{r/2})`
    LnTauExp { tau: f64 },
    /// `coeff (r - center)²`
    Quadratic { coeff: f64, center: f64 },
    Sum { terms: Vec<Expr> },
    Scaled { factor: f64, expr: Box<Expr> },
}

fn ln_sinh(x: f64) -> f64 {
    if x > 20.0 {
        x - LN_2 + (-(-2.0 * x).exp()).ln_1p()
    } else {
        x.sinh().ln()
    }
}

fn ln_cosh(x: f64) -> f64 {
    let a = x.abs();
    if a > 20.0 {
        a - LN_2 + (-2.0 * a).exp().ln_1p()
    } else {
        x.cosh().ln()
    }
}

impl Expr {
    /// `a r + b`
    pub fn affine(slope: f64, intercept: f64) -> Self {
        Expr::Affine { slope, anchor: 0.0, value: intercept }
    }

    /// Line through `(anchor, value)` with the given slope.
    pub fn line(slope: f64, anchor: f64, value: f64) -> Self {
        Expr::Affine { slope, anchor, value }
    }

    pub fn plus(self, other: Expr) -> Self {
        match self {
            Expr::Sum { mut terms } => {
                terms.push(other);
                Expr::Sum { terms }
            }
            first => Expr::Sum { terms: vec![first, other] },
        }
    }

    pub fn eval(&self, r: f64) -> Jet {
        match self {
            Expr::Affine { slope, anchor, value } => [value + slope * (r - anchor), *slope, 0.0],
            Expr::LnScaledExp { scale, rate } => [scale.ln() + rate * r, *rate, 0.0],
            Expr::LnSinh { rate } => {
                let x = rate * r;
                let s = x.sinh();
                [ln_sinh(x), rate / x.tanh(), -rate * rate / (s * s)]
            }
            Expr::LnCosh { rate } => {
                let x = rate * r;
                let c = x.cosh();
                [ln_cosh(x), rate * x.tanh(), rate * rate / (c * c)]
            }
            Expr::LnQuadratic { c0, c1, c2, center } => {
                let s = r - center;
                let q = c0 + s * (c1 + c2 * s);
                let d = (c1 + 2.0 * c2 * s) / q;
                [q.ln(), d, 2.0 * c2 / q - d * d]
            }
            Expr::LnTauExp { tau } => {
                // y = tau e^{-r/2}
                let y = (tau.ln() - 0.5 * r).exp();
                let value = if y < 1.0 { 0.5 * r + y.ln_1p() } else { tau.ln() + y.recip().ln_1p() };
                let f = 0.5 / (1.0 + y);
                [value, f, f * (0.5 * y / (1.0 + y))]
            }
            Expr::Quadratic { coeff, center } => {
                let s = r - center;
                [coeff * s * s, 2.0 * coeff * s, 2.0 * coeff]
            }
            Expr::Sum { terms } => terms.iter().fold([0.0; 3], |acc, e| {
                let j = e.eval(r);
                [acc[0] + j[0], acc[1] + j[1], acc[2] + j[2]]
            }),
            Expr::Scaled { factor, expr } => {
                let j = expr.eval(r);
                [factor * j[0], factor * j[1], factor * j[2]]
            }
        }
    }

    /// `f(a + t) - f(a)` without cancellation for small `t`.
    pub fn increment(&self, a: f64, t: f64) -> f64 {
        if t == 0.0 {
            return 0.0;
        }
        match self {
            Expr::Affine { slope, .. } => slope * t,
            Expr::LnScaledExp { rate, .. } => rate * t,
            Expr::LnSinh { rate } | Expr::LnCosh { rate } if (rate * t).abs() > 0.5 => {
                self.eval(a + t)[0] - self.eval(a)[0]
            }
            Expr::LnSinh { rate } => {
                let (x, s) = (rate * a, rate * t);
                let h = (0.5 * s).sinh();
                (2.0 * h * h + s.sinh() / x.tanh()).ln_1p()
            }
            Expr::LnCosh { rate } => {
                let (x, s) = (rate * a, rate * t);
                let h = (0.5 * s).sinh();
                (2.0 * h * h + x.tanh() * s.sinh()).ln_1p()
            }
            Expr::LnQuadratic { c0, c1, c2, center } => {
                let s = a - center;
                let q = c0 + s * (c1 + c2 * s);
                (t * (c1 + c2 * (2.0 * s + t)) / q).ln_1p()
            }
            Expr::LnTauExp { .. } if t.abs() > 1.0 => self.eval(a + t)[0] - self.eval(a)[0],
            Expr::LnTauExp { tau } => {
                let y = (tau.ln() - 0.5 * a).exp();
                ((0.5 * t).exp_m1() / (1.0 + y)).ln_1p()
            }
            Expr::Quadratic { coeff, center } => coeff * t * (2.0 * (a - center) + t),
            Expr::Sum { terms } => terms.iter().map(|e| e.increment(a, t)).sum(),
            Expr::Scaled { factor, expr } => factor * expr.increment(a, t),
        }
    }

    /// Jet of `e^{self}` from a closed form, when the expression has one.
    pub fn exp_jet(&self, r: f64) -> Option<Jet> {
        match self {
            Expr::LnScaledExp { scale, rate } => {
                let e = scale * (rate * r).exp();
                Some([e, rate * e, rate * rate * e])
            }
            Expr::LnSinh { rate } => {
                let x = rate * r;
                Some([x.sinh(), rate * x.cosh(), rate * rate * x.sinh()])
            }
            Expr::LnCosh { rate } => {
                let x = rate * r;
                Some([x.cosh(), rate * x.sinh(), rate * rate * x.cosh()])
            }
            Expr::LnTauExp { tau } => {
                let e = (0.5 * r).exp();
                Some([tau + e, 0.5 * e, 0.25 * e])
            }
            Expr::LnQuadratic { c0, c1, c2, center } => {
                let s = r - center;
                Some([c0 + s * (c1 + c2 * s), c1 + 2.0 * c2 * s, 2.0 * c2])
            }
            _ => None,
        }
    }
}

/// Jet of `e^f` from the jet of `f`.
pub fn exp_of_jet(j: Jet) -> Jet {
    let e = j[0].exp();
    [e, e * j[1], e * (j[2] + j[1] * j[1])]
}

/// Piecewise analytic function on `domain`; segment `i` covers
/// `[breakpoints[i-1], breakpoints[i]]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PiecewiseExpr {
    breakpoints: Vec<f64>,
    segments: Vec<Expr>,
    #[serde(with = "bounds_as_text")]
    domain: (f64, f64),
}

/// Domain bounds as decimal strings so that infinite ends survive JSON.
mod bounds_as_text {
    use serde::{de::Error as _, Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(b: &(f64, f64), s: S) -> Result<S::Ok, S::Error> {
        s.collect_seq([format!("{:?}", b.0), format!("{:?}", b.1)])
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<(f64, f64), D::Error> {
        let [lo, hi] = <[String; 2]>::deserialize(d)?;
        let parse = |t: &str| t.parse::<f64>().map_err(D::Error::custom);
        Ok((parse(&lo)?, parse(&hi)?))
    }
}

impl PiecewiseExpr {
    pub fn single(expr: Expr) -> Self {
        Self {
            breakpoints: Vec::new(),
            segments: vec![expr],
            domain: (f64::NEG_INFINITY, f64::INFINITY),
        }
    }

    pub fn new(breakpoints: Vec<f64>, segments: Vec<Expr>) -> Result<Self> {
        Self::with_domain(breakpoints, segments, (f64::NEG_INFINITY, f64::INFINITY))
    }

    pub fn with_domain(breakpoints: Vec<f64>, segments: Vec<Expr>, domain: (f64, f64)) -> Result<Self> {
        if segments.len() != breakpoints.len() + 1 {
            return Err(Error::Parameter(format!(
                "{} breakpoints need {} segments, got {}",
                breakpoints.len(),
                breakpoints.len() + 1,
                segments.len()
            )));
        }
        if breakpoints.windows(2).any(|w| !(w[0] < w[1])) || breakpoints.iter().any(|b| !b.is_finite()) {
            return Err(Error::Parameter("breakpoints must be finite and strictly increasing".into()));
        }
        if !(domain.0 < domain.1) {
            return Err(Error::Parameter("empty domain".into()));
        }
        if let (Some(&lo), Some(&hi)) = (breakpoints.first(), breakpoints.last()) {
            if !(domain.0 < lo && hi < domain.1) {
                return Err(Error::Parameter("breakpoints must lie inside the domain".into()));
            }
        }
        let pw = Self { breakpoints, segments, domain };
        for (i, &b) in pw.breakpoints.iter().enumerate() {
            let left = pw.segments[i].eval(b);
            let right = pw.segments[i + 1].eval(b);
            if left.iter().chain(&right).any(|x| !x.is_finite()) {
                return Err(Error::Domain(format!("segment evaluator not finite at breakpoint {b}")));
            }
            if (left[0] - right[0]).abs() > 1e-12 * left[0].abs().max(1.0) {
                return Err(Error::Continuity { left: left[0], right: right[0] });
            }
        }
        Ok(pw)
    }

    pub fn breakpoints(&self) -> &[f64] {
        &self.breakpoints
    }

    pub fn segments(&self) -> &[Expr] {
        &self.segments
    }

    pub fn domain(&self) -> (f64, f64) {
        self.domain
    }

    pub fn contains(&self, r: f64) -> bool {
        self.domain.0 <= r && r <= self.domain.1
    }

    /// Index of the segment used at `r` (right-continuous at breakpoints).
    pub fn segment_index(&self, r: f64) -> usize {
        self.breakpoints.partition_point(|&b| b <= r)
    }

    pub fn eval(&self, r: f64) -> Jet {
        self.segments[self.segment_index(r)].eval(r)
    }

    /// One-sided jet from the left.
    pub fn eval_left(&self, r: f64) -> Jet {
        self.segments[self.breakpoints.partition_point(|&b| b < r)].eval(r)
    }

    /// Jet of `e^f`, using the segment's closed form when it has one.
    pub fn eval_exp(&self, r: f64) -> Jet {
        let seg = &self.segments[self.segment_index(r)];
        seg.exp_jet(r).unwrap_or_else(|| exp_of_jet(seg.eval(r)))
    }

    /// `f'(b+) - f'(b-)` at breakpoint `i`.
    pub fn slope_jump(&self, i: usize) -> f64 {
        let b = self.breakpoints[i];
        self.segments[i + 1].eval(b)[1] - self.segments[i].eval(b)[1]
    }

    /// `f(a + t) - f(a)`, summing segment increments across breakpoints.
    pub fn increment(&self, a: f64, t: f64) -> f64 {
        LocalView::new(self, a, t.abs()).increment(t)
    }

    /// Restricts to `(-∞, c]` from `self` and `[c, ∞)` from `right`.
    pub fn splice(&self, c: f64, right: &PiecewiseExpr) -> Result<Self> {
        let mut bps: Vec<f64> = self.breakpoints.iter().copied().filter(|&b| b < c).collect();
        let mut segs: Vec<Expr> = self.segments[..=bps.len()].to_vec();
        bps.push(c);
        let first_right = right.breakpoints.partition_point(|&b| b <= c);
        segs.extend_from_slice(&right.segments[first_right..]);
        bps.extend_from_slice(&right.breakpoints[first_right..]);
        Self::with_domain(bps, segs, (self.domain.0, right.domain.1))
    }

    /// Adds `extra` on `[lo, hi]`, inserting `lo` and `hi` as breakpoints.
    pub fn add_on(&self, lo: f64, hi: f64, extra: &Expr) -> Result<Self> {
        let raw = self.add_on_raw(lo, hi, extra)?;
        Self::with_domain(raw.breakpoints, raw.segments, raw.domain)
    }

    fn add_on_raw(&self, lo: f64, hi: f64, extra: &Expr) -> Result<Self> {
        if !(lo < hi) {
            return Err(Error::Parameter("empty interval".into()));
        }
        let mut bps = Vec::new();
        let mut segs = Vec::new();
        let mut cuts: Vec<f64> = self.breakpoints.clone();
        for x in [lo, hi] {
            if !cuts.contains(&x) {
                cuts.push(x);
            }
        }
        cuts.sort_by(f64::total_cmp);
        let mut prev = f64::NEG_INFINITY;
        for &b in cuts.iter().chain(std::iter::once(&f64::INFINITY)) {
            let probe = if prev.is_finite() && b.is_finite() {
                0.5 * (prev + b)
            } else if b.is_finite() {
                b - 1.0
            } else {
                prev + 1.0
            };
            let seg = self.segments[self.segment_index(probe)].clone();
            segs.push(if lo <= probe && probe <= hi { seg.plus(extra.clone()) } else { seg });
            if b.is_finite() {
                bps.push(b);
            }
            prev = b;
        }
        Ok(Self { breakpoints: bps, segments: segs, domain: self.domain })
    }
}

/// Window-local view of a piecewise function around `anchor`.
struct LocalView<'a> {
    f: &'a PiecewiseExpr,
    anchor: f64,
    first: usize,
    local: Vec<f64>,
    pos: usize,
    neg: usize,
}

impl<'a> LocalView<'a> {
    fn new(f: &'a PiecewiseExpr, anchor: f64, reach: f64) -> Self {
        let bps = &f.breakpoints;
        let first = bps.partition_point(|&b| b < anchor - reach);
        let last = bps.partition_point(|&b| b <= anchor + reach);
        let local: Vec<f64> = bps[first..last].iter().map(|b| b - anchor).collect();
        let pos = local.partition_point(|&b| b <= 0.0);
        let neg = local.partition_point(|&b| b < 0.0);
        Self { f, anchor, first, local, pos, neg }
    }

    fn seg(&self, i: usize) -> &Expr {
        &self.f.segments[self.first + i]
    }

    fn increment(&self, s: f64) -> f64 {
        let bps = &self.f.breakpoints;
        let mut acc = 0.0;
        let mut prev = 0.0;
        let mut start = self.anchor;
        if s >= 0.0 {
            let mut i = self.pos;
            while i < self.local.len() && self.local[i] < s {
                acc += self.seg(i).increment(start, self.local[i] - prev);
                prev = self.local[i];
                start = bps[self.first + i];
                i += 1;
            }
            acc + self.seg(i).increment(start, s - prev)
        } else {
            let mut i = self.neg;
            while i > 0 && self.local[i - 1] > s {
                acc += self.seg(i).increment(start, self.local[i - 1] - prev);
                prev = self.local[i - 1];
                start = bps[self.first + i - 1];
                i -= 1;
            }
            acc + self.seg(i).increment(start, s - prev)
        }
    }

    /// `[f(anchor+s) - f(anchor), f'(anchor+s), f''(anchor+s)]`
    fn jet(&self, s: f64) -> Jet {
        let i = self.local.partition_point(|&b| b <= s);
        let j = self.seg(i).eval(self.anchor + s);
        [self.increment(s), j[1], j[2]]
    }

    fn jumps(&self) -> impl Iterator<Item = (f64, f64)> + '_ {
        self.local
            .iter()
            .enumerate()
            .map(move |(i, &b)| (b, self.f.slope_jump(self.first + i)))
    }
}

/// Smooth step on `[0, 1]` built from the `exp(-1/x)` germ, with two derivatives.
fn smooth_step(x: f64) -> Jet {
    if x <= 0.0 {
        return [0.0, 0.0, 0.0];
    }
    if x >= 1.0 {
        return [1.0, 0.0, 0.0];
    }
    let y = 1.0 - x;
    let w = 1.0 / y - 1.0 / x;
    let w1 = 1.0 / (y * y) + 1.0 / (x * x);
    let w2 = 2.0 / (y * y * y) - 2.0 / (x * x * x);
    let e = (-w.abs()).exp();
    let l = if w >= 0.0 { 1.0 / (1.0 + e) } else { e / (1.0 + e) };
    let ll = e / ((1.0 + e) * (1.0 + e));
    [l, ll * w1, ll * (w2 + (1.0 - 2.0 * l) * w1 * w1)]
}

/// Bump on `(-1, 1)`: equal to 1 on `[-1/2, 1/2]`, smooth, even, vanishing
/// to infinite order at `±1`. Returns value and two derivatives.
pub fn bump(u: f64) -> Jet {
    let a = u.abs();
    if a <= 0.5 {
        return [1.0, 0.0, 0.0];
    }
    if a >= 1.0 {
        return [0.0, 0.0, 0.0];
    }
    let s = smooth_step(2.0 - 2.0 * a);
    [s[0], -2.0 * u.signum() * s[1], 4.0 * s[2]]
}

/// `∫ bump = 3/2`: the plateau contributes 1 and each flank 1/4, since
/// the smooth step satisfies `S(x) + S(1-x) = 1`.
pub const BUMP_MASS: f64 = 1.5;

/// Mollifier `θ_δ(y) = bump(y/δ) / (δ ∫bump)` with its quadrature order.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MollifierSpec {
    pub delta: f64,
    pub quadrature_order: usize,
}

impl MollifierSpec {
    pub fn new(delta: f64) -> Result<Self> {
        Self::with_order(delta, DEFAULT_QUADRATURE_ORDER)
    }

    pub fn with_order(delta: f64, quadrature_order: usize) -> Result<Self> {
        if !(delta > 0.0) || !delta.is_finite() {
            return Err(Error::Parameter(format!("mollifier half-width must be positive, got {delta}")));
        }
        if quadrature_order < 2 {
            return Err(Error::Parameter("quadrature order must be at least 2".into()));
        }
        Ok(Self { delta, quadrature_order })
    }

    pub fn kernel(&self, y: f64) -> f64 {
        bump(y / self.delta)[0] / (self.delta * BUMP_MASS)
    }

    /// `(θ_δ * θ_δ)(x)`
    pub fn kernel_square(&self, x: f64) -> f64 {
        self.kernel_square_with(&GaussLegendre::cached(self.quadrature_order), x)
    }

    fn kernel_square_with(&self, rule: &GaussLegendre, x: f64) -> f64 {
        let d = self.delta;
        if x.abs() >= 2.0 * d {
            return 0.0;
        }
        let lo = (-d).max(x - d);
        let hi = d.min(x + d);
        let cuts = [-0.5 * d, 0.5 * d, x - 0.5 * d, x + 0.5 * d];
        integrate_split(rule, lo, hi, &cuts, |y| self.kernel(y) * self.kernel(x - y))
    }
}

fn integrate_split(rule: &GaussLegendre, lo: f64, hi: f64, cuts: &[f64], mut f: impl FnMut(f64) -> f64) -> f64 {
    let mut pts: Vec<f64> = cuts.iter().copied().filter(|&c| lo < c && c < hi).collect();
    pts.push(lo);
    pts.push(hi);
    pts.sort_by(f64::total_cmp);
    pts.dedup();
    pts.windows(2).map(|w| rule.integrate(w[0], w[1], &mut f)).sum()
}

fn integrate_split_jet(rule: &GaussLegendre, lo: f64, hi: f64, cuts: &[f64], mut f: impl FnMut(f64) -> Jet) -> Jet {
    let mut pts: Vec<f64> = cuts.iter().copied().filter(|&c| lo < c && c < hi).collect();
    pts.push(lo);
    pts.push(hi);
    pts.sort_by(f64::total_cmp);
    pts.dedup();
    let mut acc = [0.0; 3];
    for w in pts.windows(2) {
        let (a, b) = (w[0], w[1]);
        let half = 0.5 * (b - a);
        let mid = 0.5 * (a + b);
        for (x, wt) in rule.nodes.iter().zip(&rule.weights) {
            let j = f(mid + half * x);
            for k in 0..3 {
                acc[k] += wt * half * j[k];
            }
        }
    }
    acc
}

const SQUARE_SEGMENTS: usize = 8;

/// `[-2δ, 2δ]` in half-δ pieces, on which `θ_δ * θ_δ` is analytic.
fn square_segment(d: f64, seg: usize) -> (f64, f64) {
    let a = 0.5 * d * (seg as f64 - 4.0);
    (a, a + 0.5 * d)
}

/// `θ_δ * θ_δ` at the quadrature nodes of every [`square_segment`], shared
/// across evaluations with the same half-width and order.
fn square_kernel_table(spec: &MollifierSpec, rule: &GaussLegendre) -> Arc<Vec<f64>> {
    static CACHE: OnceLock<Mutex<HashMap<(u64, usize), Arc<Vec<f64>>>>> = OnceLock::new();
    let key = (spec.delta.to_bits(), rule.nodes.len());
    let cache = CACHE.get_or_init(Default::default);
    if let Some(t) = cache.lock().unwrap_or_else(|e| e.into_inner()).get(&key) {
        return t.clone();
    }
    let d = spec.delta;
    let table: Vec<f64> = (0..SQUARE_SEGMENTS)
        .flat_map(|seg| {
            let (a, b) = square_segment(d, seg);
            let (half, mid) = (0.5 * (b - a), 0.5 * (a + b));
            rule.nodes.iter().map(move |x| spec.kernel_square_with(rule, mid + half * x))
        })
        .collect();
    let table = Arc::new(table);
    let mut guard = cache.lock().unwrap_or_else(|e| e.into_inner());
    if guard.len() >= 1024 {
        guard.clear();
    }
    guard.insert(key, table.clone());
    table
}

/// Convolution engine for one local view.
struct Convolver<'a> {
    view: LocalView<'a>,
    spec: MollifierSpec,
    rule: Arc<GaussLegendre>,
    scale: Scale,
}

impl<'a> Convolver<'a> {
    fn new(f: &'a PiecewiseExpr, anchor: f64, t_reach: f64, passes: u8, spec: MollifierSpec) -> Self {
        let reach = t_reach + passes as f64 * spec.delta;
        Self {
            view: LocalView::new(f, anchor, reach),
            spec,
            rule: GaussLegendre::cached(spec.quadrature_order),
            scale: Scale::Identity,
        }
    }

    fn with_scale(mut self, scale: Scale) -> Self {
        self.scale = scale;
        self
    }

    /// Local jet of the function being smoothed; in exponential scale this is
    /// `e^{f}` divided by `e^{f(anchor)}`, minus one.
    fn local(&self, s: f64) -> Jet {
        let j = self.view.jet(s);
        match self.scale {
            Scale::Identity => j,
            Scale::Exponential => {
                let e = j[0].exp();
                [j[0].exp_m1(), e * j[1], e * (j[2] + j[1] * j[1])]
            }
        }
    }

    /// `∫ G^{(m)}(u - z) θ(z) dz` for m = 0, 1, 2, without Dirac terms.
    fn single(&self, u: f64) -> Jet {
        let d = self.spec.delta;
        let mut cuts = vec![-0.5 * d, 0.5 * d];
        cuts.extend(self.view.local.iter().map(|b| u - b));
        integrate_split_jet(&self.rule, -d, d, &cuts, |z| {
            let k = self.spec.kernel(z);
            let j = self.local(u - z);
            [k * j[0], k * j[1], k * j[2]]
        })
    }

    /// Two passes folded into one integral against `θ_δ * θ_δ`. The squared
    /// kernel comes from the node table except on sub-intervals cut by a kink.
    fn double(&self, t: f64) -> Jet {
        let d = self.spec.delta;
        let table = square_kernel_table(&self.spec, &self.rule);
        let n = self.rule.nodes.len();
        let mut acc = [0.0; 3];
        for seg in 0..SQUARE_SEGMENTS {
            let (a, b) = square_segment(d, seg);
            let cuts: Vec<f64> = self.view.local.iter().map(|bp| t - bp).filter(|&c| a < c && c < b).collect();
            let part = if cuts.is_empty() {
                let (half, mid) = (0.5 * (b - a), 0.5 * (a + b));
                let mut part = [0.0; 3];
                for (i, (x, w)) in self.rule.nodes.iter().zip(&self.rule.weights).enumerate() {
                    let k = w * half * table[seg * n + i];
                    let j = self.local(t - (mid + half * x));
                    for m in 0..3 {
                        part[m] += k * j[m];
                    }
                }
                part
            } else {
                integrate_split_jet(&self.rule, a, b, &cuts, |x| {
                    let k = self.spec.kernel_square_with(&self.rule, x);
                    let j = self.local(t - x);
                    [k * j[0], k * j[1], k * j[2]]
                })
            };
            for m in 0..3 {
                acc[m] += part[m];
            }
        }
        acc
    }

    /// Local convolution jet including the slope-jump contributions to the
    /// second derivative.
    fn convolve(&self, t: f64, passes: u8) -> Jet {
        let mut j = if passes == 1 { self.single(t) } else { self.double(t) };
        for (b, mut jump) in self.view.jumps() {
            if self.scale == Scale::Exponential {
                jump *= self.view.increment(b).exp();
            }
            if jump != 0.0 {
                let k = if passes == 1 { self.spec.kernel(t - b) } else { self.spec.kernel_square(t - b) };
                j[2] += jump * k;
            }
        }
        j
    }
}

fn check_reach(f: &PiecewiseExpr, x: f64, reach: f64) -> Result<()> {
    if f.contains(x - reach) && f.contains(x + reach) {
        Ok(())
    } else {
        Err(Error::Domain(format!(
            "convolution window [{}, {}] leaves the domain {:?}",
            x - reach,
            x + reach,
            f.domain()
        )))
    }
}

/// `(f^{(deriv)})` convolved `passes` times with `θ_δ`, evaluated at `x`.
pub fn mollify(f: &PiecewiseExpr, spec: &MollifierSpec, passes: u8, deriv: u8, x: f64) -> Result<f64> {
    if !(1..=2).contains(&passes) || deriv > 2 {
        return Err(Error::Parameter(format!("passes must be 1 or 2 and deriv at most 2 (got {passes}, {deriv})")));
    }
    MollifierSpec::with_order(spec.delta, spec.quadrature_order)?;
    check_reach(f, x, passes as f64 * spec.delta)?;
    let j = Convolver::new(f, x, 0.0, passes, *spec).convolve(0.0, passes);
    Ok(if deriv == 0 { f.eval(x)[0] + j[0] } else { j[deriv as usize] })
}

/// [`mollify`] together with the difference against a rule of twice the order.
pub fn mollify_with_estimate(
    f: &PiecewiseExpr,
    spec: &MollifierSpec,
    passes: u8,
    deriv: u8,
    x: f64,
) -> Result<(f64, f64)> {
    let coarse = mollify(f, spec, passes, deriv, x)?;
    let fine_spec = MollifierSpec::with_order(spec.delta, 2 * spec.quadrature_order)?;
    let fine = mollify(f, &fine_spec, passes, deriv, x)?;
    Ok((coarse, (fine - coarse).abs()))
}

/// Which function a window smooths: the base itself, or `e^{base}`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scale {
    #[default]
    Identity,
    Exponential,
}

/// A smoothing window `[center - sigma, center + sigma]` with mollifier half-width `delta`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Window {
    pub center: f64,
    pub delta: f64,
    pub sigma: f64,
    #[serde(default)]
    pub scale: Scale,
}

impl Window {
    fn reach(&self) -> f64 {
        self.sigma + 2.0 * self.delta
    }
}

/// A piecewise base smoothed inside disjoint windows; equal to the base elsewhere.
///
/// An exponential-scale window smooths `e^{base}`; the function represented is
/// then the logarithm of that smoothing inside the window.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SmoothedFunction {
    base: PiecewiseExpr,
    windows: Vec<Window>,
    quadrature_order: usize,
}

impl SmoothedFunction {
    pub fn new(base: PiecewiseExpr) -> Self {
        Self { base, windows: Vec::new(), quadrature_order: DEFAULT_QUADRATURE_ORDER }
    }

    pub fn with_quadrature_order(mut self, order: usize) -> Self {
        self.quadrature_order = order.max(2);
        self
    }

    pub fn base(&self) -> &PiecewiseExpr {
        &self.base
    }

    pub fn windows(&self) -> &[Window] {
        &self.windows
    }

    pub fn quadrature_order(&self) -> usize {
        self.quadrature_order
    }

    /// Copy keeping only the windows accepted by `keep`.
    pub fn retain_windows(&self, keep: impl Fn(&Window) -> bool) -> Self {
        Self {
            base: self.base.clone(),
            windows: self.windows.iter().copied().filter(|w| keep(w)).collect(),
            quadrature_order: self.quadrature_order,
        }
    }

    /// Adds an identity-scale smoothing window at `c`.
    pub fn add_window(&mut self, c: f64, delta: f64, sigma: f64) -> Result<()> {
        self.add_scaled_window(c, delta, sigma, Scale::Identity)
    }

    pub fn add_scaled_window(&mut self, c: f64, delta: f64, sigma: f64, scale: Scale) -> Result<()> {
        if !(sigma > 0.0) || !(delta > 0.0) || !(delta < sigma / 4.0) {
            return Err(Error::Parameter(format!(
                "window needs 0 < δ < σ/4 (δ={delta}, σ={sigma})"
            )));
        }
        let w = Window { center: c, delta, sigma, scale };
        check_reach(&self.base, c, w.reach())?;
        let bps = self.base.breakpoints();
        if bps.contains(&c) {
            let left = self.base.eval_left(c)[1];
            let right = self.base.eval(c)[1];
            if left > right + 1e-12 * left.abs().max(right.abs()).max(1.0) {
                return Err(Error::ConvexityViolation { c, left, right });
            }
        }
        if bps.iter().any(|&b| b != c && (b - c).abs() <= w.reach()) {
            return Err(Error::Parameter(format!(
                "window at {c} (σ={sigma}, δ={delta}) reaches another breakpoint"
            )));
        }
        for o in &self.windows {
            let gap = (o.center - c).abs();
            if gap <= o.sigma + w.reach() || gap <= w.sigma + o.reach() {
                return Err(Error::Parameter(format!(
                    "window at {c} overlaps the window at {}",
                    o.center
                )));
            }
        }
        self.windows.push(w);
        self.windows.sort_by(|a, b| a.center.total_cmp(&b.center));
        Ok(())
    }

    /// Index of the window whose open σ-interval contains `r`, if the blend
/// weight is nonzero there.
    pub fn window_at(&self, r: f64) -> Option<usize> {
        let i = self.windows.partition_point(|w| w.center + w.sigma <= r);
        let w = self.windows.get(i)?;
        let u = (r - w.center) / w.sigma;
        // where the blend weight vanishes the smoothing is the base itself
        (u.abs() < 1.0 && bump(u)[0] > 0.0).then_some(i)
    }

    /// Jet of the represented function at `r`.
    pub fn eval(&self, r: f64) -> Jet {
        let Some(i) = self.window_at(r) else {
            return self.base.eval(r);
        };
        let w = self.windows[i];
        let f0 = self.base.eval(w.center)[0];
        let local = self.eval_local(i, r - w.center);
        match w.scale {
            Scale::Identity => [f0 + local[0], local[1], local[2]],
            Scale::Exponential => {
                let d1 = local[1] / (1.0 + local[0]);
                [f0 + local[0].ln_1p(), d1, local[2] / (1.0 + local[0]) - d1 * d1]
            }
        }
    }

    /// Jet of `e^F`. Outside the windows the closed forms of the base segments
    /// are used, so the result is bit-identical to the analytic expression.
    pub fn eval_exp(&self, r: f64) -> Jet {
        let Some(i) = self.window_at(r) else {
            return self.base.eval_exp(r);
        };
        let w = self.windows[i];
        match w.scale {
            Scale::Identity => exp_of_jet(self.eval(r)),
            Scale::Exponential => {
                let e = self.base.eval(w.center)[0].exp();
                let local = self.eval_local(i, r - w.center);
                [e * (1.0 + local[0]), e * local[1], e * local[2]]
            }
        }
    }

    /// Window-local jet for window `i` centered at `c`: `[F(c+t) - f(c), F', F'']`
    /// in identity scale, and `[e^{F-f(c)} - 1, ...]` with derivatives of
    /// `e^{F-f(c)}` in exponential scale.
    pub fn eval_local(&self, i: usize, t: f64) -> Jet {
        let w = self.windows[i];
        let u = t / w.sigma;
        let phi = bump(u);
        let spec = MollifierSpec { delta: w.delta, quadrature_order: self.quadrature_order };
        let conv = Convolver::new(&self.base, w.center, t.abs(), 2, spec).with_scale(w.scale);
        if phi[0] == 0.0 {
            return conv.local(t);
        }
        let a = conv.convolve(t, 2);
        if phi[0] == 1.0 && phi[1] == 0.0 {
            return a;
        }
        let g = conv.local(t);
        let (p, p1, p2) = (phi[0], phi[1] / w.sigma, phi[2] / (w.sigma * w.sigma));
        [
            p * a[0] + (1.0 - p) * g[0],
            p * a[1] + (1.0 - p) * g[1] + p1 * (a[0] - g[0]),
            p * a[2] + (1.0 - p) * g[2] + 2.0 * p1 * (a[1] - g[1]) + p2 * (a[0] - g[0]),
        ]
    }

    /// Minimum of `F'' - k` on an `n`-point uniform grid of `[lo, hi]`.
    pub fn second_derivative_margin(&self, lo: f64, hi: f64, n: usize, k: f64) -> f64 {
        grid(lo, hi, n).map(|x| self.eval(x)[2] - k).fold(f64::INFINITY, f64::min)
    }
}

/// `n` evenly spaced points covering `[lo, hi]`.
pub fn grid(lo: f64, hi: f64, n: usize) -> impl Iterator<Item = f64> {
    let step = if n > 1 { (hi - lo) / (n - 1) as f64 } else { 0.0 };
    (0..n).map(move |i| if i + 1 == n && n > 1 { hi } else { lo + step * i as f64 })
}

/// Smooths `f` in the window `[c - σ, c + σ]` with mollifier half-width `δ`.
pub fn smooth_at(f: &PiecewiseExpr, c: f64, delta: f64, sigma: f64) -> Result<SmoothedFunction> {
    let mut sf = SmoothedFunction::new(f.clone());
    sf.add_window(c, delta, sigma)?;
    Ok(sf)
}

/// True iff the pieces agree at `c` and `f1'(c) ≤ f2'(c)`.
pub fn check_splice_convexity(f1: &PiecewiseExpr, f2: &PiecewiseExpr, c: f64) -> bool {
    let l = f1.eval_left(c);
    let r = f2.eval(c);
    let scale = l[0].abs().max(r[0].abs()).max(1.0);
    (l[0] - r[0]).abs() <= 1e-12 * scale && l[1] <= r[1]
}

/// Bends the splice of `f1` on `[a1, c]` and `f2` on `[c, a2]` by the quadratic
/// corrections that vanish to first order at `a1`, `a2`, then smooths at `c`.
///
/// The result equals `f1` left of `a1` and `f2` right of `a2`; at `a1`, `a2` it
/// is C¹ with value and slope of the unbent splice.
#[allow(clippy::too_many_arguments)]
pub fn bend_splice(
    f1: &PiecewiseExpr,
    f2: &PiecewiseExpr,
    a1: f64,
    c: f64,
    a2: f64,
    delta: f64,
    sigma: f64,
    k: f64,
) -> Result<SmoothedFunction> {
    if !(a1 < c && c < a2) {
        return Err(Error::Parameter(format!("need a1 < c < a2, got {a1}, {c}, {a2}")));
    }
    let l = f1.eval_left(c);
    let r = f2.eval(c);
    let scale = l[0].abs().max(r[0].abs()).max(1.0);
    if (l[0] - r[0]).abs() > 1e-12 * scale {
        return Err(Error::Continuity { left: l[0], right: r[0] });
    }
    if !(l[1] < r[1]) {
        return Err(Error::SlopeOrder { left: l[1], right: r[1] });
    }
    for (f, lo, hi) in [(f1, a1, c), (f2, c, a2)] {
        let worst = grid(lo, hi, 65)
            .map(|x| if x == hi { f.eval_left(x)[2] } else { f.eval(x)[2] })
            .fold(f64::INFINITY, f64::min);
        if worst < k {
            return Err(Error::Parameter(format!("piece has second derivative {worst} below k = {k}")));
        }
    }
    let ratio = (c - a1) * (c - a1) / ((c - a2) * (c - a2));
    let joined = f1.splice(c, f2)?;
    let bent = joined
        .add_on_raw(a1, c, &Expr::Quadratic { coeff: delta, center: a1 })?
        .add_on(c, a2, &Expr::Quadratic { coeff: delta * ratio, center: a2 })?;
    let bl = bent.eval_left(c)[1];
    let br = bent.eval(c)[1];
    if !(bl < br) {
        return Err(Error::SlopeOrder { left: bl, right: br });
    }
    smooth_at(&bent, c, delta, sigma)
}

/// One row of [`c1_convergence_probe`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ProbeRow {
    pub delta: f64,
    pub sup_value: f64,
    pub sup_slope: f64,
}

/// Sup-distances between `f` and its smoothing at `c`, per `δ`, over a
/// 1000-point window grid that avoids `c` itself.
pub fn c1_convergence_probe(f: &PiecewiseExpr, c: f64, sigma: f64, deltas: &[f64]) -> Result<Vec<ProbeRow>> {
    let n = 1000;
    deltas
        .iter()
        .map(|&delta| {
            let sf = smooth_at(f, c, delta, sigma)?;
            let mut row = ProbeRow { delta, sup_value: 0.0, sup_slope: 0.0 };
            for i in 0..n {
                let t = -sigma + (2.0 * i as f64 + 1.0) * sigma / n as f64;
                let x = c + t;
                let base = f.eval(x);
                let sm = sf.eval(x);
                row.sup_value = row.sup_value.max((sm[0] - base[0]).abs());
                row.sup_slope = row.sup_slope.max((sm[1] - base[1]).abs());
            }
            Ok(row)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn kink() -> PiecewiseExpr {
        PiecewiseExpr::new(vec![0.0], vec![Expr::affine(1.0, 0.0), Expr::affine(2.0, 0.0)]).unwrap()
    }

    #[test]
    fn kernel_has_unit_mass_and_plateau() {
        let spec = MollifierSpec::new(0.3).unwrap();
        let rule = GaussLegendre::cached(64);
        let mass = integrate_split(&rule, -0.3, 0.3, &[-0.15, 0.15], |y| spec.kernel(y));
        assert!((mass - 1.0).abs() < 1e-13, "{mass}");
        assert_eq!(spec.kernel(0.1), spec.kernel(-0.15));
        assert_eq!(spec.kernel(0.3), 0.0);
    }

    #[test]
    fn bump_derivatives_match_differences() {
        for u in [0.55, 0.7, 0.8, 0.93, -0.6] {
            let h = 1e-6;
            let fd1 = (bump(u + h)[0] - bump(u - h)[0]) / (2.0 * h);
            let fd2 = (bump(u + h)[1] - bump(u - h)[1]) / (2.0 * h);
            let j = bump(u);
            assert!((fd1 - j[1]).abs() < 1e-6 * (1.0 + j[1].abs()), "u={u}");
            assert!((fd2 - j[2]).abs() < 1e-5 * (1.0 + j[2].abs()), "u={u}");
        }
    }

    #[test]
    fn affine_is_reproduced() {
        let f = PiecewiseExpr::single(Expr::affine(3.0, -1.0));
        let spec = MollifierSpec::new(0.1).unwrap();
        let v = mollify(&f, &spec, 2, 0, 0.7).unwrap();
        assert!((v - 1.1).abs() < 1e-14);
    }

    #[test]
    fn kink_second_derivative() {
        let f = kink();
        let d = 1e-3;
        let spec = MollifierSpec::new(d).unwrap();
        let at_kink = mollify(&f, &spec, 2, 2, 0.0).unwrap();
        assert!(at_kink >= 1.0 / (2.0 * d));
        assert_eq!(mollify(&f, &spec, 2, 2, 3.0 * d).unwrap(), 0.0);
    }

    #[test]
    fn increments_match_direct_differences() {
        let exprs = [
            Expr::LnSinh { rate: 1.0 },
            Expr::LnCosh { rate: 0.5 },
            Expr::LnQuadratic { c0: 1.2, c1: 0.4, c2: 1e-3, center: 0.1 },
            Expr::LnTauExp { tau: 1e-3 },
            Expr::Quadratic { coeff: 0.7, center: -0.2 },
        ];
        for e in &exprs {
            for t in [1e-3, -2e-2, 0.3] {
                let a = 0.4;
                let direct = e.eval(a + t)[0] - e.eval(a)[0];
                assert!((e.increment(a, t) - direct).abs() < 1e-14, "{e:?} t={t}");
            }
        }
    }

    #[test]
    fn rejects_concave_kink() {
        let f = PiecewiseExpr::new(vec![0.0], vec![Expr::affine(2.0, 0.0), Expr::affine(1.0, 0.0)]).unwrap();
        assert!(matches!(smooth_at(&f, 0.0, 1e-3, 1e-2), Err(Error::ConvexityViolation { .. })));
    }

    #[test]
    fn window_is_exact_outside() {
        let f = kink();
        let sf = smooth_at(&f, 0.0, 1e-3, 1e-2).unwrap();
        for x in [2e-2, -2e-2, 0.5] {
            assert_eq!(sf.eval(x), f.eval(x));
        }
        let inside = sf.eval(0.0);
        assert!(inside[2] > 0.0);
    }

    #[test]
    fn splice_checks() {
        let a = PiecewiseExpr::single(Expr::affine(1.0, 0.0));
        let b = PiecewiseExpr::single(Expr::affine(2.0, 0.0));
        assert!(check_splice_convexity(&a, &b, 0.0));
        assert!(!check_splice_convexity(&b, &a, 0.0));
    }

    #[test]
    fn bend_matches_endpoints() {
        let a = PiecewiseExpr::single(Expr::affine(1.0, 0.0));
        let b = PiecewiseExpr::single(Expr::affine(2.0, 0.0));
        let sf = bend_splice(&a, &b, -1.0, 0.0, 1.0, 1e-3, 0.05, 0.0).unwrap();
        assert_eq!(sf.eval(-1.0)[0], -1.0);
        assert_eq!(sf.eval(1.0)[0], 2.0);
        assert!((sf.eval(-1.0)[1] - 1.0).abs() < 1e-15);
        assert!((sf.eval(1.0)[1] - 2.0).abs() < 1e-15);
        assert!(sf.second_derivative_margin(-0.999, 0.999, 1001, 0.0) > 0.0);
        assert!(matches!(
            bend_splice(&a, &a, -1.0, 0.0, 1.0, 1e-3, 0.05, 0.0),
            Err(Error::SlopeOrder { .. })
        ));
    }
}
