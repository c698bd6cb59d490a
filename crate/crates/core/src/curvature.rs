//! Closed-form curvature components of the metric `dr² + v²dθ² + h²k`.
//!
//! Sign convention: `K(X, Y) = ⟨R(X, Y)Y, X⟩` for orthonormal `X, Y`.

use crate::error::{Error, Result};
use crate::frame::PlanePair;
use crate::scalar::Scalar;
use serde::Serialize;

/// Warping functions and their first two derivatives at radius `r`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct WarpState<T> {
    pub r: T,
    pub v: T,
    pub v1: T,
    pub v2: T,
    pub h: T,
    pub h1: T,
    pub h2: T,
}

impl<T: Scalar> WarpState<T> {
    pub fn new(r: T, v: [T; 3], h: [T; 3]) -> Result<Self> {
        if !(v[0] > T::zero()) || !(h[0] > T::zero()) {
            return Err(Error::Domain(format!(
                "warping functions must be positive (v={}, h={})",
                v[0], h[0]
            )));
        }
        Ok(Self {
            r,
            v: v[0],
            v1: v[1],
            v2: v[2],
            h: h[0],
            h1: h[1],
            h2: h[2],
        })
    }

    /// Reference pair `v = sinh r`, `h = cosh(r/2)` of complex hyperbolic space.
    pub fn complex_hyperbolic(r: T) -> Self {
        let half = T::lit(0.5);
        let quarter = T::lit(0.25);
        let s = (r * half).sinh();
        let c = (r * half).cosh();
        Self {
            r,
            v: r.sinh(),
            v1: r.cosh(),
            v2: r.sinh(),
            h: c,
            h1: half * s,
            h2: quarter * c,
        }
    }

    pub fn ratios(&self) -> WarpRatios<T> {
        let h2 = self.h * self.h;
        WarpRatios {
            v_over_h2: self.v / h2,
            dlog_v: self.v1 / self.v,
            dlog_h: self.h1 / self.h,
            v2_over_v: self.v2 / self.v,
            h2_over_h: self.h2 / self.h,
            inv_h2: T::one() / h2,
        }
    }
}

/// The scale-free combinations of `v, h` that enter the curvature formulas.
///
/// Building these from logarithmic derivatives keeps deep-tail evaluations
/// finite where `v` itself underflows.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct WarpRatios<T> {
    pub v_over_h2: T,
    pub dlog_v: T,
    pub dlog_h: T,
    pub v2_over_v: T,
    pub h2_over_h: T,
    pub inv_h2: T,
}

impl<T: Scalar> WarpRatios<T> {
    /// Ratios from `(ln v, (ln v)', (ln v)'')` and the same for `h`.
    pub fn from_log_jets(log_v: [T; 3], log_h: [T; 3]) -> Self {
        let two = T::lit(2.0);
        Self {
            v_over_h2: (log_v[0] - two * log_h[0]).exp(),
            dlog_v: log_v[1],
            dlog_h: log_h[1],
            v2_over_v: log_v[2] + log_v[1] * log_v[1],
            h2_over_h: log_h[2] + log_h[1] * log_h[1],
            inv_h2: (-two * log_h[0]).exp(),
        }
    }

    /// `(v/h²)(v'/v - h'/h)`, the factor multiplying `-c23` in the mixed term.
    pub fn mixed_factor(&self) -> T {
        self.v_over_h2 * (self.dlog_v - self.dlog_h)
    }
}

/// Sectional curvatures of the coordinate planes and the mixed component.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CoordinateCurvatures<T> {
    /// `K(Y2, Y1) = K(Y3, Y1)`
    pub k21: T,
    /// `K(Y3, Y2)`
    pub k32: T,
    /// `K(∂r, Y1)`
    pub kr1: T,
    /// `K(∂r, Y2)`
    pub kr2: T,
    /// `⟨R(∂r, Y1)Y2, Y3⟩`
    pub mixed: T,
    pub c23: T,
}

fn check_c23<T: Scalar>(c23: T) -> Result<()> {
    let bound = T::lit(0.5) + T::epsilon() * T::lit(4.0);
    if c23.abs() <= bound {
        Ok(())
    } else {
        Err(Error::Parameter(format!("|c23| must not exceed 1/2, got {c23}")))
    }
}

pub fn coordinate_curvatures<T: Scalar>(ws: &WarpState<T>, c23: T) -> Result<CoordinateCurvatures<T>> {
    coordinate_curvatures_from_ratios(&ws.ratios(), c23)
}

pub fn coordinate_curvatures_from_ratios<T: Scalar>(
    w: &WarpRatios<T>,
    c23: T,
) -> Result<CoordinateCurvatures<T>> {
    check_c23(c23)?;
    let three = T::lit(3.0);
    let quarter = T::lit(0.25);
    let sixteenth = T::lit(1.0 / 16.0);
    let a = w.v_over_h2;
    let c2 = c23 * c23;
    Ok(CoordinateCurvatures {
        k21: a * a * sixteenth - w.dlog_v * w.dlog_h,
        k32: -quarter * w.inv_h2 - three * w.inv_h2 * c2 - three * c2 * a * a * quarter
            - w.dlog_h * w.dlog_h,
        kr1: -w.v2_over_v,
        kr2: -w.h2_over_h,
        mixed: -c23 * a * (w.dlog_v - w.dlog_h),
        c23,
    })
}

/// Sectional curvature of the plane spanned by a generic or nongeneric pair.
pub fn sectional_curvature<T: Scalar>(cc: &CoordinateCurvatures<T>, pp: &PlanePair<T>) -> T {
    match *pp {
        PlanePair::Generic { c, d } => generic_sectional(cc, c, d),
        PlanePair::Nongeneric { c, d } => nongeneric_sectional(cc, c, d),
    }
}

/// Generic-plane formula; a nongeneric pair is routed to its own formula.
pub fn sectional_curvature_nongeneric<T: Scalar>(
    cc: &CoordinateCurvatures<T>,
    c: [T; 3],
    d: [T; 2],
) -> T {
    nongeneric_sectional(cc, c, d)
}

#[inline]
pub(crate) fn generic_sectional<T: Scalar>(cc: &CoordinateCurvatures<T>, c: [T; 4], d: [T; 2]) -> T {
    let [c0, c1, c2, c3] = c;
    let [d1, d2] = d;
    let cross = d1 * c2 - d2 * c1;
    let three = T::lit(3.0);
    cross * cross * cc.k21
        + d1 * d1 * c3 * c3 * cc.k21
        + d1 * d1 * c0 * c0 * cc.kr1
        + d2 * d2 * c0 * c0 * cc.kr2
        + d2 * d2 * c3 * c3 * cc.k32
        + three * d1 * d2 * c0 * c3 * cc.mixed
}

#[inline]
pub(crate) fn nongeneric_sectional<T: Scalar>(cc: &CoordinateCurvatures<T>, c: [T; 3], d: [T; 2]) -> T {
    let [c0, c1, c2] = c;
    let [d0, d1] = d;
    let cross = d0 * c1 - d1 * c0;
    cross * cross * cc.kr1 + d0 * d0 * c2 * c2 * cc.kr2 + d1 * d1 * c2 * c2 * cc.k21
}

/// Fiber-metric curvatures of the rescaled tube metric `(v²/h²)dθ² + k`:
/// `(⟨R(X1,Xi)Xi,X1⟩, ⟨R(Xi,Xj)Xj,Xi⟩)`.
pub fn tube_submersion_curvature<T: Scalar>(v: T, h: T, c: T) -> (T, T) {
    let q = v / h;
    let q2 = q * q;
    let three = T::lit(3.0);
    let quarter = T::lit(0.25);
    (
        q2 * q2 / T::lit(16.0),
        -quarter - three * c * c - three * c * c * q2 * quarter,
    )
}

/// Tube-metric curvatures `⟨R(Y1,Yi)Yi,Y1⟩`, `⟨R(Yi,Yj)Yj,Yi⟩` in the unit frame of
/// `v²dθ² + h²k`, obtained from [`tube_submersion_curvature`] by rescaling.
pub fn scaled_fiber_curvatures<T: Scalar>(v: T, h: T, c: T) -> (T, T) {
    let (vertical, horizontal) = tube_submersion_curvature(v, h, c);
    // the (4,0)-tensor scales by h², the frame vectors by 1/(v h) and 1/h²
    (vertical * h * h / (v * v * h * h), horizontal * h * h / (h * h * h * h))
}

/// `(|A_{Xi} Xj|, |A_{Xi} X1|)` for the tube submersion.
pub fn a_tensor_norms<T: Scalar>(v: T, h: T, c: T) -> (T, T) {
    let half = T::lit(0.5);
    let quarter = T::lit(0.25);
    (c.abs() * half * (v / h), v * v * quarter / (h * h))
}

/// `|A_{Xi} X1| = (v²/2h²) sqrt(Σ_{j>1} c_ij²)` from an explicit row of constants.
pub fn a_tensor_vertical_norm_from_row<T: Scalar>(v: T, h: T, row: &[T]) -> T {
    let sum = row.iter().fold(T::zero(), |a, &x| a + x * x);
    v * v / (T::lit(2.0) * h * h) * sum.sqrt()
}

/// Component kinds of the complex hyperbolic reference table.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum ChnComponent {
    /// `⟨R(∂r, Y1)Yi, Yj⟩` for horizontal `i ≠ j`
    MixedRadial,
    /// `K(Yi, Yj)` for horizontal `i ≠ j`
    Sectional,
    /// `⟨R(Yi, Yj)Yj, Yk⟩` with distinct indices one of which is `1`
    Vanishing,
}

/// Complex hyperbolic reference values in terms of `c = c_ij = ½⟨Yi, JYj⟩`.
pub fn chn_reference<T: Scalar>(kind: ChnComponent, c: T) -> T {
    let inner = T::lit(2.0) * c;
    match kind {
        ChnComponent::MixedRadial => -T::lit(0.5) * inner,
        ChnComponent::Sectional => -T::lit(0.25) - T::lit(0.75) * inner * inner,
        ChnComponent::Vanishing => T::zero(),
    }
}

/// Pointwise data of a multiply-warped product `dr² + Σ h_i² (fiber)`.
///
/// Frame vectors are indexed `1..=m`.
#[derive(Debug, Clone, PartialEq)]
pub struct GenericWarpSpec<T> {
    m: usize,
    warps: Vec<[T; 3]>,
    brackets: Vec<T>,
    fiber: Vec<T>,
}

/// A curvature component of a multiply-warped product.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum WarpedComponent {
    /// `⟨R(Yi, Yj)Yl, Ym⟩`
    Fiber { i: usize, j: usize, l: usize, m: usize },
    /// `⟨R(Yi, ∂r)∂r, Yj⟩`
    Radial { i: usize, j: usize },
    /// `⟨R(∂r, Yi)Yj, Yk⟩`
    Mixed { i: usize, j: usize, k: usize },
}

impl<T: Scalar> GenericWarpSpec<T> {
    /// Flat fiber with vanishing brackets and the given warps `(h_i, h_i', h_i'')`.
    pub fn new(warps: Vec<[T; 3]>) -> Result<Self> {
        let m = warps.len();
        if m == 0 {
            return Err(Error::Parameter("at least one warped factor is required".into()));
        }
        if warps.iter().any(|w| !(w[0] > T::zero())) {
            return Err(Error::Domain("warping functions must be positive".into()));
        }
        Ok(Self {
            m,
            warps,
            brackets: vec![T::zero(); m * m * m],
            fiber: vec![T::zero(); m * m * m * m],
        })
    }

    pub fn factors(&self) -> usize {
        self.m
    }

    fn check(&self, idx: &[usize]) -> Result<()> {
        match idx.iter().find(|&&i| i == 0 || i > self.m) {
            Some(bad) => Err(Error::IndexOutOfRange(format!(
                "frame index {bad} outside 1..={}",
                self.m
            ))),
            None => Ok(()),
        }
    }

    fn b(&self, i: usize, j: usize, k: usize) -> T {
        let m = self.m;
        self.brackets[((i - 1) * m + (j - 1)) * m + (k - 1)]
    }

    fn f(&self, i: usize, j: usize, l: usize, n: usize) -> T {
        let m = self.m;
        self.fiber[(((i - 1) * m + (j - 1)) * m + (l - 1)) * m + (n - 1)]
    }

    /// Sets `⟨[Yi, Yj], Yk⟩ = value` and its antisymmetric partner.
    pub fn set_bracket(&mut self, i: usize, j: usize, k: usize, value: T) -> Result<()> {
        self.check(&[i, j, k])?;
        let m = self.m;
        self.brackets[((i - 1) * m + (j - 1)) * m + (k - 1)] = value;
        self.brackets[((j - 1) * m + (i - 1)) * m + (k - 1)] = -value;
        Ok(())
    }

    /// Sets a fiber component together with the values forced by the curvature
    /// symmetries `R_ijlm = -R_jilm = -R_ijml = R_lmij`.
    pub fn set_fiber(&mut self, i: usize, j: usize, l: usize, n: usize, value: T) -> Result<()> {
        self.check(&[i, j, l, n])?;
        let m = self.m;
        let mut put = |a: usize, b: usize, c: usize, d: usize, x: T| {
            self.fiber[(((a - 1) * m + (b - 1)) * m + (c - 1)) * m + (d - 1)] = x;
        };
        for (a, b, c, d) in [(i, j, l, n), (l, n, i, j)] {
            put(a, b, c, d, value);
            put(b, a, c, d, -value);
            put(a, b, d, c, -value);
            put(b, a, d, c, value);
        }
        Ok(())
    }

    /// The adapted tube frame `Y1, Y2, Y3` of `dr² + v²dθ² + h²k` at a point
    /// with bracket coefficient `c23`.
    pub fn tube_frame(ws: &WarpState<T>, c23: T) -> Result<Self> {
        check_c23(c23)?;
        let mut spec = Self::new(vec![
            [ws.v, ws.v1, ws.v2],
            [ws.h, ws.h1, ws.h2],
            [ws.h, ws.h1, ws.h2],
        ])?;
        let b = c23 * ws.v / (ws.h * ws.h);
        spec.set_bracket(2, 3, 1, b)?;
        let (vertical, horizontal) = scaled_fiber_curvatures(ws.v, ws.h, c23);
        spec.set_fiber(1, 2, 2, 1, vertical)?;
        spec.set_fiber(1, 3, 3, 1, vertical)?;
        spec.set_fiber(2, 3, 3, 2, horizontal)?;
        Ok(spec)
    }
}

pub fn generic_warped_curvature<T: Scalar>(spec: &GenericWarpSpec<T>, which: WarpedComponent) -> Result<T> {
    let dlog = |i: usize| spec.warps[i - 1][1] / spec.warps[i - 1][0];
    match which {
        WarpedComponent::Fiber { i, j, l, m } => {
            spec.check(&[i, j, l, m])?;
            let base = spec.f(i, j, l, m);
            if i == j || l == m {
                return Ok(base);
            }
            if (l, m) == (j, i) {
                Ok(base - dlog(i) * dlog(j))
            } else if (l, m) == (i, j) {
                Ok(base + dlog(i) * dlog(j))
            } else {
                Ok(base)
            }
        }
        WarpedComponent::Radial { i, j } => {
            spec.check(&[i, j])?;
            if i == j {
                Ok(-spec.warps[i - 1][2] / spec.warps[i - 1][0])
            } else {
                Ok(T::zero())
            }
        }
        WarpedComponent::Mixed { i, j, k } => {
            spec.check(&[i, j, k])?;
            let two = T::lit(2.0);
            let twice = spec.b(i, j, k) * (dlog(k) - dlog(j))
                + spec.b(k, i, j) * (dlog(j) - dlog(k))
                + spec.b(k, j, i) * (two * dlog(i) - dlog(j) - dlog(k));
            Ok(twice / two)
        }
    }
}
