//! Exact polynomial calculus on the tail, where `v = ε e^r` and `g = τ + e^{r/2}`.
//!
//! Every curvature quantity there is a polynomial in `F = g'/g` and `u = 1/g`
//! with coefficients in `ℚ[ε, c]`, `c = c23`. Differentiation in `r` follows
//! `F' = F/2 - F²` and `u' = -F u`, so the ring is closed under `d/dr`.

use std::collections::BTreeMap;
use std::fmt;

use num_rational::Ratio;
use num_traits::{One, Signed, ToPrimitive, Zero};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::frame::StructureConstants;

pub type Rational = Ratio<i128>;

/// Largest derivative order accepted by [`covariant_derivative_closure`].
pub const MAX_CLOSURE_ORDER: usize = 6;

/// Exponents of `F^f u^u ε^eps c^c`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Default, Serialize)]
pub struct Monomial {
    pub f: u32,
    pub u: u32,
    pub eps: u32,
    pub c: u32,
}

impl Monomial {
    pub const ONE: Monomial = Monomial { f: 0, u: 0, eps: 0, c: 0 };
    pub const F: Monomial = Monomial { f: 1, u: 0, eps: 0, c: 0 };
    pub const U: Monomial = Monomial { f: 0, u: 1, eps: 0, c: 0 };

    fn times(self, o: Monomial) -> Monomial {
        Monomial { f: self.f + o.f, u: self.u + o.u, eps: self.eps + o.eps, c: self.c + o.c }
    }
}

/// Values substituted for the generators.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TailPoint {
    pub f: f64,
    pub u: f64,
    pub eps: f64,
    pub c: f64,
}

/// A polynomial in `F`, `u`, `ε`, `c` with rational coefficients.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct TailPolynomial {
    terms: BTreeMap<Monomial, Rational>,
}

impl TailPolynomial {
    pub fn zero() -> Self {
        Self::default()
    }

    pub fn term(coeff: Rational, m: Monomial) -> Self {
        let mut p = Self::zero();
        p.add_term(m, coeff);
        p
    }

    pub fn constant(x: i128) -> Self {
        Self::term(Rational::from_integer(x), Monomial::ONE)
    }

    pub fn generator_f() -> Self {
        Self::term(Rational::one(), Monomial::F)
    }

    pub fn generator_u() -> Self {
        Self::term(Rational::one(), Monomial::U)
    }

    fn add_term(&mut self, m: Monomial, coeff: Rational) {
        if coeff.is_zero() {
            return;
        }
        let entry = self.terms.entry(m).or_insert_with(Rational::zero);
        *entry += coeff;
        if entry.is_zero() {
            self.terms.remove(&m);
        }
    }

    pub fn terms(&self) -> impl Iterator<Item = (&Monomial, &Rational)> {
        self.terms.iter()
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn coefficient(&self, m: &Monomial) -> Rational {
        self.terms.get(m).copied().unwrap_or_else(Rational::zero)
    }

    pub fn add(&self, o: &Self) -> Self {
        let mut out = self.clone();
        for (m, c) in &o.terms {
            out.add_term(*m, *c);
        }
        out
    }

    pub fn sub(&self, o: &Self) -> Self {
        self.add(&o.scale(-Rational::one()))
    }

    pub fn scale(&self, k: Rational) -> Self {
        let mut out = Self::zero();
        for (m, c) in &self.terms {
            out.add_term(*m, c * k);
        }
        out
    }

    /// Multiplies by a single monomial with coefficient.
    pub fn times_term(&self, k: Rational, m: Monomial) -> Self {
        let mut out = Self::zero();
        for (n, c) in &self.terms {
            out.add_term(n.times(m), c * k);
        }
        out
    }

    pub fn mul(&self, o: &Self) -> Self {
        let mut out = Self::zero();
        for (m, c) in &self.terms {
            for (n, d) in &o.terms {
                out.add_term(m.times(*n), c * d);
            }
        }
        out
    }

    /// `d/dr`, using `F' = F/2 - F²` and `u' = -F u`.
    pub fn derive(&self) -> Self {
        let mut out = Self::zero();
        for (m, c) in &self.terms {
            if m.f > 0 {
                let a = Rational::from_integer(m.f as i128);
                out.add_term(*m, c * a / 2);
                out.add_term(Monomial { f: m.f + 1, ..*m }, -(c * a));
            }
            if m.u > 0 {
                let b = Rational::from_integer(m.u as i128);
                out.add_term(Monomial { f: m.f + 1, ..*m }, -(c * b));
            }
        }
        out
    }

    pub fn eval(&self, at: &TailPoint) -> f64 {
        self.terms
            .iter()
            .map(|(m, c)| {
                c.to_f64().unwrap_or(f64::NAN)
                    * at.f.powi(m.f as i32)
                    * at.u.powi(m.u as i32)
                    * at.eps.powi(m.eps as i32)
                    * at.c.powi(m.c as i32)
            })
            .sum()
    }

    /// Sum of `|coefficient| · sup|monomial|` over the box `0 < F ≤ 1/2`,
    /// `0 < u ≤ u_max`, `|c| ≤ 1/2`, at the given `ε`.
    pub fn coefficient_bound(&self, eps: f64, u_max: f64) -> f64 {
        self.terms
            .iter()
            .map(|(m, c)| {
                c.abs().to_f64().unwrap_or(f64::INFINITY)
                    * 0.5f64.powi(m.f as i32)
                    * u_max.powi(m.u as i32)
                    * eps.powi(m.eps as i32)
                    * 0.5f64.powi(m.c as i32)
            })
            .sum()
    }

    /// Smallest `F`-degree among the terms (`None` for the zero polynomial).
    pub fn min_f_degree(&self) -> Option<u32> {
        self.terms.keys().map(|m| m.f).min()
    }
}

impl fmt::Display for TailPolynomial {
    fn fmt(&self, out: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.terms.is_empty() {
            return write!(out, "0");
        }
        for (i, (m, c)) in self.terms.iter().enumerate() {
            let negative = c.is_negative();
            match (i, negative) {
                (0, true) => write!(out, "-")?,
                (0, false) => {}
                (_, true) => write!(out, " - ")?,
                (_, false) => write!(out, " + ")?,
            }
            let mag = c.abs();
            let mut factors = Vec::new();
            for (name, e) in [("eps", m.eps), ("c", m.c), ("F", m.f), ("u", m.u)] {
                match e {
                    0 => {}
                    1 => factors.push(name.to_string()),
                    _ => factors.push(format!("{name}^{e}")),
                }
            }
            if !mag.is_one() || factors.is_empty() {
                factors.insert(0, mag.to_string());
            }
            write!(out, "{}", factors.join(" "))?;
        }
        Ok(())
    }
}

impl Serialize for TailPolynomial {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_str(&self.to_string())
    }
}

fn rat(n: i128, d: i128) -> Rational {
    Rational::new(n, d)
}

fn mono(f: u32, u: u32, eps: u32, c: u32) -> Monomial {
    Monomial { f, u, eps, c }
}

/// The five tail curvature components as polynomials.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TailComponents {
    pub k21: TailPolynomial,
    pub k32: TailPolynomial,
    pub kr1: TailPolynomial,
    pub kr2: TailPolynomial,
    pub mixed: TailPolynomial,
}

impl TailComponents {
    pub fn new() -> Self {
        let t = TailPolynomial::term;
        // v/g² = 4εF², v'/v = 1, g'/g = F, g''/g = F/2, 1/g² = u²
        let k21 = t(rat(1, 1), mono(4, 0, 2, 0)).add(&t(rat(-1, 1), Monomial::F));
        let k32 = t(rat(-1, 4), mono(0, 2, 0, 0))
            .add(&t(rat(-3, 1), mono(0, 2, 0, 2)))
            .add(&t(rat(-12, 1), mono(4, 0, 2, 2)))
            .add(&t(rat(-1, 1), mono(2, 0, 0, 0)));
        let kr1 = TailPolynomial::constant(-1);
        let kr2 = t(rat(-1, 2), Monomial::F);
        let mixed = t(rat(-4, 1), mono(2, 0, 1, 1)).add(&t(rat(4, 1), mono(3, 0, 1, 1)));
        Self { k21, k32, kr1, kr2, mixed }
    }

    pub fn named(&self) -> [(&'static str, &TailPolynomial); 5] {
        [("k21", &self.k21), ("k32", &self.k32), ("kr1", &self.kr1), ("kr2", &self.kr2), ("mixed", &self.mixed)]
    }
}

impl Default for TailComponents {
    fn default() -> Self {
        Self::new()
    }
}

/// Frame index `0 = ∂r`, `1 = Y1`, `2 = Y2`, `3 = Y3`.
const FRAME: usize = 4;

/// `⟨[e_a, e_b], e_f⟩` on the tail.
fn bracket(a: usize, b: usize, f: usize) -> TailPolynomial {
    let t = TailPolynomial::term;
    let beta = || t(rat(4, 1), mono(2, 0, 1, 1));
    match (a, b, f) {
        (0, 1, 1) => TailPolynomial::constant(-1),
        (1, 0, 1) => TailPolynomial::constant(1),
        (0, 2, 2) | (0, 3, 3) => t(rat(-1, 1), Monomial::F),
        (2, 0, 2) | (3, 0, 3) => TailPolynomial::generator_f(),
        (2, 3, 1) => beta(),
        (3, 2, 1) => beta().scale(-Rational::one()),
        _ => TailPolynomial::zero(),
    }
}

/// Levi-Civita coefficients `Γ[a][b][f] = ⟨∇_{e_a} e_b, e_f⟩` from the
/// Koszul formula for an orthonormal frame.
pub fn connection_table() -> Vec<Vec<Vec<TailPolynomial>>> {
    let half = rat(1, 2);
    (0..FRAME)
        .map(|a| {
            (0..FRAME)
                .map(|b| {
                    (0..FRAME)
                        .map(|f| bracket(a, b, f).sub(&bracket(b, f, a)).add(&bracket(f, a, b)).scale(half))
                        .collect()
                })
                .collect()
        })
        .collect()
}

/// Index of a component in the dense table of a rank-`len` tensor.
fn flat(idx: &[usize]) -> usize {
    idx.iter().fold(0, |acc, &i| acc * FRAME + i)
}

fn unflat(mut n: usize, len: usize) -> Vec<usize> {
    let mut idx = vec![0; len];
    for slot in idx.iter_mut().rev() {
        *slot = n % FRAME;
        n /= FRAME;
    }
    idx
}

/// The curvature tensor `R_abcd = ⟨R(e_a, e_b)e_c, e_d⟩` of the block, densely.
pub fn curvature_block(comp: &TailComponents) -> Vec<TailPolynomial> {
    let mut table = vec![TailPolynomial::zero(); FRAME.pow(4)];
    let mut put = |[a, b, c, d]: [usize; 4], p: &TailPolynomial| {
        let neg = p.scale(-Rational::one());
        for (idx, val) in [
            ([a, b, c, d], p),
            ([b, a, c, d], &neg),
            ([a, b, d, c], &neg),
            ([b, a, d, c], p),
            ([c, d, a, b], p),
            ([d, c, a, b], &neg),
            ([c, d, b, a], &neg),
            ([d, c, b, a], p),
        ] {
            table[flat(&idx)] = val.clone();
        }
    };
    put([0, 1, 1, 0], &comp.kr1);
    put([0, 2, 2, 0], &comp.kr2);
    put([0, 3, 3, 0], &comp.kr2);
    put([1, 2, 2, 1], &comp.k21);
    put([1, 3, 3, 1], &comp.k21);
    put([2, 3, 3, 2], &comp.k32);
    let half_mixed = comp.mixed.scale(rat(-1, 2));
    put([0, 1, 2, 3], &comp.mixed);
    put([0, 2, 3, 1], &half_mixed);
    put([0, 3, 1, 2], &half_mixed);
    table
}

/// Components of `∇^k R` for `k = 0..=kmax`.
#[derive(Debug, Clone, PartialEq)]
pub struct ClosureTable {
    pub kmax: usize,
    /// Numeric `c23` taken from the structure constants.
    pub c23: f64,
    levels: Vec<Vec<TailPolynomial>>,
}

/// One row of [`ClosureTable::summary`].
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ClosureLevel {
    pub k: usize,
    pub nonzero_components: usize,
    pub coefficient_bound: f64,
    pub min_f_degree: Option<u32>,
}

impl ClosureTable {
    /// `(∇^k R)(e_{idx[0]}, …)`; `idx.len()` must be `k + 4`.
    pub fn component(&self, k: usize, idx: &[usize]) -> Result<&TailPolynomial> {
        let level = self
            .levels
            .get(k)
            .ok_or_else(|| Error::IndexOutOfRange(format!("order {k} above kmax {}", self.kmax)))?;
        if idx.len() != k + 4 || idx.iter().any(|&i| i >= FRAME) {
            return Err(Error::IndexOutOfRange(format!("bad index {idx:?} for order {k}")));
        }
        Ok(&level[flat(idx)])
    }

    /// Nonzero components of order `k` with their frame indices.
    pub fn nonzero(&self, k: usize) -> impl Iterator<Item = (Vec<usize>, &TailPolynomial)> {
        self.levels
            .get(k)
            .into_iter()
            .flat_map(move |level| level.iter().enumerate().filter(|(_, p)| !p.is_zero()).map(move |(n, p)| (unflat(n, k + 4), p)))
    }

    /// Per-order counts, uniform coefficient bounds and smallest `F`-degree.
    pub fn summary(&self, eps: f64, u_max: f64) -> Vec<ClosureLevel> {
        (0..=self.kmax)
            .map(|k| {
                let mut row = ClosureLevel { k, nonzero_components: 0, coefficient_bound: 0.0, min_f_degree: None };
                for (_, p) in self.nonzero(k) {
                    row.nonzero_components += 1;
                    row.coefficient_bound = row.coefficient_bound.max(p.coefficient_bound(eps, u_max));
                    row.min_f_degree = match (row.min_f_degree, p.min_f_degree()) {
                        (Some(a), Some(b)) => Some(a.min(b)),
                        (a, b) => a.or(b),
                    };
                }
                row
            })
            .collect()
    }
}

/// Builds `∇^k R` on the `∂r, Y1, Y2, Y3` block for `k ≤ kmax` by
/// `(∇S)(e_0', e_1', …) = e_0'(S(…)) - Σ_j S(…, ∇_{e_0'} e_j', …)`, where only
/// `∂r` differentiates the components.
pub fn covariant_derivative_closure(kmax: usize, sc: &StructureConstants<f64>) -> Result<ClosureTable> {
    if kmax > MAX_CLOSURE_ORDER {
        return Err(Error::Guard(format!("kmax = {kmax} exceeds {MAX_CLOSURE_ORDER}")));
    }
    if sc.frame_len() < 3 {
        return Err(Error::Parameter("structure constants need at least Y1, Y2, Y3".into()));
    }
    let c23 = sc.get(2, 3);
    let gamma = connection_table();
    // nonzero (f, Γ[a][b][f]) per (a, b)
    let sparse: Vec<Vec<Vec<(usize, TailPolynomial)>>> = gamma
        .iter()
        .map(|row| {
            row.iter()
                .map(|col| col.iter().enumerate().filter(|(_, p)| !p.is_zero()).map(|(f, p)| (f, p.clone())).collect())
                .collect()
        })
        .collect();
    let mut levels = vec![curvature_block(&TailComponents::new())];
    for k in 0..kmax {
        let rank = k + 4;
        let prev = &levels[k];
        let mut next = vec![TailPolynomial::zero(); FRAME.pow(rank as u32 + 1)];
        for (n, slot) in next.iter_mut().enumerate() {
            let idx = unflat(n, rank + 1);
            let (a, rest) = (idx[0], &idx[1..]);
            let mut acc = if a == 0 { prev[flat(rest)].derive() } else { TailPolynomial::zero() };
            let mut moved = rest.to_vec();
            for j in 0..rank {
                let b = rest[j];
                for (f, g) in &sparse[a][b] {
                    moved[j] = *f;
                    let s = &prev[flat(&moved)];
                    if !s.is_zero() {
                        acc = acc.sub(&s.mul(g));
                    }
                }
                moved[j] = b;
            }
            *slot = acc;
        }
        levels.push(next);
    }
    Ok(ClosureTable { kmax, c23, levels })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn derivation_rules() {
        let f = TailPolynomial::generator_f();
        assert_eq!(f.derive().to_string(), "1/2 F - F^2");
        let u = TailPolynomial::generator_u();
        assert_eq!(u.derive().to_string(), "-F u");
        // Leibniz
        let p = f.mul(&u);
        assert_eq!(p.derive(), f.derive().mul(&u).add(&f.mul(&u.derive())));
    }

    #[test]
    fn radial_component_prints() {
        assert_eq!(TailComponents::new().kr2.to_string(), "-1/2 F");
        assert_eq!(TailComponents::new().k21.to_string(), "-F + eps^2 F^4");
    }

    #[test]
    fn connection_contains_listed_relations() {
        let g = connection_table();
        let f = TailPolynomial::generator_f();
        assert_eq!(g[2][0][2], f);
        assert_eq!(g[1][0][1], TailPolynomial::constant(1));
        assert_eq!(g[1][1][0], TailPolynomial::constant(-1));
        assert_eq!(g[3][3][0], f.scale(-Rational::one()));
        assert_eq!(g[2][3][1].to_string(), "2 eps c F^2");
        for a in 0..4 {
            for b in 0..4 {
                for c in 0..4 {
                    assert_eq!(g[a][b][c], g[a][c][b].scale(-Rational::one()));
                }
            }
        }
    }

    #[test]
    fn guard() {
        let j = crate::frame::ComplexStructure::<f64>::standard(2).unwrap();
        let sc = crate::frame::structure_from_complex(&j).unwrap();
        assert!(matches!(covariant_derivative_closure(7, &sc), Err(Error::Guard(_))));
        let table = covariant_derivative_closure(1, &sc).unwrap();
        assert_eq!(table.component(0, &[0, 2, 2, 0]).unwrap().to_string(), "-1/2 F");
    }
}
