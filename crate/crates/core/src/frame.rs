//! Structure constants of the horizontal frame and tangent 2-plane coefficient pairs.
//!
//! Frame indices follow the geometric convention: `Y_1` spans the circle
//! direction and `Y_2, ..., Y_{2n-1}` are horizontal. Accessors take these
//! 1-based indices.

use crate::error::{Error, Result};
use crate::scalar::Scalar;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

/// A square real matrix acting on the horizontal coefficient space
/// (dimension `2n - 2`), stored row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct ComplexStructure<T> {
    dim: usize,
    entries: Vec<T>,
}

impl<T: Scalar> ComplexStructure<T> {
    pub fn from_rows(rows: &[Vec<T>]) -> Result<Self> {
        let dim = rows.len();
        if dim == 0 || rows.iter().any(|r| r.len() != dim) {
            return Err(Error::InvalidComplexStructure(
                "matrix must be square and non-empty".into(),
            ));
        }
        Ok(Self {
            dim,
            entries: rows.iter().flatten().copied().collect(),
        })
    }

    /// Block-diagonal `[[0,-1],[1,0]]` structure of size `2n - 2`.
    pub fn standard(n: usize) -> Result<Self> {
        if n < 2 {
            return Err(Error::Parameter(format!(
                "complex dimension must be at least 2, got {n}"
            )));
        }
        let dim = 2 * n - 2;
        let mut entries = vec![T::zero(); dim * dim];
        for b in 0..n - 1 {
            let (i, j) = (2 * b, 2 * b + 1);
            entries[i * dim + j] = -T::one();
            entries[j * dim + i] = T::one();
        }
        Ok(Self { dim, entries })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn get(&self, row: usize, col: usize) -> T {
        self.entries[row * self.dim + col]
    }

    /// Largest entry of `|JᵀJ - I|` and of `|J² + I|`.
    pub fn residuals(&self) -> (T, T) {
        let d = self.dim;
        let mut orth = T::zero();
        let mut square = T::zero();
        for i in 0..d {
            for j in 0..d {
                let mut jtj = T::zero();
                let mut jj = T::zero();
                for k in 0..d {
                    jtj = jtj + self.get(k, i) * self.get(k, j);
                    jj = jj + self.get(i, k) * self.get(k, j);
                }
                let id = if i == j { T::one() } else { T::zero() };
                orth = orth.max((jtj - id).abs());
                square = square.max((jj + id).abs());
            }
        }
        (orth, square)
    }
}

fn identity_tolerance<T: Scalar>(dim: usize) -> T {
    let scaled = T::epsilon() * T::lit(64.0 * dim.max(1) as f64);
    scaled.max(T::lit(1e-12))
}

/// Antisymmetric bracket coefficients `c_ij` with `[X_i, X_j] = c_ij X_1`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StructureConstants<T> {
    n: usize,
    c: Vec<T>,
}

impl<T: Scalar> StructureConstants<T> {
    /// Builds constants from a full `(2n-1) x (2n-1)` matrix indexed from `Y_1`.
    /// No invariants are enforced; use [`validate_structure_constants`].
    pub fn from_matrix(n: usize, rows: &[Vec<T>]) -> Result<Self> {
        let d = 2 * n - 1;
        if n < 2 || rows.len() != d || rows.iter().any(|r| r.len() != d) {
            return Err(Error::Parameter(format!(
                "structure constants for n={n} need a {d}x{d} matrix"
            )));
        }
        Ok(Self {
            n,
            c: rows.iter().flatten().copied().collect(),
        })
    }

    /// Complex dimension `n`.
    pub fn n(&self) -> usize {
        self.n
    }

    /// Number of vertical plus horizontal frame vectors, `2n - 1`.
    pub fn frame_len(&self) -> usize {
        2 * self.n - 1
    }

    /// `c_ij` for 1-based frame indices.
    pub fn get(&self, i: usize, j: usize) -> T {
        let d = self.frame_len();
        assert!(
            (1..=d).contains(&i) && (1..=d).contains(&j),
            "frame index out of range"
        );
        self.c[(i - 1) * d + (j - 1)]
    }

    /// Coefficients of `J Y_i = -2 Σ_j c_ij Y_j` over horizontal `j`.
    pub fn complex_image_row(&self, i: usize) -> Vec<T> {
        let two = T::lit(2.0);
        (2..=self.frame_len()).map(|j| -two * self.get(i, j)).collect()
    }
}

/// Generates `c_ij = ½⟨e_i, J e_j⟩` from an orthogonal complex structure.
pub fn structure_from_complex<T: Scalar>(j: &ComplexStructure<T>) -> Result<StructureConstants<T>> {
    let m = j.dim();
    if m % 2 != 0 {
        return Err(Error::InvalidComplexStructure(format!(
            "horizontal dimension {m} is odd"
        )));
    }
    let (orth, square) = j.residuals();
    let tol = identity_tolerance::<T>(m);
    if !(orth <= tol) {
        return Err(Error::InvalidComplexStructure(format!(
            "JᵀJ differs from the identity by {orth}"
        )));
    }
    if !(square <= tol) {
        return Err(Error::InvalidComplexStructure(format!(
            "J² differs from -I by {square}"
        )));
    }
    let n = m / 2 + 1;
    let d = 2 * n - 1;
    let half = T::lit(0.5);
    let mut c = vec![T::zero(); d * d];
    for a in 0..m {
        for b in 0..m {
            c[(a + 1) * d + (b + 1)] = half * j.get(a, b);
        }
    }
    let sc = StructureConstants { n, c };
    let report = validate_structure_constants(&sc);
    if !report.passes(tol) {
        return Err(Error::InvalidComplexStructure(format!(
            "generated constants fail validation: {report:?}"
        )));
    }
    Ok(sc)
}

/// Per-invariant residuals of a set of structure constants.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct StructureReport<T> {
    /// `max |c_ij + c_ji|`
    pub antisymmetry: T,
    /// `max |c_1j|, |c_i1|`
    pub first_row_column: T,
    /// `max (|c_ij| - 1/2)`, clamped at zero
    pub entry_bound_excess: T,
    /// `max_i |Σ_{j>1} c_ij² - 1/4|` over horizontal rows
    pub row_sum: T,
}

impl<T: Scalar> StructureReport<T> {
    pub fn passes(&self, tol: T) -> bool {
        self.antisymmetry <= tol
            && self.first_row_column <= tol
            && self.entry_bound_excess <= tol
            && self.row_sum <= tol
    }
}

pub fn validate_structure_constants<T: Scalar>(sc: &StructureConstants<T>) -> StructureReport<T> {
    let d = sc.frame_len();
    let half = T::lit(0.5);
    let quarter = T::lit(0.25);
    let mut rep = StructureReport {
        antisymmetry: T::zero(),
        first_row_column: T::zero(),
        entry_bound_excess: T::zero(),
        row_sum: T::zero(),
    };
    for i in 1..=d {
        let mut row = T::zero();
        for j in 1..=d {
            let cij = sc.get(i, j);
            rep.antisymmetry = rep.antisymmetry.max((cij + sc.get(j, i)).abs());
            rep.entry_bound_excess = rep.entry_bound_excess.max(cij.abs() - half);
            if i == 1 || j == 1 {
                rep.first_row_column = rep.first_row_column.max(cij.abs());
            } else {
                row = row + cij * cij;
            }
        }
        if i > 1 {
            rep.row_sum = rep.row_sum.max((row - quarter).abs());
        }
    }
    rep
}

/// An orthonormal pair `(C, D)` spanning a tangent 2-plane in the adapted frame.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum PlanePair<T> {
    /// `C = c0 ∂r + c1 Y1 + c2 Y2 + c3 Y3`, `D = d1 Y1 + d2 Y2`.
    Generic { c: [T; 4], d: [T; 2] },
    /// `C = c0 ∂r + c1 Y1 + c2 Y2`, `D = d0 ∂r + d1 Y1`.
    Nongeneric { c: [T; 3], d: [T; 2] },
}

impl<T: Scalar> PlanePair<T> {
    /// Largest deviation from unit length and orthogonality.
    pub fn orthonormality_defect(&self) -> T {
        let one = T::one();
        match *self {
            PlanePair::Generic { c, d } => {
                let nc = c.iter().fold(T::zero(), |a, &x| a + x * x);
                let nd = d[0] * d[0] + d[1] * d[1];
                let dot = d[0] * c[1] + d[1] * c[2];
                (nc - one).abs().max((nd - one).abs()).max(dot.abs())
            }
            PlanePair::Nongeneric { c, d } => {
                let nc = c.iter().fold(T::zero(), |a, &x| a + x * x);
                let nd = d[0] * d[0] + d[1] * d[1];
                let dot = d[0] * c[0] + d[1] * c[1];
                (nc - one).abs().max((nd - one).abs()).max(dot.abs())
            }
        }
    }
}

/// Normalizes `c_raw` and resolves `D` from the constraint `d1 c1 + d2 c2 = 0`.
///
/// Sign convention: `D = s (-c2, c1) / |(c1, c2)|` with `s = +1` when the low
/// bit of `choice` is clear and `s = -1` otherwise. When `c1 = c2 = 0` the
/// direction of `D` is drawn from a generator seeded by `choice`.
pub fn make_plane_pair<T: Scalar>(c_raw: [T; 4], choice: u64) -> Result<PlanePair<T>> {
    let norm = c_raw.iter().fold(T::zero(), |a, &x| a + x * x).sqrt();
    if !(norm > T::zero()) || !norm.is_finite() {
        return Err(Error::ZeroVector);
    }
    let c = c_raw.map(|x| x / norm);
    let planar = c[1].hypot(c[2]);
    let d = if planar > T::epsilon() {
        let s = if choice & 1 == 0 { T::one() } else { -T::one() };
        [-s * c[2] / planar, s * c[1] / planar]
    } else {
        let mut rng = ChaCha8Rng::seed_from_u64(choice);
        let angle: f64 = rng.gen_range(0.0..std::f64::consts::TAU);
        [T::lit(angle.cos()), T::lit(angle.sin())]
    };
    let c = if planar > T::epsilon() {
        c
    } else {
        [c[0], T::zero(), T::zero(), c[3]]
    };
    Ok(PlanePair::Generic { c, d })
}

/// Residual of the statement that the curvature-formula coefficients sum to one.
///
/// Generic pairs use `(d1c2 - d2c1)² + d1²c3² + d1²c0² + d2²c3² + d2²c0²`;
/// nongeneric pairs use `(d0c1 - d1c0)² + d0²c2² + d1²c2²`.
pub fn coefficient_identity_residual<T: Scalar>(pp: &PlanePair<T>) -> T {
    let one = T::one();
    match *pp {
        PlanePair::Generic { c, d } => {
            let cross = d[0] * c[2] - d[1] * c[1];
            let sum = cross * cross
                + (d[0] * d[0] + d[1] * d[1]) * (c[0] * c[0] + c[3] * c[3]);
            (sum - one).abs()
        }
        PlanePair::Nongeneric { c, d } => {
            let cross = d[0] * c[1] - d[1] * c[0];
            let sum = cross * cross + (d[0] * d[0] + d[1] * d[1]) * c[2] * c[2];
            (sum - one).abs()
        }
    }
}

/// Nongeneric pair from a raw `C = (c0, c1, c2)`, with `D ⟂ (c0, c1)` inside the
/// `∂r Y1` plane. Sign and degenerate handling mirror [`make_plane_pair`].
pub fn make_nongeneric_pair<T: Scalar>(c_raw: [T; 3], choice: u64) -> Result<PlanePair<T>> {
    let norm = c_raw.iter().fold(T::zero(), |a, &x| a + x * x).sqrt();
    if !(norm > T::zero()) || !norm.is_finite() {
        return Err(Error::ZeroVector);
    }
    let c = c_raw.map(|x| x / norm);
    let planar = c[0].hypot(c[1]);
    let (c, d) = if planar > T::epsilon() {
        let s = if choice & 1 == 0 { T::one() } else { -T::one() };
        (c, [-s * c[1] / planar, s * c[0] / planar])
    } else {
        let mut rng = ChaCha8Rng::seed_from_u64(choice);
        let angle: f64 = rng.gen_range(0.0..std::f64::consts::TAU);
        ([T::zero(), T::zero(), c[2]], [T::lit(angle.cos()), T::lit(angle.sin())])
    };
    Ok(PlanePair::Nongeneric { c, d })
}
