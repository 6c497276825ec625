//! Finite Laurent polynomials in `lambda` with real 3x3 coefficients, and
//! the checks that place such a loop in the twisted loop group.

use std::collections::BTreeMap;
use std::fmt::{self, Write as _};

use nalgebra::{DMatrix, DVector, Matrix3};

use crate::error::{Error, Result};
use crate::lattice::SphereKind;

pub type Mat3 = Matrix3<f64>;

/// Coefficients with max-norm below this are dropped.
pub const PRUNE_TOL: f64 = 1e-14;

/// Real spectral parameters used by all evaluated checks.
pub const PROBES: [f64; 6] = [-2.0, -1.0, -0.5, 0.5, 1.0, 2.0];

/// Coefficient residual accepted from `inverse_of_group_element`.
pub const INVERSE_TOL: f64 = 1e-10;

fn max_abs(m: &Mat3) -> f64 {
    m.amax()
}

/// `sum_k lambda^k a_k` over finitely many degrees.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct LaurentMatrix {
    coeffs: BTreeMap<i32, Mat3>,
}

impl LaurentMatrix {
    pub fn zero() -> Self {
        Self::default()
    }

    pub fn identity() -> Self {
        Self::monomial(0, Mat3::identity())
    }

    pub fn monomial(degree: i32, coeff: Mat3) -> Self {
        Self::from_terms([(degree, coeff)])
    }

    /// Sums repeated degrees and prunes negligible coefficients.
    pub fn from_terms(terms: impl IntoIterator<Item = (i32, Mat3)>) -> Self {
        let mut coeffs: BTreeMap<i32, Mat3> = BTreeMap::new();
        for (k, m) in terms {
            *coeffs.entry(k).or_insert_with(Mat3::zeros) += m;
        }
        let mut out = Self { coeffs };
        out.prune();
        out
    }

    fn prune(&mut self) {
        self.coeffs.retain(|_, m| max_abs(m) >= PRUNE_TOL);
    }

    pub fn coefficient(&self, degree: i32) -> Mat3 {
        self.coeffs.get(&degree).copied().unwrap_or_else(Mat3::zeros)
    }

    pub fn terms(&self) -> impl Iterator<Item = (i32, &Mat3)> + '_ {
        self.coeffs.iter().map(|(&k, m)| (k, m))
    }

    pub fn is_zero(&self) -> bool {
        self.coeffs.is_empty()
    }

    pub fn min_degree(&self) -> Option<i32> {
        self.coeffs.keys().next().copied()
    }

    pub fn max_degree(&self) -> Option<i32> {
        self.coeffs.keys().next_back().copied()
    }

    /// `max_degree - min_degree`, zero for the zero loop.
    pub fn span(&self) -> i32 {
        match (self.min_degree(), self.max_degree()) {
            (Some(lo), Some(hi)) => hi - lo,
            _ => 0,
        }
    }

    pub fn evaluate(&self, lambda: f64) -> Result<Mat3> {
        if lambda == 0.0 {
            if self.min_degree().is_some_and(|k| k < 0) {
                return Err(Error::Domain(
                    "evaluation at lambda = 0 with negative degrees".into(),
                ));
            }
            return Ok(self.coefficient(0));
        }
        Ok(self
            .coeffs
            .iter()
            .fold(Mat3::zeros(), |acc, (&k, m)| acc + m * lambda.powi(k)))
    }

    pub fn multiply(&self, other: &Self) -> Self {
        let mut coeffs: BTreeMap<i32, Mat3> = BTreeMap::new();
        for (&i, a) in &self.coeffs {
            for (&j, b) in &other.coeffs {
                *coeffs.entry(i + j).or_insert_with(Mat3::zeros) += a * b;
            }
        }
        let mut out = Self { coeffs };
        out.prune();
        out
    }

    pub fn add(&self, other: &Self) -> Self {
        Self::from_terms(self.terms().chain(other.terms()).map(|(k, m)| (k, *m)))
    }

    pub fn sub(&self, other: &Self) -> Self {
        self.add(&other.scale(-1.0))
    }

    pub fn scale(&self, s: f64) -> Self {
        Self::from_terms(self.terms().map(|(k, m)| (k, m * s)))
    }

    /// Left multiplication by a constant matrix.
    pub fn left_mul(&self, c: &Mat3) -> Self {
        Self::from_terms(self.terms().map(|(k, m)| (k, c * m)))
    }

    /// Right multiplication by a constant matrix.
    pub fn right_mul(&self, c: &Mat3) -> Self {
        Self::from_terms(self.terms().map(|(k, m)| (k, m * c)))
    }

    /// Degrees inside `lo..=hi` only.
    pub fn truncate(&self, lo: i32, hi: i32) -> Self {
        Self {
            coeffs: self.coeffs.range(lo..=hi).map(|(&k, m)| (k, *m)).collect(),
        }
    }

    /// The loop `lambda -> transpose(a(-lambda))`.
    pub fn reflected_transpose(&self) -> Self {
        Self::from_terms(
            self.terms()
                .map(|(k, m)| (k, m.transpose() * if k % 2 == 0 { 1.0 } else { -1.0 })),
        )
    }

    /// Root of the sum of squared entries over all degrees.
    pub fn coefficient_norm(&self) -> f64 {
        self.coeffs
            .values()
            .map(|m| m.norm_squared())
            .sum::<f64>()
            .sqrt()
    }

    /// Largest absolute entry over all degrees.
    pub fn max_norm(&self) -> f64 {
        self.coeffs.values().map(max_abs).fold(0.0, f64::max)
    }

    /// Coefficient norm of the part outside `lo..=hi`.
    pub fn mass_outside(&self, lo: i32, hi: i32) -> f64 {
        self.coeffs
            .iter()
            .filter(|(k, _)| **k < lo || **k > hi)
            .map(|(_, m)| m.norm_squared())
            .sum::<f64>()
            .sqrt()
    }

    /// One line per stored degree: `deg k: ` then nine reals row-major.
    pub fn dump(&self) -> String {
        let mut out = String::new();
        for (k, m) in &self.coeffs {
            let _ = write!(out, "deg {k}:");
            for i in 0..3 {
                for j in 0..3 {
                    let _ = write!(out, " {:.17e}", m[(i, j)]);
                }
            }
            out.push('\n');
        }
        out
    }

    /// Inverse with the default degree bounds (input span + 6 on the sides
    /// the input occupies).
    pub fn inverse(&self) -> Result<Self> {
        let bound = self.span() + 6;
        let neg = if self.min_degree().unwrap_or(0) < 0 { bound } else { 0 };
        let pos = if self.max_degree().unwrap_or(0) > 0 { bound } else { 0 };
        self.inverse_of_group_element(neg, pos)
    }

    /// Inverse with coefficients restricted to degrees
    /// `-max_neg_degree..=max_pos_degree`.
    ///
    /// One-sided inputs use the power-series recursion, which is exact
    /// whenever the true inverse fits the bounds; mixed inputs fall back to
    /// least squares over all coefficients.
    pub fn inverse_of_group_element(&self, max_neg_degree: i32, max_pos_degree: i32) -> Result<Self> {
        for &lambda in &PROBES {
            let det = self.evaluate(lambda)?.determinant();
            if det.abs() < 1e-12 || !det.is_finite() {
                return Err(Error::OutsideGroup { lambda });
            }
        }
        let lo = self.min_degree().unwrap_or(0);
        let hi = self.max_degree().unwrap_or(0);
        let a0_inv = self.coefficient(0).try_inverse();
        let candidate = match a0_inv {
            Some(inv0) if lo >= 0 => self.series_inverse(&inv0, max_pos_degree, 1),
            Some(inv0) if hi <= 0 => self.series_inverse(&inv0, max_neg_degree, -1),
            _ => self.least_squares_inverse(max_neg_degree, max_pos_degree)?,
        };
        let residual = self
            .multiply(&candidate)
            .sub(&Self::identity())
            .coefficient_norm();
        if residual > INVERSE_TOL {
            return Err(Error::Truncation { residual });
        }
        Ok(candidate)
    }

    fn series_inverse(&self, inv0: &Mat3, terms: i32, dir: i32) -> Self {
        let mut b: Vec<Mat3> = vec![*inv0];
        for k in 1..=terms {
            let mut acc = Mat3::zeros();
            for j in 1..=k {
                let aj = self.coefficient(dir * j);
                if aj != Mat3::zeros() {
                    acc += aj * b[(k - j) as usize];
                }
            }
            b.push(-inv0 * acc);
        }
        Self::from_terms(b.into_iter().enumerate().map(|(k, m)| (dir * k as i32, m)))
    }

    fn least_squares_inverse(&self, max_neg: i32, max_pos: i32) -> Result<Self> {
        let lo = self.min_degree().unwrap_or(0);
        let hi = self.max_degree().unwrap_or(0);
        let nb = (max_neg + max_pos + 1) as usize;
        let d_lo = lo - max_neg;
        let d_hi = hi + max_pos;
        let rows = 3 * (d_hi - d_lo + 1) as usize;
        let mut sys = DMatrix::<f64>::zeros(rows, 3 * nb);
        for d in d_lo..=d_hi {
            for jb in 0..nb {
                let j = jb as i32 - max_neg;
                let ak = self.coefficient(d - j);
                for r in 0..3 {
                    for c in 0..3 {
                        sys[(3 * (d - d_lo) as usize + r, 3 * jb + c)] = ak[(r, c)];
                    }
                }
            }
        }
        let svd = sys.svd(true, true);
        let smax = svd.singular_values.max();
        let eps = 1e-13 * smax;
        let mut coeffs = vec![Mat3::zeros(); nb];
        for col in 0..3 {
            let mut rhs = DVector::<f64>::zeros(rows);
            rhs[3 * (0 - d_lo) as usize + col] = 1.0;
            let x = svd
                .solve(&rhs, eps)
                .map_err(|e| Error::Domain(e.to_string()))?;
            for (jb, m) in coeffs.iter_mut().enumerate() {
                for r in 0..3 {
                    m[(r, col)] = x[3 * jb + r];
                }
            }
        }
        Ok(Self::from_terms(
            coeffs
                .into_iter()
                .enumerate()
                .map(|(jb, m)| (jb as i32 - max_neg, m)),
        ))
    }
}

impl fmt::Display for LaurentMatrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.dump())
    }
}

impl std::ops::Mul for &LaurentMatrix {
    type Output = LaurentMatrix;

    fn mul(self, rhs: Self) -> LaurentMatrix {
        self.multiply(rhs)
    }
}

/// The twisting data of the loop group for a given sphere kind.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TwistConstants {
    /// Rows `(0,1,0), (1,0,0), (0,0,-H)`.
    pub t: Mat3,
}

impl TwistConstants {
    pub fn new(kind: SphereKind) -> Self {
        let h = kind.h();
        Self {
            t: Mat3::new(0.0, 1.0, 0.0, 1.0, 0.0, 0.0, 0.0, 0.0, -h),
        }
    }

    /// Whether entry `(i, j)` (0-based) may be nonzero in a coefficient of
    /// the given degree. Degree class 0 is diagonal; classes 1 and 2 are the
    /// two cyclic off-diagonal patterns.
    pub fn allowed(degree: i32, i: usize, j: usize) -> bool {
        match degree.rem_euclid(3) {
            0 => i == j,
            1 => matches!((i, j), (0, 2) | (1, 0) | (2, 1)),
            _ => matches!((i, j), (0, 1) | (1, 2) | (2, 0)),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TwistReport {
    /// `max_lambda || a(-lambda)^T T a(lambda) - T ||` over the probes.
    pub t_residual: f64,
    /// Root-sum-square of coefficient entries outside the degree pattern.
    pub q_block_residual: f64,
    /// `max_lambda | det a(lambda) - 1 |` over the probes.
    pub det_residual: f64,
}

impl TwistReport {
    pub fn max(&self) -> f64 {
        self.t_residual.max(self.q_block_residual).max(self.det_residual)
    }
}

pub fn verify_twisted(a: &LaurentMatrix, kind: SphereKind) -> TwistReport {
    let t = TwistConstants::new(kind).t;
    let mut t_residual: f64 = 0.0;
    let mut det_residual: f64 = 0.0;
    for &lambda in &PROBES {
        // Probes are nonzero, so evaluation cannot fail.
        let at = a.evaluate(lambda).unwrap_or_else(|_| Mat3::zeros());
        let at_neg = a.evaluate(-lambda).unwrap_or_else(|_| Mat3::zeros());
        t_residual = t_residual.max((at_neg.transpose() * t * at - t).norm());
        det_residual = det_residual.max((at.determinant() - 1.0).abs());
    }
    let mut q_sq = 0.0;
    for (k, m) in a.terms() {
        for i in 0..3 {
            for j in 0..3 {
                if !TwistConstants::allowed(k, i, j) {
                    q_sq += m[(i, j)] * m[(i, j)];
                }
            }
        }
    }
    TwistReport {
        t_residual,
        q_block_residual: q_sq.sqrt(),
        det_residual,
    }
}
