//! Birkhoff factorization `L = V+ (V-)^{-1}` of finite loops, with `V+`
//! holding degrees `>= 0` and constant term the identity, and `V-` holding
//! degrees `<= 0`.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::loop_algebra::{LaurentMatrix, Mat3};

/// Singular values below this fraction of the largest are treated as zero.
pub const SVD_CUTOFF: f64 = 1e-11;

/// Residual above which a truncated factorization is rejected.
pub const TRUNCATION_TOL: f64 = 1e-8;

/// Threshold on `|1 - b s|` for the explicit improper factorization.
pub const BIG_CELL_TOL: f64 = 1e-12;

#[derive(Clone, Debug, PartialEq)]
pub struct BirkhoffPair {
    pub v_plus: LaurentMatrix,
    pub v_minus: LaurentMatrix,
    pub residual: f64,
    /// Off-diagonal mass of the constant term of `V-`, expected to vanish.
    pub v_minus_offdiag: f64,
    /// Truncation order that produced the pair (0 for closed forms).
    pub order: i32,
    /// `max || L V- - V+ ||` over the probe values of `lambda`.
    pub reconstruction: f64,
}

fn offdiag(m: &Mat3) -> f64 {
    let mut s = 0.0;
    for i in 0..3 {
        for j in 0..3 {
            if i != j {
                s += m[(i, j)] * m[(i, j)];
            }
        }
    }
    s.sqrt()
}

fn mat(rows: [[f64; 3]; 3]) -> Mat3 {
    Mat3::from_fn(|i, j| rows[i][j])
}

/// Plus frame of the improper case: unit lower triangular with `b lambda`,
/// `a lambda` and `c lambda^2` below the diagonal.
pub fn improper_plus_frame(a: f64, b: f64, c: f64) -> LaurentMatrix {
    LaurentMatrix::from_terms([
        (0, Mat3::identity()),
        (1, mat([[0.0, 0.0, 0.0], [b, 0.0, 0.0], [0.0, a, 0.0]])),
        (2, mat([[0.0, 0.0, 0.0], [0.0, 0.0, 0.0], [c, 0.0, 0.0]])),
    ])
}

/// Minus frame of the improper case, with `s/lambda`, `r/lambda` and
/// `t/lambda^2` off the diagonal.
pub fn improper_minus_frame(r: f64, s: f64, t: f64) -> LaurentMatrix {
    LaurentMatrix::from_terms([
        (0, Mat3::identity()),
        (-1, mat([[0.0, s, 0.0], [0.0, 0.0, 0.0], [r, 0.0, 0.0]])),
        (-2, mat([[0.0, 0.0, 0.0], [0.0, 0.0, 0.0], [0.0, t, 0.0]])),
    ])
}

/// Closed-form factorization of `(G-)^{-1} F+` for the improper frames
/// built from `(a, b, c)` and `(r, s, t)`.
pub fn factor_explicit_h0(a: f64, b: f64, c: f64, r: f64, s: f64, t: f64) -> Result<BirkhoffPair> {
    let k = 1.0 - b * s;
    if k.abs() < BIG_CELL_TOL {
        return Err(Error::OutsideBigCell { b, s });
    }
    let v_plus = LaurentMatrix::from_terms([
        (0, Mat3::identity()),
        (
            1,
            mat([[0.0, 0.0, 0.0], [b / k, 0.0, 0.0], [0.0, a - s * (a * b - c), 0.0]]),
        ),
        (2, mat([[0.0, 0.0, 0.0], [0.0, 0.0, 0.0], [c / k, 0.0, 0.0]])),
    ]);
    let v_minus = LaurentMatrix::from_terms([
        (0, mat([[1.0 / k, 0.0, 0.0], [0.0, k, 0.0], [0.0, 0.0, 1.0]])),
        (-1, mat([[0.0, s, 0.0], [0.0, 0.0, 0.0], [r + b * t / k, 0.0, 0.0]])),
        (-2, mat([[0.0, 0.0, 0.0], [0.0, 0.0, 0.0], [0.0, t, 0.0]])),
    ]);
    let loop_ = improper_minus_frame(r, s, t)
        .inverse()?
        .multiply(&improper_plus_frame(a, b, c));
    let residual = loop_.multiply(&v_minus).sub(&v_plus).coefficient_norm();
    let mut pair = BirkhoffPair {
        v_minus_offdiag: offdiag(&v_minus.coefficient(0)),
        v_plus,
        v_minus,
        residual,
        order: 0,
        reconstruction: 0.0,
    };
    pair.reconstruction = reconstruction_residual(&loop_, &pair)?;
    Ok(pair)
}

/// Largest accepted [`BirkhoffPair::reconstruction`].
pub const RECONSTRUCTION_TOL: f64 = 1e-8;

/// Coefficients of `V-` below this fraction of the largest one count as
/// solver noise when looking for the effective degree.
pub const TAIL_TOL: f64 = 1e-9;

/// Truncated factorization with `V-` supported on degrees `-order..=0`.
///
/// Solves, column by column, for the coefficients of `V-` such that
/// `L V-` has no negative degrees and constant term the identity. When the
/// solution is negligible below some degree `-j`, the system is solved again
/// at order `j`: the larger system is worse conditioned, and its noise in the
/// deep coefficients is amplified at `|lambda| < 1`.
pub fn factor_truncated(l: &LaurentMatrix, order: i32) -> Result<BirkhoffPair> {
    let mut pair = factor_truncated_ordered(l, order, false)?;
    let largest = pair.v_minus.terms().map(|(_, c)| c.norm()).fold(0.0, f64::max);
    let effective = pair
        .v_minus
        .terms()
        .filter(|(_, c)| c.norm() > TAIL_TOL * largest)
        .map(|(d, _)| -d)
        .max()
        .unwrap_or(0);
    if effective < order {
        if let Ok(compact) = factor_truncated_ordered(l, effective, false) {
            if compact.residual.max(compact.reconstruction) < pair.residual.max(pair.reconstruction) {
                pair = compact;
            }
        }
    }
    if pair.reconstruction > RECONSTRUCTION_TOL {
        return Err(Error::Truncation {
            residual: pair.reconstruction,
        });
    }
    Ok(pair)
}

/// Accepted residual at which [`factor_truncated_escalating`] stops early.
pub const REFINED_TOL: f64 = 1e-12;

/// Same as [`factor_truncated`] but retries with `order + step` until the
/// residual is below [`REFINED_TOL`] or `max_order` is exceeded, returning
/// the best acceptable factorization seen.
pub fn factor_truncated_escalating(
    l: &LaurentMatrix,
    order: i32,
    step: i32,
    max_order: i32,
) -> Result<BirkhoffPair> {
    let mut k = order;
    let mut best: Option<BirkhoffPair> = None;
    loop {
        let attempt = factor_truncated(l, k);
        match attempt {
            Ok(pair) if pair.residual <= REFINED_TOL => return Ok(pair),
            Ok(pair) => {
                let quality = |p: &BirkhoffPair| p.residual.max(p.reconstruction);
                if !best.as_ref().is_some_and(|b| quality(b) <= quality(&pair)) {
                    best = Some(pair);
                }
            }
            Err(Error::Truncation { .. }) => {}
            Err(e) => return Err(e),
        }
        if step <= 0 || k + step > max_order {
            return match best {
                Some(pair) => Ok(pair),
                None => factor_truncated(l, k),
            };
        }
        k += step;
    }
}

pub(crate) fn factor_truncated_ordered(
    l: &LaurentMatrix,
    order: i32,
    reversed: bool,
) -> Result<BirkhoffPair> {
    if order < 0 {
        return Err(Error::InvalidParameter(format!(
            "truncation order must be nonnegative, got {order}"
        )));
    }
    let unknowns = (order + 1) as usize;
    let d_lo = l.min_degree().unwrap_or(0).min(0) - order;
    let rows = 3 * (1 - d_lo) as usize;
    // Unknown block jb holds the coefficient of degree -order + jb, or the
    // mirror image when `reversed`.
    let degree_of = |jb: usize| {
        if reversed {
            -(jb as i32)
        } else {
            jb as i32 - order
        }
    };
    let mut sys = DMatrix::<f64>::zeros(rows, 3 * unknowns);
    for d in d_lo..=0 {
        for jb in 0..unknowns {
            let lk = l.coefficient(d - degree_of(jb));
            for r in 0..3 {
                for c in 0..3 {
                    sys[(3 * (d - d_lo) as usize + r, 3 * jb + c)] = lk[(r, c)];
                }
            }
        }
    }
    let svd = sys.svd(true, true);
    let smax = svd.singular_values.max();
    let smin = svd.singular_values.min();
    if !(smin > SVD_CUTOFF * smax) {
        return Err(Error::OutsideBigCellNumerical { sigma_min: smin });
    }
    let mut coeffs = vec![Mat3::zeros(); unknowns];
    for col in 0..3 {
        let mut rhs = DVector::<f64>::zeros(rows);
        rhs[3 * (-d_lo) as usize + col] = 1.0;
        let x = svd
            .solve(&rhs, SVD_CUTOFF * smax)
            .map_err(|e| Error::Domain(e.to_string()))?;
        for (jb, m) in coeffs.iter_mut().enumerate() {
            for r in 0..3 {
                m[(r, col)] = x[3 * jb + r];
            }
        }
    }
    let v_minus = LaurentMatrix::from_terms(
        coeffs
            .into_iter()
            .enumerate()
            .map(|(jb, m)| (degree_of(jb), m)),
    );
    let product = l.multiply(&v_minus);
    let top = product.max_degree().unwrap_or(0).max(0);
    let v_plus = product.truncate(0, top);
    let discarded = product.mass_outside(0, top);
    let violation = (v_plus.coefficient(0) - Mat3::identity()).norm();
    let residual = discarded + violation;
    if residual > TRUNCATION_TOL {
        return Err(Error::Truncation { residual });
    }
    let mut pair = BirkhoffPair {
        v_minus_offdiag: offdiag(&v_minus.coefficient(0)),
        v_plus,
        v_minus,
        residual,
        order,
        reconstruction: 0.0,
    };
    pair.reconstruction = reconstruction_residual(l, &pair)?;
    Ok(pair)
}

/// `max_lambda || L(lambda) V-(lambda) - V+(lambda) ||` over the probes.
pub fn reconstruction_residual(l: &LaurentMatrix, pair: &BirkhoffPair) -> Result<f64> {
    let mut worst: f64 = 0.0;
    for &lambda in &crate::loop_algebra::PROBES {
        let lhs = l.evaluate(lambda)? * pair.v_minus.evaluate(lambda)?;
        worst = worst.max((lhs - pair.v_plus.evaluate(lambda)?).norm());
    }
    Ok(worst)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn explicit_at_base_point_is_identity() {
        let p = factor_explicit_h0(0.0, 0.0, 0.0, 0.0, 0.0, 0.0).unwrap();
        assert_eq!(p.v_plus, LaurentMatrix::identity());
        assert_eq!(p.v_minus, LaurentMatrix::identity());
        assert_eq!(p.residual, 0.0);
    }

    #[test]
    fn explicit_hand_values() {
        let p = factor_explicit_h0(1.0, 2.0, 3.0, 4.0, 5.0, 6.0).unwrap();
        // b / (1 - b s) = 2 / (1 - 10)
        assert!((p.v_plus.coefficient(1)[(1, 0)] + 2.0 / 9.0).abs() < 1e-15);
        // a - s (a b - c) = 1 - 5 (2 - 3)
        assert!((p.v_plus.coefficient(1)[(2, 1)] - 6.0).abs() < 1e-15);
        assert!(p.residual < 1e-12);
        // F+ V- = G- V+
        let lhs = improper_plus_frame(1.0, 2.0, 3.0).multiply(&p.v_minus);
        let rhs = improper_minus_frame(4.0, 5.0, 6.0).multiply(&p.v_plus);
        assert!(lhs.sub(&rhs).coefficient_norm() < 1e-12);
    }

    #[test]
    fn explicit_rejects_big_cell_boundary() {
        assert_eq!(
            factor_explicit_h0(0.0, 1.0, 0.0, 0.0, 1.0, 0.0),
            Err(Error::OutsideBigCell { b: 1.0, s: 1.0 })
        );
    }

    #[test]
    fn truncated_identity() {
        let p = factor_truncated(&LaurentMatrix::identity(), 3).unwrap();
        assert!(p.v_plus.sub(&LaurentMatrix::identity()).coefficient_norm() < 1e-14);
        assert!(p.v_minus.sub(&LaurentMatrix::identity()).coefficient_norm() < 1e-14);
        assert!(p.residual < 1e-14);
    }

    #[test]
    fn truncated_matches_closed_form() {
        let l = improper_minus_frame(4.0, 5.0, 6.0)
            .inverse()
            .unwrap()
            .multiply(&improper_plus_frame(1.0, 2.0, 3.0));
        let exact = factor_explicit_h0(1.0, 2.0, 3.0, 4.0, 5.0, 6.0).unwrap();
        let num = factor_truncated(&l, l.span() + 6).unwrap();
        assert!(num.v_plus.sub(&exact.v_plus).coefficient_norm() < 1e-10);
        assert!(num.v_minus.sub(&exact.v_minus).coefficient_norm() < 1e-10);
        assert!(num.v_minus_offdiag < 1e-10);
    }

    #[test]
    fn unknown_ordering_does_not_change_result() {
        let l = improper_minus_frame(0.3, -0.7, 1.1)
            .inverse()
            .unwrap()
            .multiply(&improper_plus_frame(0.2, 0.5, -0.4));
        let a = factor_truncated_ordered(&l, 8, false).unwrap();
        let b = factor_truncated_ordered(&l, 8, true).unwrap();
        assert!(a.v_plus.sub(&b.v_plus).coefficient_norm() < 1e-10);
        assert!(a.v_minus.sub(&b.v_minus).coefficient_norm() < 1e-10);
    }

    #[test]
    fn singular_system_reports_big_cell() {
        // 1 - b s = 0 puts the loop on the boundary of the big cell.
        let l = improper_minus_frame(0.0, 1.0, 0.0)
            .inverse()
            .unwrap()
            .multiply(&improper_plus_frame(0.0, 1.0, 0.0));
        assert!(matches!(
            factor_truncated(&l, 8),
            Err(Error::OutsideBigCellNumerical { .. })
        ));
    }
}
