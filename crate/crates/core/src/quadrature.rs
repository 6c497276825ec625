//! Uniform parameter grids and integrals from the origin.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lattice::{ScalarFn, Sequence};

/// Absolute tolerance per grid interval.
pub const INTERVAL_TOL: f64 = 1e-13;

const MAX_DEPTH: u32 = 48;

/// Points `i * step` for `i` in `lo..=hi`, with `lo <= 0 <= hi`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct UniformGrid {
    pub step: f64,
    pub lo: i64,
    pub hi: i64,
}

impl UniformGrid {
    pub fn new(step: f64, lo: i64, hi: i64) -> Result<Self> {
        if !(step > 0.0 && step.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "grid step must be positive, got {step}"
            )));
        }
        if lo > 0 || hi < 0 {
            return Err(Error::InvalidParameter(format!(
                "grid {lo}..={hi} does not contain 0"
            )));
        }
        Ok(Self { step, lo, hi })
    }

    /// `intervals + 1` points from 0 to `end` (or from `end` to 0 when
    /// `end` is negative).
    pub fn from_origin(end: f64, intervals: i64) -> Result<Self> {
        let step = end.abs() / intervals as f64;
        if end >= 0.0 {
            Self::new(step, 0, intervals)
        } else {
            Self::new(step, -intervals, 0)
        }
    }

    pub fn point(&self, i: i64) -> f64 {
        i as f64 * self.step
    }

    pub fn len(&self) -> usize {
        (self.hi - self.lo + 1) as usize
    }

    pub fn is_empty(&self) -> bool {
        false
    }
}

fn simpson(fa: f64, fm: f64, fb: f64, a: f64, b: f64) -> f64 {
    (b - a) / 6.0 * (fa + 4.0 * fm + fb)
}

#[allow(clippy::too_many_arguments)]
fn refine(
    f: &dyn Fn(f64) -> f64,
    a: f64,
    b: f64,
    fa: f64,
    fm: f64,
    fb: f64,
    whole: f64,
    tol: f64,
    depth: u32,
) -> f64 {
    let m = 0.5 * (a + b);
    let lm = 0.5 * (a + m);
    let rm = 0.5 * (m + b);
    let flm = f(lm);
    let frm = f(rm);
    let left = simpson(fa, flm, fm, a, m);
    let right = simpson(fm, frm, fb, m, b);
    let diff = left + right - whole;
    if depth >= MAX_DEPTH || diff.abs() <= 15.0 * tol {
        return left + right + diff / 15.0;
    }
    refine(f, a, m, fa, flm, fm, left, 0.5 * tol, depth + 1)
        + refine(f, m, b, fm, frm, fb, right, 0.5 * tol, depth + 1)
}

/// Adaptive Simpson quadrature of `f` over `[a, b]` (signed for `b < a`).
pub fn integrate(f: &dyn Fn(f64) -> f64, a: f64, b: f64, tol: f64) -> f64 {
    if a == b {
        return 0.0;
    }
    let m = 0.5 * (a + b);
    let (lm, rm) = (0.5 * (a + m), 0.5 * (m + b));
    let (fa, flm, fm, frm, fb) = (f(a), f(lm), f(m), f(rm), f(b));
    // Split once up front so symmetric integrands are not accepted on a
    // single coincidental panel.
    let left = simpson(fa, flm, fm, a, m);
    let right = simpson(fm, frm, fb, m, b);
    refine(f, a, m, fa, flm, fm, left, 0.5 * tol, 1)
        + refine(f, m, b, fm, frm, fb, right, 0.5 * tol, 1)
}

/// `int_0^{i step} f` at every grid point, interval by interval outward from
/// the origin.
pub fn cumulative_integral(f: &dyn Fn(f64) -> f64, grid: &UniformGrid) -> Sequence {
    let mut out = vec![0.0; grid.len()];
    let at = |i: i64| (i - grid.lo) as usize;
    for i in 1..=grid.hi {
        out[at(i)] = out[at(i - 1)] + integrate(f, grid.point(i - 1), grid.point(i), INTERVAL_TOL);
    }
    for i in (grid.lo..0).rev() {
        out[at(i)] = out[at(i + 1)] - integrate(f, grid.point(i), grid.point(i + 1), INTERVAL_TOL);
    }
    Sequence::new(grid.lo, out)
}

/// `t -> int_0^t f`, tabulated on a grid and completed inside each interval.
#[derive(Clone)]
pub struct Antiderivative {
    f: ScalarFn,
    grid: UniformGrid,
    nodes: Sequence,
}

impl Antiderivative {
    pub fn new(f: ScalarFn, grid: UniformGrid) -> Self {
        let nodes = cumulative_integral(&*f, &grid);
        Self { f, grid, nodes }
    }

    pub fn eval(&self, t: f64) -> f64 {
        let i = ((t / self.grid.step).trunc() as i64).clamp(self.grid.lo, self.grid.hi);
        let base = self.nodes.get(i).unwrap_or(0.0);
        base + integrate(&*self.f, self.grid.point(i), t, INTERVAL_TOL)
    }

    pub fn at_node(&self, i: i64) -> Result<f64> {
        self.nodes.get(i)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::sync::Arc;

    #[test]
    fn integrates_smooth_and_kinked_functions() {
        let v = integrate(&|x: f64| x.sin(), 0.0, std::f64::consts::PI, 1e-13);
        assert!((v - 2.0).abs() < 1e-12);
        let v = integrate(&|x: f64| (2.0 * x).sin().abs(), -1.0, 2.5, 1e-13);
        // |sin 2x| has kinks at multiples of pi/2.
        let exact = {
            let prim = |u: f64| {
                let q = (2.0 * u / std::f64::consts::PI).floor();
                q + 0.5 * (1.0 - (2.0 * u - q * std::f64::consts::PI).cos())
            };
            prim(2.5) - prim(-1.0)
        };
        assert!((v - exact).abs() < 1e-11, "{v} vs {exact}");
        assert!((integrate(&|x: f64| x, 1.0, 0.0, 1e-13) + 0.5).abs() < 1e-15);
    }

    #[test]
    fn cumulative_from_origin_both_ways() {
        let g = UniformGrid::new(0.25, -4, 6).unwrap();
        let c = cumulative_integral(&|x: f64| 3.0 * x * x, &g);
        for i in -4..=6 {
            let x = g.point(i);
            assert!((c.get(i).unwrap() - x * x * x).abs() < 1e-13);
        }
    }

    #[test]
    fn antiderivative_between_nodes() {
        let g = UniformGrid::new(0.5, -2, 2).unwrap();
        let a = Antiderivative::new(Arc::new(|x: f64| x.cos()), g);
        for t in [-1.3, -0.2, 0.0, 0.77, 1.0, 1.6] {
            assert!((a.eval(t) - f64::sin(t)).abs() < 1e-13);
        }
    }

    #[test]
    fn grid_must_contain_origin() {
        assert!(UniformGrid::new(0.1, 1, 4).is_err());
        let g = UniformGrid::from_origin(std::f64::consts::PI, 40).unwrap();
        assert_eq!(g.len(), 41);
        assert!((g.point(40) - std::f64::consts::PI).abs() < 1e-15);
    }
}
