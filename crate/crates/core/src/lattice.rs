//! Lattice windows, index-addressed sequences and curves, surfaces on a
//! window, and the signed summation used throughout the crate.
//!
//! Every lattice object is stored densely over an inclusive integer window.
//! Negative indices are ordinary indices.

use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use nalgebra::{Vector2, Vector3};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub type Point2 = Vector2<f64>;
pub type Point3 = Vector3<f64>;

/// Relative threshold below which `|omega|` marks a singular site.
pub const SINGULAR_REL_TOL: f64 = 1e-9;

/// Inclusive rectangle of lattice sites `(n, m)`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct LatticeWindow {
    pub n_min: i64,
    pub n_max: i64,
    pub m_min: i64,
    pub m_max: i64,
}

impl LatticeWindow {
    pub fn new(n_min: i64, n_max: i64, m_min: i64, m_max: i64) -> Result<Self> {
        if n_min > n_max || m_min > m_max {
            return Err(Error::InvalidWindow(format!(
                "{n_min}:{n_max},{m_min}:{m_max} has an empty range"
            )));
        }
        Ok(Self {
            n_min,
            n_max,
            m_min,
            m_max,
        })
    }

    /// Same inclusive range in both directions.
    pub fn square(lo: i64, hi: i64) -> Result<Self> {
        Self::new(lo, hi, lo, hi)
    }

    pub fn n_len(&self) -> usize {
        (self.n_max - self.n_min + 1) as usize
    }

    pub fn m_len(&self) -> usize {
        (self.m_max - self.m_min + 1) as usize
    }

    pub fn len(&self) -> usize {
        self.n_len() * self.m_len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn contains(&self, n: i64, m: i64) -> bool {
        (self.n_min..=self.n_max).contains(&n) && (self.m_min..=self.m_max).contains(&m)
    }

    /// Row-major offset, `m` outer and `n` inner.
    pub fn index(&self, n: i64, m: i64) -> Option<usize> {
        if !self.contains(n, m) {
            return None;
        }
        let row = (m - self.m_min) as usize;
        let col = (n - self.n_min) as usize;
        Some(row * self.n_len() + col)
    }

    pub fn site(&self, index: usize) -> (i64, i64) {
        let w = self.n_len();
        (
            self.n_min + (index % w) as i64,
            self.m_min + (index / w) as i64,
        )
    }

    /// All sites in row-major order.
    pub fn sites(&self) -> impl Iterator<Item = (i64, i64)> + '_ {
        (0..self.len()).map(move |i| self.site(i))
    }

    /// Lower-left corners of the unit cells inside the window.
    pub fn cells(&self) -> impl Iterator<Item = (i64, i64)> + '_ {
        self.sites()
            .filter(move |&(n, m)| n < self.n_max && m < self.m_max)
    }

    /// Sites with all four axis neighbours inside the window.
    pub fn interior(&self) -> impl Iterator<Item = (i64, i64)> + '_ {
        self.sites().filter(move |&(n, m)| {
            n > self.n_min && n < self.n_max && m > self.m_min && m < self.m_max
        })
    }

    /// Grow (or shrink, for negative margins) on every side.
    pub fn expanded(&self, margin: i64) -> Result<Self> {
        Self::new(
            self.n_min - margin,
            self.n_max + margin,
            self.m_min - margin,
            self.m_max + margin,
        )
    }
}

impl fmt::Display for LatticeWindow {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{}:{},{}:{}",
            self.n_min, self.n_max, self.m_min, self.m_max
        )
    }
}

impl FromStr for LatticeWindow {
    type Err = Error;

    /// Parses `n_min:n_max,m_min:m_max`.
    fn from_str(s: &str) -> Result<Self> {
        let bad = || Error::InvalidWindow(format!("expected `a:b,c:d`, got `{s}`"));
        let (ns, ms) = s.trim().split_once(',').ok_or_else(bad)?;
        let range = |part: &str| -> Result<(i64, i64)> {
            let (lo, hi) = part.trim().split_once(':').ok_or_else(bad)?;
            let lo = lo.trim().parse::<i64>().map_err(|_| bad())?;
            let hi = hi.trim().parse::<i64>().map_err(|_| bad())?;
            Ok((lo, hi))
        };
        let (n_min, n_max) = range(ns)?;
        let (m_min, m_max) = range(ms)?;
        Self::new(n_min, n_max, m_min, m_max)
    }
}

/// Dense map from the sites of a window to values.
#[derive(Clone, Debug, PartialEq)]
pub struct SiteMap<T> {
    window: LatticeWindow,
    values: Vec<T>,
}

impl<T> SiteMap<T> {
    pub fn from_fn(window: LatticeWindow, mut f: impl FnMut(i64, i64) -> T) -> Self {
        let values = window.sites().map(|(n, m)| f(n, m)).collect();
        Self { window, values }
    }

    pub fn try_from_fn(
        window: LatticeWindow,
        mut f: impl FnMut(i64, i64) -> Result<T>,
    ) -> Result<Self> {
        let values = window
            .sites()
            .map(|(n, m)| f(n, m))
            .collect::<Result<Vec<_>>>()?;
        Ok(Self { window, values })
    }

    /// Parallel construction; `f` must be pure.
    pub fn par_try_from_fn<F>(window: LatticeWindow, f: F) -> Result<Self>
    where
        T: Send,
        F: Fn(i64, i64) -> Result<T> + Sync,
    {
        let values = (0..window.len())
            .into_par_iter()
            .map(|i| {
                let (n, m) = window.site(i);
                f(n, m)
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self { window, values })
    }

    pub fn window(&self) -> LatticeWindow {
        self.window
    }

    pub fn values(&self) -> &[T] {
        &self.values
    }

    pub fn get(&self, n: i64, m: i64) -> Option<&T> {
        self.window.index(n, m).map(|i| &self.values[i])
    }

    pub fn at(&self, n: i64, m: i64) -> Result<&T> {
        self.get(n, m).ok_or(Error::SiteOutOfRange { n, m })
    }

    pub fn set(&mut self, n: i64, m: i64, value: T) -> Result<()> {
        let i = self.window.index(n, m).ok_or(Error::SiteOutOfRange { n, m })?;
        self.values[i] = value;
        Ok(())
    }

    pub fn iter(&self) -> impl Iterator<Item = ((i64, i64), &T)> + '_ {
        self.values
            .iter()
            .enumerate()
            .map(move |(i, v)| (self.window.site(i), v))
    }

    pub fn map<U>(&self, mut f: impl FnMut(&T) -> U) -> SiteMap<U> {
        SiteMap {
            window: self.window,
            values: self.values.iter().map(&mut f).collect(),
        }
    }
}

/// Real sequence on a contiguous index range.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Sequence {
    start: i64,
    values: Vec<f64>,
}

impl Sequence {
    pub fn new(start: i64, values: Vec<f64>) -> Self {
        Self { start, values }
    }

    pub fn from_fn(lo: i64, hi: i64, f: impl Fn(i64) -> f64) -> Self {
        Self {
            start: lo,
            values: (lo..=hi).map(f).collect(),
        }
    }

    pub fn constant(lo: i64, hi: i64, value: f64) -> Self {
        Self::from_fn(lo, hi, |_| value)
    }

    pub fn start(&self) -> i64 {
        self.start
    }

    /// Last index (inclusive). Equal to `start - 1` when empty.
    pub fn end(&self) -> i64 {
        self.start + self.values.len() as i64 - 1
    }

    pub fn contains(&self, k: i64) -> bool {
        k >= self.start && k <= self.end()
    }

    pub fn get(&self, k: i64) -> Result<f64> {
        if self.contains(k) {
            Ok(self.values[(k - self.start) as usize])
        } else {
            Err(Error::IndexOutOfRange { index: k })
        }
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn iter(&self) -> impl Iterator<Item = (i64, f64)> + '_ {
        self.values
            .iter()
            .enumerate()
            .map(move |(i, &v)| (self.start + i as i64, v))
    }

    pub fn signed_sum(&self, n: i64) -> Result<f64> {
        signed_sum(|k| self.get(k), n)
    }

    /// All signed partial sums `S_n` that the stored range supports.
    ///
    /// The result covers `start - 1 ..= end`; requires `start <= 1` and
    /// `end >= 0` so that the range is anchored at the origin.
    pub fn partial_sums(&self) -> Result<Sequence> {
        if self.start > 1 || self.end() < 0 {
            return Err(Error::IndexOutOfRange {
                index: if self.start > 1 { 1 } else { 0 },
            });
        }
        let lo = self.start - 1;
        let hi = self.end();
        let mut out = vec![0.0; (hi - lo + 1) as usize];
        let at = |k: i64| (k - lo) as usize;
        for k in 1..=hi {
            out[at(k)] = out[at(k - 1)] + self.get(k)?;
        }
        for k in (lo..=-1).rev() {
            out[at(k)] = out[at(k + 1)] - self.get(k + 1)?;
        }
        Ok(Sequence::new(lo, out))
    }
}

/// Signed sum: `x_1 + .. + x_n` for `n >= 1`, zero for `n = 0`, and
/// `-(x_{n+1} + .. + x_0)` for `n <= -1`.
pub fn signed_sum(x: impl Fn(i64) -> Result<f64>, n: i64) -> Result<f64> {
    match n {
        0 => Ok(0.0),
        n if n > 0 => (1..=n).try_fold(0.0, |acc, k| Ok(acc + x(k)?)),
        n => {
            let s = (n + 1..=0).try_fold(0.0, |acc, k| Ok(acc + x(k)?))?;
            Ok(-s)
        }
    }
}

pub fn det2(a: &Point2, b: &Point2) -> f64 {
    a.x * b.y - a.y * b.x
}

/// Planar polyline indexed by a contiguous integer range containing 0.
#[derive(Clone, Debug, PartialEq)]
pub struct DiscreteCurve {
    step: f64,
    start: i64,
    points: Vec<Point2>,
}

impl DiscreteCurve {
    pub fn new(step: f64, start: i64, points: Vec<Point2>) -> Result<Self> {
        if !(step > 0.0 && step.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "curve step must be positive, got {step}"
            )));
        }
        let end = start + points.len() as i64 - 1;
        if start > 0 || end < 0 {
            return Err(Error::InvalidParameter(format!(
                "curve index range {start}..={end} does not contain 0"
            )));
        }
        if points.iter().any(|p| !p.x.is_finite() || !p.y.is_finite()) {
            return Err(Error::InvalidParameter("non-finite curve point".into()));
        }
        Ok(Self {
            step,
            start,
            points,
        })
    }

    pub fn from_fn(step: f64, lo: i64, hi: i64, f: impl Fn(i64) -> Point2) -> Result<Self> {
        Self::new(step, lo, (lo..=hi).map(f).collect())
    }

    pub fn step(&self) -> f64 {
        self.step
    }

    pub fn start(&self) -> i64 {
        self.start
    }

    pub fn end(&self) -> i64 {
        self.start + self.points.len() as i64 - 1
    }

    pub fn point(&self, k: i64) -> Result<Point2> {
        if k < self.start || k > self.end() {
            return Err(Error::IndexOutOfRange { index: k });
        }
        Ok(self.points[(k - self.start) as usize])
    }

    pub fn iter(&self) -> impl Iterator<Item = (i64, Point2)> + '_ {
        self.points
            .iter()
            .enumerate()
            .map(move |(i, &p)| (self.start + i as i64, p))
    }

    /// Same indices and step, every point transformed.
    pub fn map_points(&self, f: impl Fn(Point2) -> Point2) -> Self {
        Self {
            step: self.step,
            start: self.start,
            points: self.points.iter().map(|&p| f(p)).collect(),
        }
    }

    /// Forward difference quotient `(p_{k+1} - p_k) / step`.
    pub fn forward_difference(&self, k: i64) -> Result<Point2> {
        Ok((self.point(k + 1)? - self.point(k)?) / self.step)
    }
}

pub type CurveFn = Arc<dyn Fn(f64) -> Point2 + Send + Sync>;
pub type ScalarFn = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

/// Smooth plane curve given by closed-form position, velocity and
/// acceleration.
#[derive(Clone)]
pub struct SmoothCurveSampler {
    position: CurveFn,
    velocity: CurveFn,
    acceleration: CurveFn,
}

impl fmt::Debug for SmoothCurveSampler {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("SmoothCurveSampler")
    }
}

impl SmoothCurveSampler {
    pub fn new(
        position: impl Fn(f64) -> Point2 + Send + Sync + 'static,
        velocity: impl Fn(f64) -> Point2 + Send + Sync + 'static,
        acceleration: impl Fn(f64) -> Point2 + Send + Sync + 'static,
    ) -> Self {
        Self {
            position: Arc::new(position),
            velocity: Arc::new(velocity),
            acceleration: Arc::new(acceleration),
        }
    }

    pub fn point(&self, t: f64) -> Point2 {
        (self.position)(t)
    }

    pub fn velocity(&self, t: f64) -> Point2 {
        (self.velocity)(t)
    }

    pub fn acceleration(&self, t: f64) -> Point2 {
        (self.acceleration)(t)
    }

    /// Largest relative mismatch between the supplied derivatives and
    /// central differences of the lower-order evaluator at `probes`.
    pub fn derivative_defect(&self, probes: &[f64], h: f64) -> f64 {
        let rel = |exact: Point2, approx: Point2| (exact - approx).norm() / exact.norm().max(1.0);
        probes
            .iter()
            .map(|&t| {
                let v = (self.point(t + h) - self.point(t - h)) / (2.0 * h);
                let a = (self.velocity(t + h) - self.velocity(t - h)) / (2.0 * h);
                rel(self.velocity(t), v).max(rel(self.acceleration(t), a))
            })
            .fold(0.0, f64::max)
    }

    /// Samples `p(k * step)` for `k` in `lo..=hi`.
    pub fn sample(&self, step: f64, lo: i64, hi: i64) -> Result<DiscreteCurve> {
        DiscreteCurve::from_fn(step, lo, hi, |k| self.point(k as f64 * step))
    }
}

/// Proper (`H = -1`, concurrent normals) or improper (`H = 0`, parallel
/// normals).
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum SphereKind {
    Improper,
    Proper,
}

impl SphereKind {
    pub fn h(self) -> f64 {
        match self {
            SphereKind::Improper => 0.0,
            SphereKind::Proper => -1.0,
        }
    }

    pub fn from_h(h: i64) -> Result<Self> {
        match h {
            0 => Ok(SphereKind::Improper),
            -1 => Ok(SphereKind::Proper),
            other => Err(Error::InvalidParameter(format!(
                "H must be 0 or -1, got {other}"
            ))),
        }
    }
}

/// Map from a window to 3-space with its lattice steps and normal data.
#[derive(Clone, Debug, PartialEq)]
pub struct LatticeSurface {
    pub eps: f64,
    pub delta: f64,
    pub kind: SphereKind,
    pub xi0: Point3,
    points: SiteMap<Point3>,
}

impl LatticeSurface {
    pub fn new(eps: f64, delta: f64, kind: SphereKind, points: SiteMap<Point3>) -> Result<Self> {
        Self::with_xi0(eps, delta, kind, Point3::z(), points)
    }

    pub fn with_xi0(
        eps: f64,
        delta: f64,
        kind: SphereKind,
        xi0: Point3,
        points: SiteMap<Point3>,
    ) -> Result<Self> {
        for (name, v) in [("eps", eps), ("delta", delta)] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::InvalidParameter(format!(
                    "{name} must be positive, got {v}"
                )));
            }
        }
        if let Some(((n, m), _)) = points
            .iter()
            .find(|(_, p)| !(p.x.is_finite() && p.y.is_finite() && p.z.is_finite()))
        {
            return Err(Error::Domain(format!("non-finite point at ({n}, {m})")));
        }
        Ok(Self {
            eps,
            delta,
            kind,
            xi0,
            points,
        })
    }

    pub fn window(&self) -> LatticeWindow {
        self.points.window()
    }

    pub fn points(&self) -> &SiteMap<Point3> {
        &self.points
    }

    pub fn point(&self, n: i64, m: i64) -> Result<Point3> {
        self.points.at(n, m).copied()
    }

    /// Replace one point (used for fault injection and editing).
    pub fn set_point(&mut self, n: i64, m: i64, p: Point3) -> Result<()> {
        self.points.set(n, m, p)
    }

    /// Diagonal of the axis-aligned bounding box.
    pub fn diameter(&self) -> f64 {
        let mut lo = Point3::repeat(f64::INFINITY);
        let mut hi = Point3::repeat(f64::NEG_INFINITY);
        for p in self.points.values() {
            lo = lo.inf(p);
            hi = hi.sup(p);
        }
        (hi - lo).norm()
    }
}

/// `(f^{m+1}_{n+1} - f^m_{n+1} - f^{m+1}_n + f^m_n) / (eps delta)`.
pub fn second_mixed_difference(f: &LatticeSurface, n: i64, m: i64) -> Result<Point3> {
    let p = f.point(n + 1, m + 1)? - f.point(n + 1, m)? - f.point(n, m + 1)? + f.point(n, m)?;
    Ok(p / (f.eps * f.delta))
}

/// Fields `omega`, `A`, `B`, `g` on a window. Absent entries are sites
/// where the field is undefined (missing neighbours or singular frame).
#[derive(Clone, Debug, PartialEq)]
pub struct SurfaceData {
    pub eps: f64,
    pub delta: f64,
    pub kind: SphereKind,
    pub omega: SiteMap<Option<f64>>,
    pub a: SiteMap<Option<f64>>,
    pub b: SiteMap<Option<f64>>,
    pub g: SiteMap<Option<f64>>,
}

impl SurfaceData {
    /// Builds the record and fills `g = 2 / (2 - eps delta H omega)`.
    pub fn new(
        eps: f64,
        delta: f64,
        kind: SphereKind,
        omega: SiteMap<Option<f64>>,
        a: SiteMap<Option<f64>>,
        b: SiteMap<Option<f64>>,
    ) -> Result<Self> {
        let h = kind.h();
        let g = omega.map(|w| {
            w.and_then(|w| {
                let den = 2.0 - eps * delta * h * w;
                (den != 0.0).then(|| 2.0 / den)
            })
        });
        if let Some(((n, m), _)) = omega
            .iter()
            .zip(g.values())
            .find(|((_, w), g)| w.is_some() && g.is_none())
            .map(|(x, _)| x)
        {
            return Err(Error::Domain(format!(
                "2 - eps delta H omega vanishes at ({n}, {m})"
            )));
        }
        Ok(Self {
            eps,
            delta,
            kind,
            omega,
            a,
            b,
            g,
        })
    }

    pub fn window(&self) -> LatticeWindow {
        self.omega.window()
    }

    pub fn omega_at(&self, n: i64, m: i64) -> Option<f64> {
        self.omega.get(n, m).copied().flatten()
    }

    pub fn a_at(&self, n: i64, m: i64) -> Option<f64> {
        self.a.get(n, m).copied().flatten()
    }

    pub fn b_at(&self, n: i64, m: i64) -> Option<f64> {
        self.b.get(n, m).copied().flatten()
    }

    pub fn g_at(&self, n: i64, m: i64) -> Option<f64> {
        self.g.get(n, m).copied().flatten()
    }

    pub fn max_abs_omega(&self) -> f64 {
        self.omega
            .values()
            .iter()
            .flatten()
            .fold(0.0, |acc: f64, w| acc.max(w.abs()))
    }

    /// `SINGULAR_REL_TOL * max |omega|`.
    pub fn singular_tolerance(&self) -> f64 {
        SINGULAR_REL_TOL * self.max_abs_omega()
    }

    /// True where `omega` is defined and below the singular tolerance.
    pub fn is_singular(&self, n: i64, m: i64) -> bool {
        let tol = self.singular_tolerance();
        self.omega_at(n, m).is_some_and(|w| w.abs() <= tol)
    }

    pub fn singular_sites(&self) -> Vec<(i64, i64)> {
        let tol = self.singular_tolerance();
        self.omega
            .iter()
            .filter(|(_, w)| w.is_some_and(|w| w.abs() <= tol))
            .map(|(s, _)| s)
            .collect()
    }
}
