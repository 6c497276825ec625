//! Closed-form worked examples with their analytic data and singular sets,
//! and a cross-check that rebuilds each one through the generic builders.

use std::f64::consts::{FRAC_PI_2, PI};
use std::fmt;
use std::rc::Rc;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::improper::{build_discrete_from_curves, build_smooth_from_curves};
use crate::lattice::{
    det2, DiscreteCurve, LatticeSurface, LatticeWindow, Point2, Point3, SiteMap,
    SmoothCurveSampler, SphereKind, SurfaceData,
};
use crate::quadrature::UniformGrid;
use crate::verify::{check_builder_data, compare_field, verify_surface, CheckEntry, Tolerances, VerificationReport};

/// Tolerance for deciding that a parameter sits on a special value
/// (a multiple of a period, or a zero of a factor).
pub const SNAP_TOL: f64 = 1e-9;

/// `sign` with `sign(0) = 0`.
pub fn sign(x: f64) -> f64 {
    if x > 0.0 {
        1.0
    } else if x < 0.0 {
        -1.0
    } else {
        0.0
    }
}

fn near_multiple(x: f64, period: f64, tol: f64) -> bool {
    let r = x / period;
    (r - r.round()).abs() * period <= tol
}

/// `k` when `u` is within rounding of `k pi / 2`.
fn quarter_turn(u: f64) -> Option<i64> {
    let r = u / FRAC_PI_2;
    ((r - r.round()).abs() < 1e-12).then(|| r.round() as i64)
}

/// `(cos u, sin u)`, exact at multiples of `pi / 2`.
fn exact_cos_sin(u: f64) -> (f64, f64) {
    match quarter_turn(u).map(|k| k.rem_euclid(4)) {
        Some(0) => (1.0, 0.0),
        Some(1) => (0.0, 1.0),
        Some(2) => (-1.0, 0.0),
        Some(_) => (0.0, -1.0),
        None => (u.cos(), u.sin()),
    }
}

/// A height function `P` together with its first three derivatives.
#[derive(Clone, Debug, PartialEq)]
pub enum Profile {
    /// Coefficients in increasing degree.
    Polynomial(Vec<f64>),
    /// `amplitude * sin(frequency * t)`.
    Sine { amplitude: f64, frequency: f64 },
}

impl Profile {
    pub fn zero() -> Self {
        Profile::Polynomial(Vec::new())
    }

    /// The `order`-th derivative at `t`.
    pub fn derivative(&self, order: u32, t: f64) -> f64 {
        match self {
            Profile::Polynomial(c) => {
                let mut acc = 0.0;
                for (k, &ck) in c.iter().enumerate().skip(order as usize).rev() {
                    let falling: f64 = (0..order).map(|j| (k as u32 - j) as f64).product();
                    acc = acc * t + ck * falling;
                }
                acc
            }
            Profile::Sine { amplitude, frequency } => {
                let phase = f64::from(order) * FRAC_PI_2;
                amplitude * frequency.powi(order as i32) * (frequency * t + phase).sin()
            }
        }
    }

    pub fn value(&self, t: f64) -> f64 {
        self.derivative(0, t)
    }
}

impl FromStr for Profile {
    type Err = Error;

    /// `poly:c0,c1,...` or `sine:amplitude,frequency`.
    fn from_str(s: &str) -> Result<Self> {
        let bad = || Error::InvalidParameter(format!("cannot parse profile {s:?}"));
        let (kind, rest) = s.split_once(':').ok_or_else(bad)?;
        let nums: Vec<f64> = rest
            .split(',')
            .filter(|t| !t.trim().is_empty())
            .map(|t| t.trim().parse::<f64>())
            .collect::<std::result::Result<_, _>>()
            .map_err(|_| bad())?;
        match kind {
            "poly" => Ok(Profile::Polynomial(nums)),
            "sine" if nums.len() == 2 => Ok(Profile::Sine {
                amplitude: nums[0],
                frequency: nums[1],
            }),
            _ => Err(bad()),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum SmoothExample {
    Circle,
    Square,
    Genus1,
    Graph { p: Profile, r: Profile },
}

#[derive(Clone, Debug, PartialEq)]
pub enum DiscreteExample {
    Circle { q1: f64, q2: f64 },
    Square { n1: u32, n2: u32 },
    Genus1 { n: u32 },
    Graph { p: Profile, r: Profile },
}

impl fmt::Display for SmoothExample {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SmoothExample::Circle => f.write_str("smooth circle"),
            SmoothExample::Square => f.write_str("smooth square"),
            SmoothExample::Genus1 => f.write_str("smooth compact genus-one curve"),
            SmoothExample::Graph { p, r } => write!(f, "smooth graph P = {p:?}, R = {r:?}"),
        }
    }
}

impl fmt::Display for DiscreteExample {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            DiscreteExample::Circle { q1, q2 } => write!(f, "discrete circle q1 = {q1}, q2 = {q2}"),
            DiscreteExample::Square { n1, n2 } => write!(f, "discrete square N1 = {n1}, N2 = {n2}"),
            DiscreteExample::Genus1 { n } => write!(f, "discrete compact genus-one curve N = {n}"),
            DiscreteExample::Graph { p, r } => write!(f, "discrete graph P = {p:?}, R = {r:?}"),
        }
    }
}

/// The curves an example is built from, in the form the generic builders take.
#[derive(Clone, Debug)]
pub enum ExampleCurves {
    Smooth {
        g1: SmoothCurveSampler,
        g2: SmoothCurveSampler,
        ugrid: UniformGrid,
        vgrid: UniformGrid,
    },
    Discrete { g1: DiscreteCurve, g2: DiscreteCurve },
}

#[derive(Clone, Debug)]
pub struct ExampleBundle {
    /// Closed-form surface.
    pub surface: LatticeSurface,
    /// Closed-form `omega`, `A`, `B`.
    pub data: SurfaceData,
    /// Closed-form singular set on the window.
    pub singular: SiteMap<bool>,
    /// Closed-form `omega` equals `orientation * det[...]` of the curve
    /// builder.
    pub orientation: f64,
    /// Builder height minus closed-form height.
    pub height_offset: f64,
    pub curves: ExampleCurves,
    pub provenance: String,
}

fn some_map(w: LatticeWindow, f: impl Fn(i64, i64) -> f64) -> SiteMap<Option<f64>> {
    SiteMap::from_fn(w, |n, m| Some(f(n, m)))
}

fn grid_window(ugrid: &UniformGrid, vgrid: &UniformGrid) -> Result<LatticeWindow> {
    LatticeWindow::new(ugrid.lo, ugrid.hi, vgrid.lo, vgrid.hi)
}

/// Closed forms for a smooth example sampled on `ugrid x vgrid`.
pub fn smooth_example(example: &SmoothExample, ugrid: &UniformGrid, vgrid: &UniformGrid) -> Result<ExampleBundle> {
    let w = grid_window(ugrid, vgrid)?;
    let (u, v) = (|i: i64| ugrid.point(i), |j: i64| vgrid.point(j));
    let (g, position, omega, a, b, singular, orientation, offset): (
        SmoothCurveSampler,
        Option<SmoothCurveSampler>,
        Box<dyn Fn(f64, f64) -> f64>,
        Box<dyn Fn(f64) -> f64>,
        Box<dyn Fn(f64) -> f64>,
        Box<dyn Fn(f64, f64) -> bool>,
        f64,
        f64,
    );
    let point: Box<dyn Fn(f64, f64) -> Point3>;
    match example {
        SmoothExample::Circle => {
            g = SmoothCurveSampler::new(
                |t| Point2::new(t.cos(), t.sin()),
                |t| Point2::new(-t.sin(), t.cos()),
                |t| Point2::new(-t.cos(), -t.sin()),
            );
            position = None;
            point = Box::new(|u, v| {
                Point3::new(u.cos() + v.cos(), u.sin() + v.sin(), u - v - (u - v).sin())
            });
            omega = Box::new(|u, v| (u - v).sin());
            a = Box::new(|_| 1.0);
            b = Box::new(|_| -1.0);
            singular = Box::new(|u, v| near_multiple(u - v, PI, SNAP_TOL));
            orientation = -1.0;
            offset = 0.0;
        }
        SmoothExample::Square => {
            g = SmoothCurveSampler::new(
                |t| {
                    let (c, s) = exact_cos_sin(t);
                    Point2::new(c.abs() * c, s.abs() * s)
                },
                |t| {
                    let (c, s) = exact_cos_sin(t);
                    if quarter_turn(t).is_some() {
                        return Point2::zeros();
                    }
                    Point2::new(-c.abs() * s, s.abs() * c) * 2.0
                },
                |t| {
                    let (c, s) = exact_cos_sin(t);
                    Point2::new(-sign(c), sign(s)) * (2.0 * (2.0 * t).cos())
                },
            );
            position = None;
            let area = |t: f64| -> f64 {
                // int_0^t |sin 2k| dk
                let (ceil, sgn) = match quarter_turn(t) {
                    Some(k) => (k as f64, 0.0),
                    None => ((2.0 * t / PI).ceil(), sign((2.0 * t).sin())),
                };
                ceil - sgn / 2.0 * ((2.0 * t).cos() + sgn)
            };
            point = Box::new(move |u, v| {
                let ((cu, su), (cv, sv)) = (exact_cos_sin(u), exact_cos_sin(v));
                Point3::new(
                    cu.abs() * cu + cv.abs() * cv,
                    su.abs() * su + sv.abs() * sv,
                    (cu * sv).abs() * cu * sv - (cv * su).abs() * cv * su + area(u) - area(v),
                )
            });
            omega = Box::new(|u, v| {
                let ((cu, su), (cv, sv)) = (exact_cos_sin(u), exact_cos_sin(v));
                4.0 * (-(cu * sv).abs() * cv * su + (cv * su).abs() * cu * sv)
            });
            a = Box::new(|_| 0.0);
            b = Box::new(|_| 0.0);
            singular = Box::new(|u, v| match (quarter_turn(u), quarter_turn(v)) {
                (None, None) => {
                    ((2.0 * u / PI).ceil() as i64 - (2.0 * v / PI).ceil() as i64).rem_euclid(2) == 0
                }
                _ => true,
            });
            orientation = 1.0;
            offset = 0.0;
        }
        SmoothExample::Genus1 => {
            g = SmoothCurveSampler::new(
                |t| Point2::new(t.cos() * (0.5 + t.cos().powi(2)), (2.0 * t).sin()),
                |t| {
                    let (c, s) = (t.cos(), t.sin());
                    Point2::new(-0.5 * s - 3.0 * c * c * s, 2.0 * (2.0 * t).cos())
                },
                |t| {
                    let (c, s) = (t.cos(), t.sin());
                    Point2::new(-0.5 * c - 3.0 * (c.powi(3) - 2.0 * c * s * s), -4.0 * (2.0 * t).sin())
                },
            );
            position = None;
            point = Box::new(|u, v| {
                let (su, sv) = (u.sin(), v.sin());
                let z = -u.cos() * v.cos() * (su - sv) * (3.0 + 2.0 * su * sv)
                    + 2.5 * (su - sv)
                    + 5.0 / 24.0 * ((3.0 * u).sin() - (3.0 * v).sin())
                    - 1.0 / 40.0 * ((5.0 * u).sin() - (5.0 * v).sin());
                Point3::new(
                    (1.0 + 0.5 * (2.0 * u).cos()) * u.cos() + (1.0 + 0.5 * (2.0 * v).cos()) * v.cos(),
                    (2.0 * u).sin() + (2.0 * v).sin(),
                    z,
                )
            });
            omega = Box::new(|u, v| {
                -(u.sin() - v.sin()) * (4.0 + 8.0 * u.sin() * v.sin() + 3.0 * (2.0 * u).cos() * (2.0 * v).cos())
            });
            let data = |t: f64| 0.5 * (19.0 - 8.0 * (2.0 * t).cos() + 3.0 * (4.0 * t).cos()) * t.cos();
            a = Box::new(data);
            b = Box::new(move |t| -data(t));
            singular = Box::new(|u, v| {
                near_multiple(v - u, 2.0 * PI, SNAP_TOL)
                    || near_multiple(v + u - PI, 2.0 * PI, SNAP_TOL)
                    || (4.0 + 8.0 * u.sin() * v.sin() + 3.0 * (2.0 * u).cos() * (2.0 * v).cos()).abs() <= SNAP_TOL
            });
            orientation = 1.0;
            offset = 0.0;
        }
        SmoothExample::Graph { p, r } => {
            let (p1, p2, p3) = (p.clone(), p.clone(), p.clone());
            g = SmoothCurveSampler::new(
                move |t| Point2::new(t, p1.derivative(1, t)),
                move |t| Point2::new(1.0, p2.derivative(2, t)),
                move |t| Point2::new(0.0, p3.derivative(3, t)),
            );
            let (r1, r2, r3) = (r.clone(), r.clone(), r.clone());
            position = Some(SmoothCurveSampler::new(
                move |t| Point2::new(r1.derivative(1, t), t),
                move |t| Point2::new(r2.derivative(2, t), 1.0),
                move |t| Point2::new(r3.derivative(3, t), 0.0),
            ));
            let (pp, rr) = (p.clone(), r.clone());
            point = Box::new(move |u, v| {
                let (dp, dr) = (pp.derivative(1, u), rr.derivative(1, v));
                let (x, y) = (u + dr, v + dp);
                Point3::new(x, y, x * y - 2.0 * (pp.value(u) + rr.value(v) + dp * dr))
            });
            let (pp, rr) = (p.clone(), r.clone());
            omega = Box::new(move |u, v| 1.0 - pp.derivative(2, u) * rr.derivative(2, v));
            let (pp, rr) = (p.clone(), r.clone());
            a = Box::new(move |t| pp.derivative(3, t));
            b = Box::new(move |t| rr.derivative(3, t));
            let (pp, rr) = (p.clone(), r.clone());
            singular = Box::new(move |u, v| (1.0 - pp.derivative(2, u) * rr.derivative(2, v)).abs() <= SNAP_TOL);
            orientation = 1.0;
            offset = 2.0 * (p.value(0.0) + r.value(0.0));
        }
    }
    let g2 = position.unwrap_or_else(|| g.clone());
    let points = SiteMap::from_fn(w, |i, j| point(u(i), v(j)));
    let surface = LatticeSurface::new(ugrid.step, vgrid.step, SphereKind::Improper, points)?;
    let data = SurfaceData::new(
        ugrid.step,
        vgrid.step,
        SphereKind::Improper,
        some_map(w, |i, j| omega(u(i), v(j))),
        some_map(w, |i, _| a(u(i))),
        some_map(w, |_, j| b(v(j))),
    )?;
    Ok(ExampleBundle {
        surface,
        data,
        singular: SiteMap::from_fn(w, |i, j| singular(u(i), v(j))),
        orientation,
        height_offset: offset,
        curves: ExampleCurves::Smooth {
            g1: g,
            g2,
            ugrid: *ugrid,
            vgrid: *vgrid,
        },
        provenance: example.to_string(),
    })
}

/// `(2 / eps) arctan(eps q / 2)`.
pub fn discrete_angle(eps: f64, q: f64) -> f64 {
    2.0 / eps * (eps * q / 2.0).atan()
}

fn genus1_coefficients(t: f64) -> [f64; 3] {
    [
        (3.0 + 6.0 * t.cos() + (2.0 * t).cos()) / 4.0,
        5.0 / (8.0 * (1.0 + 2.0 * t.cos())),
        -1.0 / (8.0 * (1.0 + 2.0 * t.cos() + 2.0 * (2.0 * t).cos())),
    ]
}

fn genus1_data_coefficients(t: f64) -> [f64; 3] {
    [
        7.0 + 9.0 * (2.0 * t).cos() + 2.0 * (4.0 * t).cos() + (6.0 * t).cos(),
        -6.0 - 2.0 * (2.0 * t).cos(),
        1.0 + 2.0 * (2.0 * t).cos(),
    ]
}

fn genus1_curve_point(angle: f64) -> Point2 {
    Point2::new(angle.cos() * (0.5 + angle.cos().powi(2)), angle.cos() * 2.0 * angle.sin())
}

/// `W^m_n` of the genus-one example with `theta eps = theta delta = pi / N`.
pub fn genus1_w(n_param: u32, n: i64, m: i64) -> f64 {
    let t = PI / f64::from(n_param);
    let (hn, hm) = (t * (2 * n + 1) as f64 / 2.0, t * (2 * m + 1) as f64 / 2.0);
    (3.0 + t.cos()) * (1.0 + 2.0 * hn.sin() * hm.sin()) + (1.0 + 2.0 * t.cos()) * (2.0 * hn).cos() * (2.0 * hm).cos()
}

/// Factorised `omega` of the genus-one example with `theta eps = theta delta = pi / N`.
pub fn genus1_factored_omega(n_param: u32, eps: f64, delta: f64, n: i64, m: i64) -> f64 {
    let t = PI / f64::from(n_param);
    let (hn, hm) = (t * (2 * n + 1) as f64 / 2.0, t * (2 * m + 1) as f64 / 2.0);
    -4.0 / (eps * delta) * (t / 2.0).sin().powi(2) * (t / 2.0).cos() * (hn.sin() - hm.sin()) * genus1_w(n_param, n, m)
}

/// Closed forms for a discrete example on `window`.
pub fn discrete_example(example: &DiscreteExample, eps: f64, delta: f64, window: LatticeWindow) -> Result<ExampleBundle> {
    if !(eps > 0.0 && delta > 0.0 && eps.is_finite() && delta.is_finite()) {
        return Err(Error::InvalidParameter(format!(
            "eps and delta must be positive, got {eps}, {delta}"
        )));
    }
    let w = window;
    let curve_range = (w.n_min - 1, w.n_max + 1, w.m_min - 1, w.m_max + 1);
    let (g1, g2, orientation, offset);
    let point: Box<dyn Fn(i64, i64) -> Point3>;
    let omega: Box<dyn Fn(i64, i64) -> f64>;
    let a: Box<dyn Fn(i64) -> f64>;
    let b: Box<dyn Fn(i64) -> f64>;
    let singular: Box<dyn Fn(i64, i64) -> bool>;
    match example {
        DiscreteExample::Circle { q1, q2 } => {
            let (q1, q2) = (*q1, *q2);
            if !(q1 > 0.0 && q2 > 0.0) {
                return Err(Error::InvalidParameter(format!("q1, q2 must be positive, got {q1}, {q2}")));
            }
            let (t1, t2) = (discrete_angle(eps, q1) * eps, discrete_angle(delta, q2) * delta);
            let circle = |t: f64| move |k: i64| Point2::new((t * k as f64).cos(), (t * k as f64).sin());
            g1 = DiscreteCurve::from_fn(eps, curve_range.0, curve_range.1, circle(t1))?;
            g2 = DiscreteCurve::from_fn(delta, curve_range.2, curve_range.3, circle(t2))?;
            point = Box::new(move |n, m| {
                let (x, y) = (t1 * n as f64, t2 * m as f64);
                Point3::new(x.cos() + y.cos(), x.sin() + y.sin(), -(x - y).sin() + n as f64 * t1.sin() - m as f64 * t2.sin())
            });
            let amp = 4.0 * q1 * q2 / ((4.0 + eps * eps * q1 * q1).sqrt() * (4.0 + delta * delta * q2 * q2).sqrt());
            omega = Box::new(move |n, m| amp * (t1 / 2.0 * (2 * n + 1) as f64 - t2 / 2.0 * (2 * m + 1) as f64).sin());
            let a_const = 16.0 * q1.powi(3) / (4.0 + eps * eps * q1 * q1).powi(2);
            let b_const = -16.0 * q2.powi(3) / (4.0 + delta * delta * q2 * q2).powi(2);
            a = Box::new(move |_| a_const);
            b = Box::new(move |_| b_const);
            singular = Box::new(move |n, m| {
                near_multiple(t1 * (2 * n + 1) as f64 - t2 * (2 * m + 1) as f64, 2.0 * PI, SNAP_TOL)
            });
            orientation = -1.0;
            offset = 0.0;
        }
        DiscreteExample::Square { n1, n2 } => {
            let (n1, n2) = (*n1, *n2);
            if n1 == 0 || n2 == 0 {
                return Err(Error::InvalidParameter("N1, N2 must be positive integers".into()));
            }
            let (t1, t2) = (PI / (2.0 * f64::from(n1)), PI / (2.0 * f64::from(n2)));
            let square = |t: f64| {
                move |k: i64| {
                    let x = t * k as f64;
                    Point2::new(x.cos().abs() * x.cos(), x.sin().abs() * x.sin())
                }
            };
            g1 = DiscreteCurve::from_fn(eps, curve_range.0, curve_range.1, square(t1))?;
            g2 = DiscreteCurve::from_fn(delta, curve_range.2, curve_range.3, square(t2))?;
            let (nf1, nf2) = (i64::from(n1), i64::from(n2));
            let parity = |k: i64| if k.rem_euclid(2) == 0 { 1.0 } else { -1.0 };
            point = Box::new(move |n, m| {
                let (x, y) = (t1 * n as f64, t2 * m as f64);
                let (fn_, fm) = (n.div_euclid(nf1), m.div_euclid(nf2));
                let z = (x.cos() * y.sin()).abs() * x.cos() * y.sin() - (x.sin() * y.cos()).abs() * x.sin() * y.cos()
                    + fn_ as f64
                    - fm as f64
                    - 0.5 * (parity(fn_) * (2.0 * x).cos() - parity(fm) * (2.0 * y).cos());
                Point3::new(
                    x.cos().abs() * x.cos() + y.cos().abs() * y.cos(),
                    x.sin().abs() * x.sin() + y.sin().abs() * y.sin(),
                    z,
                )
            });
            omega = Box::new(move |n, m| square_omega(n1, n2, eps, delta, n, m));
            let a_val = 2.0 / eps.powi(3) * t1.sin().powi(4);
            let b_val = -2.0 / delta.powi(3) * t2.sin().powi(4);
            a = Box::new(move |n| if n.rem_euclid(nf1) == 0 { a_val } else { 0.0 });
            b = Box::new(move |m| if m.rem_euclid(nf2) == 0 { b_val } else { 0.0 });
            singular = Box::new(move |n, m| (n.div_euclid(nf1) - m.div_euclid(nf2)).rem_euclid(2) == 0);
            orientation = -1.0;
            offset = 0.0;
        }
        DiscreteExample::Genus1 { n } => {
            let np = *n;
            if np == 0 {
                return Err(Error::InvalidParameter("N must be a positive integer".into()));
            }
            let t = PI / f64::from(np);
            let curve = move |k: i64| genus1_curve_point(t * k as f64);
            g1 = DiscreteCurve::from_fn(eps, curve_range.0, curve_range.1, curve)?;
            g2 = DiscreteCurve::from_fn(delta, curve_range.2, curve_range.3, curve)?;
            let c = genus1_coefficients(t);
            point = Box::new(move |n, m| {
                let (x, y) = (t * n as f64, t * m as f64);
                let z = -x.cos() * y.cos() * (x.sin() - y.sin()) * (3.0 + 2.0 * x.sin() * y.sin())
                    + c[0] * (x.sin() - y.sin())
                    + c[1] * ((3.0 * x).sin() - (3.0 * y).sin())
                    + c[2] * ((5.0 * x).sin() - (5.0 * y).sin());
                Point3::new(
                    (1.0 + 0.5 * (2.0 * x).cos()) * x.cos() + (1.0 + 0.5 * (2.0 * y).cos()) * y.cos(),
                    (2.0 * x).sin() + (2.0 * y).sin(),
                    z,
                )
            });
            omega = Box::new(move |n, m| genus1_omega(t, t, eps, delta, n, m));
            let ac = genus1_data_coefficients(t / 2.0);
            let data = move |k: i64, step: f64| {
                let x = t * k as f64;
                4.0 / step.powi(3)
                    * (t / 2.0).sin().powi(3)
                    * (t / 2.0).cos()
                    * (ac[0] + ac[1] * (2.0 * x).cos() + ac[2] * (4.0 * x).cos())
                    * x.cos()
            };
            a = Box::new(move |n| data(n, eps));
            b = Box::new(move |m| -data(m, delta));
            let period = 2 * i64::from(np);
            singular = Box::new(move |n, m| {
                (m - n).rem_euclid(period) == 0
                    || (m + n - i64::from(np) + 1).rem_euclid(period) == 0
                    || genus1_w(np, n, m).abs() <= SNAP_TOL
            });
            orientation = 1.0;
            offset = 0.0;
        }
        DiscreteExample::Graph { p, r } => {
            let seqs = Rc::new(GraphSequences { p: p.clone(), r: r.clone(), eps, delta });
            let s = seqs.clone();
            g1 = DiscreteCurve::from_fn(eps, curve_range.0, curve_range.1, |k| Point2::new(eps * k as f64, s.dp(k)))?;
            g2 = DiscreteCurve::from_fn(delta, curve_range.2, curve_range.3, |k| Point2::new(s.dr(k), delta * k as f64))?;
            point = Box::new(move |n, m| {
                let (x, y) = (eps * n as f64 + s.dr(m), delta * m as f64 + s.dp(n));
                Point3::new(x, y, x * y - 2.0 * s.dp(n) * s.dr(m) - s.p(n + 1) - s.p(n) - s.r(m + 1) - s.r(m))
            });
            let s = seqs.clone();
            omega = Box::new(move |n, m| s.omega(n, m));
            let s = seqs.clone();
            a = Box::new(move |n| (s.p(n + 2) - 3.0 * s.p(n + 1) + 3.0 * s.p(n) - s.p(n - 1)) / eps.powi(3));
            let s = seqs.clone();
            b = Box::new(move |m| (s.r(m + 2) - 3.0 * s.r(m + 1) + 3.0 * s.r(m) - s.r(m - 1)) / delta.powi(3));
            let s = seqs.clone();
            singular = Box::new(move |n, m| s.omega(n, m).abs() <= SNAP_TOL);
            orientation = 1.0;
            offset = seqs.p(0) + seqs.p(1) + seqs.r(0) + seqs.r(1);
        }
    }
    let surface = LatticeSurface::new(eps, delta, SphereKind::Improper, SiteMap::from_fn(w, point))?;
    let data = SurfaceData::new(
        eps,
        delta,
        SphereKind::Improper,
        some_map(w, omega),
        some_map(w, |n, _| a(n)),
        some_map(w, |_, m| b(m)),
    )?;
    Ok(ExampleBundle {
        surface,
        data,
        singular: SiteMap::from_fn(w, singular),
        orientation,
        height_offset: offset,
        curves: ExampleCurves::Discrete { g1, g2 },
        provenance: example.to_string(),
    })
}

/// `P_n = P(eps n)`, `R_m = R(delta m)` and their differences.
struct GraphSequences {
    p: Profile,
    r: Profile,
    eps: f64,
    delta: f64,
}

impl GraphSequences {
    fn p(&self, k: i64) -> f64 {
        self.p.value(self.eps * k as f64)
    }

    fn r(&self, k: i64) -> f64 {
        self.r.value(self.delta * k as f64)
    }

    fn dp(&self, k: i64) -> f64 {
        (self.p(k + 1) - self.p(k)) / self.eps
    }

    fn dr(&self, k: i64) -> f64 {
        (self.r(k + 1) - self.r(k)) / self.delta
    }

    fn omega(&self, n: i64, m: i64) -> f64 {
        let second_p = self.p(n + 2) - 2.0 * self.p(n + 1) + self.p(n);
        let second_r = self.r(m + 2) - 2.0 * self.r(m + 1) + self.r(m);
        1.0 - second_p * second_r / (self.eps * self.eps * self.delta * self.delta)
    }
}

/// `omega` of the discrete square in absolute-value form.
pub fn square_omega(n1: u32, n2: u32, eps: f64, delta: f64, n: i64, m: i64) -> f64 {
    let (s1, s2) = ((PI / (2.0 * f64::from(n1))).sin(), (PI / (2.0 * f64::from(n2))).sin());
    let x = (2 * n + 1) as f64 * PI / (4.0 * f64::from(n1));
    let y = (2 * m + 1) as f64 * PI / (4.0 * f64::from(n2));
    4.0 / (eps * delta)
        * s1
        * s2
        * ((x.cos() * y.sin()).abs() * x.sin() * y.cos() - x.cos() * y.sin() * (x.sin() * y.cos()).abs())
}

/// `omega` of the discrete square in case form: 0 on the singular set.
pub fn square_omega_cases(n1: u32, n2: u32, eps: f64, delta: f64, n: i64, m: i64) -> f64 {
    let (nf1, nf2) = (i64::from(n1), i64::from(n2));
    if (n.div_euclid(nf1) - m.div_euclid(nf2)).rem_euclid(2) == 0 {
        return 0.0;
    }
    let (h1, h2) = (PI / (2.0 * f64::from(n1)), PI / (2.0 * f64::from(n2)));
    2.0 / (eps * delta) * h1.sin() * h2.sin() * ((2 * n + 1) as f64 * h1).sin() * ((2 * m + 1) as f64 * h2).sin()
}

/// General `omega` of the genus-one example for `t1 = theta_1 eps`,
/// `t2 = theta_2 delta`.
pub fn genus1_omega(t1: f64, t2: f64, eps: f64, delta: f64, n: i64, m: i64) -> f64 {
    let (hn, hm) = (t1 * (2 * n + 1) as f64 / 2.0, t2 * (2 * m + 1) as f64 / 2.0);
    let d1 = (3.0 + t1.cos()) / 4.0 * (t2 / 2.0).cos() * hn.sin() - (3.0 + t2.cos()) / 4.0 * (t1 / 2.0).cos() * hm.sin();
    let d2 = (3.0 + t2.cos()) / 4.0 * (t1 / 2.0).cos() * hn.sin() - (3.0 + t1.cos()) / 4.0 * (t2 / 2.0).cos() * hm.sin();
    let d3 = (1.0 + 2.0 * t1.cos()) / 3.0 * (t2 / 2.0).cos() * hn.sin()
        - (1.0 + 2.0 * t2.cos()) / 3.0 * (t1 / 2.0).cos() * hm.sin();
    -4.0 / (eps * delta)
        * (t1 / 2.0).sin()
        * (t2 / 2.0).sin()
        * (4.0 * d1 + 8.0 * d2 * hn.sin() * hm.sin() + 3.0 * d3 * (2.0 * hn).cos() * (2.0 * hm).cos())
}

fn singular_agreement(bundle: &ExampleBundle, built: &SurfaceData) -> CheckEntry {
    let mut entry = CheckEntry {
        name: "singular-set".into(),
        residual: 0.0,
        worst_site: None,
        tolerance: 0.0,
        pass: true,
        flagged: Vec::new(),
        note: String::new(),
    };
    for ((n, m), &predicted) in bundle.singular.iter() {
        if built.omega_at(n, m).is_some() && predicted != built.is_singular(n, m) {
            entry.residual += 1.0;
            entry.flagged.push((n, m));
            entry.worst_site.get_or_insert((n, m));
        }
    }
    let singular_count = bundle.singular.values().iter().filter(|&&s| s).count();
    entry.note = format!("{singular_count} singular sites; residual counts disagreements");
    entry.pass = entry.residual == 0.0;
    entry
}

/// Rebuilds the example with the generic curve builder and compares points,
/// data and singular set against the closed forms. Discrete examples also
/// run the full verification suite on the closed-form surface.
pub fn cross_check(bundle: &ExampleBundle) -> Result<VerificationReport> {
    let tol = Tolerances::default();
    let (built_surface, built_data) = match &bundle.curves {
        ExampleCurves::Smooth { g1, g2, ugrid, vgrid } => build_smooth_from_curves(g1, g2, ugrid, vgrid)?,
        ExampleCurves::Discrete { g1, g2 } => build_discrete_from_curves(g1, g2, bundle.surface.window())?,
    };
    let mut report = VerificationReport::default();

    let mut points = CheckEntry {
        name: "example-points".into(),
        residual: 0.0,
        worst_site: None,
        tolerance: 1e-9,
        pass: true,
        flagged: Vec::new(),
        note: format!("height offset {:.17e}", bundle.height_offset),
    };
    for ((n, m), p) in bundle.surface.points().iter() {
        let expected = p + Point3::new(0.0, 0.0, bundle.height_offset);
        let d = (built_surface.point(n, m)? - expected).norm();
        if points.worst_site.is_none() || d > points.residual {
            points.residual = d;
            points.worst_site = Some((n, m));
        }
    }
    points.pass = points.residual <= points.tolerance;
    report.push(points);

    let oriented = built_data.omega.map(|w| w.map(|w| w * bundle.orientation));
    let skip = |n, m| built_data.is_singular(n, m);
    report.push(compare_field("example-omega", &oriented, &bundle.data.omega, skip, tol.data_agreement));
    report.push(compare_field("example-A", &built_data.a, &bundle.data.a, skip, tol.data_agreement));
    report.push(compare_field("example-B", &built_data.b, &bundle.data.b, skip, tol.data_agreement));
    report.push(singular_agreement(bundle, &built_data));

    if let ExampleCurves::Discrete { .. } = bundle.curves {
        let (suite, extracted) = verify_surface(&bundle.surface, &tol, &[1.0, 2.0])?;
        report.extend(suite.entries);
        report.extend(check_builder_data(&built_data, &extracted.data, tol.data_agreement));
    }
    Ok(report)
}

/// Height `z^m_n` of the one-curve surface and the signed shoelace area of
/// the closed polygon `gamma_m, ..., gamma_n`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ShoelaceComparison {
    pub z: f64,
    pub area: f64,
}

impl ShoelaceComparison {
    /// `z / area`, or `None` for a degenerate polygon.
    pub fn ratio(&self) -> Option<f64> {
        (self.area.abs() > 1e-14).then(|| self.z / self.area)
    }
}

pub fn shoelace_area_check(gamma: &DiscreteCurve, n: i64, m: i64) -> Result<ShoelaceComparison> {
    let gn = gamma.point(n)?;
    let gm = gamma.point(m)?;
    let chord = |k: i64| -> Result<f64> { Ok(det2(&gamma.point(k - 1)?, &gamma.point(k)?)) };
    let sum_to = |end: i64| crate::lattice::signed_sum(chord, end);
    let z = det2(&gn, &gm) + sum_to(n)? - sum_to(m)?;

    let step = if n >= m { 1 } else { -1 };
    let mut twice_area = 0.0;
    let mut k = m;
    while k != n {
        twice_area += det2(&gamma.point(k)?, &gamma.point(k + step)?);
        k += step;
    }
    twice_area += det2(&gn, &gm);
    Ok(ShoelaceComparison { z, area: twice_area / 2.0 })
}

/// Parses `circle`, `square`, `genus1`, `graph` with the given parameters.
pub fn parse_example_name(name: &str) -> Result<(bool, &str)> {
    let (smooth, base) = match name.split_once('-') {
        Some(("smooth", b)) => (true, b),
        Some(("discrete", b)) => (false, b),
        _ => return Err(Error::UnknownExample(name.to_string())),
    };
    match base {
        "circle" | "square" | "genus1" | "graph" => Ok((smooth, base)),
        _ => Err(Error::UnknownExample(name.to_string())),
    }
}
