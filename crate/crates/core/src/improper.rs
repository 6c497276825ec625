//! Improper (`H = 0`) indefinite affine spheres: discrete and sampled smooth
//! surfaces from pairs of plane curves or from normalized potentials, and
//! the general solutions of the Liouville equations.

use serde::{Deserialize, Serialize};

use crate::birkhoff::BIG_CELL_TOL;
use crate::error::{Error, Result};
use crate::lattice::{
    det2, signed_sum, DiscreteCurve, LatticeSurface, LatticeWindow, Point2, Point3, ScalarFn,
    Sequence, SiteMap, SmoothCurveSampler, SphereKind, SurfaceData,
};
use crate::quadrature::{cumulative_integral, Antiderivative, UniformGrid};

/// Normalized potentials `alpha, beta` (in `n`) and `rho, sigma` (in `m`).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PotentialData {
    pub alpha: Sequence,
    pub beta: Sequence,
    pub rho: Sequence,
    pub sigma: Sequence,
    pub eps: f64,
    pub delta: f64,
    pub kind: SphereKind,
}

impl PotentialData {
    /// Validates ranges and the nonvanishing of `alpha` and `rho`.
    ///
    /// `alpha`/`beta` must share an index range, as must `rho`/`sigma`, and
    /// each range must reach the origin (`start <= 1`, `end >= 0`).
    pub fn new(
        alpha: Sequence,
        beta: Sequence,
        rho: Sequence,
        sigma: Sequence,
        eps: f64,
        delta: f64,
        kind: SphereKind,
    ) -> Result<Self> {
        for (name, v) in [("eps", eps), ("delta", delta)] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::InvalidParameter(format!(
                    "{name} must be positive, got {v}"
                )));
            }
        }
        for (name, x, y) in [("alpha/beta", &alpha, &beta), ("rho/sigma", &rho, &sigma)] {
            if x.start() != y.start() || x.end() != y.end() {
                return Err(Error::InvalidParameter(format!(
                    "{name} must share an index range"
                )));
            }
            if x.start() > 1 || x.end() < 0 {
                return Err(Error::InvalidParameter(format!(
                    "{name} range {}..={} must reach the origin",
                    x.start(),
                    x.end()
                )));
            }
        }
        for seq in [&alpha, &rho] {
            if let Some((k, _)) = seq.iter().find(|&(_, v)| v == 0.0 || !v.is_finite()) {
                return Err(Error::ZeroPotential { index: k });
            }
        }
        Ok(Self {
            alpha,
            beta,
            rho,
            sigma,
            eps,
            delta,
            kind,
        })
    }

    /// Constant potentials on `n_range` and `m_range`.
    #[allow(clippy::too_many_arguments)]
    pub fn constant(
        (alpha, beta, rho, sigma): (f64, f64, f64, f64),
        n_range: (i64, i64),
        m_range: (i64, i64),
        eps: f64,
        delta: f64,
        kind: SphereKind,
    ) -> Result<Self> {
        let (n0, n1) = n_range;
        let (m0, m1) = m_range;
        Self::new(
            Sequence::constant(n0, n1, alpha),
            Sequence::constant(n0, n1, beta),
            Sequence::constant(m0, m1, rho),
            Sequence::constant(m0, m1, sigma),
            eps,
            delta,
            kind,
        )
    }

    /// Sites whose data (`alpha_{n+1}`, `rho_{m+1}`, ...) the potentials cover.
    pub fn supported_window(&self) -> Result<LatticeWindow> {
        LatticeWindow::new(
            self.alpha.start(),
            self.alpha.end() - 1,
            self.rho.start(),
            self.rho.end() - 1,
        )
    }
}

/// Accumulated sums of the potentials; all vanish at index 0.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AbcRst {
    pub a: Sequence,
    pub b: Sequence,
    pub c: Sequence,
    pub r: Sequence,
    pub s: Sequence,
    pub t: Sequence,
    /// Spectral parameter the representation is evaluated at.
    pub lambda: f64,
}

fn scaled(seq: Sequence, k: f64) -> Sequence {
    Sequence::new(seq.start(), seq.values().iter().map(|v| k * v).collect())
}

fn product(x: &Sequence, y: &Sequence) -> Result<Sequence> {
    let lo = x.start().max(y.start());
    let hi = x.end().min(y.end());
    let values = (lo..=hi)
        .map(|k| Ok(x.get(k)? * y.get(k)?))
        .collect::<Result<Vec<_>>>()?;
    Ok(Sequence::new(lo, values))
}

/// `(a, b, c)` from `(alpha, beta)` with step `h`.
fn accumulate_pair(alpha: &Sequence, beta: &Sequence, h: f64) -> Result<(Sequence, Sequence, Sequence)> {
    let a = scaled(alpha.partial_sums()?, h);
    let b = scaled(beta.partial_sums()?, h);
    let c = scaled(product(&a, beta)?.partial_sums()?, h);
    Ok((a, b, c))
}

/// `a_n = eps sum^n alpha`, `b_n = eps sum^n beta`, `c_n = eps sum^n a_k beta_k`
/// and likewise `r, s, t` with `delta, rho, sigma`.
pub fn accumulate(p: &PotentialData) -> Result<AbcRst> {
    let (a, b, c) = accumulate_pair(&p.alpha, &p.beta, p.eps)?;
    let (r, s, t) = accumulate_pair(&p.rho, &p.sigma, p.delta)?;
    Ok(AbcRst {
        a,
        b,
        c,
        r,
        s,
        t,
        lambda: 1.0,
    })
}

fn check_lambda(lambda: f64) -> Result<()> {
    if lambda == 0.0 || !lambda.is_finite() {
        return Err(Error::Domain(format!("lambda must be nonzero, got {lambda}")));
    }
    Ok(())
}

pub(crate) fn require_window(supported: LatticeWindow, window: LatticeWindow) -> Result<()> {
    let missing = [
        (window.n_min < supported.n_min, window.n_min),
        (window.n_max > supported.n_max, window.n_max),
        (window.m_min < supported.m_min, window.m_min),
        (window.m_max > supported.m_max, window.m_max),
    ];
    match missing.iter().find(|(bad, _)| *bad) {
        Some(&(_, index)) => Err(Error::IndexOutOfRange { index }),
        None => Ok(()),
    }
}

/// Point of the representation formula from accumulated values.
#[allow(clippy::too_many_arguments)]
fn represent(
    lambda: f64,
    (a, b, c): (f64, f64, f64),
    (r, s, t): (f64, f64, f64),
    height_u: f64,
    height_v: f64,
) -> Point3 {
    let l = lambda;
    let ab_c = a * b - c;
    let rs_t = r * s - t;
    Point3::new(
        l * a + rs_t / (l * l),
        l * l * ab_c + r / l,
        a * r - ab_c * rs_t + l.powi(3) * height_u + height_v / l.powi(3),
    )
}

/// Discrete improper affine sphere of the representation formula at
/// spectral parameter `lambda`.
///
/// The returned data carries `A` scaled by `lambda^3` and `B` by
/// `lambda^-3`, which is the data of the returned surface.
pub fn build_discrete_from_potentials(
    p: &PotentialData,
    lambda: f64,
    window: LatticeWindow,
) -> Result<(LatticeSurface, SurfaceData)> {
    if p.kind != SphereKind::Improper {
        return Err(Error::InvalidParameter(
            "representation formula requires H = 0".into(),
        ));
    }
    check_lambda(lambda)?;
    require_window(p.supported_window()?, window)?;
    let acc = accumulate(p)?;
    // eps sum^n alpha_k c_{k-1}, delta sum^m rho_k t_{k-1}
    let tail = |x: &Sequence, y: &Sequence, h: f64| -> Result<Sequence> {
        let terms = Sequence::from_fn(x.start(), x.end(), |k| {
            x.get(k).unwrap_or(0.0) * y.get(k - 1).unwrap_or(0.0)
        });
        Ok(scaled(terms.partial_sums()?, h))
    };
    let hu = tail(&p.alpha, &acc.c, p.eps)?;
    let hv = tail(&p.rho, &acc.t, p.delta)?;

    let point = |n: i64, m: i64| -> Result<Point3> {
        let (b, s) = (acc.b.get(n)?, acc.s.get(m)?);
        if (1.0 - b * s).abs() < BIG_CELL_TOL {
            return Err(Error::OutsideBigCell { b, s }.at_site(n, m));
        }
        Ok(represent(
            lambda,
            (acc.a.get(n)?, b, acc.c.get(n)?),
            (acc.r.get(m)?, s, acc.t.get(m)?),
            hu.get(n)?,
            hv.get(m)?,
        ))
    };
    let points = SiteMap::par_try_from_fn(window, point)?;

    let l3 = lambda.powi(3);
    let omega = SiteMap::try_from_fn(window, |n, m| {
        let k = 1.0 - acc.b.get(n)? * acc.s.get(m)?;
        Ok(Some(k * p.alpha.get(n + 1)? * p.rho.get(m + 1)?))
    })?;
    let a_field = SiteMap::try_from_fn(window, |n, _| {
        Ok(Some(l3 * p.alpha.get(n + 1)? * p.alpha.get(n)? * p.beta.get(n)?))
    })?;
    let b_field = SiteMap::try_from_fn(window, |_, m| {
        Ok(Some(p.rho.get(m + 1)? * p.rho.get(m)? * p.sigma.get(m)? / l3))
    })?;
    let surface = LatticeSurface::new(p.eps, p.delta, SphereKind::Improper, points)?;
    let data = SurfaceData::new(p.eps, p.delta, SphereKind::Improper, omega, a_field, b_field)?;
    Ok((surface, data))
}

/// Prefix sums `sum^n det[g_{k-1}, g_k]` over the curve's range.
fn swept_area(g: &DiscreteCurve) -> Result<Sequence> {
    let terms = (g.start() + 1..=g.end())
        .map(|k| Ok(det2(&g.point(k - 1)?, &g.point(k)?)))
        .collect::<Result<Vec<_>>>()?;
    Sequence::new(g.start() + 1, terms).partial_sums()
}

/// Discrete improper affine sphere `(g1_n + g2_m, z)` of two discrete plane
/// curves; the lattice steps are the curves' steps.
///
/// Both curves must cover the window's index range with one extra index on
/// each side.
pub fn build_discrete_from_curves(
    g1: &DiscreteCurve,
    g2: &DiscreteCurve,
    window: LatticeWindow,
) -> Result<(LatticeSurface, SurfaceData)> {
    let supported = LatticeWindow::new(g1.start() + 1, g1.end() - 1, g2.start() + 1, g2.end() - 1)?;
    require_window(supported, window)?;
    let (eps, delta) = (g1.step(), g2.step());
    let area1 = swept_area(g1)?;
    let area2 = swept_area(g2)?;

    let points = SiteMap::try_from_fn(window, |n, m| {
        let (p, q) = (g1.point(n)?, g2.point(m)?);
        let xy = p + q;
        let z = det2(&p, &q) + area1.get(n)? - area2.get(m)?;
        Ok(Point3::new(xy.x, xy.y, z))
    })?;

    let d1 = |n: i64| g1.forward_difference(n);
    let d2 = |m: i64| g2.forward_difference(m);
    let omega = SiteMap::try_from_fn(window, |n, m| Ok(Some(det2(&d1(n)?, &d2(m)?))))?;
    let a_field = SiteMap::try_from_fn(window, |n, _| {
        Ok(Some(det2(&d1(n)?, &(-d1(n - 1)? / eps))))
    })?;
    let b_field = SiteMap::try_from_fn(window, |_, m| {
        Ok(Some(det2(&(-d2(m - 1)? / delta), &d2(m)?)))
    })?;
    let surface = LatticeSurface::new(eps, delta, SphereKind::Improper, points)?;
    let data = SurfaceData::new(eps, delta, SphereKind::Improper, omega, a_field, b_field)?;
    Ok((surface, data))
}

/// `g1 -> diag(lambda, lambda^2) g1`, `g2 -> diag(lambda^-2, lambda^-1) g2`.
pub fn associated_family(
    g1: &DiscreteCurve,
    g2: &DiscreteCurve,
    lambda: f64,
) -> Result<(DiscreteCurve, DiscreteCurve)> {
    check_lambda(lambda)?;
    let l = lambda;
    Ok((
        g1.map_points(|p| Point2::new(l * p.x, l * l * p.y)),
        g2.map_points(|p| Point2::new(p.x / (l * l), p.y / l)),
    ))
}

fn grid_window(ugrid: &UniformGrid, vgrid: &UniformGrid) -> Result<LatticeWindow> {
    LatticeWindow::new(ugrid.lo, ugrid.hi, vgrid.lo, vgrid.hi)
}

/// Samples the smooth improper affine sphere of two plane curves on the
/// grid product; site `(i, j)` is `(u, v) = (i du, j dv)`.
///
/// Heights are integrated from 0 interval by interval; data comes from the
/// samplers' derivative evaluators.
pub fn build_smooth_from_curves(
    g1: &SmoothCurveSampler,
    g2: &SmoothCurveSampler,
    ugrid: &UniformGrid,
    vgrid: &UniformGrid,
) -> Result<(LatticeSurface, SurfaceData)> {
    let window = grid_window(ugrid, vgrid)?;
    let area1 = cumulative_integral(&|u| det2(&g1.point(u), &g1.velocity(u)), ugrid);
    let area2 = cumulative_integral(&|v| det2(&g2.point(v), &g2.velocity(v)), vgrid);

    let points = SiteMap::try_from_fn(window, |i, j| {
        let (p, q) = (g1.point(ugrid.point(i)), g2.point(vgrid.point(j)));
        let xy = p + q;
        Ok(Point3::new(xy.x, xy.y, det2(&p, &q) + area1.get(i)? - area2.get(j)?))
    })?;
    let omega = SiteMap::from_fn(window, |i, j| {
        Some(det2(&g1.velocity(ugrid.point(i)), &g2.velocity(vgrid.point(j))))
    });
    let a_field = SiteMap::from_fn(window, |i, _| {
        let u = ugrid.point(i);
        Some(det2(&g1.velocity(u), &g1.acceleration(u)))
    });
    let b_field = SiteMap::from_fn(window, |_, j| {
        let v = vgrid.point(j);
        Some(det2(&g2.acceleration(v), &g2.velocity(v)))
    });
    let (eps, delta) = (ugrid.step, vgrid.step);
    let surface = LatticeSurface::new(eps, delta, SphereKind::Improper, points)?;
    let data = SurfaceData::new(eps, delta, SphereKind::Improper, omega, a_field, b_field)?;
    Ok((surface, data))
}

/// Smooth potentials `alpha, beta` in `u` and `rho, sigma` in `v`.
#[derive(Clone)]
pub struct SmoothPotentials {
    pub alpha: ScalarFn,
    pub beta: ScalarFn,
    pub rho: ScalarFn,
    pub sigma: ScalarFn,
}

/// `(a, b, c)` and `int alpha c` as antiderivatives on one grid.
fn smooth_accumulators(
    alpha: &ScalarFn,
    beta: &ScalarFn,
    grid: &UniformGrid,
) -> [Antiderivative; 4] {
    let a = Antiderivative::new(alpha.clone(), *grid);
    let b = Antiderivative::new(beta.clone(), *grid);
    let a_beta = {
        let (a, beta) = (a.clone(), beta.clone());
        std::sync::Arc::new(move |x: f64| a.eval(x) * beta(x)) as ScalarFn
    };
    let c = Antiderivative::new(a_beta, *grid);
    let alpha_c = {
        let (c, alpha) = (c.clone(), alpha.clone());
        std::sync::Arc::new(move |x: f64| alpha(x) * c.eval(x)) as ScalarFn
    };
    let height = Antiderivative::new(alpha_c, *grid);
    [a, b, c, height]
}

/// Samples the smooth representation formula at spectral parameter `lambda`.
pub fn build_smooth_from_potentials(
    pot: &SmoothPotentials,
    lambda: f64,
    ugrid: &UniformGrid,
    vgrid: &UniformGrid,
) -> Result<LatticeSurface> {
    check_lambda(lambda)?;
    let window = grid_window(ugrid, vgrid)?;
    for (name, f, grid) in [("alpha", &pot.alpha, ugrid), ("rho", &pot.rho, vgrid)] {
        if let Some(i) = (grid.lo..=grid.hi).find(|&i| f(grid.point(i)) == 0.0) {
            return Err(Error::Domain(format!(
                "{name} vanishes at {}",
                grid.point(i)
            )));
        }
    }
    let [a, b, c, hu] = smooth_accumulators(&pot.alpha, &pot.beta, ugrid);
    let [r, s, t, hv] = smooth_accumulators(&pot.rho, &pot.sigma, vgrid);
    let node = |f: &Antiderivative, i: i64| f.at_node(i);
    let points = SiteMap::try_from_fn(window, |i, j| {
        let (bi, sj) = (node(&b, i)?, node(&s, j)?);
        if (1.0 - bi * sj).abs() < BIG_CELL_TOL {
            return Err(Error::Domain(format!(
                "outside big cell at (u, v) = ({}, {})",
                ugrid.point(i),
                vgrid.point(j)
            )));
        }
        Ok(represent(
            lambda,
            (node(&a, i)?, bi, node(&c, i)?),
            (node(&r, j)?, sj, node(&t, j)?),
            node(&hu, i)?,
            node(&hv, j)?,
        ))
    })?;
    LatticeSurface::new(ugrid.step, vgrid.step, SphereKind::Improper, points)
}

/// `omega = (int_0^u phi - int_0^v psi) sqrt(-A(u) B(v) / (phi(u) psi(v)))`.
pub fn liouville_solution_smooth(
    a: &ScalarFn,
    b: &ScalarFn,
    phi: &ScalarFn,
    psi: &ScalarFn,
    ugrid: &UniformGrid,
    vgrid: &UniformGrid,
) -> Result<SiteMap<f64>> {
    let window = grid_window(ugrid, vgrid)?;
    let big_phi = cumulative_integral(&**phi, ugrid);
    let big_psi = cumulative_integral(&**psi, vgrid);
    SiteMap::try_from_fn(window, |i, j| {
        let (u, v) = (ugrid.point(i), vgrid.point(j));
        let (ph, ps) = (phi(u), psi(v));
        if ph == 0.0 || ps == 0.0 {
            return Err(Error::Domain(format!("phi or psi vanishes at ({u}, {v})")));
        }
        let radicand = -a(u) * b(v) / (ph * ps);
        if radicand < 0.0 {
            return Err(Error::Domain(format!(
                "negative radicand {radicand:e} at (u, v) = ({u}, {v})"
            )));
        }
        Ok((big_phi.get(i)? - big_psi.get(j)?) * radicand.sqrt())
    })
}

/// The two general solution families of the discrete Liouville equation.
#[derive(Clone, Debug, PartialEq)]
pub enum LiouvilleFamily {
    /// `[eps (p0 + sum A_k phi_k phi_{k-1}) + delta (q0 + sum B_l psi_l psi_{l-1})] / (phi_n psi_m)`.
    Additive {
        phi: Sequence,
        psi: Sequence,
        p0: f64,
        q0: f64,
    },
    /// `alpha_{n+1} rho_{m+1} (1 - eps delta sum A_k/(alpha_{k+1} alpha_k) sum B_l/(rho_{l+1} rho_l))`.
    Multiplicative { alpha: Sequence, rho: Sequence },
}

impl LiouvilleFamily {
    /// `phi = psi = 1`, `p0 = q0 = 0` on the given ranges.
    pub fn simple_additive(n_range: (i64, i64), m_range: (i64, i64)) -> Self {
        LiouvilleFamily::Additive {
            phi: Sequence::constant(n_range.0, n_range.1, 1.0),
            psi: Sequence::constant(m_range.0, m_range.1, 1.0),
            p0: 0.0,
            q0: 0.0,
        }
    }

    /// `alpha = rho = 1` on the given ranges.
    pub fn simple_multiplicative(n_range: (i64, i64), m_range: (i64, i64)) -> Self {
        LiouvilleFamily::Multiplicative {
            alpha: Sequence::constant(n_range.0, n_range.1, 1.0),
            rho: Sequence::constant(m_range.0, m_range.1, 1.0),
        }
    }
}

fn nonzero(seq: &Sequence) -> Result<()> {
    match seq.iter().find(|&(_, v)| v == 0.0) {
        Some((k, _)) => Err(Error::ZeroPotential { index: k }),
        None => Ok(()),
    }
}

/// `omega` on `window` from `A_n`, `B_m` and a solution family.
pub fn liouville_solution_discrete(
    a: &Sequence,
    b: &Sequence,
    eps: f64,
    delta: f64,
    family: &LiouvilleFamily,
    window: LatticeWindow,
) -> Result<SiteMap<f64>> {
    match family {
        LiouvilleFamily::Additive { phi, psi, p0, q0 } => {
            nonzero(phi)?;
            nonzero(psi)?;
            let x = |n: i64| -> Result<f64> {
                let s = signed_sum(|k| Ok(a.get(k)? * phi.get(k)? * phi.get(k - 1)?), n)?;
                Ok(eps * (p0 + s))
            };
            let y = |m: i64| -> Result<f64> {
                let s = signed_sum(|l| Ok(b.get(l)? * psi.get(l)? * psi.get(l - 1)?), m)?;
                Ok(delta * (q0 + s))
            };
            SiteMap::try_from_fn(window, |n, m| {
                Ok((x(n)? + y(m)?) / (phi.get(n)? * psi.get(m)?))
            })
        }
        LiouvilleFamily::Multiplicative { alpha, rho } => {
            nonzero(alpha)?;
            nonzero(rho)?;
            let x = |n: i64| signed_sum(|k| Ok(a.get(k)? / (alpha.get(k + 1)? * alpha.get(k)?)), n);
            let y = |m: i64| signed_sum(|l| Ok(b.get(l)? / (rho.get(l + 1)? * rho.get(l)?)), m);
            SiteMap::try_from_fn(window, |n, m| {
                Ok(alpha.get(n + 1)? * rho.get(m + 1)? * (1.0 - eps * delta * x(n)? * y(m)?))
            })
        }
    }
}

/// Largest `|w^{m+1}_{n+1} w - w_{n+1} w^{m+1} + eps delta A_{n+1} B_{m+1}|`
/// over the cells of the window, with `A`, `B` indexed by `n`, `m`.
pub fn liouville_residual(
    omega: &SiteMap<f64>,
    a: impl Fn(i64) -> Option<f64>,
    b: impl Fn(i64) -> Option<f64>,
    eps: f64,
    delta: f64,
) -> f64 {
    let w = |n, m| omega.get(n, m).copied();
    omega
        .window()
        .cells()
        .filter_map(|(n, m)| {
            let r = w(n + 1, m + 1)? * w(n, m)? - w(n + 1, m)? * w(n, m + 1)?
                + eps * delta * a(n + 1)? * b(m + 1)?;
            Some(r.abs())
        })
        .fold(0.0, f64::max)
}

/// Sign of `omega` at the base site, if defined there.
pub fn base_orientation(data: &SurfaceData) -> Option<f64> {
    data.omega_at(0, 0).map(f64::signum)
}

/// Graph `psi(x, y)` of the smooth improper affine sphere built from one
/// curve used twice: `(x, y) = g(u) + g(v)`, `psi = z(u, v)`.
#[derive(Clone)]
pub struct OneCurveGraph {
    curve: SmoothCurveSampler,
    area: Antiderivative,
}

impl OneCurveGraph {
    /// `grid` tabulates `int_0^t det[g, g']`; it should cover the parameters
    /// that will be queried.
    pub fn new(curve: SmoothCurveSampler, grid: UniformGrid) -> Self {
        let c = curve.clone();
        let area = Antiderivative::new(
            std::sync::Arc::new(move |t: f64| det2(&c.point(t), &c.velocity(t))),
            grid,
        );
        Self { curve, area }
    }

    pub fn position(&self, u: f64, v: f64) -> Point2 {
        self.curve.point(u) + self.curve.point(v)
    }

    pub fn height(&self, u: f64, v: f64) -> f64 {
        det2(&self.curve.point(u), &self.curve.point(v)) + self.area.eval(u) - self.area.eval(v)
    }

    /// Newton solve of `g(u) + g(v) = target` from `guess`.
    pub fn parameters_of(&self, target: Point2, guess: (f64, f64)) -> Result<(f64, f64)> {
        let (mut u, mut v) = guess;
        for _ in 0..60 {
            let res = self.position(u, v) - target;
            if res.norm() < 1e-15 * (1.0 + target.norm()) {
                return Ok((u, v));
            }
            let (du, dv) = (self.curve.velocity(u), self.curve.velocity(v));
            let det = det2(&du, &dv);
            if det.abs() < 1e-14 {
                return Err(Error::Domain(format!(
                    "graph map is singular at (u, v) = ({u}, {v})"
                )));
            }
            // Cramer's rule for [du dv] (x, y)^T = res
            let x = det2(&res, &dv) / det;
            let y = det2(&du, &res) / det;
            u -= x;
            v -= y;
        }
        let res = (self.position(u, v) - target).norm();
        if res < 1e-12 * (1.0 + target.norm()) {
            Ok((u, v))
        } else {
            Err(Error::Domain(format!("Newton did not converge (residual {res:e})")))
        }
    }

    /// `psi_xx psi_yy - psi_xy^2` by central differences with step `h`
    /// around the graph point over `(u0, v0)`.
    pub fn hessian_determinant(&self, u0: f64, v0: f64, h: f64) -> Result<f64> {
        let centre = self.position(u0, v0);
        let psi = |dx: f64, dy: f64| -> Result<f64> {
            let (u, v) = self.parameters_of(centre + Point2::new(dx, dy), (u0, v0))?;
            Ok(self.height(u, v))
        };
        let p0 = psi(0.0, 0.0)?;
        let xx = (psi(h, 0.0)? - 2.0 * p0 + psi(-h, 0.0)?) / (h * h);
        let yy = (psi(0.0, h)? - 2.0 * p0 + psi(0.0, -h)?) / (h * h);
        let xy = (psi(h, h)? - psi(h, -h)? - psi(-h, h)? + psi(-h, -h)?) / (4.0 * h * h);
        Ok(xx * yy - xy * xy)
    }
}
