//! Discrete indefinite affine spheres from normalized potentials through
//! frame products and Birkhoff factorization.
//!
//! The proper case (`H = -1`) reads the position off the third column of
//! the factorized frame. The improper case is also accepted: there the
//! position is integrated from the first two frame columns.

use crate::birkhoff::{factor_truncated_escalating, BirkhoffPair};
use crate::error::{Error, Result};
use crate::improper::{require_window, PotentialData};
use crate::lattice::{LatticeSurface, LatticeWindow, Point3, SiteMap, SphereKind};
use crate::loop_algebra::{verify_twisted, LaurentMatrix, Mat3};

/// Increment used when a truncation order is too small.
pub const ORDER_STEP: i32 = 6;
/// Largest truncation order tried before giving up.
pub const MAX_ORDER: i32 = 36;
/// Tolerance on `|| F+ V- - G- V+ ||` at every site.
pub const CONSISTENCY_TOL: f64 = 1e-8;

/// Loops indexed by a contiguous integer range.
#[derive(Clone, Debug, PartialEq)]
pub struct LoopSequence {
    start: i64,
    loops: Vec<LaurentMatrix>,
}

impl LoopSequence {
    pub fn new(start: i64, loops: Vec<LaurentMatrix>) -> Self {
        Self { start, loops }
    }

    pub fn start(&self) -> i64 {
        self.start
    }

    pub fn end(&self) -> i64 {
        self.start + self.loops.len() as i64 - 1
    }

    pub fn get(&self, k: i64) -> Result<&LaurentMatrix> {
        if k < self.start || k > self.end() {
            return Err(Error::IndexOutOfRange { index: k });
        }
        Ok(&self.loops[(k - self.start) as usize])
    }

    pub fn iter(&self) -> impl Iterator<Item = (i64, &LaurentMatrix)> + '_ {
        self.loops
            .iter()
            .enumerate()
            .map(move |(i, l)| (self.start + i as i64, l))
    }
}

fn entry(i: usize, j: usize, v: f64) -> Mat3 {
    let mut m = Mat3::zeros();
    m[(i, j)] = v;
    m
}

/// `xi+` built from `alpha_{n+1}`, `beta_{n+1}` with step `eps`.
pub fn plus_factor(alpha: f64, beta: f64, eps: f64, h: f64) -> LaurentMatrix {
    let (a, b, e) = (alpha, beta, eps);
    LaurentMatrix::from_terms([
        (0, Mat3::identity()),
        (1, entry(0, 2, -h * a * e) + entry(1, 0, b * e) + entry(2, 1, a * e)),
        (2, entry(0, 1, -0.5 * h * a * a * e * e) + entry(2, 0, a * b * e * e)),
        (3, entry(0, 0, -0.5 * h * a * a * b * e.powi(3))),
    ])
}

/// `xi-` built from `rho_{m+1}`, `sigma_{m+1}` with step `delta`.
pub fn minus_factor(rho: f64, sigma: f64, delta: f64, h: f64) -> LaurentMatrix {
    let (r, s, d) = (rho, sigma, delta);
    LaurentMatrix::from_terms([
        (0, Mat3::identity()),
        (-1, entry(0, 1, s * d) + entry(1, 2, -h * r * d) + entry(2, 0, r * d)),
        (-2, entry(1, 0, -0.5 * h * r * r * d * d) + entry(2, 1, s * r * d * d)),
        (-3, entry(1, 1, -0.5 * h * s * r * r * d.powi(3))),
    ])
}

/// `xi+_n` for every `n` with `alpha_{n+1}` available, and likewise `xi-_m`.
pub fn potential_factors(p: &PotentialData) -> Result<(LoopSequence, LoopSequence)> {
    let h = p.kind.h();
    for seq in [&p.alpha, &p.rho] {
        if let Some((k, _)) = seq.iter().find(|&(_, v)| v == 0.0) {
            return Err(Error::ZeroPotential { index: k });
        }
    }
    let plus = (p.alpha.start()..=p.alpha.end())
        .map(|k| Ok(plus_factor(p.alpha.get(k)?, p.beta.get(k)?, p.eps, h)))
        .collect::<Result<Vec<_>>>()?;
    let minus = (p.rho.start()..=p.rho.end())
        .map(|k| Ok(minus_factor(p.rho.get(k)?, p.sigma.get(k)?, p.delta, h)))
        .collect::<Result<Vec<_>>>()?;
    Ok((
        LoopSequence::new(p.alpha.start() - 1, plus),
        LoopSequence::new(p.rho.start() - 1, minus),
    ))
}

/// `F+_n`, `G-_m` and their inverses.
#[derive(Clone, Debug, PartialEq)]
pub struct FrameProducts {
    pub plus: LoopSequence,
    pub plus_inverse: LoopSequence,
    pub minus: LoopSequence,
    pub minus_inverse: LoopSequence,
}

/// Products of factors from the identity at index 0 over `lo..=hi`, with
/// inverses carried as products of factor inverses.
fn products(
    factors: &LoopSequence,
    lo: i64,
    hi: i64,
    factor_inverse: impl Fn(&LaurentMatrix) -> Result<LaurentMatrix>,
) -> Result<(LoopSequence, LoopSequence)> {
    if lo > 0 || hi < 0 {
        return Err(Error::InvalidParameter(format!(
            "range {lo}..={hi} must contain 0"
        )));
    }
    let len = (hi - lo + 1) as usize;
    let at = |k: i64| (k - lo) as usize;
    let mut fwd = vec![LaurentMatrix::identity(); len];
    let mut inv = vec![LaurentMatrix::identity(); len];
    for k in 0..hi {
        let xi = factors.get(k)?;
        fwd[at(k + 1)] = fwd[at(k)].multiply(xi);
        inv[at(k + 1)] = factor_inverse(xi)?.multiply(&inv[at(k)]);
    }
    for k in (lo..0).rev() {
        // F_k = F_{k+1} xi_k^{-1}
        let xi = factors.get(k)?;
        let xi_inv = factor_inverse(xi)?;
        fwd[at(k)] = fwd[at(k + 1)].multiply(&xi_inv);
        inv[at(k)] = xi.multiply(&inv[at(k + 1)]);
    }
    Ok((LoopSequence::new(lo, fwd), LoopSequence::new(lo, inv)))
}

/// Frame products over index ranges that contain 0.
pub fn accumulate_frames(
    p: &PotentialData,
    n_range: (i64, i64),
    m_range: (i64, i64),
) -> Result<FrameProducts> {
    let (plus_factors, minus_factors) = potential_factors(p)?;
    // factors have degree 3 in one direction; their inverses at most 6
    let (plus, plus_inverse) = products(&plus_factors, n_range.0, n_range.1, |x| {
        x.inverse_of_group_element(0, 6)
    })?;
    let (minus, minus_inverse) = products(&minus_factors, m_range.0, m_range.1, |x| {
        x.inverse_of_group_element(6, 0)
    })?;
    Ok(FrameProducts {
        plus,
        plus_inverse,
        minus,
        minus_inverse,
    })
}

/// Factorized frames `F^ = G- V+ = F+ V-` on a window.
#[derive(Clone, Debug, PartialEq)]
pub struct FrameField {
    pub kind: SphereKind,
    pub eps: f64,
    pub delta: f64,
    pub frames: SiteMap<LaurentMatrix>,
    pub factors: SiteMap<BirkhoffPair>,
    /// `|| F+ V- - G- V+ ||` per site.
    pub consistency: SiteMap<f64>,
}

impl FrameField {
    pub fn window(&self) -> LatticeWindow {
        self.frames.window()
    }

    pub fn frame(&self, n: i64, m: i64) -> Result<&LaurentMatrix> {
        self.frames.at(n, m)
    }

    pub fn max_consistency(&self) -> f64 {
        self.consistency.values().iter().fold(0.0, |a, &b| a.max(b))
    }

    pub fn max_order(&self) -> i32 {
        self.factors.values().iter().map(|p| p.order).max().unwrap_or(0)
    }

    /// Largest twisted-group residual over all frames.
    pub fn max_twist_residual(&self) -> f64 {
        self.frames
            .values()
            .iter()
            .map(|f| verify_twisted(f, self.kind).max())
            .fold(0.0, f64::max)
    }

    /// Largest coefficient mass of `F^_n^{-1} F^_{n+1}` outside degrees
    /// `0..=3` and of `F^^m^{-1} F^^{m+1}` outside `-3..=0`.
    ///
    /// With `F^ = G- V+ = F+ V-` these steps are `(V+)^{-1} V+_{n+1}` and
    /// `(V-)^{-1} V-^{m+1}`, one-sided by construction; the check bounds the
    /// other side.
    pub fn lax_closure(&self) -> Result<f64> {
        let w = self.window();
        let mut worst: f64 = 0.0;
        for (n, m) in w.sites() {
            let here = self.factors.at(n, m)?;
            if n < w.n_max {
                let vp = &here.v_plus;
                let step = vp
                    .inverse_of_group_element(0, 2 * vp.span() + 6)?
                    .multiply(&self.factors.at(n + 1, m)?.v_plus);
                worst = worst.max(step.mass_outside(0, 3));
            }
            if m < w.m_max {
                let vm = &here.v_minus;
                let step = vm
                    .inverse_of_group_element(2 * vm.span() + 6, 0)?
                    .multiply(&self.factors.at(n, m + 1)?.v_minus);
                worst = worst.max(step.mass_outside(-3, 0));
            }
        }
        Ok(worst)
    }
}

fn column(m: &Mat3, j: usize) -> Point3 {
    Point3::new(m[(0, j)], m[(1, j)], m[(2, j)])
}

fn hull_with_origin(w: LatticeWindow) -> Result<LatticeWindow> {
    LatticeWindow::new(w.n_min.min(0), w.n_max.max(0), w.m_min.min(0), w.m_max.max(0))
}

/// Factorized frames on `window` (extended to contain the origin).
pub fn build_frames(p: &PotentialData, window: LatticeWindow, order: i32) -> Result<FrameField> {
    let hull = hull_with_origin(window)?;
    require_window(p.supported_window()?, hull)?;
    let fp = accumulate_frames(p, (hull.n_min, hull.n_max), (hull.m_min, hull.m_max))?;
    let sites = SiteMap::par_try_from_fn(hull, |n, m| {
        let plus = fp.plus.get(n)?;
        let minus = fp.minus.get(m)?;
        let l = fp.minus_inverse.get(m)?.multiply(plus);
        let pair = factor_truncated_escalating(&l, order, ORDER_STEP, MAX_ORDER)
            .map_err(|e| e.at_site(n, m))?;
        let frame = minus.multiply(&pair.v_plus);
        let consistency = plus.multiply(&pair.v_minus).sub(&frame).coefficient_norm();
        if consistency > CONSISTENCY_TOL {
            return Err(Error::Truncation {
                residual: consistency,
            }
            .at_site(n, m));
        }
        Ok((frame, pair, consistency))
    })?;
    Ok(FrameField {
        kind: p.kind,
        eps: p.eps,
        delta: p.delta,
        frames: sites.map(|s| s.0.clone()),
        factors: sites.map(|s| s.1.clone()),
        consistency: sites.map(|s| s.2),
    })
}

/// Discrete affine sphere from potentials at spectral parameter `lambda0`.
///
/// For `H = -1` the point at `(n, m)` is the third column of the factorized
/// frame evaluated at `lambda0`, so the result is the sphere up to one
/// global linear map. For `H = 0` the first two frame columns, rescaled by
/// the diagonal gauge, are the difference quotients of the position, which
/// is integrated from `f(0, 0) = 0`.
pub fn build_discrete_proper(
    p: &PotentialData,
    lambda0: f64,
    window: LatticeWindow,
    order: i32,
) -> Result<(LatticeSurface, FrameField)> {
    if lambda0 == 0.0 || !lambda0.is_finite() {
        return Err(Error::Domain(format!("lambda must be nonzero, got {lambda0}")));
    }
    let field = build_frames(p, window, order)?;
    let evaluated = SiteMap::try_from_fn(field.window(), |n, m| {
        field.frame(n, m)?.evaluate(lambda0).map_err(|e| e.at_site(n, m))
    })?;
    let points = match p.kind {
        SphereKind::Proper => SiteMap::try_from_fn(window, |n, m| Ok(column(evaluated.at(n, m)?, 2)))?,
        SphereKind::Improper => integrate_improper(p, &field, &evaluated, lambda0, window)?,
    };
    let surface = LatticeSurface::new(p.eps, p.delta, p.kind, points)?;
    Ok((surface, field))
}

fn integrate_improper(
    p: &PotentialData,
    field: &FrameField,
    evaluated: &SiteMap<Mat3>,
    lambda0: f64,
    window: LatticeWindow,
) -> Result<SiteMap<Point3>> {
    let hull = field.window();
    // V-_0 = diag(1/k, k, 1) with k = 1 - b_n s_m
    let d_n = |n: i64, m: i64| -> Result<Point3> {
        let k_inv = field.factors.at(n, m)?.v_minus.coefficient(0)[(0, 0)];
        let scale = lambda0 * p.alpha.get(n + 1)? / k_inv;
        Ok(column(evaluated.at(n, m)?, 0) * (p.eps * scale))
    };
    let d_m = |n: i64, m: i64| -> Result<Point3> {
        let scale = p.rho.get(m + 1)? / lambda0;
        Ok(column(evaluated.at(n, m)?, 1) * (p.delta * scale))
    };
    let mut f = SiteMap::from_fn(hull, |_, _| Point3::zeros());
    for n in 1..=hull.n_max {
        let prev = *f.at(n - 1, 0)?;
        f.set(n, 0, prev + d_n(n - 1, 0)?)?;
    }
    for n in (hull.n_min..0).rev() {
        let next = *f.at(n + 1, 0)?;
        f.set(n, 0, next - d_n(n, 0)?)?;
    }
    for n in hull.n_min..=hull.n_max {
        for m in 1..=hull.m_max {
            let prev = *f.at(n, m - 1)?;
            f.set(n, m, prev + d_m(n, m - 1)?)?;
        }
        for m in (hull.m_min..0).rev() {
            let next = *f.at(n, m + 1)?;
            f.set(n, m, next - d_m(n, m)?)?;
        }
    }
    SiteMap::try_from_fn(window, |n, m| f.at(n, m).copied())
}

/// Largest `r` such that every site of `[-r, r]^2` factorizes, searching up
/// to `max_radius`; `None` if even the origin fails.
pub fn largest_factorizable_radius(p: &PotentialData, order: i32, max_radius: i64) -> Option<i64> {
    let mut best = None;
    for r in 0..=max_radius {
        let w = LatticeWindow::square(-r, r).ok()?;
        match build_frames(p, w, order) {
            Ok(_) => best = Some(r),
            Err(_) => break,
        }
    }
    best
}

/// `P = f^{m+1}_{n+1} + f^m_n` and `Q = f^m_{n+1} + f^{m+1}_n` per cell.
pub fn affine_normal_lines(f: &LatticeSurface) -> Result<SiteMap<(Point3, Point3)>> {
    let w = f.window();
    if w.n_max <= w.n_min || w.m_max <= w.m_min {
        return Err(Error::InvalidWindow(format!("{w} has no cells")));
    }
    let cells = LatticeWindow::new(w.n_min, w.n_max - 1, w.m_min, w.m_max - 1)?;
    SiteMap::try_from_fn(cells, |n, m| {
        let p = f.point(n + 1, m + 1)? + f.point(n, m)?;
        let q = f.point(n + 1, m)? + f.point(n, m + 1)?;
        Ok((p, q))
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::birkhoff::{improper_minus_frame, improper_plus_frame};
    use crate::improper::{accumulate, build_discrete_from_potentials};
    use crate::lattice::Sequence;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn unit(kind: SphereKind, eps: f64, lo: i64, hi: i64) -> PotentialData {
        PotentialData::constant((1.0, 1.0, 1.0, 1.0), (lo, hi), (lo, hi), eps, eps, kind).unwrap()
    }

    fn random_potentials(rng: &mut ChaCha8Rng, kind: SphereKind, eps: f64, lo: i64, hi: i64) -> PotentialData {
        let mut seq = |nonzero: bool| {
            Sequence::new(
                lo,
                (lo..=hi)
                    .map(|_| {
                        let x: f64 = rng.gen_range(-1.0..1.0);
                        if nonzero {
                            x.signum() * (0.5 + x.abs())
                        } else {
                            x
                        }
                    })
                    .collect(),
            )
        };
        let (a, b, r, s) = (seq(true), seq(false), seq(true), seq(false));
        PotentialData::new(a, b, r, s, eps, eps, kind).unwrap()
    }

    #[test]
    fn factors_have_unit_determinant_and_twist_pattern() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..10 {
            let (a, b, e) = (rng.gen_range(0.5..1.5), rng.gen_range(-1.0..1.0), rng.gen_range(0.1..1.0));
            for kind in [SphereKind::Proper, SphereKind::Improper] {
                let h = kind.h();
                for x in [plus_factor(a, b, e, h), minus_factor(a, b, e, h)] {
                    for lambda in [1.0, -1.0, 2.0] {
                        assert!((x.evaluate(lambda).unwrap().determinant() - 1.0).abs() < 1e-12);
                    }
                    let rep = verify_twisted(&x, kind);
                    assert!(rep.q_block_residual == 0.0);
                    if kind == SphereKind::Proper {
                        assert!(rep.max() < 1e-12, "{rep:?}");
                    }
                }
            }
        }
        assert_eq!(plus_factor(0.0, 0.0, 0.3, -1.0), LaurentMatrix::identity());
    }

    #[test]
    fn zero_alpha_is_rejected() {
        let mut p = unit(SphereKind::Proper, 0.1, -2, 2);
        p.alpha = Sequence::new(-2, vec![1.0, 1.0, 0.0, 1.0, 1.0]);
        assert_eq!(potential_factors(&p).unwrap_err(), Error::ZeroPotential { index: 0 });
    }

    #[test]
    fn improper_products_match_closed_frames() {
        let p = unit(SphereKind::Improper, 1.0, -3, 4);
        let fp = accumulate_frames(&p, (-3, 3), (-3, 3)).unwrap();
        assert_eq!(fp.plus.get(0).unwrap(), &LaurentMatrix::identity());
        // a_2 = 2, b_2 = 2, c_2 = 3
        assert!(fp.plus.get(2).unwrap().sub(&improper_plus_frame(2.0, 2.0, 3.0)).coefficient_norm() < 1e-14);
        let acc = accumulate(&p).unwrap();
        for n in -3..=3 {
            let (a, b, c) = (acc.a.get(n).unwrap(), acc.b.get(n).unwrap(), acc.c.get(n).unwrap());
            assert!(fp.plus.get(n).unwrap().sub(&improper_plus_frame(a, b, c)).coefficient_norm() < 1e-12);
            let (r, s, t) = (acc.r.get(n).unwrap(), acc.s.get(n).unwrap(), acc.t.get(n).unwrap());
            assert!(fp.minus.get(n).unwrap().sub(&improper_minus_frame(r, s, t)).coefficient_norm() < 1e-12);
            let id = fp.plus.get(n).unwrap().multiply(fp.plus_inverse.get(n).unwrap());
            assert!(id.sub(&LaurentMatrix::identity()).coefficient_norm() < 1e-12);
        }
    }

    #[test]
    fn degree_grows_three_per_step() {
        let p = unit(SphereKind::Proper, 0.5, -3, 4);
        let fp = accumulate_frames(&p, (-3, 3), (-3, 3)).unwrap();
        for (n, f) in fp.plus.iter() {
            if n >= 0 {
                assert!(f.max_degree().unwrap() <= 3 * n as i32);
                assert!(f.min_degree().unwrap() >= 0);
            }
        }
    }

    #[test]
    fn base_point_is_e3() {
        let p = unit(SphereKind::Proper, 0.1, -3, 4);
        let (f, field) = build_discrete_proper(&p, 1.0, LatticeWindow::square(-1, 1).unwrap(), 12).unwrap();
        assert!((f.point(0, 0).unwrap() - Point3::z()).norm() < 1e-12);
        assert!(field.max_consistency() < 1e-8);
        assert!(field.max_twist_residual() < 1e-8, "{}", field.max_twist_residual());
    }

    #[test]
    fn improper_path_matches_representation_formula() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for lambda in [1.0, 1.3, -0.8] {
            let p = random_potentials(&mut rng, SphereKind::Improper, 0.3, -3, 4);
            let w = LatticeWindow::new(-2, 3, -3, 2).unwrap();
            let (expect, _) = match build_discrete_from_potentials(&p, lambda, w) {
                Ok(x) => x,
                Err(_) => continue,
            };
            let (got, _) = build_discrete_proper(&p, lambda, w, 12).unwrap();
            for (n, m) in w.sites() {
                let d = (got.point(n, m).unwrap() - expect.point(n, m).unwrap()).norm();
                assert!(d < 1e-9, "lambda {lambda} at ({n},{m}): {d}");
            }
        }
    }

    #[test]
    fn lax_steps_have_bounded_degrees() {
        let p = unit(SphereKind::Proper, 0.2, -3, 4);
        let (_, field) = build_discrete_proper(&p, 1.0, LatticeWindow::square(-2, 2).unwrap(), 12).unwrap();
        let closure = field.lax_closure().unwrap();
        assert!(closure < 1e-8, "{closure}");
    }

    #[test]
    fn lines_of_bilinear_surface() {
        let w = LatticeWindow::square(-2, 2).unwrap();
        let pts = SiteMap::from_fn(w, |n, m| Point3::new(n as f64, m as f64, (n * m) as f64));
        let f = LatticeSurface::new(1.0, 1.0, SphereKind::Improper, pts).unwrap();
        let lines = affine_normal_lines(&f).unwrap();
        assert_eq!(lines.window().len(), 16);
        for (_, (p, q)) in lines.iter() {
            assert_eq!(p - q, Point3::new(0.0, 0.0, 1.0));
        }
        let flat = LatticeSurface::new(1.0, 1.0, SphereKind::Improper, SiteMap::from_fn(w, |_, _| Point3::x())).unwrap();
        assert!(affine_normal_lines(&flat).unwrap().iter().all(|(_, (p, q))| p == q));
    }

    #[test]
    fn factorizable_radius_reported() {
        let p = unit(SphereKind::Proper, 0.1, -4, 5);
        assert_eq!(largest_factorizable_radius(&p, 12, 2), Some(2));
    }
}
