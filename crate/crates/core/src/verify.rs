//! Checks of the defining geometry, recovery of `(omega, A, B)` from a raw
//! lattice surface, and residuals of the lattice and Lax equations.

use std::fmt::Write as _;

use nalgebra::{Matrix3, Matrix3x4};
use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::improper::build_discrete_from_curves;
use crate::improper::build_smooth_from_curves;
use crate::lattice::{
    LatticeSurface, LatticeWindow, Point3, SiteMap, SmoothCurveSampler, SphereKind, SurfaceData,
};
use crate::proper::affine_normal_lines;
use crate::quadrature::UniformGrid;

/// Default tolerances; every field can be overridden from configuration.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Tolerances {
    pub coplanarity: f64,
    pub parallel: f64,
    pub concurrency: f64,
    /// Relative to the data scale.
    pub lattice: f64,
    pub lax: f64,
    pub volume: f64,
    pub gauss: f64,
    pub data_agreement: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self {
            coplanarity: 1e-8,
            parallel: 1e-8,
            concurrency: 1e-7,
            lattice: 1e-10,
            lax: 1e-9,
            volume: 1e-9,
            gauss: 1e-8,
            data_agreement: 1e-9,
        }
    }
}

/// One line of a report.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CheckEntry {
    pub name: String,
    pub residual: f64,
    pub worst_site: Option<(i64, i64)>,
    pub tolerance: f64,
    pub pass: bool,
    /// Sites excluded from the residual (degenerate or singular).
    pub flagged: Vec<(i64, i64)>,
    pub note: String,
}

impl CheckEntry {
    fn new(name: &str, tolerance: f64) -> Self {
        Self {
            name: name.to_string(),
            residual: 0.0,
            worst_site: None,
            tolerance,
            pass: true,
            flagged: Vec::new(),
            note: String::new(),
        }
    }

    /// Folds one site's residual into the maximum.
    fn record(&mut self, site: (i64, i64), residual: f64) {
        let r = if residual.is_nan() { f64::INFINITY } else { residual };
        if self.worst_site.is_none() || r > self.residual {
            self.residual = r;
            self.worst_site = Some(site);
        }
    }

    fn finish(mut self) -> Self {
        self.pass = self.residual <= self.tolerance;
        self
    }

    fn with_note(mut self, note: impl Into<String>) -> Self {
        self.note = note.into();
        self
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct VerificationReport {
    pub entries: Vec<CheckEntry>,
}

impl VerificationReport {
    pub fn push(&mut self, entry: CheckEntry) {
        self.entries.push(entry);
    }

    pub fn extend(&mut self, entries: impl IntoIterator<Item = CheckEntry>) {
        self.entries.extend(entries);
    }

    pub fn pass(&self) -> bool {
        self.entries.iter().all(|e| e.pass)
    }

    pub fn get(&self, name: &str) -> Option<&CheckEntry> {
        self.entries.iter().find(|e| e.name == name)
    }

    pub fn failures(&self) -> impl Iterator<Item = &CheckEntry> {
        self.entries.iter().filter(|e| !e.pass)
    }

    /// Plain-text table.
    pub fn table(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(
            out,
            "{:<24} {:>12} {:>12} {:>14} {:>6} {:>7}",
            "check", "residual", "tolerance", "worst site", "pass", "flagged"
        );
        for e in &self.entries {
            let site = e
                .worst_site
                .map(|(n, m)| format!("({n}, {m})"))
                .unwrap_or_else(|| "-".into());
            let _ = writeln!(
                out,
                "{:<24} {:>12.3e} {:>12.1e} {:>14} {:>6} {:>7}",
                e.name,
                e.residual,
                e.tolerance,
                site,
                if e.pass { "yes" } else { "NO" },
                e.flagged.len()
            );
            if !e.note.is_empty() {
                let _ = writeln!(out, "    {}", e.note);
            }
        }
        let _ = writeln!(out, "overall: {}", if self.pass() { "pass" } else { "FAIL" });
        out
    }

    /// One JSON object per line, one line per check.
    pub fn json_lines(&self) -> String {
        self.entries
            .iter()
            .map(|e| serde_json::to_string(e).unwrap_or_default() + "\n")
            .collect()
    }
}

/// Five-point coplanarity: `sigma_3 / sigma_1` of the differences from each
/// interior site to its four neighbours.
pub fn check_coplanarity(f: &LatticeSurface, tol: f64) -> Result<CheckEntry> {
    let mut entry = CheckEntry::new("coplanarity", tol);
    for (n, m) in f.window().interior() {
        let c = f.point(n, m)?;
        let cols = [
            f.point(n + 1, m)? - c,
            f.point(n - 1, m)? - c,
            f.point(n, m + 1)? - c,
            f.point(n, m - 1)? - c,
        ];
        let mat = Matrix3x4::from_columns(&cols);
        let sv = mat.singular_values();
        let s1 = sv.max();
        if s1 == 0.0 {
            entry.flagged.push((n, m));
            continue;
        }
        entry.record((n, m), sv.min() / s1);
    }
    Ok(entry.finish())
}

fn unit(v: Point3) -> Option<Point3> {
    let norm = v.norm();
    (norm > 0.0).then(|| v / norm)
}

/// Parallel (`H = 0`) or concurrent (`H = -1`) lines `l^m_n`.
pub fn check_normal_condition(f: &LatticeSurface, tol: &Tolerances) -> Result<CheckEntry> {
    let lines = affine_normal_lines(f)?;
    let scale = f.diameter().max(f64::MIN_POSITIVE);
    let degenerate = |p: &Point3, q: &Point3| (p - q).norm() <= 1e-14 * scale;
    match f.kind {
        SphereKind::Improper => {
            let mut entry = CheckEntry::new("parallel-normals", tol.parallel);
            let xi0 = unit(f.xi0).unwrap_or_else(Point3::z);
            for ((n, m), (p, q)) in lines.iter() {
                if degenerate(p, q) {
                    entry.flagged.push((n, m));
                    continue;
                }
                let d = (p - q).normalize();
                entry.record((n, m), (d - xi0 * d.dot(&xi0)).norm());
            }
            Ok(entry.finish())
        }
        SphereKind::Proper => {
            let mut entry = CheckEntry::new("concurrent-normals", tol.concurrency);
            let mut a = Matrix3::<f64>::zeros();
            let mut b = Point3::zeros();
            let mut used = Vec::new();
            for ((n, m), (p, q)) in lines.iter() {
                if degenerate(p, q) {
                    entry.flagged.push((n, m));
                    continue;
                }
                let d = (p - q).normalize();
                let proj = Matrix3::identity() - d * d.transpose();
                a += proj;
                b += proj * p;
                used.push(((n, m), *p, d));
            }
            let centre = a.try_inverse().map(|inv| inv * b);
            match centre {
                Some(c) => {
                    for (site, p, d) in used {
                        let v = c - p;
                        entry.record(site, (v - d * d.dot(&v)).norm() / scale);
                    }
                    Ok(entry.finish().with_note(format!(
                        "centre ({:.6e}, {:.6e}, {:.6e})",
                        c.x, c.y, c.z
                    )))
                }
                None => {
                    entry.residual = f64::INFINITY;
                    Ok(entry.finish().with_note("lines are all parallel; no common point"))
                }
            }
        }
    }
}

/// Fields recovered from a surface, with the residuals of the relations
/// that over-determine them.
#[derive(Clone, Debug, PartialEq)]
pub struct ExtractedData {
    pub data: SurfaceData,
    /// `|mixed - omega xi| / |mixed|`: the mixed difference is parallel to `xi`.
    pub affine_normal: CheckEntry,
    /// `|det F~ - omega g| / max |omega|`.
    pub volume: CheckEntry,
    /// Components of the second differences the frame relations fix.
    pub gauss: CheckEntry,
}

fn xi_at(f: &LatticeSurface, n: i64, m: i64) -> Result<Point3> {
    let h = f.kind.h();
    Ok((f.point(n + 1, m)? + f.point(n, m + 1)?) * (-h / 2.0) + f.xi0 * (1.0 + h))
}

/// `[(f_{n+1} - f)/eps, (f^{m+1} - f)/delta, xi]`.
fn frame_tilde(f: &LatticeSurface, n: i64, m: i64) -> Result<Matrix3<f64>> {
    let c = f.point(n, m)?;
    Ok(Matrix3::from_columns(&[
        (f.point(n + 1, m)? - c) / f.eps,
        (f.point(n, m + 1)? - c) / f.delta,
        xi_at(f, n, m)?,
    ]))
}

/// Recovers `omega` from the mixed difference along `xi`, then `g`, `A`
/// and `B` by solving the second-order frame relations.
///
/// `omega` is defined on sites with `n < n_max`, `m < m_max`; `A` also needs
/// `n > n_min` and `B` needs `m > m_min`. Singular sites keep `omega` but
/// have no `A`, `B`.
pub fn extract_data(f: &LatticeSurface, tol: &Tolerances) -> Result<ExtractedData> {
    let w = f.window();
    let (eps, delta, h) = (f.eps, f.delta, f.kind.h());
    let cell = |n: i64, m: i64| n < w.n_max && m < w.m_max;
    let mut affine_normal = CheckEntry::new("affine-normal", tol.coplanarity);

    let mut off_normal = Vec::new();
    let omega = SiteMap::try_from_fn(w, |n, m| {
        if !cell(n, m) {
            return Ok(None);
        }
        let mixed = crate::lattice::second_mixed_difference(f, n, m)?;
        let xi = xi_at(f, n, m)?;
        let om = mixed.dot(&xi) / xi.norm_squared();
        off_normal.push(((n, m), (mixed - xi * om).norm(), mixed.norm()));
        Ok(Some(om))
    })?;
    let max_omega = omega.values().iter().flatten().fold(0.0f64, |a, w| a.max(w.abs()));
    let singular_tol = crate::lattice::SINGULAR_REL_TOL * max_omega;
    for (site, off, len) in off_normal {
        let om = omega.get(site.0, site.1).copied().flatten().unwrap_or(0.0);
        if om.abs() <= singular_tol {
            affine_normal.flagged.push(site);
        } else {
            affine_normal.record(site, off / len);
        }
    }
    let g_of = |om: f64| 2.0 / (2.0 - eps * delta * h * om);
    let om_at = |n, m| omega.get(n, m).copied().flatten();

    let mut volume = CheckEntry::new("volume", tol.volume);
    let mut gauss = CheckEntry::new("gauss", tol.gauss);
    let mut a_field = SiteMap::from_fn(w, |_, _| None);
    let mut b_field = SiteMap::from_fn(w, |_, _| None);
    for (n, m) in w.sites() {
        let Some(om) = om_at(n, m) else { continue };
        if om.abs() <= singular_tol {
            volume.flagged.push((n, m));
            continue;
        }
        let ft = frame_tilde(f, n, m)?;
        let g = g_of(om);
        volume.record((n, m), (ft.determinant() - om * g).abs() / max_omega);
        let Some(inv) = ft.try_inverse() else {
            volume.flagged.push((n, m));
            continue;
        };
        let c = f.point(n, m)?;
        if n > w.n_min {
            if let Some(om_prev) = om_at(n - 1, m) {
                let s1 = (f.point(n + 1, m)? - c * 2.0 + f.point(n - 1, m)?) / (eps * eps);
                let x = inv * s1;
                let expect = (om - om_prev) / (eps * om) + delta * h / 2.0 * om_prev;
                gauss.record((n, m), (x.x - expect).abs().max(x.z.abs()) / expect.abs().max(1.0));
                a_field.set(n, m, Some(om * x.y))?;
            }
        }
        if m > w.m_min {
            if let Some(om_prev) = om_at(n, m - 1) {
                let s2 = (f.point(n, m + 1)? - c * 2.0 + f.point(n, m - 1)?) / (delta * delta);
                let x = inv * s2;
                let expect = (om - om_prev) / (delta * om) + eps * h / 2.0 * om_prev;
                gauss.record((n, m), (x.y - expect).abs().max(x.z.abs()) / expect.abs().max(1.0));
                b_field.set(n, m, Some(om * x.x))?;
            }
        }
    }
    let data = SurfaceData::new(eps, delta, f.kind, omega, a_field, b_field)?;
    Ok(ExtractedData {
        data,
        affine_normal: affine_normal.finish(),
        volume: volume.finish(),
        gauss: gauss.finish(),
    })
}

/// Residuals of the three lattice relations between `(omega, A, B, g)`.
pub fn check_lattice_equation(d: &SurfaceData, tol: f64) -> Vec<CheckEntry> {
    let w = d.window();
    let (eps, delta) = (d.eps, d.delta);
    let mut e_omega = CheckEntry::new("lattice-omega", tol);
    let mut e_a = CheckEntry::new("lattice-A", tol);
    let mut e_b = CheckEntry::new("lattice-B", tol);
    let (mut s_omega, mut s_a, mut s_b) = (0.0f64, 0.0f64, 0.0f64);
    let mut raw = (Vec::new(), Vec::new(), Vec::new());
    for (n, m) in w.cells() {
        let om = |n, m| d.omega_at(n, m);
        let g = |n, m| d.g_at(n, m);
        if let (Some(w11), Some(w00), Some(w10), Some(w01), Some(g11), Some(g00), Some(a10), Some(b11)) = (
            om(n + 1, m + 1),
            om(n, m),
            om(n + 1, m),
            om(n, m + 1),
            g(n + 1, m + 1),
            g(n, m),
            d.a_at(n + 1, m),
            d.b_at(n + 1, m + 1),
        ) {
            let r = w11 * w00 - w10 * w01 / (g11 * g00) + eps * delta * a10 * b11;
            s_omega = s_omega.max((w11 * w00).abs()).max((eps * delta * a10 * b11).abs());
            raw.0.push(((n, m), r.abs()));
        } else {
            e_omega.flagged.push((n, m));
        }
        if let (Some(g11), Some(g00), Some(a11), Some(a10)) =
            (g(n + 1, m + 1), g(n, m), d.a_at(n + 1, m + 1), d.a_at(n + 1, m))
        {
            s_a = s_a.max((g00 * a10).abs());
            raw.1.push(((n, m), (g11 * a11 - g00 * a10).abs()));
        } else {
            e_a.flagged.push((n, m));
        }
        if let (Some(g11), Some(g00), Some(b11), Some(b01)) =
            (g(n + 1, m + 1), g(n, m), d.b_at(n + 1, m + 1), d.b_at(n, m + 1))
        {
            s_b = s_b.max((g00 * b01).abs());
            raw.2.push(((n, m), (g11 * b11 - g00 * b01).abs()));
        } else {
            e_b.flagged.push((n, m));
        }
    }
    let mut out = Vec::new();
    for (mut entry, values, scale) in [(e_omega, raw.0, s_omega), (e_a, raw.1, s_a), (e_b, raw.2, s_b)] {
        let scale = scale.max(f64::MIN_POSITIVE);
        for (site, r) in values {
            entry.record(site, r / scale);
        }
        let note = format!("relative to data scale {scale:.3e}");
        out.push(entry.finish().with_note(note));
    }
    out
}

/// `U^m_n` at spectral parameter `lambda`.
pub fn lax_u(d: &SurfaceData, n: i64, m: i64, lambda: f64) -> Option<Matrix3<f64>> {
    let h = d.kind.h();
    let (om, om1, g1, a1) = (d.omega_at(n, m)?, d.omega_at(n + 1, m)?, d.g_at(n + 1, m)?, d.a_at(n + 1, m)?);
    if om == 0.0 || om1 * g1 == 0.0 {
        return None;
    }
    let el = d.eps * lambda;
    let q = om / (om1 * g1);
    Some(Matrix3::new(
        om1 * g1 / om - h / 2.0 * a1 * g1 * el.powi(3),
        -h / 2.0 * q * el * el,
        -h * el,
        a1 * g1 * el,
        q,
        0.0,
        a1 * g1 * el * el,
        q * el,
        1.0,
    ))
}

/// `V^m_n` at spectral parameter `lambda`.
pub fn lax_v(d: &SurfaceData, n: i64, m: i64, lambda: f64) -> Option<Matrix3<f64>> {
    let h = d.kind.h();
    let (om, om1, g, b1) = (d.omega_at(n, m)?, d.omega_at(n, m + 1)?, d.g_at(n, m)?, d.b_at(n, m + 1)?);
    if om * g == 0.0 || om1 == 0.0 {
        return None;
    }
    let dl = d.delta / lambda;
    Some(Matrix3::new(
        1.0 / g,
        b1 * dl / (om1 * om * g),
        0.0,
        -h / 2.0 * om * om * g * dl * dl,
        g - h / 2.0 * (b1 * om * g / om1) * dl.powi(3),
        -h * om * g * dl,
        om * dl,
        (b1 / om1) * dl * dl,
        1.0,
    ))
}

/// Extended frame `F~ diag-gauge` at `lambda`.
fn extended_frame(f: &LatticeSurface, d: &SurfaceData, n: i64, m: i64, lambda: f64) -> Result<Option<Matrix3<f64>>> {
    let w = f.window();
    if !(w.contains(n, m) && n < w.n_max && m < w.m_max) {
        return Ok(None);
    }
    let (Some(om), Some(g)) = (d.omega_at(n, m), d.g_at(n, m)) else {
        return Ok(None);
    };
    if om * g == 0.0 {
        return Ok(None);
    }
    let h = f.kind.h();
    let gauge = Matrix3::new(
        1.0 / lambda,
        0.0,
        f.eps * h / 2.0,
        0.0,
        lambda / (om * g),
        f.delta * h / 2.0,
        0.0,
        0.0,
        1.0,
    );
    Ok(Some(frame_tilde(f, n, m)? * gauge))
}

/// Compatibility `U^m_n V^m_{n+1} = V^m_n U^{m+1}_n` at `lambda`, and the
/// frame recursion `F_{n+1} = F U`, `F^{m+1} = F V` at `lambda = 1`.
pub fn check_lax(d: &SurfaceData, f: &LatticeSurface, lambda: f64, tol: f64) -> Result<Vec<CheckEntry>> {
    let w = d.window();
    let mut compat = CheckEntry::new(&format!("lax-compatibility@{lambda}"), tol);
    for (n, m) in w.cells() {
        let mats = (
            lax_u(d, n, m, lambda),
            lax_v(d, n + 1, m, lambda),
            lax_v(d, n, m, lambda),
            lax_u(d, n, m + 1, lambda),
        );
        match mats {
            (Some(u), Some(v1), Some(v), Some(u1)) => {
                let scale = (u.norm() * v1.norm()).max(1.0);
                compat.record((n, m), (u * v1 - v * u1).norm() / scale);
            }
            _ => compat.flagged.push((n, m)),
        }
    }
    let compat = compat.finish().with_note("relative to |U||V|; flagged sites lack data or have omega g = 0");

    let mut recursion = CheckEntry::new("frame-recursion", tol);
    for (n, m) in w.cells() {
        let Some(frame) = extended_frame(f, d, n, m, 1.0)? else {
            recursion.flagged.push((n, m));
            continue;
        };
        let scale = frame.norm().max(1.0);
        if let (Some(u), Some(next)) = (lax_u(d, n, m, 1.0), extended_frame(f, d, n + 1, m, 1.0)?) {
            recursion.record((n, m), (frame * u - next).norm() / scale);
        }
        if let (Some(v), Some(next)) = (lax_v(d, n, m, 1.0), extended_frame(f, d, n, m + 1, 1.0)?) {
            recursion.record((n, m), (frame * v - next).norm() / scale);
        }
    }
    Ok(vec![compat, recursion.finish()])
}

/// Normwise relative agreement of one field over the sites where both
/// sides are defined and `reference` is not singular.
pub fn compare_field(
    name: &str,
    got: &SiteMap<Option<f64>>,
    expected: &SiteMap<Option<f64>>,
    skip: impl Fn(i64, i64) -> bool,
    tol: f64,
) -> CheckEntry {
    let mut entry = CheckEntry::new(name, tol);
    let scale = expected
        .values()
        .iter()
        .flatten()
        .fold(0.0f64, |a, v| a.max(v.abs()))
        .max(f64::MIN_POSITIVE);
    for ((n, m), e) in expected.iter() {
        if skip(n, m) {
            entry.flagged.push((n, m));
            continue;
        }
        if let (Some(e), Some(Some(g))) = (e, got.get(n, m)) {
            entry.record((n, m), (g - e).abs() / scale.max(e.abs()));
        }
    }
    entry.finish()
}

/// Largest distance between the points of two surfaces on the sites of
/// the first.
pub fn point_distance(a: &LatticeSurface, b: &LatticeSurface, tol: f64) -> Result<CheckEntry> {
    let mut entry = CheckEntry::new("points", tol);
    for ((n, m), p) in a.points().iter() {
        entry.record((n, m), (p - b.point(n, m)?).norm());
    }
    Ok(entry.finish())
}

/// Runs every check that applies to a lattice surface.
pub fn verify_surface(f: &LatticeSurface, tol: &Tolerances, lax_lambdas: &[f64]) -> Result<(VerificationReport, ExtractedData)> {
    let mut report = VerificationReport::default();
    report.push(check_coplanarity(f, tol.coplanarity)?);
    report.push(check_normal_condition(f, tol)?);
    let extracted = extract_data(f, tol)?;
    report.push(extracted.affine_normal.clone());
    report.push(extracted.volume.clone());
    report.push(extracted.gauss.clone());
    report.extend(check_lattice_equation(&extracted.data, tol.lattice));
    for &lambda in lax_lambdas {
        let mut entries = check_lax(&extracted.data, f, lambda, tol.lax)?;
        if lambda != lax_lambdas[0] {
            entries.truncate(1);
        }
        report.extend(entries);
    }
    Ok((report, extracted))
}

/// Compares builder data with data extracted from its surface on the
/// nonsingular sites where both are defined.
pub fn check_builder_data(built: &SurfaceData, extracted: &SurfaceData, tol: f64) -> Vec<CheckEntry> {
    let singular = |n, m| built.is_singular(n, m);
    vec![
        compare_field("data-omega", &extracted.omega, &built.omega, singular, tol),
        compare_field("data-A", &extracted.a, &built.a, singular, tol),
        compare_field("data-B", &extracted.b, &built.b, singular, tol),
    ]
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ConvergenceRow {
    pub h: f64,
    /// Sup over sites of `|f_discrete - f_smooth|` (max norm).
    pub error: f64,
    pub z_error: f64,
    /// `error(previous h) / error(h)`.
    pub ratio: Option<f64>,
    pub z_ratio: Option<f64>,
}

/// Distance between the discrete surface of sampled curves and the smooth
/// surface of the same curves on `[lo, hi]^2` for each step.
///
/// Each step must divide `lo` and `hi` (up to rounding); `lo <= 0 <= hi`.
pub fn convergence_study(
    g1: &SmoothCurveSampler,
    g2: &SmoothCurveSampler,
    (lo, hi): (f64, f64),
    steps: &[f64],
) -> Result<Vec<ConvergenceRow>> {
    let mut rows: Vec<ConvergenceRow> = Vec::new();
    for &h in steps {
        let (i0, i1) = ((lo / h).round() as i64, (hi / h).round() as i64);
        let grid = UniformGrid::new(h, i0, i1)?;
        let (smooth, _) = build_smooth_from_curves(g1, g2, &grid, &grid)?;
        let c1 = g1.sample(h, i0 - 1, i1 + 1)?;
        let c2 = g2.sample(h, i0 - 1, i1 + 1)?;
        let (discrete, _) = build_discrete_from_curves(&c1, &c2, LatticeWindow::square(i0, i1)?)?;
        let mut error: f64 = 0.0;
        let mut z_error: f64 = 0.0;
        for ((n, m), p) in discrete.points().iter() {
            let d = p - smooth.point(n, m)?;
            error = error.max(d.amax());
            z_error = z_error.max(d.z.abs());
        }
        let prev = rows.last();
        rows.push(ConvergenceRow {
            h,
            error,
            z_error,
            ratio: prev.map(|r| r.error / error),
            z_ratio: prev.map(|r| r.z_error / z_error),
        });
    }
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::improper::{build_discrete_from_potentials, PotentialData};
    use crate::lattice::{DiscreteCurve, Point2};
    use crate::proper::build_discrete_proper;

    fn bilinear(r: i64) -> LatticeSurface {
        let w = LatticeWindow::square(-r, r).unwrap();
        let pts = SiteMap::from_fn(w, |n, m| Point3::new(n as f64, m as f64, (n * m) as f64));
        LatticeSurface::new(1.0, 1.0, SphereKind::Improper, pts).unwrap()
    }

    fn circle_curves(eps: f64, q: f64, r: i64) -> (DiscreteCurve, DiscreteCurve) {
        let theta = 2.0 / eps * (eps * q / 2.0).atan();
        let curve = |k: i64| {
            let t = eps * theta * k as f64;
            Point2::new(t.cos(), t.sin())
        };
        (
            DiscreteCurve::from_fn(eps, -r, r, curve).unwrap(),
            DiscreteCurve::from_fn(eps, -r, r, curve).unwrap(),
        )
    }

    #[test]
    fn bilinear_surface_passes_everything() {
        let f = bilinear(4);
        let tol = Tolerances::default();
        let (report, ex) = verify_surface(&f, &tol, &[1.0, 2.0]).unwrap();
        assert!(report.pass(), "{}", report.table());
        assert!(report.get("coplanarity").unwrap().residual <= 1e-12);
        assert_eq!(report.get("parallel-normals").unwrap().residual, 0.0);
        for (n, m) in LatticeWindow::square(-3, 3).unwrap().sites() {
            assert_eq!(ex.data.omega_at(n, m), Some(1.0));
            assert_eq!(ex.data.a_at(n, m), Some(0.0));
            assert_eq!(ex.data.b_at(n, m), Some(0.0));
        }
        let names: Vec<_> = report.entries.iter().map(|e| e.name.as_str()).collect();
        let mut dedup = names.clone();
        dedup.dedup();
        assert_eq!(names, dedup);
        assert_eq!(report.json_lines().lines().count(), report.entries.len());
    }

    #[test]
    fn noise_fails_coplanarity() {
        let w = LatticeWindow::square(-2, 2).unwrap();
        let pts = SiteMap::from_fn(w, |n, m| {
            let s = (n * 7 + m * 13) as f64;
            Point3::new(s.sin(), (2.0 * s).cos(), (3.0 * s).sin())
        });
        let f = LatticeSurface::new(1.0, 1.0, SphereKind::Improper, pts).unwrap();
        let e = check_coplanarity(&f, 1e-8).unwrap();
        assert!(!e.pass && e.residual > 1e-3);
    }

    #[test]
    fn injected_fault_is_located() {
        let mut f = bilinear(4);
        let p = f.point(1, 2).unwrap();
        f.set_point(1, 2, p + Point3::new(0.1, 0.0, 0.0)).unwrap();
        let e = check_normal_condition(&f, &Tolerances::default()).unwrap();
        assert!(!e.pass);
        let (n, m) = e.worst_site.unwrap();
        assert!((0..=1).contains(&n) && (1..=2).contains(&m));
        let e = check_coplanarity(&f, 1e-8).unwrap();
        assert!(!e.pass);
    }

    #[test]
    fn degenerate_lines_are_flagged() {
        let w = LatticeWindow::square(0, 2).unwrap();
        let f = LatticeSurface::new(1.0, 1.0, SphereKind::Improper, SiteMap::from_fn(w, |_, _| Point3::x())).unwrap();
        let e = check_normal_condition(&f, &Tolerances::default()).unwrap();
        assert_eq!(e.flagged.len(), 4);
    }

    #[test]
    fn discrete_circle_data_recovered() {
        let (g1, g2) = circle_curves(0.5, 1.0, 9);
        let w = LatticeWindow::square(-8, 8).unwrap();
        let (f, built) = build_discrete_from_curves(&g1, &g2, w).unwrap();
        let tol = Tolerances::default();
        let (report, ex) = verify_surface(&f, &tol, &[1.0, 2.0]).unwrap();
        assert!(report.pass(), "{}", report.table());
        for e in check_builder_data(&built, &ex.data, 1e-9) {
            assert!(e.pass, "{e:?}");
        }
    }

    #[test]
    fn perturbed_omega_fails_lax_locally() {
        let (g1, g2) = circle_curves(0.5, 1.0, 7);
        let w = LatticeWindow::square(-6, 6).unwrap();
        let (f, mut d) = build_discrete_from_curves(&g1, &g2, w).unwrap();
        let om = d.omega_at(1, 1).unwrap();
        d.omega.set(1, 1, Some(om + 0.3)).unwrap();
        let entries = check_lax(&d, &f, 1.0, 1e-9).unwrap();
        let (n, m) = entries[0].worst_site.unwrap();
        assert!(!entries[0].pass);
        assert!((0..=1).contains(&n) && (0..=1).contains(&m));
    }

    #[test]
    fn potentials_surface_lattice_and_lax() {
        let p = PotentialData::new(
            crate::lattice::Sequence::from_fn(-4, 5, |k| 1.0 + 0.1 * k as f64),
            crate::lattice::Sequence::from_fn(-4, 5, |k| 0.3 * (k as f64).sin()),
            crate::lattice::Sequence::from_fn(-4, 5, |k| 0.8 - 0.05 * k as f64),
            crate::lattice::Sequence::from_fn(-4, 5, |k| 0.2 * (k as f64).cos()),
            0.5,
            0.4,
            SphereKind::Improper,
        )
        .unwrap();
        let w = LatticeWindow::square(-3, 3).unwrap();
        let (f, built) = build_discrete_from_potentials(&p, 1.0, w).unwrap();
        let tol = Tolerances::default();
        let (report, ex) = verify_surface(&f, &tol, &[1.0, 2.0]).unwrap();
        assert!(report.pass(), "{}", report.table());
        for e in check_builder_data(&built, &ex.data, 1e-9) {
            assert!(e.pass, "{e:?}");
        }
        assert!(check_lattice_equation(&built, 1e-12).iter().all(|e| e.pass));
    }

    #[test]
    fn proper_build_passes_geometry() {
        let p = PotentialData::constant((1.0, 1.0, 1.0, 1.0), (-4, 5), (-4, 5), 0.1, 0.1, SphereKind::Proper).unwrap();
        let w = LatticeWindow::square(-2, 2).unwrap();
        let (f, _) = build_discrete_proper(&p, 1.0, w, 12).unwrap();
        let tol = Tolerances::default();
        assert!(check_coplanarity(&f, tol.coplanarity).unwrap().pass);
        let e = check_normal_condition(&f, &tol).unwrap();
        assert!(e.pass, "{e:?}");
        let ex = extract_data(&f, &tol).unwrap();
        let lattice = check_lattice_equation(&ex.data, 1e-7);
        assert!(lattice.iter().all(|e| e.pass), "{lattice:?}");
    }

    #[test]
    fn trivial_curves_converge_exactly() {
        let axes1 = SmoothCurveSampler::new(|u| Point2::new(u, 0.0), |_| Point2::new(1.0, 0.0), |_| Point2::zeros());
        let axes2 = SmoothCurveSampler::new(|v| Point2::new(0.0, v), |_| Point2::new(0.0, 1.0), |_| Point2::zeros());
        let rows = convergence_study(&axes1, &axes2, (-1.0, 1.0), &[0.2, 0.1, 0.05]).unwrap();
        assert!(rows.iter().all(|r| r.error < 1e-14));
    }

    #[test]
    fn reports_are_deterministic() {
        let (g1, g2) = circle_curves(0.5, 1.0, 6);
        let w = LatticeWindow::square(-5, 5).unwrap();
        let (f, _) = build_discrete_from_curves(&g1, &g2, w).unwrap();
        let tol = Tolerances::default();
        let a = verify_surface(&f, &tol, &[1.0]).unwrap().0.json_lines();
        let b = verify_surface(&f, &tol, &[1.0]).unwrap().0.json_lines();
        assert_eq!(a, b);
    }
}
