//! OBJ and CSV interchange.
//!
//! The OBJ header carries the lattice metadata as comments:
//!
//! ```text
//! # affsphere lattice surface
//! # window -8:8,-8:8
//! # eps 1
//! # delta 1
//! # kind improper
//! # xi0 0 0 1
//! ```
//!
//! Vertices follow in row-major order (`m` outer, `n` inner), one quad face
//! per cell.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use affsphere_core::lattice::{LatticeSurface, LatticeWindow, Point3, SiteMap, SphereKind, SurfaceData};

#[derive(Debug, thiserror::Error)]
pub enum ExportError {
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}:{line}: {message}")]
    Parse { path: String, line: usize, message: String },
    #[error(transparent)]
    Core(#[from] affsphere_core::Error),
}

type Result<T> = std::result::Result<T, ExportError>;

/// 17 significant digits, enough to round-trip any `f64`.
pub fn real(x: f64) -> String {
    format!("{x:.16e}")
}

fn write_file(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).map_err(|source| ExportError::Io {
        path: path.display().to_string(),
        source,
    })
}

fn kind_name(kind: SphereKind) -> &'static str {
    match kind {
        SphereKind::Improper => "improper",
        SphereKind::Proper => "proper",
    }
}

/// 1-based vertex index of a site.
pub fn vertex_index(w: &LatticeWindow, n: i64, m: i64) -> usize {
    ((m - w.m_min) as usize) * w.n_len() + (n - w.n_min) as usize + 1
}

pub fn obj_string(f: &LatticeSurface) -> String {
    let w = f.window();
    let mut out = String::new();
    out.push_str("# affsphere lattice surface\n");
    let _ = writeln!(out, "# window {w}");
    let _ = writeln!(out, "# eps {}", real(f.eps));
    let _ = writeln!(out, "# delta {}", real(f.delta));
    let _ = writeln!(out, "# kind {}", kind_name(f.kind));
    let _ = writeln!(out, "# xi0 {} {} {}", real(f.xi0.x), real(f.xi0.y), real(f.xi0.z));
    for m in w.m_min..=w.m_max {
        for n in w.n_min..=w.n_max {
            let p = f.points().at(n, m).copied().unwrap_or_else(|_| Point3::zeros());
            let _ = writeln!(out, "v {} {} {}", real(p.x), real(p.y), real(p.z));
        }
    }
    for m in w.m_min..w.m_max {
        for n in w.n_min..w.n_max {
            let _ = writeln!(
                out,
                "f {} {} {} {}",
                vertex_index(&w, n, m),
                vertex_index(&w, n + 1, m),
                vertex_index(&w, n + 1, m + 1),
                vertex_index(&w, n, m + 1)
            );
        }
    }
    out
}

pub fn export_obj(f: &LatticeSurface, path: &Path) -> Result<()> {
    write_file(path, &obj_string(f))
}

/// Metadata overrides for files without (or with wrong) header comments.
#[derive(Debug, Clone, Default)]
pub struct ObjOverrides {
    pub window: Option<LatticeWindow>,
    pub eps: Option<f64>,
    pub delta: Option<f64>,
    pub kind: Option<SphereKind>,
}

pub fn import_obj(path: &Path, overrides: &ObjOverrides) -> Result<LatticeSurface> {
    let text = fs::read_to_string(path).map_err(|source| ExportError::Io {
        path: path.display().to_string(),
        source,
    })?;
    parse_obj(&text, &path.display().to_string(), overrides)
}

pub fn parse_obj(text: &str, source: &str, overrides: &ObjOverrides) -> Result<LatticeSurface> {
    let err = |line: usize, message: String| ExportError::Parse {
        path: source.to_string(),
        line,
        message,
    };
    let (mut window, mut eps, mut delta, mut kind, mut xi0) = (None, None, None, None, None);
    let mut vertices = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line_no = i + 1;
        let mut parts = raw.split_whitespace();
        let number = |s: Option<&str>| -> Result<f64> {
            s.ok_or_else(|| err(line_no, "missing number".into()))?
                .parse::<f64>()
                .map_err(|e| err(line_no, e.to_string()))
        };
        match parts.next() {
            Some("#") => match parts.next() {
                Some("window") => {
                    let spec = parts.next().ok_or_else(|| err(line_no, "missing window".into()))?;
                    window = Some(spec.parse::<LatticeWindow>().map_err(|e| err(line_no, e.to_string()))?);
                }
                Some("eps") => eps = Some(number(parts.next())?),
                Some("delta") => delta = Some(number(parts.next())?),
                Some("kind") => {
                    kind = Some(match parts.next() {
                        Some("improper") => SphereKind::Improper,
                        Some("proper") => SphereKind::Proper,
                        other => return Err(err(line_no, format!("unknown kind {other:?}"))),
                    })
                }
                Some("xi0") => {
                    xi0 = Some(Point3::new(number(parts.next())?, number(parts.next())?, number(parts.next())?))
                }
                _ => {}
            },
            Some("v") => vertices.push(Point3::new(number(parts.next())?, number(parts.next())?, number(parts.next())?)),
            _ => {}
        }
    }
    let window = overrides
        .window
        .or(window)
        .ok_or_else(|| err(0, "no window in header; pass --window".into()))?;
    if vertices.len() != window.len() {
        return Err(err(
            0,
            format!("window {window} needs {} vertices, file has {}", window.len(), vertices.len()),
        ));
    }
    let points = SiteMap::from_fn(window, |n, m| vertices[vertex_index(&window, n, m) - 1]);
    let surface = LatticeSurface::with_xi0(
        overrides.eps.or(eps).unwrap_or(1.0),
        overrides.delta.or(delta).unwrap_or(1.0),
        overrides.kind.or(kind).unwrap_or(SphereKind::Improper),
        xi0.unwrap_or_else(Point3::z),
        points,
    )?;
    Ok(surface)
}

fn cell(v: Option<f64>) -> String {
    v.map(real).unwrap_or_default()
}

/// `n,m,x,y,z,omega,g,singular` per site; empty cells where undefined.
pub fn surface_csv(f: &LatticeSurface, data: &SurfaceData) -> String {
    let w = f.window();
    let mut out = String::from("n,m,x,y,z,omega,g,singular\n");
    for m in w.m_min..=w.m_max {
        for n in w.n_min..=w.n_max {
            let p = f.points().at(n, m).copied().unwrap_or_else(|_| Point3::zeros());
            let omega = data.omega_at(n, m);
            let singular = match omega {
                Some(_) => u8::from(data.is_singular(n, m)).to_string(),
                None => String::new(),
            };
            let _ = writeln!(
                out,
                "{n},{m},{},{},{},{},{},{singular}",
                real(p.x),
                real(p.y),
                real(p.z),
                cell(omega),
                cell(data.g_at(n, m)),
            );
        }
    }
    out
}

/// One-index table of `A_n` (or `B_m`), read along the row (column) closest
/// to the origin that has a value.
pub fn one_index_csv(data: &SurfaceData, along_n: bool) -> String {
    let w = data.window();
    let (label, lo, hi, other_lo, other_hi) = if along_n {
        ("n,A", w.n_min, w.n_max, w.m_min, w.m_max)
    } else {
        ("m,B", w.m_min, w.m_max, w.n_min, w.n_max)
    };
    let mut others: Vec<i64> = (other_lo..=other_hi).collect();
    others.sort_by_key(|k| k.abs());
    let mut out = format!("{label}\n");
    for k in lo..=hi {
        let value = others.iter().find_map(|&j| if along_n { data.a_at(k, j) } else { data.b_at(j, k) });
        let _ = writeln!(out, "{k},{}", cell(value));
    }
    out
}

pub fn export_csv(f: &LatticeSurface, data: &SurfaceData, surface: &Path, a: &Path, b: &Path) -> Result<()> {
    write_file(surface, &surface_csv(f, data))?;
    write_file(a, &one_index_csv(data, true))?;
    write_file(b, &one_index_csv(data, false))
}

pub fn write_text(path: &Path, text: &str) -> Result<()> {
    write_file(path, text)
}

#[cfg(test)]
mod tests {
    use super::*;
    use affsphere_core::lattice::LatticeWindow;

    fn bilinear(w: LatticeWindow) -> LatticeSurface {
        let pts = SiteMap::from_fn(w, |n, m| Point3::new(n as f64 * 0.1, m as f64 / 3.0, (n * m) as f64 / 30.0));
        LatticeSurface::new(0.1, 1.0 / 3.0, SphereKind::Improper, pts).unwrap()
    }

    #[test]
    fn two_by_two_window() {
        let f = bilinear(LatticeWindow::square(0, 1).unwrap());
        let obj = obj_string(&f);
        assert_eq!(obj.lines().filter(|l| l.starts_with("v ")).count(), 4);
        let faces: Vec<_> = obj.lines().filter(|l| l.starts_with("f ")).collect();
        assert_eq!(faces, vec!["f 1 2 4 3"]);
    }

    #[test]
    fn seventeen_square_window_counts() {
        let f = bilinear(LatticeWindow::square(-8, 8).unwrap());
        let obj = obj_string(&f);
        assert_eq!(obj.lines().filter(|l| l.starts_with("v ")).count(), 289);
        assert_eq!(obj.lines().filter(|l| l.starts_with("f ")).count(), 256);
    }

    #[test]
    fn obj_round_trip_is_bitwise() {
        let f = bilinear(LatticeWindow::new(-3, 2, 1, 4).unwrap());
        let back = parse_obj(&obj_string(&f), "mem", &ObjOverrides::default()).unwrap();
        assert_eq!(back.window(), f.window());
        assert_eq!(back.eps.to_bits(), f.eps.to_bits());
        assert_eq!(back.delta.to_bits(), f.delta.to_bits());
        for ((n, m), p) in f.points().iter() {
            let q = back.point(n, m).unwrap();
            for k in 0..3 {
                assert_eq!(p[k].to_bits(), q[k].to_bits());
            }
        }
    }

    #[test]
    fn obj_without_header_needs_window() {
        let text = "v 0 0 0\nv 1 0 0\n";
        assert!(parse_obj(text, "mem", &ObjOverrides::default()).is_err());
        let o = ObjOverrides {
            window: Some(LatticeWindow::new(0, 1, 0, 0).unwrap()),
            ..Default::default()
        };
        let f = parse_obj(text, "mem", &o).unwrap();
        assert_eq!(f.point(1, 0).unwrap(), Point3::x());
    }

    #[test]
    fn csv_layout() {
        let w = LatticeWindow::square(0, 1).unwrap();
        let f = bilinear(w);
        let data = SurfaceData::new(
            0.1,
            1.0,
            SphereKind::Improper,
            SiteMap::from_fn(w, |n, m| (n == 0 && m == 0).then_some(1.0)),
            SiteMap::from_fn(w, |n, _| Some(n as f64)),
            SiteMap::from_fn(w, |_, m| Some(-(m as f64))),
        )
        .unwrap();
        let csv = surface_csv(&f, &data);
        let lines: Vec<_> = csv.lines().collect();
        assert_eq!(lines[0], "n,m,x,y,z,omega,g,singular");
        assert_eq!(lines.len(), 5);
        assert!(lines[1].starts_with("0,0,") && lines[1].ends_with(",0"));
        assert!(lines[2].starts_with("1,0,") && lines[2].ends_with(",,,"));
        assert_eq!(one_index_csv(&data, true), format!("n,A\n0,{}\n1,{}\n", real(0.0), real(1.0)));
        assert_eq!(one_index_csv(&data, false), format!("m,B\n0,{}\n1,{}\n", real(-0.0), real(-1.0)));
    }
}
