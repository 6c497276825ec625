//! Job configuration: the TOML schema and its validation into a [`Job`].

use std::path::{Path, PathBuf};

use affsphere_core::gallery::{DiscreteExample, Profile, SmoothExample};
use affsphere_core::lattice::{LatticeWindow, SphereKind};
use affsphere_core::quadrature::UniformGrid;
use affsphere_core::verify::Tolerances;
use serde::Deserialize;

/// A schema violation, reported with the dotted path of the field.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
#[error("{path}: {message}")]
pub struct ConfigError {
    pub path: String,
    pub message: String,
}

impl ConfigError {
    pub fn new(path: impl Into<String>, message: impl Into<String>) -> Self {
        Self {
            path: path.into(),
            message: message.into(),
        }
    }
}

type Result<T> = std::result::Result<T, ConfigError>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    Curves,
    Potentials,
    Gallery,
    Proper,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct JobConfig {
    pub mode: Option<Mode>,
    /// 0 (improper) or -1 (proper).
    pub h: Option<i64>,
    pub eps: Option<f64>,
    pub delta: Option<f64>,
    pub lambda: Option<f64>,
    /// `n_min:n_max,m_min:m_max`.
    pub window: Option<String>,
    /// Initial truncation order of the Birkhoff factorization.
    pub order: Option<i32>,
    pub curves: Option<FamilyConfig>,
    pub potentials: Option<PotentialsConfig>,
    pub gallery: Option<FamilyConfig>,
    #[serde(default)]
    pub tolerances: Tolerances,
    #[serde(default)]
    pub output: OutputConfig,
}

/// A named curve family with its parameters, or tabulated curves.
#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FamilyConfig {
    /// `trivial-axes`, `circle`, `square`, `genus1`, `graph`, `table`; in the
    /// gallery block, prefixed by `smooth-` or `discrete-`.
    pub name: Option<String>,
    pub q1: Option<f64>,
    pub q2: Option<f64>,
    pub n: Option<u32>,
    pub n1: Option<u32>,
    pub n2: Option<u32>,
    /// Profiles such as `poly:0,0,0,0.5` or `sine:1,2`.
    pub p: Option<String>,
    pub r: Option<String>,
    /// CSV files with columns `k,x,y`.
    pub table1: Option<PathBuf>,
    pub table2: Option<PathBuf>,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PotentialsConfig {
    /// `constant` or `table`.
    pub family: Option<String>,
    pub alpha: Option<f64>,
    pub beta: Option<f64>,
    pub rho: Option<f64>,
    pub sigma: Option<f64>,
    /// CSV with columns `k,alpha,beta,rho,sigma`.
    pub table: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OutputConfig {
    pub dir: PathBuf,
    pub stem: String,
}

impl Default for OutputConfig {
    fn default() -> Self {
        Self {
            dir: PathBuf::from("."),
            stem: "surface".into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum CurveSource {
    TrivialAxes,
    Example(DiscreteExample),
    Table { first: PathBuf, second: PathBuf },
}

#[derive(Debug, Clone, PartialEq)]
pub enum PotentialSource {
    Constant { alpha: f64, beta: f64, rho: f64, sigma: f64 },
    Table(PathBuf),
}

#[derive(Debug, Clone, PartialEq)]
pub enum GallerySource {
    Smooth { example: SmoothExample, ugrid: UniformGrid, vgrid: UniformGrid },
    Discrete(DiscreteExample),
}

#[derive(Debug, Clone, PartialEq)]
pub enum Source {
    Curves(CurveSource),
    Potentials(PotentialSource),
    Proper { potentials: PotentialSource, order: i32 },
    Gallery { name: String, source: GallerySource },
}

/// A validated job.
#[derive(Debug, Clone, PartialEq)]
pub struct Job {
    pub kind: SphereKind,
    pub eps: f64,
    pub delta: f64,
    pub lambda: f64,
    pub window: LatticeWindow,
    pub source: Source,
    pub tolerances: Tolerances,
    pub output: OutputConfig,
}

pub const DEFAULT_ORDER: i32 = 12;

impl JobConfig {
    /// Reads a TOML file; relative table paths are resolved against its
    /// directory.
    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| ConfigError::new(path.display().to_string(), e.to_string()))?;
        let mut config = Self::from_toml(&text)?;
        if let Some(base) = path.parent() {
            config.resolve_paths(base);
        }
        Ok(config)
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| {
            let message = e.message().to_string();
            let path = match e.span() {
                Some(span) => {
                    let line = text[..span.start].matches('\n').count() + 1;
                    format!("line {line}")
                }
                None => "config".into(),
            };
            ConfigError::new(path, message)
        })
    }

    fn resolve_paths(&mut self, base: &Path) {
        let fix = |p: &mut Option<PathBuf>| {
            if let Some(path) = p {
                if path.is_relative() {
                    *path = base.join(&*path);
                }
            }
        };
        for family in [&mut self.curves, &mut self.gallery].into_iter().flatten() {
            fix(&mut family.table1);
            fix(&mut family.table2);
        }
        if let Some(p) = &mut self.potentials {
            fix(&mut p.table);
        }
        if self.output.dir.is_relative() {
            self.output.dir = base.join(&self.output.dir);
        }
    }

    pub fn validate(&self) -> Result<Job> {
        let mode = self.mode.ok_or_else(|| ConfigError::new("mode", "missing; expected curves, potentials, gallery or proper"))?;
        let positive = |name: &str, v: Option<f64>| -> Result<f64> {
            let v = v.unwrap_or(1.0);
            if v > 0.0 && v.is_finite() {
                Ok(v)
            } else {
                Err(ConfigError::new(name, format!("must be positive, got {v}")))
            }
        };
        let eps = positive("eps", self.eps)?;
        let delta = positive("delta", self.delta)?;
        let lambda = self.lambda.unwrap_or(1.0);
        if lambda == 0.0 || !lambda.is_finite() {
            return Err(ConfigError::new("lambda", format!("must be finite and nonzero, got {lambda}")));
        }
        let default_h = if mode == Mode::Proper { -1 } else { 0 };
        let kind = SphereKind::from_h(self.h.unwrap_or(default_h))
            .map_err(|e| ConfigError::new("h", e.to_string()))?;
        let window: LatticeWindow = self
            .window
            .as_deref()
            .unwrap_or("-8:8,-8:8")
            .parse()
            .map_err(|e: affsphere_core::Error| ConfigError::new("window", e.to_string()))?;

        let source = match mode {
            Mode::Curves => {
                require_improper(kind, "curves")?;
                let block = self.curves.as_ref().ok_or_else(|| ConfigError::new("curves", "missing block for mode = curves"))?;
                Source::Curves(curve_source(block, "curves")?)
            }
            Mode::Potentials => {
                require_improper(kind, "potentials")?;
                let block = self.potentials.as_ref().ok_or_else(|| ConfigError::new("potentials", "missing block for mode = potentials"))?;
                Source::Potentials(potential_source(block)?)
            }
            Mode::Proper => {
                let block = self.potentials.as_ref().ok_or_else(|| ConfigError::new("potentials", "missing block for mode = proper"))?;
                let order = self.order.unwrap_or(DEFAULT_ORDER);
                if order < 0 {
                    return Err(ConfigError::new("order", format!("must be nonnegative, got {order}")));
                }
                Source::Proper { potentials: potential_source(block)?, order }
            }
            Mode::Gallery => {
                require_improper(kind, "gallery")?;
                let block = self.gallery.as_ref().ok_or_else(|| ConfigError::new("gallery", "missing block for mode = gallery"))?;
                let name = block.name.clone().ok_or_else(|| ConfigError::new("gallery.name", "missing"))?;
                let source = gallery_source(block, "gallery", eps, delta, window)?;
                Source::Gallery { name, source }
            }
        };
        if let Some(bad) = tolerance_problem(&self.tolerances) {
            return Err(bad);
        }
        Ok(Job {
            kind,
            eps,
            delta,
            lambda,
            window,
            source,
            tolerances: self.tolerances,
            output: self.output.clone(),
        })
    }
}

fn require_improper(kind: SphereKind, mode: &str) -> Result<()> {
    match kind {
        SphereKind::Improper => Ok(()),
        SphereKind::Proper => Err(ConfigError::new("h", format!("mode = {mode} builds improper spheres; use h = 0 or mode = proper"))),
    }
}

fn tolerance_problem(t: &Tolerances) -> Option<ConfigError> {
    [
        ("coplanarity", t.coplanarity),
        ("parallel", t.parallel),
        ("concurrency", t.concurrency),
        ("lattice", t.lattice),
        ("lax", t.lax),
        ("volume", t.volume),
        ("gauss", t.gauss),
        ("data_agreement", t.data_agreement),
    ]
    .into_iter()
    .find(|(_, v)| !(*v >= 0.0 && v.is_finite()))
    .map(|(name, v)| ConfigError::new(format!("tolerances.{name}"), format!("must be a nonnegative number, got {v}")))
}

fn profile(block: &FamilyConfig, field: &str, prefix: &str) -> Result<Profile> {
    let raw = if field == "p" { &block.p } else { &block.r };
    match raw {
        None => Ok(Profile::zero()),
        Some(s) => s.parse().map_err(|e: affsphere_core::Error| ConfigError::new(format!("{prefix}.{field}"), e.to_string())),
    }
}

fn required<T: Copy>(value: Option<T>, path: String) -> Result<T> {
    value.ok_or_else(|| ConfigError::new(path, "missing"))
}

fn positive_count(value: Option<u32>, path: String) -> Result<u32> {
    match required(value, path.clone())? {
        0 => Err(ConfigError::new(path, "must be a positive integer")),
        v => Ok(v),
    }
}

/// Discrete family named `base` (without prefix).
fn discrete_family(block: &FamilyConfig, base: &str, prefix: &str) -> Result<DiscreteExample> {
    let path = |f: &str| format!("{prefix}.{f}");
    Ok(match base {
        "circle" => {
            let q1 = required(block.q1, path("q1"))?;
            let q2 = block.q2.unwrap_or(q1);
            for (f, q) in [("q1", q1), ("q2", q2)] {
                if !(q > 0.0 && q.is_finite()) {
                    return Err(ConfigError::new(path(f), format!("must be positive, got {q}")));
                }
            }
            DiscreteExample::Circle { q1, q2 }
        }
        "square" => {
            let n1 = positive_count(block.n1.or(block.n), path("n1"))?;
            let n2 = positive_count(block.n2.or(Some(n1)), path("n2"))?;
            DiscreteExample::Square { n1, n2 }
        }
        "genus1" => DiscreteExample::Genus1 { n: positive_count(block.n, path("n"))? },
        "graph" => DiscreteExample::Graph {
            p: profile(block, "p", prefix)?,
            r: profile(block, "r", prefix)?,
        },
        other => return Err(ConfigError::new(path("name"), format!("unknown family `{other}`"))),
    })
}

pub fn curve_source(block: &FamilyConfig, prefix: &str) -> Result<CurveSource> {
    let name = block.name.as_deref().ok_or_else(|| ConfigError::new(format!("{prefix}.name"), "missing"))?;
    match name {
        "trivial-axes" => Ok(CurveSource::TrivialAxes),
        "table" => Ok(CurveSource::Table {
            first: block.table1.clone().ok_or_else(|| ConfigError::new(format!("{prefix}.table1"), "missing"))?,
            second: block.table2.clone().ok_or_else(|| ConfigError::new(format!("{prefix}.table2"), "missing"))?,
        }),
        other => Ok(CurveSource::Example(discrete_family(block, other, prefix)?)),
    }
}

pub fn potential_source(block: &PotentialsConfig) -> Result<PotentialSource> {
    match block.family.as_deref().unwrap_or("constant") {
        "constant" => {
            let get = |name: &str, v: Option<f64>| -> Result<f64> {
                let v = required(v, format!("potentials.{name}"))?;
                if v.is_finite() {
                    Ok(v)
                } else {
                    Err(ConfigError::new(format!("potentials.{name}"), "must be finite"))
                }
            };
            let alpha = get("alpha", block.alpha)?;
            let rho = get("rho", block.rho)?;
            for (name, v) in [("alpha", alpha), ("rho", rho)] {
                if v == 0.0 {
                    return Err(ConfigError::new(format!("potentials.{name}"), "must be nonzero"));
                }
            }
            Ok(PotentialSource::Constant {
                alpha,
                beta: get("beta", block.beta)?,
                rho,
                sigma: get("sigma", block.sigma)?,
            })
        }
        "table" => Ok(PotentialSource::Table(
            block.table.clone().ok_or_else(|| ConfigError::new("potentials.table", "missing"))?,
        )),
        other => Err(ConfigError::new("potentials.family", format!("unknown family `{other}`; expected constant or table"))),
    }
}

/// Smooth examples use `eps`, `delta` as grid steps and the window as grid
/// indices.
pub fn gallery_source(
    block: &FamilyConfig,
    prefix: &str,
    eps: f64,
    delta: f64,
    window: LatticeWindow,
) -> Result<GallerySource> {
    let name = block.name.as_deref().ok_or_else(|| ConfigError::new(format!("{prefix}.name"), "missing"))?;
    let (smooth, base) = affsphere_core::gallery::parse_example_name(name)
        .map_err(|e| ConfigError::new(format!("{prefix}.name"), e.to_string()))?;
    if !smooth {
        return Ok(GallerySource::Discrete(discrete_family(block, base, prefix)?));
    }
    let example = match base {
        "circle" => SmoothExample::Circle,
        "square" => SmoothExample::Square,
        "genus1" => SmoothExample::Genus1,
        _ => SmoothExample::Graph {
            p: profile(block, "p", prefix)?,
            r: profile(block, "r", prefix)?,
        },
    };
    let grid = |step, lo, hi| UniformGrid::new(step, lo, hi).map_err(|e| ConfigError::new("window", e.to_string()));
    Ok(GallerySource::Smooth {
        example,
        ugrid: grid(eps, window.n_min, window.n_max)?,
        vgrid: grid(delta, window.m_min, window.m_max)?,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minimal_curves_job() {
        let cfg = JobConfig::from_toml("mode = \"curves\"\n[curves]\nname = \"trivial-axes\"\n").unwrap();
        let job = cfg.validate().unwrap();
        assert_eq!(job.source, Source::Curves(CurveSource::TrivialAxes));
        assert_eq!(job.kind, SphereKind::Improper);
        assert_eq!(job.window, "-8:8,-8:8".parse().unwrap());
    }

    #[test]
    fn errors_carry_field_paths() {
        let cases = [
            ("eps = 1.0", "mode"),
            ("mode = \"curves\"\neps = -1.0\n[curves]\nname = \"circle\"\nq1 = 2.0", "eps"),
            ("mode = \"curves\"\nlambda = 0.0\n[curves]\nname = \"trivial-axes\"", "lambda"),
            ("mode = \"curves\"\n[curves]\nname = \"circle\"", "curves.q1"),
            ("mode = \"curves\"\n[curves]\nname = \"square\"\nn1 = 0", "curves.n1"),
            ("mode = \"potentials\"\n[potentials]\nalpha = 0.0\nbeta = 1.0\nrho = 1.0\nsigma = 1.0", "potentials.alpha"),
            ("mode = \"proper\"", "potentials"),
            ("mode = \"gallery\"\n[gallery]\nname = \"discrete-torus\"", "gallery.name"),
            ("mode = \"curves\"\nh = -1\n[curves]\nname = \"trivial-axes\"", "h"),
            ("mode = \"curves\"\nwindow = \"1:2\"\n[curves]\nname = \"trivial-axes\"", "window"),
            ("mode = \"curves\"\n[curves]\nname = \"trivial-axes\"\n[tolerances]\nlax = -1.0", "tolerances.lax"),
        ];
        for (text, path) in cases {
            let err = JobConfig::from_toml(text).and_then(|c| c.validate()).unwrap_err();
            assert_eq!(err.path, path, "{text}: {err}");
        }
    }

    #[test]
    fn unknown_keys_are_rejected_with_location() {
        let err = JobConfig::from_toml("mode = \"curves\"\nepsilon = 1.0\n").unwrap_err();
        assert_eq!(err.path, "line 2");
        assert!(err.message.contains("epsilon"));
    }

    #[test]
    fn gallery_smooth_uses_window_as_grid() {
        let cfg = JobConfig::from_toml(
            "mode = \"gallery\"\neps = 0.1\ndelta = 0.2\nwindow = \"-3:4,0:5\"\n[gallery]\nname = \"smooth-circle\"",
        )
        .unwrap();
        match cfg.validate().unwrap().source {
            Source::Gallery { source: GallerySource::Smooth { ugrid, vgrid, .. }, .. } => {
                assert_eq!((ugrid.step, ugrid.lo, ugrid.hi), (0.1, -3, 4));
                assert_eq!((vgrid.step, vgrid.lo, vgrid.hi), (0.2, 0, 5));
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn tolerance_overrides_keep_defaults() {
        let cfg = JobConfig::from_toml("mode = \"curves\"\n[curves]\nname = \"trivial-axes\"\n[tolerances]\nlax = 1e-6").unwrap();
        let job = cfg.validate().unwrap();
        assert_eq!(job.tolerances.lax, 1e-6);
        assert_eq!(job.tolerances.coplanarity, Tolerances::default().coplanarity);
    }
}
