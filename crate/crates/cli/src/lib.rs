//! The `affsphere` command: build, verify and export lattice affine spheres.
//!
//! Exit codes: 0 when every enabled check passes, 1 when a check or a build
//! fails, 2 for configuration and usage errors.

pub mod config;
pub mod export;

use std::ffi::OsString;
use std::path::{Path, PathBuf};

use affsphere_core::gallery::{cross_check, discrete_example, smooth_example, ExampleCurves};
use affsphere_core::improper::{associated_family, build_discrete_from_curves, build_discrete_from_potentials, PotentialData};
use affsphere_core::lattice::{DiscreteCurve, LatticeSurface, LatticeWindow, Point2, Sequence, SphereKind, SurfaceData};
use affsphere_core::proper::build_discrete_proper;
use affsphere_core::verify::{check_builder_data, extract_data, verify_surface, CheckEntry, Tolerances, VerificationReport};
use clap::{Args, Parser, Subcommand};

use config::{ConfigError, CurveSource, FamilyConfig, GallerySource, Job, JobConfig, Mode, PotentialSource, PotentialsConfig, Source};
use export::{ExportError, ObjOverrides};

/// Spectral parameters at which Lax compatibility is checked.
pub const LAX_LAMBDAS: [f64; 2] = [1.0, 2.0];

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("configuration error: {0}")]
    Config(#[from] ConfigError),
    #[error("usage error: {0}")]
    Usage(String),
    #[error("cannot read input: {0}")]
    Input(ExportError),
    #[error("cannot write output: {0}")]
    Output(ExportError),
    #[error("build failed: {0}")]
    Core(#[from] affsphere_core::Error),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) | CliError::Usage(_) | CliError::Input(_) => 2,
            CliError::Output(_) | CliError::Core(_) => 1,
        }
    }
}

#[derive(Parser, Debug)]
#[command(name = "affsphere", version, about = "Discrete indefinite affine spheres", allow_negative_numbers = true)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Build a surface from a job file and/or flags, write it and its report.
    Generate(GenerateArgs),
    /// Run the verification suite on a surface OBJ file.
    Verify(VerifyArgs),
    /// Convert a surface OBJ file into CSV tables of points and data.
    Export(ExportArgs),
    /// Emit a named worked example and cross-check it.
    Gallery(GalleryArgs),
}

#[derive(Args, Debug, Default, Clone)]
struct FamilyArgs {
    /// Sets both q1 and q2.
    #[arg(long)]
    q: Option<f64>,
    #[arg(long)]
    q1: Option<f64>,
    #[arg(long)]
    q2: Option<f64>,
    /// Sets N (genus-one) or both N1 and N2 (square).
    #[arg(long)]
    n: Option<u32>,
    #[arg(long)]
    n1: Option<u32>,
    #[arg(long)]
    n2: Option<u32>,
    /// Graph profile, e.g. `poly:0,0,0,0.5` or `sine:1,2`.
    #[arg(long, allow_hyphen_values = true)]
    p: Option<String>,
    #[arg(long, allow_hyphen_values = true)]
    r: Option<String>,
    /// CSV with columns k,x,y.
    #[arg(long)]
    table1: Option<PathBuf>,
    #[arg(long)]
    table2: Option<PathBuf>,
}

impl FamilyArgs {
    fn merge_into(&self, block: &mut FamilyConfig) {
        let q1 = self.q1.or(self.q);
        let q2 = self.q2.or(self.q);
        block.q1 = q1.or(block.q1);
        block.q2 = q2.or(block.q2);
        block.n = self.n.or(block.n);
        block.n1 = self.n1.or(self.n).or(block.n1);
        block.n2 = self.n2.or(self.n).or(block.n2);
        block.p = self.p.clone().or(block.p.take());
        block.r = self.r.clone().or(block.r.take());
        block.table1 = self.table1.clone().or(block.table1.take());
        block.table2 = self.table2.clone().or(block.table2.take());
    }
}

#[derive(Args, Debug, Default, Clone)]
struct LatticeArgs {
    #[arg(long)]
    eps: Option<f64>,
    #[arg(long)]
    delta: Option<f64>,
    /// `n_min:n_max,m_min:m_max`.
    #[arg(long, allow_hyphen_values = true)]
    window: Option<String>,
    /// Output directory.
    #[arg(long)]
    out: Option<PathBuf>,
    /// File name stem of the outputs.
    #[arg(long)]
    stem: Option<String>,
    /// Print the report as JSON lines instead of a table.
    #[arg(long)]
    json: bool,
}

#[derive(Args, Debug)]
#[command(allow_negative_numbers = true)]
struct GenerateArgs {
    /// TOML job file; flags override its values.
    #[arg(long)]
    config: Option<PathBuf>,
    /// curves | potentials | gallery | proper
    #[arg(long)]
    mode: Option<String>,
    /// 0 (improper) or -1 (proper).
    #[arg(long)]
    h: Option<i64>,
    #[arg(long)]
    lambda: Option<f64>,
    #[arg(long)]
    order: Option<i32>,
    /// Curve family: trivial-axes, circle, square, genus1, graph, table.
    #[arg(long)]
    curves: Option<String>,
    /// Example name for mode = gallery.
    #[arg(long)]
    name: Option<String>,
    #[arg(long)]
    alpha: Option<f64>,
    #[arg(long)]
    beta: Option<f64>,
    #[arg(long)]
    rho: Option<f64>,
    #[arg(long)]
    sigma: Option<f64>,
    /// CSV with columns k,alpha,beta,rho,sigma.
    #[arg(long)]
    potential_table: Option<PathBuf>,
    #[command(flatten)]
    family: FamilyArgs,
    #[command(flatten)]
    lattice: LatticeArgs,
}

#[derive(Args, Debug)]
#[command(allow_negative_numbers = true)]
struct GalleryArgs {
    /// smooth-{circle,square,genus1,graph} or discrete-{circle,square,genus1,graph}
    #[arg(long)]
    name: String,
    #[command(flatten)]
    family: FamilyArgs,
    #[command(flatten)]
    lattice: LatticeArgs,
}

#[derive(Args, Debug, Clone)]
struct SurfaceFileArgs {
    /// Surface OBJ file.
    surface: PathBuf,
    #[arg(long)]
    eps: Option<f64>,
    #[arg(long)]
    delta: Option<f64>,
    /// improper | proper
    #[arg(long)]
    kind: Option<String>,
    #[arg(long, allow_hyphen_values = true)]
    window: Option<String>,
}

impl SurfaceFileArgs {
    fn load(&self) -> Result<LatticeSurface, CliError> {
        let kind = match self.kind.as_deref() {
            None => None,
            Some("improper") => Some(SphereKind::Improper),
            Some("proper") => Some(SphereKind::Proper),
            Some(other) => return Err(CliError::Usage(format!("--kind must be improper or proper, got `{other}`"))),
        };
        let window = match &self.window {
            None => None,
            Some(w) => Some(w.parse::<LatticeWindow>().map_err(|e| CliError::Usage(format!("--window: {e}")))?),
        };
        let overrides = ObjOverrides {
            window,
            eps: self.eps,
            delta: self.delta,
            kind,
        };
        export::import_obj(&self.surface, &overrides).map_err(CliError::Input)
    }
}

#[derive(Args, Debug)]
#[command(allow_negative_numbers = true)]
struct VerifyArgs {
    #[command(flatten)]
    file: SurfaceFileArgs,
    /// TOML file with a [tolerances] block or bare tolerance keys.
    #[arg(long)]
    tolerances: Option<PathBuf>,
    #[arg(long)]
    json: bool,
}

#[derive(Args, Debug)]
#[command(allow_negative_numbers = true)]
struct ExportArgs {
    #[command(flatten)]
    file: SurfaceFileArgs,
    /// Output CSV of points and omega; A and B go next to it.
    #[arg(long)]
    csv: PathBuf,
}

/// Surface, its data and the verification report of one job.
pub struct Outcome {
    pub surface: LatticeSurface,
    pub data: SurfaceData,
    pub report: VerificationReport,
}

/// Parses `args` (including the program name), runs the command, and
/// returns the exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    if let Err(e) = configure_threads() {
        eprintln!("{e}");
        return e.exit_code();
    }
    match dispatch(cli.command) {
        Ok(pass) => i32::from(!pass),
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

fn configure_threads() -> Result<(), CliError> {
    let Ok(raw) = std::env::var("AFFSPHERE_THREADS") else {
        return Ok(());
    };
    let threads: usize = raw
        .trim()
        .parse()
        .ok()
        .filter(|&t| t > 0)
        .ok_or_else(|| CliError::Usage(format!("AFFSPHERE_THREADS must be a positive integer, got `{raw}`")))?;
    // A second call in the same process keeps the first pool.
    let _ = rayon::ThreadPoolBuilder::new().num_threads(threads).build_global();
    Ok(())
}

fn dispatch(command: Command) -> Result<bool, CliError> {
    match command {
        Command::Generate(args) => {
            let config = generate_config(&args)?;
            execute(&config.validate()?, args.lattice.json)
        }
        Command::Gallery(args) => {
            let config = gallery_config(&args);
            execute(&config.validate()?, args.lattice.json)
        }
        Command::Verify(args) => {
            let surface = args.file.load()?;
            let tol = match &args.tolerances {
                None => Tolerances::default(),
                Some(path) => read_tolerances(path)?,
            };
            let (report, _) = verify_surface(&surface, &tol, &LAX_LAMBDAS)?;
            print_report(&report, args.json);
            Ok(report.pass())
        }
        Command::Export(args) => {
            let surface = args.file.load()?;
            let extracted = extract_data(&surface, &Tolerances::default())?;
            let (a, b) = sibling_tables(&args.csv);
            if let Some(dir) = args.csv.parent().filter(|d| !d.as_os_str().is_empty()) {
                std::fs::create_dir_all(dir).map_err(|source| {
                    CliError::Output(ExportError::Io {
                        path: dir.display().to_string(),
                        source,
                    })
                })?;
            }
            export::export_csv(&surface, &extracted.data, &args.csv, &a, &b).map_err(CliError::Output)?;
            eprintln!("wrote {}, {}, {}", args.csv.display(), a.display(), b.display());
            Ok(true)
        }
    }
}

fn read_tolerances(path: &Path) -> Result<Tolerances, CliError> {
    #[derive(serde::Deserialize)]
    struct Wrapped {
        tolerances: Tolerances,
    }
    let text = std::fs::read_to_string(path)
        .map_err(|e| ConfigError::new(path.display().to_string(), e.to_string()))?;
    if let Ok(w) = toml::from_str::<Wrapped>(&text) {
        return Ok(w.tolerances);
    }
    toml::from_str::<Tolerances>(&text).map_err(|e| ConfigError::new("tolerances", e.message().to_string()).into())
}

fn sibling_tables(csv: &Path) -> (PathBuf, PathBuf) {
    let stem = csv.file_stem().and_then(|s| s.to_str()).unwrap_or("surface");
    let dir = csv.parent().unwrap_or_else(|| Path::new(""));
    (dir.join(format!("{stem}_A.csv")), dir.join(format!("{stem}_B.csv")))
}

fn parse_mode(raw: &str) -> Result<Mode, CliError> {
    match raw {
        "curves" => Ok(Mode::Curves),
        "potentials" => Ok(Mode::Potentials),
        "gallery" => Ok(Mode::Gallery),
        "proper" => Ok(Mode::Proper),
        other => Err(ConfigError::new("mode", format!("unknown mode `{other}`")).into()),
    }
}

fn apply_lattice(config: &mut JobConfig, lattice: &LatticeArgs) {
    config.eps = lattice.eps.or(config.eps);
    config.delta = lattice.delta.or(config.delta);
    config.window = lattice.window.clone().or(config.window.take());
    if let Some(dir) = &lattice.out {
        config.output.dir = dir.clone();
    }
    if let Some(stem) = &lattice.stem {
        config.output.stem = stem.clone();
    }
}

fn generate_config(args: &GenerateArgs) -> Result<JobConfig, CliError> {
    let mut config = match &args.config {
        Some(path) => JobConfig::from_file(path)?,
        None => JobConfig::default(),
    };
    if let Some(mode) = &args.mode {
        config.mode = Some(parse_mode(mode)?);
    }
    config.h = args.h.or(config.h);
    config.lambda = args.lambda.or(config.lambda);
    config.order = args.order.or(config.order);
    apply_lattice(&mut config, &args.lattice);

    let family_flags = args.curves.is_some() || args.name.is_some() || args.family.q.is_some();
    if matches!(config.mode, Some(Mode::Curves)) || args.curves.is_some() {
        let block = config.curves.get_or_insert_with(FamilyConfig::default);
        block.name = args.curves.clone().or(block.name.take());
        args.family.merge_into(block);
    }
    if matches!(config.mode, Some(Mode::Gallery)) || (args.name.is_some() && family_flags) {
        let block = config.gallery.get_or_insert_with(FamilyConfig::default);
        block.name = args.name.clone().or(block.name.take());
        args.family.merge_into(block);
    }
    let potential_flags = [args.alpha, args.beta, args.rho, args.sigma].iter().any(Option::is_some) || args.potential_table.is_some();
    if potential_flags || matches!(config.mode, Some(Mode::Potentials | Mode::Proper)) {
        let block = config.potentials.get_or_insert_with(PotentialsConfig::default);
        block.alpha = args.alpha.or(block.alpha);
        block.beta = args.beta.or(block.beta);
        block.rho = args.rho.or(block.rho);
        block.sigma = args.sigma.or(block.sigma);
        if let Some(table) = &args.potential_table {
            block.table = Some(table.clone());
            block.family = Some("table".into());
        }
    }
    Ok(config)
}

fn gallery_config(args: &GalleryArgs) -> JobConfig {
    let mut block = FamilyConfig {
        name: Some(args.name.clone()),
        ..Default::default()
    };
    args.family.merge_into(&mut block);
    let mut config = JobConfig {
        mode: Some(Mode::Gallery),
        gallery: Some(block),
        ..Default::default()
    };
    config.output.stem = args.name.clone();
    apply_lattice(&mut config, &args.lattice);
    config
}

fn print_report(report: &VerificationReport, json: bool) {
    if json {
        print!("{}", report.json_lines());
    } else {
        print!("{}", report.table());
    }
}

fn execute(job: &Job, json: bool) -> Result<bool, CliError> {
    let outcome = build(job)?;
    print_report(&outcome.report, json);
    write_outputs(job, &outcome)?;
    Ok(outcome.report.pass())
}

fn write_outputs(job: &Job, outcome: &Outcome) -> Result<(), CliError> {
    let dir = &job.output.dir;
    std::fs::create_dir_all(dir).map_err(|source| {
        CliError::Output(ExportError::Io {
            path: dir.display().to_string(),
            source,
        })
    })?;
    let stem = &job.output.stem;
    let path = |suffix: &str| dir.join(format!("{stem}{suffix}"));
    let out = |r: Result<(), ExportError>| r.map_err(CliError::Output);
    out(export::export_obj(&outcome.surface, &path(".obj")))?;
    out(export::export_csv(&outcome.surface, &outcome.data, &path(".csv"), &path("_A.csv"), &path("_B.csv")))?;
    out(export::write_text(&path("_report.txt"), &outcome.report.table()))?;
    out(export::write_text(&path("_report.jsonl"), &outcome.report.json_lines()))?;
    eprintln!("wrote {}", path(".obj").display());
    Ok(())
}

/// Builds the surface of a validated job and verifies it.
pub fn build(job: &Job) -> Result<Outcome, CliError> {
    let tol = &job.tolerances;
    match &job.source {
        Source::Curves(source) => {
            let (g1, g2) = curves(source, job)?;
            let (g1, g2) = if job.lambda == 1.0 { (g1, g2) } else { associated_family(&g1, &g2, job.lambda)? };
            let (surface, built) = build_discrete_from_curves(&g1, &g2, job.window)?;
            improper_outcome(surface, built, tol)
        }
        Source::Potentials(source) => {
            let p = potentials(source, job)?;
            let (surface, built) = build_discrete_from_potentials(&p, job.lambda, job.window)?;
            improper_outcome(surface, built, tol)
        }
        Source::Proper { potentials: source, order } => {
            let p = potentials(source, job)?;
            let (surface, frames) = build_discrete_proper(&p, job.lambda, job.window, *order)?;
            let (mut report, extracted) = verify_surface(&surface, tol, &LAX_LAMBDAS)?;
            let consistency = frames.max_consistency().abs();
            report.push(CheckEntry {
                name: "frame-consistency".into(),
                residual: consistency,
                worst_site: None,
                tolerance: affsphere_core::proper::CONSISTENCY_TOL,
                pass: consistency <= affsphere_core::proper::CONSISTENCY_TOL,
                flagged: Vec::new(),
                note: format!("largest truncation order {}", frames.max_order()),
            });
            let twist = frames.max_twist_residual();
            report.push(CheckEntry {
                name: "frame-twist".into(),
                residual: twist,
                worst_site: None,
                tolerance: 1e-8,
                pass: twist <= 1e-8,
                flagged: Vec::new(),
                note: String::new(),
            });
            Ok(Outcome {
                surface,
                data: extracted.data,
                report,
            })
        }
        Source::Gallery { source, .. } => {
            let bundle = match source {
                GallerySource::Smooth { example, ugrid, vgrid } => smooth_example(example, ugrid, vgrid)?,
                GallerySource::Discrete(example) => discrete_example(example, job.eps, job.delta, job.window)?,
            };
            let report = cross_check(&bundle)?;
            Ok(Outcome {
                surface: bundle.surface,
                data: bundle.data,
                report,
            })
        }
    }
}

fn improper_outcome(surface: LatticeSurface, built: SurfaceData, tol: &Tolerances) -> Result<Outcome, CliError> {
    let (mut report, extracted) = verify_surface(&surface, tol, &LAX_LAMBDAS)?;
    report.extend(check_builder_data(&built, &extracted.data, tol.data_agreement));
    Ok(Outcome {
        surface,
        data: built,
        report,
    })
}

fn curves(source: &CurveSource, job: &Job) -> Result<(DiscreteCurve, DiscreteCurve), CliError> {
    let w = job.window;
    let (eps, delta) = (job.eps, job.delta);
    match source {
        CurveSource::TrivialAxes => Ok((
            DiscreteCurve::from_fn(eps, w.n_min - 1, w.n_max + 1, |k| Point2::new(eps * k as f64, 0.0))?,
            DiscreteCurve::from_fn(delta, w.m_min - 1, w.m_max + 1, |k| Point2::new(0.0, delta * k as f64))?,
        )),
        CurveSource::Example(example) => match discrete_example(example, eps, delta, w)?.curves {
            ExampleCurves::Discrete { g1, g2 } => Ok((g1, g2)),
            ExampleCurves::Smooth { .. } => unreachable!("discrete examples carry discrete curves"),
        },
        CurveSource::Table { first, second } => Ok((read_curve(first, eps)?, read_curve(second, delta)?)),
    }
}

fn read_rows(path: &Path, columns: &[&str]) -> Result<Vec<(i64, Vec<f64>)>, CliError> {
    let input = |message: String| CliError::Input(ExportError::Parse {
        path: path.display().to_string(),
        line: 0,
        message,
    });
    let mut reader = csv::Reader::from_path(path).map_err(|e| input(e.to_string()))?;
    let headers = reader.headers().map_err(|e| input(e.to_string()))?.clone();
    let expected: Vec<&str> = std::iter::once("k").chain(columns.iter().copied()).collect();
    if headers.iter().map(str::trim).collect::<Vec<_>>() != expected {
        return Err(input(format!("expected header `{}`", expected.join(","))));
    }
    let mut rows: Vec<(i64, Vec<f64>)> = Vec::new();
    for (i, record) in reader.records().enumerate() {
        let record = record.map_err(|e| input(e.to_string()))?;
        let line = i + 2;
        let k: i64 = record[0].trim().parse().map_err(|_| input(format!("line {line}: bad index")))?;
        let values = (1..=columns.len())
            .map(|c| record[c].trim().parse::<f64>())
            .collect::<Result<Vec<_>, _>>()
            .map_err(|e| input(format!("line {line}: {e}")))?;
        if let Some((prev, _)) = rows.last() {
            if k != prev + 1 {
                return Err(input(format!("line {line}: indices must be consecutive")));
            }
        }
        rows.push((k, values));
    }
    if rows.is_empty() {
        return Err(input("no rows".into()));
    }
    Ok(rows)
}

fn read_curve(path: &Path, step: f64) -> Result<DiscreteCurve, CliError> {
    let rows = read_rows(path, &["x", "y"])?;
    let start = rows[0].0;
    let points = rows.into_iter().map(|(_, v)| Point2::new(v[0], v[1])).collect();
    Ok(DiscreteCurve::new(step, start, points)?)
}

/// Constant potentials cover the window and the origin with a margin of 2.
fn potentials(source: &PotentialSource, job: &Job) -> Result<PotentialData, CliError> {
    let w = job.window;
    match source {
        PotentialSource::Constant { alpha, beta, rho, sigma } => Ok(PotentialData::constant(
            (*alpha, *beta, *rho, *sigma),
            (w.n_min.min(0) - 2, w.n_max.max(0) + 2),
            (w.m_min.min(0) - 2, w.m_max.max(0) + 2),
            job.eps,
            job.delta,
            job.kind,
        )?),
        PotentialSource::Table(path) => {
            let rows = read_rows(path, &["alpha", "beta", "rho", "sigma"])?;
            let start = rows[0].0;
            let column = |c: usize| Sequence::new(start, rows.iter().map(|(_, v)| v[c]).collect());
            Ok(PotentialData::new(column(0), column(1), column(2), column(3), job.eps, job.delta, job.kind)?)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exit_codes_by_error_kind() {
        assert_eq!(CliError::Config(ConfigError::new("eps", "bad")).exit_code(), 2);
        assert_eq!(CliError::Usage("x".into()).exit_code(), 2);
        assert_eq!(CliError::Core(affsphere_core::Error::InvalidParameter("x".into())).exit_code(), 1);
    }

    #[test]
    fn flags_build_a_trivial_curves_job() {
        let cli = Cli::try_parse_from(["affsphere", "generate", "--mode", "curves", "--curves", "trivial-axes", "--window", "-2:2,-2:2"]).unwrap();
        let Command::Generate(args) = cli.command else { panic!() };
        let job = generate_config(&args).unwrap().validate().unwrap();
        let outcome = build(&job).unwrap();
        assert!(outcome.report.pass(), "{}", outcome.report.table());
        let p = outcome.surface.point(2, -1).unwrap();
        assert_eq!((p.x, p.y, p.z), (2.0, -1.0, -2.0));
    }

    #[test]
    fn gallery_flags_map_to_family() {
        let cli = Cli::try_parse_from([
            "affsphere", "gallery", "--name", "discrete-circle", "--q", "2", "--eps", "1", "--delta", "1", "--window", "-8:8,-8:8",
        ])
        .unwrap();
        let Command::Gallery(args) = cli.command else { panic!() };
        let config = gallery_config(&args);
        let block = config.gallery.as_ref().unwrap();
        assert_eq!((block.q1, block.q2), (Some(2.0), Some(2.0)));
        assert_eq!(config.output.stem, "discrete-circle");
        let outcome = build(&config.validate().unwrap()).unwrap();
        assert!(outcome.report.pass(), "{}", outcome.report.table());
    }

    #[test]
    fn sibling_table_names() {
        let (a, b) = sibling_tables(Path::new("out/run.csv"));
        assert_eq!(a, Path::new("out/run_A.csv"));
        assert_eq!(b, Path::new("out/run_B.csv"));
    }
}
