use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn affsphere(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_affsphere"))
        .current_dir(dir)
        .args(args)
        .env_remove("AFFSPHERE_THREADS")
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

const CIRCLE: [&str; 11] = [
    "gallery", "--name", "discrete-circle", "--q", "2", "--eps", "1", "--delta", "1", "--window", "-8:8,-8:8",
];

#[test]
fn gallery_circle_writes_obj_csv_and_passing_report() {
    let tmp = tempfile::tempdir().unwrap();
    let out = affsphere(tmp.path(), &CIRCLE);
    assert_eq!(out.status.code(), Some(0), "{}{}", stdout(&out), stderr(&out));
    assert!(stdout(&out).contains("overall: pass"));
    let obj = fs::read_to_string(tmp.path().join("discrete-circle.obj")).unwrap();
    assert_eq!(obj.lines().filter(|l| l.starts_with("v ")).count(), 289);
    assert_eq!(obj.lines().filter(|l| l.starts_with("f ")).count(), 256);
    let csv = fs::read_to_string(tmp.path().join("discrete-circle.csv")).unwrap();
    assert_eq!(csv.lines().count(), 290);
    for suffix in ["_A.csv", "_B.csv", "_report.txt", "_report.jsonl"] {
        assert!(tmp.path().join(format!("discrete-circle{suffix}")).exists(), "{suffix}");
    }
}

#[test]
fn trivial_axes_curves_pass_every_check() {
    let tmp = tempfile::tempdir().unwrap();
    let out = affsphere(tmp.path(), &["generate", "--mode", "curves", "--curves", "trivial-axes", "--json"]);
    assert_eq!(out.status.code(), Some(0), "{}{}", stdout(&out), stderr(&out));
    let lines: Vec<String> = stdout(&out).lines().map(str::to_owned).collect();
    assert!(!lines.is_empty());
    assert!(lines.iter().all(|l| l.contains("\"pass\":true")), "{lines:?}");
}

#[test]
fn config_file_job() {
    let tmp = tempfile::tempdir().unwrap();
    fs::write(
        tmp.path().join("job.toml"),
        "mode = \"potentials\"\neps = 0.5\ndelta = 0.25\nwindow = \"-4:4,-3:3\"\n\n[potentials]\nalpha = 1.0\nbeta = 0.5\nrho = 0.3\nsigma = 0.2\n\n[output]\nstem = \"pot\"\n",
    )
    .unwrap();
    let out = affsphere(tmp.path(), &["generate", "--config", "job.toml"]);
    assert_eq!(out.status.code(), Some(0), "{}{}", stdout(&out), stderr(&out));
    assert!(tmp.path().join("pot.obj").exists());
}

#[test]
fn perturbed_vertex_fails_verification_at_its_site() {
    let tmp = tempfile::tempdir().unwrap();
    let out = affsphere(tmp.path(), &["generate", "--mode", "curves", "--curves", "trivial-axes", "--window", "-3:3,-3:3"]);
    assert_eq!(out.status.code(), Some(0));
    let path = tmp.path().join("surface.obj");
    let obj = fs::read_to_string(&path).unwrap();
    // Vertex (1, 1) is the 33rd in row-major order on a 7x7 window.
    let mut seen = 0;
    let edited: Vec<String> = obj
        .lines()
        .map(|l| {
            if l.starts_with("v ") {
                seen += 1;
                if seen == 4 * 7 + 5 {
                    let z: f64 = l.split_whitespace().nth(3).unwrap().parse().unwrap();
                    return format!("v 1 1 {}", z + 0.01);
                }
            }
            l.to_string()
        })
        .collect();
    fs::write(&path, edited.join("\n")).unwrap();
    let out = affsphere(tmp.path(), &["verify", "surface.obj"]);
    assert_eq!(out.status.code(), Some(1), "{}", stdout(&out));
    let report = stdout(&out);
    assert!(report.contains("overall: FAIL"));
    let coplanarity = report.lines().find(|l| l.starts_with("coplanarity")).unwrap();
    assert!(coplanarity.contains(" NO "), "{coplanarity}");
    assert!(
        ["(0, 0)", "(1, 0)", "(0, 1)", "(1, 1)"].iter().any(|s| coplanarity.contains(s)),
        "{coplanarity}"
    );
}

#[test]
fn config_errors_exit_two_with_field_path() {
    let tmp = tempfile::tempdir().unwrap();
    fs::write(tmp.path().join("bad.toml"), "mode = \"curves\"\n[curves]\nname = \"trivial-axes\"\n[tolerances]\ncoplanarity = -1.0\n").unwrap();
    let out = affsphere(tmp.path(), &["generate", "--config", "bad.toml"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr(&out).contains("tolerances.coplanarity"), "{}", stderr(&out));

    let out = affsphere(tmp.path(), &["generate", "--mode", "curves", "--eps", "-1"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr(&out).contains("eps"));

    let out = affsphere(tmp.path(), &["gallery", "--name", "nowhere"]);
    assert_eq!(out.status.code(), Some(2), "{}", stderr(&out));

    let out = affsphere(tmp.path(), &["frobnicate"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn help_exits_zero() {
    let tmp = tempfile::tempdir().unwrap();
    assert_eq!(affsphere(tmp.path(), &["--help"]).status.code(), Some(0));
}

#[test]
fn bad_thread_count_is_a_usage_error() {
    let tmp = tempfile::tempdir().unwrap();
    let out = Command::new(env!("CARGO_BIN_EXE_affsphere"))
        .current_dir(tmp.path())
        .args(["generate", "--mode", "curves", "--curves", "trivial-axes"])
        .env("AFFSPHERE_THREADS", "zero")
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn export_round_trips_through_obj() {
    let tmp = tempfile::tempdir().unwrap();
    assert_eq!(affsphere(tmp.path(), &CIRCLE).status.code(), Some(0));
    let out = affsphere(tmp.path(), &["export", "discrete-circle.obj", "--csv", "tables/circle.csv"]);
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
    let original = fs::read_to_string(tmp.path().join("discrete-circle.csv")).unwrap();
    let exported = fs::read_to_string(tmp.path().join("tables/circle.csv")).unwrap();
    let columns = |s: &str| -> Vec<String> {
        s.lines().map(|l| l.split(',').take(5).collect::<Vec<_>>().join(",")).collect()
    };
    assert_eq!(columns(&original), columns(&exported));
}

#[test]
fn outputs_are_deterministic() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let args = ["generate", "--mode", "proper", "--alpha", "1", "--beta", "1", "--rho", "0.5", "--sigma", "0.5", "--eps", "0.1", "--delta", "0.1", "--window", "0:3,0:3"];
    assert_eq!(affsphere(a.path(), &args).status.code(), Some(0));
    let out = Command::new(env!("CARGO_BIN_EXE_affsphere"))
        .current_dir(b.path())
        .args(args)
        .env("AFFSPHERE_THREADS", "1")
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(0));
    for name in ["surface.obj", "surface.csv", "surface_A.csv", "surface_B.csv", "surface_report.jsonl"] {
        assert_eq!(fs::read(a.path().join(name)).unwrap(), fs::read(b.path().join(name)).unwrap(), "{name}");
    }
}
