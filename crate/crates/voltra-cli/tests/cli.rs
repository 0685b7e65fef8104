//! End-to-end tests of the `voltra` binary: artifact contents, determinism,
//! strict config rejection and the validate table.

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn voltra(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_voltra"))
        .args(args)
        .env_remove("VOLTRA_THREADS")
        .output()
        .expect("spawn voltra")
}

fn run_ok(args: &[&str]) -> String {
    let out = voltra(args);
    assert!(
        out.status.success(),
        "expected success\nstdout: {}\nstderr: {}",
        String::from_utf8_lossy(&out.stdout),
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

fn run_err(args: &[&str]) -> String {
    let out = voltra(args);
    assert!(
        !out.status.success(),
        "expected failure\nstdout: {}",
        String::from_utf8_lossy(&out.stdout)
    );
    String::from_utf8(out.stderr).unwrap()
}

fn write_cfg(dir: &Path, name: &str, text: &str) -> PathBuf {
    let path = dir.join(name);
    std::fs::write(&path, text).unwrap();
    path
}

fn read_csv(path: &Path) -> (Vec<String>, Vec<Vec<f64>>) {
    let text = std::fs::read_to_string(path).unwrap();
    let mut lines = text.lines();
    let header = lines
        .next()
        .unwrap()
        .split(',')
        .map(str::to_string)
        .collect();
    let rows = lines
        .map(|l| l.split(',').map(|f| f.parse::<f64>().unwrap()).collect())
        .collect();
    (header, rows)
}

const HESTON: &str = "\
[kernel]
type = exponential
zeta = 0.3
lambda = 1.2

[curve]
type = heston
v0 = 0.04
theta = 0.05
mean_reversion = 1.2

[model]
type = afv
rho = -0.7

[numerics]
dt = 1e-3
horizon = 0.5, 1
u = 0.25, 0.5, 0.75
";

#[test]
fn cgf_artifact_matches_the_ode_oracle() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_cfg(dir.path(), "run.cfg", HESTON);
    run_ok(&[
        "cgf",
        "--config",
        cfg.to_str().unwrap(),
        "--out",
        dir.path().to_str().unwrap(),
    ]);
    let (header, rows) = read_csv(&dir.path().join("cgf.csv"));
    assert_eq!(header, ["T", "u", "cgf"]);
    assert_eq!(rows.len(), 6);
    for row in &rows {
        let (horizon, u, got) = (row[0], row[1], row[2]);
        let oracle =
            voltra::cgf::heston_ode_reference(u, -0.7, 0.3, 1.2, 0.05, 0.04, horizon, 1e-3)
                .unwrap()
                .cgf;
        assert!(
            (got - oracle).abs() < 1e-5,
            "T={horizon} u={u}: {got} vs oracle {oracle}"
        );
    }
}

#[test]
fn same_seed_runs_are_byte_identical_across_thread_counts() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_cfg(
        dir.path(),
        "run.cfg",
        "\
[kernel]
type = exponential
zeta = 0.3
lambda = 1.2

[curve]
type = flat
value = 0.04

[model]
type = afv
rho = -0.7

[numerics]
dt = 1e-2
horizon = 1
u = 0.5
seed = 42
n_paths = 2000
",
    );
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    run_ok(&[
        "simulate-afv",
        "--config",
        cfg.to_str().unwrap(),
        "--out",
        a.to_str().unwrap(),
        "--threads",
        "1",
    ]);
    run_ok(&[
        "simulate-afv",
        "--config",
        cfg.to_str().unwrap(),
        "--out",
        b.to_str().unwrap(),
        "--threads",
        "2",
    ]);
    let left = std::fs::read(a.join("simulate-afv.csv")).unwrap();
    let right = std::fs::read(b.join("simulate-afv.csv")).unwrap();
    assert!(!left.is_empty());
    assert_eq!(left, right);
}

#[test]
fn thinning_runs_are_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_cfg(
        dir.path(),
        "run.cfg",
        "\
[kernel]
type = exponential
zeta = 1.0
lambda = 1.2

[model]
type = afi
mu = 1.0

[jumps]
law_plus = dirac 1.0
law_minus = dirac 1.0
gamma_plus = 0.25
gamma_minus = 0.25

[numerics]
dt = 1e-2
horizon = 1
u = 0.5
seed = 9
n_paths = 1000
",
    );
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    for out in [&a, &b] {
        run_ok(&[
            "simulate-afi",
            "--config",
            cfg.to_str().unwrap(),
            "--out",
            out.to_str().unwrap(),
        ]);
    }
    assert_eq!(
        std::fs::read(a.join("simulate-afi.csv")).unwrap(),
        std::fs::read(b.join("simulate-afi.csv")).unwrap()
    );
}

#[test]
fn resolvent_artifact_matches_the_closed_form_pair() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_cfg(
        dir.path(),
        "run.cfg",
        "\
[kernel]
type = constant
zeta = 0.3

[resolvent]
gamma = -4.0

[numerics]
dt = 1e-3
horizon = 2
",
    );
    run_ok(&[
        "resolvent",
        "--config",
        cfg.to_str().unwrap(),
        "--out",
        dir.path().to_str().unwrap(),
    ]);
    let (header, rows) = read_csv(&dir.path().join("resolvent.csv"));
    assert_eq!(header, ["t", "kernel", "resolvent"]);
    assert_eq!(rows.len(), 2000);
    // the (-4)-resolvent of the constant kernel 0.3 is 0.3 e^{-1.2 t}
    for row in &rows {
        let want = 0.3 * (-1.2 * row[0]).exp();
        assert!((row[2] - want).abs() < 1e-6, "t={}: {} vs {want}", row[0], row[2]);
    }
}

#[test]
fn strict_configs_are_rejected_with_diagnostics() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().to_str().unwrap().to_string();

    let unknown = write_cfg(dir.path(), "unknown.cfg", &format!("{HESTON}n_step = 9\n"));
    let err = run_err(&["cgf", "--config", unknown.to_str().unwrap(), "--out", &out]);
    assert!(err.contains("unknown key 'n_step'"), "{err}");

    let shallow = write_cfg(
        dir.path(),
        "shallow.cfg",
        &HESTON.replace(
            "type = exponential\nzeta = 0.3\nlambda = 1.2",
            "type = mittag_leffler\nzeta = 0.3\nalpha = 0.4\nlambda = 1.2",
        ),
    );
    let err = run_err(&["cgf", "--config", shallow.to_str().unwrap(), "--out", &out]);
    assert!(err.contains("alpha"), "{err}");

    let bad_u = write_cfg(
        dir.path(),
        "bad_u.cfg",
        &HESTON.replace("u = 0.25, 0.5, 0.75", "u = 1.5"),
    );
    let err = run_err(&["cgf", "--config", bad_u.to_str().unwrap(), "--out", &out]);
    assert!(err.contains("[0,1]"), "{err}");

    let err = run_err(&["cgf", "--config", dir.path().join("absent.cfg").to_str().unwrap(), "--out", &out]);
    assert!(err.contains("absent.cfg"), "{err}");
}

#[test]
fn validate_prints_a_table_and_writes_the_artifact() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_cfg(dir.path(), "run.cfg", "[validate]\nfast = true\n");
    let stdout = run_ok(&[
        "validate",
        "--config",
        cfg.to_str().unwrap(),
        "--out",
        dir.path().to_str().unwrap(),
    ]);
    assert!(stdout.contains("check"), "{stdout}");
    assert!(stdout.contains("PASS"), "{stdout}");
    assert!(!stdout.contains("FAIL"), "{stdout}");
    let text = std::fs::read_to_string(dir.path().join("validate.csv")).unwrap();
    assert!(text.lines().count() > 5);
    assert!(text.starts_with("check,status,detail\n"));
}

#[test]
fn manifest_echoes_the_config_verbatim() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_cfg(dir.path(), "run.cfg", HESTON);
    run_ok(&[
        "cgf",
        "--config",
        cfg.to_str().unwrap(),
        "--out",
        dir.path().to_str().unwrap(),
    ]);
    let manifest = std::fs::read_to_string(dir.path().join("cgf.manifest.txt")).unwrap();
    assert!(manifest.starts_with("voltra "));
    assert!(manifest.contains("command: cgf"));
    assert!(manifest.contains("artifacts: cgf.csv"));
    for line in HESTON.lines() {
        assert!(manifest.contains(line), "manifest missing config line '{line}'");
    }
}
