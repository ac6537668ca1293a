use std::path::Path;
use std::process::{Command, Output};

use ewi_nls::experiments::reference::{encode_snapshot, read_snapshot};

fn ewi(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_ewi-nls")).args(args).output().unwrap()
}

fn write(dir: &Path, name: &str, text: &str) -> String {
    let p = dir.join(name);
    std::fs::write(&p, text).unwrap();
    p.to_str().unwrap().to_string()
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn masses(o: &Output) -> Vec<f64> {
    stdout(o)
        .lines()
        .filter(|l| l.starts_with("mass"))
        .map(|l| l.rsplit(' ').next().unwrap().parse().unwrap())
        .collect()
}

const PLANE_WAVE: &str = r#"
scheme = "ewi_efp"
tau = 0.01
n = 64
[problem]
a = -16.0
b = 16.0
t_final = 1.0
[problem.datum.plane_wave]
amplitude = 1.5
mode = 3
"#;

#[test]
fn solve_free_plane_wave_conserves_mass() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "pw.toml", PLANE_WAVE);
    let out = dir.path().join("out");
    let o = ewi(&["solve", "--config", &cfg, "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let m = masses(&o);
    assert_eq!(m.len(), 2);
    assert!((m[0] - 1.5f64.powi(2) * 32.0).abs() < 1e-12 * m[0]);
    assert!((m[0] - m[1]).abs() < 1e-12 * m[0]);
    let csv = std::fs::read_to_string(out.join("ewi_efp_nodal.csv")).unwrap();
    assert_eq!(csv.lines().next().unwrap(), "x,re,im,abs2");
    assert_eq!(csv.lines().count(), 1 + 65);
}

#[test]
fn snapshot_round_trip_is_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    let text = PLANE_WAVE.replace("scheme = \"ewi_efp\"", "scheme = \"strang\"");
    let cfg = write(dir.path(), "pw.toml", &text);
    let out = dir.path().join("out");
    let o = ewi(&["solve", "--config", &cfg, "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0));
    let path = out.join("strang.ref");
    let bytes = std::fs::read(&path).unwrap();
    let (meta, field) = read_snapshot(&path).unwrap();
    assert_eq!(encode_snapshot(&field, &meta).unwrap(), bytes);
    assert_eq!(meta.tau, 0.01);
    assert_eq!(field.grid().n(), 64);
}

#[test]
fn solve_square_well_smoke_run() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(
        dir.path(),
        "well.toml",
        r#"
scheme = "ewi_efp"
tau = 1e-4
n = 4096
[problem]
datum = "type1_h2"
a = -16.0
b = 16.0
t_final = 1.0
[problem.potential]
kind = "box"
depth = -4.0
left = -2.0
right = 2.0
[problem.nonlinearity]
kind = "power"
lambda = -1.0
sigma = 1.0
"#,
    );
    let out = dir.path().join("out");
    let o = ewi(&["solve", "--config", &cfg, "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let m = masses(&o);
    assert!(m.iter().all(|x| x.is_finite() && *x > 0.0));
    let csv = std::fs::read_to_string(out.join("ewi_efp_nodal.csv")).unwrap();
    for line in csv.lines().skip(1) {
        for v in line.split(',') {
            assert!(v.parse::<f64>().unwrap().is_finite());
        }
    }
}

#[test]
fn config_errors_exit_2() {
    let dir = tempfile::tempdir().unwrap();
    let missing = write(dir.path(), "m.toml", &PLANE_WAVE.replace("tau = 0.01\n", ""));
    let o = ewi(&["solve", "--config", &missing]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("tau"), "{}", stderr(&o));

    let typo = write(dir.path(), "t.toml", &PLANE_WAVE.replace("n = 64", "n = 64\nfs_oversampel = 4"));
    let o = ewi(&["solve", "--config", &typo]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("fs_oversampel"));

    let odd = write(dir.path(), "o.toml", &PLANE_WAVE.replace("n = 64", "n = 63"));
    assert_eq!(ewi(&["solve", "--config", &odd]).status.code(), Some(2));

    let o = ewi(&["convergence", "--self-test", "--threads", "0"]);
    assert_eq!(o.status.code(), Some(2));
    assert_eq!(ewi(&["convergence", "--preset", "fig99"]).status.code(), Some(2));
    assert_eq!(ewi(&["convergence"]).status.code(), Some(2));
    assert_eq!(ewi(&["frobnicate"]).status.code(), Some(2));
}

#[test]
fn blow_up_exits_3_with_step() {
    let dir = tempfile::tempdir().unwrap();
    let text = PLANE_WAVE.replace("amplitude = 1.5", "amplitude = 1e155").replace(
        "[problem.datum.plane_wave]",
        "[problem.nonlinearity]\nkind = \"power\"\nlambda = -1.0\nsigma = 1.0\n[problem.datum.plane_wave]",
    );
    let cfg = write(dir.path(), "b.toml", &text);
    let o = ewi(&["solve", "--config", &cfg, "--out", dir.path().to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(3));
    assert!(stderr(&o).contains("blew up at step"), "{}", stderr(&o));
}

#[test]
fn self_test_fits_exact_orders() {
    let dir = tempfile::tempdir().unwrap();
    let o = ewi(&["convergence", "--self-test", "--out", dir.path().to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0));
    let s = stdout(&o);
    let row = |scheme: &str| -> Vec<String> {
        let line = s.lines().find(|l| l.trim_start().starts_with(scheme)).unwrap();
        line.split_whitespace().map(str::to_string).collect()
    };
    assert_eq!(row("ewi_efp")[1..3], ["L2", "1.000"]);
    assert_eq!(row("strang")[1..3], ["L2", "2.000"]);
    assert!(dir.path().join("selftest.csv").exists());
}

fn small_study(bands: &str, schemes: &str) -> String {
    format!(
        r#"
label = "small"
schemes = [{schemes}]
norms = ["L2"]
{bands}
[problem]
datum = "type2_smooth"
a = -16.0
b = 16.0
t_final = 0.2
[problem.nonlinearity]
kind = "power"
lambda = -1.0
sigma = 1.0
[sweep]
tau = [0.05, 0.025, 0.0125]
[reference]
scheme = "strang"
tau = 0.00125
h = 0.25
"#
    )
}

#[test]
fn band_outcomes_set_the_exit_code() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().to_str().unwrap();
    let good = write(
        dir.path(),
        "good.toml",
        &small_study(
            "[[bands]]\nkind = \"slope\"\nscheme = \"ewi_efp\"\nnorm = \"L2\"\ntarget = 1.0\ntol = 0.2",
            "\"ewi_efp\"",
        ),
    );
    let o = ewi(&["convergence", "--config", &good, "--out", out, "--threads", "1"]);
    assert_eq!(o.status.code(), Some(0), "{}{}", stdout(&o), stderr(&o));
    assert!(stdout(&o).contains("[PASS]"));
    let csv = std::fs::read_to_string(dir.path().join("small.csv")).unwrap();
    assert_eq!(csv.lines().count(), 1 + 3);

    let bad = write(
        dir.path(),
        "bad.toml",
        &small_study(
            "[[bands]]\nkind = \"slope\"\nscheme = \"ewi_efp\"\nnorm = \"L2\"\ntarget = 3.0\ntol = 0.2",
            "\"ewi_efp\"",
        ),
    );
    let o = ewi(&["convergence", "--config", &bad, "--out", out]);
    assert_eq!(o.status.code(), Some(4));
    assert!(stdout(&o).contains("[FAIL]"));
}

#[test]
fn compare_checks_its_scheme_list() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().to_str().unwrap();
    let dup = write(dir.path(), "dup.toml", &small_study("", "\"ewi_efp\", \"ewi_efp\""));
    assert_eq!(ewi(&["compare", "--config", &dup, "--out", out]).status.code(), Some(2));
    let one = write(dir.path(), "one.toml", &small_study("", "\"ewi_efp\""));
    assert_eq!(ewi(&["compare", "--config", &one, "--out", out]).status.code(), Some(2));
    let two = write(dir.path(), "two.toml", &small_study("", "\"ewi_efp\", \"lie_trotter\""));
    let o = ewi(&["compare", "--config", &two, "--out", out]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    assert!(stdout(&o).contains("lie_trotter order"));
}

#[test]
fn compare_on_free_equation_reports_floor() {
    let dir = tempfile::tempdir().unwrap();
    let text = r#"
label = "free"
schemes = ["ewi_efp", "lie_trotter"]
[problem]
a = -16.0
b = 16.0
t_final = 0.1
[problem.datum.plane_wave]
amplitude = 1.0
mode = 2
[sweep]
tau = [1e-2, 5e-3, 2.5e-3]
[reference]
scheme = "strang"
tau = 2.5e-4
h = 0.5
"#;
    let cfg = write(dir.path(), "free.toml", text);
    let o = ewi(&["compare", "--config", &cfg, "--out", dir.path().to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let s = stdout(&o);
    assert_eq!(s.matches("floor").count(), 2 * 2 + 2 * 2, "{s}");
}

#[test]
fn partial_blow_up_still_writes_csv() {
    let dir = tempfile::tempdir().unwrap();
    let text = r#"
label = "unstable"
schemes = ["ewi_efp", "lie_trotter"]
norms = ["L2"]
[problem]
a = -16.0
b = 16.0
t_final = 1.0
[problem.nonlinearity]
kind = "power"
lambda = -1.0
sigma = 1.0
[problem.datum.plane_wave]
amplitude = 10.0
mode = 0
[sweep]
tau = [0.1, 0.05]
[reference]
scheme = "strang"
tau = 0.005
h = 1.0
"#;
    let cfg = write(dir.path(), "u.toml", text);
    let o = ewi(&["convergence", "--config", &cfg, "--out", dir.path().to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(3), "{}{}", stdout(&o), stderr(&o));
    let csv = std::fs::read_to_string(dir.path().join("unstable.csv")).unwrap();
    let rows: Vec<Vec<&str>> = csv.lines().skip(1).map(|l| l.split(',').collect()).collect();
    assert_eq!(rows.len(), 4);
    for r in &rows {
        match r[1] {
            "ewi_efp" => {
                assert!(!r[10].is_empty());
                assert_eq!(r[8], "NaN");
            }
            _ => assert!(r[10].is_empty()),
        }
    }
}
