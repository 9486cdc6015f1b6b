use std::path::Path;
use std::process::Command;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_tmf"))
}

fn write_config(dir: &Path, body: &str) -> std::path::PathBuf {
    let path = dir.join("run.toml");
    std::fs::write(&path, body).unwrap();
    path
}

fn small_config(out: &Path) -> String {
    format!(
        r#"
[grid]
n = 2
m = 32

[physics]
eta = 0.05
variant = "v1"

[noise]
k_max = 2
seed = 7

[stepper]
dt = 1e-3
t_final = 0.01
particles = 4
output_every = 5

[initial]
preset = "taylor-green"

[output]
dir = "{}"
"#,
        out.display()
    )
}

#[test]
fn missing_config_fails_with_error_line() {
    let output = bin().args(["reference", "--config", "/nonexistent.toml"]).output().unwrap();
    assert!(!output.status.success());
    let err = String::from_utf8_lossy(&output.stderr);
    assert!(err.starts_with("error: "), "{err}");
}

#[test]
fn invalid_config_names_the_key() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = small_config(&dir.path().join("out"));
    let path = write_config(dir.path(), &cfg.replace("eta = 0.05", "eta = 0.0"));
    let output = bin().args(["reference", "--config"]).arg(&path).output().unwrap();
    assert_eq!(output.status.code(), Some(2));
    let err = String::from_utf8_lossy(&output.stderr);
    assert!(err.contains("physics.eta"), "{err}");
    assert_eq!(err.lines().count(), 1, "{err}");
}

#[test]
fn reference_writes_echo_energy_and_snapshots() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("out");
    let path = write_config(dir.path(), &small_config(&out));
    let output = bin().args(["reference", "--config"]).arg(&path).output().unwrap();
    assert!(output.status.success(), "{}", String::from_utf8_lossy(&output.stderr));
    let echo = std::fs::read_to_string(out.join("config_echo.toml")).unwrap();
    assert!(echo.contains("[derived]"));
    let energy = std::fs::read_to_string(out.join("energy.csv")).unwrap();
    assert!(energy.starts_with("t,e_d,div_norm\n"));
    // initial state, t = 0.005 and t = 0.01
    assert_eq!(energy.lines().count(), 4);
    assert!(out.join("u_000000.bin").exists());
    assert!(out.join("u_000010.bin").exists());
}

#[test]
fn seed_flag_overrides_config() {
    let dir = tempfile::tempdir().unwrap();
    let out_a = dir.path().join("a");
    let out_b = dir.path().join("b");
    let path_a = write_config(&dir.path().join("."), &small_config(&out_a));
    bin().args(["ips", "--config"]).arg(&path_a).output().unwrap();
    let cfg_b = small_config(&out_b);
    let path_b = dir.path().join("run_b.toml");
    std::fs::write(&path_b, cfg_b).unwrap();
    bin().args(["ips", "--config"]).arg(&path_b).args(["--seed", "99"]).output().unwrap();
    let a = std::fs::read_to_string(out_a.join("energy.csv")).unwrap();
    let b = std::fs::read_to_string(out_b.join("energy.csv")).unwrap();
    assert_ne!(a, b);
    let echo = std::fs::read_to_string(out_b.join("config_echo.toml")).unwrap();
    assert!(echo.contains("seed = 99"));
}

#[test]
fn blow_up_keeps_partial_output_and_marks_it() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("out");
    let cfg = format!(
        r#"
[grid]
n = 2
m = 32

[physics]
eta = 1e-3
variant = "v1"

[noise]
k_max = 2
seed = 7

[stepper]
dt = 0.5
t_final = 5.0
particles = 1
output_every = 1

[initial]
preset = "random-band"
k_band = 5
amplitude = 50.0
seed = 3

[output]
dir = "{}"
"#,
        out.display()
    );
    let path = write_config(dir.path(), &cfg);
    let output = bin().args(["reference", "--config"]).arg(&path).output().unwrap();
    assert_eq!(output.status.code(), Some(3), "{}", String::from_utf8_lossy(&output.stderr));
    let err = String::from_utf8_lossy(&output.stderr);
    assert!(err.starts_with("error: blowup:"), "{err}");
    let energy = std::fs::read_to_string(out.join("energy.csv")).unwrap();
    assert!(energy.lines().count() >= 2, "{energy}");
    assert!(energy.lines().last().unwrap().starts_with("BLOWUP,"), "{energy}");
}

#[test]
fn basis_check_lists_every_field() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("out");
    let path = write_config(dir.path(), &small_config(&out));
    let output = bin().args(["basis-check", "--config"]).arg(&path).output().unwrap();
    assert!(output.status.success());
    let basis = std::fs::read_to_string(out.join("basis.csv")).unwrap();
    // n = 2, K = 2: 2 constants + 2 trig x 6 half-space wavevectors
    assert_eq!(basis.lines().count(), 15);
    let summary = std::fs::read_to_string(out.join("basis_summary.csv")).unwrap();
    assert!(summary.lines().nth(1).unwrap().starts_with("14,"), "{summary}");
}

#[test]
fn circulation_reports_every_seed() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("out");
    let mut cfg = small_config(&out);
    cfg.push_str("\n[loop]\ncenter = [1.5707963267948966, 1.5707963267948966]\nradius = 0.4\npoints = 64\nseeds = 2\n");
    let path = write_config(dir.path(), &cfg);
    let output = bin().args(["circulation", "--config"]).arg(&path).output().unwrap();
    assert!(output.status.success(), "{}", String::from_utf8_lossy(&output.stderr));
    let csv = std::fs::read_to_string(out.join("circulation.csv")).unwrap();
    let seeds: std::collections::BTreeSet<&str> =
        csv.lines().skip(1).map(|l| l.split(',').nth(1).unwrap()).collect();
    assert_eq!(seeds.into_iter().collect::<Vec<_>>(), ["7", "8"]);
}
