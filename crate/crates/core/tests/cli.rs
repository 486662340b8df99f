//! End-to-end runs of the command-line tool.

use std::path::Path;
use std::process::{Command, Output};

fn run(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_smartbeam"))
        .args(args)
        .arg("--out")
        .arg(dir)
        .output()
        .expect("binary runs")
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exited normally")
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn read(dir: &Path, name: &str) -> String {
    std::fs::read_to_string(dir.join(name)).unwrap()
}

#[test]
fn derive_writes_coefficients() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(dir.path(), &["derive"]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let text = read(dir.path(), "coefficients.csv");
    assert!(text.starts_with("name,value\n"));
    assert!(!text.contains('\r'));
    assert!(text.lines().any(|l| l.starts_with("m,")));
}

#[test]
fn simulate_trace_header_and_plot() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(dir.path(), &["simulate", "--model", "rn-static", "--N", "8", "--T", "1e-5", "--plot"]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let text = read(dir.path(), "trace.csv");
    assert_eq!(text.lines().next().unwrap(), "t,E_total,E_kin,E_pot,obs_g1,obs_V,obs_M");
    assert!(read(dir.path(), "trace.svg").contains("<polyline"));
}

#[test]
fn outputs_are_byte_identical_across_runs() {
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    let args = ["simulate", "--model", "mm-dynamic", "--N", "8", "--T", "2e-6", "--dt", "1e-8"];
    assert_eq!(code(&run(a.path(), &args)), 0);
    assert_eq!(code(&run(b.path(), &args)), 0);
    assert_eq!(read(a.path(), "trace.csv"), read(b.path(), "trace.csv"));
}

#[test]
fn spectrum_and_scan() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(dir.path(), &["spectrum", "--model", "rn-static", "--N", "8"]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let spec = read(dir.path(), "spectrum.csv");
    assert!(spec.starts_with("re,im\n"));
    for line in spec.lines().skip(1) {
        let re: f64 = line.split(',').next().unwrap().parse().unwrap();
        assert!(re < 0.0);
    }
    assert!(read(dir.path(), "scan.csv").starts_with("mu,sigma_min\n"));
}

#[test]
fn coarse_grid_is_a_config_error() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(dir.path(), &["spectrum", "--N", "3"]);
    assert_eq!(code(&o), 2);
    assert!(stderr(&o).contains("N=3"));
}

#[test]
fn duplicate_key_names_key_and_line() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.conf");
    std::fs::write(&cfg, "# test\ngrid.N = 8\nmodel = rn-static\ngrid.N = 16\n").unwrap();
    let o = run(dir.path(), &["derive", "--config", cfg.to_str().unwrap()]);
    assert_eq!(code(&o), 2);
    let err = stderr(&o);
    assert!(err.contains("grid.N") && err.contains("line 4"), "{err}");
}

#[test]
fn unknown_key_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.conf");
    std::fs::write(&cfg, "layers.4.thickness = 1\n").unwrap();
    let o = run(dir.path(), &["derive", "--config", cfg.to_str().unwrap()]);
    assert_eq!(code(&o), 2);
    assert!(stderr(&o).contains("layers.4.thickness"));
}

#[test]
fn shear_free_core_fails_assembly() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.conf");
    std::fs::write(&cfg, "core.shear_modulus = 0\nmodel = mm-static\n").unwrap();
    let o = run(dir.path(), &["assemble", "--config", cfg.to_str().unwrap()]);
    assert_eq!(code(&o), 3, "{}", stderr(&o));
}

#[test]
fn wrong_gain_count_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(dir.path(), &["simulate", "--model", "mm-static", "--gains", "1,2"]);
    assert_eq!(code(&o), 2);
}

#[test]
fn sweep_rows_are_sorted() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(dir.path(), &["spectrum", "--model", "mm-dynamic", "--N", "6", "--sweep", "mu:1e-6:1e-5:4"]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let text = read(dir.path(), "sweep.csv");
    let mut lines = text.lines();
    assert_eq!(lines.next().unwrap(), "mu,abscissa,min_modulus,max_modulus,axis_count");
    let mus: Vec<f64> = lines.map(|l| l.split(',').next().unwrap().parse().unwrap()).collect();
    assert_eq!(mus.len(), 4);
    assert!(mus.windows(2).all(|w| w[0] < w[1]));
}

#[test]
fn resonance_reports_infeasibility_and_coupled_modes() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(dir.path(), &["resonance", "--N", "8"]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let text = read(dir.path(), "resonance.csv");
    assert!(text.starts_with("kind,n,m,knob,knob_value,frequency,residual,tip_charge,status\n"));
    assert_eq!(text.lines().filter(|l| l.starts_with("continuum") && l.ends_with("infeasible")).count(), 4);
}

#[test]
fn sweep_not_offered_for_verify() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(code(&run(dir.path(), &["verify", "--sweep", "mu:1:2:2"])), 2);
}
