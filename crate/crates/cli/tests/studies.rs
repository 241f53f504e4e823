//! Study runs through the library and the `emicut` binary.

use std::path::Path;
use std::process::Command;

use emi_cutfem::{EmiParams, Shape, SurfaceStab};
use emi_cutfem_cli::config::RunConfig;
use emi_cutfem_cli::studies::{conv_ode, sens_ode};

fn emicut(args: &[&str], out: &Path) -> std::process::Output {
    Command::new(env!("CARGO_BIN_EXE_emicut"))
        .args(args)
        .arg("--out")
        .arg(out)
        .output()
        .expect("running emicut")
}

#[test]
fn csv_output_is_reproducible_across_thread_counts() {
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    let args = ["sens-ode", "--n", "12", "--mdelta", "8"];
    assert!(emicut(&[&args[..], &["--threads", "1"]].concat(), a.path()).status.success());
    assert!(emicut(&[&args[..], &["--threads", "3"]].concat(), b.path()).status.success());
    let read = |d: &Path| std::fs::read(d.join("sens_ode.csv")).unwrap();
    assert_eq!(read(a.path()), read(b.path()));
    let text = String::from_utf8(read(a.path())).unwrap();
    assert_eq!(text.lines().next(), Some("m,delta,kappa_none,kappa_s1,kappa_s2"));
    assert_eq!(text.lines().count(), 10);
    assert!(a.path().join("sens_ode.meta.toml").exists());
    assert!(a.path().join("config.toml").exists());
}

#[test]
fn exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let ok = emicut(&["conv-multi", "--levels", "8,16"], dir.path());
    assert_eq!(ok.status.code(), Some(0));
    // a huge ghost penalty wrecks the accuracy, which --check reports
    let violated = emicut(&["conv-multi", "--levels", "16,32", "--gamma", "1000", "--check"], dir.path());
    assert_eq!(violated.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&violated.stdout).contains("[FAIL]"));
    let bad = emicut(&["conv-ode", "--geometry", "bogus"], dir.path());
    assert_eq!(bad.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&bad.stderr).contains("bogus"));
}

#[test]
fn config_file_is_overridden_by_flags() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.toml");
    std::fs::write(&cfg, "n = 12\nmdelta = 4\n").unwrap();
    let out = emicut(&["sens-ode", "--config", cfg.to_str().unwrap(), "--mdelta", "6"], dir.path());
    assert!(out.status.success());
    let text = std::fs::read_to_string(dir.path().join("sens_ode.csv")).unwrap();
    assert_eq!(text.lines().count(), 8);
    let echoed = RunConfig::from_file(&dir.path().join("config.toml")).unwrap();
    assert_eq!((echoed.n, echoed.mdelta), (Some(12), Some(6)));
}

#[test]
fn ode_errors_shrink_with_the_time_step() {
    let shape = Shape::ellipse(0.0, 0.0, 0.6, 0.45);
    let params = EmiParams::default();
    let coarse = conv_ode::solve_level(&shape, 4, 16, &params, SurfaceStab::S1).unwrap();
    let fine = conv_ode::solve_level(&shape, 8, 32, &params, SurfaceStab::S1).unwrap();
    for k in 0..4 {
        let ratio = coarse[k] / fine[k];
        assert!((1.4..3.0).contains(&ratio), "norm {k}: {ratio}");
    }
}

#[test]
fn sens_ode_reports_every_position() {
    let cfg = RunConfig { n: Some(8), mdelta: Some(5), ..Default::default() };
    let out = sens_ode::run(&cfg).unwrap();
    let r = out.report("sens_ode").unwrap();
    assert_eq!(r.column("m").unwrap(), vec![0.0, 1.0, 2.0, 3.0, 4.0, 5.0]);
    let s2 = r.column("kappa_s2").unwrap();
    assert!(s2.iter().all(|k| k.is_finite() && *k >= 1.0));
}
