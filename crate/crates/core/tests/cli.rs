//! End-to-end checks of the command-line front end.

use std::path::PathBuf;
use std::process::{Command, Output};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_entropy-ldg"))
}

fn configs() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../configs")
}

fn scratch(name: &str) -> PathBuf {
    let d = std::env::temp_dir().join(format!("entropy-ldg-cli-{}-{name}", std::process::id()));
    std::fs::create_dir_all(&d).unwrap();
    d
}

fn text(o: &Output) -> String {
    format!("{}{}", String::from_utf8_lossy(&o.stdout), String::from_utf8_lossy(&o.stderr))
}

#[test]
fn every_shipped_config_parses() {
    let mut n = 0;
    for entry in std::fs::read_dir(configs()).unwrap() {
        let path = entry.unwrap().path();
        if path.extension().is_some_and(|e| e == "toml") {
            entropy_ldg::config::RunConfig::from_file(&path)
                .unwrap_or_else(|e| panic!("{}: {e}", path.display()));
            n += 1;
        }
    }
    assert!(n >= 5);
}

#[test]
fn run_writes_reports_and_fields() {
    let dir = scratch("run");
    let mut cfg = entropy_ldg::config::RunConfig::from_file(&configs().join("mixture.toml")).unwrap();
    cfg.time.t_end = 0.01;
    cfg.output.snapshots = vec![0.01];
    cfg.output.dir = dir.clone();
    let path = dir.join("run.toml");
    std::fs::write(&path, cfg.to_toml()).unwrap();

    let out = bin().args(["run", "--config"]).arg(&path).output().unwrap();
    assert!(out.status.success(), "{}", text(&out));
    let steps = std::fs::read_to_string(dir.join("mixture_steps.csv")).unwrap();
    let mut lines = steps.lines();
    assert!(lines.next().unwrap().starts_with("step,t,tau,newton_iters,entropy,mass_1,mass_2"));
    assert_eq!(lines.count(), 1 + 5, "initial row plus five steps");
    let field = entropy_ldg::output::read_field(&dir.join("mixture_field_t0.01.csv")).unwrap();
    assert!(field.iter().all(|s| s.value > 0.0 && s.value < 1.0));
}

#[test]
fn validate_model_reports_pass() {
    let out = bin()
        .args(["validate-model", "--config"])
        .arg(configs().join("tumor.toml"))
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", text(&out));
    assert!(text(&out).contains("PASS"));
}

#[test]
fn unknown_preset_fails_with_the_list() {
    let out = bin().args(["experiment", "no-such-preset"]).output().unwrap();
    assert_eq!(out.status.code(), Some(2));
    let t = text(&out);
    assert!(t.contains("pm-convergence") && t.contains("skt-turing"), "{t}");
}

#[test]
fn bad_config_lists_every_unknown_key() {
    let dir = scratch("bad");
    let path = dir.join("bad.toml");
    let src = std::fs::read_to_string(configs().join("pm_exact.toml")).unwrap();
    std::fs::write(&path, src.replace("m = 2.0", "m = 2.0\nspeed = 1\nflavour = 2")).unwrap();
    let out = bin().args(["run", "--config"]).arg(&path).output().unwrap();
    assert_eq!(out.status.code(), Some(2));
    let t = text(&out);
    assert!(t.contains("speed") && t.contains("flavour"), "{t}");
}
