use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use sha2::{Digest, Sha256};

const GENE: &str = r#"{"kind": "gene", "gene": {"r": 1, "lambda": 1, "c": {"kind": "constant", "value": 2}, "V": 20}}"#;

struct Scratch(PathBuf);

impl Scratch {
    fn new(tag: &str) -> Self {
        let dir = std::env::temp_dir().join(format!("burstsim-cli-{tag}-{}", std::process::id()));
        std::fs::create_dir_all(&dir).unwrap();
        Self(dir)
    }

    fn file(&self, name: &str, body: &str) -> PathBuf {
        let path = self.0.join(name);
        std::fs::write(&path, body).unwrap();
        path
    }
}

impl Drop for Scratch {
    fn drop(&mut self) {
        let _ = std::fs::remove_dir_all(&self.0);
    }
}

fn burstsim(cmd: &str, config: &Path, extra: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_burstsim"))
        .arg(cmd)
        .arg("--config")
        .arg(config)
        .args(extra)
        .output()
        .unwrap()
}

#[test]
fn header_carries_version_seed_and_config_hash() {
    let dir = Scratch::new("header");
    let body = format!(r#"{{"model": {GENE}, "x0": [1], "horizon": 2}}"#);
    let cfg = dir.file("sim.json", &body);
    let out = burstsim("simulate-gddmc", &cfg, &["--seed", "9"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let text = String::from_utf8(out.stdout).unwrap();
    let header = text.lines().next().unwrap();
    let hash = hex::encode(Sha256::digest(body.as_bytes()));
    assert_eq!(header, format!("# burstsim {} 9 {hash}", env!("CARGO_PKG_VERSION")));
}

#[test]
fn malformed_configs_exit_with_two() {
    let dir = Scratch::new("config");
    let broken = dir.file("broken.json", "{\"model\": ");
    assert_eq!(burstsim("stationary", &broken, &[]).status.code(), Some(2));
    let unknown = dir.file("unknown.json", &format!(r#"{{"model": {GENE}, "colour": 1}}"#));
    assert_eq!(burstsim("stationary", &unknown, &[]).status.code(), Some(2));
    assert_eq!(burstsim("stationary", &dir.0.join("missing.json"), &[]).status.code(), Some(2));
}

#[test]
fn event_cap_exits_with_three() {
    let dir = Scratch::new("guard");
    let cfg = dir.file("sim.json", &format!(r#"{{"model": {GENE}, "x0": [1], "horizon": 50, "max_events": 3}}"#));
    for cmd in ["simulate-gddmc", "simulate-pdmp"] {
        let out = burstsim(cmd, &cfg, &[]);
        assert_eq!(out.status.code(), Some(3), "{cmd}");
        assert!(String::from_utf8_lossy(&out.stdout).contains("# status guard_tripped"), "{cmd}");
    }
}

#[test]
fn stationary_pmf_is_normalized() {
    let dir = Scratch::new("pmf");
    let cfg = dir.file("stat.json", &format!(r#"{{"model": {GENE}}}"#));
    let out = burstsim("stationary", &cfg, &[]);
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    let mut lines = text.lines().skip(1);
    assert_eq!(lines.next(), Some("x,probability"));
    let total: f64 = lines.map(|l| l.split(',').nth(1).unwrap().parse::<f64>().unwrap()).sum();
    assert!((total - 1.0).abs() < 1e-12, "{total}");
}
