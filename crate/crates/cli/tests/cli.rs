use std::fs;
use std::process::Command;

fn vqnhe() -> Command {
    Command::new(env!("CARGO_BIN_EXE_vqnhe"))
}

const CONFIG: &str = r#"
name = "cli-smoke"
ansatz = "[H, ZZ, Rx]"
hamiltonian = { model = "tfim", n = 3 }

[[noise]]
kind = "depolarizing"
strengths = [0.01, 0.02, 0.04]

[training]
strategies = ["n", "q+n"]
epochs = 60
polish_iters = 60

[baseline]
starts = 1
epochs = 200
polish_iters = 200
"#;

#[test]
fn run_then_fit() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("smoke.toml");
    fs::write(&cfg, CONFIG).unwrap();
    let out = vqnhe().arg("run").arg(&cfg).env("VQNHE_OUTPUT_ROOT", dir.path().join("results")).output().unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let summary = dir.path().join("results/cli-smoke/summary.csv");
    assert_eq!(String::from_utf8_lossy(&out.stdout).trim(), summary.display().to_string());

    let fit = vqnhe().arg("fit").arg(&summary).args(["--kind", "power"]).output().unwrap();
    assert!(fit.status.success(), "{}", String::from_utf8_lossy(&fit.stderr));
    let text = String::from_utf8(fit.stdout).unwrap();
    assert!(text.starts_with("kind,series,noise_kind,strength,a,b,max_residual\n"), "{text}");
    assert_eq!(text.lines().filter(|l| l.starts_with("power,")).count(), 2);

    // No shot data in an exact-mode summary.
    let shots = vqnhe().arg("fit").arg(&summary).args(["--kind", "shots"]).output().unwrap();
    assert!(!shots.status.success());
}

#[test]
fn invalid_config_fails_before_running() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("bad.toml");
    fs::write(&cfg, CONFIG.replace("[0.01, 0.02, 0.04]", "[0.01, 2.0]")).unwrap();
    let out = vqnhe().arg("run").arg(&cfg).env("VQNHE_OUTPUT_ROOT", dir.path().join("results")).output().unwrap();
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("outside [0, 1]"));
    assert!(!dir.path().join("results").exists());
}

#[test]
fn oracles() {
    let out = vqnhe().args(["oracle", "ground-energy", "--model", "one-qubit-xz"]).output().unwrap();
    let e: f64 = String::from_utf8(out.stdout).unwrap().trim().parse().unwrap();
    assert!((e + 2f64.sqrt()).abs() < 1e-12);

    let out = vqnhe().args(["oracle", "one-qubit", "--channel", "depolarizing", "--strength", "0.1"]).output().unwrap();
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.contains("\"e_baseline\""), "{text}");

    let out =
        vqnhe().args(["oracle", "one-qubit", "--channel", "amplitude-damping", "--strength", "1.5"]).output().unwrap();
    assert!(!out.status.success());
}
