use std::fs;
use std::path::PathBuf;

use vqnhe::experiments::{read_summary, run_experiment, ExperimentConfig, FIT_COLUMNS, SUMMARY_COLUMNS};

fn configs_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../configs")
}

#[test]
fn shipped_configs_validate() {
    let mut names: Vec<String> = fs::read_dir(configs_dir())
        .unwrap()
        .map(|e| e.unwrap().path())
        .filter(|p| p.extension().is_some_and(|x| x == "toml"))
        .map(|p| {
            ExperimentConfig::load(&p).unwrap_or_else(|e| panic!("{}: {e}", p.display()));
            p.file_stem().unwrap().to_string_lossy().into_owned()
        })
        .collect();
    names.sort();
    assert_eq!(names, ["fig2", "fig3", "fig4", "fig5", "sm-dephasing", "sm-onequbit"]);
}

const SMALL_BIASED: &str = r#"
name = "small-biased"
master_seed = 11
ansatz = "[H, ZZ, Rx]"
hamiltonian = { model = "tfim", n = 3 }

[[noise]]
kind = "depolarizing"
strengths = [0.0, 0.03]

[training]
strategies = ["n"]
mode = "biased"
shots = [200, 2000, 20000]
groups = 3
epochs = 40
polish_iters = 20
seeds = [0]

[baseline]
starts = 1
epochs = 100
polish_iters = 100
"#;

#[test]
fn biased_run_is_byte_reproducible() {
    let cfg = ExperimentConfig::from_toml_str(SMALL_BIASED).unwrap();
    let root = tempfile::tempdir().unwrap();
    let a = run_experiment(&cfg, &root.path().join("a")).unwrap();
    let b = run_experiment(&cfg, &root.path().join("b")).unwrap();
    assert!(a.breaches.is_empty(), "{:?}", a.breaches);

    let mut files_a: Vec<_> = fs::read_dir(a.dir.join("runs")).unwrap().map(|e| e.unwrap().file_name()).collect();
    files_a.sort();
    assert_eq!(files_a.len(), 2 * 3 * 3);
    for f in &files_a {
        assert_eq!(fs::read(a.dir.join("runs").join(f)).unwrap(), fs::read(b.dir.join("runs").join(f)).unwrap());
    }
    for f in ["summary.csv", "fits.csv", "baseline.json"] {
        assert_eq!(fs::read(a.dir.join(f)).unwrap(), fs::read(b.dir.join(f)).unwrap(), "{f}");
    }

    let summary = fs::read_to_string(a.dir.join("summary.csv")).unwrap();
    assert_eq!(summary.lines().next().unwrap(), SUMMARY_COLUMNS.join(","));
    let fits = fs::read_to_string(a.dir.join("fits.csv")).unwrap();
    assert_eq!(fits.lines().next().unwrap(), FIT_COLUMNS.join(","));
    assert_eq!(fits.lines().filter(|l| l.starts_with("shots,")).count(), 2);

    let rows = read_summary(&a.dir.join("summary.csv")).unwrap();
    assert_eq!(rows.len(), 6);
    for r in &rows {
        assert_eq!(r.runs, 3);
        assert!(r.mean_delta_e <= 0.0, "biased gain is never positive: {r:?}");
    }
}

#[test]
fn different_master_seed_changes_samples() {
    let cfg = ExperimentConfig::from_toml_str(SMALL_BIASED).unwrap();
    let other = ExperimentConfig { master_seed: 12, ..cfg.clone() };
    let root = tempfile::tempdir().unwrap();
    let a = run_experiment(&cfg, &root.path().join("a")).unwrap();
    let b = run_experiment(&other, &root.path().join("b")).unwrap();
    assert_ne!(a.summary, b.summary);
}

#[test]
fn hamiltonian_file_is_resolved_next_to_config() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("h.txt"), "1.0 0.0 ZZ\n-1.0 0.0 XI\n-1.0 0.0 IX\n").unwrap();
    let cfg_path = dir.path().join("exp.toml");
    fs::write(
        &cfg_path,
        r#"
name = "from-file"
ansatz = "[H, ZZ, Rx]"
hamiltonian = { model = "file", path = "h.txt" }
[[noise]]
kind = "none"
strengths = [0.0]
[baseline]
starts = 1
epochs = 200
polish_iters = 200
"#,
    )
    .unwrap();
    let cfg = ExperimentConfig::load(&cfg_path).unwrap();
    let out = run_experiment(&cfg, &dir.path().join("out")).unwrap();
    let row = &out.summary[0];
    assert!((row.exact_energy + 5f64.sqrt()).abs() < 1e-10, "{}", row.exact_energy);
    assert!(row.final_energy >= row.exact_energy - 1e-9);
}
