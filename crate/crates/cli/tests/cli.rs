//! End-to-end checks of the `wormhole-lab` binary: artifact emission,
//! configuration diagnostics, exit codes, and byte-level determinism of
//! the acceptance artifacts.

use std::path::Path;
use std::process::{Command, Output};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_wormhole-lab"))
}

fn run_in(dir: &Path, args: &[&str]) -> Output {
    let mut cmd = bin();
    cmd.args(args).arg("--out-dir").arg(dir);
    cmd.output().expect("binary runs")
}

fn tmpdir(name: &str) -> std::path::PathBuf {
    let dir = std::env::temp_dir().join(format!("wormhole-lab-test-{name}-{}", std::process::id()));
    let _ = std::fs::remove_dir_all(&dir);
    std::fs::create_dir_all(&dir).unwrap();
    dir
}

#[test]
fn harmonic_artifacts_and_exit_codes() {
    let dir = tmpdir("harmonic");
    let out = run_in(&dir, &["harmonic", "--n", "1"]);
    assert!(out.status.success(), "stderr: {}", String::from_utf8_lossy(&out.stderr));
    for file in ["harmonic_n1.csv", "harmonic_n1.dat", "harmonic_n1_report.txt", "harmonic_n1_manifest.txt"] {
        assert!(dir.join(file).exists(), "missing {file}");
    }
    let manifest = std::fs::read_to_string(dir.join("harmonic_n1_manifest.txt")).unwrap();
    assert!(manifest.contains("command = harmonic --n 1"));
    assert!(manifest.contains("harmonic_n1.csv"));

    // Degree zero is the trivial map; still a complete artifact set.
    let out = run_in(&dir, &["harmonic", "--n", "0"]);
    assert!(out.status.success());
    assert!(dir.join("harmonic_n0.csv").exists());

    // Unknown flags are a usage error (exit 2).
    let out = bin().args(["harmonic", "--n", "-1"]).output().unwrap();
    assert_eq!(out.status.code(), Some(2));
    let out = bin().args(["frobnicate"]).output().unwrap();
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn evolve_config_errors_are_line_precise() {
    let dir = tmpdir("evolve-bad");
    let cfg = dir.join("run.cfg");
    std::fs::write(&cfg, "[grid]\nr_min = -20\nr_max = twenty\n").unwrap();
    let out = run_in(&dir, &["evolve", "--config", cfg.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("twenty"), "stderr: {err}");

    let cfg2 = dir.join("run2.cfg");
    std::fs::write(&cfg2, "[grid\nr_min = -20\n").unwrap();
    let out = run_in(&dir, &["evolve", "--config", cfg2.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains(":1:"), "stderr: {err}");
}

#[test]
fn evolve_and_resolve_emit_diagnostics() {
    let dir = tmpdir("resolve");
    let cfg = dir.join("run.cfg");
    std::fs::write(
        &cfg,
        "[grid]\nr_min = -40\nr_max = 40\nnodes = 801\n\
         [run]\nt_final = 10\nsnapshot_stride = 100\n\
         [data]\nfamily = bump\ndegree = 1\namplitude = 0.15\n\
         [resolve]\nwindow = 12\nt_match = 5\nlocal_radius = 8\n",
    )
    .unwrap();
    let out = run_in(&dir, &["evolve", "--config", cfg.to_str().unwrap()]);
    assert!(out.status.success(), "stderr: {}", String::from_utf8_lossy(&out.stderr));
    assert!(dir.join("evolve_energy.csv").exists());
    assert!(dir.join("evolve_final.dat").exists());
    let manifest = std::fs::read_to_string(dir.join("evolve_manifest.txt")).unwrap();
    assert!(manifest.contains("config.grid.nodes = 801"));
    assert!(manifest.contains("config.run.dt_factor = 3e-1"), "defaults echoed: {manifest}");

    let out = run_in(&dir, &["resolve", "--config", cfg.to_str().unwrap()]);
    assert!(out.status.success(), "stderr: {}", String::from_utf8_lossy(&out.stderr));
    for file in
        ["resolve_local_energy.csv", "resolve_radiation_mismatch.csv", "resolve_observables.csv"]
    {
        assert!(dir.join(file).exists(), "missing {file}");
    }
}

#[test]
fn accept_quick_twice_is_byte_identical() {
    let d1 = tmpdir("accept1");
    let d2 = tmpdir("accept2");
    let out1 = run_in(&d1, &["accept", "--quick"]);
    assert!(
        out1.status.success(),
        "quick acceptance run failed:\n{}\n{}",
        String::from_utf8_lossy(&out1.stdout),
        String::from_utf8_lossy(&out1.stderr)
    );
    let out2 = run_in(&d2, &["accept", "--quick"]);
    assert!(out2.status.success());

    let mut compared = 0;
    for entry in std::fs::read_dir(&d1).unwrap() {
        let path = entry.unwrap().path();
        if path.extension().map_or(false, |e| e == "csv") {
            let name = path.file_name().unwrap();
            let a = std::fs::read(&path).unwrap();
            let b = std::fs::read(d2.join(name)).unwrap();
            assert_eq!(a, b, "{name:?} differs between identical runs");
            compared += 1;
        }
    }
    assert!(compared >= 5, "expected several CSV artifacts, found {compared}");
}
