use serde_json::Value;
use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_driven-lattice"))
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary runs")
}

fn text(b: &[u8]) -> String {
    String::from_utf8_lossy(b).into_owned()
}

fn write_json(dir: &Path, name: &str, v: Value) -> String {
    let p = dir.join(name);
    fs::write(&p, v.to_string()).unwrap();
    p.to_string_lossy().into_owned()
}

fn read_json(p: &Path) -> Value {
    serde_json::from_str(&fs::read_to_string(p).unwrap()).unwrap()
}

#[test]
fn minimal_config_echoes_derived_depth() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_json(dir.path(), "c.json", serde_json::json!({"kbar": 0.5, "Vprime": 16, "lambda": 0}));
    let out = dir.path().join("run");
    let o = run(&["evolve", "--config", &cfg, "--tau-end", "6.283185307179586", "--out-dir", out.to_str().unwrap()]);
    assert!(o.status.success(), "{}", text(&o.stderr));
    let meta = read_json(&out.join("meta.json"));
    assert_eq!(meta["config"]["scaled"]["q0"], 4.0);
    assert_eq!(meta["config"]["scaled"]["lambda"], 0.0);
    for f in ["autocorr.csv", "autocorr.meta.json", "density.csv", "manifest.json"] {
        assert!(out.join(f).exists(), "{f} missing");
    }
    assert!(!out.join(".lock").exists());

    let o = run(&["times", "--config", &cfg, "--regime", "robust", "--lambda-grid", "0:0:1"]);
    let stdout = text(&o.stdout);
    let row = stdout.lines().nth(1).unwrap_or_default();
    assert!(row.starts_with("0,0,"), "{stdout}{}", text(&o.stderr));
}

#[test]
fn physical_block_wins_with_warning() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_json(
        dir.path(),
        "c.json",
        serde_json::json!({
            "physical": {
                "atom_mass": 1.443e-25, "lattice_wavelength": 852e-9, "lattice_depth": 16.0,
                "drive_frequency": 9000.0, "drive_amplitude": 0.0
            },
            "scaled": {"kbar": 0.5, "Vprime": 16}
        }),
    );
    let o = run(&["times", "--config", &cfg, "--regime", "undriven", "--lambda-grid", "0:0:1"]);
    assert!(o.status.success(), "{}", text(&o.stderr));
    assert!(text(&o.stderr).contains("scaled block ignored"));
}

#[test]
fn validation_errors_exit_2() {
    let dir = tempfile::tempdir().unwrap();
    let cfg =
        write_json(dir.path(), "c.json", serde_json::json!({"kbar": 0.5, "Vprime": 16, "classical": {"dt": 0.01}}));
    let o = run(&["poincare", "--config", &cfg, "--periods", "2"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(text(&o.stderr).contains("divides"), "{}", text(&o.stderr));

    let cfg = write_json(dir.path(), "d.json", serde_json::json!({"kbar": "half", "Vprime": 16}));
    let o = run(&["times", "--config", &cfg, "--lambda-grid", "0:1:3"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(text(&o.stderr).contains("/scaled/kbar"), "{}", text(&o.stderr));
}

#[test]
fn unknown_recipe_lists_available() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(&["recipe", "fig9", "--out-dir", dir.path().join("x").to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    let err = text(&o.stderr);
    for n in 1..=6 {
        assert!(err.contains(&format!("fig{n}")), "{err}");
    }
}

#[test]
fn recipe_outputs_are_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    for d in [&a, &b] {
        let o = run(&["recipe", "fig2", "--threads", "1", "--out-dir", d.to_str().unwrap()]);
        assert!(o.status.success(), "{}", text(&o.stderr));
    }
    let manifest = read_json(&a.join("manifest.json"));
    let files = manifest["files"].as_array().unwrap();
    let mut csvs = 0;
    for f in files {
        let name = f["path"].as_str().unwrap();
        if name.ends_with(".csv") {
            csvs += 1;
            assert_eq!(fs::read(a.join(name)).unwrap(), fs::read(b.join(name)).unwrap(), "{name}");
            assert!(a.join(name.replace(".csv", ".meta.json")).exists());
        }
    }
    assert!(csvs >= 4);
    assert_eq!(manifest["status"], "ok");
}

#[test]
fn busy_output_directory_is_refused() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join(".lock"), "").unwrap();
    let o = run(&["recipe", "fig2", "--out-dir", dir.path().to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn failed_assertions_still_write_manifest() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("fig6");
    let o = run(&["recipe", "fig6", "--out-dir", out.to_str().unwrap()]);
    let manifest = read_json(&out.join("manifest.json"));
    let failed = manifest["assertions"].as_array().unwrap().iter().any(|a| a["passed"] == false);
    if failed {
        assert_eq!(o.status.code(), Some(4));
        assert_eq!(manifest["status"], "assertions_failed");
        assert!(text(&o.stdout).contains("FAIL"));
    } else {
        assert!(o.status.success());
    }
    for f in manifest["files"].as_array().unwrap() {
        let bytes = fs::read(out.join(f["path"].as_str().unwrap())).unwrap();
        assert_eq!(f["bytes"].as_u64().unwrap(), bytes.len() as u64);
    }
}

#[test]
fn analyze_synthetic_autocorrelation() {
    let dir = tempfile::tempdir().unwrap();
    let (t_cl, t_rev) = (2.0, 40.0);
    let mut csv = String::from("tau,A2\n");
    for i in 0..=12_000 {
        let tau = i as f64 * 0.01;
        let d = tau - t_rev * (tau / t_rev).round();
        let env = (-(d / 4.0).powi(2)).exp();
        let a2 = env * (std::f64::consts::PI * tau / t_cl).cos().powi(2);
        csv.push_str(&format!("{tau},{a2}\n"));
    }
    let path = dir.path().join("autocorr.csv");
    fs::write(&path, csv).unwrap();
    let out = dir.path().join("report");
    let o = run(&[
        "analyze",
        "autocorr",
        path.to_str().unwrap(),
        "--t-cl",
        "2",
        "--t-rev",
        "40",
        "--out-dir",
        out.to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{}", text(&o.stderr));
    let report = read_json(&out.join("report.json"));
    let cl = report["extracted"]["t_classical"].as_f64().unwrap();
    let rev = report["extracted"]["t_revival"].as_f64().unwrap();
    assert!((cl - t_cl).abs() < 0.02 * t_cl, "{cl}");
    assert!((rev - t_rev).abs() < 0.05 * t_rev, "{rev}");
    assert!(out.join("report.csv").exists());
}

#[test]
fn stdout_tables_without_out_dir() {
    let o = run(&["mathieu", "--nu", "0,1", "--q", "0"]);
    assert!(o.status.success());
    assert_eq!(text(&o.stdout), "nu,q,a\n0,0,0\n1,0,1\n");
    let o = run(&["units", "--frequency", "3000"]);
    assert!(o.status.success());
    assert!(text(&o.stdout).starts_with("drive_frequency_hz,kbar"), "{}", text(&o.stdout));
}
