//! End-to-end checks of the batch driver through the real binary.

use std::path::{Path, PathBuf};
use std::process::Command;

fn bin() -> &'static str {
    env!("CARGO_BIN_EXE_osmoflow")
}

fn tmp_dir(tag: &str) -> PathBuf {
    let dir = std::env::temp_dir().join(format!("osmoflow_cli_{tag}_{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    dir
}

fn write_cfg(dir: &Path, name: &str, text: &str) -> PathBuf {
    let p = dir.join(name);
    std::fs::write(&p, text).unwrap();
    p
}

/// crude field extraction: "key":value
fn json_f64(summary: &str, key: &str) -> f64 {
    let pat = format!("\"{key}\":");
    let idx = summary.find(&pat).unwrap_or_else(|| panic!("missing {key} in {summary}"));
    let rest = &summary[idx + pat.len()..];
    let end = rest.find([',', '}']).unwrap();
    rest[..end].trim_matches('"').parse().unwrap()
}

#[test]
fn equilibrium_mode_reports_the_analytic_radius() {
    let dir = tmp_dir("eq");
    let cfg = write_cfg(&dir, "run.cfg", "mode = equilibrium\nn = 2\nintegrand = zlogz\n");
    let out = dir.join("out");
    let status = Command::new(bin())
        .args(["--config", cfg.to_str().unwrap(), "--out", out.to_str().unwrap()])
        .status()
        .unwrap();
    assert!(status.success());
    let summary = std::fs::read_to_string(out.join("summary.json")).unwrap();
    let rstar = json_f64(&summary, "equilibrium_radius");
    assert!((rstar - 1.0 / std::f64::consts::PI).abs() < 1e-9, "r* = {rstar}");
    assert!(summary.contains("\"usable\":true"));

    // flag overrides win over the file
    let out2 = dir.join("out2");
    let status = Command::new(bin())
        .args([
            "--config",
            cfg.to_str().unwrap(),
            "--out",
            out2.to_str().unwrap(),
            "--override",
            "integrand=zsquared",
        ])
        .status()
        .unwrap();
    assert!(status.success());
    let summary = std::fs::read_to_string(out2.join("summary.json")).unwrap();
    let rstar = json_f64(&summary, "equilibrium_radius");
    let expect = std::f64::consts::PI.powf(-2.0 / 3.0);
    assert!((rstar - expect).abs() < 1e-9, "override ignored: r* = {rstar}");
    std::fs::remove_dir_all(&dir).ok();
}

#[test]
fn simulate_from_equilibrium_is_constant_and_deterministic() {
    let dir = tmp_dir("sim");
    let rstar = 1.0 / std::f64::consts::PI;
    let cfg_text = format!(
        "mode = simulate\nn = 2\nm = 32\ntau = 5e-3\nhorizon = 0.05\ninitial_radius = {rstar}\nsnapshot_stride = 5\n"
    );
    let cfg = write_cfg(&dir, "run.cfg", &cfg_text);
    let out_a = dir.join("a");
    let out_b = dir.join("b");
    for out in [&out_a, &out_b] {
        let status = Command::new(bin())
            .args(["--config", cfg.to_str().unwrap(), "--out", out.to_str().unwrap()])
            .status()
            .unwrap();
        assert!(status.success());
    }
    let csv = std::fs::read_to_string(out_a.join("trajectory.csv")).unwrap();
    let mut radii = Vec::new();
    for line in csv.lines().skip(1) {
        radii.push(line.split(',').nth(1).unwrap().parse::<f64>().unwrap());
    }
    assert_eq!(radii.len(), 11);
    for r in &radii {
        assert!((r - rstar).abs() < 1e-3, "radius drifted to {r}");
    }
    // byte-identical reruns
    for name in ["trajectory.csv", "summary.json", "profile_0.csv", "profile_10.csv"] {
        let a = std::fs::read(out_a.join(name)).unwrap();
        let b = std::fs::read(out_b.join(name)).unwrap();
        assert_eq!(a, b, "{name} differs between identical runs");
    }
    std::fs::remove_dir_all(&dir).ok();
}

#[test]
fn compare_mode_reports_small_distance() {
    let dir = tmp_dir("cmp");
    let cfg = write_cfg(
        &dir,
        "run.cfg",
        "mode = compare\nn = 2\nm = 50\ntau = 2e-3\nhorizon = 0.2\noracle_cells = 100\noracle_dt = 1e-3\nsample_dt = 0.02\n",
    );
    let out = dir.join("out");
    let status = Command::new(bin())
        .args(["--config", cfg.to_str().unwrap(), "--out", out.to_str().unwrap()])
        .status()
        .unwrap();
    assert!(status.success());
    let summary = std::fs::read_to_string(out.join("summary.json")).unwrap();
    let d = json_f64(&summary, "max_rho_distance");
    assert!(d < 0.02, "max rho distance {d}");
    assert!(out.join("trajectory_oracle.csv").exists());
    assert!(out.join("compare.csv").exists());
    std::fs::remove_dir_all(&dir).ok();
}

#[test]
fn diagnose_mode_writes_diagnostics() {
    let dir = tmp_dir("diag");
    let cfg = write_cfg(
        &dir,
        "run.cfg",
        "mode = diagnose\nn = 2\nm = 40\ntau = 2e-3\nhorizon = 0.1\n",
    );
    let out = dir.join("out");
    let status = Command::new(bin())
        .args(["--config", cfg.to_str().unwrap(), "--out", out.to_str().unwrap()])
        .status()
        .unwrap();
    assert!(status.success());
    let diag = std::fs::read_to_string(out.join("diagnostics.csv")).unwrap();
    assert!(diag.starts_with("t,slope,boundary_term,interior_term,energy_rate,dissipation_residual"));
    assert!(diag.lines().count() > 10);
    let summary = std::fs::read_to_string(out.join("summary.json")).unwrap();
    assert!(summary.contains("\"sublevel_lambda\":"));
    assert!(summary.contains("\"weak_diffusion\":"));
    std::fs::remove_dir_all(&dir).ok();
}

#[test]
fn density_file_initial_condition_and_physical_scaling() {
    let dir = tmp_dir("phys");
    // uniform probability density on B_2 written as a density file
    let mut density = String::from("radius,value\n");
    let val = 1.0 / (std::f64::consts::PI * 4.0);
    for i in 0..=200 {
        density.push_str(&format!("{},{}\n", 2.0 * i as f64 / 200.0, val));
    }
    let dpath = dir.join("density.csv");
    std::fs::write(&dpath, density).unwrap();
    let cfg_text = format!(
        "mode = simulate\nn = 2\nm = 40\ntau = 2e-3\nhorizon = 0.02\ninitial_radius = 2.0\ninitial_profile = density:{}\nsigma = 2.0\nbeta = 1.0\ntheta = 2.0\n",
        dpath.display()
    );
    let cfg = write_cfg(&dir, "run.cfg", &cfg_text);
    let out = dir.join("out");
    let status = Command::new(bin())
        .args(["--config", cfg.to_str().unwrap(), "--out", out.to_str().unwrap()])
        .status()
        .unwrap();
    assert!(status.success());
    let summary = std::fs::read_to_string(out.join("summary.json")).unwrap();
    // a = σ/(βϑ) = 1 for these parameters, time scale b = σ = 2
    assert!((json_f64(&summary, "length_scale") - 1.0).abs() < 1e-12);
    assert!((json_f64(&summary, "time_scale") - 2.0).abs() < 1e-12);
    assert!((json_f64(&summary, "kappa_scaled") - 0.5).abs() < 1e-12);
    std::fs::remove_dir_all(&dir).ok();
}

#[test]
fn sweep_mode_fans_out() {
    let dir = tmp_dir("sweep");
    let cfg = write_cfg(
        &dir,
        "run.cfg",
        "mode = sweep\nn = 2\nm = 24\nhorizon = 0.02\nsweep.tau = 2e-3,1e-3\nsweep.kappa = 1.0,2.0\n",
    );
    let out = dir.join("out");
    let status = Command::new(bin())
        .args(["--config", cfg.to_str().unwrap(), "--out", out.to_str().unwrap(), "--jobs", "2"])
        .status()
        .unwrap();
    assert!(status.success());
    let index = std::fs::read_to_string(out.join("sweep_index.csv")).unwrap();
    assert_eq!(index.lines().count(), 5, "{index}");
    for i in 0..4 {
        assert!(out.join(format!("run_{i:03}/summary.json")).exists());
    }
    std::fs::remove_dir_all(&dir).ok();
}

#[test]
fn invalid_configs_exit_with_code_one() {
    let dir = tmp_dir("bad");
    for text in [
        "mode = simulate\nn = 1\n",
        "mode = warp\n",
        "mode = simulate\nkappa = -2\n",
        "mode = simulate\ntau = 0\n",
        "mode = sweep\n",
        "this is not a key value line\n",
    ] {
        let cfg = write_cfg(&dir, "run.cfg", text);
        let out = dir.join("out");
        let status = Command::new(bin())
            .args(["--config", cfg.to_str().unwrap(), "--out", out.to_str().unwrap()])
            .status()
            .unwrap();
        assert_eq!(status.code(), Some(1), "config should be rejected: {text}");
    }
    std::fs::remove_dir_all(&dir).ok();
}

#[test]
fn oracle_mode_runs_and_audits_mass() {
    let dir = tmp_dir("oracle");
    let cfg = write_cfg(
        &dir,
        "run.cfg",
        "mode = oracle\nn = 2\nm = 40\nhorizon = 0.1\noracle_cells = 80\noracle_dt = 1e-3\nsample_dt = 0.02\n",
    );
    let out = dir.join("out");
    let status = Command::new(bin())
        .args(["--config", cfg.to_str().unwrap(), "--out", out.to_str().unwrap()])
        .status()
        .unwrap();
    assert!(status.success());
    let summary = std::fs::read_to_string(out.join("summary.json")).unwrap();
    assert!(summary.contains("\"method\":\"oracle\""));
    assert!(json_f64(&summary, "final_mass_error") < 1e-9);
    assert!(json_f64(&summary, "max_energy_increase") < 1e-10);
    let csv = std::fs::read_to_string(out.join("trajectory.csv")).unwrap();
    assert!(csv.starts_with("t,r,energy_total"));
    assert_eq!(csv.lines().count(), 7);
    std::fs::remove_dir_all(&dir).ok();
}
