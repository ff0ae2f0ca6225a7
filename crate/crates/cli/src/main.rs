//! Batch driver for the cell-swelling gradient-flow simulator.
//!
//! ```text
//! osmoflow --config run.cfg [--mode M] [--out DIR] [--override key=value]...
//!          [--seed N] [--jobs N]
//! ```
//!
//! Modes: simulate (minimizing-movement flow), oracle (finite-volume strong
//! solver), compare (both plus the ϱ-distance series), diagnose (flow plus
//! per-time variational diagnostics), equilibrium (stationary analysis),
//! sweep (cartesian product of `sweep.<key>` lists across worker threads).
//!
//! Physical parameters (σ, β, ϑ) are accepted in the config; the run itself
//! always happens in scaled variables, and the applied scale factors are
//! recorded in the summary. All CSV floats carry 17 significant digits, so a
//! fixed config and seed reproduce outputs byte for byte.
//!
//! Exit codes: 0 success, 1 invalid configuration, 2 solver failure (partial
//! outputs are kept and flagged in the summary), 3 I/O failure.

mod config;
mod json;

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use config::{InitialProfile, Mode, RunConfig};
use json::JsonObject;
use osmoflow::diagnostics::{dissipation_residual, evi_residual, local_slope, sublevel_lambda};
use osmoflow::io::{
    fmt_f64, read_density_csv, write_diagnostics_csv, write_profile_csv, write_trajectory_csv,
};
use osmoflow::pde::{
    compare, default_test_family, max_scaled_residuals, solve_strong_from_state,
    OracleCoefficients, OracleRun,
};
use osmoflow::scaling::to_scaled;
use osmoflow::*;

type CliResult<T> = std::result::Result<T, Failure>;

enum Failure {
    Config(String),
    Solver(String),
    Io(String),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        match &e {
            Error::Config(_) | Error::InvalidIntegrand(_) => Failure::Config(e.to_string()),
            Error::Io(_) => Failure::Io(e.to_string()),
            _ => Failure::Solver(e.to_string()),
        }
    }
}

fn main() -> ExitCode {
    let args: Vec<String> = std::env::args().skip(1).collect();
    match run(&args) {
        Ok(()) => ExitCode::from(0),
        Err(Failure::Config(msg)) => {
            eprintln!("config error: {msg}");
            ExitCode::from(1)
        }
        Err(Failure::Solver(msg)) => {
            eprintln!("solver failure: {msg}");
            ExitCode::from(2)
        }
        Err(Failure::Io(msg)) => {
            eprintln!("i/o error: {msg}");
            ExitCode::from(3)
        }
    }
}

fn run(args: &[String]) -> CliResult<()> {
    let mut config_path: Option<PathBuf> = None;
    let mut out_dir = PathBuf::from("out");
    let mut overrides: Vec<(String, String)> = Vec::new();
    let mut i = 0;
    while i < args.len() {
        let need_value = |i: usize| -> CliResult<&String> {
            args.get(i + 1)
                .ok_or_else(|| Failure::Config(format!("flag {} needs a value", args[i])))
        };
        match args[i].as_str() {
            "--config" => {
                config_path = Some(PathBuf::from(need_value(i)?));
                i += 2;
            }
            "--out" => {
                out_dir = PathBuf::from(need_value(i)?);
                i += 2;
            }
            "--mode" => {
                overrides.push(("mode".into(), need_value(i)?.clone()));
                i += 2;
            }
            "--seed" => {
                overrides.push(("seed".into(), need_value(i)?.clone()));
                i += 2;
            }
            "--jobs" => {
                overrides.push(("jobs".into(), need_value(i)?.clone()));
                i += 2;
            }
            "--override" => {
                let kv = need_value(i)?;
                let (k, v) = kv
                    .split_once('=')
                    .ok_or_else(|| Failure::Config(format!("--override '{kv}' is not key=value")))?;
                overrides.push((k.trim().into(), v.trim().into()));
                i += 2;
            }
            other => return Err(Failure::Config(format!("unknown flag '{other}'"))),
        }
    }

    let mut map = match &config_path {
        Some(p) => config::parse_file(p).map_err(Failure::from)?,
        None => BTreeMap::new(),
    };
    for (k, v) in overrides {
        map.insert(k, v);
    }
    let rc = RunConfig::resolve(&map).map_err(|e| Failure::Config(e.to_string()))?;

    std::fs::create_dir_all(&out_dir)
        .map_err(|e| Failure::Io(format!("cannot create {}: {e}", out_dir.display())))?;

    match rc.mode {
        Mode::Equilibrium => mode_equilibrium(&rc, &out_dir),
        Mode::Simulate => mode_flow(&rc, &out_dir, false),
        Mode::Diagnose => mode_flow(&rc, &out_dir, true),
        Mode::Oracle => mode_oracle(&rc, &out_dir),
        Mode::Compare => mode_compare(&rc, &out_dir),
        Mode::Sweep => mode_sweep(&rc, &map, &out_dir),
    }
}

/// Initial state in physical variables.
fn build_initial(rc: &RunConfig) -> CliResult<RadialState> {
    let profile = match &rc.initial_profile {
        InitialProfile::Uniform => QuantileProfile::uniform(rc.dim, rc.initial_radius, rc.m)?,
        InitialProfile::DensityFile(path) => {
            let density = read_density_csv(path, rc.dim)?;
            quantiles_from_density(&density, rc.m)?
        }
    };
    Ok(RadialState::new(BallRadius::new(rc.initial_radius)?, profile)?)
}

/// Physical initial data mapped into scaled variables, with the scaled
/// horizon and metric.
struct ScaledSetup {
    initial: RadialState,
    horizon: f64,
    cfg: MetricConfig,
    length_scale: f64,
    time_scale: f64,
}

fn scaled_setup(rc: &RunConfig) -> CliResult<ScaledSetup> {
    let params = rc.physical();
    let physical = build_initial(rc)?;
    let (initial, _, kappa_scaled) = to_scaled(&params, &physical, 0.0)?;
    Ok(ScaledSetup {
        initial,
        horizon: params.time_scale() * rc.horizon,
        cfg: rc.metric(kappa_scaled),
        length_scale: params.length_scale(),
        time_scale: params.time_scale(),
    })
}

fn write_text(path: &Path, text: &str) -> CliResult<()> {
    std::fs::write(path, text).map_err(|e| Failure::Io(format!("{}: {e}", path.display())))
}

fn config_json(rc: &RunConfig) -> String {
    let mut o = JsonObject::new();
    for (k, v) in &rc.echo {
        o.str(k, v);
    }
    o.finish()
}

fn validation_json(report: &IntegrandReport) -> String {
    let mut o = JsonObject::new();
    o.str("integrand", &report.name)
        .bool("zero_at_zero", report.zero_at_zero)
        .bool("convex", report.convex)
        .bool("superlinear", report.superlinear)
        .bool("f_hat_monotone", report.f_hat_monotone)
        .bool("coercive", report.coercive)
        .bool("mccann", report.mccann);
    match report.doubling_constant {
        Some(c) => o.f64("doubling_constant", c),
        None => o.bool("doubling", false),
    };
    o.bool("usable", report.usable());
    o.finish()
}

fn scale_json(s: &ScaledSetup) -> String {
    let mut o = JsonObject::new();
    o.f64("length_scale", s.length_scale)
        .f64("time_scale", s.time_scale)
        .f64("kappa_scaled", s.cfg.kappa);
    o.finish()
}

fn final_state_json(traj: &Trajectory, f: &EntropyIntegrand, cfg: &MetricConfig) -> String {
    let k = traj.len() - 1;
    let s = &traj.states[k];
    let mut o = JsonObject::new();
    o.f64("t", traj.times[k])
        .f64("r", s.radius().value())
        .f64("energy_total", traj.energy(k))
        .f64("energy_perimeter", traj.records[k].energy.perimeter_term)
        .f64("energy_internal", traj.records[k].energy.internal_term);
    if let Ok(slope) = local_slope(s, f, cfg) {
        o.f64("slope", slope.slope());
    }
    o.finish()
}

/// Worst-case margins observed along a trajectory.
fn invariants_json(traj: &Trajectory, f: &EntropyIntegrand, cfg: &MetricConfig) -> String {
    let mut worst_resid = 0.0f64;
    let mut worst_opt = 0.0f64;
    for k in 1..traj.len().saturating_sub(1) {
        if let Ok(d) = dissipation_residual(traj, traj.times[k], f, cfg) {
            worst_resid = worst_resid.max(d.residual.abs());
        }
        worst_opt = worst_opt.max(traj.records[k].opt_residual);
    }
    let mut o = JsonObject::new();
    o.f64("max_energy_increase", traj.max_energy_increase())
        .f64("dissipation_gap", traj.dissipation_gap())
        .f64("max_dissipation_residual", worst_resid)
        .f64("max_opt_residual", worst_opt)
        .usize("samples", traj.len());
    o.finish()
}

fn weak_residual_json(traj: &Trajectory, f: &EntropyIntegrand, cfg: &MetricConfig) -> CliResult<String> {
    let r_max = traj.states.iter().map(|s| s.radius().value()).fold(0.0f64, f64::max);
    let family = default_test_family(traj.horizon(), r_max);
    let (d, b) = max_scaled_residuals(traj, &family, f, cfg)?;
    let mut o = JsonObject::new();
    o.f64("weak_diffusion", d).f64("weak_boundary", b);
    Ok(o.finish())
}

fn write_snapshots(out: &Path, traj: &Trajectory, stride: usize) -> CliResult<()> {
    if stride == 0 {
        return Ok(());
    }
    let mut k = 0;
    while k < traj.len() {
        write_profile_csv(&out.join(format!("profile_{k}.csv")), traj.states[k].profile())?;
        k += stride;
    }
    Ok(())
}

fn mode_equilibrium(rc: &RunConfig, out: &Path) -> CliResult<()> {
    let report = validate_integrand(&rc.integrand, &rc.dim);
    let rstar = equilibrium_radius(&rc.integrand, &rc.dim)?;
    let floor = energy_floor(rstar, &rc.integrand, &rc.dim)?;
    let mut o = JsonObject::new();
    o.str("mode", "equilibrium")
        .raw("config", &config_json(rc))
        .raw("integrand_validation", &validation_json(&report))
        .f64("equilibrium_radius", rstar.value())
        .f64("equilibrium_energy", floor)
        .str("status", "ok");
    write_text(&out.join("summary.json"), &o.finish())?;
    println!("equilibrium radius {} energy {}", rstar.value(), floor);
    Ok(())
}

fn mode_flow(rc: &RunConfig, out: &Path, diagnose: bool) -> CliResult<()> {
    let f = &rc.integrand;
    let report = osmoflow::energy::require_valid_integrand(f, &rc.dim)?;
    let setup = scaled_setup(rc)?;
    let traj = run_flow(&setup.initial, setup.horizon, f, &setup.cfg, &rc.jko())?;

    write_trajectory_csv(&out.join("trajectory.csv"), &traj, f, &setup.cfg)?;
    write_snapshots(out, &traj, rc.snapshot_stride)?;
    if diagnose {
        write_diagnostics_csv(&out.join("diagnostics.csv"), &traj, f, &setup.cfg)?;
    }

    let mut o = JsonObject::new();
    o.str("mode", if diagnose { "diagnose" } else { "simulate" })
        .raw("config", &config_json(rc))
        .raw("scale", &scale_json(&setup))
        .raw("integrand_validation", &validation_json(&report))
        .raw("final_state", &final_state_json(&traj, f, &setup.cfg))
        .raw("invariants", &invariants_json(&traj, f, &setup.cfg));
    if diagnose {
        o.raw("residuals", &weak_residual_json(&traj, f, &setup.cfg)?);
        // probe the evolution variational inequality against the equilibrium
        let eq = discrete_energy_minimizer(f, &setup.cfg, rc.m)?;
        let mut worst_evi = f64::NEG_INFINITY;
        for k in 1..traj.len().saturating_sub(1) {
            if let Ok(v) = evi_residual(&traj, traj.times[k], &eq, 0.0, f, &setup.cfg) {
                worst_evi = worst_evi.max(v);
            }
        }
        o.f64("max_evi_residual", worst_evi);
        if rc.dim.n() == 2 || rc.variant == MetricVariant::Permeability {
            if let Ok(lam) = sublevel_lambda(traj.energy(0) + 1e-9, f, &setup.cfg) {
                o.f64("sublevel_lambda", lam);
            }
        }
    }
    let status = match &traj.aborted {
        None => "ok".to_string(),
        Some(msg) => format!("aborted: {msg}"),
    };
    o.str("status", &status);
    write_text(&out.join("summary.json"), &o.finish())?;
    println!(
        "flow finished at t = {} with r = {}",
        traj.horizon(),
        traj.states.last().unwrap().radius().value()
    );
    if traj.aborted.is_some() {
        return Err(Failure::Solver(status));
    }
    Ok(())
}

fn run_oracle(rc: &RunConfig, setup: &ScaledSetup) -> CliResult<OracleRun> {
    Ok(solve_strong_from_state(
        &setup.initial,
        setup.horizon,
        &rc.integrand,
        &setup.cfg,
        &rc.oracle_grid(),
        &OracleCoefficients::default(),
    )?)
}

fn oracle_json(run: &OracleRun) -> String {
    let mut o = JsonObject::new();
    o.str("method", "oracle")
        .f64("max_mass_drift", run.max_mass_drift)
        .f64("final_mass_error", run.final_mass_error)
        .f64("max_energy_increase", run.max_energy_increase)
        .usize("steps", run.steps);
    o.finish()
}

fn mode_oracle(rc: &RunConfig, out: &Path) -> CliResult<()> {
    let f = &rc.integrand;
    let report = osmoflow::energy::require_valid_integrand(f, &rc.dim)?;
    let setup = scaled_setup(rc)?;
    let run = run_oracle(rc, &setup)?;
    write_trajectory_csv(&out.join("trajectory.csv"), &run.traj, f, &setup.cfg)?;
    write_snapshots(out, &run.traj, rc.snapshot_stride)?;
    let mut o = JsonObject::new();
    o.str("mode", "oracle")
        .raw("config", &config_json(rc))
        .raw("scale", &scale_json(&setup))
        .raw("integrand_validation", &validation_json(&report))
        .raw("final_state", &final_state_json(&run.traj, f, &setup.cfg))
        .raw("oracle", &oracle_json(&run))
        .raw("residuals", &weak_residual_json(&run.traj, f, &setup.cfg)?)
        .str("status", "ok");
    write_text(&out.join("summary.json"), &o.finish())?;
    println!(
        "oracle finished at t = {} with r = {}",
        run.traj.horizon(),
        run.traj.states.last().unwrap().radius().value()
    );
    Ok(())
}

fn mode_compare(rc: &RunConfig, out: &Path) -> CliResult<()> {
    let f = &rc.integrand;
    let report = osmoflow::energy::require_valid_integrand(f, &rc.dim)?;
    let setup = scaled_setup(rc)?;
    let traj = run_flow(&setup.initial, setup.horizon, f, &setup.cfg, &rc.jko())?;
    // oracle samples must land on the flow's time grid
    let mut grid = rc.oracle_grid();
    grid.sample_dt = (grid.sample_dt / rc.tau).round().max(1.0) * rc.tau;
    let oracle = solve_strong_from_state(
        &setup.initial,
        setup.horizon,
        f,
        &setup.cfg,
        &grid,
        &OracleCoefficients::default(),
    )?;
    write_trajectory_csv(&out.join("trajectory.csv"), &traj, f, &setup.cfg)?;
    write_trajectory_csv(&out.join("trajectory_oracle.csv"), &oracle.traj, f, &setup.cfg)?;
    write_snapshots(out, &traj, rc.snapshot_stride)?;

    let rep = compare(&traj, &oracle.traj, &setup.cfg)?;
    let mut csv = String::from("t,rho_distance\n");
    for (t, d) in rep.times.iter().zip(&rep.dists) {
        csv.push_str(&format!("{},{}\n", fmt_f64(*t), fmt_f64(*d)));
    }
    write_text(&out.join("compare.csv"), &csv)?;

    let (jd, jb) = {
        let r_max = traj.states.iter().map(|s| s.radius().value()).fold(0.0f64, f64::max);
        max_scaled_residuals(&traj, &default_test_family(traj.horizon(), r_max), f, &setup.cfg)?
    };
    let mut res = JsonObject::new();
    res.f64("weak_diffusion", jd).f64("weak_boundary", jb);

    let mut o = JsonObject::new();
    o.str("mode", "compare")
        .raw("config", &config_json(rc))
        .raw("scale", &scale_json(&setup))
        .raw("integrand_validation", &validation_json(&report))
        .raw("final_state", &final_state_json(&traj, f, &setup.cfg))
        .raw("invariants", &invariants_json(&traj, f, &setup.cfg))
        .raw("oracle", &oracle_json(&oracle))
        .raw("residuals", &res.finish())
        .f64("max_rho_distance", rep.max_dist);
    let status = match &traj.aborted {
        None => "ok".to_string(),
        Some(msg) => format!("aborted: {msg}"),
    };
    o.str("status", &status);
    write_text(&out.join("summary.json"), &o.finish())?;
    println!("max rho distance {}", rep.max_dist);
    if traj.aborted.is_some() {
        return Err(Failure::Solver(status));
    }
    Ok(())
}

fn mode_sweep(rc: &RunConfig, base: &BTreeMap<String, String>, out: &Path) -> CliResult<()> {
    // cartesian product over the sweep lists, keys in sorted order
    let keys: Vec<&String> = rc.sweeps.keys().collect();
    let mut combos: Vec<Vec<(String, String)>> = vec![Vec::new()];
    for k in &keys {
        let mut next = Vec::new();
        for combo in &combos {
            for v in &rc.sweeps[k.as_str()] {
                let mut c = combo.clone();
                c.push(((*k).clone(), v.clone()));
                next.push(c);
            }
        }
        combos = next;
    }

    let sweep_mode = base.get("sweep_mode").cloned().unwrap_or_else(|| "simulate".into());
    Mode::parse(&sweep_mode).map_err(Failure::from)?;
    if sweep_mode == "sweep" {
        return Err(Failure::Config("sweep_mode cannot itself be sweep".into()));
    }

    // resolve every run configuration up front: an invalid combination must
    // fail before any computation starts
    let mut jobs: Vec<(usize, BTreeMap<String, String>, PathBuf)> = Vec::new();
    for (idx, combo) in combos.iter().enumerate() {
        let mut map = base.clone();
        map.retain(|k, _| !k.starts_with("sweep.") && k != "sweep_mode");
        map.insert("mode".into(), sweep_mode.clone());
        map.insert("seed".into(), (rc.seed + idx as u64).to_string());
        for (k, v) in combo {
            map.insert(k.clone(), v.clone());
        }
        RunConfig::resolve(&map).map_err(|e| Failure::Config(e.to_string()))?;
        jobs.push((idx, map, out.join(format!("run_{idx:03}"))));
    }

    let worker_count = rc.jobs.min(jobs.len()).max(1);
    let next_job = std::sync::atomic::AtomicUsize::new(0);
    let results: Vec<std::sync::Mutex<Option<String>>> =
        (0..jobs.len()).map(|_| std::sync::Mutex::new(None)).collect();
    std::thread::scope(|scope| {
        for _ in 0..worker_count {
            scope.spawn(|| loop {
                let i = next_job.fetch_add(1, std::sync::atomic::Ordering::SeqCst);
                if i >= jobs.len() {
                    break;
                }
                let (_, map, dir) = &jobs[i];
                let status = match run_one(map, dir) {
                    Ok(()) => "ok".to_string(),
                    Err(Failure::Config(m)) => format!("config error: {m}"),
                    Err(Failure::Solver(m)) => format!("solver failure: {m}"),
                    Err(Failure::Io(m)) => format!("io error: {m}"),
                };
                *results[i].lock().unwrap() = Some(status);
            });
        }
    });

    let mut index = String::from("run,dir,assignments,status\n");
    let mut all_ok = true;
    for (i, combo) in combos.iter().enumerate() {
        let status = results[i].lock().unwrap().clone().unwrap_or_else(|| "missing".into());
        all_ok &= status == "ok";
        let assignment = combo
            .iter()
            .map(|(k, v)| format!("{k}={v}"))
            .collect::<Vec<_>>()
            .join(";");
        index.push_str(&format!("{i},run_{i:03},{assignment},{status}\n"));
    }
    write_text(&out.join("sweep_index.csv"), &index)?;
    println!("sweep finished: {} runs", combos.len());
    if all_ok {
        Ok(())
    } else {
        Err(Failure::Solver("one or more sweep runs failed".into()))
    }
}

fn run_one(map: &BTreeMap<String, String>, out: &Path) -> CliResult<()> {
    let rc = RunConfig::resolve(map).map_err(|e| Failure::Config(e.to_string()))?;
    std::fs::create_dir_all(out)
        .map_err(|e| Failure::Io(format!("cannot create {}: {e}", out.display())))?;
    match rc.mode {
        Mode::Equilibrium => mode_equilibrium(&rc, out),
        Mode::Simulate => mode_flow(&rc, out, false),
        Mode::Diagnose => mode_flow(&rc, out, true),
        Mode::Oracle => mode_oracle(&rc, out),
        Mode::Compare => mode_compare(&rc, out),
        Mode::Sweep => Err(Failure::Config("nested sweep".into())),
    }
}
