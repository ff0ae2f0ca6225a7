//! CSV serialization of profiles, densities, trajectories and diagnostics.
//!
//! All floats are written with 17 significant digits (`{:.17e}`), which
//! round-trips f64 losslessly and keeps outputs byte-identical across runs.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use crate::diagnostics::{dissipation_residual, energy_rate, local_slope};
use crate::energy::EntropyIntegrand;
use crate::error::{Error, Result};
use crate::geometry::Dimension;
use crate::jko::Trajectory;
use crate::profile::{QuantileProfile, RadialDensity};
use crate::state::MetricConfig;

/// Lossless decimal rendering of an f64.
pub fn fmt_f64(x: f64) -> String {
    format!("{x:.17e}")
}

fn io_err<E: std::fmt::Display>(e: E) -> Error {
    Error::Io(e.to_string())
}

/// `sigma,quantile` rows, one per mass cell.
pub fn write_profile_csv(path: &Path, u: &QuantileProfile) -> Result<()> {
    let mut w = BufWriter::new(File::create(path).map_err(io_err)?);
    writeln!(w, "sigma,quantile").map_err(io_err)?;
    for (i, q) in u.quantiles().iter().enumerate() {
        writeln!(w, "{},{}", fmt_f64(u.sigma(i)), fmt_f64(*q)).map_err(io_err)?;
    }
    Ok(())
}

/// `radius,value` rows.
pub fn write_density_csv(path: &Path, d: &RadialDensity) -> Result<()> {
    let mut w = BufWriter::new(File::create(path).map_err(io_err)?);
    writeln!(w, "radius,value").map_err(io_err)?;
    for (r, v) in d.grid.iter().zip(&d.values) {
        writeln!(w, "{},{}", fmt_f64(*r), fmt_f64(*v)).map_err(io_err)?;
    }
    Ok(())
}

/// Read a `radius,value` density file.
pub fn read_density_csv(path: &Path, dim: Dimension) -> Result<RadialDensity> {
    let reader = BufReader::new(File::open(path).map_err(io_err)?);
    let mut grid = Vec::new();
    let mut values = Vec::new();
    for (lineno, line) in reader.lines().enumerate() {
        let line = line.map_err(io_err)?;
        let line = line.trim();
        if line.is_empty() || (lineno == 0 && line.starts_with("radius")) {
            continue;
        }
        let mut parts = line.split(',');
        let r: f64 = parts
            .next()
            .ok_or_else(|| Error::Io(format!("line {lineno}: missing radius")))?
            .trim()
            .parse()
            .map_err(io_err)?;
        let v: f64 = parts
            .next()
            .ok_or_else(|| Error::Io(format!("line {lineno}: missing value")))?
            .trim()
            .parse()
            .map_err(io_err)?;
        grid.push(r);
        values.push(v);
    }
    RadialDensity::new(dim, grid, values)
}

/// Trajectory rows:
/// `t,r,energy_total,energy_perimeter,energy_internal,step_dist,slope,dissipation_residual`.
/// The dissipation residual needs two neighbors; the first and last rows
/// repeat the nearest interior value.
pub fn write_trajectory_csv(
    path: &Path,
    traj: &Trajectory,
    f: &EntropyIntegrand,
    cfg: &MetricConfig,
) -> Result<()> {
    let mut w = BufWriter::new(File::create(path).map_err(io_err)?);
    writeln!(w, "t,r,energy_total,energy_perimeter,energy_internal,step_dist,slope,dissipation_residual")
        .map_err(io_err)?;
    let k_count = traj.len();
    let residual_at = |k: usize| -> f64 {
        let kk = k.clamp(1, k_count.saturating_sub(2));
        dissipation_residual(traj, traj.times[kk], f, cfg)
            .map(|d| d.residual)
            .unwrap_or(f64::NAN)
    };
    for k in 0..k_count {
        let rec = &traj.records[k];
        let slope = local_slope(&traj.states[k], f, cfg).map(|s| s.slope()).unwrap_or(f64::NAN);
        let resid = if k_count >= 3 { residual_at(k) } else { f64::NAN };
        writeln!(
            w,
            "{},{},{},{},{},{},{},{}",
            fmt_f64(traj.times[k]),
            fmt_f64(traj.states[k].radius().value()),
            fmt_f64(rec.energy.total()),
            fmt_f64(rec.energy.perimeter_term),
            fmt_f64(rec.energy.internal_term),
            fmt_f64(rec.step_dist),
            fmt_f64(slope),
            fmt_f64(resid),
        )
        .map_err(io_err)?;
    }
    Ok(())
}

/// Diagnostics rows over the interior samples:
/// `t,slope,boundary_term,interior_term,energy_rate,dissipation_residual`.
pub fn write_diagnostics_csv(
    path: &Path,
    traj: &Trajectory,
    f: &EntropyIntegrand,
    cfg: &MetricConfig,
) -> Result<()> {
    let mut w = BufWriter::new(File::create(path).map_err(io_err)?);
    writeln!(w, "t,slope,boundary_term,interior_term,energy_rate,dissipation_residual")
        .map_err(io_err)?;
    for k in 1..traj.len().saturating_sub(1) {
        let t = traj.times[k];
        let s = local_slope(&traj.states[k], f, cfg)?;
        let rate = energy_rate(traj, t, f, cfg)?;
        let resid = dissipation_residual(traj, t, f, cfg)?.residual;
        writeln!(
            w,
            "{},{},{},{},{},{}",
            fmt_f64(t),
            fmt_f64(s.slope()),
            fmt_f64(s.boundary_term),
            fmt_f64(s.interior_term),
            fmt_f64(rate),
            fmt_f64(resid),
        )
        .map_err(io_err)?;
    }
    Ok(())
}
