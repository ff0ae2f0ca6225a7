//! Flat key=value run configuration.
//!
//! The file format is plain text: one `key = value` pair per line, `#`
//! comments, no sections. Command-line `--override key=value` entries win
//! over the file. Keys prefixed `sweep.` hold comma-separated lists and are
//! expanded by the sweep driver into a cartesian product of runs.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use osmoflow::{Dimension, EntropyIntegrand, Error, JkoConfig, MetricConfig, MetricVariant, Result};
use osmoflow::pde::{OracleGrid, OracleScheme};
use osmoflow::scaling::PhysicalParams;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    Simulate,
    Oracle,
    Compare,
    Diagnose,
    Equilibrium,
    Sweep,
}

impl Mode {
    pub fn parse(s: &str) -> Result<Mode> {
        Ok(match s {
            "simulate" => Mode::Simulate,
            "oracle" => Mode::Oracle,
            "compare" => Mode::Compare,
            "diagnose" => Mode::Diagnose,
            "equilibrium" => Mode::Equilibrium,
            "sweep" => Mode::Sweep,
            other => return Err(Error::Config(format!("unknown mode '{other}'"))),
        })
    }

    pub fn as_str(&self) -> &'static str {
        match self {
            Mode::Simulate => "simulate",
            Mode::Oracle => "oracle",
            Mode::Compare => "compare",
            Mode::Diagnose => "diagnose",
            Mode::Equilibrium => "equilibrium",
            Mode::Sweep => "sweep",
        }
    }
}

#[derive(Debug, Clone)]
pub enum InitialProfile {
    Uniform,
    DensityFile(PathBuf),
}

/// Fully resolved and validated run configuration.
#[derive(Debug, Clone)]
pub struct RunConfig {
    pub mode: Mode,
    pub dim: Dimension,
    pub kappa: f64,
    pub variant: MetricVariant,
    pub integrand: EntropyIntegrand,
    pub m: usize,
    pub tau: f64,
    pub horizon: f64,
    pub snapshot_stride: usize,
    pub initial_radius: f64,
    pub initial_profile: InitialProfile,
    pub oracle_cells: usize,
    pub oracle_dt: f64,
    pub oracle_scheme: OracleScheme,
    pub sample_dt: f64,
    pub sigma: f64,
    pub beta: f64,
    pub theta: f64,
    pub opt_tol: f64,
    pub max_iters: usize,
    pub seed: u64,
    pub jobs: usize,
    /// sweep lists, key → values (only meaningful in sweep mode)
    pub sweeps: BTreeMap<String, Vec<String>>,
    /// resolved scalar entries, echoed into the summary
    pub echo: BTreeMap<String, String>,
}

pub fn parse_file(path: &Path) -> Result<BTreeMap<String, String>> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
    parse_text(&text)
}

pub fn parse_text(text: &str) -> Result<BTreeMap<String, String>> {
    let mut map = BTreeMap::new();
    for (lineno, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (k, v) = line
            .split_once('=')
            .ok_or_else(|| Error::Config(format!("line {}: expected key = value", lineno + 1)))?;
        map.insert(k.trim().to_string(), v.trim().to_string());
    }
    Ok(map)
}

fn get_f64(map: &BTreeMap<String, String>, key: &str, default: f64) -> Result<f64> {
    match map.get(key) {
        None => Ok(default),
        Some(v) => v
            .parse::<f64>()
            .map_err(|_| Error::Config(format!("{key} = '{v}' is not a number"))),
    }
}

fn get_usize(map: &BTreeMap<String, String>, key: &str, default: usize) -> Result<usize> {
    match map.get(key) {
        None => Ok(default),
        Some(v) => v
            .parse::<usize>()
            .map_err(|_| Error::Config(format!("{key} = '{v}' is not a nonnegative integer"))),
    }
}

impl RunConfig {
    /// Resolve raw entries into a validated configuration. Every failure is
    /// a config error; nothing is computed until the whole map validates.
    pub fn resolve(map: &BTreeMap<String, String>) -> Result<RunConfig> {
        let mode = Mode::parse(map.get("mode").map(String::as_str).unwrap_or("simulate"))?;
        let n = get_usize(map, "n", 2)? as u32;
        let dim = Dimension::new(n)?;
        let kappa = get_f64(map, "kappa", 1.0)?;
        let variant = match map.get("variant").map(String::as_str).unwrap_or("surface_tension") {
            "surface_tension" => MetricVariant::SurfaceTension,
            "permeability" => MetricVariant::Permeability,
            other => return Err(Error::Config(format!("unknown variant '{other}'"))),
        };
        let integrand =
            EntropyIntegrand::by_name(map.get("integrand").map(String::as_str).unwrap_or("zlogz"))?;
        let m = get_usize(map, "m", 200)?;
        let tau = get_f64(map, "tau", 1e-3)?;
        let horizon = get_f64(map, "horizon", 1.0)?;
        let snapshot_stride = get_usize(map, "snapshot_stride", 0)?;
        let initial_radius = get_f64(map, "initial_radius", 1.0)?;
        let initial_profile = match map.get("initial_profile").map(String::as_str).unwrap_or("uniform")
        {
            "uniform" => InitialProfile::Uniform,
            other => match other.strip_prefix("density:") {
                Some(p) => InitialProfile::DensityFile(PathBuf::from(p)),
                None => {
                    return Err(Error::Config(format!("unknown initial_profile '{other}'")))
                }
            },
        };
        let oracle_cells = get_usize(map, "oracle_cells", 400)?;
        let oracle_dt = get_f64(map, "oracle_dt", 1e-3)?;
        let oracle_scheme = match map.get("oracle_scheme").map(String::as_str).unwrap_or("semi_implicit")
        {
            "semi_implicit" => OracleScheme::SemiImplicit,
            "explicit" => OracleScheme::Explicit,
            other => return Err(Error::Config(format!("unknown oracle_scheme '{other}'"))),
        };
        let sample_dt = get_f64(map, "sample_dt", 0.01)?;
        let sigma = get_f64(map, "sigma", 1.0)?;
        let beta = get_f64(map, "beta", 1.0)?;
        let theta = get_f64(map, "theta", 1.0)?;
        let opt_tol = get_f64(map, "opt_tol", 2e-6)?;
        let max_iters = get_usize(map, "max_iters", 120)?;
        let seed = get_usize(map, "seed", 0)? as u64;
        let jobs = get_usize(map, "jobs", 1)?.max(1);

        let mut sweeps = BTreeMap::new();
        for (k, v) in map {
            if let Some(name) = k.strip_prefix("sweep.") {
                let values: Vec<String> =
                    v.split(',').map(|s| s.trim().to_string()).filter(|s| !s.is_empty()).collect();
                if values.is_empty() {
                    return Err(Error::Config(format!("sweep key '{k}' has no values")));
                }
                sweeps.insert(name.to_string(), values);
            }
        }

        // validation that needs no computation
        if !(kappa > 0.0) {
            return Err(Error::Config(format!("kappa = {kappa} must be positive")));
        }
        if m == 0 {
            return Err(Error::Config("m must be positive".into()));
        }
        if !(tau > 0.0) || !(horizon > 0.0) || !(sample_dt > 0.0) || !(oracle_dt > 0.0) {
            return Err(Error::Config("tau, horizon, sample_dt, oracle_dt must be positive".into()));
        }
        if !(initial_radius > 0.0) {
            return Err(Error::Config(format!("initial_radius = {initial_radius} must be positive")));
        }
        if mode == Mode::Sweep && sweeps.is_empty() {
            return Err(Error::Config("sweep mode needs at least one sweep.<key> list".into()));
        }
        // physical parameters must form a valid scaling
        PhysicalParams::new(kappa, sigma, beta, theta, dim)?;

        let mut echo = map.clone();
        echo.insert("mode".into(), mode.as_str().into());

        Ok(RunConfig {
            mode,
            dim,
            kappa,
            variant,
            integrand,
            m,
            tau,
            horizon,
            snapshot_stride,
            initial_radius,
            initial_profile,
            oracle_cells,
            oracle_dt,
            oracle_scheme,
            sample_dt,
            sigma,
            beta,
            theta,
            opt_tol,
            max_iters,
            seed,
            jobs,
            sweeps,
            echo,
        })
    }

    pub fn metric(&self, kappa: f64) -> MetricConfig {
        MetricConfig::new(self.dim, kappa, self.variant).unwrap()
    }

    pub fn jko(&self) -> JkoConfig {
        JkoConfig {
            m: self.m,
            tau: self.tau,
            opt_tol: self.opt_tol,
            max_iters: self.max_iters,
            ..JkoConfig::default()
        }
    }

    pub fn oracle_grid(&self) -> OracleGrid {
        OracleGrid {
            cells: self.oracle_cells,
            dt: self.oracle_dt,
            scheme: self.oracle_scheme,
            sample_dt: self.sample_dt,
            quantile_cells: self.m,
        }
    }

    pub fn physical(&self) -> PhysicalParams {
        PhysicalParams::new(self.kappa, self.sigma, self.beta, self.theta, self.dim).unwrap()
    }
}
