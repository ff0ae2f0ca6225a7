//! Independent strong-form solver for the free-boundary diffusion problem,
//! plus weak-form residual evaluation for cross-validation.
//!
//! The moving domain B_{r(t)} is mapped to the fixed interval y = ρ/r(t) and
//! the mass equation is discretized in conservative finite-volume form. With
//! F(y) = n ωₙ (κ r^{n-2} y^{n-1} ∂_y ĥf(u) + r^{n-1} r' yⁿ u), each cell
//! mass obeys d(mass_j)/dt = F(y_{j+1}) − F(y_j); the moving-mesh advection
//! is the yⁿ term. The no-flux condition −κ ∂ρ ĥf(u)|_r = u(r) r' makes the
//! total flux at y = 1 vanish identically, so the outer face flux is set to
//! zero and discrete mass is conserved to rounding.
//!
//! The boundary ODE is advanced by explicit Euler, staggered with the
//! interior update:
//!
//! ```text
//! r' = −σ(n−1)/r + β ĥf(u(r))                (surface tension)
//! P(r) r' = −σ(n−1)/r + β ĥf(u(r))           (permeability)
//! ```
//!
//! Two interior schemes are available: fully explicit with an adaptive
//! parabolic step bound, and a linearly implicit scheme (lagged diffusivity,
//! implicit donor-cell advection) that solves one tridiagonal system per
//! step and keeps densities nonnegative at any step size.

use crate::energy::{total_energy, EntropyIntegrand};
use crate::error::{Error, Result};
use crate::geometry::{BallRadius, MetricVariant};
use crate::jko::{StepRecord, Trajectory, TrajectoryKind};
use crate::profile::{QuantileProfile, RadialDensity};
use crate::state::{rho_dist, MetricConfig, RadialState};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OracleScheme {
    Explicit,
    SemiImplicit,
}

/// Spatial resolution, step size, snapshot cadence, and the quantile count
/// used when converting snapshots to states.
#[derive(Debug, Clone, Copy)]
pub struct OracleGrid {
    pub cells: usize,
    pub dt: f64,
    pub scheme: OracleScheme,
    pub sample_dt: f64,
    pub quantile_cells: usize,
}

impl OracleGrid {
    pub fn new(cells: usize, dt: f64, scheme: OracleScheme) -> Self {
        Self { cells, dt, scheme, sample_dt: dt * 10.0, quantile_cells: 100 }
    }

    pub fn validate(&self) -> Result<()> {
        if self.cells < 4 {
            return Err(Error::Config("oracle grid needs at least 4 cells".into()));
        }
        if !(self.dt > 0.0) || !(self.sample_dt > 0.0) {
            return Err(Error::Config("oracle steps must be positive".into()));
        }
        if self.quantile_cells == 0 {
            return Err(Error::Config("quantile cell count must be positive".into()));
        }
        Ok(())
    }
}

/// Boundary-law coefficients and total mass of the physical problem; all 1
/// in scaled variables.
#[derive(Debug, Clone, Copy)]
pub struct OracleCoefficients {
    pub sigma: f64,
    pub beta: f64,
    pub mass: f64,
}

impl Default for OracleCoefficients {
    fn default() -> Self {
        Self { sigma: 1.0, beta: 1.0, mass: 1.0 }
    }
}

/// Output of a solver run: sampled trajectory plus solver-level audits.
#[derive(Debug, Clone)]
pub struct OracleRun {
    pub traj: Trajectory,
    /// σ P(r) + β ∫ f(u) dx at the sample times (finite-volume quadrature)
    pub fv_energy: Vec<f64>,
    /// worst per-step conservation defect, relative to the total mass
    pub max_mass_drift: f64,
    /// largest single fine-step increase of the finite-volume energy
    pub max_energy_increase: f64,
    /// |total mass at the horizon − initial mass| / initial mass
    pub final_mass_error: f64,
    pub steps: usize,
}

struct Fv {
    nf: f64,
    n_exp: i32,
    omega: f64,
    kappa: f64,
    variant: MetricVariant,
    coeff: OracleCoefficients,
    /// face coordinates yⁿ (faces 0..=J); uniform y-spacing
    yfn: Vec<f64>,
    dy: f64,
    u: Vec<f64>,
    r: f64,
}

impl Fv {
    fn cell_vol(&self, i: usize, r: f64) -> f64 {
        self.omega * r.powi(self.n_exp) * (self.yfn[i + 1] - self.yfn[i])
    }

    fn trace(&self) -> f64 {
        let j = self.u.len();
        (1.5 * self.u[j - 1] - 0.5 * self.u[j - 2]).max(0.0)
    }

    fn boundary_velocity(&self, f: &EntropyIntegrand) -> f64 {
        let drive = -self.coeff.sigma * (self.nf - 1.0) / self.r
            + self.coeff.beta * f.f_hat(self.trace());
        match self.variant {
            MetricVariant::SurfaceTension => drive,
            MetricVariant::Permeability => {
                drive / (self.nf * self.omega * self.r.powi(self.n_exp - 1))
            }
        }
    }

    /// secant slope of ĥf across a face; falls back to a centered secant at
    /// the midpoint when the two values coincide
    fn face_diffusivity(&self, a: f64, b: f64, f: &EntropyIntegrand) -> f64 {
        let du = b - a;
        if du.abs() > 1e-12 * (a.abs() + b.abs() + 1e-30) {
            ((f.f_hat(b) - f.f_hat(a)) / du).max(0.0)
        } else {
            let m = 0.5 * (a + b);
            let d = 1e-6 * m.max(1e-12);
            ((f.f_hat(m + d) - f.f_hat(m - d)) / (2.0 * d)).max(0.0)
        }
    }

    fn energy(&self, f: &EntropyIntegrand) -> f64 {
        let p = self.nf * self.omega * self.r.powi(self.n_exp - 1);
        let mut internal = 0.0;
        for i in 0..self.u.len() {
            internal += f.f(self.u[i]) * self.cell_vol(i, self.r);
        }
        self.coeff.sigma * p + self.coeff.beta * internal
    }

    /// one step of size dt; returns the conservation defect
    fn step(&mut self, dt: f64, f: &EntropyIntegrand, scheme: OracleScheme) -> Result<f64> {
        let j = self.u.len();
        let v = self.boundary_velocity(f);
        let r_old = self.r;
        let r_new = r_old + dt * v;
        if r_new <= 0.0 {
            return Err(Error::Unstable(format!("radius collapsed: r={r_new}")));
        }
        let mass_old: Vec<f64> = (0..j).map(|i| self.u[i] * self.cell_vol(i, r_old)).collect();
        let total_old: f64 = mass_old.iter().sum();

        // face coefficients; the geometric factors follow the new radius for
        // the implicit scheme and the old one for the explicit scheme
        let rg = match scheme {
            OracleScheme::Explicit => r_old,
            OracleScheme::SemiImplicit => r_new,
        };
        let geom_diff = self.nf * self.omega * self.kappa * rg.powi(self.n_exp - 2) / self.dy;
        let geom_adv = self.nf * self.omega * rg.powi(self.n_exp - 1) * v;
        let mut alpha = vec![0.0; j + 1];
        let mut beta = vec![0.0; j + 1];
        for fa in 1..j {
            let y = fa as f64 * self.dy;
            let d = self.face_diffusivity(self.u[fa - 1], self.u[fa], f);
            alpha[fa] = geom_diff * y.powi(self.n_exp - 1) * d;
            beta[fa] = geom_adv * y.powi(self.n_exp);
        }

        let mut mass_new = vec![0.0; j];
        match scheme {
            OracleScheme::Explicit => {
                let mut flux = vec![0.0; j + 1];
                for fa in 1..j {
                    let donor = if v > 0.0 { self.u[fa] } else { self.u[fa - 1] };
                    flux[fa] = alpha[fa] * (self.u[fa] - self.u[fa - 1]) + beta[fa] * donor;
                }
                for i in 0..j {
                    mass_new[i] = mass_old[i] + dt * (flux[i + 1] - flux[i]);
                }
                for (i, m) in mass_new.iter().enumerate() {
                    if *m < -1e-12 * total_old {
                        return Err(Error::Unstable(format!(
                            "negative density in cell {i}: mass {m}"
                        )));
                    }
                }
            }
            OracleScheme::SemiImplicit => {
                // rows: vol_i u_i − dt (G_{i+1} − G_i) = mass_old_i
                let mut low = vec![0.0; j];
                let mut diag = vec![0.0; j];
                let mut up = vec![0.0; j];
                for i in 0..j {
                    diag[i] = self.cell_vol(i, r_new);
                    if i >= 1 {
                        diag[i] += dt * alpha[i];
                        low[i] -= dt * alpha[i];
                        if v > 0.0 {
                            diag[i] += dt * beta[i];
                        } else {
                            low[i] += dt * beta[i];
                        }
                    }
                    if i + 1 < j {
                        diag[i] += dt * alpha[i + 1];
                        up[i] -= dt * alpha[i + 1];
                        if v > 0.0 {
                            up[i] -= dt * beta[i + 1];
                        } else {
                            diag[i] -= dt * beta[i + 1];
                        }
                    }
                }
                let u_new = thomas(&low, &diag, &up, &mass_old)?;
                for i in 0..j {
                    mass_new[i] = u_new[i] * self.cell_vol(i, r_new);
                }
            }
        }

        let total_new: f64 = mass_new.iter().sum();
        let drift = (total_new - total_old).abs() / self.coeff.mass;
        for i in 0..j {
            self.u[i] = mass_new[i].max(0.0) / self.cell_vol(i, r_new);
        }
        self.r = r_new;
        Ok(drift)
    }

    /// stability-limited step size at the current state
    fn stable_dt(&self, f: &EntropyIntegrand, scheme: OracleScheme) -> f64 {
        let v = self.boundary_velocity(f).abs();
        let adv = 0.5 * self.dy * self.r / v.max(1e-300);
        match scheme {
            OracleScheme::SemiImplicit => adv,
            OracleScheme::Explicit => {
                let mut dmax: f64 = 1e-300;
                for fa in 1..self.u.len() {
                    dmax = dmax.max(self.face_diffusivity(self.u[fa - 1], self.u[fa], f));
                }
                let diff = 0.2 * (self.r * self.dy).powi(2) / (self.kappa * dmax * self.nf);
                adv.min(diff)
            }
        }
    }

    /// quantiles of the probability profile carried by the cells
    fn snapshot(&self, m: usize, dim: crate::geometry::Dimension) -> Result<RadialState> {
        let j = self.u.len();
        let mut cum = vec![0.0; j + 1];
        for i in 0..j {
            cum[i + 1] = cum[i] + self.u[i] * self.cell_vol(i, self.r);
        }
        let total = cum[j];
        if total <= 0.0 {
            return Err(Error::BadMass { mass: total });
        }
        let mut q = Vec::with_capacity(m);
        let mut cell = 0usize;
        for k in 0..m {
            let target = (k as f64 + 0.5) / m as f64 * total;
            while cell + 1 < j && (cum[cell + 1] <= target || cum[cell + 1] == cum[cell]) {
                cell += 1;
            }
            let dm = cum[cell + 1] - cum[cell];
            let th = if dm > 0.0 { (target - cum[cell]) / dm } else { 0.0 };
            let vn = self.yfn[cell] + th * (self.yfn[cell + 1] - self.yfn[cell]);
            q.push(self.r * vn.powf(1.0 / self.nf));
        }
        RadialState::new(BallRadius::new(self.r)?, QuantileProfile::new(dim, q)?)
    }
}

fn thomas(low: &[f64], diag: &[f64], up: &[f64], rhs: &[f64]) -> Result<Vec<f64>> {
    let n = diag.len();
    let mut c = vec![0.0; n];
    let mut d = vec![0.0; n];
    let mut denom = diag[0];
    if denom.abs() < 1e-300 {
        return Err(Error::Unstable("singular tridiagonal system".into()));
    }
    c[0] = up[0] / denom;
    d[0] = rhs[0] / denom;
    for i in 1..n {
        denom = diag[i] - low[i] * c[i - 1];
        if denom.abs() < 1e-300 {
            return Err(Error::Unstable("singular tridiagonal system".into()));
        }
        c[i] = up[i] / denom;
        d[i] = (rhs[i] - low[i] * d[i - 1]) / denom;
    }
    let mut x = vec![0.0; n];
    x[n - 1] = d[n - 1];
    for i in (0..n - 1).rev() {
        x[i] = d[i] - c[i] * x[i + 1];
    }
    Ok(x)
}

/// Solve from a quantile state; cell masses are read off the state's CDF, so
/// the initial data is carried over exactly.
pub fn solve_strong_from_state(
    initial: &RadialState,
    horizon: f64,
    f: &EntropyIntegrand,
    cfg: &MetricConfig,
    grid: &OracleGrid,
    coeff: &OracleCoefficients,
) -> Result<OracleRun> {
    grid.validate()?;
    initial.dim().same(&cfg.dim)?;
    let j = grid.cells;
    let r0 = initial.radius().value();
    if r0 <= 0.0 {
        return Err(Error::Domain("oracle needs r(0) > 0".into()));
    }
    let mut masses = vec![0.0; j];
    let mut prev_cdf = 0.0;
    for (i, m) in masses.iter_mut().enumerate() {
        let y_hi = (i + 1) as f64 / j as f64;
        let c = initial.profile().cdf(r0 * y_hi)?;
        *m = coeff.mass * (c - prev_cdf);
        prev_cdf = c;
    }
    run_fv(masses, r0, horizon, f, cfg, grid, coeff)
}

/// Solve from a gridded density and an initial radius.
pub fn solve_strong(
    density: &RadialDensity,
    r0: BallRadius,
    horizon: f64,
    f: &EntropyIntegrand,
    cfg: &MetricConfig,
    grid: &OracleGrid,
    coeff: &OracleCoefficients,
) -> Result<OracleRun> {
    grid.validate()?;
    density.dim.same(&cfg.dim)?;
    let state = RadialState::new(r0, crate::profile::quantiles_from_density(density, 4 * grid.cells)?)?;
    solve_strong_from_state(&state, horizon, f, cfg, grid, coeff)
}

fn run_fv(
    masses: Vec<f64>,
    r0: f64,
    horizon: f64,
    f: &EntropyIntegrand,
    cfg: &MetricConfig,
    grid: &OracleGrid,
    coeff: &OracleCoefficients,
) -> Result<OracleRun> {
    if !(horizon > 0.0) {
        return Err(Error::Config(format!("horizon {horizon} must be positive")));
    }
    let j = grid.cells;
    let n = cfg.dim.n() as i32;
    let yfn: Vec<f64> = (0..=j).map(|i| (i as f64 / j as f64).powi(n)).collect();
    let mut fv = Fv {
        nf: cfg.dim.nf(),
        n_exp: n,
        omega: cfg.dim.unit_ball_volume(),
        kappa: cfg.kappa,
        variant: cfg.variant,
        coeff: *coeff,
        yfn,
        dy: 1.0 / j as f64,
        u: vec![0.0; j],
        r: r0,
    };
    for i in 0..j {
        fv.u[i] = masses[i] / fv.cell_vol(i, r0);
    }

    let mut sample_times = vec![0.0];
    let mut ts = grid.sample_dt;
    while ts < horizon - 1e-12 {
        sample_times.push(ts);
        ts += grid.sample_dt;
    }
    sample_times.push(horizon);

    let mut times = Vec::new();
    let mut states = Vec::new();
    let mut records = Vec::new();
    let mut fv_energy = Vec::new();
    let mut max_mass_drift = 0.0f64;
    let mut max_energy_increase = 0.0f64;
    let mut steps = 0usize;
    let mut t = 0.0;
    let mut prev_fv_e = fv.energy(f);

    let record_sample = |fv: &Fv, t: f64, states: &mut Vec<RadialState>, times: &mut Vec<f64>, records: &mut Vec<StepRecord>, fv_energy: &mut Vec<f64>| -> Result<()> {
        let state = fv.snapshot(grid.quantile_cells, cfg.dim)?;
        let energy = total_energy(&state, f)?;
        let step_dist = if let Some(prev) = states.last() {
            rho_dist(prev, &state, cfg)?
        } else {
            0.0
        };
        times.push(t);
        states.push(state);
        records.push(StepRecord { energy, step_dist, opt_iterations: 0, opt_residual: 0.0 });
        fv_energy.push(fv.energy(f));
        Ok(())
    };

    record_sample(&fv, 0.0, &mut states, &mut times, &mut records, &mut fv_energy)?;
    for &target in sample_times.iter().skip(1) {
        while t < target - 1e-13 {
            let dt = grid.dt.min(fv.stable_dt(f, grid.scheme)).min(target - t);
            if dt < 1e-13 * grid.dt.max(1e-6) {
                return Err(Error::Unstable(format!("step size underflow at t={t}")));
            }
            let drift = fv.step(dt, f, grid.scheme)?;
            max_mass_drift = max_mass_drift.max(drift);
            let e = fv.energy(f);
            max_energy_increase = max_energy_increase.max(e - prev_fv_e);
            prev_fv_e = e;
            t += dt;
            steps += 1;
        }
        record_sample(&fv, t, &mut states, &mut times, &mut records, &mut fv_energy)?;
    }

    let final_mass: f64 = (0..j).map(|i| fv.u[i] * fv.cell_vol(i, fv.r)).sum();
    Ok(OracleRun {
        traj: Trajectory { kind: TrajectoryKind::Sampled, times, states, records, aborted: None },
        fv_energy,
        max_mass_drift,
        max_energy_increase,
        final_mass_error: (final_mass - coeff.mass).abs() / coeff.mass,
        steps,
    })
}

// ---------------------------------------------------------------------------
// weak-form residuals
// ---------------------------------------------------------------------------

/// Spatial factor of a radially symmetric space-time test function.
#[derive(Debug, Clone, Copy)]
pub enum BumpShape {
    /// supported on |x| < radius; smooth at the origin via the |x|² argument
    Ball { radius: f64 },
    /// supported on center ± width, away from the origin
    Annulus { center: f64, width: f64 },
}

/// Smooth compactly supported bump: product of a spatial and a temporal
/// factor, each exp(1 − 1/(1 − s²))-shaped.
#[derive(Debug, Clone, Copy)]
pub struct SpaceTimeBump {
    pub shape: BumpShape,
    pub t_center: f64,
    pub t_width: f64,
}

fn base_bump(s: f64) -> (f64, f64) {
    // value and derivative with respect to s at s = (arg)², s < 1
    if s >= 1.0 {
        return (0.0, 0.0);
    }
    let v = (1.0 - 1.0 / (1.0 - s)).exp();
    (v, -v / ((1.0 - s) * (1.0 - s)))
}

impl SpaceTimeBump {
    pub fn new(shape: BumpShape, t_center: f64, t_width: f64) -> Self {
        Self { shape, t_center, t_width }
    }

    /// spatial value and ρ-derivative
    pub fn space(&self, rho: f64) -> (f64, f64) {
        match self.shape {
            BumpShape::Ball { radius } => {
                let x = rho / radius;
                let (v, dv) = base_bump(x * x);
                (v, dv * 2.0 * x / radius)
            }
            BumpShape::Annulus { center, width } => {
                let x = (rho - center) / width;
                let (v, dv) = base_bump(x * x);
                (v, dv * 2.0 * x / width)
            }
        }
    }

    /// temporal value and t-derivative
    pub fn time(&self, t: f64) -> (f64, f64) {
        let x = (t - self.t_center) / self.t_width;
        let (v, dv) = base_bump(x * x);
        (v, dv * 2.0 * x / self.t_width)
    }

    pub fn time_support(&self) -> (f64, f64) {
        (self.t_center - self.t_width, self.t_center + self.t_width)
    }
}

/// The built-in reproducible family used by the residual suites.
pub fn default_test_family(horizon: f64, r_max: f64) -> Vec<SpaceTimeBump> {
    vec![
        SpaceTimeBump::new(BumpShape::Ball { radius: 0.6 * r_max }, 0.5 * horizon, 0.45 * horizon),
        SpaceTimeBump::new(BumpShape::Ball { radius: 1.05 * r_max }, 0.35 * horizon, 0.3 * horizon),
        SpaceTimeBump::new(
            BumpShape::Annulus { center: 0.45 * r_max, width: 0.35 * r_max },
            0.6 * horizon,
            0.35 * horizon,
        ),
        SpaceTimeBump::new(BumpShape::Ball { radius: 0.85 * r_max }, 0.7 * horizon, 0.25 * horizon),
    ]
}

/// Signed residual of a weak identity with its natural magnitude scale.
#[derive(Debug, Clone, Copy)]
pub struct WeakResidual {
    pub lhs: f64,
    pub rhs: f64,
    pub scale: f64,
}

impl WeakResidual {
    pub fn scaled(&self) -> f64 {
        if self.scale > 0.0 {
            (self.lhs - self.rhs).abs() / self.scale
        } else {
            0.0
        }
    }
}

fn check_time_support(traj: &Trajectory, bump: &SpaceTimeBump) -> Result<()> {
    let (lo, hi) = bump.time_support();
    if lo < traj.times[0] - 1e-12 || hi > traj.horizon() + 1e-12 {
        return Err(Error::Domain(format!(
            "test function support [{lo}, {hi}] exceeds the trajectory window"
        )));
    }
    Ok(())
}

/// Residual of (1/κ) ∫∫ u φ_t dx dt = ∫∫ ∇ĥf(u)·∇φ dx dt over a trajectory.
pub fn weak_residual_diffusion(
    traj: &Trajectory,
    bump: &SpaceTimeBump,
    f: &EntropyIntegrand,
    cfg: &MetricConfig,
) -> Result<WeakResidual> {
    check_time_support(traj, bump)?;
    let k_count = traj.len();
    let mut lhs_t = vec![0.0; k_count];
    let mut rhs_t = vec![0.0; k_count];
    let mut abs_t = vec![0.0; k_count];
    for k in 0..k_count {
        let (tv, td) = bump.time(traj.times[k]);
        if tv == 0.0 && td == 0.0 {
            continue;
        }
        let s = &traj.states[k];
        let q = s.profile().quantiles();
        let m = q.len();
        let h = 1.0 / m as f64;
        let dens = s.profile().cell_densities()?;
        for i in 0..m {
            let (sv, sd) = bump.space(q[i]);
            // ∫ u φ_t dx = ∫₀¹ φ_t(q(σ)) dσ
            lhs_t[k] += h * sv * td / cfg.kappa;
            abs_t[k] += (h * sv * td / cfg.kappa).abs();
            if m >= 2 {
                let (lo, hi) = if i == 0 {
                    (0, 1)
                } else if i == m - 1 {
                    (m - 2, m - 1)
                } else {
                    (i - 1, i + 1)
                };
                let grad_hf = (f.f_hat(dens[hi]) - f.f_hat(dens[lo])) / (q[hi] - q[lo]);
                // ∫ ∂ρĥf ∂ρφ P dρ = ∫₀¹ ∂ρĥf ∂ρφ / u dσ
                let term = h * grad_hf * sd * tv / dens[i];
                rhs_t[k] += term;
                abs_t[k] += term.abs();
            }
        }
    }
    let mut lhs = 0.0;
    let mut rhs = 0.0;
    let mut scale = 0.0;
    for k in 1..k_count {
        let dt = traj.times[k] - traj.times[k - 1];
        lhs += 0.5 * dt * (lhs_t[k] + lhs_t[k - 1]);
        rhs += 0.5 * dt * (rhs_t[k] + rhs_t[k - 1]);
        scale += 0.5 * dt * (abs_t[k] + abs_t[k - 1]);
    }
    Ok(WeakResidual { lhs, rhs, scale })
}

fn simpson<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, panels: usize) -> f64 {
    let n = 2 * panels;
    let h = (b - a) / n as f64;
    let mut sum = f(a) + f(b);
    for i in 1..n {
        let w = if i % 2 == 1 { 4.0 } else { 2.0 };
        sum += w * f(a + i as f64 * h);
    }
    sum * h / 3.0
}

/// Residual of ∫∫_{B_r(t)} ψ_t dx dt = ∫ ((n−1)/r − ĥf(u(r))) ψ(r, t) W(r) dt
/// with W = P for the surface-tension variant and W = 1 for permeability.
pub fn weak_residual_boundary(
    traj: &Trajectory,
    bump: &SpaceTimeBump,
    f: &EntropyIntegrand,
    cfg: &MetricConfig,
) -> Result<WeakResidual> {
    check_time_support(traj, bump)?;
    let n = cfg.dim.nf();
    let k_count = traj.len();
    let mut lhs_t = vec![0.0; k_count];
    let mut rhs_t = vec![0.0; k_count];
    let mut abs_t = vec![0.0; k_count];
    for k in 0..k_count {
        let (tv, td) = bump.time(traj.times[k]);
        if tv == 0.0 && td == 0.0 {
            continue;
        }
        let s = &traj.states[k];
        let r = s.radius().value();
        lhs_t[k] = td * simpson(|rho| bump.space(rho).0 * cfg.dim.perimeter(rho), 0.0, r, 64);
        let dens = s.profile().cell_densities()?;
        let q = s.profile().quantiles();
        let m = dens.len();
        let u_r = if m == 1 {
            dens[0]
        } else {
            (dens[m - 1]
                + (dens[m - 1] - dens[m - 2]) * (r - q[m - 1]) / (q[m - 1] - q[m - 2]))
                .max(0.0)
        };
        let weight = match cfg.variant {
            MetricVariant::SurfaceTension => cfg.dim.perimeter(r),
            MetricVariant::Permeability => 1.0,
        };
        rhs_t[k] = ((n - 1.0) / r - f.f_hat(u_r)) * bump.space(r).0 * tv * weight;
        abs_t[k] = lhs_t[k].abs() + rhs_t[k].abs();
    }
    let mut lhs = 0.0;
    let mut rhs = 0.0;
    let mut scale = 0.0;
    for k in 1..k_count {
        let dt = traj.times[k] - traj.times[k - 1];
        lhs += 0.5 * dt * (lhs_t[k] + lhs_t[k - 1]);
        rhs += 0.5 * dt * (rhs_t[k] + rhs_t[k - 1]);
        scale += 0.5 * dt * (abs_t[k] + abs_t[k - 1]);
    }
    Ok(WeakResidual { lhs, rhs, scale })
}

/// Worst scaled residuals of the two weak identities over a test family.
pub fn max_scaled_residuals(
    traj: &Trajectory,
    family: &[SpaceTimeBump],
    f: &EntropyIntegrand,
    cfg: &MetricConfig,
) -> Result<(f64, f64)> {
    let mut worst_diff = 0.0f64;
    let mut worst_bdry = 0.0f64;
    for bump in family {
        worst_diff = worst_diff.max(weak_residual_diffusion(traj, bump, f, cfg)?.scaled());
        worst_bdry = worst_bdry.max(weak_residual_boundary(traj, bump, f, cfg)?.scaled());
    }
    Ok((worst_diff, worst_bdry))
}

/// Time series of ϱ-distance between two trajectories on matching samples.
#[derive(Debug, Clone)]
pub struct CompareReport {
    pub times: Vec<f64>,
    pub dists: Vec<f64>,
    pub max_dist: f64,
}

/// ϱ-distance between two runs of the same setup, sampled on the coarser of
/// the two time grids; profiles are resampled when cell counts differ.
pub fn compare(a: &Trajectory, b: &Trajectory, cfg: &MetricConfig) -> Result<CompareReport> {
    if a.is_empty() || b.is_empty() {
        return Err(Error::Config("cannot compare empty trajectories".into()));
    }
    let (coarse, fine) = if a.len() <= b.len() { (a, b) } else { (b, a) };
    let mut times = Vec::new();
    let mut dists = Vec::new();
    let mut max_dist = 0.0f64;
    for (k, &t) in coarse.times.iter().enumerate() {
        if t > fine.horizon() + 1e-9 {
            break;
        }
        let kf = fine.index_at(t)?;
        if (fine.times[kf] - t).abs() > 1e-6 * (1.0 + t) {
            return Err(Error::Config(format!(
                "sample times misaligned at t={t}: nearest {}",
                fine.times[kf]
            )));
        }
        let sa = &coarse.states[k];
        let sb = &fine.states[kf];
        let d = if sa.m() == sb.m() {
            rho_dist(sa, sb, cfg)?
        } else {
            let resampled = RadialState::new(sb.radius(), sb.profile().resample(sa.m())?)?;
            rho_dist(sa, &resampled, cfg)?
        };
        times.push(t);
        dists.push(d);
        max_dist = max_dist.max(d);
    }
    Ok(CompareReport { times, dists, max_dist })
}
