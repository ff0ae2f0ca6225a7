//! Minimizing-movement time stepping.
//!
//! Implicit Euler in the metric space: each step minimizes the penalized
//! energy
//!
//! ```text
//! Φ(V) = E(V) + ϱ²(prev, V) / (2τ)
//! ```
//!
//! over admissible states V = (r, q_1, …, q_M) with 0 ≤ q_1 ≤ … ≤ q_M ≤ r.
//! The decision vector is the quantile chain with the radius appended, so
//! the constraints form a single monotone chain.
//!
//! The workhorse is a damped Newton iteration on the chain interior: the
//! cell structure makes the Hessian of Φ tridiagonal, the integrand's
//! superlinear growth sends Φ to +∞ whenever a cell collapses, and a
//! fraction-to-boundary cap keeps iterates strictly feasible, so warm steps
//! converge in a couple of iterations. Starts glued to a constraint are
//! first peeled off with a log-barrier on the gaps under a decreasing
//! weight schedule, and a projected preconditioned descent polishes the
//! rare step Newton cannot finish. A candidate is accepted only if it does
//! not exceed Φ(prev), which makes the recorded energies nonincreasing and
//! the dissipation sum telescoping by construction.

use crate::energy::{
    internal_energy_state_grad, require_valid_integrand, total_energy, EnergyBreakdown,
    EntropyIntegrand,
};
use crate::error::{Error, Result};
use crate::geometry::{iota, iota_prime, BallRadius, Dimension};
use crate::profile::QuantileProfile;
use crate::solver::{
    lbfgs_chain, newton_chain, project_chain, projected_gradient_residual, projected_polish,
    SolverOptions,
};
use crate::state::{rho_dist, MetricConfig, RadialState};

/// Time-stepping configuration.
#[derive(Debug, Clone)]
pub struct JkoConfig {
    /// cells in the quantile discretization (used when ingesting densities)
    pub m: usize,
    /// uniform time step
    pub tau: f64,
    /// explicit step sequence; overrides `tau` when present
    pub steps: Option<Vec<f64>>,
    /// projected-gradient norm at which a step counts as stationary
    pub opt_tol: f64,
    /// iteration cap per barrier stage and for the polish phase
    pub max_iters: usize,
    /// decreasing barrier weights, relative to the energy scale
    pub barrier_schedule: Vec<f64>,
    /// convexity modulus of E along geodesics, when configured
    pub lambda: Option<f64>,
}

impl Default for JkoConfig {
    fn default() -> Self {
        Self {
            m: 200,
            tau: 1e-3,
            steps: None,
            opt_tol: 2e-6,
            max_iters: 120,
            barrier_schedule: vec![1e-4, 1e-6, 1e-8],
            lambda: None,
        }
    }
}

impl JkoConfig {
    pub fn validate(&self) -> Result<()> {
        if self.m == 0 {
            return Err(Error::Config("m must be positive".into()));
        }
        if !(self.tau > 0.0) {
            return Err(Error::Config(format!("tau {} must be positive", self.tau)));
        }
        if let Some(steps) = &self.steps {
            if steps.is_empty() || steps.iter().any(|t| !(*t > 0.0)) {
                return Err(Error::Config("explicit steps must be positive".into()));
            }
        }
        for w in self.barrier_schedule.windows(2) {
            if w[1] >= w[0] {
                return Err(Error::Config("barrier schedule must decrease".into()));
            }
        }
        if self.barrier_schedule.iter().any(|m| !(*m > 0.0)) {
            return Err(Error::Config("barrier weights must be positive".into()));
        }
        // uniqueness of the per-step minimizer needs τ < 1/λ⁻
        if let Some(lambda) = self.lambda {
            if lambda < 0.0 {
                let cap = 1.0 / (-lambda);
                let worst = self
                    .steps
                    .as_ref()
                    .map(|s| s.iter().cloned().fold(0.0, f64::max))
                    .unwrap_or(self.tau);
                if worst >= cap {
                    return Err(Error::Config(format!(
                        "step {worst} is not below 1/λ⁻ = {cap}; minimizers may not be unique"
                    )));
                }
            }
        }
        Ok(())
    }
}

/// One row of a trajectory: the state's energy, the metric increment from
/// the previous state, and the optimizer's effort on this step.
#[derive(Debug, Clone, Copy)]
pub struct StepRecord {
    pub energy: EnergyBreakdown,
    pub step_dist: f64,
    pub opt_iterations: usize,
    pub opt_residual: f64,
}

/// How the time samples of a trajectory are meant to be read.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TrajectoryKind {
    /// JKO output: piecewise-constant discrete solution, speed is the step
    /// quotient ϱ(state_k, state_{k+1})/τ_k.
    Discrete,
    /// Densely sampled continuous curve: central differences apply.
    Sampled,
}

/// Time-stamped states with per-step records.
#[derive(Debug, Clone)]
pub struct Trajectory {
    pub kind: TrajectoryKind,
    pub times: Vec<f64>,
    pub states: Vec<RadialState>,
    pub records: Vec<StepRecord>,
    /// set when the driver stopped early; the prefix trajectory is kept
    pub aborted: Option<String>,
}

impl Trajectory {
    /// Assemble a sampled trajectory without energy bookkeeping (records are
    /// zeroed); metric-level diagnostics only.
    pub fn sampled(times: Vec<f64>, states: Vec<RadialState>) -> Result<Self> {
        if times.len() != states.len() || times.is_empty() {
            return Err(Error::Config("times and states must match and be nonempty".into()));
        }
        if times.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::Config("sample times must increase".into()));
        }
        let records = vec![
            StepRecord {
                energy: EnergyBreakdown { perimeter_term: 0.0, internal_term: 0.0 },
                step_dist: 0.0,
                opt_iterations: 0,
                opt_residual: f64::NAN,
            };
            times.len()
        ];
        Ok(Self { kind: TrajectoryKind::Sampled, times, states, records, aborted: None })
    }

    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    pub fn horizon(&self) -> f64 {
        *self.times.last().unwrap_or(&0.0)
    }

    pub fn energy(&self, k: usize) -> f64 {
        self.records[k].energy.total()
    }

    /// Index of the sample nearest to t; t must lie inside the time range.
    pub fn index_at(&self, t: f64) -> Result<usize> {
        if self.is_empty() || t < self.times[0] - 1e-12 || t > self.horizon() + 1e-12 {
            return Err(Error::TimeOutOfRange { t });
        }
        let mut best = 0;
        let mut best_d = f64::INFINITY;
        for (k, tk) in self.times.iter().enumerate() {
            let d = (tk - t).abs();
            if d < best_d {
                best_d = d;
                best = k;
            }
        }
        Ok(best)
    }

    /// Largest single-step energy increase (0 for a clean run).
    pub fn max_energy_increase(&self) -> f64 {
        let mut worst: f64 = 0.0;
        for k in 1..self.len() {
            worst = worst.max(self.energy(k) - self.energy(k - 1));
        }
        worst
    }

    /// (E(0) − E(end)) − Σ_k ϱ²(k, k+1)/(2 τ_k): nonnegative up to rounding
    /// for a minimizing-movement trajectory.
    pub fn dissipation_gap(&self) -> f64 {
        let mut sum = 0.0;
        for k in 1..self.len() {
            let tau = self.times[k] - self.times[k - 1];
            sum += self.records[k].step_dist.powi(2) / (2.0 * tau);
        }
        (self.energy(0) - self.energy(self.len() - 1)) - sum
    }
}

/// Φ(cand) = E(cand) + ϱ²(prev, cand)/(2τ): the per-step objective.
pub fn moreau_yosida_objective(
    prev: &RadialState,
    cand: &RadialState,
    tau: f64,
    f: &EntropyIntegrand,
    cfg: &MetricConfig,
) -> Result<f64> {
    if !(tau > 0.0) {
        return Err(Error::Domain(format!("tau {tau} must be positive")));
    }
    let e = total_energy(cand, f)?.total();
    let pen = crate::state::rho_dist_squared(prev, cand, cfg)? / (2.0 * tau);
    Ok(e + pen)
}

/// Evaluate Φ and its gradient in the chain layout x = (q_1, …, q_M, r).
/// Infeasible points (any nonpositive cell) evaluate to +∞.
fn phi_eval(
    x: &[f64],
    grad: &mut [f64],
    prev_q: &[f64],
    prev_iota: f64,
    tau: Option<f64>,
    f: &EntropyIntegrand,
    cfg: &MetricConfig,
) -> f64 {
    let m = x.len() - 1;
    let (q, rr) = x.split_at(m);
    let r = rr[0];
    if r <= 0.0 {
        return f64::INFINITY;
    }
    let dim = &cfg.dim;
    let (e_int, grad_r_int) = match internal_energy_state_grad(q, r, dim, f, &mut grad[..m]) {
        Ok(v) => v,
        Err(_) => return f64::INFINITY,
    };
    let mut value = dim.perimeter(r) + e_int;
    let mut grad_r = dim.perimeter_prime(r) + grad_r_int;
    if let Some(tau) = tau {
        let di = iota(BallRadius::new(r).unwrap(), dim, cfg.variant) - prev_iota;
        let mf = m as f64;
        let mut w2 = 0.0;
        for j in 0..m {
            let d = q[j] - prev_q[j];
            w2 += d * d;
            grad[j] += d / (mf * tau * cfg.kappa);
        }
        w2 /= mf;
        value += (di * di + w2 / cfg.kappa) / (2.0 * tau);
        grad_r += di * iota_prime(r, dim, cfg.variant) / tau;
    }
    grad[m] = grad_r;
    value
}

/// Public hook for gradient checks: Φ and ∇Φ at `cand`, chain layout.
pub fn objective_gradient(
    prev: &RadialState,
    cand: &RadialState,
    tau: f64,
    f: &EntropyIntegrand,
    cfg: &MetricConfig,
) -> Result<(f64, Vec<f64>)> {
    prev.dim().same(cand.dim())?;
    let m = cand.m();
    let mut x = cand.profile().quantiles().to_vec();
    x.push(cand.radius().value());
    let mut grad = vec![0.0; m + 1];
    let prev_iota = iota(prev.radius(), &cfg.dim, cfg.variant);
    let v = phi_eval(&x, &mut grad, prev.profile().quantiles(), prev_iota, Some(tau), f, cfg);
    if !v.is_finite() {
        return Err(Error::Domain("objective infinite at the requested state".into()));
    }
    Ok((v, grad))
}

fn barrier_eval(x: &[f64], grad: &mut [f64], mu: f64) -> f64 {
    let mut value = 0.0;
    let mut prev = 0.0;
    for i in 0..x.len() {
        let gap = x[i] - prev;
        if gap <= 0.0 {
            return f64::INFINITY;
        }
        value -= mu * gap.ln();
        grad[i] -= mu / gap;
        if i >= 1 {
            grad[i - 1] += mu / gap;
        }
        prev = x[i];
    }
    value
}

/// Nudge a chain strictly into the interior so the barrier is finite.
fn push_interior(x: &mut [f64], eps: f64) {
    let mut prev = 0.0;
    for i in 0..x.len() {
        if x[i] < prev + eps {
            x[i] = prev + eps;
        }
        prev = x[i];
    }
}

/// Diagonal curvature estimate of Φ along the chain, used to seed the
/// inverse Hessian. Each wall feels the Wasserstein penalty stiffness
/// 1/(Mτκ) plus the pressure response P(w)²·ĥf'(u)·u²/mass of its two
/// neighboring cells; the radius feels ι'(r)²/τ, the perimeter curvature,
/// and the outer cell. Without it the spread between the penalty and cell
/// curvatures stalls the quasi-Newton iteration.
fn inverse_curvature_diag(
    x: &[f64],
    tau: Option<f64>,
    f: &EntropyIntegrand,
    cfg: &MetricConfig,
) -> Vec<f64> {
    let m = x.len() - 1;
    let (q, rr) = x.split_at(m);
    let r = rr[0];
    let dim = &cfg.dim;
    let h = 1.0 / m as f64;
    let mut dens = vec![0.0; m + 1];
    let mut lower = 0.0;
    for c in 0..=m {
        let upper = if c < m { q[c] } else { r };
        let mass = if c == 0 || c == m { 0.5 * h } else { h };
        let vol = dim.ball_volume(upper) - lower;
        if vol <= 0.0 {
            return vec![1.0; m + 1];
        }
        dens[c] = mass / vol;
        lower += vol;
    }
    let hfp = |z: f64| -> f64 {
        let d = 1e-6 * z.max(1e-30);
        ((f.f_hat(z + d) - f.f_hat(z - d)) / (2.0 * d)).max(0.0)
    };
    let pen_q = tau.map(|t| 1.0 / (m as f64 * t * cfg.kappa)).unwrap_or(0.0);
    let mut hdiag = vec![0.0; m + 1];
    for j in 0..m {
        let mass_lo = if j == 0 { 0.5 * h } else { h };
        let mass_hi = if j + 1 == m { 0.5 * h } else { h };
        let p = dim.perimeter(q[j]);
        hdiag[j] = pen_q
            + p * p
                * (hfp(dens[j]) * dens[j] * dens[j] / mass_lo
                    + hfp(dens[j + 1]) * dens[j + 1] * dens[j + 1] / mass_hi);
    }
    let pen_r = tau.map(|t| iota_prime(r, dim, cfg.variant).powi(2) / t).unwrap_or(0.0);
    let p = dim.perimeter(r);
    hdiag[m] = pen_r
        + dim.perimeter_prime(r).abs()
        + p * p * hfp(dens[m]) * dens[m] * dens[m] / (0.5 * h);
    let hmax = hdiag.iter().cloned().fold(0.0, f64::max).max(1e-300);
    hdiag.iter().map(|v| 1.0 / v.max(1e-10 * hmax)).collect()
}

/// Tridiagonal Hessian of Φ in the chain layout. Cells couple only the two
/// walls that bound them, so the energy part is tridiagonal; the penalty
/// adds 1/(Mτκ) to the quantile diagonal and the ι-pullback curvature to the
/// radius entry.
#[allow(clippy::too_many_arguments)]
fn phi_hessian(
    x: &[f64],
    prev_iota: f64,
    tau: Option<f64>,
    f: &EntropyIntegrand,
    cfg: &MetricConfig,
    low: &mut [f64],
    diag: &mut [f64],
    up: &mut [f64],
) {
    let m = x.len() - 1;
    let r = x[m];
    let dim = &cfg.dim;
    let n = dim.nf();
    let h = 1.0 / m as f64;
    for i in 0..=m {
        low[i] = 0.0;
        diag[i] = 0.0;
        up[i] = 0.0;
    }
    let mut dens = vec![0.0; m + 1];
    let mut masses = vec![h; m + 1];
    masses[0] = 0.5 * h;
    masses[m] = 0.5 * h;
    let mut lower = 0.0;
    for c in 0..=m {
        let vol = dim.ball_volume(x[c]) - lower;
        if vol <= 0.0 {
            return;
        }
        dens[c] = masses[c] / vol;
        lower += vol;
    }
    let hfp = |z: f64| -> f64 {
        let d = 1e-6 * z.max(1e-30);
        ((f.f_hat(z + d) - f.f_hat(z - d)) / (2.0 * d)).max(0.0)
    };
    for c in 0..=m {
        let psi2 = hfp(dens[c]) * dens[c] * dens[c] / masses[c];
        let pb = dim.perimeter(x[c]);
        diag[c] += psi2 * pb * pb;
        if c >= 1 {
            let pa = dim.perimeter(x[c - 1]);
            diag[c - 1] += psi2 * pa * pa;
            up[c - 1] -= psi2 * pa * pb;
            low[c] -= psi2 * pa * pb;
        }
    }
    for j in 0..m {
        diag[j] += dim.perimeter_prime(x[j]) * (f.f_hat(dens[j + 1]) - f.f_hat(dens[j]));
    }
    diag[m] -= f.f_hat(dens[m]) * dim.perimeter_prime(r);
    // curvature of the perimeter term itself
    diag[m] += n * (n - 1.0) * (n - 2.0) * dim.unit_ball_volume() * r.powf(n - 3.0);
    if let Some(t) = tau {
        let pen_q = 1.0 / (m as f64 * t * cfg.kappa);
        for j in 0..m {
            diag[j] += pen_q;
        }
        let ip = iota_prime(r, dim, cfg.variant);
        let ipp = match cfg.variant {
            crate::geometry::MetricVariant::SurfaceTension => {
                0.5 * (n - 1.0) * (n * dim.unit_ball_volume()).sqrt() * r.powf(0.5 * (n - 3.0))
            }
            crate::geometry::MetricVariant::Permeability => dim.perimeter_prime(r),
        };
        let di = iota(BallRadius::new(r).unwrap(), dim, cfg.variant) - prev_iota;
        diag[m] += (ip * ip + di * ipp) / t;
    }
}

fn state_from_chain(x: &[f64], dim: Dimension) -> Result<RadialState> {
    let m = x.len() - 1;
    RadialState::new(BallRadius::new(x[m])?, QuantileProfile::new(dim, x[..m].to_vec())?)
}

/// One backward step: minimize Φ over admissible states starting from
/// `prev`. Returns the new state together with its record.
pub fn jko_step(
    prev: &RadialState,
    tau: f64,
    f: &EntropyIntegrand,
    cfg: &MetricConfig,
    jcfg: &JkoConfig,
) -> Result<(RadialState, StepRecord)> {
    minimize_objective(prev, Some(tau), f, cfg, jcfg)
}

/// Minimizer of E alone (no penalty): the discrete equilibrium state.
pub fn discrete_energy_minimizer(
    f: &EntropyIntegrand,
    cfg: &MetricConfig,
    m: usize,
) -> Result<RadialState> {
    let rstar = crate::energy::equilibrium_radius(f, &cfg.dim)?;
    let start = RadialState::uniform(cfg.dim, rstar.value(), m)?;
    let jcfg = JkoConfig { opt_tol: 1e-10, ..JkoConfig::default() };
    Ok(minimize_objective(&start, None, f, cfg, &jcfg)?.0)
}

fn minimize_objective(
    prev: &RadialState,
    tau: Option<f64>,
    f: &EntropyIntegrand,
    cfg: &MetricConfig,
    jcfg: &JkoConfig,
) -> Result<(RadialState, StepRecord)> {
    prev.dim().same(&cfg.dim)?;
    if let Some(t) = tau {
        if !(t > 0.0) {
            return Err(Error::Domain(format!("tau {t} must be positive")));
        }
    }
    let m = prev.m();
    let prev_q: Vec<f64> = prev.profile().quantiles().to_vec();
    let prev_iota = iota(prev.radius(), &cfg.dim, cfg.variant);
    let mut x_prev: Vec<f64> = prev_q.clone();
    x_prev.push(prev.radius().value());

    let eps = 1e-11 * x_prev[m].max(1.0);
    let mut grad0 = vec![0.0; m + 1];
    let mut phi0 = phi_eval(&x_prev, &mut grad0, &prev_q, prev_iota, tau, f, cfg);
    if !phi0.is_finite() {
        // the previous state touches a constraint; evaluate just inside
        push_interior(&mut x_prev, eps);
        phi0 = phi_eval(&x_prev, &mut grad0, &prev_q, prev_iota, tau, f, cfg);
        if !phi0.is_finite() {
            return Err(Error::Domain("previous state has no finite-energy neighborhood".into()));
        }
    }
    let resid0 = projected_gradient_residual(&x_prev, &grad0);
    if resid0 <= jcfg.opt_tol {
        // already stationary: the step fixes the state
        let state = state_from_chain(&x_prev, cfg.dim)?;
        let energy = total_energy(&state, f)?;
        return Ok((
            state,
            StepRecord { energy, step_dist: 0.0, opt_iterations: 0, opt_residual: resid0 },
        ));
    }

    let scale = 1.0 + phi0.abs();
    let mut x = x_prev.clone();
    push_interior(&mut x, eps);
    let mut iterations = 0usize;

    // a start glued to a constraint is first peeled off with the decreasing
    // barrier schedule
    let mut min_gap = x[0];
    for w in x.windows(2) {
        min_gap = min_gap.min(w[1] - w[0]);
    }
    if min_gap <= 1e-8 * x[m].max(1.0) {
        let precond = inverse_curvature_diag(&x, tau, f, cfg);
        for mu_rel in &jcfg.barrier_schedule {
            let mu = mu_rel * scale;
            let opts = SolverOptions {
                memory: 10,
                max_iters: jcfg.max_iters,
                grad_tol: (mu * 30.0).max(jcfg.opt_tol),
            };
            let stats = lbfgs_chain(
                &mut x,
                |y, g| {
                    let v = phi_eval(y, g, &prev_q, prev_iota, tau, f, cfg);
                    if !v.is_finite() {
                        return f64::INFINITY;
                    }
                    v + barrier_eval(y, g, mu)
                },
                &opts,
                Some(&precond),
            );
            iterations += stats.iterations;
        }
    }

    // interior Newton on Φ: the Hessian is tridiagonal, the entropy itself
    // diverges on every collapsing gap, and the step cap keeps the iterate
    // strictly inside the chain
    let newton = newton_chain(
        &mut x,
        |y, g| phi_eval(y, g, &prev_q, prev_iota, tau, f, cfg),
        |y, lo, di, upper| phi_hessian(y, prev_iota, tau, f, cfg, lo, di, upper),
        &SolverOptions { memory: 0, max_iters: jcfg.max_iters, grad_tol: jcfg.opt_tol },
    );
    iterations += newton.iterations;
    let mut residual = newton.grad_norm;

    if residual > jcfg.opt_tol {
        // rare fallback: projected preconditioned descent
        let precond = inverse_curvature_diag(&x, tau, f, cfg);
        project_chain(&mut x);
        push_interior(&mut x, eps * 1e-2);
        let polish = projected_polish(
            &mut x,
            |y, g| phi_eval(y, g, &prev_q, prev_iota, tau, f, cfg),
            jcfg.opt_tol,
            jcfg.max_iters,
            Some(&precond),
        );
        iterations += polish.iterations;
        residual = polish.grad_norm;
    }

    // never accept an ascent: the step may always stay put
    let mut gtmp = vec![0.0; m + 1];
    let phix = phi_eval(&x, &mut gtmp, &prev_q, prev_iota, tau, f, cfg);
    if !(phix <= phi0) {
        x = x_prev;
        residual = resid0;
    }

    let state = state_from_chain(&x, cfg.dim)?;
    // internal bug guard; the chain structure makes this unreachable
    if state.profile().last_quantile() > state.radius().value() {
        return Err(Error::SupportViolation {
            q_last: state.profile().last_quantile(),
            radius: state.radius().value(),
        });
    }
    let energy = total_energy(&state, f)?;
    let step_dist = rho_dist(prev, &state, cfg)?;
    Ok((state, StepRecord { energy, step_dist, opt_iterations: iterations, opt_residual: residual }))
}

/// Run the minimizing-movement scheme from `initial` to the horizon. On a
/// step failure the prefix trajectory is returned with `aborted` set.
pub fn run_flow(
    initial: &RadialState,
    horizon: f64,
    f: &EntropyIntegrand,
    cfg: &MetricConfig,
    jcfg: &JkoConfig,
) -> Result<Trajectory> {
    jcfg.validate()?;
    require_valid_integrand(f, &cfg.dim)?;
    initial.dim().same(&cfg.dim)?;
    let steps: Vec<f64> = match &jcfg.steps {
        Some(seq) => seq.clone(),
        None => {
            if !(horizon > 0.0) {
                return Err(Error::Config(format!("horizon {horizon} must be positive")));
            }
            let k = ((horizon / jcfg.tau).round() as usize).max(1);
            vec![jcfg.tau; k]
        }
    };

    let e0 = total_energy(initial, f)?;
    let mut traj = Trajectory {
        kind: TrajectoryKind::Discrete,
        times: vec![0.0],
        states: vec![initial.clone()],
        records: vec![StepRecord {
            energy: e0,
            step_dist: 0.0,
            opt_iterations: 0,
            opt_residual: f64::NAN,
        }],
        aborted: None,
    };

    let mut t = 0.0;
    for (k, &tau) in steps.iter().enumerate() {
        let prev = traj.states.last().unwrap().clone();
        match jko_step(&prev, tau, f, cfg, jcfg) {
            Ok((state, record)) => {
                t += tau;
                traj.times.push(t);
                traj.states.push(state);
                traj.records.push(record);
            }
            Err(e) => {
                traj.aborted = Some(format!("step {k}: {e}"));
                break;
            }
        }
    }
    Ok(traj)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::energy::equilibrium_radius;
    use crate::geometry::{set_dist, MetricVariant};
    use crate::rng::SplitMix64;
    use std::f64::consts::PI;

    fn d2() -> Dimension {
        Dimension::new(2).unwrap()
    }

    fn cfg() -> MetricConfig {
        MetricConfig::new(d2(), 1.0, MetricVariant::SurfaceTension).unwrap()
    }

    fn zlogz() -> EntropyIntegrand {
        EntropyIntegrand::ZLogZ
    }

    #[test]
    fn objective_reduces_to_energy_at_zero_penalty() {
        let prev = RadialState::uniform(d2(), 1.0, 32).unwrap();
        let f = zlogz();
        let c = cfg();
        let e = total_energy(&prev, &f).unwrap().total();
        let phi = moreau_yosida_objective(&prev, &prev, 0.5, &f, &c).unwrap();
        assert!((phi - e).abs() < 1e-14);
        // Φ ≥ E(cand) always
        let cand = RadialState::uniform(d2(), 1.5, 32).unwrap();
        let phi = moreau_yosida_objective(&prev, &cand, 0.5, &f, &c).unwrap();
        let e_cand = total_energy(&cand, &f).unwrap().total();
        assert!(phi >= e_cand);
        // penalty value for the uniform B₁/B₂ pair at τ = 0.5, κ = 1
        let b2 = RadialState::uniform(d2(), 2.0, 32).unwrap();
        let phi = moreau_yosida_objective(&prev, &b2, 0.5, &f, &c).unwrap();
        let d = set_dist(prev.radius(), b2.radius(), &d2());
        let expect = total_energy(&b2, &f).unwrap().total() + (d * d + 0.5) / 1.0;
        assert!((phi - expect).abs() < 1e-12);
    }

    #[test]
    fn discrete_minimizer_is_the_continuum_equilibrium() {
        let f = zlogz();
        let c = cfg();
        let s = discrete_energy_minimizer(&f, &c, 48).unwrap();
        assert!((s.radius().value() - 1.0 / PI).abs() < 1e-6, "r={}", s.radius().value());
        // quantiles of the uniform density on B_{r*}
        let uni = QuantileProfile::uniform(d2(), s.radius().value(), 48).unwrap();
        for (a, b) in s.profile().quantiles().iter().zip(uni.quantiles()) {
            assert!((a - b).abs() < 1e-6);
        }
    }

    #[test]
    fn equilibrium_is_a_fixed_point_of_the_step() {
        let f = zlogz();
        let c = cfg();
        let eq = discrete_energy_minimizer(&f, &c, 32).unwrap();
        let (next, rec) = jko_step(&eq, 0.1, &f, &c, &JkoConfig::default()).unwrap();
        let moved = rho_dist(&eq, &next, &c).unwrap();
        assert!(moved <= 1e-6, "moved {moved} ({rec:?})");
    }

    #[test]
    fn vanishing_step_keeps_the_state_close() {
        let f = zlogz();
        let c = cfg();
        let prev = RadialState::uniform(d2(), 1.0, 24).unwrap();
        let (next, _) = jko_step(&prev, 1e-8, &f, &c, &JkoConfig::default()).unwrap();
        assert!(rho_dist(&prev, &next, &c).unwrap() <= 1e-3);
    }

    #[test]
    fn gradient_matches_finite_differences() {
        let f = zlogz();
        let c = cfg();
        let mut rng = SplitMix64::new(77);
        for _ in 0..5 {
            let m = 10;
            let prev = crate::state::tests::random_admissible(&mut rng, d2(), m);
            let cand = crate::state::tests::random_admissible(&mut rng, d2(), m);
            let tau = 0.2;
            let (_, grad) = objective_gradient(&prev, &cand, tau, &f, &c).unwrap();
            let mut x: Vec<f64> = cand.profile().quantiles().to_vec();
            x.push(cand.radius().value());
            let h = 1e-7;
            for k in 0..=m {
                let eval = |xs: &[f64]| {
                    let st = state_from_chain(xs, d2()).unwrap();
                    moreau_yosida_objective(&prev, &st, tau, &f, &c).unwrap()
                };
                let mut xp = x.clone();
                xp[k] += h;
                let mut xm = x.clone();
                xm[k] -= h;
                let fd = (eval(&xp) - eval(&xm)) / (2.0 * h);
                assert!(
                    (fd - grad[k]).abs() <= 2e-5 * (1.0 + fd.abs()),
                    "k={k}: fd={fd} analytic={}",
                    grad[k]
                );
            }
        }
    }

    #[test]
    fn flow_descends_toward_the_equilibrium() {
        let f = zlogz();
        let c = cfg();
        let initial = RadialState::uniform(d2(), 1.0, 32).unwrap();
        let jcfg = JkoConfig { m: 32, tau: 5e-3, ..JkoConfig::default() };
        let traj = run_flow(&initial, 1.5, &f, &c, &jcfg).unwrap();
        assert!(traj.aborted.is_none(), "{:?}", traj.aborted);
        assert_eq!(traj.len(), 301);
        // energies nonincreasing, radii decreasing toward 1/π
        assert!(traj.max_energy_increase() <= 1e-10);
        assert!(traj.dissipation_gap() >= -1e-9);
        let radii: Vec<f64> = traj.states.iter().map(|s| s.radius().value()).collect();
        for w in radii.windows(2) {
            assert!(w[1] <= w[0] + 1e-9, "radius increased: {w:?}");
        }
        let rstar = equilibrium_radius(&f, &d2()).unwrap().value();
        let r_end = radii.last().unwrap();
        assert!((r_end - rstar).abs() / rstar < 0.02, "r_end={r_end} r*={rstar}");
        // on discrete output the metric derivative is the step quotient
        let k = 40;
        let mid_t = 0.5 * (traj.times[k] + traj.times[k + 1]);
        let md = crate::state::metric_derivative(&traj, mid_t, &c).unwrap();
        let sq = crate::state::step_speed(&traj, k, &c).unwrap();
        assert_eq!(md, sq);
    }

    #[test]
    fn flow_from_equilibrium_is_constant() {
        let f = zlogz();
        let c = cfg();
        let eq = discrete_energy_minimizer(&f, &c, 24).unwrap();
        let jcfg = JkoConfig { m: 24, tau: 0.01, ..JkoConfig::default() };
        let traj = run_flow(&eq, 0.2, &f, &c, &jcfg).unwrap();
        for s in &traj.states {
            assert!(rho_dist(&eq, s, &c).unwrap() < 1e-5);
        }
    }

    #[test]
    fn cauchy_refinement_in_the_step_size() {
        // halving τ changes the final-time state by O(τ)
        let f = zlogz();
        let c = cfg();
        let initial = RadialState::uniform(d2(), 1.0, 64).unwrap();
        let run = |tau: f64| {
            let jcfg = JkoConfig { m: 64, tau, ..JkoConfig::default() };
            run_flow(&initial, 0.5, &f, &c, &jcfg).unwrap().states.last().unwrap().clone()
        };
        let s1 = run(4e-3);
        let s2 = run(2e-3);
        let s3 = run(1e-3);
        let d12 = rho_dist(&s1, &s2, &c).unwrap();
        let d23 = rho_dist(&s2, &s3, &c).unwrap();
        assert!(d23 <= 0.75 * d12, "refinement ratio {} (d12={d12}, d23={d23})", d23 / d12);
    }

    #[test]
    fn two_nearby_flows_do_not_separate_in_3d() {
        // E is 0-convex along geodesics for n = 3, so the flow map is
        // nonexpansive; the empirical modulus is reported by the test
        let f = zlogz();
        let dim = Dimension::new(3).unwrap();
        let c = MetricConfig::new(dim, 1.0, crate::geometry::MetricVariant::SurfaceTension)
            .unwrap();
        let a0 = RadialState::uniform(dim, 0.8, 48).unwrap();
        let b0 = RadialState::uniform(dim, 0.9, 48).unwrap();
        let jcfg = JkoConfig { m: 48, tau: 2e-3, ..JkoConfig::default() };
        let ta = run_flow(&a0, 0.5, &f, &c, &jcfg).unwrap();
        let tb = run_flow(&b0, 0.5, &f, &c, &jcfg).unwrap();
        let d0 = rho_dist(&a0, &b0, &c).unwrap();
        let mut lambda_hat = f64::INFINITY;
        for k in 1..ta.len() {
            let d = rho_dist(&ta.states[k], &tb.states[k], &c).unwrap();
            assert!(d <= d0 * 1.02 + 1e-9, "flows separated: {d} > {d0} at step {k}");
            lambda_hat = lambda_hat.min(-(d / d0).ln() / ta.times[k]);
        }
        // contraction factor e^{−λ̂ t} with λ̂ ≥ 0 within tolerance
        assert!(lambda_hat >= -0.05, "empirical modulus {lambda_hat}");
    }

    #[test]
    fn explicit_step_sequences_are_accepted() {
        let f = zlogz();
        let c = cfg();
        let initial = RadialState::uniform(d2(), 0.5, 16).unwrap();
        let jcfg = JkoConfig {
            m: 16,
            steps: Some(vec![1e-3, 2e-3, 4e-3]),
            ..JkoConfig::default()
        };
        let traj = run_flow(&initial, f64::NAN, &f, &c, &jcfg).unwrap();
        assert_eq!(traj.len(), 4);
        assert!((traj.horizon() - 7e-3).abs() < 1e-12);
    }

    #[test]
    fn barrier_gradient_matches_finite_differences() {
        let x = [0.3, 0.5, 0.9, 1.4];
        let mu = 0.7;
        let mut grad = vec![0.0; 4];
        let value = barrier_eval(&x, &mut grad, mu);
        assert!(value.is_finite());
        for k in 0..4 {
            let h = 1e-7;
            let mut xp = x;
            xp[k] += h;
            let mut xm = x;
            xm[k] -= h;
            let mut tmp = vec![0.0; 4];
            let fd = (barrier_eval(&xp, &mut tmp, mu) - barrier_eval(&xm, &mut tmp, mu))
                / (2.0 * h);
            assert!(
                (fd - grad[k]).abs() <= 1e-5 * (1.0 + fd.abs()),
                "k={k}: fd {fd} vs analytic {}",
                grad[k]
            );
        }
    }

    #[test]
    fn step_recovers_from_a_constraint_glued_start() {
        // previous state with the last quantile exactly on the membrane:
        // infinite energy, so the step must peel off the constraint first
        let f = zlogz();
        let c = cfg();
        let m = 16;
        let mut q: Vec<f64> = QuantileProfile::uniform(d2(), 1.0, m)
            .unwrap()
            .quantiles()
            .to_vec();
        q[m - 1] = 1.0;
        let prev = RadialState::new(
            BallRadius::new(1.0).unwrap(),
            QuantileProfile::new(d2(), q).unwrap(),
        )
        .unwrap();
        let (next, rec) = jko_step(&prev, 1e-2, &f, &c, &JkoConfig::default()).unwrap();
        assert!(next.profile().last_quantile() < next.radius().value());
        assert!(total_energy(&next, &f).unwrap().total().is_finite());
        assert!(rec.step_dist > 0.0);
    }

    #[test]
    fn config_validation_rejects_bad_inputs() {
        let mut jcfg = JkoConfig::default();
        jcfg.tau = -1.0;
        assert!(jcfg.validate().is_err());
        let mut jcfg = JkoConfig::default();
        jcfg.barrier_schedule = vec![1e-6, 1e-4];
        assert!(jcfg.validate().is_err());
        let mut jcfg = JkoConfig::default();
        jcfg.lambda = Some(-5.0);
        jcfg.tau = 0.5; // 1/λ⁻ = 0.2
        assert!(jcfg.validate().is_err());
        jcfg.tau = 0.1;
        assert!(jcfg.validate().is_ok());
    }
}
