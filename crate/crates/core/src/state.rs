//! The coupled space of admissible (radius, profile) pairs.
//!
//! A state is a ball radius r together with a probability profile whose mass
//! lives inside the ball: the defining support constraint is q_M ≤ r. The
//! metric couples the two components,
//!
//! ```text
//! ϱ²((r, u), (s, w)) = d²(r, s) + W₂²(u, w) / κ,
//! ```
//!
//! where d is the radius metric of the configured variant and κ weighs how
//! fast mass moves relative to the membrane. Geodesics are componentwise; the
//! ball geodesic dominates linear interpolation, so coupled geodesics between
//! admissible states stay admissible.
//!
//! The profile component is not metrically complete (a sequence of profiles
//! concentrating at the origin has no limit among densities), and the
//! quantile representation cannot express such limits either; finite-energy
//! trajectories stay away from them because the energy floor diverges as
//! r ↓ 0.

use crate::error::{Error, Result};
use crate::geometry::{self, BallRadius, Dimension, MetricVariant};
use crate::profile::{displacement_geodesic, wasserstein2_squared, QuantileProfile};

/// Dimension, diffusion constant κ, and the metric variant in force.
#[derive(Debug, Clone, Copy)]
pub struct MetricConfig {
    pub dim: Dimension,
    pub kappa: f64,
    pub variant: MetricVariant,
}

impl MetricConfig {
    pub fn new(dim: Dimension, kappa: f64, variant: MetricVariant) -> Result<Self> {
        if !kappa.is_finite() || kappa <= 0.0 {
            return Err(Error::Domain(format!("kappa {kappa} must be positive")));
        }
        Ok(Self { dim, kappa, variant })
    }
}

/// Admissible pair (r, u) with all mass inside the ball.
#[derive(Debug, Clone)]
pub struct RadialState {
    r: BallRadius,
    u: QuantileProfile,
}

/// Absolute slack used when checking q_M ≤ r: geodesic endpoints and
/// projected optimizer iterates may sit exactly on the constraint, and the
/// closed-form geodesic rounds at the last bit.
pub fn support_slack(r: f64) -> f64 {
    1e-12 * r.abs().max(1.0)
}

impl RadialState {
    /// Build a state, enforcing the support constraint. Violations are a hard
    /// error, never clamped.
    pub fn new(r: BallRadius, u: QuantileProfile) -> Result<Self> {
        let q_last = u.last_quantile();
        if q_last > r.value() + support_slack(r.value()) {
            return Err(Error::SupportViolation { q_last, radius: r.value() });
        }
        Ok(Self { r, u })
    }

    pub fn uniform(dim: Dimension, radius: f64, m: usize) -> Result<Self> {
        RadialState::new(BallRadius::new(radius)?, QuantileProfile::uniform(dim, radius, m)?)
    }

    pub fn radius(&self) -> BallRadius {
        self.r
    }

    pub fn profile(&self) -> &QuantileProfile {
        &self.u
    }

    pub fn dim(&self) -> &Dimension {
        self.u.dim()
    }

    pub fn m(&self) -> usize {
        self.u.m()
    }
}

/// The coupled metric ϱ. Reduces to the radius metric when the profiles
/// agree and to W₂/√κ when the radii agree.
pub fn rho_dist(a: &RadialState, b: &RadialState, cfg: &MetricConfig) -> Result<f64> {
    Ok(rho_dist_squared(a, b, cfg)?.sqrt())
}

pub fn rho_dist_squared(a: &RadialState, b: &RadialState, cfg: &MetricConfig) -> Result<f64> {
    a.dim().same(b.dim())?;
    a.dim().same(&cfg.dim)?;
    let dr = geometry::radius_dist(a.radius(), b.radius(), &cfg.dim, cfg.variant);
    let w2 = wasserstein2_squared(a.profile(), b.profile())?;
    Ok(dr * dr + w2 / cfg.kappa)
}

/// Componentwise constant-speed geodesic. The result is admissible: the ball
/// geodesic lies above the linear radius interpolation while quantiles
/// interpolate linearly.
pub fn coupled_geodesic(
    a: &RadialState,
    b: &RadialState,
    tau: f64,
    cfg: &MetricConfig,
) -> Result<RadialState> {
    a.dim().same(b.dim())?;
    let r = geometry::ball_geodesic(a.radius(), b.radius(), tau, cfg.variant, &cfg.dim)?;
    let u = displacement_geodesic(a.profile(), b.profile(), tau)?;
    RadialState::new(r, u)
}

/// Speed of a trajectory on step k: ϱ(state_k, state_{k+1}) / (t_{k+1} − t_k).
pub fn step_speed(traj: &crate::jko::Trajectory, k: usize, cfg: &MetricConfig) -> Result<f64> {
    if k + 1 >= traj.len() {
        return Err(Error::TimeOutOfRange { t: k as f64 });
    }
    let dt = traj.times[k + 1] - traj.times[k];
    Ok(rho_dist(&traj.states[k], &traj.states[k + 1], cfg)? / dt)
}

/// Metric derivative |γ'|(t). For discrete minimizing-movement output this
/// is the step quotient of the step containing t; for densely sampled curves
/// it is the central difference at the nearest interior sample.
pub fn metric_derivative(
    traj: &crate::jko::Trajectory,
    t: f64,
    cfg: &MetricConfig,
) -> Result<f64> {
    use crate::jko::TrajectoryKind;
    if traj.len() < 2 {
        return Err(Error::TimeOutOfRange { t });
    }
    match traj.kind {
        TrajectoryKind::Discrete => {
            if t < traj.times[0] - 1e-12 || t > traj.horizon() + 1e-12 {
                return Err(Error::TimeOutOfRange { t });
            }
            let mut k = 0;
            while k + 2 < traj.len() && traj.times[k + 1] < t {
                k += 1;
            }
            step_speed(traj, k, cfg)
        }
        TrajectoryKind::Sampled => {
            let k = traj.index_at(t)?.clamp(1, traj.len() - 2);
            let dt = traj.times[k + 1] - traj.times[k - 1];
            Ok(rho_dist(&traj.states[k - 1], &traj.states[k + 1], cfg)? / dt)
        }
    }
}
