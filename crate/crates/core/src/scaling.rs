//! Nondimensionalization of the physical problem.
//!
//! The physical model carries a diffusion constant κ, a surface-tension
//! coefficient σ, an osmosis coefficient β (boundary law v = −σ(n−1)/r + βu)
//! and a conserved total mass ϑ. Rescaling
//!
//! ```text
//! ξ = a x,   τ = b t,   w = u / c,
//! ```
//!
//! turns the system into the normalized one (σ = β = 1, unit mass) exactly
//! when the three conditions hold:
//!
//! ```text
//! σ a² / b = 1          (curvature term),
//! β a c / b = 1         (osmosis term),
//! c = ϑ aⁿ              (unit mass),
//! ```
//!
//! whose unique solution is
//!
//! ```text
//! a = (σ / (β ϑ))^{1/(n−1)},   b = σ a²,   c = ϑ aⁿ,
//! ```
//!
//! and the surviving diffusion constant becomes κ̂ = κ a²/b = κ/σ. Profiles
//! are carried as probability quantiles throughout, so the concentration
//! factor c never appears explicitly: radii and quantiles scale by a, time
//! by b, and the scaled state has unit mass by construction.

use crate::error::{Error, Result};
use crate::geometry::{BallRadius, Dimension};
use crate::profile::QuantileProfile;
use crate::state::RadialState;

/// Physical coefficients of the unscaled problem.
#[derive(Debug, Clone, Copy)]
pub struct PhysicalParams {
    pub kappa: f64,
    pub sigma: f64,
    pub beta: f64,
    pub theta: f64,
    pub dim: Dimension,
}

impl PhysicalParams {
    pub fn new(kappa: f64, sigma: f64, beta: f64, theta: f64, dim: Dimension) -> Result<Self> {
        for (name, v) in [("kappa", kappa), ("sigma", sigma), ("beta", beta), ("theta", theta)] {
            if !(v > 0.0) || !v.is_finite() {
                return Err(Error::Domain(format!("{name} = {v} must be positive and finite")));
            }
        }
        Ok(Self { kappa, sigma, beta, theta, dim })
    }

    /// a: lengths scale as ξ = a x.
    pub fn length_scale(&self) -> f64 {
        (self.sigma / (self.beta * self.theta)).powf(1.0 / (self.dim.nf() - 1.0))
    }

    /// b: times scale as τ = b t.
    pub fn time_scale(&self) -> f64 {
        self.sigma * self.length_scale().powi(2)
    }

    /// c: concentrations scale as w = u / c.
    pub fn concentration_scale(&self) -> f64 {
        self.theta * self.length_scale().powi(self.dim.n() as i32)
    }

    /// κ̂ = κ/σ: the diffusion constant of the scaled problem.
    pub fn scaled_kappa(&self) -> f64 {
        self.kappa / self.sigma
    }
}

/// Map a physical state and time into scaled variables. Returns the scaled
/// state, the scaled time, and the scaled diffusion constant κ̂.
pub fn to_scaled(p: &PhysicalParams, state: &RadialState, t: f64) -> Result<(RadialState, f64, f64)> {
    state.dim().same(&p.dim)?;
    let a = p.length_scale();
    let q = state.profile().quantiles().iter().map(|x| a * x).collect();
    let scaled = RadialState::new(
        BallRadius::new(a * state.radius().value())?,
        QuantileProfile::new(p.dim, q)?,
    )?;
    Ok((scaled, p.time_scale() * t, p.scaled_kappa()))
}

/// Inverse of [`to_scaled`]: recover the physical state and time.
pub fn from_scaled(p: &PhysicalParams, state: &RadialState, t_scaled: f64) -> Result<(RadialState, f64)> {
    state.dim().same(&p.dim)?;
    let a = p.length_scale();
    let q = state.profile().quantiles().iter().map(|x| x / a).collect();
    let physical = RadialState::new(
        BallRadius::new(state.radius().value() / a)?,
        QuantileProfile::new(p.dim, q)?,
    )?;
    Ok((physical, t_scaled / p.time_scale()))
}
