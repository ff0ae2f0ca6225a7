//! Radially symmetric osmotic cell swelling as a metric gradient flow.
//!
//! A cell is a ball B_{r(t)} ⊂ ℝⁿ filled with a solute of concentration
//! u(ρ, t) that diffuses inside and cannot cross the membrane; the membrane
//! moves with normal velocity v = −(n−1)/r + u(r) (curvature pulls inward,
//! osmotic pressure pushes outward). In scaled variables the pair (r, u)
//! evolves as the gradient flow of
//!
//! ```text
//! E(r, u) = n ωₙ r^{n-1} + ∫ f(u) P dρ
//! ```
//!
//! on the space of admissible pairs with the metric
//! ϱ² = d²(r, s) + W₂²(u, w)/κ, where d is a weighted radius metric and W₂
//! the quadratic Wasserstein distance of the mass profiles.
//!
//! The crate provides:
//!
//! - exact one-dimensional optimal transport in quantile coordinates
//!   ([`profile`]), the ball metrics and geodesics ([`geometry`]), and the
//!   coupled state space ([`state`]);
//! - the energy, its integrand algebra and validity checks, the radial
//!   energy floor and the equilibrium radius ([`energy`]);
//! - the minimizing-movement (implicit Euler) solver ([`jko`]);
//! - variational diagnostics: local slope, dissipation identity, evolution
//!   variational inequality, convexity probes ([`diagnostics`]);
//! - an independent finite-volume solver for the strong form plus weak-form
//!   residuals for cross-validation ([`pde`]);
//! - physical-to-scaled parameter maps ([`scaling`]) and CSV output ([`io`]).

pub mod diagnostics;
pub mod energy;
pub mod error;
pub mod geometry;
pub mod io;
pub mod jko;
pub mod pde;
pub mod profile;
pub mod rng;
pub mod scaling;
pub mod solver;
pub mod state;

pub use energy::{
    energy_floor, equilibrium_radius, internal_energy, total_energy, validate_integrand,
    EnergyBreakdown, EntropyIntegrand, IntegrandReport,
};
pub use error::{Error, Result};
pub use geometry::{
    ball_geodesic, iota, iota_inverse, perimeter, set_dist, set_dist_permeable, BallRadius,
    Dimension, MetricVariant,
};
pub use jko::{
    discrete_energy_minimizer, jko_step, moreau_yosida_objective, run_flow, JkoConfig, StepRecord,
    Trajectory, TrajectoryKind,
};
pub use profile::{
    density_from_quantiles, displacement_geodesic, optimal_map, quantiles_from_density,
    wasserstein2, wasserstein2_squared, QuantileProfile, RadialDensity,
};
pub use state::{coupled_geodesic, metric_derivative, rho_dist, step_speed, MetricConfig, RadialState};
