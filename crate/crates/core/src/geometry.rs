//! The space of balls centered at the origin.
//!
//! A ball in ℝⁿ is identified with its radius r ≥ 0, and boundary motion is
//! measured by one of two metrics, both defined by weighting the radius
//! increment with a power of the perimeter P(ρ) = n·ωₙ·ρ^{n-1}:
//!
//! ```text
//! d(r0, r1)  = ∫ √P(ρ) dρ = (2√(nωₙ)/(n+1)) |r1^{(n+1)/2} − r0^{(n+1)/2}|
//! d̂(r0, r1) = ∫  P(ρ) dρ = ωₙ |r1ⁿ − r0ⁿ|      (volume of B_{r1} △ B_{r0})
//! ```
//!
//! `d` is the surface-tension metric (L² norm of the normal velocity along a
//! family of balls); `d̂` weighs the normal velocity by the perimeter itself,
//! which models a membrane whose total permeance is fixed. Each metric is the
//! pullback of the Euclidean metric on the half-line under an explicit map
//! ι(r), so geodesics and convexity statements reduce to one-dimensional
//! calculus and evaluate in closed form.
//!
//! Restricting to concentric balls is what makes these metrics honest: over
//! general families of domains the corresponding infimum of the velocity
//! norm degenerates to zero between distinct sets, so no metric arises.

use crate::error::{Error, Result};

/// Which radius metric is in force.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MetricVariant {
    /// Weight √P(ρ): mean-curvature-driven membrane with constant permeability.
    SurfaceTension,
    /// Weight P(ρ): membrane with fixed total permeance.
    Permeability,
}

impl MetricVariant {
    pub fn as_str(&self) -> &'static str {
        match self {
            MetricVariant::SurfaceTension => "surface_tension",
            MetricVariant::Permeability => "permeability",
        }
    }
}

/// Spatial dimension n ≥ 2 with the unit-ball volume ωₙ precomputed.
#[derive(Debug, Clone, Copy)]
pub struct Dimension {
    n: u32,
    omega: f64,
}

impl PartialEq for Dimension {
    fn eq(&self, other: &Self) -> bool {
        self.n == other.n
    }
}

/// log Γ(k/2) for the half-integer argument k/2, by upward recursion from
/// Γ(1) = 1 or Γ(1/2) = √π.
fn ln_gamma_half(k: u32) -> f64 {
    debug_assert!(k >= 1);
    let mut ln = if k % 2 == 0 {
        0.0 // Γ(1)
    } else {
        0.5 * std::f64::consts::PI.ln() // Γ(1/2)
    };
    let mut x = if k % 2 == 0 { 1.0 } else { 0.5 };
    while x + 0.5 < k as f64 / 2.0 + 0.25 {
        ln += x.ln();
        x += 1.0;
    }
    ln
}

impl Dimension {
    /// n ≥ 2 is required: in one dimension the driving energy is not coercive
    /// and arbitrarily large balls have arbitrarily low energy.
    pub fn new(n: u32) -> Result<Self> {
        if n < 2 {
            return Err(Error::Domain(format!("dimension n={n} must be at least 2")));
        }
        // ωₙ = π^{n/2} / Γ(n/2 + 1), evaluated in log space.
        let ln_omega =
            (n as f64 / 2.0) * std::f64::consts::PI.ln() - ln_gamma_half(n + 2);
        Ok(Self { n, omega: ln_omega.exp() })
    }

    pub fn n(&self) -> u32 {
        self.n
    }

    pub fn nf(&self) -> f64 {
        self.n as f64
    }

    /// ωₙ, the volume of the unit ball.
    pub fn unit_ball_volume(&self) -> f64 {
        self.omega
    }

    /// ωₙ rⁿ.
    pub fn ball_volume(&self, r: f64) -> f64 {
        self.omega * r.powi(self.n as i32)
    }

    /// P(r) = n ωₙ r^{n-1}.
    pub fn perimeter(&self, r: f64) -> f64 {
        self.nf() * self.omega * r.powi(self.n as i32 - 1)
    }

    /// P'(r) = n (n-1) ωₙ r^{n-2}.
    pub fn perimeter_prime(&self, r: f64) -> f64 {
        self.nf() * (self.nf() - 1.0) * self.omega * r.powi(self.n as i32 - 2)
    }

    pub fn same(&self, other: &Dimension) -> Result<()> {
        if self.n == other.n {
            Ok(())
        } else {
            Err(Error::DimensionMismatch { left: self.n, right: other.n })
        }
    }
}

/// A ball radius: a nonnegative, finite length.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd)]
pub struct BallRadius(f64);

impl BallRadius {
    pub fn new(r: f64) -> Result<Self> {
        if !r.is_finite() || r < 0.0 {
            return Err(Error::Domain(format!("radius {r} must be finite and nonnegative")));
        }
        Ok(Self(r))
    }

    pub fn value(&self) -> f64 {
        self.0
    }
}

/// Perimeter of ∂B_r. Zero at r = 0 for n ≥ 2; energy evaluations reject
/// r = 0 separately because the internal energy blows up there.
pub fn perimeter(r: BallRadius, dim: &Dimension) -> f64 {
    dim.perimeter(r.value())
}

/// Surface-tension metric d(r0, r1) in closed form.
pub fn set_dist(r0: BallRadius, r1: BallRadius, dim: &Dimension) -> f64 {
    (iota_st(r1.value(), dim) - iota_st(r0.value(), dim)).abs()
}

/// Permeability metric d̂(r0, r1) = ωₙ |r1ⁿ − r0ⁿ|, the Lebesgue measure of
/// the symmetric difference of the two balls.
pub fn set_dist_permeable(r0: BallRadius, r1: BallRadius, dim: &Dimension) -> f64 {
    (dim.ball_volume(r1.value()) - dim.ball_volume(r0.value())).abs()
}

/// Radius metric for the configured variant.
pub fn radius_dist(r0: BallRadius, r1: BallRadius, dim: &Dimension, variant: MetricVariant) -> f64 {
    match variant {
        MetricVariant::SurfaceTension => set_dist(r0, r1, dim),
        MetricVariant::Permeability => set_dist_permeable(r0, r1, dim),
    }
}

fn iota_st(r: f64, dim: &Dimension) -> f64 {
    let n = dim.nf();
    2.0 * (n * dim.unit_ball_volume()).sqrt() / (n + 1.0) * r.powf((n + 1.0) / 2.0)
}

/// The isometry ι from the space of balls to the half-line: |ι(r0) − ι(r1)|
/// equals the radius metric of the chosen variant.
pub fn iota(r: BallRadius, dim: &Dimension, variant: MetricVariant) -> f64 {
    match variant {
        MetricVariant::SurfaceTension => iota_st(r.value(), dim),
        MetricVariant::Permeability => dim.ball_volume(r.value()),
    }
}

/// Inverse of [`iota`].
pub fn iota_inverse(s: f64, dim: &Dimension, variant: MetricVariant) -> Result<BallRadius> {
    if !s.is_finite() || s < 0.0 {
        return Err(Error::Domain(format!("isometry coordinate {s} must be nonnegative")));
    }
    let n = dim.nf();
    let r = match variant {
        MetricVariant::SurfaceTension => {
            (s * (n + 1.0) / (2.0 * (n * dim.unit_ball_volume()).sqrt())).powf(2.0 / (n + 1.0))
        }
        MetricVariant::Permeability => (s / dim.unit_ball_volume()).powf(1.0 / n),
    };
    BallRadius::new(r)
}

/// dι/dr: √P(r) for the surface-tension variant, P(r) for permeability.
pub fn iota_prime(r: f64, dim: &Dimension, variant: MetricVariant) -> f64 {
    match variant {
        MetricVariant::SurfaceTension => dim.perimeter(r).sqrt(),
        MetricVariant::Permeability => dim.perimeter(r),
    }
}

/// Constant-speed geodesic between two balls, linear in the ι coordinate:
///
/// ```text
/// surface tension:  r(τ) = ((1−τ) r0^{(n+1)/2} + τ r1^{(n+1)/2})^{2/(n+1)}
/// permeability:     r(τ) = ((1−τ) r0ⁿ + τ r1ⁿ)^{1/n}
/// ```
///
/// Both dominate the linear interpolation (1−τ) r0 + τ r1.
pub fn ball_geodesic(
    r0: BallRadius,
    r1: BallRadius,
    tau: f64,
    variant: MetricVariant,
    dim: &Dimension,
) -> Result<BallRadius> {
    if !(0.0..=1.0).contains(&tau) {
        return Err(Error::Domain(format!("geodesic parameter {tau} outside [0, 1]")));
    }
    let s = (1.0 - tau) * iota(r0, dim, variant) + tau * iota(r1, dim, variant);
    iota_inverse(s, dim, variant)
}
