//! The driving functional E(r, u) = P(r) + ∫ f(u) P dρ and its integrand
//! algebra.
//!
//! The integrand f is convex with f(0) = 0 and superlinear growth. The
//! auxiliary function
//!
//! ```text
//! ĥf(z) = z f'(z) − f(z),   ĥf(0) = 0
//! ```
//!
//! is nondecreasing, nonnegative and continuous; it acts as a pressure in the
//! boundary law and in the local slope. For f(z) = z log z, ĥf(z) = z; for
//! f(z) = z², ĥf(z) = z².
//!
//! For a fixed radius, the minimum of E over profiles supported in B_r is the
//! uniform density (Jensen), giving the radial energy floor
//!
//! ```text
//! E_o(r) = n ωₙ r^{n-1} + ωₙ rⁿ f(1/(ωₙ rⁿ)),
//! ```
//!
//! which diverges at r → 0 and r → ∞ and has a unique minimizer r*, the
//! equilibrium radius, where (n−1)/r* = ĥf(1/(ωₙ r*ⁿ)).
//!
//! # Discretization
//!
//! In quantile coordinates the internal energy is a sum over mass cells,
//! Σ (1/M) f(u_i)/u_i = Σ ΔV_i f(u_i). The quantiles themselves serve as
//! cell walls: mass 1/M sits between consecutive quantiles, a half cell of
//! mass 1/(2M) sits inside the first quantile, and the outer half cell spans
//! from the last quantile to the domain radius r (for a state) or to a
//! linearly extrapolated support edge (for a bare profile). Every cell volume
//! is a difference ωₙ(bⁿ − aⁿ) of wall powers with walls affine in the
//! quantiles, which makes the discrete internal energy exactly convex along
//! displacement interpolation whenever z ↦ zⁿ f(z⁻ⁿ) is convex and
//! nonincreasing, and places the boundary pressure term −ĥf(u(r)) P(r)
//! directly on the radius coordinate.

use std::sync::Arc;

use crate::error::{Error, Result};
use crate::geometry::{BallRadius, Dimension};
use crate::profile::QuantileProfile;
use crate::state::RadialState;

/// A convex internal-energy integrand with its derivative and pressure ĥf.
#[derive(Clone)]
pub enum EntropyIntegrand {
    /// Boltzmann entropy f(z) = z log z, ĥf(z) = z.
    ZLogZ,
    /// Quadratic f(z) = z², ĥf(z) = z².
    ZSquared,
    /// User-supplied integrand; ĥf derived as z f'(z) − f(z).
    Custom {
        name: String,
        f: Arc<dyn Fn(f64) -> f64 + Send + Sync>,
        f_prime: Arc<dyn Fn(f64) -> f64 + Send + Sync>,
    },
}

impl std::fmt::Debug for EntropyIntegrand {
    fn fmt(&self, fo: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(fo, "EntropyIntegrand({})", self.name())
    }
}

impl EntropyIntegrand {
    pub fn by_name(name: &str) -> Result<Self> {
        match name {
            "zlogz" => Ok(EntropyIntegrand::ZLogZ),
            "zsquared" => Ok(EntropyIntegrand::ZSquared),
            other => Err(Error::Config(format!("unknown integrand '{other}'"))),
        }
    }

    pub fn name(&self) -> &str {
        match self {
            EntropyIntegrand::ZLogZ => "zlogz",
            EntropyIntegrand::ZSquared => "zsquared",
            EntropyIntegrand::Custom { name, .. } => name,
        }
    }

    pub fn f(&self, z: f64) -> f64 {
        match self {
            EntropyIntegrand::ZLogZ => {
                if z <= 0.0 {
                    0.0
                } else {
                    z * z.ln()
                }
            }
            EntropyIntegrand::ZSquared => z * z,
            EntropyIntegrand::Custom { f, .. } => {
                if z <= 0.0 {
                    0.0
                } else {
                    f(z)
                }
            }
        }
    }

    /// f'(z) for z > 0.
    pub fn f_prime(&self, z: f64) -> f64 {
        match self {
            EntropyIntegrand::ZLogZ => z.ln() + 1.0,
            EntropyIntegrand::ZSquared => 2.0 * z,
            EntropyIntegrand::Custom { f_prime, .. } => f_prime(z),
        }
    }

    /// ĥf(z) = z f'(z) − f(z), extended by ĥf(0) = 0.
    pub fn f_hat(&self, z: f64) -> f64 {
        if z <= 0.0 {
            return 0.0;
        }
        match self {
            EntropyIntegrand::ZLogZ => z,
            EntropyIntegrand::ZSquared => z * z,
            EntropyIntegrand::Custom { .. } => z * self.f_prime(z) - self.f(z),
        }
    }
}

/// Sampled validity report for an integrand in a given dimension.
#[derive(Debug, Clone)]
pub struct IntegrandReport {
    pub name: String,
    pub zero_at_zero: bool,
    pub convex: bool,
    pub superlinear: bool,
    pub f_hat_monotone: bool,
    pub coercive: bool,
    /// Doubling constant C with f(z₁+z₂) ≤ C(1 + f(z₁) + f(z₂)) on the grid.
    pub doubling_constant: Option<f64>,
    /// z ↦ zⁿ f(z⁻ⁿ) convex and nonincreasing (displacement convexity).
    pub mccann: bool,
}

impl IntegrandReport {
    /// The checks required to run the flow at all. The McCann flag gates only
    /// the convexity diagnostics and is reported separately.
    pub fn usable(&self) -> bool {
        self.zero_at_zero
            && self.convex
            && self.superlinear
            && self.f_hat_monotone
            && self.coercive
            && self.doubling_constant.is_some()
    }
}

/// Sample the integrand conditions on fixed grids. The conditions are
/// analytic; a finite sample can only certify them pointwise, so the grids
/// cover twenty decades and the report is stored with run metadata.
pub fn validate_integrand(f: &EntropyIntegrand, dim: &Dimension) -> IntegrandReport {
    let zero_at_zero = f.f(0.0).abs() <= 1e-300 && f.f_hat(0.0).abs() <= 1e-300;

    // log-spaced grid 1e-12 .. 1e8
    let grid: Vec<f64> = (0..=200).map(|k| 10f64.powf(-12.0 + k as f64 * 0.1)).collect();

    let mut convex = true;
    for w in grid.windows(3) {
        let (x, y, z) = (w[0], w[1], w[2]);
        let chord = f.f(x) * (z - y) / (z - x) + f.f(z) * (y - x) / (z - x);
        let scale = 1.0 + f.f(x).abs() + f.f(z).abs();
        if f.f(y) > chord + 1e-9 * scale {
            convex = false;
            break;
        }
    }

    let mut superlinear = true;
    let mut prev_ratio = f64::NEG_INFINITY;
    for &z in &grid {
        let ratio = f.f(z) / z;
        if ratio < prev_ratio - 1e-9 * (1.0 + ratio.abs()) {
            superlinear = false;
            break;
        }
        prev_ratio = ratio;
    }
    let zmax = *grid.last().unwrap();
    superlinear = superlinear && f.f(zmax) / zmax >= 10.0;

    let mut f_hat_monotone = f.f_hat(grid[0]) >= -1e-12;
    let mut prev = 0.0f64;
    for &z in &grid {
        let h = f.f_hat(z);
        if h < prev - 1e-9 * (1.0 + prev.abs()) || h < -1e-12 {
            f_hat_monotone = false;
            break;
        }
        prev = h;
    }

    // coercivity: z^{-1/n} f(z) → 0 as z ↓ 0, sampled down to 1e-12
    let n = dim.nf();
    let c = |z: f64| z.powf(-1.0 / n) * f.f(z);
    let coercive = c(1e-12).abs() <= 1e-2 && c(1e-12).abs() <= c(1e-6).abs() + 1e-12;

    // doubling on a coarser grid
    let dgrid: Vec<f64> = (0..=12).map(|k| 10f64.powi(k - 6)).collect();
    let mut worst = 1.0f64;
    let mut doubling_ok = true;
    for &a in &dgrid {
        for &b in &dgrid {
            let denom = 1.0 + f.f(a) + f.f(b);
            if denom <= 0.0 {
                doubling_ok = false;
                break;
            }
            worst = worst.max(f.f(a + b) / denom);
        }
    }
    let doubling_constant = if doubling_ok && worst.is_finite() && worst < 1e6 {
        Some(worst)
    } else {
        None
    };

    // McCann: z ↦ zⁿ f(z⁻ⁿ) convex and nonincreasing
    let m = |z: f64| z.powf(n) * f.f(z.powf(-n));
    let mgrid: Vec<f64> = (0..=120).map(|k| 0.2 + 4.8 * k as f64 / 120.0).collect();
    let mut mccann = true;
    for w in mgrid.windows(2) {
        if m(w[1]) > m(w[0]) + 1e-9 * (1.0 + m(w[0]).abs()) {
            mccann = false;
            break;
        }
    }
    if mccann {
        for w in mgrid.windows(3) {
            let (x, y, z) = (w[0], w[1], w[2]);
            let chord = m(x) * (z - y) / (z - x) + m(z) * (y - x) / (z - x);
            if m(y) > chord + 1e-9 * (1.0 + m(x).abs() + m(z).abs()) {
                mccann = false;
                break;
            }
        }
    }

    IntegrandReport {
        name: f.name().to_string(),
        zero_at_zero,
        convex,
        superlinear,
        f_hat_monotone,
        coercive,
        doubling_constant,
        mccann,
    }
}

/// Validate and fail hard when the integrand cannot drive the flow.
pub fn require_valid_integrand(f: &EntropyIntegrand, dim: &Dimension) -> Result<IntegrandReport> {
    let report = validate_integrand(f, dim);
    if !report.usable() {
        return Err(Error::InvalidIntegrand(format!("{report:?}")));
    }
    Ok(report)
}

/// Perimeter + internal parts of the energy of a state.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EnergyBreakdown {
    pub perimeter_term: f64,
    pub internal_term: f64,
}

impl EnergyBreakdown {
    pub fn total(&self) -> f64 {
        self.perimeter_term + self.internal_term
    }
}

/// Internal energy over quantile-walled cells with the outer wall at `edge`.
/// walls = (0, q_0, q_1, …, q_{M-1}, edge); masses = (h/2, h, …, h, h/2).
fn cap_cell_energy(q: &[f64], edge: f64, dim: &Dimension, f: &EntropyIntegrand) -> Result<f64> {
    let m = q.len();
    let h = 1.0 / m as f64;
    let scale = dim.ball_volume(edge.max(1.0));
    let mut lower_vol = 0.0;
    let mut total = 0.0;
    for c in 0..=m {
        let upper = if c < m { q[c] } else { edge };
        let mass = if c == 0 || c == m { 0.5 * h } else { h };
        let vol = dim.ball_volume(upper) - lower_vol;
        if vol <= 1e-14 * scale {
            return Err(Error::Atom { index: c.min(m - 1) });
        }
        total += vol * f.f(mass / vol);
        lower_vol += vol;
    }
    Ok(total)
}

/// Extrapolated support edge of a bare profile: half the last quantile gap
/// beyond the last quantile (volume-doubling for a single cell).
fn extrapolated_edge(q: &[f64], dim: &Dimension) -> f64 {
    let m = q.len();
    if m == 1 {
        2f64.powf(1.0 / dim.nf()) * q[0]
    } else {
        q[m - 1] + 0.5 * (q[m - 1] - q[m - 2])
    }
}

/// E_N(u) = ∫ f(u) P dρ in quantile coordinates: Σ_i (1/M) f(u_i)/u_i over
/// the reconstructed cells, the support edge extrapolated from the last two
/// quantiles.
pub fn internal_energy(u: &QuantileProfile, f: &EntropyIntegrand) -> Result<f64> {
    let q = u.quantiles();
    cap_cell_energy(q, extrapolated_edge(q, u.dim()), u.dim(), f)
}

/// Internal energy of a state: the outer cell ends at the domain radius, so
/// the total reconstructed volume is exactly ωₙ rⁿ and Jensen's bound against
/// the uniform profile holds without discretization slack.
pub(crate) fn internal_energy_state(
    q: &[f64],
    r: f64,
    dim: &Dimension,
    f: &EntropyIntegrand,
) -> Result<f64> {
    cap_cell_energy(q, r, dim, f)
}

/// State-level internal energy with its gradient in (q, r).
///
/// Writing u_c for the cell densities, each wall w shared by cells (a, b)
/// contributes P(w)·(ĥf(u_b) − ĥf(u_a)) to its quantile and the outer wall
/// contributes −ĥf(u_out)·P(r) to the radius: the pressure acts on the walls.
pub(crate) fn internal_energy_state_grad(
    q: &[f64],
    r: f64,
    dim: &Dimension,
    f: &EntropyIntegrand,
    grad_q: &mut [f64],
) -> Result<(f64, f64)> {
    let m = q.len();
    let h = 1.0 / m as f64;
    let scale = dim.ball_volume(r.max(1.0));
    let mut dens = vec![0.0; m + 1];
    let mut lower_vol = 0.0;
    let mut total = 0.0;
    for c in 0..=m {
        let upper = if c < m { q[c] } else { r };
        let mass = if c == 0 || c == m { 0.5 * h } else { h };
        let vol = dim.ball_volume(upper) - lower_vol;
        if vol <= 1e-14 * scale {
            return Err(Error::Atom { index: c.min(m - 1) });
        }
        dens[c] = mass / vol;
        total += vol * f.f(dens[c]);
        lower_vol += vol;
    }
    for j in 0..m {
        grad_q[j] = dim.perimeter(q[j]) * (f.f_hat(dens[j + 1]) - f.f_hat(dens[j]));
    }
    let grad_r = -f.f_hat(dens[m]) * dim.perimeter(r);
    Ok((total, grad_r))
}

/// Cell densities of a state, outer cell ending at r. The last entry is the
/// natural discrete boundary trace.
pub fn state_cell_densities(s: &RadialState) -> Result<Vec<f64>> {
    let q = s.profile().quantiles();
    let dim = s.dim();
    let r = s.radius().value();
    let m = q.len();
    let h = 1.0 / m as f64;
    let scale = dim.ball_volume(r.max(1.0));
    let mut dens = vec![0.0; m + 1];
    let mut lower_vol = 0.0;
    for c in 0..=m {
        let upper = if c < m { q[c] } else { r };
        let mass = if c == 0 || c == m { 0.5 * h } else { h };
        let vol = dim.ball_volume(upper) - lower_vol;
        if vol <= 1e-14 * scale {
            return Err(Error::Atom { index: c.min(m - 1) });
        }
        dens[c] = mass / vol;
        lower_vol += vol;
    }
    Ok(dens)
}

/// E(r, u) = P(r) + E_N(r, u). The perimeter needs r > 0: the energy floor
/// diverges as r ↓ 0, so r = 0 never occurs on a finite-energy trajectory.
/// States whose last quantile touches r carry an atom at the membrane and
/// are rejected.
pub fn total_energy(s: &RadialState, f: &EntropyIntegrand) -> Result<EnergyBreakdown> {
    let r = s.radius().value();
    if r <= 0.0 {
        return Err(Error::Domain("energy needs a strictly positive radius".into()));
    }
    Ok(EnergyBreakdown {
        perimeter_term: s.dim().perimeter(r),
        internal_term: internal_energy_state(s.profile().quantiles(), r, s.dim(), f)?,
    })
}

/// E_o(r) = n ωₙ r^{n-1} + ωₙ rⁿ f(1/(ωₙ rⁿ)): the minimum of E over all
/// profiles supported in B_r, attained by the uniform density.
pub fn energy_floor(r: BallRadius, f: &EntropyIntegrand, dim: &Dimension) -> Result<f64> {
    let rv = r.value();
    if rv <= 0.0 {
        return Err(Error::Domain("energy floor needs r > 0".into()));
    }
    let vol = dim.ball_volume(rv);
    Ok(dim.perimeter(rv) + vol * f.f(1.0 / vol))
}

/// Stationarity defect of E_o: g(r) = (n−1)/r − ĥf(1/(ωₙ rⁿ)). Negative for
/// small r, positive for large r; the root is the equilibrium radius.
fn stationarity(r: f64, f: &EntropyIntegrand, dim: &Dimension) -> f64 {
    (dim.nf() - 1.0) / r - f.f_hat(1.0 / dim.ball_volume(r))
}

/// The unique minimizer r* of E_o, located by bracketed bisection on the
/// stationarity condition (n−1)/r = ĥf(1/(ωₙ rⁿ)).
pub fn equilibrium_radius(f: &EntropyIntegrand, dim: &Dimension) -> Result<BallRadius> {
    let mut lo = 1.0;
    let mut its = 0;
    while stationarity(lo, f, dim) >= 0.0 {
        lo *= 0.5;
        its += 1;
        if its > 200 {
            return Err(Error::InvalidIntegrand(
                "no lower bracket for the equilibrium radius; integrand not coercive".into(),
            ));
        }
    }
    let mut hi = lo.max(1.0);
    its = 0;
    while stationarity(hi, f, dim) <= 0.0 {
        hi *= 2.0;
        its += 1;
        if its > 200 {
            return Err(Error::InvalidIntegrand(
                "no upper bracket for the equilibrium radius; integrand not coercive".into(),
            ));
        }
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if stationarity(mid, f, dim) < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    BallRadius::new(0.5 * (lo + hi))
}
