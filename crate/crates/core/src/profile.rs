//! Radial probability profiles in quantile (pseudo-inverse CDF) coordinates.
//!
//! A radially symmetric probability density u on ℝⁿ is described by its
//! cumulative mass function and the pseudo-inverse of that function:
//!
//! ```text
//! F_u(ρ) = ∫₀^ρ u(s) P(s) ds,        F_u⁻¹(σ) = sup { ρ : F_u(ρ) ≤ σ }.
//! ```
//!
//! A [`QuantileProfile`] stores F_u⁻¹ sampled at the mass midpoints
//! σ_i = (i − ½)/M. Each cell carries mass 1/M, so total mass is 1 by
//! construction and never drifts. In these coordinates the quadratic
//! Wasserstein distance is an exact finite sum,
//!
//! ```text
//! W₂²(u, w) = ∫₀¹ |F_u⁻¹(σ) − F_w⁻¹(σ)|² dσ ≈ (1/M) Σ (q_i − q'_i)²,
//! ```
//!
//! the optimal transport map is the monotone rearrangement F_w⁻¹ ∘ F_u, and
//! displacement geodesics are plain linear interpolation of quantiles.
//!
//! Atoms (coincident quantiles) are rejected rather than represented: the
//! profiles of interest are absolutely continuous densities. Convergence of
//! profiles is always measured in W₂ here; the weak-L¹ topology relevant to
//! compactness arguments has no finite-dimensional counterpart in this
//! representation.

use crate::error::{Error, Result};
use crate::geometry::Dimension;

/// Discretized pseudo-inverse CDF: monotone quantiles at mass midpoints.
#[derive(Debug, Clone)]
pub struct QuantileProfile {
    dim: Dimension,
    q: Vec<f64>,
}

/// A radial density sampled on an increasing radius grid.
#[derive(Debug, Clone)]
pub struct RadialDensity {
    pub dim: Dimension,
    pub grid: Vec<f64>,
    pub values: Vec<f64>,
}

impl QuantileProfile {
    pub fn new(dim: Dimension, q: Vec<f64>) -> Result<Self> {
        if q.is_empty() {
            return Err(Error::Domain("profile needs at least one cell".into()));
        }
        if !q[0].is_finite() || q[0] < 0.0 {
            return Err(Error::Domain(format!("first quantile {} must be >= 0", q[0])));
        }
        for i in 1..q.len() {
            if !q[i].is_finite() || q[i] < q[i - 1] {
                return Err(Error::Domain(format!(
                    "quantiles must be nondecreasing: q[{}]={} < q[{}]={}",
                    i,
                    q[i],
                    i - 1,
                    q[i - 1]
                )));
            }
        }
        Ok(Self { dim, q })
    }

    /// Uniform density on the ball of the given radius: q_i = r σ_i^{1/n}.
    pub fn uniform(dim: Dimension, radius: f64, m: usize) -> Result<Self> {
        if radius <= 0.0 || !radius.is_finite() {
            return Err(Error::Domain(format!("support radius {radius} must be positive")));
        }
        let n = dim.nf();
        let q = (0..m)
            .map(|i| radius * sigma_mid(i, m).powf(1.0 / n))
            .collect();
        Self::new(dim, q)
    }

    pub fn m(&self) -> usize {
        self.q.len()
    }

    pub fn dim(&self) -> &Dimension {
        self.dim_ref()
    }

    fn dim_ref(&self) -> &Dimension {
        &self.dim
    }

    pub fn quantiles(&self) -> &[f64] {
        &self.q
    }

    pub fn last_quantile(&self) -> f64 {
        *self.q.last().unwrap()
    }

    /// Mass midpoint σ_i = (i + ½)/M, 0-based.
    pub fn sigma(&self, i: usize) -> f64 {
        sigma_mid(i, self.q.len())
    }

    pub fn is_strictly_increasing(&self) -> bool {
        self.q.windows(2).all(|w| w[1] > w[0]) && self.q[0] > 0.0
    }

    /// Enclosed-volume cell boundaries W_0 = 0 < W_1 < … < W_M and the implied
    /// piecewise-constant cell densities u_i = (1/M) / (W_{i+1} − W_i).
    ///
    /// Interior boundaries sit at the volume midpoint between neighboring
    /// quantiles, so a profile whose quantiles come from a uniform density
    /// reconstructs to exactly constant cells.
    pub fn volume_cells(&self) -> Result<(Vec<f64>, Vec<f64>)> {
        let m = self.q.len();
        let q_scale = self.q[m - 1].max(1.0);
        for i in 1..m {
            if self.q[i] - self.q[i - 1] <= 1e-14 * q_scale {
                return Err(Error::Atom { index: i });
            }
        }
        let vol: Vec<f64> = self.q.iter().map(|&x| self.dim.ball_volume(x)).collect();
        let mut w = vec![0.0; m + 1];
        for j in 1..m {
            w[j] = 0.5 * (vol[j - 1] + vol[j]);
        }
        w[m] = 2.0 * vol[m - 1] - w[m - 1];
        let h = 1.0 / m as f64;
        let mut dens = vec![0.0; m];
        for i in 0..m {
            let dv = w[i + 1] - w[i];
            if dv <= 1e-14 * (1.0 + w[m]) {
                return Err(Error::Atom { index: i });
            }
            dens[i] = h / dv;
        }
        Ok((w, dens))
    }

    /// Cell densities alone (see [`QuantileProfile::volume_cells`]).
    pub fn cell_densities(&self) -> Result<Vec<f64>> {
        Ok(self.volume_cells()?.1)
    }

    /// Cumulative mass below radius ρ under the piecewise-constant
    /// reconstruction.
    pub fn cdf(&self, rho: f64) -> Result<f64> {
        let (w, _) = self.volume_cells()?;
        let v = self.dim.ball_volume(rho.max(0.0));
        let m = self.q.len();
        if v >= w[m] {
            return Ok(1.0);
        }
        let h = 1.0 / m as f64;
        // W is increasing; find the cell containing v.
        let mut j = match w.binary_search_by(|x| x.partial_cmp(&v).unwrap()) {
            Ok(k) => k,
            Err(k) => k.saturating_sub(1),
        };
        if j >= m {
            j = m - 1;
        }
        Ok(h * (j as f64 + (v - w[j]) / (w[j + 1] - w[j])))
    }

    /// Linear-in-σ resampling to a different cell count. The interpolation
    /// error is O(1/M); the outermost targets are extrapolated with the end
    /// slopes (clamped at zero), so upsampling never collapses cells into
    /// atoms.
    pub fn resample(&self, m_new: usize) -> Result<Self> {
        if m_new == 0 {
            return Err(Error::Domain("resample target must have at least one cell".into()));
        }
        let m = self.q.len();
        let mut q_new: Vec<f64> = (0..m_new)
            .map(|j| {
                let s = sigma_mid(j, m_new);
                // position in the source midpoint grid
                let x = s * m as f64 - 0.5;
                if m == 1 {
                    self.q[0]
                } else if x <= 0.0 {
                    (self.q[0] + x * (self.q[1] - self.q[0])).max(0.0)
                } else if x >= (m - 1) as f64 {
                    self.q[m - 1] + (x - (m - 1) as f64) * (self.q[m - 1] - self.q[m - 2])
                } else {
                    let k = x.floor() as usize;
                    let t = x - k as f64;
                    (1.0 - t) * self.q[k] + t * self.q[k + 1]
                }
            })
            .collect();
        // zero-clamping at the origin may flatten the first cells
        let nudge = 1e-13 * q_new[m_new - 1].max(1.0);
        for j in 1..m_new {
            if q_new[j] <= q_new[j - 1] {
                q_new[j] = q_new[j - 1] + nudge;
            }
        }
        Self::new(self.dim, q_new)
    }
}

fn sigma_mid(i: usize, m: usize) -> f64 {
    (i as f64 + 0.5) / m as f64
}

impl RadialDensity {
    pub fn new(dim: Dimension, grid: Vec<f64>, values: Vec<f64>) -> Result<Self> {
        if grid.len() != values.len() || grid.len() < 2 {
            return Err(Error::Domain("density needs matching grid/values with >= 2 nodes".into()));
        }
        if grid[0] < 0.0 {
            return Err(Error::Domain("density grid must start at a nonnegative radius".into()));
        }
        for i in 1..grid.len() {
            if grid[i] <= grid[i - 1] {
                return Err(Error::Domain("density grid must be strictly increasing".into()));
            }
        }
        if values.iter().any(|v| !v.is_finite() || *v < 0.0) {
            return Err(Error::Domain("density values must be finite and nonnegative".into()));
        }
        Ok(Self { dim, grid, values })
    }

    /// ∫ u(ρ) P(ρ) dρ by the trapezoid rule.
    pub fn mass(&self) -> f64 {
        let mut total = 0.0;
        for i in 1..self.grid.len() {
            let a = self.values[i - 1] * self.dim.perimeter(self.grid[i - 1]);
            let b = self.values[i] * self.dim.perimeter(self.grid[i]);
            total += 0.5 * (a + b) * (self.grid[i] - self.grid[i - 1]);
        }
        total
    }
}

/// Build a quantile profile from a gridded density by cumulative quadrature
/// of u·P and inversion at the mass midpoints.
///
/// Densities whose total mass differs from 1 by more than 1e-6 are rejected;
/// the small residual below that threshold is normalized away so that the
/// inversion spans (0, 1) exactly.
pub fn quantiles_from_density(u: &RadialDensity, m: usize) -> Result<QuantileProfile> {
    if m == 0 {
        return Err(Error::Domain("quantile count must be positive".into()));
    }
    let mass = u.mass();
    if (mass - 1.0).abs() > 1e-6 {
        return Err(Error::BadMass { mass });
    }
    let k = u.grid.len();
    let mut cum = vec![0.0; k];
    for i in 1..k {
        let a = u.values[i - 1] * u.dim.perimeter(u.grid[i - 1]);
        let b = u.values[i] * u.dim.perimeter(u.grid[i]);
        cum[i] = cum[i - 1] + 0.5 * (a + b) * (u.grid[i] - u.grid[i - 1]);
    }
    for c in cum.iter_mut() {
        *c /= mass;
    }
    let mut q = Vec::with_capacity(m);
    let mut seg = 0usize;
    for i in 0..m {
        let s = sigma_mid(i, m);
        while seg + 1 < k - 1 && cum[seg + 1] <= s {
            seg += 1;
        }
        // invert linearly inside [cum[seg], cum[seg+1]]
        let (c0, c1) = (cum[seg], cum[seg + 1]);
        let t = if c1 > c0 { ((s - c0) / (c1 - c0)).clamp(0.0, 1.0) } else { 0.0 };
        q.push(u.grid[seg] + t * (u.grid[seg + 1] - u.grid[seg]));
    }
    let profile = QuantileProfile::new(u.dim, q)?;
    if m > 1 && !profile.is_strictly_increasing() {
        // support narrower than the quantile resolution: an atom in disguise
        return Err(Error::Atom { index: 0 });
    }
    Ok(profile)
}

/// Reconstruct a gridded density from a quantile profile.
///
/// Each mass cell is rendered as a constant-density band; bands are sampled
/// on a fine sub-grid and re-normalized so the trapezoid mass is exactly 1.
/// Coincident quantiles are rejected as atoms.
pub fn density_from_quantiles(u: &QuantileProfile) -> Result<RadialDensity> {
    let (w, dens) = u.volume_cells()?;
    let n = u.dim().nf();
    let omega = u.dim().unit_ball_volume();
    let sub = 16usize;
    let mut grid = Vec::with_capacity(u.m() * sub + 1);
    let mut values = Vec::with_capacity(u.m() * sub + 1);
    for i in 0..u.m() {
        let r_lo = (w[i] / omega).powf(1.0 / n);
        let r_hi = (w[i + 1] / omega).powf(1.0 / n);
        let start = if i == 0 { 0 } else { 1 };
        for s in start..=sub {
            grid.push(r_lo + (r_hi - r_lo) * s as f64 / sub as f64);
            values.push(dens[i]);
        }
    }
    let mut d = RadialDensity::new(*u.dim(), grid, values)?;
    let mass = d.mass();
    if mass <= 0.0 {
        return Err(Error::BadMass { mass });
    }
    for v in d.values.iter_mut() {
        *v /= mass;
    }
    Ok(d)
}

/// Squared Wasserstein distance between two profiles with equal cell count.
pub fn wasserstein2_squared(u: &QuantileProfile, w: &QuantileProfile) -> Result<f64> {
    u.dim().same(w.dim())?;
    if u.m() != w.m() {
        return Err(Error::SizeMismatch { left: u.m(), right: w.m() });
    }
    let m = u.m() as f64;
    Ok(u.quantiles()
        .iter()
        .zip(w.quantiles())
        .map(|(a, b)| (a - b) * (a - b))
        .sum::<f64>()
        / m)
}

/// W₂(u, w); symmetric, zero iff the profiles coincide.
pub fn wasserstein2(u: &QuantileProfile, w: &QuantileProfile) -> Result<f64> {
    Ok(wasserstein2_squared(u, w)?.sqrt())
}

/// The optimal transport map t_u^w = F_w⁻¹ ∘ F_u evaluated at u's quantile
/// points: cell i of u moves to cell i of w. Returned as (source, target)
/// pairs; the map is monotone because both quantile vectors are sorted.
pub fn optimal_map(u: &QuantileProfile, w: &QuantileProfile) -> Result<Vec<(f64, f64)>> {
    u.dim().same(w.dim())?;
    if u.m() != w.m() {
        return Err(Error::SizeMismatch { left: u.m(), right: w.m() });
    }
    Ok(u.quantiles().iter().copied().zip(w.quantiles().iter().copied()).collect())
}

/// Constant-speed Wasserstein geodesic: linear interpolation of quantiles.
pub fn displacement_geodesic(
    u0: &QuantileProfile,
    u1: &QuantileProfile,
    tau: f64,
) -> Result<QuantileProfile> {
    u0.dim().same(u1.dim())?;
    if u0.m() != u1.m() {
        return Err(Error::SizeMismatch { left: u0.m(), right: u1.m() });
    }
    if !(0.0..=1.0).contains(&tau) {
        return Err(Error::Domain(format!("geodesic parameter {tau} outside [0, 1]")));
    }
    let q = u0
        .quantiles()
        .iter()
        .zip(u1.quantiles())
        .map(|(a, b)| (1.0 - tau) * a + tau * b)
        .collect();
    QuantileProfile::new(*u0.dim(), q)
}
