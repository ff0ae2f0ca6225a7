//! Variational-structure verification.
//!
//! The local slope of the energy at a state (r, u) has the closed form
//!
//! ```text
//! |∂E|²(r, u) = |(n−1)/r − ĥf(u(r))|² · W(r)  +  κ ‖∇ĥf(u)/u‖²_{L²(u)},
//! ```
//!
//! with boundary weight W(r) = P(r) for the surface-tension metric and
//! W(r) = 1 for the permeability metric; the interior term is identical in
//! both. Along the flow the energy dissipates according to
//!
//! ```text
//! dE/dt = −½ |∂E|² − ½ |γ'|²,
//! ```
//!
//! and for a λ-convex energy each trajectory satisfies the evolution
//! variational inequality against any finite-energy probe state. These
//! identities are evaluated here with finite differences along trajectories
//! and reported as residuals; they are self-consistency checks of the
//! discretization, tightening under (τ, 1/M) refinement.

use crate::energy::{energy_floor, total_energy, EntropyIntegrand};
use crate::error::{Error, Result};
use crate::geometry::{iota, BallRadius, MetricVariant};
use crate::jko::Trajectory;
use crate::state::{coupled_geodesic, rho_dist_squared, MetricConfig, RadialState};

/// Local-slope decomposition: slope² = boundary_term + interior_term.
#[derive(Debug, Clone, Copy)]
pub struct SlopeReport {
    pub boundary_term: f64,
    pub interior_term: f64,
}

impl SlopeReport {
    pub fn slope(&self) -> f64 {
        (self.boundary_term + self.interior_term).sqrt()
    }
}

/// Boundary trace of the cell density: linear extrapolation to ρ = r from
/// the last two cell centers.
fn boundary_trace(s: &RadialState) -> Result<f64> {
    let dens = s.profile().cell_densities()?;
    let q = s.profile().quantiles();
    let m = dens.len();
    if m == 1 {
        return Ok(dens[0]);
    }
    let (d0, d1) = (dens[m - 2], dens[m - 1]);
    let (q0, q1) = (q[m - 2], q[m - 1]);
    let r = s.radius().value();
    Ok((d1 + (d1 - d0) * (r - q1) / (q1 - q0)).max(0.0))
}

/// |∂E| at a state, split into boundary and interior terms.
pub fn local_slope(
    s: &RadialState,
    f: &EntropyIntegrand,
    cfg: &MetricConfig,
) -> Result<SlopeReport> {
    s.dim().same(&cfg.dim)?;
    let r = s.radius().value();
    if r <= 0.0 {
        return Err(Error::Domain("slope needs r > 0".into()));
    }
    let n = cfg.dim.nf();
    let u_r = boundary_trace(s)?;
    let bracket = (n - 1.0) / r - f.f_hat(u_r);
    let weight = match cfg.variant {
        MetricVariant::SurfaceTension => cfg.dim.perimeter(r),
        MetricVariant::Permeability => 1.0,
    };
    let boundary_term = bracket * bracket * weight;

    // κ ∫ |∂ρ ĥf(u) / u|² dσ in mass coordinates
    let dens = s.profile().cell_densities()?;
    let q = s.profile().quantiles();
    let m = dens.len();
    let h = 1.0 / m as f64;
    let mut interior = 0.0;
    if m >= 2 {
        for i in 0..m {
            let (lo, hi) = if i == 0 {
                (0, 1)
            } else if i == m - 1 {
                (m - 2, m - 1)
            } else {
                (i - 1, i + 1)
            };
            let dr = q[hi] - q[lo];
            if dr <= 0.0 {
                return Err(Error::Atom { index: i });
            }
            let grad_hf = (f.f_hat(dens[hi]) - f.f_hat(dens[lo])) / dr;
            interior += h * (grad_hf / dens[i]).powi(2);
        }
    }
    Ok(SlopeReport { boundary_term, interior_term: cfg.kappa * interior })
}

fn interior_index(traj: &Trajectory, t: f64) -> Result<usize> {
    if traj.len() < 3 {
        return Err(Error::TimeOutOfRange { t });
    }
    Ok(traj.index_at(t)?.clamp(1, traj.len() - 2))
}

/// Chain-rule energy rate at a trajectory sample:
///
/// ```text
/// dE/dt = ((n−1)/r − ĥf(u(r))) P(r) r' + ∫ ∂ρ ĥf(u) · v · P dρ,
/// ```
///
/// with the radius and quantile velocities taken from central differences
/// (in quantile coordinates the Lagrangian velocity is the quantile time
/// derivative). Independent of the metric variant.
pub fn energy_rate(
    traj: &Trajectory,
    t: f64,
    f: &EntropyIntegrand,
    cfg: &MetricConfig,
) -> Result<f64> {
    let k = interior_index(traj, t)?;
    let s = &traj.states[k];
    let before = &traj.states[k - 1];
    let after = &traj.states[k + 1];
    let dt = traj.times[k + 1] - traj.times[k - 1];
    let n = cfg.dim.nf();
    let r = s.radius().value();
    let r_dot = (after.radius().value() - before.radius().value()) / dt;
    let u_r = boundary_trace(s)?;
    let mut rate = ((n - 1.0) / r - f.f_hat(u_r)) * cfg.dim.perimeter(r) * r_dot;

    let dens = s.profile().cell_densities()?;
    let q = s.profile().quantiles();
    let qb = before.profile().quantiles();
    let qa = after.profile().quantiles();
    let m = dens.len();
    if m >= 2 {
        let h = 1.0 / m as f64;
        for i in 0..m {
            let (lo, hi) = if i == 0 {
                (0, 1)
            } else if i == m - 1 {
                (m - 2, m - 1)
            } else {
                (i - 1, i + 1)
            };
            let dr = q[hi] - q[lo];
            let grad_hf = (f.f_hat(dens[hi]) - f.f_hat(dens[lo])) / dr;
            let v = (qa[i] - qb[i]) / dt;
            // ∫ ∂ρĥf · v · P dρ = ∫₀¹ ∂ρĥf · v / u dσ
            rate += h * grad_hf * v / dens[i];
        }
    }
    Ok(rate)
}

/// One dissipation-identity sample along a trajectory.
#[derive(Debug, Clone, Copy)]
pub struct DissipationSample {
    /// central finite difference of the recorded energies
    pub rate_fd: f64,
    pub slope: f64,
    pub speed: f64,
    /// rate_fd + ½ slope² + ½ speed²
    pub residual: f64,
    /// |residual| / |rate_fd|
    pub relative: f64,
}

/// Residual of dE/dt = −½|∂E|² − ½|γ'|² at the sample nearest t.
pub fn dissipation_residual(
    traj: &Trajectory,
    t: f64,
    f: &EntropyIntegrand,
    cfg: &MetricConfig,
) -> Result<DissipationSample> {
    let k = interior_index(traj, t)?;
    let dt = traj.times[k + 1] - traj.times[k - 1];
    let rate_fd = (traj.energy(k + 1) - traj.energy(k - 1)) / dt;
    let slope = local_slope(&traj.states[k], f, cfg)?.slope();
    let speed = rho_dist_squared(&traj.states[k - 1], &traj.states[k + 1], cfg)?.sqrt() / dt;
    let residual = rate_fd + 0.5 * slope * slope + 0.5 * speed * speed;
    let relative = residual.abs() / rate_fd.abs().max(1e-300);
    Ok(DissipationSample { rate_fd, slope, speed, residual, relative })
}

/// Left-hand side of the evolution variational inequality at time t against
/// a probe state:
///
/// ```text
/// ½ d/dt ϱ²(γ(t), probe) + (λ/2) ϱ²(γ(t), probe) + E(γ(t)) − E(probe) ≤ 0.
/// ```
pub fn evi_residual(
    traj: &Trajectory,
    t: f64,
    probe: &RadialState,
    lambda: f64,
    f: &EntropyIntegrand,
    cfg: &MetricConfig,
) -> Result<f64> {
    let k = interior_index(traj, t)?;
    let probe_energy = total_energy(probe, f)?.total();
    let dt = traj.times[k + 1] - traj.times[k - 1];
    let d_before = rho_dist_squared(&traj.states[k - 1], probe, cfg)?;
    let d_here = rho_dist_squared(&traj.states[k], probe, cfg)?;
    let d_after = rho_dist_squared(&traj.states[k + 1], probe, cfg)?;
    Ok(0.5 * (d_after - d_before) / dt + 0.5 * lambda * d_here + traj.energy(k) - probe_energy)
}

/// Worst signed three-point convexity defects along the coupled geodesic
/// from a to b: nonnegative defects certify the inequality on the samples.
#[derive(Debug, Clone, Copy)]
pub struct ConvexityReport {
    /// ½ ϱ²(w, ·) against modulus 1
    pub rho_defect: f64,
    /// E against the supplied modulus
    pub energy_defect: f64,
    /// Φ(w, ·; h) = E + ϱ²(w, ·)/(2h) against modulus 1/h + λ
    pub phi_defect: f64,
}

/// Three-point λ-convexity probe of ½ϱ²(w,·), E, and the penalized energy
/// along the geodesic between a and b.
pub fn convexity_probe(
    a: &RadialState,
    b: &RadialState,
    w: &RadialState,
    tau_samples: &[f64],
    h: f64,
    lambda_energy: f64,
    f: &EntropyIntegrand,
    cfg: &MetricConfig,
) -> Result<ConvexityReport> {
    if !(h > 0.0) || (lambda_energy < 0.0 && h >= 1.0 / (-lambda_energy)) {
        return Err(Error::Domain(format!("penalty step {h} must lie below 1/λ⁻")));
    }
    let dd = rho_dist_squared(a, b, cfg)?;
    let half_rho = |s: &RadialState| -> Result<f64> { Ok(0.5 * rho_dist_squared(w, s, cfg)?) };
    let energy = |s: &RadialState| -> Result<f64> { Ok(total_energy(s, f)?.total()) };

    let mut report = ConvexityReport {
        rho_defect: f64::INFINITY,
        energy_defect: f64::INFINITY,
        phi_defect: f64::INFINITY,
    };
    let (ra, rb) = (half_rho(a)?, half_rho(b)?);
    let (ea, eb) = (energy(a)?, energy(b)?);
    for &tau in tau_samples {
        let g = coupled_geodesic(a, b, tau, cfg)?;
        let (rg, eg) = (half_rho(&g)?, energy(&g)?);
        let chord = |fa: f64, fb: f64, lambda: f64| {
            (1.0 - tau) * fa + tau * fb - 0.5 * lambda * tau * (1.0 - tau) * dd
        };
        report.rho_defect = report.rho_defect.min(chord(ra, rb, 1.0) - rg);
        report.energy_defect = report.energy_defect.min(chord(ea, eb, lambda_energy) - eg);
        let phi = |e: f64, r2: f64| e + r2 / h;
        report.phi_defect = report
            .phi_defect
            .min(chord(phi(ea, ra), phi(eb, rb), 1.0 / h + lambda_energy) - phi(eg, rg));
    }
    Ok(report)
}

/// Convexity modulus of the perimeter on the sublevel {E_o ≤ level}: the
/// infimum of the second derivative of P expressed in the isometry
/// coordinate s = ι(r), taken over the radius range certified by the energy
/// floor. Zero for n = 3 (surface tension), negative for n = 2 and for the
/// permeability variant in every dimension; the internal energy contributes
/// no negative part when the integrand satisfies the McCann condition.
pub fn sublevel_lambda(
    level: f64,
    f: &EntropyIntegrand,
    cfg: &MetricConfig,
) -> Result<f64> {
    let dim = &cfg.dim;
    let rstar = crate::energy::equilibrium_radius(f, dim)?;
    let e_min = energy_floor(rstar, f, dim)?;
    if level <= e_min {
        return Err(Error::Domain(format!(
            "sublevel {level} lies below the energy minimum {e_min}"
        )));
    }
    let fo = |r: f64| energy_floor(BallRadius::new(r).unwrap(), f, dim).unwrap();
    // bracketed bisection on both sides of r*
    let mut lo = rstar.value();
    while fo(lo) < level {
        lo *= 0.5;
        if lo < 1e-300 {
            break;
        }
    }
    let mut a = lo;
    let mut b = rstar.value();
    for _ in 0..200 {
        let mid = 0.5 * (a + b);
        if fo(mid) > level {
            a = mid;
        } else {
            b = mid;
        }
    }
    let r_lo = 0.5 * (a + b);
    let mut hi = rstar.value();
    while fo(hi) < level {
        hi *= 2.0;
        if hi > 1e300 {
            break;
        }
    }
    let mut a = rstar.value();
    let mut b = hi;
    for _ in 0..200 {
        let mid = 0.5 * (a + b);
        if fo(mid) > level {
            b = mid;
        } else {
            a = mid;
        }
    }
    let r_hi = 0.5 * (a + b);

    let n = dim.nf();
    let omega = dim.unit_ball_volume();
    // P(r) = θ s^e in the coordinate s = ι(r)
    let (theta, e) = match cfg.variant {
        MetricVariant::SurfaceTension => {
            let e = (2.0 * n - 2.0) / (n + 1.0);
            let theta = n * omega * ((n + 1.0) / (2.0 * (n * omega).sqrt())).powf(e);
            (theta, e)
        }
        MetricVariant::Permeability => {
            let e = (n - 1.0) / n;
            (n * omega.powf(1.0 / n), e)
        }
    };
    let c = theta * e * (e - 1.0);
    let second = |r: f64| c * iota(BallRadius::new(r).unwrap(), dim, cfg.variant).powf(e - 2.0);
    Ok(second(r_lo).min(second(r_hi)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::energy::EntropyIntegrand;
    use crate::geometry::Dimension;
    use crate::jko::{discrete_energy_minimizer, run_flow, JkoConfig};
    use crate::rng::SplitMix64;
    use std::f64::consts::PI;

    fn d2() -> Dimension {
        Dimension::new(2).unwrap()
    }

    fn d3() -> Dimension {
        Dimension::new(3).unwrap()
    }

    fn cfg(variant: MetricVariant) -> MetricConfig {
        MetricConfig::new(d2(), 1.0, variant).unwrap()
    }

    fn zlogz() -> EntropyIntegrand {
        EntropyIntegrand::ZLogZ
    }

    #[test]
    fn slope_of_uniform_disk_state() {
        let s = RadialState::uniform(d2(), 1.0, 100).unwrap();
        let f = zlogz();
        let st = local_slope(&s, &f, &cfg(MetricVariant::SurfaceTension)).unwrap();
        // uniform reconstructed density: the interior term vanishes
        // identically up to floating-point dust in the cell volumes
        assert!(st.interior_term < 1e-18, "interior {}", st.interior_term);
        let expect = (1.0 - 1.0 / PI).abs() * (2.0 * PI).sqrt();
        assert!((st.slope() - expect).abs() < 1e-10, "slope {}", st.slope());
        let perm = local_slope(&s, &f, &cfg(MetricVariant::Permeability)).unwrap();
        assert!((perm.slope() - (1.0 - 1.0 / PI).abs()).abs() < 1e-10);
        // identical interior term, boundary weight ratio P(r) vs 1
        assert!((st.interior_term - perm.interior_term).abs() <= 1e-18);
        assert!((st.boundary_term / perm.boundary_term - 2.0 * PI).abs() < 1e-9);
    }

    #[test]
    fn slope_vanishes_at_the_discrete_equilibrium() {
        let f = zlogz();
        let c = cfg(MetricVariant::SurfaceTension);
        let eq = discrete_energy_minimizer(&f, &c, 128).unwrap();
        let s = local_slope(&eq, &f, &c).unwrap();
        assert!(s.slope() < 1e-4, "slope {}", s.slope());
    }

    #[test]
    fn energy_rate_is_negative_along_the_flow_and_matches_fd() {
        let f = zlogz();
        let c = cfg(MetricVariant::SurfaceTension);
        let initial = RadialState::uniform(d2(), 1.0, 64).unwrap();
        let jcfg = JkoConfig { m: 64, tau: 2e-3, ..JkoConfig::default() };
        let traj = run_flow(&initial, 0.2, &f, &c, &jcfg).unwrap();
        assert!(traj.aborted.is_none());
        for t in [0.01, 0.05, 0.1, 0.15] {
            let rate = energy_rate(&traj, t, &f, &c).unwrap();
            assert!(rate < 0.0, "rate {rate} at {t}");
            let k = traj.index_at(t).unwrap();
            let fd = (traj.energy(k + 1) - traj.energy(k - 1))
                / (traj.times[k + 1] - traj.times[k - 1]);
            assert!((rate - fd).abs() <= 0.15 * fd.abs(), "chain {rate} fd {fd}");
        }
        // stationary trajectory: zero rate
        let eq = discrete_energy_minimizer(&f, &c, 32).unwrap();
        let jc = JkoConfig { m: 32, tau: 5e-3, ..JkoConfig::default() };
        let flat = run_flow(&eq, 0.05, &f, &c, &jc).unwrap();
        let rate = energy_rate(&flat, 0.02, &f, &c).unwrap();
        assert!(rate.abs() < 1e-8, "rate {rate}");
        let ds = dissipation_residual(&flat, 0.02, &f, &c).unwrap();
        assert!(ds.residual.abs() < 1e-7, "{ds:?}");
    }

    #[test]
    fn dissipation_identity_holds_under_the_permeability_metric() {
        // speed carries the P-weighted radius metric and the slope the unit
        // boundary weight; with P(r) r' = −bracket the squares agree
        let f = zlogz();
        let c = cfg(MetricVariant::Permeability);
        let initial = RadialState::uniform(d2(), 1.0, 100).unwrap();
        let jcfg = JkoConfig { m: 100, tau: 1e-3, ..JkoConfig::default() };
        let traj = run_flow(&initial, 0.4, &f, &c, &jcfg).unwrap();
        assert!(traj.aborted.is_none());
        let mut worst: f64 = 0.0;
        let mut t = 0.01;
        while t <= 0.35 {
            worst = worst.max(dissipation_residual(&traj, t, &f, &c).unwrap().relative);
            t += 5e-3;
        }
        assert!(worst <= 0.05, "relative dissipation residual {worst}");
    }

    #[test]
    fn evi_negative_control_has_power() {
        let f = zlogz();
        let c = MetricConfig::new(d3(), 1.0, MetricVariant::SurfaceTension).unwrap();
        let initial = RadialState::uniform(d3(), 0.8, 48).unwrap();
        let jcfg = JkoConfig { m: 48, tau: 2e-3, ..JkoConfig::default() };
        let traj = run_flow(&initial, 0.3, &f, &c, &jcfg).unwrap();
        let probe = discrete_energy_minimizer(&f, &c, 48).unwrap();
        // λ = 0 holds (E is convex for n = 3)...
        let mut worst = f64::NEG_INFINITY;
        for t in [0.05, 0.1, 0.2, 0.25] {
            worst = worst.max(evi_residual(&traj, t, &probe, 0.0, &f, &c).unwrap());
        }
        assert!(worst <= 1e-2, "evi residual {worst}");
        // probing a trajectory point against itself reduces to ½ d/dt ϱ²,
        // nonpositive up to discretization slack along a descent
        let k = traj.index_at(0.1).unwrap();
        let self_probe = traj.states[k].clone();
        let own = evi_residual(&traj, 0.1, &self_probe, 0.0, &f, &c).unwrap();
        assert!(own <= 1e-6, "self-probe EVI {own}");
        // ...while λ = +10 must fail somewhere
        let mut violated = false;
        for t in [0.05, 0.1, 0.2, 0.25] {
            if evi_residual(&traj, t, &probe, 10.0, &f, &c).unwrap() > 0.0 {
                violated = true;
            }
        }
        assert!(violated, "λ = 10 should break the inequality");
    }

    #[test]
    fn convexity_probe_on_coincident_endpoints_is_exact() {
        let f = zlogz();
        let c = cfg(MetricVariant::SurfaceTension);
        let mut rng = SplitMix64::new(3);
        let a = crate::state::tests::random_admissible(&mut rng, d2(), 16);
        let w = crate::state::tests::random_admissible(&mut rng, d2(), 16);
        let rep = convexity_probe(&a, &a, &w, &[0.25, 0.5, 0.75], 0.1, 0.0, &f, &c).unwrap();
        assert!(rep.rho_defect.abs() < 1e-12);
        assert!(rep.energy_defect.abs() < 1e-12);
        assert!(rep.phi_defect.abs() < 1e-12);
    }

    #[test]
    fn sublevel_modulus_signs() {
        let f = zlogz();
        // n = 2, surface tension: strictly negative on any sublevel
        let c2 = cfg(MetricVariant::SurfaceTension);
        let lam2 = sublevel_lambda(8.0, &f, &c2).unwrap();
        assert!(lam2 < 0.0, "{lam2}");
        // n = 3, surface tension: the pullback is linear, modulus 0
        let c3 = MetricConfig::new(d3(), 1.0, MetricVariant::SurfaceTension).unwrap();
        let lam3 = sublevel_lambda(12.0, &f, &c3).unwrap();
        assert!(lam3.abs() < 1e-12, "{lam3}");
        // permeability: negative in every dimension
        let cp = MetricConfig::new(d3(), 1.0, MetricVariant::Permeability).unwrap();
        let lamp = sublevel_lambda(12.0, &f, &cp).unwrap();
        assert!(lamp < 0.0, "{lamp}");
        // level below the minimum is rejected
        assert!(sublevel_lambda(0.0, &f, &c2).is_err());
    }

    #[test]
    fn residuals_tighten_under_joint_refinement() {
        // dissipation and EVI residuals over three (τ, 1/M) levels
        let f = zlogz();
        let c = cfg(MetricVariant::SurfaceTension);
        let probe = discrete_energy_minimizer(&f, &c, 64).unwrap();
        let mut dissip = Vec::new();
        let mut evi_worst = Vec::new();
        for (m, tau) in [(50usize, 2e-3), (100, 1e-3), (200, 5e-4)] {
            let initial = RadialState::uniform(d2(), 1.0, m).unwrap();
            let jcfg = JkoConfig { m, tau, ..JkoConfig::default() };
            let traj = run_flow(&initial, 0.35, &f, &c, &jcfg).unwrap();
            let probe_m = RadialState::new(
                probe.radius(),
                probe.profile().resample(m).unwrap(),
            )
            .unwrap();
            let mut worst_d: f64 = 0.0;
            let mut worst_e = f64::NEG_INFINITY;
            let mut t = 0.01;
            while t <= 0.3 + 1e-12 {
                worst_d = worst_d.max(dissipation_residual(&traj, t, &f, &c).unwrap().residual.abs());
                worst_e = worst_e.max(evi_residual(&traj, t, &probe_m, 0.0, &f, &c).unwrap());
                t += 4e-3;
            }
            dissip.push(worst_d);
            evi_worst.push(worst_e);
        }
        assert!(
            dissip[0] > dissip[1] && dissip[1] > dissip[2],
            "dissipation residuals not monotone: {dissip:?}"
        );
        // the EVI holds at every level; any violation must shrink
        for w in evi_worst.windows(2) {
            assert!(w[1] <= w[0].max(0.0) + 1e-12, "EVI trend broken: {evi_worst:?}");
        }
        assert!(evi_worst[2] <= 1e-3, "EVI violated at the finest level: {evi_worst:?}");
    }

    #[test]
    fn chain_rule_rate_converges_to_finite_differences() {
        let f = zlogz();
        let c = cfg(MetricVariant::SurfaceTension);
        let gap = |m: usize, tau: f64| {
            let initial = RadialState::uniform(d2(), 1.0, m).unwrap();
            let jcfg = JkoConfig { m, tau, ..JkoConfig::default() };
            let traj = run_flow(&initial, 0.2, &f, &c, &jcfg).unwrap();
            let mut worst: f64 = 0.0;
            for t in [0.05, 0.1, 0.15] {
                let k = traj.index_at(t).unwrap();
                let fd = (traj.energy(k + 1) - traj.energy(k - 1))
                    / (traj.times[k + 1] - traj.times[k - 1]);
                let chain = energy_rate(&traj, t, &f, &c).unwrap();
                worst = worst.max((chain - fd).abs());
            }
            worst
        };
        let coarse = gap(50, 2e-3);
        let fine = gap(200, 5e-4);
        assert!(fine < coarse, "chain-rule gap did not shrink: {coarse} vs {fine}");
    }

    #[test]
    fn energy_is_lambda_convex_on_the_sublevel_in_2d() {
        // empirical worst modulus along random geodesics must not undercut
        // the computed sublevel bound
        let f = zlogz();
        let c = cfg(MetricVariant::SurfaceTension);
        let level = 10.0;
        let lam = sublevel_lambda(level, &f, &c).unwrap();
        // the sublevel reaches tiny radii where the metric degenerates, so
        // the certified modulus is large and negative and h must stay below
        // 1/λ⁻
        let h = (0.5 / lam.abs()).min(0.05);
        let mut rng = SplitMix64::new(11);
        let mut tried = 0;
        while tried < 60 {
            let a = crate::state::tests::random_admissible(&mut rng, d2(), 16);
            let b = crate::state::tests::random_admissible(&mut rng, d2(), 16);
            let w = crate::state::tests::random_admissible(&mut rng, d2(), 16);
            let ok = |s: &RadialState| total_energy(s, &f).map(|e| e.total() <= level) == Ok(true);
            if !(ok(&a) && ok(&b)) {
                continue;
            }
            tried += 1;
            let rep =
                convexity_probe(&a, &b, &w, &[0.25, 0.5, 0.75], h, lam, &f, &c).unwrap();
            assert!(rep.energy_defect >= -1e-8, "defect {} at λ={lam}", rep.energy_defect);
            assert!(rep.rho_defect >= -1e-8);
            assert!(rep.phi_defect >= -1e-8);
        }
    }
}
