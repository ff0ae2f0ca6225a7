//! Minimization tools over a monotone chain of variables.
//!
//! The decision vector x = (q_1, …, q_M, r) must satisfy
//!
//! ```text
//! 0 ≤ x_1 ≤ x_2 ≤ … ≤ x_{M+1},
//! ```
//!
//! a chain of linear inequalities. Three cooperating pieces live here:
//! projection onto the chain (isotonic regression by pool-adjacent-violators
//! with a zero clamp), an L-BFGS iteration kept strictly feasible by a
//! fraction-to-boundary step cap (gaps are linear in x, so the cap is
//! exact), and a damped Newton iteration for objectives with a tridiagonal
//! Hessian. Projected gradient steps on the plain objective serve as a
//! final polish, and the projected-gradient residual ‖x − P(x − ∇f)‖ is the
//! stationarity measure throughout.

/// Pool-adjacent-violators projection onto { 0 ≤ x_1 ≤ … ≤ x_k } in the
/// Euclidean norm.
pub fn project_chain(x: &mut [f64]) {
    let k = x.len();
    // blocks of (mean, count)
    let mut means: Vec<f64> = Vec::with_capacity(k);
    let mut counts: Vec<usize> = Vec::with_capacity(k);
    for i in 0..k {
        let mut m = x[i];
        let mut c = 1usize;
        while let (Some(&pm), Some(&pc)) = (means.last(), counts.last()) {
            if pm <= m {
                break;
            }
            m = (pm * pc as f64 + m * c as f64) / (pc + c) as f64;
            c += pc;
            means.pop();
            counts.pop();
        }
        means.push(m);
        counts.push(c);
    }
    let mut idx = 0;
    for (m, c) in means.iter().zip(&counts) {
        for _ in 0..*c {
            x[idx] = m.max(0.0);
            idx += 1;
        }
    }
}

/// Gap vector of the chain: g_0 = x_0 and g_i = x_i − x_{i−1}.
pub fn chain_gaps(x: &[f64], out: &mut [f64]) {
    out[0] = x[0];
    for i in 1..x.len() {
        out[i] = x[i] - x[i - 1];
    }
}

/// Largest step α so that x + α d keeps every gap at a fixed fraction of its
/// current size. Gaps are linear in x, so this is exact.
pub fn max_feasible_step(x: &[f64], d: &[f64]) -> f64 {
    let mut alpha = f64::INFINITY;
    let mut prev_x = 0.0;
    let mut prev_d = 0.0;
    for i in 0..x.len() {
        let gap = x[i] - prev_x;
        let dgap = d[i] - prev_d;
        if dgap < 0.0 {
            alpha = alpha.min(0.995 * gap / (-dgap));
        }
        prev_x = x[i];
        prev_d = d[i];
    }
    alpha
}

/// Euclidean norm of the projected-gradient step x − P(x − g): zero exactly
/// at a KKT point of the chain-constrained problem.
pub fn projected_gradient_residual(x: &[f64], grad: &[f64]) -> f64 {
    let mut trial: Vec<f64> = x.iter().zip(grad).map(|(a, g)| a - g).collect();
    project_chain(&mut trial);
    x.iter()
        .zip(&trial)
        .map(|(a, t)| (a - t) * (a - t))
        .sum::<f64>()
        .sqrt()
}

#[derive(Debug, Clone, Copy)]
pub struct SolverOptions {
    pub memory: usize,
    pub max_iters: usize,
    /// stop when the (barriered) gradient norm falls below this
    pub grad_tol: f64,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self { memory: 8, max_iters: 200, grad_tol: 1e-9 }
    }
}

#[derive(Debug, Clone, Copy, Default)]
pub struct SolverStats {
    pub iterations: usize,
    pub evaluations: usize,
    pub grad_norm: f64,
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

/// L-BFGS with Armijo backtracking, restricted to the strict interior of the
/// chain. `eval` returns the objective and writes the gradient. `h0` is an
/// optional diagonal seed for the inverse Hessian; the penalty and cell
/// curvatures differ by orders of magnitude, and seeding them directly cuts
/// the iteration count by a large factor.
pub fn lbfgs_chain<F>(
    x: &mut [f64],
    mut eval: F,
    opts: &SolverOptions,
    h0: Option<&[f64]>,
) -> SolverStats
where
    F: FnMut(&[f64], &mut [f64]) -> f64,
{
    let n = x.len();
    let mut grad = vec![0.0; n];
    let mut fx = eval(x, &mut grad);
    let mut stats = SolverStats { evaluations: 1, ..Default::default() };

    let mut s_list: Vec<Vec<f64>> = Vec::new();
    let mut y_list: Vec<Vec<f64>> = Vec::new();
    let mut rho_list: Vec<f64> = Vec::new();

    let mut d = vec![0.0; n];
    let mut x_new = vec![0.0; n];
    let mut grad_new = vec![0.0; n];

    for iter in 0..opts.max_iters {
        stats.iterations = iter;
        stats.grad_norm = norm(&grad);
        if stats.grad_norm <= opts.grad_tol {
            break;
        }

        // two-loop recursion
        for (i, g) in grad.iter().enumerate() {
            d[i] = -g;
        }
        let k = s_list.len();
        let mut alphas = vec![0.0; k];
        for j in (0..k).rev() {
            alphas[j] = rho_list[j] * dot(&s_list[j], &d);
            for i in 0..n {
                d[i] -= alphas[j] * y_list[j][i];
            }
        }
        match h0 {
            Some(diag) => {
                // H₀ = γ·diag with γ fitted to the latest curvature pair
                let mut gamma = 1.0;
                if k > 0 {
                    let j = k - 1;
                    let ydy: f64 =
                        y_list[j].iter().zip(diag).map(|(y, d)| y * y * d).sum();
                    let g = dot(&s_list[j], &y_list[j]) / ydy;
                    if g.is_finite() && g > 0.0 {
                        gamma = g;
                    }
                }
                for (di, w) in d.iter_mut().zip(diag) {
                    *di *= gamma * w;
                }
            }
            None => {
                if k > 0 {
                    let j = k - 1;
                    let scale = dot(&s_list[j], &y_list[j]) / dot(&y_list[j], &y_list[j]);
                    if scale.is_finite() && scale > 0.0 {
                        for di in d.iter_mut() {
                            *di *= scale;
                        }
                    }
                }
            }
        }
        for j in 0..k {
            let beta = rho_list[j] * dot(&y_list[j], &d);
            for i in 0..n {
                d[i] += (alphas[j] - beta) * s_list[j][i];
            }
        }

        let mut gd = dot(&grad, &d);
        if !(gd < 0.0) {
            // fall back to steepest descent
            for (i, g) in grad.iter().enumerate() {
                d[i] = -g;
            }
            gd = -stats.grad_norm * stats.grad_norm;
            s_list.clear();
            y_list.clear();
            rho_list.clear();
        }

        let cap = max_feasible_step(x, &d);
        let mut alpha = cap.min(1.0);
        if alpha <= 1e-18 {
            break;
        }
        let mut accepted = None;
        for _ in 0..50 {
            for i in 0..n {
                x_new[i] = x[i] + alpha * d[i];
            }
            let f_new = eval(&x_new, &mut grad_new);
            stats.evaluations += 1;
            if f_new.is_finite() && f_new <= fx + 1e-4 * alpha * gd {
                accepted = Some(f_new);
                break;
            }
            alpha *= 0.5;
        }
        let f_new = match accepted {
            Some(v) => v,
            None => break,
        };

        let mut s = vec![0.0; n];
        let mut y = vec![0.0; n];
        for i in 0..n {
            s[i] = x_new[i] - x[i];
            y[i] = grad_new[i] - grad[i];
        }
        let sy = dot(&s, &y);
        if sy > 1e-12 * norm(&s) * norm(&y) {
            if s_list.len() == opts.memory {
                s_list.remove(0);
                y_list.remove(0);
                rho_list.remove(0);
            }
            rho_list.push(1.0 / sy);
            s_list.push(s);
            y_list.push(y);
        }
        x.copy_from_slice(&x_new);
        grad.copy_from_slice(&grad_new);
        fx = f_new;
    }
    stats.grad_norm = norm(&grad);
    stats
}

/// Solve a tridiagonal system in place (Thomas algorithm).
pub fn solve_tridiagonal(low: &[f64], diag: &[f64], up: &[f64], rhs: &[f64]) -> Option<Vec<f64>> {
    let n = diag.len();
    let mut c = vec![0.0; n];
    let mut d = vec![0.0; n];
    let mut denom = diag[0];
    if denom.abs() < 1e-300 {
        return None;
    }
    c[0] = up[0] / denom;
    d[0] = rhs[0] / denom;
    for i in 1..n {
        denom = diag[i] - low[i] * c[i - 1];
        if denom.abs() < 1e-300 {
            return None;
        }
        c[i] = up[i] / denom;
        d[i] = (rhs[i] - low[i] * d[i - 1]) / denom;
    }
    let mut x = vec![0.0; n];
    x[n - 1] = d[n - 1];
    for i in (0..n - 1).rev() {
        x[i] = d[i] - c[i] * x[i + 1];
    }
    Some(x)
}

/// Damped Newton iteration on the chain interior for objectives with a
/// tridiagonal Hessian. `eval` returns the value and writes the gradient;
/// `hessian` fills the three diagonals. Steps are capped by the
/// fraction-to-boundary rule; when the Newton direction fails to descend the
/// system is re-solved with a boosted diagonal.
pub fn newton_chain<F, H>(
    x: &mut [f64],
    mut eval: F,
    mut hessian: H,
    opts: &SolverOptions,
) -> SolverStats
where
    F: FnMut(&[f64], &mut [f64]) -> f64,
    H: FnMut(&[f64], &mut [f64], &mut [f64], &mut [f64]),
{
    let n = x.len();
    let mut grad = vec![0.0; n];
    let mut fx = eval(x, &mut grad);
    let mut stats = SolverStats { evaluations: 1, ..Default::default() };
    let mut low = vec![0.0; n];
    let mut diag = vec![0.0; n];
    let mut up = vec![0.0; n];
    let mut x_new = vec![0.0; n];
    let mut grad_new = vec![0.0; n];
    for iter in 0..opts.max_iters {
        stats.iterations = iter;
        stats.grad_norm = projected_gradient_residual(x, &grad);
        if stats.grad_norm <= opts.grad_tol {
            return stats;
        }
        hessian(x, &mut low, &mut diag, &mut up);
        let hmax = diag.iter().fold(0.0f64, |a, b| a.max(b.abs())).max(1e-300);
        let neg_grad: Vec<f64> = grad.iter().map(|g| -g).collect();
        let mut reg = 0.0f64;
        let mut d: Option<Vec<f64>> = None;
        for _ in 0..8 {
            let mut di = diag.clone();
            for v in di.iter_mut() {
                *v += reg;
            }
            if let Some(cand) = solve_tridiagonal(&low, &di, &up, &neg_grad) {
                if dot(&grad, &cand) < 0.0 && cand.iter().all(|v| v.is_finite()) {
                    d = Some(cand);
                    break;
                }
            }
            reg = if reg == 0.0 { 1e-10 * hmax } else { reg * 100.0 };
        }
        let d = match d {
            Some(v) => v,
            None => break,
        };
        let gd = dot(&grad, &d);
        let cap = max_feasible_step(x, &d);
        let mut alpha = cap.min(1.0);
        if alpha <= 1e-18 {
            break;
        }
        let mut accepted = None;
        for _ in 0..50 {
            for i in 0..n {
                x_new[i] = x[i] + alpha * d[i];
            }
            let f_new = eval(&x_new, &mut grad_new);
            stats.evaluations += 1;
            if f_new.is_finite() && f_new <= fx + 1e-4 * alpha * gd {
                accepted = Some(f_new);
                break;
            }
            alpha *= 0.5;
        }
        match accepted {
            Some(f_new) => {
                x.copy_from_slice(&x_new);
                grad.copy_from_slice(&grad_new);
                fx = f_new;
            }
            None => break,
        }
    }
    stats.grad_norm = projected_gradient_residual(x, &grad);
    stats
}

/// Projected-gradient polish on the unbarriered objective: monotone in the
/// objective, converges to a KKT point of the chain constraint. `scale` is
/// an optional diagonal step preconditioner.
pub fn projected_polish<F>(
    x: &mut [f64],
    mut eval: F,
    tol: f64,
    max_iters: usize,
    scale: Option<&[f64]>,
) -> SolverStats
where
    F: FnMut(&[f64], &mut [f64]) -> f64,
{
    let n = x.len();
    let mut grad = vec![0.0; n];
    let mut fx = eval(x, &mut grad);
    let mut stats = SolverStats { evaluations: 1, ..Default::default() };
    let mut alpha = 1.0f64;
    let mut trial = vec![0.0; n];
    let mut grad_trial = vec![0.0; n];
    for iter in 0..max_iters {
        stats.iterations = iter;
        let resid = projected_gradient_residual(x, &grad);
        stats.grad_norm = resid;
        if resid <= tol {
            break;
        }
        let mut accepted = false;
        let mut a = alpha;
        for _ in 0..60 {
            for i in 0..n {
                let step = scale.map(|s| s[i]).unwrap_or(1.0) * grad[i];
                trial[i] = x[i] - a * step;
            }
            project_chain(&mut trial);
            let decrease: f64 = x
                .iter()
                .zip(&trial)
                .zip(&grad)
                .map(|((xi, ti), gi)| gi * (xi - ti))
                .sum();
            let f_t = eval(&trial, &mut grad_trial);
            stats.evaluations += 1;
            if f_t.is_finite() && f_t <= fx - 1e-4 * decrease.max(0.0) && f_t <= fx {
                x.copy_from_slice(&trial);
                grad.copy_from_slice(&grad_trial);
                fx = f_t;
                alpha = (a * 2.0).min(1e6);
                accepted = true;
                break;
            }
            a *= 0.25;
            if a < 1e-18 {
                break;
            }
        }
        if !accepted {
            break;
        }
    }
    stats.grad_norm = projected_gradient_residual(x, &grad);
    stats
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::SplitMix64;

    #[test]
    fn pav_projects_onto_monotone_chain() {
        let mut x = vec![3.0, 1.0, 2.0, -1.0, 5.0];
        project_chain(&mut x);
        for w in x.windows(2) {
            assert!(w[1] >= w[0]);
        }
        assert!(x[0] >= 0.0);
        // projection of a feasible point is the identity
        let mut y = vec![0.5, 1.0, 1.0, 2.0];
        let before = y.clone();
        project_chain(&mut y);
        assert_eq!(y, before);
    }

    #[test]
    fn pav_is_the_nearest_feasible_point() {
        // brute-force check on 3d grids
        let mut rng = SplitMix64::new(1);
        for _ in 0..50 {
            let x0 = [rng.range(-1.0, 2.0), rng.range(-1.0, 2.0), rng.range(-1.0, 2.0)];
            let mut proj = x0.to_vec();
            project_chain(&mut proj);
            let d_proj: f64 = x0.iter().zip(&proj).map(|(a, b)| (a - b) * (a - b)).sum();
            // scan a lattice of feasible points
            let mut best = f64::INFINITY;
            let steps = 40;
            for i in 0..=steps {
                for j in i..=steps {
                    for k in j..=steps {
                        let p = [
                            i as f64 * 2.5 / steps as f64,
                            j as f64 * 2.5 / steps as f64,
                            k as f64 * 2.5 / steps as f64,
                        ];
                        let d: f64 =
                            x0.iter().zip(&p).map(|(a, b)| (a - b) * (a - b)).sum();
                        best = best.min(d);
                    }
                }
            }
            assert!(d_proj <= best + 1e-3);
        }
    }

    #[test]
    fn lbfgs_solves_a_separable_quadratic_on_the_chain() {
        // min Σ (x_i − c_i)² with targets violating monotonicity; solution is
        // the isotonic fit. Start strictly feasible.
        let targets = [2.0, 0.5, 1.0, 3.0];
        let mut x = vec![0.1, 0.2, 0.3, 0.4];
        let mut eval = |x: &[f64], g: &mut [f64]| {
            let mut f = 0.0;
            for i in 0..4 {
                g[i] = 2.0 * (x[i] - targets[i]);
                f += (x[i] - targets[i]).powi(2);
            }
            f
        };
        let stats = projected_polish(&mut x, &mut eval, 1e-12, 500, None);
        let mut iso = targets.to_vec();
        project_chain(&mut iso);
        for (a, b) in x.iter().zip(&iso) {
            assert!((a - b).abs() < 1e-8, "{x:?} vs {iso:?} ({stats:?})");
        }
    }

    #[test]
    fn barrier_descent_respects_feasibility() {
        // min (x₀−1)² + (x₁−0.2)² + barrier; the unconstrained optimum
        // violates x₀ ≤ x₁, iterates must stay ordered throughout
        let mu = 1e-6;
        let mut x = vec![0.3, 0.6];
        let eval = |x: &[f64], g: &mut [f64]| {
            let gap0 = x[0];
            let gap1 = x[1] - x[0];
            if gap0 <= 0.0 || gap1 <= 0.0 {
                return f64::INFINITY;
            }
            let f = (x[0] - 1.0).powi(2) + (x[1] - 0.2).powi(2) - mu * (gap0.ln() + gap1.ln());
            g[0] = 2.0 * (x[0] - 1.0) - mu / gap0 + mu / gap1;
            g[1] = 2.0 * (x[1] - 0.2) - mu / gap1;
            f
        };
        let stats = lbfgs_chain(&mut x, eval, &SolverOptions::default(), None);
        assert!(x[0] > 0.0 && x[1] >= x[0], "{x:?}");
        // KKT point of the constrained problem is x₀ = x₁ = 0.6
        assert!((x[0] - 0.6).abs() < 1e-3 && (x[1] - 0.6).abs() < 1e-3, "{x:?} {stats:?}");
    }
}
