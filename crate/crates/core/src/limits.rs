//! The scaled-limit machinery: the modified action through its energy
//! representation, the conditional action and conditional Wasserstein
//! metric, epsilon sweeps with extrapolation, liminf margin checks, and
//! transport-measure extraction from sweep minimizers.

use crate::error::{Error, Result};
use crate::lagrangian::{self, CostModel};
use crate::measure::{AtomicMeasure, SignedMeasure};
use crate::solver;
use crate::space::GroundSpace;
use rayon::prelude::*;
use serde::Serialize;

/// Huber smoothing width for the |xi|^q branch when q < 2.
pub const HUBER_WIDTH: f64 = 1e-6;

/// Ascent controls for the conditional action.
#[derive(Debug, Clone, Copy)]
pub struct AscentParams {
    pub t: f64,
    pub max_iter: usize,
    pub grad_tol: f64,
}

impl Default for AscentParams {
    fn default() -> Self {
        Self {
            t: 1.0,
            max_iter: 200_000,
            grad_tol: 1e-7,
        }
    }
}

/// Result of the concave ascent for the conditional action.
///
/// `value` is the unsmoothed objective at `phi`, so even without convergence
/// it is a certified lower bound for the supremum.
#[derive(Debug, Clone, Serialize)]
pub struct ConditionalSolution {
    pub phi: Vec<f64>,
    pub value: f64,
    pub converged: bool,
    pub iterations: usize,
    /// max over grid points of h(x, dphi) at the returned potential.
    pub h_max: f64,
}

/// Convergence table of a scaled sweep. The extrapolated limit is the
/// two-point Richardson value from the last two entries assuming a first
/// order rate in 1/n; `observed_rate` is estimated from the log-ratio of the
/// last successive gaps (meaningful for geometric n lists) so the assumption
/// can be audited.
#[derive(Debug, Clone, Serialize)]
pub struct SweepReport {
    pub n_values: Vec<u32>,
    pub scaled_values: Vec<f64>,
    pub extrapolated_limit: f64,
    pub observed_rate: f64,
    pub mu_trace: Vec<AtomicMeasure>,
}

/// One row of the liminf margin table.
#[derive(Debug, Clone, Serialize)]
pub struct LiminfRow {
    pub n: u32,
    pub f_n: f64,
    pub lower_bound: f64,
    pub margin: f64,
    /// Documented first-order allowance T (1 + max_x h(x, dphi)) / (2 n) for
    /// the time-discretized Hopf-Lax step behind F_n.
    pub slack: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct SpotCheck {
    pub candidate_values: Vec<f64>,
    pub min_over_candidates: f64,
    pub unconditional: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct TransportMeasureResult {
    pub mu: AtomicMeasure,
    /// Total-variation distance between the minimizers at the two largest n.
    pub tv_diagnostic: f64,
}

/// Modified action via its energy representation: max over E in the grid
/// (golden-refined between neighbours) of transport(lambda; D_E) - E T.
/// The objective is concave in E, so the grid bracket is global.
pub fn modified_action_via_energy(
    space: &GroundSpace,
    model: &CostModel,
    lambda: &SignedMeasure,
    t: f64,
    e_grid: &[f64],
    t_grid: &[f64],
) -> Result<f64> {
    if e_grid.is_empty() {
        return Err(Error::InvalidInput("empty energy grid".into()));
    }
    if !(t > 0.0) {
        return Err(Error::InvalidInput(format!("need T > 0, got {t}")));
    }
    let mut es: Vec<f64> = e_grid.to_vec();
    es.sort_by(|a, b| a.partial_cmp(b).unwrap());

    let value_at = |e: f64| -> Result<f64> {
        let de = lagrangian::d_e(space, model, e, t_grid)?;
        Ok(lagrangian::d_e_transport(lambda, &de)? - e * t)
    };

    let mut best = f64::NEG_INFINITY;
    let mut best_idx = 0;
    for (k, &e) in es.iter().enumerate() {
        let v = value_at(e)?;
        if v > best {
            best = v;
            best_idx = k;
        }
    }
    // golden-section on the bracketing interval of the concave objective
    let lo = es[best_idx.saturating_sub(1)];
    let hi = es[(best_idx + 1).min(es.len() - 1)];
    if hi > lo {
        const INV_PHI: f64 = 0.618_033_988_749_894_9;
        let (mut a, mut b) = (lo, hi);
        let mut c = b - INV_PHI * (b - a);
        let mut d = a + INV_PHI * (b - a);
        let mut fc = value_at(c)?;
        let mut fd = value_at(d)?;
        for _ in 0..40 {
            if fc > fd {
                b = d;
                d = c;
                fd = fc;
                c = b - INV_PHI * (b - a);
                fc = value_at(c)?;
            } else {
                a = c;
                c = d;
                fc = fd;
                d = a + INV_PHI * (b - a);
                fd = value_at(d)?;
            }
            if b - a < 1e-9 * (1.0 + b.abs()) {
                break;
            }
            best = best.max(fc.max(fd));
        }
        best = best.max(fc.max(fd));
    }
    Ok(best)
}

struct ConditionalObjective<'a> {
    space: &'a GroundSpace,
    model: &'a CostModel,
    net: Vec<f64>,
    mu: &'a [f64],
    t: f64,
    h: f64,
}

impl ConditionalObjective<'_> {
    /// Per-edge weights: on the interval the last node reuses the backward
    /// difference, so its Hamiltonian weight folds onto the final edge.
    fn objective(&self, phi: &[f64], smoothed: bool) -> f64 {
        let grad = self.space.forward_gradient(phi).expect("grid space");
        let linear: f64 = self.net.iter().zip(phi).map(|(l, p)| l * p).sum();
        let penalty: f64 = grad
            .iter()
            .enumerate()
            .map(|(i, &g)| {
                let h = if smoothed {
                    self.model.hamiltonian_smoothed(i, g, HUBER_WIDTH)
                } else {
                    self.model.hamiltonian(i, g)
                };
                self.mu[i] * h
            })
            .sum();
        linear - self.t * penalty
    }

    fn gradient(&self, phi: &[f64], out: &mut [f64]) {
        let m = phi.len();
        let grad = self.space.forward_gradient(phi).expect("grid space");
        // w_i = mu_i h'(xi_i); map node weights onto edges
        let w: Vec<f64> = grad
            .iter()
            .enumerate()
            .map(|(i, &g)| self.mu[i] * self.model.hamiltonian_smoothed_grad(i, g, HUBER_WIDTH))
            .collect();
        let c = self.t / self.h;
        match self.space.kind() {
            crate::space::SpaceKind::Torus1d => {
                for k in 0..m {
                    let prev = (k + m - 1) % m;
                    out[k] = self.net[k] - c * (w[prev] - w[k]);
                }
            }
            crate::space::SpaceKind::Interval => {
                // edge weights: W_e = w_e, plus the last node's fold-back
                let mut we: Vec<f64> = w[..m - 1].to_vec();
                we[m - 2] += w[m - 1];
                out[0] = self.net[0] + c * we[0];
                for k in 1..m - 1 {
                    out[k] = self.net[k] - c * (we[k - 1] - we[k]);
                }
                out[m - 1] = self.net[m - 1] - c * we[m - 2];
            }
            crate::space::SpaceKind::General => unreachable!(),
        }
    }
}

/// Maximize the concave conditional objective
/// sum phi dlambda - T sum h(x, dphi) dmu over potentials with phi[0] = 0,
/// by momentum-accelerated gradient ascent with Armijo backtracking and
/// restart on non-ascent. Non-convergence is flagged and the value at the
/// final iterate returned (a certified lower bound).
pub fn conditional_action(
    space: &GroundSpace,
    model: &CostModel,
    lambda: &SignedMeasure,
    mu: &AtomicMeasure,
    params: AscentParams,
) -> Result<ConditionalSolution> {
    let m = space.len();
    if lambda.len() != m || mu.len() != m {
        return Err(Error::InvalidInput(
            "measures do not match the space".into(),
        ));
    }
    if !(params.t > 0.0) {
        return Err(Error::InvalidInput(format!("need T > 0, got {}", params.t)));
    }
    if (mu.total_mass() - 1.0).abs() > 1e-9 {
        return Err(Error::InvalidInput(format!(
            "conditioning measure must be a probability measure, mass = {}",
            mu.total_mass()
        )));
    }
    let obj = ConditionalObjective {
        space,
        model,
        net: lambda.net(),
        mu: mu.weights(),
        t: params.t,
        h: space.grid_step()?,
    };

    let gauge = |phi: &mut [f64]| {
        let base = phi[0];
        for v in phi.iter_mut() {
            *v -= base;
        }
    };

    let mut phi = vec![0.0; m];
    let mut phi_prev = phi.clone();
    let mut value = obj.objective(&phi, true);
    let mut g = vec![0.0; m];
    let mut gy = vec![0.0; m];
    let mut step: f64 = 1.0;
    let mut momentum_age = 0usize;
    let mut converged = false;
    let mut iterations = 0;

    while iterations < params.max_iter {
        iterations += 1;
        obj.gradient(&phi, &mut g);
        let gnorm = g.iter().fold(0.0f64, |a, &v| a.max(v.abs()));
        if gnorm <= params.grad_tol {
            converged = true;
            break;
        }
        let beta = momentum_age as f64 / (momentum_age as f64 + 3.0);
        let y: Vec<f64> = phi
            .iter()
            .zip(&phi_prev)
            .map(|(p, q)| p + beta * (p - q))
            .collect();
        obj.gradient(&y, &mut gy);
        let gy_sq: f64 = gy.iter().map(|v| v * v).sum();
        let y_val = obj.objective(&y, true);

        step = (step * 2.0).min(1e12);
        let mut cand;
        let mut cand_val;
        loop {
            cand = y
                .iter()
                .zip(&gy)
                .map(|(p, d)| p + step * d)
                .collect::<Vec<f64>>();
            gauge(&mut cand);
            cand_val = obj.objective(&cand, true);
            if cand_val.is_finite() && cand_val >= y_val + 1e-4 * step * gy_sq {
                break;
            }
            step *= 0.5;
            if step < 1e-18 {
                break;
            }
        }
        if cand_val.is_finite() && cand_val >= value {
            phi_prev = std::mem::replace(&mut phi, cand);
            value = cand_val;
            momentum_age += 1;
        } else {
            // restart: plain ascent step from phi
            momentum_age = 0;
            let g_sq: f64 = g.iter().map(|v| v * v).sum();
            let mut s = step.max(1e-12) * 2.0;
            loop {
                cand = phi
                    .iter()
                    .zip(&g)
                    .map(|(p, d)| p + s * d)
                    .collect::<Vec<f64>>();
                gauge(&mut cand);
                cand_val = obj.objective(&cand, true);
                if cand_val.is_finite() && cand_val >= value + 1e-4 * s * g_sq {
                    break;
                }
                s *= 0.5;
                if s < 1e-18 {
                    break;
                }
            }
            if !cand_val.is_finite() || cand_val < value {
                // flat to machine precision
                converged = false;
                break;
            }
            phi_prev = std::mem::replace(&mut phi, cand);
            value = cand_val;
            step = s;
        }
    }

    let grad = space.forward_gradient(&phi)?;
    let h_max = grad
        .iter()
        .enumerate()
        .map(|(i, &g)| model.hamiltonian(i, g))
        .fold(f64::NEG_INFINITY, f64::max);
    Ok(ConditionalSolution {
        value: obj.objective(&phi, false),
        phi,
        converged,
        iterations,
        h_max,
    })
}

/// Conditional objective at an explicit potential (diagnostic probe).
/// With `smoothed` the Huber-regularized Hamiltonian of the ascent is used.
pub fn conditional_objective_at(
    space: &GroundSpace,
    model: &CostModel,
    lambda: &SignedMeasure,
    mu: &AtomicMeasure,
    t: f64,
    phi: &[f64],
    smoothed: bool,
) -> Result<f64> {
    let obj = ConditionalObjective {
        space,
        model,
        net: lambda.net(),
        mu: mu.weights(),
        t,
        h: space.grid_step()?,
    };
    Ok(obj.objective(phi, smoothed))
}

/// Analytic ascent gradient at an explicit potential (diagnostic probe).
pub fn conditional_gradient_at(
    space: &GroundSpace,
    model: &CostModel,
    lambda: &SignedMeasure,
    mu: &AtomicMeasure,
    t: f64,
    phi: &[f64],
) -> Result<Vec<f64>> {
    let obj = ConditionalObjective {
        space,
        model,
        net: lambda.net(),
        mu: mu.weights(),
        t,
        h: space.grid_step()?,
    };
    let mut g = vec![0.0; phi.len()];
    obj.gradient(phi, &mut g);
    Ok(g)
}

/// Conditional p-Wasserstein metric, recovered from the conditional action
/// at T = 1 for the homogeneous family:
/// W = [C(lambda||mu) / (q - 1)]^(1/p) with q = p/(p-1).
pub fn conditional_w1p(
    space: &GroundSpace,
    lambda: &SignedMeasure,
    mu: &AtomicMeasure,
    p: f64,
    max_iter: usize,
) -> Result<f64> {
    let model = CostModel::homogeneous(p)?;
    let params = AscentParams {
        t: 1.0,
        max_iter,
        ..Default::default()
    };
    let sol = conditional_action(space, &model, lambda, mu, params)?;
    let q = p / (p - 1.0);
    Ok((sol.value.max(0.0) / (q - 1.0)).powf(1.0 / p))
}

/// n times the p-root of the joint minimum over the common measure at
/// eps = 1/n; the second component is the minimizing measure.
pub fn min_mu_scaled(
    space: &GroundSpace,
    p: f64,
    lambda: &SignedMeasure,
    n: u32,
) -> Result<(f64, AtomicMeasure)> {
    if n == 0 {
        return Err(Error::InvalidInput("need n >= 1".into()));
    }
    if !(p >= 1.0) {
        return Err(Error::InvalidInput(format!("order p must be >= 1, got {p}")));
    }
    let cost = space.dist_pow(p);
    let sol = solver::solve_joint_min_mu(&cost, lambda, 1.0 / n as f64)?;
    let value = n as f64 * sol.plan.value.max(0.0).powf(1.0 / p);
    Ok((value, sol.mu))
}

/// Scaled sweep over an increasing n list; entries run in parallel.
pub fn epsilon_sweep(
    space: &GroundSpace,
    p: f64,
    lambda: &SignedMeasure,
    n_list: &[u32],
) -> Result<SweepReport> {
    if n_list.is_empty() {
        return Err(Error::InvalidInput("empty n list".into()));
    }
    if n_list.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::InvalidInput("n list must be strictly increasing".into()));
    }
    let entries: Result<Vec<(f64, AtomicMeasure)>> = n_list
        .par_iter()
        .map(|&n| min_mu_scaled(space, p, lambda, n))
        .collect();
    let entries = entries?;
    let scaled_values: Vec<f64> = entries.iter().map(|(v, _)| *v).collect();
    let mu_trace: Vec<AtomicMeasure> = entries.into_iter().map(|(_, mu)| mu).collect();

    let k = scaled_values.len();
    let extrapolated_limit = if k >= 2 {
        let (n1, n2) = (n_list[k - 2] as f64, n_list[k - 1] as f64);
        (n2 * scaled_values[k - 1] - n1 * scaled_values[k - 2]) / (n2 - n1)
    } else {
        scaled_values[0]
    };
    let observed_rate = if k >= 3 {
        let g1 = scaled_values[k - 2] - scaled_values[k - 3];
        let g2 = scaled_values[k - 1] - scaled_values[k - 2];
        let ratio = n_list[k - 1] as f64 / n_list[k - 2] as f64;
        if g2.abs() < 1e-14 || g1.abs() < 1e-14 || ratio <= 1.0 {
            0.0
        } else {
            (g1 / g2).abs().ln() / ratio.ln()
        }
    } else {
        0.0
    };
    Ok(SweepReport {
        n_values: n_list.to_vec(),
        scaled_values,
        extrapolated_limit,
        observed_rate,
        mu_trace,
    })
}

/// Margins F_n - conditional action for a strictly positive conditioning
/// measure, with the documented first-order slack. F_n uses the homogeneous
/// closed-form action at horizon T/n as transport cost.
pub fn liminf_check(
    space: &GroundSpace,
    p: f64,
    lambda: &SignedMeasure,
    mu: &AtomicMeasure,
    t: f64,
    n_list: &[u32],
    max_iter: usize,
) -> Result<Vec<LiminfRow>> {
    if mu.weights().iter().any(|&w| w <= 0.0) {
        return Err(Error::InvalidInput(
            "liminf check requires a strictly positive conditioning measure".into(),
        ));
    }
    let model = CostModel::homogeneous(p)?;
    let params = AscentParams {
        t,
        max_iter,
        ..Default::default()
    };
    let sol = conditional_action(space, &model, lambda, mu, params)?;
    let lower = sol.value;

    n_list
        .par_iter()
        .map(|&n| {
            let table = lagrangian::c_t_homogeneous(space, p, t / n as f64)?;
            let a = mu.add_scaled(lambda.pos(), 1.0 / n as f64)?;
            let b = mu.add_scaled(lambda.neg(), 1.0 / n as f64)?;
            let (plan, _) = solver::solve_transportation(&table.c, &a, &b)?;
            let f_n = n as f64 * plan.value;
            let slack = t * (1.0 + sol.h_max) / (2.0 * n as f64);
            Ok(LiminfRow {
                n,
                f_n,
                lower_bound: lower,
                margin: f_n - lower,
                slack,
            })
        })
        .collect()
}

/// Transport-measure approximation: the joint minimizer at the largest n,
/// with the total-variation distance between the last two minimizers as a
/// convergence diagnostic (meaningful when the transport measure is unique).
pub fn transport_measure(
    space: &GroundSpace,
    lambda: &SignedMeasure,
    n_list: &[u32],
) -> Result<TransportMeasureResult> {
    if n_list.is_empty() {
        return Err(Error::InvalidInput("empty n list".into()));
    }
    let k = n_list.len();
    let (_, mu_last) = min_mu_scaled(space, 2.0, lambda, n_list[k - 1])?;
    let tv_diagnostic = if k >= 2 {
        let (_, mu_prev) = min_mu_scaled(space, 2.0, lambda, n_list[k - 2])?;
        mu_last.tv_distance(&mu_prev)
    } else {
        f64::NAN
    };
    Ok(TransportMeasureResult {
        mu: mu_last,
        tv_diagnostic,
    })
}

/// Conditional values over candidate measures against the unconditional
/// modified action.
#[allow(clippy::too_many_arguments)]
pub fn conditional_spotcheck(
    space: &GroundSpace,
    model: &CostModel,
    lambda: &SignedMeasure,
    t: f64,
    candidates: &[AtomicMeasure],
    e_grid: &[f64],
    t_grid: &[f64],
    max_iter: usize,
) -> Result<SpotCheck> {
    if candidates.is_empty() {
        return Err(Error::InvalidInput("no candidate measures".into()));
    }
    let params = AscentParams {
        t,
        max_iter,
        ..Default::default()
    };
    let mut candidate_values = Vec::with_capacity(candidates.len());
    for mu in candidates {
        let sol = conditional_action(space, model, lambda, mu, params)?;
        candidate_values.push(sol.value);
    }
    let min_over_candidates = candidate_values.iter().copied().fold(f64::INFINITY, f64::min);
    let unconditional = modified_action_via_energy(space, model, lambda, t, e_grid, t_grid)?;
    Ok(SpotCheck {
        candidate_values,
        min_over_candidates,
        unconditional,
    })
}
