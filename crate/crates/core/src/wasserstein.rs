//! Wasserstein distances and the Kantorovich-Rubinstein dual for W1.

use crate::error::{Error, Result};
use crate::measure::{AtomicMeasure, SignedMeasure};
use crate::solver;
use crate::space::GroundSpace;
use serde::Serialize;

/// A Kantorovich potential: a 1-Lipschitz function (w.r.t. the ground
/// distance) certifying the dual value of W1. Normalized to phi[0] = 0.
#[derive(Debug, Clone, Serialize)]
pub struct DualPotential {
    pub phi: Vec<f64>,
    pub value: f64,
}

impl DualPotential {
    /// Largest violation of the Lipschitz constraints phi_i - phi_j <= D_ij.
    pub fn lipschitz_excess(&self, space: &GroundSpace) -> f64 {
        let m = space.len();
        let mut worst = 0.0f64;
        for i in 0..m {
            for j in 0..m {
                worst = worst.max(self.phi[i] - self.phi[j] - space.dist(i, j));
            }
        }
        worst
    }
}

/// (integral of D^p over the optimal coupling)^(1/p).
pub fn wasserstein_p(
    space: &GroundSpace,
    p: f64,
    a: &AtomicMeasure,
    b: &AtomicMeasure,
) -> Result<f64> {
    if !(p >= 1.0) {
        return Err(Error::InvalidInput(format!("order p must be >= 1, got {p}")));
    }
    let cost = space.dist_pow(p);
    let (plan, _) = solver::solve_transportation(&cost, a, b)?;
    Ok(plan.value.max(0.0).powf(1.0 / p))
}

/// Maximize the pairing with lambda over the unit Lipschitz ball.
///
/// Solved through the equivalent minimum-cost flow program: find nonnegative
/// arc flows f_ij with net divergence lambda minimizing sum D_ij f_ij; the
/// simplex multipliers of the divergence constraints are a maximizing
/// potential, and strong duality makes the two optimal values equal. The
/// returned potential is verified feasible and its pairing re-evaluated, so
/// the reported value is certified by an explicit member of the ball.
pub fn w1_dual(space: &GroundSpace, lambda: &SignedMeasure) -> Result<DualPotential> {
    let m = space.len();
    if lambda.len() != m {
        return Err(Error::InvalidInput(
            "signed measure does not match the space".into(),
        ));
    }
    let net = lambda.net();
    let (flow_value, mut phi) = solver::solve_divergence_flow(space.dist_matrix(), &net)?;
    let base = phi[0];
    for v in phi.iter_mut() {
        *v -= base;
    }
    // tighten into the exact Lipschitz ball (inf-convolution with D);
    // a no-op up to rounding for exact simplex multipliers
    let mut tight: Vec<f64> = (0..m)
        .map(|i| {
            (0..m)
                .map(|j| phi[j] + space.dist(i, j))
                .fold(f64::INFINITY, f64::min)
        })
        .collect();
    let base = tight[0];
    for v in tight.iter_mut() {
        *v -= base;
    }
    let value = lambda.pair(&tight);
    let pot = DualPotential { phi: tight, value };
    let excess = pot.lipschitz_excess(space);
    if excess > 1e-9 {
        return Err(Error::Numerical(format!(
            "dual potential exceeds the Lipschitz ball by {excess:e}"
        )));
    }
    if (value - flow_value).abs() > 1e-7 * (1.0 + flow_value.abs()) {
        return Err(Error::Numerical(format!(
            "potential pairing {value} drifted from the flow optimum {flow_value}"
        )));
    }
    Ok(pot)
}

/// |primal - dual| for W1, the two sides computed by independent programs.
pub fn duality_gap(space: &GroundSpace, lambda: &SignedMeasure) -> Result<f64> {
    let primal = wasserstein_p(space, 1.0, lambda.pos(), lambda.neg())?;
    let dual = w1_dual(space, lambda)?;
    Ok((primal - dual.value).abs())
}

/// W1 between a dirac pair is the ground distance itself.
pub fn w1_dirac_pair(space: &GroundSpace, i: usize, j: usize) -> Result<f64> {
    let lam = SignedMeasure::dirac_pair(space, i, j)?;
    wasserstein_p(space, 1.0, lam.pos(), lam.neg())
}
