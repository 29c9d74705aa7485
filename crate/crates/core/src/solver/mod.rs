//! Exact linear-programming kernels: the transportation problem, the
//! equal-marginal circulation problem, and the joint problem with a free
//! common measure.

mod simplex;

pub use simplex::LP_TOL;

use crate::error::{Error, Result};
use crate::measure::{AtomicMeasure, SignedMeasure};
use ndarray::Array2;
use serde::Serialize;
use simplex::{solve, DenseLp};

/// Marginal tolerance for couplings and the mass-balance prerequisite.
pub const MARGINAL_TOL: f64 = 1e-9;

/// A coupling with prescribed marginals and its objective value.
#[derive(Debug, Clone)]
pub struct TransportPlan {
    pub plan: Array2<f64>,
    pub value: f64,
}

impl TransportPlan {
    pub fn row_sums(&self) -> Vec<f64> {
        self.plan.rows().into_iter().map(|r| r.sum()).collect()
    }

    pub fn col_sums(&self) -> Vec<f64> {
        self.plan.columns().into_iter().map(|c| c.sum()).collect()
    }
}

impl Serialize for TransportPlan {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        #[derive(Serialize)]
        struct Dto<'a> {
            value: f64,
            plan: Vec<&'a [f64]>,
        }
        let plan = self
            .plan
            .rows()
            .into_iter()
            .map(|r| r.to_slice().expect("contiguous"))
            .collect();
        Dto {
            value: self.value,
            plan,
        }
        .serialize(s)
    }
}

/// Dual prices of a transportation solve; certify optimality through
/// complementary slackness.
#[derive(Debug, Clone)]
pub struct TransportDuals {
    pub source: Vec<f64>,
    pub target: Vec<f64>,
}

/// Minimizer of the joint problem: a free common probability measure and the
/// optimal coupling of (mu + eps lam+) to (mu + eps lam-).
#[derive(Debug, Clone, Serialize)]
pub struct JointSolution {
    pub mu: AtomicMeasure,
    #[serde(flatten)]
    pub plan: TransportPlan,
}

fn check_cost(cost: &Array2<f64>) -> Result<usize> {
    let m = cost.nrows();
    if cost.ncols() != m {
        return Err(Error::InvalidInput("cost matrix is not square".into()));
    }
    if cost.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidInput("cost matrix has a non-finite entry".into()));
    }
    Ok(m)
}

/// Exact minimizer of `sum cost[i][j] plan[i][j]` over couplings of a to b.
///
/// Returns the optimal plan together with dual prices (u, v) satisfying
/// u_i + v_j <= cost[i][j], with equality on the support of the plan.
pub fn solve_transportation(
    cost: &Array2<f64>,
    a: &AtomicMeasure,
    b: &AtomicMeasure,
) -> Result<(TransportPlan, TransportDuals)> {
    let m = check_cost(cost)?;
    if a.len() != m || b.len() != m {
        return Err(Error::InvalidInput(
            "marginals do not match the cost matrix size".into(),
        ));
    }
    let (ma, mb) = (a.total_mass(), b.total_mass());
    if (ma - mb).abs() > MARGINAL_TOL {
        return Err(Error::Unbalanced {
            a: ma,
            b: mb,
            gap: (ma - mb).abs(),
        });
    }

    let rows = 2 * m;
    let cols = m * m;
    let mut mat = vec![0.0; rows * cols];
    for i in 0..m {
        for j in 0..m {
            mat[i * cols + i * m + j] = 1.0; // row sums
            mat[(m + j) * cols + i * m + j] = 1.0; // column sums
        }
    }
    let mut rhs = Vec::with_capacity(rows);
    rhs.extend_from_slice(a.weights());
    rhs.extend_from_slice(b.weights());
    let lp = DenseLp {
        rows,
        cols,
        a: mat,
        b: rhs,
        c: cost.iter().copied().collect(),
    };
    let sol = solve(&lp)?;

    let plan = extract_plan(&sol.x, m)?;
    let duals = TransportDuals {
        source: sol.duals[..m].to_vec(),
        target: sol.duals[m..].to_vec(),
    };
    certify_transport(cost, &plan, &duals)?;
    let value = objective(cost, &plan);
    Ok((TransportPlan { plan, value }, duals))
}

/// Minimizer of `sum cost . plan` over couplings with equal free marginals of
/// total mass one. Returns the common marginal and the plan; with the
/// Lagrangian action cost the value equals -T times the ground energy.
pub fn solve_circulation(cost: &Array2<f64>) -> Result<(AtomicMeasure, TransportPlan)> {
    let m = check_cost(cost)?;
    // rows 0..m: (row sums - col sums) = 0 ; row m: total mass = 1
    let rows = m + 1;
    let cols = m * m;
    let mut mat = vec![0.0; rows * cols];
    for i in 0..m {
        for j in 0..m {
            mat[i * cols + i * m + j] += 1.0;
            mat[i * cols + j * m + i] -= 1.0;
            mat[m * cols + i * m + j] = 1.0;
        }
    }
    let mut rhs = vec![0.0; m];
    rhs.push(1.0);
    let lp = DenseLp {
        rows,
        cols,
        a: mat,
        b: rhs,
        c: cost.iter().copied().collect(),
    };
    let sol = solve(&lp)?;
    let plan = extract_plan(&sol.x, m)?;
    let mu = AtomicMeasure::new(plan.rows().into_iter().map(|r| r.sum().max(0.0)).collect())?;
    let value = objective(cost, &plan);
    Ok((mu, TransportPlan { plan, value }))
}

/// Global minimum over probability measures mu of the transportation value
/// between mu + eps lam+ and mu + eps lam-, solved as one LP in (plan, mu).
pub fn solve_joint_min_mu(
    cost: &Array2<f64>,
    lambda: &SignedMeasure,
    eps: f64,
) -> Result<JointSolution> {
    let m = check_cost(cost)?;
    if lambda.len() != m {
        return Err(Error::InvalidInput(
            "signed measure does not match the cost matrix size".into(),
        ));
    }
    if !(eps > 0.0) || !eps.is_finite() {
        return Err(Error::InvalidInput(format!("eps must be positive, got {eps}")));
    }

    let n_plan = m * m;
    let cols = n_plan + m;
    let rows = 2 * m + 1;
    let mut mat = vec![0.0; rows * cols];
    for i in 0..m {
        for j in 0..m {
            mat[i * cols + i * m + j] = 1.0;
            mat[(m + j) * cols + i * m + j] = 1.0;
        }
        mat[i * cols + n_plan + i] = -1.0;
        mat[(m + i) * cols + n_plan + i] = -1.0;
        mat[(2 * m) * cols + n_plan + i] = 1.0;
    }
    let mut rhs = Vec::with_capacity(rows);
    rhs.extend(lambda.pos().weights().iter().map(|w| eps * w));
    rhs.extend(lambda.neg().weights().iter().map(|w| eps * w));
    rhs.push(1.0);
    let mut c: Vec<f64> = cost.iter().copied().collect();
    c.extend(std::iter::repeat_n(0.0, m));
    let lp = DenseLp {
        rows,
        cols,
        a: mat,
        b: rhs,
        c,
    };
    let sol = solve(&lp)?;

    let plan = extract_plan(&sol.x[..n_plan], m)?;
    let mu = AtomicMeasure::new(sol.x[n_plan..].iter().map(|&w| w.max(0.0)).collect())?;
    if (mu.total_mass() - 1.0).abs() > MARGINAL_TOL {
        return Err(Error::Numerical(format!(
            "joint minimizer mass {} is not 1",
            mu.total_mass()
        )));
    }
    let value = objective(cost, &plan);
    Ok(JointSolution {
        mu,
        plan: TransportPlan { plan, value },
    })
}

/// Minimum-cost flow in divergence form: nonnegative flows on all ordered
/// pairs (i, j), i != j, with net out-flow `net` at every node, minimizing
/// `sum cost[i][j] f[i][j]`. Returns the flow value and the node potentials
/// (simplex multipliers), which satisfy y_i - y_j <= cost[i][j].
pub fn solve_divergence_flow(cost: &Array2<f64>, net: &[f64]) -> Result<(f64, Vec<f64>)> {
    let m = check_cost(cost)?;
    if net.len() != m {
        return Err(Error::InvalidInput(
            "divergence vector does not match the cost matrix size".into(),
        ));
    }
    let total: f64 = net.iter().sum();
    if total.abs() > MARGINAL_TOL {
        return Err(Error::Unbalanced {
            a: net.iter().filter(|v| **v > 0.0).sum(),
            b: -net.iter().filter(|v| **v < 0.0).sum::<f64>(),
            gap: total.abs(),
        });
    }
    let arcs: Vec<(usize, usize)> = (0..m)
        .flat_map(|i| (0..m).filter(move |&j| j != i).map(move |j| (i, j)))
        .collect();
    let cols = arcs.len();
    let mut mat = vec![0.0; m * cols];
    let mut c = vec![0.0; cols];
    for (k, &(i, j)) in arcs.iter().enumerate() {
        mat[i * cols + k] = 1.0;
        mat[j * cols + k] = -1.0;
        c[k] = cost[[i, j]];
    }
    let lp = DenseLp {
        rows: m,
        cols,
        a: mat,
        b: net.to_vec(),
        c,
    };
    let sol = solve(&lp)?;
    Ok((sol.value, sol.duals))
}

fn extract_plan(x: &[f64], m: usize) -> Result<Array2<f64>> {
    let mut plan = Array2::zeros((m, m));
    for i in 0..m {
        for j in 0..m {
            plan[[i, j]] = x[i * m + j].max(0.0);
        }
    }
    Ok(plan)
}

fn objective(cost: &Array2<f64>, plan: &Array2<f64>) -> f64 {
    cost.iter().zip(plan.iter()).map(|(c, p)| c * p).sum()
}

/// Complementary slackness: dual feasibility everywhere, equality on support.
fn certify_transport(
    cost: &Array2<f64>,
    plan: &Array2<f64>,
    duals: &TransportDuals,
) -> Result<()> {
    let m = plan.nrows();
    let scale = 1.0 + cost.iter().fold(0.0f64, |a, &v| a.max(v.abs()));
    for i in 0..m {
        for j in 0..m {
            let slack = cost[[i, j]] - duals.source[i] - duals.target[j];
            if slack < -1e-7 * scale {
                return Err(Error::Numerical(format!(
                    "dual infeasibility {slack:e} at ({i},{j})"
                )));
            }
            if plan[[i, j]] > 1e-7 && slack > 1e-6 * scale {
                return Err(Error::Numerical(format!(
                    "complementary slackness violated at ({i},{j}): mass {} slack {slack:e}",
                    plan[[i, j]]
                )));
            }
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::space::GroundSpace;

    fn measure(w: &[f64]) -> AtomicMeasure {
        AtomicMeasure::new(w.to_vec()).unwrap()
    }

    #[test]
    fn forced_single_move() {
        let cost = ndarray::array![[0.0, 1.0], [1.0, 0.0]];
        let (plan, _) = solve_transportation(&cost, &measure(&[1.0, 0.0]), &measure(&[0.0, 1.0]))
            .unwrap();
        assert!((plan.value - 1.0).abs() < 1e-12);
        assert!((plan.plan[[0, 1]] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn identical_marginals_cost_zero() {
        let cost = ndarray::array![
            [0.0, 2.0, 5.0],
            [2.0, 0.0, 1.0],
            [5.0, 1.0, 0.0]
        ];
        let a = measure(&[0.2, 0.5, 0.3]);
        let (plan, _) = solve_transportation(&cost, &a, &a).unwrap();
        assert!(plan.value.abs() < 1e-12);
    }

    #[test]
    fn unbalanced_rejected() {
        let cost = ndarray::array![[0.0, 1.0], [1.0, 0.0]];
        let err =
            solve_transportation(&cost, &measure(&[1.0, 0.0]), &measure(&[0.0, 2.0])).unwrap_err();
        assert!(matches!(err, Error::Unbalanced { .. }));
    }

    #[test]
    fn nan_cost_rejected() {
        let cost = ndarray::array![[0.0, f64::NAN], [1.0, 0.0]];
        assert!(solve_transportation(&cost, &measure(&[1.0, 0.0]), &measure(&[0.0, 1.0])).is_err());
    }

    /// Birkhoff: with uniform marginals the optimum over couplings equals the
    /// best permutation matrix scaled by 1/m.
    #[test]
    fn uniform_marginals_match_permutation_enumeration() {
        let m = 4;
        // fixed pseudo-random cost
        let mut state = 0x9e3779b97f4a7c15u64;
        let mut next = || {
            state = state.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            ((state >> 33) as f64) / (u32::MAX as f64 / 8.0)
        };
        let cost = Array2::from_shape_fn((m, m), |_| next());
        let u = measure(&[0.25; 4]);
        let (plan, _) = solve_transportation(&cost, &u, &u).unwrap();

        let mut best = f64::INFINITY;
        let mut perm = [0usize, 1, 2, 3];
        heap_permutations(&mut perm, 4, &mut |p| {
            let v: f64 = p.iter().enumerate().map(|(i, &j)| cost[[i, j]]).sum();
            best = best.min(v);
        });
        assert!((plan.value - best / 4.0).abs() < 1e-10);
    }

    #[allow(clippy::needless_range_loop)]
    fn heap_permutations(arr: &mut [usize; 4], k: usize, f: &mut impl FnMut(&[usize; 4])) {
        if k == 1 {
            f(arr);
            return;
        }
        for i in 0..k {
            heap_permutations(arr, k - 1, f);
            if k.is_multiple_of(2) {
                arr.swap(i, k - 1);
            } else {
                arr.swap(0, k - 1);
            }
        }
    }

    #[test]
    fn circulation_zero_diagonal_and_constant_cost() {
        let mut cost = Array2::from_elem((5, 5), 3.0);
        for i in 0..5 {
            cost[[i, i]] = 0.0;
        }
        let (_, plan) = solve_circulation(&cost).unwrap();
        assert!(plan.value.abs() < 1e-12);

        let flat = Array2::from_elem((5, 5), 0.7);
        let (mu, plan) = solve_circulation(&flat).unwrap();
        assert!((plan.value - 0.7).abs() < 1e-12);
        assert!((mu.total_mass() - 1.0).abs() < 1e-9);
    }

    #[test]
    fn joint_relay_through_midpoint() {
        // interval {0, 1/2, 1}, cost D^2, lam = d0 - d2, eps = 1/2:
        // the relay mu = d_{1/2} makes two half-mass moves of length 1/2.
        let s = GroundSpace::interval(3).unwrap();
        let lam = SignedMeasure::dirac_pair(&s, 0, 2).unwrap();
        let sol = solve_joint_min_mu(&s.dist_pow(2.0), &lam, 0.5).unwrap();
        assert!((sol.plan.value - 0.25).abs() < 1e-10);
        // marginals of the plan match mu + eps lam
        for i in 0..3 {
            let row: f64 = (0..3).map(|j| sol.plan.plan[[i, j]]).sum();
            let expect = sol.mu.weight(i) + 0.5 * lam.pos().weight(i);
            assert!((row - expect).abs() < 1e-9);
        }
    }

    #[test]
    fn joint_zero_lambda_is_free() {
        let s = GroundSpace::torus_1d(5).unwrap();
        let z = AtomicMeasure::zeros(5);
        let lam = SignedMeasure::new(z.clone(), z).unwrap();
        let sol = solve_joint_min_mu(&s.dist_matrix().clone(), &lam, 1.0).unwrap();
        assert!(sol.plan.value.abs() < 1e-12);
    }

    #[test]
    fn joint_w1_cost_scales_linearly_in_eps() {
        let s = GroundSpace::torus_1d(8).unwrap();
        let lam = SignedMeasure::dirac_pair(&s, 1, 5).unwrap();
        let d = s.dist_matrix().clone();
        let base = solve_joint_min_mu(&d, &lam, 0.25).unwrap().plan.value;
        let half = solve_joint_min_mu(&d, &lam, 0.125).unwrap().plan.value;
        let twice = solve_joint_min_mu(&d, &lam, 0.5).unwrap().plan.value;
        assert!((half - 0.5 * base).abs() < 1e-9);
        assert!((twice - 2.0 * base).abs() < 1e-9);
    }

    #[test]
    fn joint_solution_json_schema() {
        let s = GroundSpace::interval(3).unwrap();
        let lam = SignedMeasure::dirac_pair(&s, 0, 2).unwrap();
        let sol = solve_joint_min_mu(&s.dist_pow(2.0), &lam, 0.5).unwrap();
        let text = serde_json::to_string(&sol).unwrap();
        let v: serde_json::Value = serde_json::from_str(&text).unwrap();
        assert!(v["value"].is_number());
        assert!(v["plan"].is_array());
        assert!(v["mu"]["weights"].is_array());
    }

    /// Restriction of an optimal plan to a subset of pairs stays optimal for
    /// its own marginals.
    #[test]
    fn restriction_of_optimal_plan_is_optimal() {
        let s = GroundSpace::torus_1d(7).unwrap();
        let cost = s.dist_pow(2.0);
        let a = measure(&[0.3, 0.0, 0.2, 0.1, 0.0, 0.25, 0.15]);
        let b = measure(&[0.0, 0.35, 0.0, 0.2, 0.3, 0.0, 0.15]);
        let (plan, _) = solve_transportation(&cost, &a, &b).unwrap();
        // take B = pairs with i < 4
        let mut restricted = plan.plan.clone();
        for i in 4..7 {
            for j in 0..7 {
                restricted[[i, j]] = 0.0;
            }
        }
        let ra = measure(&restricted.rows().into_iter().map(|r| r.sum()).collect::<Vec<_>>());
        let rb = measure(&restricted.columns().into_iter().map(|c| c.sum()).collect::<Vec<_>>());
        if ra.total_mass() > 1e-9 {
            let (re_opt, _) = solve_transportation(&cost, &ra, &rb).unwrap();
            let restricted_value: f64 =
                cost.iter().zip(restricted.iter()).map(|(c, p)| c * p).sum();
            assert!((restricted_value - re_opt.value).abs() < 1e-9);
        }
    }
}
