//! Lagrangian point costs, the energy-indexed metric D_E, the ground energy
//! with its projected minimizing measure, and transport against D_E.

use crate::error::{Error, Result};
use crate::measure::{AtomicMeasure, SignedMeasure};
use crate::solver;
use crate::space::GroundSpace;
use ndarray::Array2;
use serde::Serialize;
use std::collections::HashMap;

/// The two Lagrangian families in the catalogue.
///
/// `Homogeneous` is l(v) = |v|^p / (p-1) with p > 1; `Mechanical` is
/// l(x, v) = v^2/2 - V(x) with a potential sampled on the grid points.
#[derive(Debug, Clone, Serialize)]
pub enum CostModel {
    Homogeneous { p: f64 },
    Mechanical { potential: Vec<f64> },
}

impl CostModel {
    pub fn homogeneous(p: f64) -> Result<Self> {
        if !(p > 1.0) || !p.is_finite() {
            return Err(Error::InvalidInput(format!(
                "homogeneous exponent must satisfy p > 1, got {p}"
            )));
        }
        Ok(Self::Homogeneous { p })
    }

    pub fn mechanical(potential: Vec<f64>) -> Result<Self> {
        if potential.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidInput("potential has a non-finite entry".into()));
        }
        Ok(Self::Mechanical { potential })
    }

    fn check_space(&self, space: &GroundSpace) -> Result<()> {
        if let Self::Mechanical { potential } = self {
            if potential.len() != space.len() {
                return Err(Error::InvalidInput(format!(
                    "potential has {} entries for a {}-point space",
                    potential.len(),
                    space.len()
                )));
            }
        }
        Ok(())
    }

    /// Lagrangian l(x, v); for grid spaces v is a signed speed.
    pub fn lagrangian(&self, x: usize, v: f64) -> f64 {
        match self {
            Self::Homogeneous { p } => v.abs().powf(*p) / (p - 1.0),
            Self::Mechanical { potential } => 0.5 * v * v - potential[x],
        }
    }

    /// Legendre dual h(x, xi) of the Lagrangian.
    pub fn hamiltonian(&self, x: usize, xi: f64) -> f64 {
        match self {
            Self::Homogeneous { p } => {
                let q = p / (p - 1.0);
                q.powf(-q) * xi.abs().powf(q)
            }
            Self::Mechanical { potential } => 0.5 * xi * xi + potential[x],
        }
    }

    /// dh/dxi. For homogeneous models with q < 2 this is not Lipschitz at 0;
    /// the smoothed variants below are what the ascent uses.
    pub fn hamiltonian_grad(&self, _x: usize, xi: f64) -> f64 {
        match self {
            Self::Homogeneous { p } => {
                let q = p / (p - 1.0);
                q.powf(1.0 - q) * xi.abs().powf(q - 1.0) * xi.signum()
            }
            Self::Mechanical { .. } => xi,
        }
    }

    /// Huber-regularized Hamiltonian: below |xi| = width the |xi|^q branch is
    /// replaced by the tangent parabola, keeping the function C^1. Only the
    /// homogeneous q < 2 case differs from the plain Hamiltonian.
    pub fn hamiltonian_smoothed(&self, x: usize, xi: f64, width: f64) -> f64 {
        match self {
            Self::Homogeneous { p } => {
                let q = p / (p - 1.0);
                if q >= 2.0 || xi.abs() >= width {
                    return self.hamiltonian(x, xi);
                }
                let scale = q.powf(-q);
                let b = 0.5 * scale * q * width.powf(q - 2.0);
                let a = scale * width.powf(q) - b * width * width;
                a + b * xi * xi
            }
            Self::Mechanical { .. } => self.hamiltonian(x, xi),
        }
    }

    pub fn hamiltonian_smoothed_grad(&self, x: usize, xi: f64, width: f64) -> f64 {
        match self {
            Self::Homogeneous { p } => {
                let q = p / (p - 1.0);
                if q >= 2.0 || xi.abs() >= width {
                    return self.hamiltonian_grad(x, xi);
                }
                let scale = q.powf(-q);
                scale * q * width.powf(q - 2.0) * xi
            }
            Self::Mechanical { .. } => xi,
        }
    }
}

/// A time-T point-cost table C_T(x, y). `steps` records the Bellman
/// resolution that produced it; zero marks a closed form.
#[derive(Debug, Clone, Serialize)]
pub struct ActionTable {
    pub t: f64,
    pub steps: usize,
    #[serde(serialize_with = "crate::serialize_matrix")]
    pub c: Array2<f64>,
}

/// Closed-form action of the homogeneous Lagrangian:
/// C_T(x,y) = D(x,y)^p / ((p-1) T^(p-1)).
pub fn c_t_homogeneous(space: &GroundSpace, p: f64, t: f64) -> Result<ActionTable> {
    if !(p > 1.0) {
        return Err(Error::InvalidInput(format!("need p > 1, got {p}")));
    }
    if !(t > 0.0) {
        return Err(Error::InvalidInput(format!("need T > 0, got {t}")));
    }
    let denom = (p - 1.0) * t.powf(p - 1.0);
    let c = space.dist_matrix().mapv(|d| d.powf(p) / denom);
    Ok(ActionTable { t, steps: 0, c })
}

/// Discrete value iteration for the action: the one-step cost moves along the
/// geodesic at explicit speed D(x,y)/(T/K), and K steps compose by the
/// min-plus product.
///
/// The composition is exact as a semigroup, but the speed resolution on an
/// m-point grid is K/(m T): step counts beyond m*T/(2 v_max) quantize the
/// velocity too coarsely to track the continuum action, so refine K and the
/// grid together.
pub fn c_t_bellman(
    space: &GroundSpace,
    model: &CostModel,
    t: f64,
    steps: usize,
) -> Result<ActionTable> {
    if !(t > 0.0) {
        return Err(Error::InvalidInput(format!("need T > 0, got {t}")));
    }
    if steps == 0 {
        return Err(Error::InvalidInput("need at least one Bellman step".into()));
    }
    model.check_space(space)?;
    let m = space.len();
    let dt = t / steps as f64;
    let one = Array2::from_shape_fn((m, m), |(i, j)| {
        dt * model.lagrangian(i, space.dist(i, j) / dt)
    });
    // min-plus exponentiation by squaring over the binary expansion of K
    let mut result: Option<Array2<f64>> = None;
    let mut power = one;
    let mut k = steps;
    loop {
        if k & 1 == 1 {
            result = Some(match result {
                None => power.clone(),
                Some(acc) => min_plus(&acc, &power),
            });
        }
        k >>= 1;
        if k == 0 {
            break;
        }
        power = min_plus(&power, &power);
    }
    Ok(ActionTable {
        t,
        steps,
        c: result.expect("steps >= 1"),
    })
}

/// Min-plus matrix product: out[i][j] = min_k a[i][k] + b[k][j].
pub fn min_plus(a: &Array2<f64>, b: &Array2<f64>) -> Array2<f64> {
    let m = a.nrows();
    let bt = b.t();
    Array2::from_shape_fn((m, m), |(i, j)| {
        let arow = a.row(i);
        let bcol = bt.row(j);
        arow.iter()
            .zip(bcol.iter())
            .map(|(x, y)| x + y)
            .fold(f64::INFINITY, f64::min)
    })
}

/// Bellman step count for a time horizon, keeping the speed quantum K/(mT)
/// at or below 1/4 so moderate speeds stay representable.
pub fn bellman_steps_for(space: &GroundSpace, t: f64) -> usize {
    ((space.len() as f64 * t / 4.0).round() as usize).max(1)
}

trait ActionEval {
    /// C_T(x, y) for one pair.
    fn at(&mut self, i: usize, j: usize, t: f64) -> f64;
}

struct HomogeneousEval<'a> {
    space: &'a GroundSpace,
    p: f64,
}

impl ActionEval for HomogeneousEval<'_> {
    fn at(&mut self, i: usize, j: usize, t: f64) -> f64 {
        let d = self.space.dist(i, j);
        d.powf(self.p) / ((self.p - 1.0) * t.powf(self.p - 1.0))
    }
}

/// Bellman tables memoized by exact T bits; refinement probes are dyadic
/// midpoints of the coarse grid cells, so neighbouring entries share tables.
struct BellmanEval<'a> {
    space: &'a GroundSpace,
    model: &'a CostModel,
    cache: HashMap<u64, Array2<f64>>,
    cache_cap: usize,
}

impl ActionEval for BellmanEval<'_> {
    fn at(&mut self, i: usize, j: usize, t: f64) -> f64 {
        let key = t.to_bits();
        if !self.cache.contains_key(&key) {
            if self.cache.len() >= self.cache_cap {
                self.cache.clear();
            }
            let steps = bellman_steps_for(self.space, t);
            let table = c_t_bellman(self.space, self.model, t, steps)
                .expect("validated inputs")
                .c;
            self.cache.insert(key, table);
        }
        self.cache[&key][[i, j]]
    }
}

/// D_E(x,y) = inf over T > 0 of C_T(x,y) + E T, entrywise.
///
/// The coarse grid brackets each entry's minimizer, then a one-dimensional
/// refinement shrinks the bracket (golden section for the closed-form
/// homogeneous cost; shared dyadic bisection for Bellman-backed mechanical
/// costs). The diagonal carries the T -> 0+ limit, which is zero for both
/// model families, so D_E(x,x) = 0 whenever the grid values stay nonnegative.
pub fn d_e(
    space: &GroundSpace,
    model: &CostModel,
    e: f64,
    t_grid: &[f64],
) -> Result<Array2<f64>> {
    if t_grid.is_empty() {
        return Err(Error::InvalidInput("empty T grid".into()));
    }
    if t_grid.iter().any(|&t| !(t > 0.0)) {
        return Err(Error::InvalidInput("T grid entries must be positive".into()));
    }
    if !e.is_finite() {
        return Err(Error::InvalidInput("energy must be finite".into()));
    }
    model.check_space(space)?;
    let mut ts: Vec<f64> = t_grid.to_vec();
    ts.sort_by(|a, b| a.partial_cmp(b).unwrap());

    match model {
        CostModel::Homogeneous { p } => {
            let mut eval = HomogeneousEval { space, p: *p };
            d_e_with(space, &mut eval, e, &ts, Refine::Golden)
        }
        CostModel::Mechanical { .. } => {
            let mut eval = BellmanEval {
                space,
                model,
                cache: HashMap::new(),
                cache_cap: 512,
            };
            d_e_with(space, &mut eval, e, &ts, Refine::Bisect)
        }
    }
}

enum Refine {
    Golden,
    Bisect,
}

fn d_e_with(
    space: &GroundSpace,
    eval: &mut dyn ActionEval,
    e: f64,
    ts: &[f64],
    refine: Refine,
) -> Result<Array2<f64>> {
    let m = space.len();
    let mut out = Array2::zeros((m, m));
    for i in 0..m {
        for j in 0..m {
            let mut g = |t: f64| eval.at(i, j, t) + e * t;
            let mut best_idx = 0;
            let mut best = f64::INFINITY;
            for (k, &t) in ts.iter().enumerate() {
                let v = g(t);
                if v < best {
                    best = v;
                    best_idx = k;
                }
            }
            let lo = ts[best_idx.saturating_sub(1)];
            let hi = ts[(best_idx + 1).min(ts.len() - 1)];
            let refined = match refine {
                Refine::Golden => golden_min(&mut g, lo, hi, 60),
                Refine::Bisect => bisect_min(&mut g, lo, ts[best_idx], hi, best, 22),
            };
            let mut v = best.min(refined);
            if i == j {
                // inf over T in (0, t_min) tends to 0 for both families
                v = v.min(0.0);
            }
            out[[i, j]] = v;
        }
    }
    Ok(out)
}

/// Golden-section minimum of a strictly unimodal function on [lo, hi].
fn golden_min(g: &mut dyn FnMut(f64) -> f64, lo: f64, hi: f64, iters: usize) -> f64 {
    if hi <= lo {
        return g(lo);
    }
    const INV_PHI: f64 = 0.618_033_988_749_894_9;
    let (mut a, mut b) = (lo, hi);
    let mut c = b - INV_PHI * (b - a);
    let mut d = a + INV_PHI * (b - a);
    let (mut fc, mut fd) = (g(c), g(d));
    for _ in 0..iters {
        if fc < fd {
            b = d;
            d = c;
            fd = fc;
            c = b - INV_PHI * (b - a);
            fc = g(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + INV_PHI * (b - a);
            fd = g(d);
        }
        if b - a < 1e-12 * (1.0 + b.abs()) {
            break;
        }
    }
    fc.min(fd)
}

/// Bracket shrinking by dyadic midpoints; the probe points of neighbouring
/// entries coincide, so a table cache behind `g` stays small.
fn bisect_min(
    g: &mut dyn FnMut(f64) -> f64,
    lo: f64,
    mid: f64,
    hi: f64,
    f_mid: f64,
    rounds: usize,
) -> f64 {
    let (mut a, mut b, mut c) = (lo, mid, hi);
    let mut fb = f_mid;
    for _ in 0..rounds {
        if c - a < 1e-10 * (1.0 + c.abs()) {
            break;
        }
        let m1 = 0.5 * (a + b);
        let m2 = 0.5 * (b + c);
        let f1 = g(m1);
        let f2 = g(m2);
        if f1 <= fb && f1 <= f2 {
            c = b;
            b = m1;
            fb = f1;
        } else if f2 <= fb && f2 <= f1 {
            a = b;
            b = m2;
            fb = f2;
        } else {
            a = m1;
            c = m2;
        }
    }
    fb
}

/// Ground energy from the circulation program: with the action table as cost
/// the optimal value is -T times the ground energy, and the common marginal
/// of the minimizing coupling is the projected minimizing (Mather) measure.
pub fn ubar_and_mather(
    space: &GroundSpace,
    model: &CostModel,
    t: f64,
    steps: usize,
) -> Result<(f64, AtomicMeasure)> {
    let table = match model {
        CostModel::Homogeneous { p } => c_t_homogeneous(space, *p, t)?,
        CostModel::Mechanical { .. } => c_t_bellman(space, model, t, steps)?,
    };
    let (mu, plan) = solver::solve_circulation(&table.c)?;
    Ok((-plan.value / t, mu))
}

/// Upper-bound candidate for the ground energy carried by one test potential:
/// max over grid points of h(x, dphi) with the shared forward-difference
/// gradient.
pub fn effective_h_bound(space: &GroundSpace, model: &CostModel, phi: &[f64]) -> Result<f64> {
    model.check_space(space)?;
    let grad = space.forward_gradient(phi)?;
    Ok(grad
        .iter()
        .enumerate()
        .map(|(i, &g)| model.hamiltonian(i, g))
        .fold(f64::NEG_INFINITY, f64::max))
}

/// Transport cost of a balanced signed measure against a D_E matrix.
pub fn d_e_transport(lambda: &SignedMeasure, d_e_matrix: &Array2<f64>) -> Result<f64> {
    let (plan, _) = solver::solve_transportation(d_e_matrix, lambda.pos(), lambda.neg())?;
    Ok(plan.value)
}

/// Geometric T grid, a reasonable default bracket for unit-diameter spaces.
pub fn log_t_grid(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    assert!(lo > 0.0 && hi > lo && n >= 2);
    let ratio = (hi / lo).powf(1.0 / (n - 1) as f64);
    (0..n).map(|k| lo * ratio.powi(k as i32)).collect()
}
