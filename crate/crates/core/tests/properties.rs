//! Property suites: metric structure of the builders, duality and pinning of
//! the transport programs, order relations of the Wasserstein family, and
//! the brute-force coupling oracle on small supports.

use ndarray::Array2;
use otlimits_core::measure::{AtomicMeasure, SignedMeasure};
use otlimits_core::solver;
use otlimits_core::space::GroundSpace;
use otlimits_core::wasserstein;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn exhaustive_triangle_check(s: &GroundSpace) {
    let m = s.len();
    for i in 0..m {
        for j in 0..m {
            for k in 0..m {
                assert!(s.dist(i, k) <= s.dist(i, j) + s.dist(j, k) + 1e-12);
            }
            assert_eq!(s.dist(i, j), s.dist(j, i));
        }
        assert_eq!(s.dist(i, i), 0.0);
    }
}

#[test]
fn builders_are_metric_up_to_64_points() {
    for m in [2usize, 3, 7, 16, 33, 64] {
        exhaustive_triangle_check(&GroundSpace::torus_1d(m).unwrap());
        exhaustive_triangle_check(&GroundSpace::interval(m).unwrap());
    }
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let n = 64;
    let mut edges: Vec<(usize, usize, f64)> =
        (1..n).map(|i| (i - 1, i, rng.random_range(0.1..1.0))).collect();
    for _ in 0..80 {
        let i = rng.random_range(0..n);
        let j = rng.random_range(0..n);
        if i != j {
            edges.push((i, j, rng.random_range(0.1..2.0)));
        }
    }
    exhaustive_triangle_check(&GroundSpace::metric_closure(n, &edges).unwrap());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    /// Random connected graphs of up to 8 nodes close into metric spaces.
    #[test]
    fn metric_closure_satisfies_triangle(
        n in 2usize..=8,
        extra in proptest::collection::vec((0usize..8, 0usize..8, 0.05f64..2.0), 0..12),
        spine in proptest::collection::vec(0.05f64..2.0, 7),
    ) {
        let mut edges: Vec<(usize, usize, f64)> =
            (1..n).map(|i| (i - 1, i, spine[i - 1])).collect();
        for (i, j, w) in extra {
            if i < n && j < n && i != j {
                edges.push((i, j, w));
            }
        }
        let s = GroundSpace::metric_closure(n, &edges).unwrap();
        for i in 0..n {
            for j in 0..n {
                for k in 0..n {
                    prop_assert!(s.dist(i, k) <= s.dist(i, j) + s.dist(j, k) + 1e-12);
                }
            }
        }
    }

    /// W1 does not see a common nonnegative addition to both marginals.
    #[test]
    fn w1_pinning_under_common_mass(
        seed in 0u64..1_000,
        m in 4usize..=20,
    ) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let s = GroundSpace::torus_1d(m).unwrap();
        let a = random_measure(&mut rng, m, 1.0);
        let b = random_measure(&mut rng, m, 1.0);
        let sigma_mass = rng.random_range(0.1..2.0);
        let sigma = random_measure(&mut rng, m, sigma_mass);
        let w = wasserstein::wasserstein_p(&s, 1.0, &a, &b).unwrap();
        let wa = a.add_scaled(&sigma, 1.0).unwrap();
        let wb = b.add_scaled(&sigma, 1.0).unwrap();
        let w_shift = wasserstein::wasserstein_p(&s, 1.0, &wa, &wb).unwrap();
        prop_assert!((w - w_shift).abs() < 1e-9, "{w} vs {w_shift}");
    }
}

fn random_measure(rng: &mut ChaCha8Rng, m: usize, mass: f64) -> AtomicMeasure {
    let mut w: Vec<f64> = (0..m).map(|_| rng.random_range(0.0..1.0)).collect();
    let s: f64 = w.iter().sum();
    for v in w.iter_mut() {
        *v *= mass / s;
    }
    AtomicMeasure::new(w).unwrap()
}

fn random_unit_pair(rng: &mut ChaCha8Rng, m: usize) -> (AtomicMeasure, AtomicMeasure) {
    (random_measure(rng, m, 1.0), random_measure(rng, m, 1.0))
}

#[test]
fn strong_duality_on_random_instances() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    for trial in 0..40 {
        let m = rng.random_range(4..=24);
        let s = if trial % 2 == 0 {
            GroundSpace::torus_1d(m).unwrap()
        } else {
            random_graph_space(&mut rng, m)
        };
        let (a, b) = random_unit_pair(&mut rng, m);
        let lam = SignedMeasure::new(a, b).unwrap();
        let gap = wasserstein::duality_gap(&s, &lam).unwrap();
        assert!(gap <= 1e-9, "trial {trial}: duality gap {gap}");
    }
}

fn random_graph_space(rng: &mut ChaCha8Rng, n: usize) -> GroundSpace {
    let mut edges: Vec<(usize, usize, f64)> =
        (1..n).map(|i| (i - 1, i, rng.random_range(0.05..1.0))).collect();
    for _ in 0..n {
        let i = rng.random_range(0..n);
        let j = rng.random_range(0..n);
        if i != j {
            edges.push((i, j, rng.random_range(0.05..1.5)));
        }
    }
    GroundSpace::metric_closure(n, &edges).unwrap()
}

/// The joint program's value is a lower bound for the transportation value at
/// any explicitly supplied common measure.
#[test]
fn joint_minimum_dominated_by_every_candidate() {
    let mut rng = ChaCha8Rng::seed_from_u64(21);
    let m = 8;
    let s = GroundSpace::torus_1d(m).unwrap();
    let cost = s.dist_pow(2.0);
    let lam = SignedMeasure::dirac_pair(&s, 0, 4).unwrap();
    let eps = 0.25;
    let joint = solver::solve_joint_min_mu(&cost, &lam, eps).unwrap();
    for _ in 0..100 {
        let mu = random_measure(&mut rng, m, 1.0);
        let a = mu.add_scaled(lam.pos(), eps).unwrap();
        let b = mu.add_scaled(lam.neg(), eps).unwrap();
        let (plan, _) = solver::solve_transportation(&cost, &a, &b).unwrap();
        assert!(
            joint.plan.value <= plan.value + 1e-9,
            "joint {} beaten by candidate {}",
            joint.plan.value,
            plan.value
        );
    }
}

#[test]
fn wasserstein_monotone_in_p_for_unit_mass() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let ps = [1.0, 1.5, 2.0, 3.0];
    for _ in 0..12 {
        let m = rng.random_range(4..=12);
        let s = GroundSpace::torus_1d(m).unwrap();
        let (a, b) = random_unit_pair(&mut rng, m);
        let values: Vec<f64> = ps
            .iter()
            .map(|&p| wasserstein::wasserstein_p(&s, p, &a, &b).unwrap())
            .collect();
        for w in values.windows(2) {
            assert!(w[0] <= w[1] + 1e-9, "W_p not monotone: {values:?}");
        }
    }
}

#[test]
fn wasserstein_metric_axioms_on_triples() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for _ in 0..10 {
        let m = rng.random_range(4..=12);
        let s = GroundSpace::torus_1d(m).unwrap();
        let (a, b) = random_unit_pair(&mut rng, m);
        let c = random_measure(&mut rng, m, 1.0);
        for p in [1.0, 2.0] {
            let ab = wasserstein::wasserstein_p(&s, p, &a, &b).unwrap();
            let ba = wasserstein::wasserstein_p(&s, p, &b, &a).unwrap();
            let ac = wasserstein::wasserstein_p(&s, p, &a, &c).unwrap();
            let cb = wasserstein::wasserstein_p(&s, p, &c, &b).unwrap();
            assert!((ab - ba).abs() < 1e-9, "symmetry p={p}");
            assert!(ab <= ac + cb + 1e-9, "triangle p={p}: {ab} vs {ac}+{cb}");
        }
    }
}

/// Exhaustive integer-flow oracle: with integer marginals every vertex of the
/// transportation polytope is integral, so enumerating integer matrices with
/// the prescribed margins finds the exact optimum.
fn enumerate_min_cost(cost: &Array2<f64>, a: &[u32], b: &[u32]) -> f64 {
    fn rec(
        cost: &Array2<f64>,
        a: &[u32],
        rem_cols: &mut Vec<u32>,
        row: usize,
        acc: f64,
        best: &mut f64,
    ) {
        if row == a.len() {
            *best = best.min(acc);
            return;
        }
        // compositions of a[row] into the columns, bounded by rem_cols
        #[allow(clippy::too_many_arguments)]
        fn fill(
            cost: &Array2<f64>,
            a: &[u32],
            rem_cols: &mut Vec<u32>,
            row: usize,
            col: usize,
            left: u32,
            acc: f64,
            best: &mut f64,
        ) {
            if acc >= *best {
                return;
            }
            if col == rem_cols.len() {
                if left == 0 {
                    rec(cost, a, rem_cols, row + 1, acc, best);
                }
                return;
            }
            let cap = left.min(rem_cols[col]);
            for put in 0..=cap {
                rem_cols[col] -= put;
                fill(
                    cost,
                    a,
                    rem_cols,
                    row,
                    col + 1,
                    left - put,
                    acc + put as f64 * cost[[row, col]],
                    best,
                );
                rem_cols[col] += put;
            }
        }
        fill(cost, a, rem_cols, row, 0, a[row], acc, best);
    }
    let mut best = f64::INFINITY;
    let mut rem = b.to_vec();
    rec(cost, a, &mut rem, 0, 0.0, &mut best);
    best
}

#[test]
fn small_support_couplings_match_enumeration() {
    let mut rng = ChaCha8Rng::seed_from_u64(13);
    for trial in 0..12 {
        let m = 4;
        let s = GroundSpace::torus_1d(8).unwrap();
        // supports on 4 of the 8 torus points, integer masses in 1/8 units
        let idx: Vec<usize> = (0..m).map(|k| 2 * k + (trial % 2)).collect();
        let total = 8u32;
        let a_units = random_composition(&mut rng, total, m);
        let b_units = random_composition(&mut rng, total, m);
        let cost = Array2::from_shape_fn((m, m), |(i, j)| {
            s.dist(idx[i], idx[j]).powf(2.0)
        });
        let unit = 1.0 / total as f64;
        let a = AtomicMeasure::new(a_units.iter().map(|&u| u as f64 * unit).collect()).unwrap();
        let b = AtomicMeasure::new(b_units.iter().map(|&u| u as f64 * unit).collect()).unwrap();
        let (plan, _) = solver::solve_transportation(&cost, &a, &b).unwrap();
        let oracle = unit * enumerate_min_cost(&cost, &a_units, &b_units);
        assert!(
            (plan.value - oracle).abs() < 1e-10,
            "trial {trial}: LP {} vs enumeration {oracle}",
            plan.value
        );
    }
}

fn random_composition(rng: &mut ChaCha8Rng, total: u32, parts: usize) -> Vec<u32> {
    let mut v = vec![0u32; parts];
    for _ in 0..total {
        v[rng.random_range(0..parts)] += 1;
    }
    v
}

/// Transportation duals satisfy u.a + v.b = value on random instances.
#[test]
fn transportation_strong_duality() {
    let mut rng = ChaCha8Rng::seed_from_u64(31);
    for trial in 0..25 {
        let m = rng.random_range(4..=50);
        let s = GroundSpace::torus_1d(m).unwrap();
        let p = if trial % 2 == 0 { 1.0 } else { 2.0 };
        let cost = s.dist_pow(p);
        let (a, b) = random_unit_pair(&mut rng, m);
        let (plan, duals) = solver::solve_transportation(&cost, &a, &b).unwrap();
        let dual_value: f64 = duals
            .source
            .iter()
            .zip(a.weights())
            .chain(duals.target.iter().zip(b.weights()))
            .map(|(y, w)| y * w)
            .sum();
        assert!(
            (dual_value - plan.value).abs() <= 1e-9,
            "m={m} p={p}: dual {dual_value} vs primal {}",
            plan.value
        );
    }
}

/// Dual potentials certify the primal value on random instances.
#[test]
fn dual_potentials_are_feasible_certificates() {
    let mut rng = ChaCha8Rng::seed_from_u64(29);
    for _ in 0..10 {
        let m = rng.random_range(4..=16);
        let s = GroundSpace::torus_1d(m).unwrap();
        let (a, b) = random_unit_pair(&mut rng, m);
        let lam = SignedMeasure::new(a, b).unwrap();
        let pot = wasserstein::w1_dual(&s, &lam).unwrap();
        assert!(pot.lipschitz_excess(&s) <= 1e-12);
        assert_eq!(pot.phi[0], 0.0);
        let pairing = lam.pair(&pot.phi);
        assert!((pairing - pot.value).abs() < 1e-12);
    }
}
