//! Shared helpers for the benchmark targets.

use otlimits_core::measure::AtomicMeasure;
use otlimits_core::space::GroundSpace;

pub fn torus(m: usize) -> GroundSpace {
    GroundSpace::torus_1d(m).expect("m >= 2")
}

/// Deterministic pseudo-random probability weights.
pub fn seeded_measure(m: usize, seed: u64) -> AtomicMeasure {
    let mut state = seed.wrapping_mul(0x9e3779b97f4a7c15).wrapping_add(1);
    let mut w = Vec::with_capacity(m);
    for _ in 0..m {
        state = state
            .wrapping_mul(6364136223846793005)
            .wrapping_add(1442695040888963407);
        w.push(((state >> 33) as f64) / (u32::MAX as f64) + 1e-3);
    }
    let s: f64 = w.iter().sum();
    AtomicMeasure::new(w.into_iter().map(|v| v / s).collect()).unwrap()
}
