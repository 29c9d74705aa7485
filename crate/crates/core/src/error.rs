use thiserror::Error;

/// Errors surfaced by construction and solver entry points.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    /// The two sides of a transport problem carry different total mass.
    #[error("unbalanced masses: |a| = {a}, |b| = {b}, gap = {gap:e}")]
    Unbalanced { a: f64, b: f64, gap: f64 },

    #[error("graph is disconnected: no path between nodes {0} and {1}")]
    Disconnected(usize, usize),

    #[error("linear program is infeasible (phase-1 residual {0:e})")]
    Infeasible(f64),

    #[error("linear program is unbounded below")]
    Unbounded,

    /// Post-solve certification failed (residual or duality check out of tolerance).
    #[error("numerical failure: {0}")]
    Numerical(String),
}

pub type Result<T> = std::result::Result<T, Error>;
