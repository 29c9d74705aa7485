// Guards written as !(x > 0.0) intentionally reject NaN along with the
// out-of-range values.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

//! Exact optimal-transport kernels on finite ground spaces, with the
//! Lagrangian-action machinery needed to study scaled transport limits:
//! Wasserstein distances and their Kantorovich dual, circulation and joint
//! minimum-measure programs, energy-indexed metrics, conditional actions,
//! and sweep diagnostics.

pub mod error;
pub mod lagrangian;
pub mod limits;
pub mod measure;
pub mod solver;
pub mod space;
pub mod wasserstein;

pub use error::{Error, Result};
pub use lagrangian::{ActionTable, CostModel};
pub use measure::{AtomicMeasure, SignedMeasure};
pub use solver::{JointSolution, TransportPlan};
pub use space::{GroundSpace, SpaceKind};
pub use wasserstein::DualPotential;

use ndarray::Array2;
use serde::ser::SerializeSeq;

/// Serialize an ndarray matrix as nested JSON arrays (the documented schema).
pub(crate) fn serialize_matrix<S: serde::Serializer>(
    m: &Array2<f64>,
    s: S,
) -> std::result::Result<S::Ok, S::Error> {
    let mut seq = s.serialize_seq(Some(m.nrows()))?;
    for row in m.rows() {
        seq.serialize_element(&row.to_vec())?;
    }
    seq.end()
}
