//! Atomic measures on a finite ground space and balanced signed differences.

use crate::error::{Error, Result};
use crate::space::GroundSpace;
use serde::{Deserialize, Serialize};

/// Tolerance for the mass-balance invariant of a signed measure.
/// Callers are expected to pre-normalize; this only absorbs rounding.
pub const MASS_BALANCE_TOL: f64 = 1e-12;

/// Nonnegative weights on the points of a ground space.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AtomicMeasure {
    weights: Vec<f64>,
}

impl AtomicMeasure {
    pub fn new(weights: Vec<f64>) -> Result<Self> {
        for (i, &w) in weights.iter().enumerate() {
            if !w.is_finite() || w < 0.0 {
                return Err(Error::InvalidInput(format!(
                    "weight[{i}] = {w} is not a finite nonnegative real"
                )));
            }
        }
        Ok(Self { weights })
    }

    /// Unit point mass at index i.
    pub fn dirac(space: &GroundSpace, i: usize) -> Result<Self> {
        if i >= space.len() {
            return Err(Error::InvalidInput(format!(
                "dirac index {i} out of range for {} points",
                space.len()
            )));
        }
        let mut weights = vec![0.0; space.len()];
        weights[i] = 1.0;
        Ok(Self { weights })
    }

    /// Probability measure with weight 1/m everywhere.
    pub fn uniform(space: &GroundSpace) -> Self {
        let m = space.len();
        Self {
            weights: vec![1.0 / m as f64; m],
        }
    }

    pub fn zeros(m: usize) -> Self {
        Self {
            weights: vec![0.0; m],
        }
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn weight(&self, i: usize) -> f64 {
        self.weights[i]
    }

    pub fn total_mass(&self) -> f64 {
        self.weights.iter().sum()
    }

    /// self + c * other, entrywise.
    pub fn add_scaled(&self, other: &AtomicMeasure, c: f64) -> Result<Self> {
        if self.len() != other.len() {
            return Err(Error::InvalidInput(
                "measures live on different spaces".into(),
            ));
        }
        let weights = self
            .weights
            .iter()
            .zip(&other.weights)
            .map(|(a, b)| a + c * b)
            .collect();
        Self::new(weights)
    }

    pub fn scale(&self, c: f64) -> Result<Self> {
        Self::new(self.weights.iter().map(|w| w * c).collect())
    }

    /// Total-variation distance to another measure: half the l1 gap.
    pub fn tv_distance(&self, other: &AtomicMeasure) -> f64 {
        0.5 * self
            .weights
            .iter()
            .zip(&other.weights)
            .map(|(a, b)| (a - b).abs())
            .sum::<f64>()
    }

    /// Running sums of the weights (discrete CDF along the index order).
    pub fn cdf(&self) -> Vec<f64> {
        let mut acc = 0.0;
        self.weights
            .iter()
            .map(|w| {
                acc += w;
                acc
            })
            .collect()
    }
}

/// A balanced difference of nonnegative measures: pos and neg carry equal mass.
#[derive(Debug, Clone, Serialize)]
pub struct SignedMeasure {
    pos: AtomicMeasure,
    neg: AtomicMeasure,
}

impl SignedMeasure {
    pub fn new(pos: AtomicMeasure, neg: AtomicMeasure) -> Result<Self> {
        if pos.len() != neg.len() {
            return Err(Error::InvalidInput(
                "positive and negative parts live on different spaces".into(),
            ));
        }
        let (mp, mn) = (pos.total_mass(), neg.total_mass());
        let gap = (mp - mn).abs();
        if gap > MASS_BALANCE_TOL {
            return Err(Error::Unbalanced {
                a: mp,
                b: mn,
                gap,
            });
        }
        Ok(Self { pos, neg })
    }

    /// δ_i - δ_j on the given space.
    pub fn dirac_pair(space: &GroundSpace, i: usize, j: usize) -> Result<Self> {
        Self::new(AtomicMeasure::dirac(space, i)?, AtomicMeasure::dirac(space, j)?)
    }

    pub fn len(&self) -> usize {
        self.pos.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pos.is_empty()
    }

    pub fn pos(&self) -> &AtomicMeasure {
        &self.pos
    }

    pub fn neg(&self) -> &AtomicMeasure {
        &self.neg
    }

    /// Signed weights pos - neg.
    pub fn net(&self) -> Vec<f64> {
        self.pos
            .weights
            .iter()
            .zip(&self.neg.weights)
            .map(|(p, n)| p - n)
            .collect()
    }

    /// Sum of all stored weights, |pos| + |neg|.
    pub fn stored_mass(&self) -> f64 {
        self.pos.total_mass() + self.neg.total_mass()
    }

    /// Pairing ∫ φ dλ.
    pub fn pair(&self, phi: &[f64]) -> f64 {
        self.net().iter().zip(phi).map(|(l, p)| l * p).sum()
    }
}
