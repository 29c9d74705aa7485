//! Finite ground spaces: point sets with a validated geodesic distance matrix.

use crate::error::{Error, Result};
use ndarray::Array2;
use serde::{Deserialize, Serialize};

/// How the space was built. Grid kinds carry the topology needed by the
/// shared forward-difference gradient; general metric spaces have none.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum SpaceKind {
    /// Uniform grid on the unit circle, spacing 1/m, wrap-around neighbours.
    Torus1d,
    /// Uniform grid on [0,1], spacing 1/(m-1).
    Interval,
    /// Arbitrary finite metric space (no grid structure).
    General,
}

/// A finite metric space: points with pairwise geodesic distances.
///
/// Invariants checked at construction: zero diagonal, symmetry, finiteness,
/// and the full triangle inequality over all triples.
#[derive(Debug, Clone)]
pub struct GroundSpace {
    points: Vec<Vec<f64>>,
    dist: Array2<f64>,
    kind: SpaceKind,
}

const SYM_TOL: f64 = 1e-12;
const TRIANGLE_TOL: f64 = 1e-12;

impl GroundSpace {
    /// Uniform m-point grid on the unit-circumference circle.
    ///
    /// Points are i/m; distances are arc lengths min(|i-j|, m-|i-j|)/m.
    pub fn torus_1d(m: usize) -> Result<Self> {
        if m < 2 {
            return Err(Error::InvalidInput(format!(
                "torus grid needs at least 2 points, got {m}"
            )));
        }
        let points = (0..m).map(|i| vec![i as f64 / m as f64]).collect();
        let mut dist = Array2::zeros((m, m));
        for i in 0..m {
            for j in 0..m {
                let d = i.abs_diff(j);
                dist[[i, j]] = d.min(m - d) as f64 / m as f64;
            }
        }
        Self::validated(points, dist, SpaceKind::Torus1d)
    }

    /// Uniform m-point grid on [0,1] with endpoints included.
    pub fn interval(m: usize) -> Result<Self> {
        if m < 2 {
            return Err(Error::InvalidInput(format!(
                "interval grid needs at least 2 points, got {m}"
            )));
        }
        let h = 1.0 / (m - 1) as f64;
        let points = (0..m).map(|i| vec![i as f64 * h]).collect();
        let mut dist = Array2::zeros((m, m));
        for i in 0..m {
            for j in 0..m {
                dist[[i, j]] = i.abs_diff(j) as f64 * h;
            }
        }
        Self::validated(points, dist, SpaceKind::Interval)
    }

    /// Metric closure of a weighted undirected graph: all-pairs shortest paths.
    ///
    /// Nodes are 0..n; rejects non-positive weights and disconnected graphs.
    pub fn metric_closure(n: usize, edges: &[(usize, usize, f64)]) -> Result<Self> {
        if n < 2 {
            return Err(Error::InvalidInput(format!(
                "metric closure needs at least 2 nodes, got {n}"
            )));
        }
        let mut dist = Array2::from_elem((n, n), f64::INFINITY);
        for i in 0..n {
            dist[[i, i]] = 0.0;
        }
        for &(i, j, w) in edges {
            if i >= n || j >= n {
                return Err(Error::InvalidInput(format!(
                    "edge ({i},{j}) out of range for {n} nodes"
                )));
            }
            if !(w > 0.0) || !w.is_finite() {
                return Err(Error::InvalidInput(format!(
                    "edge ({i},{j}) has non-positive weight {w}"
                )));
            }
            if w < dist[[i, j]] {
                dist[[i, j]] = w;
                dist[[j, i]] = w;
            }
        }
        // Floyd-Warshall
        for k in 0..n {
            for i in 0..n {
                let dik = dist[[i, k]];
                if !dik.is_finite() {
                    continue;
                }
                for j in 0..n {
                    let through = dik + dist[[k, j]];
                    if through < dist[[i, j]] {
                        dist[[i, j]] = through;
                    }
                }
            }
        }
        for i in 0..n {
            for j in 0..n {
                if !dist[[i, j]].is_finite() {
                    return Err(Error::Disconnected(i, j));
                }
            }
        }
        let points = (0..n).map(|i| vec![i as f64]).collect();
        Self::validated(points, dist, SpaceKind::General)
    }

    /// Wrap an explicit distance matrix, re-checking every invariant.
    pub fn from_parts(points: Vec<Vec<f64>>, dist: Array2<f64>, kind: SpaceKind) -> Result<Self> {
        Self::validated(points, dist, kind)
    }

    fn validated(points: Vec<Vec<f64>>, dist: Array2<f64>, kind: SpaceKind) -> Result<Self> {
        let m = points.len();
        if dist.nrows() != m || dist.ncols() != m {
            return Err(Error::InvalidInput(format!(
                "distance matrix is {}x{} but there are {m} points",
                dist.nrows(),
                dist.ncols()
            )));
        }
        for i in 0..m {
            if dist[[i, i]] != 0.0 {
                return Err(Error::InvalidInput(format!(
                    "dist[{i}][{i}] = {} is not zero",
                    dist[[i, i]]
                )));
            }
            for j in 0..m {
                let d = dist[[i, j]];
                if !d.is_finite() || d < 0.0 {
                    return Err(Error::InvalidInput(format!(
                        "dist[{i}][{j}] = {d} is not a finite nonnegative real"
                    )));
                }
                if (d - dist[[j, i]]).abs() > SYM_TOL {
                    return Err(Error::InvalidInput(format!(
                        "distance matrix is not symmetric at ({i},{j})"
                    )));
                }
            }
        }
        for i in 0..m {
            for j in 0..m {
                let dij = dist[[i, j]];
                for k in 0..m {
                    if dist[[i, k]] > dij + dist[[j, k]] + TRIANGLE_TOL {
                        return Err(Error::InvalidInput(format!(
                            "triangle inequality fails on ({i},{j},{k})"
                        )));
                    }
                }
            }
        }
        Ok(Self { points, dist, kind })
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn kind(&self) -> SpaceKind {
        self.kind
    }

    pub fn points(&self) -> &[Vec<f64>] {
        &self.points
    }

    /// First coordinate of every point (the natural coordinate for 1-d grids).
    pub fn coords(&self) -> Vec<f64> {
        self.points.iter().map(|p| p[0]).collect()
    }

    pub fn dist(&self, i: usize, j: usize) -> f64 {
        self.dist[[i, j]]
    }

    pub fn dist_matrix(&self) -> &Array2<f64> {
        &self.dist
    }

    /// Entrywise power of the distance matrix, the cost of the p-Wasserstein problem.
    pub fn dist_pow(&self, p: f64) -> Array2<f64> {
        self.dist.mapv(|d| d.powf(p))
    }

    /// Grid spacing for grid kinds.
    pub fn grid_step(&self) -> Result<f64> {
        match self.kind {
            SpaceKind::Torus1d => Ok(1.0 / self.len() as f64),
            SpaceKind::Interval => Ok(1.0 / (self.len() - 1) as f64),
            SpaceKind::General => Err(Error::InvalidInput(
                "general metric spaces have no grid spacing".into(),
            )),
        }
    }

    /// Shared forward-difference gradient used by every operation that needs
    /// a discrete dφ. On the torus the last node wraps; on the interval the
    /// last node reuses the backward difference so each node carries a slope.
    pub fn forward_gradient(&self, phi: &[f64]) -> Result<Vec<f64>> {
        let m = self.len();
        if phi.len() != m {
            return Err(Error::InvalidInput(format!(
                "potential has {} entries for a {m}-point space",
                phi.len()
            )));
        }
        let h = self.grid_step()?;
        let mut g = vec![0.0; m];
        match self.kind {
            SpaceKind::Torus1d => {
                for i in 0..m {
                    g[i] = (phi[(i + 1) % m] - phi[i]) / h;
                }
            }
            SpaceKind::Interval => {
                for i in 0..m - 1 {
                    g[i] = (phi[i + 1] - phi[i]) / h;
                }
                g[m - 1] = g[m - 2];
            }
            SpaceKind::General => unreachable!("grid_step rejected general spaces"),
        }
        Ok(g)
    }
}

/// Serialization schema: `{"points": [[x,...],...], "dist": [[...],...]}`.
#[derive(Serialize, Deserialize)]
struct GroundSpaceDto {
    points: Vec<Vec<f64>>,
    dist: Vec<Vec<f64>>,
    #[serde(default = "default_kind")]
    kind: SpaceKind,
}

fn default_kind() -> SpaceKind {
    SpaceKind::General
}

impl Serialize for GroundSpace {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        let dto = GroundSpaceDto {
            points: self.points.clone(),
            dist: self.dist.rows().into_iter().map(|r| r.to_vec()).collect(),
            kind: self.kind,
        };
        dto.serialize(s)
    }
}

impl<'de> Deserialize<'de> for GroundSpace {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let dto = GroundSpaceDto::deserialize(d)?;
        let m = dto.points.len();
        let mut dist = Array2::zeros((m, m));
        if dto.dist.len() != m {
            return Err(serde::de::Error::custom("dist row count mismatch"));
        }
        for (i, row) in dto.dist.iter().enumerate() {
            if row.len() != m {
                return Err(serde::de::Error::custom("dist column count mismatch"));
            }
            for (j, &v) in row.iter().enumerate() {
                dist[[i, j]] = v;
            }
        }
        GroundSpace::validated(dto.points, dist, dto.kind).map_err(serde::de::Error::custom)
    }
}
