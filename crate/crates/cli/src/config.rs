//! Declarative experiment configuration: a versioned JSON document naming a
//! catalogued space builder, cost model, signed measure, and sweep controls.

use otlimits_core::lagrangian::CostModel;
use otlimits_core::measure::{AtomicMeasure, SignedMeasure};
use otlimits_core::space::GroundSpace;
use serde::{Deserialize, Serialize};

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub schema: u32,
    pub space: SpaceSpec,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub model: Option<ModelSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lambda: Option<LambdaSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mu: Option<MuSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sweep: Option<SweepSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub energy_grid: Option<GridSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub time_grid: Option<GridSpec>,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct SpaceSpec {
    pub builder: String,
    pub m: usize,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct ModelSpec {
    pub kind: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub p: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub potential: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub amplitude: Option<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct LambdaSpec {
    pub atoms: Vec<Atom>,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct Atom {
    pub index: usize,
    pub weight: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct MuSpec {
    pub kind: String,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub atoms: Vec<Atom>,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct SweepSpec {
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub n_list: Vec<u32>,
    #[serde(default = "default_t")]
    pub t: f64,
    #[serde(default = "default_p")]
    pub p: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub bellman_steps: Option<usize>,
}

fn default_t() -> f64 {
    1.0
}

fn default_p() -> f64 {
    2.0
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct GridSpec {
    pub lo: f64,
    pub hi: f64,
    pub points: usize,
}

/// Configuration or input errors: exit code 2, message names the invariant.
#[derive(Debug)]
pub struct ValidationError(pub String);

impl std::fmt::Display for ValidationError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}", self.0)
    }
}

impl ExperimentConfig {
    pub fn from_path(path: &std::path::Path) -> Result<Self, ValidationError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| ValidationError(format!("cannot read config {}: {e}", path.display())))?;
        let cfg: ExperimentConfig = serde_json::from_str(&text)
            .map_err(|e| ValidationError(format!("config does not parse: {e}")))?;
        if cfg.schema != SCHEMA_VERSION {
            return Err(ValidationError(format!(
                "unsupported schema version {} (expected {SCHEMA_VERSION})",
                cfg.schema
            )));
        }
        Ok(cfg)
    }

    pub fn build_space(&self) -> Result<GroundSpace, ValidationError> {
        let m = self.space.m;
        match self.space.builder.as_str() {
            "torus" => GroundSpace::torus_1d(m),
            "interval" => GroundSpace::interval(m),
            other => {
                return Err(ValidationError(format!(
                    "unknown space builder \"{other}\" (catalogue: torus, interval)"
                )))
            }
        }
        .map_err(|e| ValidationError(e.to_string()))
    }

    pub fn build_model(&self, space: &GroundSpace) -> Result<CostModel, ValidationError> {
        let spec = self
            .model
            .as_ref()
            .ok_or_else(|| ValidationError("experiment requires a \"model\" section".into()))?;
        match spec.kind.as_str() {
            "homogeneous" => {
                let p = spec.p.unwrap_or(2.0);
                CostModel::homogeneous(p).map_err(|e| ValidationError(e.to_string()))
            }
            "mechanical" => {
                let name = spec.potential.as_deref().unwrap_or("cosine");
                let amp = spec.amplitude.unwrap_or(1.0);
                let v = potential_from_catalogue(name, amp, space)?;
                CostModel::mechanical(v).map_err(|e| ValidationError(e.to_string()))
            }
            other => Err(ValidationError(format!(
                "unknown model kind \"{other}\" (catalogue: homogeneous, mechanical)"
            ))),
        }
    }

    pub fn build_lambda(&self, space: &GroundSpace) -> Result<SignedMeasure, ValidationError> {
        let spec = self
            .lambda
            .as_ref()
            .ok_or_else(|| ValidationError("experiment requires a \"lambda\" section".into()))?;
        let m = space.len();
        let mut pos = vec![0.0; m];
        let mut neg = vec![0.0; m];
        for atom in &spec.atoms {
            if atom.index >= m {
                return Err(ValidationError(format!(
                    "lambda atom index {} out of range for {m} points",
                    atom.index
                )));
            }
            if atom.weight >= 0.0 {
                pos[atom.index] += atom.weight;
            } else {
                neg[atom.index] -= atom.weight;
            }
        }
        let pos = AtomicMeasure::new(pos).map_err(|e| ValidationError(e.to_string()))?;
        let neg = AtomicMeasure::new(neg).map_err(|e| ValidationError(e.to_string()))?;
        SignedMeasure::new(pos, neg).map_err(|e| ValidationError(e.to_string()))
    }

    pub fn build_mu(&self, space: &GroundSpace) -> Result<AtomicMeasure, ValidationError> {
        let spec = self
            .mu
            .as_ref()
            .ok_or_else(|| ValidationError("experiment requires a \"mu\" section".into()))?;
        match spec.kind.as_str() {
            "uniform" => Ok(AtomicMeasure::uniform(space)),
            "atoms" => {
                let mut w = vec![0.0; space.len()];
                for atom in &spec.atoms {
                    if atom.index >= space.len() {
                        return Err(ValidationError(format!(
                            "mu atom index {} out of range",
                            atom.index
                        )));
                    }
                    w[atom.index] += atom.weight;
                }
                AtomicMeasure::new(w).map_err(|e| ValidationError(e.to_string()))
            }
            other => Err(ValidationError(format!(
                "unknown mu kind \"{other}\" (catalogue: uniform, atoms)"
            ))),
        }
    }

    pub fn sweep(&self) -> Result<&SweepSpec, ValidationError> {
        self.sweep
            .as_ref()
            .ok_or_else(|| ValidationError("experiment requires a \"sweep\" section".into()))
    }

    pub fn energy_grid_values(&self) -> Vec<f64> {
        grid_values(self.energy_grid.as_ref(), 1e-6, 3.0, 21)
    }

    pub fn time_grid_values(&self) -> Vec<f64> {
        let spec = self.time_grid.as_ref();
        let (lo, hi, n) = spec
            .map(|g| (g.lo, g.hi, g.points))
            .unwrap_or((1e-3, 4.0, 25));
        otlimits_core::lagrangian::log_t_grid(lo, hi, n)
    }
}

fn grid_values(spec: Option<&GridSpec>, lo: f64, hi: f64, n: usize) -> Vec<f64> {
    let (lo, hi, n) = spec.map(|g| (g.lo, g.hi, g.points)).unwrap_or((lo, hi, n));
    (0..n)
        .map(|k| lo + (hi - lo) * k as f64 / (n.max(2) - 1) as f64)
        .collect()
}

/// Potentials are restricted to a fixed catalogue so configs stay
/// declarative: cosine, constant, two_well.
pub fn potential_from_catalogue(
    name: &str,
    amplitude: f64,
    space: &GroundSpace,
) -> Result<Vec<f64>, ValidationError> {
    let coords = space.coords();
    let tau = 2.0 * std::f64::consts::PI;
    match name {
        "cosine" => Ok(coords.iter().map(|x| amplitude * (tau * x).cos()).collect()),
        "constant" => Ok(vec![amplitude; space.len()]),
        "two_well" => Ok(coords
            .iter()
            .map(|x| amplitude * (2.0 * tau * x).cos())
            .collect()),
        other => Err(ValidationError(format!(
            "unknown potential \"{other}\" (catalogue: cosine, constant, two_well)"
        ))),
    }
}
