//! Experiment execution: each subcommand builds its inputs from the config,
//! runs the corresponding library routines, and emits JSON plus CSV/plot
//! files into the output directory.

use crate::config::{ExperimentConfig, ValidationError};
use crate::report;
use otlimits_core::lagrangian::{self, CostModel};
use otlimits_core::limits::{self, AscentParams};
use otlimits_core::measure::AtomicMeasure;
use otlimits_core::wasserstein;
use otlimits_core::Error as CoreError;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::{json, Value};
use std::path::Path;

pub enum RunError {
    /// Exit code 2: the config or its referenced data violates an invariant.
    Validation(String),
    /// Exit code 3: a solver failed on validated input.
    Solver(String),
}

impl From<ValidationError> for RunError {
    fn from(e: ValidationError) -> Self {
        RunError::Validation(e.0)
    }
}

impl From<CoreError> for RunError {
    fn from(e: CoreError) -> Self {
        match e {
            CoreError::InvalidInput(_) | CoreError::Unbalanced { .. } | CoreError::Disconnected(_, _) => {
                RunError::Validation(e.to_string())
            }
            CoreError::Infeasible(_) | CoreError::Unbounded | CoreError::Numerical(_) => {
                RunError::Solver(e.to_string())
            }
        }
    }
}

const DEFAULT_ASCENT_ITERS: usize = 200_000;

pub fn run(
    name: &str,
    cfg: &ExperimentConfig,
    out_dir: &Path,
    seed: u64,
) -> Result<Value, RunError> {
    std::fs::create_dir_all(out_dir)
        .map_err(|e| RunError::Validation(format!("cannot create output dir: {e}")))?;
    let result = match name {
        "w1" => run_w1(cfg),
        "wp" => run_wp(cfg),
        "sweep" => run_sweep(cfg, out_dir),
        "conditional" => run_conditional(cfg),
        "weakkam" => run_weakkam(cfg, out_dir, seed),
        "transport-measure" => run_transport_measure(cfg, out_dir),
        "th1-check" => run_th1_check(cfg),
        "th5-check" => run_th5_check(cfg),
        "liminf-check" => run_liminf_check(cfg, out_dir),
        other => Err(RunError::Validation(format!("unknown experiment {other}"))),
    }?;
    write_text(
        out_dir.join("result.json"),
        &format!("{}\n", serde_json::to_string_pretty(&result).expect("serializable")),
    )?;
    Ok(result)
}

fn write_text(path: std::path::PathBuf, text: &str) -> Result<(), RunError> {
    std::fs::write(&path, text)
        .map_err(|e| RunError::Validation(format!("cannot write {}: {e}", path.display())))
}

fn run_w1(cfg: &ExperimentConfig) -> Result<Value, RunError> {
    let space = cfg.build_space()?;
    let lam = cfg.build_lambda(&space)?;
    let primal = wasserstein::wasserstein_p(&space, 1.0, lam.pos(), lam.neg())?;
    let dual = wasserstein::w1_dual(&space, &lam)?;
    Ok(json!({
        "experiment": "w1",
        "value": primal,
        "dual_value": dual.value,
        "gap": (primal - dual.value).abs(),
        "phi": dual.phi,
    }))
}

fn run_wp(cfg: &ExperimentConfig) -> Result<Value, RunError> {
    let space = cfg.build_space()?;
    let lam = cfg.build_lambda(&space)?;
    let p = cfg.sweep().map(|s| s.p).unwrap_or(2.0);
    let value = wasserstein::wasserstein_p(&space, p, lam.pos(), lam.neg())?;
    Ok(json!({
        "experiment": "wp",
        "p": p,
        "value": value,
    }))
}

fn run_sweep(cfg: &ExperimentConfig, out_dir: &Path) -> Result<Value, RunError> {
    let space = cfg.build_space()?;
    let lam = cfg.build_lambda(&space)?;
    let sweep = cfg.sweep()?;
    if sweep.n_list.is_empty() {
        return Err(RunError::Validation("sweep requires a nonempty n_list".into()));
    }
    let rep = limits::epsilon_sweep(&space, sweep.p, &lam, &sweep.n_list)?;
    write_text(out_dir.join("table.csv"), &report::emit_table(&rep))?;
    write_text(out_dir.join("plot.dat"), &report::emit_plotdata(&rep))?;
    Ok(json!({
        "experiment": "sweep",
        "p": sweep.p,
        "n_values": rep.n_values,
        "scaled_values": rep.scaled_values,
        "extrapolated_limit": rep.extrapolated_limit,
        "observed_rate": rep.observed_rate,
    }))
}

fn run_conditional(cfg: &ExperimentConfig) -> Result<Value, RunError> {
    let space = cfg.build_space()?;
    let lam = cfg.build_lambda(&space)?;
    let mu = cfg.build_mu(&space)?;
    let model = cfg.build_model(&space)?;
    let sweep = cfg.sweep()?;
    let sol = limits::conditional_action(
        &space,
        &model,
        &lam,
        &mu,
        AscentParams {
            t: sweep.t,
            max_iter: DEFAULT_ASCENT_ITERS,
            ..Default::default()
        },
    )?;
    let conditional_wp = match model {
        CostModel::Homogeneous { p } => {
            Some(limits::conditional_w1p(&space, &lam, &mu, p, DEFAULT_ASCENT_ITERS)?)
        }
        CostModel::Mechanical { .. } => None,
    };
    Ok(json!({
        "experiment": "conditional",
        "t": sweep.t,
        "value": sol.value,
        "converged": sol.converged,
        "iterations": sol.iterations,
        "h_max": sol.h_max,
        "phi": sol.phi,
        "conditional_wp": conditional_wp,
    }))
}

fn run_weakkam(cfg: &ExperimentConfig, out_dir: &Path, seed: u64) -> Result<Value, RunError> {
    let space = cfg.build_space()?;
    let model = cfg.build_model(&space)?;
    let sweep = cfg.sweep()?;
    let steps = sweep.bellman_steps.unwrap_or(space.len());
    let (ubar, mather) = lagrangian::ubar_and_mather(&space, &model, sweep.t, steps)?;
    // sandwich against low-amplitude cosine test potentials
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let tau = 2.0 * std::f64::consts::PI;
    let coords = space.coords();
    let mut min_bound = f64::INFINITY;
    for _ in 0..20 {
        let amp: f64 = rng.random_range(0.02..0.15);
        let phi: Vec<f64> = coords.iter().map(|x| amp * (tau * x).cos()).collect();
        min_bound = min_bound.min(lagrangian::effective_h_bound(&space, &model, &phi)?);
    }
    write_text(
        out_dir.join("weights.csv"),
        &report::emit_weights_table(mather.weights()),
    )?;
    Ok(json!({
        "experiment": "weakkam",
        "t": sweep.t,
        "bellman_steps": steps,
        "ubar": ubar,
        "min_h_bound": min_bound,
        "sandwich_gap": min_bound - ubar,
        "mather_weights": mather.weights(),
    }))
}

fn run_transport_measure(cfg: &ExperimentConfig, out_dir: &Path) -> Result<Value, RunError> {
    let space = cfg.build_space()?;
    let lam = cfg.build_lambda(&space)?;
    let sweep = cfg.sweep()?;
    if sweep.n_list.is_empty() {
        return Err(RunError::Validation(
            "transport-measure requires a nonempty n_list".into(),
        ));
    }
    let res = limits::transport_measure(&space, &lam, &sweep.n_list)?;
    write_text(
        out_dir.join("weights.csv"),
        &report::emit_weights_table(res.mu.weights()),
    )?;
    Ok(json!({
        "experiment": "transport-measure",
        "n": sweep.n_list.last(),
        "mu_weights": res.mu.weights(),
        "tv_diagnostic": res.tv_diagnostic,
    }))
}

fn run_th1_check(cfg: &ExperimentConfig) -> Result<Value, RunError> {
    let space = cfg.build_space()?;
    let lam = cfg.build_lambda(&space)?;
    let model = cfg.build_model(&space)?;
    let p = match model {
        CostModel::Homogeneous { p } => p,
        CostModel::Mechanical { .. } => {
            return Err(RunError::Validation(
                "th1-check compares closed forms available for the homogeneous model only".into(),
            ))
        }
    };
    let sweep = cfg.sweep()?;
    let t = sweep.t;
    let via_energy = limits::modified_action_via_energy(
        &space,
        &model,
        &lam,
        t,
        &cfg.energy_grid_values(),
        &cfg.time_grid_values(),
    )?;
    let w1 = wasserstein::w1_dual(&space, &lam)?.value;
    let closed_form = w1.powf(p) / ((p - 1.0) * t.powf(p - 1.0));
    let via_sweep = if sweep.n_list.len() >= 2 {
        let rep = limits::epsilon_sweep(&space, p, &lam, &sweep.n_list)?;
        Some(rep.extrapolated_limit.powf(p) / ((p - 1.0) * t.powf(p - 1.0)))
    } else {
        None
    };
    let scale = closed_form.abs().max(1e-12);
    let max_rel_dev = via_sweep
        .iter()
        .chain(std::iter::once(&via_energy))
        .map(|v| (v - closed_form).abs() / scale)
        .fold(0.0f64, f64::max);
    Ok(json!({
        "experiment": "th1-check",
        "t": t,
        "via_energy": via_energy,
        "closed_form": closed_form,
        "via_sweep": via_sweep,
        "max_rel_dev": max_rel_dev,
    }))
}

fn run_th5_check(cfg: &ExperimentConfig) -> Result<Value, RunError> {
    let space = cfg.build_space()?;
    let lam = cfg.build_lambda(&space)?;
    let model = cfg.build_model(&space)?;
    let sweep = cfg.sweep()?;
    let mut candidates = vec![AtomicMeasure::uniform(&space)];
    let mut names = vec!["uniform".to_string()];
    if !sweep.n_list.is_empty() {
        let tm = limits::transport_measure(&space, &lam, &sweep.n_list)?;
        candidates.push(tm.mu);
        names.push("transport_measure".into());
    }
    candidates.push(
        AtomicMeasure::dirac(&space, space.len() / 2).map_err(RunError::from)?,
    );
    names.push("point_mass".into());
    let check = limits::conditional_spotcheck(
        &space,
        &model,
        &lam,
        sweep.t,
        &candidates,
        &cfg.energy_grid_values(),
        &cfg.time_grid_values(),
        4_000,
    )?;
    Ok(json!({
        "experiment": "th5-check",
        "t": sweep.t,
        "candidates": names,
        "candidate_values": check.candidate_values,
        "min_over_candidates": check.min_over_candidates,
        "unconditional": check.unconditional,
    }))
}

fn run_liminf_check(cfg: &ExperimentConfig, out_dir: &Path) -> Result<Value, RunError> {
    let space = cfg.build_space()?;
    let lam = cfg.build_lambda(&space)?;
    let mu = cfg.build_mu(&space)?;
    let sweep = cfg.sweep()?;
    if sweep.n_list.is_empty() {
        return Err(RunError::Validation(
            "liminf-check requires a nonempty n_list".into(),
        ));
    }
    let rows = limits::liminf_check(
        &space,
        sweep.p,
        &lam,
        &mu,
        sweep.t,
        &sweep.n_list,
        DEFAULT_ASCENT_ITERS,
    )?;
    write_text(out_dir.join("table.csv"), &report::emit_liminf_table(&rows))?;
    let violations = rows.iter().filter(|r| r.margin < -r.slack).count();
    Ok(json!({
        "experiment": "liminf-check",
        "t": sweep.t,
        "p": sweep.p,
        "rows": rows,
        "violations": violations,
    }))
}
