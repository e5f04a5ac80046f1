//! Batch experiment runner behind the `odeq` binary.
//!
//! Every subcommand reads one JSON config, computes everything in memory and
//! only then writes `<command>.csv` and `<command>.summary.json` into the
//! output directory, so a failed run leaves no artifacts behind.
//!
//! Exit codes: 0 success, 1 runtime or verification failure, 2 config error,
//! 3 dense capacity exceeded, 4 no trajectory survived.

use std::fs;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand};
use num_complex::Complex64 as C64;
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use sha2::{Digest, Sha256};

use crate::dense::{dense_cap, normalized_distance, trace_distance, vec_distance, vec_norm, DenseMatrix};
use crate::engine::StateVector;
use crate::error::Error;
use crate::hatano_nelson::{
    build_hn_problem, shifted_generator, site_densities, verify_hn_factorization, HnParams, HnProblem, Interaction,
};
use crate::instances::{random_state, random_sum};
use crate::oracle::{
    compute_bound_quantities, dilation_top_block, exact_solution, exact_step_dense, lindblad_rk4, BoundQuantities,
    DEFAULT_GRID_POINTS,
};
use crate::pauli::{Pauli, PauliString, PauliSum};
use crate::problem::{build_dilation, InitialState, OdeProblem, ProblemFile};
use crate::solver::{
    choose_step_count, log_log_slope, normalized_error_bound, run_lindblad, run_postselect, run_postselect_observing,
    run_trajectories, state_ratio, Propagator, Readout, ShotSettings, SolverOptions, StepPlan,
};

pub const DEFAULT_R_VALUES: [usize; 6] = [8, 16, 32, 64, 128, 256];
pub const DEFAULT_SHOTS: usize = 1000;

#[derive(Debug, Parser)]
#[command(name = "odeq", version, about = "Dissipative ODE solver experiments")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    /// JSON experiment config.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Output directory, created if missing.
    #[arg(long, global = true, default_value = ".")]
    pub out: PathBuf,
    /// Overrides the config seed.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Worker threads for shot sampling.
    #[arg(long, global = true)]
    pub threads: Option<usize>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Subcommand)]
pub enum Command {
    /// Error against the dense solution over a sweep of step counts.
    Convergence,
    /// Per-step squared norms and the final success probability.
    SuccessProb,
    /// Hatano-Nelson site-density time series.
    Hn,
    /// Shot-sampled post-selection with a deterministic reference.
    Trajectories,
    /// Trace-out mode against the dense master equation.
    Lindblad,
    /// Bound quantities, step count, state ratio.
    Bounds,
    /// Invariant checks with a pass/fail report.
    Verify,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Command::Convergence => "convergence",
            Command::SuccessProb => "success-prob",
            Command::Hn => "hn",
            Command::Trajectories => "trajectories",
            Command::Lindblad => "lindblad",
            Command::Bounds => "bounds",
            Command::Verify => "verify",
        }
    }
}

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("config: {0}")]
    Config(String),
    #[error(transparent)]
    Core(#[from] Error),
    #[error("writing output: {0}")]
    Output(std::io::Error),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            CliError::Core(e) => match e {
                Error::Capacity { .. } => 3,
                Error::NoSurvivors { .. } => 4,
                Error::Parse(_)
                | Error::Json(_)
                | Error::InvalidParameter(_)
                | Error::Shape(_)
                | Error::NonHermitian(_)
                | Error::NonFinite(_)
                | Error::DimensionMismatch { .. }
                | Error::DissipativeConditionViolated { .. }
                | Error::DegenerateState => 2,
                _ => 1,
            },
            CliError::Output(_) => 1,
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    #[default]
    Postselect,
    Trajectories,
    Lindblad,
}

/// Dense coefficient file: `{"re": [[...]], "im": [[...]]}`, `im` optional.
#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct MatrixFile {
    re: Vec<Vec<f64>>,
    #[serde(default)]
    im: Option<Vec<Vec<f64>>>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    problem: Option<ProblemFile>,
    matrix_file: Option<PathBuf>,
    sites: Option<usize>,
    #[serde(rename = "J")]
    coupling: Option<f64>,
    gamma: Option<f64>,
    #[serde(rename = "V0")]
    v0: Option<f64>,
    #[serde(rename = "V_matrix")]
    v_matrix: Option<Vec<Vec<f64>>>,
    psi0: Option<InitialState>,
    #[serde(rename = "T")]
    time: Option<f64>,
    epsilon: Option<f64>,
    #[serde(rename = "R")]
    steps: Option<usize>,
    #[serde(rename = "R_values")]
    r_values: Option<Vec<usize>>,
    shots: Option<usize>,
    seed: Option<u64>,
    mode: Option<Mode>,
    record_every: Option<usize>,
    readout: Option<Readout>,
    observables: Option<Vec<Vec<(f64, f64, String)>>>,
    grid_points: Option<usize>,
    bounds: Option<BoundQuantities>,
}

pub enum Source {
    Problem(OdeProblem),
    Hn(HnProblem),
}

impl Source {
    pub fn problem(&self) -> &OdeProblem {
        match self {
            Source::Problem(p) => p,
            Source::Hn(hn) => &hn.problem,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum StepChoice {
    Epsilon(f64),
    Explicit(usize),
    Unset,
}

/// Validated config.
pub struct ExperimentConfig {
    pub source: Source,
    pub steps: StepChoice,
    pub r_values: Vec<usize>,
    pub shots: usize,
    pub seed: u64,
    pub mode: Mode,
    pub record_every: Option<usize>,
    pub readout: Readout,
    pub observables: Vec<(String, PauliSum)>,
    pub grid_points: usize,
    pub bounds: Option<BoundQuantities>,
    /// The config as parsed, echoed into summaries.
    pub echo: Value,
    /// Git-style blob hash of the config bytes.
    pub hash: String,
}

fn config_err(msg: impl Into<String>) -> CliError {
    CliError::Config(msg.into())
}

/// SHA-256 over `"blob <len>\0" + bytes`.
pub fn blob_hash(bytes: &[u8]) -> String {
    let mut h = Sha256::new();
    h.update(format!("blob {}\0", bytes.len()).as_bytes());
    h.update(bytes);
    hex::encode(h.finalize())
}

fn read_matrix_file(path: &Path) -> Result<DenseMatrix, CliError> {
    let text = fs::read_to_string(path).map_err(|e| config_err(format!("{}: {e}", path.display())))?;
    let file: MatrixFile = serde_json::from_str(&text).map_err(|e| config_err(format!("{}: {e}", path.display())))?;
    let rows = file.re.len();
    if let Some(im) = &file.im {
        if im.len() != rows || im.iter().zip(&file.re).any(|(a, b)| a.len() != b.len()) {
            return Err(config_err("matrix file: re and im shapes differ"));
        }
    }
    let entries: Vec<Vec<C64>> = file
        .re
        .iter()
        .enumerate()
        .map(|(i, row)| {
            row.iter()
                .enumerate()
                .map(|(j, &re)| C64::new(re, file.im.as_ref().map_or(0.0, |im| im[i][j])))
                .collect()
        })
        .collect();
    Ok(DenseMatrix::from_rows(&entries)?)
}

impl ExperimentConfig {
    /// Parses config text; relative paths resolve against `base`.
    pub fn parse(text: &str, base: &Path, seed_override: Option<u64>) -> Result<Self, CliError> {
        let echo: Value = serde_json::from_str(text).map_err(|e| config_err(e.to_string()))?;
        let raw: RawConfig = serde_json::from_value(echo.clone()).map_err(|e| config_err(e.to_string()))?;
        let hn_fields = raw.sites.is_some()
            || raw.coupling.is_some()
            || raw.gamma.is_some()
            || raw.v0.is_some()
            || raw.v_matrix.is_some();
        let sources = raw.problem.is_some() as usize + raw.matrix_file.is_some() as usize + hn_fields as usize;
        if sources != 1 {
            return Err(config_err(
                "give exactly one problem source: \"problem\", \"matrix_file\" or Hatano-Nelson fields",
            ));
        }
        if raw.epsilon.is_some() && raw.steps.is_some() {
            return Err(config_err("give either \"epsilon\" or \"R\", not both"));
        }

        let source = if let Some(file) = &raw.problem {
            if raw.psi0.is_some() || raw.time.is_some() {
                return Err(config_err("\"psi0\" and \"T\" belong inside \"problem\""));
            }
            Source::Problem(OdeProblem::from_file(file)?)
        } else if let Some(path) = &raw.matrix_file {
            let a = read_matrix_file(&base.join(path))?;
            Source::Problem(OdeProblem::from_dense_coefficient(&a, require(raw.psi0.clone(), "psi0")?, require(raw.time, "T")?)?)
        } else {
            if raw.v0.is_some() && raw.v_matrix.is_some() {
                return Err(config_err("give either \"V0\" or \"V_matrix\", not both"));
            }
            let interaction = match raw.v_matrix.clone() {
                Some(m) => Interaction::Matrix(m),
                None => Interaction::NearestNeighbor(raw.v0.unwrap_or(0.0)),
            };
            let params = HnParams {
                sites: require(raw.sites, "sites")?,
                coupling: require(raw.coupling, "J")?,
                gamma: require(raw.gamma, "gamma")?,
                interaction,
                initial: require(raw.psi0.clone(), "psi0")?,
                time: require(raw.time, "T")?,
            };
            Source::Hn(build_hn_problem(&params)?)
        };

        let n = source.problem().n_qubits();
        let observables = match &raw.observables {
            Some(list) => list
                .iter()
                .enumerate()
                .map(|(i, terms)| {
                    let parsed = terms
                        .iter()
                        .map(|(re, im, axes)| Ok((C64::new(*re, *im), axes.parse::<PauliString>()?)))
                        .collect::<crate::Result<Vec<_>>>()?;
                    Ok((format!("o_{i}"), PauliSum::from_terms(n, parsed)?))
                })
                .collect::<Result<Vec<_>, CliError>>()?,
            None => match &source {
                Source::Hn(_) => site_densities(n)
                    .into_iter()
                    .enumerate()
                    .map(|(i, o)| (format!("n_{i}"), o))
                    .collect(),
                Source::Problem(_) => (0..n)
                    .map(|i| (format!("Z_{i}"), PauliSum::single(C64::new(1.0, 0.0), PauliString::on(n, &[(i, Pauli::Z)]))))
                    .collect(),
            },
        };

        let steps = match (raw.epsilon, raw.steps) {
            (Some(e), None) => StepChoice::Epsilon(e),
            (None, Some(r)) => StepChoice::Explicit(r),
            _ => StepChoice::Unset,
        };
        let r_values = raw.r_values.clone().unwrap_or_else(|| DEFAULT_R_VALUES.to_vec());
        if r_values.is_empty() || r_values.contains(&0) {
            return Err(config_err("\"R_values\" must be non-empty positive step counts"));
        }
        if raw.record_every == Some(0) {
            return Err(config_err("\"record_every\" must be at least 1"));
        }
        Ok(ExperimentConfig {
            source,
            steps,
            r_values,
            shots: raw.shots.unwrap_or(DEFAULT_SHOTS),
            seed: seed_override.or(raw.seed).unwrap_or(0),
            mode: raw.mode.unwrap_or_default(),
            record_every: raw.record_every,
            readout: raw.readout.unwrap_or_default(),
            observables,
            grid_points: raw.grid_points.unwrap_or(DEFAULT_GRID_POINTS),
            bounds: raw.bounds,
            echo,
            hash: blob_hash(text.as_bytes()),
        })
    }

    pub fn problem(&self) -> &OdeProblem {
        self.source.problem()
    }

    fn bound_quantities(&self) -> Result<BoundQuantities, CliError> {
        match self.bounds {
            Some(b) => Ok(b),
            None => Ok(compute_bound_quantities(self.problem(), self.grid_points)?),
        }
    }

    fn plan(&self) -> Result<StepPlan, CliError> {
        match self.steps {
            StepChoice::Explicit(r) => Ok(StepPlan::new(self.problem().time(), r)?),
            StepChoice::Epsilon(e) => Ok(choose_step_count(self.problem(), e, &self.bound_quantities()?)?),
            StepChoice::Unset => Err(config_err("this command needs \"epsilon\" or \"R\"")),
        }
    }

    fn settings(&self) -> ShotSettings {
        ShotSettings {
            shots: self.shots,
            seed: self.seed,
            observables: self.observables.iter().map(|(_, o)| o.clone()).collect(),
            readout: self.readout,
            record_every: self.record_every,
        }
    }

    fn labels(&self) -> Vec<String> {
        self.observables.iter().map(|(l, _)| l.clone()).collect()
    }
}

fn require<T>(v: Option<T>, key: &str) -> Result<T, CliError> {
    v.ok_or_else(|| config_err(format!("missing \"{key}\"")))
}

/// One file to be written under the output directory.
#[derive(Clone, Debug, PartialEq)]
pub struct Artifact {
    pub name: String,
    pub bytes: Vec<u8>,
}

#[derive(Debug, Default)]
pub struct Outcome {
    pub artifacts: Vec<Artifact>,
    /// Lines for stdout.
    pub lines: Vec<String>,
    /// Set by `verify` when some check failed.
    pub failed: Option<String>,
}

/// Shortest round-trip text, switching to exponent form for very small or
/// large magnitudes.
pub fn fmt_f64(x: f64) -> String {
    let a = x.abs();
    if x == 0.0 || (1e-4..1e15).contains(&a) {
        format!("{x}")
    } else {
        format!("{x:e}")
    }
}

struct Table {
    writer: csv::Writer<Vec<u8>>,
}

impl Table {
    fn new(header: &[String]) -> Self {
        let mut writer = csv::Writer::from_writer(vec![]);
        writer.write_record(header).expect("in-memory write");
        Table { writer }
    }

    fn row(&mut self, fields: Vec<String>) {
        self.writer.write_record(&fields).expect("in-memory write");
    }

    fn finish(self, name: String) -> Artifact {
        Artifact {
            name,
            bytes: self.writer.into_inner().expect("in-memory flush"),
        }
    }
}

fn header(fixed: &[&str]) -> Vec<String> {
    fixed.iter().map(|s| s.to_string()).collect()
}

fn summary(cmd: Command, cfg: Option<&ExperimentConfig>, seed: u64, results: Value) -> Artifact {
    let doc = json!({
        "command": cmd.name(),
        "seed": seed,
        "config_sha256": cfg.map(|c| c.hash.clone()),
        "config": cfg.map(|c| c.echo.clone()),
        "results": results,
    });
    let mut bytes = serde_json::to_vec_pretty(&doc).expect("serializable summary");
    bytes.push(b'\n');
    Artifact {
        name: format!("{}.summary.json", cmd.name()),
        bytes,
    }
}

fn csv_name(cmd: Command) -> String {
    format!("{}.csv", cmd.name())
}

fn slope_of(rows: &[(usize, f64)]) -> Option<f64> {
    let kept: Vec<&(usize, f64)> = rows.iter().filter(|(_, e)| *e > 0.0).collect();
    (kept.len() >= 2).then(|| {
        let xs: Vec<f64> = kept.iter().map(|(r, _)| *r as f64).collect();
        let ys: Vec<f64> = kept.iter().map(|(_, e)| *e).collect();
        log_log_slope(&xs, &ys)
    })
}

fn convergence(cfg: &ExperimentConfig) -> Result<Outcome, CliError> {
    let p = cfg.problem();
    let exact = exact_solution(p)?;
    let bounds = cfg.bound_quantities()?;
    let mut table = Table::new(&header(&["R", "raw_error", "normalized_error", "success_prob", "bound_value"]));
    let mut errors = vec![];
    let mut violations = 0;
    for &r in &cfg.r_values {
        let run = run_postselect(p, &StepPlan::new(p.time(), r)?, SolverOptions::default())?;
        let raw = vec_distance(run.solution(), &exact);
        let normalized = normalized_distance(run.solution(), &exact);
        let bound = bounds.cumulative_bound(p.time(), r);
        violations += (raw > bound) as usize;
        errors.push((r, normalized));
        table.row(vec![r.to_string(), fmt_f64(raw), fmt_f64(normalized), fmt_f64(run.success_prob), fmt_f64(bound)]);
    }
    let slope = slope_of(&errors);
    let results = json!({
        "slope": slope,
        "bound_violations": violations,
        "bounds": bounds,
        "ideal_success_prob": (vec_norm(&exact) / vec_norm(p.psi0())).powi(2),
    });
    Ok(Outcome {
        lines: vec![format!(
            "fitted slope {}, bound violations {violations}",
            slope.map_or("n/a".to_string(), fmt_f64)
        )],
        artifacts: vec![table.finish(csv_name(Command::Convergence)), summary(Command::Convergence, Some(cfg), cfg.seed, results)],
        failed: None,
    })
}

fn success_prob(cfg: &ExperimentConfig) -> Result<Outcome, CliError> {
    let p = cfg.problem();
    let plan = cfg.plan()?;
    let run = run_postselect(p, &plan, SolverOptions::default())?;
    let initial = run.norm_trace[0];
    let mut table = Table::new(&header(&["step", "time", "norm_sq", "success_prob"]));
    for (k, &n2) in run.norm_trace.iter().enumerate() {
        table.row(vec![k.to_string(), fmt_f64(k as f64 * plan.tau), fmt_f64(n2), fmt_f64(n2 / initial)]);
    }
    let ideal = if p.n_qubits() <= dense_cap() {
        let exact = exact_solution(p)?;
        Some((vec_norm(&exact) / vec_norm(p.psi0())).powi(2))
    } else {
        None
    };
    let results = json!({
        "plan": plan,
        "success_prob": run.success_prob,
        "ideal_success_prob": ideal,
        "gap": ideal.map(|i| (run.success_prob - i).abs()),
        "rotations": run.rotations(),
    });
    Ok(Outcome {
        lines: vec![format!("R = {}, success_prob {}", plan.steps, fmt_f64(run.success_prob))],
        artifacts: vec![table.finish(csv_name(Command::SuccessProb)), summary(Command::SuccessProb, Some(cfg), cfg.seed, results)],
        failed: None,
    })
}

fn default_record(cfg: &ExperimentConfig, plan: &StepPlan) -> usize {
    cfg.record_every.unwrap_or((plan.steps / 64).max(1))
}

fn hn(cfg: &ExperimentConfig) -> Result<Outcome, CliError> {
    let Source::Hn(model) = &cfg.source else {
        return Err(config_err("`hn` needs Hatano-Nelson fields (sites, J, gamma, ...)"));
    };
    let p = &model.problem;
    let plan = cfg.plan()?;
    let every = default_record(cfg, &plan);
    let labels = cfg.labels();
    let observables: Vec<&PauliSum> = cfg.observables.iter().map(|(_, o)| o).collect();
    let (artifact, results) = match cfg.mode {
        Mode::Postselect => {
            let mut cols = header(&["step", "time", "success_prob"]);
            cols.extend(labels.iter().cloned());
            let mut table = Table::new(&cols);
            let initial = vec_norm(p.psi0()).powi(2);
            let run = run_postselect_observing(p, &plan, SolverOptions::default(), |k, s: &StateVector| {
                if k % every == 0 || k == plan.steps {
                    let mut row = vec![k.to_string(), fmt_f64(k as f64 * plan.tau), fmt_f64(s.norm_sq() / initial)];
                    for o in &observables {
                        row.push(fmt_f64(s.expectation(o, true)?));
                    }
                    table.row(row);
                }
                Ok(())
            })?;
            let results = json!({
                "mode": cfg.mode,
                "plan": plan,
                "shift": model.shift,
                "success_prob": run.success_prob,
                "unshifted_norm_sq": run.success_prob * model.unshift_factor(p.time()).powi(2),
            });
            (table.finish(csv_name(Command::Hn)), results)
        }
        Mode::Trajectories => {
            let settings = cfg.settings().record_every(every);
            let stats = run_trajectories(p, &plan, &settings, SolverOptions::default())?;
            stats.require_estimates()?;
            let mut cols = header(&["step", "time", "samples"]);
            for l in &labels {
                cols.push(l.clone());
                cols.push(format!("{l}_stderr"));
            }
            let mut table = Table::new(&cols);
            for point in &stats.series {
                let mut row = vec![point.step.to_string(), fmt_f64(point.time), point.samples.to_string()];
                match &point.estimates {
                    Some(es) => es.iter().for_each(|e| {
                        row.push(fmt_f64(e.mean));
                        row.push(fmt_f64(e.stderr));
                    }),
                    None => row.extend(std::iter::repeat_n(String::new(), 2 * labels.len())),
                }
                table.row(row);
            }
            let results = json!({
                "mode": cfg.mode,
                "plan": plan,
                "shift": model.shift,
                "shots": stats.shots,
                "successes": stats.successes,
                "success_rate": stats.success_rate(),
            });
            (table.finish(csv_name(Command::Hn)), results)
        }
        Mode::Lindblad => {
            let res = run_lindblad(p, &plan, &cfg.settings().record_every(every), SolverOptions::default())?;
            let mut cols = header(&["step", "time"]);
            for l in &labels {
                cols.push(l.clone());
                cols.push(format!("{l}_stderr"));
            }
            let mut table = Table::new(&cols);
            for snap in &res.snapshots {
                let mut row = vec![snap.step.to_string(), fmt_f64(snap.time)];
                for e in &snap.estimates {
                    row.push(fmt_f64(e.mean));
                    row.push(fmt_f64(e.stderr));
                }
                table.row(row);
            }
            let results = json!({ "mode": cfg.mode, "plan": plan, "shift": model.shift, "shots": res.shots });
            (table.finish(csv_name(Command::Hn)), results)
        }
    };
    Ok(Outcome {
        lines: vec![format!("{} sites, mode {:?}, R = {}", model.params.sites, cfg.mode, plan.steps)],
        artifacts: vec![artifact, summary(Command::Hn, Some(cfg), cfg.seed, results)],
        failed: None,
    })
}

fn trajectories(cfg: &ExperimentConfig) -> Result<Outcome, CliError> {
    let p = cfg.problem();
    let plan = cfg.plan()?;
    let stats = run_trajectories(p, &plan, &cfg.settings(), SolverOptions::default())?;
    let estimates = stats.require_estimates()?.to_vec();
    let reference = run_postselect(p, &plan, SolverOptions::default())?;
    let mut table = Table::new(&header(&["observable", "mean", "stderr", "reference"]));
    for ((label, o), e) in cfg.observables.iter().zip(&estimates) {
        let r = reference.final_state.expectation(o, true)?;
        table.row(vec![label.clone(), fmt_f64(e.mean), fmt_f64(e.stderr), fmt_f64(r)]);
    }
    let sigma = stats.success_stderr();
    let results = json!({
        "plan": plan,
        "shots": stats.shots,
        "successes": stats.successes,
        "success_rate": stats.success_rate(),
        "success_stderr": sigma,
        "success_prob": reference.success_prob,
        "z_score": if sigma > 0.0 { Some((stats.success_rate() - reference.success_prob) / sigma) } else { None },
    });
    Ok(Outcome {
        lines: vec![format!(
            "{}/{} shots survived (deterministic success_prob {})",
            stats.successes,
            stats.shots,
            fmt_f64(reference.success_prob)
        )],
        artifacts: vec![table.finish(csv_name(Command::Trajectories)), summary(Command::Trajectories, Some(cfg), cfg.seed, results)],
        failed: None,
    })
}

fn lindblad(cfg: &ExperimentConfig) -> Result<Outcome, CliError> {
    let p = cfg.problem();
    p.dense()?;
    let plan = cfg.plan()?;
    let every = default_record(cfg, &plan);
    let res = run_lindblad(p, &plan, &cfg.settings().record_every(every), SolverOptions::default())?;
    let grid: Vec<f64> = res.snapshots.iter().map(|s| s.time).collect();
    let reference = lindblad_rk4(p, &grid)?;
    let mut table = Table::new(&header(&["step", "time", "trace_distance", "trace"]));
    let mut worst: f64 = 0.0;
    for (snap, rho) in res.snapshots.iter().zip(&reference) {
        let est = snap.density.as_ref().expect("dense shadow exists");
        let d = trace_distance(est, rho);
        worst = worst.max(d);
        table.row(vec![snap.step.to_string(), fmt_f64(snap.time), fmt_f64(d), fmt_f64(est.trace().re)]);
    }
    let last = res.final_snapshot();
    let results = json!({
        "plan": plan,
        "shots": res.shots,
        "max_trace_distance": worst,
        "final_trace_distance": trace_distance(last.density.as_ref().expect("dense"), reference.last().expect("final point")),
    });
    Ok(Outcome {
        lines: vec![format!("max trace distance {}", fmt_f64(worst))],
        artifacts: vec![table.finish(csv_name(Command::Lindblad)), summary(Command::Lindblad, Some(cfg), cfg.seed, results)],
        failed: None,
    })
}

fn bounds(cfg: &ExperimentConfig) -> Result<Outcome, CliError> {
    let StepChoice::Epsilon(eps) = cfg.steps else {
        return Err(config_err("`bounds` needs \"epsilon\""));
    };
    let p = cfg.problem();
    let b = cfg.bound_quantities()?;
    let plan = choose_step_count(p, eps, &b)?;
    let ratio = if p.n_qubits() <= dense_cap() {
        state_ratio(p, &exact_solution(p)?)?
    } else {
        crate::solver::StateRatio {
            q: vec_norm(p.psi0()) / b.final_norm,
        }
    };
    let rotations = Propagator::new(p, SolverOptions::default()).rotations_per_step();
    let mut table = Table::new(&header(&[
        "commutator_sum",
        "hamiltonian_split_sum",
        "sup_psi",
        "sup_l4",
        "final_norm",
        "epsilon",
        "R",
        "q",
        "repetitions",
    ]));
    table.row(vec![
        fmt_f64(b.commutator_sum),
        fmt_f64(b.hamiltonian_split_sum),
        fmt_f64(b.sup_psi),
        fmt_f64(b.sup_l4),
        fmt_f64(b.final_norm),
        fmt_f64(eps),
        plan.steps.to_string(),
        fmt_f64(ratio.q),
        fmt_f64(ratio.repetitions(plan.steps)),
    ]);
    let results = json!({
        "bounds": b,
        "epsilon": eps,
        "plan": plan,
        "q": ratio.q,
        "repetitions": ratio.repetitions(plan.steps),
        "rotations_per_step": rotations,
        "expected_rotations": ratio.repetitions(plan.steps) * rotations as f64,
    });
    Ok(Outcome {
        lines: vec![format!("R = {} ({:?}), q = {}", plan.steps, plan.dominant, fmt_f64(ratio.q))],
        artifacts: vec![table.finish(csv_name(Command::Bounds)), summary(Command::Bounds, Some(cfg), cfg.seed, results)],
        failed: None,
    })
}

struct VerifyRow {
    name: String,
    residual: f64,
    tolerance: f64,
}

impl VerifyRow {
    fn passed(&self) -> bool {
        self.residual <= self.tolerance
    }
}

fn default_hn() -> HnParams {
    HnParams {
        sites: 4,
        coupling: 1.0,
        gamma: 0.5,
        interaction: Interaction::NearestNeighbor(0.5),
        initial: InitialState::basis_bits("1010"),
        time: 1.0,
    }
}

fn verify(cfg: Option<&ExperimentConfig>, seed: u64) -> Result<Outcome, CliError> {
    let mut rows = vec![];
    let params = match cfg.map(|c| &c.source) {
        Some(Source::Hn(model)) => model.params.clone(),
        _ => default_hn(),
    };
    let report = verify_hn_factorization(&params)?;
    for c in &report.checks {
        rows.push(VerifyRow {
            name: format!("hn {:?} bond {}", c.identity, c.bond),
            residual: c.residual,
            tolerance: c.tolerance,
        });
    }
    let model = build_hn_problem(&params)?;
    let a = &model.problem.dense()?.generator;
    rows.push(VerifyRow {
        name: "hn shifted generator".into(),
        residual: a.sub(&shifted_generator(&model)?).frobenius_norm(),
        tolerance: 1e-10,
    });

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst: f64 = 0.0;
    for _ in 0..50 {
        let n = rng.random_range(1..=3);
        let l = random_sum(&mut rng, n, 3, 0.7);
        let psi = random_state(&mut rng, n);
        let tau = 10f64.powf(rng.random_range(-4.0..-1.0));
        let d = build_dilation(&l);
        let block = dilation_top_block(&d, tau)?.apply(&psi);
        let dl = l.to_dense()?;
        let k = dl.adjoint().matmul(&dl);
        let kpsi = k.apply(&psi);
        let first: Vec<C64> = psi.iter().zip(&kpsi).map(|(x, y)| x - y * tau).collect();
        let bound = 2.0 * tau * tau / 3.0 * vec_norm(&k.apply(&kpsi));
        let residual = vec_distance(&block, &first);
        worst = worst.max(if bound > 0.0 { residual / bound } else { residual * 1e12 });
    }
    rows.push(VerifyRow {
        name: "dilation identity, residual / bound".into(),
        residual: worst,
        tolerance: 1.0,
    });

    let mut violations = 0;
    for _ in 0..10_000 {
        let n = rng.random_range(1..=3);
        let psi = random_state(&mut rng, n);
        let spread = rng.random_range(0.0..0.5);
        let noise = random_state(&mut rng, n);
        let phi: Vec<C64> = psi.iter().zip(&noise).map(|(x, y)| x + y * spread).collect();
        if let Some(bound) = normalized_error_bound(&psi, &phi) {
            violations += (normalized_distance(&psi, &phi) > bound) as usize;
        }
    }
    rows.push(VerifyRow {
        name: "normalized bound violations".into(),
        residual: violations as f64,
        tolerance: 0.0,
    });

    if let Some(c) = cfg {
        let p = c.problem();
        if p.n_qubits() <= dense_cap() {
            let tau = 1e-3;
            let m = exact_step_dense(p, tau)?;
            let prop = Propagator::new(p, SolverOptions::exact());
            let mut worst: f64 = 0.0;
            for col in 0..p.dim() {
                let mut e = vec![C64::default(); p.dim()];
                e[col] = C64::new(1.0, 0.0);
                let mut s = StateVector::with_ancilla(&e)?;
                prop.step(&mut s, tau)?;
                let expected: Vec<C64> = (0..p.dim()).map(|r| m.get(r, col)).collect();
                worst = worst.max(vec_distance(s.system_part(), &expected));
            }
            rows.push(VerifyRow {
                name: "step operator vs dense map".into(),
                residual: worst,
                tolerance: 1e-12,
            });
        }
    }

    let mut table = Table::new(&header(&["check", "residual", "tolerance", "passed"]));
    let mut lines = vec![];
    for r in &rows {
        let verdict = if r.passed() { "PASS" } else { "FAIL" };
        lines.push(format!("{verdict} {} (residual {}, tolerance {})", r.name, fmt_f64(r.residual), fmt_f64(r.tolerance)));
        table.row(vec![r.name.clone(), fmt_f64(r.residual), fmt_f64(r.tolerance), r.passed().to_string()]);
    }
    let failed: Vec<&str> = rows.iter().filter(|r| !r.passed()).map(|r| r.name.as_str()).collect();
    let results = json!({ "checks": rows.len(), "failed": failed });
    Ok(Outcome {
        failed: (!failed.is_empty()).then(|| failed.join(", ")),
        lines,
        artifacts: vec![table.finish(csv_name(Command::Verify)), summary(Command::Verify, cfg, seed, results)],
    })
}

fn load_config(cli: &Cli) -> Result<Option<ExperimentConfig>, CliError> {
    let Some(path) = &cli.config else {
        return Ok(None);
    };
    let text = fs::read_to_string(path).map_err(|e| config_err(format!("{}: {e}", path.display())))?;
    let base = path.parent().unwrap_or(Path::new("."));
    ExperimentConfig::parse(&text, base, cli.seed).map(Some)
}

/// Runs one command and writes its artifacts. Nothing is written when the
/// command fails; `verify` still writes its report when a check fails.
pub fn run(cli: &Cli) -> Result<Outcome, CliError> {
    let cfg = load_config(cli)?;
    let work = || -> Result<Outcome, CliError> {
        if cli.command == Command::Verify {
            let seed = cfg.as_ref().map_or(cli.seed.unwrap_or(0), |c| c.seed);
            return verify(cfg.as_ref(), seed);
        }
        let cfg = cfg.as_ref().ok_or_else(|| config_err("--config is required"))?;
        match cli.command {
            Command::Convergence => convergence(cfg),
            Command::SuccessProb => success_prob(cfg),
            Command::Hn => hn(cfg),
            Command::Trajectories => trajectories(cfg),
            Command::Lindblad => lindblad(cfg),
            Command::Bounds => bounds(cfg),
            Command::Verify => unreachable!(),
        }
    };
    let outcome = match cli.threads {
        Some(k) => {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(k)
                .build()
                .map_err(|e| config_err(format!("--threads: {e}")))?;
            pool.install(work)?
        }
        None => work()?,
    };
    fs::create_dir_all(&cli.out).map_err(CliError::Output)?;
    for a in &outcome.artifacts {
        fs::write(cli.out.join(&a.name), &a.bytes).map_err(CliError::Output)?;
    }
    Ok(outcome)
}

/// Entry point shared by the binary: parses `args`, runs, prints, returns the exit code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    match run(&cli) {
        Ok(outcome) => {
            for line in &outcome.lines {
                println!("{line}");
            }
            match outcome.failed {
                Some(which) => {
                    eprintln!("error: checks failed: {which}");
                    1
                }
                None => 0,
            }
        }
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}
