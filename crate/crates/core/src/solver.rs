//! Time stepping with the dilated one-step operator
//!
//! ```text
//! M(tau) = prod_j [(|0><0| (x) I) exp(i sqrt(2 tau) G_j)] (I (x) exp(-i tau H))
//! ```
//!
//! in three modes: deterministic post-selection (the unnormalized projected
//! state is kept), sampled trajectories that discard any shot whose ancilla
//! reads 1, and the trace-out mode that resets the ancilla instead and so
//! unravels a Lindblad equation.

use num_complex::Complex64 as C64;
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dense::{dense_cap, outer, vec_distance, vec_norm, DenseMatrix};
use crate::engine::{CompiledSum, DilationMethod, HamiltonianMethod, ShotStream, StateVector};
use crate::error::{Error, Result};
use crate::oracle::BoundQuantities;
use crate::pauli::{Pauli, PauliSum};
use crate::problem::{Dilation, OdeProblem};

/// Post-selected runs abort once the retained squared norm falls below this.
pub const UNDERFLOW_NORM_SQ: f64 = 1e-300;

/// Shots are accumulated in fixed-size chunks so reductions do not depend on
/// the worker count.
const CHUNK: usize = 64;

/// Operator order inside one step.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum OpOrder {
    /// `exp(-i tau H)` first, then `G_1 ... G_J`, each followed by its measurement.
    #[default]
    HamiltonianFirst,
}

/// Which term of the step-count rule set `R`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum StepBranch {
    /// Both terms were below one step.
    Floor,
    /// The commutator (product-formula) term.
    Trotter,
    /// The Taylor-remainder term of the dilations.
    Dissipative,
    /// `R` was given explicitly.
    Explicit,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct StepPlan {
    pub steps: usize,
    pub tau: f64,
    pub time: f64,
    pub order: OpOrder,
    pub dominant: StepBranch,
}

impl StepPlan {
    pub fn new(time: f64, steps: usize) -> Result<Self> {
        Self::with_branch(time, steps, StepBranch::Explicit)
    }

    fn with_branch(time: f64, steps: usize, dominant: StepBranch) -> Result<Self> {
        if steps == 0 {
            return Err(Error::InvalidParameter("step count must be at least 1".into()));
        }
        if !time.is_finite() || time < 0.0 {
            return Err(Error::InvalidParameter(format!("bad final time {time}")));
        }
        Ok(StepPlan {
            steps,
            tau: time / steps as f64,
            time,
            order: OpOrder::HamiltonianFirst,
            dominant,
        })
    }

    /// `sqrt(2 tau)`.
    pub fn dissipative_angle(&self) -> f64 {
        Dilation::angle(self.tau)
    }

    fn check_against(&self, problem: &OdeProblem) -> Result<()> {
        let t = problem.time();
        if (self.time - t).abs() > 1e-12 * t.abs().max(1.0) {
            return Err(Error::InvalidParameter(format!(
                "plan covers time {} but the problem ends at {t}",
                self.time
            )));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct SolverOptions {
    pub hamiltonian: HamiltonianMethod,
    pub dilation: DilationMethod,
}

impl SolverOptions {
    /// Exact exponentials for every factor; only the splitting between `H`
    /// and the jumps remains.
    pub fn exact() -> Self {
        SolverOptions {
            hamiltonian: HamiltonianMethod::Series,
            dilation: DilationMethod::Series,
        }
    }
}

/// Compiled operators of one problem, shared read-only by all shots.
pub struct Propagator {
    n: usize,
    hamiltonian: CompiledSum,
    dilations: Vec<(Dilation, CompiledSum)>,
    options: SolverOptions,
}

impl Propagator {
    pub fn new(problem: &OdeProblem, options: SolverOptions) -> Self {
        Propagator {
            n: problem.n_qubits(),
            hamiltonian: CompiledSum::new(problem.hamiltonian()),
            dilations: problem
                .dilations()
                .into_iter()
                .map(|d| {
                    let c = CompiledSum::new(&d.pauli);
                    (d, c)
                })
                .collect(),
            options,
        }
    }

    pub fn jump_count(&self) -> usize {
        self.dilations.len()
    }

    /// Pauli rotations one step costs when every factor is a term product.
    pub fn rotations_per_step(&self) -> usize {
        self.hamiltonian.rotation_count()
            + self.dilations.iter().map(|(_, g)| g.rotation_count()).sum::<usize>()
    }

    fn check_state(&self, s: &StateVector) -> Result<()> {
        if s.n_total() != self.n + 1 {
            return Err(Error::DimensionMismatch {
                expected: self.n + 1,
                found: s.n_total(),
            });
        }
        Ok(())
    }

    fn apply_hamiltonian(&self, s: &mut StateVector, tau: f64) {
        match self.options.hamiltonian {
            HamiltonianMethod::Trotter => s.apply_compiled_product(&self.hamiltonian, tau),
            HamiltonianMethod::Series => s.apply_compiled_exp(&self.hamiltonian, tau),
        }
    }

    fn apply_jump(&self, s: &mut StateVector, j: usize, tau: f64) -> Result<()> {
        let (d, g) = &self.dilations[j];
        match self.options.dilation {
            DilationMethod::Dense => s.apply_dilated_jump(d, tau, DilationMethod::Dense),
            method => {
                s.apply_dilation_compiled(g, Dilation::angle(tau), method);
                Ok(())
            }
        }
    }

    /// One post-selected step; returns the product of the `J` projection
    /// probabilities. The state is left unnormalized.
    pub fn step(&self, s: &mut StateVector, tau: f64) -> Result<f64> {
        self.check_state(s)?;
        self.apply_hamiltonian(s, tau);
        let mut p = 1.0;
        for j in 0..self.dilations.len() {
            self.apply_jump(s, j, tau)?;
            p *= s.project_ancilla_zero()?;
        }
        Ok(p)
    }

    /// One sampled step; `Ok(false)` when some ancilla reads 1.
    fn step_sampled(&self, s: &mut StateVector, tau: f64, stream: &mut ShotStream, step: usize) -> Result<bool> {
        self.apply_hamiltonian(s, tau);
        for j in 0..self.dilations.len() {
            self.apply_jump(s, j, tau)?;
            if s.sample_ancilla(stream.at(step, j))? == 1 {
                return Ok(false);
            }
        }
        Ok(true)
    }

    /// One trace-out step: every ancilla is measured and reset to `|0>`.
    fn step_reset(&self, s: &mut StateVector, tau: f64, stream: &mut ShotStream, step: usize) -> Result<()> {
        self.apply_hamiltonian(s, tau);
        for j in 0..self.dilations.len() {
            self.apply_jump(s, j, tau)?;
            s.reset_ancilla(stream.at(step, j))?;
        }
        Ok(())
    }
}

/// One post-selected step with default options.
pub fn step(s: &mut StateVector, problem: &OdeProblem, plan: &StepPlan) -> Result<f64> {
    Propagator::new(problem, SolverOptions::default()).step(s, plan.tau)
}

#[derive(Clone, Debug)]
pub struct RunResult {
    /// `|0> (x) psi~(T)`, unnormalized.
    pub final_state: StateVector,
    /// `||psi~(T)||^2 / ||psi0||^2`.
    pub success_prob: f64,
    /// Squared norms after each step, starting with the initial one.
    pub norm_trace: Vec<f64>,
    pub plan: StepPlan,
}

impl RunResult {
    pub fn solution(&self) -> &[C64] {
        self.final_state.system_part()
    }

    pub fn rotations(&self) -> u64 {
        self.final_state.rotations()
    }
}

pub fn run_postselect(problem: &OdeProblem, plan: &StepPlan, options: SolverOptions) -> Result<RunResult> {
    run_postselect_observing(problem, plan, options, |_, _| Ok(()))
}

/// [`run_postselect`] with a callback after the initial state (step 0) and
/// after every step.
pub fn run_postselect_observing<F>(
    problem: &OdeProblem,
    plan: &StepPlan,
    options: SolverOptions,
    mut observe: F,
) -> Result<RunResult>
where
    F: FnMut(usize, &StateVector) -> Result<()>,
{
    plan.check_against(problem)?;
    let prop = Propagator::new(problem, options);
    let mut s = StateVector::with_ancilla(problem.psi0())?;
    let initial = s.norm_sq();
    let mut norm_trace = Vec::with_capacity(plan.steps + 1);
    norm_trace.push(initial);
    observe(0, &s)?;
    for k in 1..=plan.steps {
        match prop.step(&mut s, plan.tau) {
            Err(Error::DegenerateState) => return Err(Error::SuccessUnderflow { step: k, norm_sq: 0.0 }),
            other => other?,
        };
        let norm_sq = s.norm_sq();
        if norm_sq < UNDERFLOW_NORM_SQ * initial {
            return Err(Error::SuccessUnderflow { step: k, norm_sq });
        }
        norm_trace.push(norm_sq);
        observe(k, &s)?;
    }
    let success_prob = s.norm_sq() / initial;
    Ok(RunResult {
        final_state: s,
        success_prob,
        norm_trace,
        plan: *plan,
    })
}

/// How observables are read out from a surviving shot.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Readout {
    /// The shot's exact expectation value.
    #[default]
    Exact,
    /// One computational-basis sample per shot; observables must be diagonal.
    ComputationalBasis,
}

#[derive(Clone, Debug)]
pub struct ShotSettings {
    pub shots: usize,
    pub seed: u64,
    pub observables: Vec<PauliSum>,
    pub readout: Readout,
    /// Also record estimates every this many steps.
    pub record_every: Option<usize>,
}

impl ShotSettings {
    pub fn new(shots: usize, seed: u64) -> Self {
        ShotSettings {
            shots,
            seed,
            observables: vec![],
            readout: Readout::Exact,
            record_every: None,
        }
    }

    pub fn observables(mut self, observables: Vec<PauliSum>) -> Self {
        self.observables = observables;
        self
    }

    pub fn readout(mut self, readout: Readout) -> Self {
        self.readout = readout;
        self
    }

    pub fn record_every(mut self, every: usize) -> Self {
        self.record_every = Some(every.max(1));
        self
    }

    fn validate(&self, n: usize) -> Result<()> {
        if self.shots == 0 {
            return Err(Error::InvalidParameter("need at least one shot".into()));
        }
        for o in &self.observables {
            if o.n_qubits() != n {
                return Err(Error::DimensionMismatch {
                    expected: n,
                    found: o.n_qubits(),
                });
            }
            if !o.is_hermitian() {
                return Err(Error::NonHermitian("observable has complex coefficients".into()));
            }
            if self.readout == Readout::ComputationalBasis
                && o.terms().iter().any(|t| t.string.axes().iter().any(|&p| p == Pauli::X || p == Pauli::Y))
            {
                return Err(Error::InvalidParameter(
                    "computational-basis readout needs observables built from I and Z".into(),
                ));
            }
        }
        Ok(())
    }

    fn record_steps(&self, total: usize) -> Vec<usize> {
        let mut steps: Vec<usize> = match self.record_every {
            Some(every) => (0..=total).step_by(every).collect(),
            None => vec![],
        };
        if steps.last() != Some(&total) {
            steps.push(total);
        }
        steps
    }
}

/// Sample mean with standard error `s / sqrt(k)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Estimate {
    pub mean: f64,
    pub stderr: f64,
}

#[derive(Clone, Debug, Default)]
struct Moments {
    count: usize,
    sums: Vec<f64>,
    squares: Vec<f64>,
}

impl Moments {
    fn new(k: usize) -> Self {
        Moments {
            count: 0,
            sums: vec![0.0; k],
            squares: vec![0.0; k],
        }
    }

    fn push(&mut self, values: &[f64]) {
        self.count += 1;
        for (i, v) in values.iter().enumerate() {
            self.sums[i] += v;
            self.squares[i] += v * v;
        }
    }

    fn merge(&mut self, other: &Moments) {
        self.count += other.count;
        for i in 0..self.sums.len() {
            self.sums[i] += other.sums[i];
            self.squares[i] += other.squares[i];
        }
    }

    fn estimates(&self) -> Option<Vec<Estimate>> {
        if self.count == 0 {
            return None;
        }
        let k = self.count as f64;
        Some(
            self.sums
                .iter()
                .zip(&self.squares)
                .map(|(s, q)| {
                    let mean = s / k;
                    let var = if self.count > 1 {
                        ((q - k * mean * mean) / (k - 1.0)).max(0.0)
                    } else {
                        0.0
                    };
                    Estimate {
                        mean,
                        stderr: (var / k).sqrt(),
                    }
                })
                .collect(),
        )
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SeriesPoint {
    pub step: usize,
    pub time: f64,
    /// Shots contributing at this point.
    pub samples: usize,
    pub estimates: Option<Vec<Estimate>>,
}

/// Shot statistics of the post-selected mode. Estimates are means over the
/// surviving shots; they are `None` when no shot survived.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryStats {
    pub shots: usize,
    pub successes: usize,
    pub seed: u64,
    pub estimates: Option<Vec<Estimate>>,
    pub series: Vec<SeriesPoint>,
}

impl TrajectoryStats {
    pub fn success_rate(&self) -> f64 {
        self.successes as f64 / self.shots as f64
    }

    /// Binomial standard error `sqrt(p (1 - p) / shots)` at the observed rate.
    pub fn success_stderr(&self) -> f64 {
        let p = self.success_rate();
        (p * (1.0 - p) / self.shots as f64).sqrt()
    }

    pub fn require_estimates(&self) -> Result<&[Estimate]> {
        self.estimates
            .as_deref()
            .ok_or(Error::NoSurvivors { shots: self.shots })
    }
}

fn readout_values(
    s: &StateVector,
    observables: &[PauliSum],
    readout: Readout,
    rng: &mut impl Rng,
) -> Result<Vec<f64>> {
    match readout {
        Readout::Exact => observables.iter().map(|o| s.expectation(o, true)).collect(),
        Readout::ComputationalBasis => {
            let sys = s.system_part();
            let total: f64 = sys.iter().map(|z| z.norm_sqr()).sum();
            let u: f64 = rng.random::<f64>() * total;
            let mut acc = 0.0;
            let mut outcome = sys.len() - 1;
            for (b, z) in sys.iter().enumerate() {
                acc += z.norm_sqr();
                if u < acc {
                    outcome = b;
                    break;
                }
            }
            Ok(observables
                .iter()
                .map(|o| {
                    o.terms()
                        .iter()
                        .map(|t| {
                            let (_, z, _) = t.string.masks();
                            let sign = if (outcome as u64 & z).count_ones().is_multiple_of(2) { 1.0 } else { -1.0 };
                            t.coeff.re * sign
                        })
                        .sum()
                })
                .collect())
        }
    }
}

fn normalized_start(problem: &OdeProblem) -> Result<StateVector> {
    let mut s = StateVector::with_ancilla(problem.psi0())?;
    s.normalize()?;
    Ok(s)
}

/// Post-selection by sampling: each shot measures the ancilla after every
/// dilation and is discarded on outcome 1. Shots run in parallel; the result
/// depends only on the seed.
pub fn run_trajectories(
    problem: &OdeProblem,
    plan: &StepPlan,
    settings: &ShotSettings,
    options: SolverOptions,
) -> Result<TrajectoryStats> {
    plan.check_against(problem)?;
    settings.validate(problem.n_qubits())?;
    let prop = Propagator::new(problem, options);
    let slots = prop.jump_count() + 1;
    let record = settings.record_steps(plan.steps);
    let k = settings.observables.len();

    let shot = |id: usize| -> Result<(bool, Vec<Option<Vec<f64>>>)> {
        let mut stream = ShotStream::new(settings.seed, id as u64, slots);
        let mut s = normalized_start(problem)?;
        let mut values = Vec::with_capacity(record.len());
        let mut next = 0;
        let mut alive = true;
        for step in 0..=plan.steps {
            if step > 0 && alive {
                alive = prop.step_sampled(&mut s, plan.tau, &mut stream, step)?;
            }
            if next < record.len() && record[next] == step {
                values.push(if alive {
                    Some(readout_values(&s, &settings.observables, settings.readout, stream.at(step, slots - 1))?)
                } else {
                    None
                });
                next += 1;
            }
            if !alive && next >= record.len() {
                break;
            }
        }
        while values.len() < record.len() {
            values.push(None);
        }
        Ok((alive, values))
    };

    let chunks: Vec<usize> = (0..settings.shots).step_by(CHUNK).collect();
    let partials = chunks
        .par_iter()
        .map(|&start| -> Result<(usize, Vec<Moments>)> {
            let mut successes = 0;
            let mut moments = vec![Moments::new(k); record.len()];
            for id in start..(start + CHUNK).min(settings.shots) {
                let (alive, values) = shot(id)?;
                successes += alive as usize;
                for (m, v) in moments.iter_mut().zip(&values) {
                    if let Some(v) = v {
                        m.push(v);
                    }
                }
            }
            Ok((successes, moments))
        })
        .collect::<Result<Vec<_>>>()?;

    let mut successes = 0;
    let mut totals = vec![Moments::new(k); record.len()];
    for (s, moments) in &partials {
        successes += s;
        for (t, m) in totals.iter_mut().zip(moments) {
            t.merge(m);
        }
    }
    let series: Vec<SeriesPoint> = record
        .iter()
        .zip(&totals)
        .map(|(&step, m)| SeriesPoint {
            step,
            time: step as f64 * plan.tau,
            samples: m.count,
            estimates: m.estimates(),
        })
        .collect();
    let estimates = if successes > 0 {
        totals.last().and_then(Moments::estimates)
    } else {
        None
    };
    Ok(TrajectoryStats {
        shots: settings.shots,
        successes,
        seed: settings.seed,
        estimates,
        series: if settings.record_every.is_some() { series } else { vec![] },
    })
}

#[derive(Clone, Debug)]
pub struct DensitySnapshot {
    pub step: usize,
    pub time: f64,
    /// Shot-averaged `rho`, present under the dense cap.
    pub density: Option<DenseMatrix>,
    pub estimates: Vec<Estimate>,
}

#[derive(Clone, Debug)]
pub struct LindbladResult {
    pub shots: usize,
    pub seed: u64,
    /// Snapshots at the recorded steps; the last one is the final time.
    pub snapshots: Vec<DensitySnapshot>,
}

impl LindbladResult {
    pub fn final_snapshot(&self) -> &DensitySnapshot {
        self.snapshots.last().expect("final time is always recorded")
    }
}

/// Trace-out mode: the ancilla is reset after every dilation instead of being
/// post-selected, so the shot average `rho` follows
/// `d rho/dt = A rho + rho A^dagger + 2 sum_j L_j rho L_j^dagger` up to `O(tau)`.
pub fn run_lindblad(
    problem: &OdeProblem,
    plan: &StepPlan,
    settings: &ShotSettings,
    options: SolverOptions,
) -> Result<LindbladResult> {
    plan.check_against(problem)?;
    settings.validate(problem.n_qubits())?;
    let prop = Propagator::new(problem, options);
    let slots = prop.jump_count() + 1;
    let record = settings.record_steps(plan.steps);
    let k = settings.observables.len();
    let keep_density = problem.n_qubits() <= dense_cap();
    let dim = problem.dim();

    let chunks: Vec<usize> = (0..settings.shots).step_by(CHUNK).collect();
    let partials = chunks
        .par_iter()
        .map(|&start| -> Result<(Vec<Option<DenseMatrix>>, Vec<Moments>)> {
            let mut rhos: Vec<Option<DenseMatrix>> =
                record.iter().map(|_| keep_density.then(|| DenseMatrix::zeros(dim))).collect();
            let mut moments = vec![Moments::new(k); record.len()];
            for id in start..(start + CHUNK).min(settings.shots) {
                let mut stream = ShotStream::new(settings.seed, id as u64, slots);
                let mut s = normalized_start(problem)?;
                let mut next = 0;
                for step in 0..=plan.steps {
                    if step > 0 {
                        prop.step_reset(&mut s, plan.tau, &mut stream, step)?;
                    }
                    if record[next] == step {
                        s.normalize()?;
                        if let Some(rho) = rhos[next].as_mut() {
                            *rho = rho.add(&outer(s.system_part()));
                        }
                        let v = readout_values(&s, &settings.observables, settings.readout, stream.at(step, slots - 1))?;
                        moments[next].push(&v);
                        next += 1;
                        if next == record.len() {
                            break;
                        }
                    }
                }
            }
            Ok((rhos, moments))
        })
        .collect::<Result<Vec<_>>>()?;

    let mut rhos: Vec<Option<DenseMatrix>> =
        record.iter().map(|_| keep_density.then(|| DenseMatrix::zeros(dim))).collect();
    let mut totals = vec![Moments::new(k); record.len()];
    for (chunk_rhos, moments) in &partials {
        for (acc, r) in rhos.iter_mut().zip(chunk_rhos) {
            if let (Some(acc), Some(r)) = (acc.as_mut(), r) {
                *acc = acc.add(r);
            }
        }
        for (t, m) in totals.iter_mut().zip(moments) {
            t.merge(m);
        }
    }
    let inv = C64::new(1.0 / settings.shots as f64, 0.0);
    let snapshots = record
        .iter()
        .zip(rhos)
        .zip(&totals)
        .map(|((&step, rho), m)| DensitySnapshot {
            step,
            time: step as f64 * plan.tau,
            density: rho.map(|r| r.scale(inv)),
            estimates: m.estimates().unwrap_or_default(),
        })
        .collect();
    Ok(LindbladResult {
        shots: settings.shots,
        seed: settings.seed,
        snapshots,
    })
}

/// Step count from the bound quantities:
///
/// ```text
/// R = max(1, ceil(max{ C sup||psi|| T^2, S4 T^2 } / (||psi(T)|| eps)))
/// ```
///
/// where `C` is [`BoundQuantities::trotter_sum`] and `S4` is `sup_l4`.
pub fn choose_step_count(problem: &OdeProblem, epsilon: f64, bounds: &BoundQuantities) -> Result<StepPlan> {
    if !(epsilon > 0.0 && epsilon < 1.0) {
        return Err(Error::InvalidParameter(format!("epsilon must lie in (0, 1), got {epsilon}")));
    }
    let values = [
        bounds.commutator_sum,
        bounds.hamiltonian_split_sum,
        bounds.sup_psi,
        bounds.sup_l4,
        bounds.final_norm,
    ];
    if values.iter().any(|v| !v.is_finite() || *v < 0.0) {
        return Err(Error::InvalidParameter("bound quantities must be finite and >= 0".into()));
    }
    if bounds.final_norm == 0.0 {
        return Err(Error::UnsolvableTarget);
    }
    let t2 = problem.time() * problem.time();
    let denom = bounds.final_norm * epsilon;
    let trotter = bounds.trotter_sum() * bounds.sup_psi * t2 / denom;
    let dissipative = bounds.sup_l4 * t2 / denom;
    let worst = trotter.max(dissipative);
    let (steps, branch) = if worst <= 1.0 {
        (1, StepBranch::Floor)
    } else if trotter >= dissipative {
        (worst.ceil() as usize, StepBranch::Trotter)
    } else {
        (worst.ceil() as usize, StepBranch::Dissipative)
    };
    StepPlan::with_branch(problem.time(), steps, branch)
}

/// `q = ||psi0|| / ||psi(T)||`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct StateRatio {
    pub q: f64,
}

impl StateRatio {
    /// Expected applications of the step operator, `q^2 R`.
    pub fn repetitions(&self, steps: usize) -> f64 {
        self.q * self.q * steps as f64
    }
}

pub fn state_ratio(problem: &OdeProblem, solution: &[C64]) -> Result<StateRatio> {
    if solution.len() != problem.dim() {
        return Err(Error::DimensionMismatch {
            expected: problem.dim(),
            found: solution.len(),
        });
    }
    let final_norm = vec_norm(solution);
    if final_norm == 0.0 {
        return Err(Error::UnsolvableTarget);
    }
    Ok(StateRatio {
        q: vec_norm(problem.psi0()) / final_norm,
    })
}

/// `4 ||psi - phi|| / ||psi||` when `||psi - phi|| <= ||psi|| / 2`, the
/// guaranteed bound on `|| psi/|psi| - phi/|phi| ||`; `None` otherwise.
pub fn normalized_error_bound(psi: &[C64], phi: &[C64]) -> Option<f64> {
    let gap = vec_distance(psi, phi);
    let norm = vec_norm(psi);
    (norm > 0.0 && gap <= 0.5 * norm).then(|| 4.0 * gap / norm)
}

/// Least-squares slope of `ln y` against `ln x`.
pub fn log_log_slope(xs: &[f64], ys: &[f64]) -> f64 {
    assert_eq!(xs.len(), ys.len());
    let lx: Vec<f64> = xs.iter().map(|x| x.ln()).collect();
    let ly: Vec<f64> = ys.iter().map(|y| y.ln()).collect();
    let n = lx.len() as f64;
    let mx = lx.iter().sum::<f64>() / n;
    let my = ly.iter().sum::<f64>() / n;
    let cov: f64 = lx.iter().zip(&ly).map(|(x, y)| (x - mx) * (y - my)).sum();
    let var: f64 = lx.iter().map(|x| (x - mx).powi(2)).sum();
    cov / var
}
