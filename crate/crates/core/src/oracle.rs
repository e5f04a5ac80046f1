//! Dense brute-force references: matrix exponentials, the exact one-step map,
//! density-matrix integration, and the quantities entering the error bounds.

use nalgebra::DMatrix;
use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

use crate::dense::{check_cap, outer, vec_norm, DenseMatrix};
use crate::error::{Error, Result};
use crate::pauli::PauliSum;
use crate::problem::{Dilation, OdeProblem};

/// Default number of time-grid points for `sup_t` surrogates.
pub const DEFAULT_GRID_POINTS: usize = 64;

const MAX_GRID_POINTS: usize = 1 << 13;

fn one_norm(m: &DMatrix<C64>) -> f64 {
    (0..m.ncols())
        .map(|c| m.column(c).iter().map(|z| z.norm()).sum::<f64>())
        .fold(0.0, f64::max)
}

/// `exp(M t)` by scaling and squaring a truncated Taylor series.
///
/// `M t` is scaled by `2^-s` until its 1-norm is at most 1/2; the series is
/// then summed until the next term is below `1e-18` of the partial sum.
pub fn expm(m: &DenseMatrix, t: f64) -> Result<DenseMatrix> {
    if !t.is_finite() {
        return Err(Error::NonFinite("expm time".into()));
    }
    check_cap("expm", m.qubits())?;
    let b = m.as_matrix() * C64::new(t, 0.0);
    let norm = one_norm(&b);
    if !norm.is_finite() {
        return Err(Error::NonFinite("expm argument".into()));
    }
    let squarings = if norm > 0.5 { (norm / 0.5).log2().ceil() as u32 } else { 0 };
    let b = b * C64::new(0.5f64.powi(squarings as i32), 0.0);
    let dim = m.dim();
    let mut sum = DMatrix::<C64>::identity(dim, dim);
    let mut term = DMatrix::<C64>::identity(dim, dim);
    for k in 1..=40 {
        term = &term * &b * C64::new(1.0 / k as f64, 0.0);
        sum += &term;
        if one_norm(&term) <= 1e-18 * one_norm(&sum) {
            break;
        }
    }
    for _ in 0..squarings {
        sum = &sum * &sum;
    }
    Ok(DenseMatrix::wrap(sum))
}

/// `exp(A t) v`, checked against two half steps.
pub fn expm_apply(a: &DenseMatrix, v: &[C64], t: f64) -> Result<Vec<C64>> {
    if v.len() != a.dim() {
        return Err(Error::DimensionMismatch {
            expected: a.dim(),
            found: v.len(),
        });
    }
    if !(t >= 0.0) {
        return Err(Error::InvalidParameter(format!("expm_apply needs t >= 0, got {t}")));
    }
    let full = expm(a, t)?.apply(v);
    let half = expm(a, t / 2.0)?;
    let twice = half.apply(&half.apply(v));
    let defect = crate::dense::vec_distance(&full, &twice);
    let scale = vec_norm(v) * (1.0 + one_norm(a.as_matrix()) * t);
    if defect > 1e-12 * scale {
        return Err(Error::NonConvergence(format!(
            "expm self-consistency defect {defect:e} exceeds tolerance"
        )));
    }
    Ok(full)
}

/// `psi(t_k)` on the uniform grid `t_k = k T / (points - 1)`.
pub fn solution_on_grid(problem: &OdeProblem, points: usize) -> Result<Vec<Vec<C64>>> {
    if points < 2 {
        return Err(Error::InvalidParameter("time grid needs at least two points".into()));
    }
    let a = &problem.dense()?.generator;
    let dt = problem.time() / (points - 1) as f64;
    let step = expm(a, dt)?;
    let mut out = Vec::with_capacity(points);
    out.push(problem.psi0().to_vec());
    for k in 1..points {
        let next = step.apply(&out[k - 1]);
        out.push(next);
    }
    Ok(out)
}

/// Exact ODE solution `exp(A T) psi0`.
pub fn exact_solution(problem: &OdeProblem) -> Result<Vec<C64>> {
    expm_apply(&problem.dense()?.generator, problem.psi0(), problem.time())
}

/// `(<0| (x) I) exp(i sqrt(2 tau) G) (|0> (x) I)`.
pub fn dilation_top_block(d: &Dilation, tau: f64) -> Result<DenseMatrix> {
    let g = d.dense.as_ref().ok_or(Error::Capacity {
        what: "dense dilation",
        qubits: d.n_total(),
        cap: crate::dense::dense_cap(),
    })?;
    let u = expm(&g.scale(C64::new(0.0, Dilation::angle(tau))), 1.0)?;
    let half = g.dim() / 2;
    Ok(DenseMatrix::wrap(u.as_matrix().view((0, 0), (half, half)).into_owned()))
}

/// The effective `n`-qubit one-step map: `exp(-i tau H)` followed, for each
/// jump in order, by the dilation and projection onto ancilla `|0>`.
pub fn exact_step_dense(problem: &OdeProblem, tau: f64) -> Result<DenseMatrix> {
    if !(tau >= 0.0) {
        return Err(Error::InvalidParameter(format!("time step must be >= 0, got {tau}")));
    }
    let shadow = problem.dense()?;
    let mut m = expm(&shadow.hamiltonian.scale(C64::new(0.0, -1.0)), tau)?;
    for d in problem.dilations() {
        m = dilation_top_block(&d, tau)?.matmul(&m);
    }
    Ok(m)
}

/// Jump-term weight in `d rho/dt = A rho + rho A^dagger + w sum_j L_j rho L_j^dagger`.
#[derive(Clone, Copy)]
enum JumpWeight {
    /// `w = 2`, the trace-preserving dynamics realized by reset-and-trace.
    Lindblad,
    /// `w = 0`, i.e. `rho(t) = psi(t) psi(t)^dagger` of the post-selected ODE.
    NoJump,
}

fn density_rhs(a: &DMatrix<C64>, jumps: &[DMatrix<C64>], weight: f64, rho: &DMatrix<C64>) -> DMatrix<C64> {
    let mut out = a * rho + rho * a.adjoint();
    if weight != 0.0 {
        for l in jumps {
            out += (l * rho * l.adjoint()) * C64::new(weight, 0.0);
        }
    }
    out
}

fn rk4_on_grid(
    a: &DMatrix<C64>,
    jumps: &[DMatrix<C64>],
    weight: f64,
    rho0: &DMatrix<C64>,
    grid: &[f64],
    h: f64,
) -> Vec<DMatrix<C64>> {
    let half = C64::new(0.5, 0.0);
    let mut rho = rho0.clone();
    let mut t = 0.0;
    let mut out = Vec::with_capacity(grid.len());
    for &target in grid {
        let span = target - t;
        let steps = (span / h).ceil() as usize;
        if steps > 0 {
            let dt = span / steps as f64;
            let cdt = C64::new(dt, 0.0);
            for _ in 0..steps {
                let k1 = density_rhs(a, jumps, weight, &rho);
                let k2 = density_rhs(a, jumps, weight, &(&rho + &k1 * (cdt * half)));
                let k3 = density_rhs(a, jumps, weight, &(&rho + &k2 * (cdt * half)));
                let k4 = density_rhs(a, jumps, weight, &(&rho + &k3 * cdt));
                rho += (k1 + (k2 + k3) * C64::new(2.0, 0.0) + k4) * (cdt / 6.0);
            }
        }
        t = target;
        out.push(rho.clone());
    }
    out
}

fn density_rk4(problem: &OdeProblem, grid: &[f64], weight: JumpWeight) -> Result<Vec<DenseMatrix>> {
    if grid.iter().any(|t| !(t.is_finite() && *t >= 0.0)) || grid.windows(2).any(|w| w[1] < w[0]) {
        return Err(Error::InvalidParameter(
            "time grid must be non-negative and non-decreasing".into(),
        ));
    }
    let shadow = problem.dense()?;
    let a = shadow.generator.as_matrix();
    let jumps: Vec<DMatrix<C64>> = shadow.jumps.iter().map(|l| l.as_matrix().clone()).collect();
    let w = match weight {
        JumpWeight::Lindblad => 2.0,
        JumpWeight::NoJump => 0.0,
    };
    let psi0 = problem.psi0();
    let norm_sq = vec_norm(psi0).powi(2);
    let rho0 = outer(psi0).into_matrix() / C64::new(norm_sq, 0.0);

    let rate = one_norm(a) + 2.0 * jumps.iter().map(|l| one_norm(l).powi(2)).sum::<f64>();
    let mut h = 0.1 / rate.max(1e-3);
    if let Some(&end) = grid.last() {
        h = h.min(end.max(1e-3));
    }
    let mut coarse = rk4_on_grid(a, &jumps, w, &rho0, grid, h);
    for _ in 0..20 {
        h /= 2.0;
        let fine = rk4_on_grid(a, &jumps, w, &rho0, grid, h);
        let defect = coarse
            .iter()
            .zip(&fine)
            .map(|(x, y)| (x - y).norm())
            .fold(0.0, f64::max);
        if defect <= 1e-8 {
            let out: Vec<DenseMatrix> = fine.into_iter().map(DenseMatrix::wrap).collect();
            if let JumpWeight::Lindblad = weight {
                for rho in &out {
                    let drift = (rho.trace() - C64::new(1.0, 0.0)).norm();
                    if drift > 1e-8 {
                        return Err(Error::NonConvergence(format!("trace drift {drift:e}")));
                    }
                }
            }
            return Ok(out);
        }
        coarse = fine;
    }
    Err(Error::NonConvergence("RK4 step halving did not reach 1e-8".into()))
}

/// Density matrices of `d rho/dt = A rho + rho A^dagger + 2 sum_j L_j rho L_j^dagger`
/// at each grid time, starting from the normalized `psi0 psi0^dagger` at `t = 0`.
///
/// The factor 2 on the jump term is what the dilation `exp(i sqrt(2 tau) G)`
/// followed by an ancilla reset produces, and it is the weight that makes the
/// evolution trace preserving.
pub fn lindblad_rk4(problem: &OdeProblem, grid: &[f64]) -> Result<Vec<DenseMatrix>> {
    density_rk4(problem, grid, JumpWeight::Lindblad)
}

/// `exp(At) rho0 exp(A^dagger t)` by the same integrator, without jump terms.
pub fn postselected_rk4(problem: &OdeProblem, grid: &[f64]) -> Result<Vec<DenseMatrix>> {
    density_rk4(problem, grid, JumpWeight::NoJump)
}

/// Every quantity in the cumulative error bound and the step-count rule.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BoundQuantities {
    /// `sum_j || [sum_{k<j} A_k, A_j] ||` with `A_0 = -iH`, `A_j = -L_j^dagger L_j`.
    pub commutator_sum: f64,
    /// Same sum over the ordered Pauli terms of `H`, covering the inner
    /// product-formula split of `exp(-i tau H)`; zero when `H` is applied exactly.
    pub hamiltonian_split_sum: f64,
    /// `sup_t ||psi(t)||`.
    pub sup_psi: f64,
    /// `sum_j sup_t ||(L_j^dagger L_j)^2 psi(t)||`.
    pub sup_l4: f64,
    /// `||psi(T)||`.
    pub final_norm: f64,
}

impl BoundQuantities {
    /// Commutator total used for the realized operator ordering.
    pub fn trotter_sum(&self) -> f64 {
        self.commutator_sum + self.hamiltonian_split_sum
    }

    /// Same quantities for a solver that applies `exp(-i tau H)` exactly.
    pub fn with_exact_hamiltonian(mut self) -> Self {
        self.hamiltonian_split_sum = 0.0;
        self
    }

    /// `||psi(T) - psi~(T)||` bound after `R` steps:
    /// `1/2 C sup||psi|| T^2/R + S4 * 2T^2/(3R)`.
    pub fn cumulative_bound(&self, time: f64, steps: usize) -> f64 {
        let r = steps as f64;
        0.5 * self.trotter_sum() * self.sup_psi * time * time / r
            + self.sup_l4 * 2.0 * time * time / (3.0 * r)
    }
}

/// Operator-norm bound on `M(tau) - exp(A tau)` for one step with exact `H`:
/// `tau^2/2 * commutator_sum + sum_j 2 tau^2/3 ||(L_j^dagger L_j)^2||`.
pub fn step_operator_bound(problem: &OdeProblem, tau: f64) -> Result<f64> {
    let shadow = problem.dense()?;
    let commutators = commutator_sum(problem)?;
    let taylor: f64 = shadow
        .dissipators
        .iter()
        .map(|k| k.matmul(k).spectral_norm())
        .sum();
    Ok(0.5 * commutators * tau * tau + taylor * 2.0 * tau * tau / 3.0)
}

fn commutator_sum(problem: &OdeProblem) -> Result<f64> {
    let shadow = problem.dense()?;
    let mut prefix = shadow.hamiltonian.scale(C64::new(0.0, -1.0));
    let mut total = 0.0;
    for k in &shadow.dissipators {
        let a_j = k.scale(C64::new(-1.0, 0.0));
        total += prefix.commutator(&a_j).spectral_norm();
        prefix = prefix.add(&a_j);
    }
    Ok(total)
}

fn hamiltonian_split_sum(h: &PauliSum) -> Result<f64> {
    let mut prefix = PauliSum::zero(h.n_qubits());
    let mut total = 0.0;
    for t in h.terms() {
        if t.string.is_identity() {
            continue;
        }
        let term = PauliSum::single(t.coeff, t.string.clone());
        let comm = prefix.commutator(&term)?;
        if !comm.is_empty() {
            total += comm.to_dense()?.spectral_norm();
        }
        prefix = prefix.add(&term)?;
    }
    Ok(total)
}

/// Evaluates [`BoundQuantities`] densely. The `sup_t` terms are maxima over a
/// uniform grid; the grid is doubled until both maxima move by under 1%.
pub fn compute_bound_quantities(problem: &OdeProblem, grid_points: usize) -> Result<BoundQuantities> {
    if grid_points < 2 {
        return Err(Error::InvalidParameter("time grid needs at least two points".into()));
    }
    let shadow = problem.dense()?;
    let squares: Vec<DenseMatrix> = shadow.dissipators.iter().map(|k| k.matmul(k)).collect();
    let sups = |points: usize| -> Result<(f64, f64)> {
        let states = solution_on_grid(problem, points)?;
        let sup_psi = states.iter().map(|s| vec_norm(s)).fold(0.0, f64::max);
        let sup_l4 = squares
            .iter()
            .map(|k2| states.iter().map(|s| vec_norm(&k2.apply(s))).fold(0.0, f64::max))
            .sum();
        Ok((sup_psi, sup_l4))
    };
    let mut points = grid_points;
    let mut coarse = sups(points)?;
    let (sup_psi, sup_l4) = loop {
        let finer = 2 * points - 1;
        let fine = sups(finer)?;
        let stable = |a: f64, b: f64| (a - b).abs() <= 0.01 * b.abs().max(f64::MIN_POSITIVE);
        if stable(coarse.0, fine.0) && stable(coarse.1, fine.1) || (coarse.1 == 0.0 && fine.1 == 0.0 && stable(coarse.0, fine.0)) {
            break fine;
        }
        if finer > MAX_GRID_POINTS {
            return Err(Error::NonConvergence("sup over time grid did not stabilize".into()));
        }
        points = finer;
        coarse = fine;
    };
    let final_norm = vec_norm(&exact_solution(problem)?);
    Ok(BoundQuantities {
        commutator_sum: commutator_sum(problem)?,
        hamiltonian_split_sum: hamiltonian_split_sum(problem.hamiltonian())?,
        sup_psi,
        sup_l4,
        final_norm,
    })
}
