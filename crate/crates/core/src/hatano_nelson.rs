//! Interacting Hatano-Nelson chain with open boundaries, mapped to qubits by
//! Jordan-Wigner (site `i` is qubit `i`, `|1>` is occupied).
//!
//! The non-Hermitian Hamiltonian splits as `H_NH = H + sum_b H_A,b` with
//!
//! ```text
//! H      = sum_b (J/2)(Y_b Y_b+1 + X_b X_b+1) + 1/4 sum_{i<j} V_ij (I - Z_i)(I - Z_j)
//! H_A,b  = -(i gamma/2)(Y_b X_b+1 - X_b Y_b+1)
//! ```
//!
//! Each `i H_A,b` has spectrum `{-gamma, 0, 0, gamma}`, so shifting by
//! `gamma` per bond gives `A = -i H_NH - (n-1) gamma I = -i H - sum_b K_b`
//! with `K_b = L_b^2` positive semidefinite and `L_b` Hermitian.

use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};
use std::f64::consts::FRAC_1_SQRT_2;

use crate::dense::DenseMatrix;
use crate::error::{Error, Result};
use crate::pauli::{Pauli, PauliString, PauliSum};
use crate::problem::{build_dilation, InitialState, OdeProblem};

/// Residual tolerance of [`verify_hn_factorization`].
pub const FACTORIZATION_TOLERANCE: f64 = 1e-12;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Interaction {
    /// `V_{i,i+1} = V0` on every bond.
    NearestNeighbor(f64),
    /// Full matrix; only entries above the diagonal may be nonzero.
    Matrix(Vec<Vec<f64>>),
}

impl Interaction {
    fn pairs(&self, sites: usize) -> Result<Vec<(usize, usize, f64)>> {
        match self {
            Interaction::NearestNeighbor(v0) => Ok((0..sites - 1).map(|i| (i, i + 1, *v0)).collect()),
            Interaction::Matrix(rows) => {
                if rows.len() != sites || rows.iter().any(|r| r.len() != sites) {
                    return Err(Error::Shape(format!("interaction matrix must be {sites}x{sites}")));
                }
                let mut out = vec![];
                for (i, row) in rows.iter().enumerate() {
                    for (j, &v) in row.iter().enumerate() {
                        if !v.is_finite() {
                            return Err(Error::NonFinite(format!("V[{i}][{j}]")));
                        }
                        if j <= i && v != 0.0 {
                            return Err(Error::InvalidParameter(format!(
                                "interaction matrix must be strictly upper triangular, V[{i}][{j}] = {v}"
                            )));
                        }
                        if j > i && v != 0.0 {
                            out.push((i, j, v));
                        }
                    }
                }
                Ok(out)
            }
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HnParams {
    pub sites: usize,
    /// Hopping `J`.
    pub coupling: f64,
    /// Hopping asymmetry, `>= 0`.
    pub gamma: f64,
    pub interaction: Interaction,
    pub initial: InitialState,
    pub time: f64,
}

impl HnParams {
    fn validate(&self) -> Result<()> {
        if self.sites < 2 {
            return Err(Error::InvalidParameter(format!("need at least 2 sites, got {}", self.sites)));
        }
        if !self.coupling.is_finite() {
            return Err(Error::NonFinite("coupling".into()));
        }
        if !(self.gamma >= 0.0) || !self.gamma.is_finite() {
            return Err(Error::InvalidParameter(format!("gamma must be finite and >= 0, got {}", self.gamma)));
        }
        Ok(())
    }

    pub fn bonds(&self) -> usize {
        self.sites - 1
    }
}

fn two_site(sites: usize, bond: usize, a: Pauli, b: Pauli) -> PauliString {
    PauliString::on(sites, &[(bond, a), (bond + 1, b)])
}

fn real(x: f64) -> C64 {
    C64::new(x, 0.0)
}

fn check_bond(sites: usize, bond: usize) -> Result<()> {
    if sites < 2 || bond + 1 >= sites {
        return Err(Error::InvalidParameter(format!("bond {bond} out of range for {sites} sites")));
    }
    Ok(())
}

/// `(L_b, K_b)` for the bond coupling sites `bond` and `bond + 1`:
///
/// ```text
/// K_b = (gamma/2)(Y X - X Y) + gamma I
/// L_b = (sqrt(gamma)/2)[(1 - 1/sqrt 2) Z Z + (1/sqrt 2)(Y X - X Y) + (1 + 1/sqrt 2) I]
/// ```
pub fn hn_jump_operator(sites: usize, bond: usize, gamma: f64) -> Result<(PauliSum, PauliSum)> {
    check_bond(sites, bond)?;
    if !(gamma >= 0.0) || !gamma.is_finite() {
        return Err(Error::InvalidParameter(format!("gamma must be finite and >= 0, got {gamma}")));
    }
    let yx = two_site(sites, bond, Pauli::Y, Pauli::X);
    let xy = two_site(sites, bond, Pauli::X, Pauli::Y);
    let zz = two_site(sites, bond, Pauli::Z, Pauli::Z);
    let id = PauliString::identity(sites);
    let k = PauliSum::from_terms(
        sites,
        [
            (real(gamma / 2.0), yx.clone()),
            (real(-gamma / 2.0), xy.clone()),
            (real(gamma), id.clone()),
        ],
    )?;
    let s = gamma.sqrt() / 2.0;
    let l = PauliSum::from_terms(
        sites,
        [
            (real(s * (1.0 - FRAC_1_SQRT_2)), zz),
            (real(s * FRAC_1_SQRT_2), yx),
            (real(-s * FRAC_1_SQRT_2), xy),
            (real(s * (1.0 + FRAC_1_SQRT_2)), id),
        ],
    )?;
    Ok((l, k))
}

/// Anti-Hermitian hopping part `H_A,b`, coefficient `-(i gamma/2)` on `Y X - X Y`.
pub fn hn_asymmetric_term(sites: usize, bond: usize, gamma: f64) -> Result<PauliSum> {
    check_bond(sites, bond)?;
    let c = C64::new(0.0, -gamma / 2.0);
    PauliSum::from_terms(
        sites,
        [
            (c, two_site(sites, bond, Pauli::Y, Pauli::X)),
            (-c, two_site(sites, bond, Pauli::X, Pauli::Y)),
        ],
    )
}

/// Hermitian part: XY hopping plus the density-density interaction.
pub fn hn_hamiltonian(p: &HnParams) -> Result<PauliSum> {
    p.validate()?;
    let n = p.sites;
    let mut terms = vec![];
    for b in 0..p.bonds() {
        terms.push((real(p.coupling / 2.0), two_site(n, b, Pauli::Y, Pauli::Y)));
        terms.push((real(p.coupling / 2.0), two_site(n, b, Pauli::X, Pauli::X)));
    }
    // (I - Z_i)(I - Z_j) = I - Z_i - Z_j + Z_i Z_j
    for (i, j, v) in p.interaction.pairs(n)? {
        let q = real(v / 4.0);
        terms.push((q, PauliString::identity(n)));
        terms.push((-q, PauliString::on(n, &[(i, Pauli::Z)])));
        terms.push((-q, PauliString::on(n, &[(j, Pauli::Z)])));
        terms.push((q, PauliString::on(n, &[(i, Pauli::Z), (j, Pauli::Z)])));
    }
    PauliSum::from_terms(n, terms)
}

/// `H_NH = H + sum_b H_A,b`.
pub fn hn_non_hermitian(p: &HnParams) -> Result<PauliSum> {
    let mut h = hn_hamiltonian(p)?;
    for b in 0..p.bonds() {
        h = h.add(&hn_asymmetric_term(p.sites, b, p.gamma)?)?;
    }
    Ok(h)
}

/// Site density `n_i = (I - Z_i)/2`.
pub fn site_density(sites: usize, site: usize) -> PauliSum {
    PauliSum::from_terms(
        sites,
        [
            (real(0.5), PauliString::identity(sites)),
            (real(-0.5), PauliString::on(sites, &[(site, Pauli::Z)])),
        ],
    )
    .expect("consistent qubit count")
}

pub fn site_densities(sites: usize) -> Vec<PauliSum> {
    (0..sites).map(|i| site_density(sites, i)).collect()
}

#[derive(Clone, Debug)]
pub struct HnProblem {
    pub problem: OdeProblem,
    /// `(n - 1) gamma`: `psi_NH(t) = exp(shift t) psi(t)`.
    pub shift: f64,
    pub non_hermitian: PauliSum,
    pub params: HnParams,
}

impl HnProblem {
    /// Factor that undoes the shift on an unnormalized state at time `t`.
    pub fn unshift_factor(&self, t: f64) -> f64 {
        (self.shift * t).exp()
    }
}

pub fn build_hn_problem(p: &HnParams) -> Result<HnProblem> {
    let h = hn_hamiltonian(p)?;
    let jumps = (0..p.bonds())
        .map(|b| hn_jump_operator(p.sites, b, p.gamma).map(|(l, _)| l))
        .collect::<Result<Vec<_>>>()?;
    let problem = OdeProblem::new(h, jumps, p.initial.clone(), p.time)?;
    Ok(HnProblem {
        problem,
        shift: p.bonds() as f64 * p.gamma,
        non_hermitian: hn_non_hermitian(p)?,
        params: p.clone(),
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Identity {
    /// `L^2 = K`.
    SquareRoot,
    /// `K` is PSD with minimum eigenvalue 0.
    MinimumEigenvalue,
    /// Dense dilation equals `X_0 L`.
    Dilation,
    /// `G` strings have weight at most 3.
    Locality,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub identity: Identity,
    pub bond: usize,
    pub residual: f64,
    pub tolerance: f64,
    pub passed: bool,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct FactorizationReport {
    pub checks: Vec<Check>,
}

impl FactorizationReport {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    pub fn failures(&self) -> impl Iterator<Item = &Check> {
        self.checks.iter().filter(|c| !c.passed)
    }
}

fn check(identity: Identity, bond: usize, residual: f64, tolerance: f64) -> Check {
    Check {
        identity,
        bond,
        residual,
        tolerance,
        passed: residual <= tolerance,
    }
}

/// Runs the four checks for one `(L, K)` pair. Residuals: Frobenius norm of
/// `L^2 - K`, `|lambda_min(K)|` (or `-lambda_min` when the minimum should not
/// be zero), Frobenius distance of the two dilations, and the excess of the
/// largest `G` weight over `max(3, weight(L) + 1)`.
pub fn verify_jump_factorization(bond: usize, l: &PauliSum, k: &PauliSum, tol: f64) -> Result<Vec<Check>> {
    let dl = l.to_dense()?;
    let dk = k.to_dense()?;
    let mut out = vec![check(Identity::SquareRoot, bond, dl.matmul(&dl).sub(&dk).frobenius_norm(), tol)];
    out.push(check(Identity::MinimumEigenvalue, bond, dk.hermitian_eigen().min().abs(), tol));

    let d = build_dilation(l);
    let x0l = l.prepend(Pauli::X).to_dense()?;
    let residual = match &d.dense {
        Some(g) => g.sub(&x0l).frobenius_norm(),
        None => d.pauli.to_dense()?.sub(&x0l).frobenius_norm(),
    };
    out.push(check(Identity::Dilation, bond, residual, tol));

    let limit = if l.max_weight() <= 2 { 3 } else { l.max_weight() + 1 };
    let excess = d.pauli.max_weight().saturating_sub(limit) as f64;
    out.push(check(Identity::Locality, bond, excess, 0.0));
    Ok(out)
}

pub fn verify_hn_factorization(p: &HnParams) -> Result<FactorizationReport> {
    p.validate()?;
    let mut report = FactorizationReport::default();
    for b in 0..p.bonds() {
        let (l, k) = hn_jump_operator(p.sites, b, p.gamma)?;
        if !l.is_hermitian() {
            return Err(Error::NonHermitian(format!("L on bond {b}")));
        }
        report.checks.extend(verify_jump_factorization(b, &l, &k, FACTORIZATION_TOLERANCE)?);
    }
    Ok(report)
}

/// Dense `-i H_NH - (n - 1) gamma I`, the coefficient the shifted problem targets.
pub fn shifted_generator(hn: &HnProblem) -> Result<DenseMatrix> {
    let dim = hn.problem.dim();
    Ok(hn
        .non_hermitian
        .to_dense()?
        .scale(C64::new(0.0, -1.0))
        .sub(&DenseMatrix::identity(dim).scale(real(hn.shift))))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::oracle::{exact_solution, expm};

    fn params(sites: usize, gamma: f64, v0: f64) -> HnParams {
        HnParams {
            sites,
            coupling: 1.0,
            gamma,
            interaction: Interaction::NearestNeighbor(v0),
            initial: InitialState::basis_bits(&"10".repeat(sites).chars().take(sites).collect::<String>()),
            time: 1.0,
        }
    }

    /// Jordan-Wigner fermion annihilators, `|1>` occupied, qubit 0 most significant.
    fn annihilators(n: usize) -> Vec<DenseMatrix> {
        let c = |re: f64| C64::new(re, 0.0);
        let id = DenseMatrix::identity(2);
        let z = DenseMatrix::from_diagonal(&[c(1.0), c(-1.0)]).unwrap();
        let lower = DenseMatrix::from_rows(&[vec![c(0.0), c(1.0)], vec![c(0.0), c(0.0)]]).unwrap();
        (0..n)
            .map(|j| {
                let mut m = DenseMatrix::identity(1);
                for q in 0..n {
                    let f = if q < j {
                        &z
                    } else if q == j {
                        &lower
                    } else {
                        &id
                    };
                    m = m.kron(f);
                }
                m
            })
            .collect()
    }

    #[test]
    fn matches_fermionic_model() {
        // H_NH = sum_b (J + gamma) c_b^dag c_b+1 + (J - gamma) c_b+1^dag c_b + sum V n_i n_j
        let n = 4;
        let p = params(n, 0.4, 0.7);
        let cs = annihilators(n);
        let dim = 1 << n;
        let mut h = DenseMatrix::zeros(dim);
        for b in 0..n - 1 {
            let right = cs[b].adjoint().matmul(&cs[b + 1]);
            let left = cs[b + 1].adjoint().matmul(&cs[b]);
            h = h
                .add(&right.scale(C64::new(p.coupling + p.gamma, 0.0)))
                .add(&left.scale(C64::new(p.coupling - p.gamma, 0.0)));
            let ni = cs[b].adjoint().matmul(&cs[b]);
            let nj = cs[b + 1].adjoint().matmul(&cs[b + 1]);
            h = h.add(&ni.matmul(&nj).scale(C64::new(0.7, 0.0)));
        }
        let pauli = hn_non_hermitian(&p).unwrap().to_dense().unwrap();
        assert!(pauli.sub(&h).frobenius_norm() < 1e-12);
    }

    #[test]
    fn two_site_hamiltonian() {
        let p = HnParams {
            interaction: Interaction::NearestNeighbor(0.0),
            ..params(2, 0.3, 0.0)
        };
        let expected = PauliSum::from_labels(2, &[(0.5, 0.0, "YY"), (0.5, 0.0, "XX")]).unwrap();
        assert_eq!(hn_hamiltonian(&p).unwrap(), expected);
    }

    #[test]
    fn printed_coefficients() {
        let (l, _) = hn_jump_operator(2, 0, 1.0).unwrap();
        let get = |s: &str| l.coeff(&s.parse().unwrap()).re;
        assert!((get("ZZ") - 0.146447).abs() < 1e-6);
        assert!((get("YX") - 0.353553).abs() < 1e-6);
        assert!((get("XY") + 0.353553).abs() < 1e-6);
        assert!((get("II") - 0.853553).abs() < 1e-6);
    }

    #[test]
    fn zero_gamma_gives_zero_jumps() {
        let (l, k) = hn_jump_operator(3, 1, 0.0).unwrap();
        assert!(l.is_empty() && k.is_empty());
        let hn = build_hn_problem(&params(3, 0.0, 0.5)).unwrap();
        assert_eq!(hn.shift, 0.0);
        assert!(verify_hn_factorization(&params(3, 0.0, 0.5)).unwrap().passed());
    }

    #[test]
    fn square_root_for_several_gammas() {
        for gamma in [0.3, 1.0, 2.0] {
            let (l, k) = hn_jump_operator(3, 0, gamma).unwrap();
            let dl = l.to_dense().unwrap();
            assert!(dl.matmul(&dl).sub(&k.to_dense().unwrap()).frobenius_norm() <= 1e-12);
        }
    }

    #[test]
    fn asymmetric_spectrum() {
        let gamma = 0.8;
        let ha = hn_asymmetric_term(2, 0, gamma).unwrap();
        let iha = ha.scale(C64::new(0.0, 1.0)).to_dense().unwrap();
        let values = iha.hermitian_eigen().values;
        for (v, e) in values.iter().zip([-gamma, 0.0, 0.0, gamma]) {
            assert!((v - e).abs() < 1e-12);
        }
    }

    #[test]
    fn dense_generator_reconstruction() {
        let hn = build_hn_problem(&params(4, 0.5, 0.5)).unwrap();
        let a = &hn.problem.dense().unwrap().generator;
        assert!(a.sub(&shifted_generator(&hn).unwrap()).frobenius_norm() <= 1e-10);
    }

    #[test]
    fn unshift_recovers_non_hermitian_evolution() {
        let hn = build_hn_problem(&params(3, 0.5, 0.2)).unwrap();
        let t = hn.problem.time();
        let shifted = exact_solution(&hn.problem).unwrap();
        let nh = hn.non_hermitian.to_dense().unwrap().scale(C64::new(0.0, -1.0));
        let direct = expm(&nh, t).unwrap().apply(hn.problem.psi0());
        let f = hn.unshift_factor(t);
        let restored: Vec<C64> = shifted.iter().map(|z| z * f).collect();
        assert!(crate::dense::vec_distance(&restored, &direct) < 1e-10 * crate::dense::vec_norm(&direct));
    }

    #[test]
    fn full_report_passes() {
        let report = verify_hn_factorization(&params(4, 0.5, 0.5)).unwrap();
        assert_eq!(report.checks.len(), 12);
        assert!(report.passed());
    }

    #[test]
    fn corrupted_root_fails_square_check() {
        let (l, k) = hn_jump_operator(2, 0, 0.5).unwrap();
        let bad = l.add(&PauliSum::from_labels(2, &[(1e-3, 0.0, "ZZ")]).unwrap()).unwrap();
        let checks = verify_jump_factorization(0, &bad, &k, FACTORIZATION_TOLERANCE).unwrap();
        let square = checks.iter().find(|c| c.identity == Identity::SquareRoot).unwrap();
        assert!(!square.passed && square.residual > 1e-4);
    }

    #[test]
    fn rejects_bad_params() {
        assert!(hn_jump_operator(3, 2, 1.0).is_err());
        assert!(hn_jump_operator(3, 0, -1.0).is_err());
        assert!(build_hn_problem(&params(1, 0.5, 0.0)).is_err());
        let lower = HnParams {
            interaction: Interaction::Matrix(vec![vec![0.0, 0.0], vec![1.0, 0.0]]),
            ..params(2, 0.5, 0.0)
        };
        assert!(build_hn_problem(&lower).is_err());
    }

    #[test]
    fn matrix_interaction_matches_nearest_neighbor() {
        let nn = params(3, 0.5, 0.4);
        let m = HnParams {
            interaction: Interaction::Matrix(vec![vec![0.0, 0.4, 0.0], vec![0.0, 0.0, 0.4], vec![0.0; 3]]),
            ..nn.clone()
        };
        assert_eq!(hn_hamiltonian(&nn).unwrap(), hn_hamiltonian(&m).unwrap());
    }
}
