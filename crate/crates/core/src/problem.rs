//! Problem instances `d psi/dt = A psi` with `A = -iH - sum_j L_j^dagger L_j`,
//! and the single-ancilla dilations of their jump operators.

use nalgebra::DMatrix;
use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

use crate::dense::{check_cap, dense_cap, vec_norm, DenseMatrix};
use crate::error::{Error, Result};
use crate::pauli::{Pauli, PauliString, PauliSum};

/// Relative band below zero within which eigenvalues count as zero.
pub const PSD_RELATIVE_TOLERANCE: f64 = 1e-10;

/// How the initial vector is given in problem files.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "data", rename_all = "lowercase")]
pub enum InitialState {
    /// A computational basis state, as an index or a bit string over the
    /// system qubits (qubit 0 first).
    Basis(BasisLabel),
    /// Equal superposition of all basis states.
    Uniform,
    /// Explicit `[re, im]` amplitudes; need not be normalized.
    Amplitudes(Vec<[f64; 2]>),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum BasisLabel {
    Index(usize),
    Bits(String),
}

impl InitialState {
    pub fn basis_bits(bits: &str) -> Self {
        InitialState::Basis(BasisLabel::Bits(bits.to_string()))
    }

    pub fn from_amplitudes(v: &[C64]) -> Self {
        InitialState::Amplitudes(v.iter().map(|z| [z.re, z.im]).collect())
    }

    pub fn resolve(&self, n: usize) -> Result<Vec<C64>> {
        let dim = 1usize << n;
        let v = match self {
            InitialState::Basis(label) => {
                let index = match label {
                    BasisLabel::Index(i) => *i,
                    BasisLabel::Bits(bits) => {
                        if bits.len() != n || !bits.chars().all(|c| c == '0' || c == '1') {
                            return Err(Error::InvalidParameter(format!(
                                "basis bit string \"{bits}\" must have {n} characters from {{0,1}}"
                            )));
                        }
                        usize::from_str_radix(bits, 2).expect("validated bit string")
                    }
                };
                if index >= dim {
                    return Err(Error::InvalidParameter(format!(
                        "basis index {index} out of range for {n} qubits"
                    )));
                }
                let mut v = vec![C64::default(); dim];
                v[index] = C64::new(1.0, 0.0);
                v
            }
            InitialState::Uniform => vec![C64::new((dim as f64).sqrt().recip(), 0.0); dim],
            InitialState::Amplitudes(amps) => {
                if amps.len() != dim {
                    return Err(Error::DimensionMismatch {
                        expected: dim,
                        found: amps.len(),
                    });
                }
                amps.iter().map(|&[re, im]| C64::new(re, im)).collect()
            }
        };
        let norm = vec_norm(&v);
        if !norm.is_finite() {
            return Err(Error::NonFinite("initial state".into()));
        }
        if norm == 0.0 {
            return Err(Error::DegenerateState);
        }
        Ok(v)
    }
}

/// Dense matrices mirroring a problem, present only under the dense cap.
#[derive(Clone, Debug)]
pub struct DenseShadow {
    pub generator: DenseMatrix,
    pub hamiltonian: DenseMatrix,
    pub jumps: Vec<DenseMatrix>,
    /// `L_j^dagger L_j` for each jump.
    pub dissipators: Vec<DenseMatrix>,
}

/// A validated instance `(H, {L_j}, psi0, T)` on `n` system qubits.
#[derive(Clone, Debug)]
pub struct OdeProblem {
    n: usize,
    hamiltonian: PauliSum,
    jumps: Vec<PauliSum>,
    initial: InitialState,
    psi0: Vec<C64>,
    time: f64,
    dense: Option<DenseShadow>,
}

impl OdeProblem {
    pub fn new(
        hamiltonian: PauliSum,
        jumps: Vec<PauliSum>,
        initial: InitialState,
        time: f64,
    ) -> Result<Self> {
        let n = hamiltonian.n_qubits();
        if n == 0 {
            return Err(Error::InvalidParameter("problem needs at least one qubit".into()));
        }
        if !hamiltonian.is_hermitian() {
            return Err(Error::NonHermitian("H has complex coefficients".into()));
        }
        for l in &jumps {
            if l.n_qubits() != n {
                return Err(Error::DimensionMismatch {
                    expected: n,
                    found: l.n_qubits(),
                });
            }
        }
        if !time.is_finite() || time < 0.0 {
            return Err(Error::InvalidParameter(format!(
                "final time must be finite and >= 0, got {time}"
            )));
        }
        let psi0 = initial.resolve(n)?;
        let dense = if n <= dense_cap() {
            Some(build_shadow(&hamiltonian, &jumps)?)
        } else {
            None
        };
        Ok(OdeProblem {
            n,
            hamiltonian,
            jumps,
            initial,
            psi0,
            time,
            dense,
        })
    }

    /// Splits a dense coefficient matrix, factorizes its dissipative part as
    /// a single principal square root, and re-expresses both in Pauli form.
    pub fn from_dense_coefficient(a: &DenseMatrix, initial: InitialState, time: f64) -> Result<Self> {
        let n = a.qubits();
        check_cap("from_dense_coefficient", n)?;
        let (h_return, v) = split_coefficient(a)?;
        let l = factorize_dissipator(&v, default_psd_tolerance(&v))?;
        let hamiltonian = PauliSum::decompose_dense(&h_return.scale(C64::new(-1.0, 0.0)), n)?;
        let hamiltonian = real_part(&hamiltonian);
        let jump = PauliSum::decompose_dense(&l, n)?;
        let jumps = if jump.is_empty() { vec![] } else { vec![jump] };
        OdeProblem::new(hamiltonian, jumps, initial, time)
    }

    pub fn n_qubits(&self) -> usize {
        self.n
    }

    pub fn dim(&self) -> usize {
        1 << self.n
    }

    pub fn hamiltonian(&self) -> &PauliSum {
        &self.hamiltonian
    }

    pub fn jumps(&self) -> &[PauliSum] {
        &self.jumps
    }

    pub fn initial(&self) -> &InitialState {
        &self.initial
    }

    pub fn psi0(&self) -> &[C64] {
        &self.psi0
    }

    pub fn time(&self) -> f64 {
        self.time
    }

    /// Same operators, different final time.
    pub fn with_time(&self, time: f64) -> Result<Self> {
        if !time.is_finite() || time < 0.0 {
            return Err(Error::InvalidParameter(format!("bad final time {time}")));
        }
        let mut p = self.clone();
        p.time = time;
        Ok(p)
    }

    pub fn dense(&self) -> Result<&DenseShadow> {
        self.dense.as_ref().ok_or(Error::Capacity {
            what: "dense shadow",
            qubits: self.n,
            cap: dense_cap(),
        })
    }

    pub fn dilations(&self) -> Vec<Dilation> {
        self.jumps
            .iter()
            .enumerate()
            .map(|(j, l)| build_dilation_indexed(j, l))
            .collect()
    }

    pub fn to_file(&self) -> ProblemFile {
        ProblemFile {
            n: self.n,
            hamiltonian: terms_to_file(&self.hamiltonian),
            jumps: self.jumps.iter().map(terms_to_file).collect(),
            psi0: self.initial.clone(),
            time: self.time,
        }
    }

    pub fn from_file(file: &ProblemFile) -> Result<Self> {
        let hamiltonian = terms_from_file(file.n, &file.hamiltonian)?;
        let jumps = file
            .jumps
            .iter()
            .map(|t| terms_from_file(file.n, t))
            .collect::<Result<Vec<_>>>()?;
        OdeProblem::new(hamiltonian, jumps, file.psi0.clone(), file.time)
    }
}

impl PartialEq for OdeProblem {
    fn eq(&self, other: &Self) -> bool {
        self.n == other.n
            && self.hamiltonian == other.hamiltonian
            && self.jumps == other.jumps
            && self.initial == other.initial
            && self.time == other.time
    }
}

fn real_part(s: &PauliSum) -> PauliSum {
    PauliSum::from_terms(
        s.n_qubits(),
        s.terms()
            .iter()
            .map(|t| (C64::new(t.coeff.re, 0.0), t.string.clone())),
    )
    .expect("same shape")
}

fn build_shadow(hamiltonian: &PauliSum, jumps: &[PauliSum]) -> Result<DenseShadow> {
    let h = hamiltonian.to_dense()?;
    let dim = h.dim();
    let dense_jumps = jumps
        .iter()
        .map(PauliSum::to_dense)
        .collect::<Result<Vec<_>>>()?;
    let dissipators: Vec<DenseMatrix> = dense_jumps
        .iter()
        .map(|l| l.adjoint().matmul(l))
        .collect();
    let total = dissipators
        .iter()
        .fold(DenseMatrix::zeros(dim), |acc, k| acc.add(k));
    if !dissipators.is_empty() {
        let min = total.hermitian_eigen().min();
        if min < -1e-10 {
            return Err(Error::DissipativeConditionViolated {
                eigenvalue: -min,
                shift: -min,
            });
        }
    }
    let generator = h.scale(C64::new(0.0, -1.0)).sub(&total);
    Ok(DenseShadow {
        generator,
        hamiltonian: h,
        jumps: dense_jumps,
        dissipators,
    })
}

/// Problem-file layout: `{n, H: [[re, im, axes]...], jumps: [[...]...], psi0, T}`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProblemFile {
    pub n: usize,
    #[serde(rename = "H")]
    pub hamiltonian: Vec<(f64, f64, String)>,
    pub jumps: Vec<Vec<(f64, f64, String)>>,
    pub psi0: InitialState,
    #[serde(rename = "T")]
    pub time: f64,
}

fn terms_to_file(s: &PauliSum) -> Vec<(f64, f64, String)> {
    s.terms()
        .iter()
        .map(|t| (t.coeff.re, t.coeff.im, t.string.to_string()))
        .collect()
}

fn terms_from_file(n: usize, terms: &[(f64, f64, String)]) -> Result<PauliSum> {
    let parsed = terms
        .iter()
        .map(|(re, im, axes)| Ok((C64::new(*re, *im), axes.parse::<PauliString>()?)))
        .collect::<Result<Vec<_>>>()?;
    PauliSum::from_terms(n, parsed)
}

/// Splits `A` into Hermitian parts with `A = V + i H_return`:
/// `V = (A + A^dagger)/2` and `H_return = (A - A^dagger)/(2i)`.
///
/// The ODE Hamiltonian is `-H_return`, since `A = -iH - L^dagger L`.
pub fn split_coefficient(a: &DenseMatrix) -> Result<(DenseMatrix, DenseMatrix)> {
    let adj = a.adjoint();
    let v = a.add(&adj).scale(C64::new(0.5, 0.0));
    // 1/(2i) = -i/2
    let h = a.sub(&adj).scale(C64::new(0.0, -0.5));
    Ok((h, v))
}

/// `1e-10 * ||V||`, floored so an exactly zero `V` still tolerates rounding.
pub fn default_psd_tolerance(v: &DenseMatrix) -> f64 {
    (PSD_RELATIVE_TOLERANCE * v.spectral_norm()).max(1e-14)
}

/// Principal square root `L = sqrt(-V)`, so that `V = -L^dagger L`.
///
/// Eigenvalues of `-V` in `[-tol, 0)` are clipped to zero. A positive
/// eigenvalue of `V` above `tol` means the problem is not dissipative; the
/// error reports it together with the shift `c` such that `V - cI` would be.
pub fn factorize_dissipator(v: &DenseMatrix, tol: f64) -> Result<DenseMatrix> {
    let defect = v.hermiticity_defect();
    if defect > 1e-12 * v.frobenius_norm().max(1.0) {
        return Err(Error::NonHermitian(format!(
            "dissipative part deviates from Hermitian by {defect:e}"
        )));
    }
    let eig = v.hermitian_eigen();
    let top = eig.max();
    if top > tol {
        return Err(Error::DissipativeConditionViolated {
            eigenvalue: top,
            shift: top,
        });
    }
    Ok(eig.map(|lambda| (-lambda).max(0.0).sqrt()))
}

/// Hermitian dilation `G = [[0, L^dagger], [L, 0]]` of one jump operator,
/// with the ancilla as qubit 0.
#[derive(Clone, Debug)]
pub struct Dilation {
    pub jump: usize,
    pub pauli: PauliSum,
    /// Block form built straight from the dense jump; `None` above the cap.
    pub dense: Option<DenseMatrix>,
}

impl Dilation {
    /// Evolution angle `sqrt(2 tau)` of `exp(i sqrt(2 tau) G)`.
    pub fn angle(tau: f64) -> f64 {
        (2.0 * tau).sqrt()
    }

    pub fn n_total(&self) -> usize {
        self.pauli.n_qubits()
    }
}

pub fn build_dilation(l: &PauliSum) -> Dilation {
    build_dilation_indexed(0, l)
}

fn build_dilation_indexed(jump: usize, l: &PauliSum) -> Dilation {
    let n = l.n_qubits();
    let terms = l.terms().iter().flat_map(|t| {
        [
            (C64::new(t.coeff.re, 0.0), t.string.prepend(Pauli::X)),
            (C64::new(t.coeff.im, 0.0), t.string.prepend(Pauli::Y)),
        ]
    });
    let pauli = PauliSum::from_terms(n + 1, terms).expect("strings share n + 1 qubits");
    let dense = if n < dense_cap() {
        let dl = l.to_dense().expect("under cap");
        let dim = dl.dim();
        let ldag = dl.adjoint();
        let block = DMatrix::from_fn(2 * dim, 2 * dim, |r, c| match (r < dim, c < dim) {
            (true, false) => ldag.get(r, c - dim),
            (false, true) => dl.get(r - dim, c),
            _ => C64::default(),
        });
        Some(DenseMatrix::from_matrix(block).expect("finite block"))
    } else {
        None
    };
    Dilation { jump, pauli, dense }
}
