//! Dense complex matrices used as brute-force shadows of Pauli operators.
//!
//! Everything here is desk-scale: matrices are `2^n x 2^n` with `n` bounded
//! by [`dense_cap`]. Qubit 0 is the most significant bit of a row/column
//! index, so `kron(a, b)` places `a` on the lower-numbered qubits.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use num_complex::Complex64 as C64;

use crate::error::{Error, Result};

/// Default number of qubits above which dense shadows are refused.
pub const DEFAULT_DENSE_CAP: usize = 12;

/// Qubit cap for dense matrices; `ODEQ_DENSE_CAP` overrides the default.
pub fn dense_cap() -> usize {
    std::env::var("ODEQ_DENSE_CAP")
        .ok()
        .and_then(|s| s.trim().parse().ok())
        .unwrap_or(DEFAULT_DENSE_CAP)
}

pub(crate) fn check_cap(what: &'static str, qubits: usize) -> Result<()> {
    let cap = dense_cap();
    if qubits > cap {
        return Err(Error::Capacity { what, qubits, cap });
    }
    Ok(())
}

/// Square complex matrix whose dimension is a power of two.
#[derive(Clone, Debug, PartialEq)]
pub struct DenseMatrix(DMatrix<C64>);

impl DenseMatrix {
    pub fn from_matrix(m: DMatrix<C64>) -> Result<Self> {
        if m.nrows() != m.ncols() {
            return Err(Error::Shape(format!(
                "matrix is {}x{}, expected square",
                m.nrows(),
                m.ncols()
            )));
        }
        if !m.nrows().is_power_of_two() {
            return Err(Error::Shape(format!(
                "dimension {} is not a power of two",
                m.nrows()
            )));
        }
        if m.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return Err(Error::NonFinite("dense matrix".into()));
        }
        Ok(DenseMatrix(m))
    }

    /// Builds from row-major rows.
    pub fn from_rows(rows: &[Vec<C64>]) -> Result<Self> {
        let dim = rows.len();
        if rows.iter().any(|r| r.len() != dim) {
            return Err(Error::Shape("rows of unequal length".into()));
        }
        Self::from_matrix(DMatrix::from_fn(dim, dim, |r, c| rows[r][c]))
    }

    pub fn zeros(dim: usize) -> Self {
        debug_assert!(dim.is_power_of_two());
        DenseMatrix(DMatrix::zeros(dim, dim))
    }

    pub fn identity(dim: usize) -> Self {
        debug_assert!(dim.is_power_of_two());
        DenseMatrix(DMatrix::identity(dim, dim))
    }

    pub fn from_diagonal(diag: &[C64]) -> Result<Self> {
        Self::from_matrix(DMatrix::from_diagonal(&DVector::from_column_slice(diag)))
    }

    pub(crate) fn wrap(m: DMatrix<C64>) -> Self {
        debug_assert!(m.is_square() && m.nrows().is_power_of_two());
        DenseMatrix(m)
    }

    pub fn dim(&self) -> usize {
        self.0.nrows()
    }

    pub fn qubits(&self) -> usize {
        self.dim().trailing_zeros() as usize
    }

    pub fn as_matrix(&self) -> &DMatrix<C64> {
        &self.0
    }

    pub fn into_matrix(self) -> DMatrix<C64> {
        self.0
    }

    pub fn get(&self, row: usize, col: usize) -> C64 {
        self.0[(row, col)]
    }

    pub fn adjoint(&self) -> Self {
        DenseMatrix(self.0.adjoint())
    }

    pub fn matmul(&self, other: &DenseMatrix) -> Self {
        DenseMatrix(&self.0 * &other.0)
    }

    pub fn add(&self, other: &DenseMatrix) -> Self {
        DenseMatrix(&self.0 + &other.0)
    }

    pub fn sub(&self, other: &DenseMatrix) -> Self {
        DenseMatrix(&self.0 - &other.0)
    }

    pub fn scale(&self, c: C64) -> Self {
        DenseMatrix(&self.0 * c)
    }

    pub fn commutator(&self, other: &DenseMatrix) -> Self {
        DenseMatrix(&self.0 * &other.0 - &other.0 * &self.0)
    }

    pub fn kron(&self, other: &DenseMatrix) -> Self {
        DenseMatrix(self.0.kronecker(&other.0))
    }

    pub fn trace(&self) -> C64 {
        self.0.trace()
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.0.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
    }

    pub fn apply(&self, v: &[C64]) -> Vec<C64> {
        let dim = self.dim();
        assert_eq!(v.len(), dim, "vector length must match matrix dimension");
        (0..dim)
            .map(|r| (0..dim).map(|c| self.0[(r, c)] * v[c]).sum())
            .collect()
    }

    /// Largest deviation from Hermiticity, `max |M - M^dagger|`.
    pub fn hermiticity_defect(&self) -> f64 {
        let dim = self.dim();
        let mut worst = 0.0f64;
        for r in 0..dim {
            for c in r..dim {
                worst = worst.max((self.0[(r, c)] - self.0[(c, r)].conj()).norm());
            }
        }
        worst
    }

    /// Eigen-decomposition of a Hermitian matrix. Eigenvalues are ascending.
    pub fn hermitian_eigen(&self) -> HermitianEigen {
        let hermitian = (&self.0 + self.0.adjoint()) * C64::new(0.5, 0.0);
        let eig = SymmetricEigen::new(hermitian);
        let mut order: Vec<usize> = (0..eig.eigenvalues.len()).collect();
        order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
        let values = order.iter().map(|&i| eig.eigenvalues[i]).collect();
        let vectors = DMatrix::from_fn(self.dim(), self.dim(), |r, c| {
            eig.eigenvectors[(r, order[c])]
        });
        HermitianEigen { values, vectors }
    }

    /// Spectral norm from the largest eigenvalue of `M^dagger M`.
    pub fn spectral_norm(&self) -> f64 {
        let gram = DenseMatrix(self.0.adjoint() * &self.0);
        let eig = gram.hermitian_eigen();
        eig.values.last().copied().unwrap_or(0.0).max(0.0).sqrt()
    }
}

/// `U diag(values) U^dagger` factorization of a Hermitian matrix.
#[derive(Clone, Debug)]
pub struct HermitianEigen {
    pub values: Vec<f64>,
    pub vectors: DMatrix<C64>,
}

impl HermitianEigen {
    /// Rebuilds `U f(diag) U^dagger`.
    pub fn map(&self, f: impl Fn(f64) -> f64) -> DenseMatrix {
        let diag = DMatrix::from_diagonal(&DVector::from_iterator(
            self.values.len(),
            self.values.iter().map(|&v| C64::new(f(v), 0.0)),
        ));
        DenseMatrix::wrap(&self.vectors * diag * self.vectors.adjoint())
    }

    pub fn min(&self) -> f64 {
        self.values.first().copied().unwrap_or(0.0)
    }

    pub fn max(&self) -> f64 {
        self.values.last().copied().unwrap_or(0.0)
    }
}

pub fn vec_norm(v: &[C64]) -> f64 {
    v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

pub fn vec_distance(a: &[C64], b: &[C64]) -> f64 {
    assert_eq!(a.len(), b.len());
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y).norm_sqr())
        .sum::<f64>()
        .sqrt()
}

/// `|| a/|a| - b/|b| ||`.
pub fn normalized_distance(a: &[C64], b: &[C64]) -> f64 {
    let na = vec_norm(a);
    let nb = vec_norm(b);
    a.iter()
        .zip(b)
        .map(|(x, y)| (x / na - y / nb).norm_sqr())
        .sum::<f64>()
        .sqrt()
}

pub fn outer(v: &[C64]) -> DenseMatrix {
    let dim = v.len();
    DenseMatrix::wrap(DMatrix::from_fn(dim, dim, |r, c| v[r] * v[c].conj()))
}

/// Trace distance `1/2 ||rho - sigma||_1` between two Hermitian matrices.
pub fn trace_distance(rho: &DenseMatrix, sigma: &DenseMatrix) -> f64 {
    let diff = rho.sub(sigma);
    0.5 * diff.hermitian_eigen().values.iter().map(|v| v.abs()).sum::<f64>()
}
