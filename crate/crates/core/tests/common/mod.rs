//! Reference computations for integration tests, built only from explicit
//! Kronecker products and nalgebra's own matrix exponential so that they share
//! no code with the library's dense layer.

#![allow(dead_code)]

use nalgebra::DMatrix;
use num_complex::Complex64 as C64;
use odeq::pauli::{Pauli, PauliString, PauliSum};
use odeq::problem::OdeProblem;

pub type M = DMatrix<C64>;

pub fn c(re: f64, im: f64) -> C64 {
    C64::new(re, im)
}

pub fn pauli(p: Pauli) -> M {
    let (o, l, i) = (c(0.0, 0.0), c(1.0, 0.0), c(0.0, 1.0));
    match p {
        Pauli::I => M::from_row_slice(2, 2, &[l, o, o, l]),
        Pauli::X => M::from_row_slice(2, 2, &[o, l, l, o]),
        Pauli::Y => M::from_row_slice(2, 2, &[o, -i, i, o]),
        Pauli::Z => M::from_row_slice(2, 2, &[l, o, o, -l]),
    }
}

/// Qubit 0 is the leftmost Kronecker factor.
pub fn string_matrix(s: &PauliString) -> M {
    s.axes()
        .iter()
        .fold(M::identity(1, 1), |acc, &p| acc.kronecker(&pauli(p)))
}

pub fn sum_matrix(s: &PauliSum) -> M {
    let dim = 1usize << s.n_qubits();
    s.terms()
        .iter()
        .fold(M::zeros(dim, dim), |acc, t| acc + string_matrix(&t.string) * t.coeff)
}

pub fn generator(p: &OdeProblem) -> M {
    let h = sum_matrix(p.hamiltonian());
    let mut a = h * c(0.0, -1.0);
    for l in p.jumps() {
        let l = sum_matrix(l);
        a -= l.adjoint() * &l;
    }
    a
}

pub fn column(v: &[C64]) -> nalgebra::DVector<C64> {
    nalgebra::DVector::from_column_slice(v)
}

pub fn exact(p: &OdeProblem) -> Vec<C64> {
    let u = (generator(p) * c(p.time(), 0.0)).exp();
    (u * column(p.psi0())).iter().copied().collect()
}

pub fn norm(v: &[C64]) -> f64 {
    v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

pub fn distance(a: &[C64], b: &[C64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).norm_sqr()).sum::<f64>().sqrt()
}

pub fn normalized_distance(a: &[C64], b: &[C64]) -> f64 {
    let (na, nb) = (norm(a), norm(b));
    a.iter()
        .zip(b)
        .map(|(x, y)| (x / na - y / nb).norm_sqr())
        .sum::<f64>()
        .sqrt()
}

/// `[[0, L^dagger], [L, 0]]` with the ancilla as the leading factor.
pub fn dilation(l: &M) -> M {
    let d = l.nrows();
    let mut g = M::zeros(2 * d, 2 * d);
    g.view_mut((0, d), (d, d)).copy_from(&l.adjoint());
    g.view_mut((d, 0), (d, d)).copy_from(l);
    g
}

/// Vectorized `A rho + rho A^dagger + 2 sum_j L_j rho L_j^dagger` (column stacking).
pub fn lindblad_superoperator(p: &OdeProblem) -> M {
    let a = generator(p);
    let d = a.nrows();
    let id = M::identity(d, d);
    let mut s = id.kronecker(&a) + a.conjugate().kronecker(&id);
    for l in p.jumps() {
        let l = sum_matrix(l);
        s += l.conjugate().kronecker(&l) * c(2.0, 0.0);
    }
    s
}

/// Lindblad density matrix at time `t` from the normalized initial state.
pub fn lindblad_density(p: &OdeProblem, t: f64) -> M {
    let psi = column(p.psi0());
    let rho0 = &psi * psi.adjoint() / c(psi.norm_squared(), 0.0);
    let d = rho0.nrows();
    let v = M::from_column_slice(d * d, 1, rho0.as_slice());
    let out = (lindblad_superoperator(p) * c(t, 0.0)).exp() * v;
    M::from_column_slice(d, d, out.as_slice())
}

pub fn hermitian_eigenvalues(m: &M) -> Vec<f64> {
    let h = (m + m.adjoint()) * c(0.5, 0.0);
    let mut v: Vec<f64> = h.symmetric_eigen().eigenvalues.iter().copied().collect();
    v.sort_by(|a, b| a.partial_cmp(b).unwrap());
    v
}

pub fn trace_distance(a: &M, b: &M) -> f64 {
    0.5 * hermitian_eigenvalues(&(a - b)).iter().map(|x| x.abs()).sum::<f64>()
}

/// Jordan-Wigner annihilators with `|1>` occupied.
pub fn annihilators(n: usize) -> Vec<M> {
    let lower = M::from_row_slice(2, 2, &[c(0.0, 0.0), c(1.0, 0.0), c(0.0, 0.0), c(0.0, 0.0)]);
    (0..n)
        .map(|j| {
            (0..n).fold(M::identity(1, 1), |acc, q| {
                let f = match q.cmp(&j) {
                    std::cmp::Ordering::Less => pauli(Pauli::Z),
                    std::cmp::Ordering::Equal => lower.clone(),
                    std::cmp::Ordering::Greater => pauli(Pauli::I),
                };
                acc.kronecker(&f)
            })
        })
        .collect()
}

/// Fermionic chain `sum_b (J + g) c_b^dag c_b+1 + (J - g) c_b+1^dag c_b + V0 n_b n_b+1`.
pub fn fermionic_hn(n: usize, coupling: f64, gamma: f64, v0: f64) -> M {
    let cs = annihilators(n);
    let dim = 1 << n;
    let mut h = M::zeros(dim, dim);
    for b in 0..n - 1 {
        h += cs[b].adjoint() * &cs[b + 1] * c(coupling + gamma, 0.0);
        h += cs[b + 1].adjoint() * &cs[b] * c(coupling - gamma, 0.0);
        h += cs[b].adjoint() * &cs[b] * cs[b + 1].adjoint() * &cs[b + 1] * c(v0, 0.0);
    }
    h
}

/// Least-squares slope of `ln y` against `ln x`.
pub fn slope(xs: &[f64], ys: &[f64]) -> f64 {
    let lx: Vec<f64> = xs.iter().map(|x| x.ln()).collect();
    let ly: Vec<f64> = ys.iter().map(|y| y.ln()).collect();
    let n = lx.len() as f64;
    let mx = lx.iter().sum::<f64>() / n;
    let my = ly.iter().sum::<f64>() / n;
    let num: f64 = lx.iter().zip(&ly).map(|(x, y)| (x - mx) * (y - my)).sum();
    let den: f64 = lx.iter().map(|x| (x - mx).powi(2)).sum();
    num / den
}
