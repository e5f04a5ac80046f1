//! Pauli strings and complex-weighted Pauli sums.
//!
//! Strings carry no phase; every phase lives in a term's coefficient, so a
//! sum is Hermitian exactly when all of its coefficients are real. Sums are
//! kept canonical: terms sorted lexicographically by string (with
//! `I < X < Y < Z`), duplicates merged, and terms below [`DROP_TOLERANCE`]
//! removed.

use std::fmt;
use std::str::FromStr;

use nalgebra::DMatrix;
use num_complex::Complex64 as C64;

use crate::dense::{check_cap, DenseMatrix};
use crate::error::{Error, Result};

/// Coefficients with modulus below this are dropped during simplification.
pub const DROP_TOLERANCE: f64 = 1e-14;

/// Imaginary parts up to this size still count as real in [`PauliSum::is_hermitian`].
pub const HERMITIAN_TOLERANCE: f64 = 1e-12;

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Pauli {
    I,
    X,
    Y,
    Z,
}

impl Pauli {
    fn has_x(self) -> bool {
        matches!(self, Pauli::X | Pauli::Y)
    }

    fn has_z(self) -> bool {
        matches!(self, Pauli::Z | Pauli::Y)
    }

    /// Single-qubit product `self * other = phase * result`.
    pub fn mul(self, other: Pauli) -> (Phase, Pauli) {
        use Pauli::*;
        match (self, other) {
            (I, p) | (p, I) => (Phase::ONE, p),
            (a, b) if a == b => (Phase::ONE, I),
            (X, Y) => (Phase::I, Z),
            (Y, Z) => (Phase::I, X),
            (Z, X) => (Phase::I, Y),
            (Y, X) => (Phase::MINUS_I, Z),
            (Z, Y) => (Phase::MINUS_I, X),
            (X, Z) => (Phase::MINUS_I, Y),
            _ => unreachable!(),
        }
    }

    pub fn label(self) -> char {
        match self {
            Pauli::I => 'I',
            Pauli::X => 'X',
            Pauli::Y => 'Y',
            Pauli::Z => 'Z',
        }
    }

    pub fn from_label(c: char) -> Option<Pauli> {
        match c {
            'I' => Some(Pauli::I),
            'X' => Some(Pauli::X),
            'Y' => Some(Pauli::Y),
            'Z' => Some(Pauli::Z),
            _ => None,
        }
    }
}

/// A power of `i`: `i^k` with `k` in `0..4`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Phase(u8);

impl Phase {
    pub const ONE: Phase = Phase(0);
    pub const I: Phase = Phase(1);
    pub const MINUS_ONE: Phase = Phase(2);
    pub const MINUS_I: Phase = Phase(3);

    pub fn from_power(k: u32) -> Phase {
        Phase((k % 4) as u8)
    }

    pub fn power(self) -> u32 {
        self.0 as u32
    }

    pub fn times(self, other: Phase) -> Phase {
        Phase((self.0 + other.0) % 4)
    }

    pub fn to_complex(self) -> C64 {
        match self.0 {
            0 => C64::new(1.0, 0.0),
            1 => C64::new(0.0, 1.0),
            2 => C64::new(-1.0, 0.0),
            _ => C64::new(0.0, -1.0),
        }
    }
}

/// Tensor product of single-qubit Paulis; `axes[0]` acts on qubit 0.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct PauliString {
    axes: Vec<Pauli>,
}

impl PauliString {
    pub fn new(axes: Vec<Pauli>) -> Self {
        PauliString { axes }
    }

    pub fn identity(n: usize) -> Self {
        PauliString {
            axes: vec![Pauli::I; n],
        }
    }

    /// `p` on the listed qubits, identity elsewhere.
    pub fn on(n: usize, qubits: &[(usize, Pauli)]) -> Self {
        let mut axes = vec![Pauli::I; n];
        for &(q, p) in qubits {
            axes[q] = p;
        }
        PauliString { axes }
    }

    pub fn n_qubits(&self) -> usize {
        self.axes.len()
    }

    pub fn axes(&self) -> &[Pauli] {
        &self.axes
    }

    pub fn weight(&self) -> usize {
        self.axes.iter().filter(|&&p| p != Pauli::I).count()
    }

    pub fn is_identity(&self) -> bool {
        self.axes.iter().all(|&p| p == Pauli::I)
    }

    /// `self * other = phase * result`.
    pub fn multiply(&self, other: &PauliString) -> Result<(Phase, PauliString)> {
        if self.n_qubits() != other.n_qubits() {
            return Err(Error::DimensionMismatch {
                expected: self.n_qubits(),
                found: other.n_qubits(),
            });
        }
        let mut phase = Phase::ONE;
        let axes = self
            .axes
            .iter()
            .zip(&other.axes)
            .map(|(&a, &b)| {
                let (ph, p) = a.mul(b);
                phase = phase.times(ph);
                p
            })
            .collect();
        Ok((phase, PauliString { axes }))
    }

    /// Two strings commute iff they anticommute on an even number of qubits.
    pub fn commutes_with(&self, other: &PauliString) -> bool {
        self.axes
            .iter()
            .zip(&other.axes)
            .filter(|(&a, &b)| a != Pauli::I && b != Pauli::I && a != b)
            .count()
            % 2
            == 0
    }

    /// `front (x) self`.
    pub fn prepend(&self, front: Pauli) -> PauliString {
        let mut axes = Vec::with_capacity(self.axes.len() + 1);
        axes.push(front);
        axes.extend_from_slice(&self.axes);
        PauliString { axes }
    }

    /// Bit masks in the amplitude-index convention (qubit 0 is the most
    /// significant bit): `(x_mask, z_mask, number of Y factors)`.
    pub fn masks(&self) -> (u64, u64, u32) {
        let n = self.axes.len();
        assert!(n <= 64, "bit masks support at most 64 qubits");
        let mut x = 0u64;
        let mut z = 0u64;
        let mut ny = 0u32;
        for (q, &p) in self.axes.iter().enumerate() {
            let bit = 1u64 << (n - 1 - q);
            if p.has_x() {
                x |= bit;
            }
            if p.has_z() {
                z |= bit;
            }
            if p == Pauli::Y {
                ny += 1;
            }
        }
        (x, z, ny)
    }
}

impl fmt::Display for PauliString {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for p in &self.axes {
            write!(f, "{}", p.label())?;
        }
        Ok(())
    }
}

impl FromStr for PauliString {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        s.chars()
            .map(|c| {
                Pauli::from_label(c)
                    .ok_or_else(|| Error::Parse(format!("'{c}' is not a Pauli label in \"{s}\"")))
            })
            .collect::<Result<Vec<_>>>()
            .map(PauliString::new)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct PauliTerm {
    pub coeff: C64,
    pub string: PauliString,
}

/// Canonical complex linear combination of Pauli strings on `n` qubits.
#[derive(Clone, Debug, PartialEq)]
pub struct PauliSum {
    n: usize,
    terms: Vec<PauliTerm>,
}

impl PauliSum {
    pub fn zero(n: usize) -> Self {
        PauliSum { n, terms: vec![] }
    }

    pub fn identity(n: usize) -> Self {
        Self::single(C64::new(1.0, 0.0), PauliString::identity(n))
    }

    pub fn single(coeff: C64, string: PauliString) -> Self {
        let n = string.n_qubits();
        let mut s = PauliSum {
            n,
            terms: vec![PauliTerm { coeff, string }],
        };
        s.simplify();
        s
    }

    pub fn from_terms(n: usize, terms: impl IntoIterator<Item = (C64, PauliString)>) -> Result<Self> {
        let mut out = Vec::new();
        for (coeff, string) in terms {
            if string.n_qubits() != n {
                return Err(Error::DimensionMismatch {
                    expected: n,
                    found: string.n_qubits(),
                });
            }
            if !coeff.re.is_finite() || !coeff.im.is_finite() {
                return Err(Error::NonFinite(format!("coefficient of {string}")));
            }
            out.push(PauliTerm { coeff, string });
        }
        let mut s = PauliSum { n, terms: out };
        s.simplify();
        Ok(s)
    }

    /// Convenience constructor from `(re, im, "AXES")` triples.
    pub fn from_labels(n: usize, terms: &[(f64, f64, &str)]) -> Result<Self> {
        let parsed = terms
            .iter()
            .map(|&(re, im, axes)| Ok((C64::new(re, im), axes.parse::<PauliString>()?)))
            .collect::<Result<Vec<_>>>()?;
        Self::from_terms(n, parsed)
    }

    fn simplify(&mut self) {
        self.terms.sort_by(|a, b| a.string.cmp(&b.string));
        let mut merged: Vec<PauliTerm> = Vec::with_capacity(self.terms.len());
        for term in self.terms.drain(..) {
            match merged.last_mut() {
                Some(last) if last.string == term.string => last.coeff += term.coeff,
                _ => merged.push(term),
            }
        }
        merged.retain(|t| t.coeff.norm() >= DROP_TOLERANCE);
        self.terms = merged;
    }

    pub fn n_qubits(&self) -> usize {
        self.n
    }

    pub fn terms(&self) -> &[PauliTerm] {
        &self.terms
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    /// Coefficient of `string`, zero when absent.
    pub fn coeff(&self, string: &PauliString) -> C64 {
        self.terms
            .binary_search_by(|t| t.string.cmp(string))
            .map(|i| self.terms[i].coeff)
            .unwrap_or_default()
    }

    pub fn max_weight(&self) -> usize {
        self.terms.iter().map(|t| t.string.weight()).max().unwrap_or(0)
    }

    /// Sum of coefficient moduli, an upper bound on the spectral norm.
    pub fn one_norm(&self) -> f64 {
        self.terms.iter().map(|t| t.coeff.norm()).sum()
    }

    pub fn is_hermitian(&self) -> bool {
        self.terms
            .iter()
            .all(|t| t.coeff.im.abs() <= HERMITIAN_TOLERANCE)
    }

    /// Whether every pair of strings commutes, so the exponential of the sum
    /// factorizes exactly into per-term exponentials.
    pub fn terms_commute(&self) -> bool {
        self.terms.iter().enumerate().all(|(i, a)| {
            self.terms[i + 1..]
                .iter()
                .all(|b| a.string.commutes_with(&b.string))
        })
    }

    fn check_same_n(&self, other: &PauliSum) -> Result<()> {
        if self.n != other.n {
            return Err(Error::DimensionMismatch {
                expected: self.n,
                found: other.n,
            });
        }
        Ok(())
    }

    pub fn add(&self, other: &PauliSum) -> Result<PauliSum> {
        self.check_same_n(other)?;
        let mut s = PauliSum {
            n: self.n,
            terms: self.terms.iter().chain(&other.terms).cloned().collect(),
        };
        s.simplify();
        Ok(s)
    }

    pub fn sub(&self, other: &PauliSum) -> Result<PauliSum> {
        self.add(&other.scale(C64::new(-1.0, 0.0)))
    }

    pub fn scale(&self, c: C64) -> PauliSum {
        let mut s = PauliSum {
            n: self.n,
            terms: self
                .terms
                .iter()
                .map(|t| PauliTerm {
                    coeff: t.coeff * c,
                    string: t.string.clone(),
                })
                .collect(),
        };
        s.simplify();
        s
    }

    pub fn mul(&self, other: &PauliSum) -> Result<PauliSum> {
        self.check_same_n(other)?;
        let mut terms = Vec::with_capacity(self.terms.len() * other.terms.len());
        for a in &self.terms {
            for b in &other.terms {
                let (phase, string) = a.string.multiply(&b.string)?;
                terms.push(PauliTerm {
                    coeff: a.coeff * b.coeff * phase.to_complex(),
                    string,
                });
            }
        }
        let mut s = PauliSum { n: self.n, terms };
        s.simplify();
        Ok(s)
    }

    /// `self * other - other * self`. Only anticommuting string pairs
    /// contribute, each with twice their product.
    pub fn commutator(&self, other: &PauliSum) -> Result<PauliSum> {
        self.check_same_n(other)?;
        let mut terms = Vec::new();
        for a in &self.terms {
            for b in &other.terms {
                if a.string.commutes_with(&b.string) {
                    continue;
                }
                let (phase, string) = a.string.multiply(&b.string)?;
                terms.push(PauliTerm {
                    coeff: a.coeff * b.coeff * phase.to_complex() * 2.0,
                    string,
                });
            }
        }
        let mut s = PauliSum { n: self.n, terms };
        s.simplify();
        Ok(s)
    }

    pub fn adjoint(&self) -> PauliSum {
        PauliSum {
            n: self.n,
            terms: self
                .terms
                .iter()
                .map(|t| PauliTerm {
                    coeff: t.coeff.conj(),
                    string: t.string.clone(),
                })
                .collect(),
        }
    }

    /// `front (x) self` as a sum on `n + 1` qubits.
    pub fn prepend(&self, front: Pauli) -> PauliSum {
        PauliSum {
            n: self.n + 1,
            terms: self
                .terms
                .iter()
                .map(|t| PauliTerm {
                    coeff: t.coeff,
                    string: t.string.prepend(front),
                })
                .collect(),
        }
    }

    pub fn to_dense(&self) -> Result<DenseMatrix> {
        check_cap("to_dense", self.n)?;
        let dim = 1usize << self.n;
        let mut m = DMatrix::<C64>::zeros(dim, dim);
        for t in &self.terms {
            let (x, z, ny) = t.string.masks();
            let base = t.coeff * Phase::from_power(ny).to_complex();
            for col in 0..dim {
                let sign = if (col as u64 & z).count_ones().is_multiple_of(2) { 1.0 } else { -1.0 };
                m[((col as u64 ^ x) as usize, col)] += base * sign;
            }
        }
        Ok(DenseMatrix::wrap(m))
    }

    /// Pauli coefficients `tr(P M) / 2^n` of a dense matrix.
    ///
    /// For each X-mask the diagonal band `M[d, d ^ x]` is gathered and a
    /// Walsh-Hadamard transform over `d` yields all Z-masks at once, so the
    /// cost is `n 4^n` rather than `8^n`.
    pub fn decompose_dense(m: &DenseMatrix, n: usize) -> Result<PauliSum> {
        let dim = m.dim();
        if dim != 1usize << n {
            return Err(Error::Shape(format!(
                "matrix dimension {dim} does not match 2^{n}"
            )));
        }
        check_cap("decompose_dense", n)?;
        let scale = 1.0 / dim as f64;
        let mut terms = Vec::new();
        let mut band = vec![C64::default(); dim];
        for x in 0..dim {
            for (d, slot) in band.iter_mut().enumerate() {
                *slot = m.get(d, d ^ x);
            }
            walsh_hadamard(&mut band);
            for (z, &value) in band.iter().enumerate() {
                let ny = (x & z).count_ones();
                let coeff = Phase::from_power(ny).to_complex() * value * scale;
                if coeff.norm() >= DROP_TOLERANCE {
                    terms.push((coeff, string_from_masks(n, x as u64, z as u64)));
                }
            }
        }
        PauliSum::from_terms(n, terms)
    }

    /// Text form, one `coeff_re coeff_im AXES` line per term.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for t in &self.terms {
            out.push_str(&format!("{} {} {}\n", t.coeff.re, t.coeff.im, t.string));
        }
        out
    }

    /// Parses the text form. Blank lines and `#` comments are skipped; an
    /// empty input needs `n` to be known, so it is passed explicitly.
    pub fn from_text(n: usize, text: &str) -> Result<PauliSum> {
        let mut terms = Vec::new();
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let fields: Vec<&str> = line.split_whitespace().collect();
            let [re, im, axes] = fields.as_slice() else {
                return Err(Error::Parse(format!(
                    "line {}: expected \"re im AXES\", got \"{raw}\"",
                    lineno + 1
                )));
            };
            let parse = |s: &str| {
                s.parse::<f64>()
                    .map_err(|e| Error::Parse(format!("line {}: {e}", lineno + 1)))
            };
            terms.push((C64::new(parse(re)?, parse(im)?), axes.parse()?));
        }
        PauliSum::from_terms(n, terms)
    }
}

fn string_from_masks(n: usize, x: u64, z: u64) -> PauliString {
    let axes = (0..n)
        .map(|q| {
            let bit = 1u64 << (n - 1 - q);
            match (x & bit != 0, z & bit != 0) {
                (false, false) => Pauli::I,
                (true, false) => Pauli::X,
                (true, true) => Pauli::Y,
                (false, true) => Pauli::Z,
            }
        })
        .collect();
    PauliString::new(axes)
}

fn walsh_hadamard(v: &mut [C64]) {
    let mut h = 1;
    while h < v.len() {
        for block in (0..v.len()).step_by(2 * h) {
            for i in block..block + h {
                let (a, b) = (v[i], v[i + h]);
                v[i] = a + b;
                v[i + h] = a - b;
            }
        }
        h *= 2;
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn ps(s: &str) -> PauliString {
        s.parse().unwrap()
    }

    fn c(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    const SINGLE: [[[f64; 4]; 2]; 4] = [
        [[1.0, 0.0, 0.0, 0.0], [0.0, 0.0, 1.0, 0.0]],
        [[0.0, 0.0, 1.0, 0.0], [1.0, 0.0, 0.0, 0.0]],
        [[0.0, 0.0, 0.0, -1.0], [0.0, 1.0, 0.0, 0.0]],
        [[1.0, 0.0, 0.0, 0.0], [0.0, 0.0, -1.0, 0.0]],
    ];

    /// Kronecker product of explicit 2x2 matrices, independent of `masks`.
    fn kron_oracle(s: &PauliString) -> DenseMatrix {
        let mut m = DenseMatrix::identity(1);
        for &p in s.axes() {
            let rows = SINGLE[p as usize];
            let single = DenseMatrix::from_rows(&[
                vec![c(rows[0][0], rows[0][1]), c(rows[0][2], rows[0][3])],
                vec![c(rows[1][0], rows[1][1]), c(rows[1][2], rows[1][3])],
            ])
            .unwrap();
            m = m.kron(&single);
        }
        m
    }

    fn sum_oracle(s: &PauliSum) -> DenseMatrix {
        let dim = 1 << s.n_qubits();
        s.terms().iter().fold(DenseMatrix::zeros(dim), |acc, t| {
            acc.add(&kron_oracle(&t.string).scale(t.coeff))
        })
    }

    #[test]
    fn single_qubit_products() {
        assert_eq!(ps("X").multiply(&ps("X")).unwrap(), (Phase::ONE, ps("I")));
        assert_eq!(ps("X").multiply(&ps("Y")).unwrap(), (Phase::I, ps("Z")));
        assert_eq!(ps("Y").multiply(&ps("X")).unwrap(), (Phase::MINUS_I, ps("Z")));
    }

    #[test]
    fn two_qubit_product_matches_dense() {
        let (phase, r) = ps("XZ").multiply(&ps("YZ")).unwrap();
        assert_eq!((phase, r.clone()), (Phase::I, ps("ZI")));
        let lhs = kron_oracle(&ps("XZ")).matmul(&kron_oracle(&ps("YZ")));
        let rhs = kron_oracle(&r).scale(phase.to_complex());
        assert!(lhs.sub(&rhs).frobenius_norm() < 1e-15);
    }

    #[test]
    fn multiply_size_mismatch() {
        assert!(matches!(
            ps("X").multiply(&ps("XX")),
            Err(Error::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn commutator_examples() {
        let x = PauliSum::from_labels(1, &[(1.0, 0.0, "X")]).unwrap();
        let y = PauliSum::from_labels(1, &[(1.0, 0.0, "Y")]).unwrap();
        assert!(x.commutator(&x).unwrap().is_empty());
        let xy = x.commutator(&y).unwrap();
        assert_eq!(xy, PauliSum::from_labels(1, &[(0.0, 2.0, "Z")]).unwrap());
        let two = PauliSum::zero(2);
        assert!(x.commutator(&two).is_err());
    }

    #[test]
    fn to_dense_examples() {
        let z = PauliSum::from_labels(1, &[(1.0, 0.0, "Z")]).unwrap();
        let expected = DenseMatrix::from_diagonal(&[c(1.0, 0.0), c(-1.0, 0.0)]).unwrap();
        assert_eq!(z.to_dense().unwrap(), expected);

        assert_eq!(PauliSum::zero(2).to_dense().unwrap(), DenseMatrix::zeros(4));

        let xx = PauliSum::from_labels(2, &[(0.5, 0.0, "XX")]).unwrap();
        let m = xx.to_dense().unwrap();
        for r in 0..4 {
            for col in 0..4 {
                let expect = if r + col == 3 { 0.5 } else { 0.0 };
                assert_eq!(m.get(r, col), c(expect, 0.0));
            }
        }
    }

    #[test]
    fn to_dense_respects_cap() {
        let big = PauliSum::zero(crate::dense::dense_cap() + 1);
        assert!(matches!(big.to_dense(), Err(Error::Capacity { .. })));
    }

    #[test]
    fn decompose_examples() {
        let id = DenseMatrix::identity(2);
        assert_eq!(PauliSum::decompose_dense(&id, 1).unwrap(), PauliSum::identity(1));
        let z = DenseMatrix::from_diagonal(&[c(1.0, 0.0), c(-1.0, 0.0)]).unwrap();
        assert_eq!(
            PauliSum::decompose_dense(&z, 1).unwrap(),
            PauliSum::from_labels(1, &[(1.0, 0.0, "Z")]).unwrap()
        );
        assert!(matches!(
            PauliSum::decompose_dense(&id, 2),
            Err(Error::Shape(_))
        ));
    }

    #[test]
    fn text_round_trip_and_errors() {
        let s = PauliSum::from_labels(3, &[(0.5, 0.0, "XXI"), (-1.25, 3e-7, "ZIY")]).unwrap();
        let text = s.to_text();
        assert_eq!(PauliSum::from_text(3, &text).unwrap(), s);
        assert!(PauliSum::from_text(3, "0.5 XXI").is_err());
        assert!(PauliSum::from_text(3, "0.5 0 XQI").is_err());
        assert!(PauliSum::from_text(2, "0.5 0 XXI").is_err());
        let commented = "# header\n\n0.5 0.0 XXI # trailing\n";
        assert_eq!(PauliSum::from_text(3, commented).unwrap().len(), 1);
    }

    #[test]
    fn canonical_merge_and_drop() {
        let s = PauliSum::from_labels(2, &[(1.0, 0.0, "ZI"), (0.5, 0.0, "XX"), (-1.0, 0.0, "ZI")])
            .unwrap();
        assert_eq!(s.len(), 1);
        assert_eq!(s.coeff(&ps("XX")), c(0.5, 0.0));
        let tiny = PauliSum::from_labels(1, &[(1e-15, 0.0, "X")]).unwrap();
        assert!(tiny.is_empty());
    }

    fn arb_pauli() -> impl Strategy<Value = Pauli> {
        prop_oneof![Just(Pauli::I), Just(Pauli::X), Just(Pauli::Y), Just(Pauli::Z)]
    }

    fn arb_string(n: usize) -> impl Strategy<Value = PauliString> {
        proptest::collection::vec(arb_pauli(), n).prop_map(PauliString::new)
    }

    fn arb_sum(n: usize) -> impl Strategy<Value = PauliSum> {
        proptest::collection::vec((-1.0f64..1.0, -1.0f64..1.0, arb_string(n)), 0..6).prop_map(
            move |terms| {
                PauliSum::from_terms(n, terms.into_iter().map(|(re, im, s)| (C64::new(re, im), s)))
                    .unwrap()
            },
        )
    }

    proptest! {
        #[test]
        fn product_phases_detect_anticommutation(p in arb_string(4), q in arb_string(4)) {
            let (ph_pq, r1) = p.multiply(&q).unwrap();
            let (ph_qp, r2) = q.multiply(&p).unwrap();
            prop_assert_eq!(&r1, &r2);
            let ratio = ph_pq.times(Phase::from_power(4 - ph_qp.power()));
            if p.commutes_with(&q) {
                prop_assert_eq!(ratio, Phase::ONE);
            } else {
                prop_assert_eq!(ratio, Phase::MINUS_ONE);
            }
            // P (P Q) = Q up to the tracked phase.
            let (ph_back, back) = p.multiply(&r1).unwrap();
            prop_assert_eq!(back, q);
            prop_assert_eq!(ph_back.times(ph_pq), Phase::ONE);
        }

        #[test]
        fn product_matches_dense(p in arb_string(3), q in arb_string(3)) {
            let (phase, r) = p.multiply(&q).unwrap();
            let lhs = kron_oracle(&p).matmul(&kron_oracle(&q));
            let rhs = kron_oracle(&r).scale(phase.to_complex());
            prop_assert!(lhs.sub(&rhs).frobenius_norm() < 1e-14);
        }

        #[test]
        fn to_dense_matches_kron(s in arb_sum(3)) {
            prop_assert!(s.to_dense().unwrap().sub(&sum_oracle(&s)).frobenius_norm() < 1e-13);
        }

        #[test]
        fn commutator_matches_dense(s in arb_sum(3), t in arb_sum(3)) {
            let (ds, dt) = (sum_oracle(&s), sum_oracle(&t));
            let dense = ds.matmul(&dt).sub(&dt.matmul(&ds));
            let algebraic = sum_oracle(&s.commutator(&t).unwrap());
            prop_assert!(dense.sub(&algebraic).frobenius_norm() < 1e-12);
            prop_assert!(s.commutator(&s).unwrap().is_empty());
        }

        #[test]
        fn decompose_inverts_to_dense(s in arb_sum(3)) {
            let back = PauliSum::decompose_dense(&s.to_dense().unwrap(), 3).unwrap();
            for (a, b) in back.terms().iter().zip(s.terms()) {
                prop_assert_eq!(&a.string, &b.string);
                prop_assert!((a.coeff - b.coeff).norm() < 1e-14);
            }
            prop_assert_eq!(back.len(), s.len());
        }

        #[test]
        fn hermitian_iff_dense_hermitian(s in arb_sum(2), real in any::<bool>()) {
            let s = if real {
                PauliSum::from_terms(2, s.terms().iter().map(|t| (C64::new(t.coeff.re, 0.0), t.string.clone()))).unwrap()
            } else { s };
            let defect = s.to_dense().unwrap().hermiticity_defect();
            prop_assert_eq!(s.is_hermitian(), defect < 1e-12);
        }
    }
}
