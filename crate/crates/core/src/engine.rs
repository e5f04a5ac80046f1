//! Statevector simulator over one ancilla plus `n` system qubits.
//!
//! The ancilla is qubit 0, the most significant bit of an amplitude index,
//! so the ancilla-`|0>` half of the register is the first `2^n` amplitudes
//! and a system Pauli string acts on the full register through the same
//! bit masks it has on its own. States are not renormalized unless an
//! operation says so; `norm_sq` is tracked explicitly.

use std::io::Write;

use num_complex::Complex64 as C64;
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::dense::{check_cap, DenseMatrix};
use crate::error::{Error, Result};
use crate::pauli::{Phase, PauliString, PauliSum};
use crate::problem::Dilation;

/// One Pauli term in mask form, ready to act on amplitudes.
#[derive(Clone, Copy, Debug)]
pub(crate) struct MaskedTerm {
    coeff: C64,
    x: u64,
    z: u64,
    /// `i^(number of Y)`.
    y_phase: C64,
}

impl MaskedTerm {
    fn new(coeff: C64, s: &PauliString) -> Self {
        let (x, z, ny) = s.masks();
        MaskedTerm {
            coeff,
            x,
            z,
            y_phase: Phase::from_power(ny).to_complex(),
        }
    }

    fn is_identity(&self) -> bool {
        self.x == 0 && self.z == 0
    }

    /// Phase of `P|b> = phase(b) |b ^ x>`.
    #[inline]
    fn phase(&self, b: usize) -> C64 {
        if (b as u64 & self.z).count_ones().is_multiple_of(2) {
            self.y_phase
        } else {
            -self.y_phase
        }
    }
}

/// A Pauli sum compiled to masks.
#[derive(Clone, Debug)]
pub struct CompiledSum {
    n: usize,
    terms: Vec<MaskedTerm>,
    one_norm: f64,
    commuting: bool,
}

impl CompiledSum {
    pub fn new(s: &PauliSum) -> Self {
        CompiledSum {
            n: s.n_qubits(),
            terms: s
                .terms()
                .iter()
                .map(|t| MaskedTerm::new(t.coeff, &t.string))
                .collect(),
            one_norm: s.one_norm(),
            commuting: s.terms_commute(),
        }
    }

    pub fn n_qubits(&self) -> usize {
        self.n
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn terms_commute(&self) -> bool {
        self.commuting
    }

    /// Number of non-identity terms, i.e. rotations in one product sweep.
    pub fn rotation_count(&self) -> usize {
        self.terms.iter().filter(|t| !t.is_identity()).count()
    }

    /// `out = S v` on a vector whose length is a multiple of `2^n`.
    fn apply_into(&self, v: &[C64], out: &mut [C64]) {
        out.iter_mut().for_each(|o| *o = C64::default());
        for t in &self.terms {
            let x = t.x as usize;
            for (b, &amp) in v.iter().enumerate() {
                out[b ^ x] += t.coeff * t.phase(b) * amp;
            }
        }
    }
}

/// How `exp(i sqrt(2 tau) G)` is applied.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum DilationMethod {
    /// Product over Pauli terms when they commute (exact), series otherwise.
    #[default]
    Auto,
    /// Product of per-term rotations in canonical order, commuting or not.
    Trotter,
    /// Truncated Taylor series of the matrix-free Pauli action.
    Series,
    /// Dense exponential of the block form; validation only.
    Dense,
}

/// How `exp(-i tau H)` is applied.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum HamiltonianMethod {
    /// First-order product over the terms of `H` in canonical order.
    #[default]
    Trotter,
    /// Truncated Taylor series of the matrix-free Pauli action.
    Series,
}

#[derive(Clone, Debug, PartialEq)]
pub struct StateVector {
    n_total: usize,
    amps: Vec<C64>,
    norm_sq: f64,
    rotations: u64,
}

impl StateVector {
    /// `|0> (x) psi` for a system vector `psi` of length `2^n`.
    pub fn with_ancilla(psi: &[C64]) -> Result<Self> {
        if !psi.len().is_power_of_two() || psi.is_empty() {
            return Err(Error::Shape(format!(
                "system vector length {} is not a power of two",
                psi.len()
            )));
        }
        let n = psi.len().trailing_zeros() as usize;
        let mut amps = vec![C64::default(); 2 * psi.len()];
        amps[..psi.len()].copy_from_slice(psi);
        Ok(Self::from_amplitudes(n + 1, amps))
    }

    pub fn from_amplitudes(n_total: usize, amps: Vec<C64>) -> Self {
        assert_eq!(amps.len(), 1 << n_total, "amplitude count must be 2^n_total");
        let norm_sq = amps.iter().map(|z| z.norm_sqr()).sum();
        StateVector {
            n_total,
            amps,
            norm_sq,
            rotations: 0,
        }
    }

    pub fn n_total(&self) -> usize {
        self.n_total
    }

    pub fn n_system(&self) -> usize {
        self.n_total - 1
    }

    pub fn amplitudes(&self) -> &[C64] {
        &self.amps
    }

    pub fn norm_sq(&self) -> f64 {
        self.norm_sq
    }

    /// Non-identity Pauli rotations applied so far.
    pub fn rotations(&self) -> u64 {
        self.rotations
    }

    /// Ancilla-`|0>` block, the unnormalized system state after post-selection.
    pub fn system_part(&self) -> &[C64] {
        &self.amps[..self.amps.len() / 2]
    }

    fn half(&self) -> usize {
        self.amps.len() / 2
    }

    pub fn recompute_norm(&mut self) -> f64 {
        self.norm_sq = self.amps.iter().map(|z| z.norm_sqr()).sum();
        self.norm_sq
    }

    pub fn normalize(&mut self) -> Result<()> {
        let n = self.recompute_norm();
        if n == 0.0 || !n.is_finite() {
            return Err(Error::DegenerateState);
        }
        let inv = n.sqrt().recip();
        self.amps.iter_mut().for_each(|a| *a *= inv);
        self.norm_sq = 1.0;
        Ok(())
    }

    fn check_support(&self, n: usize) -> Result<()> {
        if n > self.n_total {
            return Err(Error::DimensionMismatch {
                expected: self.n_total,
                found: n,
            });
        }
        Ok(())
    }

    fn rotate(&mut self, t: &MaskedTerm, theta: f64) {
        let (sin, cos) = theta.sin_cos();
        if t.is_identity() {
            let phase = C64::new(cos, -sin);
            self.amps.iter_mut().for_each(|a| *a *= phase);
            return;
        }
        self.rotations += 1;
        let minus_i_sin = C64::new(0.0, -sin);
        if t.x == 0 {
            // Diagonal: P|b> = phase(b)|b> with phase(b) = +-1.
            for b in 0..self.amps.len() {
                let p = t.phase(b);
                self.amps[b] *= cos + minus_i_sin * p;
            }
            return;
        }
        let x = t.x as usize;
        let top = 1usize << (63 - t.x.leading_zeros());
        for b in 0..self.amps.len() {
            if b & top != 0 {
                continue;
            }
            let c = b ^ x;
            let (ab, ac) = (self.amps[b], self.amps[c]);
            // (P s)_b = phase(c) s_c and (P s)_c = phase(b) s_b.
            self.amps[b] = cos * ab + minus_i_sin * t.phase(c) * ac;
            self.amps[c] = cos * ac + minus_i_sin * t.phase(b) * ab;
        }
    }

    /// `s <- exp(-i theta P) s = cos(theta) s - i sin(theta) P s`.
    ///
    /// `P` may act on all `1 + n` qubits, or on the `n` system qubits only.
    pub fn apply_pauli_exp(&mut self, p: &PauliString, theta: f64) -> Result<()> {
        if p.n_qubits() != self.n_total && p.n_qubits() != self.n_total - 1 {
            return Err(Error::DimensionMismatch {
                expected: self.n_total,
                found: p.n_qubits(),
            });
        }
        self.rotate(&MaskedTerm::new(C64::new(1.0, 0.0), p), theta);
        Ok(())
    }

    /// `prod_a exp(-i h_a tau P_a)` in canonical term order on the system qubits.
    pub fn apply_trotter_step_h(&mut self, h: &PauliSum, tau: f64) -> Result<()> {
        if !h.is_hermitian() {
            return Err(Error::NonHermitian("Hamiltonian has complex coefficients".into()));
        }
        self.check_support(h.n_qubits())?;
        self.apply_compiled_product(&CompiledSum::new(h), tau);
        Ok(())
    }

    /// `prod_a exp(-i Re(c_a) scale P_a)` in term order.
    pub(crate) fn apply_compiled_product(&mut self, s: &CompiledSum, scale: f64) {
        for t in &s.terms {
            self.rotate(t, t.coeff.re * scale);
        }
    }

    /// `s <- exp(-i theta S) s` for Hermitian `S`, via a Taylor series with
    /// enough sub-steps that each has `|theta| ||S||_1 / m <= 1/2`; terms are
    /// summed until they drop below `1e-17` of the running vector.
    pub(crate) fn apply_compiled_exp(&mut self, s: &CompiledSum, theta: f64) {
        if s.is_empty() || theta == 0.0 {
            return;
        }
        let substeps = ((theta.abs() * s.one_norm) / 0.5).ceil().max(1.0) as usize;
        let h = theta / substeps as f64;
        let mut term = vec![C64::default(); self.amps.len()];
        let mut next = vec![C64::default(); self.amps.len()];
        for _ in 0..substeps {
            term.copy_from_slice(&self.amps);
            let scale_norm = self.amps.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
            for k in 1..=60 {
                s.apply_into(&term, &mut next);
                let factor = C64::new(0.0, -h / k as f64);
                let mut size = 0.0;
                for (t, nx) in term.iter_mut().zip(&next) {
                    *t = factor * nx;
                    size += t.norm_sqr();
                }
                self.amps.iter_mut().zip(&term).for_each(|(a, t)| *a += t);
                if size.sqrt() <= 1e-17 * scale_norm.max(f64::MIN_POSITIVE) {
                    break;
                }
            }
        }
        self.rotations += (substeps * s.rotation_count()) as u64;
    }

    /// Exact `exp(-i theta H)` on the system qubits by series summation.
    pub fn apply_hamiltonian_exact(&mut self, h: &PauliSum, theta: f64) -> Result<()> {
        if !h.is_hermitian() {
            return Err(Error::NonHermitian("Hamiltonian has complex coefficients".into()));
        }
        self.check_support(h.n_qubits())?;
        self.apply_compiled_exp(&CompiledSum::new(h), theta);
        Ok(())
    }

    /// `s <- exp(i sqrt(2 tau) G) s` for the dilation `G` of one jump.
    pub fn apply_dilated_jump(&mut self, d: &Dilation, tau: f64, method: DilationMethod) -> Result<()> {
        if !(tau >= 0.0) {
            return Err(Error::InvalidParameter(format!("time step must be >= 0, got {tau}")));
        }
        if d.n_total() != self.n_total {
            return Err(Error::DimensionMismatch {
                expected: self.n_total,
                found: d.n_total(),
            });
        }
        let theta = Dilation::angle(tau);
        match method {
            DilationMethod::Dense => self.apply_dense_exp(d, theta),
            other => {
                let compiled = CompiledSum::new(&d.pauli);
                self.apply_dilation_compiled(&compiled, theta, other);
                Ok(())
            }
        }
    }

    pub(crate) fn apply_dilation_compiled(&mut self, g: &CompiledSum, theta: f64, method: DilationMethod) {
        let product = match method {
            DilationMethod::Trotter => true,
            DilationMethod::Auto => g.terms_commute(),
            DilationMethod::Series | DilationMethod::Dense => false,
        };
        // exp(+i theta G) = exp(-i (-theta) G)
        if product {
            self.apply_compiled_product(g, -theta);
        } else {
            self.apply_compiled_exp(g, -theta);
        }
    }

    fn apply_dense_exp(&mut self, d: &Dilation, theta: f64) -> Result<()> {
        check_cap("dense dilation", self.n_total)?;
        let g = d.dense.as_ref().ok_or(Error::Capacity {
            what: "dense dilation",
            qubits: self.n_total,
            cap: crate::dense::dense_cap(),
        })?;
        let u = crate::oracle::expm(&g.scale(C64::new(0.0, theta)), 1.0)?;
        self.amps = u.apply(&self.amps);
        self.rotations += d.pauli.len() as u64;
        Ok(())
    }

    /// Applies a dense unitary on the full register.
    pub fn apply_dense(&mut self, u: &DenseMatrix) -> Result<()> {
        if u.dim() != self.amps.len() {
            return Err(Error::DimensionMismatch {
                expected: self.amps.len(),
                found: u.dim(),
            });
        }
        self.amps = u.apply(&self.amps);
        self.recompute_norm();
        Ok(())
    }

    /// `(|0><0| (x) I) s` without renormalization; returns the retained
    /// fraction of the squared norm.
    pub fn project_ancilla_zero(&mut self) -> Result<f64> {
        let before = self.norm_sq;
        if before == 0.0 {
            return Err(Error::DegenerateState);
        }
        let half = self.half();
        self.amps[half..].iter_mut().for_each(|a| *a = C64::default());
        let after = self.recompute_norm();
        Ok(after / before)
    }

    /// Born-rule ancilla measurement with collapse and renormalization.
    pub fn sample_ancilla<R: Rng + ?Sized>(&mut self, rng: &mut R) -> Result<u8> {
        let total = self.recompute_norm();
        if total == 0.0 {
            return Err(Error::DegenerateState);
        }
        let half = self.half();
        let p0 = self.amps[..half].iter().map(|z| z.norm_sqr()).sum::<f64>() / total;
        let u: f64 = rng.random();
        let outcome = if u < p0 { 0 } else { 1 };
        let (keep, drop) = if outcome == 0 { (0..half, half..2 * half) } else { (half..2 * half, 0..half) };
        self.amps[drop].iter_mut().for_each(|a| *a = C64::default());
        let kept = self.amps[keep].iter().map(|z| z.norm_sqr()).sum::<f64>();
        let inv = kept.sqrt().recip();
        self.amps.iter_mut().for_each(|a| *a *= inv);
        self.norm_sq = 1.0;
        Ok(outcome)
    }

    /// Measures the ancilla, then returns it to `|0>` whatever the outcome.
    pub fn reset_ancilla<R: Rng + ?Sized>(&mut self, rng: &mut R) -> Result<u8> {
        let outcome = self.sample_ancilla(rng)?;
        if outcome == 1 {
            let half = self.half();
            let (lo, hi) = self.amps.split_at_mut(half);
            lo.swap_with_slice(hi);
        }
        Ok(outcome)
    }

    /// `<s|O|s>` for a Hermitian system observable, optionally divided by `norm_sq`.
    pub fn expectation(&self, o: &PauliSum, normalized: bool) -> Result<f64> {
        if !o.is_hermitian() {
            return Err(Error::NonHermitian("observable has complex coefficients".into()));
        }
        if o.n_qubits() != self.n_total - 1 {
            return Err(Error::DimensionMismatch {
                expected: self.n_total - 1,
                found: o.n_qubits(),
            });
        }
        let value = expectation_of(&CompiledSum::new(o), &self.amps);
        if normalized {
            if self.norm_sq == 0.0 {
                return Err(Error::DegenerateState);
            }
            Ok(value / self.norm_sq)
        } else {
            Ok(value)
        }
    }

    /// Little-endian `f64` pairs `(re, im)` per amplitude.
    pub fn write_amplitudes<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        for a in &self.amps {
            w.write_all(&a.re.to_le_bytes())?;
            w.write_all(&a.im.to_le_bytes())?;
        }
        Ok(())
    }
}

pub(crate) fn expectation_of(o: &CompiledSum, v: &[C64]) -> f64 {
    let mut total = C64::default();
    for t in &o.terms {
        let x = t.x as usize;
        let mut acc = C64::default();
        for (b, &amp) in v.iter().enumerate() {
            acc += v[b ^ x].conj() * t.phase(b) * amp;
        }
        total += t.coeff * acc;
    }
    total.re
}

/// Counter-based random source for one trajectory: each `(step, slot)` pair
/// maps to a fixed position of a ChaCha stream selected by the trajectory id,
/// so draws do not depend on scheduling.
pub struct ShotStream {
    rng: ChaCha8Rng,
    slots_per_step: u64,
}

impl ShotStream {
    pub fn new(seed: u64, trajectory: u64, slots_per_step: usize) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(trajectory);
        ShotStream {
            rng,
            slots_per_step: slots_per_step.max(1) as u64,
        }
    }

    /// Generator positioned at the draw for `(step, slot)`. Each slot owns 16
    /// 32-bit words, enough for a handful of `f64` draws.
    pub fn at(&mut self, step: usize, slot: usize) -> &mut ChaCha8Rng {
        let index = step as u128 * self.slots_per_step as u128 + slot as u128;
        self.rng.set_word_pos(index * 16);
        &mut self.rng
    }
}
