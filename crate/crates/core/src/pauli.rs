//! Weighted Pauli strings and sums.
//!
//! Qubit `i` of an `n`-qubit string maps to bit `n - 1 - i` of a basis-state
//! index, so qubit 0 is the leftmost character of both the operator label and
//! a measured bitstring.
//!
//! Transformations are products of factors `A_k = exp(FACTOR_SIGN · i τ_k G_k)`
//! with involutory generators `G_k`, and an operator is transformed as
//! `Q' = A† Q A` factor by factor. With `FACTOR_SIGN = -1` and real τ this is
//! `W Q W†` for `W = exp(iτG)`, which for per-qubit `Y` generators gives the
//! familiar TFIM coefficients `-X → -cos2τ X - sin2τ Z`.

use std::collections::BTreeMap;
use std::fmt;

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Coefficients (real and imaginary parts separately) below this are dropped.
pub const PRUNE_TOL: f64 = 1e-12;

/// Largest qubit count for which dense matrices are built.
pub const DENSE_MAX_QUBITS: usize = 12;

/// Sign `s` of the factor exponent `A = exp(s · iτG)`; operators transform as `A† Q A`.
pub const FACTOR_SIGN: f64 = -1.0;

const ZERO: Complex64 = Complex64::new(0.0, 0.0);
const ONE: Complex64 = Complex64::new(1.0, 0.0);
const I: Complex64 = Complex64::new(0.0, 1.0);

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Pauli {
    I,
    X,
    Y,
    Z,
}

impl Pauli {
    /// Single-site product `self · rhs = phase · result`.
    pub fn mul(self, rhs: Pauli) -> (Complex64, Pauli) {
        use Pauli::*;
        match (self, rhs) {
            (I, p) | (p, I) => (ONE, p),
            (X, X) | (Y, Y) | (Z, Z) => (ONE, I),
            (X, Y) => (I_UNIT, Z),
            (Y, X) => (-I_UNIT, Z),
            (Y, Z) => (I_UNIT, X),
            (Z, Y) => (-I_UNIT, X),
            (Z, X) => (I_UNIT, Y),
            (X, Z) => (-I_UNIT, Y),
        }
    }

    /// True for X and Y, the operators that flip a computational basis bit.
    pub fn flips(self) -> bool {
        matches!(self, Pauli::X | Pauli::Y)
    }

    pub fn as_char(self) -> char {
        match self {
            Pauli::I => 'I',
            Pauli::X => 'X',
            Pauli::Y => 'Y',
            Pauli::Z => 'Z',
        }
    }

    pub fn from_char(c: char) -> Option<Pauli> {
        match c {
            'I' | 'i' => Some(Pauli::I),
            'X' | 'x' => Some(Pauli::X),
            'Y' | 'y' => Some(Pauli::Y),
            'Z' | 'z' => Some(Pauli::Z),
            _ => None,
        }
    }
}

// `I` is taken by the enum variant inside `mul`.
const I_UNIT: Complex64 = I;

/// Parse an operator label such as `"XIZ"`.
pub fn parse_ops(label: &str) -> Result<Vec<Pauli>> {
    label
        .chars()
        .map(|c| Pauli::from_char(c).ok_or_else(|| Error::Parse(format!("bad Pauli label {label:?}"))))
        .collect()
}

fn label_of(ops: &[Pauli]) -> String {
    ops.iter().map(|p| p.as_char()).collect()
}

/// A complex-weighted tensor product of single-qubit Pauli operators.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PauliTerm {
    pub coeff: Complex64,
    pub ops: Vec<Pauli>,
}

impl PauliTerm {
    pub fn new(coeff: impl Into<Complex64>, ops: Vec<Pauli>) -> Self {
        Self { coeff: coeff.into(), ops }
    }

    pub fn parse(coeff: impl Into<Complex64>, label: &str) -> Result<Self> {
        Ok(Self::new(coeff, parse_ops(label)?))
    }

    pub fn identity(n: usize, coeff: impl Into<Complex64>) -> Self {
        Self::new(coeff, vec![Pauli::I; n])
    }

    /// `coeff · P_q` on `n` qubits.
    pub fn single(n: usize, qubit: usize, p: Pauli, coeff: impl Into<Complex64>) -> Self {
        let mut ops = vec![Pauli::I; n];
        ops[qubit] = p;
        Self::new(coeff, ops)
    }

    /// `coeff · P_a Q_b` on `n` qubits.
    pub fn pair(n: usize, a: (usize, Pauli), b: (usize, Pauli), coeff: impl Into<Complex64>) -> Self {
        let mut ops = vec![Pauli::I; n];
        ops[a.0] = a.1;
        ops[b.0] = b.1;
        Self::new(coeff, ops)
    }

    pub fn n(&self) -> usize {
        self.ops.len()
    }

    pub fn label(&self) -> String {
        label_of(&self.ops)
    }

    pub fn is_identity(&self) -> bool {
        self.ops.iter().all(|&p| p == Pauli::I)
    }

    /// No X or Y anywhere.
    pub fn is_diagonal(&self) -> bool {
        !self.ops.iter().any(|p| p.flips())
    }

    fn bit(&self, qubit: usize) -> usize {
        1 << (self.n() - 1 - qubit)
    }

    /// Basis-index mask of the qubits hosting X or Y.
    pub fn x_mask(&self) -> usize {
        self.ops.iter().enumerate().filter(|(_, p)| p.flips()).fold(0, |m, (q, _)| m | self.bit(q))
    }

    /// Basis-index mask of the qubits hosting Y or Z.
    pub fn z_mask(&self) -> usize {
        self.ops
            .iter()
            .enumerate()
            .filter(|(_, p)| matches!(p, Pauli::Y | Pauli::Z))
            .fold(0, |m, (q, _)| m | self.bit(q))
    }

    pub fn y_count(&self) -> usize {
        self.ops.iter().filter(|&&p| p == Pauli::Y).count()
    }

    /// Action on a basis state: `P|y⟩ = amplitude · |y'⟩`, coefficient included.
    pub fn apply_basis(&self, y: usize) -> (Complex64, usize) {
        let masks = self.masks();
        (masks.amplitude(y) * self.coeff, y ^ masks.x)
    }

    pub(crate) fn masks(&self) -> TermMasks {
        TermMasks { x: self.x_mask(), z: self.z_mask(), y_phase: I.powu(self.y_count() as u32) }
    }
}

impl fmt::Display for PauliTerm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}{:+}i) {}", self.coeff.re, self.coeff.im, self.label())
    }
}

/// Precomputed bit masks for applying a unit-weight Pauli string to basis states.
#[derive(Debug, Clone, Copy)]
pub(crate) struct TermMasks {
    pub x: usize,
    pub z: usize,
    pub y_phase: Complex64,
}

impl TermMasks {
    /// `⟨y ^ x| P |y⟩` for the unit-weight string.
    #[inline]
    pub fn amplitude(&self, y: usize) -> Complex64 {
        if (y & self.z).count_ones() % 2 == 1 {
            -self.y_phase
        } else {
            self.y_phase
        }
    }
}

/// Operator product of two Pauli strings, phase folded into the coefficient.
pub fn pauli_mul(a: &PauliTerm, b: &PauliTerm) -> Result<PauliTerm> {
    if a.n() != b.n() {
        return Err(Error::QubitMismatch { expected: a.n(), got: b.n() });
    }
    let mut coeff = a.coeff * b.coeff;
    let ops = a
        .ops
        .iter()
        .zip(&b.ops)
        .map(|(&p, &q)| {
            let (phase, r) = p.mul(q);
            coeff *= phase;
            r
        })
        .collect();
    Ok(PauliTerm { coeff, ops })
}

/// A normalized sum of Pauli strings over a common qubit count.
///
/// Terms are kept merged, sorted by operator label, with coefficients below
/// [`PRUNE_TOL`] removed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PauliSum {
    n: usize,
    terms: Vec<PauliTerm>,
}

impl PauliSum {
    pub fn zero(n: usize) -> Self {
        Self { n, terms: Vec::new() }
    }

    pub fn identity(n: usize) -> Self {
        Self { n, terms: vec![PauliTerm::identity(n, 1.0)] }
    }

    pub fn from_terms(n: usize, terms: impl IntoIterator<Item = PauliTerm>) -> Result<Self> {
        let mut acc = BTreeMap::new();
        for t in terms {
            if t.n() != n {
                return Err(Error::QubitMismatch { expected: n, got: t.n() });
            }
            *acc.entry(t.ops).or_insert(ZERO) += t.coeff;
        }
        Ok(Self::from_map(n, acc))
    }

    fn from_map(n: usize, acc: BTreeMap<Vec<Pauli>, Complex64>) -> Self {
        let terms = acc
            .into_iter()
            .filter_map(|(ops, c)| {
                let c = Complex64::new(prune(c.re), prune(c.im));
                (c != ZERO).then_some(PauliTerm { coeff: c, ops })
            })
            .collect();
        Self { n, terms }
    }

    pub fn n(&self) -> usize {
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

    /// Coefficient of the string `ops` (zero if absent).
    pub fn coeff_of(&self, ops: &[Pauli]) -> Complex64 {
        self.terms.binary_search_by(|t| t.ops.as_slice().cmp(ops)).map(|i| self.terms[i].coeff).unwrap_or(ZERO)
    }

    /// Coefficient of a label such as `"ZZIII"`; panics on a malformed label.
    pub fn coeff(&self, label: &str) -> Complex64 {
        self.coeff_of(&parse_ops(label).expect("valid Pauli label"))
    }

    pub fn scale(&self, s: impl Into<Complex64>) -> Self {
        let s = s.into();
        let terms = self.terms.iter().map(|t| PauliTerm { coeff: t.coeff * s, ops: t.ops.clone() });
        Self::from_terms(self.n, terms).expect("same n")
    }

    pub fn add(&self, other: &PauliSum) -> Result<Self> {
        self.check_n(other)?;
        Self::from_terms(self.n, self.terms.iter().chain(&other.terms).cloned())
    }

    pub fn mul(&self, other: &PauliSum) -> Result<Self> {
        self.check_n(other)?;
        let mut acc = BTreeMap::new();
        for a in &self.terms {
            for b in &other.terms {
                let p = pauli_mul(a, b)?;
                *acc.entry(p.ops).or_insert(ZERO) += p.coeff;
            }
        }
        Ok(Self::from_map(self.n, acc))
    }

    /// Hermitian adjoint (conjugated coefficients; Pauli strings are Hermitian).
    pub fn adjoint(&self) -> Self {
        Self {
            n: self.n,
            terms: self.terms.iter().map(|t| PauliTerm { coeff: t.coeff.conj(), ops: t.ops.clone() }).collect(),
        }
    }

    pub fn is_hermitian(&self) -> bool {
        self.terms.iter().all(|t| t.coeff.im == 0.0)
    }

    /// Real coefficients, with imaginary parts below [`PRUNE_TOL`] discarded.
    pub fn real_coeffs(&self) -> Vec<f64> {
        self.terms.iter().map(|t| t.coeff.re).collect()
    }

    /// Identity coefficient (trace / 2^n).
    pub fn identity_coeff(&self) -> Complex64 {
        self.coeff_of(&vec![Pauli::I; self.n])
    }

    /// True when `self · self` is the identity (to [`PRUNE_TOL`]).
    pub fn is_involutory(&self) -> bool {
        match self.mul(self) {
            Ok(sq) => sq.len() == 1 && sq.terms[0].is_identity() && (sq.terms[0].coeff - ONE).norm() < PRUNE_TOL,
            Err(_) => false,
        }
    }

    fn check_n(&self, other: &PauliSum) -> Result<()> {
        if self.n != other.n {
            return Err(Error::QubitMismatch { expected: self.n, got: other.n });
        }
        Ok(())
    }

    /// Dense `2^n × 2^n` realization.
    pub fn dense(&self) -> Result<DMatrix<Complex64>> {
        if self.n > DENSE_MAX_QUBITS {
            return Err(Error::TooManyQubits { n: self.n, max: DENSE_MAX_QUBITS });
        }
        let dim = 1usize << self.n;
        let mut m = DMatrix::from_element(dim, dim, ZERO);
        for t in &self.terms {
            let masks = t.masks();
            for y in 0..dim {
                m[(y ^ masks.x, y)] += masks.amplitude(y) * t.coeff;
            }
        }
        Ok(m)
    }

    /// One line per term: `coeff_re coeff_im OPSTRING`.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for t in &self.terms {
            out.push_str(&format!("{} {} {}\n", t.coeff.re, t.coeff.im, t.label()));
        }
        out
    }

    /// Parse the line format of [`PauliSum::to_text`]. Blank lines and `#` comments are skipped.
    pub fn parse_text(text: &str) -> Result<Self> {
        let mut terms = Vec::new();
        let mut n = None;
        for (lineno, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let bad = || Error::Parse(format!("line {}: {line:?}", lineno + 1));
            let fields: Vec<&str> = line.split_whitespace().collect();
            if fields.len() != 3 {
                return Err(bad());
            }
            let num = |s: &str| s.replace('\u{2212}', "-").parse::<f64>().map_err(|_| bad());
            let term = PauliTerm::parse(Complex64::new(num(fields[0])?, num(fields[1])?), fields[2])?;
            match n {
                None => n = Some(term.n()),
                Some(k) if k != term.n() => return Err(Error::QubitMismatch { expected: k, got: term.n() }),
                _ => {}
            }
            terms.push(term);
        }
        let n = n.ok_or_else(|| Error::Parse("empty Pauli sum".into()))?;
        Self::from_terms(n, terms)
    }
}

impl fmt::Display for PauliSum {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.to_text())
    }
}

fn prune(x: f64) -> f64 {
    if x.abs() < PRUNE_TOL {
        0.0
    } else {
        x
    }
}

/// `SWAP_{a,b} = (II + XX + YY + ZZ) / 2`.
pub fn swap_generator(n: usize, a: usize, b: usize) -> PauliSum {
    let terms = [Pauli::I, Pauli::X, Pauli::Y, Pauli::Z].into_iter().map(|p| PauliTerm::pair(n, (a, p), (b, p), 0.5));
    PauliSum::from_terms(n, terms).expect("same n")
}

/// One factor `exp(FACTOR_SIGN · i τ G)` of a transformation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TransformFactor {
    pub generator: PauliSum,
    pub angle: Complex64,
}

impl TransformFactor {
    /// `A = cos τ · 1 + s·i sin τ · G`, valid because `G² = 1`.
    pub fn operator(&self) -> PauliSum {
        let n = self.generator.n();
        let id = PauliSum::identity(n).scale(self.angle.cos());
        let g = self.generator.scale(I * FACTOR_SIGN * self.angle.sin());
        id.add(&g).expect("same n")
    }

    /// `dA/dτ = -sin τ · 1 + s·i cos τ · G` (holomorphic in τ).
    pub fn operator_derivative(&self) -> PauliSum {
        let n = self.generator.n();
        let id = PauliSum::identity(n).scale(-self.angle.sin());
        let g = self.generator.scale(I * FACTOR_SIGN * self.angle.cos());
        id.add(&g).expect("same n")
    }
}

/// Ordered product of transformation factors.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TransformSpec {
    n: usize,
    factors: Vec<TransformFactor>,
}

impl TransformSpec {
    pub fn identity(n: usize) -> Self {
        Self { n, factors: Vec::new() }
    }

    pub fn new(n: usize, factors: Vec<TransformFactor>) -> Result<Self> {
        for f in &factors {
            if f.generator.n() != n {
                return Err(Error::QubitMismatch { expected: n, got: f.generator.n() });
            }
            if !f.generator.is_involutory() {
                return Err(Error::NotInvolutory);
            }
        }
        Ok(Self { n, factors })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn factors(&self) -> &[TransformFactor] {
        &self.factors
    }

    pub fn is_unitary(&self) -> bool {
        self.factors.iter().all(|f| f.angle.im == 0.0)
    }
}

/// `A† q A` for a single factor.
pub fn conjugate(q: &PauliSum, factor: &TransformFactor) -> Result<PauliSum> {
    if q.n() != factor.generator.n() {
        return Err(Error::QubitMismatch { expected: q.n(), got: factor.generator.n() });
    }
    if !factor.generator.is_involutory() {
        return Err(Error::NotInvolutory);
    }
    let a = factor.operator();
    a.adjoint().mul(q)?.mul(&a)
}

/// Conjugate `h` by every factor of `t` in order.
pub fn transform_hamiltonian(h: &PauliSum, t: &TransformSpec) -> Result<PauliSum> {
    t.factors.iter().try_fold(h.clone(), |acc, f| conjugate(&acc, f))
}

/// Transformed operator plus its derivatives with respect to the real and
/// imaginary part of every factor angle.
#[derive(Debug, Clone)]
pub struct TransformJet {
    pub value: PauliSum,
    /// `(∂/∂Re τ_k, ∂/∂Im τ_k)` per factor.
    pub grads: Vec<(PauliSum, PauliSum)>,
}

pub fn transform_with_gradients(h: &PauliSum, t: &TransformSpec) -> Result<TransformJet> {
    if h.n() != t.n {
        return Err(Error::QubitMismatch { expected: t.n, got: h.n() });
    }
    let mut partial = Vec::with_capacity(t.factors.len() + 1);
    partial.push(h.clone());
    for f in &t.factors {
        let next = conjugate(partial.last().expect("non-empty"), f)?;
        partial.push(next);
    }
    let mut grads = Vec::with_capacity(t.factors.len());
    for (k, f) in t.factors.iter().enumerate() {
        let q = &partial[k];
        // X1 = A'† q A; the two directional derivatives are X1 + X1† and i(X1† - X1).
        let x1 = f.operator_derivative().adjoint().mul(q)?.mul(&f.operator())?;
        let x1_adj = x1.adjoint();
        let d_re = x1.add(&x1_adj)?;
        let d_im = x1_adj.add(&x1.scale(-1.0))?.scale(I);
        let rest = &t.factors[k + 1..];
        let d_re = rest.iter().try_fold(d_re, |acc, g| conjugate(&acc, g))?;
        let d_im = rest.iter().try_fold(d_im, |acc, g| conjugate(&acc, g))?;
        grads.push((d_re, d_im));
    }
    Ok(TransformJet { value: partial.pop().expect("non-empty"), grads })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::oracles::eigenvalues_hermitian;
    use proptest::prelude::*;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn close(a: Complex64, b: Complex64, tol: f64) -> bool {
        (a - b).norm() < tol
    }

    fn max_diff(a: &DMatrix<Complex64>, b: &DMatrix<Complex64>) -> f64 {
        (a - b).iter().map(|z| z.norm()).fold(0.0, f64::max)
    }

    /// exp(iφG) for a dense involutory G.
    fn dense_exp_involutory(g: &DMatrix<Complex64>, phi: Complex64) -> DMatrix<Complex64> {
        let id = DMatrix::identity(g.nrows(), g.ncols());
        id * phi.cos() + g * (I * phi.sin())
    }

    fn dense_adjoint(m: &DMatrix<Complex64>) -> DMatrix<Complex64> {
        m.adjoint()
    }

    #[test]
    fn involution_and_cyclic_products() {
        let x = PauliTerm::parse(1.0, "X").unwrap();
        let y = PauliTerm::parse(1.0, "Y").unwrap();
        let xx = pauli_mul(&x, &x).unwrap();
        assert_eq!(xx.label(), "I");
        assert_eq!(xx.coeff, ONE);
        let xy = pauli_mul(&x, &y).unwrap();
        assert_eq!(xy.label(), "Z");
        assert_eq!(xy.coeff, I);
    }

    #[test]
    fn two_qubit_product_matches_dense() {
        let a = PauliTerm::parse(1.0, "XZ").unwrap();
        let b = PauliTerm::parse(1.0, "ZX").unwrap();
        let p = pauli_mul(&a, &b).unwrap();
        assert_eq!(p.label(), "YY");
        assert!(close(p.coeff, ONE, 1e-15));
        let da = PauliSum::from_terms(2, [a]).unwrap().dense().unwrap();
        let db = PauliSum::from_terms(2, [b]).unwrap().dense().unwrap();
        let dp = PauliSum::from_terms(2, [p]).unwrap().dense().unwrap();
        assert!(max_diff(&(da * db), &dp) < 1e-15);
    }

    #[test]
    fn mul_rejects_mismatched_lengths() {
        let a = PauliTerm::parse(1.0, "XZ").unwrap();
        let b = PauliTerm::parse(1.0, "Z").unwrap();
        assert!(matches!(pauli_mul(&a, &b), Err(Error::QubitMismatch { .. })));
    }

    #[test]
    fn single_x_rotated_by_y_generator() {
        let h = PauliSum::from_terms(1, [PauliTerm::parse(-1.0, "X").unwrap()]).unwrap();
        let g = PauliSum::from_terms(1, [PauliTerm::parse(1.0, "Y").unwrap()]).unwrap();
        for tau in [0.1, 0.37, 1.2, -0.8] {
            let f = TransformFactor { generator: g.clone(), angle: c(tau, 0.0) };
            let out = conjugate(&h, &f).unwrap();
            assert!(close(out.coeff("X"), c(-(2.0 * tau).cos(), 0.0), 1e-14));
            assert!(close(out.coeff("Z"), c(-(2.0 * tau).sin(), 0.0), 1e-14));
            assert_eq!(out.len(), 2);
        }
    }

    #[test]
    fn zero_angles_leave_operator_unchanged() {
        let h = crate::hamiltonians::tfim(4);
        let t = crate::hamiltonians::local_rotation_transform(4, Pauli::Y, &[c(0.0, 0.0); 4]).unwrap();
        assert_eq!(transform_hamiltonian(&h, &t).unwrap(), h);
    }

    #[test]
    fn complex_angle_on_commuting_generator_matches_dense() {
        let z = PauliSum::from_terms(1, [PauliTerm::parse(1.0, "Z").unwrap()]).unwrap();
        let b = 0.3;
        let tau = c(0.0, b);
        let f = TransformFactor { generator: z.clone(), angle: tau };
        let out = conjugate(&z, &f).unwrap();
        // A = exp(-iτZ), A† = exp(iτ̄Z); A†ZA = Z exp(i(τ̄-τ)Z) = Z exp(2bZ).
        assert!(close(out.coeff("Z"), c((2.0 * b).cosh(), 0.0), 1e-14));
        assert!(close(out.coeff("I"), c((2.0 * b).sinh(), 0.0), 1e-14));
        let dz = z.dense().unwrap();
        let a = dense_exp_involutory(&dz, tau * FACTOR_SIGN);
        let expected = dense_adjoint(&a) * &dz * &a;
        assert!(max_diff(&out.dense().unwrap(), &expected) < 1e-12);
    }

    #[test]
    fn non_involutory_generator_rejected() {
        let g = PauliSum::from_terms(1, [PauliTerm::parse(1.0, "X").unwrap(), PauliTerm::parse(1.0, "Z").unwrap()])
            .unwrap();
        let h = PauliSum::identity(1);
        let f = TransformFactor { generator: g.clone(), angle: c(0.1, 0.0) };
        assert!(matches!(conjugate(&h, &f), Err(Error::NotInvolutory)));
        assert!(matches!(TransformSpec::new(1, vec![f]), Err(Error::NotInvolutory)));
    }

    #[test]
    fn swap_generator_is_involutory_and_swaps() {
        let s = swap_generator(2, 0, 1);
        assert!(s.is_involutory());
        let d = s.dense().unwrap();
        // |01> (index 1) <-> |10> (index 2)
        assert!(close(d[(2, 1)], ONE, 1e-15));
        assert!(close(d[(0, 0)], ONE, 1e-15));
        assert!(close(d[(1, 1)], ZERO, 1e-15));
    }

    #[test]
    fn dense_of_simple_operators() {
        let z = PauliSum::from_terms(1, [PauliTerm::parse(1.0, "Z").unwrap()]).unwrap();
        let d = z.dense().unwrap();
        assert_eq!(d[(0, 0)], ONE);
        assert_eq!(d[(1, 1)], -ONE);
        let xz = PauliSum::parse_text("1 0 X\n1 0 Z\n").unwrap();
        let ev = eigenvalues_hermitian(&xz.dense().unwrap());
        assert!((ev[0] + 2f64.sqrt()).abs() < 1e-12);
        let big = PauliSum::identity(13);
        assert!(matches!(big.dense(), Err(Error::TooManyQubits { .. })));
    }

    #[test]
    fn text_format_round_trips() {
        let h = crate::hamiltonians::tfim(5);
        let text = h.to_text();
        assert!(text.contains("-1 0 XIIII"));
        assert_eq!(PauliSum::parse_text(&text).unwrap(), h);
        let unicode = PauliSum::parse_text("\u{2212}1.0 0.0 XIIII").unwrap();
        assert_eq!(unicode.coeff("XIIII"), c(-1.0, 0.0));
        assert!(PauliSum::parse_text("1 0 XQ").is_err());
        assert!(PauliSum::parse_text("1 0 XI\n1 0 X").is_err());
    }

    #[test]
    fn normalization_merges_and_prunes() {
        let s = PauliSum::from_terms(
            2,
            [
                PauliTerm::parse(1.0, "XZ").unwrap(),
                PauliTerm::parse(c(0.5, 1e-13), "XZ").unwrap(),
                PauliTerm::parse(1e-13, "ZZ").unwrap(),
            ],
        )
        .unwrap();
        assert_eq!(s.len(), 1);
        assert_eq!(s.coeff("XZ"), c(1.5, 0.0));
    }

    fn arb_pauli() -> impl Strategy<Value = Pauli> {
        prop_oneof![Just(Pauli::I), Just(Pauli::X), Just(Pauli::Y), Just(Pauli::Z)]
    }

    fn arb_term(n: usize) -> impl Strategy<Value = PauliTerm> {
        (proptest::collection::vec(arb_pauli(), n), -2.0..2.0f64, -2.0..2.0f64)
            .prop_map(|(ops, re, im)| PauliTerm::new(c(re, im), ops))
    }

    proptest! {
        #[test]
        fn product_is_associative(a in arb_term(4), b in arb_term(4), d in arb_term(4)) {
            let left = pauli_mul(&pauli_mul(&a, &b).unwrap(), &d).unwrap();
            let right = pauli_mul(&a, &pauli_mul(&b, &d).unwrap()).unwrap();
            prop_assert_eq!(&left.ops, &right.ops);
            prop_assert!(close(left.coeff, right.coeff, 1e-12));
        }

        #[test]
        fn strings_commute_or_anticommute(a in arb_term(3), b in arb_term(3)) {
            let ab = pauli_mul(&a, &b).unwrap();
            let ba = pauli_mul(&b, &a).unwrap();
            prop_assert_eq!(&ab.ops, &ba.ops);
            let anti = a.ops.iter().zip(&b.ops)
                .filter(|(p, q)| **p != Pauli::I && **q != Pauli::I && p != q)
                .count() % 2 == 1;
            let expected = if anti { -ba.coeff } else { ba.coeff };
            prop_assert!(close(ab.coeff, expected, 1e-12));
        }

        #[test]
        fn symbolic_transform_matches_dense_conjugation(
            terms in proptest::collection::vec(arb_term(3), 1..5),
            gens in proptest::collection::vec((arb_term(3), -1.5..1.5f64, -0.5..0.5f64), 1..4),
        ) {
            let h = PauliSum::from_terms(3, terms.into_iter().map(|mut t| { t.coeff = c(t.coeff.re, 0.0); t })).unwrap();
            let factors: Vec<_> = gens.into_iter().map(|(mut g, re, im)| {
                g.coeff = ONE;
                TransformFactor { generator: PauliSum::from_terms(3, [g]).unwrap(), angle: c(re, im) }
            }).collect();
            let t = TransformSpec::new(3, factors).unwrap();
            let out = transform_hamiltonian(&h, &t).unwrap();
            let mut expected = h.dense().unwrap();
            for f in t.factors() {
                let a = dense_exp_involutory(&f.generator.dense().unwrap(), f.angle * FACTOR_SIGN);
                expected = dense_adjoint(&a) * expected * &a;
            }
            prop_assert!(max_diff(&out.dense().unwrap(), &expected) < 1e-9);
            prop_assert!(out.is_hermitian());
        }
    }
}
