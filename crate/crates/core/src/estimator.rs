//! Energy estimation for a post-processed circuit state.
//!
//! Exact mode evaluates `Tr(f̂ρf̂† H') / Tr(f̂ρf̂† N')`, where `H'` is the
//! transformed Hamiltonian and `N'` the transformed identity (`1` for unitary
//! transformations). Sampled mode implements the bitstring protocol: diagonal
//! strings are read from the bare circuit, each off-diagonal string from the
//! circuit followed by a sign-qubit measurement block.

use std::collections::BTreeMap;
use std::f64::consts::FRAC_PI_4;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::pauli::{transform_hamiltonian, Pauli, PauliSum, PauliTerm, TransformSpec};
use crate::postprocess::PostProcessor;
use crate::simulator::{
    evolve_density, run_density, sample_counts, Circuit, DensityMatrix, Gate, NoiseModel, StateVector,
};

const ZERO: Complex64 = Complex64::new(0.0, 0.0);

/// Smallest admissible denominator in the energy ratio.
pub const MIN_DENOMINATOR: f64 = 1e-14;

// ---------------------------------------------------------------------------
// Exact mode
// ---------------------------------------------------------------------------

/// Simulator output used by the exact estimator.
#[derive(Debug, Clone, PartialEq)]
pub enum QuantumState {
    Pure(StateVector),
    Mixed(DensityMatrix),
}

impl From<StateVector> for QuantumState {
    fn from(s: StateVector) -> Self {
        QuantumState::Pure(s)
    }
}

impl From<DensityMatrix> for QuantumState {
    fn from(r: DensityMatrix) -> Self {
        QuantumState::Mixed(r)
    }
}

impl QuantumState {
    pub fn n(&self) -> usize {
        match self {
            QuantumState::Pure(s) => s.n(),
            QuantumState::Mixed(r) => r.n(),
        }
    }

    pub fn probabilities(&self) -> Vec<f64> {
        match self {
            QuantumState::Pure(s) => s.probabilities(),
            QuantumState::Mixed(r) => r.probabilities(),
        }
    }

    /// `ρ_{a,b}`.
    #[inline]
    fn element(&self, a: usize, b: usize) -> Complex64 {
        match self {
            QuantumState::Pure(s) => {
                let amp = s.amplitudes();
                amp[a] * amp[b].conj()
            }
            QuantumState::Mixed(r) => r.get(a, b),
        }
    }

    /// `Tr(f̂ ρ f̂† h)` for a Hermitian `h`.
    pub fn dressed_expectation(&self, f: &[Complex64], h: &PauliSum) -> f64 {
        let dim = 1usize << self.n();
        let mut acc = ZERO;
        for t in h.terms() {
            let m = t.masks();
            let mut s = ZERO;
            for y in 0..dim {
                let yp = y ^ m.x;
                s += m.amplitude(y) * f[y] * self.element(y, yp) * f[yp].conj();
            }
            acc += s * t.coeff;
        }
        acc.re
    }

    /// Packed gradient `∂/∂Re f(x) + i ∂/∂Im f(x)` of [`Self::dressed_expectation`].
    pub fn dressed_gradient(&self, f: &[Complex64], h: &PauliSum) -> Vec<Complex64> {
        let dim = 1usize << self.n();
        let mut g = vec![ZERO; dim];
        for t in h.terms() {
            let m = t.masks();
            for (x, gx) in g.iter_mut().enumerate() {
                let y = x ^ m.x;
                *gx += t.coeff * m.amplitude(y) * f[y] * self.element(y, x) * 2.0;
            }
        }
        g
    }
}

/// Exact energy `Tr(f̂ρf̂†H')/Tr(f̂ρf̂†N')`.
pub fn energy_exact(rho: &DensityMatrix, f: &PostProcessor, h: &PauliSum, t: &TransformSpec) -> Result<f64> {
    energy_exact_state(&QuantumState::Mixed(rho.clone()), f, h, t)
}

pub fn energy_exact_state(state: &QuantumState, f: &PostProcessor, h: &PauliSum, t: &TransformSpec) -> Result<f64> {
    let (hp, norm) = transformed_pair(h, t)?;
    dressed_ratio(state, &f.table(), &hp, norm.as_ref())
}

/// `(H', N')` with `N' = None` for unitary transformations.
pub fn transformed_pair(h: &PauliSum, t: &TransformSpec) -> Result<(PauliSum, Option<PauliSum>)> {
    let hp = transform_hamiltonian(h, t)?;
    let norm = if t.is_unitary() { None } else { Some(transform_hamiltonian(&PauliSum::identity(h.n()), t)?) };
    Ok((hp, norm))
}

/// Energy ratio for precomputed `f` values and transformed operators.
pub fn dressed_ratio(state: &QuantumState, f: &[Complex64], hp: &PauliSum, norm: Option<&PauliSum>) -> Result<f64> {
    if hp.n() != state.n() {
        return Err(Error::QubitMismatch { expected: state.n(), got: hp.n() });
    }
    let num = state.dressed_expectation(f, hp);
    let den = dressed_norm(state, f, norm);
    if den.abs() < MIN_DENOMINATOR || !den.is_finite() {
        return Err(Error::ZeroDenominator(den));
    }
    Ok(num / den)
}

/// `Tr(f̂ρf̂† N')`, or `Tr(f̂ρf̂†)` when `norm` is `None`.
pub fn dressed_norm(state: &QuantumState, f: &[Complex64], norm: Option<&PauliSum>) -> f64 {
    match norm {
        Some(n) => state.dressed_expectation(f, n),
        None => state.probabilities().iter().zip(f).map(|(p, v)| p * v.norm_sqr()).sum(),
    }
}

/// Overall depolarizing strength `1 - E_noise / E_noiseless`.
pub fn p_eff(e_noise: f64, e_noiseless: f64) -> Result<f64> {
    if e_noiseless == 0.0 {
        return Err(Error::DivisionByZero("noiseless energy"));
    }
    Ok(1.0 - e_noise / e_noiseless)
}

// ---------------------------------------------------------------------------
// Measurement plan
// ---------------------------------------------------------------------------

/// Readout basis of the sign qubit.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum SignBasis {
    /// `H` before readout.
    X,
    /// `exp(-iπ/4 X)` before readout.
    Y,
}

impl SignBasis {
    fn other(self) -> Self {
        match self {
            SignBasis::X => SignBasis::Y,
            SignBasis::Y => SignBasis::X,
        }
    }
}

/// How one Pauli string is measured.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum MeasurementPlan {
    /// No X/Y: read from the bare circuit.
    Diagonal { z_mask: usize },
    OffDiagonal {
        sign_qubit: usize,
        /// Basis-index mask of every X/Y qubit (the bits flipped in `s̃`).
        flip_mask: usize,
        /// Basis-index mask of the Z qubits.
        z_mask: usize,
        basis: SignBasis,
    },
}

fn index_bit(n: usize, q: usize) -> usize {
    1 << (n - 1 - q)
}

pub fn measurement_plan(term: &PauliTerm) -> MeasurementPlan {
    let n = term.n();
    let z_mask = term.ops.iter().enumerate().filter(|(_, p)| **p == Pauli::Z).fold(0, |m, (q, _)| m | index_bit(n, q));
    match term.ops.iter().position(|p| p.flips()) {
        None => MeasurementPlan::Diagonal { z_mask },
        Some(sign_qubit) => MeasurementPlan::OffDiagonal {
            sign_qubit,
            flip_mask: term.x_mask(),
            z_mask,
            basis: if term.ops[sign_qubit] == Pauli::X { SignBasis::X } else { SignBasis::Y },
        },
    }
}

/// Measurement block `V` for an off-diagonal string in its natural basis.
pub fn build_measurement_block(term: &PauliTerm) -> Result<Circuit> {
    match measurement_plan(term) {
        MeasurementPlan::Diagonal { .. } => Err(Error::DiagonalTerm(term.label())),
        MeasurementPlan::OffDiagonal { basis, .. } => measurement_block_in_basis(term, basis),
    }
}

fn measurement_block_in_basis(term: &PauliTerm, basis: SignBasis) -> Result<Circuit> {
    let MeasurementPlan::OffDiagonal { sign_qubit, .. } = measurement_plan(term) else {
        return Err(Error::DiagonalTerm(term.label()));
    };
    let mut v = Circuit::new(term.n());
    for (q, &p) in term.ops.iter().enumerate() {
        if q != sign_qubit && p.flips() {
            v.push(Gate::controlled(sign_qubit, q, p));
        }
    }
    v.push(match basis {
        SignBasis::X => Gate::hadamard(sign_qubit),
        SignBasis::Y => Gate::rotation(sign_qubit, Pauli::X, -FRAC_PI_4),
    });
    Ok(v)
}

/// `s̃`: `s` with the bits of every X/Y qubit of `term` flipped.
pub fn flipped_partner(s: usize, term: &PauliTerm) -> usize {
    s ^ term.x_mask()
}

// ---------------------------------------------------------------------------
// Samples
// ---------------------------------------------------------------------------

/// Histogram of measured basis indices.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Counts {
    pub shots: u64,
    pub hist: Vec<u64>,
}

impl Counts {
    pub fn from_samples(n: usize, samples: &[usize]) -> Self {
        let mut hist = vec![0; 1 << n];
        samples.iter().for_each(|&s| hist[s] += 1);
        Self { shots: samples.len() as u64, hist }
    }

    fn weights(&self) -> impl Iterator<Item = (usize, f64)> + '_ {
        let shots = self.shots as f64;
        self.hist.iter().enumerate().filter(|(_, &c)| c > 0).map(move |(s, &c)| (s, c as f64 / shots))
    }
}

/// Samples for one off-diagonal string: natural basis, plus the other sign
/// basis when a complex post-processor is to be estimated.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TermCounts {
    pub primary: Counts,
    pub quadrature: Option<Counts>,
}

/// Frozen measurement record: the bare circuit plus one group per off-diagonal string.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampleSet {
    pub n: usize,
    pub seed: u64,
    pub base: Counts,
    pub groups: BTreeMap<Vec<Pauli>, TermCounts>,
}

/// Exact outcome distributions of every measurement group, so that many
/// independent [`SampleSet`]s can be drawn without re-simulating.
#[derive(Debug, Clone)]
pub struct MeasurementDistributions {
    pub n: usize,
    pub base: Vec<f64>,
    pub groups: BTreeMap<Vec<Pauli>, (Vec<f64>, Option<Vec<f64>>)>,
}

impl MeasurementDistributions {
    /// Distributions for `U` (with `noise`) followed by each string's block `V`.
    ///
    /// The block itself is applied noise-free.
    pub fn new(
        circuit: &Circuit,
        noise: &NoiseModel,
        strings: impl IntoIterator<Item = Vec<Pauli>>,
        quadrature: bool,
    ) -> Result<Self> {
        let rho = run_density(circuit, noise)?;
        Self::from_density(&rho, strings, quadrature)
    }

    pub fn from_density(
        rho: &DensityMatrix,
        strings: impl IntoIterator<Item = Vec<Pauli>>,
        quadrature: bool,
    ) -> Result<Self> {
        let n = rho.n();
        let mut groups = BTreeMap::new();
        for ops in strings {
            if ops.len() != n {
                return Err(Error::QubitMismatch { expected: n, got: ops.len() });
            }
            let term = PauliTerm::new(1.0, ops.clone());
            let MeasurementPlan::OffDiagonal { basis, .. } = measurement_plan(&term) else {
                continue;
            };
            let probe = |b: SignBasis| -> Result<Vec<f64>> {
                let mut r = rho.clone();
                evolve_density(&mut r, &measurement_block_in_basis(&term, b)?, &NoiseModel::none());
                Ok(r.probabilities())
            };
            let primary = probe(basis)?;
            let quad = if quadrature { Some(probe(basis.other())?) } else { None };
            groups.insert(ops, (primary, quad));
        }
        Ok(Self { n, base: rho.probabilities(), groups })
    }

    /// Draw `shots` per group; group seeds are derived from `seed` and the group position.
    pub fn draw(&self, shots: u64, seed: u64) -> SampleSet {
        let sub = |k: u64| seed.wrapping_mul(0x9E37_79B9_7F4A_7C15).wrapping_add(k.wrapping_mul(0xBF58_476D_1CE4_E5B9));
        let counts = |p: &[f64], k: u64| Counts { shots, hist: sample_counts(p, shots, sub(k)) };
        let base = counts(&self.base, 0);
        let mut groups = BTreeMap::new();
        for (i, (ops, (primary, quad))) in self.groups.iter().enumerate() {
            let k = 2 * i as u64 + 1;
            groups.insert(
                ops.clone(),
                TermCounts { primary: counts(primary, k), quadrature: quad.as_ref().map(|q| counts(q, k + 1)) },
            );
        }
        SampleSet { n: self.n, seed, base, groups }
    }
}

/// Simulate and sample every group needed for `h` (equal shots per group).
pub fn collect_samples(
    circuit: &Circuit,
    noise: &NoiseModel,
    h: &PauliSum,
    shots: u64,
    seed: u64,
    quadrature: bool,
) -> Result<SampleSet> {
    let strings = h.terms().iter().map(|t| t.ops.clone());
    Ok(MeasurementDistributions::new(circuit, noise, strings, quadrature)?.draw(shots, seed))
}

// ---------------------------------------------------------------------------
// Sampled estimator
// ---------------------------------------------------------------------------

/// Per-shot-normalised numerator of each string plus the shared denominator.
#[derive(Debug, Clone)]
pub struct SampledEstimate {
    pub denominator: f64,
    numerators: BTreeMap<Vec<Pauli>, f64>,
}

impl SampledEstimate {
    /// `⟨P⟩_f` for a unit-weight string already estimated.
    pub fn string_value(&self, ops: &[Pauli]) -> Option<f64> {
        if ops.iter().all(|&p| p == Pauli::I) {
            return Some(1.0);
        }
        self.numerators.get(ops).map(|n| n / self.denominator)
    }

    /// `Σ_k c_k ⟨P_k⟩_f` (real part of the coefficients).
    pub fn expectation(&self, h: &PauliSum) -> Result<f64> {
        h.terms().iter().try_fold(0.0, |acc, t| {
            let v = self.string_value(&t.ops).ok_or_else(|| Error::MissingSamples(t.label()))?;
            Ok(acc + t.coeff.re * v)
        })
    }
}

fn sign_factor(s: usize, mask: usize) -> f64 {
    if (s & mask).count_ones() % 2 == 1 {
        -1.0
    } else {
        1.0
    }
}

/// Estimate every string of `strings` from `samples` with post-processor values `f`.
pub fn sampled_estimate<'a>(
    strings: impl IntoIterator<Item = &'a [Pauli]>,
    samples: &SampleSet,
    f: &[Complex64],
    real_f: bool,
) -> Result<SampledEstimate> {
    let n = samples.n;
    let denominator: f64 = samples.base.weights().map(|(s, w)| w * f[s].norm_sqr()).sum();
    if denominator.abs() < MIN_DENOMINATOR || !denominator.is_finite() {
        return Err(Error::ZeroDenominator(denominator));
    }
    let mut numerators = BTreeMap::new();
    for ops in strings {
        if ops.len() != n {
            return Err(Error::QubitMismatch { expected: n, got: ops.len() });
        }
        if ops.iter().all(|&p| p == Pauli::I) || numerators.contains_key(ops) {
            continue;
        }
        let term = PauliTerm::new(1.0, ops.to_vec());
        let value = match measurement_plan(&term) {
            MeasurementPlan::Diagonal { z_mask } => {
                samples.base.weights().map(|(s, w)| w * f[s].norm_sqr() * sign_factor(s, z_mask)).sum()
            }
            plan @ MeasurementPlan::OffDiagonal { .. } => {
                let group = samples.groups.get(ops).ok_or_else(|| Error::MissingSamples(term.label()))?;
                off_diagonal_numerator(n, &plan, group, f, real_f, &term)?
            }
        };
        numerators.insert(ops.to_vec(), value);
    }
    Ok(SampledEstimate { denominator, numerators })
}

/// `(bra index a, ket index b, weight sign)` for an outcome `s` of an off-diagonal group.
#[inline]
fn pair_indices(n: usize, s: usize, sign_qubit: usize, flip_mask: usize, z_mask: usize) -> (usize, usize, f64) {
    let sb = index_bit(n, sign_qubit);
    let readout = if s & sb != 0 { -1.0 } else { 1.0 };
    let a = s & !sb;
    let b = (s ^ flip_mask) | sb;
    (a, b, readout * sign_factor(s, z_mask))
}

fn off_diagonal_numerator(
    n: usize,
    plan: &MeasurementPlan,
    group: &TermCounts,
    f: &[Complex64],
    real_f: bool,
    term: &PauliTerm,
) -> Result<f64> {
    let &MeasurementPlan::OffDiagonal { sign_qubit, flip_mask, z_mask, basis } = plan else {
        unreachable!("caller passes off-diagonal plans");
    };
    let f_product = |s: usize| {
        let (a, b, w) = pair_indices(n, s, sign_qubit, flip_mask, z_mask);
        (f[a].conj() * f[b], w)
    };
    let mut value: f64 = group
        .primary
        .weights()
        .map(|(s, p)| {
            let (prod, w) = f_product(s);
            p * w * prod.re
        })
        .sum();
    if !real_f {
        let quad =
            group.quadrature.as_ref().ok_or_else(|| Error::MissingSamples(format!("{} (quadrature)", term.label())))?;
        let q: f64 = quad
            .weights()
            .map(|(s, p)| {
                let (prod, w) = f_product(s);
                p * w * prod.im
            })
            .sum();
        // Re(F z) for an X sign qubit, Re(-i F z) for a Y sign qubit.
        value += match basis {
            SignBasis::X => -q,
            SignBasis::Y => q,
        };
    }
    Ok(value)
}

/// Sampled energy of `h` under post-processor `f`.
pub fn energy_sampled(h: &PauliSum, samples: &SampleSet, f: &PostProcessor) -> Result<f64> {
    if f.n() != samples.n {
        return Err(Error::QubitMismatch { expected: samples.n, got: f.n() });
    }
    let table = f.table();
    let est = sampled_estimate(h.terms().iter().map(|t| t.ops.as_slice()), samples, &table, f.is_real())?;
    est.expectation(h)
}

/// Sampled energy of the transformed Hamiltonian (unitary transformations only).
pub fn energy_sampled_transformed(
    h: &PauliSum,
    t: &TransformSpec,
    samples: &SampleSet,
    f: &PostProcessor,
) -> Result<f64> {
    if !t.is_unitary() {
        return Err(Error::NonUnitarySampling);
    }
    energy_sampled(&transform_hamiltonian(h, t)?, samples, f)
}

/// Packed gradient of the sampled energy of `h` with respect to the values of `f`.
pub fn sampled_gradient(
    h: &PauliSum,
    samples: &SampleSet,
    f: &[Complex64],
    real_f: bool,
) -> Result<(f64, Vec<Complex64>)> {
    let n = samples.n;
    let dim = 1usize << n;
    let est = sampled_estimate(h.terms().iter().map(|t| t.ops.as_slice()), samples, f, real_f)?;
    let energy = est.expectation(h)?;
    let identity = h.identity_coeff().re;
    let den = est.denominator;
    // E = c_I + Σ c_k N_k / D  ⇒  dE = (Σ c_k dN_k - (E - c_I) dD) / D.
    let mut g = vec![ZERO; dim];
    for (s, w) in samples.base.weights() {
        g[s] -= f[s] * (2.0 * w * (energy - identity));
    }
    for t in h.terms() {
        if t.is_identity() {
            continue;
        }
        let c = t.coeff.re;
        match measurement_plan(t) {
            MeasurementPlan::Diagonal { z_mask } => {
                for (s, w) in samples.base.weights() {
                    g[s] += f[s] * (2.0 * c * w * sign_factor(s, z_mask));
                }
            }
            MeasurementPlan::OffDiagonal { sign_qubit, flip_mask, z_mask, basis } => {
                let group = samples.groups.get(&t.ops).ok_or_else(|| Error::MissingSamples(t.label()))?;
                for (s, p) in group.primary.weights() {
                    let (a, b, w) = pair_indices(n, s, sign_qubit, flip_mask, z_mask);
                    let k = c * p * w;
                    g[a] += f[b] * k;
                    g[b] += f[a] * k;
                }
                if !real_f {
                    let quad = group
                        .quadrature
                        .as_ref()
                        .ok_or_else(|| Error::MissingSamples(format!("{} (quadrature)", t.label())))?;
                    let sign = match basis {
                        SignBasis::X => -1.0,
                        SignBasis::Y => 1.0,
                    };
                    let i = Complex64::new(0.0, 1.0);
                    for (s, p) in quad.weights() {
                        let (a, b, w) = pair_indices(n, s, sign_qubit, flip_mask, z_mask);
                        let k = sign * c * p * w;
                        g[a] += -i * f[b] * k;
                        g[b] += i * f[a] * k;
                    }
                }
            }
        }
    }
    g.iter_mut().for_each(|v| *v /= den);
    Ok((energy, g))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hamiltonians::{one_qubit_xz, tfim};
    use crate::pauli::parse_ops;
    use crate::postprocess::{BoundedMlp, ComplexTable};
    use crate::simulator::{build_circuit, run_state, AnsatzSpec, Layer};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn term(label: &str) -> PauliTerm {
        PauliTerm::parse(1.0, label).unwrap()
    }

    #[test]
    fn block_for_xx_is_cnot_then_hadamard() {
        let v = build_measurement_block(&term("XX")).unwrap();
        assert_eq!(v.ops.len(), 2);
        assert_eq!(v.ops[0].gate, Gate::controlled(0, 1, Pauli::X));
        assert_eq!(v.ops[1].gate, Gate::hadamard(0));
    }

    #[test]
    fn block_for_single_y_is_basis_rotation_only() {
        let v = build_measurement_block(&term("Y")).unwrap();
        assert_eq!(v.ops.len(), 1);
        assert_eq!(v.ops[0].gate, Gate::rotation(0, Pauli::X, -FRAC_PI_4));
    }

    #[test]
    fn block_for_zix_uses_qubit_two() {
        let t = term("ZIX");
        let v = build_measurement_block(&t).unwrap();
        assert_eq!(v.ops.len(), 1);
        assert_eq!(v.ops[0].gate, Gate::hadamard(2));
        match measurement_plan(&t) {
            MeasurementPlan::OffDiagonal { sign_qubit, flip_mask, z_mask, basis } => {
                assert_eq!((sign_qubit, flip_mask, z_mask, basis), (2, 0b001, 0b100, SignBasis::X));
            }
            _ => panic!("expected off-diagonal plan"),
        }
    }

    #[test]
    fn diagonal_terms_have_no_block() {
        assert!(matches!(build_measurement_block(&term("ZIZ")), Err(Error::DiagonalTerm(_))));
    }

    #[test]
    fn flipped_partner_examples() {
        let t = term("IXXII");
        let s = crate::simulator::parse_bitstring("00000").unwrap();
        assert_eq!(crate::simulator::bitstring(flipped_partner(s, &t), 5), "01100");
        let z = term("ZZZZZ");
        assert_eq!(flipped_partner(0b10110, &z), 0b10110);
        for s in 0..32 {
            assert_eq!(flipped_partner(flipped_partner(s, &t), &t), s);
        }
    }

    #[test]
    fn p_eff_examples() {
        assert_eq!(p_eff(-1.414, -1.414).unwrap(), 0.0);
        assert_eq!(p_eff(0.0, -1.0).unwrap(), 1.0);
        assert!(p_eff(1.0, 0.0).is_err());
    }

    #[test]
    fn identity_post_processor_reduces_to_plain_expectation() {
        let spec = AnsatzSpec::parse(3, "[H, ZZ, Rx, Ry]").unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let params: Vec<f64> = (0..spec.param_count()).map(|_| rand::Rng::gen_range(&mut rng, -1.0..1.0)).collect();
        let c = build_circuit(&spec, &params).unwrap();
        let rho = run_density(&c, &NoiseModel::depolarizing(0.05).unwrap()).unwrap();
        let h = tfim(3);
        let f = PostProcessor::identity(3);
        let e = energy_exact(&rho, &f, &h, &TransformSpec::identity(3)).unwrap();
        assert!((e - rho.expectation(&h)).abs() < 1e-10);
    }

    #[test]
    fn perfect_sampling_of_zero_state() {
        let c = Circuit::new(1);
        let h = PauliSum::from_terms(1, [term("Z")]).unwrap();
        let samples = collect_samples(&c, &NoiseModel::none(), &h, 1000, 1, false).unwrap();
        let e = energy_sampled(&h, &samples, &PostProcessor::identity(1)).unwrap();
        assert_eq!(e, 1.0);
    }

    #[test]
    fn one_qubit_sampled_energy_at_optimal_angle() {
        let spec = AnsatzSpec::new(1, vec![Layer::Ry]);
        let c = build_circuit(&spec, &[1.178]).unwrap();
        let h = one_qubit_xz();
        let samples = collect_samples(&c, &NoiseModel::none(), &h, 1_000_000, 42, false).unwrap();
        let e = energy_sampled(&h, &samples, &PostProcessor::identity(1)).unwrap();
        assert!((e + 1.414).abs() < 0.005, "{e}");
    }

    #[test]
    fn scaling_f_leaves_energies_unchanged() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let spec = AnsatzSpec::parse(3, "[H, ZZ, Rx]").unwrap();
        let params: Vec<f64> = (0..spec.param_count()).map(|_| rand::Rng::gen_range(&mut rng, -1.0..1.0)).collect();
        let c = build_circuit(&spec, &params).unwrap();
        let noise = NoiseModel::depolarizing(0.03).unwrap();
        let rho = run_density(&c, &noise).unwrap();
        let h = tfim(3);
        let f = PostProcessor::BoundedMlp(BoundedMlp::random(3, 0.5, &mut rng));
        let scaled_values: Vec<Complex64> = f.table().iter().map(|v| v * 2.7).collect();
        let scaled = PostProcessor::ComplexTable(ComplexTable::from_values(3, &scaled_values).unwrap());
        let t = TransformSpec::identity(3);
        let e1 = energy_exact(&rho, &f, &h, &t).unwrap();
        let e2 = energy_exact(&rho, &scaled, &h, &t).unwrap();
        assert!((e1 - e2).abs() < 1e-10);
        let samples = collect_samples(&c, &noise, &h, 5000, 3, false).unwrap();
        let s1 = energy_sampled(&h, &samples, &f).unwrap();
        let s2 = energy_sampled(&h, &samples, &scaled).unwrap();
        assert!((s1 - s2).abs() < 1e-10);
    }

    #[test]
    fn zero_denominator_is_reported() {
        let rho = DensityMatrix::zero_state(1).unwrap();
        let f = PostProcessor::ComplexTable(
            ComplexTable::from_values(1, &[Complex64::new(0.0, 0.0), Complex64::new(1.0, 0.0)]).unwrap(),
        );
        let err = energy_exact(&rho, &f, &one_qubit_xz(), &TransformSpec::identity(1));
        assert!(matches!(err, Err(Error::ZeroDenominator(_))));
    }

    #[test]
    fn missing_group_is_reported() {
        let c = Circuit::new(2);
        let h = PauliSum::from_terms(2, [term("ZZ")]).unwrap();
        let samples = collect_samples(&c, &NoiseModel::none(), &h, 10, 1, false).unwrap();
        let h2 = PauliSum::from_terms(2, [term("XX")]).unwrap();
        assert!(matches!(energy_sampled(&h2, &samples, &PostProcessor::identity(2)), Err(Error::MissingSamples(_))));
    }

    /// With exact outcome distributions in place of counts, the sampled
    /// formula must reproduce the exact energy to rounding, for every string
    /// class and for complex post-processors.
    #[test]
    fn infinite_shot_limit_matches_exact() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        let n = 3;
        let spec = AnsatzSpec::parse(n, "[H, ZZ, Rx, YY, Ry, Rz]").unwrap();
        let params: Vec<f64> = (0..spec.param_count()).map(|_| rand::Rng::gen_range(&mut rng, -1.5..1.5)).collect();
        let c = build_circuit(&spec, &params).unwrap();
        let noise = NoiseModel::depolarizing(0.04).unwrap();
        let rho = run_density(&c, &noise).unwrap();
        let labels = ["ZIZ", "XII", "IYI", "ZXI", "YZI", "XYZ", "YXY", "IIX", "ZZZ"];
        for complex in [false, true] {
            let f = if complex {
                PostProcessor::ComplexTable(ComplexTable::random(n, 0.4, &mut rng))
            } else {
                PostProcessor::BoundedMlp(BoundedMlp::random(n, 0.6, &mut rng))
            };
            let strings: Vec<_> = labels.iter().map(|l| parse_ops(l).unwrap()).collect();
            let dist = MeasurementDistributions::from_density(&rho, strings.clone(), true).unwrap();
            let scale = 1u64 << 40;
            let to_counts = |p: &[f64]| Counts {
                shots: scale,
                hist: p.iter().map(|x| (x.max(0.0) * scale as f64).round() as u64).collect(),
            };
            let samples = SampleSet {
                n,
                seed: 0,
                base: to_counts(&dist.base),
                groups: dist
                    .groups
                    .iter()
                    .map(|(k, (p, q))| {
                        (k.clone(), TermCounts { primary: to_counts(p), quadrature: q.as_deref().map(to_counts) })
                    })
                    .collect(),
            };
            for label in labels {
                let h = PauliSum::from_terms(n, [term(label)]).unwrap();
                let exact = energy_exact(&rho, &f, &h, &TransformSpec::identity(n)).unwrap();
                let sampled = energy_sampled(&h, &samples, &f).unwrap();
                assert!((exact - sampled).abs() < 1e-9, "{label} complex={complex}: {exact} vs {sampled}");
            }
        }
    }

    #[test]
    fn statevector_and_density_paths_agree() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let spec = AnsatzSpec::parse(4, "[H, ZZ, Rx, XX, Ry]").unwrap();
        let params: Vec<f64> = (0..spec.param_count()).map(|_| rand::Rng::gen_range(&mut rng, -1.0..1.0)).collect();
        let c = build_circuit(&spec, &params).unwrap();
        let psi = QuantumState::Pure(run_state(&c).unwrap());
        let rho = QuantumState::Mixed(run_density(&c, &NoiseModel::none()).unwrap());
        let f = PostProcessor::ComplexTable(ComplexTable::random(4, 0.3, &mut rng)).table();
        let h = tfim(4);
        assert!((psi.dressed_expectation(&f, &h) - rho.dressed_expectation(&f, &h)).abs() < 1e-12);
        let g1 = psi.dressed_gradient(&f, &h);
        let g2 = rho.dressed_gradient(&f, &h);
        assert!(g1.iter().zip(&g2).all(|(a, b)| (a - b).norm() < 1e-12));
    }
}
