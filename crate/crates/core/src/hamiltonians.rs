//! Model Hamiltonians and transformation families used throughout the crate.

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::pauli::{swap_generator, Pauli, PauliSum, PauliTerm, TransformFactor, TransformSpec};

/// Open-boundary transverse-field Ising chain `Σ Z_i Z_{i+1} - Σ X_i`.
pub fn tfim(n: usize) -> PauliSum {
    let zz = (0..n.saturating_sub(1)).map(|i| PauliTerm::pair(n, (i, Pauli::Z), (i + 1, Pauli::Z), 1.0));
    let x = (0..n).map(|i| PauliTerm::single(n, i, Pauli::X, -1.0));
    PauliSum::from_terms(n, zz.chain(x)).expect("consistent n")
}

/// Open-boundary isotropic Heisenberg chain `Σ (XX + YY + ZZ)`.
pub fn heisenberg(n: usize) -> PauliSum {
    let terms = (0..n.saturating_sub(1)).flat_map(|i| {
        [Pauli::X, Pauli::Y, Pauli::Z].into_iter().map(move |p| PauliTerm::pair(n, (i, p), (i + 1, p), 1.0))
    });
    PauliSum::from_terms(n, terms).expect("consistent n")
}

/// The one-qubit model `X + Z`.
pub fn one_qubit_xz() -> PauliSum {
    PauliSum::from_terms(1, [PauliTerm::single(1, 0, Pauli::X, 1.0), PauliTerm::single(1, 0, Pauli::Z, 1.0)])
        .expect("n = 1")
}

/// `∏_i exp(±iτ_i P_i)` with one factor per qubit.
pub fn local_rotation_transform(n: usize, p: Pauli, angles: &[Complex64]) -> Result<TransformSpec> {
    if angles.len() != n {
        return Err(Error::ParamMismatch { expected: n, got: angles.len() });
    }
    let factors = angles
        .iter()
        .enumerate()
        .map(|(q, &angle)| TransformFactor {
            generator: PauliSum::from_terms(n, [PauliTerm::single(n, q, p, 1.0)]).expect("n"),
            angle,
        })
        .collect();
    TransformSpec::new(n, factors)
}

/// Disjoint nearest-neighbour pairs `(0,1), (2,3), …` of a half brick layer.
pub fn half_layer_pairs(n: usize) -> Vec<(usize, usize)> {
    (0..n / 2).map(|k| (2 * k, 2 * k + 1)).collect()
}

/// Parameterized SWAP on every pair of [`half_layer_pairs`].
pub fn swap_half_layer_transform(n: usize, angles: &[Complex64]) -> Result<TransformSpec> {
    let pairs = half_layer_pairs(n);
    if angles.len() != pairs.len() {
        return Err(Error::ParamMismatch { expected: pairs.len(), got: angles.len() });
    }
    let factors = pairs
        .into_iter()
        .zip(angles)
        .map(|((a, b), &angle)| TransformFactor { generator: swap_generator(n, a, b), angle })
        .collect();
    TransformSpec::new(n, factors)
}
