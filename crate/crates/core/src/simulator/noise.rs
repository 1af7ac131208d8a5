use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::gate::{pauli_matrix, Mat2};
use crate::error::{Error, Result};
use crate::pauli::Pauli;

const ZERO: Complex64 = Complex64::new(0.0, 0.0);

/// Single-qubit CPTP map in Kraus form, with its 4×4 superoperator cached.
///
/// The superoperator acts on the row-major vectorisation `ρ_{rc} → 2r + c`:
/// `S[2r+c][2a+b] = Σ_K K_{ra} conj(K_{cb})`.
#[derive(Debug, Clone, PartialEq)]
pub struct Channel {
    kraus: Vec<Mat2>,
    superop: [[Complex64; 4]; 4],
}

impl Channel {
    pub fn from_kraus(kraus: Vec<Mat2>) -> Self {
        let mut s = [[ZERO; 4]; 4];
        for k in &kraus {
            for r in 0..2 {
                for c in 0..2 {
                    for a in 0..2 {
                        for b in 0..2 {
                            s[2 * r + c][2 * a + b] += k[r][a] * k[c][b].conj();
                        }
                    }
                }
            }
        }
        Self { kraus, superop: s }
    }

    /// Pauli channel `(1 - px - py - pz)ρ + px XρX + py YρY + pz ZρZ`.
    pub fn pauli(px: f64, py: f64, pz: f64) -> Self {
        let weights = [1.0 - px - py - pz, px, py, pz];
        let kraus = [Pauli::I, Pauli::X, Pauli::Y, Pauli::Z]
            .into_iter()
            .zip(weights)
            .filter(|(_, w)| *w > 0.0)
            .map(|(p, w)| pauli_matrix(p).map(|row| row.map(|z| z * w.sqrt())))
            .collect();
        Self::from_kraus(kraus)
    }

    /// Isotropic depolarizing `(1-p)ρ + (p/3)(XρX + YρY + ZρZ)`.
    pub fn depolarizing(p: f64) -> Self {
        Self::pauli(p / 3.0, p / 3.0, p / 3.0)
    }

    /// Mixing with the maximally mixed state, `(1-p)ρ + p·I/2`.
    pub fn depolarizing_mix(p: f64) -> Self {
        Self::pauli(p / 4.0, p / 4.0, p / 4.0)
    }

    /// Pure dephasing `(1-p)ρ + p ZρZ`.
    pub fn dephasing(p: f64) -> Self {
        Self::pauli(0.0, 0.0, p)
    }

    /// `K0 = diag(1, √(1-γ))`, `K1 = √γ |0⟩⟨1|`.
    pub fn amplitude_damping(gamma: f64) -> Self {
        let one = Complex64::new(1.0, 0.0);
        let k0 = [[one, ZERO], [ZERO, Complex64::new((1.0 - gamma).sqrt(), 0.0)]];
        let k1 = [[ZERO, Complex64::new(gamma.sqrt(), 0.0)], [ZERO, ZERO]];
        Self::from_kraus(vec![k0, k1])
    }

    pub fn kraus(&self) -> &[Mat2] {
        &self.kraus
    }

    pub(crate) fn superop(&self) -> &[[Complex64; 4]; 4] {
        &self.superop
    }

    /// Max deviation of `Σ K†K` from the identity.
    pub fn completeness_error(&self) -> f64 {
        let mut acc = [[ZERO; 2]; 2];
        for k in &self.kraus {
            for r in 0..2 {
                for c in 0..2 {
                    for a in 0..2 {
                        acc[r][c] += k[a][r].conj() * k[a][c];
                    }
                }
            }
        }
        let mut err: f64 = 0.0;
        for r in 0..2 {
            for c in 0..2 {
                let id = if r == c { 1.0 } else { 0.0 };
                err = err.max((acc[r][c] - id).norm());
            }
        }
        err
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NoiseKind {
    None,
    Depolarizing,
    AmplitudeDamping,
    Dephasing,
}

/// Noise attached after each two-qubit gate, on each qubit the gate touches.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NoiseModel {
    pub kind: NoiseKind,
    pub strength: f64,
}

impl NoiseModel {
    pub fn none() -> Self {
        Self { kind: NoiseKind::None, strength: 0.0 }
    }

    pub fn new(kind: NoiseKind, strength: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&strength) || strength.is_nan() {
            return Err(Error::InvalidStrength(strength));
        }
        Ok(Self { kind, strength })
    }

    pub fn depolarizing(p: f64) -> Result<Self> {
        Self::new(NoiseKind::Depolarizing, p)
    }

    pub fn dephasing(p: f64) -> Result<Self> {
        Self::new(NoiseKind::Dephasing, p)
    }

    pub fn amplitude_damping(gamma: f64) -> Result<Self> {
        Self::new(NoiseKind::AmplitudeDamping, gamma)
    }

    pub fn is_noiseless(&self) -> bool {
        self.kind == NoiseKind::None || self.strength == 0.0
    }

    pub fn channel(&self) -> Option<Channel> {
        if self.is_noiseless() {
            return None;
        }
        Some(match self.kind {
            NoiseKind::None => return None,
            NoiseKind::Depolarizing => Channel::depolarizing(self.strength),
            NoiseKind::AmplitudeDamping => Channel::amplitude_damping(self.strength),
            NoiseKind::Dephasing => Channel::dephasing(self.strength),
        })
    }
}

impl Default for NoiseModel {
    fn default() -> Self {
        Self::none()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::simulator::DensityMatrix;
    use proptest::prelude::*;

    fn one_qubit(rho: [[f64; 2]; 2]) -> DensityMatrix {
        let m = nalgebra::DMatrix::from_fn(2, 2, |r, c| Complex64::new(rho[r][c], 0.0));
        DensityMatrix::from_matrix(&m).unwrap()
    }

    proptest! {
        #[test]
        fn channels_are_trace_preserving(p in 0.0f64..=1.0) {
            for ch in [Channel::depolarizing(p), Channel::depolarizing_mix(p), Channel::dephasing(p), Channel::amplitude_damping(p)] {
                prop_assert!(ch.completeness_error() < 1e-14);
            }
        }
    }

    #[test]
    fn maximally_mixed_state_is_fixed() {
        for ch in [Channel::depolarizing(0.3), Channel::depolarizing_mix(0.3), Channel::dephasing(0.3)] {
            let mut rho = DensityMatrix::maximally_mixed(2).unwrap();
            rho.apply_channel(0, &ch);
            rho.apply_channel(1, &ch);
            let diff = rho.to_matrix() - DensityMatrix::maximally_mixed(2).unwrap().to_matrix();
            assert!(diff.iter().all(|z| z.norm() < 1e-15));
        }
    }

    #[test]
    fn full_mixing_reaches_identity() {
        let mut rho = one_qubit([[0.2, 0.4], [0.4, 0.8]]);
        rho.apply_channel(0, &Channel::depolarizing_mix(1.0));
        let expect = DensityMatrix::maximally_mixed(1).unwrap();
        for (r, c) in [(0, 0), (0, 1), (1, 0), (1, 1)] {
            assert!((rho.get(r, c) - expect.get(r, c)).norm() < 1e-15);
        }
    }

    #[test]
    fn mixing_channels_compose_multiplicatively() {
        let (p1, p2) = (0.1, 0.25);
        let mut a = one_qubit([[0.7, 0.3], [0.3, 0.3]]);
        let mut b = a.clone();
        a.apply_channel(0, &Channel::depolarizing_mix(p1));
        a.apply_channel(0, &Channel::depolarizing_mix(p2));
        b.apply_channel(0, &Channel::depolarizing_mix(1.0 - (1.0 - p1) * (1.0 - p2)));
        for (r, c) in [(0, 0), (0, 1), (1, 1)] {
            assert!((a.get(r, c) - b.get(r, c)).norm() < 1e-15);
        }
    }

    #[test]
    fn pauli_depolarizing_shrinks_bloch_vector_by_four_thirds_p() {
        let p = 0.12;
        let mut rho = one_qubit([[1.0, 0.0], [0.0, 0.0]]);
        rho.apply_channel(0, &Channel::depolarizing(p));
        let z = rho.get(0, 0).re - rho.get(1, 1).re;
        assert!((z - (1.0 - 4.0 * p / 3.0)).abs() < 1e-15);
    }

    #[test]
    fn amplitude_damping_decays_excited_state() {
        let g = 0.3;
        let mut rho = one_qubit([[0.5, 0.5], [0.5, 0.5]]);
        rho.apply_channel(0, &Channel::amplitude_damping(g));
        assert!((rho.get(1, 1).re - 0.5 * (1.0 - g)).abs() < 1e-15);
        assert!((rho.get(0, 1).re - 0.5 * (1.0 - g).sqrt()).abs() < 1e-15);
    }

    #[test]
    fn noise_model_validation() {
        assert!(matches!(NoiseModel::depolarizing(1.5), Err(Error::InvalidStrength(_))));
        assert!(NoiseModel::dephasing(f64::NAN).is_err());
        assert!(NoiseModel::depolarizing(0.0).unwrap().channel().is_none());
        assert!(NoiseModel::none().is_noiseless());
        assert_eq!(NoiseModel::amplitude_damping(0.1).unwrap().channel(), Some(Channel::amplitude_damping(0.1)));
    }
}
