//! Independent reference values: dense diagonalisation and the one-qubit
//! `H = X + Z` closed forms under depolarizing and amplitude-damping noise.
//!
//! The one-qubit model uses the circuit state `(cos θ, -sin θ)` and the
//! post-processor `diag(1 - r, 1 + r)`.

use std::f64::consts::{FRAC_1_SQRT_2, SQRT_2};

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::pauli::{PauliSum, DENSE_MAX_QUBITS};

/// Eigenvalues of a Hermitian matrix, ascending.
pub fn eigenvalues_hermitian(m: &DMatrix<Complex64>) -> Vec<f64> {
    let mut ev: Vec<f64> = SymmetricEigen::new(m.clone()).eigenvalues.iter().copied().collect();
    ev.sort_by(f64::total_cmp);
    ev
}

/// Smallest eigenvalue of `dense(h)`.
pub fn exact_ground_energy(h: &PauliSum) -> Result<f64> {
    if h.n() > DENSE_MAX_QUBITS {
        return Err(Error::TooManyQubits { n: h.n(), max: DENSE_MAX_QUBITS });
    }
    Ok(eigenvalues_hermitian(&h.dense()?)[0])
}

/// Ground energy by shifted power iteration; an eigensolver-free cross-check.
pub fn ground_energy_power_iteration(h: &PauliSum, iterations: usize) -> Result<f64> {
    let m = h.dense()?;
    let shift: f64 = h.terms().iter().map(|t| t.coeff.norm()).sum();
    let shifted = DMatrix::<Complex64>::identity(m.nrows(), m.ncols()) * Complex64::from(shift) - &m;
    let dim = m.nrows();
    let mut v = DVector::from_fn(dim, |i, _| Complex64::new(1.0 + (i as f64 * 0.37).sin(), 0.0));
    v /= Complex64::from(v.norm());
    for _ in 0..iterations {
        v = &shifted * v;
        v /= Complex64::from(v.norm());
    }
    Ok((v.adjoint() * &m * &v)[(0, 0)].re)
}

/// `θ₀ = -arctan(1/(1 - √2))`, the noiseless one-qubit optimum.
pub fn one_qubit_theta0() -> f64 {
    -(1.0 / (1.0 - SQRT_2)).atan()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OneQubitChannel {
    Depolarizing,
    AmplitudeDamping,
}

/// `⟨X⟩`, `⟨Z⟩` of a post-processed one-qubit state.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Observables {
    pub x: f64,
    pub z: f64,
}

impl Observables {
    /// Signed deviation from the exact ground-state values `-1/√2`.
    pub fn deviation(&self) -> (f64, f64) {
        (self.x + FRAC_1_SQRT_2, self.z + FRAC_1_SQRT_2)
    }
}

/// Closed-form one-qubit results for one channel strength.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OneQubitRecord {
    pub channel: OneQubitChannel,
    pub strength: f64,
    pub e_baseline: f64,
    pub e_neural: f64,
    pub e_joint: f64,
    /// Post-processor parameter reproducing `e_neural`.
    pub r_neural: f64,
    /// `None` when the joint optimum is only reached as a limit.
    pub r_joint: Option<f64>,
    pub theta_joint: Option<f64>,
    pub obs_baseline: Observables,
    pub obs_neural: Observables,
    pub obs_joint: Observables,
    /// Leading-order deviations `(X, Z)` quoted for small strength, per scenario.
    pub leading_deviation: [(f64, f64); 3],
}

/// Closed-form one-qubit record.
pub fn one_qubit_closed_forms(channel: OneQubitChannel, strength: f64) -> OneQubitRecord {
    match channel {
        OneQubitChannel::Depolarizing => depolarizing_record(strength),
        OneQubitChannel::AmplitudeDamping => amplitude_damping_record(strength),
    }
}

fn depolarizing_record(p: f64) -> OneQubitRecord {
    let s = (2.0 - 2.0 * p + p * p).sqrt();
    let a = s - p + 1.0;
    let r_joint = 1.0 / a;
    let joint_z = -2.0 / (a * (1.0 / (a * a) + 1.0));
    OneQubitRecord {
        channel: OneQubitChannel::Depolarizing,
        strength: p,
        e_baseline: -SQRT_2 + SQRT_2 * p,
        e_neural: -SQRT_2 * (p + 1.0) / (2.0 * p + 1.0),
        e_joint: -s,
        r_neural: SQRT_2 * p,
        r_joint: Some(r_joint),
        theta_joint: Some(std::f64::consts::FRAC_PI_4),
        obs_baseline: Observables { x: (p - 1.0) / SQRT_2, z: (p - 1.0) / SQRT_2 },
        obs_neural: Observables {
            x: -(p - 1.0) * (2.0 * p * p - 1.0) / (SQRT_2 * (2.0 * p + 1.0)),
            z: (p * (2.0 * (p - 1.0) * p - 3.0) - 1.0) / (SQRT_2 * (2.0 * p + 1.0)),
        },
        obs_joint: Observables { x: (p - 1.0) * (1.0 - r_joint * r_joint) / (1.0 + r_joint * r_joint), z: joint_z },
        leading_deviation: [
            (p / SQRT_2, p / SQRT_2),
            (3.0 * p / SQRT_2 - 2.0 * SQRT_2 * p * p, -p / SQRT_2),
            (3.0 * p / (2.0 * SQRT_2), -p / (2.0 * SQRT_2)),
        ],
    }
}

fn amplitude_damping_record(g: f64) -> OneQubitRecord {
    let e_baseline = ((2.0 + SQRT_2) * g - SQRT_2 * ((1.0 - g).sqrt() + 1.0)) / 2.0;
    let gain = -(2.0 + SQRT_2) * g / 2.0 + (1.0 - g).sqrt() / SQRT_2
        - (1.0 / (2.0 * SQRT_2 * g + 3.0 * g + 1.0) + 1.0).sqrt()
        + FRAC_1_SQRT_2;
    let rho = amplitude_damped_state(one_qubit_theta0(), g);
    let (r_neural, _) = optimal_neural_r(&rho);
    let k = (4.0 + 3.0 * SQRT_2) * g;
    OneQubitRecord {
        channel: OneQubitChannel::AmplitudeDamping,
        strength: g,
        e_baseline,
        e_neural: e_baseline + gain,
        e_joint: -SQRT_2,
        r_neural,
        r_joint: None,
        theta_joint: None,
        obs_baseline: Observables { x: -(1.0 - g).sqrt() / SQRT_2, z: -FRAC_1_SQRT_2 + (1.0 + FRAC_1_SQRT_2) * g },
        obs_neural: observables(&rho, r_neural),
        obs_joint: Observables { x: -FRAC_1_SQRT_2, z: -FRAC_1_SQRT_2 },
        leading_deviation: [(g / (2.0 * SQRT_2), (1.0 + FRAC_1_SQRT_2) * g), (3.0 * k / 8.0, -k / 8.0), (0.0, 0.0)],
    }
}

/// Real symmetric 2×2 one-qubit density matrix `[[ρ00, ρ01], [ρ01, ρ11]]`.
pub type Rho2 = [[f64; 2]; 2];

pub fn depolarized_state(theta: f64, p: f64) -> Rho2 {
    let (c, s) = (theta.cos(), theta.sin());
    [[p / 2.0 + (1.0 - p) * c * c, (p - 1.0) * c * s], [(p - 1.0) * c * s, p / 2.0 + (1.0 - p) * s * s]]
}

pub fn amplitude_damped_state(theta: f64, g: f64) -> Rho2 {
    let (c, s) = (theta.cos(), theta.sin());
    let off = -(1.0 - g).sqrt() * c * s;
    [[c * c + g * s * s, off], [off, (1.0 - g) * s * s]]
}

fn dressed(rho: &Rho2, r: f64) -> (f64, f64, f64) {
    let (f0, f1) = (1.0 - r, 1.0 + r);
    (f0 * f0 * rho[0][0], f0 * f1 * rho[0][1], f1 * f1 * rho[1][1])
}

/// `⟨X⟩`, `⟨Z⟩` of `f̂ρf̂ / Tr(f̂ρf̂)`.
pub fn observables(rho: &Rho2, r: f64) -> Observables {
    let (a, b, d) = dressed(rho, r);
    let tr = a + d;
    Observables { x: 2.0 * b / tr, z: (a - d) / tr }
}

/// `⟨X + Z⟩` of `f̂ρf̂ / Tr(f̂ρf̂)`.
pub fn one_qubit_energy(rho: &Rho2, r: f64) -> f64 {
    let o = observables(rho, r);
    o.x + o.z
}

/// Exact neural-only optimum `(r, E)` for a fixed one-qubit state.
///
/// With `f = (u0, u1)` the energy is `uᵀKu / uᵀDu`, `K_ab = ρ_ab H_ba`,
/// `D = diag(ρ)`; its minimum is the lowest generalised eigenvalue.
pub fn optimal_neural_r(rho: &Rho2) -> (f64, f64) {
    let h = [[1.0, 1.0], [1.0, -1.0]];
    let (d0, d1) = (rho[0][0].sqrt(), rho[1][1].sqrt());
    let m00 = rho[0][0] * h[0][0] / (d0 * d0);
    let m11 = rho[1][1] * h[1][1] / (d1 * d1);
    let m01 = rho[0][1] * h[1][0] / (d0 * d1);
    let mean = (m00 + m11) / 2.0;
    let rad = (((m00 - m11) / 2.0).powi(2) + m01 * m01).sqrt();
    let e = mean - rad;
    // Eigenvector of [[m00, m01], [m01, m11]] for e, mapped back through D^{-1/2}.
    let (v0, v1) = if m01.abs() > 1e-300 {
        (m01, e - m00)
    } else if m00 <= m11 {
        (1.0, 0.0)
    } else {
        (0.0, 1.0)
    };
    let (u0, u1) = (v0 / d0, v1 / d1);
    ((u1 - u0) / (u1 + u0), e)
}
