use nalgebra::DMatrix;
use num_complex::Complex64;

use super::gate::{apply_mat2, apply_mat4, conj2, conj4, Gate};
use super::noise::Channel;
use crate::error::{Error, Result};
use crate::pauli::{PauliSum, PauliTerm};

const ZERO: Complex64 = Complex64::new(0.0, 0.0);

pub const STATEVECTOR_MAX_QUBITS: usize = 20;
pub const DENSITY_MAX_QUBITS: usize = 12;

fn bit(n: usize, qubit: usize) -> usize {
    1 << (n - 1 - qubit)
}

/// Pure state amplitudes, basis index `Σ s_i 2^(n-1-i)`.
#[derive(Debug, Clone, PartialEq)]
pub struct StateVector {
    n: usize,
    data: Vec<Complex64>,
}

impl StateVector {
    pub fn zero_state(n: usize) -> Result<Self> {
        if n > STATEVECTOR_MAX_QUBITS {
            return Err(Error::TooManyQubits { n, max: STATEVECTOR_MAX_QUBITS });
        }
        let mut data = vec![ZERO; 1 << n];
        data[0] = Complex64::new(1.0, 0.0);
        Ok(Self { n, data })
    }

    pub fn from_amplitudes(n: usize, data: Vec<Complex64>) -> Result<Self> {
        if data.len() != 1 << n {
            return Err(Error::QubitMismatch { expected: 1 << n, got: data.len() });
        }
        Ok(Self { n, data })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn amplitudes(&self) -> &[Complex64] {
        &self.data
    }

    pub fn norm(&self) -> f64 {
        self.data.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
    }

    pub fn apply(&mut self, gate: &Gate) {
        let n = self.n;
        match gate {
            Gate::One { qubit, matrix } => apply_mat2(&mut self.data, bit(n, *qubit), matrix),
            Gate::Two { a, b, matrix } => apply_mat4(&mut self.data, bit(n, *a), bit(n, *b), matrix),
        }
    }

    pub fn probabilities(&self) -> Vec<f64> {
        self.data.iter().map(|z| z.norm_sqr()).collect()
    }

    pub fn to_density(&self) -> DensityMatrix {
        let dim = self.data.len();
        let mut data = vec![ZERO; dim * dim];
        for r in 0..dim {
            for c in 0..dim {
                data[r * dim + c] = self.data[r] * self.data[c].conj();
            }
        }
        DensityMatrix { n: self.n, data }
    }
}

/// Row-major `2^n × 2^n` density matrix.
///
/// Treated internally as a `2n`-qubit vector whose high `n` bits index rows,
/// so a unitary acts as `U` on the row bits and `conj(U)` on the column bits.
#[derive(Debug, Clone, PartialEq)]
pub struct DensityMatrix {
    n: usize,
    data: Vec<Complex64>,
}

impl DensityMatrix {
    pub fn zero_state(n: usize) -> Result<Self> {
        if n > DENSITY_MAX_QUBITS {
            return Err(Error::TooManyQubits { n, max: DENSITY_MAX_QUBITS });
        }
        let dim = 1 << n;
        let mut data = vec![ZERO; dim * dim];
        data[0] = Complex64::new(1.0, 0.0);
        Ok(Self { n, data })
    }

    pub fn maximally_mixed(n: usize) -> Result<Self> {
        let mut rho = Self::zero_state(n)?;
        let dim = 1 << n;
        rho.data[0] = ZERO;
        for i in 0..dim {
            rho.data[i * dim + i] = Complex64::new(1.0 / dim as f64, 0.0);
        }
        Ok(rho)
    }

    pub fn from_matrix(m: &DMatrix<Complex64>) -> Result<Self> {
        let dim = m.nrows();
        if !dim.is_power_of_two() || m.ncols() != dim {
            return Err(Error::Parse("density matrix must be square with power-of-two size".into()));
        }
        let n = dim.trailing_zeros() as usize;
        let data = (0..dim * dim).map(|i| m[(i / dim, i % dim)]).collect();
        Ok(Self { n, data })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn dim(&self) -> usize {
        1 << self.n
    }

    #[inline]
    pub fn get(&self, r: usize, c: usize) -> Complex64 {
        self.data[r * self.dim() + c]
    }

    pub fn to_matrix(&self) -> DMatrix<Complex64> {
        let dim = self.dim();
        DMatrix::from_fn(dim, dim, |r, c| self.get(r, c))
    }

    pub fn apply(&mut self, gate: &Gate) {
        let n = self.n;
        match gate {
            Gate::One { qubit, matrix } => {
                let b = bit(n, *qubit);
                apply_mat2(&mut self.data, b << n, matrix);
                apply_mat2(&mut self.data, b, &conj2(matrix));
            }
            Gate::Two { a, b, matrix } => {
                let (ba, bb) = (bit(n, *a), bit(n, *b));
                apply_mat4(&mut self.data, ba << n, bb << n, matrix);
                apply_mat4(&mut self.data, ba, bb, &conj4(matrix));
            }
        }
    }

    /// Apply a single-qubit channel through its superoperator.
    pub fn apply_channel(&mut self, qubit: usize, channel: &Channel) {
        let n = self.n;
        let cb = bit(n, qubit);
        let rb = cb << n;
        let s = channel.superop();
        for i in 0..self.data.len() {
            if i & (rb | cb) != 0 {
                continue;
            }
            let idx = [i, i | cb, i | rb, i | rb | cb];
            let x = idx.map(|k| self.data[k]);
            for (r, &k) in idx.iter().enumerate() {
                self.data[k] = s[r][0] * x[0] + s[r][1] * x[1] + s[r][2] * x[2] + s[r][3] * x[3];
            }
        }
    }

    pub fn trace(&self) -> Complex64 {
        (0..self.dim()).map(|i| self.get(i, i)).sum()
    }

    pub fn probabilities(&self) -> Vec<f64> {
        (0..self.dim()).map(|i| self.get(i, i).re).collect()
    }

    /// Max |ρ - ρ†| entry.
    pub fn hermiticity_error(&self) -> f64 {
        let dim = self.dim();
        let mut err: f64 = 0.0;
        for r in 0..dim {
            for c in r..dim {
                err = err.max((self.get(r, c) - self.get(c, r).conj()).norm());
            }
        }
        err
    }

    /// `Tr(ρ P)` for a single weighted Pauli string.
    pub fn expectation_term(&self, term: &PauliTerm) -> Complex64 {
        let dim = self.dim();
        let masks = term.masks();
        let mut acc = ZERO;
        for y in 0..dim {
            // P|y⟩ = amp(y)|y ^ x⟩, so Tr(ρP) = Σ_y amp(y) ρ_{y, y^x}.
            acc += masks.amplitude(y) * self.get(y, y ^ masks.x);
        }
        acc * term.coeff
    }

    pub fn expectation(&self, h: &PauliSum) -> f64 {
        h.terms().iter().map(|t| self.expectation_term(t)).sum::<Complex64>().re
    }

    /// Check trace, hermiticity and positivity within the given tolerances.
    pub fn is_valid(&self, tol: f64, eig_tol: f64) -> bool {
        if (self.trace() - 1.0).norm() > tol || self.hermiticity_error() > tol {
            return false;
        }
        let ev = crate::oracles::eigenvalues_hermitian(&self.to_matrix());
        ev.first().map_or(true, |&e| e >= -eig_tol)
    }
}
