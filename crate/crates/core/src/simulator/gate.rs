use std::f64::consts::FRAC_1_SQRT_2;

use num_complex::Complex64;

use crate::pauli::Pauli;

pub type Mat2 = [[Complex64; 2]; 2];
pub type Mat4 = [[Complex64; 4]; 4];

const ZERO: Complex64 = Complex64::new(0.0, 0.0);
const ONE: Complex64 = Complex64::new(1.0, 0.0);
const I: Complex64 = Complex64::new(0.0, 1.0);

/// Concrete one- or two-qubit unitary. Two-qubit matrices use the local
/// basis `|q_a q_b⟩` with index `2·q_a + q_b`.
#[derive(Debug, Clone, PartialEq)]
pub enum Gate {
    One { qubit: usize, matrix: Mat2 },
    Two { a: usize, b: usize, matrix: Mat4 },
}

pub fn pauli_matrix(p: Pauli) -> Mat2 {
    match p {
        Pauli::I => [[ONE, ZERO], [ZERO, ONE]],
        Pauli::X => [[ZERO, ONE], [ONE, ZERO]],
        Pauli::Y => [[ZERO, -I], [I, ZERO]],
        Pauli::Z => [[ONE, ZERO], [ZERO, -ONE]],
    }
}

fn kron(a: &Mat2, b: &Mat2) -> Mat4 {
    let mut out = [[ZERO; 4]; 4];
    for r in 0..4 {
        for c in 0..4 {
            out[r][c] = a[r / 2][c / 2] * b[r % 2][c % 2];
        }
    }
    out
}

fn identity4() -> Mat4 {
    let mut m = [[ZERO; 4]; 4];
    for (i, row) in m.iter_mut().enumerate() {
        row[i] = ONE;
    }
    m
}

fn swap_matrix() -> Mat4 {
    let mut m = [[ZERO; 4]; 4];
    m[0][0] = ONE;
    m[1][2] = ONE;
    m[2][1] = ONE;
    m[3][3] = ONE;
    m
}

/// `cos θ · 1 + i sin θ · G` for an involutory 4×4 `G`.
fn exp_involutory4(g: &Mat4, theta: f64) -> Mat4 {
    let id = identity4();
    let (s, c) = theta.sin_cos();
    let mut out = [[ZERO; 4]; 4];
    for r in 0..4 {
        for k in 0..4 {
            out[r][k] = id[r][k] * c + g[r][k] * I * s;
        }
    }
    out
}

impl Gate {
    pub fn hadamard(qubit: usize) -> Self {
        let h = Complex64::new(FRAC_1_SQRT_2, 0.0);
        Gate::One { qubit, matrix: [[h, h], [h, -h]] }
    }

    pub fn pauli(qubit: usize, p: Pauli) -> Self {
        Gate::One { qubit, matrix: pauli_matrix(p) }
    }

    /// `exp(iθP)`.
    pub fn rotation(qubit: usize, p: Pauli, theta: f64) -> Self {
        let pm = pauli_matrix(p);
        let (s, c) = theta.sin_cos();
        let mut m = [[ZERO; 2]; 2];
        for r in 0..2 {
            for k in 0..2 {
                let id = if r == k { ONE } else { ZERO };
                m[r][k] = id * c + pm[r][k] * I * s;
            }
        }
        Gate::One { qubit, matrix: m }
    }

    /// `exp(iθ P_a P_b)`.
    pub fn pair_rotation(a: usize, b: usize, p: Pauli, theta: f64) -> Self {
        let pm = pauli_matrix(p);
        Gate::Two { a, b, matrix: exp_involutory4(&kron(&pm, &pm), theta) }
    }

    /// `exp(iθ SWAP_{a,b})`.
    pub fn swap_rotation(a: usize, b: usize, theta: f64) -> Self {
        Gate::Two { a, b, matrix: exp_involutory4(&swap_matrix(), theta) }
    }

    /// Controlled-`P` with `control` as the first local qubit.
    pub fn controlled(control: usize, target: usize, p: Pauli) -> Self {
        let pm = pauli_matrix(p);
        let mut m = identity4();
        for r in 0..2 {
            for k in 0..2 {
                m[2 + r][2 + k] = pm[r][k];
            }
        }
        Gate::Two { a: control, b: target, matrix: m }
    }

    pub fn is_two_qubit(&self) -> bool {
        matches!(self, Gate::Two { .. })
    }

    pub fn qubits(&self) -> Vec<usize> {
        match *self {
            Gate::One { qubit, .. } => vec![qubit],
            Gate::Two { a, b, .. } => vec![a, b],
        }
    }
}

/// In-place 2×2 action on the index pairs selected by `bit` in a flat array.
pub(crate) fn apply_mat2(data: &mut [Complex64], bit: usize, m: &Mat2) {
    let len = data.len();
    let mut i = 0;
    while i < len {
        if i & bit != 0 {
            i += bit;
            continue;
        }
        let j = i | bit;
        let (x0, x1) = (data[i], data[j]);
        data[i] = m[0][0] * x0 + m[0][1] * x1;
        data[j] = m[1][0] * x0 + m[1][1] * x1;
        i += 1;
    }
}

/// In-place 4×4 action with `bit_a` the high local bit and `bit_b` the low one.
pub(crate) fn apply_mat4(data: &mut [Complex64], bit_a: usize, bit_b: usize, m: &Mat4) {
    for i in 0..data.len() {
        if i & (bit_a | bit_b) != 0 {
            continue;
        }
        let idx = [i, i | bit_b, i | bit_a, i | bit_a | bit_b];
        let x = idx.map(|k| data[k]);
        for (r, &k) in idx.iter().enumerate() {
            data[k] = m[r][0] * x[0] + m[r][1] * x[1] + m[r][2] * x[2] + m[r][3] * x[3];
        }
    }
}

pub(crate) fn conj2(m: &Mat2) -> Mat2 {
    m.map(|row| row.map(|z| z.conj()))
}

pub(crate) fn conj4(m: &Mat4) -> Mat4 {
    m.map(|row| row.map(|z| z.conj()))
}
