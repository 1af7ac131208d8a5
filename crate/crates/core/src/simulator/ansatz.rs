use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::gate::Gate;
use crate::error::{Error, Result};
use crate::hamiltonians::half_layer_pairs;
use crate::pauli::Pauli;

/// One layer of a layered ansatz.
///
/// Parameterized layers follow the `+i` exponent convention: `Rx(θ)` is
/// `∏ exp(iθ_i X_i)`, `ZZ(θ)` is `∏ exp(iθ_i Z_i Z_{i+1})` over the open
/// chain, and `SWAP(θ)` is `∏ exp(iθ_i SWAP_{i,i+1})`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Layer {
    /// Hadamard on every qubit.
    H,
    /// Pauli X on every qubit.
    X,
    /// Singlet `(|01⟩ - |10⟩)/√2` on each pair `(0,1), (2,3), …`, built from X, H and CNOT.
    Singlet,
    Rx,
    Ry,
    Rz,
    ZZ,
    XX,
    YY,
    Swap,
}

impl Layer {
    pub fn param_count(self, n: usize) -> usize {
        match self {
            Layer::H | Layer::X | Layer::Singlet => 0,
            Layer::Rx | Layer::Ry | Layer::Rz => n,
            Layer::ZZ | Layer::XX | Layer::YY | Layer::Swap => n.saturating_sub(1),
        }
    }

    fn name(self) -> &'static str {
        match self {
            Layer::H => "H",
            Layer::X => "X",
            Layer::Singlet => "SINGLET",
            Layer::Rx => "Rx",
            Layer::Ry => "Ry",
            Layer::Rz => "Rz",
            Layer::ZZ => "ZZ",
            Layer::XX => "XX",
            Layer::YY => "YY",
            Layer::Swap => "SWAP",
        }
    }
}

impl FromStr for Layer {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        // Accept "ZZ(θ1)" as well as "ZZ"; the parenthesised label is cosmetic.
        let head = s.split('(').next().unwrap_or("").trim();
        Ok(match head.to_ascii_uppercase().as_str() {
            "H" => Layer::H,
            "X" => Layer::X,
            "SINGLET" => Layer::Singlet,
            "RX" => Layer::Rx,
            "RY" => Layer::Ry,
            "RZ" => Layer::Rz,
            "ZZ" => Layer::ZZ,
            "XX" => Layer::XX,
            "YY" => Layer::YY,
            "SWAP" => Layer::Swap,
            _ => return Err(Error::Parse(format!("unknown ansatz layer {s:?}"))),
        })
    }
}

/// Layered circuit description in list notation, e.g. `[H, ZZ(θ1), Rx(θ2)]`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AnsatzSpec {
    pub n: usize,
    pub layers: Vec<Layer>,
}

impl AnsatzSpec {
    pub fn new(n: usize, layers: Vec<Layer>) -> Self {
        Self { n, layers }
    }

    pub fn parse(n: usize, notation: &str) -> Result<Self> {
        let inner = notation.trim().trim_start_matches('[').trim_end_matches(']');
        let mut layers = Vec::new();
        let mut depth = 0usize;
        let mut current = String::new();
        for ch in inner.chars() {
            match ch {
                '(' => depth += 1,
                ')' => depth = depth.saturating_sub(1),
                ',' if depth == 0 => {
                    layers.push(current.trim().parse()?);
                    current.clear();
                    continue;
                }
                _ => {}
            }
            current.push(ch);
        }
        if !current.trim().is_empty() {
            layers.push(current.trim().parse()?);
        }
        Ok(Self { n, layers })
    }

    pub fn param_count(&self) -> usize {
        self.layers.iter().map(|l| l.param_count(self.n)).sum()
    }
}

impl fmt::Display for AnsatzSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let names: Vec<_> = self.layers.iter().map(|l| l.name()).collect();
        write!(f, "[{}]", names.join(", "))
    }
}

/// A gate together with the index of the parameter it depends on, if any.
#[derive(Debug, Clone, PartialEq)]
pub struct Op {
    pub gate: Gate,
    pub param: Option<usize>,
}

/// Flat gate program on `n` qubits.
#[derive(Debug, Clone, PartialEq)]
pub struct Circuit {
    pub n: usize,
    pub ops: Vec<Op>,
}

impl Circuit {
    pub fn new(n: usize) -> Self {
        Self { n, ops: Vec::new() }
    }

    pub fn push(&mut self, gate: Gate) {
        self.ops.push(Op { gate, param: None });
    }

    /// This circuit followed by `other`.
    pub fn then(&self, other: &Circuit) -> Circuit {
        let mut ops = self.ops.clone();
        ops.extend(other.ops.iter().map(|o| Op { gate: o.gate.clone(), param: None }));
        Circuit { n: self.n, ops }
    }

    pub fn gate_count(&self) -> usize {
        self.ops.len()
    }
}

/// Bind `params` to `spec`, producing the flat gate list.
pub fn build_circuit(spec: &AnsatzSpec, params: &[f64]) -> Result<Circuit> {
    let expected = spec.param_count();
    if params.len() != expected {
        return Err(Error::ParamMismatch { expected, got: params.len() });
    }
    let n = spec.n;
    let mut circuit = Circuit::new(n);
    let mut k = 0;
    fn bound(gate: Gate, ops: &mut Vec<Op>, k: &mut usize) {
        ops.push(Op { gate, param: Some(*k) });
        *k += 1;
    }
    for &layer in &spec.layers {
        match layer {
            Layer::H => (0..n).for_each(|q| circuit.push(Gate::hadamard(q))),
            Layer::X => (0..n).for_each(|q| circuit.push(Gate::pauli(q, Pauli::X))),
            Layer::Singlet => {
                for (a, b) in half_layer_pairs(n) {
                    circuit.push(Gate::pauli(a, Pauli::X));
                    circuit.push(Gate::pauli(b, Pauli::X));
                    circuit.push(Gate::hadamard(a));
                    circuit.push(Gate::controlled(a, b, Pauli::X));
                }
            }
            Layer::Rx | Layer::Ry | Layer::Rz => {
                let p = match layer {
                    Layer::Rx => Pauli::X,
                    Layer::Ry => Pauli::Y,
                    _ => Pauli::Z,
                };
                for q in 0..n {
                    bound(Gate::rotation(q, p, params[k]), &mut circuit.ops, &mut k);
                }
            }
            Layer::ZZ | Layer::XX | Layer::YY => {
                let p = match layer {
                    Layer::ZZ => Pauli::Z,
                    Layer::XX => Pauli::X,
                    _ => Pauli::Y,
                };
                for q in 0..n.saturating_sub(1) {
                    bound(Gate::pair_rotation(q, q + 1, p, params[k]), &mut circuit.ops, &mut k);
                }
            }
            Layer::Swap => {
                for q in 0..n.saturating_sub(1) {
                    bound(Gate::swap_rotation(q, q + 1, params[k]), &mut circuit.ops, &mut k);
                }
            }
        }
    }
    Ok(circuit)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::simulator::run_state;

    #[test]
    fn parse_and_count_parameters() {
        let spec = AnsatzSpec::parse(5, "[H, ZZ(θ1), Rx(θ2)]").unwrap();
        assert_eq!(spec.layers, vec![Layer::H, Layer::ZZ, Layer::Rx]);
        assert_eq!(spec.param_count(), 4 + 5);
        assert_eq!(spec.to_string(), "[H, ZZ, Rx]");
        assert_eq!(AnsatzSpec::parse(5, &spec.to_string()).unwrap(), spec);
        assert!(matches!(AnsatzSpec::parse(2, "[H, CZ]"), Err(Error::Parse(_))));
    }

    #[test]
    fn parameter_count_is_checked() {
        let spec = AnsatzSpec::parse(3, "[Rx]").unwrap();
        assert!(matches!(build_circuit(&spec, &[0.1, 0.2]), Err(Error::ParamMismatch { expected: 3, got: 2 })));
    }

    #[test]
    fn singlet_layer_prepares_singlets() {
        let psi = run_state(&build_circuit(&AnsatzSpec::parse(2, "[Singlet]").unwrap(), &[]).unwrap()).unwrap();
        let a = psi.amplitudes();
        let h = std::f64::consts::FRAC_1_SQRT_2;
        assert!(a[0].norm() < 1e-15 && a[3].norm() < 1e-15);
        assert!((a[1].re - h).abs() < 1e-15 && (a[2].re + h).abs() < 1e-15);
    }

    #[test]
    fn zero_angles_are_identity() {
        let spec = AnsatzSpec::parse(3, "[Rx, ZZ, XX, YY, Swap, Ry, Rz]").unwrap();
        let psi = run_state(&build_circuit(&spec, &vec![0.0; spec.param_count()]).unwrap()).unwrap();
        assert_eq!(psi.probabilities()[0], 1.0);
    }

    #[test]
    fn swap_rotation_at_quarter_turn_swaps() {
        let mut c = Circuit::new(2);
        c.push(Gate::pauli(0, Pauli::X));
        c.push(Gate::swap_rotation(0, 1, std::f64::consts::FRAC_PI_2));
        let psi = run_state(&c).unwrap();
        assert!((psi.probabilities()[0b01] - 1.0).abs() < 1e-15);
    }
}
