//! Dense statevector and density-matrix simulation of layered circuits.

mod ansatz;
mod gate;
mod noise;
mod state;

use std::io::{BufRead, Write};

use rand::distributions::{Distribution, WeightedIndex};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::Binomial;

pub use ansatz::{build_circuit, AnsatzSpec, Circuit, Layer, Op};
pub use gate::{pauli_matrix, Gate, Mat2, Mat4};
pub use noise::{Channel, NoiseKind, NoiseModel};
pub use state::{DensityMatrix, StateVector, DENSITY_MAX_QUBITS, STATEVECTOR_MAX_QUBITS};

use crate::error::{Error, Result};

/// `U|0…0⟩` for a noise-free circuit.
pub fn run_state(c: &Circuit) -> Result<StateVector> {
    let mut psi = StateVector::zero_state(c.n)?;
    for op in &c.ops {
        psi.apply(&op.gate);
    }
    Ok(psi)
}

/// Density-matrix evolution with `noise` after every two-qubit gate.
pub fn run_density(c: &Circuit, noise: &NoiseModel) -> Result<DensityMatrix> {
    let mut rho = DensityMatrix::zero_state(c.n)?;
    evolve_density(&mut rho, c, noise);
    Ok(rho)
}

/// Continue evolving an existing density matrix through `c`.
pub fn evolve_density(rho: &mut DensityMatrix, c: &Circuit, noise: &NoiseModel) {
    let channel = noise.channel();
    for op in &c.ops {
        rho.apply(&op.gate);
        if let (Some(ch), true) = (&channel, op.gate.is_two_qubit()) {
            for q in op.gate.qubits() {
                rho.apply_channel(q, ch);
            }
        }
    }
}

fn clean_probabilities(p: &[f64]) -> Vec<f64> {
    let clipped: Vec<f64> = p.iter().map(|&x| x.max(0.0)).collect();
    let total: f64 = clipped.iter().sum();
    clipped.into_iter().map(|x| x / total).collect()
}

/// `shots` i.i.d. basis indices drawn from `probs`, deterministic in `seed`.
pub fn sample_indices(probs: &[f64], shots: usize, seed: u64) -> Vec<usize> {
    let probs = clean_probabilities(probs);
    let dist = WeightedIndex::new(&probs).expect("non-degenerate distribution");
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..shots).map(|_| dist.sample(&mut rng)).collect()
}

/// Histogram of `shots` i.i.d. draws from `probs` via sequential binomials.
pub fn sample_counts(probs: &[f64], shots: u64, seed: u64) -> Vec<u64> {
    let probs = clean_probabilities(probs);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut counts = vec![0u64; probs.len()];
    let mut remaining = shots;
    let mut mass = 1.0;
    for (i, &p) in probs.iter().enumerate() {
        if remaining == 0 {
            break;
        }
        if i + 1 == probs.len() || mass <= 0.0 {
            counts[i] = remaining;
            break;
        }
        let q = (p / mass).clamp(0.0, 1.0);
        let k = Binomial::new(remaining, q).expect("valid binomial").sample(&mut rng);
        counts[i] = k;
        remaining -= k;
        mass -= p;
    }
    counts
}

/// Sample bitstrings (as basis indices) from the noisy output of `c`.
pub fn sample(c: &Circuit, noise: &NoiseModel, shots: usize, seed: u64) -> Result<Vec<usize>> {
    let rho = run_density(c, noise)?;
    Ok(sample_indices(&rho.probabilities(), shots, seed))
}

/// `'0'/'1'` string with qubit 0 first.
pub fn bitstring(index: usize, n: usize) -> String {
    (0..n).map(|q| if index >> (n - 1 - q) & 1 == 1 { '1' } else { '0' }).collect()
}

pub fn parse_bitstring(s: &str) -> Result<usize> {
    s.chars().try_fold(0usize, |acc, ch| match ch {
        '0' => Ok(acc << 1),
        '1' => Ok(acc << 1 | 1),
        _ => Err(Error::InvalidBitstring(s.to_string())),
    })
}

/// Bit of qubit `q` in basis index `index`.
#[inline]
pub fn qubit_bit(index: usize, n: usize, q: usize) -> usize {
    index >> (n - 1 - q) & 1
}

/// Write the bitstring dump: a `# seed=… shots=…` header, then one string per line.
pub fn write_bitstrings<W: Write>(mut w: W, n: usize, seed: u64, samples: &[usize]) -> Result<()> {
    writeln!(w, "# seed={seed} shots={}", samples.len())?;
    for &s in samples {
        writeln!(w, "{}", bitstring(s, n))?;
    }
    Ok(())
}

/// Read a dump written by [`write_bitstrings`]; returns `(n, seed, samples)`.
pub fn read_bitstrings<R: BufRead>(r: R) -> Result<(usize, u64, Vec<usize>)> {
    let mut seed = None;
    let mut shots = None;
    let mut n = None;
    let mut samples = Vec::new();
    for line in r.lines() {
        let line = line?;
        let line = line.trim();
        if let Some(header) = line.strip_prefix('#') {
            for field in header.split_whitespace() {
                if let Some(v) = field.strip_prefix("seed=") {
                    seed = Some(v.parse().map_err(|_| Error::Parse(format!("bad seed {v:?}")))?);
                } else if let Some(v) = field.strip_prefix("shots=") {
                    shots = Some(v.parse::<usize>().map_err(|_| Error::Parse(format!("bad shots {v:?}")))?);
                }
            }
            continue;
        }
        if line.is_empty() {
            continue;
        }
        match n {
            None => n = Some(line.len()),
            Some(k) if k != line.len() => return Err(Error::InvalidBitstring(line.to_string())),
            _ => {}
        }
        samples.push(parse_bitstring(line)?);
    }
    let seed = seed.ok_or_else(|| Error::Parse("missing seed header".into()))?;
    if let Some(s) = shots {
        if s != samples.len() {
            return Err(Error::Parse(format!("header says {s} shots, found {}", samples.len())));
        }
    }
    Ok((n.unwrap_or(0), seed, samples))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bitstrings_round_trip() {
        for i in 0..16 {
            assert_eq!(parse_bitstring(&bitstring(i, 4)).unwrap(), i);
        }
        assert_eq!(bitstring(0b0011, 4), "0011");
        assert_eq!(qubit_bit(0b1000, 4, 0), 1);
        assert!(parse_bitstring("01a").is_err());
    }

    #[test]
    fn sampled_counts_are_deterministic_and_complete() {
        let probs = [0.1, 0.0, 0.6, 0.3];
        let a = sample_counts(&probs, 100_000, 5);
        assert_eq!(a, sample_counts(&probs, 100_000, 5));
        assert_ne!(a, sample_counts(&probs, 100_000, 6));
        assert_eq!(a.iter().sum::<u64>(), 100_000);
        assert_eq!(a[1], 0);
        for (c, p) in a.iter().zip(probs) {
            assert!((*c as f64 / 1e5 - p).abs() < 0.005);
        }
    }

    #[test]
    fn sampled_indices_follow_probabilities() {
        let s = sample_indices(&[0.25, 0.75], 40_000, 1);
        let ones = s.iter().filter(|&&i| i == 1).count() as f64 / 40_000.0;
        assert!((ones - 0.75).abs() < 0.01);
    }

    #[test]
    fn bitstring_dump_round_trips() {
        let samples = vec![0, 5, 7, 2];
        let mut buf = Vec::new();
        write_bitstrings(&mut buf, 3, 42, &samples).unwrap();
        let (n, seed, back) = read_bitstrings(buf.as_slice()).unwrap();
        assert_eq!((n, seed, back), (3, 42, samples));
    }
}
