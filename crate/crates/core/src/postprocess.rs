//! The classical post-processing module `f: bitstring → amplitude factor`,
//! realising the diagonal operator `f̂ = Σ_s f(s)|s⟩⟨s|`.

use std::collections::BTreeMap;
use std::path::Path;

use num_complex::Complex64;
use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::simulator::{parse_bitstring, qubit_bit};

/// Fully connected `n → 2n → 1` network with `tanh` hidden units and output
/// `exp(tanh(z))`, so every value lies in `[1/e, e]`.
///
/// Inputs are the spins `1 - 2 s_i`. Parameter layout: hidden weights
/// (row-major, `hidden × n`), hidden biases, output weights, output bias.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundedMlp {
    n: usize,
    hidden: usize,
    params: Vec<f64>,
}

impl BoundedMlp {
    pub fn zeros(n: usize) -> Self {
        let hidden = 2 * n;
        Self { n, hidden, params: vec![0.0; hidden * n + 2 * hidden + 1] }
    }

    pub fn random<R: Rng + ?Sized>(n: usize, std: f64, rng: &mut R) -> Self {
        let mut mlp = Self::zeros(n);
        let normal = Normal::new(0.0, std).expect("finite std");
        mlp.params.iter_mut().for_each(|p| *p = normal.sample(rng));
        mlp
    }

    fn split(&self) -> (&[f64], &[f64], &[f64], f64) {
        let (h, n) = (self.hidden, self.n);
        let (w1, rest) = self.params.split_at(h * n);
        let (b1, rest) = rest.split_at(h);
        let (w2, b2) = rest.split_at(h);
        (w1, b1, w2, b2[0])
    }

    fn inputs(&self, s: usize) -> Vec<f64> {
        (0..self.n).map(|q| 1.0 - 2.0 * qubit_bit(s, self.n, q) as f64).collect()
    }

    fn hidden_activations(&self, x: &[f64]) -> Vec<f64> {
        let (w1, b1, _, _) = self.split();
        (0..self.hidden)
            .map(|j| {
                let pre: f64 = w1[j * self.n..(j + 1) * self.n].iter().zip(x).map(|(w, v)| w * v).sum();
                (pre + b1[j]).tanh()
            })
            .collect()
    }

    pub fn evaluate(&self, s: usize) -> f64 {
        let (_, _, w2, b2) = self.split();
        let h = self.hidden_activations(&self.inputs(s));
        let z: f64 = w2.iter().zip(&h).map(|(w, v)| w * v).sum::<f64>() + b2;
        z.tanh().exp()
    }

    /// `(f(s), ∂f(s)/∂φ)`.
    pub fn evaluate_with_grad(&self, s: usize) -> (f64, Vec<f64>) {
        let (_, _, w2, b2) = self.split();
        let (n, hid) = (self.n, self.hidden);
        let x = self.inputs(s);
        let h = self.hidden_activations(&x);
        let z: f64 = w2.iter().zip(&h).map(|(w, v)| w * v).sum::<f64>() + b2;
        let t = z.tanh();
        let out = t.exp();
        let dz = out * (1.0 - t * t);
        let mut grad = vec![0.0; self.params.len()];
        for j in 0..hid {
            let dpre = dz * w2[j] * (1.0 - h[j] * h[j]);
            for i in 0..n {
                grad[j * n + i] = dpre * x[i];
            }
            grad[hid * n + j] = dpre;
            grad[hid * n + hid + j] = dz * h[j];
        }
        grad[hid * n + 2 * hid] = dz;
        (out, grad)
    }
}

/// `2^n` free complex amplitudes; parameters are all real parts, then all imaginary parts.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComplexTable {
    n: usize,
    params: Vec<f64>,
}

impl ComplexTable {
    pub fn ones(n: usize) -> Self {
        let dim = 1 << n;
        let mut params = vec![0.0; 2 * dim];
        params[..dim].iter_mut().for_each(|p| *p = 1.0);
        Self { n, params }
    }

    pub fn from_values(n: usize, values: &[Complex64]) -> Result<Self> {
        let dim = 1 << n;
        if values.len() != dim {
            return Err(Error::ParamMismatch { expected: dim, got: values.len() });
        }
        let params = values.iter().map(|z| z.re).chain(values.iter().map(|z| z.im)).collect();
        Ok(Self { n, params })
    }

    /// Entries `1 + ε` with Gaussian `ε` (real and imaginary parts independent).
    pub fn random<R: Rng + ?Sized>(n: usize, std: f64, rng: &mut R) -> Self {
        let normal = Normal::new(0.0, std).expect("finite std");
        let mut t = Self::ones(n);
        t.params.iter_mut().for_each(|p| *p += normal.sample(rng));
        t
    }

    pub fn evaluate(&self, s: usize) -> Complex64 {
        let dim = 1 << self.n;
        Complex64::new(self.params[s], self.params[dim + s])
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "variant", rename_all = "snake_case")]
pub enum PostProcessor {
    Identity { n: usize },
    BoundedMlp(BoundedMlp),
    ComplexTable(ComplexTable),
}

/// Which parameterisation to instantiate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PostProcessorKind {
    Identity,
    BoundedMlp,
    ComplexTable,
}

impl PostProcessorKind {
    /// Fresh instance close to the identity map (exactly the identity for `std = 0`).
    pub fn init<R: Rng + ?Sized>(self, n: usize, std: f64, rng: &mut R) -> PostProcessor {
        match self {
            PostProcessorKind::Identity => PostProcessor::Identity { n },
            PostProcessorKind::BoundedMlp if std == 0.0 => PostProcessor::BoundedMlp(BoundedMlp::zeros(n)),
            PostProcessorKind::BoundedMlp => PostProcessor::BoundedMlp(BoundedMlp::random(n, std, rng)),
            PostProcessorKind::ComplexTable if std == 0.0 => PostProcessor::ComplexTable(ComplexTable::ones(n)),
            PostProcessorKind::ComplexTable => PostProcessor::ComplexTable(ComplexTable::random(n, std, rng)),
        }
    }
}

impl PostProcessor {
    pub fn identity(n: usize) -> Self {
        PostProcessor::Identity { n }
    }

    pub fn n(&self) -> usize {
        match self {
            PostProcessor::Identity { n } => *n,
            PostProcessor::BoundedMlp(m) => m.n,
            PostProcessor::ComplexTable(t) => t.n,
        }
    }

    pub fn kind(&self) -> PostProcessorKind {
        match self {
            PostProcessor::Identity { .. } => PostProcessorKind::Identity,
            PostProcessor::BoundedMlp(_) => PostProcessorKind::BoundedMlp,
            PostProcessor::ComplexTable(_) => PostProcessorKind::ComplexTable,
        }
    }

    pub fn params(&self) -> &[f64] {
        match self {
            PostProcessor::Identity { .. } => &[],
            PostProcessor::BoundedMlp(m) => &m.params,
            PostProcessor::ComplexTable(t) => &t.params,
        }
    }

    pub fn param_count(&self) -> usize {
        self.params().len()
    }

    pub fn set_params(&mut self, params: &[f64]) -> Result<()> {
        let expected = self.param_count();
        if params.len() != expected {
            return Err(Error::ParamMismatch { expected, got: params.len() });
        }
        match self {
            PostProcessor::Identity { .. } => {}
            PostProcessor::BoundedMlp(m) => m.params.copy_from_slice(params),
            PostProcessor::ComplexTable(t) => t.params.copy_from_slice(params),
        }
        Ok(())
    }

    pub fn with_params(&self, params: &[f64]) -> Result<Self> {
        let mut out = self.clone();
        out.set_params(params)?;
        Ok(out)
    }

    /// True when every output is guaranteed real.
    pub fn is_real(&self) -> bool {
        match self {
            PostProcessor::ComplexTable(t) => {
                let dim = 1 << t.n;
                t.params[dim..].iter().all(|&v| v == 0.0)
            }
            _ => true,
        }
    }

    /// `f(s)` for a basis index `s`.
    pub fn evaluate(&self, s: usize) -> Complex64 {
        match self {
            PostProcessor::Identity { .. } => Complex64::new(1.0, 0.0),
            PostProcessor::BoundedMlp(m) => Complex64::new(m.evaluate(s), 0.0),
            PostProcessor::ComplexTable(t) => t.evaluate(s),
        }
    }

    /// `f(s)` for a `'0'/'1'` bitstring with qubit 0 first.
    pub fn evaluate_str(&self, s: &str) -> Result<Complex64> {
        if s.len() != self.n() {
            return Err(Error::QubitMismatch { expected: self.n(), got: s.len() });
        }
        Ok(self.evaluate(parse_bitstring(s)?))
    }

    /// `f` on every basis state.
    pub fn table(&self) -> Vec<Complex64> {
        (0..1usize << self.n()).map(|s| self.evaluate(s)).collect()
    }

    /// Pull back a gradient with respect to the table values.
    ///
    /// `grad_f[s]` packs `∂L/∂Re f(s) + i ∂L/∂Im f(s)`; for real-valued
    /// variants only the real part is used.
    pub fn backprop(&self, grad_f: &[Complex64]) -> Vec<f64> {
        match self {
            PostProcessor::Identity { .. } => Vec::new(),
            PostProcessor::BoundedMlp(m) => {
                let mut out = vec![0.0; m.params.len()];
                for (s, g) in grad_f.iter().enumerate() {
                    if g.re == 0.0 {
                        continue;
                    }
                    let (_, df) = m.evaluate_with_grad(s);
                    out.iter_mut().zip(df).for_each(|(o, d)| *o += g.re * d);
                }
                out
            }
            PostProcessor::ComplexTable(_) => grad_f.iter().map(|g| g.re).chain(grad_f.iter().map(|g| g.im)).collect(),
        }
    }
}

/// `r = (f(1) - f(0)) / (f(1) + f(0))` of a one-qubit real post-processor.
pub fn one_qubit_r(f: &PostProcessor) -> Result<f64> {
    if f.n() != 1 {
        return Err(Error::QubitMismatch { expected: 1, got: f.n() });
    }
    if !f.is_real() {
        return Err(Error::Config("one-qubit r needs a real post-processor".into()));
    }
    let (f0, f1) = (f.evaluate(0).re, f.evaluate(1).re);
    if f0 + f1 == 0.0 {
        return Err(Error::DivisionByZero("f(0) + f(1)"));
    }
    Ok((f1 - f0) / (f1 + f0))
}

/// Named real arrays (`phi`, `theta`, `tau`, …) saved as JSON.
///
/// Floats are written in shortest round-trip form, so a save/load cycle is bit-exact.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Checkpoint {
    pub arrays: BTreeMap<String, Vec<f64>>,
}

impl Checkpoint {
    pub fn insert(&mut self, name: &str, values: &[f64]) {
        self.arrays.insert(name.to_string(), values.to_vec());
    }

    pub fn get(&self, name: &str) -> Option<&[f64]> {
        self.arrays.get(name).map(Vec::as_slice)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        Ok(serde_json::from_str(s)?)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_json()?)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn identity_and_zero_network_are_one() {
        let id = PostProcessor::identity(3);
        let mlp = PostProcessor::BoundedMlp(BoundedMlp::zeros(3));
        for s in 0..8 {
            assert_eq!(id.evaluate(s), Complex64::new(1.0, 0.0));
            assert_eq!(mlp.evaluate(s), Complex64::new(1.0, 0.0));
        }
        assert_eq!(id.evaluate_str("101").unwrap().re, 1.0);
        assert!(id.evaluate_str("10").is_err());
    }

    #[test]
    fn one_qubit_table_matches_r_parameterisation() {
        let p: f64 = 0.05;
        let r = 2f64.sqrt() * p;
        let f = PostProcessor::ComplexTable(
            ComplexTable::from_values(1, &[Complex64::new(1.0 - r, 0.0), Complex64::new(1.0 + r, 0.0)]).unwrap(),
        );
        assert_eq!(f.evaluate(0).re, 1.0 - r);
        assert_eq!(f.evaluate(1).re, 1.0 + r);
        assert!((one_qubit_r(&f).unwrap() - r).abs() < 1e-15);
        assert_eq!(one_qubit_r(&PostProcessor::identity(1)).unwrap(), 0.0);
    }

    #[test]
    fn one_qubit_r_at_range_limits() {
        let e = std::f64::consts::E;
        let f = PostProcessor::ComplexTable(
            ComplexTable::from_values(1, &[Complex64::new(1.0 / e, 0.0), Complex64::new(e, 0.0)]).unwrap(),
        );
        // (e - 1/e)/(e + 1/e) = tanh(1)
        assert!((one_qubit_r(&f).unwrap() - 0.7615941559557649).abs() < 1e-15);
        let degenerate = PostProcessor::ComplexTable(
            ComplexTable::from_values(1, &[Complex64::new(1.0, 0.0), Complex64::new(-1.0, 0.0)]).unwrap(),
        );
        assert!(matches!(one_qubit_r(&degenerate), Err(Error::DivisionByZero(_))));
        assert!(one_qubit_r(&PostProcessor::identity(2)).is_err());
    }

    #[test]
    fn mlp_gradient_matches_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for n in 1..=4 {
            let mlp = BoundedMlp::random(n, 0.7, &mut rng);
            for s in 0..1usize << n {
                let (v, g) = mlp.evaluate_with_grad(s);
                assert_eq!(v, mlp.evaluate(s));
                for k in 0..g.len() {
                    let h = 1e-6;
                    let mut plus = mlp.clone();
                    plus.params[k] += h;
                    let mut minus = mlp.clone();
                    minus.params[k] -= h;
                    let fd = (plus.evaluate(s) - minus.evaluate(s)) / (2.0 * h);
                    assert!((fd - g[k]).abs() <= 1e-5 * fd.abs().max(1e-3), "n={n} s={s} k={k}: {fd} vs {}", g[k]);
                }
            }
        }
    }

    #[test]
    fn output_range_holds_for_random_weights() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let (lo, hi) = (std::f64::consts::E.recip(), std::f64::consts::E);
        for draw in 0..10_000 {
            let n = 1 + draw % 6;
            let mlp = BoundedMlp::random(n, 3.0, &mut rng);
            for s in 0..1usize << n {
                let v = mlp.evaluate(s);
                assert!((lo..=hi).contains(&v), "{v}");
            }
        }
    }

    #[test]
    fn checkpoint_round_trips_bit_exactly() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let mut ck = Checkpoint::default();
        let phi: Vec<f64> = (0..50).map(|_| rand::Rng::gen::<f64>(&mut rng) * 1e3 - 0.5).collect();
        ck.insert("phi", &phi);
        ck.insert("tau", &[0.1, -1e-300, 5e-324, f64::MAX]);
        let back = Checkpoint::from_json(&ck.to_json().unwrap()).unwrap();
        for (name, values) in &ck.arrays {
            let other = back.get(name).unwrap();
            assert!(values.iter().zip(other).all(|(a, b)| a.to_bits() == b.to_bits()));
        }
    }

    proptest! {
        #[test]
        fn backprop_of_table_is_identity_map(re in proptest::collection::vec(-2.0..2.0f64, 4), im in proptest::collection::vec(-2.0..2.0f64, 4)) {
            let f = PostProcessor::ComplexTable(ComplexTable::ones(2));
            let g: Vec<Complex64> = re.iter().zip(&im).map(|(&a, &b)| Complex64::new(a, b)).collect();
            let out = f.backprop(&g);
            prop_assert_eq!(&out[..4], &re[..]);
            prop_assert_eq!(&out[4..], &im[..]);
        }
    }
}
