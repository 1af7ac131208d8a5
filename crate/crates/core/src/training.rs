//! Tri-optimization of circuit (`θ`, group `q`), post-processor (`φ`, group
//! `n`) and transformation (`τ`, group `t`) parameters.

use std::collections::BTreeSet;
use std::f64::consts::FRAC_PI_4;
use std::fmt;
use std::io::Write;
use std::str::FromStr;

use argmin::core::{CostFunction, Executor, Gradient, State};
use argmin::solver::linesearch::MoreThuenteLineSearch;
use argmin::solver::quasinewton::LBFGS;
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::estimator::{
    dressed_norm, sampled_estimate, sampled_gradient, MeasurementDistributions, QuantumState, SampleSet,
    MIN_DENOMINATOR,
};
use crate::hamiltonians::{half_layer_pairs, local_rotation_transform, swap_half_layer_transform};
use crate::pauli::{transform_hamiltonian, transform_with_gradients, Pauli, PauliSum, TransformSpec};
use crate::postprocess::{PostProcessor, PostProcessorKind};
use crate::simulator::{
    build_circuit, evolve_density, run_state, AnsatzSpec, Channel, Circuit, DensityMatrix, NoiseModel,
};

// ---------------------------------------------------------------------------
// Strategy and problem definition
// ---------------------------------------------------------------------------

/// Subset of parameter groups that are optimized.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Strategy {
    pub q: bool,
    pub n: bool,
    pub t: bool,
}

impl Strategy {
    pub const NONE: Strategy = Strategy { q: false, n: false, t: false };
    pub const ALL: Strategy = Strategy { q: true, n: true, t: true };

    pub fn is_empty(&self) -> bool {
        !(self.q || self.n || self.t)
    }
}

impl fmt::Display for Strategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<&str> =
            [(self.q, "q"), (self.n, "n"), (self.t, "t")].into_iter().filter_map(|(on, s)| on.then_some(s)).collect();
        if parts.is_empty() {
            f.write_str("none")
        } else {
            f.write_str(&parts.join("+"))
        }
    }
}

impl FromStr for Strategy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        let mut out = Strategy::NONE;
        if s.is_empty() || s.eq_ignore_ascii_case("none") {
            return Ok(out);
        }
        for part in s.split(['+', ',']).map(str::trim) {
            match part {
                "q" => out.q = true,
                "n" => out.n = true,
                "t" => out.t = true,
                other => return Err(Error::Parse(format!("unknown strategy group `{other}` in `{s}`"))),
            }
        }
        Ok(out)
    }
}

impl Serialize for Strategy {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_str(&self.to_string())
    }
}

impl<'de> Deserialize<'de> for Strategy {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        String::deserialize(d)?.parse().map_err(serde::de::Error::custom)
    }
}

/// Family of classically tracked Hamiltonian transformations.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum TransformFamily {
    #[default]
    None,
    /// `exp(iτ_i Y_i)` on every qubit.
    LocalY {
        #[serde(default)]
        complex: bool,
    },
    /// Parameterized SWAP on the pairs `(0,1), (2,3), …`.
    SwapHalfLayer {
        #[serde(default)]
        complex: bool,
    },
}

impl TransformFamily {
    pub fn is_complex(&self) -> bool {
        matches!(self, TransformFamily::LocalY { complex: true } | TransformFamily::SwapHalfLayer { complex: true })
    }

    fn factor_count(&self, n: usize) -> usize {
        match self {
            TransformFamily::None => 0,
            TransformFamily::LocalY { .. } => n,
            TransformFamily::SwapHalfLayer { .. } => half_layer_pairs(n).len(),
        }
    }

    /// Real parameters: one per factor, two (real, imaginary) for complex families.
    pub fn param_count(&self, n: usize) -> usize {
        self.factor_count(n) * if self.is_complex() { 2 } else { 1 }
    }

    pub fn build(&self, n: usize, tau: &[f64]) -> Result<TransformSpec> {
        let expected = self.param_count(n);
        if tau.len() != expected {
            return Err(Error::ParamMismatch { expected, got: tau.len() });
        }
        let angles: Vec<Complex64> = if self.is_complex() {
            tau.chunks(2).map(|c| Complex64::new(c[0], c[1])).collect()
        } else {
            tau.iter().map(|&x| Complex64::new(x, 0.0)).collect()
        };
        match self {
            TransformFamily::None => Ok(TransformSpec::identity(n)),
            TransformFamily::LocalY { .. } => local_rotation_transform(n, Pauli::Y, &angles),
            TransformFamily::SwapHalfLayer { .. } => swap_half_layer_transform(n, &angles),
        }
    }
}

/// Everything that defines an energy landscape.
#[derive(Debug, Clone)]
pub struct Problem {
    pub hamiltonian: PauliSum,
    pub ansatz: AnsatzSpec,
    pub noise: NoiseModel,
    /// Channel applied to every qubit once after the circuit (one-qubit models).
    pub terminal_noise: Option<Channel>,
    pub transform: TransformFamily,
    pub post: PostProcessorKind,
}

impl Problem {
    pub fn new(hamiltonian: PauliSum, ansatz: AnsatzSpec, post: PostProcessorKind) -> Result<Self> {
        if hamiltonian.n() != ansatz.n {
            return Err(Error::QubitMismatch { expected: ansatz.n, got: hamiltonian.n() });
        }
        Ok(Self {
            hamiltonian,
            ansatz,
            noise: NoiseModel::none(),
            terminal_noise: None,
            transform: TransformFamily::None,
            post,
        })
    }

    pub fn with_noise(mut self, noise: NoiseModel) -> Self {
        self.noise = noise;
        self
    }

    pub fn with_terminal_noise(mut self, channel: Channel) -> Self {
        self.terminal_noise = Some(channel);
        self
    }

    pub fn with_transform(mut self, family: TransformFamily) -> Self {
        self.transform = family;
        self
    }

    pub fn n(&self) -> usize {
        self.ansatz.n
    }

    /// The same problem with every noise source removed.
    pub fn noiseless(&self) -> Self {
        Self { noise: NoiseModel::none(), terminal_noise: None, ..self.clone() }
    }

    pub fn is_noiseless(&self) -> bool {
        self.noise.is_noiseless() && self.terminal_noise.is_none()
    }

    pub fn circuit(&self, theta: &[f64]) -> Result<Circuit> {
        build_circuit(&self.ansatz, theta)
    }

    /// Simulated output state; a state vector when the problem is noiseless.
    pub fn state(&self, theta: &[f64]) -> Result<QuantumState> {
        let c = self.circuit(theta)?;
        if self.is_noiseless() {
            return Ok(QuantumState::Pure(run_state(&c)?));
        }
        Ok(QuantumState::Mixed(self.density(&c)?))
    }

    pub fn density(&self, c: &Circuit) -> Result<DensityMatrix> {
        let mut rho = DensityMatrix::zero_state(c.n)?;
        evolve_density(&mut rho, c, &self.noise);
        if let Some(ch) = &self.terminal_noise {
            (0..c.n).for_each(|q| rho.apply_channel(q, ch));
        }
        Ok(rho)
    }

    pub fn post_processor(&self, phi: &[f64]) -> Result<PostProcessor> {
        let mut f = self.post.init(self.n(), 0.0, &mut ChaCha8Rng::seed_from_u64(0));
        f.set_params(phi)?;
        Ok(f)
    }

    pub fn transform_spec(&self, tau: &[f64]) -> Result<TransformSpec> {
        self.transform.build(self.n(), tau)
    }
}

/// Parameter vectors of the three groups.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Params {
    pub theta: Vec<f64>,
    pub phi: Vec<f64>,
    pub tau: Vec<f64>,
}

impl Params {
    /// `θ, τ ~ N(0, std²)`; `φ` from the post-processor's own initialiser.
    pub fn init<R: Rng + ?Sized>(problem: &Problem, std: f64, rng: &mut R) -> Self {
        let normal = Normal::new(0.0, std.max(0.0)).expect("finite std");
        let mut draw = |k: usize| -> Vec<f64> { (0..k).map(|_| normal.sample(rng)).collect() };
        let theta = draw(problem.ansatz.param_count());
        let tau = draw(problem.transform.param_count(problem.n()));
        let phi = problem.post.init(problem.n(), std, rng).params().to_vec();
        let tau = if problem.transform.is_complex() {
            // Imaginary parts start at zero so the initial transformation is unitary.
            tau.iter().enumerate().map(|(i, &x)| if i % 2 == 1 { 0.0 } else { x }).collect()
        } else {
            tau
        };
        Self { theta, phi, tau }
    }

    /// Identity post-processor and transformation with the given circuit angles.
    pub fn with_theta(problem: &Problem, theta: Vec<f64>) -> Self {
        let phi = problem.post.init(problem.n(), 0.0, &mut ChaCha8Rng::seed_from_u64(0)).params().to_vec();
        Self { theta, phi, tau: vec![0.0; problem.transform.param_count(problem.n())] }
    }

    fn pack(&self, s: Strategy) -> Vec<f64> {
        let mut v = Vec::new();
        if s.q {
            v.extend_from_slice(&self.theta);
        }
        if s.n {
            v.extend_from_slice(&self.phi);
        }
        if s.t {
            v.extend_from_slice(&self.tau);
        }
        v
    }

    fn unpack(&self, s: Strategy, x: &[f64]) -> Self {
        let mut out = self.clone();
        let mut k = 0;
        for (on, dst) in [(s.q, &mut out.theta), (s.n, &mut out.phi), (s.t, &mut out.tau)] {
            if on {
                let len = dst.len();
                dst.copy_from_slice(&x[k..k + len]);
                k += len;
            }
        }
        out
    }
}

// ---------------------------------------------------------------------------
// Exact-mode evaluation and gradients
// ---------------------------------------------------------------------------

/// Energy with gradients for the requested groups (empty vectors otherwise).
#[derive(Debug, Clone, PartialEq)]
pub struct Evaluation {
    pub energy: f64,
    pub numerator: f64,
    pub denominator: f64,
    pub grad_theta: Vec<f64>,
    pub grad_phi: Vec<f64>,
    pub grad_tau: Vec<f64>,
}

impl Evaluation {
    fn packed(&self, s: Strategy) -> Vec<f64> {
        let mut v = Vec::new();
        if s.q {
            v.extend_from_slice(&self.grad_theta);
        }
        if s.n {
            v.extend_from_slice(&self.grad_phi);
        }
        if s.t {
            v.extend_from_slice(&self.grad_tau);
        }
        v
    }
}

fn norm2(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |acc, x| acc + x * x).sqrt()
}

/// Exact energy of `params`.
pub fn energy(problem: &Problem, params: &Params) -> Result<f64> {
    Ok(evaluate(problem, params, Strategy::NONE, None)?.energy)
}

/// Exact energy and gradients. `state` may carry the simulated output for `params.theta`.
pub fn evaluate(
    problem: &Problem,
    params: &Params,
    want: Strategy,
    state: Option<&QuantumState>,
) -> Result<Evaluation> {
    let n = problem.n();
    let owned;
    let state = match state {
        Some(s) => s,
        None => {
            owned = problem.state(&params.theta)?;
            &owned
        }
    };
    let f = problem.post_processor(&params.phi)?;
    let table = f.table();
    let t = problem.transform_spec(&params.tau)?;
    let complex = problem.transform.is_complex();
    let identity = PauliSum::identity(n);

    let (hp, h_grads) = if want.t {
        let jet = transform_with_gradients(&problem.hamiltonian, &t)?;
        (jet.value, jet.grads)
    } else {
        (transform_hamiltonian(&problem.hamiltonian, &t)?, Vec::new())
    };
    let (norm, norm_grads) = match (complex, want.t) {
        (false, _) => (None, Vec::new()),
        (true, true) => {
            let jet = transform_with_gradients(&identity, &t)?;
            (Some(jet.value), jet.grads)
        }
        (true, false) => (Some(transform_hamiltonian(&identity, &t)?), Vec::new()),
    };

    let num = state.dressed_expectation(&table, &hp);
    let den = dressed_norm(state, &table, norm.as_ref());
    if den.abs() < MIN_DENOMINATOR || !den.is_finite() {
        return Err(Error::ZeroDenominator(den));
    }
    let e = num / den;

    let grad_phi = if want.n {
        let gn = state.dressed_gradient(&table, &hp);
        let gd = state.dressed_gradient(&table, norm.as_ref().unwrap_or(&identity));
        let g: Vec<Complex64> = gn.iter().zip(&gd).map(|(a, b)| (a - b * e) / den).collect();
        f.backprop(&g)
    } else {
        Vec::new()
    };

    let mut grad_tau = Vec::new();
    for (j, (d_re, d_im)) in h_grads.iter().enumerate() {
        let part = |dh: &PauliSum, dn: Option<&PauliSum>| {
            let dd = dn.map_or(0.0, |d| state.dressed_expectation(&table, d));
            (state.dressed_expectation(&table, dh) - e * dd) / den
        };
        if complex {
            grad_tau.push(part(d_re, Some(&norm_grads[j].0)));
            grad_tau.push(part(d_im, Some(&norm_grads[j].1)));
        } else {
            grad_tau.push(part(d_re, None));
        }
    }

    let grad_theta = if want.q {
        let mut g = Vec::with_capacity(params.theta.len());
        for k in 0..params.theta.len() {
            let mut parts = [(0.0, 0.0); 2];
            for (slot, shift) in parts.iter_mut().zip([FRAC_PI_4, -FRAC_PI_4]) {
                let mut th = params.theta.clone();
                th[k] += shift;
                let s = problem.state(&th)?;
                *slot = (s.dressed_expectation(&table, &hp), dressed_norm(&s, &table, norm.as_ref()));
            }
            let (dn, dd) = (parts[0].0 - parts[1].0, parts[0].1 - parts[1].1);
            g.push((dn - e * dd) / den);
        }
        g
    } else {
        Vec::new()
    };

    Ok(Evaluation { energy: e, numerator: num, denominator: den, grad_theta, grad_phi, grad_tau })
}

/// `∂E/∂θ` by the two-term shift rule applied to numerator and denominator.
pub fn grad_quantum(problem: &Problem, params: &Params) -> Result<Vec<f64>> {
    Ok(evaluate(problem, params, Strategy { q: true, n: false, t: false }, None)?.grad_theta)
}

/// `(∂E/∂φ, ∂E/∂τ)` by the chain rule through the estimator.
pub fn grad_classical(problem: &Problem, params: &Params) -> Result<(Vec<f64>, Vec<f64>)> {
    let ev = evaluate(problem, params, Strategy { q: false, n: true, t: true }, None)?;
    Ok((ev.grad_phi, ev.grad_tau))
}

// ---------------------------------------------------------------------------
// Frozen-sample evaluation
// ---------------------------------------------------------------------------

/// Every Pauli string reachable by the problem's transformation family, found
/// by transforming with generic angles.
pub fn closure_strings(problem: &Problem, seed: u64) -> Result<BTreeSet<Vec<Pauli>>> {
    if problem.transform.is_complex() {
        return Err(Error::NonUnitarySampling);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out: BTreeSet<Vec<Pauli>> = problem.hamiltonian.terms().iter().map(|t| t.ops.clone()).collect();
    for _ in 0..2 {
        let tau: Vec<f64> = (0..problem.transform.param_count(problem.n())).map(|_| rng.gen_range(0.1..1.4)).collect();
        let hp = transform_hamiltonian(&problem.hamiltonian, &problem.transform_spec(&tau)?)?;
        out.extend(hp.terms().iter().map(|t| t.ops.clone()));
    }
    out.retain(|ops| ops.iter().any(|p| *p != Pauli::I));
    Ok(out)
}

/// Measurement distributions for the circuit at `theta`, covering every
/// string the transformation family can produce.
pub fn measurement_distributions(
    problem: &Problem,
    theta: &[f64],
    quadrature: bool,
) -> Result<MeasurementDistributions> {
    let strings = closure_strings(problem, 0x5eed)?;
    let rho = problem.density(&problem.circuit(theta)?)?;
    MeasurementDistributions::from_density(&rho, strings, quadrature)
}

/// Frozen-sample energy and classical gradients.
pub fn evaluate_sampled(problem: &Problem, params: &Params, samples: &SampleSet, want: Strategy) -> Result<Evaluation> {
    if want.q {
        return Err(Error::Config("circuit gradients need fresh samples".into()));
    }
    let f = problem.post_processor(&params.phi)?;
    let table = f.table();
    let t = problem.transform_spec(&params.tau)?;
    if !t.is_unitary() || problem.transform.is_complex() {
        return Err(Error::NonUnitarySampling);
    }
    let real = f.is_real();
    let (hp, grads) = if want.t {
        let jet = transform_with_gradients(&problem.hamiltonian, &t)?;
        (jet.value, jet.grads)
    } else {
        (transform_hamiltonian(&problem.hamiltonian, &t)?, Vec::new())
    };
    let (energy, grad_phi, denominator) = if want.n {
        let (e, g) = sampled_gradient(&hp, samples, &table, real)?;
        (e, f.backprop(&g), f64::NAN)
    } else {
        let est = sampled_estimate(hp.terms().iter().map(|t| t.ops.as_slice()), samples, &table, real)?;
        (est.expectation(&hp)?, Vec::new(), est.denominator)
    };
    let grad_tau = if want.t {
        let strings = grads.iter().flat_map(|(d, _)| d.terms().iter().map(|t| t.ops.as_slice()));
        let est = sampled_estimate(strings, samples, &table, real)?;
        grads.iter().map(|(d, _)| est.expectation(d)).collect::<Result<Vec<_>>>()?
    } else {
        Vec::new()
    };
    Ok(Evaluation { energy, numerator: energy * denominator, denominator, grad_theta: Vec::new(), grad_phi, grad_tau })
}

// ---------------------------------------------------------------------------
// Optimizer
// ---------------------------------------------------------------------------

/// Adam with `β1 = 0.9`, `β2 = 0.999`, `ε = 1e-8`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Adam {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    m: Vec<f64>,
    v: Vec<f64>,
    t: u64,
}

impl Adam {
    pub fn new(lr: f64, size: usize) -> Self {
        Self { lr, beta1: 0.9, beta2: 0.999, eps: 1e-8, m: vec![0.0; size], v: vec![0.0; size], t: 0 }
    }

    pub fn step(&mut self, params: &mut [f64], grad: &[f64]) {
        self.t += 1;
        let b1t = 1.0 - self.beta1.powi(self.t as i32);
        let b2t = 1.0 - self.beta2.powi(self.t as i32);
        for i in 0..params.len() {
            self.m[i] = self.beta1 * self.m[i] + (1.0 - self.beta1) * grad[i];
            self.v[i] = self.beta2 * self.v[i] + (1.0 - self.beta2) * grad[i] * grad[i];
            let mh = self.m[i] / b1t;
            let vh = self.v[i] / b2t;
            params[i] -= self.lr * mh / (vh.sqrt() + self.eps);
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LearningRates {
    pub q: f64,
    pub n: f64,
    pub t: f64,
}

impl Default for LearningRates {
    fn default() -> Self {
        Self { q: 0.005, n: 0.01, t: 0.003 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    /// Fresh estimates every epoch (exact when `shots` is `None`).
    #[default]
    Unbiased,
    /// Classical groups only, against one frozen sample set.
    Biased,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub strategy: Strategy,
    pub mode: Mode,
    pub epochs: usize,
    pub lr: LearningRates,
    /// Shots per group: per epoch when unbiased (`None` = exact), frozen `M` when biased.
    pub shots: Option<u64>,
    pub seed: u64,
    pub init_std: f64,
    /// L-BFGS iterations run after Adam (exact or frozen-sample objectives only).
    pub polish_iters: u64,
    pub grad_tol: f64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            strategy: Strategy::NONE,
            mode: Mode::Unbiased,
            epochs: 1000,
            lr: LearningRates::default(),
            shots: None,
            seed: 0,
            init_std: 0.1,
            polish_iters: 0,
            grad_tol: 1e-6,
        }
    }
}

impl TrainConfig {
    pub fn new(strategy: Strategy, epochs: usize) -> Self {
        Self { strategy, epochs, ..Self::default() }
    }

    pub fn with_polish(mut self, iters: u64) -> Self {
        self.polish_iters = iters;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.mode == Mode::Biased && self.strategy.q {
            return Err(Error::Config("biased retraining cannot update circuit parameters".into()));
        }
        if self.mode == Mode::Biased && self.shots.is_none() {
            return Err(Error::Config("biased retraining needs a frozen shot count".into()));
        }
        for lr in [self.lr.q, self.lr.n, self.lr.t] {
            if !(lr > 0.0) {
                return Err(Error::Config(format!("learning rate must be positive, got {lr}")));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HistoryRow {
    pub epoch: usize,
    pub energy: f64,
    pub grad_norm_q: f64,
    pub grad_norm_n: f64,
    pub grad_norm_t: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainState {
    pub params: Params,
    pub best_params: Params,
    pub best_energy: f64,
    pub epoch: usize,
    pub history: Vec<HistoryRow>,
    adam: [Adam; 3],
}

impl TrainState {
    fn new(params: Params, lr: &LearningRates) -> Self {
        let adam =
            [Adam::new(lr.q, params.theta.len()), Adam::new(lr.n, params.phi.len()), Adam::new(lr.t, params.tau.len())];
        Self { best_params: params.clone(), params, best_energy: f64::INFINITY, epoch: 0, history: Vec::new(), adam }
    }

    fn record(&mut self, ev: &Evaluation, at: &Params) -> Result<()> {
        if !ev.energy.is_finite() {
            return Err(Error::Diverged { epoch: self.epoch, energy: ev.energy });
        }
        self.history.push(HistoryRow {
            epoch: self.epoch,
            energy: ev.energy,
            grad_norm_q: norm2(&ev.grad_theta),
            grad_norm_n: norm2(&ev.grad_phi),
            grad_norm_t: norm2(&ev.grad_tau),
        });
        if ev.energy < self.best_energy {
            self.best_energy = ev.energy;
            self.best_params = at.clone();
        }
        Ok(())
    }

    fn step(&mut self, s: Strategy, ev: &Evaluation) {
        if s.q {
            self.adam[0].step(&mut self.params.theta, &ev.grad_theta);
        }
        if s.n {
            self.adam[1].step(&mut self.params.phi, &ev.grad_phi);
        }
        if s.t {
            self.adam[2].step(&mut self.params.tau, &ev.grad_tau);
        }
        self.epoch += 1;
    }

    /// Best-so-far energy after each recorded epoch.
    pub fn best_so_far(&self) -> Vec<f64> {
        self.history
            .iter()
            .scan(f64::INFINITY, |best, r| {
                *best = best.min(r.energy);
                Some(*best)
            })
            .collect()
    }

    pub fn write_history<W: Write>(&self, w: W) -> Result<()> {
        let mut out = csv::Writer::from_writer(w);
        for row in &self.history {
            out.serialize(row)?;
        }
        out.flush()?;
        Ok(())
    }
}

struct Objective<'a> {
    f: &'a dyn Fn(&[f64]) -> Result<(f64, Vec<f64>)>,
}

impl CostFunction for Objective<'_> {
    type Param = Vec<f64>;
    type Output = f64;

    fn cost(&self, x: &Vec<f64>) -> std::result::Result<f64, argmin::core::Error> {
        (self.f)(x).map(|r| r.0).map_err(|e| argmin::core::Error::msg(e.to_string()))
    }
}

impl Gradient for Objective<'_> {
    type Param = Vec<f64>;
    type Gradient = Vec<f64>;

    fn gradient(&self, x: &Vec<f64>) -> std::result::Result<Vec<f64>, argmin::core::Error> {
        (self.f)(x).map(|r| r.1).map_err(|e| argmin::core::Error::msg(e.to_string()))
    }
}

/// L-BFGS from `x0`; returns the best point found or `None` if the solver failed.
fn lbfgs(
    f: &dyn Fn(&[f64]) -> Result<(f64, Vec<f64>)>,
    x0: Vec<f64>,
    iters: u64,
    grad_tol: f64,
) -> Option<(Vec<f64>, f64)> {
    let solver = LBFGS::new(MoreThuenteLineSearch::new(), 10)
        .with_tolerance_grad(grad_tol)
        .ok()?
        .with_tolerance_cost(0.0)
        .ok()?;
    let res = Executor::new(Objective { f }, solver).configure(|s| s.param(x0).max_iters(iters)).run().ok()?;
    let state = res.state();
    let best = state.get_best_param()?.clone();
    let cost = state.get_best_cost();
    cost.is_finite().then_some((best, cost))
}

fn polish(
    state: &mut TrainState,
    s: Strategy,
    iters: u64,
    grad_tol: f64,
    eval: &dyn Fn(&Params, Strategy) -> Result<Evaluation>,
) -> Result<()> {
    if iters == 0 || s.is_empty() {
        return Ok(());
    }
    let base = state.best_params.clone();
    let objective = |x: &[f64]| -> Result<(f64, Vec<f64>)> {
        let ev = eval(&base.unpack(s, x), s)?;
        Ok((ev.energy, ev.packed(s)))
    };
    if let Some((x, _)) = lbfgs(&objective, base.pack(s), iters, grad_tol) {
        let p = base.unpack(s, &x);
        let ev = eval(&p, s)?;
        state.record(&ev, &p)?;
        state.params = p;
    }
    Ok(())
}

/// Unbiased training from `init`; returns the final state with its history.
pub fn train(problem: &Problem, config: &TrainConfig, init: Params) -> Result<TrainState> {
    config.validate()?;
    if config.mode == Mode::Biased {
        return Err(Error::Config("use biased_retrain for frozen-sample training".into()));
    }
    let s = config.strategy;
    let mut st = TrainState::new(init, &config.lr);
    match config.shots {
        None => {
            let cached = if s.q { None } else { Some(problem.state(&st.params.theta)?) };
            let eval = |p: &Params, want: Strategy| evaluate(problem, p, want, cached.as_ref());
            for _ in 0..config.epochs {
                let at = st.params.clone();
                let ev = eval(&at, s)?;
                st.record(&ev, &at)?;
                st.step(s, &ev);
            }
            let at = st.params.clone();
            st.record(&eval(&at, s)?, &at)?;
            polish(&mut st, s, config.polish_iters, config.grad_tol, &eval)?;
        }
        Some(shots) => {
            for _ in 0..config.epochs {
                let at = st.params.clone();
                let ev = evaluate_fresh_samples(problem, &at, s, shots, config.seed, st.epoch as u64)?;
                st.record(&ev, &at)?;
                st.step(s, &ev);
            }
            let at = st.params.clone();
            let ev = evaluate_fresh_samples(problem, &at, s, shots, config.seed, st.epoch as u64)?;
            st.record(&ev, &at)?;
        }
    }
    Ok(st)
}

fn sub_seed(seed: u64, a: u64, b: u64) -> u64 {
    let mut x = seed ^ a.wrapping_mul(0x9E37_79B9_7F4A_7C15) ^ b.wrapping_mul(0xD1B5_4A32_D192_ED03);
    x ^= x >> 31;
    x = x.wrapping_mul(0xBF58_476D_1CE4_E5B9);
    x ^ (x >> 29)
}

/// One unbiased sampled step: fresh samples for the energy and classical
/// gradients, fresh samples at shifted angles for the circuit gradient.
fn evaluate_fresh_samples(
    problem: &Problem,
    p: &Params,
    s: Strategy,
    shots: u64,
    seed: u64,
    epoch: u64,
) -> Result<Evaluation> {
    let draw = |theta: &[f64], k: u64| -> Result<SampleSet> {
        Ok(measurement_distributions(problem, theta, !problem.post_processor(&p.phi)?.is_real())?
            .draw(shots, sub_seed(seed, epoch, k)))
    };
    let classical = Strategy { q: false, ..s };
    let mut ev = evaluate_sampled(problem, p, &draw(&p.theta, 0)?, classical)?;
    if s.q {
        let f = problem.post_processor(&p.phi)?;
        let table = f.table();
        let hp = transform_hamiltonian(&problem.hamiltonian, &problem.transform_spec(&p.tau)?)?;
        let parts = |samples: &SampleSet| -> Result<(f64, f64)> {
            let est = sampled_estimate(hp.terms().iter().map(|t| t.ops.as_slice()), samples, &table, f.is_real())?;
            Ok((est.expectation(&hp)? * est.denominator, est.denominator))
        };
        let (num, den) = parts(&draw(&p.theta, 1)?)?;
        let e = num / den;
        let mut g = Vec::with_capacity(p.theta.len());
        for k in 0..p.theta.len() {
            let mut plus = p.theta.clone();
            let mut minus = p.theta.clone();
            plus[k] += FRAC_PI_4;
            minus[k] -= FRAC_PI_4;
            let (np, dp) = parts(&draw(&plus, 2 * k as u64 + 2)?)?;
            let (nm, dm) = parts(&draw(&minus, 2 * k as u64 + 3)?)?;
            g.push(((np - nm) - e * (dp - dm)) / den);
        }
        ev.grad_theta = g;
    }
    Ok(ev)
}

/// Classical-only retraining against a frozen sample set; no simulator calls.
pub fn biased_retrain(problem: &Problem, frozen: &SampleSet, config: &TrainConfig, init: Params) -> Result<TrainState> {
    let config =
        TrainConfig { mode: Mode::Biased, shots: Some(config.shots.unwrap_or(frozen.base.shots)), ..config.clone() };
    config.validate()?;
    let s = config.strategy;
    let eval = |p: &Params, want: Strategy| evaluate_sampled(problem, p, frozen, want);
    let mut st = TrainState::new(init, &config.lr);
    for _ in 0..config.epochs {
        let at = st.params.clone();
        let ev = eval(&at, s)?;
        st.record(&ev, &at)?;
        st.step(s, &ev);
    }
    let at = st.params.clone();
    st.record(&eval(&at, s)?, &at)?;
    polish(&mut st, s, config.polish_iters, config.grad_tol, &eval)?;
    Ok(st)
}

// ---------------------------------------------------------------------------
// Baselines and retraining gains
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct BaselineConfig {
    pub starts: usize,
    pub epochs: usize,
    pub polish_iters: u64,
    pub init_std: f64,
    pub seed: u64,
    pub lr: LearningRates,
}

impl Default for BaselineConfig {
    fn default() -> Self {
        Self { starts: 8, epochs: 1500, polish_iters: 2000, init_std: 0.1, seed: 0, lr: LearningRates::default() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Baseline {
    pub params: Params,
    pub energy: f64,
    pub grad_norm: f64,
}

/// Noiseless optimum of every parameter group, best of several random starts.
pub fn noiseless_baseline(problem: &Problem, config: &BaselineConfig) -> Result<Baseline> {
    let clean = problem.noiseless();
    let s = Strategy { q: true, n: true, t: clean.transform != TransformFamily::None };
    let mut best: Option<Baseline> = None;
    for k in 0..config.starts {
        let mut rng = ChaCha8Rng::seed_from_u64(sub_seed(config.seed, 0xba5e, k as u64));
        let init = Params::init(&clean, config.init_std, &mut rng);
        let tc = TrainConfig {
            strategy: s,
            epochs: config.epochs,
            lr: config.lr,
            polish_iters: config.polish_iters,
            grad_tol: 1e-9,
            ..TrainConfig::default()
        };
        let st = match train(&clean, &tc, init) {
            Ok(st) => st,
            Err(Error::Diverged { .. } | Error::ZeroDenominator(_)) => continue,
            Err(e) => return Err(e),
        };
        if best.as_ref().map_or(true, |b| st.best_energy < b.energy) {
            let ev = evaluate(&clean, &st.best_params, s, None)?;
            best = Some(Baseline { grad_norm: norm2(&ev.packed(s)), energy: ev.energy, params: st.best_params });
        }
    }
    best.ok_or_else(|| Error::Config("every baseline start diverged".into()))
}

/// Noisy energies before and after retraining from a baseline.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Gain {
    pub before: f64,
    pub after: f64,
    pub delta: f64,
    pub params: Params,
    pub history: Vec<HistoryRow>,
}

/// `δE = E(retrained) - E(baseline)`, both evaluated exactly on the noisy problem.
pub fn retraining_gain(problem: &Problem, config: &TrainConfig, baseline: &Params) -> Result<Gain> {
    let before = energy(problem, baseline)?;
    if config.strategy.is_empty() {
        return Ok(Gain { before, after: before, delta: 0.0, params: baseline.clone(), history: Vec::new() });
    }
    let st = train(problem, config, baseline.clone())?;
    let after = st.best_energy.min(before);
    let params = if st.best_energy < before { st.best_params } else { baseline.clone() };
    Ok(Gain { before, after, delta: after - before, params, history: st.history })
}

/// Biased gain on one frozen sample set: frozen-sample energy after minus before.
pub fn biased_gain(problem: &Problem, frozen: &SampleSet, config: &TrainConfig, baseline: &Params) -> Result<Gain> {
    let before = evaluate_sampled(problem, baseline, frozen, Strategy::NONE)?.energy;
    let st = biased_retrain(problem, frozen, config, baseline.clone())?;
    let after = st.best_energy.min(before);
    let params = if st.best_energy < before { st.best_params } else { baseline.clone() };
    Ok(Gain { before, after, delta: after - before, params, history: st.history })
}
