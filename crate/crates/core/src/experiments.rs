//! Config-driven experiment runs, summary tables and scaling fits.
//!
//! A run writes, under `<root>/<output_dir>/`:
//!
//! * `summary.csv` with the columns of [`SUMMARY_COLUMNS`], in that order;
//! * `fits.csv` with the columns of [`FIT_COLUMNS`];
//! * `baseline.json` with the noiseless optimum of every seed;
//! * `runs/<hash>.csv`, one training history per run;
//! * `oracle.csv` for one-qubit `X + Z` experiments (closed-form energies).

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::estimator::{p_eff, MeasurementDistributions};
use crate::hamiltonians::{heisenberg, one_qubit_xz, tfim};
use crate::oracles::{exact_ground_energy, one_qubit_closed_forms, OneQubitChannel};
use crate::pauli::{PauliSum, DENSE_MAX_QUBITS};
use crate::postprocess::PostProcessorKind;
use crate::simulator::{AnsatzSpec, Channel, NoiseKind, NoiseModel};
use crate::training::{
    biased_gain, energy, measurement_distributions, noiseless_baseline, retraining_gain, BaselineConfig, HistoryRow,
    LearningRates, Mode, Params, Problem, Strategy, TrainConfig, TransformFamily,
};

/// Frozen column order of `summary.csv`. `m = 0` marks exact-mode runs.
pub const SUMMARY_COLUMNS: [&str; 11] = [
    "noise_kind",
    "strength",
    "strategy",
    "m",
    "mean_delta_e",
    "std_delta_e",
    "final_energy",
    "p_eff",
    "baseline_energy",
    "exact_energy",
    "runs",
];

/// Frozen column order of `fits.csv`.
///
/// `kind = shots`: `a = A`, `b = B` of `δE = B + A/M`.
/// `kind = power`: `a` = prefactor, `b` = exponent of `δE = a·p_eff^b`.
pub const FIT_COLUMNS: [&str; 7] = ["kind", "series", "noise_kind", "strength", "a", "b", "max_residual"];

// ---------------------------------------------------------------------------
// Configuration
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "model", rename_all = "snake_case", deny_unknown_fields)]
pub enum HamiltonianSpec {
    Tfim {
        n: usize,
    },
    Heisenberg {
        n: usize,
    },
    OneQubitXz,
    /// Text file of `re im OPS` lines, relative to the config file.
    File {
        path: PathBuf,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Placement {
    /// After every two-qubit gate, on both qubits it touches.
    #[default]
    TwoQubitGates,
    /// Once on every qubit after the circuit; depolarizing means `(1-p)ρ + p·I/2`.
    Terminal,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NoiseSpec {
    pub kind: NoiseKind,
    pub strengths: Vec<f64>,
    #[serde(default)]
    pub placement: Placement,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainingSpec {
    pub strategies: Vec<Strategy>,
    pub mode: Mode,
    pub epochs: usize,
    pub polish_iters: u64,
    /// Frozen shot counts `M` (biased mode only).
    pub shots: Vec<u64>,
    /// Independent sample groups per `M`.
    pub groups: usize,
    pub seeds: Vec<u64>,
    pub lr: LearningRates,
}

impl Default for TrainingSpec {
    fn default() -> Self {
        Self {
            strategies: Vec::new(),
            mode: Mode::Unbiased,
            epochs: 1500,
            polish_iters: 500,
            shots: Vec::new(),
            groups: 20,
            seeds: vec![0],
            lr: LearningRates::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BaselineSpec {
    #[serde(flatten)]
    pub search: BaselineConfig,
    /// Fixed circuit angles with identity post-processor and transformation.
    pub theta: Option<Vec<f64>>,
}

impl Default for BaselineSpec {
    fn default() -> Self {
        Self { search: BaselineConfig::default(), theta: None }
    }
}

/// Externally reported `(M, δE)` points fitted alongside the simulated ones.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PublishedSeries {
    pub label: String,
    pub m: Vec<f64>,
    pub delta_e: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub name: String,
    #[serde(default)]
    pub output_dir: Option<String>,
    #[serde(default)]
    pub master_seed: u64,
    pub hamiltonian: HamiltonianSpec,
    pub ansatz: String,
    pub noise: Vec<NoiseSpec>,
    #[serde(default)]
    pub transform: TransformFamily,
    #[serde(default = "default_post")]
    pub post: PostProcessorKind,
    #[serde(default)]
    pub training: TrainingSpec,
    #[serde(default)]
    pub baseline: BaselineSpec,
    #[serde(default)]
    pub published: Vec<PublishedSeries>,
    /// Directory relative paths are resolved against.
    #[serde(skip)]
    pub base_dir: PathBuf,
}

fn default_post() -> PostProcessorKind {
    PostProcessorKind::BoundedMlp
}

impl ExperimentConfig {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let mut cfg: Self = toml::from_str(&fs::read_to_string(path)?)?;
        cfg.base_dir = path.parent().map(Path::to_path_buf).unwrap_or_default();
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::Config(format!("{}: {msg}", self.name)));
        if self.name.trim().is_empty() {
            return Err(Error::Config("experiment name is empty".into()));
        }
        let h = self.hamiltonian()?;
        let ansatz = AnsatzSpec::parse(h.n(), &self.ansatz)?;
        if let Some(theta) = &self.baseline.theta {
            if theta.len() != ansatz.param_count() {
                return bad(format!(
                    "baseline theta has {} entries, ansatz needs {}",
                    theta.len(),
                    ansatz.param_count()
                ));
            }
        }
        if self.noise.is_empty() {
            return bad("no noise block".into());
        }
        for spec in &self.noise {
            if spec.strengths.is_empty() {
                return bad("empty strength list".into());
            }
            for &s in &spec.strengths {
                NoiseModel::new(spec.kind, s)?;
            }
        }
        let t = &self.training;
        if t.seeds.is_empty() {
            return bad("empty seed list".into());
        }
        if t.mode == Mode::Biased {
            if t.shots.is_empty() || t.shots.contains(&0) {
                return bad("biased mode needs positive shot counts".into());
            }
            if t.groups == 0 {
                return bad("biased mode needs at least one sample group".into());
            }
            if self.transform.is_complex() && t.strategies.iter().any(|s| s.t) {
                return bad("complex transformations cannot be sampled".into());
            }
        }
        for s in &t.strategies {
            TrainConfig {
                strategy: *s,
                mode: t.mode,
                shots: t.shots.first().copied(),
                lr: t.lr,
                ..TrainConfig::default()
            }
            .validate()?;
        }
        Ok(())
    }

    pub fn hamiltonian(&self) -> Result<PauliSum> {
        match &self.hamiltonian {
            HamiltonianSpec::Tfim { n } => Ok(tfim(*n)),
            HamiltonianSpec::Heisenberg { n } => Ok(heisenberg(*n)),
            HamiltonianSpec::OneQubitXz => Ok(one_qubit_xz()),
            HamiltonianSpec::File { path } => {
                let full = self.base_dir.join(path);
                let text = fs::read_to_string(&full)
                    .map_err(|e| Error::Config(format!("cannot read Hamiltonian file {}: {e}", full.display())))?;
                PauliSum::parse_text(&text)
            }
        }
    }

    /// Noiseless problem shared by every run.
    pub fn problem(&self) -> Result<Problem> {
        let h = self.hamiltonian()?;
        let ansatz = AnsatzSpec::parse(h.n(), &self.ansatz)?;
        Ok(Problem::new(h, ansatz, self.post)?.with_transform(self.transform))
    }

    pub fn output_dir(&self, root: &Path) -> PathBuf {
        root.join(self.output_dir.as_deref().unwrap_or(&self.name))
    }
}

/// Problem with the given noise attached.
pub fn noisy_problem(clean: &Problem, kind: NoiseKind, strength: f64, placement: Placement) -> Result<Problem> {
    let model = NoiseModel::new(kind, strength)?;
    Ok(match placement {
        Placement::TwoQubitGates => clean.clone().with_noise(model),
        Placement::Terminal => match kind {
            NoiseKind::None => clean.clone(),
            NoiseKind::Depolarizing => clean.clone().with_terminal_noise(Channel::depolarizing_mix(strength)),
            _ => clean.clone().with_terminal_noise(model.channel().expect("noisy kind")),
        },
    })
}

/// 64-bit seed derived from a run key and the master seed.
pub fn derive_seed(key: &str, master: u64) -> u64 {
    let digest = Sha256::new().chain_update(key.as_bytes()).chain_update(master.to_le_bytes()).finalize();
    u64::from_le_bytes(digest[..8].try_into().expect("8 bytes"))
}

fn key_hash(key: &str) -> String {
    Sha256::digest(key.as_bytes())[..8].iter().map(|b| format!("{b:02x}")).collect()
}

// ---------------------------------------------------------------------------
// Fits
// ---------------------------------------------------------------------------

/// `δE = B + A/M`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ShotScalingFit {
    pub a: f64,
    pub b: f64,
    pub max_residual: f64,
}

/// `δE = prefactor · p_eff^exponent` with a negative prefactor.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PowerLawFit {
    pub prefactor: f64,
    pub exponent: f64,
    pub max_residual: f64,
}

/// Ordinary least squares `y = intercept + slope·x`; returns `(slope, intercept, max |residual|)`.
fn least_squares(x: &[f64], y: &[f64]) -> (f64, f64, f64) {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxx: f64 = x.iter().map(|v| (v - mx).powi(2)).sum();
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let res = x.iter().zip(y).map(|(a, b)| (b - intercept - slope * a).abs()).fold(0.0, f64::max);
    (slope, intercept, res)
}

pub fn fit_shot_scaling(points: &[(f64, f64)]) -> Result<ShotScalingFit> {
    let mut distinct: Vec<f64> = points.iter().map(|p| p.0).collect();
    distinct.sort_by(f64::total_cmp);
    distinct.dedup();
    if distinct.len() < 3 || points.iter().any(|p| !(p.0 > 0.0)) {
        return Err(Error::Fit(format!("need at least 3 distinct positive M values, got {distinct:?}")));
    }
    let x: Vec<f64> = points.iter().map(|p| 1.0 / p.0).collect();
    let y: Vec<f64> = points.iter().map(|p| p.1).collect();
    let (a, b, max_residual) = least_squares(&x, &y);
    Ok(ShotScalingFit { a, b, max_residual })
}

pub fn fit_power_law(points: &[(f64, f64)]) -> Result<PowerLawFit> {
    if points.len() < 2 {
        return Err(Error::Fit("need at least 2 points".into()));
    }
    if let Some(p) = points.iter().find(|p| !(p.0 > 0.0) || !(p.1 < 0.0)) {
        return Err(Error::Fit(format!("power-law fit needs p_eff > 0 and δE < 0, got {p:?}")));
    }
    let x: Vec<f64> = points.iter().map(|p| p.0.ln()).collect();
    let y: Vec<f64> = points.iter().map(|p| (-p.1).ln()).collect();
    let (exponent, c, max_residual) = least_squares(&x, &y);
    Ok(PowerLawFit { prefactor: -c.exp(), exponent, max_residual })
}

// ---------------------------------------------------------------------------
// Running
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryRow {
    pub noise_kind: NoiseKind,
    pub strength: f64,
    pub strategy: Strategy,
    pub m: u64,
    pub mean_delta_e: f64,
    pub std_delta_e: f64,
    pub final_energy: f64,
    pub p_eff: f64,
    pub baseline_energy: f64,
    pub exact_energy: f64,
    pub runs: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitRow {
    pub kind: String,
    pub series: String,
    pub noise_kind: Option<NoiseKind>,
    pub strength: Option<f64>,
    pub a: f64,
    pub b: f64,
    pub max_residual: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentOutcome {
    pub dir: PathBuf,
    pub summary: Vec<SummaryRow>,
    pub fits: Vec<FitRow>,
    pub baselines: Vec<(u64, Params, f64)>,
    /// Violated invariants; non-empty means the run should be treated as failed.
    pub breaches: Vec<String>,
}

#[derive(Debug, Clone)]
struct Task {
    noise: usize,
    strength: f64,
    seed_index: usize,
    strategy: Strategy,
    m: u64,
    group: usize,
}

impl Task {
    fn key(&self, cfg: &ExperimentConfig) -> String {
        let kind = cfg.noise[self.noise].kind;
        format!(
            "{}|{kind:?}|{}|seed{}|{}|m{}|g{}",
            cfg.name, self.strength, cfg.training.seeds[self.seed_index], self.strategy, self.m, self.group
        )
    }
}

struct TaskResult {
    delta: f64,
    before: f64,
    after: f64,
    history: Vec<HistoryRow>,
}

/// Per (noise block, strength, seed): the noisy problem and quantities shared by its runs.
struct Environment {
    problem: Problem,
    p_eff: f64,
    distributions: Option<MeasurementDistributions>,
}

pub fn run_experiment(cfg: &ExperimentConfig, root: &Path) -> Result<ExperimentOutcome> {
    cfg.validate()?;
    let clean = cfg.problem()?;
    let exact = if clean.n() <= DENSE_MAX_QUBITS { exact_ground_energy(&clean.hamiltonian)? } else { f64::NAN };
    let t = &cfg.training;
    let mut breaches = Vec::new();

    let baselines: Vec<(u64, Params, f64)> = t
        .seeds
        .par_iter()
        .map(|&seed| -> Result<(u64, Params, f64)> {
            if let Some(theta) = &cfg.baseline.theta {
                let p = Params::with_theta(&clean, theta.clone());
                let e = energy(&clean, &p)?;
                return Ok((seed, p, e));
            }
            let search = BaselineConfig {
                seed: derive_seed(&format!("{}|baseline", cfg.name), seed ^ cfg.master_seed),
                ..cfg.baseline.search.clone()
            };
            let b = noiseless_baseline(&clean, &search)?;
            Ok((seed, b.params, b.energy))
        })
        .collect::<Result<_>>()?;

    let env_keys: Vec<(usize, f64, usize)> = cfg
        .noise
        .iter()
        .enumerate()
        .flat_map(|(i, spec)| spec.strengths.iter().map(move |&s| (i, s)))
        .flat_map(|(i, s)| (0..t.seeds.len()).map(move |k| (i, s, k)))
        .collect();
    let envs: Vec<Environment> = env_keys
        .par_iter()
        .map(|&(i, strength, k)| -> Result<Environment> {
            let spec = &cfg.noise[i];
            let problem = noisy_problem(&clean, spec.kind, strength, spec.placement)?;
            let base = &baselines[k].1;
            let vqe = Params::with_theta(&clean, base.theta.clone());
            let pe = p_eff(energy(&problem, &vqe)?, energy(&clean, &vqe)?)?;
            let distributions = if t.mode == Mode::Biased && !t.strategies.is_empty() {
                let quadrature = !problem.post_processor(&base.phi)?.is_real();
                Some(measurement_distributions(&problem, &base.theta, quadrature)?)
            } else {
                None
            };
            Ok(Environment { problem, p_eff: pe, distributions })
        })
        .collect::<Result<_>>()?;
    let env_index = |noise: usize, strength: f64, seed_index: usize| {
        env_keys
            .iter()
            .position(|&(i, s, k)| i == noise && s == strength && k == seed_index)
            .expect("known environment")
    };

    let mut tasks = Vec::new();
    for &(noise, strength, seed_index) in &env_keys {
        for &strategy in &t.strategies {
            match t.mode {
                Mode::Unbiased => tasks.push(Task { noise, strength, seed_index, strategy, m: 0, group: 0 }),
                Mode::Biased => {
                    for &m in &t.shots {
                        for group in 0..t.groups {
                            tasks.push(Task { noise, strength, seed_index, strategy, m, group });
                        }
                    }
                }
            }
        }
    }

    let results: Vec<TaskResult> = tasks
        .par_iter()
        .map(|task| -> Result<TaskResult> {
            let env = &envs[env_index(task.noise, task.strength, task.seed_index)];
            let base = &baselines[task.seed_index].1;
            let key = task.key(cfg);
            let seed = derive_seed(&key, cfg.master_seed);
            let tc = TrainConfig {
                strategy: task.strategy,
                mode: t.mode,
                epochs: t.epochs,
                lr: t.lr,
                shots: (task.m > 0).then_some(task.m),
                seed,
                init_std: 0.0,
                polish_iters: t.polish_iters,
                grad_tol: 1e-9,
            };
            let gain = match t.mode {
                Mode::Unbiased => retraining_gain(&env.problem, &tc, base)?,
                Mode::Biased => {
                    let frozen =
                        env.distributions.as_ref().expect("biased environments carry distributions").draw(task.m, seed);
                    biased_gain(&env.problem, &frozen, &tc, base)?
                }
            };
            Ok(TaskResult { delta: gain.delta, before: gain.before, after: gain.after, history: gain.history })
        })
        .collect::<Result<_>>()?;

    // Aggregate in a deterministic order.
    let strategy_rank = |s: &Strategy| t.strategies.iter().position(|x| x == s).unwrap_or(usize::MAX);
    let mut groups: BTreeMap<(usize, usize, usize, u64), Vec<usize>> = BTreeMap::new();
    for (i, task) in tasks.iter().enumerate() {
        let strength_rank = cfg.noise[task.noise].strengths.iter().position(|&s| s == task.strength).expect("strength");
        groups.entry((task.noise, strength_rank, strategy_rank(&task.strategy), task.m)).or_default().push(i);
    }
    let mut summary = Vec::new();
    for ((noise, strength_rank, _, m), idx) in &groups {
        let task = &tasks[idx[0]];
        let strength = cfg.noise[*noise].strengths[*strength_rank];
        let deltas: Vec<f64> = idx.iter().map(|&i| results[i].delta).collect();
        let (mean, std) = mean_std(&deltas);
        let pe =
            mean_std(&(0..t.seeds.len()).map(|k| envs[env_index(*noise, strength, k)].p_eff).collect::<Vec<_>>()).0;
        let row = SummaryRow {
            noise_kind: cfg.noise[*noise].kind,
            strength,
            strategy: task.strategy,
            m: *m,
            mean_delta_e: mean,
            std_delta_e: std,
            final_energy: mean_std(&idx.iter().map(|&i| results[i].after).collect::<Vec<_>>()).0,
            p_eff: pe,
            baseline_energy: mean_std(&idx.iter().map(|&i| results[i].before).collect::<Vec<_>>()).0,
            exact_energy: exact,
            runs: idx.len(),
        };
        if *m == 0 && row.final_energy < exact - 1e-8 {
            breaches.push(format!(
                "{} {:?} {} {}: energy {} below exact {}",
                cfg.name, row.noise_kind, strength, row.strategy, row.final_energy, exact
            ));
        }
        summary.push(row);
    }
    if t.strategies.is_empty() {
        for &(noise, strength, _) in env_keys.iter().filter(|k| k.2 == 0) {
            let energies: Vec<f64> = (0..t.seeds.len())
                .map(|k| energy(&envs[env_index(noise, strength, k)].problem, &baselines[k].1))
                .collect::<Result<_>>()?;
            let e = mean_std(&energies).0;
            let pe =
                mean_std(&(0..t.seeds.len()).map(|k| envs[env_index(noise, strength, k)].p_eff).collect::<Vec<_>>()).0;
            summary.push(SummaryRow {
                noise_kind: cfg.noise[noise].kind,
                strength,
                strategy: Strategy::NONE,
                m: 0,
                mean_delta_e: 0.0,
                std_delta_e: 0.0,
                final_energy: e,
                p_eff: pe,
                baseline_energy: e,
                exact_energy: exact,
                runs: t.seeds.len(),
            });
        }
    }
    for row in &summary {
        if !row.p_eff.is_finite() || !row.final_energy.is_finite() {
            breaches.push(format!("non-finite result for {:?} {} {}", row.noise_kind, row.strength, row.strategy));
        }
    }

    let fits = summary_fits(&summary, &cfg.published);

    let dir = cfg.output_dir(root);
    fs::create_dir_all(dir.join("runs"))?;
    write_csv(&dir.join("summary.csv"), &summary, &SUMMARY_COLUMNS)?;
    write_csv(&dir.join("fits.csv"), &fits, &FIT_COLUMNS)?;
    let baseline_json: Vec<_> =
        baselines.iter().map(|(seed, p, e)| serde_json::json!({ "seed": seed, "energy": e, "params": p })).collect();
    fs::write(dir.join("baseline.json"), serde_json::to_string_pretty(&baseline_json)?)?;
    for (task, res) in tasks.iter().zip(&results) {
        write_csv(&dir.join("runs").join(format!("{}.csv", key_hash(&task.key(cfg)))), &res.history, &HISTORY_COLUMNS)?;
    }
    if cfg.hamiltonian == HamiltonianSpec::OneQubitXz {
        write_one_qubit_oracle(&dir.join("oracle.csv"), &cfg.noise)?;
    }
    Ok(ExperimentOutcome { dir, summary, fits, baselines, breaches })
}

fn mean_std(v: &[f64]) -> (f64, f64) {
    let n = v.len() as f64;
    let mean = v.iter().sum::<f64>() / n;
    if v.len() < 2 {
        return (mean, 0.0);
    }
    let var = v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}

/// Shot-scaling fits per (noise, strength, strategy) and power-law fits per strategy.
pub fn summary_fits(summary: &[SummaryRow], published: &[PublishedSeries]) -> Vec<FitRow> {
    let mut fits = Vec::new();
    let mut by_series: BTreeMap<(String, String, String), (NoiseKind, f64, Vec<(f64, f64)>)> = BTreeMap::new();
    for r in summary.iter().filter(|r| r.m > 0) {
        by_series
            .entry((format!("{:?}", r.noise_kind), format!("{:020.12}", r.strength), r.strategy.to_string()))
            .or_insert((r.noise_kind, r.strength, Vec::new()))
            .2
            .push((r.m as f64, r.mean_delta_e));
    }
    for ((_, _, strategy), (kind, strength, pts)) in by_series {
        if let Ok(f) = fit_shot_scaling(&pts) {
            fits.push(FitRow {
                kind: "shots".into(),
                series: strategy,
                noise_kind: Some(kind),
                strength: Some(strength),
                a: f.a,
                b: f.b,
                max_residual: f.max_residual,
            });
        }
    }
    for p in published {
        let pts: Vec<(f64, f64)> = p.m.iter().copied().zip(p.delta_e.iter().copied()).collect();
        if let Ok(f) = fit_shot_scaling(&pts) {
            fits.push(FitRow {
                kind: "shots".into(),
                series: p.label.clone(),
                noise_kind: None,
                strength: None,
                a: f.a,
                b: f.b,
                max_residual: f.max_residual,
            });
        }
    }
    let mut by_strategy: BTreeMap<(String, String), (NoiseKind, Vec<(f64, f64)>)> = BTreeMap::new();
    for r in summary.iter().filter(|r| r.m == 0 && !r.strategy.is_empty()) {
        by_strategy
            .entry((format!("{:?}", r.noise_kind), r.strategy.to_string()))
            .or_insert((r.noise_kind, Vec::new()))
            .1
            .push((r.p_eff, r.mean_delta_e));
    }
    for ((_, strategy), (kind, pts)) in by_strategy {
        if pts.len() >= 2 {
            if let Ok(f) = fit_power_law(&pts) {
                fits.push(FitRow {
                    kind: "power".into(),
                    series: strategy,
                    noise_kind: Some(kind),
                    strength: None,
                    a: f.prefactor,
                    b: f.exponent,
                    max_residual: f.max_residual,
                });
            }
        }
    }
    fits
}

const HISTORY_COLUMNS: [&str; 5] = ["epoch", "energy", "grad_norm_q", "grad_norm_n", "grad_norm_t"];

fn write_csv<T: Serialize>(path: &Path, rows: &[T], columns: &[&str]) -> Result<()> {
    write_rows(fs::File::create(path)?, rows, columns)
}

/// Fit table in the `fits.csv` format.
pub fn write_fits<W: std::io::Write>(out: W, fits: &[FitRow]) -> Result<()> {
    write_rows(out, fits, &FIT_COLUMNS)
}

/// Header comes from the rows; `columns` is written only when there are none.
fn write_rows<W: std::io::Write, T: Serialize>(out: W, rows: &[T], columns: &[&str]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    if rows.is_empty() {
        w.write_record(columns)?;
    }
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

#[derive(Debug, Serialize)]
struct OracleRow {
    noise_kind: NoiseKind,
    strength: f64,
    e_baseline: f64,
    e_neural: f64,
    e_joint: f64,
}

fn write_one_qubit_oracle(path: &Path, noise: &[NoiseSpec]) -> Result<()> {
    let mut rows = Vec::new();
    for spec in noise {
        let channel = match spec.kind {
            NoiseKind::Depolarizing => OneQubitChannel::Depolarizing,
            NoiseKind::AmplitudeDamping => OneQubitChannel::AmplitudeDamping,
            _ => continue,
        };
        for &s in &spec.strengths {
            let r = one_qubit_closed_forms(channel, s);
            rows.push(OracleRow {
                noise_kind: spec.kind,
                strength: s,
                e_baseline: r.e_baseline,
                e_neural: r.e_neural,
                e_joint: r.e_joint,
            });
        }
    }
    write_csv(path, &rows, &["noise_kind", "strength", "e_baseline", "e_neural", "e_joint"])
}

/// Read a `summary.csv` written by [`run_experiment`].
pub fn read_summary(path: &Path) -> Result<Vec<SummaryRow>> {
    let mut r = csv::Reader::from_path(path)?;
    let headers: Vec<String> = r.headers()?.iter().map(str::to_string).collect();
    if headers != SUMMARY_COLUMNS {
        return Err(Error::Parse(format!("unexpected summary columns {headers:?}")));
    }
    r.deserialize().map(|row| row.map_err(Error::from)).collect()
}
