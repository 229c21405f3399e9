//! Pairwise kinetic money exchange.
//!
//! Every interaction picks two distinct agents `i` and `j` and a fresh
//! `ε ~ U[0,1)`, pools the unsaved parts of their money and splits the pool:
//!
//! ```text
//! Δ   = (1 − λi)·xi + (1 − λj)·xj
//! xi' = λi·xi + ε·Δ
//! xj' = λj·xj + (1 − ε)·Δ
//! ```
//!
//! DY is the `λ = 0` case, CC uses one global `λ`, and CCM draws a per-agent
//! `λi` once from `U[lo, hi]`. A sweep is `N` interactions.
//!
//! All randomness comes from a single [`SimRng`] stream seeded from the run's
//! 64-bit seed, so `(config, seed)` fully determines a run.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::numeric::{compensated_sum, relative_diff};

/// The simulation's random stream: ChaCha with 8 rounds, seeded through
/// [`SeedableRng::seed_from_u64`]. Its output is stable across platforms and
/// crate releases, which is what makes replays bit-identical.
pub type SimRng = ChaCha8Rng;

pub fn seeded_rng(seed: u64) -> SimRng {
    SimRng::seed_from_u64(seed)
}

/// Upper bound on CCM propensities used when none is configured.
pub const DEFAULT_CCM_LAMBDA_HI: f64 = 0.9999;

/// Relative tolerance of the per-snapshot `total_money` check value.
pub const SNAPSHOT_TOTAL_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EngineError {
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("invalid population state: {0}")]
    InvalidState(String),
}

pub type Result<T, E = EngineError> = std::result::Result<T, E>;

/// Incomes of the agent economy, with optional per-agent saving propensities.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Population {
    incomes: Vec<f64>,
    savings: Option<Vec<f64>>,
}

impl Population {
    pub fn new(incomes: Vec<f64>) -> Result<Self> {
        check_incomes(&incomes)?;
        Ok(Self {
            incomes,
            savings: None,
        })
    }

    pub fn with_savings(incomes: Vec<f64>, savings: Vec<f64>) -> Result<Self> {
        check_incomes(&incomes)?;
        if savings.len() != incomes.len() {
            return Err(EngineError::InvalidState(format!(
                "{} savings propensities for {} agents",
                savings.len(),
                incomes.len()
            )));
        }
        if let Some(bad) = savings.iter().find(|l| !(0.0..1.0).contains(*l)) {
            return Err(EngineError::InvalidState(format!(
                "saving propensity {bad} outside [0, 1)"
            )));
        }
        Ok(Self {
            incomes,
            savings: Some(savings),
        })
    }

    pub fn incomes(&self) -> &[f64] {
        &self.incomes
    }

    pub fn savings(&self) -> Option<&[f64]> {
        self.savings.as_deref()
    }

    pub fn len(&self) -> usize {
        self.incomes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.incomes.is_empty()
    }

    pub fn total(&self) -> f64 {
        compensated_sum(self.incomes.iter().copied())
    }

    pub(crate) fn incomes_mut(&mut self) -> &mut [f64] {
        &mut self.incomes
    }

    pub(crate) fn push_agent(&mut self, income: f64, propensity: Option<f64>) {
        self.incomes.push(income);
        if let (Some(savings), Some(l)) = (self.savings.as_mut(), propensity) {
            savings.push(l);
        }
    }

    /// Drops the agents at `indices` (any order, no duplicates) and returns the
    /// money they held.
    pub(crate) fn remove_agents(&mut self, indices: &[usize]) -> f64 {
        let mut doomed = vec![false; self.incomes.len()];
        for &i in indices {
            doomed[i] = true;
        }
        let removed = compensated_sum(indices.iter().map(|&i| self.incomes[i]));
        let mut keep = doomed.iter().map(|d| !d);
        self.incomes.retain(|_| keep.next().unwrap());
        if let Some(savings) = self.savings.as_mut() {
            let mut keep = doomed.iter().map(|d| !d);
            savings.retain(|_| keep.next().unwrap());
        }
        removed
    }
}

fn check_incomes(incomes: &[f64]) -> Result<()> {
    match incomes.iter().position(|x| !(x.is_finite() && *x >= 0.0)) {
        Some(i) => Err(EngineError::InvalidState(format!(
            "agent {i} has invalid income {}",
            incomes[i]
        ))),
        None => Ok(()),
    }
}

/// Which exchange variant drives the run.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
pub enum ModelSpec {
    /// Pure random exchange, no saving.
    Dy,
    /// One saving propensity shared by every agent.
    Cc { lambda: f64 },
    /// Per-agent propensities drawn once from `U[lambda_lo, lambda_hi]`.
    Ccm {
        #[serde(default)]
        lambda_lo: f64,
        #[serde(default = "default_lambda_hi")]
        lambda_hi: f64,
    },
}

fn default_lambda_hi() -> f64 {
    DEFAULT_CCM_LAMBDA_HI
}

impl ModelSpec {
    pub fn ccm_default() -> Self {
        ModelSpec::Ccm {
            lambda_lo: 0.0,
            lambda_hi: DEFAULT_CCM_LAMBDA_HI,
        }
    }

    pub fn validate(&self) -> Result<()> {
        match *self {
            ModelSpec::Dy => Ok(()),
            ModelSpec::Cc { lambda } if (0.0..1.0).contains(&lambda) => Ok(()),
            ModelSpec::Cc { lambda } => Err(EngineError::InvalidConfig(format!(
                "CC lambda {lambda} outside [0, 1)"
            ))),
            ModelSpec::Ccm {
                lambda_lo,
                lambda_hi,
            } if 0.0 <= lambda_lo && lambda_lo <= lambda_hi && lambda_hi < 1.0 => Ok(()),
            ModelSpec::Ccm {
                lambda_lo,
                lambda_hi,
            } => Err(EngineError::InvalidConfig(format!(
                "CCM propensity range [{lambda_lo}, {lambda_hi}] must satisfy 0 <= lo <= hi < 1"
            ))),
        }
    }

    pub fn tag(&self) -> &'static str {
        match self {
            ModelSpec::Dy => "dy",
            ModelSpec::Cc { .. } => "cc",
            ModelSpec::Ccm { .. } => "ccm",
        }
    }

    /// Draws a fresh per-agent propensity; `None` for models without one.
    pub fn draw_propensity<R: Rng + ?Sized>(&self, rng: &mut R) -> Option<f64> {
        match *self {
            ModelSpec::Ccm {
                lambda_lo,
                lambda_hi,
            } => {
                let u: f64 = rng.gen();
                // u < 1, so the draw stays strictly below lambda_hi < 1 unless lo == hi
                Some(lambda_lo + (lambda_hi - lambda_lo) * u)
            }
            _ => None,
        }
    }
}

/// How the initial money is laid out.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "policy", rename_all = "lowercase", deny_unknown_fields)]
pub enum InitPolicy {
    /// Everyone starts with `M / N`.
    Equal,
    /// Agent 0 holds all the money.
    Delta,
    /// Incomes given verbatim; must have `N` entries summing to `M`.
    Explicit { incomes: Vec<f64> },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub agent_count: usize,
    pub total_money: f64,
    pub model: ModelSpec,
    pub init: InitPolicy,
    pub seed: u64,
    pub sweeps: u64,
    pub snapshot_every: u64,
}

impl RunConfig {
    pub fn validate(&self) -> Result<()> {
        if self.agent_count < 2 {
            return Err(EngineError::InvalidConfig(format!(
                "agent_count must be >= 2, got {}",
                self.agent_count
            )));
        }
        if !(self.total_money.is_finite() && self.total_money > 0.0) {
            return Err(EngineError::InvalidConfig(format!(
                "total_money must be positive, got {}",
                self.total_money
            )));
        }
        self.model.validate()?;
        if self.snapshot_every == 0 {
            return Err(EngineError::InvalidConfig(
                "snapshot_every must be positive".into(),
            ));
        }
        if self.sweeps > 0 && self.snapshot_every > self.sweeps {
            return Err(EngineError::InvalidConfig(format!(
                "snapshot_every ({}) exceeds sweeps ({})",
                self.snapshot_every, self.sweeps
            )));
        }
        if let InitPolicy::Explicit { incomes } = &self.init {
            if incomes.len() != self.agent_count {
                return Err(EngineError::InvalidConfig(format!(
                    "explicit init lists {} incomes for {} agents",
                    incomes.len(),
                    self.agent_count
                )));
            }
            check_incomes(incomes).map_err(|e| EngineError::InvalidConfig(e.to_string()))?;
            let sum = compensated_sum(incomes.iter().copied());
            if relative_diff(sum, self.total_money) > 1e-9 {
                return Err(EngineError::InvalidConfig(format!(
                    "explicit incomes sum to {sum}, expected total_money {}",
                    self.total_money
                )));
            }
        }
        Ok(())
    }
}

/// State of the economy at one observation point.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Snapshot {
    /// Number of sweeps completed when the snapshot was taken.
    pub sweep_index: u64,
    pub incomes: Vec<f64>,
    pub total_money: f64,
    pub model_tag: String,
    pub seed: u64,
    /// Taken right after scheduled events fired rather than on cadence.
    pub post_event: bool,
}

impl Snapshot {
    pub fn check_total(&self) -> bool {
        relative_diff(
            compensated_sum(self.incomes.iter().copied()),
            self.total_money,
        ) <= SNAPSHOT_TOTAL_TOLERANCE
    }
}

pub fn init_population(
    agent_count: usize,
    total_money: f64,
    policy: &InitPolicy,
) -> Result<Population> {
    if agent_count < 2 {
        return Err(EngineError::InvalidConfig(format!(
            "agent_count must be >= 2, got {agent_count}"
        )));
    }
    if !(total_money.is_finite() && total_money > 0.0) {
        return Err(EngineError::InvalidConfig(format!(
            "total_money must be positive, got {total_money}"
        )));
    }
    let incomes = match policy {
        InitPolicy::Equal => vec![total_money / agent_count as f64; agent_count],
        InitPolicy::Delta => {
            let mut v = vec![0.0; agent_count];
            v[0] = total_money;
            v
        }
        InitPolicy::Explicit { incomes } => {
            if incomes.len() != agent_count {
                return Err(EngineError::InvalidConfig(format!(
                    "explicit init lists {} incomes for {agent_count} agents",
                    incomes.len()
                )));
            }
            incomes.clone()
        }
    };
    Population::new(incomes).map_err(|e| EngineError::InvalidConfig(e.to_string()))
}

/// One pairwise exchange. The outputs sum to `xi + xj` up to rounding and
/// are non-negative for non-negative inputs, `λ ∈ [0,1)` and `ε ∈ [0,1]`.
#[inline]
pub fn exchange_pair(xi: f64, xj: f64, lambda_i: f64, lambda_j: f64, eps: f64) -> (f64, f64) {
    debug_assert!(xi >= 0.0 && xj >= 0.0);
    debug_assert!((0.0..=1.0).contains(&eps));
    let pool = (1.0 - lambda_i) * xi + (1.0 - lambda_j) * xj;
    (
        lambda_i * xi + eps * pool,
        lambda_j * xj + (1.0 - eps) * pool,
    )
}

/// Unbiased draw from `0..n` by Lemire's multiply-and-reject method; the
/// slow modulo path only runs on the rare rejection candidates.
#[inline]
fn uniform_index<R: Rng + ?Sized>(rng: &mut R, n: usize) -> usize {
    let n = n as u64;
    let mut m = u128::from(rng.next_u64()) * u128::from(n);
    if (m as u64) < n {
        let threshold = n.wrapping_neg() % n;
        while (m as u64) < threshold {
            m = u128::from(rng.next_u64()) * u128::from(n);
        }
    }
    (m >> 64) as usize
}

#[inline]
fn draw_pair<R: Rng + ?Sized>(rng: &mut R, n: usize) -> (usize, usize) {
    let i = uniform_index(rng, n);
    let mut j = uniform_index(rng, n - 1);
    if j >= i {
        j += 1;
    }
    (i, j)
}

/// Runs `N` pairwise interactions in place.
pub fn sweep<R: Rng + ?Sized>(pop: &mut Population, model: &ModelSpec, rng: &mut R) -> Result<()> {
    let n = pop.len();
    if n < 2 {
        return Err(EngineError::InvalidState(format!(
            "a sweep needs at least 2 agents, population has {n}"
        )));
    }
    match *model {
        ModelSpec::Dy => uniform_sweep(&mut pop.incomes, 0.0, rng),
        ModelSpec::Cc { lambda } => uniform_sweep(&mut pop.incomes, lambda, rng),
        ModelSpec::Ccm { .. } => {
            let savings = pop.savings.as_deref().ok_or_else(|| {
                EngineError::InvalidState("CCM population has no saving propensities".into())
            })?;
            let incomes = &mut pop.incomes;
            for _ in 0..n {
                let (i, j) = draw_pair(rng, n);
                let eps: f64 = rng.gen();
                let (a, b) = exchange_pair(incomes[i], incomes[j], savings[i], savings[j], eps);
                incomes[i] = a;
                incomes[j] = b;
            }
        }
    }
    Ok(())
}

fn uniform_sweep<R: Rng + ?Sized>(incomes: &mut [f64], lambda: f64, rng: &mut R) {
    let n = incomes.len();
    for _ in 0..n {
        let (i, j) = draw_pair(rng, n);
        let eps: f64 = rng.gen();
        let (a, b) = exchange_pair(incomes[i], incomes[j], lambda, lambda, eps);
        incomes[i] = a;
        incomes[j] = b;
    }
}

/// A live run: population, model, random stream and sweep counter.
#[derive(Debug, Clone)]
pub struct Simulation {
    population: Population,
    model: ModelSpec,
    rng: SimRng,
    seed: u64,
    sweeps_done: u64,
}

impl Simulation {
    /// Builds the initial population. CCM propensities are drawn here, before
    /// any exchange, as the first values of the stream.
    pub fn new(config: &RunConfig) -> Result<Self> {
        config.validate()?;
        let mut rng = seeded_rng(config.seed);
        let mut population = init_population(config.agent_count, config.total_money, &config.init)?;
        if matches!(config.model, ModelSpec::Ccm { .. }) {
            let savings = (0..population.len())
                .map(|_| config.model.draw_propensity(&mut rng).unwrap())
                .collect();
            population.savings = Some(savings);
        }
        Ok(Self {
            population,
            model: config.model,
            rng,
            seed: config.seed,
            sweeps_done: 0,
        })
    }

    pub fn population(&self) -> &Population {
        &self.population
    }

    pub fn model(&self) -> &ModelSpec {
        &self.model
    }

    pub fn sweeps_done(&self) -> u64 {
        self.sweeps_done
    }

    pub(crate) fn parts_mut(&mut self) -> (&mut Population, &ModelSpec, &mut SimRng) {
        (&mut self.population, &self.model, &mut self.rng)
    }

    pub fn step(&mut self) -> Result<()> {
        sweep(&mut self.population, &self.model, &mut self.rng)?;
        self.sweeps_done += 1;
        Ok(())
    }

    pub fn snapshot(&self, post_event: bool) -> Snapshot {
        Snapshot {
            sweep_index: self.sweeps_done,
            incomes: self.population.incomes.clone(),
            total_money: self.population.total(),
            model_tag: self.model.tag().to_string(),
            seed: self.seed,
            post_event,
        }
    }
}

/// Closed run, collecting every snapshot.
pub fn run(config: &RunConfig) -> Result<Vec<Snapshot>> {
    let mut out = Vec::new();
    run_with(config, |s| out.push(s))?;
    Ok(out)
}

/// Closed run handing each snapshot to `observe` as it is taken: one at
/// sweep 0 and one every `snapshot_every` sweeps after that.
pub fn run_with<F: FnMut(Snapshot)>(config: &RunConfig, mut observe: F) -> Result<()> {
    let mut sim = Simulation::new(config)?;
    observe(sim.snapshot(false));
    for _ in 0..config.sweeps {
        sim.step()?;
        if sim.sweeps_done() % config.snapshot_every == 0 {
            observe(sim.snapshot(false));
        }
    }
    Ok(())
}
