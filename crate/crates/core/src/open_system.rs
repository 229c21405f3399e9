//! Operators that break the closed-economy constraints, and the schedule
//! that fires them during a run.
//!
//! Percentile bands are resolved against the population sorted ascending by
//! income at the moment an operator fires (ties broken by agent index). The
//! agent at rank `r` of `N` sits at percentile `(r + ½)/N` and belongs to the
//! band `[lo, hi)` when `lo ≤ (r + ½)/N < hi`.

use rand::seq::index;
use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::engine::{EngineError, ModelSpec, Population, RunConfig, Simulation, Snapshot};
use crate::numeric::{compensated_sum, round_count};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum OpenSystemError {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("undefined allocation: {0}")]
    UndefinedAllocation(String),
    #[error("invalid schedule: {0}")]
    InvalidSchedule(String),
    #[error(transparent)]
    Engine(#[from] EngineError),
}

pub type Result<T, E = OpenSystemError> = std::result::Result<T, E>;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PercentileBand {
    pub lo: f64,
    pub hi: f64,
}

impl PercentileBand {
    pub fn new(lo: f64, hi: f64) -> Result<Self> {
        let band = Self { lo, hi };
        band.validate()?;
        Ok(band)
    }

    pub fn validate(&self) -> Result<()> {
        if 0.0 <= self.lo && self.lo < self.hi && self.hi <= 1.0 {
            Ok(())
        } else {
            Err(OpenSystemError::InvalidParameter(format!(
                "percentile band [{}, {}] must satisfy 0 <= lo < hi <= 1",
                self.lo, self.hi
            )))
        }
    }

    pub fn overlaps(&self, other: &PercentileBand) -> bool {
        self.lo < other.hi && other.lo < self.hi
    }

    fn contains_rank(&self, rank: usize, n: usize) -> bool {
        let p = (rank as f64 + 0.5) / n as f64;
        self.lo <= p && (p < self.hi || self.hi >= 1.0)
    }

    /// Agent indices in the band, in ascending income order.
    pub fn members(&self, incomes: &[f64]) -> Vec<usize> {
        let n = incomes.len();
        ascending_order(incomes)
            .into_iter()
            .enumerate()
            .filter(|&(rank, _)| self.contains_rank(rank, n))
            .map(|(_, agent)| agent)
            .collect()
    }
}

fn ascending_order(incomes: &[f64]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..incomes.len()).collect();
    order.sort_by(|&a, &b| incomes[a].total_cmp(&incomes[b]).then(a.cmp(&b)));
    order
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "policy", rename_all = "kebab-case")]
pub enum InjectionPolicy {
    Uniform,
    Proportional,
    BandTargeted { band: PercentileBand },
}

/// Income below which agents may lose their job.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", deny_unknown_fields)]
pub enum Threshold {
    /// A fixed money amount.
    Absolute(f64),
    /// The income at ascending rank `⌊q·N⌋` when the event fires.
    Percentile(f64),
}

impl Threshold {
    pub fn resolve(&self, incomes: &[f64]) -> f64 {
        match *self {
            Threshold::Absolute(x) => x,
            Threshold::Percentile(q) => {
                if incomes.is_empty() {
                    return 0.0;
                }
                let mut sorted = incomes.to_vec();
                sorted.sort_by(f64::total_cmp);
                let rank = ((q * sorted.len() as f64).floor() as usize).min(sorted.len() - 1);
                sorted[rank]
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "policy", rename_all = "lowercase")]
pub enum EntryIncome {
    Fixed { value: f64 },
    Zero,
}

impl EntryIncome {
    fn amount(&self) -> f64 {
        match *self {
            EntryIncome::Fixed { value } => value,
            EntryIncome::Zero => 0.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Operator {
    /// Multiply every income by `1 + rate`.
    Inflation {
        rate: f64,
    },
    MoneyInjection {
        amount: f64,
        #[serde(flatten)]
        policy: InjectionPolicy,
    },
    /// Zero the income of a fraction of agents earning below the threshold.
    Unemployment {
        fraction: f64,
        threshold: Threshold,
    },
    SectorTransfer {
        donor: PercentileBand,
        recipient: PercentileBand,
        fraction: f64,
    },
    AgentEntry {
        count: usize,
        #[serde(flatten)]
        income: EntryIncome,
    },
    AgentExit {
        count: usize,
        band: PercentileBand,
    },
}

impl Operator {
    /// Checks the parameter ranges that do not depend on the population.
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(OpenSystemError::InvalidParameter(msg));
        match *self {
            Operator::Inflation { rate } if !(rate.is_finite() && rate > -1.0) => {
                bad(format!("inflation rate {rate} must exceed -1"))
            }
            Operator::MoneyInjection { amount, policy } => {
                if !(amount.is_finite() && amount >= 0.0) {
                    return bad(format!("injection amount {amount} must be non-negative"));
                }
                if let InjectionPolicy::BandTargeted { band } = policy {
                    band.validate()?;
                }
                Ok(())
            }
            Operator::Unemployment {
                fraction,
                threshold,
            } => {
                if !(0.0..=1.0).contains(&fraction) {
                    return bad(format!("unemployment fraction {fraction} outside [0, 1]"));
                }
                match threshold {
                    Threshold::Absolute(x) if !(x.is_finite() && x > 0.0) => {
                        bad(format!("unemployment threshold {x} must be positive"))
                    }
                    Threshold::Percentile(q) if !(q > 0.0 && q <= 1.0) => {
                        bad(format!("unemployment percentile {q} outside (0, 1]"))
                    }
                    _ => Ok(()),
                }
            }
            Operator::SectorTransfer {
                donor,
                recipient,
                fraction,
            } => {
                donor.validate()?;
                recipient.validate()?;
                if donor.overlaps(&recipient) {
                    return bad("donor and recipient bands overlap".into());
                }
                if !(0.0..=1.0).contains(&fraction) {
                    return bad(format!("transfer fraction {fraction} outside [0, 1]"));
                }
                Ok(())
            }
            Operator::AgentEntry { income, .. } => match income {
                EntryIncome::Fixed { value } if !(value.is_finite() && value >= 0.0) => {
                    bad(format!("entrant income {value} must be non-negative"))
                }
                _ => Ok(()),
            },
            Operator::AgentExit { band, .. } => band.validate(),
            _ => Ok(()),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Event {
    pub at_sweep: u64,
    #[serde(flatten)]
    pub operator: Operator,
}

/// Events ordered by firing sweep; same-sweep events keep insertion order.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Schedule {
    events: Vec<Event>,
}

impl Schedule {
    pub fn new(mut events: Vec<Event>) -> Self {
        events.sort_by_key(|e| e.at_sweep);
        Self { events }
    }

    pub fn events(&self) -> &[Event] {
        &self.events
    }

    pub fn is_empty(&self) -> bool {
        self.events.is_empty()
    }

    /// Every event must fire within `0..=sweeps`; an event at `sweeps` fires
    /// after the last sweep.
    pub fn validate(&self, sweeps: u64) -> Result<()> {
        for (k, e) in self.events.iter().enumerate() {
            if e.at_sweep > sweeps {
                return Err(OpenSystemError::InvalidSchedule(format!(
                    "event {k} fires at sweep {} beyond the run's {sweeps} sweeps",
                    e.at_sweep
                )));
            }
            e.operator
                .validate()
                .map_err(|err| OpenSystemError::InvalidSchedule(format!("event {k}: {err}")))?;
        }
        Ok(())
    }

    fn at(&self, sweep: u64) -> impl Iterator<Item = &Event> {
        let start = self.events.partition_point(|e| e.at_sweep < sweep);
        self.events[start..]
            .iter()
            .take_while(move |e| e.at_sweep == sweep)
    }
}

pub fn apply_inflation(pop: &mut Population, rate: f64) -> Result<()> {
    Operator::Inflation { rate }.validate()?;
    let factor = 1.0 + rate;
    for x in pop.incomes_mut() {
        *x *= factor;
    }
    Ok(())
}

pub fn inject_money(pop: &mut Population, amount: f64, policy: InjectionPolicy) -> Result<()> {
    Operator::MoneyInjection { amount, policy }.validate()?;
    let n = pop.len();
    if n == 0 {
        return Err(OpenSystemError::UndefinedAllocation(
            "no agents to receive the injection".into(),
        ));
    }
    match policy {
        InjectionPolicy::Uniform => {
            let share = amount / n as f64;
            pop.incomes_mut().iter_mut().for_each(|x| *x += share);
        }
        InjectionPolicy::Proportional => {
            let total = pop.total();
            if total <= 0.0 {
                return Err(OpenSystemError::UndefinedAllocation(
                    "proportional injection into a population holding no money".into(),
                ));
            }
            pop.incomes_mut()
                .iter_mut()
                .for_each(|x| *x += amount * *x / total);
        }
        InjectionPolicy::BandTargeted { band } => {
            let members = band.members(pop.incomes());
            if members.is_empty() {
                return Err(OpenSystemError::UndefinedAllocation(format!(
                    "band [{}, {}] holds no agents",
                    band.lo, band.hi
                )));
            }
            let share = amount / members.len() as f64;
            let incomes = pop.incomes_mut();
            for i in members {
                incomes[i] += share;
            }
        }
    }
    Ok(())
}

/// Zeroes `round(fraction · eligible)` randomly chosen agents among those
/// with `0 < income < threshold`. Returns the money removed.
pub fn apply_unemployment<R: Rng + ?Sized>(
    pop: &mut Population,
    fraction: f64,
    threshold: f64,
    rng: &mut R,
) -> Result<f64> {
    Operator::Unemployment {
        fraction,
        threshold: Threshold::Absolute(threshold),
    }
    .validate()?;
    let eligible: Vec<usize> = pop
        .incomes()
        .iter()
        .enumerate()
        .filter(|(_, &x)| x > 0.0 && x < threshold)
        .map(|(i, _)| i)
        .collect();
    let count = round_count(fraction * eligible.len() as f64).min(eligible.len());
    if count == 0 {
        return Ok(0.0);
    }
    let chosen = index::sample(rng, eligible.len(), count);
    let incomes = pop.incomes_mut();
    let removed = compensated_sum(chosen.iter().map(|k| incomes[eligible[k]]));
    for k in chosen.iter() {
        incomes[eligible[k]] = 0.0;
    }
    Ok(removed)
}

pub fn sector_transfer(
    pop: &mut Population,
    donor: PercentileBand,
    recipient: PercentileBand,
    fraction: f64,
) -> Result<()> {
    Operator::SectorTransfer {
        donor,
        recipient,
        fraction,
    }
    .validate()?;
    let donors = donor.members(pop.incomes());
    let recipients = recipient.members(pop.incomes());
    if recipients.is_empty() {
        return Err(OpenSystemError::UndefinedAllocation(format!(
            "recipient band [{}, {}] holds no agents",
            recipient.lo, recipient.hi
        )));
    }
    let incomes = pop.incomes_mut();
    let mut pool = 0.0;
    for &i in &donors {
        let levy = fraction * incomes[i];
        incomes[i] -= levy;
        pool += levy;
    }
    let base = compensated_sum(recipients.iter().map(|&i| incomes[i]));
    if base > 0.0 {
        for &i in &recipients {
            incomes[i] += pool * incomes[i] / base;
        }
    } else {
        let share = pool / recipients.len() as f64;
        for &i in &recipients {
            incomes[i] += share;
        }
    }
    Ok(())
}

/// Appends `count` agents. Propensities for entrants follow `model`.
pub fn add_agents<R: Rng + ?Sized>(
    pop: &mut Population,
    count: usize,
    income: EntryIncome,
    model: &ModelSpec,
    rng: &mut R,
) -> Result<()> {
    Operator::AgentEntry { count, income }.validate()?;
    for _ in 0..count {
        let propensity = model.draw_propensity(rng);
        pop.push_agent(income.amount(), propensity);
    }
    Ok(())
}

/// Removes `count` random agents from the band; their money leaves the
/// system. Returns the money removed.
pub fn remove_agents<R: Rng + ?Sized>(
    pop: &mut Population,
    count: usize,
    band: PercentileBand,
    rng: &mut R,
) -> Result<f64> {
    band.validate()?;
    let members = band.members(pop.incomes());
    if count > members.len() {
        return Err(OpenSystemError::InvalidParameter(format!(
            "cannot remove {count} agents from a band of {}",
            members.len()
        )));
    }
    if count == 0 {
        return Ok(0.0);
    }
    let chosen: Vec<usize> = index::sample(rng, members.len(), count)
        .iter()
        .map(|k| members[k])
        .collect();
    Ok(pop.remove_agents(&chosen))
}

/// Expected money stock, tracked independently of the population's sum.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MoneyLedger {
    pub initial: f64,
    pub expected: f64,
    pub injected: f64,
    pub removed: f64,
}

impl MoneyLedger {
    fn new(initial: f64) -> Self {
        Self {
            initial,
            expected: initial,
            injected: 0.0,
            removed: 0.0,
        }
    }
}

/// Applies one operator, recording its money effect in `ledger`.
pub fn apply_operator<R: Rng + ?Sized>(
    pop: &mut Population,
    operator: &Operator,
    model: &ModelSpec,
    rng: &mut R,
    ledger: &mut MoneyLedger,
) -> Result<()> {
    match *operator {
        Operator::Inflation { rate } => {
            apply_inflation(pop, rate)?;
            ledger.expected *= 1.0 + rate;
        }
        Operator::MoneyInjection { amount, policy } => {
            inject_money(pop, amount, policy)?;
            ledger.expected += amount;
            ledger.injected += amount;
        }
        Operator::Unemployment {
            fraction,
            threshold,
        } => {
            let x_u = threshold.resolve(pop.incomes());
            if x_u > 0.0 {
                let lost = apply_unemployment(pop, fraction, x_u, rng)?;
                ledger.expected -= lost;
                ledger.removed += lost;
            }
        }
        Operator::SectorTransfer {
            donor,
            recipient,
            fraction,
        } => sector_transfer(pop, donor, recipient, fraction)?,
        Operator::AgentEntry { count, income } => {
            add_agents(pop, count, income, model, rng)?;
            let added = count as f64 * income.amount();
            ledger.expected += added;
            ledger.injected += added;
        }
        Operator::AgentExit { count, band } => {
            let lost = remove_agents(pop, count, band, rng)?;
            ledger.expected -= lost;
            ledger.removed += lost;
        }
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioOutput {
    pub snapshots: Vec<Snapshot>,
    pub ledger: MoneyLedger,
}

pub fn run_scenario(config: &RunConfig, schedule: &Schedule) -> Result<ScenarioOutput> {
    let mut snapshots = Vec::new();
    let ledger = run_scenario_with(config, schedule, |s| snapshots.push(s))?;
    Ok(ScenarioOutput { snapshots, ledger })
}

/// Open-system run. Events at sweep `t` fire in schedule order before that
/// sweep's exchanges, and a snapshot flagged `post_event` follows each
/// firing group on top of the regular cadence.
pub fn run_scenario_with<F: FnMut(Snapshot)>(
    config: &RunConfig,
    schedule: &Schedule,
    mut observe: F,
) -> Result<MoneyLedger> {
    config.validate()?;
    schedule.validate(config.sweeps).map_err(|e| match e {
        OpenSystemError::InvalidSchedule(_) => e,
        other => OpenSystemError::InvalidSchedule(other.to_string()),
    })?;
    let mut sim = Simulation::new(config)?;
    let mut ledger = MoneyLedger::new(sim.population().total());
    observe(sim.snapshot(false));
    for t in 0..=config.sweeps {
        let mut fired = false;
        for event in schedule.at(t) {
            let (pop, model, rng) = sim.parts_mut();
            apply_operator(pop, &event.operator, model, rng, &mut ledger)?;
            fired = true;
        }
        if fired {
            observe(sim.snapshot(true));
        }
        if t == config.sweeps {
            break;
        }
        sim.step()?;
        if sim.sweeps_done() % config.snapshot_every == 0 {
            observe(sim.snapshot(false));
        }
    }
    Ok(ledger)
}
