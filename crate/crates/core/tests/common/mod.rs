#![allow(dead_code)]

use kinex_core::engine::{InitPolicy, ModelSpec, RunConfig, Snapshot};
use kinex_core::open_system::{
    EntryIncome, Event, InjectionPolicy, Operator, PercentileBand, Schedule, Threshold,
};

pub fn sum(xs: &[f64]) -> f64 {
    let mut s = 0.0;
    let mut c = 0.0;
    for &x in xs {
        let t = s + x;
        c += if s.abs() >= x.abs() {
            (s - t) + x
        } else {
            (x - t) + s
        };
        s = t;
    }
    s + c
}

pub fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs())
}

/// One event of every kind, each on its own cadence sweep so the snapshot
/// just before it is the cadence one at the same sweep.
pub fn every_operator(every: u64) -> Schedule {
    let band = |lo, hi| PercentileBand::new(lo, hi).unwrap();
    let ops = [
        Operator::Inflation { rate: 0.07 },
        Operator::MoneyInjection {
            amount: 2500.0,
            policy: InjectionPolicy::BandTargeted {
                band: band(0.0, 0.3),
            },
        },
        Operator::Unemployment {
            fraction: 0.5,
            threshold: Threshold::Percentile(0.3),
        },
        Operator::SectorTransfer {
            donor: band(0.0, 0.5),
            recipient: band(0.9, 1.0),
            fraction: 0.2,
        },
        Operator::AgentEntry {
            count: 25,
            income: EntryIncome::Fixed { value: 40.0 },
        },
        Operator::AgentExit {
            count: 30,
            band: band(0.5, 1.0),
        },
        Operator::MoneyInjection {
            amount: 1000.0,
            policy: InjectionPolicy::Proportional,
        },
        Operator::Inflation { rate: -0.03 },
    ];
    Schedule::new(
        ops.into_iter()
            .enumerate()
            .map(|(k, operator)| Event {
                at_sweep: (k as u64 + 1) * every,
                operator,
            })
            .collect(),
    )
}

pub fn ccm_config(agents: usize, sweeps: u64, every: u64, seed: u64) -> RunConfig {
    RunConfig {
        agent_count: agents,
        total_money: 100.0 * agents as f64,
        model: ModelSpec::ccm_default(),
        init: InitPolicy::Equal,
        seed,
        sweeps,
        snapshot_every: every,
    }
}

/// Money added (positive) or removed by one operator, read off the
/// populations just before and just after it fired.
pub fn observed_delta(op: &Operator, pre: &[f64], post: &[f64]) -> Result<f64, String> {
    let (m_pre, m_post) = (sum(pre), sum(post));
    let expected = match *op {
        Operator::Inflation { rate } => m_pre * rate,
        Operator::MoneyInjection { amount, .. } => amount,
        Operator::SectorTransfer { .. } => 0.0,
        Operator::Unemployment { .. } => {
            if pre.len() != post.len() {
                return Err("unemployment changed the head count".into());
            }
            let mut lost = Vec::new();
            for (a, b) in pre.iter().zip(post) {
                if *b == 0.0 {
                    lost.push(*a);
                } else if a != b {
                    return Err(format!("employed income changed from {a} to {b}"));
                }
            }
            -sum(&lost)
        }
        Operator::AgentEntry { count, income } => {
            if post.len() != pre.len() + count || post[..pre.len()] != *pre {
                return Err("entry did not append agents".into());
            }
            let v = match income {
                EntryIncome::Fixed { value } => value,
                EntryIncome::Zero => 0.0,
            };
            count as f64 * v
        }
        Operator::AgentExit { count, .. } => {
            if post.len() + count != pre.len() {
                return Err("exit removed the wrong number of agents".into());
            }
            // survivors keep their order, so walk both lists together
            let mut gone = Vec::new();
            let mut j = 0;
            for &a in pre {
                if j < post.len() && post[j] == a {
                    j += 1;
                } else {
                    gone.push(a);
                }
            }
            if j != post.len() {
                return Err("survivors are not a subsequence of the population".into());
            }
            -sum(&gone)
        }
    };
    if rel(m_pre + expected, m_post) > 1e-12 {
        return Err(format!(
            "{op:?}: total went {m_pre} -> {m_post}, oracle says {}",
            m_pre + expected
        ));
    }
    Ok(expected)
}

/// Chains the per-event deltas into the final expected total.
pub fn oracle_final_total(
    initial: f64,
    schedule: &Schedule,
    snapshots: &[Snapshot],
) -> Result<f64, String> {
    let mut total = initial;
    for e in schedule.events() {
        let pre = snapshots
            .iter()
            .find(|s| s.sweep_index == e.at_sweep && !s.post_event)
            .ok_or("no cadence snapshot before an event")?;
        let post = snapshots
            .iter()
            .find(|s| s.sweep_index == e.at_sweep && s.post_event)
            .ok_or("no post-event snapshot")?;
        total += observed_delta(&e.operator, &pre.incomes, &post.incomes)?;
    }
    Ok(total)
}
