//! Monte Carlo simulation of a finite-memory scheduler on the original
//! model. Trial `i` draws from ChaCha8 seeded with `seed` on stream `i`, so
//! trials are independent of each other and of execution order.

use alloc::collections::BTreeMap;
use alloc::vec::Vec;

use rand_chacha::ChaCha8Rng;
use rand_core::{RngCore, SeedableRng};

use crate::model::MdpWithRepair;
use crate::rational::to_f64;
use crate::synth::{FiniteMemoryScheduler, Memory};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SimulationConfig {
    pub steps: u64,
    pub trials: u64,
    pub seed: u64,
    /// Number of leading steps of every trial to record.
    pub trace: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrialStats {
    pub mean_payoff: f64,
    /// Repairs that reached an operational state within the budget.
    pub repairs_ok: u64,
    /// Repairs that exceeded the budget before reaching an operational state.
    pub repairs_failed: u64,
    /// Repairs still undecided at the horizon.
    pub repairs_open: u64,
    pub trace: Vec<(usize, Memory)>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimulationStats {
    pub trials: Vec<TrialStats>,
    /// Mean over trials; `None` without trials.
    pub mean_availability: Option<f64>,
    /// Sample standard deviation of the per-trial means.
    pub availability_std_dev: Option<f64>,
    /// Decided repairs that succeeded; `None` if no repair was decided.
    pub repair_success_rate: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum SimulationError {
    #[error("no decision for state {state} with memory {memory:?}")]
    NoDecision { state: usize, memory: Memory },
    #[error("no memory update from state {state} with memory {memory:?} to {next}")]
    NoUpdate { state: usize, memory: Memory, next: usize },
    #[error("choice {choice} does not exist in state {state}")]
    NoSuchChoice { state: usize, choice: usize },
}

/// Dense, float-valued form of the scheduler over reachable configurations.
struct Compiled {
    keys: Vec<(usize, Memory)>,
    payoff: Vec<f64>,
    /// Cumulative action probabilities, pointing into `successors`.
    actions: Vec<Vec<(f64, usize)>>,
    /// Cumulative successor probabilities per action slot.
    successors: Vec<Vec<Vec<(f64, usize)>>>,
}

fn compile(m: &MdpWithRepair, s: &FiniteMemoryScheduler) -> Result<Compiled, SimulationError> {
    let mut keys = Vec::new();
    let mut index = BTreeMap::new();
    let mut actions = Vec::new();
    let mut successors = Vec::new();
    keys.push(s.initial);
    index.insert(s.initial, 0usize);
    let mut k = 0;
    while k < keys.len() {
        let (state, memory) = keys[k];
        let dist = s
            .decide(state, memory)
            .ok_or(SimulationError::NoDecision { state, memory })?;
        let mut table = Vec::new();
        let mut slots = Vec::new();
        let mut acc = 0.0;
        for (a, pa) in dist {
            let choice = m
                .mdp()
                .choices(state)
                .get(*a)
                .ok_or(SimulationError::NoSuchChoice { state, choice: *a })?;
            acc += to_f64(pa);
            let mut succ = Vec::new();
            let mut acc_t = 0.0;
            for (t, p) in &choice.successors {
                let mem = s.next_memory(state, memory, *t).ok_or(SimulationError::NoUpdate {
                    state,
                    memory,
                    next: *t,
                })?;
                let j = *index.entry((*t, mem)).or_insert_with(|| {
                    keys.push((*t, mem));
                    keys.len() - 1
                });
                acc_t += to_f64(p);
                succ.push((acc_t, j));
            }
            table.push((acc, slots.len()));
            slots.push(succ);
        }
        actions.push(table);
        successors.push(slots);
        k += 1;
    }
    let payoff = keys.iter().map(|&(st, _)| m.payoff(st) as f64).collect();
    Ok(Compiled {
        keys,
        payoff,
        actions,
        successors,
    })
}

fn uniform(rng: &mut ChaCha8Rng) -> f64 {
    (rng.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
}

fn pick<T: Copy>(table: &[(f64, T)], u: f64) -> T {
    table
        .iter()
        .find(|(c, _)| u < *c)
        .or(table.last())
        .map(|(_, v)| *v)
        .expect("nonempty distribution")
}

pub fn simulate(
    m: &MdpWithRepair,
    s: &FiniteMemoryScheduler,
    config: &SimulationConfig,
) -> Result<SimulationStats, SimulationError> {
    if config.trials == 0 {
        return Ok(SimulationStats {
            trials: Vec::new(),
            mean_availability: None,
            availability_std_dev: None,
            repair_success_rate: None,
        });
    }
    let c = compile(m, s)?;
    let bound = s.cost_bound;
    let mut trials = Vec::with_capacity(config.trials as usize);
    for trial in 0..config.trials {
        let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
        rng.set_stream(trial);
        let mut cur = 0usize;
        let mut total = 0.0;
        let mut stats = TrialStats {
            mean_payoff: 0.0,
            repairs_ok: 0,
            repairs_failed: 0,
            repairs_open: 0,
            trace: Vec::new(),
        };
        // cost of the running repair, if one is undecided
        let mut repair: Option<u64> = None;
        for step in 0..config.steps {
            let (state, memory) = c.keys[cur];
            if step < config.trace as u64 {
                stats.trace.push((state, memory));
            }
            total += c.payoff[cur];
            if let Some(cost) = repair {
                if m.is_op(state) {
                    stats.repairs_ok += 1;
                    repair = None;
                } else {
                    let next = cost + m.cost(state);
                    if next > bound {
                        stats.repairs_failed += 1;
                        repair = None;
                    } else {
                        repair = Some(next);
                    }
                }
            } else if m.is_err(state) {
                if m.cost(state) > bound {
                    stats.repairs_failed += 1;
                } else {
                    repair = Some(m.cost(state));
                }
            }
            let slot = pick(&c.actions[cur], uniform(&mut rng));
            cur = pick(&c.successors[cur][slot], uniform(&mut rng));
        }
        if repair.is_some() {
            stats.repairs_open += 1;
        }
        stats.mean_payoff = if config.steps == 0 {
            0.0
        } else {
            total / config.steps as f64
        };
        trials.push(stats);
    }
    let n = trials.len() as f64;
    let mean = trials.iter().map(|t| t.mean_payoff).sum::<f64>() / n;
    let var = if trials.len() > 1 {
        trials
            .iter()
            .map(|t| (t.mean_payoff - mean) * (t.mean_payoff - mean))
            .sum::<f64>()
            / (n - 1.0)
    } else {
        0.0
    };
    let ok: u64 = trials.iter().map(|t| t.repairs_ok).sum();
    let decided: u64 = ok + trials.iter().map(|t| t.repairs_failed).sum::<u64>();
    Ok(SimulationStats {
        mean_availability: Some(mean),
        availability_std_dev: Some(libm::sqrt(var)),
        repair_success_rate: if decided == 0 {
            None
        } else {
            Some(ok as f64 / decided as f64)
        },
        trials,
    })
}
