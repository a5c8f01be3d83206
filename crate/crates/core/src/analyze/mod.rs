//! Exact analysis of schedulers: induced chains, reachability, long-run
//! averages, resilience checks, a brute-force reference optimum and a
//! Monte Carlo simulator.

use thiserror::Error;

mod bounded;
pub mod chain;
pub mod oracle;
mod reward;
pub mod simulate;
mod verify;

pub use bounded::cost_bounded_reach;
pub use chain::{
    almost_sure_reach, availability, induce_chain, long_run_average_from, mp_values, solve_linear_system,
    until_probability, InducedChain,
};
pub use oracle::{brute_force_optimum, OracleError, OracleResult};
pub use reward::expected_total_reward;
pub use simulate::{simulate, SimulationConfig, SimulationError, SimulationStats, TrialStats};
pub use verify::{verify_resilient, verify_resilient_from, ErrorCheck, VerificationReport};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum AnalysisError {
    #[error("scheduler has no decision for reachable state {0}")]
    OutsideDomain(usize),
    #[error("scheduler picks choice {choice} which state {state} does not have")]
    NoSuchChoice { state: usize, choice: usize },
    #[error("goal is not reached almost surely from state {0}")]
    GoalNotSure(usize),
}
