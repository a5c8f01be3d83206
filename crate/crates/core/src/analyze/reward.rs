use alloc::vec::Vec;

use super::chain::{self, induce_chain};
use super::AnalysisError;
use crate::mdp::MrScheduler;
use crate::rational::Rational;
use crate::synth::GoalMdp;

/// Expected total reward collected before absorption in `goal`.
pub fn expected_total_reward(n: &GoalMdp, sched: &MrScheduler, from: usize) -> Result<Rational, AnalysisError> {
    let c = induce_chain(&n.mdp, sched, from)?;
    // Rewards sit on the goal_E states, which move to goal surely.
    let values: Vec<Rational> =
        chain::expected_total_reward(&c, &n.reward, n.goal).ok_or(AnalysisError::GoalNotSure(from))?;
    Ok(values[0].clone())
}
