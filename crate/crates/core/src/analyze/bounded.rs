//! Cost-bounded reachability of operational states under a finite-memory
//! scheduler on the original model, by unfolding the remaining budget.

use alloc::collections::BTreeMap;
use alloc::vec;
use alloc::vec::Vec;

use num_traits::{One, Zero};

use super::chain::solve_linear_system;
use super::AnalysisError;
use crate::graph;
use crate::model::MdpWithRepair;
use crate::rational::Rational;
use crate::synth::{FiniteMemoryScheduler, Memory};

/// Probability, from configuration `start`, that the first operational
/// state is reached with accumulated cost at most `bound`. The cost of the
/// start state itself counts.
pub fn cost_bounded_reach(
    m: &MdpWithRepair,
    sched: &FiniteMemoryScheduler,
    start: (usize, Memory),
    bound: u64,
) -> Result<Rational, AnalysisError> {
    // configurations reachable from start, with their one-step distributions
    let mut keys = vec![start];
    let mut index = BTreeMap::new();
    index.insert(start, 0usize);
    let mut rows: Vec<Vec<(usize, Rational)>> = Vec::new();
    let mut k = 0;
    while k < keys.len() {
        let (s, mem) = keys[k];
        let dist = sched.decide(s, mem).ok_or(AnalysisError::OutsideDomain(s))?;
        let mut acc: BTreeMap<usize, Rational> = BTreeMap::new();
        for (a, pa) in dist {
            let choice = m
                .mdp()
                .choices(s)
                .get(*a)
                .ok_or(AnalysisError::NoSuchChoice { state: s, choice: *a })?;
            for (t, p) in &choice.successors {
                let next = sched.next_memory(s, mem, *t).ok_or(AnalysisError::OutsideDomain(*t))?;
                let j = *index.entry((*t, next)).or_insert_with(|| {
                    keys.push((*t, next));
                    keys.len() - 1
                });
                *acc.entry(j).or_insert_with(Rational::zero) += pa * p;
            }
        }
        rows.push(acc.into_iter().filter(|(_, p)| !p.is_zero()).collect());
        k += 1;
    }

    let n = keys.len();
    let mut levels: Vec<Vec<Rational>> = Vec::with_capacity(bound as usize + 1);
    for b in 0..=bound {
        let mut value = vec![Rational::zero(); n];
        let mut unknown = vec![false; n];
        for (i, &(s, _)) in keys.iter().enumerate() {
            if m.is_op(s) {
                value[i] = Rational::one();
            } else if m.cost(s) > b {
                value[i] = Rational::zero();
            } else if m.cost(s) > 0 {
                let lower = &levels[(b - m.cost(s)) as usize];
                value[i] = rows[i].iter().map(|(t, p)| p * &lower[*t]).sum();
            } else {
                unknown[i] = true;
            }
        }
        // zero-cost states share this level
        let mut rhs = vec![Rational::zero(); n];
        let mut rev = vec![Vec::new(); n];
        for i in (0..n).filter(|&i| unknown[i]) {
            for (t, p) in &rows[i] {
                if unknown[*t] {
                    rev[*t].push(i);
                } else {
                    rhs[i] += p * &value[*t];
                }
            }
        }
        let seeds: Vec<usize> = (0..n).filter(|&i| unknown[i] && !rhs[i].is_zero()).collect();
        let positive = graph::reachable(&rev, &unknown, &seeds);
        let vars: Vec<usize> = (0..n).filter(|&i| positive[i]).collect();
        let mut pos = vec![usize::MAX; n];
        for (j, &i) in vars.iter().enumerate() {
            pos[i] = j;
        }
        let mut a = vec![vec![Rational::zero(); vars.len()]; vars.len()];
        let mut bvec = vec![Rational::zero(); vars.len()];
        for (j, &i) in vars.iter().enumerate() {
            a[j][j] += Rational::one();
            bvec[j] = rhs[i].clone();
            for (t, p) in &rows[i] {
                if pos[*t] != usize::MAX {
                    a[j][pos[*t]] -= p;
                }
            }
        }
        let x = solve_linear_system(a, bvec).expect("reduced bounded-reach system is nonsingular");
        for (j, &i) in vars.iter().enumerate() {
            value[i] = x[j].clone();
        }
        levels.push(value);
    }
    Ok(levels[bound as usize][0].clone())
}
