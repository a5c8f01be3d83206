//! Index-based MDP representation shared by the base model, the
//! cost-annotated model, sub-MDPs and the goal MDP.

use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use num_traits::{One, Zero};

use crate::rational::Rational;

/// One enabled action of a state together with its successor distribution.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Choice {
    pub label: String,
    /// Successors with strictly positive probability, sorted by state index.
    pub successors: Vec<(usize, Rational)>,
}

impl Choice {
    pub fn new(label: impl Into<String>, mut successors: Vec<(usize, Rational)>) -> Self {
        successors.sort_by_key(|(t, _)| *t);
        Choice {
            label: label.into(),
            successors,
        }
    }

    pub fn probability_to(&self, target: usize) -> Rational {
        self.successors
            .iter()
            .find(|(t, _)| *t == target)
            .map(|(_, p)| p.clone())
            .unwrap_or_else(Rational::zero)
    }

    pub fn targets(&self) -> impl Iterator<Item = usize> + '_ {
        self.successors.iter().map(|(t, _)| *t)
    }
}

/// States are `0..len()`; `choices[s]` lists the actions enabled in `s`.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Mdp {
    pub choices: Vec<Vec<Choice>>,
}

impl Mdp {
    pub fn len(&self) -> usize {
        self.choices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.choices.is_empty()
    }

    pub fn choices(&self, s: usize) -> &[Choice] {
        &self.choices[s]
    }

    pub fn choice_by_label(&self, s: usize, label: &str) -> Option<usize> {
        self.choices[s].iter().position(|c| c.label == label)
    }

    pub fn full_view(&self) -> SubMdp {
        SubMdp {
            alive: vec![true; self.len()],
            enabled: self.choices.iter().map(|c| vec![true; c.len()]).collect(),
        }
    }
}

/// A sub-MDP of a host [`Mdp`]: a set of live states and, per live state, the
/// subset of its actions that remain enabled.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SubMdp {
    pub alive: Vec<bool>,
    pub enabled: Vec<Vec<bool>>,
}

impl SubMdp {
    pub fn is_empty(&self) -> bool {
        !self.alive.iter().any(|&a| a)
    }

    pub fn states(&self) -> impl Iterator<Item = usize> + '_ {
        self.alive.iter().enumerate().filter(|(_, &a)| a).map(|(s, _)| s)
    }

    pub fn state_count(&self) -> usize {
        self.alive.iter().filter(|&&a| a).count()
    }

    pub fn contains(&self, s: usize) -> bool {
        self.alive.get(s).copied().unwrap_or(false)
    }

    /// Enabled choice indices of a live state.
    pub fn enabled_choices(&self, s: usize) -> impl Iterator<Item = usize> + '_ {
        let live = self.contains(s);
        self.enabled[s]
            .iter()
            .enumerate()
            .filter(move |(_, &e)| live && e)
            .map(|(a, _)| a)
    }

    /// Restriction to `states`, keeping only the actions that stay inside.
    pub fn restrict_closed(&self, host: &Mdp, states: &[usize]) -> SubMdp {
        let mut inside = vec![false; self.alive.len()];
        for &s in states {
            inside[s] = self.alive[s];
        }
        let enabled = self
            .enabled
            .iter()
            .enumerate()
            .map(|(s, acts)| {
                acts.iter()
                    .enumerate()
                    .map(|(a, &e)| e && inside[s] && host.choices[s][a].targets().all(|t| inside[t]))
                    .collect()
            })
            .collect();
        SubMdp { alive: inside, enabled }
    }
}

/// Memoryless randomized scheduler: an optional distribution over choice
/// indices per state. States without a distribution are outside the domain.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MrScheduler {
    pub decisions: Vec<Option<Vec<(usize, Rational)>>>,
}

impl MrScheduler {
    pub fn empty(states: usize) -> Self {
        MrScheduler {
            decisions: vec![None; states],
        }
    }

    /// Plays choice `0` everywhere.
    pub fn first_choice(mdp: &Mdp) -> Self {
        let mut s = Self::empty(mdp.len());
        for state in 0..mdp.len() {
            if !mdp.choices[state].is_empty() {
                s.set_dirac(state, 0);
            }
        }
        s
    }

    pub fn set(&mut self, state: usize, mut dist: Vec<(usize, Rational)>) {
        dist.retain(|(_, p)| !p.is_zero());
        dist.sort_by_key(|(a, _)| *a);
        self.decisions[state] = Some(dist);
    }

    pub fn set_dirac(&mut self, state: usize, choice: usize) {
        self.decisions[state] = Some(vec![(choice, Rational::one())]);
    }

    pub fn get(&self, state: usize) -> Option<&[(usize, Rational)]> {
        self.decisions.get(state).and_then(|d| d.as_deref())
    }

    pub fn in_domain(&self, state: usize) -> bool {
        self.get(state).is_some()
    }

    pub fn probability(&self, state: usize, choice: usize) -> Rational {
        self.get(state)
            .and_then(|d| d.iter().find(|(a, _)| *a == choice))
            .map(|(_, p)| p.clone())
            .unwrap_or_else(Rational::zero)
    }

    /// Choices played with positive probability at `state`.
    pub fn support(&self, state: usize) -> impl Iterator<Item = usize> + '_ {
        self.get(state).into_iter().flatten().map(|(a, _)| *a)
    }

    /// Every distribution sums to one over existing choices of `mdp`.
    pub fn is_well_formed(&self, mdp: &Mdp) -> bool {
        self.decisions.iter().enumerate().all(|(s, d)| match d {
            None => true,
            Some(dist) => {
                let total: Rational = dist.iter().map(|(_, p)| p.clone()).sum();
                total.is_one()
                    && dist
                        .iter()
                        .all(|(a, p)| *a < mdp.choices[s].len() && *p > Rational::zero())
            }
        })
    }
}
