//! The cost-annotated model: after an error `e`, states are tracked as
//! triples `<e, s, r>` carrying the repair cost `r` accumulated so far,
//! until the repair reaches an operational state or exceeds the budget.

use alloc::collections::{BTreeMap, VecDeque};
use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use crate::mdp::{Choice, Mdp};
use crate::model::MdpWithRepair;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum TState {
    Base(usize),
    /// `<error, state, cost>`
    Repair {
        error: usize,
        state: usize,
        cost: u64,
    },
}

impl TState {
    pub fn base(self) -> usize {
        match self {
            TState::Base(s) => s,
            TState::Repair { state, .. } => state,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TransformedMdp {
    base: MdpWithRepair,
    cost_bound: u64,
    states: Vec<TState>,
    index: BTreeMap<TState, usize>,
    mdp: Mdp,
}

impl TransformedMdp {
    /// Builds the fragment reachable from the initial state, breadth first.
    /// The initial state gets index 0.
    pub fn new(base: &MdpWithRepair, cost_bound: u64) -> Self {
        let mut states = Vec::new();
        let mut index = BTreeMap::new();
        let mut queue = VecDeque::new();
        let mut choices: Vec<Vec<Choice>> = Vec::new();

        let init = TState::Base(base.initial());
        states.push(init);
        index.insert(init, 0);
        queue.push_back(0usize);

        while let Some(i) = queue.pop_front() {
            let current = states[i];
            let mut out = Vec::new();
            for c in base.mdp().choices(current.base()) {
                let mut succ = Vec::with_capacity(c.successors.len());
                for (target, p) in &c.successors {
                    let next = successor(base, cost_bound, current, *target);
                    let j = *index.entry(next).or_insert_with(|| {
                        states.push(next);
                        queue.push_back(states.len() - 1);
                        states.len() - 1
                    });
                    succ.push((j, p.clone()));
                }
                out.push(Choice::new(c.label.clone(), succ));
            }
            if choices.len() <= i {
                choices.resize_with(i + 1, Vec::new);
            }
            choices[i] = out;
        }
        choices.resize_with(states.len(), Vec::new);

        TransformedMdp {
            base: base.clone(),
            cost_bound,
            states,
            index,
            mdp: Mdp { choices },
        }
    }

    pub fn base(&self) -> &MdpWithRepair {
        &self.base
    }

    pub fn cost_bound(&self) -> u64 {
        self.cost_bound
    }

    pub fn mdp(&self) -> &Mdp {
        &self.mdp
    }

    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    pub fn initial(&self) -> usize {
        0
    }

    pub fn state(&self, i: usize) -> TState {
        self.states[i]
    }

    pub fn index_of(&self, s: TState) -> Option<usize> {
        self.index.get(&s).copied()
    }

    /// Index of a state by its rendered id (`"s"` or `"e#s#r"`).
    pub fn index_of_id(&self, id: &str) -> Option<usize> {
        let mut parts = id.split('#');
        let first = parts.next()?;
        match (parts.next(), parts.next(), parts.next()) {
            (None, _, _) => self.index_of(TState::Base(self.base.index_of(first)?)),
            (Some(s), Some(r), None) => self.index_of(TState::Repair {
                error: self.base.index_of(first)?,
                state: self.base.index_of(s)?,
                cost: r.parse().ok()?,
            }),
            _ => None,
        }
    }

    pub fn id(&self, i: usize) -> String {
        match self.states[i] {
            TState::Base(s) => self.base.id(s).into(),
            TState::Repair { error, state, cost } => {
                format!("{}#{}#{}", self.base.id(error), self.base.id(state), cost)
            }
        }
    }

    /// Base state this state stands for.
    pub fn base_state(&self, i: usize) -> usize {
        self.states[i].base()
    }

    /// Membership in the operational set: base operational states and
    /// triples over operational states.
    pub fn is_op(&self, i: usize) -> bool {
        self.base.is_op(self.base_state(i))
    }

    pub fn is_error(&self, i: usize) -> bool {
        matches!(self.states[i], TState::Base(s) if self.base.is_err(s))
    }

    /// Triple state `<e, s, r>` of any error.
    pub fn is_repair_copy(&self, i: usize) -> bool {
        matches!(self.states[i], TState::Repair { .. })
    }

    /// `<e, s, r>` with `s` operational: a repair of `e` finished within budget.
    pub fn is_op_of(&self, i: usize, error: usize) -> bool {
        matches!(self.states[i], TState::Repair { error: e, state, .. } if e == error && self.base.is_op(state))
    }

    pub fn cost(&self, i: usize) -> u64 {
        self.base.cost(self.base_state(i))
    }

    pub fn payoff(&self, i: usize) -> u64 {
        self.base.payoff(self.base_state(i))
    }

    /// Error states present in this fragment, by index.
    pub fn errors(&self) -> impl Iterator<Item = usize> + '_ {
        (0..self.len()).filter(|&i| self.is_error(i))
    }
}

fn successor(base: &MdpWithRepair, bound: u64, from: TState, target: usize) -> TState {
    match from {
        TState::Base(s) if base.is_err(s) => {
            // An error whose own cost already exceeds the budget starts no
            // tracked repair.
            if base.cost(s) <= bound {
                TState::Repair {
                    error: s,
                    state: target,
                    cost: base.cost(s),
                }
            } else {
                TState::Base(target)
            }
        }
        TState::Base(_) => TState::Base(target),
        TState::Repair { error, state, cost } => {
            let next = cost + base.cost(state);
            if !base.is_op(state) && next <= bound {
                TState::Repair {
                    error,
                    state: target,
                    cost: next,
                }
            } else {
                TState::Base(target)
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PathRecord {
    pub states: Vec<usize>,
    pub actions: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum PathError {
    #[error("path is not valid in the source model")]
    Invalid,
    #[error("path does not start in the initial state")]
    WrongStart,
}

impl PathRecord {
    pub fn single(state: usize) -> Self {
        PathRecord {
            states: alloc::vec![state],
            actions: Vec::new(),
        }
    }

    pub fn push(&mut self, action: impl Into<String>, state: usize) {
        self.actions.push(action.into());
        self.states.push(state);
    }

    /// Every step `(s, action, s')` has positive probability.
    pub fn is_valid_in(&self, mdp: &Mdp) -> bool {
        if self.states.is_empty() || self.actions.len() + 1 != self.states.len() {
            return false;
        }
        if self.states.iter().any(|&s| s >= mdp.len()) {
            return false;
        }
        self.actions.iter().enumerate().all(|(k, label)| {
            mdp.choice_by_label(self.states[k], label).is_some_and(|c| {
                mdp.choices(self.states[k])[c]
                    .successors
                    .iter()
                    .any(|(t, _)| *t == self.states[k + 1])
            })
        })
    }
}

pub fn path_cost(m: &MdpWithRepair, p: &PathRecord) -> u64 {
    p.states.iter().map(|&s| m.cost(s)).sum()
}

pub fn path_payoff(m: &MdpWithRepair, p: &PathRecord) -> u64 {
    p.states.iter().map(|&s| m.payoff(s)).sum()
}

pub fn transformed_path_cost(mt: &TransformedMdp, p: &PathRecord) -> u64 {
    p.states.iter().map(|&s| mt.cost(s)).sum()
}

pub fn transformed_path_payoff(mt: &TransformedMdp, p: &PathRecord) -> u64 {
    p.states.iter().map(|&s| mt.payoff(s)).sum()
}

/// Replaces every triple `<e, s, r>` by `s`.
pub fn project_path(mt: &TransformedMdp, p: &PathRecord) -> Result<PathRecord, PathError> {
    if !p.is_valid_in(mt.mdp()) {
        return Err(PathError::Invalid);
    }
    Ok(PathRecord {
        states: p.states.iter().map(|&s| mt.base_state(s)).collect(),
        actions: p.actions.clone(),
    })
}

/// The unique path of the cost-annotated model projecting onto `p`.
pub fn lift_path(mt: &TransformedMdp, p: &PathRecord) -> Result<PathRecord, PathError> {
    let base = mt.base();
    if !p.is_valid_in(base.mdp()) {
        return Err(PathError::Invalid);
    }
    if p.states[0] != base.initial() {
        return Err(PathError::WrongStart);
    }
    let mut current = mt.initial();
    let mut lifted = PathRecord::single(current);
    for (label, &next) in p.actions.iter().zip(&p.states[1..]) {
        let c = mt.mdp().choice_by_label(current, label).ok_or(PathError::Invalid)?;
        current = mt.mdp().choices(current)[c]
            .targets()
            .find(|&t| mt.base_state(t) == next)
            .ok_or(PathError::Invalid)?;
        lifted.push(label.clone(), current);
    }
    Ok(lifted)
}
